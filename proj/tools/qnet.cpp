// qnet: headless scenario runs, validation, coexistence sweeps, reports and
// the HTTP gateway.
//
// Exit codes: 0 success (for `run`: no request ended Failed), 1 runtime
// failure or Failed requests, 2 schema/usage errors.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qnet/gateway/coexistence.hpp"
#include "qnet/gateway/runner.hpp"
#include "qnet/gateway/scenario.hpp"
#include "qnet/gateway/server.hpp"

namespace fs = std::filesystem;
using namespace qnet;
using namespace qnet::gateway;

namespace {

constexpr int kExitFailed = 1;
constexpr int kExitSchema = 2;

ApiServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

std::vector<double> parse_powers(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw SchemaError("--powers: '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw SchemaError("--powers: empty list");
  return out;
}

int cmd_run(const std::string& scenario, const std::string& out, const std::optional<std::uint64_t>& seed,
            std::vector<std::string> overrides) {
  if (seed) overrides.push_back("seed=" + std::to_string(*seed));
  auto s = load_scenario(scenario, overrides);
  int code = run_to_dir(s, out);
  std::ifstream summary(fs::path(out) / "summary.json");
  std::cout << summary.rdbuf();
  return code;
}

/// A document with "nodes" is a topology; anything else must be a scenario.
int cmd_validate(const std::string& path) {
  auto doc = detail::read_json_file(path, "input");
  if (doc.is_object() && doc.contains("nodes")) {
    auto g = topology::load_topology(doc);
    std::cout << "topology ok: " << g.nodes().size() << " nodes, " << g.links().size() << " links, "
              << g.grid().size() << " channels\n";
    return 0;
  }
  auto s = load_scenario(path);
  std::cout << "scenario ok: '" << s.name << "', " << s.requests.size() << " requests, " << s.faults.size()
            << " faults" << (s.coexistence ? ", coexistence sweep" : "") << "\n";
  return 0;
}

int cmd_sweep(const std::string& scenario, const std::string& powers, const std::string& out) {
  auto s = load_scenario(scenario);
  if (!s.coexistence) throw SchemaError("scenario has no coexistence_sweep section");
  std::vector<double> p;
  if (!powers.empty()) p = parse_powers(powers);
  auto r = run_coexistence(*s.coexistence, powers.empty() ? nullptr : &p);
  if (out.empty()) {
    write_coexistence_csv(std::cout, r);
  } else {
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("IoError", "cannot write '" + out + "'");
    write_coexistence_csv(f, r);
  }
  std::cerr << to_json(r).dump() << "\n";
  return 0;
}

int cmd_report(const std::string& dir) {
  auto summary = detail::read_json_file(fs::path(dir) / "summary.json", "summary");
  std::cout << "scenario " << summary.value("scenario", std::string()) << " (seed " << summary.value("seed", 0ULL)
            << ")\n";
  std::cout << "requests: " << summary.value("requests", 0) << ", unfinished: " << summary.value("unfinished", 0)
            << "\n";
  for (const auto& [state, n] : summary["final_states"].items()) std::cout << "  " << state << ": " << n << "\n";
  std::cout << "blocking probability: " << summary.value("blocking_probability", 0.0) << "\n";
  if (!summary["mean_time_to_stored_s"].is_null())
    std::cout << "mean time to Stored: " << summary["mean_time_to_stored_s"].get<double>() << " s\n";
  std::cout << "ebits delivered: " << summary.value("ebits_delivered", 0LL) << "\n";
  std::ifstream results(fs::path(dir) / "results.ndjson");
  std::string line;
  std::cout << "\nrequest     final      ebits  batches  duration_s  reason\n";
  while (std::getline(results, line)) {
    if (line.empty()) continue;
    auto r = control::result_from_json(sim::Json::parse(line));
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-10s  %-9s  %6lld  %7zu  %10.3f  %s\n", r.request_id.c_str(),
                  r.final_state.c_str(), r.ebits_delivered, r.statistics.size(), r.virtual_duration_s,
                  r.reason.c_str());
    std::cout << buf;
  }
  return 0;
}

int cmd_serve(const std::string& scenario, double speed) {
  const char* token = std::getenv("QNET_TOKEN");
  if (!token || !*token) {
    std::cerr << "qnet serve: QNET_TOKEN must be set\n";
    return kExitFailed;
  }
  std::string addr = std::getenv("QNET_LISTEN_ADDR") ? std::getenv("QNET_LISTEN_ADDR") : "127.0.0.1:8080";
  auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw SchemaError("QNET_LISTEN_ADDR must be host:port");
  std::string host = addr.substr(0, colon);
  int port = std::stoi(addr.substr(colon + 1));

  auto s = load_scenario(scenario);
  Service svc(s, token);
  ApiServer server(svc);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  svc.start_clock(speed);
  std::cerr << "qnet gateway listening on " << host << ":" << port << " (virtual speed x" << speed << ")\n";
  bool ok = server.listen(host, port);
  svc.stop_clock();
  g_server = nullptr;
  if (!ok) std::cerr << "qnet serve: could not bind " << addr << "\n";
  return ok ? 0 : kExitFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qnet: quantum network control plane and simulator"};
  app.require_subcommand(1);

  std::string scenario, out, powers, path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  double speed = 1.0;

  auto* run = app.add_subcommand("run", "Run a scenario to quiescence and write its outputs");
  run->add_option("scenario", scenario, "Scenario file")->required();
  run->add_option("--out", out, "Output directory")->required();
  run->add_option("--seed", seed, "Root seed (overrides the scenario)");
  run->add_option("--override", overrides, "Dotted key=value applied to the scenario document");

  auto* validate = app.add_subcommand("validate", "Check a topology or scenario file");
  validate->add_option("file", path, "Topology or scenario file")->required();

  auto* sweep = app.add_subcommand("sweep-coexistence", "Print the calibrated coexistence sweep as CSV");
  sweep->add_option("scenario", scenario, "Scenario file with a coexistence_sweep section")->required();
  sweep->add_option("--powers", powers, "Comma-separated launch powers in dBm");
  sweep->add_option("--out", out, "CSV path (default: stdout)");

  auto* report = app.add_subcommand("report", "Summarize a results directory");
  report->add_option("dir", path, "Directory written by `run`")->required();

  auto* serve = app.add_subcommand("serve", "Serve the HTTP gateway (QNET_TOKEN, QNET_LISTEN_ADDR)");
  serve->add_option("scenario", scenario, "Scenario providing topology and model parameters")->required();
  serve->add_option("--speed", speed, "Virtual seconds per wall-clock second")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitSchema;
  }

  try {
    if (*run) return cmd_run(scenario, out, seed, overrides);
    if (*validate) return cmd_validate(path);
    if (*sweep) return cmd_sweep(scenario, powers, out);
    if (*report) return cmd_report(path);
    if (*serve) return cmd_serve(scenario, speed);
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const Error& e) {
    std::cerr << e.code() << ": " << e.what() << "\n";
    return kExitFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailed;
  }
  return kExitFailed;
}
