#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qnet/control/control_plane.hpp"
#include "support/canonical.hpp"

using namespace qnet;
using namespace qnet::control;
using qnet::testing::canonical_topology;
using S = RequestState;

namespace {

EntanglementRequest basic_request(QubitType q = QubitType::Polarization, long long target = 200) {
  EntanglementRequest r;
  r.requester = "alice";
  r.qubit_type = q;
  r.node_a = "QN1";
  r.node_b = "QN2";
  r.start_time_s = 0;
  r.end_time_s = 1e6;
  r.target_ebits = target;
  return r;
}

ControlConfig quiet_config() {
  ControlConfig c;
  c.duty_cycle_s = 0;
  return c;
}

std::string type_of(const sim::TraceRecord& r) {
  return r.payload.contains("type") ? r.payload["type"].get<std::string>() : std::string();
}

/// Per-request state sequence as seen in the trace.
std::vector<S> trace_states(const sim::Engine& e, const std::string& id) {
  std::vector<S> out;
  for (const auto& r : e.trace())
    if (r.topic == topics::request_state(id) && r.payload.contains("state"))
      out.push_back(request_state_from_string(r.payload["state"].get<std::string>()));
  return out;
}

/// Index of the first trace record matching (type, optional sender); npos if none.
std::size_t first_index(const sim::Engine& e, const std::string& corr, const std::string& type,
                        const std::string& sender = {}) {
  const auto& t = e.trace();
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i].correlation_id == corr && type_of(t[i]) == type && (sender.empty() || t[i].sender == sender)) return i;
  return std::string::npos;
}
std::size_t last_index(const sim::Engine& e, const std::string& corr, const std::string& type,
                       const std::string& sender = {}) {
  const auto& t = e.trace();
  for (std::size_t i = t.size(); i-- > 0;)
    if (t[i].correlation_id == corr && type_of(t[i]) == type && (sender.empty() || t[i].sender == sender)) return i;
  return std::string::npos;
}

void expect_released(const ControlPlane& cp) {
  EXPECT_EQ(cp.graph().occupied_channel_count(), 0u);
  EXPECT_EQ(cp.sdn().total_rules(), 0u);
  EXPECT_TRUE(cp.eps_allocations().empty());
  for (const auto& [id, n] : cp.graph().nodes())
    if (n.kind == NodeKind::EPS) EXPECT_EQ(eps_free_pairs(cp.graph(), cp.eps_allocations(), id), n.wavelength_outputs / 2);
}

const std::vector<S> kHappyPath{S::Received,    S::EpsSelected, S::PathsEstablished,
                                S::PathsVerified, S::Calibrating, S::Ready,
                                S::Distributing, S::Ended,       S::Stored};

}  // namespace

// ---- discovery ------------------------------------------------------------------

TEST(Discovery, ConsistentTagsMakeEveryResourceSchedulable) {
  ControlPlane cp(canonical_topology(), {}, quiet_config(), 1);
  cp.register_all(0);
  cp.run();
  ASSERT_TRUE(cp.topology_built());
  EXPECT_EQ(cp.schedulable(), (std::set<std::string>{"E1", "QN1", "QN2", "SW1"}));
  EXPECT_TRUE(cp.quarantined().empty());
  EXPECT_EQ(cp.graph().nodes().size(), 4u);

  // register -> query -> agent topology -> per-claim verification -> built
  const auto& e = cp.engine();
  auto last_register = last_index(e, "discovery", msg::kRegister);
  auto query = first_index(e, "discovery", msg::kTopologyQuery);
  auto update = first_index(e, "discovery", msg::kTopologyUpdate, kSdnAgentId);
  auto first_verify = first_index(e, "discovery", msg::kVerifyClaims);
  auto last_verified = last_index(e, "discovery", msg::kClaimsVerified);
  auto built = first_index(e, "discovery", msg::kTopologyBuilt);
  ASSERT_NE(built, std::string::npos);
  EXPECT_LT(last_register, query);
  EXPECT_LT(query, update);
  EXPECT_LT(update, first_verify);
  EXPECT_LT(last_verified, built);
  int verifies = 0;
  for (const auto& r : e.trace()) verifies += type_of(r) == msg::kClaimsVerified ? 1 : 0;
  EXPECT_EQ(verifies, 4);
}

TEST(Discovery, ClaimContradictingTagIsQuarantinedOthersUnaffected) {
  auto g = canonical_topology();
  ControlPlane cp(g, {}, quiet_config(), 1);
  for (const auto& [id, n] : g.nodes()) {
    auto reg = registration_from_config(n);
    if (id == "QN1") reg.claims.at(0).remote = {"SW1", 5};  // the tag says SW1:1
    cp.register_resource(reg, 0);
  }
  cp.run();
  EXPECT_EQ(cp.quarantined(), std::set<std::string>{"QN1"});
  EXPECT_EQ(cp.schedulable(), (std::set<std::string>{"E1", "QN2", "SW1"}));
  bool saw_mismatch = false;
  for (const auto& r : cp.engine().trace())
    if (type_of(r) == msg::kClaimsVerified && r.payload["resource_id"] == "QN1") {
      EXPECT_FALSE(r.payload["ok"].get<bool>());
      saw_mismatch = !r.payload["mismatches"].empty();
    }
  EXPECT_TRUE(saw_mismatch);

  // A quarantined end node makes requests for it invalid, without reservation.
  auto id = cp.submit(basic_request(), 1);
  cp.run();
  EXPECT_EQ(cp.record(id)->state, S::Rejected);
  EXPECT_EQ(cp.record(id)->reject_reason, RejectReason::InvalidRequest);
  expect_released(cp);
}

TEST(Discovery, LateRegistrationIsAnnouncedAsynchronously) {
  auto g = canonical_topology();
  ControlPlane cp(g, {}, quiet_config(), 1);
  for (const auto& [id, n] : g.nodes())
    if (id != "QN2") cp.register_resource(registration_from_config(n), 0);
  cp.register_resource(registration_from_config(g.node("QN2")), 5.0);
  cp.run_until(1.0);
  ASSERT_TRUE(cp.topology_built());
  EXPECT_FALSE(cp.schedulable().count("QN2"));
  cp.run();
  EXPECT_TRUE(cp.schedulable().count("QN2"));
  bool announced = false;
  for (const auto& r : cp.engine().trace())
    if (type_of(r) == msg::kTopologyUpdate && r.sender == kServerId && r.payload["change"] == "resource_added" &&
        r.payload["resource"] == "QN2") {
      announced = true;
      EXPECT_GE(r.t_ns, sim::seconds(5.0));
    }
  EXPECT_TRUE(announced);
}

TEST(Discovery, RequestsBeforeTopologyAreHeldUntilBuilt) {
  ControlPlane cp(canonical_topology(), {}, quiet_config(), 3);
  auto id = cp.submit(basic_request(QubitType::Polarization, 50), 0);
  cp.register_all(0);
  cp.run();
  const auto& h = cp.record(id)->history;
  ASSERT_GE(h.size(), 2u);
  // The server builds the topology as the last claim verification arrives.
  auto verified = last_index(cp.engine(), "discovery", msg::kClaimsVerified);
  EXPECT_GE(h[1].t_ns, cp.engine().trace()[verified].t_ns);
  EXPECT_GT(h[1].t_ns, h[0].t_ns);
  EXPECT_EQ(cp.record(id)->state, S::Stored);
}

// ---- EPS selection -------------------------------------------------------------

TEST(SelectEps, OneEpsWithFourOutputsServesTwoPairs) {
  auto g = canonical_topology();
  EpsAllocations alloc;
  auto c = select_eps(basic_request(), g, {}, alloc, {});
  ASSERT_TRUE(std::holds_alternative<EpsCandidate>(c));
  EXPECT_EQ(std::get<EpsCandidate>(c).eps, "E1");
  ++alloc["E1"];
  EXPECT_EQ(eps_free_pairs(g, alloc, "E1"), 1);
  ASSERT_TRUE(std::holds_alternative<EpsCandidate>(select_eps(basic_request(), g, {}, alloc, {})));
  ++alloc["E1"];
  auto full = select_eps(basic_request(), g, {}, alloc, {});
  ASSERT_TRUE(std::holds_alternative<Rejection>(full));
  EXPECT_EQ(std::get<Rejection>(full).reason, RejectReason::NoCapacity);
}

TEST(SelectEps, UnsupportedQubitTypeIsNoCapableEps) {
  using namespace qnet::testing;
  auto e1 = make_node("E1", NodeKind::EPS, 4);
  e1.qubit_types = {QubitType::TimeBin};
  auto g = tagged_graph({e1, make_node("SW1", NodeKind::OpticalSwitch, 16), make_node("QN1", NodeKind::QNode, 2),
                         make_node("QN2", NodeKind::QNode, 2)},
                        {{"L1", "E1", 0, "SW1", 0, 5}, {"L2", "SW1", 1, "QN1", 0, 10}, {"L3", "SW1", 2, "QN2", 0, 12}},
                        canonical_grid());
  auto out = select_eps(basic_request(QubitType::Polarization), g, {}, {}, {});
  ASSERT_TRUE(std::holds_alternative<Rejection>(out));
  EXPECT_EQ(std::get<Rejection>(out).reason, RejectReason::NoCapableEps);
  EXPECT_TRUE(std::holds_alternative<EpsCandidate>(select_eps(basic_request(QubitType::TimeBin), g, {}, {}, {})));
}

TEST(SelectEps, UnreachableNodeIsNoFeasiblePaths) {
  using namespace qnet::testing;
  auto g = tagged_graph({make_node("E1", NodeKind::EPS, 4), make_node("QN1", NodeKind::QNode, 2),
                         make_node("QN2", NodeKind::QNode, 2)},
                        {{"L1", "E1", 0, "QN1", 0, 5}}, canonical_grid());
  auto out = select_eps(basic_request(), g, {}, {}, {});
  ASSERT_TRUE(std::holds_alternative<Rejection>(out));
  EXPECT_EQ(std::get<Rejection>(out).reason, RejectReason::NoFeasiblePaths);
}

TEST(SelectEps, EqualHopsLowerCombinedLossWins) {
  using namespace qnet::testing;
  // Both EPSs reach each node in one hop. O-band 0.5 dB/km:
  //   E1 legs 2 km + 4 km -> 3 dB;  E2 legs 4 km + 6 km -> 5 dB.
  auto g = tagged_graph({make_node("E1", NodeKind::EPS, 4), make_node("E2", NodeKind::EPS, 4),
                         make_node("QN1", NodeKind::QNode, 4), make_node("QN2", NodeKind::QNode, 4)},
                        {{"A1", "E2", 0, "QN1", 0, 4},
                         {"A2", "E2", 1, "QN2", 0, 6},
                         {"B1", "E1", 0, "QN1", 1, 2},
                         {"B2", "E1", 1, "QN2", 1, 4}},
                        canonical_grid(), 0.5);
  // Independent enumeration of candidates under the stated preference order.
  struct Cand {
    std::string id;
    int hops;
    double loss_db;
  };
  std::vector<Cand> cands{{"E2", 2, 0.5 * (4 + 6)}, {"E1", 2, 0.5 * (2 + 4)}};
  std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
    return std::tie(x.hops, x.loss_db, x.id) < std::tie(y.hops, y.loss_db, y.id);
  });
  auto out = select_eps(basic_request(), g, {}, {}, {});
  ASSERT_TRUE(std::holds_alternative<EpsCandidate>(out));
  const auto& c = std::get<EpsCandidate>(out);
  EXPECT_EQ(c.eps, cands.front().id);
  EXPECT_EQ(c.hops, 2u);
  EXPECT_NEAR(c.loss.db(), 3.0, 1e-6);

  // Quarantining the winner leaves the other one.
  auto other = select_eps(basic_request(), g, {"E1"}, {}, {});
  EXPECT_EQ(std::get<EpsCandidate>(other).eps, "E2");
}

// ---- path establishment --------------------------------------------------------

TEST(EstablishPaths, LinearTopologyReservesThreeLightpaths) {
  auto g = canonical_topology();
  SdnAgent sdn(g);
  auto before = g.occupied_channel_count();
  auto out = establish_paths(g, sdn, basic_request(), "E1", {}, {});
  ASSERT_TRUE(std::holds_alternative<EstablishedPaths>(out));
  const auto& p = std::get<EstablishedPaths>(out);
  EXPECT_EQ(p.all().size(), 3u);
  EXPECT_EQ(p.quantum_a.nodes, (std::vector<std::string>{"E1", "SW1", "QN1"}));
  EXPECT_EQ(p.quantum_b.nodes, (std::vector<std::string>{"E1", "SW1", "QN2"}));
  EXPECT_EQ(p.sync.nodes, (std::vector<std::string>{"QN1", "SW1", "QN2"}));
  EXPECT_EQ(p.sync.channel.label, "C32");
  EXPECT_EQ(p.quantum_a.channel.band, topology::Band::OBand);
  EXPECT_EQ(p.quantum_b.channel.band, topology::Band::OBand);
  // Three channel assignments; each spans two links of the star.
  std::set<std::string> labels;
  std::size_t link_slots = 0;
  for (const auto* lp : p.all()) {
    labels.insert(lp->channel.label);
    link_slots += lp->path.links.size();
  }
  EXPECT_EQ(labels.size(), 3u);
  EXPECT_EQ(g.occupied_channel_count() - before, link_slots);
  EXPECT_EQ(link_slots, 6u);
}

TEST(EstablishPaths, OccupiedSyncChannelBlocksAndRollsBack) {
  auto g = canonical_topology();
  g.occupy("L2", "C32", "someone-else");
  auto snapshot = g;
  SdnAgent sdn(g);
  auto out = establish_paths(g, sdn, basic_request(), "E1", {}, {});
  ASSERT_TRUE(std::holds_alternative<rwa::Blocked>(out));
  EXPECT_NE(std::get<rwa::Blocked>(out).reason.find("C32"), std::string::npos);
  for (const auto& [id, l] : g.links()) EXPECT_EQ(l.occupancy, snapshot.link(id).occupancy) << id;
  EXPECT_EQ(sdn.total_rules(), 0u);
}

TEST(EstablishPaths, QuantumAndSyncShareOneFiber) {
  auto g = canonical_topology();
  SdnAgent sdn(g);
  auto out = establish_paths(g, sdn, basic_request(), "E1", {}, {});
  ASSERT_TRUE(std::holds_alternative<EstablishedPaths>(out));
  const auto& occ = g.link("L2").occupancy;
  EXPECT_EQ(occ.size(), 2u);
  EXPECT_TRUE(occ.count("C32"));
  EXPECT_TRUE(occ.count(std::get<EstablishedPaths>(out).quantum_a.channel.label));
}

TEST(EstablishPaths, SwitchUnavailableRollsBack) {
  auto g = canonical_topology();
  SdnAgent sdn(g);
  sdn.set_switch_available("SW1", false);
  auto out = establish_paths(g, sdn, basic_request(), "E1", {}, {});
  ASSERT_TRUE(std::holds_alternative<rwa::Blocked>(out));
  EXPECT_EQ(g.occupied_channel_count(), 0u);
  EXPECT_EQ(sdn.total_rules(), 0u);
}

// ---- verification gate ----------------------------------------------------------

namespace {
/// Measurement whose probe implies R*eta*T = `expected_counts` over 1 s.
VerificationMeasurement measurement(double expected_counts, double clicks, double noise, double rate, double det) {
  VerificationMeasurement m;
  m.integration_s = 1;
  m.probe_sent_mw = 1;
  m.probe_received_mw = expected_counts / (rate * det);
  m.clicks = clicks;
  m.noise_counts = noise;
  return m;
}
}  // namespace

TEST(VerifyPath, TenOverHundredPasses) {
  // signal 90 + noise 10 = 100 clicks; probe implies R*eta = 90
  auto r = verify_path(measurement(90, 100, 10, 1e4, 0.5), 1e4, 0.5);
  EXPECT_NEAR(r.noise_ratio, 0.1, 1e-12);
  EXPECT_LT(r.noise_ratio, 1.0 / 6);
  EXPECT_TRUE(r.pass) << r.reason;
}

TEST(VerifyPath, NoiseEqualToClicksFails) {
  auto r = verify_path(measurement(90, 100, 100, 1e4, 0.5), 1e4, 0.5);
  EXPECT_FALSE(r.pass);
  EXPECT_DOUBLE_EQ(r.noise_ratio, 1.0);
}

TEST(VerifyPath, TenfoldShortfallFailsOnClicksDespiteRatio) {
  // Probe says R*eta = 10000 counts; quantum clicks only a tenth of that.
  auto r = verify_path(measurement(10000, 1000 + 10, 10, 1e6, 0.3), 1e6, 0.3);
  EXPECT_LT(r.noise_ratio, 1.0 / 6);
  EXPECT_FALSE(r.pass);
  EXPECT_GT(r.signal_sigma, 3.0);
  EXPECT_EQ(r.reason, "click rate inconsistent with R*eta");
}

TEST(VerifyPath, ThresholdIsStrict) {
  // noise/clicks exactly 1/6 is not below the threshold
  auto r = verify_path(measurement(50, 60, 10, 1e4, 0.5), 1e4, 0.5);
  EXPECT_DOUBLE_EQ(r.noise_ratio, 1.0 / 6);
  EXPECT_FALSE(r.pass);
}

// ---- SDN rules -----------------------------------------------------------------

TEST(SdnRules, OneSwitchOneRuleReleaseDecrements) {
  auto g = canonical_topology();
  SdnAgent sdn(g);
  auto lp = std::get<Lightpath>(rwa::sp_rwa(g, "E1", "QN1", quantum_constraints({}, {})));
  EXPECT_EQ(sdn.install_rules(g, lp), 1u);
  EXPECT_EQ(sdn.rule_count("SW1"), 1u);
  const auto& [cc, owner] = *sdn.tables().at("SW1").begin();
  EXPECT_EQ(cc.in_port, 0);
  EXPECT_EQ(cc.out_port, 1);
  EXPECT_EQ(owner, lp.id);
  EXPECT_EQ(sdn.install_rules(g, lp), 0u);  // idempotent re-send
  EXPECT_EQ(sdn.rule_count("SW1"), 1u);
  EXPECT_EQ(sdn.remove_rules(g, lp), 1u);
  EXPECT_EQ(sdn.rule_count("SW1"), 0u);
}

TEST(SdnRules, DifferentChannelsSamePortsCoexist) {
  auto g = canonical_topology();
  SdnAgent sdn(g);
  auto a = std::get<Lightpath>(rwa::sp_rwa(g, "E1", "QN1", quantum_constraints({}, {})));
  auto b = std::get<Lightpath>(rwa::sp_rwa(g, "E1", "QN1", quantum_constraints({}, {})));
  ASSERT_NE(a.channel.label, b.channel.label);
  sdn.install_rules(g, a);
  sdn.install_rules(g, b);
  EXPECT_EQ(sdn.rule_count("SW1"), 2u);
  std::set<std::string> keyed;
  for (const auto& [cc, _] : sdn.tables().at("SW1")) {
    EXPECT_EQ(std::make_pair(cc.in_port, cc.out_port), std::make_pair(0, 1));
    keyed.insert(cc.channel);
  }
  EXPECT_EQ(keyed, (std::set<std::string>{a.channel.label, b.channel.label}));
}

TEST(SdnRules, ConflictingCrossconnectIsRejectedAtomically) {
  auto g = canonical_topology();
  SdnAgent sdn(g);
  auto a = std::get<Lightpath>(rwa::sp_rwa(g, "E1", "QN1", quantum_constraints({}, {})));
  sdn.install_rules(g, a);
  auto clash = a;
  clash.id = "lp-other";
  EXPECT_THROW(sdn.install_rules(g, clash), DoubleBooking);
  EXPECT_EQ(sdn.rule_count("SW1"), 1u);
  sdn.set_switch_available("SW1", false);
  auto c = std::get<Lightpath>(rwa::sp_rwa(g, "E1", "QN2", quantum_constraints({}, {})));
  EXPECT_THROW(sdn.install_rules(g, c), SwitchUnavailable);
  EXPECT_EQ(sdn.total_rules(), 1u);
}

// ---- end-to-end protocol -------------------------------------------------------

TEST(Protocol, CanonicalRunFollowsProtocolOrder) {
  ControlPlane cp(canonical_topology(), {}, quiet_config(), 42);
  cp.register_all(0);
  auto id = cp.submit(basic_request(), 0.1);
  cp.run();
  const auto* rec = cp.record(id);
  ASSERT_NE(rec, nullptr);
  EXPECT_EQ(rec->state, S::Stored) << rec->failure_reason;
  EXPECT_EQ(trace_states(cp.engine(), id), kHappyPath);
  std::vector<S> hist;
  for (const auto& h : rec->history) hist.push_back(h.state);
  EXPECT_EQ(hist, kHappyPath);

  const auto& e = cp.engine();
  auto start = first_index(e, id, msg::kStart);
  auto last_ready = last_index(e, id, msg::kReady);
  ASSERT_NE(start, std::string::npos);
  EXPECT_LT(last_ready, start);
  std::set<std::string> ready_from;
  for (const auto& r : e.trace())
    if (r.correlation_id == id && type_of(r) == msg::kReady) ready_from.insert(r.sender);
  EXPECT_EQ(ready_from, (std::set<std::string>{"E1", "QN1", "QN2"}));
  EXPECT_LT(start, first_index(e, id, msg::kMeasurementBatch));
  auto node_end = first_index(e, id, msg::kEnd, "QN1");
  auto store = first_index(e, id, msg::kStoreResults);
  ASSERT_NE(store, std::string::npos);
  EXPECT_LT(node_end, store);
  EXPECT_LT(first_index(e, id, msg::kEnd, kServerId), store);
  // Both polarization receivers aligned below 1e-3.
  int aligned = 0;
  for (const auto& c : rec->calibrations)
    if (c.procedure == "polarization") {
      EXPECT_LT(c.details["residual_infidelity"].get<double>(), 1e-3);
      ++aligned;
    }
  EXPECT_EQ(aligned, 2);
  EXPECT_GE(rec->ebits, rec->request.target_ebits);
  expect_released(cp);
  ASSERT_EQ(cp.results().size(), 1u);
  EXPECT_EQ(cp.results()[0].final_state, "Stored");
}

TEST(Protocol, VerificationFailureNacksAndRetriesEstablishment) {
  ControlPlane cp(canonical_topology(), {}, quiet_config(), 42);
  cp.register_all(0);
  cp.schedule_fault({Fault::Kind::VerificationFailure, 0.0, "QN1", 1, 0.1});
  auto id = cp.submit(basic_request(), 0.1);
  cp.run();
  const auto* rec = cp.record(id);
  EXPECT_EQ(rec->state, S::Stored) << rec->failure_reason;
  std::vector<S> expected{S::Received,         S::EpsSelected,   S::PathsEstablished, S::PathsEstablished,
                          S::PathsVerified,    S::Calibrating,   S::Ready,            S::Distributing,
                          S::Ended,            S::Stored};
  EXPECT_EQ(trace_states(cp.engine(), id), expected);
  EXPECT_EQ(rec->verification_rounds, 2);
  // The NACK came from the gate's click check; the 1/6 ratio itself passed.
  auto nack = first_index(cp.engine(), id, msg::kNack, "QN1");
  ASSERT_NE(nack, std::string::npos);
  const auto& res = cp.engine().trace()[nack].payload["result"];
  EXPECT_LT(res["noise_ratio"].get<double>(), 1.0 / 6);
  EXPECT_GT(res["signal_sigma"].get<double>(), 3.0);
  // Verification is never skipped after a NACK: a fresh VerifyPath follows it.
  std::size_t verify_after = std::string::npos;
  const auto& t = cp.engine().trace();
  for (std::size_t i = nack; i < t.size(); ++i)
    if (t[i].correlation_id == id && type_of(t[i]) == msg::kVerifyPath) {
      verify_after = i;
      break;
    }
  ASSERT_NE(verify_after, std::string::npos);
  EXPECT_LT(verify_after, first_index(cp.engine(), id, msg::kCalibrate));
  expect_released(cp);
}

TEST(Protocol, PersistentVerificationFailureFailsAfterMaxRounds) {
  ControlPlane cp(canonical_topology(), {}, quiet_config(), 42);
  cp.register_all(0);
  cp.schedule_fault({Fault::Kind::VerificationFailure, 0.0, "QN2", 100, 0.1});
  auto id = cp.submit(basic_request(), 0.1);
  cp.run();
  const auto* rec = cp.record(id);
  EXPECT_EQ(rec->state, S::Failed);
  EXPECT_EQ(rec->verification_rounds, cp.config().max_verification_rounds);
  expect_released(cp);
  EXPECT_EQ(cp.results().back().final_state, "Failed");
}

TEST(Protocol, BlockedRequestsRetryWithBackoffThenBlock) {
  auto cfg = quiet_config();
  ControlPlane cp(canonical_topology(), {}, cfg, 5);
  cp.register_all(0);
  auto first = cp.submit(basic_request(QubitType::Polarization, 1'000'000'000), 0.1);
  auto second = cp.submit(basic_request(), 0.2);  // same node pair: the sync channel is taken
  cp.run_until(100);
  const auto* rec = cp.record(second);
  EXPECT_EQ(rec->state, S::Blocked);
  EXPECT_EQ(rec->establish_attempts, cfg.max_establish_attempts);
  // Attempts at t0, t0 + 1 s, t0 + 1 s + 2 s.
  std::vector<SimTime> retries;
  for (const auto& r : cp.engine().trace())
    if (r.correlation_id == second && r.topic == "timer/retry-establish") retries.push_back(r.t_ns);
  ASSERT_EQ(retries.size(), 2u);
  auto t_sel = rec->history.at(1).t_ns;
  EXPECT_EQ(retries[0] - t_sel, sim::seconds(1));
  EXPECT_EQ(retries[1] - retries[0], sim::seconds(2));
  EXPECT_EQ(cp.eps_allocations().at("E1"), 1);
  EXPECT_EQ(cp.record(first)->state, S::Distributing);
}

TEST(Protocol, DeliveryRateArithmetic) {
  // Pair rate chosen so that C = R * (T1 eta)(T2 eta) = 50 ebit/s:
  //   arm 1: 0.33 dB/km * (5 + 10) km = 4.95 dB; arm 2: 0.33 * (5 + 12) = 5.61 dB
  const double eta = 0.3;
  const double t1 = std::pow(10.0, -0.33 * 15 / 10), t2 = std::pow(10.0, -0.33 * 17 / 10);
  PhysicalParams p;
  p.eps.pair_rate_hz = 50.0 / (t1 * eta * t2 * eta);
  ControlPlane cp(canonical_topology(), p, quiet_config(), 7);
  cp.register_all(0);
  auto id = cp.submit(basic_request(QubitType::Polarization, 1000), 0.1);
  cp.run();
  const auto* rec = cp.record(id);
  ASSERT_EQ(rec->state, S::Stored) << rec->failure_reason;
  SimTime dist = 0, ended = 0;
  for (const auto& h : rec->history) {
    if (h.state == S::Distributing) dist = h.t_ns;
    if (h.state == S::Ended) ended = h.t_ns;
  }
  double elapsed = sim::to_seconds(ended - dist);
  // 1000 / 50 = 20 s; Poisson spread of 1000 counts is ~0.6 s, batches are 1 s.
  EXPECT_NEAR(elapsed, 20.0, 2.5);
  for (const auto& b : rec->batches) EXPECT_NEAR(b.coincidence_rate_hz, 50.0, 1e-9);
}

TEST(Protocol, ZeroDutyCycleCalibratesOnce) {
  ControlPlane cp(canonical_topology(), {}, quiet_config(), 9);
  cp.register_all(0);
  auto id = cp.submit(basic_request(QubitType::Polarization, 50'000), 0.1);
  cp.run();
  const auto* rec = cp.record(id);
  ASSERT_EQ(rec->state, S::Stored);
  EXPECT_EQ(rec->recalibrations, 0);
  EXPECT_EQ(rec->calibrations.size(), 3u);  // EPS + two receivers
  for (const auto& c : rec->calibrations) EXPECT_FALSE(c.mid_run);
}

TEST(Protocol, DutyCycleTriggersPeriodicRecalibration) {
  auto cfg = quiet_config();
  cfg.duty_cycle_s = 5;
  ControlPlane cp(canonical_topology(), {}, cfg, 9);
  cp.register_all(0);
  auto id = cp.submit(basic_request(QubitType::Polarization, 100'000), 0.1);
  cp.run();
  const auto* rec = cp.record(id);
  ASSERT_EQ(rec->state, S::Stored) << rec->failure_reason;
  EXPECT_GE(rec->recalibrations, 1);
  int mid = 0;
  for (const auto& c : rec->calibrations) mid += c.mid_run ? 1 : 0;
  EXPECT_EQ(mid, 3 * rec->recalibrations);
  // No state regression: the record stays Distributing across re-calibration.
  std::vector<S> hist;
  for (const auto& h : rec->history) hist.push_back(h.state);
  EXPECT_EQ(hist, kHappyPath);
}

TEST(Protocol, DriftDegradesVisibilityAndRecalibrationRecoversIt) {
  PhysicalParams p;
  p.drift_rate_rad_per_s = 0.3;
  ControlPlane cp(canonical_topology(), p, quiet_config(), 11);
  cp.register_all(0);
  auto id = cp.submit(basic_request(QubitType::Polarization, 300'000), 0.1);
  cp.run();
  const auto* rec = cp.record(id);
  ASSERT_EQ(rec->state, S::Stored) << rec->failure_reason;
  ASSERT_GE(rec->recalibrations, 1);
  const double floor = photonics::kNonClassicalVisibility;
  // Find a low-visibility batch, then a mid-run calibration, then a good batch.
  std::size_t low = rec->batches.size();
  for (std::size_t i = 0; i < rec->batches.size(); ++i)
    if (rec->batches[i].visibility < floor) {
      low = i;
      break;
    }
  ASSERT_LT(low, rec->batches.size());
  SimTime recal_t = -1;
  for (const auto& c : rec->calibrations)
    if (c.mid_run && c.t_ns > rec->batches[low].t_ns) {
      recal_t = c.t_ns;
      break;
    }
  ASSERT_GE(recal_t, 0);
  bool recovered = false;
  for (const auto& b : rec->batches)
    if (b.t_ns > recal_t && b.visibility >= floor) recovered = true;
  EXPECT_TRUE(recovered);
}

TEST(Protocol, DepartureMidRunFailsAndReleases) {
  ControlPlane cp(canonical_topology(), {}, quiet_config(), 13);
  cp.register_all(0);
  auto id = cp.submit(basic_request(QubitType::Polarization, 1'000'000'000), 0.1);
  cp.run_until(30);
  ASSERT_EQ(cp.record(id)->state, S::Distributing);
  cp.schedule_fault({Fault::Kind::Departure, 31.0, "QN2", 1, 0});
  cp.run_until(200);
  const auto* rec = cp.record(id);
  EXPECT_EQ(rec->state, S::Failed);
  EXPECT_NE(rec->failure_reason.find("QN2"), std::string::npos);
  expect_released(cp);
  EXPECT_FALSE(cp.schedulable().count("QN2"));
  // A new request for the departed node is refused without reservation.
  auto again = cp.submit(basic_request(), 201);
  cp.run_until(300);
  EXPECT_EQ(cp.record(again)->state, S::Rejected);
  expect_released(cp);
}

TEST(Protocol, SwitchDownMidRunFailsAndBlocksNewPaths) {
  ControlPlane cp(canonical_topology(), {}, quiet_config(), 13);
  cp.register_all(0);
  auto id = cp.submit(basic_request(QubitType::Polarization, 1'000'000'000), 0.1);
  cp.schedule_fault({Fault::Kind::SwitchDown, 40.0, "SW1", 1, 0});
  cp.run_until(100);
  EXPECT_EQ(cp.record(id)->state, S::Failed);
  expect_released(cp);
  auto again = cp.submit(basic_request(), 101);
  cp.run_until(200);
  EXPECT_EQ(cp.record(again)->state, S::Rejected);
  EXPECT_EQ(cp.record(again)->reject_reason, RejectReason::NoFeasiblePaths);
}

TEST(Protocol, TimeBinRequestResolvesFramesBeforePhase) {
  ControlPlane cp(canonical_topology(), {}, quiet_config(), 17);
  cp.register_all(0);
  auto id = cp.submit(basic_request(QubitType::TimeBin, 100), 0.1);
  cp.run();
  const auto* rec = cp.record(id);
  ASSERT_EQ(rec->state, S::Stored) << rec->failure_reason;
  int nodes = 0;
  for (const auto& c : rec->calibrations) {
    if (c.procedure != "timebin") continue;
    ++nodes;
    ASSERT_TRUE(c.details.contains("frame"));
    EXPECT_LT(std::abs(c.details["frame"]["early_error_ps"].get<double>()), 5.0);
    EXPECT_LT(std::abs(c.details["frame"]["late_error_ps"].get<double>()), 5.0);
    EXPECT_LT(c.details["residual_infidelity"].get<double>(), 1e-6);
  }
  EXPECT_EQ(nodes, 2);
}

TEST(Protocol, TeleportationRoutesBsmAndEstimatesFidelity) {
  ControlPlane cp(canonical_topology(true), {}, quiet_config(), 19);
  cp.register_all(0);
  auto req = basic_request(QubitType::Polarization, 100);
  req.kind = RequestKind::Teleportation;
  req.bsm = "BSM1";
  auto id = cp.submit(req, 0.1);
  cp.run();
  const auto* rec = cp.record(id);
  ASSERT_EQ(rec->state, S::Stored) << rec->failure_reason;
  double v_hom = -1;
  for (const auto& c : rec->calibrations)
    if (c.procedure == "hom_scan") v_hom = c.details["visibility"].get<double>();
  ASSERT_GE(v_hom, 0);
  EXPECT_NEAR(v_hom, cp.params().hom.hom_visibility, 0.05);
  ASSERT_TRUE(rec->fidelity_estimate.has_value());
  EXPECT_DOUBLE_EQ(*rec->fidelity_estimate, 0.5 * (1 + v_hom));
  EXPECT_EQ(photonics::teleportation_bound_check(*rec->fidelity_estimate),
            photonics::TeleportationClass::AboveClassical);
  // The PathsEstablished notice reached the BSM too.
  std::set<std::string> acks;
  for (const auto& r : cp.engine().trace())
    if (r.correlation_id == id && type_of(r) == msg::kAck && r.payload["ack_of"] == msg::kPathsEstablished)
      acks.insert(r.sender);
  EXPECT_TRUE(acks.count("BSM1"));
  expect_released(cp);
}

TEST(Protocol, InvalidRequestRejectedBeforeAnyReservation) {
  ControlPlane cp(canonical_topology(), {}, quiet_config(), 1);
  cp.register_all(0);
  auto r = basic_request();
  r.node_b = "E1";  // not a Q-Node
  auto id = cp.submit(r, 0.1);
  cp.run();
  EXPECT_EQ(cp.record(id)->state, S::Rejected);
  EXPECT_EQ(trace_states(cp.engine(), id), (std::vector<S>{S::Received, S::Rejected}));
  for (const auto& rec : cp.engine().trace()) EXPECT_NE(rec.topic, "qnet/sdn/rules");
}

TEST(Protocol, IdempotencyKeyReturnsSameId) {
  ControlPlane cp(canonical_topology(), {}, quiet_config(), 1);
  cp.register_all(0);
  auto r = basic_request();
  r.idempotency_key = "k-1";
  auto a = cp.submit(r, 0.1);
  auto b = cp.submit(r, 0.2);
  EXPECT_EQ(a, b);
  cp.run();
  EXPECT_EQ(cp.records().size(), 1u);
}

TEST(Protocol, DuplicateDeliveryDoesNotChangeOutcome) {
  auto run = [](bool dup) {
    ControlPlane cp(canonical_topology(), {}, quiet_config(), 23);
    if (dup) cp.bus().inject_duplicates("#", 2, 1);
    cp.register_all(0);
    cp.submit(basic_request(), 0.1);
    cp.run();
    return cp.results();
  };
  auto plain = run(false), duplicated = run(true);
  ASSERT_EQ(plain.size(), 1u);
  EXPECT_EQ(plain, duplicated);
}

TEST(Protocol, BatchesOnlyAcceptedWhileDistributing) {
  ControlPlane cp(canonical_topology(), {}, quiet_config(), 29);
  cp.register_all(0);
  auto id = cp.submit(basic_request(QubitType::Polarization, 1'000'000'000), 0.1);
  cp.schedule_fault({Fault::Kind::SwitchDown, 25.0, "SW1", 1, 0});
  cp.run_until(100);
  const auto* rec = cp.record(id);
  SimTime dist = -1, stop = -1;
  for (const auto& h : rec->history) {
    if (h.state == S::Distributing) dist = h.t_ns;
    if (is_terminal(h.state) || h.state == S::Ended) stop = h.t_ns;
  }
  ASSERT_GE(dist, 0);
  ASSERT_GE(stop, 0);
  ASSERT_FALSE(rec->batches.empty());
  for (const auto& b : rec->batches) {
    EXPECT_GE(b.t_ns, dist);
    EXPECT_LE(b.t_ns, stop);
  }
}

TEST(Protocol, ResultRecordsRoundTrip) {
  ControlPlane cp(canonical_topology(), {}, quiet_config(), 31);
  cp.register_all(0);
  cp.submit(basic_request(), 0.1);
  auto bad = basic_request();
  bad.qubit_type = QubitType::TimeBin;
  bad.node_b = "QN1";
  bad.node_a = "QN2";
  cp.submit(bad, 0.2);
  cp.run();
  ASSERT_EQ(cp.results().size(), 2u);
  for (const auto& r : cp.results()) {
    auto text = to_json(r).dump();
    EXPECT_EQ(result_from_json(Json::parse(text)), r);
  }
}

TEST(Protocol, SameSeedSameTrace) {
  auto run = [] {
    PhysicalParams p;
    p.drift_rate_rad_per_s = 0.05;
    ControlPlane cp(canonical_topology(), p, quiet_config(), 37);
    cp.register_all(0);
    cp.schedule_fault({Fault::Kind::VerificationFailure, 0.0, "QN1", 1, 0.1});
    cp.submit(basic_request(), 0.1);
    cp.submit(basic_request(QubitType::TimeBin, 100), 0.2);
    cp.run();
    std::ostringstream os;
    sim::write_ndjson(os, cp.engine().trace());
    return os.str();
  };
  auto a = run(), b = run();
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);
}

// ---- properties ------------------------------------------------------------------

TEST(ControlProperties, ProtocolOrderAndAccountingOverRandomWorkloads) {
  const std::vector<S> order = kHappyPath;
  auto rank = [&](S s) { return std::find(order.begin(), order.end(), s) - order.begin(); };
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    std::mt19937_64 rng(seed);
    PhysicalParams p;
    p.drift_rate_rad_per_s = std::uniform_real_distribution<double>(0, 0.2)(rng);
    ControlConfig cfg;
    cfg.duty_cycle_s = std::uniform_int_distribution<int>(0, 1)(rng) ? 10.0 : 0.0;
    ControlPlane cp(canonical_topology(seed % 2 == 0), p, cfg, seed);
    cp.register_all(0);
    int n = std::uniform_int_distribution<int>(1, 4)(rng);
    for (int i = 0; i < n; ++i) {
      auto r = basic_request(std::uniform_int_distribution<int>(0, 1)(rng) ? QubitType::TimeBin : QubitType::Polarization,
                             std::uniform_int_distribution<long long>(1, 5000)(rng));
      if (std::uniform_int_distribution<int>(0, 1)(rng)) std::swap(r.node_a, r.node_b);
      cp.submit(r, std::uniform_real_distribution<double>(0, 30)(rng));
    }
    if (seed % 3 == 0) cp.schedule_fault({Fault::Kind::VerificationFailure, 0.0, "QN2", 1, 0.1});
    cp.run();
    ASSERT_TRUE(cp.quiescent()) << "seed " << seed;
    expect_released(cp);
    EXPECT_EQ(cp.results().size(), cp.records().size());
    for (const auto& [id, rec] : cp.records()) {
      const auto& h = rec.history;
      for (std::size_t i = 1; i < h.size(); ++i) {
        EXPECT_TRUE(transition_allowed(h[i - 1].state, h[i].state))
            << "seed " << seed << " " << id << ": " << to_string(h[i - 1].state) << " -> " << to_string(h[i].state);
        EXPECT_LE(h[i - 1].t_ns, h[i].t_ns);
        if (!is_terminal(h[i].state) || h[i].state == S::Stored) EXPECT_GE(rank(h[i].state), rank(h[i - 1].state));
      }
      if (rec.state == S::Stored) EXPECT_GE(rec.ebits, rec.request.target_ebits);
    }
  }
}
