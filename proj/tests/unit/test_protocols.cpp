#include <doctest.h>

#include <string>

#include "pseudochain/common/error.hpp"
#include "pseudochain/economics/welfare.hpp"
#include "pseudochain/protocols/system.hpp"

using namespace pseudochain;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected pseudochain::Error");
  return ErrorCode::kInvalidArgument;
}

struct Fixture {
  PseudonymSystem sys;
  explicit Fixture(SystemConfig cfg = {}) : sys(std::move(cfg)) {}

  int registered(int j, double t = 0.0) {
    const int v = sys.create_vmu(j);
    sys.bootstrap_registration(v, j, t);
    return v;
  }
  // Activates every remaining credential of the pair.
  void exhaust(int v, double t) {
    while (sys.actor(v).unused() > 0) sys.synchronous_change(v, t);
  }
};

bool has_audit(const PseudonymSystem& sys, const std::string& kind) {
  for (const auto& a : sys.audit()) {
    if (a.kind == kind) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("bootstrap registration") {
  Fixture f;
  const auto sc_before = f.sys.network().subchain(1).height();
  const int v = f.sys.create_vmu(1);
  auto boot = f.sys.bootstrap_registration(v, 1, 0.0);
  CHECK(f.sys.network().subchain(1).height() == sc_before + 1);
  CHECK(f.sys.network().main_chain().height() == 1);
  CHECK(f.sys.network().main_chain().transaction_count() == 1);
  const Actor& vmu = f.sys.actor(v);
  const Actor& vt = f.sys.actor(boot.vt);
  CHECK(vmu.unused() == 10);
  CHECK(vt.unused() == 10);
  for (const auto& pid : vmu.credentials) {
    CHECK(f.sys.registry().credential(pid).status == CredentialStatus::kUnused);
  }
  CHECK(vt.location == vmu.location);
  CHECK(code_of([&] { f.sys.bootstrap_registration(v, 1, 0.0); }) ==
        ErrorCode::kAlreadyRegistered);
}

TEST_CASE("tracking lists decrypt only under the holding LMM's key") {
  Fixture f;
  const int v = f.registered(0);
  std::vector<std::pair<std::string, Bytes>> keys;
  keys.push_back({f.sys.ta_id(), f.sys.registry().entity(f.sys.ta_id()).keys.private_key});
  for (int j = 0; j < 3; ++j) {
    keys.push_back({f.sys.lmm_id(j), f.sys.registry().entity(f.sys.lmm_id(j)).keys.private_key});
    keys.push_back({f.sys.es_id(j), f.sys.registry().entity(f.sys.es_id(j)).keys.private_key});
  }
  const Actor& a = f.sys.actor(v);
  keys.push_back({"vmu", f.sys.registry().entity(a.identity.id).keys.private_key});
  for (const auto& pid : a.credentials) {
    keys.push_back({pid, f.sys.registry().credential(pid).key_pair.private_key});
  }
  const auto& provider = f.sys.crypto().provider();
  for (int j = 0; j < 3; ++j) {
    REQUIRE(f.sys.tracking_lists(j).size() == 1);
    const Bytes& ct = f.sys.tracking_lists(j).front();
    for (const auto& [holder, sk] : keys) {
      CAPTURE(holder);
      CHECK(provider.decrypt(sk, ct).has_value() == (holder == f.sys.lmm_id(j)));
    }
  }
}

TEST_CASE("safety broadcasts") {
  Fixture f;
  const int v = f.registered(0);
  CHECK(code_of([&] { f.sys.emit_broadcast(v, 0.0); }) == ErrorCode::kNoActivePseudonym);
  f.sys.synchronous_change(v, 0.0);
  const auto before = f.sys.crypto().meter();
  auto msgs = f.sys.safety_broadcast_tick(v, 3000.0);
  CHECK(msgs.size() == 10);
  const auto after = f.sys.crypto().meter();
  CHECK(after.count(CryptoOpKind::kVerifySig) - before.count(CryptoOpKind::kVerifySig) == 10);
  CHECK(after.count(CryptoOpKind::kVerifyCert) - before.count(CryptoOpKind::kVerifyCert) == 10);
  CHECK(after.total_ms - before.total_ms == doctest::Approx(10 * (0.93 + 1.11 + 5.42)));
  CHECK(f.sys.broadcasts_verified() == 10);
  const std::string& true_id = f.sys.actor(v).identity.id;
  for (const auto& m : msgs) {
    CHECK(m.sender_pid == *f.sys.actor(v).active_pid());
    std::string cleartext(m.body.begin(), m.body.end());
    CHECK(cleartext.find(m.sender_pid) != std::string::npos);
    CHECK(cleartext.find(true_id) == std::string::npos);
    CHECK(m.sender_pid.find(true_id) == std::string::npos);
  }
  CHECK(f.sys.cleartext_leaks() == 0);
}

TEST_CASE("synchronous change is atomic") {
  Fixture f;
  const int v = f.registered(0);
  const int vt = *f.sys.actor(v).partner;
  for (int i = 0; i < 5; ++i) f.sys.synchronous_change(v, i);
  CHECK(f.sys.actor(v).unused() == 5);
  CHECK(f.sys.actor(vt).unused() == 5);
  auto ch = f.sys.synchronous_change(v, 10.0);
  CHECK(f.sys.actor(v).unused() == 4);
  CHECK(f.sys.actor(vt).unused() == 4);
  CHECK(f.sys.registry().credential(ch.old_vmu_pid).status == CredentialStatus::kConsumed);
  CHECK(f.sys.registry().credential(ch.new_vt_pid).status == CredentialStatus::kActive);

  // VMU left with one, VT with none: no partial change.
  f.sys.actor(v).cursor = f.sys.actor(v).credentials.size() - 1;
  f.sys.actor(vt).cursor = f.sys.actor(vt).credentials.size();
  const auto vmu_cursor = f.sys.actor(v).cursor;
  CHECK(code_of([&] { f.sys.synchronous_change(v, 11.0); }) == ErrorCode::kExhausted);
  CHECK(f.sys.actor(v).cursor == vmu_cursor);
}

TEST_CASE("adversary confuses k co-located synchronized changers") {
  std::vector<ChangeObservation> obs;
  for (int k = 0; k < 10; ++k) obs.push_back({1000.0, 2, k});
  obs.push_back({1000.0, 1, 99});   // other district
  obs.push_back({90000.0, 2, 98});  // outside the window
  CHECK(adversary_tracking_probability(obs, 0, 50.0) == doctest::Approx(0.1));
  CHECK(adversary_tracking_probability(obs, 10, 50.0) == doctest::Approx(1.0));
}

TEST_CASE("local distribution: 78 ms cross-chain, 107 ms single chain") {
  Fixture f;
  const int v = f.registered(1);
  f.exhaust(v, 0.0);
  const std::string old_pid = *f.sys.actor(v).active_pid();
  auto res = f.sys.request_pseudonyms(v, 100.0);
  REQUIRE(res.replied);
  CHECK(res.path == DistributionPath::kLocal);
  CHECK(res.delay.crypto_ms == doctest::Approx(7.0));
  CHECK(res.delay.communication_ms == doctest::Approx(50.0));
  CHECK(res.delay.chain_ms == doctest::Approx(21.0));
  CHECK(res.delay.total_ms() == doctest::Approx(78.0));
  double legs = 0.0;
  for (const auto& l : res.legs) legs += l.ms;
  CHECK(legs == doctest::Approx(res.delay.total_ms()).epsilon(1e-12));
  CHECK(f.sys.actor(v).unused() == 10);
  CHECK(f.sys.actor(*f.sys.actor(v).partner).unused() == 10);

  // TA follows the chain of tracking-table updates back to the true id.
  const std::string& fresh = f.sys.actor(v).credentials.back();
  CHECK(f.sys.resolve_true_id(f.sys.ta_view(), fresh) == f.sys.actor(v).identity.id);
  CHECK(f.sys.resolve_true_id(f.sys.ta_view(), old_pid) == f.sys.actor(v).identity.id);

  SystemConfig single;
  single.mode = ChainMode::kSingleChain;
  Fixture s(single);
  const int w = s.registered(0);
  s.exhaust(w, 0.0);
  auto r = s.sys.request_pseudonyms(w, 50.0);
  REQUIRE(r.replied);
  CHECK(r.delay.crypto_ms == doctest::Approx(19.0));
  CHECK(r.delay.communication_ms == doctest::Approx(60.0));
  CHECK(r.delay.chain_ms == doctest::Approx(28.0));
  CHECK(r.delay.total_ms() == doctest::Approx(107.0));
}

TEST_CASE("requests from identities absent on the subchain get no reply") {
  Fixture f;
  f.registered(0);
  const auto replies = f.sys.message_count(MessageKind::kPseuReply);
  auto res = f.sys.forged_request(0, 10.0);
  CHECK_FALSE(res.replied);
  CHECK(f.sys.message_count(MessageKind::kPseuReply) == replies);
  CHECK(has_audit(f.sys, "silent-drop"));
}

TEST_CASE("cross-district distribution") {
  Fixture f;
  const int v = f.registered(0);
  f.exhaust(v, 0.0);
  const std::string old_pid = *f.sys.actor(v).active_pid();
  f.sys.migrate(v, 1, 10.0);
  CHECK(f.sys.actor(*f.sys.actor(v).partner).location == 1);
  auto res = f.sys.request_pseudonyms(v, 20.0);
  REQUIRE(res.replied);
  CHECK(res.path == DistributionPath::kCrossDistrict);
  REQUIRE(res.verify.has_value());
  CHECK(res.verify->elapsed_ms() == doctest::Approx(806.0));
  CHECK(res.delay.total_ms() == doctest::Approx(863.0));
  CHECK(res.serving_metaverse == 1);
  const std::string fresh = f.sys.actor(v).credentials.back();
  CHECK(f.sys.registry().credential(fresh).issuer_lmm == f.sys.lmm_id(1));
  auto origin = f.sys.network().subchain(0).query_record(old_pid);
  REQUIRE(origin);
  CHECK(origin->frozen);

  // Next exhaustion is served locally by the new district.
  f.exhaust(v, 30.0);
  auto again = f.sys.request_pseudonyms(v, 40.0);
  REQUIRE(again.replied);
  CHECK(again.path == DistributionPath::kLocal);
  CHECK(again.delay.total_ms() == doctest::Approx(78.0));
}

TEST_CASE("forged origin claim is reported to the TA") {
  Fixture f;
  const int v = f.registered(0);
  f.exhaust(v, 0.0);
  f.sys.migrate(v, 1, 1.0);
  const auto before = f.sys.actor(v).credentials.size();
  auto res = f.sys.cross_district_distribution(v, 2.0, 2);
  CHECK_FALSE(res.replied);
  CHECK(res.abnormal);
  CHECK(f.sys.abnormal_reports() == 1);
  CHECK(f.sys.actor(v).credentials.size() == before);
  CHECK(has_audit(f.sys, "abnormal-origin"));
}

TEST_CASE("confirmed dual revocation") {
  Fixture f;
  const int reporter = f.registered(0);
  const int accused = f.registered(0);
  f.sys.synchronous_change(reporter, 0.0);
  f.sys.synchronous_change(accused, 0.0);
  f.sys.actor(accused).malicious = true;
  const int accused_vt = *f.sys.actor(accused).partner;
  const std::string accused_pid = *f.sys.actor(accused).active_pid();
  CHECK(f.sys.roster(0).size() == 2);

  auto res = f.sys.dual_revocation(reporter, accused_pid, "false-safety-message", 5.0);
  CHECK(res.delivered);
  CHECK(res.confirmed);
  CHECK(f.sys.blacklist().size() == 1);
  CHECK(f.sys.blacklist().contains(f.sys.actor(accused).identity.id));
  for (int h : {accused, accused_vt}) {
    for (const auto& pid : f.sys.actor(h).credentials) {
      CHECK(f.sys.registry().credential(pid).status == CredentialStatus::kRevoked);
    }
  }
  auto roster = f.sys.roster(0);
  CHECK(std::find(roster.begin(), roster.end(), accused_vt) == roster.end());
  auto rec = f.sys.network().subchain(0).query_record(accused_pid);
  REQUIRE(rec);
  CHECK(rec->revoked);
  // Every edge server learned the true id through the TA's notice.
  for (int j = 0; j < 3; ++j) {
    CHECK(f.sys.resolve_true_id(f.sys.es_view(j), accused_pid) ==
          f.sys.actor(accused).identity.id);
  }

  const auto replies = f.sys.message_count(MessageKind::kPseuReply);
  auto req = f.sys.local_distribution(accused, 10.0);
  CHECK_FALSE(req.replied);
  CHECK(f.sys.message_count(MessageKind::kPseuReply) == replies);
}

TEST_CASE("unconfirmed report restricts the reporter") {
  Fixture f;
  const int reporter = f.registered(2);
  const int accused = f.registered(2);
  f.sys.synchronous_change(reporter, 0.0);
  f.sys.synchronous_change(accused, 0.0);
  const std::string accused_pid = *f.sys.actor(accused).active_pid();
  auto res = f.sys.dual_revocation(reporter, accused_pid, "speeding", 1.0);
  CHECK(res.delivered);
  CHECK_FALSE(res.confirmed);
  CHECK(f.sys.is_restricted(f.sys.actor(reporter).identity.id));
  CHECK(f.sys.blacklist().size() == 0);
  CHECK(f.sys.registry().credential(accused_pid).status == CredentialStatus::kActive);

  f.sys.actor(accused).malicious = true;
  auto again = f.sys.dual_revocation(reporter, accused_pid, "speeding", 2.0);
  CHECK_FALSE(again.confirmed);
  CHECK(again.drop_reason == "reporting right restricted");
  CHECK(f.sys.blacklist().size() == 0);
}

TEST_CASE("pid to true id resolves only through the TA view") {
  Fixture f;
  std::vector<int> v;
  for (int j = 0; j < 3; ++j) v.push_back(f.registered(j));
  f.exhaust(v[0], 0.0);
  f.sys.request_pseudonyms(v[0], 1.0);
  f.exhaust(v[1], 0.0);
  f.sys.migrate(v[1], 2, 1.0);
  f.sys.request_pseudonyms(v[1], 2.0);

  std::vector<ActorView> others;
  for (int j = 0; j < 3; ++j) {
    others.push_back(f.sys.lmm_view(j));
    others.push_back(f.sys.es_view(j));
  }
  for (std::size_t h = 0; h < f.sys.actor_count(); ++h) {
    others.push_back(f.sys.actor_view(static_cast<int>(h)));
  }
  for (std::size_t h = 0; h < f.sys.actor_count(); ++h) {
    const Actor& a = f.sys.actor(static_cast<int>(h));
    for (const auto& pid : a.credentials) {
      CHECK(f.sys.resolve_true_id(f.sys.ta_view(), pid) == a.identity.id);
      for (const auto& view : others) {
        CAPTURE(view.holder);
        CHECK_FALSE(f.sys.resolve_true_id(view, pid).has_value());
      }
    }
  }
}

TEST_CASE("aggregate demand") {
  Fixture f;
  f.sys.record_demand(0, 3, 10);
  f.sys.record_demand(0, 3, 20);
  f.sys.record_demand(0, 3, 30);
  CHECK(f.sys.aggregate_demand(0, 3) == 60);
  CHECK(f.sys.aggregate_demand(1, 3) == 0);

  Rng rng(8);
  auto demand = DemandModel::poisson(90);
  double total = 0.0;
  for (int t = 0; t < 10000; ++t) {
    f.sys.record_demand(2, t, demand.sample(rng));
    total += f.sys.aggregate_demand(2, t);
  }
  CHECK(total / 10000.0 == doctest::Approx(90.0).epsilon(0.01));
}

TEST_CASE("issued credentials are conserved per LMM") {
  Fixture f;
  const int v = f.registered(0);
  f.exhaust(v, 0.0);
  f.sys.request_pseudonyms(v, 1.0);
  for (int j = 0; j < 3; ++j) {
    auto s = f.sys.registry().issuance_stats(f.sys.lmm_id(j));
    CHECK(s.issued == s.unused + s.active + s.consumed + s.revoked);
  }
}
