#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pseudochain/common/error.hpp"
#include "pseudochain/madrl/baselines.hpp"

using namespace pseudochain;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kInvalidArgument;
}

// Relative error between two gradient vectors in the 2-norm.
double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nb), 1e-300);
}

template <typename Loss>
std::vector<double> finite_difference(Mlp& net, Loss&& loss, double h = 1e-5) {
  std::vector<double> g(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) {
    const double keep = net.params()[i];
    net.params()[i] = keep + h;
    const double up = loss();
    net.params()[i] = keep - h;
    const double down = loss();
    net.params()[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

std::vector<double> random_vector(Rng& rng, std::size_t n, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// SW written out term by term for the reward-consistency oracle.
double welfare_oracle(const EconomicParams& p, double hbar, int D, int G, int I, double c) {
  const double sold = std::min(D, G);
  const double vmu = -I * p.epsilon + (p.beta * hbar - p.delta) * sold;
  const double lmm = -p.g * G + (p.p0 - c) * sold - p.h * std::max(G - D, 0) -
                     p.r * std::max(D - G, 0);
  return vmu + lmm;
}

}  // namespace

TEST_CASE("softmax output is a strictly positive probability vector") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto logits = random_vector(rng, 121, -30.0, 30.0);
    const auto p = softmax(logits);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::all_of(p.begin(), p.end(), [](double x) { return x > 0.0; }));
  }
  Mlp actor(9, 64, 121);
  actor.init(rng, 0.01);
  const auto p = action_probabilities(actor, random_vector(rng, 9));
  CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-9);
}

TEST_CASE("critic gradient matches central finite differences") {
  Rng rng(11);
  double worst = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    Mlp critic(29, 8, 7);
    critic.init(rng);
    std::vector<CriticSample> batch;
    std::uniform_int_distribution<int> pick(0, 6);
    for (int m = 0; m < 4; ++m) {
      batch.push_back({random_vector(rng, 29), pick(rng), random_vector(rng, 1, -2, 2)[0]});
    }
    std::vector<double> analytic(critic.size(), 0.0);
    critic_loss(critic, batch, analytic);
    std::vector<double> scratch(critic.size());
    const auto numeric = finite_difference(critic, [&] {
      std::fill(scratch.begin(), scratch.end(), 0.0);
      return critic_loss(critic, batch, scratch);
    });
    worst = std::max(worst, rel_error(analytic, numeric));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("actor surrogate gradient matches central finite differences") {
  Rng rng(12);
  double worst = 0.0;
  for (ClipMode mode : {ClipMode::kStandard, ClipMode::kLiteral}) {
    for (double entropy : {0.0, 0.01}) {
      for (int draw = 0; draw < 25; ++draw) {
        Mlp actor(9, 8, 11);
        actor.init(rng);
        std::vector<ActorSample> batch;
        std::uniform_int_distribution<int> pick(0, 10);
        for (int m = 0; m < 6; ++m) {
          ActorSample s;
          s.obs = random_vector(rng, 9);
          s.action = pick(rng);
          const auto p = action_probabilities(actor, s.obs);
          // Ratios away from the clip kinks: inside (0.9, 1.1) or far outside.
          const double shift = m % 3 == 0 ? 0.5 : random_vector(rng, 1, -0.05, 0.05)[0];
          s.old_log_prob = std::log(p[s.action]) - shift;
          s.advantage = random_vector(rng, 1, -2, 2)[0];
          batch.push_back(s);
        }
        std::vector<double> analytic(actor.size(), 0.0);
        actor_loss(actor, batch, 0.2, mode, entropy, analytic);
        std::vector<double> scratch(actor.size());
        const auto numeric = finite_difference(actor, [&] {
          std::fill(scratch.begin(), scratch.end(), 0.0);
          return actor_loss(actor, batch, 0.2, mode, entropy, scratch);
        });
        worst = std::max(worst, rel_error(analytic, numeric));
      }
    }
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("at theta == theta_old the surrogate gradient is the policy gradient") {
  Rng rng(5);
  Mlp actor(9, 16, 11);
  actor.init(rng);
  std::vector<ActorSample> batch;
  for (int m = 0; m < 8; ++m) {
    ActorSample s;
    s.obs = random_vector(rng, 9);
    s.action = m % 11;
    s.old_log_prob = std::log(action_probabilities(actor, s.obs)[s.action]);
    s.advantage = random_vector(rng, 1, -3, 3)[0];
    batch.push_back(s);
  }
  std::vector<double> surrogate(actor.size(), 0.0);
  actor_loss(actor, batch, 0.2, ClipMode::kStandard, 0.0, surrogate);

  // -1/B sum A * grad log pi(a|o), built directly from softmax derivatives.
  std::vector<double> pg(actor.size(), 0.0);
  Mlp::Cache cache;
  for (const auto& s : batch) {
    actor.forward(s.obs, cache);
    const auto p = softmax(cache.output);
    std::vector<double> d(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) {
      d[k] = -s.advantage * ((static_cast<int>(k) == s.action) - p[k]) / batch.size();
    }
    actor.backward(cache, d, pg);
  }
  CHECK(rel_error(surrogate, pg) <= 1e-12);
}

TEST_CASE("clip saturation zeroes a sample's gradient") {
  CHECK(clipped_surrogate_slope(1.4, 2.0, 0.2, ClipMode::kStandard) == 0.0);
  CHECK(clipped_surrogate(1.4, 2.0, 0.2, ClipMode::kStandard) == doctest::Approx(2.4));
  CHECK(clipped_surrogate_slope(0.6, -1.0, 0.2, ClipMode::kStandard) == 0.0);
  CHECK(clipped_surrogate_slope(1.0, 1.5, 0.2, ClipMode::kStandard) == 1.5);
  CHECK(clipped_surrogate_slope(1.3, -1.0, 0.2, ClipMode::kStandard) == -1.0);
  CHECK(clipped_surrogate(1.0, 3.0, 0.2, ClipMode::kLiteral) == doctest::Approx(1.2));
  CHECK(clipped_surrogate(1.0, -3.0, 0.2, ClipMode::kLiteral) == doctest::Approx(-3.0));
  CHECK(clipped_surrogate(1.0, 0.5, 0.2, ClipMode::kLiteral) == doctest::Approx(0.5));

  Rng rng(8);
  Mlp actor(9, 8, 11);
  actor.init(rng);
  ActorSample s;
  s.obs = random_vector(rng, 9);
  s.action = 4;
  s.old_log_prob = std::log(action_probabilities(actor, s.obs)[4] / 1.4);
  s.advantage = 1.0;
  std::vector<double> g(actor.size(), 0.0);
  actor_loss(actor, std::span<const ActorSample>(&s, 1), 0.2, ClipMode::kStandard, 0.0, g);
  CHECK(std::all_of(g.begin(), g.end(), [](double x) { return x == 0.0; }));
}

TEST_CASE("non-finite losses trip the NaN guard") {
  Rng rng(1);
  Mlp actor(9, 8, 11);
  actor.init(rng);
  ActorSample s{random_vector(rng, 9), 0, 0.0, std::nan("")};
  std::vector<double> g(actor.size(), 0.0);
  CHECK(code_of([&] {
          actor_loss(actor, std::span<const ActorSample>(&s, 1), 0.2, ClipMode::kStandard, 0.0,
                     g);
        }) == ErrorCode::kNaNGuard);
  Mlp critic(4, 8, 3);
  critic.init(rng);
  CriticSample c{{0.1, 0.2, 0.3, 0.4}, 1, std::numeric_limits<double>::infinity()};
  std::vector<double> gc(critic.size(), 0.0);
  CHECK(code_of([&] { critic_loss(critic, std::span<const CriticSample>(&c, 1), gc); }) ==
        ErrorCode::kNaNGuard);
}

TEST_CASE("sampling frequencies follow the policy") {
  Rng rng(21);
  Mlp actor(9, 16, 11);
  actor.init(rng, 2.0);
  const auto obs = random_vector(rng, 9);
  const auto p = action_probabilities(actor, obs);
  const int n = 100000;
  std::vector<int> counts(p.size(), 0);
  Rng draw(99);
  for (int i = 0; i < n; ++i) {
    const ActionSample s = sample_action(actor, obs, draw);
    CHECK_EQ(s.log_prob, doctest::Approx(std::log(p[s.action])));
    ++counts[s.action];
  }
  double chi2 = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double expect = n * p[k];
    const double sd = std::sqrt(n * p[k] * (1.0 - p[k]));
    CHECK(std::abs(counts[k] - expect) <= 3.0 * sd + 1.0);
    chi2 += (counts[k] - expect) * (counts[k] - expect) / expect;
  }
  // 10 degrees of freedom; 99.9th percentile is 29.59.
  CHECK(chi2 < 29.59);
  CHECK(greedy_action(actor, obs) ==
        static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
  CHECK(greedy_action(actor, obs) == greedy_action(actor, obs));
}

TEST_CASE("q-hat recursion") {
  const std::vector<double> R = {1.0, -2.0, 0.5, 3.0, 0.25};
  const std::vector<double> q = {0.3, 0.1, -0.4, 0.8, 0.2};
  const std::vector<double> qn = {0.1, -0.4, 0.8, 0.2, 0.6};

  SUBCASE("myopic limit gives the reward") {
    const auto out = compute_q_hat(R, q, qn, 0.0, 0.95);
    for (std::size_t t = 0; t < R.size(); ++t) CHECK(out[t] == doctest::Approx(R[t]));
  }
  SUBCASE("lambda zero is the one-step target") {
    const double gamma = 0.9;
    const auto out = compute_q_hat(R, q, qn, gamma, 0.0);
    for (std::size_t t = 0; t < R.size(); ++t) {
      CHECK(out[t] == doctest::Approx(R[t] + gamma * qn[t]).epsilon(1e-12));
    }
  }
  SUBCASE("random trajectory against direct summation") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
      const auto r = random_vector(rng, 5, -5, 5);
      const auto a = random_vector(rng, 5, -5, 5);
      const auto b = random_vector(rng, 5, -5, 5);
      const double gamma = 0.99, lam = 0.95;
      const auto out = compute_q_hat(r, a, b, gamma, lam);
      for (std::size_t t = 0; t < 5; ++t) {
        double sum = a[t];
        for (std::size_t k = t; k < 5; ++k) {
          sum += std::pow(gamma * lam, static_cast<double>(k - t)) *
                 (r[k] + gamma * b[k] - a[k]);
        }
        CHECK(std::abs(out[t] - sum) <= 1e-10);
      }
    }
  }
  CHECK_THROWS_AS(compute_q_hat(R, q, std::vector<double>{1.0}, 0.9, 0.9), Error);
}

TEST_CASE("counterfactual baseline") {
  const std::vector<double> Q = {1.0, 4.0, -2.0, 7.0};
  const std::vector<double> uniform(4, 0.25);
  CHECK(counterfactual_baseline(uniform, Q) == doctest::Approx(2.5));
  const std::vector<double> one_hot = {0.0, 0.0, 1.0, 0.0};
  CHECK(counterfactual_advantage(5.0, one_hot, Q) == doctest::Approx(7.0));

  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto logits = random_vector(rng, 121, -3, 3);
    const auto p = softmax(logits);
    const auto q = random_vector(rng, 121, -10, 10);
    double weighted = 0.0;
    for (std::size_t a = 0; a < p.size(); ++a) {
      weighted += p[a] * counterfactual_advantage(q[a], p, q);
    }
    CHECK(std::abs(weighted) <= 1e-10);
  }
}

TEST_CASE("critic input layout") {
  const JointObservation obs = {{0.1, 0.2}, {0.3, 0.4}, {0.5, 0.6}};
  const std::vector<int> a = {12, 60, 120};
  const auto x = critic_input(obs, a, 1, 120, ActionEncoding::kScalar);
  REQUIRE(x.size() == critic_input_width(3, 2, 120, ActionEncoding::kScalar));
  CHECK(x == std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.1, 1.0});
  const auto y = critic_input(obs, a, 0, 120, ActionEncoding::kOneHot);
  REQUIRE(y.size() == 6 + 2 * 121);
  CHECK(y[6 + 60] == 1.0);
  CHECK(y[6 + 121 + 120] == 1.0);
  CHECK(std::accumulate(y.begin() + 6, y.end(), 0.0) == 2.0);
  CHECK(critic_input_width(3, 9, 120, ActionEncoding::kScalar) == 29);
}

TEST_CASE("environment reset, shape and determinism") {
  PseudonymGenEnv env{EnvConfig{}};
  const auto a = env.reset(42);
  REQUIRE(a.size() == 3);
  std::size_t width = 0;
  for (const auto& o : a) {
    width += o.size();
    for (double x : o) CHECK((x >= 0.0 && x <= 1.0));
  }
  CHECK(width == 27);
  CHECK(env.warmup_rewards().size() == 3);
  const auto b = env.reset(42);
  CHECK(a == b);
  CHECK(env.reset(43) != a);
  CHECK(env.hbar() == doctest::Approx(2.6653043127).epsilon(1e-9));
}

TEST_CASE("warm-up slots are not part of the episode return") {
  EnvConfig with;
  with.deterministic_demand = true;
  with.comm_cost_max = 0.0;
  EnvConfig without = with;
  without.warmup = false;
  PseudonymGenEnv a(with), b(without);
  a.reset(1);
  b.reset(1);
  CHECK(a.warmup_rewards().size() == 3);
  CHECK(b.warmup_rewards().empty());
  const std::vector<int> G = {80, 90, 100};
  double ra = 0.0, rb = 0.0;
  while (!a.done()) ra += a.step(G).reward;
  while (!b.done()) rb += b.step(G).reward;
  CHECK(ra == rb);
  CHECK(a.time() == 120);
}

TEST_CASE("team reward and the slot cap") {
  EnvConfig cfg;
  PseudonymGenEnv env(cfg);
  env.reset(7);
  const StepRecord at_cap = env.step(std::vector<int>{100, 100, 100});
  CHECK_FALSE(at_cap.cap_exceeded);
  double sum = 0.0;
  for (int j = 0; j < 3; ++j) {
    sum += welfare_oracle(cfg.economics, env.hbar(), at_cap.D[j], at_cap.G[j],
                          cfg.economics.vmu_counts[j], at_cap.c[j]);
  }
  CHECK(at_cap.reward == doctest::Approx(sum).epsilon(1e-12));
  const StepRecord over = env.step(std::vector<int>{120, 120, 120});
  CHECK(over.cap_exceeded);
  CHECK(over.reward == 0.0);
  CHECK(code_of([&] { env.step(std::vector<int>{121, 0, 0}); }) == ErrorCode::kInvalidAction);
  CHECK(code_of([&] { env.step(std::vector<int>{-1, 0, 0}); }) == ErrorCode::kInvalidAction);
  CHECK(code_of([&] { env.step(std::vector<int>{1, 2}); }) == ErrorCode::kInvalidAction);
}

TEST_CASE("zero generation averages to -I*eps - r*D") {
  EnvConfig cfg;
  cfg.steps = 10000;
  PseudonymGenEnv env(cfg);
  env.reset(3);
  const std::vector<int> zero = {0, 0, 0};
  double sum = 0.0, sq = 0.0;
  while (!env.done()) {
    const double r = env.step(zero).reward;
    sum += r;
    sq += r * r;
  }
  const double n = cfg.steps;
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  const auto& p = cfg.economics;
  double expect = 0.0;
  for (int j = 0; j < 3; ++j) expect += -p.vmu_counts[j] * p.epsilon - p.r * p.demand_means[j];
  CHECK(std::abs(mean - expect) <= 4.0 * se);
}

TEST_CASE("logged rewards recompute exactly from logged slots") {
  EnvConfig cfg;
  TrainConfig tc;
  tc.episodes = 2;
  tc.epochs = 1;
  std::size_t steps = 0, violations = 0;
  train_mappo(tc, cfg, [&](int, const StepRecord& rec) {
    ++steps;
    double sw = 0.0;
    int total = 0;
    for (int j = 0; j < 3; ++j) {
      sw += welfare_oracle(cfg.economics, cfg.hbar(), rec.D[j], rec.G[j],
                           cfg.economics.vmu_counts[j], rec.c[j]);
      total += rec.G[j];
    }
    if (total > 300) {
      ++violations;
      CHECK(rec.reward == 0.0);
    } else {
      CHECK(rec.reward == doctest::Approx(sw).epsilon(1e-12));
    }
  });
  CHECK(steps == 240);
}

TEST_CASE("train_mappo smoke run and determinism") {
  TrainConfig tc;
  tc.episodes = 1;
  const TrainResult a = train_mappo(tc, EnvConfig{});
  REQUIRE(a.curve.size() == 1);
  CHECK(a.actors.size() == 3);
  CHECK(a.invalid_distributions == 0);
  CHECK(a.cap_violations_with_reward == 0);
  const TrainResult b = train_mappo(tc, EnvConfig{});
  CHECK(a.curve[0].mean_reward == b.curve[0].mean_reward);
  CHECK(a.actors[0].params() == b.actors[0].params());
  tc.encoding = ActionEncoding::kOneHot;
  tc.clip_mode = ClipMode::kLiteral;
  CHECK(train_mappo(tc, EnvConfig{}).curve.size() == 1);
}

TEST_CASE("train config validation") {
  auto bad = [](auto mutate) {
    TrainConfig tc;
    mutate(tc);
    return code_of([&] { tc.validate(); });
  };
  CHECK(bad([](TrainConfig& c) { c.episodes = 0; }) == ErrorCode::kConfigError);
  CHECK(bad([](TrainConfig& c) { c.clip = 1.0; }) == ErrorCode::kConfigError);
  CHECK(bad([](TrainConfig& c) { c.batch = 500; }) == ErrorCode::kConfigError);
  CHECK(bad([](TrainConfig& c) { c.actor_lr = 0.0; }) == ErrorCode::kConfigError);
  CHECK(bad([](TrainConfig& c) { c.gamma = 0.0; }) == ErrorCode::kConfigError);
}

TEST_CASE("policy file round trip") {
  Rng rng(2);
  std::vector<Mlp> actors;
  for (int j = 0; j < 3; ++j) {
    actors.emplace_back(9, 64, 121);
    actors.back().init(rng);
  }
  std::stringstream ss;
  save_policies(ss, actors, 3, 120);
  const PolicyFile pf = load_policies(ss);
  CHECK(pf.history == 3);
  CHECK(pf.g_max == 120);
  REQUIRE(pf.actors.size() == 3);
  for (int j = 0; j < 3; ++j) CHECK(pf.actors[j].params() == actors[j].params());
  std::stringstream junk("not-a-policy 1\n");
  CHECK(code_of([&] { load_policies(junk); }) == ErrorCode::kConfigError);
}

TEST_CASE("random baseline is uniform over the action set") {
  RandomController rc{EnvConfig{}};
  Rng rng(6);
  double sum = 0.0;
  int n = 0;
  for (int i = 0; i < 10000; ++i) {
    for (int a : rc.act({}, rng)) {
      CHECK((a >= 0 && a <= 120));
      sum += a;
      ++n;
    }
  }
  // Uniform on {0..120}: mean 60, sd 35.
  CHECK(std::abs(sum / n - 60.0) <= 4.0 * 35.0 / std::sqrt(n));
}

TEST_CASE("newsvendor oracle") {
  EnvConfig det;
  det.deterministic_demand = true;
  NewsvendorOracleController d(det);
  CHECK(d.generation() == std::vector<int>{80, 90, 100});

  NewsvendorOracleController p{EnvConfig{}};
  const EnvConfig cfg;
  for (int j = 0; j < 3; ++j) {
    CHECK(p.generation()[j] == optimal_generation(cfg.economics, cfg.hbar(), cfg.demand(j)));
  }

  EnvConfig tight;
  tight.economics.theta_per_s = 4.0;  // cap 240
  NewsvendorOracleController s(tight);
  const auto& g = s.generation();
  CHECK(std::accumulate(g.begin(), g.end(), 0) <= 240);
  CHECK(g[0] < g[1]);
  CHECK(g[1] < g[2]);
}

TEST_CASE("greedy replays the best own welfare") {
  EnvConfig cfg;
  GreedyController gc(cfg, 0.0);
  Rng rng(1);
  gc.act({}, rng);
  StepRecord rec;
  rec.G = {10, 20, 30};
  rec.welfare = {5.0, 5.0, 5.0};
  gc.feedback(rec);
  CHECK(gc.act({}, rng) == std::vector<int>{10, 20, 30});
  rec.G = {11, 21, 31};
  rec.welfare = {6.0, 4.0, 5.0};
  gc.feedback(rec);
  CHECK(gc.act({}, rng) == std::vector<int>{11, 20, 30});
}

TEST_CASE("genetic search finds the deterministic-demand optimum") {
  EnvConfig det;
  det.deterministic_demand = true;
  const GeneticResult r = run_genetic(det, GeneticConfig{}, 5);
  REQUIRE(r.best_per_generation.size() == 100);
  const std::vector<int> target = {80, 90, 100};
  for (int j = 0; j < 3; ++j) CHECK(std::abs(r.best_per_generation.back()[j] - target[j]) <= 2);
  GeneticController gc(r, 10);
  gc.begin_episode(9);
  Rng rng(0);
  CHECK(gc.act({}, rng) == r.best_per_generation[90]);
}
