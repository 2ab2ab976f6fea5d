#include "pseudochain/madrl/mappo.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "pseudochain/common/error.hpp"

namespace pseudochain {

void TrainConfig::validate() const {
  if (episodes <= 0 || steps <= 0 || history <= 0 || epochs <= 0 || batch <= 0 || hidden <= 0) {
    throw Error(ErrorCode::kConfigError, "episodes, steps, history, epochs, batch, hidden > 0");
  }
  if (batch > steps) throw Error(ErrorCode::kConfigError, "batch larger than an episode");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) {
    throw Error(ErrorCode::kConfigError, "learning rates must be positive");
  }
  if (!(clip > 0.0 && clip < 1.0)) throw Error(ErrorCode::kConfigError, "clip must be in (0,1)");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error(ErrorCode::kConfigError, "gamma in (0,1]");
  if (!(lambda_gae >= 0.0 && lambda_gae <= 1.0)) {
    throw Error(ErrorCode::kConfigError, "lambda_gae in [0,1]");
  }
  if (!(entropy_coef >= 0.0)) throw Error(ErrorCode::kConfigError, "entropy_coef < 0");
  if (!(reward_scale > 0.0)) throw Error(ErrorCode::kConfigError, "reward_scale must be > 0");
}

std::vector<double> action_probabilities(const Mlp& actor, std::span<const double> obs) {
  return softmax(actor.forward(obs));
}

namespace {

int draw(std::span<const double> p, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (x < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

}  // namespace

ActionSample sample_action(const Mlp& actor, std::span<const double> obs, Rng& rng) {
  const auto p = action_probabilities(actor, obs);
  const int a = draw(p, rng);
  return {a, std::log(p[static_cast<std::size_t>(a)])};
}

int greedy_action(const Mlp& actor, std::span<const double> obs) {
  const auto logits = actor.forward(obs);
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

std::size_t critic_input_width(int agents, int obs_width, int g_max, ActionEncoding encoding) {
  const std::size_t per = encoding == ActionEncoding::kScalar ? 1 : g_max + 1;
  return static_cast<std::size_t>(agents * obs_width) + (agents - 1) * per;
}

std::vector<double> critic_input(const JointObservation& obs, std::span<const int> actions,
                                 int agent, int g_max, ActionEncoding encoding) {
  std::vector<double> x;
  for (const auto& o : obs) x.insert(x.end(), o.begin(), o.end());
  for (std::size_t k = 0; k < actions.size(); ++k) {
    if (static_cast<int>(k) == agent) continue;
    if (encoding == ActionEncoding::kScalar) {
      x.push_back(static_cast<double>(actions[k]) / g_max);
    } else {
      const std::size_t at = x.size();
      x.resize(at + g_max + 1, 0.0);
      x[at + static_cast<std::size_t>(actions[k])] = 1.0;
    }
  }
  return x;
}

std::vector<double> compute_q_hat(std::span<const double> rewards, std::span<const double> q,
                                  std::span<const double> q_next, double gamma,
                                  double lambda_gae) {
  const std::size_t n = rewards.size();
  if (q.size() != n || q_next.size() != n) {
    throw Error(ErrorCode::kInvalidArgument, "trajectory length mismatch");
  }
  std::vector<double> out(n);
  double acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double delta = rewards[i] + gamma * q_next[i] - q[i];
    acc = delta + gamma * lambda_gae * acc;
    out[i] = q[i] + acc;
  }
  return out;
}

double counterfactual_baseline(std::span<const double> probs, std::span<const double> q_values) {
  if (probs.size() != q_values.size()) {
    throw Error(ErrorCode::kInvalidArgument, "policy and critic widths differ");
  }
  return std::inner_product(probs.begin(), probs.end(), q_values.begin(), 0.0);
}

double counterfactual_advantage(double q_hat, std::span<const double> probs,
                                std::span<const double> q_values) {
  return q_hat - counterfactual_baseline(probs, q_values);
}

double clipped_surrogate(double ratio, double advantage, double clip, ClipMode mode) {
  if (mode == ClipMode::kLiteral) {
    return std::min(ratio * advantage, advantage >= 0.0 ? 1.0 + clip : 1.0 - clip);
  }
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  return std::min(ratio * advantage, clipped * advantage);
}

double clipped_surrogate_slope(double ratio, double advantage, double clip, ClipMode mode) {
  if (mode == ClipMode::kLiteral) {
    const double g = advantage >= 0.0 ? 1.0 + clip : 1.0 - clip;
    return ratio * advantage <= g ? advantage : 0.0;
  }
  if (advantage > 0.0) return ratio <= 1.0 + clip ? advantage : 0.0;
  if (advantage < 0.0) return ratio >= 1.0 - clip ? advantage : 0.0;
  return 0.0;
}

double actor_loss(const Mlp& actor, std::span<const ActorSample> batch, double clip,
                  ClipMode mode, double entropy_coef, std::span<double> grad) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "empty minibatch");
  const double inv = 1.0 / static_cast<double>(batch.size());
  Mlp::Cache cache;
  std::vector<double> d_logits;
  double loss = 0.0;
  for (const ActorSample& s : batch) {
    actor.forward(s.obs, cache);
    const auto p = softmax(cache.output);
    const auto a = static_cast<std::size_t>(s.action);
    const double ratio = std::exp(std::log(p[a]) - s.old_log_prob);
    const double slope = clipped_surrogate_slope(ratio, s.advantage, clip, mode);
    double entropy = 0.0;
    for (double x : p) entropy -= x * std::log(x);
    loss -= (clipped_surrogate(ratio, s.advantage, clip, mode) + entropy_coef * entropy) * inv;
    if (slope == 0.0 && entropy_coef == 0.0) continue;

    d_logits.assign(p.size(), 0.0);
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double indicator = k == a ? 1.0 : 0.0;
      d_logits[k] = -slope * ratio * (indicator - p[k]) * inv;
      if (entropy_coef != 0.0) {
        d_logits[k] += entropy_coef * p[k] * (std::log(p[k]) + entropy) * inv;
      }
    }
    actor.backward(cache, d_logits, grad);
  }
  if (!std::isfinite(loss)) throw Error(ErrorCode::kNaNGuard, "actor loss is not finite");
  return loss;
}

double critic_loss(const Mlp& critic, std::span<const CriticSample> batch,
                   std::span<double> grad) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "empty minibatch");
  const double inv = 1.0 / static_cast<double>(batch.size());
  Mlp::Cache cache;
  std::vector<double> d_out(critic.out(), 0.0);
  double loss = 0.0;
  for (const CriticSample& s : batch) {
    const auto a = static_cast<std::size_t>(s.action);
    const double err = critic.forward_one(s.input, a, cache) - s.target;
    loss += err * err * inv;
    std::fill(d_out.begin(), d_out.end(), 0.0);
    d_out[a] = 2.0 * err * inv;
    critic.backward(cache, d_out, grad);
  }
  if (!std::isfinite(loss)) throw Error(ErrorCode::kNaNGuard, "critic loss is not finite");
  return loss;
}

std::uint64_t episode_seed(std::uint64_t seed, int episode) {
  return mix_seed(derive_seed(seed, "episode") ^ static_cast<std::uint64_t>(episode));
}

namespace {

bool valid_distribution(std::span<const double> p) {
  double sum = 0.0;
  for (double x : p) {
    if (!(x > 0.0)) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= 1e-9;
}

struct Transition {
  JointObservation obs;
  std::vector<int> actions;
  std::vector<double> log_probs;
  double reward = 0.0;  // scaled
};

}  // namespace

TrainResult train_mappo(const TrainConfig& config, EnvConfig env_config,
                        const StepObserver& observer) {
  config.validate();
  env_config.steps = config.steps;
  env_config.history = config.history;
  PseudonymGenEnv env(env_config);
  const int J = env_config.agents();
  const int A = env_config.actions();
  const int g_max = env_config.economics.g_max;
  const std::size_t obs_w = static_cast<std::size_t>(env_config.obs_width());
  const std::size_t critic_w = critic_input_width(J, env_config.obs_width(), g_max,
                                                  config.encoding);

  Rng init_rng = make_rng(config.seed, "mappo-init");
  Rng act_rng = make_rng(config.seed, "mappo-act");
  Rng shuffle_rng = make_rng(config.seed, "mappo-shuffle");

  TrainResult result;
  std::vector<Mlp> targets;
  std::vector<Adam> actor_opt, critic_opt;
  for (int j = 0; j < J; ++j) {
    Mlp actor(obs_w, config.hidden, A);
    actor.init(init_rng, 0.01);
    Mlp critic(critic_w, config.hidden, A);
    critic.init(init_rng);
    actor_opt.emplace_back(actor.size(), config.actor_lr);
    critic_opt.emplace_back(critic.size(), config.critic_lr);
    targets.push_back(critic);
    result.actors.push_back(std::move(actor));
    result.critics.push_back(std::move(critic));
  }

  auto act = [&](const JointObservation& obs, std::vector<int>& a, std::vector<double>& lp) {
    a.assign(J, 0);
    lp.assign(J, 0.0);
    for (int j = 0; j < J; ++j) {
      const auto p = action_probabilities(result.actors[j], obs[j]);
      if (!valid_distribution(p)) ++result.invalid_distributions;
      const int pick = draw(p, act_rng);
      a[j] = pick;
      lp[j] = std::log(p[pick]);
    }
  };

  const int T = config.steps;
  const int batches = T / config.batch;
  std::vector<Transition> traj;
  std::vector<std::vector<ActorSample>> actor_buf(J);
  std::vector<std::vector<CriticSample>> critic_buf(J);
  std::vector<std::size_t> order(static_cast<std::size_t>(T));

  for (int e = 0; e < config.episodes; ++e) {
    JointObservation obs = env.reset(episode_seed(config.seed, e));
    traj.clear();
    EpisodeStats stats;
    stats.episode = e;
    stats.mean_generation.assign(J, 0.0);
    double reward_sum = 0.0;
    while (!env.done()) {
      Transition tr;
      tr.obs = obs;
      act(obs, tr.actions, tr.log_probs);
      const StepRecord rec = env.step(tr.actions);
      if (observer) observer(e, rec);
      ++result.steps;
      if (rec.cap_exceeded) {
        ++result.cap_violations;
        ++stats.cap_violations;
        if (rec.reward != 0.0) ++result.cap_violations_with_reward;
      }
      reward_sum += rec.reward;
      for (int j = 0; j < J; ++j) stats.mean_generation[j] += rec.G[j];
      tr.reward = rec.reward * config.reward_scale;
      traj.push_back(std::move(tr));
      obs = env.observe();
    }
    stats.mean_reward = reward_sum / T;
    for (double& g : stats.mean_generation) g /= T;
    result.curve.push_back(stats);

    // Bootstrap actions for the state after the last step.
    std::vector<int> last_actions;
    std::vector<double> last_lp;
    act(obs, last_actions, last_lp);

    for (int j = 0; j < J; ++j) {
      std::vector<double> rewards(T), q(T), q_next(T), baseline(T);
      std::vector<std::vector<double>> inputs(T);
      // The target critic equals the live critic here (synced last episode),
      // so one forward per step serves both Q_hat and the baseline.
      std::vector<std::vector<double>> qv(T);
      for (int t = 0; t < T; ++t) {
        const Transition& tr = traj[t];
        inputs[t] = critic_input(tr.obs, tr.actions, j, g_max, config.encoding);
        qv[t] = targets[j].forward(inputs[t]);
        q[t] = qv[t][tr.actions[j]];
        baseline[t] =
            counterfactual_baseline(action_probabilities(result.actors[j], tr.obs[j]), qv[t]);
        rewards[t] = tr.reward;
      }
      for (int t = 0; t + 1 < T; ++t) q_next[t] = q[t + 1];
      q_next[T - 1] = targets[j].forward(
          critic_input(obs, last_actions, j, g_max, config.encoding))[last_actions[j]];
      const auto q_hat = compute_q_hat(rewards, q, q_next, config.gamma, config.lambda_gae);
      std::vector<double> adv(T);
      for (int t = 0; t < T; ++t) adv[t] = q_hat[t] - baseline[t];
      if (config.normalize_advantages) {
        const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / T;
        double var = 0.0;
        for (double x : adv) var += (x - mean) * (x - mean);
        const double sd = std::sqrt(var / T) + 1e-8;
        for (double& x : adv) x = (x - mean) / sd;
      }
      actor_buf[j].clear();
      critic_buf[j].clear();
      for (int t = 0; t < T; ++t) {
        actor_buf[j].push_back({traj[t].obs[j], traj[t].actions[j], traj[t].log_probs[j], adv[t]});
        critic_buf[j].push_back({std::move(inputs[t]), traj[t].actions[j], q_hat[t]});
      }
    }

    std::vector<ActorSample> ab;
    std::vector<CriticSample> cb;
    for (int k = 0; k < config.epochs; ++k) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      for (int l = 0; l < batches; ++l) {
        for (int j = 0; j < J; ++j) {
          ab.clear();
          cb.clear();
          for (int m = 0; m < config.batch; ++m) {
            const std::size_t idx = order[static_cast<std::size_t>(l * config.batch + m)];
            ab.push_back(actor_buf[j][idx]);
            cb.push_back(critic_buf[j][idx]);
          }
          std::vector<double> ga(result.actors[j].size(), 0.0);
          actor_loss(result.actors[j], ab, config.clip, config.clip_mode, config.entropy_coef,
                     ga);
          actor_opt[j].step(result.actors[j].params(), ga);
          std::vector<double> gc(result.critics[j].size(), 0.0);
          critic_loss(result.critics[j], cb, gc);
          critic_opt[j].step(result.critics[j].params(), gc);
        }
      }
    }
    for (int j = 0; j < J; ++j) targets[j] = result.critics[j];
  }
  return result;
}

void save_policies(std::ostream& os, const std::vector<Mlp>& actors, int history, int g_max) {
  if (actors.empty()) throw Error(ErrorCode::kInvalidArgument, "no policies to save");
  const Mlp& f = actors.front();
  os << fmt::format("pseudochain-policy 1 agents {} in {} hidden {} out {} history {} g_max {}\n",
                    actors.size(), f.in(), f.hidden(), f.out(), history, g_max);
  for (const Mlp& m : actors) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      os << (i ? " " : "") << fmt::format("{:.17g}", m.params()[i]);
    }
    os << '\n';
  }
}

PolicyFile load_policies(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw Error(ErrorCode::kConfigError, "empty policy file");
  std::istringstream hs(header);
  std::string magic, k1, k2, k3, k4, k5, k6;
  int version = 0;
  std::size_t agents = 0, in = 0, hidden = 0, out = 0;
  PolicyFile pf;
  hs >> magic >> version >> k1 >> agents >> k2 >> in >> k3 >> hidden >> k4 >> out >> k5 >>
      pf.history >> k6 >> pf.g_max;
  if (!hs || magic != "pseudochain-policy" || version != 1 || k1 != "agents" || k2 != "in" ||
      k3 != "hidden" || k4 != "out" || k5 != "history" || k6 != "g_max") {
    throw Error(ErrorCode::kConfigError, "bad policy header");
  }
  for (std::size_t j = 0; j < agents; ++j) {
    Mlp m(in, hidden, out);
    for (double& x : m.params()) {
      if (!(is >> x)) throw Error(ErrorCode::kConfigError, "truncated policy file");
    }
    pf.actors.push_back(std::move(m));
  }
  return pf;
}

void write_curve_csv(std::ostream& os, const std::string& method,
                     const std::vector<EpisodeStats>& curve, bool header) {
  const std::size_t J = curve.empty() ? 0 : curve.front().mean_generation.size();
  if (header) {
    os << "method,episode,mean_reward,cap_violations";
    for (std::size_t j = 0; j < J; ++j) os << ",G" << j;
    os << '\n';
  }
  for (const auto& s : curve) {
    os << fmt::format("{},{},{:.6f},{}", method, s.episode, s.mean_reward, s.cap_violations);
    for (double g : s.mean_generation) os << fmt::format(",{:.4f}", g);
    os << '\n';
  }
}

}  // namespace pseudochain
