#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pseudochain/madrl/env.hpp"
#include "pseudochain/madrl/network.hpp"

namespace pseudochain {

// kStandard: min(r*A, clip(r, 1-eps, 1+eps)*A).
// kLiteral:  min(r*A, g) with g = 1+eps if A >= 0 else 1-eps.
enum class ClipMode { kStandard, kLiteral };
// How other agents' actions enter a critic.
enum class ActionEncoding { kScalar, kOneHot };

struct TrainConfig {
  int episodes = 500;  // E
  int steps = 120;     // T
  int history = 3;     // L
  int epochs = 15;     // K
  int batch = 16;      // B
  int hidden = 64;
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  double clip = 0.2;
  double gamma = 0.99;
  double lambda_gae = 0.95;
  double entropy_coef = 0.0;
  double reward_scale = 1e-3;  // applied to team rewards before learning
  bool normalize_advantages = true;
  ClipMode clip_mode = ClipMode::kStandard;
  ActionEncoding encoding = ActionEncoding::kScalar;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ActionSample {
  int action = 0;
  double log_prob = 0.0;
};

std::vector<double> action_probabilities(const Mlp& actor, std::span<const double> obs);
ActionSample sample_action(const Mlp& actor, std::span<const double> obs, Rng& rng);
int greedy_action(const Mlp& actor, std::span<const double> obs);

// Joint observation followed by the other agents' actions.
std::vector<double> critic_input(const JointObservation& obs, std::span<const int> actions,
                                 int agent, int g_max, ActionEncoding encoding);
std::size_t critic_input_width(int agents, int obs_width, int g_max, ActionEncoding encoding);

// Q_hat_t = q_t + sum_{k>=t} (gamma*lambda)^(k-t) * delta_k with
// delta_k = R_k + gamma*q_next_k - q_k, truncated at the last step.
std::vector<double> compute_q_hat(std::span<const double> rewards, std::span<const double> q,
                                  std::span<const double> q_next, double gamma,
                                  double lambda_gae);

// b = sum_a pi(a) Q(a).
double counterfactual_baseline(std::span<const double> probs, std::span<const double> q_values);
double counterfactual_advantage(double q_hat, std::span<const double> probs,
                                std::span<const double> q_values);

double clipped_surrogate(double ratio, double advantage, double clip, ClipMode mode);
// d/d ratio of clipped_surrogate (0 where the clip branch is active).
double clipped_surrogate_slope(double ratio, double advantage, double clip, ClipMode mode);

struct ActorSample {
  std::vector<double> obs;
  int action = 0;
  double old_log_prob = 0.0;
  double advantage = 0.0;
};

struct CriticSample {
  std::vector<double> input;
  int action = 0;
  double target = 0.0;
};

// Loss = -mean(surrogate) - entropy_coef * mean(entropy); gradient is added
// to grad. Throws NaNGuard on a non-finite loss.
double actor_loss(const Mlp& actor, std::span<const ActorSample> batch, double clip,
                  ClipMode mode, double entropy_coef, std::span<double> grad);
// Loss = mean (target - Q[action])^2.
double critic_loss(const Mlp& critic, std::span<const CriticSample> batch,
                   std::span<double> grad);

struct EpisodeStats {
  int episode = 0;
  double mean_reward = 0.0;  // per step, unscaled team reward
  std::vector<double> mean_generation;  // per agent
  int cap_violations = 0;
};

struct TrainResult {
  std::vector<EpisodeStats> curve;
  std::vector<Mlp> actors;
  std::vector<Mlp> critics;
  std::uint64_t steps = 0;
  std::uint64_t cap_violations = 0;
  std::uint64_t cap_violations_with_reward = 0;  // must stay 0
  std::uint64_t invalid_distributions = 0;       // must stay 0
};

using StepObserver = std::function<void(int episode, const StepRecord&)>;

// Environment seed of episode e; shared by every method run with `seed`.
std::uint64_t episode_seed(std::uint64_t seed, int episode);

TrainResult train_mappo(const TrainConfig& config, EnvConfig env,
                        const StepObserver& observer = {});

// Text format: header line, then one line of parameters per network.
void save_policies(std::ostream& os, const std::vector<Mlp>& actors, int history, int g_max);
struct PolicyFile {
  int history = 0;
  int g_max = 0;
  std::vector<Mlp> actors;
};
PolicyFile load_policies(std::istream& is);

void write_curve_csv(std::ostream& os, const std::string& method,
                     const std::vector<EpisodeStats>& curve, bool header = true);

}  // namespace pseudochain
