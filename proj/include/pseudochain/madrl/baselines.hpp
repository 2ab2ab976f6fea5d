#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pseudochain/madrl/env.hpp"
#include "pseudochain/madrl/mappo.hpp"

namespace pseudochain {

// A joint generation policy driven by the evaluation loop.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  virtual void begin_episode(int /*episode*/) {}
  virtual std::vector<int> act(const JointObservation& obs, Rng& rng) = 0;
  virtual void feedback(const StepRecord& /*step*/) {}
};

class RandomController final : public Controller {
 public:
  explicit RandomController(const EnvConfig& env);
  std::string name() const override { return "random"; }
  std::vector<int> act(const JointObservation& obs, Rng& rng) override;

 private:
  int agents_, g_max_;
};

// Replays each agent's action with the best own welfare seen so far;
// explores uniformly with probability `explore`.
class GreedyController final : public Controller {
 public:
  explicit GreedyController(const EnvConfig& env, double explore = 0.1);
  std::string name() const override { return "greedy"; }
  std::vector<int> act(const JointObservation& obs, Rng& rng) override;
  void feedback(const StepRecord& step) override;

 private:
  int agents_, g_max_;
  double explore_;
  std::vector<int> last_;
  std::vector<int> best_action_;
  std::vector<double> best_welfare_;
};

// Per-slot analytic optimum from the true demand distribution, scaled down
// proportionally when the joint generation exceeds the slot cap.
class NewsvendorOracleController final : public Controller {
 public:
  explicit NewsvendorOracleController(const EnvConfig& env);
  std::string name() const override { return "oracle"; }
  std::vector<int> act(const JointObservation& obs, Rng& rng) override;
  const std::vector<int>& generation() const { return generation_; }

 private:
  std::vector<int> generation_;
};

struct GeneticConfig {
  int population = 50;
  int generations = 100;
  double crossover = 0.8;
  double mutation = 0.05;  // per gene
  int tournament = 3;
  int elite = 2;
  double mutation_sd = 0.1;  // fraction of g_max
};

struct GeneticResult {
  std::vector<std::vector<int>> best_per_generation;
  std::vector<double> best_fitness;  // episode team reward sum
};

// Evolves joint generation vectors; each generation scores every
// individual on one shared episode.
GeneticResult run_genetic(const EnvConfig& env, const GeneticConfig& config,
                          std::uint64_t seed);

// Plays the best vector of the generation reached at each episode, with
// generations spread evenly over the episodes.
class GeneticController final : public Controller {
 public:
  GeneticController(GeneticResult result, int episodes);
  std::string name() const override { return "genetic"; }
  void begin_episode(int episode) override;
  std::vector<int> act(const JointObservation& obs, Rng& rng) override;

 private:
  GeneticResult result_;
  int episodes_;
  std::size_t current_ = 0;
};

// Decentralized execution of trained actors: sampled or argmax actions.
class MappoController final : public Controller {
 public:
  MappoController(std::vector<Mlp> actors, bool greedy);
  std::string name() const override { return "mappo"; }
  std::vector<int> act(const JointObservation& obs, Rng& rng) override;

 private:
  std::vector<Mlp> actors_;
  bool greedy_;
};

// Runs `episodes` episodes with the shared episode seeds of `seed`.
std::vector<EpisodeStats> run_controller(Controller& controller, const EnvConfig& env,
                                         int episodes, std::uint64_t seed,
                                         const StepObserver& observer = {});

double mean_reward(const std::vector<EpisodeStats>& curve, std::size_t first,
                   std::size_t count);
// Mean of the last `count` episodes.
double final_mean_reward(const std::vector<EpisodeStats>& curve, std::size_t count);

}  // namespace pseudochain
