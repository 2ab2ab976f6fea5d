#include "pseudochain/madrl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pseudochain/common/error.hpp"

namespace pseudochain {

RandomController::RandomController(const EnvConfig& env)
    : agents_(env.agents()), g_max_(env.economics.g_max) {}

std::vector<int> RandomController::act(const JointObservation&, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, g_max_);
  std::vector<int> a(static_cast<std::size_t>(agents_));
  for (int& x : a) x = pick(rng);
  return a;
}

GreedyController::GreedyController(const EnvConfig& env, double explore)
    : agents_(env.agents()),
      g_max_(env.economics.g_max),
      explore_(explore),
      best_action_(static_cast<std::size_t>(agents_), -1),
      best_welfare_(static_cast<std::size_t>(agents_), 0.0) {}

std::vector<int> GreedyController::act(const JointObservation&, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, g_max_);
  last_.assign(static_cast<std::size_t>(agents_), 0);
  for (int j = 0; j < agents_; ++j) {
    const bool explore = u(rng) < explore_;
    last_[j] = (explore || best_action_[j] < 0) ? pick(rng) : best_action_[j];
  }
  return last_;
}

void GreedyController::feedback(const StepRecord& step) {
  for (int j = 0; j < agents_; ++j) {
    if (best_action_[j] < 0 || step.welfare[j] > best_welfare_[j]) {
      best_action_[j] = step.G[j];
      best_welfare_[j] = step.welfare[j];
    }
  }
}

NewsvendorOracleController::NewsvendorOracleController(const EnvConfig& env) {
  const double hbar = env.hbar();
  int total = 0;
  for (int j = 0; j < env.agents(); ++j) {
    generation_.push_back(optimal_generation(env.economics, hbar, env.demand(j)));
    total += generation_.back();
  }
  const double cap = env.economics.slot_cap();
  if (total > cap) {
    for (int& g : generation_) g = static_cast<int>(std::floor(g * cap / total));
  }
}

std::vector<int> NewsvendorOracleController::act(const JointObservation&, Rng&) {
  return generation_;
}

GeneticResult run_genetic(const EnvConfig& env_config, const GeneticConfig& config,
                          std::uint64_t seed) {
  if (config.population < 2 || config.generations < 1 || config.tournament < 1 ||
      config.elite < 0 || config.elite > config.population) {
    throw Error(ErrorCode::kConfigError, "invalid genetic configuration");
  }
  PseudonymGenEnv env(env_config);
  const int J = env_config.agents();
  const int g_max = env_config.economics.g_max;
  Rng rng = make_rng(seed, "genetic");
  std::uniform_int_distribution<int> gene(0, g_max);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, config.mutation_sd * g_max);

  using Genome = std::vector<int>;
  std::vector<Genome> pop(static_cast<std::size_t>(config.population), Genome(J));
  for (auto& g : pop) {
    for (int& x : g) x = gene(rng);
  }

  auto fitness = [&](const Genome& g, std::uint64_t episode) {
    env.reset(episode);
    double sum = 0.0;
    while (!env.done()) sum += env.step(g).reward;
    return sum;
  };

  GeneticResult out;
  std::vector<double> fit(pop.size());
  for (int gen = 0; gen < config.generations; ++gen) {
    const std::uint64_t ep = episode_seed(seed, gen);
    for (std::size_t i = 0; i < pop.size(); ++i) fit[i] = fitness(pop[i], ep);
    std::vector<std::size_t> rank(pop.size());
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::stable_sort(rank.begin(), rank.end(),
                     [&](std::size_t a, std::size_t b) { return fit[a] > fit[b]; });
    out.best_per_generation.push_back(pop[rank[0]]);
    out.best_fitness.push_back(fit[rank[0]]);

    auto select = [&]() -> const Genome& {
      std::uniform_int_distribution<std::size_t> any(0, pop.size() - 1);
      std::size_t best = any(rng);
      for (int k = 1; k < config.tournament; ++k) {
        const std::size_t c = any(rng);
        if (fit[c] > fit[best]) best = c;
      }
      return pop[best];
    };
    std::vector<Genome> next;
    for (int e = 0; e < config.elite; ++e) next.push_back(pop[rank[e]]);
    while (next.size() < pop.size()) {
      Genome a = select();
      Genome b = select();
      if (J > 1 && u(rng) < config.crossover) {
        std::uniform_int_distribution<int> cut(1, J - 1);
        const int at = cut(rng);
        for (int k = at; k < J; ++k) std::swap(a[k], b[k]);
      }
      for (Genome* child : {&a, &b}) {
        for (int& x : *child) {
          if (u(rng) < config.mutation) {
            x = std::clamp(static_cast<int>(std::lround(x + jitter(rng))), 0, g_max);
          }
        }
        if (next.size() < pop.size()) next.push_back(*child);
      }
    }
    pop = std::move(next);
  }
  return out;
}

GeneticController::GeneticController(GeneticResult result, int episodes)
    : result_(std::move(result)), episodes_(std::max(episodes, 1)) {
  if (result_.best_per_generation.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "genetic result has no generations");
  }
}

void GeneticController::begin_episode(int episode) {
  const std::size_t n = result_.best_per_generation.size();
  const auto at = static_cast<std::size_t>(episode) * n / static_cast<std::size_t>(episodes_);
  current_ = std::min(at, n - 1);
}

std::vector<int> GeneticController::act(const JointObservation&, Rng&) {
  return result_.best_per_generation[current_];
}

MappoController::MappoController(std::vector<Mlp> actors, bool greedy)
    : actors_(std::move(actors)), greedy_(greedy) {}

std::vector<int> MappoController::act(const JointObservation& obs, Rng& rng) {
  std::vector<int> a;
  for (std::size_t j = 0; j < actors_.size(); ++j) {
    a.push_back(greedy_ ? greedy_action(actors_[j], obs[j])
                        : sample_action(actors_[j], obs[j], rng).action);
  }
  return a;
}

std::vector<EpisodeStats> run_controller(Controller& controller, const EnvConfig& env_config,
                                         int episodes, std::uint64_t seed,
                                         const StepObserver& observer) {
  PseudonymGenEnv env(env_config);
  Rng rng = make_rng(seed, "controller-" + controller.name());
  std::vector<EpisodeStats> curve;
  const int J = env_config.agents();
  for (int e = 0; e < episodes; ++e) {
    controller.begin_episode(e);
    JointObservation obs = env.reset(episode_seed(seed, e));
    EpisodeStats s;
    s.episode = e;
    s.mean_generation.assign(J, 0.0);
    double sum = 0.0;
    while (!env.done()) {
      const StepRecord rec = env.step(controller.act(obs, rng));
      controller.feedback(rec);
      if (observer) observer(e, rec);
      sum += rec.reward;
      if (rec.cap_exceeded) ++s.cap_violations;
      for (int j = 0; j < J; ++j) s.mean_generation[j] += rec.G[j];
      obs = env.observe();
    }
    s.mean_reward = sum / env_config.steps;
    for (double& g : s.mean_generation) g /= env_config.steps;
    curve.push_back(std::move(s));
  }
  return curve;
}

double mean_reward(const std::vector<EpisodeStats>& curve, std::size_t first,
                   std::size_t count) {
  if (first >= curve.size() || count == 0) {
    throw Error(ErrorCode::kInvalidArgument, "empty reward window");
  }
  const std::size_t last = std::min(curve.size(), first + count);
  double sum = 0.0;
  for (std::size_t i = first; i < last; ++i) sum += curve[i].mean_reward;
  return sum / static_cast<double>(last - first);
}

double final_mean_reward(const std::vector<EpisodeStats>& curve, std::size_t count) {
  const std::size_t n = std::min(count, curve.size());
  return mean_reward(curve, curve.size() - n, n);
}

}  // namespace pseudochain
