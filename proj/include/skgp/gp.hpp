#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "skgp/error.hpp"
#include "skgp/operators.hpp"
#include "skgp/parallel.hpp"
#include "skgp/phenotype.hpp"
#include "skgp/simulator.hpp"
#include "skgp/surrogate.hpp"

namespace skgp {

struct AlgorithmConfig {
  std::string label = "KGGP";
  int population_size = 50;
  int generations = 30;
  double offspring_multiplier = 1.0;
  double crossover_rate = 0.85;
  double mutation_rate = 0.10;
  int tournament_size = 7;
  bool surrogate_enabled = false;
  bool dedup_enabled = false;
  int elitism_count = 1;
  int dedup_retries = 50;
  std::uint64_t master_seed = 0;
  TreeLimits limits;

  std::size_t intermediate_count() const {
    return static_cast<std::size_t>(std::llround(offspring_multiplier * population_size));
  }
  bool needs_pc() const { return surrogate_enabled || dedup_enabled; }

  void validate() const {
    const std::string p = "algorithm." + label + ".";
    if (population_size < 1) throw ConfigError(p + "population_size: must be positive");
    if (generations < 0) throw ConfigError(p + "generations: must be non-negative");
    if (!(offspring_multiplier >= 1.0)) throw ConfigError(p + "offspring_multiplier: must be >= 1");
    if (crossover_rate < 0 || mutation_rate < 0 || crossover_rate + mutation_rate > 1.0 + 1e-12)
      throw ConfigError(p + "crossover_rate + mutation_rate must lie in [0, 1]");
    if (tournament_size < 1) throw ConfigError(p + "tournament_size: must be positive");
    if (elitism_count < 0 || elitism_count > population_size)
      throw ConfigError(p + "elitism_count: must lie in [0, population_size]");
    if (intermediate_count() < static_cast<std::size_t>(population_size))
      throw ConfigError(p + "offspring_multiplier: k*|P| rounds below |P|");
    if (limits.max_depth < limits.init_max_depth || limits.init_min_depth > limits.init_max_depth)
      throw ConfigError(p + "tree depth limits are inconsistent");
  }
};

struct Individual {
  RulePair rules;
  std::optional<double> fitness;
  std::optional<PCVector> pc;
};

struct Population {
  std::vector<Individual> members;
  int generation = 0;
  std::vector<std::uint64_t> evaluation_seeds;
};

/// Instances with their lower bounds; duration seeds are supplied per use.
struct InstanceSet {
  std::vector<std::shared_ptr<const ProjectInstance>> instances;
  std::vector<int> lower_bounds;

  static InstanceSet of(std::vector<std::shared_ptr<const ProjectInstance>> instances) {
    InstanceSet s;
    for (const auto& i : instances) s.lower_bounds.push_back(lower_bound(*i));
    s.instances = std::move(instances);
    return s;
  }
  std::size_t size() const { return instances.size(); }
};

/// Mean of makespan / lower bound over the instances; lower is better.
template <SchedulingRules Rules>
double full_fitness(const Rules& rules, const InstanceSet& set, std::span<const std::uint64_t> seeds) {
  double total = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto r = simulate(*set.instances[i], rules, seeds[i]);
    total += static_cast<double>(r.makespan) / set.lower_bounds[i];
  }
  return total / static_cast<double>(set.size());
}

inline double fitness_from_makespans(std::span<const int> makespans, std::span<const int> bounds) {
  double total = 0.0;
  for (std::size_t i = 0; i < makespans.size(); ++i) total += static_cast<double>(makespans[i]) / bounds[i];
  return total / static_cast<double>(makespans.size());
}

/// Duration seeds used by every individual of generation `g`.
inline std::vector<std::uint64_t> generation_seeds(std::uint64_t base, int generation, std::size_t count) {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(derive_seed(base, {0x67656eULL, static_cast<std::uint64_t>(generation), i}));
  return out;
}

inline std::uint64_t breeding_seed(const AlgorithmConfig& c, int generation) {
  return derive_seed(c.master_seed, {0x6272656564ULL, static_cast<std::uint64_t>(generation)});
}

// Tournament on fitness (lower wins); ties go to the earlier member.
inline std::size_t tournament(const Population& pop, int size, Rng& rng) {
  std::size_t best = rng.index(pop.members.size());
  for (int k = 1; k < size; ++k) {
    const std::size_t c = rng.index(pop.members.size());
    if (*pop.members[c].fitness < *pop.members[best].fitness || (*pop.members[c].fitness == *pop.members[best].fitness && c < best))
      best = c;
  }
  return best;
}

/// `count` offspring by tournament selection and crossover / mutation /
/// reproduction at the configured rates. Offspring carry no fitness.
inline std::vector<Individual> breed(const Population& parents, std::size_t count, const AlgorithmConfig& config, Rng& rng) {
  std::vector<Individual> out;
  out.reserve(count);
  while (out.size() < count) {
    const double r = rng.uniform01();
    if (r < config.crossover_rate) {
      const auto& a = parents.members[tournament(parents, config.tournament_size, rng)].rules;
      const auto& b = parents.members[tournament(parents, config.tournament_size, rng)].rules;
      auto [c1, c2] = crossover(a, b, config.limits, rng);
      out.push_back(Individual{std::move(c1), {}, {}});
      if (out.size() < count) out.push_back(Individual{std::move(c2), {}, {}});
    } else if (r < config.crossover_rate + config.mutation_rate) {
      const auto& a = parents.members[tournament(parents, config.tournament_size, rng)].rules;
      out.push_back(Individual{mutate(a, config.limits, rng), {}, {}});
    } else {
      out.push_back(Individual{parents.members[tournament(parents, config.tournament_size, rng)].rules, {}, {}});
    }
  }
  return out;
}

struct GenerationStats {
  int generation = 0;
  double best_train_fitness = 0.0;
  std::optional<double> best_test_fitness;
  std::size_t full_evals_cumulative = 0;
  double wallclock_eval_s = 0.0;
  double wallclock_surrogate_s = 0.0;
  std::size_t unique_offspring = 0;
  std::size_t filled_duplicates = 0;
  RulePair best;
};

/// Surrogate-assisted GP engine. With the surrogate disabled it runs the
/// plain baseline loop: breed |P|, evaluate, replace with elitism.
class Engine {
 public:
  using Clock = std::chrono::steady_clock;

  Engine(AlgorithmConfig config, InstanceSet train, std::uint64_t train_seed_base,
         std::vector<DecisionSituation> situations = {}, std::size_t threads = 1)
      : config_(std::move(config)),
        train_(std::move(train)),
        train_seed_base_(train_seed_base),
        situations_(std::move(situations)),
        frozen_(situations_),
        threads_(threads) {
    config_.validate();
    if (config_.needs_pc() && situations_.empty())
      throw ConfigError("algorithm." + config_.label + ": PC-based features need decision situations");
  }

  const AlgorithmConfig& config() const { return config_; }
  std::size_t full_evaluations() const { return full_evals_; }
  std::span<const DecisionSituation> situations() const { return situations_; }

  // Test-set evaluation of each generation's best individual (not counted
  // as full evaluations).
  void set_test_set(InstanceSet test, std::vector<std::uint64_t> seeds) {
    test_ = std::move(test);
    test_seeds_ = std::move(seeds);
  }

  double test_fitness(const RulePair& rules) const {
    double total = 0.0;
    for (std::size_t s = 0; s < test_seeds_.size(); ++s) {
      std::vector<std::uint64_t> seeds(test_.size(), 0);
      for (std::size_t i = 0; i < test_.size(); ++i) seeds[i] = derive_seed(test_seeds_[s], {i});
      total += full_fitness(rules, test_, seeds);
    }
    return total / static_cast<double>(test_seeds_.size());
  }

  PCVector pc_of(const RulePair& rules) const { return frozen_.characterise(rules); }

  /// Initial population, fully evaluated under generation-0 seeds. With
  /// deduplication, PC duplicates are regenerated up to `dedup_retries` times.
  Population initialize(GenerationStats* stats = nullptr) {
    Population pop;
    pop.generation = 0;
    Rng rng(derive_seed(config_.master_seed, {0x696e6974ULL}));
    const auto n = static_cast<std::size_t>(config_.population_size);
    pop.members.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pop.members.push_back(Individual{random_rules(config_.limits, rng), {}, {}});
    const auto t0 = Clock::now();
    if (config_.needs_pc()) compute_pcs(pop.members);
    if (config_.dedup_enabled) deduplicate(pop.members, rng);
    const double surrogate_s = seconds_since(t0);
    pop.evaluation_seeds = generation_seeds(train_seed_base_, 0, train_.size());
    std::vector<Individual*> todo;
    for (auto& m : pop.members) todo.push_back(&m);
    const auto t1 = Clock::now();
    evaluate(todo, pop.evaluation_seeds);
    if (stats) *stats = summarize(pop, seconds_since(t1), surrogate_s, 0, 0);
    return pop;
  }

  std::size_t residual_duplicates() const { return residual_duplicates_; }

  /// Regenerates members whose PC vector repeats an earlier member's, up to
  /// `dedup_retries` fresh trees each; duplicates left after that are kept
  /// and counted. Returns the number kept.
  std::size_t deduplicate(std::vector<Individual>& members, Rng& rng) {
    std::unordered_set<PCKey, PCKeyHash> seen;
    std::size_t residual = 0;
    for (auto& ind : members) {
      if (!ind.pc) ind.pc = pc_of(ind.rules);
      for (int retry = 0; retry < config_.dedup_retries && seen.contains(dedup_key(*ind.pc)); ++retry) {
        ind.rules = random_rules(config_.limits, rng);
        ind.pc = pc_of(ind.rules);
      }
      if (!seen.insert(dedup_key(*ind.pc)).second) ++residual;
    }
    residual_duplicates_ += residual;
    return residual;
  }

  /// One generation transition. Surrogate path: breed round(k|P|), keep the
  /// first offspring of every distinct PC vector, rank them by 1-NN estimate
  /// against the current population and fully evaluate the best |P| (filling
  /// with duplicates in generation order when too few are unique).
  Population evolve_generation(const Population& pop, GenerationStats* stats = nullptr) {
    Population next;
    next.generation = pop.generation + 1;
    next.evaluation_seeds = generation_seeds(train_seed_base_, next.generation, train_.size());
    Rng rng(breeding_seed(config_, next.generation));
    const auto n = static_cast<std::size_t>(config_.population_size);

    std::vector<Individual> selected;
    std::size_t unique_count = 0, filled = 0;
    double surrogate_s = 0.0;
    if (!config_.surrogate_enabled) {
      selected = breed(pop, n, config_, rng);
    } else {
      auto offspring = breed(pop, config_.intermediate_count(), config_, rng);
      const auto t0 = Clock::now();
      compute_pcs(offspring);
      std::vector<std::size_t> unique, dupes;
      std::unordered_set<PCKey, PCKeyHash> seen;
      for (std::size_t i = 0; i < offspring.size(); ++i)
        (seen.insert(dedup_key(*offspring[i].pc)).second ? unique : dupes).push_back(i);
      unique_count = unique.size();
      const SurrogateDatabase db = database_of(pop);
      std::vector<double> est(unique.size());
      parallel_for(unique.size(), threads_, [&](std::size_t u) { est[u] = db.estimate(*offspring[unique[u]].pc); });
      auto chosen = preselect(est, n);
      for (auto c : chosen) selected.push_back(std::move(offspring[unique[c]]));
      for (std::size_t d = 0; selected.size() < n && d < dupes.size(); ++d, ++filled)
        selected.push_back(std::move(offspring[dupes[d]]));
      surrogate_s = seconds_since(t0);
    }

    // Elites re-enter full evaluation under the new seeds.
    std::vector<Individual> elites;
    for (auto i : best_indices(pop, static_cast<std::size_t>(config_.elitism_count))) {
      Individual e = pop.members[i];
      e.fitness.reset();
      elites.push_back(std::move(e));
    }
    std::vector<Individual*> todo;
    for (auto& e : elites) todo.push_back(&e);
    for (auto& s : selected) todo.push_back(&s);
    const auto t1 = Clock::now();
    evaluate(todo, next.evaluation_seeds);
    const double eval_s = seconds_since(t1);

    // Elites first, then offspring; keep the best |P| (stable on ties).
    std::vector<Individual> pool;
    pool.reserve(elites.size() + selected.size());
    for (auto& e : elites) pool.push_back(std::move(e));
    for (auto& s : selected) pool.push_back(std::move(s));
    std::stable_sort(pool.begin(), pool.end(), [](const Individual& a, const Individual& b) { return *a.fitness < *b.fitness; });
    pool.resize(std::min(pool.size(), n));
    next.members = std::move(pool);
    if (stats) *stats = summarize(next, eval_s, surrogate_s, unique_count, filled);
    return next;
  }

  /// Full run: initialisation plus `generations` transitions, reporting each
  /// generation to `on_generation`.
  Population run(const std::function<void(const GenerationStats&)>& on_generation = {}) {
    GenerationStats stats;
    Population pop = initialize(&stats);
    if (on_generation) on_generation(stats);
    for (int g = 0; g < config_.generations; ++g) {
      pop = evolve_generation(pop, &stats);
      if (on_generation) on_generation(stats);
    }
    return pop;
  }

  SurrogateDatabase database_of(const Population& pop) const {
    std::vector<PCVector> pcs;
    std::vector<double> fit;
    for (const auto& m : pop.members) {
      pcs.push_back(m.pc ? *m.pc : pc_of(m.rules));
      fit.push_back(*m.fitness);
    }
    return SurrogateDatabase(std::move(pcs), std::move(fit), pop.generation);
  }

  void compute_pcs(std::vector<Individual>& inds) const {
    parallel_for(inds.size(), threads_, [&](std::size_t i) { inds[i].pc = pc_of(inds[i].rules); });
  }

  // Full evaluation of every pointed-to individual; each adds one to the budget counter.
  void evaluate(std::span<Individual* const> inds, std::span<const std::uint64_t> seeds) {
    parallel_for(inds.size(), threads_, [&](std::size_t i) { inds[i]->fitness = full_fitness(inds[i]->rules, train_, seeds); });
    full_evals_ += inds.size();
  }

  static std::vector<std::size_t> best_indices(const Population& pop, std::size_t count) {
    std::vector<double> fit;
    for (const auto& m : pop.members) fit.push_back(*m.fitness);
    auto idx = stable_ranking(fit);
    idx.resize(std::min(count, idx.size()));
    return idx;
  }

 private:
  static double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
  }

  GenerationStats summarize(const Population& pop, double eval_s, double surrogate_s, std::size_t unique, std::size_t filled) const {
    GenerationStats s;
    s.generation = pop.generation;
    const auto best = best_indices(pop, 1).front();
    s.best_train_fitness = *pop.members[best].fitness;
    s.best = pop.members[best].rules;
    if (!test_seeds_.empty()) s.best_test_fitness = test_fitness(s.best);
    s.full_evals_cumulative = full_evals_;
    s.wallclock_eval_s = eval_s;
    s.wallclock_surrogate_s = surrogate_s;
    s.unique_offspring = unique;
    s.filled_duplicates = filled;
    return s;
  }

  AlgorithmConfig config_;
  InstanceSet train_;
  std::uint64_t train_seed_base_;
  std::vector<DecisionSituation> situations_;
  FrozenSituations frozen_;
  std::size_t threads_;
  InstanceSet test_;
  std::vector<std::uint64_t> test_seeds_;
  std::size_t full_evals_ = 0;
  std::size_t residual_duplicates_ = 0;
};

}  // namespace skgp
