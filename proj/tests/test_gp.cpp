#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <unordered_set>

#include "fixtures.hpp"
#include "skgp/generator.hpp"
#include "skgp/gp.hpp"

using namespace skgp;
using namespace skgp::testing;

namespace {

struct Problem {
  InstanceSet train;
  std::vector<DecisionSituation> situations;
};

Problem problem(std::uint64_t seed, int n = 15, int count = 2) {
  ScenarioConfig c;
  c.activity_count = n;
  c.target_order_strength = 0.25;
  std::vector<std::shared_ptr<const ProjectInstance>> insts;
  for (int i = 0; i < count; ++i) insts.push_back(share(generate_instance(c, seed * 100 + static_cast<std::uint64_t>(i))));
  SamplingOptions o;
  o.per_kind = 8;
  o.min_candidates = 3;
  auto sit = sample_situations(insts, reference_rules(), o, seed);
  return Problem{InstanceSet::of(insts), std::move(sit)};
}

AlgorithmConfig config(bool surrogate, double k, int pop = 12, int gens = 3) {
  AlgorithmConfig c;
  c.label = surrogate ? "SKGGP" : "KGGP";
  c.population_size = pop;
  c.generations = gens;
  c.surrogate_enabled = surrogate;
  c.dedup_enabled = surrogate;
  c.offspring_multiplier = k;
  c.master_seed = 31;
  return c;
}

std::vector<std::string> rule_strings(const Population& p) {
  std::vector<std::string> out;
  for (const auto& m : p.members) out.push_back(m.rules.to_string());
  return out;
}

std::vector<double> fitnesses(const Population& p) {
  std::vector<double> out;
  for (const auto& m : p.members) out.push_back(*m.fitness);
  return out;
}

}  // namespace

TEST(Fitness, MeanNormalisedMakespan) {
  const std::vector<int> ms{10, 12, 14, 16, 18}, lb{10, 10, 10, 10, 10};
  EXPECT_DOUBLE_EQ(fitness_from_makespans(ms, lb), 1.4);
}

TEST(Fitness, FullEvaluationOnFixedDurations) {
  // Capacity 1 serialises both activities: makespan 7 over bound 5; a chain
  // meets its bound exactly.
  const auto set = InstanceSet::of({share(independent({5, 2}, 1)), share(chain({3, 4}))});
  EXPECT_EQ(set.lower_bounds, (std::vector<int>{5, 7}));
  const std::vector<std::uint64_t> seeds{1, 2};
  EXPECT_DOUBLE_EQ(full_fitness(reference_rules(), set, seeds), (7.0 / 5.0 + 1.0) / 2.0);
}

TEST(Config, ValidationNamesField) {
  auto c = config(true, 0.5);
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("offspring_multiplier"), std::string::npos);
  }
  c = config(false, 1.0);
  c.crossover_rate = 0.95;
  EXPECT_THROW(c.validate(), ConfigError);
  const auto p = problem(1);
  EXPECT_THROW(Engine(config(true, 2.0), p.train, 1), ConfigError);  // no situations
}

TEST(Engine, InitializationIsDeterministic) {
  const auto p = problem(2);
  Engine a(config(true, 2.0), p.train, 5, p.situations);
  Engine b(config(true, 2.0), p.train, 5, p.situations);
  const auto pa = a.initialize(), pb = b.initialize();
  EXPECT_EQ(rule_strings(pa), rule_strings(pb));
  EXPECT_EQ(fitnesses(pa), fitnesses(pb));
}

TEST(Engine, InitializationRemovesPhenotypicClones) {
  const auto p = problem(3);
  auto c = config(true, 2.0, 40, 0);
  Engine e(c, p.train, 5, p.situations);
  const auto pop = e.initialize();
  std::unordered_set<PCKey, PCKeyHash> keys;
  for (const auto& m : pop.members) keys.insert(dedup_key(e.pc_of(m.rules)));
  EXPECT_EQ(keys.size() + e.residual_duplicates(), pop.members.size());
  EXPECT_EQ(e.residual_duplicates(), 0u);

  c.dedup_enabled = false;
  c.surrogate_enabled = false;
  Engine plain(c, p.train, 5, p.situations);
  const auto raw = plain.initialize();
  std::unordered_set<PCKey, PCKeyHash> raw_keys;
  for (const auto& m : raw.members) raw_keys.insert(dedup_key(plain.pc_of(m.rules)));
  EXPECT_LT(raw_keys.size(), raw.members.size());  // random init does produce clones
}

TEST(Engine, DeduplicatingClonesYieldsDistinctPhenotypes) {
  const auto p = problem(12);
  Engine e(config(true, 2.0, 10, 0), p.train, 5, p.situations);
  Rng rng(1);
  const auto tree = random_rules(TreeLimits{}, rng);
  std::vector<Individual> clones(10, Individual{tree, {}, {}});
  const auto residual = e.deduplicate(clones, rng);
  std::unordered_set<PCKey, PCKeyHash> keys;
  for (const auto& m : clones) keys.insert(dedup_key(*m.pc));
  EXPECT_GE(keys.size(), 2u);
  EXPECT_EQ(keys.size() + residual, clones.size());
  EXPECT_EQ(clones.front().rules, tree);  // the first occurrence is kept
}

TEST(Engine, InitializationSkipsPhenotypesWithoutDedup) {
  const auto p = problem(13);
  Engine e(config(false, 1.0, 10, 0), p.train, 5);
  for (const auto& m : e.initialize().members) {
    EXPECT_FALSE(m.pc);
    EXPECT_TRUE(m.fitness);
  }
}

TEST(Breed, CrossoverOfIdenticalParentsReusesTheirMaterial) {
  const auto p = problem(14);
  auto c = config(false, 1.0, 6, 0);
  c.crossover_rate = 1.0;
  c.mutation_rate = 0.0;
  Engine e(c, p.train, 5);
  auto pop = e.initialize();
  for (auto& m : pop.members) m.rules = pop.members.front().rules;
  const auto& parent = pop.members.front().rules;
  Rng rng(3);
  for (const auto& child : breed(pop, 200, c, rng)) {
    for (int which = 0; which < 2; ++which) {
      const auto& src = tree_of(parent, which).nodes();
      for (const auto& n : tree_of(child.rules, which).nodes())
        ASSERT_NE(std::find(src.begin(), src.end(), n), src.end());
    }
  }
}

TEST(Breed, MaxDepthParentsNeverYieldOversizeOffspring) {
  const auto p = problem(15);
  auto c = config(false, 1.0, 20, 0);
  Engine e(c, p.train, 5);
  auto pop = e.initialize();
  Rng rng(4);
  for (auto& m : pop.members)
    m.rules = RulePair{random_tree(Role::Ordering, c.limits.max_depth, true, rng), random_tree(Role::Group, c.limits.max_depth, rng.bernoulli(0.5), rng)};
  for (const auto& child : breed(pop, 10000, c, rng)) {
    ASSERT_LE(child.rules.ordering.depth(), c.limits.max_depth);
    ASSERT_LE(child.rules.group.depth(), c.limits.max_depth);
  }
}

TEST(Engine, BudgetIsPopulationTimesGenerationsPlusElites) {
  const auto p = problem(4);
  for (double k : {1.0, 2.0, 4.0}) {
    for (bool surrogate : {false, true}) {
      if (!surrogate && k != 1.0) continue;
      const auto c = config(surrogate, k, 10, 3);
      Engine e(c, p.train, 9, p.situations);
      std::vector<std::size_t> cumulative;
      e.run([&](const GenerationStats& s) { cumulative.push_back(s.full_evals_cumulative); });
      EXPECT_EQ(e.full_evaluations(), 10u * 4 + 1u * 3) << k;
      EXPECT_EQ(cumulative, (std::vector<std::size_t>{10, 21, 32, 43}));
    }
  }
}

TEST(Engine, UnitMultiplierSelectsEveryOffspring) {
  const auto p = problem(5);
  Engine e(config(true, 1.0), p.train, 3, p.situations);
  const auto pop = e.initialize();
  GenerationStats s;
  e.evolve_generation(pop, &s);
  EXPECT_EQ(s.unique_offspring + s.filled_duplicates, 12u);
}

TEST(Engine, PreselectionMatchesExhaustiveOracle) {
  const auto p = problem(6);
  auto c = config(true, 2.0);
  c.elitism_count = 0;  // every selected offspring survives replacement
  Engine e(c, p.train, 3, p.situations);
  const auto pop = e.initialize();
  const auto next = e.evolve_generation(pop);

  // Replay breeding with the same stream.
  Rng rng(breeding_seed(c, 1));
  const auto offspring = breed(pop, c.intermediate_count(), c, rng);
  std::vector<PCVector> db_pc;
  std::vector<double> db_fit;
  for (const auto& m : pop.members) {
    db_pc.push_back(e.pc_of(m.rules));
    db_fit.push_back(*m.fitness);
  }
  std::vector<std::pair<double, std::size_t>> scored;  // (estimate, position) of first occurrences
  std::vector<std::size_t> dupes;
  std::vector<std::vector<std::int32_t>> seen;
  for (std::size_t i = 0; i < offspring.size(); ++i) {
    const auto q = e.pc_of(offspring[i].rules);
    if (std::find(seen.begin(), seen.end(), q.ranks) != seen.end()) {
      dupes.push_back(i);
      continue;
    }
    seen.push_back(q.ranks);
    std::size_t best = 0;
    for (std::size_t j = 1; j < db_pc.size(); ++j)
      if (manhattan(db_pc[j], q) < manhattan(db_pc[best], q)) best = j;
    scored.push_back({db_fit[best], i});
  }
  std::sort(scored.begin(), scored.end());
  std::multiset<std::string> want;
  for (std::size_t k = 0; k < scored.size() && want.size() < 12; ++k) want.insert(offspring[scored[k].second].rules.to_string());
  for (std::size_t d = 0; d < dupes.size() && want.size() < 12; ++d) want.insert(offspring[dupes[d]].rules.to_string());
  const auto got = rule_strings(next);
  EXPECT_EQ(std::multiset<std::string>(got.begin(), got.end()), want);
}

TEST(Engine, EliteIsReevaluatedAndCompetes) {
  const auto p = problem(7);
  Engine e(config(true, 2.0), p.train, 3, p.situations);
  auto pop = e.initialize();
  for (int g = 0; g < 3; ++g) {
    const auto elite = pop.members[Engine::best_indices(pop, 1).front()].rules;
    const auto next = e.evolve_generation(pop);
    const double refit = full_fitness(elite, p.train, next.evaluation_seeds);
    const auto fit = fitnesses(next);
    const auto worst = *std::max_element(fit.begin(), fit.end());
    const auto names = rule_strings(next);
    const bool present = std::find(names.begin(), names.end(), elite.to_string()) != names.end();
    if (refit < worst) {
      EXPECT_TRUE(present);
    }
    for (const auto& m : next.members) {
      if (m.rules == elite) {
        EXPECT_DOUBLE_EQ(*m.fitness, refit);
      }
    }
    EXPECT_TRUE(std::is_sorted(fit.begin(), fit.end()));
    pop = next;
  }
}

TEST(Engine, BaselineMatchesHandWrittenLoop) {
  const auto p = problem(8);
  const auto c = config(false, 1.0, 10, 3);
  Engine e(c, p.train, 4);
  const auto final_pop = e.run();

  // Plain generational loop written out directly.
  Population pop;
  Rng init(derive_seed(c.master_seed, {0x696e6974ULL}));
  for (int i = 0; i < c.population_size; ++i) pop.members.push_back(Individual{random_rules(c.limits, init), {}, {}});
  auto seeds = generation_seeds(4, 0, p.train.size());
  for (auto& m : pop.members) m.fitness = full_fitness(m.rules, p.train, seeds);
  for (int g = 1; g <= c.generations; ++g) {
    Rng rng(breeding_seed(c, g));
    auto kids = breed(pop, static_cast<std::size_t>(c.population_size), c, rng);
    seeds = generation_seeds(4, g, p.train.size());
    std::size_t best = 0;
    for (std::size_t i = 1; i < pop.members.size(); ++i)
      if (*pop.members[i].fitness < *pop.members[best].fitness) best = i;
    std::vector<Individual> pool{Individual{pop.members[best].rules, {}, {}}};
    for (auto& k : kids) pool.push_back(std::move(k));
    for (auto& m : pool) m.fitness = full_fitness(m.rules, p.train, seeds);
    std::stable_sort(pool.begin(), pool.end(), [](const Individual& a, const Individual& b) { return *a.fitness < *b.fitness; });
    pool.resize(static_cast<std::size_t>(c.population_size));
    pop.members = std::move(pool);
    pop.generation = g;
  }
  EXPECT_EQ(rule_strings(final_pop), rule_strings(pop));
  EXPECT_EQ(fitnesses(final_pop), fitnesses(pop));
}

TEST(Engine, RunsAreReproducibleAcrossThreadCounts) {
  const auto p = problem(9);
  auto trace = [&](std::size_t threads) {
    Engine e(config(true, 2.0), p.train, 6, p.situations, threads);
    std::vector<double> best;
    e.run([&](const GenerationStats& s) { best.push_back(s.best_train_fitness); });
    return best;
  };
  const auto one = trace(1);
  EXPECT_EQ(one, trace(1));
  EXPECT_EQ(one, trace(3));
}

TEST(Engine, TestFitnessReportedWhenConfigured) {
  const auto p = problem(10);
  Engine e(config(false, 1.0, 8, 1), p.train, 2);
  const auto q = problem(11);
  e.set_test_set(q.train, {100, 200});
  std::vector<GenerationStats> stats;
  e.run([&](const GenerationStats& s) { stats.push_back(s); });
  ASSERT_EQ(stats.size(), 2u);
  for (const auto& s : stats) {
    ASSERT_TRUE(s.best_test_fitness);
    EXPECT_DOUBLE_EQ(*s.best_test_fitness, e.test_fitness(s.best));
    EXPECT_GE(*s.best_test_fitness, 1.0);
  }
  EXPECT_EQ(e.full_evaluations(), 8u * 2 + 1u);  // test evaluations are not budgeted
}
