#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "skgp/analysis.hpp"
#include "skgp/error.hpp"
#include "skgp/generator.hpp"
#include "skgp/gp.hpp"
#include "skgp/stats.hpp"

namespace skgp {

namespace fs = std::filesystem;

struct PlanSettings {
  int repetitions = 10;
  std::uint64_t master_seed = 1;
  int test_instances = 5;
  int test_seeds = 2;
  std::string output_dir = "runs";
  std::string baseline = "KGGP";
  SamplingOptions situations{10, 4, 256};
};

struct ExperimentPlan {
  ScenarioConfig scenario;
  std::vector<AlgorithmConfig> algorithms;
  PlanSettings plan;

  const AlgorithmConfig& algorithm(const std::string& label) const {
    for (const auto& a : algorithms)
      if (a.label == label) return a;
    throw ConfigError("algorithms." + label + ": no such algorithm");
  }

  std::string scenario_name() const {
    std::ostringstream os;
    os << "n" << scenario.activity_count << "-os" << scenario.target_order_strength << "-r" << scenario.resource_type_count;
    return os.str();
  }
};

// ---------------------------------------------------------------------------
// Configuration

namespace detail {

// Reads optional fields from one config section and rejects unknown keys.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!it->is_number_integer()) throw ConfigError(path_ + "." + key + ": expected an integer");
      }
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.contains(it.key())) throw ConfigError(path_ + "." + it.key() + ": unknown field");
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline ScenarioConfig scenario_from_json(const Json& j) {
  ScenarioConfig c;
  Section s(j, "scenario");
  s.read("activity_count", c.activity_count);
  s.read("modes_per_activity", c.modes_per_activity);
  s.read("resource_type_count", c.resource_type_count);
  s.read("target_order_strength", c.target_order_strength);
  s.read("order_strength_tolerance", c.order_strength_tolerance);
  s.read("optimistic_multiplier", c.optimistic_multiplier);
  s.read("pessimistic_multiplier", c.pessimistic_multiplier);
  s.read("capacity_tightness", c.capacity_tightness);
  s.read("instances_per_evaluation", c.instances_per_evaluation);
  s.read("min_base_duration", c.min_base_duration);
  s.read("max_base_duration", c.max_base_duration);
  s.finish();
  c.validate();
  return c;
}

inline AlgorithmConfig algorithm_from_json(const std::string& label, const Json& j) {
  AlgorithmConfig c;
  c.label = label;
  Section s(j, "algorithms." + label);
  s.read("population_size", c.population_size);
  s.read("generations", c.generations);
  s.read("offspring_multiplier", c.offspring_multiplier);
  s.read("crossover_rate", c.crossover_rate);
  s.read("mutation_rate", c.mutation_rate);
  s.read("tournament_size", c.tournament_size);
  s.read("surrogate", c.surrogate_enabled);
  c.dedup_enabled = c.surrogate_enabled;
  s.read("dedup", c.dedup_enabled);
  s.read("elitism_count", c.elitism_count);
  s.read("dedup_retries", c.dedup_retries);
  s.read("max_depth", c.limits.max_depth);
  s.read("init_min_depth", c.limits.init_min_depth);
  s.read("init_max_depth", c.limits.init_max_depth);
  s.read("mutation_max_depth", c.limits.mutation_max_depth);
  s.finish();
  c.validate();
  return c;
}

}  // namespace detail

/// Parses a plan from its JSON form: sections "scenario", "algorithms" (keyed
/// by label) and "plan". Errors name the offending field path.
inline ExperimentPlan plan_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config: expected an object");
  ExperimentPlan p;
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "scenario" && it.key() != "algorithms" && it.key() != "plan")
      throw ConfigError(it.key() + ": unknown section");
  p.scenario = detail::scenario_from_json(j.contains("scenario") ? j.at("scenario") : Json::object());
  if (!j.contains("algorithms") || !j.at("algorithms").is_object() || j.at("algorithms").empty())
    throw ConfigError("algorithms: at least one algorithm section is required");
  for (auto it = j.at("algorithms").begin(); it != j.at("algorithms").end(); ++it)
    p.algorithms.push_back(detail::algorithm_from_json(it.key(), it.value()));

  const Json plan_json = j.contains("plan") ? j.at("plan") : Json::object();
  detail::Section s(plan_json, "plan");
  s.read("repetitions", p.plan.repetitions);
  s.read("master_seed", p.plan.master_seed);
  s.read("test_instances", p.plan.test_instances);
  s.read("test_seeds", p.plan.test_seeds);
  s.read("output_dir", p.plan.output_dir);
  s.read("baseline", p.plan.baseline);
  s.read("situations_per_kind", p.plan.situations.per_kind);
  s.read("min_candidates", p.plan.situations.min_candidates);
  s.read("group_cap", p.plan.situations.group_cap);
  s.finish();
  if (p.plan.repetitions < 1) throw ConfigError("plan.repetitions: must be positive");
  if (p.plan.test_instances < 1) throw ConfigError("plan.test_instances: must be positive");
  if (p.plan.test_seeds < 1) throw ConfigError("plan.test_seeds: must be positive");
  if (p.plan.situations.per_kind < 1) throw ConfigError("plan.situations_per_kind: must be positive");
  p.algorithm(p.plan.baseline);  // must exist
  return p;
}

inline ExperimentPlan load_plan(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  try {
    return plan_from_json(Json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

/// Canonical JSON of the settings that determine results (output location
/// excluded).
inline Json plan_to_json(const ExperimentPlan& p) {
  const auto& s = p.scenario;
  Json scenario{{"activity_count", s.activity_count},
                {"modes_per_activity", s.modes_per_activity},
                {"resource_type_count", s.resource_type_count},
                {"target_order_strength", s.target_order_strength},
                {"order_strength_tolerance", s.order_strength_tolerance},
                {"optimistic_multiplier", s.optimistic_multiplier},
                {"pessimistic_multiplier", s.pessimistic_multiplier},
                {"capacity_tightness", s.capacity_tightness},
                {"instances_per_evaluation", s.instances_per_evaluation},
                {"min_base_duration", s.min_base_duration},
                {"max_base_duration", s.max_base_duration}};
  Json algorithms = Json::object();
  for (const auto& a : p.algorithms)
    algorithms[a.label] = Json{{"population_size", a.population_size},
                               {"generations", a.generations},
                               {"offspring_multiplier", a.offspring_multiplier},
                               {"crossover_rate", a.crossover_rate},
                               {"mutation_rate", a.mutation_rate},
                               {"tournament_size", a.tournament_size},
                               {"surrogate", a.surrogate_enabled},
                               {"dedup", a.dedup_enabled},
                               {"elitism_count", a.elitism_count},
                               {"dedup_retries", a.dedup_retries},
                               {"max_depth", a.limits.max_depth},
                               {"init_min_depth", a.limits.init_min_depth},
                               {"init_max_depth", a.limits.init_max_depth},
                               {"mutation_max_depth", a.limits.mutation_max_depth}};
  Json plan{{"repetitions", p.plan.repetitions},
            {"master_seed", p.plan.master_seed},
            {"test_instances", p.plan.test_instances},
            {"test_seeds", p.plan.test_seeds},
            {"baseline", p.plan.baseline},
            {"situations_per_kind", p.plan.situations.per_kind},
            {"min_candidates", p.plan.situations.min_candidates},
            {"group_cap", p.plan.situations.group_cap}};
  return Json{{"scenario", std::move(scenario)}, {"algorithms", std::move(algorithms)}, {"plan", std::move(plan)}};
}

inline std::string plan_hash(const ExperimentPlan& p) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << hash_label(plan_to_json(p).dump());
  return os.str();
}

// ---------------------------------------------------------------------------
// Problem data

namespace seed_tag {
inline constexpr std::uint64_t kTrain = 0x747261696eULL;
inline constexpr std::uint64_t kTest = 0x74657374ULL;
inline constexpr std::uint64_t kTestSeeds = 0x7473656564ULL;
inline constexpr std::uint64_t kDurations = 0x647572ULL;
inline constexpr std::uint64_t kSituations = 0x736974ULL;
inline constexpr std::uint64_t kEvolution = 0x65766fULL;
}  // namespace seed_tag

/// Training data of one repetition, shared by every algorithm of the plan.
struct RepetitionProblem {
  InstanceSet train;
  std::uint64_t train_seed_base = 0;
  std::vector<DecisionSituation> situations;
};

inline std::vector<std::shared_ptr<const ProjectInstance>> training_instances(const ExperimentPlan& p, int rep) {
  std::vector<std::shared_ptr<const ProjectInstance>> out;
  for (int i = 0; i < p.scenario.instances_per_evaluation; ++i)
    out.push_back(std::make_shared<const ProjectInstance>(generate_instance(
        p.scenario, derive_seed(p.plan.master_seed, {seed_tag::kTrain, static_cast<std::uint64_t>(rep), static_cast<std::uint64_t>(i)}))));
  return out;
}

/// Situations come from the first training instance of the repetition.
inline std::vector<DecisionSituation> repetition_situations(const ExperimentPlan& p, int rep,
                                                            const std::vector<std::shared_ptr<const ProjectInstance>>& train) {
  const std::vector<std::shared_ptr<const ProjectInstance>> source{train.front()};
  return sample_situations(source, reference_rules(), p.plan.situations,
                           derive_seed(p.plan.master_seed, {seed_tag::kSituations, static_cast<std::uint64_t>(rep)}));
}

inline RepetitionProblem make_problem(const ExperimentPlan& p, int rep, bool with_situations = true) {
  RepetitionProblem out;
  auto train = training_instances(p, rep);
  if (with_situations) out.situations = repetition_situations(p, rep, train);
  out.train = InstanceSet::of(std::move(train));
  out.train_seed_base = derive_seed(p.plan.master_seed, {seed_tag::kDurations, static_cast<std::uint64_t>(rep)});
  return out;
}

/// Held-out instances and duration seeds, fixed for the whole plan.
struct TestSet {
  InstanceSet instances;
  std::vector<std::uint64_t> seeds;
};

inline TestSet make_test_set(const ExperimentPlan& p) {
  std::vector<std::shared_ptr<const ProjectInstance>> insts;
  for (int i = 0; i < p.plan.test_instances; ++i)
    insts.push_back(std::make_shared<const ProjectInstance>(
        generate_instance(p.scenario, derive_seed(p.plan.master_seed, {seed_tag::kTest, static_cast<std::uint64_t>(i)}))));
  std::set<std::string> test_ids;
  for (const auto& t : insts) test_ids.insert(t->id());
  for (int rep = 0; rep < p.plan.repetitions; ++rep)
    for (const auto& t : training_instances(p, rep))
      if (test_ids.contains(t->id())) throw ConfigError("plan: test instance " + t->id() + " coincides with a training instance");
  TestSet ts;
  ts.instances = InstanceSet::of(std::move(insts));
  for (int s = 0; s < p.plan.test_seeds; ++s)
    ts.seeds.push_back(derive_seed(p.plan.master_seed, {seed_tag::kTestSeeds, static_cast<std::uint64_t>(s)}));
  return ts;
}

inline AlgorithmConfig seeded(const ExperimentPlan& p, const AlgorithmConfig& a, int rep) {
  AlgorithmConfig c = a;
  c.master_seed = derive_seed(p.plan.master_seed, {seed_tag::kEvolution, hash_label(a.label), static_cast<std::uint64_t>(rep)});
  return c;
}

// ---------------------------------------------------------------------------
// CSV plumbing

namespace csv {

// Shortest text that reads back to the same double.
inline std::string num(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

inline std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double to_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw ConfigError(where + ": malformed number '" + s + "'");
  return v;
}

inline std::size_t to_size(const std::string& s, const std::string& where) {
  std::size_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw ConfigError(where + ": malformed integer '" + s + "'");
  return v;
}

}  // namespace csv

/// Writes via a sibling temporary file and renames it into place.
inline void write_atomic(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline constexpr const char* kRunHeader =
    "gen,best_train_fitness,best_test_fitness,full_evals_cumulative,wallclock_eval_s,wallclock_surrogate_s,unique_offspring,"
    "filled_duplicates";

inline GenerationRecord to_record(const GenerationStats& s) {
  return GenerationRecord{s.generation,       s.best_train_fitness,    s.best_test_fitness, s.full_evals_cumulative,
                          s.wallclock_eval_s, s.wallclock_surrogate_s, s.unique_offspring,  s.filled_duplicates};
}

inline std::string run_csv(const std::vector<GenerationRecord>& records) {
  std::ostringstream os;
  os << kRunHeader << '\n';
  for (const auto& r : records)
    os << r.generation << ',' << csv::num(r.best_train_fitness) << ',' << csv::num(r.best_test_fitness) << ','
       << r.full_evals_cumulative << ',' << csv::num(r.wallclock_eval_s) << ',' << csv::num(r.wallclock_surrogate_s) << ','
       << r.unique_offspring << ',' << r.filled_duplicates << '\n';
  return os.str();
}

inline std::vector<GenerationRecord> read_run_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open run log");
  std::string line;
  std::getline(in, line);
  if (line != kRunHeader) throw ConfigError(path.string() + ": unexpected header");
  std::vector<GenerationRecord> out;
  for (std::size_t row = 2; std::getline(in, line); ++row) {
    if (line.empty()) continue;
    const auto c = csv::split(line);
    const std::string where = path.string() + ":" + std::to_string(row);
    if (c.size() != 8) throw ConfigError(where + ": expected 8 columns");
    GenerationRecord r;
    r.generation = static_cast<int>(csv::to_size(c[0], where));
    r.best_train_fitness = csv::to_double(c[1], where);
    if (!c[2].empty()) r.best_test_fitness = csv::to_double(c[2], where);
    r.full_evals_cumulative = csv::to_size(c[3], where);
    r.wallclock_eval_s = csv::to_double(c[4], where);
    r.wallclock_surrogate_s = csv::to_double(c[5], where);
    r.unique_offspring = csv::to_size(c[6], where);
    r.filled_duplicates = csv::to_size(c[7], where);
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Running a plan

struct PlanLayout {
  fs::path root;

  fs::path manifest() const { return root / "manifest.json"; }
  fs::path run(const std::string& label, int rep) const {
    std::ostringstream name;
    name << "rep" << std::setw(3) << std::setfill('0') << rep << ".csv";
    return root / "runs" / label / name.str();
  }
  fs::path rules(const std::string& label, int rep) const {
    auto p = run(label, rep);
    p.replace_extension(".rules");
    return p;
  }
  fs::path aggregate(const std::string& label) const { return root / "aggregates" / (label + ".csv"); }
  fs::path report(const std::string& name) const { return root / "report" / name; }
};

/// Outcome of a single evolutionary run.
struct RunOutcome {
  std::vector<GenerationRecord> records;
  RulePair best;
};

/// One (algorithm, repetition) run; `threads` parallelise fitness evaluation.
inline RunOutcome execute_run(const ExperimentPlan& p, const AlgorithmConfig& algorithm, int rep, const TestSet& test,
                              std::size_t threads = 1) {
  const auto config = seeded(p, algorithm, rep);
  auto problem = make_problem(p, rep, config.needs_pc());
  Engine engine(config, std::move(problem.train), problem.train_seed_base, std::move(problem.situations), threads);
  engine.set_test_set(test.instances, test.seeds);
  RunOutcome out;
  engine.run([&](const GenerationStats& s) {
    out.records.push_back(to_record(s));
    out.best = s.best;
  });
  return out;
}

struct PlanResult {
  std::size_t executed = 0;
  std::size_t skipped = 0;
};

/// Executes every (algorithm, repetition) run not already on disk, then
/// rebuilds the per-algorithm aggregates from the run logs. Runs proceed in
/// parallel on `threads` workers. An output directory produced by a different
/// plan is refused with ResumeDivergence.
inline PlanResult run_plan(const ExperimentPlan& p, std::size_t threads = 1, std::ostream* log = nullptr) {
  const PlanLayout layout{p.plan.output_dir};
  const auto hash = plan_hash(p);
  if (fs::exists(layout.manifest())) {
    std::ifstream in(layout.manifest());
    Json m;
    try {
      m = Json::parse(in);
    } catch (const nlohmann::json::exception&) {
      throw ResumeDivergence(layout.manifest().string() + ": unreadable manifest");
    }
    const auto found = m.value("config_hash", std::string());
    if (found != hash)
      throw ResumeDivergence(layout.manifest().string() + ": output was produced by config " + found + ", current config is " + hash +
                             "; use a fresh output directory");
  } else if (fs::exists(layout.root / "runs") && !fs::is_empty(layout.root / "runs")) {
    throw ResumeDivergence(layout.root.string() + ": run logs present without a manifest");
  }
  write_atomic(layout.manifest(), Json{{"config_hash", hash}, {"config", plan_to_json(p)}}.dump(2) + "\n");

  struct Job {
    const AlgorithmConfig* algorithm;
    int rep;
  };
  std::vector<Job> jobs;
  PlanResult result;
  for (const auto& a : p.algorithms)
    for (int rep = 0; rep < p.plan.repetitions; ++rep) {
      if (fs::exists(layout.run(a.label, rep)))
        ++result.skipped;
      else
        jobs.push_back({&a, rep});
    }
  result.executed = jobs.size();

  if (!jobs.empty()) {
    const TestSet test = make_test_set(p);
    std::mutex log_mutex;
    parallel_for(jobs.size(), threads, [&](std::size_t j) {
      const auto& job = jobs[j];
      const auto outcome = execute_run(p, *job.algorithm, job.rep, test);
      write_atomic(layout.rules(job.algorithm->label, job.rep), outcome.best.to_string() + "\n");
      write_atomic(layout.run(job.algorithm->label, job.rep), run_csv(outcome.records));
      if (log) {
        std::lock_guard lock(log_mutex);
        *log << job.algorithm->label << " rep " << job.rep << ": final test fitness "
             << csv::num(outcome.records.back().best_test_fitness) << '\n';
      }
    });
  }

  // Aggregates: per generation mean and sample deviation over repetitions.
  for (const auto& a : p.algorithms) {
    std::vector<std::vector<GenerationRecord>> runs;
    for (int rep = 0; rep < p.plan.repetitions; ++rep) runs.push_back(read_run_csv(layout.run(a.label, rep)));
    std::ostringstream os;
    os << "gen,full_evals_cumulative,runs,mean_best_train_fitness,sd_best_train_fitness,mean_best_test_fitness,"
          "sd_best_test_fitness\n";
    const std::size_t gens = runs.front().size();
    for (std::size_t g = 0; g < gens; ++g) {
      std::vector<double> train, test;
      for (const auto& r : runs) {
        if (r.size() != gens) throw ConfigError(layout.run(a.label, 0).string() + ": run logs differ in length");
        train.push_back(r[g].best_train_fitness);
        if (r[g].best_test_fitness) test.push_back(*r[g].best_test_fitness);
      }
      auto mean_sd = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
        return std::make_pair(m, sd);
      };
      const auto [mt, st] = mean_sd(train);
      os << runs.front()[g].generation << ',' << runs.front()[g].full_evals_cumulative << ',' << runs.size() << ','
         << csv::num(mt) << ',' << csv::num(st);
      if (test.size() == runs.size()) {
        const auto [mv, sv] = mean_sd(test);
        os << ',' << csv::num(mv) << ',' << csv::num(sv);
      } else {
        os << ",,";
      }
      os << '\n';
    }
    write_atomic(layout.aggregate(a.label), os.str());
  }
  return result;
}

/// Run logs of every completed run of the plan, grouped by algorithm in plan
/// order and by repetition.
inline std::vector<RunLog> load_run_logs(const ExperimentPlan& p) {
  const PlanLayout layout{p.plan.output_dir};
  std::vector<RunLog> logs;
  for (const auto& a : p.algorithms)
    for (int rep = 0; rep < p.plan.repetitions; ++rep) {
      const auto path = layout.run(a.label, rep);
      if (!fs::exists(path)) throw ConfigError(path.string() + ": run missing; execute the plan first");
      logs.push_back(RunLog{p.scenario_name(), a.label, rep, read_run_csv(path)});
    }
  return logs;
}

// ---------------------------------------------------------------------------
// Report

struct FinalComparisonRow {
  std::string algorithm;
  double mean_test = 0.0;
  double sd_test = 0.0;
  std::optional<WilcoxonResult> versus_baseline;
};

inline double final_test(const RunLog& log) {
  const auto& r = log.records.back();
  if (!r.best_test_fitness) throw ConfigError(log.algorithm + " rep " + std::to_string(log.repetition) + ": no test fitness recorded");
  return *r.best_test_fitness;
}

/// Writes convergence, budget-saved, final-comparison and timing CSVs under
/// `<output_dir>/report`.
inline void write_report(const ExperimentPlan& p) {
  const PlanLayout layout{p.plan.output_dir};
  const auto logs = load_run_logs(p);
  auto runs_of = [&](const std::string& label) {
    std::vector<const RunLog*> out;
    for (const auto& l : logs)
      if (l.algorithm == label) out.push_back(&l);
    return out;
  };

  {
    std::ostringstream os;
    os << "algorithm,rep,gen,full_evals_cumulative,best_test_fitness,best_so_far_test_fitness\n";
    for (const auto& l : logs) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& r : l.records) {
        if (r.best_test_fitness) best = std::min(best, *r.best_test_fitness);
        os << l.algorithm << ',' << l.repetition << ',' << r.generation << ',' << r.full_evals_cumulative << ','
           << csv::num(r.best_test_fitness) << ',' << (r.best_test_fitness ? csv::num(best) : std::string()) << '\n';
      }
    }
    write_atomic(layout.report("convergence.csv"), os.str());
  }

  const auto base_runs = runs_of(p.plan.baseline);
  {
    std::ostringstream os;
    os << "algorithm,rep,at_evals,budget_saved_ratio\n";
    for (const auto& a : p.algorithms) {
      if (a.label == p.plan.baseline) continue;
      const auto other_runs = runs_of(a.label);
      for (std::size_t rep = 0; rep < base_runs.size(); ++rep) {
        const auto base_curve = base_runs[rep]->curve();
        const auto other_curve = other_runs[rep]->curve();
        for (const auto& pt : base_curve.points()) {
          if (!other_curve.covers(pt.evaluations)) continue;
          const auto ratio = budget_saved_ratio(base_curve, other_curve, pt.evaluations);
          os << a.label << ',' << rep << ',' << pt.evaluations << ',' << csv::num(ratio) << '\n';
        }
      }
    }
    write_atomic(layout.report("budget_saved.csv"), os.str());
  }

  {
    std::vector<double> base_final;
    for (const auto* l : base_runs) base_final.push_back(final_test(*l));
    std::ostringstream os;
    os << "algorithm,runs,mean_final_test_fitness,sd_final_test_fitness,w_plus,w_minus,z,p_value,mark\n";
    for (const auto& a : p.algorithms) {
      std::vector<double> v;
      for (const auto* l : runs_of(a.label)) v.push_back(final_test(*l));
      double m = 0.0;
      for (double x : v) m += x;
      m /= static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - m) * (x - m);
      const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
      os << a.label << ',' << v.size() << ',' << csv::num(m) << ',' << csv::num(sd);
      if (a.label != p.plan.baseline && v.size() >= 6) {
        const auto w = wilcoxon_signed_rank(v, base_final);
        os << ',' << csv::num(w.w_plus) << ',' << csv::num(w.w_minus) << ',' << csv::num(w.z) << ',' << csv::num(w.p_value) << ','
           << comparison_mark(w.flag);
      } else {
        os << ",,,,,";
      }
      os << '\n';
    }
    write_atomic(layout.report("final_comparison.csv"), os.str());
  }

  {
    std::ostringstream os;
    os << "scenario,algorithm,generations,mean_eval_s,mean_surrogate_s,surrogate_to_eval_ratio\n";
    for (const auto& row : timing_report(logs)) {
      os << row.scenario << ',' << row.algorithm << ',' << row.generations << ',' << csv::num(row.mean_eval_s) << ','
         << csv::num(row.mean_surrogate_s) << ','
         << (row.mean_eval_s > 0 ? csv::num(row.mean_surrogate_s / row.mean_eval_s) : std::string()) << '\n';
    }
    write_atomic(layout.report("timing.csv"), os.str());
  }
}

// ---------------------------------------------------------------------------
// Surrogate-quality replay

struct QualityOptions {
  std::vector<double> multipliers{1.5, 2.0, 4.0};
  bool perfect_oracle = false;  // estimates replaced by true fitness
  int generations = -1;         // -1: the baseline's configured count
};

struct QualityRow {
  int repetition = 0;
  int generation = 0;
  double multiplier = 1.0;
  double precision = 0.0;
  ExtraGain gain;
};

/// Replays the baseline algorithm while generating round(k_max * |P|)
/// offspring per generation and fully evaluating all of them under the next
/// generation's seeds. For each multiplier k, the first round(k * |P|)
/// offspring form the pool: precision compares the surrogate's top |P| with
/// the true top |P|, and the extra-offspring gain classifies the selected
/// offspring beyond the first |P|. The population advances exactly as the
/// baseline does, from the first |P| offspring.
inline std::vector<QualityRow> surrogate_quality(const ExperimentPlan& p, int rep, const QualityOptions& options,
                                                 std::size_t threads = 1, Population* final_population = nullptr) {
  AlgorithmConfig config = seeded(p, p.algorithm(p.plan.baseline), rep);
  if (options.generations >= 0) config.generations = options.generations;
  config.surrogate_enabled = false;
  config.dedup_enabled = false;
  auto problem = make_problem(p, rep, true);
  const auto train = problem.train;
  Engine engine(config, std::move(problem.train), problem.train_seed_base, std::move(problem.situations), threads);
  const auto n = static_cast<std::size_t>(config.population_size);
  double k_max = 1.0;
  for (double k : options.multipliers) {
    if (!(k >= 1.0)) throw ConfigError("analysis.multipliers: each k must be >= 1");
    k_max = std::max(k_max, k);
  }
  const auto total = static_cast<std::size_t>(std::llround(k_max * static_cast<double>(n)));

  std::vector<QualityRow> rows;
  Population pop = engine.initialize();
  for (int g = 1; g <= config.generations; ++g) {
    Rng rng(breeding_seed(config, g));
    auto offspring = breed(pop, total, config, rng);
    const auto seeds = generation_seeds(problem.train_seed_base, g, train.size());
    std::vector<double> truth(offspring.size()), est(offspring.size());
    parallel_for(offspring.size(), threads, [&](std::size_t i) { truth[i] = full_fitness(offspring[i].rules, train, seeds); });
    if (options.perfect_oracle) {
      est = truth;
    } else {
      const auto db = engine.database_of(pop);
      parallel_for(offspring.size(), threads, [&](std::size_t i) { est[i] = db.estimate(engine.pc_of(offspring[i].rules)); });
    }
    for (double k : options.multipliers) {
      const auto pool = std::min(offspring.size(), static_cast<std::size_t>(std::llround(k * static_cast<double>(n))));
      const std::span<const double> e(est.data(), pool), t(truth.data(), pool);
      std::vector<ScoredOffspring> scored;
      for (std::size_t i = 0; i < pool; ++i) scored.push_back({est[i], truth[i]});
      const std::span<const ScoredOffspring> all(scored);
      rows.push_back(QualityRow{rep, g, k, precision_at(e, t, std::min(n, pool)),
                                extra_offspring_gain(all.first(std::min(n, pool)), all.subspan(std::min(n, pool)), n)});
    }

    // Baseline transition: elites re-evaluated plus the first |P| offspring.
    std::vector<Individual> next;
    for (auto i : Engine::best_indices(pop, static_cast<std::size_t>(config.elitism_count))) {
      Individual e = pop.members[i];
      e.fitness = full_fitness(e.rules, train, seeds);
      next.push_back(std::move(e));
    }
    for (std::size_t i = 0; i < n; ++i) {
      offspring[i].fitness = truth[i];
      next.push_back(std::move(offspring[i]));
    }
    std::stable_sort(next.begin(), next.end(), [](const Individual& a, const Individual& b) { return *a.fitness < *b.fitness; });
    next.resize(n);
    pop.members = std::move(next);
    pop.generation = g;
    pop.evaluation_seeds = seeds;
  }
  if (final_population) *final_population = std::move(pop);
  return rows;
}

inline std::string quality_csv(const std::vector<QualityRow>& rows, bool perfect_oracle) {
  std::ostringstream os;
  os << "estimator,multiplier,rep,gen,precision,correctly_added,incorrectly_added\n";
  for (const auto& r : rows)
    os << (perfect_oracle ? "oracle" : "surrogate") << ',' << csv::num(r.multiplier) << ',' << r.repetition << ','
       << r.generation << ',' << csv::num(r.precision) << ',' << r.gain.correctly_added << ',' << r.gain.incorrectly_added << '\n';
  return os.str();
}

}  // namespace skgp
