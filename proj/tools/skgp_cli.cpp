// skgp: instance generation, situation sampling, evolution runs and analyses.

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "skgp/skgp.hpp"

using namespace skgp;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t threads = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Override plan.master_seed");
  cmd->add_option("--out", c.out, "Override plan.output_dir");
  cmd->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
}

ExperimentPlan plan_of(const Common& c) {
  auto plan = load_plan(c.config);
  if (c.seed) plan.plan.master_seed = *c.seed;
  if (!c.out.empty()) plan.plan.output_dir = c.out;
  return plan;
}

int cmd_generate(const Common& c, int rep) {
  const auto plan = plan_of(c);
  const fs::path dir = fs::path(plan.plan.output_dir) / "instances";
  const auto train = training_instances(plan, rep);
  for (const auto& inst : train) {
    write_atomic(dir / (inst->id() + ".json"), to_json(*inst).dump(2) + "\n");
    std::cout << inst->id() << "  OS " << compute_order_strength(*inst) << "  LB " << lower_bound(*inst) << '\n';
  }
  return 0;
}

int cmd_sample(const Common& c, int rep) {
  const auto plan = plan_of(c);
  const auto train = training_instances(plan, rep);
  const auto situations = repetition_situations(plan, rep, train);
  const fs::path path = fs::path(plan.plan.output_dir) / ("situations_rep" + std::to_string(rep) + ".json");
  write_atomic(path, situations_to_json(situations).dump(1) + "\n");
  std::cout << situations.size() << " situations written to " << path.string() << '\n';
  return 0;
}

int cmd_evolve(const Common& c) {
  const auto plan = plan_of(c);
  const auto r = run_plan(plan, c.threads, &std::cout);
  std::cout << r.executed << " runs executed, " << r.skipped << " already complete\n";
  return 0;
}

int cmd_analyze(const Common& c, const std::string& analysis, const std::vector<double>& ks, bool oracle, int reps, int gens) {
  const auto plan = plan_of(c);
  if (analysis != "surrogate-quality") throw ConfigError("--analysis: unknown analysis '" + analysis + "'");
  QualityOptions o;
  o.multipliers = ks;
  o.perfect_oracle = oracle;
  o.generations = gens;
  const int count = reps > 0 ? reps : plan.plan.repetitions;
  std::vector<QualityRow> rows;
  for (int rep = 0; rep < count; ++rep) {
    auto part = surrogate_quality(plan, rep, o, c.threads);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const fs::path path = fs::path(plan.plan.output_dir) / "analysis" / (oracle ? "quality_oracle.csv" : "quality.csv");
  write_atomic(path, quality_csv(rows, oracle));
  std::cout << rows.size() << " rows written to " << path.string() << '\n';
  return 0;
}

int cmd_report(const Common& c) {
  const auto plan = plan_of(c);
  write_report(plan);
  std::cout << "report written to " << (fs::path(plan.plan.output_dir) / "report").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surrogate-assisted GP for dynamic multi-mode project scheduling"};
  app.require_subcommand(1);

  Common common;
  int rep = 0;
  std::string analysis = "surrogate-quality";
  std::vector<double> ks{1.5, 2.0, 4.0};
  bool oracle = false;
  int analysis_reps = 0, analysis_gens = -1;

  auto* gen = app.add_subcommand("generate", "Write the training instances of one repetition");
  add_common(gen, common);
  gen->add_option("--rep", rep, "Repetition index");

  auto* sample = app.add_subcommand("sample-situations", "Write the decision situation bundle of one repetition");
  add_common(sample, common);
  sample->add_option("--rep", rep, "Repetition index");

  auto* evolve = app.add_subcommand("evolve", "Execute (or resume) every run of the plan");
  add_common(evolve, common);

  auto* analyze = app.add_subcommand("analyze", "Instrumented analyses");
  add_common(analyze, common);
  analyze->add_option("--analysis", analysis, "Analysis to run (surrogate-quality)");
  analyze->add_option("--multipliers", ks, "Offspring multipliers compared");
  analyze->add_flag("--oracle", oracle, "Substitute true fitness for the surrogate");
  analyze->add_option("--reps", analysis_reps, "Repetitions (default: plan.repetitions)");
  analyze->add_option("--generations", analysis_gens, "Generations replayed (default: baseline's)");

  auto* report = app.add_subcommand("report", "Write convergence, budget, comparison and timing CSVs");
  add_common(report, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_generate(common, rep);
    if (*sample) return cmd_sample(common, rep);
    if (*evolve) return cmd_evolve(common);
    if (*analyze) return cmd_analyze(common, analysis, ks, oracle, analysis_reps, analysis_gens);
    if (*report) return cmd_report(common);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ResumeDivergence& e) {
    std::cerr << "resume divergence: " << e.what() << '\n';
    return 3;
  } catch (const SamplingError& e) {
    std::cerr << "sampling failure: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
