// arfal: falsification testing of dynamical models, with or without a
// system-identification surrogate in the loop.
//
// Subcommands: falsify, aristeo, campaign, sweep, replay, report.
#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "arfal/campaign.hpp"
#include "arfal/json_io.hpp"

namespace fs = std::filesystem;
using namespace arfal;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string model_id;
  std::string stl_text;
  std::string strategy;
  std::string structure;
  std::string orders;
  std::string out_dir;
  std::string mode;
  int max = 0;
  int max_ref = 0;
  int reps = 0;
  int parallel = 0;
  int cost_factor = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool full_scale = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f, bool with_campaign_flags) {
  cmd->add_option("--config", f.config_path, "experiment config file (JSON)");
  cmd->add_option("--model", f.model_id, "benchmark id (heat2r|autotrans|fuelctl|satlite)");
  cmd->add_option("--stl", f.stl_text, "requirement in STL (time suffixes h/min/s/ms allowed)");
  cmd->add_option("--strategy", f.strategy, "search strategy: uniform|hill|anneal");
  cmd->add_option("--structure", f.structure, "surrogate structure: arx|armax|bj|ss");
  cmd->add_option("--orders", f.orders, "comma-separated structure orders, e.g. 2,2,1");
  cmd->add_option("--max", f.max, "falsification budget (model executions per search)");
  cmd->add_option("--max-ref", f.max_ref, "refinement budget (outer iterations)");
  cmd->add_option("--seed", f.seed, "base random seed")->each([&f](const std::string&) { f.seed_set = true; });
  cmd->add_option("--out", f.out_dir, "output directory");
  cmd->add_option("--cost-factor", f.cost_factor, "re-execute the model N times per call (cost emulation)");
  cmd->add_flag("--full-scale", f.full_scale, "satlite: 24h horizon at 0.0312s");
  if (with_campaign_flags) {
    cmd->add_option("--mode", f.mode, "baseline|surrogate");
    cmd->add_option("--reps", f.reps, "repetitions");
    cmd->add_option("--parallel", f.parallel, "concurrent repetitions");
  }
}

std::vector<int> parse_orders(const std::string& text) {
  std::vector<int> orders;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) orders.push_back(std::stoi(cell));
  return orders;
}

cli::ExperimentConfig merge(const CommonFlags& f, cli::Mode default_mode) {
  cli::ExperimentConfig c;
  if (!f.config_path.empty()) c = cli::load_config(f.config_path);
  if (!f.model_id.empty()) c.model_id = f.model_id;
  if (!f.stl_text.empty()) c.stl_text = f.stl_text;
  if (!f.strategy.empty()) c.strategy = search::strategy_from_string(f.strategy);
  if (!f.structure.empty() || !f.orders.empty()) {
    if (f.structure.empty() || f.orders.empty()) {
      throw ConfigError("--structure and --orders must be given together");
    }
    c.structure = sysid::make_structure(f.structure, parse_orders(f.orders));
  }
  if (f.max > 0) c.max_executions = f.max;
  if (f.max_ref > 0) c.max_refinements = f.max_ref;
  if (f.reps > 0) c.repetitions = f.reps;
  if (f.parallel > 0) c.parallel = f.parallel;
  if (f.cost_factor > 0) c.cost_factor = f.cost_factor;
  if (f.seed_set) c.base_seed = f.seed;
  if (!f.out_dir.empty()) c.out_dir = f.out_dir;
  if (f.full_scale) c.full_scale = true;
  if (!f.mode.empty()) {
    c.mode = cli::mode_from_string(f.mode);
  } else if (f.config_path.empty()) {
    c.mode = default_mode;
  }
  if (c.model_id.empty()) throw ConfigError("a model is required (--model or --config)");
  return c;
}

void ensure_out(cli::ExperimentConfig& c, const char* fallback) {
  if (c.out_dir.empty()) c.out_dir = fallback;
  fs::create_directories(c.out_dir);
}

// Executed trace (inputs then outputs) in the signals CSV format.
void write_trace_csv(const fs::path& path, const mut::ExecutableModel& model,
                     const search::CandidateTest& candidate) {
  const auto output = model.execute(candidate.rendered);
  signals::SignalSet merged(candidate.rendered.domain());
  for (Eigen::Index i = 0; i < candidate.rendered.size(); ++i) merged.add(candidate.rendered.at(i));
  for (Eigen::Index i = 0; i < output.size(); ++i) merged.add(output.at(i));
  std::ofstream f(path);
  signals::write_csv(f, merged);
}

int cmd_falsify(const CommonFlags& flags) {
  cli::ExperimentConfig config = merge(flags, cli::Mode::Baseline);
  config.mode = cli::Mode::Baseline;
  ensure_out(config, "out/falsify");
  const cli::ResolvedExperiment r = cli::resolve(config);

  const search::FalsificationConfig fc{r.max_executions, *config.strategy, config.base_seed};
  const auto result = search::falsify(*r.model, r.profile, *r.formula, fc);

  {
    std::ofstream hist(config.out_dir / fs::path("history_seed" + std::to_string(config.base_seed) + ".csv"));
    hist << "iteration,objective\n";
    for (std::size_t i = 0; i < result.objective_history.size(); ++i) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", result.objective_history[i]);
      hist << (i + 1) << ',' << buf << '\n';
    }
  }
  std::printf("model: %s\nrequirement: %s\nexecutions: %d/%d\nbest objective: %.10g\n", r.model->id().c_str(),
              r.stl_text.c_str(), result.executions_used, r.max_executions, result.best_objective);
  if (result.falsified) {
    const fs::path failing = config.out_dir / ("failing_input_seed" + std::to_string(config.base_seed) + ".json");
    std::ofstream(failing) << io::to_json(result.best_input).dump(2) << '\n';
    const fs::path trace = config.out_dir / ("failing_trace_seed" + std::to_string(config.base_seed) + ".csv");
    write_trace_csv(trace, *r.model, result.best_input);
    std::printf("outcome: %s\nfailing input: %s\nfailing trace: %s\n",
                result.best_objective < 0.0 ? "violation" : "boundary", failing.string().c_str(),
                trace.string().c_str());
  } else {
    std::printf("outcome: no violation found\n");
  }
  return 0;
}

int cmd_aristeo(const CommonFlags& flags) {
  cli::ExperimentConfig config = merge(flags, cli::Mode::Surrogate);
  config.mode = cli::Mode::Surrogate;
  ensure_out(config, "out/aristeo");
  const cli::ResolvedExperiment r = cli::resolve(config);

  aristeo::AristeoConfig ac;
  ac.max_refinements = r.max_refinements;
  ac.structure = *config.structure;
  ac.inner = search::FalsificationConfig{r.max_executions, *config.strategy, config.base_seed};
  Rng rng(config.base_seed);
  const auto report = aristeo::run(*r.model, r.profile, *r.formula, ac, rng);

  const std::string tag = std::to_string(config.base_seed);
  {
    std::ofstream log(config.out_dir / fs::path("iterations_seed" + tag + ".csv"));
    log << "iter,surrogate_obj,mut_obj,train_mse,falsified\n";
    int i = 1;
    for (const auto& it : report.iterations) {
      char b1[40], b2[40], b3[40];
      std::snprintf(b1, sizeof(b1), "%.17g", it.surrogate_objective);
      std::snprintf(b2, sizeof(b2), "%.17g", it.mut_objective);
      std::snprintf(b3, sizeof(b3), "%.17g", it.train_mse);
      log << i++ << ',' << b1 << ',' << b2 << ',' << b3 << ',' << (it.surrogate_falsified ? 1 : 0) << '\n';
    }
  }
  std::ofstream(config.out_dir / fs::path("report_seed" + tag + ".json")) << io::to_json(report).dump(2) << '\n';
  if (report.final_surrogate.has_value()) {
    std::ofstream(config.out_dir / fs::path("surrogate_seed" + tag + ".json"))
        << io::to_json(*report.final_surrogate).dump(2) << '\n';
  }

  std::printf("model: %s\nrequirement: %s\nstructure: %s\nmut executions: %d\nrefinements: %d\n",
              r.model->id().c_str(), r.stl_text.c_str(), sysid::to_string(ac.structure).c_str(),
              report.mut_executions, report.refinements_performed);
  if (report.outcome == aristeo::Outcome::ViolationFound) {
    const fs::path failing = config.out_dir / ("failing_input_seed" + tag + ".json");
    std::ofstream(failing) << io::to_json(*report.failing_input).dump(2) << '\n';
    const fs::path trace = config.out_dir / ("failing_trace_seed" + tag + ".csv");
    write_trace_csv(trace, *r.model, *report.failing_input);
    std::printf("outcome: violation found\nfailing input: %s\nfailing trace: %s\n", failing.string().c_str(),
                trace.string().c_str());
  } else {
    std::printf("outcome: budget exhausted\n");
  }
  return 0;
}

int cmd_campaign(const CommonFlags& flags) {
  cli::ExperimentConfig config = merge(flags, cli::Mode::Baseline);
  ensure_out(config, "out/campaign");
  const auto report = cli::run_campaign(config);
  std::printf("campaign finished: %zu rows -> %s\n", report.rows.size(),
              (config.out_dir / "campaign.csv").string().c_str());
  std::printf("effectiveness: %.3f\n", report.effectiveness());
  return 0;
}

int cmd_sweep(const CommonFlags& flags) {
  if (flags.config_path.empty()) throw ConfigError("sweep requires --config with base + configurations");
  std::ifstream in(flags.config_path);
  if (!in) throw ConfigError("cannot open " + flags.config_path);
  io::json j = io::json::parse(in, nullptr, true, true);

  cli::ExperimentConfig base = cli::config_from_json_text(j.at("base").dump());
  base.mode = cli::Mode::Surrogate;
  if (!flags.out_dir.empty()) base.out_dir = flags.out_dir;
  if (flags.reps > 0) base.repetitions = flags.reps;
  if (base.out_dir.empty()) base.out_dir = "out/sweep";

  std::vector<cli::ExperimentConfig> configs;
  for (const auto& spec : j.at("configurations")) {
    cli::ExperimentConfig c = base;
    c.structure = sysid::make_structure(spec.at("name").get<std::string>(), spec.at("orders").get<std::vector<int>>());
    c.out_dir = base.out_dir / fs::path(sysid::to_string(*c.structure));
    configs.push_back(std::move(c));
  }

  const auto rows = cli::sweep(configs);
  fs::create_directories(base.out_dir);
  {
    std::ofstream csv(base.out_dir / "sweep.csv");
    cli::write_sweep_csv(csv, rows);
  }
  std::printf("%-16s %14s %16s %7s\n", "configuration", "effectiveness", "mean_iterations", "pareto");
  for (const auto& row : rows) {
    std::printf("%-16s %14.3f %16.3f %7s\n", row.label.c_str(), row.effectiveness, row.mean_iterations,
                row.pareto ? "*" : "");
  }
  std::printf("sweep table: %s\n", (base.out_dir / "sweep.csv").string().c_str());
  return 0;
}

int cmd_replay(const CommonFlags& flags) {
  cli::ExperimentConfig config = merge(flags, cli::Mode::Baseline);
  if (!flags.seed_set) throw ConfigError("replay requires --seed (the row's recorded seed)");
  ensure_out(config, "out/replay");
  const auto row = cli::replay(config, flags.seed);
  std::printf("%s\n%s\n", cli::kCampaignCsvHeader, row.to_csv().c_str());
  return 0;
}

int cmd_report(const std::string& dir) {
  return cli::report(dir, std::cout) == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"falsification testing with surrogate-assisted approximation refinement"};
  app.require_subcommand(1);

  CommonFlags falsify_flags, aristeo_flags, campaign_flags, sweep_flags, replay_flags;
  std::string report_dir;

  add_common_flags(app.add_subcommand("falsify", "baseline falsification of a model"), falsify_flags, false);
  add_common_flags(app.add_subcommand("aristeo", "surrogate-assisted approximation-refinement run"), aristeo_flags,
                   false);
  add_common_flags(app.add_subcommand("campaign", "repeated-seed campaign"), campaign_flags, true);
  auto* sweep_cmd = app.add_subcommand("sweep", "configuration sweep over surrogate structures");
  add_common_flags(sweep_cmd, sweep_flags, true);
  add_common_flags(app.add_subcommand("replay", "re-run one campaign row by seed"), replay_flags, true);
  app.add_subcommand("report", "summarize a campaign directory")
      ->add_option("--dir", report_dir, "campaign output directory")
      ->required();

  try {
    app.parse(argc, argv);
    if (app.got_subcommand("falsify")) return cmd_falsify(falsify_flags);
    if (app.got_subcommand("aristeo")) return cmd_aristeo(aristeo_flags);
    if (app.got_subcommand("campaign")) return cmd_campaign(campaign_flags);
    if (app.got_subcommand("sweep")) return cmd_sweep(sweep_flags);
    if (app.got_subcommand("replay")) return cmd_replay(replay_flags);
    return cmd_report(report_dir);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const StructuralError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const Error& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 2;
  }
}
