#include "arfal/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "arfal/json_io.hpp"

namespace arfal::cli {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(Mode mode) { return mode == Mode::Baseline ? "baseline" : "surrogate"; }

Mode mode_from_string(const std::string& s) {
  if (s == "baseline") return Mode::Baseline;
  if (s == "surrogate") return Mode::Surrogate;
  throw ConfigError("unknown mode '" + s + "' (use baseline|surrogate)");
}

// ---------------------------------------------------------------------------
// Config IO

ExperimentConfig config_from_json_text(const std::string& text) {
  io::json j;
  try {
    j = io::json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig c;
  try {
    c.model_id = j.at("model").get<std::string>();
    if (j.contains("full_scale")) c.full_scale = j.at("full_scale").get<bool>();
    if (j.contains("profile")) c.profile = io::profile_from_json(j.at("profile"));
    if (j.contains("stl")) c.stl_text = j.at("stl").get<std::string>();
    if (j.contains("mode")) c.mode = mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("structure")) {
      const auto& s = j.at("structure");
      c.structure = sysid::make_structure(s.at("name").get<std::string>(), s.at("orders").get<std::vector<int>>());
    }
    if (j.contains("strategy")) c.strategy = io::strategy_from_json(j.at("strategy"));
    if (j.contains("max")) c.max_executions = j.at("max").get<int>();
    if (j.contains("max_ref")) c.max_refinements = j.at("max_ref").get<int>();
    if (j.contains("repetitions")) c.repetitions = j.at("repetitions").get<int>();
    if (j.contains("seed")) c.base_seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
    if (j.contains("parallel")) c.parallel = j.at("parallel").get<int>();
    if (j.contains("cost_factor")) c.cost_factor = j.at("cost_factor").get<int>();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.repetitions < 1) throw ConfigError("config: repetitions must be >= 1");
  if (c.parallel < 1) throw ConfigError("config: parallel must be >= 1");
  if (c.cost_factor < 1) throw ConfigError("config: cost_factor must be >= 1");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return config_from_json_text(buffer.str());
}

std::string config_to_json_text(const ExperimentConfig& config) {
  io::json j{{"model", config.model_id}, {"mode", to_string(config.mode)}};
  if (config.full_scale) j["full_scale"] = true;
  if (config.profile.has_value()) j["profile"] = io::to_json(*config.profile);
  if (!config.stl_text.empty()) j["stl"] = config.stl_text;
  if (config.structure.has_value()) {
    j["structure"] = io::json{{"name", sysid::structure_name(*config.structure)},
                              {"orders", sysid::structure_orders(*config.structure)}};
  }
  if (config.strategy.has_value()) j["strategy"] = io::to_json(*config.strategy);
  if (config.max_executions > 0) j["max"] = config.max_executions;
  if (config.max_refinements > 0) j["max_ref"] = config.max_refinements;
  j["repetitions"] = config.repetitions;
  j["seed"] = config.base_seed;
  if (!config.out_dir.empty()) j["out"] = config.out_dir.string();
  if (config.parallel > 1) j["parallel"] = config.parallel;
  if (config.cost_factor > 1) j["cost_factor"] = config.cost_factor;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Resolution

ResolvedExperiment resolve(const ExperimentConfig& config) {
  mut::Benchmark bench = mut::make_benchmark(config.model_id, config.full_scale);
  std::shared_ptr<const mut::ExecutableModel> model =
      config.cost_factor > 1 ? std::make_shared<mut::CostWrapper>(bench.model, config.cost_factor) : bench.model;
  std::string stl_text = config.stl_text.empty() ? bench.requirement : config.stl_text;
  stl::FormulaPtr formula = stl::parse_stl(io::normalize_time_suffixes(stl_text), model->output_names());

  if (!config.strategy.has_value()) {
    throw ConfigError("no search strategy selected; experiment runs require an explicit --strategy");
  }
  if (config.mode == Mode::Surrogate && !config.structure.has_value()) {
    throw ConfigError("surrogate mode requires a model structure (--structure/--orders)");
  }
  return ResolvedExperiment{std::move(model),
                            config.profile.has_value() ? *config.profile : bench.profile,
                            std::move(formula),
                            std::move(stl_text),
                            config.max_executions > 0 ? config.max_executions : bench.default_max,
                            config.max_refinements > 0 ? config.max_refinements : bench.default_max_ref};
}

// ---------------------------------------------------------------------------
// Rows

const char* const kCampaignCsvHeader = "seed,mode,outcome,best_objective,mut_executions,iterations,wall_ms";

std::string CampaignRow::to_csv() const {
  std::ostringstream os;
  os << seed << ',' << cli::to_string(mode) << ',' << outcome << ',' << fmt_double(best_objective) << ','
     << mut_executions << ',' << iterations << ',' << wall_ms;
  return os.str();
}

CampaignRow row_from_csv(const std::string& line) {
  std::stringstream ss(line);
  std::string cell;
  std::vector<std::string> cells;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (cells.size() != 7) throw StructuralError("campaign row: expected 7 cells, got " + std::to_string(cells.size()));
  CampaignRow row;
  row.seed = std::stoull(cells[0]);
  row.mode = mode_from_string(cells[1]);
  row.outcome = cells[2];
  row.best_objective = std::stod(cells[3]);
  row.mut_executions = std::stoi(cells[4]);
  row.iterations = std::stoi(cells[5]);
  row.wall_ms = std::stoll(cells[6]);
  return row;
}

double CampaignReport::effectiveness() const {
  if (rows.empty()) return 0.0;
  Eigen::Index hits = 0;
  for (const auto& r : rows) hits += r.reveals_violation() ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(rows.size());
}

double CampaignReport::median_executions(int censor_at) const {
  if (rows.empty()) return 0.0;
  std::vector<double> xs;
  xs.reserve(rows.size());
  for (const auto& r : rows) {
    xs.push_back(r.reveals_violation() ? static_cast<double>(r.mut_executions) : static_cast<double>(censor_at));
  }
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// ---------------------------------------------------------------------------
// Single repetitions

namespace {

struct SingleOutcome {
  CampaignRow row;
  std::optional<search::FalsificationResult> baseline;
  std::optional<aristeo::AristeoReport> surrogate;
};

SingleOutcome run_one(const ExperimentConfig& config, const ResolvedExperiment& r, std::uint64_t seed) {
  SingleOutcome out;
  out.row.seed = seed;
  out.row.mode = config.mode;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (config.mode == Mode::Baseline) {
      search::FalsificationConfig fc{r.max_executions, *config.strategy, seed};
      search::FalsificationResult result = search::falsify(*r.model, r.profile, *r.formula, fc);
      out.row.outcome = result.falsified ? (result.best_objective < 0.0 ? "violation" : "boundary") : "exhausted";
      out.row.best_objective = result.best_objective;
      out.row.mut_executions = result.executions_used;
      out.row.iterations = result.executions_used;
      out.baseline = std::move(result);
    } else {
      aristeo::AristeoConfig ac;
      ac.max_refinements = r.max_refinements;
      ac.structure = *config.structure;
      ac.inner = search::FalsificationConfig{r.max_executions, *config.strategy, seed};
      Rng rng(seed);
      aristeo::AristeoReport report = aristeo::run(*r.model, r.profile, *r.formula, ac, rng);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& it : report.iterations) best = std::min(best, it.mut_objective);
      out.row.outcome = report.outcome == aristeo::Outcome::ViolationFound
                            ? (best < 0.0 ? "violation" : "boundary")
                            : "exhausted";
      out.row.best_objective = best;
      out.row.mut_executions = report.mut_executions;
      out.row.iterations = static_cast<int>(report.iterations.size());
      out.surrogate = std::move(report);
    }
  } catch (const Error& e) {
    out.row.outcome = "error";
    out.row.best_objective = std::nan("");
    out.row.mut_executions = 0;
    out.row.iterations = 0;
    (void)e;
  }
  out.row.wall_ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

void write_failing_input(const std::filesystem::path& dir, const SingleOutcome& out) {
  if (!out.row.reveals_violation()) return;
  const search::CandidateTest* failing = nullptr;
  if (out.baseline.has_value()) failing = &out.baseline->best_input;
  if (out.surrogate.has_value() && out.surrogate->failing_input.has_value()) {
    failing = &*out.surrogate->failing_input;
  }
  if (failing == nullptr) return;
  std::ofstream f(dir / ("failing_input_seed" + std::to_string(out.row.seed) + ".json"));
  f << io::to_json(*failing).dump(2) << '\n';
}

void write_history(const std::filesystem::path& dir, const SingleOutcome& out) {
  if (out.baseline.has_value()) {
    std::ofstream f(dir / ("history_seed" + std::to_string(out.row.seed) + ".csv"));
    f << "iteration,objective\n";
    for (std::size_t i = 0; i < out.baseline->objective_history.size(); ++i) {
      f << (i + 1) << ',' << fmt_double(out.baseline->objective_history[i]) << '\n';
    }
  }
  if (out.surrogate.has_value()) {
    std::ofstream f(dir / ("iterations_seed" + std::to_string(out.row.seed) + ".csv"));
    f << "iter,surrogate_obj,mut_obj,train_mse,falsified\n";
    int i = 1;
    for (const auto& it : out.surrogate->iterations) {
      f << i++ << ',' << fmt_double(it.surrogate_objective) << ',' << fmt_double(it.mut_objective) << ','
        << fmt_double(it.train_mse) << ',' << (it.surrogate_falsified ? 1 : 0) << '\n';
    }
  }
}

}  // namespace

CampaignReport run_campaign(const ExperimentConfig& config) { return run_campaign(config, resolve(config)); }

CampaignReport run_campaign(const ExperimentConfig& config, const ResolvedExperiment& r) {
  if (config.out_dir.empty()) throw ConfigError("campaign: an output directory is required");
  std::filesystem::create_directories(config.out_dir);

  // rows.csv gets one flushed line per finished repetition (crash-safe);
  // campaign.csv is rewritten in repetition order once everything finished.
  std::ofstream rows_out(config.out_dir / "rows.csv", std::ios::trunc);
  if (!rows_out) throw ConfigError("campaign: cannot write to " + config.out_dir.string());
  rows_out << kCampaignCsvHeader << '\n';
  rows_out.flush();

  const int reps = config.repetitions;
  std::vector<CampaignRow> rows(static_cast<std::size_t>(reps));
  std::mutex io_mutex;
  std::atomic<int> next{0};

  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= reps) return;
      const std::uint64_t seed = config.base_seed + static_cast<std::uint64_t>(i);
      SingleOutcome out = run_one(config, r, seed);
      {
        std::lock_guard<std::mutex> lock(io_mutex);
        rows_out << out.row.to_csv() << '\n';
        rows_out.flush();
        write_failing_input(config.out_dir, out);
      }
      rows[static_cast<std::size_t>(i)] = std::move(out.row);
    }
  };

  const int threads = std::min(config.parallel, reps);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::ofstream ordered(config.out_dir / "campaign.csv", std::ios::trunc);
  ordered << kCampaignCsvHeader << '\n';
  for (const auto& row : rows) ordered << row.to_csv() << '\n';

  {
    std::ofstream cfg(config.out_dir / "config.json", std::ios::trunc);
    cfg << config_to_json_text(config) << '\n';
  }

  CampaignReport report;
  report.rows = std::move(rows);
  return report;
}

CampaignRow replay(const ExperimentConfig& config, std::uint64_t seed) {
  const ResolvedExperiment r = resolve(config);
  SingleOutcome out = run_one(config, r, seed);
  if (!config.out_dir.empty()) {
    const auto dir = config.out_dir / "replay";
    std::filesystem::create_directories(dir);
    std::ofstream row_file(dir / ("row_seed" + std::to_string(seed) + ".csv"));
    row_file << kCampaignCsvHeader << '\n' << out.row.to_csv() << '\n';
    write_failing_input(dir, out);
    write_history(dir, out);
  }
  return out.row;
}

// ---------------------------------------------------------------------------
// Sweep

std::vector<bool> pareto_frontier(const std::vector<SweepRow>& rows) {
  std::vector<bool> front(rows.size(), false);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < rows.size() && !dominated; ++j) {
      if (i == j) continue;
      const bool no_worse = rows[j].effectiveness >= rows[i].effectiveness &&
                            rows[j].mean_iterations <= rows[i].mean_iterations;
      const bool strictly_better = rows[j].effectiveness > rows[i].effectiveness ||
                                   rows[j].mean_iterations < rows[i].mean_iterations;
      dominated = no_worse && strictly_better;
    }
    front[i] = !dominated;
  }
  return front;
}

std::vector<SweepRow> sweep(const std::vector<ExperimentConfig>& configs) {
  if (configs.empty()) throw ConfigError("sweep: no configurations");
  std::vector<SweepRow> rows;
  rows.reserve(configs.size());
  for (const auto& config : configs) {
    if (!config.structure.has_value()) throw ConfigError("sweep: every configuration needs a structure");
    const ResolvedExperiment r = resolve(config);
    const CampaignReport report = run_campaign(config);
    SweepRow row;
    row.label = sysid::to_string(*config.structure);
    row.structure = *config.structure;
    row.effectiveness = report.effectiveness();
    double iter_sum = 0.0;
    for (const auto& cr : report.rows) {
      iter_sum += cr.reveals_violation() ? static_cast<double>(cr.iterations)
                                         : static_cast<double>(r.max_refinements);
    }
    row.mean_iterations = report.rows.empty() ? 0.0 : iter_sum / static_cast<double>(report.rows.size());
    rows.push_back(std::move(row));
  }
  const auto front = pareto_frontier(rows);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].pareto = front[i];
  return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "label,effectiveness,mean_iterations,pareto\n";
  for (const auto& row : rows) {
    os << row.label << ',' << fmt_double(row.effectiveness) << ',' << fmt_double(row.mean_iterations) << ','
       << (row.pareto ? 1 : 0) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Report

int report(const std::filesystem::path& dir, std::ostream& os) {
  std::filesystem::path table = dir / "campaign.csv";
  if (!std::filesystem::exists(table)) table = dir / "rows.csv";
  if (!std::filesystem::exists(table)) {
    os << "no runs found in " << dir.string() << "\n";
    return 1;
  }
  std::ifstream in(table);
  std::string line;
  std::getline(in, line);  // header
  CampaignReport rep;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rep.rows.push_back(row_from_csv(line));
  }
  if (rep.rows.empty()) {
    os << "no runs found in " << dir.string() << "\n";
    return 1;
  }

  int violations = 0, boundary = 0, errors = 0;
  std::int64_t wall_total = 0;
  for (const auto& row : rep.rows) {
    violations += row.outcome == "violation" ? 1 : 0;
    boundary += row.outcome == "boundary" ? 1 : 0;
    errors += row.outcome == "error" ? 1 : 0;
    wall_total += row.wall_ms;
  }
  std::vector<double> to_violation;
  for (const auto& row : rep.rows) {
    if (row.reveals_violation()) to_violation.push_back(static_cast<double>(row.mut_executions));
  }
  std::sort(to_violation.begin(), to_violation.end());
  os << "rows: " << rep.rows.size() << "\n";
  os << "violations: " << violations << " (+" << boundary << " boundary)\n";
  os << "errors: " << errors << "\n";
  os << "effectiveness: " << fmt_double(rep.effectiveness()) << "\n";
  if (!to_violation.empty()) {
    const std::size_t n = to_violation.size();
    const double median = n % 2 == 1 ? to_violation[n / 2] : 0.5 * (to_violation[n / 2 - 1] + to_violation[n / 2]);
    os << "median mut executions to violation: " << fmt_double(median) << "\n";
  }
  os << "total wall ms: " << wall_total << "\n";
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("failing_input_", 0) == 0) os << "failing input: " << entry.path().string() << "\n";
  }
  return 0;
}

}  // namespace arfal::cli
