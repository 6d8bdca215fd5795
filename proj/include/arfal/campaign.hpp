#ifndef ARFAL_CAMPAIGN_HPP
#define ARFAL_CAMPAIGN_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "arfal/aristeo.hpp"
#include "arfal/benchmarks.hpp"
#include "arfal/search.hpp"
#include "arfal/sysid.hpp"

namespace arfal::cli {

enum class Mode { Baseline, Surrogate };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& s);

// One experiment description: model, requirement, search setup, budgets and
// repetition plan. Zero budgets fall back to the benchmark defaults; the
// strategy is never defaulted for experiment runs.
struct ExperimentConfig {
  std::string model_id;
  bool full_scale = false;
  std::optional<signals::InputProfile> profile;  // overrides the benchmark profile
  std::string stl_text;                          // empty = benchmark requirement
  Mode mode = Mode::Baseline;
  std::optional<sysid::ModelStructure> structure;  // required in surrogate mode
  std::optional<search::SearchStrategy> strategy;  // required (no silent default)
  int max_executions = 0;
  int max_refinements = 0;
  int repetitions = 1;
  std::uint64_t base_seed = 1;
  std::filesystem::path out_dir;
  int parallel = 1;
  int cost_factor = 1;  // CostWrapper multiplier on the model under test
};

ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json_text(const ExperimentConfig& config);

// Fully resolved experiment: model, profile, parsed formula, budgets.
struct ResolvedExperiment {
  std::shared_ptr<const mut::ExecutableModel> model;
  signals::InputProfile profile;
  stl::FormulaPtr formula;
  std::string stl_text;
  int max_executions = 0;
  int max_refinements = 0;
};

ResolvedExperiment resolve(const ExperimentConfig& config);

// CSV row schema: seed,mode,outcome,best_objective,mut_executions,iterations,wall_ms
struct CampaignRow {
  std::uint64_t seed = 0;
  Mode mode = Mode::Baseline;
  std::string outcome;  // violation | boundary | exhausted | error
  double best_objective = 0.0;
  int mut_executions = 0;
  int iterations = 0;
  std::int64_t wall_ms = 0;

  bool reveals_violation() const { return outcome == "violation" || outcome == "boundary"; }
  std::string to_csv() const;
};

extern const char* const kCampaignCsvHeader;
CampaignRow row_from_csv(const std::string& line);

struct CampaignReport {
  std::vector<CampaignRow> rows;

  double effectiveness() const;  // fraction of repetitions revealing a violation
  // MUT executions per repetition; repetitions that revealed nothing are
  // censored at the given budget.
  double median_executions(int censor_at) const;
};

// Runs `repetitions` independent repetitions (seed = base_seed + i), rows
// appended to <out>/rows.csv as they finish and the ordered table written to
// <out>/campaign.csv at the end. Per-repetition failures become error rows.
CampaignReport run_campaign(const ExperimentConfig& config);

// Same loop against an already-resolved experiment (models outside the
// benchmark registry).
CampaignReport run_campaign(const ExperimentConfig& config, const ResolvedExperiment& resolved);

// Re-runs the single repetition with the given seed and writes its artifacts
// (row, objective history, failing input when found) under <out>/replay/.
CampaignRow replay(const ExperimentConfig& config, std::uint64_t seed);

struct SweepRow {
  std::string label;
  sysid::ModelStructure structure;
  double effectiveness = 0.0;
  double mean_iterations = 0.0;  // censored at max_refinements for runs with no violation
  bool pareto = false;
};

// One campaign per config (configs differ in surrogate structure/orders);
// marks the Pareto frontier on (effectiveness up, mean iterations down).
std::vector<SweepRow> sweep(const std::vector<ExperimentConfig>& configs);

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

// Pareto frontier of (maximize effectiveness, minimize mean_iterations).
std::vector<bool> pareto_frontier(const std::vector<SweepRow>& rows);

// Prints aggregates for a finished campaign directory. Returns a process
// exit code: 0 ok, 1 usable artifacts missing.
int report(const std::filesystem::path& dir, std::ostream& os);

}  // namespace arfal::cli

#endif  // ARFAL_CAMPAIGN_HPP
