#ifndef ARFAL_SEARCH_HPP
#define ARFAL_SEARCH_HPP

#include <variant>
#include <vector>

#include "arfal/model.hpp"
#include "arfal/signals.hpp"
#include "arfal/stl.hpp"

namespace arfal::search {

// A candidate test: the control-point decision variables plus the rendered
// input signals they induce.
struct CandidateTest {
  std::vector<signals::ControlPoints> points;
  signals::SignalSet rendered;

  std::string describe() const;  // compact single-line serialization for diagnostics
};

struct UniformRandom {};

struct HillClimbRestart {
  double step_fraction = 0.1;            // proposal sigma as a fraction of each channel range
  int restarts_after_k_failures = 10;    // consecutive non-improving steps before a fresh restart
};

struct SimulatedAnnealing {
  double initial_temperature = 1.0;      // scaled by the first objective's magnitude
  double cooling_rate = 0.95;            // temperature multiplier per accepted step
  double proposal_sigma_fraction = 0.1;  // proposal sigma as a fraction of each channel range
};

using SearchStrategy = std::variant<UniformRandom, HillClimbRestart, SimulatedAnnealing>;

SearchStrategy strategy_from_string(const std::string& name);
std::string to_string(const SearchStrategy& strategy);
void validate(const SearchStrategy& strategy);

struct FalsificationConfig {
  int max_executions = 1;
  SearchStrategy strategy = UniformRandom{};
  std::uint64_t seed = 0;
};

struct FalsificationResult {
  bool falsified = false;
  CandidateTest best_input;
  double best_objective = 0.0;
  int executions_used = 0;
  std::vector<double> objective_history;  // one entry per model execution
};

// Mutable bookkeeping the strategies carry across steps of one search.
struct StepState {
  int consecutive_failures = 0;
  double temperature = -1.0;  // < 0 means "not yet initialized from the first objective"
  bool last_was_restart = false;
};

// Fresh candidate: independent uniform control points per channel.
CandidateTest generate(const signals::InputProfile& profile, Rng& rng);

// Next candidate from the current one under the given strategy.
CandidateTest search_step(const SearchStrategy& strategy, const signals::InputProfile& profile,
                          const CandidateTest& current, double current_objective, StepState& state, Rng& rng);

// Move-acceptance rule applied after the proposal's objective is known.
// Updates annealing temperature / failure counters.
bool accept_step(const SearchStrategy& strategy, StepState& state, double current_objective,
                 double proposal_objective, Rng& rng);

// Baseline falsification loop: generate, execute, check, search. Stops as
// soon as an objective <= 0 is observed or after max_executions runs.
FalsificationResult falsify(const mut::ExecutableModel& model, const signals::InputProfile& profile,
                            const stl::Formula& formula, const FalsificationConfig& config);

}  // namespace arfal::search

#endif  // ARFAL_SEARCH_HPP
