#ifndef ARFAL_ARISTEO_HPP
#define ARFAL_ARISTEO_HPP

#include <optional>
#include <utility>
#include <vector>

#include "arfal/search.hpp"
#include "arfal/sysid.hpp"

namespace arfal::aristeo {

struct AristeoConfig {
  int max_refinements = 1;  // outer loop iterations (each validates at most one candidate on the MUT)
  sysid::ModelStructure structure = sysid::Arx{2, 2, 1};
  search::FalsificationConfig inner;  // falsification budget applied to the surrogate

  void validate() const;
};

enum class Outcome { ViolationFound, BudgetExhausted };

struct IterationLog {
  bool surrogate_falsified = false;
  double surrogate_objective = 0.0;  // inner falsifier's best objective on the surrogate
  double mut_objective = 0.0;        // the candidate's objective on the real model
  double train_mse = 0.0;            // one-step MSE of the surrogate on its training set
};

struct AristeoReport {
  Outcome outcome = Outcome::BudgetExhausted;
  std::optional<search::CandidateTest> failing_input;
  int mut_executions = 0;        // 1 approximation run + one validation per iteration
  int refinements_performed = 0; // refits after the initial approximation
  std::vector<IterationLog> iterations;
  std::optional<sysid::SurrogateModel> final_surrogate;  // for inspection/replay
};

// Runs the model once on a random input and fits the requested structure on
// that single experiment. The surrogate inherits the model's interface.
std::pair<sysid::SurrogateModel, sysid::TrainingData> approximate(const mut::ExecutableModel& mut,
                                                                  const signals::InputProfile& profile,
                                                                  const sysid::ModelStructure& structure, Rng& rng);

// One validation run of a candidate on the real model: objective plus the
// output trace (the trace is what refinement consumes).
std::pair<double, signals::SignalSet> check_on_mut(const mut::ExecutableModel& mut,
                                                   const search::CandidateTest& candidate,
                                                   const stl::Formula& formula);

// Approximation-refinement loop: falsify the surrogate, validate the
// candidate on the real model, refine on spurious results. The inner
// falsifier's seed advances by one per iteration. When the inner search does
// not falsify the surrogate, its best candidate is validated and used for
// refinement anyway.
AristeoReport run(const mut::ExecutableModel& mut, const signals::InputProfile& profile, const stl::Formula& formula,
                  const AristeoConfig& config, Rng& rng);

}  // namespace arfal::aristeo

#endif  // ARFAL_ARISTEO_HPP
