#include "arfal/aristeo.hpp"

namespace arfal::aristeo {

void AristeoConfig::validate() const {
  if (max_refinements < 1) throw StructuralError("aristeo: max refinements must be >= 1");
  if (inner.max_executions < 1) throw StructuralError("aristeo: inner falsification budget must be >= 1");
  sysid::validate(structure);
  search::validate(inner.strategy);
}

std::pair<sysid::SurrogateModel, sysid::TrainingData> approximate(const mut::ExecutableModel& mut,
                                                                  const signals::InputProfile& profile,
                                                                  const sysid::ModelStructure& structure, Rng& rng) {
  const search::CandidateTest seed_input = search::generate(profile, rng);
  signals::SignalSet output = mut.execute(seed_input.rendered);
  sysid::TrainingData data;
  data.add(sysid::Experiment{seed_input.rendered, std::move(output)});
  sysid::SurrogateModel model = sysid::fit(structure, data);
  return {std::move(model), std::move(data)};
}

std::pair<double, signals::SignalSet> check_on_mut(const mut::ExecutableModel& mut,
                                                   const search::CandidateTest& candidate,
                                                   const stl::Formula& formula) {
  signals::SignalSet output = mut.execute(candidate.rendered);
  const double objective = stl::test_objective(formula, candidate.rendered, output);
  return {objective, std::move(output)};
}

AristeoReport run(const mut::ExecutableModel& mut, const signals::InputProfile& profile, const stl::Formula& formula,
                  const AristeoConfig& config, Rng& rng) {
  config.validate();

  AristeoReport report;
  sysid::TrainingData data;
  std::optional<sysid::SurrogateModel> surrogate;
  std::optional<sysid::Experiment> spurious;  // last validated candidate's (input, output)

  for (int iteration = 0; iteration < config.max_refinements; ++iteration) {
    try {
      if (!surrogate.has_value()) {
        auto [model, seed_data] = approximate(mut, profile, config.structure, rng);
        surrogate = std::move(model);
        data = std::move(seed_data);
        report.mut_executions += 1;  // the approximation run
      } else {
        data.add(std::move(*spurious));
        spurious.reset();
        surrogate = sysid::fit(config.structure, data);
        report.refinements_performed += 1;
      }

      const sysid::SurrogateExecutable cheap(*surrogate, mut.inputs());

      search::FalsificationConfig inner = config.inner;
      inner.seed = config.inner.seed + static_cast<std::uint64_t>(iteration);
      const search::FalsificationResult inner_result = search::falsify(cheap, profile, formula, inner);

      // Validate the inner search's candidate on the real model. A candidate
      // exists even when the surrogate was not falsified: the best-objective
      // input is the most informative point for refinement.
      auto [objective, output] = check_on_mut(mut, inner_result.best_input, formula);
      report.mut_executions += 1;
      report.iterations.push_back(IterationLog{inner_result.falsified, inner_result.best_objective, objective,
                                               sysid::one_step_mse(*surrogate, data)});

      if (objective <= 0.0) {
        report.outcome = Outcome::ViolationFound;
        report.failing_input = inner_result.best_input;
        report.final_surrogate = std::move(surrogate);
        return report;
      }
      spurious = sysid::Experiment{inner_result.best_input.rendered, std::move(output)};
    } catch (const Error& e) {
      throw Error("aristeo iteration " + std::to_string(iteration + 1) + ": " + e.what());
    }
  }
  report.outcome = Outcome::BudgetExhausted;
  report.final_surrogate = std::move(surrogate);
  return report;
}

}  // namespace arfal::aristeo
