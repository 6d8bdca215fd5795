#include "arfal/search.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace arfal::search {

std::string CandidateTest::describe() const {
  std::ostringstream os;
  char buf[40];
  for (std::size_t c = 0; c < points.size(); ++c) {
    if (c) os << "; ";
    os << rendered.at(static_cast<Eigen::Index>(c)).name << "=[";
    for (Eigen::Index i = 0; i < points[c].values.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", points[c].values(i));
      os << (i ? "," : "") << buf;
    }
    os << "]";
  }
  return os.str();
}

SearchStrategy strategy_from_string(const std::string& name) {
  if (name == "uniform" || name == "uniform_random" || name == "random") return UniformRandom{};
  if (name == "hill" || name == "hill_climb" || name == "hill_climb_restart") return HillClimbRestart{};
  if (name == "anneal" || name == "annealing" || name == "simulated_annealing") return SimulatedAnnealing{};
  throw ConfigError("unknown search strategy '" + name + "' (use uniform|hill|anneal)");
}

std::string to_string(const SearchStrategy& strategy) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, UniformRandom>) return "uniform_random";
        if constexpr (std::is_same_v<T, HillClimbRestart>) return "hill_climb_restart";
        if constexpr (std::is_same_v<T, SimulatedAnnealing>) return "simulated_annealing";
      },
      strategy);
}

void validate(const SearchStrategy& strategy) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, HillClimbRestart>) {
          if (!(s.step_fraction > 0.0 && s.step_fraction <= 1.0)) {
            throw StructuralError("hill climb: step fraction must be in (0,1]");
          }
          if (s.restarts_after_k_failures < 1) throw StructuralError("hill climb: restart threshold must be >= 1");
        } else if constexpr (std::is_same_v<T, SimulatedAnnealing>) {
          if (!(s.proposal_sigma_fraction > 0.0 && s.proposal_sigma_fraction <= 1.0)) {
            throw StructuralError("annealing: sigma fraction must be in (0,1]");
          }
          if (!(s.cooling_rate > 0.0 && s.cooling_rate < 1.0)) {
            throw StructuralError("annealing: cooling rate must be in (0,1)");
          }
          if (!(s.initial_temperature > 0.0)) throw StructuralError("annealing: temperature must be > 0");
        }
      },
      strategy);
}

CandidateTest generate(const signals::InputProfile& profile, Rng& rng) {
  CandidateTest candidate;
  candidate.points.reserve(profile.channels().size());
  for (const auto& spec : profile.channels()) {
    candidate.points.push_back(signals::generate_control_points(spec, profile.domain(), rng));
  }
  candidate.rendered = signals::render(profile, candidate.points);
  return candidate;
}

namespace {

// Gaussian perturbation of every control-point value, sigma scaled by the
// channel range, clipped back into range. Times stay fixed.
CandidateTest perturb(const signals::InputProfile& profile, const CandidateTest& current, double sigma_fraction,
                      Rng& rng) {
  CandidateTest next;
  next.points = current.points;
  for (std::size_t c = 0; c < next.points.size(); ++c) {
    const auto& spec = profile.channels()[c];
    const double sigma = sigma_fraction * (spec.hi - spec.lo);
    for (Eigen::Index i = 0; i < next.points[c].values.size(); ++i) {
      double v = next.points[c].values(i) + sigma * rng.gaussian();
      next.points[c].values(i) = std::min(spec.hi, std::max(spec.lo, v));
    }
  }
  next.rendered = signals::render(profile, next.points);
  return next;
}

}  // namespace

CandidateTest search_step(const SearchStrategy& strategy, const signals::InputProfile& profile,
                          const CandidateTest& current, double current_objective, StepState& state, Rng& rng) {
  (void)current_objective;
  return std::visit(
      [&](const auto& s) -> CandidateTest {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, UniformRandom>) {
          state.last_was_restart = false;
          return generate(profile, rng);
        } else if constexpr (std::is_same_v<T, HillClimbRestart>) {
          if (state.consecutive_failures >= s.restarts_after_k_failures) {
            state.consecutive_failures = 0;
            state.last_was_restart = true;
            return generate(profile, rng);
          }
          state.last_was_restart = false;
          return perturb(profile, current, s.step_fraction, rng);
        } else {
          state.last_was_restart = false;
          return perturb(profile, current, s.proposal_sigma_fraction, rng);
        }
      },
      strategy);
}

bool accept_step(const SearchStrategy& strategy, StepState& state, double current_objective,
                 double proposal_objective, Rng& rng) {
  return std::visit(
      [&](const auto& s) -> bool {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, UniformRandom>) {
          return true;  // explorative: the new draw always becomes the current point
        } else if constexpr (std::is_same_v<T, HillClimbRestart>) {
          if (state.last_was_restart) {
            state.last_was_restart = false;
            return true;  // a restart unconditionally moves the search
          }
          if (proposal_objective < current_objective) {
            state.consecutive_failures = 0;
            return true;
          }
          state.consecutive_failures += 1;
          return false;
        } else {
          const double delta = proposal_objective - current_objective;
          bool accepted;
          if (delta <= 0.0) {
            accepted = true;
          } else if (state.temperature <= 0.0) {
            accepted = false;
          } else {
            accepted = rng.uniform01() < std::exp(-delta / state.temperature);
          }
          if (accepted) state.temperature *= s.cooling_rate;
          return accepted;
        }
      },
      strategy);
}

FalsificationResult falsify(const mut::ExecutableModel& model, const signals::InputProfile& profile,
                            const stl::Formula& formula, const FalsificationConfig& config) {
  if (config.max_executions < 1) throw StructuralError("falsify: max executions must be >= 1");
  validate(config.strategy);

  Rng rng(config.seed);
  StepState state;
  FalsificationResult result;
  result.objective_history.reserve(static_cast<std::size_t>(config.max_executions));

  CandidateTest current = generate(profile, rng);
  double current_objective = 0.0;

  for (int exec = 0; exec < config.max_executions; ++exec) {
    CandidateTest candidate =
        exec == 0 ? current : search_step(config.strategy, profile, current, current_objective, state, rng);

    signals::SignalSet output = [&] {
      try {
        return model.execute(candidate.rendered);
      } catch (const StructuralError&) {
        throw;
      } catch (const std::exception& e) {
        throw ModelExecutionError("model '" + model.id() + "' failed: " + e.what() +
                                  " | candidate: " + candidate.describe());
      }
    }();
    const double objective = stl::test_objective(formula, candidate.rendered, output);

    result.objective_history.push_back(objective);
    result.executions_used = exec + 1;
    if (exec == 0 || objective < result.best_objective) {
      result.best_objective = objective;
      result.best_input = candidate;
    }
    if (objective <= 0.0) {
      result.falsified = true;
      return result;
    }

    if (exec == 0) {
      current_objective = objective;
      if (auto* sa = std::get_if<SimulatedAnnealing>(&config.strategy)) {
        // T0 in objective units: normalize by the magnitude of the first value.
        state.temperature = sa->initial_temperature * std::max(std::abs(objective), 1e-12);
      }
    } else if (accept_step(config.strategy, state, current_objective, objective, rng)) {
      current = std::move(candidate);
      current_objective = objective;
    }
  }
  return result;
}

}  // namespace arfal::search
