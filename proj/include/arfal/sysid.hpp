#ifndef ARFAL_SYSID_HPP
#define ARFAL_SYSID_HPP

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "arfal/model.hpp"
#include "arfal/signals.hpp"

namespace arfal::sysid {

// Discrete model structures. Orders count coefficients; nk is the
// input-to-output delay in samples.
struct Arx {
  int na = 0, nb = 0, nk = 1;
};
struct Armax {
  int na = 0, nb = 0, nc = 0, nk = 1;
};
struct Bj {
  int nb = 0, nc = 0, nd = 0, nf = 0, nk = 1;
};
struct StateSpaceDiscrete {
  int n = 1;
};

using ModelStructure = std::variant<Arx, Armax, Bj, StateSpaceDiscrete>;

void validate(const ModelStructure& structure);
std::string to_string(const ModelStructure& structure);
std::string structure_name(const ModelStructure& structure);  // "arx" | "armax" | "bj" | "ss"
std::vector<int> structure_orders(const ModelStructure& structure);
ModelStructure make_structure(const std::string& name, const std::vector<int>& orders);

// One model execution worth of sampled input/output data.
struct Experiment {
  signals::SignalSet inputs;
  signals::SignalSet outputs;
};

class TrainingData {
 public:
  TrainingData() = default;

  void add(Experiment experiment);
  TrainingData with(Experiment experiment) const;

  const std::vector<Experiment>& experiments() const { return experiments_; }
  Eigen::Index count() const { return static_cast<Eigen::Index>(experiments_.size()); }
  Eigen::Index total_samples() const;
  double step() const;

 private:
  std::vector<Experiment> experiments_;
};

// Per-output coefficients of the polynomial structures, stored in additive
// recursion form:
//   y(t) = sum_i a_i y(t-i) + sum_j sum_i b_{j,i} u_j(t-nk-i+1) + noise
//   w_j(t) = sum_i f_{j,i} w_j(t-i) + sum_i b_{j,i} u_j(t-nk-i+1)       (bj)
//   v(t)   = sum_i d_i v(t-i) + e(t) + sum_i c_i e(t-i)                 (bj noise)
struct PolyOutput {
  Eigen::VectorXd a;
  std::vector<Eigen::VectorXd> b;  // one vector per input channel
  Eigen::VectorXd c;
  Eigen::VectorXd d;
  std::vector<Eigen::VectorXd> f;  // one vector per input channel (bj)
};

struct StateSpaceCoeffs {
  Eigen::MatrixXd F;   // n x n state transition
  Eigen::MatrixXd G;   // n x m input map
  Eigen::MatrixXd H;   // p x n output map
  Eigen::MatrixXd D;   // p x m feedthrough
  Eigen::VectorXd x0;  // fitted initial state
};

// Fitted surrogate: same channel names and step as the training data, one
// MISO submodel per output (polynomial structures) or a single state-space
// realization. Simulation runs noise-free.
class SurrogateModel {
 public:
  SurrogateModel(ModelStructure structure, double step, std::vector<std::string> input_names,
                 std::vector<std::string> output_names, std::vector<PolyOutput> per_output);
  SurrogateModel(ModelStructure structure, double step, std::vector<std::string> input_names,
                 std::vector<std::string> output_names, StateSpaceCoeffs ss);

  const ModelStructure& structure() const { return structure_; }
  double step() const { return step_; }
  const std::vector<std::string>& input_names() const { return input_names_; }
  const std::vector<std::string>& output_names() const { return output_names_; }
  const std::vector<PolyOutput>& poly() const;
  const StateSpaceCoeffs& state_space() const;
  bool is_state_space() const { return ss_.has_value(); }

  // Stability of the deterministic simulation recursions, recorded at fit
  // time; unstable models are still usable (refinement may repair them).
  double spectral_radius() const { return spectral_radius_; }
  bool stable() const { return spectral_radius_ < 1.0 + 1e-6; }

 private:
  ModelStructure structure_;
  double step_;
  std::vector<std::string> input_names_;
  std::vector<std::string> output_names_;
  std::vector<PolyOutput> per_output_;
  std::optional<StateSpaceCoeffs> ss_;
  double spectral_radius_ = 0.0;
};

// Least-squares / prediction-error fit of the requested structure.
//   arx    - ordinary least squares per output
//   armax  - extended (pseudo-linear) least squares, arx init
//   bj     - Gauss-Newton prediction-error minimization with Levenberg
//            damping, initialized from an arx(nf, nb, nk) fit
//   ss     - MOESP-style subspace identification (block Hankel, SVD
//            truncation to order n), then linear regression for G, D, x0
// Regressors never cross experiment boundaries.
SurrogateModel fit(const ModelStructure& structure, const TrainingData& data);

// Free-run simulation: past outputs are the model's own predictions and all
// noise terms are zero. Polynomial structures start from rest; state space
// starts from the fitted x0.
signals::SignalSet simulate(const SurrogateModel& model, const signals::SignalSet& input);

// Mean squared error over all shared channels and samples.
double mse(const signals::SignalSet& reference, const signals::SignalSet& predicted);

// Refit on old data plus one new experiment; structure unchanged.
SurrogateModel refine(const ModelStructure& structure, const TrainingData& old_data, Experiment new_experiment);

// One-step-ahead prediction MSE over the training rows (the quantity the
// polynomial fits minimize). For state space, which carries no noise model,
// this is the free-run simulation MSE.
double one_step_mse(const SurrogateModel& model, const TrainingData& data);

// The surrogate behind the model-under-test interface, so the falsifier can
// drive it exactly like the real model. Input ranges are inherited from the
// model being approximated.
class SurrogateExecutable : public mut::ExecutableModel {
 public:
  SurrogateExecutable(SurrogateModel model, std::vector<mut::InputDecl> inputs);

  const SurrogateModel& model() const { return model_; }

 protected:
  signals::SignalSet run(const signals::SignalSet& input) const override;

 private:
  SurrogateModel model_;
};

}  // namespace arfal::sysid

#endif  // ARFAL_SYSID_HPP
