#ifndef ARFAL_MODEL_HPP
#define ARFAL_MODEL_HPP

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "arfal/signals.hpp"

namespace arfal::mut {

struct InputDecl {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
};

// Behavioral interface of a model under test: declared inputs with ranges,
// output names, a native sample step, and a deterministic execute().
class ExecutableModel {
 public:
  virtual ~ExecutableModel() = default;

  const std::string& id() const { return id_; }
  const std::vector<InputDecl>& inputs() const { return inputs_; }
  const std::vector<std::string>& output_names() const { return output_names_; }
  double native_step() const { return native_step_; }

  // Validates the input interface, then runs the model. Output domain equals
  // the input domain.
  signals::SignalSet execute(const signals::SignalSet& input) const;

 protected:
  ExecutableModel(std::string id, std::vector<InputDecl> inputs, std::vector<std::string> outputs, double step)
      : id_(std::move(id)), inputs_(std::move(inputs)), output_names_(std::move(outputs)), native_step_(step) {}

  virtual signals::SignalSet run(const signals::SignalSet& input) const = 0;

 private:
  std::string id_;
  std::vector<InputDecl> inputs_;
  std::vector<std::string> output_names_;
  double native_step_;
};

// Continuous-time dynamics dx/dt = f(x, u, t) with output map y = h(x, u),
// integrated by classical RK4 with zero-order-hold inputs between samples.
class OdeModel : public ExecutableModel {
 public:
  using Derivative = std::function<void(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double t, Eigen::VectorXd& dx)>;
  using Output = std::function<void(const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::VectorXd& y)>;

  OdeModel(std::string id, std::vector<InputDecl> inputs, std::vector<std::string> outputs, double step,
           Eigen::VectorXd x0, Derivative f, Output h, double integrator_step = -1.0);

  double integrator_step() const { return integrator_step_; }
  const Eigen::VectorXd& initial_state() const { return x0_; }
  const Derivative& derivative() const { return f_; }
  const Output& output_map() const { return h_; }

 protected:
  signals::SignalSet run(const signals::SignalSet& input) const override;

 private:
  Eigen::VectorXd x0_;
  Derivative f_;
  Output h_;
  double integrator_step_;
};

// RK4 over the input grid; substeps of model.integrator_step() inside each
// sample interval, input held at the interval's left sample.
signals::SignalSet rk4_integrate(const OdeModel& model, const signals::SignalSet& input);

// Emulates a compute-intensive model: re-executes the wrapped model
// cost_factor times per call and returns the first result, so outputs are
// bit-identical to the inner model's.
class CostWrapper : public ExecutableModel {
 public:
  CostWrapper(std::shared_ptr<const ExecutableModel> inner, int cost_factor);

  int cost_factor() const { return cost_factor_; }

 protected:
  signals::SignalSet run(const signals::SignalSet& input) const override;

 private:
  std::shared_ptr<const ExecutableModel> inner_;
  int cost_factor_;
};

// y = u, channel-for-channel. Output names mirror inputs with a prefix so the
// two sets stay distinguishable in requirements.
class PassthroughModel : public ExecutableModel {
 public:
  PassthroughModel(std::string id, std::vector<InputDecl> inputs, double step, std::string output_prefix = "y_");

 protected:
  signals::SignalSet run(const signals::SignalSet& input) const override;

 private:
  std::string prefix_;
};

// A linear ARX difference equation exposed as a model under test; used to
// exercise exact self-identification.
class LinearArxModel : public ExecutableModel {
 public:
  // y(t) = sum_i a(i) y(t-1-i) + sum_j sum_i b[j](i) u_j(t-delay-i)
  LinearArxModel(std::string id, std::vector<InputDecl> inputs, std::string output_name, double step,
                 Eigen::VectorXd a, std::vector<Eigen::VectorXd> b, int delay);

 protected:
  signals::SignalSet run(const signals::SignalSet& input) const override;

 private:
  Eigen::VectorXd a_;
  std::vector<Eigen::VectorXd> b_;
  int delay_;
  std::string output_name_;
};

}  // namespace arfal::mut

#endif  // ARFAL_MODEL_HPP
