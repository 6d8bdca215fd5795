#include "arfal/model.hpp"

#include <cmath>

namespace arfal::mut {

signals::SignalSet ExecutableModel::execute(const signals::SignalSet& input) const {
  if (input.size() != static_cast<Eigen::Index>(inputs_.size())) {
    throw StructuralError("model '" + id_ + "': expected " + std::to_string(inputs_.size()) + " inputs, got " +
                          std::to_string(input.size()));
  }
  for (std::size_t i = 0; i < inputs_.size(); ++i) {
    if (input.at(static_cast<Eigen::Index>(i)).name != inputs_[i].name) {
      throw StructuralError("model '" + id_ + "': input channel " + std::to_string(i) + " is '" +
                            input.at(static_cast<Eigen::Index>(i)).name + "', expected '" + inputs_[i].name + "'");
    }
  }
  const double step = input.domain().step();
  if (std::abs(step - native_step_) > 1e-9 * std::max(1.0, native_step_)) {
    throw StructuralError("model '" + id_ + "': input sampled at " + std::to_string(step) + "s, native step is " +
                          std::to_string(native_step_) + "s");
  }
  return run(input);
}

OdeModel::OdeModel(std::string id, std::vector<InputDecl> inputs, std::vector<std::string> outputs, double step,
                   Eigen::VectorXd x0, Derivative f, Output h, double integrator_step)
    : ExecutableModel(std::move(id), std::move(inputs), std::move(outputs), step),
      x0_(std::move(x0)),
      f_(std::move(f)),
      h_(std::move(h)),
      integrator_step_(integrator_step > 0.0 ? integrator_step : step / 4.0) {
  if (integrator_step_ > native_step() + 1e-12) {
    throw StructuralError("ode model '" + this->id() + "': integrator step exceeds the sample step");
  }
}

signals::SignalSet OdeModel::run(const signals::SignalSet& input) const {
  return rk4_integrate(*this, input);
}

signals::SignalSet rk4_integrate(const OdeModel& model, const signals::SignalSet& input) {
  const auto& domain = input.domain();
  const Eigen::Index samples = domain.sample_count();
  const Eigen::Index m = input.size();
  const auto p = static_cast<Eigen::Index>(model.output_names().size());
  const double dt_sample = domain.step();
  const double ratio = dt_sample / model.integrator_step();
  if (!nearly_integer(ratio, 1e-6)) {
    throw StructuralError("rk4: integrator step does not divide the sample step");
  }
  const auto substeps = static_cast<Eigen::Index>(std::llround(ratio));
  const double h = dt_sample / static_cast<double>(substeps);

  const auto& f = model.derivative();
  const auto& out_map = model.output_map();
  Eigen::VectorXd x = model.initial_state();
  const Eigen::Index dim = x.size();
  Eigen::VectorXd u(m), y(p);
  Eigen::VectorXd k1(dim), k2(dim), k3(dim), k4(dim), xt(dim);
  Eigen::MatrixXd outputs(samples, p);

  for (Eigen::Index k = 0; k < samples; ++k) {
    for (Eigen::Index j = 0; j < m; ++j) u(j) = input.at(j).values(k);
    out_map(x, u, y);
    outputs.row(k) = y.transpose();
    if (!x.allFinite() || !y.allFinite()) {
      throw DivergenceError("rk4: non-finite state at t=" + std::to_string(domain.time_at(k)) + "s in model '" +
                            model.id() + "'");
    }
    if (k + 1 == samples) break;
    // Zero-order hold: u stays at sample k across the whole interval.
    double t = domain.time_at(k);
    for (Eigen::Index s = 0; s < substeps; ++s) {
      f(x, u, t, k1);
      xt = x + (0.5 * h) * k1;
      f(xt, u, t + 0.5 * h, k2);
      xt = x + (0.5 * h) * k2;
      f(xt, u, t + 0.5 * h, k3);
      xt = x + h * k3;
      f(xt, u, t + h, k4);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t += h;
    }
  }

  signals::SignalSet result(domain);
  for (Eigen::Index c = 0; c < p; ++c) {
    result.add(signals::SampledSignal(model.output_names()[static_cast<std::size_t>(c)], domain, outputs.col(c)));
  }
  return result;
}

CostWrapper::CostWrapper(std::shared_ptr<const ExecutableModel> inner, int cost_factor)
    : ExecutableModel(inner->id() + "+cost" + std::to_string(cost_factor), inner->inputs(), inner->output_names(),
                      inner->native_step()),
      inner_(std::move(inner)),
      cost_factor_(cost_factor) {
  if (cost_factor_ < 1) throw StructuralError("cost wrapper: factor must be >= 1");
}

signals::SignalSet CostWrapper::run(const signals::SignalSet& input) const {
  signals::SignalSet result = inner_->execute(input);
  volatile double sink = 0.0;
  for (int r = 1; r < cost_factor_; ++r) {
    const signals::SignalSet again = inner_->execute(input);
    sink = sink + again.at(0).values(again.at(0).values.size() - 1);
  }
  (void)sink;
  return result;
}

namespace {
std::vector<std::string> prefixed_names(const std::vector<InputDecl>& inputs, const std::string& prefix) {
  std::vector<std::string> outs;
  outs.reserve(inputs.size());
  for (const auto& in : inputs) outs.push_back(prefix + in.name);
  return outs;
}
}  // namespace

PassthroughModel::PassthroughModel(std::string id, std::vector<InputDecl> inputs, double step,
                                   std::string output_prefix)
    : ExecutableModel(std::move(id), inputs, prefixed_names(inputs, output_prefix), step),
      prefix_(std::move(output_prefix)) {}

signals::SignalSet PassthroughModel::run(const signals::SignalSet& input) const {
  signals::SignalSet out(input.domain());
  for (Eigen::Index i = 0; i < input.size(); ++i) {
    out.add(signals::SampledSignal(prefix_ + input.at(i).name, input.domain(), input.at(i).values));
  }
  return out;
}

LinearArxModel::LinearArxModel(std::string id, std::vector<InputDecl> inputs, std::string output_name, double step,
                               Eigen::VectorXd a, std::vector<Eigen::VectorXd> b, int delay)
    : ExecutableModel(std::move(id), std::move(inputs), {output_name}, step),
      a_(std::move(a)),
      b_(std::move(b)),
      delay_(delay),
      output_name_(std::move(output_name)) {
  if (b_.size() != this->inputs().size()) throw StructuralError("linear arx model: one b vector per input required");
  if (delay_ < 0) throw StructuralError("linear arx model: negative delay");
}

signals::SignalSet LinearArxModel::run(const signals::SignalSet& input) const {
  const auto& domain = input.domain();
  const Eigen::Index n = domain.sample_count();
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < a_.size(); ++i) {
      const Eigen::Index k = t - 1 - i;
      if (k >= 0) acc += a_(i) * y(k);
    }
    for (std::size_t j = 0; j < b_.size(); ++j) {
      for (Eigen::Index i = 0; i < b_[j].size(); ++i) {
        const Eigen::Index k = t - delay_ - i;
        if (k >= 0) acc += b_[j](i) * input.at(static_cast<Eigen::Index>(j)).values(k);
      }
    }
    y(t) = acc;
  }
  signals::SignalSet out(domain);
  out.add(signals::SampledSignal(output_name_, domain, std::move(y)));
  return out;
}

}  // namespace arfal::mut
