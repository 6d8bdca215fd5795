#ifndef ARFAL_SIGNALS_HPP
#define ARFAL_SIGNALS_HPP

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "arfal/common.hpp"

namespace arfal::signals {

// Fixed-rate discretization of [0, b]: l+1 samples at k*step, b = l*step.
class TimeDomain {
 public:
  // Placeholder grid; real domains come from the validating constructor.
  TimeDomain() : end_time_(1.0), step_(0.5), intervals_(2) {}
  TimeDomain(double end_time, double step);

  double end_time() const { return end_time_; }
  double step() const { return step_; }
  Eigen::Index intervals() const { return intervals_; }       // l
  Eigen::Index sample_count() const { return intervals_ + 1; }  // l + 1
  double time_at(Eigen::Index k) const { return static_cast<double>(k) * step_; }

  bool same_grid(const TimeDomain& other, double tol = 1e-9) const;

 private:
  double end_time_;
  double step_;
  Eigen::Index intervals_;
};

struct SampledSignal {
  SampledSignal(std::string name, TimeDomain domain, Eigen::VectorXd values);

  std::string name;
  TimeDomain domain;
  Eigen::VectorXd values;  // values(k) holds the sample at k*step
};

// Ordered set of signals over one shared grid; channel names unique.
class SignalSet {
 public:
  SignalSet() = default;
  explicit SignalSet(TimeDomain domain) : domain_(domain) {}

  void add(SampledSignal signal);

  const TimeDomain& domain() const { return domain_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(channels_.size()); }
  bool empty() const { return channels_.empty(); }

  const SampledSignal& at(Eigen::Index i) const { return channels_.at(static_cast<std::size_t>(i)); }
  const SampledSignal& by_name(const std::string& name) const;
  bool has_channel(const std::string& name) const;
  std::vector<std::string> channel_names() const;

  auto begin() const { return channels_.begin(); }
  auto end() const { return channels_.end(); }

 private:
  TimeDomain domain_;
  std::vector<SampledSignal> channels_;
};

// CSV export: header "time,<ch1>,<ch2>,...", one row per sample, %.17g.
void write_csv(std::ostream& os, const SignalSet& set);
SignalSet read_csv(std::istream& is, double step_hint = -1.0);

enum class InterpKind { Constant, PiecewiseConstant, Linear, Pchip, Pulse };

struct Interpolation {
  InterpKind kind = InterpKind::Linear;
  // Pulse only: level-hold period in seconds (<= 0 means span/n) and the
  // fraction of each period spent at the level (the rest sits at the lowest
  // control value).
  double pulse_period = 0.0;
  double pulse_duty = 1.0;
};

InterpKind interp_kind_from_string(const std::string& s);
std::string to_string(InterpKind kind);

enum class ControlTimePolicy { EquallySpaced, Random };

struct InputChannelSpec {
  std::string name;
  Interpolation interp;
  double lo = 0.0;
  double hi = 0.0;
  int count = 1;  // number of control points n
  ControlTimePolicy policy = ControlTimePolicy::EquallySpaced;

  void validate() const;
};

class InputProfile {
 public:
  InputProfile(TimeDomain domain, std::vector<InputChannelSpec> channels);

  const TimeDomain& domain() const { return domain_; }
  const std::vector<InputChannelSpec>& channels() const { return channels_; }

 private:
  TimeDomain domain_;
  std::vector<InputChannelSpec> channels_;
};

// Control points: t(0) = 0, t(n-1) = b (single-point signals sit at t = 0),
// times strictly increasing.
struct ControlPoints {
  Eigen::VectorXd times;
  Eigen::VectorXd values;
};

ControlPoints generate_control_points(const InputChannelSpec& spec, const TimeDomain& domain, Rng& rng);

// Fritsch-Carlson monotone slopes for cubic Hermite interpolation.
Eigen::VectorXd pchip_slopes(const Eigen::VectorXd& times, const Eigen::VectorXd& values);

// Analytic interpolant value at an arbitrary time in [t_1, t_n].
double eval_interpolant(const ControlPoints& points, const Interpolation& interp, double t);

SampledSignal interpolate(const ControlPoints& points, const Interpolation& interp, const TimeDomain& domain,
                          std::string name = "");

// Linear resampling onto a new step; endpoints preserved exactly.
SampledSignal resample(const SampledSignal& signal, double new_step);

// Interpolate every channel of a candidate and clip to the channel ranges.
SignalSet render(const InputProfile& profile, const std::vector<ControlPoints>& points);

}  // namespace arfal::signals

#endif  // ARFAL_SIGNALS_HPP
