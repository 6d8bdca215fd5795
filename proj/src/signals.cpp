#include "arfal/signals.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace arfal::signals {

TimeDomain::TimeDomain(double end_time, double step) : end_time_(end_time), step_(step) {
  if (!(end_time > 0.0)) throw StructuralError("time domain: end time must be > 0");
  if (!(step > 0.0)) throw StructuralError("time domain: step must be > 0");
  const double ratio = end_time / step;
  if (!nearly_integer(ratio)) {
    throw StructuralError("time domain: end time " + std::to_string(end_time) +
                          " is not an integer multiple of step " + std::to_string(step));
  }
  intervals_ = static_cast<Eigen::Index>(std::llround(ratio));
  if (intervals_ < 2) throw StructuralError("time domain: needs at least 2 intervals");
}

bool TimeDomain::same_grid(const TimeDomain& other, double tol) const {
  return std::abs(end_time_ - other.end_time_) <= tol * std::max(1.0, std::abs(end_time_)) &&
         std::abs(step_ - other.step_) <= tol * std::max(1.0, std::abs(step_));
}

SampledSignal::SampledSignal(std::string name_, TimeDomain domain_, Eigen::VectorXd values_)
    : name(std::move(name_)), domain(domain_), values(std::move(values_)) {
  if (values.size() != domain.sample_count()) {
    throw StructuralError("signal '" + name + "': " + std::to_string(values.size()) + " values for " +
                          std::to_string(domain.sample_count()) + " grid samples");
  }
  if (!values.allFinite()) throw StructuralError("signal '" + name + "': non-finite sample");
}

void SignalSet::add(SampledSignal signal) {
  if (!signal.domain.same_grid(domain_)) {
    throw StructuralError("signal set: channel '" + signal.name + "' sampled on a different grid");
  }
  if (has_channel(signal.name)) {
    throw StructuralError("signal set: duplicate channel name '" + signal.name + "'");
  }
  channels_.push_back(std::move(signal));
}

const SampledSignal& SignalSet::by_name(const std::string& name) const {
  for (const auto& ch : channels_) {
    if (ch.name == name) return ch;
  }
  throw StructuralError("signal set: no channel named '" + name + "'");
}

bool SignalSet::has_channel(const std::string& name) const {
  return std::any_of(channels_.begin(), channels_.end(), [&](const auto& ch) { return ch.name == name; });
}

std::vector<std::string> SignalSet::channel_names() const {
  std::vector<std::string> names;
  names.reserve(channels_.size());
  for (const auto& ch : channels_) names.push_back(ch.name);
  return names;
}

void write_csv(std::ostream& os, const SignalSet& set) {
  os << "time";
  for (const auto& ch : set) os << ',' << ch.name;
  os << '\n';
  char buf[40];
  for (Eigen::Index k = 0; k < set.domain().sample_count(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g", set.domain().time_at(k));
    os << buf;
    for (const auto& ch : set) {
      std::snprintf(buf, sizeof(buf), "%.17g", ch.values(k));
      os << ',' << buf;
    }
    os << '\n';
  }
}

SignalSet read_csv(std::istream& is, double step_hint) {
  std::string line;
  if (!std::getline(is, line)) throw StructuralError("signal csv: empty stream");
  std::vector<std::string> names;
  {
    std::stringstream hdr(line);
    std::string cell;
    while (std::getline(hdr, cell, ',')) names.push_back(cell);
  }
  if (names.size() < 2 || names[0] != "time") throw StructuralError("signal csv: malformed header");

  std::vector<double> times;
  std::vector<std::vector<double>> cols(names.size() - 1);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::size_t i = 0;
    while (std::getline(row, cell, ',')) {
      const double v = std::stod(cell);
      if (i == 0) {
        times.push_back(v);
      } else if (i - 1 < cols.size()) {
        cols[i - 1].push_back(v);
      }
      ++i;
    }
    if (i != names.size()) throw StructuralError("signal csv: ragged row");
  }
  if (times.size() < 3) throw StructuralError("signal csv: too few rows");
  const double step = step_hint > 0.0 ? step_hint : times[1] - times[0];
  TimeDomain domain(times.back(), step);
  SignalSet set(domain);
  for (std::size_t c = 0; c < cols.size(); ++c) {
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(cols[c].data(), static_cast<Eigen::Index>(cols[c].size()));
    set.add(SampledSignal(names[c + 1], domain, std::move(v)));
  }
  return set;
}

InterpKind interp_kind_from_string(const std::string& s) {
  if (s == "const" || s == "constant") return InterpKind::Constant;
  if (s == "pconst" || s == "piecewise_constant") return InterpKind::PiecewiseConstant;
  if (s == "linear") return InterpKind::Linear;
  if (s == "pchip") return InterpKind::Pchip;
  if (s == "pulse") return InterpKind::Pulse;
  throw ConfigError("unknown interpolation kind '" + s + "'");
}

std::string to_string(InterpKind kind) {
  switch (kind) {
    case InterpKind::Constant: return "const";
    case InterpKind::PiecewiseConstant: return "pconst";
    case InterpKind::Linear: return "linear";
    case InterpKind::Pchip: return "pchip";
    case InterpKind::Pulse: return "pulse";
  }
  return "?";
}

void InputChannelSpec::validate() const {
  if (name.empty()) throw StructuralError("input channel: empty name");
  if (!(lo <= hi)) throw StructuralError("input channel '" + name + "': lo > hi");
  if (count < 1) throw StructuralError("input channel '" + name + "': control point count < 1");
  if (interp.kind == InterpKind::Constant) {
    if (count != 1) throw StructuralError("input channel '" + name + "': const takes exactly 1 control point");
  } else if (count < 2) {
    throw StructuralError("input channel '" + name + "': " + to_string(interp.kind) +
                          " needs at least 2 control points");
  }
  if (interp.kind == InterpKind::Pulse) {
    if (interp.pulse_duty <= 0.0 || interp.pulse_duty > 1.0) {
      throw StructuralError("input channel '" + name + "': pulse duty must be in (0,1]");
    }
    if (interp.pulse_period < 0.0) throw StructuralError("input channel '" + name + "': negative pulse period");
  }
}

InputProfile::InputProfile(TimeDomain domain, std::vector<InputChannelSpec> channels)
    : domain_(domain), channels_(std::move(channels)) {
  if (channels_.empty()) throw StructuralError("input profile: no channels");
  std::set<std::string> seen;
  for (const auto& ch : channels_) {
    ch.validate();
    if (!seen.insert(ch.name).second) {
      throw StructuralError("input profile: duplicate channel name '" + ch.name + "'");
    }
  }
}

ControlPoints generate_control_points(const InputChannelSpec& spec, const TimeDomain& domain, Rng& rng) {
  spec.validate();
  const int n = spec.count;
  ControlPoints cp;
  cp.times.resize(n);
  cp.values.resize(n);
  for (int i = 0; i < n; ++i) cp.values(i) = rng.uniform(spec.lo, spec.hi);

  if (n == 1) {
    cp.times(0) = 0.0;
    return cp;
  }
  const double b = domain.end_time();
  if (spec.policy == ControlTimePolicy::EquallySpaced) {
    for (int i = 0; i < n; ++i) cp.times(i) = b * static_cast<double>(i) / static_cast<double>(n - 1);
  } else {
    // Interior times drawn uniformly, sorted; redraw on any duplicate.
    for (;;) {
      cp.times(0) = 0.0;
      cp.times(n - 1) = b;
      for (int i = 1; i < n - 1; ++i) cp.times(i) = rng.uniform(0.0, b);
      std::sort(cp.times.data() + 1, cp.times.data() + n - 1);
      bool strict = true;
      for (int i = 0; i + 1 < n; ++i) {
        if (!(cp.times(i) < cp.times(i + 1))) {
          strict = false;
          break;
        }
      }
      if (strict) break;
    }
  }
  cp.times(0) = 0.0;
  cp.times(n - 1) = b;
  return cp;
}

Eigen::VectorXd pchip_slopes(const Eigen::VectorXd& times, const Eigen::VectorXd& values) {
  const Eigen::Index n = times.size();
  Eigen::VectorXd m(n);
  if (n < 2) throw StructuralError("pchip: needs at least 2 points");
  if (n == 2) {
    m.setConstant((values(1) - values(0)) / (times(1) - times(0)));
    return m;
  }
  Eigen::VectorXd h(n - 1), delta(n - 1);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    h(i) = times(i + 1) - times(i);
    delta(i) = (values(i + 1) - values(i)) / h(i);
  }
  // Interior slopes: weighted harmonic mean where the secants agree in sign,
  // zero otherwise (this is what keeps plateaus flat).
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    if (delta(i - 1) * delta(i) <= 0.0) {
      m(i) = 0.0;
    } else {
      const double w1 = 2.0 * h(i) + h(i - 1);
      const double w2 = h(i) + 2.0 * h(i - 1);
      m(i) = (w1 + w2) / (w1 / delta(i - 1) + w2 / delta(i));
    }
  }
  // One-sided three-point endpoint slopes with the usual shape clamps.
  auto end_slope = [](double h0, double h1, double d0, double d1) {
    double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (s * d0 <= 0.0) {
      s = 0.0;
    } else if (d0 * d1 < 0.0 && std::abs(s) > 3.0 * std::abs(d0)) {
      s = 3.0 * d0;
    }
    return s;
  };
  m(0) = end_slope(h(0), h(1), delta(0), delta(1));
  m(n - 1) = end_slope(h(n - 2), h(n - 3), delta(n - 2), delta(n - 3));
  return m;
}

namespace {

// Index of the segment containing t: largest i with times(i) <= t (clamped).
Eigen::Index segment_of(const Eigen::VectorXd& times, double t) {
  const Eigen::Index n = times.size();
  if (t <= times(0)) return 0;
  if (t >= times(n - 1)) return n - 2;
  const double* lo = std::upper_bound(times.data(), times.data() + n, t);
  return std::max<Eigen::Index>(0, (lo - times.data()) - 1);
}

double eval_hermite(const Eigen::VectorXd& times, const Eigen::VectorXd& values, const Eigen::VectorXd& slopes,
                    double t) {
  const Eigen::Index i = segment_of(times, t);
  const double h = times(i + 1) - times(i);
  const double s = (t - times(i)) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
  const double h10 = s3 - 2.0 * s2 + s;
  const double h01 = -2.0 * s3 + 3.0 * s2;
  const double h11 = s3 - s2;
  return h00 * values(i) + h10 * h * slopes(i) + h01 * values(i + 1) + h11 * h * slopes(i + 1);
}

double eval_pulse(const ControlPoints& points, const Interpolation& interp, double t) {
  const Eigen::Index n = points.values.size();
  const double t0 = points.times(0);
  const double span = points.times(n - 1) - t0;
  const double period = interp.pulse_period > 0.0 ? interp.pulse_period : span / static_cast<double>(n);
  const double off_level = points.values.minCoeff();
  double u = (t - t0) / period;
  auto seg = static_cast<long long>(std::floor(u + 1e-12));
  double frac = u - static_cast<double>(seg);
  if (t >= points.times(n - 1)) {
    // End of horizon: the value is the limit from the left of the last segment.
    seg = static_cast<long long>(std::ceil(span / period - 1e-12)) - 1;
    frac = std::min(u - static_cast<double>(seg), 1.0 - 1e-12);
  }
  if (seg < 0) seg = 0;
  const double level = points.values(static_cast<Eigen::Index>(seg % n));
  return frac < interp.pulse_duty ? level : off_level;
}

}  // namespace

double eval_interpolant(const ControlPoints& points, const Interpolation& interp, double t) {
  const Eigen::Index n = points.values.size();
  if (n == 0) throw StructuralError("interpolate: no control points");
  switch (interp.kind) {
    case InterpKind::Constant:
      if (n != 1) throw StructuralError("interpolate: const takes exactly 1 control point");
      return points.values(0);
    case InterpKind::PiecewiseConstant: {
      if (n < 2) throw StructuralError("interpolate: pconst needs >= 2 control points");
      if (t >= points.times(n - 1)) return points.values(n - 1);
      return points.values(segment_of(points.times, t));
    }
    case InterpKind::Linear: {
      if (n < 2) throw StructuralError("interpolate: linear needs >= 2 control points");
      const Eigen::Index i = segment_of(points.times, t);
      const double s = (t - points.times(i)) / (points.times(i + 1) - points.times(i));
      return points.values(i) + s * (points.values(i + 1) - points.values(i));
    }
    case InterpKind::Pchip: {
      if (n < 2) throw StructuralError("interpolate: pchip needs >= 2 control points");
      const Eigen::VectorXd m = pchip_slopes(points.times, points.values);
      return eval_hermite(points.times, points.values, m, t);
    }
    case InterpKind::Pulse: {
      if (n < 2) throw StructuralError("interpolate: pulse needs >= 2 control points");
      return eval_pulse(points, interp, t);
    }
  }
  throw StructuralError("interpolate: unknown kind");
}

SampledSignal interpolate(const ControlPoints& points, const Interpolation& interp, const TimeDomain& domain,
                          std::string name) {
  const Eigen::Index count = domain.sample_count();
  Eigen::VectorXd out(count);
  if (interp.kind == InterpKind::Pchip) {
    // One slope pass, then Hermite evaluation per grid time.
    const Eigen::VectorXd m = pchip_slopes(points.times, points.values);
    for (Eigen::Index k = 0; k < count; ++k) out(k) = eval_hermite(points.times, points.values, m, domain.time_at(k));
  } else {
    for (Eigen::Index k = 0; k < count; ++k) out(k) = eval_interpolant(points, interp, domain.time_at(k));
  }
  return SampledSignal(std::move(name), domain, std::move(out));
}

SampledSignal resample(const SampledSignal& signal, double new_step) {
  if (!(new_step > 0.0)) throw StructuralError("resample: step must be > 0");
  const TimeDomain target(signal.domain.end_time(), new_step);  // rejects non-divisible steps
  const Eigen::Index n_old = signal.domain.sample_count();
  Eigen::VectorXd out(target.sample_count());
  const double old_step = signal.domain.step();
  for (Eigen::Index k = 0; k < target.sample_count(); ++k) {
    const double t = target.time_at(k);
    const double pos = t / old_step;
    auto i = static_cast<Eigen::Index>(std::floor(pos));
    if (i >= n_old - 1) {
      out(k) = signal.values(n_old - 1);
      continue;
    }
    const double s = pos - static_cast<double>(i);
    out(k) = signal.values(i) + s * (signal.values(i + 1) - signal.values(i));
  }
  out(target.sample_count() - 1) = signal.values(n_old - 1);  // endpoint preserved exactly
  return SampledSignal(signal.name, target, std::move(out));
}

SignalSet render(const InputProfile& profile, const std::vector<ControlPoints>& points) {
  if (points.size() != profile.channels().size()) {
    throw StructuralError("render: control point sets do not match profile channels");
  }
  SignalSet set(profile.domain());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& spec = profile.channels()[i];
    const auto& cp = points[i];
    if (cp.times.size() != spec.count || cp.values.size() != spec.count) {
      throw StructuralError("render: channel '" + spec.name + "' expects " + std::to_string(spec.count) +
                            " control points, got " + std::to_string(cp.values.size()));
    }
    if (cp.times(0) != 0.0) throw StructuralError("render: channel '" + spec.name + "': first time must be 0");
    if (spec.count > 1) {
      for (int k = 0; k + 1 < spec.count; ++k) {
        if (!(cp.times(k) < cp.times(k + 1))) {
          throw StructuralError("render: channel '" + spec.name + "': times must be strictly increasing");
        }
      }
      const double b = profile.domain().end_time();
      if (std::abs(cp.times(spec.count - 1) - b) > 1e-9 * std::max(1.0, b)) {
        throw StructuralError("render: channel '" + spec.name + "': last time must equal the horizon");
      }
    }
    SampledSignal s = interpolate(cp, spec.interp, profile.domain(), spec.name);
    s.values = s.values.cwiseMax(spec.lo).cwiseMin(spec.hi);
    set.add(std::move(s));
  }
  return set;
}

}  // namespace arfal::signals
