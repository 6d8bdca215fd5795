#include "arfal/benchmarks.hpp"

#include <cmath>
#include <cstdio>

namespace arfal::mut {

namespace {

using signals::ControlTimePolicy;
using signals::InputChannelSpec;
using signals::InputProfile;
using signals::InterpKind;
using signals::Interpolation;
using signals::TimeDomain;

InputChannelSpec channel(std::string name, InterpKind kind, int n, double lo, double hi, double period = 0.0,
                         double duty = 1.0) {
  InputChannelSpec spec;
  spec.name = std::move(name);
  spec.interp.kind = kind;
  spec.interp.pulse_period = period;
  spec.interp.pulse_duty = duty;
  spec.count = n;
  spec.lo = lo;
  spec.hi = hi;
  spec.policy = ControlTimePolicy::EquallySpaced;
  return spec;
}

// Two-room house with a single heater assigned to the colder room while it
// is below the setpoint. Cold outdoor stretches combined with a weak heater
// let the served room drop out of the comfort band.
Benchmark make_heat2r() {
  const double step = 0.05;
  const TimeDomain domain(24.0, step);

  const double k_loss1 = 0.38;
  const double k_loss2 = 0.30;
  const double k_cross = 0.10;
  const double heater_power = 14.0;
  const double setpoint = 21.0;

  auto f = [=](const Eigen::VectorXd& x, const Eigen::VectorXd& u, double, Eigen::VectorXd& dx) {
    const double t1 = x(0), t2 = x(1);
    const double outdoor = u(0), gain = u(1);
    const bool heat_any = t1 < setpoint || t2 < setpoint;
    const bool heat_room1 = heat_any && t1 <= t2;
    const bool heat_room2 = heat_any && !heat_room1;
    dx(0) = k_loss1 * (outdoor - t1) + k_cross * (t2 - t1) + (heat_room1 ? heater_power * gain : 0.0);
    dx(1) = k_loss2 * (outdoor - t2) + k_cross * (t1 - t2) + (heat_room2 ? heater_power * gain : 0.0);
  };
  auto h = [](const Eigen::VectorXd& x, const Eigen::VectorXd&, Eigen::VectorXd& y) {
    y(0) = x(0);
    y(1) = x(1);
  };

  Eigen::VectorXd x0(2);
  x0 << 20.0, 20.0;
  std::vector<InputDecl> inputs{{"outdoor", -2.0, 5.0}, {"heatgain", 0.8, 1.2}};
  auto model = std::make_shared<OdeModel>("heat2r", inputs, std::vector<std::string>{"troom1", "troom2"}, step, x0,
                                          f, h);

  InputProfile profile(domain, {channel("outdoor", InterpKind::Pchip, 4, -2.0, 5.0),
                                channel("heatgain", InterpKind::Constant, 1, 0.8, 1.2)});
  return Benchmark{"heat2r", std::move(model), std::move(profile),
                   "G[2,24]((troom1 > 16.5) & (troom2 > 16.5))", 100, 10};
}

// Throttle-driven longitudinal dynamics with a four-speed gear schedule.
// Sustained high throttle around an upshift point pushes engine speed over
// the envelope.
Benchmark make_autotrans() {
  const double step = 0.05;
  const TimeDomain domain(30.0, step);

  auto gear_of = [](double v) {
    if (v < 15.0) return 0;
    if (v < 28.0) return 1;
    if (v < 45.0) return 2;
    return 3;
  };
  static const double ratio[4] = {4.0, 2.4, 1.6, 1.1};

  auto f = [=](const Eigen::VectorXd& x, const Eigen::VectorXd& u, double, Eigen::VectorXd& dx) {
    const double v = std::max(0.0, x(0));
    const double drive = 0.055 * u(0) * ratio[gear_of(v)];
    const double drag = 0.035 * v + 0.0011 * v * v;
    dx(0) = drive - drag;
  };
  auto h = [=](const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::VectorXd& y) {
    const double v = std::max(0.0, x(0));
    y(0) = v;
    y(1) = 38.0 * v * ratio[gear_of(v)] + 750.0 + 6.5 * u(0);
  };

  Eigen::VectorXd x0(1);
  x0 << 0.0;
  std::vector<InputDecl> inputs{{"throttle", 0.0, 100.0}};
  auto model =
      std::make_shared<OdeModel>("autotrans", inputs, std::vector<std::string>{"speed", "rpm"}, step, x0, f, h);

  InputProfile profile(domain, {channel("throttle", InterpKind::PiecewiseConstant, 7, 0.0, 100.0)});
  return Benchmark{"autotrans", std::move(model), std::move(profile), "G[0,30]((speed < 120) & (rpm < 4100))",
                   1000, 10};
}

// Intake/fueling loop with a lagged mixture sensor and PI trim. Pulse trains
// with large amplitude swings produce transient mixture-error spikes.
Benchmark make_fuelctl() {
  const double step = 0.05;
  const TimeDomain domain(50.0, step);

  const double stoich = 14.7;
  const double sensor_tau = 0.8;
  const double kp = 0.015;
  const double ki = 0.012;

  // States: manifold pressure, measured air/fuel ratio, integral trim.
  auto f = [=](const Eigen::VectorXd& x, const Eigen::VectorXd& u, double, Eigen::VectorXd& dx) {
    const double engspeed = u(0), throttle = u(1);
    const double pressure = std::max(0.0, x(0));
    const double measured = x(1);
    const double trim = x(2);
    const double airflow = 0.9 * pressure * (engspeed / 1000.0);
    const double fuel = std::max(0.05, airflow / stoich + kp * (measured - stoich) + ki * trim);
    const double actual = airflow / fuel;
    dx(0) = 0.45 * throttle - 0.8 * pressure * (engspeed / 1000.0);
    dx(1) = (actual - measured) / sensor_tau;
    dx(2) = measured - stoich;
  };
  auto h = [=](const Eigen::VectorXd& x, const Eigen::VectorXd&, Eigen::VectorXd& y) {
    y(0) = (x(1) - stoich) / stoich;
  };

  Eigen::VectorXd x0(3);
  x0 << 10.0, stoich, 0.0;
  std::vector<InputDecl> inputs{{"engspeed", 900.0, 1100.0}, {"throttle", 0.0, 61.1}};
  auto model = std::make_shared<OdeModel>("fuelctl", inputs, std::vector<std::string>{"aferror"}, step, x0, f, h);

  InputProfile profile(domain, {channel("engspeed", InterpKind::Constant, 1, 900.0, 1100.0),
                                channel("throttle", InterpKind::Pulse, 10, 0.0, 61.1, 5.0, 0.6)});
  return Benchmark{"fuelctl", std::move(model), std::move(profile),
                   "G[5,50]((aferror < 0.2) & (aferror > -0.2))", 100, 10};
}

// Second-order attitude-error dynamics driven by a temperature-dependent
// disturbance torque; hot component temperatures bias the pointing error
// upward until it can cross the requirement threshold.
Benchmark make_satlite(bool full_scale) {
  const double step = full_scale ? 0.0312 : 0.25;
  // Full scale pins the sample count (24 h nominal horizon at 0.0312 s).
  const TimeDomain domain = full_scale ? TimeDomain(2769200 * 0.0312, 0.0312) : TimeDomain(600.0, step);

  const double kp = 0.04;
  const double kd = 0.40;

  auto f = [=](const Eigen::VectorXd& x, const Eigen::VectorXd& u, double, Eigen::VectorXd& dx) {
    const double theta = x(0), omega = x(1);
    const double tmag = u(0) - 15.0, tgyro = u(1) - 15.0, twheel = u(2) - 15.0, ttorq = u(3) - 15.0;
    const double disturbance = 8.0e-4 * tmag + 7.0e-4 * tgyro + 8.0e-4 * twheel + 6.0e-4 * ttorq +
                               6.0e-6 * tmag * twheel;
    dx(0) = omega;
    dx(1) = -kp * theta - kd * omega + disturbance;
  };
  auto h = [](const Eigen::VectorXd& x, const Eigen::VectorXd&, Eigen::VectorXd& y) { y(0) = x(0); };

  Eigen::VectorXd x0(2);
  x0 << 0.3, 0.0;
  std::vector<InputDecl> inputs{{"tmag", -20.0, 50.0},
                                {"tgyro", -15.0, 50.0},
                                {"twheel", -20.0, 50.0},
                                {"ttorq", -20.0, 50.0}};
  auto model = std::make_shared<OdeModel>(full_scale ? "satlite-full" : "satlite", inputs,
                                          std::vector<std::string>{"error"}, step, x0, f, h);

  char req[64];
  std::snprintf(req, sizeof(req), "G[0,%.10g](error < 2)", domain.end_time());
  InputProfile profile(domain, {channel("tmag", InterpKind::Pchip, 16, -20.0, 50.0),
                                channel("tgyro", InterpKind::Pchip, 16, -15.0, 50.0),
                                channel("twheel", InterpKind::Pchip, 16, -20.0, 50.0),
                                channel("ttorq", InterpKind::Pchip, 16, -20.0, 50.0)});
  return Benchmark{full_scale ? "satlite-full" : "satlite", std::move(model), std::move(profile), req, 100, 10};
}

}  // namespace

Benchmark make_benchmark(const std::string& id, bool full_scale) {
  if (id == "heat2r") return make_heat2r();
  if (id == "autotrans") return make_autotrans();
  if (id == "fuelctl") return make_fuelctl();
  if (id == "satlite") return make_satlite(full_scale);
  throw ConfigError("unknown benchmark '" + id + "' (known: heat2r, autotrans, fuelctl, satlite)");
}

const std::vector<std::string>& benchmark_ids() {
  static const std::vector<std::string> ids{"heat2r", "autotrans", "fuelctl", "satlite"};
  return ids;
}

}  // namespace arfal::mut
