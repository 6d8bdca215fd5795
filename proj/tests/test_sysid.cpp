#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "arfal/json_io.hpp"
#include "arfal/sysid.hpp"

using namespace arfal;
using namespace arfal::sysid;
using signals::SampledSignal;
using signals::SignalSet;
using signals::TimeDomain;

namespace {

SignalSet random_input(const TimeDomain& d, Rng& rng, double lo = -1.0, double hi = 1.0,
                       const std::string& name = "u") {
  SignalSet set(d);
  set.add(SampledSignal(
      name, d, Eigen::VectorXd::NullaryExpr(d.sample_count(), [&](Eigen::Index) { return rng.uniform(lo, hi); })));
  return set;
}

// y(t) = a y(t-1) + b u(t-1) + e(t) + c e(t-1), zero initial conditions.
Experiment armax_experiment(const TimeDomain& d, double a, double b, double c, double sigma, Rng& rng) {
  SignalSet u = random_input(d, rng);
  const Eigen::Index n = d.sample_count();
  Eigen::VectorXd y(n), e(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    e(t) = sigma > 0.0 ? sigma * rng.gaussian() : 0.0;
    const double ylag = t >= 1 ? y(t - 1) : 0.0;
    const double ulag = t >= 1 ? u.at(0).values(t - 1) : 0.0;
    const double elag = t >= 1 ? e(t - 1) : 0.0;
    y(t) = a * ylag + b * ulag + e(t) + c * elag;
  }
  SignalSet out(d);
  out.add(SampledSignal("y", d, y));
  return Experiment{std::move(u), std::move(out)};
}

Experiment arx_experiment(const TimeDomain& d, double a, double b, double sigma, Rng& rng) {
  return armax_experiment(d, a, b, 0.0, sigma, rng);
}

struct BjGenerator {
  Eigen::Vector2d f{1.2, -0.36};  // poles at 0.6 (double)
  Eigen::Vector2d b{0.5, 0.3};
  double c = 0.3;
  double d = 0.4;

  Eigen::VectorXd branch(const Eigen::VectorXd& u) const {
    Eigen::VectorXd w(u.size());
    for (Eigen::Index t = 0; t < u.size(); ++t) {
      double acc = 0.0;
      if (t >= 1) acc += f(0) * w(t - 1) + b(0) * u(t - 1);
      if (t >= 2) acc += f(1) * w(t - 2) + b(1) * u(t - 2);
      w(t) = acc;
    }
    return w;
  }

  Experiment experiment(const TimeDomain& dom, double sigma, Rng& rng) const {
    SignalSet u = random_input(dom, rng);
    const Eigen::VectorXd w = branch(u.at(0).values);
    const Eigen::Index n = dom.sample_count();
    Eigen::VectorXd v(n), e(n);
    for (Eigen::Index t = 0; t < n; ++t) {
      e(t) = sigma > 0.0 ? sigma * rng.gaussian() : 0.0;
      v(t) = (t >= 1 ? d * v(t - 1) + c * e(t - 1) : 0.0) + e(t);
    }
    SignalSet out(dom);
    out.add(SampledSignal("y", dom, w + v));
    return Experiment{std::move(u), std::move(out)};
  }
};

struct SsGenerator {
  Eigen::Matrix2d F{{0.8, 0.10}, {0.0, 0.7}};
  Eigen::Vector2d G{1.0, 0.5};
  Eigen::RowVector2d H{1.0, 0.2};
  double D = 0.15;
  Eigen::Vector2d x0{0.5, -0.3};

  Experiment experiment(const TimeDomain& dom, Rng& rng, bool from_x0 = true) const {
    SignalSet u = random_input(dom, rng);
    Eigen::Vector2d x = from_x0 ? x0 : Eigen::Vector2d::Zero();
    const Eigen::Index n = dom.sample_count();
    Eigen::VectorXd y(n);
    for (Eigen::Index t = 0; t < n; ++t) {
      const double ut = u.at(0).values(t);
      y(t) = H * x + D * ut;
      x = F * x + G * ut;
    }
    SignalSet out(dom);
    out.add(SampledSignal("y", dom, y));
    return Experiment{std::move(u), std::move(out)};
  }
};

}  // namespace

TEST_CASE("structure construction and validation") {
  CHECK(to_string(make_structure("arx", {2, 2, 1})) == "arx(2,2,1)");
  CHECK(to_string(make_structure("armax", {2, 2, 2, 1})) == "armax(2,2,2,1)");
  CHECK(to_string(make_structure("bj", {2, 1, 1, 2, 1})) == "bj(2,1,1,2,1)");
  CHECK(to_string(make_structure("ss", {3})) == "ss(3)");
  CHECK_THROWS_AS(make_structure("arx", {2, 2}), ConfigError);
  CHECK_THROWS_AS(make_structure("tf", {1, 1}), ConfigError);
  CHECK_THROWS_AS(make_structure("arx", {0, 0, 1}), StructuralError);
  CHECK_THROWS_AS(make_structure("bj", {0, 1, 1, 2, 1}), StructuralError);
  CHECK_THROWS_AS(make_structure("ss", {0}), StructuralError);
}

TEST_CASE("mse") {
  const TimeDomain d(9.0, 1.0);
  SignalSet a(d), b(d);
  Rng rng(1);
  a.add(SampledSignal("y", d, Eigen::VectorXd::NullaryExpr(10, [&](Eigen::Index) { return rng.uniform01(); })));
  b.add(SampledSignal("y", d, a.at(0).values));

  CHECK(mse(a, b) == 0.0);

  SignalSet c(d);
  c.add(SampledSignal("y", d, a.at(0).values.array() + 2.0));
  CHECK(mse(a, c) == doctest::Approx(4.0));

  // Brute-force double-loop oracle on a random pair.
  SignalSet r1(d), r2(d);
  r1.add(SampledSignal("y", d, Eigen::VectorXd::NullaryExpr(10, [&](Eigen::Index) { return rng.uniform01(); })));
  r1.add(SampledSignal("z", d, Eigen::VectorXd::NullaryExpr(10, [&](Eigen::Index) { return rng.uniform01(); })));
  r2.add(SampledSignal("y", d, Eigen::VectorXd::NullaryExpr(10, [&](Eigen::Index) { return rng.uniform01(); })));
  r2.add(SampledSignal("z", d, Eigen::VectorXd::NullaryExpr(10, [&](Eigen::Index) { return rng.uniform01(); })));
  double acc = 0.0;
  for (const char* name : {"y", "z"}) {
    for (Eigen::Index k = 0; k < 10; ++k) {
      const double diff = r1.by_name(name).values(k) - r2.by_name(name).values(k);
      acc += diff * diff;
    }
  }
  CHECK(mse(r1, r2) == doctest::Approx(acc / 20.0));

  const TimeDomain d2(9.0, 0.5);
  SignalSet other(d2);
  other.add(SampledSignal("y", d2, Eigen::VectorXd::Zero(19)));
  CHECK_THROWS_AS(mse(a, other), StructuralError);
}

TEST_CASE("arx fit") {
  const TimeDomain d(999.0, 1.0);

  SUBCASE("recovers the generator within the published tolerance") {
    Rng rng(42);
    TrainingData data;
    data.add(arx_experiment(d, 0.5, 1.0, 0.01, rng));
    const auto model = fit(Arx{1, 1, 1}, data);
    const auto& po = model.poly()[0];
    CHECK(po.a(0) == doctest::Approx(0.5).epsilon(0.04));
    CHECK(std::abs(po.a(0) - 0.5) < 0.02);
    CHECK(std::abs(po.b[0](0) - 1.0) < 0.02);
    CHECK(model.stable());
  }

  SUBCASE("noiseless fit with matching orders is exact") {
    Rng rng(7);
    TrainingData data;
    data.add(arx_experiment(d, 0.5, 1.0, 0.0, rng));
    const auto model = fit(Arx{1, 1, 1}, data);
    CHECK(one_step_mse(model, data) < 1e-12);
    // Free-run simulation of its own training input reproduces the data.
    const auto sim = simulate(model, data.experiments()[0].inputs);
    CHECK(mse(data.experiments()[0].outputs, sim) < 1e-12);
  }

  SUBCASE("interface preservation") {
    Rng rng(9);
    TrainingData data;
    data.add(arx_experiment(d, 0.3, 0.7, 0.01, rng));
    const auto model = fit(Arx{2, 2, 1}, data);
    CHECK(model.input_names() == std::vector<std::string>{"u"});
    CHECK(model.output_names() == std::vector<std::string>{"y"});
    CHECK(model.step() == 1.0);
  }

  SUBCASE("insufficient data rejected") {
    Rng rng(5);
    TrainingData data;
    data.add(arx_experiment(TimeDomain(20.0, 1.0), 0.5, 1.0, 0.0, rng));
    CHECK_THROWS_AS(fit(Arx{1, 1, 1}, data), StructuralError);  // 21 samples, 2 params, needs > 20 usable rows
  }

  SUBCASE("constant input survives rank deficiency through the ridge") {
    // A constant input makes the u-lag columns collinear with the output
    // lags at steady state; the fit must still return finite coefficients.
    const TimeDomain dc(299.0, 1.0);
    SignalSet u(dc);
    u.add(SampledSignal("u", dc, Eigen::VectorXd::Constant(dc.sample_count(), 2.0)));
    Eigen::VectorXd y(dc.sample_count());
    for (Eigen::Index t = 0; t < dc.sample_count(); ++t) {
      y(t) = 0.5 * (t >= 1 ? y(t - 1) : 0.0) + (t >= 1 ? u.at(0).values(t - 1) : 0.0);
    }
    SignalSet out(dc);
    out.add(SampledSignal("y", dc, y));
    TrainingData data;
    data.add(Experiment{u, out});
    const auto model = fit(Arx{2, 2, 1}, data);
    for (const auto& bj : model.poly()[0].b) CHECK(bj.allFinite());
    CHECK(model.poly()[0].a.allFinite());
    CHECK(one_step_mse(model, data) < 1e-10);
  }

  SUBCASE("unstable generator is fitted and flagged") {
    Rng rng(11);
    TrainingData data;
    data.add(arx_experiment(TimeDomain(200.0, 1.0), 1.02, 0.5, 0.0, rng));
    const auto model = fit(Arx{1, 1, 1}, data);
    CHECK(model.poly()[0].a(0) == doctest::Approx(1.02).epsilon(1e-6));
    CHECK_FALSE(model.stable());
    CHECK(model.spectral_radius() == doctest::Approx(1.02).epsilon(1e-6));
  }
}

TEST_CASE("experiment boundary hygiene matches an explicit-marker oracle") {
  const TimeDomain d(149.0, 1.0);
  Rng rng(21);
  TrainingData data;
  data.add(arx_experiment(d, 0.4, 0.9, 0.02, rng));
  data.add(arx_experiment(d, 0.4, 0.9, 0.02, rng));
  const int na = 1, nb = 1, nk = 1;
  const auto model = fit(Arx{na, nb, nk}, data);

  // Oracle: assemble the regressor by hand, restarting at each experiment
  // boundary, and solve the unregularized normal equations via QR.
  const Eigen::Index skip = std::max(na, nb + nk);
  std::vector<double> rows_y, rows_u, rhs;
  for (const auto& exp : data.experiments()) {
    const auto& y = exp.outputs.at(0).values;
    const auto& u = exp.inputs.at(0).values;
    for (Eigen::Index t = skip; t < y.size(); ++t) {
      rows_y.push_back(y(t - 1));
      rows_u.push_back(u(t - 1));
      rhs.push_back(y(t));
    }
  }
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows_y.size()), 2);
  Eigen::VectorXd b(static_cast<Eigen::Index>(rhs.size()));
  for (std::size_t i = 0; i < rows_y.size(); ++i) {
    X(static_cast<Eigen::Index>(i), 0) = rows_y[i];
    X(static_cast<Eigen::Index>(i), 1) = rows_u[i];
    b(static_cast<Eigen::Index>(i)) = rhs[i];
  }
  const Eigen::Vector2d theta = X.colPivHouseholderQr().solve(b);
  CHECK(model.poly()[0].a(0) == doctest::Approx(theta(0)).epsilon(1e-10));
  CHECK(model.poly()[0].b[0](0) == doctest::Approx(theta(1)).epsilon(1e-10));
}

TEST_CASE("least-squares optimality under random probing") {
  const TimeDomain d(499.0, 1.0);
  Rng rng(23);
  TrainingData data;
  data.add(arx_experiment(d, 0.5, 1.0, 0.05, rng));
  const auto model = fit(Arx{1, 1, 1}, data);
  const double base = one_step_mse(model, data);
  for (int probe = 0; probe < 50; ++probe) {
    PolyOutput po = model.poly()[0];
    po.a(0) += (rng.uniform01() < 0.5 ? -1.0 : 1.0) * 1e-3 * rng.uniform01();
    po.b[0](0) += (rng.uniform01() < 0.5 ? -1.0 : 1.0) * 1e-3 * rng.uniform01();
    const SurrogateModel perturbed(model.structure(), model.step(), model.input_names(), model.output_names(), {po});
    CHECK(one_step_mse(perturbed, data) >= base - 1e-15);
  }
}

TEST_CASE("simulate") {
  const TimeDomain d(199.0, 1.0);
  Rng rng(31);
  TrainingData data;
  data.add(arx_experiment(TimeDomain(999.0, 1.0), 0.5, 1.0, 0.0, rng));
  const auto model = fit(Arx{1, 1, 1}, data);

  SUBCASE("zero input gives zero output") {
    SignalSet zero(d);
    zero.add(SampledSignal("u", d, Eigen::VectorXd::Zero(d.sample_count())));
    const auto out = simulate(model, zero);
    CHECK(out.at(0).values.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("linear structures are homogeneous") {
    SignalSet u1 = random_input(d, rng);
    SignalSet u2(d);
    u2.add(SampledSignal("u", d, 2.0 * u1.at(0).values));
    const auto y1 = simulate(model, u1);
    const auto y2 = simulate(model, u2);
    CHECK((y2.at(0).values - 2.0 * y1.at(0).values).cwiseAbs().maxCoeff() < 1e-9);
    // Stable fit on bounded input stays bounded over the horizon.
    CHECK(model.stable());
    CHECK(y1.at(0).values.cwiseAbs().maxCoeff() <= 1e6);
  }

  SUBCASE("interface mismatch is structural") {
    SignalSet bad(d);
    bad.add(SampledSignal("w", d, Eigen::VectorXd::Zero(d.sample_count())));
    CHECK_THROWS_AS(simulate(model, bad), StructuralError);
  }

  SUBCASE("divergence is reported with the step") {
    PolyOutput po;
    po.a = Eigen::VectorXd::Constant(1, 2.0);  // doubles every step
    po.b = {Eigen::VectorXd::Constant(1, 1.0)};
    po.c = Eigen::VectorXd::Zero(0);
    po.d = Eigen::VectorXd::Zero(0);
    const SurrogateModel unstable(Arx{1, 1, 1}, 1.0, {"u"}, {"y"}, {po});
    CHECK_FALSE(unstable.stable());
    SignalSet ones(d);
    ones.add(SampledSignal("u", d, Eigen::VectorXd::Ones(d.sample_count())));
    CHECK_THROWS_AS(simulate(unstable, ones), DivergenceError);
  }
}

TEST_CASE("armax fit recovers the noise polynomial") {
  const TimeDomain d(3999.0, 1.0);
  Rng rng(51);
  TrainingData data;
  data.add(armax_experiment(d, 0.6, 0.8, 0.4, 0.05, rng));
  const auto model = fit(Armax{1, 1, 1, 1}, data);
  const auto& po = model.poly()[0];
  CHECK(std::abs(po.a(0) - 0.6) < 0.03);
  CHECK(std::abs(po.b[0](0) - 0.8) < 0.03);
  CHECK(std::abs(po.c(0) - 0.4) < 0.08);
  // The armax predictor must beat the plain arx fit on one-step error.
  const auto arx_model = fit(Arx{1, 1, 1}, data);
  CHECK(one_step_mse(model, data) <= one_step_mse(arx_model, data) + 1e-12);
}

TEST_CASE("bj fit against the generator oracle") {
  const BjGenerator gen;
  const TimeDomain d(1999.0, 1.0);
  const double sigma = 0.02;
  Rng rng(61);
  TrainingData data;
  data.add(gen.experiment(d, sigma, rng));
  const auto model = fit(Bj{2, 1, 1, 2, 1}, data);
  // Held-out input: simulation error stays within twice the noise variance.
  Rng held_rng(62);
  const Experiment held = gen.experiment(d, sigma, held_rng);
  const auto sim = simulate(model, held.inputs);
  CHECK(mse(held.outputs, sim) <= 2.0 * sigma * sigma);
  // The deterministic branch coefficients are close to the generator's.
  const auto& po = model.poly()[0];
  CHECK(std::abs(po.f[0](0) - 1.2) < 0.1);
  CHECK(std::abs(po.f[0](1) + 0.36) < 0.1);
  CHECK(std::abs(po.b[0](0) - 0.5) < 0.05);
}

TEST_CASE("subspace fit of a state-space generator") {
  const SsGenerator gen;
  const TimeDomain d(799.0, 1.0);
  Rng rng(71);
  TrainingData data;
  data.add(gen.experiment(d, rng));
  const auto model = fit(StateSpaceDiscrete{2}, data);
  CHECK(model.is_state_space());
  CHECK(model.stable());

  // Training reproduction, including the fitted initial state.
  const auto sim_train = simulate(model, data.experiments()[0].inputs);
  CHECK(mse(data.experiments()[0].outputs, sim_train) < 1e-10);

  // Held-out reproduction from the same initial state.
  Rng held_rng(72);
  const Experiment held = gen.experiment(d, held_rng);
  const auto sim = simulate(model, held.inputs);
  CHECK(mse(held.outputs, sim) < 1e-8);
}

TEST_CASE("refine") {
  const TimeDomain d(299.0, 1.0);

  SUBCASE("duplicate experiment leaves coefficients unchanged") {
    Rng rng(81);
    TrainingData data;
    data.add(arx_experiment(d, 0.5, 1.0, 0.05, rng));
    const auto before = fit(Arx{1, 1, 1}, data);
    const auto after = refine(Arx{1, 1, 1}, data, data.experiments()[0]);
    CHECK(after.poly()[0].a(0) == doctest::Approx(before.poly()[0].a(0)).epsilon(1e-12));
    CHECK(after.poly()[0].b[0](0) == doctest::Approx(before.poly()[0].b[0](0)).epsilon(1e-12));
  }

  SUBCASE("combined one-step error never worsens after a refit") {
    Rng rng(82);
    TrainingData data;
    data.add(arx_experiment(d, 0.5, 1.0, 0.05, rng));
    // The new experiment explores a different input scale.
    Experiment wide = arx_experiment(d, 0.5, 1.0, 0.05, rng);
    wide.inputs = SignalSet(d);
    wide.inputs.add(SampledSignal(
        "u", d, Eigen::VectorXd::NullaryExpr(d.sample_count(), [&](Eigen::Index) { return rng.uniform(-5.0, 5.0); })));
    // Rebuild its outputs from the generator on the new inputs.
    {
      Eigen::VectorXd y(d.sample_count());
      for (Eigen::Index t = 0; t < d.sample_count(); ++t) {
        const double ylag = t >= 1 ? y(t - 1) : 0.0;
        const double ulag = t >= 1 ? wide.inputs.at(0).values(t - 1) : 0.0;
        y(t) = 0.5 * ylag + 1.0 * ulag + 0.05 * rng.gaussian();
      }
      wide.outputs = SignalSet(d);
      wide.outputs.add(SampledSignal("y", d, y));
    }

    const auto old_model = fit(Arx{1, 1, 1}, data);
    const auto new_model = refine(Arx{1, 1, 1}, data, wide);
    const TrainingData combined = data.with(wide);
    CHECK(one_step_mse(new_model, combined) <= one_step_mse(old_model, combined) + 1e-12);
  }

  SUBCASE("training data bookkeeping grows monotonically") {
    Rng rng(83);
    TrainingData data;
    CHECK(data.count() == 0);
    data.add(arx_experiment(d, 0.5, 1.0, 0.0, rng));
    CHECK(data.count() == 1);
    const auto more = data.with(arx_experiment(d, 0.5, 1.0, 0.0, rng));
    CHECK(data.count() == 1);
    CHECK(more.count() == 2);
    CHECK(more.total_samples() == 2 * d.sample_count());
  }

  SUBCASE("mismatched channels rejected") {
    Rng rng(84);
    TrainingData data;
    data.add(arx_experiment(d, 0.5, 1.0, 0.0, rng));
    Experiment other = arx_experiment(d, 0.5, 1.0, 0.0, rng);
    SignalSet renamed(d);
    renamed.add(SampledSignal("w", d, other.inputs.at(0).values));
    other.inputs = renamed;
    CHECK_THROWS_AS(data.with(other), StructuralError);
  }
}

TEST_CASE("surrogate model file round trip") {
  const TimeDomain d(399.0, 1.0);
  Rng rng(91);
  TrainingData data;
  data.add(arx_experiment(d, 0.5, 1.0, 0.01, rng));

  for (const ModelStructure structure :
       {ModelStructure{Arx{2, 2, 1}}, ModelStructure{Armax{1, 1, 1, 1}}, ModelStructure{Bj{1, 1, 1, 1, 1}},
        ModelStructure{StateSpaceDiscrete{2}}}) {
    const auto model = fit(structure, data);
    const auto j = io::to_json(model);
    CHECK(j.at("format") == "arfal-surrogate");
    const auto back = io::surrogate_from_json(j);
    CHECK(structure_name(back.structure()) == structure_name(structure));
    CHECK(back.input_names() == model.input_names());
    CHECK(back.step() == model.step());
    Rng fresh(92);
    const SignalSet probe = random_input(d, fresh);
    const auto y1 = simulate(model, probe);
    const auto y2 = simulate(back, probe);
    CHECK(mse(y1, y2) == 0.0);
  }
}
