#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "arfal/benchmarks.hpp"
#include "arfal/json_io.hpp"
#include "arfal/model.hpp"
#include "arfal/search.hpp"
#include "arfal/stl.hpp"

using namespace arfal;
using namespace arfal::mut;
using signals::SampledSignal;
using signals::SignalSet;
using signals::TimeDomain;

namespace {

SignalSet constant_input(const std::vector<InputDecl>& decls, const TimeDomain& d, double value) {
  SignalSet set(d);
  for (const auto& in : decls) set.add(SampledSignal(in.name, d, Eigen::VectorXd::Constant(d.sample_count(), value)));
  return set;
}

std::shared_ptr<OdeModel> decay_model(double step, double integrator_step) {
  Eigen::VectorXd x0(1);
  x0 << 1.0;
  return std::make_shared<OdeModel>(
      "decay", std::vector<InputDecl>{{"u", 0.0, 1.0}}, std::vector<std::string>{"x"}, step, x0,
      [](const Eigen::VectorXd& x, const Eigen::VectorXd&, double, Eigen::VectorXd& dx) { dx(0) = -x(0); },
      [](const Eigen::VectorXd& x, const Eigen::VectorXd&, Eigen::VectorXd& y) { y(0) = x(0); }, integrator_step);
}

double sample_violation_rate(const Benchmark& bench, int samples, std::uint64_t seed) {
  const auto formula = stl::parse_stl(bench.requirement, bench.model->output_names());
  Rng rng(seed);
  int violations = 0;
  for (int i = 0; i < samples; ++i) {
    const auto candidate = search::generate(bench.profile, rng);
    const auto output = bench.model->execute(candidate.rendered);
    if (stl::test_objective(*formula, candidate.rendered, output) <= 0.0) ++violations;
  }
  return static_cast<double>(violations) / static_cast<double>(samples);
}

}  // namespace

TEST_CASE("rk4 equilibrium stays put") {
  Eigen::VectorXd x0(1);
  x0 << 3.25;
  OdeModel model(
      "still", {{"u", 0.0, 1.0}}, {"x"}, 0.1, x0,
      [](const Eigen::VectorXd&, const Eigen::VectorXd&, double, Eigen::VectorXd& dx) { dx(0) = 0.0; },
      [](const Eigen::VectorXd& x, const Eigen::VectorXd&, Eigen::VectorXd& y) { y(0) = x(0); });
  const TimeDomain d(5.0, 0.1);
  const auto out = model.execute(constant_input(model.inputs(), d, 0.0));
  for (Eigen::Index k = 0; k < d.sample_count(); ++k) CHECK(out.at(0).values(k) == 3.25);
}

TEST_CASE("rk4 matches the analytic exponential") {
  const auto model = decay_model(0.1, 1e-3);
  const TimeDomain d(1.0, 0.1);
  const auto out = model->execute(constant_input(model->inputs(), d, 0.0));
  CHECK(std::abs(out.at(0).values(10) - std::exp(-1.0)) < 1e-6);
}

TEST_CASE("rk4 error scales as step^4") {
  const TimeDomain d(1.0, 0.1);
  auto error_at = [&](double h) {
    const auto out = decay_model(0.1, h)->execute(constant_input({{"u", 0.0, 1.0}}, d, 0.0));
    return std::abs(out.at(0).values(10) - std::exp(-1.0));
  };
  const double e1 = error_at(0.1);
  const double e2 = error_at(0.05);
  const double ratio = e1 / e2;
  // Richardson: halving the step should shrink the error by about 2^4.
  CHECK(ratio > 8.0);
  CHECK(ratio < 32.0);
}

TEST_CASE("execute is deterministic and validates the interface") {
  const auto bench = make_benchmark("heat2r");
  Rng rng(5);
  const auto candidate = search::generate(bench.profile, rng);
  const auto out1 = bench.model->execute(candidate.rendered);
  const auto out2 = bench.model->execute(candidate.rendered);
  for (Eigen::Index c = 0; c < out1.size(); ++c) CHECK(out1.at(c).values == out2.at(c).values);

  // Wrong channel set rejected.
  const TimeDomain d(24.0, 0.05);
  CHECK_THROWS_AS(bench.model->execute(constant_input({{"bogus", 0, 1}}, d, 0.0)), StructuralError);
  // Wrong rate rejected.
  const TimeDomain d2(24.0, 0.1);
  SignalSet wrong_rate(d2);
  wrong_rate.add(SampledSignal("outdoor", d2, Eigen::VectorXd::Zero(d2.sample_count())));
  wrong_rate.add(SampledSignal("heatgain", d2, Eigen::VectorXd::Ones(d2.sample_count())));
  CHECK_THROWS_AS(bench.model->execute(wrong_rate), StructuralError);
}

TEST_CASE("passthrough model returns its input") {
  PassthroughModel model("pass", {{"u", -2.0, 5.0}}, 0.5);
  const TimeDomain d(5.0, 0.5);
  Rng rng(2);
  SignalSet in(d);
  in.add(SampledSignal("u", d,
                       Eigen::VectorXd::NullaryExpr(d.sample_count(), [&](Eigen::Index) { return rng.uniform01(); })));
  const auto out = model.execute(in);
  CHECK(out.at(0).name == "y_u");
  CHECK(out.at(0).values == in.at(0).values);
}

TEST_CASE("cost wrapper is semantically transparent") {
  const auto bench = make_benchmark("heat2r");
  CostWrapper wrapped(bench.model, 3);
  CHECK(wrapped.cost_factor() == 3);
  CHECK(wrapped.inputs().size() == bench.model->inputs().size());
  Rng rng(9);
  const auto candidate = search::generate(bench.profile, rng);
  const auto a = bench.model->execute(candidate.rendered);
  const auto b = wrapped.execute(candidate.rendered);
  double sq = 0.0;
  Eigen::Index n = 0;
  for (Eigen::Index c = 0; c < a.size(); ++c) {
    sq += (a.at(c).values - b.by_name(a.at(c).name).values).squaredNorm();
    n += a.at(c).values.size();
  }
  CHECK(sq / double(n) < 1e-18);
}

TEST_CASE("benchmark registry matches the published interface shapes") {
  for (const auto& id : benchmark_ids()) {
    const auto bench = make_benchmark(id);
    CHECK(bench.model->id() == id);
    CHECK(bench.profile.channels().size() == bench.model->inputs().size());
    CHECK_NOTHROW(stl::parse_stl(bench.requirement, bench.model->output_names()));
  }
  CHECK_THROWS_AS(make_benchmark("nope"), ConfigError);

  const auto heat = make_benchmark("heat2r");
  CHECK(heat.profile.domain().end_time() == 24.0);
  CHECK(heat.profile.channels()[0].interp.kind == signals::InterpKind::Pchip);
  CHECK(heat.profile.channels()[0].count == 4);
  CHECK(heat.profile.channels()[0].lo == -2.0);
  CHECK(heat.profile.channels()[0].hi == 5.0);
  CHECK(heat.profile.channels()[1].interp.kind == signals::InterpKind::Constant);
  CHECK(heat.profile.channels()[1].count == 1);
  CHECK(heat.default_max == 100);

  const auto at = make_benchmark("autotrans");
  CHECK(at.profile.domain().end_time() == 30.0);
  CHECK(at.profile.channels()[0].interp.kind == signals::InterpKind::PiecewiseConstant);
  CHECK(at.profile.channels()[0].count == 7);
  CHECK(at.profile.channels()[0].hi == 100.0);
  CHECK(at.default_max == 1000);

  const auto fuel = make_benchmark("fuelctl");
  CHECK(fuel.profile.domain().end_time() == 50.0);
  CHECK(fuel.profile.channels()[0].interp.kind == signals::InterpKind::Constant);
  CHECK(fuel.profile.channels()[0].lo == 900.0);
  CHECK(fuel.profile.channels()[0].hi == 1100.0);
  CHECK(fuel.profile.channels()[1].interp.kind == signals::InterpKind::Pulse);
  CHECK(fuel.profile.channels()[1].count == 10);
  CHECK(fuel.profile.channels()[1].hi == 61.1);

  const auto sat = make_benchmark("satlite");
  CHECK(sat.profile.channels().size() == 4);
  for (const auto& ch : sat.profile.channels()) {
    CHECK(ch.interp.kind == signals::InterpKind::Pchip);
    CHECK(ch.count == 16);
  }
  CHECK(sat.profile.channels()[0].lo == -20.0);
  CHECK(sat.profile.channels()[1].lo == -15.0);
  CHECK(sat.profile.channels()[1].hi == 50.0);
}

TEST_CASE("full-scale satlite pins the published sample count") {
  const auto sat = make_benchmark("satlite", true);
  CHECK(sat.profile.domain().intervals() == 2769200);
  CHECK(sat.profile.domain().step() == doctest::Approx(0.0312));
}

TEST_CASE("certified fixtures replay to the expected sign") {
  for (const auto& id : benchmark_ids()) {
    const auto bench = make_benchmark(id);
    const auto formula = stl::parse_stl(bench.requirement, bench.model->output_names());
    for (const char* kind : {"violating", "satisfying"}) {
      const std::string path = std::string(FIXTURE_DIR) + "/" + id + "_" + kind + ".json";
      std::ifstream in(path);
      REQUIRE_MESSAGE(in.good(), "missing fixture ", path);
      io::json j = io::json::parse(in);
      const auto candidate = io::candidate_from_json(j, bench.profile);
      const auto output = bench.model->execute(candidate.rendered);
      const double objective = stl::test_objective(*formula, candidate.rendered, output);
      if (std::string(kind) == "violating") {
        CHECK_MESSAGE(objective <= 0.0, id, " violating fixture gave ", objective);
      } else {
        CHECK_MESSAGE(objective > 0.0, id, " satisfying fixture gave ", objective);
      }
    }
  }
}

TEST_CASE("violation sets are non-trivial" * doctest::timeout(600)) {
  // Uniform random sampling must hit violations, but not too often.
  for (const auto& id : benchmark_ids()) {
    const auto bench = make_benchmark(id);
    const double rate = sample_violation_rate(bench, 1000, 20260811);
    CHECK_MESSAGE(rate > 0.0, id, " violation rate is zero");
    CHECK_MESSAGE(rate < 0.2, id, " violation rate ", rate, " too high");
  }
}
