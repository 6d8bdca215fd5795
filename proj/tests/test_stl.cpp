#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "arfal/stl.hpp"

using namespace arfal;
using namespace arfal::stl;
using signals::SampledSignal;
using signals::SignalSet;
using signals::TimeDomain;

#include "stl_oracle.hpp"

using test_oracle::bool_eval;
using test_oracle::random_formula;
using test_oracle::random_piecewise_linear_trace;

namespace {

SignalSet single_channel(const std::string& name, const TimeDomain& d, const Eigen::VectorXd& values) {
  SignalSet set(d);
  set.add(SampledSignal(name, d, values));
  return set;
}

}  // namespace

TEST_CASE("parser") {
  const std::vector<std::string> chans{"error", "x", "y"};

  SUBCASE("paper-style globally formula") {
    const auto f = parse_stl("G[0,86400] (error < 2)", chans);
    CHECK(f->kind() == Formula::Kind::Globally);
    CHECK(f->interval_lo() == 0.0);
    CHECK(f->interval_hi() == 86400.0);
    CHECK(f->left()->kind() == Formula::Kind::Atomic);
    CHECK(f->left()->terms().size() == 1);
    CHECK(f->left()->terms()[0].channel == "error");
    CHECK(f->left()->bound() == 2.0);
  }

  SUBCASE("eventually maps directly") {
    const auto f = parse_stl("F[0,10] (x > 7)", chans);
    CHECK(f->kind() == Formula::Kind::Eventually);
    CHECK(f->left()->relation() == Relation::Gt);
  }

  SUBCASE("interval with a > b rejected") {
    CHECK_THROWS_AS(parse_stl("G[5,3] (x < 1)", chans), ParseError);
  }

  SUBCASE("unknown channel with position") {
    try {
      parse_stl("G[0,5] (speed < 1)", chans);
      FAIL("expected parse error");
    } catch (const ParseError& e) {
      CHECK(e.position == 8);
      CHECK(std::string(e.what()).find("speed") != std::string::npos);
    }
  }

  SUBCASE("syntax error carries a position") {
    CHECK_THROWS_AS(parse_stl("G[0,5] (x <)", chans), ParseError);
    CHECK_THROWS_AS(parse_stl("(x < 1", chans), ParseError);
    CHECK_THROWS_AS(parse_stl("x < 1 trailing", chans), ParseError);
  }

  SUBCASE("connectives, weights and until") {
    const auto f = parse_stl("(2*x + 3*y - 1 < 4) -> (x > 0 U[1,2] y >= -1)", chans);
    CHECK(f->kind() == Formula::Kind::Implies);
    CHECK(f->left()->terms().size() == 2);
    CHECK(f->left()->offset() == -1.0);
    CHECK(f->right()->kind() == Formula::Kind::Until);
    const auto g = parse_stl("!(x < 1) & (y < 2) | (x > 3)", chans);
    CHECK(g->kind() == Formula::Kind::Or);
  }
}

TEST_CASE("robustness closed forms") {
  const TimeDomain d(10.0, 1.0);
  const SignalSet trace = single_channel("x", d, Eigen::VectorXd::LinSpaced(11, 0.0, 10.0));

  CHECK(robustness(*parse_stl("G[0,10] (x < 5)", {"x"}), trace) == doctest::Approx(-5.0));
  CHECK(robustness(*parse_stl("F[0,10] (x > 7)", {"x"}), trace) == doctest::Approx(3.0));

  const TimeDomain dl(86400.0, 3600.0);
  const SignalSet err = single_channel("error", dl, Eigen::VectorXd::Constant(25, 1.0));
  CHECK(robustness(*parse_stl("G[0,86400] (error < 2)", {"error"}), err) == doctest::Approx(1.0));
}

TEST_CASE("test objective sign and monotonicity") {
  const TimeDomain d(10.0, 1.0);
  const auto f = parse_stl("G[0,10] (error < 2)", {"error"});
  SignalSet dummy_input(d);
  dummy_input.add(SampledSignal("u", d, Eigen::VectorXd::Zero(11)));

  Eigen::VectorXd violating = Eigen::VectorXd::Constant(11, 1.0);
  violating(4) = 3.0;
  CHECK(test_objective(*f, dummy_input, single_channel("error", d, violating)) == doctest::Approx(-1.0));

  Eigen::VectorXd satisfying = Eigen::VectorXd::Constant(11, 1.2);
  satisfying(7) = 1.5;
  const double margin = test_objective(*f, dummy_input, single_channel("error", d, satisfying));
  CHECK(margin >= 0.5);

  // Brute-force oracle: min over samples of 2 - error(t), for both traces.
  Eigen::VectorXd smaller = satisfying.array() - 0.3;
  const double margin_larger = test_objective(*f, dummy_input, single_channel("error", d, smaller));
  double brute_small = 1e9, brute_large = 1e9;
  for (Eigen::Index k = 0; k < 11; ++k) {
    brute_small = std::min(brute_small, 2.0 - satisfying(k));
    brute_large = std::min(brute_large, 2.0 - smaller(k));
  }
  CHECK(margin == doctest::Approx(brute_small));
  CHECK(margin_larger == doctest::Approx(brute_large));
  CHECK(margin_larger > margin);
}

TEST_CASE("horizon errors") {
  const TimeDomain d(10.0, 1.0);
  const SignalSet trace = single_channel("x", d, Eigen::VectorXd::Zero(11));
  CHECK_THROWS_AS(robustness(*parse_stl("G[0,11] (x < 5)", {"x"}), trace), HorizonError);
  CHECK_THROWS_AS(robustness(*parse_stl("G[0,5] (F[0,6] (x < 5))", {"x"}), trace), HorizonError);
  CHECK_NOTHROW(robustness(*parse_stl("G[0,5] (F[0,5] (x < 5))", {"x"}), trace));
  CHECK_THROWS_AS(robustness(*parse_stl("G[0,5] (x < 5)", {"x"}), trace, 6.0), HorizonError);
  CHECK_NOTHROW(robustness(*parse_stl("G[0,5] (x < 5)", {"x"}), trace, 5.0));
  // Misaligned interval bound.
  CHECK_THROWS_AS(robustness(*parse_stl("G[0,5.5] (x < 5)", {"x"}), trace), StructuralError);
}

TEST_CASE("negation duality is exact") {
  Rng rng(21);
  const std::vector<std::string> chans{"a", "b"};
  const TimeDomain d(9.9, 0.1);
  for (int rep = 0; rep < 200; ++rep) {
    const auto trace = random_piecewise_linear_trace(rng, chans, d);
    const auto f = random_formula(rng, chans, 3, 0.1, 4.0);
    const double r1 = robustness(*f, trace);
    const double r2 = robustness(*Formula::negation(f), trace);
    CHECK(r1 == -r2);
  }
}

TEST_CASE("window monotonicity of G and F") {
  Rng rng(22);
  const TimeDomain d(9.9, 0.1);
  for (int rep = 0; rep < 100; ++rep) {
    const auto trace = random_piecewise_linear_trace(rng, {"a"}, d);
    const auto atom = random_formula(rng, {"a"}, 0, 0.1, 0.0);
    const double g_narrow = robustness(*Formula::globally(0.0, 2.0, atom), trace);
    const double g_wide = robustness(*Formula::globally(0.0, 3.0, atom), trace);
    CHECK(g_wide <= g_narrow + 1e-12);
    const double f_narrow = robustness(*Formula::eventually(0.0, 2.0, atom), trace);
    const double f_wide = robustness(*Formula::eventually(0.0, 3.0, atom), trace);
    CHECK(f_wide >= f_narrow - 1e-12);
  }
}

TEST_CASE("until with a true left side reduces to eventually") {
  Rng rng(23);
  const TimeDomain d(9.9, 0.1);
  // "true" as an always-satisfied atomic: 0*a < 1.
  const auto truthy = Formula::atomic({{0.0, "a"}}, 0.0, Relation::Lt, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    const auto trace = random_piecewise_linear_trace(rng, {"a"}, d);
    const auto psi = random_formula(rng, {"a"}, 1, 0.1, 2.0);
    const double u = robustness(*Formula::until(0.5, 2.0, truthy, psi), trace);
    const double f = robustness(*Formula::eventually(0.5, 2.0, psi), trace);
    // min(1, f) accounts for the constant-true robustness of the left side.
    CHECK(u == doctest::Approx(std::min(1.0, f)));
  }
}

TEST_CASE("sign soundness against the boolean oracle") {
  Rng rng(24);
  const std::vector<std::string> chans{"a", "b"};
  const TimeDomain d(9.9, 0.1);
  int checked = 0;
  for (int rep = 0; rep < 500; ++rep) {
    const auto trace = random_piecewise_linear_trace(rng, chans, d);
    const auto f = random_formula(rng, chans, 3, 0.1, 4.0);
    const double rob = robustness(*f, trace);
    if (std::abs(rob) <= 1e-9) continue;
    ++checked;
    CHECK(bool_eval(*f, trace, 0) == (rob > 0.0));
  }
  CHECK(checked > 400);
}
