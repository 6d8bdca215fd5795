#include "arfal/sysid.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace arfal::sysid {

namespace {

constexpr double kDivergenceLimit = 1e12;
constexpr double kFilterBlowup = 1e30;

}  // namespace

// ---------------------------------------------------------------------------
// Structures

void validate(const ModelStructure& structure) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Arx>) {
          if (s.na < 0 || s.nb < 0 || s.nk < 0) throw StructuralError("arx: negative order");
          if (s.na + s.nb < 1) throw StructuralError("arx: na + nb must be >= 1");
        } else if constexpr (std::is_same_v<T, Armax>) {
          if (s.na < 0 || s.nb < 0 || s.nc < 0 || s.nk < 0) throw StructuralError("armax: negative order");
          if (s.na + s.nb < 1) throw StructuralError("armax: na + nb must be >= 1");
        } else if constexpr (std::is_same_v<T, Bj>) {
          if (s.nb < 1) throw StructuralError("bj: nb must be >= 1");
          if (s.nc < 0 || s.nd < 0 || s.nf < 0 || s.nk < 0) throw StructuralError("bj: negative order");
        } else {
          if (s.n < 1) throw StructuralError("ss: order must be >= 1");
        }
      },
      structure);
}

std::string structure_name(const ModelStructure& structure) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Arx>) return "arx";
        if constexpr (std::is_same_v<T, Armax>) return "armax";
        if constexpr (std::is_same_v<T, Bj>) return "bj";
        if constexpr (std::is_same_v<T, StateSpaceDiscrete>) return "ss";
      },
      structure);
}

std::vector<int> structure_orders(const ModelStructure& structure) {
  return std::visit(
      [](const auto& s) -> std::vector<int> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Arx>) return {s.na, s.nb, s.nk};
        if constexpr (std::is_same_v<T, Armax>) return {s.na, s.nb, s.nc, s.nk};
        if constexpr (std::is_same_v<T, Bj>) return {s.nb, s.nc, s.nd, s.nf, s.nk};
        if constexpr (std::is_same_v<T, StateSpaceDiscrete>) return {s.n};
      },
      structure);
}

std::string to_string(const ModelStructure& structure) {
  std::ostringstream os;
  os << structure_name(structure) << "(";
  const auto orders = structure_orders(structure);
  for (std::size_t i = 0; i < orders.size(); ++i) os << (i ? "," : "") << orders[i];
  os << ")";
  return os.str();
}

ModelStructure make_structure(const std::string& name, const std::vector<int>& orders) {
  auto need = [&](std::size_t k, const char* shape) {
    if (orders.size() != k) {
      throw ConfigError("structure " + name + " takes " + std::to_string(k) + " orders " + shape);
    }
  };
  ModelStructure s;
  if (name == "arx") {
    need(3, "(na,nb,nk)");
    s = Arx{orders[0], orders[1], orders[2]};
  } else if (name == "armax") {
    need(4, "(na,nb,nc,nk)");
    s = Armax{orders[0], orders[1], orders[2], orders[3]};
  } else if (name == "bj") {
    need(5, "(nb,nc,nd,nf,nk)");
    s = Bj{orders[0], orders[1], orders[2], orders[3], orders[4]};
  } else if (name == "ss") {
    need(1, "(n)");
    s = StateSpaceDiscrete{orders[0]};
  } else {
    throw ConfigError("unknown model structure '" + name + "' (use arx|armax|bj|ss)");
  }
  validate(s);
  return s;
}

// ---------------------------------------------------------------------------
// Training data

void TrainingData::add(Experiment experiment) {
  if (experiment.inputs.empty() || experiment.outputs.empty()) {
    throw StructuralError("training data: experiment needs input and output channels");
  }
  if (!experiment.inputs.domain().same_grid(experiment.outputs.domain())) {
    throw StructuralError("training data: input and output grids differ within one experiment");
  }
  if (!experiments_.empty()) {
    const auto& first = experiments_.front();
    if (std::abs(first.inputs.domain().step() - experiment.inputs.domain().step()) > 1e-9) {
      throw StructuralError("training data: experiments sampled at different rates");
    }
    if (first.inputs.channel_names() != experiment.inputs.channel_names() ||
        first.outputs.channel_names() != experiment.outputs.channel_names()) {
      throw StructuralError("training data: experiment channel sets differ");
    }
  }
  experiments_.push_back(std::move(experiment));
}

TrainingData TrainingData::with(Experiment experiment) const {
  TrainingData copy = *this;
  copy.add(std::move(experiment));
  return copy;
}

Eigen::Index TrainingData::total_samples() const {
  Eigen::Index total = 0;
  for (const auto& e : experiments_) total += e.inputs.domain().sample_count();
  return total;
}

double TrainingData::step() const {
  if (experiments_.empty()) throw StructuralError("training data: empty");
  return experiments_.front().inputs.domain().step();
}

// ---------------------------------------------------------------------------
// Shared numerics

namespace {

// Least squares via column-pivoted QR; falls back to a mean-scaled ridge on
// the normal equations when the regressor is column-rank deficient.
Eigen::VectorXd solve_ls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ModelStructure& structure) {
  if (X.rows() < X.cols()) {
    throw SingularFitError("singular fit for " + to_string(structure) + ": fewer rows than parameters");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  Eigen::VectorXd theta;
  if (qr.rank() == X.cols()) {
    theta = qr.solve(y);
  } else {
    const double lambda = 1e-8 * static_cast<double>(X.rows());
    Eigen::MatrixXd gram = X.transpose() * X;
    gram.diagonal().array() += lambda;
    theta = gram.ldlt().solve(X.transpose() * y);
  }
  if (!theta.allFinite()) {
    throw SingularFitError("singular fit for " + to_string(structure) + ": non-finite coefficients");
  }
  return theta;
}

double companion_radius(const Eigen::VectorXd& additive_coeffs) {
  const Eigen::Index n = additive_coeffs.size();
  if (n == 0) return 0.0;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  companion.row(0) = additive_coeffs.transpose();
  for (Eigen::Index i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  return companion.eigenvalues().cwiseAbs().maxCoeff();
}

// y(t) = x(t) + sum_i coeffs(i) y(t-1-i); 1/(1 - sum c z^-i) in standard form.
Eigen::VectorXd ar_filter(const Eigen::VectorXd& coeffs, const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd y(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    double acc = x(t);
    for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
      const Eigen::Index k = t - 1 - i;
      if (k >= 0) acc += coeffs(i) * y(k);
    }
    y(t) = std::clamp(acc, -kFilterBlowup, kFilterBlowup);
  }
  return y;
}

// y(t) = x(t) - sum_i coeffs(i) y(t-1-i); 1/(1 + sum c z^-i) in standard form.
Eigen::VectorXd inv_ma_filter(const Eigen::VectorXd& coeffs, const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd y(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    double acc = x(t);
    for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
      const Eigen::Index k = t - 1 - i;
      if (k >= 0) acc -= coeffs(i) * y(k);
    }
    y(t) = std::clamp(acc, -kFilterBlowup, kFilterBlowup);
  }
  return y;
}

// z = (D/C) x with D = 1 - sum d z^-i and C = 1 + sum c z^-i:
//   z(t) = x(t) - sum d_i x(t-i) - sum c_i z(t-i)
Eigen::VectorXd dc_filter(const Eigen::VectorXd& d, const Eigen::VectorXd& c, const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd z(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    double acc = x(t);
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      const Eigen::Index k = t - 1 - i;
      if (k >= 0) acc -= d(i) * x(k);
    }
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      const Eigen::Index k = t - 1 - i;
      if (k >= 0) acc -= c(i) * z(k);
    }
    z(t) = std::clamp(acc, -kFilterBlowup, kFilterBlowup);
  }
  return z;
}

double value_or_zero(const Eigen::VectorXd& v, Eigen::Index k) { return k >= 0 && k < v.size() ? v(k) : 0.0; }

struct Dimensions {
  Eigen::Index m = 0;  // inputs
  Eigen::Index p = 0;  // outputs
};

Dimensions dims_of(const TrainingData& data) {
  const auto& e = data.experiments().front();
  return {e.inputs.size(), e.outputs.size()};
}

void check_rows(const ModelStructure& structure, Eigen::Index usable_rows, Eigen::Index params) {
  if (params < 1) throw StructuralError("fit " + to_string(structure) + ": structure has no parameters");
  if (usable_rows <= 10 * params) {
    throw StructuralError("fit " + to_string(structure) + ": " + std::to_string(usable_rows) +
                          " usable rows for " + std::to_string(params) + " parameters (need > 10x)");
  }
}

// ---------------------------------------------------------------------------
// arx / armax

// Rows skipped at the head of each experiment so every lag stays inside it.
Eigen::Index skip_rows(const ModelStructure& structure) {
  return std::visit(
      [](const auto& s) -> Eigen::Index {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Arx>) {
          return std::max(s.na, s.nb + s.nk);
        } else if constexpr (std::is_same_v<T, Armax>) {
          return std::max({s.na, s.nb + s.nk, s.nc});
        } else if constexpr (std::is_same_v<T, Bj>) {
          return std::max({s.nb + s.nk, s.nf + s.nk, s.nc, s.nd});
        } else {
          return s.n + 2;
        }
      },
      structure);
}

// Regressor row for output `out` at sample t: own output lags, then input
// lags per channel, then (armax) residual lags.
void fill_poly_row(Eigen::MatrixXd& X, Eigen::Index row, const Experiment& exp, Eigen::Index out, Eigen::Index t,
                   int na, int nb, int nk, const Eigen::VectorXd* residuals, int nc) {
  Eigen::Index col = 0;
  const auto& y = exp.outputs.at(out).values;
  for (int i = 1; i <= na; ++i) X(row, col++) = value_or_zero(y, t - i);
  for (Eigen::Index j = 0; j < exp.inputs.size(); ++j) {
    const auto& u = exp.inputs.at(j).values;
    for (int i = 0; i < nb; ++i) X(row, col++) = value_or_zero(u, t - nk - i);
  }
  if (residuals != nullptr) {
    for (int i = 1; i <= nc; ++i) X(row, col++) = value_or_zero(*residuals, t - i);
  }
}

struct ArxFit {
  Eigen::VectorXd a;
  std::vector<Eigen::VectorXd> b;
  Eigen::VectorXd c;
};

ArxFit unpack_poly_theta(const Eigen::VectorXd& theta, Eigen::Index m, int na, int nb, int nc) {
  ArxFit fit;
  Eigen::Index at = 0;
  fit.a = theta.segment(at, na);
  at += na;
  for (Eigen::Index j = 0; j < m; ++j) {
    fit.b.push_back(theta.segment(at, nb));
    at += nb;
  }
  fit.c = theta.segment(at, nc);
  return fit;
}

// One-step residual recursion for armax coefficients (arx when nc = 0).
Eigen::VectorXd poly_residuals(const Experiment& exp, Eigen::Index out, const ArxFit& fit, int na, int nb, int nk) {
  const auto& y = exp.outputs.at(out).values;
  const Eigen::Index n = y.size();
  Eigen::VectorXd e(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    double pred = 0.0;
    for (int i = 1; i <= na; ++i) pred += fit.a(i - 1) * value_or_zero(y, t - i);
    for (Eigen::Index j = 0; j < exp.inputs.size(); ++j) {
      const auto& u = exp.inputs.at(static_cast<Eigen::Index>(j)).values;
      for (int i = 0; i < nb; ++i) pred += fit.b[static_cast<std::size_t>(j)](i) * value_or_zero(u, t - nk - i);
    }
    for (Eigen::Index i = 1; i <= fit.c.size(); ++i) pred += fit.c(i - 1) * value_or_zero(e, t - i);
    e(t) = std::clamp(y(t) - pred, -kFilterBlowup, kFilterBlowup);
  }
  return e;
}

std::vector<PolyOutput> fit_arx_like(const ModelStructure& structure, const TrainingData& data, int na, int nb,
                                     int nc, int nk) {
  const auto [m, p] = dims_of(data);
  const Eigen::Index skip = skip_rows(structure);
  const Eigen::Index params = na + m * nb + nc;

  Eigen::Index usable = 0;
  for (const auto& exp : data.experiments()) {
    usable += std::max<Eigen::Index>(0, exp.outputs.domain().sample_count() - skip);
  }
  check_rows(structure, usable, params);

  std::vector<PolyOutput> result(static_cast<std::size_t>(p));
  for (Eigen::Index out = 0; out < p; ++out) {
    // Plain least squares first; this is the full fit for arx and the
    // initializer for the pseudo-linear armax iteration.
    const Eigen::Index arx_params = na + m * nb;
    Eigen::MatrixXd X(usable, arx_params);
    Eigen::VectorXd rhs(usable);
    Eigen::Index r = 0;
    for (const auto& exp : data.experiments()) {
      const Eigen::Index n = exp.outputs.domain().sample_count();
      for (Eigen::Index t = skip; t < n; ++t, ++r) {
        fill_poly_row(X, r, exp, out, t, na, nb, nk, nullptr, 0);
        rhs(r) = exp.outputs.at(out).values(t);
      }
    }
    Eigen::VectorXd theta = solve_ls(X, rhs, structure);
    ArxFit fit = unpack_poly_theta(theta, m, na, nb, 0);
    fit.c = Eigen::VectorXd::Zero(nc);

    if (nc > 0) {
      // Extended least squares: alternate residual estimation and refits
      // with the residual lags appended to the regressor.
      Eigen::MatrixXd Xe(usable, params);
      Eigen::VectorXd prev = Eigen::VectorXd::Zero(params);
      for (int it = 0; it < 50; ++it) {
        std::vector<Eigen::VectorXd> residuals;
        residuals.reserve(data.experiments().size());
        for (const auto& exp : data.experiments()) residuals.push_back(poly_residuals(exp, out, fit, na, nb, nk));

        Eigen::Index rr = 0;
        std::size_t ei = 0;
        for (const auto& exp : data.experiments()) {
          const Eigen::Index n = exp.outputs.domain().sample_count();
          for (Eigen::Index t = skip; t < n; ++t, ++rr) {
            fill_poly_row(Xe, rr, exp, out, t, na, nb, nk, &residuals[ei], nc);
            rhs(rr) = exp.outputs.at(out).values(t);
          }
          ++ei;
        }
        const Eigen::VectorXd theta_e = solve_ls(Xe, rhs, structure);
        const double change = (theta_e - prev).cwiseAbs().maxCoeff();
        prev = theta_e;
        fit = unpack_poly_theta(theta_e, m, na, nb, nc);
        if (change < 1e-6) break;
      }
    }

    PolyOutput& po = result[static_cast<std::size_t>(out)];
    po.a = fit.a;
    po.b = fit.b;
    po.c = fit.c;
    po.d = Eigen::VectorXd::Zero(0);
    po.f.clear();
  }
  return result;
}

// ---------------------------------------------------------------------------
// Box-Jenkins prediction-error minimization

struct BjWork {
  // Residuals and filtered signals per experiment for the current theta.
  std::vector<Eigen::VectorXd> eps;   // innovations
  std::vector<Eigen::VectorXd> v;     // y - sum_j w_j
  std::vector<std::vector<Eigen::VectorXd>> w;  // simulated input branches
  double sse = std::numeric_limits<double>::infinity();
};

struct BjTheta {
  std::vector<Eigen::VectorXd> b, f;  // per input
  Eigen::VectorXd c, d;

  Eigen::VectorXd pack() const {
    Eigen::Index total = c.size() + d.size();
    for (const auto& bi : b) total += bi.size();
    for (const auto& fi : f) total += fi.size();
    Eigen::VectorXd out(total);
    Eigen::Index at = 0;
    for (const auto& bi : b) {
      out.segment(at, bi.size()) = bi;
      at += bi.size();
    }
    for (const auto& fi : f) {
      out.segment(at, fi.size()) = fi;
      at += fi.size();
    }
    out.segment(at, c.size()) = c;
    at += c.size();
    out.segment(at, d.size()) = d;
    return out;
  }

  static BjTheta unpack(const Eigen::VectorXd& theta, Eigen::Index m, const Bj& s) {
    BjTheta t;
    Eigen::Index at = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      t.b.push_back(theta.segment(at, s.nb));
      at += s.nb;
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      t.f.push_back(theta.segment(at, s.nf));
      at += s.nf;
    }
    t.c = theta.segment(at, s.nc);
    at += s.nc;
    t.d = theta.segment(at, s.nd);
    return t;
  }
};

Eigen::VectorXd bj_branch(const Eigen::VectorXd& u, const Eigen::VectorXd& b, const Eigen::VectorXd& f, int nk) {
  const Eigen::Index n = u.size();
  Eigen::VectorXd w(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i) acc += f(i) * value_or_zero(w, t - 1 - i);
    for (Eigen::Index i = 0; i < b.size(); ++i) acc += b(i) * value_or_zero(u, t - nk - i);
    w(t) = std::clamp(acc, -kFilterBlowup, kFilterBlowup);
  }
  return w;
}

BjWork bj_evaluate(const BjTheta& theta, const TrainingData& data, Eigen::Index out, const Bj& s,
                   Eigen::Index skip) {
  BjWork work;
  work.sse = 0.0;
  for (const auto& exp : data.experiments()) {
    const auto& y = exp.outputs.at(out).values;
    const Eigen::Index n = y.size();
    std::vector<Eigen::VectorXd> w;
    Eigen::VectorXd v = y;
    for (Eigen::Index j = 0; j < exp.inputs.size(); ++j) {
      w.push_back(bj_branch(exp.inputs.at(j).values, theta.b[static_cast<std::size_t>(j)],
                            theta.f[static_cast<std::size_t>(j)], s.nk));
      v -= w.back();
    }
    const Eigen::VectorXd eps = dc_filter(theta.d, theta.c, v);
    for (Eigen::Index t = skip; t < n; ++t) work.sse += eps(t) * eps(t);
    work.eps.push_back(eps);
    work.v.push_back(v);
    work.w.push_back(std::move(w));
  }
  if (!std::isfinite(work.sse) || work.sse >= kFilterBlowup) {
    work.sse = std::numeric_limits<double>::infinity();
  }
  return work;
}

std::vector<PolyOutput> fit_bj(const Bj& s, const TrainingData& data) {
  const ModelStructure structure = s;
  const auto [m, p] = dims_of(data);
  const Eigen::Index skip = skip_rows(structure);
  const Eigen::Index params = m * (s.nb + s.nf) + s.nc + s.nd;

  Eigen::Index usable = 0;
  for (const auto& exp : data.experiments()) {
    usable += std::max<Eigen::Index>(0, exp.outputs.domain().sample_count() - skip);
  }
  check_rows(structure, usable, params);

  // Initialize from an arx fit of matching dynamic order: F from the a
  // coefficients (shared across inputs), B straight from the arx b's.
  const ModelStructure init_structure = Arx{s.nf, s.nb, s.nk};
  const auto init = fit_arx_like(init_structure, data, s.nf, s.nb, 0, s.nk);

  std::vector<PolyOutput> result(static_cast<std::size_t>(p));
  for (Eigen::Index out = 0; out < p; ++out) {
    const auto& po_init = init[static_cast<std::size_t>(out)];
    BjTheta theta;
    for (Eigen::Index j = 0; j < m; ++j) {
      theta.b.push_back(po_init.b[static_cast<std::size_t>(j)]);
      theta.f.push_back(po_init.a);
    }
    theta.c = Eigen::VectorXd::Zero(s.nc);
    theta.d = Eigen::VectorXd::Zero(s.nd);

    BjWork work = bj_evaluate(theta, data, out, s, skip);
    double mu = 1e-3;

    for (int it = 0; it < 50; ++it) {
      if (!std::isfinite(work.sse)) break;
      // Jacobian of the innovations wrt theta, assembled per experiment.
      Eigen::MatrixXd J = Eigen::MatrixXd::Zero(usable, params);
      Eigen::VectorXd eps_rows(usable);
      Eigen::Index r0 = 0;
      std::size_t ei = 0;
      for (const auto& exp : data.experiments()) {
        const Eigen::Index n = exp.outputs.at(out).values.size();
        std::vector<Eigen::VectorXd> dc_p(static_cast<std::size_t>(m)), dc_q(static_cast<std::size_t>(m));
        for (Eigen::Index j = 0; j < m; ++j) {
          const Eigen::VectorXd pj = ar_filter(theta.f[static_cast<std::size_t>(j)], exp.inputs.at(j).values);
          const Eigen::VectorXd qj =
              ar_filter(theta.f[static_cast<std::size_t>(j)], work.w[ei][static_cast<std::size_t>(j)]);
          dc_p[static_cast<std::size_t>(j)] = dc_filter(theta.d, theta.c, pj);
          dc_q[static_cast<std::size_t>(j)] = dc_filter(theta.d, theta.c, qj);
        }
        const Eigen::VectorXd gamma = inv_ma_filter(theta.c, work.eps[ei]);
        const Eigen::VectorXd eta = inv_ma_filter(theta.c, work.v[ei]);

        for (Eigen::Index t = skip; t < n; ++t) {
          const Eigen::Index r = r0 + (t - skip);
          Eigen::Index col = 0;
          for (Eigen::Index j = 0; j < m; ++j) {
            for (int i = 0; i < s.nb; ++i) {
              J(r, col++) = -value_or_zero(dc_p[static_cast<std::size_t>(j)], t - s.nk - i);
            }
          }
          for (Eigen::Index j = 0; j < m; ++j) {
            for (int i = 1; i <= s.nf; ++i) {
              J(r, col++) = -value_or_zero(dc_q[static_cast<std::size_t>(j)], t - i);
            }
          }
          for (int i = 1; i <= s.nc; ++i) J(r, col++) = -value_or_zero(gamma, t - i);
          for (int i = 1; i <= s.nd; ++i) J(r, col++) = -value_or_zero(eta, t - i);
          eps_rows(r) = work.eps[ei](t);
        }
        r0 += std::max<Eigen::Index>(0, n - skip);
        ++ei;
      }

      const Eigen::MatrixXd JtJ = J.transpose() * J;
      const Eigen::VectorXd g = J.transpose() * eps_rows;
      const Eigen::VectorXd packed = theta.pack();

      bool stepped = false;
      double step_size = 0.0;
      for (int attempt = 0; attempt < 10; ++attempt) {
        Eigen::MatrixXd damped = JtJ;
        damped.diagonal().array() += mu;
        const Eigen::VectorXd delta = damped.ldlt().solve(-g);
        if (!delta.allFinite()) {
          mu *= 10.0;
          continue;
        }
        const BjTheta trial = BjTheta::unpack(packed + delta, m, s);
        const BjWork trial_work = bj_evaluate(trial, data, out, s, skip);
        if (trial_work.sse < work.sse) {
          theta = trial;
          work = trial_work;
          step_size = delta.cwiseAbs().maxCoeff();
          mu = std::max(mu / 3.0, 1e-12);
          stepped = true;
          break;
        }
        mu *= 10.0;
        if (mu > 1e12) break;
      }
      if (!stepped || step_size < 1e-6) break;
    }

    PolyOutput& po = result[static_cast<std::size_t>(out)];
    po.a = Eigen::VectorXd::Zero(0);
    po.b = theta.b;
    po.c = theta.c;
    po.d = theta.d;
    po.f = theta.f;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Subspace identification (MOESP flavor)

StateSpaceCoeffs fit_ss(const StateSpaceDiscrete& s, const TrainingData& data) {
  const ModelStructure structure = s;
  const auto [m, p] = dims_of(data);
  const Eigen::Index n = s.n;
  const Eigen::Index i = n + 2;  // block rows of the Hankel matrices

  Eigen::Index total_cols = 0;
  for (const auto& exp : data.experiments()) {
    total_cols += std::max<Eigen::Index>(0, exp.inputs.domain().sample_count() - i + 1);
  }
  const Eigen::Index params = n * n + n * m + p * n + p * m;
  check_rows(structure, total_cols * p, params);
  if (total_cols < i * (m + p)) {
    throw StructuralError("fit " + to_string(structure) + ": too few samples for the block Hankel factorization");
  }

  // Stacked input/output block Hankels across experiments.
  Eigen::MatrixXd W(i * (m + p), total_cols);
  Eigen::Index col0 = 0;
  for (const auto& exp : data.experiments()) {
    const Eigen::Index cols = exp.inputs.domain().sample_count() - i + 1;
    for (Eigen::Index blk = 0; blk < i; ++blk) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index j = 0; j < m; ++j) W(blk * m + j, col0 + c) = exp.inputs.at(j).values(blk + c);
        for (Eigen::Index j = 0; j < p; ++j) {
          W(i * m + blk * p + j, col0 + c) = exp.outputs.at(j).values(blk + c);
        }
      }
    }
    col0 += cols;
  }
  W /= std::sqrt(static_cast<double>(total_cols));

  // LQ factorization through the QR of the transpose.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(W.transpose());
  const Eigen::Index r = W.rows();
  Eigen::MatrixXd R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  Eigen::MatrixXd L = R.transpose();
  const Eigen::MatrixXd L22 = L.block(i * m, i * m, i * p, i * p);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(L22, Eigen::ComputeThinU);
  if (svd.singularValues().size() < n) {
    throw SingularFitError("singular fit for " + to_string(structure) + ": output Hankel rank below order");
  }
  Eigen::MatrixXd gamma =
      svd.matrixU().leftCols(n) * svd.singularValues().head(n).cwiseSqrt().asDiagonal();

  StateSpaceCoeffs ss;
  ss.H = gamma.topRows(p);
  // Shift invariance of the extended observability matrix gives F.
  const Eigen::MatrixXd gamma_up = gamma.topRows((i - 1) * p);
  const Eigen::MatrixXd gamma_down = gamma.bottomRows((i - 1) * p);
  ss.F = gamma_up.colPivHouseholderQr().solve(gamma_down);
  if (!ss.F.allFinite()) {
    throw SingularFitError("singular fit for " + to_string(structure) + ": shift-invariance solve failed");
  }

  // G, D and per-experiment initial states by linear regression on the
  // simulated response, which is linear in (G, D, x0) once F and H are fixed.
  const Eigen::Index E = data.count();
  const Eigen::Index unknowns = n * m + p * m + E * n;
  Eigen::Index rows = 0;
  for (const auto& exp : data.experiments()) rows += exp.outputs.domain().sample_count() * p;

  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(rows, unknowns);
  Eigen::VectorXd rhs(rows);
  Eigen::Index row0 = 0;
  Eigen::Index e_idx = 0;
  for (const auto& exp : data.experiments()) {
    const Eigen::Index samples = exp.outputs.domain().sample_count();
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, n * m);  // d x(t) / d vec(G)
    Eigen::MatrixXd Phi = Eigen::MatrixXd::Identity(n, n);  // d x(t) / d x0
    Eigen::VectorXd u(m);
    for (Eigen::Index t = 0; t < samples; ++t) {
      for (Eigen::Index j = 0; j < m; ++j) u(j) = exp.inputs.at(j).values(t);
      const Eigen::Index r_at = row0 + t * p;
      X.block(r_at, 0, p, n * m) = ss.H * Z;
      for (Eigen::Index j = 0; j < m; ++j) {
        X.block(r_at, n * m + j * p, p, p) = u(j) * Eigen::MatrixXd::Identity(p, p);
      }
      X.block(r_at, n * m + p * m + e_idx * n, p, n) = ss.H * Phi;
      for (Eigen::Index j = 0; j < p; ++j) rhs(r_at + j) = exp.outputs.at(j).values(t);
      if (t + 1 < samples) {
        Z = (ss.F * Z).eval();
        for (Eigen::Index j = 0; j < m; ++j) Z.block(0, j * n, n, n) += u(j) * Eigen::MatrixXd::Identity(n, n);
        Phi = (ss.F * Phi).eval();
        if (!Phi.allFinite() || Phi.cwiseAbs().maxCoeff() > kFilterBlowup) {
          // Unstable F: freeze the sensitivities to keep the regression finite.
          Phi.setZero();
          Z.setZero();
        }
      }
    }
    row0 += samples * p;
    ++e_idx;
  }

  const Eigen::VectorXd beta = solve_ls(X, rhs, structure);
  ss.G = Eigen::MatrixXd(n, m);
  for (Eigen::Index j = 0; j < m; ++j) ss.G.col(j) = beta.segment(j * n, n);
  ss.D = Eigen::MatrixXd(p, m);
  for (Eigen::Index j = 0; j < m; ++j) ss.D.col(j) = beta.segment(n * m + j * p, p);
  ss.x0 = beta.segment(n * m + p * m, n);  // first experiment's initial state
  return ss;
}

}  // namespace

// ---------------------------------------------------------------------------
// SurrogateModel

namespace {

double model_spectral_radius(const ModelStructure& structure, const std::vector<PolyOutput>& per_output,
                             const std::optional<StateSpaceCoeffs>& ss) {
  if (ss.has_value()) return ss->F.eigenvalues().cwiseAbs().maxCoeff();
  double radius = 0.0;
  const bool is_bj = std::holds_alternative<Bj>(structure);
  for (const auto& po : per_output) {
    if (is_bj) {
      for (const auto& fj : po.f) radius = std::max(radius, companion_radius(fj));
    } else {
      radius = std::max(radius, companion_radius(po.a));
    }
  }
  return radius;
}

}  // namespace

SurrogateModel::SurrogateModel(ModelStructure structure, double step, std::vector<std::string> input_names,
                               std::vector<std::string> output_names, std::vector<PolyOutput> per_output)
    : structure_(structure),
      step_(step),
      input_names_(std::move(input_names)),
      output_names_(std::move(output_names)),
      per_output_(std::move(per_output)) {
  validate(structure_);
  if (std::holds_alternative<StateSpaceDiscrete>(structure_)) {
    throw StructuralError("surrogate: state-space structure needs state-space coefficients");
  }
  if (per_output_.size() != output_names_.size()) {
    throw StructuralError("surrogate: one coefficient set per output required");
  }
  spectral_radius_ = model_spectral_radius(structure_, per_output_, ss_);
}

SurrogateModel::SurrogateModel(ModelStructure structure, double step, std::vector<std::string> input_names,
                               std::vector<std::string> output_names, StateSpaceCoeffs ss)
    : structure_(structure),
      step_(step),
      input_names_(std::move(input_names)),
      output_names_(std::move(output_names)),
      ss_(std::move(ss)) {
  validate(structure_);
  if (!std::holds_alternative<StateSpaceDiscrete>(structure_)) {
    throw StructuralError("surrogate: polynomial structure needs polynomial coefficients");
  }
  spectral_radius_ = model_spectral_radius(structure_, per_output_, ss_);
}

const std::vector<PolyOutput>& SurrogateModel::poly() const {
  if (ss_.has_value()) throw StructuralError("surrogate: state-space model has no polynomial coefficients");
  return per_output_;
}

const StateSpaceCoeffs& SurrogateModel::state_space() const {
  if (!ss_.has_value()) throw StructuralError("surrogate: polynomial model has no state-space coefficients");
  return *ss_;
}

// ---------------------------------------------------------------------------
// fit / simulate / mse / refine

SurrogateModel fit(const ModelStructure& structure, const TrainingData& data) {
  validate(structure);
  if (data.count() < 1) throw StructuralError("fit: training data is empty");
  const auto& first = data.experiments().front();
  const double step = data.step();
  auto in_names = first.inputs.channel_names();
  auto out_names = first.outputs.channel_names();

  if (const auto* ssd = std::get_if<StateSpaceDiscrete>(&structure)) {
    return SurrogateModel(structure, step, std::move(in_names), std::move(out_names), fit_ss(*ssd, data));
  }
  std::vector<PolyOutput> per_output;
  if (const auto* arx = std::get_if<Arx>(&structure)) {
    per_output = fit_arx_like(structure, data, arx->na, arx->nb, 0, arx->nk);
  } else if (const auto* armax = std::get_if<Armax>(&structure)) {
    per_output = fit_arx_like(structure, data, armax->na, armax->nb, armax->nc, armax->nk);
  } else {
    per_output = fit_bj(std::get<Bj>(structure), data);
  }
  return SurrogateModel(structure, step, std::move(in_names), std::move(out_names), std::move(per_output));
}

signals::SignalSet simulate(const SurrogateModel& model, const signals::SignalSet& input) {
  const auto& domain = input.domain();
  if (std::abs(domain.step() - model.step()) > 1e-9 * std::max(1.0, model.step())) {
    throw StructuralError("simulate: input step does not match the surrogate's");
  }
  const auto names = input.channel_names();
  if (names != model.input_names()) throw StructuralError("simulate: input channels do not match the surrogate's");

  const Eigen::Index samples = domain.sample_count();
  const auto m = static_cast<Eigen::Index>(model.input_names().size());
  const auto p = static_cast<Eigen::Index>(model.output_names().size());
  Eigen::MatrixXd out(samples, p);

  auto guard = [&](double value, Eigen::Index t) {
    if (!std::isfinite(value) || std::abs(value) > kDivergenceLimit) {
      throw DivergenceError("surrogate simulation diverged at step " + std::to_string(t) + " (t=" +
                            std::to_string(domain.time_at(t)) + "s)");
    }
    return value;
  };

  if (model.is_state_space()) {
    const auto& ss = model.state_space();
    Eigen::VectorXd x = ss.x0;
    Eigen::VectorXd u(m), y(p);
    for (Eigen::Index t = 0; t < samples; ++t) {
      for (Eigen::Index j = 0; j < m; ++j) u(j) = input.at(j).values(t);
      y = ss.H * x + ss.D * u;
      for (Eigen::Index j = 0; j < p; ++j) out(t, j) = guard(y(j), t);
      x = ss.F * x + ss.G * u;
    }
  } else {
    const bool is_bj = std::holds_alternative<Bj>(model.structure());
    const int nk = std::visit(
        [](const auto& s) -> int {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, StateSpaceDiscrete>) {
            return 0;
          } else {
            return s.nk;
          }
        },
        model.structure());
    for (Eigen::Index o = 0; o < p; ++o) {
      const auto& po = model.poly()[static_cast<std::size_t>(o)];
      if (is_bj) {
        Eigen::VectorXd y = Eigen::VectorXd::Zero(samples);
        for (Eigen::Index j = 0; j < m; ++j) {
          y += bj_branch(input.at(j).values, po.b[static_cast<std::size_t>(j)], po.f[static_cast<std::size_t>(j)],
                         nk);
        }
        for (Eigen::Index t = 0; t < samples; ++t) out(t, o) = guard(y(t), t);
      } else {
        Eigen::VectorXd y(samples);
        for (Eigen::Index t = 0; t < samples; ++t) {
          double acc = 0.0;
          for (Eigen::Index i = 1; i <= po.a.size(); ++i) acc += po.a(i - 1) * value_or_zero(y, t - i);
          for (Eigen::Index j = 0; j < m; ++j) {
            const auto& u = input.at(j).values;
            for (Eigen::Index i = 0; i < po.b[static_cast<std::size_t>(j)].size(); ++i) {
              acc += po.b[static_cast<std::size_t>(j)](i) * value_or_zero(u, t - nk - i);
            }
          }
          y(t) = guard(acc, t);
        }
        out.col(o) = y;
      }
    }
  }

  signals::SignalSet result(domain);
  for (Eigen::Index o = 0; o < p; ++o) {
    result.add(signals::SampledSignal(model.output_names()[static_cast<std::size_t>(o)], domain, out.col(o)));
  }
  return result;
}

double mse(const signals::SignalSet& reference, const signals::SignalSet& predicted) {
  if (!reference.domain().same_grid(predicted.domain())) throw StructuralError("mse: grids differ");
  if (reference.size() != predicted.size() || reference.size() == 0) {
    throw StructuralError("mse: channel counts differ or are zero");
  }
  double acc = 0.0;
  Eigen::Index count = 0;
  for (const auto& ch : reference) {
    const auto& other = predicted.by_name(ch.name);
    acc += (ch.values - other.values).squaredNorm();
    count += ch.values.size();
  }
  return acc / static_cast<double>(count);
}

SurrogateModel refine(const ModelStructure& structure, const TrainingData& old_data, Experiment new_experiment) {
  return fit(structure, old_data.with(std::move(new_experiment)));
}

double one_step_mse(const SurrogateModel& model, const TrainingData& data) {
  if (data.count() < 1) throw StructuralError("one_step_mse: empty training data");
  const auto& structure = model.structure();

  if (model.is_state_space()) {
    // No noise model is fitted for ss, so predict by free-run simulation.
    double acc = 0.0;
    Eigen::Index count = 0;
    for (const auto& exp : data.experiments()) {
      const auto sim = simulate(model, exp.inputs);
      for (const auto& ch : exp.outputs) {
        acc += (ch.values - sim.by_name(ch.name).values).squaredNorm();
        count += ch.values.size();
      }
    }
    return acc / static_cast<double>(count);
  }

  const Eigen::Index skip = skip_rows(structure);
  double acc = 0.0;
  Eigen::Index count = 0;
  const bool is_bj = std::holds_alternative<Bj>(structure);
  for (Eigen::Index o = 0; o < static_cast<Eigen::Index>(model.output_names().size()); ++o) {
    const auto& po = model.poly()[static_cast<std::size_t>(o)];
    for (const auto& exp : data.experiments()) {
      const auto& y = exp.outputs.at(o).values;
      Eigen::VectorXd e;
      if (is_bj) {
        const auto& s = std::get<Bj>(structure);
        Eigen::VectorXd v = y;
        for (Eigen::Index j = 0; j < exp.inputs.size(); ++j) {
          v -= bj_branch(exp.inputs.at(j).values, po.b[static_cast<std::size_t>(j)],
                         po.f[static_cast<std::size_t>(j)], s.nk);
        }
        e = dc_filter(po.d, po.c, v);
      } else {
        const int na = static_cast<int>(po.a.size());
        const int nb = po.b.empty() ? 0 : static_cast<int>(po.b.front().size());
        const int nk = std::visit(
            [](const auto& s) -> int {
              using T = std::decay_t<decltype(s)>;
              if constexpr (std::is_same_v<T, StateSpaceDiscrete>) {
                return 0;
              } else {
                return s.nk;
              }
            },
            structure);
        ArxFit fitc{po.a, po.b, po.c};
        e = poly_residuals(exp, o, fitc, na, nb, nk);
      }
      for (Eigen::Index t = skip; t < y.size(); ++t) {
        acc += e(t) * e(t);
        ++count;
      }
    }
  }
  if (count == 0) throw StructuralError("one_step_mse: no usable rows");
  return acc / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// SurrogateExecutable

SurrogateExecutable::SurrogateExecutable(SurrogateModel model, std::vector<mut::InputDecl> inputs)
    : ExecutableModel("surrogate:" + to_string(model.structure()), std::move(inputs), model.output_names(),
                      model.step()),
      model_(std::move(model)) {
  if (this->inputs().size() != model_.input_names().size()) {
    throw StructuralError("surrogate executable: input declaration count mismatch");
  }
  for (std::size_t i = 0; i < model_.input_names().size(); ++i) {
    if (this->inputs()[i].name != model_.input_names()[i]) {
      throw StructuralError("surrogate executable: input name mismatch at " + std::to_string(i));
    }
  }
}

signals::SignalSet SurrogateExecutable::run(const signals::SignalSet& input) const {
  return simulate(model_, input);
}

}  // namespace arfal::sysid
