#include "cogspeech/glm.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "cogspeech/error.hpp"
#include "cogspeech/random.hpp"
#include "cogspeech/special.hpp"

namespace cogspeech::glm {

namespace {

constexpr double kWeightFloor = 1e-5;
constexpr double kAlphaFloor = 1e-3;
constexpr double kLambdaFloor = 1e-8;
constexpr double kZ95 = 1.96;

double soft_threshold(double u, double t) {
  if (u > t) return u - t;
  if (u < -t) return u + t;
  return 0.0;
}

void check_binary(const Eigen::VectorXd& y) {
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw PreconditionError("outcomes must be 0 or 1");
  }
}

bool both_classes(const Eigen::VectorXd& y) {
  const double s = y.sum();
  return s > 0.0 && s < static_cast<double>(y.size());
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd Xd(X.rows(), X.cols() + 1);
  Xd.col(0).setOnes();
  Xd.rightCols(X.cols()) = X;
  return Xd;
}

Eigen::VectorXd sigmoid(const Eigen::VectorXd& eta) {
  return eta.unaryExpr([](double e) { return glm::sigmoid(e); });
}

std::string pvalue_text(double p) {
  if (p < 0.001) return "< 0.001";
  if (p < 0.01) return "< 0.01";
  if (p < 0.05) return "< 0.05";
  return fmt::format("{:.2f}", p);
}

// Coordinate descent crawls on badly conditioned quadratics. After the first
// sweep and periodically after that, solve the stationarity equations on the
// current support with its signs held fixed, and keep the result when the
// signs survive and the quadratic model improves.
constexpr int kActiveSetInterval = 20;

struct ActiveSetScratch {
  std::vector<Eigen::Index> active;
  Eigen::MatrixXd A;
  Eigen::VectorXd rhs, candidate, residual;
  Eigen::LLT<Eigen::MatrixXd> llt;
};

// Quadratic model value given b and its residual r = c - G b.
double quadratic_model(const Eigen::VectorXd& c, const Eigen::VectorXd& r, double l1, double l2,
                       const Eigen::VectorXd& b) {
  return -0.5 * b.dot(c + r) + l1 * b.lpNorm<1>() + 0.5 * l2 * b.squaredNorm();
}

void solve_on_active_set(const Eigen::MatrixXd& G, const Eigen::VectorXd& c, double l1,
                         double l2, Eigen::VectorXd& beta, Eigen::VectorXd& r,
                         ActiveSetScratch& s) {
  s.active.clear();
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (beta[j] != 0.0) s.active.push_back(j);
  }
  if (s.active.empty()) return;
  const auto k = static_cast<Eigen::Index>(s.active.size());
  s.A.resize(k, k);
  s.rhs.resize(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) s.A(a, b) = G(s.active[a], s.active[b]);
    s.A(a, a) += l2;
    const double sign = beta[s.active[a]] > 0.0 ? 1.0 : -1.0;
    s.rhs[a] = c[s.active[a]] - l1 * sign;
  }
  s.llt.compute(s.A);
  if (s.llt.info() != Eigen::Success) return;
  s.llt.solveInPlace(s.rhs);
  if (!s.rhs.allFinite()) return;
  // When signs flip, stop at the first crossing and zero that coordinate.
  double t = 1.0;
  Eigen::Index crossing = -1;
  for (Eigen::Index a = 0; a < k; ++a) {
    const double b = beta[s.active[a]];
    if ((s.rhs[a] > 0.0) != (b > 0.0) || s.rhs[a] == 0.0) {
      const double ta = b / (b - s.rhs[a]);
      if (ta < t) {
        t = ta;
        crossing = a;
      }
    }
  }
  s.candidate = beta;
  for (Eigen::Index a = 0; a < k; ++a) {
    const double b = beta[s.active[a]];
    s.candidate[s.active[a]] = a == crossing ? 0.0 : b + t * (s.rhs[a] - b);
  }
  s.residual.noalias() = c - G * s.candidate;
  if (quadratic_model(c, s.residual, l1, l2, s.candidate) <= quadratic_model(c, r, l1, l2, beta)) {
    std::swap(beta, s.candidate);
    std::swap(r, s.residual);
  }
}

}  // namespace

double sigmoid(double eta) noexcept {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double logit(double p) noexcept { return std::log(p / (1.0 - p)); }

double deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& p) {
  if (y.size() != p.size()) throw PreconditionError("deviance: length mismatch");
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double pi = std::clamp(p[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    ll += y[i] * std::log(pi) + (1.0 - y[i]) * std::log1p(-pi);
  }
  return -2.0 * ll;
}

Eigen::VectorXd predict(const Eigen::MatrixXd& X, double intercept, const Eigen::VectorXd& beta) {
  if (beta.size() == 0) return Eigen::VectorXd::Constant(X.rows(), sigmoid(intercept));
  return sigmoid(((X * beta).array() + intercept).matrix());
}

// ─── Unregularized logistic regression ───────────────────────────────────────

WaldStats wald(double beta, double se) {
  WaldStats w;
  w.odds_ratio = std::exp(beta);
  if (!std::isfinite(se) || !(se > 0.0)) {
    w.z = 0.0;
    w.p_value = 1.0;
    w.ci_low = 0.0;
    w.ci_high = std::numeric_limits<double>::infinity();
    return w;
  }
  w.z = beta / se;
  w.p_value = special::normal_two_sided(w.z);
  w.ci_low = std::exp(beta - kZ95 * se);
  w.ci_high = std::exp(beta + kZ95 * se);
  return w;
}

LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         std::vector<std::string> names, const LogisticOptions& options) {
  const auto N = X.rows();
  const auto P = X.cols();
  if (y.size() != N) throw PreconditionError("fit_logistic: X and y differ in rows");
  check_binary(y);
  if (names.empty()) {
    for (Eigen::Index j = 0; j < P; ++j) names.push_back(fmt::format("x{}", j + 1));
  }
  if (static_cast<Eigen::Index>(names.size()) != P) {
    throw PreconditionError("fit_logistic: names do not match columns");
  }
  if (N <= P) {
    throw PreconditionError(fmt::format("fit_logistic needs N > P (N={}, P={})", N, P));
  }

  const Eigen::MatrixXd Xd = with_intercept(X);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xd);
  if (qr.rank() < Xd.cols()) {
    std::vector<std::string> collinear;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < Xd.cols(); ++k) {
      const auto col = perm[k];
      collinear.push_back(col == 0 ? "(intercept)" : names[static_cast<std::size_t>(col - 1)]);
    }
    std::sort(collinear.begin(), collinear.end());
    throw PreconditionError(fmt::format("rank-deficient design; collinear columns: {}",
                                        fmt::join(collinear, ", ")));
  }

  LogisticFit fit;
  fit.names = std::move(names);
  const double ybar = y.mean();
  const bool single_class = !both_classes(y);

  Eigen::VectorXd b = Eigen::VectorXd::Zero(P + 1);
  if (!single_class) b[0] = logit(ybar);
  double last_step = std::numeric_limits<double>::infinity();
  double dev = deviance(y, sigmoid(Xd * b));
  Eigen::MatrixXd H;
  for (fit.iterations = 0; fit.iterations < options.max_iterations; ++fit.iterations) {
    const Eigen::VectorXd p = sigmoid(Xd * b);
    const Eigen::VectorXd g = Xd.transpose() * (y - p);
    const Eigen::VectorXd w = p.array() * (1.0 - p.array());
    H = Xd.transpose() * w.asDiagonal() * Xd;
    if (g.lpNorm<Eigen::Infinity>() < options.gradient_tolerance &&
        last_step < options.step_tolerance) {
      fit.converged = true;
      break;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    Eigen::VectorXd step;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      step = ldlt.solve(g);
    } else {
      step = H.completeOrthogonalDecomposition().solve(g);
    }
    double t = 1.0;
    Eigen::VectorXd candidate = b + step;
    double cand_dev = deviance(y, sigmoid(Xd * candidate));
    for (int halving = 0; halving < 30 && cand_dev > dev * (1.0 + 1e-12) + 1e-12; ++halving) {
      t *= 0.5;
      candidate = b + t * step;
      cand_dev = deviance(y, sigmoid(Xd * candidate));
    }
    last_step = (t * step).lpNorm<Eigen::Infinity>();
    b = candidate;
    dev = cand_dev;
  }
  if (!fit.converged) {
    const Eigen::VectorXd p = sigmoid(Xd * b);
    const Eigen::VectorXd w = p.array() * (1.0 - p.array());
    H = Xd.transpose() * w.asDiagonal() * Xd;
  }

  Eigen::VectorXd se = Eigen::VectorXd::Constant(P + 1, std::numeric_limits<double>::infinity());
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(P + 1, P + 1));
    for (Eigen::Index j = 0; j <= P; ++j) {
      if (cov(j, j) > 0.0 && std::isfinite(cov(j, j))) se[j] = std::sqrt(cov(j, j));
    }
  }

  fit.intercept = b[0];
  fit.intercept_se = se[0];
  fit.coef = b.tail(P);
  fit.se = se.tail(P);
  for (Eigen::Index j = 0; j < P; ++j) fit.stats.push_back(wald(fit.coef[j], fit.se[j]));
  fit.deviance = dev;
  fit.separation = single_class || b.cwiseAbs().maxCoeff() > options.separation_bound;
  if (fit.separation) {
    spdlog::warn("logistic fit: separation or single-class outcome (max |beta| = {:.2f})",
                 b.cwiseAbs().maxCoeff());
  }
  return fit;
}

std::string format_coefficient_table(const LogisticFit& fit) {
  std::size_t width = 9;
  for (const auto& n : fit.names) width = std::max(width, n.size());
  std::string out = fmt::format("{:<{}}  {:>8}  {:>8}  {:>18}  {:>8}\n", "Feature", width,
                                "beta", "OR", "95% CI", "p-val");
  for (std::size_t j = 0; j < fit.names.size(); ++j) {
    const auto& s = fit.stats[j];
    const auto idx = static_cast<Eigen::Index>(j);
    const std::string hi =
        std::isfinite(s.ci_high) && s.ci_high < 1e6 ? fmt::format("{:.2f}", s.ci_high) : "-";
    out += fmt::format("{:<{}}  {:>8.2f}  {:>8.2f}  {:>18}  {:>8}\n", fit.names[j], width,
                       fit.coef[idx], s.odds_ratio, fmt::format("[{:.2f}, {}]", s.ci_low, hi),
                       pvalue_text(s.p_value));
  }
  return out;
}

void write_model(std::ostream& out, const LogisticFit& fit) {
  out << "cogspeech-logistic 1\n";
  out << fmt::format("converged\t{}\nseparation\t{}\n", fit.converged ? 1 : 0,
                     fit.separation ? 1 : 0);
  out << "feature\tbeta\tse\todds_ratio\tci_low\tci_high\tp_value\n";
  out << fmt::format("(intercept)\t{}\t{}\t-\t-\t-\t-\n", fit.intercept, fit.intercept_se);
  for (std::size_t j = 0; j < fit.names.size(); ++j) {
    const auto idx = static_cast<Eigen::Index>(j);
    const auto& s = fit.stats[j];
    out << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", fit.names[j], fit.coef[idx], fit.se[idx],
                       s.odds_ratio, s.ci_low, s.ci_high, s.p_value);
  }
}

// ─── Elastic net ─────────────────────────────────────────────────────────────

namespace {

// Buffers reused across the many fits of one cross-validation fold.
struct Workspace {
  Eigen::ArrayXd eta, e, p, w, root_w, z;
  Eigen::VectorXd xbar, cvec, grad, beta, fitted;
  // Working-set block of the quadratic model.
  std::vector<Eigen::Index> set;
  std::vector<char> in_set;
  Eigen::MatrixXd Xs, Gw;
  Eigen::VectorXd cw, bw, rw;
  Coefficients next;
  ActiveSetScratch refine;

  void resize(Eigen::Index n, Eigen::Index p_cols) {
    if (eta.size() != n) {
      eta.resize(n);
      e.resize(n);
      p.resize(n);
      w.resize(n);
      root_w.resize(n);
      z.resize(n);
      fitted.resize(n);
    }
    if (xbar.size() != p_cols) {
      xbar.resize(p_cols);
      cvec.resize(p_cols);
      grad.resize(p_cols);
      beta.resize(p_cols);
    }
  }
};

double penalty(const Eigen::VectorXd& beta, double alpha) {
  if (beta.size() == 0) return 0.0;
  return (1.0 - alpha) * beta.squaredNorm() + alpha * beta.lpNorm<1>();
}

// Objective at c; leaves eta and p for c in the workspace. y must be 0/1.
double evaluate(const Eigen::MatrixXd& X, const Eigen::ArrayXd& y, const Coefficients& c,
                double alpha, double lambda, Workspace& ws) {
  const double n = static_cast<double>(y.size());
  ws.eta.setConstant(c.intercept);
  for (Eigen::Index j = 0; j < c.beta.size(); ++j) {
    if (c.beta[j] != 0.0) ws.eta += c.beta[j] * X.col(j).array();
  }
  ws.e = (-ws.eta).exp();
  ws.p = 1.0 / (1.0 + ws.e);
  // -log q with q the probability of the observed class, clamped.
  const double hi = -std::log(kProbabilityClamp);
  const double lo = -std::log1p(-kProbabilityClamp);
  const double dev2 = ((1.0 + ws.e).log() + (1.0 - y) * ws.eta).max(lo).min(hi).sum();
  return dev2 / n + lambda * penalty(c.beta, alpha);
}

// Largest violation of the optimality conditions at c, using p from the
// workspace.
double kkt_violation(const Eigen::MatrixXd& X, const Eigen::ArrayXd& y, const Coefficients& c,
                     double l1, double l2, Workspace& ws) {
  const double n = static_cast<double>(X.rows());
  ws.z = ws.p - y;
  double worst = std::abs(ws.z.sum()) / n;
  ws.grad.noalias() = X.transpose() * ws.z.matrix();
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double b = c.beta[j];
    const double g = ws.grad[j] / n + l2 * b;
    const double v = b > 0.0 ? std::abs(g + l1) : b < 0.0 ? std::abs(g - l1) : std::abs(g) - l1;
    worst = std::max(worst, v);
  }
  return worst;
}

// Weighted, intercept-profiled quadratic model of the deviance at the point
// whose eta and p are in the workspace: 0.5 b'Gb - c'b with
// G = (X - xbar)' W (X - xbar) / n and c = X' W z / n for the weighted-centred
// working response z. Only c and xbar are formed here. Returns the intercept
// offset.
double build_quadratic(const Eigen::MatrixXd& X, const Eigen::ArrayXd& y, Workspace& ws) {
  const double n = static_cast<double>(X.rows());
  ws.w = (ws.p * (1.0 - ws.p)).max(kWeightFloor);
  ws.root_w = ws.w.sqrt();
  ws.z = ws.eta + (y - ws.p) / ws.w;
  const double sw = ws.w.sum();
  const double zbar = (ws.w * ws.z).sum() / sw;
  ws.z = ws.w * (ws.z - zbar);
  ws.xbar.noalias() = X.transpose() * ws.w.matrix();
  ws.xbar /= sw;
  ws.cvec.noalias() = X.transpose() * ws.z.matrix();
  ws.cvec /= n;
  return zbar;
}

// Gram block and linear term of the working set. Column a of Xs holds the
// centred, root-weighted feature set[a].
void build_block(const Eigen::MatrixXd& X, Workspace& ws, std::size_t first_new) {
  const auto k = static_cast<Eigen::Index>(ws.set.size());
  const double n = static_cast<double>(X.rows());
  if (first_new == 0) {
    ws.Xs.resize(X.rows(), k);
    ws.Gw.resize(k, k);
  } else {
    ws.Xs.conservativeResize(X.rows(), k);
    ws.Gw.conservativeResize(k, k);
  }
  for (auto a = static_cast<Eigen::Index>(first_new); a < k; ++a) {
    const auto j = ws.set[static_cast<std::size_t>(a)];
    ws.Xs.col(a) = (ws.root_w * (X.col(j).array() - ws.xbar[j])).matrix();
  }
  ws.cw.resize(k);
  for (Eigen::Index a = 0; a < k; ++a) ws.cw[a] = ws.cvec[ws.set[static_cast<std::size_t>(a)]];
  for (auto b = static_cast<Eigen::Index>(first_new); b < k; ++b) {
    for (Eigen::Index a = 0; a <= b; ++a) {
      ws.Gw(a, b) = ws.Xs.col(a).dot(ws.Xs.col(b)) / n;
      ws.Gw(b, a) = ws.Gw(a, b);
    }
  }
}

// Minimizes the quadratic model plus penalty by coordinate descent over a
// working set grown until every excluded coordinate satisfies its optimality
// condition at zero. Starts from and writes to ws.beta.
void solve_quadratic(const Eigen::MatrixXd& X, double l1, double l2, double tolerance,
                     const SolverOptions& options, double alpha, double lambda, long& sweeps,
                     Workspace& ws) {
  const auto P = X.cols();
  const double n = static_cast<double>(X.rows());
  ws.set.clear();
  ws.in_set.assign(static_cast<std::size_t>(P), 0);
  for (Eigen::Index j = 0; j < P; ++j) {
    if (ws.beta[j] != 0.0) {
      ws.set.push_back(j);
      ws.in_set[static_cast<std::size_t>(j)] = 1;
    }
  }
  std::size_t built = 0;
  while (true) {
    const auto k = static_cast<Eigen::Index>(ws.set.size());
    if (k > 0) {
      build_block(X, ws, built);
      built = ws.set.size();
      ws.bw.resize(k);
      for (Eigen::Index a = 0; a < k; ++a) ws.bw[a] = ws.beta[ws.set[static_cast<std::size_t>(a)]];
      ws.rw = ws.cw - ws.Gw * ws.bw;
      int stalled = 0;
      while (true) {
        double max_change = 0.0;
        for (Eigen::Index a = 0; a < k; ++a) {
          const double gaa = ws.Gw(a, a);
          const double denom = gaa + l2;
          const double updated =
              denom > 0.0 ? soft_threshold(ws.rw[a] + gaa * ws.bw[a], l1) / denom : 0.0;
          const double d = updated - ws.bw[a];
          if (d != 0.0) {
            ws.bw[a] = updated;
            ws.rw -= ws.Gw.col(a) * d;
            max_change = std::max(max_change, std::abs(d));
          }
        }
        if (++sweeps > options.max_sweeps) {
          throw ConvergenceError(fmt::format(
              "elastic net did not converge after {} coordinate sweeps (alpha={}, "
              "lambda={:.3g}, last change {:.3g})",
              options.max_sweeps, alpha, lambda, max_change));
        }
        if (max_change < tolerance) break;
        if (++stalled % kActiveSetInterval == 1) {
          solve_on_active_set(ws.Gw, ws.cw, l1, l2, ws.bw, ws.rw, ws.refine);
        }
      }
      // Weighted-centred fit of the working set, scaled by root w once more.
      ws.fitted.setZero();
      for (Eigen::Index a = 0; a < k; ++a) {
        ws.beta[ws.set[static_cast<std::size_t>(a)]] = ws.bw[a];
        if (ws.bw[a] != 0.0) ws.fitted += ws.bw[a] * ws.Xs.col(a);
      }
      ws.fitted.array() *= ws.root_w;
      ws.grad.noalias() = X.transpose() * ws.fitted;
      ws.grad = ws.cvec - ws.grad / n;
    } else {
      ws.grad = ws.cvec;
    }
    bool grew = false;
    for (Eigen::Index j = 0; j < P; ++j) {
      if (!ws.in_set[static_cast<std::size_t>(j)] && std::abs(ws.grad[j]) > l1) {
        ws.set.push_back(j);
        ws.in_set[static_cast<std::size_t>(j)] = 1;
        grew = true;
      }
    }
    if (!grew) return;
  }
}

Coefficients solve(const Eigen::MatrixXd& X, const Eigen::ArrayXd& y, double alpha,
                   double lambda, const Coefficients* warm_start, const SolverOptions& options,
                   Workspace& ws) {
  const auto P = X.cols();
  const double ybar = y.mean();
  Coefficients c;
  if (warm_start && warm_start->beta.size() == P) {
    c = *warm_start;
  } else {
    c.intercept = logit(ybar);
    c.beta = Eigen::VectorXd::Zero(P);
  }
  if (P == 0) {
    c.intercept = logit(ybar);
    return c;
  }
  ws.resize(X.rows(), P);

  const double l1 = lambda * alpha;
  const double l2 = 2.0 * lambda * (1.0 - alpha);
  const double inner_tolerance = 0.01 * options.tolerance;
  double f_old = evaluate(X, y, c, alpha, lambda, ws);
  if (options.objective_trace) options.objective_trace->push_back(f_old);
  long sweeps = 0;

  for (int outer = 0; outer < options.max_outer_iterations; ++outer) {
    const double zbar = build_quadratic(X, y, ws);
    ws.beta = c.beta;
    solve_quadratic(X, l1, l2, inner_tolerance, options, alpha, lambda, sweeps, ws);
    const Eigen::VectorXd& beta = ws.beta;

    const double target_intercept = zbar - ws.xbar.dot(beta);
    const double proposed = std::max(std::abs(target_intercept - c.intercept),
                                     (beta - c.beta).lpNorm<Eigen::Infinity>());
    if (proposed < options.tolerance) return c;

    Coefficients& next = ws.next;
    next.intercept = target_intercept;
    next.beta = beta;
    double f_new = evaluate(X, y, next, alpha, lambda, ws);
    double t = 1.0;
    for (int halving = 0; halving < 40 && f_new > f_old + 1e-13 * std::abs(f_old); ++halving) {
      t *= 0.5;
      next.intercept = c.intercept + t * (target_intercept - c.intercept);
      next.beta = c.beta + t * (beta - c.beta);
      f_new = evaluate(X, y, next, alpha, lambda, ws);
    }
    if (f_new > f_old + 1e-13 * std::abs(f_old)) return c;
    if (options.objective_trace) options.objective_trace->push_back(f_new);
    const double change = t * proposed;
    const double decrease = f_old - f_new;
    std::swap(c, next);
    f_old = f_new;
    if (kkt_violation(X, y, c, l1, l2, ws) < options.tolerance) return c;
    // Near-separated data makes the coefficients creep along a flat valley;
    // stop once the objective no longer moves.
    if (change < options.tolerance || decrease <= 1e-13 * std::max(1.0, std::abs(f_new))) return c;
  }
  throw ConvergenceError(
      fmt::format("elastic net: no convergence in {} quadratic approximations (alpha={}, "
                  "lambda={:.3g})",
                  options.max_outer_iterations, alpha, lambda));
}

void check_problem(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (y.size() != X.rows()) throw PreconditionError("elastic net: X and y differ in rows");
  check_binary(y);
  if (!X.allFinite()) throw PreconditionError("elastic net: non-finite input");
  if (!both_classes(y)) throw PreconditionError("elastic net: single-class outcome");
}

}  // namespace

double objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Coefficients& c,
                 double alpha, double lambda) {
  if (y.size() != X.rows() || c.beta.size() != X.cols()) {
    throw PreconditionError("objective: shape mismatch");
  }
  check_binary(y);
  Workspace ws;
  ws.resize(X.rows(), X.cols());
  return evaluate(X, y.array(), c, alpha, lambda, ws);
}

Coefficients fit_elasticnet(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha,
                            double lambda, const Coefficients* warm_start,
                            const SolverOptions& options) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw PreconditionError("alpha must lie in [0, 1]");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw PreconditionError("lambda must be >= 0");
  check_problem(X, y);
  Workspace ws;
  return solve(X, y.array(), alpha, lambda, warm_start, options, ws);
}

double lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha) {
  if (X.cols() == 0) return kLambdaFloor;
  const double n = static_cast<double>(y.size());
  const Eigen::VectorXd r = y.array() - y.mean();
  const double m = (X.transpose() * r).cwiseAbs().maxCoeff() / n;
  const double lam = m / std::max(alpha, kAlphaFloor);
  // Scaled up by 1e-10 relative so rounding inside the solver cannot
  // activate a coefficient exactly at lambda_max.
  return lam > 0.0 ? lam * (1.0 + 1e-10) : kLambdaFloor;
}

std::vector<double> lambda_sequence(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                    double alpha, std::size_t count, double min_ratio) {
  if (count == 0) return {};
  const double top = lambda_max(X, y, alpha);
  std::vector<double> seq(count);
  seq[0] = top;
  for (std::size_t k = 1; k < count; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(count - 1);
    seq[k] = top * std::pow(min_ratio, frac);
  }
  return seq;
}

std::vector<std::size_t> ElasticNetFit::active_set() const {
  std::vector<std::size_t> active;
  const auto& b = chosen_coefs().beta;
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    if (b[j] != 0.0) active.push_back(static_cast<std::size_t>(j));
  }
  return active;
}

ElasticNetFit fit_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha,
                       const PathOptions& options) {
  check_binary(y);
  if (!both_classes(y)) throw PreconditionError("elastic net path: single-class outcome");
  ElasticNetFit fit;
  fit.alpha = alpha;
  fit.null_deviance = deviance(y, Eigen::VectorXd::Constant(y.size(), y.mean()));
  check_problem(X, y);
  const auto lambdas = lambda_sequence(X, y, alpha, options.max_lambdas, options.min_ratio);
  const Eigen::ArrayXd ya = y.array();
  Workspace ws;
  const Coefficients* warm = nullptr;
  double previous_ratio = 0.0;
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    Coefficients c = solve(X, ya, alpha, lambdas[k], warm, options.solver, ws);
    const double dev = deviance(y, predict(X, c.intercept, c.beta));
    fit.lambdas.push_back(lambdas[k]);
    fit.coefs.push_back(std::move(c));
    fit.deviances.push_back(dev);
    warm = &fit.coefs.back();
    const double ratio = 1.0 - dev / fit.null_deviance;
    if (k + 1 >= options.min_path_length) {
      if (ratio - previous_ratio < options.min_relative_improvement * ratio) break;
      if (ratio >= options.max_deviance_explained) break;
    }
    previous_ratio = ratio;
  }
  return fit;
}

std::vector<double> lambda_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha,
                                const PathOptions& options) {
  return fit_path(X, y, alpha, options).lambdas;
}

std::size_t one_se_index(const CvCurve& curve) {
  if (curve.mean.empty() || curve.se.size() != curve.mean.size()) {
    throw PreconditionError("CV curve is empty or inconsistent");
  }
  const auto best = static_cast<std::size_t>(
      std::min_element(curve.mean.begin(), curve.mean.end()) - curve.mean.begin());
  const double threshold = curve.mean[best] + curve.se[best];
  for (std::size_t l = 0; l < curve.mean.size(); ++l) {
    if (curve.mean[l] <= threshold) return l;
  }
  return best;
}

std::vector<double> alpha_grid(double step) {
  if (!(step > 0.0 && step <= 0.5)) throw PreconditionError("alpha step must lie in (0, 0.5]");
  const double intervals = std::round(1.0 / step);
  std::vector<double> grid;
  if (std::abs(intervals * step - 1.0) < 1e-9) {
    for (int k = 0; k <= static_cast<int>(intervals); ++k) grid.push_back(k / intervals);
  } else {
    for (int k = 0; k * step < 1.0; ++k) grid.push_back(k * step);
    grid.push_back(1.0);
  }
  return grid;
}

CvSelection cv_select(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const CvOptions& options) {
  const auto N = static_cast<std::size_t>(X.rows());
  check_binary(y);
  if (static_cast<std::size_t>(y.size()) != N) throw PreconditionError("cv_select: row mismatch");
  if (!both_classes(y)) throw PreconditionError("cv_select: single-class outcome");
  const std::size_t K = options.folds == 0 ? N : options.folds;
  if (K < 2 || K > N) {
    throw PreconditionError(fmt::format("fold count must lie in [2, {}], got {}", N, K));
  }
  if (options.alphas.empty()) throw PreconditionError("empty alpha grid");

  std::vector<std::size_t> fold_of(N);
  if (K == N) {
    std::iota(fold_of.begin(), fold_of.end(), 0);
  } else {
    std::vector<std::size_t> perm(N);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(options.seed);
    rng.shuffle(perm);
    for (std::size_t i = 0; i < N; ++i) fold_of[perm[i]] = i % K;
  }

  struct Fold {
    Eigen::MatrixXd X_train, X_test;
    Eigen::VectorXd y_train, y_test;
  };
  std::vector<Fold> folds;
  std::size_t skipped = 0;
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<Eigen::Index> tr, te;
    for (std::size_t i = 0; i < N; ++i) {
      (fold_of[i] == k ? te : tr).push_back(static_cast<Eigen::Index>(i));
    }
    Fold f;
    f.X_train = X(tr, Eigen::all);
    f.y_train = y(tr);
    f.X_test = X(te, Eigen::all);
    f.y_test = y(te);
    if (!both_classes(f.y_train)) {
      spdlog::warn("cv_select: fold {} has a single-class training outcome; skipped", k);
      ++skipped;
      continue;
    }
    folds.push_back(std::move(f));
  }
  if (static_cast<double>(skipped) > options.max_skipped_fraction * static_cast<double>(K)) {
    throw PreconditionError(
        fmt::format("cv_select: {} of {} folds have single-class training outcomes", skipped, K));
  }
  if (folds.size() < 2) throw PreconditionError("cv_select: fewer than 2 usable folds");

  auto curve_from = [&](const std::vector<std::vector<double>>& raw, std::size_t L) {
    CvCurve curve;
    double total_w = 0.0;
    for (const auto& f : folds) total_w += static_cast<double>(f.y_test.size());
    for (std::size_t l = 0; l < L; ++l) {
      double m = 0.0;
      for (std::size_t k = 0; k < folds.size(); ++k) {
        m += static_cast<double>(folds[k].y_test.size()) * raw[k][l];
      }
      m /= total_w;
      double v = 0.0;
      for (std::size_t k = 0; k < folds.size(); ++k) {
        const double d = raw[k][l] - m;
        v += static_cast<double>(folds[k].y_test.size()) * d * d;
      }
      v /= total_w;
      curve.mean.push_back(m);
      curve.se.push_back(std::sqrt(v / static_cast<double>(folds.size() - 1)));
    }
    return curve;
  };

  CvSelection sel;
  sel.folds_used = folds.size();
  sel.folds_skipped = skipped;

  if (X.cols() == 0) {
    std::vector<std::vector<double>> raw(folds.size(), std::vector<double>(1));
    for (std::size_t k = 0; k < folds.size(); ++k) {
      const double p = folds[k].y_train.mean();
      raw[k][0] = deviance(folds[k].y_test, Eigen::VectorXd::Constant(folds[k].y_test.size(), p)) /
                  static_cast<double>(folds[k].y_test.size());
    }
    sel.alpha = std::numeric_limits<double>::quiet_NaN();
    sel.fit.alpha = sel.alpha;
    sel.fit.null_deviance = deviance(y, Eigen::VectorXd::Constant(y.size(), y.mean()));
    sel.fit.lambdas = {0.0};
    sel.fit.coefs = {Coefficients{logit(y.mean()), Eigen::VectorXd()}};
    sel.fit.deviances = {sel.fit.null_deviance};
    sel.curve = curve_from(raw, 1);
    sel.max_path_length = 1;
    return sel;
  }

  std::vector<ElasticNetFit> paths;
  paths.reserve(options.alphas.size());
  for (double a : options.alphas) {
    paths.push_back(fit_path(X, y, a, options.path));
    sel.max_path_length = std::max(sel.max_path_length, paths.back().lambdas.size());
  }

  // raw[a][k][l]: per-observation held-out deviance.
  std::vector<std::vector<std::vector<double>>> raw(paths.size());
  for (std::size_t a = 0; a < paths.size(); ++a) {
    raw[a].assign(folds.size(), std::vector<double>(paths[a].lambdas.size()));
  }
  for (std::size_t k = 0; k < folds.size(); ++k) {
    const Fold& f = folds[k];
    const double n_test = static_cast<double>(f.y_test.size());
    const Eigen::ArrayXd y_train = f.y_train.array();
    Workspace ws;
    // lambda * alpha is shared by all alphas at one path index, so the fold's
    // fit at the previous alpha, shifted by the full-data change between the
    // two alphas, is a close warm start.
    std::vector<Coefficients> previous, current;
    Coefficients warm;
    for (std::size_t a = 0; a < paths.size(); ++a) {
      const auto& path = paths[a];
      current.clear();
      for (std::size_t l = 0; l < path.lambdas.size(); ++l) {
        const Coefficients* start = &path.coefs[l];
        if (a > 0 && l < previous.size()) {
          const auto& before = paths[a - 1].coefs[l];
          warm.intercept = previous[l].intercept + path.coefs[l].intercept - before.intercept;
          warm.beta = previous[l].beta + path.coefs[l].beta - before.beta;
          start = &warm;
        }
        current.push_back(solve(f.X_train, y_train, path.alpha, path.lambdas[l], start,
                                options.path.solver, ws));
        const auto& c = current.back();
        raw[a][k][l] = deviance(f.y_test, predict(f.X_test, c.intercept, c.beta)) / n_test;
      }
      std::swap(previous, current);
    }
  }

  std::size_t best = 0;
  std::vector<CvCurve> curves;
  std::vector<std::size_t> chosen;
  for (std::size_t a = 0; a < paths.size(); ++a) {
    curves.push_back(curve_from(raw[a], paths[a].lambdas.size()));
    chosen.push_back(one_se_index(curves.back()));
    sel.alpha_scores.push_back(curves.back().mean[chosen.back()]);
    if (sel.alpha_scores[a] < sel.alpha_scores[best]) best = a;
  }
  sel.fit = std::move(paths[best]);
  sel.fit.chosen = chosen[best];
  sel.curve = std::move(curves[best]);
  sel.alpha = sel.fit.alpha;
  sel.lambda = sel.fit.lambda();
  return sel;
}

void write_model(std::ostream& out, const CvSelection& selection,
                 const std::vector<std::string>& names) {
  const auto& c = selection.fit.chosen_coefs();
  out << "cogspeech-elasticnet 1\n";
  out << fmt::format("alpha\t{}\nlambda\t{}\nintercept\t{}\n", selection.alpha, selection.lambda,
                     c.intercept);
  for (Eigen::Index j = 0; j < c.beta.size(); ++j) {
    out << fmt::format("{}\t{}\n", names.at(static_cast<std::size_t>(j)), c.beta[j]);
  }
}

}  // namespace cogspeech::glm
