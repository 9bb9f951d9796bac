#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cogspeech::glm {

// Probabilities are clamped to [eps, 1 - eps] inside the deviance.
inline constexpr double kProbabilityClamp = 1e-12;

// -2 * sum(y ln p + (1 - y) ln(1 - p)).
double deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& p);

double sigmoid(double eta) noexcept;
double logit(double p) noexcept;

Eigen::VectorXd predict(const Eigen::MatrixXd& X, double intercept, const Eigen::VectorXd& beta);

// ─── Unregularized logistic regression ───────────────────────────────────────

struct WaldStats {
  double z = 0.0;
  double p_value = 1.0;
  double odds_ratio = 1.0;
  double ci_low = 0.0;  // 95% interval of the odds ratio
  double ci_high = 0.0;
};

WaldStats wald(double beta, double se);

struct LogisticFit {
  std::vector<std::string> names;
  double intercept = 0.0;
  double intercept_se = 0.0;
  Eigen::VectorXd coef;
  Eigen::VectorXd se;
  std::vector<WaldStats> stats;
  double deviance = 0.0;
  int iterations = 0;
  bool converged = false;
  // Single-class outcome, or a coefficient beyond the separation bound when
  // iteration stopped.
  bool separation = false;
};

struct LogisticOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-8;
  double step_tolerance = 1e-8;
  double separation_bound = 30.0;
};

// Newton-Raphson (IRLS) on [1 X]. Converged when the score vector and the
// Newton step both fall below tolerance. Throws PreconditionError when
// N <= P or the design is rank deficient (message lists the columns).
LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         std::vector<std::string> names = {},
                         const LogisticOptions& options = {});

// Coefficient table with beta, odds ratio, 95% CI and Wald p-value.
std::string format_coefficient_table(const LogisticFit& fit);

// Versioned tab-separated model export.
void write_model(std::ostream& out, const LogisticFit& fit);

// ─── Elastic net ─────────────────────────────────────────────────────────────
//
// Minimizes  DEV / (2N) + lambda * ((1 - alpha) ||b||^2 + alpha ||b||_1)
// with an unpenalized intercept.

struct Coefficients {
  double intercept = 0.0;
  Eigen::VectorXd beta;
};

struct SolverOptions {
  double tolerance = 1e-7;          // max coefficient change
  long max_sweeps = 100000;         // coordinate sweeps over all outer steps
  int max_outer_iterations = 1000;  // quadratic approximations
  // When set, receives the objective after every accepted outer step.
  std::vector<double>* objective_trace = nullptr;
};

double objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Coefficients& c,
                 double alpha, double lambda);

// Penalized IRLS with cyclic coordinate descent on each quadratic model.
// Throws ConvergenceError when the sweep budget runs out.
Coefficients fit_elasticnet(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha,
                            double lambda, const Coefficients* warm_start = nullptr,
                            const SolverOptions& options = {});

// Smallest lambda with all slopes zero; alpha is floored at 0.001.
double lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha);

// `count` log-spaced values from lambda_max down to min_ratio * lambda_max.
std::vector<double> lambda_sequence(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                    double alpha, std::size_t count = 100,
                                    double min_ratio = 1e-4);

struct PathOptions {
  std::size_t max_lambdas = 100;
  double min_ratio = 1e-4;
  // Stop once the deviance-explained fraction grows by less than this,
  // relative to its current value.
  double min_relative_improvement = 1e-5;
  double max_deviance_explained = 0.999;
  std::size_t min_path_length = 5;
  SolverOptions solver;
};

struct ElasticNetFit {
  double alpha = 1.0;
  std::vector<double> lambdas;  // decreasing
  std::vector<Coefficients> coefs;
  std::vector<double> deviances;  // training deviance per lambda
  double null_deviance = 0.0;
  std::size_t chosen = 0;  // index of the selected lambda

  double lambda() const { return lambdas.at(chosen); }
  const Coefficients& chosen_coefs() const { return coefs.at(chosen); }
  // Indices of non-zero slopes at the chosen lambda.
  std::vector<std::size_t> active_set() const;
};

// Warm-started fits along lambda_sequence, truncated early as described
// in PathOptions. Throws PreconditionError for a single-class outcome.
ElasticNetFit fit_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha,
                       const PathOptions& options = {});

std::vector<double> lambda_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                double alpha, const PathOptions& options = {});

struct CvCurve {
  std::vector<double> mean;  // per-observation held-out deviance
  std::vector<double> se;
};

// Largest lambda (smallest index on a decreasing path) whose mean is within
// one standard error of the minimum.
std::size_t one_se_index(const CvCurve& curve);

// {0, step, 2 step, ..., 1}; 101 values for step 0.01.
std::vector<double> alpha_grid(double step);

struct CvOptions {
  std::vector<double> alphas = alpha_grid(0.01);
  std::size_t folds = 0;  // 0 means leave-one-out
  std::uint64_t seed = 0;  // fold assignment when folds < N
  double max_skipped_fraction = 0.2;
  PathOptions path;
};

struct CvSelection {
  double alpha = 1.0;
  double lambda = 0.0;
  ElasticNetFit fit;  // all-data path at alpha, chosen = lambda_1se
  CvCurve curve;      // for the chosen alpha
  std::vector<double> alpha_scores;  // CV deviance at each alpha's lambda_1se
  std::size_t folds_used = 0;
  std::size_t folds_skipped = 0;
  std::size_t max_path_length = 0;  // over all alphas
};

// Cross-validated choice of (alpha, lambda_1se). With no columns the result
// is the intercept-only model and alpha is NaN.
CvSelection cv_select(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const CvOptions& options = {});

// Versioned tab-separated export of a regularized model.
void write_model(std::ostream& out, const CvSelection& selection,
                 const std::vector<std::string>& names);

}  // namespace cogspeech::glm
