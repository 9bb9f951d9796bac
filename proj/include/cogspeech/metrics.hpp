#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cogspeech::metrics {

// Labels are 0/1 stored as doubles; anything > 0.5 counts as positive.

// Mann-Whitney AUC; a tied positive/negative pair counts 0.5.
// Throws PreconditionError when only one class is present.
double roc_auc(std::span<const double> scores, std::span<const double> labels);

// Empirical step ROC: one point per distinct threshold (score >= t is
// positive), starting at (0, 0) with threshold +inf and ending at (1, 1).
struct RocCurve {
  std::vector<double> thresholds;
  std::vector<double> fpr;
  std::vector<double> tpr;
};

RocCurve roc_curve(std::span<const double> scores, std::span<const double> labels);
double trapezoid_area(const RocCurve& curve);

// Largest TPR with FPR <= max_fpr.
double tpr_at_fpr(const RocCurve& curve, double max_fpr);
// Smallest FPR with TPR >= min_tpr.
double fpr_at_tpr(const RocCurve& curve, double min_tpr);

// Fraction correct with score >= cutoff predicted positive.
double accuracy(std::span<const double> scores, std::span<const double> labels,
                double cutoff = 0.5);

struct OperatingPoints {
  double tpr_at_fpr0 = 0.0;
  double tpr_at_fpr5 = 0.0;
  double tpr_at_fpr10 = 0.0;
  double fpr_at_tpr90 = 0.0;
  double fpr_at_tpr95 = 0.0;
  double fpr_at_tpr100 = 0.0;
  double accuracy = 0.0;
};

OperatingPoints operating_points(std::span<const double> scores,
                                 std::span<const double> labels, double cutoff = 0.5);

struct HosmerLemeshow {
  double statistic = 0.0;
  double p_value = 0.0;  // NaN when fewer than 3 groups survive
  int groups = 0;
  int dof = 0;
};

// Equal-count risk groups over sorted probabilities, ties never split.
// Throws PreconditionError when N < 2 * groups or a probability is outside
// (0, 1).
HosmerLemeshow hosmer_lemeshow(std::span<const double> probs, std::span<const double> labels,
                               int groups = 10);

struct ScreenEntry {
  double r = 0.0;
  double t = 0.0;
  double p = 1.0;
  bool selected = false;
};

// Univariate Pearson correlation of each column with y, two-sided t test
// with N - 2 degrees of freedom. Zero-variance columns get p = 1.
std::vector<ScreenEntry> pearson_screen(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                        double level = 0.01);

// Aggregate held-out performance in the layout of the results table.
struct EvalReport {
  std::size_t n = 0;
  double auc = 0.0;
  double accuracy = 0.0;  // fraction
  OperatingPoints points;
  std::optional<double> hl_statistic;
  std::optional<double> hl_p;
  std::optional<double> alpha;
};

EvalReport evaluate(std::span<const double> probs, std::span<const double> labels,
                    int hl_groups = 10);

// Column name and value pairs: AUC, Acc. (percent), TPR@FPR10%, TPR@FPR5%,
// TPR@FPR0%, FPR@TPR90%, FPR@TPR95%, FPR@TPR100%, HL-test (p), HL-statistic,
// alpha. Missing values are nullopt.
std::vector<std::pair<std::string, std::optional<double>>> report_fields(const EvalReport& r);

// One "name: value" line per field.
std::string format_report(const EvalReport& r);
std::string report_json(const EvalReport& r);

}  // namespace cogspeech::metrics
