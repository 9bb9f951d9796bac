#include "cogspeech/metrics.hpp"

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cogspeech/error.hpp"
#include "cogspeech/special.hpp"

namespace cogspeech::metrics {

namespace {

constexpr double kRateSlack = 1e-12;

bool positive(double label) { return label > 0.5; }

void check_inputs(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) {
    throw PreconditionError("scores and labels differ in length");
  }
  const auto pos = std::count_if(labels.begin(), labels.end(), positive);
  if (pos == 0 || static_cast<std::size_t>(pos) == labels.size()) {
    throw PreconditionError("ROC metrics need both classes");
  }
}

std::vector<std::size_t> order_by(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  return idx;
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const double> labels) {
  check_inputs(scores, labels);
  const auto idx = order_by(scores);
  // Twice the midrank sum of the positives keeps everything integral.
  double rank_sum2 = 0.0;
  double n_pos = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double midrank2 = static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (positive(labels[idx[k]])) {
        rank_sum2 += midrank2;
        n_pos += 1.0;
      }
    }
    i = j;
  }
  const double n_neg = static_cast<double>(scores.size()) - n_pos;
  const double u2 = rank_sum2 - n_pos * (n_pos + 1.0);
  return (0.5 * u2) / (n_pos * n_neg);
}

RocCurve roc_curve(std::span<const double> scores, std::span<const double> labels) {
  check_inputs(scores, labels);
  auto idx = order_by(scores);
  std::reverse(idx.begin(), idx.end());
  const double n_pos = static_cast<double>(std::count_if(labels.begin(), labels.end(), positive));
  const double n_neg = static_cast<double>(labels.size()) - n_pos;
  RocCurve c;
  c.thresholds.push_back(std::numeric_limits<double>::infinity());
  c.fpr.push_back(0.0);
  c.tpr.push_back(0.0);
  double tp = 0.0, fp = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    const double t = scores[idx[i]];
    while (i < idx.size() && scores[idx[i]] == t) {
      if (positive(labels[idx[i]])) {
        tp += 1.0;
      } else {
        fp += 1.0;
      }
      ++i;
    }
    c.thresholds.push_back(t);
    c.fpr.push_back(fp / n_neg);
    c.tpr.push_back(tp / n_pos);
  }
  return c;
}

double trapezoid_area(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t k = 1; k < curve.fpr.size(); ++k) {
    area += (curve.fpr[k] - curve.fpr[k - 1]) * (curve.tpr[k] + curve.tpr[k - 1]) * 0.5;
  }
  return area;
}

double tpr_at_fpr(const RocCurve& curve, double max_fpr) {
  double best = 0.0;
  for (std::size_t k = 0; k < curve.fpr.size(); ++k) {
    if (curve.fpr[k] <= max_fpr + kRateSlack) best = std::max(best, curve.tpr[k]);
  }
  return best;
}

double fpr_at_tpr(const RocCurve& curve, double min_tpr) {
  double best = 1.0;
  for (std::size_t k = 0; k < curve.tpr.size(); ++k) {
    if (curve.tpr[k] >= min_tpr - kRateSlack) best = std::min(best, curve.fpr[k]);
  }
  return best;
}

double accuracy(std::span<const double> scores, std::span<const double> labels, double cutoff) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw PreconditionError("accuracy needs matching, non-empty inputs");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    correct += (scores[i] >= cutoff) == positive(labels[i]) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

OperatingPoints operating_points(std::span<const double> scores, std::span<const double> labels,
                                 double cutoff) {
  const RocCurve c = roc_curve(scores, labels);
  OperatingPoints p;
  p.tpr_at_fpr0 = tpr_at_fpr(c, 0.0);
  p.tpr_at_fpr5 = tpr_at_fpr(c, 0.05);
  p.tpr_at_fpr10 = tpr_at_fpr(c, 0.10);
  p.fpr_at_tpr90 = fpr_at_tpr(c, 0.90);
  p.fpr_at_tpr95 = fpr_at_tpr(c, 0.95);
  p.fpr_at_tpr100 = fpr_at_tpr(c, 1.0);
  p.accuracy = accuracy(scores, labels, cutoff);
  return p;
}

HosmerLemeshow hosmer_lemeshow(std::span<const double> probs, std::span<const double> labels,
                               int groups) {
  const std::size_t n = probs.size();
  if (labels.size() != n) throw PreconditionError("probabilities and labels differ in length");
  if (groups < 3) throw PreconditionError("Hosmer-Lemeshow needs at least 3 groups");
  if (n < 2 * static_cast<std::size_t>(groups)) {
    throw PreconditionError(
        fmt::format("Hosmer-Lemeshow with {} groups needs N >= {}, got {}", groups, 2 * groups, n));
  }
  for (double p : probs) {
    if (!(p > 0.0 && p < 1.0)) throw PreconditionError("probabilities must lie in (0, 1)");
  }
  const auto idx = order_by(probs);

  struct Group {
    double n = 0, observed = 0, expected = 0;
  };
  std::vector<Group> g;
  std::size_t start = 0;
  for (int k = 1; k <= groups && start < n; ++k) {
    auto end = static_cast<std::size_t>(
        std::llround(static_cast<double>(k) * static_cast<double>(n) / groups));
    end = std::clamp(end, start + 1, n);
    while (end < n && probs[idx[end]] == probs[idx[end - 1]]) ++end;
    if (k == groups) end = n;
    Group grp;
    for (std::size_t i = start; i < end; ++i) {
      grp.n += 1.0;
      grp.expected += probs[idx[i]];
      grp.observed += positive(labels[idx[i]]) ? 1.0 : 0.0;
    }
    g.push_back(grp);
    start = end;
  }

  auto degenerate = [](const Group& grp) {
    return !(grp.expected > 0.0 && grp.expected < grp.n);
  };
  for (std::size_t k = 0; k < g.size() && g.size() > 1;) {
    if (!degenerate(g[k])) {
      ++k;
      continue;
    }
    spdlog::warn("Hosmer-Lemeshow: merging a degenerate risk group with its neighbour");
    const std::size_t into = k + 1 < g.size() ? k + 1 : k - 1;
    g[into].n += g[k].n;
    g[into].observed += g[k].observed;
    g[into].expected += g[k].expected;
    g.erase(g.begin() + static_cast<std::ptrdiff_t>(k));
    k = 0;
  }

  HosmerLemeshow hl;
  for (const auto& grp : g) {
    const double var = grp.expected * (1.0 - grp.expected / grp.n);
    const double diff = grp.observed - grp.expected;
    hl.statistic += diff * diff / var;
  }
  hl.groups = static_cast<int>(g.size());
  hl.dof = hl.groups - 2;
  if (hl.dof < 1) {
    spdlog::warn("Hosmer-Lemeshow: only {} distinct risk groups; no p-value", hl.groups);
    hl.p_value = std::numeric_limits<double>::quiet_NaN();
  } else {
    hl.p_value = special::chi_square_sf(hl.statistic, hl.dof);
  }
  return hl;
}

std::vector<ScreenEntry> pearson_screen(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                        double level) {
  const auto n = X.rows();
  if (y.size() != n) throw PreconditionError("screening: X and y differ in rows");
  std::vector<ScreenEntry> out(static_cast<std::size_t>(X.cols()));
  if (n < 3) return out;
  const Eigen::VectorXd yc = y.array() - y.mean();
  const double syy = yc.squaredNorm();
  if (!(syy > 0.0)) return out;
  const double dof = static_cast<double>(n - 2);
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const Eigen::VectorXd xc = X.col(j).array() - X.col(j).mean();
    const double sxx = xc.squaredNorm();
    if (!(sxx > 1e-24 * std::max(1.0, X.col(j).squaredNorm()))) continue;
    auto& e = out[static_cast<std::size_t>(j)];
    e.r = std::clamp(xc.dot(yc) / std::sqrt(sxx * syy), -1.0, 1.0);
    const double one_minus = 1.0 - e.r * e.r;
    if (one_minus <= 0.0) {
      e.t = std::copysign(std::numeric_limits<double>::infinity(), e.r);
      e.p = 0.0;
    } else {
      e.t = e.r * std::sqrt(dof / one_minus);
      e.p = special::student_t_two_sided(e.t, dof);
    }
    e.selected = e.p < level;
  }
  return out;
}

EvalReport evaluate(std::span<const double> probs, std::span<const double> labels,
                    int hl_groups) {
  EvalReport r;
  r.n = probs.size();
  r.auc = roc_auc(probs, labels);
  r.points = operating_points(probs, labels);
  r.accuracy = r.points.accuracy;
  try {
    const auto hl = hosmer_lemeshow(probs, labels, hl_groups);
    r.hl_statistic = hl.statistic;
    if (!std::isnan(hl.p_value)) r.hl_p = hl.p_value;
  } catch (const PreconditionError& e) {
    spdlog::warn("Hosmer-Lemeshow test skipped: {}", e.what());
  }
  return r;
}

std::vector<std::pair<std::string, std::optional<double>>> report_fields(const EvalReport& r) {
  return {
      {"AUC", r.auc},
      {"Acc.", 100.0 * r.accuracy},
      {"TPR@FPR10%", r.points.tpr_at_fpr10},
      {"TPR@FPR5%", r.points.tpr_at_fpr5},
      {"TPR@FPR0%", r.points.tpr_at_fpr0},
      {"FPR@TPR90%", r.points.fpr_at_tpr90},
      {"FPR@TPR95%", r.points.fpr_at_tpr95},
      {"FPR@TPR100%", r.points.fpr_at_tpr100},
      {"HL-test (p)", r.hl_p},
      {"HL-statistic", r.hl_statistic},
      {"alpha", r.alpha},
  };
}

std::string format_report(const EvalReport& r) {
  std::string out;
  for (const auto& [name, value] : report_fields(r)) {
    out += value ? fmt::format("{}: {:.4f}\n", name, *value) : fmt::format("{}: -\n", name);
  }
  return out;
}

std::string report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["N"] = r.n;
  for (const auto& [name, value] : report_fields(r)) {
    if (value) {
      j[name] = *value;
    } else {
      j[name] = nullptr;
    }
  }
  return j.dump(2);
}

}  // namespace cogspeech::metrics
