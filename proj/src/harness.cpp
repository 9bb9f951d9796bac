#include "cogspeech/harness.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>

#include "cogspeech/error.hpp"
#include "cogspeech/parallel.hpp"

namespace cogspeech {

namespace {

namespace fs = std::filesystem;

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

template <typename Fn>
auto with_subject(const std::string& id, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("subject {}: {}", id, e.what()));
  } catch (const InputError& e) {
    throw InputError(fmt::format("subject {}: {}", id, e.what()));
  } catch (const PreconditionError& e) {
    throw PreconditionError(fmt::format("subject {}: {}", id, e.what()));
  }
}

bool zero_variance(const Eigen::Ref<const Eigen::VectorXd>& col) {
  const std::span<const double> v(col.data(), static_cast<std::size_t>(col.size()));
  if (v.size() < 2) return true;
  return sample_sd(v) <= 1e-12 * std::max(1.0, std::abs(mean(v)));
}

std::set<std::string> dummy_columns(std::span<const std::string> names) {
  std::set<std::string> out;
  for (const auto& n : names) {
    if (is_demographic_dummy(n)) out.insert(n);
  }
  return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double clamp_probability(double p) {
  return std::clamp(p, glm::kProbabilityClamp, 1.0 - glm::kProbabilityClamp);
}

// The training procedure of one fold: drop constant columns, z-score,
// screen, cross-validate.
struct TrainedModel {
  std::vector<std::size_t> kept;  // columns of the input matrix
  std::vector<std::string> dropped;
  ColumnScaling scaling;          // over kept
  std::vector<std::size_t> screened;  // positions within kept
  glm::CvSelection selection;
};

TrainedModel train_model(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const std::vector<std::string>& names, const LoocvConfig& config,
                         std::uint64_t seed) {
  TrainedModel m;
  std::vector<std::string> kept_names;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const auto& name = names[static_cast<std::size_t>(j)];
    if (zero_variance(X.col(j))) {
      m.dropped.push_back(name);
    } else {
      m.kept.push_back(static_cast<std::size_t>(j));
      kept_names.push_back(name);
    }
  }
  Eigen::MatrixXd Xk = X(Eigen::all, m.kept);
  if (config.normalize == Normalization::per_fold) {
    m.scaling = fit_zscore(Xk, kept_names, dummy_columns(kept_names));
    m.scaling.apply(Xk);
  } else {
    m.scaling.center.assign(m.kept.size(), 0.0);
    m.scaling.scale.assign(m.kept.size(), 1.0);
  }
  const auto screen = metrics::pearson_screen(Xk, y, config.screen_level);
  for (std::size_t j = 0; j < screen.size(); ++j) {
    if (screen[j].selected) m.screened.push_back(j);
  }
  glm::CvOptions cv;
  cv.alphas = glm::alpha_grid(config.alpha_step);
  cv.folds = config.inner_folds;
  cv.seed = seed;
  cv.path = config.path;
  const Eigen::MatrixXd Xs = Xk(Eigen::all, m.screened);
  m.selection = glm::cv_select(Xs, y, cv);
  return m;
}

std::vector<std::string> names_at(const std::vector<std::string>& names,
                                  const std::vector<std::size_t>& kept,
                                  const std::vector<std::size_t>& positions) {
  std::vector<std::string> out;
  for (auto p : positions) out.push_back(names[kept[p]]);
  return out;
}

void check_loocv_input(const FeatureMatrix& fm) {
  fm.validate();
  if (fm.rows() < 10) {
    throw PreconditionError(fmt::format("leave-one-out needs N >= 10, got {}", fm.rows()));
  }
  const double positives = fm.y.sum();
  const double negatives = static_cast<double>(fm.rows()) - positives;
  if (positives < 2 || negatives < 2) {
    throw PreconditionError(
        "each outcome class needs at least 2 subjects so every training fold has both");
  }
}

FeatureMatrix normalize_globally(const FeatureMatrix& fm) {
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < fm.cols(); ++j) {
    if (zero_variance(fm.X.col(static_cast<Eigen::Index>(j)))) {
      spdlog::info("dropping zero-variance column {}", fm.feature_names[j]);
    } else {
      keep.push_back(j);
    }
  }
  FeatureMatrix out = select_columns(fm, keep);
  const auto scaling = fit_zscore(out.X, out.feature_names, dummy_columns(out.feature_names));
  scaling.apply(out.X);
  return out;
}

nlohmann::json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

double number_from(const nlohmann::json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

std::vector<std::size_t> demographic_columns(const FeatureMatrix& fm) {
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < fm.cols(); ++j) {
    if (fm.families[j] == FeatureFamily::demographic) cols.push_back(j);
  }
  if (cols.empty()) throw PreconditionError("no demographic columns in the feature matrix");
  return cols;
}

struct BaselineModel {
  std::vector<std::size_t> kept;
  std::vector<std::string> dropped;
  ColumnScaling scaling;
  glm::LogisticFit fit;

  double predict(const Eigen::RowVectorXd& row) const {
    Eigen::RowVectorXd x = row(Eigen::all, kept);
    scaling.apply_row(x);
    return clamp_probability(glm::sigmoid(fit.intercept + x.dot(fit.coef)));
  }
};

BaselineModel fit_baseline(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const std::vector<std::string>& names,
                           const glm::LogisticOptions& options) {
  BaselineModel m;
  std::vector<std::string> kept_names;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (zero_variance(X.col(j))) {
      m.dropped.push_back(names[static_cast<std::size_t>(j)]);
    } else {
      m.kept.push_back(static_cast<std::size_t>(j));
      kept_names.push_back(names[static_cast<std::size_t>(j)]);
    }
  }
  Eigen::MatrixXd Xk = X(Eigen::all, m.kept);
  m.scaling = fit_zscore(Xk, kept_names, dummy_columns(kept_names));
  m.scaling.apply(Xk);
  m.fit = glm::fit_logistic(Xk, y, kept_names, options);
  return m;
}

}  // namespace

// ─── Corpus on disk ──────────────────────────────────────────────────────────

Corpus read_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("corpus directory '" + dir.string() + "' not found");
  Corpus c;
  c.demographics = read_demographics(dir / "demographics.csv");
  for (const auto& d : c.demographics) {
    const auto tpath = dir / "transcripts" / (d.subject_id + ".tsv");
    const auto fpath = dir / "frames" / (d.subject_id + ".csv");
    if (!fs::exists(tpath)) {
      throw InputError(fmt::format("subject {}: missing transcript {}", d.subject_id,
                                   tpath.string()));
    }
    if (!fs::exists(fpath)) {
      throw InputError(fmt::format("subject {}: missing frame track {}", d.subject_id,
                                   fpath.string()));
    }
    c.transcripts.push_back(read_transcript(tpath, d.subject_id));
    c.tracks.push_back(read_frame_track(fpath, d.subject_id));
  }
  return c;
}

std::vector<std::string> write_corpus(const Corpus& corpus, const fs::path& dir) {
  if (corpus.transcripts.size() != corpus.demographics.size() ||
      corpus.tracks.size() != corpus.demographics.size()) {
    throw PreconditionError("corpus parts differ in length");
  }
  std::error_code ec;
  fs::create_directories(dir / "transcripts", ec);
  fs::create_directories(dir / "frames", ec);
  if (ec) throw InputError("cannot create '" + dir.string() + "': " + ec.message());
  std::vector<std::string> written;
  {
    auto out = open_output(dir / "demographics.csv");
    write_demographics(out, corpus.demographics);
    written.emplace_back("demographics.csv");
  }
  for (std::size_t i = 0; i < corpus.demographics.size(); ++i) {
    const auto& id = corpus.demographics[i].subject_id;
    const std::string t = "transcripts/" + id + ".tsv";
    const std::string f = "frames/" + id + ".csv";
    auto tout = open_output(dir / t);
    write_transcript(tout, corpus.transcripts[i]);
    auto fout = open_output(dir / f);
    write_frame_track(fout, corpus.tracks[i]);
    if (!tout || !fout) throw InputError("write failed under '" + dir.string() + "'");
    written.push_back(t);
    written.push_back(f);
  }
  std::sort(written.begin(), written.end());
  return written;
}

FeatureMatrix extract_features(const Corpus& corpus, const ExtractOptions& options) {
  const std::size_t N = corpus.demographics.size();
  if (corpus.transcripts.size() != N || corpus.tracks.size() != N) {
    throw InputError("demographics, transcripts and frame tracks differ in count");
  }
  if (N == 0) throw InputError("empty corpus");
  for (std::size_t i = 0; i < N; ++i) {
    const auto& id = corpus.demographics[i].subject_id;
    if (corpus.transcripts[i].subject_id != id || corpus.tracks[i].subject_id() != id) {
      throw InputError(fmt::format("subject {}: transcript or frame track belongs to '{}'/'{}'",
                                   id, corpus.transcripts[i].subject_id,
                                   corpus.tracks[i].subject_id()));
    }
  }
  const auto& channels = corpus.tracks.front().channel_names();
  for (const auto& t : corpus.tracks) {
    if (t.channel_names() != channels) {
      throw InputError(fmt::format("subject {}: channel list differs from subject {}",
                                   t.subject_id(), corpus.tracks.front().subject_id()));
    }
  }

  const bool want_audio = options.families.audio;
  const bool want_text = options.families.text;
  std::vector<std::string> names = demographic_feature_names();
  const auto audio_names = acoustic::feature_names(channels);
  names.insert(names.end(), audio_names.begin(), audio_names.end());
  const auto& tnames = text_feature_names();
  names.insert(names.end(), tnames.begin(), tnames.end());

  const auto P = static_cast<Eigen::Index>(names.size());
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), P);
  parallel_for(N, options.threads, [&](std::size_t i) {
    const auto& id = corpus.demographics[i].subject_id;
    with_subject(id, [&] {
      NamedVector row = encode_demographics(corpus.demographics[i].record);
      if (want_audio) {
        row.append(acoustic::extract_features(corpus.tracks[i], corpus.transcripts[i],
                                              options.acoustic));
      } else {
        row.values.resize(row.values.size() + audio_names.size(), 0.0);
      }
      if (want_text) {
        row.append(text::extract_features(i, corpus.transcripts, options.text));
      } else {
        row.values.resize(row.values.size() + tnames.size(), 0.0);
      }
      for (Eigen::Index j = 0; j < P; ++j) {
        X(static_cast<Eigen::Index>(i), j) = row.values[static_cast<std::size_t>(j)];
      }
    });
  });
  for (std::size_t i = 0; i < N; ++i) {
    spdlog::info("extracted subject {}: {} turns, {} frames", corpus.demographics[i].subject_id,
                 corpus.transcripts[i].turns.size(), corpus.tracks[i].frames());
  }

  FeatureMatrix fm;
  for (const auto& d : corpus.demographics) fm.subject_ids.push_back(d.subject_id);
  fm.feature_names = std::move(names);
  for (const auto& n : fm.feature_names) fm.families.push_back(family_of(n));
  fm.X = std::move(X);
  fm.y.resize(static_cast<Eigen::Index>(N));
  for (std::size_t i = 0; i < N; ++i) {
    fm.y[static_cast<Eigen::Index>(i)] = corpus.demographics[i].outcome;
  }
  return select_families(fm, options.families);
}

// ─── Nested leave-one-out protocol ───────────────────────────────────────────

std::string_view to_string(Normalization n) noexcept {
  return n == Normalization::per_fold ? "per_fold" : "global";
}

Normalization parse_normalization(std::string_view text) {
  if (text == "per_fold" || text == "per-fold" || text == "fold") return Normalization::per_fold;
  if (text == "global") return Normalization::global;
  throw InputError(fmt::format("unknown normalization '{}' (per_fold or global)", text));
}

bool FoldArtifacts::operator==(const FoldArtifacts& o) const {
  return dropped == o.dropped && scaling.center == o.scaling.center &&
         scaling.scale == o.scaling.scale && screened == o.screened && lambdas == o.lambdas &&
         (alpha == o.alpha || (std::isnan(alpha) && std::isnan(o.alpha))) &&
         lambda == o.lambda && coefficients.intercept == o.coefficients.intercept &&
         coefficients.beta.size() == o.coefficients.beta.size() &&
         coefficients.beta == o.coefficients.beta;
}

FoldResult run_fold(const FeatureMatrix& fm, std::size_t held_out, const LoocvConfig& config,
                    FoldArtifacts* artifacts) {
  const std::size_t N = fm.rows();
  if (held_out >= N) throw PreconditionError("held-out index out of range");
  std::vector<Eigen::Index> train;
  for (std::size_t i = 0; i < N; ++i) {
    if (i != held_out) train.push_back(static_cast<Eigen::Index>(i));
  }
  const Eigen::MatrixXd Xtr = fm.X(train, Eigen::all);
  const Eigen::VectorXd ytr = fm.y(train);
  const auto h = static_cast<Eigen::Index>(held_out);
  if (ytr.sum() == 0.0 || ytr.sum() == static_cast<double>(ytr.size())) {
    throw PreconditionError(
        fmt::format("fold {}: single-class training outcome", fm.subject_ids[held_out]));
  }

  const TrainedModel m =
      train_model(Xtr, ytr, fm.feature_names, config, mix_seed(config.seed, held_out));

  Eigen::RowVectorXd x = fm.X.row(h)(Eigen::all, m.kept);
  m.scaling.apply_row(x);
  const auto& coefs = m.selection.fit.chosen_coefs();
  double eta = coefs.intercept;
  for (std::size_t k = 0; k < m.screened.size(); ++k) {
    eta += coefs.beta[static_cast<Eigen::Index>(k)] * x[static_cast<Eigen::Index>(m.screened[k])];
  }

  FoldResult r;
  r.subject_id = fm.subject_ids[held_out];
  r.screened = names_at(fm.feature_names, m.kept, m.screened);
  for (std::size_t k = 0; k < m.screened.size(); ++k) {
    if (coefs.beta[static_cast<Eigen::Index>(k)] != 0.0) r.active.push_back(r.screened[k]);
  }
  r.probability = clamp_probability(glm::sigmoid(eta));
  r.outcome = fm.y[h] > 0.5 ? 1 : 0;
  r.alpha = m.selection.alpha;
  r.lambda = m.selection.lambda;

  if (artifacts) {
    artifacts->dropped = m.dropped;
    artifacts->scaling = m.scaling;
    artifacts->screened = r.screened;
    artifacts->lambdas = m.selection.fit.lambdas;
    artifacts->alpha = m.selection.alpha;
    artifacts->lambda = m.selection.lambda;
    artifacts->coefficients = coefs;
    artifacts->max_path_length = m.selection.max_path_length;
  }
  return r;
}

std::map<std::string, double> selection_percentages(const std::vector<FoldResult>& folds) {
  std::map<std::string, double> counts;
  for (const auto& f : folds) {
    for (const auto& a : f.active) counts[a] += 1.0;
  }
  if (folds.empty()) return counts;
  for (auto& [name, c] : counts) c = 100.0 * c / static_cast<double>(folds.size());
  return counts;
}

SelectionReport refit_all(const FeatureMatrix& fm, const LoocvConfig& config,
                          const std::vector<FoldResult>& folds) {
  const TrainedModel m =
      train_model(fm.X, fm.y, fm.feature_names, config, mix_seed(config.seed, fm.rows()));
  const auto& coefs = m.selection.fit.chosen_coefs();
  std::map<std::string, double> beta;
  for (std::size_t k = 0; k < m.screened.size(); ++k) {
    const double b = coefs.beta[static_cast<Eigen::Index>(k)];
    if (b != 0.0) beta[fm.feature_names[m.kept[m.screened[k]]]] = b;
  }
  auto percent = selection_percentages(folds);
  for (const auto& [name, b] : beta) percent.try_emplace(name, 0.0);

  SelectionReport report;
  report.alpha = m.selection.alpha;
  report.lambda = m.selection.lambda;
  for (const auto& [name, pct] : percent) {
    const auto it = beta.find(name);
    report.entries.push_back({name, pct, it == beta.end() ? 0.0 : it->second});
  }
  std::stable_sort(report.entries.begin(), report.entries.end(),
                   [](const SelectionEntry& a, const SelectionEntry& b) {
                     if (a.percent != b.percent) return a.percent < b.percent;
                     return std::abs(a.beta) < std::abs(b.beta);
                   });
  return report;
}

LoocvResult run_loocv(const FeatureMatrix& input, const LoocvConfig& config) {
  check_loocv_input(input);
  const FeatureMatrix fm =
      config.normalize == Normalization::global ? normalize_globally(input) : input;
  const std::size_t N = fm.rows();

  LoocvResult result;
  result.folds.resize(N);
  std::vector<FoldArtifacts> artifacts(N);
  parallel_for(N, config.threads, [&](std::size_t i) {
    result.folds[i] = run_fold(fm, i, config, &artifacts[i]);
    spdlog::debug("fold {}: p = {:.4f}, {} screened, {} active", fm.subject_ids[i],
                  result.folds[i].probability, result.folds[i].screened.size(),
                  result.folds[i].active.size());
  });
  std::sort(result.folds.begin(), result.folds.end(),
            [](const FoldResult& a, const FoldResult& b) { return a.subject_id < b.subject_id; });
  for (const auto& a : artifacts) {
    result.max_lambda_count = std::max(result.max_lambda_count, a.max_path_length);
  }
  result.alpha_count = glm::alpha_grid(config.alpha_step).size();

  std::vector<double> probs, labels;
  for (const auto& f : result.folds) {
    probs.push_back(f.probability);
    labels.push_back(f.outcome);
  }
  result.report = metrics::evaluate(probs, labels);
  result.selection = refit_all(fm, config, result.folds);
  if (std::isfinite(result.selection.alpha)) result.report.alpha = result.selection.alpha;
  return result;
}

void write_fold_log(std::ostream& out, const std::vector<FoldResult>& folds) {
  for (const auto& f : folds) {
    nlohmann::ordered_json j;
    j["subject_id"] = f.subject_id;
    j["outcome"] = f.outcome;
    j["probability"] = f.probability;
    j["alpha"] = number_or_null(f.alpha);
    j["lambda"] = number_or_null(f.lambda);
    j["screened"] = f.screened;
    j["active"] = f.active;
    out << j.dump() << '\n';
  }
}

std::vector<FoldResult> read_fold_log(std::istream& in) {
  std::vector<FoldResult> folds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      FoldResult f;
      f.subject_id = j.at("subject_id").get<std::string>();
      f.outcome = j.at("outcome").get<int>();
      f.probability = j.at("probability").get<double>();
      f.alpha = number_from(j.at("alpha"));
      f.lambda = number_from(j.at("lambda"));
      f.screened = j.at("screened").get<std::vector<std::string>>();
      f.active = j.at("active").get<std::vector<std::string>>();
      folds.push_back(std::move(f));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(fmt::format("fold log line {}: {}", line_no, e.what()));
    }
  }
  return folds;
}

std::string format_selection(const SelectionReport& report) {
  std::size_t width = 7;
  for (const auto& e : report.entries) width = std::max(width, e.feature.size());
  std::string out = fmt::format("{:<{}}  {:>8}  {:>9}\n", "Feature", width, "% folds", "beta");
  for (const auto& e : report.entries) {
    out += fmt::format("{:<{}}  {:>8.1f}  {:>9.4f}\n", e.feature, width, e.percent, e.beta);
  }
  return out;
}

// ─── Baselines ───────────────────────────────────────────────────────────────

BaselineResult run_baseline(const FeatureMatrix& eval_in, BaselineScope scope,
                            const FeatureMatrix* train_in, const glm::LogisticOptions& options) {
  eval_in.validate();
  const FeatureMatrix eval = select_columns(eval_in, demographic_columns(eval_in));
  BaselineResult result;
  const std::size_t N = eval.rows();

  if (scope == BaselineScope::local) {
    result.probabilities.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
      std::vector<Eigen::Index> rows;
      for (std::size_t k = 0; k < N; ++k) {
        if (k != i) rows.push_back(static_cast<Eigen::Index>(k));
      }
      const auto m = fit_baseline(eval.X(rows, Eigen::all), eval.y(rows), eval.feature_names,
                                  options);
      result.probabilities[i] = m.predict(eval.X.row(static_cast<Eigen::Index>(i)));
    }
    const auto all = fit_baseline(eval.X, eval.y, eval.feature_names, options);
    result.fit = all.fit;
    result.dropped = all.dropped;
  } else {
    const FeatureMatrix train =
        train_in ? select_columns(*train_in, demographic_columns(*train_in)) : eval;
    train.validate();
    if (train.feature_names != eval.feature_names) {
      throw InputError("training and evaluation matrices have different demographic columns");
    }
    const auto m = fit_baseline(train.X, train.y, train.feature_names, options);
    for (std::size_t i = 0; i < N; ++i) {
      result.probabilities.push_back(m.predict(eval.X.row(static_cast<Eigen::Index>(i))));
    }
    result.fit = m.fit;
    result.dropped = m.dropped;
  }
  if (!result.dropped.empty()) {
    spdlog::info("{} features were excluded due to zero variance: {}", result.dropped.size(),
                 fmt::join(result.dropped, ", "));
  }
  const std::vector<double> labels(eval.y.data(), eval.y.data() + eval.y.size());
  result.report = metrics::evaluate(result.probabilities, labels);
  return result;
}

metrics::EvalReport no_impairment_baseline(const Eigen::VectorXd& y) {
  if (y.size() == 0) throw PreconditionError("empty outcome vector");
  const std::vector<double> labels(y.data(), y.data() + y.size());
  const std::vector<double> probs(labels.size(), clamp_probability(y.mean()));
  return metrics::evaluate(probs, labels);
}

}  // namespace cogspeech
