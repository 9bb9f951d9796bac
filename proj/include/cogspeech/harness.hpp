#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cogspeech/acoustic.hpp"
#include "cogspeech/corpus.hpp"
#include "cogspeech/glm.hpp"
#include "cogspeech/metrics.hpp"
#include "cogspeech/text.hpp"

namespace cogspeech {

// ─── Corpus on disk ──────────────────────────────────────────────────────────
//
//   <dir>/demographics.csv
//   <dir>/transcripts/<subject_id>.tsv
//   <dir>/frames/<subject_id>.csv

struct Corpus {
  std::vector<DemographicEntry> demographics;
  std::vector<Transcript> transcripts;  // same order as demographics
  std::vector<FrameTrack> tracks;       // same order as demographics
};

// Throws InputError naming the subject when a file is missing, ParseError
// (with the file name) for malformed content.
Corpus read_corpus(const std::filesystem::path& dir);
// Returns the written paths relative to dir, sorted.
std::vector<std::string> write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

struct ExtractOptions {
  FamilySet families;
  acoustic::Options acoustic;
  text::Options text;
  std::size_t threads = 1;
};

// Demographic (14), acoustic (10 per base channel) and text (21) columns.
FeatureMatrix extract_features(const Corpus& corpus, const ExtractOptions& options = {});

// ─── Nested leave-one-out protocol ───────────────────────────────────────────

enum class Normalization { per_fold, global };

std::string_view to_string(Normalization n) noexcept;
Normalization parse_normalization(std::string_view text);

struct LoocvConfig {
  double alpha_step = 0.01;
  std::size_t inner_folds = 0;  // 0 means leave-one-out over the training set
  double screen_level = 0.01;
  Normalization normalize = Normalization::per_fold;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
  glm::PathOptions path;
};

struct FoldResult {
  std::string subject_id;
  std::vector<std::string> screened;
  std::vector<std::string> active;
  double probability = 0.5;
  int outcome = 0;
  double alpha = 0.0;
  double lambda = 0.0;

  bool operator==(const FoldResult&) const = default;
};

// Everything a fold learns from its training rows.
struct FoldArtifacts {
  std::vector<std::string> dropped;  // zero variance on the training rows
  ColumnScaling scaling;             // over the kept columns
  std::vector<std::string> screened;
  std::vector<double> lambdas;
  double alpha = 0.0;
  double lambda = 0.0;
  glm::Coefficients coefficients;  // over the screened columns
  std::size_t max_path_length = 0;  // over the alpha grid

  bool operator==(const FoldArtifacts& o) const;
};

// One outer fold. With Normalization::global, fm must already be z-scored.
FoldResult run_fold(const FeatureMatrix& fm, std::size_t held_out, const LoocvConfig& config,
                    FoldArtifacts* artifacts = nullptr);

struct SelectionEntry {
  std::string feature;
  double percent = 0.0;  // of folds with a non-zero coefficient
  double beta = 0.0;     // all-data refit
};

struct SelectionReport {
  std::vector<SelectionEntry> entries;  // ascending by percent, then |beta|
  double alpha = 0.0;
  double lambda = 0.0;
};

// Percent of folds selecting each feature that was selected at least once.
std::map<std::string, double> selection_percentages(const std::vector<FoldResult>& folds);

struct LoocvResult {
  std::vector<FoldResult> folds;  // sorted by subject id
  metrics::EvalReport report;
  SelectionReport selection;
  std::size_t alpha_count = 0;
  std::size_t max_lambda_count = 0;
};

// Preconditions: N >= 10 and at least two subjects in each class.
LoocvResult run_loocv(const FeatureMatrix& fm, const LoocvConfig& config = {});

// The fold procedure applied to all rows; beta is zero for unselected
// features.
SelectionReport refit_all(const FeatureMatrix& fm, const LoocvConfig& config,
                          const std::vector<FoldResult>& folds);

// JSON lines, one FoldResult per line.
void write_fold_log(std::ostream& out, const std::vector<FoldResult>& folds);
std::vector<FoldResult> read_fold_log(std::istream& in);

std::string format_selection(const SelectionReport& report);

// ─── Baselines ───────────────────────────────────────────────────────────────

enum class BaselineScope { local, global };

struct BaselineResult {
  glm::LogisticFit fit;
  metrics::EvalReport report;
  std::vector<double> probabilities;  // on the evaluation subjects
  std::vector<std::string> dropped;   // zero-variance training columns
};

// Unregularized logistic regression on demographic columns. Local scope
// evaluates leave-one-out predictions and reports the all-data fit; global
// scope fits once on `train` and evaluates on `eval`.
BaselineResult run_baseline(const FeatureMatrix& eval, BaselineScope scope,
                            const FeatureMatrix* train = nullptr,
                            const glm::LogisticOptions& options = {});

// Constant prevalence score for every subject.
metrics::EvalReport no_impairment_baseline(const Eigen::VectorXd& y);

}  // namespace cogspeech
