#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cogspeech/summary.hpp"

namespace cogspeech {

// ─── Transcripts ─────────────────────────────────────────────────────────────

enum class Speaker { subject, tester };

struct Turn {
  double start = 0.0;  // seconds
  double end = 0.0;    // seconds, > start
  Speaker speaker = Speaker::subject;
  std::vector<std::string> tokens;

  bool operator==(const Turn&) const = default;
};

struct Transcript {
  std::string subject_id;
  std::vector<Turn> turns;  // sorted by start

  bool operator==(const Transcript&) const = default;
};

// Whitespace split; "<...>" tags stay whole, sentence punctuation becomes
// standalone tokens.
std::vector<std::string> tokenize(std::string_view utterance);

bool is_tag(std::string_view token) noexcept;
bool is_punctuation(std::string_view token) noexcept;
// A token that is neither a tag nor punctuation.
bool is_word(std::string_view token) noexcept;
std::string fold_case(std::string_view token);

// TSV: start_s<TAB>end_s<TAB>S|T<TAB>utterance, '#' comments.
// Throws ParseError naming the 1-based line number.
Transcript parse_transcript(std::istream& in, std::string subject_id);
Transcript read_transcript(const std::filesystem::path& path,
                           std::string subject_id);
void write_transcript(std::ostream& out, const Transcript& transcript);

// ─── Frame tracks ────────────────────────────────────────────────────────────

inline constexpr double kFrameHop = 0.010;

namespace channel {
inline constexpr std::string_view voicing = "voice_prob";
inline constexpr std::string_view pitch = "pitch";
inline constexpr std::string_view shimmer = "shimmer";
inline constexpr std::string_view jitter = "jitter";
inline constexpr std::string_view delta_suffix = "_diff";
}  // namespace channel

// voice_prob, pitch, rms_energy, hnr, zcr, shimmer, jitter, mfcc_1..mfcc_16.
std::vector<std::string> default_channel_names();

// Channels where zero is meaningful: excluded from per-subject z-scoring.
bool is_zero_meaningful(std::string_view channel_name) noexcept;
// Channels whose statistics are taken over non-zero frames only.
bool is_nonzero_masked(std::string_view channel_name) noexcept;

// T x C matrix of frame-level descriptors on a fixed 10 ms grid.
class FrameTrack {
 public:
  // Sparse channels default to the zero-meaningful channels present.
  FrameTrack(std::string subject_id, std::vector<std::string> channel_names,
             Eigen::MatrixXd values);
  FrameTrack(std::string subject_id, std::vector<std::string> channel_names,
             Eigen::MatrixXd values, std::vector<std::string> sparse_channels);

  const std::string& subject_id() const noexcept { return subject_id_; }
  double hop() const noexcept { return kFrameHop; }
  const std::vector<std::string>& channel_names() const noexcept {
    return channel_names_;
  }
  const std::vector<std::string>& sparse_channels() const noexcept {
    return sparse_channels_;
  }
  const Eigen::MatrixXd& values() const noexcept { return values_; }
  std::size_t frames() const noexcept {
    return static_cast<std::size_t>(values_.rows());
  }
  std::size_t channels() const noexcept {
    return static_cast<std::size_t>(values_.cols());
  }

  std::optional<std::size_t> index_of(std::string_view name) const;
  bool is_sparse(std::string_view name) const;

  // Rows at the given frame indices, in order.
  FrameTrack select_rows(std::span<const std::size_t> frames) const;

 private:
  std::string subject_id_;
  std::vector<std::string> channel_names_;
  Eigen::MatrixXd values_;
  std::vector<std::string> sparse_channels_;
};

// CSV with header time_s,<channel>,...; rows at 0.010 s steps from 0.
FrameTrack parse_frame_track(std::istream& in, std::string subject_id);
FrameTrack read_frame_track(const std::filesystem::path& path,
                            std::string subject_id);
void write_frame_track(std::ostream& out, const FrameTrack& track);

// ─── Demographics ────────────────────────────────────────────────────────────

enum class Sex { male, female };
enum class Education { some_high_school, high_school, some_college, college };
enum class Employment {
  full_time,
  part_time,
  retired,
  unemployed,
  disability,
  never,
  volunteer,
  student,
  homemaker,
  other
};

struct DemographicRecord {
  double age = 0.0;
  Sex sex = Sex::male;
  Education education = Education::some_high_school;
  Employment employment = Employment::full_time;

  bool operator==(const DemographicRecord&) const = default;
};

struct DemographicEntry {
  std::string subject_id;
  DemographicRecord record;
  int outcome = 0;  // 1 = impaired

  bool operator==(const DemographicEntry&) const = default;
};

std::string_view to_string(Sex value) noexcept;
std::string_view to_string(Education value) noexcept;
std::string_view to_string(Employment value) noexcept;

// CSV: subject_id,age,sex,education,employment,outcome
std::vector<DemographicEntry> parse_demographics(std::istream& in);
std::vector<DemographicEntry> read_demographics(
    const std::filesystem::path& path);
void write_demographics(std::ostream& out,
                        std::span<const DemographicEntry> entries);

// Age, 3 education, 9 employment and 1 sex indicator against the reference
// levels some_high_school, full_time and male.
NamedVector encode_demographics(const DemographicRecord& record);
const std::vector<std::string>& demographic_feature_names();
// The 13 indicator columns (everything except age).
bool is_demographic_dummy(std::string_view feature) noexcept;

// ─── Feature matrix ──────────────────────────────────────────────────────────

enum class FeatureFamily { demographic, audio, text };

std::string_view to_string(FeatureFamily family) noexcept;
// Inferred from the name: the demographic and text names are fixed sets,
// everything else is acoustic.
FeatureFamily family_of(std::string_view feature) noexcept;

struct FamilySet {
  bool demographic = true;
  bool audio = true;
  bool text = true;

  bool contains(FeatureFamily f) const noexcept;
  bool operator==(const FamilySet&) const = default;
};

// dem|text|audio|dem+text|dem+audio|audio+text|all (any '+' combination).
FamilySet parse_family_set(std::string_view spec);
std::string to_string(const FamilySet& families);

struct FeatureMatrix {
  std::vector<std::string> subject_ids;
  std::vector<std::string> feature_names;
  std::vector<FeatureFamily> families;
  Eigen::MatrixXd X;  // N x P
  Eigen::VectorXd y;  // N outcomes in {0, 1}

  std::size_t rows() const noexcept { return subject_ids.size(); }
  std::size_t cols() const noexcept { return feature_names.size(); }
  // Throws PreconditionError on shape or label violations.
  void validate() const;
  std::optional<std::size_t> column_of(std::string_view feature) const;
};

FeatureMatrix select_families(const FeatureMatrix& fm, const FamilySet& keep);
FeatureMatrix select_rows(const FeatureMatrix& fm,
                          std::span<const std::size_t> rows);
FeatureMatrix select_columns(const FeatureMatrix& fm,
                             std::span<const std::size_t> cols);

// CSV: subject_id,outcome,<feature...>
FeatureMatrix parse_feature_matrix(std::istream& in);
FeatureMatrix read_feature_matrix(const std::filesystem::path& path);
void write_feature_matrix(std::ostream& out, const FeatureMatrix& fm);

// ─── Column z-scoring ────────────────────────────────────────────────────────

// Per-column affine map x -> (x - center) / scale; identity where skipped.
struct ColumnScaling {
  std::vector<double> center;
  std::vector<double> scale;

  std::size_t size() const noexcept { return center.size(); }
  void apply(Eigen::Ref<Eigen::MatrixXd> m) const;
  void apply_row(Eigen::Ref<Eigen::RowVectorXd> row) const;
};

// Sample-sd z-scoring parameters. Throws DegenerateColumnError for a
// zero-variance column outside `skip`.
ColumnScaling fit_zscore(const Eigen::MatrixXd& m,
                         std::span<const std::string> names,
                         const std::set<std::string>& skip);

Eigen::MatrixXd zscore_columns(const Eigen::MatrixXd& m,
                               std::span<const std::string> names,
                               const std::set<std::string>& skip);

// Split a CSV line on commas (no quoting in any of the formats here).
std::vector<std::string> split_csv(std::string_view line);
// Strict double parse of the full field.
std::optional<double> parse_number(std::string_view field);

}  // namespace cogspeech
