#include "cogspeech/corpus.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "cogspeech/error.hpp"
#include "cogspeech/text.hpp"

namespace cogspeech {

namespace {

constexpr std::string_view kPunctuation = "?.!,;:";

bool is_punct_char(char c) noexcept {
  return kPunctuation.find(c) != std::string_view::npos;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::vector<std::string_view> split_on(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return in;
}

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view field, const std::array<std::string_view, N>& names,
                std::string_view what, std::size_t line_no) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == field) return static_cast<Enum>(i);
  }
  throw ParseError(fmt::format("unknown {} '{}' at line {}", what, field, line_no));
}

constexpr std::array<std::string_view, 2> kSexNames{"male", "female"};
constexpr std::array<std::string_view, 4> kEducationNames{
    "some_high_school", "high_school", "some_college", "college"};
constexpr std::array<std::string_view, 10> kEmploymentNames{
    "full_time", "part_time", "retired", "unemployed", "disability",
    "never",     "volunteer", "student", "homemaker",  "other"};

}  // namespace

// ─── Tokens ──────────────────────────────────────────────────────────────────

std::vector<std::string> tokenize(std::string_view utterance) {
  std::vector<std::string> tokens;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) tokens.push_back(std::move(word));
    word.clear();
  };
  for (std::size_t i = 0; i < utterance.size(); ++i) {
    const char c = utterance[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (c == '<') {
      const std::size_t close = utterance.find('>', i);
      const std::size_t space = utterance.find_first_of(" \t", i);
      if (close != std::string_view::npos && close < space) {
        flush();
        tokens.emplace_back(utterance.substr(i, close - i + 1));
        i = close;
      } else {
        word.push_back(c);
      }
    } else if (is_punct_char(c)) {
      flush();
      tokens.emplace_back(1, c);
    } else {
      word.push_back(c);
    }
  }
  flush();
  return tokens;
}

bool is_tag(std::string_view token) noexcept {
  return token.size() >= 2 && token.front() == '<' && token.back() == '>';
}

bool is_punctuation(std::string_view token) noexcept {
  return token.size() == 1 && is_punct_char(token.front());
}

bool is_word(std::string_view token) noexcept {
  return !token.empty() && !is_tag(token) && !is_punctuation(token);
}

std::string fold_case(std::string_view token) {
  std::string out(token);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

std::optional<double> parse_number(std::string_view field) {
  while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
  while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
  if (field.empty()) return std::nullopt;
  if (field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  for (auto f : split_on(line, ',')) out.emplace_back(f);
  return out;
}

// ─── Transcripts ─────────────────────────────────────────────────────────────

Transcript parse_transcript(std::istream& in, std::string subject_id) {
  Transcript t;
  t.subject_id = std::move(subject_id);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_on(line, '\t');
    if (fields.size() != 4) {
      throw ParseError(fmt::format("expected 4 tab-separated columns, got {} at line {}",
                                   fields.size(), line_no));
    }
    const auto start = parse_number(fields[0]);
    const auto end = parse_number(fields[1]);
    if (!start || !end) {
      throw ParseError(fmt::format("non-numeric time at line {}", line_no));
    }
    if (*end < *start) {
      throw ParseError(fmt::format("end before start at line {}", line_no));
    }
    if (*end == *start) {
      throw ParseError(fmt::format("zero-length turn at line {}", line_no));
    }
    Turn turn;
    turn.start = *start;
    turn.end = *end;
    if (fields[2] == "S") {
      turn.speaker = Speaker::subject;
    } else if (fields[2] == "T") {
      turn.speaker = Speaker::tester;
    } else {
      throw ParseError(
          fmt::format("unknown speaker code '{}' at line {}", fields[2], line_no));
    }
    turn.tokens = tokenize(fields[3]);
    t.turns.push_back(std::move(turn));
  }
  std::stable_sort(t.turns.begin(), t.turns.end(),
                   [](const Turn& a, const Turn& b) { return a.start < b.start; });
  for (std::size_t i = 1; i < t.turns.size(); ++i) {
    if (t.turns[i].start < t.turns[i - 1].end) {
      spdlog::warn("transcript {}: turn starting at {}s overlaps the previous turn",
                   t.subject_id, t.turns[i].start);
    }
  }
  return t;
}

Transcript read_transcript(const std::filesystem::path& path, std::string subject_id) {
  auto in = open_input(path);
  try {
    return parse_transcript(in, std::move(subject_id));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_transcript(std::ostream& out, const Transcript& transcript) {
  for (const auto& turn : transcript.turns) {
    out << fmt::format("{}\t{}\t{}\t", turn.start, turn.end,
                       turn.speaker == Speaker::subject ? 'S' : 'T');
    for (std::size_t i = 0; i < turn.tokens.size(); ++i) {
      if (i) out << ' ';
      out << turn.tokens[i];
    }
    out << '\n';
  }
}

// ─── Frame tracks ────────────────────────────────────────────────────────────

std::vector<std::string> default_channel_names() {
  std::vector<std::string> names{"voice_prob", "pitch", "rms_energy", "hnr",
                                 "zcr",        "shimmer", "jitter"};
  for (int k = 1; k <= 16; ++k) names.push_back(fmt::format("mfcc_{}", k));
  return names;
}

bool is_zero_meaningful(std::string_view name) noexcept {
  return name == channel::voicing || is_nonzero_masked(name);
}

bool is_nonzero_masked(std::string_view name) noexcept {
  return name == channel::pitch || name == channel::shimmer || name == channel::jitter;
}

FrameTrack::FrameTrack(std::string subject_id, std::vector<std::string> channel_names,
                       Eigen::MatrixXd values)
    : FrameTrack(subject_id, channel_names, std::move(values), [&] {
        std::vector<std::string> sparse;
        for (const auto& n : channel_names) {
          if (is_zero_meaningful(n)) sparse.push_back(n);
        }
        return sparse;
      }()) {}

FrameTrack::FrameTrack(std::string subject_id, std::vector<std::string> channel_names,
                       Eigen::MatrixXd values, std::vector<std::string> sparse_channels)
    : subject_id_(std::move(subject_id)),
      channel_names_(std::move(channel_names)),
      values_(std::move(values)),
      sparse_channels_(std::move(sparse_channels)) {
  if (static_cast<std::size_t>(values_.cols()) != channel_names_.size()) {
    throw InputError(fmt::format("frame track {}: {} channel names for {} columns",
                                 subject_id_, channel_names_.size(), values_.cols()));
  }
  std::unordered_set<std::string> seen;
  for (const auto& n : channel_names_) {
    if (!seen.insert(n).second) {
      throw InputError(fmt::format("frame track {}: duplicate channel '{}'", subject_id_, n));
    }
  }
  for (const auto& s : sparse_channels_) {
    if (!seen.contains(s)) {
      throw InputError(fmt::format("frame track {}: sparse channel '{}' not present",
                                   subject_id_, s));
    }
  }
  if (!seen.contains(std::string(channel::voicing))) {
    throw InputError(fmt::format("frame track {}: no '{}' channel", subject_id_,
                                 channel::voicing));
  }
}

std::optional<std::size_t> FrameTrack::index_of(std::string_view name) const {
  const auto it = std::find(channel_names_.begin(), channel_names_.end(), name);
  if (it == channel_names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - channel_names_.begin());
}

bool FrameTrack::is_sparse(std::string_view name) const {
  return std::find(sparse_channels_.begin(), sparse_channels_.end(), name) !=
         sparse_channels_.end();
}

FrameTrack FrameTrack::select_rows(std::span<const std::size_t> frames) const {
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(frames.size()), values_.cols());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    sub.row(static_cast<Eigen::Index>(i)) =
        values_.row(static_cast<Eigen::Index>(frames[i]));
  }
  return FrameTrack(subject_id_, channel_names_, std::move(sub), sparse_channels_);
}

FrameTrack parse_frame_track(std::istream& in, std::string subject_id) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty frame track");
  strip_cr(line);
  auto header = split_csv(line);
  if (header.size() < 2 || header.front() != "time_s") {
    throw ParseError("frame track header must start with time_s at line 1");
  }
  std::vector<std::string> names(header.begin() + 1, header.end());
  const std::size_t C = names.size();
  std::vector<double> data;
  std::size_t row = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_on(line, ',');
    if (fields.size() != C + 1) {
      throw ParseError(fmt::format("expected {} columns, got {} at line {}", C + 1,
                                   fields.size(), line_no));
    }
    const auto t = parse_number(fields[0]);
    if (!t) throw ParseError(fmt::format("non-numeric time at line {}", line_no));
    const double expected = static_cast<double>(row) * kFrameHop;
    if (std::abs(*t - expected) > 1e-6) {
      throw ParseError(fmt::format("time {} at line {} breaks the 0.010 s grid (expected {:.3f})",
                                   fields[0], line_no, expected));
    }
    for (std::size_t c = 1; c <= C; ++c) {
      const auto v = parse_number(fields[c]);
      if (!v) {
        throw ParseError(fmt::format("non-numeric value in column '{}' at line {}",
                                     names[c - 1], line_no));
      }
      data.push_back(*v);
    }
    ++row;
  }
  if (row == 0) throw ParseError("frame track has no frames");
  Eigen::MatrixXd values =
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          data.data(), static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(C));
  try {
    return FrameTrack(std::move(subject_id), std::move(names), std::move(values));
  } catch (const InputError& e) {
    throw ParseError(e.what());
  }
}

FrameTrack read_frame_track(const std::filesystem::path& path, std::string subject_id) {
  auto in = open_input(path);
  try {
    return parse_frame_track(in, std::move(subject_id));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_frame_track(std::ostream& out, const FrameTrack& track) {
  out << "time_s";
  for (const auto& n : track.channel_names()) out << ',' << n;
  out << '\n';
  const auto& v = track.values();
  std::string row;
  for (Eigen::Index t = 0; t < v.rows(); ++t) {
    row = fmt::format("{:.2f}", static_cast<double>(t) * kFrameHop);
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      row += ',';
      row += fmt::format("{}", v(t, c));
    }
    row += '\n';
    out << row;
  }
}

// ─── Demographics ────────────────────────────────────────────────────────────

std::string_view to_string(Sex value) noexcept {
  return kSexNames[static_cast<std::size_t>(value)];
}
std::string_view to_string(Education value) noexcept {
  return kEducationNames[static_cast<std::size_t>(value)];
}
std::string_view to_string(Employment value) noexcept {
  return kEmploymentNames[static_cast<std::size_t>(value)];
}

std::vector<DemographicEntry> parse_demographics(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty demographics file");
  strip_cr(line);
  if (line != "subject_id,age,sex,education,employment,outcome") {
    throw ParseError(
        "demographics header must be subject_id,age,sex,education,employment,outcome");
  }
  std::vector<DemographicEntry> entries;
  std::unordered_set<std::string> ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_on(line, ',');
    if (f.size() != 6) {
      throw ParseError(fmt::format("expected 6 columns, got {} at line {}", f.size(), line_no));
    }
    DemographicEntry e;
    e.subject_id = std::string(f[0]);
    if (e.subject_id.empty()) throw ParseError(fmt::format("empty subject_id at line {}", line_no));
    if (!ids.insert(e.subject_id).second) {
      throw ParseError(fmt::format("duplicate subject '{}' at line {}", e.subject_id, line_no));
    }
    const auto age = parse_number(f[1]);
    if (!age) throw ParseError(fmt::format("non-numeric age at line {}", line_no));
    e.record.age = *age;
    e.record.sex = parse_enum<Sex>(f[2], kSexNames, "sex", line_no);
    e.record.education = parse_enum<Education>(f[3], kEducationNames, "education", line_no);
    e.record.employment = parse_enum<Employment>(f[4], kEmploymentNames, "employment", line_no);
    if (f[5] == "0") {
      e.outcome = 0;
    } else if (f[5] == "1") {
      e.outcome = 1;
    } else {
      throw ParseError(fmt::format("outcome must be 0 or 1 at line {}", line_no));
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<DemographicEntry> read_demographics(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return parse_demographics(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_demographics(std::ostream& out, std::span<const DemographicEntry> entries) {
  out << "subject_id,age,sex,education,employment,outcome\n";
  for (const auto& e : entries) {
    out << fmt::format("{},{},{},{},{},{}\n", e.subject_id, e.record.age,
                       to_string(e.record.sex), to_string(e.record.education),
                       to_string(e.record.employment), e.outcome);
  }
}

const std::vector<std::string>& demographic_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n{"age"};
    for (std::size_t i = 1; i < kEducationNames.size(); ++i) {
      n.push_back("edu_" + std::string(kEducationNames[i]));
    }
    for (std::size_t i = 1; i < kEmploymentNames.size(); ++i) {
      n.push_back("emp_" + std::string(kEmploymentNames[i]));
    }
    n.emplace_back("sex_female");
    return n;
  }();
  return names;
}

bool is_demographic_dummy(std::string_view feature) noexcept {
  const auto& names = demographic_feature_names();
  return feature != "age" &&
         std::find(names.begin(), names.end(), feature) != names.end();
}

NamedVector encode_demographics(const DemographicRecord& record) {
  const auto& names = demographic_feature_names();
  NamedVector v;
  v.names = names;
  v.values.assign(names.size(), 0.0);
  v.values[0] = record.age;
  const auto edu = static_cast<std::size_t>(record.education);
  if (edu > 0) v.values[edu] = 1.0;
  const auto emp = static_cast<std::size_t>(record.employment);
  if (emp > 0) v.values[kEducationNames.size() - 1 + emp] = 1.0;
  if (record.sex == Sex::female) v.values.back() = 1.0;
  return v;
}

// ─── Feature matrix ──────────────────────────────────────────────────────────

std::string_view to_string(FeatureFamily family) noexcept {
  switch (family) {
    case FeatureFamily::demographic: return "demographic";
    case FeatureFamily::audio: return "audio";
    case FeatureFamily::text: return "text";
  }
  return "audio";
}

FeatureFamily family_of(std::string_view feature) noexcept {
  const auto& dem = demographic_feature_names();
  if (std::find(dem.begin(), dem.end(), feature) != dem.end()) {
    return FeatureFamily::demographic;
  }
  const auto& text = text_feature_names();
  if (std::find(text.begin(), text.end(), feature) != text.end()) {
    return FeatureFamily::text;
  }
  return FeatureFamily::audio;
}

bool FamilySet::contains(FeatureFamily f) const noexcept {
  switch (f) {
    case FeatureFamily::demographic: return demographic;
    case FeatureFamily::audio: return audio;
    case FeatureFamily::text: return text;
  }
  return false;
}

FamilySet parse_family_set(std::string_view spec) {
  if (spec == "all") return FamilySet{};
  FamilySet s{false, false, false};
  for (auto part : split_on(spec, '+')) {
    if (part == "dem") {
      s.demographic = true;
    } else if (part == "audio") {
      s.audio = true;
    } else if (part == "text") {
      s.text = true;
    } else {
      throw InputError(fmt::format("unknown feature family '{}' in '{}'", part, spec));
    }
  }
  return s;
}

std::string to_string(const FamilySet& f) {
  if (f.demographic && f.audio && f.text) return "all";
  std::vector<std::string_view> parts;
  if (f.demographic) parts.push_back("dem");
  if (f.audio) parts.push_back("audio");
  if (f.text) parts.push_back("text");
  return fmt::format("{}", fmt::join(parts, "+"));
}

void FeatureMatrix::validate() const {
  const auto n = static_cast<Eigen::Index>(subject_ids.size());
  const auto p = static_cast<Eigen::Index>(feature_names.size());
  if (X.rows() != n || X.cols() != p || y.size() != n ||
      families.size() != feature_names.size()) {
    throw PreconditionError("feature matrix shape does not match its names");
  }
  std::unordered_set<std::string> seen;
  for (const auto& f : feature_names) {
    if (!seen.insert(f).second) {
      throw PreconditionError("duplicate feature name '" + f + "'");
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) {
      throw PreconditionError("outcome of " + subject_ids[static_cast<std::size_t>(i)] +
                              " is not 0 or 1");
    }
  }
}

std::optional<std::size_t> FeatureMatrix::column_of(std::string_view feature) const {
  const auto it = std::find(feature_names.begin(), feature_names.end(), feature);
  if (it == feature_names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - feature_names.begin());
}

FeatureMatrix select_columns(const FeatureMatrix& fm, std::span<const std::size_t> cols) {
  FeatureMatrix out;
  out.subject_ids = fm.subject_ids;
  out.y = fm.y;
  out.X.resize(fm.X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    out.feature_names.push_back(fm.feature_names[cols[j]]);
    out.families.push_back(fm.families[cols[j]]);
    out.X.col(static_cast<Eigen::Index>(j)) = fm.X.col(static_cast<Eigen::Index>(cols[j]));
  }
  return out;
}

FeatureMatrix select_rows(const FeatureMatrix& fm, std::span<const std::size_t> rows) {
  FeatureMatrix out;
  out.feature_names = fm.feature_names;
  out.families = fm.families;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), fm.X.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    out.subject_ids.push_back(fm.subject_ids[rows[i]]);
    out.X.row(static_cast<Eigen::Index>(i)) = fm.X.row(r);
    out.y[static_cast<Eigen::Index>(i)] = fm.y[r];
  }
  return out;
}

FeatureMatrix select_families(const FeatureMatrix& fm, const FamilySet& keep) {
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < fm.cols(); ++j) {
    if (keep.contains(fm.families[j])) cols.push_back(j);
  }
  return select_columns(fm, cols);
}

FeatureMatrix parse_feature_matrix(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty feature matrix");
  strip_cr(line);
  const auto header = split_csv(line);
  if (header.size() < 2 || header[0] != "subject_id" || header[1] != "outcome") {
    throw ParseError("feature matrix header must start with subject_id,outcome");
  }
  FeatureMatrix fm;
  fm.feature_names.assign(header.begin() + 2, header.end());
  for (const auto& f : fm.feature_names) fm.families.push_back(family_of(f));
  const std::size_t P = fm.feature_names.size();
  std::vector<double> data;
  std::vector<double> outcomes;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_on(line, ',');
    if (f.size() != P + 2) {
      throw ParseError(fmt::format("expected {} columns, got {} at line {}", P + 2, f.size(),
                                   line_no));
    }
    fm.subject_ids.emplace_back(f[0]);
    if (f[1] != "0" && f[1] != "1") {
      throw ParseError(fmt::format("outcome must be 0 or 1 at line {}", line_no));
    }
    outcomes.push_back(f[1] == "1" ? 1.0 : 0.0);
    for (std::size_t j = 0; j < P; ++j) {
      const auto v = parse_number(f[j + 2]);
      if (!v) {
        throw ParseError(fmt::format("non-numeric value for '{}' at line {}",
                                     fm.feature_names[j], line_no));
      }
      data.push_back(*v);
    }
  }
  const auto N = static_cast<Eigen::Index>(outcomes.size());
  fm.X = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      data.data(), N, static_cast<Eigen::Index>(P));
  fm.y = Eigen::Map<Eigen::VectorXd>(outcomes.data(), N);
  try {
    fm.validate();
  } catch (const PreconditionError& e) {
    throw ParseError(e.what());
  }
  return fm;
}

FeatureMatrix read_feature_matrix(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return parse_feature_matrix(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_feature_matrix(std::ostream& out, const FeatureMatrix& fm) {
  out << "subject_id,outcome";
  for (const auto& f : fm.feature_names) out << ',' << f;
  out << '\n';
  for (std::size_t i = 0; i < fm.rows(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    std::string row = fmt::format("{},{}", fm.subject_ids[i], fm.y[r] > 0.5 ? 1 : 0);
    for (Eigen::Index j = 0; j < fm.X.cols(); ++j) {
      row += fmt::format(",{}", fm.X(r, j));
    }
    row += '\n';
    out << row;
  }
}

// ─── Column z-scoring ────────────────────────────────────────────────────────

void ColumnScaling::apply(Eigen::Ref<Eigen::MatrixXd> m) const {
  for (std::size_t j = 0; j < size(); ++j) {
    auto col = m.col(static_cast<Eigen::Index>(j));
    col = (col.array() - center[j]) / scale[j];
  }
}

void ColumnScaling::apply_row(Eigen::Ref<Eigen::RowVectorXd> row) const {
  for (std::size_t j = 0; j < size(); ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    row[c] = (row[c] - center[j]) / scale[j];
  }
}

ColumnScaling fit_zscore(const Eigen::MatrixXd& m, std::span<const std::string> names,
                         const std::set<std::string>& skip) {
  if (names.size() != static_cast<std::size_t>(m.cols())) {
    throw PreconditionError("column names do not match the matrix");
  }
  ColumnScaling s;
  s.center.assign(names.size(), 0.0);
  s.scale.assign(names.size(), 1.0);
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (skip.contains(names[j])) continue;
    const auto col = m.col(static_cast<Eigen::Index>(j));
    const std::span<const double> values(col.data(), static_cast<std::size_t>(col.size()));
    const double mu = mean(values);
    const double sd = sample_sd(values);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mu)))) throw DegenerateColumnError(names[j]);
    s.center[j] = mu;
    s.scale[j] = sd;
  }
  return s;
}

Eigen::MatrixXd zscore_columns(const Eigen::MatrixXd& m, std::span<const std::string> names,
                               const std::set<std::string>& skip) {
  Eigen::MatrixXd out = m;
  fit_zscore(m, names, skip).apply(out);
  return out;
}

}  // namespace cogspeech
