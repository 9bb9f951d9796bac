#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cogspeech/error.hpp"
#include "cogspeech/harness.hpp"
#include "cogspeech/synth.hpp"

using namespace cogspeech;
namespace fs = std::filesystem;

namespace {

// Column "signal" is the outcome plus small noise; the rest is noise.
FeatureMatrix planted_matrix(std::uint64_t seed, int n = 24, int noise_cols = 4) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  FeatureMatrix fm;
  fm.feature_names = {"signal"};
  for (int j = 0; j < noise_cols; ++j) fm.feature_names.push_back("noise_" + std::to_string(j));
  fm.feature_names.push_back("age");
  for (const auto& f : fm.feature_names) fm.families.push_back(family_of(f));
  fm.X.resize(n, static_cast<Eigen::Index>(fm.feature_names.size()));
  fm.y.resize(n);
  for (int i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "S%03d", i);
    fm.subject_ids.emplace_back(id);
    fm.y[i] = i % 3 == 0 ? 1.0 : 0.0;
    fm.X(i, 0) = fm.y[i] + 0.1 * nd(gen);
    for (int j = 1; j < fm.X.cols(); ++j) fm.X(i, j) = nd(gen);
    fm.X(i, fm.X.cols() - 1) = 70.0 + 5.0 * nd(gen);
  }
  return fm;
}

LoocvConfig quick_config() {
  LoocvConfig c;
  c.alpha_step = 0.25;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("cogspeech_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("LOOCV produces one result per subject and recovers a planted feature") {
  const auto fm = planted_matrix(1);
  const auto r = run_loocv(fm, quick_config());
  REQUIRE(r.folds.size() == fm.rows());
  for (std::size_t i = 0; i < r.folds.size(); ++i) {
    const auto& f = r.folds[i];
    CHECK(f.subject_id == fm.subject_ids[i]);
    CHECK(f.probability > 0.0);
    CHECK(f.probability < 1.0);
    for (const auto& a : f.active) {
      CHECK(std::find(f.screened.begin(), f.screened.end(), a) != f.screened.end());
    }
    CHECK(std::find(f.active.begin(), f.active.end(), "signal") != f.active.end());
  }
  CHECK(r.report.auc > 0.95);
  CHECK(r.alpha_count == 5);
  CHECK(r.max_lambda_count <= 100);
  CHECK(selection_percentages(r.folds).at("signal") == 100.0);
  const auto& entries = r.selection.entries;
  REQUIRE_FALSE(entries.empty());
  CHECK(entries.back().feature == "signal");
  for (std::size_t k = 1; k < entries.size(); ++k) {
    CHECK(entries[k].percent >= entries[k - 1].percent);
    CHECK(entries[k].percent <= 100.0);
  }
  CHECK(format_selection(r.selection).find("signal") != std::string::npos);
}

TEST_CASE("fold results do not depend on the thread count") {
  const auto fm = planted_matrix(2);
  auto c = quick_config();
  const auto one = run_loocv(fm, c);
  c.threads = 3;
  const auto three = run_loocv(fm, c);
  CHECK(one.folds == three.folds);
  CHECK(one.report.auc == three.report.auc);
}

TEST_CASE("the held-out outcome never reaches the training artifacts") {
  const auto fm = planted_matrix(3, 24, 5);
  auto c = quick_config();
  for (std::size_t held : {0u, 5u, 11u}) {
    FoldArtifacts before, after;
    run_fold(fm, held, c, &before);
    auto flipped = fm;
    flipped.y[static_cast<Eigen::Index>(held)] = 1.0 - flipped.y[static_cast<Eigen::Index>(held)];
    run_fold(flipped, held, c, &after);
    CHECK(before == after);
    CHECK(before.lambdas == after.lambdas);
    CHECK(before.screened == after.screened);
  }
}

TEST_CASE("training artifacts do depend on training outcomes") {
  const auto fm = planted_matrix(3, 24, 5);
  FoldArtifacts before, after;
  run_fold(fm, 0, quick_config(), &before);
  auto flipped = fm;
  flipped.y[4] = 1.0 - flipped.y[4];
  run_fold(flipped, 0, quick_config(), &after);
  CHECK_FALSE(before == after);
}

TEST_CASE("fold log round trip reproduces selection percentages") {
  const auto fm = planted_matrix(4);
  const auto r = run_loocv(fm, quick_config());
  std::ostringstream out;
  write_fold_log(out, r.folds);
  std::istringstream in(out.str());
  const auto back = read_fold_log(in);
  CHECK(back == r.folds);
  CHECK(selection_percentages(back) == selection_percentages(r.folds));
  std::istringstream bad("{\"subject_id\": 3}\n");
  CHECK_THROWS_AS(read_fold_log(bad), ParseError);
}

TEST_CASE("global normalization mode runs on unscaled input") {
  const auto fm = planted_matrix(5);
  auto c = quick_config();
  c.normalize = Normalization::global;
  const auto r = run_loocv(fm, c);
  CHECK(r.folds.size() == fm.rows());
  CHECK(r.report.auc > 0.9);
  CHECK(parse_normalization("per_fold") == Normalization::per_fold);
  CHECK_THROWS(parse_normalization("sometimes"));
}

TEST_CASE("LOOCV preconditions") {
  auto fm = planted_matrix(6, 9);
  CHECK_THROWS_AS(run_loocv(fm, quick_config()), PreconditionError);
  fm = planted_matrix(6, 12);
  fm.y.setZero();
  fm.y[0] = 1.0;
  CHECK_THROWS_AS(run_loocv(fm, quick_config()), PreconditionError);
}

TEST_CASE("no-impairment baseline") {
  Eigen::VectorXd y(100);
  for (int i = 0; i < 100; ++i) y[i] = i < 23 ? 1.0 : 0.0;
  const auto r = no_impairment_baseline(y);
  CHECK(r.auc == 0.5);
  CHECK(r.accuracy == doctest::Approx(0.77));
}

namespace {

FeatureMatrix demographic_matrix(std::uint64_t seed, int n, bool with_students) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u;
  FeatureMatrix fm;
  fm.feature_names = demographic_feature_names();
  fm.feature_names.push_back("pitch_min");
  for (const auto& f : fm.feature_names) fm.families.push_back(family_of(f));
  fm.X = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(fm.feature_names.size()));
  fm.y.resize(n);
  for (int i = 0; i < n; ++i) {
    fm.subject_ids.push_back("D" + std::to_string(100000 + i));
    DemographicRecord r;
    r.age = 72.0 + 7.0 * nd(gen);
    r.sex = u(gen) < 0.55 ? Sex::female : Sex::male;
    r.education = static_cast<Education>(gen() % 4);
    r.employment = u(gen) < 0.6 ? Employment::retired
                                : (with_students && u(gen) < 0.2 ? Employment::student
                                                                 : Employment::full_time);
    const auto v = encode_demographics(r);
    for (std::size_t j = 0; j < v.size(); ++j) fm.X(i, static_cast<Eigen::Index>(j)) = v.values[j];
    fm.X(i, fm.X.cols() - 1) = nd(gen);
    const double eta = -1.2 + 0.12 * (r.age - 72.0) - 0.5 * (r.education == Education::college);
    fm.y[i] = u(gen) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
  }
  return fm;
}

}  // namespace

TEST_CASE("local baseline drops zero-variance dummies and uses demographic columns only") {
  const auto fm = demographic_matrix(1, 60, false);
  const auto r = run_baseline(fm, BaselineScope::local);
  CHECK(r.probabilities.size() == 60);
  // 8 employment levels never occur.
  CHECK(r.dropped.size() == 8);
  CHECK(r.fit.names.size() == 14 - 8);
  CHECK(std::find(r.fit.names.begin(), r.fit.names.end(), "pitch_min") == r.fit.names.end());
}

TEST_CASE("a much larger global training set does at least as well") {
  const auto eval = demographic_matrix(2, 60, false);
  const auto train = demographic_matrix(3, 3000, false);
  const auto local = run_baseline(eval, BaselineScope::local);
  const auto global = run_baseline(eval, BaselineScope::global, &train);
  CHECK(global.report.auc >= local.report.auc);
  CHECK(global.probabilities.size() == 60);
}

TEST_CASE("synthetic corpus is deterministic and honours the prevalence") {
  SynthConfig cfg;
  cfg.subjects = 12;
  cfg.seed = 7;
  const auto a = synthesize_corpus(cfg);
  const auto b = synthesize_corpus(cfg);
  const auto da = scratch("synth_a"), db = scratch("synth_b");
  const auto files = write_corpus(a, da);
  CHECK(write_corpus(b, db) == files);
  CHECK(files.size() == 1 + 2 * 12);
  for (const auto& f : files) CHECK(slurp(da / f) == slurp(db / f));
  int impaired = 0;
  for (const auto& d : a.demographics) impaired += d.outcome;
  CHECK(impaired == static_cast<int>(std::lround(0.228 * 12)));

  const auto back = read_corpus(da);
  CHECK(back.demographics == a.demographics);
  CHECK(back.transcripts == a.transcripts);

  cfg.seed = 8;
  const auto other = synthesize_corpus(cfg);
  CHECK_FALSE(other.transcripts == a.transcripts);
  fs::remove_all(da);
  fs::remove_all(db);
}

TEST_CASE("synthetic config JSON round trip and validation") {
  SynthConfig cfg;
  cfg.subjects = 33;
  cfg.pitch_dip_hz = 12.5;
  const auto back = parse_synth_config(synth_config_json(cfg));
  CHECK(back.subjects == 33);
  CHECK(back.pitch_dip_hz == 12.5);
  CHECK_THROWS_AS(parse_synth_config("{\"sbujects\": 3}"), ParseError);
  cfg.prevalence = 1.0;
  CHECK_THROWS_AS(cfg.validate(), PreconditionError);
  cfg.prevalence = 0.3;
  cfg.subjects = 5;
  CHECK_THROWS_AS(cfg.validate(), PreconditionError);
  const auto null = SynthConfig{}.without_effects();
  CHECK(null.pitch_dip_hz == 0.0);
  CHECK(null.turn_duration_ratio == 1.0);
  CHECK(null.extra_questions == 0.0);
}

TEST_CASE("planted effects separate the groups and vanish without effects") {
  SynthConfig cfg;
  cfg.subjects = 60;
  cfg.seed = 21;
  const std::vector<std::string> planted{"pitch_min", "jitter_sd", "dur_mean", "q_sum"};
  auto screen = [&](const SynthConfig& c) {
    ExtractOptions opts;
    opts.families = parse_family_set("audio+text");
    const auto fm = extract_features(synthesize_corpus(c), opts);
    const auto s = metrics::pearson_screen(fm.X, fm.y);
    std::map<std::string, double> p;
    for (std::size_t j = 0; j < s.size(); ++j) p[fm.feature_names[j]] = s[j].p;
    return p;
  };
  const auto with = screen(cfg);
  for (const auto& f : planted) CHECK(with.at(f) < 0.01);
  const auto without = screen(cfg.without_effects());
  int selected = 0;
  for (const auto& [name, p] : without) selected += p < 0.01;
  for (const auto& f : planted) CHECK(without.at(f) > 0.001);
  // 251 null tests at the 1% level.
  CHECK(selected <= 10);
}
