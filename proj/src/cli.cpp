#include "cogspeech/cli.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>
#include <openssl/opensslv.h>
#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <Eigen/Core>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "cogspeech/error.hpp"
#include "cogspeech/harness.hpp"
#include "cogspeech/synth.hpp"

#ifndef COGSPEECH_VERSION
#define COGSPEECH_VERSION "0.0.0"
#endif

namespace cogspeech {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path.string() + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  for (unsigned int k = 0; k < len; ++k) hex += fmt::format("{:02x}", md[k]);
  return hex;
}

// Hashes of every regular file under dir, keyed by relative path.
Json hash_tree(const fs::path& dir) {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir).generic_string());
  }
  std::sort(files.begin(), files.end());
  Json j = Json::object();
  for (const auto& f : files) j[f] = sha256_file(dir / f);
  return j;
}

class RunDir {
 public:
  explicit RunDir(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) {
      throw InputError("cannot create run directory '" + dir_.string() + "'");
    }
  }

  const fs::path& path() const noexcept { return dir_; }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    out << content;
    if (!out) throw InputError("cannot write '" + (dir_ / name).string() + "'");
    outputs_.push_back(name);
  }

  void record(const std::string& name) { outputs_.push_back(name); }

  Json output_hashes() const {
    auto names = outputs_;
    std::sort(names.begin(), names.end());
    Json j = Json::object();
    for (const auto& n : names) j[n] = sha256_file(dir_ / n);
    return j;
  }

 private:
  fs::path dir_;
  std::vector<std::string> outputs_;
};

Json library_versions() {
  Json j;
  j["eigen"] = fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION,
                           EIGEN_MINOR_VERSION);
  j["spdlog"] = fmt::format("{}.{}.{}", SPDLOG_VER_MAJOR, SPDLOG_VER_MINOR, SPDLOG_VER_PATCH);
  j["fmt"] = FMT_VERSION;
  j["nlohmann_json"] = fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR,
                                   NLOHMANN_JSON_VERSION_MINOR, NLOHMANN_JSON_VERSION_PATCH);
  j["cli11"] = CLI11_VERSION;
  j["openssl"] = OPENSSL_VERSION_TEXT;
  return j;
}

// The run directory itself is left out so reruns elsewhere compare equal.
void write_manifest(RunDir& run, const std::string& command, Json flags, Json inputs,
                    std::optional<Json> protocol = std::nullopt) {
  Json j;
  j["tool"] = "cogspeech";
  j["version"] = COGSPEECH_VERSION;
  j["libraries"] = library_versions();
  j["command"] = command;
  j["flags"] = std::move(flags);
  j["inputs"] = std::move(inputs);
  if (protocol) j["protocol"] = std::move(*protocol);
  j["outputs"] = run.output_hashes();
  std::ofstream out(run.path() / "manifest.json", std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) throw InputError("cannot write manifest in '" + run.path().string() + "'");
}

void configure_logging(spdlog::level::level_enum console_level,
                       const std::optional<fs::path>& file = std::nullopt) {
  std::vector<spdlog::sink_ptr> sinks;
  auto console = std::make_shared<spdlog::sinks::stderr_color_sink_mt>();
  console->set_level(console_level);
  sinks.push_back(console);
  auto level = console_level;
  if (file) {
    auto f = std::make_shared<spdlog::sinks::basic_file_sink_mt>(file->string(), true);
    f->set_level(spdlog::level::info);
    f->set_pattern("%l %v");
    sinks.push_back(f);
    level = std::min(level, spdlog::level::info);
  }
  auto logger = std::make_shared<spdlog::logger>("cogspeech", sinks.begin(), sinks.end());
  logger->set_level(level);
  if (file) logger->flush_on(spdlog::level::info);
  spdlog::set_default_logger(logger);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

text::OovVariant parse_oov(const std::string& s) {
  return s == "subject_not_others" ? text::OovVariant::subject_not_others
                                   : text::OovVariant::others_not_subject;
}

text::PplNormalization parse_ppl(const std::string& s) {
  return s == "training_vocabulary" ? text::PplNormalization::training_vocabulary
                                    : text::PplNormalization::evaluated_tokens;
}

std::string report_text(const metrics::EvalReport& report) { return format_report(report); }

std::string json_line(const std::string& s) { return s + "\n"; }

struct Settings {
  std::string log_level = "info";

  std::string corpus;
  std::string matrix;
  std::string train;
  std::string run_dir;
  std::string config;
  std::string out = "run";
  std::string features = "all";
  std::string normalize = "per_fold";
  std::string oov = "others_not_subject";
  std::string ppl = "evaluated_tokens";
  std::string scope = "local";
  double alpha_step = 0.01;
  std::size_t folds = 0;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::size_t> subjects;
  bool null_effects = false;
};

int cmd_extract(const Settings& s) {
  RunDir run(s.out);
  const auto console = spdlog::level::from_str(s.log_level);
  configure_logging(console, run.path() / "extraction.log");
  ExtractOptions opts;
  opts.families = parse_family_set(s.features);
  opts.threads = s.threads;
  opts.text.oov = parse_oov(s.oov);
  opts.text.ppl = parse_ppl(s.ppl);
  const Corpus corpus = read_corpus(s.corpus);
  const FeatureMatrix fm = extract_features(corpus, opts);
  std::ostringstream csv;
  write_feature_matrix(csv, fm);
  run.write("features.csv", csv.str());
  configure_logging(console);
  run.record("extraction.log");
  Json flags;
  flags["features"] = to_string(opts.families);
  flags["threads"] = s.threads;
  flags["oov_variant"] = s.oov;
  flags["ppl_normalization"] = s.ppl;
  write_manifest(run, "extract", flags, hash_tree(s.corpus));
  std::cout << fmt::format("{} subjects, {} features -> {}\n", fm.rows(), fm.cols(),
                           (run.path() / "features.csv").string());
  return kExitOk;
}

int cmd_loocv(const Settings& s) {
  const FamilySet families = parse_family_set(s.features);
  const FeatureMatrix fm = select_families(read_feature_matrix(s.matrix), families);
  LoocvConfig config;
  config.alpha_step = s.alpha_step;
  config.inner_folds = s.folds;
  config.normalize = parse_normalization(s.normalize);
  config.threads = s.threads;
  config.seed = s.seed;
  const LoocvResult result = run_loocv(fm, config);

  RunDir run(s.out);
  std::ostringstream log;
  write_fold_log(log, result.folds);
  run.write("folds.jsonl", log.str());
  run.write("report.json", json_line(metrics::report_json(result.report)));
  run.write("report.txt", report_text(result.report));
  run.write("selection.txt", format_selection(result.selection));

  Json flags;
  flags["features"] = to_string(families);
  flags["alpha_step"] = s.alpha_step;
  flags["folds"] = s.folds;
  flags["threads"] = s.threads;
  flags["seed"] = s.seed;
  flags["normalize"] = std::string(to_string(config.normalize));
  Json inputs;
  inputs[s.matrix] = sha256_file(s.matrix);
  Json protocol;
  protocol["outer_folds"] = "leave-one-out";
  protocol["subjects"] = fm.rows();
  protocol["features"] = fm.cols();
  protocol["screen_level"] = config.screen_level;
  protocol["alpha_count"] = result.alpha_count;
  protocol["max_lambda_count"] = result.max_lambda_count;
  protocol["lambda_path_limit"] = config.path.max_lambdas;
  protocol["inner_folds"] = s.folds == 0 ? std::string("leave-one-out")
                                         : fmt::format("{}-fold", s.folds);
  protocol["selection_rule"] = "lambda_1se";
  write_manifest(run, "loocv", flags, inputs, protocol);

  std::cout << report_text(result.report) << '\n' << format_selection(result.selection);
  return kExitOk;
}

int cmd_baseline(const Settings& s) {
  const FeatureMatrix eval = read_feature_matrix(s.matrix);
  RunDir run(s.out);
  Json flags;
  flags["scope"] = s.scope;
  Json inputs;
  inputs[s.matrix] = sha256_file(s.matrix);
  std::string summary;
  if (s.scope == "none") {
    const auto report = no_impairment_baseline(eval.y);
    run.write("report.json", json_line(metrics::report_json(report)));
    run.write("report.txt", report_text(report));
    summary = report_text(report);
  } else {
    std::optional<FeatureMatrix> train;
    if (!s.train.empty()) {
      if (s.scope != "global") throw InputError("--train applies to the global scope only");
      train = read_feature_matrix(s.train);
      inputs[s.train] = sha256_file(s.train);
      flags["train"] = s.train;
    }
    const auto result = run_baseline(
        eval, s.scope == "global" ? BaselineScope::global : BaselineScope::local,
        train ? &*train : nullptr);
    std::ostringstream model;
    glm::write_model(model, result.fit);
    run.write("model.tsv", model.str());
    run.write("coefficients.txt", glm::format_coefficient_table(result.fit));
    run.write("report.json", json_line(metrics::report_json(result.report)));
    run.write("report.txt", report_text(result.report));
    summary = glm::format_coefficient_table(result.fit) + "\n" + report_text(result.report);
  }
  write_manifest(run, "baseline", flags, inputs);
  std::cout << summary;
  return kExitOk;
}

int cmd_synth(const Settings& s) {
  Json inputs = Json::object();
  SynthConfig cfg;
  if (!s.config.empty()) {
    cfg = parse_synth_config(read_text(s.config));
    inputs[s.config] = sha256_file(s.config);
  }
  if (s.synth_seed) cfg.seed = *s.synth_seed;
  if (s.subjects) cfg.subjects = *s.subjects;
  if (s.null_effects) cfg = cfg.without_effects();
  cfg.validate();
  const Corpus corpus = synthesize_corpus(cfg);
  RunDir run(s.out);
  for (const auto& f : write_corpus(corpus, run.path())) run.record(f);
  run.write("synth_config.json", json_line(synth_config_json(cfg)));
  Json flags;
  flags["config"] = Json::parse(synth_config_json(cfg));
  write_manifest(run, "synth", flags, inputs);
  std::size_t impaired = 0;
  for (const auto& d : corpus.demographics) impaired += static_cast<std::size_t>(d.outcome);
  std::cout << fmt::format("{} subjects ({} impaired) -> {}\n", corpus.demographics.size(),
                           impaired, run.path().string());
  return kExitOk;
}

int cmd_report(const Settings& s) {
  const fs::path dir(s.run_dir);
  const fs::path log_path = dir / "folds.jsonl";
  std::ifstream in(log_path);
  if (!in) throw InputError("no fold log at '" + log_path.string() + "'");
  const auto folds = read_fold_log(in);
  if (folds.empty()) throw InputError("empty fold log '" + log_path.string() + "'");
  std::vector<double> probs, labels;
  for (const auto& f : folds) {
    probs.push_back(f.probability);
    labels.push_back(f.outcome);
  }
  auto report = metrics::evaluate(probs, labels);
  const fs::path saved = dir / "report.json";
  if (fs::exists(saved)) {
    const auto j = nlohmann::json::parse(read_text(saved), nullptr, false);
    if (j.is_object() && j.contains("alpha") && j["alpha"].is_number()) {
      report.alpha = j["alpha"].get<double>();
    }
  }
  std::cout << report_text(report) << '\n';
  const auto pct = selection_percentages(folds);
  std::vector<std::pair<std::string, double>> rows(pct.begin(), pct.end());
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });
  std::cout << "feature\tpercent\n";
  for (const auto& [name, p] : rows) std::cout << fmt::format("{}\t{:.1f}\n", name, p);
  return kExitOk;
}

template <typename T>
CLI::Option* with_default(CLI::App* app, const std::string& name, T& value,
                          const std::string& help) {
  return app->add_option(name, value, help)->capture_default_str();
}

}  // namespace

int run_cli(int argc, char** argv) {
  Settings s;
  CLI::App app{"Speech-based cognitive impairment classification pipeline", "cogspeech"};
  app.require_subcommand(1);
  app.set_version_flag("--version", COGSPEECH_VERSION);
  with_default(&app, "--log-level", s.log_level, "trace|debug|info|warn|error|off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  const auto threads = [&](CLI::App* sub) {
    with_default(sub, "--threads", s.threads, "worker threads for the per-subject pool")
        ->check(CLI::PositiveNumber);
  };
  const auto out = [&](CLI::App* sub) {
    with_default(sub, "--out", s.out, "run directory");
  };
  const auto features = [&](CLI::App* sub) {
    with_default(sub, "--features", s.features,
                 "dem|text|audio|dem+text|dem+audio|audio+text|all");
  };

  auto* extract = app.add_subcommand("extract", "corpus directory -> feature matrix CSV");
  extract->add_option("corpus", s.corpus, "directory with demographics.csv, transcripts/, frames/")
      ->required();
  features(extract);
  threads(extract);
  with_default(extract, "--oov-variant", s.oov, "others_not_subject|subject_not_others")
      ->check(CLI::IsMember({"others_not_subject", "subject_not_others"}));
  with_default(extract, "--ppl-normalization", s.ppl, "evaluated_tokens|training_vocabulary")
      ->check(CLI::IsMember({"evaluated_tokens", "training_vocabulary"}));
  out(extract);

  auto* loocv = app.add_subcommand("loocv", "nested leave-one-out elastic-net evaluation");
  loocv->add_option("matrix", s.matrix, "feature matrix CSV")->required();
  features(loocv);
  with_default(loocv, "--alpha-step", s.alpha_step, "alpha grid spacing, in (0, 0.5]")
      ->check(CLI::Validator(
          [](std::string& v) -> std::string {
            const auto x = parse_number(v);
            return x && *x > 0.0 && *x <= 0.5 ? std::string()
                                              : "alpha step must lie in (0, 0.5]";
          },
          "(0, 0.5]"));
  with_default(loocv, "--folds", s.folds, "inner CV folds; 0 means leave-one-out");
  threads(loocv);
  with_default(loocv, "--seed", s.seed, "seed for inner fold assignment");
  with_default(loocv, "--normalize", s.normalize, "per_fold|global")
      ->check(CLI::IsMember({"per_fold", "global"}));
  out(loocv);

  auto* baseline = app.add_subcommand("baseline", "unregularized demographic logistic model");
  baseline->add_option("matrix", s.matrix, "evaluation feature matrix CSV")->required();
  with_default(baseline, "--scope", s.scope, "local|global|none (constant prevalence)")
      ->check(CLI::IsMember({"local", "global", "none"}));
  baseline->add_option("--train", s.train, "training matrix for the global scope");
  out(baseline);

  auto* synth = app.add_subcommand("synth", "write a synthetic corpus");
  synth->add_option("--config", s.config, "JSON generator settings");
  synth->add_option("--seed", s.synth_seed, "overrides the config seed (default 1)");
  synth->add_option("--subjects", s.subjects, "overrides the subject count (default 60)");
  synth->add_flag("--null", s.null_effects, "zero every planted effect");
  out(synth);

  auto* report = app.add_subcommand("report", "recompute metrics from a loocv run directory");
  report->add_option("run", s.run_dir, "loocv run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  configure_logging(spdlog::level::from_str(s.log_level));
  try {
    if (extract->parsed()) return cmd_extract(s);
    if (loocv->parsed()) return cmd_loocv(s);
    if (baseline->parsed()) return cmd_baseline(s);
    if (synth->parsed()) return cmd_synth(s);
    return cmd_report(s);
  } catch (const PreconditionError& e) {
    spdlog::error("{}", e.what());
    return kExitPrecondition;
  } catch (const ParseError& e) {
    spdlog::error("parse error: {}", e.what());
    return kExitInput;
  } catch (const InputError& e) {
    spdlog::error("input error: {}", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitInput;
  }
}

}  // namespace cogspeech
