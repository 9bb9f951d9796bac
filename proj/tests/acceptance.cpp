// Acceptance checks 1-9. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "cogspeech/acoustic.hpp"
#include "cogspeech/cli.hpp"
#include "cogspeech/glm.hpp"
#include "cogspeech/harness.hpp"
#include "cogspeech/lm.hpp"
#include "cogspeech/metrics.hpp"
#include "cogspeech/parallel.hpp"
#include "cogspeech/special.hpp"
#include "cogspeech/synth.hpp"
#include "oracles.hpp"

using namespace cogspeech;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, std::string what) {
    if (!ok) {
      pass = false;
      notes.push_back("failed: " + std::move(what));
    }
  }
  void note(std::string what) { notes.push_back(std::move(what)); }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::size_t worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), {"cogspeech", "--log-level", "warn"});
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  const int code = run_cli(static_cast<int>(argv.size()), argv.data());
  spdlog::set_level(spdlog::level::warn);
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ─── Shared fixtures ─────────────────────────────────────────────────────────

struct Problem {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

Problem random_problem(std::mt19937_64& gen, int n, int p) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u;
  Problem pr{Eigen::MatrixXd(n, p), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) pr.X(i, j) = nd(gen);
  }
  for (int j = 0; j < p; ++j) {
    auto c = pr.X.col(j);
    c.array() -= c.mean();
    c /= std::sqrt(c.squaredNorm() / (n - 1));
  }
  Eigen::VectorXd beta(p);
  for (int j = 0; j < p; ++j) beta[j] = u(gen) < 0.5 ? 0.0 : nd(gen);
  for (int i = 0; i < n; ++i) {
    const double eta = 0.3 + pr.X.row(i).dot(beta);
    pr.y[i] = u(gen) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
  }
  pr.y[0] = 1.0;
  pr.y[1] = 0.0;
  return pr;
}

Eigen::VectorXd stack(const glm::Coefficients& c) {
  Eigen::VectorXd w(c.beta.size() + 1);
  w[0] = c.intercept;
  w.tail(c.beta.size()) = c.beta;
  return w;
}

// Largest violation of the optimality conditions, using the gradient of
// DEV/(2N).
double kkt_residual(const Problem& pr, const glm::Coefficients& c, double alpha, double lambda) {
  const Eigen::VectorXd g = oracle::enet_smooth_gradient(pr.X, pr.y, stack(c));
  double worst = std::abs(g[0]);
  for (Eigen::Index j = 0; j < pr.X.cols(); ++j) {
    const double b = c.beta[j];
    const double gj = g[j + 1] + 2.0 * lambda * (1.0 - alpha) * b;
    const double v = b != 0.0 ? std::abs(gj + lambda * alpha * (b > 0 ? 1.0 : -1.0))
                              : std::max(0.0, std::abs(gj) - lambda * alpha);
    worst = std::max(worst, v);
  }
  return worst;
}

// ─── Criteria ────────────────────────────────────────────────────────────────

Outcome elastic_net_oracle() {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 gen(20240101);
  double worst_rel = 0.0, worst_kkt = 0.0;
  for (int k = 0; k < 25; ++k) {
    const int n = 10 + static_cast<int>(gen() % 31);
    const int p = 1 + static_cast<int>(gen() % 6);
    const auto pr = random_problem(gen, n, p);
    const double top = glm::lambda_max(pr.X, pr.y, 1.0);
    for (double alpha : {0.0, 0.5, 1.0}) {
      const double lambda = top * std::exp(std::uniform_real_distribution<double>(-4.0, -0.2)(gen));
      const auto c = glm::fit_elasticnet(pr.X, pr.y, alpha, lambda);
      const double f = oracle::enet_objective(pr.X, pr.y, stack(c), alpha, lambda);
      const auto w = oracle::proximal_gradient_enet(pr.X, pr.y, alpha, lambda, 1e-10);
      const double f_star = oracle::enet_objective(pr.X, pr.y, w, alpha, lambda);
      worst_rel = std::max(worst_rel, (f - f_star) / std::abs(f_star));
      worst_kkt = std::max(worst_kkt, kkt_residual(pr, c, alpha, lambda));
    }
  }
  const double elapsed = seconds_since(t0);
  o.check(worst_rel <= 1e-4, "objective within 1e-4 relative of the oracle");
  o.check(worst_kkt < 1e-5, "KKT residual below 1e-5");
  o.check(elapsed < 60.0, "runtime under 60 s");
  o.note(fmt::format("75 fits, worst relative gap {:.2e}, worst KKT {:.2e}, {:.2f} s", worst_rel,
                     worst_kkt, elapsed));
  return o;
}

Outcome lambda_max_check() {
  Outcome o;
  std::mt19937_64 gen(77);
  double worst_gap = 0.0;
  for (int k = 0; k < 10; ++k) {
    const int n = 20 + static_cast<int>(gen() % 21);
    const auto pr = random_problem(gen, n, 5);
    const double top = glm::lambda_max(pr.X, pr.y, 1.0);
    const auto at = glm::fit_elasticnet(pr.X, pr.y, 1.0, top);
    o.check(at.beta.cwiseAbs().maxCoeff() == 0.0, "all slopes exactly 0 at lambda_max");
    o.check(kkt_residual(pr, at, 1.0, top) < 1e-8, "KKT bound at lambda_max");
    const double lam = 0.99 * top;
    const auto below = glm::fit_elasticnet(pr.X, pr.y, 1.0, lam);
    const Eigen::VectorXd g = oracle::enet_smooth_gradient(pr.X, pr.y, stack(below));
    const double tightest = std::abs(g.tail(5).cwiseAbs().maxCoeff() - lam);
    worst_gap = std::max(worst_gap, tightest);
  }
  o.check(worst_gap < 1e-3, "a KKT constraint tight within 1e-3 at 0.99 lambda_max");
  o.note(fmt::format("10 problems, worst tightness gap {:.2e}", worst_gap));
  return o;
}

Outcome unregularized_glm() {
  Outcome o;
  Eigen::MatrixXd X(8, 1);
  Eigen::VectorXd y(8);
  X << 0, 0, 0, 0, 1, 1, 1, 1;
  y << 1, 0, 0, 0, 1, 1, 1, 0;
  const auto fit = glm::fit_logistic(X, y, {"x"});
  const double di = std::abs(fit.intercept - std::log(1.0 / 3.0));
  const double ds = std::abs(fit.coef[0] - std::log(9.0));
  o.check(di < 1e-6 && ds < 1e-6, "two-group closed form to 1e-6");
  // Table odds ratios carry two decimals: exp(2.02) = 7.538 prints as 7.54.
  const double odds = glm::wald(2.02, 1.0).odds_ratio;
  const double printed = static_cast<double>(std::lround(odds * 100.0)) / 100.0;
  o.check(std::abs(printed - 7.55) <= 0.01 + 1e-12, "exp(2.02) = 7.54 within 0.01 of 7.55");
  o.note(fmt::format("intercept err {:.1e}, slope err {:.1e}, exp(2.02) = {:.4f} -> {:.2f}", di,
                     ds, odds, printed));
  return o;
}

Outcome metrics_fixtures() {
  Outcome o;
  std::mt19937_64 gen(5);
  bool exact = true;
  double worst_trap = 0.0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 2 + gen() % 20;
    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(gen() % 10) / 10.0;
      y[i] = static_cast<double>(gen() % 2);
    }
    y[0] = 1.0;
    y[n - 1] = 0.0;
    const double auc = metrics::roc_auc(s, y);
    exact = exact && auc == oracle::pair_count_auc(s, y);
    worst_trap = std::max(worst_trap, std::abs(metrics::trapezoid_area(metrics::roc_curve(s, y)) - auc));
  }
  o.check(exact, "AUC equals pair counting on 100 cases");
  o.check(worst_trap <= 1e-12, "trapezoid area equals AUC to 1e-12");

  const std::vector<double> s{0.9, 0.8, 0.4, 0.3}, y{1, 0, 1, 0};
  o.check(metrics::operating_points(s, y).tpr_at_fpr0 == 0.5, "TPR@FPR0% hand fixture = 0.5");

  // Rates k/16 over groups of 16 make every expected count an exact integer.
  std::vector<double> hp, hy;
  for (int g = 1; g <= 10; ++g) {
    for (int i = 0; i < 16; ++i) {
      hp.push_back(g / 16.0);
      hy.push_back(i < g ? 1.0 : 0.0);
    }
  }
  const auto hl = metrics::hosmer_lemeshow(hp, hy);
  o.check(hl.statistic == 0.0 && hl.p_value == 1.0, "HL statistic 0 gives p = 1");

  const double chi = special::chi_square_sf(15.507, 8);
  o.check(std::abs(chi - 0.050) <= 0.001, "chi-square(15.507, 8) p = 0.050 +- 0.001");

  double worst_t = 0.0;
  std::normal_distribution<double> nd;
  for (int n : {5, 10, 20, 35, 50}) {
    Eigen::MatrixXd X(n, 5);
    Eigen::VectorXd yy(n);
    for (int i = 0; i < n; ++i) {
      yy[i] = i % 2;
      for (int j = 0; j < 5; ++j) X(i, j) = nd(gen) + 0.3 * j * yy[i];
    }
    for (const auto& e : metrics::pearson_screen(X, yy)) {
      worst_t = std::max(worst_t, std::abs(e.p - oracle::t_two_sided(e.t, n - 2.0)));
    }
  }
  o.check(worst_t < 1e-8, "t-test p-values within 1e-8 of the integration oracle");
  o.note(fmt::format("HL p {:.6f}, chi-square p {:.5f}, worst t-test gap {:.1e}", hl.p_value, chi,
                     worst_t));
  return o;
}

Outcome kneser_ney() {
  Outcome o;
  std::mt19937_64 gen(99);
  double worst = 0.0;
  const std::vector<std::string> words{"a", "b", "c", "d", "e", "f", "g"};
  for (int k = 0; k < 10; ++k) {
    std::vector<lm::Sentence> corpus(2 + gen() % 6);
    for (auto& s : corpus) {
      const std::size_t len = 1 + gen() % 8;
      for (std::size_t i = 0; i < len; ++i) s.push_back(words[gen() % words.size()]);
    }
    const auto m = lm::NGramModel::train(corpus);
    auto contexts = m.observed_contexts();
    for (const auto& w : m.predictable_tokens()) contexts.emplace_back("<s>", w);
    contexts.emplace_back("unseen", "other");
    for (const auto& [u, v] : contexts) {
      double total = 0.0;
      for (const auto& w : m.predictable_tokens()) total += m.probability(w, u, v);
      worst = std::max(worst, std::abs(total - 1.0));
    }
  }
  o.check(worst <= 1e-9, "every context sums to 1 +- 1e-9");

  // Six training tokens; the reference perplexity is the exact rational
  // computation 2^(-mean log2 p) with p = 659/1960, 433/1470, 51/980,
  // 113/245, 51/490, 3/245, 69/245.
  const std::vector<lm::Sentence> train{{"a", "b", "a"}, {"b", "a", "c"}};
  const std::vector<lm::Sentence> eval{{"a", "b", "c"}, {"c", "d"}};
  constexpr double kFrozen = 7.361904759233618196;
  const auto m = lm::NGramModel::train(train);
  const double ppl = lm::perplexity(m, eval).value;
  const double enumerated = oracle::KneserNey(train).perplexity(eval);
  o.check(std::abs(ppl - kFrozen) < 1e-9, "6-token corpus perplexity matches the exact value");
  o.check(std::abs(ppl - enumerated) < 1e-9, "6-token corpus matches the counting oracle");

  const std::vector<double> halves(12, -1.0);
  double sum = 0.0;
  for (double v : halves) sum += v;
  const double two = lm::perplexity_from_log2(sum, static_cast<double>(halves.size()));
  o.check(two == 2.0, "p = 0.5 everywhere gives PPL = 2 exactly");
  o.note(fmt::format("worst normalization error {:.1e}, toy PPL {:.12f}", worst, ppl));
  return o;
}

Outcome acoustic_pipeline() {
  Outcome o;
  std::mt19937_64 gen(31);
  std::normal_distribution<double> nd;
  double worst_env = 0.0;
  bool segments_exact = true;
  for (int k = 0; k < 20; ++k) {
    std::vector<double> v(300 + gen() % 300);
    double x = 0.0;
    for (auto& e : v) {
      x = 0.8 * x + nd(gen);
      e = x;
    }
    const auto knots = acoustic::envelope_knots(v, 10);
    std::vector<double> kx, ky;
    for (auto kk : knots) {
      kx.push_back(static_cast<double>(kk));
      ky.push_back(v[kk]);
    }
    const auto env = acoustic::voicing_envelope(v, 10);
    for (std::size_t i = 0; i < v.size(); ++i) {
      worst_env = std::max(worst_env,
                           std::abs(env[i] - oracle::natural_spline(kx, ky, static_cast<double>(i))));
    }
    const auto segs = acoustic::detect_speech_segments(env, 0.1);
    const auto runs = oracle::threshold_runs(env, 0.1);
    segments_exact = segments_exact && segs.size() == runs.size();
    for (std::size_t i = 0; segments_exact && i < segs.size(); ++i) {
      segments_exact = segs[i].start_frame == runs[i].first && segs[i].end_frame == runs[i].second;
    }
  }
  o.check(worst_env < 1e-9, "envelope within 1e-9 of the spline oracle");
  o.check(segments_exact, "segments equal the threshold runs");

  SynthConfig cfg;
  cfg.subjects = 10;
  cfg.seed = 3;
  const auto corpus = synthesize_corpus(cfg);
  ExtractOptions serial;
  serial.families = parse_family_set("audio");
  ExtractOptions parallel = serial;
  parallel.threads = 4;
  const auto a = extract_features(corpus, serial);
  const auto b = extract_features(corpus, parallel);
  o.check(a.cols() == 230, "23 base channels give 230 features");
  o.check(a.X == b.X && a.feature_names == b.feature_names, "identical across thread counts");
  o.note(fmt::format("worst envelope error {:.1e}, {} acoustic features", worst_env, a.cols()));
  return o;
}

Outcome leakage(const FeatureMatrix& fm, const LoocvConfig& config) {
  Outcome o;
  std::mt19937_64 gen(2024);
  std::vector<std::size_t> order(fm.rows());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), gen);
  order.resize(10);
  std::vector<int> changed(order.size(), 0);
  parallel_for(order.size(), config.threads, [&](std::size_t k) {
    const auto i = order[k];
    FoldArtifacts before, after;
    auto serial = config;
    serial.threads = 1;
    run_fold(fm, i, serial, &before);
    auto flipped = fm;
    flipped.y[static_cast<Eigen::Index>(i)] = 1.0 - flipped.y[static_cast<Eigen::Index>(i)];
    run_fold(flipped, i, serial, &after);
    changed[k] = before == after ? 0 : 1;
  });
  int n_changed = 0;
  for (int c : changed) n_changed += c;
  o.check(n_changed == 0, "training artifacts unchanged by the held-out outcome");
  o.note(fmt::format("10 folds, {} with differing artifacts (alpha step {})", n_changed,
                     config.alpha_step));
  return o;
}

struct EndToEnd {
  Outcome planted;
  Outcome protocol;
  FeatureMatrix matrix;
};

EndToEnd planted_run(const fs::path& work) {
  EndToEnd r;
  const std::string threads = std::to_string(worker_count());
  const auto t0 = Clock::now();
  const int synth = cli({"synth", "--out", (work / "corpus").string()});
  const int extract = cli({"extract", (work / "corpus").string(), "--threads", threads, "--out",
                           (work / "extract").string()});
  const double t_extract = seconds_since(t0);
  const auto matrix = work / "extract" / "features.csv";
  const int loocv = cli({"loocv", matrix.string(), "--threads", threads, "--out",
                         (work / "loocv").string()});
  const double elapsed = seconds_since(t0);
  r.planted.check(synth == 0 && extract == 0 && loocv == 0, "pipeline commands succeed");
  if (!r.planted.pass) {
    r.protocol.check(false, "no loocv run to inspect");
    return r;
  }
  r.matrix = read_feature_matrix(matrix);

  const auto report = nlohmann::json::parse(slurp(work / "loocv" / "report.json"));
  const double auc = report.at("AUC").get<double>();
  std::ifstream log(work / "loocv" / "folds.jsonl");
  const auto pct = selection_percentages(read_fold_log(log));
  int recovered = 0;
  std::string detail;
  for (const char* f : {"pitch_min", "jitter_sd", "dur_mean", "q_sum"}) {
    const double p = pct.contains(f) ? pct.at(f) : 0.0;
    recovered += p >= 90.0;
    detail += fmt::format(" {} {:.0f}%", f, p);
  }
  r.planted.check(auc >= 0.85, "planted AUC >= 0.85");
  r.planted.check(recovered >= 3, ">= 3 of 4 planted features in >= 90% of folds");
  r.planted.check(elapsed < 600.0, "full planted run under 10 minutes");
  r.planted.note(fmt::format("planted: AUC {:.3f};{}; {} subjects x {} features; {:.0f} s total "
                             "({:.0f} s synth+extract) on {} thread(s)",
                             auc, detail, r.matrix.rows(), r.matrix.cols(), elapsed, t_extract,
                             threads));

  const auto manifest = nlohmann::json::parse(slurp(work / "loocv" / "manifest.json"));
  const auto& p = manifest.at("protocol");
  const auto alphas = p.at("alpha_count").get<int>();
  const auto lambdas = p.at("max_lambda_count").get<int>();
  const auto limit = p.at("lambda_path_limit").get<int>();
  r.protocol.check(alphas == 101, "101 alpha values");
  r.protocol.check(lambdas <= 100 && limit == 100, "at most 100 lambda values");
  r.protocol.check(p.at("inner_folds") == "leave-one-out", "leave-one-out inner folds");
  r.protocol.check(p.at("outer_folds") == "leave-one-out", "leave-one-out outer folds");
  r.protocol.check(p.at("selection_rule") == "lambda_1se", "lambda_1se selection");
  r.protocol.check(manifest.at("flags").at("alpha_step") == 0.01, "default alpha step recorded");
  r.protocol.note(fmt::format("manifest: {} alphas, longest path {} of {}, inner {}, rule {}",
                              alphas, lambdas, limit, p.at("inner_folds").get<std::string>(),
                              p.at("selection_rule").get<std::string>()));
  return r;
}

void noise_runs(Outcome& o, int seeds) {
  const auto t0 = Clock::now();
  LoocvConfig config;
  config.alpha_step = 0.1;
  config.inner_folds = 10;
  config.threads = worker_count();
  double sum = 0.0;
  double lo = 1.0, hi = 0.0;
  std::size_t empty_folds = 0, total_folds = 0;
  int zero_auc = 0;
  for (int s = 1; s <= seeds; ++s) {
    SynthConfig cfg;
    cfg.seed = 1000 + static_cast<std::uint64_t>(s);
    ExtractOptions opts;
    opts.threads = worker_count();
    const auto fm = extract_features(synthesize_corpus(cfg.without_effects()), opts);
    config.seed = static_cast<std::uint64_t>(s);
    const auto result = run_loocv(fm, config);
    const double auc = result.report.auc;
    for (const auto& f : result.folds) empty_folds += f.active.empty();
    total_folds += result.folds.size();
    zero_auc += auc == 0.0;
    sum += auc;
    lo = std::min(lo, auc);
    hi = std::max(hi, auc);
  }
  const double mean = sum / seeds;
  o.check(mean >= 0.3 && mean <= 0.7, "mean all-noise AUC in [0.3, 0.7]");
  o.note(fmt::format("noise: mean AUC {:.3f} over {} seeds (range {:.3f}-{:.3f}), alpha step 0.1, "
                     "10-fold inner CV, {:.0f} s",
                     mean, seeds, lo, hi, seconds_since(t0)));
  o.note(fmt::format("noise: {} of {} seeds have AUC exactly 0; {} of {} folds have an empty active "
                     "set",
                     zero_auc, seeds, empty_folds, total_folds));
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  fs::path work = fs::temp_directory_path() / "cogspeech_acceptance";
  int noise_seeds = 50;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string key = argv[i];
    if (key == "--work") work = argv[i + 1];
    if (key == "--noise-seeds") noise_seeds = std::stoi(argv[i + 1]);
  }
  fs::remove_all(work);
  fs::create_directories(work);

  std::vector<std::pair<std::string, Outcome>> results;
  auto run = [&](std::string name, auto&& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    std::printf("criterion %zu: %s  %s\n", results.size() + 1, o.pass ? "PASS" : "FAIL",
                name.c_str());
    for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
    results.emplace_back(std::move(name), std::move(o));
  };

  run("elastic-net oracle equivalence", elastic_net_oracle);
  run("lambda_max correctness", lambda_max_check);
  run("unregularized GLM", unregularized_glm);
  run("metrics fixtures", metrics_fixtures);
  run("Kneser-Ney language model", kneser_ney);
  run("acoustic pipeline", acoustic_pipeline);

  // The planted run feeds the leakage check, so it executes first.
  EndToEnd e2e;
  try {
    e2e = planted_run(work);
  } catch (const std::exception& ex) {
    e2e.planted.check(false, std::string("exception: ") + ex.what());
    e2e.protocol.check(false, "no loocv run to inspect");
  }
  run("leakage", [&] {
    if (e2e.matrix.rows() == 0) {
      Outcome o;
      o.check(false, "no planted feature matrix");
      return o;
    }
    LoocvConfig config;
    config.threads = worker_count();
    return leakage(e2e.matrix, config);
  });
  run("end-to-end synthetic regression", [&] {
    Outcome o = e2e.planted;
    try {
      noise_runs(o, noise_seeds);
    } catch (const std::exception& ex) {
      o.check(false, std::string("noise runs: ") + ex.what());
    }
    return o;
  });
  run("protocol fidelity", [&] { return e2e.protocol; });

  int failed = 0;
  std::printf("\nsummary\n");
  for (std::size_t i = 0; i < results.size(); ++i) {
    std::printf("  %zu %s %s\n", i + 1, results[i].second.pass ? "PASS" : "FAIL",
                results[i].first.c_str());
    failed += results[i].second.pass ? 0 : 1;
  }
  fs::remove_all(work);
  return failed == 0 ? 0 : 1;
}
