#include <doctest.h>

#include <random>

#include "cogspeech/acoustic.hpp"
#include "cogspeech/error.hpp"
#include "cogspeech/spline.hpp"
#include "oracles.hpp"

using namespace cogspeech;
using namespace cogspeech::acoustic;

namespace {

FrameTrack make_track(std::vector<std::string> names, const Eigen::MatrixXd& values) {
  return FrameTrack("S1", std::move(names), values);
}

Transcript subject_turns(std::initializer_list<std::pair<double, double>> spans) {
  Transcript t;
  t.subject_id = "S1";
  for (auto [a, b] : spans) t.turns.push_back(Turn{a, b, Speaker::subject, {"x"}});
  return t;
}

std::vector<double> random_walk(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  double x = 0.0;
  for (auto& e : v) {
    x = 0.7 * x + nd(gen);
    e = x;
  }
  return v;
}

// Strict interior local maxima.
std::vector<std::size_t> strict_maxima(const std::vector<double>& v) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    if (v[i] > v[i - 1] && v[i] > v[i + 1]) out.push_back(i);
  }
  return out;
}

}  // namespace

TEST_CASE("per-subject normalization skips zero-meaningful channels") {
  Eigen::MatrixXd m(3, 3);
  m << 0.9, 120, 1, 0.8, 0, 2, 0.7, 130, 3;
  const auto out = per_subject_normalize(make_track({"voice_prob", "pitch", "rms_energy"}, m));
  CHECK(out.values().col(2).isApprox(Eigen::Vector3d(-1, 0, 1)));
  CHECK(out.values().col(0) == m.col(0));
  CHECK(out.values().col(1) == m.col(1));

  Eigen::MatrixXd sparse_only(2, 2);
  sparse_only << 0.5, 100, 0.6, 0;
  const auto same = per_subject_normalize(make_track({"voice_prob", "pitch"}, sparse_only));
  CHECK(same.values() == sparse_only);

  Eigen::MatrixXd flat(3, 2);
  flat << 0.1, 4, 0.2, 4, 0.3, 4;
  CHECK_THROWS_AS(per_subject_normalize(make_track({"voice_prob", "rms_energy"}, flat)),
                  DegenerateColumnError);
}

TEST_CASE("deltas") {
  Eigen::MatrixXd m(3, 2);
  m << 0.5, 1, 0.5, 3, 0.5, 6;
  const auto d = compute_deltas(make_track({"voice_prob", "rms_energy"}, m));
  REQUIRE(d.channels() == 4);
  CHECK(d.channel_names()[3] == "rms_energy_diff");
  CHECK(d.values().col(3) == Eigen::Vector3d(0, 2, 3));
  CHECK(d.values().col(2) == Eigen::Vector3d::Zero());

  Eigen::MatrixXd one(1, 1);
  one << 0.7;
  CHECK(compute_deltas(make_track({"voice_prob"}, one)).values()(0, 1) == 0.0);
}

TEST_CASE("subject frame selection on half-open turn intervals") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(20, 1, 0.5);
  const auto track = make_track({"voice_prob"}, m);
  CHECK(select_subject_frames(track, subject_turns({{0.0, 0.05}})) ==
        std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK(select_subject_frames(track, subject_turns({{0.0, 0.02}, {0.02, 0.04}})) ==
        std::vector<std::size_t>{0, 1, 2, 3});

  Transcript tester;
  tester.subject_id = "S1";
  tester.turns.push_back(Turn{0.0, 0.1, Speaker::tester, {"hi"}});
  CHECK_THROWS_AS(select_subject_frames(track, tester), PreconditionError);
}

TEST_CASE("subject frame selection equals the interval-union oracle") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(500, 1, 0.5);
  const auto track = make_track({"voice_prob"}, m);
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int rep = 0; rep < 20; ++rep) {
    Transcript t;
    t.subject_id = "S1";
    std::vector<std::pair<double, double>> spans;
    for (int k = 0; k < 5; ++k) {
      double a = std::round(u(gen) * 1000) / 1000, b = std::round(u(gen) * 1000) / 1000;
      if (a > b) std::swap(a, b);
      if (b - a < 0.001) b = a + 0.001;
      spans.emplace_back(a, b);
    }
    std::sort(spans.begin(), spans.end());
    for (auto [a, b] : spans) t.turns.push_back(Turn{a, b, Speaker::subject, {"x"}});
    std::vector<std::size_t> expect;
    for (std::size_t i = 0; i < 500; ++i) {
      const double c = static_cast<double>(i) * 0.010;
      for (auto [a, b] : spans) {
        if (c >= a - 1e-9 && c < b - 1e-9) {
          expect.push_back(i);
          break;
        }
      }
    }
    CHECK(select_subject_frames(track, t) == expect);
  }
}

TEST_CASE("spline class matches the dense oracle") {
  const std::vector<double> xs{0, 3, 4, 9, 15, 16, 30};
  const std::vector<double> ys{1, -2, 0.5, 3, 3, -1, 2};
  const NaturalCubicSpline s(xs, ys);
  for (double x = 0.0; x <= 30.0; x += 0.25) {
    CHECK(std::abs(s(x) - oracle::natural_spline(xs, ys, x)) < 1e-9);
  }
}

TEST_CASE("envelope examples") {
  SUBCASE("equal endpoints give a flat envelope") {
    std::vector<double> v(21, 0.0);
    v.front() = v.back() = 1.0;
    const auto env = voicing_envelope(v);
    for (double e : env) CHECK(e == doctest::Approx(1.0));
  }
  SUBCASE("monotone signal uses the endpoints only") {
    std::vector<double> v(30);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.1 * static_cast<double>(i);
    CHECK(envelope_knots(v, 10) == std::vector<std::size_t>{0, 29});
    const auto env = voicing_envelope(v);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(env[i] == doctest::Approx(v[i]));
  }
  SUBCASE("peaks at 5 and 30 match the spline oracle") {
    std::vector<double> v(45, -0.5);
    v[5] = 2.0;
    v[30] = 1.5;
    v[44] = 0.2;
    const auto knots = envelope_knots(v, 10);
    CHECK(knots == std::vector<std::size_t>{0, 5, 30, 44});
    const auto env = voicing_envelope(v);
    std::vector<double> kx, ky;
    for (auto k : knots) {
      kx.push_back(static_cast<double>(k));
      ky.push_back(v[k]);
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      CHECK(std::abs(env[i] - oracle::natural_spline(kx, ky, static_cast<double>(i))) < 1e-9);
    }
  }
  SUBCASE("a single frame is its own envelope") {
    const std::vector<double> v{0.3};
    CHECK(voicing_envelope(v) == v);
  }
}

TEST_CASE("close peaks keep the larger one") {
  std::vector<double> v(40, 0.0);
  v[10] = 1.0;
  v[15] = 2.0;  // within 10 frames of 10, larger
  v[30] = 0.5;
  CHECK(envelope_knots(v, 10) == std::vector<std::size_t>{0, 15, 30, 39});
}

TEST_CASE("peak separation 1 interpolates every strict local maximum") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto v = random_walk(200, seed);
    auto expect = strict_maxima(v);
    expect.insert(expect.begin(), 0);
    expect.push_back(v.size() - 1);
    const auto knots = envelope_knots(v, 1);
    CHECK(knots == expect);
    const auto env = voicing_envelope(v, 1);
    for (auto k : knots) CHECK(std::abs(env[k] - v[k]) < 1e-12);
  }
}

TEST_CASE("knots are separated and envelope matches the oracle on random signals") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto v = random_walk(300, seed);
    const auto knots = envelope_knots(v, 10);
    for (std::size_t i = 2; i + 1 < knots.size(); ++i) CHECK(knots[i] - knots[i - 1] >= 10);
    std::vector<double> kx, ky;
    for (auto k : knots) {
      kx.push_back(static_cast<double>(k));
      ky.push_back(v[k]);
    }
    const auto env = voicing_envelope(v, 10);
    double worst = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      worst = std::max(worst, std::abs(env[i] - oracle::natural_spline(kx, ky, static_cast<double>(i))));
    }
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("segment detection examples") {
  CHECK(detect_speech_segments(std::vector<double>(8, 0.05)).empty());
  CHECK(detect_speech_segments(std::vector<double>{0, 0.5, 0.5, 0}) ==
        std::vector<SpeechSegment>{{1, 2}});
  CHECK(detect_speech_segments(std::vector<double>(10, 1.0)) ==
        std::vector<SpeechSegment>{{0, 9}});
  CHECK(detect_speech_segments(std::vector<double>{0.1, 0.1000001, 0.1}) ==
        std::vector<SpeechSegment>{{1, 1}});
}

TEST_CASE("segments equal the threshold-run oracle") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto v = random_walk(400, seed);
    const auto segs = detect_speech_segments(v, 0.1);
    const auto runs = oracle::threshold_runs(v, 0.1);
    REQUIRE(segs.size() == runs.size());
    for (std::size_t i = 0; i < segs.size(); ++i) {
      CHECK(segs[i].start_frame == runs[i].first);
      CHECK(segs[i].end_frame == runs[i].second);
      if (i > 0) CHECK(segs[i].start_frame > segs[i - 1].end_frame + 1);
    }
  }
}

TEST_CASE("global statistics") {
  SUBCASE("constant channel") {
    Eigen::MatrixXd m(3, 2);
    m << 0.5, 2, 0.6, 2, 0.7, 2;
    const auto track = compute_deltas(make_track({"voice_prob", "rms_energy"}, m));
    const std::vector<SpeechSegment> seg{{0, 2}};
    const auto g = global_stats(track, seg);
    CHECK(g.at("rms_energy_mean") == 2.0);
    CHECK(g.at("rms_energy_max") == 2.0);
    CHECK(g.at("rms_energy_min") == 2.0);
    CHECK(g.at("rms_energy_median") == 2.0);
    CHECK(g.at("rms_energy_sd") == 0.0);
  }
  SUBCASE("pitch statistics skip zero frames") {
    Eigen::MatrixXd m(3, 2);
    m << 0.5, 0, 0.6, 100, 0.7, 200;
    const auto track = compute_deltas(make_track({"voice_prob", "pitch"}, m));
    const std::vector<SpeechSegment> seg{{0, 2}};
    const auto g = global_stats(track, seg);
    CHECK(g.at("pitch_mean") == doctest::Approx(150.0));
    CHECK(g.at("pitch_min") == doctest::Approx(100.0));
    CHECK(g.at("pitch_sd") == doctest::Approx(70.710678118654755));
    // Delta frames follow the base mask: frames 1 and 2 have deltas 100, 100.
    CHECK(g.at("pitch_diff_mean") == doctest::Approx(100.0));
    CHECK(g.at("voice_prob_mean") == doctest::Approx(0.6));
  }
  SUBCASE("empty segments are an error") {
    Eigen::MatrixXd m(2, 1);
    m << 0.5, 0.6;
    const auto track = compute_deltas(make_track({"voice_prob"}, m));
    CHECK_THROWS(global_stats(track, std::vector<SpeechSegment>{}));
  }
  SUBCASE("sparse channel with no voiced frames reports zeros") {
    Eigen::MatrixXd m(3, 2);
    m << 0.5, 0, 0.6, 0, 0.7, 0;
    const auto track = compute_deltas(make_track({"voice_prob", "jitter"}, m));
    const auto g = global_stats(track, std::vector<SpeechSegment>{{0, 2}});
    CHECK(g.at("jitter_mean") == 0.0);
    CHECK(g.at("jitter_diff_sd") == 0.0);
  }
}

TEST_CASE("23 default channels give 230 features with medians inside their range") {
  const auto names = default_channel_names();
  REQUIRE(names.size() == 23);
  const std::size_t T = 600;
  std::mt19937_64 gen(9);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd m(T, 23);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < 23; ++c) {
      const auto& n = names[c];
      double x = nd(gen);
      if (n == "voice_prob") x = 0.5 + 0.4 * std::sin(static_cast<double>(t) / 15.0);
      if (n == "pitch" || n == "jitter" || n == "shimmer") x = (t % 7 == 0) ? 0.0 : 5.0 + x;
      m(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = x;
    }
  }
  const FrameTrack track("S1", names, m);
  const auto f = extract_features(track, subject_turns({{0.0, 3.0}, {3.5, 6.0}}));
  CHECK(f.size() == 230);
  CHECK(f.names == feature_names(names));
  for (std::size_t k = 0; k < f.size(); k += 5) {
    const double mx = f.values[k + 1], mn = f.values[k + 2], med = f.values[k + 3];
    CHECK(med >= mn);
    CHECK(med <= mx);
    for (std::size_t j = 0; j < 5; ++j) CHECK(std::isfinite(f.values[k + j]));
  }
  const auto again = extract_features(track, subject_turns({{0.0, 3.0}, {3.5, 6.0}}));
  CHECK(again.values == f.values);
}
