#include "cogspeech/synth.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "cogspeech/error.hpp"
#include "cogspeech/random.hpp"

namespace cogspeech {

namespace {

constexpr std::size_t kVocabulary = 400;

std::uint64_t subject_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed * 0xD1B54A32D192ED03ull + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double round_to(double v, double scale) { return std::round(v * scale) / scale; }

std::size_t poisson(Rng& rng, double mean) {
  const double limit = std::exp(-mean);
  double prod = rng.uniform();
  std::size_t k = 0;
  while (prod > limit) {
    prod *= rng.uniform();
    ++k;
  }
  return k;
}

template <std::size_t N>
std::size_t categorical(Rng& rng, const std::array<double, N>& weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double u = rng.uniform() * total;
  for (std::size_t k = 0; k < N; ++k) {
    if (u < weights[k]) return k;
    u -= weights[k];
  }
  return N - 1;
}

const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> words = [] {
    constexpr std::string_view consonants = "bdfgklmnprstvz";
    constexpr std::string_view vowels = "aeiou";
    std::vector<std::string> out;
    for (std::size_t i = 0; out.size() < kVocabulary; ++i) {
      std::string w;
      std::size_t k = i;
      do {
        w += consonants[k % consonants.size()];
        k /= consonants.size();
        w += vowels[k % vowels.size()];
        k /= vowels.size();
      } while (k > 0);
      out.push_back(std::move(w));
    }
    return out;
  }();
  return words;
}

// Zipf-like word choice.
class WordSampler {
 public:
  WordSampler() {
    double total = 0.0;
    for (std::size_t r = 0; r < kVocabulary; ++r) {
      total += 1.0 / static_cast<double>(r + 2);
      cdf_.push_back(total);
    }
    for (auto& c : cdf_) c /= total;
  }

  const std::string& operator()(Rng& rng) const {
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), rng.uniform());
    const auto r = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()),
                                         kVocabulary - 1);
    return vocabulary()[r];
  }

 private:
  std::vector<double> cdf_;
};

std::vector<std::string> utterance(Rng& rng, const WordSampler& words, std::size_t count,
                                   bool question, double um_probability) {
  std::vector<std::string> tokens;
  for (std::size_t k = 0; k < count; ++k) tokens.push_back(words(rng));
  if (!tokens.empty()) tokens.front()[0] = static_cast<char>(std::toupper(tokens.front()[0]));
  if (rng.bernoulli(um_probability)) {
    tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(rng.index(tokens.size() + 1)),
                  "<um>");
  }
  tokens.emplace_back(question ? "?" : ".");
  return tokens;
}

struct SubjectPlan {
  bool impaired = false;
  Transcript transcript;
  double session_end = 0.0;
};

SubjectPlan plan_transcript(const SynthConfig& cfg, const std::string& id, bool impaired,
                            Rng& rng, const WordSampler& words) {
  SubjectPlan plan;
  plan.impaired = impaired;
  plan.transcript.subject_id = id;
  // Shorter turns come with proportionally more of them, keeping the total
  // speaking time independent of the outcome.
  const double drawn = static_cast<double>(
      cfg.min_subject_turns + rng.index(cfg.max_subject_turns - cfg.min_subject_turns + 1));
  const auto turns = static_cast<std::size_t>(
      std::max(2.0, std::round(drawn / (impaired ? cfg.turn_duration_ratio : 1.0))));
  const double words_per_second = 2.2 * std::exp(rng.normal(0.0, 0.35));
  const double scale = cfg.mean_turn_seconds * std::exp(rng.normal(0.0, 0.15)) *
                       (impaired ? cfg.turn_duration_ratio : 1.0);
  const std::size_t questions =
      std::min(turns, poisson(rng, 1.5 + (impaired ? cfg.extra_questions : 0.0)));
  std::vector<std::size_t> order(turns);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<char> is_question(turns, 0);
  for (std::size_t q = 0; q < questions; ++q) is_question[order[q]] = 1;

  double t = round_to(0.3 + rng.uniform(0.0, 0.5), 1000.0);
  auto add_turn = [&](Speaker who, double duration, std::vector<std::string> tokens) {
    const double start = t;
    const double end = std::max(round_to(start + duration, 1000.0), start + 0.05);
    plan.transcript.turns.push_back({start, end, who, std::move(tokens)});
    t = round_to(end + rng.uniform(0.15, 0.4), 1000.0);
  };
  for (std::size_t k = 0; k < turns; ++k) {
    add_turn(Speaker::tester, rng.uniform(1.0, 2.5),
             utterance(rng, words, 3 + rng.index(6), true, 0.0));
    const double duration =
        std::max(0.6, scale * std::exp(rng.normal(0.0, cfg.turn_duration_sd)));
    add_turn(Speaker::subject, duration,
             utterance(rng, words, std::max<std::size_t>(1, poisson(rng, words_per_second * duration)),
                       is_question[k] != 0, 0.15));
  }
  plan.session_end = t + 0.3;
  return plan;
}

// AR(1) with the given stationary sd.
class Ar1 {
 public:
  Ar1(double phi, double sd) : phi_(phi), innovation_(sd * std::sqrt(1.0 - phi * phi)) {}
  double next(Rng& rng) {
    state_ = phi_ * state_ + innovation_ * rng.normal();
    return state_;
  }

 private:
  double phi_, innovation_, state_ = 0.0;
};

FrameTrack render_frames(const SynthConfig& cfg, const SubjectPlan& plan, Rng& rng) {
  const auto names = default_channel_names();
  const auto T = static_cast<Eigen::Index>(std::ceil(plan.session_end / kFrameHop));
  const auto C = static_cast<Eigen::Index>(names.size());
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(T, C);
  enum Col : Eigen::Index { kVoice = 0, kPitch, kRms, kHnr, kZcr, kShimmer, kJitter };

  // Frame state: 0 silence, 1 pause within a turn, 2 voiced. The burst and
  // pause alternation runs over the whole session so its mix inside a turn
  // does not depend on the turn length.
  std::vector<int> phase(static_cast<std::size_t>(T), 0);
  std::vector<char> burst_start(static_cast<std::size_t>(T), 0);
  for (Eigen::Index f = 0; f < T;) {
    const auto burst = static_cast<Eigen::Index>(15 + rng.index(25));
    burst_start[static_cast<std::size_t>(f)] = 1;
    for (Eigen::Index k = 0; k < burst && f < T; ++k, ++f) phase[static_cast<std::size_t>(f)] = 2;
    const auto pause = static_cast<Eigen::Index>(6 + rng.index(14));
    for (Eigen::Index k = 0; k < pause && f < T; ++k, ++f) phase[static_cast<std::size_t>(f)] = 1;
  }
  std::vector<int> state(static_cast<std::size_t>(T), 0);
  std::vector<int> speaker(static_cast<std::size_t>(T), -1);
  std::vector<char> onset(static_cast<std::size_t>(T), 0);
  for (const auto& turn : plan.transcript.turns) {
    const auto lo = static_cast<Eigen::Index>(std::ceil(turn.start / kFrameHop));
    const auto hi = std::min(T, static_cast<Eigen::Index>(std::ceil(turn.end / kFrameHop)));
    for (Eigen::Index f = lo; f < hi; ++f) {
      const auto u = static_cast<std::size_t>(f);
      state[u] = phase[u];
      speaker[u] = turn.speaker == Speaker::subject ? 0 : 1;
      onset[u] = phase[u] == 2 && (f == lo || burst_start[u]) ? 1 : 0;
    }
  }

  const double pitch_centre = 150.0 + rng.normal(0.0, cfg.subject_pitch_sd);
  const double pitch_range = rng.uniform(20.0, 40.0);
  const double tester_pitch = 190.0 + rng.normal(0.0, 15.0);
  const double jitter_centre = rng.normal(0.02, 0.002);
  const double jitter_spread = rng.uniform(0.008, 0.012);
  const double jitter_shape = 1.0 + (plan.impaired ? cfg.jitter_concentration : 0.0);
  const double shimmer_centre = rng.normal(0.06, 0.008);

  Ar1 pitch_walk(0.95, 0.5);
  Ar1 shimmer_walk(0.7, 0.01);
  std::vector<Ar1> dense;
  for (Eigen::Index c = kRms; c < C; ++c) {
    if (c == kShimmer || c == kJitter) {
      dense.emplace_back(0.0, 0.0);
    } else {
      dense.emplace_back(0.8, cfg.channel_noise);
    }
  }
  double jitter_value = jitter_centre;

  for (Eigen::Index f = 0; f < T; ++f) {
    const auto s = state[static_cast<std::size_t>(f)];
    const bool subject = speaker[static_cast<std::size_t>(f)] == 0;
    double voice = 0.0;
    if (s == 2) {
      voice = 0.75 + 0.2 * rng.uniform();
    } else if (s == 1) {
      voice = 0.1 + 0.15 * rng.uniform();
    } else {
      voice = 0.03 + 0.04 * rng.uniform();
    }
    v(f, kVoice) = round_to(voice, 1e4);

    for (Eigen::Index c = kRms; c < C; ++c) {
      if (c == kShimmer || c == kJitter) continue;
      v(f, c) = round_to(dense[static_cast<std::size_t>(c - kRms)].next(rng), 1e4);
    }

    const double g = std::clamp(pitch_walk.next(rng), -1.0, 1.0);
    const double sh = shimmer_walk.next(rng);
    if (s != 2) continue;
    const bool is_onset = onset[static_cast<std::size_t>(f)] != 0;
    if (is_onset) {
      const double u = rng.uniform(-1.0, 1.0);
      jitter_value =
          jitter_centre + jitter_spread * std::copysign(std::pow(std::abs(u), jitter_shape), u);
    }
    double pitch = 0.0;
    if (subject) {
      pitch = pitch_centre + pitch_range * g;
      if (plan.impaired && is_onset && cfg.pitch_dip_hz > 0.0 && rng.bernoulli(0.2)) {
        pitch = pitch_centre - pitch_range - cfg.pitch_dip_hz * (1.0 + 0.1 * rng.uniform());
      }
    } else {
      pitch = tester_pitch + 25.0 * g;
    }
    v(f, kPitch) = round_to(std::max(pitch, 40.0), 1e4);
    v(f, kShimmer) = round_to(std::max(shimmer_centre + sh, 0.001), 1e4);
    v(f, kJitter) = round_to(std::max(jitter_value, 0.0005), 1e4);
  }
  return FrameTrack(plan.transcript.subject_id, names, std::move(v));
}

DemographicRecord draw_demographics(const SynthConfig& cfg, bool impaired, Rng& rng) {
  DemographicRecord r;
  r.age = round_to(rng.normal(72.0, 7.0) + (impaired ? cfg.age_shift : 0.0), 10.0);
  r.sex = rng.bernoulli(0.55) ? Sex::female : Sex::male;
  r.education =
      static_cast<Education>(categorical(rng, std::array<double, 4>{0.1, 0.3, 0.25, 0.35}));
  r.employment = static_cast<Employment>(categorical(
      rng, std::array<double, 10>{0.15, 0.08, 0.55, 0.03, 0.04, 0.02, 0.05, 0.01, 0.05, 0.02}));
  return r;
}

}  // namespace

void SynthConfig::validate() const {
  if (subjects < 10) throw PreconditionError("synthetic corpus needs at least 10 subjects");
  if (!(prevalence > 0.0 && prevalence < 1.0)) {
    throw PreconditionError("prevalence must lie in (0, 1)");
  }
  const auto impaired = static_cast<std::size_t>(std::llround(prevalence * subjects));
  if (impaired < 2 || subjects - impaired < 2) {
    throw PreconditionError("prevalence leaves fewer than 2 subjects in a class");
  }
  for (double v : {pitch_dip_hz, jitter_concentration, extra_questions, channel_noise,
                   turn_duration_sd, subject_pitch_sd}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw PreconditionError("effect sizes and noise scales must be finite and >= 0");
    }
  }
  if (!(turn_duration_ratio > 0.0) || !std::isfinite(age_shift)) {
    throw PreconditionError("turn_duration_ratio must be > 0 and age_shift finite");
  }
  if (min_subject_turns < 2 || max_subject_turns < min_subject_turns) {
    throw PreconditionError("need 2 <= min_subject_turns <= max_subject_turns");
  }
  if (!(mean_turn_seconds > 0.5)) throw PreconditionError("mean_turn_seconds must exceed 0.5");
}

SynthConfig SynthConfig::without_effects() const {
  SynthConfig c = *this;
  c.pitch_dip_hz = 0.0;
  c.jitter_concentration = 0.0;
  c.turn_duration_ratio = 1.0;
  c.extra_questions = 0.0;
  c.age_shift = 0.0;
  return c;
}

#define COGSPEECH_SYNTH_FIELDS(X)                                                        \
  X(subjects) X(prevalence) X(seed) X(pitch_dip_hz) X(jitter_concentration)              \
  X(turn_duration_ratio) X(extra_questions) X(age_shift) X(channel_noise)                \
  X(turn_duration_sd) X(subject_pitch_sd) X(min_subject_turns) X(max_subject_turns)      \
  X(mean_turn_seconds)

SynthConfig parse_synth_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("synthetic config: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("synthetic config must be a JSON object");
  SynthConfig c;
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    try {
#define COGSPEECH_READ(name)                      \
  if (key == #name) {                             \
    c.name = value.get<decltype(c.name)>();       \
    known = true;                                 \
  }
      COGSPEECH_SYNTH_FIELDS(COGSPEECH_READ)
#undef COGSPEECH_READ
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(fmt::format("synthetic config key '{}': {}", key, e.what()));
    }
    if (!known) throw ParseError(fmt::format("unknown synthetic config key '{}'", key));
  }
  c.validate();
  return c;
}

std::string synth_config_json(const SynthConfig& c) {
  nlohmann::ordered_json j;
#define COGSPEECH_WRITE(name) j[#name] = c.name;
  COGSPEECH_SYNTH_FIELDS(COGSPEECH_WRITE)
#undef COGSPEECH_WRITE
  return j.dump(2);
}

#undef COGSPEECH_SYNTH_FIELDS

Corpus synthesize_corpus(const SynthConfig& config) {
  config.validate();
  const std::size_t N = config.subjects;
  const auto impaired_count = static_cast<std::size_t>(std::llround(config.prevalence * N));
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  Rng assign(subject_seed(config.seed, N));
  assign.shuffle(order);
  std::vector<char> impaired(N, 0);
  for (std::size_t k = 0; k < impaired_count; ++k) impaired[order[k]] = 1;

  const WordSampler words;
  Corpus corpus;
  for (std::size_t i = 0; i < N; ++i) {
    Rng rng(subject_seed(config.seed, i));
    const std::string id = fmt::format("S{:03d}", i + 1);
    DemographicEntry d;
    d.subject_id = id;
    d.record = draw_demographics(config, impaired[i] != 0, rng);
    d.outcome = impaired[i] ? 1 : 0;
    const SubjectPlan plan = plan_transcript(config, id, impaired[i] != 0, rng, words);
    corpus.tracks.push_back(render_frames(config, plan, rng));
    corpus.transcripts.push_back(plan.transcript);
    corpus.demographics.push_back(std::move(d));
  }
  return corpus;
}

}  // namespace cogspeech
