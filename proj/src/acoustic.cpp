#include "cogspeech/acoustic.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <set>

#include "cogspeech/error.hpp"
#include "cogspeech/spline.hpp"

namespace cogspeech::acoustic {

namespace {

constexpr std::array<std::string_view, 5> kStatNames{"mean", "max", "min", "median", "sd"};

constexpr long long kHopMicros = 10'000;

long long to_micros(double seconds) { return std::llround(seconds * 1e6); }

// Smallest frame index whose time is >= micros.
long long first_frame_at_or_after(long long micros) {
  if (micros <= 0) return 0;
  return (micros + kHopMicros - 1) / kHopMicros;
}

}  // namespace

FrameTrack per_subject_normalize(const FrameTrack& track) {
  const std::set<std::string> skip(track.sparse_channels().begin(),
                                   track.sparse_channels().end());
  Eigen::MatrixXd values =
      zscore_columns(track.values(), track.channel_names(), skip);
  return FrameTrack(track.subject_id(), track.channel_names(), std::move(values),
                    track.sparse_channels());
}

FrameTrack compute_deltas(const FrameTrack& track) {
  const auto T = static_cast<Eigen::Index>(track.frames());
  const auto C = static_cast<Eigen::Index>(track.channels());
  Eigen::MatrixXd values(T, 2 * C);
  values.leftCols(C) = track.values();
  values.rightCols(C).row(0).setZero();
  if (T > 1) {
    values.rightCols(C).bottomRows(T - 1) =
        track.values().bottomRows(T - 1) - track.values().topRows(T - 1);
  }
  std::vector<std::string> names = track.channel_names();
  for (const auto& n : track.channel_names()) {
    names.push_back(n + std::string(channel::delta_suffix));
  }
  return FrameTrack(track.subject_id(), std::move(names), std::move(values),
                    track.sparse_channels());
}

std::vector<std::size_t> select_subject_frames(const FrameTrack& track,
                                               const Transcript& transcript) {
  if (track.subject_id() != transcript.subject_id) {
    throw InputError(fmt::format("frame track '{}' paired with transcript '{}'",
                                 track.subject_id(), transcript.subject_id));
  }
  const auto T = static_cast<long long>(track.frames());
  std::vector<char> member(static_cast<std::size_t>(T), 0);
  for (const auto& turn : transcript.turns) {
    if (turn.speaker != Speaker::subject) continue;
    const long long lo = first_frame_at_or_after(to_micros(turn.start));
    const long long hi = std::min(T, first_frame_at_or_after(to_micros(turn.end)));
    for (long long i = lo; i < hi; ++i) member[static_cast<std::size_t>(i)] = 1;
  }
  std::vector<std::size_t> frames;
  for (std::size_t i = 0; i < member.size(); ++i) {
    if (member[i]) frames.push_back(i);
  }
  if (frames.empty()) {
    throw PreconditionError(
        fmt::format("subject {}: no subject speech within the frame track", track.subject_id()));
  }
  return frames;
}

std::vector<std::size_t> envelope_knots(std::span<const double> v,
                                        std::size_t min_separation) {
  const std::size_t n = v.size();
  if (n == 0) return {};
  if (n == 1) return {0};
  min_separation = std::max<std::size_t>(min_separation, 1);

  std::vector<std::size_t> peaks;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(v[i] > v[i - 1] && v[i] > v[i + 1])) continue;
    if (peaks.empty() || i - peaks.back() >= min_separation) {
      peaks.push_back(i);
    } else if (v[i] > v[peaks.back()]) {
      peaks.back() = i;
    }
  }
  std::vector<std::size_t> knots;
  knots.reserve(peaks.size() + 2);
  knots.push_back(0);
  knots.insert(knots.end(), peaks.begin(), peaks.end());
  knots.push_back(n - 1);
  return knots;
}

std::vector<double> voicing_envelope(std::span<const double> v,
                                     std::size_t min_separation) {
  const auto knots = envelope_knots(v, min_separation);
  if (knots.size() < 2) return {v.begin(), v.end()};
  std::vector<double> kx, ky;
  for (auto k : knots) {
    kx.push_back(static_cast<double>(k));
    ky.push_back(v[k]);
  }
  const NaturalCubicSpline spline(std::move(kx), std::move(ky));
  std::vector<double> env(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) env[i] = spline(static_cast<double>(i));
  return env;
}

std::vector<SpeechSegment> detect_speech_segments(std::span<const double> envelope,
                                                  double threshold) {
  std::vector<SpeechSegment> segments;
  bool inside = false;
  for (std::size_t i = 0; i < envelope.size(); ++i) {
    const bool speech = envelope[i] > threshold;
    if (speech && !inside) {
      segments.push_back({i, i});
      inside = true;
    } else if (speech) {
      segments.back().end_frame = i;
    } else {
      inside = false;
    }
  }
  return segments;
}

std::vector<std::string> feature_names(std::span<const std::string> base_channels) {
  std::vector<std::string> names;
  names.reserve(base_channels.size() * 2 * kStatNames.size());
  for (const char* suffix : {"", "_diff"}) {
    for (const auto& c : base_channels) {
      for (auto stat : kStatNames) names.push_back(fmt::format("{}{}_{}", c, suffix, stat));
    }
  }
  return names;
}

NamedVector global_stats(const FrameTrack& track, std::span<const SpeechSegment> segments) {
  const std::size_t total = track.channels();
  const auto& names = track.channel_names();
  if (total % 2 != 0) throw PreconditionError("global statistics need base + delta channels");
  const std::size_t C = total / 2;
  for (std::size_t c = 0; c < C; ++c) {
    if (names[C + c] != names[c] + std::string(channel::delta_suffix)) {
      throw PreconditionError("channel '" + names[C + c] + "' is not the delta of '" +
                              names[c] + "'");
    }
  }
  if (segments.empty()) {
    throw PreconditionError(
        fmt::format("subject {}: no speech segments", track.subject_id()));
  }

  std::vector<std::size_t> frames;
  for (const auto& s : segments) {
    for (std::size_t f = s.start_frame; f <= s.end_frame; ++f) frames.push_back(f);
  }

  const auto& v = track.values();
  NamedVector out;
  out.names = feature_names(std::span(names).first(C));
  out.values.reserve(out.names.size());
  std::vector<double> sample;
  for (std::size_t c = 0; c < total; ++c) {
    const std::size_t base = c % C;
    const bool masked = is_nonzero_masked(names[base]);
    sample.clear();
    for (auto f : frames) {
      const auto row = static_cast<Eigen::Index>(f);
      if (masked && v(row, static_cast<Eigen::Index>(base)) == 0.0) continue;
      sample.push_back(v(row, static_cast<Eigen::Index>(c)));
    }
    if (sample.empty()) {
      spdlog::warn("subject {}: channel {} has no non-zero frames in speech; statistics set to 0",
                   track.subject_id(), names[c]);
      out.values.insert(out.values.end(), kStatNames.size(), 0.0);
      continue;
    }
    const Summary s = summarize(sample);
    out.values.insert(out.values.end(), {s.mean, s.max, s.min, s.median, s.sd});
  }
  return out;
}

NamedVector extract_features(const FrameTrack& raw, const Transcript& transcript,
                             const Options& options) {
  const FrameTrack full = compute_deltas(per_subject_normalize(raw));
  const auto frames = select_subject_frames(full, transcript);
  const FrameTrack subject = full.select_rows(frames);

  const auto voicing_col = *subject.index_of(channel::voicing);
  const Eigen::VectorXd voicing = subject.values().col(static_cast<Eigen::Index>(voicing_col));
  const std::span<const double> vs(voicing.data(), static_cast<std::size_t>(voicing.size()));
  const double mu = mean(vs);
  const double sd = sample_sd(vs);
  if (!(sd > 0.0)) throw DegenerateColumnError(std::string(channel::voicing));
  std::vector<double> z(vs.size());
  for (std::size_t i = 0; i < vs.size(); ++i) z[i] = (vs[i] - mu) / sd;

  const auto envelope = voicing_envelope(z, options.peak_separation);
  const auto segments = detect_speech_segments(envelope, options.speech_threshold);
  return global_stats(subject, segments);
}

}  // namespace cogspeech::acoustic
