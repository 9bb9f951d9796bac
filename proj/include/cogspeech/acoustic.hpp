#pragma once

#include <span>
#include <string>
#include <vector>

#include "cogspeech/corpus.hpp"
#include "cogspeech/summary.hpp"

namespace cogspeech::acoustic {

// Inclusive frame range.
struct SpeechSegment {
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;

  std::size_t length() const noexcept { return end_frame - start_frame + 1; }
  bool operator==(const SpeechSegment&) const = default;
};

struct Options {
  std::size_t peak_separation = 10;  // frames (100 ms)
  double speech_threshold = 0.1;     // sd units of the z-scored voicing
};

// Z-scores every non-sparse channel over all frames of the recording.
// Throws DegenerateColumnError for a constant non-sparse channel.
FrameTrack per_subject_normalize(const FrameTrack& track);

// Appends `<channel>_diff` with d_0 = 0 and d_t = x_t - x_{t-1}.
FrameTrack compute_deltas(const FrameTrack& track);

// Frames whose time t*hop falls in [start, end) of a subject turn.
// Throws PreconditionError when no subject speech overlaps the track.
std::vector<std::size_t> select_subject_frames(const FrameTrack& track,
                                               const Transcript& transcript);

// Knot positions for the upper envelope: endpoints plus strict local maxima
// at least `min_separation` apart, the larger peak winning a conflict.
std::vector<std::size_t> envelope_knots(std::span<const double> v,
                                        std::size_t min_separation);

// Natural cubic spline through envelope_knots, sampled at every frame.
std::vector<double> voicing_envelope(std::span<const double> v,
                                     std::size_t min_separation = 10);

// Maximal runs with envelope > threshold.
std::vector<SpeechSegment> detect_speech_segments(std::span<const double> envelope,
                                                  double threshold = 0.1);

// mean, max, min, median, sd per channel of a 2C-channel track (base
// channels followed by their `_diff` channels). Pitch, shimmer and jitter and
// their deltas use only frames where the base value is non-zero.
NamedVector global_stats(const FrameTrack& track,
                         std::span<const SpeechSegment> segments);

std::vector<std::string> feature_names(std::span<const std::string> base_channels);

// The full per-subject procedure on a raw track.
NamedVector extract_features(const FrameTrack& raw, const Transcript& transcript,
                             const Options& options = {});

}  // namespace cogspeech::acoustic
