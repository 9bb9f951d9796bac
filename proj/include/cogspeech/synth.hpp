#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cogspeech/harness.hpp"

namespace cogspeech {

// Generator settings for a synthetic interview corpus. Impaired subjects get
// four planted shifts: brief pitch dips below the usual floor, jitter values
// concentrated towards their centre (smaller sd, same range), shorter turns
// and more questions.
// Setting every effect to zero makes both groups identically distributed.
struct SynthConfig {
  std::size_t subjects = 60;
  double prevalence = 0.228;
  std::uint64_t seed = 1;

  // Planted effects.
  double pitch_dip_hz = 45.0;        // depth of dips below the pitch floor
  double jitter_concentration = 2.0;  // exponent added to the jitter shape
  double turn_duration_ratio = 0.6;   // impaired / unimpaired mean turn length
  double extra_questions = 4.0;       // expected additional question turns
  double age_shift = 4.0;             // years

  // Noise scales.
  double channel_noise = 1.0;      // innovation sd of the dense channels
  double turn_duration_sd = 0.35;  // log-scale sd of turn lengths
  double subject_pitch_sd = 8.0;   // between-subject sd of the pitch centre (Hz)

  std::size_t min_subject_turns = 8;
  std::size_t max_subject_turns = 32;
  double mean_turn_seconds = 3.2;

  // Throws PreconditionError unless N >= 10, prevalence in (0, 1) and all
  // scales are non-negative.
  void validate() const;
  // Zero effects, same seed and noise.
  SynthConfig without_effects() const;
};

// Keys as in SynthConfig; unknown keys are rejected.
SynthConfig parse_synth_config(const std::string& json_text);
std::string synth_config_json(const SynthConfig& config);

// Deterministic for a given config; round(prevalence * N) impaired subjects.
Corpus synthesize_corpus(const SynthConfig& config);

}  // namespace cogspeech
