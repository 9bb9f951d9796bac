#pragma once

namespace cogspeech {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitPrecondition = 3;

// Subcommands extract, loocv, baseline, synth and report. Returns the process
// exit code; never throws.
int run_cli(int argc, char** argv);

}  // namespace cogspeech
