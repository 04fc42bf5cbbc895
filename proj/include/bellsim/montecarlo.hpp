#pragma once

#include <cstdint>
#include <vector>

#include "bellsim/core.hpp"

namespace bellsim {

// Stream ids handed to Rng::split. Trials of setting pair k use
// kTrialStreamBase + k.
inline constexpr std::uint64_t kWindowStream = 0x5754;  // "WT"
inline constexpr std::uint64_t kTrialStreamBase = 0x1000;

// Outcome counts of n trials at one setting pair. Trial i always draws from
// Rng::split(seed, stream, i), whatever the thread count.
CountTable tally_trials(const ExperimentModel& model, SettingPair sp, std::uint64_t n,
                        std::uint64_t seed, std::uint64_t stream);

// Single-threaded reference for tally_trials; must agree exactly.
CountTable tally_trials_serial(const ExperimentModel& model, SettingPair sp, std::uint64_t n,
                               std::uint64_t seed, std::uint64_t stream);

struct PairTally {
  SettingPair sp;
  CountTable counts;
};

// n trials at every declared setting pair, pair k on stream kTrialStreamBase + k.
std::vector<PairTally> tally_all_pairs(const ExperimentModel& model, std::uint64_t n,
                                       std::uint64_t seed);

}  // namespace bellsim
