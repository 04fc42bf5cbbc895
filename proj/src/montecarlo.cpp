#include "bellsim/montecarlo.hpp"

#include <array>
#include <string>

#include "bellsim/errors.hpp"

namespace bellsim {

namespace {

// sample_trial must not throw inside a parallel region.
void check_pair(const ExperimentModel& model, SettingPair sp) {
  if (!model.station_a.index_of(sp.x) || !model.station_b.index_of(sp.y)) {
    throw InvalidModel("setting pair (" + std::to_string(sp.x) + "," + std::to_string(sp.y) +
                       ") is not declared by the model");
  }
  if (model.variant == Variant::m3 && !model.sampler_only() && model.joint_for(sp) == nullptr) {
    throw InvalidModel("M3 model lacks a joint instrument distribution");
  }
}

using Flat = std::array<std::uint64_t, 9>;

inline std::size_t flat_index(Outcome a, Outcome b) {
  return static_cast<std::size_t>((value(a) + 1) * 3 + value(b) + 1);
}

CountTable unflatten(const Flat& flat) {
  CountTable t;
  for (std::size_t i = 0; i < 9; ++i) t.cell[i / 3][i % 3] = flat[i];
  return t;
}

}  // namespace

CountTable tally_trials_serial(const ExperimentModel& model, SettingPair sp, std::uint64_t n,
                               std::uint64_t seed, std::uint64_t stream) {
  check_pair(model, sp);
  Flat counts{};
  for (std::uint64_t i = 0; i < n; ++i) {
    Rng rng = Rng::split(seed, stream, i);
    const auto [a, b] = sample_trial(model, sp, rng);
    ++counts[flat_index(a, b)];
  }
  return unflatten(counts);
}

CountTable tally_trials(const ExperimentModel& model, SettingPair sp, std::uint64_t n,
                        std::uint64_t seed, std::uint64_t stream) {
  check_pair(model, sp);
  // Integer counts make the reduction order-independent.
  std::uint64_t c[9] = {};
  const auto total = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) reduction(+ : c[:9])
  for (std::int64_t i = 0; i < total; ++i) {
    Rng rng = Rng::split(seed, stream, static_cast<std::uint64_t>(i));
    const auto [a, b] = sample_trial(model, sp, rng);
    ++c[flat_index(a, b)];
  }
  Flat flat{};
  for (std::size_t i = 0; i < 9; ++i) flat[i] = c[i];
  return unflatten(flat);
}

std::vector<PairTally> tally_all_pairs(const ExperimentModel& model, std::uint64_t n,
                                       std::uint64_t seed) {
  std::vector<PairTally> out;
  const auto pairs = model.setting_pairs();
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    out.push_back({pairs[k], tally_trials(model, pairs[k], n, seed, kTrialStreamBase + k)});
  }
  return out;
}

}  // namespace bellsim
