#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bellsim/core.hpp"

namespace bellsim {

enum class StationId { a, b };

struct ClickEvent {
  std::uint64_t t = 0;  // ns
  int setting = 0;
  Outcome value = Outcome::plus;  // never Outcome::none

  friend bool operator==(const ClickEvent&, const ClickEvent&) = default;
};

struct ClickStream {
  StationId station = StationId::a;
  std::vector<ClickEvent> events;

  friend bool operator==(const ClickStream&, const ClickStream&) = default;
};

// Label used in a CoincidenceRecord when a station had no click in the bin and
// no setting log says which setting it was using.
inline constexpr int kUnknownSetting = std::numeric_limits<int>::min();

struct CoincidenceRecord {
  std::uint64_t window_index = 0;
  SettingPair sp;
  Outcome a = Outcome::none;
  Outcome b = Outcome::none;

  bool settings_known() const noexcept {
    return sp.x != kUnknownSetting && sp.y != kUnknownSetting;
  }

  friend bool operator==(const CoincidenceRecord&, const CoincidenceRecord&) = default;
};

enum class SettingRule { fixed, round_robin, random };

struct Schedule {
  std::uint64_t duration = 0;      // ns
  std::uint64_t window_width = 0;  // W, ns
  SettingRule rule = SettingRule::random;
  SettingPair fixed_pair;  // used by SettingRule::fixed

  std::uint64_t window_count() const noexcept {
    return window_width == 0 ? 0 : duration / window_width;
  }
};

// Throws std::invalid_argument unless W > 0 and duration >= W.
void check_schedule(const Schedule& sched);

// Settings in force in each window, as recorded by the switch electronics.
struct SettingLog {
  std::uint64_t window_width = 0;
  std::vector<SettingPair> windows;

  friend bool operator==(const SettingLog&, const SettingLog&) = default;
};

struct GeneratedStreams {
  ClickStream a;
  ClickStream b;
  SettingLog log;
};

// Per window k: choose the setting pair, sample one trial from Rng::split(seed,
// kWindowStream, k), emit a click at [kW, (k+1)W) for every non-zero outcome that
// survives independent thinning with probability detection_rate.
GeneratedStreams generate_streams(const ExperimentModel& model, const Schedule& sched,
                                  double detection_rate, std::uint64_t seed);

// Single-threaded reference for generate_streams; must agree exactly.
GeneratedStreams generate_streams_serial(const ExperimentModel& model, const Schedule& sched,
                                         double detection_rate, std::uint64_t seed);

struct PairingResult {
  std::vector<CoincidenceRecord> records;
  std::uint64_t dropped_a = 0;  // later same-bin clicks discarded at A
  std::uint64_t dropped_b = 0;
};

// Fixed aligned bins [kW, (k+1)W). Per bin and station the earliest click is
// kept (ties go to the lower outcome), a missing click becomes Outcome::none,
// and bins without clicks on either side are omitted. The setting pair comes
// from the clicks, or from `log` when given.
PairingResult pair_coincidences(const ClickStream& sa, const ClickStream& sb,
                                std::uint64_t window_width, const SettingLog* log = nullptr);

// Time-tag files: one event per line, `timestamp_ns<TAB>setting<TAB>outcome`,
// outcome +1 or -1; '#' lines are comments.
ClickStream read_timetags(std::istream& in, StationId station, const std::string& source_name);
ClickStream ingest_timetag_file(const std::filesystem::path& path, StationId station);
void write_timetags(const ClickStream& stream, std::ostream& out);

// Setting log files: `window_index<TAB>x<TAB>y` per line.
void write_setting_log(const SettingLog& log, std::ostream& out);
SettingLog read_setting_log(std::istream& in, std::uint64_t window_width,
                            const std::string& source_name);

// Coincidence CSV with header `window,x,y,a,b`; unknown settings are written NA.
void write_coincidences_csv(const std::vector<CoincidenceRecord>& records, std::ostream& out);
std::vector<CoincidenceRecord> read_coincidences_csv(std::istream& in,
                                                     const std::string& source_name);

}  // namespace bellsim
