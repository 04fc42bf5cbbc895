#include "bellsim/streams.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "bellsim/errors.hpp"
#include "bellsim/format.hpp"
#include "bellsim/montecarlo.hpp"

namespace bellsim {

void check_schedule(const Schedule& sched) {
  if (sched.window_width == 0) throw std::invalid_argument("window width W must be positive");
  if (sched.duration < sched.window_width) {
    throw std::invalid_argument("duration must be at least one window width");
  }
}

namespace {

struct WindowDraw {
  SettingPair sp;
  Outcome a = Outcome::none;
  Outcome b = Outcome::none;
  std::uint64_t ta = 0;
  std::uint64_t tb = 0;
};

class WindowSampler {
 public:
  WindowSampler(const ExperimentModel& model, const Schedule& sched, double rate,
                std::uint64_t seed)
      : model_(model),
        sched_(sched),
        rate_(rate),
        seed_(seed),
        pairs_(model.setting_pairs()),
        labels_a_(model.station_a.labels()),
        labels_b_(model.station_b.labels()) {
    require_valid(model);
    check_schedule(sched);
    if (!(rate >= 0.0 && rate <= 1.0)) {
      throw std::invalid_argument("detection rate must lie in [0, 1]");
    }
    if (sched.rule == SettingRule::fixed &&
        std::find(pairs_.begin(), pairs_.end(), sched.fixed_pair) == pairs_.end()) {
      throw std::invalid_argument("fixed setting pair is not declared by the model");
    }
  }

  std::uint64_t windows() const noexcept { return sched_.window_count(); }

  WindowDraw draw(std::uint64_t k) const {
    Rng rng = Rng::split(seed_, kWindowStream, k);
    WindowDraw d;
    switch (sched_.rule) {
      case SettingRule::fixed: d.sp = sched_.fixed_pair; break;
      case SettingRule::round_robin: d.sp = pairs_[k % pairs_.size()]; break;
      case SettingRule::random:
        d.sp.x = labels_a_[rng.below(labels_a_.size())];
        d.sp.y = labels_b_[rng.below(labels_b_.size())];
        break;
    }
    auto [a, b] = sample_trial(model_, d.sp, rng);
    const std::uint64_t start = k * sched_.window_width;
    d.ta = start + rng.below(sched_.window_width);
    d.tb = start + rng.below(sched_.window_width);
    // Thinning draws are always consumed so the stream layout never depends
    // on the outcome.
    const bool keep_a = rng.uniform() < rate_;
    const bool keep_b = rng.uniform() < rate_;
    d.a = keep_a ? a : Outcome::none;
    d.b = keep_b ? b : Outcome::none;
    return d;
  }

  GeneratedStreams empty_result() const {
    GeneratedStreams out;
    out.a.station = StationId::a;
    out.b.station = StationId::b;
    out.log.window_width = sched_.window_width;
    out.log.windows.reserve(windows());
    return out;
  }

  static void append(GeneratedStreams& out, const WindowDraw& d) {
    out.log.windows.push_back(d.sp);
    if (is_click(d.a)) out.a.events.push_back({d.ta, d.sp.x, d.a});
    if (is_click(d.b)) out.b.events.push_back({d.tb, d.sp.y, d.b});
  }

 private:
  const ExperimentModel& model_;
  Schedule sched_;
  double rate_;
  std::uint64_t seed_;
  std::vector<SettingPair> pairs_;
  std::vector<int> labels_a_;
  std::vector<int> labels_b_;
};

constexpr std::uint64_t kBlock = 1 << 16;

}  // namespace

GeneratedStreams generate_streams_serial(const ExperimentModel& model, const Schedule& sched,
                                         double detection_rate, std::uint64_t seed) {
  const WindowSampler sampler(model, sched, detection_rate, seed);
  auto out = sampler.empty_result();
  for (std::uint64_t k = 0; k < sampler.windows(); ++k) WindowSampler::append(out, sampler.draw(k));
  return out;
}

GeneratedStreams generate_streams(const ExperimentModel& model, const Schedule& sched,
                                  double detection_rate, std::uint64_t seed) {
  const WindowSampler sampler(model, sched, detection_rate, seed);
  auto out = sampler.empty_result();
  const std::uint64_t n = sampler.windows();
  std::vector<WindowDraw> block;
  for (std::uint64_t begin = 0; begin < n; begin += kBlock) {
    const std::uint64_t len = std::min(kBlock, n - begin);
    block.resize(len);
    const auto count = static_cast<std::int64_t>(len);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < count; ++i) {
      block[static_cast<std::size_t>(i)] = sampler.draw(begin + static_cast<std::uint64_t>(i));
    }
    for (const auto& d : block) WindowSampler::append(out, d);
  }
  return out;
}

namespace {

void check_sorted(const ClickStream& s, const char* name) {
  for (std::size_t i = 1; i < s.events.size(); ++i) {
    if (s.events[i].t < s.events[i - 1].t) {
      throw UnsortedStream(std::string("stream ") + name + " is not sorted at event " +
                           std::to_string(i));
    }
  }
}

struct BinPick {
  bool present = false;
  ClickEvent event;
};

// Consumes every event of `s` in window k starting at `i`.
BinPick take_bin(const ClickStream& s, std::size_t& i, std::uint64_t k, std::uint64_t w,
                 std::uint64_t& dropped, const char* name) {
  BinPick pick;
  while (i < s.events.size() && s.events[i].t / w == k) {
    const auto& e = s.events[i++];
    if (!pick.present) {
      pick.present = true;
      pick.event = e;
      continue;
    }
    if (e.setting != pick.event.setting) {
      throw SettingConflict(std::string("station ") + name + " window " + std::to_string(k) +
                            ": clicks under settings " + std::to_string(pick.event.setting) +
                            " and " + std::to_string(e.setting));
    }
    ++dropped;
    if (e.t == pick.event.t && value(e.value) < value(pick.event.value)) pick.event = e;
  }
  return pick;
}

}  // namespace

PairingResult pair_coincidences(const ClickStream& sa, const ClickStream& sb,
                                std::uint64_t window_width, const SettingLog* log) {
  if (window_width == 0) throw std::invalid_argument("window width W must be positive");
  if (sa.station != StationId::a || sb.station != StationId::b) {
    throw std::invalid_argument("pair_coincidences expects the A stream first, then B");
  }
  check_sorted(sa, "A");
  check_sorted(sb, "B");

  constexpr auto kNone = std::numeric_limits<std::uint64_t>::max();
  PairingResult out;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < sa.events.size() || j < sb.events.size()) {
    const std::uint64_t wa = i < sa.events.size() ? sa.events[i].t / window_width : kNone;
    const std::uint64_t wb = j < sb.events.size() ? sb.events[j].t / window_width : kNone;
    const std::uint64_t k = std::min(wa, wb);
    const BinPick pa = take_bin(sa, i, k, window_width, out.dropped_a, "A");
    const BinPick pb = take_bin(sb, j, k, window_width, out.dropped_b, "B");

    CoincidenceRecord rec;
    rec.window_index = k;
    rec.a = pa.present ? pa.event.value : Outcome::none;
    rec.b = pb.present ? pb.event.value : Outcome::none;
    if (log != nullptr) {
      if (k >= log->windows.size()) {
        throw SettingConflict("window " + std::to_string(k) + " has clicks but no logged setting");
      }
      rec.sp = log->windows[k];
      if ((pa.present && pa.event.setting != rec.sp.x) ||
          (pb.present && pb.event.setting != rec.sp.y)) {
        throw SettingConflict("window " + std::to_string(k) +
                              ": click setting disagrees with the setting log");
      }
    } else {
      rec.sp.x = pa.present ? pa.event.setting : kUnknownSetting;
      rec.sp.y = pb.present ? pb.event.setting : kUnknownSetting;
    }
    out.records.push_back(rec);
  }
  return out;
}

namespace {

int parse_setting(std::string_view s, const std::string& source, std::size_t line) {
  const auto v = parse_long(s);
  if (!v || *v < std::numeric_limits<int>::min() + 1 || *v > std::numeric_limits<int>::max()) {
    throw ParseError(source, line, "setting '" + std::string(s) + "' is not an integer label");
  }
  return static_cast<int>(*v);
}

std::string outcome_token(Outcome o) {
  switch (o) {
    case Outcome::minus: return "-1";
    case Outcome::none: return "0";
    case Outcome::plus: return "+1";
  }
  return "?";
}

bool skippable(std::string_view line) {
  line = trim(line);
  return line.empty() || line.front() == '#';
}

}  // namespace

ClickStream read_timetags(std::istream& in, StationId station, const std::string& source_name) {
  ClickStream out;
  out.station = station;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (skippable(raw)) continue;
    const auto fields = split_ws(raw);
    if (fields.size() != 3) {
      throw ParseError(source_name, line, "expected 3 fields (timestamp, setting, outcome), got " +
                                              std::to_string(fields.size()));
    }
    const auto t = parse_u64(fields[0]);
    if (!t) throw ParseError(source_name, line, "bad timestamp '" + std::string(fields[0]) + "'");
    const int setting = parse_setting(fields[1], source_name, line);
    Outcome value;
    if (fields[2] == "+1" || fields[2] == "1") {
      value = Outcome::plus;
    } else if (fields[2] == "-1") {
      value = Outcome::minus;
    } else {
      throw ParseError(source_name, line,
                       "outcome '" + std::string(fields[2]) + "' is not +1 or -1");
    }
    if (!out.events.empty() && *t < out.events.back().t) {
      throw NonMonotonicTimestamps(source_name + ":" + std::to_string(line) + ": timestamp " +
                                   std::to_string(*t) + " precedes " +
                                   std::to_string(out.events.back().t));
    }
    out.events.push_back({*t, setting, value});
  }
  return out;
}

ClickStream ingest_timetag_file(const std::filesystem::path& path, StationId station) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open time-tag file '" + path.string() + "'");
  return read_timetags(in, station, path.string());
}

void write_timetags(const ClickStream& stream, std::ostream& out) {
  out << "# timestamp_ns\tsetting\toutcome\n";
  for (const auto& e : stream.events) {
    out << e.t << '\t' << e.setting << '\t' << outcome_token(e.value) << '\n';
  }
}

void write_setting_log(const SettingLog& log, std::ostream& out) {
  out << "# window\tx\ty\n";
  for (std::size_t k = 0; k < log.windows.size(); ++k) {
    out << k << '\t' << log.windows[k].x << '\t' << log.windows[k].y << '\n';
  }
}

SettingLog read_setting_log(std::istream& in, std::uint64_t window_width,
                            const std::string& source_name) {
  SettingLog log;
  log.window_width = window_width;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (skippable(raw)) continue;
    const auto fields = split_ws(raw);
    if (fields.size() != 3) throw ParseError(source_name, line, "expected window, x, y");
    const auto k = parse_u64(fields[0]);
    if (!k || *k != log.windows.size()) {
      throw ParseError(source_name, line, "window indices must run 0, 1, 2, ... without gaps");
    }
    log.windows.push_back({parse_setting(fields[1], source_name, line),
                           parse_setting(fields[2], source_name, line)});
  }
  return log;
}

void write_coincidences_csv(const std::vector<CoincidenceRecord>& records, std::ostream& out) {
  out << "window,x,y,a,b\n";
  auto label = [](int s) { return s == kUnknownSetting ? std::string("NA") : std::to_string(s); };
  for (const auto& r : records) {
    out << r.window_index << ',' << label(r.sp.x) << ',' << label(r.sp.y) << ',' << value(r.a)
        << ',' << value(r.b) << '\n';
  }
}

std::vector<CoincidenceRecord> read_coincidences_csv(std::istream& in,
                                                     const std::string& source_name) {
  std::vector<CoincidenceRecord> out;
  std::string raw;
  std::size_t line = 0;
  bool header = false;
  while (std::getline(in, raw)) {
    ++line;
    if (skippable(raw)) continue;
    const std::string_view text = trim(raw);
    if (!header) {
      if (text != "window,x,y,a,b") {
        throw ParseError(source_name, line, "expected header 'window,x,y,a,b'");
      }
      header = true;
      continue;
    }
    std::vector<std::string_view> f;
    std::size_t start = 0;
    for (std::size_t p = 0; p <= text.size(); ++p) {
      if (p == text.size() || text[p] == ',') {
        f.push_back(trim(text.substr(start, p - start)));
        start = p + 1;
      }
    }
    if (f.size() != 5) throw ParseError(source_name, line, "expected 5 comma-separated fields");
    CoincidenceRecord r;
    const auto w = parse_u64(f[0]);
    if (!w) throw ParseError(source_name, line, "bad window index '" + std::string(f[0]) + "'");
    r.window_index = *w;
    r.sp.x = f[1] == "NA" ? kUnknownSetting : parse_setting(f[1], source_name, line);
    r.sp.y = f[2] == "NA" ? kUnknownSetting : parse_setting(f[2], source_name, line);
    const auto a = parse_long(f[3]);
    const auto b = parse_long(f[4]);
    const auto oa = a ? outcome_from_int(*a) : std::nullopt;
    const auto ob = b ? outcome_from_int(*b) : std::nullopt;
    if (!oa || !ob) throw ParseError(source_name, line, "outcomes must be -1, 0 or 1");
    r.a = *oa;
    r.b = *ob;
    out.push_back(r);
  }
  if (!header) throw ParseError(source_name, line, "missing header 'window,x,y,a,b'");
  return out;
}

}  // namespace bellsim
