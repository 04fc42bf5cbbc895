#include "bellsim/reports.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "bellsim/format.hpp"

namespace bellsim {

namespace {

nlohmann::ordered_json number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

}  // namespace

nlohmann::ordered_json to_json(const CorrelationSet& cs) {
  nlohmann::ordered_json j;
  j["conditioning"] = std::string(to_string(cs.conditioning));
  j["exact"] = cs.exact;
  j["settings_a"] = cs.settings_a;
  j["settings_b"] = cs.settings_b;
  j["unassigned"] = cs.unassigned;
  auto cells = nlohmann::ordered_json::array();
  for (const auto& c : cs.cells) {
    nlohmann::ordered_json cj;
    cj["x"] = c.sp.x;
    cj["y"] = c.sp.y;
    cj["e_ab"] = number(c.e_ab);
    cj["e_a"] = number(c.e_a);
    cj["e_b"] = number(c.e_b);
    cj["se_ab"] = number(c.se_ab);
    cj["se_a"] = number(c.se_a);
    cj["se_b"] = number(c.se_b);
    cj["n_raw"] = c.n_raw;
    cj["n_post"] = c.n_post;
    cj["c_hat"] = number(c.c_hat);
    cells.push_back(std::move(cj));
  }
  j["cells"] = std::move(cells);
  return j;
}

nlohmann::ordered_json to_json(const ChshReport& r) {
  nlohmann::ordered_json j;
  j["conditioning"] = std::string(to_string(r.conditioning));
  j["correlators"] = r.correlators;
  auto patterns = nlohmann::ordered_json::array();
  for (const auto& p : chsh_patterns()) patterns.push_back(pattern_name(p));
  j["patterns"] = std::move(patterns);
  j["s_values"] = r.s_values;
  j["s_max_abs"] = number(r.s_max_abs);
  j["max_pattern"] = pattern_name(chsh_patterns()[r.max_pattern]);
  j["se_s"] = number(r.se_s);
  j["violating_pattern"] = r.violating_pattern
                               ? nlohmann::ordered_json(pattern_name(chsh_patterns()[*r.violating_pattern]))
                               : nlohmann::ordered_json(nullptr);
  return j;
}

nlohmann::ordered_json to_json(const NoSignallingReport& r) {
  nlohmann::ordered_json j;
  j["conditioning"] = std::string(to_string(r.conditioning));
  auto deltas = nlohmann::ordered_json::array();
  for (const auto& d : r.deltas) {
    nlohmann::ordered_json dj;
    dj["station"] = std::string(1, d.station);
    dj["setting"] = d.setting;
    dj["remote_settings"] = {d.remote_first, d.remote_second};
    dj["delta"] = number(d.delta);
    dj["z"] = d.z ? number(*d.z) : nlohmann::ordered_json(nullptr);
    deltas.push_back(std::move(dj));
  }
  j["deltas"] = std::move(deltas);
  j["max_abs_delta"] = number(r.max_abs_delta());
  return j;
}

Analysis analyze(const CorrelationSet& cs) {
  return {cs, chsh(cs), no_signalling(cs)};
}

nlohmann::ordered_json to_json(const Analysis& a) {
  nlohmann::ordered_json j;
  j["correlations"] = to_json(a.correlations);
  j["chsh"] = to_json(a.chsh);
  j["no_signalling"] = to_json(a.no_signalling);
  return j;
}

void write_summary_rows(const CorrelationSet& cs, std::ostream& out) {
  for (const auto& c : cs.cells) {
    out << to_string(cs.conditioning) << ',' << c.sp.x << ',' << c.sp.y << ',' << c.n_raw << ','
        << c.n_post << ',' << format_double(c.c_hat) << ',' << format_double(c.e_ab) << ','
        << format_double(c.se_ab) << ',' << format_double(c.e_a) << ',' << format_double(c.se_a)
        << ',' << format_double(c.e_b) << ',' << format_double(c.se_b) << '\n';
  }
}

std::string summary_text(const Analysis& a) {
  std::ostringstream os;
  const auto& cs = a.correlations;
  os << "[" << to_string(cs.conditioning) << "]\n";
  for (const auto& c : cs.cells) {
    os << "  (" << c.sp.x << "," << c.sp.y << ")  e_ab=" << format_double(c.e_ab);
    if (!cs.exact) os << " se=" << format_double(c.se_ab);
    os << "  e_a=" << format_double(c.e_a) << "  e_b=" << format_double(c.e_b);
    if (cs.exact) {
      os << "  c=" << format_double(c.c_hat) << '\n';
    } else {
      os << "  n_raw=" << c.n_raw << " n_post=" << c.n_post << " c_hat=" << format_double(c.c_hat)
         << '\n';
    }
  }
  os << "  CHSH s_max_abs=" << format_double(a.chsh.s_max_abs)
     << " pattern=" << pattern_name(chsh_patterns()[a.chsh.max_pattern])
     << " se=" << format_double(a.chsh.se_s)
     << (a.chsh.violating_pattern ? "  VIOLATES |S| <= 2" : "") << '\n';
  os << "  no-signalling:";
  for (const auto& d : a.no_signalling.deltas) {
    os << "  " << d.station << "(" << d.setting << ")=" << format_double(d.delta);
    if (d.z) os << " z=" << format_double(*d.z);
  }
  os << '\n';
  return os.str();
}

}  // namespace bellsim
