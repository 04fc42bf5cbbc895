#include "bellsim/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <regex>

#include "bellsim/errors.hpp"
#include "bellsim/format.hpp"

namespace bellsim {

JointSpec joint_spec_from(const CorrelationSet& cs) {
  if (cs.settings_a.size() != 2 || cs.settings_b.size() != 2) {
    throw MissingPair("a joint spec needs exactly two settings per station");
  }
  JointSpec s;
  s.settings_a = {cs.settings_a[0], cs.settings_a[1]};
  s.settings_b = {cs.settings_b[0], cs.settings_b[1]};
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      const auto& c = cs.at({s.settings_a[i], s.settings_b[j]});
      s.e_ab[i][j] = c.e_ab;
      s.e_a[i][j] = c.e_a;
      s.e_b[i][j] = c.e_b;
    }
  }
  return s;
}

int atom_value(std::size_t atom, std::size_t variable) noexcept {
  return ((atom >> (3 - variable)) & 1U) ? -1 : 1;
}

std::string atom_label(std::size_t atom) {
  std::string s = "(";
  for (std::size_t v = 0; v < 4; ++v) {
    if (v) s += ',';
    s += atom_value(atom, v) > 0 ? "+1" : "-1";
  }
  return s + ")";
}

JointSpec moments_of(const JointDistribution& p, std::array<int, 2> settings_a,
                     std::array<int, 2> settings_b) {
  JointSpec s;
  s.settings_a = settings_a;
  s.settings_b = settings_b;
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      double ab = 0.0, a = 0.0, b = 0.0;
      for (std::size_t m = 0; m < 16; ++m) {
        ab += atom_value(m, i) * atom_value(m, 2 + j) * p[m];
        a += atom_value(m, i) * p[m];
        b += atom_value(m, 2 + j) * p[m];
      }
      s.e_ab[i][j] = ab;
      s.e_a[i][j] = a;
      s.e_b[i][j] = b;
    }
  }
  return s;
}

MarginalCheck marginal_consistency(const JointSpec& spec) {
  MarginalCheck r;
  for (std::size_t i = 0; i < 2; ++i) {
    if (std::abs(spec.e_a[i][0] - spec.e_a[i][1]) > kMomentTolerance) {
      r.consistent = false;
      r.offending.push_back("e_a(x=" + std::to_string(spec.settings_a[i]) + ") differs between y=" +
                            std::to_string(spec.settings_b[0]) + " and y=" +
                            std::to_string(spec.settings_b[1]));
    }
  }
  for (std::size_t j = 0; j < 2; ++j) {
    if (std::abs(spec.e_b[0][j] - spec.e_b[1][j]) > kMomentTolerance) {
      r.consistent = false;
      r.offending.push_back("e_b(y=" + std::to_string(spec.settings_b[j]) + ") differs between x=" +
                            std::to_string(spec.settings_a[0]) + " and x=" +
                            std::to_string(spec.settings_a[1]));
    }
  }
  return r;
}

namespace detail {

PhaseOneResult phase_one(const std::vector<double>& a, std::size_t rows, std::size_t cols,
                         std::vector<double> b) {
  constexpr double kPivotEps = 1e-12;
  const std::size_t width = cols + rows + 1;  // structural, artificial, rhs
  const std::size_t rhs = width - 1;
  std::vector<double> t((rows + 1) * width, 0.0);
  auto at = [&](std::size_t r, std::size_t c) -> double& { return t[r * width + c]; };

  std::vector<std::size_t> basis(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double sign = b[r] < 0.0 ? -1.0 : 1.0;
    for (std::size_t c = 0; c < cols; ++c) at(r, c) = sign * a[r * cols + c];
    at(r, cols + r) = 1.0;
    at(r, rhs) = sign * b[r];
    basis[r] = cols + r;
  }
  // Objective row holds reduced costs of min sum(artificials).
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) at(rows, c) -= at(r, c);
    at(rows, rhs) -= at(r, rhs);
  }

  for (std::size_t iter = 0; iter < 10000; ++iter) {
    std::size_t enter = width;
    for (std::size_t c = 0; c < rhs; ++c) {
      if (at(rows, c) < -kPivotEps) {
        enter = c;
        break;
      }
    }
    if (enter == width) break;

    std::size_t leave = rows;
    double best = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double coef = at(r, enter);
      if (coef <= kPivotEps) continue;
      const double ratio = at(r, rhs) / coef;
      if (leave == rows || ratio < best - kPivotEps ||
          (ratio <= best + kPivotEps && basis[r] < basis[leave])) {
        leave = r;
        best = ratio;
      }
    }
    if (leave == rows) break;  // unbounded direction; cannot happen for this objective

    const double pivot = at(leave, enter);
    for (std::size_t c = 0; c < width; ++c) at(leave, c) /= pivot;
    for (std::size_t r = 0; r <= rows; ++r) {
      if (r == leave) continue;
      const double factor = at(r, enter);
      if (factor == 0.0) continue;
      for (std::size_t c = 0; c < width; ++c) at(r, c) -= factor * at(leave, c);
    }
    basis[leave] = enter;
  }

  PhaseOneResult out;
  out.infeasibility = std::max(0.0, -at(rows, rhs));
  out.x.assign(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    if (basis[r] < cols) out.x[basis[r]] = std::max(0.0, at(r, rhs));
  }
  return out;
}

}  // namespace detail

namespace {

struct MomentSystem {
  std::vector<double> a;  // 9 x 16
  std::vector<double> b;
};

// Normalization, the 4 singleton means and the 4 correlators.
MomentSystem moment_system(const JointSpec& spec) {
  MomentSystem sys;
  sys.a.assign(9 * 16, 0.0);
  sys.b.assign(9, 0.0);
  auto row = [&](std::size_t r, auto f, double target) {
    for (std::size_t m = 0; m < 16; ++m) sys.a[r * 16 + m] = f(m);
    sys.b[r] = target;
  };
  row(0, [](std::size_t) { return 1.0; }, 1.0);
  for (std::size_t i = 0; i < 2; ++i) {
    const double ea = 0.5 * (spec.e_a[i][0] + spec.e_a[i][1]);
    row(1 + i, [i](std::size_t m) { return double(atom_value(m, i)); }, ea);
  }
  for (std::size_t j = 0; j < 2; ++j) {
    const double eb = 0.5 * (spec.e_b[0][j] + spec.e_b[1][j]);
    row(3 + j, [j](std::size_t m) { return double(atom_value(m, 2 + j)); }, eb);
  }
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      row(5 + 2 * i + j,
          [i, j](std::size_t m) { return double(atom_value(m, i) * atom_value(m, 2 + j)); },
          spec.e_ab[i][j]);
    }
  }
  return sys;
}

double max_residual(const MomentSystem& sys, const JointDistribution& p) {
  double worst = 0.0;
  for (std::size_t r = 0; r < sys.b.size(); ++r) {
    double v = 0.0;
    for (std::size_t m = 0; m < 16; ++m) v += sys.a[r * 16 + m] * p[m];
    worst = std::max(worst, std::abs(v - sys.b[r]));
  }
  return worst;
}

std::string pair_label(const JointSpec& s, std::size_t i, std::size_t j) {
  return "(" + std::to_string(s.settings_a[i]) + "," + std::to_string(s.settings_b[j]) + ")";
}

// The most violated named constraint of a spec with consistent marginals.
Certificate explain_infeasible(const JointSpec& spec, double lp_gap) {
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      for (double v : {spec.e_ab[i][j], spec.e_a[i][j], spec.e_b[i][j]}) {
        if (std::abs(v) > 1.0 + kMomentTolerance) {
          return {"range: moment at " + pair_label(spec, i, j) + " outside [-1, 1]", v};
        }
      }
    }
  }
  Certificate worst{"", 0.0};
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      for (int sa : {1, -1}) {
        for (int sb : {1, -1}) {
          const double p = 0.25 * (1.0 + sa * spec.e_a[i][j] + sb * spec.e_b[i][j] +
                                   sa * sb * spec.e_ab[i][j]);
          if (p < -kMomentTolerance && p < worst.value) {
            worst = {"positivity: p(" + std::string(sa > 0 ? "+" : "-") +
                         (sb > 0 ? "+" : "-") + ") at " + pair_label(spec, i, j) + " < 0",
                     p};
          }
        }
      }
    }
  }
  if (!worst.constraint.empty()) return worst;

  std::array<double, 4> e{spec.e_ab[0][0], spec.e_ab[0][1], spec.e_ab[1][0], spec.e_ab[1][1]};
  const auto r = chsh_from_correlators(e);
  if (r.s_max_abs > kChshBound + kMomentTolerance) {
    return {"CHSH " + pattern_name(chsh_patterns()[r.max_pattern]) + ": |S| <= 2",
            r.s_values[r.max_pattern]};
  }
  return {"moment matching residual", lp_gap};
}

}  // namespace

CouplingResult coupling_feasibility(const JointSpec& spec) {
  CouplingResult result;
  const auto mc = marginal_consistency(spec);
  if (!mc.consistent) {
    result.certificate = Certificate{"marginal consistency: " + mc.offending.front(), 0.0};
    return result;
  }
  const auto sys = moment_system(spec);
  const auto lp = detail::phase_one(sys.a, 9, 16, sys.b);
  JointDistribution p{};
  std::copy(lp.x.begin(), lp.x.end(), p.begin());
  const double residual = max_residual(sys, p);
  if (lp.infeasibility <= kMomentTolerance && residual <= kMomentTolerance) {
    result.feasible = true;
    result.witness = p;
    result.max_residual = residual;
  } else {
    result.certificate = explain_infeasible(spec, std::max(lp.infeasibility, residual));
  }
  return result;
}

bool chsh_characterization(const JointSpec& spec) {
  if (!marginal_consistency(spec).consistent) return false;
  std::array<double, 4> e{spec.e_ab[0][0], spec.e_ab[0][1], spec.e_ab[1][0], spec.e_ab[1][1]};
  const auto r = chsh_from_correlators(e);
  return r.s_max_abs <= kChshBound + kMomentTolerance;
}

JointDistribution lf_coupling() {
  constexpr std::array<int, 2> kSettings{1, -1};
  auto power = [](int base, int exp) { return (base == -1 && exp % 2 != 0) ? -1 : 1; };
  std::array<int, 16> hits{};
  for (int lambda = 1; lambda <= 6; ++lambda) {
    std::size_t m = 0;
    for (std::size_t v = 0; v < 4; ++v) {
      const int out = v < 2 ? power(kSettings[v], lambda) : power(kSettings[v - 2], lambda + 1);
      if (out < 0) m |= std::size_t{1} << (3 - v);
    }
    ++hits[m];
  }
  JointDistribution p{};
  for (std::size_t m = 0; m < 16; ++m) p[m] = hits[m] / 6.0;
  return p;
}

JointSpec read_joint_spec(std::istream& in, const std::string& source_name) {
  static const std::regex entry(R"(^(e_ab|e_a|e_b)\(\s*([+-]?\d+)\s*,\s*([+-]?\d+)\s*\)$)");
  JointSpec spec;
  bool have_a = false, have_b = false;
  std::string line_text;
  std::size_t line = 0;
  std::vector<std::tuple<std::string, int, int, double, std::size_t>> entries;
  while (std::getline(in, line_text)) {
    ++line;
    std::string_view sv = line_text;
    if (auto h = sv.find('#'); h != std::string_view::npos) sv = sv.substr(0, h);
    sv = trim(sv);
    if (sv.empty()) continue;
    const auto eq = sv.find('=');
    if (eq == std::string_view::npos) throw ParseError(source_name, line, "expected 'key = value'");
    const std::string key(trim(sv.substr(0, eq)));
    const auto rhs = trim(sv.substr(eq + 1));
    if (key == "settings_a" || key == "settings_b") {
      const auto words = split_ws(rhs);
      const auto s0 = words.size() == 2 ? parse_long(words[0]) : std::nullopt;
      const auto s1 = words.size() == 2 ? parse_long(words[1]) : std::nullopt;
      if (!s0 || !s1 || *s0 == *s1) {
        throw ParseError(source_name, line, key + " needs two distinct integer labels");
      }
      auto& target = key == "settings_a" ? spec.settings_a : spec.settings_b;
      target = {static_cast<int>(*s0), static_cast<int>(*s1)};
      (key == "settings_a" ? have_a : have_b) = true;
      continue;
    }
    std::smatch m;
    if (!std::regex_match(key, m, entry)) {
      throw ParseError(source_name, line, "unknown key '" + key + "'");
    }
    const auto v = parse_double(rhs);
    if (!v) throw ParseError(source_name, line, "'" + std::string(rhs) + "' is not a number");
    entries.emplace_back(m[1].str(), std::stoi(m[2].str()), std::stoi(m[3].str()), *v, line);
  }
  if (!have_a) spec.settings_a = {1, -1};
  if (!have_b) spec.settings_b = {1, -1};

  std::array<std::array<std::array<bool, 2>, 2>, 3> seen{};
  for (const auto& [name, x, y, v, at_line] : entries) {
    const auto i = std::find(spec.settings_a.begin(), spec.settings_a.end(), x);
    const auto j = std::find(spec.settings_b.begin(), spec.settings_b.end(), y);
    if (i == spec.settings_a.end() || j == spec.settings_b.end()) {
      throw ParseError(source_name, at_line, "setting pair not among the declared settings");
    }
    const std::size_t ii = i - spec.settings_a.begin();
    const std::size_t jj = j - spec.settings_b.begin();
    const std::size_t kind = name == "e_ab" ? 0 : name == "e_a" ? 1 : 2;
    if (seen[kind][ii][jj]) throw ParseError(source_name, at_line, name + " given twice");
    seen[kind][ii][jj] = true;
    (kind == 0 ? spec.e_ab : kind == 1 ? spec.e_a : spec.e_b)[ii][jj] = v;
  }
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t j = 0; j < 2; ++j) {
        if (!seen[k][i][j]) {
          static const char* names[] = {"e_ab", "e_a", "e_b"};
          throw ParseError(source_name, line,
                           std::string("missing ") + names[k] + pair_label(spec, i, j));
        }
      }
    }
  }
  return spec;
}

void write_joint_spec(const JointSpec& spec, std::ostream& out) {
  out << "settings_a = " << spec.settings_a[0] << ' ' << spec.settings_a[1] << '\n';
  out << "settings_b = " << spec.settings_b[0] << ' ' << spec.settings_b[1] << '\n';
  const char* names[] = {"e_ab", "e_a", "e_b"};
  const decltype(spec.e_ab)* tables[] = {&spec.e_ab, &spec.e_a, &spec.e_b};
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t j = 0; j < 2; ++j) {
        out << names[k] << pair_label(spec, i, j) << " = " << format_double((*tables[k])[i][j])
            << '\n';
      }
    }
  }
}

void write_witness(const JointDistribution& p, const JointSpec& spec, std::ostream& out) {
  out << "# atoms ordered (A" << spec.settings_a[0] << ",A" << spec.settings_a[1] << ",B"
      << spec.settings_b[0] << ",B" << spec.settings_b[1] << ")\n";
  for (std::size_t m = 0; m < 16; ++m) {
    out << "p" << atom_label(m) << " = " << format_double(p[m]) << '\n';
  }
}

nlohmann::ordered_json to_json(const CouplingResult& r, const JointSpec& spec) {
  nlohmann::ordered_json j;
  j["feasible"] = r.feasible;
  j["variables"] = {"A" + std::to_string(spec.settings_a[0]), "A" + std::to_string(spec.settings_a[1]),
                    "B" + std::to_string(spec.settings_b[0]), "B" + std::to_string(spec.settings_b[1])};
  if (r.witness) {
    nlohmann::ordered_json w;
    for (std::size_t m = 0; m < 16; ++m) w[atom_label(m)] = (*r.witness)[m];
    j["witness"] = std::move(w);
    j["max_residual"] = r.max_residual;
  } else {
    j["witness"] = nullptr;
  }
  if (r.certificate) {
    j["certificate"] = {{"constraint", r.certificate->constraint},
                        {"value", r.certificate->value}};
  } else {
    j["certificate"] = nullptr;
  }
  return j;
}

}  // namespace bellsim
