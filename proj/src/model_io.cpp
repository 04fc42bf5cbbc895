#include "bellsim/model_io.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "bellsim/errors.hpp"
#include "bellsim/format.hpp"

namespace bellsim {

namespace {

bool valid_token(const std::string& t) {
  if (t.empty()) return false;
  for (char c : t) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '=' || c == '#' || c == '[' ||
        c == ']') {
      return false;
    }
  }
  return true;
}

void require_tokens(const std::vector<std::string>& atoms, const char* what) {
  for (const auto& a : atoms) {
    if (!valid_token(a)) throw InvalidModel(std::string("cannot save ") + what + " atom '" + a + "'");
  }
}

std::string outcome_token(Outcome o) {
  switch (o) {
    case Outcome::minus: return "-1";
    case Outcome::none: return "0";
    case Outcome::plus: return "+1";
  }
  return "?";
}

void write_atoms(std::ostream& out, const char* key, const std::vector<std::string>& atoms) {
  out << key << " =";
  for (const auto& a : atoms) out << ' ' << a;
  out << '\n';
}

void write_station(std::ostream& out, const ExperimentModel& model, const Station& station,
                   char name, const std::vector<std::string>& source_atoms) {
  for (const auto& s : station.settings) {
    out << "\n[station " << name << " setting " << s.label << "]\n";
    if (model.variant == Variant::quantum_ref) {
      out << "angle = " << format_double(s.angle) << '\n';
      continue;
    }
    require_tokens(s.instrument.atoms, "instrument");
    write_atoms(out, "instrument", s.instrument.atoms);
    for (std::size_t i = 0; i < s.instrument.atoms.size(); ++i) {
      out << "p " << s.instrument.atoms[i] << " = " << format_double(s.instrument.probs.at(i))
          << '\n';
    }
    for (std::size_t r = 0; r < s.response.rows; ++r) {
      for (std::size_t c = 0; c < s.response.cols; ++c) {
        out << "response " << source_atoms.at(r) << ' ' << s.instrument.atoms.at(c) << " = "
            << outcome_token(s.response.at(r, c)) << '\n';
      }
    }
  }
}

}  // namespace

void save_model(const ExperimentModel& model, std::ostream& out) {
  if (model.sampler_only()) {
    throw InvalidModel("sampler-only models have no table form and cannot be saved");
  }
  out << "# bellsim model\n";
  out << "variant = " << to_string(model.variant) << '\n';
  if (model.variant != Variant::quantum_ref) {
    require_tokens(model.source.lambda1, "source");
    require_tokens(model.source.lambda2, "source");
    out << "\n[source]\n";
    write_atoms(out, "lambda1", model.source.lambda1);
    write_atoms(out, "lambda2", model.source.lambda2);
    for (const auto& atom : model.source.support) {
      out << "p " << model.source.lambda1.at(atom.first) << ' '
          << model.source.lambda2.at(atom.second) << " = " << format_double(atom.prob) << '\n';
    }
  }
  write_station(out, model, model.station_a, 'A', model.source.lambda1);
  write_station(out, model, model.station_b, 'B', model.source.lambda2);
  for (const auto& joint : model.joint_instruments) {
    const auto ia = model.station_a.index_of(joint.sp.x);
    const auto ib = model.station_b.index_of(joint.sp.y);
    if (!ia || !ib) throw InvalidModel("joint instrument refers to an undeclared setting");
    const auto& atoms_a = model.station_a.settings[*ia].instrument.atoms;
    const auto& atoms_b = model.station_b.settings[*ib].instrument.atoms;
    out << "\n[joint " << joint.sp.x << ' ' << joint.sp.y << "]\n";
    for (const auto& atom : joint.support) {
      out << "p " << atoms_a.at(atom.first) << ' ' << atoms_b.at(atom.second) << " = "
          << format_double(atom.prob) << '\n';
    }
  }
}

std::string save_model(const ExperimentModel& model) {
  std::ostringstream os;
  save_model(model, os);
  return os.str();
}

void save_model_file(const ExperimentModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  save_model(model, out);
}

namespace {

class ModelParser {
 public:
  explicit ModelParser(std::string source) : source_(std::move(source)) {}

  ExperimentModel parse(std::istream& in) {
    std::string raw;
    while (std::getline(in, raw)) {
      ++line_;
      std::string_view line = raw;
      if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        section(line);
      } else {
        entry(line);
      }
    }
    finish();
    return std::move(model_);
  }

 private:
  enum class Section { top, source, station, joint };

  struct PendingStation {
    char station = 'A';
    std::size_t index = 0;
    std::map<std::pair<std::size_t, std::size_t>, Outcome> responses;
    bool has_instrument = false;
  };

  [[noreturn]] void fail(const std::string& reason) const { throw ParseError(source_, line_, reason); }

  void section(std::string_view line) {
    if (line.back() != ']') fail("unterminated section header");
    const auto words = split_ws(line.substr(1, line.size() - 2));
    if (words.size() == 1 && words[0] == "source") {
      current_ = Section::source;
      return;
    }
    if (words.size() == 4 && words[0] == "station" && (words[1] == "A" || words[1] == "B") &&
        words[2] == "setting") {
      const auto label = parse_long(words[3]);
      if (!label) fail("setting label must be an integer");
      Station& st = words[1] == "A" ? model_.station_a : model_.station_b;
      if (st.index_of(static_cast<int>(*label))) fail("setting declared twice");
      StationSetting s;
      s.label = static_cast<int>(*label);
      st.settings.push_back(std::move(s));
      pending_.push_back({words[1][0], st.settings.size() - 1, {}, false});
      current_ = Section::station;
      return;
    }
    if (words.size() == 3 && words[0] == "joint") {
      const auto x = parse_long(words[1]);
      const auto y = parse_long(words[2]);
      if (!x || !y) fail("joint section needs two integer setting labels");
      PairInstrument j;
      j.sp = {static_cast<int>(*x), static_cast<int>(*y)};
      if (model_.joint_for(j.sp)) fail("joint section declared twice");
      model_.joint_instruments.push_back(std::move(j));
      current_ = Section::joint;
      return;
    }
    fail("unknown section '" + std::string(line) + "'");
  }

  void entry(std::string_view line) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected 'key = value'");
    const auto keys = split_ws(line.substr(0, eq));
    const auto rhs = trim(line.substr(eq + 1));
    if (keys.empty()) fail("missing key");
    switch (current_) {
      case Section::top: top_entry(keys, rhs); break;
      case Section::source: source_entry(keys, rhs); break;
      case Section::station: station_entry(keys, rhs); break;
      case Section::joint: joint_entry(keys, rhs); break;
    }
  }

  void top_entry(const std::vector<std::string_view>& keys, std::string_view rhs) {
    if (keys.size() == 1 && keys[0] == "variant") {
      const auto v = variant_from_string(rhs);
      if (!v) fail("unknown variant '" + std::string(rhs) + "'");
      model_.variant = *v;
      has_variant_ = true;
      return;
    }
    fail("unknown key '" + std::string(keys[0]) + "'");
  }

  std::vector<std::string> atom_list(std::string_view rhs) {
    std::vector<std::string> atoms;
    for (auto w : split_ws(rhs)) atoms.emplace_back(w);
    if (atoms.empty()) fail("empty atom list");
    std::set<std::string> seen(atoms.begin(), atoms.end());
    if (seen.size() != atoms.size()) fail("duplicate atom in list");
    return atoms;
  }

  double probability(std::string_view rhs) {
    const auto p = parse_double(rhs);
    if (!p) fail("'" + std::string(rhs) + "' is not a number");
    return *p;
  }

  std::size_t find_atom(const std::vector<std::string>& atoms, std::string_view name,
                        const char* what) {
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      if (atoms[i] == name) return i;
    }
    fail(std::string("unknown ") + what + " atom '" + std::string(name) + "'");
  }

  void source_entry(const std::vector<std::string_view>& keys, std::string_view rhs) {
    auto& src = model_.source;
    if (keys.size() == 1 && keys[0] == "lambda1") {
      src.lambda1 = atom_list(rhs);
    } else if (keys.size() == 1 && keys[0] == "lambda2") {
      src.lambda2 = atom_list(rhs);
    } else if (keys.size() == 3 && keys[0] == "p") {
      const std::size_t i1 = find_atom(src.lambda1, keys[1], "lambda1");
      const std::size_t i2 = find_atom(src.lambda2, keys[2], "lambda2");
      src.support.push_back({i1, i2, probability(rhs)});
    } else {
      fail("unknown source entry");
    }
  }

  StationSetting& current_setting() {
    const auto& p = pending_.back();
    Station& st = p.station == 'A' ? model_.station_a : model_.station_b;
    return st.settings[p.index];
  }

  const std::vector<std::string>& source_atoms_for(char station) const {
    return station == 'A' ? model_.source.lambda1 : model_.source.lambda2;
  }

  void station_entry(const std::vector<std::string_view>& keys, std::string_view rhs) {
    auto& pend = pending_.back();
    auto& s = current_setting();
    if (keys.size() == 1 && keys[0] == "angle") {
      s.angle = probability(rhs);
    } else if (keys.size() == 1 && keys[0] == "instrument") {
      s.instrument.atoms = atom_list(rhs);
      s.instrument.probs.assign(s.instrument.atoms.size(), 0.0);
      pend.has_instrument = true;
    } else if (keys.size() == 2 && keys[0] == "p") {
      if (!pend.has_instrument) fail("probability before instrument atom list");
      s.instrument.probs[find_atom(s.instrument.atoms, keys[1], "instrument")] = probability(rhs);
    } else if (keys.size() == 3 && keys[0] == "response") {
      if (!pend.has_instrument) fail("response before instrument atom list");
      const std::size_t r = find_atom(source_atoms_for(pend.station), keys[1], "source");
      const std::size_t c = find_atom(s.instrument.atoms, keys[2], "instrument");
      const auto v = parse_long(rhs);
      const auto o = v ? outcome_from_int(*v) : std::nullopt;
      if (!o) fail("response value '" + std::string(rhs) + "' is not one of -1, 0, +1");
      if (!pend.responses.emplace(std::make_pair(r, c), *o).second) fail("response given twice");
    } else {
      fail("unknown station entry");
    }
  }

  void joint_entry(const std::vector<std::string_view>& keys, std::string_view rhs) {
    if (keys.size() != 3 || keys[0] != "p") fail("unknown joint entry");
    auto& joint = model_.joint_instruments.back();
    const auto ia = model_.station_a.index_of(joint.sp.x);
    const auto ib = model_.station_b.index_of(joint.sp.y);
    if (!ia || !ib) fail("joint section refers to a setting declared later or not at all");
    const std::size_t i = find_atom(model_.station_a.settings[*ia].instrument.atoms, keys[1],
                                    "station A instrument");
    const std::size_t j = find_atom(model_.station_b.settings[*ib].instrument.atoms, keys[2],
                                    "station B instrument");
    joint.support.push_back({i, j, probability(rhs)});
  }

  void finish() {
    if (!has_variant_) fail("missing 'variant'");
    if (model_.variant == Variant::quantum_ref) return;
    for (const auto& p : pending_) {
      Station& st = p.station == 'A' ? model_.station_a : model_.station_b;
      auto& s = st.settings[p.index];
      const std::size_t rows = source_atoms_for(p.station).size();
      const std::size_t cols = s.instrument.atoms.size();
      if (p.responses.size() != rows * cols) {
        throw ParseError(source_, line_,
                         std::string("station ") + p.station + " setting " +
                             std::to_string(s.label) + ": response table is incomplete");
      }
      s.response = ResponseTable(rows, cols);
      for (const auto& [key, o] : p.responses) s.response.at(key.first, key.second) = o;
    }
  }

  std::string source_;
  std::size_t line_ = 0;
  Section current_ = Section::top;
  bool has_variant_ = false;
  ExperimentModel model_;
  std::vector<PendingStation> pending_;
};

}  // namespace

ExperimentModel load_model(std::istream& in, const std::string& source_name) {
  return ModelParser(source_name).parse(in);
}

ExperimentModel load_model_string(const std::string& text) {
  std::istringstream in(text);
  return load_model(in);
}

ExperimentModel load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file '" + path.string() + "'");
  return load_model(in, path.string());
}

}  // namespace bellsim
