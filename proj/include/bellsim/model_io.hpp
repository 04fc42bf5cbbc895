#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "bellsim/core.hpp"

namespace bellsim {

// Plain-text model definition. Layout:
//
//   variant = M2
//   [source]
//   lambda1 = <atom> ...
//   lambda2 = <atom> ...
//   p <lambda1 atom> <lambda2 atom> = <prob>
//   [station A setting <label>]        (likewise station B)
//   angle = <radians>                   (QuantumRef only)
//   instrument = <atom> ...
//   p <instrument atom> = <prob>
//   response <source atom> <instrument atom> = -1 | 0 | +1
//   [joint <x> <y>]                     (M3 only)
//   p <A instrument atom> <B instrument atom> = <prob>
//
// '#' starts a comment. Atoms are whitespace-free tokens without '=', '#',
// '[' or ']'. Numbers are written in shortest round-trip form, so
// load_model(save_model(m)) == m.
void save_model(const ExperimentModel& model, std::ostream& out);
std::string save_model(const ExperimentModel& model);
void save_model_file(const ExperimentModel& model, const std::filesystem::path& path);

ExperimentModel load_model(std::istream& in, const std::string& source_name = "<model>");
ExperimentModel load_model_string(const std::string& text);
ExperimentModel load_model_file(const std::filesystem::path& path);

}  // namespace bellsim
