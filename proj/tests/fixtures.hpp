#pragma once

#include "bellsim/core.hpp"

namespace fixtures {

// One source atom, one instrument atom, settings {1, 2}; A and B always
// answer with the given outcomes.
inline bellsim::ExperimentModel constant_model(bellsim::Outcome a, bellsim::Outcome b,
                                               bellsim::Variant v = bellsim::Variant::m1) {
  using namespace bellsim;
  ExperimentModel m;
  m.variant = v;
  m.source = {{"s"}, {"s"}, {{0, 0, 1.0}}};
  for (int label : {1, 2}) {
    m.station_a.settings.push_back({label, {{"i"}, {1.0}}, ResponseTable(1, 1, a), 0.0});
    m.station_b.settings.push_back({label, {{"i"}, {1.0}}, ResponseTable(1, 1, b), 0.0});
  }
  return m;
}

}  // namespace fixtures
