#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "bellsim/estimators.hpp"

namespace bellsim {

nlohmann::ordered_json to_json(const CorrelationSet& cs);
nlohmann::ordered_json to_json(const ChshReport& r);
nlohmann::ordered_json to_json(const NoSignallingReport& r);

// One analysis under one conditioning: correlations, CHSH and no-signalling.
struct Analysis {
  CorrelationSet correlations;
  ChshReport chsh;
  NoSignallingReport no_signalling;
};

Analysis analyze(const CorrelationSet& cs);

nlohmann::ordered_json to_json(const Analysis& a);

inline constexpr const char* kSummaryCsvHeader =
    "conditioning,x,y,n_raw,n_post,c_hat,e_ab,se_ab,e_a,se_a,e_b,se_b";

// Appends one row per setting pair (no header).
void write_summary_rows(const CorrelationSet& cs, std::ostream& out);

// Human-readable block used by the CLI; every number printed here is also in
// the JSON and CSV outputs.
std::string summary_text(const Analysis& a);

}  // namespace bellsim
