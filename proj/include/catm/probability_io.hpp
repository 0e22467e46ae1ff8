#pragma once

#include <string>

#include "catm/observables.hpp"

namespace catm {

// CSV with header "t,P_0,...,P_{n-1},P_diss,norm", 12 significant digits, one row per record.
std::string format_probabilities(const ProbabilitySeries& series);
void emit_probabilities(const ProbabilitySeries& series, const std::string& path);
ProbabilitySeries parse_probabilities(const std::string& text);
ProbabilitySeries read_probabilities(const std::string& path);

// Throws when any value is non-finite or a probability is below -1e-12.
void validate_records(const ProbabilitySeries& series);

}  // namespace catm
