#pragma once

#include <string>
#include <string_view>

#include "dlqr/lyap_riccati.hpp"

namespace dlqr::cli {

struct LoadedProblem {
  std::string name;
  ProblemInstance problem;
  std::string hash;  // FNV-1a 64 of the canonical matrix text, hex
};

/// Parses a problem document with keys "A", "B", "Q", "R" (arrays of rows),
/// optional "C", "D" and "name". InputError names the offending key.
LoadedProblem parse_problem(std::string_view json_text, const std::string& default_name);

/// Built-in names "example1" and "scalar", otherwise a file path. An
/// unreadable file raises IoError.
LoadedProblem load_problem(const std::string& source);

/// A gain file: either {"K": [[...], ...]} or the bare nested array.
Matrix parse_gain(std::string_view json_text);

std::string problem_hash(const ProblemInstance& prob);

}  // namespace dlqr::cli
