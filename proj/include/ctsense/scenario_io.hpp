#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "ctsense/hypothesis.hpp"
#include "ctsense/simulator.hpp"

namespace ctsense {

/// Scenario file problem. The message starts with the JSON pointer of the
/// offending key (e.g. "/controls/2/sigma") or the parser's line/column.
class ScenarioError : public ConfigError {
 public:
  ScenarioError(const std::string& where, const std::string& what)
      : ConfigError(where + ": " + what), where_(where) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

/// Parses a JSON scenario document:
///
///   {
///     "name": "...",
///     "controls": [{"family": "gaussian", "sigma": 1, "mean": 1}, ...],
///     "hypotheses": [{"cells": [
///        {"type": "box", "lo": [...], "hi": [...]},
///        {"type": "anomaly", "stream": 2, "side": "above" | "below" | "both"},
///        {"type": "order", "top": [1, 3]}]}, ...],
///     "truth": [...]
///   }
///
/// Box bounds and truth are natural parameters. Stream and top indices are
/// 1-based. "truth" may be omitted when every control carries a "mean"; if
/// both are present they must agree. An anomaly side of "both" (the default)
/// expands to the two half cells.
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);

/// Canonical JSON form: truth is always written, anomaly sides explicitly,
/// means never. parse_scenario(serialize_scenario(s)) == s.
std::string serialize_scenario(const Scenario& scenario);

}  // namespace ctsense
