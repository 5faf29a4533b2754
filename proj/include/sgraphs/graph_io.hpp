#pragma once

#include <nlohmann/json_fwd.hpp>
#include <string>

#include "sgraphs/factor_graph.hpp"

namespace sgraphs {

/// JSON document with `variables` and `factors` arrays. Doubles are encoded
/// with shortest round-trip decimals, so export/import is bit-exact.
nlohmann::json graph_to_json(const FactorGraph& graph);
FactorGraph graph_from_json(const nlohmann::json& doc);

std::string graph_to_json_string(const FactorGraph& graph);
FactorGraph graph_from_json_string(const std::string& text);

}  // namespace sgraphs
