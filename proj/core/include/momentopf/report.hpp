#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "momentopf/extraction.hpp"

namespace mopf {

// Deterministic 64-bit FNV-1a digest, lowercase hex.  Artifacts embed
// these as config/case hashes so identical inputs are recognizable.
std::string fnv1a_hex(std::string_view bytes);

// Full result document ("momentopf-result-1").  The originating full
// network is needed to label the recovered voltages with bus ids.
nlohmann::json result_to_json(const OPFResult& res, const NetworkCase& full_case);

// The same document with wall-clock fields removed (keys containing
// "seconds" or "time"); equal inputs must produce equal output here.
nlohmann::json without_timing(nlohmann::json j);

// iteration,upgraded_buses,objective,max_mismatch_MVA,min_eigenvalue_ratio,solver_seconds
std::string iterations_csv(const std::vector<IterationRecord>& recs);

// block,ratio with ratios sorted ascending (rank-condition profile).
std::string ratios_csv(std::vector<double> ratios);

std::string summary_text(const OPFResult& res);

// Comparison table over result documents, split into loss-minimization
// and cost-minimization sections.
std::string comparison_table(const std::vector<nlohmann::json>& results);

}  // namespace mopf
