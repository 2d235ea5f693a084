#pragma once

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fixpoint/calculus.hpp"
#include "fixpoint/picard.hpp"

namespace fixpoint {

/// Shortest decimal text that round-trips to the same double.
std::string format_number(double x);

/// `iter,step_norm,residual,apriori_bound,aposteriori_bound,actual_error`.
/// Bound columns come from `bounds` when given, otherwise they stay empty.
/// When bounds are given the CSV has one row per iterate u_0 ... u_n and the
/// last row has empty step/residual fields.
std::string trace_csv(const IterationTrace& trace,
                      const std::vector<BanachBoundRecord>* bounds = nullptr);

nlohmann::json to_json(const LipschitzEstimate& est);
nlohmann::json to_json(const GnnLipschitzReport& report);

/// Write through a temporary file in the same directory, then rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// Serialize JSON with a trailing newline; number formatting is fixed so the
/// output is byte-stable.
std::string dump_json(const nlohmann::json& j);

}  // namespace fixpoint
