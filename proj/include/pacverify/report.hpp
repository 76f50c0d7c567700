#ifndef PACVERIFY_REPORT_HPP
#define PACVERIFY_REPORT_HPP

#include <filesystem>
#include <string>

#include <json.hpp>

#include "pacverify/analyzer.hpp"

namespace pacverify {

using Json = nlohmann::json;

// Sorted keys, no whitespace, floats with 17 significant digits, non-finite
// numbers as null. Identical inputs give identical bytes.
std::string canonical_json(const Json& value);

// Writes canonical_json(report) plus a newline. Throws Error on I/O failure.
void emit_report(const Json& report, const std::filesystem::path& path);

Json vector_json(const Eigen::VectorXd& v);
Json provenance_json(const Provenance& p);
// Task-independent parts of a verdict report: verdict, margin, components,
// candidates, flags, queries, provenance.
Json robustness_json(const PipelineResult& result, bool include_coefficients = false);

}  // namespace pacverify

#endif  // PACVERIFY_REPORT_HPP
