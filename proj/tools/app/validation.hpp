#pragma once

#include "epigen/analysis.hpp"

#include <json.hpp>

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace epigen::app
{

struct CriterionResult {
    int id = 0;
    std::string title;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
    std::vector<ComparisonReport> reports;
    /// extra lines printed under the summary (e.g. normalization discrepancies)
    std::vector<std::string> notes;
};

struct ValidationOptions {
    std::uint64_t seed = 20240601;
    /// criteria to run; empty means all
    std::vector<int> only;
    /// progress lines are written here when set
    std::ostream* progress = nullptr;
};

constexpr int criterion_count = 12;

std::vector<CriterionResult> run_validation(const ValidationOptions& options);

nlohmann::json validation_json(const std::vector<CriterionResult>& results);
void print_validation_table(std::ostream& out, const std::vector<CriterionResult>& results);
/// "criterion <id> PASS|FAIL: <title> | <detail>"
std::string summary_line(const CriterionResult& r);

} // namespace epigen::app
