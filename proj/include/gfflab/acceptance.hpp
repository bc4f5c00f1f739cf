#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gfflab {

// One verdict line of the acceptance suite. Status is PASS, FAIL, or
// DOCUMENTED (for scale regimes that are out of reach on desk hardware and
// are recorded rather than simulated).
struct CriterionResult {
    int id = 0;
    std::string name;
    std::string status;
    std::string detail;
    double wall_s = 0.0;
};

struct AcceptanceReport {
    std::vector<CriterionResult> results;
    std::uint64_t master_seed = 0;
    int workers = 1;
    bool all_ok = true; // true when no criterion reports FAIL
    double wall_s = 0.0;
};

// Selector grammar: "fast" (the sub-minute criteria 1, 2, 8), "full"
// (1..12), or a comma-separated id list ("3,4,11"; an "ac-" prefix per
// entry is accepted).
std::vector<int> acceptance_selection(const std::string& selector);

// Runs the selected criteria with the shared master seed, printing one
// verdict line per criterion as it completes.
AcceptanceReport run_acceptance(const std::vector<int>& ids, std::uint64_t seed, int workers);

std::string acceptance_report_json(const AcceptanceReport& report);

} // namespace gfflab
