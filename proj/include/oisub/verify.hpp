#pragma once

#include "oisub/pipeline.hpp"

namespace oisub {

/// Outcome of one acceptance check. Gated checks that cannot run because the
/// trained model missed its accuracy bar report `skipped`.
struct CheckResult {
    int id = 0;
    std::string name;
    enum class Status { pass, fail, skipped } status = Status::fail;
    std::string detail;  // observed vs required values
};

/// Run the full acceptance suite. Checks 1-7 are self-contained; check 8
/// trains (or reuses) the default pipeline under work_dir and gates 9-13.
/// golden_dir must hold the rendered-template reference files.
std::vector<CheckResult> run_acceptance(const std::string& golden_dir,
                                        const std::string& work_dir);

/// Print one line per check; returns the count of failed (not skipped) checks.
int print_results(const std::vector<CheckResult>& results, std::ostream& os);

}  // namespace oisub
