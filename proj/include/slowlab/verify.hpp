#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "slowlab/harness.hpp"

namespace slowlab {

struct CriterionResult {
    int index = 0;
    std::string name;
    std::vector<Assertion> assertions;
    bool pass = false;
    double seconds = 0.0;
    std::string error;  // nonempty when the criterion aborted
};

/// Runs the full acceptance suite, printing one line per assertion
/// (assertion, observed, target, tolerance, verdict) and a per-criterion
/// summary to `os`. Artifacts land in out_dir.
std::vector<CriterionResult> run_acceptance(std::ostream& os, const std::string& out_dir,
                                            int threads, std::uint64_t master_seed);

int count_failures(const std::vector<CriterionResult>& results);

}  // namespace slowlab
