#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace djcm {

struct GradCheckRow {
    std::string node;
    int cases = 0;
    double max_rel_err = 0.0;
    std::string worst_case;  // human-readable description of the worst case
    // STE rows are reported but not gated: their gradient is biased on purpose.
    bool gated = true;
    bool passed = true;
};

struct GradCheckReport {
    double threshold = 1e-5;
    std::vector<GradCheckRow> rows;

    bool passed() const;
    // Columns: node,cases,max_rel_err,gated,passed,worst_case
    std::string csv() const;
};

/// AD vs central differences over `cases` random inputs per node type, plus
/// the full relaxed chain with frozen noise.
GradCheckReport run_gradcheck_suite(std::uint64_t seed = 1, int cases = 100, double threshold = 1e-5);

}  // namespace djcm
