#pragma once

#include <cstdint>
#include <vector>

#include "dbini/errors.hpp"

namespace dbini {

struct Triplet {
    std::int32_t row = 0;
    std::int32_t col = 0;
    double value = 0.0;
};

// CSR storage for the symmetric positive (semi-)definite systems assembled
// here.  Construction sums duplicate entries in a deterministic order; the
// strict SPD requirements (positive diagonal) are enforced where the solver
// needs them, not at construction, so that gauge-deficient matrices can still
// be built and inspected.
struct SparseSpd {
    int n = 0;
    std::vector<std::int64_t> row_offsets;  // n + 1
    std::vector<std::int32_t> col_indices;  // sorted within each row
    std::vector<double> values;

    static SparseSpd from_triplets(int n, std::vector<Triplet> triplets);

    // y = A x
    void matvec(const double* x, double* y) const;
    std::vector<double> matvec(const std::vector<double>& x) const;

    std::vector<double> diagonal() const;  // missing entries read as 0
    double entry(int r, int c) const;      // 0 when absent
    double max_abs() const;
    std::int64_t nonzeros() const { return static_cast<std::int64_t>(values.size()); }
};

}  // namespace dbini
