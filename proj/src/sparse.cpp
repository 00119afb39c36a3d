#include "dbini/sparse.hpp"

#include <algorithm>
#include <cmath>

namespace dbini {

SparseSpd SparseSpd::from_triplets(int n, std::vector<Triplet> triplets) {
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseSpd m;
    m.n = n;
    m.row_offsets.assign(n + 1, 0);
    m.col_indices.reserve(triplets.size());
    m.values.reserve(triplets.size());
    std::size_t i = 0;
    for (int r = 0; r < n; ++r) {
        while (i < triplets.size() && triplets[i].row == r) {
            const std::int32_t c = triplets[i].col;
            double v = 0.0;
            while (i < triplets.size() && triplets[i].row == r && triplets[i].col == c)
                v += triplets[i++].value;
            m.col_indices.push_back(c);
            m.values.push_back(v);
        }
        m.row_offsets[r + 1] = static_cast<std::int64_t>(m.col_indices.size());
    }
    if (i != triplets.size()) throw ShapeMismatch("from_triplets: row index out of range");
    return m;
}

void SparseSpd::matvec(const double* x, double* y) const {
    for (int r = 0; r < n; ++r) {
        double acc = 0.0;
        for (std::int64_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k)
            acc += values[k] * x[col_indices[k]];
        y[r] = acc;
    }
}

std::vector<double> SparseSpd::matvec(const std::vector<double>& x) const {
    std::vector<double> y(n);
    matvec(x.data(), y.data());
    return y;
}

std::vector<double> SparseSpd::diagonal() const {
    std::vector<double> d(n, 0.0);
    for (int r = 0; r < n; ++r)
        for (std::int64_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k)
            if (col_indices[k] == r) d[r] = values[k];
    return d;
}

double SparseSpd::entry(int r, int c) const {
    for (std::int64_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k)
        if (col_indices[k] == c) return values[k];
    return 0.0;
}

double SparseSpd::max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace dbini
