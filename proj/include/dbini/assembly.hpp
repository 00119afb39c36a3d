#pragma once

#include "dbini/field.hpp"
#include "dbini/sparse.hpp"

namespace dbini {

// One-sided tangency rows relating depth differences to the normal field:
//   u+ : n_z (z(u+1,v) - z(u,v)) / pitch + n_x
//   u- : n_z (z(u,v) - z(u-1,v)) / pitch + n_x
//   v+ : n_z (z(u,v+1) - z(u,v)) / pitch + n_y
//   v- : n_z (z(u,v) - z(u,v-1)) / pitch + n_y
// Four rows per in-domain pixel, in that order; rows whose neighbor leaves
// omega_n are invalid and contribute nothing.  As a linear system the rows
// read  a_center z_i + a_neighbor z_j = rhs.
struct BiniOperator {
    int n = 0;  // columns = |omega_n|
    std::vector<std::uint8_t> row_valid;    // 4n
    std::vector<std::int32_t> neighbor;     // 4n, packed index of the coupled pixel, -1 if none
    std::vector<double> a_center;           // 4n
    std::vector<double> a_neighbor;         // 4n
    std::vector<double> rhs;                // 4n, -n_x or -n_y

    int rows() const { return 4 * n; }
    int center_of(int row) const { return row / 4; }
};

BiniOperator assemble_bini(const VectorField2D& normals, const DomainMask& domain);

// r = A z - b, zero on invalid rows.
std::vector<double> bini_residual(const BiniOperator& op, const std::vector<double>& z);

// One bilateral weight per tangency row.  For a direction where both one-sided
// rows exist, the forward weight is sigmoid(k * (delta_minus^2 - delta_plus^2))
// with delta_plus / delta_minus the one-sided depth differences of the current
// iterate (scene units); the backward weight is its complement.  A lone valid
// row gets weight 1, invalid rows get 0.  A constant iterate therefore yields
// the neutral 0.5 everywhere.
std::vector<double> bilateral_weights(const BiniOperator& op, const std::vector<double>& z,
                                      double k);

// Diagonal of the depth-prior selector: 1 where the pixel lies in
// omega_n intersect omega_z.  `any` reports whether the intersection is
// non-empty; an all-zero diagonal leaves the system gauge-deficient.
struct PriorDiagonal {
    std::vector<std::uint8_t> m;  // per packed index
    bool any = false;
};
PriorDiagonal prior_diagonal(const DomainMask& domain);

// Diagonal of the silhouette selector: 1 on boundary pixels of omega_n.
std::vector<std::uint8_t> silhouette_diagonal(const DomainMask& domain);

struct Hyperparameters {
    double lambda_d = 1e-4;
    double lambda_s = 1e-6;
    double k = 2.0;
    int max_outer_iters = 150;
    double energy_rel_tol = 1e-6;
    double cg_tol = 1e-9;  // relative to the right-hand side norm
    int cg_max_iters = 5000;

    void validate() const;
};

// Normal equations of the stacked front/back problem at frozen weights.
// Unknown layout: [front(0..n-1), back(n..2n-1)].
//   lhs = blockdiag(Af' Wf Af, Ab' Wb Ab) + lambda_d diag(m, m)
//         + lambda_s [[S, -S], [-S, S]]
//   rhs = [Af' Wf bf + lambda_d m .* prior_f,  Ab' Wb bb + lambda_d m .* prior_b]
// Prior values are only read where m = 1, so NaN outside the prior mask is fine.
struct JointSystem {
    SparseSpd lhs;
    std::vector<double> rhs;
    int n_per_sheet = 0;
    bool gauge_warning = false;  // set when no prior pixel pins the depth scale

    // text triplet dump (row col value per line) for offline checking
    void write_triplets(std::ostream& out) const;
};

JointSystem assemble_joint_system(const BiniOperator& op_f, const BiniOperator& op_b,
                                  const std::vector<double>& w_f,
                                  const std::vector<double>& w_b,
                                  const std::vector<double>& prior_f,
                                  const std::vector<double>& prior_b,
                                  const DomainMask& domain, const Hyperparameters& hyper);

// Single-sheet normal matrix A' W A and right-hand side A' W b (the lambda = 0
// building block; its null space is one constant per connected component).
void assemble_normal_block(const BiniOperator& op, const std::vector<double>& w,
                           std::vector<Triplet>& triplets, std::vector<double>& rhs,
                           int row_col_offset);

struct EnergyBreakdown {
    double bini_front = 0.0;
    double bini_back = 0.0;
    double prior_front = 0.0;
    double prior_back = 0.0;
    double silhouette = 0.0;
    double total() const {
        return bini_front + bini_back + prior_front + prior_back + silhouette;
    }
};

// Objective value at frozen weights:
//   sum_r w_r (A z - b)_r^2  (both sheets)
// + lambda_d sum_{m} ((zf - prior_f)^2 + (zb - prior_b)^2)
// + lambda_s sum_{boundary} (zf - zb)^2
EnergyBreakdown joint_energy(const BiniOperator& op_f, const BiniOperator& op_b,
                             const std::vector<double>& w_f, const std::vector<double>& w_b,
                             const std::vector<double>& zf, const std::vector<double>& zb,
                             const std::vector<double>& prior_f,
                             const std::vector<double>& prior_b, const DomainMask& domain,
                             const Hyperparameters& hyper);

// Weighted residual energy of one sheet alone (the BiNI objective).
double single_sheet_energy(const BiniOperator& op, const std::vector<double>& w,
                           const std::vector<double>& z);

}  // namespace dbini
