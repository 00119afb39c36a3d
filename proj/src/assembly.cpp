#include "dbini/assembly.hpp"

#include <cmath>
#include <ostream>

namespace dbini {

namespace {

// direction order [u+, u-, v+, v-]; sign of the center coefficient
const int kDirU[4] = {1, -1, 0, 0};
const int kDirV[4] = {0, 0, 1, -1};
const double kCenterSign[4] = {-1.0, 1.0, -1.0, 1.0};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

BiniOperator assemble_bini(const VectorField2D& normals, const DomainMask& domain) {
    if (normals.shape != domain.shape)
        throw ShapeMismatch("assemble_bini: normals/mask shape mismatch");
    BiniOperator op;
    op.n = domain.n();
    op.row_valid.assign(op.rows(), 0);
    op.neighbor.assign(op.rows(), -1);
    op.a_center.assign(op.rows(), 0.0);
    op.a_neighbor.assign(op.rows(), 0.0);
    op.rhs.assign(op.rows(), 0.0);

    const double inv_pitch = 1.0 / domain.shape.pitch;
    for (int i = 0; i < op.n; ++i) {
        const int p = domain.index_to_pixel[i];
        const int u = p % domain.shape.width, v = p / domain.shape.width;
        const Vec3& nrm = normals.values[p];
        const double c = nrm.z * inv_pitch;
        for (int d = 0; d < 4; ++d) {
            const int uu = u + kDirU[d], vv = v + kDirV[d];
            if (!domain.in_domain(uu, vv)) continue;
            const int row = 4 * i + d;
            op.row_valid[row] = 1;
            op.neighbor[row] = domain.index_at(uu, vv);
            op.a_center[row] = kCenterSign[d] * c;
            op.a_neighbor[row] = -kCenterSign[d] * c;
            op.rhs[row] = (d < 2) ? -nrm.x : -nrm.y;
        }
    }
    return op;
}

std::vector<double> bini_residual(const BiniOperator& op, const std::vector<double>& z) {
    if (z.size() != static_cast<std::size_t>(op.n))
        throw ShapeMismatch("bini_residual: depth vector length mismatch");
    std::vector<double> r(op.rows(), 0.0);
    for (int row = 0; row < op.rows(); ++row) {
        if (!op.row_valid[row]) continue;
        r[row] = op.a_center[row] * z[op.center_of(row)] +
                 op.a_neighbor[row] * z[op.neighbor[row]] - op.rhs[row];
    }
    return r;
}

std::vector<double> bilateral_weights(const BiniOperator& op, const std::vector<double>& z,
                                      double k) {
    if (z.size() != static_cast<std::size_t>(op.n))
        throw ShapeMismatch("bilateral_weights: depth vector length mismatch");
    std::vector<double> w(op.rows(), 0.0);
    for (int i = 0; i < op.n; ++i) {
        for (int axis = 0; axis < 2; ++axis) {
            const int plus = 4 * i + 2 * axis;      // u+ or v+
            const int minus = plus + 1;             // u- or v-
            const bool has_plus = op.row_valid[plus] != 0;
            const bool has_minus = op.row_valid[minus] != 0;
            if (has_plus && has_minus) {
                const double dp = z[op.neighbor[plus]] - z[i];
                const double dm = z[i] - z[op.neighbor[minus]];
                const double wp = sigmoid(k * (dm * dm - dp * dp));
                w[plus] = wp;
                w[minus] = 1.0 - wp;
            } else if (has_plus) {
                w[plus] = 1.0;
            } else if (has_minus) {
                w[minus] = 1.0;
            }
        }
    }
    return w;
}

PriorDiagonal prior_diagonal(const DomainMask& domain) {
    PriorDiagonal d;
    d.m.assign(domain.n(), 0);
    for (int i = 0; i < domain.n(); ++i) {
        const int p = domain.index_to_pixel[i];
        if (domain.omega_z[p]) {
            d.m[i] = 1;
            d.any = true;
        }
    }
    return d;
}

std::vector<std::uint8_t> silhouette_diagonal(const DomainMask& domain) {
    std::vector<std::uint8_t> s(domain.n(), 0);
    for (int i = 0; i < domain.n(); ++i)
        s[i] = domain.boundary[domain.index_to_pixel[i]];
    return s;
}

void Hyperparameters::validate() const {
    if (lambda_d < 0.0 || lambda_s < 0.0) throw Error("hyperparameters: lambdas must be >= 0");
    if (!(k > 0.0)) throw Error("hyperparameters: k must be positive");
    if (max_outer_iters < 1 || cg_max_iters < 1)
        throw Error("hyperparameters: iteration limits must be >= 1");
    if (!(energy_rel_tol > 0.0) || !(cg_tol > 0.0))
        throw Error("hyperparameters: tolerances must be positive");
}

void assemble_normal_block(const BiniOperator& op, const std::vector<double>& w,
                           std::vector<Triplet>& triplets, std::vector<double>& rhs,
                           int off) {
    if (w.size() != static_cast<std::size_t>(op.rows()))
        throw ShapeMismatch("assemble_normal_block: weight vector length mismatch");
    for (int row = 0; row < op.rows(); ++row) {
        if (!op.row_valid[row]) continue;
        // zero-weight rows still emit (zero-valued) entries so the sparsity
        // pattern is a function of the domain alone, not of the weights
        const double wr = w[row];
        const int i = op.center_of(row), j = op.neighbor[row];
        const double ai = op.a_center[row], aj = op.a_neighbor[row];
        triplets.push_back({off + i, off + i, wr * ai * ai});
        triplets.push_back({off + i, off + j, wr * ai * aj});
        triplets.push_back({off + j, off + i, wr * aj * ai});
        triplets.push_back({off + j, off + j, wr * aj * aj});
        const double wb = wr * op.rhs[row];
        rhs[off + i] += ai * wb;
        rhs[off + j] += aj * wb;
    }
}

JointSystem assemble_joint_system(const BiniOperator& op_f, const BiniOperator& op_b,
                                  const std::vector<double>& w_f,
                                  const std::vector<double>& w_b,
                                  const std::vector<double>& prior_f,
                                  const std::vector<double>& prior_b,
                                  const DomainMask& domain, const Hyperparameters& hyper) {
    hyper.validate();
    const int n = domain.n();
    if (op_f.n != n || op_b.n != n)
        throw ShapeMismatch("assemble_joint_system: operator/domain size mismatch");
    if (prior_f.size() != static_cast<std::size_t>(n) ||
        prior_b.size() != static_cast<std::size_t>(n))
        throw ShapeMismatch("assemble_joint_system: prior vector length mismatch");

    JointSystem sys;
    sys.n_per_sheet = n;
    sys.rhs.assign(2 * n, 0.0);

    std::vector<Triplet> triplets;
    triplets.reserve(static_cast<std::size_t>(op_f.rows()) * 2 + 6 * n);
    assemble_normal_block(op_f, w_f, triplets, sys.rhs, 0);
    assemble_normal_block(op_b, w_b, triplets, sys.rhs, n);

    const PriorDiagonal prior = prior_diagonal(domain);
    // No unknown gets an absolute anchor unless lambda_d couples some pixel
    // to its prior; flag the rank deficiency rather than failing here.
    sys.gauge_warning = !prior.any || hyper.lambda_d == 0.0;
    if (hyper.lambda_d > 0.0) {
        for (int i = 0; i < n; ++i) {
            if (!prior.m[i]) continue;
            triplets.push_back({i, i, hyper.lambda_d});
            triplets.push_back({n + i, n + i, hyper.lambda_d});
            sys.rhs[i] += hyper.lambda_d * prior_f[i];
            sys.rhs[n + i] += hyper.lambda_d * prior_b[i];
        }
    }
    if (hyper.lambda_s > 0.0) {
        const auto sil = silhouette_diagonal(domain);
        for (int i = 0; i < n; ++i) {
            if (!sil[i]) continue;
            triplets.push_back({i, i, hyper.lambda_s});
            triplets.push_back({n + i, n + i, hyper.lambda_s});
            triplets.push_back({i, n + i, -hyper.lambda_s});
            triplets.push_back({n + i, i, -hyper.lambda_s});
        }
    }
    sys.lhs = SparseSpd::from_triplets(2 * n, std::move(triplets));
    return sys;
}

void JointSystem::write_triplets(std::ostream& out) const {
    for (int r = 0; r < lhs.n; ++r)
        for (std::int64_t k = lhs.row_offsets[r]; k < lhs.row_offsets[r + 1]; ++k) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "%d %d %.17g\n", r, lhs.col_indices[k],
                          lhs.values[k]);
            out << buf;
        }
}

EnergyBreakdown joint_energy(const BiniOperator& op_f, const BiniOperator& op_b,
                             const std::vector<double>& w_f, const std::vector<double>& w_b,
                             const std::vector<double>& zf, const std::vector<double>& zb,
                             const std::vector<double>& prior_f,
                             const std::vector<double>& prior_b, const DomainMask& domain,
                             const Hyperparameters& hyper) {
    EnergyBreakdown e;
    e.bini_front = single_sheet_energy(op_f, w_f, zf);
    e.bini_back = single_sheet_energy(op_b, w_b, zb);
    const PriorDiagonal prior = prior_diagonal(domain);
    for (int i = 0; i < domain.n(); ++i) {
        if (!prior.m[i]) continue;
        const double df = zf[i] - prior_f[i];
        const double db = zb[i] - prior_b[i];
        e.prior_front += hyper.lambda_d * df * df;
        e.prior_back += hyper.lambda_d * db * db;
    }
    const auto sil = silhouette_diagonal(domain);
    for (int i = 0; i < domain.n(); ++i) {
        if (!sil[i]) continue;
        const double g = zf[i] - zb[i];
        e.silhouette += hyper.lambda_s * g * g;
    }
    return e;
}

double single_sheet_energy(const BiniOperator& op, const std::vector<double>& w,
                           const std::vector<double>& z) {
    const auto r = bini_residual(op, z);
    double e = 0.0;
    for (int row = 0; row < op.rows(); ++row) e += w[row] * r[row] * r[row];
    return e;
}

}  // namespace dbini
