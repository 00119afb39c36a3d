#include "dbini/solver.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace dbini {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double nrm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

// Rewrites CSR values from a replayed triplet stream whose (row, col) sequence
// is identical to the one the pattern was built from.  Assembling once per
// outer iteration through this avoids re-sorting ~10 nnz per pixel every time.
struct PatternCache {
    std::vector<std::int64_t> slot;  // generation order -> index into values

    void build(const SparseSpd& lhs, const std::vector<Triplet>& trips) {
        slot.resize(trips.size());
        for (std::size_t t = 0; t < trips.size(); ++t) {
            const auto begin = lhs.col_indices.begin() + lhs.row_offsets[trips[t].row];
            const auto end = lhs.col_indices.begin() + lhs.row_offsets[trips[t].row + 1];
            const auto it = std::lower_bound(begin, end, trips[t].col);
            slot[t] = it - lhs.col_indices.begin();
        }
    }

    void refresh(SparseSpd& lhs, const std::vector<Triplet>& trips) const {
        std::fill(lhs.values.begin(), lhs.values.end(), 0.0);
        for (std::size_t t = 0; t < trips.size(); ++t)
            lhs.values[slot[t]] += trips[t].value;
    }
};

// Multi-source BFS: every prior pixel keeps its value, everything else in
// omega_n inherits the value of its nearest (grid-geodesic) prior pixel.
// Components without any prior pixel stay at zero.
std::vector<double> extend_prior(const std::vector<double>& prior,
                                 const std::vector<std::uint8_t>& m, const DomainMask& d) {
    std::vector<double> out(d.n(), 0.0);
    std::vector<std::uint8_t> seen(d.n(), 0);
    std::queue<int> frontier;
    for (int i = 0; i < d.n(); ++i)
        if (m[i]) {
            out[i] = prior[i];
            seen[i] = 1;
            frontier.push(i);
        }
    const int du[4] = {1, -1, 0, 0}, dv[4] = {0, 0, 1, -1};
    while (!frontier.empty()) {
        const int i = frontier.front();
        frontier.pop();
        const int p = d.index_to_pixel[i];
        const int u = p % d.shape.width, v = p / d.shape.width;
        for (int k = 0; k < 4; ++k) {
            if (!d.in_domain(u + du[k], v + dv[k])) continue;
            const int j = d.index_at(u + du[k], v + dv[k]);
            if (!seen[j]) {
                seen[j] = 1;
                out[j] = out[i];
                frontier.push(j);
            }
        }
    }
    return out;
}

// A diagonal entry can only be zero for an isolated pixel with no tangency
// row and no active regularizer; pin such unknowns to their warm-start value
// so the system stays definite and the result deterministic.
void pin_zero_diagonals(SparseSpd& lhs, std::vector<double>& rhs,
                        const std::vector<double>& x0,
                        const std::vector<std::int64_t>& diag_slots) {
    for (int i = 0; i < lhs.n; ++i) {
        if (lhs.values[diag_slots[i]] == 0.0) {
            lhs.values[diag_slots[i]] = 1.0;
            rhs[i] = x0[i];
        }
    }
}

std::vector<std::int64_t> locate_diagonal(const SparseSpd& lhs) {
    std::vector<std::int64_t> slots(lhs.n, -1);
    for (int r = 0; r < lhs.n; ++r) {
        const auto begin = lhs.col_indices.begin() + lhs.row_offsets[r];
        const auto end = lhs.col_indices.begin() + lhs.row_offsets[r + 1];
        const auto it = std::lower_bound(begin, end, r);
        if (it == end || *it != r)
            throw NotSpd("assembled matrix is missing a diagonal entry");
        slots[r] = it - lhs.col_indices.begin();
    }
    return slots;
}

}  // namespace

std::vector<double> pcg_solve(const SparseSpd& lhs, const std::vector<double>& rhs,
                              const std::vector<double>& x0, double tol, int max_iters,
                              CgReport* report) {
    const int n = lhs.n;
    if (rhs.size() != static_cast<std::size_t>(n) || x0.size() != static_cast<std::size_t>(n))
        throw ShapeMismatch("pcg_solve: vector length mismatch");

    const std::vector<double> diag = lhs.diagonal();
    for (int i = 0; i < n; ++i)
        if (!(diag[i] > 0.0)) throw NotSpd("pcg_solve: nonpositive diagonal entry");

    CgReport rep;
    const double bnorm = nrm2(rhs);
    if (bnorm == 0.0) {
        rep.converged = true;
        if (report) *report = rep;
        return std::vector<double>(n, 0.0);
    }

    std::vector<double> x = x0;
    std::vector<double> r(n), z(n), p(n), q(n);
    lhs.matvec(x.data(), r.data());
    for (int i = 0; i < n; ++i) r[i] = rhs[i] - r[i];  // r = b - Ax
    for (int i = 0; i < n; ++i) z[i] = r[i] / diag[i];  // z = P r
    p = z;
    double rho = dot(r, z);

    const double target = tol * bnorm;
    for (int it = 0; it < max_iters; ++it) {
        if (nrm2(r) <= target) {
            rep.converged = true;
            break;
        }
        lhs.matvec(p.data(), q.data());
        const double pq = dot(p, q);
        if (std::isnan(pq)) throw NumericalBreakdown("pcg_solve: NaN in the recurrence");
        if (pq < 0.0) throw NotSpd("pcg_solve: negative curvature direction");
        if (pq == 0.0) throw NumericalBreakdown("pcg_solve: stalled search direction");
        const double alpha = rho / pq;  // alpha = (r.z)/(p.Ap)
        for (int i = 0; i < n; ++i) x[i] += alpha * p[i];
        for (int i = 0; i < n; ++i) r[i] -= alpha * q[i];
        for (int i = 0; i < n; ++i) z[i] = r[i] / diag[i];
        const double rho_next = dot(r, z);
        const double beta = rho_next / rho;
        rho = rho_next;
        for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        rep.iterations = it + 1;
    }
    if (!rep.converged) rep.converged = nrm2(r) <= target;

    lhs.matvec(x.data(), q.data());
    for (int i = 0; i < n; ++i) q[i] = rhs[i] - q[i];
    rep.relative_residual = nrm2(q) / bnorm;
    for (double v : x)
        if (std::isnan(v)) throw NumericalBreakdown("pcg_solve: NaN in the solution");
    if (report) *report = rep;
    return x;
}

void subtract_component_means(std::vector<double>& v, const DomainMask& d) {
    std::vector<double> sum(d.component_count, 0.0);
    std::vector<int> count(d.component_count, 0);
    for (int i = 0; i < d.n(); ++i) {
        const int c = d.component_id[d.index_to_pixel[i]];
        sum[c] += v[i];
        ++count[c];
    }
    for (int i = 0; i < d.n(); ++i) {
        const int c = d.component_id[d.index_to_pixel[i]];
        v[i] -= sum[c] / count[c];
    }
}

DbiniSolution dbini_optimize(const DbiniProblem& problem, const Hyperparameters& hyper,
                             bool record_iterates) {
    const InnerSolve pcg = [&hyper](const JointSystem& sys, const std::vector<double>& x0,
                                    CgReport& rep) {
        return pcg_solve(sys.lhs, sys.rhs, x0, hyper.cg_tol, hyper.cg_max_iters, &rep);
    };
    return dbini_optimize_with(problem, hyper, pcg, record_iterates);
}

DbiniSolution dbini_optimize_with(const DbiniProblem& problem, const Hyperparameters& hyper,
                                  const InnerSolve& inner, bool record_iterates) {
    hyper.validate();
    const DomainMask& d = problem.domain;
    const int n = d.n();
    validate_normals(problem.normals_front, d);
    validate_normals(problem.normals_back, d);
    if (problem.prior_front.shape != d.shape || problem.prior_back.shape != d.shape)
        throw ShapeMismatch("dbini_optimize: prior/mask shape mismatch");

    const PriorDiagonal prior = prior_diagonal(d);
    if (hyper.lambda_d == 0.0 && !prior.any)
        throw GaugeDeficient("dbini_optimize: lambda_d = 0 and no prior pixel in omega_n");
    if (hyper.lambda_d > 0.0) {
        std::vector<std::uint8_t> covered(d.component_count, 0);
        for (int i = 0; i < n; ++i)
            if (prior.m[i]) covered[d.component_id[d.index_to_pixel[i]]] = 1;
        for (int c = 0; c < d.component_count; ++c)
            if (!covered[c])
                throw GaugeDeficient("dbini_optimize: connected component " +
                                     std::to_string(c) + " has no depth-prior pixel");
    }

    const BiniOperator opf = assemble_bini(problem.normals_front, d);
    const BiniOperator opb = assemble_bini(problem.normals_back, d);
    const std::vector<double> pf = vectorize(problem.prior_front, d);
    const std::vector<double> pb = vectorize(problem.prior_back, d);

    DbiniSolution sol;
    // With the checks above the only surviving rank-deficient case is
    // lambda_d = 0 with priors present: the warm start fixes the offsets, the
    // quadratic form does not.
    sol.gauge_warning = hyper.lambda_d == 0.0;
    sol.zf = extend_prior(pf, prior.m, d);
    sol.zb = extend_prior(pb, prior.m, d);

    std::vector<double> wf = bilateral_weights(opf, sol.zf, hyper.k);
    std::vector<double> wb = bilateral_weights(opb, sol.zb, hyper.k);
    double energy_prev =
        joint_energy(opf, opb, wf, wb, sol.zf, sol.zb, pf, pb, d, hyper).total();

    JointSystem sys;
    PatternCache cache;
    std::vector<std::int64_t> diag_slots;
    std::vector<Triplet> trips;
    const auto sil = silhouette_diagonal(d);

    for (int outer = 0; outer < hyper.max_outer_iters; ++outer) {
        trips.clear();
        std::vector<double> rhs(2 * n, 0.0);
        // every unknown gets a diagonal slot even when nothing couples it
        for (int i = 0; i < 2 * n; ++i) trips.push_back({i, i, 0.0});
        assemble_normal_block(opf, wf, trips, rhs, 0);
        assemble_normal_block(opb, wb, trips, rhs, n);
        if (hyper.lambda_d > 0.0) {
            for (int i = 0; i < n; ++i) {
                if (!prior.m[i]) continue;
                trips.push_back({i, i, hyper.lambda_d});
                trips.push_back({n + i, n + i, hyper.lambda_d});
                rhs[i] += hyper.lambda_d * pf[i];
                rhs[n + i] += hyper.lambda_d * pb[i];
            }
        }
        if (hyper.lambda_s > 0.0) {
            for (int i = 0; i < n; ++i) {
                if (!sil[i]) continue;
                trips.push_back({i, i, hyper.lambda_s});
                trips.push_back({n + i, n + i, hyper.lambda_s});
                trips.push_back({i, n + i, -hyper.lambda_s});
                trips.push_back({n + i, i, -hyper.lambda_s});
            }
        }
        if (outer == 0) {
            sys.lhs = SparseSpd::from_triplets(2 * n, trips);
            sys.n_per_sheet = n;
            sys.gauge_warning = sol.gauge_warning;
            cache.build(sys.lhs, trips);
            diag_slots = locate_diagonal(sys.lhs);
        } else {
            cache.refresh(sys.lhs, trips);
        }

        std::vector<double> x0(sol.zf);
        x0.insert(x0.end(), sol.zb.begin(), sol.zb.end());
        pin_zero_diagonals(sys.lhs, rhs, x0, diag_slots);
        sys.rhs = std::move(rhs);

        OuterIteration rec;
        rec.frozen_energy_before =
            joint_energy(opf, opb, wf, wb, sol.zf, sol.zb, pf, pb, d, hyper).total();
        std::vector<double> x = inner(sys, x0, rec.cg);
        std::copy(x.begin(), x.begin() + n, sol.zf.begin());
        std::copy(x.begin() + n, x.end(), sol.zb.begin());
        rec.frozen_energy_after =
            joint_energy(opf, opb, wf, wb, sol.zf, sol.zb, pf, pb, d, hyper).total();

        wf = bilateral_weights(opf, sol.zf, hyper.k);
        wb = bilateral_weights(opb, sol.zb, hyper.k);
        rec.energy = joint_energy(opf, opb, wf, wb, sol.zf, sol.zb, pf, pb, d, hyper).total();
        sol.trace.push_back(rec);
        if (record_iterates) {
            sol.iterates_f.push_back(sol.zf);
            sol.iterates_b.push_back(sol.zb);
        }
        sol.outer_iterations = outer + 1;

        const double denom = std::max(energy_prev, 1e-12);
        if (std::abs(rec.energy - energy_prev) / denom < hyper.energy_rel_tol) {
            sol.converged = true;
            break;
        }
        energy_prev = rec.energy;
    }
    return sol;
}

BiniSolution bini_optimize(const VectorField2D& normals, const DomainMask& d,
                           const Hyperparameters& hyper, Anchor anchor) {
    hyper.validate();
    if (anchor == Anchor::none)
        throw GaugeDeficient("bini_optimize: an anchor is required (the normal term "
                             "leaves every component offset free)");
    validate_normals(normals, d);
    const int n = d.n();
    const BiniOperator op = assemble_bini(normals, d);

    BiniSolution sol;
    sol.z.assign(n, 0.0);
    std::vector<double> w = bilateral_weights(op, sol.z, hyper.k);
    double energy_prev = single_sheet_energy(op, w, sol.z);

    SparseSpd lhs;
    PatternCache cache;
    std::vector<std::int64_t> diag_slots;
    std::vector<Triplet> trips;

    for (int outer = 0; outer < hyper.max_outer_iters; ++outer) {
        trips.clear();
        std::vector<double> rhs(n, 0.0);
        for (int i = 0; i < n; ++i) trips.push_back({i, i, 0.0});
        assemble_normal_block(op, w, trips, rhs, 0);
        if (outer == 0) {
            lhs = SparseSpd::from_triplets(n, trips);
            cache.build(lhs, trips);
            diag_slots = locate_diagonal(lhs);
        } else {
            cache.refresh(lhs, trips);
        }
        pin_zero_diagonals(lhs, rhs, sol.z, diag_slots);

        OuterIteration rec;
        rec.frozen_energy_before = single_sheet_energy(op, w, sol.z);
        sol.z = pcg_solve(lhs, rhs, sol.z, hyper.cg_tol, hyper.cg_max_iters, &rec.cg);
        subtract_component_means(sol.z, d);  // energy is shift-invariant
        rec.frozen_energy_after = single_sheet_energy(op, w, sol.z);

        w = bilateral_weights(op, sol.z, hyper.k);
        rec.energy = single_sheet_energy(op, w, sol.z);
        sol.trace.push_back(rec);
        sol.outer_iterations = outer + 1;

        const double denom = std::max(energy_prev, 1e-12);
        if (std::abs(rec.energy - energy_prev) / denom < hyper.energy_rel_tol) {
            sol.converged = true;
            break;
        }
        energy_prev = rec.energy;
    }
    return sol;
}

}  // namespace dbini
