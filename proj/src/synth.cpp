#include "dbini/synth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace dbini {

namespace {

constexpr double kPi = 3.14159265358979323846;

double get(const std::map<std::string, double>& params, const std::string& key) {
    const auto it = params.find(key);
    if (it == params.end()) throw Error("scene parameter missing: " + key);
    return it->second;
}

// Both helpers scale the surface gradient so its z-component becomes +/-1,
// which is exactly the tangency-consistent orientation for each sheet.
Vec3 front_normal(const Vec3& g) { return (g * (1.0 / g.z)).normalized(); }
Vec3 back_normal(const Vec3& g) { return (g * (-1.0 / g.z)).normalized(); }

struct Hit {
    bool ok = false;
    double zf = 0.0, zb = 0.0;
    Vec3 nf, nb;
};

Hit sphere_hit(double x, double y, double cx, double cy, double cz, double r,
               double margin) {
    const double dx = x - cx, dy = y - cy;
    const double q = r * r - dx * dx - dy * dy;
    if (q <= 0.0) return {};
    const double s = std::sqrt(q);
    Hit h;
    h.nf = front_normal({dx, dy, -s});
    if (h.nf.z < margin) return {};
    h.ok = true;
    h.zf = cz - s;
    h.zb = cz + s;
    h.nb = back_normal({dx, dy, s});
    return h;
}

Hit probe(const SceneSpec& spec, double x, double y, int u, int v) {
    const auto& p = spec.params;
    const double margin = spec.nz_margin;
    const GridShape& g = spec.grid;
    // Slab kinds are inset one pixel so every scene keeps a real silhouette
    // ring away from the image frame.
    const bool inset_ok = u >= 1 && u < g.width - 1 && v >= 1 && v < g.height - 1;

    if (spec.kind == "sphere")
        return sphere_hit(x, y, get(p, "cx"), get(p, "cy"), get(p, "cz"), get(p, "r"),
                          margin);

    if (spec.kind == "ellipsoid") {
        const double dx = x - get(p, "cx"), dy = y - get(p, "cy");
        const double rx = get(p, "rx"), ry = get(p, "ry"), rz = get(p, "rz");
        const double q = 1.0 - (dx / rx) * (dx / rx) - (dy / ry) * (dy / ry);
        if (q <= 0.0) return {};
        const double w = std::sqrt(q);
        Hit h;
        h.nf = front_normal({dx / (rx * rx), dy / (ry * ry), -w / rz});
        if (h.nf.z < margin) return {};
        h.ok = true;
        h.zf = get(p, "cz") - rz * w;
        h.zb = get(p, "cz") + rz * w;
        h.nb = back_normal({dx / (rx * rx), dy / (ry * ry), w / rz});
        return h;
    }

    if (spec.kind == "capsule") {
        const double x0 = get(p, "x0"), y0 = get(p, "y0");
        const double lx = get(p, "x1") - x0, ly = get(p, "y1") - y0;
        const double len2 = lx * lx + ly * ly;
        double t = len2 > 0.0 ? ((x - x0) * lx + (y - y0) * ly) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        return sphere_hit(x, y, x0 + t * lx, y0 + t * ly, get(p, "cz"), get(p, "r"),
                          margin);
    }

    if (spec.kind == "torus") {
        const double dx = x - get(p, "cx"), dy = y - get(p, "cy");
        const double R = get(p, "major_r"), r = get(p, "minor_r");
        const double rho = std::sqrt(dx * dx + dy * dy);
        if (rho == 0.0) return {};
        const double w = rho - R;
        const double q = r * r - w * w;
        if (q <= 0.0) return {};
        const double s = std::sqrt(q);
        Hit h;
        h.nf = front_normal({w * dx / rho, w * dy / rho, -s});
        if (h.nf.z < margin) return {};
        h.ok = true;
        h.zf = get(p, "cz") - s;
        h.zb = get(p, "cz") + s;
        h.nb = back_normal({w * dx / rho, w * dy / rho, s});
        return h;
    }

    if (spec.kind == "two_spheres_occluding") {
        const Hit a = sphere_hit(x, y, get(p, "ax"), get(p, "ay"), get(p, "az"),
                                 get(p, "ar"), margin);
        const Hit b = sphere_hit(x, y, get(p, "bx"), get(p, "by"), get(p, "bz"),
                                 get(p, "br"), margin);
        if (!a.ok) return b;
        if (!b.ok) return a;
        // union of the two z-intervals: outermost hits and their owners
        Hit h;
        h.ok = true;
        h.zf = std::min(a.zf, b.zf);
        h.nf = a.zf <= b.zf ? a.nf : b.nf;
        h.zb = std::max(a.zb, b.zb);
        h.nb = a.zb >= b.zb ? a.nb : b.nb;
        return h;
    }

    if (spec.kind == "tilted_plane") {
        if (!inset_ok) return {};
        const double sx = get(p, "sx"), sy = get(p, "sy");
        Hit h;
        h.ok = true;
        h.zf = get(p, "z0") + sx * x + sy * y;
        h.zb = h.zf + get(p, "thickness");
        h.nf = Vec3{-sx, -sy, 1.0}.normalized();
        h.nb = Vec3{sx, sy, -1.0}.normalized();
        if (h.nf.z < margin)
            throw Error("tilted_plane: slope too steep for the nz margin");
        return h;
    }

    if (spec.kind == "step_relief") {
        if (!inset_ok) return {};
        const bool raised = u >= get(p, "u0") && u < get(p, "u1") &&
                            v >= get(p, "v0") && v < get(p, "v1");
        Hit h;
        h.ok = true;
        h.zf = get(p, "z0") - (raised ? get(p, "step_h") : 0.0);
        h.zb = get(p, "z0") + get(p, "thickness");
        h.nf = {0.0, 0.0, 1.0};
        h.nb = {0.0, 0.0, -1.0};
        return h;
    }

    throw Error("unknown scene kind: " + spec.kind);
}

bool is_slab(const std::string& kind) {
    return kind == "tilted_plane" || kind == "step_relief";
}

// inscribed_primitive proxy: shrink the size-like parameters about the shape
// center; slabs shrink their thickness symmetrically.
SceneSpec inscribed_proxy(const SceneSpec& spec) {
    SceneSpec proxy = spec;
    proxy.prior_kind = "exact";
    const double s = spec.prior_scale;
    if (!(s > 0.0) || s > 1.0)
        throw Error("inscribed_primitive: scale must lie in (0, 1]");
    auto scale = [&proxy, s](const char* key) { proxy.params[key] = proxy.params.at(key) * s; };
    if (spec.kind == "sphere") scale("r");
    else if (spec.kind == "ellipsoid") { scale("rx"); scale("ry"); scale("rz"); }
    else if (spec.kind == "capsule") scale("r");
    else if (spec.kind == "torus") scale("minor_r");
    else if (spec.kind == "two_spheres_occluding") { scale("ar"); scale("br"); }
    else if (is_slab(spec.kind)) {
        const double t = proxy.params.at("thickness");
        proxy.params["z0"] = proxy.params.at("z0") + 0.5 * (1.0 - s) * t;
        proxy.params["thickness"] = t * s;
        if (spec.kind == "step_relief") scale("step_h");
    } else {
        throw Error("unknown scene kind: " + spec.kind);
    }
    return proxy;
}

}  // namespace

std::vector<std::uint8_t> erode_mask(const std::vector<std::uint8_t>& mask,
                                     const GridShape& shape, int iters) {
    if (mask.size() != static_cast<std::size_t>(shape.pixels()))
        throw ShapeMismatch("erode_mask: mask size mismatch");
    std::vector<std::uint8_t> cur = mask;
    for (int round = 0; round < iters; ++round) {
        std::vector<std::uint8_t> next(cur.size(), 0);
        for (int v = 0; v < shape.height; ++v)
            for (int u = 0; u < shape.width; ++u) {
                if (!cur[shape.flat(u, v)]) continue;
                const bool keep = u > 0 && cur[shape.flat(u - 1, v)] && u + 1 < shape.width &&
                                  cur[shape.flat(u + 1, v)] && v > 0 &&
                                  cur[shape.flat(u, v - 1)] && v + 1 < shape.height &&
                                  cur[shape.flat(u, v + 1)];
                next[shape.flat(u, v)] = keep ? 1 : 0;
            }
        cur = std::move(next);
    }
    return cur;
}

const std::vector<std::string>& SceneSpec::kinds() {
    static const std::vector<std::string> k = {
        "tilted_plane", "sphere", "ellipsoid", "capsule",
        "torus",        "two_spheres_occluding", "step_relief"};
    return k;
}

SceneSpec SceneSpec::with_defaults(const std::string& kind, int size, double pitch) {
    SceneSpec spec;
    spec.kind = kind;
    spec.grid = GridShape(size, size, pitch);
    const double S = size * pitch;
    auto& p = spec.params;
    if (kind == "sphere") {
        p = {{"cx", 0.5 * S}, {"cy", 0.5 * S}, {"cz", 0.625 * S}, {"r", 0.3125 * S}};
    } else if (kind == "ellipsoid") {
        p = {{"cx", 0.5 * S},  {"cy", 0.5 * S},   {"cz", 0.625 * S},
             {"rx", 0.35 * S}, {"ry", 0.235 * S}, {"rz", 0.195 * S}};
    } else if (kind == "capsule") {
        p = {{"x0", 0.3125 * S}, {"y0", 0.40625 * S}, {"x1", 0.6875 * S},
             {"y1", 0.59375 * S}, {"cz", 0.625 * S},  {"r", 0.171875 * S}};
    } else if (kind == "torus") {
        p = {{"cx", 0.5 * S}, {"cy", 0.5 * S}, {"cz", 0.625 * S},
             {"major_r", 0.296875 * S}, {"minor_r", 0.125 * S}};
    } else if (kind == "two_spheres_occluding") {
        p = {{"ax", 0.390625 * S}, {"ay", 0.453125 * S}, {"az", 0.546875 * S},
             {"ar", 0.21875 * S},  {"bx", 0.640625 * S}, {"by", 0.5625 * S},
             {"bz", 0.7421875 * S}, {"br", 0.234375 * S}};
    } else if (kind == "tilted_plane") {
        p = {{"sx", 0.25}, {"sy", -0.15}, {"z0", 0.3125 * S}, {"thickness", 0.25 * S}};
    } else if (kind == "step_relief") {
        p = {{"z0", 0.78125 * S},       {"step_h", 0.046875 * S},
             {"thickness", 0.234375 * S}, {"u0", 0.25 * size},
             {"v0", 0.25 * size},        {"u1", 0.75 * size},
             {"v1", 0.75 * size}};
    } else {
        throw Error("unknown scene kind: " + kind);
    }
    return spec;
}

SceneBundle generate_scene(const SceneSpec& spec) {
    const GridShape g(spec.grid.width, spec.grid.height, spec.grid.pitch);
    SceneBundle b;
    b.spec = spec;
    b.normals_front = VectorField2D(g);
    b.normals_back = VectorField2D(g);
    b.gt_front = ScalarField2D(g, kOutOfDomain);
    b.gt_back = ScalarField2D(g, kOutOfDomain);

    std::vector<std::uint8_t> on(g.pixels(), 0);
    for (int v = 0; v < g.height; ++v)
        for (int u = 0; u < g.width; ++u) {
            const Hit h = probe(spec, u * g.pitch, v * g.pitch, u, v);
            if (h.ok) {
                on[g.flat(u, v)] = 1;
                b.gt_front.at(u, v) = h.zf;
                b.gt_back.at(u, v) = h.zb;
                b.normals_front.at(u, v) = h.nf;
                b.normals_back.at(u, v) = h.nb;
            } else {
                b.normals_front.at(u, v) = {0.0, 0.0, 1.0};
                b.normals_back.at(u, v) = {0.0, 0.0, -1.0};
            }
        }

    if (!is_slab(spec.kind)) {
        for (int u = 0; u < g.width; ++u)
            if (on[g.flat(u, 0)] || on[g.flat(u, g.height - 1)])
                throw SceneOutOfBounds("scene touches the top/bottom image frame");
        for (int v = 0; v < g.height; ++v)
            if (on[g.flat(0, v)] || on[g.flat(g.width - 1, v)])
                throw SceneOutOfBounds("scene touches the left/right image frame");
    }

    std::vector<std::uint8_t> oz;
    b.prior_front = ScalarField2D(g, kOutOfDomain);
    b.prior_back = ScalarField2D(g, kOutOfDomain);
    if (spec.prior_kind == "exact") {
        oz = on;
        for (int i = 0; i < g.pixels(); ++i)
            if (oz[i]) {
                b.prior_front.values[i] = b.gt_front.values[i];
                b.prior_back.values[i] = b.gt_back.values[i];
            }
    } else if (spec.prior_kind == "eroded_offset") {
        oz = erode_mask(on, g, spec.prior_erosion_px);
        for (int i = 0; i < g.pixels(); ++i)
            if (oz[i]) {
                b.prior_front.values[i] = b.gt_front.values[i] + spec.prior_delta;
                b.prior_back.values[i] = b.gt_back.values[i] + spec.prior_delta;
            }
    } else if (spec.prior_kind == "inscribed_primitive") {
        const SceneBundle proxy = generate_scene(inscribed_proxy(spec));
        oz.assign(g.pixels(), 0);
        for (int i = 0; i < g.pixels(); ++i)
            if (on[i] && proxy.domain.omega_n[i]) {
                oz[i] = 1;
                b.prior_front.values[i] = proxy.gt_front.values[i];
                b.prior_back.values[i] = proxy.gt_back.values[i];
            }
    } else {
        throw Error("unknown prior kind: " + spec.prior_kind);
    }

    b.domain = build_domain(g, on, oz);
    for (int i = 0; i < b.domain.n(); ++i) {
        const int px = b.domain.index_to_pixel[i];
        if (!(b.gt_front.values[px] <= b.gt_back.values[px]))
            throw Error("scene generation: front sheet behind back sheet");
    }
    validate_normals(b.normals_front, b.domain);
    validate_normals(b.normals_back, b.domain);
    return b;
}

double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    auto mix = [](std::uint64_t x) {
        x ^= x >> 30;
        x *= 0xBF58476D1CE4E5B9ull;
        x ^= x >> 27;
        x *= 0x94D049BB133111EBull;
        x ^= x >> 31;
        return x;
    };
    std::uint64_t h = mix(seed + 0x9E3779B97F4A7C15ull * (stream + 1));
    h = mix(h + 0x9E3779B97F4A7C15ull * (counter + 1));
    // (0, 1): the half-offset keeps log() of a draw finite
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

VectorField2D perturb_normals(const VectorField2D& field, double stddev_deg,
                              std::uint64_t seed) {
    if (stddev_deg < 0.0) throw Error("perturb_normals: stddev must be >= 0");
    VectorField2D out = field;
    if (stddev_deg == 0.0) return out;
    const double sigma = stddev_deg * kPi / 180.0;
    const int total = field.shape.pixels();
    for (int i = 0; i < total; ++i) {
        const Vec3 n = field.values[i];
        const double len = n.norm();
        if (len == 0.0) continue;
        const Vec3 unit = n * (1.0 / len);
        const double u1 = counter_uniform(seed, 0, static_cast<std::uint64_t>(i));
        const double u2 = counter_uniform(seed, 1, static_cast<std::uint64_t>(i));
        const double u3 = counter_uniform(seed, 2, static_cast<std::uint64_t>(i));
        double theta = std::abs(sigma * std::sqrt(-2.0 * std::log(u1)) *
                                std::cos(2.0 * kPi * u2));
        const double phi = 2.0 * kPi * u3;
        const Vec3 e = std::abs(unit.x) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
        const Vec3 t1 = unit.cross(e).normalized();
        const Vec3 t2 = unit.cross(t1);
        const Vec3 axis = t1 * std::cos(phi) + t2 * std::sin(phi);
        // axis is perpendicular to unit, so Rodrigues reduces to two terms;
        // halve the angle until the result clears the n_z floor
        for (int tries = 0; tries < 200; ++tries) {
            const Vec3 rotated =
                (unit * std::cos(theta) + axis.cross(unit) * std::sin(theta)).normalized();
            if (std::abs(rotated.z) >= kMinNz) {
                out.values[i] = rotated;
                break;
            }
            theta *= 0.5;
        }
    }
    return out;
}

DbiniProblem scene_problem(const SceneBundle& bundle) {
    DbiniProblem p;
    p.normals_front = bundle.normals_front;
    p.normals_back = bundle.normals_back;
    p.prior_front = bundle.prior_front;
    p.prior_back = bundle.prior_back;
    p.domain = bundle.domain;
    return p;
}

DbiniSolution dense_oracle_solve(const DbiniProblem& problem, const Hyperparameters& hyper) {
    const int unknowns = 2 * problem.domain.n();
    if (unknowns > 2048)
        throw OracleTooLarge("dense oracle limited to 2048 unknowns, got " +
                             std::to_string(unknowns));
    const InnerSolve ldlt = [](const JointSystem& sys, const std::vector<double>& x0,
                               CgReport& rep) {
        (void)x0;
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(sys.lhs.n, sys.lhs.n);
        for (int r = 0; r < sys.lhs.n; ++r)
            for (std::int64_t s = sys.lhs.row_offsets[r]; s < sys.lhs.row_offsets[r + 1]; ++s)
                A(r, sys.lhs.col_indices[s]) += sys.lhs.values[s];
        const Eigen::Map<const Eigen::VectorXd> b(sys.rhs.data(),
                                                  static_cast<Eigen::Index>(sys.rhs.size()));
        const Eigen::VectorXd x = A.ldlt().solve(b);
        rep.iterations = 0;
        rep.converged = true;
        const double bn = b.norm();
        rep.relative_residual = bn == 0.0 ? 0.0 : (b - A * x).norm() / bn;
        return std::vector<double>(x.data(), x.data() + x.size());
    };
    return dbini_optimize_with(problem, hyper, ldlt);
}

}  // namespace dbini
