#include "dbini/field.hpp"

#include <cstdio>
#include <queue>

namespace dbini {

namespace {

const int kNbU[4] = {1, -1, 0, 0};
const int kNbV[4] = {0, 0, 1, -1};

std::string pixel_str(int u, int v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "(%d, %d)", u, v);
    return buf;
}

}  // namespace

DomainMask build_domain(const GridShape& shape,
                        const std::vector<std::uint8_t>& omega_n,
                        const std::vector<std::uint8_t>& omega_z) {
    const std::size_t np = static_cast<std::size_t>(shape.pixels());
    if (omega_n.size() != np || omega_z.size() != np)
        throw ShapeMismatch("build_domain: mask size does not match grid");

    DomainMask d;
    d.shape = shape;
    d.omega_n = omega_n;
    d.omega_z = omega_z;
    d.boundary.assign(np, 0);
    d.pixel_to_index.assign(np, -1);
    d.component_id.assign(np, -1);

    for (int v = 0; v < shape.height; ++v) {
        for (int u = 0; u < shape.width; ++u) {
            const int p = shape.flat(u, v);
            if (!omega_n[p]) continue;
            d.pixel_to_index[p] = static_cast<std::int32_t>(d.index_to_pixel.size());
            d.index_to_pixel.push_back(p);
            for (int k = 0; k < 4; ++k) {
                const int uu = u + kNbU[k], vv = v + kNbV[k];
                if (!shape.contains(uu, vv) || !omega_n[shape.flat(uu, vv)]) {
                    d.boundary[p] = 1;
                    break;
                }
            }
        }
    }
    if (d.index_to_pixel.empty()) throw EmptyDomain("build_domain: omega_n is empty");

    // 4-connected component labels, BFS in packed order for determinism.
    int next = 0;
    std::queue<int> frontier;
    for (int idx = 0; idx < d.n(); ++idx) {
        const int seed = d.index_to_pixel[idx];
        if (d.component_id[seed] >= 0) continue;
        d.component_id[seed] = next;
        frontier.push(seed);
        while (!frontier.empty()) {
            const int p = frontier.front();
            frontier.pop();
            const int u = p % shape.width, v = p / shape.width;
            for (int k = 0; k < 4; ++k) {
                const int uu = u + kNbU[k], vv = v + kNbV[k];
                if (!shape.contains(uu, vv)) continue;
                const int q = shape.flat(uu, vv);
                if (omega_n[q] && d.component_id[q] < 0) {
                    d.component_id[q] = next;
                    frontier.push(q);
                }
            }
        }
        ++next;
    }
    d.component_count = next;
    return d;
}

std::vector<double> vectorize(const ScalarField2D& f, const DomainMask& domain) {
    if (f.shape != domain.shape) throw ShapeMismatch("vectorize: field/mask shape mismatch");
    std::vector<double> packed(domain.n());
    for (int i = 0; i < domain.n(); ++i) packed[i] = f.values[domain.index_to_pixel[i]];
    return packed;
}

ScalarField2D rasterize(const std::vector<double>& packed, const DomainMask& domain,
                        double fill) {
    if (packed.size() != static_cast<std::size_t>(domain.n()))
        throw ShapeMismatch("rasterize: packed length does not match |omega_n|");
    ScalarField2D f(domain.shape, fill);
    for (int i = 0; i < domain.n(); ++i) f.values[domain.index_to_pixel[i]] = packed[i];
    return f;
}

void validate_normals(const VectorField2D& normals, const DomainMask& domain) {
    if (normals.shape != domain.shape)
        throw ShapeMismatch("validate_normals: field/mask shape mismatch");
    for (int i = 0; i < domain.n(); ++i) {
        const int p = domain.index_to_pixel[i];
        const Vec3& nrm = normals.values[p];
        const int u = p % domain.shape.width, v = p / domain.shape.width;
        if (std::abs(nrm.norm() - 1.0) > 1e-6)
            throw DegenerateNormal("normal not unit length at pixel " + pixel_str(u, v));
        if (std::abs(nrm.z) < kMinNz)
            throw DegenerateNormal("normal too tangential (|n_z| < 1e-4) at pixel " +
                                   pixel_str(u, v));
    }
}

}  // namespace dbini
