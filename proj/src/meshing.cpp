#include "dbini/meshing.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <utility>

namespace dbini {

namespace {

struct EdgeTally {
    int count = 0;
    int balance = 0;  // +1 per low->high traversal, -1 per high->low
};

using EdgeMap = std::map<std::pair<int, int>, EdgeTally>;

void tally(EdgeMap& edges, int a, int b) {
    EdgeTally& e = edges[{std::min(a, b), std::max(a, b)}];
    e.count += 1;
    e.balance += a < b ? 1 : -1;
}

bool zero_area(const Vec3& p0, const Vec3& p1, const Vec3& p2) {
    return (p1 - p0).cross(p2 - p0).norm() == 0.0;
}

}  // namespace

TriangleMesh depth_to_mesh(const ScalarField2D& depth, const DomainMask& domain,
                           SheetSide side) {
    if (depth.shape != domain.shape)
        throw ShapeMismatch("depth_to_mesh: depth/domain shape mismatch");
    const GridShape& g = domain.shape;
    const double h = g.pitch;

    TriangleMesh m;
    m.vertices.reserve(domain.n());
    for (int i = 0; i < domain.n(); ++i) {
        const int px = domain.index_to_pixel[i];
        const double z = depth.values[px];
        if (!std::isfinite(z)) throw Error("depth_to_mesh: non-finite depth in the domain");
        m.vertices.push_back({(px % g.width) * h, (px / g.width) * h, z});
    }
    for (int v = 0; v + 1 < g.height; ++v)
        for (int u = 0; u + 1 < g.width; ++u) {
            const int a = domain.index_at(u, v), b = domain.index_at(u + 1, v);
            const int c = domain.index_at(u, v + 1), d = domain.index_at(u + 1, v + 1);
            if (a < 0 || b < 0 || c < 0 || d < 0) continue;
            if (side == SheetSide::front) {
                m.faces.push_back({a, d, b});  // outward = toward the camera
                m.faces.push_back({a, c, d});
            } else {
                m.faces.push_back({a, b, d});
                m.faces.push_back({a, d, c});
            }
        }
    return m;
}

TriangleMesh zipper(const TriangleMesh& front, const TriangleMesh& back,
                    const DomainMask& domain, ZipperReport* report) {
    const int n = domain.n();
    if (front.vertices.size() != static_cast<std::size_t>(n) ||
        back.vertices.size() != static_cast<std::size_t>(n))
        throw ShapeMismatch("zipper: sheets do not match the domain");

    TriangleMesh out;
    out.vertices = front.vertices;
    out.vertices.insert(out.vertices.end(), back.vertices.begin(), back.vertices.end());
    out.faces = front.faces;
    for (const auto& f : back.faces)
        out.faces.push_back({f[0] + n, f[1] + n, f[2] + n});

    EdgeMap front_edges;
    for (const auto& f : front.faces)
        for (int e = 0; e < 3; ++e) tally(front_edges, f[e], f[(e + 1) % 3]);

    ZipperReport rep;
    auto emit = [&out, &rep](int p0, int p1, int p2) {
        if (zero_area(out.vertices[p0], out.vertices[p1], out.vertices[p2])) {
            rep.degenerate_skipped += 1;
            return;
        }
        out.faces.push_back({p0, p1, p2});
    };
    // Each rim edge (count 1) is bridged right where it is found, so every
    // boundary loop closes regardless of how many loops the domain has. The
    // seam traverses a->b reversed relative to the front face and forward
    // relative to the (flipped) back face, keeping the orientation coherent.
    for (const auto& f : front.faces)
        for (int e = 0; e < 3; ++e) {
            const int a = f[e], b = f[(e + 1) % 3];
            if (front_edges.at({std::min(a, b), std::max(a, b)}).count != 1) continue;
            emit(b, a, a + n);
            emit(b, a + n, b + n);
            rep.seam_quads += 1;
        }

    EdgeMap all;
    for (const auto& f : out.faces)
        for (int e = 0; e < 3; ++e) tally(all, f[e], f[(e + 1) % 3]);
    rep.watertight = !out.faces.empty();
    for (const auto& [key, tal] : all) {
        (void)key;
        if (tal.count != 2 || tal.balance != 0) rep.watertight = false;
    }
    for (int i = 0; i < n; ++i)
        if (front.vertices[i].z > back.vertices[i].z) rep.inversion_count += 1;
    if (report) *report = rep;
    return out;
}

double mesh_volume(const TriangleMesh& mesh) {
    double six_v = 0.0;
    for (const auto& f : mesh.faces)
        six_v += mesh.vertices[f[0]].dot(mesh.vertices[f[1]].cross(mesh.vertices[f[2]]));
    return six_v / 6.0;
}

DepthMetrics depth_metrics(const ScalarField2D& estimate, const ScalarField2D& reference,
                           const DomainMask& domain, bool align_offset) {
    if (estimate.shape != domain.shape || reference.shape != domain.shape)
        throw ShapeMismatch("depth_metrics: raster/domain shape mismatch");
    std::vector<double> diff;
    diff.reserve(domain.n());
    for (int i = 0; i < domain.n(); ++i) {
        const int px = domain.index_to_pixel[i];
        const double e = estimate.values[px], r = reference.values[px];
        if (std::isfinite(e) && std::isfinite(r)) diff.push_back(e - r);
    }
    if (diff.empty()) throw EmptyDomain("depth_metrics: no finite overlap");
    if (align_offset) {
        double mean = 0.0;
        for (double d : diff) mean += d;
        mean /= diff.size();
        for (double& d : diff) d -= mean;
    }
    DepthMetrics m;
    m.aligned = align_offset;
    double sq = 0.0, ab = 0.0;
    for (double d : diff) {
        sq += d * d;
        ab += std::abs(d);
    }
    m.rmse = std::sqrt(sq / diff.size());
    m.mae = ab / diff.size();
    return m;
}

void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
    std::FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (!fp) throw IoError("cannot open for writing: " + path.string());
    for (const auto& v : mesh.vertices)
        std::fprintf(fp, "v %.17g %.17g %.17g\n", v.x, v.y, v.z);
    for (const auto& f : mesh.faces)
        std::fprintf(fp, "f %d %d %d\n", f[0] + 1, f[1] + 1, f[2] + 1);
    if (std::fclose(fp) != 0) throw IoError("write failed: " + path.string());
}

void write_ply(const TriangleMesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << mesh.vertices.size() << "\n"
        << "property double x\nproperty double y\nproperty double z\n"
        << "element face " << mesh.faces.size() << "\n"
        << "property list uchar int vertex_indices\nend_header\n";
    for (const auto& v : mesh.vertices) {
        const double xyz[3] = {v.x, v.y, v.z};
        out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    }
    for (const auto& f : mesh.faces) {
        const unsigned char three = 3;
        out.write(reinterpret_cast<const char*>(&three), 1);
        out.write(reinterpret_cast<const char*>(f.data()), 3 * sizeof(std::int32_t));
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace dbini
