#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "dbini/meshing.hpp"
#include "dbini/synth.hpp"

using namespace dbini;

namespace {

DomainMask full_domain(const GridShape& shape) {
    std::vector<std::uint8_t> ones(shape.pixels(), 1), zeros(shape.pixels(), 0);
    return build_domain(shape, ones, zeros);
}

Vec3 face_normal(const TriangleMesh& m, int f) {
    const Vec3& p0 = m.vertices[m.faces[f][0]];
    const Vec3& p1 = m.vertices[m.faces[f][1]];
    const Vec3& p2 = m.vertices[m.faces[f][2]];
    return (p1 - p0).cross(p2 - p0).normalized();
}

// independent connectivity census for Euler characteristic checks
int distinct_edges(const TriangleMesh& m) {
    std::set<std::pair<int, int>> edges;
    for (const auto& f : m.faces)
        for (int e = 0; e < 3; ++e) {
            const int a = f[e], b = f[(e + 1) % 3];
            edges.insert({std::min(a, b), std::max(a, b)});
        }
    return static_cast<int>(edges.size());
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("depth_to_mesh: smallest grid") {
    const GridShape shape(2, 2, 1.0);
    const DomainMask d = full_domain(shape);
    ScalarField2D depth(shape, 3.0);
    const TriangleMesh m = depth_to_mesh(depth, d, SheetSide::front);
    REQUIRE(m.vertices.size() == 4);
    REQUIRE(m.faces.size() == 2);
    CHECK(m.vertices[0].x == 0.0);
    CHECK(m.vertices[1].x == 1.0);
    CHECK(m.vertices[2].y == 1.0);
    CHECK(m.vertices[3].z == 3.0);
    // split along the 0-3 diagonal, camera-facing winding
    CHECK(m.faces[0] == std::array<std::int32_t, 3>{0, 3, 1});
    CHECK(m.faces[1] == std::array<std::int32_t, 3>{0, 2, 3});
    for (int f = 0; f < 2; ++f) CHECK(face_normal(m, f).z == doctest::Approx(-1.0));

    const TriangleMesh b = depth_to_mesh(depth, d, SheetSide::back);
    for (int f = 0; f < 2; ++f) CHECK(face_normal(b, f).z == doctest::Approx(1.0));

    ScalarField2D bad(shape, 3.0);
    bad.at(1, 1) = kOutOfDomain;
    CHECK_THROWS_AS(depth_to_mesh(bad, d, SheetSide::front), Error);
}

TEST_CASE("depth_to_mesh: planar depth gives parallel faces") {
    const GridShape shape(8, 8, 0.5);
    const DomainMask d = full_domain(shape);
    ScalarField2D depth(shape, 0.0);
    for (int v = 0; v < 8; ++v)
        for (int u = 0; u < 8; ++u) depth.at(u, v) = 2.0 + 0.3 * u * 0.5 - 0.1 * v * 0.5;
    const TriangleMesh m = depth_to_mesh(depth, d, SheetSide::front);
    REQUIRE(m.faces.size() == 2 * 7 * 7);
    const Vec3 first = face_normal(m, 0);
    CHECK(first.z < 0.0);
    for (std::size_t f = 1; f < m.faces.size(); ++f)
        CHECK(face_normal(m, static_cast<int>(f)).dot(first) >= 1.0 - 1e-10);
}

TEST_CASE("depth_to_mesh: ground-truth sphere vertices lie on the sphere") {
    const SceneBundle b = generate_scene(SceneSpec::with_defaults("sphere", 64));
    const TriangleMesh m = depth_to_mesh(b.gt_front, b.domain, SheetSide::front);
    const double cx = 32.0, cy = 32.0, cz = 40.0, r = 20.0;
    double worst = 0.0;
    for (const auto& v : m.vertices) {
        const Vec3 d{v.x - cx, v.y - cy, v.z - cz};
        worst = std::max(worst, std::abs(d.norm() - r));
    }
    CHECK(worst < b.domain.shape.pitch);
    CHECK(worst < 1e-9);  // vertices are exact analytic hits
}

TEST_CASE("zipper: sphere sheets close to a genus-0 surface") {
    const SceneBundle b = generate_scene(SceneSpec::with_defaults("sphere", 48));
    const TriangleMesh front = depth_to_mesh(b.gt_front, b.domain, SheetSide::front);
    const TriangleMesh back = depth_to_mesh(b.gt_back, b.domain, SheetSide::back);
    ZipperReport rep;
    const TriangleMesh closed = zipper(front, back, b.domain, &rep);
    CHECK(rep.watertight);
    CHECK(rep.inversion_count == 0);
    CHECK(rep.degenerate_skipped == 0);
    CHECK(rep.seam_quads > 0);
    const int V = static_cast<int>(closed.vertices.size());
    const int F = static_cast<int>(closed.faces.size());
    const int E = distinct_edges(closed);
    CHECK(V - E + F == 2);
}

TEST_CASE("zipper: torus sheets close to a genus-1 surface") {
    const SceneBundle b = generate_scene(SceneSpec::with_defaults("torus", 64));
    const TriangleMesh front = depth_to_mesh(b.gt_front, b.domain, SheetSide::front);
    const TriangleMesh back = depth_to_mesh(b.gt_back, b.domain, SheetSide::back);
    ZipperReport rep;
    const TriangleMesh closed = zipper(front, back, b.domain, &rep);
    CHECK(rep.watertight);
    const int V = static_cast<int>(closed.vertices.size());
    const int F = static_cast<int>(closed.faces.size());
    const int E = distinct_edges(closed);
    CHECK(V - E + F == 0);
    // defaults at 64: major 19, minor 8
    const double analytic = 2.0 * 3.14159265358979 * 3.14159265358979 * 19.0 * 64.0;
    CHECK(mesh_volume(closed) == doctest::Approx(analytic).epsilon(0.05));
}

TEST_CASE("zipper: enclosed sphere volume matches the analytic value") {
    const SceneBundle b = generate_scene(SceneSpec::with_defaults("sphere", 128));
    const TriangleMesh front = depth_to_mesh(b.gt_front, b.domain, SheetSide::front);
    const TriangleMesh back = depth_to_mesh(b.gt_back, b.domain, SheetSide::back);
    const TriangleMesh closed = zipper(front, back, b.domain);
    const double analytic = 4.0 / 3.0 * 3.14159265358979 * 40.0 * 40.0 * 40.0;
    const double vol = mesh_volume(closed);
    CHECK(vol > 0.0);
    CHECK(vol == doctest::Approx(analytic).epsilon(0.05));
}

TEST_CASE("zipper: degenerate domains stay safe") {
    const GridShape shape(4, 4, 1.0);
    std::vector<std::uint8_t> on(shape.pixels(), 0), oz(shape.pixels(), 0);
    on[shape.flat(1, 1)] = 1;
    const DomainMask d = build_domain(shape, on, oz);
    ScalarField2D zf(shape, 1.0), zb(shape, 2.0);
    const TriangleMesh front = depth_to_mesh(zf, d, SheetSide::front);
    const TriangleMesh back = depth_to_mesh(zb, d, SheetSide::back);
    CHECK(front.vertices.size() == 1);
    CHECK(front.faces.empty());
    ZipperReport rep;
    const TriangleMesh closed = zipper(front, back, d, &rep);
    CHECK_FALSE(rep.watertight);
    CHECK(closed.vertices.size() == 2);
}

TEST_CASE("zipper: inversions are counted per pixel") {
    const GridShape shape(8, 8, 1.0);
    const DomainMask d = full_domain(shape);
    ScalarField2D zf(shape, 5.0), zb(shape, 6.0);
    zb.at(2, 3) = 4.5;
    zb.at(5, 5) = 4.9;
    zb.at(0, 7) = 5.0;  // touching is not an inversion
    const TriangleMesh front = depth_to_mesh(zf, d, SheetSide::front);
    const TriangleMesh back = depth_to_mesh(zb, d, SheetSide::back);
    ZipperReport rep;
    zipper(front, back, d, &rep);
    CHECK(rep.inversion_count == 2);
}

TEST_CASE("depth_metrics: constants, alignment, and the rms-mean inequality") {
    const SceneBundle b = generate_scene(SceneSpec::with_defaults("sphere", 48));
    SUBCASE("identical rasters") {
        const DepthMetrics m = depth_metrics(b.gt_front, b.gt_front, b.domain, false);
        CHECK(m.rmse == 0.0);
        CHECK(m.mae == 0.0);
        CHECK_FALSE(m.aligned);
    }
    SUBCASE("pure offset vanishes under alignment") {
        ScalarField2D est = b.gt_front;
        for (double& v : est.values) v += 2.5;
        const DepthMetrics raw = depth_metrics(est, b.gt_front, b.domain, false);
        CHECK(raw.rmse == doctest::Approx(2.5).epsilon(1e-12));
        CHECK(raw.mae == doctest::Approx(2.5).epsilon(1e-12));
        const DepthMetrics al = depth_metrics(est, b.gt_front, b.domain, true);
        CHECK(al.rmse <= 1e-12);
        CHECK(al.aligned);
    }
    SUBCASE("random residuals against a direct accumulation") {
        ScalarField2D est = b.gt_front;
        double sq = 0.0, ab = 0.0;
        int count = 0;
        for (int i = 0; i < b.domain.n(); ++i) {
            const int px = b.domain.index_to_pixel[i];
            const double noise = 0.3 * std::sin(0.7 * px) + 0.05 * px / 1000.0;
            est.values[px] += noise;
            sq += noise * noise;
            ab += std::abs(noise);
            ++count;
        }
        const DepthMetrics m = depth_metrics(est, b.gt_front, b.domain, false);
        CHECK(m.rmse == doctest::Approx(std::sqrt(sq / count)).epsilon(1e-12));
        CHECK(m.mae == doctest::Approx(ab / count).epsilon(1e-12));
        CHECK(m.rmse >= m.mae);
    }
    SUBCASE("no finite overlap") {
        ScalarField2D est(b.domain.shape, kOutOfDomain);
        CHECK_THROWS_AS(depth_metrics(est, b.gt_front, b.domain, false), EmptyDomain);
    }
}

TEST_CASE("mesh writers: deterministic bytes and consistent structure") {
    const SceneBundle b = generate_scene(SceneSpec::with_defaults("sphere", 32));
    const TriangleMesh front = depth_to_mesh(b.gt_front, b.domain, SheetSide::front);
    const TriangleMesh back = depth_to_mesh(b.gt_back, b.domain, SheetSide::back);
    const TriangleMesh closed = zipper(front, back, b.domain);
    const auto dir = std::filesystem::temp_directory_path() / "dbini_mesh_test";
    std::filesystem::create_directories(dir);

    write_obj(closed, dir / "a.obj");
    write_obj(closed, dir / "b.obj");
    const std::string obj1 = slurp(dir / "a.obj"), obj2 = slurp(dir / "b.obj");
    CHECK(obj1 == obj2);
    std::size_t vlines = 0, flines = 0, pos = 0;
    std::istringstream lines(obj1);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.rfind("v ", 0) == 0) ++vlines;
        if (line.rfind("f ", 0) == 0) ++flines;
    }
    (void)pos;
    CHECK(vlines == closed.vertices.size());
    CHECK(flines == closed.faces.size());
    {
        double x = 0, y = 0, z = 0;
        std::istringstream first(obj1.substr(2, obj1.find('\n')));
        first >> x >> y >> z;
        CHECK(x == closed.vertices[0].x);
        CHECK(z == closed.vertices[0].z);
    }

    write_ply(closed, dir / "a.ply");
    write_ply(closed, dir / "b.ply");
    const std::string ply1 = slurp(dir / "a.ply"), ply2 = slurp(dir / "b.ply");
    CHECK(ply1 == ply2);
    const std::string marker = "end_header\n";
    const std::size_t header_end = ply1.find(marker);
    REQUIRE(header_end != std::string::npos);
    const std::size_t payload = ply1.size() - header_end - marker.size();
    CHECK(payload == 24 * closed.vertices.size() + 13 * closed.faces.size());
    CHECK(ply1.find("format binary_little_endian 1.0") != std::string::npos);
    std::filesystem::remove_all(dir);
}
