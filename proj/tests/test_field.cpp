#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "dbini/field.hpp"

using namespace dbini;

namespace {

// Independent boundary rule: in-domain pixel with any 4-neighbor outside or
// off-grid.  Deliberately naive; build_domain must reproduce it exactly.
std::vector<std::uint8_t> boundary_brute_force(const GridShape& shape,
                                               const std::vector<std::uint8_t>& omega) {
    std::vector<std::uint8_t> out(shape.pixels(), 0);
    for (int v = 0; v < shape.height; ++v)
        for (int u = 0; u < shape.width; ++u) {
            if (!omega[shape.flat(u, v)]) continue;
            bool edge = false;
            if (u == 0 || !omega[shape.flat(u - 1, v)]) edge = true;
            if (u == shape.width - 1 || !omega[shape.flat(u + 1, v)]) edge = true;
            if (v == 0 || !omega[shape.flat(u, v - 1)]) edge = true;
            if (v == shape.height - 1 || !omega[shape.flat(u, v + 1)]) edge = true;
            out[shape.flat(u, v)] = edge ? 1 : 0;
        }
    return out;
}

DomainMask full_domain(int w, int h, double pitch = 1.0) {
    GridShape shape(w, h, pitch);
    std::vector<std::uint8_t> on(shape.pixels(), 1);
    return build_domain(shape, on, on);
}

}  // namespace

TEST_CASE("3x3 full mask: boundary is the 8 border pixels") {
    DomainMask d = full_domain(3, 3);
    CHECK(d.n() == 9);
    int nb = 0;
    for (int p = 0; p < 9; ++p) nb += d.boundary[p];
    CHECK(nb == 8);
    CHECK(d.boundary[d.shape.flat(1, 1)] == 0);
    CHECK(d.component_count == 1);
}

TEST_CASE("single in-domain pixel is its own boundary and component") {
    GridShape shape(3, 3, 1.0);
    std::vector<std::uint8_t> omega(9, 0);
    omega[shape.flat(1, 1)] = 1;
    DomainMask d = build_domain(shape, omega, omega);
    CHECK(d.n() == 1);
    CHECK(d.boundary[shape.flat(1, 1)] == 1);
    CHECK(d.component_count == 1);
    CHECK(d.index_at(1, 1) == 0);
}

TEST_CASE("64x64 disk radius 20: boundary matches brute-force scan") {
    GridShape shape(64, 64, 1.0);
    std::vector<std::uint8_t> omega(shape.pixels(), 0);
    for (int v = 0; v < 64; ++v)
        for (int u = 0; u < 64; ++u) {
            const double du = u - 31.5, dv = v - 31.5;
            if (du * du + dv * dv <= 20.0 * 20.0) omega[shape.flat(u, v)] = 1;
        }
    DomainMask d = build_domain(shape, omega, omega);
    CHECK(d.boundary == boundary_brute_force(shape, omega));
    CHECK(d.component_count == 1);
}

TEST_CASE("property: boundary equals brute force on 1000 random masks") {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 1000; ++trial) {
        const int w = 2 + static_cast<int>(rng() % 63);
        const int h = 2 + static_cast<int>(rng() % 63);
        GridShape shape(w, h, 1.0);
        std::vector<std::uint8_t> omega(shape.pixels(), 0);
        std::bernoulli_distribution coin(0.2 + 0.6 * (rng() % 100) / 100.0);
        int count = 0;
        for (auto& m : omega) count += (m = coin(rng) ? 1 : 0);
        if (count == 0) {
            omega[rng() % omega.size()] = 1;
        }
        DomainMask d = build_domain(shape, omega, omega);
        REQUIRE(d.boundary == boundary_brute_force(shape, omega));
    }
}

TEST_CASE("packed numbering is a row-major bijection") {
    GridShape shape(8, 5, 1.0);
    std::vector<std::uint8_t> omega(shape.pixels(), 0);
    std::mt19937 rng(3);
    for (auto& m : omega) m = (rng() % 3) ? 1 : 0;
    omega[0] = 1;
    DomainMask d = build_domain(shape, omega, omega);

    int last = -1;
    for (int i = 0; i < d.n(); ++i) {
        const int p = d.index_to_pixel[i];
        CHECK(p > last);  // strictly increasing <=> row-major enumeration
        last = p;
        CHECK(d.pixel_to_index[p] == i);
    }
    for (int p = 0; p < shape.pixels(); ++p)
        if (!omega[p]) CHECK(d.pixel_to_index[p] == -1);
}

TEST_CASE("vectorize of a constant field is constant") {
    DomainMask d = full_domain(6, 4);
    ScalarField2D f(d.shape, 2.5);
    auto packed = vectorize(f, d);
    REQUIRE(packed.size() == 24);
    for (double x : packed) CHECK(x == 2.5);
}

TEST_CASE("5x5 ramp on a 13-pixel cross: hand-enumerated packing") {
    GridShape shape(5, 5, 1.0);
    std::vector<std::uint8_t> omega(25, 0);
    // plus-shaped cross: |u-2| + |v-2| <= 2
    for (int v = 0; v < 5; ++v)
        for (int u = 0; u < 5; ++u)
            if (std::abs(u - 2) + std::abs(v - 2) <= 2) omega[shape.flat(u, v)] = 1;
    DomainMask d = build_domain(shape, omega, omega);
    REQUIRE(d.n() == 13);

    ScalarField2D ramp(shape, 0.0);
    for (int v = 0; v < 5; ++v)
        for (int u = 0; u < 5; ++u) ramp.at(u, v) = u + 10.0 * v;

    const std::vector<double> expected = {2,  11, 12, 13, 20, 21, 22,
                                          23, 24, 31, 32, 33, 42};
    CHECK(vectorize(ramp, d) == expected);
}

TEST_CASE("rasterize is the inverse of vectorize; fill is NaN outside") {
    GridShape shape(7, 7, 1.0);
    std::vector<std::uint8_t> omega(49, 0);
    std::mt19937 rng(11);
    for (auto& m : omega) m = (rng() % 2) ? 1 : 0;
    omega[24] = 1;
    DomainMask d = build_domain(shape, omega, omega);

    ScalarField2D f(shape, 0.0);
    std::uniform_real_distribution<double> val(-5, 5);
    for (auto& x : f.values) x = val(rng);

    auto packed = vectorize(f, d);
    ScalarField2D back = rasterize(packed, d);
    for (int p = 0; p < 49; ++p) {
        if (omega[p])
            CHECK(back.values[p] == f.values[p]);
        else
            CHECK(std::isnan(back.values[p]));
    }
    // round-trip the other way
    CHECK(vectorize(back, d) == packed);
}

TEST_CASE("mirrored field packs to a permutation of the original") {
    GridShape shape(9, 6, 1.0);
    std::vector<std::uint8_t> omega(shape.pixels(), 0);
    std::mt19937 rng(5);
    for (auto& m : omega) m = (rng() % 4) ? 1 : 0;
    omega[0] = 1;

    std::vector<std::uint8_t> omega_m(shape.pixels(), 0);
    for (int v = 0; v < 6; ++v)
        for (int u = 0; u < 9; ++u)
            omega_m[shape.flat(8 - u, v)] = omega[shape.flat(u, v)];

    ScalarField2D f(shape, 0.0);
    for (int p = 0; p < shape.pixels(); ++p) f.values[p] = p * 0.37;
    ScalarField2D fm(shape, 0.0);
    for (int v = 0; v < 6; ++v)
        for (int u = 0; u < 9; ++u) fm.at(8 - u, v) = f.at(u, v);

    DomainMask d = build_domain(shape, omega, omega);
    DomainMask dm = build_domain(shape, omega_m, omega_m);
    auto a = vectorize(f, d);
    auto b = vectorize(fm, dm);
    REQUIRE(a.size() == b.size());
    // same multiset of values, and the permutation is the mirror map itself
    for (int i = 0; i < d.n(); ++i) {
        const int p = d.index_to_pixel[i];
        const int u = p % 9, v = p / 9;
        CHECK(b[dm.index_at(8 - u, v)] == a[i]);
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
}

TEST_CASE("errors: empty domain, shape mismatches, bad grid") {
    GridShape shape(4, 4, 1.0);
    std::vector<std::uint8_t> zeros(16, 0), ones(16, 1);
    CHECK_THROWS_AS(build_domain(shape, zeros, zeros), EmptyDomain);
    CHECK_THROWS_AS(build_domain(shape, std::vector<std::uint8_t>(9, 1), ones),
                    ShapeMismatch);

    DomainMask d = build_domain(shape, ones, ones);
    ScalarField2D wrong(GridShape(5, 4, 1.0), 0.0);
    CHECK_THROWS_AS(vectorize(wrong, d), ShapeMismatch);
    CHECK_THROWS_AS(rasterize(std::vector<double>(7, 0.0), d), ShapeMismatch);

    CHECK_THROWS_AS(GridShape(1, 4, 1.0), ShapeMismatch);
    CHECK_THROWS_AS(GridShape(4, 4, 0.0), ShapeMismatch);
}

TEST_CASE("validate_normals rejects non-unit and tangential normals") {
    DomainMask d = full_domain(3, 3);
    VectorField2D n(d.shape);
    for (auto& x : n.values) x = {0.0, 0.0, 1.0};
    CHECK_NOTHROW(validate_normals(n, d));

    n.at(1, 2) = {0.0, 0.0, 2.0};
    CHECK_THROWS_AS(validate_normals(n, d), DegenerateNormal);

    n.at(1, 2) = Vec3{1.0, 0.0, 5e-5}.normalized();
    CHECK_THROWS_AS(validate_normals(n, d), DegenerateNormal);
}
