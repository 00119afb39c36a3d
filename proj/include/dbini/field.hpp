#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "dbini/errors.hpp"

namespace dbini {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        const double n = norm();
        return {x / n, y / n, z / n};
    }
};

// Pixel grid in camera coordinates: u grows rightward, v downward, depth z
// away from the camera.  pitch is the physical spacing between adjacent pixel
// centers, shared by both axes.
struct GridShape {
    int width = 0;
    int height = 0;
    double pitch = 1.0;

    GridShape() = default;
    GridShape(int w, int h, double p) : width(w), height(h), pitch(p) {
        if (w < 2 || h < 2) throw ShapeMismatch("GridShape: width and height must be >= 2");
        if (!(p > 0.0)) throw ShapeMismatch("GridShape: pitch must be positive");
    }

    int pixels() const { return width * height; }
    bool contains(int u, int v) const { return u >= 0 && u < width && v >= 0 && v < height; }
    // Row-major: v outer, u inner.
    int flat(int u, int v) const { return v * width + u; }
    bool operator==(const GridShape& o) const {
        return width == o.width && height == o.height && pitch == o.pitch;
    }
    bool operator!=(const GridShape& o) const { return !(*this == o); }
};

constexpr double kOutOfDomain = std::numeric_limits<double>::quiet_NaN();

// Minimum |n_z| a usable normal may have; flatter normals make the tangency
// rows meaningless and are rejected at load / clamped during perturbation.
constexpr double kMinNz = 1e-4;

struct ScalarField2D {
    GridShape shape;
    std::vector<double> values;  // shape.pixels() entries, row-major

    ScalarField2D() = default;
    ScalarField2D(const GridShape& s, double fill) : shape(s), values(s.pixels(), fill) {}

    double& at(int u, int v) { return values[shape.flat(u, v)]; }
    double at(int u, int v) const { return values[shape.flat(u, v)]; }
};

struct VectorField2D {
    GridShape shape;
    std::vector<Vec3> values;  // row-major

    VectorField2D() = default;
    explicit VectorField2D(const GridShape& s) : shape(s), values(s.pixels()) {}

    Vec3& at(int u, int v) { return values[shape.flat(u, v)]; }
    const Vec3& at(int u, int v) const { return values[shape.flat(u, v)]; }
};

// Integration domain (Omega_n), depth-prior coverage (Omega_z), the outer
// boundary of Omega_n under 4-connectivity, and the dense <-> packed pixel
// numbering used by every vectorized quantity.  Pixels are packed in row-major
// order (v outer, u inner).
struct DomainMask {
    GridShape shape;
    std::vector<std::uint8_t> omega_n;
    std::vector<std::uint8_t> omega_z;
    std::vector<std::uint8_t> boundary;       // subset of omega_n
    std::vector<std::int32_t> pixel_to_index; // -1 outside omega_n
    std::vector<std::int32_t> index_to_pixel; // size n()
    std::vector<std::int32_t> component_id;   // -1 outside; 4-connected labels
    int component_count = 0;

    int n() const { return static_cast<int>(index_to_pixel.size()); }
    bool in_domain(int u, int v) const {
        return shape.contains(u, v) && omega_n[shape.flat(u, v)] != 0;
    }
    int index_at(int u, int v) const { return pixel_to_index[shape.flat(u, v)]; }
};

// Builds the packed numbering, boundary flags and connected components.
// A pixel is on the boundary iff it lies in omega_n and at least one of its
// 4-neighbors is outside omega_n or off the grid.  Throws EmptyDomain when
// omega_n has no pixels and ShapeMismatch when the mask sizes disagree.
DomainMask build_domain(const GridShape& shape,
                        const std::vector<std::uint8_t>& omega_n,
                        const std::vector<std::uint8_t>& omega_z);

// Packs the in-domain pixels of f into a dense vector (row-major order).
std::vector<double> vectorize(const ScalarField2D& f, const DomainMask& domain);

// Inverse of vectorize; pixels outside omega_n receive `fill`.
ScalarField2D rasterize(const std::vector<double>& packed, const DomainMask& domain,
                        double fill = kOutOfDomain);

// Checks unit length (1e-6) and |n_z| >= kMinNz on every omega_n pixel.
// Throws DegenerateNormal naming the offending pixel.
void validate_normals(const VectorField2D& normals, const DomainMask& domain);

}  // namespace dbini
