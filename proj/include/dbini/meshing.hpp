#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "dbini/field.hpp"

namespace dbini {

// Faces wind counter-clockwise seen from outside the solid: front-sheet
// normals point toward the camera (-z), back-sheet normals away (+z).
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::int32_t, 3>> faces;
};

enum class SheetSide { front, back };

// One vertex per in-domain pixel at (u pitch, v pitch, depth), in packed
// order; two triangles per fully in-domain 2x2 quad, split along the
// top-left to bottom-right diagonal. Throws ShapeMismatch on size mismatch
// and Error when depth is not finite on the domain.
TriangleMesh depth_to_mesh(const ScalarField2D& depth, const DomainMask& domain,
                           SheetSide side);

struct ZipperReport {
    bool watertight = false;   // every edge of the result borders exactly 2 faces
    int seam_quads = 0;        // silhouette edges bridged
    int degenerate_skipped = 0;  // zero-area seam triangles dropped (exact sheet contact)
    int inversion_count = 0;   // pixels whose front vertex lies behind the back one
};

// Welds the two sheets of one domain into a single mesh: front vertices keep
// their indices, back vertices follow at offset n, and every silhouette
// boundary edge is bridged by a two-triangle band. Handles multiple boundary
// loops (holes) since each rim edge is closed locally. Both inputs must come
// from depth_to_mesh over the same domain.
TriangleMesh zipper(const TriangleMesh& front, const TriangleMesh& back,
                    const DomainMask& domain, ZipperReport* report = nullptr);

// Signed enclosed volume by the divergence theorem; positive for a closed
// mesh with outward orientation.
double mesh_volume(const TriangleMesh& mesh);

struct DepthMetrics {
    double rmse = 0.0;
    double mae = 0.0;
    bool aligned = false;  // global offset removed before measuring
};

// Error statistics over pixels of omega_n where both rasters are finite.
// align_offset subtracts the mean difference first (gauge-free comparison).
// Throws EmptyDomain when no pixel qualifies.
DepthMetrics depth_metrics(const ScalarField2D& estimate, const ScalarField2D& reference,
                           const DomainMask& domain, bool align_offset);

// ASCII Wavefront OBJ; coordinates printed with %.17g round-trip precision.
void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path);

// Binary little-endian PLY, double-precision vertex coordinates.
void write_ply(const TriangleMesh& mesh, const std::filesystem::path& path);

}  // namespace dbini
