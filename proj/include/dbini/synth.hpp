#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dbini/solver.hpp"

namespace dbini {

// Analytic benchmark scene. Geometry parameters live in `params` and are
// expressed in scene units (pixel coordinate times pitch), except the
// step_relief plateau rectangle which is given in pixel indices. Use
// with_defaults() for a sensible parameterization at any grid size.
//
//   tilted_plane          sx, sy, z0, thickness        (slab over the grid)
//   sphere                cx, cy, cz, r
//   ellipsoid             cx, cy, cz, rx, ry, rz
//   capsule               x0, y0, x1, y1, cz, r        (axis parallel to image)
//   torus                 cx, cy, cz, major_r, minor_r (axis = viewing axis)
//   two_spheres_occluding ax, ay, az, ar, bx, by, bz, br
//   step_relief           z0, step_h, thickness, u0, v0, u1, v1
struct SceneSpec {
    std::string kind = "sphere";
    GridShape grid{128, 128, 1.0};
    std::map<std::string, double> params;

    std::string prior_kind = "exact";  // exact | eroded_offset | inscribed_primitive
    double prior_delta = 0.5;          // eroded_offset: push both sheets away by this
    int prior_erosion_px = 2;          // eroded_offset: mask erosion radius
    double prior_scale = 0.8;          // inscribed_primitive: shrink factor

    double noise_deg = 0.0;  // normal perturbation stddev, consumed by callers
    std::uint64_t seed = 0;

    // Pixels whose surface normal has |n_z| below this are trimmed from the
    // domain; the depth slope there exceeds sqrt(1 - m^2)/m.
    double nz_margin = 0.05;

    static const std::vector<std::string>& kinds();
    static SceneSpec with_defaults(const std::string& kind, int size = 128,
                                   double pitch = 1.0);
};

// Ground truth plus the prior rasters of one generated scene. Normals are the
// exact analytic ones; callers add noise via perturb_normals when they want
// degraded input. Depth rasters hold kOutOfDomain outside their mask.
struct SceneBundle {
    SceneSpec spec;
    DomainMask domain;
    VectorField2D normals_front;  // n_z > 0
    VectorField2D normals_back;   // n_z < 0, same camera frame
    ScalarField2D gt_front, gt_back;
    ScalarField2D prior_front, prior_back;
};

// Ray-casts the analytic shape at every pixel center, trims near-silhouette
// pixels by nz_margin, builds the prior, and checks front <= back everywhere.
// Throws SceneOutOfBounds when the footprint touches the image frame (every
// scene keeps a >= 1 pixel margin; slab kinds are inset by one pixel), Error
// on unknown kinds or missing parameters.
SceneBundle generate_scene(const SceneSpec& spec);

// Rotates each normal about a random axis perpendicular to it by an angle
// drawn from |N(0, stddev)| (degrees). Counter-based RNG keyed on (seed,
// pixel): bit-identical for equal seeds regardless of evaluation order. The
// rotation is bisected toward zero until |n_z| >= kMinNz holds.
VectorField2D perturb_normals(const VectorField2D& field, double stddev_deg,
                              std::uint64_t seed);

// Deterministic uniform draw in [0, 1) for (seed, stream, counter).
double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

// Bundles the scene's (clean) normals and priors into a solver problem.
DbiniProblem scene_problem(const SceneBundle& bundle);

// Reference path for tests: the identical outer IRLS schedule, with the
// frozen-weight systems solved by dense LDLT factorization instead of
// conjugate gradients. Throws OracleTooLarge above 2048 unknowns.
DbiniSolution dense_oracle_solve(const DbiniProblem& problem, const Hyperparameters& hyper);

// 4-neighbor erosion, `iters` rounds; pixels on the image frame erode too.
std::vector<std::uint8_t> erode_mask(const std::vector<std::uint8_t>& mask,
                                     const GridShape& shape, int iters);

}  // namespace dbini
