#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dbini/meshing.hpp"
#include "dbini/synth.hpp"

namespace dbini {

// Scene directory layout: eight rasters plus a versioned scene.json echo of
// the generating parameters.
//   normals_f.pfm normals_b.pfm depth_f_gt.pfm depth_b_gt.pfm
//   prior_f.pfm   prior_b.pfm   mask_n.png     mask_z.png
void save_scene(const SceneBundle& bundle, const std::filesystem::path& dir);

// Rebuilds the bundle from disk. Ground-truth rasters are optional (all-NaN
// when absent); everything else must be present and consistent. Loaded
// normals are renormalized (they round-tripped through float32).
SceneBundle load_scene(const std::filesystem::path& dir);

std::string scene_spec_to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const std::string& text);

// "2" for integers, "1e-4" for exact powers of ten, %.17g otherwise; every
// form parses back to the identical double.
std::string format_compact(double v);

std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t hash_file(const std::filesystem::path& path);

enum class Method { bini, dbini };
Method parse_method(const std::string& name);  // throws Error on anything else
std::string method_name(Method m);

// The scene's degraded input normals: spec.noise_deg rotation noise, streams
// 2*seed (front) and 2*seed+1 (back).
VectorField2D noisy_front(const SceneBundle& bundle);
VectorField2D noisy_back(const SceneBundle& bundle);

struct IntegrateOutput {
    std::vector<double> zf, zb;  // packed; bini sheets prior-aligned per component
    std::vector<OuterIteration> trace;        // joint trace (dbini) or front sheet (bini)
    std::vector<OuterIteration> trace_back;   // bini only
    int outer_iterations = 0;
    bool converged = false;
    int inversion_count = 0;
};

// Solves one scene with the requested method. bini runs each sheet alone,
// mean-anchored, ignoring the coupling terms; its output is then offset-
// aligned to the prior per connected component (evaluation-time gauge fix,
// never part of the solve). dbini is the joint solve as-is.
IntegrateOutput run_method(const SceneBundle& bundle, const VectorField2D& nf,
                           const VectorField2D& nb, Method method,
                           const Hyperparameters& hyper, Anchor anchor);

// max |depth step| / pitch over valid 4-neighbor pairs (edge-sharpness stat)
double max_gradient(const std::vector<double>& z, const DomainMask& domain);

// max |zf - zb| over silhouette boundary pixels
double boundary_gap(const std::vector<double>& zf, const std::vector<double>& zb,
                    const DomainMask& domain);

// pooled front+back error against ground truth over finite pixels
struct PooledMetrics {
    double rmse = 0.0, mae = 0.0;
    double rmse_aligned = 0.0, mae_aligned = 0.0;
};
PooledMetrics pooled_metrics(const SceneBundle& bundle, const std::vector<double>& zf,
                             const std::vector<double>& zb);

// Physical width of the default benchmark scenes in scene units.  Pixel pitch
// is kSuiteExtent / resolution so that the weight sharpness k = 2 acts on
// depth gaps of order one rather than of order the pixel count.
inline constexpr double kSuiteExtent = 2.0;

// The six-scene benchmark suite: 128x128 defaults, pushed-back eroded priors,
// 5 degree normal noise, per-scene seeds.
std::vector<SceneSpec> default_suite();

struct BenchTask {
    SceneSpec spec;
    Method method = Method::dbini;
    Hyperparameters hyper;
    Anchor anchor = Anchor::mean;
};

struct BenchRow {
    std::string scene;
    std::string method;
    Hyperparameters hyper;
    std::string status = "ok";  // ok | failed
    std::string note;           // failure reason
    PooledMetrics metrics;
    int outer_iters = 0;
    bool converged = false;
    int inversion_count = 0;
    double max_grad = 0.0;
    double boundary_gap_max = 0.0;
    double wall_ms = 0.0;
};

// Runs one task, capturing any failure in the row instead of throwing.
// When `keep` is non-null the solved sheets are stored there for mesh export.
BenchRow run_bench_task(const BenchTask& task, IntegrateOutput* keep = nullptr);

// Deterministic row order for output files.
void sort_rows(std::vector<BenchRow>& rows);

// CSV with one row per task plus trailing method-wise mean rows over the ok
// rows. wall_ms is the only column expected to differ between repeat runs.
std::string bench_csv(const std::vector<BenchRow>& rows);

std::string trace_csv(const std::vector<OuterIteration>& trace);

// metrics rows for one run: front/back/both x unaligned/aligned
std::string metrics_csv(const std::string& scene, const std::string& method,
                        const Hyperparameters& hyper, const SceneBundle& bundle,
                        const IntegrateOutput& out);

// "lambda_d=... lambda_s=... k=... max_outer_iters=... energy_rel_tol=...
//  cg_tol=... cg_max_iters=..." with compact numbers
std::string hyper_echo(const Hyperparameters& hyper);

// run.json: resolved argv plus input-file hashes; rerunning the stored argv
// must reproduce the numeric outputs byte for byte.
void write_run_json(const std::filesystem::path& dir, const std::string& subcommand,
                    const std::vector<std::string>& argv,
                    const std::vector<std::filesystem::path>& inputs);
std::vector<std::string> read_run_argv(const std::filesystem::path& run_json);

}  // namespace dbini
