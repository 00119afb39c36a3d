#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "dbini/image_io.hpp"
#include "dbini/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

using namespace dbini;

int dispatch(const std::vector<std::string>& args);

struct SynthOpts {
    std::string shape;
    int res = 128;
    double pitch = 1.0;
    std::string out;
    double radius = 0.0;
    bool radius_set = false;
    std::vector<std::string> params;
    std::string prior = "exact";
    double delta = 0.5;
    int erosion = 2;
    double scale = 0.8;
    double noise = 0.0;
    std::uint64_t seed = 0;
    double nz_margin = 0.05;
};

struct IntegrateOpts {
    std::string scene;
    std::string out;
    std::string method = "dbini";
    std::string anchor = "none";
    Hyperparameters hyper;
    std::string preset;
};

struct BenchOpts {
    std::string out;
    std::vector<std::string> scenes = {"sphere",    "ellipsoid",
                                       "capsule",   "torus",
                                       "two_spheres_occluding", "step_relief"};
    std::vector<std::string> methods = {"bini", "dbini"};
    int res = 128;
    double pitch = 0.0;  // 0 = auto: kSuiteExtent / res
    std::string prior = "eroded_offset";
    double delta = -1.0;  // negative = auto: half the pitch
    int erosion = 2;
    double noise = 5.0;
    std::uint64_t seed = 100;
    double nz_margin = 0.05;
    std::vector<double> sweep_k, sweep_lambda_d, sweep_lambda_s;
    int jobs = 1;
    Hyperparameters hyper;
    std::string preset;
};

struct MeshOpts {
    std::string depth, depth_back, mask, out;
    double pitch = 1.0;
    std::string side = "front";
};

struct MetricsOpts {
    std::string estimate, reference, mask, out;
    double pitch = 1.0;
    bool align = false;
};

struct RerunOpts {
    std::string run_json;
    std::string out;
    bool out_set = false;
};

bool write_mesh_by_extension(const TriangleMesh& mesh, const fs::path& path) {
    if (path.extension() == ".obj")
        write_obj(mesh, path);
    else if (path.extension() == ".ply")
        write_ply(mesh, path);
    else
        return false;
    return true;
}

bool has_finite(const ScalarField2D& f) {
    for (double v : f.values)
        if (std::isfinite(v)) return true;
    return false;
}

int run_synth(const SynthOpts& o, const std::vector<std::string>& raw) {
    SceneSpec spec = SceneSpec::with_defaults(o.shape, o.res, o.pitch);
    if (o.radius_set) {
        if (!spec.params.count("r")) {
            std::cerr << "error: --radius does not apply to shape '" << o.shape
                      << "'; use --param name=value for its parameters\n";
            return 2;
        }
        spec.params["r"] = o.radius;
    }
    for (const std::string& kv : o.params) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
            std::cerr << "error: --param expects name=value, got '" << kv << "'\n";
            return 2;
        }
        const std::string name = kv.substr(0, eq);
        if (!spec.params.count(name)) {
            std::cerr << "error: shape '" << o.shape << "' has no parameter '" << name
                      << "'; known:";
            for (const auto& [key, value] : spec.params) std::cerr << ' ' << key;
            std::cerr << '\n';
            return 2;
        }
        char* end = nullptr;
        const double value = std::strtod(kv.c_str() + eq + 1, &end);
        if (end == kv.c_str() + eq + 1 || *end != '\0') {
            std::cerr << "error: --param " << name << ": '" << kv.substr(eq + 1)
                      << "' is not a number\n";
            return 2;
        }
        spec.params[name] = value;
    }
    spec.prior_kind = o.prior;
    spec.prior_delta = o.delta;
    spec.prior_erosion_px = o.erosion;
    spec.prior_scale = o.scale;
    spec.noise_deg = o.noise;
    spec.seed = o.seed;
    spec.nz_margin = o.nz_margin;

    const SceneBundle bundle = generate_scene(spec);
    save_scene(bundle, o.out);
    write_run_json(o.out, "synth", raw, {});
    std::cout << "wrote scene '" << spec.kind << "' (" << spec.grid.width << "x"
              << spec.grid.height << ", " << bundle.domain.n()
              << " domain pixels) to " << o.out << "\n";
    return 0;
}

int run_integrate(const IntegrateOpts& o, const std::vector<std::string>& raw) {
    const Method method = parse_method(o.method);
    if (method == Method::bini && o.anchor != "mean") {
        std::cerr << "error: bini leaves every sheet offset undetermined; "
                     "pass --anchor mean\n";
        return 2;
    }
    const Anchor anchor = o.anchor == "mean" ? Anchor::mean : Anchor::none;
    o.hyper.validate();

    const fs::path scene_dir = o.scene;
    const SceneBundle bundle = load_scene(scene_dir);
    const fs::path out_dir = o.out;
    fs::create_directories(out_dir);

    std::cout << "scene '" << bundle.spec.kind << "' " << bundle.spec.grid.width << "x"
              << bundle.spec.grid.height << ", " << bundle.domain.n()
              << " domain pixels, method " << o.method << "\n";
    std::cout << "hyperparameters: " << hyper_echo(o.hyper) << "\n";
    if (bundle.spec.noise_deg > 0.0)
        std::cout << "normal noise: " << format_compact(bundle.spec.noise_deg)
                  << " deg, seed " << bundle.spec.seed << "\n";

    const VectorField2D nf = noisy_front(bundle);
    const VectorField2D nb = noisy_back(bundle);
    const IntegrateOutput result = run_method(bundle, nf, nb, method, o.hyper, anchor);

    const ScalarField2D zf = rasterize(result.zf, bundle.domain);
    const ScalarField2D zb = rasterize(result.zb, bundle.domain);
    write_pfm(out_dir / "depth_f_est.pfm", zf);
    write_pfm(out_dir / "depth_b_est.pfm", zb);
    {
        std::ofstream trace(out_dir / "trace.csv", std::ios::binary);
        trace << trace_csv(result.trace);
    }
    if (method == Method::bini) {
        std::ofstream trace(out_dir / "trace_back.csv", std::ios::binary);
        trace << trace_csv(result.trace_back);
    }

    const TriangleMesh mesh_f = depth_to_mesh(zf, bundle.domain, SheetSide::front);
    const TriangleMesh mesh_b = depth_to_mesh(zb, bundle.domain, SheetSide::back);
    write_ply(mesh_f, out_dir / "mesh_f.ply");
    write_ply(mesh_b, out_dir / "mesh_b.ply");
    if (method == Method::dbini) {
        ZipperReport report;
        const TriangleMesh fused = zipper(mesh_f, mesh_b, bundle.domain, &report);
        write_ply(fused, out_dir / "fused.ply");
        std::cout << "fused mesh: " << fused.vertices.size() << " vertices, "
                  << fused.faces.size() << " faces, watertight "
                  << (report.watertight ? "yes" : "no") << ", seam quads "
                  << report.seam_quads << "\n";
    }

    std::cout << "outer iterations: " << result.outer_iterations
              << (result.converged ? " (energy tolerance reached)" : " (iteration cap)")
              << ", inversions: " << result.inversion_count << "\n";

    const bool have_gt = has_finite(bundle.gt_front) || has_finite(bundle.gt_back);
    if (have_gt) {
        std::ofstream csv(out_dir / "metrics.csv", std::ios::binary);
        csv << metrics_csv(bundle.spec.kind, o.method, o.hyper, bundle, result);
        const PooledMetrics pm = pooled_metrics(bundle, result.zf, result.zb);
        char line[128];
        std::snprintf(line, sizeof(line), "rmse=%.6g mae=%.6g (both sheets, unaligned)",
                      pm.rmse, pm.mae);
        std::cout << line << "\n";
    }

    std::vector<fs::path> inputs = {scene_dir / "scene.json",   scene_dir / "normals_f.pfm",
                                    scene_dir / "normals_b.pfm", scene_dir / "prior_f.pfm",
                                    scene_dir / "prior_b.pfm",   scene_dir / "mask_n.png",
                                    scene_dir / "mask_z.png"};
    for (const char* name : {"depth_f_gt.pfm", "depth_b_gt.pfm"})
        if (fs::exists(scene_dir / name)) inputs.push_back(scene_dir / name);
    write_run_json(out_dir, "integrate", raw, inputs);
    std::cout << "wrote depth, trace, mesh and metric files to " << o.out << "\n";
    return 0;
}

int run_bench(const BenchOpts& o, const std::vector<std::string>& raw) {
    if (o.scenes.empty()) {
        std::cerr << "error: no scenes given\n";
        return 2;
    }
    const auto& known = SceneSpec::kinds();
    for (const std::string& kind : o.scenes)
        if (std::find(known.begin(), known.end(), kind) == known.end()) {
            std::cerr << "error: unknown scene '" << kind << "'\n";
            return 2;
        }
    std::vector<Method> methods;
    for (const std::string& name : o.methods) {
        try {
            methods.push_back(parse_method(name));
        } catch (const Error& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }
    }
    if (methods.empty()) {
        std::cerr << "error: no methods given\n";
        return 2;
    }
    o.hyper.validate();

    const std::vector<double> ks =
        o.sweep_k.empty() ? std::vector<double>{o.hyper.k} : o.sweep_k;
    const std::vector<double> lds =
        o.sweep_lambda_d.empty() ? std::vector<double>{o.hyper.lambda_d} : o.sweep_lambda_d;
    const std::vector<double> lss =
        o.sweep_lambda_s.empty() ? std::vector<double>{o.hyper.lambda_s} : o.sweep_lambda_s;

    const double pitch = o.pitch > 0.0 ? o.pitch : kSuiteExtent / o.res;
    const double delta = o.delta >= 0.0 ? o.delta : 0.5 * pitch;

    std::vector<BenchTask> tasks;
    for (std::size_t i = 0; i < o.scenes.size(); ++i) {
        SceneSpec spec = SceneSpec::with_defaults(o.scenes[i], o.res, pitch);
        spec.prior_kind = o.prior;
        spec.prior_delta = delta;
        spec.prior_erosion_px = o.erosion;
        spec.noise_deg = o.noise;
        spec.seed = o.seed + i;
        spec.nz_margin = o.nz_margin;
        for (Method m : methods)
            for (double k : ks)
                for (double ld : lds)
                    for (double ls : lss) {
                        BenchTask task{spec, m, o.hyper, Anchor::mean};
                        task.hyper.k = k;
                        task.hyper.lambda_d = ld;
                        task.hyper.lambda_s = ls;
                        tasks.push_back(task);
                    }
    }

    std::vector<BenchRow> rows(tasks.size());
    std::vector<IntegrateOutput> keeps(tasks.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            rows[i] = run_bench_task(tasks[i], &keeps[i]);
        }
    };
    if (o.jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        const int threads = std::min<int>(o.jobs, static_cast<int>(tasks.size()));
        for (int j = 0; j < threads; ++j) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    // Deterministic output order regardless of --jobs scheduling.
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const BenchRow& x = rows[a];
        const BenchRow& y = rows[b];
        return std::tie(x.scene, x.method, x.hyper.k, x.hyper.lambda_d, x.hyper.lambda_s) <
               std::tie(y.scene, y.method, y.hyper.k, y.hyper.lambda_d, y.hyper.lambda_s);
    });

    const fs::path out_dir = o.out;
    fs::create_directories(out_dir);
    std::vector<BenchRow> sorted;
    sorted.reserve(rows.size());
    int ok_count = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const std::size_t i = order[rank];
        sorted.push_back(rows[i]);
        const BenchRow& row = rows[i];
        std::printf("%-22s %-6s %-7s rmse=%-12.6g wall=%.0fms\n", row.scene.c_str(),
                    row.method.c_str(), row.status.c_str(), row.metrics.rmse, row.wall_ms);
        if (row.status != "ok") continue;
        ++ok_count;
        const SceneBundle bundle = generate_scene(tasks[i].spec);
        const ScalarField2D zf = rasterize(keeps[i].zf, bundle.domain);
        const ScalarField2D zb = rasterize(keeps[i].zb, bundle.domain);
        const TriangleMesh mesh_f = depth_to_mesh(zf, bundle.domain, SheetSide::front);
        const TriangleMesh mesh_b = depth_to_mesh(zb, bundle.domain, SheetSide::back);
        const TriangleMesh fused = zipper(mesh_f, mesh_b, bundle.domain);
        char name[128];
        std::snprintf(name, sizeof(name), "row%02zu_%s_%s.ply", rank, row.scene.c_str(),
                      row.method.c_str());
        write_ply(fused, out_dir / name);
    }
    {
        std::ofstream csv(out_dir / "bench.csv", std::ios::binary);
        csv << bench_csv(sorted);
    }
    write_run_json(out_dir, "bench", raw, {});
    std::cout << "bench: " << ok_count << "/" << tasks.size() << " tasks ok, wrote "
              << (out_dir / "bench.csv") << "\n";
    return ok_count > 0 ? 0 : 1;
}

int run_mesh(const MeshOpts& o, const std::vector<std::string>& raw) {
    const MaskImage mask = read_mask_png(o.mask);
    const GridShape shape(mask.width, mask.height, o.pitch);
    const DomainMask domain = build_domain(
        shape, mask.values, std::vector<std::uint8_t>(shape.pixels(), 0));
    const ScalarField2D depth = read_pfm(o.depth, o.pitch);
    if (depth.shape != shape)
        throw ShapeMismatch("depth raster and mask disagree on the grid size");

    TriangleMesh mesh;
    if (!o.depth_back.empty()) {
        const ScalarField2D back = read_pfm(o.depth_back, o.pitch);
        if (back.shape != shape)
            throw ShapeMismatch("back depth raster and mask disagree on the grid size");
        ZipperReport report;
        mesh = zipper(depth_to_mesh(depth, domain, SheetSide::front),
                      depth_to_mesh(back, domain, SheetSide::back), domain, &report);
        std::cout << "fused mesh: watertight " << (report.watertight ? "yes" : "no")
                  << ", seam quads " << report.seam_quads << ", inversions "
                  << report.inversion_count << "\n";
    } else {
        mesh = depth_to_mesh(depth, domain,
                             o.side == "front" ? SheetSide::front : SheetSide::back);
    }
    const fs::path out = o.out;
    if (!write_mesh_by_extension(mesh, out)) {
        std::cerr << "error: unsupported mesh extension '" << out.extension().string()
                  << "'; use .ply or .obj\n";
        return 2;
    }
    std::vector<fs::path> inputs = {o.depth, o.mask};
    if (!o.depth_back.empty()) inputs.push_back(o.depth_back);
    write_run_json(out.parent_path().empty() ? "." : out.parent_path(), "mesh", raw,
                   inputs);
    std::cout << "wrote mesh (" << mesh.vertices.size() << " vertices, "
              << mesh.faces.size() << " faces) to " << o.out << "\n";
    return 0;
}

int run_metrics(const MetricsOpts& o, const std::vector<std::string>& raw) {
    const MaskImage mask = read_mask_png(o.mask);
    const GridShape shape(mask.width, mask.height, o.pitch);
    const DomainMask domain = build_domain(
        shape, mask.values, std::vector<std::uint8_t>(shape.pixels(), 0));
    const ScalarField2D est = read_pfm(o.estimate, o.pitch);
    const ScalarField2D ref = read_pfm(o.reference, o.pitch);
    if (est.shape != shape || ref.shape != shape)
        throw ShapeMismatch("metrics rasters and mask disagree on the grid size");
    const DepthMetrics m = depth_metrics(est, ref, domain, o.align);
    char line[128];
    std::snprintf(line, sizeof(line), "rmse=%.17g mae=%.17g aligned=%d", m.rmse, m.mae,
                  m.aligned ? 1 : 0);
    std::cout << line << "\n";
    if (!o.out.empty()) {
        std::ofstream csv(fs::path(o.out), std::ios::binary);
        csv << "rmse,mae,aligned\n";
        char row[128];
        std::snprintf(row, sizeof(row), "%.17g,%.17g,%d\n", m.rmse, m.mae,
                      m.aligned ? 1 : 0);
        csv << row;
        const fs::path parent = fs::path(o.out).parent_path();
        write_run_json(parent.empty() ? "." : parent, "metrics", raw,
                       {o.estimate, o.reference, o.mask});
    }
    return 0;
}

int run_rerun(const RerunOpts& o) {
    std::vector<std::string> args = read_run_argv(o.run_json);
    if (!args.empty() && args.front() == "rerun")
        throw Error("run.json stores a rerun invocation; refusing to recurse");
    if (o.out_set) {
        bool replaced = false;
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (args[i] == "--out" && i + 1 < args.size()) {
                args[i + 1] = o.out;
                replaced = true;
            } else if (args[i].rfind("--out=", 0) == 0) {
                args[i] = "--out=" + o.out;
                replaced = true;
            }
        }
        if (!replaced) {
            args.push_back("--out");
            args.push_back(o.out);
        }
    }
    return dispatch(args);
}

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"front/back depth sheet integration from normal maps"};
    app.require_subcommand(1);

    SynthOpts so;
    CLI::App* synth = app.add_subcommand("synth", "generate an analytic scene directory");
    synth->add_option("--shape", so.shape, "scene kind")
        ->required()
        ->check(CLI::IsMember(SceneSpec::kinds()));
    synth->add_option("--res", so.res, "grid size (pixels per side)")
        ->check(CLI::Range(8, 8192));
    synth->add_option("--pitch", so.pitch, "pixel spacing in scene units")
        ->check(CLI::PositiveNumber);
    synth->add_option("--out", so.out, "output directory")->required();
    CLI::Option* radius_opt =
        synth->add_option("--radius", so.radius, "radius override for shapes with 'r'");
    synth->add_option("--param", so.params, "geometry override, name=value; repeatable");
    synth->add_option("--prior", so.prior, "depth prior construction")
        ->check(CLI::IsMember({"exact", "eroded_offset", "inscribed_primitive"}));
    synth->add_option("--delta", so.delta, "prior push-back distance (eroded_offset)");
    synth->add_option("--erosion", so.erosion, "prior mask erosion rounds")
        ->check(CLI::NonNegativeNumber);
    synth->add_option("--scale", so.scale, "inscribed primitive shrink factor")
        ->check(CLI::PositiveNumber);
    synth->add_option("--noise", so.noise, "normal noise stddev in degrees")
        ->check(CLI::NonNegativeNumber);
    synth->add_option("--seed", so.seed, "noise seed");
    synth->add_option("--nz-margin", so.nz_margin, "silhouette |n_z| trim threshold");

    const auto add_hyper = [](CLI::App* sub, Hyperparameters& h, std::string& preset) {
        sub->add_option("--lambda-d", h.lambda_d, "depth prior coupling");
        sub->add_option("--lambda-s", h.lambda_s, "front/back silhouette coupling");
        sub->add_option("--k", h.k, "one-sided weight steepness");
        sub->add_option("--max-outer-iters", h.max_outer_iters);
        sub->add_option("--energy-rel-tol", h.energy_rel_tol);
        sub->add_option("--cg-tol", h.cg_tol);
        sub->add_option("--cg-max-iters", h.cg_max_iters);
        sub->add_option("--preset", preset, "named defaults bundle")
            ->check(CLI::IsMember({"paper"}));
    };

    IntegrateOpts io;
    CLI::App* integrate =
        app.add_subcommand("integrate", "solve a scene directory for both depth sheets");
    integrate->add_option("--scene", io.scene, "scene directory")->required();
    integrate->add_option("--out", io.out, "output directory")->required();
    integrate->add_option("--method", io.method, "bini or dbini")
        ->check(CLI::IsMember({"bini", "dbini"}));
    integrate->add_option("--anchor", io.anchor, "gauge anchor for bini")
        ->check(CLI::IsMember({"none", "mean"}));
    add_hyper(integrate, io.hyper, io.preset);

    BenchOpts bo;
    CLI::App* bench = app.add_subcommand("bench", "run the scene suite and tabulate");
    bench->add_option("--out", bo.out, "output directory")->required();
    bench->add_option("--scenes", bo.scenes, "scene kinds")->delimiter(',');
    bench->add_option("--methods", bo.methods, "methods to run")->delimiter(',');
    bench->add_option("--res", bo.res, "grid size")->check(CLI::Range(8, 8192));
    bench->add_option("--pitch", bo.pitch, "pixel spacing; default 2/res")
        ->check(CLI::PositiveNumber);
    bench->add_option("--prior", bo.prior)
        ->check(CLI::IsMember({"exact", "eroded_offset", "inscribed_primitive"}));
    bench->add_option("--delta", bo.delta, "prior push-back distance; default pitch/2")
        ->check(CLI::NonNegativeNumber);
    bench->add_option("--erosion", bo.erosion)->check(CLI::NonNegativeNumber);
    bench->add_option("--noise", bo.noise, "normal noise stddev in degrees")
        ->check(CLI::NonNegativeNumber);
    bench->add_option("--seed", bo.seed, "base seed; scene i uses seed+i");
    bench->add_option("--nz-margin", bo.nz_margin);
    bench->add_option("--sweep-k", bo.sweep_k, "comma list of k values")->delimiter(',');
    bench->add_option("--sweep-lambda-d", bo.sweep_lambda_d)->delimiter(',');
    bench->add_option("--sweep-lambda-s", bo.sweep_lambda_s)->delimiter(',');
    bench->add_option("--jobs", bo.jobs, "worker threads")->check(CLI::PositiveNumber);
    add_hyper(bench, bo.hyper, bo.preset);

    MeshOpts mo;
    CLI::App* mesh = app.add_subcommand("mesh", "turn depth rasters into a mesh file");
    mesh->add_option("--depth", mo.depth, "front depth PFM")->required();
    mesh->add_option("--depth-back", mo.depth_back, "back depth PFM; fuses both sheets");
    mesh->add_option("--mask", mo.mask, "domain mask PNG")->required();
    mesh->add_option("--out", mo.out, "output .ply or .obj")->required();
    mesh->add_option("--pitch", mo.pitch)->check(CLI::PositiveNumber);
    mesh->add_option("--side", mo.side)->check(CLI::IsMember({"front", "back"}));

    MetricsOpts eo;
    CLI::App* metrics = app.add_subcommand("metrics", "compare two depth rasters");
    metrics->add_option("--estimate", eo.estimate, "estimate PFM")->required();
    metrics->add_option("--reference", eo.reference, "reference PFM")->required();
    metrics->add_option("--mask", eo.mask, "domain mask PNG")->required();
    metrics->add_option("--pitch", eo.pitch)->check(CLI::PositiveNumber);
    metrics->add_flag("--align", eo.align, "remove the mean offset first");
    metrics->add_option("--out", eo.out, "optional metrics CSV path");

    RerunOpts ro;
    CLI::App* rerun = app.add_subcommand("rerun", "replay a stored run.json");
    rerun->add_option("run_json", ro.run_json, "path to run.json")->required();
    CLI::Option* rerun_out =
        rerun->add_option("--out", ro.out, "redirect outputs to this directory");

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("dbini");
    for (const std::string& s : args) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    so.radius_set = radius_opt->count() > 0;
    ro.out_set = rerun_out->count() > 0;

    for (CLI::App* sub : {integrate, bench}) {
        if (!sub->parsed() || sub->count("--preset") == 0) continue;
        for (const char* flag : {"--lambda-d", "--lambda-s", "--k", "--max-outer-iters",
                                 "--energy-rel-tol", "--cg-tol", "--cg-max-iters"}) {
            if (sub->count(flag) == 0) continue;
            std::cerr << "error: --preset conflicts with " << flag
                      << "; pass the preset or explicit values, not both\n";
            return 2;
        }
    }

    try {
        if (synth->parsed()) return run_synth(so, args);
        if (integrate->parsed()) return run_integrate(io, args);
        if (bench->parsed()) return run_bench(bo, args);
        if (mesh->parsed()) return run_mesh(mo, args);
        if (metrics->parsed()) return run_metrics(eo, args);
        if (rerun->parsed()) return run_rerun(ro);
    } catch (const SceneOutOfBounds& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    return dispatch(args);
}
