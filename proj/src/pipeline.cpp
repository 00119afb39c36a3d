#include "dbini/pipeline.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "dbini/image_io.hpp"

namespace dbini {

namespace {

using nlohmann::json;

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

std::string format_compact(double v) {
    char buf[64];
    if (v == 0.0) return "0";
    if (std::isfinite(v) && v == std::floor(v) && std::fabs(v) < 1e15) {
        std::snprintf(buf, sizeof(buf), "%.0f", v);
        return buf;
    }
    if (std::isfinite(v)) {
        const int e = static_cast<int>(std::floor(std::log10(std::fabs(v))));
        for (int cand = e - 1; cand <= e + 1; ++cand) {
            std::snprintf(buf, sizeof(buf), "%se%d", v < 0.0 ? "-1" : "1", cand);
            if (std::strtod(buf, nullptr) == v) return buf;
        }
    }
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t hash_file(const std::filesystem::path& path) {
    const std::string bytes = read_text_file(path);
    return fnv1a64(bytes.data(), bytes.size());
}

std::string scene_spec_to_json(const SceneSpec& spec) {
    json j;
    j["version"] = 1;
    j["kind"] = spec.kind;
    j["grid"] = {{"width", spec.grid.width},
                 {"height", spec.grid.height},
                 {"pitch", spec.grid.pitch}};
    j["params"] = json::object();
    for (const auto& [key, value] : spec.params) j["params"][key] = value;
    j["prior"] = {{"kind", spec.prior_kind},
                  {"delta", spec.prior_delta},
                  {"erosion_px", spec.prior_erosion_px},
                  {"scale", spec.prior_scale}};
    j["noise_deg"] = spec.noise_deg;
    j["seed"] = spec.seed;
    j["nz_margin"] = spec.nz_margin;
    return j.dump(2) + "\n";
}

SceneSpec scene_spec_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        if (j.at("version").get<int>() != 1)
            throw Error("scene.json: unsupported version " +
                        std::to_string(j.at("version").get<int>()));
        SceneSpec spec;
        spec.kind = j.at("kind").get<std::string>();
        const json& g = j.at("grid");
        spec.grid = GridShape(g.at("width").get<int>(), g.at("height").get<int>(),
                              g.at("pitch").get<double>());
        for (const auto& [key, value] : j.at("params").items())
            spec.params[key] = value.get<double>();
        const json& p = j.at("prior");
        spec.prior_kind = p.at("kind").get<std::string>();
        spec.prior_delta = p.at("delta").get<double>();
        spec.prior_erosion_px = p.at("erosion_px").get<int>();
        spec.prior_scale = p.at("scale").get<double>();
        spec.noise_deg = j.at("noise_deg").get<double>();
        spec.seed = j.at("seed").get<std::uint64_t>();
        spec.nz_margin = j.at("nz_margin").get<double>();
        return spec;
    } catch (const json::exception& e) {
        throw Error(std::string("scene.json: ") + e.what());
    }
}

void save_scene(const SceneBundle& bundle, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_pfm3(dir / "normals_f.pfm", bundle.normals_front);
    write_pfm3(dir / "normals_b.pfm", bundle.normals_back);
    write_pfm(dir / "depth_f_gt.pfm", bundle.gt_front);
    write_pfm(dir / "depth_b_gt.pfm", bundle.gt_back);
    write_pfm(dir / "prior_f.pfm", bundle.prior_front);
    write_pfm(dir / "prior_b.pfm", bundle.prior_back);
    const GridShape& g = bundle.spec.grid;
    write_mask_png(dir / "mask_n.png", g.width, g.height, bundle.domain.omega_n);
    write_mask_png(dir / "mask_z.png", g.width, g.height, bundle.domain.omega_z);
    write_text_file(dir / "scene.json", scene_spec_to_json(bundle.spec));
}

namespace {

void check_raster_shape(const GridShape& got, const GridShape& want,
                        const std::string& name) {
    if (got.width != want.width || got.height != want.height)
        throw ShapeMismatch(name + ": raster is " + std::to_string(got.width) + "x" +
                            std::to_string(got.height) + ", scene.json says " +
                            std::to_string(want.width) + "x" + std::to_string(want.height));
}

}  // namespace

SceneBundle load_scene(const std::filesystem::path& dir) {
    SceneBundle bundle;
    bundle.spec = scene_spec_from_json(read_text_file(dir / "scene.json"));
    const GridShape& g = bundle.spec.grid;

    bundle.normals_front = read_pfm3(dir / "normals_f.pfm", g.pitch);
    bundle.normals_back = read_pfm3(dir / "normals_b.pfm", g.pitch);
    check_raster_shape(bundle.normals_front.shape, g, "normals_f.pfm");
    check_raster_shape(bundle.normals_back.shape, g, "normals_b.pfm");
    for (auto* field : {&bundle.normals_front, &bundle.normals_back})
        for (Vec3& v : field->values)
            if (v.norm() > 0.0) v = v.normalized();

    for (auto* field : {&bundle.gt_front, &bundle.gt_back}) {
        const char* name = field == &bundle.gt_front ? "depth_f_gt.pfm" : "depth_b_gt.pfm";
        if (std::filesystem::exists(dir / name)) {
            *field = read_pfm(dir / name, g.pitch);
            check_raster_shape(field->shape, g, name);
        } else {
            *field = ScalarField2D(g, kOutOfDomain);
        }
    }
    bundle.prior_front = read_pfm(dir / "prior_f.pfm", g.pitch);
    bundle.prior_back = read_pfm(dir / "prior_b.pfm", g.pitch);
    check_raster_shape(bundle.prior_front.shape, g, "prior_f.pfm");
    check_raster_shape(bundle.prior_back.shape, g, "prior_b.pfm");

    const MaskImage mn = read_mask_png(dir / "mask_n.png");
    const MaskImage mz = read_mask_png(dir / "mask_z.png");
    if (mn.width != g.width || mn.height != g.height)
        throw ShapeMismatch("mask_n.png does not match scene.json grid");
    if (mz.width != g.width || mz.height != g.height)
        throw ShapeMismatch("mask_z.png does not match scene.json grid");
    bundle.domain = build_domain(g, mn.values, mz.values);
    validate_normals(bundle.normals_front, bundle.domain);
    validate_normals(bundle.normals_back, bundle.domain);
    return bundle;
}

Method parse_method(const std::string& name) {
    if (name == "bini") return Method::bini;
    if (name == "dbini") return Method::dbini;
    throw Error("unknown method: " + name + " (expected bini or dbini)");
}

std::string method_name(Method m) { return m == Method::bini ? "bini" : "dbini"; }

VectorField2D noisy_front(const SceneBundle& bundle) {
    if (!(bundle.spec.noise_deg > 0.0)) return bundle.normals_front;
    return perturb_normals(bundle.normals_front, bundle.spec.noise_deg,
                           2 * bundle.spec.seed);
}

VectorField2D noisy_back(const SceneBundle& bundle) {
    if (!(bundle.spec.noise_deg > 0.0)) return bundle.normals_back;
    return perturb_normals(bundle.normals_back, bundle.spec.noise_deg,
                           2 * bundle.spec.seed + 1);
}

namespace {

// Evaluation-time gauge fix for bini: shift each component so its mean over
// the prior pixels matches the prior. Components without prior pixels keep
// their zero-mean anchor.
void align_to_prior(std::vector<double>& z, const ScalarField2D& prior,
                    const DomainMask& domain) {
    std::vector<double> sum(domain.component_count, 0.0);
    std::vector<int> count(domain.component_count, 0);
    for (int i = 0; i < domain.n(); ++i) {
        const int pix = domain.index_to_pixel[i];
        if (!domain.omega_z[pix] || !std::isfinite(prior.values[pix])) continue;
        const int c = domain.component_id[pix];
        sum[c] += prior.values[pix] - z[i];
        ++count[c];
    }
    for (int i = 0; i < domain.n(); ++i) {
        const int c = domain.component_id[domain.index_to_pixel[i]];
        if (count[c] > 0) z[i] += sum[c] / count[c];
    }
}

}  // namespace

IntegrateOutput run_method(const SceneBundle& bundle, const VectorField2D& nf,
                           const VectorField2D& nb, Method method,
                           const Hyperparameters& hyper, Anchor anchor) {
    IntegrateOutput out;
    if (method == Method::dbini) {
        DbiniProblem prob;
        prob.normals_front = nf;
        prob.normals_back = nb;
        prob.prior_front = bundle.prior_front;
        prob.prior_back = bundle.prior_back;
        prob.domain = bundle.domain;
        DbiniSolution sol = dbini_optimize(prob, hyper);
        out.zf = std::move(sol.zf);
        out.zb = std::move(sol.zb);
        out.trace = std::move(sol.trace);
        out.outer_iterations = sol.outer_iterations;
        out.converged = sol.converged;
    } else {
        BiniSolution front = bini_optimize(nf, bundle.domain, hyper, anchor);
        BiniSolution back = bini_optimize(nb, bundle.domain, hyper, anchor);
        out.zf = std::move(front.z);
        out.zb = std::move(back.z);
        align_to_prior(out.zf, bundle.prior_front, bundle.domain);
        align_to_prior(out.zb, bundle.prior_back, bundle.domain);
        out.trace = std::move(front.trace);
        out.trace_back = std::move(back.trace);
        out.outer_iterations = std::max(front.outer_iterations, back.outer_iterations);
        out.converged = front.converged && back.converged;
    }
    for (int i = 0; i < bundle.domain.n(); ++i)
        if (out.zf[i] > out.zb[i]) ++out.inversion_count;
    return out;
}

double max_gradient(const std::vector<double>& z, const DomainMask& domain) {
    double worst = 0.0;
    for (int i = 0; i < domain.n(); ++i) {
        const int pix = domain.index_to_pixel[i];
        const int u = pix % domain.shape.width;
        const int v = pix / domain.shape.width;
        for (const auto& [du, dv] : std::array<std::array<int, 2>, 2>{{{1, 0}, {0, 1}}}) {
            if (!domain.in_domain(u + du, v + dv)) continue;
            const int j = domain.index_at(u + du, v + dv);
            worst = std::max(worst, std::fabs(z[j] - z[i]) / domain.shape.pitch);
        }
    }
    return worst;
}

double boundary_gap(const std::vector<double>& zf, const std::vector<double>& zb,
                    const DomainMask& domain) {
    double worst = 0.0;
    for (int i = 0; i < domain.n(); ++i)
        if (domain.boundary[domain.index_to_pixel[i]])
            worst = std::max(worst, std::fabs(zf[i] - zb[i]));
    return worst;
}

namespace {

void accumulate_metrics(const std::vector<double>& diffs, double* rmse, double* mae,
                        double* rmse_aligned, double* mae_aligned) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (diffs.empty()) {
        *rmse = *mae = *rmse_aligned = *mae_aligned = nan;
        return;
    }
    double mean = 0.0;
    for (double d : diffs) mean += d;
    mean /= static_cast<double>(diffs.size());
    double sq = 0.0, ab = 0.0, sq_c = 0.0, ab_c = 0.0;
    for (double d : diffs) {
        sq += d * d;
        ab += std::fabs(d);
        const double c = d - mean;
        sq_c += c * c;
        ab_c += std::fabs(c);
    }
    const double n = static_cast<double>(diffs.size());
    *rmse = std::sqrt(sq / n);
    *mae = ab / n;
    *rmse_aligned = std::sqrt(sq_c / n);
    *mae_aligned = ab_c / n;
}

void collect_diffs(const std::vector<double>& z, const ScalarField2D& gt,
                   const DomainMask& domain, std::vector<double>& diffs) {
    for (int i = 0; i < domain.n(); ++i) {
        const double g = gt.values[domain.index_to_pixel[i]];
        if (std::isfinite(g) && std::isfinite(z[i])) diffs.push_back(z[i] - g);
    }
}

}  // namespace

PooledMetrics pooled_metrics(const SceneBundle& bundle, const std::vector<double>& zf,
                             const std::vector<double>& zb) {
    std::vector<double> diffs;
    collect_diffs(zf, bundle.gt_front, bundle.domain, diffs);
    collect_diffs(zb, bundle.gt_back, bundle.domain, diffs);
    PooledMetrics m;
    accumulate_metrics(diffs, &m.rmse, &m.mae, &m.rmse_aligned, &m.mae_aligned);
    return m;
}

std::vector<SceneSpec> default_suite() {
    // Scenes sized to ~2 scene units across, the scale at which k = 2 keeps
    // the one-sided weights out of saturation; larger scenes send the weight
    // arguments so far into the sigmoid tails that the outer loop can lock
    // into two-cycles at unlucky noisy rim pixels instead of converging.
    const std::array<const char*, 6> kinds = {"sphere",
                                              "ellipsoid",
                                              "capsule",
                                              "torus",
                                              "two_spheres_occluding",
                                              "step_relief"};
    std::vector<SceneSpec> suite;
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        const double pitch = kSuiteExtent / 128.0;
        SceneSpec spec = SceneSpec::with_defaults(kinds[i], 128, pitch);
        spec.prior_kind = "eroded_offset";
        spec.prior_delta = 0.5 * pitch;
        spec.prior_erosion_px = 2;
        spec.noise_deg = 5.0;
        spec.seed = 100 + i;
        suite.push_back(spec);
    }
    return suite;
}

BenchRow run_bench_task(const BenchTask& task, IntegrateOutput* keep) {
    BenchRow row;
    row.scene = task.spec.kind;
    row.method = method_name(task.method);
    row.hyper = task.hyper;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const SceneBundle bundle = generate_scene(task.spec);
        const VectorField2D nf = noisy_front(bundle);
        const VectorField2D nb = noisy_back(bundle);
        IntegrateOutput out = run_method(bundle, nf, nb, task.method, task.hyper,
                                         task.anchor);
        row.metrics = pooled_metrics(bundle, out.zf, out.zb);
        row.outer_iters = out.outer_iterations;
        row.converged = out.converged;
        row.inversion_count = out.inversion_count;
        row.max_grad = max_gradient(out.zf, bundle.domain);
        row.boundary_gap_max = boundary_gap(out.zf, out.zb, bundle.domain);
        if (keep) *keep = std::move(out);
    } catch (const std::exception& e) {
        row.status = "failed";
        row.note = e.what();
        for (char& c : row.note)
            if (c == ',' || c == '\n') c = ';';
    }
    row.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    return row;
}

void sort_rows(std::vector<BenchRow>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
        return std::tie(a.scene, a.method, a.hyper.k, a.hyper.lambda_d, a.hyper.lambda_s) <
               std::tie(b.scene, b.method, b.hyper.k, b.hyper.lambda_d, b.hyper.lambda_s);
    });
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream out;
    out << "scene,method,lambda_d,lambda_s,k,status,rmse,mae,rmse_aligned,"
           "mae_aligned,outer_iters,converged,inversion_count,max_grad,"
           "boundary_gap,wall_ms,note\n";
    for (const BenchRow& r : rows) {
        out << r.scene << ',' << r.method << ',' << format_compact(r.hyper.lambda_d)
            << ',' << format_compact(r.hyper.lambda_s) << ','
            << format_compact(r.hyper.k) << ',' << r.status << ','
            << fmt17(r.metrics.rmse) << ',' << fmt17(r.metrics.mae) << ','
            << fmt17(r.metrics.rmse_aligned) << ',' << fmt17(r.metrics.mae_aligned)
            << ',' << r.outer_iters << ',' << (r.converged ? 1 : 0) << ','
            << r.inversion_count << ',' << fmt17(r.max_grad) << ','
            << fmt17(r.boundary_gap_max) << ',' << fmt17(r.wall_ms) << ',' << r.note
            << '\n';
    }
    std::vector<std::string> methods;
    for (const BenchRow& r : rows)
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
            methods.push_back(r.method);
    std::sort(methods.begin(), methods.end());
    for (const std::string& m : methods) {
        double rmse = 0, mae = 0, rmse_a = 0, mae_a = 0, outer = 0, conv = 0, inv = 0,
               grad = 0, gap = 0, wall = 0;
        int n = 0;
        for (const BenchRow& r : rows) {
            if (r.method != m || r.status != "ok") continue;
            rmse += r.metrics.rmse;
            mae += r.metrics.mae;
            rmse_a += r.metrics.rmse_aligned;
            mae_a += r.metrics.mae_aligned;
            outer += r.outer_iters;
            conv += r.converged ? 1 : 0;
            inv += r.inversion_count;
            grad += r.max_grad;
            gap += r.boundary_gap_max;
            wall += r.wall_ms;
            ++n;
        }
        if (n == 0) continue;
        const double inv_n = 1.0 / n;
        out << "mean," << m << ",-,-,-,summary," << fmt17(rmse * inv_n) << ','
            << fmt17(mae * inv_n) << ',' << fmt17(rmse_a * inv_n) << ','
            << fmt17(mae_a * inv_n) << ',' << fmt17(outer * inv_n) << ','
            << fmt17(conv * inv_n) << ',' << fmt17(inv * inv_n) << ','
            << fmt17(grad * inv_n) << ',' << fmt17(gap * inv_n) << ','
            << fmt17(wall * inv_n) << ",\n";
    }
    return out.str();
}

std::string trace_csv(const std::vector<OuterIteration>& trace) {
    std::ostringstream out;
    out << "outer_iter,energy,cg_iters,cg_residual\n";
    for (std::size_t i = 0; i < trace.size(); ++i)
        out << (i + 1) << ',' << fmt17(trace[i].energy) << ',' << trace[i].cg.iterations
            << ',' << fmt17(trace[i].cg.relative_residual) << '\n';
    return out.str();
}

std::string metrics_csv(const std::string& scene, const std::string& method,
                        const Hyperparameters& hyper, const SceneBundle& bundle,
                        const IntegrateOutput& out) {
    std::vector<double> front, back, both;
    collect_diffs(out.zf, bundle.gt_front, bundle.domain, front);
    collect_diffs(out.zb, bundle.gt_back, bundle.domain, back);
    both = front;
    both.insert(both.end(), back.begin(), back.end());

    std::ostringstream csv;
    csv << "scene,method,sheet,aligned,lambda_d,lambda_s,k,rmse,mae,inversion_count\n";
    const auto emit = [&](const char* sheet, const std::vector<double>& diffs) {
        double rmse, mae, rmse_a, mae_a;
        accumulate_metrics(diffs, &rmse, &mae, &rmse_a, &mae_a);
        for (int aligned = 0; aligned < 2; ++aligned)
            csv << scene << ',' << method << ',' << sheet << ',' << aligned << ','
                << format_compact(hyper.lambda_d) << ',' << format_compact(hyper.lambda_s)
                << ',' << format_compact(hyper.k) << ','
                << fmt17(aligned ? rmse_a : rmse) << ',' << fmt17(aligned ? mae_a : mae)
                << ',' << out.inversion_count << '\n';
    };
    emit("front", front);
    emit("back", back);
    emit("both", both);
    return csv.str();
}

std::string hyper_echo(const Hyperparameters& hyper) {
    std::ostringstream out;
    out << "lambda_d=" << format_compact(hyper.lambda_d)
        << " lambda_s=" << format_compact(hyper.lambda_s)
        << " k=" << format_compact(hyper.k)
        << " max_outer_iters=" << hyper.max_outer_iters
        << " energy_rel_tol=" << format_compact(hyper.energy_rel_tol)
        << " cg_tol=" << format_compact(hyper.cg_tol)
        << " cg_max_iters=" << hyper.cg_max_iters;
    return out.str();
}

void write_run_json(const std::filesystem::path& dir, const std::string& subcommand,
                    const std::vector<std::string>& argv,
                    const std::vector<std::filesystem::path>& inputs) {
    json j;
    j["version"] = 1;
    j["subcommand"] = subcommand;
    j["argv"] = argv;
    json hashes = json::object();
    for (const auto& path : inputs) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "0x%016llx",
                      static_cast<unsigned long long>(hash_file(path)));
        hashes[path.string()] = buf;
    }
    j["input_hashes"] = hashes;
    write_text_file(dir / "run.json", j.dump(2) + "\n");
}

std::vector<std::string> read_run_argv(const std::filesystem::path& run_json) {
    const std::string text = read_text_file(run_json);
    try {
        const json j = json::parse(text);
        return j.at("argv").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw Error("run.json: " + std::string(e.what()));
    }
}

}  // namespace dbini
