#include "lamina/cli.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include <omp.h>

#include "lamina/errors.hpp"
#include "lamina/flow_io.hpp"
#include "lamina/laminar.hpp"
#include "lamina/levelset.hpp"
#include "lamina/mesh_io.hpp"
#include "lamina/metrics.hpp"
#include "lamina/synth.hpp"

namespace fs = std::filesystem;

namespace lamina {

namespace {

using Clock = std::chrono::steady_clock;

// Shared bookkeeping for one subcommand run; the summary is written on every exit path.
class Run {
public:
    Run(std::string name, const RunOptions& opt) : name_(std::move(name)), opt_(opt), start_(Clock::now()) {
        summary_["subcommand"] = name_;
        summary_["version"] = kVersion;
        summary_["outputs"] = Json::array();
        summary_["partial"] = false;
        out_dir_ = opt.out ? *opt.out : (opt.config.has_parent_path() ? opt.config.parent_path() : fs::path("."));
        if (opt.threads) {
            if (*opt.threads < 1) throw ConfigError("--threads must be >= 1");
            omp_set_num_threads(*opt.threads);
        }
        summary_["threads"] = omp_get_max_threads();
    }

    // Loads the config, records it and resolves the output directory.
    const Json& load(std::initializer_list<const char*> allowed) {
        std::ifstream in(opt_.config);
        if (!in) throw ConfigError("cannot open config file '" + opt_.config.string() + "'");
        try {
            config_ = Json::parse(in);
        } catch (const Json::parse_error& e) {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        summary_["config"] = config_;
        reject_unknown_keys(config_, allowed, "config");
        if (!opt_.out && config_.contains("output_dir")) out_dir_ = resolve(config_.at("output_dir").get<std::string>());
        fs::create_directories(out_dir_);
        return config_;
    }

    fs::path resolve(const std::string& p) const {
        const fs::path path(p);
        if (path.is_absolute()) return path;
        return (opt_.config.has_parent_path() ? opt_.config.parent_path() : fs::path(".")) / path;
    }

    // Config path value that must exist.
    fs::path input(const char* key) const {
        if (!config_.contains(key)) throw ConfigError(std::string("missing required key '") + key + "'");
        const fs::path p = resolve(config_.at(key).get<std::string>());
        if (!fs::exists(p)) throw ConfigError(std::string("key '") + key + "': file '" + p.string() + "' not found");
        return p;
    }

    fs::path output(const std::string& name) {
        summary_["outputs"].push_back(name);
        return out_dir_ / name;
    }

    Json& summary() { return summary_; }
    const fs::path& out_dir() const { return out_dir_; }

    int finish(int code, const std::string& status, const std::string& message = {}) {
        summary_["status"] = status;
        summary_["exit_code"] = code;
        if (!message.empty()) summary_["error"] = message;
        if (code != kExitOk) summary_["partial"] = !summary_["outputs"].empty();
        summary_["timings"]["total_seconds"] = std::chrono::duration<double>(Clock::now() - start_).count();
        try {
            fs::create_directories(out_dir_);
            std::ofstream out(out_dir_ / "run_summary.json");
            out << std::setw(2) << summary_ << '\n';
        } catch (const std::exception& e) {
            std::cerr << "warning: could not write run_summary.json: " << e.what() << '\n';
        }
        return code;
    }

private:
    std::string name_;
    const RunOptions& opt_;
    Clock::time_point start_;
    Json config_;
    Json summary_;
    fs::path out_dir_;
};

template <class Body>
int guarded(const std::string& name, const RunOptions& opt, Body body) {
    std::optional<Run> run;
    try {
        run.emplace(name, opt);
        body(*run);
        return run->finish(kExitOk, "ok");
    } catch (const RegistrationAborted& e) {
        std::cerr << "error: " << e.what() << '\n';
        std::string dump;
        try {
            const fs::path p = run->output("failure_dump.json");
            std::ofstream out(p);
            out << to_json(e.state()) << '\n';
            dump = p.string();
            std::cerr << "diagnostic dump: " << dump << '\n';
            run->summary()["diagnostic_dump"] = dump;
        } catch (const std::exception&) {
        }
        return run->finish(kExitNumerical, "numerical_error", e.what());
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        if (run) {
            const fs::path p = run->out_dir() / "failure_dump.json";
            std::ofstream out(p);
            out << Json{{"error", e.what()}, {"subcommand", name}} << '\n';
            std::cerr << "diagnostic dump: " << p.string() << '\n';
            run->summary()["diagnostic_dump"] = p.string();
            return run->finish(kExitNumerical, "numerical_error", e.what());
        }
        return kExitNumerical;
    } catch (const DegenerateFaceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        if (run) {
            const fs::path p = run->out_dir() / "failure_dump.json";
            std::ofstream out(p);
            out << Json{{"error", e.what()}, {"face", e.face()}, {"step", e.step()}} << '\n';
            std::cerr << "diagnostic dump: " << p.string() << '\n';
            run->summary()["diagnostic_dump"] = p.string();
            return run->finish(kExitNumerical, "numerical_error", e.what());
        }
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        if (run) return run->finish(kExitConfig, "config_error", e.what());
        return kExitConfig;
    }
}

TriMesh load_input_mesh(const Run& run, const char* key) { return load_mesh(run.input(key)); }

std::vector<double> read_distance_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    std::string line;
    std::getline(in, line);
    std::vector<double> values;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        try {
            values.push_back(std::stod(comma == std::string::npos ? line : line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw ParseError("bad distance row in " + path.string(), lineno);
        }
    }
    return values;
}

void print_performance(const ConvergenceReport& r) {
    std::cout << std::left << std::setw(10) << "vertices" << std::setw(10) << "faces" << std::setw(8) << "outer"
              << std::setw(8) << "inner" << std::setw(8) << "evals" << "seconds\n";
    std::cout << std::setw(10) << r.vertices << std::setw(10) << r.faces << std::setw(8) << r.outer.size()
              << std::setw(8) << r.total_inner_iterations << std::setw(8) << r.total_evaluations << std::fixed
              << std::setprecision(2) << r.wall_seconds << '\n';
}

}  // namespace

int run_synth(const RunOptions& opt) {
    return guarded("synth", opt, [&](Run& run) {
        const Json& cfg = run.load({"fixture", "output_dir", "format"});
        if (!cfg.contains("fixture")) throw ConfigError("missing required key 'fixture'");
        FixtureSpec spec = fixture_spec_from_json(cfg.at("fixture"));
        if (opt.seed) spec.seed = *opt.seed;
        const std::string ext = cfg.value("format", std::string("vtk"));
        if (ext != "vtk" && ext != "off") throw ConfigError("key 'format' must be \"vtk\" or \"off\"");
        const Fixture fx = generate(spec);
        save_mesh(fx.inner, run.output("inner." + ext));
        save_mesh(fx.outer, run.output("outer." + ext));
        std::ofstream(run.output("oracle.json")) << std::setw(2) << oracle_json(spec) << '\n';
        run.summary()["fixture"] = to_json(spec);
        run.summary()["vertices"] = {fx.inner.num_vertices(), fx.outer.num_vertices()};
    });
}

int run_register(const RunOptions& opt) {
    return guarded("register", opt, [&](Run& run) {
        const Json& cfg = run.load({"inner", "outer", "registration", "output_dir"});
        if (!cfg.contains("registration")) throw ConfigError("missing required key 'registration'");
        const RegistrationConfig rc = registration_config_from_json(cfg.at("registration"));
        const TriMesh inner = load_input_mesh(run, "inner");
        const TriMesh outer = load_input_mesh(run, "outer");
        RegistrationResult res = optimize(rc, inner, outer);
        run.summary()["convergence"] = to_json(res.report);
        run.summary()["effective_registration"] = to_json(res.effective_config);
        save_checkpoint(run.output("flow.json"), Checkpoint{res.state, res.effective_config, outer});
        save_mesh(res.state.mesh_at(res.state.n_steps), run.output("endpoint.vtk"));
        {
            std::ofstream perf(run.output("performance.csv"));
            const auto& r = res.report;
            perf << "vertices,faces,outer_iterations,inner_iterations,evaluations,seconds\n";
            perf << r.vertices << ',' << r.faces << ',' << r.outer.size() << ',' << r.total_inner_iterations << ','
                 << r.total_evaluations << ',' << r.wall_seconds << '\n';
        }
        print_performance(res.report);
        if (!res.report.converged) std::cerr << "warning: registration did not meet its tolerances\n";
    });
}

int run_laminar(const RunOptions& opt) {
    return guarded("laminar", opt, [&](Run& run) {
        const Json& cfg = run.load({"flow", "layers", "sigma_method", "output_dir"});
        const Checkpoint cp = load_checkpoint(run.input("flow"));
        const std::string method = cfg.value("sigma_method", std::string("one-ring"));
        std::vector<double> layers = cfg.value("layers", std::vector<double>{0.25, 0.5, 0.75});
        LaminarSystem sys = streamlines_from_flow(cp.state);
        if (method == "one-ring") {
            sys.sigma = sigma_one_ring(cp.state);
        } else if (method == "zeta-ode") {
            sys.sigma = sigma_zeta_ode(cp.config.kernel, cp.state);
        } else {
            throw ConfigError("key 'sigma_method' must be \"one-ring\" or \"zeta-ode\"");
        }
        sys.thickness = thickness(sys);
        equivolumetric_time_change(sys);
        write_streamlines_vtk(sys, run.output("streamlines.vtk"));
        write_seed_table_csv(sys, run.output("seeds.csv"));
        TriMesh base = cp.state.mesh_at(0);
        base.point_scalars["thickness"] = sys.thickness;
        base.point_scalars["c0"] = sys.c0;
        save_mesh(base, run.output("inner_thickness.vtk"));
        Json layer_files = Json::array();
        for (double eps : layers) {
            std::ostringstream name;
            name << "layer_" << std::fixed << std::setprecision(3) << eps << ".vtk";
            save_mesh(extract_layer(sys, eps), run.output(name.str()));
            layer_files.push_back(name.str());
        }
        std::size_t flagged = 0;
        for (bool f : sys.flagged) flagged += f ? 1 : 0;
        const auto s = summarize(sys.thickness);
        run.summary()["laminar"] = {{"seeds", sys.num_seeds()}, {"flagged", flagged}, {"sigma_method", method},
                                    {"thickness", to_json(s)}, {"layers", layer_files}};
    });
}

int run_levelset(const RunOptions& opt) {
    return guarded("levelset", opt, [&](Run& run) {
        const Json& cfg = run.load({"inner", "outer", "spacing", "omega", "tolerance", "write_grid", "output_dir"});
        if (!cfg.contains("spacing")) throw ConfigError("missing required key 'spacing'");
        const TriMesh inner = load_input_mesh(run, "inner");
        const TriMesh outer = load_input_mesh(run, "outer");
        SorOptions sor;
        sor.omega = cfg.value("omega", sor.omega);
        sor.tolerance = cfg.value("tolerance", sor.tolerance);
        ScalarGrid grid = voxelize(inner, outer, cfg.at("spacing").get<double>());
        const auto t0 = Clock::now();
        const SorReport rep = solve_laplace(grid, sor);
        const double solve_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        if (cfg.value("write_grid", true)) write_grid_vtk(grid, run.output("grid.vtk"));
        const LevelSetField field(grid);
        PolylineSet lines;
        DistanceDistribution th;
        th.kind = "thickness";
        th.source = "levelset";
        std::vector<std::vector<Vec3>> traced(inner.num_vertices());
        std::vector<int> failed(inner.num_vertices(), 0);
#pragma omp parallel for schedule(dynamic, 16)
        for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(inner.num_vertices()); ++k) {
            try {
                traced[k] = levelset_streamline(field, inner.vertices[k]);
            } catch (const Error&) {
                failed[k] = 1;
            }
        }
        std::size_t n_failed = 0;
        std::vector<double> per_vertex(inner.num_vertices(), std::numeric_limits<double>::quiet_NaN());
        for (std::size_t k = 0; k < traced.size(); ++k) {
            if (failed[k]) {
                ++n_failed;
                continue;
            }
            per_vertex[k] = polyline_length(traced[k]);
            th.values.push_back(per_vertex[k]);
            lines.lines.push_back(std::move(traced[k]));
            lines.line_scalars["thickness"].push_back(per_vertex[k]);
        }
        th.excluded = n_failed;
        write_vtk_polylines(lines, run.output("streamlines.vtk"));
        {
            std::ofstream out(run.output("thickness.csv"));
            out.precision(17);
            out << "index,distance\n";
            for (std::size_t k = 0; k < per_vertex.size(); ++k) {
                if (!failed[k]) out << k << ',' << per_vertex[k] << '\n';
            }
        }
        run.summary()["levelset"] = {{"dims", grid.dims},
                                     {"ribbon_voxels", grid.count(VoxelLabel::Ribbon)},
                                     {"sor_sweeps", rep.sweeps},
                                     {"sor_last_update", rep.last_update},
                                     {"solve_seconds", solve_seconds},
                                     {"failed_seeds", n_failed},
                                     {"thickness", to_json(th.summary())}};
    });
}

int run_metrics(const RunOptions& opt) {
    return guarded("metrics", opt, [&](Run& run) {
        const Json& cfg = run.load({"inner", "outer", "flow", "squared", "bins", "output_dir"});
        const bool squared = opt.squared || cfg.value("squared", false);
        const int bins = cfg.value("bins", 50);
        Json result;
        if (cfg.contains("inner") || cfg.contains("outer")) {
            const TriMesh inner = load_input_mesh(run, "inner");
            const TriMesh outer = load_input_mesh(run, "outer");
            DistanceDistribution d = fs_distance(inner, outer, squared);
            write_distance_csv(d, run.output("fs_distance.csv"));
            write_cdf_csv(cdf(d.values, bins), run.output("fs_distance_cdf.csv"));
            result["fs_distance"] = to_json(d.summary());
            result["squared"] = squared;
        }
        if (cfg.contains("flow")) {
            const Checkpoint cp = load_checkpoint(run.input("flow"));
            LaminarSystem sys = streamlines_from_flow(cp.state);
            sys.sigma = sigma_one_ring(cp.state);
            sys.thickness = thickness(sys);
            equivolumetric_time_change(sys);
            const DistanceDistribution d = thickness_distribution(sys);
            {
                std::ofstream out(run.output("thickness.csv"));
                out.precision(17);
                out << "index,distance\n";
                for (std::size_t k = 0; k < sys.num_seeds(); ++k) {
                    if (!sys.flagged[k]) out << k << ',' << sys.thickness[k] << '\n';
                }
            }
            write_cdf_csv(cdf(d.values, bins), run.output("thickness_cdf.csv"));
            result["thickness"] = to_json(d.summary());
            result["thickness_excluded"] = d.excluded;
        }
        if (result.empty()) throw ConfigError("metrics needs 'inner' and 'outer', or 'flow'");
        run.summary()["metrics"] = result;
    });
}

int run_compare(const RunOptions& opt) {
    return guarded("compare", opt, [&](Run& run) {
        const Json& cfg = run.load({"distributions", "output_dir"});
        if (!cfg.contains("distributions") || !cfg.at("distributions").is_array()) {
            throw ConfigError("missing required key 'distributions' (array)");
        }
        std::vector<DistanceDistribution> dists;
        for (const Json& d : cfg.at("distributions")) {
            reject_unknown_keys(d, {"name", "kind", "csv"}, "distributions entry");
            if (!d.contains("csv")) throw ConfigError("distributions entry needs key 'csv'");
            const fs::path p = run.resolve(d.at("csv").get<std::string>());
            if (!fs::exists(p)) throw ConfigError("key 'csv': file '" + p.string() + "' not found");
            DistanceDistribution dd;
            dd.kind = d.value("kind", std::string("distance"));
            dd.source = d.value("name", p.stem().string());
            dd.values = read_distance_csv(p);
            dists.push_back(std::move(dd));
        }
        const Json report = compare_report(dists);
        std::ofstream(run.output("compare.json")) << std::setw(2) << report << '\n';
        write_compare_csv(report, run.output("compare.csv"));
        run.summary()["compare"] = report;
    });
}

int run_subcommand(const std::string& name, const RunOptions& options) {
    if (name == "synth") return run_synth(options);
    if (name == "register") return run_register(options);
    if (name == "laminar") return run_laminar(options);
    if (name == "levelset") return run_levelset(options);
    if (name == "metrics") return run_metrics(options);
    if (name == "compare") return run_compare(options);
    std::cerr << "error: unknown subcommand '" << name << "'\n";
    return kExitConfig;
}

}  // namespace lamina
