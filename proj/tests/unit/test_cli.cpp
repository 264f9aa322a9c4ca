#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lamina/cli.hpp"

using namespace lamina;
namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("lamina_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

fs::path write_config(const fs::path& dir, const std::string& name, const Json& j) {
    const fs::path p = dir / name;
    std::ofstream(p) << j.dump(2);
    return p;
}

Json read_json(const fs::path& p) {
    std::ifstream in(p);
    return Json::parse(in);
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunOptions options(const fs::path& config) {
    RunOptions o;
    o.config = config;
    return o;
}

Json sphere_fixture(int subdivision) {
    return {{"kind", "sphere-pair"}, {"inner_radius", 1.0}, {"outer_radius", 2.0}, {"subdivision", subdivision}};
}

Json acceptance_registration() {
    return {{"kernel_width", 1.0},      {"varifold_width", 1.0}, {"attachment_weight", 1000.0},
            {"tol_constraint", 1e-3},   {"tol_gradient", 1e-4}};
}

}  // namespace

TEST_CASE("synth writes meshes, oracle and summary") {
    const fs::path d = fresh_dir("synth");
    const auto cfg = write_config(d, "synth.json", {{"fixture", sphere_fixture(1)}, {"output_dir", "out"}});
    CHECK(run_synth(options(cfg)) == kExitOk);
    for (const char* f : {"inner.vtk", "outer.vtk", "oracle.json", "run_summary.json"}) CHECK(fs::exists(d / "out" / f));
    const Json s = read_json(d / "out" / "run_summary.json");
    CHECK(s.at("status") == "ok");
    CHECK(s.at("exit_code") == 0);
    CHECK(s.at("config").at("fixture").at("subdivision") == 1);
    CHECK(s.contains("timings"));
    CHECK(s.at("version") == kVersion);
}

TEST_CASE("config errors exit 2 and still write a summary") {
    const fs::path d = fresh_dir("config_errors");
    SUBCASE("missing mesh path names the key") {
        const auto cfg = write_config(d, "reg.json",
                                      {{"inner", "nowhere/inner.vtk"}, {"outer", "outer.vtk"},
                                       {"registration", acceptance_registration()}});
        CHECK(run_register(options(cfg)) == kExitConfig);
        const Json s = read_json(d / "run_summary.json");
        CHECK(s.at("status") == "config_error");
        CHECK(s.at("error").get<std::string>().find("'inner'") != std::string::npos);
    }
    SUBCASE("unknown key") {
        const auto cfg = write_config(d, "synth.json", {{"fixture", sphere_fixture(0)}, {"fixtrue", 1}});
        CHECK(run_synth(options(cfg)) == kExitConfig);
        CHECK(read_json(d / "run_summary.json").at("error").get<std::string>().find("fixtrue") != std::string::npos);
    }
    SUBCASE("unreadable config") {
        RunOptions o = options(d / "absent.json");
        o.out = d / "out";
        CHECK(run_levelset(o) == kExitConfig);
        CHECK(fs::exists(d / "out" / "run_summary.json"));
    }
    SUBCASE("unknown subcommand") { CHECK(run_subcommand("frobnicate", options(d / "x.json")) == kExitConfig); }
}

TEST_CASE("numerical failure exits 3 with a diagnostic dump") {
    const fs::path d = fresh_dir("numerical");
    REQUIRE(run_synth(options(write_config(d, "synth.json", {{"fixture", sphere_fixture(1)}}))) == kExitOk);
    // a grid coarser than the shell has no ribbon voxels to solve on
    const auto cfg = write_config(d, "ls.json", {{"inner", "inner.vtk"}, {"outer", "outer.vtk"}, {"spacing", 7.0},
                                                 {"output_dir", "ls"}});
    CHECK(run_levelset(options(cfg)) == kExitNumerical);
    const Json s = read_json(d / "ls" / "run_summary.json");
    CHECK(s.at("status") == "numerical_error");
    CHECK(fs::exists(s.at("diagnostic_dump").get<std::string>()));
}

TEST_CASE("register with inner = outer runs one outer iteration") {
    const fs::path d = fresh_dir("identity");
    REQUIRE(run_synth(options(write_config(d, "synth.json", {{"fixture", sphere_fixture(1)}}))) == kExitOk);
    Json reg = acceptance_registration();
    const auto cfg = write_config(d, "reg.json", {{"inner", "inner.vtk"}, {"outer", "inner.vtk"}, {"registration", reg},
                                                  {"output_dir", "reg"}});
    CHECK(run_register(options(cfg)) == kExitOk);
    const Json s = read_json(d / "reg" / "run_summary.json");
    const Json& conv = s.at("convergence");
    CHECK(conv.at("converged").get<bool>());
    CHECK(conv.at("outer_iterations").size() == 1);
    CHECK(conv.at("outer_iterations").back().at("kinetic").get<double>() < 1e-8);
    CHECK(fs::exists(d / "reg" / "flow.json"));
    CHECK(read_text(d / "reg" / "performance.csv").rfind("vertices,faces,outer_iterations", 0) == 0);
}

TEST_CASE("full sphere pipeline") {
    const fs::path d = fresh_dir("pipeline");
    REQUIRE(run_synth(options(write_config(d, "synth.json", {{"fixture", sphere_fixture(3)}}))) == kExitOk);
    REQUIRE(run_register(options(write_config(d, "reg.json", {{"inner", "inner.vtk"},
                                                              {"outer", "outer.vtk"},
                                                              {"registration", acceptance_registration()}}))) ==
            kExitOk);
    REQUIRE(run_laminar(options(write_config(d, "lam.json", {{"flow", "flow.json"}, {"output_dir", "lam"}}))) ==
            kExitOk);
    for (const char* f : {"streamlines.vtk", "seeds.csv", "inner_thickness.vtk", "layer_0.500.vtk"}) {
        CHECK(fs::exists(d / "lam" / f));
    }
    REQUIRE(run_metrics(options(write_config(
                d, "met.json", {{"inner", "inner.vtk"}, {"outer", "outer.vtk"}, {"flow", "flow.json"},
                                {"output_dir", "met"}}))) == kExitOk);

    std::ifstream in(d / "met" / "thickness.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "index,distance");
    double sum = 0.0;
    int n = 0;
    while (std::getline(in, line)) {
        sum += std::stod(line.substr(line.find(',') + 1));
        ++n;
    }
    REQUIRE(n > 0);
    const double mean = sum / n;
    MESSAGE("mean thickness " << mean << " over " << n << " seeds");
    CHECK(mean >= 0.99);
    CHECK(mean <= 1.01);

    const auto cmp = write_config(d, "cmp.json", {{"distributions", Json::array({
                                                       {{"name", "fs"}, {"kind", "fs_distance"}, {"csv", "met/fs_distance.csv"}},
                                                       {{"name", "flow"}, {"kind", "thickness"}, {"csv", "met/thickness.csv"}},
                                                   })},
                                                  {"output_dir", "cmp"}});
    CHECK(run_compare(options(cmp)) == kExitOk);
    const Json report = read_json(d / "cmp" / "compare.json");
    CHECK(report.at("pairs").size() == 1);
    CHECK(report.contains("underestimates"));
}

TEST_CASE("identical configs give byte-identical outputs") {
    const fs::path d = fresh_dir("repro");
    const Json fixture = {{"kind", "sphere-pair"}, {"subdivision", 2}, {"inner_jitter", 0.2}, {"seed", 5}};
    REQUIRE(run_synth(options(write_config(d, "a.json", {{"fixture", fixture}, {"output_dir", "a"}, {"format", "off"}}))) ==
            kExitOk);
    REQUIRE(run_synth(options(write_config(d, "b.json", {{"fixture", fixture}, {"output_dir", "b"}, {"format", "off"}}))) ==
            kExitOk);
    CHECK(read_text(d / "a" / "inner.off") == read_text(d / "b" / "inner.off"));
    const auto ma = write_config(d, "ma.json", {{"inner", "a/inner.off"}, {"outer", "a/outer.off"}, {"output_dir", "ma"}});
    const auto mb = write_config(d, "mb.json", {{"inner", "b/inner.off"}, {"outer", "b/outer.off"}, {"output_dir", "mb"}});
    REQUIRE(run_metrics(options(ma)) == kExitOk);
    REQUIRE(run_metrics(options(mb)) == kExitOk);
    CHECK(read_text(d / "ma" / "fs_distance.csv") == read_text(d / "mb" / "fs_distance.csv"));

    RunOptions seeded = options(write_config(d, "c.json", {{"fixture", fixture}, {"output_dir", "c"}, {"format", "off"}}));
    seeded.seed = 6;
    REQUIRE(run_synth(seeded) == kExitOk);
    CHECK(read_text(d / "c" / "inner.off") != read_text(d / "a" / "inner.off"));
}
