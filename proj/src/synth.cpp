#include "lamina/synth.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <random>

#include "lamina/errors.hpp"
#include "lamina/geometry.hpp"

namespace lamina {

namespace {

constexpr double kPi = std::numbers::pi;

// Regular (around x along) grid on a tube; vertex (i, j) at angle 2 pi i / around and
// height index j. Faces wind so that e_theta x e_z points away from the axis.
TriMesh tube(int around, int along, double height, const std::function<double(double)>& radius_at, bool capped) {
    TriMesh m;
    for (int j = 0; j <= along; ++j) {
        const double z = -0.5 * height + height * j / along;
        for (int i = 0; i < around; ++i) {
            const double th = 2.0 * kPi * i / around;
            const double r = radius_at(th);
            m.vertices.emplace_back(r * std::cos(th), r * std::sin(th), z);
        }
    }
    auto id = [around](int i, int j) { return j * around + (i % around); };
    for (int j = 0; j < along; ++j) {
        for (int i = 0; i < around; ++i) {
            m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    if (capped) {
        const int bottom = static_cast<int>(m.vertices.size());
        m.vertices.emplace_back(0.0, 0.0, -0.5 * height);
        const int top = bottom + 1;
        m.vertices.emplace_back(0.0, 0.0, 0.5 * height);
        for (int i = 0; i < around; ++i) {
            m.faces.push_back({bottom, id(i + 1, 0), id(i, 0)});
            m.faces.push_back({top, id(i, along), id(i + 1, along)});
        }
    }
    return m;
}

// Square grid over [-extent/2, extent/2]^2 lifted by height(x, y); normals toward +z.
TriMesh sheet(int n, double extent, const std::function<Vec3(double, double)>& point) {
    TriMesh m;
    for (int j = 0; j <= n; ++j) {
        for (int i = 0; i <= n; ++i) {
            const double x = -0.5 * extent + extent * i / n;
            const double y = -0.5 * extent + extent * j / n;
            m.vertices.push_back(point(x, y));
        }
    }
    auto id = [n](int i, int j) { return j * (n + 1) + i; };
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    return m;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Random tangential displacement followed by projection back onto the analytic surface.
void jitter(TriMesh& mesh, double amount, std::uint64_t seed, const std::function<Vec3(const Vec3&)>& project) {
    if (amount <= 0.0) return;
    std::mt19937_64 rng(seed);
    const double step = amount * mean_edge_length(mesh);
    const auto normals = vertex_normals(mesh);
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        const Vec3& n = normals[v];
        const Vec3 t1 = n.unitOrthogonal();
        const Vec3 t2 = n.cross(t1);
        const double angle = 2.0 * kPi * uniform01(rng);
        const double radius = step * uniform01(rng);
        mesh.vertices[v] = project(mesh.vertices[v] + radius * (std::cos(angle) * t1 + std::sin(angle) * t2));
    }
}

double folded_height(const FixtureSpec& s, double x) { return s.amplitude * std::sin(2.0 * kPi * x / s.wavelength); }

Vec3 folded_normal(const FixtureSpec& s, double x) {
    const double slope = s.amplitude * (2.0 * kPi / s.wavelength) * std::cos(2.0 * kPi * x / s.wavelength);
    return Vec3(-slope, 0.0, 1.0).normalized();
}

}  // namespace

const char* to_string(FixtureKind kind) {
    switch (kind) {
        case FixtureKind::SpherePair: return "sphere-pair";
        case FixtureKind::CylinderPair: return "cylinder-pair";
        case FixtureKind::SheetPair: return "sheet-pair";
        case FixtureKind::FoldedSheetPair: return "folded-sheet-pair";
        case FixtureKind::FlowerTubePair: return "flower-tube-pair";
    }
    return "unknown";
}

FixtureKind fixture_kind_from_string(const std::string& name) {
    for (auto k : {FixtureKind::SpherePair, FixtureKind::CylinderPair, FixtureKind::SheetPair,
                   FixtureKind::FoldedSheetPair, FixtureKind::FlowerTubePair}) {
        if (name == to_string(k)) return k;
    }
    throw ConfigError("unknown fixture kind '" + name + "'");
}

void FixtureSpec::validate() const {
    auto require = [](bool ok, const char* msg) {
        if (!ok) throw ConfigError(std::string("fixture: ") + msg);
    };
    switch (kind) {
        case FixtureKind::SpherePair:
            require(inner_radius > 0.0 && outer_radius > inner_radius, "sphere radii need 0 < a < b");
            require(subdivision >= 0 && subdivision <= 7, "subdivision must lie in [0, 7]");
            break;
        case FixtureKind::CylinderPair:
            require(inner_radius > 0.0 && outer_radius > inner_radius, "cylinder radii need 0 < a < b");
            require(height > 0.0 && around >= 3 && along >= 1, "cylinder needs height > 0, around >= 3, along >= 1");
            break;
        case FixtureKind::SheetPair:
            require(separation > 0.0 && extent > 0.0 && resolution >= 1, "sheet needs separation, extent > 0");
            break;
        case FixtureKind::FoldedSheetPair:
            require(separation > 0.0 && extent > 0.0 && resolution >= 1, "folded sheet needs separation, extent > 0");
            require(wavelength > 0.0 && amplitude >= 0.0, "folded sheet needs wavelength > 0, amplitude >= 0");
            break;
        case FixtureKind::FlowerTubePair:
            require(inner_radius > 0.0 && outer_radius - std::abs(amplitude) > inner_radius,
                    "flower tube needs b - |A| > a");
            require(lobes >= 1 && height > 0.0 && around >= 3 && along >= 1, "flower tube needs lobes >= 1, height > 0");
            break;
    }
    require(inner_jitter >= 0.0 && inner_jitter < 0.5, "inner_jitter must lie in [0, 0.5)");
    if (inner_jitter > 0.0) {
        require(kind == FixtureKind::SpherePair || kind == FixtureKind::CylinderPair,
                "inner_jitter is only supported for sphere and cylinder pairs");
    }
}

TriMesh icosphere(int subdivision, double radius) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    TriMesh m;
    m.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                  {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto& v : m.vertices) v.normalize();
    m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
               {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
               {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (int s = 0; s < subdivision; ++s) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            const int idx = static_cast<int>(m.vertices.size());
            m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<Face> next;
        next.reserve(m.faces.size() * 4);
        for (const Face& f : m.faces) {
            const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        m.faces = std::move(next);
    }
    for (auto& v : m.vertices) v *= radius;
    return m;
}

Fixture generate(const FixtureSpec& spec) {
    spec.validate();
    Fixture fx;
    const double a = spec.inner_radius, b = spec.outer_radius;
    switch (spec.kind) {
        case FixtureKind::SpherePair: {
            fx.inner = icosphere(spec.subdivision, a);
            fx.outer = icosphere(spec.subdivision, b);
            jitter(fx.inner, spec.inner_jitter, spec.seed, [a](const Vec3& p) -> Vec3 { return a * p.normalized(); });
            break;
        }
        case FixtureKind::CylinderPair: {
            // Capped pairs stay nested by giving the outer tube the extra height of the shell.
            const double outer_height = spec.capped ? spec.height + 2.0 * (b - a) : spec.height;
            fx.inner = tube(spec.around, spec.along, spec.height, [a](double) { return a; }, spec.capped);
            fx.outer = tube(spec.around, spec.along, outer_height, [b](double) { return b; }, spec.capped);
            jitter(fx.inner, spec.inner_jitter, spec.seed, [a](const Vec3& p) {
                const double r = std::hypot(p.x(), p.y());
                return Vec3(a * p.x() / r, a * p.y() / r, p.z());
            });
            break;
        }
        case FixtureKind::SheetPair: {
            const double d = spec.separation;
            fx.inner = sheet(spec.resolution, spec.extent, [](double x, double y) { return Vec3(x, y, 0.0); });
            fx.outer = sheet(spec.resolution, spec.extent, [d](double x, double y) { return Vec3(x, y, d); });
            break;
        }
        case FixtureKind::FoldedSheetPair: {
            fx.inner = sheet(spec.resolution, spec.extent,
                             [&spec](double x, double y) { return Vec3(x, y, folded_height(spec, x)); });
            fx.outer = sheet(spec.resolution, spec.extent, [&spec](double x, double y) -> Vec3 {
                return Vec3(x, y, folded_height(spec, x)) + spec.separation * folded_normal(spec, x);
            });
            break;
        }
        case FixtureKind::FlowerTubePair: {
            const double amp = spec.amplitude;
            const int k = spec.lobes;
            const double outer_height = spec.capped ? spec.height + 2.0 * (b + std::abs(amp) - a) : spec.height;
            fx.inner = tube(spec.around, spec.along, spec.height, [a](double) { return a; }, spec.capped);
            fx.outer = tube(spec.around, spec.along, outer_height,
                            [b, amp, k](double th) { return b + amp * std::cos(k * th); }, spec.capped);
            break;
        }
    }
    validate(fx.inner);
    validate(fx.outer);
    if (!(min_vertex_to_surface_distance(fx.inner, fx.outer) > 0.0) ||
        !(min_vertex_to_surface_distance(fx.outer, fx.inner) > 0.0)) {
        throw ConfigError(std::string("fixture ") + to_string(spec.kind) + ": inner and outer surfaces intersect");
    }
    return fx;
}

double min_vertex_to_surface_distance(const TriMesh& a, const TriMesh& b) {
    const TriangleTree tree(a);
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& p : b.vertices) best = std::min(best, tree.distance(p));
    return best;
}

std::optional<double> oracle_thickness(const FixtureSpec& spec, const Vec3&) {
    switch (spec.kind) {
        case FixtureKind::SpherePair:
        case FixtureKind::CylinderPair: return spec.outer_radius - spec.inner_radius;
        case FixtureKind::SheetPair: return spec.separation;
        default: return std::nullopt;
    }
}

std::optional<double> oracle_layer_radius(const FixtureSpec& spec, double eps) {
    const double a = spec.inner_radius, b = spec.outer_radius;
    switch (spec.kind) {
        case FixtureKind::SpherePair: return std::cbrt(a * a * a + eps * (b * b * b - a * a * a));
        case FixtureKind::CylinderPair: return std::sqrt(a * a + eps * (b * b - a * a));
        case FixtureKind::SheetPair: return eps * spec.separation;
        default: return std::nullopt;
    }
}

std::optional<double> oracle_F(const FixtureSpec& spec, const Vec3& p) {
    const double a = spec.inner_radius, b = spec.outer_radius;
    switch (spec.kind) {
        case FixtureKind::SpherePair: {
            const double r = p.norm();
            return (1.0 / a - 1.0 / r) / (1.0 / a - 1.0 / b);
        }
        case FixtureKind::CylinderPair: {
            const double r = std::hypot(p.x(), p.y());
            return std::log(r / a) / std::log(b / a);
        }
        case FixtureKind::SheetPair: return p.z() / spec.separation;
        default: return std::nullopt;
    }
}

std::optional<double> oracle_inner_mean_curvature(const FixtureSpec& spec) {
    switch (spec.kind) {
        case FixtureKind::SpherePair: return -1.0 / spec.inner_radius;
        case FixtureKind::CylinderPair: return -0.5 / spec.inner_radius;
        case FixtureKind::SheetPair: return 0.0;
        default: return std::nullopt;
    }
}

nlohmann::json to_json(const FixtureSpec& s) {
    return {{"kind", to_string(s.kind)}, {"inner_radius", s.inner_radius}, {"outer_radius", s.outer_radius},
            {"subdivision", s.subdivision}, {"height", s.height}, {"around", s.around}, {"along", s.along},
            {"capped", s.capped}, {"separation", s.separation}, {"extent", s.extent}, {"resolution", s.resolution},
            {"amplitude", s.amplitude}, {"wavelength", s.wavelength}, {"lobes", s.lobes},
            {"inner_jitter", s.inner_jitter}, {"seed", s.seed}};
}

FixtureSpec fixture_spec_from_json(const nlohmann::json& j) {
    static const char* keys[] = {"kind",     "inner_radius", "outer_radius", "subdivision", "height",
                                 "around",   "along",        "capped",       "separation",  "extent",
                                 "resolution", "amplitude",  "wavelength",   "lobes",       "inner_jitter",
                                 "seed"};
    if (!j.is_object()) throw ConfigError("fixture spec must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (std::find_if(std::begin(keys), std::end(keys), [&](const char* k) { return key == k; }) == std::end(keys)) {
            throw ConfigError("unknown key '" + key + "' in fixture spec");
        }
    }
    FixtureSpec s;
    try {
        s.kind = fixture_kind_from_string(j.at("kind").get<std::string>());
        s.inner_radius = j.value("inner_radius", s.inner_radius);
        s.outer_radius = j.value("outer_radius", s.outer_radius);
        s.subdivision = j.value("subdivision", s.subdivision);
        s.height = j.value("height", s.height);
        s.around = j.value("around", s.around);
        s.along = j.value("along", s.along);
        s.capped = j.value("capped", s.capped);
        s.separation = j.value("separation", s.separation);
        s.extent = j.value("extent", s.extent);
        s.resolution = j.value("resolution", s.resolution);
        s.amplitude = j.value("amplitude", s.amplitude);
        s.wavelength = j.value("wavelength", s.wavelength);
        s.lobes = j.value("lobes", s.lobes);
        s.inner_jitter = j.value("inner_jitter", s.inner_jitter);
        s.seed = j.value("seed", s.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("fixture spec: ") + e.what());
    }
    s.validate();
    return s;
}

nlohmann::json oracle_json(const FixtureSpec& spec) {
    nlohmann::json o{{"fixture", to_json(spec)}};
    const double a = spec.inner_radius, b = spec.outer_radius;
    switch (spec.kind) {
        case FixtureKind::SpherePair:
            o["thickness"] = {{"formula", "b - a"}, {"value", b - a}};
            o["layer_radius"] = {{"formula", "cbrt(a^3 + eps*(b^3 - a^3))"},
                                 {"eps_0.5", *oracle_layer_radius(spec, 0.5)}};
            o["F"] = {{"formula", "(1/a - 1/r) / (1/a - 1/b)"}};
            o["inner_mean_curvature"] = {{"formula", "-1/a"}, {"value", -1.0 / a}};
            break;
        case FixtureKind::CylinderPair:
            o["thickness"] = {{"formula", "b - a"}, {"value", b - a}, {"note", "tube wall, away from ends"}};
            o["layer_radius"] = {{"formula", "sqrt(a^2 + eps*(b^2 - a^2))"},
                                 {"eps_0.5", *oracle_layer_radius(spec, 0.5)}};
            o["F"] = {{"formula", "ln(r/a) / ln(b/a)"}};
            o["inner_mean_curvature"] = {{"formula", "-1/(2a)"}, {"value", -0.5 / a}};
            break;
        case FixtureKind::SheetPair:
            o["thickness"] = {{"formula", "d"}, {"value", spec.separation}};
            o["layer_offset"] = {{"formula", "eps*d"}};
            o["time_change"] = {{"formula", "tau(t) = t"}};
            o["F"] = {{"formula", "z / d"}};
            o["inner_mean_curvature"] = {{"formula", "0"}, {"value", 0.0}};
            break;
        case FixtureKind::FoldedSheetPair:
            o["inner_surface"] = {{"formula", "z = A sin(2 pi x / L)"}};
            o["outer_surface"] = {{"formula", "inner + d * unit normal"}};
            o["thickness"] = nullptr;
            break;
        case FixtureKind::FlowerTubePair:
            o["outer_surface"] = {{"formula", "r(theta) = b + A cos(k theta)"}};
            o["thickness"] = nullptr;
            break;
    }
    return o;
}

}  // namespace lamina
