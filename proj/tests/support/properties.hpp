#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "lamina/kernel.hpp"
#include "lamina/laminar.hpp"
#include "lamina/levelset.hpp"
#include "lamina/mesh.hpp"
#include "lamina/metrics.hpp"
#include "lamina/registration.hpp"
#include "lamina/synth.hpp"
#include "lamina/varifold.hpp"
#include "support/flows.hpp"
#include "support/problems.hpp"
#include "support/support.hpp"

namespace lamina::testing {

/// One randomized case: returns an empty string on success, otherwise what went wrong.
using PropertyCase = std::function<std::string(Rng&)>;

struct Property {
    std::string name;
    int cases = 100;
    PropertyCase body;
};

struct PropertyOutcome {
    std::string name;
    int cases = 0;
    int passed = 0;
    std::string first_failure;
    double seconds = 0.0;

    bool ok() const { return passed == cases; }
};

inline PropertyOutcome run_property(const Property& p, std::uint64_t seed) {
    PropertyOutcome out{p.name, p.cases};
    const auto t0 = std::chrono::steady_clock::now();
    for (int c = 0; c < p.cases; ++c) {
        Rng rng(seed * 1000003ULL + static_cast<std::uint64_t>(c));
        std::string why;
        try {
            why = p.body(rng);
        } catch (const std::exception& e) {
            why = std::string("threw: ") + e.what();
        }
        if (why.empty()) {
            ++out.passed;
        } else if (out.first_failure.empty()) {
            out.first_failure = "case " + std::to_string(c) + ": " + why;
        }
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

namespace detail {

inline std::string mismatch(const char* what, double err, double tol) {
    if (err <= tol) return {};
    std::ostringstream s;
    s << what << " off by " << err << " (tolerance " << tol << ")";
    return s.str();
}

inline double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double max_norm(std::span<const Vec3> v) {
    double m = 0.0;
    for (const Vec3& x : v) m = std::max(m, x.norm());
    return m;
}

/// Relative max-norm distance between two scalar fields.
inline double field_error(std::span<const double> a, std::span<const double> b) {
    double e = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::abs(a[i] - b[i]));
    return e / std::max({max_abs(a), max_abs(b), 1e-300});
}

inline double field_error(std::span<const Vec3> a, std::span<const Vec3> b) {
    double e = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, (a[i] - b[i]).norm());
    return e / std::max({max_norm(a), max_norm(b), 1e-300});
}

inline std::vector<Vec3> rotate_all(std::span<const Vec3> v, const Mat3& r, const Vec3& t = Vec3::Zero()) {
    std::vector<Vec3> out;
    out.reserve(v.size());
    for (const Vec3& x : v) out.push_back(r * x + t);
    return out;
}

/// Closed bumpy sphere or open bumpy patch.
inline TriMesh random_surface(Rng& rng) {
    if (rng() % 2) return random_patch(rng, 3 + static_cast<int>(rng() % 3), uniform(rng, 0.5, 2.0), 0.15);
    TriMesh m = icosphere(static_cast<int>(1 + rng() % 2), uniform(rng, 0.5, 2.0));
    const Vec3 k = random_unit(rng);
    const double amp = uniform(rng, 0.0, 0.15), freq = uniform(rng, 1.0, 3.0);
    for (Vec3& v : m.vertices) v *= 1.0 + amp * std::sin(freq * k.dot(v.normalized()));
    return m;
}

inline KernelSpec random_kernel(Rng& rng) {
    KernelSpec k;
    const int n = 1 + static_cast<int>(rng() % 2);
    for (int j = 0; j < n; ++j) k.components.push_back({uniform(rng, 0.3, 1.5), uniform(rng, 0.5, 2.0)});
    return k;
}

inline std::vector<Vec3> random_points(Rng& rng, std::size_t n, double scale) {
    std::vector<Vec3> p(n);
    for (Vec3& x : p) x = random_vec(rng, scale);
    return p;
}

}  // namespace detail

// ---- mesh ---------------------------------------------------------------------------------

inline std::string mesh_orientation_flip(Rng& rng) {
    using namespace detail;
    const TriMesh m = random_surface(rng);
    const TriMesh f = flipped(m);
    const auto gm = face_geometry(m), gf = face_geometry(f);
    std::vector<Vec3> neg;
    for (const Vec3& n : gm.normal) neg.push_back(-n);
    if (auto e = mismatch("face normals", field_error(neg, gf.normal), 1e-14); !e.empty()) return e;
    neg.clear();
    for (const Vec3& n : vertex_normals(m)) neg.push_back(-n);
    if (auto e = mismatch("vertex normals", field_error(neg, vertex_normals(f)), 1e-14); !e.empty()) return e;
    std::vector<double> h = mean_curvature(m).H;
    for (double& x : h) x = -x;
    return mismatch("mean curvature", field_error(h, mean_curvature(f).H), 1e-12);
}

inline std::string mesh_rigid_motion(Rng& rng) {
    using namespace detail;
    const TriMesh m = random_surface(rng);
    const Mat3 r = random_rotation(rng);
    const Vec3 t = random_vec(rng, 5.0);
    const TriMesh w = transformed(m, r, t);
    const auto gm = face_geometry(m), gw = face_geometry(w);
    if (auto e = mismatch("face normals", field_error(rotate_all(gm.normal, r), gw.normal), 1e-10); !e.empty()) return e;
    if (auto e = mismatch("vertex normals", field_error(rotate_all(vertex_normals(m), r), vertex_normals(w)), 1e-10);
        !e.empty())
        return e;
    if (auto e = mismatch("face areas", field_error(gm.area, gw.area), 1e-10); !e.empty()) return e;
    if (auto e = mismatch("one-ring areas",
                          field_error(one_ring_areas(m.vertices, m.faces), one_ring_areas(w.vertices, w.faces)), 1e-10);
        !e.empty())
        return e;
    if (auto e = mismatch("mean curvature", field_error(mean_curvature(m).H, mean_curvature(w).H), 1e-10); !e.empty())
        return e;
    std::vector<Vec3> field(m.num_vertices());
    const Vec3 a = random_vec(rng), b = random_vec(rng);
    for (std::size_t i = 0; i < field.size(); ++i) field[i] = a * m.vertices[i].x() + b.cross(m.vertices[i]);
    return mismatch("surface divergence",
                    field_error(surface_divergence(m, field).div, surface_divergence(w, rotate_all(field, r)).div),
                    1e-10);
}

inline std::string mesh_scaling(Rng& rng) {
    using namespace detail;
    const TriMesh m = random_surface(rng);
    const double s = uniform(rng, 0.2, 5.0);
    const TriMesh w = transformed(m, s * Mat3::Identity(), Vec3::Zero());
    std::vector<double> area = face_geometry(m).area, h = mean_curvature(m).H;
    for (double& x : area) x *= s * s;
    for (double& x : h) x /= s;
    if (auto e = mismatch("areas", field_error(area, face_geometry(w).area), 1e-12); !e.empty()) return e;
    return mismatch("mean curvature", field_error(h, mean_curvature(w).H), 1e-10);
}

// ---- kernel -------------------------------------------------------------------------------

inline std::string kernel_reproducing(Rng& rng) {
    const KernelSpec k = detail::random_kernel(rng);
    const std::size_t n = 1 + rng() % 20;
    const auto q = detail::random_points(rng, n, 2.0), a = detail::random_points(rng, n, 1.0);
    const auto v = eval_velocity_at(k, q, a, q);
    double pairing = 0.0;
    for (std::size_t l = 0; l < n; ++l) pairing += a[l].dot(v[l]);
    return detail::mismatch("pairing vs norm", rel_diff(pairing, vnorm_sq(k, q, a)), 1e-12);
}

inline std::string kernel_translation(Rng& rng) {
    const KernelSpec k = detail::random_kernel(rng);
    const std::size_t n = 1 + rng() % 20;
    const auto q = detail::random_points(rng, n, 2.0), a = detail::random_points(rng, n, 1.0);
    const Vec3 x = random_vec(rng, 2.5), s = random_vec(rng, 10.0);
    const auto qs = detail::rotate_all(q, Mat3::Identity(), s);
    const Vec3 v = eval_velocity(k, q, a, x), vs = eval_velocity(k, qs, a, x + s);
    const double scale = std::max(detail::max_norm(a), 1e-300);
    if (auto e = detail::mismatch("velocity", (v - vs).norm() / scale, 1e-10); !e.empty()) return e;
    const Mat3 d = eval_velocity_jacobian(k, q, a, x), ds = eval_velocity_jacobian(k, qs, a, x + s);
    return detail::mismatch("jacobian", (d - ds).norm() / scale, 1e-10);
}

inline std::string kernel_rotation(Rng& rng) {
    const KernelSpec k = detail::random_kernel(rng);
    const std::size_t n = 1 + rng() % 20;
    const auto q = detail::random_points(rng, n, 2.0), a = detail::random_points(rng, n, 1.0);
    const Vec3 x = random_vec(rng, 2.5);
    const Mat3 r = random_rotation(rng);
    const auto qr = detail::rotate_all(q, r), ar = detail::rotate_all(a, r);
    const double scale = std::max(detail::max_norm(a), 1e-300);
    const Vec3 v = eval_velocity(k, q, a, x), vr = eval_velocity(k, qr, ar, r * x);
    if (auto e = detail::mismatch("velocity", (r * v - vr).norm() / scale, 1e-10); !e.empty()) return e;
    const Mat3 d = eval_velocity_jacobian(k, q, a, x), dr = eval_velocity_jacobian(k, qr, ar, r * x);
    return detail::mismatch("jacobian", (r * d * r.transpose() - dr).norm() / scale, 1e-10);
}

// ---- varifold -----------------------------------------------------------------------------

inline std::pair<TriMesh, TriMesh> random_pair(Rng& rng) {
    TriMesh s = detail::random_surface(rng), t = detail::random_surface(rng);
    const Vec3 shift = random_vec(rng, 0.5);
    for (Vec3& v : t.vertices) v += shift;
    return {s, t};
}

inline std::string varifold_orientation(Rng& rng) {
    const auto [s, t] = random_pair(rng);
    const VarifoldSpec spec{uniform(rng, 0.2, 1.5)};
    const double e = varifold_energy(spec, s, t);
    if (auto m = detail::mismatch("flipped target", rel_diff(e, varifold_energy(spec, s, flipped(t))), 1e-12); !m.empty())
        return m;
    return detail::mismatch("flipped source", rel_diff(e, varifold_energy(spec, flipped(s), t)), 1e-12);
}

inline std::string varifold_rigid(Rng& rng) {
    const auto [s, t] = random_pair(rng);
    const VarifoldSpec spec{uniform(rng, 0.2, 1.5)};
    const Mat3 r = random_rotation(rng);
    const Vec3 tr = random_vec(rng, 5.0);
    return detail::mismatch("energy",
                            rel_diff(varifold_energy(spec, s, t),
                                     varifold_energy(spec, transformed(s, r, tr), transformed(t, r, tr))),
                            1e-10);
}

inline std::string varifold_symmetry(Rng& rng) {
    const auto [s, t] = random_pair(rng);
    const VarifoldSpec spec{uniform(rng, 0.2, 1.5)};
    const double ab = varifold_bilinear(spec, s, t), ba = varifold_bilinear(spec, t, s);
    if (ab != ba) return "bilinear form is not exactly symmetric";
    return {};
}

// ---- registration -------------------------------------------------------------------------

/// Small closed pair: a bumpy icosphere flowing to a scaled copy.
inline std::pair<TriMesh, TriMesh> small_shell(Rng& rng) {
    TriMesh inner = icosphere(1, uniform(rng, 0.8, 1.2));
    const Vec3 k = random_unit(rng);
    const double amp = uniform(rng, 0.0, 0.1);
    for (Vec3& v : inner.vertices) v *= 1.0 + amp * k.dot(v.normalized());
    TriMesh outer = inner;
    const double grow = uniform(rng, 1.2, 1.5);
    for (Vec3& v : outer.vertices) v *= grow;
    return {inner, outer};
}

inline RegistrationConfig small_shell_config() {
    RegistrationConfig c;
    c.kernel = KernelSpec::gaussian(0.8);
    c.varifold.width = 0.6;
    c.n_steps = 5;
    c.attachment_weight = 100.0;
    c.tol_constraint = 1e-3;
    c.tol_gradient = 1e-4;
    return c;
}

inline std::string registration_rigid(Rng& rng) {
    const auto [inner, outer] = small_shell(rng);
    const Mat3 r = random_rotation(rng);
    const Vec3 t = random_vec(rng, 3.0);
    const RegistrationConfig c = small_shell_config();
    const auto a = optimize(c, inner, outer);
    const auto b = optimize(c, transformed(inner, r, t), transformed(outer, r, t));
    if (!a.report.converged || !b.report.converged) return "registration did not converge";
    // relative to the extent of the trajectories about the initial centroid
    Vec3 centre = Vec3::Zero();
    for (const Vec3& x : a.state.q.front()) centre += x;
    centre /= static_cast<double>(a.state.num_vertices());
    double err = 0.0, extent = 0.0;
    for (int i = 0; i <= a.state.n_steps; ++i) {
        for (std::size_t k = 0; k < a.state.num_vertices(); ++k) {
            err = std::max(err, (r * a.state.q[i][k] + t - b.state.q[i][k]).norm());
            extent = std::max(extent, (a.state.q[i][k] - centre).norm());
        }
    }
    return detail::mismatch("rotated trajectories", err / extent, 1e-3);
}

inline std::string registration_determinism(Rng& rng) {
    const auto p = random_registration_problem(rng, rng() % 2 ? ConstraintForm::SmoothQuadratic
                                                                : ConstraintForm::SignedNonsmooth,
                                               uniform(rng, 0.0, 0.5));
    if (objective(p.config, p.state, p.target).total != objective(p.config, p.state, p.target).total)
        return "objective differs between identical calls";
    if (objective_gradient(p.config, p.state, p.target) != objective_gradient(p.config, p.state, p.target))
        return "gradient differs between identical calls";
    return {};
}

// ---- laminar ------------------------------------------------------------------------------

/// Smooth random non-radial motion of a bumpy patch, mostly along +z.
inline LaminarSystem random_laminar_system(Rng& rng) {
    const TriMesh m = random_patch(rng, 4, 1.0, 0.1);
    const int n = 3 + static_cast<int>(rng() % 8);
    const Vec3 lift(0, 0, uniform(rng, 0.2, 0.6));
    const Vec3 swirl = random_vec(rng, 0.2), bend = random_vec(rng, 0.2);
    const double w = uniform(rng, 0.5, 3.0);
    const auto q = sample_motion(m, n, [=](const Vec3& x, double t) -> Vec3 {
        return x + t * lift + t * std::sin(w * x.x()) * swirl + t * t * std::cos(w * x.y()) * bend;
    });
    return laminar_from_motion(q, m.faces);
}

inline std::string laminar_streamline_invariance(Rng& rng) {
    const LaminarSystem sys = random_laminar_system(rng);
    const double eps = uniform(rng, 0.0, 1.0);
    const TriMesh layer = extract_layer(sys, eps);
    double worst = 0.0;
    for (std::size_t k = 0; k < sys.num_seeds(); ++k) {
        worst = std::max(worst, distance_to_polyline(layer.vertices[k], streamline_of(sys, k)));
    }
    if (auto e = detail::mismatch("layer vertex off its streamline", worst, 1e-9); !e.empty()) return e;
    if (layer.faces != sys.faces) return "layer topology differs from the seeds";
    return {};
}

inline std::string laminar_tau_monotone(Rng& rng) {
    const LaminarSystem sys = random_laminar_system(rng);
    for (std::size_t k = 0; k < sys.num_seeds(); ++k) {
        if (k < sys.flagged.size() && sys.flagged[k]) continue;
        for (int i = 0; i < sys.n_steps; ++i) {
            const bool advancing = sys.normal_speed[i][k] > 0.0;
            if (advancing && sys.sigma[i][k] > 0.0 && sys.sigma[i + 1][k] > 0.0 && !(sys.tau[i + 1][k] > sys.tau[i][k])) {
                return "tau not increasing at seed " + std::to_string(k) + ", step " + std::to_string(i);
            }
        }
    }
    return {};
}

// ---- metrics ------------------------------------------------------------------------------

inline std::pair<TriMesh, TriMesh> random_point_pair(Rng& rng) {
    TriMesh a = random_patch(rng, 2 + static_cast<int>(rng() % 6), uniform(rng, 0.5, 3.0), 0.3);
    TriMesh b = random_patch(rng, 2 + static_cast<int>(rng() % 6), uniform(rng, 0.5, 3.0), 0.3);
    const Vec3 shift = random_vec(rng, 0.5) + Vec3(0, 0, uniform(rng, 0.1, 1.0));
    for (Vec3& v : b.vertices) v += shift;
    return {a, b};
}

inline std::string metrics_rigid(Rng& rng) {
    const auto [a, b] = random_point_pair(rng);
    const Mat3 r = random_rotation(rng);
    const Vec3 t = random_vec(rng, 5.0);
    const auto d = fs_distance(a, b), dr = fs_distance(transformed(a, r, t), transformed(b, r, t));
    return detail::mismatch("distances", detail::field_error(d.values, dr.values), 1e-10);
}

inline std::string metrics_accelerated(Rng& rng) {
    const auto [a, b] = random_point_pair(rng);
    const bool squared = rng() % 2;
    if (fs_distance(a, b, squared, NearestSearch::Grid).values != fs_distance(a, b, squared, NearestSearch::BruteForce).values)
        return "grid search differs from brute force";
    return {};
}

// ---- synth --------------------------------------------------------------------------------

inline FixtureSpec random_fixture_spec(Rng& rng) {
    FixtureSpec s;
    s.seed = rng();
    switch (rng() % 5) {
        case 0:
            s.kind = FixtureKind::SpherePair;
            s.inner_radius = uniform(rng, 0.5, 1.5);
            s.outer_radius = s.inner_radius + uniform(rng, 0.2, 1.0);
            s.subdivision = static_cast<int>(rng() % 3);
            s.inner_jitter = uniform(rng, 0.0, 0.3);
            break;
        case 1:
            s.kind = FixtureKind::CylinderPair;
            s.inner_radius = uniform(rng, 0.5, 1.5);
            s.outer_radius = s.inner_radius + uniform(rng, 0.2, 1.0);
            s.around = 8 + static_cast<int>(rng() % 16);
            s.along = 2 + static_cast<int>(rng() % 6);
            s.capped = rng() % 2;
            s.inner_jitter = uniform(rng, 0.0, 0.3);
            break;
        case 2:
            s.kind = FixtureKind::SheetPair;
            s.separation = uniform(rng, 0.1, 1.0);
            s.resolution = 2 + static_cast<int>(rng() % 10);
            break;
        case 3:
            s.kind = FixtureKind::FoldedSheetPair;
            s.amplitude = uniform(rng, 0.0, 0.5);
            s.wavelength = uniform(rng, 1.5, 3.0);
            s.separation = uniform(rng, 0.1, 0.3);
            s.resolution = 4 + static_cast<int>(rng() % 12);
            break;
        default:
            s.kind = FixtureKind::FlowerTubePair;
            s.inner_radius = uniform(rng, 0.5, 1.0);
            s.amplitude = uniform(rng, 0.0, 0.3);
            s.outer_radius = s.inner_radius + s.amplitude + uniform(rng, 0.2, 1.0);
            s.lobes = 1 + static_cast<int>(rng() % 6);
            s.around = 12 + static_cast<int>(rng() % 24);
            s.along = 2 + static_cast<int>(rng() % 4);
            break;
    }
    return s;
}

inline std::string synth_determinism(Rng& rng) {
    const FixtureSpec s = random_fixture_spec(rng);
    const Fixture a = generate(s), b = generate(s);
    if (a.inner.vertices != b.inner.vertices || a.outer.vertices != b.outer.vertices) {
        return std::string("vertices differ for ") + to_string(s.kind);
    }
    if (a.inner.faces != b.inner.faces || a.outer.faces != b.outer.faces) return "faces differ";
    validate(a.inner);
    validate(a.outer);
    if (!(min_vertex_to_surface_distance(a.inner, a.outer) > 0.0)) return "surfaces touch";
    return {};
}

inline std::string levelset_determinism(Rng& rng) {
    const double z0 = uniform(rng, 0.05, 0.3), z1 = z0 + uniform(rng, 0.3, 0.8);
    auto solve = [&] {
        ScalarGrid g = slab_grid(Vec3::Zero(), 0.1, {4, 4, 14}, z0, z1);
        solve_laplace(g);
        return g.F;
    };
    if (solve() != solve()) return "SOR result differs between identical runs";
    return {};
}

/// Every invariance property, in the order they are reported.
inline std::vector<Property> all_properties() {
    return {
        {"mesh: orientation flip negates normals and curvature", 100, mesh_orientation_flip},
        {"mesh: rigid motion equivariance", 100, mesh_rigid_motion},
        {"mesh: uniform scaling", 100, mesh_scaling},
        {"kernel: pairing equals the V-norm", 100, kernel_reproducing},
        {"kernel: translation invariance", 100, kernel_translation},
        {"kernel: rotation equivariance", 100, kernel_rotation},
        {"varifold: orientation blindness", 100, varifold_orientation},
        {"varifold: rigid invariance", 100, varifold_rigid},
        {"varifold: exact symmetry", 100, varifold_symmetry},
        {"registration: rigid equivariance of solutions", 100, registration_rigid},
        {"registration: deterministic objective and gradient", 100, registration_determinism},
        {"laminar: time change keeps layers on streamlines", 100, laminar_streamline_invariance},
        {"laminar: equivolumetric time is increasing", 100, laminar_tau_monotone},
        {"metrics: rigid invariance", 100, metrics_rigid},
        {"metrics: grid search equals brute force", 100, metrics_accelerated},
        {"synth: deterministic valid fixtures", 100, synth_determinism},
        {"levelset: deterministic solve", 100, levelset_determinism},
    };
}

}  // namespace lamina::testing
