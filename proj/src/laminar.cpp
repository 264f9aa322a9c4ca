#include "lamina/laminar.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "lamina/errors.hpp"
#include "lamina/mesh_io.hpp"

namespace lamina {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Linear interpolation of samples y at increasing abscissae u; clamped at the ends.
double interpolate(std::span<const double> u, std::span<const double> y, double x) {
    if (x <= u.front()) return y.front();
    if (x >= u.back()) return y.back();
    const auto it = std::upper_bound(u.begin(), u.end(), x);
    const std::size_t j = static_cast<std::size_t>(it - u.begin());
    const double w = u[j] - u[j - 1];
    if (w <= 0.0) return y[j];
    const double s = (x - u[j - 1]) / w;
    return (1.0 - s) * y[j - 1] + s * y[j];
}

}  // namespace

LaminarSystem streamlines_from_flow(const FlowState& state) {
    if (state.n_steps < 1 || static_cast<int>(state.q.size()) != state.n_steps + 1) {
        throw ConfigError("flow state has no trajectories");
    }
    LaminarSystem sys;
    sys.n_steps = state.n_steps;
    sys.faces = state.faces;
    sys.points = state.q;
    return sys;
}

std::vector<Vec3> streamline_from_point(const KernelSpec& kernel, const FlowState& state, const Vec3& seed,
                                        int substeps) {
    if (substeps < 1) throw ConfigError("substeps must be >= 1");
    const double h = state.dt() / substeps;
    std::vector<Vec3> line{seed};
    line.reserve(static_cast<std::size_t>(state.n_steps * substeps) + 1);
    Vec3 y = seed;
    for (int i = 0; i < state.n_steps; ++i) {
        const auto& q = state.q[i];
        const auto& a = state.alpha[i];
        auto v = [&](const Vec3& x) { return eval_velocity(kernel, q, a, x); };
        for (int s = 0; s < substeps; ++s) {
            const Vec3 k1 = v(y);
            const Vec3 k2 = v(y + 0.5 * h * k1);
            const Vec3 k3 = v(y + 0.5 * h * k2);
            const Vec3 k4 = v(y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            line.push_back(y);
        }
    }
    return line;
}

double polyline_length(std::span<const Vec3> line) {
    double len = 0.0;
    for (std::size_t i = 1; i < line.size(); ++i) len += (line[i] - line[i - 1]).norm();
    return len;
}

std::vector<double> thickness(const LaminarSystem& system) {
    const std::size_t n = system.num_seeds();
    std::vector<double> th(n, 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(n); ++k) {
        double len = 0.0;
        for (int i = 0; i < system.n_steps; ++i) len += (system.points[i + 1][k] - system.points[i][k]).norm();
        th[k] = len;
    }
    return th;
}

std::vector<std::vector<double>> sigma_one_ring(const std::vector<std::vector<Vec3>>& positions,
                                                std::span<const Face> faces) {
    std::vector<std::vector<double>> sigma;
    sigma.reserve(positions.size());
    const std::vector<double> a0 = one_ring_areas(positions.front(), faces);
    for (std::size_t k = 0; k < a0.size(); ++k) {
        if (!(a0[k] > 0.0)) throw TopologyError("vertex " + std::to_string(k) + " has no incident area");
    }
    for (const auto& p : positions) {
        std::vector<double> a = one_ring_areas(p, faces);
        for (std::size_t k = 0; k < a.size(); ++k) a[k] /= a0[k];
        sigma.push_back(std::move(a));
    }
    return sigma;
}

std::vector<std::vector<double>> sigma_one_ring(const FlowState& state) { return sigma_one_ring(state.q, state.faces); }

std::vector<std::vector<double>> sigma_zeta_ode(const VelocityField& field, std::span<const Vec3> seeds,
                                                std::span<const Vec3> normals, int n_steps, int substeps) {
    if (n_steps < 1 || substeps < 1) throw ConfigError("n_steps and substeps must be >= 1");
    if (seeds.size() != normals.size()) throw ConfigError("seeds and normals differ in length");
    const std::size_t n = seeds.size();
    const double h = 1.0 / (n_steps * substeps);
    std::vector<std::vector<double>> sigma(n_steps + 1, std::vector<double>(n, 1.0));

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(n); ++k) {
        Vec3 y = seeds[k];
        Vec3 z = normals[k].normalized();
        sigma[0][k] = z.norm();
        for (int i = 0; i < n_steps; ++i) {
            auto rhs = [&](const Vec3& yy, const Vec3& zz, Vec3& dy, Vec3& dz) {
                Mat3 J;
                field(i, yy, dy, J);
                dz = J.trace() * zz - J.transpose() * zz;
            };
            for (int s = 0; s < substeps; ++s) {
                Vec3 ky1, kz1, ky2, kz2, ky3, kz3, ky4, kz4;
                rhs(y, z, ky1, kz1);
                rhs(y + 0.5 * h * ky1, z + 0.5 * h * kz1, ky2, kz2);
                rhs(y + 0.5 * h * ky2, z + 0.5 * h * kz2, ky3, kz3);
                rhs(y + h * ky3, z + h * kz3, ky4, kz4);
                y += h / 6.0 * (ky1 + 2.0 * ky2 + 2.0 * ky3 + ky4);
                z += h / 6.0 * (kz1 + 2.0 * kz2 + 2.0 * kz3 + kz4);
            }
            sigma[i + 1][k] = z.norm();
        }
    }
    return sigma;
}

std::vector<std::vector<double>> sigma_zeta_ode(const KernelSpec& kernel, const FlowState& state, int substeps) {
    VelocityField field = [&](int step, const Vec3& x, Vec3& v, Mat3& J) {
        v = eval_velocity(kernel, state.q[step], state.alpha[step], x);
        J = eval_velocity_jacobian(kernel, state.q[step], state.alpha[step], x);
    };
    const auto normals = vertex_normals(state.q.front(), state.faces);
    return sigma_zeta_ode(field, state.q.front(), normals, state.n_steps, substeps);
}

void equivolumetric_time_change(LaminarSystem& sys) {
    const std::size_t n = sys.num_seeds();
    const int nt = sys.n_steps;
    if (static_cast<int>(sys.sigma.size()) != nt + 1) throw ConfigError("sigma must be computed first");
    const double dt = sys.dt();

    sys.normal_speed.assign(nt, std::vector<double>(n, 0.0));
    for (int i = 0; i < nt; ++i) {
        const auto nu = vertex_normals(sys.points[i], sys.faces);
        for (std::size_t k = 0; k < n; ++k) {
            sys.normal_speed[i][k] = nu[k].dot(sys.points[i + 1][k] - sys.points[i][k]) / dt;
        }
    }

    sys.tau.assign(nt + 1, std::vector<double>(n, 0.0));
    sys.c0.assign(n, 0.0);
    sys.flagged.assign(n, false);
    for (std::size_t k = 0; k < n; ++k) {
        double acc = 0.0;
        for (int i = 0; i < nt; ++i) {
            acc += sys.normal_speed[i][k] * dt * 0.5 * (sys.sigma[i][k] + sys.sigma[i + 1][k]);
            sys.tau[i + 1][k] = acc;
        }
        sys.c0[k] = acc;
        if (!(acc > 0.0)) {
            sys.flagged[k] = true;
            for (int i = 0; i <= nt; ++i) sys.tau[i][k] = kNaN;
            continue;
        }
        for (int i = 1; i < nt; ++i) sys.tau[i][k] /= acc;
        sys.tau[nt][k] = 1.0;
    }
    if (sys.thickness.size() != n) sys.thickness = thickness(sys);
}

namespace {

// Fractional step index at which tau first reaches eps, or NaN.
double crossing_time(const LaminarSystem& sys, std::size_t k, double eps) {
    const int nt = sys.n_steps;
    if (sys.flagged[k]) return kNaN;
    if (eps <= 0.0) return 0.0;
    if (eps >= 1.0) return nt;
    for (int i = 0; i < nt; ++i) {
        const double a = sys.tau[i][k], b = sys.tau[i + 1][k];
        if (a <= eps && eps <= b) return b > a ? i + (eps - a) / (b - a) : i;
    }
    return kNaN;
}

Vec3 point_at(const LaminarSystem& sys, std::size_t k, double t) {
    const int i = std::clamp(static_cast<int>(std::floor(t)), 0, sys.n_steps - 1);
    const double s = t - i;
    return (1.0 - s) * sys.points[i][k] + s * sys.points[i + 1][k];
}

}  // namespace

TriMesh extract_layer(const LaminarSystem& sys, double eps) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw ConfigError("layer depth must lie in [0, 1]");
    if (sys.tau.empty()) throw ConfigError("time change not computed");
    const std::size_t n = sys.num_seeds();
    std::vector<double> t(n);
    std::vector<std::size_t> valid;
    for (std::size_t k = 0; k < n; ++k) {
        t[k] = crossing_time(sys, k, eps);
        if (std::isfinite(t[k])) valid.push_back(k);
    }
    TriMesh layer;
    layer.faces = sys.faces;
    layer.vertices.resize(n);
    std::vector<double> flag(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double tk = t[k];
        if (!std::isfinite(tk)) {
            flag[k] = 1.0;
            double best = std::numeric_limits<double>::infinity();
            tk = eps * sys.n_steps;
            for (std::size_t j : valid) {
                const double d = (sys.points[0][j] - sys.points[0][k]).squaredNorm();
                if (d < best) {
                    best = d;
                    tk = t[j];
                }
            }
        }
        layer.vertices[k] = point_at(sys, k, tk);
    }
    layer.point_scalars["flagged"] = std::move(flag);
    return layer;
}

double waehnert_depth(double theta, double sigma1, double eps) {
    if (!(theta > 0.0) || !(sigma1 > 0.0)) throw ConfigError("waehnert depth needs theta > 0 and sigma1 > 0");
    if (!(eps >= 0.0 && eps <= 1.0)) throw ConfigError("waehnert depth needs eps in [0, 1]");
    // Positive root of (sigma1 - 1)/2 rho^2 + rho - eps (sigma1 + 1)/2 = 0, written without cancellation.
    return eps * (sigma1 + 1.0) / (1.0 + std::sqrt(1.0 + eps * (sigma1 * sigma1 - 1.0)));
}

std::vector<double> leprince_sigma(std::span<const double> H, std::span<const double> u, double theta,
                                   int substeps) {
    if (H.size() != u.size() || H.empty()) throw ConfigError("curvature samples and parameters differ in length");
    if (substeps < 1) throw ConfigError("substeps must be >= 1");
    std::vector<double> sigma(H.size(), 1.0);
    double s = 1.0;
    auto f = [&](double x, double sg) { return -2.0 * theta * interpolate(u, H, x) * sg; };
    for (std::size_t j = 1; j < u.size(); ++j) {
        const double h = (u[j] - u[j - 1]) / substeps;
        double x = u[j - 1];
        for (int r = 0; r < substeps; ++r) {
            const double k1 = f(x, s);
            const double k2 = f(x + 0.5 * h, s + 0.5 * h * k1);
            const double k3 = f(x + 0.5 * h, s + 0.5 * h * k2);
            const double k4 = f(x + h, s + h * k3);
            s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            x += h;
        }
        sigma[j] = s;
    }
    return sigma;
}

std::vector<double> leprince_sigma(std::span<const double> H, double theta, int substeps) {
    std::vector<double> u(H.size(), 0.0);
    for (std::size_t j = 1; j < u.size(); ++j) u[j] = static_cast<double>(j) / (u.size() - 1);
    return leprince_sigma(H, u, theta, substeps);
}

std::vector<double> arc_length_fractions(std::span<const Vec3> line) {
    std::vector<double> u(line.size(), 0.0);
    for (std::size_t i = 1; i < line.size(); ++i) u[i] = u[i - 1] + (line[i] - line[i - 1]).norm();
    if (!line.empty() && u.back() > 0.0) {
        const double total = u.back();
        for (double& x : u) x /= total;
    }
    return u;
}

std::vector<std::vector<double>> area_transport_residual(const std::vector<std::vector<Vec3>>& positions,
                                                         std::span<const Face> faces,
                                                         const std::vector<std::vector<Vec3>>& tangential,
                                                         const std::vector<std::vector<double>>& normal_speed) {
    const int nt = static_cast<int>(positions.size()) - 1;
    if (nt < 2) throw ConfigError("need at least three time samples");
    if (tangential.size() != positions.size() || normal_speed.size() != positions.size()) {
        throw ConfigError("velocity samples must match the time samples");
    }
    const double dt = 1.0 / nt;
    const auto sigma = sigma_one_ring(positions, faces);
    const std::size_t n = positions.front().size();
    std::vector<std::vector<double>> res(nt + 1, std::vector<double>(n, kNaN));
    for (int i = 1; i < nt; ++i) {
        TriMesh m;
        m.vertices = positions[i];
        m.faces.assign(faces.begin(), faces.end());
        const auto curv = mean_curvature(m);
        const auto div = surface_divergence(m, tangential[i]);
        for (std::size_t k = 0; k < n; ++k) {
            if (curv.boundary[k] || div.boundary[k]) continue;
            const double lhs = (sigma[i + 1][k] - sigma[i - 1][k]) / (2.0 * dt);
            if (lhs == 0.0) continue;
            const double rhs = sigma[i][k] * (div.div[k] - 2.0 * normal_speed[i][k] * curv.H[k]);
            res[i][k] = std::abs(lhs - rhs) / std::abs(lhs);
        }
    }
    return res;
}

std::vector<std::vector<double>> area_transport_residual(const std::vector<std::vector<Vec3>>& positions,
                                                         std::span<const Face> faces) {
    const int nt = static_cast<int>(positions.size()) - 1;
    if (nt < 2) throw ConfigError("need at least three time samples");
    const double dt = 1.0 / nt;
    const std::size_t n = positions.front().size();
    std::vector<std::vector<Vec3>> tangential(nt + 1, std::vector<Vec3>(n, Vec3::Zero()));
    std::vector<std::vector<double>> normal(nt + 1, std::vector<double>(n, 0.0));
    for (int i = 1; i < nt; ++i) {
        const auto nu = vertex_normals(positions[i], faces);
        for (std::size_t k = 0; k < n; ++k) {
            const Vec3 v = (positions[i + 1][k] - positions[i - 1][k]) / (2.0 * dt);
            normal[i][k] = nu[k].dot(v);
            tangential[i][k] = v - normal[i][k] * nu[k];
        }
    }
    return area_transport_residual(positions, faces, tangential, normal);
}

void write_streamlines_vtk(const LaminarSystem& sys, const std::filesystem::path& path) {
    PolylineSet set;
    const std::size_t n = sys.num_seeds();
    const auto th = sys.thickness.size() == n ? sys.thickness : thickness(sys);
    auto& tau = set.point_scalars["tau"];
    auto& sigma = set.point_scalars["sigma"];
    for (std::size_t k = 0; k < n; ++k) {
        std::vector<Vec3> line;
        std::vector<double> tk, sk;
        for (int i = 0; i <= sys.n_steps; ++i) {
            line.push_back(sys.points[i][k]);
            tk.push_back(sys.tau.empty() ? kNaN : sys.tau[i][k]);
            sk.push_back(sys.sigma.empty() ? kNaN : sys.sigma[i][k]);
        }
        set.lines.push_back(std::move(line));
        tau.push_back(std::move(tk));
        sigma.push_back(std::move(sk));
    }
    set.line_scalars["thickness"] = th;
    set.line_scalars["c0"] = sys.c0.size() == n ? sys.c0 : std::vector<double>(n, kNaN);
    std::vector<double> flags(n, 0.0);
    for (std::size_t k = 0; k < sys.flagged.size() && k < n; ++k) flags[k] = sys.flagged[k] ? 1.0 : 0.0;
    set.line_scalars["flagged"] = std::move(flags);
    write_vtk_polylines(set, path);
}

void write_seed_table_csv(const LaminarSystem& sys, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    const std::size_t n = sys.num_seeds();
    const auto th = sys.thickness.size() == n ? sys.thickness : thickness(sys);
    out << "seed,thickness,c0,flagged\n";
    for (std::size_t k = 0; k < n; ++k) {
        out << k << ',' << th[k] << ',' << (k < sys.c0.size() ? sys.c0[k] : kNaN) << ','
            << (k < sys.flagged.size() && sys.flagged[k] ? 1 : 0) << '\n';
    }
}

}  // namespace lamina
