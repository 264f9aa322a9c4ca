#include "lamina/registration.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace lamina {

namespace {

using Trajectory = std::vector<std::vector<Vec3>>;

// Per-vertex normality residual and its partials with respect to v and to the unit normal.
struct ResidualTerms {
    double c = 0.0;
    Vec3 dc_dv = Vec3::Zero();
    Vec3 dc_dn = Vec3::Zero();
};

ResidualTerms residual(ConstraintForm form, double eps, const Vec3& v, const Vec3& n) {
    ResidualTerms r;
    const double nv = n.dot(v);
    if (form == ConstraintForm::SmoothQuadratic) {
        r.c = v.squaredNorm() - nv * nv;
        r.dc_dv = 2.0 * (v - nv * n);
        r.dc_dn = -2.0 * nv * v;
    } else {
        const double len = std::sqrt(v.squaredNorm() + eps * eps);
        r.c = len - nv - eps;
        r.dc_dv = v / len - n;
        r.dc_dn = -v;
    }
    return r;
}

// Velocity of the kernel field carried by (x, a) at its own particles.
std::vector<Vec3> self_velocity(const KernelSpec& kernel, std::span<const Vec3> x, std::span<const Vec3> a) {
    return eval_velocity_at(kernel, x, a, x);
}

// Unnormalized area-weighted vertex normals (sum of incident face cross products).
std::vector<Vec3> raw_vertex_normals(std::span<const Vec3> x, std::span<const Face> faces) {
    std::vector<Vec3> acc(x.size(), Vec3::Zero());
    for (const Face& f : faces) {
        const Vec3 c = (x[f[1]] - x[f[0]]).cross(x[f[2]] - x[f[0]]);
        for (int v : f) acc[v] += c;
    }
    return acc;
}

void check_faces(std::span<const Vec3> x, std::span<const Face> faces, double min_area, int step) {
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const double area = 0.5 * (x[faces[f][1]] - x[faces[f][0]]).cross(x[faces[f][2]] - x[faces[f][0]]).norm();
        if (!(area > min_area)) throw DegenerateFaceError(f, area, step);
    }
}

// Adds the gradient of sum_f g_f . cross_f (cross_f = e1 x e2 of face f) to grad.
void scatter_cross_gradient(std::span<const Vec3> x, std::span<const Face> faces, std::span<const Vec3> g_cross,
                            std::vector<Vec3>& grad) {
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const Face& fc = faces[f];
        const Vec3 e1 = x[fc[1]] - x[fc[0]];
        const Vec3 e2 = x[fc[2]] - x[fc[0]];
        const Vec3 g1 = e2.cross(g_cross[f]);
        const Vec3 g2 = g_cross[f].cross(e1);
        grad[fc[0]] -= g1 + g2;
        grad[fc[1]] += g1;
        grad[fc[2]] += g2;
    }
}

// Hybrid surface term lambda * sum_f area_f |Dv(centroid_f)|^2 for particles at the mesh vertices.
double hybrid_surface_term(const KernelSpec& kernel, std::span<const Vec3> x, std::span<const Vec3> a,
                           std::span<const Face> faces) {
    const long m = static_cast<long>(faces.size());
    std::vector<double> per_face(faces.size());
#pragma omp parallel for schedule(static)
    for (long f = 0; f < m; ++f) {
        const Face& fc = faces[f];
        const Vec3 c = (x[fc[0]] + x[fc[1]] + x[fc[2]]) / 3.0;
        const double area = 0.5 * (x[fc[1]] - x[fc[0]]).cross(x[fc[2]] - x[fc[0]]).norm();
        per_face[f] = area * eval_velocity_jacobian(kernel, x, a, c).squaredNorm();
    }
    double sum = 0.0;
    for (double v : per_face) sum += v;
    return sum;
}

// Adds d/dx and d/da of weight * sum_f area_f |Dv(c_f)|^2.
void hybrid_surface_gradient(const KernelSpec& kernel, std::span<const Vec3> x, std::span<const Vec3> a,
                             std::span<const Face> faces, double weight, std::vector<Vec3>& gx,
                             std::vector<Vec3>& ga) {
    const std::size_t nf = faces.size();
    const std::size_t n = x.size();
    std::vector<Vec3> centroid(nf);
    std::vector<Mat3> G(nf);
    std::vector<Vec3> g_centroid(nf, Vec3::Zero());
    std::vector<Vec3> g_cross(nf);
    const long m = static_cast<long>(nf);
#pragma omp parallel for schedule(static)
    for (long f = 0; f < m; ++f) {
        const Face& fc = faces[f];
        centroid[f] = (x[fc[0]] + x[fc[1]] + x[fc[2]]) / 3.0;
        const Vec3 cr = (x[fc[1]] - x[fc[0]]).cross(x[fc[2]] - x[fc[0]]);
        const double twice_area = cr.norm();
        const Mat3 dv = eval_velocity_jacobian(kernel, x, a, centroid[f]);
        G[f] = weight * twice_area * dv;  // d/dM of weight * area |M|^2
        g_cross[f] = (0.5 * weight * dv.squaredNorm() / twice_area) * cr;
        Vec3 gc = Vec3::Zero();
        for (std::size_t l = 0; l < n; ++l) {
            const Vec3 d = centroid[f] - x[l];
            const double r2 = d.squaredNorm();
            gc += 2.0 * kernel.d1(r2) * G[f].transpose() * a[l] + 4.0 * kernel.d2(r2) * a[l].dot(G[f] * d) * d;
        }
        g_centroid[f] = gc;
    }
    const long nl = static_cast<long>(n);
#pragma omp parallel for schedule(static)
    for (long l = 0; l < nl; ++l) {
        Vec3 g_a = Vec3::Zero();
        Vec3 g_x = Vec3::Zero();
        for (std::size_t f = 0; f < nf; ++f) {
            const Vec3 d = centroid[f] - x[l];
            const double r2 = d.squaredNorm();
            const double g1 = kernel.d1(r2);
            g_a += 2.0 * g1 * G[f] * d;
            g_x -= 2.0 * g1 * G[f].transpose() * a[l] + 4.0 * kernel.d2(r2) * a[l].dot(G[f] * d) * d;
        }
        ga[l] += g_a;
        gx[l] += g_x;
    }
    for (std::size_t f = 0; f < nf; ++f) {
        for (int v : faces[f]) gx[v] += g_centroid[f] / 3.0;
    }
    scatter_cross_gradient(x, faces, g_cross, gx);
}

// Everything the forward sweep produces and the backward sweep needs.
struct ForwardPass {
    Trajectory q;
    Trajectory v;
    std::vector<std::vector<Vec3>> raw_normals;
    std::vector<std::vector<ResidualTerms>> residuals;
    ObjectiveBreakdown breakdown;
};

ForwardPass forward(const RegistrationConfig& config, std::span<const Vec3> q0, std::span<const Face> faces,
                    const Trajectory& alpha, const std::vector<std::vector<double>>& multipliers, double penalty,
                    const FaceSamples& target, double target_self) {
    const int nt = static_cast<int>(alpha.size());
    const double dt = 1.0 / nt;
    const std::size_t n = q0.size();
    ForwardPass fw;
    fw.q.reserve(nt + 1);
    fw.q.emplace_back(q0.begin(), q0.end());
    fw.v.resize(nt);
    fw.raw_normals.resize(nt);
    fw.residuals.resize(nt);
    auto& b = fw.breakdown;
    std::size_t backward = 0;
    for (int i = 0; i < nt; ++i) {
        const auto& x = fw.q[i];
        check_faces(x, faces, config.min_face_area, i);
        fw.v[i] = self_velocity(config.kernel, x, alpha[i]);
        double kin = 0.0;
        for (std::size_t k = 0; k < n; ++k) kin += alpha[i][k].dot(fw.v[i][k]);
        if (config.hybrid_weight > 0.0) kin += config.hybrid_weight * hybrid_surface_term(config.kernel, x, alpha[i], faces);
        b.kinetic += dt * kin;

        fw.raw_normals[i] = raw_vertex_normals(x, faces);
        fw.residuals[i].resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            const Vec3 nu = fw.raw_normals[i][k].normalized();
            const ResidualTerms r = residual(config.constraint, config.nonsmooth_epsilon, fw.v[i][k], nu);
            fw.residuals[i][k] = r;
            b.multiplier_term -= multipliers[i][k] * r.c;
            b.penalty_term += 0.5 * penalty * r.c * r.c;
            b.max_residual = std::max(b.max_residual, std::abs(r.c));
            if (nu.dot(fw.v[i][k]) < 0.0) ++backward;
        }

        std::vector<Vec3> next(n);
        for (std::size_t k = 0; k < n; ++k) next[k] = x[k] + dt * fw.v[i][k];
        fw.q.push_back(std::move(next));
    }
    check_faces(fw.q.back(), faces, config.min_face_area, nt);
    b.attachment = config.attachment_weight *
                   varifold_energy_and_gradient(config.varifold, fw.q.back(), faces, target, target_self, nullptr);
    b.backward_fraction = static_cast<double>(backward) / static_cast<double>(std::max<std::size_t>(1, n * nt));
    b.total = b.kinetic + b.attachment + b.multiplier_term + b.penalty_term;
    return fw;
}

Trajectory backward(const RegistrationConfig& config, std::span<const Face> faces, const Trajectory& alpha,
                    const std::vector<std::vector<double>>& multipliers, double penalty, const ForwardPass& fw,
                    const FaceSamples& target, double target_self) {
    const int nt = static_cast<int>(alpha.size());
    const double dt = 1.0 / nt;
    const std::size_t n = fw.q.front().size();
    const auto& kernel = config.kernel;

    std::vector<Vec3> p;
    varifold_energy_and_gradient(config.varifold, fw.q.back(), faces, target, target_self, &p);
    for (auto& g : p) g *= config.attachment_weight;

    Trajectory grad(nt, std::vector<Vec3>(n, Vec3::Zero()));
    for (int i = nt - 1; i >= 0; --i) {
        const auto& x = fw.q[i];
        const auto& a = alpha[i];
        // Adjoint weights on the velocity: Euler transport and the constraint terms.
        std::vector<Vec3> w(n);
        std::vector<Vec3> g_normal(n);
        for (std::size_t k = 0; k < n; ++k) {
            const auto& r = fw.residuals[i][k];
            const double dphi = -multipliers[i][k] + penalty * r.c;
            w[k] = dt * p[k] + dphi * r.dc_dv;
            g_normal[k] = dphi * r.dc_dn;
        }

        std::vector<Vec3> gx(n), ga(n);
        const long nl = static_cast<long>(n);
#pragma omp parallel for schedule(static)
        for (long m = 0; m < nl; ++m) {
            // s_m = w_m + dt a_m folds the kinetic term into the same pair sum.
            const Vec3 s_m = w[m] + dt * a[m];
            Vec3 kw = Vec3::Zero();
            Vec3 gpos = Vec3::Zero();
            for (std::size_t l = 0; l < n; ++l) {
                const Vec3 d = x[m] - x[l];
                double g, g1;
                kernel.value_and_d1(d.squaredNorm(), g, g1);
                kw += g * w[l];
                const Vec3 s_l = w[l] + dt * a[l];
                gpos += (2.0 * g1 * (s_m.dot(a[l]) + s_l.dot(a[m]))) * d;
            }
            ga[m] = kw + 2.0 * dt * fw.v[i][m];
            gx[m] = p[m] + gpos;
        }

        // Through the unit vertex normals.
        std::vector<Vec3> g_cross(faces.size(), Vec3::Zero());
        std::vector<Vec3> g_raw(n);
        for (std::size_t k = 0; k < n; ++k) {
            const Vec3& raw = fw.raw_normals[i][k];
            const double len = raw.norm();
            const Vec3 nu = raw / len;
            g_raw[k] = (g_normal[k] - nu.dot(g_normal[k]) * nu) / len;
        }
        for (std::size_t f = 0; f < faces.size(); ++f) {
            for (int v : faces[f]) g_cross[f] += g_raw[v];
        }
        scatter_cross_gradient(x, faces, g_cross, gx);

        if (config.hybrid_weight > 0.0) {
            hybrid_surface_gradient(kernel, x, a, faces, dt * config.hybrid_weight, gx, ga);
        }

        grad[i] = std::move(ga);
        p = std::move(gx);
    }
    return grad;
}

struct TargetData {
    FaceSamples samples;
    double self = 0.0;
};

TargetData prepare_target(const RegistrationConfig& config, const TriMesh& target) {
    TargetData t;
    t.samples = face_samples(target.vertices, target.faces);
    t.self = varifold_bilinear(config.varifold, t.samples, t.samples);
    return t;
}

void check_state(const FlowState& state) {
    if (state.n_steps < 1) throw ConfigError("flow state needs at least one time step");
    if (state.q.empty() || state.alpha.size() != static_cast<std::size_t>(state.n_steps) ||
        state.multipliers.size() != static_cast<std::size_t>(state.n_steps)) {
        throw ConfigError("flow state arrays do not match n_steps");
    }
    const std::size_t n = state.q.front().size();
    for (int i = 0; i < state.n_steps; ++i) {
        if (state.alpha[i].size() != n || state.multipliers[i].size() != n) {
            throw ConfigError("flow state arrays do not match the vertex count");
        }
    }
}

}  // namespace

void RegistrationConfig::validate() const {
    kernel.validate();
    varifold.validate();
    if (hybrid_weight < 0.0) throw ConfigError("hybrid_weight must be >= 0");
    if (!(attachment_weight > 0.0)) throw ConfigError("attachment_weight must be > 0");
    if (n_steps < 1) throw ConfigError("n_steps must be >= 1");
    if (!(nonsmooth_epsilon > 0.0)) throw ConfigError("nonsmooth_epsilon must be > 0");
    if (!(schedule.initial_penalty > 0.0)) throw ConfigError("initial_penalty must be > 0");
    if (!(schedule.penalty_growth > 1.0)) throw ConfigError("penalty_growth must be > 1");
    if (!(schedule.residual_decrease_ratio > 0.0 && schedule.residual_decrease_ratio < 1.0)) {
        throw ConfigError("residual_decrease_ratio must lie in (0, 1)");
    }
    if (schedule.max_outer_iterations < 1) throw ConfigError("max_outer_iterations must be >= 1");
    if (inner.memory < 1 || inner.max_iterations < 1) throw ConfigError("inner solver memory and iterations must be >= 1");
    if (tol_constraint < 0.0 || tol_gradient < 0.0) throw ConfigError("tolerances must be >= 0");
}

TriMesh FlowState::mesh_at(int step) const {
    TriMesh m;
    m.vertices = q.at(static_cast<std::size_t>(step));
    m.faces = faces;
    return m;
}

FlowState FlowState::at_rest(const TriMesh& inner, int n_steps, double penalty) {
    if (n_steps < 1) throw ConfigError("n_steps must be >= 1");
    FlowState s;
    s.n_steps = n_steps;
    s.faces = inner.faces;
    s.q.assign(n_steps + 1, inner.vertices);
    s.alpha.assign(n_steps, std::vector<Vec3>(inner.vertices.size(), Vec3::Zero()));
    s.multipliers.assign(n_steps, std::vector<double>(inner.vertices.size(), 0.0));
    s.penalty = penalty;
    return s;
}

Trajectory integrate_forward(const RegistrationConfig& config, std::span<const Vec3> q0, const Trajectory& alpha) {
    const int nt = static_cast<int>(alpha.size());
    if (nt < 1) throw ConfigError("integrate_forward: at least one step is required");
    const double dt = 1.0 / nt;
    Trajectory q;
    q.reserve(nt + 1);
    q.emplace_back(q0.begin(), q0.end());
    for (int i = 0; i < nt; ++i) {
        if (alpha[i].size() != q0.size()) throw ConfigError("integrate_forward: momenta size mismatch");
        const auto v = self_velocity(config.kernel, q[i], alpha[i]);
        std::vector<Vec3> next(q0.size());
        for (std::size_t k = 0; k < q0.size(); ++k) next[k] = q[i][k] + dt * v[k];
        q.push_back(std::move(next));
    }
    return q;
}

std::vector<Vec3> step_velocity(const KernelSpec& kernel, const FlowState& state, int step) {
    return self_velocity(kernel, state.q.at(step), state.alpha.at(step));
}

std::vector<double> constraint_residuals(const RegistrationConfig& config, const TriMesh& mesh_at_q,
                                         std::span<const Vec3> v_at_vertices) {
    if (v_at_vertices.size() != mesh_at_q.vertices.size()) {
        throw ConfigError("constraint_residuals: velocity count does not match vertex count");
    }
    const auto normals = vertex_normals(mesh_at_q);
    std::vector<double> c(normals.size());
    for (std::size_t k = 0; k < c.size(); ++k) {
        c[k] = residual(config.constraint, config.nonsmooth_epsilon, v_at_vertices[k], normals[k]).c;
    }
    return c;
}

ObjectiveBreakdown objective(const RegistrationConfig& config, const FlowState& state, const TriMesh& target) {
    check_state(state);
    const auto t = prepare_target(config, target);
    return forward(config, state.q.front(), state.faces, state.alpha, state.multipliers, state.penalty, t.samples,
                   t.self)
        .breakdown;
}

Trajectory objective_gradient(const RegistrationConfig& config, const FlowState& state, const TriMesh& target) {
    check_state(state);
    const auto t = prepare_target(config, target);
    const auto fw = forward(config, state.q.front(), state.faces, state.alpha, state.multipliers, state.penalty,
                            t.samples, t.self);
    return backward(config, state.faces, state.alpha, state.multipliers, state.penalty, fw, t.samples, t.self);
}

Eigen::VectorXd flatten(const Trajectory& alpha) {
    const std::size_t n = alpha.empty() ? 0 : alpha.front().size();
    Eigen::VectorXd x(static_cast<Eigen::Index>(alpha.size() * n * 3));
    Eigen::Index j = 0;
    for (const auto& step : alpha) {
        for (const auto& a : step) {
            x[j++] = a.x();
            x[j++] = a.y();
            x[j++] = a.z();
        }
    }
    return x;
}

Trajectory unflatten(const Eigen::VectorXd& x, int n_steps, std::size_t n_vertices) {
    Trajectory alpha(n_steps, std::vector<Vec3>(n_vertices));
    Eigen::Index j = 0;
    for (auto& step : alpha) {
        for (auto& a : step) {
            a = Vec3(x[j], x[j + 1], x[j + 2]);
            j += 3;
        }
    }
    return alpha;
}

RegistrationResult optimize(const RegistrationConfig& config, const TriMesh& inner, const TriMesh& outer) {
    const auto start = std::chrono::steady_clock::now();
    config.validate();
    validate(inner, config.min_face_area);
    validate(outer, config.min_face_area);

    RegistrationResult result;
    result.effective_config = config;
    RegistrationConfig& cfg = result.effective_config;
    auto& report = result.report;
    report.vertices = inner.num_vertices();
    report.faces = inner.num_faces();
    report.mean_edge_length = mean_edge_length(inner);

    const auto target = prepare_target(cfg, outer);
    report.initial_attachment = varifold_energy_and_gradient(cfg.varifold, inner.vertices, inner.faces, target.samples,
                                                             target.self, nullptr);
    if (cfg.auto_scale_attachment && report.initial_attachment > 1e-300) {
        cfg.attachment_weight = config.attachment_weight / report.initial_attachment;
    }
    report.attachment_scale = cfg.attachment_weight;

    FlowState state = FlowState::at_rest(inner, cfg.n_steps, cfg.schedule.initial_penalty);
    const std::size_t n = inner.num_vertices();
    Eigen::VectorXd x = flatten(state.alpha);
    double previous_max = std::numeric_limits<double>::infinity();

    LbfgsOptions inner_options = cfg.inner;
    inner_options.gradient_tolerance = cfg.tol_gradient;

    for (int outer_it = 0; outer_it < cfg.schedule.max_outer_iterations; ++outer_it) {
        const FlowState snapshot = state;
        const Objective fn = [&](const Eigen::VectorXd& z, Eigen::VectorXd& g) {
            const auto alpha = unflatten(z, cfg.n_steps, n);
            const auto fw = forward(cfg, state.q.front(), state.faces, alpha, state.multipliers, state.penalty,
                                    target.samples, target.self);
            const auto grad = backward(cfg, state.faces, alpha, state.multipliers, state.penalty, fw, target.samples,
                                       target.self);
            g = flatten(grad);
            return fw.breakdown.total;
        };

        LbfgsResult inner_result;
        try {
            inner_result = minimize_lbfgs(fn, x, inner_options);
        } catch (const NumericalError& e) {
            throw RegistrationAborted(std::string("inner solve failed at outer iteration ") +
                                          std::to_string(outer_it) + ": " + e.what(),
                                      snapshot);
        }
        state.alpha = unflatten(x, cfg.n_steps, n);
        const auto fw = forward(cfg, state.q.front(), state.faces, state.alpha, state.multipliers, state.penalty,
                                target.samples, target.self);
        if (!std::isfinite(fw.breakdown.total)) {
            throw RegistrationAborted("non-finite objective after outer iteration " + std::to_string(outer_it),
                                      snapshot);
        }
        state.q = fw.q;

        OuterIterationRecord rec;
        rec.objective = fw.breakdown.total;
        rec.kinetic = fw.breakdown.kinetic;
        rec.attachment = fw.breakdown.attachment;
        rec.max_residual = fw.breakdown.max_residual;
        rec.backward_fraction = fw.breakdown.backward_fraction;
        rec.penalty = state.penalty;
        rec.inner_iterations = inner_result.iterations;
        rec.inner_status = inner_result.status;
        rec.inner_gradient_norm = inner_result.gradient_norm;
        rec.inner_monotone = std::is_sorted(inner_result.accepted_values.rbegin(), inner_result.accepted_values.rend());
        report.outer.push_back(rec);
        report.total_inner_iterations += inner_result.iterations;
        report.total_evaluations += inner_result.evaluations;

        if (rec.max_residual < cfg.tol_constraint && inner_result.gradient_norm <= cfg.tol_gradient) {
            report.converged = true;
            break;
        }
        for (int i = 0; i < cfg.n_steps; ++i) {
            for (std::size_t k = 0; k < n; ++k) state.multipliers[i][k] -= state.penalty * fw.residuals[i][k].c;
        }
        if (rec.max_residual >= cfg.tol_constraint &&
            rec.max_residual > cfg.schedule.residual_decrease_ratio * previous_max) {
            state.penalty *= cfg.schedule.penalty_growth;
        }
        previous_max = rec.max_residual;
    }

    // Step-size and non-degeneracy diagnostics on the returned trajectories.
    report.min_face_area = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= cfg.n_steps; ++i) {
        for (const Face& f : state.faces) {
            const auto& q = state.q[i];
            report.min_face_area = std::min(report.min_face_area, 0.5 * (q[f[1]] - q[f[0]]).cross(q[f[2]] - q[f[0]]).norm());
        }
        if (i < cfg.n_steps) {
            for (std::size_t k = 0; k < n; ++k) {
                report.max_step_displacement = std::max(report.max_step_displacement, (state.q[i + 1][k] - state.q[i][k]).norm());
            }
        }
    }
    report.step_size_violation = report.max_step_displacement >= report.mean_edge_length;
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.state = std::move(state);
    return result;
}

const char* to_string(ConstraintForm form) {
    return form == ConstraintForm::SmoothQuadratic ? "smooth-quadratic" : "paper-nonsmooth";
}

ConstraintForm constraint_form_from_string(const std::string& name) {
    if (name == "smooth-quadratic") return ConstraintForm::SmoothQuadratic;
    if (name == "paper-nonsmooth") return ConstraintForm::SignedNonsmooth;
    throw ConfigError("unknown constraint form '" + name + "' (expected smooth-quadratic or paper-nonsmooth)");
}

const char* to_string(LbfgsStatus status) {
    switch (status) {
        case LbfgsStatus::GradientConverged: return "gradient-converged";
        case LbfgsStatus::SmallDecrease: return "small-decrease";
        case LbfgsStatus::MaxIterations: return "max-iterations";
        case LbfgsStatus::LineSearchFailed: return "line-search-failed";
    }
    return "unknown";
}

}  // namespace lamina
