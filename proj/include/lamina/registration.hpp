#pragma once

#include <span>
#include <string>
#include <vector>

#include "lamina/errors.hpp"
#include "lamina/kernel.hpp"
#include "lamina/lbfgs.hpp"
#include "lamina/mesh.hpp"
#include "lamina/varifold.hpp"

namespace lamina {

enum class ConstraintForm {
    SmoothQuadratic,  // |v|^2 - (nu.v)^2, sign-blind, differentiable everywhere
    SignedNonsmooth,   // sqrt(|v|^2 + eps^2) - nu.v - eps
};

struct AugmentedLagrangianSchedule {
    double initial_penalty = 1.0;
    double penalty_growth = 10.0;
    double residual_decrease_ratio = 0.25;
    int max_outer_iterations = 20;
};

struct RegistrationConfig {
    KernelSpec kernel;
    VarifoldSpec varifold;
    double hybrid_weight = 0.0;        // lambda_h
    double attachment_weight = 1.0;    // gamma_D, or the target initial attachment when auto-scaled
    bool auto_scale_attachment = true; // gamma_D = attachment_weight / E(S0, S1)
    int n_steps = 10;
    ConstraintForm constraint = ConstraintForm::SmoothQuadratic;
    double nonsmooth_epsilon = 1e-8;   // mm/time
    AugmentedLagrangianSchedule schedule;
    LbfgsOptions inner;
    double tol_constraint = 1e-4;      // on max |c|
    double tol_gradient = 1e-5;        // on the inner gradient infinity norm
    double min_face_area = kDefaultMinFaceArea;

    void validate() const;
};

/// Time-discretized flow: positions q[i] for i = 0..n_steps, piecewise-constant momenta
/// alpha[i] and one multiplier per vertex per step. faces is the topology of S0.
struct FlowState {
    int n_steps = 0;
    std::vector<Face> faces;
    std::vector<std::vector<Vec3>> q;
    std::vector<std::vector<Vec3>> alpha;
    std::vector<std::vector<double>> multipliers;
    double penalty = 1.0;

    double dt() const { return 1.0 / n_steps; }
    std::size_t num_vertices() const { return q.empty() ? 0 : q.front().size(); }
    TriMesh mesh_at(int step) const;

    /// Zero momenta and multipliers; every q[i] equals the inner surface.
    static FlowState at_rest(const TriMesh& inner, int n_steps, double penalty);
};

/// Explicit Euler: q[i+1][k] = q[i][k] + dt * v_i(q[i][k]).
std::vector<std::vector<Vec3>> integrate_forward(const RegistrationConfig& config, std::span<const Vec3> q0,
                                                 const std::vector<std::vector<Vec3>>& alpha);

/// Velocity of step i at the step-start vertices.
std::vector<Vec3> step_velocity(const KernelSpec& kernel, const FlowState& state, int step);

/// Normality residual per vertex for the configured constraint form; vertex normals of
/// mesh_at_q. v_at_vertices is the velocity at those vertices.
std::vector<double> constraint_residuals(const RegistrationConfig& config, const TriMesh& mesh_at_q,
                                         std::span<const Vec3> v_at_vertices);

struct ObjectiveBreakdown {
    double total = 0.0;
    double kinetic = 0.0;       // sum_i dt * hybrid norm
    double attachment = 0.0;    // gamma_D * varifold energy at the endpoint
    double multiplier_term = 0.0;  // -sum lambda c
    double penalty_term = 0.0;     // sum mu/2 c^2
    double max_residual = 0.0;
    double backward_fraction = 0.0;  // fraction of (step, vertex) with nu.v < 0
};

/// Objective of the state's momenta (trajectories are re-integrated from q[0]); uses
/// config.attachment_weight as gamma_D verbatim.
ObjectiveBreakdown objective(const RegistrationConfig& config, const FlowState& state, const TriMesh& target);

/// dF/dalpha[i][k] by reverse accumulation through the Euler steps.
std::vector<std::vector<Vec3>> objective_gradient(const RegistrationConfig& config, const FlowState& state,
                                                  const TriMesh& target);

struct OuterIterationRecord {
    double objective = 0.0;
    double kinetic = 0.0;
    double attachment = 0.0;
    double max_residual = 0.0;
    double backward_fraction = 0.0;
    double penalty = 0.0;
    int inner_iterations = 0;
    LbfgsStatus inner_status = LbfgsStatus::MaxIterations;
    double inner_gradient_norm = 0.0;
    bool inner_monotone = true;
};

struct ConvergenceReport {
    bool converged = false;
    std::vector<OuterIterationRecord> outer;
    std::size_t vertices = 0;
    std::size_t faces = 0;
    int total_inner_iterations = 0;
    int total_evaluations = 0;
    double wall_seconds = 0.0;
    double attachment_scale = 1.0;     // effective gamma_D
    double initial_attachment = 0.0;   // E(S0, S1) before scaling
    double min_face_area = 0.0;        // over every step of the returned state
    double max_step_displacement = 0.0;
    double mean_edge_length = 0.0;
    bool step_size_violation = false;  // max displacement >= mean edge length
};

struct RegistrationResult {
    FlowState state;
    ConvergenceReport report;
    RegistrationConfig effective_config;  // with gamma_D resolved
};

/// Thrown when the objective becomes non-finite; carries the last finite state.
class RegistrationAborted : public NumericalError {
public:
    RegistrationAborted(const std::string& what, FlowState last) : NumericalError(what), state_(std::move(last)) {}
    const FlowState& state() const { return state_; }

private:
    FlowState state_;
};

/// Augmented-Lagrangian outer loop around L-BFGS inner solves.
RegistrationResult optimize(const RegistrationConfig& config, const TriMesh& inner, const TriMesh& outer);

/// Flattening helpers shared with the optimizer and tests.
Eigen::VectorXd flatten(const std::vector<std::vector<Vec3>>& alpha);
std::vector<std::vector<Vec3>> unflatten(const Eigen::VectorXd& x, int n_steps, std::size_t n_vertices);

const char* to_string(ConstraintForm form);
ConstraintForm constraint_form_from_string(const std::string& name);
const char* to_string(LbfgsStatus status);

}  // namespace lamina
