#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "lamina/kernel.hpp"
#include "lamina/mesh.hpp"
#include "lamina/registration.hpp"

namespace lamina {

/// Laminar coordinate system sampled along the streamlines of the inner-surface vertices.
/// Arrays indexed [step][seed] hold n_steps + 1 rows; normal_speed holds one row per step.
struct LaminarSystem {
    int n_steps = 0;
    std::vector<Face> faces;
    std::vector<std::vector<Vec3>> points;
    std::vector<std::vector<double>> sigma;
    std::vector<std::vector<double>> normal_speed;
    std::vector<std::vector<double>> tau;
    std::vector<double> c0;
    std::vector<double> thickness;
    std::vector<bool> flagged;  // c0 <= 0: the streamline is not a usable depth coordinate

    double dt() const { return 1.0 / n_steps; }
    std::size_t num_seeds() const { return points.empty() ? 0 : points.front().size(); }
};

/// Streamlines are the vertex trajectories of the flow, copied verbatim.
LaminarSystem streamlines_from_flow(const FlowState& state);

/// RK4 trace of y' = v_i(y) through the piecewise-constant-in-time field of the flow, with
/// `substeps` RK4 steps per flow step. Returns n_steps * substeps + 1 points.
std::vector<Vec3> streamline_from_point(const KernelSpec& kernel, const FlowState& state, const Vec3& seed,
                                        int substeps = 1);

/// Polyline length of each streamline.
std::vector<double> thickness(const LaminarSystem& system);
double polyline_length(std::span<const Vec3> line);

/// sigma[i][k] = one-ring area at step i / one-ring area at step 0.
std::vector<std::vector<double>> sigma_one_ring(const FlowState& state);
std::vector<std::vector<double>> sigma_one_ring(const std::vector<std::vector<Vec3>>& positions,
                                                std::span<const Face> faces);

/// Velocity and its spatial Jacobian at x during flow step `step`.
using VelocityField = std::function<void(int step, const Vec3& x, Vec3& v, Mat3& jacobian)>;

/// Evolves (y, zeta) with y' = v, zeta' = div(v) zeta - Dv^T zeta from (seed, unit normal);
/// sigma = |zeta|. Returns sigma[i][k] at the n_steps + 1 step boundaries.
std::vector<std::vector<double>> sigma_zeta_ode(const VelocityField& field, std::span<const Vec3> seeds,
                                                std::span<const Vec3> normals, int n_steps, int substeps = 4);

/// Same, with the flow's kernel field, seeded at the inner-surface vertices.
std::vector<std::vector<double>> sigma_zeta_ode(const KernelSpec& kernel, const FlowState& state, int substeps = 4);

/// Fills normal_speed, c0, tau and flagged from points and sigma (sigma must be set).
void equivolumetric_time_change(LaminarSystem& system);

/// Surface at relative volumetric depth eps in [0, 1], with S0's topology. Flagged seeds
/// take the crossing time of the nearest unflagged seed and carry point scalar "flagged".
TriMesh extract_layer(const LaminarSystem& system, double eps);

/// Relative depth rho in [0, 1] at which a tube with end-area ratio sigma1 holds the
/// fraction eps of its volume (area varies linearly with depth).
double waehnert_depth(double theta, double sigma1, double eps);

/// sigma' = -2 theta H sigma, sigma(0) = 1, along a constant-speed normal path. H is given
/// at increasing parameters u in [0, 1] (u.front() = 0) and linearly interpolated;
/// returns sigma at each u.
std::vector<double> leprince_sigma(std::span<const double> H, std::span<const double> u, double theta,
                                   int substeps = 8);
/// Uniform samples u_i = i / (H.size() - 1).
std::vector<double> leprince_sigma(std::span<const double> H, double theta, int substeps = 8);

/// Cumulative arc length fractions along a polyline (0 .. 1); all zeros for a point.
std::vector<double> arc_length_fractions(std::span<const Vec3> line);

/// Relative residual |sigma_t - sigma (div_S(tangential v) - 2 (nu.v) H)| / |sigma_t| of the
/// area transport identity for a sampled surface motion, at interior time steps 1..n-1.
/// sigma_t and v use central differences. NaN where a vertex is on the boundary or
/// sigma_t vanishes. Row 0 and row n are NaN.
std::vector<std::vector<double>> area_transport_residual(const std::vector<std::vector<Vec3>>& positions,
                                                         std::span<const Face> faces);
/// Same identity with the velocity given as a tangential field and a normal speed per
/// sample (rows indexed like positions), e.g. the exact decomposition of a prescribed flow.
std::vector<std::vector<double>> area_transport_residual(const std::vector<std::vector<Vec3>>& positions,
                                                         std::span<const Face> faces,
                                                         const std::vector<std::vector<Vec3>>& tangential,
                                                         const std::vector<std::vector<double>>& normal_speed);

/// Streamlines with per-point "tau" and "sigma" and per-line "thickness", "c0", "flagged".
void write_streamlines_vtk(const LaminarSystem& system, const std::filesystem::path& path);

/// CSV: seed,thickness,c0,flagged
void write_seed_table_csv(const LaminarSystem& system, const std::filesystem::path& path);

}  // namespace lamina
