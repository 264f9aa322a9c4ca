#pragma once

#include <span>
#include <vector>

#include "lamina/mesh.hpp"

namespace lamina {

struct KernelComponent {
    double width = 1.0;   // mm
    double weight = 1.0;
};

/// Scalar Gaussian (or a weighted sum of Gaussians) times the 3x3 identity:
/// K(x, y) = sum_j w_j exp(-|x - y|^2 / (2 s_j^2)) Id.
struct KernelSpec {
    std::vector<KernelComponent> components;

    static KernelSpec gaussian(double width) { return KernelSpec{{{width, 1.0}}}; }

    /// Throws ConfigError unless there is at least one component with positive width and weight.
    void validate() const;

    /// Profile g(r2) and its first two derivatives with respect to r2 = |x - y|^2.
    double value(double r2) const;
    double d1(double r2) const;
    double d2(double r2) const;

    /// g and dg/dr2 together, one exponential per component.
    void value_and_d1(double r2, double& g, double& g1) const;

    /// Largest component width; used for FD step sizes and far-field checks.
    double max_width() const;
};

Vec3 eval_velocity(const KernelSpec& spec, std::span<const Vec3> points, std::span<const Vec3> momenta,
                   const Vec3& x);

/// Exact spatial Jacobian Dv(x), row i = gradient of component i.
Mat3 eval_velocity_jacobian(const KernelSpec& spec, std::span<const Vec3> points, std::span<const Vec3> momenta,
                            const Vec3& x);

/// v evaluated at many points; parallel over targets, each sum accumulated in index order.
std::vector<Vec3> eval_velocity_at(const KernelSpec& spec, std::span<const Vec3> points,
                                   std::span<const Vec3> momenta, std::span<const Vec3> targets);

/// |v|_V^2 = sum_{k,l} a_k^T K(q_k, q_l) a_l.
double vnorm_sq(const KernelSpec& spec, std::span<const Vec3> points, std::span<const Vec3> momenta);

/// |v|_V^2 + lambda_h * sum_faces area_f |Dv(centroid_f)|_F^2 with particles at the mesh vertices.
double hybrid_norm_sq(const KernelSpec& spec, const TriMesh& mesh_at_q, std::span<const Vec3> momenta,
                      double lambda_h);

}  // namespace lamina
