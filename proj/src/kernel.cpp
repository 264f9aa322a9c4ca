#include "lamina/kernel.hpp"

#include <cmath>

#include "lamina/errors.hpp"

namespace lamina {

namespace {

void check_sizes(std::span<const Vec3> points, std::span<const Vec3> momenta) {
    if (points.size() != momenta.size()) throw ConfigError("kernel: points and momenta differ in length");
    if (points.empty()) throw ConfigError("kernel: at least one point is required");
}

}  // namespace

void KernelSpec::validate() const {
    if (components.empty()) throw ConfigError("kernel: at least one component is required");
    for (const auto& c : components) {
        if (!(c.width > 0.0)) throw ConfigError("kernel: widths must be > 0");
        if (!(c.weight > 0.0)) throw ConfigError("kernel: weights must be > 0");
    }
}

double KernelSpec::value(double r2) const {
    double g = 0.0;
    for (const auto& c : components) g += c.weight * std::exp(-r2 / (2.0 * c.width * c.width));
    return g;
}

double KernelSpec::d1(double r2) const {
    double g = 0.0;
    for (const auto& c : components) {
        const double s2 = c.width * c.width;
        g -= c.weight / (2.0 * s2) * std::exp(-r2 / (2.0 * s2));
    }
    return g;
}

double KernelSpec::d2(double r2) const {
    double g = 0.0;
    for (const auto& c : components) {
        const double s2 = c.width * c.width;
        g += c.weight / (4.0 * s2 * s2) * std::exp(-r2 / (2.0 * s2));
    }
    return g;
}

void KernelSpec::value_and_d1(double r2, double& g, double& g1) const {
    g = 0.0;
    g1 = 0.0;
    for (const auto& c : components) {
        const double inv = 1.0 / (2.0 * c.width * c.width);
        const double e = c.weight * std::exp(-r2 * inv);
        g += e;
        g1 -= inv * e;
    }
}

double KernelSpec::max_width() const {
    double w = 0.0;
    for (const auto& c : components) w = std::max(w, c.width);
    return w;
}

Vec3 eval_velocity(const KernelSpec& spec, std::span<const Vec3> points, std::span<const Vec3> momenta,
                   const Vec3& x) {
    check_sizes(points, momenta);
    Vec3 v = Vec3::Zero();
    for (std::size_t l = 0; l < points.size(); ++l) v += spec.value((x - points[l]).squaredNorm()) * momenta[l];
    return v;
}

Mat3 eval_velocity_jacobian(const KernelSpec& spec, std::span<const Vec3> points, std::span<const Vec3> momenta,
                            const Vec3& x) {
    check_sizes(points, momenta);
    Mat3 dv = Mat3::Zero();
    for (std::size_t l = 0; l < points.size(); ++l) {
        const Vec3 d = x - points[l];
        dv += (2.0 * spec.d1(d.squaredNorm())) * momenta[l] * d.transpose();
    }
    return dv;
}

std::vector<Vec3> eval_velocity_at(const KernelSpec& spec, std::span<const Vec3> points,
                                   std::span<const Vec3> momenta, std::span<const Vec3> targets) {
    check_sizes(points, momenta);
    std::vector<Vec3> out(targets.size());
    const long n = static_cast<long>(targets.size());
#pragma omp parallel for schedule(static)
    for (long k = 0; k < n; ++k) {
        Vec3 v = Vec3::Zero();
        for (std::size_t l = 0; l < points.size(); ++l) {
            v += spec.value((targets[k] - points[l]).squaredNorm()) * momenta[l];
        }
        out[k] = v;
    }
    return out;
}

double vnorm_sq(const KernelSpec& spec, std::span<const Vec3> points, std::span<const Vec3> momenta) {
    const auto v = eval_velocity_at(spec, points, momenta, points);
    double sum = 0.0;
    for (std::size_t k = 0; k < points.size(); ++k) sum += momenta[k].dot(v[k]);
    return sum;
}

double hybrid_norm_sq(const KernelSpec& spec, const TriMesh& mesh_at_q, std::span<const Vec3> momenta,
                      double lambda_h) {
    if (lambda_h < 0.0) throw ConfigError("hybrid norm weight must be >= 0");
    const std::span<const Vec3> q = mesh_at_q.vertices;
    const double base = vnorm_sq(spec, q, momenta);
    if (lambda_h == 0.0) return base;
    const auto geo = face_geometry(mesh_at_q);
    double surface = 0.0;
    for (std::size_t f = 0; f < geo.area.size(); ++f) {
        surface += geo.area[f] * eval_velocity_jacobian(spec, q, momenta, geo.centroid[f]).squaredNorm();
    }
    return base + lambda_h * surface;
}

}  // namespace lamina
