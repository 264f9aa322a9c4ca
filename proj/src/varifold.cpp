#include "lamina/varifold.hpp"

#include <cmath>

#include "lamina/errors.hpp"

namespace lamina {

namespace {

// Per-face partial derivatives of D(S, X) with X held fixed: with respect to the centroid
// and to the half cross product of face f of S.
void one_sided_partials(const VarifoldSpec& spec, const FaceSamples& s, const FaceSamples& x,
                        std::vector<Vec3>& d_centroid, std::vector<Vec3>& d_area_normal, double scale) {
    const double inv_s2 = 1.0 / (spec.width * spec.width);
    const long m = static_cast<long>(s.area.size());
#pragma omp parallel for schedule(static)
    for (long f = 0; f < m; ++f) {
        const Vec3 unit = s.area_normal[f] / s.area[f];
        Vec3 gc = Vec3::Zero();
        Vec3 gn = Vec3::Zero();
        for (std::size_t g = 0; g < x.area.size(); ++g) {
            const Vec3 d = s.centroid[f] - x.centroid[g];
            const double chi = std::exp(-0.5 * d.squaredNorm() * inv_s2);
            const double aa = s.area[f] * x.area[g];
            const double nn = s.area_normal[f].dot(x.area_normal[g]);
            const double w = aa + nn * nn / aa;
            gc -= (chi * w * inv_s2) * d;
            // w = A_f A_g + (n_f . n_g)^2 / (A_f A_g) with n the area normals; dA_f/dn_f = unit.
            gn += chi * ((x.area[g] - nn * nn / (aa * s.area[f])) * unit + (2.0 * nn / aa) * x.area_normal[g]);
        }
        d_centroid[f] += scale * gc;
        d_area_normal[f] += scale * gn;
    }
}

}  // namespace

void VarifoldSpec::validate() const {
    if (!(width > 0.0)) throw ConfigError("varifold: width must be > 0");
}

FaceSamples face_samples(std::span<const Vec3> positions, std::span<const Face> faces, double min_area) {
    FaceSamples s;
    s.centroid.resize(faces.size());
    s.area_normal.resize(faces.size());
    s.area.resize(faces.size());
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const Vec3& a = positions[faces[f][0]];
        const Vec3& b = positions[faces[f][1]];
        const Vec3& c = positions[faces[f][2]];
        s.area_normal[f] = 0.5 * (b - a).cross(c - a);
        s.area[f] = s.area_normal[f].norm();
        if (!(s.area[f] > min_area)) throw DegenerateFaceError(f, s.area[f]);
        s.centroid[f] = (a + b + c) / 3.0;
    }
    return s;
}

namespace {

// Strict total order on sample sets so that (s, t) and (t, s) run the same loop.
bool precedes(const FaceSamples& a, const FaceSamples& b) {
    if (a.area.size() != b.area.size()) return a.area.size() < b.area.size();
    for (std::size_t f = 0; f < a.area.size(); ++f) {
        if (a.area[f] != b.area[f]) return a.area[f] < b.area[f];
        for (int d = 0; d < 3; ++d) {
            if (a.centroid[f][d] != b.centroid[f][d]) return a.centroid[f][d] < b.centroid[f][d];
            if (a.area_normal[f][d] != b.area_normal[f][d]) return a.area_normal[f][d] < b.area_normal[f][d];
        }
    }
    return false;
}

}  // namespace

double varifold_bilinear(const VarifoldSpec& spec, const FaceSamples& first, const FaceSamples& second) {
    spec.validate();
    const bool swap = precedes(second, first);
    const FaceSamples& s = swap ? second : first;
    const FaceSamples& t = swap ? first : second;
    const double inv_s2 = 1.0 / (spec.width * spec.width);
    const long m = static_cast<long>(s.area.size());
    std::vector<double> rows(s.area.size(), 0.0);
#pragma omp parallel for schedule(static)
    for (long f = 0; f < m; ++f) {
        double row = 0.0;
        for (std::size_t g = 0; g < t.area.size(); ++g) {
            const double chi = std::exp(-0.5 * (s.centroid[f] - t.centroid[g]).squaredNorm() * inv_s2);
            const double aa = s.area[f] * t.area[g];
            const double nn = s.area_normal[f].dot(t.area_normal[g]);
            row += chi * (aa + nn * nn / aa);
        }
        rows[f] = row;
    }
    double sum = 0.0;
    for (double r : rows) sum += r;
    return sum;
}

double varifold_bilinear(const VarifoldSpec& spec, const TriMesh& s, const TriMesh& t) {
    return varifold_bilinear(spec, face_samples(s.vertices, s.faces), face_samples(t.vertices, t.faces));
}

double varifold_energy(const VarifoldSpec& spec, const TriMesh& s, const TriMesh& t) {
    const auto ts = face_samples(t.vertices, t.faces);
    return varifold_energy_and_gradient(spec, s.vertices, s.faces, ts, varifold_bilinear(spec, ts, ts), nullptr);
}

std::vector<Vec3> varifold_gradient(const VarifoldSpec& spec, const TriMesh& s, const TriMesh& t) {
    const auto ts = face_samples(t.vertices, t.faces);
    std::vector<Vec3> grad;
    varifold_energy_and_gradient(spec, s.vertices, s.faces, ts, varifold_bilinear(spec, ts, ts), &grad);
    return grad;
}

double varifold_energy_and_gradient(const VarifoldSpec& spec, std::span<const Vec3> positions,
                                    std::span<const Face> faces, const FaceSamples& target, double target_self,
                                    std::vector<Vec3>* grad) {
    spec.validate();
    const auto s = face_samples(positions, faces);
    const double self = varifold_bilinear(spec, s, s);
    const double cross = varifold_bilinear(spec, s, target);
    const double scale = spec.normalize ? 1.0 / target_self : 1.0;
    const double energy = scale * (self - 2.0 * cross + target_self);
    if (!grad) return energy;

    std::vector<Vec3> d_centroid(faces.size(), Vec3::Zero());
    std::vector<Vec3> d_area_normal(faces.size(), Vec3::Zero());
    // d/dS D(S,S) is twice the one-sided derivative.
    one_sided_partials(spec, s, s, d_centroid, d_area_normal, 2.0 * scale);
    one_sided_partials(spec, s, target, d_centroid, d_area_normal, -2.0 * scale);

    grad->assign(positions.size(), Vec3::Zero());
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const Face& fc = faces[f];
        const Vec3 e1 = positions[fc[1]] - positions[fc[0]];
        const Vec3 e2 = positions[fc[2]] - positions[fc[0]];
        const Vec3 g = 0.5 * d_area_normal[f];  // area_normal = cross / 2
        const Vec3 g1 = e2.cross(g);
        const Vec3 g2 = g.cross(e1);
        const Vec3 gc = d_centroid[f] / 3.0;
        (*grad)[fc[0]] += gc - g1 - g2;
        (*grad)[fc[1]] += gc + g1;
        (*grad)[fc[2]] += gc + g2;
    }
    return energy;
}

}  // namespace lamina
