#pragma once

#include <span>
#include <vector>

#include "lamina/mesh.hpp"

namespace lamina {

struct VarifoldSpec {
    double width = 1.0;       // Gaussian spatial kernel width (mm)
    bool normalize = false;   // divide the energy by the target self-product D(T, T)

    void validate() const;
};

/// One quadrature point per face: centroid, area and half cross product (area times unit normal).
struct FaceSamples {
    std::vector<Vec3> centroid;
    std::vector<Vec3> area_normal;
    std::vector<double> area;
};

FaceSamples face_samples(std::span<const Vec3> positions, std::span<const Face> faces,
                         double min_area = kDefaultMinFaceArea);

/// D(S, T) = sum_f sum_g chi(c_f, c_g) A_f A_g (1 + (u_f . u_g)^2) with u the unit normals,
/// i.e. the unoriented varifold inner product with one centroid sample per face.
double varifold_bilinear(const VarifoldSpec& spec, const FaceSamples& s, const FaceSamples& t);
double varifold_bilinear(const VarifoldSpec& spec, const TriMesh& s, const TriMesh& t);

/// Squared varifold distance D(S,S) - 2 D(S,T) + D(T,T) (optionally normalized).
double varifold_energy(const VarifoldSpec& spec, const TriMesh& s, const TriMesh& t);

/// Gradient of the energy with respect to the vertices of S.
std::vector<Vec3> varifold_gradient(const VarifoldSpec& spec, const TriMesh& s, const TriMesh& t);

/// Energy and gradient for S given as positions over fixed topology, against a precomputed target.
/// target_self is D(T, T). Writes the gradient into grad (resized to positions.size()).
double varifold_energy_and_gradient(const VarifoldSpec& spec, std::span<const Vec3> positions,
                                    std::span<const Face> faces, const FaceSamples& target, double target_self,
                                    std::vector<Vec3>* grad);

}  // namespace lamina
