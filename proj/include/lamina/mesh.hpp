#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lamina {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Face = std::array<int, 3>;

inline constexpr double kDefaultMinFaceArea = 1e-12;

/// Oriented triangulated surface, possibly with boundary.
///
/// Faces are vertex-index triples; orientation follows the winding (counter-clockwise
/// seen from the side the normal points to). Named per-vertex and per-face channels
/// travel with the mesh through VTK I/O.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::map<std::string, std::vector<double>> point_scalars;
    std::map<std::string, std::vector<Vec3>> point_vectors;
    std::map<std::string, std::vector<double>> face_scalars;

    std::size_t num_vertices() const { return vertices.size(); }
    std::size_t num_faces() const { return faces.size(); }
};

/// Checks index range, repeated vertices, face areas, edge manifoldness and consistent
/// orientation. Throws TopologyError or DegenerateFaceError.
void validate(const TriMesh& mesh, double min_area = kDefaultMinFaceArea);

struct FaceGeometry {
    std::vector<Vec3> normal;  // unit
    std::vector<double> area;
    std::vector<Vec3> centroid;
};

FaceGeometry face_geometry(const TriMesh& mesh, double min_area = kDefaultMinFaceArea);

/// Area-weighted vertex normals (normalized sum of incident face cross products).
std::vector<Vec3> vertex_normals(const TriMesh& mesh);
std::vector<Vec3> vertex_normals(std::span<const Vec3> positions, std::span<const Face> faces);

double one_ring_area(const TriMesh& mesh, int vertex);
std::vector<double> one_ring_areas(std::span<const Vec3> positions, std::span<const Face> faces);

/// Per-vertex flag: vertex lies on a boundary edge (an edge used by a single face).
std::vector<bool> boundary_vertices(const TriMesh& mesh);
bool is_closed(const TriMesh& mesh);

struct CurvatureField {
    std::vector<double> H;        // 1/mm; outward sphere of radius R gives -1/R
    std::vector<bool> boundary;   // values at flagged vertices are unreliable
};

/// Cotangent-Laplacian mean curvature with mixed Voronoi areas, sign chosen so that
/// -2H equals the surface divergence of the unit normal.
CurvatureField mean_curvature(const TriMesh& mesh);

struct DivergenceField {
    std::vector<double> div;
    std::vector<bool> boundary;
};

/// Tangential divergence of a per-vertex field. The normal component is removed with the
/// vertex normal, the field is interpolated linearly on each face, and the face-constant
/// divergences are area-averaged onto vertices.
DivergenceField surface_divergence(const TriMesh& mesh, std::span<const Vec3> field);

double mean_edge_length(const TriMesh& mesh);
double bounding_box_diagonal(std::span<const Vec3> points);

/// Same surface with every face winding reversed.
TriMesh flipped(const TriMesh& mesh);

/// Applies x -> R x + t to the vertices and R to vector channels.
TriMesh transformed(const TriMesh& mesh, const Mat3& rotation, const Vec3& translation);

}  // namespace lamina
