#include "lamina/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>

#include "lamina/errors.hpp"

namespace lamina {

namespace {

std::uint64_t edge_key(int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
}

Vec3 face_cross(std::span<const Vec3> x, const Face& f) {
    return (x[f[1]] - x[f[0]]).cross(x[f[2]] - x[f[0]]);
}

// Number of faces using each undirected edge.
std::unordered_map<std::uint64_t, int> undirected_edge_counts(std::span<const Face> faces) {
    std::unordered_map<std::uint64_t, int> counts;
    counts.reserve(faces.size() * 3);
    for (const Face& f : faces) {
        for (int e = 0; e < 3; ++e) {
            const int a = f[e], b = f[(e + 1) % 3];
            ++counts[edge_key(std::min(a, b), std::max(a, b))];
        }
    }
    return counts;
}

}  // namespace

void validate(const TriMesh& mesh, double min_area) {
    const int n = static_cast<int>(mesh.vertices.size());
    std::unordered_map<std::uint64_t, std::size_t> directed;
    directed.reserve(mesh.faces.size() * 3);
    for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
        const Face& f = mesh.faces[fi];
        for (int idx : f) {
            if (idx < 0 || idx >= n) {
                throw TopologyError("face " + std::to_string(fi) + " references vertex " +
                                    std::to_string(idx) + " but the mesh has " + std::to_string(n) +
                                    " vertices");
            }
        }
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
            throw TopologyError("face " + std::to_string(fi) + " repeats a vertex");
        }
        for (int e = 0; e < 3; ++e) {
            const auto key = edge_key(f[e], f[(e + 1) % 3]);
            auto [it, inserted] = directed.emplace(key, fi);
            if (!inserted) {
                throw TopologyError("inconsistent orientation: edge (" + std::to_string(f[e]) + "," +
                                    std::to_string(f[(e + 1) % 3]) + ") traversed in the same direction by faces " +
                                    std::to_string(it->second) + " and " + std::to_string(fi));
            }
        }
    }
    for (const auto& [key, count] : undirected_edge_counts(mesh.faces)) {
        if (count > 2) {
            throw TopologyError("non-manifold edge (" + std::to_string(key >> 32) + "," +
                                std::to_string(key & 0xffffffffu) + ") shared by " + std::to_string(count) +
                                " faces");
        }
    }
    for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
        const double area = 0.5 * face_cross(mesh.vertices, mesh.faces[fi]).norm();
        if (!(area > min_area)) throw DegenerateFaceError(fi, area);
    }
}

FaceGeometry face_geometry(const TriMesh& mesh, double min_area) {
    const std::size_t m = mesh.faces.size();
    FaceGeometry g;
    g.normal.resize(m);
    g.area.resize(m);
    g.centroid.resize(m);
    for (std::size_t fi = 0; fi < m; ++fi) {
        const Face& f = mesh.faces[fi];
        const Vec3 c = face_cross(mesh.vertices, f);
        const double twice = c.norm();
        if (!(0.5 * twice > min_area)) throw DegenerateFaceError(fi, 0.5 * twice);
        g.normal[fi] = c / twice;
        g.area[fi] = 0.5 * twice;
        g.centroid[fi] = (mesh.vertices[f[0]] + mesh.vertices[f[1]] + mesh.vertices[f[2]]) / 3.0;
    }
    return g;
}

std::vector<Vec3> vertex_normals(std::span<const Vec3> positions, std::span<const Face> faces) {
    std::vector<Vec3> acc(positions.size(), Vec3::Zero());
    for (const Face& f : faces) {
        const Vec3 c = face_cross(positions, f);
        for (int v : f) acc[v] += c;
    }
    for (std::size_t v = 0; v < acc.size(); ++v) {
        const double len = acc[v].norm();
        if (!(len > 0.0)) {
            throw TopologyError("vertex " + std::to_string(v) + " has no incident face (or zero normal)");
        }
        acc[v] /= len;
    }
    return acc;
}

std::vector<Vec3> vertex_normals(const TriMesh& mesh) {
    return vertex_normals(mesh.vertices, mesh.faces);
}

double one_ring_area(const TriMesh& mesh, int vertex) {
    if (vertex < 0 || vertex >= static_cast<int>(mesh.vertices.size())) {
        throw ConfigError("vertex index " + std::to_string(vertex) + " out of range");
    }
    double area = 0.0;
    for (const Face& f : mesh.faces) {
        if (f[0] == vertex || f[1] == vertex || f[2] == vertex) {
            area += 0.5 * face_cross(mesh.vertices, f).norm();
        }
    }
    return area;
}

std::vector<double> one_ring_areas(std::span<const Vec3> positions, std::span<const Face> faces) {
    std::vector<double> a(positions.size(), 0.0);
    for (const Face& f : faces) {
        const double area = 0.5 * face_cross(positions, f).norm();
        for (int v : f) a[v] += area;
    }
    return a;
}

std::vector<bool> boundary_vertices(const TriMesh& mesh) {
    std::vector<bool> flag(mesh.vertices.size(), false);
    for (const auto& [key, count] : undirected_edge_counts(mesh.faces)) {
        if (count == 1) {
            flag[key >> 32] = true;
            flag[key & 0xffffffffu] = true;
        }
    }
    return flag;
}

bool is_closed(const TriMesh& mesh) {
    if (mesh.faces.empty()) return false;
    for (const auto& [key, count] : undirected_edge_counts(mesh.faces)) {
        if (count != 2) return false;
    }
    return true;
}

CurvatureField mean_curvature(const TriMesh& mesh) {
    const std::size_t n = mesh.vertices.size();
    const auto& x = mesh.vertices;
    std::vector<Vec3> laplace(n, Vec3::Zero());
    std::vector<double> mixed_area(n, 0.0);

    for (const Face& f : mesh.faces) {
        const Vec3 c = face_cross(x, f);
        const double twice_area = c.norm();
        const double area = 0.5 * twice_area;
        std::array<double, 3> cot{};
        bool obtuse_any = false;
        std::array<bool, 3> obtuse_at{};
        for (int j = 0; j < 3; ++j) {
            const Vec3 u = x[f[(j + 1) % 3]] - x[f[j]];
            const Vec3 w = x[f[(j + 2) % 3]] - x[f[j]];
            const double dot = u.dot(w);
            cot[j] = dot / twice_area;
            obtuse_at[j] = dot < 0.0;
            obtuse_any = obtuse_any || obtuse_at[j];
        }
        for (int j = 0; j < 3; ++j) {
            const int i0 = f[j], i1 = f[(j + 1) % 3], i2 = f[(j + 2) % 3];
            // angle at i2 is opposite edge (i0,i1); angle at i1 is opposite edge (i0,i2)
            const double cot_opp01 = cot[(j + 2) % 3];
            const double cot_opp02 = cot[(j + 1) % 3];
            laplace[i0] += cot_opp01 * (x[i1] - x[i0]) + cot_opp02 * (x[i2] - x[i0]);
            if (!obtuse_any) {
                mixed_area[i0] += 0.125 * ((x[i1] - x[i0]).squaredNorm() * cot_opp01 +
                                           (x[i2] - x[i0]).squaredNorm() * cot_opp02);
            } else if (obtuse_at[j]) {
                mixed_area[i0] += 0.5 * area;
            } else {
                mixed_area[i0] += 0.25 * area;
            }
        }
    }

    const auto normals = vertex_normals(mesh);
    CurvatureField out;
    out.H.resize(n);
    out.boundary = boundary_vertices(mesh);
    for (std::size_t v = 0; v < n; ++v) {
        // Laplace-Beltrami of the position equals 2 H nu under this sign convention.
        const Vec3 lb = laplace[v] / (2.0 * mixed_area[v]);
        out.H[v] = 0.5 * lb.dot(normals[v]);
    }
    return out;
}

DivergenceField surface_divergence(const TriMesh& mesh, std::span<const Vec3> field) {
    const std::size_t n = mesh.vertices.size();
    if (field.size() != n) throw ConfigError("surface_divergence: field size does not match vertex count");
    const auto normals = vertex_normals(mesh);
    std::vector<Vec3> tangent(n);
    for (std::size_t v = 0; v < n; ++v) {
        tangent[v] = field[v] - normals[v].dot(field[v]) * normals[v];
    }

    std::vector<double> acc(n, 0.0), weight(n, 0.0);
    const auto& x = mesh.vertices;
    for (const Face& f : mesh.faces) {
        const Vec3 c = face_cross(x, f);
        const double twice_area = c.norm();
        const Vec3 nrm = c / twice_area;
        double div = 0.0;
        for (int j = 0; j < 3; ++j) {
            const Vec3 opposite = x[f[(j + 2) % 3]] - x[f[(j + 1) % 3]];
            const Vec3 grad_hat = nrm.cross(opposite) / twice_area;
            div += tangent[f[j]].dot(grad_hat);
        }
        const double area = 0.5 * twice_area;
        for (int v : f) {
            acc[v] += area * div;
            weight[v] += area;
        }
    }
    DivergenceField out;
    out.div.resize(n);
    out.boundary = boundary_vertices(mesh);
    for (std::size_t v = 0; v < n; ++v) out.div[v] = weight[v] > 0.0 ? acc[v] / weight[v] : 0.0;
    return out;
}

double mean_edge_length(const TriMesh& mesh) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const Face& f : mesh.faces) {
        for (int e = 0; e < 3; ++e) {
            sum += (mesh.vertices[f[(e + 1) % 3]] - mesh.vertices[f[e]]).norm();
            ++count;
        }
    }
    return count ? sum / static_cast<double>(count) : 0.0;
}

double bounding_box_diagonal(std::span<const Vec3> points) {
    if (points.empty()) return 0.0;
    Vec3 lo = points[0], hi = points[0];
    for (const Vec3& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
}

TriMesh flipped(const TriMesh& mesh) {
    TriMesh out = mesh;
    for (Face& f : out.faces) std::swap(f[1], f[2]);
    return out;
}

TriMesh transformed(const TriMesh& mesh, const Mat3& rotation, const Vec3& translation) {
    TriMesh out = mesh;
    for (Vec3& v : out.vertices) v = rotation * v + translation;
    for (auto& [name, channel] : out.point_vectors) {
        for (Vec3& v : channel) v = rotation * v;
    }
    return out;
}

}  // namespace lamina
