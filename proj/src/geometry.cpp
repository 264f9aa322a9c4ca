#include "lamina/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <unsupported/Eigen/BVH>

namespace lamina {

namespace {

using Box = Eigen::AlignedBox<double, 3>;

struct ClosestTriangle {
    using Scalar = double;
    const TriMesh& mesh;
    Vec3 p;

    double minimumOnVolume(const Box& b) const { return b.squaredExteriorDistance(p); }
    double minimumOnObject(int fi) const {
        const Face& f = mesh.faces[fi];
        return (p - closest_point_on_triangle(p, mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]))
            .squaredNorm();
    }
};

}  // namespace

struct TriangleTree::Impl {
    const TriMesh& mesh;
    Eigen::KdBVH<double, 3, int> tree;
};

TriangleTree::TriangleTree(const TriMesh& mesh) {
    std::vector<int> ids(mesh.faces.size());
    std::iota(ids.begin(), ids.end(), 0);
    std::vector<Box> boxes;
    boxes.reserve(mesh.faces.size());
    for (const Face& f : mesh.faces) {
        Box b(mesh.vertices[f[0]]);
        b.extend(mesh.vertices[f[1]]);
        b.extend(mesh.vertices[f[2]]);
        boxes.push_back(b);
    }
    impl_.reset(new Impl{mesh, Eigen::KdBVH<double, 3, int>(ids.begin(), ids.end(), boxes.begin(), boxes.end())});
}

TriangleTree::~TriangleTree() = default;

double TriangleTree::distance(const Vec3& p) const {
    if (impl_->mesh.faces.empty()) return std::numeric_limits<double>::infinity();
    ClosestTriangle m{impl_->mesh, p};
    return std::sqrt(Eigen::BVMinimize(impl_->tree, m));
}

}  // namespace lamina
