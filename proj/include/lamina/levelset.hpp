#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <unordered_map>
#include <vector>

#include "lamina/mesh.hpp"

namespace lamina {

enum class VoxelLabel : std::uint8_t { Inside = 0, Ribbon = 1, Outside = 2 };

/// Where the surfaces cut the six grid edges leaving a ribbon voxel, ordered
/// -x, +x, -y, +y, -z, +z. fraction is the distance to the surface in units of h
/// (1 when the neighbor is a ribbon voxel); value is the boundary value there.
struct BoundaryStencil {
    std::array<double, 6> fraction{1, 1, 1, 1, 1, 1};
    std::array<double, 6> value{};
    std::array<bool, 6> cut{};
};

/// Cell-centred grid: voxel (i, j, k) sits at origin + h (i, j, k).
struct ScalarGrid {
    Vec3 origin = Vec3::Zero();
    double h = 1.0;
    std::array<int, 3> dims{};
    std::vector<double> F;
    std::vector<VoxelLabel> label;
    std::unordered_map<std::size_t, BoundaryStencil> boundary;

    std::size_t size() const { return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]; }
    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
    }
    Vec3 center(int i, int j, int k) const { return origin + h * Vec3(i, j, k); }
    std::size_t count(VoxelLabel l) const;
};

/// Labels voxel centres by ray parity against both closed surfaces and records sub-voxel
/// crossings for the ribbon boundary. The grid covers the outer surface plus `padding` voxels.
/// Throws TopologyError for open or non-nested surfaces.
ScalarGrid voxelize(const TriMesh& inner, const TriMesh& outer, double h, int padding = 2);

/// Ribbon z0 < z < z1 between two planes, Neumann on the lateral sides.
ScalarGrid slab_grid(const Vec3& origin, double h, const std::array<int, 3>& dims, double z0, double z1);

struct SorOptions {
    double omega = 1.9;
    double tolerance = 1e-7;  // on the largest update of a sweep
    int max_sweeps = 200000;
};

struct SorReport {
    int sweeps = 0;
    double last_update = 0.0;
    bool converged = false;
};

/// Laplace equation on the ribbon, 0 on the inner surface and 1 on the outer one. Uses the
/// 7-point stencil, shortened next to the surfaces, with lexicographic SOR sweeps.
SorReport solve_laplace(ScalarGrid& grid, const SorOptions& options = {});

/// Solved potential extended a couple of voxels past the ribbon, with its gradient, for
/// trilinear sampling near and on the surfaces.
class LevelSetField {
public:
    explicit LevelSetField(const ScalarGrid& grid);

    /// False when some corner of the enclosing cell has no value.
    bool covers(const Vec3& x) const;
    double F(const Vec3& x) const;
    Vec3 gradient(const Vec3& x) const;
    /// -1/2 div(grad F / |grad F|), 1/mm; -1/r on concentric spheres.
    double mean_curvature(const Vec3& x) const;

    const ScalarGrid& grid() const { return grid_; }

private:
    bool cell(const Vec3& x, std::array<int, 3>& base, Vec3& frac) const;
    template <class T, class Get>
    T trilinear(const Vec3& x, Get get) const;

    const ScalarGrid& grid_;
    std::vector<double> value_;
    std::vector<bool> valid_;
    std::vector<Vec3> grad_;
    std::vector<bool> grad_valid_;
    std::vector<double> curvature_;
};

/// RK4 trace of x' = grad F / |grad F|^2 with steps of 0.01 in F, from F(seed) to F = 1.
/// Throws ConfigError when the seed is outside the ribbon and NumericalError on a stall.
std::vector<Vec3> levelset_streamline(const LevelSetField& field, const Vec3& seed, double step = 0.01);
double levelset_thickness(const LevelSetField& field, const Vec3& seed, double step = 0.01);

/// STRUCTURED_POINTS with point data F and label.
void write_grid_vtk(const ScalarGrid& grid, const std::filesystem::path& path);

}  // namespace lamina
