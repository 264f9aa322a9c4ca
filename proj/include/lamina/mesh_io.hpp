#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lamina/mesh.hpp"

namespace lamina {

enum class MeshFormat { Off, Vtk };

/// Picks the format from the file extension (.off / .vtk).
MeshFormat format_from_path(const std::filesystem::path& path);

/// Loads and validates a mesh. Parse failures raise ParseError with the line number;
/// orientation problems raise TopologyError.
TriMesh load_mesh(const std::filesystem::path& path, MeshFormat format);
TriMesh load_mesh(const std::filesystem::path& path);

/// Writes a mesh. OFF carries geometry only; VTK also writes every named channel.
void save_mesh(const TriMesh& mesh, const std::filesystem::path& path, MeshFormat format);
void save_mesh(const TriMesh& mesh, const std::filesystem::path& path);

TriMesh read_off(std::istream& in);
void write_off(const TriMesh& mesh, std::ostream& out);
TriMesh read_vtk(std::istream& in);
void write_vtk(const TriMesh& mesh, std::ostream& out);

struct PolylineSet {
    std::vector<std::vector<Vec3>> lines;
    std::map<std::string, std::vector<std::vector<double>>> point_scalars;  // per line, per point
    std::map<std::string, std::vector<double>> line_scalars;               // one value per line
};

void write_vtk_polylines(const PolylineSet& set, const std::filesystem::path& path);

struct StructuredPoints {
    std::array<int, 3> dims{};
    Vec3 origin = Vec3::Zero();
    double spacing = 1.0;
    std::map<std::string, std::vector<double>> scalars;  // x-fastest ordering
};

void write_vtk_structured_points(const StructuredPoints& grid, const std::filesystem::path& path);

}  // namespace lamina
