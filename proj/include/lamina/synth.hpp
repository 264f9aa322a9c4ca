#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "lamina/mesh.hpp"

namespace lamina {

enum class FixtureKind { SpherePair, CylinderPair, SheetPair, FoldedSheetPair, FlowerTubePair };

const char* to_string(FixtureKind kind);
FixtureKind fixture_kind_from_string(const std::string& name);

/// Parameters of a synthetic inner/outer pair. Not every field applies to every kind:
///  - sphere-pair: inner_radius a, outer_radius b, subdivision
///  - cylinder-pair: a, b, height, around, along, capped
///  - sheet-pair: separation d, extent, resolution
///  - folded-sheet-pair: amplitude A, wavelength L, separation d, extent, resolution
///  - flower-tube-pair: a (inner tube), b (mean outer radius), amplitude, lobes, height, around, along, capped
struct FixtureSpec {
    FixtureKind kind = FixtureKind::SpherePair;
    double inner_radius = 1.0;
    double outer_radius = 2.0;
    int subdivision = 3;
    double height = 4.0;
    int around = 48;
    int along = 16;
    bool capped = false;
    double separation = 0.3;
    double extent = 4.0;
    int resolution = 24;
    double amplitude = 0.5;
    double wavelength = 2.0;
    int lobes = 5;
    double inner_jitter = 0.0;  // random tangential vertex displacement of the inner surface, in mean edge lengths
    std::uint64_t seed = 0;

    void validate() const;
};

struct Fixture {
    TriMesh inner;
    TriMesh outer;
};

/// Builds the pair; both surfaces are oriented so their normals point from inner to outer.
/// Throws ConfigError when the parameters give intersecting surfaces.
Fixture generate(const FixtureSpec& spec);

TriMesh icosphere(int subdivision, double radius);

/// Closed-form references; empty when the fixture has no analytic answer.
std::optional<double> oracle_thickness(const FixtureSpec& spec, const Vec3& point);
/// Sphere/cylinder: radius of the equivolume layer at eps; sheet: its height above the inner sheet.
std::optional<double> oracle_layer_radius(const FixtureSpec& spec, double eps);
/// Harmonic interpolant between the surfaces (0 on inner, 1 on outer).
std::optional<double> oracle_F(const FixtureSpec& spec, const Vec3& point);
/// Mean curvature of the inner surface under the outward-sphere-is-negative convention.
std::optional<double> oracle_inner_mean_curvature(const FixtureSpec& spec);

nlohmann::json oracle_json(const FixtureSpec& spec);
nlohmann::json to_json(const FixtureSpec& spec);
FixtureSpec fixture_spec_from_json(const nlohmann::json& j);

/// Smallest distance from a vertex of b to the surface a (point-to-triangle).
double min_vertex_to_surface_distance(const TriMesh& a, const TriMesh& b);

}  // namespace lamina
