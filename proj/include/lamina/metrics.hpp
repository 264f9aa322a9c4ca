#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lamina/laminar.hpp"
#include "lamina/mesh.hpp"

namespace lamina {

struct DistributionSummary {
    std::size_t count = 0;
    double mean = 0.0;
    double stddev = 0.0;
    double min = 0.0;
    double max = 0.0;
    double median = 0.0;
    double q05 = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    double q95 = 0.0;
};

/// Linear-interpolation quantiles over the sorted values; zeros when empty.
DistributionSummary summarize(std::span<const double> values);

/// Per-vertex distances of a source surface (or per-seed thicknesses) with provenance.
struct DistanceDistribution {
    std::string kind;    // "fs_distance", "thickness", ...
    std::string source;
    std::string target;
    std::vector<double> values;
    std::size_t excluded = 0;  // seeds left out (flagged streamlines)

    DistributionSummary summary() const { return summarize(values); }
};

enum class NearestSearch { BruteForce, Grid };

/// Index of the nearest point for each query; ties go to the lowest index.
std::vector<int> nearest_points(std::span<const Vec3> points, std::span<const Vec3> queries,
                                NearestSearch method = NearestSearch::Grid);

/// Symmetrized nearest-vertex distance from inner to outer: for r in inner, f(r) is its
/// nearest outer vertex and g(f(r)) the nearest inner vertex to that, and
/// d = (|r - f(r)| + |f(r) - g(f(r))|) / 2. `squared` uses squared distances instead.
DistanceDistribution fs_distance(const TriMesh& inner, const TriMesh& outer, bool squared = false,
                                 NearestSearch method = NearestSearch::Grid);

/// Streamline thicknesses, flagged seeds excluded and counted.
DistanceDistribution thickness_distribution(const LaminarSystem& system);

struct CdfTable {
    std::vector<double> bin_upper;
    std::vector<double> cum_fraction;
};

/// n_bins equal bins over [min, max]; cum_fraction[b] is the fraction of values <= bin_upper[b].
CdfTable cdf(std::span<const double> values, int n_bins);

/// Summaries of every distribution, mean differences of every pair, and the flag
/// `underestimates` (mean fs_distance below mean thickness) when both kinds are present.
nlohmann::json compare_report(const std::vector<DistanceDistribution>& distributions);

nlohmann::json to_json(const DistributionSummary& s);

/// index,distance
void write_distance_csv(const DistanceDistribution& dist, const std::filesystem::path& path);
/// bin_upper,cum_fraction
void write_cdf_csv(const CdfTable& table, const std::filesystem::path& path);
/// a,b,mean_a,mean_b,mean_difference
void write_compare_csv(const nlohmann::json& report, const std::filesystem::path& path);

}  // namespace lamina
