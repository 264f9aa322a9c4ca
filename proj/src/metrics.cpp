#include "lamina/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "lamina/errors.hpp"

namespace lamina {

namespace {

double quantile(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return 0.0;
    const double pos = p * (sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
}

// Lexicographic (squared distance, index) comparison keeps both search paths identical.
inline bool closer(double d2, int idx, double best_d2, int best_idx) {
    return d2 < best_d2 || (d2 == best_d2 && idx < best_idx);
}

class PointGrid {
public:
    explicit PointGrid(std::span<const Vec3> points) : points_(points) {
        lo_ = Vec3::Constant(std::numeric_limits<double>::infinity());
        Vec3 hi = -lo_;
        for (const Vec3& p : points) {
            lo_ = lo_.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        const Vec3 ext = (hi - lo_).cwiseMax(1e-12);
        const double target = std::max(1.0, std::cbrt(static_cast<double>(points.size())));
        cell_ = std::max(ext.maxCoeff() / target, 1e-12);
        for (int d = 0; d < 3; ++d) dims_[d] = std::max(1, static_cast<int>(std::floor(ext[d] / cell_)) + 1);
        cells_.resize(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2]);
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto c = cell_of(points[i]);
            cells_[index(c[0], c[1], c[2])].push_back(static_cast<int>(i));
        }
    }

    int nearest(const Vec3& q) const {
        const auto c = cell_of(q);
        double best_d2 = std::numeric_limits<double>::infinity();
        int best = -1;
        const int max_ring = std::max({dims_[0], dims_[1], dims_[2]});
        for (int ring = 0; ring <= max_ring; ++ring) {
            for (int k = c[2] - ring; k <= c[2] + ring; ++k) {
                if (k < 0 || k >= dims_[2]) continue;
                for (int j = c[1] - ring; j <= c[1] + ring; ++j) {
                    if (j < 0 || j >= dims_[1]) continue;
                    const bool face = std::abs(k - c[2]) == ring || std::abs(j - c[1]) == ring;
                    const int step = face || ring == 0 ? 1 : 2 * ring;
                    for (int i = c[0] - ring; i <= c[0] + ring; i += step) {
                        if (i < 0 || i >= dims_[0]) continue;
                        for (int p : cells_[index(i, j, k)]) {
                            const double d2 = (points_[p] - q).squaredNorm();
                            if (closer(d2, p, best_d2, best)) {
                                best_d2 = d2;
                                best = p;
                            }
                        }
                    }
                }
            }
            // Everything outside the searched block is at least `margin` away; stop once that
            // strictly exceeds the best distance so equal-distance ties are still visited.
            double margin = std::numeric_limits<double>::infinity();
            for (int d = 0; d < 3; ++d) {
                if (c[d] - ring > 0) margin = std::min(margin, q[d] - (lo_[d] + (c[d] - ring) * cell_));
                if (c[d] + ring + 1 < dims_[d]) margin = std::min(margin, lo_[d] + (c[d] + ring + 1) * cell_ - q[d]);
            }
            if (best >= 0 && margin > 0.0 && best_d2 < margin * margin) break;
            if (margin == std::numeric_limits<double>::infinity()) break;
        }
        return best;
    }

private:
    std::array<int, 3> cell_of(const Vec3& p) const {
        std::array<int, 3> c{};
        for (int d = 0; d < 3; ++d) {
            c[d] = std::clamp(static_cast<int>(std::floor((p[d] - lo_[d]) / cell_)), 0, dims_[d] - 1);
        }
        return c;
    }
    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * dims_[1] + j) * dims_[0] + i;
    }

    std::span<const Vec3> points_;
    Vec3 lo_;
    double cell_ = 1.0;
    std::array<int, 3> dims_{};
    std::vector<std::vector<int>> cells_;
};

}  // namespace

DistributionSummary summarize(std::span<const double> values) {
    DistributionSummary s;
    s.count = values.size();
    if (values.empty()) return s;
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double var = 0.0;
    for (double x : v) var += (x - s.mean) * (x - s.mean);
    s.stddev = v.size() > 1 ? std::sqrt(var / (v.size() - 1)) : 0.0;
    s.min = v.front();
    s.max = v.back();
    s.median = quantile(v, 0.5);
    s.q05 = quantile(v, 0.05);
    s.q25 = quantile(v, 0.25);
    s.q75 = quantile(v, 0.75);
    s.q95 = quantile(v, 0.95);
    return s;
}

std::vector<int> nearest_points(std::span<const Vec3> points, std::span<const Vec3> queries, NearestSearch method) {
    if (points.empty()) throw ConfigError("nearest-point search needs a non-empty point set");
    std::vector<int> out(queries.size(), -1);
    if (method == NearestSearch::BruteForce) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(queries.size()); ++i) {
            double best_d2 = std::numeric_limits<double>::infinity();
            int best = -1;
            for (std::size_t p = 0; p < points.size(); ++p) {
                const double d2 = (points[p] - queries[i]).squaredNorm();
                if (closer(d2, static_cast<int>(p), best_d2, best)) {
                    best_d2 = d2;
                    best = static_cast<int>(p);
                }
            }
            out[i] = best;
        }
        return out;
    }
    const PointGrid grid(points);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(queries.size()); ++i) out[i] = grid.nearest(queries[i]);
    return out;
}

DistanceDistribution fs_distance(const TriMesh& inner, const TriMesh& outer, bool squared, NearestSearch method) {
    if (inner.vertices.empty() || outer.vertices.empty()) throw ConfigError("fs_distance needs non-empty meshes");
    const auto f = nearest_points(outer.vertices, inner.vertices, method);
    std::vector<Vec3> fr(inner.vertices.size());
    for (std::size_t i = 0; i < fr.size(); ++i) fr[i] = outer.vertices[f[i]];
    const auto g = nearest_points(inner.vertices, fr, method);
    DistanceDistribution d;
    d.kind = "fs_distance";
    d.values.resize(inner.vertices.size());
    for (std::size_t i = 0; i < fr.size(); ++i) {
        const double a = (inner.vertices[i] - fr[i]).squaredNorm();
        const double b = (fr[i] - inner.vertices[g[i]]).squaredNorm();
        d.values[i] = squared ? 0.5 * (a + b) : 0.5 * (std::sqrt(a) + std::sqrt(b));
    }
    return d;
}

DistanceDistribution thickness_distribution(const LaminarSystem& system) {
    const std::size_t n = system.num_seeds();
    const auto th = system.thickness.size() == n ? system.thickness : thickness(system);
    DistanceDistribution d;
    d.kind = "thickness";
    for (std::size_t k = 0; k < n; ++k) {
        if (k < system.flagged.size() && system.flagged[k]) {
            ++d.excluded;
            continue;
        }
        d.values.push_back(th[k]);
    }
    return d;
}

CdfTable cdf(std::span<const double> values, int n_bins) {
    if (n_bins < 1) throw ConfigError("cdf needs at least one bin");
    if (values.empty()) throw ConfigError("cdf of an empty distribution");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const double lo = v.front(), hi = v.back();
    CdfTable t;
    for (int b = 0; b < n_bins; ++b) {
        const double upper = b == n_bins - 1 ? hi : lo + (hi - lo) * (b + 1) / n_bins;
        const auto cnt = std::upper_bound(v.begin(), v.end(), upper) - v.begin();
        t.bin_upper.push_back(upper);
        t.cum_fraction.push_back(static_cast<double>(cnt) / v.size());
    }
    return t;
}

nlohmann::json to_json(const DistributionSummary& s) {
    return {{"count", s.count}, {"mean", s.mean},     {"stddev", s.stddev}, {"min", s.min},
            {"max", s.max},     {"median", s.median}, {"q05", s.q05},       {"q25", s.q25},
            {"q75", s.q75},     {"q95", s.q95}};
}

nlohmann::json compare_report(const std::vector<DistanceDistribution>& dists) {
    nlohmann::json report;
    report["distributions"] = nlohmann::json::array();
    std::vector<double> means;
    for (std::size_t i = 0; i < dists.size(); ++i) {
        const auto s = dists[i].summary();
        means.push_back(s.mean);
        report["distributions"].push_back({{"name", dists[i].source.empty() ? dists[i].kind : dists[i].source},
                                           {"kind", dists[i].kind},
                                           {"target", dists[i].target},
                                           {"excluded", dists[i].excluded},
                                           {"summary", to_json(s)}});
    }
    report["pairs"] = nlohmann::json::array();
    for (std::size_t i = 0; i < dists.size(); ++i) {
        for (std::size_t j = i + 1; j < dists.size(); ++j) {
            report["pairs"].push_back({{"a", i}, {"b", j}, {"mean_a", means[i]}, {"mean_b", means[j]},
                                       {"mean_difference", means[i] - means[j]}});
        }
    }
    // Compare the first distribution of each kind.
    std::ptrdiff_t fs = -1, th = -1;
    for (std::size_t i = 0; i < dists.size(); ++i) {
        if (dists[i].kind == "fs_distance" && fs < 0) fs = static_cast<std::ptrdiff_t>(i);
        if (dists[i].kind == "thickness" && th < 0) th = static_cast<std::ptrdiff_t>(i);
    }
    if (fs >= 0 && th >= 0) {
        report["underestimates"] = means[fs] < means[th];
        report["fs_mean"] = means[fs];
        report["thickness_mean"] = means[th];
    } else {
        report["underestimates"] = nullptr;
    }
    return report;
}

void write_distance_csv(const DistanceDistribution& dist, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    out << "index,distance\n";
    for (std::size_t i = 0; i < dist.values.size(); ++i) out << i << ',' << dist.values[i] << '\n';
}

void write_cdf_csv(const CdfTable& table, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    out << "bin_upper,cum_fraction\n";
    for (std::size_t i = 0; i < table.bin_upper.size(); ++i) {
        out << table.bin_upper[i] << ',' << table.cum_fraction[i] << '\n';
    }
}

void write_compare_csv(const nlohmann::json& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    out << "a,b,mean_a,mean_b,mean_difference\n";
    for (const auto& p : report.at("pairs")) {
        out << p.at("a").get<std::size_t>() << ',' << p.at("b").get<std::size_t>() << ','
            << p.at("mean_a").get<double>() << ',' << p.at("mean_b").get<double>() << ','
            << p.at("mean_difference").get<double>() << '\n';
    }
}

}  // namespace lamina
