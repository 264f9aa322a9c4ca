#include "lamina/levelset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lamina/errors.hpp"
#include "lamina/mesh_io.hpp"

namespace lamina {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kInnerSurface = 0;
constexpr int kOuterSurface = 1;

struct Crossing {
    double t;
    int surface;
};

// Crossings of grid lines parallel to `axis` with the surfaces; line (iu, iv) runs through
// origin + h (iu e_u + iv e_v) with u = axis + 1, v = axis + 2 (mod 3).
class LineCast {
public:
    LineCast(const ScalarGrid& grid, int axis) : grid_(grid), axis_(axis) {
        u_ = (axis + 1) % 3;
        v_ = (axis + 2) % 3;
        lines_.resize(static_cast<std::size_t>(grid.dims[u_]) * grid.dims[v_]);
    }

    void add(const TriMesh& mesh, int surface) {
        const double h = grid_.h;
        for (const Face& f : mesh.faces) {
            std::array<Eigen::Vector2d, 3> p;
            std::array<double, 3> w{};
            double lo_u = std::numeric_limits<double>::infinity(), hi_u = -lo_u, lo_v = lo_u, hi_v = -lo_u;
            for (int c = 0; c < 3; ++c) {
                const Vec3& x = mesh.vertices[f[c]];
                p[c] = {x[u_], x[v_]};
                w[c] = x[axis_];
                lo_u = std::min(lo_u, x[u_]);
                hi_u = std::max(hi_u, x[u_]);
                lo_v = std::min(lo_v, x[v_]);
                hi_v = std::max(hi_v, x[v_]);
            }
            const int iu0 = std::max(0, static_cast<int>(std::ceil((lo_u - grid_.origin[u_]) / h)));
            const int iu1 = std::min(grid_.dims[u_] - 1, static_cast<int>(std::floor((hi_u - grid_.origin[u_]) / h)));
            const int iv0 = std::max(0, static_cast<int>(std::ceil((lo_v - grid_.origin[v_]) / h)));
            const int iv1 = std::min(grid_.dims[v_] - 1, static_cast<int>(std::floor((hi_v - grid_.origin[v_]) / h)));
            for (int iv = iv0; iv <= iv1; ++iv) {
                for (int iu = iu0; iu <= iu1; ++iu) {
                    const Eigen::Vector2d q(grid_.origin[u_] + h * iu, grid_.origin[v_] + h * iv);
                    double t;
                    if (hit(p, w, q, t)) lines_[line(iu, iv)].push_back({t, surface});
                }
            }
        }
    }

    void sort() {
        for (auto& l : lines_) {
            std::sort(l.begin(), l.end(), [](const Crossing& a, const Crossing& b) {
                return a.t < b.t || (a.t == b.t && a.surface < b.surface);
            });
        }
    }

    std::size_t line(int iu, int iv) const { return static_cast<std::size_t>(iv) * grid_.dims[u_] + iu; }
    const std::vector<Crossing>& crossings(int iu, int iv) const { return lines_[line(iu, iv)]; }
    int u() const { return u_; }
    int v() const { return v_; }

private:
    // Edge function with the endpoints put in a fixed order, so that the two faces sharing an
    // edge see exactly opposite values.
    static double edge(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& q, bool& owns) {
        const bool swap = b[0] < a[0] || (b[0] == a[0] && b[1] < a[1]);
        const Eigen::Vector2d& s = swap ? b : a;
        const Eigen::Vector2d& e = swap ? a : b;
        double val = (e[0] - s[0]) * (q[1] - s[1]) - (e[1] - s[1]) * (q[0] - s[0]);
        const Eigen::Vector2d d = b - a;
        owns = d[1] > 0.0 || (d[1] == 0.0 && d[0] < 0.0);
        return swap ? -val : val;
    }

    // Point-in-projected-triangle with a top-left tie rule, so a line through a shared edge or
    // vertex of a closed surface is counted once.
    static bool hit(const std::array<Eigen::Vector2d, 3>& p, const std::array<double, 3>& w, const Eigen::Vector2d& q,
                    double& t) {
        const double area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]);
        if (area == 0.0) return false;
        const std::array<int, 3> order = area > 0.0 ? std::array<int, 3>{0, 1, 2} : std::array<int, 3>{0, 2, 1};
        std::array<double, 3> bary{};
        for (int e = 0; e < 3; ++e) {
            const int a = order[e], b = order[(e + 1) % 3], c = order[(e + 2) % 3];
            bool owns = false;
            const double val = edge(p[a], p[b], q, owns);
            if (val < 0.0 || (val == 0.0 && !owns)) return false;
            bary[c] = val;
        }
        const double sum = bary[0] + bary[1] + bary[2];
        if (sum <= 0.0) return false;
        t = (bary[0] * w[0] + bary[1] * w[1] + bary[2] * w[2]) / sum;
        return true;
    }

    const ScalarGrid& grid_;
    int axis_, u_, v_;
    std::vector<std::vector<Crossing>> lines_;
};

double boundary_value(int surface) { return surface == kInnerSurface ? 0.0 : 1.0; }

double label_value(VoxelLabel l) { return l == VoxelLabel::Outside ? 1.0 : 0.0; }

const std::array<std::array<int, 3>, 6> kDirections{{{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}};

bool in_grid(const ScalarGrid& g, int i, int j, int k) {
    return i >= 0 && j >= 0 && k >= 0 && i < g.dims[0] && j < g.dims[1] && k < g.dims[2];
}

}  // namespace

std::size_t ScalarGrid::count(VoxelLabel l) const { return static_cast<std::size_t>(std::count(label.begin(), label.end(), l)); }

ScalarGrid voxelize(const TriMesh& inner, const TriMesh& outer, double h, int padding) {
    if (!(h > 0.0)) throw ConfigError("grid spacing must be positive");
    if (!is_closed(inner)) throw TopologyError("inner surface is not closed; the level-set baseline needs closed surfaces");
    if (!is_closed(outer)) throw TopologyError("outer surface is not closed; the level-set baseline needs closed surfaces");

    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
    for (const auto* m : {&inner, &outer}) {
        for (const Vec3& x : m->vertices) {
            lo = lo.cwiseMin(x);
            hi = hi.cwiseMax(x);
        }
    }
    ScalarGrid g;
    g.h = h;
    g.origin = lo - padding * h * Vec3::Ones();
    for (int d = 0; d < 3; ++d) g.dims[d] = static_cast<int>(std::ceil((hi[d] - lo[d]) / h)) + 2 * padding + 1;
    g.F.assign(g.size(), 0.0);
    g.label.assign(g.size(), VoxelLabel::Outside);

    std::array<LineCast, 3> casts{LineCast(g, 0), LineCast(g, 1), LineCast(g, 2)};
    for (auto& c : casts) {
        c.add(inner, kInnerSurface);
        c.add(outer, kOuterSurface);
        c.sort();
    }

    // Parity along z lines.
    const LineCast& zc = casts[2];
    for (int j = 0; j < g.dims[1]; ++j) {
        for (int i = 0; i < g.dims[0]; ++i) {
            const auto& cr = zc.crossings(i, j);
            std::size_t next = 0;
            int parity[2] = {0, 0};
            for (int k = 0; k < g.dims[2]; ++k) {
                const double z = g.origin[2] + h * k;
                while (next < cr.size() && cr[next].t < z) parity[cr[next++].surface] ^= 1;
                const bool in_inner = parity[kInnerSurface] != 0;
                const bool in_outer = parity[kOuterSurface] != 0;
                if (in_inner && !in_outer) {
                    std::ostringstream msg;
                    msg << "surfaces are not nested: point (" << i << ", " << j << ", " << k
                        << ") is inside the inner surface but outside the outer one";
                    throw TopologyError(msg.str());
                }
                const std::size_t idx = g.index(i, j, k);
                g.label[idx] = in_inner ? VoxelLabel::Inside : in_outer ? VoxelLabel::Ribbon : VoxelLabel::Outside;
                g.F[idx] = g.label[idx] == VoxelLabel::Ribbon ? 0.5 : label_value(g.label[idx]);
            }
        }
    }

    // Sub-voxel crossings on edges leaving the ribbon.
    for (int k = 0; k < g.dims[2]; ++k) {
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i < g.dims[0]; ++i) {
                const std::size_t idx = g.index(i, j, k);
                if (g.label[idx] != VoxelLabel::Ribbon) continue;
                BoundaryStencil st;
                bool special = false;
                const std::array<int, 3> ijk{i, j, k};
                for (int d = 0; d < 6; ++d) {
                    const auto& dir = kDirections[d];
                    const int ni = i + dir[0], nj = j + dir[1], nk = k + dir[2];
                    if (!in_grid(g, ni, nj, nk)) {
                        st.fraction[d] = -1.0;
                        special = true;
                        continue;
                    }
                    const VoxelLabel nl = g.label[g.index(ni, nj, nk)];
                    if (nl == VoxelLabel::Ribbon) continue;
                    special = true;
                    st.cut[d] = true;
                    const int axis = d / 2;
                    const LineCast& lc = casts[axis];
                    const auto& cr = lc.crossings(ijk[lc.u()], ijk[lc.v()]);
                    const double c = g.origin[axis] + h * ijk[axis];
                    const bool forward = (d % 2) == 1;
                    const double eps = 1e-9 * h;
                    const Crossing* found = nullptr;
                    for (const Crossing& cc : cr) {
                        const double s = forward ? cc.t - c : c - cc.t;
                        if (s < -eps || s > h) continue;
                        if (!found || std::abs(cc.t - c) < std::abs(found->t - c)) found = &cc;
                    }
                    if (found) {
                        st.fraction[d] = std::clamp(std::abs(found->t - c) / h, 1e-6, 1.0);
                        st.value[d] = boundary_value(found->surface);
                    } else {
                        st.fraction[d] = 1.0;
                        st.value[d] = label_value(nl);
                    }
                }
                if (special) g.boundary.emplace(idx, st);
            }
        }
    }
    return g;
}

ScalarGrid slab_grid(const Vec3& origin, double h, const std::array<int, 3>& dims, double z0, double z1) {
    if (!(h > 0.0) || !(z1 > z0)) throw ConfigError("slab needs h > 0 and z1 > z0");
    ScalarGrid g;
    g.origin = origin;
    g.h = h;
    g.dims = dims;
    g.F.assign(g.size(), 0.0);
    g.label.assign(g.size(), VoxelLabel::Outside);
    for (int k = 0; k < dims[2]; ++k) {
        const double z = origin[2] + h * k;
        const VoxelLabel l = z <= z0 ? VoxelLabel::Inside : z >= z1 ? VoxelLabel::Outside : VoxelLabel::Ribbon;
        for (int j = 0; j < dims[1]; ++j) {
            for (int i = 0; i < dims[0]; ++i) {
                const std::size_t idx = g.index(i, j, k);
                g.label[idx] = l;
                g.F[idx] = l == VoxelLabel::Ribbon ? 0.5 : label_value(l);
            }
        }
    }
    for (int k = 0; k < dims[2]; ++k) {
        for (int j = 0; j < dims[1]; ++j) {
            for (int i = 0; i < dims[0]; ++i) {
                const std::size_t idx = g.index(i, j, k);
                if (g.label[idx] != VoxelLabel::Ribbon) continue;
                BoundaryStencil st;
                bool special = false;
                const double z = origin[2] + h * k;
                for (int d = 0; d < 6; ++d) {
                    const auto& dir = kDirections[d];
                    const int ni = i + dir[0], nj = j + dir[1], nk = k + dir[2];
                    if (!in_grid(g, ni, nj, nk)) {
                        st.fraction[d] = -1.0;
                        special = true;
                        continue;
                    }
                    const VoxelLabel nl = g.label[g.index(ni, nj, nk)];
                    if (nl == VoxelLabel::Ribbon) continue;
                    special = true;
                    st.cut[d] = true;
                    st.fraction[d] = std::clamp(d == 4 ? (z - z0) / h : (z1 - z) / h, 1e-6, 1.0);
                    st.value[d] = d == 4 ? 0.0 : 1.0;
                }
                if (special) g.boundary.emplace(idx, st);
            }
        }
    }
    return g;
}

SorReport solve_laplace(ScalarGrid& g, const SorOptions& options) {
    if (!(options.omega > 0.0 && options.omega < 2.0)) throw ConfigError("SOR relaxation must lie in (0, 2)");
    struct Row {
        std::size_t idx;
        std::array<std::ptrdiff_t, 6> nb;
        std::array<double, 6> w;
        double rhs;
        double diag;
    };
    std::vector<Row> rows;
    for (int k = 0; k < g.dims[2]; ++k) {
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i < g.dims[0]; ++i) {
                const std::size_t idx = g.index(i, j, k);
                if (g.label[idx] != VoxelLabel::Ribbon) continue;
                Row r{idx, {}, {}, 0.0, 0.0};
                const auto it = g.boundary.find(idx);
                const BoundaryStencil st = it == g.boundary.end() ? BoundaryStencil{} : it->second;
                for (int axis = 0; axis < 3; ++axis) {
                    const int dm = 2 * axis, dp = 2 * axis + 1;
                    const bool nm = st.fraction[dm] < 0.0, np = st.fraction[dp] < 0.0;
                    const double fm = nm ? 1.0 : st.fraction[dm];
                    const double fp = np ? 1.0 : st.fraction[dp];
                    const std::array<double, 2> w{2.0 / ((fm + fp) * fm), 2.0 / ((fm + fp) * fp)};
                    for (int s = 0; s < 2; ++s) {
                        const int d = dm + s;
                        r.nb[d] = -1;
                        r.w[d] = 0.0;
                        if (s == 0 ? nm : np) continue;
                        r.diag += w[s];
                        if (st.cut[d]) {
                            r.rhs += w[s] * st.value[d];
                        } else {
                            const auto& dir = kDirections[d];
                            r.nb[d] = static_cast<std::ptrdiff_t>(g.index(i + dir[0], j + dir[1], k + dir[2]));
                            r.w[d] = w[s];
                        }
                    }
                }
                rows.push_back(r);
            }
        }
    }
    if (rows.empty()) throw NumericalError("grid has no ribbon voxels");

    SorReport rep;
    double* F = g.F.data();
    for (rep.sweeps = 1; rep.sweeps <= options.max_sweeps; ++rep.sweeps) {
        double max_update = 0.0;
        for (const Row& r : rows) {
            double acc = r.rhs;
            for (int d = 0; d < 6; ++d) {
                if (r.nb[d] >= 0) acc += r.w[d] * F[r.nb[d]];
            }
            const double update = options.omega * (acc / r.diag - F[r.idx]);
            F[r.idx] += update;
            max_update = std::max(max_update, std::abs(update));
        }
        rep.last_update = max_update;
        if (max_update < options.tolerance) {
            rep.converged = true;
            break;
        }
    }
    rep.sweeps = std::min(rep.sweeps, options.max_sweeps);
    if (!rep.converged) throw NumericalError("SOR did not converge within the sweep limit");
    return rep;
}

LevelSetField::LevelSetField(const ScalarGrid& grid) : grid_(grid) {
    const std::size_t n = grid.size();
    value_.assign(n, kNaN);
    valid_.assign(n, false);
    for (std::size_t idx = 0; idx < n; ++idx) {
        if (grid.label[idx] == VoxelLabel::Ribbon) {
            value_[idx] = grid.F[idx];
            valid_[idx] = true;
        }
    }
    const auto& dims = grid.dims;

    // First layer outside the ribbon: extrapolate through the surface crossing.
    std::vector<double> sum(n, 0.0);
    std::vector<int> cnt(n, 0);
    for (const auto& [idx, st] : grid.boundary) {
        const int i = static_cast<int>(idx % dims[0]);
        const int j = static_cast<int>((idx / dims[0]) % dims[1]);
        const int k = static_cast<int>(idx / (static_cast<std::size_t>(dims[0]) * dims[1]));
        for (int d = 0; d < 6; ++d) {
            if (!st.cut[d]) continue;
            const auto& dir = kDirections[d];
            const std::size_t out = grid.index(i + dir[0], j + dir[1], k + dir[2]);
            const double theta = st.fraction[d];
            const double fr = grid.F[idx], fb = st.value[d];
            double est;
            const int bi = i - dir[0], bj = j - dir[1], bk = k - dir[2];
            if (theta < 0.5 && in_grid(grid, bi, bj, bk) && grid.label[grid.index(bi, bj, bk)] == VoxelLabel::Ribbon) {
                const double f2 = grid.F[grid.index(bi, bj, bk)];
                est = fb + (fb - f2) * (1.0 - theta) / (1.0 + theta);
            } else {
                est = fr + (fb - fr) / theta;
            }
            sum[out] += est;
            ++cnt[out];
        }
    }
    for (std::size_t idx = 0; idx < n; ++idx) {
        if (cnt[idx] > 0 && !valid_[idx]) {
            value_[idx] = sum[idx] / cnt[idx];
            valid_[idx] = true;
        }
    }

    // Two more layers by linear extrapolation along grid lines.
    for (int pass = 0; pass < 2; ++pass) {
        std::fill(sum.begin(), sum.end(), 0.0);
        std::fill(cnt.begin(), cnt.end(), 0);
        for (int k = 0; k < dims[2]; ++k) {
            for (int j = 0; j < dims[1]; ++j) {
                for (int i = 0; i < dims[0]; ++i) {
                    const std::size_t idx = grid.index(i, j, k);
                    if (valid_[idx]) continue;
                    for (const auto& dir : kDirections) {
                        const int i1 = i + dir[0], j1 = j + dir[1], k1 = k + dir[2];
                        const int i2 = i1 + dir[0], j2 = j1 + dir[1], k2 = k1 + dir[2];
                        if (!in_grid(grid, i2, j2, k2)) continue;
                        const std::size_t a = grid.index(i1, j1, k1), b = grid.index(i2, j2, k2);
                        if (!valid_[a] || !valid_[b]) continue;
                        sum[idx] += 2.0 * value_[a] - value_[b];
                        ++cnt[idx];
                    }
                }
            }
        }
        for (std::size_t idx = 0; idx < n; ++idx) {
            if (cnt[idx] > 0) {
                value_[idx] = sum[idx] / cnt[idx];
                valid_[idx] = true;
            }
        }
    }

    // Derivative of a valid-flagged field along one axis: central where possible, else one-sided.
    const double h = grid.h;
    auto derivative = [&](const auto& val, const std::vector<bool>& ok, int i, int j, int k, int axis, double& out) {
        std::array<int, 3> m{i, j, k}, p{i, j, k}, m2{i, j, k}, p2{i, j, k};
        m[axis] -= 1;
        p[axis] += 1;
        m2[axis] -= 2;
        p2[axis] += 2;
        auto good = [&](const std::array<int, 3>& c) {
            return in_grid(grid, c[0], c[1], c[2]) && ok[grid.index(c[0], c[1], c[2])];
        };
        auto at = [&](const std::array<int, 3>& c) { return val(grid.index(c[0], c[1], c[2])); };
        const double f0 = val(grid.index(i, j, k));
        if (good(m) && good(p)) {
            out = (at(p) - at(m)) / (2.0 * h);
        } else if (good(p) && good(p2)) {
            out = (-3.0 * f0 + 4.0 * at(p) - at(p2)) / (2.0 * h);
        } else if (good(m) && good(m2)) {
            out = (3.0 * f0 - 4.0 * at(m) + at(m2)) / (2.0 * h);
        } else {
            return false;
        }
        return true;
    };

    grad_.assign(n, Vec3::Zero());
    grad_valid_.assign(n, false);
    for (int k = 0; k < dims[2]; ++k) {
        for (int j = 0; j < dims[1]; ++j) {
            for (int i = 0; i < dims[0]; ++i) {
                const std::size_t idx = grid.index(i, j, k);
                if (!valid_[idx]) continue;
                Vec3 gr;
                bool ok = true;
                auto val = [&](std::size_t q) { return value_[q]; };
                for (int a = 0; a < 3 && ok; ++a) ok = derivative(val, valid_, i, j, k, a, gr[a]);
                if (ok) {
                    grad_[idx] = gr;
                    grad_valid_[idx] = true;
                }
            }
        }
    }

    std::vector<Vec3> unit(n, Vec3::Zero());
    std::vector<bool> unit_ok(n, false);
    for (std::size_t idx = 0; idx < n; ++idx) {
        const double norm = grad_[idx].norm();
        if (grad_valid_[idx] && norm > 1e-12) {
            unit[idx] = grad_[idx] / norm;
            unit_ok[idx] = true;
        }
    }
    curvature_.assign(n, kNaN);
    for (int k = 0; k < dims[2]; ++k) {
        for (int j = 0; j < dims[1]; ++j) {
            for (int i = 0; i < dims[0]; ++i) {
                const std::size_t idx = grid.index(i, j, k);
                if (!unit_ok[idx]) continue;
                double div = 0.0;
                bool ok = true;
                for (int a = 0; a < 3 && ok; ++a) {
                    double da = 0.0;
                    auto comp = [&](std::size_t q) { return unit[q][a]; };
                    ok = derivative(comp, unit_ok, i, j, k, a, da);
                    div += da;
                }
                if (ok) curvature_[idx] = -0.5 * div;
            }
        }
    }
}

bool LevelSetField::cell(const Vec3& x, std::array<int, 3>& base, Vec3& frac) const {
    for (int d = 0; d < 3; ++d) {
        const double s = (x[d] - grid_.origin[d]) / grid_.h;
        int b = static_cast<int>(std::floor(s));
        if (b < 0 || b > grid_.dims[d] - 1) return false;
        if (b == grid_.dims[d] - 1) {
            if (s > b) return false;
            b -= 1;
        }
        base[d] = b;
        frac[d] = s - b;
    }
    return true;
}

template <class T, class Get>
T LevelSetField::trilinear(const Vec3& x, Get get) const {
    std::array<int, 3> b{};
    Vec3 f;
    cell(x, b, f);
    T acc{};
    bool first = true;
    for (int c = 0; c < 8; ++c) {
        const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
        const double w = (dx ? f[0] : 1.0 - f[0]) * (dy ? f[1] : 1.0 - f[1]) * (dz ? f[2] : 1.0 - f[2]);
        const T v = get(grid_.index(b[0] + dx, b[1] + dy, b[2] + dz));
        if (first) {
            acc = w * v;
            first = false;
        } else {
            acc += w * v;
        }
    }
    return acc;
}

bool LevelSetField::covers(const Vec3& x) const {
    std::array<int, 3> b{};
    Vec3 f;
    if (!cell(x, b, f)) return false;
    for (int c = 0; c < 8; ++c) {
        if (!valid_[grid_.index(b[0] + (c & 1), b[1] + ((c >> 1) & 1), b[2] + ((c >> 2) & 1))]) return false;
    }
    return true;
}

double LevelSetField::F(const Vec3& x) const {
    if (!covers(x)) throw NumericalError("point outside the extended level-set field");
    return trilinear<double>(x, [&](std::size_t q) { return value_[q]; });
}

Vec3 LevelSetField::gradient(const Vec3& x) const {
    if (!covers(x)) throw NumericalError("point outside the extended level-set field");
    std::array<int, 3> b{};
    Vec3 f;
    cell(x, b, f);
    bool all = true;
    for (int c = 0; c < 8 && all; ++c) {
        all = grad_valid_[grid_.index(b[0] + (c & 1), b[1] + ((c >> 1) & 1), b[2] + ((c >> 2) & 1))];
    }
    if (all) return trilinear<Vec3>(x, [&](std::size_t q) { return grad_[q]; });
    // Gradient of the trilinear interpolant itself.
    Vec3 g = Vec3::Zero();
    for (int c = 0; c < 8; ++c) {
        const int d[3] = {c & 1, (c >> 1) & 1, (c >> 2) & 1};
        const double v = value_[grid_.index(b[0] + d[0], b[1] + d[1], b[2] + d[2])];
        for (int a = 0; a < 3; ++a) {
            double w = (d[a] ? 1.0 : -1.0) / grid_.h;
            for (int e = 0; e < 3; ++e) {
                if (e != a) w *= d[e] ? f[e] : 1.0 - f[e];
            }
            g[a] += w * v;
        }
    }
    return g;
}

double LevelSetField::mean_curvature(const Vec3& x) const {
    std::array<int, 3> b{};
    Vec3 f;
    if (!cell(x, b, f)) return kNaN;
    return trilinear<double>(x, [&](std::size_t q) { return curvature_[q]; });
}

std::vector<Vec3> levelset_streamline(const LevelSetField& field, const Vec3& seed, double step) {
    if (!(step > 0.0 && step <= 0.5)) throw ConfigError("streamline step must lie in (0, 0.5]");
    auto where = [](const Vec3& x) {
        std::ostringstream s;
        s << "(" << x[0] << ", " << x[1] << ", " << x[2] << ")";
        return s.str();
    };
    if (!field.covers(seed)) throw ConfigError("seed " + where(seed) + " is outside the ribbon");
    double t = field.F(seed);
    if (t < -0.1 || t >= 1.0) throw ConfigError("seed " + where(seed) + " is outside the ribbon");
    auto v = [&](const Vec3& x) -> Vec3 {
        if (!field.covers(x)) throw NumericalError("streamline left the grid at " + where(x));
        const Vec3 g = field.gradient(x);
        const double n2 = g.squaredNorm();
        if (std::sqrt(n2) < 1e-10) throw NumericalError("streamline stalled at " + where(x) + ": |grad F| < 1e-10");
        return g / n2;
    };
    std::vector<Vec3> line{seed};
    Vec3 y = seed;
    const int max_steps = static_cast<int>(std::ceil(1.1 / step)) + 10;
    for (int it = 0; it < max_steps && t < 1.0 - 1e-12; ++it) {
        const double dt = std::min(step, 1.0 - t);
        const Vec3 k1 = v(y);
        const Vec3 k2 = v(y + 0.5 * dt * k1);
        const Vec3 k3 = v(y + 0.5 * dt * k2);
        const Vec3 k4 = v(y + dt * k3);
        y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += dt;
        line.push_back(y);
    }
    return line;
}

double levelset_thickness(const LevelSetField& field, const Vec3& seed, double step) {
    const auto line = levelset_streamline(field, seed, step);
    double len = 0.0;
    for (std::size_t i = 1; i < line.size(); ++i) len += (line[i] - line[i - 1]).norm();
    return len;
}

void write_grid_vtk(const ScalarGrid& grid, const std::filesystem::path& path) {
    StructuredPoints sp;
    sp.dims = grid.dims;
    sp.origin = grid.origin;
    sp.spacing = grid.h;
    sp.scalars["F"] = grid.F;
    std::vector<double> labels(grid.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<double>(grid.label[i]);
    sp.scalars["label"] = std::move(labels);
    write_vtk_structured_points(sp, path);
}

}  // namespace lamina
