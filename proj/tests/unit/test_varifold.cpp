#include <doctest.h>

#include <cmath>

#include "lamina/errors.hpp"
#include "lamina/synth.hpp"
#include "lamina/varifold.hpp"
#include "support/support.hpp"

using namespace lamina;
using namespace lamina::testing;

namespace {

TriMesh triangle(const Vec3& a, const Vec3& b, const Vec3& c) {
    TriMesh m;
    m.vertices = {a, b, c};
    m.faces = {{0, 1, 2}};
    return m;
}

// Independent brute-force double loop over faces.
double bilinear_oracle(double width, const TriMesh& s, const TriMesh& t) {
    double sum = 0.0;
    for (const Face& f : s.faces) {
        const Vec3 cf = (s.vertices[f[0]] + s.vertices[f[1]] + s.vertices[f[2]]) / 3.0;
        const Vec3 xf = (s.vertices[f[1]] - s.vertices[f[0]]).cross(s.vertices[f[2]] - s.vertices[f[0]]);
        for (const Face& g : t.faces) {
            const Vec3 cg = (t.vertices[g[0]] + t.vertices[g[1]] + t.vertices[g[2]]) / 3.0;
            const Vec3 xg = (t.vertices[g[1]] - t.vertices[g[0]]).cross(t.vertices[g[2]] - t.vertices[g[0]]);
            const double cosang = xf.normalized().dot(xg.normalized());
            const double chi = std::exp(-(cf - cg).squaredNorm() / (2 * width * width));
            sum += chi * 0.25 * xf.norm() * xg.norm() * (1 + cosang * cosang);
        }
    }
    return sum;
}

TriMesh translated(TriMesh m, const Vec3& t) {
    for (Vec3& p : m.vertices) p += t;
    return m;
}

}  // namespace

TEST_CASE("bilinear form") {
    const VarifoldSpec spec{0.5};
    const TriMesh t = triangle(Vec3(0, 0, 0), Vec3(0.8, 0.1, 0), Vec3(0.2, 0.7, 0.1));
    const double A = 0.5 * (t.vertices[1] - t.vertices[0]).cross(t.vertices[2] - t.vertices[0]).norm();
    SUBCASE("a triangle with itself is 2 A^2") { CHECK(varifold_bilinear(spec, t, t) == doctest::Approx(2 * A * A).epsilon(1e-14)); }
    SUBCASE("distant parallel copies decouple") {
        CHECK(varifold_bilinear(spec, t, translated(t, Vec3(0, 0, 20 * spec.width))) < 1e-12 * A * A);
    }
    SUBCASE("two-triangle meshes against the brute-force oracle") {
        Rng rng(5);
        for (int c = 0; c < 5; ++c) {
            const TriMesh a = random_patch(rng, 1, 1.0, 0.3);
            const TriMesh b = translated(random_patch(rng, 1, 1.0, 0.3), random_vec(rng, 0.5));
            CHECK(varifold_bilinear(spec, a, b) == doctest::Approx(bilinear_oracle(0.5, a, b)).epsilon(1e-13));
            CHECK(varifold_bilinear(spec, a, b) == varifold_bilinear(spec, b, a));
        }
    }
}

TEST_CASE("energy") {
    const VarifoldSpec spec{0.5};
    SUBCASE("zero against itself") {
        Rng rng(1);
        const TriMesh m = random_patch(rng, 4);
        CHECK(varifold_energy(spec, m, m) == 0.0);
    }
    SUBCASE("far translate leaves only the self terms") {
        const TriMesh s = icosphere(2, 1.0);
        const TriMesh t = translated(s, Vec3(10 * spec.width + 2.0, 0, 0));
        const double self = varifold_bilinear(spec, s, s);
        CHECK(varifold_energy(spec, s, t) == doctest::Approx(2 * self).epsilon(1e-12));
    }
    SUBCASE("decreases as the radius approaches the target") {
        const TriMesh s = icosphere(3, 1.0);
        double prev = std::numeric_limits<double>::infinity();
        for (double r : {1.05, 1.02, 1.01}) {
            const double e = varifold_energy(spec, icosphere(3, r), s);
            CHECK(e < prev);
            CHECK(e > 0.0);
            prev = e;
        }
    }
    SUBCASE("normalized energy divides by the target self product") {
        const TriMesh s = icosphere(1, 1.0), t = icosphere(1, 1.2);
        VarifoldSpec n = spec;
        n.normalize = true;
        CHECK(varifold_energy(n, s, t) ==
              doctest::Approx(varifold_energy(spec, s, t) / varifold_bilinear(spec, t, t)).epsilon(1e-13));
    }
    SUBCASE("invalid width") { CHECK_THROWS_AS(varifold_energy(VarifoldSpec{0.0}, icosphere(0, 1), icosphere(0, 1)), ConfigError); }
}

TEST_CASE("gradient") {
    const VarifoldSpec spec{0.6};
    SUBCASE("vanishes at the match") {
        Rng rng(2);
        const TriMesh m = random_patch(rng, 4);
        for (const Vec3& g : varifold_gradient(spec, m, m)) CHECK(g.norm() < 1e-10);
    }
    SUBCASE("points against the translation") {
        const TriMesh t = triangle(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0));
        const Vec3 offset(0.2, -0.1, 0.3);
        const TriMesh s = translated(t, offset);
        Vec3 total = Vec3::Zero();
        for (const Vec3& g : varifold_gradient(spec, s, t)) total += g;
        CHECK(total.dot(offset) > 0.0);  // descent direction -grad opposes the offset
    }
    SUBCASE("finite differences on 20-face random pairs") {
        for (int c = 0; c < 3; ++c) {
            Rng rng(40 + c);
            TriMesh s = random_patch(rng, 3, 1.5, 0.2);  // 18 faces
            s.vertices.push_back(Vec3(1.8, 0.2, 0.1));
            s.faces.push_back({3, 16, 7});
            s.vertices.push_back(Vec3(-0.3, 1.25, 0.0));
            s.faces.push_back({8, 12, 17});
            TriMesh t = translated(random_patch(rng, 3, 1.5, 0.2), Vec3(0.1, 0.05, 0.3));
            const auto grad = varifold_gradient(spec, s, t);
            const double h = 1e-6 * bounding_box_diagonal(s.vertices);
            double err = 0.0, scale = 0.0;
            for (std::size_t v = 0; v < s.num_vertices(); ++v)
                for (int d = 0; d < 3; ++d) {
                    TriMesh p = s, m = s;
                    p.vertices[v][d] += h;
                    m.vertices[v][d] -= h;
                    const double fd = (varifold_energy(spec, p, t) - varifold_energy(spec, m, t)) / (2 * h);
                    err = std::max(err, std::abs(fd - grad[v][d]));
                    scale = std::max(scale, std::abs(fd));
                }
            CHECK(err / scale < 1e-5);
        }
    }
    SUBCASE("degenerate face") {
        TriMesh s = triangle(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0));
        CHECK_THROWS_AS(varifold_gradient(spec, s, icosphere(0, 1.0)), DegenerateFaceError);
    }
}
