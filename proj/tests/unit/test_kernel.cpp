#include <doctest.h>

#include <cmath>

#include "lamina/errors.hpp"
#include "lamina/kernel.hpp"
#include "support/support.hpp"

using namespace lamina;
using namespace lamina::testing;

namespace {

struct Particles {
    std::vector<Vec3> q, a;
};

Particles random_particles(Rng& rng, int n, double spread) {
    Particles p;
    for (int l = 0; l < n; ++l) {
        p.q.push_back(random_vec(rng, spread));
        p.a.push_back(random_vec(rng));
    }
    return p;
}

// Independent reference: explicit Gaussian sum and its 3N x 3N Gram matrix.
double gauss(const Vec3& x, const Vec3& y, double s) { return std::exp(-(x - y).squaredNorm() / (2 * s * s)); }

}  // namespace

TEST_CASE("velocity of a single particle") {
    const double s = 0.8;
    const auto k = KernelSpec::gaussian(s);
    const std::vector<Vec3> q{Vec3::Zero()}, a{Vec3(1, 0, 0)};
    CHECK((eval_velocity(k, q, a, Vec3::Zero()) - Vec3(1, 0, 0)).norm() < 1e-15);
    const Vec3 v = eval_velocity(k, q, a, Vec3(0, s, 0));
    CHECK(v.x() == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
    CHECK(std::abs(v.y()) + std::abs(v.z()) == 0.0);
}

TEST_CASE("two particles: velocity at the midpoint") {
    const double s = 0.7, d = 1.3;
    const auto k = KernelSpec::gaussian(s);
    const Vec3 alpha(0.2, -0.4, 1.1);
    const std::vector<Vec3> q{Vec3(-d / 2, 0, 0), Vec3(d / 2, 0, 0)}, a{alpha, alpha};
    const Vec3 expect = 2 * std::exp(-d * d / (8 * s * s)) * alpha;
    CHECK((eval_velocity(k, q, a, Vec3::Zero()) - expect).norm() < 1e-14);
}

TEST_CASE("Jacobian") {
    SUBCASE("vanishes at a lone particle") {
        const auto k = KernelSpec::gaussian(1.0);
        const std::vector<Vec3> q{Vec3(0.3, 0.1, -0.2)}, a{Vec3(1, 2, 3)};
        CHECK(eval_velocity_jacobian(k, q, a, q[0]).norm() < 1e-15);
    }
    SUBCASE("finite differences on random configurations") {
        for (int c = 0; c < 10; ++c) {
            Rng rng(100 + c);
            const double s = uniform(rng, 0.4, 1.5);
            const auto k = KernelSpec::gaussian(s);
            const auto p = random_particles(rng, 20, 1.5);
            const Vec3 x = random_vec(rng, 1.0);
            const Mat3 J = eval_velocity_jacobian(k, p.q, p.a, x);
            const double h = 1e-5 * s;
            Mat3 fd;
            for (int d = 0; d < 3; ++d) {
                Vec3 e = Vec3::Zero();
                e[d] = h;
                fd.col(d) = (eval_velocity(k, p.q, p.a, x + e) - eval_velocity(k, p.q, p.a, x - e)) / (2 * h);
            }
            CHECK((J - fd).norm() / J.norm() < 1e-6);
        }
    }
    SUBCASE("trace equals the analytic divergence") {
        Rng rng(7);
        const double s = 0.9;
        const auto k = KernelSpec::gaussian(s);
        const auto p = random_particles(rng, 15, 1.0);
        for (int c = 0; c < 5; ++c) {
            const Vec3 x = random_vec(rng, 1.0);
            double div = 0.0;
            for (std::size_t l = 0; l < p.q.size(); ++l) div += -(x - p.q[l]).dot(p.a[l]) / (s * s) * gauss(x, p.q[l], s);
            CHECK(eval_velocity_jacobian(k, p.q, p.a, x).trace() == doctest::Approx(div).epsilon(1e-12));
        }
    }
}

TEST_CASE("V-norm") {
    const auto k = KernelSpec::gaussian(0.6);
    SUBCASE("single particle") {
        const std::vector<Vec3> q{Vec3(1, 2, 3)}, a{Vec3(0.5, -1, 2)};
        CHECK(vnorm_sq(k, q, a) == doctest::Approx(a[0].squaredNorm()));
    }
    SUBCASE("coincident particles with opposite momenta") {
        const std::vector<Vec3> q{Vec3(1, 0, 0), Vec3(1, 0, 0)}, a{Vec3(0.5, -1, 2), Vec3(-0.5, 1, -2)};
        CHECK(std::abs(vnorm_sq(k, q, a)) < 1e-15);
    }
    SUBCASE("matches the explicit Gram quadratic form") {
        Rng rng(3);
        const auto p = random_particles(rng, 3, 0.8);
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(9, 9);
        Eigen::VectorXd av(9);
        for (int i = 0; i < 3; ++i) {
            av.segment<3>(3 * i) = p.a[i];
            for (int j = 0; j < 3; ++j) G.block<3, 3>(3 * i, 3 * j) = gauss(p.q[i], p.q[j], 0.6) * Mat3::Identity();
        }
        CHECK(vnorm_sq(k, p.q, p.a) == doctest::Approx(av.dot(G * av)).epsilon(1e-13));
    }
    SUBCASE("reproducing identity: sum a_l . v(q_l) equals the norm") {
        Rng rng(11);
        const auto p = random_particles(rng, 12, 1.0);
        double s = 0.0;
        for (std::size_t l = 0; l < p.q.size(); ++l) s += p.a[l].dot(eval_velocity(k, p.q, p.a, p.q[l]));
        CHECK(s == doctest::Approx(vnorm_sq(k, p.q, p.a)).epsilon(1e-13));
    }
}

TEST_CASE("hybrid norm") {
    const double s = 0.5;
    const auto k = KernelSpec::gaussian(s);
    TriMesh tri;
    tri.vertices = {Vec3(0, 0, 0), Vec3(0.7, 0, 0), Vec3(0.1, 0.6, 0)};
    tri.faces = {{0, 1, 2}};
    const std::vector<Vec3> a{Vec3(0.3, -0.2, 0.5), Vec3(-0.1, 0.4, 0.2), Vec3(0.25, 0.1, -0.3)};
    SUBCASE("zero weight reduces to the V-norm") {
        CHECK(hybrid_norm_sq(k, tri, a, 0.0) == doctest::Approx(vnorm_sq(k, tri.vertices, a)));
    }
    SUBCASE("single face against a direct two-term computation") {
        const double lambda = 0.37;
        const Vec3 c = (tri.vertices[0] + tri.vertices[1] + tri.vertices[2]) / 3.0;
        const double area = 0.5 * (tri.vertices[1] - tri.vertices[0]).cross(tri.vertices[2] - tri.vertices[0]).norm();
        Mat3 J = Mat3::Zero();
        for (int l = 0; l < 3; ++l) J += a[l] * (-(c - tri.vertices[l]) / (s * s) * gauss(c, tri.vertices[l], s)).transpose();
        double kin = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) kin += a[i].dot(a[j]) * gauss(tri.vertices[i], tri.vertices[j], s);
        CHECK(hybrid_norm_sq(k, tri, a, lambda) == doctest::Approx(kin + lambda * area * J.squaredNorm()).epsilon(1e-12));
    }
    SUBCASE("far particle leaves the surface term negligible") {
        TriMesh m = tri;
        m.vertices.push_back(Vec3(20 * s, 0, 0));
        m.vertices.push_back(Vec3(20 * s, 1, 0));
        m.vertices.push_back(Vec3(20 * s, 0, 1));
        m.faces = {{3, 4, 5}};
        const std::vector<Vec3> b{Vec3(1, 0, 0), Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
        // the only face sits far from the only moving particle
        const double base = vnorm_sq(k, m.vertices, b);
        CHECK(hybrid_norm_sq(k, m, b, 1.0) - base < 1e-15 * base);
    }
}

TEST_CASE("kernel spec validation") {
    CHECK_THROWS_AS(KernelSpec::gaussian(0.0).validate(), ConfigError);
    CHECK_THROWS_AS(KernelSpec{}.validate(), ConfigError);
    CHECK_THROWS_AS((KernelSpec{{{1.0, -1.0}}}.validate()), ConfigError);
    CHECK_NOTHROW((KernelSpec{{{1.0, 1.0}, {0.3, 0.5}}}.validate()));
}

TEST_CASE("multi-scale kernel sums its components") {
    const KernelSpec k{{{1.0, 1.0}, {0.3, 0.5}}};
    const double r2 = 0.4;
    CHECK(k.value(r2) == doctest::Approx(std::exp(-r2 / 2) + 0.5 * std::exp(-r2 / (2 * 0.09))));
    const double h = 1e-6;
    CHECK(k.d1(r2) == doctest::Approx((k.value(r2 + h) - k.value(r2 - h)) / (2 * h)).epsilon(1e-7));
    CHECK(k.d2(r2) == doctest::Approx((k.d1(r2 + h) - k.d1(r2 - h)) / (2 * h)).epsilon(1e-6));
}
