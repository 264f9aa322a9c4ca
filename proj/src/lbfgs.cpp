#include "lamina/lbfgs.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include "lamina/errors.hpp"

namespace lamina {

namespace {

struct Sample {
    double alpha = 0.0;
    double value = 0.0;
    double slope = 0.0;
};

// Minimizer of the cubic interpolating two samples, safeguarded into the interval.
double cubic_step(const Sample& a, const Sample& b) {
    const double lo = std::min(a.alpha, b.alpha);
    const double hi = std::max(a.alpha, b.alpha);
    const double d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.alpha - b.alpha);
    const double disc = d1 * d1 - a.slope * b.slope;
    double t = 0.5 * (lo + hi);
    if (disc >= 0.0) {
        const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
        const double denom = b.slope - a.slope + 2.0 * d2;
        if (denom != 0.0) t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / denom;
    }
    const double margin = 0.1 * (hi - lo);
    if (!std::isfinite(t) || t < lo + margin || t > hi - margin) t = 0.5 * (lo + hi);
    return t;
}

class LineSearch {
public:
    LineSearch(const Objective& f, const LbfgsOptions& opt, const Eigen::VectorXd& x0, const Eigen::VectorXd& dir,
               double f0, double slope0)
        : f_(f), opt_(opt), x0_(x0), dir_(dir), f0_(f0), slope0_(slope0) {}

    // Returns true with (x, g, value) set to an accepted point.
    bool run(double alpha_init, Eigen::VectorXd& x, Eigen::VectorXd& g, double& value, int& evals) {
        Sample prev{0.0, f0_, slope0_};
        double alpha = alpha_init;
        for (int it = 0; it < opt_.max_line_search_steps; ++it) {
            Sample cur;
            if (!evaluate(alpha, cur, x, g, evals)) {
                alpha = 0.5 * (prev.alpha + alpha);
                continue;
            }
            if (cur.value > f0_ + opt_.wolfe_c1 * alpha * slope0_ || (it > 0 && cur.value >= prev.value)) {
                return zoom(prev, cur, x, g, value, evals);
            }
            if (std::abs(cur.slope) <= -opt_.wolfe_c2 * slope0_) {
                value = cur.value;
                return true;
            }
            if (cur.slope >= 0.0) return zoom(cur, prev, x, g, value, evals);
            prev = cur;
            alpha *= 2.0;
        }
        return false;
    }

private:
    bool evaluate(double alpha, Sample& s, Eigen::VectorXd& x, Eigen::VectorXd& g, int& evals) {
        x = x0_ + alpha * dir_;
        ++evals;
        double value = 0.0;
        try {
            value = f_(x, g);
        } catch (const DegenerateFaceError&) {
            return false;
        }
        if (!std::isfinite(value) || !g.allFinite()) return false;
        s = {alpha, value, g.dot(dir_)};
        return true;
    }

    // lo satisfies sufficient decrease and has the lowest value so far.
    bool zoom(Sample lo, Sample hi, Eigen::VectorXd& x, Eigen::VectorXd& g, double& value, int& evals) {
        for (int it = 0; it < opt_.max_line_search_steps; ++it) {
            const double alpha = cubic_step(lo, hi);
            if (std::abs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, lo.alpha)) break;
            Sample cur;
            if (!evaluate(alpha, cur, x, g, evals)) {
                hi = {alpha, std::numeric_limits<double>::max(), 0.0};
                continue;
            }
            if (cur.value > f0_ + opt_.wolfe_c1 * alpha * slope0_ || cur.value >= lo.value) {
                hi = cur;
            } else {
                if (std::abs(cur.slope) <= -opt_.wolfe_c2 * slope0_) {
                    value = cur.value;
                    return true;
                }
                if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
                lo = cur;
            }
        }
        // Fall back to the best sufficient-decrease point found.
        if (lo.alpha > 0.0) {
            Sample s;
            if (evaluate(lo.alpha, s, x, g, evals)) {
                value = s.value;
                return true;
            }
        }
        return false;
    }

    const Objective& f_;
    const LbfgsOptions& opt_;
    const Eigen::VectorXd& x0_;
    const Eigen::VectorXd& dir_;
    double f0_;
    double slope0_;
};

}  // namespace

LbfgsResult minimize_lbfgs(const Objective& objective, Eigen::VectorXd& x, const LbfgsOptions& options) {
    LbfgsResult result;
    Eigen::VectorXd g(x.size());
    double f = objective(x, g);
    result.evaluations = 1;
    if (!std::isfinite(f) || !g.allFinite()) throw NumericalError("objective is not finite at the starting point");
    result.accepted_values.push_back(f);

    std::deque<Eigen::VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;
    Eigen::VectorXd x_new(x.size()), g_new(x.size()), dir(x.size());

    for (int iter = 0;; ++iter) {
        result.iterations = iter;
        result.value = f;
        result.gradient_norm = g.lpNorm<Eigen::Infinity>();
        if (result.gradient_norm <= options.gradient_tolerance) {
            result.status = LbfgsStatus::GradientConverged;
            return result;
        }
        if (iter >= options.max_iterations) {
            result.status = LbfgsStatus::MaxIterations;
            return result;
        }

        // Two-loop recursion.
        dir = -g;
        const std::size_t m = s_hist.size();
        std::vector<double> a(m);
        for (std::size_t j = m; j-- > 0;) {
            a[j] = rho_hist[j] * s_hist[j].dot(dir);
            dir -= a[j] * y_hist[j];
        }
        if (m > 0) dir *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        for (std::size_t j = 0; j < m; ++j) {
            const double b = rho_hist[j] * y_hist[j].dot(dir);
            dir += (a[j] - b) * s_hist[j];
        }
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            dir = -g;
            slope = -g.squaredNorm();
        }

        const double alpha0 = m == 0 ? std::min(1.0, 1.0 / g.lpNorm<Eigen::Infinity>()) : 1.0;
        LineSearch ls(objective, options, x, dir, f, slope);
        double f_new = f;
        if (!ls.run(alpha0, x_new, g_new, f_new, result.evaluations) || !(f_new <= f)) {
            if (m > 0) {
                // Retry once along steepest descent with a fresh memory.
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
                continue;
            }
            result.status = LbfgsStatus::LineSearchFailed;
            return result;
        }

        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        const double decrease = f - f_new;
        x = x_new;
        g = g_new;
        f = f_new;
        result.accepted_values.push_back(f);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            s_hist.push_back(s);
            y_hist.push_back(y);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > options.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        if (decrease <= options.relative_decrease_tolerance * std::max(1.0, std::abs(f))) {
            result.iterations = iter + 1;
            result.value = f;
            result.gradient_norm = g.lpNorm<Eigen::Infinity>();
            result.status = result.gradient_norm <= options.gradient_tolerance ? LbfgsStatus::GradientConverged
                                                                               : LbfgsStatus::SmallDecrease;
            return result;
        }
    }
}

}  // namespace lamina
