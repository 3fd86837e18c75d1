#include "pcaplab/numerics.hpp"
#include "pcaplab/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace pcaplab::num {

double pairwise_sum(std::span<const double> xs) {
    const std::size_t n = xs.size();
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol, double abs_tol) {
    using gk = boost::math::quadrature::gauss_kronrod<double, 15>;
    double err = 0.0;
    double val = gk::integrate(f, a, b, 15, rel_tol, &err);
    const double scale = std::max(std::abs(val), 1e-300);
    if (!std::isfinite(val) ||
        (err > 1e4 * rel_tol * scale + 1e-300 && err > abs_tol))
        throw QuadratureFailure("adaptive Gauss-Kronrod did not converge on [" +
                                std::to_string(a) + ", " + std::to_string(b) + "]");
    return val;
}

double integrate_log(const std::function<double(double)>& f, double a, double b,
                     double rel_tol, double abs_tol) {
    if (!(a > 0.0) || !(b > a))
        throw QuadratureFailure("integrate_log requires 0 < a < b");
    auto g = [&f](double s) {
        const double x = std::exp(s);
        return f(x) * x;
    };
    return integrate(g, std::log(a), std::log(b), rel_tol, abs_tol);
}

double log_add_exp(double la, double lb) {
    if (la == -std::numeric_limits<double>::infinity()) return lb;
    if (lb == -std::numeric_limits<double>::infinity()) return la;
    const double m = std::max(la, lb);
    return m + std::log(std::exp(la - m) + std::exp(lb - m));
}

double log_integrate_log(const std::function<double(double)>& log_f, double a,
                         double b, double rel_tol) {
    if (!(a > 0.0) || !(b > a))
        throw QuadratureFailure("log_integrate_log requires 0 < a < b");
    // Split [log a, log b] into panels, integrate each with its max factored
    // out, and combine in log space. Panels far below the global maximum only
    // need absolute accuracy relative to the dominating ones.
    const double sa = std::log(a), sb = std::log(b);
    const int panels = std::max(8, static_cast<int>(std::ceil((sb - sa) / 0.5)));
    auto lg = [&](double s) { return log_f(std::exp(s)) + s; };
    std::vector<double> m(panels, -std::numeric_limits<double>::infinity());
    double m_max = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < panels; ++k) {
        const double s0 = sa + (sb - sa) * k / panels;
        const double s1 = sa + (sb - sa) * (k + 1) / panels;
        for (int j = 0; j <= 4; ++j)
            m[k] = std::max(m[k], lg(s0 + (s1 - s0) * j / 4.0));
        m_max = std::max(m_max, m[k]);
    }
    double acc = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < panels; ++k) {
        if (m[k] == -std::numeric_limits<double>::infinity()) continue;
        const double s0 = sa + (sb - sa) * k / panels;
        const double s1 = sa + (sb - sa) * (k + 1) / panels;
        auto g = [&](double s) { return std::exp(lg(s) - m[k]); };
        const double slack = std::min(700.0, m_max - m[k]);
        const double v = integrate(g, s0, s1, rel_tol,
                                   0.1 * rel_tol * std::exp(slack));
        if (v > 0.0) acc = log_add_exp(acc, m[k] + std::log(v));
    }
    return acc;
}

double find_root(const std::function<double(double)>& f, double a, double b,
                 double rel_tol) {
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if ((fa > 0.0) == (fb > 0.0))
        throw RootNotBracketed("f(" + std::to_string(a) + ") and f(" +
                               std::to_string(b) + ") have the same sign");
    boost::math::tools::eps_tolerance<double> tol(
        static_cast<unsigned>(std::max(10.0, -std::log2(rel_tol))));
    std::uintmax_t max_iter = 200;
    auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, max_iter);
    return 0.5 * (r.first + r.second);
}

double extrapolate_to_zero(std::span<const double> x, std::span<const double> y,
                           double* spread) {
    const std::size_t n = x.size();
    if (n == 0 || y.size() != n)
        throw ExtrapolationDiverged("empty or mismatched sample set");
    std::vector<double> t(y.begin(), y.end());
    double before_last = t[0];
    for (std::size_t j = 1; j < n; ++j) {
        before_last = t[0];
        for (std::size_t i = 0; i + j < n; ++i) {
            const double xi = x[i], xj = x[i + j];
            t[i] = (xi * t[i + 1] - xj * t[i]) / (xi - xj);
        }
    }
    if (spread) *spread = std::abs(t[0] - before_last);
    return t[0];
}

double fd_derivative(const std::function<double(double)>& f, double x, double dx) {
    auto central = [&](double h) { return (f(x + h) - f(x - h)) / (2.0 * h); };
    const double d1 = central(dx);
    const double d2 = central(0.5 * dx);
    return (4.0 * d2 - d1) / 3.0;
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string fnv1a_hex(const std::string& bytes) {
    static const char* digits = "0123456789abcdef";
    std::uint64_t h = fnv1a(bytes);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

double unit_sphere_area(int n) {
    // Area of S^{n-1} inside R^n.
    return 2.0 * std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n);
}

double unit_ball_volume(int n) { return unit_sphere_area(n) / n; }

} // namespace pcaplab::num
