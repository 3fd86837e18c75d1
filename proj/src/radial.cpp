#include "pcaplab/radial.hpp"
#include "pcaplab/errors.hpp"
#include "pcaplab/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace pcaplab {

namespace {

// log of \int_r^\infty h(s)^{-eta} ds, split into a numerical part on
// [r, Rs] and an affine-model tail (a s + c)^{-eta} beyond Rs, where the
// model is exact for conical ends. Rs is pushed out until the model's
// correction bound is below the requested tolerance.
double log_tail_integral(const WarpedProfile& prof, double eta, double r,
                         double tol) {
    const bool exact_tail = prof.kind() == ProfileKind::euclidean ||
                            prof.kind() == ProfileKind::cone ||
                            prof.kind() == ProfileKind::tabulated;
    const double a = (prof.kind() == ProfileKind::tabulated)
                         ? prof.dh(prof.tail_radius())
                         : prof.slope();
    const double c = prof.tail_offset();
    // |h(s) - (a s + c)| <= B1 / s for s >= tail_radius (atan-type tails);
    // relative tail error ~ eta * B1 / (a Rs^2 * a).
    const double B1 = std::max(1.0 - a, 1e-3);
    double Rs = exact_tail
                    ? std::max(10.0 * r, prof.tail_radius())
                    : std::max({10.0 * r, prof.tail_radius(),
                                std::sqrt(eta * B1 / (a * a * tol)) + 10.0});
    auto log_tail = [&](double R) {
        // \int_R^inf (a s + c)^{-eta} ds = (aR + c)^{1-eta} / (a (eta-1))
        return (1.0 - eta) * std::log(a * R + c) - std::log(a * (eta - 1.0));
    };
    auto log_f = [&](double s) { return -eta * std::log(prof.h(s)); };
    double lg = num::log_integrate_log(log_f, r, Rs, tol);
    double lt = log_tail(Rs);
    double base = num::log_add_exp(lg, lt);
    // numerical correction of the affine model on [Rs, 64 Rs]; h <= as + c
    // for atan-type tails, so the correction is nonnegative. expm1/log1p
    // keep the tiny difference free of cancellation.
    if (prof.kind() == ProfileKind::smoothed_cone ||
        prof.kind() == ProfileKind::grafted_cone) {
        auto corr = [&](double s) {
            const double hv = prof.h(s);
            const double mv = a * s + c;
            return std::pow(mv, -eta) * std::expm1(-eta * std::log1p((hv - mv) / mv));
        };
        const double floor = 0.1 * tol * std::exp(base);
        const double cval = num::integrate_log(corr, Rs, 64.0 * Rs, 1e-6, floor);
        if (cval > 0.0) base = num::log_add_exp(base, std::log(cval));
    }
    return base;
}

} // namespace

RadialSolution::RadialSolution(WarpedProfile profile, double p, double r0,
                               double quadrature_tol)
    : profile_(std::move(profile)), p_(p), r0_(r0), tol_(quadrature_tol) {
    const int n = profile_.dimension();
    if (!(p > 1.0) || !(p < n))
        throw ExponentOutOfRange("p must lie in (1, n); got p = " + std::to_string(p));
    if (!(r0 > 0.0)) throw NonPositiveRadius("r0 must be positive");
    eta_ = (n - 1.0) / (p - 1.0);
    log_I0_ = log_tail_integral(profile_, eta_, r0_, tol_);
}

double RadialSolution::log_I(double r) const {
    if (!(r > 0.0)) throw NonPositiveRadius("log_I needs r > 0");
    return log_tail_integral(profile_, eta_, r, tol_);
}

double RadialSolution::I(double r) const { return std::exp(log_I(r)); }

double RadialSolution::log_u(double r) const { return log_I(r) - log_I0_; }

double RadialSolution::u(double r) const {
    if (r <= r0_) return 1.0;
    return std::exp(log_u(r));
}

double RadialSolution::du_abs(double r) const {
    if (!(r > 0.0)) throw NonPositiveRadius("du_abs needs r > 0");
    return std::exp(-eta_ * std::log(profile_.h(r)) - log_I0_);
}

double RadialSolution::level_radius(double t) const {
    if (!(t >= 1.0)) throw LevelOutOfRange("level parameter t must be >= 1");
    if (t == 1.0) return r0_;
    const double target = log_I0_ - std::log(t);
    double lo = r0_, hi = 2.0 * r0_;
    while (log_I(hi) > target) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) throw RootNotBracketed("level radius beyond 1e12");
    }
    auto f = [&](double r) { return log_I(r) - target; };
    return num::find_root(f, lo, hi, 1e-13);
}

double RadialSolution::ode_residual(double r) const {
    // flux h^{n-1} |u'|^{p-1} should be exactly I(r0)^{1-p}; report the
    // relative deviation.
    const int n = profile_.dimension();
    const double flux = std::exp((n - 1) * std::log(profile_.h(r)) +
                                 (p_ - 1.0) * std::log(du_abs(r)));
    const double expect = std::exp((1.0 - p_) * log_I0_);
    return std::abs(flux - expect) / expect;
}

RadialSolution solve_radial(const WarpedProfile& profile, double p, double r0) {
    return RadialSolution(profile, p, r0);
}

CapacityResult capacity(const RadialSolution& sol) {
    const int n = sol.dimension();
    const double p = sol.p();
    const double S = num::unit_sphere_area(n);
    // Cap_p = |S^{n-1}| I(r0)^{1-p}
    const double cap = S * std::exp((1.0 - p) * sol.log_I_r0());
    const double cp = std::pow((p - 1.0) / (n - p), p - 1.0) * cap / S;
    // boundary form: \int_{dOmega} |Du|^{p-1} dsigma
    const double bnd = S * std::pow(sol.profile().h(sol.r0()), n - 1) *
                       std::pow(sol.du_abs(sol.r0()), p - 1.0);
    return {cap, cp, bnd};
}

double green_function(const WarpedProfile& profile, double p, double r) {
    const int n = profile.dimension();
    if (!(p > 1.0) || !(p < n)) throw ExponentOutOfRange("p must lie in (1, n)");
    if (!(r > 0.0)) throw NonPositiveRadius("green_function needs r > 0");
    const double eta = (n - 1.0) / (p - 1.0);
    const double lg = log_tail_integral(profile, eta, r, 1e-13);
    return std::pow(num::unit_sphere_area(n), -1.0 / (p - 1.0)) * std::exp(lg);
}

GreenBoundCheck green_sharp_bound_check(const WarpedProfile& profile, double p) {
    const int n = profile.dimension();
    const double alpha = (n - p) / (p - 1.0);
    GreenBoundCheck out;
    out.rescale = ((n - p) / (p - 1.0)) *
                  std::pow(num::unit_sphere_area(n), 1.0 / (p - 1.0));
    out.min_margin = 1e300;
    out.upper_const = 0.0;
    for (int i = 0; i <= 60; ++i) {
        const double r = std::exp(std::log(1e-2) + (std::log(1e4) - std::log(1e-2)) * i / 60.0);
        const double gp = out.rescale * green_function(profile, p, r);
        const double ref = std::pow(r, -alpha);
        out.min_margin = std::min(out.min_margin, (gp - ref) / ref);
        out.upper_const = std::max(out.upper_const, gp / ref);
    }
    return out;
}

LiYauConstants li_yau_check(const RadialSolution& sol) {
    const int n = sol.dimension();
    const double p = sol.p();
    const double alpha = (n - p) / (p - 1.0);
    LiYauConstants out{1e300, 0.0, 0.0};
    for (int i = 0; i <= 80; ++i) {
        const double r = sol.r0() * std::exp(std::log(1e6) * i / 80.0);
        const double lu = sol.log_u(r);
        const double v = std::exp(lu + alpha * std::log(r));
        out.c1 = std::min(out.c1, v);
        out.c2 = std::max(out.c2, v);
        const double g = std::exp(std::log(sol.du_abs(r)) -
                                  (n - 1.0) / (n - p) * lu);
        out.grad_const = std::max(out.grad_const, g);
    }
    return out;
}

double f_beta_radial(const RadialSolution& sol, double beta, double t) {
    if (!(t >= 1.0)) throw LevelOutOfRange("t must be >= 1");
    if (!(beta >= 0.0)) throw ExponentOutOfRange("beta must be >= 0");
    const int n = sol.dimension();
    const double p = sol.p();
    const double m = (beta + 1.0) * (p - 1.0);
    const double gamma = beta * (n - 1.0) * (p - 1.0) / (n - p);
    const double rt = sol.level_radius(t);
    return std::exp(gamma * std::log(t) +
                    std::log(num::unit_sphere_area(n)) +
                    (n - 1.0) * std::log(sol.profile().h(rt)) +
                    m * std::log(sol.du_abs(rt)));
}

double f_infty_radial(const RadialSolution& sol, double t) {
    if (!(t >= 1.0)) throw LevelOutOfRange("t must be >= 1");
    const int n = sol.dimension();
    const double p = sol.p();
    const double rt = sol.level_radius(t);
    return std::exp((n - 1.0) / (n - p) * std::log(t) +
                    std::log(sol.du_abs(rt)));
}

double f_beta_radial_derivative(const RadialSolution& sol, double beta, double t) {
    const int n = sol.dimension();
    const double p = sol.p();
    const double m = (beta + 1.0) * (p - 1.0);
    const double gamma = beta * (n - 1.0) * (p - 1.0) / (n - p);
    const double lambda = (n - 1.0) * (p - 1.0) / (n - p);
    const double rt = sol.level_radius(t);
    const double w = sol.du_abs(rt);
    const double H = mean_curvature_sphere(sol.profile(), rt);
    const double bracket = H - lambda * t * w; // |D log u| = t |Du| on {u = 1/t}
    const double area_term = num::unit_sphere_area(n) *
                             std::pow(sol.profile().h(rt), n - 1);
    return -beta * std::pow(t, gamma - 2.0) * area_term *
           std::pow(w, m - 1.0) * bracket;
}

double f_beta_radial_derivative_bulk(const RadialSolution& sol, double beta,
                                     double t) {
    const int n = sol.dimension();
    const double p = sol.p();
    const double m = (beta + 1.0) * (p - 1.0);
    const double gamma = beta * (n - 1.0) * (p - 1.0) / (n - p);
    const double lambda = (n - 1.0) * (p - 1.0) / (n - p);
    const double kappa = 1.0 / lambda;
    const double rt = sol.level_radius(t);
    const double S = num::unit_sphere_area(n);
    auto integrand = [&](double r) {
        const auto e = sol.profile().eval(r);
        const double w = sol.du_abs(r);
        const double uu = sol.u(r);
        const double H = (n - 1.0) * e.dh / e.h;
        const double bracket = H - lambda * w / uu;
        const double ric_nn = -(n - 1.0) * e.d2h / e.h;
        const double brace = (beta - kappa) * bracket * bracket + ric_nn;
        return std::pow(uu, 2.0 - gamma) * std::pow(w, m - 1.0) * brace *
               S * std::pow(e.h, n - 1.0);
    };
    // integrate over {u <= 1/t} = [rt, inf); the integrand decays like
    // r^{(1-n)/(p-1)} times the brace, so a far cutoff with a power-law
    // tail estimate at machine-negligible level suffices.
    double R_hi = std::max(1e6, 1e3 * rt);
    const double val = num::integrate_log(integrand, rt, R_hi, 1e-11);
    return -beta * val;
}

double p_to_one_limit(const WarpedProfile& profile, double r0,
                      std::span<const double> p_sequence) {
    if (p_sequence.size() < 2)
        throw ExtrapolationDiverged("need at least two p values");
    std::vector<double> x, y;
    for (double p : p_sequence) {
        if (!(p > 1.0) || !(p < profile.dimension()))
            throw ExponentOutOfRange("p sequence must lie in (1, n)");
        x.push_back(p - 1.0);
        y.push_back(capacity(solve_radial(profile, p, r0)).c_p);
    }
    for (std::size_t i = 0; i + 1 < x.size(); ++i)
        if (!(x[i] > x[i + 1]))
            throw ExtrapolationDiverged("p sequence must decrease toward 1");
    double spread = 0.0;
    const double lim = num::extrapolate_to_zero(x, y, &spread);
    if (!(std::isfinite(lim)) || spread > 0.2 * std::abs(lim))
        throw ExtrapolationDiverged("Richardson estimates not Cauchy");
    return lim;
}

} // namespace pcaplab
