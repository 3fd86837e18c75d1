#include "pcaplab/imcf.hpp"
#include "pcaplab/errors.hpp"
#include "pcaplab/numerics.hpp"

#include <boost/numeric/odeint.hpp>

#include <cmath>

namespace pcaplab {

namespace {

FlowState make_state(const WarpedProfile& profile, double t, double r) {
    const int n = profile.dimension();
    const auto e = profile.eval(r);
    FlowState s;
    s.t = t;
    s.r = r;
    s.area = num::unit_sphere_area(n) * std::pow(e.h, n - 1);
    s.H = (n - 1) * e.dh / e.h;
    s.Q = (n - 1) * std::pow(num::unit_sphere_area(n), 1.0 / (n - 1)) * e.dh;
    return s;
}

} // namespace

std::vector<FlowState> evolve(const WarpedProfile& profile, double r_start,
                              double T, double dt) {
    if (!(r_start > 0.0)) throw NonPositiveRadius("flow must start at r > 0");
    if (!(T > 0.0) || !(dt > 0.0)) throw StepFailure("need T > 0 and dt > 0");
    const int n = profile.dimension();

    using state_t = std::array<double, 1>;
    auto rhs = [&](const state_t& x, state_t& dxdt, double) {
        const auto e = profile.eval(x[0]);
        if (!(e.dh > 0.0))
            throw StepFailure("h' vanished along the flow at r = " +
                              std::to_string(x[0]));
        dxdt[0] = e.h / ((n - 1) * e.dh);
    };

    namespace ode = boost::numeric::odeint;
    auto stepper = ode::make_controlled(1e-12, 1e-12,
                                        ode::runge_kutta_cash_karp54<state_t>());

    std::vector<FlowState> out;
    state_t x{r_start};
    double t = 0.0;
    out.push_back(make_state(profile, t, x[0]));
    const int steps = static_cast<int>(std::ceil(T / dt));
    for (int k = 1; k <= steps; ++k) {
        const double target = std::min(T, k * dt);
        ode::integrate_adaptive(stepper, rhs, x, t, target,
                                std::min(dt, 1e-2));
        t = target;
        out.push_back(make_state(profile, t, x[0]));
    }
    return out;
}

QSeries q_series(const std::vector<FlowState>& states, const WarpedProfile& profile) {
    const int n = profile.dimension();
    QSeries qs;
    qs.max_mismatch = 0.0;
    for (const auto& s : states) {
        // definition: |dOmega_t|^{-(n-2)/(n-1)} \int H dsigma over the
        // geodesic sphere (H constant there, area in closed form).
        const double total_H = s.H * s.area;
        const double q_def = std::pow(s.area, -(n - 2.0) / (n - 1.0)) * total_H;
        qs.t.push_back(s.t);
        qs.q_definition.push_back(q_def);
        qs.q_reduction.push_back(s.Q);
        qs.max_mismatch = std::max(
            qs.max_mismatch, std::abs(q_def - s.Q) / std::max(std::abs(s.Q), 1e-300));
    }
    return qs;
}

SplittingResiduals splitting_identities_check(const std::vector<FlowState>& states,
                                              const WarpedProfile& profile) {
    if (states.size() < 2) throw StepFailure("need an evolved flow");
    for (const auto& s : states)
        if (!profile.is_conical_at(s.r, 1e-10))
            throw NotConicalRegion("h'' != 0 at r = " + std::to_string(s.r));
    const int n = profile.dimension();
    const double h0 = profile.h(states.front().r);
    const double H0 = states.front().H;
    const double A0 = states.front().area;
    SplittingResiduals res{0.0, 0.0, 0.0};
    for (const auto& s : states) {
        const double ht = profile.h(s.r);
        const double metric = ht * ht / (std::exp(2.0 * s.t / (n - 1)) * h0 * h0);
        const double mean = s.H / (std::exp(-s.t / (n - 1)) * H0);
        const double area = s.area / (A0 * std::exp(s.t));
        res.metric_law = std::max(res.metric_law, std::abs(metric - 1.0));
        res.mean_curvature_law = std::max(res.mean_curvature_law, std::abs(mean - 1.0));
        res.area_law = std::max(res.area_law, std::abs(area - 1.0));
    }
    return res;
}

ConeBoundResult bishop_gromov_cone_bound(const WarpedProfile& profile, double r0) {
    if (!(r0 > 0.0)) throw NonPositiveRadius("cone bound needs r0 > 0");
    // pre: an outer conical neighbourhood of B_{r0} must exist.
    bool near_conical = true;
    for (int i = 0; i <= 8; ++i)
        near_conical = near_conical && profile.is_conical_at(r0 * (1.0 + 0.01 * i), 1e-10);
    if (!near_conical)
        throw NotConicalRegion("no conical neighbourhood outside r0 = " +
                               std::to_string(r0));
    const int n = profile.dimension();
    const auto e = profile.eval(r0);
    const double rho0 = e.h / e.dh;
    ConeBoundResult out;
    out.boundary_area = num::unit_sphere_area(n) * std::pow(e.h, n - 1);
    out.bound = std::pow(rho0, n - 1) * num::unit_sphere_area(n) * avr(profile);
    out.margin = out.boundary_area - out.bound;
    out.conical_everywhere_beyond = true;
    for (int i = 0; i <= 200 && out.conical_everywhere_beyond; ++i) {
        const double r = r0 * std::exp(std::log(1e6 / r0) * i / 200.0);
        out.conical_everywhere_beyond = profile.is_conical_at(r, 1e-10);
    }
    return out;
}

} // namespace pcaplab
