#pragma once

#include "pcaplab/manifold.hpp"

#include <vector>

namespace pcaplab {

// One snapshot of the radial inverse mean curvature flow: a geodesic sphere
// of radius r at flow time t, with its area, mean curvature and the
// area-normalised total mean curvature Q.
struct FlowState {
    double t;
    double r;
    double area;
    double H;
    double Q;
};

// Evolves the geodesic sphere r_start under dr/dt = 1/H = h/((n-1) h')
// up to time T with adaptive RK (per-step relative tolerance 1e-10 or
// tighter). States are reported on a uniform time grid of spacing ~dt.
std::vector<FlowState> evolve(const WarpedProfile& profile, double r_start,
                              double T, double dt);

// Q(t) recomputed from the definition (area-normalised total mean
// curvature, by quadrature over the sphere) and from the warped-profile
// reduction (n-1) |S^{n-1}|^{1/(n-1)} h'(r(t)).
struct QSeries {
    std::vector<double> t;
    std::vector<double> q_definition;
    std::vector<double> q_reduction;
    double max_mismatch; // max relative |definition - reduction|
};

QSeries q_series(const std::vector<FlowState>& states, const WarpedProfile& profile);

// Residuals of the cone-splitting laws along a flow that stays in an
// exactly conical region: metric law h(r(t))^2 = e^{2t/(n-1)} h(r(0))^2 and
// mean-curvature law H_t = e^{-t/(n-1)} H_0. Throws NotConicalRegion if the
// trajectory leaves the conical regime.
struct SplittingResiduals {
    double metric_law;
    double mean_curvature_law;
    double area_law;
};

SplittingResiduals splitting_identities_check(const std::vector<FlowState>& states,
                                              const WarpedProfile& profile);

// Lower area bound for a region with an outer conical neighbourhood:
// |dK| >= rho0^{n-1} |S^{n-1}| AVR with rho0 = h(r0)/h'(r0).
// Returns the margin |dK| - bound (>= 0, zero iff conical all the way out).
struct ConeBoundResult {
    double boundary_area;
    double bound;
    double margin;
    bool conical_everywhere_beyond;
};

ConeBoundResult bishop_gromov_cone_bound(const WarpedProfile& profile, double r0);

} // namespace pcaplab
