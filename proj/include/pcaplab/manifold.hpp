#pragma once

#include <memory>
#include <string>
#include <vector>

namespace pcaplab {

enum class ProfileKind { euclidean, cone, smoothed_cone, grafted_cone, tabulated };

std::string to_string(ProfileKind k);

// Rotationally symmetric ambient manifold (M, g) with
//   g = dr^2 + h(r)^2 g_{S^{n-1}}.
// The warping function h carries the whole geometry: curvature sign,
// asymptotic volume ratio, areas and volumes of geodesic spheres/balls.
// Immutable after construction; all evaluations are pure.
class WarpedProfile {
public:
    struct Eval {
        double h;
        double dh;
        double d2h;
    };

    static WarpedProfile euclidean(int n);
    // h(r) = a r. Singular vertex at the origin for a < 1.
    static WarpedProfile cone(double a, int n);
    // h(r) = a r + (1-a) atan(r); smooth at the origin, conical at infinity.
    static WarpedProfile smoothed_cone(double a, int n);
    // Exactly flat (h = r) up to r = r1, then bends with h'' < 0 toward
    // asymptotic slope a:  h = r1 + a(r-r1) + (1-a) w atan((r-r1)/w).
    static WarpedProfile grafted_cone(double a, double r1, double w, int n);
    // C^1 monotone Hermite interpolation of (r_i, h_i, h'_i) samples; affine
    // extension beyond the data, linear through the origin below it.
    static WarpedProfile tabulated(double a, int n, std::vector<double> r,
                                   std::vector<double> h, std::vector<double> dh);

    Eval eval(double r) const;
    double h(double r) const { return eval(r).h; }
    double dh(double r) const { return eval(r).dh; }
    double d2h(double r) const { return eval(r).d2h; }

    int dimension() const { return n_; }
    ProfileKind kind() const { return kind_; }
    double slope() const { return a_; }
    bool smooth_at_origin() const { return kind_ != ProfileKind::cone || a_ == 1.0; }

    // Asymptotic affine model h(r) ~ slope*r + tail_offset beyond tail_radius.
    double tail_offset() const { return tail_offset_; }
    double tail_radius() const { return tail_radius_; }

    // True where |h''| is negligible relative to h'^2/h (exactly conical
    // metric locally).
    bool is_conical_at(double r, double tol = 1e-12) const;

    std::string describe() const;

private:
    WarpedProfile() = default;

    int n_ = 3;
    ProfileKind kind_ = ProfileKind::euclidean;
    double a_ = 1.0;
    double r1_ = 0.0; // grafted_cone junction
    double w_ = 1.0;  // grafted_cone transition width
    double tail_offset_ = 0.0;
    double tail_radius_ = 1.0;

    // tabulated data
    std::vector<double> tr_, th_, tdh_;
};

struct RicciPair {
    double radial;     // eigenvalue on the dr direction
    double tangential; // eigenvalue on each spherical direction
};

// Ricci eigenvalues of the warped metric at radius r:
//   radial = -(n-1) h''/h,  tangential = (-h h'' + (n-2)(1 - h'^2)) / h^2.
RicciPair ricci_components(const WarpedProfile& profile, double r);

// AVR(g) = lim |B(o,r)| / (r^n |B^n|) = a^{n-1}.
double avr(const WarpedProfile& profile);

double sphere_area(const WarpedProfile& profile, double r);
double ball_volume(const WarpedProfile& profile, double r);

// H of the geodesic sphere of radius r w.r.t. the outward normal.
double mean_curvature_sphere(const WarpedProfile& profile, double r);

struct ValidityReport {
    bool ok = true;
    double max_d2h = 0.0;         // max h'' over the check grid (should be <= tol)
    double min_ricci = 0.0;       // min Ricci eigenvalue over the grid
    double max_fd_mismatch = 0.0; // worst relative FD consistency of (h,h',h'')
    std::string message;
};

// Standing hypotheses: h'' <= 0, both Ricci eigenvalues >= 0, derivatives
// consistent with finite differences, on a log grid r in [1e-3, 1e6].
ValidityReport check_validity(const WarpedProfile& profile);

enum class DomainKind { geodesic_ball, perturbed_ball };

// Axisymmetric domain. Boundary r = R(theta) = r0 (1 + eps cos(k theta)).
struct DomainSpec {
    DomainKind kind = DomainKind::geodesic_ball;
    double r0 = 1.0;
    double eps = 0.0;
    int k = 0;

    static DomainSpec ball(double r0);
    static DomainSpec perturbed(double r0, double eps, int k);

    double boundary_radius(double theta) const;
    double boundary_radius_d1(double theta) const;
    double boundary_radius_d2(double theta) const;
    bool is_ball() const { return kind == DomainKind::geodesic_ball || eps == 0.0; }
    void validate() const;
};

// |Omega| of a DomainSpec by quadrature of the radial volume primitive.
double domain_volume(const WarpedProfile& profile, const DomainSpec& domain);
// |dOmega| (area of the revolved boundary surface).
double domain_boundary_area(const WarpedProfile& profile, const DomainSpec& domain);

} // namespace pcaplab
