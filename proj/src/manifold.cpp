#include "pcaplab/manifold.hpp"
#include "pcaplab/errors.hpp"
#include "pcaplab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pcaplab {

std::string to_string(ProfileKind k) {
    switch (k) {
    case ProfileKind::euclidean: return "euclidean";
    case ProfileKind::cone: return "cone";
    case ProfileKind::smoothed_cone: return "smoothed_cone";
    case ProfileKind::grafted_cone: return "grafted_cone";
    case ProfileKind::tabulated: return "tabulated";
    }
    return "?";
}

WarpedProfile WarpedProfile::euclidean(int n) {
    WarpedProfile p;
    p.n_ = n;
    p.kind_ = ProfileKind::euclidean;
    p.a_ = 1.0;
    p.tail_offset_ = 0.0;
    p.tail_radius_ = 1.0;
    if (n < 3) throw InvalidProfile("dimension must be >= 3");
    return p;
}

WarpedProfile WarpedProfile::cone(double a, int n) {
    if (n < 3) throw InvalidProfile("dimension must be >= 3");
    if (!(a > 0.0) || a > 1.0) throw InvalidProfile("cone slope must lie in (0,1]");
    WarpedProfile p;
    p.n_ = n;
    p.kind_ = ProfileKind::cone;
    p.a_ = a;
    p.tail_offset_ = 0.0;
    p.tail_radius_ = 1.0;
    return p;
}

WarpedProfile WarpedProfile::smoothed_cone(double a, int n) {
    if (n < 3) throw InvalidProfile("dimension must be >= 3");
    if (!(a > 0.0) || a > 1.0)
        throw InvalidProfile("smoothed_cone slope must lie in (0,1]");
    WarpedProfile p;
    p.n_ = n;
    p.kind_ = ProfileKind::smoothed_cone;
    p.a_ = a;
    p.tail_offset_ = (1.0 - a) * M_PI_2;
    p.tail_radius_ = 10.0;
    return p;
}

WarpedProfile WarpedProfile::grafted_cone(double a, double r1, double w, int n) {
    if (n < 3) throw InvalidProfile("dimension must be >= 3");
    if (!(a > 0.0) || a > 1.0) throw InvalidProfile("slope must lie in (0,1]");
    if (!(r1 > 0.0) || !(w > 0.0)) throw InvalidProfile("junction and width must be positive");
    WarpedProfile p;
    p.n_ = n;
    p.kind_ = ProfileKind::grafted_cone;
    p.a_ = a;
    p.r1_ = r1;
    p.w_ = w;
    p.tail_offset_ = (1.0 - a) * (r1 + w * M_PI_2);
    p.tail_radius_ = r1 + 10.0 * w;
    return p;
}

WarpedProfile WarpedProfile::tabulated(double a, int n, std::vector<double> r,
                                       std::vector<double> h, std::vector<double> dh) {
    if (n < 3) throw InvalidProfile("dimension must be >= 3");
    if (r.size() < 4 || r.size() != h.size() || r.size() != dh.size())
        throw InvalidProfile("tabulated profile needs >= 4 consistent samples");
    for (std::size_t i = 0; i + 1 < r.size(); ++i)
        if (!(r[i + 1] > r[i]))
            throw InvalidProfile("tabulated radii must be strictly increasing");
    if (!(r.front() > 0.0)) throw InvalidProfile("tabulated radii must be positive");
    WarpedProfile p;
    p.n_ = n;
    p.kind_ = ProfileKind::tabulated;
    p.a_ = a;
    p.tr_ = std::move(r);
    p.th_ = std::move(h);
    p.tdh_ = std::move(dh);
    p.tail_radius_ = p.tr_.back();
    p.tail_offset_ = p.th_.back() - p.tdh_.back() * p.tr_.back();
    return p;
}

WarpedProfile::Eval WarpedProfile::eval(double r) const {
    if (!(r >= 0.0)) throw NonPositiveRadius("r = " + std::to_string(r));
    if (r == 0.0 && kind_ == ProfileKind::cone && a_ < 1.0)
        throw ProfileSingularAtOrigin("cone vertex is excluded from evaluations");
    switch (kind_) {
    case ProfileKind::euclidean:
        return {r, 1.0, 0.0};
    case ProfileKind::cone:
        return {a_ * r, a_, 0.0};
    case ProfileKind::smoothed_cone: {
        const double q = 1.0 + r * r;
        return {a_ * r + (1.0 - a_) * std::atan(r), a_ + (1.0 - a_) / q,
                -2.0 * (1.0 - a_) * r / (q * q)};
    }
    case ProfileKind::grafted_cone: {
        if (r <= r1_) return {r, 1.0, 0.0};
        const double x = (r - r1_) / w_;
        const double q = 1.0 + x * x;
        return {r1_ + a_ * (r - r1_) + (1.0 - a_) * w_ * std::atan(x),
                a_ + (1.0 - a_) / q, -2.0 * (1.0 - a_) * x / (w_ * q * q)};
    }
    case ProfileKind::tabulated: {
        if (r <= tr_.front()) {
            const double s = th_.front() / tr_.front();
            return {s * r, s, 0.0};
        }
        if (r >= tr_.back())
            return {th_.back() + tdh_.back() * (r - tr_.back()), tdh_.back(), 0.0};
        const auto it = std::upper_bound(tr_.begin(), tr_.end(), r);
        const std::size_t i = static_cast<std::size_t>(it - tr_.begin()) - 1;
        const double x0 = tr_[i], x1 = tr_[i + 1], dx = x1 - x0;
        const double t = (r - x0) / dx;
        const double y0 = th_[i], y1 = th_[i + 1];
        const double d0 = tdh_[i] * dx, d1 = tdh_[i + 1] * dx;
        // cubic Hermite basis
        const double t2 = t * t, t3 = t2 * t;
        const double hval = (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * d0 +
                            (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * d1;
        const double hder = ((6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * d0 +
                             (-6 * t2 + 6 * t) * y1 + (3 * t2 - 2 * t) * d1) /
                            dx;
        const double hdd = ((12 * t - 6) * y0 + (6 * t - 4) * d0 +
                            (-12 * t + 6) * y1 + (6 * t - 2) * d1) /
                           (dx * dx);
        return {hval, hder, hdd};
    }
    }
    throw InvalidProfile("unknown kind");
}

bool WarpedProfile::is_conical_at(double r, double tol) const {
    const Eval e = eval(r);
    const double scale = std::max(e.dh * e.dh / std::max(e.h, 1e-300), 1e-300);
    return std::abs(e.d2h) <= tol * scale;
}

std::string WarpedProfile::describe() const {
    std::ostringstream os;
    os << to_string(kind_) << "(a=" << a_ << ", n=" << n_;
    if (kind_ == ProfileKind::grafted_cone) os << ", r1=" << r1_ << ", w=" << w_;
    os << ")";
    return os.str();
}

RicciPair ricci_components(const WarpedProfile& profile, double r) {
    if (!(r > 0.0)) throw NonPositiveRadius("ricci_components needs r > 0");
    const auto e = profile.eval(r);
    const int n = profile.dimension();
    const double radial = -(n - 1) * e.d2h / e.h;
    const double tangential =
        (-e.h * e.d2h + (n - 2) * (1.0 - e.dh * e.dh)) / (e.h * e.h);
    return {radial, tangential};
}

double avr(const WarpedProfile& profile) {
    const double a = profile.slope();
    if (!(a > 0.0)) throw NoVolumeGrowth("profile slope must be positive");
    const int n = profile.dimension();
    // Validate the declared slope against the area ratio far out.
    const double R = (profile.kind() == ProfileKind::tabulated)
                         ? profile.tail_radius()
                         : 1e7;
    const double ratio = profile.h(R) / R;
    if (std::abs(ratio - a) > 1e-6 * std::max(a, 1.0))
        throw NoVolumeGrowth("declared slope " + std::to_string(a) +
                             " inconsistent with h(R)/R = " + std::to_string(ratio));
    return std::pow(a, n - 1);
}

double sphere_area(const WarpedProfile& profile, double r) {
    if (!(r > 0.0)) throw NonPositiveRadius("sphere_area needs r > 0");
    const int n = profile.dimension();
    return num::unit_sphere_area(n) * std::pow(profile.h(r), n - 1);
}

double ball_volume(const WarpedProfile& profile, double r) {
    if (!(r > 0.0)) throw NonPositiveRadius("ball_volume needs r > 0");
    const int n = profile.dimension();
    auto f = [&](double s) { return std::pow(profile.h(s), n - 1); };
    return num::unit_sphere_area(n) * num::integrate(f, 0.0, r, 1e-11);
}

double mean_curvature_sphere(const WarpedProfile& profile, double r) {
    if (!(r > 0.0)) throw NonPositiveRadius("mean_curvature_sphere needs r > 0");
    const auto e = profile.eval(r);
    return (profile.dimension() - 1) * e.dh / e.h;
}

ValidityReport check_validity(const WarpedProfile& profile) {
    ValidityReport rep;
    const double lo = std::log(1e-3), hi = std::log(1e6);
    const int N = 600;
    rep.max_d2h = -1e300;
    rep.min_ricci = 1e300;
    for (int i = 0; i <= N; ++i) {
        const double r = std::exp(lo + (hi - lo) * i / N);
        const auto e = profile.eval(r);
        rep.max_d2h = std::max(rep.max_d2h, e.d2h);
        const auto ric = ricci_components(profile, r);
        rep.min_ricci = std::min(rep.min_ricci, std::min(ric.radial, ric.tangential));
        // FD consistency of the reported derivatives
        const double dr = 1e-4 * r;
        const double fd1 = (profile.h(r + dr) - profile.h(r - dr)) / (2 * dr);
        const double fd2 =
            (profile.dh(r + dr) - profile.dh(r - dr)) / (2 * dr);
        const double s1 = std::abs(fd1 - e.dh) / std::max(std::abs(e.dh), 1e-12);
        const double s2 = std::abs(fd2 - e.d2h) /
                          std::max({std::abs(e.d2h), std::abs(e.dh) / r, 1e-12});
        rep.max_fd_mismatch = std::max({rep.max_fd_mismatch, s1, s2});
    }
    if (rep.max_d2h > 1e-12) {
        rep.ok = false;
        rep.message = "h'' > 0 somewhere (concavity violated)";
    } else if (rep.min_ricci < -1e-10) {
        rep.ok = false;
        rep.message = "negative Ricci eigenvalue";
    } else if (rep.max_fd_mismatch > 1e-6) {
        rep.ok = false;
        rep.message = "derivatives inconsistent with finite differences";
    }
    return rep;
}

DomainSpec DomainSpec::ball(double r0) {
    DomainSpec d;
    d.kind = DomainKind::geodesic_ball;
    d.r0 = r0;
    d.validate();
    return d;
}

DomainSpec DomainSpec::perturbed(double r0, double eps, int k) {
    DomainSpec d;
    d.kind = DomainKind::perturbed_ball;
    d.r0 = r0;
    d.eps = eps;
    d.k = k;
    d.validate();
    return d;
}

void DomainSpec::validate() const {
    if (!(r0 > 0.0)) throw InvalidDomain("r0 must be positive");
    if (kind == DomainKind::perturbed_ball) {
        if (!(std::abs(eps) < 1.0)) throw InvalidDomain("|eps| must be < 1");
        if (k < 0) throw InvalidDomain("angular mode k must be >= 0");
    }
}

double DomainSpec::boundary_radius(double theta) const {
    if (is_ball()) return r0;
    return r0 * (1.0 + eps * std::cos(k * theta));
}

double DomainSpec::boundary_radius_d1(double theta) const {
    if (is_ball()) return 0.0;
    return -r0 * eps * k * std::sin(k * theta);
}

double DomainSpec::boundary_radius_d2(double theta) const {
    if (is_ball()) return 0.0;
    return -r0 * eps * k * k * std::cos(k * theta);
}

double domain_volume(const WarpedProfile& profile, const DomainSpec& domain) {
    const int n = profile.dimension();
    if (domain.is_ball()) return ball_volume(profile, domain.r0);
    auto radial = [&](double R) {
        auto f = [&](double s) { return std::pow(profile.h(s), n - 1); };
        return num::integrate(f, 0.0, R, 1e-11);
    };
    auto g = [&](double theta) {
        return radial(domain.boundary_radius(theta)) *
               std::pow(std::sin(theta), n - 2);
    };
    return num::unit_sphere_area(n - 1) * num::integrate(g, 0.0, M_PI, 1e-10);
}

double domain_boundary_area(const WarpedProfile& profile, const DomainSpec& domain) {
    const int n = profile.dimension();
    if (domain.is_ball()) return sphere_area(profile, domain.r0);
    auto g = [&](double theta) {
        const double R = domain.boundary_radius(theta);
        const double Rp = domain.boundary_radius_d1(theta);
        const double hv = profile.h(R);
        const double J = std::sqrt(Rp * Rp + hv * hv);
        return std::pow(hv * std::sin(theta), n - 2) * J;
    };
    return num::unit_sphere_area(n - 1) * num::integrate(g, 0.0, M_PI, 1e-10);
}

} // namespace pcaplab
