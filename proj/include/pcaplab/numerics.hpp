#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace pcaplab::num {

// Pairwise (tree) summation. Order-stable and far more accurate than a
// naive left fold on long alternating sums; every reduction in the library
// that feeds an output file goes through here.
double pairwise_sum(std::span<const double> xs);

// Adaptive Gauss-Kronrod integration of f on [a, b], relative tolerance
// rel_tol; an estimated error below abs_tol is also accepted. Throws
// QuadratureFailure if neither tolerance can be met.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-12, double abs_tol = 0.0);

// Same, with the substitution x = exp(s). Appropriate for power-law
// integrands on wide intervals [a, b], 0 < a < b.
double integrate_log(const std::function<double(double)>& f, double a, double b,
                     double rel_tol = 1e-12, double abs_tol = 0.0);

// log of integral of exp(g(x)) dx over [a,b] in log-x space, for integrands
// with huge dynamic range (p close to 1). g is log of the integrand.
double log_integrate_log(const std::function<double(double)>& log_f, double a,
                         double b, double rel_tol = 1e-12);

double log_add_exp(double la, double lb);

// Bracketed scalar root of a continuous monotone f with f(a), f(b) of
// opposite sign. TOMS748 under the hood; tol is a relative x-tolerance.
double find_root(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-14);

// Polynomial (Neville) extrapolation of samples (x_i, y_i) to x = 0.
// Returns the extrapolated value; *spread (optional) receives the difference
// between the last two Neville columns as an error indicator.
double extrapolate_to_zero(std::span<const double> x, std::span<const double> y,
                           double* spread = nullptr);

// Centered finite-difference derivative with one step of Richardson
// refinement: combines stencils at dx and dx/2.
double fd_derivative(const std::function<double(double)>& f, double x, double dx);

// FNV-1a 64-bit hash of a byte string; used for config provenance stamps.
std::uint64_t fnv1a(const std::string& bytes);
std::string fnv1a_hex(const std::string& bytes);

// |S^{n-1}|, the area of the unit (n-1)-sphere in R^n, and |B^n|.
double unit_sphere_area(int n);
double unit_ball_volume(int n);

} // namespace pcaplab::num
