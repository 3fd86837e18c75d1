#pragma once

#include "pcaplab/manifold.hpp"

#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace pcaplab {

enum class Grading { flux, geometric };
enum class FarField { robin, dirichlet };

struct GridParams {
    int Nr = 256;
    int Ntheta = 96;
    double R_max_factor = 100.0; // R_max = factor * r0
    Grading grading = Grading::flux;
};

struct SolverParams {
    double tol = 1e-10;          // nonlinear residual, relative to the p-flux scale
    double eps_start = 1e-2;     // gradient regularisation schedule
    double eps_end = 1e-8;
    double eps_factor = 0.1;
    int max_picard = 10;
    int max_newton = 40;
    FarField far_field = FarField::robin;
};

// Body-fitted meridian grid: logical coordinates (rho, theta) on
// [0,1] x [0,pi], rho = 0 on the domain boundary r = R(theta), rho = 1 on
// the far-field sphere r = R_max. The radial placement follows the level
// spacing of the radial potential (equal increments of
// I(r) = \int_r^inf h^{-(n-1)/(p-1)}), which concentrates nodes where the
// potential varies and renders radial solutions exactly on the mesh;
// a plain geometric grading is available as an alternative.
class MeridianGrid {
public:
    MeridianGrid(WarpedProfile profile, double p, DomainSpec domain,
                 GridParams params);

    const WarpedProfile& profile() const { return profile_; }
    const DomainSpec& domain() const { return domain_; }
    double p() const { return p_; }
    int nr() const { return Nr_; }
    int ntheta() const { return Nt_; }
    double r_max() const { return R_max_; }
    Grading grading() const { return params_.grading; }
    const GridParams& params() const { return params_; }

    double rho(int i) const { return static_cast<double>(i) / (Nr_ - 1); }
    double theta(int j) const { return M_PI * j / (Nt_ - 1); }
    double drho() const { return 1.0 / (Nr_ - 1); }
    double dtheta() const { return M_PI / (Nt_ - 1); }

    int node(int i, int j) const { return i * Nt_ + j; }
    int num_nodes() const { return Nr_ * Nt_; }

    double r(int i, int j) const { return r_[node(i, j)]; }
    double r_rho(int i, int j) const { return r_rho_[node(i, j)]; }
    double r_theta(int i, int j) const { return r_theta_[node(i, j)]; }

    // map evaluation anywhere (used by interpolation and bulk quadrature)
    double r_of(double rho, double theta) const;
    double rho_of(double r, double theta) const;
    void map_jacobian(double rho, double theta, double* r_out, double* r_rho_out,
                      double* r_theta_out) const;

    // measure weight W = h^{n-1} sin^{n-2}(theta) (without |S^{n-2}|)
    double weight(double r, double theta) const;

private:
    void build();
    double interp_I(double s) const;       // I as a function of s = log r
    double interp_I_dds(double s) const;   // dI/ds
    double invert_I(double xi, double s_hint) const;

    WarpedProfile profile_;
    double p_;
    DomainSpec domain_;
    GridParams params_;
    int Nr_, Nt_;
    double R_max_;
    double eta_;

    // I-table on a log grid
    std::vector<double> ts_;  // s = log r, ascending
    std::vector<double> tI_;  // I(e^s)
    std::vector<double> tD_;  // dI/ds = -h^{-eta} e^s

    std::vector<double> r_, r_rho_, r_theta_;
};

struct Convergence {
    int picard_iterations = 0;
    int newton_iterations = 0;
    double final_residual = 0.0;
    double eps_reached = 0.0;
    std::vector<double> eps_schedule;
};

// Nodal derived fields of a solved potential (physical components in the
// warped metric). Pole columns carry copies of their neighbours for the
// H / kappa entries; they enter every integral with weight sin^{n-2} = 0.
struct NodalFields {
    std::vector<double> u_r, u_t;       // du/dr, (1/1) du/dtheta (physical theta derivative)
    std::vector<double> norm_du;        // |Du|_g
    std::vector<double> nu_r, nu_t;     // outward normal -Du/|Du| (contravariant)
    std::vector<double> H;              // mean curvature of the level set
    std::vector<double> kappa_par;      // parallel principal curvature
    std::vector<double> d_norm_du_r, d_norm_du_t; // gradient of |Du|
    std::vector<double> norm_d_norm_du; // |D|Du||
    std::vector<double> dperp_norm_du;  // |D^perp |Du||
    std::vector<double> dtan_norm_du;   // |D^top |Du||
    std::vector<double> hess_sq;        // |DDu|^2 (covariant Hessian)
    std::vector<double> ric_nn;         // Ric(nu, nu)
    std::vector<char> near_critical;    // |Du| < delta_crit
    double max_norm_du = 0.0;
    double delta_crit = 0.0;
};

class MeridianField {
public:
    MeridianField(std::shared_ptr<const MeridianGrid> grid, std::vector<double> u,
                  Convergence conv);

    const MeridianGrid& grid() const { return *grid_; }
    std::shared_ptr<const MeridianGrid> grid_ptr() const { return grid_; }
    const std::vector<double>& values() const { return u_; }
    const Convergence& convergence() const { return conv_; }
    const NodalFields& fields() const { return fields_; }

    double u_at(int i, int j) const { return u_[grid_->node(i, j)]; }

    // bilinear interpolation in logical coordinates
    double value(double r, double theta) const;
    struct Gradient {
        double du_r;
        double du_theta; // physical covariant theta-derivative du/dtheta
        double norm;     // |Du|_g
    };
    Gradient gradient(double r, double theta) const;

    // interpolate any nodal field at (r, theta)
    double field_at(const std::vector<double>& f, double r, double theta) const;

    // value range of u away from the boundary
    double min_u() const;

private:
    void build_fields();

    std::shared_ptr<const MeridianGrid> grid_;
    std::vector<double> u_;
    Convergence conv_;
    NodalFields fields_;
};

MeridianField solve(const WarpedProfile& profile, double p, const DomainSpec& domain,
                    const GridParams& grid_params = {},
                    const SolverParams& solver_params = {});

// Dirichlet p-energy \int |Du|^p dmu over the computational annulus
// (normalised capacity via the usual constant).
struct FieldCapacity {
    double cap_energy;    // \int |Du|^p
    double cap_boundary;  // \int_{dOmega} |Du|^{p-1}
    double c_p;           // normalised, from the boundary form
};
FieldCapacity field_capacity(const MeridianField& field);

// sup_{annulus} (|Du|/u) * r over dyadic annuli; bounded for valid profiles.
struct ChengYauReport {
    std::vector<double> annulus_r;
    std::vector<double> sup_product;
    double overall_max;
};
ChengYauReport cheng_yau_check(const MeridianField& field);

// binary field cache (little-endian doubles; header with grid metadata)
void save_field(const MeridianField& field, const std::string& path);
std::unique_ptr<MeridianField> load_field(const std::string& path);

} // namespace pcaplab
