#pragma once

#include <Eigen/Dense>

#include <complex>
#include <string>
#include <utility>
#include <vector>

namespace ohtlab {

using cplx = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr int kMaxHermiteIndex = 200;
inline constexpr int kMaxTruncation = 120;

/// Evenly spaced points from lo to hi inclusive.
VectorXd linspace(double lo, double hi, int n);

/// Truncated Fock-basis density matrix, element (n,m) = <n|rho|m>.
struct DensityMatrix {
    MatrixXcd elements;
    bool normalized = true;

    DensityMatrix() = default;
    explicit DensityMatrix(MatrixXcd m, bool norm = true) : elements(std::move(m)), normalized(norm) {}

    int dim() const { return static_cast<int>(elements.rows()); }
    double trace() const { return elements.trace().real(); }
    double purity() const;
    /// Largest |rho - rho^dagger| entry.
    double hermiticity_error() const;
    double min_eigenvalue() const;
    /// Expectation of the number operator.
    double mean_photon() const;
};

struct GridSpec {
    double q_min = -6.0, q_max = 6.0;
    int n_q = 201;
    double p_min = -6.0, p_max = 6.0;
    int n_p = 201;

    VectorXd q_axis() const { return linspace(q_min, q_max, n_q); }
    VectorXd p_axis() const { return linspace(p_min, p_max, n_p); }
};

/// Real phase-space function; values(i, j) is at (q_axis[i], p_axis[j]).
struct WignerGrid {
    VectorXd q_axis, p_axis;
    MatrixXd values;

    double dq() const { return q_axis.size() > 1 ? q_axis[1] - q_axis[0] : 1.0; }
    double dp() const { return p_axis.size() > 1 ? p_axis[1] - p_axis[0] : 1.0; }
    /// Riemann sum of the values.
    double integral() const { return values.sum() * dq() * dp(); }
    /// Value at (q, p) by bilinear interpolation; zero outside the grid.
    double at(double q, double p) const;
};

struct WavefunctionSamples {
    VectorXd q_axis;
    VectorXcd amplitude;
    double purity = 0.0;
};

enum class StateKind { vacuum, fock, coherent, thermal, squeezed_vacuum, squeezed_coherent };

struct StateSpec {
    StateKind kind = StateKind::vacuum;
    int n = 0;          // fock
    cplx alpha{0, 0};   // coherent, squeezed_coherent
    double nbar = 0.0;  // thermal
    double r = 0.0;     // squeeze magnitude
    double phi = 0.0;   // squeeze angle
    int truncation_dim = 20;

    static StateSpec vacuum();
    static StateSpec fock(int n);
    static StateSpec coherent(cplx alpha);
    static StateSpec thermal(double nbar);
    static StateSpec squeezed_vacuum(double r, double phi);
    static StateSpec squeezed_coherent(double r, double phi, cplx alpha);

    bool is_pure() const { return kind != StateKind::thermal; }
    std::string name() const;
};

StateKind state_kind_from_name(const std::string& name);

/// psi_n(q) for every q. Throws ConfigError for n > kMaxHermiteIndex.
VectorXd hermite_psi(int n, const VectorXd& q_axis);

/// Rows 0..n_max of psi_n evaluated on q_axis.
MatrixXd hermite_table(int n_max, const VectorXd& q_axis);

/// psi_0..psi_{n_max} at a single point, written to out[0..n_max].
void hermite_psi_point(int n_max, double q, double* out);

/// Fock amplitudes of a pure state truncated to `dim` levels (not renormalized).
VectorXcd state_amplitudes(const StateSpec& spec, int dim);

/// Exact truncated representation. Grows the truncation from spec.truncation_dim
/// up to kMaxTruncation until the discarded weight is <= 1e-6, then renormalizes.
DensityMatrix make_state(const StateSpec& spec);

/// Weight lost by truncating the state at `dim` levels.
double truncation_leak(const StateSpec& spec, int dim);

VectorXd quadrature_pdf(const DensityMatrix& rho, double theta, const VectorXd& q_axis);

/// Closed-form phase-space kernel W_nm(q,p) of |n><m|.
cplx wigner_kernel(int n, int m, double q, double p);

/// Same kernel by direct numerical Fourier integration (reference path).
cplx wigner_kernel_fourier(int n, int m, double q, double p);

WignerGrid wigner_from_rho(const DensityMatrix& rho, const GridSpec& grid = {});

struct RhoFromWigner {
    DensityMatrix rho;
    bool coarse_grid = false;  // |trace - 1| > 0.05
};

RhoFromWigner rho_from_wigner(const WignerGrid& w, int dim);

/// Husimi function as a density over (q, p): integrates to one with dq dp.
WignerGrid q_function(const DensityMatrix& rho, const GridSpec& grid = {});

std::pair<double, double> rotate_quadrature(double q, double p, double theta);

/// Reconstructs psi(q) from a nearly pure rho using the column at q_ref.
WavefunctionSamples wavefunction_from_rho(const DensityMatrix& rho, const VectorXd& q_axis,
                                          double q_ref = 0.0, double purity_gate = 0.99);

/// Mean and variance of q_theta from the truncated ladder operators.
std::pair<double, double> quadrature_mean_var(const DensityMatrix& rho, double theta);

} // namespace ohtlab
