#pragma once

#include "ohtlab/fock.hpp"
#include "ohtlab/homodyne.hpp"

#include <vector>

namespace ohtlab {

inline constexpr int kMaxPatternDim = 30;

/// Dual functions M_mn(q) for a truncated Fock space of dimension dim.
struct PatternFunctionTable {
    int dim = 0;
    double basis_exponent = 1.0;  // weight (2v+1)^L on the non-orthogonal basis
    VectorXd q_axis;              // uniform
    std::vector<VectorXd> values;  // element index(m, n) for m >= n
    std::vector<double> band_condition;  // Gram condition number per band

    static int index(int m, int n, int dim);
    const VectorXd& at(int m, int n) const { return values[index(m, n, dim)]; }
    /// Linear interpolation of M_mn at q; zero outside the table.
    double eval(int m, int n, double q) const;
};

/// Builds the table by Gram inversion per band. q_axis must be uniform, have an
/// odd number of points and cover at least [-8, 8].
PatternFunctionTable build_pattern_functions(int dim, const VectorXd& q_axis, double basis_exponent = 1.0);
PatternFunctionTable build_pattern_functions(int dim, double basis_exponent = 1.0);

/// Composite Simpson weights for a uniform axis with an odd number of points.
VectorXd simpson_weights(const VectorXd& axis);

struct RhoEstimate {
    DensityMatrix rho;
    MatrixXcd errors;  // std err of real and imaginary parts, same shape as rho
    int phases_used = 0;
};

/// Discrete-phase estimator: samples are folded onto [0, pi) and assigned to d
/// equally spaced phases there. d = 0 uses every sample's own phase with equal
/// weight (continuous-phase data). Elements up to n_max (default pf.dim - 1) are
/// estimated; the top few bands of a table have inflated variance, so build the
/// table a few levels above n_max.
RhoEstimate rho_from_quadratures(const QuadratureDataset& ds, const PatternFunctionTable& pf, int d_phases,
                                 int n_max = -1);
RhoEstimate rho_from_quadratures(const VectorXd& theta, const VectorXd& q, const PatternFunctionTable& pf,
                                 int d_phases, int n_max = -1);

struct PhotonNumberEstimate {
    VectorXd p, std_err;
    double bound = 0.0;  // 2/sqrt(N), the a priori limit for |M_nn| <= 2
};

PhotonNumberEstimate pn_phase_averaged(const QuadratureDataset& ds, const PatternFunctionTable& pf);

/// Count of distinct phases after folding onto [0, pi), to within tol.
int folded_phase_count(const VectorXd& theta, double tol = 1e-9);

} // namespace ohtlab
