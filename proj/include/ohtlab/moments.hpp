#pragma once

#include "ohtlab/fock.hpp"
#include "ohtlab/homodyne.hpp"

#include <string>
#include <vector>

namespace ohtlab {

struct Estimate {
    double value = 0.0;
    double std_err = 0.0;
};

struct MomentReport {
    Estimate mean_n;
    double mean_n_err_bound = 0.0;  // sqrt(<<q^4>>/N), an a priori variance bound
    std::vector<Estimate> factorial_moments;  // r = 1..4
    Estimate g2;
    bool g2_valid = false;
    std::size_t n_samples = 0;
    double eta = 1.0;
    bool detected_mode = false;  // eta < 1: moments refer to the detected mode, no loss correction
    std::vector<std::string> notes;
};

/// Phase-averaged <n> = <<q^2>> - 1/2. Quadratures are scaled by sqrt(eta_eff)
/// first, so lossy data give the detected-mode mean.
Estimate mean_photon(const QuadratureDataset& ds);

/// <n^(r)> for r = 1..4 from physicists' Hermite polynomials H_2r.
Estimate factorial_moment(const QuadratureDataset& ds, int r);

/// Normalized number-squared correlation with delete-1 jackknife error.
Estimate g2_single(const QuadratureDataset& ds);

/// Everything above plus diagnostics; never throws on a near-vacuum g2.
MomentReport moment_report(const QuadratureDataset& ds);

/// Measurements needed to resolve <n> from its own shot noise.
double n_min(double mean_n, double mean_n2);

/// Physicists' Hermite polynomials H_0..H_n at x.
void hermite_h(int n, double x, double* out);

struct PhaseDistribution {
    VectorXd phi_axis;  // uniform over [-pi, pi)
    VectorXd values;
    int s = 0;
    double captured_weight = 1.0;  // sum of rho_nn for n <= s; values are renormalized by it
};

PhaseDistribution phase_distribution(const DensityMatrix& rho, int s, int n_phi = 256);

struct NumberPhaseStats {
    double delta_n = 0, delta_phi = 0, product = 0, commutator_half = 0;
};

/// Pegg-Barnett phase operator on the (s+1)-level truncation with phase states
/// at phi0 + 2 pi k/(s+1).
NumberPhaseStats number_phase_stats(const DensityMatrix& rho, int s, double phi0 = -kPi);

} // namespace ohtlab
