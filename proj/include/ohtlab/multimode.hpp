#pragma once

#include "ohtlab/fock.hpp"
#include "ohtlab/homodyne.hpp"
#include "ohtlab/moments.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace ohtlab {

inline constexpr int kMaxJointDim = 10;  // per mode

using Matrix2cd = Eigen::Matrix2cd;

/// Photon-number law for synthesized two-mode sources. Pulses carry a planted
/// pair (n1, n2) and diagonal (phase-random) coherence.
struct NumberLaw {
    enum class Statistics { thermal, poisson };
    enum class Coupling {
        correlated,  // with probability `correlation` n2 = n1, otherwise independent draws
        switching,   // each pulse only one mode emits, at twice its mean
        split,       // one source of mean nbar1 + nbar2 divided on a 50/50 splitter
    };
    Statistics stats = Statistics::thermal;
    Coupling coupling = Coupling::correlated;
    double nbar1 = 1.0, nbar2 = 1.0;
    double correlation = 0.0;

    void validate() const;
};

struct NumberLawMoments {
    double n1 = 0, n2 = 0, n1n2 = 0;
    double n1_fact2 = 0, n2_fact2 = 0;  // <n(n-1)>

    double g12() const { return n1n2 / (n1 * n2); }
};

/// Exact moments of a planted law.
NumberLawMoments number_law_moments(const NumberLaw& law);

enum class PolarizationBasis { hv, diagonal, circular };

std::string polarization_basis_name(PolarizationBasis b);

/// Either a joint density matrix on D1 x D2 (index n1 * D2 + n2) or a planted
/// number law. `basis` names the polarization modes the state is written in.
struct TwoModeState {
    enum class Kind { joint_fock, planted };
    Kind kind = Kind::planted;
    int d1 = 0, d2 = 0;
    MatrixXcd rho;
    NumberLaw law;
    PolarizationBasis basis = PolarizationBasis::hv;

    static TwoModeState joint(MatrixXcd rho, int d1, int d2);
    static TwoModeState product(const DensityMatrix& a, const DensityMatrix& b);
    static TwoModeState planted(const NumberLaw& law);
    /// A single mode sent through a 50/50 splitter with vacuum in the other port.
    static TwoModeState split(const DensityMatrix& a);

    void validate() const;
    DensityMatrix reduced(int mode) const;  // joint_fock only, mode 1 or 2
};

/// Dual-LO superposition cos(alpha) v1 + exp(-i zeta) sin(alpha) v2 at common phase theta.
struct LOSuperposition {
    double alpha = 0.0;
    double theta = 0.0;
    double zeta = 0.0;
    bool random_theta = true;
    bool random_zeta = true;

    void validate() const;
    /// Coefficients of the detected mode operator in terms of (a1, a2).
    Eigen::RowVector2cd mode_row() const;
};

/// SU(2) map (a1, a2) -> (a3, a4) for rotation angle gamma and phase zeta.
Matrix2cd grips_transform(double gamma, double zeta);

/// Mode operators of basis b in terms of (aH, aV).
Matrix2cd polarization_basis_matrix(PolarizationBasis b);

/// Applies U with U^dagger a_i U = sum_j M_ij a_j to a joint state. Output
/// dimensions are d1 + d2 - 1 per mode so nothing is truncated.
MatrixXcd transform_joint(const MatrixXcd& rho, int d1, int d2, const Matrix2cd& m, int& out_dim);

/// Reduced state of a3 after the GRIPS map, for single-LO sampling.
DensityMatrix grips_mode_state(const TwoModeState& st, double gamma, double zeta);

/// Per-pulse ground truth kept alongside a dual-LO dataset.
struct JointRecord {
    VectorXd q1, q2;  // ideal mode quadratures entering Q (no detection noise)
    std::vector<int> n1, n2;  // planted numbers, planted sources only
};

/// Q = cos(a) q1(theta) + sin(a) q2(theta - zeta) per pulse, plus detection noise.
/// `measure` maps the state's modes to the two measured modes (e.g. a waveplate).
QuadratureDataset combined_quadrature_samples(const TwoModeState& st, const LOSuperposition& lo,
                                              const DetectorModel& det, std::size_t n, std::uint64_t seed,
                                              JointRecord* record = nullptr,
                                              const Matrix2cd& measure = Matrix2cd::Identity());

struct ThreeAlphaRuns {
    QuadratureDataset mode1;     // alpha = 0
    QuadratureDataset combined;  // alpha = pi/4
    QuadratureDataset mode2;     // alpha = pi/2
};

ThreeAlphaRuns simulate_three_alpha(const TwoModeState& st, const DetectorModel& det, std::size_t n_per_run,
                                    std::uint64_t seed, const Matrix2cd& measure = Matrix2cd::Identity());

struct TwoTimeResult {
    Estimate g12;
    Estimate cross_q2q2;  // phase-averaged <q1^2 q2^2>
    Estimate n1, n2, n1n2;
};

TwoTimeResult two_time_g2(const ThreeAlphaRuns& runs);

struct PolarizationRow {
    PolarizationBasis basis;
    Estimate n1, n2;
    Estimate g11, g22, g12;
    bool g11_valid = false, g22_valid = false;
};

/// One row per basis; throws ConfigError unless all three bases are present.
std::vector<PolarizationRow> polarization_g2(const std::map<PolarizationBasis, ThreeAlphaRuns>& runs);

/// Three-alpha runs in every basis, with the waveplate map applied to the LO.
std::map<PolarizationBasis, ThreeAlphaRuns> simulate_polarization_runs(const TwoModeState& st,
                                                                       const DetectorModel& det,
                                                                       std::size_t n_per_run, std::uint64_t seed);

struct StokesOperators {
    MatrixXcd j1, j2, j3;
};

StokesOperators stokes_operators(int d);

struct StokesMoments {
    Eigen::Vector3d means;
    Eigen::Matrix3d second;  // <J_i J_j + J_j J_i> / 2
};

StokesMoments stokes_moments(const TwoModeState& st);

} // namespace ohtlab
