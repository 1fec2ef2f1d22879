#pragma once

#include "ohtlab/fock.hpp"
#include "ohtlab/parallel.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ohtlab {

struct DetectorModel {
    double eta_q = 1.0;              // quantum efficiency per photodiode
    double eta_ls = 1.0;             // LO/signal mode overlap
    double lo_mean_photons = 1e6;    // |alpha_L|^2 per pulse
    double sigma_e = 0.0;            // electronic noise rms, photoelectrons per channel
    double gain = 1e6;               // photoelectrons per volt
    double balance_imbalance = 0.0;  // splitter transmits (1 + x)/2 to diode 1

    double eta_eff() const { return eta_q * eta_ls; }
    /// Throws ConfigError on invalid values; returns non-fatal warnings.
    std::vector<std::string> validate() const;
};

enum class ScheduleKind { grid, uniform_random, swept_linear };

struct PhaseSchedule {
    ScheduleKind kind = ScheduleKind::uniform_random;
    int d = 1;             // grid: number of phases
    double span = 2 * kPi; // grid: phases at span * k / d

    static PhaseSchedule grid(int d, double span = 2 * kPi);
    static PhaseSchedule uniform_random();
    static PhaseSchedule swept_linear();

    std::string name() const;
    /// Phase of pulse k out of n; random schedules draw from `eng`.
    double phase(std::size_t k, std::size_t n, Engine& eng) const;
};

ScheduleKind schedule_kind_from_name(const std::string& name);

struct DatasetMeta {
    std::string format = "ohtlab-quad-v1";
    DetectorModel det;
    PhaseSchedule schedule;
    std::uint64_t seed = 0;
    std::optional<StateSpec> source;
    // Two-mode (dual LO) records.
    bool dual = false;
    double alpha = 0.0;
    std::string zeta_schedule;
};

struct QuadratureDataset {
    VectorXd theta, q;
    VectorXd zeta;  // dual-mode datasets only
    DatasetMeta meta;

    std::size_t size() const { return static_cast<std::size_t>(q.size()); }
};

/// Inverse-CDF sampler for Pr(q, theta) of a fixed density matrix. The CDF is
/// tabulated per phase-band so any theta costs O(dim) per bisection step.
class QuadratureSampler {
public:
    explicit QuadratureSampler(const DensityMatrix& rho, double q_lo = -8.0, double q_hi = 8.0,
                               int n_points = 4096);
    /// Quadrature value whose CDF at theta equals u in [0, 1).
    double sample(double theta, double u) const;
    double cdf_at_index(int j, const VectorXcd& phases) const;

private:
    int dim_, n_;
    double q_lo_, dq_;
    MatrixXcd cum_;  // (dim, n): cumulative band functions
};

/// Standard deviation of the detection plus electronic noise in quadrature units.
double quadrature_noise_sigma(const DetectorModel& det);

QuadratureDataset sample_quadratures(const DensityMatrix& rho, const PhaseSchedule& sched, const DetectorModel& det,
                                     std::size_t n_samples, std::uint64_t seed,
                                     const std::optional<StateSpec>& source = std::nullopt);

struct DiodeCounts {
    long long n1 = 0, n2 = 0;
    long long difference() const { return n1 - n2; }
};

/// Photoelectron numbers at the two diodes for a classical signal quadrature q_ideal.
DiodeCounts detector_counts(double q_ideal, double theta, const DetectorModel& det, Engine& eng);

/// n_- / (sqrt(2) eta_eff |alpha_L|).
double scaled_difference(const DiodeCounts& c, const DetectorModel& det);

/// Discrete law over consecutive integers starting at n_min.
struct DifferencePdf {
    long long n_min = 0;
    VectorXd p;
    double mu1 = 0, mu2 = 0;

    double prob(long long n) const;
    double mean() const;
    double variance() const;
};

/// Difference of independent Poisson counts with means mu1, mu2.
DifferencePdf skellam_pdf(double mu1, double mu2);

/// Exact difference-count law for a coherent signal (vacuum allowed).
DifferencePdf skellam_difference_pdf(cplx signal_alpha, double theta, const DetectorModel& det);
DifferencePdf skellam_difference_pdf(const StateSpec& signal, double theta, const DetectorModel& det);

/// Total-variation distance to the Gaussian with the same mean and variance.
double gaussian_total_variation(const DifferencePdf& pdf);

/// |sum conj(v) w delta| for modes normalized with sum |.|^2 delta = 1.
double mode_overlap(const VectorXcd& lo_mode, const VectorXcd& sig_mode, double delta);

struct CalibrationPoint {
    double lo_photons;
    double mean_v_plus;
    double var_v_minus;
    double var_stderr;
};

struct CalibrationResult {
    double gain = 0, gain_stderr = 0;
    double sigma_e = 0, sigma_e_stderr = 0;
    double slope = 0, slope_stderr = 0;
    double intercept = 0, intercept_stderr = 0;
    double reduced_chi2 = 0;
    bool nonlinear = false;
    std::vector<CalibrationPoint> table;
};

CalibrationResult calibration_curve(const DetectorModel& det, const std::vector<double>& lo_levels,
                                    std::size_t pulses_per_level, std::uint64_t seed);

/// Bound on |alpha - beta| / alpha after the swap procedure.
double gain_balancing_sim(double n_tot, double n_diff1, double n_diff2);

struct BalancingRun {
    double mismatch = 0;  // |1 - beta/alpha| at termination
    double bound = 0;
    int iterations = 0;
    bool converged = false;
};

/// Iterates gain adjustment, input swap and splitter adjustment until both
/// configurations null within n_diff1 and n_diff2 electrons.
BalancingRun gain_balancing_monte_carlo(double n_tot, double n_diff1, double n_diff2, double beta_over_alpha,
                                        std::uint64_t seed, int max_iterations = 10000);

} // namespace ohtlab
