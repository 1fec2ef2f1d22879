#pragma once

#include "ohtlab/fock.hpp"
#include "ohtlab/homodyne.hpp"
#include "ohtlab/moments.hpp"

#include <functional>
#include <string>
#include <vector>

namespace ohtlab {

/// Uniform 1D pixel row; 2D arrays are flattened by the caller.
struct PixelGrid {
    int n_pixels = 64;
    double pixel_area = 1.0;
    double x_min = -1.0, x_max = 1.0;  // pixel centres span this interval

    double array_area() const { return n_pixels * pixel_area; }
    VectorXd coordinates() const;
    void validate() const;
};

/// Real mode sampled at pixel centres with pixel_area * sum w^2 = 1.
struct ModeVector {
    VectorXd w;

    /// Samples f on the grid and normalizes.
    static ModeVector from_function(const PixelGrid& g, const std::function<double(double)>& f);
    static ModeVector uniform(const PixelGrid& g);
    /// Throws DataError unless pixel_area * sum w^2 = 1 within tol.
    void check_normalized(const PixelGrid& g, double tol = 1e-9) const;
};

/// A signal mode with a possibly complex profile (normalized like ModeVector).
struct SignalMode {
    VectorXcd profile;
    StateSpec state;

    SignalMode(const ModeVector& m, const StateSpec& s) : profile(m.w.cast<cplx>()), state(s) {}
    SignalMode(VectorXcd p, const StateSpec& s) : profile(std::move(p)), state(s) {}
};

struct ArrayMeta {
    std::string format = "ohtlab-array-v1";
    DetectorModel det;
    PixelGrid grid;
    PhaseSchedule schedule;
    std::uint64_t seed = 0;
    std::string signal_description;
    std::string noise_model;  // "poisson" or "gaussian"
    std::vector<std::string> warnings;
};

struct ArrayFrameSet {
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> frames;  // pulse x pixel
    VectorXd theta;
    VectorXd vacuum_offsets;
    ArrayMeta meta;

    std::size_t size() const { return static_cast<std::size_t>(frames.rows()); }
    VectorXd corrected(std::size_t pulse) const;
};

struct ArrayOptions {
    double max_offset = 0.0;      // planted per-pixel imbalance, fraction of the pixel LO level (<= 0.01)
    std::size_t vacuum_pulses = 0; // blocked-signal run length, 0 means the same as the signal run
};

/// Per-pixel difference counts for a plane-wave LO. Phase-insensitive classical
/// states (vacuum, coherent, thermal) are drawn as field amplitudes with Poisson
/// counting at every pixel; other states need real orthonormal modes and use
/// pixel-mode quadratures with shot noise of the same variance.
ArrayFrameSet simulate_array_frames(const std::vector<SignalMode>& signal, const DetectorModel& det,
                                    const PixelGrid& grid, const PhaseSchedule& sched, std::size_t n,
                                    std::uint64_t seed, const ArrayOptions& opt = {});

/// Software-projected quadrature of mode w, in units where vacuum variance is 1/(2 eta_q).
QuadratureDataset project_mode_quadrature(const ArrayFrameSet& f, const ModeVector& w);
/// Complex overload: accepted only when the profile is real.
QuadratureDataset project_mode_quadrature(const ArrayFrameSet& f, const VectorXcd& w);

/// Phase-averaged <N_i N_j> of the corrected frames.
MatrixXd difference_correlation_matrix(const ArrayFrameSet& f);

struct OptimalMode {
    ModeVector mode;
    double eigenvalue = 0;
    double mean_photons = 0;  // detected-mode photon number
};

OptimalMode optimal_mode(const MatrixXd& m, const DetectorModel& det, const PixelGrid& grid);

/// Detected-mode photon number of w with a statistical error, via projection.
Estimate mode_photon_number(const ArrayFrameSet& f, const ModeVector& w);

// Unbalanced spectral detection

struct SpectralSignal {
    int k = 1;  // temporal mode index in (J, M]
    StateSpec state;
};

struct SpectralOptions {
    int window = 32;                // M
    std::vector<cplx> lo{cplx(1000.0, 0.0)};  // beta_k for k = -J..J, size 2J + 1
    double eta = 1.0;
    bool common_random_phase = false;  // one random phase shared by all signal modes per pulse
};

struct SpectralRecords {
    int window = 32, lo_half_width = 0;
    std::vector<int> l_values;  // 2J < l <= M
    MatrixXcd k;                // pulse x l
    std::vector<cplx> lo;
    double eta = 1.0;
    std::string noise_model;    // "poisson" or "linearized"
    bool approximation_valid = true;
    std::vector<std::string> warnings;

    std::size_t size() const { return static_cast<std::size_t>(k.rows()); }
    int column(int l) const;  // throws ConfigError for l outside the record
    /// (q_l, p_l) per pulse from K_l / (eta beta_0^*), single-mode LO only.
    std::pair<VectorXd, VectorXd> scaled(int l) const;
};

SpectralRecords unbalanced_spectral_sim(const std::vector<SpectralSignal>& signal, const SpectralOptions& opt,
                                        std::size_t n, std::uint64_t seed);

struct Histogram2D {
    VectorXd x_axis, y_axis;  // bin centres
    MatrixXd values;          // density, unit mass; rows follow x
    double correlation = 0;   // Pearson coefficient of the raw pairs
    double var_x = 0, var_y = 0;

    double dx() const { return x_axis.size() > 1 ? x_axis[1] - x_axis[0] : 1.0; }
    double dy() const { return y_axis.size() > 1 ? y_axis[1] - y_axis[0] : 1.0; }
};

struct JointQ {
    Histogram2D single;  // Q(q_l, p_l)
    Histogram2D pair;    // Q'(q_l, q_l')
    std::vector<std::string> warnings;
};

JointQ joint_q_histogram(const SpectralRecords& rec, int l, int l_other, int bins = 64, double range = 8.0);

} // namespace ohtlab
