#pragma once

#include "ohtlab/fock.hpp"
#include "ohtlab/homodyne.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ohtlab {

enum class FilterKernel { ram_lak, ram_lak_cosine };

struct RadonConfig {
    GridSpec grid;
    double k_cutoff = 4.0;  // band limit of the |xi| filter, inverse quadrature units
    int n_phase_bins = 64;
    FilterKernel kernel = FilterKernel::ram_lak_cosine;
    double rolloff_fraction = 0.2;  // cosine taper over the top of the band
    int n_hist_bins = 256;
    double hist_min = -8.0, hist_max = 8.0;
    std::size_t min_samples_per_bin = 100;

    void validate() const;
};

FilterKernel filter_kernel_from_name(const std::string& name);
std::string filter_kernel_name(FilterKernel k);

/// Filter taper A(xi) in [0, 1].
double filter_window(const RadonConfig& cfg, double xi);

/// Samples folded onto [0, pi) and assigned to phase bins centred at b*pi/n.
struct PhaseBinning {
    std::vector<std::vector<double>> q;  // per bin
    std::vector<double> mean_theta;      // per bin, may sit slightly below 0 for bin 0
    std::vector<std::size_t> counts;
};

PhaseBinning bin_by_phase(const VectorXd& theta, const VectorXd& q, int n_bins);

struct RadonResult {
    WignerGrid wigner;
    std::vector<std::size_t> bin_counts;
    std::vector<double> bin_theta;
    std::size_t out_of_range = 0;  // samples outside the histogram window
    bool low_count_warning = false;
};

RadonResult filtered_backprojection(const QuadratureDataset& ds, const RadonConfig& cfg);
RadonResult filtered_backprojection(const VectorXd& theta, const VectorXd& q, const RadonConfig& cfg);

/// Per-pixel std err from a bootstrap that resamples within each phase bin.
WignerGrid bootstrap_stderr(const QuadratureDataset& ds, const RadonConfig& cfg, int n_resamples,
                            std::uint64_t seed);

/// Gaussian smoothing with per-axis variance (1/eta - 1)/2, renormalized.
WignerGrid loss_smoothing(const WignerGrid& w, double eta);

/// Marginal of w along the axis rotated by theta, evaluated at x_axis.
VectorXd radon_forward(const WignerGrid& w, double theta, const VectorXd& x_axis);
VectorXd radon_forward(const WignerGrid& w, double theta);

} // namespace ohtlab
