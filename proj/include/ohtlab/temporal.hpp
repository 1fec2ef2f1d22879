#pragma once

#include "ohtlab/fock.hpp"

#include <functional>
#include <vector>

namespace ohtlab {

/// Complex envelope on a uniform, periodic time grid. Spectra use
/// F(w) = int exp(i w t) f(t) dt, so exp(-i w0 t) sits at +w0.
struct TemporalSignal {
    double t0 = 0.0, dt = 0.1;
    VectorXcd phi;
    double nu = 0.0;         // band centre (angular)
    double bandwidth = 1.0;  // B (angular), nominal unless band-limited
    bool bandlimited = false;

    std::size_t size() const { return static_cast<std::size_t>(phi.size()); }
    double period() const { return static_cast<double>(phi.size()) * dt; }
    VectorXd t_axis() const;
    /// Angular frequencies of the DFT bins, in FFT order.
    VectorXd omega_axis() const;
    /// F(w_k) on omega_axis().
    VectorXcd spectrum() const;

    /// Samples f on the grid.
    static TemporalSignal from_function(double t0, double dt, int n, const std::function<cplx(double)>& f);
    /// Builds the signal from its spectrum; bins outside [nu - B/2, nu + B/2] are zeroed.
    static TemporalSignal from_spectrum(double t0, double dt, int n, double nu, double bandwidth,
                                        const std::function<cplx(double)>& spec);
    /// Band-limited pulse centred at t_c: cos^2 spectral amplitude of full width
    /// `pulse_bw` around nu, quadratic spectral phase `chirp` / 2 (w - nu)^2.
    static TemporalSignal chirped_pulse(double t0, double dt, int n, double nu, double band, double pulse_bw,
                                        double chirp, double t_c);
};

/// Largest out-of-band spectral amplitude relative to the largest overall.
double out_of_band_amplitude(const TemporalSignal& s, double nu, double bandwidth);
/// Fraction of spectral energy outside [nu - B/2, nu + B/2].
double out_of_band_energy(const TemporalSignal& s, double nu, double bandwidth);

struct GateFunction {
    enum class Kind { gaussian, sinc_bandlimited, one_sided_exponential };
    Kind kind = Kind::gaussian;
    double width = 1.0;      // gaussian: rms width of |h|^2
    double bandwidth = 1.0;  // sinc: flat spectral band B
    double gamma = 1.0;      // exponential decay rate
    double omega_l = 0.0;    // carrier
    double delay = 0.0;

    static GateFunction gaussian(double width, double omega_l = 0.0);
    static GateFunction sinc_bandlimited(double bandwidth, double omega_l = 0.0);
    static GateFunction one_sided_exponential(double gamma, double omega_l = 0.0);

    /// Real envelope h with unit L2 norm.
    double envelope(double t) const;
    /// f(t) = exp(-i omega_l t) h(t - delay).
    cplx value(double t) const;
    /// Half-length outside which the envelope is zero (or negligible).
    double support() const;
    void validate() const;

private:
    double norm_ = 0.0;
    void init();
};

enum class SamplingMethod { direct, spectral };

/// int f*(t - tau) phi(t) dt for tau on the signal grid, with the signal periodic.
VectorXcd linear_optical_sampling(const TemporalSignal& sig, const GateFunction& gate, const VectorXd& tau,
                                  SamplingMethod method = SamplingMethod::spectral);

/// Recovers phi(tau) with a tapered sinc gate flat over [nu - B/2, nu + B/2].
/// With `require_bandlimited` off, out-of-band input is processed anyway.
VectorXcd bandlimited_exact_recovery(const TemporalSignal& sig, double bandwidth, double nu, const VectorXd& tau,
                                     bool require_bandlimited = true);

/// Ensemble mean of |int exp(i w t) h(t - t_L) phi(t) dt|^2; rows follow omega.
MatrixXd time_frequency_map(const std::vector<TemporalSignal>& ensemble, const GateFunction& gate,
                            const VectorXd& omega, const VectorXd& t_gate);

} // namespace ohtlab
