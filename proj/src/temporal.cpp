#include "ohtlab/temporal.hpp"

#include "ohtlab/errors.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <sstream>

namespace ohtlab {

namespace {

std::mutex g_plan_mutex;  // FFTW planning is not thread-safe

// Unnormalized DFT, sign -1 (forward) or +1 (backward).
VectorXcd dft(const VectorXcd& x, int sign)
{
    const int n = static_cast<int>(x.size());
    VectorXcd out(n);
    auto* in = reinterpret_cast<fftw_complex*>(const_cast<cplx*>(x.data()));
    auto* o = reinterpret_cast<fftw_complex*>(out.data());
    fftw_plan p;
    {
        std::lock_guard<std::mutex> lock(g_plan_mutex);
        p = fftw_plan_dft_1d(n, in, o, sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_PRESERVE_INPUT);
    }
    fftw_execute(p);
    {
        std::lock_guard<std::mutex> lock(g_plan_mutex);
        fftw_destroy_plan(p);
    }
    return out;
}

bool in_band(double w, double nu, double bandwidth)
{
    return std::abs(w - nu) <= bandwidth / 2 * (1 + 1e-12);
}

constexpr double kSincLobes = 40.0;  // total gate length in main-lobe widths
constexpr double kExpTail = 40.0;    // exponential gate cut at 40 / gamma

} // namespace

VectorXd TemporalSignal::t_axis() const
{
    VectorXd t(phi.size());
    for (Eigen::Index n = 0; n < phi.size(); ++n)
        t[n] = t0 + n * dt;
    return t;
}

VectorXd TemporalSignal::omega_axis() const
{
    const Eigen::Index n = phi.size();
    VectorXd w(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index kk = k < (n + 1) / 2 ? k : k - n;
        w[k] = 2 * kPi * kk / (n * dt);
    }
    return w;
}

VectorXcd TemporalSignal::spectrum() const
{
    const VectorXd w = omega_axis();
    VectorXcd f = dft(phi, +1);
    for (Eigen::Index k = 0; k < f.size(); ++k)
        f[k] *= dt * std::polar(1.0, w[k] * t0);
    return f;
}

TemporalSignal TemporalSignal::from_function(double t0, double dt, int n, const std::function<cplx(double)>& f)
{
    if (n < 2 || !(dt > 0.0))
        throw ConfigError("time grid needs n >= 2 and dt > 0");
    TemporalSignal s;
    s.t0 = t0;
    s.dt = dt;
    s.phi.resize(n);
    for (int i = 0; i < n; ++i)
        s.phi[i] = f(t0 + i * dt);
    return s;
}

TemporalSignal TemporalSignal::from_spectrum(double t0, double dt, int n, double nu, double bandwidth,
                                             const std::function<cplx(double)>& spec)
{
    if (n < 2 || !(dt > 0.0))
        throw ConfigError("time grid needs n >= 2 and dt > 0");
    if (!(bandwidth > 0.0))
        throw ConfigError("bandwidth must be positive");
    TemporalSignal s;
    s.t0 = t0;
    s.dt = dt;
    s.nu = nu;
    s.bandwidth = bandwidth;
    s.bandlimited = true;
    s.phi = VectorXcd::Zero(n);
    const VectorXd w = s.omega_axis();
    VectorXcd f(n);
    for (int k = 0; k < n; ++k)
        f[k] = in_band(w[k], nu, bandwidth) ? spec(w[k]) * std::polar(1.0, -w[k] * t0) : cplx(0.0);
    s.phi = dft(f, -1) / (n * dt);
    return s;
}

TemporalSignal TemporalSignal::chirped_pulse(double t0, double dt, int n, double nu, double band, double pulse_bw,
                                             double chirp, double t_c)
{
    if (!(pulse_bw > 0.0) || pulse_bw > band)
        throw ConfigError("pulse bandwidth must lie in (0, B]");
    auto spec = [=](double w) {
        const double x = w - nu;
        if (std::abs(x) >= pulse_bw / 2)
            return cplx(0.0);
        const double a = std::pow(std::cos(kPi * x / pulse_bw), 2);
        return std::polar(a, 0.5 * chirp * x * x + w * t_c);
    };
    return from_spectrum(t0, dt, n, nu, band, spec);
}

double out_of_band_amplitude(const TemporalSignal& s, double nu, double bandwidth)
{
    const VectorXcd f = s.spectrum();
    const VectorXd w = s.omega_axis();
    double in = 0.0, out = 0.0;
    for (Eigen::Index k = 0; k < f.size(); ++k) {
        const double a = std::abs(f[k]);
        in = std::max(in, a);
        if (!in_band(w[k], nu, bandwidth))
            out = std::max(out, a);
    }
    return in > 0.0 ? out / in : 0.0;
}

double out_of_band_energy(const TemporalSignal& s, double nu, double bandwidth)
{
    const VectorXcd f = s.spectrum();
    const VectorXd w = s.omega_axis();
    double tot = 0.0, out = 0.0;
    for (Eigen::Index k = 0; k < f.size(); ++k) {
        const double e = std::norm(f[k]);
        tot += e;
        if (!in_band(w[k], nu, bandwidth))
            out += e;
    }
    return tot > 0.0 ? out / tot : 0.0;
}

GateFunction GateFunction::gaussian(double width, double omega_l)
{
    GateFunction g;
    g.kind = Kind::gaussian;
    g.width = width;
    g.omega_l = omega_l;
    g.init();
    return g;
}

GateFunction GateFunction::sinc_bandlimited(double bandwidth, double omega_l)
{
    GateFunction g;
    g.kind = Kind::sinc_bandlimited;
    g.bandwidth = bandwidth;
    g.omega_l = omega_l;
    g.init();
    return g;
}

GateFunction GateFunction::one_sided_exponential(double gamma, double omega_l)
{
    GateFunction g;
    g.kind = Kind::one_sided_exponential;
    g.gamma = gamma;
    g.omega_l = omega_l;
    g.init();
    return g;
}

void GateFunction::validate() const
{
    switch (kind) {
    case Kind::gaussian:
        if (!(width > 0.0))
            throw ConfigError("gaussian gate width must be positive");
        break;
    case Kind::sinc_bandlimited:
        if (!(bandwidth > 0.0))
            throw ConfigError("sinc gate bandwidth must be positive");
        break;
    case Kind::one_sided_exponential:
        if (!(gamma > 0.0))
            throw ConfigError("exponential gate rate must be positive");
        break;
    }
}

double GateFunction::support() const
{
    switch (kind) {
    case Kind::gaussian:
        return 12.0 * width;
    case Kind::sinc_bandlimited:
        return kSincLobes / 2 * 4 * kPi / bandwidth;
    case Kind::one_sided_exponential:
        return kExpTail / gamma;
    }
    return 0.0;
}

namespace {

double raw_envelope(const GateFunction& g, double t)
{
    switch (g.kind) {
    case GateFunction::Kind::gaussian:
        return std::exp(-t * t / (4 * g.width * g.width));
    case GateFunction::Kind::sinc_bandlimited: {
        const double half = g.support();
        const double a = std::abs(t);
        if (a >= half)
            return 0.0;
        const double core = a < 1e-12 ? g.bandwidth / 2 : std::sin(g.bandwidth * t / 2) / t;
        // raised-cosine taper over the outer half
        const double w = a <= half / 2 ? 1.0 : 0.5 * (1 + std::cos(kPi * (a - half / 2) / (half / 2)));
        return core * w;
    }
    case GateFunction::Kind::one_sided_exponential:
        // decays into the past from the gate time
        return t > 0.0 || t < -g.support() ? 0.0 : std::exp(g.gamma * t);
    }
    return 0.0;
}

} // namespace

void GateFunction::init()
{
    validate();
    switch (kind) {
    case Kind::gaussian:
        norm_ = std::pow(2 * kPi * width * width, -0.25);
        break;
    case Kind::one_sided_exponential:
        norm_ = std::sqrt(2 * gamma);
        break;
    case Kind::sinc_bandlimited: {
        // composite Simpson over the support, 64 intervals per lobe
        const double half = support();
        const int n = 2 * static_cast<int>(std::ceil(half * bandwidth / (2 * kPi) * 64));
        const double h = 2 * half / n;
        double s = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double v = raw_envelope(*this, -half + i * h);
            s += (i == 0 || i == n ? 1 : (i % 2 ? 4 : 2)) * v * v;
        }
        norm_ = 1.0 / std::sqrt(s * h / 3);
        break;
    }
    }
}

double GateFunction::envelope(double t) const
{
    return norm_ * raw_envelope(*this, t);
}

cplx GateFunction::value(double t) const
{
    return std::polar(envelope(t - delay), -omega_l * t);
}

namespace {

// Highest angular frequency (about the carrier) where the gate spectrum matters.
double gate_half_band(const GateFunction& g)
{
    switch (g.kind) {
    case GateFunction::Kind::gaussian:
        return 5.0 / g.width;
    case GateFunction::Kind::sinc_bandlimited:
        return 0.6 * g.bandwidth;
    case GateFunction::Kind::one_sided_exponential:
        return 8.0 * g.gamma;
    }
    return 0.0;
}

void check_sampling(const TemporalSignal& sig, const GateFunction& gate)
{
    const double nyq = kPi / sig.dt;
    std::ostringstream os;
    if (sig.dt * sig.bandwidth > 1.0 / 8) {
        os << "time step " << sig.dt << " gives fewer than 8 points per 1/B";
        throw AliasingError(os.str());
    }
    if (std::abs(sig.nu) + sig.bandwidth / 2 > nyq) {
        os << "signal band reaches beyond the Nyquist frequency " << nyq;
        throw AliasingError(os.str());
    }
    if (std::abs(gate.omega_l) + gate_half_band(gate) > nyq) {
        os << "gate spectrum reaches beyond the Nyquist frequency " << nyq;
        throw AliasingError(os.str());
    }
    if (2 * gate.support() > sig.period())
        throw ConfigError("gate is longer than the periodic signal window");
}

std::vector<Eigen::Index> tau_indices(const TemporalSignal& sig, const VectorXd& tau)
{
    const Eigen::Index n = sig.phi.size();
    std::vector<Eigen::Index> idx(tau.size());
    for (Eigen::Index i = 0; i < tau.size(); ++i) {
        const double m = (tau[i] - sig.t0) / sig.dt;
        const double r = std::round(m);
        if (std::abs(m - r) > 1e-6)
            throw ConfigError("tau values must lie on the signal time grid");
        idx[i] = ((static_cast<Eigen::Index>(r) % n) + n) % n;
    }
    return idx;
}

// Gate samples at offsets j dt, wrapped to [-N/2, N/2).
VectorXcd wrapped_gate(const GateFunction& gate, Eigen::Index n, double dt)
{
    VectorXcd g(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::Index jj = j < (n + 1) / 2 ? j : j - n;
        g[j] = gate.value(jj * dt);
    }
    return g;
}

} // namespace

VectorXcd linear_optical_sampling(const TemporalSignal& sig, const GateFunction& gate, const VectorXd& tau,
                                  SamplingMethod method)
{
    if (sig.size() < 2)
        throw ConfigError("signal needs at least 2 samples");
    check_sampling(sig, gate);
    const Eigen::Index n = sig.phi.size();
    const auto idx = tau_indices(sig, tau);
    const VectorXcd g = wrapped_gate(gate, n, sig.dt);
    VectorXcd out(tau.size());
    if (method == SamplingMethod::direct) {
        for (Eigen::Index i = 0; i < tau.size(); ++i) {
            const Eigen::Index m = idx[i];
            cplx s = 0.0;
            for (Eigen::Index k = 0; k < n; ++k)
                s += std::conj(g[(k - m + n) % n]) * sig.phi[k];
            out[i] = sig.dt * s;
        }
        return out;
    }
    const VectorXcd a = dft(sig.phi, -1);
    const VectorXcd gk = dft(g, -1);
    const VectorXcd c = dft(VectorXcd(gk.conjugate().cwiseProduct(a)), +1) * (sig.dt / n);
    for (Eigen::Index i = 0; i < tau.size(); ++i)
        out[i] = c[idx[i]];
    return out;
}

VectorXcd bandlimited_exact_recovery(const TemporalSignal& sig, double bandwidth, double nu, const VectorXd& tau,
                                     bool require_bandlimited)
{
    if (!(bandwidth > 0.0))
        throw ConfigError("bandwidth must be positive");
    if (require_bandlimited) {
        const double leak = out_of_band_amplitude(sig, nu, bandwidth);
        if (leak > 1e-10) {
            std::ostringstream os;
            os << "signal is not band-limited to [nu - B/2, nu + B/2]: out-of-band amplitude " << leak;
            throw DataError(os.str());
        }
    }
    TemporalSignal s = sig;
    s.nu = nu;
    s.bandwidth = bandwidth;
    const GateFunction gate = GateFunction::sinc_bandlimited(bandwidth, nu);
    const VectorXcd raw = linear_optical_sampling(s, gate, tau);
    // gate spectrum at the band centre: the sum of its envelope
    const Eigen::Index n = sig.phi.size();
    double flat = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::Index jj = j < (n + 1) / 2 ? j : j - n;
        flat += gate.envelope(jj * sig.dt);
    }
    flat *= sig.dt;
    return raw / flat;
}

MatrixXd time_frequency_map(const std::vector<TemporalSignal>& ensemble, const GateFunction& gate,
                            const VectorXd& omega, const VectorXd& t_gate)
{
    if (ensemble.empty())
        throw ConfigError("ensemble is empty");
    if (gate.kind == GateFunction::Kind::sinc_bandlimited)
        throw ConfigError("time-frequency maps use gaussian or one-sided exponential gates");
    const TemporalSignal& ref = ensemble.front();
    for (const auto& s : ensemble)
        if (s.phi.size() != ref.phi.size() || s.dt != ref.dt || s.t0 != ref.t0)
            throw ConfigError("ensemble members must share one time grid");
    const VectorXd t = ref.t_axis();
    const Eigen::Index n = t.size();
    MatrixXcd e(omega.size(), n);
    for (Eigen::Index i = 0; i < omega.size(); ++i)
        for (Eigen::Index k = 0; k < n; ++k)
            e(i, k) = std::polar(ref.dt, omega[i] * t[k]);
    MatrixXd h(n, t_gate.size());
    for (Eigen::Index m = 0; m < t_gate.size(); ++m)
        for (Eigen::Index k = 0; k < n; ++k)
            h(k, m) = gate.envelope(t[k] - t_gate[m]);
    MatrixXd out = MatrixXd::Zero(omega.size(), t_gate.size());
    for (const auto& s : ensemble) {
        const MatrixXcd w = h.cast<cplx>().array().colwise() * s.phi.array();
        out += (e * w).cwiseAbs2();
    }
    return out / static_cast<double>(ensemble.size());
}

} // namespace ohtlab
