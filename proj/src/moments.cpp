#include "ohtlab/moments.hpp"

#include "ohtlab/errors.hpp"
#include "ohtlab/pattern.hpp"

#include "ohtlab/parallel.hpp"

#include <array>
#include <cmath>
#include <sstream>

namespace ohtlab {

namespace {

// Phase averages of q^{2r} need the folded grid to resolve harmonics up to 2r.
void require_phase_coverage(const QuadratureDataset& ds, int r)
{
    if (ds.size() < 2)
        throw DataError("need at least 2 samples");
    if (ds.meta.schedule.kind != ScheduleKind::grid)
        return;
    const int distinct = folded_phase_count(ds.theta);
    if (distinct <= r) {
        std::ostringstream os;
        os << "dataset has " << distinct << " distinct phases over [0, pi); phase-averaged moments of order " << 2 * r
           << " need at least " << r + 1;
        throw DataError(os.str());
    }
}

double scale_of(const QuadratureDataset& ds)
{
    const double eta = ds.meta.det.eta_eff();
    return eta > 0.0 ? std::sqrt(eta) : 1.0;
}

double factorial(int n)
{
    double f = 1.0;
    for (int i = 2; i <= n; ++i)
        f *= i;
    return f;
}

constexpr std::size_t kReduceChunk = 16384;

// Chunked sums combined in chunk order, so results do not depend on threads.
template <std::size_t K, class F>
std::array<double, K> reduce(std::size_t n, F&& f)
{
    const std::size_t n_chunks = (n + kReduceChunk - 1) / kReduceChunk;
    std::vector<std::array<double, K>> part(n_chunks);
    parallel_chunks(n, kReduceChunk, [&](std::size_t b, std::size_t e, std::size_t c) {
        std::array<double, K> a{};
        for (std::size_t i = b; i < e; ++i)
            f(i, a);
        part[c] = a;
    });
    std::array<double, K> out{};
    for (const auto& a : part)
        for (std::size_t k = 0; k < K; ++k)
            out[k] += a[k];
    return out;
}

struct PowerSums {
    double s2 = 0, s4 = 0;
};

PowerSums power_sums(const QuadratureDataset& ds)
{
    const double c = scale_of(ds);
    const auto a = reduce<2>(ds.size(), [&](std::size_t i, std::array<double, 2>& acc) {
        const double x2 = c * c * ds.q[i] * ds.q[i];
        acc[0] += x2;
        acc[1] += x2 * x2;
    });
    PowerSums p;
    p.s2 = a[0];
    p.s4 = a[1];
    return p;
}

double g2_from(double m2, double m4)
{
    const double num = (2.0 / 3.0) * m4 - 2.0 * m2 + 0.5;
    const double den = m2 * m2 - m2 + 0.25;
    return num / den;
}

} // namespace

void hermite_h(int n, double x, double* out)
{
    out[0] = 1.0;
    if (n >= 1)
        out[1] = 2.0 * x;
    for (int k = 2; k <= n; ++k)
        out[k] = 2.0 * x * out[k - 1] - 2.0 * (k - 1) * out[k - 2];
}

Estimate mean_photon(const QuadratureDataset& ds)
{
    require_phase_coverage(ds, 1);
    const PowerSums p = power_sums(ds);
    const double n = static_cast<double>(ds.size());
    const double m2 = p.s2 / n;
    const double var = (p.s4 / n - m2 * m2) * n / (n - 1.0);
    return {m2 - 0.5, std::sqrt(std::max(var, 0.0) / n)};
}

Estimate factorial_moment(const QuadratureDataset& ds, int r)
{
    if (r < 1 || r > 4)
        throw ConfigError("factorial moments are supported for r = 1..4");
    require_phase_coverage(ds, r);
    const double c = scale_of(ds);
    const double coef = factorial(r) * factorial(r) / (std::pow(2.0, r) * factorial(2 * r));
    const auto a = reduce<2>(ds.size(), [&](std::size_t i, std::array<double, 2>& acc) {
        double h[9];
        hermite_h(2 * r, c * ds.q[i], h);
        const double v = coef * h[2 * r];
        acc[0] += v;
        acc[1] += v * v;
    });
    const double n = static_cast<double>(ds.size());
    const double mean = a[0] / n;
    const double var = (a[1] / n - mean * mean) * n / (n - 1.0);
    return {mean, std::sqrt(std::max(var, 0.0) / n)};
}

namespace {

Estimate g2_jackknife(const QuadratureDataset& ds, bool& valid, std::string& why)
{
    const PowerSums p = power_sums(ds);
    const double n = static_cast<double>(ds.size());
    const double m2 = p.s2 / n, m4 = p.s4 / n;
    const double var2 = (p.s4 / n - m2 * m2) * n / (n - 1.0);
    const double den = (m2 - 0.5) * (m2 - 0.5);
    const double den_err = 2.0 * std::abs(m2 - 0.5) * std::sqrt(std::max(var2, 0.0) / n);
    valid = den >= 5.0 * den_err && den > 0.0;
    if (!valid) {
        std::ostringstream os;
        os << "g2 denominator " << den << " is below 5 times its std err " << den_err << " (near-vacuum data)";
        why = os.str();
        return {};
    }
    const double g = g2_from(m2, m4);
    // delete-1 jackknife in one pass over the samples
    const double c = scale_of(ds);
    const auto a = reduce<2>(ds.size(), [&](std::size_t i, std::array<double, 2>& acc) {
        const double x2 = c * c * ds.q[i] * ds.q[i];
        const double gi = g2_from((p.s2 - x2) / (n - 1.0), (p.s4 - x2 * x2) / (n - 1.0)) - g;
        acc[0] += gi;
        acc[1] += gi * gi;
    });
    const double mean = a[0] / n;
    const double var = (n - 1.0) * std::max(a[1] / n - mean * mean, 0.0);
    return {g, std::sqrt(var)};
}

} // namespace

Estimate g2_single(const QuadratureDataset& ds)
{
    require_phase_coverage(ds, 2);
    bool valid = false;
    std::string why;
    const Estimate e = g2_jackknife(ds, valid, why);
    if (!valid)
        throw NumericalError(why);
    return e;
}

MomentReport moment_report(const QuadratureDataset& ds)
{
    MomentReport r;
    r.n_samples = ds.size();
    r.eta = ds.meta.det.eta_eff();
    r.detected_mode = r.eta < 1.0;
    r.mean_n = mean_photon(ds);
    const PowerSums p = power_sums(ds);
    const double n = static_cast<double>(ds.size());
    r.mean_n_err_bound = std::sqrt(p.s4 / n / n);
    const int top = std::min(4, std::max(1, folded_phase_count(ds.theta) - 1));
    const int r_max = ds.meta.schedule.kind == ScheduleKind::grid ? top : 4;
    for (int k = 1; k <= r_max; ++k)
        r.factorial_moments.push_back(factorial_moment(ds, k));
    if (r_max < 4)
        r.notes.push_back("phase grid too coarse for factorial moments beyond r = " + std::to_string(r_max));
    if (r_max >= 2) {
        std::string why;
        r.g2 = g2_jackknife(ds, r.g2_valid, why);
        if (!r.g2_valid)
            r.notes.push_back(why);
    }
    if (r.detected_mode)
        r.notes.push_back("eta_eff < 1: moments describe the detected mode (no loss correction)");
    if (ds.meta.det.sigma_e > 0.0)
        r.notes.push_back("electronic noise is not subtracted");
    return r;
}

double n_min(double mean_n, double mean_n2)
{
    if (!(mean_n > 0.0))
        throw ConfigError("n_min needs a positive mean photon number");
    return (3.0 * mean_n2 + mean_n + 0.5) / (2.0 * mean_n * mean_n);
}

PhaseDistribution phase_distribution(const DensityMatrix& rho, int s, int n_phi)
{
    if (s < 0 || s > rho.dim() - 1)
        throw ConfigError("phase truncation s must lie in [0, dim - 1]");
    if (n_phi < 2)
        throw ConfigError("phase grid needs at least 2 points");
    PhaseDistribution out;
    out.s = s;
    out.phi_axis.resize(n_phi);
    out.values.resize(n_phi);
    double w = 0.0;
    for (int k = 0; k <= s; ++k)
        w += rho.elements(k, k).real();
    out.captured_weight = w;
    if (!(w > 0.0))
        throw DataError("no weight in the truncated number space");
    for (int j = 0; j < n_phi; ++j) {
        const double phi = -kPi + 2 * kPi * j / n_phi;
        out.phi_axis[j] = phi;
        cplx sum = 0.0;
        for (int n = 0; n <= s; ++n)
            for (int m = 0; m <= s; ++m)
                sum += std::polar(1.0, (m - n) * phi) * rho.elements(n, m);
        out.values[j] = sum.real() / (2 * kPi * w);
    }
    return out;
}

NumberPhaseStats number_phase_stats(const DensityMatrix& rho, int s, double phi0)
{
    if (s < 0 || s > rho.dim() - 1)
        throw ConfigError("phase truncation s must lie in [0, dim - 1]");
    const int d = s + 1;
    MatrixXcd r = rho.elements.topLeftCorner(d, d);
    const double tr = r.trace().real();
    if (!(tr > 0.0))
        throw DataError("no weight in the truncated number space");
    r /= tr;
    // phase operator sum_k phi_k |phi_k><phi_k|
    MatrixXcd phase = MatrixXcd::Zero(d, d);
    for (int k = 0; k < d; ++k) {
        const double phk = phi0 + 2 * kPi * k / d;
        VectorXcd v(d);
        for (int n = 0; n < d; ++n)
            v[n] = std::polar(1.0 / std::sqrt(double(d)), n * phk);
        phase += phk * (v * v.adjoint());
    }
    MatrixXcd num = MatrixXcd::Zero(d, d);
    for (int n = 0; n < d; ++n)
        num(n, n) = n;
    auto expect = [&](const MatrixXcd& op) { return (r * op).trace(); };
    const double n1 = expect(num).real(), n2 = expect(num * num).real();
    const double f1 = expect(phase).real(), f2 = expect(phase * phase).real();
    const cplx comm = expect(num * phase - phase * num);
    NumberPhaseStats st;
    st.delta_n = std::sqrt(std::max(n2 - n1 * n1, 0.0));
    st.delta_phi = std::sqrt(std::max(f2 - f1 * f1, 0.0));
    st.product = st.delta_n * st.delta_phi;
    st.commutator_half = std::abs(comm) / 2.0;
    return st;
}

} // namespace ohtlab
