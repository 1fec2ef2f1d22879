#include "ohtlab/homodyne.hpp"

#include "ohtlab/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace ohtlab {

std::vector<std::string> DetectorModel::validate() const
{
    if (!(eta_q > 0.0 && eta_q <= 1.0))
        throw ConfigError("eta_q must lie in (0, 1]");
    if (!(eta_ls >= 0.0 && eta_ls <= 1.0))
        throw ConfigError("eta_ls must lie in [0, 1]");
    if (!(lo_mean_photons >= 0.0) || !std::isfinite(lo_mean_photons))
        throw ConfigError("lo_mean_photons must be non-negative");
    if (!(sigma_e >= 0.0))
        throw ConfigError("sigma_e must be non-negative");
    if (!(gain > 0.0))
        throw ConfigError("gain must be positive");
    if (!(std::abs(balance_imbalance) < 1.0))
        throw ConfigError("balance_imbalance must lie in (-1, 1)");
    std::vector<std::string> warn;
    if (lo_mean_photons < 1e4)
        warn.push_back("lo_mean_photons below 1e4: strong-LO Gaussian model is approximate");
    return warn;
}

PhaseSchedule PhaseSchedule::grid(int d, double span)
{
    if (d < 1)
        throw ConfigError("phase grid needs d >= 1");
    if (!(span > 0.0 && span <= 2 * kPi + 1e-12))
        throw ConfigError("phase grid span must lie in (0, 2pi]");
    PhaseSchedule s;
    s.kind = ScheduleKind::grid;
    s.d = d;
    s.span = span;
    return s;
}

PhaseSchedule PhaseSchedule::uniform_random()
{
    PhaseSchedule s;
    s.kind = ScheduleKind::uniform_random;
    return s;
}

PhaseSchedule PhaseSchedule::swept_linear()
{
    PhaseSchedule s;
    s.kind = ScheduleKind::swept_linear;
    return s;
}

std::string PhaseSchedule::name() const
{
    switch (kind) {
    case ScheduleKind::grid:
        return "grid";
    case ScheduleKind::uniform_random:
        return "uniform_random";
    case ScheduleKind::swept_linear:
        return "swept_linear";
    }
    return "?";
}

ScheduleKind schedule_kind_from_name(const std::string& name)
{
    if (name == "grid")
        return ScheduleKind::grid;
    if (name == "uniform_random")
        return ScheduleKind::uniform_random;
    if (name == "swept_linear")
        return ScheduleKind::swept_linear;
    throw ConfigError("unknown phase schedule '" + name + "'");
}

double PhaseSchedule::phase(std::size_t k, std::size_t n, Engine& eng) const
{
    switch (kind) {
    case ScheduleKind::grid:
        return span * static_cast<double>(k % static_cast<std::size_t>(d)) / d;
    case ScheduleKind::uniform_random: {
        std::uniform_real_distribution<double> u(0.0, 2 * kPi);
        double t = u(eng);
        return t >= 2 * kPi ? 0.0 : t;
    }
    case ScheduleKind::swept_linear:
        return 2 * kPi * static_cast<double>(k) / static_cast<double>(n);
    }
    return 0.0;
}

// Pr(q, theta) = Re B_0(q) + 2 Re sum_k exp(-i k theta) B_k(q),
// B_k(q) = sum_m rho_{m+k,m} psi_{m+k}(q) psi_m(q).
QuadratureSampler::QuadratureSampler(const DensityMatrix& rho, double q_lo, double q_hi, int n_points)
    : dim_(rho.dim()), n_(n_points), q_lo_(q_lo), dq_((q_hi - q_lo) / (n_points - 1))
{
    if (n_points < 2 || !(q_hi > q_lo))
        throw ConfigError("sampler grid is degenerate");
    const VectorXd axis = linspace(q_lo, q_hi, n_points);
    const MatrixXd psi = hermite_table(dim_ - 1, axis);
    MatrixXcd band(dim_, n_);
    for (int j = 0; j < n_; ++j)
        for (int k = 0; k < dim_; ++k) {
            cplx s = 0.0;
            for (int m = 0; m + k < dim_; ++m)
                s += rho.elements(m + k, m) * psi(m + k, j) * psi(m, j);
            band(k, j) = s;
        }
    cum_.resize(dim_, n_);
    cum_.col(0).setZero();
    for (int j = 1; j < n_; ++j)
        cum_.col(j) = cum_.col(j - 1) + 0.5 * dq_ * (band.col(j - 1) + band.col(j));
}

double QuadratureSampler::cdf_at_index(int j, const VectorXcd& phases) const
{
    const cplx* c = cum_.col(j).data();
    double s = c[0].real();
    for (int k = 1; k < dim_; ++k)
        s += 2.0 * (phases[k] * c[k]).real();
    return s;
}

double QuadratureSampler::sample(double theta, double u) const
{
    VectorXcd ph(dim_);
    for (int k = 0; k < dim_; ++k)
        ph[k] = std::polar(1.0, -k * theta);
    const double target = u * cdf_at_index(n_ - 1, ph);
    int lo = 0, hi = n_ - 1;  // F(lo) <= target <= F(hi)
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        if (cdf_at_index(mid, ph) < target)
            lo = mid;
        else
            hi = mid;
    }
    const double f0 = cdf_at_index(lo, ph), f1 = cdf_at_index(hi, ph);
    double t = f1 > f0 ? (target - f0) / (f1 - f0) : 0.5;
    t = std::clamp(t, 0.0, 1.0);
    return q_lo_ + (lo + t) * dq_;
}

double quadrature_noise_sigma(const DetectorModel& det)
{
    const double eta = det.eta_eff();
    if (!(eta > 0.0))
        throw ConfigError("effective efficiency eta_q * eta_ls must be positive");
    double var = 0.5 * (1.0 / eta - 1.0);
    if (det.sigma_e > 0.0) {
        if (!(det.lo_mean_photons > 0.0))
            throw ConfigError("electronic noise with a blocked LO has no quadrature scale");
        // both channels: n_- picks up 2 sigma_e^2, divided by (sqrt(2) eta |alpha_L|)^2
        var += det.sigma_e * det.sigma_e / (eta * eta * det.lo_mean_photons);
    }
    return std::sqrt(var);
}

QuadratureDataset sample_quadratures(const DensityMatrix& rho, const PhaseSchedule& sched, const DetectorModel& det,
                                     std::size_t n_samples, std::uint64_t seed,
                                     const std::optional<StateSpec>& source)
{
    det.validate();
    if (n_samples == 0)
        throw ConfigError("n_samples must be positive");
    if (std::abs(rho.trace() - 1.0) > 1e-6)
        throw DataError("density matrix is not normalized");
    const double noise = quadrature_noise_sigma(det);
    const QuadratureSampler sampler(rho);

    QuadratureDataset ds;
    ds.theta.resize(n_samples);
    ds.q.resize(n_samples);
    ds.meta.det = det;
    ds.meta.schedule = sched;
    ds.meta.seed = seed;
    ds.meta.source = source;
    parallel_chunks(n_samples, kStreamBlock, [&](std::size_t b, std::size_t e, std::size_t c) {
        Engine eng = make_stream(seed, c);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (std::size_t i = b; i < e; ++i) {
            const double th = sched.phase(i, n_samples, eng);
            double q = sampler.sample(th, uni(eng));
            if (noise > 0.0)
                q += noise * gauss(eng);
            ds.theta[i] = th;
            ds.q[i] = q;
        }
    });
    return ds;
}

namespace {

struct DiodeMeans {
    double mu1, mu2;
};

// Mode mismatch enters as an overall loss so this path and the quadrature-space
// path share one noise model.
DiodeMeans diode_means(double q_ideal, const DetectorModel& det)
{
    const double eta = det.eta_eff();
    const double t = 0.5 * (1.0 + det.balance_imbalance), r = 0.5 * (1.0 - det.balance_imbalance);
    const double amp = std::sqrt(det.lo_mean_photons);
    const double beat = eta * amp * q_ideal * 2.0 * std::sqrt(t * r) / std::sqrt(2.0);
    return {eta * det.lo_mean_photons * t + beat, eta * det.lo_mean_photons * r - beat};
}

long long poisson_draw(double mu, Engine& eng)
{
    if (mu <= 0.0)
        return 0;
    std::poisson_distribution<long long> p(mu);
    return p(eng);
}

} // namespace

DiodeCounts detector_counts(double q_ideal, double /*theta*/, const DetectorModel& det, Engine& eng)
{
    const DiodeMeans m = diode_means(q_ideal, det);
    if (m.mu1 < 0.0 || m.mu2 < 0.0)
        throw NumericalError("negative photodiode mean rate: LO too weak for this signal amplitude");
    DiodeCounts c{poisson_draw(m.mu1, eng), poisson_draw(m.mu2, eng)};
    if (det.sigma_e > 0.0) {
        std::normal_distribution<double> g(0.0, det.sigma_e);
        c.n1 += std::llround(g(eng));
        c.n2 += std::llround(g(eng));
    }
    return c;
}

double scaled_difference(const DiodeCounts& c, const DetectorModel& det)
{
    const double scale = std::sqrt(2.0) * det.eta_eff() * std::sqrt(det.lo_mean_photons);
    if (!(scale > 0.0))
        throw ConfigError("scaled difference needs a nonzero LO and efficiency");
    return static_cast<double>(c.difference()) / scale;
}

double DifferencePdf::prob(long long n) const
{
    const long long i = n - n_min;
    if (i < 0 || i >= p.size())
        return 0.0;
    return p[i];
}

double DifferencePdf::mean() const
{
    double s = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i)
        s += p[i] * static_cast<double>(n_min + i);
    return s;
}

double DifferencePdf::variance() const
{
    const double m = mean();
    double s = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double d = static_cast<double>(n_min + i) - m;
        s += p[i] * d * d;
    }
    return s;
}

namespace {

// log P(Poisson(mu) = k) over k = lo..hi
std::vector<double> log_poisson(double mu, long long lo, long long hi)
{
    std::vector<double> out(static_cast<std::size_t>(hi - lo + 1));
    for (long long k = lo; k <= hi; ++k)
        out[k - lo] = k * std::log(mu) - mu - std::lgamma(static_cast<double>(k) + 1.0);
    return out;
}

} // namespace

DifferencePdf skellam_pdf(double mu1, double mu2)
{
    if (!(mu1 >= 0.0 && mu2 >= 0.0) || !std::isfinite(mu1) || !std::isfinite(mu2))
        throw ConfigError("Poisson means must be finite and non-negative");
    DifferencePdf out;
    out.mu1 = mu1;
    out.mu2 = mu2;
    const double m = mu1 - mu2;
    const double sd = std::sqrt(mu1 + mu2);
    const double reach = 40.0 * sd + 40.0;
    long long lo = static_cast<long long>(std::floor(m - reach));
    long long hi = static_cast<long long>(std::ceil(m + reach));
    if (mu1 == 0.0 && mu2 == 0.0) {
        out.n_min = 0;
        out.p = VectorXd::Ones(1);
        return out;
    }
    std::vector<double> logp;
    if (mu2 == 0.0) {
        lo = std::max<long long>(lo, 0);
        logp = log_poisson(mu1, lo, hi);
    } else if (mu1 == 0.0) {
        hi = std::min<long long>(hi, 0);
        const auto lp = log_poisson(mu2, -hi, -lo);
        logp.assign(lp.rbegin(), lp.rend());
    } else {
        // I_k(z) by backward recurrence, kept in log scale; the overall constant
        // cancels in the final normalization.
        const double z = 2.0 * std::sqrt(mu1 * mu2);
        const long long kmax = std::max(std::abs(lo), std::abs(hi));
        const long long start = kmax + 50 + static_cast<long long>(10.0 * std::sqrt(z));
        std::vector<double> logi(static_cast<std::size_t>(kmax + 1));
        double f_next = 0.0, f = 1e-300, shift = 0.0;
        for (long long k = start; k >= 1; --k) {
            const double f_prev = f_next + (2.0 * k / z) * f;
            f_next = f;
            f = f_prev;
            if (f > 1e250) {
                f /= 1e250;
                f_next /= 1e250;
                shift += std::log(1e250);
            }
            if (k - 1 <= kmax)
                logi[k - 1] = std::log(f) + shift;
        }
        const double half_log_ratio = 0.5 * std::log(mu1 / mu2);
        logp.resize(static_cast<std::size_t>(hi - lo + 1));
        for (long long k = lo; k <= hi; ++k)
            logp[k - lo] = k * half_log_ratio + logi[std::abs(k)];
    }
    const double peak = *std::max_element(logp.begin(), logp.end());
    out.n_min = lo;
    out.p.resize(static_cast<Eigen::Index>(logp.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < logp.size(); ++i) {
        out.p[i] = std::exp(logp[i] - peak);
        s += out.p[i];
    }
    out.p /= s;
    return out;
}

DifferencePdf skellam_difference_pdf(cplx signal_alpha, double theta, const DetectorModel& det)
{
    det.validate();
    const double eta = det.eta_eff();
    const double t = 0.5 * (1.0 + det.balance_imbalance), r = 0.5 * (1.0 - det.balance_imbalance);
    const cplx lo = std::polar(std::sqrt(det.lo_mean_photons), theta);
    const double mu1 = eta * std::norm(std::sqrt(t) * lo + std::sqrt(r) * signal_alpha);
    const double mu2 = eta * std::norm(std::sqrt(r) * lo - std::sqrt(t) * signal_alpha);
    return skellam_pdf(mu1, mu2);
}

DifferencePdf skellam_difference_pdf(const StateSpec& signal, double theta, const DetectorModel& det)
{
    switch (signal.kind) {
    case StateKind::vacuum:
        return skellam_difference_pdf(cplx(0.0), theta, det);
    case StateKind::coherent:
        return skellam_difference_pdf(signal.alpha, theta, det);
    default:
        throw UnsupportedStateError("exact difference-count law is only available for coherent signals, got " +
                                    signal.name());
    }
}

double gaussian_total_variation(const DifferencePdf& pdf)
{
    const double m = pdf.mean();
    const double sd = std::sqrt(pdf.variance());
    if (!(sd > 0.0))
        throw NumericalError("degenerate difference law");
    auto cdf = [&](double x) { return 0.5 * std::erfc(-(x - m) / (sd * std::sqrt(2.0))); };
    double tv = 0.0, covered = 0.0;
    for (Eigen::Index i = 0; i < pdf.p.size(); ++i) {
        const double n = static_cast<double>(pdf.n_min + i);
        const double g = cdf(n + 0.5) - cdf(n - 0.5);
        covered += g;
        tv += std::abs(pdf.p[i] - g);
    }
    return 0.5 * (tv + std::max(0.0, 1.0 - covered));
}

double mode_overlap(const VectorXcd& lo_mode, const VectorXcd& sig_mode, double delta)
{
    if (lo_mode.size() != sig_mode.size() || lo_mode.size() == 0)
        throw ConfigError("mode vectors must have equal nonzero length");
    if (!(delta > 0.0))
        throw ConfigError("grid spacing must be positive");
    const double n1 = lo_mode.squaredNorm() * delta, n2 = sig_mode.squaredNorm() * delta;
    if (std::abs(n1 - 1.0) > 1e-6 || std::abs(n2 - 1.0) > 1e-6)
        throw DataError("mode functions must be normalized (sum |v|^2 delta = 1)");
    return std::min(1.0, std::abs(lo_mode.dot(sig_mode)) * delta);
}

CalibrationResult calibration_curve(const DetectorModel& det, const std::vector<double>& lo_levels,
                                    std::size_t pulses_per_level, std::uint64_t seed)
{
    det.validate();
    std::vector<double> distinct = lo_levels;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 3)
        throw ConfigError("calibration needs at least 3 distinct LO levels");
    if (pulses_per_level < 2)
        throw ConfigError("calibration needs at least 2 pulses per level");
    for (double l : lo_levels)
        if (!(l > 0.0))
            throw ConfigError("LO levels must be positive");

    CalibrationResult res;
    const std::size_t n_lev = lo_levels.size();
    res.table.resize(n_lev);
    const std::size_t blocks_per_level = (pulses_per_level + kStreamBlock - 1) / kStreamBlock;
    for (std::size_t l = 0; l < n_lev; ++l) {
        DetectorModel d = det;
        d.lo_mean_photons = lo_levels[l];
        const std::size_t nb = blocks_per_level;
        std::vector<double> sp(nb, 0.0), sm(nb, 0.0), smm(nb, 0.0);
        parallel_chunks(pulses_per_level, kStreamBlock, [&](std::size_t b, std::size_t e, std::size_t c) {
            Engine eng = make_stream(seed, l * blocks_per_level + c);
            for (std::size_t i = b; i < e; ++i) {
                const DiodeCounts n = detector_counts(0.0, 0.0, d, eng);
                const double vp = static_cast<double>(n.n1 + n.n2) / det.gain;
                const double vm = static_cast<double>(n.difference()) / det.gain;
                sp[c] += vp;
                sm[c] += vm;
                smm[c] += vm * vm;
            }
        });
        double tp = 0, tm = 0, tmm = 0;
        for (std::size_t c = 0; c < nb; ++c) {
            tp += sp[c];
            tm += sm[c];
            tmm += smm[c];
        }
        const double n = static_cast<double>(pulses_per_level);
        const double mean_m = tm / n;
        const double var = (tmm - n * mean_m * mean_m) / (n - 1.0);
        res.table[l] = {lo_levels[l], tp / n, var, var * std::sqrt(2.0 / (n - 1.0))};
    }

    // weighted least squares, weights from the fitted variance (IRLS)
    const double n = static_cast<double>(pulses_per_level);
    std::vector<double> fit(n_lev);
    for (std::size_t i = 0; i < n_lev; ++i)
        fit[i] = res.table[i].var_v_minus;
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    Eigen::Vector2d beta = Eigen::Vector2d::Zero();
    for (int iter = 0; iter < 5; ++iter) {
        Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
        Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
        for (std::size_t i = 0; i < n_lev; ++i) {
            const double sig2 = 2.0 * fit[i] * fit[i] / (n - 1.0);
            const double w = sig2 > 0.0 ? 1.0 / sig2 : 1.0;
            const double x = res.table[i].mean_v_plus, y = res.table[i].var_v_minus;
            a(0, 0) += w * x * x;
            a(0, 1) += w * x;
            a(1, 1) += w;
            rhs[0] += w * x * y;
            rhs[1] += w * y;
        }
        a(1, 0) = a(0, 1);
        cov = a.inverse();
        beta = cov * rhs;
        for (std::size_t i = 0; i < n_lev; ++i)
            fit[i] = std::max(beta[0] * res.table[i].mean_v_plus + beta[1], 1e-300);
    }
    double chi2 = 0.0;
    for (std::size_t i = 0; i < n_lev; ++i) {
        const double sig2 = 2.0 * fit[i] * fit[i] / (n - 1.0);
        const double r = res.table[i].var_v_minus - fit[i];
        chi2 += r * r / sig2;
    }
    res.slope = beta[0];
    res.intercept = beta[1];
    res.slope_stderr = std::sqrt(cov(0, 0));
    res.intercept_stderr = std::sqrt(cov(1, 1));
    res.reduced_chi2 = n_lev > 2 ? chi2 / static_cast<double>(n_lev - 2) : 0.0;
    // 1% upper tail of chi2/dof for a handful of levels sits near 4-6
    res.nonlinear = n_lev > 2 && res.reduced_chi2 > 5.4;
    if (!(res.slope > 0.0))
        throw NumericalError("calibration slope is not positive");
    res.gain = 1.0 / res.slope;
    res.gain_stderr = res.slope_stderr / (res.slope * res.slope);
    // intercept carries both channels: 2 sigma_e^2 / g^2
    const double b = std::max(res.intercept, 0.0);
    res.sigma_e = std::sqrt(b / 2.0) / res.slope;
    if (b > 0.0) {
        const double da = -std::sqrt(b / 2.0) / (res.slope * res.slope);
        const double db = 1.0 / (res.slope * 2.0 * std::sqrt(2.0 * b));
        res.sigma_e_stderr = std::sqrt(da * da * cov(0, 0) + 2 * da * db * cov(0, 1) + db * db * cov(1, 1));
    } else {
        res.sigma_e_stderr = std::sqrt(std::max(res.intercept_stderr, 0.0) / 2.0) / res.slope;
    }
    return res;
}

double gain_balancing_sim(double n_tot, double n_diff1, double n_diff2)
{
    if (!(n_tot > 0.0))
        throw ConfigError("n_tot must be positive");
    if (n_diff1 < 0.0 || n_diff2 < 0.0)
        throw ConfigError("null residuals must be non-negative");
    return (n_diff1 + n_diff2) / n_tot;
}

BalancingRun gain_balancing_monte_carlo(double n_tot, double n_diff1, double n_diff2, double beta_over_alpha,
                                        std::uint64_t seed, int max_iterations)
{
    BalancingRun run;
    run.bound = gain_balancing_sim(n_tot, n_diff1, n_diff2);
    if (!(beta_over_alpha > 0.0))
        throw ConfigError("gain ratio must be positive");
    Engine eng = make_stream(seed, 0);
    std::uniform_real_distribution<double> u1(-0.5 * n_diff1, 0.5 * n_diff1), u2(-0.5 * n_diff2, 0.5 * n_diff2);
    double ratio = beta_over_alpha;  // beta / alpha
    double split = 0.5;              // fraction of charge into the alpha channel
    // Full nulling at each step overshoots and oscillates; half steps converge.
    const double damp = 0.5;
    for (int it = 1; it <= max_iterations; ++it) {
        const double d1 = n_tot * (split - ratio * (1.0 - split));
        const double d2 = n_tot * ((1.0 - split) - ratio * split);
        run.iterations = it;
        if (std::abs(d1) <= n_diff1 && std::abs(d2) <= n_diff2) {
            run.converged = true;
            break;
        }
        // configuration 1: trim the second gain toward a null (nulls are only
        // readable to within the resolution n_diff1)
        const double r1 = n_diff1 > 0.0 ? u1(eng) : 0.0;
        const double ratio_null = (split * n_tot - r1) / ((1.0 - split) * n_tot);
        ratio += damp * (ratio_null - ratio);
        // configuration 2 (inputs swapped): trim the splitter
        const double r2 = n_diff2 > 0.0 ? u2(eng) : 0.0;
        const double split_null = (n_tot - r2) / (n_tot * (1.0 + ratio));
        split += damp * (split_null - split);
    }
    run.mismatch = std::abs(1.0 - ratio);
    return run;
}

} // namespace ohtlab
