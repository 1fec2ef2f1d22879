#include "ohtlab/array.hpp"

#include "ohtlab/errors.hpp"
#include "ohtlab/parallel.hpp"
#include "ohtlab/pattern.hpp"

#include <Eigen/Eigenvalues>
#include <boost/random/poisson_distribution.hpp>
#include <fftw3.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <sstream>

namespace ohtlab {

namespace {

constexpr double kMinPixelLo = 1e3;

bool phase_insensitive_classical(const StateSpec& s)
{
    return s.kind == StateKind::vacuum || s.kind == StateKind::coherent || s.kind == StateKind::thermal;
}

// Field amplitude with the state's (positive) P function.
cplx draw_amplitude(const StateSpec& s, Engine& eng)
{
    switch (s.kind) {
    case StateKind::coherent:
        return s.alpha;
    case StateKind::thermal: {
        std::normal_distribution<double> g(0.0, std::sqrt(s.nbar / 2.0));
        const double re = g(eng);
        return {re, g(eng)};
    }
    default:
        return 0.0;
    }
}

long long poisson(double mu, Engine& eng)
{
    if (mu <= 0.0)
        return 0;
    // PTRS sampler, several times faster than libstdc++ at LO-scale means
    boost::random::poisson_distribution<long long, double> p(mu);
    return p(eng);
}

double mean_photons_of(const StateSpec& s)
{
    switch (s.kind) {
    case StateKind::vacuum:
        return 0.0;
    case StateKind::fock:
        return s.n;
    case StateKind::coherent:
        return std::norm(s.alpha);
    case StateKind::thermal:
        return s.nbar;
    case StateKind::squeezed_vacuum:
        return std::pow(std::sinh(s.r), 2);
    case StateKind::squeezed_coherent:
        return std::pow(std::sinh(s.r), 2) + std::norm(s.alpha);
    }
    return 0.0;
}

} // namespace

VectorXd PixelGrid::coordinates() const
{
    VectorXd x(n_pixels);
    const double step = (x_max - x_min) / n_pixels;
    for (int j = 0; j < n_pixels; ++j)
        x[j] = x_min + (j + 0.5) * step;
    return x;
}

void PixelGrid::validate() const
{
    if (n_pixels < 1)
        throw ConfigError("pixel grid needs at least one pixel");
    if (!(pixel_area > 0.0))
        throw ConfigError("pixel area must be positive");
    if (!(x_max > x_min))
        throw ConfigError("pixel grid needs x_max > x_min");
}

ModeVector ModeVector::from_function(const PixelGrid& g, const std::function<double(double)>& f)
{
    g.validate();
    const VectorXd x = g.coordinates();
    ModeVector m;
    m.w.resize(g.n_pixels);
    for (int j = 0; j < g.n_pixels; ++j)
        m.w[j] = f(x[j]);
    const double norm = std::sqrt(g.pixel_area * m.w.squaredNorm());
    if (!(norm > 0.0))
        throw ConfigError("mode function vanishes on every pixel");
    m.w /= norm;
    return m;
}

ModeVector ModeVector::uniform(const PixelGrid& g)
{
    return from_function(g, [](double) { return 1.0; });
}

void ModeVector::check_normalized(const PixelGrid& g, double tol) const
{
    if (w.size() != g.n_pixels)
        throw DataError("mode vector length differs from the pixel count");
    const double n = g.pixel_area * w.squaredNorm();
    if (std::abs(n - 1.0) > tol) {
        std::ostringstream os;
        os << "mode is not normalized: pixel_area * sum w^2 = " << n;
        throw DataError(os.str());
    }
}

VectorXd ArrayFrameSet::corrected(std::size_t pulse) const
{
    return frames.row(static_cast<Eigen::Index>(pulse)).transpose().cast<double>() - vacuum_offsets;
}

namespace {

struct FrameJob {
    const PixelGrid* grid;
    const DetectorModel* det;
    const PhaseSchedule* sched;
    VectorXd eps;  // splitter imbalance per pixel
};

// Both arrays counted as independent Poisson processes.
void poisson_frames(const FrameJob& job, const std::vector<SignalMode>& signal, std::size_t n, std::uint64_t seed,
                    ArrayFrameSet& out)
{
    const PixelGrid& g = *job.grid;
    const DetectorModel& det = *job.det;
    const int np = g.n_pixels;
    const double lo_amp = std::sqrt(det.lo_mean_photons * g.pixel_area / g.array_area());
    const double sqrt_ap = std::sqrt(g.pixel_area);
    const double eta = det.eta_q;
    out.frames.resize(static_cast<Eigen::Index>(n), np);
    out.theta.resize(static_cast<Eigen::Index>(n));
    parallel_chunks(n, kStreamBlock, [&](std::size_t b, std::size_t e, std::size_t c) {
        Engine eng = make_stream(seed, c);
        std::normal_distribution<double> gauss(0.0, 1.0);
        VectorXcd s(np);
        for (std::size_t i = b; i < e; ++i) {
            const double th = job.sched->phase(i, n, eng);
            s.setZero();
            for (const auto& m : signal) {
                const cplx a = draw_amplitude(m.state, eng);
                if (a != 0.0)
                    s += (sqrt_ap * a) * m.profile;
            }
            const cplx lo = std::polar(lo_amp, th);
            for (int j = 0; j < np; ++j) {
                const double t = 0.5 * (1.0 + job.eps[j]), r = 1.0 - t;
                const double mu1 = eta * std::norm(std::sqrt(t) * lo + std::sqrt(r) * s[j]);
                const double mu2 = eta * std::norm(std::sqrt(r) * lo - std::sqrt(t) * s[j]);
                double d = static_cast<double>(poisson(mu1, eng) - poisson(mu2, eng));
                if (det.sigma_e > 0.0)
                    d += std::round(det.sigma_e * gauss(eng)) - std::round(det.sigma_e * gauss(eng));
                out.frames(static_cast<Eigen::Index>(i), j) = static_cast<int>(d);
            }
            out.theta[static_cast<Eigen::Index>(i)] = th;
        }
    });
}

// Pixel-mode quadratures sampled jointly: planted modes exactly, the orthogonal
// complement as vacuum. Loss and shot noise enter as Gaussian noise with the
// Poisson difference variance.
void quadrature_frames(const FrameJob& job, const std::vector<SignalMode>& signal, std::size_t n,
                       std::uint64_t seed, ArrayFrameSet& out)
{
    const PixelGrid& g = *job.grid;
    const DetectorModel& det = *job.det;
    const int np = g.n_pixels;
    const int k = static_cast<int>(signal.size());
    MatrixXd c(np, k);
    for (int m = 0; m < k; ++m)
        c.col(m) = std::sqrt(g.pixel_area) * signal[m].profile.real();
    std::vector<QuadratureSampler> samplers;
    for (const auto& m : signal)
        samplers.emplace_back(make_state(m.state));
    const double eta = det.eta_q;
    const double lo_pix = det.lo_mean_photons * g.pixel_area / g.array_area();
    const double gain = std::sqrt(2.0) * eta * std::sqrt(lo_pix);
    const double loss_sd = std::sqrt((1.0 / eta - 1.0) / 2.0);
    out.frames.resize(static_cast<Eigen::Index>(n), np);
    out.theta.resize(static_cast<Eigen::Index>(n));
    parallel_chunks(n, kStreamBlock, [&](std::size_t b, std::size_t e, std::size_t ch) {
        Engine eng = make_stream(seed, ch);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);
        VectorXd qk(k), z(np), qpix(np);
        for (std::size_t i = b; i < e; ++i) {
            const double th = job.sched->phase(i, n, eng);
            for (int m = 0; m < k; ++m)
                qk[m] = samplers[m].sample(th, uni(eng));
            for (int j = 0; j < np; ++j)
                z[j] = gauss(eng);
            qpix = c * qk + (z - c * (c.transpose() * z)) / std::sqrt(2.0);
            for (int j = 0; j < np; ++j) {
                double d = gain * (qpix[j] + loss_sd * gauss(eng)) + eta * job.eps[j] * lo_pix;
                if (det.sigma_e > 0.0)
                    d += std::sqrt(2.0) * det.sigma_e * gauss(eng);
                out.frames(static_cast<Eigen::Index>(i), j) = static_cast<int>(std::lround(d));
            }
            out.theta[static_cast<Eigen::Index>(i)] = th;
        }
    });
}

} // namespace

ArrayFrameSet simulate_array_frames(const std::vector<SignalMode>& signal, const DetectorModel& det,
                                    const PixelGrid& grid, const PhaseSchedule& sched, std::size_t n,
                                    std::uint64_t seed, const ArrayOptions& opt)
{
    grid.validate();
    ArrayFrameSet out;
    out.meta.warnings = det.validate();
    if (n == 0)
        throw ConfigError("number of pulses must be positive");
    const double lo_pix = det.lo_mean_photons * grid.pixel_area / grid.array_area();
    if (lo_pix < kMinPixelLo) {
        std::ostringstream os;
        os << "LO gives " << lo_pix << " photons per pixel; at least " << kMinPixelLo << " are needed";
        throw ConfigError(os.str());
    }
    if (opt.max_offset < 0.0 || opt.max_offset > 0.01)
        throw ConfigError("planted pixel offsets must lie in [0, 0.01] of the LO level");

    const int k = static_cast<int>(signal.size());
    bool classical = true, real = true;
    for (const auto& m : signal) {
        if (m.profile.size() != grid.n_pixels)
            throw ConfigError("signal mode length differs from the pixel count");
        const double nrm = grid.pixel_area * m.profile.squaredNorm();
        if (std::abs(nrm - 1.0) > 1e-6)
            throw ConfigError("signal mode is not normalized (pixel_area * sum |w|^2 != 1)");
        classical = classical && phase_insensitive_classical(m.state);
        real = real && m.profile.imag().cwiseAbs().maxCoeff() <= 1e-12;
    }
    bool orthogonal = true;
    for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b)
            if (std::abs(grid.pixel_area * signal[a].profile.dot(signal[b].profile)) > 1e-6)
                orthogonal = false;
    if (!orthogonal)
        out.meta.warnings.push_back("planted signal modes overlap");
    if (!classical && !(real && orthogonal))
        throw UnsupportedStateError(
            "nonclassical signal states need real, mutually orthogonal mode profiles in the array simulation");

    FrameJob job{&grid, &det, &sched, VectorXd::Zero(grid.n_pixels)};
    if (opt.max_offset > 0.0) {
        Engine eng = make_stream(seed, 2);
        std::uniform_real_distribution<double> u(-opt.max_offset, opt.max_offset);
        for (int j = 0; j < grid.n_pixels; ++j)
            job.eps[j] = u(eng);
    }

    if (classical)
        poisson_frames(job, signal, n, stream_seed(seed, 0), out);
    else
        quadrature_frames(job, signal, n, stream_seed(seed, 0), out);

    // companion run with the signal blocked
    ArrayFrameSet vac;
    const std::size_t nv = opt.vacuum_pulses > 0 ? opt.vacuum_pulses : n;
    poisson_frames(job, {}, nv, stream_seed(seed, 1), vac);
    out.vacuum_offsets = vac.frames.cast<double>().colwise().mean().transpose();

    out.meta.det = det;
    out.meta.grid = grid;
    out.meta.schedule = sched;
    out.meta.seed = seed;
    out.meta.noise_model = classical ? "poisson" : "gaussian";
    std::ostringstream desc;
    for (int m = 0; m < k; ++m)
        desc << (m ? "; " : "") << signal[m].state.name();
    out.meta.signal_description = k ? desc.str() : "vacuum";
    return out;
}

QuadratureDataset project_mode_quadrature(const ArrayFrameSet& f, const ModeVector& w)
{
    const PixelGrid& g = f.meta.grid;
    w.check_normalized(g);
    if (f.vacuum_offsets.size() != g.n_pixels)
        throw DataError("vacuum offset vector length differs from the pixel count");
    const double scale = std::sqrt(g.array_area() / 2.0) / (f.meta.det.eta_q * std::sqrt(f.meta.det.lo_mean_photons));
    const double shift = f.vacuum_offsets.dot(w.w);
    QuadratureDataset ds;
    ds.theta = f.theta;
    ds.q = scale * (f.frames.cast<double>() * w.w - VectorXd::Constant(f.frames.rows(), shift));
    ds.meta.det = f.meta.det;
    ds.meta.det.eta_ls = 1.0;  // the projection is matched by construction
    ds.meta.schedule = f.meta.schedule;
    ds.meta.seed = f.meta.seed;
    return ds;
}

QuadratureDataset project_mode_quadrature(const ArrayFrameSet& f, const VectorXcd& w)
{
    if (w.imag().cwiseAbs().maxCoeff() > 0.0)
        throw ConfigError("projection mode must be real: the array measures a quadrature only for modes with a "
                          "constant phase across the profile");
    return project_mode_quadrature(f, ModeVector{w.real()});
}

MatrixXd difference_correlation_matrix(const ArrayFrameSet& f)
{
    const std::size_t n = f.size();
    if (n < 2)
        throw DataError("need at least 2 frames");
    if (f.meta.schedule.kind == ScheduleKind::grid && folded_phase_count(f.theta) < 2)
        throw DataError("phase schedule does not cover [0, 2pi) evenly enough to average <N_i N_j>");
    const int np = static_cast<int>(f.frames.cols());
    const std::size_t chunk = 4096;
    const std::size_t n_chunks = (n + chunk - 1) / chunk;
    std::vector<MatrixXd> part(n_chunks);
    parallel_chunks(n, chunk, [&](std::size_t b, std::size_t e, std::size_t c) {
        MatrixXd d(static_cast<Eigen::Index>(e - b), np);
        for (std::size_t i = b; i < e; ++i)
            d.row(static_cast<Eigen::Index>(i - b)) = f.corrected(i).transpose();
        MatrixXd acc = MatrixXd::Zero(np, np);
        acc.selfadjointView<Eigen::Lower>().rankUpdate(d.transpose());
        part[c] = acc;
    });
    MatrixXd m = MatrixXd::Zero(np, np);
    for (const auto& p : part)
        m += p;
    m /= static_cast<double>(n);
    m.triangularView<Eigen::StrictlyUpper>() = m.transpose();
    return m;
}

OptimalMode optimal_mode(const MatrixXd& m, const DetectorModel& det, const PixelGrid& grid)
{
    grid.validate();
    if (m.rows() != m.cols() || m.rows() != grid.n_pixels)
        throw ConfigError("correlation matrix must be n_pixels x n_pixels");
    const double big = m.cwiseAbs().maxCoeff();
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * big)
        throw ConfigError("correlation matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
    if (es.info() != Eigen::Success)
        throw NumericalError("eigen-decomposition failed");
    const Eigen::Index top = m.rows() - 1;
    const double lmax = es.eigenvalues()[top];
    Eigen::Index best = top, best_idx = m.rows();
    for (Eigen::Index c = top; c >= 0; --c) {
        if (lmax - es.eigenvalues()[c] > 1e-9 * std::abs(lmax))
            break;
        Eigen::Index idx;
        es.eigenvectors().col(c).cwiseAbs().maxCoeff(&idx);
        if (idx < best_idx) {
            best_idx = idx;
            best = c;
        }
    }
    VectorXd v = es.eigenvectors().col(best);
    if (v[best_idx] < 0.0)
        v = -v;
    OptimalMode out;
    out.eigenvalue = es.eigenvalues()[best];
    out.mode.w = v / std::sqrt(grid.pixel_area);
    const double quad = out.mode.w.dot(m * out.mode.w);
    out.mean_photons = grid.array_area() / (2.0 * det.eta_q * det.lo_mean_photons) * quad - 0.5;
    return out;
}

Estimate mode_photon_number(const ArrayFrameSet& f, const ModeVector& w)
{
    return mean_photon(project_mode_quadrature(f, w));
}

// Spectral detection

int SpectralRecords::column(int l) const
{
    for (std::size_t i = 0; i < l_values.size(); ++i)
        if (l_values[i] == l)
            return static_cast<int>(i);
    std::ostringstream os;
    os << "l = " << l << " is outside (2J, M] = (" << 2 * lo_half_width << ", " << window << "]";
    throw ConfigError(os.str());
}

std::pair<VectorXd, VectorXd> SpectralRecords::scaled(int l) const
{
    if (lo_half_width != 0)
        throw ConfigError("quadrature scaling needs a single-mode LO (J = 0)");
    const int c = column(l);
    const cplx ref = eta * std::conj(lo[0]);
    const VectorXcd z = k.col(c) / ref;
    return {std::sqrt(2.0) * z.real(), std::sqrt(2.0) * z.imag()};
}

namespace {

struct Gaussian2 {
    Eigen::Vector2d mean;
    Eigen::Matrix2d chol;  // lower factor of the Wigner covariance
};

Gaussian2 wigner_gaussian(const StateSpec& s)
{
    const DensityMatrix rho = make_state(s);
    const auto [mq, vq] = quadrature_mean_var(rho, 0.0);
    const auto [mp, vp] = quadrature_mean_var(rho, kPi / 2);
    const auto [md, vd] = quadrature_mean_var(rho, kPi / 4);
    (void)md;
    Eigen::Matrix2d cov;
    cov << vq, vd - (vq + vp) / 2, vd - (vq + vp) / 2, vp;
    Gaussian2 g;
    g.mean << mq, mp;
    Eigen::LLT<Eigen::Matrix2d> llt(cov);
    if (llt.info() != Eigen::Success)
        throw NumericalError("Wigner covariance is not positive definite");
    g.chol = llt.matrixL();
    return g;
}

// Complex amplitude (q + ip)/sqrt2 drawn from a Gaussian Wigner function.
cplx wigner_amplitude(const Gaussian2& g, Engine& eng, std::normal_distribution<double>& gauss)
{
    Eigen::Vector2d z(gauss(eng), gauss(eng));
    const Eigen::Vector2d x = g.mean + g.chol * z;
    return cplx(x[0], x[1]) / std::sqrt(2.0);
}

struct FftwPlans {
    int n;
    fftw_plan fwd, bwd;
    FftwPlans(int n_) : n(n_)
    {
        static std::mutex mu;
        std::lock_guard<std::mutex> lock(mu);
        auto* buf = fftw_alloc_complex(n);
        fwd = fftw_plan_dft_1d(n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd = fftw_plan_dft_1d(n, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
        fftw_free(buf);
    }
    ~FftwPlans()
    {
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
    }
};

} // namespace

SpectralRecords unbalanced_spectral_sim(const std::vector<SpectralSignal>& signal, const SpectralOptions& opt,
                                        std::size_t n, std::uint64_t seed)
{
    const int m_win = opt.window;
    if (opt.lo.empty() || opt.lo.size() % 2 == 0)
        throw ConfigError("LO amplitudes must cover k = -J..J (odd count)");
    const int j_half = static_cast<int>(opt.lo.size() / 2);
    if (m_win < 1 || 2 * j_half >= m_win)
        throw ConfigError("spectral window needs M > 2J");
    if (!(opt.eta > 0.0 && opt.eta <= 1.0))
        throw ConfigError("eta must lie in (0, 1]");
    if (n == 0)
        throw ConfigError("number of pulses must be positive");
    if (std::abs(opt.lo[j_half]) == 0.0)
        throw ConfigError("central LO amplitude beta_0 must be nonzero");
    const int nm = 2 * m_win + 1;

    SpectralRecords rec;
    rec.window = m_win;
    rec.lo_half_width = j_half;
    rec.lo = opt.lo;
    rec.eta = opt.eta;
    for (int l = 2 * j_half + 1; l <= m_win; ++l)
        rec.l_values.push_back(l);

    std::vector<int> state_of(nm, -1);
    bool classical = true;
    double lo_photons = 0.0, sig_max = 0.0;
    for (const auto& b : opt.lo)
        lo_photons += std::norm(b);
    for (std::size_t i = 0; i < signal.size(); ++i) {
        const int k = signal[i].k;
        if (k <= j_half || k > m_win)
            throw ConfigError("signal modes must lie in (J, M]");
        if (state_of[k + m_win] >= 0)
            throw ConfigError("two signal states in one temporal mode");
        state_of[k + m_win] = static_cast<int>(i);
        classical = classical && phase_insensitive_classical(signal[i].state);
        sig_max = std::max(sig_max, mean_photons_of(signal[i].state));
    }
    if (lo_photons < 1e3 * std::max(sig_max, 1.0)) {
        rec.approximation_valid = false;
        rec.warnings.push_back("LO does not exceed the signal by 1e3 in photon number; discarded quadratic signal "
                               "terms are not negligible");
    }

    const Eigen::Index nl = static_cast<Eigen::Index>(rec.l_values.size());
    rec.k.resize(static_cast<Eigen::Index>(n), nl);
    const double eta = opt.eta;

    if (classical) {
        rec.noise_model = "poisson";
        const FftwPlans plans(nm);
        parallel_chunks(n, kStreamBlock, [&](std::size_t b, std::size_t e, std::size_t c) {
            Engine eng = make_stream(seed, c);
            std::uniform_real_distribution<double> uni(0.0, 2 * kPi);
            std::unique_ptr<fftw_complex[], decltype(&fftw_free)> buf(fftw_alloc_complex(nm), &fftw_free);
            auto* a = reinterpret_cast<cplx*>(buf.get());
            for (std::size_t i = b; i < e; ++i) {
                const cplx common = opt.common_random_phase ? std::polar(1.0, uni(eng)) : cplx(1.0);
                // temporal amplitudes, index k + M
                for (int k = 0; k < nm; ++k)
                    a[k] = 0.0;
                for (int k = -j_half; k <= j_half; ++k)
                    a[k + m_win] = opt.lo[k + j_half];
                for (int k = 0; k < nm; ++k)
                    if (state_of[k] >= 0)
                        a[k] = common * draw_amplitude(signal[state_of[k]].state, eng);
                // spectrometer pixels: a_j = nm^-1/2 sum_k exp(2 pi i j k / nm) b_k, k from -M
                fftw_execute_dft(plans.bwd, buf.get(), buf.get());
                for (int j = 0; j < nm; ++j) {
                    const cplx aj = a[j] * std::polar(1.0 / std::sqrt(double(nm)), -2 * kPi * j * m_win / nm);
                    a[j] = static_cast<double>(poisson(eta * std::norm(aj), eng));
                }
                fftw_execute_dft(plans.fwd, buf.get(), buf.get());
                for (Eigen::Index c2 = 0; c2 < nl; ++c2)
                    rec.k(static_cast<Eigen::Index>(i), c2) = a[rec.l_values[c2]];
            }
        });
        return rec;
    }

    if (j_half != 0)
        throw UnsupportedStateError("nonclassical signals are simulated for a single-mode LO only");
    std::vector<Gaussian2> wig(signal.size());
    for (std::size_t i = 0; i < signal.size(); ++i) {
        const auto kind = signal[i].state.kind;
        if (kind == StateKind::fock)
            throw UnsupportedStateError("spectral simulation supports Gaussian signal states only");
        wig[i] = wigner_gaussian(signal[i].state);
    }
    rec.noise_model = "linearized";
    const cplx beta = opt.lo[0];
    const double se = std::sqrt(eta), sl = std::sqrt(1.0 - eta);
    parallel_chunks(n, kStreamBlock, [&](std::size_t b, std::size_t e, std::size_t c) {
        Engine eng = make_stream(seed, c);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::normal_distribution<double> vac(0.0, 0.5);  // Re, Im of a vacuum amplitude
        std::uniform_real_distribution<double> uni(0.0, 2 * kPi);
        auto vacuum = [&] {
            const double re = vac(eng);
            return cplx(re, vac(eng));
        };
        for (std::size_t i = b; i < e; ++i) {
            const cplx common = opt.common_random_phase ? std::polar(1.0, uni(eng)) : cplx(1.0);
            for (Eigen::Index c2 = 0; c2 < nl; ++c2) {
                const int l = rec.l_values[c2];
                const int s = state_of[l + m_win];
                const cplx sig = s >= 0 ? common * wigner_amplitude(wig[s], eng, gauss) : vacuum();
                const cplx img = vacuum();
                const cplx b_l = se * sig + sl * vacuum();
                const cplx b_m = se * img + sl * vacuum();
                rec.k(static_cast<Eigen::Index>(i), c2) = se * (std::conj(beta) * b_l + beta * std::conj(b_m));
            }
        }
    });
    return rec;
}

namespace {

Histogram2D histogram(const VectorXd& x, const VectorXd& y, int bins, double range)
{
    Histogram2D h;
    const double w = 2 * range / bins;
    h.x_axis.resize(bins);
    for (int i = 0; i < bins; ++i)
        h.x_axis[i] = -range + (i + 0.5) * w;
    h.y_axis = h.x_axis;
    h.values = MatrixXd::Zero(bins, bins);
    double inside = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const int a = static_cast<int>(std::floor((x[i] + range) / w));
        const int b = static_cast<int>(std::floor((y[i] + range) / w));
        if (a < 0 || a >= bins || b < 0 || b >= bins)
            continue;
        h.values(a, b) += 1.0;
        inside += 1.0;
    }
    if (inside > 0)
        h.values /= inside * w * w;
    const double mx = x.mean(), my = y.mean();
    const double n = static_cast<double>(x.size());
    h.var_x = (x.array() - mx).square().sum() / (n - 1);
    h.var_y = (y.array() - my).square().sum() / (n - 1);
    const double cov = ((x.array() - mx) * (y.array() - my)).sum() / (n - 1);
    h.correlation = cov / std::sqrt(h.var_x * h.var_y);
    return h;
}

} // namespace

JointQ joint_q_histogram(const SpectralRecords& rec, int l, int l_other, int bins, double range)
{
    if (bins < 2 || !(range > 0.0))
        throw ConfigError("histogram needs at least 2 bins and a positive range");
    if (l == l_other)
        throw ConfigError("pair distribution needs two different modes");
    if (rec.size() < 2)
        throw DataError("need at least 2 records");
    const auto [q1, p1] = rec.scaled(l);
    const auto [q2, p2] = rec.scaled(l_other);
    (void)p2;
    JointQ out;
    out.single = histogram(q1, p1, bins, range);
    out.pair = histogram(q1, q2, bins, range);
    const double per_bin = static_cast<double>(rec.size()) / (double(bins) * bins);
    if (per_bin < 10.0) {
        std::ostringstream os;
        os << "only " << per_bin << " records per bin on average (fewer than 10)";
        out.warnings.push_back(os.str());
    }
    return out;
}

} // namespace ohtlab
