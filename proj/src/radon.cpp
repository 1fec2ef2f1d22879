#include "ohtlab/radon.hpp"

#include "ohtlab/errors.hpp"
#include "ohtlab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace ohtlab {

void RadonConfig::validate() const
{
    if (!(k_cutoff > 0.0))
        throw ConfigError("k_cutoff must be positive");
    if (n_phase_bins < 2)
        throw ConfigError("n_phase_bins must be at least 2");
    if (n_hist_bins < 8 || !(hist_max > hist_min))
        throw ConfigError("histogram window is degenerate");
    if (!(rolloff_fraction >= 0.0 && rolloff_fraction < 1.0))
        throw ConfigError("rolloff_fraction must lie in [0, 1)");
    if (grid.n_q < 2 || grid.n_p < 2 || !(grid.q_max > grid.q_min) || !(grid.p_max > grid.p_min))
        throw ConfigError("reconstruction grid is degenerate");
}

FilterKernel filter_kernel_from_name(const std::string& name)
{
    if (name == "ram-lak")
        return FilterKernel::ram_lak;
    if (name == "ram-lak-with-cosine-rolloff" || name == "ram-lak-cosine")
        return FilterKernel::ram_lak_cosine;
    throw ConfigError("unknown filter kernel '" + name + "'");
}

std::string filter_kernel_name(FilterKernel k)
{
    return k == FilterKernel::ram_lak ? "ram-lak" : "ram-lak-with-cosine-rolloff";
}

double filter_window(const RadonConfig& cfg, double xi)
{
    xi = std::abs(xi);
    if (xi >= cfg.k_cutoff)
        return 0.0;
    if (cfg.kernel == FilterKernel::ram_lak || cfg.rolloff_fraction == 0.0)
        return 1.0;
    const double start = (1.0 - cfg.rolloff_fraction) * cfg.k_cutoff;
    if (xi <= start)
        return 1.0;
    return 0.5 * (1.0 + std::cos(kPi * (xi - start) / (cfg.k_cutoff - start)));
}

PhaseBinning bin_by_phase(const VectorXd& theta, const VectorXd& q, int n_bins)
{
    if (theta.size() != q.size())
        throw DataError("theta and q have different lengths");
    PhaseBinning b;
    b.q.assign(n_bins, {});
    b.mean_theta.assign(n_bins, 0.0);
    b.counts.assign(n_bins, 0);
    const double width = kPi / n_bins;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        double th = std::fmod(theta[i], 2 * kPi);
        if (th < 0)
            th += 2 * kPi;
        double x = q[i];
        if (th >= kPi) {  // Pr(q, theta + pi) = Pr(-q, theta)
            th -= kPi;
            x = -x;
        }
        int k = static_cast<int>(std::lround(th / width));
        if (k >= n_bins) {
            k = 0;
            th -= kPi;
            x = -x;
        }
        b.q[k].push_back(x);
        b.mean_theta[k] += th;
        ++b.counts[k];
    }
    std::vector<int> missing;
    for (int k = 0; k < n_bins; ++k) {
        if (b.counts[k] == 0)
            missing.push_back(k);
        else
            b.mean_theta[k] /= static_cast<double>(b.counts[k]);
    }
    if (!missing.empty()) {
        std::ostringstream os;
        os << "empty phase bins (of " << n_bins << "):";
        for (int k : missing)
            os << ' ' << k;
        throw DataError(os.str());
    }
    return b;
}

namespace {

// Reconstruction engine shared by the direct and bootstrap paths. The filtered
// projection of a piecewise-constant histogram is exact given the antiderivative
// of the band-limited kernel, tabulated at multiples of a sub-bin step.
class Backprojector {
public:
    explicit Backprojector(const RadonConfig& cfg) : cfg_(cfg)
    {
        cfg.validate();
        hist_w_ = (cfg.hist_max - cfg.hist_min) / cfg.n_hist_bins;
        step_ = hist_w_ / kSub;
        q_ax_ = cfg.grid.q_axis();
        p_ax_ = cfg.grid.p_axis();
        const double reach = std::hypot(std::max(std::abs(cfg.grid.q_min), std::abs(cfg.grid.q_max)),
                                        std::max(std::abs(cfg.grid.p_min), std::abs(cfg.grid.p_max)));
        n_t_ = static_cast<int>(std::ceil(reach / step_)) + 2;  // t grid: -n_t..n_t
        // antiderivative G(t) = (1/(2 pi^2)) int_0^kc A(xi) sin(xi t) dxi, needed
        // for |t| up to reach + histogram half-width
        const int n_g = n_t_ + static_cast<int>(std::ceil((std::max(std::abs(cfg.hist_min), std::abs(cfg.hist_max)) +
                                                           hist_w_) / step_)) + kSub;
        g_off_ = n_g;
        g_.assign(2 * n_g + 1, 0.0);
        const int n_xi = 4000;  // Simpson panels
        const double h = cfg.k_cutoff / n_xi;
        std::vector<double> wxi(n_xi + 1);
        for (int j = 0; j <= n_xi; ++j) {
            const double s = (j == 0 || j == n_xi) ? 1.0 : (j % 2 ? 4.0 : 2.0);
            wxi[j] = s * h / 3.0 * filter_window(cfg, j * h) / (2 * kPi * kPi);
        }
        for (int m = 1; m <= n_g; ++m) {
            const double t = m * step_;
            double s = 0.0;
            for (int j = 1; j <= n_xi; ++j)
                s += wxi[j] * std::sin(j * h * t);
            g_[g_off_ + m] = s;
            g_[g_off_ - m] = -s;
        }
        // response of one histogram bin of unit density centred on a bin centre,
        // at offsets that are multiples of step
        kern_off_ = n_g - kSub;
        kern_.assign(2 * kern_off_ + 1, 0.0);
        for (int m = -kern_off_; m <= kern_off_; ++m)
            kern_[kern_off_ + m] = g_[g_off_ + m + kSub / 2] - g_[g_off_ + m - kSub / 2];
    }

    /// Unnormalized reconstruction from per-bin samples.
    MatrixXd run(const std::vector<const std::vector<double>*>& bins, const std::vector<double>& angles,
                 std::size_t* out_of_range) const
    {
        const int nb = static_cast<int>(bins.size());
        const int nt = 2 * n_t_ + 1;
        // t grid t_j = (j - n_t) * step; bin centres x_i = hist_min + (i + 1/2) w.
        // Offsets (t_j - x_i)/step are integers when hist_min/step + kSub/2 is.
        const double origin = cfg_.hist_min / step_ + kSub / 2.0;
        const long shift = std::lround(origin);
        const bool aligned = std::abs(origin - shift) < 1e-9;
        MatrixXd filtered(nt, nb);
        std::size_t dropped = 0;
        for (int b = 0; b < nb; ++b) {
            std::vector<double> hist(cfg_.n_hist_bins, 0.0);
            const auto& xs = *bins[b];
            for (double x : xs) {
                const double f = (x - cfg_.hist_min) / hist_w_;
                if (f < 0 || f >= cfg_.n_hist_bins) {
                    ++dropped;
                    continue;
                }
                hist[static_cast<int>(f)] += 1.0;
            }
            const double norm = xs.empty() ? 0.0 : 1.0 / (static_cast<double>(xs.size()) * hist_w_);
            for (int j = 0; j < nt; ++j) {
                double s = 0.0;
                for (int i = 0; i < cfg_.n_hist_bins; ++i) {
                    if (hist[i] == 0.0)
                        continue;
                    double v;
                    if (aligned) {
                        const long m = (j - n_t_) - (shift + static_cast<long>(i) * kSub);
                        v = kern_[kern_off_ + m];
                    } else {
                        const double t = (j - n_t_) * step_ - (cfg_.hist_min + (i + 0.5) * hist_w_);
                        v = kernel_at(t);
                    }
                    s += hist[i] * v;
                }
                filtered(j, b) = s * norm * hist_w_;
            }
        }
        if (out_of_range)
            *out_of_range = dropped;
        // back-projection, rows in parallel with fixed per-pixel summation order
        const double dtheta = kPi / nb;
        std::vector<double> cs(nb), sn(nb);
        for (int b = 0; b < nb; ++b) {
            cs[b] = std::cos(angles[b]);
            sn[b] = std::sin(angles[b]);
        }
        MatrixXd out(q_ax_.size(), p_ax_.size());
        parallel_chunks(static_cast<std::size_t>(q_ax_.size()), 8, [&](std::size_t lo, std::size_t hi, std::size_t) {
            for (std::size_t i = lo; i < hi; ++i)
                for (Eigen::Index j = 0; j < p_ax_.size(); ++j) {
                    double s = 0.0;
                    for (int b = 0; b < nb; ++b) {
                        const double t = q_ax_[i] * cs[b] + p_ax_[j] * sn[b];
                        const double f = t / step_ + n_t_;
                        int k = static_cast<int>(std::floor(f));
                        k = std::clamp(k, 0, nt - 2);
                        const double a = f - k;
                        s += (1 - a) * filtered(k, b) + a * filtered(k + 1, b);
                    }
                    out(i, j) = s * dtheta;
                }
        });
        return out;
    }

    WignerGrid normalized(const MatrixXd& v) const
    {
        WignerGrid w;
        w.q_axis = q_ax_;
        w.p_axis = p_ax_;
        w.values = v;
        const double integ = w.integral();
        if (!(std::abs(integ) > 1e-12))
            throw NumericalError("reconstruction integrates to zero; grid misses the state");
        w.values /= integ;
        return w;
    }

private:
    static constexpr int kSub = 8;

    double kernel_at(double t) const
    {
        const double lo = (t - hist_w_ / 2) / step_, hi = (t + hist_w_ / 2) / step_;
        return interp_g(hi) - interp_g(lo);
    }
    double interp_g(double f) const
    {
        const int k = static_cast<int>(std::floor(f));
        const int idx = std::clamp(k + g_off_, 0, static_cast<int>(g_.size()) - 2);
        const double a = f - k;
        return (1 - a) * g_[idx] + a * g_[idx + 1];
    }

    RadonConfig cfg_;
    double hist_w_, step_;
    int n_t_, g_off_, kern_off_;
    std::vector<double> g_, kern_;
    VectorXd q_ax_, p_ax_;
};

} // namespace

RadonResult filtered_backprojection(const VectorXd& theta, const VectorXd& q, const RadonConfig& cfg)
{
    cfg.validate();
    const PhaseBinning bins = bin_by_phase(theta, q, cfg.n_phase_bins);
    const Backprojector bp(cfg);
    std::vector<const std::vector<double>*> ptr;
    for (const auto& v : bins.q)
        ptr.push_back(&v);
    RadonResult r;
    r.wigner = bp.normalized(bp.run(ptr, bins.mean_theta, &r.out_of_range));
    r.bin_counts = bins.counts;
    r.bin_theta = bins.mean_theta;
    for (auto c : bins.counts)
        if (c < cfg.min_samples_per_bin)
            r.low_count_warning = true;
    return r;
}

RadonResult filtered_backprojection(const QuadratureDataset& ds, const RadonConfig& cfg)
{
    if (ds.size() == 0)
        throw DataError("empty dataset");
    return filtered_backprojection(ds.theta, ds.q, cfg);
}

WignerGrid bootstrap_stderr(const QuadratureDataset& ds, const RadonConfig& cfg, int n_resamples, std::uint64_t seed)
{
    if (n_resamples < 2)
        throw ConfigError("bootstrap needs at least 2 resamples");
    cfg.validate();
    const PhaseBinning bins = bin_by_phase(ds.theta, ds.q, cfg.n_phase_bins);
    const Backprojector bp(cfg);
    const int nb = cfg.n_phase_bins;
    MatrixXd sum, sum2;
    std::vector<std::vector<double>> res(nb);
    std::vector<const std::vector<double>*> ptr(nb);
    for (int r = 0; r < n_resamples; ++r) {
        Engine eng = make_stream(seed, static_cast<std::uint64_t>(r));
        for (int b = 0; b < nb; ++b) {
            const auto& src = bins.q[b];
            std::uniform_int_distribution<std::size_t> pick(0, src.size() - 1);
            res[b].resize(src.size());
            for (auto& v : res[b])
                v = src[pick(eng)];
            ptr[b] = &res[b];
        }
        const WignerGrid w = bp.normalized(bp.run(ptr, bins.mean_theta, nullptr));
        if (r == 0) {
            sum = w.values;
            sum2 = w.values.cwiseProduct(w.values);
        } else {
            sum += w.values;
            sum2 += w.values.cwiseProduct(w.values);
        }
    }
    WignerGrid out;
    out.q_axis = cfg.grid.q_axis();
    out.p_axis = cfg.grid.p_axis();
    const double n = n_resamples;
    const MatrixXd mean = sum / n;
    out.values = ((sum2 / n - mean.cwiseProduct(mean)) * (n / (n - 1))).cwiseMax(0.0).cwiseSqrt();
    return out;
}

namespace {

std::vector<double> gauss_weights(double sigma, double h, int& half)
{
    half = static_cast<int>(std::ceil(8.0 * sigma / h));
    std::vector<double> w(2 * half + 1);
    double s = 0.0;
    for (int k = -half; k <= half; ++k) {
        const double x = k * h / sigma;
        w[k + half] = std::exp(-0.5 * x * x);
        s += w[k + half];
    }
    for (auto& v : w)
        v /= s;
    return w;
}

} // namespace

WignerGrid loss_smoothing(const WignerGrid& w, double eta)
{
    if (!(eta > 0.0 && eta < 1.0))
        throw ConfigError("loss_smoothing needs 0 < eta < 1");
    const double sigma = std::sqrt(0.5 * (1.0 / eta - 1.0));
    const Eigen::Index nq = w.values.rows(), np = w.values.cols();
    int hq = 0, hp = 0;
    const auto kq = gauss_weights(sigma, w.dq(), hq);
    const auto kp = gauss_weights(sigma, w.dp(), hp);
    MatrixXd tmp = MatrixXd::Zero(nq, np), out = MatrixXd::Zero(nq, np);
    for (Eigen::Index i = 0; i < nq; ++i)
        for (int k = -hq; k <= hq; ++k) {
            const Eigen::Index s = i + k;
            if (s < 0 || s >= nq)
                continue;
            tmp.row(i) += kq[k + hq] * w.values.row(s);
        }
    for (Eigen::Index j = 0; j < np; ++j)
        for (int k = -hp; k <= hp; ++k) {
            const Eigen::Index s = j + k;
            if (s < 0 || s >= np)
                continue;
            out.col(j) += kp[k + hp] * tmp.col(s);
        }
    WignerGrid r = w;
    r.values = out;
    const double integ = r.integral();
    if (std::abs(integ) > 1e-300)
        r.values /= integ;
    return r;
}

namespace {

// 4-point Lagrange weights for fractional offset t in [0,1) around nodes -1..2.
inline void lagrange4(double t, double* c)
{
    c[0] = -t * (t - 1) * (t - 2) / 6.0;
    c[1] = (t + 1) * (t - 1) * (t - 2) / 2.0;
    c[2] = -(t + 1) * t * (t - 2) / 2.0;
    c[3] = (t + 1) * t * (t - 1) / 6.0;
}

double cubic_at(const WignerGrid& w, double q, double p)
{
    const Eigen::Index nq = w.values.rows(), np = w.values.cols();
    const double fq = (q - w.q_axis[0]) / w.dq(), fp = (p - w.p_axis[0]) / w.dp();
    if (fq < 0 || fp < 0 || fq > nq - 1 || fp > np - 1)
        return 0.0;
    if (nq < 4 || np < 4)
        return w.at(q, p);
    Eigen::Index i = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(fq), 1, nq - 3);
    Eigen::Index j = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(fp), 1, np - 3);
    double cq[4], cp[4];
    lagrange4(fq - i, cq);
    lagrange4(fp - j, cp);
    double s = 0.0;
    for (int a = 0; a < 4; ++a) {
        double r = 0.0;
        for (int b = 0; b < 4; ++b)
            r += cp[b] * w.values(i - 1 + a, j - 1 + b);
        s += cq[a] * r;
    }
    return s;
}

} // namespace

VectorXd radon_forward(const WignerGrid& w, double theta, const VectorXd& x_axis)
{
    const double c = std::cos(theta), s = std::sin(theta);
    const double h = std::min(w.dq(), w.dp());
    const double reach = std::hypot(std::max(std::abs(w.q_axis[0]), std::abs(w.q_axis[w.q_axis.size() - 1])),
                                    std::max(std::abs(w.p_axis[0]), std::abs(w.p_axis[w.p_axis.size() - 1])));
    const int ny = static_cast<int>(std::ceil(reach / h));
    VectorXd out(x_axis.size());
    for (Eigen::Index k = 0; k < x_axis.size(); ++k) {
        const double x = x_axis[k];
        double sum = 0.0;
        for (int m = -ny; m <= ny; ++m) {
            const double y = m * h;
            sum += cubic_at(w, x * c - y * s, x * s + y * c);
        }
        out[k] = sum * h;
    }
    return out;
}

VectorXd radon_forward(const WignerGrid& w, double theta) { return radon_forward(w, theta, w.q_axis); }

} // namespace ohtlab
