#include "ohtlab/pattern.hpp"

#include "ohtlab/errors.hpp"
#include "ohtlab/parallel.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ohtlab {

int PatternFunctionTable::index(int m, int n, int dim)
{
    if (m < n)
        std::swap(m, n);
    const int k = m - n;
    // bands stored consecutively: band k has dim - k entries
    int off = 0;
    for (int b = 0; b < k; ++b)
        off += dim - b;
    return off + n;
}

double PatternFunctionTable::eval(int m, int n, double q) const
{
    const auto& v = at(m, n);
    const double h = q_axis[1] - q_axis[0];
    const double f = (q - q_axis[0]) / h;
    if (f < 0 || f > q_axis.size() - 1)
        return 0.0;
    const auto j = std::min<Eigen::Index>(static_cast<Eigen::Index>(f), q_axis.size() - 2);
    const double t = f - j;
    return (1 - t) * v[j] + t * v[j + 1];
}

VectorXd simpson_weights(const VectorXd& axis)
{
    const auto n = axis.size();
    if (n < 3 || n % 2 == 0)
        throw ConfigError("Simpson rule needs an odd number of points (>= 3)");
    const double h = axis[1] - axis[0];
    VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i)
        w[i] = (i == 0 || i == n - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    return w * (h / 3.0);
}

PatternFunctionTable build_pattern_functions(int dim, const VectorXd& q_axis, double basis_exponent)
{
    if (dim < 1 || dim > kMaxPatternDim)
        throw ConfigError("pattern-function dimension must lie in [1, " + std::to_string(kMaxPatternDim) + "]");
    if (q_axis.size() < 3 || q_axis[0] > -8.0 || q_axis[q_axis.size() - 1] < 8.0)
        throw ConfigError("pattern-function axis must cover [-8, 8]");
    const VectorXd w = simpson_weights(q_axis);
    const auto npts = q_axis.size();
    // psi up to 2 dim - 1 for the parity-matched basis
    const MatrixXd psi = hermite_table(2 * dim, q_axis);
    VectorXd gauss(npts);
    for (Eigen::Index j = 0; j < npts; ++j)
        gauss[j] = std::exp(-0.5 * q_axis[j] * q_axis[j]);

    PatternFunctionTable t;
    t.dim = dim;
    t.basis_exponent = basis_exponent;
    t.q_axis = q_axis;
    t.values.resize(dim * (dim + 1) / 2);
    t.band_condition.assign(dim, 0.0);
    std::vector<std::string> failures(dim);

    parallel_chunks(static_cast<std::size_t>(dim), 1, [&](std::size_t b, std::size_t, std::size_t) {
        const int k = static_cast<int>(b);
        const int nk = dim - k;
        MatrixXd phi(nk, npts), chi(nk, npts);
        for (int v = 0; v < nk; ++v) {
            const int m = 2 * v + (k % 2);
            const double scale = std::pow(2.0 * v + 1.0, basis_exponent);
            phi.row(v) = scale * psi.row(m).cwiseProduct(gauss.transpose());
            chi.row(v) = psi.row(v + k).cwiseProduct(psi.row(v));
        }
        const MatrixXd gram = phi * w.asDiagonal() * chi.transpose();  // (mu, nu)
        Eigen::JacobiSVD<MatrixXd> svd(gram);
        const auto& sv = svd.singularValues();
        const double cond = sv[sv.size() - 1] > 0 ? sv[0] / sv[sv.size() - 1] : INFINITY;
        t.band_condition[k] = cond;
        if (!(cond <= 1e12)) {
            std::ostringstream os;
            os << "Gram matrix of band " << k << " has condition number " << cond
               << "; use a smaller dimension or a different basis exponent";
            failures[k] = os.str();
            return;
        }
        // M_{n+k,n} = sum_v C(n, v) phi_v with C gram^T = I, i.e. int M_n chi_v = delta
        const MatrixXd c = gram.transpose().fullPivLu().solve(MatrixXd::Identity(nk, nk)).transpose();
        const MatrixXd m = c * phi;
        for (int n = 0; n < nk; ++n)
            t.values[PatternFunctionTable::index(n + k, n, dim)] = m.row(n).transpose();
    });
    for (const auto& f : failures)
        if (!f.empty())
            throw NumericalError(f);
    return t;
}

PatternFunctionTable build_pattern_functions(int dim, double basis_exponent)
{
    return build_pattern_functions(dim, linspace(-8.0, 8.0, 4097), basis_exponent);
}

int folded_phase_count(const VectorXd& theta, double tol)
{
    std::vector<double> f;
    f.reserve(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        double th = std::fmod(theta[i], kPi);
        if (th < 0)
            th += kPi;
        if (kPi - th <= tol)
            th = 0.0;
        f.push_back(th);
    }
    std::sort(f.begin(), f.end());
    int count = 0;
    double last = -1.0;
    for (double v : f)
        if (count == 0 || v - last > tol) {
            ++count;
            last = v;
        }
    return count;
}

RhoEstimate rho_from_quadratures(const VectorXd& theta, const VectorXd& q, const PatternFunctionTable& pf,
                                 int d_phases, int n_max)
{
    if (n_max < 0)
        n_max = pf.dim - 1;
    if (n_max >= pf.dim)
        throw ConfigError("n_max exceeds the pattern-function table");
    const int dim = n_max + 1;
    if (theta.size() != q.size() || q.size() == 0)
        throw DataError("dataset is empty or inconsistent");
    if (d_phases < 0)
        throw ConfigError("d_phases must be non-negative");
    if (d_phases > 0 && d_phases < n_max + 1) {
        std::ostringstream os;
        os << "reconstructing up to n = " << n_max << " needs at least " << n_max + 1
           << " equally spaced phases over [0, pi); got d = " << d_phases;
        throw AliasingError(os.str());
    }
    const int nb = d_phases > 0 ? d_phases : 1;
    const double width = kPi / std::max(d_phases, 1);
    const int n_el = dim * (dim + 1) / 2;
    std::vector<const VectorXd*> table;
    for (int k = 0; k < dim; ++k)
        for (int m = 0; m < dim - k; ++m)
            table.push_back(&pf.at(m + k, m));
    const std::size_t n = static_cast<std::size_t>(q.size());

    // per bin: count, sum X, sum (Re X)^2, sum (Im X)^2, per element
    const std::size_t chunk = 8192;
    const std::size_t n_chunks = (n + chunk - 1) / chunk;
    struct Acc {
        std::vector<double> cnt;
        MatrixXcd sum;
        MatrixXd sre2, sim2;
    };
    std::vector<Acc> parts(n_chunks);
    std::vector<int> off_phase(n_chunks, 0);
    const double h = pf.q_axis[1] - pf.q_axis[0];
    const double q0 = pf.q_axis[0];
    const auto npts = pf.q_axis.size();
    parallel_chunks(n, chunk, [&](std::size_t b, std::size_t e, std::size_t c) {
        Acc a;
        a.cnt.assign(nb, 0.0);
        a.sum = MatrixXcd::Zero(n_el, nb);
        a.sre2 = MatrixXd::Zero(n_el, nb);
        a.sim2 = MatrixXd::Zero(n_el, nb);
        std::vector<cplx> ph(dim);
        for (std::size_t i = b; i < e; ++i) {
            double th = std::fmod(theta[i], 2 * kPi);
            if (th < 0)
                th += 2 * kPi;
            double x = q[i];
            if (th >= kPi) {
                th -= kPi;
                x = -x;
            }
            int bin = 0;
            if (d_phases > 0) {
                bin = static_cast<int>(std::lround(th / width));
                if (bin >= d_phases) {
                    bin = 0;
                    th -= kPi;
                    x = -x;
                }
                if (std::abs(th - bin * width) > 0.25 * width) {
                    ++off_phase[c];
                    continue;
                }
            }
            const double f = (x - q0) / h;
            a.cnt[bin] += 1.0;
            if (f < 0 || f > npts - 1)
                continue;  // every M_mn vanishes outside the table
            const auto j = std::min<Eigen::Index>(static_cast<Eigen::Index>(f), npts - 2);
            const double t = f - j;
            for (int k = 0; k < dim; ++k)
                ph[k] = std::polar(1.0, k * th);
            int idx = 0;
            for (int k = 0; k < dim; ++k)
                for (int m = 0; m < dim - k; ++m, ++idx) {
                    const VectorXd& v = *table[idx];
                    const double mv = (1 - t) * v[j] + t * v[j + 1];
                    const cplx xv = ph[k] * mv;
                    a.sum(idx, bin) += xv;
                    a.sre2(idx, bin) += xv.real() * xv.real();
                    a.sim2(idx, bin) += xv.imag() * xv.imag();
                }
        }
        parts[c] = std::move(a);
    });
    int off = 0;
    for (int v : off_phase)
        off += v;
    if (off > 0) {
        std::ostringstream os;
        os << off << " samples are not on a " << d_phases << "-point phase grid over [0, pi)";
        throw DataError(os.str());
    }
    Acc tot = parts[0];
    for (std::size_t c = 1; c < n_chunks; ++c) {
        for (int b = 0; b < nb; ++b)
            tot.cnt[b] += parts[c].cnt[b];
        tot.sum += parts[c].sum;
        tot.sre2 += parts[c].sre2;
        tot.sim2 += parts[c].sim2;
    }
    int filled = 0;
    for (int b = 0; b < nb; ++b)
        filled += tot.cnt[b] > 0;
    if (filled < nb) {
        std::ostringstream os;
        os << "only " << filled << " of " << nb << " phases carry data; at least " << n_max + 1
           << " distinct phases over [0, pi) are needed";
        if (filled < n_max + 1)
            throw AliasingError(os.str());
        throw DataError(os.str());
    }

    MatrixXcd rho = MatrixXcd::Zero(dim, dim), err = MatrixXcd::Zero(dim, dim);
    int idx = 0;
    for (int k = 0; k < dim; ++k)
        for (int m = 0; m < dim - k; ++m, ++idx) {
            cplx est = 0.0;
            double vre = 0.0, vim = 0.0;
            for (int b = 0; b < nb; ++b) {
                const double c = tot.cnt[b];
                const cplx mean = tot.sum(idx, b) / c;
                est += mean;
                if (c > 1) {
                    vre += (tot.sre2(idx, b) / c - mean.real() * mean.real()) * c / (c - 1) / c;
                    vim += (tot.sim2(idx, b) / c - mean.imag() * mean.imag()) * c / (c - 1) / c;
                }
            }
            est /= static_cast<double>(nb);
            const double sre = std::sqrt(std::max(vre, 0.0)) / nb, sim = std::sqrt(std::max(vim, 0.0)) / nb;
            rho(m + k, m) = est;
            rho(m, m + k) = std::conj(est);
            err(m + k, m) = cplx(sre, sim);
            err(m, m + k) = cplx(sre, sim);
        }
    RhoEstimate r;
    r.rho = DensityMatrix(rho, false);
    r.errors = err;
    r.phases_used = nb;
    return r;
}

RhoEstimate rho_from_quadratures(const QuadratureDataset& ds, const PatternFunctionTable& pf, int d_phases,
                                 int n_max)
{
    return rho_from_quadratures(ds.theta, ds.q, pf, d_phases, n_max);
}

PhotonNumberEstimate pn_phase_averaged(const QuadratureDataset& ds, const PatternFunctionTable& pf)
{
    const std::size_t n = ds.size();
    if (n < 2)
        throw DataError("need at least 2 samples");
    if (ds.meta.schedule.kind == ScheduleKind::grid) {
        const int distinct = folded_phase_count(ds.theta);
        if (distinct < pf.dim) {
            std::ostringstream os;
            os << "phase grid has " << distinct << " distinct phases over [0, pi); photon numbers up to "
               << pf.dim - 1 << " need " << pf.dim;
            throw AliasingError(os.str());
        }
    }
    const int dim = pf.dim;
    const std::size_t chunk = 8192;
    const std::size_t n_chunks = (n + chunk - 1) / chunk;
    std::vector<VectorXd> s1(n_chunks), s2(n_chunks);
    parallel_chunks(n, chunk, [&](std::size_t b, std::size_t e, std::size_t c) {
        VectorXd a = VectorXd::Zero(dim), a2 = VectorXd::Zero(dim);
        for (std::size_t i = b; i < e; ++i)
            for (int k = 0; k < dim; ++k) {
                const double m = pf.eval(k, k, ds.q[i]);
                a[k] += m;
                a2[k] += m * m;
            }
        s1[c] = a;
        s2[c] = a2;
    });
    VectorXd t1 = VectorXd::Zero(dim), t2 = VectorXd::Zero(dim);
    for (std::size_t c = 0; c < n_chunks; ++c) {
        t1 += s1[c];
        t2 += s2[c];
    }
    PhotonNumberEstimate out;
    const double nn = static_cast<double>(n);
    out.p = t1 / nn;
    out.std_err.resize(dim);
    for (int k = 0; k < dim; ++k)
        out.std_err[k] = std::sqrt(std::max(t2[k] / nn - out.p[k] * out.p[k], 0.0) / nn);
    out.bound = 2.0 / std::sqrt(nn);
    return out;
}

} // namespace ohtlab
