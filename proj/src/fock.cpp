#include "ohtlab/fock.hpp"

#include "ohtlab/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace ohtlab {

namespace {

constexpr double kRescale = 1e150;

void check_state_spec(const StateSpec& s)
{
    if (s.truncation_dim < 1 || s.truncation_dim > kMaxTruncation)
        throw ConfigError("truncation_dim must be in [1, " + std::to_string(kMaxTruncation) + "]");
    if (s.kind == StateKind::fock && s.n < 0)
        throw ConfigError("fock index must be non-negative");
    if (s.kind == StateKind::thermal && !(s.nbar >= 0.0 && std::isfinite(s.nbar)))
        throw ConfigError("thermal mean photon number must be finite and >= 0");
    if (!std::isfinite(s.r) || s.r < 0.0 || !std::isfinite(s.phi))
        throw ConfigError("squeeze parameters must be finite with r >= 0");
    if (!std::isfinite(s.alpha.real()) || !std::isfinite(s.alpha.imag()))
        throw ConfigError("coherent amplitude must be finite");
}

// Normalized associated Laguerre functions
//   l_m(x) = sqrt(m!/(m+k)!) x^(k/2) e^(-x/2) L_m^(k)(x),  m = 0..m_max.
void laguerre_functions(int k, int m_max, double x, double* out)
{
    double l0;
    if (x <= 0.0)
        l0 = (k == 0) ? 1.0 : 0.0;
    else
        l0 = std::exp(0.5 * k * std::log(x) - 0.5 * x - 0.5 * std::lgamma(k + 1.0));
    out[0] = l0;
    if (m_max == 0)
        return;
    out[1] = l0 * (1.0 + k - x) / std::sqrt(k + 1.0);
    for (int m = 1; m < m_max; ++m) {
        const double a = std::sqrt((m + 1.0) / (m + k + 1.0));
        const double b = std::sqrt((m + 1.0) * m / ((m + k + 1.0) * (m + k)));
        out[m + 1] = ((2.0 * m + 1.0 + k - x) * a * out[m] - (m + k) * b * out[m - 1]) / (m + 1.0);
    }
}

// Trapezoid weight for index i of n points.
inline double trap_w(Eigen::Index i, Eigen::Index n) { return (i == 0 || i == n - 1) ? 0.5 : 1.0; }

} // namespace

VectorXd linspace(double lo, double hi, int n)
{
    if (n < 1)
        throw ConfigError("grid needs at least one point");
    if (n == 1)
        return VectorXd::Constant(1, lo);
    return VectorXd::LinSpaced(n, lo, hi);
}

double DensityMatrix::purity() const { return (elements * elements).trace().real(); }

double DensityMatrix::hermiticity_error() const
{
    return (elements - elements.adjoint()).cwiseAbs().maxCoeff();
}

double DensityMatrix::min_eigenvalue() const
{
    MatrixXcd h = 0.5 * (elements + elements.adjoint());
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double DensityMatrix::mean_photon() const
{
    double s = 0.0;
    for (int n = 0; n < dim(); ++n)
        s += n * elements(n, n).real();
    return s;
}

double WignerGrid::at(double q, double p) const
{
    const auto nq = q_axis.size(), np = p_axis.size();
    if (nq < 2 || np < 2)
        return 0.0;
    const double fq = (q - q_axis[0]) / dq(), fp = (p - p_axis[0]) / dp();
    if (fq < 0 || fp < 0 || fq > nq - 1 || fp > np - 1)
        return 0.0;
    const auto i = std::min<Eigen::Index>(static_cast<Eigen::Index>(fq), nq - 2);
    const auto j = std::min<Eigen::Index>(static_cast<Eigen::Index>(fp), np - 2);
    const double tq = fq - i, tp = fp - j;
    return (1 - tq) * (1 - tp) * values(i, j) + tq * (1 - tp) * values(i + 1, j) +
           (1 - tq) * tp * values(i, j + 1) + tq * tp * values(i + 1, j + 1);
}

StateSpec StateSpec::vacuum() { return {}; }

StateSpec StateSpec::fock(int n)
{
    StateSpec s;
    s.kind = StateKind::fock;
    s.n = n;
    return s;
}

StateSpec StateSpec::coherent(cplx alpha)
{
    StateSpec s;
    s.kind = StateKind::coherent;
    s.alpha = alpha;
    return s;
}

StateSpec StateSpec::thermal(double nbar)
{
    StateSpec s;
    s.kind = StateKind::thermal;
    s.nbar = nbar;
    return s;
}

StateSpec StateSpec::squeezed_vacuum(double r, double phi)
{
    StateSpec s;
    s.kind = StateKind::squeezed_vacuum;
    s.r = r;
    s.phi = phi;
    return s;
}

StateSpec StateSpec::squeezed_coherent(double r, double phi, cplx alpha)
{
    StateSpec s;
    s.kind = StateKind::squeezed_coherent;
    s.r = r;
    s.phi = phi;
    s.alpha = alpha;
    return s;
}

std::string StateSpec::name() const
{
    switch (kind) {
    case StateKind::vacuum: return "vacuum";
    case StateKind::fock: return "fock";
    case StateKind::coherent: return "coherent";
    case StateKind::thermal: return "thermal";
    case StateKind::squeezed_vacuum: return "squeezed_vacuum";
    case StateKind::squeezed_coherent: return "squeezed_coherent";
    }
    return "unknown";
}

StateKind state_kind_from_name(const std::string& name)
{
    if (name == "vacuum") return StateKind::vacuum;
    if (name == "fock") return StateKind::fock;
    if (name == "coherent") return StateKind::coherent;
    if (name == "thermal") return StateKind::thermal;
    if (name == "squeezed_vacuum") return StateKind::squeezed_vacuum;
    if (name == "squeezed_coherent") return StateKind::squeezed_coherent;
    throw ConfigError("unknown state kind '" + name + "'");
}

void hermite_psi_point(int n_max, double q, double* out)
{
    if (n_max < 0 || n_max > kMaxHermiteIndex)
        throw ConfigError("hermite index " + std::to_string(n_max) + " outside the supported range [0, " +
                          std::to_string(kMaxHermiteIndex) + "]");
    if (!std::isfinite(q))
        throw ConfigError("hermite_psi: non-finite abscissa");
    // psi_k = h_k * exp(log_scale); h is rescaled whenever it grows large.
    double log_scale = -0.5 * q * q;
    double h_prev = 0.0, h = std::pow(kPi, -0.25);
    auto emit = [&](int k, double v) {
        if (v == 0.0) {
            out[k] = 0.0;
            return;
        }
        out[k] = std::copysign(std::exp(std::log(std::abs(v)) + log_scale), v);
    };
    emit(0, h);
    for (int k = 0; k < n_max; ++k) {
        const double h_next = std::sqrt(2.0 / (k + 1.0)) * q * h - std::sqrt(k / (k + 1.0)) * h_prev;
        h_prev = h;
        h = h_next;
        if (std::abs(h) > kRescale) {
            h /= kRescale;
            h_prev /= kRescale;
            log_scale += std::log(kRescale);
        }
        emit(k + 1, h);
    }
}

MatrixXd hermite_table(int n_max, const VectorXd& q_axis)
{
    MatrixXd t(n_max + 1, q_axis.size());
    std::vector<double> buf(n_max + 1);
    for (Eigen::Index j = 0; j < q_axis.size(); ++j) {
        hermite_psi_point(n_max, q_axis[j], buf.data());
        for (int n = 0; n <= n_max; ++n)
            t(n, j) = buf[n];
    }
    return t;
}

VectorXd hermite_psi(int n, const VectorXd& q_axis) { return hermite_table(n, q_axis).row(n).transpose(); }

VectorXcd state_amplitudes(const StateSpec& spec, int dim)
{
    check_state_spec(spec);
    VectorXcd c = VectorXcd::Zero(dim);
    switch (spec.kind) {
    case StateKind::vacuum:
        c[0] = 1.0;
        break;
    case StateKind::fock:
        if (spec.n < dim)
            c[spec.n] = 1.0;
        break;
    case StateKind::coherent: {
        c[0] = std::exp(-0.5 * std::norm(spec.alpha));
        for (int n = 1; n < dim; ++n)
            c[n] = c[n - 1] * spec.alpha / std::sqrt(static_cast<double>(n));
        break;
    }
    case StateKind::squeezed_vacuum: {
        const cplx ratio = -std::polar(std::tanh(spec.r), spec.phi);
        c[0] = 1.0 / std::sqrt(std::cosh(spec.r));
        for (int n = 2; n < dim; n += 2)
            c[n] = c[n - 2] * ratio * std::sqrt((n - 1.0) / n);
        break;
    }
    case StateKind::squeezed_coherent: {
        // Eigenvector of (a cosh r + a^dagger e^{i phi} sinh r) with eigenvalue gamma.
        const double ch = std::cosh(spec.r), sh = std::sinh(spec.r);
        const cplx e = std::polar(1.0, spec.phi);
        const cplx a = spec.alpha;
        const cplx gamma = a * ch + std::conj(a) * e * sh;
        c[0] = std::exp(-0.5 * std::norm(a) - 0.5 * std::conj(a) * std::conj(a) * e * std::tanh(spec.r)) /
               std::sqrt(ch);
        for (int n = 0; n + 1 < dim; ++n) {
            const cplx prev = n > 0 ? c[n - 1] : cplx{0, 0};
            c[n + 1] = (gamma * c[n] - e * sh * std::sqrt(static_cast<double>(n)) * prev) /
                       (ch * std::sqrt(n + 1.0));
        }
        break;
    }
    case StateKind::thermal:
        throw UnsupportedStateError("thermal state has no pure-state amplitudes");
    }
    return c;
}

double truncation_leak(const StateSpec& spec, int dim)
{
    check_state_spec(spec);
    switch (spec.kind) {
    case StateKind::vacuum: return 0.0;
    case StateKind::fock: return spec.n < dim ? 0.0 : 1.0;
    case StateKind::thermal: return std::pow(spec.nbar / (spec.nbar + 1.0), dim);
    default: return std::max(0.0, 1.0 - state_amplitudes(spec, dim).squaredNorm());
    }
}

DensityMatrix make_state(const StateSpec& spec)
{
    check_state_spec(spec);
    constexpr double kLeak = 1e-6;
    int dim = spec.truncation_dim;
    if (spec.kind == StateKind::fock)
        dim = std::max(dim, spec.n + 1);
    if (spec.kind == StateKind::thermal) {
        while (dim <= kMaxTruncation && truncation_leak(spec, dim) > kLeak)
            ++dim;
        if (dim > kMaxTruncation)
            throw TruncationError("thermal state with nbar=" + std::to_string(spec.nbar) +
                                  " needs more than " + std::to_string(kMaxTruncation) + " Fock levels");
        VectorXd p(dim);
        const double x = spec.nbar / (spec.nbar + 1.0);
        p[0] = 1.0 / (spec.nbar + 1.0);
        for (int n = 1; n < dim; ++n)
            p[n] = p[n - 1] * x;
        p /= p.sum();
        return DensityMatrix(p.cast<cplx>().asDiagonal());
    }
    if (dim > kMaxTruncation)
        throw TruncationError("state needs more than " + std::to_string(kMaxTruncation) + " Fock levels");
    const VectorXcd full = state_amplitudes(spec, kMaxTruncation);
    double kept = full.head(dim).squaredNorm();
    while (1.0 - kept > kLeak && dim < kMaxTruncation) {
        kept += std::norm(full[dim]);
        ++dim;
    }
    if (1.0 - kept > kLeak)
        throw TruncationError(spec.name() + " state leaks " + std::to_string(1.0 - kept) + " beyond " +
                              std::to_string(kMaxTruncation) + " Fock levels");
    const VectorXcd c = full.head(dim) / std::sqrt(kept);
    MatrixXcd rho = c * c.adjoint();
    return DensityMatrix(0.5 * (rho + rho.adjoint()));
}

VectorXd quadrature_pdf(const DensityMatrix& rho, double theta, const VectorXd& q_axis)
{
    const int d = rho.dim();
    const MatrixXd psi = hermite_table(d - 1, q_axis);
    VectorXcd phase(d);
    for (int n = 0; n < d; ++n)
        phase[n] = std::polar(1.0, -n * theta);
    VectorXd out(q_axis.size());
    for (Eigen::Index j = 0; j < q_axis.size(); ++j) {
        const VectorXcd u = psi.col(j).cast<cplx>().cwiseProduct(phase);
        out[j] = (u.transpose() * rho.elements * u.conjugate()).value().real();
    }
    return out;
}

cplx wigner_kernel(int n, int m, double q, double p)
{
    if (n < m)
        return std::conj(wigner_kernel(m, n, q, p));
    const int k = n - m;
    const double x = 2.0 * (q * q + p * p);
    std::vector<double> l(m + 1);
    laguerre_functions(k, m, x, l.data());
    const double sign = (m % 2 == 0) ? 1.0 : -1.0;
    return sign / kPi * l[m] * std::polar(1.0, -k * std::atan2(p, q));
}

cplx wigner_kernel_fourier(int n, int m, double q, double p)
{
    const int top = std::max(n, m);
    const double half = std::abs(q) + std::sqrt(2.0 * top + 1.0) + 9.0;
    const double dx = 0.005;
    const int steps = static_cast<int>(std::ceil(2.0 * half / dx));
    std::vector<double> a(top + 1), b(top + 1);
    cplx sum{0, 0};
    for (int i = -steps; i <= steps; ++i) {
        const double x = i * dx;
        hermite_psi_point(top, q + 0.5 * x, a.data());
        hermite_psi_point(top, q - 0.5 * x, b.data());
        sum += a[n] * b[m] * std::polar(1.0, -p * x);
    }
    return sum * dx / (2.0 * kPi);
}

WignerGrid wigner_from_rho(const DensityMatrix& rho, const GridSpec& grid)
{
    const int d = rho.dim();
    WignerGrid w{grid.q_axis(), grid.p_axis(), MatrixXd::Zero(grid.n_q, grid.n_p)};
    std::vector<double> l(d);
    for (int i = 0; i < grid.n_q; ++i) {
        for (int j = 0; j < grid.n_p; ++j) {
            const double q = w.q_axis[i], p = w.p_axis[j];
            const double x = 2.0 * (q * q + p * p);
            const double ang = std::atan2(p, q);
            double acc = 0.0;
            for (int k = 0; k < d; ++k) {
                laguerre_functions(k, d - 1 - k, x, l.data());
                const cplx ph = std::polar(1.0, -k * ang);
                double band = 0.0;
                for (int m = 0; m + k < d; ++m) {
                    const double sign = (m % 2 == 0) ? 1.0 : -1.0;
                    band += sign * l[m] * (rho.elements(m + k, m) * ph).real();
                }
                acc += (k == 0 ? 1.0 : 2.0) * band;
            }
            w.values(i, j) = acc / kPi;
        }
    }
    return w;
}

RhoFromWigner rho_from_wigner(const WignerGrid& w, int dim)
{
    if (dim < 1 || dim > kMaxTruncation)
        throw ConfigError("rho_from_wigner: dim out of range");
    MatrixXcd rho = MatrixXcd::Zero(dim, dim);
    std::vector<double> l(dim);
    const auto nq = w.q_axis.size(), np = w.p_axis.size();
    for (Eigen::Index i = 0; i < nq; ++i) {
        for (Eigen::Index j = 0; j < np; ++j) {
            const double wt = w.values(i, j) * trap_w(i, nq) * trap_w(j, np);
            if (wt == 0.0)
                continue;
            const double q = w.q_axis[i], p = w.p_axis[j];
            const double x = 2.0 * (q * q + p * p);
            const double ang = std::atan2(p, q);
            for (int k = 0; k < dim; ++k) {
                laguerre_functions(k, dim - 1 - k, x, l.data());
                const cplx ph = std::polar(1.0, k * ang);  // conjugated kernel phase
                for (int m = 0; m + k < dim; ++m) {
                    const double sign = (m % 2 == 0) ? 1.0 : -1.0;
                    rho(m + k, m) += wt * sign * l[m] * ph;
                }
            }
        }
    }
    rho *= 2.0 * w.dq() * w.dp();  // 2 pi * (1/pi) * cell area
    for (int n = 0; n < dim; ++n)
        for (int m = n + 1; m < dim; ++m)
            rho(n, m) = std::conj(rho(m, n));
    for (int n = 0; n < dim; ++n)
        rho(n, n) = rho(n, n).real();
    RhoFromWigner out{DensityMatrix(rho, false), false};
    out.coarse_grid = std::abs(out.rho.trace() - 1.0) > 0.05;
    return out;
}

WignerGrid q_function(const DensityMatrix& rho, const GridSpec& grid)
{
    const int d = rho.dim();
    WignerGrid out{grid.q_axis(), grid.p_axis(), MatrixXd::Zero(grid.n_q, grid.n_p)};
    VectorXcd c(d);
    for (int i = 0; i < grid.n_q; ++i) {
        for (int j = 0; j < grid.n_p; ++j) {
            const cplx alpha(out.q_axis[i] / std::sqrt(2.0), out.p_axis[j] / std::sqrt(2.0));
            c[0] = std::exp(-0.5 * std::norm(alpha));
            for (int n = 1; n < d; ++n)
                c[n] = c[n - 1] * alpha / std::sqrt(static_cast<double>(n));
            out.values(i, j) = (c.adjoint() * rho.elements * c).value().real() / (2.0 * kPi);
        }
    }
    return out;
}

std::pair<double, double> rotate_quadrature(double q, double p, double theta)
{
    const double c = std::cos(theta), s = std::sin(theta);
    return {c * q + s * p, -s * q + c * p};
}

WavefunctionSamples wavefunction_from_rho(const DensityMatrix& rho, const VectorXd& q_axis, double q_ref,
                                          double purity_gate)
{
    const double purity = rho.purity();
    if (purity < purity_gate)
        throw PurityError("state purity " + std::to_string(purity) + " is below the gate " +
                          std::to_string(purity_gate) + "; a wave function is not defined");
    const int d = rho.dim();
    const MatrixXd psi = hermite_table(d - 1, q_axis);
    VectorXd ref(d);
    hermite_psi_point(d - 1, q_ref, ref.data());
    const VectorXcd col = rho.elements * ref.cast<cplx>();
    const double diag_ref = (ref.cast<cplx>().transpose() * col).value().real();
    double diag_max = 0.0;
    for (Eigen::Index j = 0; j < q_axis.size(); ++j) {
        const VectorXcd u = psi.col(j).cast<cplx>();
        diag_max = std::max(diag_max, (u.transpose() * rho.elements * u).value().real());
    }
    if (!(diag_ref > 1e-6 * diag_max))
        throw ReferencePointError("<q'|rho|q'> vanishes at q' = " + std::to_string(q_ref) +
                                  "; choose another reference point");
    VectorXcd amp = psi.transpose().cast<cplx>() * col / std::sqrt(diag_ref);
    Eigen::Index peak = 0;
    amp.cwiseAbs().maxCoeff(&peak);
    if (std::abs(amp[peak]) > 0)
        amp *= std::polar(1.0, -std::arg(amp[peak]));
    return {q_axis, amp, purity};
}

std::pair<double, double> quadrature_mean_var(const DensityMatrix& rho, double theta)
{
    const int d = rho.dim() + 1;  // pad one level so q^2 is exact on the stored block
    MatrixXcd r = MatrixXcd::Zero(d, d);
    r.topLeftCorner(d - 1, d - 1) = rho.elements;
    MatrixXcd a = MatrixXcd::Zero(d, d);
    for (int n = 1; n < d; ++n)
        a(n - 1, n) = std::sqrt(static_cast<double>(n));
    const MatrixXcd qt = (a * std::polar(1.0, -theta) + a.adjoint() * std::polar(1.0, theta)) / std::sqrt(2.0);
    const double mean = (r * qt).trace().real();
    const double second = (r * qt * qt).trace().real();
    return {mean, second - mean * mean};
}

} // namespace ohtlab
