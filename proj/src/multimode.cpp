#include "ohtlab/multimode.hpp"

#include "ohtlab/errors.hpp"
#include "ohtlab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ohtlab {

namespace {

double thermal_or_poisson_fact2(NumberLaw::Statistics s, double m)
{
    return s == NumberLaw::Statistics::thermal ? 2.0 * m * m : m * m;
}

int draw_number(NumberLaw::Statistics s, double mean, Engine& eng)
{
    if (mean <= 0.0)
        return 0;
    if (s == NumberLaw::Statistics::thermal) {
        std::geometric_distribution<int> g(1.0 / (1.0 + mean));
        return g(eng);
    }
    std::poisson_distribution<int> p(mean);
    return p(eng);
}

std::array<int, 2> draw_pair(const NumberLaw& law, Engine& eng)
{
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    switch (law.coupling) {
    case NumberLaw::Coupling::correlated: {
        if (law.correlation > 0.0 && uni(eng) < law.correlation) {
            const int n = draw_number(law.stats, law.nbar1, eng);
            return {n, n};
        }
        const int a = draw_number(law.stats, law.nbar1, eng);
        return {a, draw_number(law.stats, law.nbar2, eng)};
    }
    case NumberLaw::Coupling::switching:
        if (uni(eng) < 0.5)
            return {draw_number(law.stats, 2.0 * law.nbar1, eng), 0};
        return {0, draw_number(law.stats, 2.0 * law.nbar2, eng)};
    case NumberLaw::Coupling::split: {
        const double tot = law.nbar1 + law.nbar2;
        const int n = draw_number(law.stats, tot, eng);
        std::binomial_distribution<int> b(n, law.nbar1 / tot);
        const int k = b(eng);
        return {k, n - k};
    }
    }
    return {0, 0};
}

double log_factorial(int n)
{
    return std::lgamma(n + 1.0);
}

MatrixXcd annihilation(int d)
{
    MatrixXcd a = MatrixXcd::Zero(d, d);
    for (int n = 1; n < d; ++n)
        a(n - 1, n) = std::sqrt(double(n));
    return a;
}

MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b)
{
    MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// Inverse-CDF tables for |psi_n(q)|^2, n = 0..n_max.
class FockQuadratureTables {
public:
    explicit FockQuadratureTables(int n_max)
    {
        if (n_max > 200)
            throw NumericalError("planted photon number above 200; Hermite tables are limited to n <= 200");
        const double half = std::sqrt(2.0 * n_max + 1.0) + 6.0;
        const int npts = 8193;
        axis_ = linspace(-half, half, npts);
        const MatrixXd psi = hermite_table(n_max, axis_);
        const double h = axis_[1] - axis_[0];
        cum_.assign(n_max + 1, std::vector<double>(npts, 0.0));
        for (int n = 0; n <= n_max; ++n) {
            auto& c = cum_[n];
            for (int j = 1; j < npts; ++j)
                c[j] = c[j - 1] + 0.5 * h * (psi(n, j - 1) * psi(n, j - 1) + psi(n, j) * psi(n, j));
            const double tot = c.back();
            for (double& v : c)
                v /= tot;
        }
    }

    double sample(int n, double u) const
    {
        const auto& c = cum_[n];
        const auto it = std::upper_bound(c.begin(), c.end(), u);
        const std::size_t hi = std::clamp<std::size_t>(it - c.begin(), 1, c.size() - 1);
        const std::size_t lo = hi - 1;
        const double span = c[hi] - c[lo];
        const double t = span > 0 ? std::clamp((u - c[lo]) / span, 0.0, 1.0) : 0.5;
        return axis_[lo] + t * (axis_[hi] - axis_[lo]);
    }

private:
    VectorXd axis_;
    std::vector<std::vector<double>> cum_;
};

// Exact joint (q1, q2) sampler: q1 from the mode-1 marginal, q2 from the
// conditional law given q1.
class JointFockSampler {
public:
    JointFockSampler(const TwoModeState& st) : st_(st), marginal1_(st.reduced(1))
    {
        const int d1 = st.d1, d2 = st.d2;
        // rho regrouped as (a b ; n1 m1) so the conditional state is one mat-vec
        regroup_.resize(d2 * d2, d1 * d1);
        for (int n1 = 0; n1 < d1; ++n1)
            for (int m1 = 0; m1 < d1; ++m1)
                for (int a = 0; a < d2; ++a)
                    for (int b = 0; b < d2; ++b)
                        regroup_(a * d2 + b, n1 * d1 + m1) = st.rho(n1 * d2 + a, m1 * d2 + b);
        axis_ = linspace(-8.0, 8.0, n_);
        const MatrixXd psi = hermite_table(d2 - 1, axis_);
        const double h = axis_[1] - axis_[0];
        cum_ = MatrixXd::Zero(d2 * d2, n_);
        for (int j = 1; j < n_; ++j)
            for (int a = 0; a < d2; ++a)
                for (int b = 0; b < d2; ++b)
                    cum_(a * d2 + b, j) = cum_(a * d2 + b, j - 1) +
                                          0.5 * h * (psi(a, j - 1) * psi(b, j - 1) + psi(a, j) * psi(b, j));
    }

    std::pair<double, double> sample(double th1, double th2, double u1, double u2) const
    {
        const int d1 = st_.d1, d2 = st_.d2;
        const double q1 = marginal1_.sample(th1, u1);
        std::vector<double> p1(d1);
        hermite_psi_point(d1 - 1, q1, p1.data());
        VectorXcd u(d1), x(d1 * d1), ph(2 * d2 - 1);
        for (int n = 0; n < d1; ++n)
            u[n] = std::polar(p1[n], -n * th1);
        for (int n1 = 0; n1 < d1; ++n1)
            for (int m1 = 0; m1 < d1; ++m1)
                x[n1 * d1 + m1] = u[n1] * std::conj(u[m1]);
        const VectorXcd sigma = regroup_ * x;
        for (int k = 0; k < 2 * d2 - 1; ++k)
            ph[k] = std::polar(1.0, -(k - d2 + 1) * th2);
        VectorXd w(d2 * d2);
        for (int a = 0; a < d2; ++a)
            for (int b = 0; b < d2; ++b)
                w[a * d2 + b] = (sigma[a * d2 + b] * ph[a - b + d2 - 1]).real();
        auto cdf = [&](int j) { return w.dot(cum_.col(j)); };
        const double target = u2 * cdf(n_ - 1);
        int lo = 0, hi = n_ - 1;
        while (hi - lo > 1) {
            const int mid = (lo + hi) / 2;
            if (cdf(mid) < target)
                lo = mid;
            else
                hi = mid;
        }
        const double f0 = cdf(lo), f1 = cdf(hi);
        const double t = f1 > f0 ? std::clamp((target - f0) / (f1 - f0), 0.0, 1.0) : 0.5;
        return {q1, axis_[lo] + t * (axis_[hi] - axis_[lo])};
    }

private:
    static constexpr int n_ = 2048;
    const TwoModeState& st_;
    QuadratureSampler marginal1_;
    MatrixXcd regroup_;
    VectorXd axis_;
    MatrixXd cum_;  // (d2*d2, n): cumulative psi_a psi_b
};

} // namespace

// ---- number laws ----------------------------------------------------------

void NumberLaw::validate() const
{
    if (!(nbar1 >= 0.0) || !(nbar2 >= 0.0) || !std::isfinite(nbar1) || !std::isfinite(nbar2))
        throw ConfigError("mean photon numbers must be finite and non-negative");
    if (!(correlation >= 0.0 && correlation <= 1.0))
        throw ConfigError("correlation must lie in [0, 1]");
    if (coupling == Coupling::correlated && correlation > 0.0 && nbar1 != nbar2)
        throw ConfigError("correlated draws need equal mean photon numbers");
    if (coupling == Coupling::split && !(nbar1 + nbar2 > 0.0))
        throw ConfigError("split source needs a positive total mean");
}

NumberLawMoments number_law_moments(const NumberLaw& law)
{
    law.validate();
    NumberLawMoments m;
    m.n1 = law.nbar1;
    m.n2 = law.nbar2;
    switch (law.coupling) {
    case NumberLaw::Coupling::correlated: {
        const double f1 = thermal_or_poisson_fact2(law.stats, law.nbar1);
        m.n1_fact2 = f1;
        m.n2_fact2 = thermal_or_poisson_fact2(law.stats, law.nbar2);
        m.n1n2 = law.correlation * (f1 + law.nbar1) + (1.0 - law.correlation) * law.nbar1 * law.nbar2;
        break;
    }
    case NumberLaw::Coupling::switching:
        m.n1_fact2 = 0.5 * thermal_or_poisson_fact2(law.stats, 2.0 * law.nbar1);
        m.n2_fact2 = 0.5 * thermal_or_poisson_fact2(law.stats, 2.0 * law.nbar2);
        m.n1n2 = 0.0;
        break;
    case NumberLaw::Coupling::split: {
        const double tot = law.nbar1 + law.nbar2, p = law.nbar1 / tot;
        const double f = thermal_or_poisson_fact2(law.stats, tot);
        m.n1_fact2 = p * p * f;
        m.n2_fact2 = (1 - p) * (1 - p) * f;
        m.n1n2 = p * (1 - p) * f;
        break;
    }
    }
    return m;
}

std::string polarization_basis_name(PolarizationBasis b)
{
    switch (b) {
    case PolarizationBasis::hv:
        return "H/V";
    case PolarizationBasis::diagonal:
        return "+45/-45";
    case PolarizationBasis::circular:
        return "R/L";
    }
    return "?";
}

// ---- two-mode states ------------------------------------------------------

TwoModeState TwoModeState::joint(MatrixXcd rho, int d1, int d2)
{
    TwoModeState s;
    s.kind = Kind::joint_fock;
    s.d1 = d1;
    s.d2 = d2;
    s.rho = std::move(rho);
    s.validate();
    return s;
}

TwoModeState TwoModeState::product(const DensityMatrix& a, const DensityMatrix& b)
{
    return joint(kron(a.elements, b.elements), a.dim(), b.dim());
}

TwoModeState TwoModeState::planted(const NumberLaw& law)
{
    law.validate();
    TwoModeState s;
    s.kind = Kind::planted;
    s.law = law;
    return s;
}

TwoModeState TwoModeState::split(const DensityMatrix& a)
{
    const Matrix2cd bs = grips_transform(kPi / 2, 0.0);
    int out = 0;
    MatrixXcd r = transform_joint(a.elements, a.dim(), 1, bs, out);
    return joint(std::move(r), out, out);
}

void TwoModeState::validate() const
{
    if (kind == Kind::planted) {
        law.validate();
        return;
    }
    if (d1 < 1 || d2 < 1 || d1 > kMaxJointDim || d2 > kMaxJointDim)
        throw ConfigError("joint Fock dimensions must lie in [1, " + std::to_string(kMaxJointDim) + "] per mode");
    if (rho.rows() != d1 * d2 || rho.cols() != d1 * d2)
        throw ConfigError("joint density matrix shape does not match d1 * d2");
    if (std::abs(rho.trace().real() - 1.0) > 1e-9)
        throw DataError("joint density matrix trace differs from 1");
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-9)
        throw DataError("joint density matrix is not Hermitian");
}

DensityMatrix TwoModeState::reduced(int mode) const
{
    if (kind != Kind::joint_fock)
        throw UnsupportedStateError("reduced states need the joint Fock representation");
    if (mode == 1) {
        MatrixXcd r = MatrixXcd::Zero(d1, d1);
        for (int a = 0; a < d1; ++a)
            for (int b = 0; b < d1; ++b)
                for (int k = 0; k < d2; ++k)
                    r(a, b) += rho(a * d2 + k, b * d2 + k);
        return DensityMatrix(r);
    }
    if (mode == 2) {
        MatrixXcd r = MatrixXcd::Zero(d2, d2);
        for (int a = 0; a < d2; ++a)
            for (int b = 0; b < d2; ++b)
                for (int k = 0; k < d1; ++k)
                    r(a, b) += rho(k * d2 + a, k * d2 + b);
        return DensityMatrix(r);
    }
    throw ConfigError("mode must be 1 or 2");
}

// ---- LO superposition and mode maps ---------------------------------------

void LOSuperposition::validate() const
{
    if (!(alpha >= 0.0 && alpha <= kPi / 2 + 1e-12))
        throw ConfigError("alpha must lie in [0, pi/2]");
    if (!random_theta && !(theta >= 0.0 && theta < 2 * kPi))
        throw ConfigError("theta must lie in [0, 2 pi)");
    if (!random_zeta && !(zeta >= 0.0 && zeta < 2 * kPi))
        throw ConfigError("zeta must lie in [0, 2 pi)");
}

Eigen::RowVector2cd LOSuperposition::mode_row() const
{
    Eigen::RowVector2cd r;
    r << std::cos(alpha), std::polar(std::sin(alpha), zeta);
    return r;
}

Matrix2cd grips_transform(double gamma, double zeta)
{
    const double c = std::cos(gamma / 2), s = std::sin(gamma / 2);
    const cplx e = std::polar(1.0, zeta);
    Matrix2cd m;
    m << c, e * s, -s, e * c;
    return m;
}

Matrix2cd polarization_basis_matrix(PolarizationBasis b)
{
    const double r = 1.0 / std::sqrt(2.0);
    const cplx i(0.0, 1.0);
    Matrix2cd m;
    switch (b) {
    case PolarizationBasis::hv:
        m.setIdentity();
        break;
    case PolarizationBasis::diagonal:
        m << r, r, r, -r;
        break;
    case PolarizationBasis::circular:
        m << r, -i * r, r, i * r;
        break;
    }
    return m;
}

MatrixXcd transform_joint(const MatrixXcd& rho, int d1, int d2, const Matrix2cd& m, int& out_dim)
{
    if (rho.rows() != d1 * d2)
        throw ConfigError("joint density matrix shape does not match d1 * d2");
    if ((m.adjoint() * m - Matrix2cd::Identity()).cwiseAbs().maxCoeff() > 1e-12)
        throw ConfigError("mode map is not unitary");
    const int d = d1 + d2 - 1;
    out_dim = d;
    // U a_j^dagger U^dagger = sum_k m(k, j) a_k^dagger
    MatrixXcd u = MatrixXcd::Zero(d * d, d1 * d2);
    for (int n1 = 0; n1 < d1; ++n1)
        for (int n2 = 0; n2 < d2; ++n2) {
            const double norm = -0.5 * (log_factorial(n1) + log_factorial(n2));
            for (int k = 0; k <= n1; ++k)
                for (int l = 0; l <= n2; ++l) {
                    const int p = k + l, q = n1 + n2 - p;
                    const double binom =
                        std::exp(log_factorial(n1) - log_factorial(k) - log_factorial(n1 - k) + log_factorial(n2) -
                                 log_factorial(l) - log_factorial(n2 - l));
                    const cplx coef = binom * std::pow(m(0, 0), k) * std::pow(m(1, 0), n1 - k) * std::pow(m(0, 1), l) *
                                      std::pow(m(1, 1), n2 - l);
                    const double amp = std::exp(norm + 0.5 * (log_factorial(p) + log_factorial(q)));
                    u(p * d + q, n1 * d2 + n2) += coef * amp;
                }
        }
    return u * rho * u.adjoint();
}

DensityMatrix grips_mode_state(const TwoModeState& st, double gamma, double zeta)
{
    st.validate();
    if (st.kind != TwoModeState::Kind::joint_fock)
        throw UnsupportedStateError("GRIPS state transform needs the joint Fock representation");
    int d = 0;
    const MatrixXcd r = transform_joint(st.rho, st.d1, st.d2, grips_transform(gamma, zeta), d);
    MatrixXcd red = MatrixXcd::Zero(d, d);
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
            for (int k = 0; k < d; ++k)
                red(a, b) += r(a * d + k, b * d + k);
    return DensityMatrix(red);
}

// ---- dual-LO sampling -----------------------------------------------------

QuadratureDataset combined_quadrature_samples(const TwoModeState& st, const LOSuperposition& lo,
                                              const DetectorModel& det, std::size_t n, std::uint64_t seed,
                                              JointRecord* record, const Matrix2cd& measure)
{
    st.validate();
    lo.validate();
    det.validate();
    if (n == 0)
        throw ConfigError("n must be positive");
    if ((measure.adjoint() * measure - Matrix2cd::Identity()).cwiseAbs().maxCoeff() > 1e-12)
        throw ConfigError("measurement mode map is not unitary");
    const double noise = quadrature_noise_sigma(det);

    QuadratureDataset ds;
    ds.theta.resize(n);
    ds.zeta.resize(n);
    ds.q.resize(n);
    ds.meta.det = det;
    ds.meta.schedule = lo.random_theta ? PhaseSchedule::uniform_random() : PhaseSchedule::grid(1);
    ds.meta.seed = seed;
    ds.meta.dual = true;
    ds.meta.alpha = lo.alpha;
    ds.meta.zeta_schedule = lo.random_zeta ? "random" : "fixed";
    VectorXd q1(n), q2(n);
    std::vector<int> n1, n2;

    auto phases = [&](Engine& eng, double& th, double& ze) {
        std::uniform_real_distribution<double> ph(0.0, 2 * kPi);
        th = lo.random_theta ? ph(eng) : lo.theta;
        ze = lo.random_zeta ? ph(eng) : lo.zeta;
    };
    // detected mode b = r1 a1 + r2 a2 in the state's own modes
    auto coefficients = [&](double ze) {
        LOSuperposition l = lo;
        l.zeta = ze;
        return Eigen::RowVector2cd(l.mode_row() * measure);
    };

    if (st.kind == TwoModeState::Kind::planted) {
        n1.resize(n);
        n2.resize(n);
        parallel_chunks(n, kStreamBlock, [&](std::size_t b, std::size_t e, std::size_t c) {
            Engine eng = make_stream(seed, 2 * c);
            for (std::size_t i = b; i < e; ++i) {
                const auto p = draw_pair(st.law, eng);
                n1[i] = p[0];
                n2[i] = p[1];
            }
        });
        const int top = std::max(*std::max_element(n1.begin(), n1.end()), *std::max_element(n2.begin(), n2.end()));
        const FockQuadratureTables tables(top);
        parallel_chunks(n, kStreamBlock, [&](std::size_t b, std::size_t e, std::size_t c) {
            Engine eng = make_stream(seed, 2 * c + 1);
            std::uniform_real_distribution<double> uni(0.0, 1.0);
            std::normal_distribution<double> gauss(0.0, 1.0);
            for (std::size_t i = b; i < e; ++i) {
                double th, ze;
                phases(eng, th, ze);
                const auto r = coefficients(ze);
                // diagonal states: the quadrature law does not depend on the phases
                q1[i] = tables.sample(n1[i], uni(eng));
                q2[i] = tables.sample(n2[i], uni(eng));
                double q = std::abs(r[0]) * q1[i] + std::abs(r[1]) * q2[i];
                if (noise > 0.0)
                    q += noise * gauss(eng);
                ds.theta[i] = th;
                ds.zeta[i] = ze;
                ds.q[i] = q;
            }
        });
    } else {
        const JointFockSampler sampler(st);
        parallel_chunks(n, kStreamBlock, [&](std::size_t b, std::size_t e, std::size_t c) {
            Engine eng = make_stream(seed, 2 * c + 1);
            std::uniform_real_distribution<double> uni(0.0, 1.0);
            std::normal_distribution<double> gauss(0.0, 1.0);
            for (std::size_t i = b; i < e; ++i) {
                double th, ze;
                phases(eng, th, ze);
                const auto r = coefficients(ze);
                const double u1 = uni(eng), u2 = uni(eng);
                const auto [x1, x2] = sampler.sample(th - std::arg(r[0]), th - std::arg(r[1]), u1, u2);
                q1[i] = x1;
                q2[i] = x2;
                double q = std::abs(r[0]) * x1 + std::abs(r[1]) * x2;
                if (noise > 0.0)
                    q += noise * gauss(eng);
                ds.theta[i] = th;
                ds.zeta[i] = ze;
                ds.q[i] = q;
            }
        });
    }
    if (record) {
        record->q1 = std::move(q1);
        record->q2 = std::move(q2);
        record->n1 = std::move(n1);
        record->n2 = std::move(n2);
    }
    return ds;
}

ThreeAlphaRuns simulate_three_alpha(const TwoModeState& st, const DetectorModel& det, std::size_t n_per_run,
                                    std::uint64_t seed, const Matrix2cd& measure)
{
    ThreeAlphaRuns r;
    LOSuperposition lo;
    lo.alpha = 0.0;
    r.mode1 = combined_quadrature_samples(st, lo, det, n_per_run, stream_seed(seed, 0), nullptr, measure);
    lo.alpha = kPi / 4;
    r.combined = combined_quadrature_samples(st, lo, det, n_per_run, stream_seed(seed, 1), nullptr, measure);
    lo.alpha = kPi / 2;
    r.mode2 = combined_quadrature_samples(st, lo, det, n_per_run, stream_seed(seed, 2), nullptr, measure);
    return r;
}

// ---- three-alpha estimator ------------------------------------------------

namespace {

struct ThreeAlphaOut {
    double g, cross, n1, n2, n1n2;
};

// means: [<<q1^2>>, <<q1^4>>, <<q2^2>>, <<q2^4>>, <<Q^4>> at alpha = pi/4]
ThreeAlphaOut three_alpha(const std::array<double, 5>& m)
{
    ThreeAlphaOut o;
    o.n1 = m[0] - 0.5;
    o.n2 = m[2] - 0.5;
    // (c q1 + s q2)^4 at c = s: odd cross terms average out under independent phases
    o.cross = (4.0 * m[4] - m[1] - m[3]) / 6.0;
    o.n1n2 = o.cross - 0.5 * o.n1 - 0.5 * o.n2 - 0.25;
    o.g = o.n1n2 / (o.n1 * o.n2);
    return o;
}

void check_randomized(const QuadratureDataset& ds, const char* what)
{
    if (ds.meta.schedule.kind == ScheduleKind::grid)
        throw DataError(std::string(what) + " run does not randomize the common phase theta");
}

VectorXd scaled_squares(const QuadratureDataset& ds)
{
    const double eta = ds.meta.det.eta_eff();
    const double c2 = eta > 0.0 ? eta : 1.0;
    return (c2 * ds.q.array().square()).matrix();
}

} // namespace

TwoTimeResult two_time_g2(const ThreeAlphaRuns& runs)
{
    const std::size_t n = runs.mode1.size();
    if (runs.combined.size() != n || runs.mode2.size() != n)
        throw DataError("three-alpha runs have mismatched sample counts");
    if (n < 2)
        throw DataError("need at least 2 samples per run");
    const double tol = 1e-9;
    if (std::abs(runs.mode1.meta.alpha) > tol || std::abs(runs.combined.meta.alpha - kPi / 4) > tol ||
        std::abs(runs.mode2.meta.alpha - kPi / 2) > tol)
        throw ConfigError("three-alpha runs must be taken at alpha = 0, pi/4, pi/2");
    check_randomized(runs.mode1, "alpha = 0");
    check_randomized(runs.combined, "alpha = pi/4");
    check_randomized(runs.mode2, "alpha = pi/2");
    if (runs.combined.meta.dual && runs.combined.meta.zeta_schedule != "random")
        throw DataError("alpha = pi/4 run does not randomize the relative phase zeta");

    const VectorXd a2 = scaled_squares(runs.mode1), b2 = scaled_squares(runs.mode2), c2 = scaled_squares(runs.combined);
    const double nn = static_cast<double>(n);
    const double sa2 = a2.sum(), sa4 = a2.squaredNorm(), sb2 = b2.sum(), sb4 = b2.squaredNorm(), sc4 = c2.squaredNorm();
    const std::array<double, 5> full{sa2 / nn, sa4 / nn, sb2 / nn, sb4 / nn, sc4 / nn};
    const ThreeAlphaOut f = three_alpha(full);

    // delete-1 jackknife per run; runs are independent so variances add
    std::array<double, 5> var{};  // g, cross, n1, n2, n1n2
    auto accumulate = [&](const VectorXd& x2, int which) {
        std::array<double, 5> s{}, s2{};
        for (std::size_t i = 0; i < n; ++i) {
            std::array<double, 5> m = full;
            const double v = x2[i];
            if (which == 0) {
                m[0] = (sa2 - v) / (nn - 1);
                m[1] = (sa4 - v * v) / (nn - 1);
            } else if (which == 1) {
                m[2] = (sb2 - v) / (nn - 1);
                m[3] = (sb4 - v * v) / (nn - 1);
            } else {
                m[4] = (sc4 - v * v) / (nn - 1);
            }
            const ThreeAlphaOut o = three_alpha(m);
            const double d[5] = {o.g - f.g, o.cross - f.cross, o.n1 - f.n1, o.n2 - f.n2, o.n1n2 - f.n1n2};
            for (int k = 0; k < 5; ++k) {
                s[k] += d[k];
                s2[k] += d[k] * d[k];
            }
        }
        for (int k = 0; k < 5; ++k) {
            const double mean = s[k] / nn;
            var[k] += (nn - 1) * std::max(s2[k] / nn - mean * mean, 0.0);
        }
    };
    accumulate(a2, 0);
    accumulate(b2, 1);
    accumulate(c2, 2);

    TwoTimeResult r;
    r.g12 = {f.g, std::sqrt(var[0])};
    r.cross_q2q2 = {f.cross, std::sqrt(var[1])};
    r.n1 = {f.n1, std::sqrt(var[2])};
    r.n2 = {f.n2, std::sqrt(var[3])};
    r.n1n2 = {f.n1n2, std::sqrt(var[4])};
    return r;
}

std::vector<PolarizationRow> polarization_g2(const std::map<PolarizationBasis, ThreeAlphaRuns>& runs)
{
    const PolarizationBasis all[] = {PolarizationBasis::circular, PolarizationBasis::hv, PolarizationBasis::diagonal};
    std::string missing;
    for (auto b : all)
        if (!runs.count(b))
            missing += (missing.empty() ? "" : ", ") + polarization_basis_name(b);
    if (!missing.empty())
        throw ConfigError("incomplete polarization basis set; missing " + missing);
    std::vector<PolarizationRow> rows;
    for (auto b : all) {
        const auto& r = runs.at(b);
        const TwoTimeResult t = two_time_g2(r);
        PolarizationRow row;
        row.basis = b;
        row.n1 = t.n1;
        row.n2 = t.n2;
        row.g12 = t.g12;
        try {
            row.g11 = g2_single(r.mode1);
            row.g11_valid = true;
        } catch (const NumericalError&) {
        }
        try {
            row.g22 = g2_single(r.mode2);
            row.g22_valid = true;
        } catch (const NumericalError&) {
        }
        rows.push_back(row);
    }
    return rows;
}

std::map<PolarizationBasis, ThreeAlphaRuns> simulate_polarization_runs(const TwoModeState& st,
                                                                       const DetectorModel& det,
                                                                       std::size_t n_per_run, std::uint64_t seed)
{
    std::map<PolarizationBasis, ThreeAlphaRuns> out;
    const Matrix2cd src = polarization_basis_matrix(st.basis);
    std::uint64_t k = 0;
    for (auto b : {PolarizationBasis::circular, PolarizationBasis::hv, PolarizationBasis::diagonal}) {
        // a_b = B_b a_hv = B_b B_src^dagger a_src
        const Matrix2cd m = polarization_basis_matrix(b) * src.adjoint();
        out[b] = simulate_three_alpha(st, det, n_per_run, stream_seed(seed, 100 + k++), m);
    }
    return out;
}

// ---- Stokes operators -----------------------------------------------------

StokesOperators stokes_operators(int d)
{
    const MatrixXcd a = annihilation(d);
    const MatrixXcd id = MatrixXcd::Identity(d, d);
    const MatrixXcd a1 = kron(a, id), a2 = kron(id, a);
    StokesOperators s;
    s.j1 = 0.5 * (a1.adjoint() * a1 - a2.adjoint() * a2);
    s.j2 = 0.5 * (a1.adjoint() * a2 + a2.adjoint() * a1);
    s.j3 = (a1.adjoint() * a2 - a2.adjoint() * a1) / cplx(0.0, 2.0);
    return s;
}

StokesMoments stokes_moments(const TwoModeState& st)
{
    st.validate();
    if (st.kind != TwoModeState::Kind::joint_fock)
        throw UnsupportedStateError("Stokes moments need the joint Fock representation");
    if (st.d1 != st.d2)
        throw ConfigError("Stokes moments need equal mode dimensions");
    const StokesOperators s = stokes_operators(st.d1);
    const MatrixXcd* j[3] = {&s.j1, &s.j2, &s.j3};
    StokesMoments m;
    for (int a = 0; a < 3; ++a) {
        m.means[a] = (st.rho * *j[a]).trace().real();
        for (int b = 0; b < 3; ++b)
            m.second(a, b) = 0.5 * (st.rho * (*j[a] * *j[b] + *j[b] * *j[a])).trace().real();
    }
    return m;
}

} // namespace ohtlab
