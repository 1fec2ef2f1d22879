#include "doctest.h"

#include "ohtlab/errors.hpp"
#include "ohtlab/homodyne.hpp"

#include <cmath>
#include <numeric>

using namespace ohtlab;

namespace {

struct Moments {
    double mean = 0, var = 0, n = 0;
    double mean_se() const { return std::sqrt(var / n); }
    double var_se() const { return var * std::sqrt(2.0 / (n - 1)); }
};

Moments moments(const std::vector<double>& x)
{
    Moments m;
    m.n = static_cast<double>(x.size());
    m.mean = std::accumulate(x.begin(), x.end(), 0.0) / m.n;
    for (double v : x)
        m.var += (v - m.mean) * (v - m.mean);
    m.var /= (m.n - 1);
    return m;
}

std::vector<double> at_phase(const QuadratureDataset& ds, double theta)
{
    std::vector<double> out;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (std::abs(ds.theta[i] - theta) < 1e-12)
            out.push_back(ds.q[i]);
    return out;
}

// KS statistic of samples against the CDF of quadrature_pdf on a fine grid.
double ks_statistic(std::vector<double> x, const DensityMatrix& rho, double theta)
{
    const VectorXd axis = linspace(-10.0, 10.0, 8001);
    const VectorXd pdf = quadrature_pdf(rho, theta, axis);
    std::vector<double> cdf(axis.size(), 0.0);
    const double h = axis[1] - axis[0];
    for (Eigen::Index j = 1; j < axis.size(); ++j)
        cdf[j] = cdf[j - 1] + 0.5 * h * (pdf[j - 1] + pdf[j]);
    std::sort(x.begin(), x.end());
    auto cdf_at = [&](double q) {
        const double t = (q - axis[0]) / h;
        const auto j = static_cast<Eigen::Index>(std::floor(t));
        if (j < 0)
            return 0.0;
        if (j >= axis.size() - 1)
            return cdf.back();
        return cdf[j] + (t - j) * (cdf[j + 1] - cdf[j]);
    };
    double d = 0.0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf_at(x[i]);
        d = std::max({d, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
    }
    return d;
}

DetectorModel ideal()
{
    DetectorModel d;
    d.lo_mean_photons = 1e6;
    return d;
}

} // namespace

TEST_CASE("vacuum quadrature variance")
{
    const auto rho = make_state(StateSpec::vacuum());
    const auto ds = sample_quadratures(rho, PhaseSchedule::uniform_random(), ideal(), 1000000, 11);
    REQUIRE(ds.size() == 1000000);
    std::vector<double> q(ds.q.data(), ds.q.data() + ds.q.size());
    const auto m = moments(q);
    CHECK(m.var == doctest::Approx(0.5).epsilon(0.004));
    for (std::size_t i = 0; i < ds.size(); ++i)
        REQUIRE((ds.theta[i] >= 0.0 && ds.theta[i] < 2 * kPi));

    DetectorModel half = ideal();
    half.eta_q = 0.5;
    const auto ds2 = sample_quadratures(rho, PhaseSchedule::uniform_random(), half, 1000000, 12);
    std::vector<double> q2(ds2.q.data(), ds2.q.data() + ds2.q.size());
    CHECK(std::abs(moments(q2).var - 1.0) <= 0.004);
}

TEST_CASE("squeezed vacuum per-phase variance follows the Gaussian covariance")
{
    StateSpec s = StateSpec::squeezed_vacuum(0.5, 0.0);
    const auto rho = make_state(s);
    const int d = 8;
    const auto ds = sample_quadratures(rho, PhaseSchedule::grid(d), ideal(), 160000, 5);
    for (int k = 0; k < d; ++k) {
        const double th = 2 * kPi * k / d;
        const auto m = moments(at_phase(ds, th));
        const double expect = 0.5 * (std::exp(-1.0) * std::pow(std::cos(th), 2) + std::exp(1.0) * std::pow(std::sin(th), 2));
        CHECK(std::abs(m.var - expect) <= 4 * m.var_se());
        CHECK(std::abs(m.mean) <= 4 * m.mean_se());
    }
}

TEST_CASE("per-phase histograms pass a KS test against quadrature_pdf")
{
    const std::vector<StateSpec> zoo = {
        StateSpec::vacuum(), StateSpec::coherent({1.2, -0.7}), StateSpec::fock(3),
        StateSpec::squeezed_vacuum(0.6, 0.8), StateSpec::thermal(1.5), StateSpec::squeezed_coherent(0.3, 1.0, {0.8, 0.4}),
    };
    const std::size_t n = 200000;
    const double crit = 1.628 / std::sqrt(static_cast<double>(n));  // 1% level
    for (const auto& s : zoo) {
        CAPTURE(s.name());
        const auto rho = make_state(s);
        const auto ds = sample_quadratures(rho, PhaseSchedule::grid(1), ideal(), n, 99);
        std::vector<double> q(ds.q.data(), ds.q.data() + ds.q.size());
        CHECK(ks_statistic(q, rho, 0.0) < crit);
    }
    // and at a nontrivial phase
    const auto rho = make_state(StateSpec::coherent({1.0, 1.0}));
    DetectorModel d = ideal();
    const auto ds = sample_quadratures(rho, PhaseSchedule::grid(4), d, 4 * n, 7);
    CHECK(ks_statistic(at_phase(ds, kPi / 2), rho, kPi / 2) < crit);
}

TEST_CASE("sampling is deterministic regardless of thread count")
{
    const auto rho = make_state(StateSpec::thermal(0.7));
    DetectorModel d = ideal();
    d.eta_q = 0.8;
    d.sigma_e = 300;
    set_max_threads(1);
    const auto a = sample_quadratures(rho, PhaseSchedule::uniform_random(), d, 20000, 3);
    set_max_threads(4);
    const auto b = sample_quadratures(rho, PhaseSchedule::uniform_random(), d, 20000, 3);
    set_max_threads(0);
    CHECK((a.q.array() == b.q.array()).all());
    CHECK((a.theta.array() == b.theta.array()).all());
    const auto c = sample_quadratures(rho, PhaseSchedule::uniform_random(), d, 20000, 4);
    CHECK_FALSE((a.q.array() == c.q.array()).all());
}

TEST_CASE("loss convolution adds (1/eta - 1)/2 at every phase")
{
    const auto rho = make_state(StateSpec::squeezed_vacuum(0.4, 0.0));
    DetectorModel d = ideal();
    d.eta_q = 0.8;
    d.eta_ls = 0.75;
    const int np = 4;
    const auto ds = sample_quadratures(rho, PhaseSchedule::grid(np), d, 200000, 21);
    for (int k = 0; k < np; ++k) {
        const double th = 2 * kPi * k / np;
        const auto m = moments(at_phase(ds, th));
        const double ideal_var = quadrature_mean_var(rho, th).second;
        CHECK(std::abs(m.var - (ideal_var + 0.5 * (1 / 0.6 - 1))) <= 3 * m.var_se());
    }
}

TEST_CASE("sample_quadratures rejects bad inputs")
{
    const auto rho = make_state(StateSpec::vacuum());
    DetectorModel d = ideal();
    CHECK_THROWS_AS(sample_quadratures(rho, PhaseSchedule::grid(2), d, 0, 1), ConfigError);
    d.eta_ls = 0.0;
    CHECK_THROWS_AS(sample_quadratures(rho, PhaseSchedule::grid(2), d, 10, 1), ConfigError);
    CHECK_THROWS_AS(PhaseSchedule::grid(0), ConfigError);
    CHECK(DetectorModel{1, 1, 100}.validate().size() == 1);
}

TEST_CASE("detector_counts statistics")
{
    DetectorModel d;
    d.eta_q = 0.9;
    d.lo_mean_photons = 1e6;
    d.sigma_e = 300;
    Engine eng = make_stream(17, 0);
    const int n = 40000;
    std::vector<double> diff(n), q3(n);
    for (int i = 0; i < n; ++i)
        diff[i] = static_cast<double>(detector_counts(0.0, 0.0, d, eng).difference());
    const auto m = moments(diff);
    const double expect = d.eta_q * d.lo_mean_photons + 2 * d.sigma_e * d.sigma_e;
    CHECK(std::abs(m.var - expect) <= 3 * m.var_se());

    for (int i = 0; i < n; ++i)
        q3[i] = static_cast<double>(detector_counts(3.0, 0.0, d, eng).difference());
    const auto m3 = moments(q3);
    CHECK(std::abs(m3.mean - std::sqrt(2.0) * d.eta_eff() * 1e3 * 3.0) <= 3 * m3.mean_se());

    DetectorModel blocked;
    blocked.lo_mean_photons = 0;
    const auto c = detector_counts(0.0, 0.0, blocked, eng);
    CHECK(c.n1 == 0);
    CHECK(c.n2 == 0);

    DetectorModel weak;
    weak.lo_mean_photons = 4;
    CHECK_THROWS_AS(detector_counts(5.0, 0.0, weak, eng), NumericalError);
}

TEST_CASE("scaled difference reproduces vacuum variance 1/(2 eta)")
{
    DetectorModel d;
    d.eta_q = 0.7;
    d.lo_mean_photons = 1e6;
    Engine eng = make_stream(23, 0);
    std::vector<double> x(50000);
    for (auto& v : x)
        v = scaled_difference(detector_counts(0.0, 0.0, d, eng), d);
    const auto m = moments(x);
    CHECK(std::abs(m.var - 1 / (2 * 0.7)) <= 3 * m.var_se());
}

TEST_CASE("count path and quadrature path agree for the same detector")
{
    DetectorModel d;
    d.eta_q = 0.8;
    d.eta_ls = 0.9;
    d.lo_mean_photons = 1e6;
    d.sigma_e = 400;
    const cplx alpha(1.5, 0.5);
    const double th = 0.3;
    // classical amplitude of the coherent signal; the shot noise carries the vacuum part
    const double q_cl = std::sqrt(2.0) * (alpha * std::polar(1.0, -th)).real();
    Engine eng = make_stream(31, 0);
    const int n = 60000;
    std::vector<double> a(n);
    for (auto& v : a)
        v = scaled_difference(detector_counts(q_cl, th, d, eng), d);
    // rotate the state so a single-phase grid at 0 measures phase th
    const auto rho = make_state(StateSpec::coherent(alpha * std::polar(1.0, -th)));
    const auto ds = sample_quadratures(rho, PhaseSchedule::grid(1), d, n, 33);
    const std::vector<double> b(ds.q.data(), ds.q.data() + n);
    const auto ma = moments(a), mb = moments(b);
    CHECK(std::abs(ma.mean - mb.mean) <= 3 * std::hypot(ma.mean_se(), mb.mean_se()));
    CHECK(std::abs(ma.var - mb.var) <= 3 * std::hypot(ma.var_se(), mb.var_se()));
}

TEST_CASE("Skellam law")
{
    SUBCASE("symmetric zero against the Bessel function")
    {
        for (double mu : {0.3, 5.0, 50.0, 300.0}) {
            const auto p = skellam_pdf(mu, mu);
            const double expect = std::exp(-2 * mu) * std::cyl_bessel_i(0.0, 2 * mu);
            CHECK(p.prob(0) == doctest::Approx(expect).epsilon(1e-9));
            CHECK(p.prob(3) == doctest::Approx(std::exp(-2 * mu) * std::cyl_bessel_i(3.0, 2 * mu)).epsilon(1e-9));
        }
    }
    SUBCASE("direct convolution of two Poisson laws")
    {
        const double mu1 = 40, mu2 = 25;
        const auto p = skellam_pdf(mu1, mu2);
        for (int k = -20; k <= 50; k += 7) {
            double s = 0.0;
            for (int m = std::max(0, -k); m < 400; ++m) {
                const int j = m + k;
                s += std::exp(j * std::log(mu1) - mu1 - std::lgamma(j + 1.0) + m * std::log(mu2) - mu2 -
                              std::lgamma(m + 1.0));
            }
            CHECK(p.prob(k) == doctest::Approx(s).epsilon(1e-9));
        }
        CHECK(p.mean() == doctest::Approx(mu1 - mu2).epsilon(1e-12));
        CHECK(p.variance() == doctest::Approx(mu1 + mu2).epsilon(1e-10));
    }
    SUBCASE("one-sided Poisson limit")
    {
        const auto p = skellam_pdf(3.0, 0.0);
        CHECK(p.prob(2) == doctest::Approx(4.5 * std::exp(-3.0)));
        CHECK(p.prob(-1) == 0.0);
        const auto m = skellam_pdf(0.0, 2.0);
        CHECK(m.prob(-1) == doctest::Approx(2 * std::exp(-2.0)));
    }
    SUBCASE("coherent signal means and the Gaussian limit")
    {
        DetectorModel d;
        d.lo_mean_photons = 1e6;
        const cplx alpha(2.0, 0.0);
        const auto p = skellam_difference_pdf(alpha, 0.0, d);
        // mean difference is 2 |alpha_L| Re(alpha)
        CHECK(p.mean() == doctest::Approx(2 * 1e3 * 2.0).epsilon(1e-9));
        CHECK(gaussian_total_variation(p) <= 1e-3);
        const auto v = skellam_difference_pdf(StateSpec::vacuum(), 0.0, d);
        CHECK(gaussian_total_variation(v) <= 1e-3);
        CHECK(gaussian_total_variation(skellam_pdf(2.0, 2.0)) > 1e-2);
        CHECK_THROWS_AS(skellam_difference_pdf(StateSpec::fock(1), 0.0, d), UnsupportedStateError);
    }
}

TEST_CASE("mode overlap")
{
    const int n = 4001;
    const VectorXd x = linspace(-20, 20, n);
    const double dx = x[1] - x[0];
    VectorXcd g0(n), g1(n), odd(n);
    for (int i = 0; i < n; ++i) {
        g0[i] = std::pow(kPi, -0.25) * std::exp(-x[i] * x[i] / 2);
        g1[i] = std::pow(kPi, -0.25) * std::exp(-(x[i] - 1) * (x[i] - 1) / 2);
        odd[i] = std::pow(kPi, -0.25) * std::sqrt(2.0) * x[i] * std::exp(-x[i] * x[i] / 2);
    }
    CHECK(mode_overlap(g0, g0, dx) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(mode_overlap(g0, odd, dx) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(mode_overlap(g0, g1, dx) == doctest::Approx(std::exp(-0.25)).epsilon(1e-9));
    CHECK_THROWS_AS(mode_overlap(g0 * 2.0, g1, dx), DataError);
}

TEST_CASE("calibration recovers planted gain and noise")
{
    DetectorModel d;
    d.gain = 1e6;
    d.sigma_e = 300;
    const std::vector<double> levels = {1e4, 1e7, 2e7, 4e7, 8e7};
    const auto r = calibration_curve(d, levels, 40000, 77);
    CHECK(std::abs(r.gain / 1e6 - 1) <= 3 * r.gain_stderr / 1e6);
    CHECK(std::abs(r.sigma_e / 300 - 1) <= 0.05);
    CHECK_FALSE(r.nonlinear);
    CHECK(r.table.size() == 5);

    DetectorModel quiet;
    quiet.gain = 2e5;
    const auto z = calibration_curve(quiet, {1e5, 1e6, 3e6, 1e7}, 20000, 78);
    CHECK(std::abs(z.intercept) <= 3 * z.intercept_stderr);
    CHECK(std::abs(z.gain / 2e5 - 1) <= 3 * z.gain_stderr / 2e5);

    CHECK_THROWS_AS(calibration_curve(d, {1e6, 1e6, 2e6}, 100, 1), ConfigError);
}

TEST_CASE("gain balancing")
{
    CHECK(gain_balancing_sim(1e6, 1e2, 1e2) == doctest::Approx(2e-4));
    CHECK(gain_balancing_sim(5e5, 0, 0) == 0.0);
    CHECK_THROWS_AS(gain_balancing_sim(0, 1, 1), ConfigError);
    for (double ratio : {0.9, 1.03, 1.3}) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto run = gain_balancing_monte_carlo(1e6, 1e2, 1e2, ratio, seed);
            CHECK(run.converged);
            CHECK(run.mismatch <= run.bound);
        }
    }
}
