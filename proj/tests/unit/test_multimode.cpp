#include "doctest.h"

#include "ohtlab/errors.hpp"
#include "ohtlab/multimode.hpp"

#include <algorithm>
#include <cmath>

using namespace ohtlab;

namespace {

DensityMatrix state(StateSpec s, int dim)
{
    s.truncation_dim = dim;
    return make_state(s);
}

// sup |F_emp - F| against the CDF of a single-mode state at theta
double ks_distance(VectorXd x, const DensityMatrix& rho, double theta)
{
    std::sort(x.data(), x.data() + x.size());
    const VectorXd axis = linspace(-9, 9, 18001);
    const VectorXd pdf = quadrature_pdf(rho, theta, axis);
    const double h = axis[1] - axis[0];
    VectorXd cdf(axis.size());
    cdf[0] = 0;
    for (Eigen::Index j = 1; j < axis.size(); ++j)
        cdf[j] = cdf[j - 1] + 0.5 * h * (pdf[j - 1] + pdf[j]);
    double d = 0;
    const double n = static_cast<double>(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double t = std::clamp((x[i] - axis[0]) / h, 0.0, double(axis.size() - 2));
        const auto j = static_cast<Eigen::Index>(t);
        const double f = cdf[j] + (t - j) * (cdf[j + 1] - cdf[j]);
        d = std::max({d, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
    }
    return d;
}

double ks_two_sample(VectorXd a, VectorXd b)
{
    std::sort(a.data(), a.data() + a.size());
    std::sort(b.data(), b.data() + b.size());
    Eigen::Index i = 0, j = 0;
    double d = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
    }
    return d;
}

double ks_limit_1pct(double n) { return 1.628 / std::sqrt(n); }

double mean_sq(const VectorXd& v) { return v.array().square().mean(); }

// (|0,1> + |1,0>)/sqrt(2) mixed with a little |1,1>
TwoModeState entangled()
{
    const int d = 3;
    VectorXcd v = VectorXcd::Zero(d * d);
    v[0 * d + 1] = 1.0;
    v[1 * d + 0] = cplx(0.0, 1.0);
    v.normalize();
    VectorXcd w = VectorXcd::Zero(d * d);
    w[1 * d + 1] = 1.0;
    w[2 * d + 0] = 0.5;
    w.normalize();
    return TwoModeState::joint(0.8 * v * v.adjoint() + 0.2 * w * w.adjoint(), d, d);
}

} // namespace

TEST_CASE("GRIPS map")
{
    const double zeta = 0.7;
    const Matrix2cd id = grips_transform(0.0, zeta);
    CHECK(std::abs(id(0, 0) - 1.0) <= 1e-15);
    CHECK(std::abs(id(0, 1)) <= 1e-15);
    CHECK(std::abs(id(1, 1) - std::polar(1.0, zeta)) <= 1e-15);
    const Matrix2cd sw = grips_transform(kPi, 0.0);
    CHECK(std::abs(sw(0, 1) - 1.0) <= 1e-15);
    CHECK(std::abs(sw(1, 0) + 1.0) <= 1e-15);
    CHECK(std::abs(sw(0, 0)) <= 1e-15);
    Engine eng(3);
    std::uniform_real_distribution<double> u(0, 2 * kPi);
    for (int k = 0; k < 100; ++k) {
        const Matrix2cd m = grips_transform(u(eng), u(eng));
        CHECK((m.adjoint() * m - Matrix2cd::Identity()).cwiseAbs().maxCoeff() <= 1e-12);
    }
    // the first output mode is the dual-LO detected mode at gamma = 2 alpha
    for (int k = 0; k < 10; ++k) {
        LOSuperposition lo;
        lo.alpha = u(eng) / 4;
        lo.zeta = u(eng);
        const Matrix2cd m = grips_transform(2 * lo.alpha, lo.zeta);
        CHECK((m.row(0) - lo.mode_row()).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("joint mode transform moves coherent amplitudes")
{
    const cplx a1(0.6, -0.2), a2(0.1, 0.5);
    const auto st = TwoModeState::product(state(StateSpec::coherent(a1), 8), state(StateSpec::coherent(a2), 8));
    const Matrix2cd m = grips_transform(1.1, 0.4);
    int d = 0;
    const MatrixXcd r = transform_joint(st.rho, st.d1, st.d2, m, d);
    CHECK(d == 15);
    CHECK(std::abs(r.trace() - st.rho.trace()) <= 1e-12);
    const auto red = grips_mode_state(st, 1.1, 0.4);
    MatrixXcd a = MatrixXcd::Zero(d, d);
    for (int n = 1; n < d; ++n)
        a(n - 1, n) = std::sqrt(double(n));
    const cplx mean = (red.elements * a).trace();
    CHECK(std::abs(mean - (m(0, 0) * a1 + m(0, 1) * a2)) <= 1e-6);
    // splitting one photon gives (|1,0> - |0,1>)/sqrt(2) up to sign
    const auto sp = TwoModeState::split(state(StateSpec::fock(1), 2));
    CHECK(sp.d1 == 2);
    CHECK(std::abs(sp.rho(1 * 2 + 0, 1 * 2 + 0).real() - 0.5) <= 1e-12);
    CHECK(std::abs(sp.rho(0 * 2 + 1, 0 * 2 + 1).real() - 0.5) <= 1e-12);
    CHECK(std::abs(sp.rho(3, 3)) <= 1e-12);
}

TEST_CASE("dual-LO limits reduce to single-mode measurements")
{
    const auto rho1 = state(StateSpec::coherent({0.7, 0.3}), 10);
    const auto rho2 = state(StateSpec::squeezed_vacuum(0.25, 0.5), 10);
    const auto st = TwoModeState::product(rho1, rho2);
    const std::size_t n = 40000;
    LOSuperposition lo;
    lo.random_theta = lo.random_zeta = false;
    lo.theta = 0.9;
    lo.zeta = 2.1;
    lo.alpha = 0.0;
    const auto ds1 = combined_quadrature_samples(st, lo, {}, n, 1);
    CHECK(ks_distance(ds1.q, rho1, lo.theta) <= ks_limit_1pct(n));
    lo.alpha = kPi / 2;
    const auto ds2 = combined_quadrature_samples(st, lo, {}, n, 2);
    CHECK(ks_distance(ds2.q, rho2, lo.theta - lo.zeta) <= ks_limit_1pct(n));
    CHECK(ds2.meta.dual);
    CHECK(ds2.meta.zeta_schedule == "fixed");

    const auto vac = TwoModeState::product(state(StateSpec::vacuum(), 1), state(StateSpec::vacuum(), 1));
    for (double alpha : {0.3, 0.8, 1.3}) {
        lo.alpha = alpha;
        const auto ds = combined_quadrature_samples(vac, lo, {}, n, 3);
        const double se = 0.5 * std::sqrt(2.0 / n);
        CHECK(std::abs(mean_sq(ds.q) - 0.5) <= 3 * se);
    }
}

TEST_CASE("dual-LO and GRIPS pictures sample the same observable")
{
    const auto st = entangled();
    const std::size_t n = 20000;
    for (double alpha : {0.4, 1.0}) {
        LOSuperposition lo;
        lo.random_theta = lo.random_zeta = false;
        lo.alpha = alpha;
        lo.theta = 0.3;
        lo.zeta = 1.2;
        const auto dual = combined_quadrature_samples(st, lo, {}, n, 10);
        const auto red = grips_mode_state(st, 2 * alpha, lo.zeta);
        const QuadratureSampler single(red);
        Engine eng(11);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        VectorXd q(n);
        for (auto& x : q)
            x = single.sample(lo.theta, u(eng));
        CHECK(ks_two_sample(dual.q, q) <= ks_limit_1pct(n / 2.0));
        CHECK(ks_distance(dual.q, red, lo.theta) <= ks_limit_1pct(n));
    }
}

TEST_CASE("number laws")
{
    NumberLaw law;
    law.nbar1 = law.nbar2 = 1.0;
    law.correlation = 1.0;
    CHECK(number_law_moments(law).g12() == doctest::Approx(3.0));
    law.correlation = 0.0;
    CHECK(number_law_moments(law).g12() == doctest::Approx(1.0));
    law.coupling = NumberLaw::Coupling::split;
    CHECK(number_law_moments(law).g12() == doctest::Approx(2.0));
    law.coupling = NumberLaw::Coupling::switching;
    CHECK(number_law_moments(law).g12() == doctest::Approx(0.0));
    NumberLaw bad;
    bad.correlation = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.correlation = 0.5;
    bad.nbar2 = 2.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    // planted numbers follow the law
    NumberLaw th;
    th.nbar1 = th.nbar2 = 1.0;
    th.correlation = 1.0;
    JointRecord rec;
    LOSuperposition lo;
    combined_quadrature_samples(TwoModeState::planted(th), lo, {}, 50000, 4, &rec);
    double s = 0;
    for (std::size_t i = 0; i < rec.n1.size(); ++i) {
        CHECK(rec.n1[i] == rec.n2[i]);
        s += rec.n1[i];
    }
    CHECK(std::abs(s / rec.n1.size() - 1.0) <= 4 * std::sqrt(2.0 / rec.n1.size()));
}

TEST_CASE("three-alpha g2")
{
    const std::size_t n = 200000;
    DetectorModel det;
    SUBCASE("independent thermal modes")
    {
        NumberLaw law;
        law.nbar1 = law.nbar2 = 1.0;
        const auto r = two_time_g2(simulate_three_alpha(TwoModeState::planted(law), det, n, 20));
        CHECK(std::abs(r.g12.value - 1.0) <= 0.05);
        CHECK(std::abs(r.n1.value - 1.0) <= 3 * r.n1.std_err);
    }
    SUBCASE("number-correlated thermal pair")
    {
        NumberLaw law;
        law.nbar1 = law.nbar2 = 1.0;
        law.correlation = 1.0;
        const auto st = TwoModeState::planted(law);
        const auto runs = simulate_three_alpha(st, det, n, 21);
        const auto r = two_time_g2(runs);
        // brute-force oracle from the planted numbers of the same pulses
        JointRecord rec;
        LOSuperposition lo;
        combined_quadrature_samples(st, lo, det, n, stream_seed(21, 0), &rec);
        double s1 = 0, s12 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            s1 += rec.n1[i];
            s12 += double(rec.n1[i]) * rec.n2[i];
        }
        const double oracle = (s12 / n) / ((s1 / n) * (s1 / n));
        CHECK(std::abs(r.g12.value - oracle) <= 3 * r.g12.std_err);
        CHECK(std::abs(r.g12.value - 3.0) <= 0.15);
    }
    SUBCASE("one mode split onto both arms matches single-mode g2")
    {
        NumberLaw law;
        law.nbar1 = law.nbar2 = 0.75;
        law.coupling = NumberLaw::Coupling::split;
        const auto r = two_time_g2(simulate_three_alpha(TwoModeState::planted(law), det, n, 22));
        // the undivided source: thermal, mean 1.5
        const auto single = g2_single(sample_quadratures(make_state(StateSpec::thermal(1.5)),
                                                         PhaseSchedule::uniform_random(), det, n, 23));
        const double comb = std::sqrt(r.g12.std_err * r.g12.std_err + single.std_err * single.std_err);
        CHECK(std::abs(r.g12.value - single.value) <= 3 * comb);
    }
    SUBCASE("joint Fock state split on a beam splitter")
    {
        const auto st = TwoModeState::split(state(StateSpec::coherent({1.0, 0.0}), 8));
        const auto r = two_time_g2(simulate_three_alpha(st, det, 50000, 24));
        CHECK(std::abs(r.g12.value - 1.0) <= 3 * r.g12.std_err);
    }
}

TEST_CASE("cross moment matches the joint record")
{
    NumberLaw law;
    law.nbar1 = 1.0;
    law.nbar2 = 0.5;
    const auto st = TwoModeState::planted(law);
    const std::size_t n = 200000;
    const auto runs = simulate_three_alpha(st, {}, n, 30);
    const auto r = two_time_g2(runs);
    JointRecord rec;
    combined_quadrature_samples(st, {}, {}, n, 31, &rec);
    const VectorXd prod = rec.q1.array().square() * rec.q2.array().square();
    const double m = prod.mean();
    const double se = std::sqrt((prod.array() - m).square().sum() / (n - 1) / n);
    CHECK(std::abs(r.cross_q2q2.value - m) <= 3 * std::sqrt(se * se + r.cross_q2q2.std_err * r.cross_q2q2.std_err));
    // exact: (n1 + 1/2)(n2 + 1/2) for independent modes
    CHECK(std::abs(r.cross_q2q2.value - 1.5 * 1.0) <= 3 * r.cross_q2q2.std_err);
}

TEST_CASE("three-alpha input checks")
{
    NumberLaw law;
    const auto st = TwoModeState::planted(law);
    auto runs = simulate_three_alpha(st, {}, 2000, 40);
    auto short_runs = runs;
    short_runs.mode2 = simulate_three_alpha(st, {}, 1000, 41).mode2;
    CHECK_THROWS_AS(two_time_g2(short_runs), DataError);
    auto swapped = runs;
    std::swap(swapped.mode1, swapped.mode2);
    CHECK_THROWS_AS(two_time_g2(swapped), ConfigError);
    LOSuperposition fixed;
    fixed.alpha = kPi / 4;
    fixed.random_zeta = false;
    auto no_zeta = runs;
    no_zeta.combined = combined_quadrature_samples(st, fixed, {}, 2000, 42);
    CHECK_THROWS_AS(two_time_g2(no_zeta), DataError);
    fixed.random_zeta = true;
    fixed.random_theta = false;
    auto no_theta = runs;
    no_theta.combined = combined_quadrature_samples(st, fixed, {}, 2000, 43);
    CHECK_THROWS_AS(two_time_g2(no_theta), DataError);
    LOSuperposition bad;
    bad.alpha = 2.0;
    CHECK_THROWS_AS(combined_quadrature_samples(st, bad, {}, 10, 1), ConfigError);
}

TEST_CASE("polarization g2 table")
{
    const std::size_t n = 100000;
    auto row = [](const std::vector<PolarizationRow>& rows, PolarizationBasis b) {
        return *std::find_if(rows.begin(), rows.end(), [&](const PolarizationRow& r) { return r.basis == b; });
    };
    SUBCASE("uncorrelated circular thermal emission")
    {
        NumberLaw law;
        law.nbar1 = law.nbar2 = 1.0;
        auto st = TwoModeState::planted(law);
        st.basis = PolarizationBasis::circular;
        const auto rows = polarization_g2(simulate_polarization_runs(st, {}, n, 50));
        REQUIRE(rows.size() == 3);
        const auto rl = row(rows, PolarizationBasis::circular);
        REQUIRE(rl.g11_valid);
        REQUIRE(rl.g22_valid);
        CHECK(std::abs(rl.g11.value - 2.0) <= 3 * rl.g11.std_err);
        CHECK(std::abs(rl.g22.value - 2.0) <= 3 * rl.g22.std_err);
        CHECK(std::abs(rl.g12.value - 1.0) <= 3 * rl.g12.std_err);
    }
    SUBCASE("anticorrelated circular pair")
    {
        NumberLaw law;
        law.coupling = NumberLaw::Coupling::switching;
        auto st = TwoModeState::planted(law);
        st.basis = PolarizationBasis::circular;
        const auto rows = polarization_g2(simulate_polarization_runs(st, {}, n, 51));
        const auto rl = row(rows, PolarizationBasis::circular);
        CHECK(rl.g12.value + 3 * rl.g12.std_err < 1.0);
    }
    SUBCASE("Poissonian circular modes seen in linear bases")
    {
        NumberLaw law;
        law.stats = NumberLaw::Statistics::poisson;
        auto st = TwoModeState::planted(law);
        st.basis = PolarizationBasis::circular;
        const auto rows = polarization_g2(simulate_polarization_runs(st, {}, n, 52));
        const auto rl = row(rows, PolarizationBasis::circular);
        CHECK(std::abs(rl.g11.value - 1.0) <= 3 * rl.g11.std_err);
        CHECK(std::abs(rl.g12.value - 1.0) <= 3 * rl.g12.std_err);
        // random relative phase: I_H = n(1 + cos phi), so g_HH = 3/2 and g_HV = 1/2
        for (auto b : {PolarizationBasis::hv, PolarizationBasis::diagonal}) {
            const auto r = row(rows, b);
            CHECK(std::abs(r.g11.value - 1.5) <= 3 * r.g11.std_err);
            CHECK(std::abs(r.g22.value - 1.5) <= 3 * r.g22.std_err);
            CHECK(std::abs(r.g12.value - 0.5) <= 3 * r.g12.std_err);
        }
    }
    SUBCASE("incomplete basis set")
    {
        NumberLaw law;
        auto runs = simulate_polarization_runs(TwoModeState::planted(law), {}, 1000, 53);
        runs.erase(PolarizationBasis::diagonal);
        CHECK_THROWS_AS(polarization_g2(runs), ConfigError);
    }
}

TEST_CASE("Stokes moments")
{
    const int d = 10;
    {
        MatrixXcd r = MatrixXcd::Zero(d * d, d * d);
        r(1 * d + 0, 1 * d + 0) = 1.0;
        const auto m = stokes_moments(TwoModeState::joint(r, d, d));
        CHECK(m.means[0] == doctest::Approx(0.5));
        CHECK(std::abs(m.means[1]) <= 1e-15);
        CHECK(std::abs(m.means[2]) <= 1e-15);
    }
    const cplx a(0.8, 0.3);
    const auto coh = TwoModeState::product(state(StateSpec::coherent(a), d), state(StateSpec::coherent(a), d));
    const auto m = stokes_moments(coh);
    CHECK(std::abs(m.means[1] - std::norm(a)) <= 1e-6);
    CHECK(std::abs(m.means[0]) <= 1e-12);
    CHECK((m.second - m.second.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m.second);
    CHECK(es.eigenvalues().minCoeff() >= -1e-9);

    // su(2) algebra holds wherever the truncation edge is not reached
    const auto s = stokes_operators(d);
    const MatrixXcd c = s.j1 * s.j2 - s.j2 * s.j1 - cplx(0, 1) * s.j3;
    double interior = 0;
    for (int n1 = 0; n1 < d; ++n1)
        for (int n2 = 0; n2 < d; ++n2)
            for (int m1 = 0; m1 < d; ++m1)
                for (int m2 = 0; m2 < d; ++m2)
                    if (n1 + n2 < d - 1 && m1 + m2 < d - 1)
                        interior = std::max(interior, std::abs(c(n1 * d + n2, m1 * d + m2)));
    CHECK(interior <= 1e-12);

    CHECK_THROWS_AS(stokes_moments(TwoModeState::product(state(StateSpec::vacuum(), 4),
                                                         state(StateSpec::vacuum(), 5))),
                    ConfigError);
    CHECK_THROWS_AS(stokes_moments(TwoModeState::planted(NumberLaw{})), UnsupportedStateError);
}

TEST_CASE("two-mode state guards")
{
    CHECK_THROWS_AS(TwoModeState::joint(MatrixXcd::Identity(4, 4), 2, 2), DataError);
    CHECK_THROWS_AS(TwoModeState::joint(MatrixXcd::Identity(3, 3) / 3.0, 2, 2), ConfigError);
    CHECK_THROWS_AS(TwoModeState::product(make_state(StateSpec::vacuum()), make_state(StateSpec::vacuum())),
                    ConfigError);  // default truncation 20 exceeds the joint cap
    CHECK_THROWS_AS(grips_mode_state(TwoModeState::planted(NumberLaw{}), 1.0, 0.0), UnsupportedStateError);
}

TEST_CASE("dual-LO sampling is deterministic across threads")
{
    const auto st = entangled();
    LOSuperposition lo;
    lo.alpha = 0.6;
    set_max_threads(1);
    const auto a = combined_quadrature_samples(st, lo, {}, 5000, 77);
    set_max_threads(4);
    const auto b = combined_quadrature_samples(st, lo, {}, 5000, 77);
    set_max_threads(0);
    CHECK(a.q == b.q);
    CHECK(a.zeta == b.zeta);
}
