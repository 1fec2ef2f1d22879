#include "doctest.h"

#include "ohtlab/errors.hpp"
#include "ohtlab/pattern.hpp"

#include <cmath>

using namespace ohtlab;

namespace {

// overlap of M_mn with psi_a psi_b, using trapezoid weights (a different rule
// from the Simpson rule used to build the table)
double overlap(const PatternFunctionTable& pf, int m, int n, int a, int b)
{
    const MatrixXd psi = hermite_table(std::max(a, b), pf.q_axis);
    const VectorXd& v = pf.at(m, n);
    const double h = pf.q_axis[1] - pf.q_axis[0];
    double s = 0.0;
    for (Eigen::Index j = 0; j < pf.q_axis.size(); ++j) {
        const double w = (j == 0 || j == pf.q_axis.size() - 1) ? 0.5 : 1.0;
        s += w * v[j] * psi(a, j) * psi(b, j);
    }
    return s * h;
}

int local_maxima(const VectorXd& f, const VectorXd& x, double half_width)
{
    int c = 0;
    for (Eigen::Index i = 1; i + 1 < f.size(); ++i)
        if (std::abs(x[i]) <= half_width && f[i] > f[i - 1] && f[i] >= f[i + 1])
            ++c;
    return c;
}

DensityMatrix random_pure(int dim, unsigned seed)
{
    Engine eng(seed);
    std::normal_distribution<double> g;
    VectorXcd v(dim);
    for (int i = 0; i < dim; ++i)
        v[i] = cplx(g(eng), g(eng));
    v.normalize();
    return DensityMatrix(v * v.adjoint());
}

} // namespace

TEST_CASE("pattern functions are dual to the band products")
{
    const int dim = 13;
    const auto pf = build_pattern_functions(dim);
    REQUIRE(pf.values.size() == static_cast<std::size_t>(dim * (dim + 1) / 2));
    double worst = 0.0;
    for (int k = 0; k < dim; ++k)
        for (int n = 0; n + k < dim; ++n)
            for (int v = 0; v + k < dim; ++v)
                worst = std::max(worst, std::abs(overlap(pf, n + k, n, v + k, v) - (n == v ? 1.0 : 0.0)));
    CHECK(worst <= 1e-6);
    CHECK(overlap(pf, 0, 0, 0, 0) == doctest::Approx(1.0).epsilon(1e-9));
    for (int k = 1; k < dim; ++k)
        CHECK(std::abs(overlap(pf, 0, 0, k, k)) <= 1e-6);
    // M_mn and M_nm share storage, and parity follows the band
    CHECK(&pf.at(2, 5) == &pf.at(5, 2));
    const VectorXd& m31 = pf.at(3, 1);
    const auto last = pf.q_axis.size() - 1;
    for (Eigen::Index j = 0; j < pf.q_axis.size(); j += 97)
        CHECK(m31[j] == doctest::Approx(m31[last - j]).epsilon(1e-9));
    for (double c : pf.band_condition)
        CHECK(c < 1e12);
}

TEST_CASE("diagonal pattern functions follow the Fock-state lobes")
{
    const auto pf = build_pattern_functions(8);
    for (int n = 0; n <= 5; ++n) {
        CAPTURE(n);
        const VectorXd psi2 = hermite_psi(n, pf.q_axis).array().square();
        const double reach = std::sqrt(2.0 * n + 1.0) + 0.5;
        CHECK(local_maxima(psi2, pf.q_axis, reach) == n + 1);
        CHECK(local_maxima(pf.at(n, n), pf.q_axis, reach) == n + 1);
    }
}

TEST_CASE("pattern table guards")
{
    CHECK_THROWS_AS(build_pattern_functions(0), ConfigError);
    CHECK_THROWS_AS(build_pattern_functions(31), ConfigError);
    CHECK_THROWS_AS(build_pattern_functions(4, linspace(-5, 5, 1001)), ConfigError);
    CHECK_THROWS_AS(build_pattern_functions(4, linspace(-8, 8, 1000)), ConfigError);
    try {
        build_pattern_functions(30);
        FAIL("expected ill-conditioned Gram matrix");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("band") != std::string::npos);
    }
}

TEST_CASE("vacuum reconstruction on an 8-phase grid")
{
    const auto pf = build_pattern_functions(13);
    DetectorModel d;
    const auto ds = sample_quadratures(make_state(StateSpec::vacuum()), PhaseSchedule::grid(8, kPi), d, 200000, 5);
    const auto r = rho_from_quadratures(ds, pf, 8, 7);
    REQUIRE(r.rho.dim() == 8);
    CHECK(std::abs(r.rho.elements(0, 0).real() - 1.0) <= 0.02);
    for (int m = 0; m < 8; ++m)
        for (int n = 0; n < 8; ++n)
            if (m || n)
                CHECK(std::abs(r.rho.elements(m, n)) <= 0.02);
    CHECK(r.rho.hermiticity_error() == 0.0);
    CHECK(r.errors(0, 0).imag() == 0.0);
}

TEST_CASE("phases on a full-circle grid fold onto [0, pi)")
{
    const auto pf = build_pattern_functions(4);
    DetectorModel d;
    const auto rho = random_pure(4, 3);
    // 8 phases over [0, 2 pi) fold onto 4 over [0, pi)
    const auto ds = sample_quadratures(rho, PhaseSchedule::grid(8), d, 160000, 9);
    CHECK(folded_phase_count(ds.theta) == 4);
    const auto r = rho_from_quadratures(ds, pf, 4);
    for (int m = 0; m < 4; ++m)
        for (int n = 0; n < 4; ++n) {
            const cplx diff = r.rho.elements(m, n) - rho.elements(m, n);
            CHECK(std::abs(diff.real()) <= 4 * r.errors(m, n).real() + 1e-12);
            CHECK(std::abs(diff.imag()) <= 4 * r.errors(m, n).imag() + 1e-12);
        }
    // 4 phases over [0, 2 pi) only give 2 distinct folded phases
    const auto coarse = sample_quadratures(rho, PhaseSchedule::grid(4), d, 4000, 10);
    CHECK(folded_phase_count(coarse.theta) == 2);
    CHECK_THROWS_AS(rho_from_quadratures(coarse, pf, 4), AliasingError);
    CHECK_THROWS_AS(rho_from_quadratures(ds, pf, 3), AliasingError);
    const auto three = sample_quadratures(rho, PhaseSchedule::grid(3, kPi), d, 3000, 12);
    CHECK_NOTHROW(rho_from_quadratures(three, pf, 3, 2));
    CHECK_THROWS_AS(rho_from_quadratures(three, pf, 4), DataError);
    CHECK_THROWS_AS(rho_from_quadratures(ds, pf, 4, 4), ConfigError);
    // random phases cannot be assigned to a grid
    const auto rnd = sample_quadratures(rho, PhaseSchedule::uniform_random(), d, 4000, 11);
    CHECK_THROWS_AS(rho_from_quadratures(rnd, pf, 4), DataError);
    CHECK_NOTHROW(rho_from_quadratures(rnd, pf, 0));
}

TEST_CASE("coherent state matches the exact density matrix")
{
    const int dim = 10;
    const auto pf = build_pattern_functions(dim);
    const cplx alpha(0.8, 0.4);
    DetectorModel d;
    const auto ds = sample_quadratures(make_state(StateSpec::coherent(alpha)), PhaseSchedule::grid(16, kPi), d,
                                       300000, 12);
    const auto r = rho_from_quadratures(ds, pf, 16);
    const VectorXcd c = state_amplitudes(StateSpec::coherent(alpha), dim);
    const MatrixXcd truth = c * c.adjoint();
    const double frob = (r.rho.elements - truth).norm();
    const double comb = r.errors.norm();
    CHECK(frob <= 3 * comb);
}

TEST_CASE("estimator is unbiased across seeds")
{
    const int dim = 4;
    const auto pf = build_pattern_functions(dim);
    const auto rho = random_pure(dim, 21);
    DetectorModel d;
    const int runs = 50;
    MatrixXcd mean = MatrixXcd::Zero(dim, dim);
    MatrixXcd se;
    for (int s = 0; s < runs; ++s) {
        const auto ds = sample_quadratures(rho, PhaseSchedule::grid(4, kPi), d, 20000, 100 + s);
        const auto r = rho_from_quadratures(ds, pf, 4);
        mean += r.rho.elements / static_cast<double>(runs);
        if (s == 0)
            se = r.errors;
    }
    // mean over 50 runs has std err se/sqrt(50) ~ 0.14 se; allow 3 of those
    for (int m = 0; m < dim; ++m)
        for (int n = 0; n < dim; ++n) {
            const cplx b = mean(m, n) - rho.elements(m, n);
            CHECK(std::abs(b.real()) <= 3 * se(m, n).real() / std::sqrt(double(runs)) + 1e-12);
            CHECK(std::abs(b.imag()) <= 3 * se(m, n).imag() / std::sqrt(double(runs)) + 1e-12);
        }
}

TEST_CASE("photon numbers from phase-averaged data")
{
    DetectorModel d;
    const std::size_t n = 200000;
    SUBCASE("vacuum")
    {
        const auto pf = build_pattern_functions(6);
        const auto ds = sample_quadratures(make_state(StateSpec::vacuum()), PhaseSchedule::uniform_random(), d, n, 1);
        const auto p = pn_phase_averaged(ds, pf);
        CHECK(std::abs(p.p[0] - 1.0) <= p.bound);
        for (int k = 1; k < 6; ++k)
            CHECK(std::abs(p.p[k]) <= 4 * p.std_err[k]);
    }
    SUBCASE("thermal n=1 is Bose-Einstein")
    {
        const auto pf = build_pattern_functions(20);
        StateSpec s = StateSpec::thermal(1.0);
        const auto ds = sample_quadratures(make_state(s), PhaseSchedule::swept_linear(), d, n, 2);
        const auto p = pn_phase_averaged(ds, pf);
        for (int k = 0; k < 6; ++k)
            CHECK(std::abs(p.p[k] - std::pow(0.5, k + 1)) <= 3.5 * p.std_err[k]);
    }
    SUBCASE("single photon")
    {
        const auto pf = build_pattern_functions(6);
        const auto ds = sample_quadratures(make_state(StateSpec::fock(1)), PhaseSchedule::uniform_random(), d, n, 3);
        const auto p = pn_phase_averaged(ds, pf);
        CHECK(p.p[1] >= 0.95);
        CHECK(p.std_err[1] <= p.bound);
    }
    SUBCASE("coarse grids alias")
    {
        const auto pf = build_pattern_functions(6);
        const auto ds = sample_quadratures(make_state(StateSpec::vacuum()), PhaseSchedule::grid(4), d, 1000, 4);
        CHECK_THROWS_AS(pn_phase_averaged(ds, pf), AliasingError);
    }
}
