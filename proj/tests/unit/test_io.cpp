#include "doctest.h"

#include "ohtlab/errors.hpp"
#include "ohtlab/io.hpp"
#include "ohtlab/radon.hpp"

using namespace ohtlab;

TEST_CASE("sha256 matches the standard test vector")
{
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("state and detector JSON")
{
    const StateSpec s = StateSpec::squeezed_coherent(0.3, 0.4, {1.0, -0.5});
    const StateSpec t = state_spec_from_json(state_spec_to_json(s));
    CHECK(t.kind == s.kind);
    CHECK(t.alpha == s.alpha);
    CHECK(t.r == s.r);
    CHECK_THROWS_AS(state_spec_from_json(json{{"kind", "coherent"}, {"alpha", {1, 0}}, {"colour", 3}}), ConfigError);
    CHECK_THROWS_AS(state_spec_from_json(json{{"kind", "cat"}}), ConfigError);
    DetectorModel d;
    d.eta_q = 0.7;
    d.sigma_e = 12.0;
    const DetectorModel e = detector_from_json(detector_to_json(d));
    CHECK(e.eta_q == 0.7);
    CHECK(e.sigma_e == 12.0);
    CHECK_THROWS_AS(detector_from_json(json{{"eta_q", 1.5}}), ConfigError);
}

TEST_CASE("quadrature dataset round trip")
{
    const auto ds = sample_quadratures(make_state(StateSpec::coherent({0.5, 0.5})), PhaseSchedule::grid(8), {}, 500, 3,
                                       StateSpec::coherent({0.5, 0.5}));
    const std::string text = quad_dataset_to_jsonl(ds);
    CHECK(jsonl_format(text) == "ohtlab-quad-v1");
    const auto back = quad_dataset_from_jsonl(text);
    CHECK(back.q == ds.q);
    CHECK(back.theta == ds.theta);
    CHECK(back.meta.schedule.d == 8);
    CHECK(back.meta.source.has_value());
    CHECK(quad_dataset_to_jsonl(back) == text);

    std::string bad = text;
    bad.replace(bad.find("ohtlab-quad-v1"), 14, "ohtlab-quad-v9");
    CHECK_THROWS_AS(quad_dataset_from_jsonl(bad), DataError);
    // drop the last record
    std::string cut = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
    CHECK_THROWS_AS(quad_dataset_from_jsonl(cut), DataError);
    // cut mid-line
    CHECK_THROWS_AS(quad_dataset_from_jsonl(text.substr(0, text.size() - 7)), DataError);
}

TEST_CASE("array and spectral records round trip")
{
    const PixelGrid g{8};
    DetectorModel det;
    det.lo_mean_photons = 1e5;
    const auto f = simulate_array_frames({}, det, g, PhaseSchedule::uniform_random(), 20, 4);
    const auto fb = array_frames_from_jsonl(array_frames_to_jsonl(f));
    CHECK(fb.frames == f.frames);
    CHECK(fb.theta == f.theta);
    CHECK(fb.vacuum_offsets == f.vacuum_offsets);
    CHECK(array_frames_to_jsonl(fb) == array_frames_to_jsonl(f));

    SpectralOptions opt;
    opt.window = 6;
    const auto r = unbalanced_spectral_sim({{2, StateSpec::coherent({1, 0})}}, opt, 10, 5);
    const auto rb = spectral_records_from_jsonl(spectral_records_to_jsonl(r));
    CHECK(rb.k == r.k);
    CHECK(rb.l_values == r.l_values);
}

TEST_CASE("density matrix, Wigner and table exports")
{
    const auto rho = make_state(StateSpec::coherent({0.3, 0.1}));
    const auto back = density_matrix_from_json(density_matrix_to_json(rho));
    CHECK(back.elements == rho.elements);
    CHECK_THROWS_AS(density_matrix_from_json(json{{"dim", 2}}), DataError);

    GridSpec gs;
    gs.n_q = 5;
    gs.n_p = 7;
    const auto w = wigner_from_rho(rho, gs);
    const std::string csv = wigner_to_csv(w);
    CHECK(csv.rfind("q,p,w\n", 0) == 0);
    const auto wb = wigner_from_csv(csv);
    CHECK(wb.values == w.values);
    CHECK(wb.p_axis == w.p_axis);
    CHECK_THROWS_AS(wigner_from_csv("x,y\n1,2\n"), DataError);

    const auto rep = moment_report(sample_quadratures(rho, PhaseSchedule::uniform_random(), {}, 2000, 6));
    const json j = moment_report_to_json(rep);
    CHECK(j["factorial_moments"].size() == 4);
    CHECK(moment_report_to_csv(rep).rfind("quantity,value,stderr\n", 0) == 0);
    CHECK(phase_distribution_to_csv(phase_distribution(rho, 10, 8)).rfind("phi,pr\n", 0) == 0);
    CHECK(temporal_to_csv(VectorXd::Zero(2), VectorXcd::Zero(2)) == "t,re,im\n0,0,0\n0,0,0\n");
}
