#include "cli.hpp"

#include "ohtlab/array.hpp"
#include "ohtlab/errors.hpp"
#include "ohtlab/io.hpp"
#include "ohtlab/moments.hpp"
#include "ohtlab/multimode.hpp"
#include "ohtlab/parallel.hpp"
#include "ohtlab/pattern.hpp"
#include "ohtlab/radon.hpp"
#include "ohtlab/temporal.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

namespace ohtlab::cli {

namespace fs = std::filesystem;

namespace {

// Leaves name the expected type; objects nest.
const char* const kSchema = R"({
  "seed": "integer",
  "samples": "integer",
  "threads": "integer",
  "state": {"kind": "string", "n": "integer", "alpha": "complex", "nbar": "number", "r": "number",
            "phi": "number", "truncation_dim": "integer"},
  "detector": {"eta_q": "number", "eta_ls": "number", "lo_mean_photons": "number", "sigma_e": "number",
               "gain": "number", "balance_imbalance": "number"},
  "schedule": {"kind": "string", "d": "integer", "span": "number"},
  "reconstruction": {"method": "string",
                     "params": {"grid_points": "integer", "q_max": "number", "k_cutoff": "number",
                                "phase_bins": "integer", "bootstrap": "integer", "n_max": "integer",
                                "dim": "integer", "d_phases": "integer"}},
  "outputs": {"dir": "string", "formats": "array"},
  "array": {"n_pixels": "integer", "pixel_area": "number", "x_min": "number", "x_max": "number",
            "mode": "string", "mode_width": "number", "max_offset": "number"},
  "twomode": {"stats": "string", "coupling": "string", "nbar1": "number", "nbar2": "number",
              "correlation": "number"},
  "temporal": {"n": "integer", "dt": "number", "nu": "number", "band": "number", "pulse_bw": "number",
               "chirp": "number", "t_center": "number", "stride": "integer",
               "gate": {"kind": "string", "width": "number", "bandwidth": "number", "gamma": "number",
                        "omega_l": "number"}},
  "calibration": {"lo_levels": "array", "pulses": "integer"}
})";

struct Config {
    json doc = json::object();
    std::string text;
    std::string path = "<none>";

    int line_of(const std::vector<std::string>& keys) const
    {
        std::size_t pos = 0;
        for (const auto& k : keys) {
            const auto hit = text.find("\"" + k + "\"", pos);
            if (hit == std::string::npos)
                break;
            pos = hit;
        }
        return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
    }

    [[noreturn]] void fail(const std::vector<std::string>& keys, const std::string& msg) const
    {
        throw ConfigError(path + ":" + std::to_string(line_of(keys)) + ": " + msg);
    }

    const json& section(const char* name) const
    {
        static const json empty = json::object();
        return doc.contains(name) ? doc[name] : empty;
    }
};

std::string join_path(const std::vector<std::string>& keys)
{
    std::string s;
    for (const auto& k : keys)
        s += (s.empty() ? "" : ".") + k;
    return s;
}

bool type_ok(const json& v, const std::string& type)
{
    if (type == "integer")
        return v.is_number_integer();
    if (type == "number")
        return v.is_number();
    if (type == "string")
        return v.is_string();
    if (type == "array")
        return v.is_array();
    if (type == "complex")
        return v.is_number() || (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number());
    return false;
}

void check_schema(const Config& cfg, const json& node, const json& schema, std::vector<std::string>& path)
{
    for (auto it = node.begin(); it != node.end(); ++it) {
        path.push_back(it.key());
        if (!schema.contains(it.key()))
            cfg.fail(path, "unknown key '" + join_path(path) + "'");
        const json& want = schema[it.key()];
        if (want.is_object()) {
            if (!it.value().is_object())
                cfg.fail(path, "'" + join_path(path) + "' must be an object");
            check_schema(cfg, it.value(), want, path);
        } else if (!type_ok(it.value(), want.get<std::string>())) {
            cfg.fail(path, "'" + join_path(path) + "' must be " + want.get<std::string>());
        }
        path.pop_back();
    }
}

Config load_config(const std::string& path)
{
    Config cfg;
    if (path.empty())
        return cfg;
    cfg.path = path;
    try {
        cfg.text = read_file(path);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    try {
        cfg.doc = json::parse(cfg.text);
    } catch (const json::parse_error& e) {
        const auto upto = std::min<std::size_t>(e.byte, cfg.text.size());
        const auto line = 1 + std::count(cfg.text.begin(), cfg.text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
        throw ConfigError(path + ":" + std::to_string(line) + ": invalid JSON (" + e.what() + ")");
    }
    if (!cfg.doc.is_object())
        throw ConfigError(path + ":1: config must be a JSON object");
    std::vector<std::string> p;
    check_schema(cfg, cfg.doc, json::parse(kSchema), p);
    return cfg;
}

template <class T>
T opt(const json& sec, const char* key, T fallback)
{
    return sec.contains(key) ? sec[key].get<T>() : fallback;
}

// Library converters report semantic errors without positions; attach the section line.
template <class F>
auto in_section(const Config& cfg, const char* name, F&& f)
{
    try {
        return f(cfg.section(name));
    } catch (const ConfigError& e) {
        cfg.fail({name}, e.what());
    }
}

struct Context {
    Config cfg;
    std::uint64_t seed = 0;
    fs::path out = ".";
    std::set<std::string> formats{"csv", "json"};
    std::string command;
    std::ostream* log = nullptr;

    json manifest_inputs = json::array();
    std::vector<std::pair<std::string, std::string>> files;

    bool want(const char* f) const { return formats.count(f) > 0; }
    void add(const std::string& name, std::string bytes) { files.emplace_back(name, std::move(bytes)); }
    void add_json(const std::string& name, const json& j) { add(name, j.dump(2) + "\n"); }

    void input(const std::string& path, const std::string& bytes)
    {
        manifest_inputs.push_back(
            json{{"name", fs::path(path).filename().string()}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}});
    }

    void finish(const json& extra = json::object())
    {
        std::error_code ec;
        fs::create_directories(out, ec);
        if (ec)
            throw ConfigError("cannot create output directory '" + out.string() + "': " + ec.message());
        json m;
        m["format"] = "ohtlab-manifest-v1";
        m["tool_version"] = OHTLAB_VERSION;
        m["command"] = command;
        m["seed"] = seed;
        m["config"] = cfg.doc;
        for (auto it = extra.begin(); it != extra.end(); ++it)
            m[it.key()] = it.value();
        if (!manifest_inputs.empty())
            m["inputs"] = manifest_inputs;
        json list = json::array();
        for (const auto& [name, bytes] : files) {
            write_file((out / name).string(), bytes);
            list.push_back(json{{"name", name}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}});
            *log << "wrote " << (out / name).string() << "\n";
        }
        m["files"] = list;
        write_file((out / "manifest.json").string(), m.dump(2) + "\n");
    }
};

StateSpec config_state(const Context& c)
{
    if (!c.cfg.doc.contains("state"))
        return StateSpec::vacuum();
    return in_section(c.cfg, "state", [](const json& s) { return state_spec_from_json(s); });
}

DetectorModel config_detector(const Context& c)
{
    return in_section(c.cfg, "detector", [](const json& s) { return detector_from_json(s); });
}

PhaseSchedule config_schedule(const Context& c)
{
    return in_section(c.cfg, "schedule", [](const json& s) { return schedule_from_json(s); });
}

std::size_t config_samples(const Context& c, std::size_t fallback)
{
    const auto n = opt<long long>(c.cfg.doc, "samples", static_cast<long long>(fallback));
    if (n < 1)
        c.cfg.fail({"samples"}, "'samples' must be positive");
    return static_cast<std::size_t>(n);
}

std::vector<std::string> warn_detector(const DetectorModel& d, std::ostream& log)
{
    auto w = d.validate();
    for (const auto& s : w)
        log << "warning: " << s << "\n";
    return w;
}

QuadratureDataset load_dataset(Context& c, const std::string& path)
{
    const std::string bytes = read_file(path);
    c.input(path, bytes);
    auto ds = quad_dataset_from_jsonl(bytes);
    if (ds.meta.dual)
        throw DataError(path + ": dual-LO records hold combined quadratures; use the twomode command");
    return ds;
}

json estimate_json(const Estimate& e)
{
    return estimate_to_json(e);
}

// ---- commands ----

void cmd_simulate(Context& c)
{
    const StateSpec spec = config_state(c);
    const DetectorModel det = config_detector(c);
    const PhaseSchedule sched = config_schedule(c);
    warn_detector(det, *c.log);
    const std::size_t n = config_samples(c, 100000);
    const auto ds = sample_quadratures(make_state(spec), sched, det, n, c.seed, spec);
    c.add("dataset.jsonl", quad_dataset_to_jsonl(ds));
    c.finish(json{{"state", state_spec_to_json(spec)}});
    *c.log << "simulated " << n << " quadrature samples of a " << spec.name() << " state\n";
}

void cmd_reconstruct(Context& c, const std::string& input, std::string method)
{
    const auto ds = load_dataset(c, input);
    const json& rec = c.cfg.section("reconstruction");
    const json params = rec.contains("params") ? rec["params"] : json::object();
    if (method.empty())
        method = opt<std::string>(rec, "method", "both");
    if (method != "radon" && method != "pattern" && method != "both")
        c.cfg.fail({"reconstruction", "method"}, "method must be radon, pattern or both, got '" + method + "'");

    json report;
    report["input"] = fs::path(input).filename().string();
    report["n_records"] = ds.size();
    report["eta"] = ds.meta.det.eta_eff();
    report["method"] = method;
    json warnings = json::array();

    if (method != "pattern") {
        const int npts = opt<int>(params, "grid_points", 41);
        const double qmax = opt<double>(params, "q_max", 4.0);
        if (npts < 3 || npts % 2 == 0)
            c.cfg.fail({"reconstruction", "params", "grid_points"}, "grid_points must be odd and >= 3 so the grid holds the origin");
        RadonConfig rc;
        rc.grid = GridSpec{-qmax, qmax, npts, -qmax, qmax, npts};
        rc.k_cutoff = opt<double>(params, "k_cutoff", rc.k_cutoff);
        if (ds.meta.schedule.kind == ScheduleKind::grid)
            rc.n_phase_bins = folded_phase_count(ds.theta);
        rc.n_phase_bins = opt<int>(params, "phase_bins", rc.n_phase_bins);
        const int boots = opt<int>(params, "bootstrap", 30);
        if (boots < 2)
            c.cfg.fail({"reconstruction", "params", "bootstrap"}, "bootstrap needs at least 2 resamples");
        try {
            rc.validate();
        } catch (const ConfigError& e) {
            c.cfg.fail({"reconstruction", "params"}, e.what());
        }
        const auto res = filtered_backprojection(ds, rc);
        const auto se = bootstrap_stderr(ds, rc, boots, stream_seed(c.seed, 1));
        const int mid = npts / 2;
        const double w00 = res.wigner.values(mid, mid);
        const double s00 = se.values(mid, mid);
        int below = 0;
        for (Eigen::Index i = 0; i < se.values.rows(); ++i)
            for (Eigen::Index j = 0; j < se.values.cols(); ++j)
                below += res.wigner.values(i, j) < -3.0 * se.values(i, j);
        json r;
        r["w_origin"] = w00;
        r["w_origin_stderr"] = s00;
        r["w_origin_sigma"] = s00 > 0 ? w00 / s00 : 0.0;
        r["negative_at_origin_3sigma"] = w00 < -3.0 * s00;
        r["points_below_minus_3sigma"] = below;
        r["min_value"] = res.wigner.values.minCoeff();
        r["integral"] = res.wigner.integral();
        r["bootstrap_resamples"] = boots;
        r["out_of_range"] = res.out_of_range;
        if (res.low_count_warning)
            warnings.push_back("some phase bins hold fewer samples than the minimum");
        report["radon"] = r;
        if (c.want("csv")) {
            c.add("wigner.csv", wigner_to_csv(res.wigner));
            c.add("wigner_stderr.csv", wigner_to_csv(se));
        }
    }

    if (method != "radon") {
        const int n_max = opt<int>(params, "n_max", 5);
        const int dim = opt<int>(params, "dim", n_max + 5);
        if (n_max < 0 || dim < n_max + 1)
            c.cfg.fail({"reconstruction", "params"}, "need 0 <= n_max < dim");
        int d = ds.meta.schedule.kind == ScheduleKind::grid ? folded_phase_count(ds.theta) : 0;
        d = opt<int>(params, "d_phases", d);
        const auto pf = build_pattern_functions(dim);
        RhoEstimate est;
        try {
            est = rho_from_quadratures(ds, pf, d, n_max);
        } catch (const AliasingError& e) {
            throw AliasingError(std::string(e.what()) +
                                ". The pattern-function estimator separates the density matrix into bands m - n = k, "
                                "and d equally spaced phases only resolve |k| < d; lower n_max or record more phases");
        }
        const auto pn = pn_phase_averaged(ds, pf);
        json r;
        r["n_max"] = n_max;
        r["dim"] = dim;
        r["phases_used"] = est.phases_used;
        r["rho00"] = est.rho.elements(0, 0).real();
        r["rho00_stderr"] = est.errors(0, 0).real();
        r["trace"] = est.rho.trace();
        r["mean_photon"] = est.rho.mean_photon();
        r["min_eigenvalue"] = est.rho.min_eigenvalue();
        json pns = json::array();
        for (Eigen::Index k = 0; k < pn.p.size() && k <= n_max; ++k)
            pns.push_back(json{{"n", k}, {"p", pn.p[k]}, {"stderr", pn.std_err[k]}});
        r["photon_numbers"] = pns;
        report["pattern"] = r;
        if (c.want("json"))
            c.add_json("rho.json", density_matrix_to_json(est));
        if (c.want("csv"))
            c.add("photon_numbers.csv", photon_numbers_to_csv(pn));
    }
    report["warnings"] = warnings;
    c.add_json("report.json", report);
    c.finish();
    *c.log << report.dump(2) << "\n";
}

void cmd_moments(Context& c, const std::string& input)
{
    const auto ds = load_dataset(c, input);
    const auto rep = moment_report(ds);
    if (c.want("json"))
        c.add_json("moments.json", moment_report_to_json(rep));
    if (c.want("csv"))
        c.add("moments.csv", moment_report_to_csv(rep));
    c.finish();
    *c.log << moment_report_to_json(rep).dump(2) << "\n";
}

NumberLaw config_law(const Context& c)
{
    const json& s = c.cfg.section("twomode");
    NumberLaw law;
    const auto stats = opt<std::string>(s, "stats", "thermal");
    if (stats == "thermal")
        law.stats = NumberLaw::Statistics::thermal;
    else if (stats == "poisson")
        law.stats = NumberLaw::Statistics::poisson;
    else
        c.cfg.fail({"twomode", "stats"}, "stats must be thermal or poisson");
    const auto coupling = opt<std::string>(s, "coupling", "correlated");
    if (coupling == "correlated")
        law.coupling = NumberLaw::Coupling::correlated;
    else if (coupling == "switching")
        law.coupling = NumberLaw::Coupling::switching;
    else if (coupling == "split")
        law.coupling = NumberLaw::Coupling::split;
    else
        c.cfg.fail({"twomode", "coupling"}, "coupling must be correlated, switching or split");
    law.nbar1 = opt<double>(s, "nbar1", 1.0);
    law.nbar2 = opt<double>(s, "nbar2", 1.0);
    law.correlation = opt<double>(s, "correlation", 0.0);
    in_section(c.cfg, "twomode", [&](const json&) {
        law.validate();
        return 0;
    });
    return law;
}

void cmd_twomode(Context& c)
{
    const NumberLaw law = config_law(c);
    const DetectorModel det = config_detector(c);
    warn_detector(det, *c.log);
    const std::size_t n = config_samples(c, 100000);
    const auto runs = simulate_three_alpha(TwoModeState::planted(law), det, n, c.seed);
    const auto r = two_time_g2(runs);
    const auto planted = number_law_moments(law);
    json j;
    j["samples_per_run"] = n;
    j["g12"] = estimate_json(r.g12);
    j["g12_planted"] = planted.g12();
    j["g12_deviation_sigma"] = r.g12.std_err > 0 ? (r.g12.value - planted.g12()) / r.g12.std_err : 0.0;
    j["n1"] = estimate_json(r.n1);
    j["n2"] = estimate_json(r.n2);
    j["n1n2"] = estimate_json(r.n1n2);
    j["cross_q2q2"] = estimate_json(r.cross_q2q2);
    if (c.want("json"))
        c.add_json("twomode.json", j);
    if (c.want("csv")) {
        std::ostringstream os;
        os << std::setprecision(17) << "quantity,value,stderr\n";
        for (const auto& [name, e] : {std::pair{"g12", r.g12}, {"n1", r.n1}, {"n2", r.n2}, {"n1n2", r.n1n2}})
            os << name << ',' << e.value << ',' << e.std_err << '\n';
        c.add("twomode.csv", os.str());
    }
    c.finish();
    *c.log << j.dump(2) << "\n";
}

void cmd_array(Context& c)
{
    const json& a = c.cfg.section("array");
    PixelGrid grid;
    grid.n_pixels = opt<int>(a, "n_pixels", grid.n_pixels);
    grid.pixel_area = opt<double>(a, "pixel_area", grid.pixel_area);
    grid.x_min = opt<double>(a, "x_min", grid.x_min);
    grid.x_max = opt<double>(a, "x_max", grid.x_max);
    in_section(c.cfg, "array", [&](const json&) {
        grid.validate();
        return 0;
    });
    const auto shape = opt<std::string>(a, "mode", "gaussian");
    const double width = opt<double>(a, "mode_width", 0.3);
    ModeVector planted;
    if (shape == "gaussian")
        planted = ModeVector::from_function(grid, [&](double x) { return std::exp(-x * x / (2 * width * width)); });
    else if (shape == "uniform")
        planted = ModeVector::uniform(grid);
    else if (shape == "ramp")
        planted = ModeVector::from_function(grid, [](double x) { return x; });
    else
        c.cfg.fail({"array", "mode"}, "mode must be gaussian, uniform or ramp");
    ArrayOptions ao;
    ao.max_offset = opt<double>(a, "max_offset", 0.0);

    const StateSpec spec = c.cfg.doc.contains("state") ? config_state(c) : StateSpec::coherent({2.0, 0.0});
    const DetectorModel det = config_detector(c);
    warn_detector(det, *c.log);
    const PhaseSchedule sched = config_schedule(c);
    const std::size_t n = config_samples(c, 20000);
    const auto frames = in_section(c.cfg, "array", [&](const json&) {
        return simulate_array_frames({SignalMode(planted, spec)}, det, grid, sched, n, c.seed, ao);
    });
    const MatrixXd m = difference_correlation_matrix(frames);
    const auto best = optimal_mode(m, det, grid);
    const auto proj = mode_photon_number(frames, planted);

    json j;
    j["pulses"] = n;
    j["noise_model"] = frames.meta.noise_model;
    j["eigenvalue"] = best.eigenvalue;
    j["recovered_mean_photons"] = best.mean_photons;
    j["planted_mode_overlap"] = std::abs(best.mode.w.dot(planted.w));
    j["planted_mode_photons"] = estimate_json(proj);
    j["warnings"] = frames.meta.warnings;
    c.add("frames.jsonl", array_frames_to_jsonl(frames));
    if (c.want("json"))
        c.add_json("array_report.json", j);
    if (c.want("csv")) {
        std::ostringstream os;
        os << std::setprecision(17) << "x,planted,recovered\n";
        const VectorXd x = grid.coordinates();
        for (Eigen::Index i = 0; i < x.size(); ++i)
            os << x[i] << ',' << planted.w[i] << ',' << best.mode.w[i] << '\n';
        c.add("modes.csv", os.str());
    }
    c.finish(json{{"state", state_spec_to_json(spec)}});
    *c.log << j.dump(2) << "\n";
}

void cmd_sample(Context& c)
{
    const json& t = c.cfg.section("temporal");
    const int n = opt<int>(t, "n", 8192);
    const double dt = opt<double>(t, "dt", 0.1);
    const double nu = opt<double>(t, "nu", 0.0);
    const double band = opt<double>(t, "band", 1.0);
    const int stride = opt<int>(t, "stride", 4);
    if (n < 16 || dt <= 0 || band <= 0 || stride < 1)
        c.cfg.fail({"temporal"}, "temporal needs n >= 16, dt > 0, band > 0 and stride >= 1");
    const auto sig = in_section(c.cfg, "temporal", [&](const json&) {
        return TemporalSignal::chirped_pulse(-n * dt / 2, dt, n, nu, band, opt<double>(t, "pulse_bw", 0.9 * band),
                                             opt<double>(t, "chirp", 150.0), opt<double>(t, "t_center", 0.0));
    });
    const json g = t.contains("gate") ? t["gate"] : json::object();
    const auto kind = opt<std::string>(g, "kind", "sinc");
    const double wl = opt<double>(g, "omega_l", nu);
    GateFunction gate;
    if (kind == "sinc")
        gate = GateFunction::sinc_bandlimited(opt<double>(g, "bandwidth", band), wl);
    else if (kind == "gaussian")
        gate = GateFunction::gaussian(opt<double>(g, "width", 2.0), wl);
    else if (kind == "exponential")
        gate = GateFunction::one_sided_exponential(opt<double>(g, "gamma", 1.0), wl);
    else
        c.cfg.fail({"temporal", "gate", "kind"}, "gate kind must be sinc, gaussian or exponential");
    in_section(c.cfg, "temporal", [&](const json&) {
        gate.validate();
        return 0;
    });

    const VectorXd axis = sig.t_axis();
    VectorXd tau((axis.size() + stride - 1) / stride);
    VectorXcd truth(tau.size());
    for (Eigen::Index i = 0; i < tau.size(); ++i) {
        tau[i] = axis[i * stride];
        truth[i] = sig.phi[i * stride];
    }
    const VectorXcd sampled = linear_optical_sampling(sig, gate, tau);
    json j;
    j["points"] = tau.size();
    j["gate"] = kind;
    j["out_of_band_energy"] = out_of_band_energy(sig, nu, band);
    if (kind == "sinc") {
        const VectorXcd rec = bandlimited_exact_recovery(sig, band, nu, tau, false);
        j["recovery_relative_rms"] = std::sqrt((rec - truth).squaredNorm() / truth.squaredNorm());
    }
    if (c.want("csv")) {
        c.add("signal.csv", temporal_to_csv(axis, sig.phi));
        c.add("sampled.csv", temporal_to_csv(tau, sampled));
        if (kind != "sinc") {
            const VectorXd omega = linspace(nu - band, nu + band, 65);
            VectorXd tg(65);
            for (Eigen::Index i = 0; i < tg.size(); ++i)
                tg[i] = tau[std::min<Eigen::Index>(tau.size() - 1, (tau.size() - 1) * i / 64)];
            c.add("map.csv", map_to_csv(omega, tg, time_frequency_map({sig}, gate, omega, tg)));
        }
    }
    if (c.want("json"))
        c.add_json("sample_report.json", j);
    c.finish();
    *c.log << j.dump(2) << "\n";
}

void cmd_calibrate(Context& c)
{
    const DetectorModel det = config_detector(c);
    warn_detector(det, *c.log);
    const json& s = c.cfg.section("calibration");
    const auto levels = opt<std::vector<double>>(s, "lo_levels", {2e5, 4e5, 6e5, 8e5, 1e6});
    const auto pulses = opt<long long>(s, "pulses", 10000);
    if (levels.size() < 3 || pulses < 10)
        c.cfg.fail({"calibration"}, "calibration needs at least 3 LO levels and 10 pulses per level");
    const auto r = calibration_curve(det, levels, static_cast<std::size_t>(pulses), c.seed);
    json j;
    j["gain"] = json{{"value", r.gain}, {"std_err", r.gain_stderr}, {"planted", det.gain}};
    j["sigma_e"] = json{{"value", r.sigma_e}, {"std_err", r.sigma_e_stderr}, {"planted", det.sigma_e}};
    j["slope"] = json{{"value", r.slope}, {"std_err", r.slope_stderr}};
    j["intercept"] = json{{"value", r.intercept}, {"std_err", r.intercept_stderr}};
    j["reduced_chi2"] = r.reduced_chi2;
    j["nonlinear"] = r.nonlinear;
    if (c.want("json"))
        c.add_json("calibration.json", j);
    if (c.want("csv")) {
        std::ostringstream os;
        os << std::setprecision(17) << "lo_photons,mean_v_plus,var_v_minus,var_stderr\n";
        for (const auto& p : r.table)
            os << p.lo_photons << ',' << p.mean_v_plus << ',' << p.var_v_minus << ',' << p.var_stderr << '\n';
        c.add("calibration.csv", os.str());
    }
    c.finish();
    *c.log << j.dump(2) << "\n";
}

// ---- validate ----

struct Diagnostics {
    json checks = json::array();
    int errors = 0;

    void pass(const std::string& kind, const std::string& msg) { checks.push_back(json{{"check", kind}, {"status", "pass"}, {"detail", msg}}); }
    void fail(const std::string& kind, const std::string& msg)
    {
        ++errors;
        checks.push_back(json{{"check", kind}, {"status", "fail"}, {"detail", msg}});
    }
    void note(const std::string& kind, const std::string& msg) { checks.push_back(json{{"check", kind}, {"status", "info"}, {"detail", msg}}); }
};

// Within-phase variance averaged over phase; any state and any loss gives >= 1/2.
void quad_statistics(const QuadratureDataset& ds, Diagnostics& d, json& stats)
{
    const double n = static_cast<double>(ds.size());
    const double mean = ds.q.mean();
    const double var = (ds.q.array() - mean).square().sum() / (n - 1);
    stats["sample_variance"] = var;
    stats["sample_mean"] = mean;
    if (ds.meta.dual) {
        d.note("statistics", "dual-LO dataset, variance bound not applied");
        return;
    }
    const int bins = ds.meta.schedule.kind == ScheduleKind::grid ? std::max(1, ds.meta.schedule.d) : 64;
    std::vector<double> s1(bins, 0), s2(bins, 0), cnt(bins, 0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        double t = std::fmod(ds.theta[k], 2 * kPi);
        if (t < 0)
            t += 2 * kPi;
        const int b = std::min(bins - 1, static_cast<int>(std::lround(t / (2 * kPi) * bins)) % bins);
        s1[b] += ds.q[k];
        s2[b] += ds.q[k] * ds.q[k];
        cnt[b] += 1;
    }
    double within = 0, used = 0;
    for (int b = 0; b < bins; ++b)
        if (cnt[b] > 1) {
            within += s2[b] - s1[b] * s1[b] / cnt[b];
            used += cnt[b] - 1;
        }
    if (used < 2) {
        d.fail("statistics", "too few records for a variance check");
        return;
    }
    within /= used;
    const double se = within * std::sqrt(2.0 / used) * 3.0;  // generous for heavy tails
    stats["within_phase_variance"] = within;
    const double floor = 0.5 - 5.0 * se;
    if (within < floor)
        d.fail("statistics", "phase-averaged quadrature variance " + std::to_string(within) +
                                 " is below the vacuum bound 1/2 beyond sampling error");
    else
        d.pass("statistics", "phase-averaged quadrature variance " + std::to_string(within) + " >= 1/2 within error");
}

void validate_one(const fs::path& path, const std::string& bytes, Diagnostics& d, json& stats)
{
    const std::string name = path.filename().string();
    if (path.extension() == ".jsonl") {
        std::string fmt;
        try {
            fmt = jsonl_format(bytes);
        } catch (const Error& e) {
            d.fail("schema", name + ": " + e.what());
            return;
        }
        if (!bytes.empty() && bytes.back() != '\n')
            d.fail("truncation", name + ": last line is not terminated, file looks truncated");
        try {
            if (fmt == "ohtlab-quad-v1") {
                const auto ds = quad_dataset_from_jsonl(bytes);
                d.pass("schema", name + ": " + std::to_string(ds.size()) + " quadrature records");
                quad_statistics(ds, d, stats);
            } else if (fmt == "ohtlab-array-v1") {
                const auto f = array_frames_from_jsonl(bytes);
                d.pass("schema", name + ": " + std::to_string(f.size()) + " array frames");
            } else if (fmt == "ohtlab-spectral-v1") {
                const auto r = spectral_records_from_jsonl(bytes);
                d.pass("schema", name + ": " + std::to_string(r.size()) + " spectral records");
            } else {
                d.fail("schema", name + ": unknown format '" + fmt + "'");
            }
        } catch (const Error& e) {
            d.fail(std::string(e.what()).find("truncated") != std::string::npos ? "truncation" : "schema",
                   name + ": " + e.what());
        }
    } else if (path.extension() == ".json") {
        try {
            const json j = json::parse(bytes);
            if (j.contains("dim") && j.contains("re")) {
                const auto rho = density_matrix_from_json(j);
                d.pass("schema", name + ": density matrix of dimension " + std::to_string(rho.dim()));
                if (rho.hermiticity_error() > 1e-9)
                    d.fail("statistics", name + ": density matrix is not Hermitian");
                stats["trace"] = rho.trace();
            } else {
                d.pass("schema", name + ": well-formed JSON");
            }
        } catch (const json::exception& e) {
            d.fail("schema", name + ": " + e.what());
        } catch (const Error& e) {
            d.fail("schema", name + ": " + e.what());
        }
    } else if (path.extension() == ".csv") {
        std::istringstream in(bytes);
        std::string line;
        std::getline(in, line);
        const auto cols = std::count(line.begin(), line.end(), ',');
        std::size_t row = 1, bad = 0;
        while (std::getline(in, line)) {
            ++row;
            if (std::count(line.begin(), line.end(), ',') != cols && !bad)
                bad = row;
        }
        if (bad)
            d.fail("schema", name + ":" + std::to_string(bad) + ": wrong number of columns");
        else
            d.pass("schema", name + ": " + std::to_string(row - 1) + " CSV rows");
    } else {
        d.note("schema", name + ": unrecognised extension, only checksums verified");
    }
}

void check_against_manifest(const json& manifest, const fs::path& dir, const std::string& only, Diagnostics& d)
{
    if (!manifest.contains("files"))
        return;
    for (const auto& f : manifest["files"]) {
        const std::string name = f.value("name", "");
        if (!only.empty() && name != only)
            continue;
        std::string bytes;
        try {
            bytes = read_file((dir / name).string());
        } catch (const DataError&) {
            d.fail("checksum", name + ": listed in manifest but missing");
            continue;
        }
        const std::string want = f.value("sha256", "");
        if (sha256_hex(bytes) != want || bytes.size() != f.value("bytes", std::size_t{0}))
            d.fail("checksum", name + ": sha256 mismatch with manifest (file changed or truncated)");
        else
            d.pass("checksum", name + ": matches manifest");
    }
}

int cmd_validate(Context& c, const std::string& input, bool report_only)
{
    const fs::path path(input);
    const std::string bytes = read_file(input);
    Diagnostics d;
    json stats = json::object();
    json j_manifest;
    bool is_manifest = false;
    if (path.extension() == ".json") {
        try {
            j_manifest = json::parse(bytes);
            is_manifest = j_manifest.is_object() && j_manifest.value("format", "") == "ohtlab-manifest-v1";
        } catch (const json::exception&) {
        }
    }
    if (is_manifest) {
        d.pass("schema", path.filename().string() + ": manifest");
        check_against_manifest(j_manifest, path.parent_path(), "", d);
        for (const auto& f : j_manifest.value("files", json::array())) {
            const fs::path p = path.parent_path() / f.value("name", "");
            try {
                validate_one(p, read_file(p.string()), d, stats);
            } catch (const DataError&) {
            }
        }
    } else {
        validate_one(path, bytes, d, stats);
        const fs::path mpath = path.parent_path() / "manifest.json";
        if (fs::exists(mpath)) {
            try {
                check_against_manifest(json::parse(read_file(mpath.string())), path.parent_path(),
                                       path.filename().string(), d);
            } catch (const json::exception&) {
                d.fail("checksum", "manifest.json next to the file is not valid JSON");
            }
        } else {
            d.note("checksum", "no manifest.json beside the file, checksum not verified");
        }
    }
    json out;
    out["file"] = path.filename().string();
    out["valid"] = d.errors == 0;
    out["errors"] = d.errors;
    out["checks"] = d.checks;
    out["statistics"] = stats;
    *c.log << out.dump(2) << "\n";
    if (d.errors && !report_only)
        throw DataError(std::to_string(d.errors) + " validation check(s) failed for " + input);
    return 0;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"ohtlab: homodyne tomography simulation and reconstruction"};
    app.set_version_flag("--version", std::string(OHTLAB_VERSION));
    app.require_subcommand(1);

    std::string config_path, out_dir, format, input, method;
    std::optional<std::uint64_t> seed;
    int threads = -1;
    bool report_only = false;

    auto common = [&](CLI::App* s) {
        s->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
        s->add_option("--seed", seed, "master seed, overrides the config");
        s->add_option("--out", out_dir, "output directory");
        s->add_option("--format", format, "tabular output format")->check(CLI::IsMember({"csv", "json"}));
        s->add_option("--threads", threads, "worker thread bound; results do not depend on it")
            ->check(CLI::NonNegativeNumber);
    };
    auto* s_sim = app.add_subcommand("simulate", "sample a quadrature dataset from a state");
    auto* s_rec = app.add_subcommand("reconstruct", "Wigner function and density matrix from a dataset");
    auto* s_mom = app.add_subcommand("moments", "photon-number moments and g2 from a dataset");
    auto* s_two = app.add_subcommand("twomode", "two-mode g2 with the three-superposition method");
    auto* s_arr = app.add_subcommand("array", "detector-array frames and optimal mode");
    auto* s_smp = app.add_subcommand("sample", "linear optical sampling of a temporal signal");
    auto* s_cal = app.add_subcommand("calibrate", "detector gain and electronic noise calibration");
    auto* s_val = app.add_subcommand("validate", "check an artifact file or manifest");
    for (auto* s : {s_sim, s_rec, s_mom, s_two, s_arr, s_smp, s_cal, s_val})
        common(s);
    for (auto* s : {s_rec, s_mom, s_val})
        s->add_option("input", input, "input file")->required();
    s_rec->add_option("--method", method, "radon, pattern or both")->check(CLI::IsMember({"radon", "pattern", "both"}));
    s_val->add_flag("--report", report_only, "list problems without failing");

    std::vector<const char*> argv{"ohtlab"};
    for (const auto& a : args)
        argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        Context c;
        c.log = &out;
        c.cfg = load_config(config_path);
        c.command = app.get_subcommands().front()->get_name();
        c.seed = seed ? *seed : opt<std::uint64_t>(c.cfg.doc, "seed", 0);
        const json& o = c.cfg.section("outputs");
        c.out = !out_dir.empty() ? fs::path(out_dir) : fs::path(opt<std::string>(o, "dir", "."));
        if (!format.empty()) {
            c.formats = {format};
        } else if (o.contains("formats")) {
            c.formats.clear();
            for (const auto& f : o["formats"]) {
                if (!f.is_string() || (f != "csv" && f != "json"))
                    c.cfg.fail({"outputs", "formats"}, "formats may only list \"csv\" and \"json\"");
                c.formats.insert(f.get<std::string>());
            }
        }
        if (threads < 0)
            threads = opt<int>(c.cfg.doc, "threads", 0);
        set_max_threads(threads);

        if (c.command == "simulate")
            cmd_simulate(c);
        else if (c.command == "reconstruct")
            cmd_reconstruct(c, input, method);
        else if (c.command == "moments")
            cmd_moments(c, input);
        else if (c.command == "twomode")
            cmd_twomode(c);
        else if (c.command == "array")
            cmd_array(c);
        else if (c.command == "sample")
            cmd_sample(c);
        else if (c.command == "calibrate")
            cmd_calibrate(c);
        else
            return cmd_validate(c, input, report_only);
        return 0;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const json::exception& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 4;
    }
}

} // namespace ohtlab::cli
