#include "ohtlab/io.hpp"

#include "ohtlab/errors.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace ohtlab {

std::string sha256_hex(const std::string& bytes)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw NumericalError("SHA-256 failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i)
        os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot read '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& bytes)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write '" + path + "'");
    out << bytes;
    if (!out)
        throw ConfigError("write to '" + path + "' failed");
}

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where)
{
    if (!j.is_object())
        throw ConfigError(where + " must be a JSON object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where)
{
    if (!j.contains(key))
        return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("bad value for '") + key + "' in " + where);
    }
}

json cplx_to_json(cplx z)
{
    return json::array({z.real(), z.imag()});
}

cplx cplx_from_json(const json& j, const std::string& where)
{
    if (j.is_number())
        return {j.get<double>(), 0.0};
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ConfigError(where + ": complex numbers are [re, im]");
    return {j[0].get<double>(), j[1].get<double>()};
}

std::vector<std::string> split_lines(const std::string& text)
{
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty())
            lines.push_back(line);
    return lines;
}

json parse_line(const std::string& line, std::size_t lineno)
{
    try {
        return json::parse(line);
    } catch (const json::parse_error& e) {
        throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
}

template <class T>
T field(const json& j, const char* key, std::size_t lineno)
{
    if (!j.contains(key))
        throw DataError("line " + std::to_string(lineno) + ": missing '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw DataError("line " + std::to_string(lineno) + ": bad value for '" + key + "'");
    }
}

void check_count(const json& header, std::size_t records)
{
    if (header.contains("n_records") && header["n_records"].get<std::size_t>() != records)
        throw DataError("file is truncated or padded: header announces " +
                        std::to_string(header["n_records"].get<std::size_t>()) + " records, found " +
                        std::to_string(records));
}

std::string dump_lines(const json& header, const std::vector<json>& rows)
{
    std::string out = header.dump();
    out += '\n';
    for (const auto& r : rows) {
        out += r.dump();
        out += '\n';
    }
    return out;
}

} // namespace

json state_spec_to_json(const StateSpec& s)
{
    json j;
    j["kind"] = s.name();
    switch (s.kind) {
    case StateKind::vacuum:
        break;
    case StateKind::fock:
        j["n"] = s.n;
        break;
    case StateKind::coherent:
        j["alpha"] = cplx_to_json(s.alpha);
        break;
    case StateKind::thermal:
        j["nbar"] = s.nbar;
        break;
    case StateKind::squeezed_vacuum:
        j["r"] = s.r;
        j["phi"] = s.phi;
        break;
    case StateKind::squeezed_coherent:
        j["r"] = s.r;
        j["phi"] = s.phi;
        j["alpha"] = cplx_to_json(s.alpha);
        break;
    }
    j["truncation_dim"] = s.truncation_dim;
    return j;
}

StateSpec state_spec_from_json(const json& j)
{
    check_keys(j, {"kind", "n", "alpha", "nbar", "r", "phi", "truncation_dim"}, "state");
    if (!j.contains("kind") || !j["kind"].is_string())
        throw ConfigError("state needs a string 'kind'");
    StateSpec s;
    s.kind = state_kind_from_name(j["kind"].get<std::string>());
    s.n = get_or<int>(j, "n", 0, "state");
    if (j.contains("alpha"))
        s.alpha = cplx_from_json(j["alpha"], "state.alpha");
    s.nbar = get_or<double>(j, "nbar", 0.0, "state");
    s.r = get_or<double>(j, "r", 0.0, "state");
    s.phi = get_or<double>(j, "phi", 0.0, "state");
    s.truncation_dim = get_or<int>(j, "truncation_dim", 20, "state");
    if (s.n < 0 || s.nbar < 0 || s.r < 0 || s.truncation_dim < 1)
        throw ConfigError("state parameters must be non-negative");
    return s;
}

json detector_to_json(const DetectorModel& d)
{
    return json{{"eta_q", d.eta_q},     {"eta_ls", d.eta_ls}, {"lo_mean_photons", d.lo_mean_photons},
                {"sigma_e", d.sigma_e}, {"gain", d.gain},     {"balance_imbalance", d.balance_imbalance}};
}

DetectorModel detector_from_json(const json& j)
{
    check_keys(j, {"eta_q", "eta_ls", "lo_mean_photons", "sigma_e", "gain", "balance_imbalance"}, "detector");
    DetectorModel d;
    d.eta_q = get_or<double>(j, "eta_q", d.eta_q, "detector");
    d.eta_ls = get_or<double>(j, "eta_ls", d.eta_ls, "detector");
    d.lo_mean_photons = get_or<double>(j, "lo_mean_photons", d.lo_mean_photons, "detector");
    d.sigma_e = get_or<double>(j, "sigma_e", d.sigma_e, "detector");
    d.gain = get_or<double>(j, "gain", d.gain, "detector");
    d.balance_imbalance = get_or<double>(j, "balance_imbalance", d.balance_imbalance, "detector");
    d.validate();
    return d;
}

json schedule_to_json(const PhaseSchedule& s)
{
    json j{{"kind", s.name()}};
    if (s.kind == ScheduleKind::grid) {
        j["d"] = s.d;
        j["span"] = s.span;
    }
    return j;
}

PhaseSchedule schedule_from_json(const json& j)
{
    check_keys(j, {"kind", "d", "span"}, "schedule");
    const std::string kind = get_or<std::string>(j, "kind", "uniform_random", "schedule");
    switch (schedule_kind_from_name(kind)) {
    case ScheduleKind::grid:
        return PhaseSchedule::grid(get_or<int>(j, "d", 1, "schedule"), get_or<double>(j, "span", 2 * kPi, "schedule"));
    case ScheduleKind::swept_linear:
        return PhaseSchedule::swept_linear();
    case ScheduleKind::uniform_random:
        break;
    }
    return PhaseSchedule::uniform_random();
}

std::string quad_dataset_to_jsonl(const QuadratureDataset& ds)
{
    const auto& m = ds.meta;
    json h;
    h["format"] = "ohtlab-quad-v1";
    h["eta_q"] = m.det.eta_q;
    h["eta_ls"] = m.det.eta_ls;
    h["lo_mean_photons"] = m.det.lo_mean_photons;
    h["sigma_e"] = m.det.sigma_e;
    h["schedule"] = m.schedule.name();
    h["n_phases"] = m.schedule.kind == ScheduleKind::grid ? m.schedule.d : 0;
    if (m.schedule.kind == ScheduleKind::grid)
        h["span"] = m.schedule.span;
    h["seed"] = m.seed;
    if (m.source)
        h["source"] = state_spec_to_json(*m.source);
    if (m.dual) {
        h["mode"] = "dual";
        h["alpha"] = m.alpha;
        h["zeta_schedule"] = m.zeta_schedule;
    }
    h["n_records"] = ds.size();
    std::vector<json> rows;
    rows.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        if (m.dual)
            rows.push_back(json{{"theta", ds.theta[k]}, {"zeta", ds.zeta[k]}, {"Q", ds.q[k]}});
        else
            rows.push_back(json{{"theta", ds.theta[k]}, {"q", ds.q[k]}});
    }
    return dump_lines(h, rows);
}

std::string jsonl_format(const std::string& text)
{
    const auto end = text.find('\n');
    const json h = parse_line(text.substr(0, end), 1);
    if (!h.is_object() || !h.contains("format") || !h["format"].is_string())
        throw DataError("line 1: header has no format string");
    return h["format"].get<std::string>();
}

QuadratureDataset quad_dataset_from_jsonl(const std::string& text)
{
    const auto lines = split_lines(text);
    if (lines.empty())
        throw DataError("empty file");
    const json h = parse_line(lines[0], 1);
    const std::string fmt = h.value("format", "");
    if (fmt != "ohtlab-quad-v1")
        throw DataError("unknown dataset format '" + fmt + "'");
    QuadratureDataset ds;
    auto& m = ds.meta;
    m.det.eta_q = field<double>(h, "eta_q", 1);
    m.det.eta_ls = field<double>(h, "eta_ls", 1);
    m.det.lo_mean_photons = field<double>(h, "lo_mean_photons", 1);
    m.det.sigma_e = field<double>(h, "sigma_e", 1);
    try {
        m.det.validate();
        m.schedule.kind = schedule_kind_from_name(field<std::string>(h, "schedule", 1));
    } catch (const ConfigError& e) {
        throw DataError(std::string("line 1: ") + e.what());
    }
    if (m.schedule.kind == ScheduleKind::grid) {
        m.schedule.d = field<int>(h, "n_phases", 1);
        m.schedule.span = h.value("span", 2 * kPi);
    }
    m.seed = field<std::uint64_t>(h, "seed", 1);
    if (h.contains("source")) {
        try {
            m.source = state_spec_from_json(h["source"]);
        } catch (const ConfigError& e) {
            throw DataError(std::string("line 1: ") + e.what());
        }
    }
    m.dual = h.value("mode", "") == "dual";
    if (m.dual) {
        m.alpha = field<double>(h, "alpha", 1);
        m.zeta_schedule = field<std::string>(h, "zeta_schedule", 1);
    }
    const std::size_t n = lines.size() - 1;
    check_count(h, n);
    ds.theta.resize(static_cast<Eigen::Index>(n));
    ds.q.resize(static_cast<Eigen::Index>(n));
    if (m.dual)
        ds.zeta.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const json r = parse_line(lines[i + 1], i + 2);
        const auto k = static_cast<Eigen::Index>(i);
        ds.theta[k] = field<double>(r, "theta", i + 2);
        if (m.dual) {
            ds.zeta[k] = field<double>(r, "zeta", i + 2);
            ds.q[k] = field<double>(r, "Q", i + 2);
        } else {
            ds.q[k] = field<double>(r, "q", i + 2);
        }
    }
    return ds;
}

std::string array_frames_to_jsonl(const ArrayFrameSet& f)
{
    const auto& m = f.meta;
    json h;
    h["format"] = "ohtlab-array-v1";
    h["n_pixels"] = m.grid.n_pixels;
    h["pixel_area"] = m.grid.pixel_area;
    h["x_min"] = m.grid.x_min;
    h["x_max"] = m.grid.x_max;
    h["eta_q"] = m.det.eta_q;
    h["lo_mean_photons"] = m.det.lo_mean_photons;
    h["sigma_e"] = m.det.sigma_e;
    h["schedule"] = schedule_to_json(m.schedule);
    h["seed"] = m.seed;
    h["signal"] = m.signal_description;
    h["noise_model"] = m.noise_model;
    h["vacuum_offsets"] = std::vector<double>(f.vacuum_offsets.data(), f.vacuum_offsets.data() + f.vacuum_offsets.size());
    h["n_records"] = f.size();
    std::vector<json> rows;
    rows.reserve(f.size());
    for (Eigen::Index i = 0; i < f.frames.rows(); ++i) {
        std::vector<int> d(f.frames.row(i).data(), f.frames.row(i).data() + f.frames.cols());
        rows.push_back(json{{"theta", f.theta[i]}, {"d", d}});
    }
    return dump_lines(h, rows);
}

ArrayFrameSet array_frames_from_jsonl(const std::string& text)
{
    const auto lines = split_lines(text);
    if (lines.empty())
        throw DataError("empty file");
    const json h = parse_line(lines[0], 1);
    const std::string fmt = h.value("format", "");
    if (fmt != "ohtlab-array-v1")
        throw DataError("unknown frame format '" + fmt + "'");
    ArrayFrameSet f;
    auto& m = f.meta;
    m.grid.n_pixels = field<int>(h, "n_pixels", 1);
    m.grid.pixel_area = field<double>(h, "pixel_area", 1);
    m.grid.x_min = field<double>(h, "x_min", 1);
    m.grid.x_max = field<double>(h, "x_max", 1);
    m.det.eta_q = field<double>(h, "eta_q", 1);
    m.det.lo_mean_photons = field<double>(h, "lo_mean_photons", 1);
    m.det.sigma_e = field<double>(h, "sigma_e", 1);
    try {
        m.grid.validate();
        m.schedule = schedule_from_json(h.at("schedule"));
    } catch (const std::exception& e) {
        throw DataError(std::string("line 1: ") + e.what());
    }
    m.seed = field<std::uint64_t>(h, "seed", 1);
    m.signal_description = h.value("signal", "");
    m.noise_model = h.value("noise_model", "");
    const auto off = field<std::vector<double>>(h, "vacuum_offsets", 1);
    if (static_cast<int>(off.size()) != m.grid.n_pixels)
        throw DataError("line 1: vacuum_offsets length differs from n_pixels");
    f.vacuum_offsets = Eigen::Map<const VectorXd>(off.data(), static_cast<Eigen::Index>(off.size()));
    const std::size_t n = lines.size() - 1;
    check_count(h, n);
    f.frames.resize(static_cast<Eigen::Index>(n), m.grid.n_pixels);
    f.theta.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const json r = parse_line(lines[i + 1], i + 2);
        const auto d = field<std::vector<int>>(r, "d", i + 2);
        if (static_cast<int>(d.size()) != m.grid.n_pixels)
            throw DataError("line " + std::to_string(i + 2) + ": frame length differs from n_pixels");
        const auto k = static_cast<Eigen::Index>(i);
        f.theta[k] = field<double>(r, "theta", i + 2);
        for (int j = 0; j < m.grid.n_pixels; ++j)
            f.frames(k, j) = d[j];
    }
    return f;
}

std::string spectral_records_to_jsonl(const SpectralRecords& r)
{
    json h;
    h["format"] = "ohtlab-spectral-v1";
    h["window"] = r.window;
    h["lo_half_width"] = r.lo_half_width;
    json lo = json::array();
    for (const auto& b : r.lo)
        lo.push_back(cplx_to_json(b));
    h["lo"] = lo;
    h["eta"] = r.eta;
    h["noise_model"] = r.noise_model;
    h["approximation_valid"] = r.approximation_valid;
    h["l_values"] = r.l_values;
    h["n_records"] = r.size();
    std::vector<json> rows;
    rows.reserve(r.size());
    for (Eigen::Index i = 0; i < r.k.rows(); ++i) {
        json pulse = json::array();
        for (Eigen::Index c = 0; c < r.k.cols(); ++c)
            pulse.push_back(json{{"l", r.l_values[c]}, {"re", r.k(i, c).real()}, {"im", r.k(i, c).imag()}});
        rows.push_back(json{{"k", pulse}});
    }
    return dump_lines(h, rows);
}

SpectralRecords spectral_records_from_jsonl(const std::string& text)
{
    const auto lines = split_lines(text);
    if (lines.empty())
        throw DataError("empty file");
    const json h = parse_line(lines[0], 1);
    const std::string fmt = h.value("format", "");
    if (fmt != "ohtlab-spectral-v1")
        throw DataError("unknown spectral format '" + fmt + "'");
    SpectralRecords r;
    r.window = field<int>(h, "window", 1);
    r.lo_half_width = field<int>(h, "lo_half_width", 1);
    for (const auto& b : h.at("lo"))
        r.lo.push_back(cplx_from_json(b, "lo"));
    r.eta = field<double>(h, "eta", 1);
    r.noise_model = h.value("noise_model", "");
    r.approximation_valid = h.value("approximation_valid", true);
    r.l_values = field<std::vector<int>>(h, "l_values", 1);
    const std::size_t n = lines.size() - 1;
    check_count(h, n);
    const auto nl = static_cast<Eigen::Index>(r.l_values.size());
    r.k.resize(static_cast<Eigen::Index>(n), nl);
    for (std::size_t i = 0; i < n; ++i) {
        const json row = parse_line(lines[i + 1], i + 2);
        const json& ks = row.at("k");
        if (!ks.is_array() || static_cast<Eigen::Index>(ks.size()) != nl)
            throw DataError("line " + std::to_string(i + 2) + ": wrong number of K records");
        for (Eigen::Index c = 0; c < nl; ++c) {
            if (field<int>(ks[c], "l", i + 2) != r.l_values[c])
                throw DataError("line " + std::to_string(i + 2) + ": K records out of order");
            r.k(static_cast<Eigen::Index>(i), c) = cplx(field<double>(ks[c], "re", i + 2), field<double>(ks[c], "im", i + 2));
        }
    }
    return r;
}

namespace {

json matrix_part(const MatrixXcd& m, bool imag)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            row.push_back(imag ? m(i, j).imag() : m(i, j).real());
        rows.push_back(row);
    }
    return rows;
}

} // namespace

json density_matrix_to_json(const DensityMatrix& rho)
{
    return json{{"dim", rho.dim()}, {"re", matrix_part(rho.elements, false)}, {"im", matrix_part(rho.elements, true)}};
}

json density_matrix_to_json(const RhoEstimate& est)
{
    json j = density_matrix_to_json(est.rho);
    j["errors"] = json{{"re", matrix_part(est.errors, false)}, {"im", matrix_part(est.errors, true)}};
    j["phases_used"] = est.phases_used;
    return j;
}

DensityMatrix density_matrix_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("dim") || !j.contains("re") || !j.contains("im"))
        throw DataError("density matrix JSON needs dim, re and im");
    const int d = j["dim"].get<int>();
    if (d < 1)
        throw DataError("density matrix dimension must be positive");
    MatrixXcd m(d, d);
    const json& re = j["re"];
    const json& im = j["im"];
    if (re.size() != static_cast<std::size_t>(d) || im.size() != static_cast<std::size_t>(d))
        throw DataError("density matrix rows do not match dim");
    for (int a = 0; a < d; ++a) {
        if (re[a].size() != static_cast<std::size_t>(d) || im[a].size() != static_cast<std::size_t>(d))
            throw DataError("density matrix row " + std::to_string(a) + " has the wrong length");
        for (int b = 0; b < d; ++b)
            m(a, b) = cplx(re[a][b].get<double>(), im[a][b].get<double>());
    }
    return DensityMatrix(m, false);
}

std::string wigner_to_csv(const WignerGrid& w)
{
    std::ostringstream os;
    os << std::setprecision(17) << "q,p,w\n";
    for (Eigen::Index i = 0; i < w.q_axis.size(); ++i)
        for (Eigen::Index j = 0; j < w.p_axis.size(); ++j)
            os << w.q_axis[i] << ',' << w.p_axis[j] << ',' << w.values(i, j) << '\n';
    return os.str();
}

WignerGrid wigner_from_csv(const std::string& text)
{
    auto lines = split_lines(text);
    if (lines.empty() || lines[0] != "q,p,w")
        throw DataError("Wigner CSV must start with the header q,p,w");
    std::vector<double> q, p, v;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::istringstream in(lines[i]);
        double a, b, c;
        char c1, c2;
        if (!(in >> a >> c1 >> b >> c2 >> c) || c1 != ',' || c2 != ',')
            throw DataError("line " + std::to_string(i + 1) + ": expected three numbers");
        q.push_back(a);
        p.push_back(b);
        v.push_back(c);
    }
    // rows are q-major: p cycles fastest
    std::size_t np = 1;
    while (np < q.size() && q[np] == q[0])
        ++np;
    if (q.empty() || q.size() % np)
        throw DataError("Wigner CSV is not a full grid");
    const std::size_t nq = q.size() / np;
    WignerGrid w;
    w.q_axis.resize(static_cast<Eigen::Index>(nq));
    w.p_axis.resize(static_cast<Eigen::Index>(np));
    w.values.resize(static_cast<Eigen::Index>(nq), static_cast<Eigen::Index>(np));
    for (std::size_t i = 0; i < nq; ++i)
        for (std::size_t j = 0; j < np; ++j) {
            const std::size_t k = i * np + j;
            if (p[k] != p[j] || q[k] != q[i * np])
                throw DataError("Wigner CSV is not a full grid");
            w.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[k];
        }
    for (std::size_t i = 0; i < nq; ++i)
        w.q_axis[static_cast<Eigen::Index>(i)] = q[i * np];
    for (std::size_t j = 0; j < np; ++j)
        w.p_axis[static_cast<Eigen::Index>(j)] = p[j];
    return w;
}

std::string photon_numbers_to_csv(const PhotonNumberEstimate& p)
{
    std::ostringstream os;
    os << std::setprecision(17) << "n,p,stderr\n";
    for (Eigen::Index n = 0; n < p.p.size(); ++n)
        os << n << ',' << p.p[n] << ',' << p.std_err[n] << '\n';
    return os.str();
}

json estimate_to_json(const Estimate& e)
{
    return json{{"value", e.value}, {"std_err", e.std_err}};
}

json moment_report_to_json(const MomentReport& r)
{
    json j;
    j["n_samples"] = r.n_samples;
    j["eta"] = r.eta;
    j["detected_mode"] = r.detected_mode;
    j["mean_n"] = estimate_to_json(r.mean_n);
    j["mean_n_err_bound"] = r.mean_n_err_bound;
    json f = json::array();
    for (const auto& e : r.factorial_moments)
        f.push_back(estimate_to_json(e));
    j["factorial_moments"] = f;
    j["g2_valid"] = r.g2_valid;
    if (r.g2_valid)
        j["g2"] = estimate_to_json(r.g2);
    j["notes"] = r.notes;
    return j;
}

std::string moment_report_to_csv(const MomentReport& r)
{
    std::ostringstream os;
    os << std::setprecision(17) << "quantity,value,stderr\n";
    os << "mean_n," << r.mean_n.value << ',' << r.mean_n.std_err << '\n';
    for (std::size_t k = 0; k < r.factorial_moments.size(); ++k)
        os << "factorial_" << k + 1 << ',' << r.factorial_moments[k].value << ',' << r.factorial_moments[k].std_err
           << '\n';
    if (r.g2_valid)
        os << "g2," << r.g2.value << ',' << r.g2.std_err << '\n';
    return os.str();
}

json phase_distribution_to_json(const PhaseDistribution& p)
{
    return json{{"s", p.s},
                {"captured_weight", p.captured_weight},
                {"phi", std::vector<double>(p.phi_axis.data(), p.phi_axis.data() + p.phi_axis.size())},
                {"pr", std::vector<double>(p.values.data(), p.values.data() + p.values.size())}};
}

std::string phase_distribution_to_csv(const PhaseDistribution& p)
{
    std::ostringstream os;
    os << std::setprecision(17) << "phi,pr\n";
    for (Eigen::Index i = 0; i < p.values.size(); ++i)
        os << p.phi_axis[i] << ',' << p.values[i] << '\n';
    return os.str();
}

std::string temporal_to_csv(const VectorXd& t, const VectorXcd& v)
{
    if (t.size() != v.size())
        throw ConfigError("time axis and values differ in length");
    std::ostringstream os;
    os << std::setprecision(17) << "t,re,im\n";
    for (Eigen::Index i = 0; i < t.size(); ++i)
        os << t[i] << ',' << v[i].real() << ',' << v[i].imag() << '\n';
    return os.str();
}

std::string map_to_csv(const VectorXd& omega, const VectorXd& t, const MatrixXd& m)
{
    std::ostringstream os;
    os << std::setprecision(17) << "omega,t,value\n";
    for (Eigen::Index i = 0; i < omega.size(); ++i)
        for (Eigen::Index j = 0; j < t.size(); ++j)
            os << omega[i] << ',' << t[j] << ',' << m(i, j) << '\n';
    return os.str();
}

} // namespace ohtlab
