#pragma once

// Scenario documents for the command-line front end. All rates in a scenario are
// ratios to the environment width; computations run with that width set to 1.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <gsl/gsl_version.h>
#include <json.hpp>

#include "dynamics.hpp"
#include "environment.hpp"
#include "heom.hpp"
#include "pseudomode.hpp"
#include "spectral_ep.hpp"
#include "svg.hpp"

namespace extliou {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kOutDirEnv = "EXTLIOU_OUT_DIR";

using json = nlohmann::json;

struct NumericSettings {
    double tol_cluster = 1e-4;
    double tol_rank = 1e-8;
    int tier = 2;
    int n_max = 1;
    double rtol = 1e-10;
    double atol = 1e-14;
    DownWeighting weighting = DownWeighting::occupation;
};

struct ScenarioConfig {
    std::string system = "spin-boson";   // spin-boson | bosonic-network
    std::string mapping = "pmeom";       // pmeom | heom | both
    bool has_environment = false;
    SpectralDensity environment;         // width normalized to 1
    double lambda_unit = 1.0;            // the width in the caller's units
    CorrelationSpec correlation;         // explicit exponents (if given) or from environment
    // bosonic network
    std::vector<double> omega;
    Eigen::MatrixXd chi;
    int coupled_mode = -1;
    bool markovian = false;
    double markov_rate = 0.0;

    std::string action;
    json action_params = json::object();
    NumericSettings numeric;
    std::string out_dir = "out";
    std::vector<std::string> formats{"csv"};
    json raw;
};

namespace detail {

inline const json* child(const json& j, const std::string& key)
{
    if (!j.is_object())
        return nullptr;
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

inline double need_number(const json& j, const std::string& key, const std::string& path)
{
    const json* v = child(j, key);
    if (!v)
        throw ConfigError(path + "." + key, "required field is missing");
    if (!v->is_number())
        throw ConfigError(path + "." + key, "must be a number");
    return v->get<double>();
}

inline double opt_number(const json& j, const std::string& key, const std::string& path, double dflt)
{
    const json* v = child(j, key);
    if (!v)
        return dflt;
    if (!v->is_number())
        throw ConfigError(path + "." + key, "must be a number");
    return v->get<double>();
}

inline std::string opt_string(const json& j, const std::string& key, const std::string& path,
                              const std::string& dflt, std::initializer_list<const char*> allowed = {})
{
    const json* v = child(j, key);
    if (!v)
        return dflt;
    if (!v->is_string())
        throw ConfigError(path + "." + key, "must be a string");
    std::string s = v->get<std::string>();
    if (allowed.size()) {
        bool ok = false;
        std::string list;
        for (const char* a : allowed) {
            ok = ok || s == a;
            list += std::string(list.empty() ? "" : ", ") + a;
        }
        if (!ok)
            throw ConfigError(path + "." + key, "must be one of: " + list);
    }
    return s;
}

inline std::vector<double> number_list(const json& v, const std::string& path)
{
    if (!v.is_array())
        throw ConfigError(path, "must be an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number())
            throw ConfigError(path + "[" + std::to_string(i) + "]", "must be a number");
        out.push_back(v[i].get<double>());
    }
    return out;
}

inline Mat square_matrix(const json& v, const std::string& path)
{
    if (!v.is_array() || v.empty())
        throw ConfigError(path, "must be a nonempty array of rows");
    const auto n = static_cast<Eigen::Index>(v.size());
    Mat M(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto row = number_list(v[i], path + "[" + std::to_string(i) + "]");
        if (static_cast<Eigen::Index>(row.size()) != n)
            throw ConfigError(path + "[" + std::to_string(i) + "]", "row length must equal row count");
        for (Eigen::Index k = 0; k < n; ++k)
            M(i, k) = row[k];
    }
    return M;
}

} // namespace detail

inline const std::vector<std::string>& known_actions()
{
    static const std::vector<std::string> a{"sweep", "ep-find", "dynamics", "sensitivity", "validate"};
    return a;
}

/// Validates the document and normalizes all rates by the environment width.
inline ScenarioConfig parse_config(const json& doc, const std::string& subcommand)
{
    using namespace detail;
    ScenarioConfig c;
    c.raw = doc;
    if (!doc.is_object())
        throw ConfigError("$", "config must be a JSON object");
    const json* model = child(doc, "model");
    if (!model || !model->is_object())
        throw ConfigError("model", "required section is missing");
    c.system = opt_string(*model, "system", "model", "spin-boson", {"spin-boson", "bosonic-network"});
    c.mapping = opt_string(*model, "mapping", "model", "pmeom", {"pmeom", "heom", "both"});

    const json* env = child(*model, "environment");
    const json* corr = child(*model, "correlation");
    if (env && corr)
        throw ConfigError("model", "give either environment or correlation, not both");
    if (env) {
        if (!env->is_object())
            throw ConfigError("model.environment", "must be an object");
        const std::string p = "model.environment";
        const std::string type = opt_string(*env, "type", p, "lorentzian", {"lorentzian", "bandgap"});
        c.lambda_unit = need_number(*env, "lambda", p);
        if (!(c.lambda_unit > 0))
            throw ConfigError(p + ".lambda", "must be > 0");
        const double gamma = need_number(*env, "gamma", p);
        if (!(gamma > 0))
            throw ConfigError(p + ".gamma", "must be > 0");
        const double w0 = opt_number(*env, "omega0", p, 0.0);
        double q = 0.0;
        if (type == "bandgap") {
            q = need_number(*env, "q", p);
            if (!(q >= 0 && q < 1))
                throw ConfigError(p + ".q", "must lie in [0, 1)");
        }
        c.environment = SpectralDensity::bandgap(gamma, 1.0, w0, q);
        c.has_environment = true;
        c.correlation = exponents_for(c.environment);
    } else if (corr) {
        if (!corr->is_array() || corr->empty())
            throw ConfigError("model.correlation", "must be a nonempty array of [re, im, Omega, gamma]");
        for (std::size_t i = 0; i < corr->size(); ++i) {
            const std::string p = "model.correlation[" + std::to_string(i) + "]";
            auto v = number_list((*corr)[i], p);
            if (v.size() != 4)
                throw ConfigError(p, "must have four entries [re, im, Omega, gamma]");
            if (!(v[3] > 0))
                throw ConfigError(p + "[3]", "decay rate must be > 0");
            c.correlation.terms.push_back({{v[0], v[1]}, v[2], v[3]});
        }
    }

    if (c.system == "bosonic-network") {
        const json* net = child(*model, "network");
        if (!net || !net->is_object())
            throw ConfigError("model.network", "required for system bosonic-network");
        const std::string p = "model.network";
        const json* om = child(*net, "omega");
        if (!om)
            throw ConfigError(p + ".omega", "required field is missing");
        c.omega = number_list(*om, p + ".omega");
        if (c.omega.empty())
            throw ConfigError(p + ".omega", "needs at least one mode");
        const auto M = static_cast<Eigen::Index>(c.omega.size());
        const json* ch = child(*net, "chi");
        if (!ch)
            throw ConfigError(p + ".chi", "required field is missing");
        Mat X = square_matrix(*ch, p + ".chi");
        if (X.rows() != M)
            throw ConfigError(p + ".chi", "must be " + std::to_string(M) + " x " + std::to_string(M));
        c.chi = X.real();
        if ((c.chi - c.chi.transpose()).cwiseAbs().maxCoeff() > 0)
            throw ConfigError(p + ".chi", "must be symmetric");
        const double cm = opt_number(*net, "coupled_mode", p, double(M));
        if (cm < 1 || cm > double(M) || cm != std::floor(cm))
            throw ConfigError(p + ".coupled_mode", "must be an integer in [1, " + std::to_string(M) + "]");
        c.coupled_mode = static_cast<int>(cm) - 1;
        const json* mk = child(*net, "markovian");
        if (mk && !mk->is_boolean())
            throw ConfigError(p + ".markovian", "must be a boolean");
        c.markovian = mk && mk->get<bool>();
        if (!c.has_environment)
            throw ConfigError("model.environment", "required for system bosonic-network");
        c.markov_rate = c.environment.gamma;
    } else {
        if (!env && !corr)
            throw ConfigError("model.environment", "required section is missing");
    }

    const json* action = child(doc, "action");
    if (action && !action->is_object())
        throw ConfigError("action", "must be an object");
    std::string type = action ? opt_string(*action, "type", "action", "") : "";
    if (!subcommand.empty()) {
        if (!type.empty() && type != subcommand)
            throw ConfigError("action.type", "'" + type + "' conflicts with subcommand '" + subcommand + "'");
        type = subcommand;
    }
    if (type.empty())
        throw ConfigError("action.type", "no action given");
    if (std::find(known_actions().begin(), known_actions().end(), type) == known_actions().end())
        throw ConfigError("action.type", "unknown action '" + type + "'");
    c.action = type;
    if (action)
        c.action_params = *action;

    if (const json* num = child(doc, "numeric")) {
        const std::string p = "numeric";
        auto& n = c.numeric;
        n.tol_cluster = opt_number(*num, "tol_cluster", p, n.tol_cluster);
        n.tol_rank = opt_number(*num, "tol_rank", p, n.tol_rank);
        n.rtol = opt_number(*num, "rtol", p, n.rtol);
        n.atol = opt_number(*num, "atol", p, n.atol);
        const double tier = opt_number(*num, "tier", p, n.tier);
        const double nmax = opt_number(*num, "n_max", p, n.n_max);
        if (tier < 0 || tier > 12 || tier != std::floor(tier))
            throw ConfigError(p + ".tier", "must be an integer in [0, 12]");
        if (nmax < 1 || nmax > 16 || nmax != std::floor(nmax))
            throw ConfigError(p + ".n_max", "must be an integer in [1, 16]");
        n.tier = static_cast<int>(tier);
        n.n_max = static_cast<int>(nmax);
        const std::string w = opt_string(*num, "down_weighting", p, "occupation", {"occupation", "distinct"});
        n.weighting = w == "distinct" ? DownWeighting::distinct : DownWeighting::occupation;
        for (auto [key, v] : {std::pair{"tol_cluster", n.tol_cluster}, {"tol_rank", n.tol_rank},
                              {"rtol", n.rtol}, {"atol", n.atol}})
            if (!(v > 0))
                throw ConfigError(p + "." + key, "must be > 0");
    }
    if (const json* out = child(doc, "output")) {
        c.out_dir = opt_string(*out, "dir", "output", c.out_dir);
        if (const json* f = child(*out, "formats")) {
            if (!f->is_array())
                throw ConfigError("output.formats", "must be an array");
            c.formats.clear();
            for (std::size_t i = 0; i < f->size(); ++i) {
                const std::string s = (*f)[i].is_string() ? (*f)[i].get<std::string>() : "";
                if (s != "csv" && s != "json" && s != "svg")
                    throw ConfigError("output.formats[" + std::to_string(i) + "]", "must be csv, json or svg");
                c.formats.push_back(s);
            }
        }
    }
    return c;
}

// ---------------------------------------------------------------------------
// Model builders (width = 1)

inline SpectralDensity with_parameter(const ScenarioConfig& c, const std::string& name, double v,
                                      const std::string& path)
{
    if (!c.has_environment)
        throw ConfigError(path, "sweeping '" + name + "' needs model.environment");
    SpectralDensity J = c.environment;
    if (name == "gamma") {
        if (!(v > 0))
            throw ConfigError(path, "gamma must stay > 0");
        J.gamma = v;
    } else if (name == "q") {
        if (!(v >= 0 && v < 1))
            throw ConfigError(path, "q must stay in [0, 1)");
        return SpectralDensity::bandgap(J.gamma, 1.0, J.omega0, v);
    } else {
        throw ConfigError(path, "unknown parameter '" + name + "'");
    }
    return J;
}

inline PseudomodeModel spin_boson_pm(const ScenarioConfig& c, const SpectralDensity* J = nullptr)
{
    PseudomodeModel m;
    m.Q(0, 1) = 1.0;
    m.rwa = true;
    m.n_max = c.numeric.n_max;
    m.spec = J ? exponents_for(*J) : c.correlation;
    return m;
}

inline HeomModel spin_boson_heom(const ScenarioConfig& c, const SpectralDensity* J = nullptr)
{
    HeomModel m;
    m.Q(0, 1) = 1.0;
    m.rwa = true;
    m.tier = c.numeric.tier;
    m.weighting = c.numeric.weighting;
    m.rwa_exponents = HeomModel::rwa_exponents_from(J ? exponents_for(*J) : c.correlation);
    return m;
}

inline BosonicNetwork network_at(const ScenarioConfig& c, const std::string& name, double v,
                                 const std::string& path)
{
    BosonicNetwork n;
    n.omega = c.omega;
    n.chi = c.chi;
    n.coupled = c.coupled_mode;
    double gamma = c.environment.gamma;
    if (name == "chi") {
        if (c.omega.size() < 2)
            throw ConfigError(path, "sweeping chi needs at least two modes");
        const int a = n.coupled >= 1 ? n.coupled - 1 : 0;
        const int b = n.coupled >= 1 ? n.coupled : 1;
        n.chi(a, b) = n.chi(b, a) = v;
    } else if (name == "gamma") {
        gamma = v;
    } else if (!name.empty()) {
        throw ConfigError(path, "unknown parameter '" + name + "' for a bosonic network");
    }
    if (c.markovian)
        n.markov_rate = gamma;
    else
        n.spec = exponents_for(SpectralDensity::lorentzian(gamma, 1.0));
    return n;
}

/// Generator whose spectrum is reported: restricted PMEOM, HEOM, or the NHH matrix.
inline MatrixBuilder spectrum_builder(const ScenarioConfig& c, const std::string& name,
                                      const std::string& path, bool heom)
{
    if (c.system == "bosonic-network")
        return [c, name, path](double v) { return effective_nhh(network_at(c, name, v, path)); };
    if (heom)
        return [c, name, path](double v) {
            auto J = with_parameter(c, name, v, path);
            return build_heom_rwa(spin_boson_heom(c, &J)).matrix;
        };
    return [c, name, path](double v) {
        auto J = with_parameter(c, name, v, path);
        return restrict_single_excitation(spin_boson_pm(c, &J)).matrix;
    };
}

// ---------------------------------------------------------------------------
// Output helpers

struct RunResult {
    int exit_code = 0;
    std::vector<std::string> files;
    json summary = json::object();
};

class OutputSink {
public:
    OutputSink(std::filesystem::path dir, std::set<std::string> formats)
        : dir_(std::move(dir)), formats_(std::move(formats))
    {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec || !std::filesystem::is_directory(dir_))
            throw IoError("cannot create output directory '" + dir_.string() + "'");
    }

    bool wants(const std::string& f) const { return formats_.count(f) > 0; }

    void write(const std::string& name, const std::string& text)
    {
        const auto p = dir_ / name;
        std::ofstream os(p, std::ios::binary);
        if (!os)
            throw IoError("cannot open '" + p.string() + "' for writing");
        os << text;
        if (!os)
            throw IoError("write to '" + p.string() + "' failed");
        files_.push_back(name);
    }

    const std::vector<std::string>& files() const { return files_; }
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::set<std::string> formats_;
    std::vector<std::string> files_;
};

namespace detail {

inline std::string g17(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline json sweep_json(const SweepTable& t)
{
    json j;
    j["parameter"] = t.parameter;
    j["grid"] = t.grid;
    json tr = json::array();
    for (std::size_t k = 0; k < t.grid.size(); ++k) {
        json row = json::array();
        for (const auto& z : t.tracks[k])
            row.push_back({z.real(), z.imag()});
        tr.push_back(row);
    }
    j["tracks"] = tr;
    j["flagged"] = t.flagged;
    return j;
}

inline json ep_json(const EpReport& r)
{
    return json{{"eigenvalue", {r.eigenvalue.real(), r.eigenvalue.imag()}},
                {"order", r.order},
                {"chains", r.chains},
                {"algebraic", r.algebraic},
                {"geometric", r.geometric},
                {"diabolic", r.diabolic},
                {"parameter", r.parameter},
                {"tol_cluster", r.tol_cluster},
                {"tol_rank", r.tol_rank}};
}

inline double first_complex(const SweepTable& t, double thr = 1e-5)
{
    for (std::size_t k = 0; k < t.grid.size(); ++k) {
        if (t.flagged[k])
            continue;
        for (const auto& z : t.tracks[k])
            if (std::abs(z.imag()) > thr * std::max(1.0, std::abs(z)))
                return t.grid[k];
    }
    return std::numeric_limits<double>::quiet_NaN();
}

inline std::string param_name(const ScenarioConfig& c)
{
    return opt_string(c.action_params, "parameter", "action", c.system == "bosonic-network" ? "chi" : "gamma",
                      {"gamma", "q", "chi"});
}

} // namespace detail

// ---------------------------------------------------------------------------
// Actions

inline void run_sweep(const ScenarioConfig& c, OutputSink& out, RunResult& res, int jobs)
{
    using namespace detail;
    const auto& a = c.action_params;
    const std::string name = param_name(c);
    const double lo = opt_number(a, "from", "action", name == "chi" ? 0.0 : 0.05);
    const double hi = opt_number(a, "to", "action", name == "chi" ? 1.0 : 1.0);
    const double pts = opt_number(a, "points", "action", 200);
    if (!(hi > lo))
        throw ConfigError("action.to", "must exceed action.from");
    if (pts < 2 || pts > 1e6 || pts != std::floor(pts))
        throw ConfigError("action.points", "must be an integer >= 2");
    const auto grid = linear_grid(lo, hi, static_cast<int>(pts));

    std::vector<std::pair<std::string, bool>> runs;
    if (c.system == "bosonic-network" || c.mapping != "heom")
        runs.push_back({"sweep", false});
    if (c.system == "spin-boson" && c.mapping != "pmeom")
        runs.push_back({"sweep_heom", true});
    for (const auto& [stem, heom] : runs) {
        const auto t = sweep_spectrum(spectrum_builder(c, name, "action.parameter", heom), grid, name, jobs);
        if (out.wants("csv")) {
            std::ostringstream os;
            write_sweep_csv(os, t);
            out.write(stem + ".csv", os.str());
        }
        if (out.wants("json"))
            out.write(stem + ".json", sweep_json(t).dump(1) + "\n");
        if (out.wants("svg"))
            out.write(stem + ".svg", render_svg(t, name + " / Λ", " / Λ"));
        res.summary[stem] = {{"points", grid.size()},
                             {"first_complex", first_complex(t)},
                             {"flagged", std::count(t.flagged.begin(), t.flagged.end(), true)}};
    }
}

inline void run_ep_find(const ScenarioConfig& c, OutputSink& out, RunResult& res)
{
    using namespace detail;
    const auto& a = c.action_params;
    const std::string name = param_name(c);
    const json* br = child(a, "bracket");
    if (!br)
        throw ConfigError("action.bracket", "required field is missing");
    auto b = number_list(*br, "action.bracket");
    if (b.size() != 2 || !(b[1] > b[0]))
        throw ConfigError("action.bracket", "must be [lo, hi] with lo < hi");
    const double tol = opt_number(a, "tol", "action", 1e-12);
    const bool nonmarkov_net = c.system == "bosonic-network" && !c.markovian;
    const std::string mode = opt_string(a, "mode", "action", nonmarkov_net ? "minimal-gap" : "real-to-complex",
                                        {"real-to-complex", "minimal-gap"});
    LocateOptions lo;
    lo.mode = mode == "minimal-gap" ? LocateMode::minimal_gap : LocateMode::real_to_complex;
    lo.cluster_size = static_cast<int>(opt_number(a, "cluster_size", "action", nonmarkov_net ? 3 : 2));
    auto spec = spectrum_builder(c, name, "action.parameter", c.mapping == "heom");
    MatrixBuilder gen = spec;
    if (c.system == "bosonic-network")
        gen = [spec](double v) { return Mat(I1 * spec(v)); };
    const double p = locate_ep_1d(gen, b[0], b[1], tol, lo);
    const auto reps = detect_ep(spec(p), c.numeric.tol_cluster, c.numeric.tol_rank, p);
    std::ostringstream txt;
    txt << "parameter " << name << ' ' << g17(p) << '\n';
    json j;
    j["parameter"] = name;
    j["value"] = p;
    j["clusters"] = json::array();
    for (const auto& r : reps) {
        txt << '\n';
        write_ep_report(txt, r);
        j["clusters"].push_back(ep_json(r));
    }
    if (out.wants("csv") || out.wants("svg"))
        out.write("ep.txt", txt.str());
    if (out.wants("json"))
        out.write("ep.json", j.dump(1) + "\n");
    res.summary["located"] = p;
    res.summary["clusters"] = j["clusters"];
    std::cerr << "note: EP order is evaluated at the located parameter " << g17(p) << "\n";
}

inline Mat rho_from(const json& a)
{
    using namespace detail;
    Mat r(2, 2);
    r << 0.5, 0.5, 0.5, 0.5;   // |+><+|
    if (const json* v = child(a, "rho0")) {
        r = square_matrix(*v, "action.rho0");
        if (r.rows() != 2)
            throw ConfigError("action.rho0", "must be 2 x 2 (rows g, e)");
    }
    if (const json* v = child(a, "rho0_imag")) {
        Mat im = square_matrix(*v, "action.rho0_imag");
        if (im.rows() != 2)
            throw ConfigError("action.rho0_imag", "must be 2 x 2");
        r += I1 * im;
    }
    if (std::abs(r.trace() - 1.0) > 1e-12 || (r - r.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
        throw ConfigError("action.rho0", "must be Hermitian with unit trace");
    Eigen::SelfAdjointEigenSolver<Mat> es(r);
    if (es.eigenvalues().minCoeff() < -1e-12)
        throw ConfigError("action.rho0", "must be positive semidefinite");
    return r;
}

inline std::vector<double> times_from(const json& a)
{
    using namespace detail;
    const std::string grid = opt_string(a, "grid", "action", "log", {"log", "linear"});
    const double tmax = opt_number(a, "t_max", "action", 10.0);
    const double pts = opt_number(a, "points", "action", grid == "log" ? 400 : 201);
    if (!(tmax > 0))
        throw ConfigError("action.t_max", "must be > 0");
    if (pts < 2 || pts != std::floor(pts))
        throw ConfigError("action.points", "must be an integer >= 2");
    if (grid == "linear")
        return linear_grid(0.0, tmax, static_cast<int>(pts));
    auto t = default_time_grid(10.0 / tmax, static_cast<int>(pts));
    return t;
}

inline void run_dynamics(const ScenarioConfig& c, OutputSink& out, RunResult& res)
{
    using namespace detail;
    const auto& a = c.action_params;
    const auto times = times_from(a);
    PropagateOptions po;
    po.rtol = c.numeric.rtol;
    po.atol = c.numeric.atol;
    if (c.system == "bosonic-network") {
        const auto n = network_at(c, "", 0, "");
        const Mat H = effective_nhh(n);
        Vec v0 = Vec::Zero(H.rows());
        if (const json* v = child(a, "v0")) {
            auto x = number_list(*v, "action.v0");
            if (static_cast<Eigen::Index>(x.size()) > H.rows())
                throw ConfigError("action.v0", "longer than the number of modes plus pseudomodes");
            for (std::size_t i = 0; i < x.size(); ++i)
                v0(i) = x[i];
        } else {
            v0(0) = 1.0;
        }
        const auto traj = evolve_amplitudes(H, v0, times, po);
        std::ostringstream os;
        os << "t";
        for (Eigen::Index i = 0; i < H.rows(); ++i)
            os << ",re_" << i << ",im_" << i;
        os << '\n';
        std::vector<Series> s(H.rows());
        for (std::size_t k = 0; k < times.size(); ++k) {
            os << g17(times[k]);
            for (Eigen::Index i = 0; i < H.rows(); ++i) {
                os << ',' << g17(traj[k](i).real()) << ',' << g17(traj[k](i).imag());
                s[i].x.push_back(times[k]);
                s[i].y.push_back(std::abs(traj[k](i)));
            }
            os << '\n';
        }
        if (out.wants("csv"))
            out.write("amplitudes.csv", os.str());
        if (out.wants("svg"))
            out.write("amplitudes.svg", render_svg(s, "Λ t", "|⟨v_k⟩|"));
        if (out.wants("json")) {
            json j;
            j["times"] = times;
            j["amplitudes"] = json::array();
            for (const auto& v : traj) {
                json row = json::array();
                for (Eigen::Index i = 0; i < v.size(); ++i)
                    row.push_back({v(i).real(), v(i).imag()});
                j["amplitudes"].push_back(row);
            }
            out.write("amplitudes.json", j.dump(1) + "\n");
        }
        res.summary["modes"] = H.rows();
        return;
    }

    const Mat rho0 = rho_from(a);
    std::vector<std::pair<std::string, Trajectory>> trs;
    if (c.mapping != "heom")
        trs.push_back({"trajectory", evolve_reduced(spin_boson_pm(c), rho0, times, po)});
    if (c.mapping != "pmeom")
        trs.push_back({c.mapping == "heom" ? "trajectory" : "trajectory_heom",
                       evolve_reduced(spin_boson_heom(c), rho0, times, po)});
    const bool analytic = c.has_environment;
    Trajectory an;
    if (analytic) {
        const auto& J = c.environment;
        an = analytic_spin_boson(J.gamma, 1.0, J.q, rho0, times);
        res.summary["nonmarkovian"] = is_nonmarkovian(J.gamma, 1.0, J.q).nonmarkovian;
    }
    for (auto& [stem, tr] : trs) {
        if (analytic) {
            tr.absG = an.absG;
            res.summary[stem + "_vs_analytic"] = max_deviation(tr, an);
        }
        if (out.wants("csv")) {
            std::ostringstream os;
            write_trajectory_csv(os, tr);
            out.write(stem + ".csv", os.str());
        }
        if (out.wants("json")) {
            json j;
            j["provenance"] = tr.provenance;
            j["times"] = tr.times;
            j["rtol"] = tr.rtol;
            j["rho"] = json::array();
            for (const auto& r : tr.rho)
                j["rho"].push_back({{r(0, 0).real(), r(0, 0).imag(), r(0, 1).real(), r(0, 1).imag()},
                                    {r(1, 0).real(), r(1, 0).imag(), r(1, 1).real(), r(1, 1).imag()}});
            out.write(stem + ".json", j.dump(1) + "\n");
        }
    }
    if (trs.size() == 2)
        res.summary["pmeom_vs_heom"] = max_deviation(trs[0].second, trs[1].second);
    if (out.wants("svg")) {
        Series s;
        const auto& tr = trs.front().second;
        s.x = tr.times;
        if (analytic) {
            s.name = "|G|";
            s.y = an.absG;
            out.write("trajectory.svg", render_svg({s}, "Λ t", "|G(t)|"));
        } else {
            for (const auto& r : tr.rho)
                s.y.push_back(r(1, 1).real());
            out.write("trajectory.svg", render_svg({s}, "Λ t", "ρ_ee(t)"));
        }
    }
}

inline void run_sensitivity(const ScenarioConfig& c, OutputSink& out, RunResult& res)
{
    using namespace detail;
    const auto& a = c.action_params;
    const bool net = c.system == "bosonic-network";
    const std::string target = opt_string(a, "target", "action", net ? (c.markovian ? "ep2-markov" : "ep3-two-mode") : "t-vanish",
                                          {"t-vanish", "ep2-markov", "ep3-two-mode"});
    const double e0 = opt_number(a, "eps_min", "action", 1e-6);
    const double e1 = opt_number(a, "eps_max", "action", 1e-3);
    const double pts = opt_number(a, "points", "action", 13);
    if (!(e0 > 0) || !(e1 >= 100 * e0 * (1 - 1e-12)))
        throw ConfigError("action.eps_max", "eps grid must be positive and span two decades");
    if (pts < 2 || pts != std::floor(pts))
        throw ConfigError("action.points", "must be an integer >= 2");
    const auto eps = logspace(e0, e1, static_cast<int>(pts));

    ScalingFit fit;
    std::string ylabel;
    if (target == "t-vanish") {
        std::vector<double> inv;
        for (double e : eps) {
            const double horizon = std::max(1e3, 40 * M_PI / std::sqrt(e));
            inv.push_back(1.0 / first_vanishing_time(0.5 * (1 + e), 1.0, horizon));
        }
        fit = fit_power_law(eps, inv);
        ylabel = "1 / (Λ t_vanish)";
    } else {
        const bool markov = target == "ep2-markov";
        const int k = markov ? 2 : 3;
        double chi0, gamma;
        if (net && child(a, "chi") == nullptr) {
            const int cm = c.coupled_mode >= 1 ? c.coupled_mode : 1;
            chi0 = c.chi(cm - 1, cm);
            gamma = c.environment.gamma;
        } else {
            chi0 = opt_number(a, "chi", "action", markov ? 0.5 : 1.0 / (3.0 * std::sqrt(3.0)));
            gamma = opt_number(a, "gamma", "action", markov ? 1.0 : 16.0 / 27.0);
        }
        auto build = [=](double e) {
            return effective_nhh(BosonicNetwork::two_mode(chi0 * (1 + e), gamma, 1.0, markov));
        };
        cplx center;
        const double spread = cluster_spread(eigenvalues(build(0.0)), k, &center);
        if (spread > 1e-3)
            throw NumericalError("sensitivity: the unperturbed point is not an EP (spread " + g17(spread) + ")");
        fit = perturbation_scaling(build, center, k, eps);
        ylabel = "splitting / Λ";
        res.summary["ep_eigenvalue"] = {center.real(), center.imag()};
        const auto x = puiseux_coefficients(build, center, k, eps.front());
        json xs = json::array();
        for (const auto& z : x)
            xs.push_back({z.real(), z.imag()});
        res.summary["puiseux"] = xs;
    }
    res.summary["target"] = target;
    res.summary["exponent"] = fit.exponent;
    res.summary["coefficient"] = fit.coefficient;
    res.summary["residual"] = fit.residual;
    if (out.wants("csv")) {
        std::ostringstream os;
        os << "eps,value\n";
        for (std::size_t i = 0; i < eps.size(); ++i)
            os << g17(eps[i]) << ',' << g17(fit.splitting[i]) << '\n';
        out.write("sensitivity.csv", os.str());
    }
    if (out.wants("json")) {
        json j{{"target", target}, {"eps", eps}, {"value", fit.splitting}, {"exponent", fit.exponent},
               {"coefficient", fit.coefficient}, {"residual", fit.residual}};
        out.write("sensitivity.json", j.dump(1) + "\n");
    }
    if (out.wants("svg")) {
        Series s;
        for (std::size_t i = 0; i < eps.size(); ++i) {
            s.x.push_back(std::log10(eps[i]));
            s.y.push_back(std::log10(fit.splitting[i]));
        }
        out.write("sensitivity.svg", render_svg({s}, "log10 ε", "log10 " + ylabel));
    }
}

struct CheckRow {
    std::string name;
    double value;
    double tolerance;
    bool pass() const { return value <= tolerance; }
};

/// PMEOM vs HEOM vs analytic G, tier convergence, quadrature oracle and EP location.
inline std::vector<CheckRow> validation_suite(const std::vector<double>& gammas, const std::vector<double>& qs,
                                              const PropagateOptions& po = {})
{
    std::vector<CheckRow> rows;
    Mat rho0(2, 2);
    rho0 << 0.5, 0.5, 0.5, 0.5;
    const auto times = linear_grid(0.0, 10.0, 201);
    for (double g : gammas)
        for (double q : qs) {
            const auto J = SpectralDensity::bandgap(g, 1.0, 0.0, q);
            const auto pm = evolve_reduced(PseudomodeModel::spin_boson(J), rho0, times, po);
            const auto he = evolve_reduced(HeomModel::spin_boson(J, 2), rho0, times, po);
            const auto h3 = evolve_reduced(HeomModel::spin_boson(J, 3), rho0, times, po);
            const auto an = analytic_spin_boson(g, 1.0, q, rho0, times);
            const std::string tag = "gamma=" + detail::g17(g) + " q=" + detail::g17(q);
            rows.push_back({"pmeom_vs_heom " + tag, max_deviation(pm, he), 1e-8});
            rows.push_back({"pmeom_vs_analytic " + tag, max_deviation(pm, an), 1e-8});
            rows.push_back({"heom_vs_analytic " + tag, max_deviation(he, an), 1e-8});
            rows.push_back({"tier3_vs_tier2 " + tag, max_deviation(he, h3), 1e-10});
        }
    for (double q : {0.0, 0.25}) {
        const auto J = SpectralDensity::bandgap(1.0, 1.0, 100.0, q);
        const auto spec = exponents_for(J);
        const double c0 = std::abs(correlation_value(spec, 0.0));
        double m = 0;
        for (double t : linear_grid(0.0, 10.0, 101))
            m = std::max(m, std::abs(correlation_quadrature(J, t, true) - correlation_value(spec, t)));
        rows.push_back({"correlation_quadrature q=" + detail::g17(q), m / c0, 1e-6});
    }
    for (double q : {0.0, 0.25, 0.5}) {
        auto b = [q](double g) {
            return restrict_single_excitation(PseudomodeModel::spin_boson(SpectralDensity::bandgap(g, 1.0, 0.0, q))).matrix;
        };
        const double p = locate_ep_1d(b, 0.05, 0.9, 1e-10);
        rows.push_back({"ep_location q=" + detail::g17(q), std::abs(p - (1 - q) / 2), 1e-6});
    }
    return rows;
}

inline void run_validate(const ScenarioConfig& c, OutputSink& out, RunResult& res)
{
    using namespace detail;
    const auto& a = c.action_params;
    std::vector<double> gammas{0.3, 0.5, 0.8}, qs{0.0, 0.25, 0.5};
    if (const json* v = child(a, "gammas"))
        gammas = number_list(*v, "action.gammas");
    if (const json* v = child(a, "qs"))
        qs = number_list(*v, "action.qs");
    for (double q : qs)
        if (!(q >= 0 && q < 1))
            throw ConfigError("action.qs", "entries must lie in [0, 1)");
    for (double g : gammas)
        if (!(g > 0))
            throw ConfigError("action.gammas", "entries must be > 0");
    PropagateOptions po;
    po.rtol = c.numeric.rtol;
    po.atol = c.numeric.atol;
    const auto rows = validation_suite(gammas, qs, po);
    bool ok = true;
    std::ostringstream os;
    os << "check,value,tolerance,pass\n";
    json j = json::array();
    double worst = 0;
    for (const auto& r : rows) {
        ok = ok && r.pass();
        os << r.name << ',' << g17(r.value) << ',' << g17(r.tolerance) << ',' << (r.pass() ? 1 : 0) << '\n';
        j.push_back({{"check", r.name}, {"value", r.value}, {"tolerance", r.tolerance}, {"pass", r.pass()}});
        worst = std::max(worst, r.value / r.tolerance);
    }
    if (out.wants("csv"))
        out.write("validate.csv", os.str());
    if (out.wants("json"))
        out.write("validate.json", j.dump(1) + "\n");
    if (out.wants("svg")) {
        Series s;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            s.x.push_back(double(i));
            s.y.push_back(std::log10(std::max(rows[i].value / rows[i].tolerance, 1e-300)));
        }
        out.write("validate.svg", render_svg({s}, "check index", "log10 (deviation / tolerance)"));
    }
    res.summary["checks"] = rows.size();
    res.summary["worst_ratio"] = worst;
    res.summary["passed"] = ok;
    if (!ok)
        res.exit_code = 3;
}

inline std::string library_versions_json()
{
    json v{{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                         std::to_string(EIGEN_MINOR_VERSION)},
           {"boost", BOOST_LIB_VERSION},
           {"gsl", GSL_VERSION},
           {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                 std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                 std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    return v.dump();
}

/// Runs the configured action; writes artifacts plus manifest.json into `dir`.
inline RunResult run(const ScenarioConfig& c, const std::string& dir, int jobs = 1)
{
    RunResult res;
    std::set<std::string> formats(c.formats.begin(), c.formats.end());
    OutputSink out(dir, formats);
    if (c.action == "sweep")
        run_sweep(c, out, res, jobs);
    else if (c.action == "ep-find")
        run_ep_find(c, out, res);
    else if (c.action == "dynamics")
        run_dynamics(c, out, res);
    else if (c.action == "sensitivity")
        run_sensitivity(c, out, res);
    else if (c.action == "validate")
        run_validate(c, out, res);
    else
        throw ConfigError("action.type", "unknown action '" + c.action + "'");

    const auto& n = c.numeric;
    json m;
    m["tool"] = "extliou";
    m["version"] = kVersion;
    m["action"] = c.action;
    m["system"] = c.system;
    m["mapping"] = c.mapping;
    m["units"] = {{"rate_unit_lambda", c.lambda_unit}, {"note", "all rates and times in units of lambda"}};
    m["numeric"] = {{"tol_cluster", n.tol_cluster}, {"tol_rank", n.tol_rank}, {"tier", n.tier},
                    {"n_max", n.n_max}, {"rtol", n.rtol}, {"atol", n.atol},
                    {"down_weighting", n.weighting == DownWeighting::distinct ? "distinct" : "occupation"},
                    {"tol_eig", 1e-10}, {"quadrature_abs_tol", 1e-8}, {"quadrature_window", 200}};
    m["libraries"] = json::parse(library_versions_json());
    m["config"] = c.raw;
    m["summary"] = res.summary;
    m["outputs"] = out.files();
    m["exit_code"] = res.exit_code;
    out.write("manifest.json", m.dump(1) + "\n");
    res.files = out.files();
    return res;
}

/// Exit status for an exception escaping `run`.
inline int exit_code_for(const std::exception& e)
{
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParameterError*>(&e) ||
        dynamic_cast<const json::exception*>(&e))
        return 2;
    if (dynamic_cast<const IoError*>(&e))
        return 4;
    return 3;
}

} // namespace extliou
