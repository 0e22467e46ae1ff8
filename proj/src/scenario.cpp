#include "catm/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "catm/error.hpp"
#include "catm/probability_io.hpp"

namespace catm {

namespace {

const char* kModule = "cli-driver";
using nlohmann::json;

class Node {
public:
    Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(kModule, path_, "expected an object");
    }

    const std::string& path() const { return path_; }
    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return j_.contains(key); }
    const json& raw(const std::string& key) const { return j_.at(key); }

    void allow(std::initializer_list<const char*> keys) const {
        const std::set<std::string> ok(keys.begin(), keys.end());
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!ok.count(it.key())) throw ConfigError(kModule, at(it.key()), "unknown key");
    }

    Node child(const std::string& key) const {
        if (!has(key)) return Node(empty(), at(key));
        return Node(j_.at(key), at(key));
    }

    double number(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number()) throw ConfigError(kModule, at(key), "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ConfigError(kModule, at(key), "must be finite");
        return x;
    }

    double required_number(const std::string& key) const {
        if (!has(key)) throw ConfigError(kModule, at(key), "required");
        return number(key, 0.0);
    }

    int integer(const std::string& key, int fallback) const {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number_integer()) throw ConfigError(kModule, at(key), "expected an integer");
        return v.get<int>();
    }

    bool boolean(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_boolean()) throw ConfigError(kModule, at(key), "expected true or false");
        return v.get<bool>();
    }

    std::string text(const std::string& key, const std::string& fallback) const {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_string()) throw ConfigError(kModule, at(key), "expected a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key) const {
        std::vector<double> out;
        if (!has(key)) return out;
        const json& v = j_.at(key);
        if (!v.is_array()) throw ConfigError(kModule, at(key), "expected an array of numbers");
        for (size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number() || !std::isfinite(v[i].get<double>()))
                throw ConfigError(kModule, at(key) + "[" + std::to_string(i) + "]", "expected a finite number");
            out.push_back(v[i].get<double>());
        }
        return out;
    }

    std::vector<std::string> strings(const std::string& key) const {
        std::vector<std::string> out;
        if (!has(key)) return out;
        const json& v = j_.at(key);
        if (!v.is_array()) throw ConfigError(kModule, at(key), "expected an array of strings");
        for (size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_string())
                throw ConfigError(kModule, at(key) + "[" + std::to_string(i) + "]", "expected a string");
            out.push_back(v[i].get<std::string>());
        }
        return out;
    }

private:
    static const json& empty() {
        static const json e = json::object();
        return e;
    }

    const json& j_;
    std::string path_;
};

// Real number or [re, im] pair.
cplx parse_complex(const json& v, const std::string& path) {
    if (v.is_number()) return v.get<double>();
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
        return {v[0].get<double>(), v[1].get<double>()};
    throw ConfigError(kModule, path, "expected a number or a [re, im] pair");
}

Eigen::VectorXcd parse_complex_vector(const json& v, const std::string& path) {
    if (!v.is_array() || v.empty()) throw ConfigError(kModule, path, "expected a nonempty array");
    Eigen::VectorXcd out(static_cast<Eigen::Index>(v.size()));
    for (size_t i = 0; i < v.size(); ++i)
        out[static_cast<Eigen::Index>(i)] = parse_complex(v[i], path + "[" + std::to_string(i) + "]");
    return out;
}

RunKind parse_run_kind(const std::string& name, const std::string& path) {
    static const std::vector<std::pair<std::string, RunKind>> kinds = {
        {"catm", RunKind::catm},       {"sod", RunKind::sod},         {"split", RunKind::split},
        {"oracle", RunKind::oracle},   {"compare", RunKind::compare}, {"scan-e0", RunKind::scan_e0},
        {"scan-v0", RunKind::scan_v0}, {"multistep", RunKind::multistep}};
    for (const auto& [n, k] : kinds)
        if (n == name) return k;
    throw ConfigError(kModule, path, "unknown run kind '" + name + "'");
}

void parse_surfaces(const Node& m, SurfaceModelConfig& s) {
    m.allow({"kind", "grid", "mass", "energy_cutoff", "ground", "excited", "dipole", "cap", "truncation",
             "bound_threshold", "bound_im_cutoff"});
    const Node g = m.child("grid");
    g.allow({"n_points", "x_min", "x_max"});
    s.grid.n_points = g.integer("n_points", s.grid.n_points);
    s.grid.x_min = g.number("x_min", s.grid.x_min);
    s.grid.x_max = g.number("x_max", s.grid.x_max);
    SurfaceParams& p = s.params;
    p.mass = m.number("mass", p.mass);
    p.energy_cutoff = m.number("energy_cutoff", p.energy_cutoff);
    const Node gr = m.child("ground");
    gr.allow({"depth", "width", "center"});
    p.morse_depth = gr.number("depth", p.morse_depth);
    p.morse_width = gr.number("width", p.morse_width);
    p.morse_center = gr.number("center", p.morse_center);
    const Node ex = m.child("excited");
    ex.allow({"amplitude", "decay", "shift"});
    p.excited_amplitude = ex.number("amplitude", p.excited_amplitude);
    p.excited_decay = ex.number("decay", p.excited_decay);
    p.excited_shift = ex.number("shift", p.excited_shift);
    const Node d = m.child("dipole");
    d.allow({"strength", "range"});
    p.dipole_strength = d.number("strength", p.dipole_strength);
    p.dipole_range = d.number("range", p.dipole_range);
    const Node c = m.child("cap");
    c.allow({"enabled", "eta", "onset_fraction", "order"});
    s.cap_enabled = c.boolean("enabled", s.cap_enabled);
    p.cap_strength = c.number("eta", p.cap_strength);
    p.cap_onset_fraction = c.number("onset_fraction", p.cap_onset_fraction);
    p.cap_order = c.integer("order", p.cap_order);
    const Node t = m.child("truncation");
    t.allow({"max_states", "energy_cutoff"});
    s.truncation.max_states = t.integer("max_states", s.truncation.max_states);
    if (s.truncation.max_states < 0) throw ConfigError(kModule, t.at("max_states"), "must be nonnegative");
    if (t.has("energy_cutoff")) s.truncation.energy_cutoff = t.number("energy_cutoff", 0.0);
    if (m.has("bound_threshold")) s.bound_threshold = m.number("bound_threshold", 0.0);
    s.bound_im_cutoff = m.number("bound_im_cutoff", s.bound_im_cutoff);
    if (!(s.bound_im_cutoff > 0.0)) throw ConfigError(kModule, m.at("bound_im_cutoff"), "must be positive");

    s.grid.validate();
    SurfaceModel model = make_surface_model(p, s.grid);
    model.cap_enabled = s.cap_enabled;
    validate_surface_model(model, s.grid);
}

void parse_levels(const Node& m, LevelModelConfig& l) {
    m.allow({"kind", "energies", "dipole", "bound_states"});
    if (!m.has("energies")) throw ConfigError(kModule, m.at("energies"), "required");
    l.energies = parse_complex_vector(m.raw("energies"), m.at("energies"));
    const Eigen::Index n = l.energies.size();
    if (!m.has("dipole")) throw ConfigError(kModule, m.at("dipole"), "required");
    const json& d = m.raw("dipole");
    if (!d.is_array() || static_cast<Eigen::Index>(d.size()) != n)
        throw ConfigError(kModule, m.at("dipole"), "expected an n x n array matching the energies");
    l.dipole.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::string row = m.at("dipole") + "[" + std::to_string(i) + "]";
        const Eigen::VectorXcd r = parse_complex_vector(d[static_cast<size_t>(i)], row);
        if (r.size() != n) throw ConfigError(kModule, row, "row length differs from the number of levels");
        l.dipole.row(i) = r.transpose();
    }
    if (m.has("bound_states")) {
        const json& b = m.raw("bound_states");
        if (!b.is_array()) throw ConfigError(kModule, m.at("bound_states"), "expected an array of indices");
        for (size_t i = 0; i < b.size(); ++i) {
            const std::string path = m.at("bound_states") + "[" + std::to_string(i) + "]";
            if (!b[i].is_number_integer()) throw ConfigError(kModule, path, "expected an integer");
            const int j = b[i].get<int>();
            if (j < 0 || j >= n) throw ConfigError(kModule, path, "index out of range");
            l.bound_states.push_back(j);
        }
    } else {
        for (int j = 0; j < n; ++j) l.bound_states.push_back(j);
    }
    LevelSystem{l.energies, l.dipole}.validate();
}

SolverSettings parse_solver(const Node& s) {
    s.allow({"method", "tolerance", "max_iterations", "k_max", "freeze_distortion", "stagnation_window",
             "stagnation_factor", "growth_window", "growth_factor", "denominator_floor"});
    SolverSettings out;
    const std::string method = s.text("method", "rdwa");
    if (method != "rdwa" && method != "krylov")
        throw ConfigError(kModule, s.at("method"), "expected 'rdwa' or 'krylov'");
    out.use_krylov = method == "krylov";
    out.tolerance = s.number("tolerance", out.tolerance);
    out.max_iterations = s.integer("max_iterations", out.max_iterations);
    out.k_max = s.integer("k_max", out.k_max);
    out.freeze_distortion = s.boolean("freeze_distortion", out.freeze_distortion);
    out.stagnation_window = s.integer("stagnation_window", out.stagnation_window);
    out.stagnation_factor = s.number("stagnation_factor", out.stagnation_factor);
    out.growth_window = s.integer("growth_window", out.growth_window);
    out.growth_factor = s.number("growth_factor", out.growth_factor);
    out.denominator_floor = s.number("denominator_floor", out.denominator_floor);
    out.validate();
    return out;
}

SegmentTail parse_tail(const Node& t) {
    t.allow({"taper", "lead_in", "ramp", "max_target_growth"});
    SegmentTail out;
    out.taper = t.number("taper", out.taper);
    out.lead_in = t.number("lead_in", out.lead_in);
    out.ramp = t.number("ramp", out.ramp);
    out.max_target_growth = t.number("max_target_growth", out.max_target_growth);
    try {
        out.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(e.module(), "run." + e.path(), "invalid segment tail");
    }
    return out;
}

OracleConfig parse_oracle(const Node& o) {
    o.allow({"initial_substep", "tolerance", "max_doublings", "order", "max_dimension"});
    OracleConfig out;
    out.initial_substep = o.number("initial_substep", out.initial_substep);
    out.tolerance = o.number("tolerance", out.tolerance);
    out.max_doublings = o.integer("max_doublings", out.max_doublings);
    const int order = o.integer("order", 4);
    if (order != 2 && order != 4) throw ConfigError(kModule, o.at("order"), "expected 2 or 4");
    out.order = order == 2 ? MagnusOrder::midpoint : MagnusOrder::gauss4;
    out.max_dimension = o.integer("max_dimension", out.max_dimension);
    if (!(out.initial_substep > 0.0)) throw ConfigError(kModule, o.at("initial_substep"), "must be positive");
    if (!(out.tolerance > 0.0)) throw ConfigError(kModule, o.at("tolerance"), "must be positive");
    if (out.max_doublings < 0) throw ConfigError(kModule, o.at("max_doublings"), "must be nonnegative");
    if (out.max_dimension < 1) throw ConfigError(kModule, o.at("max_dimension"), "must be positive");
    return out;
}

int model_size(const ScenarioConfig& cfg) {
    if (cfg.model_kind == ModelKind::levels) return static_cast<int>(cfg.levels.energies.size());
    const int full = 2 * cfg.surfaces.grid.n_points;
    const int m = cfg.surfaces.truncation.max_states;
    return m > 0 ? std::min(m, full) : full;
}

Eigen::VectorXcd initial_vector(const ScenarioConfig& cfg, int n) {
    if (cfg.initial_index) {
        if (*cfg.initial_index >= n) throw ConfigError(kModule, "initial_state.index", "index out of range");
        return Eigen::VectorXcd::Unit(n, *cfg.initial_index);
    }
    if (cfg.initial_state.size() != n)
        throw ConfigError(kModule, "initial_state.amplitudes", "length differs from the basis size");
    return cfg.initial_state;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double quality(const ScenarioConfig& cfg, const Eigen::VectorXcd& psi0, const Eigen::VectorXcd& target) {
    return cfg.initial_index ? residue_epsilon(psi0, *cfg.initial_index) : initial_deviation(psi0, target);
}

void append_state(WavefunctionSeries& s, double t, const Eigen::VectorXcd& psi) {
    s.times.push_back(t);
    s.states.conservativeResize(psi.size(), s.states.cols() + 1);
    s.states.col(s.states.cols() - 1) = psi;
}

std::vector<double> record_times(const StepConfig& steps) {
    std::vector<double> t{0.0};
    for (int k = 1; k <= steps.n_steps; ++k)
        if (k == steps.n_steps || (steps.record_every > 0 && k % steps.record_every == 0))
            t.push_back(k * steps.step());
    return t;
}

std::string format_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12e", x);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(kModule, "cannot open " + path.string() + " for writing");
    f << text;
    if (!f) throw Error(kModule, "write failed for " + path.string());
}

struct ConvergenceRow {
    int segment = 0;
    IterationRecord record;
};

std::string format_convergence(const std::vector<ConvergenceRow>& rows, bool segmented) {
    std::ostringstream out;
    out << (segmented ? "segment," : "") << "iteration,residual,H_eff_re,H_eff_im\n";
    for (const auto& r : rows) {
        if (segmented) out << r.segment << ",";
        out << r.record.iteration << "," << format_number(r.record.residual) << ","
            << format_number(r.record.effective_energy.real()) << ","
            << format_number(r.record.effective_energy.imag()) << "\n";
    }
    return out.str();
}

json final_record(const ProbabilitySeries& p) {
    const size_t k = p.size() - 1;
    json j;
    j["t"] = p.times[k];
    j["P_diss"] = p.dissociation[k];
    j["norm"] = p.norm[k];
    std::vector<double> pops(static_cast<size_t>(p.n_states()));
    for (int s = 0; s < p.n_states(); ++s) pops[static_cast<size_t>(s)] = p.populations(s, static_cast<Eigen::Index>(k));
    j["P"] = pops;
    return j;
}

json convergence_json(const ConvergenceError& e) {
    json j;
    j["converged"] = false;
    j["error"] = e.what();
    j["iterations"] = e.history().size();
    if (!e.history().empty()) j["last_residual"] = e.history().back();
    return j;
}

ProbabilitySeries probabilities(const PreparedModel& model, const WavefunctionSeries& series) {
    ProbabilitySeries p = transition_probabilities(series, model.bound_states, model.metric);
    validate_records(p);
    return p;
}

}  // namespace

std::string run_kind_name(RunKind kind) {
    switch (kind) {
        case RunKind::catm: return "catm";
        case RunKind::sod: return "sod";
        case RunKind::split: return "split";
        case RunKind::oracle: return "oracle";
        case RunKind::compare: return "compare";
        case RunKind::scan_e0: return "scan-e0";
        case RunKind::scan_v0: return "scan-v0";
        case RunKind::multistep: return "multistep";
    }
    return "catm";
}

ScenarioConfig parse_scenario(const json& doc) {
    const Node root(doc, "");
    root.allow({"schema_version", "name", "model", "pulse", "time_grid", "absorber", "representation", "solver",
                "initial_state", "run", "output"});
    if (!root.has("schema_version")) throw ConfigError(kModule, "schema_version", "required");
    if (root.integer("schema_version", 0) != kScenarioSchemaVersion)
        throw ConfigError(kModule, "schema_version", "unsupported version, expected " +
                                                         std::to_string(kScenarioSchemaVersion));
    ScenarioConfig cfg;
    cfg.name = root.text("name", cfg.name);

    const Node m = root.child("model");
    const std::string kind = m.text("kind", "surfaces");
    if (kind == "surfaces") {
        cfg.model_kind = ModelKind::surfaces;
        parse_surfaces(m, cfg.surfaces);
    } else if (kind == "levels") {
        cfg.model_kind = ModelKind::levels;
        parse_levels(m, cfg.levels);
    } else {
        throw ConfigError(kModule, "model.kind", "expected 'surfaces' or 'levels'");
    }

    const Node tg = root.child("time_grid");
    tg.allow({"T0", "dT", "n_modes"});
    cfg.time_grid.physical_duration = tg.required_number("T0");
    cfg.time_grid.absorbing_duration = tg.number("dT", cfg.time_grid.physical_duration * 70.0 / 212.9);
    cfg.time_grid.n_modes = tg.integer("n_modes", cfg.time_grid.n_modes);
    cfg.time_grid.validate();

    const Node p = root.child("pulse");
    p.allow({"E0", "omega", "phase", "envelope", "center", "tau", "plateau"});
    cfg.pulse.peak_amplitude = p.number("E0", 0.0);
    cfg.pulse.carrier_frequency = p.number("omega", 0.0);
    cfg.pulse.phase = p.number("phase", 0.0);
    const std::string env = p.text("envelope", "gaussian");
    if (env == "gaussian") cfg.pulse.envelope = EnvelopeKind::gaussian;
    else if (env == "gaussian_plateau") cfg.pulse.envelope = EnvelopeKind::gaussian_plateau;
    else throw ConfigError(kModule, "pulse.envelope", "expected 'gaussian' or 'gaussian_plateau'");
    cfg.pulse.duration = cfg.time_grid.physical_duration;
    cfg.pulse.center = p.number("center", 0.5 * cfg.pulse.duration);
    cfg.pulse.width = p.number("tau", 1.0);
    cfg.pulse.plateau = p.number("plateau", 0.0);
    cfg.pulse.validate();

    const Node a = root.child("absorber");
    a.allow({"V0", "shape", "taper_fraction"});
    cfg.absorber.amplitude = a.number("V0", 0.4);
    const std::string shape = a.text("shape", "tapered_sinc2");
    if (shape == "sinc2") cfg.absorber.shape = AbsorberShape::sinc2;
    else if (shape == "tapered_sinc2") cfg.absorber.shape = AbsorberShape::tapered_sinc2;
    else throw ConfigError(kModule, "absorber.shape", "expected 'sinc2' or 'tapered_sinc2'");
    cfg.absorber.taper_fraction = a.number("taper_fraction", cfg.absorber.taper_fraction);
    cfg.absorber.window_start = cfg.time_grid.physical_duration;
    cfg.absorber.window_length = cfg.time_grid.absorbing_duration;
    cfg.absorber.validate();

    const Node r = root.child("representation");
    r.allow({"mode", "im_threshold"});
    cfg.representation.mode = parse_representation(r.text("mode", "direct"));
    cfg.representation.im_threshold = r.number("im_threshold", cfg.representation.im_threshold);
    cfg.representation.validate();

    cfg.solver = parse_solver(root.child("solver"));

    const Node is = root.child("initial_state");
    is.allow({"index", "amplitudes"});
    const int n = model_size(cfg);
    if (is.has("amplitudes")) {
        if (is.has("index")) throw ConfigError(kModule, "initial_state", "give either index or amplitudes");
        Eigen::VectorXcd v = parse_complex_vector(is.raw("amplitudes"), "initial_state.amplitudes");
        if (v.size() != n)
            throw ConfigError(kModule, "initial_state.amplitudes", "length differs from the basis size");
        if (v.norm() == 0.0) throw ConfigError(kModule, "initial_state.amplitudes", "initial state is zero");
        cfg.initial_state = v / v.norm();
    } else {
        const int idx = is.integer("index", 0);
        if (idx < 0 || idx >= n) throw ConfigError(kModule, "initial_state.index", "index out of range");
        cfg.initial_index = idx;
        cfg.initial_state = Eigen::VectorXcd::Unit(n, idx);
    }

    const Node run = root.child("run");
    run.allow({"kind", "n_steps", "record_every", "oracle", "methods", "values", "solvers", "threads", "segments",
               "segment_V0", "tail"});
    cfg.run = parse_run_kind(run.text("kind", "catm"), "run.kind");
    cfg.steps.duration = cfg.time_grid.physical_duration;
    cfg.steps.n_steps = run.integer("n_steps", cfg.steps.n_steps);
    cfg.steps.record_every = run.integer("record_every", cfg.steps.record_every);
    cfg.steps.validate();
    cfg.oracle = parse_oracle(run.child("oracle"));

    for (const auto& name : run.strings("methods")) {
        const RunKind k = parse_run_kind(name, "run.methods");
        if (k != RunKind::catm && k != RunKind::sod && k != RunKind::split && k != RunKind::oracle)
            throw ConfigError(kModule, "run.methods", "compare accepts catm, sod, split and oracle");
        cfg.compare_methods.push_back(k);
    }
    if (cfg.run == RunKind::compare && cfg.compare_methods.size() < 2)
        throw ConfigError(kModule, "run.methods", "compare needs at least two methods");
    const bool wants_split = cfg.run == RunKind::split ||
                             std::count(cfg.compare_methods.begin(), cfg.compare_methods.end(), RunKind::split);
    if (wants_split && cfg.model_kind != ModelKind::surfaces)
        throw ConfigError(kModule, "run.kind", "the split-operator propagator needs a surfaces model");
    const bool wants_oracle = cfg.run == RunKind::oracle ||
                              std::count(cfg.compare_methods.begin(), cfg.compare_methods.end(), RunKind::oracle);
    if (wants_oracle && n > cfg.oracle.max_dimension)
        throw ConfigError(kModule, "run.oracle.max_dimension",
                          "basis size " + std::to_string(n) + " exceeds the oracle cap");

    cfg.scan.values = run.numbers("values");
    if (cfg.run == RunKind::scan_e0 || cfg.run == RunKind::scan_v0) {
        if (cfg.scan.values.empty()) throw ConfigError(kModule, "run.values", "scan needs at least one value");
        for (double v : cfg.scan.values)
            if (cfg.run == RunKind::scan_v0 && v < 0.0)
                throw ConfigError(kModule, "run.values", "absorber amplitudes must be nonnegative");
    }
    if (run.has("solvers")) cfg.scan.solvers = run.strings("solvers");
    for (const auto& s : cfg.scan.solvers)
        if (s != "configured" && s != "rdwa" && s != "krylov")
            throw ConfigError(kModule, "run.solvers", "expected 'configured', 'rdwa' or 'krylov'");
    cfg.scan.threads = run.integer("threads", 0);
    if (cfg.scan.threads < 0) throw ConfigError(kModule, "run.threads", "must be nonnegative");

    cfg.multistep.segments = run.integer("segments", 1);
    if (cfg.multistep.segments < 1) throw ConfigError(kModule, "run.segments", "must be positive");
    cfg.multistep.segment_amplitudes = run.numbers("segment_V0");
    if (!cfg.multistep.segment_amplitudes.empty() &&
        static_cast<int>(cfg.multistep.segment_amplitudes.size()) != cfg.multistep.segments)
        throw ConfigError(kModule, "run.segment_V0", "needs one amplitude per segment");
    for (double v : cfg.multistep.segment_amplitudes)
        if (v < 0.0) throw ConfigError(kModule, "run.segment_V0", "amplitudes must be nonnegative");
    cfg.multistep.tail = parse_tail(run.child("tail"));
    if (cfg.run == RunKind::multistep && cfg.multistep.segments > 1) {
        if (cfg.representation.mode == Representation::direct)
            throw ConfigError(kModule, "representation.mode",
                              "multistep runs need the full or real interaction mode");
        TimeGrid seg = cfg.time_grid;
        seg.physical_duration /= cfg.multistep.segments;
        seg.validate();
    }

    const Node o = root.child("output");
    o.allow({"directory"});
    cfg.output_directory = o.text("directory", cfg.output_directory);
    return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError(kModule, "", "cannot open config file " + path);
    json doc;
    try {
        doc = json::parse(f);
    } catch (const json::exception& e) {
        throw ConfigError(kModule, "", std::string("malformed JSON: ") + e.what());
    }
    return parse_scenario(doc);
}

PreparedModel prepare_model(const ScenarioConfig& cfg) {
    PreparedModel out;
    if (cfg.model_kind == ModelKind::levels) {
        out.system = LevelSystem{cfg.levels.energies, cfg.levels.dipole};
        out.bound_states = cfg.levels.bound_states;
        return out;
    }
    const auto& s = cfg.surfaces;
    SurfaceModel model = make_surface_model(s.params, s.grid);
    model.cap_enabled = s.cap_enabled;
    validate_surface_model(model, s.grid);
    ComplexEigenbasis basis = build_eigenbasis(s.grid, model, s.truncation);
    out.bound_states = select_bound_states(basis, s.bound_threshold.value_or(s.params.morse_depth), s.bound_im_cutoff);
    out.system = LevelSystem::from_basis(basis);
    out.metric = Eigen::MatrixXcd(basis.right_vectors.adjoint() * basis.right_vectors * basis.weight);
    out.basis = std::move(basis);
    out.surface_model = std::move(model);
    return out;
}

CatmRun run_catm(const ScenarioConfig& cfg, const PreparedModel& model, const IterationLog& log) {
    const auto start = std::chrono::steady_clock::now();
    const Eigen::VectorXcd psi0 = initial_vector(cfg, model.system.n_states());
    FloquetOperator op(model.system, cfg.pulse, cfg.time_grid, cfg.representation,
                       AbsorberSetup{cfg.absorber, psi0});
    CatmRun out;
    out.solution = solve_constrained_floquet(op, psi0, cfg.solver, log);
    out.series = reconstruct_wavefunction(out.solution, op);
    const double t0 = cfg.time_grid.physical_duration;
    if (out.series.times.back() < t0) append_state(out.series, t0, wavefunction_at(out.solution, op, t0));
    out.epsilon = quality(cfg, wavefunction_at(out.solution, op, 0.0), psi0);
    out.wall_seconds = seconds_since(start);
    return out;
}

MultistepRun multistep_propagate(const ScenarioConfig& cfg, const PreparedModel& model, const SegmentLog& log) {
    const auto start = std::chrono::steady_clock::now();
    const int k = cfg.multistep.segments;
    if (k > 1 && cfg.representation.mode == Representation::direct)
        throw ConfigError(kModule, "representation.mode", "multistep runs need the full or real interaction mode");
    const double length = cfg.time_grid.physical_duration / k;
    TimeGrid grid = cfg.time_grid;
    grid.physical_duration = length;
    std::optional<SegmentTail> tail;
    if (k > 1) tail = cfg.multistep.tail;

    MultistepRun out;
    Eigen::VectorXcd psi = initial_vector(cfg, model.system.n_states());
    for (int s = 0; s < k; ++s) {
        const double scale = psi.norm();
        const Eigen::VectorXcd init = psi / scale;
        AbsorberEnvelope env = cfg.absorber;
        if (!cfg.multistep.segment_amplitudes.empty()) env.amplitude = cfg.multistep.segment_amplitudes[static_cast<size_t>(s)];
        env.window_start = length;
        env.window_length = grid.absorbing_duration;
        FloquetOperator op(model.system, cfg.pulse, grid, cfg.representation, AbsorberSetup{env, init}, s * length,
                           tail);
        FloquetSolution sol;
        try {
            IterationLog seg_log;
            if (log) seg_log = [&](const IterationRecord& r) { log(s, r); };
            sol = solve_constrained_floquet(op, init, cfg.solver, seg_log);
        } catch (const ConvergenceError& e) {
            throw ConvergenceError(kModule, "segment " + std::to_string(s) + ": " + e.what(), e.history());
        }
        SegmentReport rep;
        rep.index = s;
        rep.start = s * length;
        rep.amplitude = env.amplitude;
        rep.iterations = sol.iterations;
        rep.residual = eigen_residual(op, sol.fbr, sol.refined_eigenvalue);
        rep.residuals = sol.history;
        rep.dropped_components = op.dropped_target_components();
        rep.dropped_weight = op.dropped_target_weight();
        const Eigen::VectorXcd first = wavefunction_at(sol, op, 0.0) * scale;
        rep.deviation = (s == 0 && cfg.initial_index) ? residue_epsilon(first, *cfg.initial_index)
                                                      : initial_deviation(first / scale, init);
        rep.join_mismatch = (first - psi).norm() / scale;

        const WavefunctionSeries seg = reconstruct_wavefunction(sol, op);
        for (Eigen::Index c = 0; c < seg.states.cols(); ++c) {
            const double t = seg.times[static_cast<size_t>(c)];
            if (s > 0 && c == 0) continue;
            if (t >= length) break;
            append_state(out.series, s * length + t, seg.states.col(c) * scale);
        }
        psi = wavefunction_at(sol, op, length) * scale;
        out.segments.push_back(std::move(rep));
    }
    append_state(out.series, cfg.time_grid.physical_duration, psi);
    out.wall_seconds = seconds_since(start);
    return out;
}

double eigenvector_overlap(const ExtendedVector& a, const ExtendedVector& b) {
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::abs((a.array().conjugate() * b.array()).sum()) / (na * nb);
}

std::vector<ScanPoint> run_scan(const ScenarioConfig& cfg, const PreparedModel& model) {
    struct Task {
        double value;
        std::string solver;
    };
    std::vector<Task> tasks;
    for (double v : cfg.scan.values)
        for (const auto& s : cfg.scan.solvers) tasks.push_back({v, s});

    auto solve = [&](const Task& task) {
        ScanPoint pt;
        pt.value = task.value;
        pt.solver = task.solver;
        const auto start = std::chrono::steady_clock::now();
        ScenarioConfig c = cfg;
        if (cfg.run == RunKind::scan_e0) c.pulse.peak_amplitude = task.value;
        else c.absorber.amplitude = task.value;
        if (task.solver == "rdwa") c.solver.use_krylov = false;
        if (task.solver == "krylov") c.solver.use_krylov = true;
        try {
            const CatmRun run = run_catm(c, model);
            pt.converged = true;
            pt.iterations = run.solution.iterations;
            pt.residual = run.solution.refined_residual;
            pt.epsilon = run.epsilon;
            const ProbabilitySeries p = probabilities(model, run.series);
            pt.final_dissociation = p.dissociation.back();
            pt.eigenvector = run.solution.fbr;
            pt.eigenvalue = run.solution.refined_eigenvalue;
        } catch (const ConvergenceError& e) {
            pt.iterations = static_cast<int>(e.history().size());
            pt.residual = e.history().empty() ? 0.0 : e.history().back();
            pt.message = e.what();
        }
        pt.wall_seconds = seconds_since(start);
        return pt;
    };

    int threads = cfg.scan.threads > 0 ? cfg.scan.threads : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min<int>(threads, static_cast<int>(tasks.size())));
    std::vector<ScanPoint> out(tasks.size());
    std::atomic<size_t> next{0};
    std::vector<std::future<void>> workers;
    for (int w = 0; w < threads; ++w)
        workers.push_back(std::async(std::launch::async, [&] {
            for (size_t i = next++; i < tasks.size(); i = next++) out[i] = solve(tasks[i]);
        }));
    for (auto& w : workers) w.get();
    return out;
}

namespace {

struct MethodResult {
    std::string name;
    ProbabilitySeries probabilities;
    json info;
};

MethodResult run_method(RunKind kind, const ScenarioConfig& cfg, const PreparedModel& model,
                        const std::vector<double>& times) {
    const auto start = std::chrono::steady_clock::now();
    const Eigen::VectorXcd psi0 = initial_vector(cfg, model.system.n_states());
    MethodResult r;
    r.name = run_kind_name(kind);
    WavefunctionSeries series;
    if (kind == RunKind::catm) {
        FloquetOperator op(model.system, cfg.pulse, cfg.time_grid, cfg.representation,
                           AbsorberSetup{cfg.absorber, psi0});
        const FloquetSolution sol = solve_constrained_floquet(op, psi0, cfg.solver);
        for (double t : times) append_state(series, t, wavefunction_at(sol, op, t));
        r.info["iterations"] = sol.iterations;
        r.info["residual"] = sol.refined_residual;
    } else if (kind == RunKind::sod) {
        PropagationResult p = sod_propagate(level_hamiltonian(model.system, cfg.pulse), psi0, cfg.steps);
        series = std::move(p.series);
        r.info["warnings"] = p.warnings;
    } else if (kind == RunKind::split) {
        PropagationResult p = split_operator_propagate(cfg.surfaces.grid, *model.surface_model, cfg.pulse,
                                                       model.basis->expand(psi0), cfg.steps);
        series = project_to_basis(*model.basis, p.series);
        r.info["warnings"] = p.warnings;
    } else {
        const OracleResult o = dense_expm_oracle(level_hamiltonian(model.system, cfg.pulse), psi0, times, cfg.oracle);
        series = o.series;
        r.info["substeps_per_unit_time"] = o.substeps_per_unit_time;
        r.info["last_doubling_change"] = o.change;
    }
    r.probabilities = probabilities(model, series);
    r.info["final"] = final_record(r.probabilities);
    r.info["wall_seconds"] = seconds_since(start);
    return r;
}

double relative_deviation(double a, double ref) {
    const double d = std::abs(a - ref);
    return d == 0.0 ? 0.0 : d / std::max(std::abs(ref), 1e-300);
}

}  // namespace

RunReport run_scenario(const ScenarioConfig& cfg, const std::string& directory) {
    namespace fs = std::filesystem;
    const fs::path dir(directory);
    fs::create_directories(dir);
    const auto start = std::chrono::steady_clock::now();
    RunReport report;
    json& summary = report.summary;
    summary["schema_version"] = kScenarioSchemaVersion;
    summary["name"] = cfg.name;
    summary["run"] = run_kind_name(cfg.run);
    summary["representation"] = representation_name(cfg.representation.mode);

    const PreparedModel model = prepare_model(cfg);
    summary["n_states"] = model.system.n_states();
    summary["bound_states"] = model.bound_states.size();

    auto emit = [&](const std::string& name, const std::string& text) {
        write_text(dir / name, text);
        report.files.push_back(name);
    };
    auto emit_series = [&](const std::string& name, const ProbabilitySeries& p) {
        emit(name, format_probabilities(p));
    };

    std::vector<ConvergenceRow> rows;
    try {
        switch (cfg.run) {
            case RunKind::catm: {
                const CatmRun run = run_catm(cfg, model, [&](const IterationRecord& r) { rows.push_back({0, r}); });
                const ProbabilitySeries p = probabilities(model, run.series);
                emit_series("probabilities.csv", p);
                summary["converged"] = true;
                summary["final"] = final_record(p);
                summary["epsilon"] = run.epsilon;
                summary["iterations"] = run.solution.iterations;
                summary["residual"] = run.solution.refined_residual;
                summary["eigenvalue"] = {run.solution.refined_eigenvalue.real(), run.solution.refined_eigenvalue.imag()};
                summary["transform_passes"] = run.solution.transform_passes;
                break;
            }
            case RunKind::sod:
            case RunKind::split:
            case RunKind::oracle: {
                const MethodResult r = run_method(cfg.run, cfg, model, record_times(cfg.steps));
                emit_series("probabilities.csv", r.probabilities);
                summary["converged"] = true;
                summary.update(r.info);
                break;
            }
            case RunKind::compare: {
                const std::vector<double> times = record_times(cfg.steps);
                std::vector<MethodResult> results;
                for (RunKind k : cfg.compare_methods) results.push_back(run_method(k, cfg, model, times));
                json methods = json::object();
                const ProbabilitySeries& ref = results.front().probabilities;
                for (const auto& r : results) {
                    emit_series("probabilities_" + r.name + ".csv", r.probabilities);
                    const ProbabilitySeries& p = r.probabilities;
                    double max_rel = 0.0, max_abs = 0.0;
                    if (std::abs(ref.dissociation.back()) > 1e-12)
                        max_rel = relative_deviation(p.dissociation.back(), ref.dissociation.back());
                    const Eigen::Index last = p.populations.cols() - 1;
                    for (int j = 0; j < p.n_states(); ++j)
                        if (ref.populations(j, last) > 1e-12)
                            max_rel = std::max(max_rel, relative_deviation(p.populations(j, last), ref.populations(j, last)));
                    for (Eigen::Index c = 0; c <= last; ++c) {
                        max_abs = std::max(max_abs, (p.populations.col(c) - ref.populations.col(c)).cwiseAbs().maxCoeff());
                        max_abs = std::max(max_abs, std::abs(p.dissociation[static_cast<size_t>(c)] -
                                                             ref.dissociation[static_cast<size_t>(c)]));
                    }
                    json m = r.info;
                    m["max_relative_deviation_final"] = max_rel;
                    m["max_absolute_deviation"] = max_abs;
                    methods[r.name] = m;
                }
                json diff;
                diff["reference"] = results.front().name;
                diff["methods"] = methods;
                emit("compare.json", diff.dump(2) + "\n");
                summary["converged"] = true;
                summary["compare"] = diff;
                break;
            }
            case RunKind::scan_e0:
            case RunKind::scan_v0: {
                const std::vector<ScanPoint> points = run_scan(cfg, model);
                std::ostringstream csv;
                csv << (cfg.run == RunKind::scan_e0 ? "E0" : "V0")
                    << ",solver,converged,iterations,residual,epsilon,P_diss\n";
                json pts = json::array();
                for (const auto& pt : points) {
                    csv << format_number(pt.value) << "," << pt.solver << "," << (pt.converged ? 1 : 0) << ","
                        << pt.iterations << "," << format_number(pt.residual) << ","
                        << (pt.converged ? format_number(pt.epsilon) : "nan") << ","
                        << (pt.converged ? format_number(pt.final_dissociation) : "nan") << "\n";
                    json j;
                    j["value"] = pt.value;
                    j["solver"] = pt.solver;
                    j["converged"] = pt.converged;
                    j["iterations"] = pt.iterations;
                    j["wall_seconds"] = pt.wall_seconds;
                    if (!pt.message.empty()) j["message"] = pt.message;
                    pts.push_back(j);
                }
                emit("scan.csv", csv.str());
                summary["converged"] = true;
                summary["points"] = pts;
                break;
            }
            case RunKind::multistep: {
                const MultistepRun run = multistep_propagate(
                    cfg, model, [&](int s, const IterationRecord& r) { rows.push_back({s, r}); });
                const ProbabilitySeries p = probabilities(model, run.series);
                emit_series("probabilities.csv", p);
                std::ostringstream seg;
                seg << "segment,start,V0,iterations,residual,deviation,join_mismatch,dropped_components,dropped_weight\n";
                for (const auto& s : run.segments) {
                    seg << s.index << "," << format_number(s.start) << "," << format_number(s.amplitude) << ","
                        << s.iterations << "," << format_number(s.residual) << "," << format_number(s.deviation)
                        << "," << format_number(s.join_mismatch) << "," << s.dropped_components << ","
                        << format_number(s.dropped_weight) << "\n";
                }
                emit("segments.csv", seg.str());
                summary["converged"] = true;
                summary["segments"] = run.segments.size();
                summary["final"] = final_record(p);
                summary["epsilon"] = run.segments.front().deviation;
                break;
            }
        }
    } catch (const ConvergenceError& e) {
        report.converged = false;
        summary.update(convergence_json(e));
        if (rows.empty())
            for (size_t i = 0; i < e.history().size(); ++i)
                rows.push_back({0, IterationRecord{static_cast<int>(i) + 1, e.history()[i], {}}});
    }
    if (cfg.run == RunKind::catm || cfg.run == RunKind::multistep)
        emit("convergence.csv", format_convergence(rows, cfg.run == RunKind::multistep));
    summary["wall_seconds"] = seconds_since(start);
    summary["files"] = report.files;
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    report.files.push_back("summary.json");
    return report;
}

}  // namespace catm
