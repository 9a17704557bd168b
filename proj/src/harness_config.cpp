#include <cmath>
#include <exception>
#include <set>

#include "roughctl/errors.hpp"
#include "roughctl/harness.hpp"

namespace roughctl {

using nlohmann::json;

namespace {

// Reads fields of one JSON object, rejecting keys nobody asked for.
class Reader {
public:
    Reader(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
        if (!obj_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    ~Reader() noexcept(false) {
        if (std::uncaught_exceptions() > 0) return;
        for (const auto& [key, value] : obj_.items()) {
            if (!seen_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
        }
    }

    template <class T>
    void get(const char* key, T& target) {
        seen_.insert(key);
        auto it = obj_.find(key);
        if (it == obj_.end()) return;
        try {
            read(*it, target);
        } catch (const std::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

private:
    static void read(const json& v, double& out) {
        if (!v.is_number()) throw ConfigError("number expected");
        out = v.get<double>();
    }
    static void read(const json& v, std::size_t& out) {
        if (!v.is_number_integer()) throw ConfigError("integer expected");
        if (v.is_number_unsigned()) {
            out = v.get<std::size_t>();
            return;
        }
        const auto s = v.get<long long>();
        if (s < 0) throw ConfigError("count must not be negative");
        out = static_cast<std::size_t>(s);
    }
    static void read(const json& v, int& out) {
        if (!v.is_number_integer()) throw ConfigError("integer expected");
        out = v.get<int>();
    }
    static void read(const json& v, bool& out) { out = v.get<bool>(); }
    static void read(const json& v, std::string& out) { out = v.get<std::string>(); }
    static void read(const json& v, std::vector<double>& out) {
        out.clear();
        for (const auto& e : v) {
            if (!e.is_number()) throw ConfigError("number expected");
            out.push_back(e.get<double>());
        }
        if (!v.is_array()) throw ConfigError("array expected");
    }
    static void read(const json& v, std::vector<std::string>& out) { out = v.get<std::vector<std::string>>(); }

    const json& obj_;
    std::string where_;
    std::set<std::string> seen_;
};

void need(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
    ExperimentConfig c;
    try {
        Reader r(doc, "config");
        r.get("fixture", c.fixture);
        r.get("M", c.M);
        r.get("N", c.N);
        r.get("C", c.C);
        r.get("Q", c.Q);
        r.get("R", c.R);
        r.get("G", c.G);
        r.get("T", c.T);
        if (const json* p = r.child("custom")) {
            Reader s(*p, "custom");
            s.get("drift", c.custom.drift);
            s.get("control_gain", c.custom.control_gain);
            s.get("diffusion", c.custom.diffusion);
            s.get("running", c.custom.running);
            s.get("control_cost", c.custom.control_cost);
            s.get("terminal", c.custom.terminal);
            s.get("policy", c.custom.policy);
        }
        r.get("x0", c.x0);
        r.get("grid", c.grid);
        r.get("substeps", c.substeps);
        r.get("mesh_size", c.mesh_size);
        r.get("mesh_lower", c.mesh_lower);
        r.get("mesh_upper", c.mesh_upper);
        r.get("control_points", c.control_points);
        r.get("control_lower", c.control_lower);
        r.get("control_upper", c.control_upper);
        r.get("n_paths", c.n_paths);
        if (const json* s = r.child("seed")) {
            // 64-bit seeds also accepted as decimal strings.
            if (s->is_number_unsigned()) {
                c.seed = s->get<std::uint64_t>();
            } else if (s->is_string()) {
                const std::string text = s->get<std::string>();
                std::size_t used = 0;
                try {
                    c.seed = std::stoull(text, &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                need(used == text.size() && !text.empty() && text[0] != '-', "config.seed: not an unsigned integer");
            } else {
                throw ConfigError("config.seed: not an unsigned integer");
            }
        }
        r.get("workers", c.workers);
        r.get("riccati_refine", c.riccati_refine);
        if (const json* p = r.child("penalty")) {
            Reader s(*p, "penalty");
            s.get("type", c.penalty.type);
            s.get("running_cost", c.penalty.running_cost);
            s.get("lambda_nodes", c.penalty.lambda_nodes);
            s.get("running", c.penalty.running);
            s.get("constant", c.penalty.constant);
        }
        if (const json* p = r.child("checks")) {
            Reader s(*p, "checks");
            s.get("enabled", c.checks.enabled);
            s.get("bound_tolerance", c.checks.bound_tolerance);
            s.get("gap_tolerance", c.checks.gap_tolerance);
            s.get("identity_paths", c.checks.identity_paths);
            s.get("identity_controls", c.checks.identity_controls);
            s.get("identity_tolerance", c.checks.identity_tolerance);
            s.get("zero_mean_paths", c.checks.zero_mean_paths);
            s.get("formula_paths", c.checks.formula_paths);
            s.get("formula_tolerance", c.checks.formula_tolerance);
        }
        if (const json* p = r.child("hjb")) {
            Reader s(*p, "hjb");
            s.get("level_min", c.hjb.level_min);
            s.get("level_max", c.hjb.level_max);
            s.get("mesh_lower", c.hjb.mesh_lower);
            s.get("mesh_upper", c.hjb.mesh_upper);
            s.get("mesh_size", c.hjb.mesh_size);
            s.get("interior_lower", c.hjb.interior_lower);
            s.get("interior_upper", c.hjb.interior_upper);
            s.get("control_bound", c.hjb.control_bound);
            s.get("control_points", c.hjb.control_points);
            s.get("tolerance", c.hjb.tolerance);
            s.get("paths", c.hjb.paths);
        }
        if (const json* p = r.child("pmp")) {
            Reader s(*p, "pmp");
            s.get("grid", c.pmp.grid);
            s.get("t_spike", c.pmp.t_spike);
            s.get("alt_u", c.pmp.alt_u);
            s.get("eps_min_log2", c.pmp.eps_min_log2);
            s.get("eps_max_log2", c.pmp.eps_max_log2);
            s.get("residual_tolerance", c.pmp.residual_tolerance);
            s.get("ladder_factor", c.pmp.ladder_factor);
        }
        if (const json* p = r.child("wong_zakai")) {
            Reader s(*p, "wong_zakai");
            s.get("level_min", c.wong_zakai.level_min);
            s.get("level_max", c.wong_zakai.level_max);
            s.get("fine_level", c.wong_zakai.fine_level);
            s.get("y0", c.wong_zakai.y0);
            s.get("paths", c.wong_zakai.paths);
            s.get("order_min", c.wong_zakai.order_min);
            s.get("order_max", c.wong_zakai.order_max);
        }
        r.get("out", c.out);
        r.get("emit_timings", c.emit_timings);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    validate(c);
    return c;
}

ExperimentConfig parse_config_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(doc);
}

void validate(const ExperimentConfig& c) {
    static const std::set<std::string> fixtures{"lqc-additive", "lqc-multiplicative", "custom"};
    static const std::set<std::string> penalties{"rogers", "davis-burstein", "zero", "custom"};
    need(fixtures.count(c.fixture) == 1, "unrecognized fixture '" + c.fixture + "'");
    need(penalties.count(c.penalty.type) == 1, "unrecognized penalty '" + c.penalty.type + "'");
    need(c.grid > 0 && c.substeps > 0 && c.mesh_size > 1 && c.control_points > 0 && c.workers > 0 &&
             c.riccati_refine > 0 && c.penalty.lambda_nodes > 1,
         "counts must be positive (mesh and lambda nodes at least 2)");
    if (c.n_paths == 0) throw std::invalid_argument("n_paths must be positive");
    need(c.T > 0.0 && std::isfinite(c.T), "horizon T must be positive");
    need(c.mesh_lower < c.mesh_upper, "mesh_lower must be below mesh_upper");
    need(c.control_lower <= c.control_upper, "control_lower must not exceed control_upper");
    need(c.mesh_lower <= c.x0 && c.x0 <= c.mesh_upper, "x0 must lie inside the mesh");
    need(!c.out.empty(), "output directory must be named");
    need(c.checks.identity_paths > 0 && c.checks.identity_controls >= 2 && c.checks.zero_mean_paths >= 2 &&
             c.checks.formula_paths > 0,
         "check sizes must be positive (at least two controls and zero-mean paths)");
    need(c.hjb.level_min >= 1 && c.hjb.level_min < c.hjb.level_max && c.hjb.level_max <= 16,
         "hjb levels must satisfy 1 <= level_min < level_max <= 16");
    need(c.hjb.mesh_size > 2 && c.hjb.mesh_lower < c.hjb.interior_lower &&
             c.hjb.interior_lower < c.hjb.interior_upper && c.hjb.interior_upper < c.hjb.mesh_upper,
         "hjb interior must lie strictly inside the mesh");
    need(c.hjb.paths > 0, "hjb needs at least one driver");
    need(c.hjb.control_bound > 0.0 && c.hjb.control_points >= 2, "hjb controls need a positive bound and two points");
    need(c.pmp.grid > 0 && c.pmp.eps_min_log2 < c.pmp.eps_max_log2 && c.pmp.eps_max_log2 < 0,
         "pmp ladder must satisfy eps_min_log2 < eps_max_log2 < 0");
    need(c.pmp.t_spike >= 0.0 && c.pmp.t_spike + std::ldexp(1.0, c.pmp.eps_max_log2) * c.T <= c.T,
         "pmp spike must fit in the horizon");
    need(c.wong_zakai.level_min >= 1 && c.wong_zakai.level_min + 2 <= c.wong_zakai.level_max &&
             c.wong_zakai.level_max <= c.wong_zakai.fine_level && c.wong_zakai.fine_level <= 20 &&
             c.wong_zakai.paths > 0,
         "wong_zakai levels must satisfy level_min + 2 <= level_max <= fine_level <= 20");
    for (const std::string& name : c.checks.enabled) {
        static const std::set<std::string> known{"lower", "upper", "gap", "identity", "zero_mean", "formulas"};
        need(known.count(name) == 1, "unknown check '" + name + "'");
    }
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["fixture"] = c.fixture;
    j["M"] = c.M;
    j["N"] = c.N;
    j["C"] = c.C;
    j["Q"] = c.Q;
    j["R"] = c.R;
    j["G"] = c.G;
    j["T"] = c.T;
    j["custom"] = {{"drift", c.custom.drift},         {"control_gain", c.custom.control_gain},
                   {"diffusion", c.custom.diffusion}, {"running", c.custom.running},
                   {"control_cost", c.custom.control_cost}, {"terminal", c.custom.terminal},
                   {"policy", c.custom.policy}};
    j["x0"] = c.x0;
    j["grid"] = c.grid;
    j["substeps"] = c.substeps;
    j["mesh_size"] = c.mesh_size;
    j["mesh_lower"] = c.mesh_lower;
    j["mesh_upper"] = c.mesh_upper;
    j["control_points"] = c.control_points;
    j["control_lower"] = c.control_lower;
    j["control_upper"] = c.control_upper;
    j["n_paths"] = c.n_paths;
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    j["riccati_refine"] = c.riccati_refine;
    j["penalty"] = {{"type", c.penalty.type},
                    {"running_cost", c.penalty.running_cost},
                    {"lambda_nodes", c.penalty.lambda_nodes},
                    {"running", c.penalty.running},
                    {"constant", c.penalty.constant}};
    j["checks"] = {{"enabled", c.checks.enabled},
                   {"bound_tolerance", c.checks.bound_tolerance},
                   {"gap_tolerance", c.checks.gap_tolerance},
                   {"identity_paths", c.checks.identity_paths},
                   {"identity_controls", c.checks.identity_controls},
                   {"identity_tolerance", c.checks.identity_tolerance},
                   {"zero_mean_paths", c.checks.zero_mean_paths},
                   {"formula_paths", c.checks.formula_paths},
                   {"formula_tolerance", c.checks.formula_tolerance}};
    j["hjb"] = {{"level_min", c.hjb.level_min},
                {"level_max", c.hjb.level_max},
                {"mesh_lower", c.hjb.mesh_lower},
                {"mesh_upper", c.hjb.mesh_upper},
                {"mesh_size", c.hjb.mesh_size},
                {"interior_lower", c.hjb.interior_lower},
                {"interior_upper", c.hjb.interior_upper},
                {"control_bound", c.hjb.control_bound},
                {"control_points", c.hjb.control_points},
                {"tolerance", c.hjb.tolerance},
                {"paths", c.hjb.paths}};
    j["pmp"] = {{"grid", c.pmp.grid},
                {"t_spike", c.pmp.t_spike},
                {"alt_u", c.pmp.alt_u},
                {"eps_min_log2", c.pmp.eps_min_log2},
                {"eps_max_log2", c.pmp.eps_max_log2},
                {"residual_tolerance", c.pmp.residual_tolerance},
                {"ladder_factor", c.pmp.ladder_factor}};
    j["wong_zakai"] = {{"level_min", c.wong_zakai.level_min},   {"level_max", c.wong_zakai.level_max},
                       {"fine_level", c.wong_zakai.fine_level}, {"y0", c.wong_zakai.y0},
                       {"paths", c.wong_zakai.paths},           {"order_min", c.wong_zakai.order_min},
                       {"order_max", c.wong_zakai.order_max}};
    j["out"] = c.out;
    j["emit_timings"] = c.emit_timings;
    return j;
}

}  // namespace roughctl
