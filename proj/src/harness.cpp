#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>

#include "roughctl/columnar_io.hpp"
#include "roughctl/duality.hpp"
#include "roughctl/errors.hpp"
#include "roughctl/fixtures.hpp"
#include "roughctl/harness.hpp"
#include "roughctl/lqc.hpp"

namespace roughctl {

using nlohmann::json;

const char* tool_version() { return "1.0.0"; }

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using Feedback = std::function<Vec(double, const Vec&)>;

// Stream tags separating the random inputs of the different sub-experiments.
enum StreamTag : std::uint64_t { kBounds = 0, kIdentity = 1, kZeroMean = 2, kFormulas = 3, kHjb = 4, kPmp = 5, kWongZakai = 6 };

std::uint64_t stream_seed(const ExperimentConfig& c, StreamTag tag) {
    return tag == kBounds ? c.seed : derive_seed(c.seed, 0x5eed000000000000ull + tag);
}

double poly(const std::vector<double>& c, double x) {
    double v = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
    return v;
}

std::vector<double> derivative(const std::vector<double>& c) {
    std::vector<double> d;
    for (std::size_t i = 1; i < c.size(); ++i) d.push_back(static_cast<double>(i) * c[i]);
    return d;
}

Vec scalar(double x) { return Vec::Constant(1, x); }

ControlSet control_box(double lo, double hi, std::size_t points) {
    return ControlSet::box(scalar(lo), scalar(hi), points);
}

void write_text(const std::string& filename, const std::string& text) {
    std::ofstream out(filename, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + filename);
    out << text;
}

// Collects results, checks and files of one run; owns the output directory.
class Run {
public:
    Run(const char* command, const ExperimentConfig& c) : cfg_(c) {
        fs::create_directories(c.out);
        rec_["tool"] = "roughctl";
        rec_["version"] = tool_version();
        rec_["command"] = command;
        rec_["config"] = to_json(c);
        rec_["results"] = json::object();
        rec_["failures"] = json::object();
    }

    json& results() { return rec_["results"]; }
    json& failures() { return rec_["failures"]; }

    bool check(const std::string& name, bool pass, double value, double limit) {
        checks_.push_back({{"name", name}, {"pass", pass}, {"value", value}, {"limit", limit}});
        passed_ = passed_ && pass;
        return pass;
    }

    std::string file(const std::string& name) {
        files_.push_back(name);
        return (fs::path(cfg_.out) / name).string();
    }

    template <class F>
    auto timed(const std::string& name, F&& body) {
        const auto t0 = Clock::now();
        if constexpr (std::is_void_v<decltype(body())>) {
            body();
            note_time(name, t0);
        } else {
            auto out = body();
            note_time(name, t0);
            return out;
        }
    }

    double seconds(const std::string& name) const {
        auto it = timings_.find(name);
        return it == timings_.end() ? 0.0 : it->get<double>();
    }

    RunRecord finish() {
        RunRecord out;
        out.exit_code = passed_ ? 0 : 1;
        rec_["checks"] = checks_;
        files_.push_back("record.json");
        rec_["files"] = files_;
        if (cfg_.emit_timings) rec_["timings"] = timings_;
        rec_["exit_code"] = out.exit_code;
        write_text((fs::path(cfg_.out) / "record.json").string(), rec_.dump(2) + "\n");
        out.record = std::move(rec_);
        return out;
    }

private:
    void note_time(const std::string& name, Clock::time_point t0) {
        timings_[name] = cfg_.emit_timings ? std::chrono::duration<double>(Clock::now() - t0).count() : 0.0;
    }

    const ExperimentConfig& cfg_;
    json rec_;
    json checks_ = json::array();
    json files_ = json::array();
    json timings_ = json::object();
    bool passed_ = true;
};

SamplerSettings sampler_for(const ExperimentConfig& c, std::uint64_t seed) {
    SamplerSettings s;
    s.master_seed = seed;
    s.horizon = c.T;
    s.steps = c.grid;
    s.substeps = c.substeps;
    s.dim = 1;
    s.workers = c.workers;
    return s;
}

AdditiveLqcSpec additive_spec(const ExperimentConfig& c) {
    AdditiveLqcSpec a;
    a.M = Mat::Constant(1, 1, c.M);
    a.N = Mat::Constant(1, 1, c.N);
    a.Q = Mat::Constant(1, 1, c.Q);
    a.R = Mat::Constant(1, 1, c.R);
    a.G = Mat::Constant(1, 1, c.G);
    a.T = c.T;
    return a;
}

MultiplicativeLqcSpec multiplicative_spec(const ExperimentConfig& c) {
    return MultiplicativeLqcSpec{c.M, c.N, c.C, c.Q, c.R, c.G, c.T};
}

bool is_lqc(const ExperimentConfig& c) { return c.fixture == "lqc-additive" || c.fixture == "lqc-multiplicative"; }

// Everything an LQC run derives from the configuration.
struct LqcSetup {
    explicit LqcSetup(const ExperimentConfig& c, std::size_t grid_steps)
        : additive(c.fixture == "lqc-additive"),
          a(additive_spec(c)),
          m(multiplicative_spec(c)),
          sol(additive ? riccati_solve_additive(a, grid_steps * c.riccati_refine)
                       : riccati_solve_multiplicative(m, grid_steps * c.riccati_refine)),
          U(control_box(c.control_lower, c.control_upper, c.control_points)),
          problem(additive ? lqc_additive_problem(a, U) : lqc_multiplicative_problem(m, U)),
          mesh(StateMesh::uniform(c.mesh_lower, c.mesh_upper, c.mesh_size)),
          policy(additive ? lqc_additive_policy(a, sol, U) : lqc_multiplicative_policy(m, sol, U)),
          value_penalty(additive ? lqc_additive_value_penalty(a, sol) : lqc_multiplicative_value_penalty(m, sol)),
          x0(scalar(c.x0)),
          V(additive ? lqc_additive_value(sol, 0.0, x0) : lqc_multiplicative_value(sol, 0.0, c.x0)) {}

    bool additive;
    AdditiveLqcSpec a;
    MultiplicativeLqcSpec m;
    RiccatiSolution sol;
    ControlSet U;
    ControlProblem problem;
    StateMesh mesh;
    Feedback policy;
    RogersPenalty value_penalty;
    Vec x0;
    double V;
};

ControlProblem polynomial_problem(const PolynomialProblem& p, const ControlSet& U) {
    const auto s = std::make_shared<const PolynomialProblem>(p);
    const auto db = std::make_shared<const std::vector<double>>(derivative(p.drift));
    const auto ds = std::make_shared<const std::vector<double>>(derivative(p.diffusion));
    const auto dds = std::make_shared<const std::vector<double>>(derivative(*ds));
    const auto df = std::make_shared<const std::vector<double>>(derivative(p.running));
    const auto dg = std::make_shared<const std::vector<double>>(derivative(p.terminal));
    ControlProblem out;
    out.vf.drift = [s](const Vec& x, const Vec& u) { return scalar(poly(s->drift, x(0)) + s->control_gain * u(0)); };
    out.vf.diffusion = [s](const Vec& x) -> Mat { return Mat::Constant(1, 1, poly(s->diffusion, x(0))); };
    out.vf.diffusion_jacobian = [ds](const Vec& x) { return std::vector<Mat>{Mat::Constant(1, 1, poly(*ds, x(0)))}; };
    out.vf.diffusion_curvature = [dds](const Vec& x, const Vec& v) {
        return std::vector<Mat>{Mat::Constant(1, 1, poly(*dds, x(0)) * v(0))};
    };
    out.vf.drift_jacobian = [db](const Vec& x, const Vec&) -> Mat { return Mat::Constant(1, 1, poly(*db, x(0))); };
    out.vf.drift_control_jacobian = [s](const Vec&, const Vec&) -> Mat { return Mat::Constant(1, 1, s->control_gain); };
    out.f = [s](double, const Vec& x, const Vec& u) { return poly(s->running, x(0)) + 0.5 * s->control_cost * u(0) * u(0); };
    out.df = [df](double, const Vec& x, const Vec&) { return scalar(poly(*df, x(0))); };
    out.g = [s](const Vec& x) { return poly(s->terminal, x(0)); };
    out.dg = [dg](const Vec& x) { return scalar(poly(*dg, x(0))); };
    out.controls = U;
    return out;
}

Feedback polynomial_policy(const std::vector<double>& coeffs, const ControlSet& U) {
    const double lo = U.lower(0), hi = U.upper(0);
    return [coeffs, lo, hi](double, const Vec& x) { return scalar(std::clamp(poly(coeffs, x(0)), lo, hi)); };
}

Penalty make_penalty(const ExperimentConfig& c, const RogersPenalty* value_penalty, const Feedback& policy) {
    const std::string& type = c.penalty.type;
    if (type == "zero") return ZeroPenalty{};
    if (type == "rogers") {
        if (!value_penalty) throw ConfigError("the rogers penalty (h = V) needs an LQC fixture");
        return *value_penalty;
    }
    if (type == "davis-burstein") {
        if (!policy) throw ConfigError("the davis-burstein penalty needs a feedback (custom.policy)");
        return DavisBursteinPenalty{policy, c.penalty.running_cost, c.penalty.lambda_nodes};
    }
    CustomPenalty custom;
    custom.name = "custom";
    const std::vector<double> running = c.penalty.running;
    const double constant = c.penalty.constant;
    custom.build = [running, constant](const GridRoughPath& eta, std::size_t, const Vec&) {
        PathPenalty p;
        if (!running.empty()) {
            const TimeGrid grid = eta.grid();
            p.running = [running, grid](std::size_t k, const Vec& x, const Vec&) { return poly(running, x(0)) * grid.dt(k); };
        }
        p.constant = constant;
        return p;
    };
    return custom;
}

json stats_json(const SampleStats& s) { return {{"mean", s.mean}, {"se", s.std_error}, {"count", s.count}}; }

double rms(const std::vector<double>& v) {
    CompensatedSum s;
    for (double x : v) s.add(x * x);
    return v.empty() ? 0.0 : std::sqrt(s.value() / static_cast<double>(v.size()));
}

double sample_sd(const std::vector<double>& v) {
    const SampleStats s = sample_stats(v);
    return s.std_error * std::sqrt(static_cast<double>(v.size()));
}

// Gaussian piecewise-constant control, reproducible from (seed, index).
ControlPath random_control(const TimeGrid& grid, std::uint64_t seed, std::uint64_t index) {
    std::mt19937_64 rng(derive_seed(seed, index));
    std::normal_distribution<double> normal;
    ControlPath mu{grid, {}};
    mu.values.reserve(grid.steps());
    for (std::size_t k = 0; k < grid.steps(); ++k) mu.values.push_back(scalar(normal(rng)));
    return mu;
}

void duality_bounds(Run& run, const ExperimentConfig& c, const std::string& fixture, const ControlProblem& problem,
                    const Feedback& policy, const Penalty& penalty, const StateMesh& mesh, const Vec& x0,
                    const double* oracle, DualityReport& rep) {
    const SamplerSettings sampler = sampler_for(c, stream_seed(c, kBounds));
    const auto t0 = Clock::now();
    rep.lower = run.timed("mc_lower_bound", [&] { return mc_lower_bound(problem, policy, sampler, c.n_paths, x0); });
    rep.upper = run.timed("mc_upper_bound",
                          [&] { return mc_upper_bound(problem, penalty, sampler, c.n_paths, mesh, x0); });
    rep.fixture = fixture;
    rep.penalty = describe(penalty);
    rep.gap = rep.upper.stats.mean - rep.lower.stats.mean;
    rep.master_seed = c.seed;
    rep.grid_steps = c.grid;
    rep.substeps = c.substeps;
    rep.mesh_size = mesh.size();
    rep.control_points = problem.controls.points.size();
    rep.n_paths = c.n_paths;
    rep.has_oracle = oracle != nullptr;
    rep.oracle = oracle ? *oracle : 0.0;
    rep.runtime_seconds = c.emit_timings ? std::chrono::duration<double>(Clock::now() - t0).count() : 0.0;
    write_text(run.file("duality.csv"), DualityReport::csv_header() + "\n" + rep.csv_row() + "\n");

    run.results()["lower"] = stats_json(rep.lower.stats);
    run.results()["upper"] = stats_json(rep.upper.stats);
    run.results()["gap"] = rep.gap;
    run.results()["penalty"] = rep.penalty;
    run.failures()["lower_paths"] = rep.lower.failures;
    run.failures()["upper_paths"] = rep.upper.failures;
    run.failures()["upper_boundary_paths"] = rep.upper.boundary_paths;
}

// Per path: z2 - z1 across random controls against gamma^R, then E[gamma^R] = 0.
void additive_identity_check(Run& run, const ExperimentConfig& c, const LqcSetup& s) {
    const SamplerSettings sampler = sampler_for(c, stream_seed(c, kIdentity));
    const std::size_t np = c.checks.identity_paths, nc = c.checks.identity_controls;
    struct Row {
        double z1, z2_increment, z2_integral;
    };
    std::vector<std::vector<Row>> rows(np, std::vector<Row>(nc));
    std::vector<double> gamma(np);
    parallel_for(np, c.workers, [&](std::size_t i) {
        const GridRoughPath eta = sampler.sample(i);
        const std::vector<Vec> lam1 = lambda1_additive(s.a, s.sol, eta);
        gamma[i] = gammaR_additive(s.a, s.sol, eta, 0, s.x0);
        for (std::size_t j = 0; j < nc; ++j) {
            const ControlPath mu = random_control(eta.grid(), sampler.master_seed, i * nc + j);
            const RdeSolution traj = solve_controlled_rde(s.x0, 0, s.problem.vf, mu, eta);
            const RogersValue rv = rogers_penalty_value(s.value_penalty, traj, mu, eta, s.problem);
            CompensatedSum z1;
            for (std::size_t k = 0; k < eta.steps(); ++k) z1.add(-lam1[k].dot(mu.values[k]) * eta.grid().dt(k));
            rows[i][j] = {z1.value(), rv.increment, rv.integral};
        }
    });

    const double scale = rms(gamma);
    double worst_sd = 0.0, worst_rel = 0.0;
    std::ostringstream csv;
    csv << "path,control,z1,z2_increment,z2_integral,difference,gammaR\n";
    for (std::size_t i = 0; i < np; ++i) {
        std::vector<double> diff;
        for (std::size_t j = 0; j < nc; ++j) {
            const Row& r = rows[i][j];
            diff.push_back(r.z2_increment - r.z1);
            csv << i << ',' << j << ',' << format_double(r.z1) << ',' << format_double(r.z2_increment) << ','
                << format_double(r.z2_integral) << ',' << format_double(diff.back()) << ',' << format_double(gamma[i])
                << '\n';
        }
        const SampleStats st = sample_stats(diff);
        worst_sd = std::max(worst_sd, sample_sd(diff));
        worst_rel = std::max(worst_rel, std::abs(st.mean - gamma[i]) / std::max(std::abs(gamma[i]), scale));
    }
    write_text(run.file("identity.csv"), csv.str());

    const std::size_t nz = c.checks.zero_mean_paths;
    std::vector<double> g(nz);
    parallel_for(nz, c.workers, [&](std::size_t i) { g[i] = gammaR_additive(s.a, s.sol, sampler.sample(i), 0, s.x0); });
    const SampleStats gs = sample_stats(g);

    run.results()["identity"] = {{"scale", scale},
                                 {"max_sd_over_controls", worst_sd},
                                 {"max_relative_gap_to_gammaR", worst_rel},
                                 {"gammaR", stats_json(gs)}};
    const double tol = c.checks.identity_tolerance;
    run.check("identity_control_independent", worst_sd <= tol * scale, worst_sd, tol * scale);
    run.check("identity_equals_gammaR", worst_rel <= tol, worst_rel, tol);
    run.check("gammaR_zero_mean", std::abs(gs.mean) <= 3.0 * gs.std_error, std::abs(gs.mean), 3.0 * gs.std_error);
}

void zero_mean_check(Run& run, const ExperimentConfig& c, const LqcSetup& s) {
    const SamplerSettings sampler = sampler_for(c, stream_seed(c, kZeroMean));
    const std::size_t n = c.checks.zero_mean_paths;
    std::ostringstream csv;
    csv << "quantity,k,x,mean,se,ratio\n";
    json out = json::array();
    auto emit = [&](const std::string& name, std::size_t k, double x, const ZeroMeanReport& rep) {
        const SampleStats& st = rep.components.front();
        csv << name << ',' << k << ',' << format_double(x) << ',' << format_double(st.mean) << ','
            << format_double(st.std_error) << ',' << format_double(rep.max_ratio) << '\n';
        out.push_back({{"quantity", name}, {"k", k}, {"x", x}, {"stats", stats_json(st)}, {"ratio", rep.max_ratio}});
        run.check("zero_mean_" + name + (name == "rogers" ? "" : "_k" + std::to_string(k)), rep.max_ratio <= 3.0,
                  rep.max_ratio, 3.0);
    };
    const ZeroMeanReport rogers = run.timed("rogers_zero_mean", [&] {
        return rogers_zero_mean_check(s.value_penalty, s.problem, s.policy, sampler, n, s.x0);
    });
    emit("rogers", 0, c.x0, rogers);
    const std::vector<ProbePoint> probes{
        {0, s.x0}, {c.grid / 4, scalar(0.5 * c.x0)}, {c.grid / 2, scalar(-0.5 * c.x0)}};
    for (const ProbePoint& p : probes) {
        const ZeroMeanReport db = run.timed("db_zero_mean", [&] {
            return db_zero_mean_check(s.problem, s.policy, sampler, n, p, c.penalty.running_cost);
        });
        emit("lambda_star", p.k, p.x(0), db);
    }
    write_text(run.file("zero_mean.csv"), csv.str());
    run.results()["zero_mean"] = out;
}

void multiplicative_formula_check(Run& run, const ExperimentConfig& c, const LqcSetup& s) {
    const SamplerSettings sampler = sampler_for(c, stream_seed(c, kFormulas));
    const std::size_t np = c.checks.formula_paths;
    struct Row {
        double z1_formula, z1_db, z2_formula, z2_integral, z2_increment;
    };
    std::vector<Row> rows(np);
    parallel_for(np, c.workers, [&](std::size_t i) {
        const GridRoughPath eta = sampler.sample(i);
        const ControlPath mu = random_control(eta.grid(), sampler.master_seed, i);
        const RdeSolution traj = solve_controlled_rde(s.x0, 0, s.problem.vf, mu, eta);
        const double z1db = db_penalty_value(
            [&](std::size_t k, const Vec& x) {
                return db_lambda_star(s.problem, s.policy, eta, k, x, c.penalty.running_cost);
            },
            traj, mu);
        const RogersValue rv = rogers_penalty_value(s.value_penalty, traj, mu, eta, s.problem);
        rows[i] = {z1_multiplicative(s.m, s.sol, eta, 0, c.x0, mu), z1db, z2_multiplicative(s.m, s.sol, eta, 0, c.x0, mu),
                   rv.integral, rv.increment};
    });
    std::vector<double> z1ref, z2ref;
    for (const Row& r : rows) {
        z1ref.push_back(r.z1_db);
        z2ref.push_back(r.z2_integral);
    }
    const double s1 = rms(z1ref), s2 = rms(z2ref);
    double e1 = 0.0, e2 = 0.0;
    std::ostringstream csv;
    csv << "path,z1_formula,z1_db,z2_formula,z2_rogers_integral,z2_rogers_increment\n";
    for (std::size_t i = 0; i < np; ++i) {
        const Row& r = rows[i];
        e1 = std::max(e1, std::abs(r.z1_formula - r.z1_db) / std::max(std::abs(r.z1_db), s1));
        e2 = std::max(e2, std::abs(r.z2_formula - r.z2_integral) / std::max(std::abs(r.z2_integral), s2));
        csv << i << ',' << format_double(r.z1_formula) << ',' << format_double(r.z1_db) << ','
            << format_double(r.z2_formula) << ',' << format_double(r.z2_integral) << ','
            << format_double(r.z2_increment) << '\n';
    }
    write_text(run.file("formulas.csv"), csv.str());
    const double tol = c.checks.formula_tolerance;
    run.results()["formulas"] = {{"z1_scale", s1}, {"z2_scale", s2}, {"z1_max_relative", e1}, {"z2_max_relative", e2}};
    run.check("z1_formula_vs_db", e1 <= tol, e1, tol);
    run.check("z2_formula_vs_rogers", e2 <= tol, e2, tol);
}

bool enabled(const ExperimentConfig& c, const std::string& name, bool additive) {
    if (!c.checks.enabled.empty()) return std::find(c.checks.enabled.begin(), c.checks.enabled.end(), name) != c.checks.enabled.end();
    if (name == "identity" || name == "zero_mean") return additive;
    if (name == "formulas") return !additive;
    return true;
}

// Ladder of |X^eps - X - Y^eps| / eps; a remainder at rounding level counts as converged.
void spike_ladder(Run& run, std::ostringstream& csv, const std::string& fixture, const std::vector<SpikeRow>& rows,
                  double state_scale, double factor, bool allow_floor, bool payoff) {
    for (const SpikeRow& r : rows) {
        csv << fixture << ',' << format_double(r.eps) << ',' << format_double(r.state_diff) << ','
            << format_double(r.remainder) << ',' << format_double(r.payoff_error) << '\n';
    }
    const SpikeRow& first = rows.front();
    const SpikeRow& last = rows.back();
    const double floor = 1e-10 * (1.0 + state_scale);
    double worst = 0.0;
    for (const SpikeRow& r : rows) worst = std::max(worst, r.remainder);
    const double ratio = last.remainder > 0.0 ? (first.remainder / first.eps) / (last.remainder / last.eps) : INFINITY;
    const bool at_floor = allow_floor && worst <= floor;
    run.results()["spike_" + fixture] = {{"ratio", std::isfinite(ratio) ? json(ratio) : json(nullptr)},
                                         {"max_remainder", worst},
                                         {"noise_floor", floor},
                                         {"at_noise_floor", at_floor}};
    run.check("spike_state_" + fixture, at_floor || ratio >= factor, at_floor ? worst : ratio,
              at_floor ? floor : factor);
    if (payoff) {
        const double pr = last.payoff_error > 0.0 ? (first.payoff_error / first.eps) / (last.payoff_error / last.eps)
                                                  : INFINITY;
        run.check("spike_payoff_" + fixture, pr >= factor, std::isfinite(pr) ? pr : 1e300, factor);
    }
}

}  // namespace

RunRecord run_lqc_verify(const ExperimentConfig& c) {
    validate(c);
    if (!is_lqc(c)) throw ConfigError("lqc-verify needs an LQC fixture");
    const bool additive = c.fixture == "lqc-additive";
    for (const std::string& name : c.checks.enabled) {
        if ((name == "identity" && !additive) || (name == "formulas" && additive)) {
            throw ConfigError("check '" + name + "' does not apply to " + c.fixture);
        }
    }
    Run run("lqc-verify", c);
    const LqcSetup s = run.timed("riccati", [&] { return LqcSetup(c, c.grid); });
    run.results()["oracle_value"] = s.V;
    run.results()["riccati_P0"] = s.sol.P.front()(0, 0);
    run.results()["riccati_steps"] = s.sol.grid.steps();

    const bool lower = enabled(c, "lower", additive), upper = enabled(c, "upper", additive),
               gap = enabled(c, "gap", additive);
    if (lower || upper || gap) {
        DualityReport rep;
        const Penalty penalty = make_penalty(c, &s.value_penalty, s.policy);
        duality_bounds(run, c, c.fixture, s.problem, s.policy, penalty, s.mesh, s.x0, &s.V, rep);
        const double bt = c.checks.bound_tolerance >= 0.0 ? c.checks.bound_tolerance : (additive ? 0.02 : 0.05);
        const double gt = c.checks.gap_tolerance >= 0.0 ? c.checks.gap_tolerance : (additive ? 0.03 : 0.05);
        const double absV = std::abs(s.V);
        const SampleStats& lo = rep.lower.stats;
        const SampleStats& up = rep.upper.stats;
        if (lower) {
            run.check("lower_vs_oracle", std::abs(lo.mean - s.V) <= 3.0 * lo.std_error + bt * absV,
                      std::abs(lo.mean - s.V), 3.0 * lo.std_error + bt * absV);
        }
        if (upper) {
            run.check("upper_vs_oracle", std::abs(up.mean - s.V) <= 3.0 * up.std_error + bt * absV,
                      std::abs(up.mean - s.V), 3.0 * up.std_error + bt * absV);
        }
        if (gap) {
            const double se = std::hypot(lo.std_error, up.std_error);
            run.check("gap", rep.gap <= gt * absV + 3.0 * se, rep.gap, gt * absV + 3.0 * se);
        }
    }
    if (enabled(c, "identity", additive)) run.timed("identity", [&] { additive_identity_check(run, c, s); });
    if (enabled(c, "zero_mean", additive)) zero_mean_check(run, c, s);
    if (enabled(c, "formulas", additive)) run.timed("formulas", [&] { multiplicative_formula_check(run, c, s); });
    return run.finish();
}

RunRecord run_bound(const ExperimentConfig& c) {
    validate(c);
    Run run("bound", c);
    DualityReport rep;
    if (is_lqc(c)) {
        const LqcSetup s = run.timed("riccati", [&] { return LqcSetup(c, c.grid); });
        const Penalty penalty = make_penalty(c, &s.value_penalty, s.policy);
        run.results()["oracle_value"] = s.V;
        duality_bounds(run, c, c.fixture, s.problem, s.policy, penalty, s.mesh, s.x0, &s.V, rep);
    } else {
        if (c.custom.policy.empty()) throw ConfigError("custom fixture needs custom.policy for the lower bound");
        const ControlSet U = control_box(c.control_lower, c.control_upper, c.control_points);
        const ControlProblem problem = polynomial_problem(c.custom, U);
        problem.validate();
        const Feedback policy = polynomial_policy(c.custom.policy, U);
        const Penalty penalty = make_penalty(c, nullptr, policy);
        const StateMesh mesh = StateMesh::uniform(c.mesh_lower, c.mesh_upper, c.mesh_size);
        duality_bounds(run, c, c.fixture, problem, policy, penalty, mesh, scalar(c.x0), nullptr, rep);
    }
    return run.finish();
}

RunRecord run_hjb(const ExperimentConfig& c) {
    validate(c);
    const HjbConfig& h = c.hjb;
    Run run("hjb", c);
    // Additive translation fixture: dX = u dt + d eta, |u| <= bound, g = -x^2/2.
    ControlProblem problem;
    problem.vf.drift = [](const Vec&, const Vec& u) { return Vec(u); };
    problem.vf.diffusion = [](const Vec&) -> Mat { return Mat::Identity(1, 1); };
    problem.vf.diffusion_jacobian = [](const Vec&) { return std::vector<Mat>{Mat::Zero(1, 1)}; };
    problem.vf.diffusion_curvature = [](const Vec&, const Vec&) { return std::vector<Mat>{Mat::Zero(1, 1)}; };
    problem.vf.drift_jacobian = [](const Vec&, const Vec&) -> Mat { return Mat::Zero(1, 1); };
    problem.vf.drift_control_jacobian = [](const Vec&, const Vec&) -> Mat { return Mat::Identity(1, 1); };
    problem.g = [](const Vec& x) { return -0.5 * x(0) * x(0); };
    problem.dg = [](const Vec& x) { return Vec(-x); };
    problem.controls = control_box(-h.control_bound, h.control_bound, h.control_points);
    problem.additive = AdditiveForm{[](double, const Vec& u) { return Vec(u); }, {}};

    const std::size_t nf = std::size_t{1} << h.level_max;
    const std::size_t nlev = h.level_max - h.level_min + 1;
    const StateMesh mesh = StateMesh::uniform(h.mesh_lower, h.mesh_upper, h.mesh_size);
    HjbOptions opts;
    opts.interior_lower = h.interior_lower;
    opts.interior_upper = h.interior_upper;
    const std::uint64_t seed = stream_seed(c, kHjb);

    struct PathOutcome {
        HjbReport report;
        double err = 0.0, scale = 0.0;
        ValueGrid finest{make_uniform_grid(1.0, 1), 0, {}, {}, {}};
    };
    std::vector<PathOutcome> outcomes(h.paths);
    run.timed("rough_hjb_solve", [&] {
        parallel_for(h.paths, c.workers, [&](std::size_t p) {
            const Mat values = sample_brownian_lift(derive_seed(seed, p), make_uniform_grid(c.T, nf), 1, 1).values();
            std::vector<GridRoughPath> approx;
            for (std::size_t level = h.level_min; level <= h.level_max; ++level) {
                const std::size_t n = std::size_t{1} << level, stride = nf / n;
                Mat coarse(1, static_cast<Eigen::Index>(n + 1));
                for (std::size_t q = 0; q <= n; ++q) {
                    coarse(0, static_cast<Eigen::Index>(q)) = values(0, static_cast<Eigen::Index>(q * stride));
                }
                approx.push_back(lift_piecewise_linear(make_uniform_grid(c.T, n), coarse));
            }
            PathOutcome& o = outcomes[p];
            std::vector<ValueGrid> grids = rough_hjb_solve(problem, approx, mesh, &o.report, opts);
            // Closed form along the finest approximation.
            const ValueGrid& finest = grids.back();
            for (std::size_t q = 0; q <= nf; ++q) {
                for (std::size_t j = 0; j < mesh.size(); ++j) {
                    const double x = mesh.coordinate(0, j);
                    if (x < h.interior_lower || x > h.interior_upper) continue;
                    const double cf = additive_closed_form_value(problem, approx.back(), q, scalar(x));
                    o.err = std::max(o.err, std::abs(finest.values[q][j] - cf));
                    o.scale = std::max(o.scale, std::abs(cf));
                }
            }
            if (p == 0) o.finest = std::move(grids.back());
        });
    });

    double rel = 0.0;
    for (const PathOutcome& o : outcomes) rel = std::max(rel, o.scale > 0.0 ? o.err / o.scale : o.err);
    std::vector<double> mean_diff(nlev, 0.0), mean_dist(nlev, 0.0);
    std::vector<std::size_t> substeps(nlev, 0);
    for (std::size_t i = 0; i < nlev; ++i) {
        CompensatedSum d, r;
        for (const PathOutcome& o : outcomes) {
            d.add(o.report.levels[i].sup_diff);
            r.add(o.report.levels[i].driver_distance);
            substeps[i] = std::max(substeps[i], o.report.levels[i].substeps);
        }
        mean_diff[i] = d.value() / static_cast<double>(h.paths);
        mean_dist[i] = r.value() / static_cast<double>(h.paths);
    }
    bool decreasing = nlev >= 3;
    for (std::size_t i = 2; i < nlev; ++i) {
        if (!(mean_diff[i] < mean_diff[i - 1])) decreasing = false;
    }

    std::ostringstream levels;
    levels << "level,steps,max_substeps,mean_sup_diff,mean_driver_distance\n";
    json lv = json::array();
    for (std::size_t i = 0; i < nlev; ++i) {
        const std::size_t steps = std::size_t{1} << (h.level_min + i);
        levels << h.level_min + i << ',' << steps << ',' << substeps[i] << ',' << format_double(mean_diff[i]) << ','
               << format_double(mean_dist[i]) << '\n';
        lv.push_back({{"level", h.level_min + i},
                      {"steps", steps},
                      {"max_substeps", substeps[i]},
                      {"mean_sup_diff", mean_diff[i]},
                      {"mean_driver_distance", mean_dist[i]}});
    }
    write_text(run.file("hjb_levels.csv"), levels.str());

    // Finest value grid of the first driver at the coarsest level's times.
    const ValueGrid& finest = outcomes.front().finest;
    std::ostringstream vals;
    vals << "k,t,x,v\n";
    const std::size_t stride = std::size_t{1} << (h.level_max - h.level_min);
    for (std::size_t q = 0; q <= nf; q += stride) {
        for (std::size_t j = 0; j < mesh.size(); ++j) {
            vals << q << ',' << format_double(finest.grid[q]) << ',' << format_double(mesh.coordinate(0, j)) << ','
                 << format_double(finest.values[q][j]) << '\n';
        }
    }
    write_text(run.file("hjb_values.csv"), vals.str());

    run.results()["levels"] = lv;
    run.results()["closed_form_relative_error"] = rel;
    run.check("closed_form", rel <= h.tolerance, rel, h.tolerance);
    run.check("differences_decreasing", decreasing, mean_diff.back(), mean_diff[1]);
    return run.finish();
}

RunRecord run_pmp(const ExperimentConfig& c) {
    validate(c);
    if (c.fixture != "lqc-additive") throw ConfigError("pmp runs on the lqc-additive fixture");
    const PmpConfig& pc = c.pmp;
    Run run("pmp", c);
    const LqcSetup s = run.timed("riccati", [&] { return LqcSetup(c, pc.grid); });
    const GridRoughPath eta = sample_brownian_lift(stream_seed(c, kPmp), make_uniform_grid(c.T, pc.grid), c.substeps, 1);
    const TimeGrid& grid = eta.grid();
    const std::size_t n = grid.steps();

    // Pathwise optimum: u = -R^{-1} N (P X + phi), phi' = -(M - R^{-1} N^2 P) phi - P eta', phi(T) = 0.
    const std::vector<Mat> P = riccati_on_grid(s.sol, grid);
    std::vector<double> phi(n + 1, 0.0);
    for (std::size_t k = n; k-- > 0;) {
        const double p = P[k + 1](0, 0);
        phi[k] = phi[k + 1] + (c.M - c.N * c.N * p / c.R) * phi[k + 1] * grid.dt(k) + p * eta.delta(k)(0);
    }
    ControlPath mu{grid, {}};
    RdeSolution traj{grid, 0, {s.x0}, {}};
    for (std::size_t k = 0; k < n; ++k) {
        const double x = traj.states.back()(0);
        const double u = std::clamp(-c.N * (P[k](0, 0) * x + phi[k]) / c.R, c.control_lower, c.control_upper);
        mu.values.push_back(scalar(u));
        traj.states.push_back(davie_step(traj.states.back(), s.problem.vf, mu.values.back(), eta.delta(k), eta.area(k),
                                         grid.dt(k), k));
    }
    const double value = payoff_along(s.problem, mu, traj);
    const PathwiseResult cand{value, mu, traj, 0, 0, false};

    const std::vector<double> residual =
        run.timed("hamiltonian_residual", [&] { return pmp_hamiltonian_residual(s.problem, cand, eta); });
    double worst = 0.0;
    std::ostringstream rcsv;
    rcsv << "k,t,residual\n";
    for (std::size_t k = 0; k < residual.size(); ++k) {
        worst = std::max(worst, residual[k]);
        rcsv << k << ',' << format_double(grid[k]) << ',' << format_double(residual[k]) << '\n';
    }
    write_text(run.file("pmp_residual.csv"), rcsv.str());
    const double cost_scale = std::abs(s.V);
    run.results()["pathwise_value"] = value;
    run.results()["cost_scale"] = cost_scale;
    run.results()["max_residual"] = worst;
    run.check("hamiltonian_residual", worst <= pc.residual_tolerance * cost_scale, worst,
              pc.residual_tolerance * cost_scale);

    std::vector<double> eps;
    for (int e = pc.eps_max_log2; e >= pc.eps_min_log2; --e) eps.push_back(std::ldexp(c.T, e));
    std::ostringstream scsv;
    scsv << "fixture,eps,state_diff,remainder,payoff_error\n";
    double xmax = 0.0;
    for (const Vec& x : traj.states) xmax = std::max(xmax, x.cwiseAbs().maxCoeff());
    const std::vector<SpikeRow> lqc_rows = run.timed("spike_lqc", [&] {
        return spike_variation_check(s.problem, cand, scalar(pc.alt_u), pc.t_spike, eps, eta);
    });
    spike_ladder(run, scsv, "lqc", lqc_rows, xmax, pc.ladder_factor, true, true);

    // Nonlinear companion: b = sin x + u, sigma = cos(x)/2, f = -u^2/2, g = -x^2/2, base control 0.
    PolynomialProblem dummy;
    ControlProblem nl = polynomial_problem(dummy, s.U);
    nl.vf.drift = [](const Vec& x, const Vec& u) { return scalar(std::sin(x(0)) + u(0)); };
    nl.vf.drift_jacobian = [](const Vec& x, const Vec&) -> Mat { return Mat::Constant(1, 1, std::cos(x(0))); };
    nl.vf.diffusion = [](const Vec& x) -> Mat { return Mat::Constant(1, 1, 0.5 * std::cos(x(0))); };
    nl.vf.diffusion_jacobian = [](const Vec& x) { return std::vector<Mat>{Mat::Constant(1, 1, -0.5 * std::sin(x(0)))}; };
    nl.vf.diffusion_curvature = [](const Vec& x, const Vec& v) {
        return std::vector<Mat>{Mat::Constant(1, 1, -0.5 * std::cos(x(0)) * v(0))};
    };
    nl.f = [](double, const Vec&, const Vec& u) { return -0.5 * u(0) * u(0); };
    nl.df = [](double, const Vec&, const Vec&) { return scalar(0.0); };
    const ControlPath zero = ControlPath::constant(grid, scalar(0.0));
    const RdeSolution nl_traj = solve_controlled_rde(s.x0, 0, nl.vf, zero, eta);
    const PathwiseResult nl_cand{payoff_along(nl, zero, nl_traj), zero, nl_traj, 0, 0, false};
    const std::vector<SpikeRow> nl_rows = run.timed("spike_nonlinear", [&] {
        return spike_variation_check(nl, nl_cand, scalar(pc.alt_u), pc.t_spike, eps, eta);
    });
    double nmax = 0.0;
    for (const Vec& x : nl_traj.states) nmax = std::max(nmax, x.cwiseAbs().maxCoeff());
    spike_ladder(run, scsv, "nonlinear", nl_rows, nmax, pc.ladder_factor, false, false);
    write_text(run.file("spike.csv"), scsv.str());
    return run.finish();
}

RunRecord run_wong_zakai(const ExperimentConfig& c) {
    validate(c);
    const WongZakaiConfig& w = c.wong_zakai;
    Run run("wong-zakai", c);
    // dY = sin(Y) d eta + cos(Y) dt
    VectorFieldSet vf;
    vf.drift = [](const Vec& y, const Vec&) { return scalar(std::cos(y(0))); };
    vf.drift_jacobian = [](const Vec& y, const Vec&) -> Mat { return Mat::Constant(1, 1, -std::sin(y(0))); };
    vf.drift_control_jacobian = [](const Vec&, const Vec&) -> Mat { return Mat::Zero(1, 1); };
    vf.diffusion = [](const Vec& y) -> Mat { return Mat::Constant(1, 1, std::sin(y(0))); };
    vf.diffusion_jacobian = [](const Vec& y) { return std::vector<Mat>{Mat::Constant(1, 1, std::cos(y(0)))}; };
    vf.diffusion_curvature = [](const Vec& y, const Vec& v) {
        return std::vector<Mat>{Mat::Constant(1, 1, -std::sin(y(0)) * v(0))};
    };

    const std::size_t nb = std::size_t{1} << w.level_max;
    const TimeGrid fine = make_uniform_grid(c.T, std::size_t{1} << w.fine_level);
    const ControlPath none = ControlPath::constant(fine, scalar(0.0));
    const std::size_t nlev = w.level_max - w.level_min + 1;
    std::vector<std::vector<double>> diffs(w.paths, std::vector<double>(nlev - 1));
    const std::uint64_t seed = stream_seed(c, kWongZakai);
    run.timed("solve", [&] {
        parallel_for(w.paths, c.workers, [&](std::size_t p) {
            const Mat values = sample_brownian_lift(derive_seed(seed, p), make_uniform_grid(c.T, nb), 1, 1).values();
            std::vector<RdeSolution> sols;
            for (std::size_t level = w.level_min; level <= w.level_max; ++level) {
                const std::size_t n = std::size_t{1} << level, stride = nb / n;
                Mat coarse(1, static_cast<Eigen::Index>(n + 1));
                for (std::size_t q = 0; q <= n; ++q) {
                    coarse(0, static_cast<Eigen::Index>(q)) = values(0, static_cast<Eigen::Index>(q * stride));
                }
                const GridRoughPath eta = refine_piecewise_linear(lift_piecewise_linear(make_uniform_grid(c.T, n), coarse), fine);
                sols.push_back(solve_controlled_rde(scalar(w.y0), 0, vf, none, eta));
            }
            for (std::size_t i = 0; i + 1 < sols.size(); ++i) {
                double d = 0.0;
                for (std::size_t k = 0; k < sols[i].states.size(); ++k) {
                    d = std::max(d, std::abs(sols[i + 1].states[k](0) - sols[i].states[k](0)));
                }
                diffs[p][i] = d;
            }
        });
    });

    std::vector<double> mean(nlev - 1);
    for (std::size_t i = 0; i + 1 < nlev; ++i) {
        CompensatedSum s;
        for (std::size_t p = 0; p < w.paths; ++p) s.add(diffs[p][i]);
        mean[i] = s.value() / static_cast<double>(w.paths);
    }
    // Least-squares slope of log2(mean diff) against the level.
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    bool decreasing = true;
    std::ostringstream csv;
    csv << "level,steps,mean_sup_diff\n";
    json rows = json::array();
    for (std::size_t i = 0; i + 1 < nlev; ++i) {
        const double L = static_cast<double>(w.level_min + i), y = std::log2(mean[i]);
        sx += L;
        sy += y;
        sxx += L * L;
        sxy += L * y;
        if (i > 0 && !(mean[i] < mean[i - 1])) decreasing = false;
        csv << w.level_min + i << ',' << (std::size_t{1} << (w.level_min + i)) << ',' << format_double(mean[i]) << '\n';
        rows.push_back({{"level", w.level_min + i}, {"mean_sup_diff", mean[i]}});
    }
    const double m = static_cast<double>(nlev - 1);
    const double order = -(m * sxy - sx * sy) / (m * sxx - sx * sx);
    write_text(run.file("wong_zakai.csv"), csv.str());
    run.results()["levels"] = rows;
    run.results()["fitted_order"] = order;
    run.check("differences_decreasing", decreasing, mean.back(), mean.front());
    run.check("fitted_order_low", order >= w.order_min, order, w.order_min);
    run.check("fitted_order_high", order <= w.order_max, order, w.order_max);
    return run.finish();
}

RunRecord run_sample_path(const ExperimentConfig& c) {
    validate(c);
    Run run("sample-path", c);
    const GridRoughPath path = sample_brownian_lift(c.seed, make_uniform_grid(c.T, c.grid), c.substeps, 1);
    write_path_file(run.file("path.txt"), path);
    const HoelderReport h = hoelder_distance(path, zero_path(path.grid(), 1), 0.4, HoelderPairs::Dyadic);
    run.results()["steps"] = path.steps();
    run.results()["terminal_value"] = path.values()(0, static_cast<Eigen::Index>(path.steps()));
    run.results()["hoelder_level1"] = h.level1_norm;
    run.results()["hoelder_level2"] = h.level2_norm;
    return run.finish();
}

namespace {

RunRecord error_record(const std::string& command, const std::string& out, int code, const std::string& kind,
                       const std::string& message) {
    RunRecord r;
    r.exit_code = code;
    r.record = {{"tool", "roughctl"},
                {"version", tool_version()},
                {"command", command},
                {"error", {{"kind", kind}, {"message", message}}},
                {"exit_code", code}};
    if (!out.empty()) {
        std::error_code ec;
        fs::create_directories(out, ec);
        if (!ec) {
            std::ofstream f(fs::path(out) / "record.json", std::ios::binary);
            if (f) f << r.record.dump(2) << "\n";
        }
    }
    return r;
}

template <class F>
RunRecord guarded(const std::string& command, const std::string& out, F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        return error_record(command, out, 2, "config", e.what());
    } catch (const std::invalid_argument& e) {
        return error_record(command, out, 2, "invalid-argument", e.what());
    } catch (const NumericalOverflow& e) {
        return error_record(command, out, 3, "numerical-overflow", e.what());
    } catch (const FiniteEscape& e) {
        return error_record(command, out, 3, "finite-escape", e.what());
    } catch (const OutOfDomain& e) {
        return error_record(command, out, 3, "out-of-domain", e.what());
    } catch (const ResolutionError& e) {
        return error_record(command, out, 3, "resolution", e.what());
    } catch (const AbortedRun& e) {
        return error_record(command, out, 3, "aborted", e.what());
    }
}

}  // namespace

RunRecord run_command(const std::string& command, const ExperimentConfig& config) {
    return guarded(command, config.out, [&]() -> RunRecord {
        if (command == "lqc-verify") return run_lqc_verify(config);
        if (command == "bound") return run_bound(config);
        if (command == "hjb") return run_hjb(config);
        if (command == "pmp") return run_pmp(config);
        if (command == "wong-zakai") return run_wong_zakai(config);
        if (command == "sample-path") return run_sample_path(config);
        throw ConfigError("unknown command '" + command + "'");
    });
}

RunRecord run_command_text(const std::string& command, const std::string& config_json) {
    // The output directory is only known once the config parses.
    std::string out;
    try {
        const json doc = json::parse(config_json);
        if (doc.is_object() && doc.contains("out") && doc["out"].is_string()) out = doc["out"].get<std::string>();
    } catch (const json::exception&) {
    }
    return guarded(command, out, [&] { return run_command(command, parse_config_text(config_json)); });
}

}  // namespace roughctl
