#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace roughctl {

/// Scalar problem given by polynomial coefficients (lowest degree first):
///   b = sum a_i x^i + beta u, sigma = sum s_i x^i,
///   f = sum f_i x^i + 1/2 r u^2, g = sum g_i x^i.
struct PolynomialProblem {
    std::vector<double> drift{0.0};
    double control_gain = 1.0;
    std::vector<double> diffusion{1.0};
    std::vector<double> running{0.0};
    double control_cost = -1.0;
    std::vector<double> terminal{0.0, 0.0, -0.5};
    std::vector<double> policy;  ///< optional feedback u = sum c_i x^i (projected onto U)

    bool operator==(const PolynomialProblem&) const = default;
};

struct PenaltyConfig {
    std::string type = "rogers";  ///< rogers | davis-burstein | zero | custom
    bool running_cost = true;
    std::size_t lambda_nodes = 17;
    std::vector<double> running;  ///< custom: c(x) = sum c_i x^i added per unit time
    double constant = 0.0;        ///< custom: added once

    bool operator==(const PenaltyConfig&) const = default;
};

struct LqcChecks {
    std::vector<std::string> enabled;  ///< empty runs every check of the fixture
    double bound_tolerance = -1.0;     ///< relative to |V|; negative picks the fixture default
    double gap_tolerance = -1.0;
    std::size_t identity_paths = 20;
    std::size_t identity_controls = 5;
    double identity_tolerance = 1e-2;
    std::size_t zero_mean_paths = 1000;
    std::size_t formula_paths = 20;
    double formula_tolerance = 1e-2;

    bool operator==(const LqcChecks&) const = default;
};

struct HjbConfig {
    std::size_t level_min = 4;
    std::size_t level_max = 8;
    double mesh_lower = -8.0;
    double mesh_upper = 8.0;
    std::size_t mesh_size = 1601;
    double interior_lower = -2.0;
    double interior_upper = 2.0;
    double control_bound = 1.0;
    std::size_t control_points = 21;
    double tolerance = 0.02;
    std::size_t paths = 16;  ///< independent drivers; level differences are averaged over them

    bool operator==(const HjbConfig&) const = default;
};

struct PmpConfig {
    std::size_t grid = 1024;
    double t_spike = 0.25;
    double alt_u = 1.0;
    int eps_min_log2 = -8;
    int eps_max_log2 = -3;
    double residual_tolerance = 1e-2;  ///< relative to the cost scale |V|
    double ladder_factor = 2.0;

    bool operator==(const PmpConfig&) const = default;
};

struct WongZakaiConfig {
    std::size_t level_min = 4;
    std::size_t level_max = 12;
    std::size_t fine_level = 15;
    double y0 = 0.5;
    std::size_t paths = 16;
    double order_min = 0.3;
    double order_max = 1.1;

    bool operator==(const WongZakaiConfig&) const = default;
};

struct ExperimentConfig {
    std::string fixture = "lqc-additive";  ///< lqc-additive | lqc-multiplicative | custom
    double M = 0.1, N = 1.0, C = 0.3, Q = -1.0, R = -1.0, G = -1.0, T = 1.0;
    PolynomialProblem custom;
    double x0 = 1.0;
    std::size_t grid = 256;
    std::size_t substeps = 1;
    std::size_t mesh_size = 401;
    double mesh_lower = -2.0;
    double mesh_upper = 4.0;
    std::size_t control_points = 41;
    double control_lower = -4.0;
    double control_upper = 4.0;
    std::size_t n_paths = 2000;
    std::uint64_t seed = 20240611;
    std::size_t workers = 1;
    std::size_t riccati_refine = 10;
    PenaltyConfig penalty;
    LqcChecks checks;
    HjbConfig hjb;
    PmpConfig pmp;
    WongZakaiConfig wong_zakai;
    std::string out = "out";
    bool emit_timings = false;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Missing keys keep their defaults; unknown keys and invalid values raise ConfigError.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig parse_config_text(const std::string& text);
nlohmann::json to_json(const ExperimentConfig& config);
void validate(const ExperimentConfig& config);

struct RunRecord {
    nlohmann::json record;  ///< config echo, results, checks, failure counters, files, optional timings
    int exit_code = 0;      ///< 0 pass, 1 acceptance failure, 2 configuration error, 3 numerical failure
};

const char* tool_version();

RunRecord run_lqc_verify(const ExperimentConfig& config);
RunRecord run_bound(const ExperimentConfig& config);
RunRecord run_hjb(const ExperimentConfig& config);
RunRecord run_pmp(const ExperimentConfig& config);
RunRecord run_wong_zakai(const ExperimentConfig& config);
RunRecord run_sample_path(const ExperimentConfig& config);

/// Dispatches by subcommand name. Configuration problems and numerical
/// failures become records with exit codes 2 and 3; record.json is written
/// to the output directory whenever it can be created.
RunRecord run_command(const std::string& command, const ExperimentConfig& config);
RunRecord run_command_text(const std::string& command, const std::string& config_json);

}  // namespace roughctl
