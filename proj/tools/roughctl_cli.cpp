#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "roughctl/roughctl.h"

namespace {

int config_error(const std::string& message) {
    nlohmann::json err = {{"error", {{"kind", "config"}, {"message", message}}}, {"exit_code", 2}};
    std::cerr << err.dump() << "\n";
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pathwise rough stochastic control: duality bounds, rough HJB, PMP checks"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", std::string(rc_version()));

    std::string config_file;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths, grid, workers;
    std::optional<std::string> out;
    bool timings = false;

    const char* commands[][2] = {
        {"lqc-verify", "LQC fixture: Riccati oracle, duality bounds and penalty checks"},
        {"bound", "lower and upper Monte Carlo bounds for the configured fixture and penalty"},
        {"hjb", "rough HJB along piecewise-linear approximations against the closed form"},
        {"pmp", "Hamiltonian residual and spike-variation ladder"},
        {"wong-zakai", "convergence ladder of piecewise-linear approximations"},
        {"sample-path", "write a Brownian rough path in the columnar format"},
    };
    for (const auto& cmd : commands) {
        CLI::App* sub = app.add_subcommand(cmd[0], cmd[1]);
        sub->add_option("--config", config_file, "JSON experiment configuration")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("--paths", paths, "number of Monte Carlo paths");
        sub->add_option("--grid", grid, "number of grid intervals");
        sub->add_option("--out", out, "output directory");
        sub->add_option("--workers", workers, "worker threads");
        sub->add_flag("--timings", timings, "record wall-clock timings (outputs stop being reproducible)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return config_error(e.what());
    }
    const std::string command = app.get_subcommands().front()->get_name();

    nlohmann::json config = nlohmann::json::object();
    if (!config_file.empty()) {
        std::ifstream in(config_file);
        std::stringstream text;
        text << in.rdbuf();
        try {
            config = nlohmann::json::parse(text.str());
        } catch (const nlohmann::json::parse_error& e) {
            return config_error(std::string("config is not valid JSON: ") + e.what());
        }
        if (!config.is_object()) return config_error("config must be a JSON object");
    }
    if (seed) config["seed"] = *seed;
    if (paths) config["n_paths"] = *paths;
    if (grid) config["grid"] = *grid;
    if (out) config["out"] = *out;
    if (workers) config["workers"] = *workers;
    if (timings) config["emit_timings"] = true;

    rc_run* run = nullptr;
    if (rc_run_command(command.c_str(), config.dump().c_str(), &run) != RC_OK) {
        std::cerr << nlohmann::json{{"error", {{"kind", "internal"}, {"message", rc_last_error()}}}}.dump() << "\n";
        return 3;
    }
    const int code = rc_run_exit_code(run);
    (code == 0 || code == 1 ? std::cout : std::cerr) << rc_run_record_json(run) << "\n";
    rc_run_free(run);
    return code;
}
