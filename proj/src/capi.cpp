#include "roughctl/roughctl.h"

#include <cstring>
#include <fstream>
#include <string>

#include "roughctl/columnar_io.hpp"
#include "roughctl/duality.hpp"
#include "roughctl/errors.hpp"
#include "roughctl/harness.hpp"
#include "roughctl/rough_path.hpp"

struct rc_path {
    roughctl::GridRoughPath path;
};

struct rc_run {
    roughctl::RunRecord run;
    std::string text;
};

namespace {

thread_local std::string last_error;

rc_status fail(rc_status code, const std::string& message) {
    last_error = message;
    return code;
}

// Maps exceptions escaping the core onto status codes.
template <class F>
rc_status guard(F&& body) {
    try {
        last_error.clear();
        body();
        return RC_OK;
    } catch (const roughctl::ConfigError& e) {
        return fail(RC_CONFIG, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(RC_INVALID_ARGUMENT, e.what());
    } catch (const std::out_of_range& e) {
        return fail(RC_INVALID_ARGUMENT, e.what());
    } catch (const roughctl::NumericalOverflow& e) {
        return fail(RC_NUMERICAL, e.what());
    } catch (const roughctl::FiniteEscape& e) {
        return fail(RC_NUMERICAL, e.what());
    } catch (const roughctl::OutOfDomain& e) {
        return fail(RC_NUMERICAL, e.what());
    } catch (const roughctl::ResolutionError& e) {
        return fail(RC_NUMERICAL, e.what());
    } catch (const roughctl::AbortedRun& e) {
        return fail(RC_NUMERICAL, e.what());
    } catch (const std::ios_base::failure& e) {
        return fail(RC_IO, e.what());
    } catch (const std::exception& e) {
        return fail(RC_INTERNAL, e.what());
    } catch (...) {
        return fail(RC_INTERNAL, "unknown error");
    }
}

bool null_arg(const void* p, const char* name, rc_status* status) {
    if (p) return false;
    *status = fail(RC_INVALID_ARGUMENT, std::string(name) + " must not be null");
    return true;
}

}  // namespace

extern "C" {

const char* rc_version(void) { return roughctl::tool_version(); }

const char* rc_last_error(void) { return last_error.c_str(); }

rc_status rc_path_sample_brownian(uint64_t seed, double horizon, size_t steps, size_t substeps, size_t dim,
                                  rc_path** out) {
    rc_status st;
    if (null_arg(out, "out", &st)) return st;
    *out = nullptr;
    return guard([&] {
        auto path = roughctl::sample_brownian_lift(seed, roughctl::make_uniform_grid(horizon, steps), substeps, dim);
        *out = new rc_path{std::move(path)};
    });
}

rc_status rc_path_from_points(const double* times, size_t n_times, const double* values, size_t dim, rc_path** out) {
    rc_status st;
    if (null_arg(out, "out", &st) || null_arg(times, "times", &st) || null_arg(values, "values", &st)) return st;
    *out = nullptr;
    return guard([&] {
        roughctl::require(dim >= 1 && n_times >= 2, "need at least two times and one component");
        roughctl::TimeGrid grid(std::vector<double>(times, times + n_times));
        roughctl::Mat v(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(n_times));
        for (size_t k = 0; k < n_times; ++k) {
            for (size_t i = 0; i < dim; ++i) v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = values[k * dim + i];
        }
        *out = new rc_path{roughctl::lift_piecewise_linear(grid, v)};
    });
}

rc_status rc_path_read(const char* filename, rc_path** out) {
    rc_status st;
    if (null_arg(out, "out", &st) || null_arg(filename, "filename", &st)) return st;
    *out = nullptr;
    return guard([&] {
        if (!std::ifstream(filename)) throw std::ios_base::failure(std::string("cannot open ") + filename);
        *out = new rc_path{roughctl::read_path_file(filename)};
    });
}

rc_status rc_path_write(const rc_path* path, const char* filename) {
    rc_status st;
    if (null_arg(path, "path", &st) || null_arg(filename, "filename", &st)) return st;
    return guard([&] {
        if (!std::ofstream(filename, std::ios::app)) throw std::ios_base::failure(std::string("cannot write ") + filename);
        roughctl::write_path_file(filename, path->path);
    });
}

void rc_path_free(rc_path* path) { delete path; }

size_t rc_path_dim(const rc_path* path) { return path ? path->path.dim() : 0; }

size_t rc_path_steps(const rc_path* path) { return path ? path->path.steps() : 0; }

double rc_path_time(const rc_path* path, size_t k) {
    if (!path || k > path->path.steps()) return 0.0;
    return path->path.grid()[k];
}

rc_status rc_path_increment(const rc_path* path, size_t from, size_t to, double* delta, double* area) {
    rc_status st;
    if (null_arg(path, "path", &st) || null_arg(delta, "delta", &st) || null_arg(area, "area", &st)) return st;
    return guard([&] {
        const roughctl::Increment inc = path->path.increment(from, to);
        const auto d = static_cast<Eigen::Index>(path->path.dim());
        for (Eigen::Index i = 0; i < d; ++i) {
            delta[i] = inc.delta(i);
            for (Eigen::Index j = 0; j < d; ++j) area[i * d + j] = inc.area(i, j);
        }
    });
}

rc_status rc_path_hoelder_distance(const rc_path* p, const rc_path* q, double alpha, double* out) {
    rc_status st;
    if (null_arg(p, "p", &st) || null_arg(q, "q", &st) || null_arg(out, "out", &st)) return st;
    return guard([&] { *out = roughctl::hoelder_distance(p->path, q->path, alpha).distance; });
}

rc_status rc_run_command(const char* command, const char* config_json, rc_run** out) {
    rc_status st;
    if (null_arg(out, "out", &st) || null_arg(command, "command", &st) || null_arg(config_json, "config_json", &st)) {
        return st;
    }
    *out = nullptr;
    return guard([&] {
        auto* run = new rc_run{roughctl::run_command_text(command, config_json), {}};
        run->text = run->run.record.dump(2);
        if (run->run.record.contains("error")) last_error = run->run.record["error"]["message"].get<std::string>();
        *out = run;
    });
}

int rc_run_exit_code(const rc_run* run) { return run ? run->run.exit_code : 2; }

const char* rc_run_record_json(const rc_run* run) { return run ? run->text.c_str() : ""; }

void rc_run_free(rc_run* run) { delete run; }

rc_status rc_config_normalize(const char* config_json, char** out_json) {
    rc_status st;
    if (null_arg(config_json, "config_json", &st) || null_arg(out_json, "out_json", &st)) return st;
    *out_json = nullptr;
    return guard([&] {
        const std::string text = roughctl::to_json(roughctl::parse_config_text(config_json)).dump(2);
        char* buf = new char[text.size() + 1];
        std::memcpy(buf, text.c_str(), text.size() + 1);
        *out_json = buf;
    });
}

void rc_string_free(char* s) { delete[] s; }

}  // extern "C"
