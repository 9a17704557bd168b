#include "roughctl/columnar_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace roughctl {

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace {

double read_number(std::istream& in, const char* what) {
    std::string token;
    if (!(in >> token)) throw std::runtime_error(std::string("path file truncated reading ") + what);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(token, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != token.size()) throw std::runtime_error("malformed number '" + token + "' in path file");
    return v;
}

std::ofstream open_out(const std::string& filename) {
    std::ofstream out(filename, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + filename + "' for writing");
    return out;
}

}  // namespace

void write_path(std::ostream& out, const GridRoughPath& path) {
    const std::size_t d = path.dim();
    out << d << ' ' << path.steps() << ' ' << format_double(path.grid().horizon()) << '\n';
    for (std::size_t k = 0; k < path.steps(); ++k) {
        out << format_double(path.grid()[k]);
        const auto delta = path.delta(k);
        for (std::size_t i = 0; i < d; ++i) out << ' ' << format_double(delta(static_cast<Eigen::Index>(i)));
        const auto areas = path.raw_areas().subspan(k * d * d, d * d);
        for (double a : areas) out << ' ' << format_double(a);
        out << '\n';
    }
}

GridRoughPath read_path(std::istream& in) {
    std::size_t d = 0, n = 0;
    if (!(in >> d >> n)) throw std::runtime_error("path file header missing");
    if (d == 0 || n == 0) throw std::runtime_error("path file header has zero dimension or steps");
    const double horizon = read_number(in, "horizon");
    std::vector<double> times(n + 1);
    Mat inc(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
    std::vector<double> areas(n * d * d);
    for (std::size_t k = 0; k < n; ++k) {
        times[k] = read_number(in, "time");
        for (std::size_t i = 0; i < d; ++i) inc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = read_number(in, "increment");
        for (std::size_t i = 0; i < d * d; ++i) areas[k * d * d + i] = read_number(in, "area");
    }
    times[n] = horizon;
    return GridRoughPath(TimeGrid(std::move(times)), d, std::move(inc), std::move(areas));
}

void write_path_file(const std::string& filename, const GridRoughPath& path) {
    auto out = open_out(filename);
    write_path(out, path);
    if (!out) throw std::runtime_error("failed writing '" + filename + "'");
}

GridRoughPath read_path_file(const std::string& filename) {
    std::ifstream in(filename, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + filename + "'");
    return read_path(in);
}

void write_solution(std::ostream& out, const RdeSolution& sol) {
    const std::size_t e = sol.states.empty() ? 0 : static_cast<std::size_t>(sol.states.front().size());
    out << e << ' ' << sol.grid.steps() << ' ' << format_double(sol.grid.horizon()) << ' ' << sol.start << '\n';
    for (std::size_t k = 0; k < sol.states.size(); ++k) {
        out << format_double(sol.grid[sol.start + k]);
        for (Eigen::Index i = 0; i < sol.states[k].size(); ++i) out << ' ' << format_double(sol.states[k](i));
        out << '\n';
    }
}

void write_solution_file(const std::string& filename, const RdeSolution& sol) {
    auto out = open_out(filename);
    write_solution(out, sol);
    if (!out) throw std::runtime_error("failed writing '" + filename + "'");
}

}  // namespace roughctl
