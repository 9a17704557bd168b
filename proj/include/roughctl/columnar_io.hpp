#pragma once

#include <iosfwd>
#include <string>

#include "roughctl/rde.hpp"
#include "roughctl/rough_path.hpp"

namespace roughctl {

/// "%.17g"; round-trips every finite double exactly.
std::string format_double(double x);

// Columnar text format. Header line "d n T", then one whitespace-separated row
// per interval: t_k, delta_k (d values), A_k (d*d values, row-major).
void write_path(std::ostream& out, const GridRoughPath& path);
GridRoughPath read_path(std::istream& in);
void write_path_file(const std::string& filename, const GridRoughPath& path);
GridRoughPath read_path_file(const std::string& filename);

// Solutions: header "e n T start", then one row t_k, Y_k per stored grid time.
// The grid itself is not recoverable from a solution file unless start = 0.
void write_solution(std::ostream& out, const RdeSolution& sol);
void write_solution_file(const std::string& filename, const RdeSolution& sol);

}  // namespace roughctl
