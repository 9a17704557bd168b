#include <algorithm>
#include <cmath>

#include "roughctl/errors.hpp"
#include "roughctl/rde.hpp"

namespace roughctl {

namespace {

struct MeshLookup {
    const std::vector<double>& mesh;

    // Cell index and weight of the right node; throws when y is outside the mesh.
    std::pair<std::size_t, double> locate(double y, std::size_t k) const {
        if (!(y >= mesh.front() && y <= mesh.back())) {
            throw OutOfDomain("transformed state left the mesh at step " + std::to_string(k));
        }
        auto it = std::upper_bound(mesh.begin(), mesh.end(), y);
        std::size_t j = it == mesh.end() ? mesh.size() - 2 : static_cast<std::size_t>(it - mesh.begin()) - 1;
        j = std::min(j, mesh.size() - 2);
        return {j, (y - mesh[j]) / (mesh[j + 1] - mesh[j])};
    }
};

}  // namespace

FlowDecomposition flow_decomposition_solve(const Vec& x0, std::size_t start, const VectorFieldSet& vf,
                                           const ControlPath& mu, const GridRoughPath& eta,
                                           const std::vector<double>& state_mesh) {
    require(vf.state_dim == 1, "flow decomposition needs a scalar state");
    require(x0.size() == 1, "initial state must be scalar");
    require(state_mesh.size() >= 2, "state mesh needs at least two nodes");
    require(std::is_sorted(state_mesh.begin(), state_mesh.end()) &&
                std::adjacent_find(state_mesh.begin(), state_mesh.end()) == state_mesh.end(),
            "state mesh must be strictly increasing");
    require(mu.grid == eta.grid() && mu.values.size() == eta.steps(), "control and driver must share a grid");
    require(start <= eta.steps(), "start index beyond horizon");

    const std::size_t n = eta.steps();
    const std::size_t m = state_mesh.size();
    const std::size_t len = n - start + 1;

    VectorFieldSet driftless = vf;
    driftless.drift = [](const Vec& x, const Vec&) { return Vec::Zero(x.size()); };
    driftless.drift_jacobian = [](const Vec& x, const Vec&) { return Mat::Zero(x.size(), x.size()); };

    // phi[k][j], dphi[k][j]: flow from t_start evaluated at mesh node j.
    std::vector<std::vector<double>> phi(len, std::vector<double>(m)), dphi(len, std::vector<double>(m));
    for (std::size_t j = 0; j < m; ++j) {
        Vec x(1);
        x(0) = state_mesh[j];
        double d = 1.0;
        phi[0][j] = x(0);
        dphi[0][j] = d;
        const Vec u0 = Vec::Zero(static_cast<Eigen::Index>(vf.control_dim));
        for (std::size_t k = start; k < n; ++k) {
            const double dt = eta.grid().dt(k);
            const Mat lin = linearized_step_matrix(x, u0, driftless, eta.delta(k), eta.area(k), dt);
            x = davie_step(x, driftless, u0, eta.delta(k), eta.area(k), dt, k);
            d = lin(0, 0) * d;
            if (!std::isfinite(d)) throw NumericalOverflow("non-finite flow derivative", k);
            phi[k + 1 - start][j] = x(0);
            dphi[k + 1 - start][j] = d;
        }
    }

    const MeshLookup lookup{state_mesh};
    auto interp = [&](const std::vector<double>& row, std::pair<std::size_t, double> c) {
        return (1.0 - c.second) * row[c.first] + c.second * row[c.first + 1];
    };
    auto transformed_drift = [&](std::size_t k, double y, const Vec& u) {
        const auto cell = lookup.locate(y, k);
        const std::size_t r = k - start;
        Vec state(1);
        state(0) = interp(phi[r], cell);
        const double jac = interp(dphi[r], cell);
        if (std::abs(jac) < 1e-300) throw NumericalOverflow("degenerate flow derivative", k);
        return vf.drift(state, u)(0) / jac;
    };

    FlowDecomposition out{RdeSolution{eta.grid(), start, {}, {}}, {}};
    out.solution.scheme.note = "driftless flow by davie-2 on the state mesh, transformed drift by Heun";
    out.transformed.reserve(len);
    out.solution.states.reserve(len);
    double y = x0(0);
    lookup.locate(y, start);
    out.transformed.push_back(y);
    out.solution.states.push_back(x0);
    for (std::size_t k = start; k < n; ++k) {
        const double dt = eta.grid().dt(k);
        const Vec& u = mu.values[k];
        const double k1 = transformed_drift(k, y, u);
        const double k2 = transformed_drift(k + 1, y + k1 * dt, u);
        y += 0.5 * (k1 + k2) * dt;
        if (!std::isfinite(y)) throw NumericalOverflow("non-finite transformed state", k);
        out.transformed.push_back(y);
        Vec state(1);
        state(0) = interp(phi[k + 1 - start], lookup.locate(y, k + 1));
        out.solution.states.push_back(state);
    }
    return out;
}

}  // namespace roughctl
