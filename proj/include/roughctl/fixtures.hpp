#pragma once

#include <functional>

#include "roughctl/control.hpp"
#include "roughctl/duality.hpp"
#include "roughctl/lqc.hpp"

namespace roughctl {

// Problems and penalties for the linear-quadratic fixtures, with analytic derivatives.

/// b = Mx + Nu, sigma = Id, f = 1/2(<Qx,x> + <Ru,u>), g = 1/2<Gx,x>.
ControlProblem lqc_additive_problem(const AdditiveLqcSpec& spec, const ControlSet& controls);

/// b = Mx + Nu, sigma = Cx, f = 1/2(Qx^2 + Ru^2), g = 1/2 G x^2.
ControlProblem lqc_multiplicative_problem(const MultiplicativeLqcSpec& spec, const ControlSet& controls);

/// h = V with exact time derivative from the Riccati equation.
RogersPenalty lqc_additive_value_penalty(const AdditiveLqcSpec& spec, const RiccatiSolution& sol);
RogersPenalty lqc_multiplicative_value_penalty(const MultiplicativeLqcSpec& spec, const RiccatiSolution& sol);

/// Riccati feedback projected onto the control box.
std::function<Vec(double, const Vec&)> lqc_additive_policy(const AdditiveLqcSpec& spec, const RiccatiSolution& sol,
                                                          const ControlSet& controls);
std::function<Vec(double, const Vec&)> lqc_multiplicative_policy(const MultiplicativeLqcSpec& spec,
                                                                const RiccatiSolution& sol, const ControlSet& controls);

}  // namespace roughctl
