#pragma once

namespace poismc {

/// Central numeric tolerances. Every check in the library reads these from a
/// Tolerances value so callers can tighten or relax them in one place.
struct Tolerances {
    double mass_tol = 1e-12;         // row-stochasticity / measure mass defects
    double fixed_point_tol = 1e-10;  // stationary residual ||pi P - pi||_inf
    double monotone_slack = 1e-12;   // slack for CDF / path order comparisons
    double residual_tol = 1e-8;      // exact-solver Poisson residual
    double anchor_tol = 1e-10;       // additive-constant agreement after anchoring
    double inverse_tol = 1e-12;      // bisection width for generalized inverses
    double g_increment_tol = 1e-10;  // allowed negative increment in certified g
};

}  // namespace poismc
