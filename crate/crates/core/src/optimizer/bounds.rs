//! Convex under-estimators used to build the SCA subproblem.
//!
//! All three are tight at their linearization point and valid everywhere
//! else, so the previous iterate stays feasible and the objective can only
//! go up.

/// `Ω(x, y) = 2(x⁰/y⁰)·x − (x⁰/y⁰)²·y`, a linear minorant of `x²/y` on
/// `y > 0` tangent at `(x⁰, y⁰)`.
pub fn fractional_bound(x: f64, y: f64, x0: f64, y0: f64) -> f64 {
    let a = x0 / y0;
    2.0 * a * x - a * a * y
}

/// `e^{χ⁰}(χ − χ⁰ + 1)`, the tangent of `e^χ` at `χ⁰`.
pub fn exp_tangent(chi: f64, chi0: f64) -> f64 {
    chi0.exp() * (chi - chi0 + 1.0)
}

/// `T = ln t⁰ + 1`.
pub fn log_anchor(t0: f64) -> f64 {
    t0.ln() + 1.0
}

/// Cone data of the log constraint at anchor `t⁰`:
/// `‖(t + η − T, 2√t⁰)‖₂ ≤ t − η + T`. Returns `(‖args‖, bound)`.
///
/// Since `(bound − a)(bound + a) = 4t(T − η)` with `a = t + η − T`, the cone
/// forces `η ≤ T − t⁰/t ≤ ln t`, with equality at `t = t⁰`.
pub fn log_cone(t: f64, eta: f64, t0: f64) -> (f64, f64) {
    let big_t = log_anchor(t0);
    let a = t + eta - big_t;
    let b = 2.0 * t0.sqrt();
    (a.hypot(b), t - eta + big_t)
}
