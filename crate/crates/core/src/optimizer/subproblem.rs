//! The convex subproblem around the current point.

use std::f64::consts::LN_2;

use super::bounds::log_anchor;
use super::ScaState;
use crate::conic::{ConicProgram, ConicValues, LinExpr, MatrixVar, ScalarVar};
use crate::csit::CsitStatistics;
use crate::linalg::{outer, CMatrix, CVector};
use crate::scenario::{ObjectiveMode, Scenario};

/// Handles to the subproblem variables. Common-stream handles are empty
/// without a common stream, `x`/`y`/`z` are absent in sum-rate mode.
#[derive(Clone, Debug)]
pub struct SubVars {
    pub w_c: Option<MatrixVar>,
    pub w_m: Vec<MatrixVar>,
    pub x: Option<ScalarVar>,
    pub y: Option<ScalarVar>,
    pub z: Option<ScalarVar>,
    pub c: Vec<ScalarVar>,
    pub r: Vec<ScalarVar>,
    pub eta_c: Vec<ScalarVar>,
    pub chi_c: Vec<ScalarVar>,
    pub t_c: Vec<ScalarVar>,
    pub eta_p: Vec<ScalarVar>,
    pub chi_p: Vec<ScalarVar>,
    pub t_p: Vec<ScalarVar>,
}

#[derive(Clone, Debug)]
pub struct Subproblem {
    pub program: ConicProgram,
    pub vars: SubVars,
}

fn sum(vars: &[ScalarVar]) -> LinExpr {
    vars.iter().map(|&v| LinExpr::from(v)).sum()
}

/// `Re tr((I − v vᴴ) W)`.
fn penalty_term(w: MatrixVar, v: &CVector) -> LinExpr {
    let n = v.len();
    LinExpr::trace_with(CMatrix::identity(n, n) - outer(v), w)
}

/// Adds `η − χ` rate chain pieces for one user: `t ≤ signal`, the log cone
/// at `t⁰`, and the exp tangent at `χ⁰` bounding `interference + σ²`.
#[allow(clippy::too_many_arguments)]
fn rate_chain(
    p: &mut ConicProgram,
    tag: &str,
    t: ScalarVar,
    eta: ScalarVar,
    chi: ScalarVar,
    signal: LinExpr,
    interference: LinExpr,
    t0: f64,
    chi0: f64,
) {
    p.leq(format!("{tag}_signal"), t, signal);
    let big_t = log_anchor(t0);
    p.soc(
        format!("{tag}_log"),
        vec![
            LinExpr::from(t) + eta - big_t,
            LinExpr::constant(2.0 * t0.sqrt()),
        ],
        LinExpr::from(t) - eta + big_t,
    );
    let e0 = chi0.exp();
    p.geq(
        format!("{tag}_exp"),
        LinExpr::term(chi, e0) + e0 * (1.0 - chi0),
        interference,
    );
}

/// Builds the subproblem at `state`:
///
/// maximize `z − ρκ·Σ Re tr((I − v vᴴ)W)` (or `Σ(C_m + R̄_m) − …` in sum-rate
/// mode) subject to the fractional tangent `Ω(x, y) ≥ z`, `x² ≤ Σ(C_m+R̄_m)`
/// as a rotated cone, `y ≥ P̄`, the common split `η_c,k − χ_c,k ≥ ln2·ΣC`,
/// the private chains `η_p,k − χ_p,k ≥ ln2·R̄_m`, `C ≥ 0`, QoS, total power
/// and `W ⪰ 0`.
pub fn build_subproblem(state: &ScaState, stats: &CsitStatistics, s: &Scenario) -> Subproblem {
    let n = stats.n_antennas();
    let m = state.n_groups();
    let k_users = stats.n_users();
    let sigma2 = s.noise_var;
    let common = state.has_common();
    let ee = state.objective == ObjectiveMode::Ee;
    let mut p = ConicProgram::new();

    let w_c = common.then(|| p.hermitian(n));
    let w_m: Vec<MatrixVar> = (0..m).map(|_| p.hermitian(n)).collect();
    let (x, y, z) = if ee {
        (Some(p.scalar()), Some(p.scalar()), Some(p.scalar()))
    } else {
        (None, None, None)
    };
    let c: Vec<ScalarVar> = if common {
        (0..m).map(|_| p.scalar()).collect()
    } else {
        Vec::new()
    };
    let r: Vec<ScalarVar> = (0..m).map(|_| p.scalar()).collect();
    let mut scalars = |count: usize| -> Vec<ScalarVar> { (0..count).map(|_| p.scalar()).collect() };
    let kc = if common { k_users } else { 0 };
    let (eta_c, chi_c, t_c) = (scalars(kc), scalars(kc), scalars(kc));
    let (eta_p, chi_p, t_p) = (scalars(k_users), scalars(k_users), scalars(k_users));

    let power: LinExpr = w_c.iter().chain(&w_m).map(|&w| LinExpr::trace(w, n)).sum();
    let sum_rate = sum(&c) + sum(&r);

    // penalty with fixed eigenvectors
    let mut penalty: LinExpr = w_m
        .iter()
        .zip(&state.eig_m)
        .map(|(&w, v)| penalty_term(w, v))
        .sum();
    if let Some(w) = w_c {
        penalty = penalty + penalty_term(w, &state.eig_c);
    }
    let weight = state.penalty_rho * state.penalty_scale;
    let objective = match z {
        Some(z) => LinExpr::from(z) - penalty * weight,
        None => sum_rate.clone() - penalty * weight,
    };
    p.maximize(objective);

    if let (Some(x), Some(y), Some(z)) = (x, y, z) {
        let a = state.x / state.y;
        p.geq(
            "fractional",
            LinExpr::term(x, 2.0 * a) - LinExpr::term(y, a * a),
            z,
        );
        p.soc(
            "rate_cone",
            vec![LinExpr::term(x, 2.0), sum_rate.clone() - 1.0],
            sum_rate.clone() + 1.0,
        );
        p.geq(
            "power_budget",
            y,
            power.clone() * (1.0 / s.amp_efficiency)
                + s.circuit_power_w
                + sum_rate.clone() * s.rate_power_coeff,
        );
    }

    for (k, hb) in stats.hbar_mat.iter().enumerate() {
        let g = s.group_map[k];
        let private: Vec<LinExpr> = w_m
            .iter()
            .map(|&w| LinExpr::trace_with(hb.clone(), w))
            .collect();
        let all: LinExpr = private.iter().cloned().sum::<LinExpr>() + sigma2;
        let interference: LinExpr = private
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != g)
            .map(|(_, e)| e.clone())
            .sum::<LinExpr>()
            + sigma2;
        if let Some(wc) = w_c {
            p.geq(
                format!("common_split_{k}"),
                LinExpr::from(eta_c[k]) - chi_c[k],
                sum(&c) * LN_2,
            );
            rate_chain(
                &mut p,
                &format!("common_{k}"),
                t_c[k],
                eta_c[k],
                chi_c[k],
                LinExpr::trace_with(hb.clone(), wc) + all.clone(),
                all.clone(),
                state.t_c[k],
                state.chi_c[k],
            );
        }
        p.geq(
            format!("private_rate_{k}"),
            LinExpr::from(eta_p[k]) - chi_p[k],
            LinExpr::term(r[g], LN_2),
        );
        rate_chain(
            &mut p,
            &format!("private_{k}"),
            t_p[k],
            eta_p[k],
            chi_p[k],
            all,
            interference,
            state.t_p[k],
            state.chi_p[k],
        );
    }

    for g in 0..m {
        let mut have = LinExpr::from(r[g]);
        if common {
            p.geq(format!("common_nonneg_{g}"), c[g], 0.0);
            have = have + c[g];
        }
        p.geq(format!("qos_{g}"), have, s.qos_threshold);
    }
    p.leq("power", power, s.transmit_power());
    if let Some(w) = w_c {
        p.psd("psd_common", w);
    }
    for (g, &w) in w_m.iter().enumerate() {
        p.psd(format!("psd_{g}"), w);
    }

    Subproblem {
        program: p,
        vars: SubVars {
            w_c,
            w_m,
            x,
            y,
            z,
            c,
            r,
            eta_c,
            chi_c,
            t_c,
            eta_p,
            chi_p,
            t_p,
        },
    }
}

/// The state's own point expressed in subproblem variables.
pub fn state_values(state: &ScaState, vars: &SubVars, program: &ConicProgram) -> ConicValues {
    let mut v = ConicValues::zeros(program);
    if let Some(w) = vars.w_c {
        v.set_matrix(w, state.lifted_common.clone());
    }
    for (&w, val) in vars.w_m.iter().zip(&state.lifted_private) {
        v.set_matrix(w, val.clone());
    }
    for (var, val) in [(vars.x, state.x), (vars.y, state.y), (vars.z, state.z)] {
        if let Some(var) = var {
            v.set_scalar(var, val);
        }
    }
    let pairs: [(&[ScalarVar], &[f64]); 8] = [
        (&vars.c, &state.c_alloc),
        (&vars.r, &state.group_rates),
        (&vars.eta_c, &state.eta_c),
        (&vars.chi_c, &state.chi_c),
        (&vars.t_c, &state.t_c),
        (&vars.eta_p, &state.eta_p),
        (&vars.chi_p, &state.chi_p),
        (&vars.t_p, &state.t_p),
    ];
    for (vs, xs) in pairs {
        for (&var, &val) in vs.iter().zip(xs) {
            v.set_scalar(var, val);
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::Constraint;
    use crate::linalg::C64;
    use crate::optimizer::bounds::fractional_bound;
    use crate::optimizer::init;
    use crate::scenario::SicMode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (Scenario, CsitStatistics) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = Scenario::desk();
        let h: Vec<CVector> = (0..6)
            .map(|k| {
                CVector::from_fn(3, |i, _| {
                    let amp = if i == k / 2 { 1.0 } else { 0.3 };
                    C64::from_polar(amp, rng.gen_range(0.0..std::f64::consts::TAU))
                })
            })
            .collect();
        let stats = CsitStatistics::from_estimates(&h, s.phase_err_var);
        (s, stats)
    }

    #[test]
    fn tangency_at_current_point() {
        let (s, stats) = setup(1);
        let st = init(&s, &stats, SicMode::Rsma, ObjectiveMode::Ee).unwrap();
        assert!((fractional_bound(st.x, st.y, st.x, st.y) - st.x * st.x / st.y).abs() < 1e-15);
        let sub = build_subproblem(&st, &stats, &s);
        let vals = state_values(&st, &sub.vars, &sub.program);
        let Some(Constraint::Geq(e)) = sub.program.find("fractional") else {
            panic!("missing fractional constraint")
        };
        // Ω(x⁰, y⁰) − z⁰ = 0 at a self-consistent point
        assert!(e.eval(&vals).abs() < 1e-12);
    }

    #[test]
    fn sdma_has_no_common_parts() {
        let (s, stats) = setup(2);
        let st = init(&s, &stats, SicMode::Sdma, ObjectiveMode::Ee).unwrap();
        let sub = build_subproblem(&st, &stats, &s);
        assert!(sub.vars.w_c.is_none() && sub.vars.c.is_empty());
        assert_eq!(sub.program.matrix_dims().len(), 3);
        assert!(sub
            .program
            .constraints()
            .iter()
            .all(|c| !c.label.starts_with("common")));
    }

    #[test]
    fn wsr_drops_fraction_slacks() {
        let (s, stats) = setup(3);
        let st = init(&s, &stats, SicMode::Rsma, ObjectiveMode::Wsr).unwrap();
        let sub = build_subproblem(&st, &stats, &s);
        assert!(sub.vars.x.is_none() && sub.program.find("fractional").is_none());
    }

    #[test]
    fn feasible_points_respect_true_rates() {
        use crate::conic::{ClarabelSolver, ConicSolver, SolveStatus};
        use crate::linalg::trace_product;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut s = Scenario::desk();
        s.n_antennas = 2;
        s.n_groups = 2;
        s.users_per_group = 1;
        s.group_map = vec![0, 1];
        let h: Vec<CVector> = (0..2)
            .map(|k| {
                CVector::from_fn(2, |i, _| {
                    C64::from_polar(
                        if i == k { 1.0 } else { 0.3 },
                        rng.gen_range(0.0..std::f64::consts::TAU),
                    )
                })
            })
            .collect();
        let stats = CsitStatistics::from_estimates(&h, s.phase_err_var);
        let st = init(&s, &stats, SicMode::Rsma, ObjectiveMode::Ee).unwrap();
        let solver = ClarabelSolver::default();
        let mut checked = 0;
        for _ in 0..1000 {
            let mut sub = build_subproblem(&st, &stats, &s);
            let vars = sub.vars.clone();
            let mut obj = LinExpr::zero();
            for i in 0..sub.program.n_scalars() {
                let v = ScalarVar(i);
                let w: f64 = rng.gen_range(-1.0..1.0);
                let w = if Some(v) == vars.y {
                    -w.abs()
                } else if Some(v) == vars.z {
                    w.abs()
                } else {
                    w
                };
                obj = obj + LinExpr::term(v, w);
            }
            for &w in vars.w_c.iter().chain(&vars.w_m) {
                let a = CMatrix::from_fn(2, 2, |_, _| {
                    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                obj = obj + LinExpr::trace_with(a.clone() + a.adjoint(), w);
            }
            sub.program.maximize(obj);
            let sol = solver.solve(&sub.program).unwrap();
            if sol.status != SolveStatus::Optimal {
                continue;
            }
            checked += 1;
            let val = &sol.values;
            let wc = val.matrix(vars.w_c.unwrap());
            let tol = 1e-6;
            for (k, hb) in stats.hbar_mat.iter().enumerate() {
                let private: Vec<f64> = vars
                    .w_m
                    .iter()
                    .map(|&w| trace_product(hb, val.matrix(w)))
                    .collect();
                let all = private.iter().sum::<f64>() + s.noise_var;
                let interference = all - private[s.group_map[k]];
                let common_total = trace_product(hb, wc) + all;
                assert!(val.scalar(vars.eta_c[k]).exp() <= common_total * (1.0 + tol));
                assert!(val.scalar(vars.chi_c[k]).exp() >= all * (1.0 - tol));
                assert!(val.scalar(vars.eta_p[k]).exp() <= all * (1.0 + tol));
                assert!(val.scalar(vars.chi_p[k]).exp() >= interference * (1.0 - tol));
            }
        }
        assert!(checked >= 900, "only {checked} optimal samples");
    }
}
