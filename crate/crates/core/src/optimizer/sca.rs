//! The outer SCA loop.

use std::io::{self, Write};

use super::subproblem::{build_subproblem, SubVars};
use super::{
    init, project_rank_one, rank_ratio, OptimizerError, ScaState, Solution, ASCENT_TOL,
    CONVERGED_RANK_TOL, POWER_FLOOR, QOS_TOL,
};
use crate::conic::{ClarabelSolver, ConicSolution, ConicSolver, SolveStatus};
use crate::csit::CsitStatistics;
use crate::linalg::{top_eigenpair, trace_re, CMatrix, CVector, C64};
use crate::rates::{evaluate, RateModel};
use crate::scenario::{ObjectiveMode, Scenario, SicMode};

/// Attempts with a blended linearization point after a failed subproblem.
const MAX_BLEND_RETRIES: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    /// Iteration the solve belongs to (the accepted one is `iter`).
    pub iter: usize,
    pub z: f64,
    pub subproblem_value: f64,
    pub rho: f64,
    pub rank_ratio: f64,
    pub accepted: bool,
    /// `min_m (C_m + R̄_m − R_th)` at the accepted point.
    pub qos_slack: f64,
    /// `P_t − tr(W)` at the accepted point.
    pub power_slack: f64,
}

fn matrices(sol: &ConicSolution, vars: &SubVars, n: usize) -> (CMatrix, Vec<CMatrix>) {
    let w_c = vars
        .w_c
        .map(|w| sol.values.matrix(w).clone())
        .unwrap_or_else(|| CMatrix::zeros(n, n));
    let w_m = vars
        .w_m
        .iter()
        .map(|&w| sol.values.matrix(w).clone())
        .collect();
    (w_c, w_m)
}

/// Eigenvector for the next penalty; switched-off matrices keep the old one.
fn next_eig(w: &CMatrix, old: &CVector, p_t: f64) -> CVector {
    if trace_re(w) < POWER_FLOOR * p_t {
        old.clone()
    } else {
        top_eigenpair(w).1
    }
}

fn rebuild(
    s: &Scenario,
    stats: &CsitStatistics,
    from: &ScaState,
    w_c: CMatrix,
    w_m: Vec<CMatrix>,
    hint: Option<&[f64]>,
) -> ScaState {
    let p_t = s.transmit_power();
    let mut st = ScaState::at_point(s, stats, from.sic, from.objective, w_c, w_m, hint);
    st.eig_c = next_eig(&st.lifted_common, &from.eig_c, p_t);
    st.eig_m = st
        .lifted_private
        .iter()
        .zip(&from.eig_m)
        .map(|(w, old)| next_eig(w, old, p_t))
        .collect();
    st.iter = from.iter;
    st.penalty_rho = from.penalty_rho;
    st.penalty_scale = from.penalty_scale;
    st.objective_trace = from.objective_trace.clone();
    st.penalty_trace = from.penalty_trace.clone();
    st.log = from.log.clone();
    st.solves = from.solves;
    st
}

fn qos_slack(st: &ScaState, s: &Scenario) -> f64 {
    st.c_alloc
        .iter()
        .zip(&st.group_rates)
        .map(|(c, r)| c + r - s.qos_threshold)
        .fold(f64::INFINITY, f64::min)
}

fn subproblem_solver() -> ClarabelSolver {
    ClarabelSolver::default()
}

pub fn step(
    state: &ScaState,
    stats: &CsitStatistics,
    s: &Scenario,
) -> Result<ScaState, OptimizerError> {
    step_with(&subproblem_solver(), state, stats, s, None)
}

/// One accepted SCA iteration.
///
/// The solved matrices are projected onto rank one and every slack is
/// re-anchored on the projected beamformers, which become the next
/// linearization point. If the projection would lower `z` or miss a QoS
/// target, the solution is rejected, `ρ` grows by `penalty_growth` (up to `penalty_max`) and the same
/// subproblem is solved again. After an accepted step `ρ` also grows while the
/// relative rank-one residual stays above [`CONVERGED_RANK_TOL`]. A failed solve is retried from the
/// midpoint between the current point and `previous` (when given).
pub fn step_with<S: ConicSolver>(
    solver: &S,
    state: &ScaState,
    stats: &CsitStatistics,
    s: &Scenario,
    previous: Option<&ScaState>,
) -> Result<ScaState, OptimizerError> {
    let p_t = s.transmit_power();
    let n = stats.n_antennas();
    let mut anchor = state.clone();
    let mut retries = 0;
    loop {
        let sub = build_subproblem(&anchor, stats, s);
        let sol = solver.solve(&sub.program)?;
        anchor.solves += 1;
        if sol.status != SolveStatus::Optimal {
            let Some(prev) = previous.filter(|_| retries < MAX_BLEND_RETRIES) else {
                return Err(OptimizerError::Solver {
                    status: sol.status,
                    state: Box::new(anchor),
                });
            };
            retries += 1;
            let half = C64::new(0.5, 0.0);
            let w_c = (&anchor.lifted_common + &prev.lifted_common) * half;
            let w_m = anchor
                .lifted_private
                .iter()
                .zip(&prev.lifted_private)
                .map(|(a, b)| (a + b) * half)
                .collect();
            let c = anchor.c_alloc.clone();
            anchor = rebuild(s, stats, &anchor, w_c, w_m, Some(&c));
            continue;
        }

        let (w_c, w_m) = matrices(&sol, &sub.vars, n);
        let ratio = rank_ratio(sub.vars.w_c.map(|_| &w_c), &w_m, p_t);
        let hint: Vec<f64> = sub.vars.c.iter().map(|&c| sol.values.scalar(c)).collect();
        let w_c = if sub.vars.w_c.is_some() {
            project_rank_one(&w_c)
        } else {
            w_c
        };
        let w_m = w_m.iter().map(project_rank_one).collect();
        let mut next = rebuild(
            s,
            stats,
            &anchor,
            w_c,
            w_m,
            (!hint.is_empty()).then_some(&hint[..]),
        );
        let mut record = TraceRecord {
            iter: anchor.iter + 1,
            z: next.z,
            subproblem_value: sol.objective_value,
            rho: anchor.penalty_rho,
            rank_ratio: ratio,
            accepted: false,
            qos_slack: qos_slack(&next, s),
            power_slack: p_t - next.transmit_power(),
        };
        let capped = anchor.penalty_rho >= s.penalty_max;
        let descends = next.z < anchor.z - ASCENT_TOL * anchor.z.abs().max(1.0);
        if (descends || next.qos_shortfall > QOS_TOL) && !capped {
            anchor.log.push(record);
            anchor.penalty_rho = (anchor.penalty_rho * s.penalty_growth).min(s.penalty_max);
            continue;
        }

        next.iter += 1;
        if ratio > CONVERGED_RANK_TOL {
            next.penalty_rho = (next.penalty_rho * s.penalty_growth).min(s.penalty_max);
        }
        record.accepted = true;
        next.log.push(record);
        next.objective_trace.push(next.z);
        next.penalty_trace.push(ratio);
        return Ok(next);
    }
}

/// Full run: [`init`], then steps until `|Δz| ≤ ε` with rank-one iterates
/// or `max_iters`.
///
/// With a common stream two runs compete and the better end point wins: one
/// from the configured common share, and one that first converges without a
/// common stream and then continues with it from `W_c = 0, C = 0`. The
/// second run never ends below the private-only solution, since that point
/// stays feasible for every later subproblem. Both runs share one iteration
/// budget each.
///
/// In sum-rate mode the final beamformers are scaled up to the full power
/// budget, which cannot lower any rate.
pub fn solve_with<S: ConicSolver>(
    solver: &S,
    s: &Scenario,
    stats: &CsitStatistics,
    sic: SicMode,
    objective: ObjectiveMode,
) -> Result<Solution, OptimizerError> {
    if sic == SicMode::Sdma {
        let (state, converged) = run_from(solver, s, stats, init(s, stats, sic, objective)?)?;
        return Ok(finish(s, stats, state, converged));
    }
    let (direct, direct_conv) = run_from(solver, s, stats, init(s, stats, sic, objective)?)?;
    let (private, _) = run_from(solver, s, stats, init(s, stats, SicMode::Sdma, objective)?)?;
    let (staged, staged_conv) = run_from(solver, s, stats, add_common_stream(s, stats, private))?;
    let (state, converged) = if staged.z > direct.z {
        (staged, staged_conv)
    } else {
        (direct, direct_conv)
    };
    Ok(finish(s, stats, state, converged))
}

/// The same beamformers with an empty common stream; traces, penalty and the
/// iteration count carry over.
fn add_common_stream(s: &Scenario, stats: &CsitStatistics, from: ScaState) -> ScaState {
    let n = stats.n_antennas();
    let mut st = ScaState::at_point(
        s,
        stats,
        SicMode::Rsma,
        from.objective,
        CMatrix::zeros(n, n),
        from.lifted_private.clone(),
        None,
    );
    st.eig_m = from.eig_m;
    st.iter = from.iter;
    st.penalty_rho = from.penalty_rho;
    st.penalty_scale = from.penalty_scale;
    st.objective_trace = from.objective_trace;
    st.penalty_trace = from.penalty_trace;
    st.log = from.log;
    st.solves = from.solves;
    st
}

fn run_from<S: ConicSolver>(
    solver: &S,
    s: &Scenario,
    stats: &CsitStatistics,
    mut state: ScaState,
) -> Result<(ScaState, bool), OptimizerError> {
    let mut previous: Option<ScaState> = None;
    while state.iter < s.max_iters {
        let next = step_with(solver, &state, stats, s, previous.as_ref())?;
        let dz = (next.z - state.z).abs();
        let ratio = next.penalty_trace.last().copied().unwrap_or(0.0);
        previous = Some(std::mem::replace(&mut state, next));
        if dz <= s.sca_eps && ratio <= CONVERGED_RANK_TOL {
            return Ok((state, true));
        }
    }
    Ok((state, false))
}

fn finish(s: &Scenario, stats: &CsitStatistics, mut state: ScaState, converged: bool) -> Solution {
    let p_t = s.transmit_power();
    if state.objective == ObjectiveMode::Wsr {
        let used = state.transmit_power();
        if used > 0.0 && used < p_t {
            let k = C64::new(p_t / used, 0.0);
            let w_c = &state.lifted_common * k;
            let w_m = state.lifted_private.iter().map(|w| w * k).collect();
            let c = state.c_alloc.clone();
            let mut scaled = rebuild(s, stats, &state, w_c, w_m, Some(&c));
            scaled.iter = state.iter;
            state = scaled;
        }
    }
    let beamformers = state.beamformers();
    let c_alloc = state.c_alloc.clone();
    let report = evaluate(&beamformers, &c_alloc, RateModel::Statistical(stats), s);
    Solution {
        beamformers,
        c_alloc,
        report,
        state,
        converged,
    }
}

pub fn solve_ee(s: &Scenario, stats: &CsitStatistics) -> Result<Solution, OptimizerError> {
    solve_with(
        &subproblem_solver(),
        s,
        stats,
        s.sic_mode,
        ObjectiveMode::Ee,
    )
}

pub fn solve_wsr(s: &Scenario, stats: &CsitStatistics) -> Result<Solution, OptimizerError> {
    solve_with(
        &subproblem_solver(),
        s,
        stats,
        s.sic_mode,
        ObjectiveMode::Wsr,
    )
}

/// Runs with the scenario's own stream structure and objective.
pub fn solve(s: &Scenario, stats: &CsitStatistics) -> Result<Solution, OptimizerError> {
    solve_with(&subproblem_solver(), s, stats, s.sic_mode, s.objective_mode)
}

/// Per-solve trace as CSV.
pub fn write_trace<W: Write>(state: &ScaState, out: &mut W) -> io::Result<()> {
    writeln!(
        out,
        "iter,accepted,z,subproblem_value,rho,rank_ratio,qos_slack,power_slack"
    )?;
    if let Some(z0) = state.objective_trace.first() {
        writeln!(
            out,
            "0,true,{z0},,,{},,",
            state.penalty_trace.first().copied().unwrap_or(0.0)
        )?;
    }
    for r in &state.log {
        let opt = |v: f64| {
            if v.is_nan() {
                String::new()
            } else {
                v.to_string()
            }
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.iter,
            r.accepted,
            opt(r.z),
            r.subproblem_value,
            r.rho,
            r.rank_ratio,
            opt(r.qos_slack),
            opt(r.power_slack)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::ConicProgram;
    use crate::harness::draw_instance;
    use crate::linalg::rank_one_residual;

    fn desk(seed: u64, r: u64) -> (Scenario, CsitStatistics) {
        let mut s = Scenario::desk();
        s.snr_db = 20.0;
        let (_, _, stats) = draw_instance(&s, seed, r, false);
        (s, stats)
    }

    fn assert_ascent(trace: &[f64]) {
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-6, "descent {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn ee_runs_ascend_and_end_rank_one() {
        for r in 0..3 {
            let (s, stats) = desk(11, r);
            for sic in [SicMode::Rsma, SicMode::Sdma] {
                let sol = solve_with(
                    &ClarabelSolver::default(),
                    &s,
                    &stats,
                    sic,
                    ObjectiveMode::Ee,
                )
                .unwrap();
                assert!(sol.converged);
                assert_ascent(&sol.state.objective_trace);
                for w in sol
                    .state
                    .lifted_private
                    .iter()
                    .chain([&sol.state.lifted_common])
                {
                    assert!(rank_one_residual(w) <= 1e-4 * trace_re(w).max(1e-12));
                }
                assert!((sol.report.ee - sol.state.z).abs() < 1e-9 * sol.state.z);
                assert!(sol.report.is_feasible());
            }
        }
    }

    #[test]
    fn rsma_keeps_up_with_sdma() {
        let (s, stats) = desk(12, 0);
        let rsma = solve_with(
            &ClarabelSolver::default(),
            &s,
            &stats,
            SicMode::Rsma,
            ObjectiveMode::Ee,
        )
        .unwrap();
        let sdma = solve_with(
            &ClarabelSolver::default(),
            &s,
            &stats,
            SicMode::Sdma,
            ObjectiveMode::Ee,
        )
        .unwrap();
        assert!(rsma.report.ee >= sdma.report.ee - 1e-4);
    }

    #[test]
    fn converged_point_is_a_fixed_point() {
        let (mut s, _) = desk(13, 0);
        s.phase_err_var = 0.0;
        s.sca_eps = 1e-10;
        s.max_iters = 400;
        let (_, _, stats) = draw_instance(&s, 13, 0, false);
        let sol = solve_with(
            &ClarabelSolver::default(),
            &s,
            &stats,
            SicMode::Sdma,
            ObjectiveMode::Ee,
        )
        .unwrap();
        let next = step(&sol.state, &stats, &s).unwrap();
        assert!((next.z - sol.state.z).abs() <= 1e-6);
    }

    #[test]
    fn more_power_never_hurts_much() {
        let (mut s, stats0) = desk(14, 1);
        let mut last = f64::NEG_INFINITY;
        for snr in [10.0, 20.0, 30.0] {
            s.snr_db = snr;
            let sol = solve_with(
                &ClarabelSolver::default(),
                &s,
                &stats0,
                SicMode::Rsma,
                ObjectiveMode::Ee,
            )
            .unwrap();
            assert!(
                sol.report.ee >= last - 1e-4,
                "{snr} dB: {} < {last}",
                sol.report.ee
            );
            last = sol.report.ee;
        }
    }

    #[test]
    fn sum_rate_mode_uses_full_power_and_more_rate() {
        let (mut s, stats) = desk(15, 0);
        s.snr_db = 25.0;
        let wsr = solve_with(
            &ClarabelSolver::default(),
            &s,
            &stats,
            SicMode::Rsma,
            ObjectiveMode::Wsr,
        )
        .unwrap();
        let ee = solve_with(
            &ClarabelSolver::default(),
            &s,
            &stats,
            SicMode::Rsma,
            ObjectiveMode::Ee,
        )
        .unwrap();
        assert!((wsr.beamformers.transmit_power() - s.transmit_power()).abs() < 1e-6);
        assert!(wsr.report.ee <= ee.report.ee + 1e-4);

        s.snr_db = 5.0;
        let wsr = solve_with(
            &ClarabelSolver::default(),
            &s,
            &stats,
            SicMode::Rsma,
            ObjectiveMode::Wsr,
        )
        .unwrap();
        let ee = solve_with(
            &ClarabelSolver::default(),
            &s,
            &stats,
            SicMode::Rsma,
            ObjectiveMode::Ee,
        )
        .unwrap();
        assert!(wsr.report.total_rate >= ee.report.total_rate - 1e-4);
    }

    struct Refuses;

    impl ConicSolver for Refuses {
        fn solve(&self, p: &ConicProgram) -> Result<ConicSolution, crate::conic::ConicError> {
            Ok(ConicSolution {
                status: SolveStatus::Infeasible,
                objective_value: f64::NAN,
                values: crate::conic::ConicValues::zeros(p),
                solver_tolerance: 0.0,
                iterations: 0,
            })
        }
    }

    #[test]
    fn solver_failure_carries_the_state() {
        let (s, stats) = desk(16, 0);
        let st = init(&s, &stats, SicMode::Rsma, ObjectiveMode::Ee).unwrap();
        match step_with(&Refuses, &st, &stats, &s, None) {
            Err(OptimizerError::Solver { status, state }) => {
                assert_eq!(status, SolveStatus::Infeasible);
                assert_eq!(state.solves, 1);
                assert_eq!(state.z, st.z);
            }
            other => panic!("{other:?}"),
        }
        // with a previous point the midpoint is retried before giving up
        let prev = init(&s, &stats, SicMode::Sdma, ObjectiveMode::Ee).unwrap();
        let prev = add_common_stream(&s, &stats, prev);
        match step_with(&Refuses, &st, &stats, &s, Some(&prev)) {
            Err(OptimizerError::Solver { state, .. }) => {
                assert_eq!(state.solves, 1 + MAX_BLEND_RETRIES)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn trace_csv_has_one_line_per_solve() {
        let (s, stats) = desk(17, 0);
        let sol = solve_with(
            &ClarabelSolver::default(),
            &s,
            &stats,
            SicMode::Sdma,
            ObjectiveMode::Ee,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_trace(&sol.state, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2 + sol.state.log.len());
        assert!(text.starts_with("iter,accepted,z,"));
    }
}
