//! Energy-efficiency (or sum-rate) beamforming by successive convex
//! approximation over lifted beamformers with a rank-one penalty.
//!
//! Each iteration solves a conic subproblem built around the current point:
//! the EE ratio is handled through `x²/y ≥ z` and its tangent, the rates
//! through log / exp slack chains with SOC and tangent under-estimators, and
//! `tr W − λ_max(W)` through its linearization at the current eigenvector.

use std::f64::consts::LN_2;

use crate::conic::{ConicError, SolveStatus};
use crate::csit::CsitStatistics;
use crate::linalg::{
    outer, rank_one_residual, top_eigenpair, trace_product, trace_re, CMatrix, CVector,
};
use crate::rates::{BeamformerSet, RateReport};
use crate::scenario::{ObjectiveMode, Scenario, SicMode, Violation};

pub mod bounds;
mod extract;
mod init;
mod sca;
mod subproblem;

pub use extract::{extract_rank_one, rebalance_common, Rebalance};
pub use init::{init, init_with_share};
pub use sca::{solve, solve_ee, solve_with, solve_wsr, step, step_with, write_trace, TraceRecord};
pub use subproblem::{build_subproblem, state_values, SubVars, Subproblem};

/// A projected subproblem solution may lower `z` by at most this fraction of
/// `max(|z|, 1)`; otherwise the penalty grows and the subproblem is solved
/// again.
pub const ASCENT_TOL: f64 = 1e-9;

/// Largest QoS shortfall (bit/s/Hz) an accepted projected point may carry.
pub const QOS_TOL: f64 = 1e-8;

/// `ρ = 1` charges this fraction of the initial objective per `P_t` of power
/// outside the penalty eigenvectors.
pub const PENALTY_UNIT: f64 = 1e-4;

/// Matrices carrying less than this fraction of `P_t` count as switched off.
pub const POWER_FLOOR: f64 = 1e-5;

/// Relative rank-one residual `(tr W − λ_max)/tr W` above which `ρ` keeps
/// growing; convergence also requires the accepted residual below this.
pub const CONVERGED_RANK_TOL: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct ScaState {
    pub sic: SicMode,
    pub objective: ObjectiveMode,
    pub iter: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Per-user common-stream slacks; empty without a common stream.
    pub eta_c: Vec<f64>,
    pub chi_c: Vec<f64>,
    pub t_c: Vec<f64>,
    pub eta_p: Vec<f64>,
    pub chi_p: Vec<f64>,
    pub t_p: Vec<f64>,
    pub c_alloc: Vec<f64>,
    pub group_rates: Vec<f64>,
    /// Common-rate shortfall left by [`rebalance_common`] at this point.
    pub qos_shortfall: f64,
    pub lifted_common: CMatrix,
    pub lifted_private: Vec<CMatrix>,
    pub penalty_rho: f64,
    /// Converts the dimensionless `ρ` into objective units.
    pub penalty_scale: f64,
    pub eig_c: CVector,
    pub eig_m: Vec<CVector>,
    /// `z` after every accepted iteration, starting with the initial point.
    pub objective_trace: Vec<f64>,
    /// Largest relative rank-one residual of each accepted subproblem
    /// solution (before projection onto rank one).
    pub penalty_trace: Vec<f64>,
    pub log: Vec<TraceRecord>,
    /// Subproblems solved so far, accepted or not.
    pub solves: usize,
}

impl ScaState {
    pub fn has_common(&self) -> bool {
        self.sic == SicMode::Rsma
    }

    pub fn n_groups(&self) -> usize {
        self.lifted_private.len()
    }

    pub fn transmit_power(&self) -> f64 {
        trace_re(&self.lifted_common) + self.lifted_private.iter().map(trace_re).sum::<f64>()
    }

    /// `Σ_m (C_m + R̄_m)` in bit/s/Hz.
    pub fn sum_rate(&self) -> f64 {
        self.c_alloc.iter().sum::<f64>() + self.group_rates.iter().sum::<f64>()
    }

    pub fn beamformers(&self) -> BeamformerSet {
        BeamformerSet::from_lifted(self.lifted_common.clone(), self.lifted_private.clone())
    }

    /// Self-consistent state at given lifted beamformers: every slack sits on
    /// its nonlinear bound, `x² = R̄`, `y = P̄`, `z = x²/y` (or `R̄` in sum-rate
    /// mode) and the common rate is split by [`rebalance_common`].
    ///
    /// Penalty settings and traces are left empty for the caller.
    pub fn at_point(
        s: &Scenario,
        stats: &CsitStatistics,
        sic: SicMode,
        objective: ObjectiveMode,
        lifted_common: CMatrix,
        lifted_private: Vec<CMatrix>,
        hint: Option<&[f64]>,
    ) -> ScaState {
        let k_users = stats.n_users();
        let m = lifted_private.len();
        let sigma2 = s.noise_var;
        let mut eta_c = Vec::new();
        let mut chi_c = Vec::new();
        let mut t_c = Vec::new();
        let mut eta_p = Vec::with_capacity(k_users);
        let mut chi_p = Vec::with_capacity(k_users);
        let mut t_p = Vec::with_capacity(k_users);
        let mut group_rates = vec![f64::INFINITY; m];
        let mut common_rate = f64::INFINITY;
        for (k, hb) in stats.hbar_mat.iter().enumerate() {
            let g = s.group_map[k];
            let private: Vec<f64> = lifted_private
                .iter()
                .map(|w| trace_product(hb, w))
                .collect();
            let all: f64 = private.iter().sum::<f64>() + sigma2;
            let interference = all - private[g];
            if sic == SicMode::Rsma {
                let total = trace_product(hb, &lifted_common) + all;
                eta_c.push(total.ln());
                chi_c.push(all.ln());
                t_c.push(total);
                common_rate = common_rate.min((total.ln() - all.ln()) / LN_2);
            }
            eta_p.push(all.ln());
            chi_p.push(interference.ln());
            t_p.push(all);
            group_rates[g] = group_rates[g].min((all.ln() - interference.ln()) / LN_2);
        }
        let (c_alloc, qos_shortfall) = if sic == SicMode::Rsma {
            let r = rebalance_common(common_rate, &group_rates, s.qos_threshold, hint);
            (r.alloc, r.shortfall)
        } else {
            let short = group_rates
                .iter()
                .map(|&r| (s.qos_threshold - r).max(0.0))
                .sum::<f64>();
            (vec![0.0; m], short)
        };
        let sum_rate = c_alloc.iter().sum::<f64>() + group_rates.iter().sum::<f64>();
        let power = trace_re(&lifted_common) + lifted_private.iter().map(trace_re).sum::<f64>();
        let y = power / s.amp_efficiency + s.circuit_power_w + s.rate_power_coeff * sum_rate;
        let x = sum_rate.max(0.0).sqrt();
        let z = match objective {
            ObjectiveMode::Ee => x * x / y,
            ObjectiveMode::Wsr => sum_rate,
        };
        ScaState {
            sic,
            objective,
            iter: 0,
            x,
            y,
            z,
            eta_c,
            chi_c,
            t_c,
            eta_p,
            chi_p,
            t_p,
            c_alloc,
            group_rates,
            qos_shortfall,
            eig_c: top_eigenpair(&lifted_common).1,
            eig_m: lifted_private.iter().map(|w| top_eigenpair(w).1).collect(),
            lifted_common,
            lifted_private,
            penalty_rho: s.penalty_init,
            penalty_scale: 1.0,
            objective_trace: Vec::new(),
            penalty_trace: Vec::new(),
            log: Vec::new(),
            solves: 0,
        }
    }

    /// Largest `(tr W − λ_max)/max(tr W, POWER_FLOOR·P_t)` over the lifted
    /// matrices (the common one only with a common stream).
    pub fn rank_ratio(&self, p_t: f64) -> f64 {
        rank_ratio(
            self.has_common().then_some(&self.lifted_common),
            &self.lifted_private,
            p_t,
        )
    }
}

pub(crate) fn rank_ratio(common: Option<&CMatrix>, private: &[CMatrix], p_t: f64) -> f64 {
    common
        .into_iter()
        .chain(private.iter())
        .map(|w| rank_one_residual(w) / trace_re(w).max(POWER_FLOOR * p_t))
        .fold(0.0, f64::max)
}

/// `λ_max v vᴴ`.
pub(crate) fn project_rank_one(w: &CMatrix) -> CMatrix {
    outer(&extract_rank_one(w))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub beamformers: BeamformerSet,
    pub c_alloc: Vec<f64>,
    /// Evaluation of the extracted beamformers at the approximated-rate level.
    pub report: RateReport,
    pub state: ScaState,
    /// `|Δz| ≤ ε` with rank-one iterates before `max_iters`.
    pub converged: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum OptimizerError {
    #[error("invalid scenario: {0:?}")]
    InvalidScenario(Vec<Violation>),
    #[error("no QoS-feasible initial point (rate shortfall {shortfall:.3e} bit/s/Hz)")]
    InitInfeasible { shortfall: f64 },
    #[error("subproblem {status} at iteration {}", state.iter)]
    Solver {
        status: SolveStatus,
        state: Box<ScaState>,
    },
    #[error(transparent)]
    Conic(#[from] ConicError),
}
