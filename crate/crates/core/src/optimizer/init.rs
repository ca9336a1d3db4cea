//! Feasible starting point.

use super::{OptimizerError, ScaState, PENALTY_UNIT};
use crate::csit::CsitStatistics;
use crate::linalg::{outer, top_eigenpair, CMatrix, C64};
use crate::scenario::{ObjectiveMode, Scenario, SicMode};

const MAX_QOS_RETRIES: usize = 20;
const BOOST: f64 = 2.0;

/// Matched beams at full power.
///
/// `W_m` points along the dominant eigenvector of `Σ_{k∈G_m} H̄ₖ` and `W_c`
/// along that of `Σₖ H̄ₖ`. A share `init_common_share` of `P_t` goes to the
/// common beam (none without a common stream), the rest is split equally over
/// the groups. If some group misses its QoS target even after the common rate
/// is steered towards it, the private power of the failing groups is doubled
/// (renormalizing the private budget) and the check repeats.
pub fn init(
    s: &Scenario,
    stats: &CsitStatistics,
    sic: SicMode,
    objective: ObjectiveMode,
) -> Result<ScaState, OptimizerError> {
    init_with_share(s, stats, sic, objective, s.init_common_share)
}

/// [`init`] with an explicit common-beam power share.
pub fn init_with_share(
    s: &Scenario,
    stats: &CsitStatistics,
    sic: SicMode,
    objective: ObjectiveMode,
    share: f64,
) -> Result<ScaState, OptimizerError> {
    s.validate().map_err(OptimizerError::InvalidScenario)?;
    let n = stats.n_antennas();
    let m = s.n_groups;
    let p_t = s.transmit_power();

    let mut total = CMatrix::zeros(n, n);
    let mut dirs = Vec::with_capacity(m);
    for g in 0..m {
        let mut acc = CMatrix::zeros(n, n);
        for k in s.group_members(g) {
            acc += &stats.hbar_mat[k];
        }
        total += &acc;
        dirs.push(outer(&top_eigenpair(&acc).1));
    }
    let (common_share, common_dir) = match sic {
        SicMode::Rsma => (share, outer(&top_eigenpair(&total).1)),
        SicMode::Sdma => (0.0, CMatrix::zeros(n, n)),
    };
    let w_c = &common_dir * C64::new(common_share * p_t, 0.0);
    let private_budget = (1.0 - common_share) * p_t;
    let mut weights = vec![1.0; m];

    let mut state = None;
    for _ in 0..=MAX_QOS_RETRIES {
        let wsum: f64 = weights.iter().sum();
        let w_m: Vec<CMatrix> = dirs
            .iter()
            .zip(&weights)
            .map(|(d, w)| d * C64::new(private_budget * w / wsum, 0.0))
            .collect();
        let st = ScaState::at_point(s, stats, sic, objective, w_c.clone(), w_m, None);
        if st.qos_shortfall == 0.0 {
            state = Some(st);
            break;
        }
        for (g, w) in weights.iter_mut().enumerate() {
            if st.c_alloc[g] + st.group_rates[g] < s.qos_threshold {
                *w *= BOOST;
            }
        }
        state = Some(st);
    }
    let mut state = state.expect("at least one attempt");
    if state.qos_shortfall > 0.0 {
        return Err(OptimizerError::InitInfeasible {
            shortfall: state.qos_shortfall,
        });
    }
    state.penalty_scale = PENALTY_UNIT * state.z.abs().max(f64::MIN_POSITIVE) / p_t;
    state.objective_trace.push(state.z);
    state.penalty_trace.push(state.rank_ratio(p_t));
    Ok(state)
}
