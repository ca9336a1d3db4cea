//! Rank-one extraction and the common-rate split.

use crate::linalg::{top_eigenpair, CMatrix, CVector};

/// `√λ_max · v_max`, with the largest-magnitude entry of `v_max` real and
/// nonnegative. Ties in `λ_max` go to the lowest eigensolver index.
pub fn extract_rank_one(w: &CMatrix) -> CVector {
    let (lambda, v) = top_eigenpair(w);
    if lambda <= 0.0 {
        return CVector::zeros(w.nrows());
    }
    v.scale(lambda.sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rebalance {
    pub alloc: Vec<f64>,
    /// `max(0, Σ_m d_m − R̄_c)` with `d_m = max(0, R_th − R̄_m)`; zero iff QoS
    /// can be met.
    pub shortfall: f64,
}

/// Splits a common rate `R̄_c` among groups.
///
/// Each group first receives its QoS deficit `max(0, R_th − R̄_m)`; what is
/// left goes out in proportion to `hint` (equal shares when the hint is
/// absent or sums to zero). When the deficits exceed `R̄_c` they are scaled
/// down proportionally and the shortfall is reported.
pub fn rebalance_common(
    common_rate: f64,
    group_rates: &[f64],
    qos: f64,
    hint: Option<&[f64]>,
) -> Rebalance {
    let m = group_rates.len();
    let rc = common_rate.max(0.0);
    let deficits: Vec<f64> = group_rates.iter().map(|&r| (qos - r).max(0.0)).collect();
    let need: f64 = deficits.iter().sum();
    if need > rc {
        let k = if need > 0.0 { rc / need } else { 0.0 };
        return Rebalance {
            alloc: deficits.iter().map(|d| d * k).collect(),
            shortfall: need - rc,
        };
    }
    let spare = rc - need;
    let weights: Vec<f64> = match hint {
        Some(h) if h.iter().map(|v| v.max(0.0)).sum::<f64>() > 0.0 => {
            h.iter().map(|v| v.max(0.0)).collect()
        }
        _ => vec![1.0; m],
    };
    let total: f64 = weights.iter().sum();
    let mut alloc: Vec<f64> = deficits
        .iter()
        .zip(&weights)
        .map(|(d, w)| d + spare * w / total)
        .collect();
    // keep Σ C_m ≤ R̄_c under rounding
    let sum: f64 = alloc.iter().sum();
    if sum > rc && sum > 0.0 {
        for a in &mut alloc {
            *a *= rc / sum;
        }
    }
    Rebalance {
        alloc,
        shortfall: 0.0,
    }
}
