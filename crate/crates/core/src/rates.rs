//! SINRs, rates, power consumption and energy efficiency.
//!
//! Every user first decodes the common stream treating all private streams as
//! noise, removes it, then decodes its group's private stream treating other
//! groups as noise. Rates are in bit/s/Hz.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::csit::CsitStatistics;
use crate::linalg::{outer, trace_product, trace_re, CMatrix, CVector, C64};
use crate::optimizer::extract_rank_one;
use crate::scenario::Scenario;

/// Slack allowed on `Σ C_m ≤ R̄_c` before a report is marked infeasible.
pub const COMMON_RATE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct BeamformerSet {
    pub w_common: CVector,
    pub w_private: Vec<CVector>,
    pub lifted_common: CMatrix,
    pub lifted_private: Vec<CMatrix>,
}

impl BeamformerSet {
    pub fn from_vectors(w_common: CVector, w_private: Vec<CVector>) -> Self {
        let lifted_common = outer(&w_common);
        let lifted_private = w_private.iter().map(outer).collect();
        BeamformerSet {
            w_common,
            w_private,
            lifted_common,
            lifted_private,
        }
    }

    /// Private beams only; the common beam is zero.
    pub fn sdma(w_private: Vec<CVector>) -> Self {
        let n = w_private.first().map_or(0, |w| w.len());
        Self::from_vectors(CVector::zeros(n), w_private)
    }

    /// Keeps the lifted matrices and fills the vectors with their principal
    /// rank-one factors.
    pub fn from_lifted(lifted_common: CMatrix, lifted_private: Vec<CMatrix>) -> Self {
        BeamformerSet {
            w_common: extract_rank_one(&lifted_common),
            w_private: lifted_private.iter().map(extract_rank_one).collect(),
            lifted_common,
            lifted_private,
        }
    }

    pub fn zeros(n_antennas: usize, n_groups: usize) -> Self {
        Self::sdma(vec![CVector::zeros(n_antennas); n_groups])
    }

    pub fn n_groups(&self) -> usize {
        self.w_private.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.w_common.len()
    }

    /// `tr(W_c) + Σ tr(W_m)`.
    pub fn transmit_power(&self) -> f64 {
        trace_re(&self.lifted_common) + self.lifted_private.iter().map(trace_re).sum::<f64>()
    }

    /// `‖W_c − w_c w_cᴴ‖_F` and the same for each private beam, the largest.
    pub fn lift_mismatch(&self) -> f64 {
        let c = crate::linalg::frobenius(&(&self.lifted_common - outer(&self.w_common)));
        self.w_private
            .iter()
            .zip(&self.lifted_private)
            .map(|(w, l)| crate::linalg::frobenius(&(l - outer(w))))
            .fold(c, f64::max)
    }
}

fn gain(h: &CVector, w: &CVector) -> f64 {
    h.dotc(w).norm_sqr()
}

/// `|hᴴw_c|² / (Σ_m |hᴴw_m|² + σ²)`.
pub fn sinr_common(h: &CVector, bf: &BeamformerSet, noise_var: f64) -> f64 {
    let interference: f64 = bf.w_private.iter().map(|w| gain(h, w)).sum();
    gain(h, &bf.w_common) / (interference + noise_var)
}

/// `|hᴴw_g|² / (Σ_{m≠g} |hᴴw_m|² + σ²)` for a user of group `g`.
pub fn sinr_private(h: &CVector, bf: &BeamformerSet, group: usize, noise_var: f64) -> f64 {
    let interference: f64 = bf
        .w_private
        .iter()
        .enumerate()
        .filter(|(m, _)| *m != group)
        .map(|(_, w)| gain(h, w))
        .sum();
    gain(h, &bf.w_private[group]) / (interference + noise_var)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErgodicEstimate {
    pub common: f64,
    pub private: f64,
    pub common_se: f64,
    pub private_se: f64,
}

/// Sample mean of `log₂(1+Γ)` over phase errors `e ~ N(0, δ²I)` applied to
/// the estimated channel.
pub fn ergodic_rate_mc<R: rand::Rng + ?Sized>(
    h_est: &CVector,
    bf: &BeamformerSet,
    group: usize,
    delta2: f64,
    noise_var: f64,
    n_samples: usize,
    rng: &mut R,
) -> ErgodicEstimate {
    assert!(n_samples >= 1, "n_samples must be positive");
    if delta2 == 0.0 {
        return ErgodicEstimate {
            common: (1.0 + sinr_common(h_est, bf, noise_var)).log2(),
            private: (1.0 + sinr_private(h_est, bf, group, noise_var)).log2(),
            common_se: 0.0,
            private_se: 0.0,
        };
    }
    let sd = delta2.sqrt();
    let (mut sc, mut sc2, mut sp, mut sp2) = (0.0, 0.0, 0.0, 0.0);
    let mut h = h_est.clone();
    for _ in 0..n_samples {
        for (hi, hb) in h.iter_mut().zip(h_est.iter()) {
            let e: f64 = StandardNormal.sample(rng);
            *hi = hb * C64::from_polar(1.0, sd * e);
        }
        let rc = (1.0 + sinr_common(&h, bf, noise_var)).log2();
        let rp = (1.0 + sinr_private(&h, bf, group, noise_var)).log2();
        sc += rc;
        sc2 += rc * rc;
        sp += rp;
        sp2 += rp * rp;
    }
    let n = n_samples as f64;
    let se = |s: f64, s2: f64| ((s2 / n - (s / n).powi(2)).max(0.0) / n).sqrt();
    ErgodicEstimate {
        common: sc / n,
        private: sp / n,
        common_se: se(sc, sc2),
        private_se: se(sp, sp2),
    }
}

/// Expectation-inside-the-log rates from the effective channel `H̄ₖ`:
/// `(R̄_c,k, R̄_p,k)`.
pub fn approx_rate(hbar: &CMatrix, bf: &BeamformerSet, group: usize, noise_var: f64) -> (f64, f64) {
    let private: Vec<f64> = bf
        .lifted_private
        .iter()
        .map(|w| trace_product(hbar, w))
        .collect();
    let interference_c: f64 = private.iter().sum();
    let interference_p = interference_c - private[group];
    let signal_c = trace_product(hbar, &bf.lifted_common);
    let common = ((signal_c + interference_c + noise_var) / (interference_c + noise_var)).log2();
    let private =
        ((private[group] + interference_p + noise_var) / (interference_p + noise_var)).log2();
    (common, private)
}

/// `P̄ = (tr W_c + Σ tr W_m)/β + P_c + ξ R̄`.
pub fn power_total(bf: &BeamformerSet, s: &Scenario, total_rate: f64) -> f64 {
    bf.transmit_power() / s.amp_efficiency + s.circuit_power_w + s.rate_power_coeff * total_rate
}

/// How per-user rates are obtained when evaluating a beamformer set.
#[derive(Clone, Copy, Debug)]
pub enum RateModel<'a> {
    /// Deterministic `log₂(1+Γ)` on given channel vectors.
    Instantaneous(&'a [CVector]),
    /// [`approx_rate`] on the CSIT statistics.
    Statistical(&'a CsitStatistics),
    /// [`ergodic_rate_mc`] around estimated channels, seeded.
    MonteCarlo {
        h_est: &'a [CVector],
        delta2: f64,
        samples: usize,
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub common_sinr: Vec<f64>,
    pub private_sinr: Vec<f64>,
    pub user_common_rates: Vec<f64>,
    pub user_private_rates: Vec<f64>,
    /// `min_k R̄_c,k`.
    pub common_rate: f64,
    pub common_alloc: Vec<f64>,
    /// `R̄_m = min_{k∈G_m} R̄_p,k`.
    pub group_rates: Vec<f64>,
    /// `Σ_m (C_m + R̄_m)`.
    pub total_rate: f64,
    pub total_power: f64,
    pub ee: f64,
    /// `Σ C_m ≤ R̄_c` (with [`COMMON_RATE_TOL`]) and every `C_m ≥ 0`.
    pub common_feasible: bool,
    /// Groups with `C_m + R̄_m < R_th`.
    pub qos_violations: Vec<usize>,
}

impl RateReport {
    pub fn is_feasible(&self) -> bool {
        self.common_feasible && self.qos_violations.is_empty()
    }
}

/// Per-user `(R̄_c,k, R̄_p,k)` under a rate model.
pub fn user_rates(bf: &BeamformerSet, model: RateModel<'_>, s: &Scenario) -> Vec<(f64, f64)> {
    let sigma2 = s.noise_var;
    match model {
        RateModel::Instantaneous(h) => h
            .iter()
            .zip(&s.group_map)
            .map(|(h, &g)| {
                (
                    (1.0 + sinr_common(h, bf, sigma2)).log2(),
                    (1.0 + sinr_private(h, bf, g, sigma2)).log2(),
                )
            })
            .collect(),
        RateModel::Statistical(stats) => stats
            .hbar_mat
            .iter()
            .zip(&s.group_map)
            .map(|(hb, &g)| approx_rate(hb, bf, g, sigma2))
            .collect(),
        RateModel::MonteCarlo {
            h_est,
            delta2,
            samples,
            seed,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            h_est
                .iter()
                .zip(&s.group_map)
                .map(|(h, &g)| {
                    let e = ergodic_rate_mc(h, bf, g, delta2, sigma2, samples, &mut rng);
                    (e.common, e.private)
                })
                .collect()
        }
    }
}

/// Full report for a beamformer set and common-rate allocation.
///
/// Infeasibility (common split above the weakest user's rate, or a QoS miss)
/// is flagged in the report, never raised.
pub fn evaluate(
    bf: &BeamformerSet,
    c_alloc: &[f64],
    model: RateModel<'_>,
    s: &Scenario,
) -> RateReport {
    let rates = user_rates(bf, model, s);
    let user_common_rates: Vec<f64> = rates.iter().map(|r| r.0).collect();
    let user_private_rates: Vec<f64> = rates.iter().map(|r| r.1).collect();
    let sinr = |r: f64| 2f64.powf(r) - 1.0;
    let (common_sinr, private_sinr) = match model {
        RateModel::Instantaneous(h) => (
            h.iter().map(|h| sinr_common(h, bf, s.noise_var)).collect(),
            h.iter()
                .zip(&s.group_map)
                .map(|(h, &g)| sinr_private(h, bf, g, s.noise_var))
                .collect(),
        ),
        _ => (
            user_common_rates.iter().map(|&r| sinr(r)).collect(),
            user_private_rates.iter().map(|&r| sinr(r)).collect(),
        ),
    };

    let common_rate = user_common_rates
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let common_rate = if common_rate.is_finite() {
        common_rate
    } else {
        0.0
    };
    let mut group_rates = vec![f64::INFINITY; s.n_groups];
    for (k, &g) in s.group_map.iter().enumerate() {
        group_rates[g] = group_rates[g].min(user_private_rates[k]);
    }
    for r in &mut group_rates {
        if !r.is_finite() {
            *r = 0.0;
        }
    }
    let total_rate: f64 = c_alloc.iter().sum::<f64>() + group_rates.iter().sum::<f64>();
    let total_power = power_total(bf, s, total_rate);
    let ee = if total_power > 0.0 {
        total_rate / total_power
    } else {
        0.0
    };
    let common_sum: f64 = c_alloc.iter().sum();
    let common_feasible =
        common_sum <= common_rate + COMMON_RATE_TOL && c_alloc.iter().all(|&c| c >= 0.0);
    let qos_violations = (0..s.n_groups)
        .filter(|&m| c_alloc.get(m).copied().unwrap_or(0.0) + group_rates[m] < s.qos_threshold)
        .collect();

    RateReport {
        common_sinr,
        private_sinr,
        user_common_rates,
        user_private_rates,
        common_rate,
        common_alloc: c_alloc.to_vec(),
        group_rates,
        total_rate,
        total_power,
        ee,
        common_feasible,
        qos_violations,
    }
}
