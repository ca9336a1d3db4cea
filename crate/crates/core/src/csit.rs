//! Statistical CSIT: the phase-error coherence matrix `Q̄ = E[q qᴴ]` and the
//! per-user effective channel matrices `H̄ₖ = diag(h̄ₖ) Q̄ diag(h̄ₖ)ᴴ`.
//!
//! With i.i.d. `eᵢ ~ N(0, δ²)`, `eᵢ − eⱼ ~ N(0, 2δ²)` for `i ≠ j`, so the
//! Gaussian characteristic function gives `E[e^{j(eᵢ−eⱼ)}] = e^{−δ²}`.

use crate::linalg::{CMatrix, CVector, C64};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CsitError {
    #[error("channel has {channel} entries but Q̄ is {qbar}×{qbar}")]
    DimensionMismatch { channel: usize, qbar: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsitStatistics {
    pub qbar: CMatrix,
    pub hbar_mat: Vec<CMatrix>,
}

/// Unit diagonal, `exp(−δ²)` everywhere else.
pub fn qbar_closed_form(n: usize, delta2: f64) -> CMatrix {
    let off = (-delta2).exp();
    CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(1.0, 0.0)
        } else {
            C64::new(off, 0.0)
        }
    })
}

/// `diag(h̄) Q̄ diag(h̄)ᴴ`, i.e. entry `(i,j)` is `h̄ᵢ Q̄ᵢⱼ conj(h̄ⱼ)`.
pub fn effective_channel(h_est: &CVector, qbar: &CMatrix) -> Result<CMatrix, CsitError> {
    let n = h_est.len();
    if qbar.nrows() != n || qbar.ncols() != n {
        return Err(CsitError::DimensionMismatch {
            channel: n,
            qbar: qbar.nrows(),
        });
    }
    Ok(CMatrix::from_fn(n, n, |i, j| {
        h_est[i] * qbar[(i, j)] * h_est[j].conj()
    }))
}

impl CsitStatistics {
    pub fn from_estimates(h_est: &[CVector], delta2: f64) -> Self {
        let n = h_est.first().map_or(0, |h| h.len());
        let qbar = qbar_closed_form(n, delta2);
        let hbar_mat = h_est
            .iter()
            .map(|h| effective_channel(h, &qbar).expect("all channels share one dimension"))
            .collect();
        CsitStatistics { qbar, hbar_mat }
    }

    pub fn n_antennas(&self) -> usize {
        self.qbar.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.hbar_mat.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{min_eigenvalue, outer, trace_product};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_cvec(rng: &mut ChaCha8Rng, n: usize) -> CVector {
        CVector::from_fn(n, |_, _| {
            C64::new(
                StandardNormal.sample(&mut *rng),
                StandardNormal.sample(&mut *rng),
            )
        })
    }

    #[test]
    fn qbar_limits() {
        let q0 = qbar_closed_form(4, 0.0);
        assert!(q0.iter().all(|z| *z == C64::new(1.0, 0.0)));
        let qinf = qbar_closed_form(4, 800.0);
        assert_eq!(qinf, CMatrix::identity(4, 4));
        let q = qbar_closed_form(3, 0.1);
        assert!((q[(0, 1)].re - 0.904_837_418_035_959_6).abs() < 1e-15);
        assert!(min_eigenvalue(&q) > 0.0);
    }

    #[test]
    fn qbar_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let delta2: f64 = 0.1;
        let sd = delta2.sqrt();
        let draws = 200_000;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..draws {
            let e0: f64 = sd * rng.sample::<f64, _>(StandardNormal);
            let e1: f64 = sd * rng.sample::<f64, _>(StandardNormal);
            let re = (e0 - e1).cos();
            sum += re;
            sum2 += re * re;
        }
        let mean = sum / draws as f64;
        let se = ((sum2 / draws as f64 - mean * mean) / draws as f64).sqrt();
        let q = qbar_closed_form(2, delta2);
        assert!((mean - q[(0, 1)].re).abs() < 3.0 * se);
    }

    #[test]
    fn scalar_case() {
        let h = CVector::from_vec(vec![C64::new(0.6, -0.8)]);
        let hb = effective_channel(&h, &qbar_closed_form(1, 0.4)).unwrap();
        assert!((hb[(0, 0)].re - 1.0).abs() < 1e-15 && hb[(0, 0)].im == 0.0);
    }

    #[test]
    fn perfect_csit_gives_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_cvec(&mut rng, 3);
        let hb = effective_channel(&h, &qbar_closed_form(3, 0.0)).unwrap();
        assert_eq!(hb, outer(&h));
    }

    #[test]
    fn dimension_mismatch() {
        let h = CVector::from_vec(vec![C64::new(1.0, 0.0); 3]);
        assert_eq!(
            effective_channel(&h, &qbar_closed_form(2, 0.1)),
            Err(CsitError::DimensionMismatch {
                channel: 3,
                qbar: 2
            })
        );
    }

    #[test]
    fn diagonal_is_channel_power_and_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let h = random_cvec(&mut rng, 4);
            let d2 = rng.gen::<f64>() * 2.0;
            let hb = effective_channel(&h, &qbar_closed_form(4, d2)).unwrap();
            for i in 0..4 {
                assert!((hb[(i, i)].re - h[i].norm_sqr()).abs() < 1e-12);
            }
            assert!(min_eigenvalue(&hb) > -1e-12);
            assert!((&hb - hb.adjoint()).norm() < 1e-14);
        }
    }

    #[test]
    fn expectation_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let delta2: f64 = 0.5;
        let h_est = random_cvec(&mut rng, 3);
        let mut w = random_cvec(&mut rng, 3);
        w.unscale_mut(w.norm());
        let hb = effective_channel(&h_est, &qbar_closed_form(3, delta2)).unwrap();
        let exact = trace_product(&hb, &outer(&w));
        let draws = 100_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let h = CVector::from_fn(3, |i, _| {
                let e: f64 = delta2.sqrt() * rng.sample::<f64, _>(StandardNormal);
                h_est[i] * C64::from_polar(1.0, e)
            });
            acc += h.dotc(&w).norm_sqr();
        }
        let mc = acc / draws as f64;
        assert!(((mc - exact) / exact).abs() < 0.01, "{mc} vs {exact}");
    }
}
