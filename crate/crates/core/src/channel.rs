//! Channel synthesis: rain fading, beam radiation pattern, link budget and
//! Gaussian phase errors.
//!
//! For user `k` and feed `n` the true channel is
//! `h[k][n] = r[k][n] · exp(jθ[k][n]) · b[k][n]`, and the transmitter only sees
//! `h̄[k][n] = h[k][n] · exp(-j e[k][n])` with `e ~ N(0, δ²)`.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::UserDrop;
use crate::linalg::{CVector, C64};
use crate::scenario::{db_to_linear, Scenario};

mod bessel;

pub use bessel::bessel_j;

/// Off-axis scale: `u = 2.07123` gives the 3-dB point of the pattern.
pub const U_3DB: f64 = 2.07123;

/// Below this argument the pattern is evaluated by its power series.
const SERIES_CUTOFF: f64 = 1.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ChannelError {
    #[error("3-dB angle must be positive")]
    ZeroBeamwidth,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub h_true: Vec<CVector>,
    pub h_est: Vec<CVector>,
    /// `r[k][n]`, rain amplitude.
    pub rain_amp: Vec<Vec<f64>>,
    /// `θ[k][n]` in `[0, 2π)`.
    pub phase: Vec<Vec<f64>>,
    /// `e[k][n]`.
    pub phase_err: Vec<Vec<f64>>,
    /// `b[k][n]`, link budget with beam gain.
    pub large_scale: Vec<Vec<f64>>,
}

/// Normalised pattern `[J₁(u)/(2u) + 36 J₃(u)/u³]²`, equal to 1 at `u = 0`.
pub fn beam_gain(u: f64) -> f64 {
    let u = u.abs();
    let amp = if u < SERIES_CUTOFF {
        pattern_series(u)
    } else {
        bessel_j(1, u) / (2.0 * u) + 36.0 * bessel_j(3, u) / (u * u * u)
    };
    amp * amp
}

/// `J₁(u)/(2u) + 36 J₃(u)/u³` summed term by term, free of the `0/0` at the
/// origin.
fn pattern_series(u: f64) -> f64 {
    let q = 0.25 * u * u;
    // k-th terms: (-q)^k / (4 k! (k+1)!) and 4.5 (-q)^k / (k! (k+3)!)
    let mut t1 = 0.25;
    let mut t3 = 4.5 / 6.0;
    let mut sum = t1 + t3;
    for k in 1..40 {
        let kf = k as f64;
        t1 *= -q / (kf * (kf + 1.0));
        t3 *= -q / (kf * (kf + 3.0));
        sum += t1 + t3;
        if (t1.abs() + t3.abs()) < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// `u = 2.07123 · sin φ / sin φ_3dB`.
pub fn offaxis_param(phi_deg: f64, phi3db_deg: f64) -> Result<f64, ChannelError> {
    if phi3db_deg == 0.0 {
        return Err(ChannelError::ZeroBeamwidth);
    }
    Ok(U_3DB * phi_deg.to_radians().sin() / phi3db_deg.to_radians().sin())
}

/// `b = v √(G_R G) / (4π f d √(κ T_sys B_w))` with linear gains.
pub fn large_scale_coeff(s: &Scenario, distance_m: f64, beam_gain_linear: f64) -> f64 {
    let g_r = db_to_linear(s.user_antenna_gain_db);
    s.light_speed * (g_r * beam_gain_linear).sqrt()
        / (4.0
            * std::f64::consts::PI
            * s.carrier_freq_hz
            * distance_m
            * (s.boltzmann * s.noise_temp_k * s.bandwidth_hz).sqrt())
}

/// `r = ψ^{1/2}` with `ψ = 10^{ψ_dB/20}` and `ψ_dB = exp(ln ψ_dB)`.
pub fn rain_amplitude(ln_psi_db: f64) -> f64 {
    let psi_db = ln_psi_db.exp();
    let psi = 10f64.powf(psi_db / 20.0);
    psi.sqrt()
}

/// Draws `ln ψ_dB ~ N(μ, σ²)` for a `K × N_t` rain matrix.
///
/// One draw per user is shared by all feeds unless `rain_per_element` is set.
/// Returns the `ln ψ_dB` samples alongside the amplitudes.
pub fn sample_rain<R: Rng + ?Sized>(s: &Scenario, rng: &mut R) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let sd = s.rain_sigma2.sqrt();
    let mut draw = || {
        let z: f64 = StandardNormal.sample(rng);
        s.rain_mu + sd * z
    };
    let mut logs = Vec::with_capacity(s.n_users());
    for _ in 0..s.n_users() {
        if s.rain_per_element {
            logs.push((0..s.n_antennas).map(|_| draw()).collect::<Vec<_>>());
        } else {
            let v = draw();
            logs.push(vec![v; s.n_antennas]);
        }
    }
    let amps = logs
        .iter()
        .map(|row| row.iter().map(|&l| rain_amplitude(l)).collect())
        .collect();
    (logs, amps)
}

/// `b[k][n]` for every user/feed pair of a drop.
pub fn large_scale_matrix(s: &Scenario, drop: &UserDrop) -> Vec<Vec<f64>> {
    let g_max = db_to_linear(s.max_beam_gain_db);
    drop.offaxis_deg
        .iter()
        .zip(&drop.distance_m)
        .map(|(row, &d)| {
            row.iter()
                .map(|&phi| {
                    let u = offaxis_param(phi, s.angle_3db_deg).expect("validated 3-dB angle");
                    large_scale_coeff(s, d, g_max * beam_gain(u))
                })
                .collect()
        })
        .collect()
}

/// Draws one channel realization: rain, then phases, then phase errors.
pub fn assemble<R: Rng + ?Sized>(s: &Scenario, drop: &UserDrop, rng: &mut R) -> ChannelRealization {
    let k_users = s.n_users();
    let n = s.n_antennas;
    let large_scale = large_scale_matrix(s, drop);
    let (_, rain_amp) = sample_rain(s, rng);
    let two_pi = 2.0 * std::f64::consts::PI;
    let phase: Vec<Vec<f64>> = (0..k_users)
        .map(|_| (0..n).map(|_| two_pi * rng.gen::<f64>()).collect())
        .collect();
    let sd = s.phase_err_var.sqrt();
    let phase_err: Vec<Vec<f64>> = (0..k_users)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    sd * z
                })
                .collect()
        })
        .collect();
    ChannelRealization::from_components(rain_amp, phase, phase_err, large_scale)
}

impl ChannelRealization {
    /// Rebuilds `h` and `h̄` from stored components.
    pub fn from_components(
        rain_amp: Vec<Vec<f64>>,
        phase: Vec<Vec<f64>>,
        phase_err: Vec<Vec<f64>>,
        large_scale: Vec<Vec<f64>>,
    ) -> Self {
        let mut h_true = Vec::with_capacity(rain_amp.len());
        let mut h_est = Vec::with_capacity(rain_amp.len());
        for k in 0..rain_amp.len() {
            let n = rain_amp[k].len();
            let h = CVector::from_fn(n, |i, _| {
                C64::from_polar(rain_amp[k][i] * large_scale[k][i], phase[k][i])
            });
            let est = CVector::from_fn(n, |i, _| h[i] * C64::from_polar(1.0, -phase_err[k][i]));
            h_true.push(h);
            h_est.push(est);
        }
        ChannelRealization {
            h_true,
            h_est,
            rain_amp,
            phase,
            phase_err,
            large_scale,
        }
    }

    pub fn n_users(&self) -> usize {
        self.h_true.len()
    }

    pub fn to_dump(&self) -> ChannelDump {
        let cplx = |v: &Vec<CVector>| {
            v.iter()
                .map(|h| h.iter().map(|z| [z.re, z.im]).collect())
                .collect()
        };
        ChannelDump {
            h_true: cplx(&self.h_true),
            h_est: cplx(&self.h_est),
            rain_amp: self.rain_amp.clone(),
            phase: self.phase.clone(),
            phase_err: self.phase_err.clone(),
            large_scale: self.large_scale.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(&self.to_dump())
            .expect("dump serialization is infallible");
        std::fs::write(path, text)
    }

    /// Loads a dump; `h` and `h̄` are rebuilt from the stored components.
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let dump: ChannelDump = serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Ok(ChannelRealization::from_components(
            dump.rain_amp,
            dump.phase,
            dump.phase_err,
            dump.large_scale,
        ))
    }
}

/// Full-precision text form of a realization; complex entries are `[re, im]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelDump {
    pub h_true: Vec<Vec<[f64; 2]>>,
    pub h_est: Vec<Vec<[f64; 2]>>,
    pub rain_amp: Vec<Vec<f64>>,
    pub phase: Vec<Vec<f64>>,
    pub phase_err: Vec<Vec<f64>>,
    pub large_scale: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{drop_users, hex_layout};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pattern_is_one_at_boresight_and_continuous() {
        assert_eq!(beam_gain(0.0), 1.0);
        assert!((beam_gain(1e-8) - 1.0).abs() < 1e-6);
        // both branches agree at the switch point
        let below = pattern_series(SERIES_CUTOFF);
        let above = bessel_j(1, SERIES_CUTOFF) / 2.0 + 36.0 * bessel_j(3, SERIES_CUTOFF);
        assert!((below - above).abs() < 1e-14);
    }

    #[test]
    fn pattern_three_db_point() {
        assert!((beam_gain(U_3DB) - 0.5).abs() < 1e-3);
        assert!(beam_gain(10.0) > 0.0 && beam_gain(10.0) < 0.5);
    }

    #[test]
    fn offaxis_param_values() {
        assert_eq!(offaxis_param(0.0, 0.4).unwrap(), 0.0);
        assert!((offaxis_param(0.4, 0.4).unwrap() - U_3DB).abs() < 1e-15);
        let u = offaxis_param(0.8, 0.4).unwrap();
        let expected = 2.07123 * 0.8f64.to_radians().sin() / 0.4f64.to_radians().sin();
        assert!((u - expected).abs() < 1e-14);
        assert!((u - 4.14238).abs() < 1e-4);
        assert_eq!(offaxis_param(0.1, 0.0), Err(ChannelError::ZeroBeamwidth));
    }

    #[test]
    fn large_scale_homogeneity() {
        let s = Scenario::full_scale();
        assert_eq!(large_scale_coeff(&s, 35_786e3, 0.0), 0.0);
        let g = db_to_linear(52.0);
        let b1 = large_scale_coeff(&s, 4e7, g);
        let b2 = large_scale_coeff(&s, 8e7, g);
        assert!((b1 / b2 - 2.0).abs() < 1e-14);
    }

    #[test]
    fn large_scale_matches_db_budget() {
        // the same budget assembled in dB; √(G_R G) contributes G_R,dB + G_dB
        let s = Scenario::full_scale();
        let d = 35_786e3;
        let b = large_scale_coeff(&s, d, db_to_linear(s.max_beam_gain_db));
        let db = 20.0 * s.light_speed.log10() + (s.user_antenna_gain_db + s.max_beam_gain_db)
            - 20.0 * (4.0 * std::f64::consts::PI).log10()
            - 20.0 * s.carrier_freq_hz.log10()
            - 20.0 * d.log10()
            - 10.0 * (s.boltzmann.log10() + s.noise_temp_k.log10() + s.bandwidth_hz.log10());
        let oracle = 10f64.powf(db / 20.0);
        assert!(((b - oracle) / oracle).abs() < 1e-9, "{b} vs {oracle}");
    }

    #[test]
    fn degenerate_rain() {
        let mut s = Scenario::desk();
        s.rain_sigma2 = 0.0;
        let (_, amps) = sample_rain(&s, &mut ChaCha8Rng::seed_from_u64(1));
        let expected = 10f64.powf((-3.125f64).exp() / 40.0);
        for row in amps {
            for a in row {
                assert!((a - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rain_shared_across_feeds_unless_flagged() {
        let mut s = Scenario::desk();
        let (logs, _) = sample_rain(&s, &mut ChaCha8Rng::seed_from_u64(2));
        assert!(logs.iter().all(|r| r.iter().all(|&v| v == r[0])));
        s.rain_per_element = true;
        let (logs, _) = sample_rain(&s, &mut ChaCha8Rng::seed_from_u64(2));
        assert!(logs.iter().any(|r| r.iter().any(|&v| v != r[0])));
    }

    fn realization(delta2: f64, seed: u64) -> (Scenario, ChannelRealization) {
        let mut s = Scenario::desk();
        s.phase_err_var = delta2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = hex_layout(&s);
        let d = drop_users(&s, &l, &mut rng);
        let ch = assemble(&s, &d, &mut rng);
        (s, ch)
    }

    #[test]
    fn perfect_csit_is_exact() {
        let (_, ch) = realization(0.0, 4);
        assert_eq!(ch.h_true, ch.h_est);
    }

    #[test]
    fn phase_only_error() {
        let (_, ch) = realization(0.3, 5);
        for k in 0..ch.n_users() {
            for n in 0..ch.h_true[k].len() {
                let a = ch.h_true[k][n];
                let b = ch.h_est[k][n];
                assert!((a.norm() - b.norm()).abs() <= 1e-15 * a.norm());
                let q = a / b;
                assert!((q.norm() - 1.0).abs() < 1e-12);
                let ang = q.arg();
                let e = ch.phase_err[k][n];
                let diff = (ang - e + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI)
                    - std::f64::consts::PI;
                assert!(diff.abs() < 1e-12);
                assert!((0.0..2.0 * std::f64::consts::PI).contains(&ch.phase[k][n]));
                assert!(ch.rain_amp[k][n] > 0.0 && ch.large_scale[k][n] > 0.0);
            }
        }
    }

    #[test]
    fn factorization_reproduces_channel() {
        let (_, ch) = realization(0.2, 6);
        for k in 0..ch.n_users() {
            for n in 0..ch.h_true[k].len() {
                let rebuilt = C64::from_polar(ch.rain_amp[k][n], 0.0)
                    * C64::from_polar(1.0, ch.phase[k][n])
                    * ch.large_scale[k][n];
                assert!((rebuilt - ch.h_true[k][n]).norm() < 1e-14 * rebuilt.norm().max(1.0));
            }
        }
    }

    #[test]
    fn dump_round_trip() {
        let (_, ch) = realization(0.1, 8);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ch.json");
        ch.save(&p).unwrap();
        let back = ChannelRealization::load(&p).unwrap();
        assert_eq!(back.rain_amp, ch.rain_amp);
        assert_eq!(back.phase_err, ch.phase_err);
        for k in 0..ch.n_users() {
            assert!((&back.h_true[k] - &ch.h_true[k]).norm() == 0.0);
            assert!((&back.h_est[k] - &ch.h_est[k]).norm() == 0.0);
        }
    }
}
