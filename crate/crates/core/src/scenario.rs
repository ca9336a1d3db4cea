//! Experiment configuration.
//!
//! A [`Scenario`] carries every physical, system and algorithm parameter of a
//! run. Units are fixed by field name: `_hz`, `_m`, `_db`, `_k`, `_w`, `_deg`.
//! Gains are stored in dB and converted to linear units at the point of use.
//!
//! The channel is noise-normalised (the link budget already divides by
//! `sqrt(κ T_sys B_w)`), so the noise variance defaults to one and the
//! transmit power budget is `P_t = noise_var · 10^(snr_db/10)`.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SicMode {
    /// Common stream plus one private stream per group, common decoded first.
    Rsma,
    /// Private streams only.
    Sdma,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveMode {
    /// Global energy efficiency, rate over consumed power.
    Ee,
    /// Unit-weight sum rate.
    Wsr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n_antennas: usize,
    pub n_groups: usize,
    pub users_per_group: usize,
    /// `group_map[k]` is the (zero-based) group of user `k`.
    pub group_map: Vec<usize>,

    pub carrier_freq_hz: f64,
    pub altitude_m: f64,
    pub bandwidth_hz: f64,
    pub max_beam_gain_db: f64,
    pub user_antenna_gain_db: f64,
    pub noise_temp_k: f64,
    #[serde(rename = "boltzmann_j_per_k")]
    pub boltzmann: f64,
    #[serde(rename = "light_speed_m_per_s")]
    pub light_speed: f64,

    /// Mean of `ln(ψ_dB)`.
    pub rain_mu: f64,
    /// Variance of `ln(ψ_dB)`.
    pub rain_sigma2: f64,
    /// Draw rain independently per feed instead of once per user.
    pub rain_per_element: bool,
    pub angle_3db_deg: f64,

    pub snr_db: f64,
    pub noise_var: f64,
    pub amp_efficiency: f64,
    pub circuit_power_w: f64,
    #[serde(rename = "rate_power_coeff_w_per_bps_hz")]
    pub rate_power_coeff: f64,
    #[serde(rename = "qos_threshold_bps_hz")]
    pub qos_threshold: f64,
    #[serde(rename = "phase_err_var_rad2")]
    pub phase_err_var: f64,

    pub sic_mode: SicMode,
    pub objective_mode: ObjectiveMode,

    pub penalty_init: f64,
    pub penalty_growth: f64,
    pub penalty_max: f64,
    pub sca_eps: f64,
    pub max_iters: usize,
    /// Fraction of `P_t` given to the common beam by the initial point.
    pub init_common_share: f64,
    pub mc_realizations: usize,
    #[serde(with = "seed_repr")]
    pub rng_seed: u64,
}

/// TOML integers are signed 64-bit; seeds above `i64::MAX` are written as
/// decimal strings.
mod seed_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &u64, ser: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*seed) {
            Ok(v) => ser.serialize_i64(v),
            Err(_) => ser.serialize_str(&seed.to_string()),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(u64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<u64, D::Error> {
        match Repr::deserialize(de)? {
            Repr::Int(v) => Ok(v),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Full-scale GEO configuration: 7 beams, 2 users per beam, Ka band.
pub fn default_scenario() -> Scenario {
    Scenario::full_scale()
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario::full_scale()
    }
}

impl Scenario {
    pub fn full_scale() -> Self {
        let n_groups = 7;
        let users_per_group = 2;
        Scenario {
            n_antennas: 7,
            n_groups,
            users_per_group,
            group_map: canonical_group_map(n_groups, users_per_group),
            carrier_freq_hz: 20e9,
            altitude_m: 35_786e3,
            bandwidth_hz: 500e6,
            max_beam_gain_db: 52.0,
            user_antenna_gain_db: 41.7,
            noise_temp_k: 517.0,
            boltzmann: 1.38e-23,
            light_speed: 299_792_458.0,
            rain_mu: -3.125,
            rain_sigma2: 1.591,
            rain_per_element: false,
            angle_3db_deg: 0.4,
            snr_db: 25.0,
            noise_var: 1.0,
            amp_efficiency: 1.0,
            circuit_power_w: 10.0,
            rate_power_coeff: 0.1,
            qos_threshold: 0.1,
            phase_err_var: 0.1,
            sic_mode: SicMode::Rsma,
            objective_mode: ObjectiveMode::Ee,
            penalty_init: 1.0,
            penalty_growth: 5.0,
            penalty_max: 1e6,
            sca_eps: 1e-4,
            max_iters: 100,
            init_common_share: 0.5,
            mc_realizations: 500,
            rng_seed: 1,
        }
    }

    /// Three beams, two users each, twenty realizations.
    pub fn desk() -> Self {
        let mut s = Scenario::full_scale();
        s.n_antennas = 3;
        s.n_groups = 3;
        s.users_per_group = 2;
        s.group_map = canonical_group_map(3, 2);
        s.mc_realizations = 20;
        s
    }

    pub fn n_users(&self) -> usize {
        self.group_map.len()
    }

    /// Total transmit power budget `P_t`.
    pub fn transmit_power(&self) -> f64 {
        self.noise_var * db_to_linear(self.snr_db)
    }

    pub fn group_members(&self, group: usize) -> Vec<usize> {
        self.group_map
            .iter()
            .enumerate()
            .filter(|(_, &g)| g == group)
            .map(|(k, _)| k)
            .collect()
    }

    /// Every violated invariant; `Ok` iff there are none.
    // negated comparisons so that NaN fails the checks
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        let mut bad = |field: &'static str, message: String| out.push(Violation { field, message });

        if self.n_antennas == 0 {
            bad("n_antennas", "n_antennas must be positive".into());
        }
        if self.n_groups == 0 {
            bad("n_groups", "n_groups must be positive".into());
        }
        if self.users_per_group == 0 {
            bad("users_per_group", "users_per_group must be positive".into());
        }
        if self.n_antennas != self.n_groups {
            bad(
                "n_antennas",
                format!(
                    "SFPB requires N_t == M (got N_t={}, M={})",
                    self.n_antennas, self.n_groups
                ),
            );
        }
        if self.group_map.len() != self.n_groups * self.users_per_group {
            bad(
                "group_map",
                format!(
                    "group_map has {} users, expected n_groups*users_per_group = {}",
                    self.group_map.len(),
                    self.n_groups * self.users_per_group
                ),
            );
        }
        if let Some(&g) = self.group_map.iter().find(|&&g| g >= self.n_groups) {
            bad(
                "group_map",
                format!("group index {g} out of range 0..{}", self.n_groups),
            );
        }
        for m in 0..self.n_groups {
            if !self.group_map.contains(&m) {
                bad("group_map", format!("group {m} has no users"));
            }
        }

        if !(self.amp_efficiency > 0.0 && self.amp_efficiency <= 1.0) {
            bad("amp_efficiency", "amp_efficiency must be in (0,1]".into());
        }
        let positive = [
            ("carrier_freq_hz", self.carrier_freq_hz),
            ("altitude_m", self.altitude_m),
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_temp_k", self.noise_temp_k),
            ("boltzmann_j_per_k", self.boltzmann),
            ("light_speed_m_per_s", self.light_speed),
            ("noise_var", self.noise_var),
            ("penalty_init", self.penalty_init),
            ("sca_eps", self.sca_eps),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                bad(field, format!("{field} must be finite and > 0 (got {v})"));
            }
        }
        let nonneg = [
            ("rain_sigma2", self.rain_sigma2),
            ("circuit_power_w", self.circuit_power_w),
            ("rate_power_coeff_w_per_bps_hz", self.rate_power_coeff),
            ("qos_threshold_bps_hz", self.qos_threshold),
            ("phase_err_var_rad2", self.phase_err_var),
        ];
        for (field, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                bad(field, format!("{field} must be finite and >= 0 (got {v})"));
            }
        }
        let finite = [
            ("max_beam_gain_db", self.max_beam_gain_db),
            ("user_antenna_gain_db", self.user_antenna_gain_db),
            ("rain_mu", self.rain_mu),
            ("snr_db", self.snr_db),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                bad(field, format!("{field} must be finite"));
            }
        }
        if !(self.angle_3db_deg > 0.0 && self.angle_3db_deg < 90.0) {
            bad("angle_3db_deg", "angle_3db_deg must be in (0,90)".into());
        }
        if !(self.penalty_growth >= 1.0) {
            bad("penalty_growth", "penalty_growth must be >= 1".into());
        }
        if !(self.penalty_max >= self.penalty_init) {
            bad("penalty_max", "penalty_max must be >= penalty_init".into());
        }
        if self.max_iters == 0 {
            bad("max_iters", "max_iters must be positive".into());
        }
        if self.mc_realizations == 0 {
            bad("mc_realizations", "mc_realizations must be positive".into());
        }
        if !(self.init_common_share >= 0.0 && self.init_common_share < 1.0) {
            bad(
                "init_common_share",
                "init_common_share must be in [0,1)".into(),
            );
        }

        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serialization is infallible")
    }

    /// Parses a complete scenario document.
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        Ok(toml::from_str(text)?)
    }

    /// Parses a possibly partial document on top of `base`.
    ///
    /// Keys absent from `text` keep the base value. When the group shape
    /// changes and `group_map` is not given, the canonical contiguous map is
    /// regenerated. Unknown keys are rejected.
    pub fn from_toml_over(text: &str, base: &Scenario) -> Result<Self, ScenarioError> {
        let overlay: toml::Table = toml::from_str(text)?;
        let mut merged = toml::Table::try_from(base).expect("scenario serialization is infallible");
        let unknown: Vec<String> = overlay
            .keys()
            .filter(|k| !merged.contains_key(*k))
            .cloned()
            .collect();
        if !unknown.is_empty() {
            return Err(ScenarioError::UnknownKeys(unknown));
        }
        let shape_changed =
            overlay.contains_key("n_groups") || overlay.contains_key("users_per_group");
        let explicit_map = overlay.contains_key("group_map");
        for (k, v) in overlay {
            merged.insert(k, v);
        }
        let mut s: Scenario = merged.try_into()?;
        if shape_changed && !explicit_map {
            s.group_map = canonical_group_map(s.n_groups, s.users_per_group);
        }
        Ok(s)
    }

    pub fn load(path: &Path, base: &Scenario) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_over(&text, base)
    }
}

/// Users `0..upg` in group 0, the next `upg` in group 1, and so on.
pub fn canonical_group_map(n_groups: usize, users_per_group: usize) -> Vec<usize> {
    (0..n_groups * users_per_group)
        .map(|k| k / users_per_group)
        .collect()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("reading scenario {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown scenario keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_scale_values() {
        let s = default_scenario();
        assert_eq!(s.max_beam_gain_db, 52.0);
        assert_eq!(s.sca_eps, 0.0001);
        assert_eq!(s.n_users(), 14);
        assert_eq!(s.n_groups * s.users_per_group, 14);
        assert_eq!(s.n_antennas, 7);
        assert_eq!(s.carrier_freq_hz, 20e9);
        assert_eq!(s.altitude_m, 35_786_000.0);
        assert_eq!(s.bandwidth_hz, 500e6);
        assert_eq!(s.user_antenna_gain_db, 41.7);
        assert_eq!(s.noise_temp_k, 517.0);
        assert_eq!(s.boltzmann, 1.38e-23);
        assert_eq!((s.rain_mu, s.rain_sigma2), (-3.125, 1.591));
        assert_eq!(s.angle_3db_deg, 0.4);
        assert_eq!(s.amp_efficiency, 1.0);
        assert_eq!(s.mc_realizations, 500);
        assert!(s.validate().is_ok());
        assert!(Scenario::desk().validate().is_ok());
    }

    #[test]
    fn sfpb_violation() {
        let mut s = default_scenario();
        s.n_groups = 6;
        s.group_map = canonical_group_map(6, 2);
        let v = s.validate().unwrap_err();
        assert!(v
            .iter()
            .any(|v| v.message.contains("SFPB requires N_t == M")));
    }

    #[test]
    fn zero_efficiency_violation() {
        let mut s = default_scenario();
        s.amp_efficiency = 0.0;
        let v = s.validate().unwrap_err();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].message, "amp_efficiency must be in (0,1]");
    }

    #[test]
    fn reports_every_violation() {
        let mut s = default_scenario();
        s.amp_efficiency = 2.0;
        s.rate_power_coeff = -1.0;
        s.group_map[3] = 99;
        let v = s.validate().unwrap_err();
        let fields: Vec<_> = v.iter().map(|v| v.field).collect();
        assert!(fields.contains(&"amp_efficiency"));
        assert!(fields.contains(&"rate_power_coeff_w_per_bps_hz"));
        assert!(fields.contains(&"group_map"));
    }

    #[test]
    fn empty_group_detected() {
        let mut s = Scenario::desk();
        s.group_map = vec![0, 0, 0, 1, 1, 1];
        let v = s.validate().unwrap_err();
        assert!(v.iter().any(|v| v.message == "group 2 has no users"));
    }

    #[test]
    fn partial_file_and_unknown_keys() {
        let base = Scenario::desk();
        let s = Scenario::from_toml_over("snr_db = 10.0\ncircuit_power_w = 5.0\n", &base).unwrap();
        assert_eq!(s.snr_db, 10.0);
        assert_eq!(s.circuit_power_w, 5.0);
        assert_eq!(s.n_groups, 3);

        let err =
            Scenario::from_toml_over("snr_dB = 10.0\ncarrier_freq_ghz = 20\n", &base).unwrap_err();
        match err {
            ScenarioError::UnknownKeys(keys) => {
                assert_eq!(
                    keys,
                    vec!["carrier_freq_ghz".to_string(), "snr_dB".to_string()]
                )
            }
            other => panic!("unexpected {other}"),
        }
        // full documents reject unknown keys as well
        let mut text = base.to_toml_string();
        text.push_str("typo_key = 1\n");
        assert!(Scenario::from_toml_str(&text).is_err());
    }

    #[test]
    fn shape_change_regenerates_map() {
        let s = Scenario::from_toml_over(
            "n_antennas = 7\nn_groups = 7\nusers_per_group = 1\n",
            &Scenario::desk(),
        )
        .unwrap();
        assert_eq!(s.group_map, (0..7).collect::<Vec<_>>());
        assert!(s.validate().is_ok());
    }

    #[test]
    fn transmit_power_from_snr() {
        let mut s = Scenario::desk();
        s.snr_db = 20.0;
        assert!((s.transmit_power() - 100.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn toml_round_trip(
            snr in -20.0f64..60.0,
            xi in 0.0f64..10.0,
            pc in 0.0f64..1e3,
            d2 in 0.0f64..2.0,
            seed in any::<u64>(),
            per_elem in any::<bool>(),
            sdma in any::<bool>(),
            mu in -10.0f64..10.0,
        ) {
            let mut s = Scenario::full_scale();
            s.snr_db = snr;
            s.rate_power_coeff = xi;
            s.circuit_power_w = pc;
            s.phase_err_var = d2;
            s.rng_seed = seed;
            s.rain_per_element = per_elem;
            s.rain_mu = mu;
            if sdma { s.sic_mode = SicMode::Sdma; s.objective_mode = ObjectiveMode::Wsr; }
            let text = s.to_toml_string();
            let back = Scenario::from_toml_str(&text).unwrap();
            prop_assert_eq!(&back, &s);
            let over = Scenario::from_toml_over(&text, &Scenario::desk()).unwrap();
            prop_assert_eq!(over, s);
        }
    }
}
