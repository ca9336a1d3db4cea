//! Beam layout and user drop.
//!
//! Positions are angular offsets from nadir as seen from the satellite, in an
//! azimuthal-equidistant chart (`x_deg`, `y_deg`). Off-axis angles and slant
//! ranges are computed from exact direction vectors on a spherical Earth, the
//! chart is only used to place points.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scenario::Scenario;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Give up on rejection sampling and put the user at its beam centre after
/// this many draws.
const MAX_DROP_ATTEMPTS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngularPoint {
    pub x_deg: f64,
    pub y_deg: f64,
}

impl AngularPoint {
    pub const NADIR: AngularPoint = AngularPoint {
        x_deg: 0.0,
        y_deg: 0.0,
    };

    pub fn new(x_deg: f64, y_deg: f64) -> Self {
        AngularPoint { x_deg, y_deg }
    }

    /// Off-nadir angle in degrees.
    pub fn off_nadir_deg(&self) -> f64 {
        self.x_deg.hypot(self.y_deg)
    }

    /// Unit pointing vector from the satellite; `z` points at nadir.
    pub fn direction(&self) -> [f64; 3] {
        let alpha = self.off_nadir_deg().to_radians();
        let az = self.y_deg.atan2(self.x_deg);
        [alpha.sin() * az.cos(), alpha.sin() * az.sin(), alpha.cos()]
    }

    /// Angle between the two pointing directions, in degrees.
    pub fn angle_to(&self, other: &AngularPoint) -> f64 {
        let a = self.direction();
        let b = other.direction();
        let cross = [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
        let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        sin.atan2(cos).to_degrees()
    }

    fn chart_distance(&self, other: &AngularPoint) -> f64 {
        (self.x_deg - other.x_deg).hypot(self.y_deg - other.y_deg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamLayout {
    /// Beam `m` serves group `m`.
    pub beam_centers: Vec<AngularPoint>,
    pub spacing_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserDrop {
    pub positions: Vec<AngularPoint>,
    /// Slant range `d_k` in metres.
    pub distance_m: Vec<f64>,
    /// `offaxis_deg[k][n]`: angle between user `k` and beam centre `n`.
    pub offaxis_deg: Vec<Vec<f64>>,
    pub group_of: Vec<usize>,
}

/// Hexagonal beam layout with `√3·φ_3dB` spacing.
///
/// Centres are the `M` hexagonal-lattice points nearest nadir, ordered by
/// distance then by polar angle from the `+x` axis; `M = 7` is the classic
/// centre-plus-ring cluster and `M = 1` a single nadir beam.
pub fn hex_layout(s: &Scenario) -> BeamLayout {
    let spacing = 3f64.sqrt() * s.angle_3db_deg;
    let m = s.n_groups;
    // enough rings to hold m points
    let mut rings = 0i64;
    while 3 * rings * (rings + 1) + 1 < m as i64 {
        rings += 1;
    }
    let mut pts = Vec::new();
    for i in -rings..=rings {
        for j in -rings..=rings {
            let x = spacing * (i as f64 + 0.5 * j as f64);
            let y = spacing * (0.5 * 3f64.sqrt() * j as f64);
            pts.push(AngularPoint::new(x, y));
        }
    }
    let key = |p: &AngularPoint| {
        let r = (p.off_nadir_deg() / spacing * 1e6).round() as i64;
        let mut ang = p.y_deg.atan2(p.x_deg);
        if ang < -1e-9 {
            ang += 2.0 * std::f64::consts::PI;
        }
        (r, (ang.max(0.0) * 1e9).round() as i64)
    };
    pts.sort_by_key(key);
    pts.truncate(m);
    // snap exact zeros so nadir stays nadir
    for p in &mut pts {
        if p.x_deg.abs() < 1e-15 {
            p.x_deg = 0.0;
        }
        if p.y_deg.abs() < 1e-15 {
            p.y_deg = 0.0;
        }
    }
    BeamLayout {
        beam_centers: pts,
        spacing_deg: spacing,
    }
}

/// Slant range from a GEO satellite at `altitude_m` along a ray
/// `off_nadir_deg` away from nadir, to a spherical Earth.
pub fn slant_range(altitude_m: f64, off_nadir_deg: f64) -> f64 {
    let rs = EARTH_RADIUS_M + altitude_m;
    let a = off_nadir_deg.to_radians();
    let disc = EARTH_RADIUS_M * EARTH_RADIUS_M - rs * rs * a.sin() * a.sin();
    rs * a.cos() - disc.max(0.0).sqrt()
}

/// Builds the geometry for users at given positions.
pub fn place_users(
    s: &Scenario,
    layout: &BeamLayout,
    positions: Vec<AngularPoint>,
    group_of: Vec<usize>,
) -> UserDrop {
    let distance_m = positions
        .iter()
        .map(|p| slant_range(s.altitude_m, p.off_nadir_deg()))
        .collect();
    let offaxis_deg = positions
        .iter()
        .map(|p| layout.beam_centers.iter().map(|c| p.angle_to(c)).collect())
        .collect();
    UserDrop {
        positions,
        distance_m,
        offaxis_deg,
        group_of,
    }
}

/// Drops each user uniformly in its beam's 3-dB disk, restricted to the part
/// of the disk nearer its own beam centre than to any other.
pub fn drop_users<R: Rng + ?Sized>(s: &Scenario, layout: &BeamLayout, rng: &mut R) -> UserDrop {
    let radius = s.angle_3db_deg;
    let mut positions = Vec::with_capacity(s.n_users());
    for &m in &s.group_map {
        let center = layout.beam_centers[m];
        let mut chosen = center;
        for _ in 0..MAX_DROP_ATTEMPTS {
            let r = radius * rng.gen::<f64>().sqrt();
            let th = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
            let p = AngularPoint::new(center.x_deg + r * th.cos(), center.y_deg + r * th.sin());
            let own = p.angle_to(&center);
            if own > radius {
                continue;
            }
            let nearest_other = layout
                .beam_centers
                .iter()
                .enumerate()
                .filter(|(n, _)| *n != m)
                .map(|(_, c)| p.angle_to(c))
                .fold(f64::INFINITY, f64::min);
            if own <= nearest_other {
                chosen = p;
                break;
            }
        }
        positions.push(chosen);
    }
    place_users(s, layout, positions, s.group_map.clone())
}

impl UserDrop {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("user drop serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

impl BeamLayout {
    pub fn min_separation_deg(&self) -> f64 {
        let c = &self.beam_centers;
        let mut best = f64::INFINITY;
        for i in 0..c.len() {
            for j in i + 1..c.len() {
                best = best.min(c[i].chart_distance(&c[j]));
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scenario_with_groups(m: usize) -> Scenario {
        let mut s = Scenario::full_scale();
        s.n_antennas = m;
        s.n_groups = m;
        s.group_map = crate::scenario::canonical_group_map(m, 2);
        s
    }

    #[test]
    fn single_beam_at_nadir() {
        let l = hex_layout(&scenario_with_groups(1));
        assert_eq!(l.beam_centers, vec![AngularPoint::NADIR]);
    }

    #[test]
    fn seven_beam_ring_radius() {
        let l = hex_layout(&Scenario::full_scale());
        assert_eq!(l.beam_centers.len(), 7);
        assert_eq!(l.beam_centers[0], AngularPoint::NADIR);
        let expected = 3f64.sqrt() * 0.4;
        assert!((expected - 0.692_820_323).abs() < 1e-9);
        for c in &l.beam_centers[1..] {
            assert!((c.off_nadir_deg() - expected).abs() < 1e-12);
        }
        assert!(l.min_separation_deg() >= expected - 1e-12);
    }

    #[test]
    fn other_sizes_keep_spacing() {
        for m in [2, 3, 4, 5, 6, 8, 12, 19] {
            let l = hex_layout(&scenario_with_groups(m));
            assert_eq!(l.beam_centers.len(), m);
            assert!(l.min_separation_deg() >= l.spacing_deg - 1e-12, "m={m}");
        }
    }

    #[test]
    fn nadir_user_distance_is_altitude() {
        let s = Scenario::full_scale();
        let l = hex_layout(&s);
        let d = place_users(&s, &l, vec![AngularPoint::NADIR], vec![0]);
        assert_eq!(d.distance_m[0], 35_786e3);
        assert_eq!(d.offaxis_deg[0][0], 0.0);
    }

    #[test]
    fn user_at_beam_center() {
        let s = Scenario::full_scale();
        let l = hex_layout(&s);
        let c = l.beam_centers[3];
        let d = place_users(
            &s,
            &l,
            vec![c, AngularPoint::new(c.x_deg + 0.1, c.y_deg)],
            vec![3, 3],
        );
        assert!(d.offaxis_deg[0][3].abs() < 1e-9);
        assert!(d.offaxis_deg[1][3] > d.offaxis_deg[0][3]);
    }

    #[test]
    fn slant_range_grows_with_off_nadir() {
        let mut prev = slant_range(35_786e3, 0.0);
        for i in 1..80 {
            let d = slant_range(35_786e3, i as f64 * 0.1);
            assert!(d > prev);
            prev = d;
        }
    }

    #[test]
    fn drop_invariants_and_determinism() {
        let s = Scenario::full_scale();
        let l = hex_layout(&s);
        let a = drop_users(&s, &l, &mut ChaCha8Rng::seed_from_u64(7));
        let b = drop_users(&s, &l, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
        for k in 0..s.n_users() {
            let own = a.offaxis_deg[k][a.group_of[k]];
            assert!(own <= s.angle_3db_deg);
            for n in 0..s.n_antennas {
                assert!(own <= a.offaxis_deg[k][n]);
                assert!((0.0..90.0).contains(&a.offaxis_deg[k][n]));
            }
            assert!(a.distance_m[k] >= s.altitude_m);
        }
    }

    #[test]
    fn drop_json_round_trip() {
        let s = Scenario::desk();
        let l = hex_layout(&s);
        let a = drop_users(&s, &l, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(UserDrop::from_json(&a.to_json()).unwrap(), a);
    }
}
