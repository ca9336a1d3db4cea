//! Monte-Carlo sweeps over one scenario parameter.
//!
//! Every run draws its geometry and channel from ChaCha streams of a single
//! master seed. Streams depend on the realization index only, so all axis
//! values and modes of a sweep see the same channels (common random numbers).

use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{assemble, ChannelRealization};
use crate::conic::ClarabelSolver;
use crate::csit::CsitStatistics;
use crate::geometry::{drop_users, hex_layout, UserDrop};
use crate::optimizer::{solve_with, OptimizerError, Solution};
use crate::scenario::{ObjectiveMode, Scenario, SicMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    SnrDb,
    Delta2,
    Xi,
    PcW,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 4] = [
        SweepAxis::SnrDb,
        SweepAxis::Delta2,
        SweepAxis::Xi,
        SweepAxis::PcW,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::Delta2 => "delta2",
            SweepAxis::Xi => "xi",
            SweepAxis::PcW => "pc_w",
        }
    }

    pub fn apply(self, s: &mut Scenario, value: f64) {
        match self {
            SweepAxis::SnrDb => s.snr_db = value,
            SweepAxis::Delta2 => s.phase_err_var = value,
            SweepAxis::Xi => s.rate_power_coeff = value,
            SweepAxis::PcW => s.circuit_power_w = value,
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                format!("unknown sweep axis `{s}` (expected snr_db, delta2, xi or pc_w)")
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    RsmaEe,
    SdmaEe,
    RsmaWsr,
    SdmaWsr,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::RsmaEe, Mode::SdmaEe, Mode::RsmaWsr, Mode::SdmaWsr];

    pub fn name(self) -> &'static str {
        match self {
            Mode::RsmaEe => "rsma-ee",
            Mode::SdmaEe => "sdma-ee",
            Mode::RsmaWsr => "rsma-wsr",
            Mode::SdmaWsr => "sdma-wsr",
        }
    }

    pub fn sic(self) -> SicMode {
        match self {
            Mode::RsmaEe | Mode::RsmaWsr => SicMode::Rsma,
            Mode::SdmaEe | Mode::SdmaWsr => SicMode::Sdma,
        }
    }

    pub fn objective(self) -> ObjectiveMode {
        match self {
            Mode::RsmaEe | Mode::SdmaEe => ObjectiveMode::Ee,
            Mode::RsmaWsr | Mode::SdmaWsr => ObjectiveMode::Wsr,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                format!("unknown mode `{s}` (expected rsma-ee, sdma-ee, rsma-wsr or sdma-wsr)")
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPlan {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub modes: Vec<Mode>,
    pub realizations: usize,
    pub base: Scenario,
    /// One user drop shared by every realization instead of one per
    /// realization.
    pub fixed_geometry: bool,
    pub seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid sweep: {0}")]
    InvalidPlan(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl SweepPlan {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidPlan(m));
        if self.values.is_empty() {
            return bad("no axis values".into());
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return bad("axis values must be finite".into());
        }
        let up = self.values.windows(2).all(|w| w[1] > w[0]);
        let down = self.values.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return bad("axis values must be strictly monotone".into());
        }
        if self.realizations == 0 {
            return bad("realizations must be at least 1".into());
        }
        if let Err(v) = self.base.validate() {
            let msgs: Vec<String> = v.iter().map(|v| v.to_string()).collect();
            return bad(format!("base scenario: {}", msgs.join("; ")));
        }
        for &value in &self.values {
            let mut s = self.base.clone();
            self.axis.apply(&mut s, value);
            if let Err(v) = s.validate() {
                let msgs: Vec<String> = v.iter().map(|v| v.to_string()).collect();
                return bad(format!("{}={value}: {}", self.axis, msgs.join("; ")));
            }
        }
        Ok(())
    }

    pub fn scenario_at(&self, value_index: usize) -> Scenario {
        let mut s = self.base.clone();
        self.axis.apply(&mut s, self.values[value_index]);
        s
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Geometry, channel and CSIT statistics of realization `r` under `seed`.
///
/// With `fixed_geometry` the drop comes from a stream shared by all
/// realizations.
pub fn draw_instance(
    s: &Scenario,
    seed: u64,
    realization: u64,
    fixed_geometry: bool,
) -> (UserDrop, ChannelRealization, CsitStatistics) {
    let layout = hex_layout(s);
    let geo_stream = if fixed_geometry {
        0
    } else {
        2 * realization + 2
    };
    let drop = drop_users(s, &layout, &mut stream(seed, geo_stream));
    let chan = assemble(s, &drop, &mut stream(seed, 2 * realization + 1));
    let stats = CsitStatistics::from_estimates(&chan.h_est, s.phase_err_var);
    (drop, chan, stats)
}

/// One optimizer run on realization 0 of `seed`, fixed geometry, using the
/// scenario's own stream structure and objective.
pub fn single_run(s: &Scenario, seed: u64) -> Result<Solution, OptimizerError> {
    let (_, _, stats) = draw_instance(s, seed, 0, true);
    solve_with(
        &ClarabelSolver::default(),
        s,
        &stats,
        s.sic_mode,
        s.objective_mode,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunOutcome {
    Converged,
    /// Hit `max_iters`; the last iterate is still reported.
    MaxIters,
    Failed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub value_index: usize,
    pub realization: usize,
    pub mode: Mode,
    pub outcome: RunOutcome,
    pub ee: f64,
    pub rate: f64,
    pub power: f64,
    pub iters: usize,
    pub objective_trace: Vec<f64>,
    /// Largest accepted relative rank-one residual at the last iteration.
    pub final_rank_ratio: f64,
    pub transmit_power: f64,
    /// Whether the extracted solution meets QoS, common-rate and power
    /// constraints within `1e-6`.
    pub feasible: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub mode: Mode,
    pub mean_ee: f64,
    pub mean_rate: f64,
    pub mean_power: f64,
    pub n_converged: usize,
    pub n_failed: usize,
    pub mean_iters: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    /// Value-major, then mode in plan order.
    pub rows: Vec<SweepRow>,
    /// Value-major, then realization, then mode.
    pub runs: Vec<RunRecord>,
}

impl SweepResult {
    pub fn n_failed(&self) -> usize {
        self.runs
            .iter()
            .filter(|r| matches!(r.outcome, RunOutcome::Failed(_)))
            .count()
    }

    pub fn row(&self, value_index: usize, mode: Mode) -> Option<&SweepRow> {
        let n_modes = self.rows.len()
            / self
                .rows
                .iter()
                .map(|r| r.value.to_bits())
                .collect::<std::collections::BTreeSet<_>>()
                .len()
                .max(1);
        self.rows
            .iter()
            .skip(value_index * n_modes)
            .take(n_modes)
            .find(|r| r.mode == mode)
    }
}

const FEASIBILITY_TOL: f64 = 1e-6;

fn run_one(plan: &SweepPlan, value_index: usize, realization: usize, mode: Mode) -> RunRecord {
    let s = plan.scenario_at(value_index);
    let (_, _, stats) = draw_instance(&s, plan.seed, realization as u64, plan.fixed_geometry);
    let mut rec = RunRecord {
        value_index,
        realization,
        mode,
        outcome: RunOutcome::Failed(String::new()),
        ee: f64::NAN,
        rate: f64::NAN,
        power: f64::NAN,
        iters: 0,
        objective_trace: Vec::new(),
        final_rank_ratio: f64::NAN,
        transmit_power: f64::NAN,
        feasible: false,
    };
    match solve_with(
        &ClarabelSolver::default(),
        &s,
        &stats,
        mode.sic(),
        mode.objective(),
    ) {
        Ok(sol) => {
            let r = &sol.report;
            rec.outcome = if sol.converged {
                RunOutcome::Converged
            } else {
                RunOutcome::MaxIters
            };
            rec.ee = r.ee;
            rec.rate = r.total_rate;
            rec.power = r.total_power;
            rec.iters = sol.state.iter;
            rec.final_rank_ratio = sol.state.penalty_trace.last().copied().unwrap_or(0.0);
            rec.transmit_power = sol.beamformers.transmit_power();
            let qos_ok = (0..s.n_groups)
                .all(|m| r.common_alloc[m] + r.group_rates[m] >= s.qos_threshold - FEASIBILITY_TOL);
            let common_ok = r.common_alloc.iter().sum::<f64>() <= r.common_rate + FEASIBILITY_TOL
                && r.common_alloc.iter().all(|&c| c >= -FEASIBILITY_TOL);
            let power_ok = rec.transmit_power <= s.transmit_power() + FEASIBILITY_TOL;
            rec.feasible = qos_ok && common_ok && power_ok;
            rec.objective_trace = sol.state.objective_trace;
        }
        Err(e) => rec.outcome = RunOutcome::Failed(e.to_string()),
    }
    rec
}

fn jobs(plan: &SweepPlan) -> Vec<(usize, usize, Mode)> {
    let mut out = Vec::new();
    for v in 0..plan.values.len() {
        for r in 0..plan.realizations {
            for &m in &plan.modes {
                out.push((v, r, m));
            }
        }
    }
    out
}

fn aggregate(plan: &SweepPlan, runs: Vec<RunRecord>) -> SweepResult {
    let mut rows = Vec::new();
    for (v, &value) in plan.values.iter().enumerate() {
        for &mode in &plan.modes {
            let mine: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.value_index == v && r.mode == mode)
                .collect();
            let ok: Vec<&&RunRecord> = mine
                .iter()
                .filter(|r| r.outcome == RunOutcome::Converged)
                .collect();
            let mean = |f: fn(&RunRecord) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
                }
            };
            rows.push(SweepRow {
                axis: plan.axis,
                value,
                mode,
                mean_ee: mean(|r| r.ee),
                mean_rate: mean(|r| r.rate),
                mean_power: mean(|r| r.power),
                n_converged: ok.len(),
                n_failed: mine
                    .iter()
                    .filter(|r| matches!(r.outcome, RunOutcome::Failed(_)))
                    .count(),
                mean_iters: mean(|r| r.iters as f64),
            });
        }
    }
    SweepResult {
        axis: plan.axis,
        rows,
        runs,
    }
}

/// Runs every (value, realization, mode) in parallel; failures are recorded
/// per run and never abort the sweep.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepResult, HarnessError> {
    plan.validate()?;
    let runs = jobs(plan)
        .into_par_iter()
        .map(|(v, r, m)| run_one(plan, v, r, m))
        .collect();
    Ok(aggregate(plan, runs))
}

/// [`run_sweep`] on the calling thread.
pub fn run_sweep_serial(plan: &SweepPlan) -> Result<SweepResult, HarnessError> {
    plan.validate()?;
    let runs = jobs(plan)
        .into_iter()
        .map(|(v, r, m)| run_one(plan, v, r, m))
        .collect();
    Ok(aggregate(plan, runs))
}

/// Plain decimal with 10 significant digits; `nan` for missing values.
pub fn format_sig(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.9e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = mantissa
        .strip_prefix('-')
        .map_or(("", mantissa), |m| ("-", m));
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let point = exp + 1;
    let body = if point <= 0 {
        format!("0.{}{}", "0".repeat((-point) as usize), digits)
    } else if point as usize >= digits.len() {
        format!("{}{}", digits, "0".repeat(point as usize - digits.len()))
    } else {
        format!(
            "{}.{}",
            &digits[..point as usize],
            &digits[point as usize..]
        )
    };
    format!("{sign}{body}")
}

pub const CSV_HEADER: &str =
    "axis,value,mode,mean_ee,mean_rate,mean_power,n_converged,n_failed,mean_iters";

pub fn write_csv<W: Write>(r: &SweepResult, out: &mut W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in &r.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.axis,
            format_sig(row.value),
            row.mode,
            format_sig(row.mean_ee),
            format_sig(row.mean_rate),
            format_sig(row.mean_power),
            row.n_converged,
            row.n_failed,
            format_sig(row.mean_iters)
        )?;
    }
    Ok(())
}

pub fn emit_csv(r: &SweepResult, path: &Path) -> Result<(), HarnessError> {
    let io_err = |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut buf = Vec::new();
    write_csv(r, &mut buf).map_err(io_err)?;
    std::fs::write(path, buf).map_err(io_err)
}

/// Per-run records as CSV, for inspecting individual failures.
pub fn write_runs_csv<W: Write>(r: &SweepResult, values: &[f64], out: &mut W) -> io::Result<()> {
    writeln!(
        out,
        "value,realization,mode,outcome,ee,rate,power,iters,rank_ratio,feasible"
    )?;
    for run in &r.runs {
        let outcome = match &run.outcome {
            RunOutcome::Converged => "converged".to_string(),
            RunOutcome::MaxIters => "max-iters".to_string(),
            RunOutcome::Failed(msg) => format!("failed: {}", msg.replace(',', ";")),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            format_sig(values[run.value_index]),
            run.realization,
            run.mode,
            outcome,
            format_sig(run.ee),
            format_sig(run.rate),
            format_sig(run.power),
            run.iters,
            format_sig(run.final_rank_ratio),
            run.feasible
        )?;
    }
    Ok(())
}
