//! Adapter onto the Clarabel interior-point solver.
//!
//! Clarabel minimizes `qᵀx` subject to `Ax + s = b`, `s ∈ K`. Scalars come
//! first in `x`, then the `n²` parameters of each Hermitian variable. Each
//! Hermitian PSD constraint becomes one real PSD cone on `emb(X)`.

use std::collections::BTreeMap;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{
    ConicError, ConicProgram, ConicSolution, ConicSolver, ConicValues, Constraint,
    HermitianEmbedding, LinExpr, SolveStatus, SolverSettings,
};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ClarabelSolver {
    pub settings: SolverSettings,
}

impl ClarabelSolver {
    pub fn new(settings: SolverSettings) -> Self {
        ClarabelSolver { settings }
    }
}

struct Layout {
    offsets: Vec<usize>,
    embeddings: Vec<HermitianEmbedding>,
    n_cols: usize,
}

impl Layout {
    fn new(p: &ConicProgram) -> Self {
        let mut offsets = Vec::new();
        let mut col = p.n_scalars();
        for &n in p.matrix_dims() {
            offsets.push(col);
            col += n * n;
        }
        Layout {
            offsets,
            embeddings: p
                .matrix_dims()
                .iter()
                .map(|&n| HermitianEmbedding::new(n))
                .collect(),
            n_cols: col,
        }
    }

    /// Sparse row of coefficients plus the constant.
    fn row(&self, e: &LinExpr) -> (BTreeMap<usize, f64>, f64) {
        let mut row = BTreeMap::new();
        for (v, c) in &e.scalars {
            *row.entry(v.index()).or_insert(0.0) += c;
        }
        for (x, a) in &e.matrices {
            let k = x.index();
            for (p, c) in self.embeddings[k].trace_coeffs(a) {
                *row.entry(self.offsets[k] + p).or_insert(0.0) += c;
            }
        }
        (row, e.constant)
    }

    fn values(&self, p: &ConicProgram, x: &[f64]) -> ConicValues {
        ConicValues {
            scalars: x[..p.n_scalars()].to_vec(),
            matrices: self
                .embeddings
                .iter()
                .zip(&self.offsets)
                .map(|(e, &o)| e.from_params(&x[o..o + e.n_params()]))
                .collect(),
        }
    }
}

#[derive(Default)]
struct Triplets {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
}

impl Triplets {
    /// Appends the slack row `s = a·x + c`, i.e. `A = −a`, `b = c`.
    fn push(&mut self, (row, c): (BTreeMap<usize, f64>, f64)) {
        let r = self.b.len();
        for (col, v) in row {
            if v != 0.0 {
                self.rows.push(r);
                self.cols.push(col);
                self.vals.push(-v);
            }
        }
        self.b.push(c);
    }
}

fn map_status(status: SolverStatus) -> SolveStatus {
    match status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        _ => SolveStatus::NumericalFailure,
    }
}

impl ConicSolver for ClarabelSolver {
    fn solve(&self, p: &ConicProgram) -> Result<ConicSolution, ConicError> {
        p.validate()?;
        let layout = Layout::new(p);
        let mut t = Triplets::default();
        let mut cones = Vec::new();

        // equalities, then inequalities, then one cone per SOC / PSD block
        let eqs: Vec<_> = p
            .constraints()
            .iter()
            .filter_map(|c| match &c.constraint {
                Constraint::Eq(e) => Some(e),
                _ => None,
            })
            .collect();
        for e in &eqs {
            t.push(layout.row(e));
        }
        if !eqs.is_empty() {
            cones.push(SupportedConeT::ZeroConeT(eqs.len()));
        }

        let mut n_geq = 0;
        for c in p.constraints() {
            match &c.constraint {
                Constraint::Geq(e) => {
                    t.push(layout.row(e));
                    n_geq += 1;
                }
                Constraint::Soc { bound, args } if args.is_empty() => {
                    t.push(layout.row(bound));
                    n_geq += 1;
                }
                _ => {}
            }
        }
        if n_geq > 0 {
            cones.push(SupportedConeT::NonnegativeConeT(n_geq));
        }

        for c in p.constraints() {
            if let Constraint::Soc { bound, args } = &c.constraint {
                if args.is_empty() {
                    continue;
                }
                t.push(layout.row(bound));
                for a in args {
                    t.push(layout.row(a));
                }
                cones.push(SupportedConeT::SecondOrderConeT(args.len() + 1));
            }
        }

        for c in p.constraints() {
            if let Constraint::Psd(x) = &c.constraint {
                let k = x.index();
                let e = layout.embeddings[k];
                let base = t.b.len();
                let d = e.dim();
                for (r, param, v) in e.svec_map() {
                    t.rows.push(base + r);
                    t.cols.push(layout.offsets[k] + param);
                    t.vals.push(-v);
                }
                t.b.extend(std::iter::repeat_n(0.0, d * (d + 1) / 2));
                cones.push(SupportedConeT::PSDTriangleConeT(d));
            }
        }

        let n = layout.n_cols;
        let (obj_row, _) = layout.row(p.objective());
        let mut q = vec![0.0; n];
        for (col, v) in obj_row {
            q[col] = -v;
        }
        let m = t.b.len();
        let a = CscMatrix::new_from_triplets(m, n, t.rows, t.cols, t.vals);
        let pmat = CscMatrix::zeros((n, n));
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(self.settings.max_iter)
            .tol_feas(self.settings.feas_tol)
            .tol_gap_abs(self.settings.gap_tol)
            .tol_gap_rel(self.settings.gap_tol)
            .build()
            .map_err(|e| ConicError::Backend(e.to_string()))?;
        let mut solver = DefaultSolver::new(&pmat, &q, &a, &t.b, &cones, settings)
            .map_err(|e| ConicError::Backend(format!("{e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        let values = layout.values(p, &sol.x);
        let mut status = map_status(sol.status);

        let scale = sol
            .x
            .iter()
            .chain(t.b.iter())
            .fold(1.0f64, |acc, v| acc.max(v.abs()));
        let solver_tolerance = self.settings.feas_tol * scale;
        if status == SolveStatus::Optimal && sol.status != SolverStatus::Solved {
            // reduced-accuracy exit: keep it only if the point checks out
            if p.max_violation(&values) > 10.0 * solver_tolerance {
                status = SolveStatus::NumericalFailure;
            }
        }
        let objective_value = p.objective().eval(&values);
        Ok(ConicSolution {
            status,
            objective_value,
            values,
            solver_tolerance,
            iterations: sol.iterations,
        })
    }
}
