//! Solver-agnostic conic programs over real scalars and complex Hermitian
//! matrices.
//!
//! A program maximizes a linear objective subject to linear equalities,
//! linear inequalities, second-order cones and Hermitian PSD constraints.
//! Matrix variables enter linear expressions only through `Re tr(A X)`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::linalg::{min_eigenvalue, trace_product, CMatrix};

mod cbf;
mod clarabel_backend;
mod embed;

pub use cbf::write_cbf;
pub use clarabel_backend::ClarabelSolver;
pub use embed::HermitianEmbedding;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScalarVar(pub(crate) usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatrixVar(usize);

impl ScalarVar {
    pub fn index(self) -> usize {
        self.0
    }
}

impl MatrixVar {
    pub fn index(self) -> usize {
        self.0
    }
}

/// `constant + Σ aⱼ xⱼ + Σ Re tr(Aₖ Xₖ)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub constant: f64,
    pub scalars: Vec<(ScalarVar, f64)>,
    pub matrices: Vec<(MatrixVar, CMatrix)>,
}

impl LinExpr {
    pub fn zero() -> Self {
        LinExpr::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr {
            constant: c,
            ..LinExpr::default()
        }
    }

    pub fn term(v: ScalarVar, coeff: f64) -> Self {
        LinExpr {
            scalars: vec![(v, coeff)],
            ..LinExpr::default()
        }
    }

    /// `tr(X)`.
    pub fn trace(x: MatrixVar, n: usize) -> Self {
        Self::trace_with(CMatrix::identity(n, n), x)
    }

    /// `Re tr(A X)`.
    pub fn trace_with(a: CMatrix, x: MatrixVar) -> Self {
        LinExpr {
            matrices: vec![(x, a)],
            ..LinExpr::default()
        }
    }

    pub fn scale(mut self, k: f64) -> Self {
        self.constant *= k;
        for (_, c) in &mut self.scalars {
            *c *= k;
        }
        for (_, a) in &mut self.matrices {
            *a *= crate::linalg::C64::new(k, 0.0);
        }
        self
    }

    pub fn eval(&self, values: &ConicValues) -> f64 {
        let s: f64 = self
            .scalars
            .iter()
            .map(|(v, c)| c * values.scalars[v.0])
            .sum();
        let m: f64 = self
            .matrices
            .iter()
            .map(|(x, a)| trace_product(a, &values.matrices[x.0]))
            .sum();
        self.constant + s + m
    }

    /// Largest absolute constant or coefficient, used for relative checks.
    pub fn magnitude(&self) -> f64 {
        let s = self
            .scalars
            .iter()
            .map(|(_, c)| c.abs())
            .fold(self.constant.abs(), f64::max);
        self.matrices
            .iter()
            .flat_map(|(_, a)| a.iter().map(|z| z.norm()))
            .fold(s, f64::max)
    }
}

impl From<ScalarVar> for LinExpr {
    fn from(v: ScalarVar) -> Self {
        LinExpr::term(v, 1.0)
    }
}

impl From<f64> for LinExpr {
    fn from(c: f64) -> Self {
        LinExpr::constant(c)
    }
}

impl<T: Into<LinExpr>> Add<T> for LinExpr {
    type Output = LinExpr;

    fn add(mut self, rhs: T) -> LinExpr {
        let rhs = rhs.into();
        self.constant += rhs.constant;
        self.scalars.extend(rhs.scalars);
        self.matrices.extend(rhs.matrices);
        self
    }
}

impl<T: Into<LinExpr>> Sub<T> for LinExpr {
    type Output = LinExpr;

    fn sub(self, rhs: T) -> LinExpr {
        self + rhs.into().scale(-1.0)
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;

    fn neg(self) -> LinExpr {
        self.scale(-1.0)
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;

    fn mul(self, k: f64) -> LinExpr {
        self.scale(k)
    }
}

impl Mul<LinExpr> for f64 {
    type Output = LinExpr;

    fn mul(self, e: LinExpr) -> LinExpr {
        e.scale(self)
    }
}

impl std::iter::Sum for LinExpr {
    fn sum<I: Iterator<Item = LinExpr>>(iter: I) -> LinExpr {
        iter.fold(LinExpr::zero(), |a, b| a + b)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Constraint {
    /// `expr = 0`.
    Eq(LinExpr),
    /// `expr ≥ 0`.
    Geq(LinExpr),
    /// `‖(args)‖₂ ≤ bound`.
    Soc { bound: LinExpr, args: Vec<LinExpr> },
    /// `X ⪰ 0`.
    Psd(MatrixVar),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledConstraint {
    pub label: String,
    pub constraint: Constraint,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConicError {
    #[error("constraint `{label}` references an undeclared variable")]
    UnknownVariable { label: String },
    #[error("constraint `{label}`: coefficient is {got}×{got} but the variable is {expected}×{expected}")]
    DimensionMismatch {
        label: String,
        expected: usize,
        got: usize,
    },
    #[error("solver backend: {0}")]
    Backend(String),
}

/// Assignment of values to every variable of a program.
#[derive(Clone, Debug, PartialEq)]
pub struct ConicValues {
    pub scalars: Vec<f64>,
    pub matrices: Vec<CMatrix>,
}

impl ConicValues {
    pub fn zeros(p: &ConicProgram) -> Self {
        ConicValues {
            scalars: vec![0.0; p.n_scalars],
            matrices: p
                .matrix_dims
                .iter()
                .map(|&n| CMatrix::zeros(n, n))
                .collect(),
        }
    }

    pub fn scalar(&self, v: ScalarVar) -> f64 {
        self.scalars[v.0]
    }

    pub fn matrix(&self, x: MatrixVar) -> &CMatrix {
        &self.matrices[x.0]
    }

    pub fn set_scalar(&mut self, v: ScalarVar, value: f64) {
        self.scalars[v.0] = value;
    }

    pub fn set_matrix(&mut self, x: MatrixVar, value: CMatrix) {
        self.matrices[x.0] = value;
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConicProgram {
    n_scalars: usize,
    matrix_dims: Vec<usize>,
    objective: LinExpr,
    constraints: Vec<LabeledConstraint>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn scalar(&mut self) -> ScalarVar {
        self.n_scalars += 1;
        ScalarVar(self.n_scalars - 1)
    }

    pub fn hermitian(&mut self, n: usize) -> MatrixVar {
        assert!(n >= 1, "matrix variables need n >= 1");
        self.matrix_dims.push(n);
        MatrixVar(self.matrix_dims.len() - 1)
    }

    pub fn maximize(&mut self, objective: LinExpr) {
        self.objective = objective;
    }

    pub fn add(&mut self, label: impl Into<String>, constraint: Constraint) {
        self.constraints.push(LabeledConstraint {
            label: label.into(),
            constraint,
        });
    }

    pub fn equals(
        &mut self,
        label: impl Into<String>,
        lhs: impl Into<LinExpr>,
        rhs: impl Into<LinExpr>,
    ) {
        self.add(label, Constraint::Eq(lhs.into() - rhs.into()));
    }

    /// `lhs ≥ rhs`.
    pub fn geq(
        &mut self,
        label: impl Into<String>,
        lhs: impl Into<LinExpr>,
        rhs: impl Into<LinExpr>,
    ) {
        self.add(label, Constraint::Geq(lhs.into() - rhs.into()));
    }

    /// `lhs ≤ rhs`.
    pub fn leq(
        &mut self,
        label: impl Into<String>,
        lhs: impl Into<LinExpr>,
        rhs: impl Into<LinExpr>,
    ) {
        self.add(label, Constraint::Geq(rhs.into() - lhs.into()));
    }

    pub fn soc(&mut self, label: impl Into<String>, args: Vec<LinExpr>, bound: impl Into<LinExpr>) {
        self.add(
            label,
            Constraint::Soc {
                bound: bound.into(),
                args,
            },
        );
    }

    pub fn psd(&mut self, label: impl Into<String>, x: MatrixVar) {
        self.add(label, Constraint::Psd(x));
    }

    pub fn n_scalars(&self) -> usize {
        self.n_scalars
    }

    pub fn matrix_dims(&self) -> &[usize] {
        &self.matrix_dims
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    pub fn constraints(&self) -> &[LabeledConstraint] {
        &self.constraints
    }

    pub fn find(&self, label: &str) -> Option<&Constraint> {
        self.constraints
            .iter()
            .find(|c| c.label == label)
            .map(|c| &c.constraint)
    }

    fn check_expr(&self, label: &str, e: &LinExpr) -> Result<(), ConicError> {
        if e.scalars.iter().any(|(v, _)| v.0 >= self.n_scalars) {
            return Err(ConicError::UnknownVariable {
                label: label.into(),
            });
        }
        for (x, a) in &e.matrices {
            let Some(&n) = self.matrix_dims.get(x.0) else {
                return Err(ConicError::UnknownVariable {
                    label: label.into(),
                });
            };
            if a.nrows() != n || a.ncols() != n {
                return Err(ConicError::DimensionMismatch {
                    label: label.into(),
                    expected: n,
                    got: a.nrows(),
                });
            }
        }
        Ok(())
    }

    /// Every expression references declared variables with matching sizes.
    pub fn validate(&self) -> Result<(), ConicError> {
        self.check_expr("objective", &self.objective)?;
        for c in &self.constraints {
            match &c.constraint {
                Constraint::Eq(e) | Constraint::Geq(e) => self.check_expr(&c.label, e)?,
                Constraint::Soc { bound, args } => {
                    self.check_expr(&c.label, bound)?;
                    for a in args {
                        self.check_expr(&c.label, a)?;
                    }
                }
                Constraint::Psd(x) => {
                    if x.0 >= self.matrix_dims.len() {
                        return Err(ConicError::UnknownVariable {
                            label: c.label.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Amount by which `values` violates each constraint (0 when satisfied).
    pub fn violations(&self, values: &ConicValues) -> Vec<(&str, f64)> {
        self.constraints
            .iter()
            .map(|c| {
                let v = match &c.constraint {
                    Constraint::Eq(e) => e.eval(values).abs(),
                    Constraint::Geq(e) => (-e.eval(values)).max(0.0),
                    Constraint::Soc { bound, args } => {
                        let norm = args
                            .iter()
                            .map(|a| a.eval(values).powi(2))
                            .sum::<f64>()
                            .sqrt();
                        (norm - bound.eval(values)).max(0.0)
                    }
                    Constraint::Psd(x) => (-min_eigenvalue(values.matrix(*x))).max(0.0),
                };
                (c.label.as_str(), v)
            })
            .collect()
    }

    pub fn max_violation(&self, values: &ConicValues) -> f64 {
        self.violations(values)
            .into_iter()
            .map(|(_, v)| v)
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalFailure => "numerical-failure",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub objective_value: f64,
    pub values: ConicValues,
    /// Absolute feasibility level the returned point is guaranteed to meet
    /// when `status` is optimal.
    pub solver_tolerance: f64,
    pub iterations: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: u32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            max_iter: 200,
        }
    }
}

pub trait ConicSolver {
    fn solve(&self, program: &ConicProgram) -> Result<ConicSolution, ConicError>;
}
