//! Real parametrization and real-symmetric embedding of complex Hermitian
//! matrices.
//!
//! An `n×n` Hermitian `X` is stored as `n²` reals: the diagonal `X_ii`, then
//! `Re X_ij, Im X_ij` for each pair `i < j` in row order. Its embedding
//!
//! ```text
//! emb(X) = [ Re X  −Im X ]
//!          [ Im X   Re X ]
//! ```
//!
//! is PSD iff `X` is, has every eigenvalue of `X` twice, and satisfies
//! `⟨emb(A), emb(X)⟩ = 2 Re tr(A X)`.

use nalgebra::DMatrix;

use crate::linalg::{hermitian_part, CMatrix, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HermitianEmbedding {
    n: usize,
}

impl HermitianEmbedding {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "embedding needs n >= 1");
        HermitianEmbedding { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_params(&self) -> usize {
        self.n * self.n
    }

    /// Size of the embedded real matrix.
    pub fn dim(&self) -> usize {
        2 * self.n
    }

    fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        // pairs (0,1..n), (1,2..n), ...
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    /// Parameter holding `Re X_ij` (`X_ii` on the diagonal).
    pub fn re_index(&self, i: usize, j: usize) -> usize {
        let (i, j) = (i.min(j), i.max(j));
        if i == j {
            i
        } else {
            self.n + 2 * self.pair_index(i, j)
        }
    }

    /// Parameter holding `Im X_ij` for `i < j`.
    pub fn im_index(&self, i: usize, j: usize) -> usize {
        self.n + 2 * self.pair_index(i, j) + 1
    }

    pub fn params(&self, x: &CMatrix) -> Vec<f64> {
        let mut p = vec![0.0; self.n_params()];
        for i in 0..self.n {
            p[i] = x[(i, i)].re;
            for j in i + 1..self.n {
                let z = 0.5 * (x[(i, j)] + x[(j, i)].conj());
                p[self.re_index(i, j)] = z.re;
                p[self.im_index(i, j)] = z.im;
            }
        }
        p
    }

    pub fn from_params(&self, p: &[f64]) -> CMatrix {
        let n = self.n;
        let mut x = CMatrix::zeros(n, n);
        for i in 0..n {
            x[(i, i)] = C64::new(p[i], 0.0);
            for j in i + 1..n {
                let z = C64::new(p[self.re_index(i, j)], p[self.im_index(i, j)]);
                x[(i, j)] = z;
                x[(j, i)] = z.conj();
            }
        }
        x
    }

    pub fn embed(&self, x: &CMatrix) -> DMatrix<f64> {
        let n = self.n;
        let h = hermitian_part(x);
        DMatrix::from_fn(2 * n, 2 * n, |r, c| {
            let z = h[(r % n, c % n)];
            match (r < n, c < n) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        })
    }

    /// Inverse of [`embed`](Self::embed) on matrices of embedded form.
    pub fn extract(&self, y: &DMatrix<f64>) -> CMatrix {
        let n = self.n;
        CMatrix::from_fn(n, n, |i, j| C64::new(y[(i, j)], y[(n + i, j)]))
    }

    /// Coefficients `(param, c)` with `Re tr(A X) = Σ c·p[param]` for
    /// Hermitian `X`.
    pub fn trace_coeffs(&self, a: &CMatrix) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(self.n_params());
        for i in 0..self.n {
            out.push((i, a[(i, i)].re));
        }
        for i in 0..self.n {
            for j in i + 1..self.n {
                out.push((self.re_index(i, j), a[(i, j)].re + a[(j, i)].re));
                out.push((self.im_index(i, j), a[(i, j)].im - a[(j, i)].im));
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        out
    }

    /// Linear map from parameters to the scaled upper-triangle vectorization
    /// of `emb(X)`, column by column, off-diagonals times `√2`.
    ///
    /// Returns `(row, param, coeff)` triplets; every row has at most one entry.
    pub fn svec_map(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n;
        let mut out = Vec::new();
        let mut row = 0;
        for c in 0..2 * n {
            for r in 0..=c {
                let scale = if r == c {
                    1.0
                } else {
                    std::f64::consts::SQRT_2
                };
                let (i, j) = (r % n, c % n);
                let entry = match (r < n, c < n) {
                    (true, true) | (false, false) => Some((self.re_index(i, j), 1.0)),
                    // −Im X_ij
                    (true, false) => match i.cmp(&j) {
                        std::cmp::Ordering::Less => Some((self.im_index(i, j), -1.0)),
                        std::cmp::Ordering::Greater => Some((self.im_index(j, i), 1.0)),
                        std::cmp::Ordering::Equal => None,
                    },
                    (false, true) => unreachable!("upper triangle only"),
                };
                if let Some((p, v)) = entry {
                    out.push((row, p, scale * v));
                }
                row += 1;
            }
        }
        out
    }

    /// Linear equalities on a free symmetric `2n×2n` matrix `Y` that force the
    /// embedded form: `Y[i][j] = Y[n+i][n+j]` and `Y[n+i][j] + Y[n+j][i] = 0`
    /// for `i ≤ j`. Each equality is a list of `((row, col), coeff)` with
    /// `row ≥ col`.
    pub fn structural_equalities(&self) -> Vec<Vec<((usize, usize), f64)>> {
        let n = self.n;
        let mut out = Vec::new();
        for i in 0..n {
            for j in i..n {
                out.push(vec![((j, i), 1.0), ((n + j, n + i), -1.0)]);
                if i == j {
                    out.push(vec![((n + i, i), 1.0)]);
                } else {
                    out.push(vec![((n + i, j), 1.0), ((n + j, i), 1.0)]);
                }
            }
        }
        out
    }
}
