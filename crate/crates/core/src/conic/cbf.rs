//! Conic Benchmark Format (CBF, version 3) dump.
//!
//! Scalars form one free `F` block. Each Hermitian variable becomes a real
//! `2n×2n` PSD variable constrained to embedded form by structural
//! equalities, so every matrix variable is treated as PSD in the dump.
//! `Re tr(A X)` is written as `⟨½ emb(A), Y⟩`.

use std::io::{self, Write};

use super::{ConicProgram, Constraint, HermitianEmbedding, LinExpr};
use crate::linalg::hermitian_part;

type PsdEntry = (usize, usize, usize, f64);

fn psd_entries(e: &LinExpr) -> Vec<PsdEntry> {
    let mut out = Vec::new();
    for (x, a) in &e.matrices {
        let emb = HermitianEmbedding::new(a.nrows());
        let y = emb.embed(&hermitian_part(a));
        for c in 0..y.ncols() {
            for r in c..y.nrows() {
                let v = 0.5 * y[(r, c)];
                if v != 0.0 {
                    out.push((x.index(), r, c, v));
                }
            }
        }
    }
    out
}

struct Rows {
    a: Vec<(usize, usize, f64)>,
    f: Vec<(usize, PsdEntry)>,
    b: Vec<(usize, f64)>,
    n: usize,
}

impl Rows {
    fn push(&mut self, e: &LinExpr) {
        let i = self.n;
        for (v, c) in &e.scalars {
            if *c != 0.0 {
                self.a.push((i, v.index(), *c));
            }
        }
        for entry in psd_entries(e) {
            self.f.push((i, entry));
        }
        if e.constant != 0.0 {
            self.b.push((i, e.constant));
        }
        self.n += 1;
    }
}

pub fn write_cbf<W: Write>(p: &ConicProgram, out: &mut W) -> io::Result<()> {
    let mut rows = Rows {
        a: Vec::new(),
        f: Vec::new(),
        b: Vec::new(),
        n: 0,
    };
    // (cone tag, length) in row order
    let mut cones: Vec<(&str, usize)> = Vec::new();
    let push_cone =
        |cones: &mut Vec<(&str, usize)>, tag: &'static str, len: usize| match cones.last_mut() {
            Some((t, l)) if *t == tag && tag != "Q" => *l += len,
            _ => cones.push((tag, len)),
        };

    for (k, &n) in p.matrix_dims().iter().enumerate() {
        for eq in HermitianEmbedding::new(n).structural_equalities() {
            let i = rows.n;
            for ((r, c), v) in eq {
                let v = if r == c { v } else { 0.5 * v };
                rows.f.push((i, (k, r, c, v)));
            }
            rows.n += 1;
            push_cone(&mut cones, "L=", 1);
        }
    }
    for c in p.constraints() {
        match &c.constraint {
            Constraint::Eq(e) => {
                rows.push(e);
                push_cone(&mut cones, "L=", 1);
            }
            Constraint::Geq(e) => {
                rows.push(e);
                push_cone(&mut cones, "L+", 1);
            }
            Constraint::Soc { bound, args } => {
                rows.push(bound);
                for a in args {
                    rows.push(a);
                }
                push_cone(&mut cones, "Q", args.len() + 1);
            }
            Constraint::Psd(_) => {}
        }
    }

    writeln!(out, "VER\n3\n")?;
    writeln!(out, "OBJSENSE\nMAX\n")?;
    if !p.matrix_dims().is_empty() {
        writeln!(out, "PSDVAR\n{}", p.matrix_dims().len())?;
        for &n in p.matrix_dims() {
            writeln!(out, "{}", 2 * n)?;
        }
        writeln!(out)?;
    }
    if p.n_scalars() > 0 {
        writeln!(out, "VAR\n{} 1\nF {}\n", p.n_scalars(), p.n_scalars())?;
    }
    if rows.n > 0 {
        writeln!(out, "CON\n{} {}", rows.n, cones.len())?;
        for (tag, len) in &cones {
            writeln!(out, "{tag} {len}")?;
        }
        writeln!(out)?;
    }

    let obj = p.objective();
    let obj_f = psd_entries(obj);
    if !obj_f.is_empty() {
        writeln!(out, "OBJFCOORD\n{}", obj_f.len())?;
        for (j, k, l, v) in &obj_f {
            writeln!(out, "{j} {k} {l} {v:e}")?;
        }
        writeln!(out)?;
    }
    let obj_a: Vec<_> = obj.scalars.iter().filter(|(_, c)| *c != 0.0).collect();
    if !obj_a.is_empty() {
        writeln!(out, "OBJACOORD\n{}", obj_a.len())?;
        for (v, c) in obj_a {
            writeln!(out, "{} {c:e}", v.index())?;
        }
        writeln!(out)?;
    }
    if obj.constant != 0.0 {
        writeln!(out, "OBJBCOORD\n{:e}\n", obj.constant)?;
    }
    if !rows.f.is_empty() {
        writeln!(out, "FCOORD\n{}", rows.f.len())?;
        for (i, (j, k, l, v)) in &rows.f {
            writeln!(out, "{i} {j} {k} {l} {v:e}")?;
        }
        writeln!(out)?;
    }
    if !rows.a.is_empty() {
        writeln!(out, "ACOORD\n{}", rows.a.len())?;
        for (i, j, v) in &rows.a {
            writeln!(out, "{i} {j} {v:e}")?;
        }
        writeln!(out)?;
    }
    if !rows.b.is_empty() {
        writeln!(out, "BCOORD\n{}", rows.b.len())?;
        for (i, v) in &rows.b {
            writeln!(out, "{i} {v:e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::LinExpr;

    fn section<'a>(text: &'a str, name: &str) -> Vec<&'a str> {
        let mut lines = text.lines().skip_while(|l| *l != name);
        lines.next();
        lines.take_while(|l| !l.is_empty()).collect()
    }

    #[test]
    fn lp_dump() {
        let mut p = ConicProgram::new();
        let t = p.scalar();
        p.maximize(t.into());
        p.leq("cap", t, 3.0);
        let mut buf = Vec::new();
        write_cbf(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(section(&text, "VER"), vec!["3"]);
        assert_eq!(section(&text, "OBJSENSE"), vec!["MAX"]);
        assert_eq!(section(&text, "VAR"), vec!["1 1", "F 1"]);
        assert_eq!(section(&text, "CON"), vec!["1 1", "L+ 1"]);
        assert_eq!(section(&text, "ACOORD"), vec!["1", "0 0 -1e0"]);
        assert_eq!(section(&text, "BCOORD"), vec!["1", "0 3e0"]);
    }

    #[test]
    fn sdp_dump_has_structure_rows() {
        let mut p = ConicProgram::new();
        let w = p.hermitian(2);
        p.maximize(LinExpr::trace(w, 2));
        p.leq("power", LinExpr::trace(w, 2), 1.0);
        p.psd("psd", w);
        let x = p.scalar();
        p.soc("ball", vec![x.into(), LinExpr::constant(1.0)], 2.0);
        let mut buf = Vec::new();
        write_cbf(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(section(&text, "PSDVAR"), vec!["1", "4"]);
        // 3 pairs (i ≤ j) × 2 structural rows, then the power row and a 3-cone
        assert_eq!(section(&text, "CON"), vec!["10 3", "L= 6", "L+ 1", "Q 3"]);
        // objective ½ tr(emb(I) Y) = ½ Σ Y_ii
        assert_eq!(section(&text, "OBJFCOORD")[0], "4");
    }
}
