use crate::error::{Error, Result};

/// `max c.x  s.t.  a_eq x = b_eq,  a_le x <= b_le,  x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub c: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub a_le: Vec<Vec<f64>>,
    pub b_le: Vec<f64>,
}

const PIVOT_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 100_000;

struct Tableau {
    rows: Vec<Vec<f64>>,
    /// Reduced-cost row; the last entry holds the negated objective value.
    obj: Vec<f64>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                let k = row[col];
                if k != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= k * pv;
                    }
                }
            }
        }
        let k = self.obj[col];
        if k != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= k * pv;
            }
        }
        self.basis[r] = col;
    }

    /// Bland's rule: lowest-index improving column, ties in the ratio test by
    /// lowest basic variable. Columns at or beyond `allowed` never enter.
    fn optimize(&mut self, allowed: usize, tol: f64) -> Result<()> {
        for _ in 0..MAX_PIVOTS {
            let Some(col) = (0..allowed).find(|&j| self.obj[j] < -tol) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[col];
                if a > PIVOT_TOL {
                    let ratio = row[self.width] / a;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, col),
                None => return Err(Error::Solver("LP is unbounded".into())),
            }
        }
        Err(Error::Solver("simplex pivot limit reached".into()))
    }
}

/// Two-phase dense simplex. Returns an optimal vertex.
pub fn maximize(lp: &LpProblem) -> Result<Vec<f64>> {
    let n = lp.c.len();
    if lp.a_eq.len() != lp.b_eq.len() || lp.a_le.len() != lp.b_le.len() {
        return Err(Error::InvalidInput("constraint rows and right-hand sides differ in length".into()));
    }
    if lp.a_eq.iter().chain(&lp.a_le).any(|r| r.len() != n) {
        return Err(Error::InvalidInput("constraint row width differs from objective length".into()));
    }
    if lp.b_le.iter().any(|&b| b < 0.0) {
        return Err(Error::InvalidInput("inequality right-hand sides must be non-negative".into()));
    }
    let n_le = lp.a_le.len();
    let n_eq = lp.a_eq.len();
    let width = n + n_le + n_eq;
    let slack0 = n;
    let art0 = n + n_le;

    let mut rows = Vec::with_capacity(n_le + n_eq);
    let mut basis = Vec::with_capacity(n_le + n_eq);
    for (i, (a, &b)) in lp.a_le.iter().zip(&lp.b_le).enumerate() {
        let mut row = vec![0.0; width + 1];
        row[..n].copy_from_slice(a);
        row[slack0 + i] = 1.0;
        row[width] = b;
        rows.push(row);
        basis.push(slack0 + i);
    }
    for (i, (a, &b)) in lp.a_eq.iter().zip(&lp.b_eq).enumerate() {
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        let mut row = vec![0.0; width + 1];
        for (dst, &v) in row[..n].iter_mut().zip(a) {
            *dst = sign * v;
        }
        row[art0 + i] = 1.0;
        row[width] = sign * b;
        rows.push(row);
        basis.push(art0 + i);
    }

    let scale = 1.0 + lp.c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = 1e-14 * scale;

    // Phase 1: maximize -sum(artificials).
    let mut obj = vec![0.0; width + 1];
    for j in art0..width {
        obj[j] = 1.0;
    }
    let mut t = Tableau { rows, obj, basis, width };
    for r in n_le..n_le + n_eq {
        let row = t.rows[r].clone();
        for (v, rv) in t.obj.iter_mut().zip(&row) {
            *v -= rv;
        }
    }
    if n_eq > 0 {
        t.optimize(width, 1e-12)?;
        let infeas = -t.obj[width];
        if infeas > 1e-9 {
            return Err(Error::Infeasible(format!("LP has no feasible point (phase-1 residual {infeas:e})")));
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..t.rows.len() {
            if t.basis[r] >= art0 {
                if let Some(col) = (0..art0).find(|&j| t.rows[r][j].abs() > PIVOT_TOL) {
                    t.pivot(r, col);
                }
            }
        }
    }

    // Phase 2 on the real objective; artificials may not re-enter.
    let mut obj = vec![0.0; width + 1];
    for j in 0..n {
        obj[j] = -lp.c[j];
    }
    for r in 0..t.rows.len() {
        let b = t.basis[r];
        if b < n {
            let k = obj[b];
            if k != 0.0 {
                let row = t.rows[r].clone();
                for (v, rv) in obj.iter_mut().zip(&row) {
                    *v -= k * rv;
                }
            }
        }
    }
    t.obj = obj;
    t.optimize(art0, tol)?;

    let mut x = vec![0.0; n];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.rows[r][width];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36.
        let lp = LpProblem {
            c: vec![3.0, 5.0],
            a_eq: vec![],
            b_eq: vec![],
            a_le: vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            b_le: vec![4.0, 12.0, 18.0],
        };
        let x = maximize(&lp).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_infeasibility() {
        let lp = LpProblem {
            c: vec![1.0, 2.0],
            a_eq: vec![vec![1.0, 1.0]],
            b_eq: vec![1.0],
            a_le: vec![],
            b_le: vec![],
        };
        assert_eq!(maximize(&lp).unwrap(), vec![0.0, 1.0]);
        let bad = LpProblem {
            c: vec![1.0],
            a_eq: vec![vec![1.0]],
            b_eq: vec![2.0],
            a_le: vec![vec![1.0]],
            b_le: vec![1.0],
        };
        assert!(matches!(maximize(&bad), Err(Error::Infeasible(_))));
    }

    #[test]
    fn unbounded() {
        let lp = LpProblem { c: vec![1.0], a_eq: vec![], b_eq: vec![], a_le: vec![], b_le: vec![] };
        assert!(maximize(&lp).is_err());
    }
}
