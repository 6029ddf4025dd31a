use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Stacked `[A_M; A_N]` incidence of the complete AP-STA bipartite graph.
///
/// Row `m` (STA block) and row `M + n` (AP block) both have a one in column
/// `e = n * M + m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncidenceMatrix {
    pub n_aps: usize,
    pub m_stas: usize,
    pub rows: Vec<Vec<i8>>,
}

impl IncidenceMatrix {
    pub fn sta_block(&self) -> &[Vec<i8>] {
        &self.rows[..self.m_stas]
    }

    pub fn ap_block(&self) -> &[Vec<i8>] {
        &self.rows[self.m_stas..]
    }
}

pub fn build_incidence(n_aps: usize, m_stas: usize) -> IncidenceMatrix {
    let e_count = n_aps * m_stas;
    let mut rows = vec![vec![0i8; e_count]; m_stas + n_aps];
    for n in 0..n_aps {
        for m in 0..m_stas {
            let e = n * m_stas + m;
            rows[m][e] = 1;
            rows[m_stas + n][e] = 1;
        }
    }
    IncidenceMatrix { n_aps, m_stas, rows }
}

/// Outcome of a total-unimodularity audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TuReport {
    pub unimodular: bool,
    /// Determinants evaluated (after skipping trivially singular picks).
    pub checked: u64,
    /// Row indices, column indices and determinant of the first violation.
    pub witness: Option<(Vec<usize>, Vec<usize>, i64)>,
}

/// Check every square submatrix up to `max_submatrix` for a determinant in {-1, 0, 1}.
///
/// For each row subset, columns that coincide (or vanish) on those rows would
/// only produce singular submatrices, so one representative per distinct
/// nonzero restricted column is enough.
pub fn check_total_unimodularity(mat: &[Vec<i8>], max_submatrix: usize) -> TuReport {
    let n_rows = mat.len();
    let n_cols = mat.first().map_or(0, Vec::len);
    let mut checked = 0u64;
    for k in 1..=max_submatrix.min(n_rows).min(n_cols) {
        let mut rows_found = None;
        for_each_combination(n_rows, k, |rows| {
            let mut seen: HashMap<Vec<i8>, usize> = HashMap::new();
            let mut reps: Vec<(usize, Vec<i8>)> = Vec::new();
            for c in 0..n_cols {
                let pattern: Vec<i8> = rows.iter().map(|&r| mat[r][c]).collect();
                if pattern.iter().all(|&v| v == 0) {
                    continue;
                }
                if let std::collections::hash_map::Entry::Vacant(v) = seen.entry(pattern.clone()) {
                    v.insert(c);
                    reps.push((c, pattern));
                }
            }
            if reps.len() < k {
                return true;
            }
            let mut keep_going = true;
            for_each_combination(reps.len(), k, |cols| {
                checked += 1;
                let sub: Vec<Vec<i64>> = (0..k)
                    .map(|i| cols.iter().map(|&j| reps[j].1[i] as i64).collect())
                    .collect();
                let det = bareiss_det(sub);
                if det.abs() > 1 {
                    rows_found = Some((rows.to_vec(), cols.iter().map(|&j| reps[j].0).collect(), det));
                    keep_going = false;
                }
                keep_going
            });
            keep_going
        });
        if let Some(w) = rows_found {
            return TuReport { unimodular: false, checked, witness: Some(w) };
        }
    }
    TuReport { unimodular: true, checked, witness: None }
}

/// Visit k-subsets of `0..n` in lexicographic order until `f` returns false.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize]) -> bool) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if !f(&idx) {
            return;
        }
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Fraction-free Gaussian elimination; exact for integer matrices.
fn bareiss_det(mut a: Vec<Vec<i64>>) -> i64 {
    let n = a.len();
    if n == 0 {
        return 1;
    }
    let mut sign = 1;
    let mut prev = 1i64;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&r| a[r][k] != 0) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}
