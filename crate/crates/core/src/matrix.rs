//! Clause-variable matrices and the quantities computed from them.
//!
//! A row "matches" a sign vector `x` if `x` agrees with the row's nonzero
//! pattern up to one global sign; zeros are wildcards. A matrix is
//! unsatisfiable when every `x` matches some row, in which case the minimum
//! row ℓ¹ norm [`delta`] lower-bounds the discrepancy.
//!
//! Storage is dense and row-major. Float comparisons default to an absolute
//! tolerance of 1e-9; row norms use plain summation since rows hold at most a
//! few thousand entries.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::boolean::NaeFormula;
use crate::tree::{BinaryTree, LiteralMask};
use crate::{Error, Result, ENUMERATION_LIMIT};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i8>,
}

impl SignMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<i8>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "{} entries for a {rows}×{cols} matrix",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(-1..=1).contains(*v)) {
            return Err(Error::InvalidMatrix(format!("entry {v} is not in {{-1, 0, 1}}")));
        }
        Ok(SignMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        SignMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    /// Panics on ragged input or entries outside {-1, 0, 1}; meant for literals.
    pub fn from_rows<R: AsRef<[i8]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let data: Vec<i8> = rows
            .iter()
            .flat_map(|r| {
                assert_eq!(r.as_ref().len(), cols, "ragged rows");
                r.as_ref().iter().copied()
            })
            .collect();
        SignMatrix::new(rows.len(), cols, data).expect("valid sign matrix")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: i8) {
        assert!((-1..=1).contains(&v));
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row(i).iter().filter(|&&v| v != 0).count()
    }

    pub fn col_nnz(&self, j: usize) -> usize {
        (0..self.rows).filter(|&i| self.get(i, j) != 0).count()
    }

    pub fn to_real(&self) -> RealMatrix {
        RealMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v as f64).collect(),
        }
    }

    /// Rows as (positive-column, negative-column) bitmasks, bit `j` for column `j`.
    fn row_masks(&self) -> Vec<(u32, u32)> {
        assert!(self.cols <= 32);
        (0..self.rows)
            .map(|i| {
                self.row(i).iter().enumerate().fold((0, 0), |(p, n), (j, &v)| match v {
                    1 => (p | 1 << j, n),
                    -1 => (p, n | 1 << j),
                    _ => (p, n),
                })
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows, self.cols);
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (rows, cols, data) = parse_dense(text, |tok| tok.parse::<i8>().ok().filter(|v| (-1..=1).contains(v)))?;
        SignMatrix::new(rows, cols, data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "{} entries for a {rows}×{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        Ok(RealMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        RealMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = RealMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let data: Vec<f64> = rows
            .iter()
            .flat_map(|r| {
                assert_eq!(r.as_ref().len(), cols, "ragged rows");
                r.as_ref().iter().copied()
            })
            .collect();
        RealMatrix::new(rows.len(), cols, data).expect("finite entries")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn sign(&self) -> SignMatrix {
        SignMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|&v| {
                    if v > 0.0 {
                        1
                    } else if v < 0.0 {
                        -1
                    } else {
                        0
                    }
                })
                .collect(),
        }
    }

    pub fn column_norms(&self) -> Vec<f64> {
        let mut sq = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, v) in sq.iter_mut().zip(self.row(i)) {
                *s += v * v;
            }
        }
        sq.into_iter().map(f64::sqrt).collect()
    }

    pub fn row_l1_norms(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum())
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> RealMatrix {
        RealMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &RealMatrix) -> Option<f64> {
        if self.rows != other.rows || self.cols != other.cols {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }

    /// Matrix text with each entry in shortest round-trip decimal form.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{v:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (rows, cols, data) = parse_dense(text, |tok| tok.parse::<f64>().ok())?;
        RealMatrix::new(rows, cols, data)
    }
}

fn parse_dense<T>(text: &str, entry: impl Fn(&str) -> Option<T>) -> Result<(usize, usize, Vec<T>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let bad = |line: usize, msg: String| Error::Parse { pos: line + 1, msg };
    let (hline, header) = lines.next().ok_or_else(|| bad(0, "missing `m n` header".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad(hline, "header must be two non-negative integers".into()))?;
    let [rows, cols] = dims[..] else {
        return Err(bad(hline, "header must be `m n`".into()));
    };
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (lno, line) in lines {
        if seen == rows {
            return Err(bad(lno, "more rows than declared".into()));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != cols {
            return Err(bad(lno, format!("expected {cols} entries, found {}", toks.len())));
        }
        for tok in toks {
            data.push(entry(tok).ok_or_else(|| bad(lno, format!("bad entry {tok:?}")))?);
        }
        seen += 1;
    }
    if seen != rows {
        return Err(bad(0, format!("declared {rows} rows, found {seen}")));
    }
    Ok((rows, cols, data))
}

/// One row per NAE clause, one column per variable; a recorded dummy
/// variable's column comes first, followed by the others in id order.
pub fn clause_variable_matrix(f: &NaeFormula) -> SignMatrix {
    let n = f.n_vars() as usize;
    let dummy = f.dummy_var();
    // Column of each variable id.
    let column = |var: u32| -> usize {
        match dummy {
            Some(d) if var == d => 0,
            Some(d) if var < d => var as usize,
            _ => var as usize - 1,
        }
    };
    let mut a = SignMatrix::zeros(f.len(), n);
    for (i, c) in f.clauses().iter().enumerate() {
        for l in c.literals() {
            a.set(i, column(l.var), if l.positive { 1 } else { -1 });
        }
    }
    a
}

/// `A^T`: matrix of the NAE conversion of the (masked) tree formula.
pub fn matrix_of_tree(tree: &BinaryTree, mask: &LiteralMask) -> Result<SignMatrix> {
    Ok(clause_variable_matrix(&tree.formula(mask)?.to_nae()))
}

/// Column index of the complete-tree matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HaarColumn {
    Dummy,
    /// Internal vertex addressed by its root path, `0` = left.
    Internal(String),
}

/// Entry of `A^{T_k}` at leaf `s` and column `t`: `±1` when `t` is a strict
/// prefix of `s` (sign from the next bit of `s`), `+1` for the dummy column.
pub fn haar_entry(s: &str, t: &HaarColumn) -> i8 {
    match t {
        HaarColumn::Dummy => 1,
        HaarColumn::Internal(t) => {
            if t.len() < s.len() && s.starts_with(t.as_str()) {
                match s.as_bytes()[t.len()] {
                    b'0' => 1,
                    _ => -1,
                }
            } else {
                0
            }
        }
    }
}

fn bitstrings(len: usize) -> impl Iterator<Item = String> {
    (0..1usize << len).map(move |v| {
        (0..len)
            .map(|b| if (v >> (len - 1 - b)) & 1 == 1 { '1' } else { '0' })
            .collect()
    })
}

/// Columns of `A^{T_k}`: the dummy, then internal vertices breadth-first.
pub fn haar_columns(k: usize) -> Vec<HaarColumn> {
    std::iter::once(HaarColumn::Dummy)
        .chain((0..k).flat_map(bitstrings).map(HaarColumn::Internal))
        .collect()
}

/// `A^{T_k}` assembled entry by entry from [`haar_entry`].
pub fn haar_matrix(k: usize) -> SignMatrix {
    let cols = haar_columns(k);
    let rows: Vec<String> = bitstrings(k).collect();
    let mut a = SignMatrix::zeros(rows.len(), cols.len());
    for (i, s) in rows.iter().enumerate() {
        for (j, t) in cols.iter().enumerate() {
            a.set(i, j, haar_entry(s, t));
        }
    }
    a
}

/// Minimum row ℓ¹ norm.
pub fn delta(a: &RealMatrix) -> Result<f64> {
    if a.rows == 0 {
        return Err(Error::EmptyMatrix);
    }
    Ok(a.row_l1_norms().into_iter().fold(f64::INFINITY, f64::min))
}

fn guard(what: &'static str, n: usize) -> Result<()> {
    if n > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            what,
            n,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

/// Result of [`discrepancy_bruteforce`].
#[derive(Debug, Clone, PartialEq)]
pub struct Discrepancy {
    pub value: f64,
    pub minimizer: Vec<i8>,
}

/// Sign vector for canonical index `b` over `n` entries (`-1` where bit
/// `n - 1 - j` is set); index order is lexicographic with `+1` first.
fn sign_vector(b: u64, n: usize) -> Vec<i8> {
    (0..n)
        .map(|j| if (b >> (n - 1 - j)) & 1 == 1 { -1 } else { 1 })
        .collect()
}

const TIE_TOL: f64 = 1e-12;

fn better(cand: (f64, u64), best: (f64, u64)) -> bool {
    cand.0 < best.0 - TIE_TOL || (cand.0 <= best.0 + TIE_TOL && cand.1 < best.1)
}

/// Exact `min_x ‖Ax‖_∞` over `x ∈ {±1}^n`, `n ≤ 24`, with `x_1 = +1`.
///
/// Within chunks of fixed high bits the sweep follows a Gray code so each
/// step updates `Ax` by one column. Values within 1e-12 are ties, broken
/// towards the lexicographically smallest vector; the reported value is
/// recomputed directly at the minimizer.
pub fn discrepancy_bruteforce(a: &RealMatrix) -> Result<Discrepancy> {
    let n = a.cols;
    guard("exact discrepancy", n)?;
    if n == 0 {
        return Ok(Discrepancy {
            value: 0.0,
            minimizer: Vec::new(),
        });
    }
    let columns: Vec<Vec<f64>> = (0..n).map(|j| (0..a.rows).map(|i| a.get(i, j)).collect()).collect();
    let free = n - 1;
    let low = free.min(14);
    let chunks = 1u64 << (free - low);
    let best = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let base = chunk << low;
            let mut x = sign_vector(base, n);
            let mut ax = mat_vec(a, &x);
            let mut best = (inf_norm(&ax), base);
            let mut gray = 0u64;
            for g in 1..1u64 << low {
                let bit = g.trailing_zeros() as usize;
                gray ^= 1 << bit;
                let j = n - 1 - bit;
                let s = -2.0 * x[j] as f64;
                for (v, c) in ax.iter_mut().zip(&columns[j]) {
                    *v += s * c;
                }
                x[j] = -x[j];
                let cand = (inf_norm(&ax), base | gray);
                if better(cand, best) {
                    best = cand;
                }
            }
            best
        })
        .reduce(|| (f64::INFINITY, u64::MAX), |p, q| if better(q, p) { q } else { p });
    let minimizer = sign_vector(best.1, n);
    let value = inf_norm(&mat_vec(a, &minimizer));
    Ok(Discrepancy { value, minimizer })
}

fn mat_vec(a: &RealMatrix, x: &[i8]) -> Vec<f64> {
    (0..a.rows)
        .map(|i| a.row(i).iter().zip(x).map(|(v, &s)| v * s as f64).sum())
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[inline]
fn row_matches((pos, neg): (u32, u32), neg_x: u32) -> bool {
    // s = +1: positives unflipped, negatives flipped; s = -1: the reverse.
    (pos & neg_x == 0 && neg & !neg_x == 0) || (pos & !neg_x == 0 && neg & neg_x == 0)
}

/// Rows matched by `x` up to a global sign.
pub fn match_rows(a: &SignMatrix, x: &[i8]) -> Vec<usize> {
    assert_eq!(x.len(), a.cols, "sign vector length");
    (0..a.rows)
        .filter(|&i| {
            [1i8, -1]
                .iter()
                .any(|&s| a.row(i).iter().zip(x).all(|(&v, &xj)| v == 0 || xj == s * v))
        })
        .collect()
}

/// Whether every `x ∈ {±1}^n` matches some row (`n ≤ 24`).
pub fn is_unsatisfiable_bruteforce(a: &SignMatrix) -> Result<bool> {
    let n = a.cols;
    guard("unsatisfiability check", n)?;
    let rows = a.row_masks();
    // Matching is invariant under x -> -x; fix x_1 = +1.
    let total: u64 = if n > 0 { 1 << (n - 1) } else { 1 };
    let covered = |b: u64| {
        let neg_x = (b as u32) << 1;
        rows.iter().any(|&r| row_matches(r, neg_x))
    };
    Ok(if total >= 1 << 12 {
        (0..total).into_par_iter().all(covered)
    } else {
        (0..total).all(covered)
    })
}

/// Per-row match counts over all of `{±1}^n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchReport {
    pub per_row: Vec<u64>,
    pub unmatched: u64,
    pub multiply_matched: u64,
}

impl MatchReport {
    pub fn is_partition(&self) -> bool {
        self.unmatched == 0 && self.multiply_matched == 0
    }
}

/// Exhaustive match census (`n ≤ 24`).
pub fn match_report(a: &SignMatrix) -> Result<MatchReport> {
    let n = a.cols;
    guard("match census", n)?;
    let rows = a.row_masks();
    let m = rows.len();
    let total: u64 = 1 << n;
    let chunk = 1u64 << n.min(12);
    let (per_row, unmatched, multiple) = (0..total / chunk)
        .into_par_iter()
        .map(|c| {
            let mut counts = vec![0u64; m];
            let (mut none, mut many) = (0u64, 0u64);
            for b in c * chunk..(c + 1) * chunk {
                let mut hits = 0;
                for (i, &r) in rows.iter().enumerate() {
                    if row_matches(r, b as u32) {
                        counts[i] += 1;
                        hits += 1;
                    }
                }
                match hits {
                    0 => none += 1,
                    1 => {}
                    _ => many += 1,
                }
            }
            (counts, none, many)
        })
        .reduce(
            || (vec![0; m], 0, 0),
            |(mut a, n1, m1), (b, n2, m2)| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                (a, n1 + n2, m1 + m2)
            },
        );
    Ok(MatchReport {
        per_row,
        unmatched,
        multiply_matched: multiple,
    })
}

/// Whether rows `i` and `k` share a column where they agree and one where
/// they disagree, i.e. no sign vector matches both.
pub fn rows_disjoint(a: &SignMatrix, i: usize, k: usize) -> bool {
    let (mut agree, mut disagree) = (false, false);
    for (&u, &v) in a.row(i).iter().zip(a.row(k)) {
        if u != 0 && v != 0 {
            if u == v {
                agree = true;
            } else {
                disagree = true;
            }
        }
    }
    agree && disagree
}

pub fn pairwise_disjoint(a: &SignMatrix) -> bool {
    (0..a.rows).all(|i| (i + 1..a.rows).all(|k| rows_disjoint(a, i, k)))
}

/// `Σ_i 2^{n - nnz_i + 1} = 2^n`, checked exactly by carrying powers of two
/// (a row without nonzeros matches all `2^n` vectors).
pub fn partition_count_consistent(a: &SignMatrix) -> bool {
    // Row i covers a 2^{-(nnz_i - 1)} fraction of the cube.
    let exps: Vec<usize> = (0..a.rows).map(|i| a.row_nnz(i).saturating_sub(1)).collect();
    let Some(&max) = exps.iter().max() else {
        return false;
    };
    let mut count = vec![0usize; max + 1];
    for e in exps {
        count[e] += 1;
    }
    for e in (1..=max).rev() {
        if count[e] % 2 == 1 {
            return false;
        }
        count[e - 1] += count[e] / 2;
    }
    count[0] == 1
}

/// Whether every sign vector matches exactly one row.
///
/// Uses the pairwise-disjointness and counting argument, which is exact and
/// needs no enumeration; [`is_disjoint_partition_exhaustive`] is the
/// enumerating cross-check.
pub fn is_disjoint_partition(a: &SignMatrix) -> bool {
    pairwise_disjoint(a) && partition_count_consistent(a)
}

pub fn is_disjoint_partition_exhaustive(a: &SignMatrix) -> Result<bool> {
    Ok(match_report(a)?.is_partition())
}

/// Divides each column by its ℓ² norm; zero columns stay zero.
pub fn column_normalize(a: &RealMatrix) -> RealMatrix {
    let norms = a.column_norms();
    let mut out = a.clone();
    for i in 0..a.rows {
        for (j, &nrm) in norms.iter().enumerate() {
            if nrm > 0.0 {
                out.set(i, j, a.get(i, j) / nrm);
            }
        }
    }
    out
}

/// `Â^{T_k}`.
pub fn normalized_haar(k: usize) -> RealMatrix {
    column_normalize(&haar_matrix(k).to_real())
}

/// `φ(A) = [A I; A -I] / √2`, of size `2m × (n + m)`; preserves
/// normalization and unsatisfiability and maps δ to `(1 + δ)/√2`.
pub fn phi(a: &RealMatrix) -> RealMatrix {
    let (m, n) = (a.rows, a.cols);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = RealMatrix::zeros(2 * m, n + m);
    for i in 0..m {
        for j in 0..n {
            let v = a.get(i, j) * s;
            out.set(i, j, v);
            out.set(m + i, j, v);
        }
        out.set(i, n + i, s);
        out.set(m + i, n + i, -s);
    }
    out
}

/// Row and column permutations taking `φ(Â^{T_k})` to `Â^{T_{k+1}}`:
/// `row_to[r]` / `col_to[c]` is the target index of row `r` / column `c`.
///
/// Top-block row `s` becomes leaf `s0`, bottom-block row `s` becomes leaf
/// `s1`; columns keep their order (old columns, then the new depth-`k`
/// vertices in old-leaf order, which is breadth-first order).
pub fn recursion_permutation(k: usize) -> (Vec<usize>, Vec<usize>) {
    let leaves = 1usize << k;
    let rows = (0..2 * leaves)
        .map(|r| if r < leaves { 2 * r } else { 2 * (r - leaves) + 1 })
        .collect();
    let cols = (0..2 * leaves).collect();
    (rows, cols)
}

/// Checks `φ(Â^{T_k}) = Â^{T_{k+1}}` under [`recursion_permutation`]
/// entrywise to 1e-12, for `1 ≤ k ≤ 10`.
pub fn recursion_check(k: usize) -> Result<bool> {
    if !(1..=10).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "recursion check needs 1 ≤ k ≤ 10, got {k}"
        )));
    }
    let lhs = phi(&normalized_haar(k));
    let rhs = normalized_haar(k + 1);
    let (row_to, col_to) = recursion_permutation(k);
    if lhs.rows != rhs.rows || lhs.cols != rhs.cols {
        return Ok(false);
    }
    for r in 0..lhs.rows {
        for c in 0..lhs.cols {
            if (lhs.get(r, c) - rhs.get(row_to[r], col_to[c])).abs() > 1e-12 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Outcome of [`regular_partition_search`].
#[derive(Debug, Clone)]
pub struct RegularSearch {
    /// Complete row-support configurations that survived the support-level
    /// constraints and went on to sign search.
    pub support_configs: u64,
    pub found: Option<SignMatrix>,
}

/// Exhaustive search for a `size × size` sign matrix with `nnz` nonzeros in
/// every row and every column whose rows are pairwise disjoint (agree and
/// disagree somewhere). With `size · 2^{size - nnz + 1} = 2^size` such a
/// matrix is then a disjoint partition of the cube.
///
/// Rows are generated in non-decreasing support order with row 0 fixed to
/// the first `nnz` columns, and every row's first nonzero is `+1`; these
/// only quotient out row order, column order, and per-row global sign.
pub fn regular_partition_search(size: usize, nnz: usize) -> RegularSearch {
    assert!(size <= 16 && nnz <= size);
    let supports: Vec<u32> = (0u32..1 << size).filter(|s| s.count_ones() as usize == nnz).collect();
    let mut search = SupportSearch {
        size,
        nnz,
        supports: &supports,
        chosen: Vec::new(),
        col_count: vec![0; size],
        configs: 0,
        found: None,
    };
    let first = (1u32 << nnz) - 1;
    if let Some(start) = supports.iter().position(|&s| s == first) {
        search.push(first);
        search.extend(start);
    }
    RegularSearch {
        support_configs: search.configs,
        found: search.found,
    }
}

struct SupportSearch<'a> {
    size: usize,
    nnz: usize,
    supports: &'a [u32],
    chosen: Vec<u32>,
    col_count: Vec<usize>,
    configs: u64,
    found: Option<SignMatrix>,
}

impl SupportSearch<'_> {
    fn push(&mut self, s: u32) {
        self.chosen.push(s);
        for j in 0..self.size {
            if s >> j & 1 == 1 {
                self.col_count[j] += 1;
            }
        }
    }

    fn pop(&mut self) {
        let s = self.chosen.pop().expect("nonempty");
        for j in 0..self.size {
            if s >> j & 1 == 1 {
                self.col_count[j] -= 1;
            }
        }
    }

    fn extend(&mut self, from: usize) {
        if self.found.is_some() {
            return;
        }
        if self.chosen.len() == self.size {
            self.configs += 1;
            self.found = sign_search(&self.chosen, self.size);
            return;
        }
        for idx in from..self.supports.len() {
            let s = self.supports[idx];
            let fits = (0..self.size).all(|j| s >> j & 1 == 0 || self.col_count[j] < self.nnz);
            // Disjointness needs an agreeing and a disagreeing column.
            let overlaps = self.chosen.iter().all(|&c| (c & s).count_ones() >= 2);
            if fits && overlaps {
                self.push(s);
                self.extend(idx);
                self.pop();
                if self.found.is_some() {
                    return;
                }
            }
        }
    }
}

fn sign_search(supports: &[u32], size: usize) -> Option<SignMatrix> {
    // negative-column masks per row
    fn go(supports: &[u32], negs: &mut Vec<u32>) -> bool {
        let r = negs.len();
        if r == supports.len() {
            return true;
        }
        let s = supports[r];
        let lead = s & s.wrapping_neg();
        let free = s & !lead;
        // Enumerate subsets of `free` as the negative columns.
        let mut sub = 0u32;
        loop {
            let ok = (0..r).all(|q| {
                let common = supports[q] & s;
                let differ = (negs[q] ^ sub) & common;
                differ != 0 && differ != common
            });
            if ok {
                negs.push(sub);
                if go(supports, negs) {
                    return true;
                }
                negs.pop();
            }
            if sub == free {
                return false;
            }
            sub = (sub.wrapping_sub(free)) & free;
        }
    }
    let mut negs = Vec::new();
    if !go(supports, &mut negs) {
        return None;
    }
    let mut a = SignMatrix::zeros(supports.len(), size);
    for (i, (&s, &neg)) in supports.iter().zip(&negs).enumerate() {
        for j in 0..size {
            if s >> j & 1 == 1 {
                a.set(i, j, if neg >> j & 1 == 1 { -1 } else { 1 });
            }
        }
    }
    Some(a)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::boolean::{brute_force_unsat, Clause, Literal, NaeFormula};
    use crate::tree::{complete_tree, random_tree};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn example_tree_like() -> SignMatrix {
        SignMatrix::from_rows(&[[1, 1, 1, 0], [1, 1, -1, 0], [1, -1, 0, 1], [1, -1, 0, -1]])
    }

    pub(crate) fn example_regular() -> SignMatrix {
        SignMatrix::from_rows(&[[1, 0, 1, 1], [0, 1, 1, -1], [1, 1, -1, 0], [1, -1, 0, -1]])
    }

    fn a_t3() -> SignMatrix {
        SignMatrix::from_rows(&[
            [1, 1, 1, 0, 1, 0, 0, 0],
            [1, 1, 1, 0, -1, 0, 0, 0],
            [1, 1, -1, 0, 0, 1, 0, 0],
            [1, 1, -1, 0, 0, -1, 0, 0],
            [1, -1, 0, 1, 0, 0, 1, 0],
            [1, -1, 0, 1, 0, 0, -1, 0],
            [1, -1, 0, -1, 0, 0, 0, 1],
            [1, -1, 0, -1, 0, 0, 0, -1],
        ])
    }

    fn lit(v: i64) -> Literal {
        Literal::from_dimacs(v).unwrap()
    }

    #[test]
    fn nae_example_matrix() {
        let clauses = [vec![-1, 2, -5], vec![2, -3, 4, -6], vec![1, 4, 5]]
            .into_iter()
            .map(|c| Clause::new(c.into_iter().map(lit)).unwrap())
            .collect();
        let f = NaeFormula::new(6, clauses).unwrap();
        assert_eq!(
            clause_variable_matrix(&f),
            SignMatrix::from_rows(&[[-1, 1, 0, 0, -1, 0], [0, 1, -1, 1, 0, -1], [1, 0, 0, 1, 1, 0]])
        );
    }

    #[test]
    fn tree_matrices_match_displays() {
        let none = LiteralMask::empty();
        let m = |k| matrix_of_tree(&complete_tree(k).unwrap(), &none).unwrap();
        assert_eq!(m(0), SignMatrix::from_rows(&[[1]]));
        assert_eq!(m(1), SignMatrix::from_rows(&[[1, 1], [1, -1]]));
        assert_eq!(m(2), example_tree_like());
        assert_eq!(m(3), a_t3());
        for k in 0..=6 {
            assert_eq!(m(k), haar_matrix(k as usize), "k = {k}");
        }
        let empty = crate::boolean::CnfFormula::new(0, vec![]).unwrap().to_nae();
        let e = clause_variable_matrix(&empty);
        assert_eq!((e.rows(), e.cols()), (0, 1));
    }

    #[test]
    fn five_clause_formula_matrix() {
        let t = BinaryTree::parse("(w (x () (z () ())) (y () ()))").unwrap();
        let a = matrix_of_tree(&t, &LiteralMask::empty()).unwrap();
        assert_eq!((a.rows(), a.cols()), (5, 5));
        assert_eq!(a.row(0), &[1, 1, 1, 0, 0]);
        assert_eq!(a.row(4), &[1, -1, 0, 0, -1]);
    }

    #[test]
    fn haar_entry_examples() {
        let t = |s: &str| HaarColumn::Internal(s.into());
        assert_eq!(haar_entry("01", &t("0")), -1);
        assert_eq!(haar_entry("01", &t("1")), 0);
        assert_eq!(haar_entry("01", &t("")), 1);
        assert_eq!(haar_entry("01", &t("01")), 0);
        assert_eq!(haar_entry("01", &HaarColumn::Dummy), 1);
        assert_eq!(haar_matrix(2), example_tree_like());
    }

    #[test]
    fn delta_examples() {
        let d2 = delta(&normalized_haar(2)).unwrap();
        assert!((d2 - 1.7071067811865475).abs() < 1e-12);
        assert_eq!(delta(&RealMatrix::identity(3)).unwrap(), 1.0);
        let r = column_normalize(&example_regular().to_real());
        assert!((delta(&r).unwrap() - 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(delta(&RealMatrix::zeros(0, 3)), Err(Error::EmptyMatrix));
    }

    #[test]
    fn discrepancy_examples() {
        let a1 = SignMatrix::from_rows(&[[1, 1], [1, -1]]).to_real();
        let d = discrepancy_bruteforce(&a1).unwrap();
        assert_eq!(d.value, 2.0);
        assert_eq!(d.minimizer, vec![1, 1]);
        assert_eq!(discrepancy_bruteforce(&RealMatrix::zeros(3, 4)).unwrap().value, 0.0);
        let a2 = normalized_haar(2);
        assert!(discrepancy_bruteforce(&a2).unwrap().value >= delta(&a2).unwrap() - 1e-12);
        assert!(matches!(
            discrepancy_bruteforce(&RealMatrix::zeros(1, 25)),
            Err(Error::TooLarge { .. })
        ));
    }

    /// Plain enumeration oracle for the Gray-code sweep.
    fn discrepancy_oracle(a: &RealMatrix) -> (f64, Vec<i8>) {
        let n = a.cols();
        let mut best = (f64::INFINITY, Vec::new());
        for b in 0..1u64 << (n - 1) {
            let x = sign_vector(b, n);
            let v = inf_norm(&mat_vec(a, &x));
            if v < best.0 - TIE_TOL {
                best = (v, x);
            }
        }
        best
    }

    #[test]
    fn discrepancy_matches_plain_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..40 {
            let (m, n) = (rng.gen_range(1..6), rng.gen_range(1..17));
            let data = (0..m * n)
                .map(|_| {
                    if trial % 2 == 0 {
                        rng.gen_range(-1..=1) as f64
                    } else {
                        rng.gen_range(-1.0..1.0)
                    }
                })
                .collect();
            let a = RealMatrix::new(m, n, data).unwrap();
            let got = discrepancy_bruteforce(&a).unwrap();
            let (value, x) = discrepancy_oracle(&a);
            assert!((got.value - value).abs() < 1e-12);
            assert_eq!(got.minimizer, x);
        }
    }

    #[test]
    fn unsatisfiability_examples() {
        assert!(is_unsatisfiable_bruteforce(&example_tree_like()).unwrap());
        assert!(is_unsatisfiable_bruteforce(&example_regular()).unwrap());
        assert!(is_unsatisfiable_bruteforce(&SignMatrix::from_rows(&[[1, 0]])).unwrap());
        assert!(!is_unsatisfiable_bruteforce(&SignMatrix::from_rows(&[[1, 1]])).unwrap());
    }

    #[test]
    fn match_rows_examples() {
        assert_eq!(match_rows(&example_tree_like(), &[1, 1, 1, 1]), vec![0]);
        assert_eq!(match_rows(&SignMatrix::zeros(1, 3), &[1, -1, 1]), vec![0]);
        for k in 0..=4 {
            let a = haar_matrix(k);
            let n = a.cols();
            let report = match_report(&a).unwrap();
            assert!(report.is_partition());
            let expect = (1u64 << n) >> k;
            assert!(report.per_row.iter().all(|&c| c == expect), "k = {k}");
        }
    }

    #[test]
    fn partition_examples() {
        for k in 0..=4 {
            let a = haar_matrix(k);
            assert!(is_disjoint_partition(&a));
            assert!(is_disjoint_partition_exhaustive(&a).unwrap());
            assert!(partition_count_consistent(&a));
        }
        assert!(is_disjoint_partition(&example_regular()));
        assert!(is_disjoint_partition_exhaustive(&example_regular()).unwrap());
        let twins = SignMatrix::from_rows(&[[1, 1], [1, 1]]);
        assert!(!is_disjoint_partition(&twins));
        assert!(!is_disjoint_partition_exhaustive(&twins).unwrap());
        assert!(is_disjoint_partition(&SignMatrix::zeros(1, 3)));
    }

    #[test]
    fn column_norms_of_haar_matrices() {
        for k in 1..=8usize {
            let norms = haar_matrix(k).to_real().column_norms();
            let big = 2f64.powf(k as f64 / 2.0);
            assert_eq!(norms.iter().filter(|&&v| (v - big).abs() < 1e-12).count(), 2);
            for a in 1..k {
                let target = 2f64.powf((k - a) as f64 / 2.0);
                let count = norms.iter().filter(|&&v| (v - target).abs() < 1e-12).count();
                assert_eq!(count, 1 << a, "k = {k}, a = {a}");
            }
        }
        let a1 = normalized_haar(1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let want = RealMatrix::from_rows(&[[s, s], [s, -s]]);
        assert!(a1.max_abs_diff(&want).unwrap() < 1e-15);
        let z = column_normalize(&RealMatrix::from_rows(&[[0.0, 2.0], [0.0, 0.0]]));
        assert_eq!(z, RealMatrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]));
    }

    #[test]
    fn haar_rows_flat_and_columns_orthonormal() {
        for k in 0..=12u32 {
            let a = normalized_haar(k as usize);
            let target = crate::complete_tree_value(k);
            assert!(a.row_l1_norms().iter().all(|v| (v - target).abs() < 1e-12));
        }
        for k in 0..=6 {
            let a = normalized_haar(k);
            for p in 0..a.cols() {
                for q in 0..a.cols() {
                    let g: f64 = (0..a.rows()).map(|i| a.get(i, p) * a.get(i, q)).sum();
                    let want = if p == q { 1.0 } else { 0.0 };
                    assert!((g - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn phi_examples() {
        let one = RealMatrix::from_rows(&[[1.0]]);
        assert!(phi(&one).max_abs_diff(&normalized_haar(1)).unwrap() < 1e-15);
        let ident = RealMatrix::identity(3);
        assert!((delta(&phi(&ident)).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        let mut a = one;
        let mut d = 1.0;
        for step in 0..100 {
            if step < 8 {
                a = phi(&a);
                assert!((delta(&a).unwrap() - (1.0 + d) / 2f64.sqrt()).abs() < 1e-12);
            }
            let next = (1.0 + d) / 2f64.sqrt();
            assert!(next >= d && next < crate::ONE_PLUS_SQRT2);
            d = next;
        }
        let prev = d;
        assert!((prev - crate::ONE_PLUS_SQRT2).abs() < 1e-9);
    }

    #[test]
    fn recursion_holds() {
        for k in 1..=6 {
            assert!(recursion_check(k).unwrap(), "k = {k}");
        }
        let (rows, cols) = recursion_permutation(3);
        let mut r = rows.clone();
        r.sort();
        assert_eq!(r, (0..16).collect::<Vec<_>>());
        assert_eq!(cols, (0..16).collect::<Vec<_>>());
        assert!(recursion_check(0).is_err());
    }

    #[test]
    fn regular_partitions_exist_for_k2_but_not_k3() {
        let k2 = regular_partition_search(4, 3);
        let a = k2.found.expect("a 4×4 regular partition exists");
        assert!(is_disjoint_partition_exhaustive(&a).unwrap());
        assert!((0..4).all(|j| a.col_nnz(j) == 3));
        // Experimental: exhaustive at this size, not a proof for larger k.
        let k3 = regular_partition_search(8, 4);
        assert!(k3.found.is_none());
        assert_eq!(k3.support_configs, 0);
    }

    #[test]
    fn text_formats() {
        let a = a_t3();
        assert_eq!(SignMatrix::parse(&a.to_text()).unwrap(), a);
        let r = normalized_haar(3);
        assert_eq!(RealMatrix::parse(&r.to_text()).unwrap(), r);
        assert!(SignMatrix::parse("2 2\n1 0\n").is_err());
        assert!(SignMatrix::parse("1 2\n1 2\n").is_err());
        assert!(RealMatrix::parse("1 1\nnan\n").is_err());
        let empty = SignMatrix::zeros(0, 1);
        assert_eq!(SignMatrix::parse(&empty.to_text()).unwrap(), empty);
    }

    #[test]
    fn discrepancy_dominates_delta_on_unsatisfiable_tree_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..30 {
            let t = random_tree(rng.gen_range(1..=10), &mut rng);
            let mask = LiteralMask::random(&t, 0.2, &mut rng);
            let a = matrix_of_tree(&t, &mask).unwrap();
            assert!(is_unsatisfiable_bruteforce(&a).unwrap());
            let r = column_normalize(&a.to_real());
            let d = discrepancy_bruteforce(&r).unwrap().value;
            assert!(d >= delta(&r).unwrap() - 1e-12);
        }
    }

    fn arb_sign_matrix() -> impl Strategy<Value = SignMatrix> {
        (1usize..7, 1usize..9).prop_flat_map(|(m, n)| {
            proptest::collection::vec(-1i8..=1, m * n).prop_map(move |d| SignMatrix::new(m, n, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn unsat_matrix_iff_unsat_nae_formula(a in arb_sign_matrix()) {
            let clauses = (0..a.rows())
                .map(|i| Clause::new(a.row(i).iter().enumerate().filter(|(_, &v)| v != 0).map(|(j, &v)| Literal { var: j as u32 + 1, positive: v > 0 })).unwrap())
                .collect();
            let f = NaeFormula::new(a.cols() as u32, clauses).unwrap();
            prop_assert_eq!(is_unsatisfiable_bruteforce(&a).unwrap(), brute_force_unsat(&f).unwrap().is_unsat());
        }

        #[test]
        fn partition_fast_path_matches_enumeration(a in arb_sign_matrix()) {
            prop_assert_eq!(is_disjoint_partition(&a), is_disjoint_partition_exhaustive(&a).unwrap());
        }

        #[test]
        fn delta_of_phi(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = column_normalize(&RealMatrix::new(rows, cols, data).unwrap());
            let lhs = delta(&phi(&a)).unwrap();
            let rhs = (1.0 + delta(&a).unwrap()) / 2f64.sqrt();
            prop_assert!((lhs - rhs).abs() < 1e-12);
            prop_assert!(phi(&a).column_norms().iter().all(|&v| v <= 1.0 + 1e-12));
        }
    }
}
