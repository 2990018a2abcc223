//! Optimal normalization of a clause-variable matrix.
//!
//! For clause supports `C_i` and variable supports `V_j` the primal program
//!
//! ```text
//! maximize   min_i Σ_{j ∈ C_i} a_ij
//! subject to Σ_{i ∈ V_j} a_ij² ≤ 1 for every j,   a ≥ 0
//! ```
//!
//! has the dual `minimize Σ_j ‖μ_{V_j}‖₂` over the probability simplex. The
//! solvers here work on the dual and recover a primal point from the KKT
//! relation `a_ij = μ_i / ‖μ_{V_j}‖`; the duality gap is the certificate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boolean::{Incidence, NaeFormula};
use crate::matrix::{clause_variable_matrix, RealMatrix, SignMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NormProblem {
    incidence: Incidence,
}

impl NormProblem {
    pub fn new(incidence: Incidence) -> Result<Self> {
        if let Some(i) = incidence.clause_vars.iter().position(|c| c.is_empty()) {
            return Err(Error::InvalidArgument(format!("clause {} has no variables", i + 1)));
        }
        Ok(NormProblem { incidence })
    }

    /// Columns follow the clause-variable matrix (dummy first).
    pub fn from_nae(f: &NaeFormula) -> Result<Self> {
        Self::from_sign_matrix(&clause_variable_matrix(f))
    }

    pub fn from_sign_matrix(a: &SignMatrix) -> Result<Self> {
        let clause_vars = (0..a.rows())
            .map(|i| (0..a.cols()).filter(|&j| a.get(i, j) != 0).collect())
            .collect();
        Self::new(Incidence::from_clause_vars(a.cols(), clause_vars))
    }

    pub fn m(&self) -> usize {
        self.incidence.m()
    }

    pub fn n(&self) -> usize {
        self.incidence.n()
    }

    pub fn incidence(&self) -> &Incidence {
        &self.incidence
    }

    /// `‖μ_{V_j}‖` for every column.
    fn column_norms(&self, mu: &[f64]) -> Vec<f64> {
        self.incidence
            .var_clauses
            .iter()
            .map(|v| v.iter().map(|&i| mu[i] * mu[i]).sum::<f64>().sqrt())
            .collect()
    }

    /// `g_i = Σ_{j ∈ C_i} 1/‖μ_{V_j}‖` over columns of positive norm; the
    /// dual gradient is `μ_i g_i`.
    fn inverse_norm_sums(&self, norms: &[f64]) -> Vec<f64> {
        self.incidence
            .clause_vars
            .iter()
            .map(|c| c.iter().filter(|&&j| norms[j] > 0.0).map(|&j| 1.0 / norms[j]).sum())
            .collect()
    }
}

/// Point of the probability simplex over clauses.
#[derive(Debug, Clone, PartialEq)]
pub struct DualWeights {
    mu: Vec<f64>,
}

impl DualWeights {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::InvalidWeights("no clauses".into()));
        }
        if mu.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidWeights("weights must be finite and non-negative".into()));
        }
        let sum: f64 = mu.iter().sum();
        if (sum - 1.0).abs() > 1e-12 * mu.len().max(1) as f64 {
            return Err(Error::InvalidWeights(format!("weights sum to {sum}, not 1")));
        }
        Ok(DualWeights { mu })
    }

    pub fn uniform(m: usize) -> Self {
        DualWeights {
            mu: vec![1.0 / m as f64; m],
        }
    }

    /// Rescales non-negative weights with positive total onto the simplex.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || weights.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidWeights(
                "need non-negative weights with positive sum".into(),
            ));
        }
        DualWeights::new(weights.into_iter().map(|v| v / sum).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.mu
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

/// Non-negative weights `a_ij`, stored along each clause's support.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalWeights {
    rows: Vec<Vec<(usize, f64)>>,
}

impl PrimalWeights {
    /// `rows[i]` lists `(j, a_ij)`; every `j ∈ C_i` must appear exactly once.
    pub fn new(p: &NormProblem, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != p.m() {
            return Err(Error::DimensionMismatch {
                expected: p.m(),
                got: rows.len(),
            });
        }
        for (i, (row, support)) in rows.iter().zip(&p.incidence.clause_vars).enumerate() {
            let mut cols: Vec<usize> = row.iter().map(|&(j, _)| j).collect();
            cols.sort_unstable();
            if &cols != support {
                return Err(Error::InvalidWeights(format!(
                    "row {} does not match its clause support",
                    i + 1
                )));
            }
            if row.iter().any(|&(_, v)| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::InvalidWeights(format!(
                    "row {} has a negative or non-finite weight",
                    i + 1
                )));
            }
        }
        Ok(PrimalWeights { rows })
    }

    /// Entries taken from `|A_ij|` on the problem's supports.
    pub fn from_matrix(p: &NormProblem, a: &RealMatrix) -> Result<Self> {
        let rows = p
            .incidence
            .clause_vars
            .iter()
            .enumerate()
            .map(|(i, c)| c.iter().map(|&j| (j, a.get(i, j).abs())).collect())
            .collect();
        PrimalWeights::new(p, rows)
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.rows[i].iter().find(|&&(c, _)| c == j).map(|&(_, v)| v)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(_, v)| v).sum()).collect()
    }

    pub fn column_sq_norms(&self, n: usize) -> Vec<f64> {
        let mut sq = vec![0.0; n];
        for r in &self.rows {
            for &(j, v) in r {
                sq[j] += v * v;
            }
        }
        sq
    }

    pub fn is_feasible(&self, n: usize) -> bool {
        self.column_sq_norms(n).iter().all(|&s| s <= 1.0 + 1e-9)
    }

    /// The normalized matrix: `a_ij` carrying the sign of `signs_ij`.
    pub fn to_matrix(&self, signs: &SignMatrix) -> RealMatrix {
        let mut out = RealMatrix::zeros(signs.rows(), signs.cols());
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, v) in r {
                out.set(i, j, v * signs.get(i, j) as f64);
            }
        }
        out
    }
}

pub fn dual_objective(p: &NormProblem, mu: &DualWeights) -> f64 {
    p.column_norms(&mu.mu).iter().sum()
}

/// Smallest row sum; rejects points violating a column constraint by more
/// than 1e-9.
pub fn primal_objective(p: &NormProblem, a: &PrimalWeights) -> Result<f64> {
    if let Some(j) = a.column_sq_norms(p.n()).iter().position(|&s| s > 1.0 + 1e-9) {
        return Err(Error::Infeasible(format!("column {} has norm above 1", j + 1)));
    }
    Ok(a.row_sums().into_iter().fold(f64::INFINITY, f64::min))
}

/// Euclidean projection onto the probability simplex (sort and threshold).
pub fn simplex_project(v: &[f64]) -> DualWeights {
    assert!(!v.is_empty(), "projection needs at least one coordinate");
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    let mut mu: Vec<f64> = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    let sum: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|x| *x /= sum);
    DualWeights { mu }
}

/// KKT primal point for `mu`. Columns with `‖μ_{V_j}‖ = 0` are filled with
/// `1/√|V_j|`, so every nonempty column has norm exactly 1.
pub fn recover_primal(p: &NormProblem, mu: &DualWeights) -> PrimalWeights {
    let norms = p.column_norms(&mu.mu);
    let fill: Vec<f64> = p
        .incidence
        .var_clauses
        .iter()
        .map(|v| 1.0 / (v.len().max(1) as f64).sqrt())
        .collect();
    let rows = p
        .incidence
        .clause_vars
        .iter()
        .enumerate()
        .map(|(i, c)| {
            c.iter()
                .map(|&j| {
                    let v = if norms[j] > 0.0 { mu.mu[i] / norms[j] } else { fill[j] };
                    (j, v)
                })
                .collect()
        })
        .collect();
    PrimalWeights { rows }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// `μ_i ∝ 1/g_i(μ)`: exact alternating minimization of the variational
    /// form `‖v‖ = min_w (‖v‖²/w + w)/2`, monotone in the dual objective.
    Reweighted,
    /// Projected subgradient with steps `s₀/√t`, `s₀ = 1/max(1, √m)`.
    Subgradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative gap target: stop once `gap ≤ tol · max(1, dual)`.
    pub tol: f64,
    pub max_iter: u64,
    pub seed: u64,
    pub method: Method,
    /// Random simplex restarts allowed when progress stalls.
    pub restarts: u32,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-6,
            max_iter: 200_000,
            seed: 0,
            method: Method::Reweighted,
            restarts: 0,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_max_iter(mut self, max_iter: u64) -> Self {
        self.max_iter = max_iter;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub iterations: u64,
    pub converged: bool,
    pub seed: u64,
    pub tol: f64,
}

/// What the observer sees at every iterate.
#[derive(Debug, Clone, Copy)]
pub struct Iterate<'a> {
    pub iteration: u64,
    pub mu: &'a [f64],
    /// Dual objective at `mu`.
    pub dual: f64,
    /// Primal objective of `recover_primal(mu)`.
    pub primal: f64,
    pub best_dual: f64,
    pub best_primal: f64,
}

const STALL_WINDOW: u64 = 5_000;

pub fn solve_dual(p: &NormProblem, opts: &SolverOptions) -> Result<(DualWeights, SolveReport)> {
    solve_dual_observed(p, opts, |_| {})
}

/// Minimizes the dual from the uniform point, keeping the best iterate.
/// Non-convergence within `max_iter` is reported, not an error.
pub fn solve_dual_observed(
    p: &NormProblem,
    opts: &SolverOptions,
    mut observe: impl FnMut(&Iterate<'_>),
) -> Result<(DualWeights, SolveReport)> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let m = p.m();
    if m == 0 {
        return Err(Error::EmptyMatrix);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let s0 = 1.0 / (m as f64).sqrt().max(1.0);
    let mut mu = vec![1.0 / m as f64; m];
    let mut best_mu = mu.clone();
    let (mut best_dual, mut best_primal) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut restarts_left = opts.restarts;
    let mut last_improvement = 0;
    let mut step_clock = 0u64;
    let mut iteration = 0;
    loop {
        let norms = p.column_norms(&mu);
        let g = p.inverse_norm_sums(&norms);
        let dual: f64 = norms.iter().sum();
        // Row sums of the KKT primal point; rows whose columns all vanish
        // are filled like recover_primal does.
        let primal = primal_objective(p, &recover_primal(p, &DualWeights { mu: mu.clone() }))?;
        if dual < best_dual {
            if dual < best_dual - 1e-15 * best_dual.abs().max(1.0) {
                last_improvement = iteration;
            }
            best_dual = dual;
            best_mu.clone_from(&mu);
        }
        best_primal = best_primal.max(primal);
        observe(&Iterate {
            iteration,
            mu: &mu,
            dual,
            primal,
            best_dual,
            best_primal,
        });
        let gap = best_dual - best_primal;
        if gap <= opts.tol * best_dual.max(1.0) || iteration >= opts.max_iter {
            let report = SolveReport {
                primal_value: best_primal,
                dual_value: best_dual,
                gap,
                iterations: iteration,
                converged: gap <= opts.tol * best_dual.max(1.0),
                seed: opts.seed,
                tol: opts.tol,
            };
            return Ok((DualWeights { mu: best_mu }, report));
        }
        iteration += 1;
        step_clock += 1;
        if restarts_left > 0 && iteration - last_improvement > STALL_WINDOW {
            restarts_left -= 1;
            last_improvement = iteration;
            step_clock = 1;
            let e: Vec<f64> = (0..m).map(|_| -rng.gen_range(f64::MIN_POSITIVE..1.0).ln()).collect();
            let sum: f64 = e.iter().sum();
            mu = e.into_iter().map(|v| v / sum).collect();
            continue;
        }
        mu = match opts.method {
            Method::Reweighted => {
                let inv: Vec<f64> = g.iter().map(|&gi| if gi > 0.0 { 1.0 / gi } else { 0.0 }).collect();
                let sum: f64 = inv.iter().sum();
                inv.into_iter().map(|v| v / sum).collect()
            }
            Method::Subgradient => {
                let step = s0 / (step_clock as f64).sqrt();
                let moved: Vec<f64> = mu.iter().zip(&g).map(|(&x, &gi)| x - step * x * gi).collect();
                simplex_project(&moved).mu
            }
        };
    }
}

/// Solves the dual and returns the recovered primal point of the best dual
/// iterate. The report's primal value is the best over all iterates, which
/// can exceed the returned point's own objective.
pub fn optimal_normalization(
    p: &NormProblem,
    opts: &SolverOptions,
) -> Result<(PrimalWeights, DualWeights, SolveReport)> {
    let (mu, report) = solve_dual(p, opts)?;
    Ok((recover_primal(p, &mu), mu, report))
}

/// Whether the arrow matrix `[[t·I, y], [yᵀ, t]]` is positive semidefinite,
/// by pivoted Cholesky with pivot tolerance 1e-10 (scaled by `max(1, t)`).
pub fn schur_psd_check(y: &[f64], t: f64) -> bool {
    let d = y.len();
    assert!(d <= 64, "arrow matrices are limited to d ≤ 64");
    let size = d + 1;
    let mut m = vec![0.0; size * size];
    for i in 0..d {
        m[i * size + i] = t;
        m[i * size + d] = y[i];
        m[d * size + i] = y[i];
    }
    m[d * size + d] = t;
    psd_by_pivoted_cholesky(&mut m, size, 1e-10 * t.abs().max(1.0))
}

fn psd_by_pivoted_cholesky(m: &mut [f64], size: usize, tol: f64) -> bool {
    let mut active: Vec<usize> = (0..size).collect();
    while !active.is_empty() {
        let (pos, &p) = active
            .iter()
            .enumerate()
            .max_by(|a, b| m[a.1 * size + a.1].total_cmp(&m[b.1 * size + b.1]))
            .expect("nonempty");
        let pivot = m[p * size + p];
        if pivot < -tol {
            return false;
        }
        if pivot <= tol {
            // Remaining Schur complement must vanish.
            return active
                .iter()
                .all(|&i| active.iter().all(|&k| m[i * size + k].abs() <= tol));
        }
        active.swap_remove(pos);
        for &i in &active {
            let f = m[i * size + p] / pivot;
            for &k in &active {
                m[i * size + k] -= f * m[p * size + k];
            }
        }
    }
    true
}

/// `min_{t > 0} t + Σ x_i²/t = 2‖x‖₂`.
pub fn lambda_trace_min(x: &[f64]) -> f64 {
    2.0 * x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolean::Clause;
    use crate::complete_tree_value;
    use crate::matrix::{matrix_of_tree, normalized_haar};
    use crate::tree::{complete_tree, random_tree, LiteralMask};
    use proptest::prelude::*;
    use rand::Rng;

    fn tree_problem(k: u32) -> NormProblem {
        let a = matrix_of_tree(&complete_tree(k).unwrap(), &LiteralMask::empty()).unwrap();
        NormProblem::from_sign_matrix(&a).unwrap()
    }

    fn single_clause(d: usize) -> NormProblem {
        NormProblem::from_sign_matrix(&SignMatrix::from_rows(&[vec![1i8; d]])).unwrap()
    }

    #[test]
    fn dual_objective_examples() {
        assert_eq!(dual_objective(&single_clause(5), &DualWeights::uniform(1)), 5.0);
        for k in 0..=8 {
            let p = tree_problem(k);
            let v = dual_objective(&p, &DualWeights::uniform(p.m()));
            assert!((v - complete_tree_value(k)).abs() < 1e-12);
        }
        let p = tree_problem(2);
        let mut mu = vec![0.0; 4];
        mu[2] = 1.0;
        assert_eq!(dual_objective(&p, &DualWeights::new(mu).unwrap()), 3.0);
    }

    #[test]
    fn primal_objective_examples() {
        let p = single_clause(4);
        let ones = PrimalWeights::new(&p, vec![(0..4).map(|j| (j, 1.0)).collect()]).unwrap();
        assert_eq!(primal_objective(&p, &ones).unwrap(), 4.0);
        let zero = PrimalWeights::new(&p, vec![(0..4).map(|j| (j, 0.0)).collect()]).unwrap();
        assert_eq!(primal_objective(&p, &zero).unwrap(), 0.0);
        let big = PrimalWeights::new(&p, vec![(0..4).map(|j| (j, 1.1)).collect()]).unwrap();
        assert!(matches!(primal_objective(&p, &big), Err(Error::Infeasible(_))));
        let t2 = tree_problem(2);
        let a = PrimalWeights::from_matrix(&t2, &normalized_haar(2)).unwrap();
        assert!((primal_objective(&t2, &a).unwrap() - (1.0 + 0.5f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn simplex_projection_examples() {
        assert_eq!(simplex_project(&[2.0, 0.0]).as_slice(), &[1.0, 0.0]);
        assert_eq!(simplex_project(&[0.6, 0.6]).as_slice(), &[0.5, 0.5]);
        let on = [0.2, 0.3, 0.5];
        let got = simplex_project(&on);
        assert!(got.as_slice().iter().zip(on).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    proptest! {
        #[test]
        fn simplex_projection_is_nearest_point(v in proptest::collection::vec(-3.0f64..3.0, 1..12), seed in any::<u64>()) {
            let p = simplex_project(&v);
            let s: f64 = p.as_slice().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(p.as_slice().iter().all(|&x| x >= 0.0));
            let dist = |q: &[f64]| q.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..50 {
                let e: Vec<f64> = (0..v.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
                let q = DualWeights::normalized(e).unwrap();
                prop_assert!(dist(p.as_slice()) <= dist(q.as_slice()) + 1e-12);
            }
            let again = simplex_project(p.as_slice());
            prop_assert!(again.as_slice().iter().zip(p.as_slice()).all(|(a, b)| (a - b).abs() < 1e-12));
        }

        #[test]
        fn recovered_primal_is_feasible_and_weakly_dual(leaves in 1usize..30, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_tree(leaves, &mut rng);
            let p = NormProblem::from_sign_matrix(&matrix_of_tree(&t, &LiteralMask::empty()).unwrap()).unwrap();
            let mut e: Vec<f64> = (0..p.m()).map(|_| rng.gen_range(0.0..1.0)).collect();
            if rng.gen_bool(0.3) {
                e[0] = 0.0;
                e[0] = if e.iter().sum::<f64>() == 0.0 { 1.0 } else { 0.0 };
            }
            let mu = DualWeights::normalized(e).unwrap();
            let a = recover_primal(&p, &mu);
            prop_assert!(a.is_feasible(p.n()));
            let norms = a.column_sq_norms(p.n());
            prop_assert!(norms.iter().all(|&s| (s - 1.0).abs() < 1e-12));
            let primal = primal_objective(&p, &a).unwrap();
            prop_assert!(primal <= dual_objective(&p, &mu) + 1e-9);
        }
    }

    #[test]
    fn recover_primal_examples() {
        let p = single_clause(3);
        let a = recover_primal(&p, &DualWeights::uniform(1));
        assert_eq!(a.row(0), &[(0, 1.0), (1, 1.0), (2, 1.0)]);
        for k in 1..=5 {
            let p = tree_problem(k);
            let a = recover_primal(&p, &DualWeights::uniform(p.m()));
            let signs = matrix_of_tree(&complete_tree(k).unwrap(), &LiteralMask::empty()).unwrap();
            let diff = a.to_matrix(&signs).max_abs_diff(&normalized_haar(k as usize)).unwrap();
            assert!(diff < 1e-12);
        }
    }

    #[test]
    fn complete_trees_are_solved_at_the_uniform_point() {
        for k in 0..=8 {
            let p = tree_problem(k);
            let (a, _, report) = optimal_normalization(&p, &SolverOptions::default()).unwrap();
            let want = complete_tree_value(k);
            assert!(report.converged);
            assert!((report.dual_value - want).abs() < 1e-12);
            assert!((primal_objective(&p, &a).unwrap() - want).abs() < 1e-12);
            assert_eq!(report.iterations, 0);
        }
    }

    #[test]
    fn single_clause_closes_exactly() {
        let (_, mu, report) = optimal_normalization(&single_clause(4), &SolverOptions::default()).unwrap();
        assert_eq!(mu.as_slice(), &[1.0]);
        assert_eq!(report.gap, 0.0);
        assert_eq!(report.dual_value, 4.0);
    }

    #[test]
    fn random_trees_converge_with_weak_duality_on_every_iterate() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..40 {
            let t = random_tree(rng.gen_range(2..=64), &mut rng);
            let p = NormProblem::from_sign_matrix(&matrix_of_tree(&t, &LiteralMask::empty()).unwrap()).unwrap();
            let mut last_best = f64::INFINITY;
            let (_, report) = solve_dual_observed(&p, &SolverOptions::default(), |it| {
                assert!(it.primal <= it.dual + 1e-9);
                assert!(it.best_dual <= last_best);
                last_best = it.best_dual;
            })
            .unwrap();
            assert!(report.converged, "{report:?}");
            assert!(report.primal_value < crate::ONE_PLUS_SQRT2);
            assert!(report.gap >= -1e-9);
        }
    }

    #[test]
    fn subgradient_descends_but_converges_slowly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = random_tree(40, &mut rng);
        let p = NormProblem::from_sign_matrix(&matrix_of_tree(&t, &LiteralMask::empty()).unwrap()).unwrap();
        let exact = solve_dual(&p, &SolverOptions::default()).unwrap().1;
        let opts = SolverOptions::default()
            .with_method(Method::Subgradient)
            .with_max_iter(20_000);
        let sub = solve_dual(&p, &opts).unwrap().1;
        let start = dual_objective(&p, &DualWeights::uniform(p.m()));
        assert!(sub.dual_value <= start);
        assert!(sub.dual_value >= exact.dual_value - 1e-9);
        assert!(sub.primal_value <= exact.dual_value + 1e-9);
    }

    #[test]
    fn duplicating_a_clause_never_raises_the_optimum() {
        // A lone clause of width d has optimum d, two copies only d/√2.
        let opts = SolverOptions::default();
        let one = solve_dual(&single_clause(3), &opts).unwrap().1.dual_value;
        let two = NormProblem::from_sign_matrix(&SignMatrix::from_rows(&[[1i8, 1, 1], [1, 1, 1]])).unwrap();
        let two = solve_dual(&two, &opts).unwrap().1.dual_value;
        assert!((one - 3.0).abs() < 1e-9 && (two - 3.0 / 2f64.sqrt()).abs() < 1e-6);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let t = random_tree(rng.gen_range(2..=20), &mut rng);
            let a = matrix_of_tree(&t, &LiteralMask::empty()).unwrap();
            let dup = rng.gen_range(0..a.rows());
            let mut rows: Vec<Vec<i8>> = (0..a.rows()).map(|i| a.row(i).to_vec()).collect();
            rows.push(rows[dup].clone());
            let base = solve_dual(&NormProblem::from_sign_matrix(&a).unwrap(), &opts)
                .unwrap()
                .1;
            let more = solve_dual(
                &NormProblem::from_sign_matrix(&SignMatrix::from_rows(&rows)).unwrap(),
                &opts,
            )
            .unwrap()
            .1;
            assert!(more.primal_value <= base.dual_value + 1e-6);
        }
    }

    #[test]
    fn report_serializes_flat() {
        let (_, report) = solve_dual(&single_clause(2), &SolverOptions::default()).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        for key in [
            "primal_value",
            "dual_value",
            "gap",
            "iterations",
            "converged",
            "seed",
            "tol",
        ] {
            assert!(json.get(key).is_some(), "{key}");
        }
        let back: SolveReport = serde_json::from_value(json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn arrow_matrix_examples() {
        assert!(schur_psd_check(&[0.0, 0.0], 0.0));
        assert!(!schur_psd_check(&[1.0, 1.0], 1.0));
        assert!(schur_psd_check(&[0.6, 0.8], 1.0 + 1e-6));
        assert!(!schur_psd_check(&[0.0], -1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..1000 {
            let d = rng.gen_range(1..=8);
            let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let t = rng.gen_range(0.0..2.0);
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert_eq!(schur_psd_check(&y, t), norm <= t, "y = {y:?}, t = {t}");
        }
    }

    fn grid_min(x: &[f64]) -> f64 {
        let s: f64 = x.iter().map(|v| v * v).sum();
        let f = |t: f64| t + s / t;
        let mut best = (f64::INFINITY, 0.0);
        let mut t = 1e-4;
        while t < 1e3 {
            if f(t) < best.0 {
                best = (f(t), t);
            }
            t *= 1.001;
        }
        // Refine by golden section inside the bracketing cell.
        let (mut lo, mut hi) = (best.1 / 1.001, best.1 * 1.001);
        for _ in 0..100 {
            let a = lo + (hi - lo) * 0.382;
            let b = lo + (hi - lo) * 0.618;
            if f(a) < f(b) {
                hi = b
            } else {
                lo = a
            }
        }
        f(0.5 * (lo + hi)).min(best.0)
    }

    #[test]
    fn lambda_trace_examples() {
        assert_eq!(lambda_trace_min(&[3.0, 4.0]), 10.0);
        assert_eq!(lambda_trace_min(&[0.0, 0.0]), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let x: Vec<f64> = (0..rng.gen_range(1..6)).map(|_| rng.gen_range(-2.0..2.0)).collect();
            assert!((grid_min(&x) - lambda_trace_min(&x)).abs() < 1e-6);
        }
    }

    #[test]
    fn problem_validation() {
        let bad = Incidence::from_clause_vars(2, vec![vec![0], vec![]]);
        assert!(NormProblem::new(bad).is_err());
        assert!(DualWeights::new(vec![0.5, 0.6]).is_err());
        assert!(DualWeights::new(vec![-0.5, 1.5]).is_err());
        let c = Clause::new([crate::boolean::Literal::pos(1)]).unwrap();
        let f = NaeFormula::new(1, vec![c]).unwrap();
        assert_eq!(NormProblem::from_nae(&f).unwrap().m(), 1);
    }
}
