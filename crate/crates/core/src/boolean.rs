//! CNF and NAE-CNF formulas, evaluation, exhaustive satisfiability checks,
//! incidence structure and DIMACS I/O.
//!
//! Variables are 1-based ids. Assignments are enumerated in a fixed
//! canonical order in which `+1` (true) precedes `-1` (false) and variable 1
//! is the most significant position; "lexicographically smallest" always
//! refers to this order.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use rand::Rng;
use rayon::prelude::*;

use crate::{Error, Result, ENUMERATION_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub var: u32,
    pub positive: bool,
}

impl Literal {
    pub fn new(var: u32, positive: bool) -> Result<Self> {
        if var == 0 {
            return Err(Error::ZeroVariable);
        }
        Ok(Literal { var, positive })
    }

    pub fn pos(var: u32) -> Self {
        assert!(var >= 1, "variable ids start at 1");
        Literal { var, positive: true }
    }

    pub fn neg(var: u32) -> Self {
        assert!(var >= 1, "variable ids start at 1");
        Literal { var, positive: false }
    }

    pub fn from_dimacs(code: i64) -> Result<Self> {
        let var = u32::try_from(code.unsigned_abs()).map_err(|_| Error::Dimacs {
            line: 0,
            msg: format!("literal {code} out of range"),
        })?;
        Literal::new(var, code > 0)
    }

    pub fn to_dimacs(self) -> i64 {
        if self.positive {
            self.var as i64
        } else {
            -(self.var as i64)
        }
    }

    pub fn negated(self) -> Self {
        Literal {
            var: self.var,
            positive: !self.positive,
        }
    }

    pub fn is_true(self, x: &Assignment) -> bool {
        x.value(self.var) == self.positive
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "z{}", self.var)
        } else {
            write!(f, "¬z{}", self.var)
        }
    }
}

/// A set of literals over distinct variables, kept sorted by variable id.
///
/// The empty clause is representable; formulas built from trees use it for
/// the single leaf of the depth-0 tree, and resolution proofs end in it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Clause {
    literals: Vec<Literal>,
}

impl Clause {
    pub fn new(literals: impl IntoIterator<Item = Literal>) -> Result<Self> {
        let mut literals: Vec<Literal> = literals.into_iter().collect();
        literals.sort();
        for w in literals.windows(2) {
            if w[0].var == w[1].var {
                return Err(if w[0].positive == w[1].positive {
                    Error::DuplicateVariable(w[0].var)
                } else {
                    Error::Tautology(w[0].var)
                });
            }
        }
        Ok(Clause { literals })
    }

    pub fn empty() -> Self {
        Clause::default()
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    /// Polarity of `var` in this clause, if it occurs.
    pub fn polarity(&self, var: u32) -> Option<bool> {
        self.literals
            .binary_search_by_key(&var, |l| l.var)
            .ok()
            .map(|i| self.literals[i].positive)
    }

    pub fn contains(&self, lit: Literal) -> bool {
        self.polarity(lit.var) == Some(lit.positive)
    }

    pub fn vars(&self) -> impl Iterator<Item = u32> + '_ {
        self.literals.iter().map(|l| l.var)
    }

    /// Clause with `lit` removed (no-op if absent).
    pub fn without(&self, lit: Literal) -> Clause {
        Clause {
            literals: self.literals.iter().copied().filter(|&l| l != lit).collect(),
        }
    }

    /// Clause with `lit` added; fails on a duplicate or tautology.
    pub fn with(&self, lit: Literal) -> Result<Clause> {
        Clause::new(self.literals.iter().copied().chain(std::iter::once(lit)))
    }

    pub fn is_satisfied(&self, x: &Assignment) -> bool {
        self.literals.iter().any(|l| l.is_true(x))
    }

    /// Not-all-equal semantics: false iff all literal values coincide
    /// (vacuously false for the empty clause).
    pub fn is_nae_satisfied(&self, x: &Assignment) -> bool {
        let mut seen_true = false;
        let mut seen_false = false;
        for l in &self.literals {
            if l.is_true(x) {
                seen_true = true;
            } else {
                seen_false = true;
            }
        }
        seen_true && seen_false
    }

    fn max_var(&self) -> u32 {
        self.literals.last().map_or(0, |l| l.var)
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.literals.is_empty() {
            return f.write_str("□");
        }
        f.write_char('(')?;
        for (i, l) in self.literals.iter().enumerate() {
            if i > 0 {
                f.write_str(" ∨ ")?;
            }
            write!(f, "{l}")?;
        }
        f.write_char(')')
    }
}

fn check_vars(n_vars: u32, clauses: &[Clause]) -> Result<()> {
    for c in clauses {
        let var = c.max_var();
        if var > n_vars {
            return Err(Error::VariableOutOfRange { var, n_vars });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CnfFormula {
    n_vars: u32,
    clauses: Vec<Clause>,
}

impl CnfFormula {
    pub fn new(n_vars: u32, clauses: Vec<Clause>) -> Result<Self> {
        check_vars(n_vars, &clauses)?;
        Ok(CnfFormula { n_vars, clauses })
    }

    /// Builds a formula from DIMACS-style signed integers per clause.
    pub fn from_ints(n_vars: u32, clauses: &[&[i64]]) -> Result<Self> {
        let clauses = clauses
            .iter()
            .map(|c| Clause::new(c.iter().map(|&v| Literal::from_dimacs(v)).collect::<Result<Vec<_>>>()?))
            .collect::<Result<Vec<_>>>()?;
        CnfFormula::new(n_vars, clauses)
    }

    pub fn n_vars(&self) -> u32 {
        self.n_vars
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn evaluate(&self, x: &Assignment) -> Result<bool> {
        check_dim(self.n_vars, x)?;
        Ok(self.clauses.iter().all(|c| c.is_satisfied(x)))
    }

    /// Variables that occur in at least one clause.
    pub fn occurring_vars(&self) -> BTreeSet<u32> {
        occurring(&self.clauses)
    }

    /// Number of clauses minus number of occurring variables.
    pub fn deficiency(&self) -> i64 {
        self.clauses.len() as i64 - self.occurring_vars().len() as i64
    }

    pub fn incidence(&self) -> Incidence {
        Incidence::build(self.n_vars, &self.clauses)
    }

    /// Adds a dummy variable `n_vars + 1` positively to every clause,
    /// giving an NAE formula that is satisfiable iff `self` is.
    pub fn to_nae(&self) -> NaeFormula {
        let dummy = self.n_vars + 1;
        let clauses = self
            .clauses
            .iter()
            .map(|c| c.with(Literal::pos(dummy)).expect("dummy variable is fresh"))
            .collect();
        NaeFormula {
            n_vars: dummy,
            clauses,
            dummy_var: Some(dummy),
        }
    }
}

impl fmt::Display for CnfFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.clauses.iter().enumerate() {
            if i > 0 {
                f.write_str(" ∧ ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Conjunction of NAE clauses.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NaeFormula {
    n_vars: u32,
    clauses: Vec<Clause>,
    dummy_var: Option<u32>,
}

impl NaeFormula {
    pub fn new(n_vars: u32, clauses: Vec<Clause>) -> Result<Self> {
        check_vars(n_vars, &clauses)?;
        Ok(NaeFormula {
            n_vars,
            clauses,
            dummy_var: None,
        })
    }

    /// Records `dummy` as the CNF-conversion dummy; it must occur positively
    /// in every clause.
    pub fn with_dummy(mut self, dummy: u32) -> Result<Self> {
        if dummy == 0 || dummy > self.n_vars {
            return Err(Error::VariableOutOfRange {
                var: dummy,
                n_vars: self.n_vars,
            });
        }
        if let Some(i) = self.clauses.iter().position(|c| !c.contains(Literal::pos(dummy))) {
            return Err(Error::InvalidArgument(format!(
                "dummy z{dummy} missing from NAE clause {}",
                i + 1
            )));
        }
        self.dummy_var = Some(dummy);
        Ok(self)
    }

    pub fn n_vars(&self) -> u32 {
        self.n_vars
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn dummy_var(&self) -> Option<u32> {
        self.dummy_var
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn evaluate(&self, x: &Assignment) -> Result<bool> {
        check_dim(self.n_vars, x)?;
        Ok(self.clauses.iter().all(|c| c.is_nae_satisfied(x)))
    }

    pub fn occurring_vars(&self) -> BTreeSet<u32> {
        occurring(&self.clauses)
    }

    pub fn incidence(&self) -> Incidence {
        Incidence::build(self.n_vars, &self.clauses)
    }
}

fn occurring(clauses: &[Clause]) -> BTreeSet<u32> {
    clauses.iter().flat_map(|c| c.vars()).collect()
}

fn check_dim(n_vars: u32, x: &Assignment) -> Result<()> {
    if x.len() != n_vars as usize {
        return Err(Error::DimensionMismatch {
            expected: n_vars as usize,
            got: x.len(),
        });
    }
    Ok(())
}

/// ±1 per variable, `+1` meaning true.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    signs: Vec<i8>,
}

impl Assignment {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if let Some(&s) = signs.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument(format!("assignment entry {s} is not ±1")));
        }
        Ok(Assignment { signs })
    }

    pub fn from_bools(values: &[bool]) -> Self {
        Assignment {
            signs: values.iter().map(|&b| if b { 1 } else { -1 }).collect(),
        }
    }

    pub fn all_true(n: usize) -> Self {
        Assignment { signs: vec![1; n] }
    }

    /// The `index`-th assignment over `n` variables in canonical order:
    /// variable `j` is false iff bit `n - j` of `index` is set.
    pub fn from_index(index: u64, n: usize) -> Self {
        Assignment {
            signs: (1..=n)
                .map(|j| if (index >> (n - j)) & 1 == 1 { -1 } else { 1 })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn sign(&self, var: u32) -> i8 {
        self.signs[var as usize - 1]
    }

    pub fn value(&self, var: u32) -> bool {
        self.sign(var) > 0
    }

    pub fn negated(&self) -> Self {
        Assignment {
            signs: self.signs.iter().map(|s| -s).collect(),
        }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Assignment {
            signs: (0..n).map(|_| if rng.gen() { 1 } else { -1 }).collect(),
        }
    }
}

/// Per clause `C_i`, the variables it mentions; per variable `V_j`, the
/// clauses mentioning it. Both sides are 0-based: clause `i` is the
/// `(i+1)`-th clause and index `j` stands for variable id `j + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Incidence {
    pub clause_vars: Vec<Vec<usize>>,
    pub var_clauses: Vec<Vec<usize>>,
}

impl Incidence {
    fn build(n_vars: u32, clauses: &[Clause]) -> Self {
        let clause_vars: Vec<Vec<usize>> = clauses
            .iter()
            .map(|c| c.vars().map(|v| v as usize - 1).collect())
            .collect();
        Incidence::from_clause_vars(n_vars as usize, clause_vars)
    }

    pub fn from_clause_vars(n: usize, clause_vars: Vec<Vec<usize>>) -> Self {
        let mut var_clauses = vec![Vec::new(); n];
        for (i, vars) in clause_vars.iter().enumerate() {
            for &j in vars {
                var_clauses[j].push(i);
            }
        }
        Incidence {
            clause_vars,
            var_clauses,
        }
    }

    pub fn m(&self) -> usize {
        self.clause_vars.len()
    }

    pub fn n(&self) -> usize {
        self.var_clauses.len()
    }
}

/// Outcome of an exhaustive satisfiability check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatOutcome {
    Unsatisfiable,
    /// Lexicographically smallest satisfying assignment.
    Satisfiable(Assignment),
}

impl SatOutcome {
    pub fn is_unsat(&self) -> bool {
        matches!(self, SatOutcome::Unsatisfiable)
    }
}

/// Borrowed view over either formula kind.
#[derive(Debug, Clone, Copy)]
pub enum FormulaRef<'a> {
    Cnf(&'a CnfFormula),
    Nae(&'a NaeFormula),
}

impl<'a> From<&'a CnfFormula> for FormulaRef<'a> {
    fn from(f: &'a CnfFormula) -> Self {
        FormulaRef::Cnf(f)
    }
}

impl<'a> From<&'a NaeFormula> for FormulaRef<'a> {
    fn from(f: &'a NaeFormula) -> Self {
        FormulaRef::Nae(f)
    }
}

/// Clause as bitmasks over canonical bit positions (variable `j` at bit
/// `n - j`), so an enumeration index doubles as the mask of false variables.
#[derive(Clone, Copy)]
struct MaskClause {
    pos: u32,
    neg: u32,
}

impl MaskClause {
    fn compile(c: &Clause, n: usize) -> Self {
        let mut mc = MaskClause { pos: 0, neg: 0 };
        for l in c.literals() {
            let bit = 1u32 << (n - l.var as usize);
            if l.positive {
                mc.pos |= bit;
            } else {
                mc.neg |= bit;
            }
        }
        mc
    }

    #[inline]
    fn true_lits(self, false_mask: u32) -> u32 {
        (self.pos & !false_mask) | (self.neg & false_mask)
    }
}

/// Exhaustively decides satisfiability for at most 24 variables.
///
/// The assignment range is split across threads; the reported witness is
/// the lexicographically smallest satisfying assignment regardless of
/// scheduling.
pub fn brute_force_unsat<'a>(f: impl Into<FormulaRef<'a>>) -> Result<SatOutcome> {
    let f = f.into();
    let (n, clauses, nae) = match f {
        FormulaRef::Cnf(c) => (c.n_vars as usize, c.clauses(), false),
        FormulaRef::Nae(c) => (c.n_vars as usize, c.clauses(), true),
    };
    if n > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            what: "brute-force satisfiability",
            n,
            limit: ENUMERATION_LIMIT,
        });
    }
    let masks: Vec<MaskClause> = clauses.iter().map(|c| MaskClause::compile(c, n)).collect();
    // An NAE formula is invariant under negation, and the smaller of x and
    // -x has variable 1 true, so half the range suffices.
    let total: u64 = if nae && n > 0 { 1 << (n - 1) } else { 1 << n };
    let satisfied = |b: &u64| {
        let b = *b as u32;
        if nae {
            masks.iter().all(|c| {
                let t = c.true_lits(b);
                t != 0 && t != (c.pos | c.neg)
            })
        } else {
            masks.iter().all(|c| c.true_lits(b) != 0)
        }
    };
    let found = if total >= 1 << 12 {
        (0..total).into_par_iter().find_first(satisfied)
    } else {
        (0..total).find(satisfied)
    };
    Ok(match found {
        None => SatOutcome::Unsatisfiable,
        Some(b) => SatOutcome::Satisfiable(Assignment::from_index(b, n)),
    })
}

/// Uniform random CNF with `m` clauses of `width` distinct variables each
/// (signs uniform).
pub fn random_cnf<R: Rng + ?Sized>(n: u32, m: usize, width: usize, rng: &mut R) -> CnfFormula {
    assert!(width as u32 <= n, "clause width exceeds variable count");
    let clauses = (0..m)
        .map(|_| {
            let vars = rand::seq::index::sample(rng, n as usize, width);
            Clause::new(vars.iter().map(|v| Literal {
                var: v as u32 + 1,
                positive: rng.gen(),
            }))
            .expect("sampled variables are distinct")
        })
        .collect();
    CnfFormula { n_vars: n, clauses }
}

/// Either formula kind as read from a DIMACS file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DimacsFormula {
    Cnf(CnfFormula),
    Nae(NaeFormula),
}

fn dimacs_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Dimacs { line, msg: msg.into() }
}

/// Reads `p cnf n m` or the local `p naecnf n m` extension. A comment
/// `c dummy K` before the header marks variable `K` as the NAE dummy.
pub fn parse_dimacs(text: &str) -> Result<DimacsFormula> {
    let mut header: Option<(bool, u32, usize)> = None;
    let mut dummy: Option<u32> = None;
    let mut clauses = Vec::new();
    let mut current: Vec<Literal> = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('c') {
            let mut toks = line.split_whitespace();
            if toks.next() == Some("c") && toks.next() == Some("dummy") {
                let v = toks
                    .next()
                    .and_then(|t| t.parse::<u32>().ok())
                    .ok_or_else(|| dimacs_err(line_no, "malformed dummy comment"))?;
                dummy = Some(v);
            }
            continue;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(dimacs_err(line_no, "duplicate header"));
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let nae = match toks.get(1) {
                Some(&"cnf") => false,
                Some(&"naecnf") => true,
                _ => return Err(dimacs_err(line_no, "header must be `p cnf n m` or `p naecnf n m`")),
            };
            if toks.len() != 4 {
                return Err(dimacs_err(line_no, "header must have exactly four fields"));
            }
            let n = toks[2]
                .parse::<u32>()
                .map_err(|_| dimacs_err(line_no, "bad variable count"))?;
            let m = toks[3]
                .parse::<usize>()
                .map_err(|_| dimacs_err(line_no, "bad clause count"))?;
            header = Some((nae, n, m));
            continue;
        }
        let Some((_, n, _)) = header else {
            return Err(dimacs_err(line_no, "clause before header"));
        };
        for tok in line.split_whitespace() {
            let v: i64 = tok
                .parse()
                .map_err(|_| dimacs_err(line_no, format!("bad literal {tok:?}")))?;
            if v == 0 {
                let clause = Clause::new(current.drain(..)).map_err(|e| dimacs_err(line_no, e.to_string()))?;
                clauses.push(clause);
            } else {
                let lit = Literal::from_dimacs(v).map_err(|e| dimacs_err(line_no, e.to_string()))?;
                if lit.var > n {
                    return Err(dimacs_err(
                        line_no,
                        format!("variable {} exceeds declared count {n}", lit.var),
                    ));
                }
                current.push(lit);
            }
        }
    }
    let (nae, n, m) = header.ok_or_else(|| dimacs_err(last_line, "missing header"))?;
    if !current.is_empty() {
        return Err(dimacs_err(last_line, "last clause not terminated by 0"));
    }
    if clauses.len() != m {
        return Err(dimacs_err(
            last_line,
            format!("header declares {m} clauses, found {}", clauses.len()),
        ));
    }
    if nae {
        let f = NaeFormula::new(n, clauses)?;
        Ok(DimacsFormula::Nae(match dummy {
            Some(d) => f.with_dummy(d)?,
            None => f,
        }))
    } else {
        Ok(DimacsFormula::Cnf(CnfFormula::new(n, clauses)?))
    }
}

fn write_clauses(out: &mut String, clauses: &[Clause]) {
    for c in clauses {
        for l in c.literals() {
            let _ = write!(out, "{} ", l.to_dimacs());
        }
        out.push_str("0\n");
    }
}

pub fn write_cnf(f: &CnfFormula) -> String {
    let mut out = format!("p cnf {} {}\n", f.n_vars, f.clauses.len());
    write_clauses(&mut out, &f.clauses);
    out
}

pub fn write_nae(f: &NaeFormula) -> String {
    let mut out = String::new();
    if let Some(d) = f.dummy_var {
        let _ = writeln!(out, "c dummy {d}");
    }
    let _ = writeln!(out, "p naecnf {} {}", f.n_vars, f.clauses.len());
    write_clauses(&mut out, &f.clauses);
    out
}

pub fn write_dimacs(f: &DimacsFormula) -> String {
    match f {
        DimacsFormula::Cnf(c) => write_cnf(c),
        DimacsFormula::Nae(c) => write_nae(c),
    }
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::CnfFormula;

    /// (w∨x)∧(w∨¬x∨z)∧(w∨¬x∨¬z)∧(¬w∨y)∧(¬w∨¬y) with w,x,z,y = 1,2,3,4.
    pub(crate) fn five_clause_formula() -> CnfFormula {
        CnfFormula::from_ints(4, &[&[1, 2], &[1, -2, 3], &[1, -2, -3], &[-1, 4], &[-1, -4]]).unwrap()
    }
}
