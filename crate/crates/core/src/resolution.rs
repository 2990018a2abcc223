//! Tree resolution refutations.
//!
//! A proof is a full binary tree whose leaves name clauses of a formula and
//! whose internal nodes resolve on a pivot variable. By convention the left
//! child's clause contains the pivot positively and the right child's
//! negatively, so checking needs no search.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;

use crate::boolean::{brute_force_unsat, random_cnf, Assignment, Clause, CnfFormula, Literal};
use crate::sexpr::{self, parse_error, SExpr};
use crate::tree::{BinaryTree, Node};
use crate::{Error, Result, ENUMERATION_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProofNode {
    /// 0-based clause index.
    Leaf {
        clause: usize,
    },
    Res {
        pivot: u32,
        left: usize,
        right: usize,
    },
}

/// Arena in pre-order: the root is node 0 and leaves appear left to right.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ResolutionTree {
    nodes: Vec<ProofNode>,
}

impl ResolutionTree {
    pub fn leaf(clause: usize) -> Self {
        ResolutionTree {
            nodes: vec![ProofNode::Leaf { clause }],
        }
    }

    pub fn resolve(pivot: u32, left: ResolutionTree, right: ResolutionTree) -> Self {
        let shift = |t: ResolutionTree, by: usize| {
            t.nodes.into_iter().map(move |n| match n {
                ProofNode::Res { pivot, left, right } => ProofNode::Res {
                    pivot,
                    left: left + by,
                    right: right + by,
                },
                leaf => leaf,
            })
        };
        let ln = left.nodes.len();
        let mut nodes = Vec::with_capacity(1 + ln + right.nodes.len());
        nodes.push(ProofNode::Res {
            pivot,
            left: 1,
            right: 1 + ln,
        });
        nodes.extend(shift(left, 1));
        nodes.extend(shift(right, 1 + ln));
        ResolutionTree { nodes }
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn node(&self, id: usize) -> ProofNode {
        self.nodes[id]
    }

    pub fn nodes(&self) -> &[ProofNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf node ids, left to right.
    pub fn leaf_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| matches!(self.nodes[i], ProofNode::Leaf { .. }))
            .collect()
    }

    /// Clause index of every leaf, left to right.
    pub fn leaf_clauses(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                ProofNode::Leaf { clause } => Some(*clause),
                _ => None,
            })
            .collect()
    }

    pub fn pivots(&self) -> Vec<u32> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                ProofNode::Res { pivot, .. } => Some(*pivot),
                _ => None,
            })
            .collect()
    }

    pub fn depths(&self) -> Vec<u32> {
        let mut depth = vec![0; self.nodes.len()];
        for i in 0..self.nodes.len() {
            if let ProofNode::Res { left, right, .. } = self.nodes[i] {
                depth[left] = depth[i] + 1;
                depth[right] = depth[i] + 1;
            }
        }
        depth
    }

    fn subtree_end(&self, id: usize) -> usize {
        match self.nodes[id] {
            ProofNode::Leaf { .. } => id + 1,
            ProofNode::Res { right, .. } => self.subtree_end(right),
        }
    }

    fn map_clauses(&self, mut f: impl FnMut(usize) -> usize) -> ResolutionTree {
        ResolutionTree {
            nodes: self
                .nodes
                .iter()
                .map(|&n| match n {
                    ProofNode::Leaf { clause } => ProofNode::Leaf { clause: f(clause) },
                    res => res,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    LeafOutOfRange { node: usize, clause: usize },
    PivotNotPositiveInLeft { node: usize, pivot: u32 },
    PivotNotNegativeInRight { node: usize, pivot: u32 },
    TautologicalResolvent { node: usize, var: u32 },
    RootNotEmpty { clause: Clause },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LeafOutOfRange { node, clause } => {
                write!(f, "node {node}: clause {} does not exist", clause + 1)
            }
            Violation::PivotNotPositiveInLeft { node, pivot } => {
                write!(f, "node {node}: left child lacks z{pivot}")
            }
            Violation::PivotNotNegativeInRight { node, pivot } => {
                write!(f, "node {node}: right child lacks ¬z{pivot}")
            }
            Violation::TautologicalResolvent { node, var } => {
                write!(f, "node {node}: resolvent contains z{var} and ¬z{var}")
            }
            Violation::RootNotEmpty { clause } => write!(f, "root derives {clause}, not the empty clause"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProofCheck {
    /// Derived clause of every node.
    Valid {
        derived: Vec<Clause>,
    },
    Invalid(Violation),
}

impl ProofCheck {
    pub fn is_valid(&self) -> bool {
        matches!(self, ProofCheck::Valid { .. })
    }

    pub fn into_result(self) -> Result<Vec<Clause>> {
        match self {
            ProofCheck::Valid { derived } => Ok(derived),
            ProofCheck::Invalid(v) => Err(Error::InvalidProof(v.to_string())),
        }
    }
}

fn resolvent(node: usize, pivot: u32, left: &Clause, right: &Clause) -> std::result::Result<Clause, Violation> {
    if left.polarity(pivot) != Some(true) {
        return Err(Violation::PivotNotPositiveInLeft { node, pivot });
    }
    if right.polarity(pivot) != Some(false) {
        return Err(Violation::PivotNotNegativeInRight { node, pivot });
    }
    let mut lits: BTreeMap<u32, bool> = BTreeMap::new();
    for l in left.literals().iter().chain(right.literals()) {
        if l.var == pivot {
            continue;
        }
        if let Some(&p) = lits.get(&l.var) {
            if p != l.positive {
                return Err(Violation::TautologicalResolvent { node, var: l.var });
            }
        }
        lits.insert(l.var, l.positive);
    }
    Ok(
        Clause::new(lits.into_iter().map(|(var, positive)| Literal { var, positive }))
            .expect("no duplicates or tautologies"),
    )
}

/// Recomputes derived clauses bottom-up and reports the first violation.
pub fn check_resolution(f: &CnfFormula, proof: &ResolutionTree) -> ProofCheck {
    let n = proof.nodes.len();
    let mut derived = vec![Clause::empty(); n];
    for id in (0..n).rev() {
        match proof.nodes[id] {
            ProofNode::Leaf { clause } => match f.clauses().get(clause) {
                Some(c) => derived[id] = c.clone(),
                None => return ProofCheck::Invalid(Violation::LeafOutOfRange { node: id, clause }),
            },
            ProofNode::Res { pivot, left, right } => match resolvent(id, pivot, &derived[left], &derived[right]) {
                Ok(c) => derived[id] = c,
                Err(v) => return ProofCheck::Invalid(v),
            },
        }
    }
    if !derived[0].is_empty() {
        return ProofCheck::Invalid(Violation::RootNotEmpty {
            clause: derived[0].clone(),
        });
    }
    ProofCheck::Valid { derived }
}

/// Whether no clause labels two leaves. The proof must be valid.
pub fn is_read_once(f: &CnfFormula, proof: &ResolutionTree) -> Result<bool> {
    check_resolution(f, proof).into_result()?;
    Ok(first_repeated_clause(proof).is_none())
}

fn first_repeated_clause(proof: &ResolutionTree) -> Option<usize> {
    let mut seen = std::collections::BTreeSet::new();
    proof.leaf_clauses().into_iter().find(|&c| !seen.insert(c))
}

/// The tree of an unmasked tree formula read as its own refutation:
/// internal vertices resolve their variable, leaf `k` is clause `k`.
pub fn proof_from_tree(tree: &BinaryTree) -> ResolutionTree {
    fn go(t: &BinaryTree, id: usize) -> ResolutionTree {
        match t.node(id) {
            Node::Leaf { leaf } => ResolutionTree::leaf(leaf),
            Node::Internal { var, left, right } => ResolutionTree::resolve(var, go(t, left), go(t, right)),
        }
    }
    go(tree, tree.root())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Refutation {
    Proof(ResolutionTree),
    Satisfiable(Assignment),
}

/// DPLL without propagation, extracting a tree resolution proof.
///
/// Branches on the lowest unassigned variable of a clause not yet
/// satisfied, trying `+1` first; a falsified clause (lowest index) closes a
/// branch as a leaf. A branch whose derived clause lacks the branch
/// variable replaces the resolution step. Satisfying assignments set
/// untouched variables to `+1`.
pub fn dpll_refute(f: &CnfFormula) -> Result<Refutation> {
    let n = f.n_vars() as usize;
    if n > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            what: "DPLL refutation",
            n,
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut assign = vec![0i8; n + 1];
    Ok(match dpll(f, &mut assign) {
        Ok((proof, _)) => Refutation::Proof(proof),
        Err(()) => {
            let signs = assign[1..].iter().map(|&s| if s == 0 { 1 } else { s }).collect();
            Refutation::Satisfiable(Assignment::new(signs).expect("signs are ±1"))
        }
    })
}

/// `Err(())` leaves the satisfying partial assignment in `assign`.
fn dpll(f: &CnfFormula, assign: &mut [i8]) -> std::result::Result<(ResolutionTree, Clause), ()> {
    let lit_value = |l: &Literal, a: &[i8]| match a[l.var as usize] {
        0 => None,
        s => Some((s > 0) == l.positive),
    };
    let mut branch_var: Option<u32> = None;
    for (i, c) in f.clauses().iter().enumerate() {
        let vals: Vec<Option<bool>> = c.literals().iter().map(|l| lit_value(l, assign)).collect();
        if vals.iter().all(|v| *v == Some(false)) {
            return Ok((ResolutionTree::leaf(i), c.clone()));
        }
        if !vals.contains(&Some(true)) {
            let free = c
                .literals()
                .iter()
                .filter(|l| assign[l.var as usize] == 0)
                .map(|l| l.var)
                .min();
            branch_var = branch_var.min(free).or(branch_var).or(free);
        }
    }
    let Some(z) = branch_var else {
        return Err(());
    };
    assign[z as usize] = 1;
    let (pos_proof, pos_clause) = dpll(f, assign)?;
    if pos_clause.polarity(z).is_none() {
        assign[z as usize] = 0;
        return Ok((pos_proof, pos_clause));
    }
    assign[z as usize] = -1;
    let (neg_proof, neg_clause) = dpll(f, assign)?;
    assign[z as usize] = 0;
    if neg_clause.polarity(z).is_none() {
        return Ok((neg_proof, neg_clause));
    }
    let derived = resolvent(0, z, &neg_clause, &pos_clause).expect("branch clauses are falsified by one assignment");
    Ok((ResolutionTree::resolve(z, neg_proof, pos_proof), derived))
}

/// Renames repeated pivots apart until all pivots are distinct.
///
/// The deepest node whose pivot repeats gets a fresh variable, applied to
/// every leaf clause below it. The returned formula lists the proof's leaf
/// clauses in leaf order (so leaf `k` is clause `k`) and keeps the original
/// variable count plus one fresh variable per renaming.
pub fn split_repeated_variables(f: &CnfFormula, proof: &ResolutionTree) -> Result<(CnfFormula, ResolutionTree)> {
    check_resolution(f, proof).into_result()?;
    if let Some(c) = first_repeated_clause(proof) {
        return Err(Error::NotReadOnce(c + 1));
    }
    let mut clauses: Vec<Clause> = proof.leaf_clauses().iter().map(|&c| f.clauses()[c].clone()).collect();
    let mut next = 0;
    let mut proof = proof.map_clauses(|_| {
        next += 1;
        next - 1
    });
    let mut n_vars = f.n_vars();
    loop {
        let pivots = proof.pivots();
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for p in &pivots {
            *counts.entry(*p).or_default() += 1;
        }
        let depths = proof.depths();
        let target = (0..proof.nodes.len())
            .filter(|&i| matches!(proof.nodes[i], ProofNode::Res { pivot, .. } if counts[&pivot] > 1))
            .max_by_key(|&i| (depths[i], std::cmp::Reverse(i)));
        let Some(v) = target else {
            break;
        };
        let ProofNode::Res { pivot: z, left, right } = proof.nodes[v] else {
            unreachable!()
        };
        n_vars += 1;
        let fresh = n_vars;
        proof.nodes[v] = ProofNode::Res {
            pivot: fresh,
            left,
            right,
        };
        for id in v..proof.subtree_end(v) {
            if let ProofNode::Leaf { clause } = proof.nodes[id] {
                if let Some(positive) = clauses[clause].polarity(z) {
                    clauses[clause] = clauses[clause]
                        .without(Literal { var: z, positive })
                        .with(Literal { var: fresh, positive })?;
                }
            }
        }
    }
    let f2 = CnfFormula::new(n_vars, clauses)?;
    check_resolution(&f2, &proof).into_result()?;
    Ok((f2, proof))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccurrenceStats {
    /// Leaf positions (left-to-right order) labelled by each clause.
    pub occ: Vec<Vec<usize>>,
    pub leaf_clauses: Vec<usize>,
    pub leaf_depths: Vec<u32>,
    /// Depths of the resolution steps on each pivot variable.
    pub pivot_depths: BTreeMap<u32, Vec<u32>>,
}

pub fn occurrence_stats(f: &CnfFormula, proof: &ResolutionTree) -> Result<OccurrenceStats> {
    check_resolution(f, proof).into_result()?;
    let depths = proof.depths();
    let mut occ = vec![Vec::new(); f.len()];
    let mut leaf_clauses = Vec::new();
    let mut leaf_depths = Vec::new();
    let mut pivot_depths: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for (id, node) in proof.nodes.iter().enumerate() {
        match *node {
            ProofNode::Leaf { clause } => {
                occ[clause].push(leaf_clauses.len());
                leaf_clauses.push(clause);
                leaf_depths.push(depths[id]);
            }
            ProofNode::Res { pivot, .. } => pivot_depths.entry(pivot).or_default().push(depths[id]),
        }
    }
    Ok(OccurrenceStats {
        occ,
        leaf_clauses,
        leaf_depths,
        pivot_depths,
    })
}

/// `(leaf K)` with 1-based `K`, `(res zV LEFT RIGHT)`; single spaces.
pub fn serialize_proof(proof: &ResolutionTree) -> String {
    fn go(p: &ResolutionTree, id: usize, out: &mut String) {
        match p.nodes[id] {
            ProofNode::Leaf { clause } => out.push_str(&format!("(leaf {})", clause + 1)),
            ProofNode::Res { pivot, left, right } => {
                out.push_str(&format!("(res z{pivot} "));
                go(p, left, out);
                out.push(' ');
                go(p, right, out);
                out.push(')');
            }
        }
    }
    let mut out = String::new();
    go(proof, 0, &mut out);
    out
}

/// Parses and validates a proof of `f`. Pivots may be written `zV` or `V`.
pub fn parse_proof(text: &str, f: &CnfFormula) -> Result<ResolutionTree> {
    fn number(e: &SExpr, what: &str) -> Result<(u64, usize)> {
        match e {
            SExpr::Atom { text, pos } => {
                let digits = text.strip_prefix('z').unwrap_or(text);
                digits
                    .parse::<u64>()
                    .map(|v| (v, *pos))
                    .map_err(|_| parse_error(*pos, format!("expected {what}, found {text:?}")))
            }
            SExpr::List { pos, .. } => Err(parse_error(*pos, format!("expected {what}, found a list"))),
        }
    }
    fn go(e: &SExpr) -> Result<ResolutionTree> {
        let SExpr::List { items, pos } = e else {
            let SExpr::Atom { pos, text } = e else { unreachable!() };
            return Err(parse_error(
                *pos,
                format!("expected `(leaf K)` or `(res ...)`, found {text:?}"),
            ));
        };
        let head = match items.first() {
            Some(SExpr::Atom { text, .. }) => text.as_str(),
            _ => return Err(parse_error(*pos, "expected `leaf` or `res`")),
        };
        match (head, items.len()) {
            ("leaf", 2) => {
                let (k, at) = number(&items[1], "clause index")?;
                if k == 0 {
                    return Err(parse_error(at, "clause indices start at 1"));
                }
                Ok(ResolutionTree::leaf(k as usize - 1))
            }
            ("res", 4) => {
                let (v, at) = number(&items[1], "pivot variable")?;
                if v == 0 || v > u32::MAX as u64 {
                    return Err(parse_error(at, "pivot variable out of range"));
                }
                Ok(ResolutionTree::resolve(v as u32, go(&items[2])?, go(&items[3])?))
            }
            ("leaf", _) => Err(parse_error(*pos, "`leaf` takes one clause index")),
            ("res", _) => Err(parse_error(*pos, "`res` takes a pivot and two children")),
            _ => Err(parse_error(*pos, format!("unknown node kind {head:?}"))),
        }
    }
    let proof = go(&sexpr::parse(text)?)?;
    check_resolution(f, &proof).into_result()?;
    Ok(proof)
}

/// Random unsatisfiable 3-CNF with `8n` clauses, by rejection sampling
/// against brute force (`3 ≤ n ≤ 24`).
pub fn random_unsat_3cnf<R: Rng + ?Sized>(n: u32, rng: &mut R) -> Result<CnfFormula> {
    if !(3..=ENUMERATION_LIMIT as u32).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "need 3 ≤ n ≤ {ENUMERATION_LIMIT}, got {n}"
        )));
    }
    loop {
        let f = random_cnf(n, 8 * n as usize, 3, rng);
        if brute_force_unsat(&f)?.is_unsat() {
            return Ok(f);
        }
    }
}
