//! Full rooted binary trees with labelled internal vertices and the
//! deficiency-one formulas `F_T` they generate.
//!
//! Conventions used throughout the crate:
//! - the edge to the LEFT child carries the positive literal `z_v`, the edge
//!   to the right child carries `¬z_v`;
//! - leaves (and hence clauses) are numbered left to right;
//! - variable ids are `1..=n_internal`: breadth-first for [`complete_tree`],
//!   pre-order for parsed and random trees.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use rand::Rng;

use crate::boolean::{Assignment, Clause, CnfFormula, Literal};
use crate::sexpr::{self, parse_error, SExpr};
use crate::{Error, Result};

pub type NodeId = usize;

/// Largest depth accepted by [`complete_tree`].
pub const MAX_COMPLETE_DEPTH: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    Internal { var: u32, left: NodeId, right: NodeId },
    Leaf { leaf: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryTree {
    nodes: Vec<Node>,
    root: NodeId,
    /// `names[var - 1]`
    names: Vec<String>,
    parent: Vec<Option<NodeId>>,
    depth: Vec<u32>,
    /// Half-open range of leaf indices below each node.
    leaf_range: Vec<(usize, usize)>,
    leaves: Vec<NodeId>,
    var_node: Vec<NodeId>,
}

/// Unlabelled shape used while building trees.
enum Shape {
    Leaf,
    Internal(String, Box<Shape>, Box<Shape>),
}

impl BinaryTree {
    pub fn single_leaf() -> Self {
        Self::from_shape(Shape::Leaf, Labeling::PreOrder)
    }

    fn from_shape(shape: Shape, labeling: Labeling) -> Self {
        let mut nodes = Vec::new();
        let mut names_by_node: HashMap<NodeId, String> = HashMap::new();
        let root = push_shape(shape, &mut nodes, &mut names_by_node);
        let mut tree = BinaryTree {
            nodes,
            root,
            names: Vec::new(),
            parent: Vec::new(),
            depth: Vec::new(),
            leaf_range: Vec::new(),
            leaves: Vec::new(),
            var_node: Vec::new(),
        };
        tree.index(labeling, &names_by_node);
        tree
    }

    /// Recomputes parents, depths, leaf numbering and variable ids.
    fn index(&mut self, labeling: Labeling, names_by_node: &HashMap<NodeId, String>) {
        let len = self.nodes.len();
        self.parent = vec![None; len];
        self.depth = vec![0; len];
        self.leaf_range = vec![(0, 0); len];
        self.leaves.clear();

        // Pre-order walk: leaf numbering, depths, parents.
        let mut preorder = Vec::with_capacity(len);
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            preorder.push(v);
            match self.nodes[v] {
                Node::Internal { left, right, .. } => {
                    for c in [left, right] {
                        self.parent[c] = Some(v);
                        self.depth[c] = self.depth[v] + 1;
                    }
                    stack.push(right);
                    stack.push(left);
                }
                Node::Leaf { .. } => {
                    let idx = self.leaves.len();
                    self.nodes[v] = Node::Leaf { leaf: idx };
                    self.leaves.push(v);
                }
            }
        }
        for &v in preorder.iter().rev() {
            self.leaf_range[v] = match self.nodes[v] {
                Node::Leaf { leaf } => (leaf, leaf + 1),
                Node::Internal { left, right, .. } => (self.leaf_range[left].0, self.leaf_range[right].1),
            };
        }

        let internal_order: Vec<NodeId> = match labeling {
            Labeling::PreOrder => preorder.into_iter().filter(|&v| self.is_internal(v)).collect(),
            Labeling::BreadthFirst => {
                let mut order = Vec::new();
                let mut queue = std::collections::VecDeque::from([self.root]);
                while let Some(v) = queue.pop_front() {
                    if let Node::Internal { left, right, .. } = self.nodes[v] {
                        order.push(v);
                        queue.push_back(left);
                        queue.push_back(right);
                    }
                }
                order
            }
        };
        self.names = Vec::with_capacity(internal_order.len());
        self.var_node = internal_order.clone();
        for (i, &v) in internal_order.iter().enumerate() {
            let var = i as u32 + 1;
            if let Node::Internal { left, right, .. } = self.nodes[v] {
                self.nodes[v] = Node::Internal { var, left, right };
            }
            self.names
                .push(names_by_node.get(&v).cloned().unwrap_or_else(|| format!("z{var}")));
        }
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> Node {
        self.nodes[id]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Variable of an internal vertex.
    pub fn node_var(&self, id: NodeId) -> Option<u32> {
        match self.nodes[id] {
            Node::Internal { var, .. } => Some(var),
            Node::Leaf { .. } => None,
        }
    }

    pub fn is_internal(&self, id: NodeId) -> bool {
        matches!(self.nodes[id], Node::Internal { .. })
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn n_internal(&self) -> usize {
        self.var_node.len()
    }

    /// Node ids of the leaves, left to right.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    /// Node ids of the internal vertices, indexed by `var - 1`.
    pub fn internal_nodes(&self) -> &[NodeId] {
        &self.var_node
    }

    pub fn node_of_var(&self, var: u32) -> NodeId {
        self.var_node[var as usize - 1]
    }

    pub fn var_name(&self, var: u32) -> &str {
        &self.names[var as usize - 1]
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.parent[id]
    }

    pub fn depth(&self, id: NodeId) -> u32 {
        self.depth[id]
    }

    pub fn leaf_depth(&self, leaf: usize) -> u32 {
        self.depth[self.leaves[leaf]]
    }

    pub fn leaf_depths(&self) -> Vec<u32> {
        self.leaves.iter().map(|&v| self.depth[v]).collect()
    }

    pub fn internal_depths(&self) -> Vec<u32> {
        self.var_node.iter().map(|&v| self.depth[v]).collect()
    }

    /// Leaf indices `lo..hi` of the subtree rooted at `id`.
    pub fn leaf_range(&self, id: NodeId) -> std::ops::Range<usize> {
        let (lo, hi) = self.leaf_range[id];
        lo..hi
    }

    /// Whether leaf `leaf` lies strictly below internal vertex `id`.
    pub fn is_below(&self, leaf: usize, id: NodeId) -> bool {
        self.is_internal(id) && self.leaf_range(id).contains(&leaf)
    }

    /// Edge literals on the path from the root to `leaf`, root first.
    pub fn path_literals(&self, leaf: usize) -> Vec<Literal> {
        let mut lits = Vec::new();
        let mut v = self.leaves[leaf];
        while let Some(p) = self.parent[v] {
            if let Node::Internal { var, left, .. } = self.nodes[p] {
                lits.push(Literal {
                    var,
                    positive: left == v,
                });
            }
            v = p;
        }
        lits.reverse();
        lits
    }

    /// `Σ_ℓ 2^{-depth(ℓ)}`, always 1 for a full tree.
    pub fn kraft_sum(&self) -> f64 {
        self.leaf_depths().iter().map(|&d| 2f64.powi(-(d as i32))).sum()
    }

    /// `(|I_a|, |L_a|)` for `a = 0..=max depth`.
    pub fn depth_census(&self) -> Vec<(usize, usize)> {
        let max = self.depth.iter().copied().max().unwrap_or(0) as usize;
        let mut census = vec![(0, 0); max + 1];
        for (v, &d) in self.depth.iter().enumerate() {
            if self.is_internal(v) {
                census[d as usize].0 += 1;
            } else {
                census[d as usize].1 += 1;
            }
        }
        census
    }

    /// The formula `F_T` with the occurrences in `mask` deleted: one clause
    /// per leaf, left to right.
    pub fn formula(&self, mask: &LiteralMask) -> Result<CnfFormula> {
        mask.validate(self)?;
        let clauses = (0..self.n_leaves())
            .map(|leaf| {
                Clause::new(
                    self.path_literals(leaf)
                        .into_iter()
                        .filter(|l| !mask.removed.contains(&(leaf, l.var))),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        CnfFormula::new(self.n_internal() as u32, clauses)
    }

    /// Walks from the root along the edge whose literal is false under `x`
    /// and returns the leaf reached; its clause is falsified.
    pub fn falsified_leaf(&self, x: &Assignment) -> Result<usize> {
        if x.len() < self.n_internal() {
            return Err(Error::DimensionMismatch {
                expected: self.n_internal(),
                got: x.len(),
            });
        }
        let mut v = self.root;
        loop {
            match self.nodes[v] {
                Node::Leaf { leaf } => return Ok(leaf),
                Node::Internal { var, left, right } => {
                    // z_v true falsifies the right edge (¬z_v).
                    v = if x.value(var) { right } else { left };
                }
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let expr = sexpr::parse(text)?;
        let mut seen = HashMap::new();
        let shape = shape_from_sexpr(&expr, &mut seen)?;
        Ok(Self::from_shape(shape, Labeling::PreOrder))
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        self.write_node(self.root, &mut out);
        out
    }

    fn write_node(&self, v: NodeId, out: &mut String) {
        match self.nodes[v] {
            Node::Leaf { .. } => out.push_str("()"),
            Node::Internal { var, left, right } => {
                let _ = write!(out, "({} ", self.var_name(var));
                self.write_node(left, out);
                out.push(' ');
                self.write_node(right, out);
                out.push(')');
            }
        }
    }

    /// Replaces leaf `leaf` by an internal vertex with two leaf children and
    /// relabels the whole tree in pre-order.
    pub fn split_leaf(&self, leaf: usize) -> BinaryTree {
        let mut shape = self.to_shape(self.root);
        fn split(shape: &mut Shape, target: usize, counter: &mut usize) -> bool {
            match shape {
                Shape::Leaf => {
                    if *counter == target {
                        *shape = Shape::Internal(String::new(), Box::new(Shape::Leaf), Box::new(Shape::Leaf));
                        return true;
                    }
                    *counter += 1;
                    false
                }
                Shape::Internal(_, l, r) => split(l, target, counter) || split(r, target, counter),
            }
        }
        let mut counter = 0;
        assert!(split(&mut shape, leaf, &mut counter), "leaf index out of range");
        Self::from_shape(shape, Labeling::PreOrder).with_default_names()
    }

    fn to_shape(&self, v: NodeId) -> Shape {
        match self.nodes[v] {
            Node::Leaf { .. } => Shape::Leaf,
            Node::Internal { var, left, right } => Shape::Internal(
                self.var_name(var).to_owned(),
                Box::new(self.to_shape(left)),
                Box::new(self.to_shape(right)),
            ),
        }
    }

    fn with_default_names(mut self) -> Self {
        for (i, name) in self.names.iter_mut().enumerate() {
            *name = format!("z{}", i + 1);
        }
        self
    }
}

#[derive(Clone, Copy)]
enum Labeling {
    PreOrder,
    BreadthFirst,
}

fn push_shape(shape: Shape, nodes: &mut Vec<Node>, names: &mut HashMap<NodeId, String>) -> NodeId {
    match shape {
        Shape::Leaf => {
            nodes.push(Node::Leaf { leaf: 0 });
            nodes.len() - 1
        }
        Shape::Internal(name, l, r) => {
            let id = nodes.len();
            nodes.push(Node::Leaf { leaf: 0 });
            let left = push_shape(*l, nodes, names);
            let right = push_shape(*r, nodes, names);
            nodes[id] = Node::Internal { var: 0, left, right };
            if !name.is_empty() {
                names.insert(id, name);
            }
            id
        }
    }
}

fn shape_from_sexpr(expr: &SExpr, seen: &mut HashMap<String, usize>) -> Result<Shape> {
    let SExpr::List { items, pos } = expr else {
        return Err(parse_error(expr.pos(), "expected `()` or `(NAME LEFT RIGHT)`"));
    };
    match items.as_slice() {
        [] => Ok(Shape::Leaf),
        [SExpr::Atom { text, pos: name_pos }, left, right] => {
            if let Some(first) = seen.insert(text.clone(), *name_pos) {
                return Err(Error::InvalidTree(format!(
                    "duplicate label {text:?} at {name_pos} (first at {first})"
                )));
            }
            Ok(Shape::Internal(
                text.clone(),
                Box::new(shape_from_sexpr(left, seen)?),
                Box::new(shape_from_sexpr(right, seen)?),
            ))
        }
        [SExpr::Atom { text, .. }, ..] => Err(Error::InvalidTree(format!(
            "vertex {text:?} at {pos} has {} children, expected 2",
            items.len() - 1
        ))),
        _ => Err(parse_error(*pos, "internal vertex must start with a label")),
    }
}

/// The complete binary tree of depth `k`, labelled breadth-first.
pub fn complete_tree(k: u32) -> Result<BinaryTree> {
    if k > MAX_COMPLETE_DEPTH {
        return Err(Error::InvalidArgument(format!(
            "complete tree depth {k} exceeds {MAX_COMPLETE_DEPTH}"
        )));
    }
    fn build(depth: u32) -> Shape {
        if depth == 0 {
            Shape::Leaf
        } else {
            Shape::Internal(String::new(), Box::new(build(depth - 1)), Box::new(build(depth - 1)))
        }
    }
    Ok(BinaryTree::from_shape(build(k), Labeling::BreadthFirst))
}

/// Grows a tree with `leaves` leaves from a single leaf by repeatedly
/// splitting a uniformly chosen leaf; labels are assigned in pre-order.
pub fn random_tree<R: Rng + ?Sized>(leaves: usize, rng: &mut R) -> BinaryTree {
    assert!(leaves >= 1, "a tree has at least one leaf");
    // children[v] = Some((l, r)) for internal vertices.
    let mut children: Vec<Option<(usize, usize)>> = vec![None];
    let mut open = vec![0usize];
    while open.len() < leaves {
        let pick = rng.gen_range(0..open.len());
        let v = open.swap_remove(pick);
        let (l, r) = (children.len(), children.len() + 1);
        children.push(None);
        children.push(None);
        children[v] = Some((l, r));
        open.push(l);
        open.push(r);
    }
    fn shape(v: usize, children: &[Option<(usize, usize)>]) -> Shape {
        match children[v] {
            None => Shape::Leaf,
            Some((l, r)) => Shape::Internal(
                String::new(),
                Box::new(shape(l, children)),
                Box::new(shape(r, children)),
            ),
        }
    }
    BinaryTree::from_shape(shape(0, &children), Labeling::PreOrder)
}

/// Literal occurrences `(leaf, var)` deleted from the leaf clauses of a tree
/// formula.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LiteralMask {
    removed: BTreeSet<(usize, u32)>,
}

impl LiteralMask {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(pairs: impl IntoIterator<Item = (usize, u32)>) -> Self {
        LiteralMask {
            removed: pairs.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, leaf: usize, var: u32) -> bool {
        self.removed.insert((leaf, var))
    }

    pub fn is_empty(&self) -> bool {
        self.removed.is_empty()
    }

    pub fn len(&self) -> usize {
        self.removed.len()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.removed.iter().copied()
    }

    /// Every pair names an ancestor of its leaf, and every literal keeps at
    /// least one occurrence.
    pub fn validate(&self, tree: &BinaryTree) -> Result<()> {
        for &(leaf, var) in &self.removed {
            if leaf >= tree.n_leaves() || var == 0 || var as usize > tree.n_internal() {
                return Err(Error::InvalidMask(format!("({leaf}, z{var}) out of range")));
            }
            if !tree.is_below(leaf, tree.node_of_var(var)) {
                return Err(Error::InvalidMask(format!("z{var} is not an ancestor of leaf {leaf}")));
            }
        }
        for var in 1..=tree.n_internal() as u32 {
            let node = tree.node_of_var(var);
            let Node::Internal { left, right, .. } = tree.node(node) else {
                unreachable!()
            };
            for (side, positive) in [(left, true), (right, false)] {
                if tree.leaf_range(side).all(|leaf| self.removed.contains(&(leaf, var))) {
                    let sign = if positive { "" } else { "¬" };
                    return Err(Error::InvalidMask(format!(
                        "literal {sign}{} loses every occurrence",
                        tree.var_name(var)
                    )));
                }
            }
        }
        Ok(())
    }

    /// A uniformly random valid mask: each occurrence is proposed for
    /// removal with probability `p` and kept if removal would break validity.
    pub fn random<R: Rng + ?Sized>(tree: &BinaryTree, p: f64, rng: &mut R) -> Self {
        let mut mask = LiteralMask::empty();
        for leaf in 0..tree.n_leaves() {
            for lit in tree.path_literals(leaf) {
                if rng.gen_bool(p) {
                    mask.insert(leaf, lit.var);
                    if mask.validate(tree).is_err() {
                        mask.removed.remove(&(leaf, lit.var));
                    }
                }
            }
        }
        mask
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolean::{brute_force_unsat, tests_support::five_clause_formula};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) const FIVE_LEAF: &str = "(w (x () (z () ())) (y () ()))";

    #[test]
    fn complete_tree_shapes() {
        let t0 = complete_tree(0).unwrap();
        assert_eq!((t0.n_leaves(), t0.n_internal()), (1, 0));
        let f0 = t0.formula(&LiteralMask::empty()).unwrap();
        assert_eq!(f0.len(), 1);
        assert!(f0.clauses()[0].is_empty());

        let t2 = complete_tree(2).unwrap();
        assert_eq!((t2.n_leaves(), t2.n_internal()), (4, 3));

        let t3 = complete_tree(3).unwrap();
        assert!(t3.leaf_depths().iter().all(|&d| d == 3));
        assert_eq!(t3.kraft_sum(), 1.0);
        assert!(complete_tree(21).is_err());
    }

    #[test]
    fn complete_tree_is_labelled_breadth_first() {
        let t = complete_tree(3).unwrap();
        let depths: Vec<u32> = t.internal_depths();
        assert_eq!(depths, vec![0, 1, 1, 2, 2, 2, 2]);
        assert_eq!(t.node_of_var(1), t.root());
        // Variable 4 is the left child of variable 2.
        let Node::Internal { left, .. } = t.node(t.node_of_var(2)) else {
            panic!()
        };
        assert_eq!(left, t.node_of_var(4));
    }

    #[test]
    fn five_clause_formula_formula() {
        let t = BinaryTree::parse(FIVE_LEAF).unwrap();
        assert_eq!(t.formula(&LiteralMask::empty()).unwrap(), five_clause_formula());
        assert_eq!(t.leaf_depths(), vec![2, 3, 3, 2, 2]);
        assert_eq!(t.var_name(4), "y");
    }

    #[test]
    fn depth_one_tree_gives_two_unit_clauses() {
        let f = complete_tree(1).unwrap().formula(&LiteralMask::empty()).unwrap();
        assert_eq!(f, CnfFormula::from_ints(1, &[&[1], &[-1]]).unwrap());
    }

    #[test]
    fn falsified_leaf_examples() {
        let t = BinaryTree::parse(FIVE_LEAF).unwrap();
        // w = y = true, others arbitrary.
        for x in [[true, true, true, true], [true, false, false, true]] {
            assert_eq!(t.falsified_leaf(&Assignment::from_bools(&x)).unwrap(), 4);
        }
        let t1 = complete_tree(1).unwrap();
        assert_eq!(t1.falsified_leaf(&Assignment::from_bools(&[false])).unwrap(), 0);
    }

    #[test]
    fn parse_and_serialize() {
        let t = BinaryTree::parse("()").unwrap();
        assert_eq!((t.n_leaves(), t.n_internal()), (1, 0));
        assert_eq!(t.serialize(), "()");
        let t = BinaryTree::parse("  (a\n ()   ())").unwrap();
        assert_eq!(t.serialize(), "(a () ())");
        let sample = BinaryTree::parse(FIVE_LEAF).unwrap();
        assert_eq!(sample.serialize(), FIVE_LEAF);
    }

    #[test]
    fn parse_rejections() {
        assert!(matches!(
            BinaryTree::parse("(a () (a () ()))"),
            Err(Error::InvalidTree(_))
        ));
        assert!(matches!(BinaryTree::parse("(a ())"), Err(Error::InvalidTree(_))));
        assert!(matches!(BinaryTree::parse("(a () () ())"), Err(Error::InvalidTree(_))));
        assert!(matches!(
            BinaryTree::parse("(() () ())"),
            Err(Error::Parse { pos: 0, .. })
        ));
        assert!(matches!(
            BinaryTree::parse("(a () b)"),
            Err(Error::Parse { pos: 6, .. })
        ));
        assert!(matches!(BinaryTree::parse("(a () ()"), Err(Error::Parse { .. })));
    }

    #[test]
    fn mask_validation() {
        let t = BinaryTree::parse(FIVE_LEAF).unwrap();
        // Drop w from the clause (w ∨ ¬x ∨ z): w still occurs in two clauses.
        let mask = LiteralMask::new([(1, 1)]);
        let f = t.formula(&mask).unwrap();
        assert_eq!(f.clauses()[1], Clause::new([Literal::neg(2), Literal::pos(3)]).unwrap());
        // y is not an ancestor of leaf 0.
        assert!(matches!(
            t.formula(&LiteralMask::new([(0, 4)])),
            Err(Error::InvalidMask(_))
        ));
        // Removing the only occurrence of ¬y.
        assert!(matches!(
            t.formula(&LiteralMask::new([(4, 4)])),
            Err(Error::InvalidMask(_))
        ));
    }

    #[test]
    fn falsified_leaf_agrees_with_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let t = random_tree(rng.gen_range(1..=20), &mut rng);
            let f = t.formula(&LiteralMask::empty()).unwrap();
            let x = Assignment::random(t.n_internal(), &mut rng);
            assert!(!f.evaluate(&x).unwrap());
            let leaf = t.falsified_leaf(&x).unwrap();
            assert!(!f.clauses()[leaf].is_satisfied(&x));
        }
    }

    #[test]
    fn random_tree_formulas_are_unsatisfiable() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..60 {
            let t = random_tree(rng.gen_range(1..=21), &mut rng);
            let f = t.formula(&LiteralMask::empty()).unwrap();
            assert_eq!(f.deficiency(), 1);
            assert!(brute_force_unsat(&f).unwrap().is_unsat());
            let mask = LiteralMask::random(&t, 0.3, &mut rng);
            let masked = t.formula(&mask).unwrap();
            assert!(brute_force_unsat(&masked).unwrap().is_unsat());
            assert_eq!(masked.len(), f.len());
        }
    }

    proptest! {
        #[test]
        fn structural_identities(leaves in 1usize..80, seed in any::<u64>()) {
            let t = random_tree(leaves, &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(t.n_leaves(), leaves);
            prop_assert_eq!(t.n_internal() + 1, leaves);
            prop_assert!((t.kraft_sum() - 1.0).abs() < 1e-12);
            let census = t.depth_census();
            prop_assert_eq!(census[0], if leaves == 1 { (0, 1) } else { (1, 0) });
            for a in 1..census.len() {
                prop_assert_eq!(census[a].1, 2 * census[a - 1].0 - census[a].0);
            }
            let text = t.serialize();
            prop_assert_eq!(BinaryTree::parse(&text).unwrap(), t);
        }
    }
}
