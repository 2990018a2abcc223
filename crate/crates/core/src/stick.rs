//! The stick game.
//!
//! Play starts with one empty pile. A move picks a pile, adds a unit stick
//! to it, breaks every stick in two and moves one part of each into a new
//! pile placed right after the chosen one. The piles are the leaves of a
//! growing tree, and squared entries of a normalized tree matrix row are
//! exactly the stick lengths of the corresponding pile.
//!
//! The matrix also has an all-ones dummy column, which the sticks do not
//! show. Each pile carries a hidden dummy share (initially 1) that splits
//! in the same ratio as the move's new stick, so the dummy column is
//! normalized too. [`StickGame::row_norms`] includes the share and
//! [`StickGame::stick_scores`] does not.

use std::fmt;

use crate::certificates::tree_dual_bound;
use crate::matrix::{matrix_of_tree, RealMatrix};
use crate::tree::{BinaryTree, LiteralMask};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Pile {
    /// Stick lengths, one per ancestor, root first.
    pub sticks: Vec<f64>,
    pub dummy_share: f64,
}

impl Pile {
    pub fn stick_score(&self) -> f64 {
        self.sticks.iter().fold(0.0, |acc, s| acc + s.sqrt())
    }

    pub fn row_norm(&self) -> f64 {
        self.stick_score() + self.dummy_share.sqrt()
    }
}

/// Pile index and the fraction of each stick (existing ones in order, then
/// the new unit stick) that stays in the chosen pile.
#[derive(Debug, Clone, PartialEq)]
pub struct Move {
    pub pile: usize,
    pub fractions: Vec<f64>,
}

impl Move {
    /// `pile: f1 f2 ... fk` with fractions as decimals or `p/q`.
    pub fn parse(line: &str) -> Result<Move> {
        let (pile, rest) = line
            .split_once(':')
            .ok_or_else(|| Error::Game(format!("expected `pile: f1 ... fk`, got {line:?}")))?;
        let pile = pile
            .trim()
            .parse()
            .map_err(|_| Error::Game(format!("bad pile index {:?}", pile.trim())))?;
        let fractions = rest.split_whitespace().map(parse_fraction).collect::<Result<_>>()?;
        Ok(Move { pile, fractions })
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.pile)?;
        for x in &self.fractions {
            write!(f, " {x}")?;
        }
        Ok(())
    }
}

/// `p/q` is divided exactly once; other text goes through `f64` parsing.
pub fn parse_fraction(text: &str) -> Result<f64> {
    let bad = || Error::Game(format!("bad fraction {text:?}"));
    let value = match text.split_once('/') {
        Some((p, q)) => {
            let p: u64 = p.parse().map_err(|_| bad())?;
            let q: u64 = q.parse().map_err(|_| bad())?;
            if q == 0 {
                return Err(bad());
            }
            p as f64 / q as f64
        }
        None => text.parse::<f64>().map_err(|_| bad())?,
    };
    Ok(value)
}

/// One move per line; blank lines and `#` comments are skipped.
pub fn parse_script(text: &str) -> Result<Vec<Move>> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| Move::parse(l).map_err(|e| Error::Game(format!("line {}: {e}", i + 1))))
        .collect()
}

#[derive(Debug, Clone)]
pub struct StickGame {
    piles: Vec<Pile>,
    tree: BinaryTree,
    log: Vec<Move>,
}

impl Default for StickGame {
    fn default() -> Self {
        Self::new()
    }
}

impl StickGame {
    pub fn new() -> Self {
        StickGame {
            piles: vec![Pile {
                sticks: Vec::new(),
                dummy_share: 1.0,
            }],
            tree: BinaryTree::single_leaf(),
            log: Vec::new(),
        }
    }

    pub fn piles(&self) -> &[Pile] {
        &self.piles
    }

    pub fn tree(&self) -> &BinaryTree {
        &self.tree
    }

    pub fn log(&self) -> &[Move] {
        &self.log
    }

    pub fn play(&mut self, mv: Move) -> Result<()> {
        let n = self.piles.len();
        let pile = self
            .piles
            .get(mv.pile)
            .ok_or_else(|| Error::Game(format!("pile {} does not exist ({n} piles)", mv.pile)))?;
        let want = pile.sticks.len() + 1;
        if mv.fractions.len() != want {
            return Err(Error::Game(format!(
                "pile {} needs {want} fractions, got {}",
                mv.pile,
                mv.fractions.len()
            )));
        }
        if let Some(x) = mv.fractions.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::Game(format!("fraction {x} is not strictly between 0 and 1")));
        }
        let mut sticks = pile.sticks.clone();
        sticks.push(1.0);
        let kept: Vec<f64> = sticks.iter().zip(&mv.fractions).map(|(s, f)| s * f).collect();
        let moved: Vec<f64> = sticks.iter().zip(&mv.fractions).map(|(s, f)| s * (1.0 - f)).collect();
        let share = *mv.fractions.last().expect("at least one fraction");
        let dummy = pile.dummy_share;
        self.piles[mv.pile] = Pile {
            sticks: kept,
            dummy_share: dummy * share,
        };
        self.piles.insert(
            mv.pile + 1,
            Pile {
                sticks: moved,
                dummy_share: dummy * (1.0 - share),
            },
        );
        self.tree = self.tree.split_leaf(mv.pile);
        self.log.push(mv);
        Ok(())
    }

    /// `Σ √length` per pile.
    pub fn stick_scores(&self) -> Vec<f64> {
        self.piles.iter().map(Pile::stick_score).collect()
    }

    /// Row ℓ¹ norms of [`StickGame::normalization`].
    pub fn row_norms(&self) -> Vec<f64> {
        self.piles.iter().map(Pile::row_norm).collect()
    }

    pub fn min_row_norm(&self) -> f64 {
        self.row_norms().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn tree_bound(&self) -> f64 {
        tree_dual_bound(&self.tree)
    }

    /// The normalized matrix of the implied tree this state encodes: dummy
    /// column first, entries `±√length` on each pile's ancestors.
    pub fn normalization(&self) -> RealMatrix {
        let n = self.tree.n_internal();
        let mut a = RealMatrix::zeros(self.piles.len(), n + 1);
        for (leaf, pile) in self.piles.iter().enumerate() {
            a.set(leaf, 0, pile.dummy_share.sqrt());
            for (lit, &len) in self.tree.path_literals(leaf).iter().zip(&pile.sticks) {
                let s = if lit.positive { 1.0 } else { -1.0 };
                a.set(leaf, lit.var as usize, s * len.sqrt());
            }
        }
        a
    }

    /// Checks the state against its implied tree: same sign pattern as the
    /// tree matrix, unit column norms (to 1e-12), and
    /// `min row norm ≤ tree bound < 1 + √2`.
    pub fn verify(&self) -> Result<()> {
        if self.piles.len() != self.tree.n_leaves() {
            return Err(Error::Game("pile count differs from leaf count".into()));
        }
        for (leaf, pile) in self.piles.iter().enumerate() {
            if pile.sticks.len() as u32 != self.tree.leaf_depth(leaf) {
                return Err(Error::Game(format!("pile {leaf} has the wrong number of sticks")));
            }
        }
        let a = self.normalization();
        let signs = matrix_of_tree(&self.tree, &LiteralMask::empty())?;
        if a.sign() != signs {
            return Err(Error::Game("sign pattern differs from the tree matrix".into()));
        }
        if let Some(j) = a.column_norms().iter().position(|c| (c - 1.0).abs() > 1e-12) {
            return Err(Error::Game(format!("column {j} is not normalized")));
        }
        let bound = self.tree_bound();
        if self.min_row_norm() > bound + 1e-12 || bound >= crate::ONE_PLUS_SQRT2 {
            return Err(Error::Game("minimum pile exceeds the tree bound".into()));
        }
        Ok(())
    }
}

impl fmt::Display for StickGame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.piles.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str("(")?;
            for (k, s) in p.sticks.iter().enumerate() {
                if k > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{s:.6}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Script that grows the complete tree of depth `k` with all splits 1/2.
pub fn uniform_script(k: u32) -> Vec<Move> {
    let mut moves = Vec::new();
    for level in 0..k {
        for i in 0..1usize << level {
            moves.push(Move {
                pile: 2 * i,
                fractions: vec![0.5; level as usize + 1],
            });
        }
    }
    moves
}
