use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unsat_lab::boolean::{parse_dimacs, random_cnf, write_cnf, DimacsFormula};
use unsat_lab::certificates::{conjecture_value, restrict_to_used, tree_certificate};
use unsat_lab::matrix::matrix_of_tree;
use unsat_lab::normopt::{solve_dual, NormProblem, SolverOptions};
use unsat_lab::resolution::{check_resolution, dpll_refute, parse_proof, proof_from_tree, serialize_proof, Refutation};
use unsat_lab::stick::{Move, StickGame};
use unsat_lab::tree::{random_tree, BinaryTree, LiteralMask};
use unsat_lab::ONE_PLUS_SQRT2;

fn tree_from(leaves: usize, seed: u64) -> BinaryTree {
    random_tree(leaves, &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn dimacs_round_trip(n in 3u32..8, m in 1usize..12, seed in any::<u64>()) {
        let f = random_cnf(n, m, 3, &mut ChaCha8Rng::seed_from_u64(seed));
        match parse_dimacs(&write_cnf(&f)).unwrap() {
            DimacsFormula::Cnf(g) => prop_assert_eq!(g, f),
            DimacsFormula::Nae(_) => prop_assert!(false, "parsed as NAE"),
        }
    }

    #[test]
    fn tree_text_and_proof_round_trip(leaves in 1usize..40, seed in any::<u64>()) {
        let t = tree_from(leaves, seed);
        let back = BinaryTree::parse(&t.serialize()).unwrap();
        prop_assert_eq!(back.leaf_depths(), t.leaf_depths());

        let f = t.formula(&LiteralMask::empty()).unwrap();
        let proof = proof_from_tree(&t);
        prop_assert!(check_resolution(&f, &proof).is_valid());
        let reparsed = parse_proof(&serialize_proof(&proof), &f).unwrap();
        prop_assert_eq!(reparsed, proof);
    }

    #[test]
    fn tree_certificate_bounds_the_solver(leaves in 1usize..24, seed in any::<u64>()) {
        let t = tree_from(leaves, seed);
        let a = matrix_of_tree(&t, &LiteralMask::empty()).unwrap();
        let p = NormProblem::from_sign_matrix(&a).unwrap();
        let opts = SolverOptions { tol: 1e-7, ..SolverOptions::default() };
        let (_, report) = solve_dual(&p, &opts).unwrap();
        let bound = tree_certificate(&t).bound;
        prop_assert!(report.primal_value <= report.dual_value + 1e-9);
        prop_assert!(report.primal_value <= bound + 1e-9, "bound {} value {}", bound, report.primal_value);
        prop_assert!(report.primal_value < ONE_PLUS_SQRT2);
    }

    #[test]
    fn dpll_proofs_certify_below_the_limit(n in 2u32..7, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_cnf(n, 8 * n as usize, 2, &mut rng);
        if let Refutation::Proof(proof) = dpll_refute(&f).unwrap() {
            prop_assert!(check_resolution(&f, &proof).is_valid());
            let (g, used_proof, _) = restrict_to_used(&f, &proof).unwrap();
            let v = conjecture_value(&g, &used_proof).unwrap();
            prop_assert!(v.weak_value >= v.value - 1e-10);
            prop_assert!(v.value < ONE_PLUS_SQRT2);
        }
    }

    #[test]
    fn random_stick_play_stays_consistent(
        moves in prop::collection::vec((any::<u64>(), prop::collection::vec(0.01f64..0.99, 1..12)), 0..10),
    ) {
        let mut game = StickGame::new();
        for (pick, raw) in moves {
            let pile = (pick % game.piles().len() as u64) as usize;
            let need = game.piles()[pile].sticks.len() + 1;
            let fractions: Vec<f64> = raw.iter().cycle().take(need).copied().collect();
            game.play(Move { pile, fractions }).unwrap();
            game.verify().unwrap();
        }
        prop_assert!(game.min_row_norm() < ONE_PLUS_SQRT2);
    }
}
