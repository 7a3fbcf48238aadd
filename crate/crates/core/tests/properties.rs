mod common;

use maxent_fusion::dist::{bin_samples, OutOfRange};
use maxent_fusion::sentiment::{score_document, Lexicon};
use maxent_fusion::{
    estimate_population, forward_observe, marginalize, tv_error, BinnedJoint, Grid, Marginal, MomentConstraint,
    ObservedHistogram, SelectionFunction,
};
use proptest::prelude::*;

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n)
}

fn marginal(edges: &[f64], w: Vec<f64>) -> Marginal {
    Marginal::from_weights(edges.to_vec(), w).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn census_with_consistent_mean_reproduces_the_sample(w in weights(12), cats in 1usize..4) {
        let grid = Grid::uniform(-2.0, 3.0, 12, cats).unwrap();
        let shape = marginal(grid.edges(), w);
        let sel = SelectionFunction::constant(grid.clone(), 1.0).unwrap();
        let mean = MomentConstraint::mean(&grid, shape.mean()).unwrap();
        let est = estimate_population(&ObservedHistogram::new(shape.clone(), 1.0).unwrap(), &sel, &[mean]).unwrap();
        prop_assert!(tv_error(&est.marginal, &shape).unwrap() <= 1e-8);
    }

    #[test]
    fn total_variation_is_a_metric(a in weights(8), b in weights(8), c in weights(8)) {
        let edges: Vec<f64> = (0..=8).map(f64::from).collect();
        let (a, b, c) = (marginal(&edges, a), marginal(&edges, b), marginal(&edges, c));
        let ab = tv_error(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, tv_error(&b, &a).unwrap());
        prop_assert_eq!(tv_error(&a, &a).unwrap(), 0.0);
        prop_assert!(ab <= tv_error(&a, &c).unwrap() + tv_error(&c, &b).unwrap() + 1e-15);
    }

    #[test]
    fn forward_observation_is_linear_in_the_joint(a in weights(10), b in weights(10), sel in prop::collection::vec(0.05f64..1.0, 10), t in 0.0f64..1.0) {
        let grid = Grid::uniform(0.0, 1.0, 5, 2).unwrap();
        let ja = BinnedJoint::from_weights(grid.clone(), a).unwrap();
        let jb = BinnedJoint::from_weights(grid.clone(), b).unwrap();
        let mix: Vec<f64> = ja.mass().iter().zip(jb.mass()).map(|(x, y)| t * x + (1.0 - t) * y).collect();
        let jm = BinnedJoint::new(grid.clone(), mix).unwrap();
        let sel = SelectionFunction::new(grid, sel).unwrap();
        let oa = forward_observe(&ja, &sel).unwrap().observed_mass();
        let ob = forward_observe(&jb, &sel).unwrap().observed_mass();
        let om = forward_observe(&jm, &sel).unwrap().observed_mass();
        for i in 0..5 {
            prop_assert!((om[i] - (t * oa[i] + (1.0 - t) * ob[i])).abs() < 1e-14);
        }
    }

    #[test]
    fn marginalize_preserves_mass(w in weights(12)) {
        let grid = Grid::uniform(0.0, 1.0, 4, 3).unwrap();
        let m = marginalize(&BinnedJoint::from_weights(grid, w).unwrap());
        prop_assert!((m.mass().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn estimate_meets_its_constraints(w in weights(8), sel in prop::collection::vec(0.05f64..1.0, 16)) {
        // targets come from a positive joint, so the problem is feasible
        let grid = Grid::uniform(-1.0, 1.0, 8, 2).unwrap();
        let truth = BinnedJoint::from_weights(grid.clone(), w.iter().flat_map(|v| [*v, 1.0 - 0.5 * v]).collect()).unwrap();
        let sel = SelectionFunction::new(grid.clone(), sel).unwrap();
        let obs = forward_observe(&truth, &sel).unwrap();
        let mean = MomentConstraint::mean(&grid, 0.0).unwrap();
        let target = mean.evaluate(&truth);
        let est = estimate_population(&obs, &sel, &[MomentConstraint::mean(&grid, target).unwrap()]).unwrap();
        prop_assert!(est.max_residual() <= 1e-8);
    }

    #[test]
    fn binned_counts_sum_to_in_range_values(values in prop::collection::vec(-1.5f64..1.5, 1..200)) {
        let edges: Vec<f64> = (0..=10).map(|i| -1.0 + 0.2 * f64::from(i)).collect();
        let inside = values.iter().filter(|v| (-1.0..=1.0).contains(*v)).count();
        match bin_samples(&values, &edges, OutOfRange::Discard) {
            Ok(b) => prop_assert_eq!(b.counts.iter().sum::<u64>() as usize, inside),
            Err(_) => prop_assert_eq!(inside, 0),
        }
    }

    #[test]
    fn document_scores_stay_in_range(words in prop::collection::vec((0usize..6, prop::bool::ANY), 1..40), scores in prop::collection::vec(-1.0f64..=1.0, 6)) {
        let names = ["alpha", "beta", "gamma", "delta", "eps", "zeta"];
        let lex = Lexicon::new(names.iter().zip(&scores).map(|(w, s)| (*w, *s))).unwrap();
        let text: Vec<String> = words.iter().map(|(i, upper)| if *upper { names[*i].to_uppercase() } else { names[*i].to_string() }).collect();
        let s = score_document(&text.join(", "), &lex).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s.score));
        prop_assert_eq!(s.matched_word_count, words.len());
    }
}
