use proptest::prelude::*;
use sdlc_core::arbitrary_learner::{compute_boost_budget, strong_run, weak_run, BoostParams, Termination};
use sdlc_core::dataset::{gen_arbitrary, ArbitraryFamily, ArbitraryParams};
use sdlc_core::protocol::LabelOracle;
use sdlc_core::RngStream;

fn family_strategy() -> impl Strategy<Value = ArbitraryFamily> {
    prop::sample::select(ArbitraryFamily::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn weak_contract(seed in any::<u64>(), d in 2usize..8, n in 50usize..600, family in family_strategy()) {
        let ds = gen_arbitrary(family, n, d, &ArbitraryParams::default(), &RngStream::new(seed, 0)).unwrap();
        let active: Vec<usize> = (0..n).collect();
        let mut oracle = LabelOracle::new(ds.labels());
        let res = weak_run(ds.points(), &active, &mut oracle, &RngStream::new(seed, 1), ds.ground_truth()).unwrap();
        let k = res.k as f64;
        prop_assert!(res.mistakes as f64 <= 5.0 * k * k.ln() + 1.0, "{} mistakes at k={}", res.mistakes, res.k);
        for &(i, y) in &res.labeled_set {
            prop_assert_eq!(y, ds.labels()[i]);
        }
        if res.terminated_by == Termination::Coverage {
            prop_assert!(res.last_sweep_size as f64 >= res.retained as f64 / (4.0 * k));
            prop_assert!(res.last_sweep_size as f64 >= n as f64 / (4.0 * d as f64) - 1e-9);
        }
        // A mistake below the soft margin only happens after the
        // large-margin points of that sweep were all labeled.
        let soft = 1.0 / (2.0 * k.sqrt());
        for u in &res.updates {
            if u.normalized_margin < soft {
                prop_assert!(u.position as f64 >= res.retained as f64 / (4.0 * k) - 1.0, "{u:?}");
            }
        }
    }

    #[test]
    fn strong_never_repeats(seed in any::<u64>(), d in 2usize..6, family in family_strategy()) {
        let ds = gen_arbitrary(family, 400, d, &ArbitraryParams::default(), &RngStream::new(seed, 0)).unwrap();
        let run = strong_run(&ds, 0.05, 0.1, &BoostParams::default(), &RngStream::new(seed, 1)).unwrap();
        let mut seen = vec![false; ds.len()];
        for r in &run.transcript.records {
            prop_assert!(!seen[r.index]);
            seen[r.index] = true;
            prop_assert_eq!(r.truth, ds.labels()[r.index]);
        }
        let budget = run.budget.as_ref().unwrap();
        prop_assert!(run.mistakes() <= budget.mistake_cap);
        prop_assert!(run.partial || run.coverage >= 0.95);
    }
}

#[test]
fn budget_arithmetic() {
    let b = compute_boost_budget(5, 0.01, 0.1, 0.3, 0.95).unwrap();
    let runs = ((1.0f64 / 0.01).ln() / (1.0f64 / 0.95).ln()).ceil() as usize;
    assert_eq!(b.runs_outer, runs);
    let retries = ((runs as f64 / 0.1).ln() / 0.3).ceil() as usize;
    assert_eq!(b.retries_per_round, retries);
    assert_eq!(b.mistake_cap, retries * runs * b.per_run_cap);
    assert!(compute_boost_budget(5, 0.0, 0.1, 0.3, 0.95).is_err());
}
