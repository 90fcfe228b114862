use cgmatch::analysis::{
    expectation_bipartite, expectation_cgsm, flops_estimate, halving_schedule, layered_reduction_run,
    simulate_optimal_match_rate, LayeredRunConfig, ModelConfig, ScheduleConfig, SimMethod, TokenSource,
};
use cgmatch::Method;
use proptest::prelude::*;

fn vision_schedule(r: Vec<usize>) -> Vec<Option<ScheduleConfig>> {
    vec![Some(ScheduleConfig::new(197, r).unwrap()), None]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn flops_never_increase_with_r(
        base in prop::collection::vec(0usize..=16, 12),
        layer in 0usize..12,
        bump in 1usize..=8,
    ) {
        let model = ModelConfig::clip_like();
        let before = flops_estimate(&model, &vision_schedule(base.clone())).unwrap();
        let mut more = base.clone();
        more[layer] += bump;
        prop_assume!(more.iter().sum::<usize>() < 197);
        let after = flops_estimate(&model, &vision_schedule(more)).unwrap();
        prop_assert!(after.total <= before.total);
    }

    #[test]
    fn complete_graph_expectation_dominates(n in 10usize..=400, layers in 1usize..=24, frac in 0.0f64..=1.0) {
        // strict schedule feasibility: every layer can remove r
        let r_max = n / (layers + 1);
        prop_assume!(r_max >= 1);
        let r = 1 + ((r_max - 1) as f64 * frac) as usize;
        let ec = expectation_cgsm(n, layers, r).unwrap();
        let eb = expectation_bipartite(n, layers, r).unwrap();
        prop_assert!(ec >= eb);
        prop_assert!((0.0..=1.0).contains(&ec) && (0.0..=1.0).contains(&eb));
    }
}

#[test]
fn simulation_within_three_sigma() {
    for (n, l, r) in [(50, 4, 6), (197, 12, 16)] {
        let trials = 50_000u64;
        for (method, exact) in [
            (SimMethod::CompleteGraph, expectation_cgsm(n, l, r).unwrap()),
            (SimMethod::Bipartite, expectation_bipartite(n, l, r).unwrap()),
        ] {
            let est = simulate_optimal_match_rate(n, l, r, trials, 11, method).unwrap();
            // conservative: layer means of at least `trials` Bernoulli draws
            let sigma = (exact * (1.0 - exact) / trials as f64).sqrt();
            assert!(
                (est - exact).abs() < 3.0 * sigma + 1e-12,
                "{method:?} {est} vs {exact}"
            );
        }
    }
}

#[test]
fn layered_run_on_provided_tokens() {
    let tokens = TokenSource::Synthetic {
        n_tokens: 197,
        dim: 32,
        seed: 3,
    }
    .materialize()
    .unwrap();
    let schedule = halving_schedule(197, 12).unwrap();
    let mut cfg = LayeredRunConfig::new(Method::CompleteGraph, schedule.clone());
    cfg.protect_prefix = 1;
    let run = layered_reduction_run(&TokenSource::Provided(tokens.clone()), &cfg).unwrap();
    assert_eq!(run.tokens.row(0), tokens.row(0));
    assert_eq!(run.report.final_tokens, 11);
    let rs: Vec<usize> = run.report.layers.iter().map(|l| l.r).collect();
    assert_eq!(rs.iter().sum::<usize>(), 186);
    assert!(run.report.layers.iter().all(|l| l.elapsed_us.is_none()));
}
