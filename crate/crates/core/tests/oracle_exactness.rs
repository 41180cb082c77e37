use std::sync::Arc;

use jssp_core::agent::{run_agent, DecodeMode, ModelConfig, ParameterSet};
use jssp_core::instance::{generate_uniform_benchmark, Interval};
use jssp_core::oracle::{optimal_makespan, solve, OracleResult, DEFAULT_NODE_BUDGET};
use jssp_core::pdr::{run_pdr, Rule};
use jssp_core::simulator::verify_schedule;
use jssp_testkit::{brute_force_makespan, run_random};
use proptest::prelude::*;

#[test]
fn matches_brute_force_on_two_and_three_square() {
    for (size, count) in [(2usize, 100u64), (3, 100)] {
        for seed in 0..count {
            let inst = generate_uniform_benchmark(seed, size, size, Interval::new(1, 99)).unwrap();
            let rep = solve(&inst, DEFAULT_NODE_BUDGET);
            let expected = brute_force_makespan(&inst);
            assert_eq!(rep.result, OracleResult::Exact { value: expected }, "{size}x{size} seed {seed}");
            verify_schedule(&inst, &rep.schedule).unwrap();
            assert_eq!(rep.schedule.makespan(), expected);
        }
    }
}

#[test]
fn rectangular_shapes_match_brute_force() {
    for (m, n) in [(2, 3), (3, 2), (1, 4), (4, 1), (2, 4)] {
        for seed in 0..10 {
            let inst = generate_uniform_benchmark(seed, m, n, Interval::new(1, 20)).unwrap();
            assert_eq!(optimal_makespan(&inst, DEFAULT_NODE_BUDGET).exact(), Some(brute_force_makespan(&inst)));
        }
    }
}

#[test]
fn never_beaten_by_a_policy() {
    let params = ParameterSet::new(ModelConfig::default(), 1);
    for seed in 0..100u64 {
        let inst = Arc::new(generate_uniform_benchmark(1000 + seed, 3, 3, Interval::new(1, 99)).unwrap());
        let opt = optimal_makespan(&inst, DEFAULT_NODE_BUDGET).exact().unwrap();
        for rule in Rule::ALL {
            assert!(opt <= run_pdr(inst.clone(), rule, seed).unwrap().makespan, "{rule} seed {seed}");
        }
        assert!(opt <= run_random(inst.clone(), seed).makespan());
        for mode in [DecodeMode::Sample, DecodeMode::Greedy] {
            assert!(opt <= run_agent(&params, inst.clone(), seed, mode).unwrap().makespan());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// Larger budgets never lower the bound or lose exactness.
    #[test]
    fn bounds_bracket_the_optimum(seed in any::<u64>(), m in 2usize..=4, n in 2usize..=5) {
        let inst = generate_uniform_benchmark(seed, m, n, Interval::new(1, 99)).unwrap();
        let exact = optimal_makespan(&inst, DEFAULT_NODE_BUDGET).exact().unwrap();
        let mut prev: Option<OracleResult> = None;
        for budget in [1u64, 3, 10, 100, 1000] {
            let rep = solve(&inst, budget);
            let r = rep.result;
            prop_assert!(r.lower() <= exact && exact <= r.upper(), "{:?}", r);
            prop_assert!(rep.nodes <= budget);
            verify_schedule(&inst, &rep.schedule).unwrap();
            prop_assert_eq!(rep.schedule.makespan(), r.upper());
            if let Some(p) = prev {
                prop_assert!(r.lower() >= p.lower());
                if let OracleResult::Exact { value } = p {
                    prop_assert_eq!(r, OracleResult::Exact { value });
                }
            }
            prev = Some(r);
        }
    }
}
