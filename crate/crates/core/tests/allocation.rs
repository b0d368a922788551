use hts_rrm::allocation::{
    discretize_carriers, pair_carriers, solve_instance, solve_single_beam, CarrierPlan, QpInstance,
    QpSettings, TwtaPairing,
};
use hts_rrm::oracles::{qp_first_order, random_qp_instance, relative_gap};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64) -> QpInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_qp_instance(&mut rng, 4, 12)
}

// Equal split of every group's cap over its users, capped per user.
fn uniform_objective(inst: &QpInstance) -> f64 {
    let mut members = vec![0usize; inst.group_caps.len()];
    for cands in &inst.candidates {
        for c in cands {
            members[inst.beam_group[c.beam]] += 1;
        }
    }
    let bw: Vec<Vec<f64>> = inst
        .candidates
        .iter()
        .map(|cands| {
            cands
                .iter()
                .map(|c| {
                    let g = inst.beam_group[c.beam];
                    (inst.group_caps[g] / members[g] as f64).min(inst.user_cap / cands.len() as f64)
                })
                .collect()
        })
        .collect();
    inst.objective(&bw)
}

#[test]
fn matches_first_order_oracle() {
    for seed in 0..60 {
        let inst = instance(seed);
        let sol = solve_instance(&inst, &QpSettings::default()).unwrap();
        let (_, oracle) = qp_first_order(&inst, 20_000);
        assert!(
            relative_gap(sol.objective, oracle) <= 1e-4,
            "seed {seed}: {} vs {oracle}",
            sol.objective
        );
    }
}

#[test]
fn single_beam_closed_form_agrees_with_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..40 {
        let mut inst = random_qp_instance(&mut rng, 1, 12);
        inst.beam_group = vec![0];
        let demands = inst.demands.clone();
        let effs: Vec<f64> = inst.candidates.iter().map(|c| c[0].efficiency).collect();
        let closed = solve_single_beam(&demands, &effs, inst.group_caps[0], inst.user_cap);
        let sol = solve_instance(&inst, &QpSettings::default()).unwrap();
        let bw: Vec<Vec<f64>> = closed.iter().map(|&b| vec![b]).collect();
        assert!(relative_gap(inst.objective(&bw), sol.objective) <= 1e-9);
    }
}

#[test]
fn carrier_counts_round_down() {
    assert_eq!(
        discretize_carriers(&[130.0, 10.0, 500.0], 62.5),
        vec![2, 0, 8]
    );
    assert_eq!(discretize_carriers(&[187.5], 62.5), vec![3]);
}

#[test]
fn pair_reconciliation_keeps_the_full_band() {
    let plan = CarrierPlan::default();
    let pairing = TwtaPairing::consecutive(4);
    let counts = pair_carriers(&[130.0, 370.0, 249.0, 251.0], &pairing, &plan);
    assert_eq!(counts, vec![2, 6, 4, 4]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn solutions_are_feasible_and_stationary(seed in any::<u64>()) {
        let inst = instance(seed);
        let sol = solve_instance(&inst, &QpSettings::default()).unwrap();
        prop_assert!(sol.max_violation(&inst) <= 1e-9);
        prop_assert!(sol.kkt.max() <= 1e-6);
        for shares in &sol.user_shares {
            for s in shares {
                prop_assert!(s.bandwidth >= 0.0);
            }
        }
    }

    #[test]
    fn never_worse_than_uniform_split(seed in any::<u64>()) {
        let inst = instance(seed);
        let sol = solve_instance(&inst, &QpSettings::default()).unwrap();
        let uniform = uniform_objective(&inst);
        prop_assert!(sol.objective <= uniform * (1.0 + 1e-9) + 1e-9);
    }

    #[test]
    fn rates_never_exceed_demand(seed in any::<u64>()) {
        let inst = instance(seed);
        let sol = solve_instance(&inst, &QpSettings::default()).unwrap();
        for (r, d) in sol.user_rate.iter().zip(&inst.demands) {
            prop_assert!(*r <= d * (1.0 + 1e-6) + 1e-9);
        }
    }
}
