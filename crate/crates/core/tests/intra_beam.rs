use hts_rrm::intra_beam::{
    required_fractions, schedule_carriers, schedule_in_order, CarrierSchedule,
};
use hts_rrm::link_budget::shannon_rate;
use hts_rrm::oracles::{best_carrier_assignment, packing_targets};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WC: f64 = 62.5;

fn check_schedule(s: &CarrierSchedule, targets: &[f64], snr: &[f64]) {
    let mut seen = vec![0usize; targets.len()];
    for slots in &s.carriers {
        let used: f64 = slots.iter().map(|x| x.share).sum();
        assert!(used <= 1.0 + 1e-12, "carrier time {used}");
        for x in slots {
            assert!((0.0..=1.0).contains(&x.share));
            seen[x.user] += 1;
        }
    }
    assert!(seen.iter().all(|&c| c <= 1), "a user spans two carriers");
    for (i, &r) in s.offered.iter().enumerate() {
        assert!(r <= targets[i] * (1.0 + 1e-12) + 1e-12);
        let share: f64 = s
            .carriers
            .iter()
            .flatten()
            .filter(|x| x.user == i)
            .map(|x| x.share)
            .sum();
        assert!((r - share * shannon_rate(WC, snr[i])).abs() <= 1e-9 * r.max(1.0));
    }
}

#[test]
fn six_users_on_two_carriers_beat_random_order_and_stay_below_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut greedy, mut random) = (0.0, 0.0);
    for _ in 0..200 {
        let snr: Vec<f64> = (0..6).map(|_| rng.random_range(1.0..25.0)).collect();
        let targets = packing_targets(&mut rng, &snr, 2);
        let a = schedule_carriers(&targets, &snr, 2, WC);
        let mut order: Vec<usize> = (0..6).collect();
        for i in (1..6).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let b = schedule_in_order(&targets, &snr, 2, WC, &order);
        let best = best_carrier_assignment(&targets, &snr, 2, WC);
        check_schedule(&a, &targets, &snr);
        check_schedule(&b, &targets, &snr);
        assert!(a.total_offered() <= best * (1.0 + 1e-12) + 1e-9);
        assert!(b.total_offered() <= best * (1.0 + 1e-12) + 1e-9);
        greedy += a.total_offered();
        random += b.total_offered();
    }
    assert!(greedy >= random, "greedy {greedy} < random-order {random}");
}

#[test]
fn no_carriers_offer_nothing() {
    let s = schedule_carriers(&[10.0, 20.0], &[3.0, 3.0], 0, WC);
    assert_eq!(s.total_offered(), 0.0);
    assert!(s.carriers.is_empty());
}

#[test]
fn fractions_are_capped_at_one() {
    let f = required_fractions(&[125.0, 500.0, 0.0], &[3.0, 3.0, 3.0], WC);
    assert_eq!(f, vec![1.0, 1.0, 0.0]);
}

proptest! {
    #[test]
    fn schedules_respect_carrier_time_and_single_carrier_terminals(
        seed in any::<u64>(),
        n in 0usize..40,
        carriers in 0usize..9,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let snr: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..40.0)).collect();
        let targets: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..200.0)).collect();
        let s = schedule_carriers(&targets, &snr, carriers, WC);
        prop_assert_eq!(s.carriers.len(), carriers);
        prop_assert_eq!(s.offered.len(), n);
        check_schedule(&s, &targets, &snr);
    }
}
