use fedbandit::env::{
    best_arm_in_hindsight, make_activated_bernoulli, make_constant, mean_loss,
    ActivatedBernoulliSpec, DenseLosses, LossTensor,
};
use fedbandit::Error;
use proptest::prelude::*;

fn bernoulli(horizon: usize, n: usize, k: usize, seed: u64) -> fedbandit::env::ActivatedBernoulli {
    make_activated_bernoulli(ActivatedBernoulliSpec {
        horizon,
        agent_count: n,
        arm_count: k,
        seed,
    })
    .unwrap()
}

fn round(tensor: &dyn LossTensor, t: usize) -> Vec<f64> {
    let mut buf = vec![0.0; tensor.agent_count() * tensor.arm_count()];
    tensor.fill_round(t, &mut buf);
    buf
}

#[test]
fn network_mean_matches_half_the_arm_mean() {
    let (horizon, n, k) = (4000, 36, 5);
    let env = bernoulli(horizon, n, k, 11);
    let mut totals = vec![0.0; k];
    for t in 0..horizon {
        for (tot, m) in totals.iter_mut().zip(mean_loss(&env, t).unwrap()) {
            *tot += m;
        }
    }
    for (i, tot) in totals.iter().enumerate() {
        let mu = i as f64 / (k - 1) as f64;
        let est = tot / horizon as f64;
        // exactly n/2 Bernoulli(mu) draws averaged over n agents per round
        let se = (mu * (1.0 - mu) / (2.0 * n as f64 * horizon as f64)).sqrt();
        assert!(
            (est - mu / 2.0).abs() <= 5.0 * se + 1e-12,
            "arm {i}: {est} vs {}",
            mu / 2.0
        );
    }
}

#[test]
fn activation_is_a_uniform_half() {
    let (horizon, n) = (20_000, 8);
    let env = bernoulli(horizon, n, 2, 5);
    let mut single = vec![0usize; n];
    let mut pair = vec![vec![0usize; n]; n];
    for t in 0..horizon {
        let act = env.activated(t);
        assert_eq!(act.len(), n / 2);
        assert!(act.windows(2).all(|w| w[0] < w[1]));
        for &u in &act {
            single[u] += 1;
            for &v in &act {
                pair[u][v] += 1;
            }
        }
    }
    let h = horizon as f64;
    let p1 = 0.5;
    let p2 = (n / 2) as f64 * (n / 2 - 1) as f64 / (n * (n - 1)) as f64;
    for u in 0..n {
        let f = single[u] as f64 / h;
        assert!((f - p1).abs() <= 5.0 * (p1 * (1.0 - p1) / h).sqrt());
        for v in 0..n {
            if u != v {
                let f = pair[u][v] as f64 / h;
                assert!(
                    (f - p2).abs() <= 5.0 * (p2 * (1.0 - p2) / h).sqrt(),
                    "pair {u},{v}: {f} vs {p2}"
                );
            }
        }
    }
}

#[test]
fn inactive_agents_see_zero_loss() {
    let env = bernoulli(200, 10, 6, 1);
    for t in 0..200 {
        let act = env.activated(t);
        let buf = round(&env, t);
        for v in 0..10 {
            let row = &buf[v * 6..(v + 1) * 6];
            assert!(row.iter().all(|&x| x == 0.0 || x == 1.0));
            assert_eq!(row[0], 0.0);
            if !act.contains(&v) {
                assert!(row.iter().all(|&x| x == 0.0));
            } else {
                assert_eq!(row[5], 1.0);
            }
        }
    }
    assert_eq!(best_arm_in_hindsight(&env), (0, 0.0));
}

#[test]
fn rounds_are_random_access() {
    // the tensor must not depend on the order in which rounds are requested
    let env = bernoulli(300, 12, 4, 99);
    let forward: Vec<Vec<f64>> = (0..300).map(|t| round(&env, t)).collect();
    for t in (0..300).rev() {
        assert_eq!(round(&env, t), forward[t]);
    }
    let stored = DenseLosses::materialize(&env);
    for t in [0, 17, 299] {
        for v in 0..12 {
            for i in 0..4 {
                assert_eq!(stored.loss(t, v, i), env.loss(t, v, i));
            }
        }
    }
    assert_ne!(round(&bernoulli(300, 12, 4, 100), 0), forward[0]);
}

#[test]
fn mean_loss_rejects_out_of_range_rounds() {
    let env = make_constant(5, 2, 3, 0.25).unwrap();
    assert!(matches!(
        mean_loss(&env, 5),
        Err(Error::RoundOutOfRange { t: 5, horizon: 5 })
    ));
    assert_eq!(mean_loss(&env, 4).unwrap(), vec![0.25; 3]);
}

proptest! {
    #[test]
    fn dense_mean_and_best_arm_match_direct_sums(
        horizon in 1usize..8,
        n in 1usize..5,
        k in 1usize..5,
        data in proptest::collection::vec(0.0f64..=1.0, 160),
    ) {
        let f = |t: usize, v: usize, i: usize| data[(t * n + v) * k + i];
        let env = DenseLosses::from_fn(horizon, n, k, f).unwrap();
        let mut totals = vec![0.0; k];
        for t in 0..horizon {
            let m = mean_loss(&env, t).unwrap();
            for i in 0..k {
                let direct: f64 = (0..n).map(|v| f(t, v, i)).sum::<f64>() / n as f64;
                prop_assert!((m[i] - direct).abs() < 1e-12);
                totals[i] += direct;
            }
        }
        let (best, total) = best_arm_in_hindsight(&env);
        let lowest = totals.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!((total - lowest).abs() < 1e-9);
        prop_assert!(totals[..best].iter().all(|&x| x > totals[best]));
        prop_assert_eq!(DenseLosses::materialize(&env), env);
    }

    #[test]
    fn dense_rejects_out_of_range_losses(bad in prop_oneof![-10.0f64..-1e-9, 1.0000001f64..10.0]) {
        prop_assert!(DenseLosses::new(1, 1, 2, vec![0.5, bad]).is_err());
    }
}
