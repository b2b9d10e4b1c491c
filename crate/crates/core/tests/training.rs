use aeromon_core::autoencoder::{
    backward, default_topology, init_network, mean_reconstruction_mse, mse_loss, train_rows, Network, TrainConfig,
};
use aeromon_core::numerics::Rng;

/// Loss at `x` after nudging parameter `k` by `delta`.
fn loss_with_nudge(net: &Network, x: &[f64], k: usize, delta: f64) -> f64 {
    let mut probe = net.clone();
    *probe.params_mut().nth(k).unwrap() += delta;
    mse_loss(x, &probe.predict(x).unwrap()).unwrap()
}

#[test]
fn analytic_gradients_match_central_differences() {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for case in 0..25u64 {
        let net = init_network(&default_topology(), case).unwrap();
        let mut rng = Rng::derived(case, 99);
        let x: Vec<f64> = (0..7).map(|_| rng.uniform()).collect();
        let (_, cache) = net.forward(&x).unwrap();
        let analytic: Vec<f64> = backward(&net, &cache, &x).unwrap().iter().collect();
        assert_eq!(analytic.len(), net.param_count());
        for (k, &g) in analytic.iter().enumerate() {
            let fd = (loss_with_nudge(&net, &x, k, h) - loss_with_nudge(&net, &x, k, -h)) / (2.0 * h);
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-5);
            worst = worst.max(rel);
        }
    }
    assert!(worst < 1e-4, "max relative error {worst:e}");
}

fn toy_rows(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = Rng::new(seed);
    (0..n)
        .map(|_| {
            let (a, b) = (rng.uniform(), rng.uniform());
            vec![a, b, 0.5 * (a + b), a * b, 1.0 - a, 0.3 + 0.4 * b, 0.2 * a + 0.01 * rng.normal()]
        })
        .collect()
}

#[test]
fn training_loss_mostly_decreases_and_best_is_restored() {
    let rows = toy_rows(600, 1);
    let (train, val) = rows.split_at(500);
    let cfg = TrainConfig {
        max_epochs: 120,
        batch_size: 64,
        learning_rate: 1e-3,
        seed: 4,
        ..TrainConfig::default()
    };
    let net = init_network(&default_topology(), 2).unwrap();
    let (best, report) = train_rows(net, train, val, &cfg).unwrap();

    let h = &report.loss_history;
    let non_increasing = h.windows(2).filter(|w| w[1].train_mse <= w[0].train_mse).count();
    assert!(
        non_increasing as f64 >= 0.95 * (h.len() - 1) as f64,
        "{non_increasing} of {} transitions",
        h.len() - 1
    );

    let min_val = h.iter().map(|r| r.val_mse).fold(f64::INFINITY, f64::min);
    assert_eq!(report.best_val_loss, min_val);
    let restored = mean_reconstruction_mse(&best, val).unwrap();
    assert!((restored - report.best_val_loss).abs() <= 1e-12);
    assert_eq!(h[report.best_epoch - 1].val_mse, report.best_val_loss);
}

#[test]
fn learning_rate_schedule_respects_factor_and_floor() {
    // no drop can beat min_delta, so every epoch after the first plateaus
    let rows = toy_rows(200, 3);
    let (train, val) = rows.split_at(150);
    let cfg = TrainConfig {
        max_epochs: 30,
        batch_size: 50,
        learning_rate: 1e-3,
        min_delta: 10.0,
        early_stop_patience: 1000,
        plateau_patience: 3,
        plateau_factor: 0.2,
        min_lr: 1e-6,
        seed: 1,
        ..TrainConfig::default()
    };
    let net = init_network(&default_topology(), 5).unwrap();
    let (_, report) = train_rows(net, train, val, &cfg).unwrap();
    let lrs: Vec<f64> = report.loss_history.iter().map(|r| r.lr).collect();
    let mut reductions = 0;
    for w in lrs.windows(2) {
        assert!(w[1] >= cfg.min_lr);
        if w[1] != w[0] {
            reductions += 1;
            let expected = (w[0] * cfg.plateau_factor).max(cfg.min_lr);
            assert_eq!(w[1], expected);
            if expected > cfg.min_lr {
                assert_eq!(w[1], w[0] * cfg.plateau_factor);
            }
        }
    }
    assert!(reductions >= 2, "schedule never reduced: {lrs:?}");
    assert_eq!(*lrs.last().unwrap(), cfg.min_lr);
}

#[test]
fn early_stopping_triggers_on_a_flat_problem() {
    let rows = vec![vec![0.5; 7]; 64];
    let cfg = TrainConfig {
        batch_size: 64,
        learning_rate: 1e-2,
        early_stop_patience: 5,
        plateau_patience: 3,
        seed: 2,
        ..TrainConfig::default()
    };
    let net = init_network(&default_topology(), 1).unwrap();
    let (_, report) = train_rows(net, &rows, &rows, &cfg).unwrap();
    assert!(report.stopped_early);
    assert!(report.epochs_run < cfg.max_epochs);
}

#[test]
fn training_is_bit_reproducible() {
    let rows = toy_rows(300, 9);
    let (train, val) = rows.split_at(250);
    let cfg = TrainConfig {
        max_epochs: 15,
        batch_size: 32,
        seed: 11,
        ..TrainConfig::default()
    };
    let run = || train_rows(init_network(&default_topology(), 3).unwrap(), train, val, &cfg).unwrap();
    let (net_a, rep_a) = run();
    let (net_b, rep_b) = run();
    assert_eq!(rep_a, rep_b);
    let bits = |n: &Network| n.params().map(f64::to_bits).collect::<Vec<_>>();
    assert_eq!(bits(&net_a), bits(&net_b));
}
