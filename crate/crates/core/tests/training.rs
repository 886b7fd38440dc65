use ltlp_core::dataset::synthetic::{generate_sbm, SbmConfig};
use ltlp_core::dataset::{split_dataset, SplitConfig};
use ltlp_core::encoder::{EncoderConfig, Features};
use ltlp_core::trainer::{continue_train, pretrain, resume_train, TrainConfig};
use ltlp_core::NodePair;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_encoder(seed: u64) -> EncoderConfig {
    EncoderConfig { layers: 2, hidden: 16, init_seed: seed, ..EncoderConfig::default() }
}

#[test]
fn pretraining_lowers_the_loss_on_small_graphs() {
    let mut improved = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 20;
        let mut edges = Vec::new();
        // two dense communities with a bridge
        for a in 0..n {
            for b in a + 1..n {
                let same = (a < n / 2) == (b < n / 2);
                if rng.random::<f64>() < if same { 0.5 } else { 0.03 } {
                    edges.push(NodePair::new(a, b).unwrap());
                }
            }
        }
        let x = Array2::from_shape_fn((n, 4), |(v, k)| if k == (v < n / 2) as usize { 1.0 } else { rng.random::<f64>() * 0.1 });
        let split = SplitConfig { seed, ..SplitConfig::default() };
        let data = split_dataset(n, &edges, Features::new(x), &split).unwrap();
        let cfg = TrainConfig { epochs_pretrain: 60, lr: 0.01, seed, ..TrainConfig::default() };
        let out = pretrain(&data, &small_encoder(seed), &cfg).unwrap();
        let first = out.logs.first().unwrap().loss;
        let last = out.logs.last().unwrap().loss;
        if last < first {
            improved += 1;
        }
    }
    assert!(improved >= 9, "loss decreased in only {improved}/10 seeds");
}

#[test]
fn continued_training_with_pure_cross_entropy_is_plain_resumption() {
    let data = generate_sbm(&SbmConfig::default(), &SplitConfig::default()).unwrap().dataset;
    let cfg = TrainConfig { epochs_pretrain: 8, epochs_continue: 6, varphi: 1.0, lr: 0.01, batch_size: 128, ..TrainConfig::default() };
    let pre = pretrain(&data, &small_encoder(0), &cfg).unwrap();
    let (a, la) = continue_train(&data, &pre.params, &cfg).unwrap();
    let (b, lb) = resume_train(&data, &pre.params, &cfg).unwrap();
    assert_eq!(la.len(), 6);
    for (x, y) in la.iter().zip(&lb) {
        assert!((x.loss - y.loss).abs() <= 1e-12);
    }
    assert_eq!(a.layers, b.layers);
}

#[test]
fn pretraining_is_reproducible() {
    let data = generate_sbm(&SbmConfig::default(), &SplitConfig::default()).unwrap().dataset;
    let cfg = TrainConfig { epochs_pretrain: 6, lr: 0.01, batch_size: 100, ..TrainConfig::default() };
    let a = pretrain(&data, &small_encoder(3), &cfg).unwrap();
    let b = pretrain(&data, &small_encoder(3), &cfg).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.logs, b.logs);
    assert_eq!(a.snapshots.epochs(), &[2, 3, 4, 5, 6]);
}
