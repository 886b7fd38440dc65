//! Directional checks of edge selection on block-model graphs, where a pair
//! is plausible exactly when both endpoints share a block.

use ltlp_core::dataset::synthetic::{generate_sbm, SbmConfig};
use ltlp_core::dataset::SplitConfig;
use ltlp_core::encoder::EncoderConfig;
use ltlp_core::sem::{
    filter, generate_candidates, score_candidates, select_tau, DiscardDirection, FilterConfig,
    HardNegativeConfig, HardNegativeExperiment, HardNegativeRow,
};
use ltlp_core::trainer::{pretrain, pretrain_with, TrainConfig};
use ltlp_core::encoder::score_pairs;
use ltlp_core::encoder::NormalizedAdjacency;

fn configs(seed: u64) -> (SbmConfig, SplitConfig, EncoderConfig, TrainConfig) {
    (
        SbmConfig { seed, ..SbmConfig::default() },
        SplitConfig { seed, ..SplitConfig::default() },
        EncoderConfig { layers: 2, hidden: 32, init_seed: seed, ..EncoderConfig::default() },
        TrainConfig { epochs_pretrain: 40, lr: 0.01, batch_size: 256, seed, ..TrainConfig::default() },
    )
}

fn purity<'a>(pairs: impl Iterator<Item = &'a ltlp_core::NodePair>, plausible: impl Fn(&ltlp_core::NodePair) -> bool) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for p in pairs {
        total += 1;
        hit += plausible(p) as usize;
    }
    hit as f64 / total.max(1) as f64
}

#[test]
fn variance_filter_keeps_purer_edges_than_score_filter() {
    let mut wins = 0;
    for seed in 0..5 {
        let (sbm, split, enc, train) = configs(seed);
        let data = generate_sbm(&sbm, &split).unwrap();
        let d = &data.dataset;
        let out = pretrain(d, &enc, &train).unwrap();
        let val_scores =
            score_pairs(out.snapshots.last(), &d.features, &NormalizedAdjacency::new(&d.graph), &d.val.iter().map(|p| p.pair).collect::<Vec<_>>())
                .unwrap();
        let labels: Vec<bool> = d.val.iter().map(|p| p.label).collect();
        let tau = select_tau(&val_scores, &labels).unwrap().tau;
        let candidates = generate_candidates(&d.graph, &d.train, false).unwrap();
        let scored = score_candidates(&out.snapshots, d, &candidates).unwrap();
        let outcome = filter(&scored, &FilterConfig { tau, k_percent: 0.3, tail_only: false }).unwrap();
        let score_only: Vec<_> = scored.iter().filter(|c| c.final_score() >= tau).map(|c| c.pair).collect();
        let kept = outcome.pairs();
        assert!(kept.len() <= score_only.len() && score_only.len() <= candidates.len());
        let p_s = purity(score_only.iter(), |p| data.is_plausible(p));
        let p_f = purity(kept.iter(), |p| data.is_plausible(p));
        eprintln!("seed {seed}: score-only purity {p_s:.3} ({}), variance-filtered {p_f:.3} ({})", score_only.len(), kept.len());
        if p_f >= p_s {
            wins += 1;
        }
    }
    assert!(wins >= 4, "variance filter was at least as pure in only {wins}/5 seeds");
}

fn final_rows(seed: u64, direction: DiscardDirection) -> Vec<HardNegativeRow> {
    let (sbm, split, enc, train) = configs(seed);
    let data = generate_sbm(&sbm, &split).unwrap();
    let cfg = HardNegativeConfig { direction, seed, ..HardNegativeConfig::default() };
    let mut exp = HardNegativeExperiment::new(&data.dataset, cfg).unwrap();
    let mut rows = Vec::new();
    pretrain_with(&data.dataset, &enc, &train, |epoch, p| {
        rows.extend(exp.observe(epoch, p)?);
        Ok(())
    })
    .unwrap();
    let last = rows.iter().map(|r| r.epoch).max().unwrap();
    rows.retain(|r| r.epoch == last);
    rows.sort_by_key(|r| r.difficulty);
    rows
}

#[test]
fn harder_negatives_leak_more_and_variance_discard_reduces_leakage() {
    let (mut rising, mut reduced) = (0, 0);
    for seed in 0..5 {
        let rows = final_rows(seed, DiscardDirection::Lowest);
        assert_eq!(rows.iter().map(|r| r.difficulty).collect::<Vec<_>>(), vec![1, 2, 4, 8]);
        if rows.windows(2).all(|w| w[1].r_ler_raw >= w[0].r_ler_raw) && rows[3].r_ler_raw > rows[0].r_ler_raw {
            rising += 1;
        }
        let hardest = rows.last().unwrap();
        if hardest.r_ler_after_variance_filter <= hardest.r_ler_raw {
            reduced += 1;
        }
    }
    assert!(rising >= 4, "R_ler rose with difficulty in {rising}/5 seeds");
    assert!(reduced >= 4, "variance discard reduced R_ler in {reduced}/5 seeds");
}
