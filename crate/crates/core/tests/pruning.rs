mod common;

use chanprune::data::{stratified_split, synth_generate, SplitRatios, SynthConfig};
use chanprune::nn::{Conv1d, Network};
use chanprune::prune::*;
use chanprune::train::TrainConfig;
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::Rng;

fn brute_scores(c: &Conv1d) -> Vec<f64> {
    let mut out = Vec::new();
    for j in 0..c.c_out {
        let mut s = 0.0;
        for i in 0..c.c_in {
            for t in 0..c.k {
                s += c.weight[j * c.c_in * c.k + i * c.k + t].abs();
            }
        }
        out.push(s);
    }
    out
}

/// Stable descending sort keeps the lower index first among equal scores.
fn sort_oracle(scores: &[f64], ratio: f64) -> Vec<usize> {
    let n = scores.len();
    let mut want = (ratio * n as f64).ceil() as usize;
    if want < 1 {
        want = 1;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let mut keep = idx[..want.min(n)].to_vec();
    keep.sort();
    keep
}

#[test]
fn scores_match_brute_force() {
    let mut r = common::rng(1);
    for _ in 0..50 {
        let (ci, co, k) = (
            r.random_range(1..6),
            r.random_range(1..9),
            [1, 3, 5][r.random_range(0..3)],
        );
        let c = Conv1d::new(
            ci,
            co,
            k,
            common::random_vec(&mut r, ci * co * k, 2.0),
            vec![0.0; co],
        )
        .unwrap();
        for (a, b) in kernel_scores(&c).iter().zip(brute_scores(&c)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn scores_ignore_input_channel_order() {
    let mut r = common::rng(2);
    let (ci, co, k) = (5, 4, 3);
    let c = Conv1d::new(
        ci,
        co,
        k,
        common::random_vec(&mut r, ci * co * k, 1.0),
        vec![0.0; co],
    )
    .unwrap();
    let perm = [3, 0, 4, 1, 2];
    let mut w = Vec::new();
    for o in 0..co {
        for &i in &perm {
            w.extend_from_slice(&c.kernel(o)[i * k..(i + 1) * k]);
        }
    }
    let p = Conv1d::new(ci, co, k, w, vec![0.0; co]).unwrap();
    for (a, b) in kernel_scores(&c).iter().zip(kernel_scores(&p)) {
        assert!((a - b).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn selection_matches_sort_oracle(
        scores in prop::collection::vec(0u8..6, 1..40),
        ratio in 0.01f64..=1.0,
    ) {
        // small integer range forces plenty of ties
        let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
        let keep = select_keep(&scores, ratio).unwrap();
        prop_assert_eq!(&keep, &sort_oracle(&scores, ratio));
        prop_assert_eq!(keep.len(), 1usize.max((ratio * scores.len() as f64).ceil() as usize));
    }
}

#[test]
fn invalid_ratios_are_rejected() {
    for r in [0.0, -0.5, 1.5, f64::NAN] {
        assert!(select_keep(&[1.0, 2.0], r).is_err());
    }
}

/// Zero every weight that reads a dropped channel, written from scratch.
fn mask_oracle(net: &Network, keeps: &[Vec<usize>]) -> Network {
    let mut m = net.clone();
    for l in 0..3 {
        let width = net.blocks[l].conv.c_out;
        for j in (0..width).filter(|j| !keeps[l].contains(j)) {
            if l < 2 {
                let c = &mut m.blocks[l + 1].conv;
                for o in 0..c.c_out {
                    for t in 0..c.k {
                        c.weight[o * c.c_in * c.k + j * c.k + t] = 0.0;
                    }
                }
            } else {
                for o in 0..m.dense.k {
                    m.dense.weight[o * m.dense.c_in + j] = 0.0;
                }
            }
        }
    }
    m
}

#[test]
fn rebuilt_network_equals_masked_original() {
    let mut r = common::rng(3);
    let mut worst = 0.0f64;
    for trial in 0..50u64 {
        let c1 = r.random_range(2..=4);
        let widths = [c1, c1 + r.random_range(1..=3), c1 + r.random_range(4..=6)];
        let len = [16, 20, 32][trial as usize % 3];
        let net = common::random_small_network(trial, widths, len, 3, 0.3);
        let decision = if trial % 2 == 0 {
            decide(&net, [0.25, 0.5, 0.75][trial as usize % 3]).unwrap()
        } else {
            // arbitrary keep sets, not necessarily the top-scoring ones
            PruneDecision {
                ratio: 0.5,
                layers: net
                    .blocks
                    .iter()
                    .map(|b| {
                        let n = b.conv.c_out;
                        let size = r.random_range(1..=n);
                        let mut keep = sample(&mut r, n, size).into_vec();
                        keep.sort();
                        LayerDecision {
                            scores: kernel_scores(&b.conv),
                            keep,
                        }
                    })
                    .collect(),
            }
        };
        let keeps: Vec<Vec<usize>> = decision.layers.iter().map(|l| l.keep.clone()).collect();
        let pruned = rebuild_pruned(&net, &decision).unwrap();
        assert_eq!(pruned.architecture().widths.to_vec(), decision.pruned_widths());

        let x = common::random_tensor(&mut r, 4, 1, len);
        let a = mask_oracle(&net, &keeps).logits(&x).unwrap();
        let b = pruned.logits(&x).unwrap();
        let gap = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        worst = worst.max(gap);
        assert!(gap <= 1e-10, "trial {trial}: gap {gap}");
        assert!(masked_equivalence_gap(&net, &pruned, &decision, &x).unwrap() <= 1e-10);
    }
    eprintln!("masked equivalence: worst gap {worst:.3e}");
}

#[test]
fn pruning_shrinks_parameters() {
    let net = common::random_small_network(4, [4, 6, 8], 16, 3, 0.0);
    for ratio in [0.25, 0.5, 0.75] {
        let p = rebuild_pruned(&net, &decide(&net, ratio).unwrap()).unwrap();
        assert!(p.parameter_count() < net.parameter_count());
    }
    let full = rebuild_pruned(&net, &decide(&net, 1.0).unwrap()).unwrap();
    assert_eq!(full, net);
}

#[test]
fn full_ratio_retraining_starts_from_baseline() {
    let ds = synth_generate(&SynthConfig {
        n_per_class: 20,
        len: 16,
        classes: 3,
        noise_sigma: 0.5,
        seed: 1,
    })
    .unwrap();
    let (tr, va, _) = stratified_split(&ds, &SplitRatios::default(), 1).unwrap();
    let net = common::random_small_network(5, [4, 6, 8], 16, 3, 0.1);
    let cfg = TrainConfig {
        max_epochs: 2,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let out = prune_and_retrain(&net, &tr, &va, &cfg, 1.0, false).unwrap();
    assert_eq!(out.rebuilt, net);
    let (direct, h) = chanprune::train::train(net.clone(), &tr, &va, &cfg).unwrap();
    assert_eq!(out.retrained, direct);
    assert_eq!(out.history, h);

    let fresh = prune_and_retrain(&net, &tr, &va, &cfg, 0.5, true).unwrap();
    assert_eq!(fresh.retrained.architecture().widths, [2, 3, 4]);
}
