//! Statistical checks on the pre-training batch constructors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};
use vrdie_core::{GridBBox, Span};
use vrdie_neural::pretraining::{build_mllm_batch, build_phs_batch};
use vrdie_neural::ModelInput;

fn window(n: usize) -> ModelInput {
    let ids = (0..n).map(|i| 5 + (i % 40) as u32).collect();
    let boxes = (0..n)
        .map(|i| {
            let x = (i % 25) as u16 * 40;
            let y = (i / 25 % 40) as u16 * 25;
            GridBBox { x0: x, y0: y, x1: x + 30, y1: y + 20 }
        })
        .collect();
    ModelInput::new(ids, boxes)
}

#[test]
fn masked_count_stays_in_binomial_bounds() {
    let n = 1000;
    let binom = Binomial::new(0.15, n as u64).unwrap();
    let p_inside = binom.cdf(200) - binom.cdf(99);
    assert!(p_inside > 0.99, "model probability {p_inside}");

    let w = window(n);
    let seeds = 2000;
    let mut inside = 0;
    let mut total = 0usize;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let batch = build_mllm_batch(&w, 0.15, 60, &mut rng).unwrap().unwrap();
        let k = batch.masked.iter().filter(|&&m| m).count();
        assert_eq!(batch.targets.iter().filter(|t| t.is_some()).count(), k);
        assert_eq!(batch.input.bboxes, w.bboxes);
        inside += usize::from((100..=200).contains(&k));
        total += k;
    }
    assert!(inside as f64 / seeds as f64 >= 0.99, "{inside} of {seeds} seeds inside [100, 200]");
    // mean of 2000 binomial draws: sd of the mean is about 0.25
    let mean = total as f64 / seeds as f64;
    assert!((mean - 150.0).abs() < 1.5, "mean masked count {mean}");
}

fn permutation_index(alignment: &[usize]) -> usize {
    // Lehmer code
    let mut idx = 0;
    for i in 0..alignment.len() {
        let smaller = alignment[i + 1..].iter().filter(|&&v| v < alignment[i]).count();
        idx = idx * (alignment.len() - i) + smaller;
    }
    idx
}

#[test]
fn heading_permutations_are_uniform() {
    let w = window(30);
    let candidates = [Span::new(1, 2), Span::new(6, 6), Span::new(10, 12), Span::new(20, 21)];
    let mut counts = [0usize; 24];
    for seed in 0..10_000 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let batch = build_phs_batch(&w, &candidates, &mut rng, 1.0, 64).unwrap().unwrap();
        assert!(batch.targets.is_bijection());
        counts[permutation_index(&batch.targets.alignment)] += 1;
    }
    let expected = 10_000.0 / 24.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new(23.0).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi-square {chi2}, p {p}, counts {counts:?}");
}

#[test]
fn lehmer_code_is_a_bijection_on_four() {
    let mut seen = std::collections::HashSet::new();
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    let mut s = p;
                    s.sort();
                    if s == [0, 1, 2, 3] {
                        assert!(seen.insert(permutation_index(&p)));
                    }
                }
            }
        }
    }
    assert_eq!(seen.len(), 24);
    assert!(seen.iter().all(|&i| i < 24));
}
