use rand::Rng;

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

pub fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// Inverse-CDF draw. Zero-probability entries are never returned.
pub fn categorical_sample<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_from_zero_logits() {
        assert_eq!(softmax(&[0.0; 4]), vec![0.25; 4]);
    }

    #[test]
    fn two_logits_match_direct_formula() {
        let p = softmax(&[1.0, 2.0]);
        let e1 = 1f64.exp();
        let e2 = 2f64.exp();
        assert!((p[0] - e1 / (e1 + e2)).abs() < 1e-15);
        assert!((p[1] - e2 / (e1 + e2)).abs() < 1e-15);
    }

    #[test]
    fn large_logits_are_stable() {
        let p = softmax(&[1000.0, 1000.0]);
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn degenerate_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(categorical_sample(&[1.0, 0.0, 0.0], &mut rng), 0);
        }
    }

    #[test]
    fn uniform_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| categorical_sample(&[0.5, 0.5], &mut rng) == 1)
            .count();
        let f = ones as f64 / n as f64;
        assert!((0.49..=0.51).contains(&f), "{f}");
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let probs = [0.2, 0.5, 0.3];
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| categorical_sample(&probs, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
    }

    proptest! {
        #[test]
        fn softmax_normalized_and_shift_invariant(
            logits in prop::collection::vec(-30.0f64..30.0, 1..10),
            shift in -100.0f64..100.0,
        ) {
            let p = softmax(&logits);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|&v| v > 0.0));
            let shifted: Vec<f64> = logits.iter().map(|z| z + shift).collect();
            let q = softmax(&shifted);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let lp = log_softmax(&logits);
            for (a, b) in p.iter().zip(&lp) {
                prop_assert!((a.ln() - b).abs() < 1e-9);
            }
        }
    }
}
