//! Small descriptive statistics over `f64` slices.
//!
//! Quantiles use linear interpolation between order statistics.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Arithmetic mean; summation runs over the values in ascending order so
/// the result does not depend on input order.
pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(sorted(values).iter().sum::<f64>() / values.len() as f64)
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    let sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    Some(libm::sqrt(mean(&sq)?))
}

pub fn max(values: &[f64]) -> Option<f64> {
    values.iter().copied().reduce(f64::max)
}

/// `q`-quantile of already sorted values.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = libm::floor(h) as usize;
    let hi = libm::ceil(h) as usize;
    if lo == hi {
        return Some(sorted[lo]);
    }
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    quantile_sorted(&sorted(values), q)
}

/// Middle value, or the mean of the central pair.
pub fn median(values: &[f64]) -> Option<f64> {
    let s = sorted(values);
    let m = s.len() / 2;
    match s.len() {
        0 => None,
        n if n % 2 == 1 => Some(s[m]),
        _ => Some((s[m - 1] + s[m]) / 2.0),
    }
}

/// Draws `n` values from `values` with replacement.
pub fn resample(values: &[f64], n: usize, seed: u64) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = values.len() as u64;
    (0..n)
        .map(|_| {
            // rejection sampling keeps the index uniform
            let zone = u64::MAX - u64::MAX % len;
            loop {
                let r = rng.next_u64();
                if r < zone {
                    return values[(r % len) as usize];
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn midpoint_median_and_quartiles() {
        let v = [0.04, 0.01, 0.03, 0.02];
        assert!((median(&v).unwrap() - 0.025).abs() < 1e-15);
        assert!((quantile(&v, 0.25).unwrap() - 0.0175).abs() < 1e-15);
        assert_eq!(quantile(&v, 1.0), Some(0.04));
        assert_eq!(median(&[0.1, 0.2, 0.6]), Some(0.2));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn mean_std() {
        assert_eq!(mean(&[0.06, 0.06]), Some(0.06));
        assert_eq!(std_dev(&[0.06, 0.06]), Some(0.0));
        assert!((std_dev(&[1.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(max(&[0.1, 0.7, 0.3]), Some(0.7));
    }

    #[test]
    fn resample_is_seeded_and_draws_from_input() {
        let v = vec![0.1, 0.2, 0.3];
        let a = resample(&v, 100, 5);
        assert_eq!(a.len(), 100);
        assert_eq!(a, resample(&v, 100, 5));
        assert!(a.iter().all(|x| v.contains(x)));
        assert_eq!(resample(&[0.2], 100, 1), vec![0.2; 100]);
    }
}
