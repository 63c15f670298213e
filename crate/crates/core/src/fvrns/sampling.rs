use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::polyring::{Domain, RnsBase, RnsPoly};

pub(crate) fn uniform(base: &Arc<RnsBase>, rng: &mut impl Rng) -> RnsPoly {
    let n = base.degree();
    let mut data = Vec::with_capacity(n * base.len());
    for m in base.moduli() {
        let q = m.value();
        data.extend((0..n).map(|_| rng.random_range(0..q)));
    }
    RnsPoly::from_raw(base, data, Domain::Coefficient)
}

pub(crate) fn ternary_coeffs(n: usize, rng: &mut impl Rng) -> Vec<i64> {
    (0..n).map(|_| rng.random_range(-1i64..=1)).collect()
}

/// Rounded Gaussian with standard deviation `std`, resampled beyond `6 std`.
pub(crate) fn gaussian_coeffs(n: usize, std: f64, rng: &mut impl Rng) -> Vec<i64> {
    if std == 0.0 {
        return vec![0; n];
    }
    let normal = Normal::new(0.0, std).expect("finite std");
    let bound = 6.0 * std;
    (0..n)
        .map(|_| loop {
            let x: f64 = normal.sample(rng);
            let r = x.round();
            if r.abs() <= bound {
                break r as i64;
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn gaussian_is_truncated_and_spread() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let xs = gaussian_coeffs(100_000, 3.2, &mut rng);
        assert!(xs.iter().all(|x| x.abs() <= 19));
        let var = xs.iter().map(|&x| (x * x) as f64).sum::<f64>() / xs.len() as f64;
        // rounding adds 1/12 to the variance
        assert!((var - (3.2f64 * 3.2 + 1.0 / 12.0)).abs() < 0.2, "{var}");
    }

    #[test]
    fn ternary_values() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let xs = ternary_coeffs(3000, &mut rng);
        for v in [-1, 0, 1] {
            let c = xs.iter().filter(|&&x| x == v).count();
            assert!(c > 900 && c < 1100);
        }
    }
}
