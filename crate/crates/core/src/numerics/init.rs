// SPDX-License-Identifier: Apache-2.0

use super::tensor::Tensor;
use crate::rng::{self, Rng};

/// Zero-mean Gaussian weights with variance `2 / fan_in`, for layers
/// followed by a rectifier.
pub fn he_init(shape: &[usize], fan_in: usize, rng: &mut Rng) -> Tensor {
    gaussian(shape, 2.0 / fan_in as f32, fan_in, rng)
}

/// Zero-mean Gaussian weights with variance `1 / fan_in`, for layers with a
/// linear output.
pub fn lecun_init(shape: &[usize], fan_in: usize, rng: &mut Rng) -> Tensor {
    gaussian(shape, 1.0 / fan_in as f32, fan_in, rng)
}

fn gaussian(shape: &[usize], var: f32, fan_in: usize, rng: &mut Rng) -> Tensor {
    assert!(fan_in >= 1, "fan_in must be at least 1");
    let std = var.sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| std * rng::normal(rng)).collect();
    Tensor::from_parts(shape.to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn variance_matches_fan_in() {
        let mut r = stream(11, Purpose::Init, 0);
        let n = 100_000;
        let t = he_init(&[n], 2, &mut r);
        let xs: Vec<f64> = t.data().iter().map(|&v| v as f64).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
        // standard error of the mean is sqrt(var / n)
        assert!(mean.abs() < 3.0 * (1.0 / n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn lecun_is_half_the_he_variance() {
        let he = he_init(&[50_000], 4, &mut stream(5, Purpose::Init, 0));
        let lc = lecun_init(&[50_000], 4, &mut stream(5, Purpose::Init, 0));
        for (a, b) in he.data().iter().zip(lc.data()) {
            assert!((a / 2f32.sqrt() - b).abs() < 1e-6);
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let a = he_init(&[4, 5], 20, &mut stream(3, Purpose::Init, 0));
        let b = he_init(&[4, 5], 20, &mut stream(3, Purpose::Init, 0));
        assert_eq!(a, b);
    }
}
