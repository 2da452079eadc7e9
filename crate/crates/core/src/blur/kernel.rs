use serde::Serialize;

use super::BlurError;
use crate::scalar::Real;

/// Standard deviation and half-width of a square Gaussian kernel of side
/// `2 * radius + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianKernelSpec<T> {
    sigma: T,
    radius: usize,
}

impl<T: Real> GaussianKernelSpec<T> {
    pub fn new(sigma: T, radius: usize) -> Result<Self, BlurError> {
        if !(sigma.is_finite() && sigma > T::zero()) {
            return Err(BlurError::InvalidSigma);
        }
        if radius == 0 {
            return Err(BlurError::InvalidRadius);
        }
        Ok(Self { sigma, radius })
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn radius(&self) -> usize {
        self.radius
    }
}

impl<T: Real> Default for GaussianKernelSpec<T> {
    /// sigma 1, radius 1: the 3x3 nine-point grid.
    fn default() -> Self {
        Self {
            sigma: T::one(),
            radius: 1,
        }
    }
}

fn check_sigma<T: Real>(sigma: T) -> Result<(), BlurError> {
    if sigma.is_finite() && sigma > T::zero() {
        Ok(())
    } else {
        Err(BlurError::InvalidSigma)
    }
}

/// Isotropic Gaussian density in `n` dimensions at distance `r` from the mean:
/// `(2 pi sigma^2)^(-n/2) * exp(-r^2 / (2 sigma^2))`.
pub fn gaussian_density_nd<T: Real>(r: T, sigma: T, n: u32) -> Result<T, BlurError> {
    check_sigma(sigma)?;
    if !(r.is_finite() && r >= T::zero()) {
        return Err(BlurError::InvalidDistance);
    }
    if n == 0 {
        return Err(BlurError::InvalidDimension);
    }
    let var = sigma * sigma;
    let two_pi = T::lit(std::f64::consts::TAU);
    let norm = T::one() / (two_pi * var).sqrt();
    Ok(norm.powi(n as i32) * (-(r * r) / (var + var)).exp())
}

/// 2-D Gaussian density at offset `(u, v)`.
pub fn gaussian_density_2d<T: Real>(u: T, v: T, sigma: T) -> Result<T, BlurError> {
    check_sigma(sigma)?;
    let var = sigma * sigma;
    let two_pi = T::lit(std::f64::consts::TAU);
    Ok((-(u * u + v * v) / (var + var)).exp() / (two_pi * var))
}

/// 1-D Gaussian density at offset `u`.
pub fn gaussian_density_1d<T: Real>(u: T, sigma: T) -> Result<T, BlurError> {
    gaussian_density_nd(u.abs(), sigma, 1)
}

/// Normalized square kernel, stored row-major with offset `(0, 0)` at the
/// center.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelMatrix<T> {
    radius: usize,
    weights: Vec<T>,
}

impl<T: Real> KernelMatrix<T> {
    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Side length, always odd.
    pub fn size(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Weight at offset `(dx, dy)`, each in `[-radius, radius]`.
    pub fn weight(&self, dx: isize, dy: isize) -> T {
        let r = self.radius as isize;
        assert!(dx.abs() <= r && dy.abs() <= r, "offset outside kernel");
        self.weights[((dy + r) as usize) * self.size() + (dx + r) as usize]
    }

    pub fn sum(&self) -> T {
        self.weights.iter().fold(T::zero(), |a, &w| a + w)
    }

    /// Row marginals, indexed from offset `-radius`. For a separable kernel
    /// these are the 1-D factors whose outer product reproduces the matrix.
    pub fn factor(&self) -> Vec<T> {
        self.weights
            .chunks(self.size())
            .map(|row| row.iter().fold(T::zero(), |a, &w| a + w))
            .collect()
    }
}

/// Samples the 2-D density at every integer offset in `[-radius, radius]^2`
/// and divides by the total so the weights sum to one.
pub fn build_kernel<T: Real>(spec: &GaussianKernelSpec<T>) -> KernelMatrix<T> {
    let r = spec.radius as isize;
    let mut weights = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
    for dy in -r..=r {
        for dx in -r..=r {
            let w = gaussian_density_2d(T::from_isize(dx).unwrap(), T::from_isize(dy).unwrap(), spec.sigma)
                .expect("spec validated");
            weights.push(w);
        }
    }
    let total = weights.iter().fold(T::zero(), |a, &w| a + w);
    for w in &mut weights {
        *w /= total;
    }
    KernelMatrix {
        radius: spec.radius,
        weights,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_nd_examples() {
        let inv_2pi = 1.0 / (2.0 * std::f64::consts::PI);
        assert!((gaussian_density_nd(0.0, 1.0, 2).unwrap() - inv_2pi).abs() < 1e-15);
        assert!(
            (gaussian_density_nd(0.0f64, 1.0, 1).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15
        );
        assert!((gaussian_density_nd(1.0f64, 1.0, 2).unwrap() - 0.096_532_352_630_053_9).abs() < 1e-15);
    }

    #[test]
    fn density_2d_examples() {
        assert!((gaussian_density_2d(0.0f64, 0.0, 1.0).unwrap() - 0.159_154_943_091_895_34).abs() < 1e-15);
        assert!((gaussian_density_2d(1.0f64, 1.0, 1.0).unwrap() - 0.058_549_831_524_319_17).abs() < 1e-15);
        assert_eq!(
            gaussian_density_2d(-1.0, 0.0, 1.0).unwrap(),
            gaussian_density_2d(1.0, 0.0, 1.0).unwrap()
        );
        assert!((gaussian_density_2d(1.0f64, 0.0, 1.0).unwrap() - 0.096_532_352_630_053_9).abs() < 1e-15);
    }

    #[test]
    fn density_2d_matches_nd() {
        for &(u, v, s) in &[(0.3, -1.2, 0.7), (2.0, 2.0, 3.0), (0.0, 5.0, 1.5)] {
            let r = f64::hypot(u, v);
            let a = gaussian_density_2d(u, v, s).unwrap();
            let b = gaussian_density_nd(r, s, 2).unwrap();
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn density_rejects_bad_args() {
        assert!(matches!(gaussian_density_nd(0.0, 0.0, 2), Err(BlurError::InvalidSigma)));
        assert!(matches!(gaussian_density_nd(0.0, -1.0, 2), Err(BlurError::InvalidSigma)));
        assert!(matches!(gaussian_density_nd(-1.0, 1.0, 2), Err(BlurError::InvalidDistance)));
        assert!(matches!(gaussian_density_nd(0.0, 1.0, 0), Err(BlurError::InvalidDimension)));
        assert!(matches!(gaussian_density_2d(0.0, 0.0, f64::NAN), Err(BlurError::InvalidSigma)));
        assert!(GaussianKernelSpec::new(0.0, 1).is_err());
        assert!(GaussianKernelSpec::new(1.0, 0).is_err());
    }

    #[test]
    fn three_by_three_kernel() {
        let k = build_kernel(&GaussianKernelSpec::new(1.0, 1).unwrap());
        // raw weights 1, e^-1/2, e^-1 normalized by 1 + 4 e^-1/2 + 4 e^-1
        let total = 1.0 + 4.0 * (-0.5f64).exp() + 4.0 * (-1.0f64).exp();
        assert!((total - 4.897_640).abs() < 1e-6);
        assert!((k.weight(0, 0) - 1.0 / total).abs() < 1e-15);
        assert!((k.weight(0, 0) - 0.204_180).abs() < 1e-6);
        assert!((k.weight(1, 0) - 0.123_841).abs() < 1e-6);
        assert!((k.weight(-1, -1) - 0.075_113).abs() < 1e-6);
        assert!((k.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_limit() {
        let k = build_kernel(&GaussianKernelSpec::new(1e6f64, 1).unwrap());
        for &w in k.weights() {
            assert!((w - 1.0 / 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_symmetry_and_factor() {
        for sigma in [0.5, 1.0, 2.0, 5.0] {
            for radius in 1..=3 {
                let k = build_kernel(&GaussianKernelSpec::<f64>::new(sigma, radius).unwrap());
                let r = radius as isize;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let w = k.weight(dx, dy);
                        assert!(w > 0.0);
                        assert_eq!(w, k.weight(-dx, dy));
                        assert_eq!(w, k.weight(dx, -dy));
                        assert_eq!(w, k.weight(dy, dx));
                    }
                }
                let u = k.factor();
                assert_eq!(u.len(), k.size());
                for dy in -r..=r {
                    for dx in -r..=r {
                        let outer = u[(dy + r) as usize] * u[(dx + r) as usize];
                        assert!((outer - k.weight(dx, dy)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn f32_kernel() {
        let k = build_kernel(&GaussianKernelSpec::<f32>::default());
        assert!((k.weight(0, 0) - 0.204_18).abs() < 1e-5);
        assert!((k.sum() - 1.0).abs() < 1e-6);
    }
}
