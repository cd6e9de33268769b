use serde::{Deserialize, Serialize};

use super::regressors::RegressorSample;
use crate::{Error, Result};

/// Recursive least-squares estimate with exponential forgetting.
///
/// `p` is the covariance, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlsState {
    pub psi: Vec<f64>,
    pub p: Vec<f64>,
    pub lambda: f64,
}

impl RlsState {
    /// Estimate `psi0` with covariance `p0 * I`.
    pub fn new(psi0: Vec<f64>, p0: f64, lambda: f64) -> Result<Self> {
        let n = psi0.len();
        let mut p = vec![0.0; n * n];
        for i in 0..n {
            p[i * n + i] = p0;
        }
        let s = Self { psi: psi0, p, lambda };
        s.validate()?;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.psi.len()
    }

    pub fn trace(&self) -> f64 {
        let n = self.dim();
        (0..n).map(|i| self.p[i * n + i]).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 || self.p.len() != n * n {
            return Err(Error::InvalidInput("covariance shape does not match the estimate".into()));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::InvalidInput(format!("forgetting factor {} outside (0, 1]", self.lambda)));
        }
        crate::error::ensure_finite(&self.psi, "estimate")?;
        crate::error::ensure_finite(&self.p, "covariance")?;
        if !self.is_positive_definite() {
            return Err(Error::NumericalDegeneracy("covariance is not positive definite".into()));
        }
        Ok(())
    }

    /// Cholesky attempt on the stored (symmetric) covariance.
    pub fn is_positive_definite(&self) -> bool {
        let n = self.dim();
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.p[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(s > 0.0) {
                        return false;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        true
    }

    /// Applies one sample in place.
    ///
    /// `L = P phi / (lambda + phi' P phi)`, `psi += L (y - phi' psi)`,
    /// `P = (P - L phi' P) / lambda`, then `P = (P + P') / 2`.
    pub fn update(&mut self, sample: &RegressorSample) -> Result<()> {
        let n = self.dim();
        if sample.phi.len() != n {
            return Err(Error::InvalidInput(format!("regressor has {} entries, estimate has {n}", sample.phi.len())));
        }
        crate::error::ensure_finite(&sample.phi, "regressor")?;
        crate::error::ensure_finite(&[sample.y], "measurement")?;
        let phi = &sample.phi;
        let p_phi: Vec<f64> = (0..n).map(|i| (0..n).map(|j| self.p[i * n + j] * phi[j]).sum()).collect();
        let denom = self.lambda + phi.iter().zip(&p_phi).map(|(a, b)| a * b).sum::<f64>();
        if !(denom > 0.0) || !denom.is_finite() {
            return Err(Error::NumericalDegeneracy("gain denominator is not positive".into()));
        }
        let gain: Vec<f64> = p_phi.iter().map(|v| v / denom).collect();
        let innovation = sample.y - phi.iter().zip(&self.psi).map(|(a, b)| a * b).sum::<f64>();
        for (p, g) in self.psi.iter_mut().zip(&gain) {
            *p += g * innovation;
        }
        // phi' P is the transpose of P phi only when P is symmetric, which
        // the re-symmetrisation keeps true
        let phi_p: Vec<f64> = (0..n).map(|j| (0..n).map(|i| phi[i] * self.p[i * n + j]).sum()).collect();
        let mut next = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                next[i * n + j] = (self.p[i * n + j] - gain[i] * phi_p[j]) / self.lambda;
            }
        }
        for i in 0..n {
            for j in 0..i {
                let s = 0.5 * (next[i * n + j] + next[j * n + i]);
                next[i * n + j] = s;
                next[j * n + i] = s;
            }
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalDegeneracy("covariance overflowed".into()));
        }
        let previous = std::mem::replace(&mut self.p, next);
        if !self.is_positive_definite() {
            self.p = previous;
            return Err(Error::NumericalDegeneracy("covariance lost positive definiteness".into()));
        }
        Ok(())
    }

    /// Functional form of [`Self::update`].
    pub fn updated(&self, sample: &RegressorSample) -> Result<Self> {
        let mut next = self.clone();
        next.update(sample)?;
        Ok(next)
    }

    /// Resets the covariance to `p0 * I`, keeping the estimate.
    pub fn reset_covariance(&mut self, p0: f64) {
        let n = self.dim();
        self.p.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            self.p[i * n + i] = p0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(phi: Vec<f64>, y: f64) -> RegressorSample {
        RegressorSample { phi, y }
    }

    #[test]
    fn zero_regressor_only_inflates_covariance() {
        let s = RlsState::new(vec![0.5, -1.0], 3.0, 0.9).unwrap();
        let n = s.updated(&sample(vec![0.0, 0.0], 7.0)).unwrap();
        assert_eq!(n.psi, s.psi);
        for (a, b) in n.p.iter().zip(&s.p) {
            assert!((a - b / 0.9).abs() < 1e-15);
        }
    }

    #[test]
    fn scalar_problem_converges() {
        let mut s = RlsState::new(vec![0.0], 1e6, 1.0).unwrap();
        for phi in [1.0, 2.0, -0.5] {
            s.update(&sample(vec![phi], 3.0 * phi)).unwrap();
        }
        assert!((s.psi[0] - 3.0).abs() < 1e-6, "{}", s.psi[0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(RlsState::new(vec![0.0], 1.0, 1.5).is_err());
        assert!(RlsState::new(vec![0.0], -1.0, 1.0).is_err());
        let mut s = RlsState::new(vec![0.0, 0.0], 1.0, 1.0).unwrap();
        assert!(s.update(&sample(vec![1.0], 1.0)).is_err());
        assert!(s.update(&sample(vec![1.0, f64::NAN], 1.0)).is_err());
    }

    #[test]
    fn covariance_stays_symmetric_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut s = RlsState::new(vec![0.0; 3], 1e4, 0.995).unwrap();
        for _ in 0..2000 {
            let phi: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y = phi[0] - 2.0 * phi[1] + 0.5 * phi[2];
            s.update(&sample(phi, y)).unwrap();
            assert!(s.is_positive_definite());
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(s.p[i * 3 + j], s.p[j * 3 + i]);
                }
            }
        }
        assert!((s.psi[1] + 2.0).abs() < 1e-9);
    }
}
