use serde::{Deserialize, Serialize};

use super::expr::{simplify, Bindings, Expr, Symbol};
use crate::dynamics::PlantParams;
use crate::homogeneity::HomogeneityTransform;
use crate::{Error, Result};

/// Parameter-dependent scalings expressed as trees: one per state, one for
/// the control and one for the time scale.
///
/// Parameter symbols stand for ratios to the nominal plant (`l` means
/// `l / l_n`), so every scaling of an exact transform is 1 at nominal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTransform {
    pub state_scales: Vec<Expr>,
    pub control_scale: Expr,
    pub zeta: Expr,
}

/// Scalings of a candidate evaluated at one parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleValues<'a> {
    pub state_scales: &'a [f64],
    pub control_scale: f64,
    pub zeta: f64,
}

impl CandidateTransform {
    pub fn identity(dim: usize) -> Self {
        Self { state_scales: vec![Expr::c(1.0); dim], control_scale: Expr::c(1.0), zeta: Expr::c(1.0) }
    }

    /// Closed-form pendulum scalings in parameter ratios.
    pub fn analytic_pendulum() -> Self {
        let (m, l, g) = (Expr::sym(Symbol::M), Expr::sym(Symbol::L), Expr::sym(Symbol::G));
        Self {
            state_scales: vec![Expr::c(1.0), Expr::sqrt(Expr::div(l.clone(), g.clone()))],
            control_scale: Expr::mul(Expr::mul(m, l.clone()), g.clone()),
            zeta: Expr::sqrt(Expr::div(g, l)),
        }
    }

    /// Closed-form vehicle/load scalings in parameter ratios; valid when the
    /// mass ratio matches the nominal one.
    pub fn analytic_driver_load() -> Self {
        let (m, l, g) = (Expr::sym(Symbol::M), Expr::sym(Symbol::L), Expr::sym(Symbol::G));
        let inv_zeta = Expr::sqrt(Expr::div(l.clone(), g.clone()));
        Self {
            state_scales: vec![
                Expr::c(1.0),
                inv_zeta.clone(),
                Expr::div(Expr::c(1.0), l.clone()),
                Expr::div(inv_zeta, l.clone()),
            ],
            control_scale: Expr::mul(m, g.clone()),
            zeta: Expr::sqrt(Expr::div(g, l)),
        }
    }

    pub fn dim(&self) -> usize {
        self.state_scales.len()
    }

    pub fn trees(&self) -> impl Iterator<Item = &Expr> {
        self.state_scales.iter().chain([&self.control_scale, &self.zeta])
    }

    /// Tree `k` in the order state scales, control scale, time scale.
    pub fn tree_mut(&mut self, k: usize) -> &mut Expr {
        let n = self.state_scales.len();
        match k {
            k if k < n => &mut self.state_scales[k],
            k if k == n => &mut self.control_scale,
            _ => &mut self.zeta,
        }
    }

    pub fn tree(&self, k: usize) -> &Expr {
        let n = self.state_scales.len();
        match k {
            k if k < n => &self.state_scales[k],
            k if k == n => &self.control_scale,
            _ => &self.zeta,
        }
    }

    pub fn tree_count(&self) -> usize {
        self.state_scales.len() + 2
    }

    pub fn node_count(&self) -> usize {
        self.trees().map(Expr::node_count).sum()
    }

    pub fn depth(&self) -> usize {
        self.trees().map(Expr::depth).max().unwrap_or(0)
    }

    pub fn simplified(&self) -> Self {
        Self {
            state_scales: self.state_scales.iter().map(simplify).collect(),
            control_scale: simplify(&self.control_scale),
            zeta: simplify(&self.zeta),
        }
    }

    /// Raw values in tree order; may contain NaN or nonpositive entries.
    pub fn values(&self, params: &PlantParams, nominal: &PlantParams) -> Vec<f64> {
        let env = Bindings::relative(params, nominal);
        self.trees().map(|t| t.eval(&env)).collect()
    }

    /// Splits [`Self::values`] output into named parts.
    pub fn split(values: &[f64]) -> ScaleValues<'_> {
        let n = values.len() - 2;
        ScaleValues { state_scales: &values[..n], control_scale: values[n], zeta: values[n + 1] }
    }

    /// Numeric transform at `params` relative to `nominal`. Every scaling
    /// must be positive and finite; `kappa_i = 1 / c_i`.
    pub fn evaluate(&self, params: &PlantParams, nominal: &PlantParams) -> Result<HomogeneityTransform> {
        if params.kind() != nominal.kind() {
            return Err(Error::InvalidInput("plant and nominal differ in kind".into()));
        }
        if self.dim() != params.kind().state_dim() {
            return Err(Error::InvalidInput(format!(
                "candidate scales {} states but the plant has {}",
                self.dim(),
                params.kind().state_dim()
            )));
        }
        let values = self.values(params, nominal);
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidInput(format!("candidate evaluates to {bad}")));
        }
        let s = Self::split(&values);
        Ok(HomogeneityTransform {
            zeta: s.zeta,
            kappa: s.state_scales.iter().map(|c| 1.0 / c).collect(),
            state_scales: s.state_scales.to_vec(),
            control_scale: s.control_scale,
            reduced_params: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DriverLoadParams, PendulumParams};
    use crate::homogeneity::{driverload_transform, pendulum_transform, NominalSpec};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn analytic_pendulum_matches_closed_form() {
        let nominal = PendulumParams::nominal();
        let spec = NominalSpec::pendulum(nominal).unwrap();
        let cand = CandidateTransform::analytic_pendulum();
        for (m, l) in [(1.0, 4.905), (2.0, 9.81), (0.7, 39.24), (1.3, 29.43)] {
            let p = PendulumParams::new(m, l, 9.81).unwrap();
            let a = cand.evaluate(&PlantParams::Pendulum(p), &spec.params).unwrap();
            let b = pendulum_transform(&p, &spec).unwrap();
            assert!(close(a.zeta, b.zeta));
            assert!(close(a.control_scale, b.control_scale));
            for i in 0..2 {
                assert!(close(a.state_scales[i], b.state_scales[i]));
                assert!(close(a.kappa[i], b.kappa[i]));
            }
        }
    }

    #[test]
    fn analytic_driver_load_matches_closed_form() {
        let nominal = DriverLoadParams::nominal();
        let spec = NominalSpec::driver_load(nominal).unwrap();
        let cand = CandidateTransform::analytic_driver_load();
        let p = DriverLoadParams::new(nominal.big_m * 2.0, nominal.m * 2.0, nominal.l * 3.0, nominal.g).unwrap();
        let a = cand.evaluate(&PlantParams::DriverLoad(p), &spec.params).unwrap();
        let b = driverload_transform(&p, &spec).unwrap();
        assert!(close(a.zeta, b.zeta));
        assert!(close(a.control_scale, b.control_scale), "{} {}", a.control_scale, b.control_scale);
        for i in 0..4 {
            assert!(close(a.state_scales[i], b.state_scales[i]));
            assert!(close(a.kappa[i], b.kappa[i]));
        }
    }

    #[test]
    fn invalid_values_are_rejected() {
        let nominal = PlantParams::Pendulum(PendulumParams::nominal());
        let mut cand = CandidateTransform::identity(2);
        cand.zeta = Expr::sqrt(Expr::c(-1.0));
        assert!(cand.evaluate(&nominal, &nominal).is_err());
        cand.zeta = Expr::c(-2.0);
        assert!(cand.evaluate(&nominal, &nominal).is_err());
        assert!(CandidateTransform::identity(4).evaluate(&nominal, &nominal).is_err());
    }
}
