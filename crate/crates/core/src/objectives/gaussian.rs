use serde::{Deserialize, Serialize};

use super::Objective;
use crate::error::{Error, Result};
use crate::space::{HazardBox, SearchSpace};

/// Sum of `dim` isotropic Gaussian bumps centred at `-bias * e_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub dim: usize,
    pub bias: f64,
    pub sigma: f64,
}

impl GaussianSpec {
    pub fn new(dim: usize, bias: f64, sigma: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("gaussian dim must be >= 1".into()));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self { dim, bias, sigma })
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        let two_var = 2.0 * self.sigma * self.sigma;
        (0..self.dim)
            .map(|i| {
                // squared norm of p + bias * e_i
                let sq: f64 = p
                    .iter()
                    .enumerate()
                    .map(|(d, &x)| {
                        let shifted = if d == i { x + self.bias } else { x };
                        shifted * shifted
                    })
                    .sum();
                (-sq / two_var).exp()
            })
            .sum()
    }

    pub fn modality_centers(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| {
                let mut c = vec![0.0; self.dim];
                c[i] = -self.bias;
                c
            })
            .collect()
    }

    /// Radius of the ball around a centre where its own bump exceeds
    /// `threshold`; cross-mode terms are ignored.
    pub fn hazard_radius(&self, threshold: f64) -> f64 {
        (-2.0 * self.sigma * self.sigma * threshold.ln()).sqrt()
    }
}

/// The multimodal Gaussian benchmark on `[-20, 20]^dim` with threshold 0.8.
#[derive(Debug, Clone)]
pub struct GaussianObjective {
    spec: GaussianSpec,
    space: SearchSpace,
    name: String,
}

impl GaussianObjective {
    pub const HALF_WIDTH: f64 = 20.0;
    pub const THRESHOLD: f64 = 0.8;

    pub fn new(spec: GaussianSpec) -> Result<Self> {
        let space = SearchSpace::new(
            vec![-Self::HALF_WIDTH; spec.dim],
            vec![Self::HALF_WIDTH; spec.dim],
            Self::THRESHOLD,
            (0.0, 1.0),
        )?;
        Ok(Self {
            spec,
            space,
            name: format!("gaussian-{}d", spec.dim),
        })
    }

    /// `bias = 10`, `sigma = 3`.
    pub fn standard(dim: usize) -> Result<Self> {
        Self::new(GaussianSpec::new(dim, 10.0, 3.0)?)
    }

    pub fn spec(&self) -> &GaussianSpec {
        &self.spec
    }
}

impl Objective for GaussianObjective {
    fn name(&self) -> &str {
        &self.name
    }

    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&self, p: &[f64]) -> Result<f64> {
        Error::dims(self.spec.dim, p.len())?;
        Ok(self.spec.eval(p))
    }

    /// Axis-aligned bounding boxes of the hazard balls, `center ± r`.
    fn analytic_hazard_boxes(&self) -> Option<Vec<HazardBox>> {
        let r = self.spec.hazard_radius(self.space.hazard_threshold());
        Some(
            self.spec
                .modality_centers()
                .into_iter()
                .map(|c| HazardBox {
                    lower: c.iter().map(|x| x - r).collect(),
                    upper: c.iter().map(|x| x + r).collect(),
                    member_count: 0,
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Direct sum of exp(-|p + 10 e_i|^2 / 18), written out per term.
    fn oracle_2d(x: f64, y: f64) -> f64 {
        let a = (x + 10.0).powi(2) + y.powi(2);
        let b = x.powi(2) + (y + 10.0).powi(2);
        (-a / 18.0).exp() + (-b / 18.0).exp()
    }

    #[test]
    fn values_at_reference_points() {
        let g = GaussianSpec::new(2, 10.0, 3.0).unwrap();
        let at_mode = g.eval(&[-10.0, 0.0]);
        assert_relative_eq!(
            at_mode,
            1.0 + (-200.0f64 / 18.0).exp(),
            max_relative = 1e-15
        );
        assert_relative_eq!(at_mode, 1.0000149, epsilon = 1e-7);
        assert_relative_eq!(
            g.eval(&[0.0, 0.0]),
            2.0 * (-100.0f64 / 18.0).exp(),
            max_relative = 1e-15
        );
        assert_relative_eq!(g.eval(&[0.0, 0.0]), 7.7318e-3, epsilon = 1e-7);
        assert_eq!(g.eval(&[-10.0, 0.0]), g.eval(&[0.0, -10.0]));
        for &(x, y) in &[(3.0, -7.5), (-19.0, 19.0), (-11.2, 0.4)] {
            assert_relative_eq!(g.eval(&[x, y]), oracle_2d(x, y), max_relative = 1e-14);
        }
    }

    #[test]
    fn value_range_on_grid() {
        for dim in [2, 4] {
            let g = GaussianSpec::new(dim, 10.0, 3.0).unwrap();
            let steps = if dim == 2 { 81 } else { 17 };
            let mut idx = vec![0usize; dim];
            loop {
                let p: Vec<f64> = idx
                    .iter()
                    .map(|&k| -20.0 + 40.0 * k as f64 / (steps - 1) as f64)
                    .collect();
                let v = g.eval(&p);
                assert!(v > 0.0 && v <= 1.001, "value {v} at {p:?}");
                let mut d = 0;
                while d < dim {
                    idx[d] += 1;
                    if idx[d] < steps {
                        break;
                    }
                    idx[d] = 0;
                    d += 1;
                }
                if d == dim {
                    break;
                }
            }
        }
    }

    #[test]
    fn centers_are_local_maxima() {
        for dim in [2, 4] {
            let g = GaussianSpec::new(dim, 10.0, 3.0).unwrap();
            for c in g.modality_centers() {
                let peak = g.eval(&c);
                for d in 0..dim {
                    for s in [-0.1, 0.1] {
                        let mut q = c.clone();
                        q[d] += s;
                        assert!(g.eval(&q) < peak);
                    }
                }
            }
        }
    }

    #[test]
    fn analytic_boxes() {
        let obj = GaussianObjective::standard(2).unwrap();
        let boxes = obj.analytic_hazard_boxes().unwrap();
        let r = (-18.0 * 0.8f64.ln()).sqrt();
        assert_relative_eq!(r, 2.004, epsilon = 1e-3);
        assert_eq!(boxes.len(), 2);
        assert_relative_eq!(boxes[0].lower[0], -10.0 - r);
        assert_relative_eq!(boxes[1].upper[1], -10.0 + r);
    }
}
