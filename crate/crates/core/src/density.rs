//! Gaussian kernel density estimation on unit-cube coordinates, and the
//! inverse-density sample weights used for node statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{SampleRecord, SearchSpace};

/// Smallest bandwidth allowed on any normalized axis.
pub const BANDWIDTH_FLOOR: f64 = 1e-3;

/// A fitted product-Gaussian KDE.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityModel {
    bandwidth: Vec<f64>,
    n_samples: usize,
    #[serde(skip)]
    lower: Vec<f64>,
    #[serde(skip)]
    extent: Vec<f64>,
    /// Reference points, normalized and divided by the bandwidth, row-major.
    #[serde(skip)]
    scaled: Vec<f64>,
    #[serde(skip)]
    norm: f64,
}

impl DensityModel {
    /// Fits on the given points with Scott's rule per axis,
    /// `h_d = sigma_d * n^(-1/(dim+4))`, floored at [`BANDWIDTH_FLOOR`].
    pub fn fit<'a, I>(points: I, space: &SearchSpace) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let dim = space.dim();
        let mut unit: Vec<f64> = Vec::new();
        let mut n = 0usize;
        for p in points {
            Error::dims(dim, p.len())?;
            unit.extend(space.normalize(p));
            n += 1;
        }
        if n < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                found: n,
            });
        }

        let factor = (n as f64).powf(-1.0 / (dim as f64 + 4.0));
        let mut bandwidth = Vec::with_capacity(dim);
        for d in 0..dim {
            let mean = (0..n).map(|i| unit[i * dim + d]).sum::<f64>() / n as f64;
            let var = (0..n)
                .map(|i| (unit[i * dim + d] - mean).powi(2))
                .sum::<f64>()
                / (n - 1) as f64;
            bandwidth.push((var.sqrt() * factor).max(BANDWIDTH_FLOOR));
        }

        for i in 0..n {
            for d in 0..dim {
                unit[i * dim + d] /= bandwidth[d];
            }
        }
        let two_pi = 2.0 * std::f64::consts::PI;
        let norm = 1.0 / (n as f64 * bandwidth.iter().map(|h| h * two_pi.sqrt()).product::<f64>());

        Ok(Self {
            bandwidth,
            n_samples: n,
            lower: space.lower().to_vec(),
            extent: (0..dim).map(|d| space.extent(d)).collect(),
            scaled: unit,
            norm,
        })
    }

    /// Fits on the points of `records`.
    pub fn fit_records(records: &[SampleRecord], space: &SearchSpace) -> Result<Self> {
        Self::fit(records.iter().map(|r| r.point.coords()), space)
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    fn scale_query(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .enumerate()
            .map(|(d, &x)| (x - self.lower[d]) / self.extent[d] / self.bandwidth[d])
            .collect()
    }

    fn kernel_sum(&self, q: &[f64]) -> f64 {
        self.scaled
            .chunks_exact(q.len())
            .map(|row| kernel(row, q))
            .sum()
    }

    /// Density at `p` in unit-cube units. The result underflows to the
    /// smallest positive normal value rather than reaching zero.
    pub fn density_at(&self, p: &[f64]) -> f64 {
        let q = self.scale_query(p);
        (self.norm * self.kernel_sum(&q)).max(f64::MIN_POSITIVE)
    }

    /// Densities at every reference point, in fit order.
    pub fn densities_at_samples(&self) -> Vec<f64> {
        let dim = self.bandwidth.len();
        let rows: Vec<&[f64]> = self.scaled.chunks_exact(dim).collect();
        let mut sums = vec![1.0; rows.len()];
        for (i, a) in rows.iter().enumerate() {
            for (j, b) in rows.iter().enumerate().skip(i + 1) {
                let k = kernel(a, b);
                sums[i] += k;
                sums[j] += k;
            }
        }
        sums.into_iter()
            .map(|s| (self.norm * s).max(f64::MIN_POSITIVE))
            .collect()
    }
}

/// Squared scaled distance beyond which a kernel term (below 4.3e-18) is
/// dropped.
const KERNEL_CUTOFF_SQ: f64 = 80.0;

fn kernel(a: &[f64], b: &[f64]) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    if sq > KERNEL_CUTOFF_SQ {
        0.0
    } else {
        (-0.5 * sq).exp()
    }
}

/// Inverse-density weights normalized to sum to one.
pub fn density_weights(densities: &[f64]) -> Result<Vec<f64>> {
    if densities.is_empty() {
        return Err(Error::Empty("density weights of an empty node"));
    }
    if let Some(&bad) = densities.iter().find(|&&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "density must be positive and finite, got {bad}"
        )));
    }
    let inv: Vec<f64> = densities.iter().map(|r| 1.0 / r).collect();
    let total: f64 = inv.iter().sum();
    Ok(inv.into_iter().map(|w| w / total).collect())
}

/// Refits the KDE on all records and stores each record's density.
/// No-op when fewer than two records exist.
pub fn refresh_densities(
    records: &mut [SampleRecord],
    space: &SearchSpace,
) -> Result<Option<DensityModel>> {
    if records.len() < 2 {
        return Ok(None);
    }
    let model = DensityModel::fit_records(records, space)?;
    for (r, rho) in records.iter_mut().zip(model.densities_at_samples()) {
        r.density = rho;
    }
    Ok(Some(model))
}
