use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Objective;
use crate::error::{Error, Result};
use crate::space::{HazardBox, SearchSpace};

/// Upper bound on grid points evaluated by [`grid_oracle`] unless overridden.
pub const DEFAULT_GRID_CAP: u128 = 20_000_000;

pub const GROUND_TRUTH_SCHEMA: &str = "hazard-search/ground-truth/v1";

/// Row-major indexing of a uniform grid over a search space. The last
/// dimension varies fastest. A resolution of 1 places the single point at the
/// centre of that axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridIndexer {
    lower: Vec<f64>,
    step: Vec<f64>,
    resolution: Vec<usize>,
    len: usize,
}

impl GridIndexer {
    pub fn new(space: &SearchSpace, resolution: &[usize], cap: u128) -> Result<Self> {
        Error::dims(space.dim(), resolution.len())?;
        if resolution.iter().any(|&r| r == 0) {
            return Err(Error::InvalidArgument(
                "grid resolution must be >= 1".into(),
            ));
        }
        let points: u128 = resolution.iter().map(|&r| r as u128).product();
        if points > cap {
            return Err(Error::GridTooLarge { points, cap });
        }
        let mut lower = Vec::with_capacity(space.dim());
        let mut step = Vec::with_capacity(space.dim());
        for (d, &r) in resolution.iter().enumerate() {
            if r == 1 {
                lower.push(space.lower()[d] + 0.5 * space.extent(d));
                step.push(0.0);
            } else {
                lower.push(space.lower()[d]);
                step.push(space.extent(d) / (r - 1) as f64);
            }
        }
        Ok(Self {
            lower,
            step,
            resolution: resolution.to_vec(),
            len: points as usize,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    /// Writes the coordinates of grid point `index` into `out`.
    pub fn point_into(&self, mut index: usize, out: &mut [f64]) {
        for d in (0..self.resolution.len()).rev() {
            let k = index % self.resolution[d];
            index /= self.resolution[d];
            out[d] = self.lower[d] + k as f64 * self.step[d];
        }
    }

    pub fn point(&self, index: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.resolution.len()];
        self.point_into(index, &mut p);
        p
    }

    fn stride(&self, d: usize) -> usize {
        self.resolution[d + 1..].iter().product()
    }
}

/// Exhaustive evaluation of an objective on a uniform grid.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub objective: String,
    pub space: SearchSpace,
    pub grid: GridIndexer,
    /// Clamped risk at every grid point, in grid order.
    pub risks: Vec<f64>,
    pub hazardous_fraction: f64,
    /// Reference hazardous boxes: analytic when the objective provides them,
    /// otherwise the bounding boxes of face-connected hazardous grid clusters.
    pub true_boxes: Vec<HazardBox>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.risks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.risks.is_empty()
    }

    pub fn label(&self, index: usize) -> bool {
        self.space.is_hazardous(self.risks[index])
    }

    pub fn labels(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.label(i)).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let dim = self.space.dim();
        let header: Vec<String> = (0..dim)
            .map(|d| format!("x{d}"))
            .chain(["risk".to_string()])
            .collect();
        writeln!(w, "{}", header.join(","))?;
        let mut p = vec![0.0; dim];
        for (i, risk) in self.risks.iter().enumerate() {
            self.grid.point_into(i, &mut p);
            for x in &p {
                write!(w, "{x},")?;
            }
            writeln!(w, "{risk}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn sidecar(&self) -> GroundTruthSidecar {
        GroundTruthSidecar {
            schema: GROUND_TRUTH_SCHEMA.to_string(),
            objective: self.objective.clone(),
            resolution: self.grid.resolution().to_vec(),
            points: self.len(),
            hazardous_fraction: self.hazardous_fraction,
            threshold: self.space.hazard_threshold(),
            true_boxes: self.true_boxes.clone(),
        }
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn persist(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(&dir.join(format!("{stem}.csv")))?;
        let json = serde_json::to_string_pretty(&self.sidecar())?;
        std::fs::write(dir.join(format!("{stem}.json")), json + "\n")?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSidecar {
    pub schema: String,
    pub objective: String,
    pub resolution: Vec<usize>,
    pub points: usize,
    pub hazardous_fraction: f64,
    pub threshold: f64,
    pub true_boxes: Vec<HazardBox>,
}

/// Evaluates `objective` at every point of a `resolution`-per-axis grid.
pub fn grid_oracle<O: Objective + ?Sized>(
    objective: &O,
    resolution: &[usize],
    cap: u128,
) -> Result<GroundTruth> {
    if resolution.iter().any(|&r| r < 2) {
        return Err(Error::InvalidArgument(
            "grid oracle needs resolution >= 2 per axis".into(),
        ));
    }
    let space = objective.space().clone();
    let grid = GridIndexer::new(&space, resolution, cap)?;
    let mut risks = Vec::with_capacity(grid.len());
    let mut p = vec![0.0; space.dim()];
    for i in 0..grid.len() {
        grid.point_into(i, &mut p);
        let (risk, _) = space.clamp_risk(objective.evaluate(&p)?);
        risks.push(risk);
    }
    let hazardous = risks.iter().filter(|&&r| space.is_hazardous(r)).count();
    let hazardous_fraction = hazardous as f64 / risks.len() as f64;
    let true_boxes = match objective.analytic_hazard_boxes() {
        Some(b) => b,
        None => cluster_boxes(&grid, &risks, &space),
    };
    Ok(GroundTruth {
        objective: objective.name().to_string(),
        space,
        grid,
        risks,
        hazardous_fraction,
        true_boxes,
    })
}

/// Bounding boxes of face-connected components of hazardous grid points.
fn cluster_boxes(grid: &GridIndexer, risks: &[f64], space: &SearchSpace) -> Vec<HazardBox> {
    let dim = space.dim();
    let res = grid.resolution();
    let strides: Vec<usize> = (0..dim).map(|d| grid.stride(d)).collect();
    let mut seen = vec![false; risks.len()];
    let mut boxes = Vec::new();
    let mut queue = VecDeque::new();
    let mut p = vec![0.0; dim];

    for start in 0..risks.len() {
        if seen[start] || !space.is_hazardous(risks[start]) {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut lower = vec![f64::INFINITY; dim];
        let mut upper = vec![f64::NEG_INFINITY; dim];
        let mut count = 0;
        while let Some(i) = queue.pop_front() {
            count += 1;
            grid.point_into(i, &mut p);
            for d in 0..dim {
                lower[d] = lower[d].min(p[d]);
                upper[d] = upper[d].max(p[d]);
                let k = (i / strides[d]) % res[d];
                let mut push = |j: usize| {
                    if !seen[j] && space.is_hazardous(risks[j]) {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                };
                if k > 0 {
                    push(i - strides[d]);
                }
                if k + 1 < res[d] {
                    push(i + strides[d]);
                }
            }
        }
        boxes.push(HazardBox {
            lower,
            upper,
            member_count: count,
        });
    }
    boxes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{FnObjective, GaussianObjective};

    #[test]
    fn resolution_two_counts_corners() {
        for dim in 1..=4 {
            let obj = GaussianObjective::standard(dim).unwrap();
            let gt = grid_oracle(&obj, &vec![2; dim], DEFAULT_GRID_CAP).unwrap();
            assert_eq!(gt.len(), 1 << dim);
        }
    }

    #[test]
    fn rejects_degenerate_and_oversized_grids() {
        let obj = GaussianObjective::standard(2).unwrap();
        assert!(grid_oracle(&obj, &[1, 5], DEFAULT_GRID_CAP).is_err());
        assert!(matches!(
            grid_oracle(&obj, &[1000, 1000], 10_000),
            Err(Error::GridTooLarge { .. })
        ));
    }

    #[test]
    fn point_order_is_row_major() {
        let s = SearchSpace::new(vec![0.0, 0.0], vec![1.0, 2.0], 0.5, (0.0, 1.0)).unwrap();
        let g = GridIndexer::new(&s, &[2, 3], 100).unwrap();
        assert_eq!(g.point(0), vec![0.0, 0.0]);
        assert_eq!(g.point(1), vec![0.0, 1.0]);
        assert_eq!(g.point(5), vec![1.0, 2.0]);
        let c = GridIndexer::new(&s, &[1, 1], 100).unwrap();
        assert_eq!(c.point(0), vec![0.5, 1.0]);
    }

    #[test]
    fn gaussian_2d_fraction_matches_disk_area() {
        let obj = GaussianObjective::standard(2).unwrap();
        let gt = grid_oracle(&obj, &[200, 200], DEFAULT_GRID_CAP).unwrap();
        let r2 = -18.0 * 0.8f64.ln();
        let analytic = 2.0 * std::f64::consts::PI * r2 / 1600.0;
        assert!(
            (gt.hazardous_fraction - analytic).abs() / analytic < 0.05,
            "grid {} vs analytic {analytic}",
            gt.hazardous_fraction
        );
    }

    #[test]
    fn clusters_found_without_analytic_boxes() {
        let s = SearchSpace::new(vec![0.0, 0.0], vec![10.0, 10.0], 0.5, (0.0, 1.0)).unwrap();
        let obj = FnObjective::new("two-squares", s, |p: &[f64]| {
            let a = p[0] <= 3.0 && p[1] <= 3.0;
            let b = p[0] >= 7.0 && p[1] >= 6.0;
            Ok(if a || b { 1.0 } else { 0.0 })
        });
        let gt = grid_oracle(&obj, &[11, 11], DEFAULT_GRID_CAP).unwrap();
        assert_eq!(gt.true_boxes.len(), 2);
        assert_eq!(gt.true_boxes[0].lower, vec![0.0, 0.0]);
        assert_eq!(gt.true_boxes[0].upper, vec![3.0, 3.0]);
        assert_eq!(gt.true_boxes[1].lower, vec![7.0, 6.0]);
        assert_eq!(gt.true_boxes[1].upper, vec![10.0, 10.0]);
    }
}
