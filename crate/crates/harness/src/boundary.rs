//! Posterior grids over the input plane of two-feature models.

use std::fmt::Write as _;

use relaxlab::nn::{Matrix, MlpModel};
use relaxlab::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Points per axis, at least 1.
    pub steps: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("grid needs at least one step per axis".into()));
        }
        for (lo, hi) in [self.x_range, self.y_range] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("invalid grid range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    fn axis(range: (f64, f64), steps: usize) -> Vec<f64> {
        if steps == 1 {
            return vec![(range.0 + range.1) / 2.0];
        }
        let h = (range.1 - range.0) / (steps - 1) as f64;
        (0..steps).map(|i| range.0 + h * i as f64).collect()
    }

    /// Grid points, `x` varying slowest.
    pub fn points(&self) -> Matrix {
        let xs = Self::axis(self.x_range, self.steps);
        let ys = Self::axis(self.y_range, self.steps);
        let data = xs.iter().flat_map(|&x| ys.iter().flat_map(move |&y| [x, y])).collect();
        Matrix::from_vec(self.steps * self.steps, 2, data).expect("grid shape")
    }
}

/// Posterior scores on the grid; one row per point.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryGrid {
    pub points: Matrix,
    pub scores: Matrix,
    pub argmax: Vec<usize>,
}

pub fn boundary_grid(model: &MlpModel, grid: &GridSpec) -> Result<BoundaryGrid> {
    if model.input_dim() != 2 {
        return Err(Error::Dimension(format!(
            "decision boundaries need a model with 2 inputs, this one has {}",
            model.input_dim()
        )));
    }
    grid.validate()?;
    let points = grid.points();
    let p = model.predict(&points)?;
    Ok(BoundaryGrid {
        argmax: p.argmax(),
        scores: p.into_matrix(),
        points,
    })
}

impl BoundaryGrid {
    pub fn to_csv(&self) -> String {
        let classes = self.scores.cols();
        let mut out = String::from("x,y");
        for c in 0..classes {
            let _ = write!(out, ",score_{c}");
        }
        out.push_str(",argmax\n");
        for (i, (pt, row)) in self.points.row_iter().zip(self.scores.row_iter()).enumerate() {
            let _ = write!(out, "{},{}", pt[0], pt[1]);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{}", self.argmax[i]);
        }
        out
    }

    /// Share of grid points whose top posterior is below `level`.
    pub fn low_confidence_fraction(&self, level: f64) -> f64 {
        let low = self
            .scores
            .row_iter()
            .filter(|r| r.iter().copied().fold(f64::MIN, f64::max) < level)
            .count();
        low as f64 / self.scores.rows().max(1) as f64
    }
}

/// Bounding box of the first two feature columns, padded by 10% on each side.
pub fn data_extent(features: &Matrix) -> ((f64, f64), (f64, f64)) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for r in features.row_iter() {
        for k in 0..2.min(r.len()) {
            lo[k] = lo[k].min(r[k]);
            hi[k] = hi[k].max(r[k]);
        }
    }
    let pad = |k: usize| {
        let w = (hi[k] - lo[k]).max(1e-9) * 0.1;
        (lo[k] - w, hi[k] + w)
    };
    (pad(0), pad(1))
}
