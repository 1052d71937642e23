//! Regular tensor grids over boxes in x′ and sampled expression profiles.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::{EvalError, Expr};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("grid needs at least 2 points per axis (axis {axis} has {count})")]
    Resolution { axis: usize, count: usize },
    #[error("invalid range [{lo}, {hi}] on axis {axis}")]
    Range { axis: usize, lo: f64, hi: f64 },
    #[error("box has {ranges} axes but {counts} resolutions were given")]
    Shape { ranges: usize, counts: usize },
    #[error("evaluation failed at {point:?}: {source}")]
    Eval { point: Vec<f64>, source: EvalError },
}

/// Uniform tensor grid, endpoints included. Points are enumerated row-major:
/// the last axis varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxGrid {
    ranges: Vec<(f64, f64)>,
    counts: Vec<usize>,
}

impl BoxGrid {
    pub fn new(ranges: Vec<(f64, f64)>, counts: Vec<usize>) -> Result<BoxGrid, SampleError> {
        if ranges.len() != counts.len() {
            return Err(SampleError::Shape { ranges: ranges.len(), counts: counts.len() });
        }
        for (axis, (&(lo, hi), &count)) in ranges.iter().zip(&counts).enumerate() {
            if count < 2 {
                return Err(SampleError::Resolution { axis, count });
            }
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(SampleError::Range { axis, lo, hi });
            }
        }
        Ok(BoxGrid { ranges, counts })
    }

    /// The same range and resolution on every axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, count: usize) -> Result<BoxGrid, SampleError> {
        BoxGrid::new(vec![(lo, hi); dim], vec![count; dim])
    }

    pub fn dim(&self) -> usize {
        self.ranges.len()
    }

    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.ranges
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axis_value(&self, axis: usize, i: usize) -> f64 {
        let (lo, hi) = self.ranges[axis];
        let n = self.counts[axis];
        if i + 1 == n {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    }

    pub fn axis_values(&self, axis: usize) -> Vec<f64> {
        (0..self.counts[axis]).map(|i| self.axis_value(axis, i)).collect()
    }

    /// Coordinates of the point with row-major index `flat`.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut rest = flat;
        let mut out = vec![0.0; self.dim()];
        for axis in (0..self.dim()).rev() {
            let n = self.counts[axis];
            out[axis] = self.axis_value(axis, rest % n);
            rest /= n;
        }
        out
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }
}

/// Values of an expression on a grid, with exact extrema over the samples.
/// Ties resolve to the first point in row-major order.
#[derive(Debug, Clone, Serialize)]
pub struct ExprGridProfile {
    pub grid: BoxGrid,
    #[serde(skip)]
    pub values: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub argmin: Vec<f64>,
    pub argmax: Vec<f64>,
}

impl ExprGridProfile {
    /// Builds a profile from values already sampled on `grid` in row-major order.
    pub fn from_values(grid: BoxGrid, values: Vec<f64>) -> ExprGridProfile {
        assert_eq!(grid.len(), values.len(), "one value per grid point");
        let (mut imin, mut imax) = (0, 0);
        for (i, &v) in values.iter().enumerate() {
            if v < values[imin] {
                imin = i;
            }
            if v > values[imax] {
                imax = i;
            }
        }
        ExprGridProfile {
            min: values[imin],
            max: values[imax],
            argmin: grid.point(imin),
            argmax: grid.point(imax),
            grid,
            values,
        }
    }

    /// Largest absolute sampled value.
    pub fn sup_abs(&self) -> f64 {
        self.max.abs().max(self.min.abs())
    }
}

/// Evaluates `e` at every grid point. The first failing point in row-major
/// order is reported.
pub fn sample_expr(e: &Expr, grid: &BoxGrid) -> Result<ExprGridProfile, SampleError> {
    let values: Vec<Result<f64, EvalError>> = (0..grid.len())
        .into_par_iter()
        .map(|i| e.eval(&grid.point(i)))
        .collect();
    let mut out = Vec::with_capacity(values.len());
    for (i, v) in values.into_iter().enumerate() {
        match v {
            Ok(v) => out.push(v),
            Err(source) => return Err(SampleError::Eval { point: grid.point(i), source }),
        }
    }
    Ok(ExprGridProfile::from_values(grid.clone(), out))
}
