//! Hand-built classifiers whose hidden units carve out conic regions.
//!
//! With the F19 family each hidden unit computes `Σ_j p_j²(x_j − q_j)² + b`,
//! the left-hand side of an axis-aligned ellipse equation. A step activation
//! turns it into an outside-the-ellipse indicator, and a linear readout can
//! then take unions or intersections of the regions.

use crate::error::{Error, Result};
use crate::families::{FamilyId, FunctionalMatrix};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

use super::{Activation, HiddenLayer};

/// Functional hidden layer plus a single step-activated linear output unit.
#[derive(Clone, Debug, PartialEq)]
pub struct ConicClassifier<T> {
    hidden: HiddenLayer<T>,
    readout: DenseMatrix<T>,
    readout_bias: T,
}

impl<T: Scalar> ConicClassifier<T> {
    pub fn new(hidden: HiddenLayer<T>, readout: DenseMatrix<T>, readout_bias: T) -> Result<Self> {
        if readout.rows() != 1 || readout.cols() != hidden.outputs() {
            return Err(Error::DimensionMismatch {
                expected: hidden.outputs(),
                actual: readout.cols(),
            });
        }
        Ok(Self {
            hidden,
            readout,
            readout_bias,
        })
    }

    /// Three ellipses in the plane, output 1 inside their union:
    ///
    /// ```text
    /// ellipse   p1     q1     p2     q2
    ///    1     0.50   2.00   1.41   3.00
    ///    2     1.33   2.50   0.67   2.00
    ///    3     1.00   3.00   1.00   4.00
    /// ```
    ///
    /// Hidden biases are −1; the readout is `step(−y1 − y2 − y3 + 2.5)`.
    pub fn ellipse_union() -> Self {
        let params: Vec<T> = ELLIPSES
            .iter()
            .flat_map(|e| [e.0, e.1, e.2, e.3])
            .map(T::lit)
            .collect();
        let matrix = FunctionalMatrix::from_parts(FamilyId::F19.spec(), 3, 2, params, None)
            .expect("static ellipse parameters");
        let hidden = HiddenLayer::new(matrix, vec![T::lit(-1.0); 3], Activation::Step)
            .expect("static ellipse layer");
        let readout = DenseMatrix::new(1, 3, vec![T::lit(-1.0); 3]).expect("static readout");
        Self::new(hidden, readout, T::lit(2.5)).expect("static ellipse model")
    }

    pub fn hidden(&self) -> &HiddenLayer<T> {
        &self.hidden
    }

    pub fn hidden_outputs(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.hidden.forward(x)?.output)
    }

    /// Output unit value, `0` or `1`.
    pub fn classify(&self, x: &[T]) -> Result<T> {
        let y = self.hidden_outputs(x)?;
        let u = self
            .readout
            .row(0)
            .iter()
            .zip(&y)
            .fold(self.readout_bias, |acc, (&w, &yi)| acc + w * yi);
        Ok(Activation::Step.apply(u))
    }
}

/// `(p1, q1, p2, q2)` of each ellipse in [`ConicClassifier::ellipse_union`].
pub const ELLIPSES: [(f64, f64, f64, f64); 3] = [
    (0.50, 2.00, 1.41, 3.00),
    (1.33, 2.50, 0.67, 2.00),
    (1.00, 3.00, 1.00, 4.00),
];

/// Axis-aligned rectangular sampling grid, inclusive of both ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub x_steps: usize,
    pub y_steps: usize,
}

impl GridSpec {
    pub fn square(lo: f64, hi: f64, steps: usize) -> Self {
        Self {
            x_range: (lo, hi),
            y_range: (lo, hi),
            x_steps: steps,
            y_steps: steps,
        }
    }

    fn coord(range: (f64, f64), steps: usize, k: usize) -> f64 {
        if steps <= 1 {
            range.0
        } else {
            range.0 + (range.1 - range.0) * k as f64 / (steps - 1) as f64
        }
    }

    /// Grid points, x varying slowest.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.x_steps).flat_map(move |i| {
            (0..self.y_steps).map(move |j| {
                (
                    Self::coord(self.x_range, self.x_steps, i),
                    Self::coord(self.y_range, self.y_steps, j),
                )
            })
        })
    }
}

/// `(x1, x2, z)` for every grid point.
pub fn boundary_grid<T: Scalar>(model: &ConicClassifier<T>, grid: &GridSpec) -> Result<Vec<(f64, f64, T)>> {
    grid.points()
        .map(|(x1, x2)| Ok((x1, x2, model.classify(&[T::lit(x1), T::lit(x2)])?)))
        .collect()
}
