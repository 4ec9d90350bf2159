use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Vector};
use crate::scalar::{all_finite, Scalar};

use super::{draw_edge, with_kernel, EdgeParams, FamilySpec, Kernel, Sign, MAX_ARITY};

/// An `m × n` grid of parameterised edge functions sharing one family.
///
/// Parameters are stored row-major by edge, `arity` consecutive values per
/// edge. Sign constants are fixed at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalMatrix<T> {
    spec: FamilySpec,
    rows: usize,
    cols: usize,
    params: Vec<T>,
    signs: Option<Vec<T>>,
}

impl<T: Scalar> FunctionalMatrix<T> {
    pub fn init<R: Rng + ?Sized>(spec: FamilySpec, rows: usize, cols: usize, rng: &mut R) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("functional matrix"));
        }
        let a = spec.param_arity;
        let mut params = vec![T::zero(); rows * cols * a];
        let mut signs = spec.has_sign_constant.then(|| Vec::with_capacity(rows * cols));
        for edge in params.chunks_exact_mut(a) {
            let sign = draw_edge(spec.id, rng, edge);
            if let (Some(s), Some(sign)) = (signs.as_mut(), sign) {
                s.push(sign.value());
            }
        }
        Ok(Self {
            spec,
            rows,
            cols,
            params,
            signs,
        })
    }

    /// Builds a matrix from explicit edge parameters (row-major, `arity` per
    /// edge) and, for signed families, one sign per edge.
    pub fn from_parts(
        spec: FamilySpec,
        rows: usize,
        cols: usize,
        params: Vec<T>,
        signs: Option<Vec<Sign>>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("functional matrix"));
        }
        let expected = rows * cols * spec.param_arity;
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: params.len(),
            });
        }
        if !all_finite(&params) {
            return Err(Error::NonFinite("functional matrix parameters"));
        }
        let signs = match (spec.has_sign_constant, signs) {
            (true, Some(s)) if s.len() == rows * cols => Some(s.into_iter().map(Sign::value).collect()),
            (true, Some(s)) => {
                return Err(Error::DimensionMismatch {
                    expected: rows * cols,
                    actual: s.len(),
                })
            }
            (true, None) => return Err(Error::Config(format!("{} requires sign constants", spec.id))),
            (false, Some(_)) => return Err(Error::Config(format!("{} takes no sign constants", spec.id))),
            (false, None) => None,
        };
        Ok(Self {
            spec,
            rows,
            cols,
            params,
            signs,
        })
    }

    /// Same-shaped signed-family matrix with every sign set to `sign`.
    pub fn uniform_signs(spec: FamilySpec, rows: usize, cols: usize, params: Vec<T>, sign: Sign) -> Result<Self> {
        let signs = spec.has_sign_constant.then(|| vec![sign; rows * cols]);
        Self::from_parts(spec, rows, cols, params, signs)
    }

    pub fn spec(&self) -> FamilySpec {
        self.spec
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn arity(&self) -> usize {
        self.spec.param_arity
    }

    pub fn edge(&self, i: usize, j: usize) -> EdgeParams<T> {
        let e = i * self.cols + j;
        let a = self.arity();
        let sign = self.signs.as_ref().map(|s| {
            if s[e] < T::zero() {
                Sign::Negative
            } else {
                Sign::Positive
            }
        });
        EdgeParams::new(self.spec, &self.params[e * a..(e + 1) * a], sign)
            .expect("stored edge matches its family")
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeParams<T>> + '_ {
        (0..self.rows).flat_map(move |i| (0..self.cols).map(move |j| self.edge(i, j)))
    }

    /// All trainable parameters, row-major by edge.
    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn check_cols(&self, len: usize) -> Result<()> {
        if len != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: len,
            });
        }
        Ok(())
    }

    /// Transfer computation: `out[i] = Σ_j F[i][j](v[j])`.
    pub fn transfer_apply(&self, v: &Vector<T>) -> Result<Vector<T>> {
        self.check_cols(v.len())?;
        let mut out = vec![T::zero(); self.rows];
        self.transfer_into(v.as_slice(), &mut out)?;
        Vector::new(out)
    }

    /// Grid of `∂F[i][j]/∂x` evaluated at `v[j]`.
    pub fn transfer_apply_d_dx(&self, v: &Vector<T>) -> Result<DenseMatrix<T>> {
        self.check_cols(v.len())?;
        let x = v.as_slice();
        let a = self.arity();
        let mut out = Vec::with_capacity(self.rows * self.cols);
        with_kernel!(self.spec.id, K => {
            for e in 0..self.rows * self.cols {
                let u = self.signs.as_ref().map_or(T::one(), |s| s[e]);
                out.push(<K as Kernel<T>>::d_dx(&self.params[e * a..(e + 1) * a], u, x[e % self.cols]));
            }
        });
        DenseMatrix::new(self.rows, self.cols, out).map_err(|_| Error::NonFinite("input derivative grid"))
    }

    /// Grid of `∂F[i][j]/∂p_k` evaluated at `v[j]`. No summation: every edge
    /// keeps its own derivative.
    pub fn transfer_apply_d_dparam(&self, v: &Vector<T>, k: usize) -> Result<DenseMatrix<T>> {
        self.check_cols(v.len())?;
        let a = self.arity();
        if k >= a {
            return Err(Error::InvalidParameterIndex {
                family: self.spec.id,
                index: k,
                arity: a,
            });
        }
        let x = v.as_slice();
        let mut out = Vec::with_capacity(self.rows * self.cols);
        let mut dp = [T::zero(); MAX_ARITY];
        with_kernel!(self.spec.id, K => {
            for e in 0..self.rows * self.cols {
                let u = self.signs.as_ref().map_or(T::one(), |s| s[e]);
                <K as Kernel<T>>::d_dparams(&self.params[e * a..(e + 1) * a], u, x[e % self.cols], &mut dp);
                out.push(dp[k]);
            }
        });
        DenseMatrix::new(self.rows, self.cols, out).map_err(|_| Error::NonFinite("parameter derivative grid"))
    }

    /// Unchecked-shape transfer into `out`; fails only on non-finite rows.
    pub(crate) fn transfer_into(&self, x: &[T], out: &mut [T]) -> Result<()> {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        with_kernel!(self.spec.id, K => transfer_rows::<T, K>(self, x, out));
        if all_finite(out) {
            Ok(())
        } else {
            Err(Error::NonFinite("transfer computation"))
        }
    }

    /// Accumulates the back-propagated quantities of a batch of samples.
    ///
    /// `gs[b][i]` is sample `b`'s error signal already multiplied by the
    /// activation slope. Adds `scale · g[i] · ∂F[i][j]/∂p_k` to `param_acc` and,
    /// when requested, `Σ_i g[i] · ∂F[i][j]/∂x` to `input_deltas[b][j]`.
    /// Rows are the outer loop so each row's parameters stay in cache.
    pub(crate) fn accumulate_backward_batch(
        &self,
        xs: &[&[T]],
        gs: &[&[T]],
        scale: T,
        param_acc: &mut [T],
        input_deltas: Option<&mut [&mut [T]]>,
    ) -> Result<()> {
        debug_assert_eq!(param_acc.len(), self.params.len());
        debug_assert_eq!(xs.len(), gs.len());
        debug_assert!(xs.iter().all(|x| x.len() == self.cols));
        debug_assert!(gs.iter().all(|g| g.len() == self.rows));
        with_kernel!(self.spec.id, K => backward_rows::<T, K>(self, xs, gs, scale, param_acc, input_deltas));
        Ok(())
    }
}

#[inline]
fn transfer_rows<T: Scalar, K: Kernel<T>>(m: &FunctionalMatrix<T>, x: &[T], out: &mut [T]) {
    match m.arity() {
        1 => transfer_rows_n::<T, K, 1>(m, x, out),
        2 => transfer_rows_n::<T, K, 2>(m, x, out),
        _ => transfer_rows_n::<T, K, 3>(m, x, out),
    }
}

fn transfer_rows_n<T: Scalar, K: Kernel<T>, const A: usize>(m: &FunctionalMatrix<T>, x: &[T], out: &mut [T]) {
    let n = m.cols;
    let (edges, _) = m.params.as_chunks::<A>();
    for (i, (o, row)) in out.iter_mut().zip(edges.chunks_exact(n)).enumerate() {
        let mut acc = T::zero();
        match m.signs.as_deref() {
            Some(s) => {
                for ((p, &u), &xj) in row.iter().zip(&s[i * n..(i + 1) * n]).zip(x) {
                    acc += K::eval(p, u, xj);
                }
            }
            None => {
                for (p, &xj) in row.iter().zip(x) {
                    acc += K::eval(p, T::one(), xj);
                }
            }
        }
        *o = acc;
    }
}

fn backward_rows<T: Scalar, K: Kernel<T>>(
    m: &FunctionalMatrix<T>,
    xs: &[&[T]],
    gs: &[&[T]],
    scale: T,
    param_acc: &mut [T],
    input_deltas: Option<&mut [&mut [T]]>,
) {
    match m.arity() {
        1 => backward_rows_n::<T, K, 1>(m, xs, gs, scale, param_acc, input_deltas),
        2 => backward_rows_n::<T, K, 2>(m, xs, gs, scale, param_acc, input_deltas),
        _ => backward_rows_n::<T, K, 3>(m, xs, gs, scale, param_acc, input_deltas),
    }
}

fn backward_rows_n<T: Scalar, K: Kernel<T>, const A: usize>(
    m: &FunctionalMatrix<T>,
    xs: &[&[T]],
    gs: &[&[T]],
    scale: T,
    param_acc: &mut [T],
    mut input_deltas: Option<&mut [&mut [T]]>,
) {
    let n = m.cols;
    let (edges, _) = m.params.as_chunks::<A>();
    let (acc_edges, _) = param_acc.as_chunks_mut::<A>();
    let rows = edges.chunks_exact(n).zip(acc_edges.chunks_exact_mut(n));
    for (i, (row, acc_row)) in rows.enumerate() {
        let signs = m.signs.as_deref().map(|s| &s[i * n..(i + 1) * n]);
        for (b, (&x, g)) in xs.iter().zip(gs).enumerate() {
            let gi = g[i];
            if gi == T::zero() {
                continue;
            }
            let sg = scale * gi;
            match (input_deltas.as_deref_mut(), signs) {
                (Some(deltas), signs) => {
                    let edges = row.iter().zip(acc_row.iter_mut()).zip(x).zip(deltas[b].iter_mut());
                    for (j, (((p, acc), &xj), dj)) in edges.enumerate() {
                        let u = signs.map_or(T::one(), |s| s[j]);
                        let mut dp = [T::zero(); MAX_ARITY];
                        let dx = K::grads(p, u, xj, &mut dp);
                        for k in 0..A {
                            acc[k] += sg * dp[k];
                        }
                        *dj += gi * dx;
                    }
                }
                (None, Some(s)) => {
                    for (((p, acc), &xj), &u) in row.iter().zip(acc_row.iter_mut()).zip(x).zip(s) {
                        let mut dp = [T::zero(); MAX_ARITY];
                        K::grads(p, u, xj, &mut dp);
                        for k in 0..A {
                            acc[k] += sg * dp[k];
                        }
                    }
                }
                (None, None) => {
                    for ((p, acc), &xj) in row.iter().zip(acc_row.iter_mut()).zip(x) {
                        let mut dp = [T::zero(); MAX_ARITY];
                        K::grads(p, T::one(), xj, &mut dp);
                        for k in 0..A {
                            acc[k] += sg * dp[k];
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::FamilyId;
    use crate::linalg::matvec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vec_of(xs: &[f64]) -> Vector<f64> {
        Vector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn squares_sum_per_row() {
        let m = FunctionalMatrix::from_parts(FamilyId::F17.spec(), 2, 2, vec![1.0; 4], None).unwrap();
        assert_eq!(m.transfer_apply(&vec_of(&[1.0, 2.0])).unwrap(), vec_of(&[5.0, 5.0]));
    }

    #[test]
    fn lin_reduces_to_matvec() {
        let w = vec![0.5, -1.0, 2.0, 0.25, 3.0, -0.75];
        let m = FunctionalMatrix::from_parts(FamilyId::Lin.spec(), 2, 3, w.clone(), None).unwrap();
        let dense = DenseMatrix::new(2, 3, w).unwrap();
        let v = vec_of(&[1.0, -2.0, 0.5]);
        assert_eq!(m.transfer_apply(&v).unwrap(), matvec(&dense, &v).unwrap());
        assert_eq!(m.transfer_apply_d_dx(&v).unwrap(), dense);
        let dp = m.transfer_apply_d_dparam(&v, 0).unwrap();
        for i in 0..2 {
            assert_eq!(dp.row(i), v.as_slice());
        }
    }

    #[test]
    fn ellipse_matrix_rows() {
        // rows of the three-ellipse example at (2, 3)
        let params = vec![0.50, 2.00, 1.41, 3.00, 1.33, 2.50, 0.67, 2.00, 1.00, 3.00, 1.00, 4.00];
        let m = FunctionalMatrix::from_parts(FamilyId::F19.spec(), 3, 2, params, None).unwrap();
        let out = m.transfer_apply(&vec_of(&[2.0, 3.0])).unwrap();
        // hand values: 1.33²·0.25 + 0.67²·1, 1·1 + 1·1
        let expected = [0.0, 0.442225 + 0.4489, 2.0];
        for (o, e) in out.iter().zip(expected) {
            assert!((o - e).abs() < 1e-12, "{o} vs {e}");
        }
    }

    #[test]
    fn dead_edges_have_zero_input_grid() {
        let m = FunctionalMatrix::uniform_signs(FamilyId::F06.spec(), 3, 4, vec![-0.5; 12], Sign::Positive).unwrap();
        let g = m.transfer_apply_d_dx(&vec_of(&[1.0, -2.0, 3.0, 0.0])).unwrap();
        assert!(g.as_slice().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn shape_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m: FunctionalMatrix<f64> = FunctionalMatrix::init(FamilyId::F03.spec(), 2, 3, &mut rng).unwrap();
        assert!(m.transfer_apply(&vec_of(&[1.0, 2.0])).is_err());
        assert!(m.transfer_apply_d_dparam(&vec_of(&[1.0, 2.0, 3.0]), 2).is_err());
        assert!(FunctionalMatrix::<f64>::init(FamilyId::F03.spec(), 0, 3, &mut rng).is_err());
        assert!(FunctionalMatrix::<f64>::from_parts(FamilyId::F06.spec(), 1, 1, vec![1.0], None).is_err());
    }

    #[test]
    fn overflow_surfaces_from_transfer() {
        let m = FunctionalMatrix::from_parts(FamilyId::F05.spec(), 1, 1, vec![1.0, 1000.0], None).unwrap();
        assert!(m.transfer_apply(&vec_of(&[1.0])).unwrap_err().is_divergence());
    }

    #[test]
    fn signs_survive_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m: FunctionalMatrix<f64> = FunctionalMatrix::init(FamilyId::F20.spec(), 4, 5, &mut rng).unwrap();
        let signs: Vec<Sign> = m.edges().map(|e| e.sign().unwrap()).collect();
        let rebuilt = FunctionalMatrix::from_parts(m.spec(), 4, 5, m.params().to_vec(), Some(signs)).unwrap();
        assert_eq!(rebuilt, m);
    }
}
