//! Closed-form value and derivatives of each stateless family.
//!
//! `p` holds the edge's trainable parameters in order `(p, q, r)`; `u` is the
//! sign constant, or `1` for families without one.

use crate::scalar::Scalar;

use super::MAX_ARITY;

pub(crate) trait Kernel<T: Scalar> {
    fn eval(p: &[T], u: T, x: T) -> T;

    /// Writes `∂F/∂p_k` into `dp[k]` and returns `∂F/∂x`.
    fn grads(p: &[T], u: T, x: T, dp: &mut [T]) -> T;

    #[inline]
    fn d_dx(p: &[T], u: T, x: T) -> T {
        let mut scratch = [T::zero(); MAX_ARITY];
        Self::grads(p, u, x, &mut scratch)
    }

    #[inline]
    fn d_dparams(p: &[T], u: T, x: T, dp: &mut [T]) {
        Self::grads(p, u, x, dp);
    }
}

#[inline]
fn two<T: Scalar>() -> T {
    T::one() + T::one()
}

#[inline]
fn three<T: Scalar>() -> T {
    T::lit(3.0)
}

/// Numerically stable logistic sigmoid.
#[inline]
pub(crate) fn logistic<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

#[inline]
fn rect<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        z
    } else {
        T::zero()
    }
}

pub(crate) struct F01;
pub(crate) struct F02;
pub(crate) struct F03;
pub(crate) struct F04;
pub(crate) struct F05;
pub(crate) struct F06;
pub(crate) struct F07;
pub(crate) struct F08;
pub(crate) struct F09;
pub(crate) struct F10;
pub(crate) struct F11;
pub(crate) struct F12;
pub(crate) struct F13;
pub(crate) struct F14;
pub(crate) struct F15;
pub(crate) struct F16;
pub(crate) struct F17;
pub(crate) struct F18;
pub(crate) struct F19;
pub(crate) struct F20;
pub(crate) struct Lin;

impl<T: Scalar> Kernel<T> for F01 {
    #[inline]
    fn eval(p: &[T], _u: T, x: T) -> T {
        p[0] * p[0] * x
    }
    #[inline]
    fn grads(p: &[T], _u: T, x: T, dp: &mut [T]) -> T {
        dp[0] = two::<T>() * p[0] * x;
        p[0] * p[0]
    }
}

impl<T: Scalar> Kernel<T> for F02 {
    #[inline]
    fn eval(p: &[T], _u: T, x: T) -> T {
        p[0] * p[0] * p[0] * x
    }
    #[inline]
    fn grads(p: &[T], _u: T, x: T, dp: &mut [T]) -> T {
        let sq = p[0] * p[0];
        dp[0] = three::<T>() * sq * x;
        sq * p[0]
    }
}

impl<T: Scalar> Kernel<T> for F03 {
    #[inline]
    fn eval(p: &[T], _u: T, x: T) -> T {
        (p[0] * x + p[1]) * x
    }
    #[inline]
    fn grads(p: &[T], _u: T, x: T, dp: &mut [T]) -> T {
        dp[0] = x * x;
        dp[1] = x;
        two::<T>() * p[0] * x + p[1]
    }
}

impl<T: Scalar> Kernel<T> for F04 {
    #[inline]
    fn eval(p: &[T], _u: T, x: T) -> T {
        ((p[0] * x + p[1]) * x + p[2]) * x
    }
    #[inline]
    fn grads(p: &[T], _u: T, x: T, dp: &mut [T]) -> T {
        let x2 = x * x;
        dp[0] = x2 * x;
        dp[1] = x2;
        dp[2] = x;
        three::<T>() * p[0] * x2 + two::<T>() * p[1] * x + p[2]
    }
}

impl<T: Scalar> Kernel<T> for F05 {
    #[inline]
    fn eval(p: &[T], _u: T, x: T) -> T {
        p[0] * (p[1] * x).exp()
    }
    #[inline]
    fn grads(p: &[T], _u: T, x: T, dp: &mut [T]) -> T {
        let e = (p[1] * x).exp();
        dp[0] = e;
        dp[1] = p[0] * x * e;
        p[0] * p[1] * e
    }
}

impl<T: Scalar> Kernel<T> for F06 {
    #[inline]
    fn eval(p: &[T], u: T, x: T) -> T {
        rect(p[0]) * u * x
    }
    #[inline]
    fn grads(p: &[T], u: T, x: T, dp: &mut [T]) -> T {
        if p[0] >= T::zero() {
            dp[0] = u * x;
            p[0] * u
        } else {
            dp[0] = T::zero();
            T::zero()
        }
    }
}

impl<T: Scalar> Kernel<T> for F07 {
    #[inline]
    fn eval(p: &[T], u: T, x: T) -> T {
        rect(p[0]) * u * x
    }
    #[inline]
    fn grads(p: &[T], u: T, x: T, dp: &mut [T]) -> T {
        // the rectifier's slope is pinned to 1 for the parameter update only
        dp[0] = u * x;
        rect(p[0]) * u
    }
}

impl<T: Scalar> Kernel<T> for F08 {
    #[inline]
    fn eval(p: &[T], u: T, x: T) -> T {
        rect(p[0] * x + p[1]) * u
    }
    #[inline]
    fn grads(p: &[T], u: T, x: T, dp: &mut [T]) -> T {
        if p[0] * x + p[1] >= T::zero() {
            dp[0] = u * x;
            dp[1] = u;
            p[0] * u
        } else {
            dp[0] = T::zero();
            dp[1] = T::zero();
            T::zero()
        }
    }
}

impl<T: Scalar> Kernel<T> for F09 {
    #[inline]
    fn eval(p: &[T], _u: T, x: T) -> T {
        p[0] * rect(p[1] * x + p[2])
    }
    #[inline]
    fn grads(p: &[T], _u: T, x: T, dp: &mut [T]) -> T {
        let z = p[1] * x + p[2];
        if z >= T::zero() {
            dp[0] = z;
            dp[1] = p[0] * x;
            dp[2] = p[0];
            p[0] * p[1]
        } else {
            dp[0] = T::zero();
            dp[1] = T::zero();
            dp[2] = T::zero();
            T::zero()
        }
    }
}

impl<T: Scalar> Kernel<T> for F10 {
    #[inline]
    fn eval(p: &[T], u: T, x: T) -> T {
        logistic(p[0] * x + p[1]) * u
    }
    #[inline]
    fn grads(p: &[T], u: T, x: T, dp: &mut [T]) -> T {
        let s = logistic(p[0] * x + p[1]);
        let g = u * s * (T::one() - s);
        dp[0] = g * x;
        dp[1] = g;
        g * p[0]
    }
}

impl<T: Scalar> Kernel<T> for F11 {
    #[inline]
    fn eval(p: &[T], _u: T, x: T) -> T {
        p[0] * logistic(p[1] * x + p[2])
    }
    #[inline]
    fn grads(p: &[T], _u: T, x: T, dp: &mut [T]) -> T {
        let s = logistic(p[1] * x + p[2]);
        let g = p[0] * s * (T::one() - s);
        dp[0] = s;
        dp[1] = g * x;
        dp[2] = g;
        g * p[1]
    }
}

impl<T: Scalar> Kernel<T> for F12 {
    #[inline]
    fn eval(p: &[T], _u: T, x: T) -> T {
        p[0] * (p[1] * x + p[2]).sin()
    }
    #[inline]
    fn grads(p: &[T], _u: T, x: T, dp: &mut [T]) -> T {
        let (s, c) = (p[1] * x + p[2]).sin_cos();
        let g = p[0] * c;
        dp[0] = s;
        dp[1] = g * x;
        dp[2] = g;
        g * p[1]
    }
}

impl<T: Scalar> Kernel<T> for F13 {
    #[inline]
    fn eval(p: &[T], _u: T, x: T) -> T {
        p[0] * (p[1] * x + p[2]).cos()
    }
    #[inline]
    fn grads(p: &[T], _u: T, x: T, dp: &mut [T]) -> T {
        let (s, c) = (p[1] * x + p[2]).sin_cos();
        let g = -p[0] * s;
        dp[0] = c;
        dp[1] = g * x;
        dp[2] = g;
        g * p[1]
    }
}

impl<T: Scalar> Kernel<T> for F14 {
    #[inline]
    fn eval(p: &[T], _u: T, x: T) -> T {
        p[0] * (p[1] * x + p[2]).sinh()
    }
    #[inline]
    fn grads(p: &[T], _u: T, x: T, dp: &mut [T]) -> T {
        let z = p[1] * x + p[2];
        let g = p[0] * z.cosh();
        dp[0] = z.sinh();
        dp[1] = g * x;
        dp[2] = g;
        g * p[1]
    }
}

impl<T: Scalar> Kernel<T> for F15 {
    #[inline]
    fn eval(p: &[T], _u: T, x: T) -> T {
        p[0] * ((p[1] * x + p[2]).cosh() - T::one())
    }
    #[inline]
    fn grads(p: &[T], _u: T, x: T, dp: &mut [T]) -> T {
        let z = p[1] * x + p[2];
        let g = p[0] * z.sinh();
        dp[0] = z.cosh() - T::one();
        dp[1] = g * x;
        dp[2] = g;
        g * p[1]
    }
}

impl<T: Scalar> Kernel<T> for F16 {
    #[inline]
    fn eval(p: &[T], _u: T, x: T) -> T {
        p[0] * (p[1] * x + p[2]).tanh()
    }
    #[inline]
    fn grads(p: &[T], _u: T, x: T, dp: &mut [T]) -> T {
        let t = (p[1] * x + p[2]).tanh();
        let g = p[0] * (T::one() - t * t);
        dp[0] = t;
        dp[1] = g * x;
        dp[2] = g;
        g * p[1]
    }
}

impl<T: Scalar> Kernel<T> for F17 {
    #[inline]
    fn eval(p: &[T], _u: T, x: T) -> T {
        p[0] * p[0] * x * x
    }
    #[inline]
    fn grads(p: &[T], _u: T, x: T, dp: &mut [T]) -> T {
        dp[0] = two::<T>() * p[0] * x * x;
        two::<T>() * p[0] * p[0] * x
    }
}

impl<T: Scalar> Kernel<T> for F18 {
    #[inline]
    fn eval(p: &[T], u: T, x: T) -> T {
        p[0] * p[0] * x * x * u
    }
    #[inline]
    fn grads(p: &[T], u: T, x: T, dp: &mut [T]) -> T {
        dp[0] = two::<T>() * p[0] * x * x * u;
        two::<T>() * p[0] * p[0] * x * u
    }
}

impl<T: Scalar> Kernel<T> for F19 {
    #[inline]
    fn eval(p: &[T], _u: T, x: T) -> T {
        let d = x - p[1];
        p[0] * p[0] * d * d
    }
    #[inline]
    fn grads(p: &[T], _u: T, x: T, dp: &mut [T]) -> T {
        let d = x - p[1];
        let g = two::<T>() * p[0] * p[0] * d;
        dp[0] = two::<T>() * p[0] * d * d;
        dp[1] = -g;
        g
    }
}

impl<T: Scalar> Kernel<T> for F20 {
    #[inline]
    fn eval(p: &[T], u: T, x: T) -> T {
        let d = x - p[1];
        p[0] * p[0] * d * d * u
    }
    #[inline]
    fn grads(p: &[T], u: T, x: T, dp: &mut [T]) -> T {
        let d = x - p[1];
        let g = two::<T>() * p[0] * p[0] * d * u;
        dp[0] = two::<T>() * p[0] * d * d * u;
        dp[1] = -g;
        g
    }
}

impl<T: Scalar> Kernel<T> for Lin {
    #[inline]
    fn eval(p: &[T], _u: T, x: T) -> T {
        p[0] * x
    }
    #[inline]
    fn grads(p: &[T], _u: T, x: T, dp: &mut [T]) -> T {
        dp[0] = x;
        p[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_is_stable_at_extremes() {
        assert_eq!(logistic(-800.0f64), 0.0);
        assert_eq!(logistic(800.0f64), 1.0);
        assert!((logistic(0.0f64) - 0.5).abs() < 1e-15);
        assert!((logistic(-2.0f64) + logistic(2.0f64) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn periodic_derivatives_match_closed_forms() {
        let (p, q, r, x) = (0.7f64, -1.3, 0.4, 0.9);
        let mut dp = [0.0; 3];
        let dx = <F12 as Kernel<f64>>::grads(&[p, q, r], 1.0, x, &mut dp);
        let z = q * x + r;
        assert_eq!(dp[0], z.sin());
        assert!((dp[1] - p * z.cos() * x).abs() < 1e-15);
        assert!((dp[2] - p * z.cos()).abs() < 1e-15);
        assert!((dx - p * q * z.cos()).abs() < 1e-15);
    }

    #[test]
    fn conic_derivatives_match_closed_forms() {
        let (p, q, x) = (1.41f64, 3.0, 2.2);
        let mut dp = [0.0; 3];
        let dx = <F19 as Kernel<f64>>::grads(&[p, q], 1.0, x, &mut dp);
        assert!((dp[0] - 2.0 * p * (x - q).powi(2)).abs() < 1e-14);
        assert!((dp[1] + 2.0 * p * p * (x - q)).abs() < 1e-14);
        assert!((dx - 2.0 * p * p * (x - q)).abs() < 1e-14);
    }
}
