//! Per-edge function families.
//!
//! Every connection `F[i][j]` of a functional matrix is one real function of
//! the incoming signal with up to three trainable parameters `(p, q, r)` and,
//! for some families, a fixed sign constant `u ∈ {-1, +1}`.
//!
//! | id  | F(x)                         | trainable | sign |
//! |-----|------------------------------|-----------|------|
//! | F01 | p²·x                         | p         |      |
//! | F02 | p³·x                         | p         |      |
//! | F03 | p·x² + q·x                   | p, q      |      |
//! | F04 | p·x³ + q·x² + r·x            | p, q, r   |      |
//! | F05 | p·exp(q·x)                   | p, q      |      |
//! | F06 | rect(p)·u·x                  | p         | u    |
//! | F07 | rect_ada(p)·u·x              | p         | u    |
//! | F08 | rect(p·x + q)·u              | p, q      | u    |
//! | F09 | p·rect(q·x + r)              | p, q, r   |      |
//! | F10 | logistic(p·x + q)·u          | p, q      | u    |
//! | F11 | p·logistic(q·x + r)          | p, q, r   |      |
//! | F12 | p·sin(q·x + r)               | p, q, r   |      |
//! | F13 | p·cos(q·x + r)               | p, q, r   |      |
//! | F14 | p·sinh(q·x + r)              | p, q, r   |      |
//! | F15 | p·(cosh(q·x + r) − 1)        | p, q, r   |      |
//! | F16 | p·tanh(q·x + r)              | p, q, r   |      |
//! | F17 | p²·x²                        | p         |      |
//! | F18 | p²·x²·u                      | p         | u    |
//! | F19 | p²·(x − q)²                  | p, q      |      |
//! | F20 | p²·(x − q)²·u                | p, q      | u    |
//! | MEM | tanh(p·x + q·C + r), C ← F   | p, q, r   |      |
//! | LIN | p·x                          | p         |      |
//!
//! `rect` owns its boundary: `rect(z) = z` for `z ≥ 0`. F07 differs from F06
//! only in its parameter derivative, which is pinned to `u·x` regardless of
//! the sign of `p` so that a dead edge can be revived.

mod kernels;
mod matrix;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub(crate) use kernels::{logistic, Kernel};
pub use matrix::FunctionalMatrix;

/// Maximum number of trainable parameters on one edge.
pub const MAX_ARITY: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FamilyId {
    F01,
    F02,
    F03,
    F04,
    F05,
    F06,
    F07,
    F08,
    F09,
    F10,
    F11,
    F12,
    F13,
    F14,
    F15,
    F16,
    F17,
    F18,
    F19,
    F20,
    /// Stateful memory function; see [`crate::memory`].
    Mem,
    /// Plain weight `p·x`. Reduces a functional matrix to a weight matrix.
    Lin,
}

impl FamilyId {
    /// The twenty published families, in table order.
    pub const TABLE: [FamilyId; 20] = [
        FamilyId::F01,
        FamilyId::F02,
        FamilyId::F03,
        FamilyId::F04,
        FamilyId::F05,
        FamilyId::F06,
        FamilyId::F07,
        FamilyId::F08,
        FamilyId::F09,
        FamilyId::F10,
        FamilyId::F11,
        FamilyId::F12,
        FamilyId::F13,
        FamilyId::F14,
        FamilyId::F15,
        FamilyId::F16,
        FamilyId::F17,
        FamilyId::F18,
        FamilyId::F19,
        FamilyId::F20,
    ];

    pub fn name(self) -> &'static str {
        use FamilyId::*;
        match self {
            F01 => "F01",
            F02 => "F02",
            F03 => "F03",
            F04 => "F04",
            F05 => "F05",
            F06 => "F06",
            F07 => "F07",
            F08 => "F08",
            F09 => "F09",
            F10 => "F10",
            F11 => "F11",
            F12 => "F12",
            F13 => "F13",
            F14 => "F14",
            F15 => "F15",
            F16 => "F16",
            F17 => "F17",
            F18 => "F18",
            F19 => "F19",
            F20 => "F20",
            Mem => "MEM",
            Lin => "LIN",
        }
    }

    pub fn param_arity(self) -> usize {
        use FamilyId::*;
        match self {
            F01 | F02 | F06 | F07 | F17 | F18 | Lin => 1,
            F03 | F05 | F08 | F10 | F19 | F20 => 2,
            F04 | F09 | F11 | F12 | F13 | F14 | F15 | F16 | Mem => 3,
        }
    }

    pub fn has_sign_constant(self) -> bool {
        use FamilyId::*;
        matches!(self, F06 | F07 | F08 | F10 | F18 | F20)
    }

    pub fn spec(self) -> FamilySpec {
        FamilySpec {
            id: self,
            param_arity: self.param_arity(),
            has_sign_constant: self.has_sign_constant(),
        }
    }

    /// Uniform initialisation interval for parameter `k`.
    pub fn init_range(self, k: usize) -> (f64, f64) {
        use FamilyId::*;
        match (self, k) {
            (F05, 1) => (-4.0, -2.0),
            (F06 | F07, 0) => (0.0, 2.0),
            (F12 | F13, 1 | 2) => (-10.0, 10.0),
            _ => (-0.1, 0.1),
        }
    }

    /// For families with a rectifier, the argument whose sign selects the
    /// branch, as a function of the parameters and the input.
    pub fn kink_argument(self, params: &[f64], x: f64) -> Option<f64> {
        use FamilyId::*;
        match self {
            F06 | F07 => Some(params[0]),
            F08 => Some(params[0] * x + params[1]),
            F09 => Some(params[1] * x + params[2]),
            _ => None,
        }
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Functions known not to work as connections because they are discontinuous
/// or lack a zero state.
const REJECTED: &[(&str, &str)] = &[
    ("tan", "discontinuous"),
    ("cot", "discontinuous"),
    ("sec", "discontinuous"),
    ("csc", "discontinuous"),
    ("coth", "discontinuous"),
    ("sech", "discontinuous"),
    ("csch", "discontinuous"),
    ("cosh", "range [1, inf) has no zero state; use F15 (cosh - 1)"),
];

impl FromStr for FamilyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let upper = t.to_ascii_uppercase();
        if let Some(id) = FamilyId::TABLE
            .iter()
            .chain(&[FamilyId::Mem, FamilyId::Lin])
            .find(|id| id.name() == upper)
        {
            return Ok(*id);
        }
        let lower = t.to_ascii_lowercase();
        if let Some((name, reason)) = REJECTED.iter().find(|(n, _)| *n == lower) {
            return Err(Error::UnsupportedFamily {
                name: (*name).to_string(),
                reason,
            });
        }
        Err(Error::UnknownFamily(t.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FamilySpec {
    pub id: FamilyId,
    pub param_arity: usize,
    pub has_sign_constant: bool,
}

impl From<FamilyId> for FamilySpec {
    fn from(id: FamilyId) -> Self {
        id.spec()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Negative,
    Positive,
}

impl Sign {
    pub fn value<T: Scalar>(self) -> T {
        match self {
            Sign::Negative => -T::one(),
            Sign::Positive => T::one(),
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.gen::<bool>() {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }
}

/// Parameters of a single edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeParams<T> {
    params: [T; MAX_ARITY],
    arity: usize,
    sign: Option<Sign>,
}

impl<T: Scalar> EdgeParams<T> {
    pub fn new(spec: FamilySpec, params: &[T], sign: Option<Sign>) -> Result<Self> {
        if params.len() != spec.param_arity {
            return Err(Error::DimensionMismatch {
                expected: spec.param_arity,
                actual: params.len(),
            });
        }
        if sign.is_some() != spec.has_sign_constant {
            return Err(Error::Config(format!(
                "{} {} a sign constant",
                spec.id,
                if spec.has_sign_constant { "requires" } else { "takes no" }
            )));
        }
        let mut p = [T::zero(); MAX_ARITY];
        p[..params.len()].copy_from_slice(params);
        Ok(Self {
            params: p,
            arity: params.len(),
            sign,
        })
    }

    pub fn params(&self) -> &[T] {
        &self.params[..self.arity]
    }

    pub fn sign(&self) -> Option<Sign> {
        self.sign
    }

    fn sign_value(&self) -> T {
        self.sign.map_or(T::one(), Sign::value)
    }
}

/// Draws one edge's parameters from the family's initialisation ranges.
pub(crate) fn draw_edge<T: Scalar, R: Rng + ?Sized>(
    id: FamilyId,
    rng: &mut R,
    params: &mut [T],
) -> Option<Sign> {
    for (k, p) in params.iter_mut().enumerate() {
        let (lo, hi) = id.init_range(k);
        *p = T::lit(rng.gen_range(lo..=hi));
    }
    id.has_sign_constant().then(|| Sign::random(rng))
}

/// Expands `$body` once per stateless family with `$k` bound to that family's
/// kernel type. `MEM` yields [`Error::StatefulFamily`].
macro_rules! with_kernel {
    ($id:expr, $k:ident => $body:expr) => {{
        use $crate::families::kernels as kn;
        use $crate::families::FamilyId as Fid;
        match $id {
            Fid::F01 => { type $k = kn::F01; $body }
            Fid::F02 => { type $k = kn::F02; $body }
            Fid::F03 => { type $k = kn::F03; $body }
            Fid::F04 => { type $k = kn::F04; $body }
            Fid::F05 => { type $k = kn::F05; $body }
            Fid::F06 => { type $k = kn::F06; $body }
            Fid::F07 => { type $k = kn::F07; $body }
            Fid::F08 => { type $k = kn::F08; $body }
            Fid::F09 => { type $k = kn::F09; $body }
            Fid::F10 => { type $k = kn::F10; $body }
            Fid::F11 => { type $k = kn::F11; $body }
            Fid::F12 => { type $k = kn::F12; $body }
            Fid::F13 => { type $k = kn::F13; $body }
            Fid::F14 => { type $k = kn::F14; $body }
            Fid::F15 => { type $k = kn::F15; $body }
            Fid::F16 => { type $k = kn::F16; $body }
            Fid::F17 => { type $k = kn::F17; $body }
            Fid::F18 => { type $k = kn::F18; $body }
            Fid::F19 => { type $k = kn::F19; $body }
            Fid::F20 => { type $k = kn::F20; $body }
            Fid::Lin => { type $k = kn::Lin; $body }
            Fid::Mem => return Err($crate::error::Error::StatefulFamily(Fid::Mem)),
        }
    }};
}
pub(crate) use with_kernel;

fn checked<T: Scalar>(v: T, what: &'static str) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what))
    }
}

fn check_input<T: Scalar>(x: T) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite("edge input"))
    }
}

/// `F(x)` for one edge.
pub fn eval<T: Scalar>(spec: FamilySpec, edge: &EdgeParams<T>, x: T) -> Result<T> {
    check_input(x)?;
    let v = with_kernel!(spec.id, K => <K as Kernel<T>>::eval(edge.params(), edge.sign_value(), x));
    checked(v, "edge evaluation")
}

/// `∂F/∂x` for one edge.
pub fn d_dx<T: Scalar>(spec: FamilySpec, edge: &EdgeParams<T>, x: T) -> Result<T> {
    check_input(x)?;
    let v = with_kernel!(spec.id, K => <K as Kernel<T>>::d_dx(edge.params(), edge.sign_value(), x));
    checked(v, "edge input derivative")
}

/// `∂F/∂p_k` for one edge.
pub fn d_dparam<T: Scalar>(spec: FamilySpec, edge: &EdgeParams<T>, x: T, k: usize) -> Result<T> {
    check_input(x)?;
    if k >= spec.param_arity {
        return Err(Error::InvalidParameterIndex {
            family: spec.id,
            index: k,
            arity: spec.param_arity,
        });
    }
    let mut out = [T::zero(); MAX_ARITY];
    with_kernel!(spec.id, K => <K as Kernel<T>>::d_dparams(edge.params(), edge.sign_value(), x, &mut out));
    checked(out[k], "edge parameter derivative")
}

/// Random `m × n` functional matrix with parameters drawn from the family's
/// initialisation ranges.
pub fn init_matrix<T: Scalar, R: Rng + ?Sized>(
    spec: FamilySpec,
    m: usize,
    n: usize,
    rng: &mut R,
) -> Result<FunctionalMatrix<T>> {
    FunctionalMatrix::init(spec, m, n, rng)
}
