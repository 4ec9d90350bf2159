use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::families::logistic;
use crate::scalar::Scalar;

/// Hidden-unit nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Logistic,
    Relu,
    Tanh,
    /// Heaviside step, `1` for `u ≥ 0`. Only used by hand-built models; its
    /// derivative is reported as zero.
    Step,
}

impl Activation {
    pub const TRAINABLE: [Activation; 3] = [Activation::Logistic, Activation::Relu, Activation::Tanh];

    #[inline]
    pub fn apply<T: Scalar>(self, u: T) -> T {
        match self {
            Activation::Logistic => logistic(u),
            Activation::Relu => {
                if u >= T::zero() {
                    u
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => u.tanh(),
            Activation::Step => {
                if u >= T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }

    /// `φ'(u)` given the pre-activation `u` and the output `y = φ(u)`.
    #[inline]
    pub fn derivative<T: Scalar>(self, u: T, y: T) -> T {
        match self {
            Activation::Logistic => y * (T::one() - y),
            Activation::Relu => {
                if u >= T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - y * y,
            Activation::Step => T::zero(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Logistic => "logistic",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Step => "step",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logistic" | "logs" | "sigmoid" => Ok(Activation::Logistic),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "step" => Ok(Activation::Step),
            other => Err(Error::UnknownActivation(other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_kink_uses_active_branch() {
        assert_eq!(Activation::Relu.derivative(0.0f64, 0.0), 1.0);
        assert_eq!(Activation::Relu.derivative(-1e-300f64, 0.0), 0.0);
    }

    #[test]
    fn step_owns_zero() {
        assert_eq!(Activation::Step.apply(0.0f64), 1.0);
        assert_eq!(Activation::Step.apply(-1e-12f64), 0.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for act in Activation::TRAINABLE {
            for &u in &[-1.7f64, -0.2, 0.3, 2.5] {
                let numeric = (act.apply(u + h) - act.apply(u - h)) / (2.0 * h);
                let analytic = act.derivative(u, act.apply(u));
                assert!((numeric - analytic).abs() < 1e-8, "{act} at {u}");
            }
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("LogS".parse::<Activation>().unwrap(), Activation::Logistic);
        assert_eq!("ReLU".parse::<Activation>().unwrap(), Activation::Relu);
        assert!("softsign".parse::<Activation>().is_err());
    }
}
