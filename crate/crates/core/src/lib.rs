//! Functional transfer networks.
//!
//! A functional transfer network replaces every scalar weight `w[i][j]` of a
//! fully connected layer with a trainable real function `F[i][j](x)`. A layer
//! computes `y_i = φ(Σ_j F[i][j](x_j) + b_i)`; the last hidden layer feeds an
//! ordinary linear softmax classifier.
//!
//! Modules:
//! - [`linalg`]: dense vectors and matrices.
//! - [`families`]: the edge-function families, their closed-form derivatives
//!   and the functional matrix with its transfer computation.
//! - [`network`]: layers, forward pass and back-propagation.
//! - [`training`]: minibatch SGD, layer-wise training and fine-tuning.
//! - [`memory`]: the recurrent memory-function layer and sequence trainer.
//! - [`data`]: MNIST IDX and digit-sequence loaders.
//! - [`gradcheck`]: central-difference gradient oracle.
//!
//! All numeric code is generic over [`Scalar`] (`f32`, `f64`); the aliases
//! below fix it to `f64`, which is what training and the experiment runner use.

pub mod data;
pub mod error;
pub mod families;
pub mod gradcheck;
pub mod linalg;
pub mod memory;
pub mod network;
pub mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use families::{EdgeParams, FamilyId, FamilySpec, FunctionalMatrix, Sign};
pub use linalg::{DenseMatrix, Vector};
pub use network::{Activation, HiddenLayer, Network, OutputLayer};
pub use scalar::Scalar;

pub type Vector64 = linalg::Vector<f64>;
pub type DenseMatrix64 = linalg::DenseMatrix<f64>;
pub type FunctionalMatrix64 = families::FunctionalMatrix<f64>;
pub type Network64 = network::Network<f64>;
pub type Dataset64 = data::Dataset<f64>;
pub type SequenceModel64 = memory::SequenceModel<f64>;
