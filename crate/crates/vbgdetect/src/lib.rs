//! Decides whether a video-conference frame uses a real or a virtual
//! background.
//!
//! Two feature branches feed two detectors:
//!
//! - [`comat`] builds the six-band co-occurrence tensor (three spatial
//!   per-channel planes plus three cross-band planes) consumed by the
//!   small CNN in [`nn`].
//! - [`crspam`] computes the 1372-dimensional color-rich SPAM residual
//!   feature vector consumed by the Gaussian-kernel SVM in [`svm`].
//!
//! [`attacks`] implements the post-processing grid used to stress the
//! detectors, [`corpus`] builds reproducible synthetic datasets, and
//! [`harness`] runs the evaluation scenarios and emits report tables.
//!
//! See the crate `examples/` directory for one runnable program per major
//! capability.

pub mod attacks;
pub mod comat;
pub mod corpus;
pub mod crspam;
pub mod error;
pub mod frame;
pub mod nn;

pub use error::{Error, Result};
pub use frame::{ChannelPlane, Frame, SaveFormat};
