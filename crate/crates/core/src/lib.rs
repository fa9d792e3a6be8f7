//! Physics-informed neural network training with parameter-sensitivity
//! regularization.
//!
//! A PINN minimizes a PDE residual plus boundary/initial mismatches at
//! collocation points. This crate adds squared parameter-derivatives of every
//! residual to the loss, so a single training run yields the PDE solution
//! together with its local sensitivities to the parameters of interest. It
//! ships four benchmark problems, the loss/optimizer stack, and independent
//! finite-difference and closed-form oracles to verify both solutions and
//! sensitivities.

pub mod autodiff;
pub mod error;
pub mod losses;
pub mod network;
pub mod optim;
pub mod oracles;
pub mod problems;

pub use autodiff::{DerivativeJet, DerivativeRequest, Signature, WeightGradient};
pub use error::{CoreError, Result};
pub use losses::{LossBreakdown, LossWeights, Mode};
pub use network::{Activation, InputLayout, InputSlot, Network, NetworkSpec, SlotKind, Wrapper};
pub use optim::{OptimizerConfig, TrainingTrace};
pub use oracles::{GridField, SensitivityEstimate};
pub use problems::{CollocationSet, ParamDef, ParamVector, ProblemSpec};
