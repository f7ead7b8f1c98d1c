//! Invariant-engineered pulse design and open-system simulation of a
//! three-transmon quantum circulator.
//!
//! Units: time in ns, angular frequencies and rates in rad/ns.

pub mod bessel;
pub mod devices;
pub mod error;
pub mod export;
pub mod invariant;
pub mod metrics;
pub mod numeric;
pub mod propagation;
pub mod statespace;

pub use devices::{ChainModel, ChainSpec, DriveWaveform, LindbladChannel, ModelKind, TransmonLabel};
pub use error::{Error, Result};
pub use invariant::{AuxiliaryTrajectory, InvariantSpec, LrPhase, PulsePair};
pub use metrics::{EnsembleMethod, EnsembleReport, TransferReport, TransmissionMatrix};
pub use propagation::{Hamiltonian, Method, PropagationConfig, Trajectory};
pub use statespace::{Basis, DensityMatrix, Operator, PureState};
