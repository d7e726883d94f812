//! Koopman spectra of measure-preserving flows by periodic approximation.
//!
//! The flow's `tau`-map is replaced by a permutation of equal-measure cells.
//! The permutation operator is unitary with a spectrum read off its cycles,
//! which gives spectral projections and mollified spectral densities of any
//! observable.

pub mod approx;
pub mod error;
pub mod experiment;
pub mod flows;
pub mod io;
pub mod observables;
pub mod partition;
pub mod spectral;
pub mod upwind;

pub use approx::{CycleSet, Method, Permutation, ValidationReport};
pub use error::{Error, Result};
pub use flows::{FlowSpec, ShearStep, SplittingScheme};
pub use partition::{CellMask, Domain, Partition};
pub use spectral::{Atom, Band, DiscreteObservable, Mollifier, Spectrum};
pub use upwind::{UlamCirculant, UpwindSpec};
