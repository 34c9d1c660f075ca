//! Non-Hermitian twister band structures, the block-encoded measurement
//! protocol that samples their eigenstates, and the topology of the
//! resulting band braids.
//!
//! The crate is organised along the data flow of an experiment:
//!
//! * [`twister`] builds the model Hamiltonians and their analytic spectra.
//! * [`circuit`] emulates the postselected circuit that prepares eigenstates.
//! * [`reconstruct`] turns measured expectation values back into states.
//! * [`braidtrace`] extracts windings, crossings and braid words.
//! * [`knots`] evaluates Alexander and Jones polynomials of braid closures.
//! * [`pipeline`] chains the stages end to end.

pub mod braid;
pub mod braidtrace;
pub mod circuit;
pub mod class;
pub mod knots;
pub mod numerics;
pub mod pipeline;
pub mod reconstruct;
pub mod twister;

pub use braid::{BraidError, BraidWord, Generator};
pub use class::KnotClass;
pub use knots::LaurentPoly;
pub use numerics::{ComplexMatrix, EigenDecomposition, C64};
pub use twister::TwisterSpec;
