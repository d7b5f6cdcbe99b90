//! Matching-pursuit decomposition of guided-wave signals and damage localization
//! from the resulting sparse features.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atom;
pub mod damage_db;
pub mod dispersion;
pub mod error;
pub mod features;
pub mod localize;
pub mod sacmpm;
pub mod sampm;
pub mod signal;

pub use atom::{load_atom, make_tone_burst, BurstSpec};
pub use dispersion::{propagate, A0Form, Mode, ModeSet, PlateModel};
pub use error::{Error, Result};
pub use sacmpm::{sacmpm_decompose, ChebyshevBasis, SacmpmConfig, SacmpmDecomposition, SacmpmTerm};
pub use sampm::{sampm_decompose, PursuitConfig, SampmDecomposition, SampmTerm, StopReason};
pub use signal::{DelayGrid, Signal, Spectrum};
