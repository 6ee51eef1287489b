//! Executable density-increment machinery for three-term progressions.
//!
//! The crate works on explicit finite abelian groups small enough to
//! enumerate. Every inequality that drives the density-increment argument is
//! evaluated exactly on the instance at hand and recorded in a certificate
//! that can be replayed from its inputs.
//!
//! Module map:
//!
//! * [`group`]: groups, characters, functions, measures and the Fourier transform,
//! * [`progressions`]: the trilinear form and exact progression counts,
//! * [`bohr`]: Bohr sets, dilation, meets, dimension and regularity,
//! * [`spectrum`]: spectra, orthogonality and dissociativity constants,
//! * [`riesz`]: Riesz products and the randomized increment extraction,
//! * [`increment`]: the dichotomy, density-conversion lemmas and engines,
//! * [`constructions`]: progression-free sets used as test corpora.

pub mod bohr;
pub mod constructions;
pub mod error;
pub mod group;
pub mod increment;
pub mod progressions;
pub mod riesz;
pub mod rng;
pub mod spectrum;

pub use error::{Error, Result};
