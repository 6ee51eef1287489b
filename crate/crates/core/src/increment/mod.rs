//! The density-increment machinery: the progression/mass dichotomy, the two
//! conversions from Fourier information to a denser translate, spectrum
//! annihilation, and the two outer iterations.
//!
//! Every step an engine takes is recorded as an [`IncrementCertificate`]
//! entry whose inequalities are recomputed by [`replay`] from the input set
//! alone.

mod certificate;
mod engine;
mod lemmas;

use serde::{Deserialize, Serialize};

use crate::bohr::{RegularityGrid, DEFAULT_ENUMERATION_GUARD, DEFAULT_REGULARITY_CONSTANT};
use crate::group::SetOnGroup;
use crate::riesz::NewincConfig;

pub use certificate::{
    replay, Check, CheckRecord, EngineOutcome, EngineRun, Frame, IncrementCertificate, ReplayReport, Step,
    StepKind, CERTIFICATE_VERSION,
};
pub use engine::{roth_engine_energy, roth_engine_main};
pub use lemmas::{
    annihilate_spec, energy_to_density, fdic_dichotomy, fdic_mass, riesz_to_density, Annihilation,
    AnnihilationMode, DichotomyOutcome, EnergyWitness, RieszWitness,
};

/// Every tunable constant of the increment machinery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IncrementConfig {
    /// `c` in `Spec_{cα}` and in the mass threshold `cα²α′μ(B)`.
    pub c_fdic: f64,
    /// `c′` in the proviso `ρ ≤ c′α/d`.
    pub c_fdic_prime: f64,
    /// `c` in the energy-to-density gain `α(1 + cK)`.
    pub c_energy: f64,
    /// `c′` in the proviso `ρ ≤ c′αK/d`.
    pub c_energy_prime: f64,
    /// `c` in `ρ′ = cεα/k` for the Riesz conversion.
    pub c_riesz: f64,
    /// Scale of `ρ_i, ρ′_i = c·α_i/d_i` in the energy iteration.
    pub c_rho: f64,
    /// `c` in the translate thresholds `α_i(1 ± c/4)` of the energy iteration.
    pub c_iter: f64,
    /// Scale of `ρ_i, ρ′_i = c·α_i^{4/3}/d_i` in the main iteration.
    pub c_main: f64,
    /// `c` in the translate thresholds `α_i(1 ± cα_i^{1/3}/4)` of the main iteration.
    pub c_main_prime: f64,
    /// `c` in the boundary trim `ρ′ = cα′²/d`.
    pub c_trim: f64,
    /// `c` in the split `ε = c√α`.
    pub c_split: f64,
    /// `c′` in `η = c′·c_fdic·α` for the orthogonal extraction.
    pub c_newinc: f64,
    /// `η` for extractions in the energy iteration.
    pub annihilation_eta: f64,
    pub energy_annihilation: AnnihilationMode,
    /// Most characters handed to an annihilation; the heaviest are kept.
    pub annihilation_cap: usize,
    /// Share of the energy on `𝓛` at which the heaviest prefix stops growing.
    pub annihilation_fraction: f64,
    /// Most characters of a dyadic shell passed to the orthogonal extraction.
    pub extraction_cap: usize,
    /// Halvings of the annihilating dilate before failing characters are
    /// added as frequencies.
    pub annihilation_halvings: usize,
    /// Halvings of `ρ′` tried before a dichotomy or Riesz conversion gives up.
    pub retry_halvings: usize,
    /// Halvings of an output Bohr set tried before falling back to `{0}`.
    pub shrink_limit: usize,
    pub regularity_constant: f64,
    pub regularity_grid: RegularityGrid,
    pub step_budget: usize,
    pub enumeration_guard: usize,
    pub newinc: NewincConfig,
    pub seed: u64,
}

impl Default for IncrementConfig {
    fn default() -> Self {
        IncrementConfig {
            c_fdic: 0.125,
            c_fdic_prime: 0.25,
            c_energy: 0.125,
            c_energy_prime: 2.0,
            c_riesz: 0.25,
            c_rho: 0.25,
            c_iter: 0.5,
            c_main: 0.25,
            c_main_prime: 0.5,
            c_trim: 0.25,
            c_split: 0.5,
            c_newinc: 0.125,
            annihilation_eta: 0.125,
            energy_annihilation: AnnihilationMode::Orthogonal,
            annihilation_cap: 16,
            annihilation_fraction: 0.5,
            extraction_cap: 48,
            annihilation_halvings: 12,
            retry_halvings: 8,
            shrink_limit: 40,
            regularity_constant: DEFAULT_REGULARITY_CONSTANT,
            regularity_grid: RegularityGrid::default(),
            step_budget: 64,
            enumeration_guard: DEFAULT_ENUMERATION_GUARD,
            newinc: NewincConfig::default(),
            seed: 0,
        }
    }
}

/// `|A ∩ (x + S)|` for every `x`.
pub fn translate_counts(a: &SetOnGroup, s: &SetOnGroup) -> Vec<u32> {
    let group = a.group();
    let mut counts = vec![0u32; group.order()];
    let s_members: Vec<usize> = s.iter().collect();
    for x in a.iter() {
        for &y in &s_members {
            counts[group.sub(x, y)] += 1;
        }
    }
    counts
}

/// The largest relative density of `A` on a translate of `S`, with the
/// smallest translate attaining it.
pub fn max_translate_density(a: &SetOnGroup, s: &SetOnGroup) -> (f64, usize) {
    let counts = translate_counts(a, s);
    let (best, &count) = counts
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(&x.0)))
        .expect("groups are nonempty");
    (count as f64 / s.len() as f64, best)
}

/// `|A ∩ (x + S)| / |S|`.
pub fn translate_density(a: &SetOnGroup, s: &SetOnGroup, x: usize) -> f64 {
    let group = a.group();
    s.iter().filter(|&y| a.contains(group.add(x, y))).count() as f64 / s.len() as f64
}
