use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{max_translate_density, IncrementConfig};
use crate::bohr::BohrSet;
use crate::error::{Error, Result};
use crate::group::{fourier, GFunction, Group, SetOnGroup};
use crate::progressions::midpoint_pattern_count;
use crate::riesz::{riesz_inner, riesz_integral, RieszProduct};
use crate::spectrum::{greedy_dissociated_subset, greedy_orthogonal_subset, spec};

const REL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum DichotomyOutcome {
    ManyProgressions {
        alpha: f64,
        alpha_prime: f64,
        /// Solutions of `a + c = 2b`, `a, c ∈ A`, `b ∈ A′`.
        count: u64,
        t_value: f64,
        /// `α²α′μ(B)μ(B_ρ)/2`.
        threshold: f64,
    },
    MassConcentration {
        alpha: f64,
        alpha_prime: f64,
        /// `Spec_{cα}(1_{A′}, β_ρ)`, the set of `−2γ`.
        spectrum: Vec<usize>,
        mass: f64,
        /// `cα²α′μ(B)`.
        threshold: f64,
        c: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnihilationMode {
    Orthogonal,
    Dissociated,
}

#[derive(Clone, Debug)]
pub struct Annihilation {
    pub bohr: BohrSet,
    /// Characters kept by the greedy extraction.
    pub extracted: Vec<usize>,
    /// Common dilation applied to the ambient set and the new frequencies.
    pub scale: f64,
    /// Characters of `Δ` added directly as frequencies of width 1/2.
    pub direct: Vec<usize>,
    /// `max |1 − γ(x)|` over `γ ∈ Δ`, `x ∈ B′`.
    pub max_distance: f64,
}

#[derive(Clone, Debug)]
pub struct EnergyWitness {
    pub bohr: BohrSet,
    pub lambda: f64,
    pub regular: bool,
    pub shrinks: usize,
    pub point_fallback: bool,
    pub point: usize,
    pub density: f64,
    /// `α(1 + c·K)`.
    pub target: f64,
    pub alpha: f64,
    pub k: f64,
    /// `Σ_{−2γ∈𝓛} |((1_A − α)1_B)^(γ)|²`.
    pub entry_mass: f64,
}

#[derive(Clone, Debug)]
pub struct RieszWitness {
    pub bohr: BohrSet,
    pub rho_prime: f64,
    pub halvings: usize,
    pub lambda: f64,
    pub regular: bool,
    pub point: usize,
    pub density: f64,
    /// `α(1 + ε/2)`.
    pub target: f64,
    pub alpha: f64,
    pub hypothesis_lhs: f64,
    pub hypothesis_rhs: f64,
}

fn require_odd(group: &Group) -> Result<()> {
    if group.is_odd_order() {
        Ok(())
    } else {
        Err(Error::precondition(format!("group of order {} is not odd", group.order())))
    }
}

fn relative_density(a: &SetOnGroup, b: &BohrSet, name: &str) -> Result<f64> {
    if !a.is_subset(b.members())? {
        return Err(Error::precondition(format!("{name} is not contained in its Bohr set")));
    }
    let alpha = a.len() as f64 / b.len() as f64;
    if alpha <= 0.0 {
        return Err(Error::precondition(format!("{name} is empty")));
    }
    Ok(alpha)
}

/// `(1_A − α)1_B`.
fn balanced(a: &SetOnGroup, b: &BohrSet, alpha: f64) -> GFunction {
    GFunction::from_fn(a.group(), |x| {
        let v = if b.contains(x) {
            a.contains(x) as u8 as f64 - alpha
        } else {
            0.0
        };
        Complex64::new(v, 0.0)
    })
}

/// `γ` with `−2γ = ξ`.
fn half_negative(group: &Group, xi: usize) -> Result<usize> {
    Ok(group.scale(group.unit_inverse(-2)?, xi))
}

/// `|((1_A − α)1_B)^(γ)|²` with `−2γ = ξ`, for each `ξ`.
pub(crate) fn char_energies(b: &BohrSet, a: &SetOnGroup, xis: &[usize]) -> Result<Vec<f64>> {
    let group = b.group();
    let alpha = a.len() as f64 / b.len() as f64;
    let f_hat = fourier(&balanced(a, b, alpha));
    xis.iter()
        .map(|&xi| Ok(f_hat.at(half_negative(group, xi)?).norm_sqr()))
        .collect()
}

/// `Spec_{cα}(1_{A′}, β_ρ)` and `Σ_{−2γ∈Spec} |((1_A−α)1_B)^(γ)|² |(1_{A′}dβ_ρ)^(−2γ)|`.
pub fn fdic_mass(b: &BohrSet, b_rho: &BohrSet, a: &SetOnGroup, a_prime: &SetOnGroup, c: f64) -> Result<(Vec<usize>, f64)> {
    let group = b.group();
    let alpha = a.len() as f64 / b.len() as f64;
    let f_hat = fourier(&balanced(a, b, alpha));
    let report = spec(&a_prime.indicator(), &b_rho.beta(), c * alpha)?;
    let mut mass = 0.0;
    for entry in &report.entries {
        mass += f_hat.at(half_negative(group, entry.character)?).norm_sqr() * entry.magnitude;
    }
    Ok((report.characters(), mass))
}

/// Either many progressions `a + c = 2b` with `a, c ∈ A`, `b ∈ A′`, or Fourier
/// mass of the balanced function of `A` on characters where `1_{A′}` is large.
pub fn fdic_dichotomy(
    b: &BohrSet,
    rho: f64,
    a: &SetOnGroup,
    a_prime: &SetOnGroup,
    config: &IncrementConfig,
) -> Result<DichotomyOutcome> {
    let group = b.group();
    require_odd(group)?;
    let b_rho = b.dilate(rho)?;
    let alpha = relative_density(a, b, "A")?;
    let alpha_prime = relative_density(a_prime, &b_rho, "A′")?;
    if alpha > 2.0 * alpha_prime || alpha_prime > 2.0 * alpha {
        return Err(Error::precondition(format!(
            "densities α = {alpha} and α′ = {alpha_prime} differ by more than a factor 2"
        )));
    }
    let d = b.dimension()?;
    let limit = config.c_fdic_prime * alpha / d;
    if rho > limit * (1.0 + REL_TOL) {
        return Err(Error::precondition(format!("ρ = {rho} exceeds c′α/d = {limit}")));
    }
    fdic_on(b, &b_rho, a, a_prime, config.c_fdic)
}

/// The dichotomy for `A ⊆ B` and `A′ ⊆ B_ρ` without the scale proviso.
pub(crate) fn fdic_on(
    b: &BohrSet,
    b_rho: &BohrSet,
    a: &SetOnGroup,
    a_prime: &SetOnGroup,
    c: f64,
) -> Result<DichotomyOutcome> {
    let n = b.group().order() as f64;
    let alpha = a.len() as f64 / b.len() as f64;
    let alpha_prime = a_prime.len() as f64 / b_rho.len() as f64;
    let count = midpoint_pattern_count(a, a_prime)?;
    let t_value = count as f64 / (n * n);
    let threshold = alpha * alpha * alpha_prime * b.density() * b_rho.density() / 2.0;
    if t_value >= threshold {
        return Ok(DichotomyOutcome::ManyProgressions {
            alpha,
            alpha_prime,
            count,
            t_value,
            threshold,
        });
    }
    let (spectrum, mass) = fdic_mass(b, b_rho, a, a_prime, c)?;
    let threshold = c * alpha * alpha * alpha_prime * b.density();
    if mass >= threshold {
        return Ok(DichotomyOutcome::MassConcentration {
            alpha,
            alpha_prime,
            spectrum,
            mass,
            threshold,
            c,
        });
    }
    Err(Error::verification(format!(
        "neither case holds: T = {t_value}, mass = {mass} < {threshold}"
    )))
}

/// `Σ_{−2γ∈𝓛} |((1_A − α)1_B)^(γ)|²`.
pub(crate) fn energy_mass(b: &BohrSet, a: &SetOnGroup, big_l: &[usize]) -> Result<f64> {
    let group = b.group();
    let alpha = a.len() as f64 / b.len() as f64;
    let f_hat = fourier(&balanced(a, b, alpha));
    let mut mass = 0.0;
    for &xi in big_l {
        group.check_index(xi)?;
        mass += f_hat.at(half_negative(group, xi)?).norm_sqr();
    }
    Ok(mass)
}

/// `max |1 − γ(x)|` over `γ ∈ Δ`, `x ∈ B`.
pub(crate) fn max_char_distance(b: &BohrSet, delta: &[usize]) -> f64 {
    let group = b.group();
    let members: Vec<usize> = b.members().iter().collect();
    delta
        .iter()
        .flat_map(|&chi| members.iter().map(move |&x| group.char_distance(chi, x)))
        .fold(0.0, f64::max)
}

/// The Bohr set `{0}`, cut out by one character per invariant factor.
pub(crate) fn point_bohr(group: &Group, guard: usize) -> Result<BohrSet> {
    let r = group.rank();
    let frequencies = (0..r)
        .map(|j| {
            let mut coords = vec![0; r];
            coords[j] = 1;
            group.index_of(&coords)
        })
        .collect::<Result<Vec<_>>>()?;
    BohrSet::with_guard(group, frequencies, vec![1e-9; r], guard)
}

/// A regular dilation factor of `b`, or `1/2` flagged as not regular.
pub(crate) fn regular_factor(b: &BohrSet, config: &IncrementConfig) -> Result<(f64, bool)> {
    match b.find_regular_dilate(config.regularity_constant, &config.regularity_grid) {
        Ok((lambda, _)) => Ok((lambda, true)),
        Err(Error::Verification(_)) => Ok((0.5, false)),
        Err(e) => Err(e),
    }
}

/// Converts Fourier energy of `A` on `𝓛` into a denser translate of a dilate
/// of `−2·B′_{1/2}`.
pub fn energy_to_density(
    b: &BohrSet,
    a: &SetOnGroup,
    big_l: &[usize],
    b_prime: &BohrSet,
    k: f64,
    rho: f64,
    config: &IncrementConfig,
) -> Result<EnergyWitness> {
    let group = b.group();
    require_odd(group)?;
    let alpha = relative_density(a, b, "A")?;
    let entry_mass = energy_mass(b, a, big_l)?;
    let needed = k * alpha * alpha * b.density();
    if !(k > 0.0) || entry_mass <= 0.0 || entry_mass < needed * (1.0 - REL_TOL) {
        return Err(Error::precondition(format!(
            "energy on 𝓛 is {entry_mass}, below Kα²μ(B) = {needed}"
        )));
    }
    let worst = max_char_distance(b_prime, big_l);
    if worst > 0.5 + 1e-12 {
        return Err(Error::precondition(format!(
            "B′ does not annihilate 𝓛: max |1 − γ(x)| = {worst}"
        )));
    }
    let d = b.dimension()?;
    let limit = config.c_energy_prime * alpha * k / d;
    if rho > limit * (1.0 + REL_TOL) {
        return Err(Error::precondition(format!("ρ = {rho} exceeds c′αK/d = {limit}")));
    }
    let b3 = b_prime.dilate(0.5)?.scalar_image(-2)?;
    let (lambda, regular) = regular_factor(&b3, config)?;
    let target = alpha * (1.0 + config.c_energy * k);
    let mut current = b3.dilate(lambda)?;
    let mut shrinks = 0;
    loop {
        let (density, point) = max_translate_density(a, current.members());
        if density >= target * (1.0 - 1e-12) {
            return Ok(EnergyWitness {
                bohr: current,
                lambda,
                regular,
                shrinks,
                point_fallback: false,
                point,
                density,
                target,
                alpha,
                k,
                entry_mass,
            });
        }
        let next = current.dilate(0.5)?;
        if shrinks >= config.shrink_limit || next.members() == current.members() {
            break;
        }
        current = next;
        shrinks += 1;
    }
    let current = current.meet(&point_bohr(group, current.guard())?)?;
    let (density, point) = max_translate_density(a, current.members());
    if density >= target * (1.0 - 1e-12) {
        return Ok(EnergyWitness {
            bohr: current,
            lambda,
            regular,
            shrinks,
            point_fallback: true,
            point,
            density,
            target,
            alpha,
            k,
            entry_mass,
        });
    }
    Err(Error::verification(format!(
        "no translate reaches α(1 + cK) = {target}"
    )))
}

/// Converts a Riesz-product correlation of `A` into a denser translate of a
/// dilate of `Bohr(Λ, 1)_{ρ′} ∧ B_ρ`.
pub fn riesz_to_density(
    b: &BohrSet,
    a: &SetOnGroup,
    characters: &[usize],
    omega: &[Complex64],
    epsilon: f64,
    rho: f64,
    config: &IncrementConfig,
) -> Result<RieszWitness> {
    let group = b.group();
    if !(epsilon > 0.0) {
        return Err(Error::param(format!("ε = {epsilon} is not positive")));
    }
    if !(rho > 0.0 && rho < 1.0 / 3.0) {
        return Err(Error::param(format!("ρ = {rho} is not in (0, 1/3)")));
    }
    let alpha = relative_density(a, b, "A")?;
    if !a.is_subset(b.dilate(1.0 - 3.0 * rho)?.members())? {
        return Err(Error::precondition("A meets the boundary annulus B \\ B_{1−3ρ}"));
    }
    let b_rho = b.dilate(rho)?;
    let beta_rho = b_rho.beta();
    let mu = beta_rho.convolve(&beta_rho)?;
    let p = RieszProduct::new(characters.to_vec(), omega.to_vec())?;
    let hypothesis_lhs = riesz_inner(a, &p, &b.beta());
    let hypothesis_rhs = alpha * (1.0 + epsilon) * riesz_integral(&RieszProduct::ones(characters.to_vec()), &mu);
    if hypothesis_lhs < hypothesis_rhs * (1.0 - 1e-12) {
        return Err(Error::precondition(format!(
            "⟨1_A, p⟩ = {hypothesis_lhs} is below α(1+ε)∫p₁dμ = {hypothesis_rhs}"
        )));
    }
    let k = characters.len();
    let frequency_set = BohrSet::with_guard(group, characters.to_vec(), vec![1.0; k], b.guard())?;
    let target = alpha * (1.0 + epsilon / 2.0);
    let mut rho_prime = config.c_riesz * epsilon * alpha / k.max(1) as f64;
    for halvings in 0..=config.retry_halvings {
        let candidate = frequency_set.dilate(rho_prime)?.meet(&b_rho)?;
        let (lambda, regular) = regular_factor(&candidate, config)?;
        let bohr = candidate.dilate(lambda)?;
        let (density, point) = max_translate_density(a, bohr.members());
        if density >= target * (1.0 - 1e-12) {
            return Ok(RieszWitness {
                bohr,
                rho_prime,
                halvings,
                lambda,
                regular,
                point,
                density,
                target,
                alpha,
                hypothesis_lhs,
                hypothesis_rhs,
            });
        }
        rho_prime /= 2.0;
    }
    Err(Error::verification(format!(
        "no translate reaches α(1 + ε/2) = {target} after {} halvings of ρ′",
        config.retry_halvings
    )))
}

/// A Bohr set inside `B_ρ` on which every character of `Δ` is within 1/2 of 1.
pub fn annihilate_spec(
    b: &BohrSet,
    rho: f64,
    delta: &[usize],
    mode: AnnihilationMode,
    eta: f64,
    config: &IncrementConfig,
) -> Result<Annihilation> {
    let group = b.group();
    let ambient = if rho == 1.0 { b.clone() } else { b.dilate(rho)? };
    if delta.is_empty() {
        return Ok(Annihilation {
            bohr: ambient,
            extracted: Vec::new(),
            scale: 1.0,
            direct: Vec::new(),
            max_distance: 0.0,
        });
    }
    let beta = ambient.beta();
    let extracted = match mode {
        AnnihilationMode::Orthogonal => greedy_orthogonal_subset(delta, &beta, eta)?.selected,
        AnnihilationMode::Dissociated => greedy_dissociated_subset(delta, &beta, eta)?.selected,
    };
    let new_frequencies = BohrSet::with_guard(group, extracted.clone(), vec![2.0; extracted.len()], ambient.guard())?;
    let mut scale = 1.0;
    let mut candidate = ambient.meet(&new_frequencies)?;
    for h in 0..=config.annihilation_halvings {
        if h > 0 {
            scale /= 2.0;
            candidate = ambient.dilate(scale)?.meet(&new_frequencies.dilate(scale)?)?;
        }
        if max_char_distance(&candidate, delta) <= 0.5 + 1e-12 {
            return Ok(Annihilation {
                max_distance: max_char_distance(&candidate, delta),
                bohr: candidate,
                extracted,
                scale,
                direct: Vec::new(),
            });
        }
    }
    let direct: Vec<usize> = delta
        .iter()
        .copied()
        .filter(|&chi| max_char_distance(&candidate, &[chi]) > 0.5 + 1e-12)
        .collect();
    let patch = BohrSet::with_guard(group, direct.clone(), vec![0.5; direct.len()], ambient.guard())?;
    let bohr = candidate.meet(&patch)?;
    let max_distance = max_char_distance(&bohr, delta);
    if max_distance > 0.5 + 1e-12 {
        return Err(Error::verification(format!(
            "annihilation failed: max |1 − γ(x)| = {max_distance}"
        )));
    }
    Ok(Annihilation {
        bohr,
        extracted,
        scale,
        direct,
        max_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z9_instance() -> (BohrSet, SetOnGroup) {
        let g = Group::cyclic(9).unwrap();
        (BohrSet::trivial(&g).unwrap(), SetOnGroup::from_indices(&g, [0, 3, 6]).unwrap())
    }

    #[test]
    fn fdic_full_group_z5() {
        let g = Group::cyclic(5).unwrap();
        let b = BohrSet::trivial(&g).unwrap();
        let a = SetOnGroup::full(&g);
        let out = fdic_dichotomy(&b, 0.1, &a, &a, &IncrementConfig::default()).unwrap();
        match out {
            DichotomyOutcome::ManyProgressions { t_value, threshold, .. } => {
                assert_eq!(t_value, 1.0);
                assert_eq!(threshold, 0.5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fdic_rejects_large_rho() {
        let g = Group::cyclic(5).unwrap();
        let b = BohrSet::trivial(&g).unwrap();
        let a = SetOnGroup::full(&g);
        let err = fdic_dichotomy(&b, 0.5, &a, &a, &IncrementConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn fdic_mass_case_on_sparse_set() {
        // {0, 1, 3} in Z/31 has only trivial solutions of a + c = 2b.
        let g = Group::cyclic(31).unwrap();
        let b = BohrSet::trivial(&g).unwrap();
        let a = SetOnGroup::from_indices(&g, [0, 1, 3, 9]).unwrap();
        let out = fdic_dichotomy(&b, 0.01, &a, &a, &IncrementConfig::default()).unwrap();
        match out {
            DichotomyOutcome::MassConcentration { mass, threshold, .. } => assert!(mass >= threshold),
            DichotomyOutcome::ManyProgressions { t_value, threshold, .. } => assert!(t_value >= threshold),
        }
    }

    #[test]
    fn energy_to_density_subgroup_z9() {
        let (b, a) = z9_instance();
        let g = b.group().clone();
        let big_l = vec![3, 6];
        assert!((energy_mass(&b, &a, &big_l).unwrap() - 2.0 / 9.0).abs() < 1e-12);
        let b_prime = BohrSet::uniform_width(&g, vec![3], 0.5).unwrap();
        assert_eq!(b_prime.members().to_vec(), vec![0, 3, 6]);
        let config = IncrementConfig::default();
        let w = energy_to_density(&b, &a, &big_l, &b_prime, 2.0, 0.1, &config).unwrap();
        assert_eq!(w.density, 1.0);
        assert!((w.target - (1.0 / 3.0) * (1.0 + 2.0 * config.c_energy)).abs() < 1e-15);
    }

    #[test]
    fn energy_to_density_empty_l_fails() {
        let (b, a) = z9_instance();
        let b_prime = b.clone();
        let err = energy_to_density(&b, &a, &[], &b_prime, 1.0, 0.1, &IncrementConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn riesz_empty_lambda_fails() {
        let g = Group::cyclic(31).unwrap();
        let b = BohrSet::uniform_width(&g, vec![1], 2.0).unwrap();
        let a = SetOnGroup::from_indices(&g, [0, 1]).unwrap();
        let err = riesz_to_density(&b, &a, &[], &[], 0.5, 0.1, &IncrementConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn riesz_to_density_on_correlated_subgroup() {
        // A = 0 mod 5 inside Z/35 correlates with the character 7.
        let g = Group::cyclic(35).unwrap();
        let b = BohrSet::trivial(&g).unwrap();
        let a = SetOnGroup::from_predicate(&g, |x| x % 5 == 0);
        let w = riesz_to_density(&b, &a, &[7], &[Complex64::new(1.0, 0.0)], 0.5, 0.01, &IncrementConfig::default())
            .unwrap();
        assert!(w.density >= w.target);
        assert_eq!(w.bohr.rank(), b.rank() + 1);
    }

    #[test]
    fn annihilation_single_character() {
        let g = Group::cyclic(101).unwrap();
        let b = BohrSet::uniform_width(&g, vec![1], 1.0).unwrap();
        let out = annihilate_spec(&b, 0.5, &[37], AnnihilationMode::Orthogonal, 0.125, &IncrementConfig::default())
            .unwrap();
        assert!(out.max_distance <= 0.5);
        assert_eq!(out.bohr.rank(), b.rank() + 1);
    }

    #[test]
    fn annihilation_empty_is_dilate() {
        let g = Group::cyclic(101).unwrap();
        let b = BohrSet::uniform_width(&g, vec![1], 1.0).unwrap();
        let out = annihilate_spec(&b, 0.5, &[], AnnihilationMode::Dissociated, 0.125, &IncrementConfig::default())
            .unwrap();
        assert_eq!(out.bohr, b.dilate(0.5).unwrap());
    }
}
