#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rothlab::bohr::BohrSet;
use rothlab::group::{Group, SetOnGroup};
use rothlab::increment::{DichotomyOutcome, IncrementConfig};
use rothlab::progressions::midpoint_pattern_count;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_subset(g: &Group, support: &SetOnGroup, p: f64, rng: &mut ChaCha8Rng) -> SetOnGroup {
    let picked: Vec<usize> = support.iter().filter(|_| rng.random_bool(p)).collect();
    SetOnGroup::from_indices(g, picked).unwrap()
}

pub fn random_set(g: &Group, p: f64, rng: &mut ChaCha8Rng) -> SetOnGroup {
    random_subset(g, &SetOnGroup::full(g), p, rng)
}

pub struct FdicInstance {
    pub b: BohrSet,
    pub rho: f64,
    pub a: SetOnGroup,
    pub a_prime: SetOnGroup,
}

/// A regular `B`, `ρ ≤ c′α/d`, `A ⊆ B` and `A′ ⊆ B_ρ` with `2α′ ≥ α ≥ α′/2`.
pub fn fdic_instance(n: usize, config: &IncrementConfig, rng: &mut ChaCha8Rng) -> Option<FdicInstance> {
    let g = Group::cyclic(n).unwrap();
    let rank = rng.random_range(0..=2);
    let freqs: Vec<usize> = (0..rank).map(|_| rng.random_range(1..n)).collect();
    let widths: Vec<f64> = (0..rank).map(|_| rng.random_range(0.6..2.0)).collect();
    let b0 = BohrSet::new(&g, freqs, widths).ok()?;
    let (lambda, _) = b0.find_regular_dilate(config.regularity_constant, &config.regularity_grid).ok()?;
    let b = b0.dilate(lambda).ok()?;
    let p = rng.random_range(0.2..0.8);
    let a = random_subset(&g, b.members(), p, rng);
    if a.is_empty() {
        return None;
    }
    let alpha = a.len() as f64 / b.len() as f64;
    let rho = config.c_fdic_prime * alpha / b.dimension().ok()? * rng.random_range(0.25..1.0);
    let b_rho = b.dilate(rho).ok()?;
    let a_prime = random_subset(&g, b_rho.members(), p, rng);
    let alpha_prime = a_prime.len() as f64 / b_rho.len() as f64;
    if a_prime.is_empty() || alpha > 2.0 * alpha_prime || alpha_prime > 2.0 * alpha {
        return None;
    }
    Some(FdicInstance { b, rho, a, a_prime })
}

/// Recomputes both sides of the returned case from scratch.
pub fn reverify(inst: &FdicInstance, out: &DichotomyOutcome, c: f64) -> bool {
    let n = inst.b.group().order() as f64;
    let b_rho = inst.b.dilate(inst.rho).unwrap();
    let alpha = inst.a.len() as f64 / inst.b.len() as f64;
    let alpha_prime = inst.a_prime.len() as f64 / b_rho.len() as f64;
    match out {
        DichotomyOutcome::ManyProgressions { t_value, threshold, count, .. } => {
            let exact = midpoint_pattern_count(&inst.a, &inst.a_prime).unwrap();
            let t = exact as f64 / (n * n);
            let rhs = alpha * alpha * alpha_prime * inst.b.density() * b_rho.density() / 2.0;
            exact == *count && t == *t_value && (rhs - threshold).abs() <= 1e-15 && t >= rhs
        }
        DichotomyOutcome::MassConcentration { mass, threshold, spectrum, .. } => {
            let (spec, exact) = rothlab::increment::fdic_mass(&inst.b, &b_rho, &inst.a, &inst.a_prime, c).unwrap();
            let rhs = c * alpha * alpha * alpha_prime * inst.b.density();
            spec == *spectrum && (exact - mass).abs() <= 1e-9 && (rhs - threshold).abs() <= 1e-15 && exact >= rhs
        }
    }
}
