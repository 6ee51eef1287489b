//! Spectra relative to a measure, orthogonality and dissociativity constants,
//! greedy extraction, Bourgain decomposition and the Bessel, Chang and
//! Chernoff checks.
//!
//! `Λ` is K-orthogonal w.r.t. `μ` when `∫|1 + g∨|² dμ ≤ (1+K)(1 + ‖g‖²)` for
//! every `g : Λ → C`. Writing `v = (1, g)` over `Λ ∪ {0}`, the left side is
//! `v* M v` with `M_ij = μ̂(λ_i − λ_j)`, so the least `K` is `λ_max(M) − 1`.
//!
//! `Λ` is K-dissociated w.r.t. `μ` when `∫ p_{ω,Λ} dμ ≤ exp(K)` for every
//! `ω ∈ D^Λ`, with `p_{ω,Λ} = ∏ (1 + Re(ω_λ λ))`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{measure_fourier, DualFunction, GFunction, GMeasure, Group};
use crate::rng::derived_rng;

/// Relative slack on the spectrum threshold.
pub const SPEC_TOLERANCE: f64 = 1e-9;
pub const ORTHOGONALITY_LIMIT: usize = 2000;
pub const DISSOCIATIVITY_OPTIMIZER_LIMIT: usize = 24;
pub const DEFAULT_CHANG_CONSTANT: f64 = 8.0;
const OPTIMIZER_STARTS: u64 = 8;
const OPTIMIZER_SWEEPS: usize = 200;
const EXHAUSTIVE_BLOCK_LIMIT: usize = 4;
const EXHAUSTIVE_SUBSET_BUDGET: u128 = 200_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub character: usize,
    pub coefficient: Complex64,
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub epsilon: f64,
    pub l1_norm: f64,
    pub l2_norm: f64,
    pub l_f: f64,
    /// Sorted by descending magnitude, ties by character index.
    pub entries: Vec<SpectrumEntry>,
}

impl SpectrumReport {
    pub fn characters(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.character).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn norms(f: &GFunction, mu: &GMeasure) -> Result<(f64, f64)> {
    if f.group() != mu.group() {
        return Err(Error::GroupMismatch);
    }
    let l1 = mu.integrate_real(|x| f.at(x).norm());
    let l2 = mu.integrate_real(|x| f.at(x).norm_sqr()).sqrt();
    if l1 == 0.0 {
        return Err(Error::ZeroFunction);
    }
    Ok((l1, l2))
}

fn sorted_entries(coeffs: &DualFunction, keep: impl Fn(f64) -> bool) -> Vec<SpectrumEntry> {
    let mut entries: Vec<SpectrumEntry> = coeffs
        .values()
        .iter()
        .enumerate()
        .filter(|(_, z)| keep(z.norm()))
        .map(|(i, &z)| SpectrumEntry {
            character: i,
            coefficient: z,
            magnitude: z.norm(),
        })
        .collect();
    entries.sort_by(|a, b| {
        b.magnitude
            .partial_cmp(&a.magnitude)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.character.cmp(&b.character))
    });
    entries
}

/// Whether `magnitude ≥ ε·l1` up to [`SPEC_TOLERANCE`].
pub fn above_threshold(magnitude: f64, epsilon: f64, l1: f64) -> bool {
    magnitude >= epsilon * l1 * (1.0 - SPEC_TOLERANCE)
}

/// `Spec_ε(f, μ) = {γ : |(f dμ)^(γ)| ≥ ε ‖f‖_{L¹(μ)}}`.
pub fn spec(f: &GFunction, mu: &GMeasure, epsilon: f64) -> Result<SpectrumReport> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::param(format!("ε = {epsilon} is not in (0, 1]")));
    }
    let (l1, l2) = norms(f, mu)?;
    let coeffs = measure_fourier(f, mu)?;
    Ok(SpectrumReport {
        epsilon,
        l1_norm: l1,
        l2_norm: l2,
        l_f: l2 / l1,
        entries: sorted_entries(&coeffs, |m| above_threshold(m, epsilon, l1)),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shell {
    pub lower: f64,
    pub upper: f64,
    pub characters: Vec<usize>,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellDecomposition {
    pub floor: f64,
    pub l1_norm: f64,
    /// `Spec_{τ}` minus `Spec_{2τ}` for `τ = floor·2^j`, capped at 1.
    pub shells: Vec<Shell>,
    /// `Spec_1`.
    pub top: Vec<usize>,
    pub top_mass: f64,
}

impl ShellDecomposition {
    pub fn total_mass(&self) -> f64 {
        self.top_mass + self.shells.iter().map(|s| s.mass).sum::<f64>()
    }
}

/// Dyadic shells between `ε_floor` and 1, with their `ℓ²` masses.
pub fn dyadic_shells(f: &GFunction, mu: &GMeasure, floor: f64) -> Result<ShellDecomposition> {
    if !(floor > 0.0 && floor <= 1.0) {
        return Err(Error::param(format!("floor {floor} is not in (0, 1]")));
    }
    let (l1, _) = norms(f, mu)?;
    let coeffs = measure_fourier(f, mu)?;
    let mut shells = Vec::new();
    let mut lower = floor;
    while lower < 1.0 {
        let upper = (2.0 * lower).min(1.0);
        shells.push(Shell {
            lower,
            upper,
            characters: Vec::new(),
            mass: 0.0,
        });
        lower = upper;
    }
    let mut top = Vec::new();
    let mut top_mass = 0.0;
    for (i, z) in coeffs.values().iter().enumerate() {
        let m = z.norm();
        if above_threshold(m, 1.0, l1) {
            top.push(i);
            top_mass += m * m;
        } else if above_threshold(m, floor, l1) {
            let s = shells
                .iter_mut()
                .rev()
                .find(|s| above_threshold(m, s.lower, l1))
                .expect("some shell admits every coefficient above the floor");
            s.characters.push(i);
            s.mass += m * m;
        }
    }
    Ok(ShellDecomposition {
        floor,
        l1_norm: l1,
        shells,
        top,
        top_mass,
    })
}

fn gram(characters: &[usize], group: &Group, mu_hat: &DualFunction) -> DMatrix<Complex64> {
    let mut all = Vec::with_capacity(characters.len() + 1);
    all.push(0usize);
    all.extend_from_slice(characters);
    let k = all.len();
    DMatrix::from_fn(k, k, |i, j| mu_hat.at(group.sub(all[i], all[j])))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityCertificate {
    pub characters: Vec<usize>,
    pub measure: GMeasure,
    pub k_min: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
}

impl OrthogonalityCertificate {
    /// Recomputes `K_min` from `Λ` and `μ`.
    pub fn verify(&self) -> Result<bool> {
        let again = orthogonality_constant(&self.characters, &self.measure)?;
        Ok((again.k_min - self.k_min).abs() <= 1e-9)
    }
}

fn top_eigen(m: DMatrix<Complex64>) -> (f64, f64, Vec<Complex64>) {
    let eig = SymmetricEigen::new(m);
    let (mut imax, mut imin) = (0, 0);
    for i in 0..eig.eigenvalues.len() {
        if eig.eigenvalues[i] > eig.eigenvalues[imax] {
            imax = i;
        }
        if eig.eigenvalues[i] < eig.eigenvalues[imin] {
            imin = i;
        }
    }
    let v = eig.eigenvectors.column(imax).iter().copied().collect();
    (eig.eigenvalues[imax], eig.eigenvalues[imin], v)
}

/// Least `K` for which `Λ` is K-orthogonal w.r.t. `μ`.
pub fn orthogonality_constant(characters: &[usize], mu: &GMeasure) -> Result<OrthogonalityCertificate> {
    if characters.len() > ORTHOGONALITY_LIMIT {
        return Err(Error::GuardExceeded {
            what: "orthogonality",
            limit: ORTHOGONALITY_LIMIT,
            actual: characters.len(),
        });
    }
    for &c in characters {
        mu.group().check_index(c)?;
    }
    if characters.is_empty() {
        return Ok(OrthogonalityCertificate {
            characters: Vec::new(),
            measure: mu.clone(),
            k_min: 0.0,
            lambda_max: 1.0,
            lambda_min: 1.0,
        });
    }
    let mu_hat = mu.fourier();
    let (lmax, lmin, _) = top_eigen(gram(characters, mu.group(), &mu_hat));
    Ok(OrthogonalityCertificate {
        characters: characters.to_vec(),
        measure: mu.clone(),
        k_min: (lmax - 1.0).max(0.0),
        lambda_max: lmax,
        lambda_min: lmin,
    })
}

/// `∫|1 + g∨|² dμ / (1 + ‖g‖²)`, evaluated pointwise on the group.
pub fn rayleigh_quotient(characters: &[usize], g: &[Complex64], mu: &GMeasure) -> f64 {
    let group = mu.group();
    let num = mu.integrate_real(|x| {
        let s: Complex64 = characters
            .iter()
            .zip(g)
            .map(|(&c, &gc)| gc * group.char_value(c, x))
            .sum();
        (Complex64::new(1.0, 0.0) + s).norm_sqr()
    });
    let den = 1.0 + g.iter().map(|z| z.norm_sqr()).sum::<f64>();
    num / den
}

const RAYLEIGH_CHAINS: usize = 8;

/// Largest Rayleigh quotient seen over `samples` evaluations, spread across
/// a few (1+1) evolution-strategy chains started from Gaussian or phase
/// vectors `conj λ(x₀)` at a support point.
pub fn sampled_rayleigh_max(characters: &[usize], mu: &GMeasure, samples: usize, seed: u64) -> f64 {
    let group = mu.group();
    let support: Vec<usize> = mu.support().collect();
    let chains = RAYLEIGH_CHAINS.min(samples.max(1));
    (0..chains as u64)
        .into_par_iter()
        .map(|chain| {
            let mut rng = derived_rng(seed, "rayleigh", chain);
            let steps = samples / chains + usize::from((chain as usize) < samples % chains);
            if steps == 0 {
                return 0.0;
            }
            let gaussian = |rng: &mut ChaCha8Rng| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re, im)
            };
            let scale = rng.random_range(0.05..3.0);
            let mut g: Vec<Complex64> = if chain % 2 == 0 {
                characters.iter().map(|_| gaussian(&mut rng) * scale).collect()
            } else {
                let x0 = support[rng.random_range(0..support.len())];
                characters.iter().map(|&c| group.char_value(c, x0).conj() * scale).collect()
            };
            let mut best = rayleigh_quotient(characters, &g, mu);
            let mut sigma = 0.5;
            for _ in 1..steps {
                let norm = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let step = sigma * (norm + 0.1);
                let trial: Vec<Complex64> = g.iter().map(|&z| z + gaussian(&mut rng) * step).collect();
                let value = rayleigh_quotient(characters, &trial, mu);
                if value > best {
                    best = value;
                    g = trial;
                    sigma *= 1.5;
                } else {
                    sigma = (sigma * 0.9).max(1e-6);
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalRejection {
    pub character: usize,
    /// Characters of the witness: the accepted set at rejection time plus `γ`.
    pub support: Vec<usize>,
    pub g: Vec<Complex64>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyOrthogonal {
    pub selected: Vec<usize>,
    pub certificate: OrthogonalityCertificate,
    pub rejections: Vec<OrthogonalRejection>,
}

/// A `g` with `∫|1+g∨|² dμ > (1+η)(1+‖g‖²)` built from the top eigenvector.
fn orthogonality_witness(
    support: &[usize],
    mu: &GMeasure,
    eta: f64,
    top: &[Complex64],
) -> Option<(Vec<Complex64>, f64, f64)> {
    let mut shift = 0.0;
    for _ in 0..60 {
        let v0 = top[0] + shift;
        if v0.norm() > 1e-12 {
            let g: Vec<Complex64> = top[1..].iter().map(|z| z / v0).collect();
            let den = 1.0 + g.iter().map(|z| z.norm_sqr()).sum::<f64>();
            let lhs = rayleigh_quotient(support, &g, mu) * den;
            let rhs = (1.0 + eta) * den;
            if lhs > rhs {
                return Some((g, lhs, rhs));
            }
        }
        shift = if shift == 0.0 { 1e-3 } else { shift * 0.5 };
    }
    None
}

/// Scans `Δ` in order and keeps `γ` whenever the enlarged set stays η-orthogonal.
pub fn greedy_orthogonal_subset(delta: &[usize], mu: &GMeasure, eta: f64) -> Result<GreedyOrthogonal> {
    let mu_hat = mu.fourier();
    let group = mu.group();
    let mut selected: Vec<usize> = Vec::new();
    let mut rejections = Vec::new();
    for &gamma in delta {
        group.check_index(gamma)?;
        let mut trial = selected.clone();
        trial.push(gamma);
        let (lmax, _, v) = top_eigen(gram(&trial, group, &mu_hat));
        if lmax - 1.0 <= eta + 1e-12 {
            selected = trial;
            continue;
        }
        let (g, lhs, rhs) = orthogonality_witness(&trial, mu, eta, &v).ok_or_else(|| {
            Error::verification(format!("no orthogonality witness for character {gamma}"))
        })?;
        rejections.push(OrthogonalRejection {
            character: gamma,
            support: trial,
            g,
            lhs,
            rhs,
        });
    }
    let certificate = orthogonality_constant(&selected, mu)?;
    Ok(GreedyOrthogonal {
        selected,
        certificate,
        rejections,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissociativityMethod {
    PositiveDefiniteExact,
    OptimizerLowerBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissociativityCertificate {
    pub characters: Vec<usize>,
    pub measure: GMeasure,
    pub method: DissociativityMethod,
    pub k_value: f64,
    pub witness: Vec<Complex64>,
}

impl DissociativityCertificate {
    /// Recomputes `∫ p_{ω,Λ} dμ` at the witness and checks `K` against it.
    pub fn verify(&self) -> Result<bool> {
        let table = PhaseTable::new(&self.characters, &self.measure);
        let value = table.integral(&self.witness);
        let consistent = match self.method {
            DissociativityMethod::PositiveDefiniteExact => {
                self.measure.is_positive_definite(1e-9) && (value.ln() - self.k_value).abs() <= 1e-9
            }
            DissociativityMethod::OptimizerLowerBound => self.k_value <= value.ln().max(0.0) + 1e-9,
        };
        Ok(consistent)
    }
}

/// Character values on the support of `μ`, one row per character.
struct PhaseTable {
    weights: Vec<f64>,
    rows: Vec<Vec<Complex64>>,
}

impl PhaseTable {
    fn new(characters: &[usize], mu: &GMeasure) -> Self {
        let support: Vec<usize> = mu.support().collect();
        let group = mu.group();
        PhaseTable {
            weights: support.iter().map(|&x| mu.mass_at(x)).collect(),
            rows: characters
                .iter()
                .map(|&c| support.iter().map(|&x| group.char_value(c, x)).collect())
                .collect(),
        }
    }

    fn riesz_values(&self, omega: &[Complex64], skip: Option<usize>) -> Vec<f64> {
        let mut p = vec![1.0; self.weights.len()];
        for (j, (row, w)) in self.rows.iter().zip(omega).enumerate() {
            if Some(j) == skip {
                continue;
            }
            for (pi, z) in p.iter_mut().zip(row) {
                *pi *= 1.0 + (w * z).re;
            }
        }
        p
    }

    fn integral(&self, omega: &[Complex64]) -> f64 {
        self.riesz_values(omega, None)
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| p * w)
            .sum()
    }

    /// Coordinate ascent from `omega`; returns the final value.
    fn ascend(&self, omega: &mut [Complex64]) -> f64 {
        let mut value = self.integral(omega);
        for _ in 0..OPTIMIZER_SWEEPS {
            let before = value;
            for j in 0..self.rows.len() {
                let r = self.riesz_values(omega, Some(j));
                let c: Complex64 = r
                    .iter()
                    .zip(&self.rows[j])
                    .zip(&self.weights)
                    .map(|((ri, z), w)| z * (ri * w))
                    .sum();
                if c.norm() > 1e-15 {
                    omega[j] = c.conj() / c.norm();
                }
            }
            value = self.integral(omega);
            if value <= before + 1e-13 {
                break;
            }
        }
        value
    }
}

/// `K` for which `Λ` is K-dissociated w.r.t. `μ`: exact for positive-definite
/// `μ`, a labelled lower bound otherwise.
pub fn dissociativity_constant(characters: &[usize], mu: &GMeasure) -> Result<DissociativityCertificate> {
    for &c in characters {
        mu.group().check_index(c)?;
    }
    let table = PhaseTable::new(characters, mu);
    let ones = vec![Complex64::new(1.0, 0.0); characters.len()];
    if mu.is_positive_definite(1e-9) {
        let value = table.integral(&ones);
        return Ok(DissociativityCertificate {
            characters: characters.to_vec(),
            measure: mu.clone(),
            method: DissociativityMethod::PositiveDefiniteExact,
            k_value: value.ln(),
            witness: ones,
        });
    }
    if characters.len() > DISSOCIATIVITY_OPTIMIZER_LIMIT {
        return Err(Error::GuardExceeded {
            what: "dissociativity optimizer",
            limit: DISSOCIATIVITY_OPTIMIZER_LIMIT,
            actual: characters.len(),
        });
    }
    let (value, witness) = (0..OPTIMIZER_STARTS)
        .map(|s| {
            let mut omega: Vec<Complex64> = if s == 0 {
                ones.clone()
            } else {
                let mut rng = derived_rng(0x5EED, "dissociativity", s);
                characters
                    .iter()
                    .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
                    .collect()
            };
            let v = table.ascend(&mut omega);
            (v, omega)
        })
        .fold((f64::NEG_INFINITY, ones.clone()), |best, cur| if cur.0 > best.0 { cur } else { best });
    Ok(DissociativityCertificate {
        characters: characters.to_vec(),
        measure: mu.clone(),
        method: DissociativityMethod::OptimizerLowerBound,
        k_value: value.ln().max(0.0),
        witness,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissociatedRejection {
    pub character: usize,
    pub omega: Vec<Complex64>,
    pub nu: Complex64,
    /// `∫ p_{ω,Λ} (1 + Re(νγ)) dμ`.
    pub value: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyDissociated {
    pub selected: Vec<usize>,
    pub certificate: DissociativityCertificate,
    pub rejections: Vec<DissociatedRejection>,
}

/// Scans `Δ` in order and keeps `γ` whenever the enlarged set stays
/// η-dissociated.
pub fn greedy_dissociated_subset(delta: &[usize], mu: &GMeasure, eta: f64) -> Result<GreedyDissociated> {
    let group = mu.group();
    let threshold = eta.exp();
    let mut selected: Vec<usize> = Vec::new();
    let mut rejections = Vec::new();
    if mu.is_positive_definite(1e-9) {
        let support: Vec<usize> = mu.support().collect();
        let weights: Vec<f64> = support.iter().map(|&x| mu.mass_at(x)).collect();
        let mut p = vec![1.0; support.len()];
        for &gamma in delta {
            group.check_index(gamma)?;
            let factors: Vec<f64> = support.iter().map(|&x| 1.0 + group.char_value(gamma, x).re).collect();
            let value: f64 = p.iter().zip(&factors).zip(&weights).map(|((a, b), w)| a * b * w).sum();
            if value <= threshold * (1.0 + 1e-12) {
                for (pi, f) in p.iter_mut().zip(&factors) {
                    *pi *= f;
                }
                selected.push(gamma);
            } else {
                rejections.push(DissociatedRejection {
                    character: gamma,
                    omega: vec![Complex64::new(1.0, 0.0); selected.len()],
                    nu: Complex64::new(1.0, 0.0),
                    value,
                    threshold,
                });
            }
        }
    } else {
        for &gamma in delta {
            group.check_index(gamma)?;
            let mut trial = selected.clone();
            trial.push(gamma);
            let cert = dissociativity_constant(&trial, mu)?;
            if cert.k_value <= eta + 1e-12 {
                selected = trial;
            } else {
                let mut omega = cert.witness.clone();
                let nu = omega.pop().expect("trial is nonempty");
                rejections.push(DissociatedRejection {
                    character: gamma,
                    omega,
                    nu,
                    value: cert.k_value.exp(),
                    threshold,
                });
            }
        }
    }
    let certificate = dissociativity_constant(&selected, mu)?;
    Ok(GreedyDissociated {
        selected,
        certificate,
        rejections,
    })
}

/// Recomputes a rejection witness: `∫ p_{ω,Λ}(1 + Re(νγ)) dμ > exp(η)`.
pub fn verify_dissociated_rejection(accepted: &[usize], rejection: &DissociatedRejection, mu: &GMeasure) -> bool {
    let mut chars = accepted.to_vec();
    chars.push(rejection.character);
    let mut omega = rejection.omega.clone();
    omega.push(rejection.nu);
    let value = PhaseTable::new(&chars, mu).integral(&omega);
    (value - rejection.value).abs() <= 1e-9 * value.max(1.0) && value > rejection.threshold
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemainderCertification {
    Exhaustive,
    GreedyFailure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BourgainDecomposition {
    pub remainder: Vec<usize>,
    pub blocks: Vec<Vec<usize>>,
    pub block_size: usize,
    pub remainder_certification: RemainderCertification,
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

fn first_dissociated_subset(pool: &[usize], l: usize, mu: &GMeasure) -> Result<Option<Vec<usize>>> {
    let mut idx: Vec<usize> = (0..l).collect();
    loop {
        let subset: Vec<usize> = idx.iter().map(|&i| pool[i]).collect();
        if dissociativity_constant(&subset, mu)?.k_value <= 1.0 + 1e-12 {
            return Ok(Some(subset));
        }
        let mut i = l;
        loop {
            if i == 0 {
                return Ok(None);
            }
            i -= 1;
            if idx[i] < pool.len() - l + i {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..l {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Splits `S` into blocks of exactly `l` characters, each 1-dissociated
/// w.r.t. `μ`, and a remainder with no such block.
pub fn bourgain_decomposition(s: &[usize], l: usize, mu: &GMeasure) -> Result<BourgainDecomposition> {
    if l == 0 {
        return Err(Error::param("block size must be at least 1"));
    }
    let mut pool = s.to_vec();
    let mut blocks = Vec::new();
    let certification = loop {
        if pool.len() < l {
            break RemainderCertification::Exhaustive;
        }
        let greedy = greedy_dissociated_subset(&pool, mu, 1.0)?;
        let block = if greedy.selected.len() >= l {
            let block: Vec<usize> = greedy.selected[..l].to_vec();
            if dissociativity_constant(&block, mu)?.k_value <= 1.0 + 1e-12 {
                Some(block)
            } else {
                None
            }
        } else {
            None
        };
        let block = match block {
            Some(b) => b,
            None if l <= EXHAUSTIVE_BLOCK_LIMIT && binomial(pool.len(), l) <= EXHAUSTIVE_SUBSET_BUDGET => {
                match first_dissociated_subset(&pool, l, mu)? {
                    Some(b) => b,
                    None => break RemainderCertification::Exhaustive,
                }
            }
            None => break RemainderCertification::GreedyFailure,
        };
        pool.retain(|c| !block.contains(c));
        blocks.push(block);
    };
    Ok(BourgainDecomposition {
        remainder: pool,
        blocks,
        block_size: l,
        remainder_certification: certification,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub epsilon: f64,
    pub l_f: f64,
    pub spectrum_size: usize,
    pub subset_size: usize,
    pub bound: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Greedy 1-orthogonal subsets of `Spec_ε(f, μ)` have at most `2ε⁻²L_f²` elements.
pub fn verify_bessel(f: &GFunction, mu: &GMeasure, epsilon: f64) -> Result<BoundReport> {
    let report = spec(f, mu, epsilon)?;
    let greedy = greedy_orthogonal_subset(&report.characters(), mu, 1.0)?;
    let bound = 2.0 * report.l_f * report.l_f / (epsilon * epsilon);
    let size = greedy.selected.len();
    Ok(BoundReport {
        epsilon,
        l_f: report.l_f,
        spectrum_size: report.len(),
        subset_size: size,
        bound,
        slack: bound - size as f64,
        holds: size as f64 <= bound,
    })
}

/// Greedy 1-dissociated subsets of `Spec_ε(f, μ)` have at most
/// `C ε⁻² ⌈ln 2L_f⌉` elements.
pub fn verify_chang(f: &GFunction, mu: &GMeasure, epsilon: f64, constant: f64) -> Result<BoundReport> {
    let report = spec(f, mu, epsilon)?;
    let greedy = greedy_dissociated_subset(&report.characters(), mu, 1.0)?;
    let bound = constant * (2.0 * report.l_f).ln().ceil() / (epsilon * epsilon);
    let size = greedy.selected.len();
    Ok(BoundReport {
        epsilon,
        l_f: report.l_f,
        spectrum_size: report.len(),
        subset_size: size,
        bound,
        slack: bound - size as f64,
        holds: size as f64 <= bound,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChernoffReport {
    pub k_value: f64,
    pub samples: usize,
    pub violations: usize,
    /// Largest `ln ∫|exp(g∨)| dμ − K − ‖g‖²/2` seen.
    pub worst_log_gap: f64,
}

/// `ln ∫ |exp(g∨)| dμ`.
pub fn log_exp_moment(characters: &[usize], g: &[Complex64], mu: &GMeasure) -> f64 {
    let group = mu.group();
    let exponents: Vec<(f64, f64)> = mu
        .support()
        .map(|x| {
            let s: Complex64 = characters.iter().zip(g).map(|(&c, &gc)| gc * group.char_value(c, x)).sum();
            (s.re, mu.mass_at(x))
        })
        .collect();
    let top = exponents.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
    top + exponents.iter().map(|(e, w)| w * (e - top).exp()).sum::<f64>().ln()
}

/// Checks `∫|exp(g∨)| dμ ≤ exp(K + ‖g‖²/2)` on Gaussian, phase-aligned and
/// scaled samples of `g`.
pub fn verify_chernoff(characters: &[usize], mu: &GMeasure, k: f64, samples: usize, seed: u64) -> ChernoffReport {
    let group = mu.group();
    let support: Vec<usize> = mu.support().collect();
    let gaps: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = derived_rng(seed, "chernoff", s);
            let scale = rng.random_range(0.0..3.0);
            let g: Vec<Complex64> = match s % 3 {
                0 => characters
                    .iter()
                    .map(|_| {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        Complex64::new(re, im) * scale
                    })
                    .collect(),
                1 => {
                    let x0 = support[rng.random_range(0..support.len())];
                    characters
                        .iter()
                        .map(|&c| group.char_value(c, x0).conj() * scale)
                        .collect()
                }
                _ => {
                    let t = (s / 3) as f64 / (samples as f64 / 3.0).max(1.0) * 4.0;
                    characters.iter().map(|_| Complex64::new(t, 0.0)).collect()
                }
            };
            let norm_sq: f64 = g.iter().map(|z| z.norm_sqr()).sum();
            log_exp_moment(characters, &g, mu) - k - norm_sq / 2.0
        })
        .collect();
    ChernoffReport {
        k_value: k,
        samples,
        violations: gaps.iter().filter(|&&gap| gap > 1e-9).count(),
        worst_log_gap: gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}
