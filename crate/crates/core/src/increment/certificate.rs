use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lemmas::{energy_mass, fdic_mass, max_char_distance};
use super::{max_translate_density, translate_density, IncrementConfig};
use crate::bohr::{BohrDescriptor, BohrSet};
use crate::error::{Error, Result};
use crate::group::{Group, SetOnGroup};
use crate::progressions::{count_3aps, midpoint_pattern_count, APCount};
use crate::riesz::{riesz_inner, riesz_integral, RieszProduct};

pub const CERTIFICATE_VERSION: &str = "rothlab-certificate/1";

const REPLAY_TOL: f64 = 1e-9;

/// The set a step works on: `(A − offset) ∩ B`, or `A` itself at the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub offset: usize,
    pub bohr: Option<BohrDescriptor>,
}

impl Frame {
    pub fn root() -> Self {
        Frame { offset: 0, bohr: None }
    }

    pub fn apply(&self, a: &SetOnGroup, guard: usize) -> Result<SetOnGroup> {
        let group = a.group();
        let shifted = a.translate(group.neg(self.offset));
        match &self.bohr {
            None => Ok(shifted),
            Some(desc) => shifted.intersection(bohr_from(group, desc, guard)?.members()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Fdic,
    Energy,
    Riesz,
    Annihilate,
    Translate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BohrSummary {
    pub descriptor: BohrDescriptor,
    pub rank: usize,
    pub dimension: f64,
    pub size: usize,
}

impl BohrSummary {
    pub fn of(b: &BohrSet) -> Result<Self> {
        Ok(BohrSummary {
            descriptor: b.descriptor(),
            rank: b.rank(),
            dimension: b.dimension()?,
            size: b.len(),
        })
    }
}

/// How the right-hand side of a density check is obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Target {
    /// `factor · max_x |A ∩ (x + B)| / |B|`.
    Threshold { bohr: BohrDescriptor, factor: f64 },
    /// `α(1 + cK)` with `α` the density of the slice `(pivot − A) ∩ outer`
    /// and `K` its energy on `𝓛` over `α²μ(outer)`.
    EnergyGain {
        pivot: usize,
        outer: BohrDescriptor,
        characters: Vec<usize>,
        c: f64,
    },
    /// `α″(1 + ε/2)` with `α″` the density of `(pivot − A) ∩ cut` in `outer`.
    RieszGain {
        pivot: usize,
        outer: BohrDescriptor,
        cut: BohrDescriptor,
        epsilon: f64,
    },
}

/// One recomputable inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum Check {
    /// `|A ∩ (point + B)| / |B| ≥ target`.
    Density {
        point: usize,
        bohr: BohrDescriptor,
        target: Target,
    },
    /// `T(1_{A_i}, 1_{A′_i}, 1_{A_i}) ≥ α²α′μ(outer)μ(inner)/2` with
    /// `A_i = (pivot − A) ∩ outer` and `A′_i = (pivot − A) ∩ cut`.
    Progressions {
        pivot: usize,
        outer: BohrDescriptor,
        inner: BohrDescriptor,
        cut: BohrDescriptor,
    },
    /// The Fourier mass of the dichotomy meets `cα²α′μ(outer)`.
    Mass {
        pivot: usize,
        outer: BohrDescriptor,
        inner: BohrDescriptor,
        cut: BohrDescriptor,
        c: f64,
    },
    /// `max |1 − γ(x)| ≤ 1/2` over `γ ∈ characters`, `x ∈ B`.
    Annihilation {
        characters: Vec<usize>,
        bohr: BohrDescriptor,
    },
    /// `⟨1_{A″}, p_{ω,Λ}⟩_{L²(β)} ≥ α″(1 + ε) ∫ p_{1,Λ} d(β_ρ ∗ β_ρ)`.
    RieszHypothesis {
        pivot: usize,
        outer: BohrDescriptor,
        cut: BohrDescriptor,
        characters: Vec<usize>,
        omega: Vec<Complex64>,
        epsilon: f64,
        rho: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: Check,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub index: usize,
    pub kind: StepKind,
    pub frame: Frame,
    pub bohr_in: BohrSummary,
    pub bohr_out: Option<BohrSummary>,
    /// `max_x |A ∩ (x + B_in)| / |B_in|`.
    pub density_before: f64,
    /// `|A ∩ (point + B_out)| / |B_out|`.
    pub density_after: Option<f64>,
    pub point: Option<usize>,
    /// A terminal increment hands over to a new frame and need not exceed
    /// `density_before`.
    pub terminal: bool,
    pub checks: Vec<CheckRecord>,
    pub seed: u64,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum EngineOutcome {
    ManyProgressions {
        frame: Frame,
        /// The dichotomy step; absent when `A` fills a translate of a Bohr set.
        step: Option<usize>,
        t_value: f64,
        threshold: f64,
        /// Progressions of the input set.
        count: APCount,
        /// `(a, a + d, a + 2d)` in the input set with `d ≠ 0`.
        triple: Option<[usize; 3]>,
    },
    StepBudget {
        budget: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementCertificate {
    pub version: String,
    pub engine: String,
    pub invariant_factors: Vec<usize>,
    pub set: Vec<usize>,
    pub initial_bohr: BohrDescriptor,
    pub config: IncrementConfig,
    pub steps: Vec<Step>,
    pub outcome: EngineOutcome,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineRun {
    pub certificate: IncrementCertificate,
    pub outcome: EngineOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub steps_checked: usize,
    pub checks_checked: usize,
    pub failures: Vec<String>,
}

impl ReplayReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

pub(crate) fn bohr_from(group: &Group, desc: &BohrDescriptor, guard: usize) -> Result<BohrSet> {
    let b = BohrSet::from_descriptor(group, desc)?;
    if b.guard() == guard {
        Ok(b)
    } else {
        BohrSet::with_guard(group, b.frequencies().to_vec(), b.widths().to_vec(), guard)
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REPLAY_TOL * a.abs().max(b.abs()).max(1.0)
}

struct Ctx<'a> {
    group: &'a Group,
    guard: usize,
}

impl Ctx<'_> {
    fn bohr(&self, desc: &BohrDescriptor) -> Result<BohrSet> {
        bohr_from(self.group, desc, self.guard)
    }

    /// `(pivot − A) ∩ B`.
    fn slice(&self, a: &SetOnGroup, pivot: usize, b: &BohrSet) -> Result<SetOnGroup> {
        a.reflect_about(pivot).intersection(b.members())
    }

    fn target(&self, a: &SetOnGroup, target: &Target) -> Result<f64> {
        match target {
            Target::Threshold { bohr, factor } => {
                let b = self.bohr(bohr)?;
                Ok(factor * max_translate_density(a, b.members()).0)
            }
            Target::EnergyGain {
                pivot,
                outer,
                characters,
                c,
            } => {
                let b = self.bohr(outer)?;
                let s = self.slice(a, *pivot, &b)?;
                let alpha = s.len() as f64 / b.len() as f64;
                let k = energy_mass(&b, &s, characters)? / (alpha * alpha * b.density());
                Ok(alpha * (1.0 + c * k))
            }
            Target::RieszGain {
                pivot,
                outer,
                cut,
                epsilon,
            } => {
                let b = self.bohr(outer)?;
                let s = self.slice(a, *pivot, &self.bohr(cut)?)?;
                Ok(s.len() as f64 / b.len() as f64 * (1.0 + epsilon / 2.0))
            }
        }
    }

    /// `(lhs, rhs, holds)` recomputed from scratch.
    fn evaluate(&self, a: &SetOnGroup, check: &Check) -> Result<(f64, f64, bool)> {
        match check {
            Check::Density { point, bohr, target } => {
                let b = self.bohr(bohr)?;
                let lhs = translate_density(a, b.members(), *point);
                let rhs = self.target(a, target)?;
                Ok((lhs, rhs, lhs >= rhs * (1.0 - 1e-12)))
            }
            Check::Progressions {
                pivot,
                outer,
                inner,
                cut,
            } => {
                let (b, b_rho) = (self.bohr(outer)?, self.bohr(inner)?);
                let s = self.slice(a, *pivot, &b)?;
                let s_prime = self.slice(a, *pivot, &self.bohr(cut)?)?;
                let n = self.group.order() as f64;
                let lhs = midpoint_pattern_count(&s, &s_prime)? as f64 / (n * n);
                let alpha = s.len() as f64 / b.len() as f64;
                let alpha_prime = s_prime.len() as f64 / b_rho.len() as f64;
                let rhs = alpha * alpha * alpha_prime * b.density() * b_rho.density() / 2.0;
                Ok((lhs, rhs, lhs >= rhs))
            }
            Check::Mass {
                pivot,
                outer,
                inner,
                cut,
                c,
            } => {
                let (b, b_rho) = (self.bohr(outer)?, self.bohr(inner)?);
                let s = self.slice(a, *pivot, &b)?;
                let s_prime = self.slice(a, *pivot, &self.bohr(cut)?)?;
                let (_, lhs) = fdic_mass(&b, &b_rho, &s, &s_prime, *c)?;
                let alpha = s.len() as f64 / b.len() as f64;
                let alpha_prime = s_prime.len() as f64 / b_rho.len() as f64;
                let rhs = c * alpha * alpha * alpha_prime * b.density();
                Ok((lhs, rhs, lhs >= rhs))
            }
            Check::Annihilation { characters, bohr } => {
                let lhs = max_char_distance(&self.bohr(bohr)?, characters);
                Ok((lhs, 0.5, lhs <= 0.5 + 1e-12))
            }
            Check::RieszHypothesis {
                pivot,
                outer,
                cut,
                characters,
                omega,
                epsilon,
                rho,
            } => {
                let b = self.bohr(outer)?;
                let s = self.slice(a, *pivot, &self.bohr(cut)?)?;
                let p = RieszProduct::new(characters.clone(), omega.clone())?;
                let lhs = riesz_inner(&s, &p, &b.beta());
                let beta_rho = b.dilate(*rho)?.beta();
                let mu = beta_rho.convolve(&beta_rho)?;
                let alpha = s.len() as f64 / b.len() as f64;
                let rhs = alpha * (1.0 + epsilon) * riesz_integral(&RieszProduct::ones(characters.clone()), &mu);
                Ok((lhs, rhs, lhs >= rhs * (1.0 - 1e-12)))
            }
        }
    }
}

/// Evaluates a check against the frame set, for use while building steps.
pub(crate) fn evaluate_check(a: &SetOnGroup, check: Check, guard: usize) -> Result<CheckRecord> {
    let ctx = Ctx {
        group: a.group(),
        guard,
    };
    let (lhs, rhs, holds) = ctx.evaluate(a, &check)?;
    if !holds {
        return Err(Error::verification(format!(
            "recorded inequality fails: {lhs} vs {rhs} in {check:?}"
        )));
    }
    Ok(CheckRecord { check, lhs, rhs })
}

/// Re-verifies every step of a certificate from the input set alone.
pub fn replay(cert: &IncrementCertificate) -> Result<ReplayReport> {
    if cert.version != CERTIFICATE_VERSION {
        return Err(Error::param(format!("unsupported certificate version {}", cert.version)));
    }
    let group = Group::new(cert.invariant_factors.clone())?;
    let guard = cert.config.enumeration_guard;
    let a = SetOnGroup::from_indices(&group, cert.set.iter().copied())?;
    let ctx = Ctx { group: &group, guard };
    let mut failures = Vec::new();
    let mut checks_checked = 0;
    for (i, step) in cert.steps.iter().enumerate() {
        let tag = format!("step {i} ({:?})", step.kind);
        if step.index != i {
            failures.push(format!("{tag}: index {} out of order", step.index));
        }
        let af = step.frame.apply(&a, guard)?;
        let b_in = ctx.bohr(&step.bohr_in.descriptor)?;
        if b_in.len() != step.bohr_in.size || b_in.rank() != step.bohr_in.rank {
            failures.push(format!("{tag}: input Bohr set does not match its summary"));
        }
        let before = max_translate_density(&af, b_in.members()).0;
        if !close(before, step.density_before) {
            failures.push(format!("{tag}: density before {before} ≠ recorded {}", step.density_before));
        }
        if let Some(out) = &step.bohr_out {
            let b_out = ctx.bohr(&out.descriptor)?;
            if b_out.len() != out.size || b_out.rank() != out.rank {
                failures.push(format!("{tag}: output Bohr set does not match its summary"));
            }
            if out.rank < step.bohr_in.rank {
                failures.push(format!("{tag}: rank decreased"));
            }
            if let (Some(after), Some(point)) = (step.density_after, step.point) {
                let again = translate_density(&af, b_out.members(), point);
                if !close(again, after) {
                    failures.push(format!("{tag}: density after {again} ≠ recorded {after}"));
                }
                if again > 1.0 {
                    failures.push(format!("{tag}: density exceeds 1"));
                }
                if !step.terminal && again <= before {
                    failures.push(format!("{tag}: density did not increase ({before} → {again})"));
                }
            }
        }
        for record in &step.checks {
            checks_checked += 1;
            let (lhs, rhs, holds) = ctx.evaluate(&af, &record.check)?;
            if !close(lhs, record.lhs) || !close(rhs, record.rhs) {
                failures.push(format!(
                    "{tag}: recomputed ({lhs}, {rhs}) ≠ recorded ({}, {})",
                    record.lhs, record.rhs
                ));
            }
            if !holds {
                failures.push(format!("{tag}: inequality fails ({lhs} vs {rhs})"));
            }
        }
    }
    match &cert.outcome {
        EngineOutcome::ManyProgressions {
            frame,
            step,
            count,
            triple,
            ..
        } => {
            let again = count_3aps(&a);
            if &again != count {
                failures.push(format!("outcome: progression count {again:?} ≠ recorded {count:?}"));
            }
            match step.map(|i| cert.steps.get(i)) {
                Some(Some(s))
                    if s.frame == *frame && s.checks.iter().any(|r| matches!(r.check, Check::Progressions { .. })) => {}
                Some(_) => failures.push(format!("outcome: step {step:?} carries no progression check")),
                None if triple.is_none() => failures.push("outcome: no dichotomy step and no triple".into()),
                None => {}
            }
            match triple {
                Some([x, y, z]) => {
                    let valid = a.contains(*x)
                        && a.contains(*y)
                        && a.contains(*z)
                        && x != y
                        && group.add(*x, *z) == group.add(*y, *y);
                    if !valid {
                        failures.push(format!("outcome: ({x}, {y}, {z}) is not a nontrivial progression in A"));
                    }
                }
                None if count.nontrivial > 0 => {
                    failures.push("outcome: nontrivial progressions exist but none is exhibited".into());
                }
                None => {}
            }
        }
        EngineOutcome::StepBudget { budget } => {
            if cert.steps.len() < *budget {
                failures.push(format!("outcome: budget {budget} claimed after {} steps", cert.steps.len()));
            }
        }
    }
    Ok(ReplayReport {
        steps_checked: cert.steps.len(),
        checks_checked,
        failures,
    })
}
