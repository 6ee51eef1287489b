use std::collections::BTreeMap;

use num_complex::Complex64;

use super::certificate::{
    evaluate_check, BohrSummary, Check, EngineOutcome, EngineRun, Frame, IncrementCertificate, Step, StepKind,
    Target, CERTIFICATE_VERSION,
};
use super::lemmas::{
    annihilate_spec, char_energies, energy_mass, energy_to_density, fdic_dichotomy, point_bohr, regular_factor, riesz_to_density,
    AnnihilationMode, DichotomyOutcome,
};
use super::{max_translate_density, translate_counts, translate_density, IncrementConfig};
use crate::bohr::BohrSet;
use crate::error::{Error, Result};
use crate::group::{fourier, GFunction, Group, SetOnGroup};
use crate::progressions::{count_3aps, find_nontrivial_3ap};
use crate::riesz::{newinc_procedure, NewincInput, NewincOutcome};
use crate::rng::derive_seed;
use crate::spectrum::{greedy_orthogonal_subset, spec};

/// A step whose checks are evaluated when it is committed.
struct Pending {
    kind: StepKind,
    b_out: Option<BohrSet>,
    point: Option<usize>,
    terminal: bool,
    checks: Vec<Check>,
    note: Option<String>,
}

impl Pending {
    fn new(kind: StepKind) -> Self {
        Pending {
            kind,
            b_out: None,
            point: None,
            terminal: false,
            checks: Vec::new(),
            note: None,
        }
    }
}

enum Attempt {
    Many {
        steps: Vec<Pending>,
        pivot: usize,
        slice: SetOnGroup,
        slice_prime: SetOnGroup,
        t_value: f64,
        threshold: f64,
    },
    Continue {
        steps: Vec<Pending>,
        next: BohrSet,
    },
    Terminal {
        steps: Vec<Pending>,
        point: usize,
        bohr: BohrSet,
    },
}

struct Recorder<'a> {
    root: &'a SetOnGroup,
    config: &'a IncrementConfig,
    steps: Vec<Step>,
    iterations: usize,
}

impl Recorder<'_> {
    fn guard(&self) -> usize {
        self.config.enumeration_guard
    }

    fn commit(&mut self, frame: &Frame, af: &SetOnGroup, b_in: &BohrSet, pending: Vec<Pending>) -> Result<()> {
        let density_before = max_translate_density(af, b_in.members()).0;
        for p in pending {
            let index = self.steps.len();
            let density_after = match (&p.b_out, p.point) {
                (Some(b), Some(x)) => Some(translate_density(af, b.members(), x)),
                _ => None,
            };
            if let (Some(after), false) = (density_after, p.terminal) {
                if after <= density_before {
                    return Err(Error::verification(format!(
                        "step {index} does not increase the density ({density_before} → {after})"
                    )));
                }
            }
            let checks = p
                .checks
                .into_iter()
                .map(|c| evaluate_check(af, c, self.guard()))
                .collect::<Result<Vec<_>>>()?;
            self.steps.push(Step {
                index,
                kind: p.kind,
                frame: frame.clone(),
                bohr_in: BohrSummary::of(b_in)?,
                bohr_out: p.b_out.as_ref().map(BohrSummary::of).transpose()?,
                density_before,
                density_after,
                point: p.point,
                terminal: p.terminal,
                checks,
                seed: derive_seed(self.config.seed, "step", index as u64),
                note: p.note,
            });
        }
        Ok(())
    }

    fn tick(&mut self) -> bool {
        if self.iterations >= self.config.step_budget {
            return false;
        }
        self.iterations += 1;
        true
    }

    /// Maps a frame element back to the input set.
    fn lift(&self, frame: &Frame, x: usize) -> usize {
        self.root.group().add(x, frame.offset)
    }

    fn many(
        &mut self,
        frame: &Frame,
        pivot: usize,
        slice: &SetOnGroup,
        slice_prime: &SetOnGroup,
        t_value: f64,
        threshold: f64,
    ) -> EngineOutcome {
        let group = self.root.group();
        let local = slice_triple(group, slice, slice_prime).map(|[a, b, c]| {
            [
                self.lift(frame, group.sub(pivot, a)),
                self.lift(frame, group.sub(pivot, b)),
                self.lift(frame, group.sub(pivot, c)),
            ]
        });
        let triple = local.or_else(|| find_nontrivial_3ap(self.root).map(|(a, b, c)| [a, b, c]));
        EngineOutcome::ManyProgressions {
            frame: frame.clone(),
            step: Some(self.steps.len() - 1),
            t_value,
            threshold,
            count: count_3aps(self.root),
            triple,
        }
    }
}

/// `(a, b, 2b − a)` with `a ≠ 2b − a`, `a, 2b − a ∈ outer`, `b ∈ middle`.
fn slice_triple(group: &Group, outer: &SetOnGroup, middle: &SetOnGroup) -> Option<[usize; 3]> {
    for b in middle.iter() {
        let two_b = group.add(b, b);
        for a in outer.iter() {
            let c = group.sub(two_b, a);
            if c != a && outer.contains(c) {
                return Some([a, b, c]);
            }
        }
    }
    None
}

/// `b_{s·λ}` with `λ` a regular factor of `b_s`.
fn scaled_regular(b: &BohrSet, scale: f64, config: &IncrementConfig) -> Result<(BohrSet, f64, bool)> {
    let scale = scale.min(1.0);
    let (lambda, regular) = regular_factor(&b.dilate(scale)?, config)?;
    Ok((b.dilate(scale * lambda)?, scale * lambda, regular))
}

/// The `x` maximising `1_A∗β(x) + 1_A∗β′(x)` among `x` where both are positive.
fn two_term_pivot(af: &SetOnGroup, b1: &BohrSet, b2: &BohrSet) -> Option<usize> {
    let c1 = translate_counts(af, b1.members());
    let c2 = translate_counts(af, b2.members());
    let (n1, n2) = (b1.len() as f64, b2.len() as f64);
    let mut best: Option<(f64, usize)> = None;
    for x in 0..c1.len() {
        if c1[x] == 0 || c2[x] == 0 {
            continue;
        }
        let v = c1[x] as f64 / n1 + c2[x] as f64 / n2;
        if best.is_none_or(|(bv, _)| v > bv) {
            best = Some((v, x));
        }
    }
    best.map(|(_, x)| x)
}

/// A translate step when `A` is dense enough on a translate of `candidate`.
fn translate_step(af: &SetOnGroup, current: &BohrSet, candidate: &BohrSet, factor: f64, alpha_i: f64) -> Option<Pending> {
    let (density, point) = max_translate_density(af, candidate.members());
    if density < alpha_i * factor || density <= alpha_i {
        return None;
    }
    let mut p = Pending::new(StepKind::Translate);
    p.checks.push(Check::Density {
        point,
        bohr: candidate.descriptor(),
        target: Target::Threshold {
            bohr: current.descriptor(),
            factor,
        },
    });
    p.b_out = Some(candidate.clone());
    p.point = Some(point);
    Some(p)
}

/// Shrinks `bohr` until some translate is denser than `alpha_i`.
fn ensure_increase(
    af: &SetOnGroup,
    bohr: BohrSet,
    point: usize,
    alpha_i: f64,
    config: &IncrementConfig,
) -> Result<(BohrSet, usize, Option<String>)> {
    if translate_density(af, bohr.members(), point) > alpha_i {
        return Ok((bohr, point, None));
    }
    let mut current = bohr;
    for shrinks in 1..=config.shrink_limit {
        let next = current.dilate(0.5)?;
        if next.members() == current.members() {
            break;
        }
        current = next;
        let (d, x) = max_translate_density(af, current.members());
        if d > alpha_i {
            return Ok((current, x, Some(format!("output shrunk {shrinks} times to exceed α_i"))));
        }
    }
    let current = current.meet(&point_bohr(af.group(), current.guard())?)?;
    let (d, x) = max_translate_density(af, current.members());
    if d > alpha_i {
        return Ok((current, x, Some("output shrunk to {0} to exceed α_i".into())));
    }
    Err(Error::verification(format!("no translate exceeds α_i = {alpha_i}")))
}

/// The heaviest characters, stopping at `cap` or once `fraction` of the total
/// weight is reached.
fn heaviest(chars: &[usize], weights: &[f64], cap: usize, fraction: f64) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let mut order: Vec<usize> = (0..chars.len()).collect();
    order.sort_by(|&i, &j| weights[j].total_cmp(&weights[i]).then(chars[i].cmp(&chars[j])));
    let mut kept = Vec::new();
    let mut acc = 0.0;
    for i in order {
        if kept.len() >= cap || (acc >= fraction * total && !kept.is_empty()) {
            break;
        }
        kept.push(chars[i]);
        acc += weights[i];
    }
    kept
}

fn retryable(e: &Error) -> bool {
    matches!(e, Error::Precondition(_) | Error::Verification(_) | Error::Budget(_) | Error::ZeroFunction)
}

struct Slices {
    pivot: usize,
    a: SetOnGroup,
    a_prime: SetOnGroup,
}

fn slices(af: &SetOnGroup, pivot: usize, outer: &BohrSet, inner: &BohrSet) -> Result<Slices> {
    let reflected = af.reflect_about(pivot);
    Ok(Slices {
        pivot,
        a: reflected.intersection(outer.members())?,
        a_prime: reflected.intersection(inner.members())?,
    })
}

/// Annihilates `𝓛`, converts the energy into a denser translate and
/// returns the annihilation and energy steps.
#[allow(clippy::too_many_arguments)]
fn energy_route(
    af: &SetOnGroup,
    b_rho: &BohrSet,
    rho_p: f64,
    s: &Slices,
    big_l: &[usize],
    mode: AnnihilationMode,
    eta: f64,
    alpha_i: f64,
    terminal: bool,
    config: &IncrementConfig,
) -> Result<(Vec<Pending>, BohrSet, usize)> {
    let group = af.group();
    let energies = char_energies(b_rho, &s.a, big_l)?;
    let big_l = &heaviest(big_l, &energies, config.annihilation_cap, config.annihilation_fraction);
    let ann = annihilate_spec(b_rho, rho_p, big_l, mode, eta, config)?;
    let alpha = s.a.len() as f64 / b_rho.len() as f64;
    let k = energy_mass(b_rho, &s.a, big_l)? / (alpha * alpha * b_rho.density());
    let w = energy_to_density(b_rho, &s.a, big_l, &ann.bohr, k, rho_p, config)?;
    let mut steps = Vec::new();
    let mut p = Pending::new(StepKind::Annihilate);
    p.checks.push(Check::Annihilation {
        characters: big_l.to_vec(),
        bohr: ann.bohr.descriptor(),
    });
    p.b_out = Some(ann.bohr.clone());
    if !ann.direct.is_empty() {
        p.note = Some(format!("{} characters added directly as frequencies", ann.direct.len()));
    }
    steps.push(p);
    let point = group.sub(s.pivot, w.point);
    let (bohr, point, shrink_note) = if terminal {
        (w.bohr, point, None)
    } else {
        ensure_increase(af, w.bohr, point, alpha_i, config)?
    };
    let mut p = Pending::new(StepKind::Energy);
    p.checks.push(Check::Density {
        point,
        bohr: bohr.descriptor(),
        target: Target::EnergyGain {
            pivot: s.pivot,
            outer: b_rho.descriptor(),
            characters: big_l.to_vec(),
            c: config.c_energy,
        },
    });
    let mut notes = Vec::new();
    if !w.regular {
        notes.push("no regular dilate on the grid; λ = 1/2 used".to_string());
    }
    if w.shrinks > 0 || w.point_fallback {
        notes.push(format!("energy witness after {} halvings (point fallback: {})", w.shrinks, w.point_fallback));
    }
    notes.extend(shrink_note);
    p.note = (!notes.is_empty()).then(|| notes.join("; "));
    p.b_out = Some(bohr.clone());
    p.point = Some(point);
    p.terminal = terminal;
    steps.push(p);
    Ok((steps, bohr, point))
}

fn fdic_step(s: &Slices, b_rho: &BohrSet, b_rr: &BohrSet, cut: &BohrSet, outcome: &DichotomyOutcome) -> Pending {
    let mut p = Pending::new(StepKind::Fdic);
    p.checks.push(match outcome {
        DichotomyOutcome::ManyProgressions { .. } => Check::Progressions {
            pivot: s.pivot,
            outer: b_rho.descriptor(),
            inner: b_rr.descriptor(),
            cut: cut.descriptor(),
        },
        DichotomyOutcome::MassConcentration { c, .. } => Check::Mass {
            pivot: s.pivot,
            outer: b_rho.descriptor(),
            inner: b_rr.descriptor(),
            cut: cut.descriptor(),
            c: *c,
        },
    });
    p
}

/// One attempt of the energy iteration at fixed scales.
fn energy_attempt(
    af: &SetOnGroup,
    b_rho: &BohrSet,
    rho_p: f64,
    b_rr: &BohrSet,
    alpha_i: f64,
    config: &IncrementConfig,
) -> Result<Attempt> {
    let pivot = two_term_pivot(af, b_rho, b_rr).ok_or_else(|| Error::precondition("A is empty"))?;
    let s = slices(af, pivot, b_rho, b_rr)?;
    let outcome = fdic_dichotomy(b_rho, rho_p, &s.a, &s.a_prime, config)?;
    let mut steps = vec![fdic_step(&s, b_rho, b_rr, b_rr, &outcome)];
    match outcome {
        DichotomyOutcome::ManyProgressions { t_value, threshold, .. } => Ok(Attempt::Many {
            steps,
            pivot,
            slice: s.a,
            slice_prime: s.a_prime,
            t_value,
            threshold,
        }),
        DichotomyOutcome::MassConcentration { spectrum, .. } => {
            let (more, next, _) = energy_route(
                af,
                b_rho,
                rho_p,
                &s,
                &spectrum,
                config.energy_annihilation,
                config.annihilation_eta,
                alpha_i,
                false,
                config,
            )?;
            steps.extend(more);
            Ok(Attempt::Continue { steps, next })
        }
    }
}

/// `α_i = 1` on a Bohr set with a nonzero element exhibits `x − b, x, x + b`.
fn full_density_outcome(rec: &Recorder, frame: &Frame, af: &SetOnGroup, b: &BohrSet) -> Option<EngineOutcome> {
    let (density, x) = max_translate_density(af, b.members());
    let nonzero = b.members().iter().find(|&y| y != 0)?;
    if density < 1.0 {
        return None;
    }
    let group = af.group();
    let triple = [
        rec.lift(frame, group.sub(x, nonzero)),
        rec.lift(frame, x),
        rec.lift(frame, group.add(x, nonzero)),
    ];
    Some(EngineOutcome::ManyProgressions {
        frame: frame.clone(),
        step: None,
        t_value: 0.0,
        threshold: 0.0,
        count: count_3aps(rec.root),
        triple: Some(triple),
    })
}

fn energy_loop(rec: &mut Recorder, frame: Frame, af: SetOnGroup, start: BohrSet) -> Result<EngineOutcome> {
    let config = rec.config;
    let mut b = start;
    'outer: while rec.tick() {
        if let Some(outcome) = full_density_outcome(rec, &frame, &af, &b) {
            return Ok(outcome);
        }
        let alpha_i = max_translate_density(&af, b.members()).0;
        let d = b.dimension()?;
        let (b_rho, _, _) = scaled_regular(&b, config.c_rho * alpha_i / d, config)?;
        let factor = 1.0 + config.c_iter / 4.0;
        let mut last_error = None;
        for h in 0..=config.retry_halvings {
            let scale = config.c_rho * alpha_i / b_rho.dimension()? / 2f64.powi(h as i32);
            let (b_rr, rho_p, _) = scaled_regular(&b_rho, scale, config)?;
            for candidate in [&b_rho, &b_rr] {
                if let Some(step) = translate_step(&af, &b, candidate, factor, alpha_i) {
                    rec.commit(&frame, &af, &b, vec![step])?;
                    b = candidate.clone();
                    continue 'outer;
                }
            }
            match energy_attempt(&af, &b_rho, rho_p, &b_rr, alpha_i, config) {
                Ok(Attempt::Many {
                    steps,
                    pivot,
                    slice,
                    slice_prime,
                    t_value,
                    threshold,
                }) => {
                    rec.commit(&frame, &af, &b, steps)?;
                    return Ok(rec.many(&frame, pivot, &slice, &slice_prime, t_value, threshold));
                }
                Ok(Attempt::Continue { steps, next }) => {
                    rec.commit(&frame, &af, &b, steps)?;
                    b = next;
                    continue 'outer;
                }
                Ok(Attempt::Terminal { .. }) => unreachable!("the energy iteration has no terminal case"),
                Err(e) if retryable(&e) => last_error = Some(e),
                Err(e) => return Err(e),
            }
        }
        return Err(last_error.unwrap_or_else(|| Error::verification("energy iteration made no progress")));
    }
    Ok(EngineOutcome::StepBudget {
        budget: config.step_budget,
    })
}

fn certificate(
    engine: &str,
    root: &SetOnGroup,
    initial: &BohrSet,
    config: &IncrementConfig,
    steps: Vec<Step>,
    outcome: EngineOutcome,
) -> EngineRun {
    let certificate = IncrementCertificate {
        version: CERTIFICATE_VERSION.to_string(),
        engine: engine.to_string(),
        invariant_factors: root.group().factors().to_vec(),
        set: root.to_vec(),
        initial_bohr: initial.descriptor(),
        config: config.clone(),
        steps,
        outcome: outcome.clone(),
    };
    EngineRun { certificate, outcome }
}

fn check_engine_input(group: &Group, config: &IncrementConfig) -> Result<()> {
    if !group.is_odd_order() {
        return Err(Error::precondition(format!("group of order {} is not odd", group.order())));
    }
    if group.order() > config.enumeration_guard {
        return Err(Error::GuardExceeded {
            what: "engine enumeration",
            limit: config.enumeration_guard,
            actual: group.order(),
        });
    }
    Ok(())
}

/// The energy iteration: a chain of density increments on `A ⊆ B`, each
/// driven by Fourier energy, ending in many progressions or the step budget.
pub fn roth_engine_energy(b: &BohrSet, a: &SetOnGroup, config: &IncrementConfig) -> Result<EngineRun> {
    check_engine_input(b.group(), config)?;
    if b.group() != a.group() {
        return Err(Error::GroupMismatch);
    }
    if a.is_empty() {
        return Err(Error::precondition("A is empty"));
    }
    if !a.is_subset(b.members())? {
        return Err(Error::precondition("A is not contained in B"));
    }
    let b = BohrSet::with_guard(b.group(), b.frequencies().to_vec(), b.widths().to_vec(), config.enumeration_guard)?;
    let mut rec = Recorder {
        root: a,
        config,
        steps: Vec::new(),
        iterations: 0,
    };
    let outcome = energy_loop(&mut rec, Frame::root(), a.clone(), b.clone())?;
    Ok(certificate("energy", a, &b, config, rec.steps, outcome))
}

/// Per-character data of the mass case in the main iteration.
struct Coefficients {
    /// `|(1_{A″} dβ)^(ξ)|` for `ξ ∈ Spec`.
    magnitude: BTreeMap<usize, f64>,
    /// `|((1_A − α)1_B)^(γ)|²` with `−2γ = ξ`.
    energy: BTreeMap<usize, f64>,
}

fn coefficients(b_rho: &BohrSet, b_rr: &BohrSet, s: &SetOnGroup, cut_slice: &SetOnGroup, c: f64) -> Result<Coefficients> {
    let group = b_rho.group();
    let alpha = s.len() as f64 / b_rho.len() as f64;
    let f = GFunction::from_fn(group, |x| {
        let v = if b_rho.contains(x) {
            s.contains(x) as u8 as f64 - alpha
        } else {
            0.0
        };
        Complex64::new(v, 0.0)
    });
    let f_hat = fourier(&f);
    let inv = group.unit_inverse(-2)?;
    let report = spec(&cut_slice.indicator(), &b_rr.beta(), c * alpha)?;
    let mut magnitude = BTreeMap::new();
    let mut energy = BTreeMap::new();
    for e in &report.entries {
        magnitude.insert(e.character, e.magnitude);
        energy.insert(e.character, f_hat.at(group.scale(inv, e.character)).norm_sqr());
    }
    Ok(Coefficients { magnitude, energy })
}

/// Assigns each `ξ ∈ V` to the `λ ∈ Λ ∪ {0}` maximising `|β̂(ξ − λ)|`
/// (`None` for 0).
fn assignment(group: &Group, v: &[usize], lambda: &[usize], beta_hat: &dyn Fn(usize) -> f64) -> BTreeMap<usize, Option<usize>> {
    v.iter()
        .map(|&xi| {
            let mut best = (beta_hat(xi), None);
            for &l in lambda {
                let s = beta_hat(group.sub(xi, l));
                if s > best.0 {
                    best = (s, Some(l));
                }
            }
            (xi, best.1)
        })
        .collect()
}

/// `φ(Λ′)`: characters assigned to `Λ′` or to 0.
fn phi(assign: &BTreeMap<usize, Option<usize>>, subset: &[usize]) -> Vec<usize> {
    assign
        .iter()
        .filter(|(_, a)| a.is_none_or(|l| subset.contains(&l)))
        .map(|(&xi, _)| xi)
        .collect()
}

fn weight(coeffs: &Coefficients, set: &[usize]) -> f64 {
    set.iter().map(|xi| coeffs.energy[xi]).sum()
}

struct MainScales<'a> {
    b_rho: &'a BohrSet,
    rho_p: f64,
    b_rr: &'a BohrSet,
    alpha_i: f64,
    step_seed: u64,
}

/// One attempt of the main iteration at fixed scales.
fn main_attempt(af: &SetOnGroup, sc: &MainScales, config: &IncrementConfig) -> Result<Attempt> {
    let group = af.group();
    let (b_rho, b_rr, rho_p) = (sc.b_rho, sc.b_rr, sc.rho_p);
    let pivot = two_term_pivot(af, b_rho, b_rr).ok_or_else(|| Error::precondition("A is empty"))?;
    let s = slices(af, pivot, b_rho, b_rr)?;
    let alpha = s.a.len() as f64 / b_rho.len() as f64;
    let alpha_prime = s.a_prime.len() as f64 / b_rr.len() as f64;
    let mut notes = Vec::new();
    if !(2.0 * alpha_prime >= alpha && alpha >= alpha_prime / 2.0) {
        notes.push(format!("α = {alpha} and α′ = {alpha_prime} are not within a factor 2"));
    }
    let rho_t = config.c_trim * alpha_prime * alpha_prime / b_rho.dimension()?;
    let mut cut = b_rr.dilate(1.0 - 3.0 * rho_t)?;
    let mut trimmed = s.a_prime.intersection(cut.members())?;
    if trimmed.is_empty() {
        cut = b_rr.clone();
        trimmed = s.a_prime.clone();
        notes.push("boundary trim left A″ empty; untrimmed A′ used".into());
    }
    let outcome = fdic_dichotomy(b_rho, rho_p, &s.a, &trimmed, config)?;
    let mut first = fdic_step(&s, b_rho, b_rr, &cut, &outcome);
    first.note = (!notes.is_empty()).then(|| notes.join("; "));
    let mut steps = vec![first];
    if let DichotomyOutcome::ManyProgressions { t_value, threshold, .. } = outcome {
        return Ok(Attempt::Many {
            steps,
            pivot,
            slice: s.a,
            slice_prime: trimmed,
            t_value,
            threshold,
        });
    }
    let coeffs = coefficients(b_rho, b_rr, &s.a, &trimmed, config.c_fdic)?;
    let alpha_cut = trimmed.len() as f64 / b_rr.len() as f64;
    let weighted = |xi: &usize| coeffs.energy[xi] * coeffs.magnitude[xi];
    let total: f64 = coeffs.magnitude.keys().map(weighted).sum();
    let epsilon = config.c_split * alpha.sqrt();
    let large: Vec<usize> = coeffs
        .magnitude
        .iter()
        .filter(|(_, &m)| m >= epsilon * alpha_cut)
        .map(|(&xi, _)| xi)
        .collect();
    let eta = config.c_newinc * config.c_fdic * alpha;
    if !large.is_empty() && large.iter().map(weighted).sum::<f64>() >= total / 2.0 {
        let (more, next, _) = energy_route(
            af,
            b_rho,
            rho_p,
            &s,
            &large,
            AnnihilationMode::Dissociated,
            config.annihilation_eta,
            sc.alpha_i,
            false,
            config,
        )?;
        steps.extend(more);
        return Ok(Attempt::Continue { steps, next });
    }
    // Dyadic shells τα″ ≤ |ν̂| < 2τα″ for τ from ε/2 down to c_fdic·α.
    let floor = config.c_fdic * alpha;
    let mut shells: Vec<(f64, Vec<usize>)> = Vec::new();
    let mut tau = epsilon / 2.0;
    loop {
        let lower = tau.max(floor);
        let members: Vec<usize> = coeffs
            .magnitude
            .iter()
            .filter(|(_, &m)| m >= lower * alpha_cut && m < 2.0 * tau * alpha_cut && m < epsilon * alpha_cut)
            .map(|(&xi, _)| xi)
            .collect();
        shells.push((lower, members));
        if tau <= floor {
            break;
        }
        tau /= 2.0;
    }
    let (tau, v) = shells
        .into_iter()
        .filter(|(_, m)| !m.is_empty())
        .max_by(|x, y| {
            let wx: f64 = x.1.iter().map(weighted).sum();
            let wy: f64 = y.1.iter().map(weighted).sum();
            wx.total_cmp(&wy).then(y.0.total_cmp(&x.0))
        })
        .ok_or_else(|| Error::precondition("no Fourier mass below ε"))?;
    let v_weights: Vec<f64> = v.iter().map(weighted).collect();
    let v = heaviest(&v, &v_weights, config.extraction_cap, 1.0);
    let b_mu = b_rr.dilate(rho_t.max(1e-12))?;
    let beta_mu = b_mu.beta();
    let mu_prime = beta_mu.convolve(&beta_mu)?;
    let lambda = greedy_orthogonal_subset(&v, &mu_prime, eta)?.selected;
    let beta_fourier = beta_mu.fourier();
    let beta_hat = |xi: usize| beta_fourier.at(xi).norm();
    let assign = assignment(group, &v, &lambda, &beta_hat);
    let single = |l: usize| weight(&coeffs, &assign.iter().filter(|(_, a)| **a == Some(l)).map(|(&x, _)| x).collect::<Vec<_>>());
    let k = lambda.len();
    let w_total = weight(&coeffs, &phi(&assign, &lambda));
    let log_2k = (2.0 * k.max(1) as f64).ln();
    let mut current = lambda.clone();
    while current.len() > 1 {
        let mut by_weight = current.clone();
        by_weight.sort_by(|&x, &y| single(x).total_cmp(&single(y)).then(x.cmp(&y)));
        let removed: Vec<usize> = by_weight[..current.len().div_ceil(2)].to_vec();
        if weight(&coeffs, &phi(&assign, &removed)) <= w_total / log_2k {
            current.retain(|l| !removed.contains(l));
        } else {
            break;
        }
    }
    let terminal = |subset: &[usize], mode: AnnihilationMode, note: Option<String>| -> Result<Attempt> {
        let big_l = phi(&assign, subset);
        let (more, bohr, point) = energy_route(af, b_rho, rho_p, &s, &big_l, mode, eta, sc.alpha_i, true, config)?;
        let mut steps = vec![];
        steps.extend(more);
        if let (Some(n), Some(last)) = (note, steps.last_mut()) {
            last.note = Some(match last.note.take() {
                Some(old) => format!("{old}; {n}"),
                None => n,
            });
        }
        Ok(Attempt::Terminal { steps, point, bohr })
    };
    let with_first = |attempt: Result<Attempt>, first: Vec<Pending>| -> Result<Attempt> {
        attempt.map(|a| match a {
            Attempt::Terminal { steps, point, bohr } => Attempt::Terminal {
                steps: first.into_iter().chain(steps).collect(),
                point,
                bohr,
            },
            Attempt::Continue { steps, next } => Attempt::Continue {
                steps: first.into_iter().chain(steps).collect(),
                next,
            },
            other => other,
        })
    };
    let small_limit = 1.0 / (tau * alpha.powf(2.0 / 3.0));
    if current.len() as f64 <= small_limit {
        let mut by_weight = current.clone();
        by_weight.sort_by(|&x, &y| single(y).total_cmp(&single(x)).then(x.cmp(&y)));
        by_weight.truncate(((1.0 / alpha).floor() as usize).max(1));
        return with_first(terminal(&by_weight, AnnihilationMode::Orthogonal, None), steps);
    }
    let m = alpha.powf(-4.0 / 3.0).round().max(1.0);
    let d = config.newinc.c_upper * (tau * current.len() as f64).min(m.sqrt());
    let mu = b_rr.beta();
    let input = NewincInput {
        a: &trimmed,
        mu: &mu,
        mu_prime: &mu_prime,
        lambda: &current,
        tau,
        m,
        d,
    };
    let mut newinc_config = config.newinc.clone();
    newinc_config.seed = sc.step_seed;
    match newinc_procedure(&input, &newinc_config) {
        Ok(NewincOutcome::EntropyHalf { remainder, .. }) => {
            with_first(terminal(&remainder, AnnihilationMode::Dissociated, None), steps)
        }
        Ok(NewincOutcome::RieszCorrelation { characters, omega, .. }) => {
            let eps_r = tau * d / 4.0;
            match riesz_to_density(b_rr, &trimmed, &characters, &omega, eps_r, rho_t, config) {
                Ok(w) => {
                    let point = group.sub(pivot, w.point);
                    let (bohr, point, shrink_note) = ensure_increase(af, w.bohr, point, sc.alpha_i, config)?;
                    let mut p = Pending::new(StepKind::Riesz);
                    p.checks.push(Check::RieszHypothesis {
                        pivot,
                        outer: b_rr.descriptor(),
                        cut: cut.descriptor(),
                        characters: characters.clone(),
                        omega: omega.clone(),
                        epsilon: eps_r,
                        rho: rho_t,
                    });
                    p.checks.push(Check::Density {
                        point,
                        bohr: bohr.descriptor(),
                        target: Target::RieszGain {
                            pivot,
                            outer: b_rr.descriptor(),
                            cut: cut.descriptor(),
                            epsilon: eps_r,
                        },
                    });
                    p.note = shrink_note;
                    p.b_out = Some(bohr.clone());
                    p.point = Some(point);
                    steps.push(p);
                    Ok(Attempt::Continue { steps, next: bohr })
                }
                Err(e) if retryable(&e) => with_first(
                    terminal(&current, AnnihilationMode::Orthogonal, Some(format!("Riesz conversion failed ({e}); Λ annihilated"))),
                    steps,
                ),
                Err(e) => Err(e),
            }
        }
        Err(e) if retryable(&e) => with_first(
            terminal(&current, AnnihilationMode::Orthogonal, Some(format!("extraction unavailable ({e}); Λ annihilated"))),
            steps,
        ),
        Err(e) => Err(e),
    }
}

/// The main iteration started from `B = G`, with the large/small coefficient
/// split and the Riesz-product increment.
pub fn roth_engine_main(group: &Group, a: &SetOnGroup, config: &IncrementConfig) -> Result<EngineRun> {
    check_engine_input(group, config)?;
    if a.group() != group {
        return Err(Error::GroupMismatch);
    }
    if a.is_empty() {
        return Err(Error::precondition("A is empty"));
    }
    let start = BohrSet::with_guard(group, Vec::new(), Vec::new(), config.enumeration_guard)?;
    let mut rec = Recorder {
        root: a,
        config,
        steps: Vec::new(),
        iterations: 0,
    };
    let frame = Frame::root();
    let af = a.clone();
    let mut b = start.clone();
    let outcome = 'outer: loop {
        if !rec.tick() {
            break EngineOutcome::StepBudget {
                budget: config.step_budget,
            };
        }
        if let Some(outcome) = full_density_outcome(&rec, &frame, &af, &b) {
            break outcome;
        }
        let alpha_i = max_translate_density(&af, b.members()).0;
        let scale_of = |d: f64| config.c_main * alpha_i.powf(4.0 / 3.0) / d;
        let (b_rho, _, _) = scaled_regular(&b, scale_of(b.dimension()?), config)?;
        let factor = 1.0 + config.c_main_prime * alpha_i.powf(1.0 / 3.0) / 4.0;
        let mut last_error = None;
        for h in 0..=config.retry_halvings {
            let (b_rr, rho_p, _) = scaled_regular(&b_rho, scale_of(b_rho.dimension()?) / 2f64.powi(h as i32), config)?;
            for candidate in [&b_rho, &b_rr] {
                if let Some(step) = translate_step(&af, &b, candidate, factor, alpha_i) {
                    rec.commit(&frame, &af, &b, vec![step])?;
                    b = candidate.clone();
                    continue 'outer;
                }
            }
            let sc = MainScales {
                b_rho: &b_rho,
                rho_p,
                b_rr: &b_rr,
                alpha_i,
                step_seed: derive_seed(config.seed, "newinc", rec.steps.len() as u64),
            };
            match main_attempt(&af, &sc, config) {
                Ok(Attempt::Many {
                    steps,
                    pivot,
                    slice,
                    slice_prime,
                    t_value,
                    threshold,
                }) => {
                    rec.commit(&frame, &af, &b, steps)?;
                    break 'outer rec.many(&frame, pivot, &slice, &slice_prime, t_value, threshold);
                }
                Ok(Attempt::Continue { steps, next }) => {
                    rec.commit(&frame, &af, &b, steps)?;
                    b = next;
                    continue 'outer;
                }
                Ok(Attempt::Terminal { steps, point, bohr }) => {
                    rec.commit(&frame, &af, &b, steps)?;
                    let sub_frame = Frame {
                        offset: rec.lift(&frame, point),
                        bohr: Some(bohr.descriptor()),
                    };
                    let sub = sub_frame.apply(a, config.enumeration_guard)?;
                    break 'outer energy_loop(&mut rec, sub_frame, sub, bohr)?;
                }
                Err(e) if retryable(&e) => last_error = Some(e),
                Err(e) => return Err(e),
            }
        }
        return Err(last_error.unwrap_or_else(|| Error::verification("main iteration made no progress")));
    };
    Ok(certificate("main", a, &start, config, rec.steps, outcome))
}
