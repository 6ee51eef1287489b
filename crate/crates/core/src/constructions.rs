//! Progression-free subsets of `{1, …, N}` and the exhaustive freeness oracle.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derived_rng;

/// Largest set the pair-scan oracle accepts.
pub const ORACLE_GUARD: usize = 100_000;

const MAX_DIMENSION: usize = 8;
const MAX_DIGIT: u64 = 32;
const ELKIN_WIDTHS: [u64; 4] = [1, 2, 3, 4];
const ELKIN_CANDIDATES: usize = 8;

/// A subset of `{1, …, N}`, sorted and deduplicated, with a membership bitset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "IntegerSetRepr", into = "IntegerSetRepr")]
pub struct IntegerSet {
    n: u64,
    elements: Vec<u64>,
    bits: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct IntegerSetRepr {
    #[serde(rename = "N")]
    n: u64,
    elements: Vec<u64>,
}

impl TryFrom<IntegerSetRepr> for IntegerSet {
    type Error = Error;

    fn try_from(r: IntegerSetRepr) -> Result<Self> {
        IntegerSet::new(r.n, r.elements)
    }
}

impl From<IntegerSet> for IntegerSetRepr {
    fn from(s: IntegerSet) -> Self {
        IntegerSetRepr {
            n: s.n,
            elements: s.elements,
        }
    }
}

impl IntegerSet {
    pub fn new(n: u64, mut elements: Vec<u64>) -> Result<Self> {
        elements.sort_unstable();
        elements.dedup();
        if let Some(&x) = elements.iter().find(|&&x| x == 0 || x > n) {
            return Err(Error::OutOfRange(format!("{x} is not in 1..={n}")));
        }
        let mut bits = vec![0u64; (n as usize + 1).div_ceil(64)];
        for &x in &elements {
            bits[x as usize / 64] |= 1 << (x % 64);
        }
        Ok(IntegerSet { n, elements, bits })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, x: u64) -> bool {
        x >= 1 && x <= self.n && self.bits[x as usize / 64] >> (x % 64) & 1 == 1
    }

    /// `S ∩ {1, …, m}` as a subset of `{1, …, m}`.
    pub fn truncate(&self, m: u64) -> IntegerSet {
        let m = m.min(self.n);
        IntegerSet::new(m, self.elements.iter().copied().filter(|&x| x <= m).collect())
            .expect("elements lie in range")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApFreeReport {
    pub free: bool,
    /// `(a, b, c)` with `a < b < c` and `a + c = 2b`.
    pub witness: Option<(u64, u64, u64)>,
}

/// Pair scan for `a + c = 2b` with `a, b, c` distinct elements.
pub fn verify_ap_free(s: &IntegerSet) -> Result<ApFreeReport> {
    if s.len() > ORACLE_GUARD {
        return Err(Error::GuardExceeded {
            what: "progression oracle",
            limit: ORACLE_GUARD,
            actual: s.len(),
        });
    }
    let e = s.elements();
    let witness = (0..e.len()).into_par_iter().find_map_first(|i| {
        let a = e[i];
        e[i + 1..]
            .iter()
            .find(|&&c| (a + c) % 2 == 0 && s.contains((a + c) / 2))
            .map(|&c| (a, (a + c) / 2, c))
    });
    Ok(ApFreeReport {
        free: witness.is_none(),
        witness,
    })
}

/// Digit-vector parameters: vectors in `{0, …, digits−1}^dimension`, read in
/// base `2·digits` so that sums of two vectors never carry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SphereParams {
    pub dimension: usize,
    pub digits: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Construction {
    pub method: String,
    pub set: IntegerSet,
    pub dimension: Option<usize>,
    pub digits: Option<u64>,
    /// Squared radius of the sphere or inner radius of the annulus.
    pub radius: Option<u64>,
    /// Width of the annulus in squared radius (1 for a sphere).
    pub width: Option<u64>,
    /// Parameter combinations scanned.
    pub grid_size: usize,
    /// Whether the oracle ran; it is skipped above [`ORACLE_GUARD`].
    pub verified: bool,
}

fn finish(mut c: Construction) -> Result<Construction> {
    if c.set.len() <= ORACLE_GUARD {
        let report = verify_ap_free(&c.set)?;
        if let Some(w) = report.witness {
            return Err(Error::verification(format!("{} output contains {w:?}", c.method)));
        }
        c.verified = true;
    }
    Ok(c)
}

/// Squared norms of the digit vectors of `v = 0, …, N−1`, or `None` when
/// `v` is not such a vector.
fn digit_norms(n: u64, p: SphereParams) -> Vec<Option<u64>> {
    let base = 2 * p.digits;
    (0..n)
        .map(|v| {
            let mut rest = v;
            let mut norm = 0;
            for _ in 0..p.dimension {
                let digit = rest % base;
                if digit >= p.digits {
                    return None;
                }
                norm += digit * digit;
                rest /= base;
            }
            (rest == 0).then_some(norm)
        })
        .collect()
}

fn sphere_grid(n: u64) -> Vec<SphereParams> {
    let mut grid = Vec::new();
    for dimension in 1..=MAX_DIMENSION {
        for digits in 1..=MAX_DIGIT {
            let base = 2 * digits;
            // Skip parameters whose top coordinate can never be nonzero.
            if dimension > 1 && base.checked_pow(dimension as u32 - 1).is_none_or(|b| b > n.max(1)) {
                continue;
            }
            grid.push(SphereParams { dimension, digits });
        }
    }
    grid
}

/// The most populated sphere for fixed parameters: `(radius, elements)`.
fn best_sphere(n: u64, p: SphereParams) -> (u64, Vec<u64>) {
    let norms = digit_norms(n, p);
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for r in norms.iter().flatten() {
        *counts.entry(*r).or_default() += 1;
    }
    let (&r, _) = counts
        .iter()
        .max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(x.0)))
        .expect("the zero vector is always present");
    let elements = norms
        .iter()
        .enumerate()
        .filter(|(_, m)| **m == Some(r))
        .map(|(v, _)| v as u64 + 1)
        .collect();
    (r, elements)
}

/// Behrend's construction: integers whose base-`2d` digits, all below `d`,
/// lie on a common sphere.
pub fn behrend(n: u64, params: Option<SphereParams>) -> Result<Construction> {
    if n == 0 {
        return Err(Error::param("N must be at least 1"));
    }
    let grid = match params {
        Some(p) if p.dimension == 0 || p.digits == 0 => {
            return Err(Error::param("dimension and digits must be positive"))
        }
        Some(p) => vec![p],
        None => sphere_grid(n),
    };
    let mut best: Option<(SphereParams, u64, Vec<u64>)> = None;
    for &p in &grid {
        let (r, elements) = best_sphere(n, p);
        if best.as_ref().is_none_or(|b| elements.len() > b.2.len()) {
            best = Some((p, r, elements));
        }
    }
    let (p, r, elements) = best.expect("grid is nonempty");
    finish(Construction {
        method: "behrend".into(),
        set: IntegerSet::new(n, elements)?,
        dimension: Some(p.dimension),
        digits: Some(p.digits),
        radius: Some(r),
        width: Some(1),
        grid_size: grid.len(),
        verified: false,
    })
}

/// Smallest-first greedy filter of a sorted candidate list.
fn greedy_filter(n: u64, candidates: impl IntoIterator<Item = u64>) -> Vec<u64> {
    let mut forbidden = vec![false; n as usize + 1];
    let mut kept: Vec<u64> = Vec::new();
    for c in candidates {
        if forbidden[c as usize] {
            continue;
        }
        for &a in &kept {
            let next = 2 * c - a;
            if next <= n {
                forbidden[next as usize] = true;
            }
        }
        kept.push(c);
    }
    kept
}

/// A thickened sphere: digit vectors with squared norm in `[r, r + w)`,
/// greedily thinned to a progression-free set. Width 1 recovers the sphere.
pub fn elkin(n: u64, params: Option<SphereParams>) -> Result<Construction> {
    if n == 0 {
        return Err(Error::param("N must be at least 1"));
    }
    let bases = match params {
        Some(p) if p.dimension == 0 || p.digits == 0 => {
            return Err(Error::param("dimension and digits must be positive"))
        }
        Some(p) => vec![p],
        None => {
            let mut ranked: Vec<(usize, SphereParams)> =
                sphere_grid(n).into_iter().map(|p| (best_sphere(n, p).1.len(), p)).collect();
            ranked.sort_by(|x, y| y.0.cmp(&x.0));
            ranked.into_iter().take(ELKIN_CANDIDATES).map(|(_, p)| p).collect()
        }
    };
    let mut best: Option<(SphereParams, u64, u64, Vec<u64>)> = None;
    let mut grid_size = 0;
    for &p in &bases {
        let norms = digit_norms(n, p);
        let max_norm = norms.iter().flatten().copied().max().unwrap_or(0);
        let mut hist = vec![0usize; max_norm as usize + 1];
        for r in norms.iter().flatten() {
            hist[*r as usize] += 1;
        }
        for &w in &ELKIN_WIDTHS {
            grid_size += 1;
            let mut best_r = 0;
            let mut best_count = 0;
            for r in 0..=max_norm {
                let count: usize = (r..(r + w).min(max_norm + 1)).map(|s| hist[s as usize]).sum();
                if count > best_count {
                    best_count = count;
                    best_r = r;
                }
            }
            let candidates = norms
                .iter()
                .enumerate()
                .filter(|(_, m)| m.is_some_and(|m| m >= best_r && m < best_r + w))
                .map(|(v, _)| v as u64 + 1);
            let kept = greedy_filter(n, candidates);
            if best.as_ref().is_none_or(|b| kept.len() > b.3.len()) {
                best = Some((p, best_r, w, kept));
            }
        }
    }
    let (p, r, w, elements) = best.expect("grid is nonempty");
    finish(Construction {
        method: "elkin".into(),
        set: IntegerSet::new(n, elements)?,
        dimension: Some(p.dimension),
        digits: Some(p.digits),
        radius: Some(r),
        width: Some(w),
        grid_size,
        verified: false,
    })
}

/// Smallest-first greedy progression-free set.
pub fn greedy_ap_free(n: u64) -> Result<Construction> {
    if n == 0 {
        return Err(Error::param("N must be at least 1"));
    }
    finish(Construction {
        method: "greedy".into(),
        set: IntegerSet::new(n, greedy_filter(n, 1..=n))?,
        dimension: None,
        digits: None,
        radius: None,
        width: None,
        grid_size: 1,
        verified: false,
    })
}

/// Each of `1, …, N` independently with probability `α`.
pub fn random_set(n: u64, alpha: f64, seed: u64) -> Result<IntegerSet> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param(format!("α = {alpha} is not in [0, 1]")));
    }
    let mut rng = derived_rng(seed, "random_set", 0);
    IntegerSet::new(n, (1..=n).filter(|_| rng.random_bool(alpha)).collect())
}
