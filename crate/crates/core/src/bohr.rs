//! Bohr sets `B = {x : |1 − γ(x)| ≤ δ_γ for all γ ∈ Γ}` with exact membership.
//!
//! Characters take values in the `L`-th roots of unity, `L` the exponent, so
//! `|1 − γ(x)| = 2|sin(πk/L)|` for an integer phase `k`. Each width is turned
//! into the largest admissible `min(k, L − k)` once; membership is then an
//! integer comparison.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{phase_distance, GMeasure, Group, SetOnGroup};

pub const DEFAULT_ENUMERATION_GUARD: usize = 1 << 22;
pub const DEFAULT_REGULARITY_CONSTANT: f64 = 16.0;
pub const DEFAULT_SIZE_CONSTANT: f64 = 4.0;

/// Slack applied when comparing `2|sin(πk/L)|` against a width.
const BOUNDARY_SLACK: f64 = 1e-12;

#[derive(Debug)]
pub struct BohrSet {
    group: Group,
    frequencies: Vec<usize>,
    widths: Vec<f64>,
    members: SetOnGroup,
    guard: usize,
    dimension: OnceLock<f64>,
}

impl Clone for BohrSet {
    fn clone(&self) -> Self {
        let dimension = OnceLock::new();
        if let Some(&d) = self.dimension.get() {
            let _ = dimension.set(d);
        }
        BohrSet {
            group: self.group.clone(),
            frequencies: self.frequencies.clone(),
            widths: self.widths.clone(),
            members: self.members.clone(),
            guard: self.guard,
            dimension,
        }
    }
}

impl PartialEq for BohrSet {
    fn eq(&self, other: &Self) -> bool {
        self.group == other.group
            && self.frequencies == other.frequencies
            && self.widths == other.widths
    }
}

/// JSON form of a Bohr set; frequencies are written as dual residues.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BohrDescriptor {
    pub frequencies: Vec<Vec<usize>>,
    pub widths: Vec<f64>,
}

/// Largest `k ≤ L/2` with `2 sin(πk/L) ≤ width`.
fn phase_threshold(width: f64, l: usize) -> usize {
    if width >= 2.0 {
        return l / 2;
    }
    let mut k = ((width / 2.0).asin() * l as f64 / std::f64::consts::PI).floor() as usize;
    k = k.min(l / 2);
    while k < l / 2 && phase_distance(k + 1, l) <= width + BOUNDARY_SLACK {
        k += 1;
    }
    while k > 0 && phase_distance(k, l) > width + BOUNDARY_SLACK {
        k -= 1;
    }
    k
}

/// Members of `{x : |1 − γ(x)| ≤ δ_γ ∀γ}`, computed from scratch.
pub fn enumerate(group: &Group, frequencies: &[usize], widths: &[f64], guard: usize) -> Result<SetOnGroup> {
    if group.order() > guard {
        return Err(Error::GuardExceeded {
            what: "Bohr enumeration",
            limit: guard,
            actual: group.order(),
        });
    }
    let l = group.exponent();
    let thresholds: Vec<usize> = widths.iter().map(|&w| phase_threshold(w, l)).collect();
    Ok(SetOnGroup::from_predicate(group, |x| {
        frequencies.iter().zip(&thresholds).all(|(&chi, &kmax)| {
            let k = group.phase(chi, x);
            k.min(l - k) <= kmax
        })
    }))
}

impl BohrSet {
    pub fn new(group: &Group, frequencies: Vec<usize>, widths: Vec<f64>) -> Result<Self> {
        Self::with_guard(group, frequencies, widths, DEFAULT_ENUMERATION_GUARD)
    }

    pub fn with_guard(group: &Group, frequencies: Vec<usize>, widths: Vec<f64>, guard: usize) -> Result<Self> {
        if frequencies.len() != widths.len() {
            return Err(Error::param(format!(
                "{} frequencies but {} widths",
                frequencies.len(),
                widths.len()
            )));
        }
        for &chi in &frequencies {
            group.check_index(chi)?;
        }
        if let Some(w) = widths.iter().find(|w| !(**w > 0.0 && **w <= 2.0)) {
            return Err(Error::param(format!("width {w} is not in (0, 2]")));
        }
        let members = enumerate(group, &frequencies, &widths, guard)?;
        Ok(BohrSet {
            group: group.clone(),
            frequencies,
            widths,
            members,
            guard,
            dimension: OnceLock::new(),
        })
    }

    /// The Bohr set with no frequencies, which is the whole group.
    pub fn trivial(group: &Group) -> Result<Self> {
        Self::new(group, Vec::new(), Vec::new())
    }

    /// The Bohr set with a common width on every frequency.
    pub fn uniform_width(group: &Group, frequencies: Vec<usize>, width: f64) -> Result<Self> {
        let widths = vec![width; frequencies.len()];
        Self::new(group, frequencies, widths)
    }

    pub fn from_descriptor(group: &Group, desc: &BohrDescriptor) -> Result<Self> {
        let frequencies = desc
            .frequencies
            .iter()
            .map(|c| group.index_of(c))
            .collect::<Result<Vec<_>>>()?;
        Self::new(group, frequencies, desc.widths.clone())
    }

    pub fn descriptor(&self) -> BohrDescriptor {
        BohrDescriptor {
            frequencies: self.frequencies.iter().map(|&c| self.group.coords(c)).collect(),
            widths: self.widths.clone(),
        }
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn frequencies(&self) -> &[usize] {
        &self.frequencies
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn guard(&self) -> usize {
        self.guard
    }

    pub fn rank(&self) -> usize {
        self.frequencies.len()
    }

    pub fn members(&self) -> &SetOnGroup {
        &self.members
    }

    pub fn contains(&self, x: usize) -> bool {
        self.members.contains(x)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `μ_G(B)`.
    pub fn density(&self) -> f64 {
        self.members.density()
    }

    /// Recomputes membership and compares with the cached bitset.
    pub fn verify_membership(&self) -> Result<bool> {
        Ok(enumerate(&self.group, &self.frequencies, &self.widths, self.guard)? == self.members)
    }

    /// `B_ρ`, with widths `min(ρδ_γ, 2)`.
    pub fn dilate(&self, rho: f64) -> Result<BohrSet> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::param(format!("dilation factor {rho} is not positive")));
        }
        let widths = self.widths.iter().map(|&w| (rho * w).min(2.0)).collect();
        BohrSet::with_guard(&self.group, self.frequencies.clone(), widths, self.guard)
    }

    /// `|B_ρ|` without keeping the dilate.
    pub fn dilate_size(&self, rho: f64) -> Result<usize> {
        if rho == 1.0 {
            return Ok(self.len());
        }
        Ok(self.dilate(rho)?.len())
    }

    /// The Bohr set with frequencies `Γ ∪ Γ'` and widths `δ ∧ δ'`.
    pub fn meet(&self, other: &BohrSet) -> Result<BohrSet> {
        if self.group != other.group {
            return Err(Error::GroupMismatch);
        }
        let mut frequencies = self.frequencies.clone();
        let mut widths = self.widths.clone();
        for (&chi, &w) in other.frequencies.iter().zip(&other.widths) {
            match frequencies.iter().position(|&c| c == chi) {
                Some(i) => widths[i] = widths[i].min(w),
                None => {
                    frequencies.push(chi);
                    widths.push(w);
                }
            }
        }
        BohrSet::with_guard(&self.group, frequencies, widths, self.guard.min(other.guard))
    }

    /// The smallest `d ≥ 1` with `|B_{2ρ}| ≤ 2^d |B_ρ|` at every grid `ρ`.
    pub fn dimension_estimate(&self, grid: &[f64]) -> Result<f64> {
        let mut d: f64 = 1.0;
        for &rho in grid {
            if !(rho > 0.0 && rho <= 1.0) {
                return Err(Error::param(format!("grid point {rho} is not in (0, 1]")));
            }
            let small = self.dilate_size(rho)? as f64;
            let big = self.dilate_size(2.0 * rho)? as f64;
            d = d.max((big / small).log2());
        }
        Ok(d)
    }

    /// Dimension on [`default_dimension_grid`], cached.
    pub fn dimension(&self) -> Result<f64> {
        if let Some(&d) = self.dimension.get() {
            return Ok(d);
        }
        let d = self.dimension_estimate(&default_dimension_grid())?;
        let _ = self.dimension.set(d);
        Ok(d)
    }

    /// Whether `|B_{2ρ}| ≤ 2^d |B_ρ|` at every grid point.
    pub fn doubling_holds(&self, d: f64, grid: &[f64]) -> Result<bool> {
        for &rho in grid {
            let small = self.dilate_size(rho)? as f64;
            let big = self.dilate_size(2.0 * rho)? as f64;
            if big > 2f64.powf(d) * small * (1.0 + 1e-12) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Measured ratios `|B_{λ(1+η)}| / |B_λ|` for a fixed `λ`.
    pub fn regularity_report(&self, lambda: f64, c_r: f64, etas: &[f64]) -> Result<RegularityReport> {
        let d = self.dimension()?;
        let base = self.dilate_size(lambda)? as f64;
        let mut ratios = Vec::with_capacity(etas.len());
        let mut passed = true;
        for &eta in etas {
            let r = self.dilate_size(lambda * (1.0 + eta))? as f64 / base;
            let slack = c_r * d * eta.abs();
            if r > 1.0 + slack + 1e-12 || r < 1.0 - slack - 1e-12 {
                passed = false;
            }
            ratios.push(r);
        }
        Ok(RegularityReport {
            lambda,
            regularity_constant: c_r,
            dimension: d,
            etas: etas.to_vec(),
            ratios,
            passed,
        })
    }

    /// Scans `λ = 1/2 + j/(2·steps)` and returns the first `λ` whose dilate is
    /// regular on the η grid.
    pub fn find_regular_dilate(&self, c_r: f64, grid: &RegularityGrid) -> Result<(f64, RegularityReport)> {
        let d = self.dimension()?;
        let etas = grid.etas(c_r, d);
        for j in 0..grid.lambda_steps {
            let lambda = 0.5 + j as f64 / (2.0 * grid.lambda_steps as f64);
            let report = self.regularity_report(lambda, c_r, &etas)?;
            if report.passed {
                return Ok((lambda, report));
            }
        }
        Err(Error::verification(format!(
            "no regular dilate among {} grid values (rank {}, |B| = {})",
            grid.lambda_steps,
            self.rank(),
            self.len()
        )))
    }

    /// Recomputes a report from its own `λ` and η grid.
    pub fn verify_regularity(&self, report: &RegularityReport) -> Result<bool> {
        let again = self.regularity_report(report.lambda, report.regularity_constant, &report.etas)?;
        Ok(again.passed && again.ratios == report.ratios)
    }

    /// Exact size and the bound `exp(−c₀ rk) ∏ (δ_γ/4) |G|`.
    pub fn size_bounds(&self, c0: f64) -> SizeBounds {
        let n = self.group.order() as f64;
        let prod: f64 = self.widths.iter().map(|w| w / 4.0).product();
        let bound = (-c0 * self.rank() as f64).exp() * prod * n;
        SizeBounds {
            exact: self.len(),
            bound,
            holds: self.len() as f64 >= bound,
        }
    }

    /// `{t·x : x ∈ B}`, which is the Bohr set with frequencies `t⁻¹·γ`.
    pub fn scalar_image(&self, t: i64) -> Result<BohrSet> {
        let inv = self.group.unit_inverse(t)?;
        let frequencies = self.frequencies.iter().map(|&c| self.group.scale(inv, c)).collect();
        BohrSet::with_guard(&self.group, frequencies, self.widths.clone(), self.guard)
    }

    /// `β_ρ`, the uniform probability measure on `B_ρ`.
    pub fn beta_measure(&self, rho: f64) -> Result<GMeasure> {
        if rho == 1.0 {
            return GMeasure::uniform_on(&self.members);
        }
        GMeasure::uniform_on(self.dilate(rho)?.members())
    }

    pub fn beta(&self) -> GMeasure {
        GMeasure::uniform_on(&self.members).expect("Bohr sets contain 0")
    }
}

/// `ρ = j/16` for `j = 1..=16`.
pub fn default_dimension_grid() -> Vec<f64> {
    (1..=16).map(|j| j as f64 / 16.0).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityGrid {
    /// Number of `λ` values scanned in `[1/2, 1)`.
    pub lambda_steps: usize,
    /// Number of η values; half positive, half negative.
    pub eta_points: usize,
}

impl Default for RegularityGrid {
    fn default() -> Self {
        RegularityGrid {
            lambda_steps: 32,
            eta_points: 32,
        }
    }
}

impl RegularityGrid {
    /// `±k/(C_R d m)` for `k = 1..=m`, with `m = eta_points / 2`.
    pub fn etas(&self, c_r: f64, d: f64) -> Vec<f64> {
        let m = (self.eta_points / 2).max(1);
        let top = 1.0 / (c_r * d);
        (1..=m)
            .flat_map(|k| {
                let e = top * k as f64 / m as f64;
                [e, -e]
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub lambda: f64,
    pub regularity_constant: f64,
    pub dimension: f64,
    pub etas: Vec<f64>,
    pub ratios: Vec<f64>,
    pub passed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeBounds {
    pub exact: usize,
    pub bound: f64,
    pub holds: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z15() -> BohrSet {
        let g = Group::cyclic(15).unwrap();
        BohrSet::new(&g, vec![1], vec![0.5]).unwrap()
    }

    #[test]
    fn enumeration_examples() {
        let g = Group::cyclic(15).unwrap();
        assert_eq!(BohrSet::trivial(&g).unwrap().len(), 15);
        assert_eq!(BohrSet::uniform_width(&g, vec![1, 4, 7], 2.0).unwrap().len(), 15);
        assert_eq!(z15().members().to_vec(), vec![0, 1, 14]);
        assert!(z15().verify_membership().unwrap());
        assert!(BohrSet::with_guard(&g, vec![], vec![], 10).is_err());
        assert!(BohrSet::new(&g, vec![1], vec![0.0]).is_err());
        assert!(BohrSet::new(&g, vec![1], vec![2.5]).is_err());
    }

    #[test]
    fn boundary_counts_as_inside() {
        let g = Group::cyclic(6).unwrap();
        // |1 − e^{2πi/6}| = 1 exactly
        let b = BohrSet::new(&g, vec![1], vec![1.0]).unwrap();
        assert_eq!(b.members().to_vec(), vec![0, 1, 5]);
    }

    #[test]
    fn dilation_examples() {
        let b = z15();
        assert_eq!(b.dilate(1.0).unwrap().members(), b.members());
        assert_eq!(b.dilate(2.0).unwrap().members().to_vec(), vec![0, 1, 2, 13, 14]);
        let wide = b.dilate(10.0).unwrap();
        assert_eq!(wide.widths(), &[2.0]);
        assert_eq!(wide.len(), 15);
        assert!(b.dilate(0.0).is_err());
    }

    #[test]
    fn meet_examples() {
        let g = Group::cyclic(15).unwrap();
        let b = z15();
        let e = BohrSet::trivial(&g).unwrap();
        assert_eq!(b.meet(&e).unwrap().members(), b.members());
        let c = BohrSet::new(&g, vec![2], vec![1.2]).unwrap();
        let m = b.meet(&c).unwrap();
        assert_eq!(m.members(), &b.members().intersection(c.members()).unwrap());
        assert_eq!(m.rank(), 2);
        let same = b.meet(&BohrSet::new(&g, vec![1], vec![0.3]).unwrap()).unwrap();
        assert_eq!(same.rank(), 1);
        assert_eq!(same.widths(), &[0.3]);
    }

    #[test]
    fn dimension_examples() {
        let g = Group::cyclic(101).unwrap();
        assert_eq!(BohrSet::trivial(&g).unwrap().dimension().unwrap(), 1.0);
        let b = BohrSet::new(&g, vec![1], vec![0.2]).unwrap();
        let grid = default_dimension_grid();
        let d = b.dimension_estimate(&grid).unwrap();
        assert!((1.0..=2.0).contains(&d), "{d}");
        assert!(b.doubling_holds(d, &grid).unwrap());
        assert!(b.doubling_holds(d + 0.5, &grid).unwrap());
    }

    #[test]
    fn regular_dilate_examples() {
        let g = Group::cyclic(1009).unwrap();
        let empty = BohrSet::trivial(&g).unwrap();
        let (lam, rep) = empty.find_regular_dilate(16.0, &RegularityGrid::default()).unwrap();
        assert_eq!(lam, 0.5);
        assert!(rep.ratios.iter().all(|&r| r == 1.0));

        let b = BohrSet::new(&g, vec![1], vec![0.5]).unwrap();
        let (lam, rep) = b.find_regular_dilate(16.0, &RegularityGrid::default()).unwrap();
        assert!((0.5..1.0).contains(&lam));
        assert!(rep.passed);
        assert!(b.verify_regularity(&rep).unwrap());
        let (lam2, _) = b.find_regular_dilate(16.0, &RegularityGrid::default()).unwrap();
        assert_eq!(lam, lam2);
    }

    #[test]
    fn size_bound_examples() {
        let g = Group::cyclic(15).unwrap();
        let e = BohrSet::trivial(&g).unwrap().size_bounds(DEFAULT_SIZE_CONSTANT);
        assert_eq!(e.exact, 15);
        assert!(e.bound <= 15.0);
        let s = z15().size_bounds(DEFAULT_SIZE_CONSTANT);
        assert_eq!(s.exact, 3);
        assert!(s.holds);
    }

    #[test]
    fn scalar_image_examples() {
        let b = z15();
        assert_eq!(b.scalar_image(1).unwrap().members(), b.members());
        assert_eq!(b.scalar_image(-1).unwrap().members(), b.members());
        let img = b.scalar_image(-2).unwrap();
        assert_eq!(img.members().to_vec(), vec![0, 2, 13]);
        assert_eq!(img.members(), &b.members().scale(-2).unwrap());
        assert!(b.scalar_image(3).is_err());
    }

    #[test]
    fn beta_examples() {
        let g = Group::cyclic(15).unwrap();
        let haar = BohrSet::trivial(&g).unwrap().beta();
        assert!(haar.max_abs_diff(&GMeasure::haar(&g)).unwrap() < 1e-15);
        let beta = z15().beta_measure(1.0).unwrap();
        for x in 0..15 {
            let expect = if [0, 1, 14].contains(&x) { 1.0 / 3.0 } else { 0.0 };
            assert!((beta.mass_at(x) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn descriptor_round_trip() {
        let g = Group::new(vec![3, 5]).unwrap();
        let b = BohrSet::new(&g, vec![7, 2], vec![0.75, 1.5]).unwrap();
        let text = serde_json::to_string(&b.descriptor()).unwrap();
        assert_eq!(text, r#"{"frequencies":[[1,2],[0,2]],"widths":[0.75,1.5]}"#);
        let back: BohrDescriptor = serde_json::from_str(&text).unwrap();
        assert_eq!(BohrSet::from_descriptor(&g, &back).unwrap(), b);
    }
}
