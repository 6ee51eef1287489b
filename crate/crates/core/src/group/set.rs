use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GFunction, Group};
use crate::error::{Error, Result};
use crate::rng::derived_rng;

/// A subset of a group stored as a bitset over canonical indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SetSpec", into = "SetSpec")]
pub struct SetOnGroup {
    group: Group,
    words: Vec<u64>,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct SetSpec {
    invariant_factors: Vec<usize>,
    elements: Vec<usize>,
}

impl TryFrom<SetSpec> for SetOnGroup {
    type Error = Error;
    fn try_from(spec: SetSpec) -> Result<Self> {
        let group = Group::new(spec.invariant_factors)?;
        SetOnGroup::from_indices(&group, spec.elements)
    }
}

impl From<SetOnGroup> for SetSpec {
    fn from(s: SetOnGroup) -> Self {
        SetSpec {
            elements: s.iter().collect(),
            invariant_factors: s.group.factors().to_vec(),
        }
    }
}

impl SetOnGroup {
    pub fn empty(group: &Group) -> Self {
        SetOnGroup {
            group: group.clone(),
            words: vec![0; group.order().div_ceil(64)],
            len: 0,
        }
    }

    pub fn full(group: &Group) -> Self {
        let mut s = Self::empty(group);
        for x in 0..group.order() {
            s.insert(x);
        }
        s
    }

    pub fn from_indices(group: &Group, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut s = Self::empty(group);
        for x in indices {
            group.check_index(x)?;
            s.insert(x);
        }
        Ok(s)
    }

    pub fn from_predicate(group: &Group, mut pred: impl FnMut(usize) -> bool) -> Self {
        let mut s = Self::empty(group);
        for x in 0..group.order() {
            if pred(x) {
                s.insert(x);
            }
        }
        s
    }

    /// Each element independently with probability `alpha`, drawn from `seed`.
    pub fn random(group: &Group, alpha: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::param(format!("density {alpha} is not in [0, 1]")));
        }
        let mut rng = derived_rng(seed, "random_subset", 0);
        Ok(Self::from_predicate(group, |_| rng.random_bool(alpha)))
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    #[inline]
    pub fn contains(&self, x: usize) -> bool {
        x < self.group.order() && self.words[x >> 6] >> (x & 63) & 1 == 1
    }

    pub fn insert(&mut self, x: usize) -> bool {
        let w = &mut self.words[x >> 6];
        let bit = 1u64 << (x & 63);
        if *w & bit == 0 {
            *w |= bit;
            self.len += 1;
            true
        } else {
            false
        }
    }

    pub fn remove(&mut self, x: usize) -> bool {
        let w = &mut self.words[x >> 6];
        let bit = 1u64 << (x & 63);
        if *w & bit != 0 {
            *w &= !bit;
            self.len -= 1;
            true
        } else {
            false
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `|A| / |G|`.
    pub fn density(&self) -> f64 {
        self.len as f64 / self.group.order() as f64
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * 64 + b)
                }
            })
        })
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    fn same_group(&self, other: &Self) -> Result<()> {
        if self.group == other.group {
            Ok(())
        } else {
            Err(Error::GroupMismatch)
        }
    }

    fn zip_words(&self, other: &Self, f: impl Fn(u64, u64) -> u64) -> Result<Self> {
        self.same_group(other)?;
        let words: Vec<u64> = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(&a, &b)| f(a, b))
            .collect();
        let len = words.iter().map(|w| w.count_ones() as usize).sum();
        Ok(SetOnGroup {
            group: self.group.clone(),
            words,
            len,
        })
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        self.zip_words(other, |a, b| a & b)
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.zip_words(other, |a, b| a | b)
    }

    pub fn difference(&self, other: &Self) -> Result<Self> {
        self.zip_words(other, |a, b| a & !b)
    }

    pub fn is_subset(&self, other: &Self) -> Result<bool> {
        self.same_group(other)?;
        Ok(self.words.iter().zip(&other.words).all(|(&a, &b)| a & !b == 0))
    }

    /// `{t + a : a ∈ A}`.
    pub fn translate(&self, t: usize) -> Self {
        let mut out = Self::empty(&self.group);
        for a in self.iter() {
            out.insert(self.group.add(t, a));
        }
        out
    }

    /// `{t − a : a ∈ A}`.
    pub fn reflect_about(&self, t: usize) -> Self {
        let mut out = Self::empty(&self.group);
        for a in self.iter() {
            out.insert(self.group.sub(t, a));
        }
        out
    }

    /// `{s·a : a ∈ A}`; `s` must be a unit so that the image has the same size.
    pub fn scale(&self, s: i64) -> Result<Self> {
        if !self.group.is_unit(s) {
            return Err(Error::NonUnitScalar {
                scalar: s,
                exponent: self.group.exponent(),
            });
        }
        let mut out = Self::empty(&self.group);
        for a in self.iter() {
            out.insert(self.group.scale(s, a));
        }
        Ok(out)
    }

    pub fn indicator(&self) -> GFunction {
        let values = (0..self.group.order())
            .map(|x| {
                if self.contains(x) {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        GFunction::from_values(&self.group, values).expect("length matches order")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cardinality_tracks_bits() {
        let g = Group::cyclic(130).unwrap();
        let mut s = SetOnGroup::from_indices(&g, [0, 63, 64, 129]).unwrap();
        assert_eq!(s.len(), 4);
        assert!(!s.insert(63));
        assert!(s.remove(64));
        assert_eq!(s.to_vec(), vec![0, 63, 129]);
        assert!((s.density() - 3.0 / 130.0).abs() < 1e-15);
        assert!(SetOnGroup::from_indices(&g, [130]).is_err());
    }

    #[test]
    fn set_algebra() {
        let g = Group::cyclic(10).unwrap();
        let a = SetOnGroup::from_indices(&g, [1, 2, 3]).unwrap();
        let b = SetOnGroup::from_indices(&g, [3, 4]).unwrap();
        assert_eq!(a.intersection(&b).unwrap().to_vec(), vec![3]);
        assert_eq!(a.union(&b).unwrap().len(), 4);
        assert_eq!(a.difference(&b).unwrap().to_vec(), vec![1, 2]);
        assert_eq!(a.translate(8).to_vec(), vec![0, 1, 9]);
        assert_eq!(a.reflect_about(0).to_vec(), vec![7, 8, 9]);
        assert!(a.scale(2).is_err());
        let other = SetOnGroup::empty(&Group::cyclic(11).unwrap());
        assert_eq!(a.union(&other), Err(Error::GroupMismatch));
    }

    #[test]
    fn json_round_trip() {
        let g = Group::new(vec![3, 5]).unwrap();
        let a = SetOnGroup::from_indices(&g, [0, 7, 14]).unwrap();
        let text = serde_json::to_string(&a).unwrap();
        assert_eq!(text, r#"{"invariant_factors":[3,5],"elements":[0,7,14]}"#);
        let back: SetOnGroup = serde_json::from_str(&text).unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<SetOnGroup>(r#"{"invariant_factors":[5],"elements":[5]}"#).is_err());
    }
}
