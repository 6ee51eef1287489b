//! Explicit finite abelian groups `Z/m_1 × … × Z/m_k` and their duals.
//!
//! Elements and characters are both addressed by a canonical index in
//! `0..order`, the row-major mixed-radix encoding of their coordinates
//! (the first invariant factor is the most significant digit). Every JSON
//! file produced by this crate uses the same order.
//!
//! The character with dual coordinates `a` evaluates at `x` to
//! `exp(2πi Σ a_j x_j / m_j)`. Phases are kept as exact integers modulo
//! the group exponent `L = lcm(m_j)`, so membership tests built on them
//! (Bohr sets, annihilators) are exact.

mod function;
mod measure;
mod set;

pub use function::{convolve, fourier, inverse_fourier, measure_fourier, DualFunction, GFunction};
pub use measure::GMeasure;
pub use set::SetOnGroup;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// A finite abelian group given by its invariant factors.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GroupSpec", into = "GroupSpec")]
pub struct Group {
    factors: Vec<usize>,
    strides: Vec<usize>,
    order: usize,
    exponent: usize,
}

#[derive(Serialize, Deserialize)]
struct GroupSpec {
    invariant_factors: Vec<usize>,
}

impl TryFrom<GroupSpec> for Group {
    type Error = Error;
    fn try_from(spec: GroupSpec) -> Result<Self> {
        Group::new(spec.invariant_factors)
    }
}

impl From<Group> for GroupSpec {
    fn from(g: Group) -> Self {
        GroupSpec {
            invariant_factors: g.factors,
        }
    }
}

impl Group {
    pub fn new(factors: Vec<usize>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidGroup("no invariant factors".into()));
        }
        if let Some(m) = factors.iter().find(|&&m| m < 2) {
            return Err(Error::InvalidGroup(format!("factor {m} is smaller than 2")));
        }
        let order = factors
            .iter()
            .try_fold(1usize, |acc, &m| acc.checked_mul(m))
            .ok_or_else(|| Error::InvalidGroup("order overflows usize".into()))?;
        let mut strides = vec![1; factors.len()];
        for j in (0..factors.len() - 1).rev() {
            strides[j] = strides[j + 1] * factors[j + 1];
        }
        let exponent = factors.iter().fold(1, |l, &m| l / gcd(l, m) * m);
        Ok(Group {
            factors,
            strides,
            order,
            exponent,
        })
    }

    /// The cyclic group `Z/n`.
    pub fn cyclic(n: usize) -> Result<Self> {
        Group::new(vec![n])
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `lcm` of the invariant factors; every phase is a multiple of `1/exponent`.
    pub fn exponent(&self) -> usize {
        self.exponent
    }

    pub fn is_odd_order(&self) -> bool {
        self.factors.iter().all(|m| m % 2 == 1)
    }

    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    pub fn coords(&self, index: usize) -> Vec<usize> {
        self.factors
            .iter()
            .zip(&self.strides)
            .map(|(&m, &s)| (index / s) % m)
            .collect()
    }

    pub fn index_of(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.factors.len() {
            return Err(Error::OutOfRange(format!(
                "expected {} coordinates, got {}",
                self.factors.len(),
                coords.len()
            )));
        }
        let mut idx = 0;
        for ((&r, &m), &s) in coords.iter().zip(&self.factors).zip(&self.strides) {
            if r >= m {
                return Err(Error::OutOfRange(format!("residue {r} not below {m}")));
            }
            idx += r * s;
        }
        Ok(idx)
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index < self.order {
            Ok(())
        } else {
            Err(Error::OutOfRange(format!(
                "index {index} not below group order {}",
                self.order
            )))
        }
    }

    fn combine(&self, a: usize, b: usize, f: impl Fn(usize, usize, usize) -> usize) -> usize {
        if self.factors.len() == 1 {
            return f(a, b, self.order);
        }
        let mut out = 0;
        for (&m, &s) in self.factors.iter().zip(&self.strides) {
            out += f((a / s) % m, (b / s) % m, m) * s;
        }
        out
    }

    pub fn add(&self, a: usize, b: usize) -> usize {
        self.combine(a, b, |x, y, m| (x + y) % m)
    }

    pub fn sub(&self, a: usize, b: usize) -> usize {
        self.combine(a, b, |x, y, m| (x + m - y) % m)
    }

    pub fn neg(&self, a: usize) -> usize {
        self.sub(0, a)
    }

    /// `t·a` for an arbitrary integer `t`.
    pub fn scale(&self, t: i64, a: usize) -> usize {
        self.combine(a, 0, |x, _, m| {
            let tm = t.rem_euclid(m as i64) as u128;
            ((tm * x as u128) % m as u128) as usize
        })
    }

    /// Whether multiplication by `t` is a bijection of the group.
    pub fn is_unit(&self, t: i64) -> bool {
        gcd(t.rem_euclid(self.exponent as i64) as usize, self.exponent) == 1
    }

    /// Inverse of `t` modulo the exponent, when it exists.
    pub fn unit_inverse(&self, t: i64) -> Result<i64> {
        let l = self.exponent as i64;
        let t = t.rem_euclid(l);
        let (mut r0, mut r1) = (l, t);
        let (mut s0, mut s1) = (0i64, 1i64);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (s0, s1) = (s1, s0 - q * s1);
        }
        if r0 != 1 {
            return Err(Error::NonUnitScalar {
                scalar: t,
                exponent: self.exponent,
            });
        }
        Ok(s0.rem_euclid(l))
    }

    /// Phase of character `chi` at element `x` as an integer `k` with
    /// `chi(x) = exp(2πi k / exponent)`.
    pub fn phase(&self, chi: usize, x: usize) -> usize {
        if self.factors.len() == 1 {
            return ((chi as u128 * x as u128) % self.order as u128) as usize;
        }
        let l = self.exponent as u128;
        let mut acc: u128 = 0;
        for (&m, &s) in self.factors.iter().zip(&self.strides) {
            let a = ((chi / s) % m) as u128;
            let r = ((x / s) % m) as u128;
            acc += (a * r % m as u128) * (l / m as u128);
        }
        (acc % l) as usize
    }

    /// `chi(x)` as a unit complex number.
    pub fn char_value(&self, chi: usize, x: usize) -> Complex64 {
        let k = self.phase(chi, x);
        Complex64::from_polar(1.0, 2.0 * PI * k as f64 / self.exponent as f64)
    }

    /// `|1 − chi(x)|`, computed as `2|sin(πk/L)|`.
    pub fn char_distance(&self, chi: usize, x: usize) -> f64 {
        phase_distance(self.phase(chi, x), self.exponent)
    }

    /// Values of `chi` at every element, in index order.
    pub fn char_table(&self, chi: usize) -> Vec<Complex64> {
        let l = self.exponent as f64;
        (0..self.order)
            .map(|x| Complex64::from_polar(1.0, 2.0 * PI * self.phase(chi, x) as f64 / l))
            .collect()
    }

    pub fn element(&self, index: usize) -> Result<Element> {
        self.check_index(index)?;
        Ok(Element(self.coords(index)))
    }

    pub fn character(&self, index: usize) -> Result<Character> {
        self.check_index(index)?;
        Ok(Character(self.coords(index)))
    }
}

/// `2|sin(π k / l)|`, the chordal distance from 1 of `exp(2πik/l)`.
pub fn phase_distance(k: usize, l: usize) -> f64 {
    let k = k % l;
    let k = k.min(l - k);
    2.0 * (PI * k as f64 / l as f64).sin()
}

/// An element given by its canonical residues.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Element(pub Vec<usize>);

/// A character given by its dual residues.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Character(pub Vec<usize>);

impl Element {
    pub fn index(&self, group: &Group) -> Result<usize> {
        group.index_of(&self.0)
    }
}

impl Character {
    pub fn zero(group: &Group) -> Self {
        Character(vec![0; group.rank()])
    }

    pub fn index(&self, group: &Group) -> Result<usize> {
        group.index_of(&self.0)
    }
}

/// Evaluates `gamma(x) = exp(2πi Σ a_j r_j / m_j)`.
pub fn char_eval(group: &Group, gamma: &Character, x: &Element) -> Result<Complex64> {
    let chi = gamma
        .index(group)
        .map_err(|_| Error::GroupMismatch)?;
    let xi = x.index(group).map_err(|_| Error::GroupMismatch)?;
    Ok(group.char_value(chi, xi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn rejects_degenerate_factors() {
        assert!(Group::new(vec![]).is_err());
        assert!(Group::new(vec![5, 1]).is_err());
        let g = Group::new(vec![3, 5, 7]).unwrap();
        assert_eq!(g.order(), 105);
        assert!(g.is_odd_order());
        assert!(!Group::new(vec![3, 4]).unwrap().is_odd_order());
    }

    #[test]
    fn index_round_trip_is_row_major() {
        let g = Group::new(vec![3, 4]).unwrap();
        assert_eq!(g.index_of(&[1, 2]).unwrap(), 6);
        for i in 0..g.order() {
            assert_eq!(g.index_of(&g.coords(i)).unwrap(), i);
        }
        assert!(g.index_of(&[3, 0]).is_err());
    }

    #[test]
    fn char_eval_examples() {
        let z4 = Group::cyclic(4).unwrap();
        let v = char_eval(&z4, &Character(vec![1]), &Element(vec![1])).unwrap();
        assert!(close(v, Complex64::i()));

        let z15 = Group::cyclic(15).unwrap();
        let v = char_eval(&z15, &Character(vec![1]), &Element(vec![5])).unwrap();
        assert!(close(v, Complex64::from_polar(1.0, 2.0 * PI / 3.0)));

        let g = Group::new(vec![3, 5]).unwrap();
        for x in 0..g.order() {
            let v = char_eval(&g, &Character::zero(&g), &g.element(x).unwrap()).unwrap();
            assert!(close(v, Complex64::new(1.0, 0.0)));
        }
    }

    #[test]
    fn char_eval_rejects_foreign_points() {
        let g = Group::cyclic(5).unwrap();
        assert_eq!(
            char_eval(&g, &Character(vec![1, 0]), &Element(vec![1])),
            Err(Error::GroupMismatch)
        );
        assert_eq!(
            char_eval(&g, &Character(vec![1]), &Element(vec![7])),
            Err(Error::GroupMismatch)
        );
    }

    #[test]
    fn characters_are_homomorphisms() {
        let g = Group::new(vec![3, 6]).unwrap();
        for chi in 0..g.order() {
            for x in 0..g.order() {
                for y in 0..g.order() {
                    let lhs = g.char_value(chi, g.add(x, y));
                    let rhs = g.char_value(chi, x) * g.char_value(chi, y);
                    assert!(close(lhs, rhs));
                }
            }
        }
    }

    #[test]
    fn unit_inverse_mod_exponent() {
        let g = Group::new(vec![3, 15]).unwrap();
        let inv = g.unit_inverse(-2).unwrap();
        for x in 0..g.order() {
            assert_eq!(g.scale(inv, g.scale(-2, x)), x);
        }
        assert!(g.unit_inverse(3).is_err());
        assert!(Group::cyclic(8).unwrap().unit_inverse(-2).is_err());
    }
}
