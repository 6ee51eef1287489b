//! Functions on a group and on its dual, and the transforms between them.
//!
//! Conventions, fixed once for the whole crate:
//!
//! * `f̂(γ) = (1/|G|) Σ_x f(x) · conj(γ(x))` (Haar-normalised, conjugated),
//! * `g∨(x) = Σ_γ g(γ) · γ(x)`,
//! * `(f ∗ g)(x) = (1/|G|) Σ_y f(y) g(x − y)`, so `(f ∗ g)^ = f̂ · ĝ`,
//! * `(f dμ)^(γ) = Σ_x f(x) · conj(γ(x)) · μ(x)`.
//!
//! The multi-dimensional transform is separable: a one-dimensional FFT is
//! run along every invariant factor in turn.

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{GMeasure, Group};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ValuesSpec", into = "ValuesSpec")]
pub struct GFunction {
    group: Group,
    values: Vec<Complex64>,
}

/// A function on the dual group, indexed by character index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ValuesSpec", into = "ValuesSpec")]
pub struct DualFunction {
    group: Group,
    values: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct ValuesSpec {
    invariant_factors: Vec<usize>,
    values: Vec<[f64; 2]>,
}

fn from_spec(spec: ValuesSpec) -> Result<(Group, Vec<Complex64>)> {
    let group = Group::new(spec.invariant_factors)?;
    if spec.values.len() != group.order() {
        return Err(Error::param(format!(
            "{} values for a group of order {}",
            spec.values.len(),
            group.order()
        )));
    }
    let values = spec.values.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
    Ok((group, values))
}

fn to_spec(group: Group, values: Vec<Complex64>) -> ValuesSpec {
    ValuesSpec {
        invariant_factors: group.factors().to_vec(),
        values: values.iter().map(|z| [z.re, z.im]).collect(),
    }
}

impl TryFrom<ValuesSpec> for GFunction {
    type Error = Error;
    fn try_from(spec: ValuesSpec) -> Result<Self> {
        let (group, values) = from_spec(spec)?;
        Ok(GFunction { group, values })
    }
}

impl From<GFunction> for ValuesSpec {
    fn from(f: GFunction) -> Self {
        to_spec(f.group, f.values)
    }
}

impl TryFrom<ValuesSpec> for DualFunction {
    type Error = Error;
    fn try_from(spec: ValuesSpec) -> Result<Self> {
        let (group, values) = from_spec(spec)?;
        Ok(DualFunction { group, values })
    }
}

impl From<DualFunction> for ValuesSpec {
    fn from(f: DualFunction) -> Self {
        to_spec(f.group, f.values)
    }
}

macro_rules! value_container {
    ($ty:ident) => {
        impl $ty {
            pub fn from_values(group: &Group, values: Vec<Complex64>) -> Result<Self> {
                if values.len() != group.order() {
                    return Err(Error::param(format!(
                        "{} values for a group of order {}",
                        values.len(),
                        group.order()
                    )));
                }
                Ok($ty {
                    group: group.clone(),
                    values,
                })
            }

            pub fn from_real(group: &Group, values: &[f64]) -> Result<Self> {
                Self::from_values(group, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
            }

            pub fn zeros(group: &Group) -> Self {
                $ty {
                    group: group.clone(),
                    values: vec![Complex64::new(0.0, 0.0); group.order()],
                }
            }

            pub fn constant(group: &Group, c: Complex64) -> Self {
                $ty {
                    group: group.clone(),
                    values: vec![c; group.order()],
                }
            }

            pub fn group(&self) -> &Group {
                &self.group
            }

            pub fn values(&self) -> &[Complex64] {
                &self.values
            }

            pub fn values_mut(&mut self) -> &mut [Complex64] {
                &mut self.values
            }

            pub fn into_values(self) -> Vec<Complex64> {
                self.values
            }

            pub fn at(&self, index: usize) -> Complex64 {
                self.values[index]
            }

            pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
                if self.group != other.group {
                    return Err(Error::GroupMismatch);
                }
                Ok(self
                    .values
                    .iter()
                    .zip(&other.values)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max))
            }

            pub fn pointwise_mul(&self, other: &Self) -> Result<Self> {
                if self.group != other.group {
                    return Err(Error::GroupMismatch);
                }
                Ok($ty {
                    group: self.group.clone(),
                    values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
                })
            }
        }
    };
}

value_container!(GFunction);
value_container!(DualFunction);

impl GFunction {
    pub fn from_fn(group: &Group, f: impl FnMut(usize) -> Complex64) -> Self {
        GFunction {
            group: group.clone(),
            values: (0..group.order()).map(f).collect(),
        }
    }

    /// `x ↦ f(x − t)`.
    pub fn translate(&self, t: usize) -> Self {
        GFunction::from_fn(&self.group, |x| self.values[self.group.sub(x, t)])
    }

    /// `(1/|G|) Σ_x |f(x)|²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.group.order() as f64
    }

    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.group.order() as f64
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.values.iter().all(|z| z.im.abs() <= tol)
    }
}

impl DualFunction {
    /// `Σ_γ |g(γ)|²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Runs an unnormalised DFT along every axis, in place.
pub(crate) fn transform_in_place(group: &Group, data: &mut [Complex64], direction: FftDirection) {
    let mut planner = FftPlanner::<f64>::new();
    let order = group.order();
    let factors = group.factors();
    let mut stride = order;
    for &m in factors {
        stride /= m;
        let fft = planner.plan_fft(m, direction);
        if stride == 1 {
            fft.process(data);
            continue;
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        let block = m * stride;
        for outer in (0..order).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (k, b) in buf.iter_mut().enumerate() {
                    *b = data[base + k * stride];
                }
                fft.process(&mut buf);
                for (k, b) in buf.iter().enumerate() {
                    data[base + k * stride] = *b;
                }
            }
        }
    }
}

/// `f̂(γ) = (1/|G|) Σ_x f(x) conj(γ(x))`.
pub fn fourier(f: &GFunction) -> DualFunction {
    let mut data = f.values.clone();
    transform_in_place(&f.group, &mut data, FftDirection::Forward);
    let n = f.group.order() as f64;
    for z in &mut data {
        *z /= n;
    }
    DualFunction {
        group: f.group.clone(),
        values: data,
    }
}

/// `g∨(x) = Σ_γ g(γ) γ(x)`.
pub fn inverse_fourier(g: &DualFunction) -> GFunction {
    let mut data = g.values.clone();
    transform_in_place(&g.group, &mut data, FftDirection::Inverse);
    GFunction {
        group: g.group.clone(),
        values: data,
    }
}

/// `(f ∗ g)(x) = (1/|G|) Σ_y f(y) g(x − y)`, computed in the frequency domain.
pub fn convolve(f: &GFunction, g: &GFunction) -> Result<GFunction> {
    if f.group != g.group {
        return Err(Error::GroupMismatch);
    }
    let prod = fourier(f).pointwise_mul(&fourier(g))?;
    Ok(inverse_fourier(&prod))
}

/// `(f dμ)^(γ) = Σ_x f(x) conj(γ(x)) μ(x)`.
pub fn measure_fourier(f: &GFunction, mu: &GMeasure) -> Result<DualFunction> {
    if &f.group != mu.group() {
        return Err(Error::GroupMismatch);
    }
    let mut data: Vec<Complex64> = f
        .values
        .iter()
        .zip(mu.masses())
        .map(|(v, &m)| v * m)
        .collect();
    transform_in_place(&f.group, &mut data, FftDirection::Forward);
    Ok(DualFunction {
        group: f.group.clone(),
        values: data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::SetOnGroup;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_fn(group: &Group, seed: u64) -> GFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GFunction::from_fn(group, |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    /// Direct O(|G|²) transform, independent of the FFT path.
    fn naive_fourier(f: &GFunction) -> DualFunction {
        let g = f.group();
        let n = g.order();
        let values = (0..n)
            .map(|chi| {
                (0..n).map(|x| f.at(x) * g.char_value(chi, x).conj()).sum::<Complex64>() / n as f64
            })
            .collect();
        DualFunction::from_values(g, values).unwrap()
    }

    #[test]
    fn constant_and_delta_transforms() {
        let g = Group::cyclic(5).unwrap();
        let one = GFunction::constant(&g, Complex64::new(1.0, 0.0));
        let fh = fourier(&one);
        assert!((fh.at(0) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(fh.values()[1..].iter().all(|z| z.norm() < 1e-12));

        let delta = SetOnGroup::from_indices(&g, [0]).unwrap().indicator();
        assert!(fourier(&delta).values().iter().all(|z| (z - Complex64::new(0.2, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn fft_matches_naive_transform_on_products() {
        for factors in [vec![21], vec![3, 7], vec![2, 4, 6], vec![5, 5]] {
            let g = Group::new(factors).unwrap();
            let f = random_fn(&g, 3);
            assert!(fourier(&f).max_abs_diff(&naive_fourier(&f)).unwrap() < 1e-12);
        }
    }

    #[test]
    fn round_trips() {
        let g = Group::cyclic(21).unwrap();
        let f = random_fn(&g, 1);
        assert!(inverse_fourier(&fourier(&f)).max_abs_diff(&f).unwrap() <= 1e-9);

        let g = Group::cyclic(35).unwrap();
        let d = DualFunction::from_values(&g, random_fn(&g, 2).into_values()).unwrap();
        assert!(fourier(&inverse_fourier(&d)).max_abs_diff(&d).unwrap() <= 1e-9);
    }

    #[test]
    fn inverse_of_point_masses() {
        let g = Group::new(vec![3, 5]).unwrap();
        let mut d = DualFunction::zeros(&g);
        d.values_mut()[0] = Complex64::new(1.0, 0.0);
        assert!(inverse_fourier(&d).values().iter().all(|z| (z - 1.0).norm() < 1e-12));

        let w = Complex64::new(0.5, -2.0);
        let chi = 7;
        let mut d = DualFunction::zeros(&g);
        d.values_mut()[chi] = w;
        let back = inverse_fourier(&d);
        for x in 0..g.order() {
            assert!((back.at(x) - w * g.char_value(chi, x)).norm() < 1e-12);
        }
    }

    #[test]
    fn convolution_examples() {
        let g = Group::cyclic(5).unwrap();
        let f = random_fn(&g, 9);
        let one = GFunction::constant(&g, Complex64::new(1.0, 0.0));
        let c = convolve(&f, &one).unwrap();
        assert!(c.values().iter().all(|z| (z - f.mean()).norm() < 1e-12));

        let delta = SetOnGroup::from_indices(&g, [0]).unwrap().indicator();
        let dd = convolve(&delta, &delta).unwrap();
        assert!((dd.at(0) - Complex64::new(0.2, 0.0)).norm() < 1e-12);
        assert!(dd.values()[1..].iter().all(|z| z.norm() < 1e-12));

        // direct double sum: y ∈ {0,1}, 1 − y ∈ {0,1} gives y = 0, 1
        let pair = SetOnGroup::from_indices(&g, [0, 1]).unwrap().indicator();
        let pp = convolve(&pair, &pair).unwrap();
        assert!((pp.at(1).re - 0.4).abs() < 1e-12);
    }

    #[test]
    fn convolution_rejects_mismatch() {
        let a = GFunction::zeros(&Group::cyclic(5).unwrap());
        let b = GFunction::zeros(&Group::cyclic(7).unwrap());
        assert_eq!(convolve(&a, &b), Err(Error::GroupMismatch));
    }

    #[test]
    fn translation_law() {
        // (τ_t f)^(γ) = conj(γ(t)) f̂(γ) under the conjugated convention
        let g = Group::new(vec![3, 9]).unwrap();
        let f = random_fn(&g, 4);
        let t = 11;
        let lhs = fourier(&f.translate(t));
        let rhs = fourier(&f);
        for chi in 0..g.order() {
            let expect = g.char_value(chi, t).conj() * rhs.at(chi);
            assert!((lhs.at(chi) - expect).norm() < 1e-12);
        }
    }
}
