use num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use super::function::transform_in_place;
use super::{DualFunction, GFunction, Group, SetOnGroup};
use crate::error::{Error, Result};

/// Tolerance on the total mass of a probability measure.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Work limit below which measure convolution runs as an exact sparse sum.
const DIRECT_CONVOLUTION_WORK: usize = 50_000_000;

/// A probability measure on a group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GMeasure {
    group: Group,
    mass: Vec<f64>,
}

impl GMeasure {
    pub fn from_masses(group: &Group, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != group.order() {
            return Err(Error::param(format!(
                "{} masses for a group of order {}",
                mass.len(),
                group.order()
            )));
        }
        if let Some(m) = mass.iter().find(|m| !(**m >= 0.0)) {
            return Err(Error::param(format!("negative or NaN mass {m}")));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::param(format!("total mass {total} is not 1")));
        }
        Ok(GMeasure {
            group: group.clone(),
            mass,
        })
    }

    /// Haar probability measure `μ_G`.
    pub fn haar(group: &Group) -> Self {
        let n = group.order();
        GMeasure {
            group: group.clone(),
            mass: vec![1.0 / n as f64; n],
        }
    }

    /// Uniform probability measure on a nonempty set.
    pub fn uniform_on(set: &SetOnGroup) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::param("uniform measure on an empty set"));
        }
        let w = 1.0 / set.len() as f64;
        let mut mass = vec![0.0; set.group().order()];
        for x in set.iter() {
            mass[x] = w;
        }
        Ok(GMeasure {
            group: set.group().clone(),
            mass,
        })
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn mass_at(&self, x: usize) -> f64 {
        self.mass[x]
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.mass.iter().enumerate().filter(|(_, &m)| m > 0.0).map(|(x, _)| x)
    }

    /// `τ_t μ`, the measure with `(τ_t μ)(x) = μ(x − t)`.
    pub fn translate(&self, t: usize) -> Self {
        let mut mass = vec![0.0; self.mass.len()];
        for (x, &m) in self.mass.iter().enumerate() {
            mass[self.group.add(x, t)] = m;
        }
        GMeasure {
            group: self.group.clone(),
            mass,
        }
    }

    /// `μ̃(x) = μ(−x)`.
    pub fn reflect(&self) -> Self {
        let mass = (0..self.mass.len()).map(|x| self.mass[self.group.neg(x)]).collect();
        GMeasure {
            group: self.group.clone(),
            mass,
        }
    }

    /// `μ̂(γ) = Σ_x μ(x) conj(γ(x))`.
    pub fn fourier(&self) -> DualFunction {
        let mut data: Vec<Complex64> = self.mass.iter().map(|&m| Complex64::new(m, 0.0)).collect();
        transform_in_place(&self.group, &mut data, FftDirection::Forward);
        DualFunction::from_values(&self.group, data).expect("length matches order")
    }

    /// `∫ f dμ`.
    pub fn integrate(&self, f: &GFunction) -> Result<Complex64> {
        if f.group() != &self.group {
            return Err(Error::GroupMismatch);
        }
        Ok(f.values().iter().zip(&self.mass).map(|(v, &m)| v * m).sum())
    }

    pub fn integrate_real(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(x, &m)| f(x) * m)
            .sum()
    }

    /// `μ(A)`.
    pub fn measure_of(&self, set: &SetOnGroup) -> Result<f64> {
        if set.group() != &self.group {
            return Err(Error::GroupMismatch);
        }
        Ok(set.iter().map(|x| self.mass[x]).sum())
    }

    /// `(μ ∗ ν)(x) = Σ_y μ(y) ν(x − y)`.
    ///
    /// Sparse inputs are convolved exactly so that the support of the result is
    /// exactly the sumset of the supports; dense inputs go through the FFT with
    /// round-off below `1e-15` flushed to zero.
    pub fn convolve(&self, other: &GMeasure) -> Result<GMeasure> {
        if self.group != other.group {
            return Err(Error::GroupMismatch);
        }
        let n = self.group.order();
        let (sparse, dense) = {
            let a = self.support().count();
            let b = other.support().count();
            if a <= b {
                (self, other)
            } else {
                (other, self)
            }
        };
        let sparse_support: Vec<usize> = sparse.support().collect();
        let dense_support: Vec<usize> = dense.support().collect();
        let mut mass = vec![0.0; n];
        if sparse_support.len().saturating_mul(dense_support.len()) <= DIRECT_CONVOLUTION_WORK {
            for &y in &sparse_support {
                let my = sparse.mass[y];
                for &z in &dense_support {
                    mass[self.group.add(y, z)] += my * dense.mass[z];
                }
            }
        } else {
            let prod = self.fourier().pointwise_mul(&other.fourier())?;
            let mut data = prod.into_values();
            transform_in_place(&self.group, &mut data, FftDirection::Inverse);
            for (m, z) in mass.iter_mut().zip(&data) {
                let v = z.re / n as f64;
                *m = if v > 1e-15 { v } else { 0.0 };
            }
            let total: f64 = mass.iter().sum();
            for m in &mut mass {
                *m /= total;
            }
        }
        Ok(GMeasure {
            group: self.group.clone(),
            mass,
        })
    }

    /// Whether every Fourier coefficient is real and at least `−tol`.
    pub fn is_positive_definite(&self, tol: f64) -> bool {
        self.fourier()
            .values()
            .iter()
            .all(|z| z.im.abs() <= tol && z.re >= -tol)
    }

    pub fn max_abs_diff(&self, other: &GMeasure) -> Result<f64> {
        if self.group != other.group {
            return Err(Error::GroupMismatch);
        }
        Ok(self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}
