//! Riesz products `p_{ω,Λ} = ∏_{λ∈Λ} (1 + Re(ω(λ) λ))`, Bernoulli sampling
//! of character sets, and the randomised increment extraction.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{measure_fourier, GMeasure, Group, SetOnGroup};
use crate::rng::derived_rng;
use crate::spectrum::{bourgain_decomposition, orthogonality_constant, RemainderCertification};

/// Largest `|Λ|` for which [`riesz_integral_expansion`] runs.
pub const EXPANSION_LIMIT: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RieszProduct {
    pub characters: Vec<usize>,
    pub omega: Vec<Complex64>,
}

impl RieszProduct {
    pub fn new(characters: Vec<usize>, omega: Vec<Complex64>) -> Result<Self> {
        if characters.len() != omega.len() {
            return Err(Error::param("one ω value per character is required"));
        }
        if let Some(w) = omega.iter().find(|w| w.norm() > 1.0 + 1e-12) {
            return Err(Error::OutOfRange(format!("|ω| = {} exceeds 1", w.norm())));
        }
        Ok(RieszProduct { characters, omega })
    }

    /// `p_{1,Λ}`.
    pub fn ones(characters: Vec<usize>) -> Self {
        let omega = vec![Complex64::new(1.0, 0.0); characters.len()];
        RieszProduct { characters, omega }
    }

    /// Value at a single element.
    pub fn eval(&self, group: &Group, x: usize) -> f64 {
        self.characters
            .iter()
            .zip(&self.omega)
            .map(|(&c, w)| 1.0 + (w * group.char_value(c, x)).re)
            .product()
    }

    /// Values at every element, in index order.
    pub fn values(&self, group: &Group) -> Vec<f64> {
        let mut p = vec![1.0; group.order()];
        for (&c, w) in self.characters.iter().zip(&self.omega) {
            for (x, px) in p.iter_mut().enumerate() {
                *px *= 1.0 + (w * group.char_value(c, x)).re;
            }
        }
        p
    }
}

/// `p_{ω,Λ}(x)`.
pub fn riesz_eval(p: &RieszProduct, group: &Group, x: usize) -> Result<f64> {
    group.check_index(x)?;
    for &c in &p.characters {
        group.check_index(c)?;
    }
    Ok(p.eval(group, x))
}

/// `∫ p_{ω,Λ} dμ`.
pub fn riesz_integral(p: &RieszProduct, mu: &GMeasure) -> f64 {
    let group = mu.group();
    mu.integrate_real(|x| p.eval(group, x))
}

/// `∫ 1_A p_{ω,Λ} dμ`.
pub fn riesz_inner(a: &SetOnGroup, p: &RieszProduct, mu: &GMeasure) -> f64 {
    let group = mu.group();
    mu.integrate_real(|x| if a.contains(x) { p.eval(group, x) } else { 0.0 })
}

/// `∫ p_{ω,Λ} dμ` by expanding the product into `3^|Λ|` signed character sums.
pub fn riesz_integral_expansion(p: &RieszProduct, mu: &GMeasure) -> Result<f64> {
    let k = p.characters.len();
    if k > EXPANSION_LIMIT {
        return Err(Error::GuardExceeded {
            what: "Riesz expansion",
            limit: EXPANSION_LIMIT,
            actual: k,
        });
    }
    let group = mu.group();
    let mu_hat = mu.fourier();
    let mut total = Complex64::new(0.0, 0.0);
    let mut digits = vec![0u8; k];
    loop {
        let mut chi = 0usize;
        let mut coeff = Complex64::new(1.0, 0.0);
        for (j, &d) in digits.iter().enumerate() {
            match d {
                1 => {
                    chi = group.add(chi, p.characters[j]);
                    coeff *= p.omega[j] / 2.0;
                }
                2 => {
                    chi = group.sub(chi, p.characters[j]);
                    coeff *= p.omega[j].conj() / 2.0;
                }
                _ => {}
            }
        }
        // ∫ χ dμ = μ̂(−χ)
        total += coeff * mu_hat.at(group.neg(chi));
        let mut j = 0;
        while j < k && digits[j] == 2 {
            digits[j] = 0;
            j += 1;
        }
        if j == k {
            break;
        }
        digits[j] += 1;
    }
    Ok(total.re)
}

/// Keeps each character independently with probability `θ`.
pub fn sample_subset<R: Rng + ?Sized>(t: &[usize], theta: f64, rng: &mut R) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::param(format!("θ = {theta} is not in [0, 1]")));
    }
    Ok(t.iter().copied().filter(|_| rng.random_bool(theta)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewincConfig {
    /// Lower constant in `C log 2τ⁻¹ ≤ d`.
    pub c_lower: f64,
    /// Upper constant in `d ≤ c min{τk, √m}`.
    pub c_upper: f64,
    /// Orthogonality constant in `η ≤ c′τ`.
    pub c_orthogonality: f64,
    pub max_retries: usize,
    pub seed: u64,
}

impl Default for NewincConfig {
    fn default() -> Self {
        NewincConfig {
            c_lower: 4.0,
            c_upper: 0.125,
            c_orthogonality: 0.125,
            max_retries: 64,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewincInput<'a> {
    pub a: &'a SetOnGroup,
    pub mu: &'a GMeasure,
    pub mu_prime: &'a GMeasure,
    pub lambda: &'a [usize],
    pub tau: f64,
    pub m: f64,
    pub d: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum NewincOutcome {
    EntropyHalf {
        remainder: Vec<usize>,
        blocks: Vec<Vec<usize>>,
        block_size: usize,
        certification: RemainderCertification,
        k: usize,
    },
    RieszCorrelation {
        characters: Vec<usize>,
        omega: Vec<Complex64>,
        /// `⟨1_A, p_{ω′,Λ‴}⟩_{L²(μ)}`.
        lhs: f64,
        /// `α(1 + τd/4) ∫ p_{1,Λ‴} dμ′`.
        rhs: f64,
        alpha: f64,
        tau: f64,
        d: f64,
        seed: u64,
        retries: usize,
        discarded: usize,
    },
}

impl NewincOutcome {
    /// Re-evaluates the advertised inequality from scratch.
    pub fn verify(&self, a: &SetOnGroup, mu: &GMeasure, mu_prime: &GMeasure) -> Result<bool> {
        match self {
            NewincOutcome::EntropyHalf {
                remainder, k, ..
            } => Ok(2 * remainder.len() >= *k),
            NewincOutcome::RieszCorrelation {
                characters,
                omega,
                tau,
                d,
                ..
            } => {
                let alpha = mu.measure_of(a)?;
                let p = RieszProduct::new(characters.clone(), omega.clone())?;
                let lhs = riesz_inner(a, &p, mu);
                let rhs = alpha * (1.0 + tau * d / 4.0) * riesz_integral(&RieszProduct::ones(characters.clone()), mu_prime);
                Ok(lhs >= rhs)
            }
        }
    }
}

/// Checks every hypothesis of the extraction lemma, naming the first failure.
pub fn newinc_preconditions(input: &NewincInput, config: &NewincConfig) -> Result<()> {
    let k = input.lambda.len();
    if k == 0 {
        return Err(Error::precondition("Λ is empty"));
    }
    if input.a.group() != input.mu.group() || input.mu.group() != input.mu_prime.group() {
        return Err(Error::GroupMismatch);
    }
    let alpha = input.mu.measure_of(input.a)?;
    if alpha <= 0.0 {
        return Err(Error::precondition("μ(A) = 0"));
    }
    if input.m < 1.0 {
        return Err(Error::precondition(format!("m = {} is below 1", input.m)));
    }
    if input.d > k as f64 {
        return Err(Error::precondition(format!("d = {} exceeds k = {k}", input.d)));
    }
    let lower = config.c_lower * (2.0 / input.tau).ln();
    if input.d < lower {
        return Err(Error::precondition(format!("d = {} is below C log 2τ⁻¹ = {lower}", input.d)));
    }
    let upper = config.c_upper * (input.tau * k as f64).min(input.m.sqrt());
    if input.d > upper {
        return Err(Error::precondition(format!(
            "d = {} exceeds c min{{τk, √m}} = {upper}",
            input.d
        )));
    }
    let coeffs = measure_fourier(&input.a.indicator(), input.mu)?;
    if let Some(&l) = input
        .lambda
        .iter()
        .find(|&&l| coeffs.at(l).norm() < input.tau * alpha * (1.0 - 1e-9))
    {
        return Err(Error::precondition(format!("character {l} is not in Spec_τ(1_A, μ)")));
    }
    let eta = orthogonality_constant(input.lambda, input.mu_prime)?.k_min;
    if eta > config.c_orthogonality * input.tau + 1e-12 {
        return Err(Error::precondition(format!(
            "Λ is only {eta}-orthogonal w.r.t. μ′, above c′τ = {}",
            config.c_orthogonality * input.tau
        )));
    }
    Ok(())
}

/// Either a large remainder with no 1-dissociated block, or a sampled
/// `Λ‴ ⊆ Λ` whose Riesz product correlates with `1_A`.
pub fn newinc_procedure(input: &NewincInput, config: &NewincConfig) -> Result<NewincOutcome> {
    newinc_preconditions(input, config)?;
    let k = input.lambda.len();
    let l = (2.0 * input.m * (2.0 * k as f64).ln()).ceil().max(1.0) as usize;
    let decomposition = bourgain_decomposition(input.lambda, l, input.mu_prime)?;
    if 2 * decomposition.remainder.len() >= k {
        return Ok(NewincOutcome::EntropyHalf {
            remainder: decomposition.remainder,
            blocks: decomposition.blocks,
            block_size: l,
            certification: decomposition.remainder_certification,
            k,
        });
    }
    let pool: Vec<usize> = decomposition.blocks.concat();
    let alpha = input.mu.measure_of(input.a)?;
    let coeffs = measure_fourier(&input.a.indicator(), input.mu)?;
    let phase = |l: usize| {
        let c = coeffs.at(l);
        if c.norm() > 0.0 {
            c / c.norm()
        } else {
            Complex64::new(1.0, 0.0)
        }
    };
    let theta = (input.d / k as f64).min(1.0);
    let cap = 2.0 * std::f64::consts::E * input.d;
    let gain = 1.0 + input.tau * input.d / 4.0;
    let mut discarded = 0;
    let mut first_failure: Option<(f64, f64)> = None;
    for retry in 0..config.max_retries {
        let mut rng = derived_rng(config.seed, "newinc", retry as u64);
        let chosen = sample_subset(&pool, theta, &mut rng)?;
        if chosen.len() as f64 > cap {
            discarded += 1;
            continue;
        }
        let omega: Vec<Complex64> = chosen.iter().map(|&c| phase(c)).collect();
        let p = RieszProduct::new(chosen.clone(), omega.clone())?;
        let lhs = riesz_inner(input.a, &p, input.mu);
        let rhs = alpha * gain * riesz_integral(&RieszProduct::ones(chosen.clone()), input.mu_prime);
        if lhs >= rhs {
            return Ok(NewincOutcome::RieszCorrelation {
                characters: chosen,
                omega,
                lhs,
                rhs,
                alpha,
                tau: input.tau,
                d: input.d,
                seed: config.seed,
                retries: retry,
                discarded,
            });
        }
        first_failure.get_or_insert((lhs, rhs));
    }
    Err(match first_failure {
        Some((lhs, rhs)) => Error::Budget(format!(
            "no draw in {} retries satisfied ⟨1_A, p⟩ ≥ α(1+τd/4)∫p₁dμ′; first draw gave {lhs} < {rhs}",
            config.max_retries
        )),
        None => Error::Budget(format!(
            "all {} draws exceeded the 2ed = {cap} size cap",
            config.max_retries
        )),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::spec;

    #[test]
    fn eval_examples() {
        let g = Group::cyclic(3).unwrap();
        let empty = RieszProduct::ones(vec![]);
        assert!((0..3).all(|x| riesz_eval(&empty, &g, x).unwrap() == 1.0));
        let single = RieszProduct::ones(vec![1]);
        assert!((riesz_eval(&single, &g, 0).unwrap() - 2.0).abs() < 1e-15);
        let pair = RieszProduct::ones(vec![1, 2]);
        assert!((riesz_eval(&pair, &g, 0).unwrap() - 4.0).abs() < 1e-12);
        assert!((riesz_eval(&pair, &g, 1).unwrap() - 0.25).abs() < 1e-12);
        assert!(RieszProduct::new(vec![1], vec![Complex64::new(1.5, 0.0)]).is_err());
    }

    #[test]
    fn integral_examples() {
        let g3 = Group::cyclic(3).unwrap();
        let haar3 = GMeasure::haar(&g3);
        assert_eq!(riesz_integral(&RieszProduct::ones(vec![]), &haar3), 1.0);
        let pair = RieszProduct::ones(vec![1, 2]);
        assert!((riesz_integral(&pair, &haar3) - 1.5).abs() < 1e-12);
        assert!((riesz_integral_expansion(&pair, &haar3).unwrap() - 1.5).abs() < 1e-12);

        let g5 = Group::cyclic(5).unwrap();
        let haar5 = GMeasure::haar(&g5);
        for phase in [0.0, 0.7, 2.1] {
            let w = Complex64::from_polar(0.9, phase);
            let p = RieszProduct::new(vec![1, 2], vec![w, w.conj()]).unwrap();
            assert!((riesz_integral(&p, &haar5) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn expansion_matches_pointwise_sum() {
        let g = Group::cyclic(29).unwrap();
        let mu = GMeasure::uniform_on(&SetOnGroup::from_indices(&g, [0, 2, 3, 7, 11]).unwrap()).unwrap();
        let p = RieszProduct::new(
            vec![1, 4, 9, 13, 20],
            (0..5).map(|j| Complex64::from_polar(0.3 + 0.1 * j as f64, j as f64)).collect(),
        )
        .unwrap();
        let direct = riesz_integral(&p, &mu);
        let expanded = riesz_integral_expansion(&p, &mu).unwrap();
        assert!((direct - expanded).abs() < 1e-12, "{direct} vs {expanded}");
        assert!(p.values(&g).iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn sampling_examples() {
        let t: Vec<usize> = (0..50).collect();
        let mut rng = derived_rng(1, "test", 0);
        assert!(sample_subset(&t, 0.0, &mut rng).unwrap().is_empty());
        assert_eq!(sample_subset(&t, 1.0, &mut rng).unwrap(), t);
        let a = sample_subset(&t, 0.4, &mut derived_rng(9, "s", 0)).unwrap();
        let b = sample_subset(&t, 0.4, &mut derived_rng(9, "s", 0)).unwrap();
        assert_eq!(a, b);
        assert!(sample_subset(&t, 1.5, &mut rng).is_err());
    }

    #[test]
    fn newinc_preconditions_are_named() {
        let g = Group::cyclic(101).unwrap();
        let a = SetOnGroup::from_indices(&g, 0..30).unwrap();
        let mu = GMeasure::haar(&g);
        let input = NewincInput {
            a: &a,
            mu: &mu,
            mu_prime: &mu,
            lambda: &[],
            tau: 0.1,
            m: 16.0,
            d: 1.0,
        };
        assert!(matches!(newinc_procedure(&input, &NewincConfig::default()), Err(Error::Precondition(_))));
        let s = spec(&a.indicator(), &mu, 0.1).unwrap().characters();
        let input = NewincInput {
            lambda: &s[1..3],
            d: 5.0,
            ..input
        };
        let err = newinc_procedure(&input, &NewincConfig::default()).unwrap_err();
        assert!(matches!(&err, Error::Precondition(m) if m.contains("exceeds k")), "{err}");
    }

    #[test]
    fn riesz_correlation_outcome_reverifies() {
        // powers of 3 below 10007 are dissociated; A is a superlevel set of
        // their cosine sum, so each lies in the large spectrum
        let p = 10007;
        let g = Group::cyclic(p).unwrap();
        let lambda: Vec<usize> = (0..9).map(|j| 3usize.pow(j)).collect();
        let a = SetOnGroup::from_predicate(&g, |x| {
            lambda.iter().map(|&l| g.char_value(l, x).re).sum::<f64>() >= 1.5
        });
        let mu = GMeasure::haar(&g);
        let alpha = a.density();
        let coeffs = measure_fourier(&a.indicator(), &mu).unwrap();
        let tau = lambda.iter().map(|&l| coeffs.at(l).norm()).fold(f64::INFINITY, f64::min) / alpha;
        let config = NewincConfig {
            c_lower: 0.1,
            c_upper: 1.0,
            c_orthogonality: 1.0,
            max_retries: 64,
            seed: 3,
        };
        let input = NewincInput {
            a: &a,
            mu: &mu,
            mu_prime: &mu,
            lambda: &lambda,
            tau: tau * 0.999,
            m: 1.0,
            d: 1.0,
        };
        let outcome = newinc_procedure(&input, &config).unwrap();
        assert!(outcome.verify(&a, &mu, &mu).unwrap());
        match &outcome {
            NewincOutcome::RieszCorrelation { characters, d, lhs, rhs, .. } => {
                assert!(!characters.is_empty());
                assert!(characters.len() as f64 <= 2.0 * std::f64::consts::E * d);
                assert!(lhs >= rhs);
            }
            other => panic!("expected a Riesz correlation, got {other:?}"),
        }
        let again = newinc_procedure(&input, &config).unwrap();
        assert_eq!(again, outcome);
    }
}
