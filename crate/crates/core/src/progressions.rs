//! The trilinear form `T`, exact three-term progression counts and the
//! embedding of `{1..N}` into `Z/(4N+1)`.
//!
//! Two readings of `T` are exposed:
//!
//! * [`Convention::Midpoint`]: `E_{x,y} f(x−y) g(x) h(x+y)`, the form whose
//!   Fourier expansion is `Σ_γ f̂(γ) ĝ(−2γ) ĥ(γ)`; with indicator inputs it
//!   counts progressions whose middle term lies in the middle set;
//! * [`Convention::Difference`]: `E_{x,y} f(x−y) g(y) h(x+y)`, whose expansion
//!   is `Σ_γ f̂(γ) ĝ(2γ) ĥ(−γ)`.
//!
//! Counts are exact integers; the transform path is a cross-check only.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::group::{fourier, GFunction, Group, SetOnGroup};
use crate::error::{Error, Result};

/// Largest order evaluated by the double loop in [`trilinear_direct`].
pub const DIRECT_TRILINEAR_LIMIT: usize = 4096;

/// Largest order accepted by [`brute_force_pattern_count`].
pub const PATTERN_ORACLE_LIMIT: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    Midpoint,
    Difference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrilinearResult {
    pub value: Complex64,
    pub convention: Convention,
}

impl TrilinearResult {
    /// `|G|²·T`, the number of solutions when the inputs are indicators.
    pub fn scaled_count(&self, group: &Group) -> f64 {
        let n = group.order() as f64;
        self.value.re * n * n
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct APCount {
    /// Pairs `(a, d)` with `a, a+d, a+2d ∈ A`.
    pub total: u64,
    /// The same pairs restricted to `d ≠ 0`.
    pub nontrivial: u64,
}

fn same_group3(f: &GFunction, g: &GFunction, h: &GFunction) -> Result<()> {
    if f.group() == g.group() && g.group() == h.group() {
        Ok(())
    } else {
        Err(Error::GroupMismatch)
    }
}

/// `T` in the requested convention, by double loop up to
/// [`DIRECT_TRILINEAR_LIMIT`] and through three transforms above it.
pub fn trilinear_direct(
    f: &GFunction,
    g: &GFunction,
    h: &GFunction,
    convention: Convention,
) -> Result<TrilinearResult> {
    same_group3(f, g, h)?;
    let group = f.group();
    let n = group.order();
    if n > DIRECT_TRILINEAR_LIMIT {
        return trilinear_transform(f, g, h, convention);
    }
    let (fv, gv, hv) = (f.values(), g.values(), h.values());
    let sum: Complex64 = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut acc = Complex64::new(0.0, 0.0);
            for y in 0..n {
                let mid = match convention {
                    Convention::Midpoint => gv[x],
                    Convention::Difference => gv[y],
                };
                acc += fv[group.sub(x, y)] * mid * hv[group.add(x, y)];
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(TrilinearResult {
        value: sum / (n as f64 * n as f64),
        convention,
    })
}

fn trilinear_transform(
    f: &GFunction,
    g: &GFunction,
    h: &GFunction,
    convention: Convention,
) -> Result<TrilinearResult> {
    let group = f.group();
    let (fh, gh, hh) = (fourier(f), fourier(g), fourier(h));
    let value = (0..group.order())
        .map(|chi| match convention {
            Convention::Midpoint => fh.at(chi) * gh.at(group.scale(-2, chi)) * hh.at(chi),
            Convention::Difference => fh.at(chi) * gh.at(group.scale(2, chi)) * hh.at(group.neg(chi)),
        })
        .sum();
    Ok(TrilinearResult { value, convention })
}

/// `Σ_γ f̂(γ) ĝ(−2γ) ĥ(γ)`.
///
/// Equals the midpoint form whenever `|G|` is odd, where `(x, y) ↦ (x−y, x, x+y)`
/// parametrises the solutions of `a + c = 2b` bijectively.
pub fn trilinear_fourier(f: &GFunction, g: &GFunction, h: &GFunction) -> Result<TrilinearResult> {
    same_group3(f, g, h)?;
    trilinear_transform(f, g, h, Convention::Midpoint)
}

/// Exact count of pairs `(a, d)` with `a, a+d, a+2d ∈ A`.
pub fn count_3aps(a: &SetOnGroup) -> APCount {
    let group = a.group();
    let n = group.order();
    let members: Vec<usize> = a.iter().collect();
    let total: u64 = members
        .par_iter()
        .map(|&x| {
            (0..n)
                .filter(|&d| {
                    let y = group.add(x, d);
                    a.contains(y) && a.contains(group.add(y, d))
                })
                .count() as u64
        })
        .sum();
    APCount {
        total,
        nontrivial: total - members.len() as u64,
    }
}

/// Finds some `(a, a+d, a+2d) ∈ A³` with `d ≠ 0`, smallest `a` then smallest `d`.
pub fn find_nontrivial_3ap(a: &SetOnGroup) -> Option<(usize, usize, usize)> {
    let group = a.group();
    for x in a.iter() {
        for d in 1..group.order() {
            let y = group.add(x, d);
            let z = group.add(y, d);
            if a.contains(y) && a.contains(z) {
                return Some((x, y, z));
            }
        }
    }
    None
}

/// Number of pairs `(x, y)` matching the pattern, with `outer` in the two end
/// slots `x − y`, `x + y` and `middle` in the middle slot (`x` for the midpoint
/// pattern, `y` for the difference pattern).
pub fn brute_force_pattern_count(
    outer: &SetOnGroup,
    middle: &SetOnGroup,
    pattern: Convention,
) -> Result<u64> {
    if outer.group() != middle.group() {
        return Err(Error::GroupMismatch);
    }
    let group = outer.group();
    let n = group.order();
    if n > PATTERN_ORACLE_LIMIT {
        return Err(Error::GuardExceeded {
            what: "pattern oracle",
            limit: PATTERN_ORACLE_LIMIT,
            actual: n,
        });
    }
    let count = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut c = 0u64;
            for y in 0..n {
                let mid = match pattern {
                    Convention::Midpoint => x,
                    Convention::Difference => y,
                };
                if middle.contains(mid)
                    && outer.contains(group.sub(x, y))
                    && outer.contains(group.add(x, y))
                {
                    c += 1;
                }
            }
            c
        })
        .sum();
    Ok(count)
}

/// Solutions of `a + c = 2b` with `a, c ∈ outer`, `b ∈ middle`, counted as
/// `(x, y)` pairs of the midpoint pattern; runs in `O(|outer|·|middle|)`.
pub fn midpoint_pattern_count(outer: &SetOnGroup, middle: &SetOnGroup) -> Result<u64> {
    if outer.group() != middle.group() {
        return Err(Error::GroupMismatch);
    }
    let group = outer.group();
    let outer_members: Vec<usize> = outer.iter().collect();
    Ok(middle
        .iter()
        .map(|b| {
            let two_b = group.add(b, b);
            outer_members
                .iter()
                .filter(|&&a| outer.contains(group.sub(two_b, a)))
                .count() as u64
        })
        .sum())
}

/// The image of `A ⊆ {1..N}` in `Z/(4N+1)` under `a ↦ a mod (4N+1)`.
///
/// Since `a + c − 2b` lies strictly between `−2N` and `2N`, a progression in
/// the image is a progression in the integers.
pub fn freiman_embed(elements: &[u64], n: u64) -> Result<(Group, SetOnGroup)> {
    if n == 0 {
        return Err(Error::param("N must be at least 1"));
    }
    let modulus = 4 * n + 1;
    let group = Group::cyclic(modulus as usize)?;
    let mut set = SetOnGroup::empty(&group);
    for &a in elements {
        if a == 0 || a > n {
            return Err(Error::OutOfRange(format!("{a} is not in 1..={n}")));
        }
        set.insert(a as usize);
    }
    Ok((group, set))
}

/// Nontrivial progressions `(a, a+d, a+2d)`, `d ≠ 0`, inside a set of integers,
/// counted as ordered pairs `(a, d)` (so each progression is counted for `±d`).
pub fn count_integer_nontrivial(elements: &[u64]) -> u64 {
    let set: std::collections::HashSet<u64> = elements.iter().copied().collect();
    let mut count = 0;
    for &a in &set {
        for &c in &set {
            if a != c && (a + c) % 2 == 0 && set.contains(&((a + c) / 2)) {
                count += 1;
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(n: usize, xs: &[usize]) -> SetOnGroup {
        SetOnGroup::from_indices(&Group::cyclic(n).unwrap(), xs.iter().copied()).unwrap()
    }

    #[test]
    fn trilinear_examples() {
        let g = Group::cyclic(5).unwrap();
        let one = GFunction::constant(&g, Complex64::new(1.0, 0.0));
        for c in [Convention::Midpoint, Convention::Difference] {
            let t = trilinear_direct(&one, &one, &one, c).unwrap();
            assert!((t.value - 1.0).norm() < 1e-12);
        }
        let delta = set(5, &[0]).indicator();
        let t = trilinear_direct(&delta, &delta, &delta, Convention::Midpoint).unwrap();
        assert!((t.value.re - 1.0 / 25.0).abs() < 1e-12);

        let a = set(7, &[0, 1, 2]).indicator();
        let t = trilinear_direct(&a, &a, &a, Convention::Midpoint).unwrap();
        assert!((t.value.re - 5.0 / 49.0).abs() < 1e-12);
        let tf = trilinear_fourier(&a, &a, &a).unwrap();
        assert!((tf.value.re - 5.0 / 49.0).abs() < 1e-12);
        assert!(tf.value.im.abs() < 1e-12);
    }

    #[test]
    fn transform_path_matches_loop_in_both_conventions() {
        let g = Group::new(vec![3, 7]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut r = || GFunction::from_fn(&g, |_| Complex64::new(rng.random_range(-1.0..1.0), 0.0));
        let (f, gg, h) = (r(), r(), r());
        for c in [Convention::Midpoint, Convention::Difference] {
            let a = trilinear_direct(&f, &gg, &h, c).unwrap();
            let b = trilinear_transform(&f, &gg, &h, c).unwrap();
            assert!((a.value - b.value).norm() < 1e-12, "{c:?}");
        }
    }

    #[test]
    fn count_examples() {
        assert_eq!(count_3aps(&set(5, &[])), APCount { total: 0, nontrivial: 0 });
        assert_eq!(count_3aps(&set(5, &[0, 1, 2, 3, 4])), APCount { total: 25, nontrivial: 20 });
        assert_eq!(count_3aps(&set(7, &[1, 3, 5])), APCount { total: 5, nontrivial: 2 });
        assert_eq!(find_nontrivial_3ap(&set(7, &[1, 3, 5])), Some((1, 3, 5)));
        assert_eq!(find_nontrivial_3ap(&set(7, &[1])), None);
    }

    #[test]
    fn pattern_oracle_examples() {
        let a = set(7, &[0, 1, 2]);
        assert_eq!(brute_force_pattern_count(&a, &a, Convention::Midpoint).unwrap(), 5);
        assert_eq!(midpoint_pattern_count(&a, &a).unwrap(), 5);
        let empty = set(7, &[]);
        assert_eq!(brute_force_pattern_count(&a, &empty, Convention::Difference).unwrap(), 0);
        let big = SetOnGroup::empty(&Group::cyclic(10_001).unwrap());
        assert!(matches!(
            brute_force_pattern_count(&big, &big, Convention::Midpoint),
            Err(Error::GuardExceeded { .. })
        ));
    }

    #[test]
    fn embedding_examples() {
        let (g, img) = freiman_embed(&[], 4).unwrap();
        assert_eq!(g.order(), 17);
        assert_eq!(count_3aps(&img).nontrivial, 0);

        let (g, img) = freiman_embed(&[1, 2, 3], 3).unwrap();
        assert_eq!(g.order(), 13);
        assert_eq!(count_integer_nontrivial(&[1, 2, 3]), 2);
        assert_eq!(count_3aps(&img).nontrivial, 2);

        let (g, img) = freiman_embed(&[1, 2, 4, 5], 5).unwrap();
        assert_eq!(g.order(), 21);
        assert_eq!(count_integer_nontrivial(&[1, 2, 4, 5]), 0);
        assert_eq!(count_3aps(&img).nontrivial, 0);

        assert!(freiman_embed(&[6], 5).is_err());
        assert!(freiman_embed(&[0], 5).is_err());
    }
}
