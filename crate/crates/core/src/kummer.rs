//! Exact densities for `v_ℓ(ord(r mod p)) = a` with `r ∈ Q^*`, from the
//! Galois group of `Q(ζ_{ℓ^n}, r^{1/ℓ^n})`.
//!
//! An automorphism is a pair `(u, b)`: `ζ ↦ ζ^u` and `α ↦ ζ^b·α` for a fixed
//! `ℓ^n`-th root `α` of `r`. The group is taken to be full, except that for
//! `ℓ = 2` and squarefree part `r* ∈ {-1, 2, -2}` the square root of `r*`
//! already lies in `Q(ζ_8)`, which forces `(-1)^b = χ_{r*}(u)` from level 3 on.

use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{is_prime, valuation};
use crate::groups::{FactoredRational, Rational};

/// Largest `ℓ^n` enumerated at a single level.
pub const MAX_LEVEL_SIZE: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KummerError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("base point ±1 has finite order")]
    Unit,
    #[error("{r} is an {l}-th power up to sign; pass the {l}-power-free root and shift targets accordingly")]
    PowerOfL { r: String, l: u64 },
    #[error("level {n} too low for a = {a}: need n > a")]
    LevelTooLow { n: u32, a: u32 },
    #[error("no stabilization for a = {a} up to level {n}")]
    NoStabilization { a: u32, n: u32 },
}

/// An automorphism `(u, b)` of the level-`n` Kummer extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GaloisElement {
    pub u: u64,
    pub b: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KummerLevel {
    pub r: FactoredRational,
    pub l: u64,
    pub n: u32,
    pub r_star: i64,
    pub entangled: bool,
}

pub fn build_level(r: &FactoredRational, l: u64, n: u32) -> Result<KummerLevel, KummerError> {
    if !is_prime(l) {
        return Err(KummerError::NotPrime(l));
    }
    if r.is_unit() {
        return Err(KummerError::Unit);
    }
    if r.exponent_gcd().is_multiple_of(l) {
        return Err(KummerError::PowerOfL { r: r.to_string(), l });
    }
    let r_star = r.squarefree_part();
    Ok(KummerLevel {
        r: r.clone(),
        l,
        n,
        r_star,
        entangled: l == 2 && matches!(r_star, -1 | 2 | -2),
    })
}

fn chi(r_star: i64, u: u64) -> i8 {
    let chi_m1 = if u % 4 == 1 { 1 } else { -1 };
    let chi_2 = if u % 8 == 1 || u % 8 == 7 { 1 } else { -1 };
    match r_star {
        -1 => chi_m1,
        2 => chi_2,
        -2 => chi_m1 * chi_2,
        _ => 1,
    }
}

impl KummerLevel {
    pub fn modulus(&self) -> u64 {
        self.l.pow(self.n)
    }

    fn constrained(&self) -> bool {
        self.entangled && self.n >= 3
    }

    pub fn is_valid(&self, g: GaloisElement) -> bool {
        let m = self.modulus();
        if g.u >= m || g.b >= m || g.u.is_multiple_of(self.l) {
            return false;
        }
        if self.constrained() {
            let sign = if g.b.is_multiple_of(2) { 1 } else { -1 };
            return sign == chi(self.r_star, g.u);
        }
        true
    }

    /// `v_ℓ` of a residue mod `ℓ^n`, with `v(0) = n`.
    fn val(&self, x: u64) -> u32 {
        if x == 0 {
            self.n
        } else {
            valuation(x, self.l).min(self.n)
        }
    }

    /// Whether `g` fixes some `ℓ^n`-th root of `r^{ℓ^a}`: `b·ℓ^a ∈ (u - 1)·Z/ℓ^n`.
    pub fn fixes_root(&self, g: GaloisElement, a: u32) -> bool {
        self.val((g.u + self.modulus() - 1) % self.modulus()) <= a + self.val(g.b)
    }

    /// All valid pairs, `u` outermost.
    pub fn elements(&self) -> impl Iterator<Item = GaloisElement> + '_ {
        let m = self.modulus();
        (0..m)
            .flat_map(move |u| (0..m).map(move |b| GaloisElement { u, b }))
            .filter(|&g| self.is_valid(g))
    }

    /// Pairs satisfying the fixed-root condition for each `a` in `thresholds`,
    /// and the number of valid pairs.
    fn counts(&self, thresholds: &[u32]) -> (Vec<u128>, u128) {
        let m = self.modulus();
        let n = self.n as usize;
        // by_class[v][parity] = #{b : v(b) = v, b ≡ parity (mod 2)}
        let mut by_class = vec![[0u128; 2]; n + 1];
        for b in 0..m {
            by_class[self.val(b) as usize][(b % 2) as usize] += 1;
        }
        let workers = thread::available_parallelism().map_or(1, |w| w.get()).min(16) as u64;
        if workers == 1 {
            return self.count_range(0, m, &by_class, thresholds);
        }
        let chunk = m.div_ceil(workers);
        let partials: Vec<(Vec<u128>, u128)> = thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let by_class = &by_class;
                    s.spawn(move || self.count_range(w * chunk, ((w + 1) * chunk).min(m), by_class, thresholds))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker panicked"))
                .collect()
        });
        partials
            .into_iter()
            .fold((vec![0; thresholds.len()], 0), |(mut hits, total), (h, t)| {
                hits.iter_mut().zip(h).for_each(|(x, y)| *x += y);
                (hits, total + t)
            })
    }

    fn count_range(&self, lo: u64, hi: u64, by_class: &[[u128; 2]], thresholds: &[u32]) -> (Vec<u128>, u128) {
        let m = self.modulus();
        let mut hits = vec![0u128; thresholds.len()];
        let mut total = 0u128;
        for u in lo..hi {
            if u % self.l == 0 {
                continue;
            }
            let k = self.val((u + m - 1) % m);
            let parities: &[usize] = if self.constrained() {
                if chi(self.r_star, u) == 1 {
                    &[0]
                } else {
                    &[1]
                }
            } else {
                &[0, 1]
            };
            for (v, row) in by_class.iter().enumerate() {
                let count: u128 = parities.iter().map(|&p| row[p]).sum();
                total += count;
                for (h, &a) in hits.iter_mut().zip(thresholds) {
                    if k <= a + v as u32 {
                        *h += count;
                    }
                }
            }
        }
        (hits, total)
    }

    pub fn valid_count(&self) -> u128 {
        self.counts(&[]).1
    }
}

fn ratio(num: u128, den: u128) -> Rational {
    Rational::new(num as i128, den as i128)
}

/// Level-`n` proportion of automorphisms with `v_ℓ(ord) ≤ a`.
pub fn level_density_leq(level: &KummerLevel, a: u32) -> Result<Rational, KummerError> {
    if level.n <= a {
        return Err(KummerError::LevelTooLow { n: level.n, a });
    }
    let (hits, total) = level.counts(&[a]);
    Ok(ratio(hits[0], total))
}

/// Level-`n` proportion of automorphisms with `v_ℓ(ord) = a`.
pub fn level_density_eq(level: &KummerLevel, a: u32) -> Result<Rational, KummerError> {
    if level.n <= a {
        return Err(KummerError::LevelTooLow { n: level.n, a });
    }
    if a == 0 {
        return level_density_leq(level, 0);
    }
    let (hits, total) = level.counts(&[a, a - 1]);
    Ok(ratio(hits[0] - hits[1], total))
}

/// A stabilized density and the deepest level enumerated to obtain it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactDensity {
    pub value: Rational,
    pub level: u32,
}

/// Limit of [`level_density_eq`] as `n → ∞`.
///
/// The level-`n` proportion equals the limit plus `c·ℓ^{-2n}` once `n` is
/// large enough, so `(ℓ²·D_{n+1} − D_n)/(ℓ² − 1)` is exactly the limit from
/// that point on. The value is accepted when two consecutive extrapolations
/// agree.
pub fn exact_density(r: &FactoredRational, l: u64, a: u32) -> Result<ExactDensity, KummerError> {
    build_level(r, l, 1)?;
    let l2 = Rational::from_integer((l * l) as i128);
    let max_level = a + 24;
    let mut n = a + 1;
    let mut prev_d: Option<Rational> = None;
    let mut prev_e: Option<Rational> = None;
    while n <= max_level && l.checked_pow(n).is_some_and(|m| m <= MAX_LEVEL_SIZE) {
        let d = level_density_eq(&build_level(r, l, n)?, a)?;
        if let Some(pd) = prev_d {
            let e = (l2 * d - pd) / (l2 - Rational::from_integer(1));
            if prev_e == Some(e) {
                return Ok(ExactDensity { value: e, level: n });
            }
            prev_e = Some(e);
        }
        prev_d = Some(d);
        n += 1;
    }
    Err(KummerError::NoStabilization { a, n: n - 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fr(n: i64) -> FactoredRational {
        FactoredRational::from_integer(n).unwrap()
    }

    fn q(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    /// Straight double loop over all valid pairs.
    fn naive_leq(level: &KummerLevel, a: u32) -> Rational {
        let (mut hit, mut tot) = (0i128, 0i128);
        for g in level.elements() {
            tot += 1;
            if level.fixes_root(g, a) {
                hit += 1;
            }
        }
        q(hit, tot)
    }

    #[test]
    fn build_examples() {
        assert!(!build_level(&fr(3), 2, 4).unwrap().entangled);
        assert!(build_level(&fr(2), 2, 4).unwrap().entangled);
        let l = build_level(&fr(12), 2, 4).unwrap();
        assert_eq!(l.r_star, 3);
        assert!(!l.entangled);
        assert!(build_level(&fr(-8), 2, 4).unwrap().entangled);
        assert!(matches!(build_level(&fr(-4), 2, 4), Err(KummerError::PowerOfL { .. })));
        assert!(matches!(build_level(&fr(9), 2, 4), Err(KummerError::PowerOfL { .. })));
        assert!(matches!(build_level(&fr(-1), 2, 4), Err(KummerError::Unit)));
        assert!(matches!(build_level(&fr(8), 3, 4), Err(KummerError::PowerOfL { .. })));
        assert!(build_level(&fr(9), 3, 4).is_ok());
    }

    #[test]
    fn grouped_counts_match_naive_loop() {
        for (r, l, nmax) in [(3, 2, 7), (2, 2, 7), (-2, 2, 6), (6, 2, 6), (2, 3, 4), (10, 5, 3)] {
            for n in 1..=nmax {
                let level = build_level(&fr(r), l, n).unwrap();
                for a in 0..n {
                    assert_eq!(
                        level_density_leq(&level, a).unwrap(),
                        naive_leq(&level, a),
                        "r={r} l={l} n={n} a={a}"
                    );
                }
            }
        }
    }

    #[test]
    fn frozen_level_values() {
        let leq = |r, l, n, a| level_density_leq(&build_level(&fr(r), l, n).unwrap(), a).unwrap();
        assert_eq!(leq(3, 2, 3, 0), q(11, 32));
        assert_eq!(leq(3, 2, 4, 0), q(43, 128));
        assert_eq!(leq(3, 2, 8, 0), q(10923, 32768));
        assert_eq!(leq(2, 2, 3, 0), q(5, 16));
        assert_eq!(leq(2, 2, 4, 0), q(19, 64));
        assert_eq!(leq(2, 2, 9, 0), q(19115, 65536));
        assert_eq!(leq(2, 3, 2, 0), q(17, 27));
        assert_eq!(leq(2, 3, 6, 0), q(110717, 177147));
        assert_eq!(leq(2, 3, 6, 1), q(51668, 59049));
        assert!(matches!(
            level_density_leq(&build_level(&fr(2), 3, 2).unwrap(), 2),
            Err(KummerError::LevelTooLow { .. })
        ));
    }

    #[test]
    fn raw_levels_approach_limit_with_square_tail() {
        // leq(n) - 1/3 = (2/3)·4^{-n} for r = 3, ℓ = 2
        for n in 1..10 {
            let v = level_density_leq(&build_level(&fr(3), 2, n).unwrap(), 0).unwrap();
            assert_eq!(v - q(1, 3), q(2, 3) / q(4i128.pow(n), 1));
        }
    }

    #[test]
    fn entanglement_halves_the_group() {
        for r in [2, -2, 18, -8] {
            for n in 3..10 {
                let level = build_level(&fr(r), 2, n).unwrap();
                let m = 1u128 << n;
                assert_eq!(level.valid_count(), m / 2 * m / 2);
            }
        }
        let level = build_level(&fr(2), 2, 2).unwrap();
        assert_eq!(level.valid_count(), 2 * 4);
    }

    #[test]
    fn exact_examples() {
        assert_eq!(exact_density(&fr(3), 2, 0).unwrap().value, q(1, 3));
        assert_eq!(exact_density(&fr(2), 2, 0).unwrap().value, q(7, 24));
        assert_eq!(exact_density(&fr(2), 3, 0).unwrap().value, q(5, 8));
        assert_eq!(exact_density(&fr(2), 3, 1).unwrap().value, q(1, 4));
        assert_eq!(exact_density(&fr(2), 3, 2).unwrap().value, q(1, 12));
    }

    fn closed_form(l: u64, a: u32) -> Rational {
        let l = l as i128;
        if a == 0 {
            q(l - 2, l - 1) + q(1, l * l - 1)
        } else {
            q(l, l + 1) / q(l.pow(a), 1)
        }
    }

    #[test]
    fn unentangled_matches_closed_form() {
        for (r, l) in [(3, 2), (6, 2), (2, 3), (5, 3), (2, 5), (3, 7)] {
            for a in 0..4 {
                assert_eq!(
                    exact_density(&fr(r), l, a).unwrap().value,
                    closed_form(l, a),
                    "r={r} l={l} a={a}"
                );
            }
        }
    }

    #[test]
    fn partial_sums_exhaust() {
        for (r, l) in [(2, 2), (3, 2), (2, 3)] {
            let total: Rational = (0..=10).map(|a| exact_density(&fr(r), l, a).unwrap().value).sum();
            let bound = q(1, 1) - q(2, (l as i128).pow(9));
            assert!(total > bound && total <= q(1, 1), "r={r} l={l} sum={total}");
        }
    }
}
