//! Exact integer and modular arithmetic: prime generation, factorization,
//! valuations and multiplicative orders.
//!
//! Everything here is integer-only. Products modulo `m` are formed in double
//! width (`u64` when `m < 2^32`, `u128` otherwise) before reduction.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Trial division runs over primes up to this bound before Pollard rho.
pub const TRIAL_BOUND: u64 = 1_000_000;

/// Default iteration budget for one Pollard rho attempt.
pub const DEFAULT_RHO_BUDGET: u64 = 1 << 20;

/// Bytes per sieve segment; each byte represents one odd number.
const SEGMENT_BYTES: usize = 1 << 15;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("{x} is not a unit modulo {p}")]
    NotAUnit { x: u64, p: u64 },
    #[error("factorization budget exceeded: could not split cofactor {cofactor}")]
    BudgetExceeded { cofactor: u64 },
    #[error("cannot factor zero")]
    Zero,
    #[error("{0} is not prime")]
    NotPrime(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn as_i64(self) -> i64 {
        match self {
            Sign::Positive => 1,
            Sign::Negative => -1,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }
}

/// Prime factorization of a positive integer as `(prime, exponent)` pairs with
/// strictly increasing primes and positive exponents.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Factorization {
    prime_powers: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn one() -> Self {
        Self::default()
    }

    /// Builds a factorization from arbitrary `(prime, exponent)` pairs,
    /// merging repeats and dropping zero exponents.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u64, u32)>) -> Self {
        let mut v: Vec<(u64, u32)> = pairs.into_iter().filter(|&(_, e)| e > 0).collect();
        v.sort_unstable();
        let mut merged: Vec<(u64, u32)> = Vec::with_capacity(v.len());
        for (p, e) in v {
            match merged.last_mut() {
                Some(last) if last.0 == p => last.1 += e,
                _ => merged.push((p, e)),
            }
        }
        Self { prime_powers: merged }
    }

    pub fn prime_powers(&self) -> &[(u64, u32)] {
        &self.prime_powers
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.prime_powers.iter().map(|&(p, _)| p)
    }

    pub fn is_one(&self) -> bool {
        self.prime_powers.is_empty()
    }

    pub fn exponent_of(&self, prime: u64) -> u32 {
        self.prime_powers
            .binary_search_by_key(&prime, |&(p, _)| p)
            .map(|i| self.prime_powers[i].1)
            .unwrap_or(0)
    }

    /// The factored integer, or `None` on `u64` overflow.
    pub fn value(&self) -> Option<u64> {
        self.prime_powers
            .iter()
            .try_fold(1u64, |acc, &(p, e)| acc.checked_mul(p.checked_pow(e)?))
    }

    /// The factored integer reduced modulo `m`.
    pub fn value_mod(&self, m: u64) -> u64 {
        self.prime_powers
            .iter()
            .fold(1 % m, |acc, &(p, e)| mul_mod(acc, pow_mod(p % m, e as u64, m), m))
    }

    pub fn pow(&self, k: u32) -> Self {
        if k == 0 {
            return Self::one();
        }
        Self {
            prime_powers: self.prime_powers.iter().map(|&(p, e)| (p, e * k)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::from_pairs(self.prime_powers.iter().chain(&other.prime_powers).copied())
    }

    pub fn divides_by(&self, prime: u64) -> bool {
        self.exponent_of(prime) > 0
    }
}

impl std::fmt::Display for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.prime_powers.is_empty() {
            return write!(f, "1");
        }
        for (i, &(p, e)) in self.prime_powers.iter().enumerate() {
            if i > 0 {
                write!(f, "·")?;
            }
            if e == 1 {
                write!(f, "{p}")?;
            } else {
                write!(f, "{p}^{e}")?;
            }
        }
        Ok(())
    }
}

/// A prime together with the factorization of `p - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeContext {
    p: u64,
    p_minus_1: Factorization,
}

impl PrimeContext {
    pub fn new(p: u64) -> Result<Self, ArithError> {
        if !is_prime(p) {
            return Err(ArithError::NotPrime(p));
        }
        let p_minus_1 = factor_u64(p - 1)?;
        Ok(Self { p, p_minus_1 })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn p_minus_1(&self) -> &Factorization {
        &self.p_minus_1
    }
}

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    if m <= u32::MAX as u64 {
        (a % m) * (b % m) % m
    } else {
        ((a as u128 * b as u128) % m as u128) as u64
    }
}

#[inline]
pub fn add_mod(a: u64, b: u64, m: u64) -> u64 {
    let (a, b) = (a % m, b % m);
    let s = a.wrapping_add(b);
    if s >= m || s < a {
        s.wrapping_sub(m)
    } else {
        s
    }
}

#[inline]
pub fn sub_mod(a: u64, b: u64, m: u64) -> u64 {
    let (a, b) = (a % m, b % m);
    if a >= b {
        a - b
    } else {
        m - (b - a)
    }
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn lcm(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        0
    } else {
        a / gcd(a, b) * b
    }
}

/// Extended gcd on signed integers: returns `(g, x, y)` with `a·x + b·y = g ≥ 0`.
pub fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i128, 0i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0.div_euclid(r1);
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 < 0 {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

/// Inverse of `a` modulo `m`, if it exists.
pub fn inv_mod(a: u64, m: u64) -> Option<u64> {
    let (g, x, _) = ext_gcd((a % m) as i128, m as i128);
    (g == 1).then(|| x.rem_euclid(m as i128) as u64)
}

/// Largest `v` with `l^v | n`. Returns 0 for `n = 0` and for `l < 2`.
pub fn valuation(mut n: u64, l: u64) -> u32 {
    if n == 0 || l < 2 {
        return 0;
    }
    if l == 2 {
        return n.trailing_zeros();
    }
    let mut v = 0;
    while n.is_multiple_of(l) {
        n /= l;
        v += 1;
    }
    v
}

/// Deterministic Miller–Rabin for all `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let d = (n - 1) >> (n - 1).trailing_zeros();
    let s = (n - 1).trailing_zeros();
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn small_primes() -> &'static [u64] {
    static TABLE: OnceLock<Vec<u64>> = OnceLock::new();
    TABLE.get_or_init(|| sieve_primes(TRIAL_BOUND))
}

/// All primes `<= bound`, ascending.
pub fn sieve_primes(bound: u64) -> Vec<u64> {
    primes_in_range(2, bound)
}

/// All primes in `[lo, hi]`, ascending, by a segmented odd-only sieve.
pub fn primes_in_range(lo: u64, hi: u64) -> Vec<u64> {
    let mut out = Vec::new();
    if hi < 2 || lo > hi {
        return out;
    }
    if lo <= 2 {
        out.push(2);
    }
    let base = simple_sieve(isqrt(hi));
    // Odd numbers only: index i of a segment starting at odd `start` is start + 2i.
    let mut start = lo.max(3) | 1;
    let mut seg = vec![true; SEGMENT_BYTES];
    while start <= hi {
        let span = ((hi - start) / 2 + 1).min(SEGMENT_BYTES as u64) as usize;
        let seg = &mut seg[..span];
        seg.fill(true);
        let seg_last = start + 2 * (span as u64 - 1);
        for &q in base.iter().skip(1) {
            if q * q > seg_last {
                break;
            }
            // first odd multiple of q that is >= max(q*q, start)
            let mut m = (q * q).max(start.div_ceil(q) * q);
            if m % 2 == 0 {
                m += q;
            }
            let mut i = ((m - start) / 2) as usize;
            while i < span {
                seg[i] = false;
                i += q as usize;
            }
        }
        for (i, &is_p) in seg.iter().enumerate() {
            if is_p {
                let n = start + 2 * i as u64;
                if n > 1 {
                    out.push(n);
                }
            }
        }
        start = seg_last + 2;
    }
    out
}

fn simple_sieve(bound: u64) -> Vec<u64> {
    let n = bound as usize;
    if n < 2 {
        return Vec::new();
    }
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

pub fn isqrt(n: u64) -> u64 {
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as u64;
    while x.checked_mul(x).is_none_or(|sq| sq > n) {
        x -= 1;
    }
    while (x + 1).checked_mul(x + 1).is_some_and(|sq| sq <= n) {
        x += 1;
    }
    x
}

/// Factors a nonzero signed integer into a sign and the factorization of its
/// magnitude.
pub fn factorize(n: i64) -> Result<(Sign, Factorization), ArithError> {
    if n == 0 {
        return Err(ArithError::Zero);
    }
    let sign = if n < 0 { Sign::Negative } else { Sign::Positive };
    Ok((sign, factor_u64(n.unsigned_abs())?))
}

/// Factors a positive integer using the default rho budget.
pub fn factor_u64(n: u64) -> Result<Factorization, ArithError> {
    factor_u64_with_budget(n, DEFAULT_RHO_BUDGET)
}

/// Trial division over primes up to [`TRIAL_BOUND`], then Pollard rho (Brent)
/// with the fixed constants `c = 1, 2, 3, ...`, each run capped at
/// `rho_budget` iterations.
pub fn factor_u64_with_budget(mut n: u64, rho_budget: u64) -> Result<Factorization, ArithError> {
    if n == 0 {
        return Err(ArithError::Zero);
    }
    let mut pairs = Vec::new();
    let tz = n.trailing_zeros();
    if tz > 0 {
        pairs.push((2, tz));
        n >>= tz;
    }
    for &q in &small_primes()[1..] {
        if q * q > n {
            break;
        }
        if n.is_multiple_of(q) {
            let mut e = 0;
            while n.is_multiple_of(q) {
                n /= q;
                e += 1;
            }
            pairs.push((q, e));
        }
    }
    if n > 1 {
        let mut stack = vec![n];
        while let Some(m) = stack.pop() {
            if m == 1 {
                continue;
            }
            if m < TRIAL_BOUND * TRIAL_BOUND || is_prime(m) {
                // a cofactor below TRIAL_BOUND^2 with no factor <= TRIAL_BOUND is prime
                pairs.push((m, 1));
                continue;
            }
            let d = pollard_rho(m, rho_budget).ok_or(ArithError::BudgetExceeded { cofactor: m })?;
            stack.push(d);
            stack.push(m / d);
        }
    }
    Ok(Factorization::from_pairs(pairs))
}

fn pollard_rho(n: u64, budget: u64) -> Option<u64> {
    for c in 1..=8u64 {
        if let Some(d) = brent(n, c, budget) {
            return Some(d);
        }
    }
    None
}

fn brent(n: u64, c: u64, budget: u64) -> Option<u64> {
    let f = |x: u64| add_mod(mul_mod(x, x, n), c, n);
    let (mut y, mut r, mut q) = (2u64, 1u64, 1u64);
    let mut g = 1u64;
    let mut x = y;
    let mut ys = y;
    let mut spent = 0u64;
    const BATCH: u64 = 128;
    while g == 1 {
        x = y;
        for _ in 0..r {
            y = f(y);
        }
        let mut k = 0;
        while k < r && g == 1 {
            ys = y;
            for _ in 0..BATCH.min(r - k) {
                y = f(y);
                q = mul_mod(q, x.abs_diff(y), n);
            }
            g = gcd(q, n);
            k += BATCH;
        }
        spent += r;
        if spent > budget {
            return None;
        }
        r *= 2;
    }
    if g == n {
        loop {
            ys = f(ys);
            g = gcd(x.abs_diff(ys), n);
            if g > 1 {
                break;
            }
        }
    }
    (g != n).then_some(g)
}

/// Factor descent: given a multiple `group_order` of an element's order (with
/// its factorization) and a predicate telling whether `k·g` is the identity,
/// strips prime factors while the predicate still holds.
pub fn order_by_descent(group_order: u64, factors: &Factorization, mut kills: impl FnMut(u64) -> bool) -> u64 {
    let mut order = group_order;
    for &(q, e) in factors.prime_powers() {
        for _ in 0..e {
            if kills(order / q) {
                order /= q;
            } else {
                break;
            }
        }
    }
    order
}

/// Order of `x` in `(Z/p)^*`, by descent from `p - 1`.
pub fn multiplicative_order(x: u64, ctx: &PrimeContext) -> Result<u64, ArithError> {
    let p = ctx.p;
    let x = x % p;
    if x == 0 {
        return Err(ArithError::NotAUnit { x, p });
    }
    Ok(order_by_descent(p - 1, &ctx.p_minus_1, |k| pow_mod(x, k, p) == 1))
}
