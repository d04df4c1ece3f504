//! Concrete group models over Q and their reductions modulo primes: split tori
//! `G_m^k` and elliptic curves in general Weierstrass form.

use std::collections::HashMap;
use std::fmt;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{
    self, add_mod, factor_u64, factorize, inv_mod, isqrt, mul_mod, order_by_descent, pow_mod, sub_mod, valuation,
    ArithError, Factorization, PrimeContext, Sign,
};

pub type Rational = Ratio<i128>;

/// Below this prime, group orders are counted exhaustively.
pub const EXHAUSTIVE_COUNT_BELOW: u64 = 1000;

/// Random points tried by BSGS before falling back to exhaustive counting.
pub const BSGS_POINTS: usize = 8;

/// Why a prime is left out of a scan. The discriminants are the on-disk codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum ExclusionReason {
    /// `p` belongs to the studied set of primes `S`.
    InPrimeSet = 1,
    /// `p` divides a numerator or denominator of a torus coordinate.
    Support = 2,
    /// `p` divides a curve discriminant.
    BadReduction = 3,
    /// `p` divides the denominator of a curve point coordinate.
    Denominator = 4,
    /// `p` divides the order of a torsion point in play.
    TorsionOrder = 5,
    /// A factorization or counting budget ran out.
    Budget = 6,
    /// Two listed torsion points reduced to the same value.
    TorsionCollision = 7,
}

impl ExclusionReason {
    pub const ALL: [ExclusionReason; 7] = [
        ExclusionReason::InPrimeSet,
        ExclusionReason::Support,
        ExclusionReason::BadReduction,
        ExclusionReason::Denominator,
        ExclusionReason::TorsionOrder,
        ExclusionReason::Budget,
        ExclusionReason::TorsionCollision,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.code() == code)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ExclusionReason::InPrimeSet => "in_prime_set",
            ExclusionReason::Support => "support",
            ExclusionReason::BadReduction => "bad_reduction",
            ExclusionReason::Denominator => "denominator",
            ExclusionReason::TorsionOrder => "torsion_order",
            ExclusionReason::Budget => "budget",
            ExclusionReason::TorsionCollision => "torsion_collision",
        }
    }
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupsError {
    #[error("prime {p} excluded: {reason}")]
    Excluded { p: u64, reason: ExclusionReason },
    #[error("singular curve: discriminant is zero")]
    Singular,
    #[error("point {0} is not on the curve")]
    NotOnCurve(String),
    #[error("rational coordinate has zero value or zero denominator")]
    ZeroCoordinate,
    #[error("torsion reduction collision between listed entries {0} and {1}")]
    TorsionCollision(usize, usize),
    #[error("listed torsion entry {index} has order {order}, expected a power of {l}")]
    NotPrimaryTorsion { index: usize, order: u64, l: u64 },
    #[error("listed torsion entry {index} has order {found} modulo {p}, declared {declared}")]
    TorsionOrderMismatch {
        index: usize,
        p: u64,
        declared: u64,
        found: u64,
    },
    #[error("{0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    Arith(#[from] ArithError),
}

fn excluded(p: u64, reason: ExclusionReason) -> GroupsError {
    GroupsError::Excluded { p, reason }
}

/// A nonzero rational number kept in factored form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FactoredRational {
    sign: Sign,
    numerator: Factorization,
    denominator: Factorization,
}

impl FactoredRational {
    pub fn from_ratio(num: i64, den: i64) -> Result<Self, GroupsError> {
        if num == 0 || den == 0 {
            return Err(GroupsError::ZeroCoordinate);
        }
        let (sn, fnum) = factorize(num)?;
        let (sd, fden) = factorize(den)?;
        let sign = if sn == sd { Sign::Positive } else { Sign::Negative };
        Ok(Self::from_parts(sign, fnum, fden))
    }

    pub fn from_integer(n: i64) -> Result<Self, GroupsError> {
        Self::from_ratio(n, 1)
    }

    /// Cancels common primes between the two factorizations.
    pub fn from_parts(sign: Sign, numerator: Factorization, denominator: Factorization) -> Self {
        let mut num = Vec::new();
        let mut den = Vec::new();
        let mut primes: Vec<u64> = numerator.primes().chain(denominator.primes()).collect();
        primes.sort_unstable();
        primes.dedup();
        for q in primes {
            let e = numerator.exponent_of(q) as i64 - denominator.exponent_of(q) as i64;
            match e {
                e if e > 0 => num.push((q, e as u32)),
                e if e < 0 => den.push((q, (-e) as u32)),
                _ => {}
            }
        }
        Self {
            sign,
            numerator: Factorization::from_pairs(num),
            denominator: Factorization::from_pairs(den),
        }
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn numerator(&self) -> &Factorization {
        &self.numerator
    }

    pub fn denominator(&self) -> &Factorization {
        &self.denominator
    }

    /// Signed exponent of `q`: positive in the numerator, negative in the denominator.
    pub fn exponent_of(&self, q: u64) -> i64 {
        self.numerator.exponent_of(q) as i64 - self.denominator.exponent_of(q) as i64
    }

    /// Primes dividing the numerator or denominator, ascending.
    pub fn support(&self) -> Vec<u64> {
        let mut s: Vec<u64> = self.numerator.primes().chain(self.denominator.primes()).collect();
        s.sort_unstable();
        s
    }

    /// True for `±1`.
    pub fn is_unit(&self) -> bool {
        self.numerator.is_one() && self.denominator.is_one()
    }

    pub fn pow(&self, k: i64) -> Self {
        let e = k.unsigned_abs() as u32;
        let sign = if self.sign == Sign::Negative && e % 2 == 1 {
            Sign::Negative
        } else {
            Sign::Positive
        };
        let (n, d) = (self.numerator.pow(e), self.denominator.pow(e));
        if k >= 0 {
            Self::from_parts(sign, n, d)
        } else {
            Self::from_parts(sign, d, n)
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let sign = if self.sign == other.sign {
            Sign::Positive
        } else {
            Sign::Negative
        };
        Self::from_parts(
            sign,
            self.numerator.mul(&other.numerator),
            self.denominator.mul(&other.denominator),
        )
    }

    /// Gcd of all prime exponents (0 for `±1`).
    pub fn exponent_gcd(&self) -> u64 {
        self.numerator
            .prime_powers()
            .iter()
            .chain(self.denominator.prime_powers())
            .fold(0, |g, &(_, e)| arith::gcd(g, e as u64))
    }

    /// Signed squarefree part `r*`, with `r = r* · s^2` for a rational `s`.
    pub fn squarefree_part(&self) -> i64 {
        let mag: i64 = self
            .numerator
            .prime_powers()
            .iter()
            .chain(self.denominator.prime_powers())
            .filter(|&&(_, e)| e % 2 == 1)
            .map(|&(q, _)| q as i64)
            .product();
        mag * self.sign.as_i64()
    }

    /// Residue modulo `p`, or the reason the reduction is undefined.
    pub fn residue(&self, p: u64) -> Result<u64, GroupsError> {
        if self.numerator.divides_by(p) || self.denominator.divides_by(p) {
            return Err(excluded(p, ExclusionReason::Support));
        }
        let n = self.numerator.value_mod(p);
        let d = self.denominator.value_mod(p);
        let v = mul_mod(n, inv_mod(d, p).expect("p does not divide denominator"), p);
        Ok(match self.sign {
            Sign::Positive => v,
            Sign::Negative => sub_mod(0, v, p),
        })
    }

    /// Exact value when it fits in `i64`.
    pub fn to_ratio(&self) -> Option<(i64, i64)> {
        let n = i64::try_from(self.numerator.value()?).ok()?;
        let d = i64::try_from(self.denominator.value()?).ok()?;
        Some((n * self.sign.as_i64(), d))
    }
}

impl fmt::Display for FactoredRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_ratio() {
            Some((n, 1)) => write!(f, "{n}"),
            Some((n, d)) => write!(f, "{n}/{d}"),
            None => {
                let s = if self.sign == Sign::Negative { "-" } else { "" };
                write!(f, "{s}({})/({})", self.numerator, self.denominator)
            }
        }
    }
}

/// A point of `G_m^k(Q)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusPoint {
    coordinates: Vec<FactoredRational>,
}

impl TorusPoint {
    pub fn new(coordinates: Vec<FactoredRational>) -> Result<Self, GroupsError> {
        if coordinates.is_empty() {
            return Err(GroupsError::Unsupported("torus point needs at least one coordinate"));
        }
        Ok(Self { coordinates })
    }

    pub fn from_integers(values: &[i64]) -> Result<Self, GroupsError> {
        Self::new(
            values
                .iter()
                .map(|&v| FactoredRational::from_integer(v))
                .collect::<Result<_, _>>()?,
        )
    }

    pub fn coordinates(&self) -> &[FactoredRational] {
        &self.coordinates
    }

    pub fn rank(&self) -> usize {
        self.coordinates.len()
    }

    pub fn pow(&self, k: i64) -> Self {
        Self {
            coordinates: self.coordinates.iter().map(|c| c.pow(k)).collect(),
        }
    }
}

/// Elliptic curve `y^2 + a1·xy + a3·y = x^3 + a2·x^2 + a4·x + a6` over Q.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeierstrassCurve {
    a: [i64; 5],
    discriminant: i128,
}

impl WeierstrassCurve {
    pub fn new(a1: i64, a2: i64, a3: i64, a4: i64, a6: i64) -> Result<Self, GroupsError> {
        let discriminant = weierstrass_discriminant([a1, a2, a3, a4, a6]);
        if discriminant == 0 {
            return Err(GroupsError::Singular);
        }
        Ok(Self {
            a: [a1, a2, a3, a4, a6],
            discriminant,
        })
    }

    pub fn from_coefficients(a: [i64; 5]) -> Result<Self, GroupsError> {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub fn coefficients(&self) -> [i64; 5] {
        self.a
    }

    pub fn discriminant(&self) -> i128 {
        self.discriminant
    }

    pub fn has_good_reduction(&self, p: u64) -> bool {
        self.discriminant % p as i128 != 0
    }

    pub fn contains(&self, point: &CurvePointQ) -> bool {
        match point {
            CurvePointQ::Infinity => true,
            CurvePointQ::Affine { x, y } => {
                let [a1, a2, a3, a4, a6] = self.a.map(|c| Rational::from_integer(c as i128));
                let (x, y) = (*x, *y);
                y * y + a1 * x * y + a3 * y == x * x * x + a2 * x * x + a4 * x + a6
            }
        }
    }

    pub fn reduce(&self, p: u64) -> Result<CurveModP, GroupsError> {
        if !self.has_good_reduction(p) {
            return Err(excluded(p, ExclusionReason::BadReduction));
        }
        let [a1, a2, a3, a4, a6] = self.a.map(|c| c.rem_euclid(p as i64) as u64);
        Ok(CurveModP { p, a1, a2, a3, a4, a6 })
    }
}

impl fmt::Display for WeierstrassCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a1, a2, a3, a4, a6] = self.a;
        write!(f, "[{a1},{a2},{a3},{a4},{a6}]")
    }
}

fn weierstrass_discriminant(a: [i64; 5]) -> i128 {
    let [a1, a2, a3, a4, a6] = a.map(|c| c as i128);
    let b2 = a1 * a1 + 4 * a2;
    let b4 = 2 * a4 + a1 * a3;
    let b6 = a3 * a3 + 4 * a6;
    let b8 = a1 * a1 * a6 + 4 * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4;
    -b2 * b2 * b8 - 8 * b4 * b4 * b4 - 27 * b6 * b6 + 9 * b2 * b4 * b6
}

/// A rational point of an elliptic curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CurvePointQ {
    Infinity,
    Affine { x: Rational, y: Rational },
}

impl CurvePointQ {
    pub fn affine(x: Rational, y: Rational) -> Self {
        CurvePointQ::Affine { x, y }
    }

    pub fn integral(x: i64, y: i64) -> Self {
        CurvePointQ::Affine {
            x: Rational::from_integer(x as i128),
            y: Rational::from_integer(y as i128),
        }
    }
}

impl fmt::Display for CurvePointQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurvePointQ::Infinity => write!(f, "O"),
            CurvePointQ::Affine { x, y } => write!(f, "({x},{y})"),
        }
    }
}

/// Point of a curve over `F_p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EcPoint {
    Infinity,
    Affine(u64, u64),
}

/// A curve with good reduction, coefficients reduced modulo `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CurveModP {
    p: u64,
    a1: u64,
    a2: u64,
    a3: u64,
    a4: u64,
    a6: u64,
}

impl CurveModP {
    pub fn p(&self) -> u64 {
        self.p
    }

    fn rhs(&self, x: u64) -> u64 {
        let p = self.p;
        let x2 = mul_mod(x, x, p);
        let x3 = mul_mod(x2, x, p);
        add_mod(
            add_mod(x3, mul_mod(self.a2, x2, p), p),
            add_mod(mul_mod(self.a4, x, p), self.a6, p),
            p,
        )
    }

    /// Coefficient of `y` in the curve equation at abscissa `x`.
    fn linear_y(&self, x: u64) -> u64 {
        add_mod(mul_mod(self.a1, x, self.p), self.a3, self.p)
    }

    pub fn contains(&self, pt: EcPoint) -> bool {
        match pt {
            EcPoint::Infinity => true,
            EcPoint::Affine(x, y) => {
                let p = self.p;
                add_mod(mul_mod(y, y, p), mul_mod(self.linear_y(x), y, p), p) == self.rhs(x)
            }
        }
    }

    pub fn neg(&self, pt: EcPoint) -> EcPoint {
        match pt {
            EcPoint::Infinity => EcPoint::Infinity,
            EcPoint::Affine(x, y) => EcPoint::Affine(x, sub_mod(0, add_mod(y, self.linear_y(x), self.p), self.p)),
        }
    }

    pub fn add(&self, a: EcPoint, b: EcPoint) -> EcPoint {
        let p = self.p;
        let (x1, y1, x2, y2) = match (a, b) {
            (EcPoint::Infinity, q) | (q, EcPoint::Infinity) => return q,
            (EcPoint::Affine(x1, y1), EcPoint::Affine(x2, y2)) => (x1, y1, x2, y2),
        };
        let (lambda, nu) = if x1 == x2 {
            let denom = add_mod(mul_mod(2, y1, p), self.linear_y(x1), p);
            if y1 != y2 || denom == 0 {
                // b = -a, or a is 2-torsion
                return EcPoint::Infinity;
            }
            let x1sq = mul_mod(x1, x1, p);
            let num = sub_mod(
                add_mod(
                    add_mod(mul_mod(3, x1sq, p), mul_mod(mul_mod(2, self.a2, p), x1, p), p),
                    self.a4,
                    p,
                ),
                mul_mod(self.a1, y1, p),
                p,
            );
            let inv = inv_mod(denom, p).expect("nonzero modulo prime");
            let lambda = mul_mod(num, inv, p);
            let nu = sub_mod(y1, mul_mod(lambda, x1, p), p);
            (lambda, nu)
        } else {
            let inv = inv_mod(sub_mod(x2, x1, p), p).expect("nonzero modulo prime");
            let lambda = mul_mod(sub_mod(y2, y1, p), inv, p);
            let nu = sub_mod(y1, mul_mod(lambda, x1, p), p);
            (lambda, nu)
        };
        let x3 = sub_mod(
            sub_mod(
                add_mod(mul_mod(lambda, lambda, p), mul_mod(self.a1, lambda, p), p),
                add_mod(self.a2, x1, p),
                p,
            ),
            x2,
            p,
        );
        let y3 = sub_mod(
            0,
            add_mod(add_mod(mul_mod(add_mod(lambda, self.a1, p), x3, p), nu, p), self.a3, p),
            p,
        );
        EcPoint::Affine(x3, y3)
    }

    pub fn mul(&self, pt: EcPoint, mut k: u64) -> EcPoint {
        let mut acc = EcPoint::Infinity;
        let mut base = pt;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.add(acc, base);
            }
            base = self.add(base, base);
            k >>= 1;
        }
        acc
    }

    /// Number of `y` with `(x, y)` on the curve.
    fn points_above(&self, x: u64) -> u64 {
        let p = self.p;
        if p == 2 {
            return (0..2).filter(|&y| self.contains(EcPoint::Affine(x, y))).count() as u64;
        }
        let b = self.linear_y(x);
        let disc = add_mod(mul_mod(b, b, p), mul_mod(4, self.rhs(x), p), p);
        match legendre(disc, p) {
            0 => 1,
            1 => 2,
            _ => 0,
        }
    }

    /// `#E(F_p)` by summing the number of points over every abscissa.
    pub fn count_points_exhaustive(&self) -> u64 {
        1 + (0..self.p).map(|x| self.points_above(x)).sum::<u64>()
    }

    /// An affine point with abscissa `x`, if one exists (odd `p`).
    pub fn lift_x(&self, x: u64) -> Option<EcPoint> {
        let p = self.p;
        if p == 2 {
            return (0..2).map(|y| EcPoint::Affine(x, y)).find(|&pt| self.contains(pt));
        }
        let b = self.linear_y(x);
        let disc = add_mod(mul_mod(b, b, p), mul_mod(4, self.rhs(x), p), p);
        let root = sqrt_mod(disc, p)?;
        let inv2 = inv_mod(2, p).expect("odd prime");
        let y = mul_mod(sub_mod(root, b, p), inv2, p);
        Some(EcPoint::Affine(x, y))
    }

    /// A random affine point, or `Infinity` if none turned up after `4p + 64` tries
    /// (tiny fields can have no affine points at all).
    pub fn random_point(&self, rng: &mut impl Rng) -> EcPoint {
        for _ in 0..4 * self.p + 64 {
            let x = rng.gen_range(0..self.p);
            if let Some(pt) = self.lift_x(x) {
                if rng.gen_bool(0.5) {
                    return self.neg(pt);
                }
                return pt;
            }
        }
        EcPoint::Infinity
    }

    /// Hasse interval `[p + 1 - ⌊2√p⌋, p + 1 + ⌊2√p⌋]`.
    pub fn hasse_interval(&self) -> (u64, u64) {
        let w = isqrt(4 * self.p);
        (self.p + 1 - w, self.p + 1 + w)
    }

    /// Some multiple of the order of `pt` inside `[lo, hi]`, by baby-step giant-step.
    fn multiple_of_order_in(&self, pt: EcPoint, lo: u64, hi: u64) -> Option<u64> {
        let width = hi - lo + 1;
        let m = isqrt(width) + 1;
        let mut baby: HashMap<EcPoint, u64> = HashMap::with_capacity(m as usize);
        let mut cur = EcPoint::Infinity;
        for j in 0..m {
            baby.entry(cur).or_insert(j);
            cur = self.add(cur, pt);
        }
        let giant = self.mul(pt, m);
        let mut t = self.mul(pt, lo);
        for i in 0..=m {
            // (lo + i·m)·P = -j·P  <=>  (lo + i·m + j)·P = O
            if let Some(&j) = baby.get(&self.neg(t)) {
                let k = lo + i * m + j;
                if k <= hi {
                    return Some(k);
                }
            }
            t = self.add(t, giant);
        }
        None
    }

    /// `#E(F_p)` by lcm accumulation of point orders over the Hasse interval.
    /// Returns `None` when `BSGS_POINTS` random points leave the count ambiguous.
    pub fn group_order_bsgs(&self, seed: u64) -> Result<Option<u64>, GroupsError> {
        let (lo, hi) = self.hasse_interval();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ self.p.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut acc = 1u64;
        for _ in 0..BSGS_POINTS {
            let pt = self.random_point(&mut rng);
            if pt == EcPoint::Infinity {
                continue;
            }
            let k = self
                .multiple_of_order_in(pt, lo, hi)
                .expect("Hasse interval contains the group order");
            let kf = factor_u64(k)?;
            let ord = order_by_descent(k, &kf, |c| self.mul(pt, c) == EcPoint::Infinity);
            acc = arith::lcm(acc, ord);
            let first = lo.div_ceil(acc) * acc;
            if first + acc > hi {
                return Ok(Some(first));
            }
        }
        Ok(None)
    }

    /// `#E(F_p)`: exhaustive below [`EXHAUSTIVE_COUNT_BELOW`], BSGS above it,
    /// exhaustive again when BSGS stays ambiguous.
    pub fn group_order(&self, seed: u64) -> Result<u64, GroupsError> {
        if self.p < EXHAUSTIVE_COUNT_BELOW {
            return Ok(self.count_points_exhaustive());
        }
        Ok(match self.group_order_bsgs(seed)? {
            Some(n) => n,
            None => self.count_points_exhaustive(),
        })
    }
}

/// Legendre symbol as `0`, `1` or `-1` for odd prime `p`.
pub fn legendre(a: u64, p: u64) -> i32 {
    let a = a % p;
    if a == 0 {
        return 0;
    }
    if pow_mod(a, (p - 1) / 2, p) == 1 {
        1
    } else {
        -1
    }
}

/// Square root modulo an odd prime (Tonelli–Shanks).
pub fn sqrt_mod(a: u64, p: u64) -> Option<u64> {
    let a = a % p;
    if a == 0 {
        return Some(0);
    }
    if legendre(a, p) != 1 {
        return None;
    }
    if p % 4 == 3 {
        return Some(pow_mod(a, (p + 1) / 4, p));
    }
    let s = (p - 1).trailing_zeros();
    let q = (p - 1) >> s;
    let z = (2..p).find(|&z| legendre(z, p) == -1)?;
    let mut m = s;
    let mut c = pow_mod(z, q, p);
    let mut t = pow_mod(a, q, p);
    let mut r = pow_mod(a, q.div_ceil(2), p);
    while t != 1 {
        let mut i = 0;
        let mut t2 = t;
        while t2 != 1 {
            t2 = mul_mod(t2, t2, p);
            i += 1;
        }
        let b = pow_mod(c, 1 << (m - i - 1), p);
        m = i;
        c = mul_mod(b, b, p);
        t = mul_mod(t, c, p);
        r = mul_mod(r, b, p);
    }
    Some(r)
}

/// Abelian group element with the operations needed for order computations.
pub trait GroupElement: Clone + PartialEq {
    fn op(&self, other: &Self) -> Self;
    fn inverse(&self) -> Self;
    /// Identity of the group this element lives in.
    fn identity_like(&self) -> Self;

    fn is_identity(&self) -> bool {
        *self == self.identity_like()
    }

    fn times(&self, mut k: u64) -> Self {
        let mut acc = self.identity_like();
        let mut base = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.op(&base);
            }
            base = base.op(&base);
            k >>= 1;
        }
        acc
    }
}

/// `(R mod p)`: a residue tuple in `(F_p^*)^k`, or a tuple of points on
/// reduced curves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReducedPoint {
    Torus { p: u64, residues: Vec<u64> },
    Curve { coords: Vec<(CurveModP, EcPoint)> },
}

impl ReducedPoint {
    pub fn p(&self) -> u64 {
        match self {
            ReducedPoint::Torus { p, .. } => *p,
            ReducedPoint::Curve { coords } => coords.first().map(|(c, _)| c.p).unwrap_or(0),
        }
    }
}

impl GroupElement for ReducedPoint {
    fn op(&self, other: &Self) -> Self {
        match (self, other) {
            (ReducedPoint::Torus { p, residues: a }, ReducedPoint::Torus { residues: b, .. }) => ReducedPoint::Torus {
                p: *p,
                residues: a.iter().zip(b).map(|(&x, &y)| mul_mod(x, y, *p)).collect(),
            },
            (ReducedPoint::Curve { coords: a }, ReducedPoint::Curve { coords: b }) => ReducedPoint::Curve {
                coords: a.iter().zip(b).map(|(&(c, x), &(_, y))| (c, c.add(x, y))).collect(),
            },
            _ => panic!("group operation between different group models"),
        }
    }

    fn inverse(&self) -> Self {
        match self {
            ReducedPoint::Torus { p, residues } => ReducedPoint::Torus {
                p: *p,
                residues: residues.iter().map(|&x| inv_mod(x, *p).expect("unit")).collect(),
            },
            ReducedPoint::Curve { coords } => ReducedPoint::Curve {
                coords: coords.iter().map(|&(c, x)| (c, c.neg(x))).collect(),
            },
        }
    }

    fn identity_like(&self) -> Self {
        match self {
            ReducedPoint::Torus { p, residues } => ReducedPoint::Torus {
                p: *p,
                residues: vec![1; residues.len()],
            },
            ReducedPoint::Curve { coords } => ReducedPoint::Curve {
                coords: coords.iter().map(|&(c, _)| (c, EcPoint::Infinity)).collect(),
            },
        }
    }

    fn times(&self, k: u64) -> Self {
        match self {
            ReducedPoint::Torus { p, residues } => ReducedPoint::Torus {
                p: *p,
                residues: residues.iter().map(|&x| pow_mod(x, k, *p)).collect(),
            },
            ReducedPoint::Curve { coords } => ReducedPoint::Curve {
                coords: coords.iter().map(|&(c, x)| (c, c.mul(x, k))).collect(),
            },
        }
    }
}

/// The ℓ-primary component of a reduced point: `component` has order `ℓ^a`
/// and the point minus `component` has order prime to ℓ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LPart<G> {
    pub a: u32,
    pub component: G,
}

pub fn reduce_torus_point(point: &TorusPoint, ctx: &PrimeContext) -> Result<ReducedPoint, GroupsError> {
    let p = ctx.p();
    let residues = point
        .coordinates()
        .iter()
        .map(|c| c.residue(p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ReducedPoint::Torus { p, residues })
}

/// Orders of each coordinate of a reduced torus point.
pub fn torus_coordinate_orders(point: &TorusPoint, ctx: &PrimeContext) -> Result<Vec<u64>, GroupsError> {
    let ReducedPoint::Torus { residues, .. } = reduce_torus_point(point, ctx)? else {
        unreachable!()
    };
    residues
        .into_iter()
        .map(|x| arith::multiplicative_order(x, ctx).map_err(GroupsError::from))
        .collect()
}

/// `v_ℓ` of the order of `(R mod p)`.
pub fn torus_order_valuation(point: &TorusPoint, ctx: &PrimeContext, l: u64) -> Result<u32, GroupsError> {
    if ctx.p() == l {
        return Err(excluded(l, ExclusionReason::InPrimeSet));
    }
    Ok(torus_coordinate_orders(point, ctx)?
        .into_iter()
        .map(|o| valuation(o, l))
        .max()
        .unwrap_or(0))
}

fn reduce_rational(v: &Rational, p: u64) -> Result<u64, GroupsError> {
    let pm = p as i128;
    let den = v.denom().rem_euclid(pm) as u64;
    if den == 0 {
        return Err(excluded(p, ExclusionReason::Denominator));
    }
    let num = v.numer().rem_euclid(pm) as u64;
    Ok(mul_mod(num, inv_mod(den, p).expect("nonzero"), p))
}

/// Reduces a rational point on `curve` modulo `p`.
pub fn curve_reduce_point(
    curve: &WeierstrassCurve,
    point: &CurvePointQ,
    p: u64,
) -> Result<(CurveModP, EcPoint), GroupsError> {
    let reduced = curve.reduce(p)?;
    let pt = match point {
        CurvePointQ::Infinity => EcPoint::Infinity,
        CurvePointQ::Affine { x, y } => EcPoint::Affine(reduce_rational(x, p)?, reduce_rational(y, p)?),
    };
    debug_assert!(reduced.contains(pt));
    Ok((reduced, pt))
}

pub fn curve_reduce(
    curve: &WeierstrassCurve,
    point: &CurvePointQ,
    ctx: &PrimeContext,
) -> Result<ReducedPoint, GroupsError> {
    let (c, pt) = curve_reduce_point(curve, point, ctx.p())?;
    Ok(ReducedPoint::Curve { coords: vec![(c, pt)] })
}

/// `#E(F_p)`. The seed only steers the choice of random points for BSGS.
pub fn curve_group_order(curve: &WeierstrassCurve, ctx: &PrimeContext, seed: u64) -> Result<u64, GroupsError> {
    curve.reduce(ctx.p())?.group_order(seed)
}

/// Exact order of `g` given a multiple `n` of it and the factorization of `n`.
pub fn element_order<G: GroupElement>(g: &G, n: u64, n_factors: &Factorization) -> u64 {
    order_by_descent(n, n_factors, |k| g.times(k).is_identity())
}

/// Order of a reduced curve point by descent from the group order.
pub fn curve_point_order(point: &ReducedPoint, n: u64, n_factors: &Factorization) -> u64 {
    element_order(point, n, n_factors)
}

/// Splits off the ℓ-primary component of `g`, whose exact order is `order`.
pub fn l_primary_part<G: GroupElement>(g: &G, order: u64, l: u64) -> LPart<G> {
    let a = valuation(order, l);
    if a == 0 {
        return LPart {
            a: 0,
            component: g.identity_like(),
        };
    }
    let la = l.pow(a);
    let m = order / la;
    let coeff = (m as u128 * inv_mod(m % la, la).expect("m prime to l") as u128 % order as u128) as u64;
    LPart {
        a,
        component: g.times(coeff),
    }
}

/// As [`l_primary_part`], but from any multiple `n` of the order, such as the
/// group order; `a` is found by repeated multiplication by ℓ.
pub fn l_primary_part_from_multiple<G: GroupElement>(g: &G, n: u64, l: u64) -> LPart<G> {
    let e = valuation(n, l);
    let le = l.pow(e);
    let m = n / le;
    let component = if e == 0 {
        g.identity_like()
    } else {
        let coeff = (m as u128 * inv_mod(m % le, le).expect("m prime to l") as u128 % n as u128) as u64;
        g.times(coeff)
    };
    let mut a = 0;
    let mut t = component.clone();
    while !t.is_identity() {
        t = t.times(l);
        a += 1;
    }
    LPart { a, component }
}

/// A rational torsion class against which ℓ-parts are matched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TorsionDescriptor {
    /// The rational point `±1` of `G_m`.
    TorusSign(Sign),
    /// The Galois class of all primitive roots of unity of the given order.
    TorusRootClass(u64),
    /// A rational torsion point of the given exact order.
    CurvePoint {
        curve: WeierstrassCurve,
        point: CurvePointQ,
        order: u64,
    },
}

impl TorsionDescriptor {
    pub fn order(&self) -> u64 {
        match self {
            TorsionDescriptor::TorusSign(Sign::Positive) => 1,
            TorsionDescriptor::TorusSign(Sign::Negative) => 2,
            TorsionDescriptor::TorusRootClass(n) => *n,
            TorsionDescriptor::CurvePoint { order, .. } => *order,
        }
    }
}

/// Reduced value of a torsion descriptor, used for collision and match tests.
#[derive(Debug, Clone, PartialEq, Eq)]
enum ReducedTorsion {
    Residue(u64),
    Class(u64),
    Point(EcPoint),
}

/// Index of the listed torsion class matching the ℓ-part, if any.
///
/// Only single-coordinate points are matched.
pub fn match_l_part(
    part: &LPart<ReducedPoint>,
    torsion_list: &[TorsionDescriptor],
    l: u64,
) -> Result<Option<usize>, GroupsError> {
    let p = part.component.p();
    let mut reduced = Vec::with_capacity(torsion_list.len());
    for (index, t) in torsion_list.iter().enumerate() {
        let order = t.order();
        if order == 0 || l.pow(valuation(order, l)) != order {
            return Err(GroupsError::NotPrimaryTorsion { index, order, l });
        }
        if order % p == 0 {
            return Err(excluded(p, ExclusionReason::TorsionOrder));
        }
        reduced.push(match t {
            TorsionDescriptor::TorusSign(Sign::Positive) => ReducedTorsion::Residue(1),
            TorsionDescriptor::TorusSign(Sign::Negative) => ReducedTorsion::Residue(p - 1),
            TorsionDescriptor::TorusRootClass(n) => ReducedTorsion::Class(*n),
            TorsionDescriptor::CurvePoint { curve, point, order } => {
                let (c, pt) = curve_reduce_point(curve, point, p)?;
                let found = arith::factor_u64(*order)
                    .map(|f| order_by_descent(*order, &f, |k| c.mul(pt, k) == EcPoint::Infinity))?;
                if c.mul(pt, *order) != EcPoint::Infinity || found != *order {
                    return Err(GroupsError::TorsionOrderMismatch {
                        index,
                        p,
                        declared: *order,
                        found,
                    });
                }
                ReducedTorsion::Point(pt)
            }
        });
    }
    // A root class contains ±1 exactly when the orders agree.
    let collides = |i: usize, j: usize| match (&reduced[i], &reduced[j]) {
        (ReducedTorsion::Class(_), ReducedTorsion::Residue(_))
        | (ReducedTorsion::Residue(_), ReducedTorsion::Class(_)) => torsion_list[i].order() == torsion_list[j].order(),
        (a, b) => a == b,
    };
    for i in 0..reduced.len() {
        for j in i + 1..reduced.len() {
            if collides(i, j) {
                return Err(GroupsError::TorsionCollision(i, j));
            }
        }
    }
    let found = match &part.component {
        ReducedPoint::Torus { residues, .. } => {
            let [x] = residues[..] else {
                return Err(GroupsError::Unsupported("ℓ-part matching needs a single coordinate"));
            };
            let comp_order = l.pow(part.a);
            reduced.iter().position(|r| match r {
                ReducedTorsion::Residue(v) => *v == x,
                ReducedTorsion::Class(n) => *n == comp_order,
                ReducedTorsion::Point(_) => false,
            })
        }
        ReducedPoint::Curve { coords } => {
            let [(_, pt)] = coords[..] else {
                return Err(GroupsError::Unsupported("ℓ-part matching needs a single coordinate"));
            };
            reduced.iter().position(|r| *r == ReducedTorsion::Point(pt))
        }
    };
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(p: u64) -> PrimeContext {
        PrimeContext::new(p).unwrap()
    }

    fn naive_order(x: u64, p: u64) -> u64 {
        let mut y = x;
        let mut o = 1;
        while y != 1 {
            y = y * x % p;
            o += 1;
        }
        o
    }

    /// Brute-force count over all pairs `(x, y)`.
    fn brute_count(c: &CurveModP) -> u64 {
        let mut n = 1;
        for x in 0..c.p() {
            for y in 0..c.p() {
                if c.contains(EcPoint::Affine(x, y)) {
                    n += 1;
                }
            }
        }
        n
    }

    fn naive_point_order(c: &CurveModP, pt: EcPoint) -> u64 {
        let mut acc = pt;
        let mut k = 1;
        while acc != EcPoint::Infinity {
            acc = c.add(acc, pt);
            k += 1;
        }
        k
    }

    fn paper_curve() -> WeierstrassCurve {
        WeierstrassCurve::new(0, 0, 1, -7, 6).unwrap()
    }

    fn congruent_curve() -> WeierstrassCurve {
        WeierstrassCurve::new(0, 0, 0, -25, 0).unwrap()
    }

    #[test]
    fn factored_rational_basics() {
        let r = FactoredRational::from_ratio(-12, 18).unwrap();
        assert_eq!(r.to_ratio(), Some((-2, 3)));
        assert_eq!(r.support(), vec![2, 3]);
        assert_eq!(r.pow(-2).to_ratio(), Some((9, 4)));
        assert_eq!(FactoredRational::from_integer(12).unwrap().squarefree_part(), 3);
        assert_eq!(FactoredRational::from_integer(-8).unwrap().squarefree_part(), -2);
        assert!(FactoredRational::from_integer(-1).unwrap().is_unit());
        assert_eq!(FactoredRational::from_integer(0), Err(GroupsError::ZeroCoordinate));
    }

    #[test]
    fn reduce_torus_examples() {
        let r = TorusPoint::from_integers(&[2]).unwrap();
        assert_eq!(
            reduce_torus_point(&r, &ctx(7)).unwrap(),
            ReducedPoint::Torus {
                p: 7,
                residues: vec![2]
            }
        );
        let r = TorusPoint::new(vec![FactoredRational::from_ratio(3, 5).unwrap()]).unwrap();
        assert_eq!(
            reduce_torus_point(&r, &ctx(5)),
            Err(GroupsError::Excluded {
                p: 5,
                reason: ExclusionReason::Support
            })
        );
        let r = TorusPoint::from_integers(&[2, -2]).unwrap();
        assert_eq!(
            reduce_torus_point(&r, &ctx(7)).unwrap(),
            ReducedPoint::Torus {
                p: 7,
                residues: vec![2, 5]
            }
        );
    }

    #[test]
    fn torus_valuation_examples() {
        let two = TorusPoint::from_integers(&[2]).unwrap();
        assert_eq!(torus_order_valuation(&two, &ctx(7), 2).unwrap(), 0);
        assert_eq!(naive_order(2, 7), 3);
        assert_eq!(torus_order_valuation(&two, &ctx(17), 2).unwrap(), 3);
        assert_eq!(naive_order(2, 17), 8);
        let m1 = TorusPoint::from_integers(&[-1]).unwrap();
        for p in [3, 5, 7, 11, 13, 101] {
            assert_eq!(torus_order_valuation(&m1, &ctx(p), 2).unwrap(), 1);
        }
        assert!(matches!(
            torus_order_valuation(&two, &ctx(2), 2),
            Err(GroupsError::Excluded { .. })
        ));
    }

    #[test]
    fn torus_valuation_is_max_over_coordinates() {
        let r = TorusPoint::from_integers(&[2, 3, -5]).unwrap();
        for p in crate::arith::sieve_primes(2000).into_iter().filter(|&p| p > 5) {
            let c = ctx(p);
            for l in [2, 3, 5] {
                let expect = [2u64, 3, p - 5]
                    .iter()
                    .map(|&x| valuation(naive_order(x, p), l))
                    .max()
                    .unwrap();
                assert_eq!(torus_order_valuation(&r, &c, l).unwrap(), expect);
            }
        }
    }

    #[test]
    fn paper_curve_discriminant() {
        assert_eq!(paper_curve().discriminant(), 5077);
        assert!(paper_curve().contains(&CurvePointQ::integral(1, 0)));
        assert!(paper_curve().contains(&CurvePointQ::integral(2, 0)));
        assert!(paper_curve().contains(&CurvePointQ::integral(0, 2)));
        assert!(!paper_curve().contains(&CurvePointQ::integral(1, 1)));
        assert_eq!(WeierstrassCurve::new(0, 0, 0, 0, 0), Err(GroupsError::Singular));
    }

    #[test]
    fn curve_reduce_examples() {
        let e = paper_curve();
        let r = curve_reduce(&e, &CurvePointQ::integral(1, 0), &ctx(5)).unwrap();
        let ReducedPoint::Curve { coords } = &r else { panic!() };
        assert_eq!(coords[0].1, EcPoint::Affine(1, 0));
        assert_eq!(
            curve_reduce(&e, &CurvePointQ::integral(1, 0), &ctx(5077)),
            Err(GroupsError::Excluded {
                p: 5077,
                reason: ExclusionReason::BadReduction
            })
        );
        let r = curve_reduce(&congruent_curve(), &CurvePointQ::integral(-4, 6), &ctx(7)).unwrap();
        let ReducedPoint::Curve { coords } = &r else { panic!() };
        assert_eq!(coords[0].1, EcPoint::Affine(3, 6));
        let half = CurvePointQ::affine(Rational::new(1, 3), Rational::from_integer(0));
        assert!(matches!(
            curve_reduce_point(&congruent_curve(), &half, 3),
            Err(GroupsError::Excluded {
                reason: ExclusionReason::Denominator,
                ..
            })
        ));
    }

    #[test]
    fn group_order_examples() {
        let c5 = paper_curve().reduce(5).unwrap();
        assert_eq!(brute_count(&c5), 10);
        assert_eq!(curve_group_order(&paper_curve(), &ctx(5), 0).unwrap(), 10);
        let c7 = congruent_curve().reduce(7).unwrap();
        assert_eq!(brute_count(&c7), 8);
        assert_eq!(curve_group_order(&congruent_curve(), &ctx(7), 0).unwrap(), 8);
    }

    #[test]
    fn point_order_examples() {
        let e = paper_curve();
        let c5 = e.reduce(5).unwrap();
        let p1 = curve_reduce(&e, &CurvePointQ::integral(1, 0), &ctx(5)).unwrap();
        let f10 = factor_u64(10).unwrap();
        assert_eq!(curve_point_order(&p1, 10, &f10), 5);
        assert_eq!(naive_point_order(&c5, EcPoint::Affine(1, 0)), 5);
        assert_eq!(c5.mul(EcPoint::Affine(1, 0), 2), EcPoint::Affine(4, 1));
        assert_eq!(c5.mul(EcPoint::Affine(1, 0), 4), EcPoint::Affine(1, 4));
        assert_eq!(c5.neg(EcPoint::Affine(1, 0)), EcPoint::Affine(1, 4));
        let id = p1.identity_like();
        assert_eq!(curve_point_order(&id, 10, &f10), 1);

        let q = curve_reduce(&congruent_curve(), &CurvePointQ::integral(3, 6), &ctx(7)).unwrap();
        assert_eq!(curve_point_order(&q, 8, &factor_u64(8).unwrap()), 4);
        let c7 = congruent_curve().reduce(7).unwrap();
        assert_eq!(c7.mul(EcPoint::Affine(3, 6), 2), EcPoint::Affine(2, 0));
    }

    #[test]
    fn bsgs_agrees_with_brute_force() {
        for (a, primes) in [
            ([0, 0, 1, -7, 6], vec![1009u64, 1013, 2003, 3001]),
            ([1, -1, 1, -10, -20], vec![1009, 1999, 2011]),
            ([0, 0, 0, -25, 0], vec![1013, 1021, 1031]),
            ([0, 0, 0, 0, 1], vec![1009, 1033, 1051]),
        ] {
            let e = WeierstrassCurve::from_coefficients(a).unwrap();
            for p in primes {
                let c = e.reduce(p).unwrap();
                let n = brute_count(&c);
                assert_eq!(c.count_points_exhaustive(), n);
                for seed in 0..3 {
                    if let Some(b) = c.group_order_bsgs(seed).unwrap() {
                        assert_eq!(b, n, "curve {e} p {p}");
                    }
                    assert_eq!(c.group_order(seed).unwrap(), n);
                }
            }
        }
    }

    #[test]
    fn sqrt_mod_roundtrip() {
        for p in [3u64, 5, 13, 17, 41, 97, 193, 65537] {
            for a in 1..p.min(300) {
                if let Some(r) = sqrt_mod(a, p) {
                    assert_eq!(mul_mod(r, r, p), a);
                } else {
                    assert_eq!(legendre(a, p), -1);
                }
            }
        }
    }

    #[derive(Clone, PartialEq, Debug)]
    struct Zn {
        v: u64,
        n: u64,
    }

    impl GroupElement for Zn {
        fn op(&self, o: &Self) -> Self {
            Zn {
                v: (self.v + o.v) % self.n,
                n: self.n,
            }
        }
        fn inverse(&self) -> Self {
            Zn {
                v: (self.n - self.v) % self.n,
                n: self.n,
            }
        }
        fn identity_like(&self) -> Self {
            Zn { v: 0, n: self.n }
        }
    }

    #[test]
    fn l_part_examples() {
        let g = Zn { v: 1, n: 12 };
        let part = l_primary_part(&g, 12, 2);
        assert_eq!(part.a, 2);
        assert_eq!(part.component, g.times(9));

        let id = Zn { v: 0, n: 7 };
        assert_eq!(
            l_primary_part(&id, 1, 2),
            LPart {
                a: 0,
                component: id.clone()
            }
        );

        let e = congruent_curve();
        let c7 = ctx(7);
        let pt = curve_reduce(&e, &CurvePointQ::integral(-4, 6), &c7).unwrap();
        assert_eq!(curve_point_order(&pt, 8, &factor_u64(8).unwrap()), 4);
        let part = l_primary_part(&pt, 4, 2);
        assert_eq!(part.a, 2);
        assert_eq!(part.component, pt);
    }

    #[test]
    fn l_part_from_group_order() {
        for n in 1..=60u64 {
            for v in 0..n {
                let g = Zn { v, n };
                let ord = n / crate::arith::gcd(v, n);
                for l in [2, 3, 5] {
                    assert_eq!(l_primary_part_from_multiple(&g, n, l), l_primary_part(&g, ord, l));
                    assert_eq!(l_primary_part_from_multiple(&g, 4 * n, l), l_primary_part(&g, ord, l));
                }
            }
        }
    }

    #[test]
    fn match_examples() {
        let id = ReducedPoint::Torus {
            p: 7,
            residues: vec![1],
        };
        let part = LPart { a: 0, component: id };
        assert_eq!(
            match_l_part(&part, &[TorsionDescriptor::TorusSign(Sign::Positive)], 2).unwrap(),
            Some(0)
        );

        let e = congruent_curve();
        let pt = curve_reduce(&e, &CurvePointQ::integral(-4, 6), &ctx(7)).unwrap();
        let part = l_primary_part(&pt, 4, 2);
        let list = [TorsionDescriptor::CurvePoint {
            curve: e,
            point: CurvePointQ::integral(0, 0),
            order: 2,
        }];
        assert_eq!(match_l_part(&part, &list, 2).unwrap(), None);

        // -12 ≡ 2 (mod 7) has order 3, so its 2-part is trivial
        let r = TorusPoint::from_integers(&[-12]).unwrap();
        let red = reduce_torus_point(&r, &ctx(7)).unwrap();
        assert_eq!(naive_order(2, 7), 3);
        let part = l_primary_part(&red, 3, 2);
        assert_eq!(part.a, 0);
        assert_eq!(
            match_l_part(&part, &[TorsionDescriptor::TorusSign(Sign::Negative)], 2).unwrap(),
            None
        );
    }

    #[test]
    fn match_rejects_collisions_and_bad_lists() {
        let part = LPart {
            a: 1,
            component: ReducedPoint::Torus {
                p: 7,
                residues: vec![6],
            },
        };
        let list = [
            TorsionDescriptor::TorusSign(Sign::Negative),
            TorsionDescriptor::TorusRootClass(2),
        ];
        assert_eq!(match_l_part(&part, &list, 2), Err(GroupsError::TorsionCollision(0, 1)));
        let list = [TorsionDescriptor::TorusRootClass(3)];
        assert!(matches!(
            match_l_part(&part, &list, 2),
            Err(GroupsError::NotPrimaryTorsion { .. })
        ));
        let list = [
            TorsionDescriptor::TorusSign(Sign::Positive),
            TorsionDescriptor::TorusSign(Sign::Negative),
            TorsionDescriptor::TorusRootClass(4),
        ];
        assert_eq!(match_l_part(&part, &list, 2).unwrap(), Some(1));
    }

    #[test]
    fn rational_torsion_keeps_its_order() {
        // (5,5) has order 5 on y^2 + y = x^3 - x^2 - 10x - 20
        let e = WeierstrassCurve::new(0, -1, 1, -10, -20).unwrap();
        let t = CurvePointQ::integral(5, 5);
        assert!(e.contains(&t));
        for p in crate::arith::sieve_primes(3000) {
            if !e.has_good_reduction(p) || p == 5 {
                continue;
            }
            let c = ctx(p);
            let red = curve_reduce(&e, &t, &c).unwrap();
            let n = curve_group_order(&e, &c, 1).unwrap();
            assert_eq!(curve_point_order(&red, n, &factor_u64(n).unwrap()), 5, "p = {p}");
        }
    }
}
