//! Scalar abstractions.
//!
//! [`Scalar`] covers every arithmetic the LP relaxation and mean-field
//! propagation need (field operations and ordering), so those routines run
//! on `f32`, `f64`, or exact [`BigRational`]. [`Real`] adds the floating
//! point surface (`sqrt`, `ceil`, iteration to a tolerance) used by value
//! iteration, policies, and simulation.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive, Zero};

/// Exact rational with machine-word parts, used for budget fractions and
/// initial occupancies. Always stored in lowest terms with a positive
/// denominator.
pub type Rational = Ratio<i64>;

pub trait Scalar:
    Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// True when arithmetic is exact; tolerances collapse to zero.
    const EXACT: bool;

    fn from_ratio(r: &Rational) -> Self;

    /// A comparison tolerance no tighter than the type can resolve.
    fn tolerance(base: f64) -> Self;

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }

    fn powu(&self, exp: usize) -> Self {
        let mut acc = Self::one();
        for _ in 0..exp {
            acc = acc * self.clone();
        }
        acc
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_ratio(r: &Rational) -> Self {
        *r.numer() as f64 / *r.denom() as f64
    }

    fn tolerance(base: f64) -> Self {
        base.max(64.0 * f64::EPSILON)
    }

    fn powu(&self, exp: usize) -> Self {
        self.powi(exp as i32)
    }
}

impl Scalar for f32 {
    const EXACT: bool = false;

    fn from_ratio(r: &Rational) -> Self {
        (*r.numer() as f64 / *r.denom() as f64) as f32
    }

    fn tolerance(base: f64) -> Self {
        (base as f32).max(64.0 * f32::EPSILON)
    }

    fn powu(&self, exp: usize) -> Self {
        self.powi(exp as i32)
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_ratio(r: &Rational) -> Self {
        BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
    }

    fn tolerance(_base: f64) -> Self {
        BigRational::zero()
    }
}

/// Floating point scalars.
pub trait Real: Scalar + Float {}

impl<T: Scalar + Float> Real for T {}

/// Convert an `f64` constant into any scalar. Panics only for NaN/inf input.
pub fn lit<S: Scalar>(v: f64) -> S {
    S::from_f64(v).expect("finite literal")
}

/// `floor(r * n)` for a nonnegative rational, in exact integer arithmetic.
pub fn floor_times(r: &Rational, n: u64) -> u64 {
    let num = *r.numer() as i128 * n as i128;
    let den = *r.denom() as i128;
    num.div_euclid(den).max(0) as u64
}

/// Parse `"p/q"`, an integer, or a finite decimal (`"0.9"`, `"-1.25e-2"`)
/// into an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let t = text.trim();
    if t.is_empty() {
        return None;
    }
    if let Some((p, q)) = t.split_once('/') {
        let p: i64 = p.trim().parse().ok()?;
        let q: i64 = q.trim().parse().ok()?;
        if q == 0 {
            return None;
        }
        return Some(Rational::new(p, q));
    }
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().ok()?),
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut numer: i128 = all.parse().ok().or(if all.is_empty() { Some(0) } else { None })?;
    let mut scale = frac_part.len() as i32 - exponent;
    let mut denom: i128 = 1;
    while scale > 0 {
        denom = denom.checked_mul(10)?;
        scale -= 1;
    }
    while scale < 0 {
        numer = numer.checked_mul(10)?;
        scale += 1;
    }
    if neg {
        numer = -numer;
    }
    let g = num_integer::gcd(numer, denom);
    let (n, d) = (numer / g, denom / g);
    Some(Rational::new(i64::try_from(n).ok()?, i64::try_from(d).ok()?))
}

/// Exact rational for an `f64`, via its shortest round-trip decimal form.
pub fn rational_from_f64(v: f64) -> Option<Rational> {
    if !v.is_finite() {
        return None;
    }
    parse_rational(&format!("{v}"))
}
