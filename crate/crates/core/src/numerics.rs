//! Exact and cancellation-safe arithmetic primitives.
//!
//! Alternating binomial sums are evaluated in arbitrary-precision integers and
//! only converted to floating point, as a [`LogMagnitude`], when they are
//! combined with factorial and square-root factors. Factorial ratios are always
//! formed as differences of [`log_factorial`] values.

use std::fmt;
use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, ToPrimitive, Zero};

/// Size of the lazily built `ln(n!)` table. Larger arguments use a Stirling series.
const LOG_FACTORIAL_TABLE: usize = 2048;

/// An exact signed integer of unbounded size.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ExactInteger(BigInt);

impl ExactInteger {
    pub fn zero() -> Self {
        Self(BigInt::zero())
    }

    pub fn as_bigint(&self) -> &BigInt {
        &self.0
    }

    pub fn into_bigint(self) -> BigInt {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// -1, 0 or +1.
    pub fn signum(&self) -> i8 {
        match self.0.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    /// Nearest `f64`; saturates to infinity beyond the float range.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn to_log_magnitude(&self) -> LogMagnitude {
        LogMagnitude::from_bigint(&self.0)
    }
}

impl From<BigInt> for ExactInteger {
    fn from(value: BigInt) -> Self {
        Self(value)
    }
}

impl From<i64> for ExactInteger {
    fn from(value: i64) -> Self {
        Self(BigInt::from(value))
    }
}

impl fmt::Display for ExactInteger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A real number stored as `sign * exp(log_value)`.
///
/// `sign == 0` encodes exact zero, in which case `log_value` is meaningless
/// and kept at negative infinity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogMagnitude {
    pub log_value: f64,
    pub sign: i8,
}

impl LogMagnitude {
    pub const ZERO: LogMagnitude = LogMagnitude {
        log_value: f64::NEG_INFINITY,
        sign: 0,
    };

    pub const ONE: LogMagnitude = LogMagnitude {
        log_value: 0.0,
        sign: 1,
    };

    pub fn new(log_value: f64, sign: i8) -> Self {
        if sign == 0 {
            Self::ZERO
        } else {
            Self {
                log_value,
                sign: sign.signum(),
            }
        }
    }

    pub fn from_f64(value: f64) -> Self {
        if value == 0.0 {
            Self::ZERO
        } else {
            Self {
                log_value: value.abs().ln(),
                sign: if value < 0.0 { -1 } else { 1 },
            }
        }
    }

    pub fn from_bigint(value: &BigInt) -> Self {
        match value.sign() {
            Sign::NoSign => Self::ZERO,
            sign => Self {
                log_value: ln_biguint(value.magnitude()),
                sign: if sign == Sign::Minus { -1 } else { 1 },
            },
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn to_f64(&self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.log_value.exp(),
        }
    }

    /// Multiplies by the positive factor `exp(log_factor)`.
    pub fn scale_log(self, log_factor: f64) -> Self {
        if self.is_zero() {
            self
        } else {
            Self {
                log_value: self.log_value + log_factor,
                sign: self.sign,
            }
        }
    }

    pub fn sqrt(self) -> Self {
        assert!(self.sign >= 0, "square root of a negative LogMagnitude");
        if self.is_zero() {
            self
        } else {
            Self {
                log_value: 0.5 * self.log_value,
                sign: 1,
            }
        }
    }
}

impl std::ops::Mul for LogMagnitude {
    type Output = LogMagnitude;

    fn mul(self, rhs: LogMagnitude) -> LogMagnitude {
        if self.is_zero() || rhs.is_zero() {
            LogMagnitude::ZERO
        } else {
            LogMagnitude {
                log_value: self.log_value + rhs.log_value,
                sign: self.sign * rhs.sign,
            }
        }
    }
}

fn ln_biguint(value: &BigUint) -> f64 {
    let bits = value.bits();
    if bits <= 64 {
        return (value.to_u64().expect("fits in 64 bits") as f64).ln();
    }
    let shift = bits - 64;
    let top = (value >> shift).to_u64().expect("top 64 bits");
    (top as f64).ln() + shift as f64 * std::f64::consts::LN_2
}

/// `ln(n!)`, exact zero for `n` in {0, 1}.
pub fn log_factorial(n: u64) -> f64 {
    let table = log_factorial_table();
    match table.get(n as usize) {
        Some(&value) => value,
        None => stirling_log_factorial(n as f64),
    }
}

fn log_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(LOG_FACTORIAL_TABLE);
        let mut factorial = BigUint::one();
        table.push(0.0);
        for k in 1..LOG_FACTORIAL_TABLE as u64 {
            factorial *= k;
            table.push(if k == 1 { 0.0 } else { ln_biguint(&factorial) });
        }
        table
    })
}

fn stirling_log_factorial(n: f64) -> f64 {
    let n1 = n + 1.0;
    let inv = 1.0 / n1;
    let inv2 = inv * inv;
    // ln Γ(n+1) asymptotic series; truncation error below 1e-20 for n > 2000.
    let series = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    (n1 - 0.5) * n1.ln() - n1 + 0.5 * (2.0 * std::f64::consts::PI).ln() + series
}

/// Exact binomial coefficient `C(n, k)`; zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `ln C(n, k)` from log-factorials. Caller guarantees `k <= n`.
pub fn log_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    log_factorial(n) - log_factorial(k) - log_factorial(n - k)
}

/// `Σ_{p+q=target} C(v,p) C(w,q) (-1)^q`, evaluated exactly.
///
/// This is the coefficient of `x^target` in `(1+x)^v (1-x)^w`. Targets outside
/// `0..=v+w` give zero.
pub fn signed_binomial_convolution(v: u64, w: u64, target: i64) -> ExactInteger {
    if target < 0 || target as u64 > v + w {
        return ExactInteger::zero();
    }
    let target = target as u64;
    let p_lo = target.saturating_sub(w);
    let p_hi = v.min(target);

    let mut c_v = BigInt::from(binomial(v, p_lo));
    let mut c_w = BigInt::from(binomial(w, target - p_lo));
    let mut sum = BigInt::zero();
    for p in p_lo..=p_hi {
        let q = target - p;
        let term = &c_v * &c_w;
        if q % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        if p < p_hi {
            // C(v, p+1) = C(v, p)(v-p)/(p+1);  C(w, q-1) = C(w, q) q/(w-q+1)
            c_v = c_v * (v - p) / (p + 1);
            c_w = c_w * q / (w - q + 1);
        }
    }
    ExactInteger(sum)
}

/// The `(-1)^(v-p)` variant of [`signed_binomial_convolution`].
///
/// Since `p + q = target`, the two differ by the fixed sign `(-1)^(v - target)`.
pub fn reflected_binomial_convolution(v: u64, w: u64, target: i64) -> ExactInteger {
    let base = signed_binomial_convolution(v, w, target);
    if target >= 0 && (v as i64 - target).rem_euclid(2) == 1 {
        ExactInteger(-base.0)
    } else {
        base
    }
}
