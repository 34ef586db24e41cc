// SPDX-License-Identifier: Apache-2.0

//! Software bfloat16: 1 sign, 8 exponent, 7 mantissa bits.
//!
//! Every operation computes in `f64` and rounds the result once with
//! round-to-nearest-even. Products of two BF16 values are exact in `f64`.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Bf16(u16);

impl Bf16 {
    pub const ZERO: Bf16 = Bf16(0x0000);
    pub const NEG_ZERO: Bf16 = Bf16(0x8000);
    pub const ONE: Bf16 = Bf16(0x3F80);
    pub const INFINITY: Bf16 = Bf16(0x7F80);
    pub const NEG_INFINITY: Bf16 = Bf16(0xFF80);
    pub const NAN: Bf16 = Bf16(0x7FC0);
    pub const MAX: Bf16 = Bf16(0x7F7F);

    #[inline]
    pub const fn from_bits(bits: u16) -> Self {
        Bf16(bits)
    }

    #[inline]
    pub const fn to_bits(self) -> u16 {
        self.0
    }

    pub fn from_f64(x: f64) -> Self {
        if x.is_nan() {
            return Self::NAN;
        }
        let sign = if x.is_sign_negative() { 0x8000 } else { 0 };
        let a = x.abs();
        if a == 0.0 {
            return Bf16(sign);
        }
        if a.is_infinite() {
            return Bf16(sign | 0x7F80);
        }
        let biased = ((a.to_bits() >> 52) & 0x7FF) as i32;
        if biased == 0 {
            // f64 subnormals sit far below half the smallest BF16 subnormal.
            return Bf16(sign);
        }
        let exp = biased - 1023;
        if exp > 127 {
            return Bf16(sign | 0x7F80);
        }
        // Quantum of the target binade; subnormals share the 2^-126 binade's.
        let q = exp.max(-126) - 7;
        let scaled = a * 2f64.powi(-q);
        let value = scaled.round_ties_even() * 2f64.powi(q);
        // `value` is BF16-representable, so the f32 cast is exact; anything
        // that rounded up to 2^128 becomes infinity here.
        Bf16(sign | ((value as f32).to_bits() >> 16) as u16)
    }

    #[inline]
    pub fn from_f32(x: f32) -> Self {
        Self::from_f64(x as f64)
    }

    #[inline]
    pub fn to_f32(self) -> f32 {
        f32::from_bits((self.0 as u32) << 16)
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.to_f32() as f64
    }

    pub fn is_nan(self) -> bool {
        self.to_f32().is_nan()
    }

    /// `self * a + b` with a single rounding.
    #[inline]
    pub fn mul_add(self, a: Bf16, b: Bf16) -> Bf16 {
        Bf16::from_f64(self.to_f64() * a.to_f64() + b.to_f64())
    }
}

impl From<Bf16> for f64 {
    fn from(v: Bf16) -> f64 {
        v.to_f64()
    }
}

macro_rules! binop {
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr for Bf16 {
            type Output = Bf16;
            #[inline]
            fn $f(self, rhs: Bf16) -> Bf16 {
                Bf16::from_f64(self.to_f64() $op rhs.to_f64())
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);
binop!(Div, div, /);

impl Neg for Bf16 {
    type Output = Bf16;
    fn neg(self) -> Bf16 {
        Bf16(self.0 ^ 0x8000)
    }
}

impl PartialOrd for Bf16 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.to_f32().partial_cmp(&other.to_f32())
    }
}

impl fmt::Debug for Bf16 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bf16({:#06x} = {})", self.0, self.to_f32())
    }
}

impl fmt::Display for Bf16 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_f32(), f)
    }
}

// Serialized as its numeric value, which round-trips exactly.
impl Serialize for Bf16 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f32(self.to_f32())
    }
}

impl<'de> Deserialize<'de> for Bf16 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        f64::deserialize(d).map(Bf16::from_f64)
    }
}

/// Precision of the running-sum register behind a BF16 adder or MAC.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccumulatorWidth {
    /// FP32 register; the sum is rounded to BF16 once it is read out.
    #[default]
    Fp32,
    /// Every partial sum is rounded to BF16.
    Bf16,
}

/// Running sum with BF16 operands and a configurable register width.
#[derive(Clone, Copy, Debug)]
pub struct Accumulator {
    width: AccumulatorWidth,
    value: f32,
}

impl Accumulator {
    pub fn new(width: AccumulatorWidth) -> Self {
        Self { width, value: 0.0 }
    }

    fn store(&mut self, wide: f64) {
        self.value = match self.width {
            AccumulatorWidth::Fp32 => wide as f32,
            AccumulatorWidth::Bf16 => Bf16::from_f64(wide).to_f32(),
        };
    }

    pub fn add(&mut self, x: Bf16) {
        self.store(self.value as f64 + x.to_f64());
    }

    /// Adds the exact product `a * b`.
    pub fn mul_add(&mut self, a: Bf16, b: Bf16) {
        self.store(self.value as f64 + a.to_f64() * b.to_f64());
    }

    pub fn read(&self) -> Bf16 {
        Bf16::from_f32(self.value)
    }
}

/// Rounds a real value to BF16.
pub fn bf16_round(x: f64) -> Bf16 {
    Bf16::from_f64(x)
}
