//! Fixed-width 96-bit words and the two rotation definitions.
//!
//! Every quantity exchanged or stored by the protocol (pseudonyms, keys,
//! nonces, messages) is a [`Word96`]. Arithmetic wraps modulo 2^96.

use std::fmt;
use std::ops::{Add, BitAnd, BitOr, BitXor, Not, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Word width in bits.
pub const WIDTH: u32 = 96;

const MASK: u128 = (1u128 << WIDTH) - 1;

/// Number of hex digits in the canonical rendering.
pub const HEX_DIGITS: usize = 24;

/// An unsigned 96-bit word. The stored value is always below 2^96.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Word96(u128);

/// How the second operand of `Rot(a, b)` selects the rotation amount.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationVariant {
    /// Rotate by `b mod 96`.
    Modular,
    /// Rotate by the Hamming weight of `b`.
    Hamming,
}

impl RotationVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            RotationVariant::Modular => "modular",
            RotationVariant::Hamming => "hamming",
        }
    }

    /// Rotation amount in `[0, 96)` selected by `b`.
    pub fn amount(self, b: Word96) -> u32 {
        match self {
            RotationVariant::Modular => (b.0 % u128::from(WIDTH)) as u32,
            RotationVariant::Hamming => b.hamming_weight() % WIDTH,
        }
    }
}

impl fmt::Display for RotationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown rotation variant {0:?} (expected modular or hamming)")]
pub struct ParseVariantError(pub String);

impl FromStr for RotationVariant {
    type Err = ParseVariantError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "modular" => Ok(RotationVariant::Modular),
            "hamming" => Ok(RotationVariant::Hamming),
            other => Err(ParseVariantError(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseWordError {
    #[error("expected {HEX_DIGITS} hex digits, got {0}")]
    Length(usize),
    #[error("invalid hex digit {0:?}")]
    Digit(char),
    #[error("hex digits must be lowercase, got {0:?}")]
    Uppercase(char),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("modulus must be at least 2, got {0}")]
pub struct ModulusError(pub u64);

impl Word96 {
    pub const ZERO: Word96 = Word96(0);
    pub const ONE: Word96 = Word96(1);
    pub const MAX: Word96 = Word96(MASK);

    /// Builds a word from the low 96 bits of `value`.
    pub const fn new(value: u128) -> Self {
        Word96(value & MASK)
    }

    /// Builds a word from an integer that must already fit in 96 bits.
    pub fn try_from_u128(value: u128) -> Option<Self> {
        (value <= MASK).then_some(Word96(value))
    }

    pub const fn from_u64(value: u64) -> Self {
        Word96(value as u128)
    }

    pub const fn value(self) -> u128 {
        self.0
    }

    pub const fn xor(self, rhs: Word96) -> Word96 {
        Word96(self.0 ^ rhs.0)
    }

    pub const fn bitor(self, rhs: Word96) -> Word96 {
        Word96(self.0 | rhs.0)
    }

    /// `(self + rhs) mod 2^96`.
    pub const fn add_mod(self, rhs: Word96) -> Word96 {
        // Both operands are below 2^96, so the u128 sum cannot overflow.
        Word96((self.0 + rhs.0) & MASK)
    }

    /// `(self - rhs) mod 2^96`.
    pub const fn sub_mod(self, rhs: Word96) -> Word96 {
        Word96(self.0.wrapping_sub(rhs.0) & MASK)
    }

    pub const fn hamming_weight(self) -> u32 {
        self.0.count_ones()
    }

    /// Circular left rotation over 96 bits. `r` is reduced mod 96 first.
    pub const fn rotate_left(self, r: u32) -> Word96 {
        let r = r % WIDTH;
        if r == 0 {
            return self;
        }
        Word96(((self.0 << r) | (self.0 >> (WIDTH - r))) & MASK)
    }

    /// `Rot(self, b)` under the given variant.
    pub fn rot(self, b: Word96, variant: RotationVariant) -> Word96 {
        self.rotate_left(variant.amount(b))
    }

    /// `self mod n` for a small modulus `n >= 2`.
    pub fn mod_small(self, n: u64) -> Result<u64, ModulusError> {
        if n < 2 {
            return Err(ModulusError(n));
        }
        Ok((self.0 % u128::from(n)) as u64)
    }

    /// The value read as a signed integer, for exact (non-wrapping) differences.
    pub const fn as_i128(self) -> i128 {
        self.0 as i128
    }

    /// Canonical rendering: 24 lowercase hex digits, zero-padded.
    pub fn to_hex(self) -> String {
        format!("{:024x}", self.0)
    }

    /// Parses exactly 24 lowercase hex digits.
    pub fn from_hex(s: &str) -> Result<Word96, ParseWordError> {
        if s.len() != HEX_DIGITS {
            return Err(ParseWordError::Length(s.chars().count()));
        }
        let mut value = 0u128;
        for ch in s.chars() {
            let digit = match ch {
                '0'..='9' | 'a'..='f' => ch.to_digit(16).unwrap_or_default(),
                'A'..='F' => return Err(ParseWordError::Uppercase(ch)),
                _ => return Err(ParseWordError::Digit(ch)),
            };
            value = (value << 4) | u128::from(digit);
        }
        Ok(Word96(value))
    }
}

impl fmt::Debug for Word96 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word96({:#x})", self.0)
    }
}

impl fmt::Display for Word96 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:024x}", self.0)
    }
}

impl fmt::LowerHex for Word96 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::LowerHex::fmt(&self.0, f)
    }
}

impl FromStr for Word96 {
    type Err = ParseWordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Word96::from_hex(s)
    }
}

impl From<u64> for Word96 {
    fn from(value: u64) -> Self {
        Word96::from_u64(value)
    }
}

impl BitXor for Word96 {
    type Output = Word96;
    fn bitxor(self, rhs: Word96) -> Word96 {
        Word96::xor(self, rhs)
    }
}

impl BitOr for Word96 {
    type Output = Word96;
    fn bitor(self, rhs: Word96) -> Word96 {
        Word96::bitor(self, rhs)
    }
}

impl BitAnd for Word96 {
    type Output = Word96;
    fn bitand(self, rhs: Word96) -> Word96 {
        Word96(self.0 & rhs.0)
    }
}

impl Not for Word96 {
    type Output = Word96;
    fn not(self) -> Word96 {
        Word96(!self.0 & MASK)
    }
}

/// Addition modulo 2^96.
impl Add for Word96 {
    type Output = Word96;
    fn add(self, rhs: Word96) -> Word96 {
        self.add_mod(rhs)
    }
}

/// Subtraction modulo 2^96.
impl Sub for Word96 {
    type Output = Word96;
    fn sub(self, rhs: Word96) -> Word96 {
        self.sub_mod(rhs)
    }
}

impl Serialize for Word96 {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Word96 {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Word96::from_hex(&s).map_err(serde::de::Error::custom)
    }
}
