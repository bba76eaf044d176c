//! Third-order social norms.
//!
//! A norm assigns a new reputation to a dictator from the triple
//! (dictator reputation, realized action, recipient reputation). The eight
//! entries are written as a 2x4 matrix
//!
//! ```text
//! [f(G,F,G), f(G,U,G), f(B,F,G), f(B,U,G); f(G,F,B), f(G,U,B), f(B,F,B), f(B,U,B)]
//! ```
//!
//! and labelled by reading the matrix row-major as the binary digits of an
//! integer, most significant first. The label is the canonical identifier in
//! every report and file format.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ParseError;
use crate::game::{Action, Reputation};

/// Position of the entry for `(x, a, y)` in the printed matrix, 0..8.
fn slot(x: Reputation, a: Action, y: Reputation) -> usize {
    4 * y.index() + 2 * x.index() + a.index()
}

/// Bit of the label holding the entry at printed position `slot`.
fn bit_of_slot(slot: usize) -> u8 {
    7 - slot as u8
}

/// A third-order assessment rule, stored as its 8-bit label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SocialNorm(u8);

impl SocialNorm {
    pub const COUNT: usize = 256;

    pub const fn from_label(label: u8) -> Self {
        SocialNorm(label)
    }

    /// Decodes an integer label, rejecting values outside 0..=255.
    pub fn decode(label: i64) -> Result<Self, ParseError> {
        u8::try_from(label)
            .map(SocialNorm)
            .map_err(|_| ParseError::LabelOutOfRange(label))
    }

    pub const fn label(self) -> u8 {
        self.0
    }

    /// Builds a norm from the eight matrix entries in printed order.
    pub fn from_entries(entries: [bool; 8]) -> Self {
        let label = entries
            .iter()
            .enumerate()
            .fold(0u8, |acc, (k, &e)| acc | (u8::from(e) << bit_of_slot(k)));
        SocialNorm(label)
    }

    /// The eight matrix entries in printed order.
    pub fn entries(self) -> [bool; 8] {
        std::array::from_fn(|k| self.0 >> bit_of_slot(k) & 1 == 1)
    }

    /// The raw entry f(x, a, y).
    pub fn entry(self, x: Reputation, a: Action, y: Reputation) -> bool {
        self.0 >> bit_of_slot(slot(x, a, y)) & 1 == 1
    }

    /// Reputation the observer assigns to a dictator with reputation `x`
    /// who realized action `a` toward a recipient with reputation `y`.
    pub fn assess(self, x: Reputation, a: Action, y: Reputation) -> Reputation {
        if self.entry(x, a, y) {
            Reputation::Good
        } else {
            Reputation::Bad
        }
    }

    /// All 256 norms in label order.
    pub fn all() -> impl Iterator<Item = SocialNorm> + Clone {
        (0..=255u8).map(SocialNorm)
    }
}

impl fmt::Display for SocialNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_matrix(f, self.entries().map(Some))
    }
}

/// Accepts the bracketed matrix form `[1,0,1,0;0,1,0,1]`, the compact form
/// `1010;0101` / `10100101`, or a decimal label.
impl FromStr for SocialNorm {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.chars().all(|c| c.is_ascii_digit()) && !looks_like_compact(t) {
            let label: i64 = t.parse().map_err(|_| ParseError::Syntax(s.to_owned()))?;
            return SocialNorm::decode(label);
        }
        let pattern: NormPattern = t.parse()?;
        pattern
            .as_norm()
            .ok_or_else(|| ParseError::WildcardInNorm(s.to_owned()))
    }
}

/// An 8-digit string of 0/1 is read as matrix entries, not as a decimal label.
fn looks_like_compact(t: &str) -> bool {
    t.len() == 8 && t.chars().all(|c| c == '0' || c == '1')
}

fn write_matrix(f: &mut fmt::Formatter<'_>, entries: [Option<bool>; 8]) -> fmt::Result {
    f.write_str("[")?;
    for (k, e) in entries.iter().enumerate() {
        if k == 4 {
            f.write_str(";")?;
        } else if k > 0 {
            f.write_str(",")?;
        }
        f.write_str(match e {
            Some(true) => "1",
            Some(false) => "0",
            None => "*",
        })?;
    }
    f.write_str("]")
}

/// A norm template with wildcard entries, e.g. `[1,0,*,*;*,1,*,1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NormPattern {
    /// Label bits that are fixed by the pattern.
    mask: u8,
    /// Required values of the fixed bits; zero outside `mask`.
    value: u8,
}

impl NormPattern {
    pub const ANY: NormPattern = NormPattern { mask: 0, value: 0 };

    /// Builds a pattern from eight entries in printed order; `None` is a wildcard.
    pub fn from_entries(entries: [Option<bool>; 8]) -> Self {
        let (mut mask, mut value) = (0u8, 0u8);
        for (k, e) in entries.iter().enumerate() {
            if let Some(bit) = e {
                mask |= 1 << bit_of_slot(k);
                value |= u8::from(*bit) << bit_of_slot(k);
            }
        }
        NormPattern { mask, value }
    }

    pub fn entries(self) -> [Option<bool>; 8] {
        std::array::from_fn(|k| {
            let b = bit_of_slot(k);
            (self.mask >> b & 1 == 1).then_some(self.value >> b & 1 == 1)
        })
    }

    pub fn wildcards(self) -> u32 {
        self.mask.count_zeros()
    }

    pub fn matches(self, norm: SocialNorm) -> bool {
        norm.label() & self.mask == self.value
    }

    /// Every norm agreeing with the fixed entries, in label order.
    pub fn norms(self) -> Vec<SocialNorm> {
        SocialNorm::all().filter(|&n| self.matches(n)).collect()
    }

    /// The single norm this pattern denotes when it has no wildcards.
    pub fn as_norm(self) -> Option<SocialNorm> {
        (self.mask == u8::MAX).then_some(SocialNorm(self.value))
    }
}

impl fmt::Display for NormPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_matrix(f, self.entries())
    }
}

impl FromStr for NormPattern {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let inner = match t.strip_prefix('[') {
            Some(rest) => rest
                .strip_suffix(']')
                .ok_or_else(|| ParseError::Syntax(s.to_owned()))?,
            None => t,
        };
        let mut entries = Vec::with_capacity(8);
        let mut separator_at = None;
        for c in inner.chars() {
            match c {
                '0' => entries.push(Some(false)),
                '1' => entries.push(Some(true)),
                '*' => entries.push(None),
                ';' if separator_at.is_none() => separator_at = Some(entries.len()),
                ',' | ' ' => {}
                _ => return Err(ParseError::Syntax(s.to_owned())),
            }
        }
        if entries.len() != 8 || separator_at.is_some_and(|k| k != 4) {
            return Err(ParseError::Syntax(s.to_owned()));
        }
        let mut arr = [None; 8];
        arr.copy_from_slice(&entries);
        Ok(NormPattern::from_entries(arr))
    }
}
