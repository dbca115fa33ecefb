//! Words over a marked generating set.
//!
//! A letter is a signed, nonzero generator index: `+i` is the `i`-th generator
//! (1-based), `-i` its inverse. The empty word is the identity. Freely reduced
//! means no adjacent `(i, -i)` pair. Lexicographic comparisons use the letter
//! order a < a⁻¹ < b < b⁻¹ < …, so enumerations are deterministic.

use std::cmp::Ordering;
use std::fmt;

/// A word in the generators; not necessarily reduced unless stated.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Word {
    letters: Vec<i32>,
}

impl Word {
    /// Build from raw letters. Letters must be nonzero.
    pub fn new(letters: Vec<i32>) -> Self {
        debug_assert!(letters.iter().all(|&l| l != 0), "letter 0 is not valid");
        Word { letters }
    }

    /// The empty word (group identity).
    pub fn identity() -> Self {
        Word::default()
    }

    pub fn letters(&self) -> &[i32] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Free reduction: cancel adjacent inverse pairs until none remain.
    pub fn reduce(&self) -> Word {
        let mut buffer: Vec<i32> = Vec::with_capacity(self.letters.len());
        for &x in &self.letters {
            if buffer.last().is_some_and(|&y| x == -y) {
                buffer.pop();
            } else {
                buffer.push(x);
            }
        }
        Word { letters: buffer }
    }

    pub fn is_reduced(&self) -> bool {
        self.letters.windows(2).all(|w| w[0] != -w[1])
    }

    /// Formal inverse (reverse and negate each letter).
    pub fn inverse(&self) -> Word {
        Word {
            letters: self.letters.iter().rev().map(|&l| -l).collect(),
        }
    }

    /// Concatenation followed by free reduction.
    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Word { letters }.reduce()
    }

    /// `self^n` for any integer n, freely reduced.
    pub fn pow(&self, n: i64) -> Word {
        let base = if n < 0 { self.inverse() } else { self.clone() };
        let mut out = Word::identity();
        for _ in 0..n.unsigned_abs() {
            out = out.concat(&base);
        }
        out
    }

    /// Total order on letters: a < a⁻¹ < b < b⁻¹ < … (by |index|, then sign).
    pub fn letter_rank(letter: i32) -> u32 {
        debug_assert!(letter != 0);
        2 * (letter.unsigned_abs() - 1) + u32::from(letter < 0)
    }

    /// Render with the compact convention: generator i is the i-th lowercase
    /// letter, its inverse the uppercase one (rank ≤ 26); larger ranks fall
    /// back to space-separated signed indices.
    pub fn to_compact(&self) -> String {
        let max = self.letters.iter().map(|l| l.unsigned_abs()).max().unwrap_or(1);
        if max <= 26 {
            self.letters
                .iter()
                .map(|&l| {
                    let base = if l > 0 { b'a' } else { b'A' };
                    char::from(base + (l.unsigned_abs() as u8 - 1))
                })
                .collect()
        } else {
            self.letters
                .iter()
                .map(|l| l.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        }
    }

    /// Parse the compact convention; empty string is the identity.
    /// Whitespace-separated signed integers are also accepted.
    pub fn parse_compact(s: &str) -> Result<Word, String> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Word::identity());
        }
        if s.chars().all(|c| c.is_ascii_alphabetic()) {
            let letters = s
                .chars()
                .map(|c| {
                    if c.is_ascii_lowercase() {
                        (c as i32) - ('a' as i32) + 1
                    } else {
                        -((c as i32) - ('A' as i32) + 1)
                    }
                })
                .collect();
            return Ok(Word::new(letters));
        }
        let mut letters = Vec::new();
        for tok in s.split_whitespace() {
            let v: i32 = tok
                .parse()
                .map_err(|_| format!("invalid word token {tok:?}"))?;
            if v == 0 {
                return Err("letter 0 is not valid".into());
            }
            letters.push(v);
        }
        Ok(Word::new(letters))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            write!(f, "ε")
        } else {
            write!(f, "{}", self.to_compact())
        }
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Word {
    /// Shortlex: first by length, then letter-by-letter in rank order.
    fn cmp(&self, other: &Self) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| {
            for (&a, &b) in self.letters.iter().zip(&other.letters) {
                match Word::letter_rank(a).cmp(&Word::letter_rank(b)) {
                    Ordering::Equal => continue,
                    ord => return ord,
                }
            }
            Ordering::Equal
        })
    }
}
