//! Artin braid words.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BraidError {
    #[error("generator index {index} out of range for {strands} strands")]
    IndexOutOfRange { index: usize, strands: usize },
    #[error("a braid needs at least one strand")]
    NoStrands,
    #[error("cannot parse braid token `{0}`")]
    Parse(String),
}

/// `σ_index^sign`, with `index` counted from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Generator {
    pub index: usize,
    pub positive: bool,
}

impl Generator {
    pub fn new(index: usize, positive: bool) -> Self {
        Self { index, positive }
    }

    pub fn sign(self) -> i64 {
        if self.positive {
            1
        } else {
            -1
        }
    }

    pub fn inverse(self) -> Self {
        Self { index: self.index, positive: !self.positive }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "s{}", self.index)
        } else {
            write!(f, "s{}^-1", self.index)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BraidWord {
    strands: usize,
    generators: Vec<Generator>,
}

impl BraidWord {
    pub fn new(strands: usize, generators: Vec<Generator>) -> Result<Self, BraidError> {
        if strands == 0 {
            return Err(BraidError::NoStrands);
        }
        for g in &generators {
            if g.index == 0 || g.index >= strands {
                return Err(BraidError::IndexOutOfRange { index: g.index, strands });
            }
        }
        Ok(Self { strands, generators })
    }

    pub fn empty(strands: usize) -> Self {
        Self { strands: strands.max(1), generators: Vec::new() }
    }

    /// Positive word from 1-based indices; negative entries denote inverses.
    pub fn from_indices(strands: usize, indices: &[i64]) -> Result<Self, BraidError> {
        let gens = indices.iter().map(|&i| Generator::new(i.unsigned_abs() as usize, i > 0)).collect();
        Self::new(strands, gens)
    }

    /// Parses words such as `s1 s3 s2^-1`, `σ1σ2⁻¹` or `s1^2`. The words
    /// `empty`, `e` and the empty string denote the identity braid.
    pub fn parse(text: &str, strands: usize) -> Result<Self, BraidError> {
        let mut gens = Vec::new();
        let cleaned = text.trim();
        if cleaned.is_empty() || cleaned.eq_ignore_ascii_case("empty") || cleaned == "e" {
            return Self::new(strands, gens);
        }
        let chars: Vec<char> = cleaned.chars().collect();
        let mut pos = 0;
        let err = |from: usize| BraidError::Parse(chars[from..].iter().collect::<String>());
        while pos < chars.len() {
            let c = chars[pos];
            if c.is_whitespace() || c == '*' || c == '.' {
                pos += 1;
                continue;
            }
            if !matches!(c, 's' | 'S' | 'σ') {
                return Err(err(pos));
            }
            let start = pos;
            pos += 1;
            let mut digits = String::new();
            while pos < chars.len() {
                let d = chars[pos];
                if d.is_ascii_digit() {
                    digits.push(d);
                } else if let Some(v) = subscript_digit(d) {
                    digits.push(v);
                } else if d == '_' {
                    // allow s_1
                } else {
                    break;
                }
                pos += 1;
            }
            let index: usize = digits.parse().map_err(|_| err(start))?;
            let mut power: i64 = 1;
            if pos < chars.len() && chars[pos] == '^' {
                pos += 1;
                let mut num = String::new();
                let braced = pos < chars.len() && chars[pos] == '{';
                if braced {
                    pos += 1;
                }
                while pos < chars.len() && (chars[pos].is_ascii_digit() || chars[pos] == '-' || chars[pos] == '+') {
                    num.push(chars[pos]);
                    pos += 1;
                }
                if braced {
                    if pos < chars.len() && chars[pos] == '}' {
                        pos += 1;
                    } else {
                        return Err(err(start));
                    }
                }
                power = num.parse().map_err(|_| err(start))?;
            } else if pos < chars.len() && (chars[pos] == '⁻' || superscript_digit(chars[pos]).is_some()) {
                let mut num = String::new();
                while pos < chars.len() {
                    match chars[pos] {
                        '⁻' => num.push('-'),
                        d => match superscript_digit(d) {
                            Some(v) => num.push(v),
                            None => break,
                        },
                    }
                    pos += 1;
                }
                if num == "-" {
                    num.push('1');
                }
                power = num.parse().map_err(|_| err(start))?;
            }
            for _ in 0..power.unsigned_abs() {
                gens.push(Generator::new(index, power > 0));
            }
        }
        Self::new(strands, gens)
    }

    pub fn strands(&self) -> usize {
        self.strands
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn push(&mut self, g: Generator) -> Result<(), BraidError> {
        if g.index == 0 || g.index >= self.strands {
            return Err(BraidError::IndexOutOfRange { index: g.index, strands: self.strands });
        }
        self.generators.push(g);
        Ok(())
    }

    /// Sum of crossing signs.
    pub fn writhe(&self) -> i64 {
        self.generators.iter().map(|g| g.sign()).sum()
    }

    /// Cancels adjacent `σ_i σ_i⁻¹` pairs until none remain.
    pub fn free_reduce(&self) -> Self {
        let mut out: Vec<Generator> = Vec::with_capacity(self.generators.len());
        for &g in &self.generators {
            if out.last().is_some_and(|&h| h == g.inverse()) {
                out.pop();
            } else {
                out.push(g);
            }
        }
        Self { strands: self.strands, generators: out }
    }

    pub fn inverse(&self) -> Self {
        Self { strands: self.strands, generators: self.generators.iter().rev().map(|g| g.inverse()).collect() }
    }

    /// All crossing signs flipped.
    pub fn mirror(&self) -> Self {
        Self { strands: self.strands, generators: self.generators.iter().map(|g| g.inverse()).collect() }
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut generators = self.generators.clone();
        generators.extend_from_slice(&other.generators);
        Self { strands: self.strands.max(other.strands), generators }
    }

    /// `c · self · c⁻¹`.
    pub fn conjugate_by(&self, c: &Self) -> Self {
        c.concat(self).concat(&c.inverse())
    }

    /// Cyclic rotation of the word, which closes to the same link.
    pub fn rotate(&self, by: usize) -> Self {
        let mut generators = self.generators.clone();
        if !generators.is_empty() {
            let by = by % generators.len();
            generators.rotate_left(by);
        }
        Self { strands: self.strands, generators }
    }

    /// `perm[p]` is the starting position of the strand that ends at position `p`.
    pub fn permutation(&self) -> Vec<usize> {
        let mut at: Vec<usize> = (0..self.strands).collect();
        for g in &self.generators {
            at.swap(g.index - 1, g.index);
        }
        at
    }

    /// Number of components of the braid closure.
    pub fn closure_components(&self) -> usize {
        let perm = self.permutation();
        let mut seen = vec![false; perm.len()];
        let mut cycles = 0;
        for start in 0..perm.len() {
            if !seen[start] {
                cycles += 1;
                let mut p = start;
                while !seen[p] {
                    seen[p] = true;
                    p = perm[p];
                }
            }
        }
        cycles
    }
}

fn subscript_digit(c: char) -> Option<char> {
    let v = (c as u32).checked_sub('₀' as u32)?;
    (v < 10).then(|| char::from_digit(v, 10)).flatten()
}

fn superscript_digit(c: char) -> Option<char> {
    match c {
        '⁰' => Some('0'),
        '¹' => Some('1'),
        '²' => Some('2'),
        '³' => Some('3'),
        '⁴'..='⁹' => char::from_digit(c as u32 - '⁴' as u32 + 4, 10),
        _ => None,
    }
}

impl fmt::Display for BraidWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.generators.iter().map(|g| g.to_string()).collect();
        f.write_str(&parts.join(" "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_and_display() {
        let w = BraidWord::parse("s1 s3 s2^-1", 4).unwrap();
        assert_eq!(w.len(), 3);
        assert!(!w.generators()[2].positive);
        assert_eq!(w.to_string(), "s1 s3 s2^-1");
        assert_eq!(BraidWord::parse("σ₁σ₃σ₂⁻¹", 4).unwrap(), w);
        assert_eq!(BraidWord::parse("s1^2", 2).unwrap().to_string(), "s1 s1");
        assert_eq!(BraidWord::parse("s_2^{2}", 4).unwrap().to_string(), "s2 s2");
        assert!(BraidWord::parse("empty", 4).unwrap().is_empty());
        assert!(BraidWord::parse("s4", 4).is_err());
        assert!(BraidWord::parse("x1", 4).is_err());
    }

    #[test]
    fn writhe_examples() {
        assert_eq!(BraidWord::parse("s1 s3 s2 s1 s3 s2", 4).unwrap().writhe(), 6);
        assert_eq!(BraidWord::parse("s1 s1^-1", 2).unwrap().writhe(), 0);
        assert_eq!(BraidWord::parse("s1 s3 s1 s3 s2", 4).unwrap().writhe(), 5);
    }

    #[test]
    fn free_reduction() {
        let w = BraidWord::parse("s1 s1^-1 s1", 2).unwrap();
        assert_eq!(w.free_reduce().to_string(), "s1");
        let w = BraidWord::parse("s2 s1 s1^-1 s2^-1 s3", 4).unwrap();
        assert_eq!(w.free_reduce().to_string(), "s3");
    }

    #[test]
    fn closure_components_of_table_words() {
        let cases = [
            ("s1 s1", 2, 2),
            ("s1", 2, 1),
            ("", 2, 2),
            ("s1 s3 s2 s1 s3 s2", 4, 2),
            ("s1 s3 s1 s3 s2", 4, 3),
            ("s2 s1 s3 s2", 4, 2),
            ("s2 s1 s3", 4, 1),
            ("s1 s3", 4, 2),
            ("s2 s2", 4, 4),
            ("s2", 4, 3),
            ("", 4, 4),
        ];
        for (text, n, comps) in cases {
            assert_eq!(BraidWord::parse(text, n).unwrap().closure_components(), comps, "{text}");
        }
    }

    fn arb_word() -> impl Strategy<Value = BraidWord> {
        proptest::collection::vec((1usize..4, any::<bool>()), 0..12)
            .prop_map(|gs| BraidWord::new(4, gs.into_iter().map(|(i, p)| Generator::new(i, p)).collect()).unwrap())
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(w in arb_word()) {
            prop_assert_eq!(BraidWord::parse(&w.to_string(), 4).unwrap(), w);
        }

        #[test]
        fn word_times_inverse_reduces_to_identity(w in arb_word()) {
            prop_assert!(w.concat(&w.inverse()).free_reduce().is_empty());
        }

        #[test]
        fn free_reduce_is_idempotent_and_keeps_permutation(w in arb_word()) {
            let r = w.free_reduce();
            prop_assert_eq!(r.free_reduce(), r.clone());
            prop_assert_eq!(r.permutation(), w.permutation());
            prop_assert_eq!(r.writhe(), w.writhe());
        }
    }
}
