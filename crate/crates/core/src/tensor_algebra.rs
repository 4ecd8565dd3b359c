//! Truncated tensor algebra over the alphabet `{0, 1, ..., d}` and exact
//! signatures of piecewise-linear, time-augmented paths.
//!
//! Letter `0` is the time coordinate. It is stored like any other coordinate,
//! so a path's coordinate `0` must coincide with its own time parameter.
//!
//! Coefficients are stored densely, one vector per level, with the word
//! `(i_1, ..., i_n)` at index `i_1 (d+1)^{n-1} + ... + i_n`.

use crate::scalar::{from_count, Scalar};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("letter {letter} is outside the alphabet of width {width}")]
    LetterOutOfRange { letter: usize, width: usize },
    #[error("alphabet widths differ: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },
    #[error("truncation depths differ: {left} vs {right}")]
    DepthMismatch { left: usize, right: usize },
    #[error("word of length {len} exceeds depth {depth}")]
    WordTooLong { len: usize, depth: usize },
    #[error("alphabet width must be at least 1")]
    EmptyAlphabet,
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("cannot parse word {0:?}")]
    ParseWord(String),
}

/// A finite sequence of letters; the empty word indexes the unit coefficient.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word {
    letters: Vec<usize>,
}

impl Word {
    pub fn new(letters: Vec<usize>) -> Self {
        Self { letters }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn letters(&self) -> &[usize] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn count(&self, letter: usize) -> usize {
        self.letters.iter().filter(|&&l| l == letter).count()
    }

    pub fn zero_count(&self) -> usize {
        self.count(0)
    }

    pub fn nonzero_count(&self) -> usize {
        self.len() - self.zero_count()
    }

    pub fn max_letter(&self) -> Option<usize> {
        self.letters.iter().copied().max()
    }

    /// Fails unless every letter lies in `{0, ..., d}`.
    pub fn check_alphabet(&self, d: usize) -> Result<(), TensorError> {
        match self.letters.iter().find(|&&l| l > d) {
            Some(&letter) => Err(TensorError::LetterOutOfRange {
                letter,
                width: d + 1,
            }),
            None => Ok(()),
        }
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Word { letters }
    }

    pub fn reversed(&self) -> Word {
        Word {
            letters: self.letters.iter().rev().copied().collect(),
        }
    }

    /// Relabels the nonzero letters in order of first appearance, so words
    /// that differ by a permutation of the spatial alphabet share one form.
    pub fn canonical_relabel(&self) -> Word {
        let mut map: Vec<(usize, usize)> = Vec::new();
        let letters = self
            .letters
            .iter()
            .map(|&l| {
                if l == 0 {
                    return 0;
                }
                if let Some(&(_, to)) = map.iter().find(|(from, _)| *from == l) {
                    to
                } else {
                    let to = map.len() + 1;
                    map.push((l, to));
                    to
                }
            })
            .collect();
        Word { letters }
    }

    /// Number of distinct nonzero letters.
    pub fn distinct_nonzero(&self) -> usize {
        let mut seen: Vec<usize> = self.letters.iter().copied().filter(|&l| l != 0).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// All words over `{0, ..., d}` of exactly the given length, in
    /// lexicographic order.
    pub fn all_of_length(d: usize, len: usize) -> Vec<Word> {
        let width = d + 1;
        let total = width.pow(len as u32);
        (0..total).map(|idx| decode(idx, width, len)).collect()
    }
}

fn decode(mut idx: usize, width: usize, len: usize) -> Word {
    let mut letters = vec![0; len];
    for slot in letters.iter_mut().rev() {
        *slot = idx % width;
        idx /= width;
    }
    Word { letters }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.letters.iter().map(|l| l.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for Word {
    type Err = TensorError;

    /// Accepts `"1,0,1"`, `"(1,0,1)"`, `"1 0 1"`, or `""`/`"()"` for the empty word.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim().trim_start_matches('(').trim_end_matches(')').trim();
        if trimmed.is_empty() {
            return Ok(Word::empty());
        }
        trimmed
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map(Word::new)
            .map_err(|_| TensorError::ParseWord(s.to_string()))
    }
}

impl From<Vec<usize>> for Word {
    fn from(letters: Vec<usize>) -> Self {
        Word::new(letters)
    }
}

impl From<&[usize]> for Word {
    fn from(letters: &[usize]) -> Self {
        Word::new(letters.to_vec())
    }
}

/// Graded coefficients up to a fixed depth over an alphabet of `width` letters.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedTensor<T> {
    width: usize,
    depth: usize,
    levels: Vec<Vec<T>>,
}

impl<T: Scalar> TruncatedTensor<T> {
    /// The zero tensor.
    pub fn zero(width: usize, depth: usize) -> Result<Self, TensorError> {
        if width == 0 {
            return Err(TensorError::EmptyAlphabet);
        }
        let levels = (0..=depth)
            .map(|n| vec![T::zero(); width.pow(n as u32)])
            .collect();
        Ok(Self {
            width,
            depth,
            levels,
        })
    }

    /// The unit: empty-word coefficient 1, everything else 0.
    pub fn identity(width: usize, depth: usize) -> Result<Self, TensorError> {
        let mut t = Self::zero(width, depth)?;
        t.levels[0][0] = T::one();
        Ok(t)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Coefficients of words of length `n`, lexicographically ordered.
    pub fn level(&self, n: usize) -> &[T] {
        &self.levels[n]
    }

    fn index(&self, w: &Word) -> Result<usize, TensorError> {
        if w.len() > self.depth {
            return Err(TensorError::WordTooLong {
                len: w.len(),
                depth: self.depth,
            });
        }
        let mut idx = 0;
        for &l in w.letters() {
            if l >= self.width {
                return Err(TensorError::LetterOutOfRange {
                    letter: l,
                    width: self.width,
                });
            }
            idx = idx * self.width + l;
        }
        Ok(idx)
    }

    /// Stored coefficient of `w`; zero for words longer than the depth or
    /// using letters outside the alphabet.
    pub fn coeff(&self, w: &Word) -> T {
        match self.index(w) {
            Ok(i) => self.levels[w.len()][i].clone(),
            Err(_) => T::zero(),
        }
    }

    pub fn set_coeff(&mut self, w: &Word, value: T) -> Result<(), TensorError> {
        let i = self.index(w)?;
        self.levels[w.len()][i] = value;
        Ok(())
    }

    /// Iterates over `(word, coefficient)` for every stored word.
    pub fn iter(&self) -> impl Iterator<Item = (Word, &T)> + '_ {
        self.levels.iter().enumerate().flat_map(move |(n, lvl)| {
            lvl.iter()
                .enumerate()
                .map(move |(i, c)| (decode(i, self.width, n), c))
        })
    }

    fn check_compatible(&self, other: &Self) -> Result<(), TensorError> {
        if self.width != other.width {
            return Err(TensorError::WidthMismatch {
                left: self.width,
                right: other.width,
            });
        }
        if self.depth != other.depth {
            return Err(TensorError::DepthMismatch {
                left: self.depth,
                right: other.depth,
            });
        }
        Ok(())
    }

    /// Truncated tensor product: the coefficient of `w` is the sum over
    /// splits `w = uv` of `self[u] * other[v]`.
    pub fn chen_concat(&self, other: &Self) -> Result<Self, TensorError> {
        self.check_compatible(other)?;
        let mut out = Self::zero(self.width, self.depth)?;
        for n in 0..=self.depth {
            let target = &mut out.levels[n];
            for i in 0..=n {
                let a = &self.levels[i];
                let b = &other.levels[n - i];
                let stride = b.len();
                for (ia, ca) in a.iter().enumerate() {
                    if ca.is_zero() {
                        continue;
                    }
                    let base = ia * stride;
                    for (ib, cb) in b.iter().enumerate() {
                        let slot = &mut target[base + ib];
                        *slot = slot.clone() + ca.clone() * cb.clone();
                    }
                }
            }
        }
        Ok(out)
    }

    /// Converts every coefficient with `f`.
    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> TruncatedTensor<U> {
        TruncatedTensor {
            width: self.width,
            depth: self.depth,
            levels: self
                .levels
                .iter()
                .map(|lvl| lvl.iter().map(&f).collect())
                .collect(),
        }
    }
}

/// The signature of a straight segment with the given increment: level `n`
/// holds `increment^{⊗n} / n!`.
pub fn segment_exponential<T: Scalar>(
    increment: &[T],
    depth: usize,
) -> Result<TruncatedTensor<T>, TensorError> {
    let width = increment.len();
    let mut out = TruncatedTensor::<T>::identity(width, depth)?;
    for n in 1..=depth {
        let denom: T = from_count(n);
        let prev = out.levels[n - 1].clone();
        let level = &mut out.levels[n];
        for (ip, p) in prev.iter().enumerate() {
            for (il, inc) in increment.iter().enumerate() {
                level[ip * width + il] = p.clone() * inc.clone() / denom.clone();
            }
        }
    }
    Ok(out)
}

/// A continuous piecewise-linear path in `R^{d+1}` whose coordinate 0 is time.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearPath<T> {
    breakpoints: Vec<T>,
    values: Vec<Vec<T>>,
}

impl<T: Scalar> PiecewiseLinearPath<T> {
    /// `values[i]` is the point at `breakpoints[i]`; its first entry must equal
    /// that breakpoint.
    pub fn new(breakpoints: Vec<T>, values: Vec<Vec<T>>) -> Result<Self, TensorError> {
        if breakpoints.len() < 2 {
            return Err(TensorError::InvalidPath(
                "at least two breakpoints are required".into(),
            ));
        }
        if breakpoints.len() != values.len() {
            return Err(TensorError::InvalidPath(format!(
                "{} breakpoints but {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        let width = values[0].len();
        if width == 0 {
            return Err(TensorError::EmptyAlphabet);
        }
        for (i, (t, v)) in breakpoints.iter().zip(&values).enumerate() {
            if v.len() != width {
                return Err(TensorError::InvalidPath(format!(
                    "point {i} has {} coordinates, expected {width}",
                    v.len()
                )));
            }
            if v[0] != *t {
                return Err(TensorError::InvalidPath(format!(
                    "time coordinate of point {i} differs from its breakpoint"
                )));
            }
            if i > 0 && !(breakpoints[i - 1] < *t) {
                return Err(TensorError::InvalidPath(
                    "breakpoints must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self { breakpoints, values })
    }

    /// Builds a path from the spatial coordinates only; the time coordinate is
    /// filled in from the breakpoints.
    pub fn from_spatial(breakpoints: Vec<T>, spatial: Vec<Vec<T>>) -> Result<Self, TensorError> {
        let values = breakpoints
            .iter()
            .zip(spatial)
            .map(|(t, mut x)| {
                x.insert(0, t.clone());
                x
            })
            .collect();
        Self::new(breakpoints, values)
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Vec<T>] {
        &self.values
    }

    /// Coordinates per point, time included.
    pub fn width(&self) -> usize {
        self.values[0].len()
    }

    pub fn pieces(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// Increment of every coordinate over piece `k`.
    pub fn increment(&self, k: usize) -> Vec<T> {
        self.values[k + 1]
            .iter()
            .zip(&self.values[k])
            .map(|(b, a)| b.clone() - a.clone())
            .collect()
    }

    /// Applies `f` to every spatial coordinate (coordinate 0 is left alone).
    pub fn map_spatial(&self, f: impl Fn(&T) -> T) -> Self {
        let values = self
            .values
            .iter()
            .map(|v| {
                v.iter()
                    .enumerate()
                    .map(|(i, x)| if i == 0 { x.clone() } else { f(x) })
                    .collect()
            })
            .collect();
        Self {
            breakpoints: self.breakpoints.clone(),
            values,
        }
    }

    /// Applies `f` to the time parameter and to coordinate 0 together.
    pub fn map_time(&self, f: impl Fn(&T) -> T) -> Self {
        let values = self
            .values
            .iter()
            .map(|v| {
                let mut v = v.clone();
                v[0] = f(&v[0]);
                v
            })
            .collect();
        Self {
            breakpoints: self.breakpoints.iter().map(f).collect(),
            values,
        }
    }
}

/// Signature of a piecewise-linear path truncated at `depth`, by Chen's
/// identity over its segments.
pub fn path_signature<T: Scalar>(
    path: &PiecewiseLinearPath<T>,
    depth: usize,
) -> TruncatedTensor<T> {
    let mut sig = segment_exponential(&path.increment(0), depth)
        .expect("path width is validated at construction");
    for k in 1..path.pieces() {
        let seg = segment_exponential(&path.increment(k), depth)
            .expect("path width is validated at construction");
        sig = sig
            .chen_concat(&seg)
            .expect("segments share width and depth");
    }
    sig
}

/// Convenience accessor mirroring [`TruncatedTensor::coeff`].
pub fn coeff<T: Scalar>(t: &TruncatedTensor<T>, w: &Word) -> T {
    t.coeff(w)
}
