//! Perfect matchings, word-compatible pairings, permutation counts and the
//! two-slot permutation decomposition.

use crate::tensor_algebra::Word;
use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

/// Largest number of points that may be matched.
pub const MAX_MATCHED_POINTS: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CombinatoricsError {
    #[error("cannot match an odd number of points ({0})")]
    OddLength(usize),
    #[error("{0} points is outside the supported range 2..={MAX_MATCHED_POINTS}")]
    OutOfRange(usize),
    #[error("time letter at position {0}; only spatial letters can be paired")]
    TimeLetter(usize),
    #[error("k = {0} is outside the exhaustive range 1..=4")]
    EnumerationTooLarge(usize),
}

/// A perfect pairing of positions `0..2k`, stored with `a < b` in each pair
/// and pairs sorted by their first element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Matching {
    pairs: Vec<(usize, usize)>,
}

impl Matching {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Re-expresses the matching on a larger index set through `positions`.
    pub fn relocate(&self, positions: &[usize]) -> Matching {
        let mut pairs: Vec<(usize, usize)> = self
            .pairs
            .iter()
            .map(|&(a, b)| (positions[a], positions[b]))
            .collect();
        pairs.sort_unstable();
        Matching { pairs }
    }
}

impl fmt::Display for Matching {
    /// One-based positions, e.g. `{(1,3),(2,4)}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .pairs
            .iter()
            .map(|(a, b)| format!("({},{})", a + 1, b + 1))
            .collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

fn check_points(two_k: usize) -> Result<(), CombinatoricsError> {
    if two_k % 2 == 1 {
        return Err(CombinatoricsError::OddLength(two_k));
    }
    if !(2..=MAX_MATCHED_POINTS).contains(&two_k) {
        return Err(CombinatoricsError::OutOfRange(two_k));
    }
    Ok(())
}

fn extend(
    free: &mut Vec<usize>,
    current: &mut Vec<(usize, usize)>,
    accept: &dyn Fn(usize, usize) -> bool,
    out: &mut Vec<Matching>,
) {
    if free.is_empty() {
        out.push(Matching {
            pairs: current.clone(),
        });
        return;
    }
    let first = free.remove(0);
    for idx in 0..free.len() {
        let partner = free[idx];
        if !accept(first, partner) {
            continue;
        }
        free.remove(idx);
        current.push((first, partner));
        extend(free, current, accept, out);
        current.pop();
        free.insert(idx, partner);
    }
    free.insert(0, first);
}

fn matchings_where(two_k: usize, accept: &dyn Fn(usize, usize) -> bool) -> Vec<Matching> {
    let mut out = Vec::new();
    let mut free: Vec<usize> = (0..two_k).collect();
    extend(&mut free, &mut Vec::new(), accept, &mut out);
    out
}

/// All `(2k-1)!!` perfect matchings of `0..two_k`; the smallest free index is
/// paired with each larger one in turn.
pub fn enumerate_matchings(two_k: usize) -> Result<Vec<Matching>, CombinatoricsError> {
    check_points(two_k)?;
    Ok(matchings_where(two_k, &|_, _| true))
}

fn check_word(word: &Word) -> Result<(), CombinatoricsError> {
    if let Some(pos) = word.letters().iter().position(|&l| l == 0) {
        return Err(CombinatoricsError::TimeLetter(pos));
    }
    check_points(word.len())
}

/// Matchings whose pairs only join equal letters of `word`.
pub fn compatible_matchings(word: &Word) -> Result<Vec<Matching>, CombinatoricsError> {
    check_word(word)?;
    let letters = word.letters();
    Ok(matchings_where(word.len(), &|a, b| letters[a] == letters[b]))
}

/// Like [`compatible_matchings`] but without the range cap and returning an
/// empty list for odd lengths. Used internally where time letters were
/// already stripped.
pub(crate) fn pairings_of(letters: &[usize]) -> Vec<Matching> {
    if letters.len() % 2 == 1 {
        return Vec::new();
    }
    if letters.is_empty() {
        return vec![Matching { pairs: Vec::new() }];
    }
    matchings_where(letters.len(), &|a, b| letters[a] == letters[b])
}

fn factorial(n: u64) -> u128 {
    (1..=n as u128).product()
}

/// Number of permutations of the `2k` positions whose consecutive slots pair
/// equal letters: `k! 2^k` times the number of compatible matchings.
pub fn permutation_count(word: &Word) -> Result<u128, CombinatoricsError> {
    check_word(word)?;
    let k = (word.len() / 2) as u64;
    // product over letters of (multiplicity - 1)!! counts compatible matchings
    let mut mult: HashMap<usize, u64> = HashMap::new();
    for &l in word.letters() {
        *mult.entry(l).or_default() += 1;
    }
    let mut matchings: u128 = 1;
    for &c in mult.values() {
        if c % 2 == 1 {
            return Ok(0);
        }
        let mut j = c - 1;
        while j > 1 {
            matchings *= j as u128;
            j -= 2;
        }
    }
    Ok(factorial(k) * (1u128 << k) * matchings)
}

/// Outcome of the word-dependent count bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefinedBound {
    /// Upper bound on the permutation count of any word with `k` pairs and
    /// `p` distinct letters.
    Count(u128),
    /// More distinct letters than pairs: some letter occurs once, so the
    /// expectation vanishes.
    ZeroExpectation,
}

impl RefinedBound {
    pub fn count(&self) -> Option<u128> {
        match self {
            RefinedBound::Count(c) => Some(*c),
            RefinedBound::ZeroExpectation => None,
        }
    }
}

/// `k! 2^{p-1} (2(k-p+1))! / (k-p+1)!` for `1 <= p <= k`.
pub fn refined_count_bound(k: u64, p: u64) -> RefinedBound {
    if p > k || p == 0 {
        return RefinedBound::ZeroExpectation;
    }
    let r = k - p + 1;
    RefinedBound::Count(factorial(k) * (1u128 << (p - 1)) * factorial(2 * r) / factorial(r))
}

/// A word whose permutation count exceeds the refined bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundViolation {
    pub word: Word,
    pub count: u128,
    pub bound: u128,
}

/// Exhaustively compares [`permutation_count`] with [`refined_count_bound`]
/// over all words of even length up to `max_len` on `d` letters and returns
/// any violations; an empty list means the bound held everywhere.
pub fn refined_bound_violations(d: usize, max_len: usize) -> Vec<BoundViolation> {
    let mut out = Vec::new();
    for len in (2..=max_len.min(MAX_MATCHED_POINTS)).step_by(2) {
        for w in Word::all_of_length(d - 1, len) {
            let word = Word::new(w.letters().iter().map(|l| l + 1).collect());
            let count = permutation_count(&word).expect("letters are nonzero and length is even");
            let k = (len / 2) as u64;
            let p = word.distinct_nonzero() as u64;
            if let RefinedBound::Count(bound) = refined_count_bound(k, p) {
                if count > bound {
                    out.push(BoundViolation { word, count, bound });
                }
            } else if count > 0 {
                out.push(BoundViolation {
                    word,
                    count,
                    bound: 0,
                });
            }
        }
    }
    out
}

/// Result of the exhaustive decomposition check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BijectionReport {
    pub k: usize,
    pub permutations: usize,
    pub is_bijection: bool,
    /// Every ordered head pair is hit by exactly `(2k-2)!` permutations.
    pub fibers_uniform: bool,
    /// Number of distinct ordered head pairs, `2k(2k-1)`.
    pub head_pairs: usize,
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (1..=n).collect();
    fn heap(k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(cur.clone());
            return;
        }
        heap(k - 1, cur, out);
        for i in 0..k - 1 {
            if k.is_multiple_of(2) {
                cur.swap(i, k - 1);
            } else {
                cur.swap(0, k - 1);
            }
            heap(k - 1, cur, out);
        }
    }
    heap(n, &mut cur, &mut out);
    out
}

/// Splits a permutation of `{1..2k}` into its first two images and the
/// relabelled remainder, a permutation of `{1..2k-2}`.
pub fn decompose(sigma: &[usize]) -> ((usize, usize), Vec<usize>) {
    let (s1, s2) = (sigma[0], sigma[1]);
    let lo = s1.min(s2);
    let hi = s1.max(s2);
    let tau = sigma[2..]
        .iter()
        .map(|&y| {
            if y < lo {
                y
            } else if y < hi {
                y - 1
            } else {
                y - 2
            }
        })
        .collect();
    ((s1, s2), tau)
}

/// Inverse of [`decompose`]: shifts each entry of `tau` past the two removed
/// values and prepends them.
pub fn recompose(head: (usize, usize), tau: &[usize]) -> Vec<usize> {
    let lo = head.0.min(head.1);
    let hi = head.0.max(head.1);
    let mut sigma = vec![head.0, head.1];
    sigma.extend(tau.iter().map(|&x| {
        if x < lo {
            x
        } else if x < hi - 1 {
            x + 1
        } else {
            x + 2
        }
    }));
    sigma
}

/// Exhaustively checks that `σ ↦ ((σ(1), σ(2)), τ)` is a bijection onto
/// ordered pairs of distinct indices times permutations of `2k-2` elements.
pub fn decomposition_bijection_check(k: usize) -> Result<BijectionReport, CombinatoricsError> {
    if !(1..=4).contains(&k) {
        return Err(CombinatoricsError::EnumerationTooLarge(k));
    }
    let n = 2 * k;
    let all = permutations(n);
    let mut images = std::collections::HashSet::new();
    let mut fibers: HashMap<(usize, usize), usize> = HashMap::new();
    let mut roundtrip = true;
    for sigma in &all {
        let (head, tau) = decompose(sigma);
        let mut sorted = tau.clone();
        sorted.sort_unstable();
        if sorted != (1..=n - 2).collect::<Vec<_>>() {
            roundtrip = false;
        }
        if recompose(head, &tau) != *sigma {
            roundtrip = false;
        }
        *fibers.entry(head).or_default() += 1;
        images.insert((head, tau));
    }
    let tail = factorial((n - 2) as u64) as usize;
    let head_pairs = fibers.len();
    let is_bijection = roundtrip && images.len() == all.len() && all.len() == head_pairs * tail;
    let fibers_uniform = head_pairs == n * (n - 1) && fibers.values().all(|&c| c == tail);
    Ok(BijectionReport {
        k,
        permutations: all.len(),
        is_bijection,
        fibers_uniform,
        head_pairs,
    })
}
