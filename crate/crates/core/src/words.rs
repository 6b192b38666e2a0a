//! Binary words, the Fibonacci substitution and rotation codings.
//!
//! The Fibonacci word `w = 1011010110110…` is the fixed point of the
//! substitution `0 → 1, 1 → 10`. Its prefixes of length `F_k` are the
//! words `s_k`. The same word is produced by coding the golden rotation
//! `n ↦ nω` with the interval `[1 − ω, 1)`; other phases θ give the rest of
//! the hull.
//!
//! Words are stored packed, 64 symbols per block, most significant bit
//! first, so that block-wise comparison agrees with lexicographic order.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phase::{GoldenConstant, PhasePoint};

/// Largest level accepted by [`fib_word`]; `F_40` symbols take ~20 MB packed.
pub const MAX_WORD_LEVEL: usize = 40;

/// Orbit points closer than this (raw units, i.e. `2^-64`) to an endpoint of
/// the coding interval are reported as near-endpoint evaluations.
const ENDPOINT_FLAG_RAW: u128 = 1u128 << 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordsError {
    #[error("Fibonacci index {0} is below -1")]
    IndexBelowRange(i64),
    #[error("word level {0} exceeds the supported maximum {MAX_WORD_LEVEL}")]
    LevelTooLarge(usize),
    #[error("empty index range [{lo}, {hi}]")]
    EmptyRange { lo: i64, hi: i64 },
    #[error("factor length must be positive")]
    ZeroLength,
    #[error("prefix of length {got} cannot saturate factors of length {n}: need at least {needed}")]
    InsufficientPrefix { n: usize, needed: usize, got: usize },
    #[error("factor count of length {n} changed from {before} to {after} when the prefix was doubled")]
    Unsaturated { n: usize, before: usize, after: usize },
    #[error("window of length {got} is too short for a length-{n} hull check: need at least {needed}")]
    WindowTooShort { n: usize, needed: usize, got: usize },
    #[error("cyclic permutations of an empty word")]
    EmptyWord,
    #[error("invalid symbol {0:?}")]
    InvalidSymbol(char),
    #[error("no parity class of windows is conjugate to s_k on the {side} side at phase {theta}")]
    ConjugacyViolation { side: Side, theta: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symbol {
    Zero,
    One,
}

impl Symbol {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Symbol::One
        } else {
            Symbol::Zero
        }
    }

    pub fn is_one(self) -> bool {
        self == Symbol::One
    }

    pub fn complement(self) -> Self {
        match self {
            Symbol::Zero => Symbol::One,
            Symbol::One => Symbol::Zero,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Symbol::Zero => '0',
            Symbol::One => '1',
        }
    }
}

impl TryFrom<char> for Symbol {
    type Error = WordsError;

    fn try_from(c: char) -> Result<Self, Self::Error> {
        match c {
            '0' => Ok(Symbol::Zero),
            '1' => Ok(Symbol::One),
            other => Err(WordsError::InvalidSymbol(other)),
        }
    }
}

/// A finite word over `{0, 1}`.
///
/// Bits past `len` in the last block are always zero, which keeps the
/// derived `Eq`/`Hash`/`Ord` symbol-wise (ordering is by length first, then
/// lexicographic).
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FiniteWord {
    len: usize,
    blocks: Vec<u64>,
}

impl FiniteWord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(symbols: usize) -> Self {
        FiniteWord { len: 0, blocks: Vec::with_capacity(symbols.div_ceil(64)) }
    }

    pub fn from_symbols<I: IntoIterator<Item = Symbol>>(symbols: I) -> Self {
        let mut w = FiniteWord::new();
        for s in symbols {
            w.push(s);
        }
        w
    }

    /// The word consisting of `len` copies of `s`.
    pub fn constant(s: Symbol, len: usize) -> Self {
        Self::from_symbols(std::iter::repeat_n(s, len))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> Symbol {
        assert!(i < self.len, "symbol index {i} out of range for word of length {}", self.len);
        Symbol::from_bit((self.blocks[i / 64] >> (63 - i % 64)) & 1 == 1)
    }

    pub fn first(&self) -> Option<Symbol> {
        (self.len > 0).then(|| self.get(0))
    }

    pub fn last(&self) -> Option<Symbol> {
        (self.len > 0).then(|| self.get(self.len - 1))
    }

    pub fn push(&mut self, s: Symbol) {
        if self.len.is_multiple_of(64) {
            self.blocks.push(0);
        }
        if s.is_one() {
            let i = self.len;
            self.blocks[i / 64] |= 1u64 << (63 - i % 64);
        }
        self.len += 1;
    }

    /// Appends `other` block-wise.
    pub fn append(&mut self, other: &FiniteWord) {
        if other.len == 0 {
            return;
        }
        let off = self.len % 64;
        if off == 0 {
            self.blocks.extend_from_slice(&other.blocks);
        } else {
            for &b in &other.blocks {
                *self.blocks.last_mut().expect("nonempty when off > 0") |= b >> off;
                self.blocks.push(b << (64 - off));
            }
        }
        self.len += other.len;
        self.blocks.truncate(self.len.div_ceil(64));
    }

    pub fn concat(&self, other: &FiniteWord) -> FiniteWord {
        let mut out = self.clone();
        out.append(other);
        out
    }

    /// The factor of length `len` starting at offset `start`.
    pub fn factor(&self, start: usize, len: usize) -> FiniteWord {
        assert!(start + len <= self.len, "factor [{start}, {}) exceeds length {}", start + len, self.len);
        let nblocks = len.div_ceil(64);
        let first = start / 64;
        let off = start % 64;
        let mut blocks = Vec::with_capacity(nblocks);
        for i in 0..nblocks {
            let hi = self.blocks[first + i] << off;
            let lo = if off == 0 {
                0
            } else {
                self.blocks.get(first + i + 1).copied().unwrap_or(0) >> (64 - off)
            };
            blocks.push(hi | lo);
        }
        if !len.is_multiple_of(64) {
            if let Some(last) = blocks.last_mut() {
                *last &= u64::MAX << (64 - len % 64);
            }
        }
        FiniteWord { len, blocks }
    }

    pub fn prefix(&self, len: usize) -> FiniteWord {
        self.factor(0, len)
    }

    /// Rotation moving the first `shift` symbols to the end.
    pub fn rotate_left(&self, shift: usize) -> FiniteWord {
        if self.len == 0 {
            return self.clone();
        }
        let shift = shift % self.len;
        let mut out = self.factor(shift, self.len - shift);
        out.append(&self.factor(0, shift));
        out
    }

    pub fn count_ones(&self) -> usize {
        self.blocks.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = Symbol> + '_ {
        (0..self.len).map(|i| self.get(i))
    }
}

impl fmt::Display for FiniteWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.iter().map(Symbol::as_char).collect();
        f.write_str(&s)
    }
}

impl fmt::Debug for FiniteWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 80 {
            write!(f, "FiniteWord(\"{self}\")")
        } else {
            write!(f, "FiniteWord(len={}, \"{}…\")", self.len, self.prefix(64))
        }
    }
}

impl FromStr for FiniteWord {
    type Err = WordsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut w = FiniteWord::with_capacity(s.len());
        for c in s.chars() {
            w.push(Symbol::try_from(c)?);
        }
        Ok(w)
    }
}

/// Applies `0 → 1, 1 → 10` symbol-wise.
pub fn substitute(w: &FiniteWord) -> FiniteWord {
    let mut out = FiniteWord::with_capacity(w.len() + w.count_ones());
    for s in w.iter() {
        out.push(Symbol::One);
        if s.is_one() {
            out.push(Symbol::Zero);
        }
    }
    out
}

/// Number of `1`s in `w`.
pub fn height(w: &FiniteWord) -> usize {
    w.count_ones()
}

/// `F_k` with `F_{-1} = F_0 = 1`, exact for every `k ≥ -1`.
pub fn fib_number(k: i64) -> Result<BigUint, WordsError> {
    if k < -1 {
        return Err(WordsError::IndexBelowRange(k));
    }
    let (mut prev, mut cur) = (BigUint::from(1u8), BigUint::from(1u8));
    for _ in 0..k.max(0) {
        let next = &prev + &cur;
        prev = std::mem::replace(&mut cur, next);
    }
    Ok(cur)
}

/// `F_k` as a machine integer; valid for `-1 ≤ k ≤ 90`.
pub fn fib_len(k: i64) -> usize {
    assert!((-1..=90).contains(&k), "fib_len({k}) outside the machine range");
    let (mut prev, mut cur) = (1usize, 1usize);
    for _ in 0..k.max(0) {
        let next = prev + cur;
        prev = cur;
        cur = next;
    }
    cur
}

/// Smallest `k ≥ 0` with `F_k ≥ n`.
pub fn fib_level_at_least(n: usize) -> usize {
    let mut k = 0;
    while fib_len(k as i64) < n {
        k += 1;
    }
    k
}

/// `s_k` built by the concatenation recursion `s_k = s_{k-1} s_{k-2}`,
/// starting from `s_{-1} = 0`, `s_0 = 1`.
pub fn fib_word(k: usize) -> Result<FiniteWord, WordsError> {
    if k > MAX_WORD_LEVEL {
        return Err(WordsError::LevelTooLarge(k));
    }
    let mut prev: FiniteWord = FiniteWord::constant(Symbol::Zero, 1);
    let mut cur: FiniteWord = FiniteWord::constant(Symbol::One, 1);
    for _ in 0..k {
        let next = cur.concat(&prev);
        prev = std::mem::replace(&mut cur, next);
    }
    Ok(cur)
}

/// `s_k = S^k(1)` by repeated substitution.
pub fn fib_word_by_substitution(k: usize) -> Result<FiniteWord, WordsError> {
    if k > MAX_WORD_LEVEL {
        return Err(WordsError::LevelTooLarge(k));
    }
    let mut w = FiniteWord::constant(Symbol::One, 1);
    for _ in 0..k {
        w = substitute(&w);
    }
    Ok(w)
}

/// The first `len` symbols of the Fibonacci word.
pub fn fibonacci_prefix(len: usize) -> Result<FiniteWord, WordsError> {
    let k = fib_level_at_least(len);
    Ok(fib_word(k)?.prefix(len))
}

/// The word `b_k`: the complement of the last symbol of `s_k`, followed by
/// the first `F_k − 1` symbols of `s_k`.
pub fn special_word(k: usize) -> Result<FiniteWord, WordsError> {
    let s = fib_word(k)?;
    let mut b = FiniteWord::with_capacity(s.len());
    b.push(s.last().expect("s_k is nonempty").complement());
    b.append(&s.prefix(s.len() - 1));
    Ok(b)
}

/// `(-1)^{k-1} (F_{k-2} F_k − F_{k-1}^2)`, which equals 1 for every `k ≥ 1`.
pub fn fibonacci_identity_check(k: i64) -> Result<BigInt, WordsError> {
    if k < 1 {
        return Err(WordsError::IndexBelowRange(k));
    }
    let f = |i: i64| fib_number(i).map(BigInt::from);
    let value = f(k - 2)? * f(k)? - f(k - 1)?.pow(2);
    Ok(if k % 2 == 1 { value } else { -value })
}

/// A coded symbol together with the near-endpoint diagnostic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CodedSymbol {
    pub symbol: Symbol,
    /// The orbit point fell within `2^-64` of `1 − ω` or of `0 ≡ 1`.
    pub near_endpoint: bool,
}

fn code_orbit_point(golden: &GoldenConstant, x: PhasePoint) -> CodedSymbol {
    let threshold = golden.threshold();
    let near_endpoint = x.circle_distance(threshold) < ENDPOINT_FLAG_RAW
        || x.circle_distance(PhasePoint::ZERO) < ENDPOINT_FLAG_RAW;
    CodedSymbol { symbol: Symbol::from_bit(x >= threshold), near_endpoint }
}

/// `v_θ(n) = χ_[1−ω, 1)(nω + θ mod 1)`, left endpoint included.
pub fn rotation_symbol(n: i64, theta: PhasePoint) -> Symbol {
    rotation_symbol_checked(n, theta).symbol
}

pub fn rotation_symbol_checked(n: i64, theta: PhasePoint) -> CodedSymbol {
    let golden = GoldenConstant::get();
    code_orbit_point(golden, golden.orbit(n, theta))
}

/// `v_θ(n_lo) … v_θ(n_hi)`.
pub fn rotation_block(n_lo: i64, n_hi: i64, theta: PhasePoint) -> Result<FiniteWord, WordsError> {
    rotation_block_checked(n_lo, n_hi, theta).map(|(w, _)| w)
}

/// Like [`rotation_block`], also returning the sites whose orbit point
/// landed near an endpoint of the coding interval.
pub fn rotation_block_checked(
    n_lo: i64,
    n_hi: i64,
    theta: PhasePoint,
) -> Result<(FiniteWord, Vec<i64>), WordsError> {
    if n_lo > n_hi {
        return Err(WordsError::EmptyRange { lo: n_lo, hi: n_hi });
    }
    let golden = GoldenConstant::get();
    let step = golden.omega();
    let mut x = golden.orbit(n_lo, theta);
    let mut word = FiniteWord::with_capacity((n_hi - n_lo + 1) as usize);
    let mut flagged = Vec::new();
    for n in n_lo..=n_hi {
        let coded = code_orbit_point(golden, x);
        if coded.near_endpoint {
            flagged.push(n);
        }
        word.push(coded.symbol);
        x = x + step;
    }
    Ok((word, flagged))
}

/// All distinct factors of length `n` of `word`.
pub fn factor_set(word: &FiniteWord, n: usize) -> BTreeSet<FiniteWord> {
    if n == 0 || n > word.len() {
        return BTreeSet::new();
    }
    let seen: HashSet<FiniteWord> = (0..=word.len() - n).map(|i| word.factor(i, n)).collect();
    seen.into_iter().collect()
}

/// Prefix length that is guaranteed to contain every factor of length `n`:
/// `n + F_{k+2}` with `k` the least level such that `F_k ≥ n`.
pub fn saturation_length(n: usize) -> usize {
    let k = fib_level_at_least(n) as i64;
    n + fib_len(k + 2)
}

/// The set `P_w(n)` of length-`n` factors of the Fibonacci word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubwordSet {
    n: usize,
    members: BTreeSet<FiniteWord>,
}

impl SubwordSet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, w: &FiniteWord) -> bool {
        self.members.contains(w)
    }

    pub fn members(&self) -> &BTreeSet<FiniteWord> {
        &self.members
    }
}

/// Length-`n` factors of the length-`prefix_length` prefix of `w`.
///
/// The prefix must reach [`saturation_length`]; the result is additionally
/// checked by recounting on a prefix twice as long.
pub fn subwords(prefix_length: usize, n: usize) -> Result<SubwordSet, WordsError> {
    if n == 0 {
        return Err(WordsError::ZeroLength);
    }
    let needed = saturation_length(n);
    if prefix_length < needed {
        return Err(WordsError::InsufficientPrefix { n, needed, got: prefix_length });
    }
    let long = fibonacci_prefix(2 * prefix_length)?;
    let members = factor_set(&long.prefix(prefix_length), n);
    let after = factor_set(&long, n).len();
    if after != members.len() {
        return Err(WordsError::Unsaturated { n, before: members.len(), after });
    }
    Ok(SubwordSet { n, members })
}

/// The `|w|` rotations of a word in shift order, with the number of
/// distinct ones.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CyclicPermutations {
    pub rotations: Vec<FiniteWord>,
    pub distinct: usize,
}

pub fn cyclic_permutations(w: &FiniteWord) -> Result<CyclicPermutations, WordsError> {
    if w.is_empty() {
        return Err(WordsError::EmptyWord);
    }
    let rotations: Vec<FiniteWord> = (0..w.len()).map(|i| w.rotate_left(i)).collect();
    let distinct = rotations.iter().collect::<HashSet<_>>().len();
    Ok(CyclicPermutations { rotations, distinct })
}

/// True iff the length-`n` factors of `window` are exactly `P_w(n)`.
pub fn hull_membership_check(window: &FiniteWord, n: usize) -> Result<bool, WordsError> {
    if n == 0 {
        return Err(WordsError::ZeroLength);
    }
    let needed = saturation_length(n);
    if window.len() < needed {
        return Err(WordsError::WindowTooShort { n, needed, got: window.len() });
    }
    let reference = subwords(needed, n)?;
    Ok(factor_set(window, n) == reference.members)
}

/// Half-line of the orbit: `s_k^θ = v_θ(1)…v_θ(F_k)` on the right,
/// `t_k^θ = v_θ(−F_k+1)…v_θ(0)` on the left.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Right,
    Left,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Right => "right",
            Side::Left => "left",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(k: usize) -> Self {
        if k.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityEntry {
    pub k: usize,
    pub side: Side,
    /// The level-`k` window is a cyclic permutation of `s_k` (or, for
    /// traces, the phase-`θ` trace agrees with the phase-0 trace).
    pub holds: bool,
}

/// Per-level outcomes on one side, and whether each parity class passed
/// at every level tested.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityReport {
    pub side: Side,
    pub even_ok: bool,
    pub odd_ok: bool,
    pub per_k: Vec<ParityEntry>,
}

impl ParityReport {
    pub fn from_entries(side: Side, per_k: Vec<ParityEntry>) -> Self {
        let class_ok = |p: Parity| per_k.iter().filter(|e| Parity::of(e.k) == p).all(|e| e.holds);
        ParityReport { side, even_ok: class_ok(Parity::Even), odd_ok: class_ok(Parity::Odd), per_k }
    }

    pub fn any_class_ok(&self) -> bool {
        self.even_ok || self.odd_ok
    }
}

/// Rotation classes of `s_0 … s_{k_max}`, built once and reused across
/// many phases.
pub struct ConjugacyTable {
    classes: Vec<HashSet<FiniteWord>>,
}

impl ConjugacyTable {
    pub fn new(k_max: usize) -> Result<Self, WordsError> {
        let classes = (0..=k_max)
            .map(|k| Ok(cyclic_permutations(&fib_word(k)?)?.rotations.into_iter().collect()))
            .collect::<Result<_, WordsError>>()?;
        Ok(ConjugacyTable { classes })
    }

    pub fn k_max(&self) -> usize {
        self.classes.len() - 1
    }

    pub fn is_conjugate(&self, k: usize, w: &FiniteWord) -> bool {
        self.classes[k].contains(w)
    }

    /// Right and left parity reports for one phase, levels `0..=k_max`.
    pub fn classify(&self, theta: PhasePoint) -> Result<(ParityReport, ParityReport), WordsError> {
        let mut right = Vec::with_capacity(self.classes.len());
        let mut left = Vec::with_capacity(self.classes.len());
        for k in 0..self.classes.len() {
            let f = fib_len(k as i64) as i64;
            let s_theta = rotation_block(1, f, theta)?;
            let t_theta = rotation_block(1 - f, 0, theta)?;
            right.push(ParityEntry { k, side: Side::Right, holds: self.is_conjugate(k, &s_theta) });
            left.push(ParityEntry { k, side: Side::Left, holds: self.is_conjugate(k, &t_theta) });
        }
        let reports = (ParityReport::from_entries(Side::Right, right), ParityReport::from_entries(Side::Left, left));
        for report in [&reports.0, &reports.1] {
            if !report.any_class_ok() {
                return Err(WordsError::ConjugacyViolation { side: report.side, theta: theta.to_string() });
            }
        }
        Ok(reports)
    }
}

/// Tests, for `0 ≤ k ≤ k_max`, whether `s_k^θ` and `t_k^θ` are cyclic
/// permutations of `s_k`; fails if some side has no fully passing parity
/// class.
pub fn classify_phase_words(theta: PhasePoint, k_max: usize) -> Result<(ParityReport, ParityReport), WordsError> {
    ConjugacyTable::new(k_max)?.classify(theta)
}
