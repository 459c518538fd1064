//! Words over `{1..k}`, their compositions and probabilities, the coding
//! map `π` and cylinder measures.
//!
//! Symbols are 0-based inside the library and 1-based in text, so the word
//! written `"12"` is `Word::new(vec![0, 1])`.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::ergodic::EstimateWithError;
use crate::error::{Error, Result};
use crate::model::{IfsSystem, Matrix};
use crate::point::{distance, Point};
use crate::sampler::EmpiricalMeasure;
use crate::seed;

/// Finite word `ω_1 ... ω_n`, stored in that order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Word(Vec<usize>);

impl Word {
    pub fn new(symbols: Vec<usize>) -> Self {
        Word(symbols)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn repeat(symbol: usize, n: usize) -> Self {
        Word(vec![symbol; n])
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn reversed(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word(self.0[..n.min(self.len())].to_vec())
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        match self.0.iter().find(|s| **s >= k) {
            Some(&index) => Err(Error::OutOfRangeSymbol { index, k }),
            None => Ok(()),
        }
    }

    /// All `k^n` words of length `n` in lexicographic order.
    pub fn all(k: usize, n: usize) -> Vec<Word> {
        let mut out = vec![Word::empty()];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|w| {
                    (0..k).map(move |s| {
                        let mut v = w.0.clone();
                        v.push(s);
                        Word(v)
                    })
                })
                .collect();
        }
        out
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{}", s + 1)?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .chars()
            .map(|c| match c.to_digit(10) {
                Some(d) if d >= 1 => Ok(d as usize - 1),
                _ => Err(Error::InvalidWord(format!("{s:?}: symbols are digits 1..9"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }
}

impl From<Word> for String {
    fn from(w: Word) -> String {
        w.to_string()
    }
}

impl TryFrom<String> for Word {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone)]
enum Tail {
    Repeat { word: Vec<usize>, next: usize },
    Random { cdf: Vec<f64>, rng: Box<seed::Rng> },
}

/// Lazily generated infinite word. Advancing is deterministic given the
/// construction; clone it to branch.
#[derive(Debug, Clone)]
pub struct SymbolStream {
    prefix: Vec<usize>,
    pos: usize,
    tail: Tail,
}

impl SymbolStream {
    /// `prefix` followed by `cycle` repeated forever.
    pub fn periodic(prefix: Word, cycle: Word) -> Result<Self> {
        if cycle.is_empty() {
            return Err(Error::InvalidWord("periodic tail must be nonempty".into()));
        }
        Ok(SymbolStream {
            prefix: prefix.0,
            pos: 0,
            tail: Tail::Repeat {
                word: cycle.0,
                next: 0,
            },
        })
    }

    pub fn constant(symbol: usize) -> Self {
        SymbolStream {
            prefix: Vec::new(),
            pos: 0,
            tail: Tail::Repeat {
                word: vec![symbol],
                next: 0,
            },
        }
    }

    /// I.i.d. symbols with the given (unnormalized) weights.
    pub fn random(weights: &[f64], seed: u64) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument(format!("bad symbol weights {weights:?}")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidArgument("symbol weights sum to zero".into()));
        }
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        *cdf.last_mut().unwrap() = 1.0;
        Ok(SymbolStream {
            prefix: Vec::new(),
            pos: 0,
            tail: Tail::Random {
                cdf,
                rng: Box::new(seed::rng(seed)),
            },
        })
    }

    pub fn next_symbol(&mut self) -> usize {
        if self.pos < self.prefix.len() {
            self.pos += 1;
            return self.prefix[self.pos - 1];
        }
        match &mut self.tail {
            Tail::Repeat { word, next } => {
                let s = word[*next];
                *next = (*next + 1) % word.len();
                s
            }
            Tail::Random { cdf, rng } => {
                let u: f64 = rng.random();
                cdf.iter().position(|c| u < *c).unwrap_or(cdf.len() - 1)
            }
        }
    }

    pub fn take_word(&mut self, n: usize) -> Word {
        Word((0..n).map(|_| self.next_symbol()).collect())
    }

    /// `σ_i ω`: the remaining stream with `i` in front.
    pub fn prepended(&self, symbol: usize) -> SymbolStream {
        let mut prefix = Vec::with_capacity(1 + self.prefix.len() - self.pos);
        prefix.push(symbol);
        prefix.extend_from_slice(&self.prefix[self.pos..]);
        SymbolStream {
            prefix,
            pos: 0,
            tail: self.tail.clone(),
        }
    }

    fn max_symbol(&self) -> usize {
        let tail_max = match &self.tail {
            Tail::Repeat { word, .. } => word.iter().copied().max().unwrap_or(0),
            Tail::Random { cdf, .. } => cdf.len() - 1,
        };
        self.prefix[self.pos..].iter().copied().fold(tail_max, usize::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodingResult {
    pub point: Point,
    pub iterations_used: usize,
    pub last_increment: f64,
    pub converged: bool,
}

fn apply_word(system: &IfsSystem, symbols: impl Iterator<Item = usize>, x: &Point) -> Result<Point> {
    let mut cur = x.coords().to_vec();
    let mut next = vec![0.0; cur.len()];
    for (step, s) in symbols.enumerate() {
        system.apply_into(s, &cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
        if cur.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteOrbit { step });
        }
    }
    Point::new(cur)
}

fn check_word_and_point(system: &IfsSystem, word: &Word, x: &Point) -> Result<()> {
    word.validate(system.k())?;
    system.check_point(x.coords())
}

/// `h_{ω_n} ∘ ... ∘ h_{ω_1}(x)`.
pub fn compose_forward(system: &IfsSystem, word: &Word, x: &Point) -> Result<Point> {
    check_word_and_point(system, word, x)?;
    apply_word(system, word.0.iter().copied(), x)
}

/// `h_{ω_1} ∘ ... ∘ h_{ω_n}(x)`, i.e. the reversed word applied forward.
pub fn compose_backward(system: &IfsSystem, word: &Word, x: &Point) -> Result<Point> {
    check_word_and_point(system, word, x)?;
    apply_word(system, word.0.iter().rev().copied(), x)
}

/// `log p_{ω^n}(x) = Σ_i log p_{ω_i}(h_{ω^{i-1}}(x))`.
pub fn log_word_probability(system: &IfsSystem, word: &Word, x: &[f64]) -> Result<f64> {
    word.validate(system.k())?;
    system.check_point(x)?;
    Ok(log_word_probability_unchecked(system, word.symbols(), x))
}

pub(crate) fn log_word_probability_unchecked(system: &IfsSystem, symbols: &[usize], x: &[f64]) -> f64 {
    if let Some(p) = system.probs().constant_values() {
        return symbols.iter().map(|&s| p[s].ln()).sum();
    }
    let mut cur = x.to_vec();
    let mut next = vec![0.0; cur.len()];
    let mut acc = 0.0;
    for &s in symbols {
        acc += system.probs().log_prob(s, &cur);
        system.apply_into(s, &cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    acc
}

/// `p_{ω^n}(x)`, accumulated in log space.
pub fn word_probability(system: &IfsSystem, word: &Word, x: &Point) -> Result<f64> {
    let lp = log_word_probability(system, word, x.coords())?;
    if lp == f64::NEG_INFINITY {
        return Err(Error::ProbabilityFloor {
            symbol: word.0.first().copied().unwrap_or(0),
            point: x.coords().to_vec(),
        });
    }
    Ok(lp.exp())
}

/// Composite `y ↦ M y + t` of affine maps.
struct AffineAcc {
    m: Matrix,
    t: Vec<f64>,
}

impl AffineAcc {
    fn identity(d: usize) -> Self {
        AffineAcc {
            m: Matrix::identity(d),
            t: vec![0.0; d],
        }
    }

    /// `self ∘ (L y + c)`.
    fn then_inner(&mut self, l: &Matrix, c: &[f64]) {
        let mut shift = vec![0.0; c.len()];
        self.m.mul_vec(c, &mut shift);
        for (t, s) in self.t.iter_mut().zip(shift) {
            *t += s;
        }
        self.m = self.m.mul(l);
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.m.mul_vec(x, &mut out);
        for (o, t) in out.iter_mut().zip(&self.t) {
            *o += t;
        }
        out
    }
}

const CONSECUTIVE_SMALL: usize = 3;

/// `π(ω) = lim h_{ω^{-n}}(x0)`: iterates until three consecutive increments
/// are at most `tol`, or `max_n` symbols have been used. Increments vanish
/// while the stream repeats a map fixing `x0`, so such a start can stop
/// early.
///
/// Each `y_n` is recomputed from `x0`. When every map is affine the
/// composite is carried as a matrix instead, so a step costs `O(d^2)`.
pub fn coding_map(
    system: &IfsSystem,
    stream: &SymbolStream,
    x0: &Point,
    tol: f64,
    max_n: usize,
) -> Result<CodingResult> {
    if !(tol > 0.0) || max_n == 0 {
        return Err(Error::InvalidArgument("coding_map needs tol > 0 and max_n >= 1".into()));
    }
    system.check_point(x0.coords())?;
    if stream.max_symbol() >= system.k() {
        return Err(Error::OutOfRangeSymbol {
            index: stream.max_symbol(),
            k: system.k(),
        });
    }
    let mut stream = stream.clone();
    let affine: Option<Vec<(Matrix, Vec<f64>)>> =
        system.maps().iter().map(|m| m.affine_parts()).collect();
    let mut acc = AffineAcc::identity(system.dim());
    let mut symbols = Vec::new();
    let mut prev = x0.coords().to_vec();
    let mut small = 0;
    let mut last_increment = f64::INFINITY;
    for n in 1..=max_n {
        let s = stream.next_symbol();
        symbols.push(s);
        let y = match &affine {
            Some(parts) => {
                acc.then_inner(&parts[s].0, &parts[s].1);
                acc.apply(x0.coords())
            }
            None => apply_word(system, symbols.iter().rev().copied(), x0)?.into_vec(),
        };
        if y.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteOrbit { step: n });
        }
        last_increment = distance(&y, &prev);
        prev = y;
        small = if last_increment <= tol { small + 1 } else { 0 };
        if small >= CONSECUTIVE_SMALL {
            return Ok(CodingResult {
                point: Point::new(prev)?,
                iterations_used: n,
                last_increment,
                converged: true,
            });
        }
    }
    Ok(CodingResult {
        point: Point::new(prev)?,
        iterations_used: max_n,
        last_increment,
        converged: false,
    })
}

/// Largest pairwise distance among `h_{ω^n}(a)`, `a` in the sample. This is
/// a lower bound on the diameter of the image of the sampled set.
pub fn image_diameter(system: &IfsSystem, word: &Word, set_sample: &[Point]) -> Result<f64> {
    if set_sample.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: set_sample.len(),
        });
    }
    let images = set_sample
        .iter()
        .map(|a| compose_forward(system, word, a))
        .collect::<Result<Vec<_>>>()?;
    let mut best: f64 = 0.0;
    for i in 0..images.len() {
        for j in i + 1..images.len() {
            best = best.max(images[i].distance(&images[j]));
        }
    }
    Ok(best)
}

/// `μ_+(C_ω) = ∫ p_ω(x) dν(x)` over the sample cloud.
pub fn cylinder_measure_plus(
    system: &IfsSystem,
    word: &Word,
    nu: &EmpiricalMeasure,
) -> Result<EstimateWithError> {
    word.validate(system.k())?;
    if nu.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if nu.dim() != system.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            got: nu.dim(),
        });
    }
    if let Some(p) = system.probs().constant_values() {
        // Symbol counts keep the value independent of word order.
        let mut counts = vec![0i32; p.len()];
        for &s in word.symbols() {
            counts[s] += 1;
        }
        let v = counts.iter().zip(p).map(|(c, pi)| pi.powi(*c)).product();
        return Ok(EstimateWithError::exact(v, nu.len()));
    }
    let values: Vec<(f64, f64)> = nu
        .iter()
        .map(|(x, w)| (log_word_probability_unchecked(system, word.symbols(), x).exp(), w))
        .collect();
    Ok(EstimateWithError::weighted(&values))
}

/// `μ_-(C_ω) = μ_+(C_{reversed ω})`.
pub fn cylinder_measure_minus(
    system: &IfsSystem,
    word: &Word,
    nu: &EmpiricalMeasure,
) -> Result<EstimateWithError> {
    cylinder_measure_plus(system, &word.reversed(), nu)
}
