//! Integer sequence machinery for quasi-periodic handle placements: Beatty
//! floors, the counting word, the shift action, finite-window
//! quasi-periodicity scans and surface window matching.
//!
//! Irrational slopes are represented by mantissa-safe rational convergents
//! and all floors are taken in exact integer arithmetic, so lattice values
//! never suffer floating-point fencepost errors.

use crate::surface_builder::SurfaceMesh;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SequenceError {
    #[error("alpha = {0}/{1} must be > 1 for strictly increasing placements")]
    AlphaOutOfRange(i128, i128),
    #[error("window [{0}, {1}] is empty")]
    EmptyWindow(i64, i64),
    #[error("scan needs i_max >= n_max + radius and i_min <= -radius (have [{0}, {1}])")]
    InsufficientWindow(i64, i64),
    #[error("meshes are incompatible: {0}")]
    MeshesIncompatible(String),
    #[error("domain shift {0} is not a whole number of half-cells")]
    MisalignedShift(f64),
    #[error("no overlapping vertices in the comparison window")]
    NoOverlap,
}

/// Rational stand-in for an irrational slope.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RationalAlpha {
    pub num: i128,
    pub den: i128,
}

impl RationalAlpha {
    /// Continued-fraction convergent of sqrt(2) accurate to ~4e-17, safely
    /// below one ulp for every floor taken on desk-scale windows.
    pub fn sqrt2() -> Self {
        RationalAlpha {
            num: 131_836_323,
            den: 93_222_358,
        }
    }

    pub fn of_integer(k: i64) -> Self {
        RationalAlpha {
            num: k as i128,
            den: 1,
        }
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// floor(alpha * i) in exact integer arithmetic.
    pub fn floor_times(&self, i: i64) -> i64 {
        (self.num * i as i128).div_euclid(self.den) as i64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorTag {
    Beatty(RationalAlpha),
    Counting,
    Explicit,
}

/// A bi-infinite integer sequence materialized on a finite index window.
#[derive(Clone, Debug, PartialEq)]
pub struct IntSequence {
    pub i_min: i64,
    pub i_max: i64,
    pub vals: Vec<i64>,
}

impl IntSequence {
    pub fn new(i_min: i64, vals: Vec<i64>) -> Self {
        let i_max = i_min + vals.len() as i64 - 1;
        IntSequence { i_min, i_max, vals }
    }

    pub fn at(&self, i: i64) -> Option<i64> {
        if i < self.i_min || i > self.i_max {
            None
        } else {
            Some(self.vals[(i - self.i_min) as usize])
        }
    }
}

/// Strictly increasing placements p on a window with p(0) = 0.
#[derive(Clone, Debug, PartialEq)]
pub struct GapSequence {
    pub window: (i64, i64),
    pub p: Vec<i64>,
    pub generator: GeneratorTag,
}

impl GapSequence {
    pub fn from_values(
        i_min: i64,
        p: Vec<i64>,
        generator: GeneratorTag,
    ) -> Result<Self, SequenceError> {
        if p.is_empty() {
            return Err(SequenceError::EmptyWindow(i_min, i_min - 1));
        }
        let i_max = i_min + p.len() as i64 - 1;
        for k in 1..p.len() {
            assert!(p[k - 1] < p[k], "placements must be strictly increasing");
        }
        if i_min <= 0 && 0 <= i_max {
            assert_eq!(p[(-i_min) as usize], 0, "p(0) must be 0");
        }
        Ok(GapSequence {
            window: (i_min, i_max),
            p,
            generator,
        })
    }

    pub fn p_at(&self, i: i64) -> Option<i64> {
        let (lo, hi) = self.window;
        if i < lo || i > hi {
            None
        } else {
            Some(self.p[(i - lo) as usize])
        }
    }

    /// The gap sequence g(i) = p(i) - p(i-1) on [i_min + 1, i_max].
    pub fn gaps(&self) -> IntSequence {
        let (lo, _) = self.window;
        let vals = self.p.windows(2).map(|w| w[1] - w[0]).collect();
        IntSequence::new(lo + 1, vals)
    }
}

/// p(i) = floor(alpha * i) on the window; requires alpha > 1.
pub fn beatty_gaps(
    alpha: RationalAlpha,
    window: (i64, i64),
) -> Result<GapSequence, SequenceError> {
    if alpha.num <= alpha.den || alpha.den <= 0 {
        return Err(SequenceError::AlphaOutOfRange(alpha.num, alpha.den));
    }
    let (lo, hi) = window;
    if lo > hi {
        return Err(SequenceError::EmptyWindow(lo, hi));
    }
    let p = (lo..=hi).map(|i| alpha.floor_times(i)).collect();
    GapSequence::from_values(lo, p, GeneratorTag::Beatty(alpha))
}

/// The i-th digit (i >= 1) of the word obtained by writing all natural
/// integers in order: 0123456789101112...; 0 for i <= 0.
pub fn counting_digit(i: i64) -> i64 {
    if i <= 0 {
        return 0;
    }
    // numbers with d digits occupy a block of 9 * 10^(d-1) * d positions,
    // except the first block which also holds the single digit 0
    let mut pos = i; // 1-based position in the word
    if pos == 1 {
        return 0;
    }
    pos -= 1; // skip the leading 0; now 1-based over the word 123456789101112...
    let mut digits = 1i64;
    let mut block = 9i64;
    let mut first = 1i64;
    loop {
        let span = block * digits;
        if pos <= span {
            let number = first + (pos - 1) / digits;
            let offset = ((pos - 1) % digits) as u32;
            let s = number.to_string();
            return s.as_bytes()[offset as usize] as i64 - b'0' as i64;
        }
        pos -= span;
        digits += 1;
        block *= 10;
        first *= 10;
    }
}

/// The counting word restricted to an index window.
pub fn counting_sequence(window: (i64, i64)) -> Result<IntSequence, SequenceError> {
    let (lo, hi) = window;
    if lo > hi {
        return Err(SequenceError::EmptyWindow(lo, hi));
    }
    Ok(IntSequence::new(lo, (lo..=hi).map(counting_digit).collect()))
}

/// Placements whose gaps are the counting digits shifted up by one (gaps
/// must be >= 1 for strictly increasing placements).
pub fn counting_placements(window: (i64, i64)) -> Result<GapSequence, SequenceError> {
    let (lo, hi) = window;
    if lo > hi || lo > 0 || hi < 0 {
        return Err(SequenceError::EmptyWindow(lo, hi));
    }
    let mut p = vec![0i64; (hi - lo + 1) as usize];
    let idx = |i: i64| (i - lo) as usize;
    for i in 1..=hi {
        p[idx(i)] = p[idx(i - 1)] + counting_digit(i) + 1;
    }
    for i in (lo..0).rev() {
        p[idx(i)] = p[idx(i + 1)] - (counting_digit(i + 1) + 1);
    }
    GapSequence::from_values(lo, p, GeneratorTag::Counting)
}

/// The shift action (n . x)(i) = x(n + i); the window follows the shift.
pub fn shift(x: &IntSequence, n: i64) -> Result<IntSequence, SequenceError> {
    if x.vals.is_empty() {
        return Err(SequenceError::EmptyWindow(x.i_min, x.i_max));
    }
    Ok(IntSequence {
        i_min: x.i_min - n,
        i_max: x.i_max - n,
        vals: x.vals.clone(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub n: i64,
    pub score: usize,
    pub max_score: usize,
}

/// For each shift n <= n_max, count exact matches g(i + n) = g(i) over
/// |i| <= radius. Perfect rows are the finite-window extraction candidates.
pub fn quasiperiodicity_scan(
    g: &IntSequence,
    n_max: i64,
    radius: i64,
) -> Result<Vec<ScanRow>, SequenceError> {
    if g.i_min > -radius || g.i_max < n_max + radius {
        return Err(SequenceError::InsufficientWindow(g.i_min, g.i_max));
    }
    let mut rows = Vec::new();
    for n in 1..=n_max {
        let mut score = 0usize;
        let mut max_score = 0usize;
        for i in -radius..=radius {
            let (a, b) = (g.at(i), g.at(i + n));
            if let (Some(a), Some(b)) = (a, b) {
                max_score += 1;
                if a == b {
                    score += 1;
                }
            }
        }
        rows.push(ScanRow { n, score, max_score });
    }
    Ok(rows)
}

/// An index witnessing g(i + n) != g(i) within the window, if one exists.
pub fn periodicity_witness(g: &IntSequence, n: i64) -> Option<i64> {
    for i in g.i_min..=(g.i_max - n) {
        if g.at(i) != g.at(i + n) {
            return Some(i);
        }
    }
    None
}

#[derive(Clone, Debug)]
pub struct MatchOptions {
    /// horizontal domain shift applied to mesh A before matching
    pub shift_x: f64,
    /// center of the comparison window in domain coordinates
    pub center: f64,
    /// half-width of the comparison window
    pub halfwidth: f64,
}

#[derive(Clone, Debug)]
pub struct MatchReport {
    /// best X2 translation of mesh A onto mesh B
    pub translation_x2: f64,
    /// max vertex distance after translation
    pub residual: f64,
    pub pairs: usize,
}

/// Match two meshes built on the same grid geometry: pair the vertex of A at
/// domain abscissa x with the vertex of B at x + shift_x, find the horizontal
/// translation (0, t, 0) minimizing the max vertex distance over the central
/// window, and return the residual.
pub fn surface_window_match(
    a: &SurfaceMesh,
    b: &SurfaceMesh,
    opts: &MatchOptions,
) -> Result<MatchReport, SequenceError> {
    if (a.meta.h - b.meta.h).abs() > 1e-12 || (a.meta.ell - b.meta.ell).abs() > 1e-12 {
        return Err(SequenceError::MeshesIncompatible(format!(
            "h or ell differ: ({}, {}) vs ({}, {})",
            a.meta.h, a.meta.ell, b.meta.h, b.meta.ell
        )));
    }
    let half = a.meta.h / 2.0;
    let shift_cols_f = (a.meta.x0 - b.meta.x0 + opts.shift_x) / half;
    let shift_cols = shift_cols_f.round();
    if (shift_cols_f - shift_cols).abs() > 1e-6 {
        return Err(SequenceError::MisalignedShift(opts.shift_x));
    }
    let shift_cols = shift_cols as i32;

    let mut b_index: HashMap<(i32, i32), usize> = HashMap::new();
    for (j, pr) in b.provenance.iter().enumerate() {
        if pr.copy == 0 {
            b_index.insert((pr.prow, pr.pcol), j);
        }
    }
    let mut deltas: Vec<[f64; 3]> = Vec::new();
    for (i, pr) in a.provenance.iter().enumerate() {
        if pr.copy != 0 {
            continue;
        }
        let x = a.meta.x0 + pr.pcol as f64 * half;
        if (x - opts.center).abs() > opts.halfwidth {
            continue;
        }
        if let Some(&j) = b_index.get(&(pr.prow, pr.pcol + shift_cols)) {
            let va = &a.vertices[i];
            let vb = &b.vertices[j];
            deltas.push([vb[0] - va[0], vb[1] - va[1], vb[2] - va[2]]);
        }
    }
    if deltas.is_empty() {
        return Err(SequenceError::NoOverlap);
    }
    let residual_at = |t: f64| {
        deltas
            .iter()
            .map(|d| (d[0] * d[0] + (d[1] - t) * (d[1] - t) + d[2] * d[2]).sqrt())
            .fold(0.0f64, f64::max)
    };
    let mut lo = deltas.iter().map(|d| d[1]).fold(f64::INFINITY, f64::min);
    let mut hi = deltas.iter().map(|d| d[1]).fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..100 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if residual_at(m1) <= residual_at(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let t = 0.5 * (lo + hi);
    Ok(MatchReport {
        translation_x2: t,
        residual: residual_at(t),
        pairs: deltas.len(),
    })
}
