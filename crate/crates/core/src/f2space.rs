//! Index sets, points, and function tables over F2^I, with Walsh-Fourier
//! analysis and Gowers uniformity norms.
//!
//! The index family I is either the edge set of K_n (`Pairs`), the edges plus
//! loops (`PairsLoops`), or an anonymous list of N positions (`Generic`).
//! A point of F2^I is a packed bit vector whose integer value doubles as the
//! position of that point in every dense table; the transform butterfly pairs
//! table positions differing in one bit, so no index translation happens in
//! hot loops.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use std::sync::OnceLock;

/// Largest N for which dense 2^N tables may be built.
pub const MAX_TABLE_BITS: u32 = 26;
/// Largest N for a packed point (bits live in a u64).
pub const MAX_POINT_BITS: u32 = 63;

/// Shared thread pool, sized by `F2LAB_THREADS` when set (0 or unset: default).
pub fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var("F2LAB_THREADS")
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool")
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum SpaceKind {
    Pairs,
    PairsLoops,
    Generic,
}

/// A fixed bijection between an index family and bit positions.
///
/// Indices are keyed by (min, max) over 1-based vertices, a loop {i} by (i,i),
/// keys sorted lexicographically. The ordering is total and identical across
/// runs and platforms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeIndexSet {
    kind: SpaceKind,
    n: u16,
    len: u32,
}

impl EdgeIndexSet {
    pub fn pairs(n: u16) -> Result<Self> {
        let len = (n as u32) * (n as u32).saturating_sub(1) / 2;
        if len > MAX_POINT_BITS {
            return Err(Error::TooLarge(format!("Pairs({n}) needs {len} bits")));
        }
        Ok(EdgeIndexSet { kind: SpaceKind::Pairs, n, len })
    }

    pub fn pairs_loops(n: u16) -> Result<Self> {
        let len = (n as u32) * (n as u32 + 1) / 2;
        if len > MAX_POINT_BITS {
            return Err(Error::TooLarge(format!("PairsLoops({n}) needs {len} bits")));
        }
        Ok(EdgeIndexSet { kind: SpaceKind::PairsLoops, n, len })
    }

    pub fn generic(len: u32) -> Result<Self> {
        if len > MAX_POINT_BITS {
            return Err(Error::TooLarge(format!("Generic({len}) exceeds {MAX_POINT_BITS} bits")));
        }
        Ok(EdgeIndexSet { kind: SpaceKind::Generic, n: 0, len })
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    /// Vertex count; 0 for Generic spaces.
    pub fn n(&self) -> u16 {
        self.n
    }

    /// Number of indices N.
    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// 2^N, guarded so dense tables stay within memory.
    pub fn table_len(&self) -> Result<usize> {
        if self.len > MAX_TABLE_BITS {
            return Err(Error::TooLarge(format!("2^{} table", self.len)));
        }
        Ok(1usize << self.len)
    }

    /// Position of the index p (1- or 2-element vertex set) under the fixed
    /// (min,max)-lex ordering.
    pub fn position(&self, p: &[u16]) -> Result<u32> {
        let (a, b) = match *p {
            [i] => (i, i),
            [i, j] if i != j => (i.min(j), i.max(j)),
            _ => return Err(Error::Malformed("index must be 1 or 2 distinct vertices".into())),
        };
        if self.kind == SpaceKind::Generic {
            return Err(Error::Malformed("Generic spaces have no vertex indexing".into()));
        }
        if a < 1 || b > self.n {
            return Err(Error::VertexOutOfRange(if a < 1 { a } else { b }));
        }
        let n = self.n as u32;
        let (a, b) = (a as u32, b as u32);
        match self.kind {
            SpaceKind::Pairs => {
                if a == b {
                    return Err(Error::LoopNotAllowed);
                }
                Ok((a - 1) * n - a * (a - 1) / 2 + (b - a - 1))
            }
            SpaceKind::PairsLoops => Ok((a - 1) * (n + 1) - a * (a - 1) / 2 + (b - a)),
            SpaceKind::Generic => unreachable!(),
        }
    }

    /// Inverse of `position`: the (min,max) key at a bit position.
    /// None for Generic spaces or out-of-range positions.
    pub fn key_at(&self, pos: u32) -> Option<(u16, u16)> {
        if pos >= self.len || self.kind == SpaceKind::Generic {
            return None;
        }
        let n = self.n as u32;
        let mut offset = 0u32;
        for i in 1..=n {
            let row = match self.kind {
                SpaceKind::Pairs => n - i,
                SpaceKind::PairsLoops => n - i + 1,
                SpaceKind::Generic => unreachable!(),
            };
            if pos < offset + row {
                let j = match self.kind {
                    SpaceKind::Pairs => i + 1 + (pos - offset),
                    _ => i + (pos - offset),
                };
                return Some((i as u16, j as u16));
            }
            offset += row;
        }
        None
    }

    /// All keys in position order.
    pub fn keys(&self) -> Vec<(u16, u16)> {
        (0..self.len).filter_map(|p| self.key_at(p)).collect()
    }
}

/// One element of F2^I as a packed bit vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GraphPoint {
    bits: u64,
    space: EdgeIndexSet,
}

impl GraphPoint {
    pub fn zero(space: EdgeIndexSet) -> Self {
        GraphPoint { bits: 0, space }
    }

    pub fn from_bits(space: EdgeIndexSet, bits: u64) -> Result<Self> {
        if space.len < 64 && bits >> space.len != 0 {
            return Err(Error::Malformed("bits beyond the space length".into()));
        }
        Ok(GraphPoint { bits, space })
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn space(&self) -> EdgeIndexSet {
        self.space
    }

    pub fn get(&self, pos: u32) -> bool {
        debug_assert!(pos < self.space.len);
        self.bits >> pos & 1 == 1
    }

    pub fn with_bit(&self, pos: u32, v: bool) -> Self {
        debug_assert!(pos < self.space.len);
        let bits = if v { self.bits | 1 << pos } else { self.bits & !(1 << pos) };
        GraphPoint { bits, space: self.space }
    }

    pub fn xor(&self, other: &GraphPoint) -> Result<GraphPoint> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(GraphPoint { bits: self.bits ^ other.bits, space: self.space })
    }

    pub fn weight(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn is_subset_of(&self, other: &GraphPoint) -> bool {
        self.space == other.space && self.bits & !other.bits == 0
    }
}

/// Dense table of complex values: entry p holds f(point-with-bit-pattern p).
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    space: EdgeIndexSet,
    values: Vec<Complex64>,
}

/// Dense table of Fourier coefficients: entry xi holds f_hat(xi).
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    space: EdgeIndexSet,
    coefficients: Vec<Complex64>,
}

impl ValueTable {
    pub fn from_values(space: EdgeIndexSet, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != space.table_len()? {
            return Err(Error::Malformed("table length must be 2^N".into()));
        }
        Ok(ValueTable { space, values })
    }

    pub fn from_fn(space: EdgeIndexSet, f: impl Fn(u64) -> Complex64) -> Result<Self> {
        let len = space.table_len()?;
        Ok(ValueTable { space, values: (0..len as u64).map(f).collect() })
    }

    pub fn constant(space: EdgeIndexSet, c: Complex64) -> Result<Self> {
        let len = space.table_len()?;
        Ok(ValueTable { space, values: vec![c; len] })
    }

    /// The Walsh character w_xi(x) = (-1)^{|x and xi|} as a table.
    pub fn walsh_character(xi: &GraphPoint) -> Result<Self> {
        ValueTable::from_fn(xi.space, |x| {
            if (x & xi.bits).count_ones() % 2 == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(-1.0, 0.0)
            }
        })
    }

    pub fn space(&self) -> EdgeIndexSet {
        self.space
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.values.len() as f64
    }

    /// f - E[f].
    pub fn centered(&self) -> ValueTable {
        let m = self.mean();
        ValueTable { space: self.space, values: self.values.iter().map(|v| v - m).collect() }
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    /// Pointwise additive derivative f(x+h) - f(x).
    pub fn derivative(&self, h: &GraphPoint) -> Result<ValueTable> {
        if h.space != self.space {
            return Err(Error::SpaceMismatch);
        }
        let v = &self.values;
        let values = (0..v.len()).map(|x| v[x ^ h.bits as usize] - v[x]).collect();
        Ok(ValueTable { space: self.space, values })
    }
}

impl Spectrum {
    pub fn from_coefficients(space: EdgeIndexSet, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != space.table_len()? {
            return Err(Error::Malformed("spectrum length must be 2^N".into()));
        }
        Ok(Spectrum { space, coefficients })
    }

    pub fn space(&self) -> EdgeIndexSet {
        self.space
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Peak |f_hat| over xi != 0, with the lexicographically least argmax.
    /// None when N = 0.
    pub fn nonzero_peak(&self) -> Option<(u64, f64)> {
        let mut best: Option<(u64, f64)> = None;
        for (xi, c) in self.coefficients.iter().enumerate().skip(1) {
            let a = c.norm();
            // Strict improvement keeps the least xi on ties.
            if best.map_or(true, |(_, b)| a > b) {
                best = Some((xi as u64, a));
            }
        }
        best
    }
}

// ===========================================================================
// Walsh transform
// ===========================================================================

/// In-place butterfly: v[x] <- sum_y v[y] (-1)^{|x and y|}, O(N 2^N).
fn butterfly(values: &mut [Complex64]) {
    let n = values.len();
    let mut h = 1;
    while h < n {
        let mut i = 0;
        while i < n {
            for j in i..i + h {
                let a = values[j];
                let b = values[j + h];
                values[j] = a + b;
                values[j + h] = a - b;
            }
            i += h * 2;
        }
        h *= 2;
    }
}

/// Same butterfly over integers; exact. Used for indicator tables, where the
/// result at xi is the integer character sum sum_x f(x) (-1)^{|x and xi|}.
pub fn butterfly_i64(values: &mut [i64]) {
    let n = values.len();
    let mut h = 1;
    while h < n {
        let mut i = 0;
        while i < n {
            for j in i..i + h {
                let a = values[j];
                let b = values[j + h];
                values[j] = a + b;
                values[j + h] = a - b;
            }
            i += h * 2;
        }
        h *= 2;
    }
}

/// Fourier transform: coefficients[xi] = E_x[f(x) (-1)^{|x and xi|}].
pub fn walsh_transform(f: &ValueTable) -> Spectrum {
    let mut values = f.values.clone();
    butterfly(&mut values);
    let scale = 1.0 / values.len() as f64;
    for v in values.iter_mut() {
        *v *= scale;
    }
    Spectrum { space: f.space, coefficients: values }
}

/// Fourier inversion: f(x) = sum_xi f_hat(xi) (-1)^{|x and xi|}.
pub fn inverse_walsh(s: &Spectrum) -> ValueTable {
    let mut values = s.coefficients.clone();
    butterfly(&mut values);
    ValueTable { space: s.space, values }
}

// ===========================================================================
// Norms
// ===========================================================================

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PNorm {
    One,
    Two,
    Four,
    Inf,
}

impl PNorm {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(PNorm::One),
            "2" => Ok(PNorm::Two),
            "4" => Ok(PNorm::Four),
            "inf" | "infinity" | "max" => Ok(PNorm::Inf),
            _ => Err(Error::UnsupportedExponent),
        }
    }
}

fn p_norm(values: &[Complex64], p: PNorm, normalized: bool) -> f64 {
    let scale = if normalized { 1.0 / values.len() as f64 } else { 1.0 };
    match p {
        PNorm::Inf => values.iter().map(|v| v.norm()).fold(0.0, f64::max),
        PNorm::One => values.iter().map(|v| v.norm()).sum::<f64>() * scale,
        PNorm::Two => (values.iter().map(|v| v.norm_sqr()).sum::<f64>() * scale).sqrt(),
        PNorm::Four => {
            (values.iter().map(|v| v.norm_sqr() * v.norm_sqr()).sum::<f64>() * scale).powf(0.25)
        }
    }
}

/// L_p norm with the expectation normalization.
pub fn lp_norm(f: &ValueTable, p: PNorm) -> f64 {
    p_norm(&f.values, p, true)
}

/// ell_p norm with the unnormalized sum.
pub fn ellp_norm(s: &Spectrum, p: PNorm) -> f64 {
    p_norm(&s.coefficients, p, false)
}

// ===========================================================================
// Gowers uniformity norms
// ===========================================================================

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GowersMethod {
    Naive,
    Recursive,
    Spectral,
}

impl GowersMethod {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(GowersMethod::Naive),
            "recursive" => Ok(GowersMethod::Recursive),
            "spectral" => Ok(GowersMethod::Spectral),
            _ => Err(Error::Malformed(format!("unknown method {s}"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GowersLimits {
    /// (d+1) * N must stay at or below this for the naive evaluator.
    pub naive_budget_bits: u32,
    pub recursive_max_d: u32,
    pub recursive_max_n: u32,
}

impl Default for GowersLimits {
    fn default() -> Self {
        GowersLimits { naive_budget_bits: 26, recursive_max_d: 4, recursive_max_n: 14 }
    }
}

/// The order-d uniformity norm of f. d = 1 is the seminorm |E[f]|, exposed as
/// the recursion base. Methods agree within 1e-9 where their domains overlap.
pub fn gowers_norm(f: &ValueTable, d: u32, method: GowersMethod) -> Result<f64> {
    gowers_norm_with_limits(f, d, method, GowersLimits::default())
}

pub fn gowers_norm_with_limits(
    f: &ValueTable,
    d: u32,
    method: GowersMethod,
    limits: GowersLimits,
) -> Result<f64> {
    if d == 0 {
        return Err(Error::UnsupportedOrder(0));
    }
    let n = f.space.len;
    match method {
        GowersMethod::Naive => {
            if (d + 1) * n > limits.naive_budget_bits {
                return Err(Error::BudgetExceeded(format!(
                    "naive gowers needs (d+1)*N = {} <= {}",
                    (d + 1) * n,
                    limits.naive_budget_bits
                )));
            }
            Ok(gowers_naive(f, d))
        }
        GowersMethod::Recursive => {
            if d > limits.recursive_max_d {
                return Err(Error::BudgetExceeded(format!(
                    "recursive gowers supports d <= {}",
                    limits.recursive_max_d
                )));
            }
            if n > limits.recursive_max_n {
                return Err(Error::BudgetExceeded(format!(
                    "recursive gowers supports N <= {}",
                    limits.recursive_max_n
                )));
            }
            let powered = pool().install(|| gowers_recursive_pow(f, d, true));
            Ok(powered.max(0.0).powf(1.0 / (1u64 << d) as f64))
        }
        GowersMethod::Spectral => {
            if d != 2 {
                return Err(Error::UnsupportedOrder(d));
            }
            Ok(ellp_norm(&walsh_transform(f), PNorm::Four))
        }
    }
}

/// Direct summation of the defining average: ||f||^{2^d} equals the mean over
/// (x, y_1..y_d) of the product of C^{|s|} f(x + sum_{i in s} y_i) over all
/// s subset of [d], where C is conjugation.
fn gowers_naive(f: &ValueTable, d: u32) -> f64 {
    let n = f.space.len;
    let size = 1u64 << n;
    let real = f.is_real();
    let values = &f.values;
    let terms: Vec<Complex64> = pool().install(|| {
        (0..size)
            .into_par_iter()
            .map(|packed_first| {
                // packed_first enumerates y_1; inner loop covers y_2..y_d and x.
                let mut sum = Complex64::new(0.0, 0.0);
                let mut ys = vec![0u64; d as usize];
                ys[0] = packed_first;
                let rest = (d - 1) * n;
                for packed_rest in 0..1u64 << rest {
                    for i in 1..d as usize {
                        ys[i] = packed_rest >> ((i - 1) as u32 * n) & (size - 1);
                    }
                    // shift[s] = XOR of ys over the subset s
                    let subsets = 1usize << d;
                    let mut shift = vec![0u64; subsets];
                    for s in 1..subsets {
                        let low = s.trailing_zeros() as usize;
                        shift[s] = shift[s & (s - 1)] ^ ys[low];
                    }
                    for x in 0..size {
                        let mut term = Complex64::new(1.0, 0.0);
                        for (s, sh) in shift.iter().enumerate() {
                            let v = values[(x ^ sh) as usize];
                            let v = if !real && s.count_ones() % 2 == 1 { v.conj() } else { v };
                            term *= v;
                        }
                        sum += term;
                    }
                }
                sum
            })
            .collect()
    });
    let total: Complex64 = terms.iter().sum();
    let denom = (size as f64).powi(d as i32 + 1);
    let avg = total / denom;
    // The average is a norm power, hence real and nonnegative up to rounding.
    avg.re.max(0.0).powf(1.0 / (1u64 << d) as f64)
}

/// ||f||_{U_d}^{2^d} by the derivative recursion
/// ||f||^{2^d} = E_h[ ||D_h f||_{U_{d-1}}^{2^{d-1}} ], base ||f||_{U_1} = |E[f]|,
/// with the multiplicative derivative D_h f(x) = f(x+h) conj(f(x)).
/// Parallel over the outermost h only; summation order is fixed.
fn gowers_recursive_pow(f: &ValueTable, d: u32, parallel: bool) -> f64 {
    if d == 1 {
        return f.mean().norm_sqr(); // |E[f]|^2
    }
    let size = f.values.len();
    let real = f.is_real();
    let per_h = |h: usize| -> f64 {
        let values = &f.values;
        let derived: Vec<Complex64> = (0..size)
            .map(|x| {
                let a = values[x ^ h];
                let b = values[x];
                if real {
                    a * b
                } else {
                    a * b.conj()
                }
            })
            .collect();
        let table = ValueTable { space: f.space, values: derived };
        gowers_recursive_pow(&table, d - 1, false)
    };
    let sum: f64 = if parallel {
        let terms: Vec<f64> = (0..size).into_par_iter().map(per_h).collect();
        terms.iter().sum()
    } else {
        (0..size).map(per_h).sum()
    };
    sum / size as f64
}
