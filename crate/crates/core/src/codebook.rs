//! Cube geometry for the codebook `C = Λ ∩ [0, D·M)^n` and its blocks.
//!
//! Blocks are half-open boxes `[d_i M, min((d_i + 1) M, D M))`. With a
//! non-integer `D` the last block on each axis is truncated.

use std::fmt;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::rational::{format_vector, Rational};

/// Default cap on enumerated codebook size.
pub const ENUMERATION_CAP: u64 = 1_000_000;

/// Code dimensions: `n` cells, block side `M`, `D` blocks per axis and `q`
/// levels, tied together by `q - 1 = D M`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeParams {
    n: usize,
    m: u64,
    d: Rational,
    q: Rational,
}

impl CodeParams {
    pub fn from_q(n: usize, m: u64, q: Rational) -> Result<Self> {
        Self::check_side(n, m)?;
        let d = (&q - &Rational::one()) / &Rational::from_integer(m as i64);
        Self::build(n, m, d, q)
    }

    pub fn from_d(n: usize, m: u64, d: Rational) -> Result<Self> {
        Self::check_side(n, m)?;
        let q = &d * &Rational::from_integer(m as i64) + Rational::one();
        Self::build(n, m, d, q)
    }

    fn check_side(n: usize, m: u64) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidParams("dimension must be positive".into()));
        }
        if m == 0 {
            return Err(Error::InvalidParams("M must be positive".into()));
        }
        Ok(())
    }

    fn build(n: usize, m: u64, d: Rational, q: Rational) -> Result<Self> {
        if d < Rational::one() {
            return Err(Error::InvalidParams(format!("D = {d} must be at least 1")));
        }
        Ok(CodeParams { n, m, d, q })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn d(&self) -> &Rational {
        &self.d
    }

    pub fn q(&self) -> &Rational {
        &self.q
    }

    /// `D M`, the exclusive upper bound of every cell value.
    pub fn cube_side(&self) -> Rational {
        &self.d * &Rational::from_integer(self.m as i64)
    }

    /// `ceil(D)`: valid block indices per axis are `0..ceil(D)`.
    pub fn blocks_per_axis(&self) -> u64 {
        self.d.ceil().to_u64().expect("D fits in u64")
    }

    /// Total number of blocks, `ceil(D)^n`, or `None` on overflow.
    pub fn block_count(&self) -> Option<u64> {
        self.blocks_per_axis().checked_pow(u32::try_from(self.n).ok()?)
    }

    pub fn block_side(&self) -> Rational {
        Rational::from_integer(self.m as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockIndex(pub Vec<u64>);

impl BlockIndex {
    pub fn zero(n: usize) -> Self {
        BlockIndex(vec![0; n])
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn is_valid(&self, params: &CodeParams) -> bool {
        let per_axis = params.blocks_per_axis();
        self.0.len() == params.n() && self.0.iter().all(|&d| d < per_axis)
    }
}

impl fmt::Display for BlockIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// A lattice point with its integer coordinates: `x = G b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codeword {
    pub x: Vec<Rational>,
    pub b: Vec<i64>,
}

impl fmt::Display for Codeword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_vector(&self.x))
    }
}

/// Half-open interval `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interval {
    pub lo: Rational,
    pub hi: Rational,
}

impl Interval {
    pub fn contains(&self, v: &Rational) -> bool {
        &self.lo <= v && v < &self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.lo >= self.hi
    }
}

pub fn block_bounds(d: &BlockIndex, params: &CodeParams) -> Vec<Interval> {
    debug_assert!(d.is_valid(params), "block index {d} out of range");
    let side = params.block_side();
    let top = params.cube_side();
    d.0.iter()
        .map(|&di| {
            let lo = &side * &Rational::from_integer(di as i64);
            let hi = (&lo + &side).min(top.clone());
            Interval { lo, hi }
        })
        .collect()
}

pub fn in_cube(x: &[Rational], params: &CodeParams) -> bool {
    let top = params.cube_side();
    x.len() == params.n() && x.iter().all(|v| !v.is_negative() && v < &top)
}

pub fn block_of(x: &[Rational], params: &CodeParams) -> Result<BlockIndex> {
    if x.len() != params.n() {
        return Err(Error::DimensionMismatch { expected: params.n(), found: x.len() });
    }
    let top = params.cube_side();
    let side = params.block_side();
    x.iter()
        .enumerate()
        .map(|(i, v)| {
            if v.is_negative() || v >= &top {
                return Err(Error::OutOfCube(i + 1));
            }
            Ok((v / &side).floor().to_u64().expect("non-negative block index"))
        })
        .collect::<Result<Vec<_>>>()
        .map(BlockIndex)
}

/// `((D M)^n / |det G|, M^n / |det G|)`: full codebook and largest subcodebook sizes.
pub fn codebook_size_formula(params: &CodeParams, det: &Rational) -> (Rational, Rational) {
    let n = params.n() as u32;
    let det = det.abs();
    let full = params.cube_side().pow(n) / &det;
    let per_block = params.block_side().pow(n) / &det;
    (full, per_block)
}

/// Bits per cell, `(1/n) log2(M^n / |det G|)`.
pub fn rate(params: &CodeParams, det: &Rational) -> f64 {
    (params.m() as f64).log2() - det.abs().to_f64().log2() / params.n() as f64
}

/// All positive-direction neighbours `d + δ`, `δ ∈ {0,1}^n`, that are valid
/// block indices, in lexicographic order. Always contains `d` itself.
pub fn neighbor_blocks(d: &BlockIndex, params: &CodeParams) -> Vec<BlockIndex> {
    let per_axis = params.blocks_per_axis();
    let choices: Vec<Vec<u64>> = d
        .0
        .iter()
        .map(|&di| [di, di + 1].into_iter().filter(|&v| v < per_axis).collect())
        .collect();
    cartesian(&choices).map(BlockIndex).collect()
}

/// Every block of the cube in lexicographic order.
pub fn all_blocks(params: &CodeParams) -> impl Iterator<Item = BlockIndex> {
    let axis: Vec<u64> = (0..params.blocks_per_axis()).collect();
    let choices = vec![axis; params.n()];
    cartesian(&choices).map(BlockIndex)
}

fn cartesian(choices: &[Vec<u64>]) -> impl Iterator<Item = Vec<u64>> {
    let choices = choices.to_vec();
    let empty = choices.iter().any(Vec::is_empty);
    let mut cursor = vec![0usize; choices.len()];
    let mut done = empty;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let item: Vec<u64> = cursor.iter().zip(&choices).map(|(&c, opts)| opts[c]).collect();
        done = true;
        for axis in (0..choices.len()).rev() {
            cursor[axis] += 1;
            if cursor[axis] < choices[axis].len() {
                done = false;
                break;
            }
            cursor[axis] = 0;
        }
        Some(item)
    })
}

/// Every lattice point in the half-open cube, found by ranging `b_1` and then
/// each later `b_i` over the interval that keeps `x_i` inside `[0, D M)`.
///
/// Fails with `TooLarge` when the volume estimate `(D M)^n / |det G|`
/// exceeds `cap`.
pub fn enumerate_codebook(lattice: &LatticeSpec, params: &CodeParams, cap: u64) -> Result<Vec<Codeword>> {
    if lattice.dim() != params.n() {
        return Err(Error::DimensionMismatch { expected: lattice.dim(), found: params.n() });
    }
    let det = crate::lattice::determinant(lattice.generator());
    let (full, _) = codebook_size_formula(params, &det);
    if full > Rational::from_integer(cap as i64) {
        return Err(Error::TooLarge { size: full.to_string(), cap });
    }

    let mut out = Vec::new();
    let mut b = Vec::with_capacity(params.n());
    let mut x = Vec::with_capacity(params.n());
    enumerate_axis(lattice, &params.cube_side(), &mut b, &mut x, &mut out, cap)?;
    Ok(out)
}

fn enumerate_axis(
    lattice: &LatticeSpec,
    top: &Rational,
    b: &mut Vec<i64>,
    x: &mut Vec<Rational>,
    out: &mut Vec<Codeword>,
    cap: u64,
) -> Result<()> {
    let g = lattice.generator();
    let i = b.len();
    if i == g.dim() {
        if out.len() as u64 >= cap {
            return Err(Error::TooLarge { size: format!("more than {cap}"), cap });
        }
        out.push(Codeword { x: x.clone(), b: b.clone() });
        return Ok(());
    }
    let partial: Rational = (0..i).map(|j| g.entry(i, j) * &Rational::from_integer(b[j])).sum();
    let diag = g.diagonal(i);
    let lo = (-&partial / diag).ceil().to_i64().expect("coefficient fits in i64");
    let hi = ((top - &partial) / diag).ceil().to_i64().expect("coefficient fits in i64");
    for bi in lo..hi {
        let xi = &partial + &(diag * &Rational::from_integer(bi));
        b.push(bi);
        x.push(xi);
        enumerate_axis(lattice, top, b, x, out, cap)?;
        b.pop();
        x.pop();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{e8, fig1, rectangular, validate_lattice};

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn fig1_params() -> CodeParams {
        CodeParams::from_d(2, 5, r("2")).unwrap()
    }

    #[test]
    fn params_bookkeeping() {
        let p = CodeParams::from_q(8, 4, r("17")).unwrap();
        assert_eq!(p.d(), &r("4"));
        let p = CodeParams::from_q(8, 3, r("17")).unwrap();
        assert_eq!(p.d(), &r("16/3"));
        assert_eq!(p.blocks_per_axis(), 6);
        let p = CodeParams::from_d(1, 4, r("3/2")).unwrap();
        assert_eq!(p.q(), &r("7"));
        assert!(CodeParams::from_d(2, 5, r("1/2")).is_err());
        assert!(CodeParams::from_q(2, 0, r("5")).is_err());
    }

    #[test]
    fn bounds_integer_d() {
        let p = fig1_params();
        let b = block_bounds(&BlockIndex(vec![0, 0]), &p);
        assert_eq!(b[0], Interval { lo: r("0"), hi: r("5") });
        assert_eq!(b[1], Interval { lo: r("0"), hi: r("5") });
        let b = block_bounds(&BlockIndex(vec![1, 1]), &p);
        assert!(b.iter().all(|iv| iv == &Interval { lo: r("5"), hi: r("10") }));
    }

    #[test]
    fn bounds_truncated() {
        let p = CodeParams::from_d(1, 4, r("3/2")).unwrap();
        let b = block_bounds(&BlockIndex(vec![1]), &p);
        assert_eq!(b[0], Interval { lo: r("4"), hi: r("6") });
    }

    #[test]
    fn block_membership() {
        let p = fig1_params();
        assert_eq!(block_of(&[r("7"), r("3/2")], &p).unwrap(), BlockIndex(vec![1, 0]));
        assert_eq!(block_of(&[r("0"), r("0")], &p).unwrap(), BlockIndex(vec![0, 0]));
        assert_eq!(block_of(&[r("4"), r("8")], &p).unwrap(), BlockIndex(vec![0, 1]));
        assert_eq!(block_of(&[r("10"), r("0")], &p).unwrap_err(), Error::OutOfCube(1));
        assert_eq!(block_of(&[r("0"), r("-1/2")], &p).unwrap_err(), Error::OutOfCube(2));
    }

    #[test]
    fn partition_is_exact() {
        let p = CodeParams::from_d(2, 4, r("3/2")).unwrap();
        let blocks: Vec<_> = all_blocks(&p).collect();
        for xi in 0..24 {
            for yi in 0..24 {
                let x = [Rational::new(xi, 4), Rational::new(yi, 4)];
                let owners: Vec<_> = blocks
                    .iter()
                    .filter(|d| block_bounds(d, &p).iter().zip(&x).all(|(iv, v)| iv.contains(v)))
                    .collect();
                assert_eq!(owners.len(), 1);
                assert_eq!(owners[0], &block_of(&x, &p).unwrap());
            }
        }
    }

    #[test]
    fn size_formulas() {
        let one = Rational::one();
        assert_eq!(codebook_size_formula(&fig1_params(), &one), (r("100"), r("25")));
        let p = CodeParams::from_d(8, 4, r("4")).unwrap();
        assert_eq!(
            codebook_size_formula(&p, &one),
            (Rational::from_integer(16i64.pow(8)), Rational::from_integer(4i64.pow(8)))
        );
        let p = CodeParams::from_d(1, 1, r("1")).unwrap();
        assert_eq!(codebook_size_formula(&p, &one), (one.clone(), one));
    }

    #[test]
    fn rates() {
        let p = CodeParams::from_d(8, 8, r("1")).unwrap();
        assert_eq!(rate(&p, &Rational::one()), 3.0);
        let p = CodeParams::from_d(3, 1, r("4")).unwrap();
        assert_eq!(rate(&p, &Rational::one()), 0.0);
        let p = CodeParams::from_d(2, 2, r("1")).unwrap();
        assert_eq!(rate(&p, &r("1/4")), 2.0);
    }

    #[test]
    fn neighbours() {
        let p = fig1_params();
        let got = neighbor_blocks(&BlockIndex(vec![0, 0]), &p);
        let want: Vec<_> = [[0, 0], [0, 1], [1, 0], [1, 1]].iter().map(|d| BlockIndex(d.to_vec())).collect();
        assert_eq!(got, want);
        assert_eq!(neighbor_blocks(&BlockIndex(vec![1, 1]), &p), vec![BlockIndex(vec![1, 1])]);

        let p = CodeParams::from_d(1, 4, r("3/2")).unwrap();
        let got = neighbor_blocks(&BlockIndex(vec![0]), &p);
        assert_eq!(got, vec![BlockIndex(vec![0]), BlockIndex(vec![1])]);
        assert!(got.iter().all(|d| block_bounds(d, &p).iter().all(|iv| !iv.is_empty())));
    }

    #[test]
    fn block_enumeration_order() {
        let p = CodeParams::from_d(2, 1, r("3")).unwrap();
        let blocks: Vec<_> = all_blocks(&p).collect();
        assert_eq!(blocks.len(), 9);
        assert!(blocks.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(p.block_count(), Some(9));
    }

    #[test]
    fn enumerate_fig1() {
        let lattice = validate_lattice(fig1(), 5).unwrap();
        let points = enumerate_codebook(&lattice, &fig1_params(), ENUMERATION_CAP).unwrap();
        assert_eq!(points.len(), 100);
        let p = fig1_params();
        for cw in &points {
            let d = block_of(&cw.x, &p).unwrap();
            assert!(d.is_valid(&p));
            assert_eq!(crate::lattice::lattice_point(lattice.generator(), &cw.b).unwrap(), cw.x);
        }
    }

    #[test]
    fn enumerate_small_rect() {
        let lattice = validate_lattice(rectangular(1), 3).unwrap();
        let p = CodeParams::from_d(1, 3, r("1")).unwrap();
        let xs: Vec<_> = enumerate_codebook(&lattice, &p, ENUMERATION_CAP)
            .unwrap()
            .into_iter()
            .map(|c| c.x[0].clone())
            .collect();
        assert_eq!(xs, vec![r("0"), r("1"), r("2")]);

        let lattice = validate_lattice(rectangular(2), 5).unwrap();
        let points = enumerate_codebook(&lattice, &fig1_params(), ENUMERATION_CAP).unwrap();
        assert_eq!(points.len(), 100);
    }

    #[test]
    fn enumerate_cap() {
        let lattice = validate_lattice(e8(), 16).unwrap();
        let p = CodeParams::from_d(8, 16, r("16")).unwrap();
        assert!(matches!(enumerate_codebook(&lattice, &p, ENUMERATION_CAP), Err(Error::TooLarge { .. })));
    }
}
