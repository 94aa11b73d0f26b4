//! Rewriting encoder and decoder.
//!
//! Information `u` is hashed per block into `a`, and `a` is placed in block
//! `d` by choosing, axis by axis, the unique shift `k_i` that puts
//! `x_i = sum_{j<i} g_ij b_j + g_ii (a_i + r_i k_i)` inside
//! `[d_i M, (d_i + 1) M)`. When rewriting, the candidate block whose
//! codeword dominates the current state and leaves the most remaining
//! volume `prod (D M - x_i)` wins.
//!
//! The search runs on integers: every coordinate is multiplied by a common
//! scale `S` (a multiple of every generator denominator and of the
//! denominator of `D M`), so lattice points, block edges and the cube
//! boundary are all integers on that grid.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::codebook::{all_blocks, block_of, neighbor_blocks, BlockIndex, CodeParams, Codeword};
use crate::error::{Error, Result};
use crate::lattice::{solve_triangular, LatticeSpec};
use crate::rational::Rational;

/// Cap on the number of blocks the exhaustive search will visit.
pub const FULL_SEARCH_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InfoWord(pub Vec<u64>);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HashedWord(pub Vec<u64>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HashKey(pub u64);

/// How the per-block hash vector is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hashing {
    Keyed(HashKey),
    /// `m = 0` for every block: the plain linear construction.
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Current block and its positive neighbours, `2^n` candidates.
    #[default]
    Neighbors,
    /// Every block of the cube.
    Full,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Neighbors => "neighbors",
            Strategy::Full => "full",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neighbors" => Ok(Strategy::Neighbors),
            "full" => Ok(Strategy::Full),
            _ => Err(Error::Parse(format!("unknown strategy {s:?} (neighbors|full)"))),
        }
    }
}

/// Whether a rewrite may leave the cells exactly as they are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RewriteRule {
    /// `x >= s` componentwise.
    #[default]
    AllowUnchanged,
    /// `x >= s` and `x != s`: the cells must actually be programmed.
    RequireChange,
}

pub fn mix64(v: u64) -> u64 {
    let mut v = v.wrapping_add(0x9E37_79B9_7F4A_7C15);
    v = (v ^ (v >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    v = (v ^ (v >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    v ^ (v >> 31)
}

/// Per-block hash vector `m_d` with `m_i` in `0..r_i`.
pub fn hash_vector(key: HashKey, d: &BlockIndex, radices: &[u64]) -> Vec<u64> {
    let z = d.as_slice().iter().fold(key.0, |z, &dj| mix64(z ^ (dj + 1)));
    radices
        .iter()
        .enumerate()
        .map(|(i, &r)| mix64(z ^ (i as u64 + 1)) % r)
        .collect()
}

fn check_word(word: &[u64], radices: &[u64]) -> Result<()> {
    if word.len() != radices.len() {
        return Err(Error::DimensionMismatch { expected: radices.len(), found: word.len() });
    }
    for (i, (&v, &r)) in word.iter().zip(radices).enumerate() {
        if v >= r {
            return Err(Error::RangeViolation { axis: i + 1, value: v, radix: r });
        }
    }
    Ok(())
}

/// `a_i = (u_i + m_i) mod r_i`.
pub fn apply_hash(u: &InfoWord, m: &[u64], radices: &[u64]) -> Result<HashedWord> {
    check_word(&u.0, radices)?;
    check_word(m, radices)?;
    Ok(HashedWord(u.0.iter().zip(m).zip(radices).map(|((&u, &m), &r)| (u + m) % r).collect()))
}

/// `u_i = (a_i - m_i) mod r_i`, the inverse of [`apply_hash`].
pub fn unhash(a: &HashedWord, m: &[u64], radices: &[u64]) -> Result<InfoWord> {
    check_word(&a.0, radices)?;
    check_word(m, radices)?;
    Ok(InfoWord(a.0.iter().zip(m).zip(radices).map(|((&a, &m), &r)| (a + r - m) % r).collect()))
}

fn ceil_div(num: i128, den: i128) -> i128 {
    debug_assert!(den > 0);
    -((-num).div_euclid(den))
}

/// Remaining volume on the integer grid, exact at any size.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum GridVolume {
    // Big only ever holds values above u128::MAX, so variant order is value order.
    Small(u128),
    Big(BigUint),
}

impl GridVolume {
    fn of(factors: impl Iterator<Item = i128>) -> GridVolume {
        let factors: Vec<u128> = factors.map(|f| f as u128).collect();
        let mut acc = 1u128;
        for &f in &factors {
            match acc.checked_mul(f) {
                Some(v) => acc = v,
                None => return GridVolume::Big(factors.iter().map(|&f| BigUint::from(f)).product()),
            }
        }
        GridVolume::Small(acc)
    }

    fn to_bigint(&self) -> BigInt {
        match self {
            GridVolume::Small(v) => BigInt::from(*v),
            GridVolume::Big(v) => BigInt::from(v.clone()),
        }
    }
}

/// A lattice point on the integer grid: `x_i = grid_x_i / S`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct GridPoint {
    pub b: Vec<i64>,
    pub x: Vec<i128>,
}

/// The memory state as seen by the search: a floor every candidate must
/// reach, and the exact scaled state when it lies on the grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct GridState {
    pub floor: Vec<i128>,
    pub exact: Option<Vec<i128>>,
    pub block: BlockIndex,
}

enum Placement {
    Inside(GridPoint),
    Phantom(usize),
    Below,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Grid {
    scale: i128,
    g: Vec<Vec<i128>>,
    side: i128,
    top: i128,
    radices: Vec<i128>,
}

impl Grid {
    fn new(lattice: &LatticeSpec, params: &CodeParams) -> Result<Self> {
        let top_rational = params.cube_side();
        let scale = lattice.generator().common_denominator().lcm(top_rational.denom());
        let overflow = || Error::InvalidParams("code too large for integer grid".into());
        let scale_r = Rational::from_bigint(scale.clone());
        let to_grid = |v: &Rational| -> Result<i128> {
            let scaled = v * &scale_r;
            debug_assert!(scaled.is_integer());
            scaled.numer().to_i128().ok_or_else(overflow)
        };
        let n = lattice.dim();
        let g = (0..n)
            .map(|i| (0..=i).map(|j| to_grid(lattice.generator().entry(i, j))).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Grid {
            scale: scale.to_i128().ok_or_else(overflow)?,
            g,
            side: to_grid(&params.block_side())?,
            top: to_grid(&top_rational)?,
            radices: lattice.radices().iter().map(|&r| r as i128).collect(),
        })
    }

    /// Sequential placement of `a` into block `d`; stops early once a
    /// coordinate falls below `floor` or past the cube.
    fn place(&self, a: &[u64], d: &[u64], floor: Option<&[i128]>) -> Placement {
        let n = a.len();
        let mut b = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(n);
        for i in 0..n {
            let (bi, xi) = self.axis_step(i, &b, a[i] as i128, d[i] as i128);
            if xi >= self.top {
                return Placement::Phantom(i + 1);
            }
            if floor.is_some_and(|f| xi < f[i]) {
                return Placement::Below;
            }
            b.push(bi);
            x.push(xi);
        }
        Placement::Inside(GridPoint { b: b.into_iter().map(|v| v as i64).collect(), x })
    }

    /// `(b_i, scaled x_i)` for axis `i` given the earlier `b_j`.
    fn axis_step(&self, i: usize, b: &[i128], a_i: i128, d_i: i128) -> (i128, i128) {
        let row = &self.g[i];
        let partial: i128 = row[..i].iter().zip(b).map(|(g, b)| g * b).sum();
        let diag = row[i];
        let k = ceil_div(d_i * self.side - partial - diag * a_i, self.side);
        let bi = a_i + self.radices[i] * k;
        (bi, partial + diag * bi)
    }

    fn volume(&self, x: &[i128]) -> GridVolume {
        GridVolume::of(x.iter().map(|&xi| self.top - xi))
    }

    fn to_rational(&self, v: i128) -> Rational {
        Rational::from_big(BigInt::from(v), BigInt::from(self.scale))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub u: InfoWord,
    pub a: HashedWord,
    pub b: Vec<i64>,
    pub block: BlockIndex,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub block: BlockIndex,
    pub codeword: Codeword,
    /// `prod (D M - x_i)` after writing `codeword`.
    pub volume: Rational,
}

/// A complete rewriting code: lattice, cube parameters and hash.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteCode {
    lattice: LatticeSpec,
    params: CodeParams,
    hashing: Hashing,
    grid: Grid,
}

impl RewriteCode {
    pub fn new(lattice: LatticeSpec, params: CodeParams, hashing: Hashing) -> Result<Self> {
        if lattice.dim() != params.n() {
            return Err(Error::DimensionMismatch { expected: lattice.dim(), found: params.n() });
        }
        if lattice.m() != params.m() {
            return Err(Error::InvalidParams(format!(
                "lattice validated for M = {} but code uses M = {}",
                lattice.m(),
                params.m()
            )));
        }
        let grid = Grid::new(&lattice, &params)?;
        Ok(RewriteCode { lattice, params, hashing, grid })
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn params(&self) -> &CodeParams {
        &self.params
    }

    pub fn hashing(&self) -> Hashing {
        self.hashing
    }

    pub fn radices(&self) -> &[u64] {
        self.lattice.radices()
    }

    pub fn dim(&self) -> usize {
        self.params.n()
    }

    pub fn hash_vector(&self, d: &BlockIndex) -> Vec<u64> {
        match self.hashing {
            Hashing::Keyed(key) => hash_vector(key, d, self.radices()),
            Hashing::Off => vec![0; self.dim()],
        }
    }

    fn check_block(&self, d: &BlockIndex) -> Result<()> {
        if d.as_slice().len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: d.as_slice().len() });
        }
        let per_axis = self.params.blocks_per_axis();
        if let Some(i) = d.as_slice().iter().position(|&di| di >= per_axis) {
            return Err(Error::OutOfCube(i + 1));
        }
        Ok(())
    }

    /// Places `a` in block `d`. Fails with `Phantom` when the block is
    /// truncated and the shaped point lands past `D M`.
    pub fn encode_in_block(&self, a: &HashedWord, d: &BlockIndex) -> Result<Codeword> {
        check_word(&a.0, self.radices())?;
        self.check_block(d)?;
        match self.grid.place(&a.0, d.as_slice(), None) {
            Placement::Inside(p) => Ok(self.codeword(&p)),
            Placement::Phantom(axis) => Err(Error::Phantom(axis)),
            Placement::Below => unreachable!("no floor given"),
        }
    }

    /// Hashes `u` for block `d` and places it there.
    pub fn encode(&self, u: &InfoWord, d: &BlockIndex) -> Result<Codeword> {
        self.check_block(d)?;
        let a = apply_hash(u, &self.hash_vector(d), self.radices())?;
        self.encode_in_block(&a, d)
    }

    pub fn decode(&self, x: &[Rational]) -> Result<Decoded> {
        let block = block_of(x, &self.params)?;
        let b = solve_triangular(self.lattice.generator(), x)?;
        let a = HashedWord(
            b.iter()
                .zip(self.radices())
                .map(|(&bi, &r)| bi.rem_euclid(r as i64) as u64)
                .collect(),
        );
        let u = unhash(&a, &self.hash_vector(&block), self.radices())?;
        Ok(Decoded { u, a, b, block })
    }

    pub fn remaining_volume(&self, x: &[Rational]) -> Rational {
        let top = self.params.cube_side();
        x.iter().map(|xi| &top - xi).product()
    }

    /// Best monotone rewrite of `u` over the current state `s`, with the
    /// unchanged state allowed as a candidate.
    pub fn select_rewrite(&self, u: &InfoWord, s: &[Rational], strategy: Strategy) -> Result<Selection> {
        self.select_rewrite_with(u, s, strategy, RewriteRule::AllowUnchanged)
    }

    pub fn select_rewrite_with(
        &self,
        u: &InfoWord,
        s: &[Rational],
        strategy: Strategy,
        rule: RewriteRule,
    ) -> Result<Selection> {
        check_word(&u.0, self.radices())?;
        if strategy == Strategy::Full {
            self.check_full_search()?;
        }
        let state = self.grid_state(s)?;
        let (block, point, volume) =
            self.select_on_grid(&u.0, &state, strategy, rule).ok_or(Error::MemoryFull)?;
        Ok(self.selection(block, &point, &volume))
    }

    /// The first write after erasure, always placed in block 0. From there
    /// every later write can move one block up on every axis, which is what
    /// guarantees `D` writes for integer `D`.
    pub fn first_write(&self, u: &InfoWord) -> Result<Selection> {
        check_word(&u.0, self.radices())?;
        let (block, point, volume) = self.first_write_on_grid(&u.0);
        Ok(self.selection(block, &point, &volume))
    }

    /// Exhaustive maximisation over every block; the reference for the
    /// neighbour-restricted search.
    pub fn full_search_oracle(&self, u: &InfoWord, s: &[Rational]) -> Result<Selection> {
        self.select_rewrite(u, s, Strategy::Full)
    }

    fn check_full_search(&self) -> Result<()> {
        match self.params.block_count() {
            Some(c) if c <= FULL_SEARCH_CAP => Ok(()),
            _ => Err(Error::TooLarge {
                size: format!("{}^{}", self.params.blocks_per_axis(), self.dim()),
                cap: FULL_SEARCH_CAP,
            }),
        }
    }

    pub(crate) fn grid_state(&self, s: &[Rational]) -> Result<GridState> {
        let block = block_of(s, &self.params)?;
        let scale = Rational::from_integer(self.grid.scale as i64);
        let mut floor = Vec::with_capacity(s.len());
        let mut exact = Some(Vec::with_capacity(s.len()));
        for v in s {
            let scaled = v * &scale;
            let c = scaled.ceil().to_i128().expect("state fits the grid");
            if !scaled.is_integer() {
                exact = None;
            }
            if let Some(e) = exact.as_mut() {
                e.push(c);
            }
            floor.push(c);
        }
        Ok(GridState { floor, exact, block })
    }

    pub(crate) fn grid_state_of(&self, p: &GridPoint) -> GridState {
        let block = BlockIndex(p.x.iter().map(|&xi| xi.div_euclid(self.grid.side) as u64).collect());
        GridState { floor: p.x.clone(), exact: Some(p.x.clone()), block }
    }

    pub(crate) fn erased_state(&self) -> GridState {
        let zero = vec![0; self.dim()];
        GridState { floor: zero.clone(), exact: Some(zero), block: BlockIndex::zero(self.dim()) }
    }

    fn hashed(&self, u: &[u64], d: &BlockIndex) -> Vec<u64> {
        let m = self.hash_vector(d);
        u.iter().zip(&m).zip(self.radices()).map(|((&u, &m), &r)| (u + m) % r).collect()
    }

    pub(crate) fn first_write_on_grid(&self, u: &[u64]) -> (BlockIndex, GridPoint, GridVolume) {
        let d = BlockIndex::zero(self.dim());
        let a = self.hashed(u, &d);
        let Placement::Inside(p) = self.grid.place(&a, d.as_slice(), Some(&self.erased_state().floor)) else {
            unreachable!("block 0 is never truncated since D >= 1");
        };
        let v = self.grid.volume(&p.x);
        (d, p, v)
    }

    pub(crate) fn select_on_grid(
        &self,
        u: &[u64],
        state: &GridState,
        strategy: Strategy,
        rule: RewriteRule,
    ) -> Option<(BlockIndex, GridPoint, GridVolume)> {
        let mut best: Option<(BlockIndex, GridPoint, GridVolume)> = None;
        let mut consider = |d: BlockIndex| {
            let a = self.hashed(u, &d);
            let Placement::Inside(p) = self.grid.place(&a, d.as_slice(), Some(&state.floor)) else {
                return;
            };
            if rule == RewriteRule::RequireChange && state.exact.as_ref() == Some(&p.x) {
                return;
            }
            let v = self.grid.volume(&p.x);
            if best.as_ref().is_none_or(|(_, _, bv)| v > *bv) {
                best = Some((d, p, v));
            }
        };
        match strategy {
            Strategy::Neighbors => neighbor_blocks(&state.block, &self.params).into_iter().for_each(&mut consider),
            Strategy::Full => all_blocks(&self.params).for_each(&mut consider),
        }
        best
    }

    /// Visits every hashed word whose placement in block `d` dominates the
    /// state, handing `(a, scaled x)` to `visit`. Prunes on each axis, so the
    /// cost tracks the number of surviving prefixes.
    pub(crate) fn for_each_in_block(
        &self,
        d: &BlockIndex,
        state: &GridState,
        rule: RewriteRule,
        visit: &mut dyn FnMut(&[u64], &[i128]),
    ) {
        let n = self.dim();
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(n);
        self.walk_axis(d.as_slice(), state, rule, true, &mut a, &mut b, &mut x, visit);
    }

    #[allow(clippy::too_many_arguments)]
    fn walk_axis(
        &self,
        d: &[u64],
        state: &GridState,
        rule: RewriteRule,
        equal_so_far: bool,
        a: &mut Vec<u64>,
        b: &mut Vec<i128>,
        x: &mut Vec<i128>,
        visit: &mut dyn FnMut(&[u64], &[i128]),
    ) {
        let i = a.len();
        if i == d.len() {
            if !(rule == RewriteRule::RequireChange && equal_so_far && state.exact.is_some()) {
                visit(a, x);
            }
            return;
        }
        for ai in 0..self.radices()[i] {
            let (bi, xi) = self.grid.axis_step(i, b, ai as i128, d[i] as i128);
            if xi >= self.grid.top || xi < state.floor[i] {
                continue;
            }
            let equal = equal_so_far && state.exact.as_ref().is_some_and(|e| e[i] == xi);
            a.push(ai);
            b.push(bi);
            x.push(xi);
            self.walk_axis(d, state, rule, equal, a, b, x, visit);
            a.pop();
            b.pop();
            x.pop();
        }
    }

    pub(crate) fn grid_volume(&self, x: &[i128]) -> GridVolume {
        self.grid.volume(x)
    }

    pub(crate) fn codeword(&self, p: &GridPoint) -> Codeword {
        Codeword { x: p.x.iter().map(|&v| self.grid.to_rational(v)).collect(), b: p.b.clone() }
    }

    pub(crate) fn selection(&self, block: BlockIndex, p: &GridPoint, volume: &GridVolume) -> Selection {
        let denom = num_traits::pow(BigInt::from(self.grid.scale), self.dim());
        let volume = if denom.is_one() {
            Rational::from_bigint(volume.to_bigint())
        } else {
            Rational::from_big(volume.to_bigint(), denom)
        };
        Selection { block, codeword: self.codeword(p), volume }
    }
}
