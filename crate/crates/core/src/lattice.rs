//! Lower-triangular lattice generators.
//!
//! A lattice point is `x = G b` for an integer vector `b`, with
//! `x_i = sum_{j <= i} g_ij b_j`. Everything here is exact.

use std::path::Path;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;

/// Square generator with `g_ij = 0` for `j > i` and `g_ii > 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorMatrix {
    rows: Vec<Vec<Rational>>,
}

impl GeneratorMatrix {
    pub fn new(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidParams("generator must have at least one row".into()));
        }
        for row in &rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: row.len() });
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if let Some(j) = (i + 1..n).find(|&j| !row[j].is_zero()) {
                return Err(Error::NotLowerTriangular { row: i + 1, col: j + 1 });
            }
            if !row[i].is_positive() {
                return Err(Error::NonPositiveDiagonal(i + 1));
            }
        }
        Ok(GeneratorMatrix { rows })
    }

    /// Parses rows of `"p/q"` strings.
    pub fn from_strings<S: AsRef<str>>(rows: &[Vec<S>]) -> Result<Self> {
        let rows = rows
            .iter()
            .map(|row| row.iter().map(|s| s.as_ref().parse()).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        GeneratorMatrix::new(rows)
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &Rational {
        &self.rows[i][j]
    }

    pub fn diagonal(&self, i: usize) -> &Rational {
        &self.rows[i][i]
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.rows
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        self.rows.iter().map(|row| row.iter().map(ToString::to_string).collect()).collect()
    }

    /// Least common multiple of all entry denominators.
    pub fn common_denominator(&self) -> num_bigint::BigInt {
        self.rows
            .iter()
            .flatten()
            .fold(num_bigint::BigInt::from(1), |acc, g| acc.lcm(g.denom()))
    }
}

/// Volume of the fundamental region: the product of the diagonal.
pub fn determinant(generator: &GeneratorMatrix) -> Rational {
    (0..generator.dim()).map(|i| generator.diagonal(i).clone()).product()
}

/// The scalar `alpha` with `alpha^n |det G| = 1`, for normalized comparisons only.
pub fn scale_factor(generator: &GeneratorMatrix) -> f64 {
    let det = determinant(generator).to_f64();
    det.powf(-1.0 / generator.dim() as f64)
}

pub fn lattice_point(generator: &GeneratorMatrix, b: &[i64]) -> Result<Vec<Rational>> {
    let n = generator.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.len() });
    }
    Ok((0..n)
        .map(|i| {
            (0..=i)
                .filter(|&j| b[j] != 0)
                .map(|j| generator.entry(i, j) * &Rational::from_integer(b[j]))
                .sum()
        })
        .collect())
}

/// Forward substitution for `G b = x`. Fails unless every `b_i` is an integer.
pub fn solve_triangular(generator: &GeneratorMatrix, x: &[Rational]) -> Result<Vec<i64>> {
    let n = generator.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x.len() });
    }
    let mut b = Vec::with_capacity(n);
    for i in 0..n {
        let partial: Rational = (0..i)
            .filter(|&j| b[j] != 0)
            .map(|j| generator.entry(i, j) * &Rational::from_integer(b[j]))
            .sum();
        let bi = (&x[i] - &partial) / generator.diagonal(i);
        let bi = bi.to_i64().ok_or(Error::NotALatticePoint(i + 1))?;
        b.push(bi);
    }
    Ok(b)
}

/// A generator paired with the block side `M`, with validated radices `r_i = M / g_ii`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeSpec {
    generator: GeneratorMatrix,
    m: u64,
    radices: Vec<u64>,
}

pub fn validate_lattice(generator: GeneratorMatrix, m: u64) -> Result<LatticeSpec> {
    if m == 0 {
        return Err(Error::InvalidParams("M must be positive".into()));
    }
    let side = Rational::from_integer(m as i64);
    let radices = (0..generator.dim())
        .map(|i| {
            (&side / generator.diagonal(i))
                .to_i64()
                .filter(|&r| r > 0)
                .map(|r| r as u64)
                .ok_or(Error::NonIntegerRadix(i + 1))
        })
        .collect::<Result<Vec<_>>>()?;

    let det = determinant(&generator);
    let words: Rational = radices.iter().map(|&r| Rational::from_integer(r as i64)).product();
    debug_assert_eq!(words, side.pow(generator.dim() as u32) / &det);

    Ok(LatticeSpec { generator, m, radices })
}

impl LatticeSpec {
    pub fn generator(&self) -> &GeneratorMatrix {
        &self.generator
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn radices(&self) -> &[u64] {
        &self.radices
    }

    /// Number of distinct information words, `prod r_i`, or `None` on overflow.
    pub fn word_count(&self) -> Option<u64> {
        self.radices.iter().try_fold(1u64, |acc, &r| acc.checked_mul(r))
    }
}

/// The E8 generator: first column all 1/2, unit diagonal with -1 below it,
/// and a final diagonal entry of 2.
pub fn e8() -> GeneratorMatrix {
    let mut rows = vec![vec![Rational::zero(); 8]; 8];
    for (i, row) in rows.iter_mut().enumerate() {
        row[0] = Rational::new(1, 2);
        if i >= 1 {
            row[i] = Rational::one();
        }
        if i >= 2 {
            row[i - 1] = Rational::from_integer(-1);
        }
    }
    rows[7][7] = Rational::from_integer(2);
    GeneratorMatrix::new(rows).expect("E8 generator is lower triangular")
}

/// The `n x n` identity: the rectangular lattice of conventional q-ary codes.
pub fn rectangular(n: usize) -> GeneratorMatrix {
    let rows = (0..n)
        .map(|i| (0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }).collect())
        .collect();
    GeneratorMatrix::new(rows).expect("identity is lower triangular")
}

/// The two-dimensional example generator `[1 0; 1/2 1]`.
pub fn fig1() -> GeneratorMatrix {
    GeneratorMatrix::new(vec![
        vec![Rational::one(), Rational::zero()],
        vec![Rational::new(1, 2), Rational::one()],
    ])
    .expect("example generator is lower triangular")
}

pub const BUILTIN_NAMES: &[&str] = &["e8", "rect", "rect:<n>", "fig1"];

/// Resolves a built-in generator by name: `e8`, `fig1`, `rect` (n = 1) or `rect:<n>`.
pub fn builtin(name: &str) -> Option<GeneratorMatrix> {
    match name {
        "e8" => Some(e8()),
        "fig1" => Some(fig1()),
        "rect" => Some(rectangular(1)),
        _ => {
            let n: usize = name.strip_prefix("rect:")?.parse().ok()?;
            (n > 0).then(|| rectangular(n))
        }
    }
}

/// JSON lattice definition: `{"n": 2, "M": 5, "generator": [["1","0"],["1/2","1"]]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeFile {
    pub n: usize,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    pub generator: Vec<Vec<String>>,
}

impl LatticeFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn generator(&self) -> Result<GeneratorMatrix> {
        let g = GeneratorMatrix::from_strings(&self.generator)?;
        if g.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: g.dim() });
        }
        Ok(g)
    }
}
