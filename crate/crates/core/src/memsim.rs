//! Flash memory model and write-lifetime experiments.
//!
//! Cells start erased at zero and may only increase. A lifetime trial keeps
//! writing uniformly random information words until the encoder reports
//! `MemoryFull`; the number of successful writes is the lifetime.

use std::io::Write;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::codebook::{neighbor_blocks, BlockIndex, CodeParams};
use crate::codec::{GridPoint, GridVolume, Hashing, InfoWord, RewriteCode, RewriteRule, Selection, Strategy};
use crate::error::{Error, Result};
use crate::lattice::{determinant, validate_lattice, GeneratorMatrix};
use crate::rational::Rational;

/// Current analog cell values and the number of words written so far.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryState {
    pub cells: Vec<Rational>,
    pub write_count: u64,
}

impl MemoryState {
    pub fn erased(params: &CodeParams) -> Self {
        MemoryState { cells: vec![Rational::zero(); params.n()], write_count: 0 }
    }

    pub fn is_erased(&self) -> bool {
        self.write_count == 0
    }

    /// Writes `u` with the best monotone rewrite, or into block 0 when the
    /// memory is erased. On error the state is left untouched.
    pub fn write_word(&mut self, code: &RewriteCode, u: &InfoWord, strategy: Strategy) -> Result<Selection> {
        let sel = if self.is_erased() {
            code.first_write(u)?
        } else {
            code.select_rewrite(u, &self.cells, strategy)?
        };
        debug_assert!(sel.codeword.x.iter().zip(&self.cells).all(|(x, s)| x >= s));
        self.cells = sel.codeword.x.clone();
        self.write_count += 1;
        Ok(sel)
    }
}

pub fn init_memory(params: &CodeParams) -> MemoryState {
    MemoryState::erased(params)
}

/// Options shared by lifetime trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialOptions {
    pub strategy: Strategy,
    /// Re-check monotonicity and decode the cells after every write.
    pub verify: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialResult {
    pub writes: u64,
    pub final_state: MemoryState,
}

/// One memory's lifetime under uniformly random words.
///
/// The first write goes into block 0. After that each write must move the
/// cells; otherwise a code with a single information word could rewrite
/// itself forever.
pub fn run_lifetime_trial(code: &RewriteCode, rng_seed: u64, options: TrialOptions) -> Result<TrialResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut state = code.erased_state();
    let mut current: Option<GridPoint> = None;
    let mut writes = 0u64;
    loop {
        let u: Vec<u64> = code.radices().iter().map(|&r| rng.gen_range(0..r)).collect();
        let point = if writes == 0 {
            code.first_write_on_grid(&u).1
        } else {
            match code.select_on_grid(&u, &state, options.strategy, RewriteRule::RequireChange) {
                Some((_, point, _)) => point,
                None => break,
            }
        };
        if options.verify {
            verify_write(code, current.as_ref(), &point, &u)?;
        }
        state = code.grid_state_of(&point);
        current = Some(point);
        writes += 1;
    }
    let cells = match &current {
        Some(p) => code.codeword(p).x,
        None => vec![Rational::zero(); code.dim()],
    };
    Ok(TrialResult { writes, final_state: MemoryState { cells, write_count: writes } })
}

fn verify_write(code: &RewriteCode, before: Option<&GridPoint>, after: &GridPoint, u: &[u64]) -> Result<()> {
    if let Some(prev) = before {
        if let Some(i) = prev.x.iter().zip(&after.x).position(|(p, a)| a < p) {
            return Err(Error::InvalidParams(format!("write decreased cell {}", i + 1)));
        }
    }
    let decoded = code.decode(&code.codeword(after).x)?;
    if decoded.u.0 != u {
        return Err(Error::InvalidParams(format!("readback {:?} differs from written {:?}", decoded.u.0, u)));
    }
    Ok(())
}

/// Greedy adversary: after the first write into block 0, every step writes
/// the word whose best rewrite leaves the least remaining volume, stopping
/// as soon as some word cannot be written at all. Returns the number of
/// writes achieved (at most `depth_cap`). Words are ranked with `u_1` most
/// significant; ties go to the smallest.
pub fn adversarial_min_writes(code: &RewriteCode, depth_cap: u64, word_cap: u64) -> Result<u64> {
    let words = code
        .lattice()
        .word_count()
        .filter(|&w| w <= word_cap)
        .ok_or_else(|| Error::TooLarge { size: format!("{:?}", code.lattice().word_count()), cap: word_cap })?;
    let radices = code.radices().to_vec();
    let mut state = code.erased_state();
    let mut writes = 0u64;
    let mut best: Vec<Option<GridVolume>> = vec![None; words as usize];

    while writes < depth_cap {
        let rule = if writes == 0 { RewriteRule::AllowUnchanged } else { RewriteRule::RequireChange };
        best.iter_mut().for_each(|b| *b = None);
        let blocks =
            if writes == 0 { vec![BlockIndex::zero(code.dim())] } else { neighbor_blocks(&state.block, code.params()) };
        for d in blocks {
            let m = code.hash_vector(&d);
            code.for_each_in_block(&d, &state, rule, &mut |a, x| {
                let rank = a
                    .iter()
                    .zip(&m)
                    .zip(&radices)
                    .fold(0u64, |acc, ((&a, &m), &r)| acc * r + (a + r - m) % r);
                let v = code.grid_volume(x);
                let slot = &mut best[rank as usize];
                if slot.as_ref().is_none_or(|cur| v > *cur) {
                    *slot = Some(v);
                }
            });
        }
        if best.iter().any(Option::is_none) {
            break;
        }
        let (rank, _) = best
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| a.cmp(b))
            .expect("at least one word");
        let u = unrank(rank as u64, &radices);
        let point = if writes == 0 {
            code.first_write_on_grid(&u).1
        } else {
            code.select_on_grid(&u, &state, Strategy::Neighbors, rule).expect("word was found writable").1
        };
        state = code.grid_state_of(&point);
        writes += 1;
    }
    Ok(writes)
}

fn unrank(mut rank: u64, radices: &[u64]) -> Vec<u64> {
    let mut u = vec![0; radices.len()];
    for (slot, &r) in u.iter_mut().zip(radices).rev() {
        *slot = rank % r;
        rank /= r;
    }
    u
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifetimeStats {
    pub mean: f64,
    /// Half-width of the 95% normal-approximation interval.
    pub ci95: f64,
    pub min: u64,
    pub max: u64,
}

impl LifetimeStats {
    pub fn from_samples(samples: &[u64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<u64>() as f64 / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|&w| (w as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        LifetimeStats {
            mean,
            ci95: 1.96 * var.sqrt() / n.sqrt(),
            min: samples.iter().copied().min().unwrap_or(0),
            max: samples.iter().copied().max().unwrap_or(0),
        }
    }
}

/// Lifetimes of `trials` independent memories, trial `t` seeded with
/// `base_seed + t`. The output order never depends on `jobs`.
pub fn run_trials(code: &RewriteCode, trials: u64, base_seed: u64, options: TrialOptions, jobs: usize) -> Result<Vec<u64>> {
    let run = || -> Result<Vec<u64>> {
        (0..trials)
            .into_par_iter()
            .map(|t| run_lifetime_trial(code, base_seed.wrapping_add(t), options).map(|r| r.writes))
            .collect()
    };
    if jobs <= 1 {
        return (0..trials)
            .map(|t| run_lifetime_trial(code, base_seed.wrapping_add(t), options).map(|r| r.writes))
            .collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidParams(e.to_string()))?;
    pool.install(run)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub q: u64,
    pub m: u64,
    pub d: Rational,
    pub rate: f64,
    /// `None` when the pair was infeasible; `note` says why.
    pub stats: Option<LifetimeStats>,
    pub trials: u64,
    pub seed: u64,
    pub strategy: Strategy,
    pub note: String,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub generator: GeneratorMatrix,
    pub q_values: Vec<u64>,
    pub m_values: Vec<u64>,
    pub trials: u64,
    pub base_seed: u64,
    pub hashing: Hashing,
    pub strategy: Strategy,
    pub jobs: usize,
}

pub fn build_code(generator: &GeneratorMatrix, m: u64, params: CodeParams, hashing: Hashing) -> Result<RewriteCode> {
    let lattice = validate_lattice(generator.clone(), m)?;
    RewriteCode::new(lattice, params, hashing)
}

/// Mean lifetime for every `(q, M)` pair, sorted by `(q, rate)`.
pub fn sweep(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    if config.trials == 0 {
        return Err(Error::InvalidParams("trials must be positive".into()));
    }
    let n = config.generator.dim();
    let det = determinant(&config.generator);
    let mut rows = Vec::new();
    for &q in &config.q_values {
        for &m in &config.m_values {
            let rate = (m as f64).log2() - det.to_f64().log2() / n as f64;
            let mut row = SweepRow {
                q,
                m,
                d: Rational::zero(),
                rate,
                stats: None,
                trials: config.trials,
                seed: config.base_seed,
                strategy: config.strategy,
                note: String::new(),
            };
            if m == 0 || q < 2 {
                row.note = "needs q >= 2 and M >= 1".into();
                warn!("skipping q={q} M={m}: {}", row.note);
                rows.push(row);
                continue;
            }
            row.d = Rational::new(q as i64 - 1, m as i64);
            let code = CodeParams::from_q(n, m, Rational::from_integer(q as i64))
                .and_then(|params| build_code(&config.generator, m, params, config.hashing));
            let code = match code {
                Ok(code) => code,
                Err(e) => {
                    row.note = e.to_string();
                    warn!("skipping q={q} M={m}: {e}");
                    rows.push(row);
                    continue;
                }
            };
            let options = TrialOptions { strategy: config.strategy, verify: false };
            let samples = run_trials(&code, config.trials, config.base_seed, options, config.jobs)?;
            row.stats = Some(LifetimeStats::from_samples(&samples));
            rows.push(row);
        }
    }
    rows.sort_by(|a, b| a.q.cmp(&b.q).then(a.rate.total_cmp(&b.rate)).then(a.m.cmp(&b.m)));
    Ok(rows)
}

pub const SWEEP_HEADER: [&str; 10] =
    ["q", "M", "D", "rate_bits_per_cell", "mean_writes", "ci95", "trials", "seed", "strategy", "note"];

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Parse(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER).map_err(io)?;
    for row in rows {
        let (mean, ci) = match &row.stats {
            Some(s) => (format!("{:.6}", s.mean), format!("{:.6}", s.ci95)),
            None => (String::new(), String::new()),
        };
        w.write_record([
            row.q.to_string(),
            row.m.to_string(),
            row.d.to_csv_string(),
            format!("{:.6}", row.rate),
            mean,
            ci,
            row.trials.to_string(),
            row.seed.to_string(),
            row.strategy.to_string(),
            row.note.clone(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `y` on `x`.
pub fn least_squares(points: &[(f64, f64)]) -> Result<LinearFit> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if points.len() < 2 || sxx == 0.0 {
        return Err(Error::InsufficientData("need at least two distinct D values".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = points.iter().map(|p| (p.1 - (intercept + slope * p.0)).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(LinearFit { slope, intercept, r_squared })
}

/// Fits mean lifetime against `D` at fixed `M`.
pub fn linearity_check(
    generator: &GeneratorMatrix,
    m: u64,
    d_values: &[Rational],
    trials: u64,
    base_seed: u64,
    hashing: Hashing,
    jobs: usize,
) -> Result<(LinearFit, Vec<(Rational, LifetimeStats)>)> {
    if d_values.len() < 2 {
        return Err(Error::InsufficientData("need at least two D values".into()));
    }
    let mut measured = Vec::with_capacity(d_values.len());
    for d in d_values {
        let params = CodeParams::from_d(generator.dim(), m, d.clone())?;
        let code = build_code(generator, m, params, hashing)?;
        let samples = run_trials(&code, trials, base_seed, TrialOptions::default(), jobs)?;
        measured.push((d.clone(), LifetimeStats::from_samples(&samples)));
    }
    let points: Vec<(f64, f64)> = measured.iter().map(|(d, s)| (d.to_f64(), s.mean)).collect();
    Ok((least_squares(&points)?, measured))
}
