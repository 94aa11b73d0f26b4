//! Command-line front end.
//!
//! Settings come from an optional JSON config file (`--config` or the
//! `LATTICE_REWRITE_CONFIG` environment variable), and flags override
//! file values. Exit codes: 0 success, 2 config error, 3 memory full,
//! 4 decode failure, 5 enumeration cap.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::codebook::{block_of, codebook_size_formula, enumerate_codebook, rate, CodeParams, ENUMERATION_CAP};
use crate::codec::{HashKey, Hashing, InfoWord, RewriteCode, Strategy};
use crate::error::Error;
use crate::lattice::{builtin, determinant, scale_factor, validate_lattice, GeneratorMatrix, LatticeFile, LatticeSpec};
use crate::memsim::{adversarial_min_writes, sweep, write_sweep_csv, SweepConfig, SweepRow};
use crate::rational::{parse_vector, Rational};

pub const CONFIG_ENV: &str = "LATTICE_REWRITE_CONFIG";

const DEFAULT_TRIALS: u64 = 1000;
const ADVERSARY_WORD_CAP: u64 = 1 << 20;

#[derive(Debug, Parser)]
#[command(name = "lattice-rewrite", version, about = "Lattice rewriting codes for flash memory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub flags: RunFlags,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    /// JSON config file; flags override its values.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,

    /// Built-in generator (e8, fig1, rect, rect:<n>) or lattice definition file.
    #[arg(long, global = true)]
    pub lattice: Option<String>,

    /// Block side M.
    #[arg(long = "M", global = true)]
    pub m: Option<u64>,

    /// Number of cell levels q (q - 1 = D M).
    #[arg(long, global = true)]
    pub q: Option<Rational>,

    /// Blocks per axis D, possibly fractional.
    #[arg(long = "D", global = true)]
    pub d: Option<Rational>,

    /// Hash key.
    #[arg(long, global = true)]
    pub key: Option<u64>,

    /// Base RNG seed for trials.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long, global = true)]
    pub trials: Option<u64>,

    #[arg(long, global = true)]
    pub strategy: Option<Strategy>,

    /// Use the zero hash vector in every block.
    #[arg(long, global = true)]
    pub hash_off: bool,

    /// Output file (default: stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for trials.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Print determinant, radices, codebook sizes and rate.
    Info {
        #[arg(long)]
        json: bool,
    },
    /// Write an information word over a memory state.
    Encode {
        /// Information word, e.g. 4,1.
        #[arg(long)]
        u: String,
        /// Current cell values (default: erased).
        #[arg(long)]
        state: Option<String>,
    },
    /// Recover the information word stored at a codeword.
    Decode {
        /// Cell values, e.g. 7,3/2.
        #[arg(long)]
        x: String,
    },
    /// Mean write lifetime over a (q, M) grid, as CSV.
    Sweep {
        /// Comma-separated q values.
        #[arg(long, value_delimiter = ',')]
        q_values: Vec<u64>,
        /// Comma-separated M values.
        #[arg(long = "M-values", value_delimiter = ',')]
        m_values: Vec<u64>,
    },
    /// List every codeword of the cube as CSV.
    Dump,
    /// Writes achieved by the greedy worst-case adversary.
    Adversary {
        #[arg(long, default_value_t = 10_000)]
        depth_cap: u64,
    },
}

/// Serializable run settings; every field is optional so files can be partial.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<String>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Rational>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hash_off: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_values: Option<Vec<u64>>,
    #[serde(rename = "M_values", default, skip_serializing_if = "Option::is_none")]
    pub m_values: Option<Vec<u64>>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies flag values on top of `self`. Supplying either `q` or `D`
    /// on the command line replaces both file values.
    pub fn overridden_by(mut self, flags: &RunFlags) -> Self {
        if flags.q.is_some() || flags.d.is_some() {
            self.q = flags.q.clone();
            self.d = flags.d.clone();
        }
        self.lattice = flags.lattice.clone().or(self.lattice);
        self.m = flags.m.or(self.m);
        self.key = flags.key.or(self.key);
        self.seed = flags.seed.or(self.seed);
        self.trials = flags.trials.or(self.trials);
        self.strategy = flags.strategy.or(self.strategy);
        if flags.hash_off {
            self.hash_off = Some(true);
        }
        self.out = flags.out.clone().or(self.out);
        self.jobs = flags.jobs.or(self.jobs);
        self
    }

    pub fn hashing(&self) -> Hashing {
        if self.hash_off.unwrap_or(false) {
            Hashing::Off
        } else {
            Hashing::Keyed(HashKey(self.key.unwrap_or(0)))
        }
    }

    pub fn lattice_name(&self) -> &str {
        self.lattice.as_deref().unwrap_or("e8")
    }

    /// The generator and, for definition files, the file's default `M`.
    pub fn generator(&self) -> Result<(GeneratorMatrix, Option<u64>), Error> {
        let name = self.lattice_name();
        if let Some(g) = builtin(name) {
            return Ok((g, None));
        }
        let path = Path::new(name);
        if !path.exists() {
            return Err(Error::InvalidParams(format!("unknown lattice {name:?}: not a built-in or a file")));
        }
        let file = LatticeFile::load(path)?;
        Ok((file.generator()?, file.m))
    }

    fn side(&self, file_m: Option<u64>) -> Result<u64, Error> {
        self.m.or(file_m).ok_or_else(|| Error::InvalidParams("M is required".into()))
    }

    pub fn lattice_spec(&self) -> Result<LatticeSpec, Error> {
        let (g, file_m) = self.generator()?;
        validate_lattice(g, self.side(file_m)?)
    }

    /// Code parameters from exactly one of `q` or `D`.
    pub fn code_params(&self, n: usize, m: u64) -> Result<Option<CodeParams>, Error> {
        match (&self.q, &self.d) {
            (Some(_), Some(_)) => Err(Error::InvalidParams("give exactly one of q or D".into())),
            (Some(q), None) => CodeParams::from_q(n, m, q.clone()).map(Some),
            (None, Some(d)) => CodeParams::from_d(n, m, d.clone()).map(Some),
            (None, None) => Ok(None),
        }
    }

    pub fn code(&self) -> Result<RewriteCode, Error> {
        let lattice = self.lattice_spec()?;
        let params = self
            .code_params(lattice.dim(), lattice.m())?
            .ok_or_else(|| Error::InvalidParams("one of q or D is required".into()))?;
        RewriteCode::new(lattice, params, self.hashing())
    }
}

/// A failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::MemoryFull => 3,
            Error::NotALatticePoint(_) => 4,
            Error::TooLarge { .. } => 5,
            _ => 2,
        };
        CliError { code, message: err.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError { code: 2, message: err.to_string() }
    }
}

fn config_error(message: impl Into<String>) -> CliError {
    CliError { code: 2, message: message.into() }
}

/// Runs one parsed command. Reports go to `stdout`, diagnostics to `stderr`.
pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let base = match &cli.flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let config = base.overridden_by(&cli.flags);
    match &cli.command {
        Command::Info { json } => cmd_info(&config, *json, stdout),
        Command::Encode { u, state } => cmd_encode(&config, u, state.as_deref(), stdout),
        Command::Decode { x } => cmd_decode(&config, x, stdout),
        Command::Sweep { q_values, m_values } => {
            let mut config = config;
            if !q_values.is_empty() {
                config.q_values = Some(q_values.clone());
            }
            if !m_values.is_empty() {
                config.m_values = Some(m_values.clone());
            }
            cmd_sweep(&config, stdout, stderr)
        }
        Command::Dump => cmd_dump_codebook(&config, stdout),
        Command::Adversary { depth_cap } => cmd_adversary(&config, *depth_cap, stdout),
    }
}

fn with_output<F>(config: &RunConfig, stdout: &mut dyn Write, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    match &config.out {
        Some(path) => {
            let mut buf = Vec::new();
            body(&mut buf)?;
            std::fs::write(path, buf)?;
            Ok(())
        }
        None => body(stdout),
    }
}

pub fn cmd_info(config: &RunConfig, as_json: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let lattice = config.lattice_spec()?;
    let det = determinant(lattice.generator());
    let alpha = scale_factor(lattice.generator());
    let params = config.code_params(lattice.dim(), lattice.m())?;
    let radices = lattice.radices().iter().map(ToString::to_string).collect::<Vec<_>>().join(",");

    let mut fields: Vec<(&str, String)> = vec![
        ("lattice", config.lattice_name().to_string()),
        ("n", lattice.dim().to_string()),
        ("M", lattice.m().to_string()),
        ("det", det.to_string()),
        ("alpha", format!("{alpha}")),
        ("radices", radices),
    ];
    if let Some(p) = &params {
        let (full, per_block) = codebook_size_formula(p, &det);
        fields.extend([
            ("D", p.d().to_string()),
            ("q", p.q().to_string()),
            ("codebook_size", full.to_string()),
            ("subcodebook_max", per_block.to_string()),
            ("rate_bits_per_cell", format!("{}", rate(p, &det))),
        ]);
    }

    if as_json {
        let report = json!({
            "lattice": config.lattice_name(),
            "n": lattice.dim(),
            "M": lattice.m(),
            "det": det.to_string(),
            "alpha": alpha,
            "radices": lattice.radices(),
            "D": params.as_ref().map(|p| p.d().to_string()),
            "q": params.as_ref().map(|p| p.q().to_string()),
            "codebook_size": params.as_ref().map(|p| codebook_size_formula(p, &det).0.to_string()),
            "subcodebook_max": params.as_ref().map(|p| codebook_size_formula(p, &det).1.to_string()),
            "rate_bits_per_cell": params.as_ref().map(|p| rate(p, &det)),
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("report serializes"))?;
    } else {
        for (k, v) in fields {
            writeln!(out, "{k}: {v}")?;
        }
    }
    Ok(())
}

fn parse_word(text: &str) -> Result<InfoWord, CliError> {
    text.split(',')
        .map(|s| s.trim().parse::<u64>().map_err(|_| config_error(format!("bad information symbol {s:?}"))))
        .collect::<Result<Vec<_>, _>>()
        .map(InfoWord)
}

pub fn cmd_encode(config: &RunConfig, u: &str, state: Option<&str>, out: &mut dyn Write) -> Result<(), CliError> {
    let code = config.code()?;
    let u = parse_word(u)?;
    let sel = match state {
        Some(text) => {
            let s = parse_vector(text)?;
            if s.len() != code.dim() {
                return Err(Error::DimensionMismatch { expected: code.dim(), found: s.len() }.into());
            }
            // The state must be a point of the cube before a rewrite can be attempted.
            block_of(&s, code.params())?;
            code.select_rewrite(&u, &s, config.strategy.unwrap_or_default())?
        }
        None => code.first_write(&u)?,
    };
    writeln!(out, "block: {}", sel.block)?;
    writeln!(out, "codeword: {}", sel.codeword)?;
    writeln!(out, "b: {}", sel.codeword.b.iter().map(ToString::to_string).collect::<Vec<_>>().join(","))?;
    writeln!(out, "remaining_volume: {}", sel.volume)?;
    Ok(())
}

pub fn cmd_decode(config: &RunConfig, x: &str, out: &mut dyn Write) -> Result<(), CliError> {
    let code = config.code()?;
    let x = parse_vector(x)?;
    let decoded = code.decode(&x).map_err(|e| match e {
        Error::OutOfCube(_) | Error::NotALatticePoint(_) => CliError { code: 4, message: e.to_string() },
        other => other.into(),
    })?;
    let u = decoded.u.0.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
    writeln!(out, "u: {u}")?;
    writeln!(out, "block: {}", decoded.block)?;
    Ok(())
}

pub fn cmd_sweep(config: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let (generator, _) = config.generator()?;
    let trials = config.trials.unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(config_error("trials must be positive"));
    }
    let q_values = config.q_values.clone().filter(|v| !v.is_empty()).ok_or_else(|| config_error("q_values required"))?;
    let m_values = config.m_values.clone().filter(|v| !v.is_empty()).ok_or_else(|| config_error("M_values required"))?;
    let sweep_config = SweepConfig {
        generator,
        q_values,
        m_values,
        trials,
        base_seed: config.seed.unwrap_or(0),
        hashing: config.hashing(),
        strategy: config.strategy.unwrap_or_default(),
        jobs: config.jobs.unwrap_or(1),
    };
    let rows = sweep(&sweep_config)?;

    let to_file = config.out.is_some();
    with_output(config, stdout, |w| Ok(write_sweep_csv(&rows, w)?))?;
    let summary: &mut dyn Write = if to_file { stdout } else { stderr };
    write_summary(&rows, summary)?;

    if rows.iter().all(|r| r.stats.is_none()) {
        return Err(config_error("no feasible (q, M) pair in the sweep"));
    }
    Ok(())
}

fn write_summary(rows: &[SweepRow], out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "{:>6} {:>6} {:>8} {:>6} {:>12} {:>10}  note", "q", "M", "D", "rate", "mean_writes", "ci95")?;
    for row in rows {
        let (mean, ci) = match &row.stats {
            Some(s) => (format!("{:.3}", s.mean), format!("{:.3}", s.ci95)),
            None => ("-".into(), "-".into()),
        };
        writeln!(
            out,
            "{:>6} {:>6} {:>8} {:>6.3} {:>12} {:>10}  {}",
            row.q,
            row.m,
            row.d.to_csv_string(),
            row.rate,
            mean,
            ci,
            row.note
        )?;
    }
    Ok(())
}

pub fn cmd_dump_codebook(config: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let code = config.code()?;
    let points = enumerate_codebook(code.lattice(), code.params(), ENUMERATION_CAP)?;
    let n = code.dim();
    let io = |e: csv::Error| CliError { code: 2, message: e.to_string() };
    with_output(config, stdout, |w| {
        let mut csv = csv::Writer::from_writer(w);
        let header: Vec<String> = ["x", "b", "d", "a", "u"]
            .iter()
            .flat_map(|col| (1..=n).map(move |i| format!("{col}{i}")))
            .collect();
        csv.write_record(&header).map_err(io)?;
        for cw in &points {
            let dec = code.decode(&cw.x)?;
            let mut record: Vec<String> = cw.x.iter().map(ToString::to_string).collect();
            record.extend(dec.b.iter().map(ToString::to_string));
            record.extend(dec.block.as_slice().iter().map(ToString::to_string));
            record.extend(dec.a.0.iter().map(ToString::to_string));
            record.extend(dec.u.0.iter().map(ToString::to_string));
            csv.write_record(&record).map_err(io)?;
        }
        csv.flush()?;
        Ok(())
    })
}

pub fn cmd_adversary(config: &RunConfig, depth_cap: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let code = config.code()?;
    let writes = adversarial_min_writes(&code, depth_cap, ADVERSARY_WORD_CAP)?;
    writeln!(out, "writes: {writes}")?;
    writeln!(out, "D: {}", code.params().d())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> Result<String, CliError> {
        let cli = Cli::try_parse_from(std::iter::once("lattice-rewrite").chain(args.iter().copied()))
            .map_err(|e| config_error(e.to_string()))?;
        let mut out = Vec::new();
        let mut err = Vec::new();
        run(&cli, &mut out, &mut err)?;
        Ok(String::from_utf8(out).unwrap())
    }

    #[test]
    fn info_e8() {
        let text = run_args(&["info", "--lattice", "e8", "--M", "4", "--q", "17"]).unwrap();
        assert!(text.contains("det: 1\n"));
        assert!(text.contains("radices: 8,4,4,4,4,4,4,2\n"));
        assert!(text.contains("D: 4\n"));
        assert!(text.contains("rate_bits_per_cell: 2\n"));
        assert!(text.contains("alpha: 1\n"));
    }

    #[test]
    fn info_json() {
        let text = run_args(&["info", "--json", "--lattice", "rect:2", "--M", "5", "--D", "2"]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["codebook_size"], "100");
        assert_eq!(v["subcodebook_max"], "25");
        assert_eq!(v["radices"], json!([5, 5]));
    }

    #[test]
    fn info_bad_radix() {
        let err = run_args(&["info", "--lattice", "e8", "--M", "3"]).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("axis 8"));
    }

    #[test]
    fn encode_worked_example() {
        let text =
            run_args(&["encode", "--lattice", "fig1", "--M", "5", "--D", "2", "--hash-off", "--u", "4,1", "--state", "2,4"])
                .unwrap();
        assert!(text.contains("block: 0,1\n"));
        assert!(text.contains("codeword: 4,8\n"));
        assert!(text.contains("remaining_volume: 12\n"));
    }

    #[test]
    fn encode_zero() {
        let text = run_args(&["encode", "--lattice", "fig1", "--M", "5", "--D", "2", "--hash-off", "--u", "0,0"]).unwrap();
        assert!(text.contains("codeword: 0,0\n"));
    }

    #[test]
    fn encode_full_memory() {
        let err = run_args(&["encode", "--lattice", "fig1", "--M", "5", "--D", "2", "--u", "1,1", "--state", "9.5,9.5"])
            .unwrap_err();
        assert_eq!(err.code, 3);
    }

    #[test]
    fn decode_paths() {
        let base = ["decode", "--lattice", "fig1", "--M", "5", "--D", "2", "--hash-off", "--x"];
        let text = run_args(&[&base[..], &["7,3/2"]].concat()).unwrap();
        assert!(text.contains("u: 2,3\n") && text.contains("block: 1,0\n"));
        let text = run_args(&[&base[..], &["0,0"]].concat()).unwrap();
        assert!(text.contains("u: 0,0\n"));
        assert_eq!(run_args(&[&base[..], &["1/3,0"]].concat()).unwrap_err().code, 4);
    }

    #[test]
    fn q_and_d_conflict() {
        let err = run_args(&["info", "--lattice", "fig1", "--M", "5", "--D", "2", "--q", "11"]).unwrap_err();
        assert_eq!(err.code, 2);
    }

    #[test]
    fn dump_small() {
        let text = run_args(&["dump", "--lattice", "rect", "--M", "2", "--D", "1"]).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "x1,b1,d1,a1,u1");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,0,0,") && lines[2].starts_with("1,1,0,"));
    }

    #[test]
    fn dump_cap() {
        assert_eq!(run_args(&["dump", "--lattice", "e8", "--M", "16", "--D", "16"]).unwrap_err().code, 5);
    }

    #[test]
    fn sweep_zero_trials() {
        let err = run_args(&["sweep", "--trials", "0", "--q-values", "17", "--M-values", "4"]).unwrap_err();
        assert_eq!(err.code, 2);
    }

    #[test]
    fn config_roundtrip() {
        let cfg = RunConfig {
            lattice: Some("fig1".into()),
            m: Some(5),
            d: Some("3/2".parse().unwrap()),
            key: Some(u64::MAX),
            seed: Some(9),
            trials: Some(10),
            strategy: Some(Strategy::Full),
            hash_off: Some(false),
            out: Some(PathBuf::from("out.csv")),
            jobs: Some(2),
            q_values: Some(vec![17, 33]),
            m_values: Some(vec![2, 4]),
            ..Default::default()
        };
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = RunConfig { q: Some(Rational::from_integer(17)), m: Some(4), key: Some(1), ..Default::default() };
        let flags = RunFlags { d: Some(Rational::from_integer(2)), key: Some(5), ..Default::default() };
        let merged = file.overridden_by(&flags);
        assert_eq!(merged.q, None);
        assert_eq!(merged.d, Some(Rational::from_integer(2)));
        assert_eq!(merged.key, Some(5));
        assert_eq!(merged.m, Some(4));
    }

    #[test]
    fn lattice_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fig1.json");
        std::fs::write(&path, r#"{"n": 2, "M": 5, "generator": [["1","0"],["1/2","1"]]}"#).unwrap();
        let text = run_args(&["info", "--lattice", path.to_str().unwrap(), "--D", "2"]).unwrap();
        assert!(text.contains("codebook_size: 100\n"));
        assert!(text.contains("M: 5\n"));
        assert_eq!(run_args(&["info", "--lattice", "nope", "--M", "2"]).unwrap_err().code, 2);
    }
}
