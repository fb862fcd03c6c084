//! Driver behind the `weakamp` binary. Everything writes to a caller-supplied
//! sink so the commands can be tested without spawning a process.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Deserialize;
use weakamp_core::amplifier::{exact_success_probability, truncated_amplifier};
use weakamp_core::fock;
use weakamp_core::kerr::{self, format_sig6, ProtocolConfig};

#[derive(Debug, Parser)]
#[command(name = "weakamp", version, about = "Noiseless linear amplification by weak measurement")]
pub struct Cli {
    /// Flat `key = value` file (TOML syntax); flags override its keys.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub overrides: RunConfig,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep the homodyne outcome; write gain, both densities and fidelity as CSV.
    Fig2,
    /// Minimum window fidelity and success probability for the reference couplings.
    Table1,
    /// Best success probability of a truncated amplifier as the cutoff grows.
    Impossibility {
        #[arg(long, default_value_t = std::f64::consts::SQRT_2)]
        gain: f64,
        #[arg(long, default_value_t = 10)]
        n_max: usize,
    },
    /// Per-photon-number residuals of the weak approximation.
    Weakness {
        /// Homodyne outcome(s); defaults to the lower window edge.
        #[arg(long = "p", value_name = "P", allow_negative_numbers = true, value_delimiter = ',')]
        points: Vec<f64>,
    },
}

/// Every key is optional; missing ones fall back to `ProtocolConfig::fig2`
/// settings. `window_hi` defaults to the gain-`sqrt 2` threshold of the
/// effective `alpha` and `kappa_t`.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long = "kappa-t", global = true, allow_negative_numbers = true)]
    pub kappa_t: Option<f64>,
    #[arg(long, global = true)]
    pub truncation: Option<usize>,
    #[arg(long = "p-min", global = true, allow_negative_numbers = true)]
    pub p_min: Option<f64>,
    #[arg(long = "p-max", global = true, allow_negative_numbers = true)]
    pub p_max: Option<f64>,
    #[arg(long = "p-step", global = true, allow_negative_numbers = true)]
    pub p_step: Option<f64>,
    #[arg(long = "window-lo", global = true, allow_negative_numbers = true)]
    pub window_lo: Option<f64>,
    #[arg(long = "window-hi", global = true, allow_negative_numbers = true)]
    pub window_hi: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Keys set in `other` win.
    pub fn overridden_by(self, other: &RunConfig) -> Self {
        Self {
            alpha: other.alpha.or(self.alpha),
            beta: other.beta.or(self.beta),
            kappa_t: other.kappa_t.or(self.kappa_t),
            truncation: other.truncation.or(self.truncation),
            p_min: other.p_min.or(self.p_min),
            p_max: other.p_max.or(self.p_max),
            p_step: other.p_step.or(self.p_step),
            window_lo: other.window_lo.or(self.window_lo),
            window_hi: other.window_hi.or(self.window_hi),
            out: other.out.clone().or(self.out),
        }
    }

    /// Fill defaults without validating.
    pub fn protocol_unchecked(&self) -> ProtocolConfig {
        let d = ProtocolConfig::fig2();
        let alpha = self.alpha.unwrap_or(d.alpha);
        let kappa_t = self.kappa_t.unwrap_or(d.kappa_t);
        ProtocolConfig {
            alpha,
            beta: self.beta.unwrap_or(d.beta),
            kappa_t,
            truncation: self.truncation.unwrap_or(d.truncation),
            p_min: self.p_min.unwrap_or(d.p_min),
            p_max: self.p_max.unwrap_or(d.p_max),
            p_step: self.p_step.unwrap_or(d.p_step),
            window_lo: self.window_lo.unwrap_or(d.window_lo),
            window_hi: self.window_hi.unwrap_or_else(|| kerr::success_threshold(alpha, kappa_t)),
        }
    }

    /// Defaults filled in, then checked: positive physics, window inside grid.
    pub fn protocol(&self) -> Result<ProtocolConfig> {
        let cfg = self.protocol_unchecked();
        ensure!(cfg.truncation > 0, "truncation must be at least 1");
        ensure!(cfg.beta > 0.0, "beta = {} must be positive", cfg.beta);
        cfg.validate().context("invalid configuration")?;
        Ok(cfg)
    }
}

/// Merge the optional config file with the command-line flags.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let base = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    Ok(base.overridden_by(&cli.overrides))
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let rc = resolve(cli)?;
    match &cli.command {
        Command::Fig2 => with_output(&rc, stdout, |w| cmd_fig2(&rc.protocol()?, w)),
        Command::Table1 => with_output(&rc, stdout, cmd_table1),
        Command::Impossibility { gain, n_max } => {
            let beta = rc.beta.unwrap_or(ProtocolConfig::fig2().beta);
            with_output(&rc, stdout, |w| cmd_impossibility(*gain, *n_max, beta, w))
        }
        Command::Weakness { points } => {
            let cfg = rc.protocol_unchecked();
            let points = if points.is_empty() { vec![cfg.window_lo] } else { points.clone() };
            with_output(&rc, stdout, |w| cmd_weakness(&cfg, &points, w))
        }
    }
}

fn with_output(
    rc: &RunConfig,
    stdout: &mut dyn Write,
    body: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    match &rc.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            body(&mut w)?;
            w.flush().with_context(|| format!("writing {}", path.display()))
        }
        None => body(stdout),
    }
}

pub fn cmd_fig2(cfg: &ProtocolConfig, out: &mut dyn Write) -> Result<()> {
    let records = kerr::sweep(cfg)?;
    kerr::write_csv(&records, out)?;
    Ok(())
}

/// One computed row of the comparison table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table1Row {
    pub kappa_t: f64,
    pub beta: f64,
    pub min_fidelity: f64,
    pub success_probability: f64,
}

pub const TABLE1_SETTINGS: [(f64, f64); 3] = [(4e-5, 0.2), (2e-5, 0.2), (2e-5, 0.5)];

/// Linear-optics comparison values, quoted and never computed here.
pub const LINEAR_OPTICS_CITED: [(f64, &str, &str); 2] = [(0.2, "> 0.999", "0.5%"), (0.5, "~ 0.99", "0.5%")];

pub fn table1_rows() -> Result<Vec<Table1Row>> {
    TABLE1_SETTINGS
        .iter()
        .map(|&(kappa_t, beta)| {
            let cfg = ProtocolConfig::weak_model(kappa_t, beta);
            Ok(Table1Row {
                kappa_t,
                beta,
                min_fidelity: kerr::window_min_fidelity(&cfg)?,
                success_probability: kerr::success_probability(&cfg)?.weak,
            })
        })
        .collect()
}

pub fn cmd_table1(out: &mut dyn Write) -> Result<()> {
    writeln!(out, "{:<32} {:>5} {:>10} {:>8}  note", "model", "beta", "fidelity", "P_S")?;
    for r in table1_rows()? {
        writeln!(
            out,
            "{:<32} {:>5} {:>10.6} {:>7.2}%  computed",
            format!("weak model, kappa_T = {:e}", r.kappa_t),
            r.beta,
            r.min_fidelity,
            100.0 * r.success_probability
        )?;
    }
    for (beta, fid, ps) in LINEAR_OPTICS_CITED {
        writeln!(out, "{:<32} {:>5} {:>10} {:>8}  cited, not computed", "linear optics", beta, fid, ps)?;
    }
    Ok(())
}

/// Row `N` of the impossibility report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpossibilityRow {
    pub n: usize,
    pub max_scale_sqr: f64,
    pub success_probability: f64,
}

/// For `g > 1` the largest Kraus-valid scale of the amplifier truncated at
/// `N` is `|c_N|^2 = g^(-2N)`. For `g <= 1` the untruncated map is already a
/// contraction, so `|c|^2 = 1` and no cutoff is needed.
pub fn impossibility_rows(g: f64, n_max: usize, beta: f64) -> Result<Vec<ImpossibilityRow>> {
    ensure!(g.is_finite() && g > 0.0, "gain {g} must be positive and finite");
    let probe = fock::coherent_real(beta, 60)?;
    (0..=n_max)
        .map(|n| {
            let (max_scale_sqr, success_probability) = if g > 1.0 {
                let op = truncated_amplifier(n, g)?;
                (op.scale().norm_sqr(), op.success_probability(&probe)?)
            } else {
                (1.0, exact_success_probability(g, beta, Complex64::new(1.0, 0.0)))
            };
            Ok(ImpossibilityRow { n, max_scale_sqr, success_probability })
        })
        .collect()
}

pub fn cmd_impossibility(g: f64, n_max: usize, beta: f64, out: &mut dyn Write) -> Result<()> {
    let rows = impossibility_rows(g, n_max, beta)?;
    writeln!(out, "# gain = {g}, probe = |{beta}>")?;
    writeln!(out, "N,max_c_sqr,success_probability,ratio")?;
    let mut prev: Option<f64> = None;
    for r in rows {
        let ratio = prev.map_or("".to_string(), |p| format_sig6(r.success_probability / p));
        writeln!(
            out,
            "{},{},{},{}",
            r.n,
            format_sig6(r.max_scale_sqr),
            format_sig6(r.success_probability),
            ratio
        )?;
        prev = Some(r.success_probability);
    }
    Ok(())
}

/// Only the probe and coupling matter here, so `kappa_t = 0` (no
/// interaction, all residuals zero) is accepted.
pub fn cmd_weakness(cfg: &ProtocolConfig, points: &[f64], out: &mut dyn Write) -> Result<()> {
    if !(cfg.alpha.is_finite() && cfg.alpha > 0.0) {
        bail!("alpha = {} must be positive", cfg.alpha);
    }
    if !(cfg.kappa_t.is_finite() && cfg.kappa_t >= 0.0) {
        bail!("kappa_t = {} must be non-negative", cfg.kappa_t);
    }
    if !(cfg.beta.is_finite() && cfg.beta > 0.0) {
        bail!("beta = {} must be positive", cfg.beta);
    }
    for &p in points {
        ensure!(p.is_finite(), "outcome {p} must be finite");
        let res = kerr::protocol_weakness_residuals(cfg, p)?;
        writeln!(out, "# p = {p}, max residual = {}", format_sig6(res.max))?;
        writeln!(out, "n,r_n")?;
        for (n, r) in res.residuals.iter().enumerate() {
            writeln!(out, "{n},{}", format_sig6(*r))?;
        }
    }
    Ok(())
}
