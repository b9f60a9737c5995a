//! Experiment runner behind the `ips` binary.
//!
//! Each subcommand reads its parameters from flags and, optionally, from a
//! TOML or JSON file given with `--config`; flags win over the file. The
//! master seed comes from `--seed`, then `IPS_SEED`, then the file. Results
//! go to a CSV written atomically, followed by a manifest JSON next to it.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::couplings::{
    ann_coal_coupling, coupling_check, dimension_coupling, double_death_coupling, lambda_coupling,
    range_coupling,
};
use crate::duality::{
    generator_duality_residual, generator_matrix, pathwise_duality_assert, InitLaw, Mode,
};
use crate::error::Error;
use crate::estimators::{
    clustering_stats, invariant_density, lambda_c_estimate, magnetization_frozen_boundary,
    theta_curve, SurvivalPlan,
};
use crate::lattice::{Convention, Lattice, LatticeSpec};
use crate::meanfield::{bifurcation, integrate_ode, DriftSpec, Family};
use crate::models::{self, ModelSpec};
use crate::percolation::{
    contact_to_percolation, good_event_probability, kdep_couple, peierls_bound,
    percolation_theta, phi_product_field, sample_bond_field, ContactChain,
};
use crate::rng::{derive_seed, replica_rng};
use crate::stats::iid_bernoulli_pair_test;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ips", version, about = "Interacting particle system experiments")]
pub struct Cli {
    /// TOML or JSON file with parameters for the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides IPS_SEED and the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output CSV path.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a model and report survival, density, magnetisation or clusters.
    Simulate(SimulateArgs),
    /// Survival proxy over a grid of infection rates, optionally with a
    /// bisection for the critical rate.
    ThetaCurve(ThetaArgs),
    /// Mean-field ODE paths and fixed-point diagrams.
    Meanfield(MeanfieldArgs),
    /// Pathwise or generator duality checks.
    DualityCheck(DualityArgs),
    /// Oriented bond percolation.
    Percolation(PercolationArgs),
    /// Coupling of a dependent Bernoulli field to an i.i.d. one.
    Kdep(KdepArgs),
    /// Contact process versus oriented percolation.
    Compare(CompareArgs),
    /// Order-preserving couplings of pairs of models.
    Couple(CoupleArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::ThetaCurve(_) => "theta-curve",
            Command::Meanfield(_) => "meanfield",
            Command::DualityCheck(_) => "duality-check",
            Command::Percolation(_) => "percolation",
            Command::Kdep(_) => "kdep",
            Command::Compare(_) => "compare",
            Command::Couple(_) => "couple",
        }
    }

    fn flags(&self) -> Value {
        let v = match self {
            Command::Simulate(a) => serde_json::to_value(a),
            Command::ThetaCurve(a) => serde_json::to_value(a),
            Command::Meanfield(a) => serde_json::to_value(a),
            Command::DualityCheck(a) => serde_json::to_value(a),
            Command::Percolation(a) => serde_json::to_value(a),
            Command::Kdep(a) => serde_json::to_value(a),
            Command::Compare(a) => serde_json::to_value(a),
            Command::Couple(a) => serde_json::to_value(a),
        };
        v.expect("flag structs serialise")
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    /// Model name (contact, voter, ising, potts, ...).
    #[arg(long)]
    pub model: Option<String>,
    /// survival | density | magnetization | clusters
    #[arg(long)]
    pub observable: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub q: Option<u8>,
    /// Lattice dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Lattice side.
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    /// ones | zeros | product:<p>
    #[arg(long)]
    pub init: Option<String>,
    /// Sample times `a:b:step` for density and cluster output.
    #[arg(long)]
    pub times: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThetaArgs {
    /// Grid `a:b:step`.
    #[arg(long)]
    pub lambdas: Option<String>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Bisection bracket `lo:hi` for the critical rate.
    #[arg(long)]
    pub bracket: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Survival level that defines the crossing.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeanfieldArgs {
    /// ising | contact | voter | sped_voter | coop_death | coop_rw |
    /// biased_voter_death | np_two_alpha
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long)]
    pub a01: Option<f64>,
    #[arg(long)]
    pub a10: Option<f64>,
    /// Sweep of the family's main parameter, `a:b:step`.
    #[arg(long)]
    pub bifurcation: Option<String>,
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualityArgs {
    /// contact:self | bran:parity | voter:crw | covo:q
    #[arg(long)]
    pub pair: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<f64>,
    #[arg(long)]
    pub sites: Option<usize>,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PercolationArgs {
    #[arg(long)]
    pub d: Option<usize>,
    /// Single value or grid `a:b:step`.
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub replicas: Option<u64>,
    /// Write one bond field of this side instead of survival estimates.
    #[arg(long)]
    pub dump_side: Option<usize>,
    /// Also report the Peierls tail from `2m`.
    #[arg(long)]
    pub peierls_m: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KdepArgs {
    /// phi | contact
    #[arg(long)]
    pub field: Option<String>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    /// Number of indices (phi field) or slabs (contact field).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t: Option<f64>,
    /// Cells of the hidden-variable grid for the contact field.
    #[arg(long)]
    pub cells: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub windows: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoupleArgs {
    /// lambda | ann-coal | double-death | dimension | range
    #[arg(long)]
    pub coupling: Option<String>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t: Option<f64>,
    /// Ring length or torus side.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long)]
    pub range: Option<usize>,
}

/// Fully resolved experiment: what the config hash covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: String,
    pub seed: u64,
    pub params: Value,
}

impl ExperimentConfig {
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises");
        let d = Sha256::digest(&bytes);
        d.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Error with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn config(msg: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, kind: "config", message: msg.into() }
    }

    pub fn report(&self) -> String {
        json!({ "error": self.kind, "message": self.message, "exit_code": self.code }).to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::Io(_) => "io",
            Error::Invariant(_) => "invariant",
            _ => "config",
        };
        let code = if kind == "invariant" { EXIT_VIOLATION } else { EXIT_CONFIG };
        Self { code, kind, message: e.to_string() }
    }
}

/// What a command produced: CSV body, summary values and whether the checked
/// invariant held.
pub struct Outcome {
    pub csv: String,
    pub results: Value,
    pub passed: bool,
    /// Extra files written next to the CSV (counterexample dumps).
    pub extra: Vec<(String, String)>,
}

impl Outcome {
    fn ok(csv: String, results: Value) -> Self {
        Self { csv, results, passed: true, extra: Vec::new() }
    }
}

fn read_config_file(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    } else {
        let v: toml::Value =
            toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        serde_json::to_value(v).map_err(|e| CliError::config(e.to_string()))
    }
}

/// Overlays the non-null flag values on the file values.
fn merge(file: Value, flags: Value) -> Value {
    let mut out = match file {
        Value::Object(m) => m,
        _ => Default::default(),
    };
    if let Value::Object(f) = flags {
        for (k, v) in f {
            if !v.is_null() {
                out.insert(k, v);
            }
        }
    }
    Value::Object(out)
}

/// Resolves flags, config file and environment into a config plus the run
/// options that do not affect outputs.
pub fn resolve(cli: &Cli) -> Result<(ExperimentConfig, PathBuf, Option<usize>), CliError> {
    let mut file = match &cli.config {
        Some(p) => read_config_file(p)?,
        None => json!({}),
    };
    let mut file_seed = None;
    let mut file_out = None;
    let mut file_threads = None;
    if let Value::Object(m) = &mut file {
        if let Some(c) = m.remove("command") {
            if c.as_str() != Some(cli.command.name()) {
                return Err(CliError::config(format!(
                    "config file is for command {c}, not {}",
                    cli.command.name()
                )));
            }
        }
        file_seed = m.remove("seed").map(|v| {
            v.as_u64().ok_or_else(|| CliError::config("seed must be a nonnegative integer"))
        });
        file_out = m.remove("out").and_then(|v| v.as_str().map(PathBuf::from));
        file_threads = m.remove("threads").and_then(|v| v.as_u64()).map(|v| v as usize);
    }
    let env_seed = match std::env::var("IPS_SEED") {
        Ok(s) => Some(s.trim().parse::<u64>().map_err(|_| CliError::config(format!("IPS_SEED={s} is not an integer")))?),
        Err(_) => None,
    };
    let seed = match (cli.seed, env_seed, file_seed) {
        (Some(s), _, _) => s,
        (None, Some(s), _) => s,
        (None, None, Some(s)) => s?,
        _ => 0,
    };
    let params = merge(file, cli.command.flags());
    // Round-trip through the typed struct to reject unknown keys and bad types.
    check_params(cli.command.name(), &params)?;
    let out = cli
        .out
        .clone()
        .or(file_out)
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", cli.command.name())));
    Ok((
        ExperimentConfig { command: cli.command.name().to_string(), seed, params },
        out,
        cli.threads.or(file_threads),
    ))
}

fn typed<T: for<'de> Deserialize<'de>>(params: &Value) -> Result<T, CliError> {
    serde_json::from_value(params.clone()).map_err(|e| CliError::config(format!("invalid parameters: {e}")))
}

fn check_params(command: &str, params: &Value) -> Result<(), CliError> {
    match command {
        "simulate" => typed::<SimulateArgs>(params).map(|_| ()),
        "theta-curve" => typed::<ThetaArgs>(params).map(|_| ()),
        "meanfield" => typed::<MeanfieldArgs>(params).map(|_| ()),
        "duality-check" => typed::<DualityArgs>(params).map(|_| ()),
        "percolation" => typed::<PercolationArgs>(params).map(|_| ()),
        "kdep" => typed::<KdepArgs>(params).map(|_| ()),
        "compare" => typed::<CompareArgs>(params).map(|_| ()),
        "couple" => typed::<CoupleArgs>(params).map(|_| ()),
        other => Err(CliError::config(format!("unknown command {other}"))),
    }
}

/// Runs a resolved config and returns its outputs without touching disk.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let seed = cfg.seed;
    match cfg.command.as_str() {
        "simulate" => run_simulate(&typed(&cfg.params)?, seed),
        "theta-curve" => run_theta(&typed(&cfg.params)?, seed),
        "meanfield" => run_meanfield(&typed(&cfg.params)?),
        "duality-check" => run_duality(&typed(&cfg.params)?, seed),
        "percolation" => run_percolation(&typed(&cfg.params)?, seed),
        "kdep" => run_kdep(&typed(&cfg.params)?, seed),
        "compare" => run_compare(&typed(&cfg.params)?, seed),
        "couple" => run_couple(&typed(&cfg.params)?, seed),
        other => Err(CliError::config(format!("unknown command {other}"))),
    }
}

/// Parses `a:b:step` (inclusive, tolerant to rounding) or a single number.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| CliError::config(format!("bad number {x:?} in {s:?}")));
    match parts.len() {
        1 => Ok(vec![num(parts[0])?]),
        3 => {
            let (a, b, h) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if !(h > 0.0) || b < a {
                return Err(CliError::config(format!("grid {s:?} needs a <= b and step > 0")));
            }
            let n = ((b - a) / h + 1e-9).floor() as usize;
            if n > 1_000_000 {
                return Err(CliError::config(format!("grid {s:?} has too many points")));
            }
            Ok((0..=n).map(|k| a + h * k as f64).collect())
        }
        _ => Err(CliError::config(format!("expected a number or a:b:step, got {s:?}"))),
    }
}

fn parse_pair(s: &str) -> Result<(f64, f64), CliError> {
    let g: Vec<&str> = s.split(':').collect();
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| CliError::config(format!("bad number in {s:?}")));
    if g.len() != 2 {
        return Err(CliError::config(format!("expected lo:hi, got {s:?}")));
    }
    Ok((num(g[0])?, num(g[1])?))
}

/// Shortest decimal that round-trips, so CSV bytes depend only on values.
fn f(v: f64) -> String {
    format!("{v}")
}

fn parse_init(s: &str) -> Result<InitLaw, CliError> {
    match s {
        "ones" => Ok(InitLaw::Ones),
        "zeros" => Ok(InitLaw::Zero),
        _ => match s.strip_prefix("product:") {
            Some(p) => {
                let p: f64 = p.parse().map_err(|_| CliError::config(format!("bad init {s:?}")))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(CliError::config("product density must lie in [0, 1]"));
                }
                Ok(InitLaw::Bernoulli(p))
            }
            None => Err(CliError::config(format!("init must be ones, zeros or product:<p>, got {s:?}"))),
        },
    }
}

fn torus(d: usize, l: usize) -> Result<Arc<Lattice>, CliError> {
    let spec = if d == 1 { LatticeSpec::ring(l) } else { LatticeSpec::torus(d, l) };
    Ok(Arc::new(Lattice::new(spec)?))
}

/// Builds a named model on a lattice.
pub fn build_model(name: &str, a: &SimulateArgs, lattice: &Arc<Lattice>) -> Result<ModelSpec, CliError> {
    let lambda = a.lambda.unwrap_or(1.0);
    let m = match name {
        "contact" => models::contact(lattice, lambda, a.delta.unwrap_or(1.0)),
        "voter" => models::voter(lattice),
        "biased_voter" => models::biased_voter(lattice, a.s.unwrap_or(0.0)),
        "contact_voter" => models::contact_voter(lattice, lambda, a.gamma.unwrap_or(1.0)),
        "ising" => models::ising_glauber(lattice, a.beta.unwrap_or(1.0)),
        "potts" => models::potts_glauber(lattice, a.q.unwrap_or(3), a.beta.unwrap_or(1.0)),
        "neuhauser_pacala" => models::neuhauser_pacala(lattice, a.alpha.unwrap_or(0.5)),
        "threshold_voter" => models::threshold_voter(lattice),
        "coalescing_rw" => models::coalescing_rw(lattice),
        "annihilating_rw" => models::annihilating_rw(lattice),
        "exclusion" => models::exclusion(lattice),
        "coop_death" => models::coop_death(lattice, a.b.unwrap_or(1.0)),
        "coop_rw" => models::coop_rw(lattice, a.b.unwrap_or(1.0)),
        "babp" => models::babp(lattice, lambda),
        "annihilating_branching" => {
            models::annihilating_branching(lattice, lambda, a.delta.unwrap_or(1.0))
        }
        "contact_double_death" => models::contact_double_death(lattice, lambda),
        "cooperative_1d" => models::cooperative_1d(lattice, lambda),
        other => return Err(CliError::config(format!("unknown model {other:?}"))),
    };
    Ok(m?)
}

fn run_simulate(a: &SimulateArgs, seed: u64) -> Result<Outcome, CliError> {
    let name = a.model.clone().unwrap_or_else(|| "contact".into());
    let d = a.d.unwrap_or(1);
    let l = a.l.unwrap_or(101);
    let t = a.t.unwrap_or(10.0);
    let replicas = a.replicas.unwrap_or(100);
    let default_obs = match name.as_str() {
        "contact" if d == 1 => "survival",
        "ising" => "magnetization",
        "voter" => "clusters",
        _ => "density",
    };
    let obs = a.observable.clone().unwrap_or_else(|| default_obs.into());
    let seed = derive_seed(seed, &format!("simulate-{obs}"));
    match obs.as_str() {
        "survival" => {
            if name != "contact" || d != 1 {
                return Err(CliError::config("survival is available for the 1D contact process"));
            }
            let lambda = a.lambda.unwrap_or(1.0);
            let plan = SurvivalPlan { len: l, horizon: t, replicas, seed };
            let p = theta_curve(&[lambda], &plan)?[0];
            let csv = format!(
                "lambda,theta_hat,ci_lo,ci_hi,truncated_frac,T,L\n{},{},{},{},{},{},{}\n",
                f(lambda),
                f(p.theta.estimate),
                f(p.theta.lo),
                f(p.theta.hi),
                f(p.truncated_frac()),
                f(t),
                l
            );
            Ok(Outcome::ok(csv, json!({ "theta_hat": p.theta.estimate, "truncated": p.truncated })))
        }
        "magnetization" => {
            let beta = a.beta.unwrap_or(1.0);
            let m = magnetization_frozen_boundary(beta, l, t, 0.25, replicas, seed)?;
            let csv = format!(
                "beta,L,m_hat,onsager_value\n{},{},{},{}\n",
                f(beta),
                l,
                f(m.m_hat.mean),
                f(m.onsager)
            );
            Ok(Outcome::ok(csv, json!({ "m_hat": m.m_hat.mean, "se": m.m_hat.se, "onsager": m.onsager })))
        }
        "density" | "clusters" => {
            let lattice = torus(d, l)?;
            let model = build_model(&name, a, &lattice)?;
            let times = parse_grid(&a.times.clone().unwrap_or_else(|| format!("0:{t}:{}", t / 10.0)))?;
            if obs == "density" {
                let init = parse_init(a.init.as_deref().unwrap_or("ones"))?;
                let pts = invariant_density(&model, &init, &times, replicas, seed)?;
                // `ci` is the half-width of the normal 95% interval.
                let mut csv = String::from("t,mean,ci\n");
                for p in &pts {
                    csv += &format!("{},{},{}\n", f(p.t), f(p.density.mean), f(1.96 * p.density.se));
                }
                let last = pts.last().map(|p| p.density.mean);
                Ok(Outcome::ok(csv, json!({ "final_density": last })))
            } else {
                let p = match parse_init(a.init.as_deref().unwrap_or("product:0.5"))? {
                    InitLaw::Bernoulli(p) => p,
                    InitLaw::Ones => 1.0,
                    _ => 0.0,
                };
                let pts = clustering_stats(&model, p, &times, replicas, seed)?;
                let mut csv = String::from("t,disagreement,se,mean_cluster_size,clusters\n");
                for c in &pts {
                    let (tot, cnt) = c
                        .histogram
                        .iter()
                        .fold((0u64, 0u64), |(a, b), &(s, k)| (a + s as u64 * k, b + k));
                    csv += &format!(
                        "{},{},{},{},{}\n",
                        f(c.t),
                        f(c.disagreement.mean),
                        f(c.disagreement.se),
                        f(tot as f64 / cnt.max(1) as f64),
                        cnt
                    );
                }
                let last = pts.last().map(|c| c.disagreement.mean);
                Ok(Outcome::ok(csv, json!({ "final_disagreement": last })))
            }
        }
        other => Err(CliError::config(format!("unknown observable {other:?}"))),
    }
}

fn run_theta(a: &ThetaArgs, seed: u64) -> Result<Outcome, CliError> {
    let plan = SurvivalPlan {
        len: a.l.unwrap_or(401),
        horizon: a.t.unwrap_or(200.0),
        replicas: a.replicas.unwrap_or(2000),
        seed: derive_seed(seed, "theta-curve"),
    };
    let mut csv = String::from("lambda,theta_hat,ci_lo,ci_hi,truncated_frac\n");
    let mut results = serde_json::Map::new();
    let row = |p: &crate::estimators::ThetaPoint| {
        format!(
            "{},{},{},{},{}\n",
            f(p.lambda),
            f(p.theta.estimate),
            f(p.theta.lo),
            f(p.theta.hi),
            f(p.truncated_frac())
        )
    };
    if let Some(b) = &a.bracket {
        let br = lambda_c_estimate(
            parse_pair(b)?,
            a.tol.unwrap_or(0.02),
            a.threshold.unwrap_or(0.1),
            &plan,
        )?;
        for p in &br.evaluations {
            csv += &row(p);
        }
        results.insert("lambda_c_lo".into(), json!(br.lo));
        results.insert("lambda_c_hi".into(), json!(br.hi));
    } else {
        let grid = parse_grid(a.lambdas.as_deref().unwrap_or("1:2.5:0.05"))?;
        for p in &theta_curve(&grid, &plan)? {
            csv += &row(p);
        }
    }
    Ok(Outcome::ok(csv, Value::Object(results)))
}

fn family_of(a: &MeanfieldArgs, main: Option<f64>) -> Result<Family, CliError> {
    let name = a.family.as_deref().unwrap_or("ising");
    let or = |v: Option<f64>, d: f64| main.or(v).unwrap_or(d);
    Ok(match name {
        "ising" => Family::Ising { beta: or(a.beta, 3.0) },
        "contact" => Family::Contact { lambda: or(a.lambda, 2.0) },
        "voter" => Family::Voter,
        "sped_voter" => Family::SpedVoter,
        "coop_death" => Family::CoopDeath { b: or(a.b, 5.0) },
        "coop_rw" => Family::CoopRw { b: or(a.b, 5.0) },
        "biased_voter_death" => Family::BiasedVoterDeath { s: or(a.s, 1.0), d: a.d.unwrap_or(0.5) },
        "np_two_alpha" => Family::NpTwoAlpha { a01: or(a.a01, 0.5), a10: a.a10.unwrap_or(0.5) },
        other => return Err(CliError::config(format!("unknown family {other:?}"))),
    })
}

fn run_meanfield(a: &MeanfieldArgs) -> Result<Outcome, CliError> {
    if let Some(b) = &a.bifurcation {
        let grid = parse_grid(b)?;
        for &p in &grid {
            DriftSpec::new(family_of(a, Some(p))?)?;
        }
        let rows = bifurcation(&grid, |p| family_of(a, Some(p)).expect("family checked above"));
        let mut csv = String::from("param,x,stability\n");
        for (p, fp) in &rows {
            csv += &format!("{},{},{}\n", f(*p), f(fp.x), fp.stability.as_str());
        }
        return Ok(Outcome::ok(csv, json!({ "rows": rows.len() })));
    }
    let spec = DriftSpec::new(family_of(a, None)?)?;
    let x0 = a.x0.unwrap_or(0.1);
    let path = integrate_ode(&spec, x0, a.t.unwrap_or(10.0), a.step.unwrap_or(1e-3))?;
    let every = ((0.01 / path.step).round() as usize).max(1);
    let mut csv = String::from("t,x\n");
    for (k, (t, x)) in path.times().zip(&path.x).enumerate() {
        if k % every == 0 || k + 1 == path.x.len() {
            csv += &format!("{},{}\n", f(t), f(*x));
        }
    }
    Ok(Outcome::ok(csv, json!({ "x_final": path.last() })))
}

fn run_duality(a: &DualityArgs, seed: u64) -> Result<Outcome, CliError> {
    let pair = a.pair.as_deref().unwrap_or("contact:self");
    let n = a.sites.unwrap_or(20);
    let t = a.t.unwrap_or(5.0);
    let seeds = a.seeds.unwrap_or(1000);
    let lambda = a.lambda.unwrap_or(1.0);
    if pair == "covo:q" {
        let gamma = a.gamma.unwrap_or(1.0);
        let lattice = Arc::new(Lattice::new(LatticeSpec::complete(n.min(6), Convention::ExcludeSelf))?);
        let model = models::contact_voter(&lattice, lambda, gamma)?;
        let g = generator_matrix(&model)?;
        let q = a.q.unwrap_or(gamma / (gamma + lambda));
        let r = generator_duality_residual(&g, &g, |x: &[u8], y: &[u8]| {
            crate::duality::psi_q(q, x, y)
        })?;
        let csv = format!("pair,q,residual\n{pair},{},{}\n", f(q), f(r));
        return Ok(Outcome::ok(csv, json!({ "residual": r })));
    }
    let (model, mode) = {
        let lattice = torus(1, n)?;
        match pair {
            "contact:self" => (models::contact(&lattice, lambda, a.delta.unwrap_or(1.0))?, Mode::Additive),
            "voter:crw" => (models::voter(&lattice)?, Mode::Additive),
            "bran:parity" => (
                models::annihilating_branching(&lattice, lambda, a.delta.unwrap_or(1.0))?,
                Mode::Cancellative,
            ),
            other => return Err(CliError::config(format!("unknown duality pair {other:?}"))),
        }
    };
    let want_q = match mode {
        Mode::Additive => 0.0,
        Mode::Cancellative => -1.0,
    };
    if let Some(q) = a.q {
        if q != want_q {
            return Err(CliError::config(format!("pair {pair} is checked at q = {want_q}, got {q}")));
        }
    }
    let rep = pathwise_duality_assert(
        &model,
        mode,
        t,
        seeds,
        derive_seed(seed, "duality"),
        &InitLaw::Bernoulli(0.5),
        &InitLaw::RandomSites(3),
        10,
    )?;
    let csv = format!(
        "pair,q,sites,T,runs,passed\n{pair},{},{n},{},{},{}\n",
        f(want_q),
        f(t),
        rep.runs,
        rep.passed
    );
    let mut out = Outcome::ok(csv, json!({ "runs": rep.runs, "passed": rep.passed }));
    if let Some(c) = rep.counterexample {
        out.passed = false;
        out.extra.push(("counterexample_events.csv".into(), c.events_csv.clone()));
        out.results["counterexample"] = json!({
            "replica": c.replica,
            "s": c.s,
            "x0": c.x0.states,
            "y0": c.y0.states,
        });
    }
    Ok(out)
}

fn run_percolation(a: &PercolationArgs, seed: u64) -> Result<Outcome, CliError> {
    let d = a.d.unwrap_or(2);
    let grid = parse_grid(a.p.as_deref().unwrap_or("0.7"))?;
    if let Some(side) = a.dump_side {
        let field = sample_bond_field(d, side, grid[0], derive_seed(seed, "bond-field"))?;
        let mut buf = Vec::new();
        field.write_csv(&mut buf)?;
        let open = field.n_open();
        return Ok(Outcome::ok(
            String::from_utf8(buf).expect("ascii csv"),
            json!({ "open": open, "bonds": field.n_bonds() }),
        ));
    }
    let n = a.n.unwrap_or(100);
    let replicas = a.replicas.unwrap_or(1000);
    let mut csv = String::from("p,n,replicas,survived_fraction,ci_low,ci_high");
    if a.peierls_m.is_some() {
        csv += ",peierls_bound";
    }
    csv.push('\n');
    for &p in &grid {
        let th = percolation_theta(d, p, n, replicas, derive_seed(seed, "percolation"))?;
        csv += &format!("{},{n},{replicas},{},{},{}", f(p), f(th.estimate), f(th.lo), f(th.hi));
        if let Some(m) = a.peierls_m {
            csv += &format!(",{}", f(peierls_bound(p, m)));
        }
        csv.push('\n');
    }
    Ok(Outcome::ok(csv, json!({ "points": grid.len() })))
}

fn run_kdep(a: &KdepArgs, seed: u64) -> Result<Outcome, CliError> {
    let field = a.field.as_deref().unwrap_or("phi");
    let k = a.k.unwrap_or(3);
    let mut rng = replica_rng(derive_seed(seed, "kdep"), 0);
    let (chi, out) = match field {
        "phi" => {
            let p = a.p.unwrap_or(0.9);
            let mut fld = phi_product_field(p)?;
            let chi = fld.sample(a.n.unwrap_or(100_000), &mut rng);
            fld.reset();
            let out = kdep_couple(&chi, &mut fld, k, p, &mut rng)?;
            (chi, out)
        }
        "contact" => {
            let lambda = a.lambda.unwrap_or(100.0);
            let t = a.t.unwrap_or(0.05);
            let slabs = a.n.unwrap_or(316);
            let cp = contact_to_percolation(lambda, t, slabs, derive_seed(seed, "kdep-contact"), false)?;
            let chi: Vec<bool> = cp.slabs().concat();
            let segs: Vec<usize> = (0..slabs).map(|s| 2 * (s + 1)).collect();
            let mut chain = ContactChain::new(lambda, t, a.cells.unwrap_or(2000), segs)?;
            let p = a.p.unwrap_or_else(|| good_event_probability(lambda, t));
            let out = kdep_couple(&chi, &mut chain, k, p, &mut rng)?;
            (chi, out)
        }
        other => return Err(CliError::config(format!("unknown field {other:?}"))),
    };
    let mut csv = String::from("index,chi,chi_prime,chi_tilde,conditional\n");
    for (n, &c) in chi.iter().enumerate() {
        csv += &format!(
            "{n},{},{},{},{}\n",
            c as u8,
            out.chi_prime[n] as u8,
            out.chi_tilde[n] as u8,
            f(out.conditionals[n])
        );
    }
    let (stat, iid) = iid_bernoulli_pair_test(&out.chi_tilde, out.p_tilde, 0.01);
    let ov = out.order_violations(&chi);
    let bv = out.bound_violations();
    let mut o = Outcome::ok(
        csv,
        json!({
            "p_tilde": out.p_tilde,
            "min_conditional": out.min_conditional(),
            "order_violations": ov,
            "bound_violations": bv,
            "chi_square": stat,
            "iid_pass": iid,
        }),
    );
    o.passed = ov == 0 && bv == 0;
    Ok(o)
}

fn run_compare(a: &CompareArgs, seed: u64) -> Result<Outcome, CliError> {
    let lambda = a.lambda.unwrap_or(10.0);
    let t = a.t.unwrap_or(0.3);
    let levels = a.levels.unwrap_or(32);
    let windows = a.windows.unwrap_or(100);
    let base = derive_seed(seed, "compare");
    let runs: Vec<_> = (0..windows)
        .map(|w| contact_to_percolation(lambda, t, levels, base.wrapping_add(w), true))
        .collect::<Result<_, _>>()?;
    let mut csv = String::from("window,bonds,open,frequency,verified,violations\n");
    let (mut bonds, mut open, mut viol) = (0usize, 0usize, 0usize);
    for (w, r) in runs.iter().enumerate() {
        csv += &format!(
            "{w},{},{},{},{},{}\n",
            r.n_bonds(),
            r.n_good(),
            f(r.n_good() as f64 / r.n_bonds() as f64),
            r.verified,
            r.violations
        );
        bonds += r.n_bonds();
        open += r.n_good();
        viol += r.violations;
    }
    let mut o = Outcome::ok(
        csv,
        json!({
            "frequency": open as f64 / bonds as f64,
            "predicted": good_event_probability(lambda, t),
            "bonds": bonds,
            "violations": viol,
        }),
    );
    o.passed = viol == 0;
    Ok(o)
}

fn run_couple(a: &CoupleArgs, seed: u64) -> Result<Outcome, CliError> {
    let name = a.coupling.as_deref().unwrap_or("lambda");
    let n = a.n.unwrap_or(40);
    let lambda = a.lambda.unwrap_or(1.5);
    let spec = match name {
        "lambda" => lambda_coupling(&torus(1, n)?, lambda, a.lambda2.unwrap_or(2.0))?,
        "ann-coal" => ann_coal_coupling(&torus(1, n)?)?,
        "double-death" => double_death_coupling(n, lambda)?,
        "dimension" => dimension_coupling(n, 2, lambda)?,
        "range" => range_coupling(n, 1, a.range.unwrap_or(2), lambda)?,
        other => return Err(CliError::config(format!("unknown coupling {other:?}"))),
    };
    let rep = coupling_check(
        &spec,
        a.density.unwrap_or(0.5),
        a.t.unwrap_or(5.0),
        a.runs.unwrap_or(500),
        derive_seed(seed, "couple"),
    )?;
    let csv = format!(
        "coupling,runs,events,violations\n{},{},{},{}\n",
        rep.name, rep.runs, rep.events, rep.violations
    );
    let mut o = Outcome::ok(csv, json!({ "violations": rep.violations, "first_violation": rep.first_violation }));
    o.passed = rep.holds();
    Ok(o)
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Runs a config with the given thread count and writes the CSV, the
/// manifest and any dumps. Returns the exit code.
pub fn run_to_disk(cfg: &ExperimentConfig, out: &Path, threads: Option<usize>) -> Result<i32, CliError> {
    let start = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::config("threads must be positive"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::config(e.to_string()))?;
    let outcome = pool.install(|| execute(cfg))?;
    let hash = cfg.hash();
    let manifest = manifest_path(out);
    let manifest_name = manifest.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut csv = outcome.csv;
    csv += &format!("# manifest: {manifest_name} config_sha256={hash}\n");
    let io = |e: std::io::Error| CliError::from(Error::from(e));
    write_atomic(out, csv.as_bytes()).map_err(io)?;
    let mut extra_files = BTreeMap::new();
    for (name, body) in &outcome.extra {
        let p = out.with_file_name(format!(
            "{}.{name}",
            out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
        ));
        write_atomic(&p, body.as_bytes()).map_err(io)?;
        extra_files.insert(name.clone(), p.display().to_string());
    }
    let m = json!({
        "config": cfg,
        "config_sha256": hash,
        "seed": cfg.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "threads": pool.current_num_threads(),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "passed": outcome.passed,
        "results": outcome.results,
        "extra_files": extra_files,
    });
    let body = serde_json::to_vec_pretty(&m).expect("manifest serialises");
    write_atomic(&manifest, &body).map_err(io)?;
    Ok(if outcome.passed { EXIT_OK } else { EXIT_VIOLATION })
}

/// Entry point shared by the binary and tests: parses arguments, runs the
/// experiment and returns the process exit code. Errors are reported as
/// JSON on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return EXIT_OK;
            }
            eprintln!("{}", CliError::config(e.to_string()).report());
            return EXIT_CONFIG;
        }
    };
    let result = resolve(&cli).and_then(|(cfg, out, threads)| {
        run_to_disk(&cfg, &out, threads)
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.report());
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0:1:0.25").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_grid("0:6:0.05").unwrap().len(), 121);
        assert_eq!(parse_grid("2").unwrap(), vec![2.0]);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("a").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = json!({ "lambda": 1.0, "L": 11 });
        let cli = Cli::try_parse_from(["ips", "simulate", "--lambda", "2"]).unwrap();
        let m = merge(file, cli.command.flags());
        assert_eq!(m["lambda"], json!(2.0));
        assert_eq!(m["L"], json!(11));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(check_params("simulate", &json!({ "lamda": 1.0 })).is_err());
        assert!(check_params("simulate", &json!({ "lambda": "x" })).is_err());
    }

    #[test]
    fn hash_ignores_nothing_in_config() {
        let a = ExperimentConfig { command: "kdep".into(), seed: 1, params: json!({}) };
        let mut b = a.clone();
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
    }
}
