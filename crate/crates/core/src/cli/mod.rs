//! Batch front end: JSON run configurations, one subcommand per experiment,
//! CSV outputs and a run manifest that reproduces them.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::corematrix::{extended_cholesky, CorrelationMatrix, MrcParams, SymMatrix};
use crate::error::{MrcError, Result};
use crate::finance::{
    bs_call, corr_swap_price_closed, corr_swap_price_mc, implied_vol, index_call_prices, load_weights,
    BasketModel, CorrModelKind, LocalVol, MarketWeights,
};
use crate::flows::classify_assumptions;
use crate::mcengine::{convergence_study, simulate_observables, timing_bench, McEstimate, Terminal, TimeGrid};
use crate::momentoracle::{MomentTable, MonomialIndex};
use crate::schemes::SchemeKind;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "mrc", version, about = "Mean-reverting correlation processes: moments, simulation, pricing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration, or a manifest written by a previous run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Subcommand, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Exact moment trajectories.
    Moments,
    /// Monte Carlo estimates of the configured monomials at T.
    Simulate,
    /// Weak-convergence study of the d = 3 benchmark functionals.
    Converge,
    /// Wall-clock timing per scheme.
    Bench,
    /// Index call prices and implied volatilities over a strike ladder.
    PriceIndex,
    /// Correlation swap, closed form and Monte Carlo.
    CorrSwap,
    /// Quick internal consistency checks.
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Moments => "moments",
            Command::Simulate => "simulate",
            Command::Converge => "converge",
            Command::Bench => "bench",
            Command::PriceIndex => "price-index",
            Command::CorrSwap => "corr-swap",
            Command::Selftest => "selftest",
        }
    }
}

/// Uniform basket over the constituents of a weights file (the bundled DAX
/// composition when no file is given).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasketSpec {
    #[serde(default)]
    pub weights_file: Option<PathBuf>,
    pub spot: f64,
    pub rate: f64,
    pub vol: LocalVol,
    pub corr: CorrModelKind,
}

impl Default for BasketSpec {
    fn default() -> Self {
        BasketSpec {
            weights_file: None,
            spot: 100.0,
            rate: 0.0,
            vol: LocalVol::Flat { sigma: 0.2 },
            corr: CorrModelKind::Local { eta: 0.500714, gamma: 8.672568, rho_min: 0.1 },
        }
    }
}

impl BasketSpec {
    pub fn build(&self) -> Result<BasketModel> {
        let w = match &self.weights_file {
            Some(p) => load_weights(p)?,
            None => MarketWeights::dax_2010(),
        };
        BasketModel::from_market(&w, self.spot, self.rate, self.vol.clone(), self.corr.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: MrcParams,
    pub scheme: SchemeKind,
    pub schemes: Vec<SchemeKind>,
    pub horizon: f64,
    pub steps: usize,
    pub n_list: Vec<usize>,
    pub n_paths: u64,
    pub seed: u64,
    /// Monomials such as `1-2^2*2-3` (1-based pairs).
    pub monomials: Vec<String>,
    pub times: Vec<f64>,
    /// 1-based pair of the correlation swap.
    pub pair: (usize, usize),
    pub strikes: Vec<f64>,
    /// Full basket model; takes precedence over `basket_spec`.
    pub basket: Option<BasketModel>,
    pub basket_spec: BasketSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: MrcParams::reference(3),
            scheme: SchemeKind::SecondOrderDirect,
            schemes: SchemeKind::ALL.to_vec(),
            horizon: 1.0,
            steps: 10,
            n_list: vec![4, 8, 16, 32],
            n_paths: 100_000,
            seed: 1,
            monomials: vec!["1-2".into(), "1-2^2".into()],
            times: vec![0.0, 1.0],
            pair: (1, 2),
            strikes: vec![0.0, 80.0, 90.0, 100.0, 110.0, 120.0],
            basket: None,
            basket_spec: BasketSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.steps)
    }

    pub fn basket_model(&self) -> Result<BasketModel> {
        match &self.basket {
            Some(m) => {
                m.validate()?;
                Ok(m.clone())
            }
            None => self.basket_spec.build(),
        }
    }

    fn monomial_list(&self) -> Result<Vec<MonomialIndex>> {
        self.monomials.iter().map(|s| MonomialIndex::parse_with_dim(s, self.params.dim())).collect()
    }
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: Command,
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub warnings: Vec<String>,
    pub outputs: Vec<String>,
}

/// Reads either a bare configuration or a manifest.
pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| MrcError::Parse(format!("{}: {e}", path.display())))?;
    let parsed = if value.get("config").is_some() && value.get("command").is_some() {
        serde_json::from_value::<Manifest>(value).map(|m| m.config)
    } else {
        serde_json::from_value::<RunConfig>(value)
    };
    parsed.map_err(|e| MrcError::Parse(format!("{}: {e}", path.display())))
}

fn assumption_warnings(params: &MrcParams) -> Vec<String> {
    let r = classify_assumptions(params);
    if r.weak {
        Vec::new()
    } else {
        vec![format!(
            "parameters violate the weak existence condition (min eigenvalue {:.6})",
            r.witness_weak
        )]
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| MrcError::Io(e.into()))
}

fn write_row<const N: usize>(w: &mut csv::Writer<fs::File>, row: [String; N]) -> Result<()> {
    w.write_record(row).map_err(|e| MrcError::Io(e.into()))
}

fn est_fields(e: &McEstimate) -> [String; 3] {
    [format!("{:.12e}", e.mean), format!("{:.6e}", e.ci_half_width_95), format!("{:.6e}", e.std_error)]
}

struct Outcome {
    outputs: Vec<String>,
    warnings: Vec<String>,
    /// Process exit status for commands that report failures without an error.
    status: i32,
}

fn cmd_moments(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let monos = cfg.monomial_list()?;
    let mut table = MomentTable::new(cfg.params.clone());
    let mut w = csv_writer(&out.join("moments.csv"))?;
    write_row(&mut w, ["monomial".into(), "t".into(), "value".into()])?;
    for m in &monos {
        let series = table.moment(m)?;
        for &t in &cfg.times {
            write_row(&mut w, [m.to_string(), format!("{t}"), format!("{:.15e}", series.eval(t))])?;
        }
    }
    w.flush()?;
    Ok(Outcome { outputs: vec!["moments.csv".into()], warnings: assumption_warnings(&cfg.params), status: 0 })
}

fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let monos = cfg.monomial_list()?;
    let d = cfg.params.dim();
    let terms: Vec<Vec<(usize, i32)>> =
        monos.iter().map(|m| m.pairs().iter().map(|&(i, j, p)| (i * d + j, p as i32)).collect()).collect();
    let obs = Terminal {
        len: monos.len(),
        f: |x: &[f64], o: &mut [f64]| {
            for (v, t) in o.iter_mut().zip(&terms) {
                *v = t.iter().map(|&(e, p)| x[e].powi(p)).product();
            }
        },
    };
    let est = simulate_observables(&cfg.params, cfg.scheme, cfg.grid()?, cfg.n_paths, cfg.seed, &obs)?;
    let mut table = MomentTable::new(cfg.params.clone());
    let mut w = csv_writer(&out.join("simulate.csv"))?;
    write_row(&mut w, ["monomial", "scheme", "N", "estimate", "ci", "se", "exact"].map(String::from))?;
    for (m, e) in monos.iter().zip(&est) {
        let exact = table.moment(m)?.eval(cfg.horizon);
        let [mean, ci, se] = est_fields(e);
        write_row(&mut w, [m.to_string(), cfg.scheme.to_string(), cfg.steps.to_string(), mean, ci, se, format!("{exact:.12e}")])?;
    }
    w.flush()?;
    Ok(Outcome { outputs: vec!["simulate.csv".into()], warnings: assumption_warnings(&cfg.params), status: 0 })
}

fn cmd_converge(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    if cfg.n_list.is_empty() {
        return Err(MrcError::Usage("n_list is empty".into()));
    }
    let path = out.join("convergence.csv");
    let mut file = fs::File::create(&path)?;
    let mut slopes = Vec::new();
    let mut first = true;
    for &scheme in &cfg.schemes {
        for rep in convergence_study(&cfg.params, scheme, cfg.horizon, &cfg.n_list, cfg.n_paths, cfg.seed)? {
            rep.write_csv(&mut file, first)?;
            first = false;
            if let Some(s) = rep.slope {
                slopes.push((rep.functional.clone(), scheme, s));
            }
        }
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    for (f, scheme, s) in slopes {
        w.write_record([f, scheme.to_string(), "slope".into(), format!("{s:.6}"), String::new(), String::new(), String::new()])
            .map_err(|e| MrcError::Io(e.into()))?;
    }
    w.flush()?;
    Ok(Outcome { outputs: vec!["convergence.csv".into()], warnings: assumption_warnings(&cfg.params), status: 0 })
}

fn cmd_bench(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let report = timing_bench(&cfg.params, &cfg.schemes, cfg.grid()?, cfg.n_paths)?;
    report.write_csv(fs::File::create(out.join("timing.csv"))?)?;
    Ok(Outcome { outputs: vec!["timing.csv".into()], warnings: report.warnings, status: 0 })
}

fn cmd_price(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let model = cfg.basket_model()?;
    let grid = cfg.grid()?;
    let prices = index_call_prices(&model, &cfg.strikes, grid, cfg.n_paths, cfg.seed)?;
    let i0 = model.index0();
    let mut w = csv_writer(&out.join("prices.csv"))?;
    write_row(&mut w, ["strike", "price", "ci", "implied_vol"].map(String::from))?;
    for (&k, e) in cfg.strikes.iter().zip(&prices) {
        let iv = if k > 0.0 {
            implied_vol(e.mean, i0, k, model.rate, grid.horizon).map(|v| format!("{v:.8}")).unwrap_or_default()
        } else {
            String::new()
        };
        write_row(&mut w, [format!("{k}"), format!("{:.10e}", e.mean), format!("{:.6e}", e.ci_half_width_95), iv])?;
    }
    w.flush()?;
    Ok(Outcome { outputs: vec!["prices.csv".into()], warnings: Vec::new(), status: 0 })
}

fn cmd_corr_swap(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let (i, j) = cfg.pair;
    if i == 0 || j == 0 || i == j {
        return Err(MrcError::Usage(format!("pair ({i},{j}) must be two distinct 1-based indices")));
    }
    let closed = corr_swap_price_closed(&cfg.params, i - 1, j - 1, cfg.horizon)?;
    let mc = corr_swap_price_mc(&cfg.params, i - 1, j - 1, cfg.grid()?, cfg.n_paths, cfg.seed)?;
    let mut w = csv_writer(&out.join("corr_swap.csv"))?;
    write_row(&mut w, ["method", "value", "ci"].map(String::from))?;
    write_row(&mut w, ["closed".into(), format!("{closed:.12e}"), String::new()])?;
    write_row(&mut w, ["mc".into(), format!("{:.12e}", mc.mean), format!("{:.6e}", mc.ci_half_width_95)])?;
    w.flush()?;
    Ok(Outcome { outputs: vec!["corr_swap.csv".into()], warnings: assumption_warnings(&cfg.params), status: 0 })
}

fn cmd_selftest(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let mut checks: Vec<(&str, bool)> = Vec::new();
    let p = MrcParams::reference(3);
    let m = MonomialIndex::from_pairs(3, &[(0, 1, 1)])?;
    let v = MomentTable::new(p.clone()).moment(&m)?.eval(1.0);
    checks.push(("order-1 moment", (v - 0.7 * (-2.5f64).exp()).abs() < 1e-12));
    let two = MonomialIndex::from_pairs(3, &[(0, 1, 2)])?;
    let erg = MomentTable::new(p.clone()).ergodic(&two)?;
    checks.push(("ergodic order-2 moment", (erg - 2.0 / 7.0).abs() < 1e-12));
    let q = SymMatrix::from_fn(4, |i, j| if i == j { 2.0 } else { 1.0 });
    let f = extended_cholesky(&q, 1e-12)?;
    checks.push(("extended cholesky", f.reconstruct().max_abs_diff(&q) < 1e-12));
    let price = bs_call(100.0, 100.0, 0.0, 1.0, 0.2);
    checks.push(("implied vol", (implied_vol(price, 100.0, 100.0, 0.0, 1.0)? - 0.2).abs() < 1e-8));
    let n = cfg.n_paths.min(20_000);
    let obs = Terminal { len: 1, f: |x: &[f64], o: &mut [f64]| o[0] = x[1] };
    let e = simulate_observables(&p, SchemeKind::SecondOrderDirect, TimeGrid::new(1.0, 8)?, n, cfg.seed, &obs)?[0];
    checks.push(("pair mean simulation", e.within(v, 4.0)));
    let x = CorrelationMatrix::equicorrelation(3, 0.7)?;
    checks.push(("correlation swap", (corr_swap_price_closed(&p.with_x(x)?, 0, 1, 1.0)? - 0.257016).abs() < 1e-6));
    let mut w = csv_writer(&out.join("selftest.csv"))?;
    write_row(&mut w, ["check".into(), "result".into()])?;
    for (name, ok) in &checks {
        write_row(&mut w, [name.to_string(), if *ok { "pass" } else { "FAIL" }.into()])?;
        println!("{} {name}", if *ok { "pass" } else { "FAIL" });
    }
    w.flush()?;
    let status = if checks.iter().all(|c| c.1) { 0 } else { 3 };
    Ok(Outcome { outputs: vec!["selftest.csv".into()], warnings: Vec::new(), status })
}

/// Runs one command with an already resolved configuration; returns the exit
/// status and writes the manifest next to the outputs.
pub fn execute(command: Command, cfg: &RunConfig, out: &Path) -> Result<i32> {
    fs::create_dir_all(out)?;
    let outcome = match command {
        Command::Moments => cmd_moments(cfg, out),
        Command::Simulate => cmd_simulate(cfg, out),
        Command::Converge => cmd_converge(cfg, out),
        Command::Bench => cmd_bench(cfg, out),
        Command::PriceIndex => cmd_price(cfg, out),
        Command::CorrSwap => cmd_corr_swap(cfg, out),
        Command::Selftest => cmd_selftest(cfg, out),
    }?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let manifest = Manifest {
        command,
        version: VERSION.to_string(),
        seed: cfg.seed,
        config: cfg.clone(),
        warnings: outcome.warnings,
        outputs: outcome.outputs,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| MrcError::Parse(e.to_string()))?;
    fs::write(out.join(format!("{}.manifest.json", command.name())), text + "\n")?;
    Ok(outcome.status)
}

fn run(cli: Cli) -> Result<i32> {
    let mut cfg = match &cli.config {
        Some(p) => read_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match cli.workers {
        Some(0) => Err(MrcError::Usage("--workers must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| MrcError::Usage(e.to_string()))?
            .install(|| execute(cli.command, &cfg, &cli.out)),
        None => execute(cli.command, &cfg, &cli.out),
    }
}

/// Entry point of the `mrc` binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
