//! Command-line front end: `gen-data`, `train-glm`, `alecton`, `verify`,
//! `bench-quant` and `report`.
//!
//! Exit codes: 0 on success, 1 on a usage or contract error, 2 when a
//! verification check fails. Every CSV written under `--out-dir` has a header
//! row and ends with a `# invocation: …` comment line.

mod report;
pub mod suites;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::alecton::{
    alecton_step_size, alecton_t_and_bound, default_theta, run_alecton, AlectonRunSpec,
};
use crate::convex_sgd::{
    solve_optimum, train, training_loss, ConvexRunSpec, Executor, Precision, StepRule,
};
use crate::data_io::{
    gen_spectral_matrix, gen_synthetic_logistic_scaled, load_libsvm, log_spaced_spectrum,
    quantize_dataset, save_libsvm,
};
use crate::engine::{write_snapshots, DelayDistribution};
use crate::error::{contract, Result};
use crate::fixedpoint::{storage_scale, Bits};
use crate::martingale::{
    bound_corollaries, build_v, convex_w, Corollary, CorollaryValue, RateSupermartingale,
};
use crate::model::{dist_sq, estimate_constants, Dataset, GlmModel};

pub use self::report::{bench_quant, BenchRow};
use self::suites::{run_suite, Scale};

/// Environment variable holding the default thread count.
pub const THREADS_ENV: &str = "WILDTAMER_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "wildtamer",
    version,
    about = "Asynchronous and low-precision SGD with martingale rate bounds"
)]
struct Cli {
    /// Directory receiving every output file.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic logistic dataset or spectral matrix.
    GenData(GenDataArgs),
    /// Train a GLM with sequential, lock-free or simulated-delay SGD.
    TrainGlm(TrainArgs),
    /// Rank-1 Alecton on a synthetic spectral matrix.
    Alecton(AlectonArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
    /// Throughput by thread count and precision.
    BenchQuant(BenchArgs),
    /// Emit figure data and a plot script.
    Report(ReportArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum DataKind {
    Logistic,
    Spectral,
}

#[derive(Args, Debug)]
struct GenDataArgs {
    #[arg(long, value_enum, default_value = "logistic")]
    kind: DataKind,
    /// features (logistic) or matrix dimension (spectral)
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// samples
    #[arg(long, default_value_t = 10_000)]
    m: usize,
    /// nonzeros per sample
    #[arg(long, default_value_t = 10)]
    nnz: usize,
    /// planted weights are this scale times N(0, 1)
    #[arg(long, default_value_t = 1.0)]
    weight_scale: f64,
    /// comma-separated eigenvalues; default 10 log-spaced in [1, 2]
    #[arg(long, value_delimiter = ',')]
    spectrum: Option<Vec<f64>>,
    /// also write a stochastically rounded BWQ1 copy at this width
    #[arg(long)]
    quantize: Option<u32>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, ValueEnum)]
enum Mode {
    Seq,
    Async,
    Sim,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// libsvm file; a synthetic benchmark is generated when absent
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 10_000)]
    m: usize,
    #[arg(long, default_value_t = 10)]
    nnz: usize,
    #[arg(long, default_value_t = 1)]
    data_seed: u64,
    /// logistic, linear or svm
    #[arg(long, default_value = "logistic")]
    model: GlmModel,
    /// 32, 16 or 8
    #[arg(long, default_value = "32")]
    precision: Precision,
    /// worker threads; default from WILDTAMER_THREADS, else 1
    #[arg(long)]
    threads: Option<usize>,
    /// default: async with more than one thread, else seq
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// delay model for `--mode sim`: zero | const:K | geom:P
    #[arg(long, default_value = "geom:0.5")]
    delay: DelayDistribution,
    #[arg(long, conflicts_with = "auto_alpha")]
    alpha: Option<f64>,
    /// step size from the corollary formula
    #[arg(long)]
    auto_alpha: bool,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    #[arg(long, default_value_t = 1e-3)]
    reg: f64,
    /// delay τ assumed by `--auto-alpha` and the reported bound
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    /// sup-norm box for the constant estimates; default ‖x*‖∞ + 1
    #[arg(long)]
    box_radius: Option<f64>,
    #[arg(long, default_value_t = 200_000)]
    max_updates: u64,
    #[arg(long)]
    max_writes: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// snapshot period in writes; with an optimum and a step size small
    /// enough for the convex supermartingale, also writes `w_trace.csv`
    #[arg(long)]
    snapshot_every: Option<u64>,
    /// write the per-write trajectory log
    #[arg(long)]
    log_writes: bool,
    /// stop at the first visit to the ε-ball around the optimum
    #[arg(long)]
    stop_on_success: bool,
    /// skip solving for the optimum (no success tracking or bound)
    #[arg(long)]
    no_optimum: bool,
}

#[derive(Args, Debug)]
struct AlectonArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// comma-separated eigenvalues; default 10 log-spaced in [1, 2]
    #[arg(long, value_delimiter = ',')]
    spectrum: Option<Vec<f64>>,
    #[arg(long, default_value_t = 7)]
    matrix_seed: u64,
    #[arg(long, default_value_t = suites::ALECTON_GAMMA)]
    gamma: f64,
    /// default ½(1 + ε)⁻¹
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, conflicts_with = "auto_eta")]
    eta: Option<f64>,
    /// theoretical step size (very small)
    #[arg(long)]
    auto_eta: bool,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, default_value = "geom:0.5")]
    delay: DelayDistribution,
    #[arg(long, default_value_t = suites::ALECTON_WRITES)]
    max_writes: u64,
    #[arg(long, default_value_t = 1000)]
    check_every: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// suite name or `all`
    #[arg(long, default_value = "all")]
    suite: String,
    /// acceptance-size state and run counts
    #[arg(long)]
    full: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    threads: Vec<usize>,
    /// 32, 16, 8
    #[arg(long, value_delimiter = ',', default_value = "32,16,8")]
    bits: Vec<u32>,
    #[arg(long, default_value_t = 200_000)]
    updates: u64,
    /// libsvm file; the synthetic benchmark when absent
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Figure {
    Speedup,
    Alecton,
    Precision,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long, value_enum)]
    figure: Figure,
    /// thread counts for the speedup figure
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    threads: Vec<usize>,
    /// seeds (precision) or runs per mode (alecton)
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, default_value_t = 200_000)]
    updates: u64,
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let invocation = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    match dispatch(cli, &invocation) {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// CSV writer that appends the invocation comment on finish.
pub(crate) struct CsvOut {
    out: BufWriter<File>,
    invocation: String,
}

impl CsvOut {
    pub(crate) fn create(path: &Path, header: &str, invocation: &str) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{header}")?;
        Ok(CsvOut {
            out,
            invocation: invocation.to_string(),
        })
    }

    pub(crate) fn row(&mut self, fields: &[String]) -> Result<()> {
        writeln!(self.out, "{}", fields.join(","))?;
        Ok(())
    }

    pub(crate) fn finish(mut self) -> Result<()> {
        writeln!(self.out, "# invocation: {}", self.invocation)?;
        self.out.flush()?;
        Ok(())
    }
}

/// Two-column `key,value` CSV.
fn write_kv(path: &Path, rows: &[(&str, String)], invocation: &str) -> Result<()> {
    let mut csv = CsvOut::create(path, "key,value", invocation)?;
    for (k, v) in rows {
        csv.row(&[k.to_string(), v.clone()])?;
    }
    csv.finish()
}

fn default_threads() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&t| t > 0)
            .map(Ok)
            .unwrap_or_else(|| {
                contract(format!(
                    "{THREADS_ENV} must be a positive integer, got `{v}`"
                ))
            }),
        Err(_) => Ok(1),
    }
}

fn executor(
    mode: Option<Mode>,
    threads: Option<usize>,
    delay: &DelayDistribution,
) -> Result<Executor> {
    let threads = match threads {
        Some(0) => return contract("--threads must be at least 1"),
        Some(t) => t,
        None => default_threads()?,
    };
    let mode = mode.unwrap_or(if threads > 1 { Mode::Async } else { Mode::Seq });
    Ok(match mode {
        Mode::Seq => Executor::Sequential,
        Mode::Async => Executor::Async(threads),
        Mode::Sim => Executor::Simulated(delay.clone()),
    })
}

fn executor_label(e: &Executor) -> String {
    match e {
        Executor::Sequential => "sequential".into(),
        Executor::Async(t) => format!("async{t}"),
        Executor::Simulated(d) => format!("simulated({d:?})"),
    }
}

fn spectrum_or_default(s: &Option<Vec<f64>>) -> Vec<f64> {
    s.clone()
        .unwrap_or_else(|| log_spaced_spectrum(10, 1.0, 2.0))
}

fn dispatch(cli: Cli, invocation: &str) -> Result<bool> {
    fs::create_dir_all(&cli.out_dir)?;
    let dir = cli.out_dir.as_path();
    match cli.command {
        Command::GenData(a) => gen_data(&a, dir, invocation).map(|_| true),
        Command::TrainGlm(a) => train_glm(&a, dir, invocation).map(|_| true),
        Command::Alecton(a) => alecton(&a, dir, invocation).map(|_| true),
        Command::Verify(a) => verify(&a, dir, invocation),
        Command::BenchQuant(a) => {
            let data = match &a.data {
                Some(p) => load_libsvm(p, None)?,
                None => report::standard_data()?,
            };
            let rows = bench_quant(&data, &a.threads, &a.bits, a.updates, a.seed)?;
            report::write_bench(&dir.join("bench_quant.csv"), &rows, invocation)?;
            Ok(true)
        }
        Command::Report(a) => {
            match a.figure {
                Figure::Speedup => report::speedup(dir, &a.threads, a.updates, invocation)?,
                Figure::Alecton => report::alecton_figure(dir, a.seeds, invocation)?,
                Figure::Precision => report::precision(dir, a.seeds, a.updates, invocation)?,
            }
            Ok(true)
        }
    }
}

fn gen_data(a: &GenDataArgs, dir: &Path, invocation: &str) -> Result<()> {
    match a.kind {
        DataKind::Logistic => {
            let (data, w) = gen_synthetic_logistic_scaled(a.n, a.m, a.nnz, a.weight_scale, a.seed)?;
            save_libsvm(&data, dir.join("data.libsvm"))?;
            let mut csv = CsvOut::create(&dir.join("planted.csv"), "index,weight", invocation)?;
            for (i, v) in w.iter().enumerate() {
                csv.row(&[i.to_string(), v.to_string()])?;
            }
            csv.finish()?;
            if let Some(bits) = a.quantize {
                let spec = storage_scale(
                    data.max_abs_value().max(f64::MIN_POSITIVE),
                    Bits::from_u32(bits)?,
                )?;
                let q = quantize_dataset(&data, &spec, a.seed)?;
                q.write(BufWriter::new(File::create(dir.join("data.bwq"))?))?;
                log::info!("quantized saturation rate {:e}", q.stats.rate());
            }
        }
        DataKind::Spectral => {
            let eigs = spectrum_or_default(&a.spectrum);
            let m = gen_spectral_matrix(a.n, &eigs, a.seed)?;
            write_kv(
                &dir.join("spectral.csv"),
                &[
                    ("n", m.n().to_string()),
                    (
                        "eigenvalues",
                        eigs.iter()
                            .map(|v| v.to_string())
                            .collect::<Vec<_>>()
                            .join(" "),
                    ),
                    ("eigengap", m.eigengap().to_string()),
                    ("coherence", m.coherence().to_string()),
                    ("frobenius", m.frobenius().to_string()),
                    ("seed", a.seed.to_string()),
                ],
                invocation,
            )?;
            let mut csv =
                CsvOut::create(&dir.join("top_eigenvector.csv"), "index,value", invocation)?;
            for (i, v) in m.top_eigenvector().iter().enumerate() {
                csv.row(&[i.to_string(), v.to_string()])?;
            }
            csv.finish()?;
        }
    }
    Ok(())
}

fn load_or_generate(a: &TrainArgs) -> Result<Dataset> {
    match &a.data {
        Some(p) => load_libsvm(p, None),
        None => Ok(gen_synthetic_logistic_scaled(a.n, a.m, a.nnz, 1.0, a.data_seed)?.0),
    }
}

fn train_glm(a: &TrainArgs, dir: &Path, invocation: &str) -> Result<()> {
    let data = load_or_generate(a)?;
    if data.is_empty() {
        return contract("dataset is empty");
    }
    let exec = executor(a.mode, a.threads, &a.delay)?;
    let x_star = if a.no_optimum {
        None
    } else {
        Some(solve_optimum(&data, a.model, a.reg, 1e-10, 1_000_000)?)
    };
    let sup = x_star
        .as_ref()
        .map(|x| x.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .unwrap_or(0.0);
    let box_radius = a.box_radius.unwrap_or(sup + 1.0);
    let grad = estimate_constants(&data, a.model, a.reg, box_radius)?;
    let k = grad.with_run(a.epsilon, a.theta, 0.0, a.tau)?;
    let mut spec = ConvexRunSpec::new(k, a.max_updates, a.seed);
    spec.step = match (a.alpha, a.auto_alpha) {
        (Some(alpha), _) => StepRule::Manual(alpha),
        (None, true) => StepRule::Auto,
        (None, false) => StepRule::Manual(0.01),
    };
    spec.precision = a.precision;
    spec.executor = exec.clone();
    spec.max_writes = a.max_writes;
    spec.snapshot_every = a.snapshot_every;
    spec.log_writes = a.log_writes;
    spec.stop_on_success = a.stop_on_success;
    let report = train(&spec, &data, a.model, a.reg, x_star.as_deref())?;
    let run = &report.run;

    let mut rows: Vec<(&str, String)> = vec![
        ("model", format!("{:?}", a.model).to_lowercase()),
        ("precision", format!("{:?}", a.precision)),
        ("executor", executor_label(&exec)),
        ("threads", run.threads.to_string()),
        ("alpha", report.alpha.to_string()),
        ("updates", run.updates.to_string()),
        ("writes", run.writes.to_string()),
        ("loss", report.loss.to_string()),
        ("measured_tau_estimate", run.mean_staleness.to_string()),
        ("max_staleness", run.max_staleness.to_string()),
        ("update_saturation_rate", run.saturation.rate().to_string()),
        (
            "data_saturation_rate",
            report.data_saturation.rate().to_string(),
        ),
        (
            "update_scale",
            report
                .update_format
                .map(|f| f.scale.to_string())
                .unwrap_or_default(),
        ),
        ("delay_clamps", run.delay_clamps.to_string()),
        ("grad_bound", k.grad_bound.to_string()),
        ("lipschitz", k.lipschitz.to_string()),
        ("strong_convexity", k.strong_convexity.to_string()),
    ];
    if let Some(xs) = &x_star {
        rows.push((
            "optimum_loss",
            training_loss(xs, &data, a.model, a.reg).to_string(),
        ));
        rows.push(("final_dist_sq", dist_sq(&run.final_x, xs).to_string()));
        rows.push((
            "success_update",
            run.success_update()
                .map(|u| u.to_string())
                .unwrap_or_default(),
        ));
        let dist0 = dist_sq(&vec![0.0; data.dim], xs);
        let which = match a.precision {
            Precision::Full => Corollary::Hogwild {
                k: &k,
                dist0_sq: dist0,
                t: a.max_updates as f64,
            },
            Precision::Fixed(_) => Corollary::Buckwild {
                k: &k,
                dist0_sq: dist0,
                t: a.max_updates as f64,
            },
        };
        if let Ok(CorollaryValue::Failure(b)) = bound_corollaries(which) {
            rows.push(("corollary_failure_bound", b.value.to_string()));
        }
    }
    write_kv(&dir.join("train_report.csv"), &rows, invocation)?;

    if let Some(log) = &run.log {
        let mut out = BufWriter::new(File::create(dir.join("trajectory.csv"))?);
        log.write_csv(&mut out)?;
        writeln!(out, "# invocation: {invocation}")?;
        out.flush()?;
    }
    if !run.snapshots.is_empty() {
        write_snapshots(
            &run.snapshots,
            BufWriter::new(File::create(dir.join("snapshots.bin"))?),
        )?;
        if let Some(xs) = &x_star {
            write_w_trace(dir, &spec, &k, report.alpha, xs, run, invocation)?;
        }
    }
    Ok(())
}

/// `W_t` and `V_t` along the snapshots (time in writes; `V` uses a
/// geometric delay model with the measured mean staleness).
fn write_w_trace(
    dir: &Path,
    spec: &ConvexRunSpec,
    k: &crate::model::ConvexConstants,
    alpha: f64,
    x_star: &[f64],
    run: &crate::engine::RunReport,
    invocation: &str,
) -> Result<()> {
    let low = matches!(spec.precision, Precision::Fixed(_));
    let kk = crate::model::ConvexConstants {
        kappa: spec.effective_kappa(),
        ..*k
    };
    let w = match convex_w(&kk, alpha, x_star.to_vec(), low) {
        Ok(w) => w,
        Err(e) => {
            log::warn!("no w_trace.csv: {e}");
            return Ok(());
        }
    };
    let delays = DelayDistribution::geometric_with_mean(run.mean_staleness)?;
    let v = build_v(&w, delays)?;
    let mut xs = vec![vec![0.0; x_star.len()]];
    xs.extend(run.snapshots.iter().map(|s| s.values.clone()));
    let ws = w.evaluate_trajectory(&xs);
    let vs = v.evaluate_trajectory(&xs)?;
    let mut csv = CsvOut::create(&dir.join("w_trace.csv"), "snapshot,t,w,v", invocation)?;
    let mut ts = vec![0u64];
    ts.extend(run.snapshots.iter().map(|s| s.t));
    for (i, ((t, w), v)) in ts.iter().zip(&ws).zip(&vs).enumerate() {
        csv.row(&[i.to_string(), t.to_string(), w.to_string(), v.to_string()])?;
    }
    csv.finish()
}

fn alecton(a: &AlectonArgs, dir: &Path, invocation: &str) -> Result<()> {
    let eigs = spectrum_or_default(&a.spectrum);
    let m = gen_spectral_matrix(a.n, &eigs, a.matrix_seed)?;
    let theta = a.theta.unwrap_or_else(|| default_theta(a.epsilon));
    let k_theory = m.constants(a.gamma, theta, a.epsilon, 1.0);
    k_theory.validate()?;
    let eta = match (a.eta, a.auto_eta) {
        (Some(e), _) => e,
        (None, true) => alecton_step_size(&k_theory),
        (None, false) => suites::ALECTON_ETA,
    };
    let exec = executor(a.mode, a.threads, &a.delay)?;
    let mut spec = AlectonRunSpec::new(eta, a.epsilon, a.max_writes, a.seed);
    spec.executor = exec.clone();
    spec.check_every = a.check_every;
    let r = run_alecton(&m, &spec)?;
    let tau = r.run.mean_staleness;
    let k = m.constants(a.gamma, theta, a.epsilon, r.measured_c);
    let hb = alecton_t_and_bound(&k, tau)?;
    write_kv(
        &dir.join("alecton_report.csv"),
        &[
            ("n", a.n.to_string()),
            ("executor", executor_label(&exec)),
            ("eta", eta.to_string()),
            ("eta_theory", alecton_step_size(&k_theory).to_string()),
            ("writes", r.run.writes.to_string()),
            ("final_alignment", r.final_alignment.to_string()),
            (
                "success_write",
                r.success_write.map(|w| w.to_string()).unwrap_or_default(),
            ),
            ("coherence", m.coherence().to_string()),
            ("eigengap", m.eigengap().to_string()),
            ("frobenius", m.frobenius().to_string()),
            ("measured_c", r.measured_c.to_string()),
            ("norm_violations", r.norm_violations.to_string()),
            ("measured_tau_estimate", tau.to_string()),
            ("horizon", hb.horizon.to_string()),
            ("failure_bound", hb.failure.value.to_string()),
            ("failure_bound_vacuous", hb.failure.vacuous.to_string()),
        ],
        invocation,
    )?;
    let mut csv = CsvOut::create(
        &dir.join("alecton_trace.csv"),
        "writes,alignment",
        invocation,
    )?;
    for (w, al) in &r.trace {
        csv.row(&[w.to_string(), al.to_string()])?;
    }
    csv.finish()
}

fn verify(a: &VerifyArgs, dir: &Path, invocation: &str) -> Result<bool> {
    let scale = if a.full { Scale::Full } else { Scale::Quick };
    let checks = run_suite(&a.suite, scale)?;
    let mut csv = CsvOut::create(
        &dir.join(format!("verify_{}.csv", a.suite)),
        "check,statistic,threshold,verdict",
        invocation,
    )?;
    let mut ok = true;
    for c in &checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        println!(
            "{verdict} {} statistic={:e} threshold={:e}",
            c.name, c.statistic, c.threshold
        );
        csv.row(&[
            c.name.clone(),
            c.statistic.to_string(),
            c.threshold.to_string(),
            verdict.to_string(),
        ])?;
        ok &= c.pass;
    }
    csv.finish()?;
    Ok(ok)
}
