//! Throughput benchmark and figure emission (data CSV plus a matplotlib
//! script that reads it).

use std::fs;
use std::path::Path;

use super::suites::{self, standard_spectral};
use super::CsvOut;
use crate::alecton::{run_alecton, AlectonRunSpec};
use crate::convex_sgd::{train, ConvexRunSpec, Executor, Precision, StepRule};
use crate::data_io::gen_synthetic_logistic;
use crate::error::{contract, Result};
use crate::fixedpoint::Bits;
use crate::model::{estimate_constants, Dataset, GlmModel};

const BENCH_REG: f64 = 1e-3;
const BENCH_ALPHA: f64 = 0.05;

pub(super) fn standard_data() -> Result<Dataset> {
    Ok(gen_synthetic_logistic(1000, 10_000, 10, 1)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub threads: usize,
    pub bits: u32,
    pub updates_per_sec: f64,
    /// throughput relative to one thread at full precision
    pub speedup_vs_seq32: f64,
}

fn precision_of(bits: u32) -> Result<Precision> {
    match bits {
        32 | 64 => Ok(Precision::Full),
        b => Ok(Precision::Fixed(Bits::from_u32(b)?)),
    }
}

fn throughput(data: &Dataset, threads: usize, bits: u32, updates: u64, seed: u64) -> Result<f64> {
    let k = estimate_constants(data, GlmModel::Logistic, BENCH_REG, 1.5)?
        .with_run(1.0, 0.5, 0.0, 0.0)?;
    let mut spec = ConvexRunSpec::new(k, updates, seed);
    spec.step = StepRule::Manual(BENCH_ALPHA);
    spec.precision = precision_of(bits)?;
    spec.executor = if threads == 1 {
        Executor::Sequential
    } else {
        Executor::Async(threads)
    };
    let r = train(&spec, data, GlmModel::Logistic, BENCH_REG, None)?;
    let secs = r.run.wall_time.as_secs_f64().max(1e-9);
    Ok(r.run.updates as f64 / secs)
}

/// Updates per second for every `(threads, bits)` pair. Hardware dependent;
/// nothing is asserted about the numbers.
pub fn bench_quant(
    data: &Dataset,
    threads: &[usize],
    bits: &[u32],
    updates: u64,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    if data.is_empty() {
        return contract("benchmark needs a non-empty dataset");
    }
    if threads.iter().any(|&t| t == 0) {
        return contract("thread counts must be positive");
    }
    let base = throughput(data, 1, 32, updates, seed)?;
    let mut rows = Vec::new();
    for &t in threads {
        for &b in bits {
            let ups = if t == 1 && precision_of(b)? == Precision::Full {
                base
            } else {
                throughput(data, t, b, updates, seed)?
            };
            rows.push(BenchRow {
                threads: t,
                bits: b,
                updates_per_sec: ups,
                speedup_vs_seq32: ups / base,
            });
        }
    }
    Ok(rows)
}

pub(super) fn write_bench(path: &Path, rows: &[BenchRow], invocation: &str) -> Result<()> {
    let mut csv = CsvOut::create(
        path,
        "threads,bits,updates_per_sec,speedup_vs_seq32",
        invocation,
    )?;
    for r in rows {
        csv.row(&[
            r.threads.to_string(),
            r.bits.to_string(),
            format!("{:.1}", r.updates_per_sec),
            format!("{:.4}", r.speedup_vs_seq32),
        ])?;
    }
    csv.finish()
}

pub(super) fn speedup(dir: &Path, threads: &[usize], updates: u64, invocation: &str) -> Result<()> {
    let rows = bench_quant(&standard_data()?, threads, &[32, 16, 8], updates, 0)?;
    write_bench(&dir.join("speedup.csv"), &rows, invocation)?;
    fs::write(dir.join("speedup.py"), SPEEDUP_PY)?;
    Ok(())
}

pub(super) fn alecton_figure(dir: &Path, runs: u64, invocation: &str) -> Result<()> {
    if runs == 0 {
        return contract("need at least one run");
    }
    let m = standard_spectral(1000)?;
    let mut curves: Vec<Vec<(u64, f64)>> = Vec::new();
    for exec in [Executor::Sequential, Executor::Async(4)] {
        let mut sum: Vec<(u64, f64)> = Vec::new();
        for seed in 0..runs {
            let mut spec =
                AlectonRunSpec::new(suites::ALECTON_ETA, 0.1, suites::ALECTON_WRITES, seed);
            spec.executor = exec.clone();
            spec.check_every = 100_000;
            let r = run_alecton(&m, &spec)?;
            if sum.is_empty() {
                sum = r.trace.iter().map(|&(w, _)| (w, 0.0)).collect();
            }
            for (s, &(_, a)) in sum.iter_mut().zip(&r.trace) {
                s.1 += a / runs as f64;
            }
        }
        curves.push(sum);
    }
    let mut csv = CsvOut::create(
        &dir.join("alecton.csv"),
        "writes,sequential,async",
        invocation,
    )?;
    for ((w, s), (_, a)) in curves[0].iter().zip(&curves[1]) {
        csv.row(&[w.to_string(), s.to_string(), a.to_string()])?;
    }
    csv.finish()?;
    fs::write(dir.join("alecton.py"), ALECTON_PY)?;
    Ok(())
}

pub(super) fn precision(dir: &Path, seeds: u64, updates: u64, invocation: &str) -> Result<()> {
    if seeds == 0 {
        return contract("need at least one seed");
    }
    let data = standard_data()?;
    let k = estimate_constants(&data, GlmModel::Logistic, BENCH_REG, 1.5)?
        .with_run(1.0, 0.5, 0.0, 0.0)?;
    let mut losses = Vec::new();
    for bits in [32u32, 16, 8] {
        let l = suites::mean_loss(
            &data,
            BENCH_REG,
            &k,
            BENCH_ALPHA,
            updates,
            precision_of(bits)?,
            &Executor::Sequential,
            seeds,
        )?;
        losses.push((bits, l));
    }
    let full = losses[0].1;
    let mut csv = CsvOut::create(
        &dir.join("precision.csv"),
        "bits,loss,gap_vs_32",
        invocation,
    )?;
    for (b, l) in &losses {
        csv.row(&[b.to_string(), l.to_string(), (l - full).to_string()])?;
    }
    csv.finish()?;
    fs::write(dir.join("precision.py"), PRECISION_PY)?;
    Ok(())
}

const SPEEDUP_PY: &str = r##"import csv, sys
import matplotlib.pyplot as plt

rows = [r for r in csv.DictReader(l for l in open("speedup.csv") if not l.startswith("#"))]
for bits in sorted({r["bits"] for r in rows}, key=int, reverse=True):
    pts = sorted((int(r["threads"]), float(r["speedup_vs_seq32"])) for r in rows if r["bits"] == bits)
    plt.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"{bits}-bit")
plt.xlabel("threads")
plt.ylabel("speedup over sequential full precision")
plt.legend()
plt.savefig(sys.argv[1] if len(sys.argv) > 1 else "speedup.png", dpi=150)
"##;

const ALECTON_PY: &str = r##"import csv, sys
import matplotlib.pyplot as plt

rows = [r for r in csv.DictReader(l for l in open("alecton.csv") if not l.startswith("#"))]
w = [int(r["writes"]) for r in rows]
plt.plot(w, [float(r["sequential"]) for r in rows], label="sequential")
plt.plot(w, [float(r["async"]) for r in rows], label="lock-free", linestyle="--")
plt.xlabel("writes")
plt.ylabel("alignment with top eigenvector")
plt.legend()
plt.savefig(sys.argv[1] if len(sys.argv) > 1 else "alecton.png", dpi=150)
"##;

const PRECISION_PY: &str = r##"import csv, sys
import matplotlib.pyplot as plt

rows = [r for r in csv.DictReader(l for l in open("precision.csv") if not l.startswith("#"))]
plt.bar([r["bits"] + "-bit" for r in rows], [float(r["loss"]) for r in rows])
plt.ylabel("training loss")
plt.savefig(sys.argv[1] if len(sys.argv) > 1 else "precision.png", dpi=150)
"##;
