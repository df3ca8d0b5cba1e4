//! Acceptance criteria, one line per criterion. Closed-form evaluators are
//! compared against the second evaluations written out in this file.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wildtamer::alecton::{alecton_step_size, alecton_t_and_bound};
use wildtamer::cli::bench_quant;
use wildtamer::cli::suites::{run_suite, Check, Scale};
use wildtamer::convex_sgd::{step_size_buckwild, step_size_hogwild};
use wildtamer::data_io::gen_synthetic_logistic;
use wildtamer::fixedpoint::{quantize, Bits, FixedPointSpec, QuantState};
use wildtamer::martingale::{
    bound_async, bound_corollaries, bound_sequential, Corollary, CorollaryValue,
};
use wildtamer::model::{AlectonConstants, ConvexConstants};

struct Outcome {
    pass: bool,
    detail: String,
}

fn from_checks(checks: &[Check]) -> Outcome {
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.pass).collect();
    let detail = if failed.is_empty() {
        format!("{} checks", checks.len())
    } else {
        failed
            .iter()
            .map(|c| format!("{} {:e} > {:e}", c.name, c.statistic, c.threshold))
            .collect::<Vec<_>>()
            .join("; ")
    };
    Outcome {
        pass: failed.is_empty(),
        detail,
    }
}

fn suite(name: &str) -> Vec<Check> {
    run_suite(name, Scale::Full).unwrap_or_else(|e| panic!("suite {name}: {e}"))
}

fn find<'a>(checks: &'a [Check], name: &str) -> &'a Check {
    checks
        .iter()
        .find(|c| c.name == name)
        .unwrap_or_else(|| panic!("missing check {name}"))
}

/// Threshold of a suite check must equal the pinned value.
fn pinned(checks: &[Check], name: &str, threshold: f64) -> bool {
    find(checks, name).threshold == threshold
}

// ---------------------------------------------------------------- 1

fn quantizer_unbiased() -> Outcome {
    let draws = 1_000_000u64;
    let s = 0.01;
    let spec = FixedPointSpec::new(Bits::Eight, s).unwrap();
    let tol = 4.0 * (s / 2.0) / 1e3;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut state = QuantState::new(102, 7);
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut ok = true;
    for _ in 0..20 {
        let mut x: f64 = rng.random_range(-1.2..1.2);
        while (x / s).fract() == 0.0 {
            x = rng.random_range(-1.2..1.2);
        }
        let mut sum = 0i64;
        for _ in 0..draws {
            sum += quantize(x, &spec, &mut state).unwrap() as i64;
        }
        let err = (sum as f64 * s / draws as f64 - x).abs();
        worst = worst.max(err);
        ok &= err <= tol;
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: ok && secs < 10.0,
        detail: format!("max |mean - x| = {worst:.2e} (tol {tol:.1e}), {secs:.2} s"),
    }
}

// ---------------------------------------------------------------- 2

fn oracle_hogwild(c: f64, l: f64, m: f64, eps: f64, theta: f64, tau: f64) -> f64 {
    let cross = 2.0 * l * m * tau * eps.sqrt();
    c * eps * theta / (m.powi(2) + cross)
}

fn oracle_buckwild(c: f64, l: f64, m: f64, eps: f64, theta: f64, kappa: f64, tau: f64) -> f64 {
    let k2 = kappa.powi(2);
    c * eps * theta / (m.powi(2) * (1.0 + k2) + l * m * tau * (2.0 + k2) * eps.sqrt())
}

fn oracle_corollary(num: f64, c: f64, eps: f64, theta: f64, t: f64, d0: f64) -> f64 {
    num * (1.0 + (d0 / eps).ln()) / (c.powi(2) * eps * theta * t)
}

fn oracle_eta(a: &AlectonConstants) -> f64 {
    a.eigengap * a.epsilon * a.gamma * a.theta
        / (2.0 * a.n as f64 * a.coherence.powi(4) * a.frobenius.powi(2))
}

fn oracle_alecton(a: &AlectonConstants, tau: f64) -> (f64, Option<f64>) {
    let n = a.n as f64;
    let t = 4.0
        * n
        * a.coherence.powi(4)
        * a.frobenius.powi(2)
        * (1.0 + (n / (a.gamma * a.epsilon)).ln())
        / (a.eigengap.powi(2) * a.epsilon * a.gamma * a.theta * (2.0 * PI * a.gamma).sqrt());
    let den = a.coherence.powi(2) - 4.0 * a.norm_bound * a.theta * tau * a.epsilon.sqrt();
    let b = (den > 0.0).then(|| (8.0 * PI * a.gamma).sqrt() * a.coherence.powi(2) / den);
    (t, b)
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        ((a - b) / b).abs()
    }
}

fn formula_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    let mut kappa_identity = true;
    let mut vacuous_agree = true;
    for _ in 0..1000 {
        let c = rng.random_range(1e-3..3.0);
        let l = rng.random_range(0.0..10.0);
        let m = rng.random_range(1e-2..10.0);
        let eps = rng.random_range(1e-4..1.0);
        let theta = rng.random_range(0.01..0.99);
        let kappa = rng.random_range(0.0..2.0);
        let tau = rng.random_range(0.0..50.0);
        let t = rng.random_range(1.0..1e9);
        let d0 = eps * rng.random_range(1.5..1e4);
        let k = ConvexConstants::new(c, l, m, eps, theta, kappa, tau).unwrap();
        let k0 = ConvexConstants { kappa: 0.0, ..k };

        worst = worst.max(rel(
            step_size_hogwild(&k),
            oracle_hogwild(c, l, m, eps, theta, tau),
        ));
        worst = worst.max(rel(
            step_size_buckwild(&k),
            oracle_buckwild(c, l, m, eps, theta, kappa, tau),
        ));

        let raw = |w: Corollary| match bound_corollaries(w).unwrap() {
            CorollaryValue::Failure(b) => b.raw,
            other => panic!("unexpected {other:?}"),
        };
        let h = raw(Corollary::Hogwild {
            k: &k,
            dist0_sq: d0,
            t,
        });
        let b = raw(Corollary::Buckwild {
            k: &k,
            dist0_sq: d0,
            t,
        });
        let h_or = oracle_corollary(m * m + 2.0 * l * m * tau * eps.sqrt(), c, eps, theta, t, d0);
        let b_or = oracle_corollary(
            m * m * (1.0 + kappa * kappa) + l * m * tau * (2.0 + kappa * kappa) * eps.sqrt(),
            c,
            eps,
            theta,
            t,
            d0,
        );
        worst = worst.max(rel(h, h_or)).max(rel(b, b_or));
        let CorollaryValue::Horizon(hz) = bound_corollaries(Corollary::SimplifiedHorizon {
            k: &k,
            dist0_sq: d0,
        })
        .unwrap() else {
            panic!("expected horizon");
        };
        let hz_or = (m.powi(2) + 2.0 * l * m * tau * eps.sqrt()) / (c.powi(2) * theta * eps)
            * (d0 / eps).ln();
        worst = worst.max(rel(hz, hz_or));

        kappa_identity &= step_size_buckwild(&k0) == step_size_hogwild(&k0)
            && raw(Corollary::Buckwild {
                k: &k0,
                dist0_sq: d0,
                t,
            }) == raw(Corollary::Hogwild {
                k: &k0,
                dist0_sq: d0,
                t,
            });

        let w0 = rng.random_range(0.0..1e6);
        worst = worst.max(rel(bound_sequential(w0, t).unwrap().raw, w0 / t));
        let (hh, rr, xx) = (
            rng.random_range(0.0..10.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
        );
        let f = hh * rr * xx * tau;
        let ba = bound_async(w0, hh, rr, xx, tau, t).unwrap();
        if f < 1.0 {
            worst = worst.max(rel(ba.raw, w0 / (t * (1.0 - f))));
        } else {
            vacuous_agree &= ba.vacuous;
        }

        let a = AlectonConstants {
            n: rng.random_range(2..5000),
            eigengap: rng.random_range(1e-3..2.0),
            coherence: rng.random_range(1.0..10.0),
            gamma: rng.random_range(1e-3..1.0),
            theta: 0.0,
            epsilon: rng.random_range(1e-3..0.5),
            norm_bound: rng.random_range(1.0..100.0),
            frobenius: rng.random_range(0.5..50.0),
        };
        let a = AlectonConstants {
            theta: rng.random_range(0.05..0.95) / (1.0 + a.epsilon),
            ..a
        };
        worst = worst.max(rel(alecton_step_size(&a), oracle_eta(&a)));
        let atau = rng.random_range(0.0..5.0);
        let got = alecton_t_and_bound(&a, atau).unwrap();
        let (t_or, b_or) = oracle_alecton(&a, atau);
        worst = worst.max(rel(got.horizon, t_or));
        match b_or {
            Some(v) => worst = worst.max(rel(got.failure.raw, v)),
            None => vacuous_agree &= got.failure.vacuous,
        }
        let cor = bound_corollaries(Corollary::Alecton { k: &a, tau: atau }).unwrap();
        match cor {
            CorollaryValue::Alecton { horizon, failure } => {
                worst = worst.max(rel(horizon, t_or));
                if let Some(v) = b_or {
                    worst = worst.max(rel(failure.raw, v));
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }
    Outcome {
        pass: worst <= 1e-12 && kappa_identity && vacuous_agree,
        detail: format!(
            "max relative error {worst:.2e} (tol 1e-12), kappa=0 identity {kappa_identity}, vacuous flags {vacuous_agree}"
        ),
    }
}

// ---------------------------------------------------------------- 3, 4

fn supermartingale() -> Outcome {
    let start = Instant::now();
    let checks = suite("supermartingale");
    let mut o = from_checks(&checks);
    let counted = ["quadratic", "logistic", "alecton"].iter().all(|p| {
        checks
            .iter()
            .any(|c| c.name == format!("supermartingale.{p}.failures_of_100"))
    });
    let exact = find(&checks, "supermartingale.quadratic.max_std_err").statistic == 0.0;
    let secs = start.elapsed().as_secs_f64();
    o.pass &= counted && exact && secs < 300.0;
    o.detail = format!("{}, 100 states x 3 families, {secs:.1} s", o.detail);
    o
}

fn stopped_process() -> Outcome {
    let checks = suite("stopped");
    let mut o = from_checks(&checks);
    o.pass &= checks
        .iter()
        .any(|c| c.name == "stopped.geometric_0.5.failures_of_100")
        && checks
            .iter()
            .any(|c| c.name == "stopped.geometric_0.9.failures_of_100");
    o
}

// ---------------------------------------------------------------- 5

fn bounds_vs_empirical() -> Outcome {
    let start = Instant::now();
    let checks = suite("bounds");
    let rates: Vec<&Check> = checks
        .iter()
        .filter(|c| c.name.ends_with("failure_rate"))
        .collect();
    let mut o = from_checks(&checks);
    let secs = start.elapsed().as_secs_f64();
    o.pass &= rates.len() == 8 && secs < 900.0;
    o.detail = format!("{} configurations, {}, {secs:.1} s", rates.len(), o.detail);
    o
}

// ---------------------------------------------------------------- 6

fn precision_parity() -> Outcome {
    let checks = suite("parity");
    let mut o = from_checks(&checks);
    o.pass &= pinned(&checks, "parity.loss_gap_8bit", 0.005)
        && pinned(&checks, "parity.loss_gap_16bit", 0.001);
    o.detail = format!(
        "gap8 {:.2e}, gap16 {:.2e}",
        find(&checks, "parity.loss_gap_8bit").statistic,
        find(&checks, "parity.loss_gap_16bit").statistic
    );
    o
}

// ---------------------------------------------------------------- 7

fn alecton_convergence() -> Outcome {
    let checks = suite("alecton");
    let mut o = from_checks(&checks);
    o.pass &= pinned(&checks, "alecton.mean_alignment_gap", 0.05);
    o.detail = format!(
        "{}; failure seq {} async {}, alignment gap {:.2e}",
        o.detail,
        find(&checks, "alecton.sequential.failure_rate").statistic,
        find(&checks, "alecton.async4.failure_rate").statistic,
        find(&checks, "alecton.mean_alignment_gap").statistic
    );
    o
}

// ---------------------------------------------------------------- 8, 9, 10

fn plog_and_tau() -> Outcome {
    let mut checks = suite("plog");
    checks.extend(suite("tau"));
    from_checks(&checks)
}

fn engine() -> Outcome {
    from_checks(&suite("engine"))
}

fn speedup_measurement() -> Outcome {
    let (data, _) = gen_synthetic_logistic(1000, 10_000, 10, 1).unwrap();
    match bench_quant(&data, &[1, 2, 4], &[32, 16, 8], 50_000, 0) {
        Ok(rows) => {
            let base = rows.iter().find(|r| r.threads == 1 && r.bits == 32);
            let ok = rows.len() == 9
                && base.is_some_and(|b| b.speedup_vs_seq32 == 1.0)
                && rows.iter().all(|r| r.updates_per_sec > 0.0);
            let best = rows.iter().map(|r| r.speedup_vs_seq32).fold(0.0, f64::max);
            Outcome {
                pass: ok,
                detail: format!("{} rows, best speedup {best:.2}x (report only)", rows.len()),
            }
        }
        Err(e) => Outcome {
            pass: false,
            detail: e.to_string(),
        },
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("quantizer unbiasedness", quantizer_unbiased),
        ("step-size and bound formula fidelity", formula_fidelity),
        ("supermartingale suite", supermartingale),
        ("stopped-process suite", stopped_process),
        ("bound vs empirical failure", bounds_vs_empirical),
        ("precision parity", precision_parity),
        ("alecton convergence", alecton_convergence),
        ("plog and tau properties", plog_and_tau),
        ("engine correctness", engine),
        ("speedup measurement", speedup_measurement),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {verdict} {name}: {}", i + 1, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
