//! Executors for the asynchronous update recursion `x_{t+1} = x_t − G̃_t(ṽ_t)`.
//!
//! * [`run_sequential`]: plain single-threaded loop, `ṽ_t = x_t`.
//! * [`run_async`]: lock-free worker threads sharing one [`ParamVector`];
//!   every coordinate write is one atomic read-add-write and takes the next
//!   index from a global write counter.
//! * [`run_simulated`]: single-threaded, but each coordinate read returns
//!   `x_{t−τ̃}` with `τ̃` drawn from a [`DelayDistribution`], making the
//!   delay model controllable.
//!
//! All three share the same random streams, so with one thread (or zero
//! delays) they produce identical trajectories for a given seed.

mod delay;
mod log;
mod param;

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use self::delay::DelayDistribution;
pub use self::log::{
    measure_tau, read_snapshots, write_snapshots, Snapshot, TrajectoryLog, WriteRecord, LOG_HEADER,
};
pub use self::param::ParamVector;

use crate::error::{contract, Error, Result};
use crate::fixedpoint::{quantize, QuantState, SaturationStats};
use crate::model::SuccessRegion;

/// Random stream used by the update sampler of worker `k` is `k`; rounding
/// and delays use disjoint stream ranges.
const QUANT_STREAM_BASE: u64 = 1 << 32;
const DELAY_STREAM: u64 = 1 << 40;

pub type StreamRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A family of i.i.d. stochastic updates.
///
/// One update is drawn, reads a set of coordinates, and produces additive
/// per-coordinate deltas (`−G̃` in the recursion above).
pub trait UpdateSource: Sync {
    type Draw;

    fn dim(&self) -> usize;

    fn draw(&self, rng: &mut StreamRng) -> Self::Draw;

    /// Coordinates the update reads.
    fn reads(&self, draw: &Self::Draw, out: &mut Vec<usize>);

    /// Deltas given the values read, in the order of [`Self::reads`].
    fn deltas(&self, draw: &Self::Draw, read: &[f64], out: &mut Vec<(usize, f64)>);
}

/// Apply one drawn update to a plain vector, reading it consistently.
pub fn apply_update<S: UpdateSource>(source: &S, draw: &S::Draw, x: &mut [f64]) {
    let mut reads = Vec::new();
    source.reads(draw, &mut reads);
    let vals: Vec<f64> = reads.iter().map(|&i| x[i]).collect();
    let mut deltas = Vec::new();
    source.deltas(draw, &vals, &mut deltas);
    for (i, d) in deltas {
        x[i] += d;
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// horizon, in updates
    pub max_updates: u64,
    pub max_writes: Option<u64>,
    pub stop_on_success: bool,
    /// success is tested after every `check_every`-th update
    pub check_every: u64,
    pub snapshot_every: Option<u64>,
    pub log_writes: bool,
    pub seed: u64,
    /// simulated executor history length, in writes
    pub history: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            max_updates: 1000,
            max_writes: None,
            stop_on_success: true,
            check_every: 1,
            snapshot_every: None,
            log_writes: false,
            seed: 0,
            history: 4096,
        }
    }
}

impl RunConfig {
    pub fn new(max_updates: u64, seed: u64) -> Self {
        RunConfig {
            max_updates,
            seed,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.check_every == 0 {
            return contract("check_every must be at least 1");
        }
        if self.snapshot_every == Some(0) {
            return contract("snapshot_every must be at least 1");
        }
        Ok(())
    }
}

/// First passing success check.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessEvent {
    /// updates completed when the check passed
    pub update: u64,
    /// writes committed when the check passed
    pub write: u64,
    /// the iterate the check was evaluated on
    pub x: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub final_x: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub success: Option<SuccessEvent>,
    pub updates: u64,
    pub writes: u64,
    /// mean staleness over all writes (estimate of τ)
    pub mean_staleness: f64,
    pub max_staleness: u64,
    pub wall_time: Duration,
    pub saturation: SaturationStats,
    pub log: Option<TrajectoryLog>,
    /// simulated delays that exceeded the history buffer
    pub delay_clamps: u64,
    pub threads: usize,
}

impl RunReport {
    pub fn success_update(&self) -> Option<u64> {
        self.success.as_ref().map(|s| s.update)
    }

    /// Whether success was observed within `horizon` updates.
    pub fn succeeded_by(&self, horizon: u64) -> bool {
        matches!(self.success_update(), Some(u) if u <= horizon)
    }
}

/// Per-thread mutable state.
struct Worker {
    id: usize,
    rng: StreamRng,
    quant: Option<QuantState>,
    reads: Vec<usize>,
    vals: Vec<f64>,
    deltas: Vec<(usize, f64)>,
    log: Vec<WriteRecord>,
    snapshots: Vec<Snapshot>,
    staleness_sum: u128,
    staleness_max: u64,
    writes: u64,
}

impl Worker {
    fn new(id: usize, seed: u64, params: &ParamVector) -> Self {
        Worker {
            id,
            rng: stream_rng(seed, id as u64),
            quant: params
                .fixed_spec()
                .map(|_| QuantState::new(seed, QUANT_STREAM_BASE + id as u64)),
            reads: Vec::new(),
            vals: Vec::new(),
            deltas: Vec::new(),
            log: Vec::new(),
            snapshots: Vec::new(),
            staleness_sum: 0,
            staleness_max: 0,
            writes: 0,
        }
    }

    /// Commit one delta with a single atomic add; returns the delta applied.
    #[inline]
    fn commit(&mut self, params: &ParamVector, i: usize, delta: f64) -> Result<f64> {
        if !delta.is_finite() {
            return Err(Error::Diverged(format!(
                "non-finite delta {delta} for coordinate {i}"
            )));
        }
        match (params.fixed_spec(), self.quant.as_mut()) {
            (Some(spec), Some(q)) => {
                let code = quantize(delta, spec, q)?;
                params.add_code(i, code);
                Ok(code as f64 * spec.scale)
            }
            _ => {
                params.add(i, delta);
                Ok(delta)
            }
        }
    }

    #[inline]
    fn record(&mut self, cfg: &RunConfig, t: u64, coord: usize, delta: f64, staleness: u64) {
        self.staleness_sum += staleness as u128;
        self.staleness_max = self.staleness_max.max(staleness);
        self.writes += 1;
        if cfg.log_writes {
            self.log.push(WriteRecord {
                t,
                coord,
                delta,
                staleness,
                thread: self.id,
            });
        }
    }

    fn maybe_snapshot(&mut self, cfg: &RunConfig, params: &ParamVector, writes_after: u64) {
        if let Some(every) = cfg.snapshot_every {
            if writes_after % every == 0 {
                self.snapshots.push(Snapshot {
                    t: writes_after,
                    values: params.snapshot(),
                });
            }
        }
    }
}

struct Aggregate {
    snapshots: Vec<Snapshot>,
    logs: Vec<Vec<WriteRecord>>,
    staleness_sum: u128,
    staleness_max: u64,
    writes: u64,
    saturation: SaturationStats,
}

fn aggregate(workers: Vec<Worker>) -> Aggregate {
    let mut agg = Aggregate {
        snapshots: Vec::new(),
        logs: Vec::new(),
        staleness_sum: 0,
        staleness_max: 0,
        writes: 0,
        saturation: SaturationStats::default(),
    };
    for w in workers {
        agg.snapshots.extend(w.snapshots);
        agg.logs.push(w.log);
        agg.staleness_sum += w.staleness_sum;
        agg.staleness_max = agg.staleness_max.max(w.staleness_max);
        agg.writes += w.writes;
        if let Some(q) = w.quant {
            agg.saturation.merge(q.stats);
        }
    }
    agg.snapshots.sort_by_key(|s| s.t);
    agg
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    params: &ParamVector,
    agg: Aggregate,
    success: Option<SuccessEvent>,
    updates: u64,
    cfg: &RunConfig,
    start: Instant,
    delay_clamps: u64,
    threads: usize,
) -> RunReport {
    let mean_staleness = if agg.writes == 0 {
        0.0
    } else {
        agg.staleness_sum as f64 / agg.writes as f64
    };
    RunReport {
        final_x: params.snapshot(),
        snapshots: agg.snapshots,
        success,
        updates,
        writes: agg.writes,
        mean_staleness,
        max_staleness: agg.staleness_max,
        wall_time: start.elapsed(),
        saturation: agg.saturation,
        log: cfg.log_writes.then(|| TrajectoryLog::merge(agg.logs)),
        delay_clamps,
        threads,
    }
}

fn check_region(
    region: Option<&SuccessRegion>,
    params: &ParamVector,
    scratch: &mut Vec<f64>,
) -> bool {
    match region {
        Some(r) => {
            params.snapshot_into(scratch);
            r.contains_unchecked(scratch)
        }
        None => false,
    }
}

fn check_dims<S: UpdateSource>(
    source: &S,
    params: &ParamVector,
    region: Option<&SuccessRegion>,
) -> Result<()> {
    if source.dim() != params.dim() {
        return contract(format!(
            "update source has dimension {} but parameters have {}",
            source.dim(),
            params.dim()
        ));
    }
    if let Some(r) = region {
        if r.dim() != params.dim() {
            return contract("success region dimension does not match parameters");
        }
    }
    Ok(())
}

/// Sequential recursion: one thread, no staleness.
pub fn run_sequential<S: UpdateSource>(
    source: &S,
    params: &ParamVector,
    region: Option<&SuccessRegion>,
    cfg: &RunConfig,
) -> Result<RunReport> {
    cfg.validate()?;
    check_dims(source, params, region)?;
    let start = Instant::now();
    let mut w = Worker::new(0, cfg.seed, params);
    let mut scratch = Vec::new();
    let mut success = None;
    if check_region(region, params, &mut scratch) {
        success = Some(SuccessEvent {
            update: 0,
            write: 0,
            x: scratch.clone(),
        });
    }
    let mut writes = 0u64;
    let mut updates = 0u64;
    while updates < cfg.max_updates {
        if success.is_some() && cfg.stop_on_success {
            break;
        }
        if cfg.max_writes.is_some_and(|m| writes >= m) {
            break;
        }
        let draw = source.draw(&mut w.rng);
        w.reads.clear();
        source.reads(&draw, &mut w.reads);
        w.vals.clear();
        w.vals.extend(w.reads.iter().map(|&i| params.read(i)));
        w.deltas.clear();
        source.deltas(&draw, &w.vals, &mut w.deltas);
        let deltas = std::mem::take(&mut w.deltas);
        for &(i, d) in &deltas {
            let applied = w.commit(params, i, d)?;
            w.record(cfg, writes, i, applied, 0);
            writes += 1;
            w.maybe_snapshot(cfg, params, writes);
        }
        w.deltas = deltas;
        updates += 1;
        if success.is_none()
            && updates % cfg.check_every == 0
            && check_region(region, params, &mut scratch)
        {
            success = Some(SuccessEvent {
                update: updates,
                write: writes,
                x: scratch.clone(),
            });
        }
    }
    let agg = aggregate(vec![w]);
    Ok(build_report(
        params, agg, success, updates, cfg, start, 0, 1,
    ))
}

/// Lock-free multi-threaded execution.
///
/// Staleness of a write is estimated as the number of foreign writes
/// committed between the worker's read and its write, using the global
/// write counter.
pub fn run_async<S: UpdateSource>(
    source: &S,
    params: &ParamVector,
    threads: usize,
    region: Option<&SuccessRegion>,
    cfg: &RunConfig,
) -> Result<RunReport> {
    cfg.validate()?;
    check_dims(source, params, region)?;
    if threads == 0 {
        return contract("at least one worker thread is required");
    }
    let start = Instant::now();
    let write_counter = AtomicU64::new(0);
    let update_counter = AtomicU64::new(0);
    let stop = AtomicBool::new(false);
    let success: Mutex<Option<SuccessEvent>> = Mutex::new(None);
    let failure: Mutex<Option<Error>> = Mutex::new(None);

    {
        let mut scratch = Vec::new();
        if check_region(region, params, &mut scratch) {
            *success.lock().unwrap() = Some(SuccessEvent {
                update: 0,
                write: 0,
                x: scratch,
            });
            if cfg.stop_on_success {
                stop.store(true, Ordering::SeqCst);
            }
        }
    }

    let workers: Vec<Worker> = thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|id| {
                let write_counter = &write_counter;
                let update_counter = &update_counter;
                let stop = &stop;
                let success = &success;
                let failure = &failure;
                s.spawn(move || {
                    let mut w = Worker::new(id, cfg.seed, params);
                    let mut scratch = Vec::new();
                    let result = (|| -> Result<()> {
                        loop {
                            if stop.load(Ordering::Relaxed) {
                                return Ok(());
                            }
                            if cfg
                                .max_writes
                                .is_some_and(|m| write_counter.load(Ordering::Relaxed) >= m)
                            {
                                return Ok(());
                            }
                            let u = update_counter.fetch_add(1, Ordering::AcqRel);
                            if u >= cfg.max_updates {
                                return Ok(());
                            }
                            let draw = source.draw(&mut w.rng);
                            w.reads.clear();
                            source.reads(&draw, &mut w.reads);
                            let read_at = write_counter.load(Ordering::Acquire);
                            w.vals.clear();
                            w.vals.extend(w.reads.iter().map(|&i| params.read(i)));
                            w.deltas.clear();
                            source.deltas(&draw, &w.vals, &mut w.deltas);
                            let deltas = std::mem::take(&mut w.deltas);
                            for (own, &(i, d)) in deltas.iter().enumerate() {
                                let t = write_counter.fetch_add(1, Ordering::AcqRel);
                                let applied = w.commit(params, i, d)?;
                                let staleness = t.saturating_sub(read_at + own as u64);
                                w.record(cfg, t, i, applied, staleness);
                                w.maybe_snapshot(cfg, params, t + 1);
                            }
                            w.deltas = deltas;
                            let done = u + 1;
                            if done % cfg.check_every == 0
                                && region.is_some()
                                && success.lock().unwrap().is_none()
                                && check_region(region, params, &mut scratch)
                            {
                                let mut slot = success.lock().unwrap();
                                let earlier = slot.as_ref().is_none_or(|e| e.update > done);
                                if earlier {
                                    *slot = Some(SuccessEvent {
                                        update: done,
                                        write: write_counter.load(Ordering::Acquire),
                                        x: scratch.clone(),
                                    });
                                }
                                if cfg.stop_on_success {
                                    stop.store(true, Ordering::SeqCst);
                                }
                            }
                        }
                    })();
                    if let Err(e) = result {
                        stop.store(true, Ordering::SeqCst);
                        failure.lock().unwrap().get_or_insert(e);
                    }
                    w
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });

    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let updates = update_counter.load(Ordering::Acquire).min(cfg.max_updates);
    let agg = aggregate(workers);
    let success = success.into_inner().unwrap();
    Ok(build_report(
        params, agg, success, updates, cfg, start, 0, threads,
    ))
}

/// Per-coordinate record of recent writes: `(write index, value before)`.
struct History {
    per_coord: Vec<VecDeque<(u64, f64)>>,
    horizon: u64,
}

impl History {
    fn new(dim: usize, horizon: u64) -> Self {
        History {
            per_coord: vec![VecDeque::new(); dim],
            horizon,
        }
    }

    fn push(&mut self, coord: usize, write: u64, before: f64) {
        let q = &mut self.per_coord[coord];
        let oldest = write.saturating_sub(self.horizon);
        while q.front().is_some_and(|&(w, _)| w < oldest) {
            q.pop_front();
        }
        q.push_back((write, before));
    }

    /// Value of `coord` after the first `s` writes, given its current value.
    fn value_at(&self, coord: usize, s: u64, current: f64) -> f64 {
        let q = &self.per_coord[coord];
        let k = q.partition_point(|&(w, _)| w < s);
        q.get(k).map_or(current, |&(_, before)| before)
    }
}

/// Single-threaded execution with simulated stale reads.
///
/// Before each update every read coordinate `i` draws its own delay
/// `τ̃_i` and sees `x_{t−τ̃_i}`, where `t` counts writes; reads before
/// time 0 return `x₀`. Delays beyond the history buffer are clamped to it.
pub fn run_simulated<S: UpdateSource>(
    source: &S,
    params: &ParamVector,
    delays: &DelayDistribution,
    region: Option<&SuccessRegion>,
    cfg: &RunConfig,
) -> Result<RunReport> {
    cfg.validate()?;
    check_dims(source, params, region)?;
    let start = Instant::now();
    let mut w = Worker::new(0, cfg.seed, params);
    let mut delay_rng = stream_rng(cfg.seed, DELAY_STREAM);
    let track = !matches!(delays, DelayDistribution::Zero);
    let mut history = History::new(params.dim(), cfg.history);
    let mut clamps = 0u64;
    let mut read_delays: Vec<u64> = Vec::new();
    let mut scratch = Vec::new();
    let mut success = None;
    if check_region(region, params, &mut scratch) {
        success = Some(SuccessEvent {
            update: 0,
            write: 0,
            x: scratch.clone(),
        });
    }
    let mut writes = 0u64;
    let mut updates = 0u64;
    while updates < cfg.max_updates {
        if success.is_some() && cfg.stop_on_success {
            break;
        }
        if cfg.max_writes.is_some_and(|m| writes >= m) {
            break;
        }
        let draw = source.draw(&mut w.rng);
        w.reads.clear();
        source.reads(&draw, &mut w.reads);
        w.vals.clear();
        read_delays.clear();
        for &i in &w.reads {
            let mut k = delays.sample(&mut delay_rng);
            if k > cfg.history {
                if clamps == 0 {
                    ::log::warn!(
                        "delay draw {k} exceeds history buffer {}; clamping",
                        cfg.history
                    );
                }
                clamps += 1;
                k = cfg.history;
            }
            let k = k.min(writes);
            let cur = params.read(i);
            w.vals.push(if k == 0 {
                cur
            } else {
                history.value_at(i, writes - k, cur)
            });
            read_delays.push(k);
        }
        w.deltas.clear();
        source.deltas(&draw, &w.vals, &mut w.deltas);
        let max_delay = read_delays.iter().copied().max().unwrap_or(0);
        let deltas = std::mem::take(&mut w.deltas);
        for &(i, d) in &deltas {
            // staleness of a write: the delay of the read of the same
            // coordinate, or the largest read delay if it was not read
            let staleness = w
                .reads
                .iter()
                .position(|&r| r == i)
                .map_or(max_delay, |k| read_delays[k]);
            let before = params.read(i);
            let applied = w.commit(params, i, d)?;
            if track {
                history.push(i, writes, before);
            }
            w.record(cfg, writes, i, applied, staleness);
            writes += 1;
            w.maybe_snapshot(cfg, params, writes);
        }
        w.deltas = deltas;
        updates += 1;
        if success.is_none()
            && updates % cfg.check_every == 0
            && check_region(region, params, &mut scratch)
        {
            success = Some(SuccessEvent {
                update: updates,
                write: writes,
                x: scratch.clone(),
            });
        }
    }
    let agg = aggregate(vec![w]);
    Ok(build_report(
        params, agg, success, updates, cfg, start, clamps, 1,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// `x ← x − rate·x` on a scalar, reading coordinate 0.
    struct Shrink {
        rate: f64,
    }

    impl UpdateSource for Shrink {
        type Draw = ();
        fn dim(&self) -> usize {
            1
        }
        fn draw(&self, _: &mut StreamRng) {}
        fn reads(&self, _: &(), out: &mut Vec<usize>) {
            out.push(0);
        }
        fn deltas(&self, _: &(), read: &[f64], out: &mut Vec<(usize, f64)>) {
            out.push((0, -self.rate * read[0]));
        }
    }

    /// Adds a uniform random amount to a random coordinate among `coords`.
    struct RandomKick {
        dim: usize,
        coords: Vec<usize>,
    }

    impl UpdateSource for RandomKick {
        type Draw = (usize, f64);
        fn dim(&self) -> usize {
            self.dim
        }
        fn draw(&self, rng: &mut StreamRng) -> (usize, f64) {
            (
                self.coords[rng.random_range(0..self.coords.len())],
                rng.random::<f64>(),
            )
        }
        fn reads(&self, d: &(usize, f64), out: &mut Vec<usize>) {
            out.push(d.0);
        }
        fn deltas(&self, d: &(usize, f64), read: &[f64], out: &mut Vec<(usize, f64)>) {
            out.push((d.0, d.1 - 0.1 * read[0]));
        }
    }

    #[test]
    fn constant_one_delay_hand_simulation() {
        let p = ParamVector::from_slice(&[1.0]);
        let mut cfg = RunConfig::new(3, 0);
        cfg.snapshot_every = Some(1);
        let rep = run_simulated(
            &Shrink { rate: 0.1 },
            &p,
            &DelayDistribution::Constant(1),
            None,
            &cfg,
        )
        .unwrap();
        let xs: Vec<f64> = rep.snapshots.iter().map(|s| s.values[0]).collect();
        assert!((xs[0] - 0.9).abs() < 1e-15);
        assert!((xs[1] - 0.8).abs() < 1e-15);
        // x3 = x2 − 0.1·x1
        assert!((xs[2] - (0.8 - 0.09)).abs() < 1e-15);
    }

    #[test]
    fn zero_delay_matches_sequential_bitwise() {
        let src = RandomKick {
            dim: 4,
            coords: vec![0, 1, 2, 3],
        };
        let mut cfg = RunConfig::new(500, 17);
        cfg.log_writes = true;
        let a = ParamVector::zeros(4);
        let b = ParamVector::zeros(4);
        let c = ParamVector::zeros(4);
        let ra = run_sequential(&src, &a, None, &cfg).unwrap();
        let rb = run_simulated(&src, &b, &DelayDistribution::Zero, None, &cfg).unwrap();
        let rc = run_async(&src, &c, 1, None, &cfg).unwrap();
        assert_eq!(ra.final_x, rb.final_x);
        assert_eq!(ra.final_x, rc.final_x);
        assert_eq!(ra.log, rb.log);
        assert_eq!(ra.log, rc.log);
    }

    #[test]
    fn reads_never_see_the_future() {
        // with huge delays every read returns x0 until history fills
        let src = Shrink { rate: 0.5 };
        let p = ParamVector::from_slice(&[1.0]);
        let mut cfg = RunConfig::new(10, 3);
        cfg.log_writes = true;
        let rep = run_simulated(&src, &p, &DelayDistribution::Constant(1000), None, &cfg).unwrap();
        assert!((rep.final_x[0] - (1.0 - 10.0 * 0.5)).abs() < 1e-12);
        for r in &rep.log.unwrap().records {
            assert!(r.staleness <= r.t);
        }
    }

    #[test]
    fn history_overflow_is_clamped() {
        let src = Shrink { rate: 0.01 };
        let p = ParamVector::from_slice(&[1.0]);
        let mut cfg = RunConfig::new(50, 3);
        cfg.history = 4;
        let rep = run_simulated(&src, &p, &DelayDistribution::Constant(10), None, &cfg).unwrap();
        assert!(rep.delay_clamps > 0);
        assert_eq!(rep.max_staleness, 4);
    }

    #[test]
    fn divergence_is_reported() {
        struct Blow;
        impl UpdateSource for Blow {
            type Draw = ();
            fn dim(&self) -> usize {
                1
            }
            fn draw(&self, _: &mut StreamRng) {}
            fn reads(&self, _: &(), out: &mut Vec<usize>) {
                out.push(0);
            }
            fn deltas(&self, _: &(), read: &[f64], out: &mut Vec<(usize, f64)>) {
                out.push((0, read[0] * 1e300));
            }
        }
        let p = ParamVector::from_slice(&[1.0]);
        let cfg = RunConfig::new(10, 0);
        assert!(matches!(
            run_sequential(&Blow, &p, None, &cfg),
            Err(Error::Diverged(_))
        ));
        let p = ParamVector::from_slice(&[1.0]);
        assert!(matches!(
            run_async(&Blow, &p, 3, None, &cfg),
            Err(Error::Diverged(_))
        ));
    }

    #[test]
    fn success_stops_the_run() {
        let region = SuccessRegion::Ball {
            center: vec![0.0],
            radius_sq: 0.25,
        };
        let p = ParamVector::from_slice(&[1.0]);
        let cfg = RunConfig::new(100, 0);
        let rep = run_sequential(&Shrink { rate: 0.5 }, &p, Some(&region), &cfg).unwrap();
        let ev = rep.success.unwrap();
        assert_eq!(ev.update, 1);
        assert!(region.contains(&ev.x).unwrap());
        assert_eq!(rep.updates, 1);
    }

    #[test]
    fn disjoint_supports_add_up() {
        let left = RandomKick {
            dim: 4,
            coords: vec![0, 1],
        };
        let right = RandomKick {
            dim: 4,
            coords: vec![2, 3],
        };
        let cfg = RunConfig::new(300, 8);
        let a = ParamVector::zeros(4);
        let b = ParamVector::zeros(4);
        let ra = run_sequential(&left, &a, None, &cfg).unwrap();
        let rb = run_sequential(&right, &b, None, &cfg).unwrap();
        // union source: dispatch on an extra coin so both halves run in one
        // shared vector, one thread each
        let shared = ParamVector::zeros(4);
        thread::scope(|s| {
            s.spawn(|| run_sequential(&left, &shared, None, &cfg).unwrap());
            s.spawn(|| run_sequential(&right, &shared, None, &cfg).unwrap());
        });
        let got = shared.snapshot();
        assert_eq!(&got[..2], &ra.final_x[..2]);
        assert_eq!(&got[2..], &rb.final_x[2..]);
    }
}
