//! Benchmark drivers on random instances. Each returns summary rows that
//! serialize to CSV.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{AssocError, Result};
use crate::gen::{gate_matrix, gate_needed, gen_chain, random_dense_with, same_solutions, seeded_rng};
use crate::gibbs::gibbs_sample_with;
use crate::kbest::{KBest, OutputSet, Version};
use crate::matrix::SparseCostMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    /// Pairs kept per row for gated versions.
    pub gate: usize,
    pub versions: Vec<Version>,
    /// Worker threads for trials; 1 runs them sequentially.
    pub threads: usize,
    /// Run every version once untimed before measuring.
    pub warmup: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![100],
            k: 200,
            trials: 10,
            seed: 0,
            gate: 30,
            versions: Version::ALL.to_vec(),
            threads: 1,
            warmup: true,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(AssocError::invalid("sizes must be non-empty and at least 1"));
        }
        if self.k == 0 {
            return Err(AssocError::invalid("K must be at least 1"));
        }
        if self.trials == 0 {
            return Err(AssocError::invalid("trials must be at least 1"));
        }
        if self.gate == 0 {
            return Err(AssocError::invalid("gate must be at least 1"));
        }
        if self.versions.is_empty() {
            return Err(AssocError::invalid("no versions selected"));
        }
        Ok(())
    }
}

/// Mean, median and 95th percentile (nearest rank) of a sample, in ms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timing {
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
}

impl Timing {
    pub fn of(samples: &[f64]) -> Timing {
        if samples.is_empty() {
            return Timing { mean_ms: f64::NAN, median_ms: f64::NAN, p95_ms: f64::NAN };
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let median = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        Timing { mean_ms: s.iter().sum::<f64>() / n as f64, median_ms: median, p95_ms: s[rank - 1] }
    }
}

pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64() * 1e3)
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| AssocError::invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Writes rows as CSV with a header line.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Total likelihood of `outputs` over the likelihood of the best one.
pub fn likelihood_ratio(outputs: &OutputSet) -> f64 {
    let Some(best) = outputs.entries.first().map(|e| e.total) else { return 0.0 };
    outputs.iter().map(|e| (best - e.total).exp()).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenseRow {
    pub size: usize,
    pub version: &'static str,
    pub k: usize,
    pub trials: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    /// Trials whose solutions equal those of the first listed version.
    pub agree: usize,
}

struct TrialRun {
    times: Vec<f64>,
    agree: Vec<bool>,
    extra: f64,
    peak: usize,
}

fn run_versions<F>(cfg: &BenchConfig, mut solve: F) -> Result<TrialRun>
where
    F: FnMut(Version, &mut KBest) -> Result<OutputSet>,
{
    let mut times = Vec::with_capacity(cfg.versions.len());
    let mut agree = Vec::with_capacity(cfg.versions.len());
    let mut reference: Option<OutputSet> = None;
    let mut peak = 0;
    for &v in &cfg.versions {
        let mut driver = KBest::new(v.config());
        let (out, ms) = timed(|| solve(v, &mut driver));
        let out = out?;
        peak = peak.max(driver.stats().peak_queue);
        times.push(ms);
        agree.push(reference.as_ref().is_none_or(|r| same_solutions(r, &out)));
        if reference.is_none() {
            reference = Some(out);
        }
    }
    Ok(TrialRun { times, agree, extra: 0.0, peak })
}

fn warmup(cfg: &BenchConfig, m: &SparseCostMatrix) -> Result<()> {
    if cfg.warmup {
        let g = gate_matrix(m, cfg.gate);
        for &v in &cfg.versions {
            KBest::new(v.config()).single(if v.gated() { &g } else { m }, cfg.k)?;
        }
    }
    Ok(())
}

/// Single-input K-best on random square matrices. Matrix generation and
/// gating are not timed.
pub fn run_dense_bench(cfg: &BenchConfig) -> Result<Vec<DenseRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &size in &cfg.sizes {
        warmup(cfg, &random_dense_with(size, size, &mut seeded_rng(cfg.seed, u64::MAX)))?;
        let runs: Vec<TrialRun> = in_pool(cfg.threads, || {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let m = random_dense_with(size, size, &mut seeded_rng(cfg.seed, t as u64));
                    let g = gate_matrix(&m, cfg.gate);
                    run_versions(cfg, |v, d| d.single(if v.gated() { &g } else { &m }, cfg.k))
                })
                .collect::<Result<Vec<_>>>()
        })??;
        rows.extend(summarize(cfg, &runs).into_iter().map(|(version, timing, agree, _, _)| DenseRow {
            size,
            version,
            k: cfg.k,
            trials: cfg.trials,
            mean_ms: timing.mean_ms,
            median_ms: timing.median_ms,
            p95_ms: timing.p95_ms,
            agree,
        }));
    }
    Ok(rows)
}

#[allow(clippy::type_complexity)]
fn summarize(cfg: &BenchConfig, runs: &[TrialRun]) -> Vec<(&'static str, Timing, usize, f64, usize)> {
    cfg.versions
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let times: Vec<f64> = runs.iter().map(|r| r.times[i]).collect();
            let agree = runs.iter().filter(|r| r.agree[i]).count();
            let extra = runs.iter().map(|r| r.extra).sum::<f64>() / runs.len() as f64;
            let peak = runs.iter().map(|r| r.peak).max().unwrap_or(0);
            (v.name(), Timing::of(&times), agree, extra, peak)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MimoRow {
    pub size: usize,
    pub version: &'static str,
    pub k: usize,
    pub trials: usize,
    /// Mean row count of the second-stage matrix.
    pub stage2_rows: f64,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub agree: usize,
    /// Largest queue length seen over all trials and versions.
    pub peak_queue: usize,
}

/// Second stage of a two-stage chain: the K outputs of a random `size x size`
/// problem become input hypotheses of a second random matrix.
pub fn run_mimo_bench(cfg: &BenchConfig) -> Result<Vec<MimoRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &size in &cfg.sizes {
        let runs: Vec<TrialRun> = in_pool(cfg.threads, || {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let chain = gen_chain(size, cfg.k, cfg.seed, t as u64)?;
                    let g = gate_matrix(&chain.stage2, cfg.gate);
                    let mut run = run_versions(cfg, |v, d| {
                        d.mimo(if v.gated() { &g } else { &chain.stage2 }, &chain.hypotheses, cfg.k)
                    })?;
                    run.extra = chain.stage2.n_rows() as f64;
                    Ok(run)
                })
                .collect::<Result<Vec<_>>>()
        })??;
        rows.extend(summarize(cfg, &runs).into_iter().map(|(version, timing, agree, extra, peak)| MimoRow {
            size,
            version,
            k: cfg.k,
            trials: cfg.trials,
            stage2_rows: extra,
            mean_ms: timing.mean_ms,
            median_ms: timing.median_ms,
            p95_ms: timing.p95_ms,
            agree,
            peak_queue: peak,
        }));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsConfig {
    pub size: usize,
    pub trials: usize,
    pub seed: u64,
    /// Output counts of the deterministic solver.
    pub k_list: Vec<usize>,
    /// Sample counts of the Gibbs sampler.
    pub samples: Vec<usize>,
    pub threads: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig { size: 100, trials: 20, seed: 0, k_list: vec![10, 1000], samples: vec![10, 10_000], threads: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GibbsRow {
    pub method: &'static str,
    /// Associations requested (deterministic) or sweeps drawn (Gibbs).
    pub count: usize,
    pub trials: usize,
    pub mean_ratio: f64,
    pub stderr_ratio: f64,
    pub mean_unique: f64,
    pub mean_ms: f64,
}

/// Likelihood ratio of the deterministic solver against the Gibbs sampler.
pub fn run_gibbs_bench(cfg: &GibbsConfig) -> Result<Vec<GibbsRow>> {
    if cfg.size == 0 || cfg.trials == 0 {
        return Err(AssocError::invalid("size and trials must be at least 1"));
    }
    if cfg.k_list.contains(&0) || cfg.samples.contains(&0) {
        return Err(AssocError::invalid("counts must be at least 1"));
    }
    // per trial: (ratio, unique, ms) for every deterministic then every Gibbs count
    let per_trial: Vec<Vec<(f64, f64, f64)>> = in_pool(cfg.threads, || {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = seeded_rng(cfg.seed, t as u64);
                let m = random_dense_with(cfg.size, cfg.size, &mut rng);
                let mut res = Vec::new();
                for &k in &cfg.k_list {
                    let (out, ms) = timed(|| KBest::new(Version::V3.config()).single(&m, k));
                    let out = out?;
                    res.push((likelihood_ratio(&out), out.len() as f64, ms));
                }
                for &n in &cfg.samples {
                    // every sample count replays the same chain
                    let mut chain = seeded_rng(cfg.seed.wrapping_add(1), t as u64);
                    let (s, ms) = timed(|| gibbs_sample_with(&m, n, &mut chain));
                    let s = s?;
                    res.push((s.likelihood_ratio, s.unique.len() as f64, ms));
                }
                Ok(res)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let labels = cfg.k_list.iter().map(|&k| ("deterministic", k)).chain(cfg.samples.iter().map(|&n| ("gibbs", n)));
    Ok(labels
        .enumerate()
        .map(|(i, (method, count))| {
            let col = |f: fn(&(f64, f64, f64)) -> f64| per_trial.iter().map(|r| f(&r[i])).collect::<Vec<f64>>();
            let (mean_ratio, stderr_ratio) = mean_and_stderr(&col(|x| x.0));
            GibbsRow {
                method,
                count,
                trials: cfg.trials,
                mean_ratio,
                stderr_ratio,
                mean_unique: mean_and_stderr(&col(|x| x.1)).0,
                mean_ms: mean_and_stderr(&col(|x| x.2)).0,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateRow {
    pub size: usize,
    pub trial: usize,
    /// Smallest gate reproducing the dense K best.
    pub s_star: usize,
    pub gate: usize,
    /// Whether the configured gate reproduced the dense K best.
    pub exact: bool,
}

/// Per-trial minimal sufficient gate and an exactness check at `cfg.gate`.
pub fn run_gate_sweep(cfg: &BenchConfig) -> Result<Vec<GateRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &size in &cfg.sizes {
        let part: Vec<GateRow> = in_pool(cfg.threads, || {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let m = random_dense_with(size, size, &mut seeded_rng(cfg.seed, t as u64));
                    let dense = KBest::new(Version::V3.config()).single(&m, cfg.k)?;
                    let gated = KBest::new(Version::V4.config()).single(&gate_matrix(&m, cfg.gate), cfg.k)?;
                    Ok(GateRow {
                        size,
                        trial: t,
                        s_star: gate_needed(&m, &dense),
                        gate: cfg.gate,
                        exact: same_solutions(&dense, &gated),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })??;
        rows.extend(part);
    }
    Ok(rows)
}
