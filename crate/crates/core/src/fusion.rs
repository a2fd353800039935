//! Three-view fusion of static point objects.
//!
//! Objects live in the unit cube. Each sensor observes two of the three
//! coordinates: sensor 0 sees (x, y), sensor 1 sees (x, z), sensor 2 sees
//! (y, z). Sensors 0 and 1 are associated first on their shared x
//! coordinate. The resulting hypotheses feed a second, multi-input
//! association against sensor 2. Unmatched measurements are kept as
//! candidates with a probability of existence.

use std::collections::HashMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::association::{HypothesisSet, MISS};
use crate::error::{AssocError, Result};
use crate::experiments::mean_and_stderr;
use crate::gen::seeded_rng;
use crate::kbest::{KBest, KBestConfig, OutputSet};
use crate::matrix::{build_cost, LikelihoodInputs, SparseCostMatrix};

/// Coordinates seen by each sensor.
pub const SENSOR_DIMS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub n_objects: usize,
    pub p_detect: f64,
    /// Measurement noise standard deviation per axis.
    pub sigma: f64,
    /// Mean false positives per sensor and scan, uniform over the unit square.
    pub fp_rate: f64,
    /// Gate on the Mahalanobis distance of the compared coordinates.
    pub gate: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams { n_objects: 100, p_detect: 0.995, sigma: 0.001, fp_rate: 0.25, gate: 5.0 }
    }
}

impl SimParams {
    /// Intensity of unmatched measurements of one sensor in the first stage:
    /// objects the other sensor missed plus false positives.
    fn stage1_unmatched(&self) -> f64 {
        self.n_objects as f64 * self.p_detect * (1.0 - self.p_detect) + self.fp_rate
    }

    /// Existence probability of a first-stage singleton.
    pub fn singleton_existence(&self) -> f64 {
        self.n_objects as f64 * self.p_detect * (1.0 - self.p_detect) / self.stage1_unmatched()
    }

    /// Intensity of third-sensor measurements that match no candidate.
    fn stage2_unmatched(&self) -> f64 {
        self.n_objects as f64 * (1.0 - self.p_detect).powi(2) * self.p_detect + self.fp_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub pos: [f64; 2],
    /// Generating object, `None` for false positives. Used only for scoring.
    pub source: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub objects: Vec<[f64; 3]>,
    pub frames: [Vec<Measurement>; 3],
}

impl Scene {
    /// Measurement index of each object in each frame.
    pub fn truth(&self) -> Vec<[Option<usize>; 3]> {
        let mut t = vec![[None; 3]; self.objects.len()];
        for (s, frame) in self.frames.iter().enumerate() {
            for (k, m) in frame.iter().enumerate() {
                if let Some(o) = m.source {
                    t[o][s] = Some(k);
                }
            }
        }
        t
    }
}

pub fn project(p: &[f64; 3], sensor: usize) -> [f64; 2] {
    let (a, b) = SENSOR_DIMS[sensor];
    [p[a], p[b]]
}

/// Draws objects and the three frames. Frames are shuffled so measurement
/// order carries no information.
pub fn simulate_scene(params: &SimParams, seed: u64, trial: u64) -> Scene {
    let mut rng = seeded_rng(seed, trial);
    let objects: Vec<[f64; 3]> = (0..params.n_objects).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    let noise = Normal::new(0.0, params.sigma).expect("sigma is finite and nonnegative");
    let fp = Poisson::new(params.fp_rate).ok();
    let frames = std::array::from_fn(|s| {
        let mut frame = Vec::new();
        for (o, p) in objects.iter().enumerate() {
            if rng.random::<f64>() < params.p_detect {
                let [a, b] = project(p, s);
                frame.push(Measurement {
                    pos: [a + noise.sample(&mut rng), b + noise.sample(&mut rng)],
                    source: Some(o),
                });
            }
        }
        let n_fp = fp.map_or(0, |d| d.sample(&mut rng) as usize);
        for _ in 0..n_fp {
            frame.push(Measurement { pos: [rng.random(), rng.random()], source: None });
        }
        frame.shuffle(&mut rng);
        frame
    });
    Scene { objects, frames }
}

fn gauss(d: f64, var: f64) -> f64 {
    (-0.5 * d * d / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Costs between sensor-0 rows and sensor-1 columns on the shared x coordinate.
pub fn stage1_costs(frame0: &[Measurement], frame1: &[Measurement], params: &SimParams) -> Result<SparseCostMatrix> {
    let var = 2.0 * params.sigma * params.sigma;
    let scale = params.n_objects as f64 * params.p_detect * params.p_detect;
    let likelihoods = frame0
        .iter()
        .map(|a| {
            frame1
                .iter()
                .enumerate()
                .filter_map(|(j, b)| {
                    let d = a.pos[0] - b.pos[0];
                    (d * d <= params.gate * params.gate * var).then(|| (j, scale * gauss(d, var)))
                })
                .collect()
        })
        .collect();
    let miss = params.stage1_unmatched();
    build_cost(&LikelihoodInputs {
        n_cols: frame1.len(),
        likelihoods,
        miss_row: vec![miss; frame0.len()],
        miss_col: vec![miss; frame1.len()],
    })
}

/// A second-stage row: a first-stage pair or a single unmatched measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Candidate {
    pub m0: Option<usize>,
    pub m1: Option<usize>,
}

impl Candidate {
    fn existence(&self, params: &SimParams) -> f64 {
        if self.m0.is_some() && self.m1.is_some() {
            1.0
        } else {
            params.singleton_existence()
        }
    }
}

/// Second-stage problem built from first-stage hypotheses.
#[derive(Debug, Clone)]
pub struct Stage2 {
    pub candidates: Vec<Candidate>,
    pub hypotheses: HypothesisSet,
    pub costs: SparseCostMatrix,
}

/// Candidate list and hypotheses of the second stage. Each first-stage
/// output contributes its pairs and its unmatched measurements of both
/// sensors. The prior of a hypothesis is its first-stage NLL plus the NLL of
/// all its candidates going undetected, which the second-stage costs are
/// measured against.
pub fn stage2_problem(scene: &Scene, stage1: &OutputSet, params: &SimParams) -> Result<Stage2> {
    let (f0, f1, f2) = (&scene.frames[0], &scene.frames[1], &scene.frames[2]);
    let mut per_hyp: Vec<Vec<Candidate>> = Vec::with_capacity(stage1.len());
    for e in stage1.iter() {
        let mut used = vec![false; f1.len()];
        let mut cands = Vec::new();
        for (i, &j) in e.association.row_to.iter().enumerate() {
            if j == MISS {
                cands.push(Candidate { m0: Some(i), m1: None });
            } else {
                used[j] = true;
                cands.push(Candidate { m0: Some(i), m1: Some(j) });
            }
        }
        cands.extend(used.iter().enumerate().filter(|(_, &u)| !u).map(|(j, _)| Candidate { m0: None, m1: Some(j) }));
        per_hyp.push(cands);
    }
    let mut candidates: Vec<Candidate> = per_hyp.iter().flatten().copied().collect();
    candidates.sort_unstable();
    candidates.dedup();
    let index: HashMap<Candidate, usize> = candidates.iter().enumerate().map(|(k, &c)| (c, k)).collect();

    let pd = params.p_detect;
    let miss_row: Vec<f64> = candidates.iter().map(|c| 1.0 - c.existence(params) * pd).collect();
    let members: Vec<Vec<usize>> = per_hyp.iter().map(|cs| cs.iter().map(|c| index[c]).collect()).collect();
    let priors =
        stage1.iter().zip(&members).map(|(e, m)| e.total - m.iter().map(|&r| miss_row[r].ln()).sum::<f64>()).collect();
    let hypotheses = HypothesisSet::new(candidates.len(), members, priors)?;

    let var = 2.0 * params.sigma * params.sigma;
    let gate2 = params.gate * params.gate;
    let likelihoods = candidates
        .iter()
        .map(|c| {
            // sensor 2 sees (y, z): y comes from sensor 0, z from sensor 1
            let y = c.m0.map(|i| f0[i].pos[1]);
            let z = c.m1.map(|j| f1[j].pos[1]);
            let scale = c.existence(params) * pd;
            f2.iter()
                .enumerate()
                .filter_map(|(k, m)| {
                    let mut d2 = 0.0;
                    let mut l = scale;
                    for (own, seen) in [(y, m.pos[0]), (z, m.pos[1])] {
                        if let Some(v) = own {
                            let d = v - seen;
                            d2 += d * d / var;
                            l *= gauss(d, var);
                        }
                    }
                    (d2 <= gate2 && l > 0.0).then_some((k, l))
                })
                .collect()
        })
        .collect();
    let costs = build_cost(&LikelihoodInputs {
        n_cols: f2.len(),
        likelihoods,
        miss_row,
        miss_col: vec![params.stage2_unmatched(); f2.len()],
    })?;
    Ok(Stage2 { candidates, hypotheses, costs })
}

/// A reported object: its measurement in each frame, if any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Track {
    pub meas: [Option<usize>; 3],
    pub existence: f64,
}

/// Existence of every track of the best final hypothesis, and the tracks
/// whose existence exceeds one half.
///
/// Hypothesis weights are proportional to `exp(-total)`. Within one
/// hypothesis a track detected by the third sensor exists with probability 1;
/// an undetected one with its posterior `r (1 - pD) / (1 - r pD)`. The
/// existence of a track is the weighted sum over the hypotheses containing it.
pub fn existence_and_report(
    stage2: &Stage2,
    outputs: &OutputSet,
    params: &SimParams,
) -> Result<(Vec<Track>, Vec<Track>)> {
    let best = outputs.entries.first().ok_or_else(|| AssocError::invalid("no output hypotheses"))?;
    let pd = params.p_detect;
    let tracks_of = |row_to: &[usize], h: usize| -> Vec<([Option<usize>; 3], f64)> {
        stage2
            .hypotheses
            .members(h)
            .iter()
            .map(|&r| {
                let c = stage2.candidates[r];
                let k = row_to[r];
                let ex = if k != MISS {
                    1.0
                } else {
                    let e = c.existence(params);
                    e * (1.0 - pd) / (1.0 - e * pd)
                };
                ([c.m0, c.m1, (k != MISS).then_some(k)], ex)
            })
            .collect()
    };
    let weights: Vec<f64> = outputs.iter().map(|e| (best.total - e.total).exp()).collect();
    let norm: f64 = weights.iter().sum();
    let mut mass: HashMap<[Option<usize>; 3], f64> = HashMap::new();
    for (e, w) in outputs.iter().zip(&weights) {
        for (key, ex) in tracks_of(&e.association.row_to, e.parent()) {
            *mass.entry(key).or_insert(0.0) += w / norm * ex;
        }
    }
    let all: Vec<Track> = tracks_of(&best.association.row_to, best.parent())
        .into_iter()
        .map(|(meas, _)| Track { meas, existence: mass[&meas].min(1.0) })
        .collect();
    let reported = all.iter().copied().filter(|t| t.existence > 0.5).collect();
    Ok((all, reported))
}

/// `(FNR, FPR)`. An object counts as recovered when a report holds exactly
/// its measurements; a report is correct when it recovers some object.
pub fn score_run(reported: &[Track], scene: &Scene) -> (f64, f64) {
    let truth: HashMap<[Option<usize>; 3], usize> = scene
        .truth()
        .into_iter()
        .enumerate()
        .filter(|(_, t)| t.iter().any(Option::is_some))
        .map(|(o, t)| (t, o))
        .collect();
    let mut found = vec![false; scene.objects.len()];
    let mut wrong = 0;
    for t in reported {
        match truth.get(&t.meas) {
            Some(&o) => found[o] = true,
            None => wrong += 1,
        }
    }
    let n = scene.objects.len().max(1) as f64;
    let fnr = found.iter().filter(|f| !**f).count() as f64 / n;
    let fpr = if reported.is_empty() { 0.0 } else { wrong as f64 / reported.len() as f64 };
    (fnr, fpr)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub k: usize,
    pub fnr: f64,
    pub fpr: f64,
    /// Association and reporting time of the update, excluding simulation.
    pub ms: f64,
    pub stage2_rows: usize,
    pub reported: usize,
}

fn solver_config() -> KBestConfig {
    KBestConfig { early_stop: true, lookahead: true, sparse: true, ..Default::default() }
}

/// One full update on an already simulated scene.
pub fn run_update(scene: &Scene, k: usize, params: &SimParams) -> Result<TrialResult> {
    let start = Instant::now();
    let c1 = stage1_costs(&scene.frames[0], &scene.frames[1], params)?;
    let mut driver = KBest::new(solver_config());
    let out1 = driver.single(&c1, k)?;
    let stage2 = stage2_problem(scene, &out1, params)?;
    let out2 = driver.mimo(&stage2.costs, &stage2.hypotheses, k)?;
    let (_, reported) = existence_and_report(&stage2, &out2, params)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    let (fnr, fpr) = score_run(&reported, scene);
    Ok(TrialResult { k, fnr, fpr, ms, stage2_rows: stage2.candidates.len(), reported: reported.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusionRow {
    pub k: usize,
    pub trials: usize,
    pub mean_fnr: f64,
    pub stderr_fnr: f64,
    pub mean_fpr: f64,
    pub stderr_fpr: f64,
    pub mean_ms: f64,
    pub mean_stage2_rows: f64,
}

/// Runs every K on the same `trials` scenes. Returns the summary rows and
/// the per-scene results, indexed `[k][trial]`.
pub fn run_fusion_sweep(
    params: &SimParams,
    k_list: &[usize],
    trials: usize,
    seed: u64,
    threads: usize,
) -> Result<(Vec<FusionRow>, Vec<Vec<TrialResult>>)> {
    if k_list.is_empty() || k_list.contains(&0) || trials == 0 {
        return Err(AssocError::invalid("K values and trials must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| AssocError::invalid(format!("thread pool: {e}")))?;
    let per_trial: Vec<Vec<TrialResult>> = pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let scene = simulate_scene(params, seed, t as u64);
                k_list.iter().map(|&k| run_update(&scene, k, params)).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let by_k: Vec<Vec<TrialResult>> =
        (0..k_list.len()).map(|i| per_trial.iter().map(|r| r[i].clone()).collect()).collect();
    let rows = by_k
        .iter()
        .zip(k_list)
        .map(|(rs, &k)| {
            let col = |f: fn(&TrialResult) -> f64| rs.iter().map(f).collect::<Vec<f64>>();
            let (mean_fnr, stderr_fnr) = mean_and_stderr(&col(|r| r.fnr));
            let (mean_fpr, stderr_fpr) = mean_and_stderr(&col(|r| r.fpr));
            FusionRow {
                k,
                trials,
                mean_fnr,
                stderr_fnr,
                mean_fpr,
                stderr_fpr,
                mean_ms: mean_and_stderr(&col(|r| r.ms)).0,
                mean_stage2_rows: mean_and_stderr(&col(|r| r.stage2_rows as f64)).0,
            }
        })
        .collect();
    Ok((rows, by_k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clean() -> SimParams {
        SimParams { p_detect: 0.995, sigma: 0.0, fp_rate: 0.0, ..Default::default() }
    }

    #[test]
    fn projections() {
        let p = [0.2, 0.3, 0.7];
        assert_eq!(project(&p, 0), [0.2, 0.3]);
        assert_eq!(project(&p, 1), [0.2, 0.7]);
        assert_eq!(project(&p, 2), [0.3, 0.7]);
    }

    #[test]
    fn scene_is_deterministic_and_sized() {
        let p = SimParams::default();
        let a = simulate_scene(&p, 4, 0);
        assert_eq!(a, simulate_scene(&p, 4, 0));
        assert_ne!(a, simulate_scene(&p, 4, 1));
        let mean: f64 = (0..200)
            .map(|t| simulate_scene(&p, 1, t).frames.iter().map(Vec::len).sum::<usize>() as f64 / 3.0)
            .sum::<f64>()
            / 200.0;
        assert!((mean - 99.75).abs() < 0.3, "{mean}");
        for (s, f) in a.frames.iter().enumerate() {
            for m in f.iter().filter(|m| m.source.is_some()) {
                let truth = project(&a.objects[m.source.unwrap()], s);
                assert!((m.pos[0] - truth[0]).abs() < 0.01 && (m.pos[1] - truth[1]).abs() < 0.01);
            }
        }
    }

    #[test]
    fn stage1_mode_and_gate() {
        let p = SimParams::default();
        let s = 0.001 * 2f64.sqrt();
        let z = |x: f64| Measurement { pos: [x, 0.5], source: None };
        let c = stage1_costs(&[z(0.5)], &[z(0.5), z(0.5 + 2.0 * s), z(0.5 + 10.0 * s)], &p).unwrap();
        assert_eq!(c.row_cols(0), &[0, 1]);
        assert!(c.row_costs(0)[0] < c.row_costs(0)[1]);
    }

    #[test]
    fn single_object_pairs_correctly() {
        let p = SimParams { n_objects: 1, fp_rate: 0.0, ..Default::default() };
        let mut hits = 0;
        for t in 0..1000 {
            let scene = simulate_scene(&p, 11, t);
            let truth = scene.truth()[0];
            let c = stage1_costs(&scene.frames[0], &scene.frames[1], &p).unwrap();
            let out = KBest::new(solver_config()).single(&c, 1).unwrap();
            let row_to = &out.entries[0].association.row_to;
            let ok = match (truth[0], truth[1]) {
                (Some(i), Some(j)) => row_to[i] == j,
                _ => row_to.iter().all(|&c| c == MISS),
            };
            hits += ok as usize;
        }
        assert!(hits >= 990, "{hits}");
    }

    #[test]
    fn noise_free_single_hypothesis_is_perfect() {
        let p = SimParams { p_detect: 1.0 - 1e-12, ..clean() };
        let params = SimParams { sigma: 0.001, ..p.clone() };
        for t in 0..5 {
            let scene = simulate_scene(&p, 3, t);
            let r = run_update(&scene, 1, &params).unwrap();
            assert_eq!((r.fnr, r.fpr), (0.0, 0.0));
            assert_eq!(r.reported, 100);
        }
    }

    #[test]
    fn existence_bounds_and_single_hypothesis() {
        let p = SimParams::default();
        let scene = simulate_scene(&p, 5, 0);
        for k in [1, 20] {
            let c1 = stage1_costs(&scene.frames[0], &scene.frames[1], &p).unwrap();
            let out1 = KBest::new(solver_config()).single(&c1, k).unwrap();
            let s2 = stage2_problem(&scene, &out1, &p).unwrap();
            assert!(s2.candidates.len() <= 300 + 2 * 101, "{}", s2.candidates.len());
            let out2 = KBest::new(solver_config()).mimo(&s2.costs, &s2.hypotheses, k).unwrap();
            assert!(out2.len() <= k);
            let (all, reported) = existence_and_report(&s2, &out2, &p).unwrap();
            assert!(all.iter().all(|t| (0.0..=1.0).contains(&t.existence)));
            if k == 1 {
                // a lone hypothesis: every track detected by the third sensor or paired exists
                for t in &all {
                    let sure = t.meas[2].is_some() || (t.meas[0].is_some() && t.meas[1].is_some());
                    assert_eq!(t.existence > 0.5, sure);
                }
                assert_eq!(reported.len(), all.iter().filter(|t| t.existence > 0.5).count());
            }
        }
    }

    #[test]
    fn scoring_examples() {
        let p = SimParams { n_objects: 2, fp_rate: 0.0, p_detect: 1.0 - 1e-12, ..Default::default() };
        let scene = simulate_scene(&p, 0, 0);
        let truth = scene.truth();
        let perfect: Vec<Track> = truth.iter().map(|&meas| Track { meas, existence: 1.0 }).collect();
        assert_eq!(score_run(&perfect, &scene), (0.0, 0.0));
        assert_eq!(score_run(&[], &scene), (1.0, 0.0));
        let mut swapped = perfect.clone();
        swapped[0].meas[2] = truth[1][2];
        swapped.truncate(1);
        swapped.push(perfect[1]);
        assert_eq!(score_run(&swapped, &scene), (0.5, 0.5));
    }

    #[test]
    fn sweep_rows() {
        let p = SimParams { n_objects: 20, ..Default::default() };
        let (rows, per) = run_fusion_sweep(&p, &[1, 5], 3, 2, 2).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(per[0].len(), 3);
        assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.mean_fnr) && (0.0..=1.0).contains(&r.mean_fpr)));
        assert!(run_fusion_sweep(&p, &[0], 1, 0, 1).is_err());
    }
}
