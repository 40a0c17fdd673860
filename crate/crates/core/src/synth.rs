//! Synthetic registration benchmark: random ground-truth deformations of a
//! procedural texture, landmark RMSE, diversity telemetry, a conventional
//! crossover+mutation GA for comparison, and brute-force ground truth for
//! tiny genomes.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ffd::{map_point, ControlLattice, LatticeSpec};
use crate::fitness::{warp, GrayImage};
use crate::genome::{EncodingSpec, Genome};
use crate::pbo::{AnnealParams, GenerationLog, PboParams, Population, ROULETTE_EPS};
use crate::pyramid::{run_coarse_to_fine, CoarseToFine, Optimizer, PyramidSchedule};
use crate::rng;
use crate::Vec2;

const TAG_TEXTURE: u64 = 0x7e;
const TAG_CASE: u64 = 0xca5e;
const TAG_PBO: u64 = 0xb0;
const TAG_BASELINE: u64 = 0xba5e;
const TAG_BREED: u64 = 0xb4ee;

/// Side of the interior landmark grid.
pub const LANDMARK_GRID: usize = 5;

#[derive(Clone, Debug)]
pub struct SyntheticCase {
    pub case_id: usize,
    pub gt_lattice: ControlLattice,
    pub source: GrayImage,
    pub target: GrayImage,
    pub landmarks: Vec<Vec2>,
}

/// Smooth random texture: a sum of Gaussian blobs stretched to `[0, 1]`.
pub fn texture(seed: u64, w: usize, h: usize) -> Result<GrayImage> {
    let mut r = rng::stream(seed, &[TAG_TEXTURE]);
    let scale = w.min(h) as f64;
    let blobs: Vec<(f64, f64, f64, f64)> = (0..60)
        .map(|_| {
            (
                r.random_range(0.0..w as f64),
                r.random_range(0.0..h as f64),
                r.random_range(scale / 32.0..scale / 8.0),
                r.random_range(-1.0..1.0),
            )
        })
        .collect();
    let mut raw = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let v: f64 = blobs
                .iter()
                .map(|&(cx, cy, s, a)| {
                    let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                    a * (-d2 / (2.0 * s * s)).exp()
                })
                .sum();
            raw.push(v);
        }
    }
    let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    GrayImage::new(w, h, raw.into_iter().map(|v| ((v - lo) / span).clamp(0.0, 1.0)).collect())
}

/// Uniform `LANDMARK_GRID x LANDMARK_GRID` grid strictly inside the image.
pub fn landmark_grid(w: usize, h: usize) -> Vec<Vec2> {
    let n = LANDMARK_GRID;
    let mut out = Vec::with_capacity(n * n);
    for b in 0..n {
        for a in 0..n {
            out.push([
                w as f64 * (a + 1) as f64 / (n + 1) as f64,
                h as f64 * (b + 1) as f64 / (n + 1) as f64,
            ]);
        }
    }
    out
}

/// Ground truth drawn uniformly on the disk of radius `gt_radius` per node;
/// the target is the source warped by it.
pub fn generate_case(
    seed: u64,
    case_id: usize,
    image: &GrayImage,
    gt_k: usize,
    gt_l: usize,
    gt_radius: f64,
) -> Result<SyntheticCase> {
    if !(gt_radius.is_finite() && gt_radius >= 0.0) {
        return Err(Error::param("gt_radius", format!("must be finite and >= 0, got {gt_radius}")));
    }
    let spec = LatticeSpec::new(image.width(), image.height(), gt_k, gt_l)?;
    let mut r = rng::stream(seed, &[TAG_CASE, case_id as u64]);
    let d = (0..spec.node_count())
        .map(|_| {
            let rad = gt_radius * r.random::<f64>().sqrt();
            let theta = r.random_range(0.0..std::f64::consts::TAU);
            [rad * theta.cos(), rad * theta.sin()]
        })
        .collect();
    let gt_lattice = ControlLattice::from_displacements(spec, d)?;
    let target = warp(image, &gt_lattice)?;
    Ok(SyntheticCase {
        case_id,
        gt_lattice,
        source: image.clone(),
        target,
        landmarks: landmark_grid(image.width(), image.height()),
    })
}

/// Root-mean-square distance between where the two transforms send each
/// landmark.
pub fn landmark_rmse(estimated: &ControlLattice, gt: &ControlLattice, landmarks: &[Vec2]) -> Result<f64> {
    if landmarks.is_empty() {
        return Err(Error::NoLandmarks);
    }
    let (a, b) = (estimated.spec(), gt.spec());
    if (a.w, a.h) != (b.w, b.h) {
        return Err(Error::Dimension(format!("lattices cover {}x{} and {}x{}", a.w, a.h, b.w, b.h)));
    }
    let mut sum = 0.0;
    for &p in landmarks {
        let e = map_point(p, estimated)?;
        let g = map_point(p, gt)?;
        sum += (e[0] - g[0]).powi(2) + (e[1] - g[1]).powi(2);
    }
    Ok((sum / landmarks.len() as f64).sqrt())
}

pub fn hamming_diversity(pop: &Population) -> Result<f64> {
    if pop.len() < 2 {
        return Err(Error::PopulationTooSmall(pop.len()));
    }
    Ok(pop.mean_hamming())
}

/// Settings of the crossover+mutation comparison GA.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaselineParams {
    pub crossover_rate: f64,
    /// Per-bit flip rate; `None` means `1 / genome_length`.
    pub mutation_rate: Option<f64>,
    pub g_size: usize,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            crossover_rate: 0.9,
            mutation_rate: None,
            g_size: 200,
        }
    }
}

/// Conventional generational GA: roulette parents, one-point crossover,
/// per-bit mutation, one elite. Logs the same schema as the PBO loop with
/// `p_ann` fixed at 0.
pub fn baseline_ga<F>(
    initial: Population,
    params: &BaselineParams,
    objective: &F,
) -> Result<(Population, Vec<GenerationLog>)>
where
    F: Fn(&Genome) -> Result<f64> + Sync,
{
    let mut pop = initial;
    let seed = pop.seed;
    let mut log = Vec::with_capacity(params.g_size);
    for i in 0..params.g_size {
        pop.evaluate(objective)?;
        pop.normalize();
        log.push(GenerationLog {
            generation: pop.generation,
            best_sad: pop.elite().and_then(|e| e.objective).unwrap_or(f64::INFINITY),
            mean_sad: pop.individuals.iter().filter_map(|i| i.objective).sum::<f64>() / pop.len() as f64,
            p_ann: 0.0,
            mean_hamming: pop.mean_hamming(),
        });
        pop = breed(&pop, params, &mut rng::stream(seed, &[i as u64, TAG_BREED]));
    }
    pop.evaluate(objective)?;
    pop.normalize();
    Ok((pop, log))
}

fn breed(pop: &Population, params: &BaselineParams, r: &mut rng::Rng) -> Population {
    let n = pop.len();
    let mut next = Vec::with_capacity(n);
    let Some(elite) = pop.elite() else {
        return pop.clone();
    };
    next.push(elite.clone());
    let len = elite.genome.len();
    let mutation = params.mutation_rate.unwrap_or(if len > 0 { 1.0 / len as f64 } else { 0.0 });
    let wheel = WeightedIndex::new(pop.individuals.iter().map(|i| i.fitness.max(0.0) + ROULETTE_EPS))
        .expect("roulette weights are positive");
    while next.len() < n {
        let a = &pop.individuals[wheel.sample(r)];
        let b = &pop.individuals[wheel.sample(r)];
        let (mut c1, mut c2) = (a.clone(), b.clone());
        if len > 1 && r.random::<f64>() < params.crossover_rate {
            let cut = r.random_range(1..len);
            let (x, y) = (c1.genome.bits_mut(), c2.genome.bits_mut());
            x[cut..].swap_with_slice(&mut y[cut..]);
        }
        for c in [&mut c1, &mut c2] {
            for bit in c.genome.bits_mut() {
                if r.random::<f64>() < mutation {
                    *bit = !*bit;
                }
            }
        }
        for (child, parent) in [(c1, a), (c2, b)] {
            if next.len() < n {
                let mut child = child;
                if child.genome != parent.genome {
                    child.objective = None;
                }
                next.push(child);
            }
        }
    }
    Population {
        individuals: next,
        generation: pop.generation + 1,
        seed: pop.seed,
    }
}

/// Exhaustive minimum over all `2^genome_length` bit strings. Ties go to the
/// lowest unsigned value of the whole string read MSB first.
pub fn exhaustive_oracle<F>(objective: F, genome_length: usize, bits_per_param: u32) -> Result<(Genome, f64)>
where
    F: Fn(&Genome) -> Result<f64>,
{
    if genome_length > 20 {
        return Err(Error::TooLongToEnumerate(genome_length));
    }
    let mut best: Option<(u64, f64)> = None;
    for v in 0..(1u64 << genome_length) {
        let g = whole_string_genome(v, genome_length, bits_per_param)?;
        let o = objective(&g)?;
        if best.is_none_or(|(_, b)| o < b) {
            best = Some((v, o));
        }
    }
    let (v, o) = best.expect("at least one genome");
    Ok((whole_string_genome(v, genome_length, bits_per_param)?, o))
}

fn whole_string_genome(v: u64, len: usize, bits_per_param: u32) -> Result<Genome> {
    Genome::new((0..len).rev().map(|pos| (v >> pos) & 1 == 1).collect(), bits_per_param)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub n_cases: usize,
    pub image_size: usize,
    pub levels: usize,
    pub base_k: usize,
    pub base_l: usize,
    pub generations: usize,
    pub population: usize,
    pub enc: EncodingSpec,
    pub pbo: PboParams,
    pub anneal: AnnealParams,
    pub baseline: BaselineParams,
    pub gt_k: usize,
    pub gt_l: usize,
    pub gt_radius: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n_cases: 10,
            image_size: 128,
            levels: 3,
            base_k: 3,
            base_l: 3,
            generations: 200,
            population: 50,
            enc: EncodingSpec {
                bits_per_param: 5,
                radius: 3.0,
            },
            pbo: PboParams::default(),
            anneal: AnnealParams::default(),
            baseline: BaselineParams::default(),
            gt_k: 5,
            gt_l: 5,
            gt_radius: 8.0,
            seed: 0,
        }
    }
}

impl BenchConfig {
    pub fn schedule(&self) -> Result<PyramidSchedule> {
        PyramidSchedule::new(
            self.image_size,
            self.image_size,
            self.levels,
            self.base_k,
            self.base_l,
            self.generations,
            self.population,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.enc.validate()?;
        self.pbo.validate()?;
        AnnealParams { g_size: self.generations.max(1), ..self.anneal }.validate()?;
        if !(0.0..=1.0).contains(&self.baseline.crossover_rate) {
            return Err(Error::param("crossover_rate", "must be in [0, 1]"));
        }
        if let Some(m) = self.baseline.mutation_rate {
            if !(0.0..=1.0).contains(&m) {
                return Err(Error::param("mutation_rate", "must be in [0, 1]"));
            }
        }
        LatticeSpec::new(self.image_size, self.image_size, self.gt_k, self.gt_l)?;
        if !(self.gt_radius.is_finite() && self.gt_radius >= 0.0) {
            return Err(Error::param("gt_radius", "must be finite and >= 0"));
        }
        self.schedule().map(|_| ())
    }

    pub fn pbo_optimizer(&self) -> Optimizer {
        Optimizer::Pbo {
            pbo: self.pbo,
            anneal: self.anneal,
        }
    }

    pub fn baseline_optimizer(&self) -> Optimizer {
        Optimizer::Baseline(self.baseline)
    }
}

#[derive(Clone, Debug)]
pub struct CaseOutcome {
    pub case: SyntheticCase,
    pub pbo: CoarseToFine,
    pub baseline: CoarseToFine,
    pub rmse_pbo: f64,
    pub rmse_baseline: f64,
    pub rmse_identity: f64,
    pub runtime_pbo: Duration,
    pub runtime_baseline: Duration,
}

impl CaseOutcome {
    /// Mean pairwise Hamming distance at the middle generation of the finest
    /// level, for (PBO, baseline).
    pub fn midpoint_diversity(&self) -> (f64, f64) {
        (midpoint(&self.pbo), midpoint(&self.baseline))
    }
}

fn midpoint(run: &CoarseToFine) -> f64 {
    let log = &run.levels.last().expect("at least one level").log;
    log.get(log.len() / 2).map_or(f64::NAN, |r| r.mean_hamming)
}

#[derive(Clone, Debug)]
pub struct CaseReport {
    pub case_id: usize,
    pub outcome: std::result::Result<CaseOutcome, String>,
}

#[derive(Clone, Debug, Default)]
pub struct BenchReport {
    pub cases: Vec<CaseReport>,
}

impl BenchReport {
    pub fn successes(&self) -> impl Iterator<Item = &CaseOutcome> {
        self.cases.iter().filter_map(|c| c.outcome.as_ref().ok())
    }

    fn mean_of(&self, f: impl Fn(&CaseOutcome) -> f64) -> f64 {
        let v: Vec<f64> = self.successes().map(f).collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn mean_rmse_pbo(&self) -> f64 {
        self.mean_of(|c| c.rmse_pbo)
    }

    pub fn mean_rmse_baseline(&self) -> f64 {
        self.mean_of(|c| c.rmse_baseline)
    }

    pub fn mean_rmse_identity(&self) -> f64 {
        self.mean_of(|c| c.rmse_identity)
    }

    pub fn stddev_rmse_pbo(&self) -> f64 {
        let m = self.mean_rmse_pbo();
        self.mean_of(|c| (c.rmse_pbo - m).powi(2)).sqrt()
    }

    /// Per-case deterministic summary. Wall-clock timings are kept out of it
    /// so identical seeds give byte-identical files.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "case_id",
            "status",
            "rmse_pbo",
            "rmse_baseline",
            "rmse_identity",
            "elite_sad_pbo",
            "elite_sad_baseline",
            "midpoint_diversity_pbo",
            "midpoint_diversity_baseline",
        ])?;
        for c in &self.cases {
            match &c.outcome {
                Ok(o) => {
                    let (dp, db) = o.midpoint_diversity();
                    w.write_record([
                        c.case_id.to_string(),
                        "ok".into(),
                        o.rmse_pbo.to_string(),
                        o.rmse_baseline.to_string(),
                        o.rmse_identity.to_string(),
                        final_sad(&o.pbo).to_string(),
                        final_sad(&o.baseline).to_string(),
                        dp.to_string(),
                        db.to_string(),
                    ])?;
                }
                Err(msg) => {
                    let mut row = vec![c.case_id.to_string(), format!("failed: {msg}")];
                    row.resize(9, String::new());
                    w.write_record(row)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_timings_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["case_id", "runtime_pbo_s", "runtime_baseline_s"])?;
        for o in self.successes() {
            w.write_record([
                o.case.case_id.to_string(),
                o.runtime_pbo.as_secs_f64().to_string(),
                o.runtime_baseline.as_secs_f64().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn final_sad(run: &CoarseToFine) -> f64 {
    run.levels.last().map_or(f64::NAN, |l| l.elite_sad)
}

/// Diversity curves of both engines across all levels; `generation` counts
/// on across levels.
pub fn write_diversity_csv<W: Write>(out: W, case: &CaseOutcome) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["generation", "pbo_diversity", "baseline_diversity"])?;
    let mut g = 0usize;
    for (lp, lb) in case.pbo.levels.iter().zip(&case.baseline.levels) {
        for (rp, rb) in lp.log.iter().zip(&lb.log) {
            w.write_record([g.to_string(), rp.mean_hamming.to_string(), rb.mean_hamming.to_string()])?;
            g += 1;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn run_case(cfg: &BenchConfig, case_id: usize) -> Result<CaseOutcome> {
    let case_seed = rng::derive_seed(cfg.seed, &[case_id as u64]);
    let image = texture(case_seed, cfg.image_size, cfg.image_size)?;
    let case = generate_case(case_seed, case_id, &image, cfg.gt_k, cfg.gt_l, cfg.gt_radius)?;
    let sched = cfg.schedule()?;

    let t = Instant::now();
    let pbo = run_coarse_to_fine(
        &case.source,
        &case.target,
        &sched,
        &cfg.pbo_optimizer(),
        &cfg.enc,
        rng::derive_seed(case_seed, &[TAG_PBO]),
    )?;
    let runtime_pbo = t.elapsed();
    let t = Instant::now();
    let baseline = run_coarse_to_fine(
        &case.source,
        &case.target,
        &sched,
        &cfg.baseline_optimizer(),
        &cfg.enc,
        rng::derive_seed(case_seed, &[TAG_BASELINE]),
    )?;
    let runtime_baseline = t.elapsed();

    let identity = ControlLattice::zeros(*case.gt_lattice.spec());
    Ok(CaseOutcome {
        rmse_pbo: landmark_rmse(&pbo.lattice, &case.gt_lattice, &case.landmarks)?,
        rmse_baseline: landmark_rmse(&baseline.lattice, &case.gt_lattice, &case.landmarks)?,
        rmse_identity: landmark_rmse(&identity, &case.gt_lattice, &case.landmarks)?,
        case,
        pbo,
        baseline,
        runtime_pbo,
        runtime_baseline,
    })
}

/// Runs `cfg.n_cases` independent cases. A failing case is recorded in the
/// report instead of aborting the others.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let cases = (0..cfg.n_cases)
        .into_par_iter()
        .map(|id| CaseReport {
            case_id: id,
            outcome: run_case(cfg, id).map_err(|e| e.to_string()),
        })
        .collect();
    Ok(BenchReport { cases })
}

/// RGB rendering of the target with, per landmark, a green marker at the
/// landmark and a red marker displaced by the estimation error
/// `T_gt(p) - T_est(p)`.
pub fn render_overlay(outcome: &CaseOutcome) -> (usize, usize, Vec<u8>) {
    let t = &outcome.case.target;
    let (w, h) = (t.width(), t.height());
    let mut rgb: Vec<u8> = t.to_u8().into_iter().flat_map(|v| [v, v, v]).collect();
    let mut mark = |p: Vec2, color: [u8; 3]| {
        let (cx, cy) = (p[0].round() as i64, p[1].round() as i64);
        for d in -2..=2i64 {
            for (x, y) in [(cx + d, cy), (cx, cy + d)] {
                if (0..w as i64).contains(&x) && (0..h as i64).contains(&y) {
                    let i = 3 * (y as usize * w + x as usize);
                    rgb[i..i + 3].copy_from_slice(&color);
                }
            }
        }
    };
    for &p in &outcome.case.landmarks {
        mark(p, [0, 200, 0]);
        if let (Ok(g), Ok(e)) = (map_point(p, &outcome.case.gt_lattice), map_point(p, &outcome.pbo.lattice)) {
            mark([p[0] + g[0] - e[0], p[1] + g[1] - e[1]], [220, 0, 0]);
        }
    }
    (w, h, rgb)
}
