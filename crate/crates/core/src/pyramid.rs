//! Coarse-to-fine estimation over a dyadic image pyramid.
//!
//! Each level solves for a bounded residual on top of a baseline inherited
//! from the previous level. The lattice grows by `a -> 2a - 1` per level, so
//! every coarse node lands on a fine node, and pixel displacements double
//! with the image size.

use crate::error::{Error, Result};
use crate::ffd::{ControlLattice, LatticeSpec};
use crate::fitness::{GrayImage, RegistrationObjective};
use crate::genome::{decode_genome, encode_genome, EncodingSpec, Genome};
use crate::pbo::{run_generation_loop, AnnealParams, GenerationLog, PboParams, Population};
use crate::rng;
use crate::synth::{baseline_ga, BaselineParams};

const TAG_INIT: u64 = 0x1417;
const TAG_RUN: u64 = 0x2c2c;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LevelPlan {
    pub image_w: usize,
    pub image_h: usize,
    pub k: usize,
    pub l: usize,
    pub generations: usize,
    pub population: usize,
}

impl LevelPlan {
    pub fn lattice_spec(&self) -> Result<LatticeSpec> {
        LatticeSpec::new(self.image_w, self.image_h, self.k, self.l)
    }
}

/// Per-level sizes, coarse to fine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PyramidSchedule {
    pub levels: Vec<LevelPlan>,
}

impl PyramidSchedule {
    /// Halves `w x h` down `levels - 1` times and refines `base_k x base_l`
    /// on the way back up. Every level gets the same generation and
    /// population budget.
    pub fn new(
        w: usize,
        h: usize,
        levels: usize,
        base_k: usize,
        base_l: usize,
        generations: usize,
        population: usize,
    ) -> Result<Self> {
        if levels == 0 {
            return Err(Error::param("levels", "must be >= 1"));
        }
        if population == 0 {
            return Err(Error::param("population", "must be >= 1"));
        }
        check_depth(w, h, levels)?;
        let mut plans = Vec::with_capacity(levels);
        let (mut k, mut l) = (base_k, base_l);
        for n in 0..levels {
            let shift = levels - 1 - n;
            let plan = LevelPlan {
                image_w: w >> shift,
                image_h: h >> shift,
                k,
                l,
                generations,
                population,
            };
            plan.lattice_spec()?;
            plans.push(plan);
            k = refine_lattice_size(k);
            l = refine_lattice_size(l);
        }
        Ok(PyramidSchedule { levels: plans })
    }
}

fn check_depth(w: usize, h: usize, levels: usize) -> Result<()> {
    let need = 1usize.checked_shl(levels as u32 - 1).unwrap_or(usize::MAX);
    if levels > usize::BITS as usize || w < need || h < need {
        return Err(Error::PyramidTooDeep { w, h, levels });
    }
    Ok(())
}

pub fn refine_lattice_size(a: usize) -> usize {
    2 * a - 1
}

/// 2x2 box-filter halving; odd trailing rows and columns are dropped.
pub fn downsample(img: &GrayImage) -> Result<GrayImage> {
    let (w, h) = (img.width() / 2, img.height() / 2);
    GrayImage::from_fn(w, h, |x, y| {
        let (sx, sy) = (2 * x, 2 * y);
        (img.get(sx, sy) + img.get(sx + 1, sy) + img.get(sx, sy + 1) + img.get(sx + 1, sy + 1)) / 4.0
    })
}

/// Coarse-to-fine image list whose last entry is `img`.
pub fn build_pyramid(img: &GrayImage, levels: usize) -> Result<Vec<GrayImage>> {
    if levels == 0 {
        return Err(Error::param("levels", "must be >= 1"));
    }
    check_depth(img.width(), img.height(), levels)?;
    let mut out = vec![img.clone()];
    for _ in 1..levels {
        let next = downsample(out.last().expect("non-empty"))?;
        out.push(next);
    }
    out.reverse();
    Ok(out)
}

/// Baseline for a fine level: each fine node takes the coarse displacement
/// field at its position (scaled into coarse pixels), multiplied by the
/// image scale.
pub fn inherit(coarse: &ControlLattice, fine_spec: &LatticeSpec) -> Result<ControlLattice> {
    let cs = coarse.spec();
    if fine_spec.k != refine_lattice_size(cs.k) || fine_spec.l != refine_lattice_size(cs.l) {
        return Err(Error::Dimension(format!(
            "fine lattice {}x{} does not refine coarse {}x{}",
            fine_spec.k, fine_spec.l, cs.k, cs.l
        )));
    }
    let sx = fine_spec.w as f64 / cs.w as f64;
    let sy = fine_spec.h as f64 / cs.h as f64;
    let mut fine = ControlLattice::zeros(*fine_spec);
    for j in -1..=fine_spec.l as isize {
        for i in -1..=fine_spec.k as isize {
            let p = fine_spec.node_position(i, j);
            let d = coarse.displacement_clamped([p[0] / sx, p[1] / sy]);
            fine.set_node(i, j, [d[0] * sx, d[1] * sy]);
        }
    }
    Ok(fine)
}

/// Which GA drives each level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Optimizer {
    Pbo { pbo: PboParams, anneal: AnnealParams },
    Baseline(BaselineParams),
}

impl Optimizer {
    fn with_generations(self, generations: usize) -> Self {
        match self {
            Optimizer::Pbo { pbo, anneal } => Optimizer::Pbo {
                pbo,
                anneal: AnnealParams { g_size: generations, ..anneal },
            },
            Optimizer::Baseline(b) => Optimizer::Baseline(BaselineParams { g_size: generations, ..b }),
        }
    }

    pub fn run<F>(&self, initial: Population, objective: &F) -> Result<(Population, Vec<GenerationLog>)>
    where
        F: Fn(&Genome) -> Result<f64> + Sync,
    {
        match self {
            Optimizer::Pbo { pbo, anneal } => run_generation_loop(initial, pbo, anneal, objective),
            Optimizer::Baseline(b) => baseline_ga(initial, b, objective),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LevelResult {
    pub plan: LevelPlan,
    pub baseline: ControlLattice,
    /// Baseline plus the decoded elite.
    pub lattice: ControlLattice,
    pub elite_sad: f64,
    pub log: Vec<GenerationLog>,
}

#[derive(Clone, Debug)]
pub struct CoarseToFine {
    pub lattice: ControlLattice,
    pub levels: Vec<LevelResult>,
}

/// Genome whose decode is as close to zero as the encoding allows, and the
/// vector it decodes to.
pub fn near_zero(enc: &EncodingSpec, nodes: usize) -> (Genome, [f64; 2]) {
    let g = encode_genome(&vec![[0.0, 0.0]; nodes], enc);
    let v = enc.decode_value(enc.encode_value(0.0));
    (g, [v, v])
}

/// Runs every level of `sched` in order and returns the finest lattice.
///
/// At each level the baseline is shifted by the near-zero decode so the
/// seeded near-zero individual reproduces the inherited deformation exactly.
pub fn run_coarse_to_fine(
    source: &GrayImage,
    target: &GrayImage,
    sched: &PyramidSchedule,
    optimizer: &Optimizer,
    enc: &EncodingSpec,
    seed: u64,
) -> Result<CoarseToFine> {
    if source.width() != target.width() || source.height() != target.height() {
        return Err(Error::Dimension(format!(
            "source {}x{} vs target {}x{}",
            source.width(),
            source.height(),
            target.width(),
            target.height()
        )));
    }
    let finest = sched.levels.last().ok_or_else(|| Error::param("levels", "schedule is empty"))?;
    if finest.image_w != source.width() || finest.image_h != source.height() {
        return Err(Error::Dimension(format!(
            "schedule ends at {}x{} but images are {}x{}",
            finest.image_w,
            finest.image_h,
            source.width(),
            source.height()
        )));
    }
    let sources = build_pyramid(source, sched.levels.len())?;
    let targets = build_pyramid(target, sched.levels.len())?;

    let mut results: Vec<LevelResult> = Vec::with_capacity(sched.levels.len());
    for (n, plan) in sched.levels.iter().enumerate() {
        let spec = plan.lattice_spec()?;
        let (src, tgt) = (&sources[n], &targets[n]);
        if src.width() != plan.image_w || src.height() != plan.image_h {
            return Err(Error::Dimension(format!(
                "level {n} plans {}x{} but the pyramid gives {}x{}",
                plan.image_w,
                plan.image_h,
                src.width(),
                src.height()
            )));
        }
        let inherited = match results.last() {
            Some(prev) => inherit(&prev.lattice, &spec)?,
            None => ControlLattice::zeros(spec),
        };
        let nodes = spec.node_count();
        let (zero_genome, zero_vec) = near_zero(enc, nodes);
        let baseline = inherited.add(&vec![[-zero_vec[0], -zero_vec[1]]; nodes])?;

        let objective = RegistrationObjective::new(src, tgt, baseline.clone(), *enc)?;
        let eval = |g: &Genome| objective.eval(g);

        let level_seed = rng::derive_seed(seed, &[n as u64, TAG_RUN]);
        let initial = initial_population(zero_genome, plan.population, rng::derive_seed(seed, &[n as u64, TAG_INIT]), level_seed);
        let (pop, log) = optimizer.with_generations(plan.generations).run(initial, &eval)?;
        let elite = pop.elite().expect("population is non-empty");
        let residual = decode_genome(&elite.genome, enc, nodes)?;
        results.push(LevelResult {
            plan: *plan,
            lattice: baseline.add(&residual)?,
            baseline,
            elite_sad: elite.objective.expect("final population is evaluated"),
            log,
        });
    }
    let lattice = results.last().expect("at least one level").lattice.clone();
    Ok(CoarseToFine { lattice, levels: results })
}

/// The near-zero genome followed by uniform random bit strings.
fn initial_population(zero: Genome, size: usize, init_seed: u64, run_seed: u64) -> Population {
    use rand::Rng as _;
    let mut r = rng::stream(init_seed, &[]);
    let len = zero.len();
    let b = zero.bits_per_param();
    let mut genomes = Vec::with_capacity(size);
    genomes.push(zero);
    for _ in 1..size {
        let bits = (0..len).map(|_| r.random::<bool>()).collect();
        genomes.push(Genome::new(bits, b).expect("same length as the seed genome"));
    }
    Population::new(genomes, run_seed)
}
