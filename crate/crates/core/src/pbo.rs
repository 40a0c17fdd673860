//! The genetic engine: probabilistic bitwise inversion as the only variation
//! operator, an annealed rate deciding which individuals get inverted, and
//! roulette survivor selection with a single elite.
//!
//! One generation runs, in order:
//! evaluate, normalize, log, pick targets at `annealing_rate(i)`, invert
//! target bits, re-evaluate targets, renormalize, roulette into `i + 1`.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::genome::{mean_pairwise_hamming, Genome};
use crate::rng::{self, Rng};

/// Added to every roulette weight so the wheel never has zero mass.
pub const ROULETTE_EPS: f64 = 1e-6;

const TAG_SELECT: u64 = 0x5e1ec7;
const TAG_ROULETTE: u64 = 0x2011_e77e;
const TAG_INVERT: u64 = 0x1_0000_0000;

/// Shape of the inversion-probability surface over (bit order, fitness).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PboParams {
    pub w_max: f64,
    pub s_bit: f64,
    pub s_fit: f64,
}

impl Default for PboParams {
    fn default() -> Self {
        PboParams {
            w_max: 0.5,
            s_bit: 2.0,
            s_fit: 0.3,
        }
    }
}

impl PboParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_max > 0.0 && self.w_max <= 1.0) {
            return Err(Error::param("w_max", format!("must be in (0, 1], got {}", self.w_max)));
        }
        if !(self.s_bit.is_finite() && self.s_bit > 0.0) {
            return Err(Error::param("s_bit", format!("must be finite and > 0, got {}", self.s_bit)));
        }
        if !(self.s_fit.is_finite() && self.s_fit > 0.0) {
            return Err(Error::param("s_fit", format!("must be finite and > 0, got {}", self.s_fit)));
        }
        Ok(())
    }
}

/// Annealing schedule for the PBO-target rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnealParams {
    pub e: f64,
    pub p_min: f64,
    pub g_size: usize,
}

impl Default for AnnealParams {
    fn default() -> Self {
        AnnealParams {
            e: 1.0,
            p_min: 0.1,
            g_size: 200,
        }
    }
}

impl AnnealParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.e.is_finite() && self.e > 0.0) {
            return Err(Error::param("e", format!("must be finite and > 0, got {}", self.e)));
        }
        if !(0.0..1.0).contains(&self.p_min) {
            return Err(Error::param("p_min", format!("must be in [0, 1), got {}", self.p_min)));
        }
        if self.g_size == 0 {
            return Err(Error::param("g_size", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub genome: Genome,
    /// Raw objective (lower is better); `None` when stale.
    pub objective: Option<f64>,
    /// Min-max normalized fitness in `[0, 1]`, 1 for the best.
    pub fitness: f64,
}

impl Individual {
    pub fn new(genome: Genome) -> Self {
        Individual {
            genome,
            objective: None,
            fitness: 0.0,
        }
    }

    fn objective_or_inf(&self) -> f64 {
        self.objective.unwrap_or(f64::INFINITY)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Population {
    pub individuals: Vec<Individual>,
    pub generation: usize,
    pub seed: u64,
}

impl Population {
    pub fn new(genomes: Vec<Genome>, seed: u64) -> Self {
        Population {
            individuals: genomes.into_iter().map(Individual::new).collect(),
            generation: 0,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    /// Index of the lowest objective; ties go to the lowest index, stale
    /// individuals rank last.
    pub fn elite_index(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, ind) in self.individuals.iter().enumerate() {
            let o = ind.objective_or_inf();
            if best.is_none_or(|(_, b)| o < b) {
                best = Some((i, o));
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn elite(&self) -> Option<&Individual> {
        self.elite_index().map(|i| &self.individuals[i])
    }

    pub fn mean_hamming(&self) -> f64 {
        mean_pairwise_hamming(self.individuals.iter().map(|i| &i.genome))
    }

    /// Evaluates every stale individual (in parallel) and rejects non-finite
    /// results.
    pub fn evaluate<F>(&mut self, objective: &F) -> Result<()>
    where
        F: Fn(&Genome) -> Result<f64> + Sync,
    {
        let results: Vec<(usize, Result<f64>)> = self
            .individuals
            .par_iter()
            .enumerate()
            .filter(|(_, ind)| ind.objective.is_none())
            .map(|(i, ind)| (i, objective(&ind.genome)))
            .collect();
        for (i, r) in results {
            let value = r?;
            if !value.is_finite() {
                return Err(Error::NonFiniteObjective { index: i, value });
            }
            self.individuals[i].objective = Some(value);
        }
        Ok(())
    }

    /// Writes normalized fitness into every individual. Stale individuals get 0.
    pub fn normalize(&mut self) {
        let objectives: Vec<f64> = self
            .individuals
            .iter()
            .map(Individual::objective_or_inf)
            .collect();
        let fits = normalize_fitness(&objectives);
        for (ind, f) in self.individuals.iter_mut().zip(fits) {
            ind.fitness = if ind.objective.is_some() { f } else { 0.0 };
        }
    }
}

/// One CSV row of the per-generation log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerationLog {
    pub generation: usize,
    pub best_sad: f64,
    pub mean_sad: f64,
    pub p_ann: f64,
    pub mean_hamming: f64,
}

impl GenerationLog {
    pub const CSV_HEADER: [&'static str; 5] =
        ["generation", "best_sad", "mean_sad", "p_ann", "mean_hamming"];

    fn record(pop: &Population, p_ann: f64) -> Self {
        let objectives = pop.individuals.iter().map(Individual::objective_or_inf);
        let (best, sum) = objectives.fold((f64::INFINITY, 0.0), |(b, s), o| (b.min(o), s + o));
        GenerationLog {
            generation: pop.generation,
            best_sad: best,
            mean_sad: sum / pop.len() as f64,
            p_ann,
            mean_hamming: pop.mean_hamming(),
        }
    }
}

pub fn write_log_csv<W: Write>(out: W, log: &[GenerationLog]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GenerationLog::CSV_HEADER)?;
    for row in log {
        w.write_record([
            row.generation.to_string(),
            row.best_sad.to_string(),
            row.mean_sad.to_string(),
            row.p_ann.to_string(),
            row.mean_hamming.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Inversion probability of a bit with significance `bit_index` (0 = LSB of
/// its parameter group) in an individual of normalized fitness `fitness`.
pub fn inversion_probability(bit_index: u32, fitness: f64, p: &PboParams) -> f64 {
    let b = bit_index as f64 / p.s_bit;
    let f = fitness / p.s_fit;
    p.w_max * (-0.5 * (b * b + f * f)).exp()
}

/// Min-max normalization with the lowest objective mapped to 1. A flat
/// population maps entirely to 1.
pub fn normalize_fitness(objectives: &[f64]) -> Vec<f64> {
    let finite = objectives.iter().copied().filter(|o| o.is_finite());
    let (min, max) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), o| {
        (lo.min(o), hi.max(o))
    });
    let span = max - min;
    objectives
        .iter()
        .map(|&o| {
            if !o.is_finite() {
                0.0
            } else if span > 0.0 {
                ((max - o) / span).clamp(0.0, 1.0)
            } else {
                1.0
            }
        })
        .collect()
}

/// Inverts each bit independently with its [`inversion_probability`]. The
/// objective is marked stale.
pub fn apply_pbo(ind: &mut Individual, p: &PboParams, rng: &mut Rng) {
    let b = ind.genome.bits_per_param() as usize;
    // Probability by position within a group, position 0 being the MSB.
    let table: Vec<f64> = (0..b)
        .map(|pos| inversion_probability((b - 1 - pos) as u32, ind.fitness, p).min(1.0))
        .collect();
    for group in ind.genome.bits_mut().chunks_exact_mut(b) {
        for (bit, &prob) in group.iter_mut().zip(&table) {
            if rng.random::<f64>() < prob {
                *bit = !*bit;
            }
        }
    }
    ind.objective = None;
}

/// PBO-target rate for generation `i`: 1 at `i = 0`, `p_min` at
/// `i = g_size`, decreasing in between.
pub fn annealing_rate(i: usize, a: &AnnealParams) -> f64 {
    let x = a.e * i as f64 / a.g_size as f64;
    -x.exp_m1() / a.e.exp_m1() * (1.0 - a.p_min) + 1.0
}

/// Marks each non-elite individual with probability `rate`. The elite is
/// never marked.
pub fn select_pbo_targets(pop: &Population, rate: f64, rng: &mut Rng) -> Vec<bool> {
    let elite = pop.elite_index();
    let rate = rate.clamp(0.0, 1.0);
    (0..pop.len())
        .map(|i| {
            // Draw for every slot so the stream layout does not depend on
            // where the elite sits.
            let hit = rng.random::<f64>() < rate;
            hit && Some(i) != elite
        })
        .collect()
}

/// Next generation: slot 0 is the elite, the rest are drawn with replacement
/// with weights `fitness + ROULETTE_EPS`.
pub fn roulette_select(pop: &Population, rng: &mut Rng) -> Population {
    let mut next = Vec::with_capacity(pop.len());
    if let Some(elite) = pop.elite() {
        next.push(elite.clone());
        if pop.len() > 1 {
            let weights = pop.individuals.iter().map(|i| i.fitness.max(0.0) + ROULETTE_EPS);
            let wheel = WeightedIndex::new(weights).expect("roulette weights are positive");
            for _ in 1..pop.len() {
                next.push(pop.individuals[wheel.sample(rng)].clone());
            }
        }
    }
    Population {
        individuals: next,
        generation: pop.generation + 1,
        seed: pop.seed,
    }
}

/// Runs `anneal.g_size` generations from `initial`, seeded by
/// `initial.seed`. The returned population is fully evaluated and
/// normalized; the log has one row per generation.
pub fn run_generation_loop<F>(
    initial: Population,
    pbo: &PboParams,
    anneal: &AnnealParams,
    objective: &F,
) -> Result<(Population, Vec<GenerationLog>)>
where
    F: Fn(&Genome) -> Result<f64> + Sync,
{
    let mut pop = initial;
    let mut log = Vec::with_capacity(anneal.g_size);
    let seed = pop.seed;
    for i in 0..anneal.g_size {
        pop.evaluate(objective)?;
        pop.normalize();
        let rate = annealing_rate(i, anneal);
        log.push(GenerationLog::record(&pop, rate));

        let gen = i as u64;
        let targets = select_pbo_targets(&pop, rate, &mut rng::stream(seed, &[gen, TAG_SELECT]));
        for (idx, ind) in pop.individuals.iter_mut().enumerate() {
            if targets[idx] {
                let mut r = rng::stream(seed, &[gen, TAG_INVERT + idx as u64]);
                apply_pbo(ind, pbo, &mut r);
            }
        }
        pop.evaluate(objective)?;
        pop.normalize();
        pop = roulette_select(&pop, &mut rng::stream(seed, &[gen, TAG_ROULETTE]));
    }
    pop.evaluate(objective)?;
    pop.normalize();
    Ok((pop, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use crate::rng::Rng;

    fn rng(seed: u64) -> Rng {
        Rng::seed_from_u64(seed)
    }

    fn evaluated(objectives: &[f64]) -> Population {
        let mut pop = Population::new(
            (0..objectives.len()).map(|_| Genome::zeros(2, 4)).collect(),
            1,
        );
        for (ind, &o) in pop.individuals.iter_mut().zip(objectives) {
            ind.objective = Some(o);
        }
        pop.normalize();
        pop
    }

    #[test]
    fn inversion_probability_examples() {
        let p = PboParams { w_max: 0.5, s_bit: 2.0, s_fit: 0.3 };
        assert_eq!(inversion_probability(0, 0.0, &p), 0.5);
        // 0.5 * exp(-(1 + 0.25/0.09) / 2)
        let v = inversion_probability(2, 0.5, &p);
        assert!((v - 0.075_619_88).abs() < 1e-8, "{v}");
        assert!(inversion_probability(100, 0.3, &p) < 1e-300);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_fitness(&[10.0, 20.0, 30.0]), vec![1.0, 0.5, 0.0]);
        assert_eq!(normalize_fitness(&[7.0, 7.0, 7.0]), vec![1.0, 1.0, 1.0]);
        assert_eq!(normalize_fitness(&[0.0, 100.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn annealing_rate_examples() {
        let a = AnnealParams { e: 1.0, p_min: 0.1, g_size: 100 };
        assert_eq!(annealing_rate(0, &a), 1.0);
        assert!((annealing_rate(100, &a) - 0.1).abs() < 1e-12);
        let expected = (1.0 - 0.5f64.exp()) / (1f64.exp() - 1.0) * 0.9 + 1.0;
        assert!((annealing_rate(50, &a) - expected).abs() < 1e-14);
        assert!((annealing_rate(50, &a) - 0.660_213_4).abs() < 1e-7);
    }

    #[test]
    fn pbo_with_zero_weight_is_identity() {
        let p = PboParams { w_max: 0.0, s_bit: 2.0, s_fit: 0.3 };
        let g = Genome::from_values(&[3, 9, 27, 1], 5);
        let mut ind = Individual::new(g.clone());
        ind.objective = Some(1.0);
        apply_pbo(&mut ind, &p, &mut rng(3));
        assert_eq!(ind.genome, g);
        assert_eq!(ind.objective, None);
    }

    #[test]
    fn pbo_on_best_individual_with_tiny_s_fit_is_identity() {
        let p = PboParams { w_max: 1.0, s_bit: 2.0, s_fit: 1e-3 };
        let g = Genome::from_values(&[5; 64], 5);
        let mut ind = Individual::new(g.clone());
        ind.fitness = 1.0;
        apply_pbo(&mut ind, &p, &mut rng(9));
        assert_eq!(ind.genome, g);
    }

    #[test]
    fn pbo_flip_rate_matches_w_max() {
        let p = PboParams { w_max: 0.3, s_bit: 2.0, s_fit: 0.3 };
        let mut r = rng(42);
        let trials = 10_000;
        let mut flips = 0;
        for _ in 0..trials {
            let mut ind = Individual::new(Genome::zeros(1, 1));
            ind.fitness = 0.0;
            apply_pbo(&mut ind, &p, &mut r);
            flips += ind.genome.bits()[0] as usize;
        }
        let rate = flips as f64 / trials as f64;
        let tol = 3.0 * (p.w_max * (1.0 - p.w_max) / trials as f64).sqrt();
        assert!((rate - p.w_max).abs() <= tol, "rate {rate}");
    }

    #[test]
    fn pbo_flips_low_bits_more() {
        let p = PboParams::default();
        let mut counts = [0usize; 5];
        let mut r = rng(5);
        for _ in 0..4000 {
            let mut ind = Individual::new(Genome::zeros(1, 5));
            apply_pbo(&mut ind, &p, &mut r);
            for (pos, &b) in ind.genome.bits().iter().enumerate() {
                counts[pos] += b as usize;
            }
        }
        // Position 4 is the LSB.
        assert!(counts[4] > counts[2] && counts[2] > counts[0], "{counts:?}");
    }

    #[test]
    fn target_selection_extremes() {
        let pop = evaluated(&[5.0, 1.0, 3.0, 4.0, 6.0, 7.0, 8.0, 9.0, 2.0, 10.0]);
        let all = select_pbo_targets(&pop, 1.0, &mut rng(1));
        assert_eq!(all.iter().filter(|&&m| m).count(), 9);
        assert!(!all[1]);
        let none = select_pbo_targets(&pop, 0.0, &mut rng(1));
        assert!(none.iter().all(|&m| !m));
    }

    #[test]
    fn target_selection_is_binomial() {
        let objectives: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let pop = evaluated(&objectives);
        let marked = select_pbo_targets(&pop, 0.5, &mut rng(77))
            .into_iter()
            .filter(|&m| m)
            .count() as f64;
        assert!((marked - 500.0).abs() <= 3.0 * 250f64.sqrt(), "{marked}");
    }

    #[test]
    fn elite_ties_go_to_lowest_index() {
        let pop = evaluated(&[3.0, 1.0, 1.0]);
        assert_eq!(pop.elite_index(), Some(1));
    }

    #[test]
    fn roulette_prefers_the_only_fit_individual() {
        // n = 2: weights 1 + eps and eps.
        let mut pop = evaluated(&[0.0, 1.0]);
        pop.individuals[1].genome = Genome::from_values(&[1, 1], 4);
        let mut r = rng(11);
        let mut picked_best = 0;
        for _ in 0..2000 {
            let next = roulette_select(&pop, &mut r);
            assert_eq!(next.individuals[0], pop.individuals[0]);
            picked_best += (next.individuals[1].genome == pop.individuals[0].genome) as usize;
        }
        assert_eq!(picked_best, 2000);
    }

    #[test]
    fn roulette_is_uniform_for_equal_fitness() {
        let mut pop = evaluated(&[1.0; 4]);
        for (i, ind) in pop.individuals.iter_mut().enumerate() {
            ind.genome = Genome::from_values(&[i as u64, 0], 4);
        }
        let mut counts = [0usize; 4];
        let mut r = rng(2);
        for _ in 0..4000 {
            for ind in &roulette_select(&pop, &mut r).individuals[1..] {
                counts[ind.genome.values().next().unwrap() as usize] += 1;
            }
        }
        // 12000 draws, p = 1/4 each.
        let sd = (12000.0f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - 3000.0).abs() < 4.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn roulette_single_individual() {
        let pop = evaluated(&[4.0]);
        let next = roulette_select(&pop, &mut rng(0));
        assert_eq!(next.individuals, pop.individuals);
        assert_eq!(next.generation, 1);
    }

    #[test]
    fn loop_with_zero_generations_returns_initial() {
        let init = Population::new(vec![Genome::from_values(&[1, 2], 4); 3], 5);
        let anneal = AnnealParams { g_size: 0, ..Default::default() };
        let (pop, log) =
            run_generation_loop(init.clone(), &PboParams::default(), &anneal, &|_: &Genome| Ok(1.0))
                .unwrap();
        assert!(log.is_empty());
        let genomes: Vec<_> = pop.individuals.iter().map(|i| &i.genome).collect();
        assert_eq!(genomes, init.individuals.iter().map(|i| &i.genome).collect::<Vec<_>>());
    }

    #[test]
    fn constant_objective_keeps_best_constant() {
        let init = Population::new(vec![Genome::zeros(4, 5); 6], 8);
        let anneal = AnnealParams { g_size: 20, ..Default::default() };
        let (_, log) =
            run_generation_loop(init, &PboParams::default(), &anneal, &|_: &Genome| Ok(2.5)).unwrap();
        assert_eq!(log.len(), 20);
        assert!(log.iter().all(|r| r.best_sad == 2.5));
    }

    #[test]
    fn non_finite_objective_aborts() {
        let init = Population::new(vec![Genome::zeros(2, 4); 3], 1);
        let anneal = AnnealParams { g_size: 3, ..Default::default() };
        let err = run_generation_loop(init, &PboParams::default(), &anneal, &|_: &Genome| {
            Ok(f64::NAN)
        })
        .unwrap_err();
        assert!(matches!(err, Error::NonFiniteObjective { .. }));
    }

    #[test]
    fn objective_errors_propagate() {
        let init = Population::new(vec![Genome::zeros(2, 4); 3], 1);
        let anneal = AnnealParams { g_size: 3, ..Default::default() };
        let err = run_generation_loop(init, &PboParams::default(), &anneal, &|_: &Genome| {
            Err(Error::Dimension("boom".into()))
        })
        .unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn param_validation() {
        assert!(PboParams { w_max: 0.0, ..Default::default() }.validate().is_err());
        assert!(PboParams { w_max: 1.5, ..Default::default() }.validate().is_err());
        assert!(PboParams { s_bit: -1.0, ..Default::default() }.validate().is_err());
        assert!(PboParams { s_fit: 0.0, ..Default::default() }.validate().is_err());
        assert!(AnnealParams { p_min: 1.0, ..Default::default() }.validate().is_err());
        assert!(AnnealParams { g_size: 0, ..Default::default() }.validate().is_err());
        assert!(AnnealParams { e: 0.0, ..Default::default() }.validate().is_err());
        assert!(PboParams::default().validate().is_ok());
        assert!(AnnealParams::default().validate().is_ok());
    }

    fn count_ones(g: &Genome) -> Result<f64> {
        Ok(g.bits().iter().filter(|&&b| b).count() as f64)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn inversion_probability_bounds_and_monotone(
            w_max in 0.01f64..=1.0, s_bit in 0.1f64..10.0, s_fit in 0.05f64..2.0,
            bit in 0u32..8, fit in 0.0f64..=1.0, dfit in 0.0f64..0.5,
        ) {
            let p = PboParams { w_max, s_bit, s_fit };
            let v = inversion_probability(bit, fit, &p);
            prop_assert!(v >= 0.0 && v <= w_max);
            // Strictly positive unless exp underflows below the f64 subnormals.
            let expo = -0.5 * ((bit as f64 / s_bit).powi(2) + (fit / s_fit).powi(2));
            if expo + w_max.ln() > -700.0 {
                prop_assert!(v > 0.0);
            }
            prop_assert!(inversion_probability(bit + 1, fit, &p) <= v);
            prop_assert!(inversion_probability(bit, (fit + dfit).min(1.0), &p) <= v);
        }

        #[test]
        fn annealing_rate_endpoints_and_decrease(
            e in 0.05f64..10.0, p_min in 0.0f64..0.99, g_size in 1usize..500,
        ) {
            let a = AnnealParams { e, p_min, g_size };
            prop_assert_eq!(annealing_rate(0, &a), 1.0);
            prop_assert!((annealing_rate(g_size, &a) - p_min).abs() < 1e-12);
            for i in 0..g_size {
                prop_assert!(annealing_rate(i + 1, &a) < annealing_rate(i, &a));
            }
        }

        #[test]
        fn loop_keeps_elitism_sizes_and_determinism(seed in any::<u64>(), n in 1usize..12) {
            let init = Population::new(
                (0..n).map(|i| Genome::from_values(&[i as u64 % 16, 3, 7], 4)).collect(),
                seed,
            );
            let anneal = AnnealParams { g_size: 15, ..Default::default() };
            let pbo = PboParams::default();
            let (a, log_a) = run_generation_loop(init.clone(), &pbo, &anneal, &count_ones).unwrap();
            let (b, log_b) = run_generation_loop(init, &pbo, &anneal, &count_ones).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(&log_a, &log_b);
            prop_assert_eq!(a.len(), n);
            prop_assert!(a.individuals.iter().all(|i| i.genome.len() == 12));
            for w in log_a.windows(2) {
                prop_assert!(w[1].best_sad <= w[0].best_sad);
            }
        }
    }
}
