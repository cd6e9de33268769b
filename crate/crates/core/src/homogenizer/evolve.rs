use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::candidate::CandidateTransform;
use super::expr::{Expr, PrimitiveSet};
use super::fitness::{FitnessContext, FitnessReport, RawFitness, ResponseSetup, DEFAULT_PARSIMONY};
use crate::dynamics::{DriverLoadParams, PendulumParams, PlantKind, PlantParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GPConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub crossover: f64,
    pub mutation: f64,
    /// Probability of copying a selected parent unchanged.
    pub reproduction: f64,
    pub max_depth: usize,
    /// Depth of the initial ramped half-and-half population.
    pub init_depth: usize,
    /// Parameter vectors compared against the nominal copy.
    pub perturbations: Vec<PlantParams>,
    pub seed: u64,
    /// Stops early once the best fitness falls below this value.
    pub tolerance: f64,
    pub parsimony: f64,
    pub primitives: PrimitiveSet,
    pub response: ResponseSetup,
    /// Individuals placed in the initial population before random ones.
    pub seeded: Vec<CandidateTransform>,
}

impl Default for GPConfig {
    fn default() -> Self {
        Self::pendulum(&PendulumParams::nominal())
    }
}

impl GPConfig {
    pub fn pendulum(nominal: &PendulumParams) -> Self {
        let p = |m: f64, l: f64| PlantParams::Pendulum(PendulumParams { m: nominal.m * m, l: nominal.l * l, g: nominal.g });
        Self {
            population: 200,
            generations: 100,
            tournament: 5,
            crossover: 0.8,
            mutation: 0.15,
            reproduction: 0.05,
            max_depth: 6,
            init_depth: 4,
            perturbations: vec![p(1.0, 0.5), p(1.0, 2.0), p(1.0, 4.0), p(2.0, 1.0), p(0.5, 2.0)],
            seed: 1,
            tolerance: 1e-4,
            parsimony: DEFAULT_PARSIMONY,
            primitives: PrimitiveSet::pendulum(),
            response: ResponseSetup::pendulum(),
            seeded: Vec::new(),
        }
    }

    /// Perturbations keep the mass ratio fixed, as the closed form requires.
    pub fn driver_load(nominal: &DriverLoadParams) -> Self {
        let p = |k: f64, l: f64| {
            PlantParams::DriverLoad(DriverLoadParams { big_m: nominal.big_m * k, m: nominal.m * k, l: nominal.l * l, g: nominal.g })
        };
        Self {
            perturbations: vec![p(1.0, 0.5), p(1.0, 2.0), p(2.0, 1.0), p(0.5, 3.0)],
            primitives: PrimitiveSet::driver_load(),
            response: ResponseSetup::driver_load(),
            ..Self::pendulum(&PendulumParams::nominal())
        }
    }

    pub fn validate(&self, nominal: &PlantParams) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.population < 2 || self.tournament == 0 || self.max_depth == 0 || self.init_depth == 0 {
            return Err(Error::Config("population, tournament and depths must be positive".into()));
        }
        if !(prob(self.crossover) && prob(self.mutation) && prob(self.reproduction))
            || self.crossover + self.mutation + self.reproduction > 1.0 + 1e-12
        {
            return Err(Error::Config("operator probabilities must lie in [0, 1] and sum to at most 1".into()));
        }
        if self.init_depth > self.max_depth {
            return Err(Error::Config("initial depth exceeds the depth limit".into()));
        }
        if !(self.parsimony >= 0.0 && self.tolerance >= 0.0) {
            return Err(Error::Config("parsimony and tolerance must be nonnegative".into()));
        }
        if self.primitives.symbols.is_empty() && self.primitives.constants.is_empty() {
            return Err(Error::Config("no terminals available".into()));
        }
        let dim = nominal.kind().state_dim();
        for s in &self.seeded {
            if s.dim() != dim || s.depth() > self.max_depth {
                return Err(Error::Config("seeded candidate does not fit the plant or depth limit".into()));
            }
        }
        if self.perturbations.iter().any(|p| p.kind() != nominal.kind()) {
            return Err(Error::Config("perturbations must match the nominal plant kind".into()));
        }
        Ok(())
    }
}

/// Best and median fitness of one generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub median_fitness: f64,
    pub best_nodes: usize,
    /// Number of distinct scalings simulated so far.
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub best: CandidateTransform,
    pub report: FitnessReport,
    pub history: Vec<GenerationStats>,
}

struct Evaluator<'a> {
    ctx: &'a FitnessContext,
    parsimony: f64,
    cache: HashMap<Vec<u64>, RawFitness>,
}

impl Evaluator<'_> {
    fn evaluate_all(&mut self, pop: &[CandidateTransform]) -> Vec<FitnessReport> {
        let values: Vec<Vec<f64>> = pop.iter().map(|c| self.ctx.candidate_values(c)).collect();
        let keys: Vec<Vec<u64>> = values.iter().map(|v| v.iter().map(|x| x.to_bits()).collect()).collect();
        let mut todo: Vec<usize> = Vec::new();
        let mut pending = std::collections::HashSet::new();
        for (i, k) in keys.iter().enumerate() {
            if !self.cache.contains_key(k) && pending.insert(k.clone()) {
                todo.push(i);
            }
        }
        let fresh: Vec<RawFitness> =
            todo.par_iter().map(|&i| self.ctx.raw_from_values(&values[i], pop[i].dim())).collect();
        for (i, raw) in todo.into_iter().zip(fresh) {
            self.cache.insert(keys[i].clone(), raw);
        }
        pop.iter().zip(&keys).map(|(c, k)| self.cache[k].report(c.node_count(), self.parsimony)).collect()
    }
}

fn tournament<'a, R: Rng>(rng: &mut R, pop: &'a [CandidateTransform], fit: &[FitnessReport], k: usize) -> &'a CandidateTransform {
    let mut best = rng.random_range(0..pop.len());
    for _ in 1..k {
        let i = rng.random_range(0..pop.len());
        if fit[i].j_h < fit[best].j_h {
            best = i;
        }
    }
    &pop[best]
}

fn crossover<R: Rng>(rng: &mut R, a: &CandidateTransform, b: &CandidateTransform) -> CandidateTransform {
    let mut child = a.clone();
    // trees are exchanged whole with probability 1/2, then one is recombined
    for k in 0..child.tree_count() {
        if rng.random_bool(0.5) {
            *child.tree_mut(k) = b.tree(k).clone();
        }
    }
    let k = rng.random_range(0..child.tree_count());
    let donor = b.tree(k);
    let from = donor.subtree(rng.random_range(0..donor.node_count())).cloned().unwrap_or(Expr::c(1.0));
    let target = child.tree_mut(k);
    let at = rng.random_range(0..target.node_count());
    if let Some(slot) = target.subtree_mut(at) {
        *slot = from;
    }
    child
}

fn mutate<R: Rng>(rng: &mut R, ps: &PrimitiveSet, parent: &CandidateTransform) -> CandidateTransform {
    let mut child = parent.clone();
    let k = rng.random_range(0..child.tree_count());
    let tree = child.tree_mut(k);
    let at = rng.random_range(0..tree.node_count());
    if rng.random_bool(0.5) {
        ps.point_mutate(tree, at, rng);
    } else {
        let fresh = ps.random_tree(rng, 3, false);
        if let Some(slot) = tree.subtree_mut(at) {
            *slot = fresh;
        }
    }
    child
}

fn random_candidate<R: Rng>(rng: &mut R, ps: &PrimitiveSet, dim: usize, depth: usize, full: bool) -> CandidateTransform {
    let mut c = CandidateTransform::identity(dim);
    for k in 0..c.tree_count() {
        *c.tree_mut(k) = ps.random_tree(rng, depth, full);
    }
    c
}

/// Genetic-programming search for a homogeneity transform of the plant
/// family around `nominal`.
pub fn evolve(nominal: &PlantParams, cfg: &GPConfig) -> Result<EvolutionResult> {
    cfg.validate(nominal)?;
    let ctx = FitnessContext::new(nominal, &cfg.perturbations, &cfg.response)?;
    evolve_with(&ctx, cfg, |_, _| {})
}

/// [`evolve`] against a prepared fitness context; `observe` sees every
/// generation's statistics and best individual.
pub fn evolve_with<F>(ctx: &FitnessContext, cfg: &GPConfig, mut observe: F) -> Result<EvolutionResult>
where
    F: FnMut(&GenerationStats, &CandidateTransform),
{
    cfg.validate(ctx.nominal())?;
    let dim = ctx.nominal().kind().state_dim();
    let ps = &cfg.primitives;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut eval = Evaluator { ctx, parsimony: cfg.parsimony, cache: HashMap::new() };

    let mut pop: Vec<CandidateTransform> = cfg.seeded.iter().take(cfg.population).cloned().collect();
    let mut i = 0;
    while pop.len() < cfg.population {
        let depth = 1 + i % cfg.init_depth;
        pop.push(random_candidate(&mut rng, ps, dim, depth, i % 2 == 0));
        i += 1;
    }
    let mut fit = eval.evaluate_all(&pop);
    let mut history = Vec::with_capacity(cfg.generations + 1);
    let best_of = |fit: &[FitnessReport]| {
        (0..fit.len()).min_by(|&a, &b| fit[a].j_h.total_cmp(&fit[b].j_h)).unwrap_or(0)
    };
    let stats = |g: usize, pop: &[CandidateTransform], fit: &[FitnessReport], evals: usize| {
        let b = best_of(fit);
        let mut sorted: Vec<f64> = fit.iter().map(|f| f.j_h).collect();
        sorted.sort_by(f64::total_cmp);
        GenerationStats {
            generation: g,
            best_fitness: fit[b].j_h,
            median_fitness: sorted[sorted.len() / 2],
            best_nodes: pop[b].node_count(),
            evaluations: evals,
        }
    };
    history.push(stats(0, &pop, &fit, eval.cache.len()));
    observe(&history[0], &pop[best_of(&fit)]);

    for g in 1..=cfg.generations {
        if history.last().is_some_and(|h| h.best_fitness < cfg.tolerance) {
            break;
        }
        let elite = pop[best_of(&fit)].clone();
        let mut next = Vec::with_capacity(cfg.population);
        next.push(elite);
        while next.len() < cfg.population {
            let r: f64 = rng.random();
            let parent = tournament(&mut rng, &pop, &fit, cfg.tournament);
            let child = if r < cfg.crossover {
                let other = tournament(&mut rng, &pop, &fit, cfg.tournament);
                crossover(&mut rng, parent, other)
            } else if r < cfg.crossover + cfg.mutation {
                mutate(&mut rng, ps, parent)
            } else {
                parent.clone()
            };
            let mut child = child.simplified();
            // duplicates are mutated to keep the population diverse
            for _ in 0..4 {
                if !next.contains(&child) {
                    break;
                }
                child = mutate(&mut rng, ps, &child).simplified();
            }
            next.push(if child.depth() <= cfg.max_depth { child } else { parent.clone() });
        }
        pop = next;
        fit = eval.evaluate_all(&pop);
        history.push(stats(g, &pop, &fit, eval.cache.len()));
        observe(&history[g], &pop[best_of(&fit)]);
    }
    let b = best_of(&fit);
    Ok(EvolutionResult { best: pop[b].clone(), report: fit[b].clone(), history })
}

/// Writes `generation,best_fitness,median_fitness,best_nodes,evaluations`.
pub fn write_history_csv<W: Write>(history: &[GenerationStats], mut w: W) -> Result<()> {
    writeln!(w, "generation,best_fitness,median_fitness,best_nodes,evaluations")?;
    for h in history {
        writeln!(w, "{},{:e},{:e},{},{}", h.generation, h.best_fitness, h.median_fitness, h.best_nodes, h.evaluations)?;
    }
    Ok(())
}

/// Exported form of a discovered transform, with scalings as infix text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveredTransform {
    pub plant: PlantKind,
    pub state_scales: Vec<String>,
    pub control_scale: String,
    pub zeta: String,
    pub fitness: FitnessReport,
    pub seed: u64,
    pub config: GPConfig,
}

impl DiscoveredTransform {
    pub fn new(plant: PlantKind, result: &EvolutionResult, cfg: &GPConfig) -> Self {
        let best = result.best.simplified();
        Self {
            plant,
            state_scales: best.state_scales.iter().map(Expr::to_infix).collect(),
            control_scale: best.control_scale.to_infix(),
            zeta: best.zeta.to_infix(),
            fitness: result.report.clone(),
            seed: cfg.seed,
            config: cfg.clone(),
        }
    }

    pub fn candidate(&self) -> Result<CandidateTransform> {
        Ok(CandidateTransform {
            state_scales: self.state_scales.iter().map(|s| Expr::parse(s)).collect::<Result<_>>()?,
            control_scale: Expr::parse(&self.control_scale)?,
            zeta: Expr::parse(&self.zeta)?,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
