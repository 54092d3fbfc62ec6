//! Grand-canonical Monte Carlo for the environment seen from a pinned
//! particle at the origin.
//!
//! The target density on n-particle configurations is proportional to
//! `z^n/n! * exp(-U)` with `U = sum_{i<j} pair(x_i - x_j) + sum_i field(x_i)`,
//! i.e. reference intensity `z exp(-field(x)) dx`. The pair and the field
//! potential are passed separately; the physical setup binds both to the same
//! truncated potential, while tests may switch one of them off.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::configuration::{Configuration, Point, MAX_DIM};
use crate::potential::PairPotential;
use crate::torus::TorusBox;

#[derive(Clone, Copy, Debug)]
pub struct GcmcParams {
    /// Activity `z` of the reference Poisson field.
    pub activity: f64,
    /// Probabilities of proposing birth / death / displacement.
    pub move_mix: [f64; 3],
    /// Standard deviation of Gaussian displacement proposals.
    pub displacement_scale: f64,
    /// Equilibration sweeps (one sweep = max(n, 1) elementary moves).
    pub sweeps: u64,
}

impl GcmcParams {
    pub fn new(activity: f64) -> Self {
        GcmcParams {
            activity,
            move_mix: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            displacement_scale: 0.25,
            sweeps: 400,
        }
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.activity >= 0.0) {
            return Err("activity must be non-negative");
        }
        let s: f64 = self.move_mix.iter().sum();
        if self.move_mix.iter().any(|p| *p < 0.0) || (s - 1.0).abs() > 1e-9 {
            return Err("move mix must be a probability vector");
        }
        if !(self.displacement_scale > 0.0) {
            return Err("displacement scale must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MoveKind {
    Birth,
    Death,
    Displacement,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct GcmcStats {
    pub birth_attempts: u64,
    pub birth_accepts: u64,
    pub death_attempts: u64,
    pub death_accepts: u64,
    pub displacement_attempts: u64,
    pub displacement_accepts: u64,
}

/// Energy of inserting a free point: field plus interaction with everyone.
fn insertion_energy(
    config: &Configuration,
    x: &Point,
    pair: &PairPotential,
    field: &PairPotential,
    exclude: Option<usize>,
) -> f64 {
    let origin = [0.0; MAX_DIM];
    let disp = config.bbox.min_image(x, &origin);
    field.evaluate(&disp) + config.local_energy(x, pair, exclude)
}

/// Acceptance ratio for inserting `x` into `config` (before clamping at 1).
pub fn birth_ratio(
    config: &Configuration,
    x: &Point,
    params: &GcmcParams,
    pair: &PairPotential,
    field: &PairPotential,
) -> f64 {
    let de = insertion_energy(config, x, pair, field, None);
    let n = config.len() as f64;
    params.activity * config.bbox.volume() / (n + 1.0) * libm::exp(-de)
}

/// Acceptance ratio for removing particle `i` (before clamping at 1).
pub fn death_ratio(
    config: &Configuration,
    i: usize,
    params: &GcmcParams,
    pair: &PairPotential,
    field: &PairPotential,
) -> f64 {
    let x = *config.position(i);
    let de = insertion_energy(config, &x, pair, field, Some(i));
    let n = config.len() as f64;
    n / (params.activity * config.bbox.volume()) * libm::exp(de)
}

/// Acceptance ratio for moving particle `i` to `x_new` (before clamping).
pub fn displacement_ratio(
    config: &Configuration,
    i: usize,
    x_new: &Point,
    pair: &PairPotential,
    field: &PairPotential,
) -> f64 {
    let x_old = *config.position(i);
    let e_new = insertion_energy(config, x_new, pair, field, Some(i));
    let e_old = insertion_energy(config, &x_old, pair, field, Some(i));
    if e_new == f64::INFINITY {
        return 0.0;
    }
    if e_old == f64::INFINITY {
        return f64::INFINITY;
    }
    libm::exp(-(e_new - e_old))
}

fn uniform_point(bbox: &TorusBox, rng: &mut impl Rng) -> Point {
    let h = bbox.side / 2.0;
    let mut p = [0.0; MAX_DIM];
    for k in 0..bbox.dim {
        p[k] = rng.gen_range(-h..h);
    }
    p
}

/// One elementary birth/death/displacement move.
pub fn gcmc_step(
    config: &mut Configuration,
    params: &GcmcParams,
    pair: &PairPotential,
    field: &PairPotential,
    rng: &mut impl Rng,
    stats: &mut GcmcStats,
) {
    config.prepare(pair);
    let u: f64 = rng.gen();
    let kind = if u < params.move_mix[0] {
        MoveKind::Birth
    } else if u < params.move_mix[0] + params.move_mix[1] {
        MoveKind::Death
    } else {
        MoveKind::Displacement
    };
    match kind {
        MoveKind::Birth => {
            stats.birth_attempts += 1;
            let x = uniform_point(&config.bbox, rng);
            let ratio = birth_ratio(config, &x, params, pair, field);
            if accept(ratio, rng) {
                config.insert(x);
                stats.birth_accepts += 1;
            }
        }
        MoveKind::Death => {
            stats.death_attempts += 1;
            if config.is_empty() {
                return;
            }
            let i = rng.gen_range(0..config.len());
            let ratio = death_ratio(config, i, params, pair, field);
            if accept(ratio, rng) {
                config.remove(i);
                stats.death_accepts += 1;
            }
        }
        MoveKind::Displacement => {
            stats.displacement_attempts += 1;
            if config.is_empty() {
                return;
            }
            let i = rng.gen_range(0..config.len());
            let mut x = *config.position(i);
            for k in 0..config.bbox.dim {
                let g: f64 = rng.sample(StandardNormal);
                x[k] += params.displacement_scale * g;
            }
            let ratio = displacement_ratio(config, i, &x, pair, field);
            if accept(ratio, rng) {
                config.displace(i, x);
                stats.displacement_accepts += 1;
            }
        }
    }
}

#[inline]
fn accept(ratio: f64, rng: &mut impl Rng) -> bool {
    debug_assert!(!ratio.is_nan());
    ratio >= 1.0 || rng.gen::<f64>() < ratio
}

/// One sweep = `max(round(z L^d), 1)` elementary moves.
///
/// The move count deliberately depends on the expected occupancy, not the
/// current one: sampling a stationary chain at boundaries whose spacing
/// depends on the state re-weights the samples (sweeps are sparser when the
/// system is full), which visibly biases the particle-count law.
pub fn gcmc_sweep(
    config: &mut Configuration,
    params: &GcmcParams,
    pair: &PairPotential,
    field: &PairPotential,
    rng: &mut impl Rng,
    stats: &mut GcmcStats,
) {
    let moves = (libm::round(params.activity * config.bbox.volume()) as usize).max(1);
    for _ in 0..moves {
        gcmc_step(config, params, pair, field, rng, stats);
    }
}

/// Run the chain from empty for `params.sweeps` sweeps.
pub fn sample_equilibrium(
    bbox: TorusBox,
    params: &GcmcParams,
    pair: &PairPotential,
    field: &PairPotential,
    rng: &mut impl Rng,
) -> Configuration {
    let mut config = Configuration::new(bbox);
    let mut stats = GcmcStats::default();
    for _ in 0..params.sweeps {
        gcmc_sweep(&mut config, params, pair, field, rng, &mut stats);
    }
    config
}

/// Continue a chain, emitting `count` configurations `thin` sweeps apart.
pub fn sample_chain(
    config: &mut Configuration,
    params: &GcmcParams,
    pair: &PairPotential,
    field: &PairPotential,
    rng: &mut impl Rng,
    count: usize,
    thin: u64,
) -> alloc::vec::Vec<Configuration> {
    let mut out = alloc::vec::Vec::with_capacity(count);
    let mut stats = GcmcStats::default();
    for _ in 0..count {
        for _ in 0..thin {
            gcmc_sweep(config, params, pair, field, rng, &mut stats);
        }
        out.push(config.clone());
    }
    out
}
