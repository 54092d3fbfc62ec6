//! Stochastic dynamics: the symmetric all-particle system and the coupled
//! tagged-particle/environment system.
//!
//! The absolute-frame engine integrates every particle (tagged particle at
//! index 0) with the Euler left-point rule
//! `x' = x + F dt + sqrt(2 dt) g` and tracks the tagged displacement and its
//! drift compensator from the same force evaluation, so the compensated
//! displacement is Gaussian by construction at any step size.
//!
//! `step_coupled` advances the relative frame (tagged pinned at the origin)
//! with the drift difference written as per-particle increments
//! `u_i - u_0`. Composed this way, one absolute step followed by the frame
//! transformation reproduces one coupled step bit for bit, which the tests
//! exercise; the displayed relative drift (environment pairs + field + uniform
//! back-drift) is checked separately against the kernel difference.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::configuration::{Configuration, ForceCap, Point, MAX_DIM};
use crate::potential::PairPotential;
use crate::seed::derive_seed;
use crate::torus::norm2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    EulerMaruyama,
    /// Halve the step (up to 8 levels) while the largest drift displacement
    /// exceeds a tenth of the interaction scale.
    SubstepAdaptive,
}

#[derive(Clone, Copy, Debug)]
pub struct IntegratorParams {
    pub dt: f64,
    pub scheme: Scheme,
    pub f_max: f64,
    /// Environment snapshots are recorded every `record_stride` steps.
    pub record_stride: usize,
}

impl IntegratorParams {
    pub fn new(dt: f64) -> Self {
        IntegratorParams { dt, scheme: Scheme::EulerMaruyama, f_max: 1e6, record_stride: 100 }
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err("dt must be positive");
        }
        if !(self.f_max > 0.0) {
            return Err("force cap must be positive");
        }
        if self.record_stride == 0 {
            return Err("record stride must be at least 1");
        }
        Ok(())
    }
}

/// Reusable per-step buffers; `increments` holds `F_i dt + sqrt(2 dt) g_i`.
#[derive(Default)]
pub struct StepScratch {
    pub forces: Vec<Point>,
    pub increments: Vec<Point>,
}

impl StepScratch {
    fn resize(&mut self, n: usize) {
        self.forces.resize(n, [0.0; MAX_DIM]);
        self.increments.resize(n, [0.0; MAX_DIM]);
    }
}

/// One Euler step of the symmetric system on absolute coordinates.
/// Forces are evaluated synchronously before any position moves. Gaussian
/// draws are consumed particle-major, coordinate-minor, starting at index 0.
pub fn step_full(
    config: &mut Configuration,
    pot: &PairPotential,
    dt: f64,
    cap: &mut ForceCap,
    rng: &mut impl Rng,
    scratch: &mut StepScratch,
) {
    config.prepare(pot);
    let n = config.len();
    let d = config.bbox.dim;
    scratch.resize(n);
    for i in 0..n {
        scratch.forces[i] = config.pair_force(i, pot, cap);
    }
    let s = libm::sqrt(2.0 * dt);
    for i in 0..n {
        for k in 0..d {
            let g: f64 = rng.sample(StandardNormal);
            scratch.increments[i][k] = scratch.forces[i][k] * dt + s * g;
        }
    }
    for i in 0..n {
        let mut p = *config.position(i);
        for k in 0..d {
            p[k] = p[k] + scratch.increments[i][k];
        }
        config.displace(i, p);
    }
}

/// Tagged particle plus environment in the relative frame: the tagged
/// particle sits at the origin of `env`'s box, `xi` is its wrapped absolute
/// position and `displacement` the unwrapped one.
#[derive(Clone, Debug)]
pub struct CoupledState {
    pub xi: Point,
    pub displacement: Point,
    pub compensator: Point,
    pub env: Configuration,
}

impl CoupledState {
    pub fn new(env: Configuration) -> Self {
        CoupledState {
            xi: [0.0; MAX_DIM],
            displacement: [0.0; MAX_DIM],
            compensator: [0.0; MAX_DIM],
            env,
        }
    }

    /// Absolute configuration with the tagged particle first, placed in the
    /// tagged frame (tagged at the origin). Contains no arithmetic, so the
    /// absolute and relative engines see bitwise-identical positions.
    pub fn to_absolute(&self) -> Configuration {
        let mut pts = Vec::with_capacity(self.env.len() + 1);
        pts.push([0.0; MAX_DIM]);
        pts.extend_from_slice(self.env.positions());
        Configuration::from_positions(self.env.bbox, &pts)
    }
}

/// One Euler step of the coupled system in the relative frame, consuming the
/// same Gaussian draws as [`step_full`] on [`CoupledState::to_absolute`].
pub fn step_coupled(
    state: &mut CoupledState,
    pot: &PairPotential,
    dt: f64,
    cap: &mut ForceCap,
    rng: &mut impl Rng,
    scratch: &mut StepScratch,
) {
    let d = state.env.bbox.dim;
    let bbox = state.env.bbox;
    let mut work = state.to_absolute();
    work.prepare(pot);
    let n = work.len();
    scratch.resize(n);
    // force on the tagged particle is the environment drift of the tagged
    // coordinate; forces on the others are the relative-frame pair forces
    for i in 0..n {
        scratch.forces[i] = work.pair_force(i, pot, cap);
    }
    let s = libm::sqrt(2.0 * dt);
    for i in 0..n {
        for k in 0..d {
            let g: f64 = rng.sample(StandardNormal);
            scratch.increments[i][k] = scratch.forces[i][k] * dt + s * g;
        }
    }
    let u0 = scratch.increments[0];
    // tagged coordinate: drift + noise of Euler step, recentring comes out of
    // the environment update below
    let tagged_new = bbox.wrap(&u0); // 0 + u0, wrapped
    for k in 0..d {
        state.displacement[k] += u0[k];
        state.compensator[k] += scratch.forces[0][k] * dt;
        state.xi[k] = bbox.wrap_coord(state.xi[k] + u0[k]);
    }
    for i in 1..n {
        let y = *work.position(i);
        let mut moved = [0.0; MAX_DIM];
        for k in 0..d {
            moved[k] = y[k] + scratch.increments[i][k];
        }
        let moved = bbox.wrap(&moved);
        // u_i - u_0 composed exactly as the absolute step difference
        state.env.displace(i - 1, bbox.min_image(&moved, &tagged_new));
    }
}

/// Relative-frame drift on environment particle `y_i` written out as the
/// displayed three sums: pairs inside the environment, the field of the
/// tagged particle at the origin, and the uniform back-drift of the frame.
/// This is the oracle for `step_coupled`'s kernel-difference drift.
pub fn coupled_drift_direct(
    env: &Configuration,
    i: usize,
    pot: &PairPotential,
    cap: &mut ForceCap,
) -> Point {
    let d = env.bbox.dim;
    let yi = *env.position(i);
    let mut drift = [0.0; MAX_DIM];
    // - sum_{j != i} grad phi(y_i - y_j)
    for j in 0..env.len() {
        if j == i {
            continue;
        }
        let disp = env.bbox.min_image(&yi, env.position(j));
        let g = crate::configuration::capped_gradient(pot, &disp, cap);
        for k in 0..d {
            drift[k] -= g[k];
        }
    }
    // - grad phi(y_i)
    let origin = [0.0; MAX_DIM];
    let disp = env.bbox.min_image(&yi, &origin);
    let g = crate::configuration::capped_gradient(pot, &disp, cap);
    for k in 0..d {
        drift[k] -= g[k];
    }
    // - sum_j grad phi(y_j)
    for j in 0..env.len() {
        let disp = env.bbox.min_image(env.position(j), &origin);
        let g = crate::configuration::capped_gradient(pot, &disp, cap);
        for k in 0..d {
            drift[k] -= g[k];
        }
    }
    drift
}

/// Tagged-coordinate drift `sum_j grad phi(y_j)` over the relative
/// environment: the mean forward velocity observable.
pub fn tagged_drift(env: &Configuration, pot: &PairPotential, cap: &mut ForceCap) -> Point {
    let d = env.bbox.dim;
    let origin = [0.0; MAX_DIM];
    let mut v = [0.0; MAX_DIM];
    for j in 0..env.len() {
        let disp = env.bbox.min_image(env.position(j), &origin);
        let g = crate::configuration::capped_gradient(pot, &disp, cap);
        for k in 0..d {
            v[k] += g[k];
        }
    }
    v
}

/// Per-step view handed to trajectory observers.
pub struct StepView<'a> {
    pub step: usize,
    pub t: f64,
    /// Unwrapped tagged displacement.
    pub x: &'a Point,
    /// Left-point drift integral of the tagged coordinate.
    pub compensator: &'a Point,
    /// Environment positions relative to the tagged particle.
    pub env: &'a [Point],
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dt: f64,
    pub seed: u64,
    pub times: Vec<f64>,
    pub displacement: Vec<Point>,
    pub compensator: Vec<Point>,
    pub particle_counts: Vec<usize>,
    /// `(step index, relative environment)` every `record_stride` steps.
    pub snapshots: Vec<(usize, Vec<Point>)>,
    pub cap: ForceCap,
}

/// Integrate the coupled system for `steps` steps in the absolute frame and
/// stream every step to `observe`. The observer sees the initial state as
/// step 0. Deterministic in `seed`.
pub fn simulate_observed(
    env0: &Configuration,
    pot: &PairPotential,
    params: &IntegratorParams,
    steps: usize,
    seed: u64,
    mut observe: impl FnMut(StepView<'_>),
) -> ForceCap {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let bbox = env0.bbox;
    let mut config = CoupledState::new(env0.clone()).to_absolute();
    let mut cap = ForceCap::new(params.f_max);
    let mut scratch = StepScratch::default();
    let mut x = [0.0; MAX_DIM];
    let mut c = [0.0; MAX_DIM];
    let mut env_buf: Vec<Point> = env0.positions().to_vec();
    observe(StepView { step: 0, t: 0.0, x: &x, compensator: &c, env: &env_buf });
    let nenv = env0.len();
    for step in 1..=steps {
        advance_absolute(&mut config, pot, params, &mut cap, &mut rng, &mut scratch, &mut x, &mut c);
        // recenter the environment on the tagged particle
        let tagged = *config.position(0);
        for i in 0..nenv {
            env_buf[i] = bbox.min_image(config.position(i + 1), &tagged);
        }
        observe(StepView { step, t: step as f64 * params.dt, x: &x, compensator: &c, env: &env_buf });
    }
    cap
}

/// One macro step of the absolute engine, honoring the scheme.
fn advance_absolute(
    config: &mut Configuration,
    pot: &PairPotential,
    params: &IntegratorParams,
    cap: &mut ForceCap,
    rng: &mut impl Rng,
    scratch: &mut StepScratch,
    x: &mut Point,
    c: &mut Point,
) {
    let d = config.bbox.dim;
    match params.scheme {
        Scheme::EulerMaruyama => {
            step_full(config, pot, params.dt, cap, rng, scratch);
            for k in 0..d {
                x[k] += scratch.increments[0][k];
                c[k] += scratch.forces[0][k] * params.dt;
            }
        }
        Scheme::SubstepAdaptive => {
            substep(config, pot, params.dt, 0, cap, rng, scratch, x, c);
        }
    }
}

fn substep(
    config: &mut Configuration,
    pot: &PairPotential,
    dt: f64,
    depth: u32,
    cap: &mut ForceCap,
    rng: &mut impl Rng,
    scratch: &mut StepScratch,
    x: &mut Point,
    c: &mut Point,
) {
    let d = config.bbox.dim;
    if depth < 8 {
        // peek at the current drift scale
        config.prepare(pot);
        let mut peek = ForceCap::new(cap.f_max);
        let mut max2 = 0.0f64;
        for i in 0..config.len() {
            let f = config.pair_force(i, pot, &mut peek);
            max2 = max2.max(norm2(&f, d));
        }
        if libm::sqrt(max2) * dt > 0.1 * pot.sigma {
            substep(config, pot, dt / 2.0, depth + 1, cap, rng, scratch, x, c);
            substep(config, pot, dt / 2.0, depth + 1, cap, rng, scratch, x, c);
            return;
        }
    }
    step_full(config, pot, dt, cap, rng, scratch);
    for k in 0..d {
        x[k] += scratch.increments[0][k];
        c[k] += scratch.forces[0][k] * dt;
    }
}

/// Integrate and record a full trajectory (displacement and compensator at
/// every step, environment snapshots at the record stride).
pub fn simulate(
    env0: &Configuration,
    pot: &PairPotential,
    params: &IntegratorParams,
    total_time: f64,
    seed: u64,
) -> Trajectory {
    let steps = libm::round(total_time / params.dt) as usize;
    let mut traj = Trajectory {
        dt: params.dt,
        seed,
        times: Vec::with_capacity(steps + 1),
        displacement: Vec::with_capacity(steps + 1),
        compensator: Vec::with_capacity(steps + 1),
        particle_counts: Vec::with_capacity(steps + 1),
        snapshots: Vec::new(),
        cap: ForceCap::new(params.f_max),
    };
    let stride = params.record_stride;
    let cap = simulate_observed(env0, pot, params, steps, seed, |view| {
        traj.times.push(view.t);
        traj.displacement.push(*view.x);
        traj.compensator.push(*view.compensator);
        traj.particle_counts.push(view.env.len());
        if view.step % stride == 0 {
            traj.snapshots.push((view.step, view.env.to_vec()));
        }
    });
    traj.cap = cap;
    traj
}

/// Independent trajectories from the same initial environment; member `i`
/// uses the stream seed `derive_seed(base_seed, "trajectory", i)`.
pub fn simulate_ensemble(
    env0: &Configuration,
    pot: &PairPotential,
    params: &IntegratorParams,
    total_time: f64,
    base_seed: u64,
    count: usize,
) -> Vec<Trajectory> {
    (0..count)
        .map(|i| simulate(env0, pot, params, total_time, derive_seed(base_seed, "trajectory", i as u64)))
        .collect()
}
