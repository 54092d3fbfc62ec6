//! Cylinder functionals of point configurations and their generators.
//!
//! A cylinder functional is `F(gamma) = g(<f_1, gamma>, ..., <f_m, gamma>)`
//! where each `f_i` is a smooth compactly supported test function and
//! `<f, gamma>` denotes the sum of `f` over the particles of `gamma`.
//! Everything here lives in the relative frame: the tagged particle sits at
//! the origin and acts on the environment through the same pair potential as
//! an external field.
//!
//! The generator formulas below are exact consequences of the relative-frame
//! dynamics (environment particles carry noise `sqrt(2)(dB^i - dB^0)`, so
//! their noises are correlated through the shared tagged noise). They are
//! cross-checked in the tests against brute-force finite-difference
//! generators built from nothing but the drift vector and the noise
//! covariance matrix.

use alloc::vec::Vec;

use crate::configuration::{Configuration, Point, MAX_DIM};
use crate::potential::PairPotential;

/// Quintic smoothstep `t^3 (10 - 15 t + 6 t^2)` with its first two
/// derivatives. First and second derivatives vanish at both endpoints, so
/// profiles built from it are C^2 across the transition band.
fn smoothstep(t: f64) -> (f64, f64, f64) {
    let s = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
    let d1 = 30.0 * t * t * (1.0 - t) * (1.0 - t);
    let d2 = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
    (s, d1, d2)
}

/// Even 1-d plateau profile: 1 on `[-inner, inner]`, 0 outside
/// `[-outer, outer]`, quintic-smoothstep transition in between.
#[derive(Clone, Copy, Debug)]
pub struct PlateauProfile {
    pub inner: f64,
    pub outer: f64,
}

impl PlateauProfile {
    pub fn new(inner: f64, outer: f64) -> Self {
        assert!(0.0 <= inner && inner < outer, "need 0 <= inner < outer");
        PlateauProfile { inner, outer }
    }

    /// Value, first and second derivative at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let a = if x < 0.0 { -x } else { x };
        if a <= self.inner {
            (1.0, 0.0, 0.0)
        } else if a >= self.outer {
            (0.0, 0.0, 0.0)
        } else {
            let w = self.outer - self.inner;
            let t = (self.outer - a) / w;
            let (s, d1, d2) = smoothstep(t);
            // d a / d x = sign(x); d t / d a = -1/w
            let sign = if x < 0.0 { -1.0 } else { 1.0 };
            (s, -d1 / w * sign, d2 / (w * w))
        }
    }
}

/// Smooth compactly supported test function on the torus (support must fit
/// inside the box; callers are responsible for that).
#[derive(Clone, Debug)]
pub enum TestFunction {
    /// Product of plateau profiles per axis: 1 on `[-inner, inner]^d`,
    /// 0 outside `[-outer, outer]^d`.
    PlateauBump { inner: f64, outer: f64, dim: usize },
    /// `x_axis` times the plateau product: equals the coordinate on the
    /// inner box, vanishes outside the outer box.
    SmoothCoordinate { axis: usize, inner: f64, outer: f64, dim: usize },
    /// Gaussian `exp(-|x|^2 / (2 w^2))` clipped to compact support by the
    /// plateau product.
    GaussianClipped { width: f64, inner: f64, outer: f64, dim: usize },
}

impl TestFunction {
    pub fn dim(&self) -> usize {
        match self {
            TestFunction::PlateauBump { dim, .. }
            | TestFunction::SmoothCoordinate { dim, .. }
            | TestFunction::GaussianClipped { dim, .. } => *dim,
        }
    }

    fn profile(&self) -> PlateauProfile {
        match self {
            TestFunction::PlateauBump { inner, outer, .. }
            | TestFunction::SmoothCoordinate { inner, outer, .. }
            | TestFunction::GaussianClipped { inner, outer, .. } => {
                PlateauProfile::new(*inner, *outer)
            }
        }
    }

    /// Plateau product `P(x)` with gradient and Laplacian.
    fn plateau_parts(&self, x: &Point) -> (f64, Point, f64) {
        let d = self.dim();
        let prof = self.profile();
        let mut vals = [0.0; MAX_DIM];
        let mut d1 = [0.0; MAX_DIM];
        let mut d2 = [0.0; MAX_DIM];
        for k in 0..d {
            let (v, g, h) = prof.eval(x[k]);
            vals[k] = v;
            d1[k] = g;
            d2[k] = h;
        }
        let mut p = 1.0;
        for k in 0..d {
            p *= vals[k];
        }
        let mut grad = [0.0; MAX_DIM];
        let mut lap = 0.0;
        for k in 0..d {
            // product over the other axes
            let mut rest = 1.0;
            for j in 0..d {
                if j != k {
                    rest *= vals[j];
                }
            }
            grad[k] = d1[k] * rest;
            lap += d2[k] * rest;
        }
        (p, grad, lap)
    }

    pub fn value(&self, x: &Point) -> f64 {
        let (p, _, _) = self.plateau_parts(x);
        match self {
            TestFunction::PlateauBump { .. } => p,
            TestFunction::SmoothCoordinate { axis, .. } => x[*axis] * p,
            TestFunction::GaussianClipped { width, dim, .. } => {
                let r2 = crate::torus::norm2(x, *dim);
                libm::exp(-r2 / (2.0 * width * width)) * p
            }
        }
    }

    pub fn gradient(&self, x: &Point) -> Point {
        let d = self.dim();
        let (p, gp, _) = self.plateau_parts(x);
        let mut g = [0.0; MAX_DIM];
        match self {
            TestFunction::PlateauBump { .. } => {
                g[..d].copy_from_slice(&gp[..d]);
            }
            TestFunction::SmoothCoordinate { axis, .. } => {
                for k in 0..d {
                    g[k] = x[*axis] * gp[k];
                }
                g[*axis] += p;
            }
            TestFunction::GaussianClipped { width, .. } => {
                let r2 = crate::torus::norm2(x, d);
                let w2 = width * width;
                let gauss = libm::exp(-r2 / (2.0 * w2));
                for k in 0..d {
                    g[k] = gauss * (gp[k] - x[k] / w2 * p);
                }
            }
        }
        g
    }

    pub fn laplacian(&self, x: &Point) -> f64 {
        let d = self.dim();
        let (p, gp, lp) = self.plateau_parts(x);
        match self {
            TestFunction::PlateauBump { .. } => lp,
            TestFunction::SmoothCoordinate { axis, .. } => 2.0 * gp[*axis] + x[*axis] * lp,
            TestFunction::GaussianClipped { width, .. } => {
                let r2 = crate::torus::norm2(x, d);
                let w2 = width * width;
                let gauss = libm::exp(-r2 / (2.0 * w2));
                // Delta(G P) = (Delta G) P + 2 grad G . grad P + G Delta P
                let lap_g = (r2 / (w2 * w2) - d as f64 / w2) * gauss;
                let mut cross = 0.0;
                for k in 0..d {
                    cross += (-x[k] / w2 * gauss) * gp[k];
                }
                lap_g * p + 2.0 * cross + gauss * lp
            }
        }
    }
}

/// Smooth outer function `g: R^m -> R` with first and second partials.
#[derive(Clone, Debug)]
pub enum OuterFunction {
    /// `offset + sum_i coeffs[i] s_i`
    Linear { coeffs: Vec<f64>, offset: f64 },
    /// `offset + sum_i linear[i] s_i + 1/2 sum_ij quad[i][j] s_i s_j`
    /// (`quad` must be symmetric).
    Quadratic { linear: Vec<f64>, quad: Vec<Vec<f64>>, offset: f64 },
    /// `tanh(offset + sum_i coeffs[i] s_i)` - bounded, all derivatives bounded.
    TanhOfLinear { coeffs: Vec<f64>, offset: f64 },
}

impl OuterFunction {
    pub fn arity(&self) -> usize {
        match self {
            OuterFunction::Linear { coeffs, .. } | OuterFunction::TanhOfLinear { coeffs, .. } => {
                coeffs.len()
            }
            OuterFunction::Quadratic { linear, .. } => linear.len(),
        }
    }

    pub fn value(&self, s: &[f64]) -> f64 {
        match self {
            OuterFunction::Linear { coeffs, offset } => {
                let mut v = *offset;
                for (c, x) in coeffs.iter().zip(s) {
                    v += c * x;
                }
                v
            }
            OuterFunction::Quadratic { linear, quad, offset } => {
                let mut v = *offset;
                for (c, x) in linear.iter().zip(s) {
                    v += c * x;
                }
                for i in 0..s.len() {
                    for j in 0..s.len() {
                        v += 0.5 * quad[i][j] * s[i] * s[j];
                    }
                }
                v
            }
            OuterFunction::TanhOfLinear { coeffs, offset } => {
                let mut v = *offset;
                for (c, x) in coeffs.iter().zip(s) {
                    v += c * x;
                }
                libm::tanh(v)
            }
        }
    }

    pub fn partial(&self, s: &[f64], i: usize) -> f64 {
        match self {
            OuterFunction::Linear { coeffs, .. } => coeffs[i],
            OuterFunction::Quadratic { linear, quad, .. } => {
                let mut v = linear[i];
                for j in 0..s.len() {
                    v += quad[i][j] * s[j];
                }
                v
            }
            OuterFunction::TanhOfLinear { coeffs, offset } => {
                let mut v = *offset;
                for (c, x) in coeffs.iter().zip(s) {
                    v += c * x;
                }
                let t = libm::tanh(v);
                coeffs[i] * (1.0 - t * t)
            }
        }
    }

    pub fn second_partial(&self, s: &[f64], i: usize, j: usize) -> f64 {
        match self {
            OuterFunction::Linear { .. } => 0.0,
            OuterFunction::Quadratic { quad, .. } => quad[i][j],
            OuterFunction::TanhOfLinear { coeffs, offset } => {
                let mut v = *offset;
                for (c, x) in coeffs.iter().zip(s) {
                    v += c * x;
                }
                let t = libm::tanh(v);
                -2.0 * t * (1.0 - t * t) * coeffs[i] * coeffs[j]
            }
        }
    }
}

/// `F(gamma) = g(<f_1, gamma>, ..., <f_m, gamma>)`.
#[derive(Clone, Debug)]
pub struct CylinderFunction {
    pub outer: OuterFunction,
    pub inner: Vec<TestFunction>,
}

impl CylinderFunction {
    pub fn new(outer: OuterFunction, inner: Vec<TestFunction>) -> Self {
        assert_eq!(outer.arity(), inner.len());
        CylinderFunction { outer, inner }
    }

    /// The linear statistics `S_i = <f_i, gamma>`.
    pub fn statistics(&self, env: &Configuration) -> Vec<f64> {
        self.inner
            .iter()
            .map(|f| env.linear_statistic(|x| f.value(x)))
            .collect()
    }

    pub fn value(&self, env: &Configuration) -> f64 {
        self.outer.value(&self.statistics(env))
    }

    /// Per-particle gradient: `sum_i d_i g grad f_i(x)` at each particle `x`,
    /// i.e. how `F` responds to displacing that particle alone.
    pub fn particle_gradients(&self, env: &Configuration) -> Vec<Point> {
        let d = env.bbox.dim;
        let s = self.statistics(env);
        let partials: Vec<f64> =
            (0..self.inner.len()).map(|i| self.outer.partial(&s, i)).collect();
        env.iter()
            .map(|p| {
                let mut out = [0.0; MAX_DIM];
                for (i, f) in self.inner.iter().enumerate() {
                    let g = f.gradient(p);
                    for k in 0..d {
                        out[k] += partials[i] * g[k];
                    }
                }
                out
            })
            .collect()
    }

    /// `grad_gamma F = sum_i d_i g <grad f_i, gamma>`: the direction in which
    /// a uniform shift of all environment particles changes `F`. Equals the
    /// sum of the per-particle gradients.
    pub fn configuration_gradient(&self, env: &Configuration) -> Point {
        let d = env.bbox.dim;
        let s = self.statistics(env);
        let mut out = [0.0; MAX_DIM];
        for (i, f) in self.inner.iter().enumerate() {
            let gi = self.outer.partial(&s, i);
            for p in env.iter() {
                let g = f.gradient(p);
                for k in 0..d {
                    out[k] += gi * g[k];
                }
            }
        }
        out
    }
}

/// Per-configuration sums that every generator expression needs. Computed in
/// one pass over particles and one pass over pairs.
struct GeneratorParts {
    /// `S_i`
    stats: Vec<f64>,
    /// `<grad f_i, gamma>` per inner function
    grad_sums: Vec<Point>,
    /// `<Delta f_i, gamma>`
    lap_sums: Vec<f64>,
    /// `<(grad phi, grad f_i), gamma>` - the field term
    field_dots: Vec<f64>,
    /// `sum_pairs (grad phi(x - y), grad f_i(x) - grad f_i(y))`
    pair_dots: Vec<f64>,
    /// `<grad phi, gamma>` - total field gradient over the environment
    field_sum: Point,
}

fn generator_parts(cf: &CylinderFunction, env: &Configuration, pot: &PairPotential) -> GeneratorParts {
    let d = env.bbox.dim;
    let m = cf.inner.len();
    let n = env.len();
    let mut stats = Vec::new();
    stats.resize(m, 0.0);
    let mut grad_sums: Vec<Point> = Vec::new();
    grad_sums.resize(m, [0.0; MAX_DIM]);
    let mut lap_sums = Vec::new();
    lap_sums.resize(m, 0.0);
    let mut field_dots = Vec::new();
    field_dots.resize(m, 0.0);
    let mut pair_dots = Vec::new();
    pair_dots.resize(m, 0.0);
    let mut field_sum = [0.0; MAX_DIM];

    // cache per-particle gradients of the inner functions for the pair pass
    let mut grads: Vec<Point> = Vec::new();
    grads.resize(m * n, [0.0; MAX_DIM]);

    for (a, x) in env.iter().enumerate() {
        // field acts at the minimum image of x seen from the origin
        let xi = env.bbox.wrap(x);
        let gphi = pot.gradient(&xi);
        for k in 0..d {
            field_sum[k] += gphi[k];
        }
        for (i, f) in cf.inner.iter().enumerate() {
            let v = f.value(x);
            let g = f.gradient(x);
            stats[i] += v;
            lap_sums[i] += f.laplacian(x);
            for k in 0..d {
                grad_sums[i][k] += g[k];
                field_dots[i] += gphi[k] * g[k];
            }
            grads[i * n + a] = g;
        }
    }
    for a in 0..n {
        for b in (a + 1)..n {
            let disp = env.bbox.min_image(env.position(a), env.position(b));
            let gphi = pot.gradient(&disp);
            for i in 0..m {
                let ga = grads[i * n + a];
                let gb = grads[i * n + b];
                for k in 0..d {
                    pair_dots[i] += gphi[k] * (ga[k] - gb[k]);
                }
            }
        }
    }
    GeneratorParts { stats, grad_sums, lap_sums, field_dots, pair_dots, field_sum }
}

/// Generator of the environment process applied to a cylinder functional.
///
/// The noise of environment particle `i` is `sqrt(2)(dB^i - dB^0)`, so the
/// per-particle quadratic variation is `4 dt` and distinct particles share a
/// `2 dt` covariance; both show up below.
pub fn generator_env(cf: &CylinderFunction, env: &Configuration, pot: &PairPotential) -> f64 {
    let d = env.bbox.dim;
    let parts = generator_parts(cf, env, pot);
    let m = cf.inner.len();
    let s = &parts.stats;

    // second-order (carre du champ) block
    let mut second = 0.0;
    for i in 0..m {
        for j in 0..m {
            let gij = cf.outer.second_partial(s, i, j);
            if gij == 0.0 {
                continue;
            }
            // sum over particles of grad f_i . grad f_j
            let mut same = 0.0;
            for p in env.iter() {
                let gi = cf.inner[i].gradient(p);
                let gj = cf.inner[j].gradient(p);
                for k in 0..d {
                    same += gi[k] * gj[k];
                }
            }
            let mut cross = 0.0;
            for k in 0..d {
                cross += parts.grad_sums[i][k] * parts.grad_sums[j][k];
            }
            second += gij * (same + cross);
        }
    }

    // first-order (drift + Ito correction) block
    let mut first = 0.0;
    for j in 0..m {
        let gj = cf.outer.partial(s, j);
        let mut frame_dot = 0.0;
        for k in 0..d {
            frame_dot += parts.field_sum[k] * parts.grad_sums[j][k];
        }
        first += gj
            * (2.0 * parts.lap_sums[j] - parts.pair_dots[j] - parts.field_dots[j] - frame_dot);
    }
    second + first
}

/// Generator of the coupled process on products `f(xi) F(gamma)`, where `xi`
/// is the wrapped tagged coordinate. The tagged coordinate drifts with
/// `+<grad phi, gamma>` and its noise is anti-correlated with every
/// environment particle's noise through the shared `B^0`.
pub fn generator_coup(
    f: &TestFunction,
    cf: &CylinderFunction,
    xi: &Point,
    env: &Configuration,
    pot: &PairPotential,
) -> f64 {
    let d = env.bbox.dim;
    let fv = f.value(xi);
    let fg = f.gradient(xi);
    let fl = f.laplacian(xi);
    let env_gen = generator_env(cf, env, pot);
    let fval = cf.value(env);
    let cfg_grad = cf.configuration_gradient(env);
    let mut field_sum = [0.0; MAX_DIM];
    for x in env.iter() {
        let g = pot.gradient(&env.bbox.wrap(x));
        for k in 0..d {
            field_sum[k] += g[k];
        }
    }
    let mut cross = 0.0;
    let mut drift = 0.0;
    for k in 0..d {
        cross += cfg_grad[k] * fg[k];
        drift += field_sum[k] * fg[k];
    }
    fv * env_gen - 2.0 * cross + fval * drift + fl * fval
}

/// Smooth compactly supported vector field on the torus.
#[derive(Clone, Debug)]
pub enum VectorField {
    /// `v = grad f`
    GradientOf(TestFunction),
    /// `v = f e_axis`
    ScaledAxis { f: TestFunction, axis: usize },
}

impl VectorField {
    pub fn value(&self, x: &Point) -> Point {
        match self {
            VectorField::GradientOf(f) => f.gradient(x),
            VectorField::ScaledAxis { f, axis } => {
                let mut v = [0.0; MAX_DIM];
                v[*axis] = f.value(x);
                v
            }
        }
    }

    pub fn divergence(&self, x: &Point) -> f64 {
        match self {
            VectorField::GradientOf(f) => f.laplacian(x),
            VectorField::ScaledAxis { f, axis } => f.gradient(x)[*axis],
        }
    }
}

/// Integration-by-parts functional of a vector field under the tagged Gibbs
/// measure:
/// `B_v = <div v, gamma> - sum_x (grad phi(x), v(x))
///        - sum_pairs (grad phi(x - y), v(x) - v(y))`.
/// Its expectation vanishes in equilibrium; the estimator suite tests that.
pub fn drift_bv(v: &VectorField, env: &Configuration, pot: &PairPotential) -> f64 {
    let d = env.bbox.dim;
    let n = env.len();
    let mut total = 0.0;
    for x in env.iter() {
        total += v.divergence(x);
        let g = pot.gradient(&env.bbox.wrap(x));
        let vx = v.value(x);
        for k in 0..d {
            total -= g[k] * vx[k];
        }
    }
    for a in 0..n {
        for b in (a + 1)..n {
            let disp = env.bbox.min_image(env.position(a), env.position(b));
            let g = pot.gradient(&disp);
            let va = v.value(env.position(a));
            let vb = v.value(env.position(b));
            for k in 0..d {
                total -= g[k] * (va[k] - vb[k]);
            }
        }
    }
    total
}

/// Windowed displacement functionals used to reconstruct the tagged motion
/// from environment observations.
///
/// The window at scale `n` weighs particles by a mollified indicator of
/// `[-n, n]^d`: exactly 1 there, exactly 0 outside `[-n-delta, n+delta]^d`,
/// with the transition in the shell between the two boxes. The sharp
/// indicator of `[-n, n]^d` also appears (in the drift correction and the
/// quadratic-variation bound); the two coincide whenever the shell is empty.
#[derive(Clone, Copy, Debug)]
pub struct AveragingWindow {
    pub n: f64,
    /// Absolute shell width.
    pub delta: f64,
    pub dim: usize,
    /// Schedule weight `r_n`; the denominators below regularize with
    /// `r_n n^d`.
    pub r_n: f64,
}

impl AveragingWindow {
    pub fn new(n: f64, delta: f64, dim: usize, r_n: f64) -> Self {
        assert!(n > 0.0 && delta > 0.0 && r_n > 0.0);
        AveragingWindow { n, delta, dim, r_n }
    }

    /// Mollified counting weight: 1 on `[-n, n]^d`, 0 outside
    /// `[-n-delta, n+delta]^d`.
    pub fn weight(&self) -> TestFunction {
        TestFunction::PlateauBump { inner: self.n, outer: self.n + self.delta, dim: self.dim }
    }

    /// Coordinate along `axis`, exact on `[-n, n]^d`, mollified to zero
    /// across the shell.
    pub fn clipped_coordinate(&self, axis: usize) -> TestFunction {
        TestFunction::SmoothCoordinate {
            axis,
            inner: self.n,
            outer: self.n + self.delta,
            dim: self.dim,
        }
    }

    fn regularizer(&self) -> f64 {
        let mut nd = 1.0;
        for _ in 0..self.dim {
            nd *= self.n;
        }
        self.r_n * nd
    }

    /// Sharp count of particles in `[-n, n]^d`.
    pub fn indicator_count(&self, env: &Configuration) -> f64 {
        let mut count = 0.0;
        for x in env.iter() {
            if (0..self.dim).all(|k| x[k].abs() <= self.n) {
                count += 1.0;
            }
        }
        count
    }

    /// Windowed center-of-mass proxy for the tagged displacement, per axis:
    /// `<f, gamma> / (r_n n^d + <c, gamma>)` with the mollified weights.
    pub fn displacement_proxy(&self, env: &Configuration) -> Point {
        let d = self.dim;
        let c = self.weight();
        let mass = env.linear_statistic(|x| c.value(x));
        let denom = self.regularizer() + mass;
        let mut out = [0.0; MAX_DIM];
        for k in 0..d {
            let f = self.clipped_coordinate(k);
            out[k] = env.linear_statistic(|x| f.value(x)) / denom;
        }
        out
    }

    /// 1 when no particle sits in the transition shell
    /// `n < |x|_inf < n + delta`, so the mollified weights agree with the
    /// sharp indicator on every particle.
    pub fn shell_is_empty(&self, env: &Configuration) -> bool {
        let lo = self.n;
        let hi = self.n + self.delta;
        for x in env.iter() {
            let mut sup = 0.0;
            for k in 0..self.dim {
                let a = if x[k] < 0.0 { -x[k] } else { x[k] };
                if a > sup {
                    sup = a;
                }
            }
            if sup > lo && sup < hi {
                return false;
            }
        }
        true
    }

    /// Drift correction of the displacement proxy, built from the sharp
    /// indicator `c0` of `[-n, n]^d`:
    /// `Ytilde_k = <d_k phi, gamma>
    ///   - [<d_k phi c0, gamma> + <d_k phi, gamma><c0, gamma>
    ///      + sum_pairs d_k phi(x-y)(c0(x) - c0(y))] / (r_n n^d + <c0, gamma>)`.
    /// Vanishes identically for the zero potential.
    pub fn drift_correction(&self, env: &Configuration, pot: &PairPotential) -> Point {
        let d = self.dim;
        let n = env.len();
        let inside = |x: &Point| (0..d).all(|k| x[k].abs() <= self.n);
        let mut mass = 0.0;
        let mut field_sum = [0.0; MAX_DIM];
        let mut weighted_field = [0.0; MAX_DIM];
        for x in env.iter() {
            let cw = if inside(x) { 1.0 } else { 0.0 };
            mass += cw;
            let g = pot.gradient(&env.bbox.wrap(x));
            for k in 0..d {
                field_sum[k] += g[k];
                weighted_field[k] += g[k] * cw;
            }
        }
        let mut pair_term = [0.0; MAX_DIM];
        for a in 0..n {
            for b in (a + 1)..n {
                let ca = if inside(env.position(a)) { 1.0 } else { 0.0 };
                let cb = if inside(env.position(b)) { 1.0 } else { 0.0 };
                if ca == cb {
                    continue;
                }
                let disp = env.bbox.min_image(env.position(a), env.position(b));
                let g = pot.gradient(&disp);
                for k in 0..d {
                    pair_term[k] += g[k] * (ca - cb);
                }
            }
        }
        let denom = self.regularizer() + mass;
        let mut out = [0.0; MAX_DIM];
        for k in 0..d {
            let numer = weighted_field[k] + field_sum[k] * mass + pair_term[k];
            out[k] = field_sum[k] - numer / denom;
        }
        out
    }

    /// Pointwise bound on the quadratic-variation rate of the reconstruction
    /// martingale, per axis:
    /// `2 [ m / (r_n n^d + m)^2 + (m / (r_n n^d + m) - 1)^2 ]`
    /// where `m = <c0, gamma>` is the sharp window count.
    pub fn qv_rate_bound(&self, env: &Configuration) -> f64 {
        let mass = self.indicator_count(env);
        let denom = self.regularizer() + mass;
        let ratio = mass / denom;
        2.0 * (mass / (denom * denom) + (ratio - 1.0) * (ratio - 1.0))
    }
}
