//! One-dimensional quadrature with divergence detection on open-ended
//! integration limits.
//!
//! Improper integrals are probed by doubling (or halving, toward zero) the
//! integration limit shell by shell. The verdict rules are fixed:
//! * convergent once two consecutive doublings change the running value by
//!   less than `1e-6` relative,
//! * divergent once 8 consecutive doublings each grow the running value by
//!   more than 1% with shell contributions that are not decaying,
//! * inconclusive if the shell budget runs out first.

/// Outcome of probing an improper integral.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TailVerdict {
    Convergent(f64),
    Divergent,
    Inconclusive(f64),
}

impl TailVerdict {
    pub fn is_convergent(&self) -> bool {
        matches!(self, TailVerdict::Convergent(_))
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            TailVerdict::Convergent(v) | TailVerdict::Inconclusive(v) => Some(*v),
            TailVerdict::Divergent => None,
        }
    }
}

const REL_CONVERGED: f64 = 1e-6;
const REL_GROWING: f64 = 1e-2;
const CONVERGED_STREAK: usize = 2;
const DIVERGED_STREAK: usize = 8;
// A shell only counts toward the divergence streak if it is not decaying
// relative to the previous shell. Geometrically decaying shells can each grow
// the running value by more than 1% for many iterations while still summing
// to a finite limit; those must not be flagged.
const SHELL_DECAY: f64 = 0.9;

/// Streak bookkeeping shared by the upper- and lower-tail probes.
struct ShellTracker {
    total: f64,
    conv: usize,
    div: usize,
    prev_shell: Option<f64>,
}

enum ShellOutcome {
    Continue,
    Converged(f64),
    Diverged,
}

impl ShellTracker {
    fn new(initial: f64) -> Self {
        ShellTracker { total: initial, conv: 0, div: 0, prev_shell: None }
    }

    fn push(&mut self, shell: f64) -> ShellOutcome {
        let prev = self.total;
        self.total += shell;
        if !self.total.is_finite() {
            return ShellOutcome::Diverged;
        }
        let scale = self.total.abs().max(f64::MIN_POSITIVE);
        let rel = (self.total - prev).abs() / scale;
        let sustained = match self.prev_shell {
            Some(p) => shell >= SHELL_DECAY * p,
            None => true,
        };
        self.prev_shell = Some(shell);
        if rel < REL_CONVERGED {
            self.conv += 1;
            self.div = 0;
            if self.conv >= CONVERGED_STREAK {
                return ShellOutcome::Converged(self.total);
            }
        } else if self.total > prev * (1.0 + REL_GROWING) && self.total > 0.0 && sustained {
            self.div += 1;
            self.conv = 0;
            if self.div >= DIVERGED_STREAK {
                return ShellOutcome::Diverged;
            }
        } else {
            self.conv = 0;
            self.div = 0;
        }
        ShellOutcome::Continue
    }
}

/// Adaptive Simpson on a closed interval.
pub fn adaptive_simpson(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse(
        f: &mut impl FnMut(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        // The rounding floor stops refinement once the correction is pure
        // cancellation noise relative to the panel values; without it an
        // unattainable absolute tolerance recurses to full depth.
        let floor = 1e-12 * (left.abs() + right.abs());
        if !delta.is_finite() {
            left + right
        } else if depth == 0 || delta.abs() <= (15.0 * tol).max(floor) {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Probe `int_base^inf f` by doubling the upper limit.
/// `initial` is added to the running value before the relative-change rules
/// apply (use it for the closed part `int_0^base`).
pub fn probe_upper_tail(
    f: &mut impl FnMut(f64) -> f64,
    base: f64,
    initial: f64,
    max_doublings: usize,
) -> TailVerdict {
    let mut tracker = ShellTracker::new(initial);
    let mut lo = base;
    for _ in 0..max_doublings {
        let hi = lo * 2.0;
        let shell = adaptive_simpson(f, lo, hi, 1e-10 * tracker.total.abs().max(1.0));
        match tracker.push(shell) {
            ShellOutcome::Converged(v) => return TailVerdict::Convergent(v),
            ShellOutcome::Diverged => return TailVerdict::Divergent,
            ShellOutcome::Continue => {}
        }
        lo = hi;
    }
    TailVerdict::Inconclusive(tracker.total)
}

/// Probe `int_0^base f` by halving the lower limit toward zero.
pub fn probe_lower_tail(
    f: &mut impl FnMut(f64) -> f64,
    base: f64,
    max_halvings: usize,
) -> TailVerdict {
    let mut tracker = ShellTracker::new(0.0);
    let mut hi = base;
    for _ in 0..max_halvings {
        let lo = hi / 2.0;
        let shell = adaptive_simpson(f, lo, hi, 1e-10 * tracker.total.abs().max(1.0));
        match tracker.push(shell) {
            ShellOutcome::Converged(v) => return TailVerdict::Convergent(v),
            ShellOutcome::Diverged => return TailVerdict::Divergent,
            ShellOutcome::Continue => {}
        }
        hi = lo;
    }
    TailVerdict::Inconclusive(tracker.total)
}

/// Surface area of the unit sphere in `R^d`, i.e. `2 pi^(d/2) / Gamma(d/2)`.
pub fn unit_sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * core::f64::consts::PI,
        3 => 4.0 * core::f64::consts::PI,
        _ => panic!("dimension must be 1..=3"),
    }
}
