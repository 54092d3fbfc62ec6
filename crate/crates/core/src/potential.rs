//! Radial pair potentials, optionally truncated and shifted at a cutoff.
//!
//! All concrete potentials here are radially symmetric, so evaluation and
//! gradients go through the scalar profile `phi(r)` and its derivative.
//! Values are extended reals: a Lennard-Jones core evaluates to `+inf`.

use crate::torus::norm;
use crate::Point;

/// Relative core guard: displacements shorter than `GUARD * sigma` are
/// treated as sitting on the singularity.
pub const CORE_GUARD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PotentialKind {
    /// Identically zero (free particles).
    Zero,
    /// 4 eps ((s/r)^12 - (s/r)^6), singular at the origin.
    LennardJones,
    /// Bounded compactly supported bump eps * exp(1 - 1/(1 - (r/s)^2)) on r < s.
    SmoothBump,
    /// Purely attractive tail -eps (1 + r)^(-d); its negative part decays too
    /// slowly to be integrable against r^(d-1), so long-range audits fail.
    AttractiveTail,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairPotential {
    pub kind: PotentialKind,
    pub epsilon: f64,
    pub sigma: f64,
    /// Truncation radius; `None` means the raw infinite-range potential.
    pub cutoff_radius: Option<f64>,
    /// Value subtracted inside the cutoff so the truncated potential is
    /// continuous at `cutoff_radius`. Zero when untruncated.
    pub shift_constant: f64,
    /// Spatial dimension; enters `AttractiveTail` and the audits.
    pub dimension: usize,
}

impl PairPotential {
    pub fn zero(dim: usize) -> Self {
        PairPotential {
            kind: PotentialKind::Zero,
            epsilon: 0.0,
            sigma: 1.0,
            cutoff_radius: None,
            shift_constant: 0.0,
            dimension: dim,
        }
    }

    pub fn lennard_jones(epsilon: f64, sigma: f64, dim: usize) -> Self {
        assert!(epsilon > 0.0 && sigma > 0.0);
        PairPotential {
            kind: PotentialKind::LennardJones,
            epsilon,
            sigma,
            cutoff_radius: None,
            shift_constant: 0.0,
            dimension: dim,
        }
    }

    pub fn smooth_bump(epsilon: f64, sigma: f64, dim: usize) -> Self {
        assert!(epsilon > 0.0 && sigma > 0.0);
        PairPotential {
            kind: PotentialKind::SmoothBump,
            epsilon,
            sigma,
            cutoff_radius: None,
            shift_constant: 0.0,
            dimension: dim,
        }
    }

    pub fn attractive_tail(epsilon: f64, dim: usize) -> Self {
        assert!(epsilon > 0.0);
        PairPotential {
            kind: PotentialKind::AttractiveTail,
            epsilon,
            sigma: 1.0,
            cutoff_radius: None,
            shift_constant: 0.0,
            dimension: dim,
        }
    }

    /// Truncate at `rc` and shift so the potential is continuous there.
    /// The shift equals the raw value at `rc`; the caller is responsible for
    /// `rc <= L/2` when binding the potential to a box.
    pub fn truncate_and_shift(&self, rc: f64) -> Self {
        assert!(rc > 0.0 && rc.is_finite(), "cutoff must be positive");
        let mut p = *self;
        p.shift_constant = self.raw_profile(rc);
        p.cutoff_radius = Some(rc);
        p
    }

    /// Raw (untruncated, unshifted) radial profile.
    pub fn raw_profile(&self, r: f64) -> f64 {
        match self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::LennardJones => {
                if r < CORE_GUARD * self.sigma {
                    return f64::INFINITY;
                }
                let sr = self.sigma / r;
                let sr2 = sr * sr;
                let sr6 = sr2 * sr2 * sr2;
                4.0 * self.epsilon * (sr6 * sr6 - sr6)
            }
            PotentialKind::SmoothBump => {
                let t = (r / self.sigma) * (r / self.sigma);
                if t >= 1.0 {
                    0.0
                } else {
                    self.epsilon * libm::exp(1.0 - 1.0 / (1.0 - t))
                }
            }
            PotentialKind::AttractiveTail => {
                let base = 1.0 + r;
                let mut p = 1.0;
                for _ in 0..self.dimension {
                    p *= base;
                }
                -self.epsilon / p
            }
        }
    }

    /// Derivative of the raw radial profile.
    pub fn raw_profile_deriv(&self, r: f64) -> f64 {
        match self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::LennardJones => {
                if r < CORE_GUARD * self.sigma {
                    return f64::NEG_INFINITY;
                }
                let sr = self.sigma / r;
                let sr2 = sr * sr;
                let sr6 = sr2 * sr2 * sr2;
                24.0 * self.epsilon / r * (sr6 - 2.0 * sr6 * sr6)
            }
            PotentialKind::SmoothBump => {
                let t = (r / self.sigma) * (r / self.sigma);
                if t >= 1.0 {
                    0.0
                } else {
                    let v = self.epsilon * libm::exp(1.0 - 1.0 / (1.0 - t));
                    let dv_dt = -v / ((1.0 - t) * (1.0 - t));
                    dv_dt * 2.0 * r / (self.sigma * self.sigma)
                }
            }
            PotentialKind::AttractiveTail => {
                let base = 1.0 + r;
                let d = self.dimension as f64;
                let mut p = base;
                for _ in 0..self.dimension {
                    p *= base;
                }
                self.epsilon * d / p
            }
        }
    }

    /// Radial profile after truncation and shift.
    #[inline]
    pub fn profile(&self, r: f64) -> f64 {
        match self.cutoff_radius {
            Some(rc) if r >= rc => 0.0,
            _ => self.raw_profile(r) - self.shift_constant,
        }
    }

    /// Derivative of the truncated profile (zero beyond the cutoff).
    #[inline]
    pub fn profile_deriv(&self, r: f64) -> f64 {
        match self.cutoff_radius {
            Some(rc) if r >= rc => 0.0,
            _ => self.raw_profile_deriv(r),
        }
    }

    /// Potential value at a displacement vector.
    pub fn evaluate(&self, x: &Point) -> f64 {
        self.profile(norm(x, self.dimension))
    }

    /// Gradient at a displacement vector; zero (by convention) exactly on the
    /// singular core where no direction exists. Finite but huge gradients near
    /// the core are the responsibility of the force cap downstream.
    pub fn gradient(&self, x: &Point) -> Point {
        let r = norm(x, self.dimension);
        let mut g = [0.0; crate::MAX_DIM];
        if r < CORE_GUARD * self.sigma {
            return g;
        }
        let dp = self.profile_deriv(r);
        if dp == 0.0 {
            return g;
        }
        for k in 0..self.dimension {
            g[k] = dp * x[k] / r;
        }
        g
    }

    /// True if the potential never takes the value +inf.
    pub fn is_bounded(&self) -> bool {
        !matches!(self.kind, PotentialKind::LennardJones)
    }
}
