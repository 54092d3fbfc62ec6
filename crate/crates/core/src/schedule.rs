//! Averaging schedule for the windowed displacement reconstruction.
//!
//! The window at scale `n` needs a regularizing mass `r_n n^d` in its
//! denominator. The rate `q_n` balances the expected interaction flux
//! through the window boundary against the window volume:
//!
//! `q_n = n^{-1} (1 + int_0^n T(r) dr)`,
//! `T(r) = omega_d int_r^inf |phi'(s)| e^{-phi(s)} s^{d-1} ds`,
//!
//! where `T(r)` is the interaction tail mass outside the ball of radius `r`
//! (the ball inscribed in the window box, which bounds the flux through the
//! box complement from above). Then `r_n = sqrt(q_n)`. For the zero
//! potential `T = 0` and `q_n = 1/n` exactly; for compactly supported
//! potentials `T` vanishes beyond the cutoff, so `n q_n` saturates and
//! `r_n ~ n^{-1/2}`.

use crate::potential::PairPotential;
use crate::quad::{adaptive_simpson, unit_sphere_area};

/// Radial integrand `|phi'(s)| e^{-phi(s)} s^{d-1}`, with the convention
/// that an infinite potential value contributes zero weight.
fn flux_density(pot: &PairPotential, s: f64) -> f64 {
    let e = pot.profile(s);
    if !e.is_finite() {
        return 0.0;
    }
    let g = pot.profile_deriv(s);
    let mut sd = 1.0;
    for _ in 0..(pot.dimension - 1) {
        sd *= s;
    }
    g.abs() * libm::exp(-e) * sd
}

/// Interaction tail mass outside radius `r`:
/// `omega_d int_r^R |phi'| e^{-phi} s^{d-1} ds` with `R` the interaction
/// range (cutoff, or a fixed multiple of `sigma` for untruncated kinds).
pub fn tail_mass(pot: &PairPotential, r: f64) -> f64 {
    let range = interaction_range(pot);
    if r >= range {
        return 0.0;
    }
    let lo = r.max(0.0);
    let v = adaptive_simpson(&mut |s| flux_density(pot, s), lo, range, 1e-10);
    unit_sphere_area(pot.dimension) * v
}

fn interaction_range(pot: &PairPotential) -> f64 {
    match pot.cutoff_radius {
        Some(rc) => rc,
        // untruncated potentials in this crate decay at least polynomially;
        // 64 sigma bounds the quadrature support with negligible leftover
        None => 64.0 * pot.sigma,
    }
}

/// Regularization rate `q_n`.
pub fn q_n(pot: &PairPotential, n: f64) -> f64 {
    assert!(n > 0.0);
    let flux = adaptive_simpson(&mut |r| tail_mass(pot, r), 0.0, n, 1e-8);
    (1.0 + flux) / n
}

/// Denominator weight `r_n = sqrt(q_n)`.
pub fn r_n(pot: &PairPotential, n: f64) -> f64 {
    libm::sqrt(q_n(pot, n))
}
