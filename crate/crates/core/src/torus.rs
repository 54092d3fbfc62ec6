//! Periodic box geometry.
//!
//! Coordinates live in `[-L/2, L/2)` per axis. Displacements between points
//! always go through the minimum-image convention, so distances never exceed
//! `L/2` per axis.

use crate::configuration::{Point, MAX_DIM};

/// Periodic box `[-L/2, L/2)^d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusBox {
    /// Side length `L`.
    pub side: f64,
    /// Spatial dimension `d` (1, 2 or 3).
    pub dim: usize,
}

impl TorusBox {
    pub fn new(side: f64, dim: usize) -> Self {
        assert!(side > 0.0 && side.is_finite(), "box side must be positive");
        assert!(dim >= 1 && dim <= MAX_DIM, "dimension must be 1..=3");
        TorusBox { side, dim }
    }

    /// Volume `L^d`.
    pub fn volume(&self) -> f64 {
        let mut v = 1.0;
        for _ in 0..self.dim {
            v *= self.side;
        }
        v
    }

    /// Wrap a single coordinate into `[-L/2, L/2)`.
    #[inline]
    pub fn wrap_coord(&self, x: f64) -> f64 {
        let l = self.side;
        // floor keeps the half-open convention: -L/2 maps to itself, +L/2 to -L/2.
        x - l * libm::floor(x / l + 0.5)
    }

    /// Wrap all coordinates of a point.
    #[inline]
    pub fn wrap(&self, p: &Point) -> Point {
        let mut out = [0.0; MAX_DIM];
        for k in 0..self.dim {
            out[k] = self.wrap_coord(p[k]);
        }
        out
    }

    /// Minimum-image displacement `a - b`, component-wise in `[-L/2, L/2)`.
    #[inline]
    pub fn min_image(&self, a: &Point, b: &Point) -> Point {
        let mut out = [0.0; MAX_DIM];
        for k in 0..self.dim {
            out[k] = self.wrap_coord(a[k] - b[k]);
        }
        out
    }

    /// Squared Euclidean norm of the minimum image of `a - b`.
    #[inline]
    pub fn min_image_dist2(&self, a: &Point, b: &Point) -> f64 {
        let d = self.min_image(a, b);
        norm2(&d, self.dim)
    }

    /// True if every coordinate already lies in `[-L/2, L/2)`.
    pub fn contains(&self, p: &Point) -> bool {
        let h = self.side / 2.0;
        (0..self.dim).all(|k| p[k] >= -h && p[k] < h)
    }
}

/// Squared norm of the first `dim` components.
#[inline]
pub fn norm2(p: &Point, dim: usize) -> f64 {
    let mut s = 0.0;
    for k in 0..dim {
        s += p[k] * p[k];
    }
    s
}

/// Euclidean norm of the first `dim` components.
#[inline]
pub fn norm(p: &Point, dim: usize) -> f64 {
    libm::sqrt(norm2(p, dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_is_identity_inside() {
        let b = TorusBox::new(10.0, 2);
        let p = [1.25, -4.99, 0.0];
        assert_eq!(b.wrap(&p), p);
    }

    #[test]
    fn wrap_half_open_boundary() {
        let b = TorusBox::new(10.0, 1);
        assert_eq!(b.wrap_coord(5.0), -5.0);
        assert_eq!(b.wrap_coord(-5.0), -5.0);
    }

    #[test]
    fn min_image_through_boundary() {
        let b = TorusBox::new(10.0, 1);
        // points near opposite edges are close through the boundary:
        // 4.8 sits 0.4 below -4.8 when passing through +-5
        let d = b.min_image(&[4.8, 0.0, 0.0], &[-4.8, 0.0, 0.0]);
        assert!((d[0] + 0.4).abs() < 1e-12, "got {}", d[0]);
    }

    proptest! {
        #[test]
        fn wrap_lands_in_box(x in -1e3f64..1e3, l in 0.5f64..50.0) {
            let b = TorusBox::new(l, 1);
            let w = b.wrap_coord(x);
            prop_assert!(w >= -l / 2.0 && w < l / 2.0);
        }

        #[test]
        fn min_image_antisymmetric_in_class(
            ax in -5.0f64..5.0, ay in -5.0f64..5.0,
            bx in -5.0f64..5.0, by in -5.0f64..5.0,
        ) {
            let b = TorusBox::new(10.0, 2);
            let d1 = b.min_image(&[ax, ay, 0.0], &[bx, by, 0.0]);
            let d2 = b.min_image(&[bx, by, 0.0], &[ax, ay, 0.0]);
            // d1 + d2 is 0 modulo L per axis
            for k in 0..2 {
                let s = b.wrap_coord(d1[k] + d2[k]);
                prop_assert!(s.abs() < 1e-9 || (s.abs() - 10.0).abs() < 1e-9);
            }
        }

        #[test]
        fn min_image_shift_invariant(
            ax in -5.0f64..5.0, bx in -5.0f64..5.0, shift in -30.0f64..30.0,
        ) {
            let b = TorusBox::new(10.0, 1);
            let d1 = b.min_image(&[ax, 0.0, 0.0], &[bx, 0.0, 0.0]);
            let d2 = b.min_image(&[ax + shift, 0.0, 0.0], &[bx + shift, 0.0, 0.0]);
            prop_assert!((d1[0] - d2[0]).abs() < 1e-9
                || ((d1[0] - d2[0]).abs() - 10.0).abs() < 1e-9);
        }
    }
}
