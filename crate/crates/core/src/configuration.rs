//! Finite particle configurations on a torus with a cell-list index.
//!
//! Positions are stored wrapped. The cell index is rebuilt lazily after
//! structural changes; queries through it must return exactly the same
//! neighbor set as a naive scan (tested against that oracle). Coincident
//! points are legal: configurations are multisets.

use alloc::vec::Vec;

use crate::potential::PairPotential;
use crate::torus::{norm2, TorusBox};

pub const MAX_DIM: usize = 3;

/// Fixed-capacity point; only the first `dim` components are meaningful.
pub type Point = [f64; MAX_DIM];

/// Force-cap bookkeeping shared by sampling and dynamics.
#[derive(Clone, Copy, Debug)]
pub struct ForceCap {
    /// Per-pair gradients longer than this are rescaled to this length.
    pub f_max: f64,
    /// Number of rescaled gradients.
    pub events: u64,
    /// Total pair-gradient evaluations (denominator for the cap-rate check).
    pub evals: u64,
}

impl ForceCap {
    pub fn new(f_max: f64) -> Self {
        ForceCap { f_max, events: 0, evals: 0 }
    }

    /// Fraction of evaluations that hit the cap.
    pub fn rate(&self) -> f64 {
        if self.evals == 0 {
            0.0
        } else {
            self.events as f64 / self.evals as f64
        }
    }
}

impl Default for ForceCap {
    fn default() -> Self {
        ForceCap::new(1e6)
    }
}

#[derive(Clone, Debug)]
struct CellGrid {
    cutoff: f64,
    /// Cells per axis (>= 3 on every axis, otherwise the grid is not built).
    dims: [usize; MAX_DIM],
    /// Particle indices per flat cell, in ascending index order.
    lists: Vec<Vec<usize>>,
}

#[derive(Clone, Debug)]
pub struct Configuration {
    pub bbox: TorusBox,
    positions: Vec<Point>,
    grid: Option<CellGrid>,
    dirty: bool,
}

impl Configuration {
    pub fn new(bbox: TorusBox) -> Self {
        Configuration { bbox, positions: Vec::new(), grid: None, dirty: true }
    }

    pub fn from_positions(bbox: TorusBox, pts: &[Point]) -> Self {
        let mut c = Configuration::new(bbox);
        for p in pts {
            c.insert(*p);
        }
        c
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    #[inline]
    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    #[inline]
    pub fn position(&self, i: usize) -> &Point {
        &self.positions[i]
    }

    /// Iterate over particle positions.
    pub fn iter(&self) -> core::slice::Iter<'_, Point> {
        self.positions.iter()
    }

    /// Insert a particle (wrapped); returns its index.
    pub fn insert(&mut self, p: Point) -> usize {
        self.positions.push(self.bbox.wrap(&p));
        self.dirty = true;
        self.positions.len() - 1
    }

    /// Remove particle `i`; the last particle takes its index.
    pub fn remove(&mut self, i: usize) -> Point {
        let p = self.positions.swap_remove(i);
        self.dirty = true;
        p
    }

    /// Move particle `i` to a new (wrapped) position.
    pub fn displace(&mut self, i: usize, p: Point) {
        self.positions[i] = self.bbox.wrap(&p);
        self.dirty = true;
    }

    /// Sum of `f` over particle positions.
    pub fn linear_statistic(&self, mut f: impl FnMut(&Point) -> f64) -> f64 {
        let mut s = 0.0;
        for p in &self.positions {
            s += f(p);
        }
        s
    }

    fn cell_of(&self, grid: &CellGrid, p: &Point) -> usize {
        let l = self.bbox.side;
        let mut flat = 0;
        for k in 0..self.bbox.dim {
            let m = grid.dims[k];
            let t = (p[k] + l / 2.0) / l * m as f64;
            let mut idx = libm::floor(t) as isize;
            // positions sit in [-L/2, L/2) so idx is in range up to rounding
            if idx < 0 {
                idx = 0;
            }
            if idx as usize >= m {
                idx = m as isize - 1;
            }
            flat = flat * m + idx as usize;
        }
        flat
    }

    fn rebuild_grid(&mut self, cutoff: f64) {
        let l = self.bbox.side;
        let d = self.bbox.dim;
        let m = libm::floor(l / cutoff) as usize;
        if m < 3 {
            self.grid = None;
            self.dirty = false;
            return;
        }
        let mut dims = [1usize; MAX_DIM];
        let mut ncells = 1;
        for k in 0..d {
            dims[k] = m;
            ncells *= m;
        }
        let mut grid = CellGrid { cutoff, dims, lists: alloc::vec![Vec::new(); ncells] };
        for i in 0..self.positions.len() {
            let c = self.cell_of(&grid, &self.positions[i]);
            grid.lists[c].push(i);
        }
        self.grid = Some(grid);
        self.dirty = false;
    }

    fn ensure_grid(&mut self, cutoff: f64) {
        let stale = match &self.grid {
            Some(g) => g.cutoff != cutoff || self.dirty,
            None => true,
        };
        if stale || self.dirty {
            self.rebuild_grid(cutoff);
        }
    }

    /// Visit every particle within `cutoff` (strictly) of `x`, except
    /// `exclude`. The callback receives the particle index, the minimum-image
    /// displacement `x - x_j`, and its squared norm. Requires the grid for
    /// `cutoff` to be current (see [`Self::prepared`]) or falls back to a
    /// naive scan when the box is too small for cells.
    fn visit_within(
        &self,
        x: &Point,
        exclude: Option<usize>,
        cutoff: f64,
        mut visit: impl FnMut(usize, &Point, f64),
    ) {
        let rc2 = cutoff * cutoff;
        // A dirty grid falls through to the naive scan below, so callers may
        // query between mutations without re-preparing.
        match &self.grid {
            Some(grid) if grid.cutoff == cutoff && !self.dirty => {
                let d = self.bbox.dim;
                // 3^d neighborhood of the cell containing x
                let home = {
                    let mut idx = [0isize; MAX_DIM];
                    let l = self.bbox.side;
                    for k in 0..d {
                        let m = grid.dims[k];
                        let t = (x[k] + l / 2.0) / l * m as f64;
                        let mut i = libm::floor(t) as isize;
                        if i < 0 {
                            i = 0;
                        }
                        if i as usize >= m {
                            i = m as isize - 1;
                        }
                        idx[k] = i;
                    }
                    idx
                };
                let reps = 3usize.pow(d as u32);
                for rep in 0..reps {
                    let mut r = rep;
                    let mut flat = 0;
                    for k in 0..d {
                        let off = (r % 3) as isize - 1;
                        r /= 3;
                        let m = grid.dims[k] as isize;
                        let c = (home[k] + off).rem_euclid(m);
                        flat = flat * grid.dims[k] + c as usize;
                    }
                    for &j in &grid.lists[flat] {
                        if Some(j) == exclude {
                            continue;
                        }
                        let disp = self.bbox.min_image(x, &self.positions[j]);
                        let r2 = norm2(&disp, d);
                        if r2 < rc2 {
                            visit(j, &disp, r2);
                        }
                    }
                }
            }
            _ => {
                for j in 0..self.positions.len() {
                    if Some(j) == exclude {
                        continue;
                    }
                    let disp = self.bbox.min_image(x, &self.positions[j]);
                    let r2 = norm2(&disp, self.bbox.dim);
                    if r2 < rc2 {
                        visit(j, &disp, r2);
                    }
                }
            }
        }
    }

    /// Refresh the cell index for this potential's range and return `self`.
    pub fn prepare(&mut self, pot: &PairPotential) {
        if let Some(rc) = pot.cutoff_radius {
            self.ensure_grid(rc);
        }
    }

    fn range(&self, pot: &PairPotential) -> f64 {
        // untruncated potentials interact up to the half-box diagonal
        pot.cutoff_radius
            .unwrap_or(self.bbox.side)
            .min(self.bbox.side)
    }

    /// Interaction energy of a free point `x` with the configuration:
    /// `W(x, gamma) = sum_j phi(x - x_j)`, minimum image, optionally
    /// excluding one particle index.
    pub fn local_energy(&self, x: &Point, pot: &PairPotential, exclude: Option<usize>) -> f64 {
        let mut w = 0.0;
        self.visit_within(x, exclude, self.range(pot), |_, disp, _| {
            w += pot.evaluate(disp);
        });
        w
    }

    /// Total pair interaction energy `sum_{i<j} phi(x_i - x_j)`.
    pub fn interaction_energy(&self, pot: &PairPotential) -> f64 {
        let mut u = 0.0;
        for i in 0..self.positions.len() {
            let mut ui = 0.0;
            self.visit_within(&self.positions[i].clone(), Some(i), self.range(pot), |j, disp, _| {
                if j > i {
                    ui += pot.evaluate(disp);
                }
            });
            u += ui;
        }
        u
    }

    /// External-field energy `sum_i phi(x_i)` for the field created by a
    /// particle pinned at the origin.
    pub fn field_energy(&self, pot: &PairPotential) -> f64 {
        let origin = [0.0; MAX_DIM];
        self.local_energy(&origin, pot, None)
    }

    /// Force on particle `i`: `-sum_{j != i} grad phi(x_i - x_j)`, with each
    /// pair gradient capped in norm at `cap.f_max`.
    pub fn pair_force(&self, i: usize, pot: &PairPotential, cap: &mut ForceCap) -> Point {
        self.force_at(&self.positions[i].clone(), Some(i), pot, cap)
    }

    /// Same as [`Self::pair_force`] for a free point.
    pub fn force_at(
        &self,
        x: &Point,
        exclude: Option<usize>,
        pot: &PairPotential,
        cap: &mut ForceCap,
    ) -> Point {
        let d = self.bbox.dim;
        let mut f = [0.0; MAX_DIM];
        self.visit_within(x, exclude, self.range(pot), |_, disp, _| {
            let g = capped_gradient(pot, disp, cap);
            for k in 0..d {
                f[k] -= g[k];
            }
        });
        f
    }

    /// Translate the frame so `origin` becomes the origin; positions are the
    /// minimum images of `x_j - origin`.
    pub fn recenter(&self, origin: &Point) -> Configuration {
        let mut pts = Vec::with_capacity(self.positions.len());
        for p in &self.positions {
            pts.push(self.bbox.min_image(p, origin));
        }
        Configuration::from_positions(self.bbox, &pts)
    }
}

/// Pair gradient with norm capped at `cap.f_max`; counts evaluations.
/// Displacements on the singular core have no direction: they yield a zero
/// gradient but still count as cap events.
#[inline]
pub fn capped_gradient(pot: &PairPotential, disp: &Point, cap: &mut ForceCap) -> Point {
    let d = pot.dimension;
    cap.evals += 1;
    let guard = crate::potential::CORE_GUARD * pot.sigma;
    if norm2(disp, d) < guard * guard {
        cap.events += 1;
        return [0.0; MAX_DIM];
    }
    let mut g = pot.gradient(disp);
    let n2 = norm2(&g, d);
    if !(n2 <= cap.f_max * cap.f_max) {
        cap.events += 1;
        if n2.is_finite() && n2 > 0.0 {
            let scale = cap.f_max / libm::sqrt(n2);
            for k in 0..d {
                g[k] *= scale;
            }
        } else {
            // non-finite gradient: no usable direction, drop it
            for k in 0..d {
                g[k] = 0.0;
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::PairPotential;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_config(n: usize, bbox: TorusBox, seed: u64) -> Configuration {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        for _ in 0..n {
            let mut p = [0.0; MAX_DIM];
            for k in 0..bbox.dim {
                p[k] = rng.gen_range(-bbox.side / 2.0..bbox.side / 2.0);
            }
            pts.push(p);
        }
        Configuration::from_positions(bbox, &pts)
    }

    fn naive_energy(c: &Configuration, pot: &PairPotential) -> f64 {
        let rc = pot.cutoff_radius.unwrap_or(f64::INFINITY);
        let mut u = 0.0;
        for i in 0..c.len() {
            for j in (i + 1)..c.len() {
                let disp = c.bbox.min_image(c.position(i), c.position(j));
                if crate::torus::norm(&disp, c.bbox.dim) < rc {
                    u += pot.evaluate(&disp);
                }
            }
        }
        u
    }

    #[test]
    fn cell_list_energy_matches_naive_oracle() {
        let bbox = TorusBox::new(12.0, 2);
        let pot = PairPotential::lennard_jones(1.0, 1.0, 2).truncate_and_shift(2.5);
        for seed in 0..20 {
            let mut c = random_config(40, bbox, seed);
            c.prepare(&pot);
            let fast = c.interaction_energy(&pot);
            let slow = naive_energy(&c, &pot);
            let tol = 1e-12 * slow.abs().max(1.0);
            assert!((fast - slow).abs() < tol, "seed {seed}: {fast} vs {slow}");
        }
    }

    #[test]
    fn cell_list_forces_match_naive_oracle() {
        let bbox = TorusBox::new(12.0, 3);
        let pot = PairPotential::lennard_jones(1.0, 1.0, 3).truncate_and_shift(2.5);
        let mut c = random_config(60, bbox, 7);
        c.prepare(&pot);
        let mut cap = ForceCap::default();
        for i in 0..c.len() {
            let f = c.pair_force(i, &pot, &mut cap);
            // naive force
            let mut fr = [0.0; MAX_DIM];
            for j in 0..c.len() {
                if j == i {
                    continue;
                }
                let disp = c.bbox.min_image(c.position(i), c.position(j));
                if crate::torus::norm(&disp, 3) < 2.5 {
                    // same per-pair treatment as the cell-list path, so the
                    // comparison is only about neighbor enumeration
                    let mut oracle_cap = ForceCap::default();
                    let g = capped_gradient(&pot, &disp, &mut oracle_cap);
                    for k in 0..3 {
                        fr[k] -= g[k];
                    }
                }
            }
            for k in 0..3 {
                let tol = 1e-12 * fr[k].abs().max(1.0);
                assert!((f[k] - fr[k]).abs() < tol);
            }
        }
    }

    #[test]
    fn grid_stays_correct_under_mutation() {
        let bbox = TorusBox::new(10.0, 2);
        let pot = PairPotential::smooth_bump(1.0, 1.0, 2).truncate_and_shift(2.0);
        let mut c = random_config(30, bbox, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for step in 0..200 {
            match step % 3 {
                0 => {
                    c.insert([rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), 0.0]);
                }
                1 => {
                    if c.len() > 1 {
                        let i = rng.gen_range(0..c.len());
                        c.remove(i);
                    }
                }
                _ => {
                    let i = rng.gen_range(0..c.len());
                    let p = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), 0.0];
                    c.displace(i, p);
                }
            }
            c.prepare(&pot);
            let fast = c.interaction_energy(&pot);
            let slow = naive_energy(&c, &pot);
            assert!((fast - slow).abs() < 1e-12 * slow.abs().max(1.0));
        }
    }

    #[test]
    fn small_box_falls_back_to_naive() {
        let bbox = TorusBox::new(4.0, 2);
        // cutoff 2.0 leaves only 2 cells per axis -> naive path
        let pot = PairPotential::lennard_jones(1.0, 1.0, 2).truncate_and_shift(2.0);
        let mut c = random_config(10, bbox, 5);
        c.prepare(&pot);
        let fast = c.interaction_energy(&pot);
        let slow = naive_energy(&c, &pot);
        assert!((fast - slow).abs() < 1e-12 * slow.abs().max(1.0));
    }

    #[test]
    fn coincident_points_are_legal() {
        let bbox = TorusBox::new(10.0, 2);
        let pot = PairPotential::lennard_jones(1.0, 1.0, 2).truncate_and_shift(2.5);
        let mut c = Configuration::from_positions(bbox, &[[1.0, 1.0, 0.0], [1.0, 1.0, 0.0]]);
        c.prepare(&pot);
        assert_eq!(c.len(), 2);
        assert_eq!(c.interaction_energy(&pot), f64::INFINITY);
        // capped force has no preferred direction on the core
        let mut cap = ForceCap::default();
        let f = c.pair_force(0, &pot, &mut cap);
        assert_eq!(f, [0.0, 0.0, 0.0]);
        assert_eq!(cap.events, 1);
    }

    #[test]
    fn force_cap_rescales_and_counts() {
        let bbox = TorusBox::new(10.0, 2);
        let pot = PairPotential::lennard_jones(1.0, 1.0, 2).truncate_and_shift(2.5);
        // distance 0.5 gives |grad| ~ 3.9e5 > 100
        let mut c =
            Configuration::from_positions(bbox, &[[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]]);
        c.prepare(&pot);
        let mut cap = ForceCap::new(100.0);
        let f = c.pair_force(0, &pot, &mut cap);
        assert_eq!(cap.events, 1);
        let n = crate::torus::norm(&f, 2);
        assert!((n - 100.0).abs() < 1e-9, "capped norm {n}");
    }

    #[test]
    fn recenter_moves_origin() {
        let bbox = TorusBox::new(10.0, 2);
        let c = Configuration::from_positions(bbox, &[[4.0, 0.0, 0.0], [-4.5, 1.0, 0.0]]);
        let r = c.recenter(&[4.0, 0.0, 0.0]);
        assert_eq!(r.position(0), &[0.0, 0.0, 0.0]);
        // -4.5 - 4.0 = -8.5 wraps to 1.5
        assert!((r.position(1)[0] - 1.5).abs() < 1e-12);
        assert!((r.position(1)[1] - 1.0).abs() < 1e-12);
    }

    proptest! {
        // recentering twice composes like a group action on the torus
        #[test]
        fn recenter_composes(
            x in -5.0f64..5.0, y in -5.0f64..5.0,
            ax in -5.0f64..5.0, ay in -5.0f64..5.0,
            bx in -5.0f64..5.0, by in -5.0f64..5.0,
        ) {
            let bbox = TorusBox::new(10.0, 2);
            let c = Configuration::from_positions(bbox, &[[x, y, 0.0]]);
            let once = c.recenter(&[ax, ay, 0.0]).recenter(&[bx, by, 0.0]);
            let direct = c.recenter(&bbox.wrap(&[ax + bx, ay + by, 0.0]));
            for k in 0..2 {
                let diff = bbox.wrap_coord(once.position(0)[k] - direct.position(0)[k]);
                prop_assert!(diff.abs() < 1e-9);
            }
        }
    }
}
