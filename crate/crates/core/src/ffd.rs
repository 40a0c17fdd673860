//! 2D cubic B-spline free-form deformation.
//!
//! A `K x L` lattice covers a `W x H` image with spacings `W/(K-1)` and
//! `H/(L-1)`. Evaluation needs one extra ring of nodes, so displacements are
//! stored for node indices `-1..=K` by `-1..=L`; node `(i, j)` sits at
//! `(i * dx, j * dy)` in pixel coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub w: usize,
    pub h: usize,
    pub k: usize,
    pub l: usize,
}

impl LatticeSpec {
    pub fn new(w: usize, h: usize, k: usize, l: usize) -> Result<Self> {
        let spec = LatticeSpec { w, h, k, l };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.w == 0 || self.h == 0 {
            return Err(Error::param("spec", format!("image size {}x{} must be positive", self.w, self.h)));
        }
        if self.k < 2 || self.l < 2 {
            return Err(Error::param("spec", format!("lattice {}x{} needs k, l >= 2", self.k, self.l)));
        }
        Ok(())
    }

    pub fn spacing(&self) -> (f64, f64) {
        (
            self.w as f64 / (self.k - 1) as f64,
            self.h as f64 / (self.l - 1) as f64,
        )
    }

    /// Nodes per row including the border ring.
    pub fn cols(&self) -> usize {
        self.k + 2
    }

    pub fn rows(&self) -> usize {
        self.l + 2
    }

    pub fn node_count(&self) -> usize {
        self.cols() * self.rows()
    }

    /// Storage index of node `(i, j)`, `i` in `-1..=k`, `j` in `-1..=l`.
    pub fn node_index(&self, i: isize, j: isize) -> usize {
        (j + 1) as usize * self.cols() + (i + 1) as usize
    }

    pub fn node_position(&self, i: isize, j: isize) -> Vec2 {
        let (dx, dy) = self.spacing();
        [i as f64 * dx, j as f64 * dy]
    }
}

/// Node displacements, row-major with index origin `(-1, -1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlLattice {
    spec: LatticeSpec,
    displacements: Vec<Vec2>,
}

impl ControlLattice {
    pub fn zeros(spec: LatticeSpec) -> Self {
        ControlLattice {
            spec,
            displacements: vec![[0.0; 2]; spec.node_count()],
        }
    }

    pub fn constant(spec: LatticeSpec, c: Vec2) -> Self {
        ControlLattice {
            spec,
            displacements: vec![c; spec.node_count()],
        }
    }

    pub fn from_displacements(spec: LatticeSpec, displacements: Vec<Vec2>) -> Result<Self> {
        spec.validate()?;
        if displacements.len() != spec.node_count() {
            return Err(Error::Lattice(format!(
                "expected {} displacements for a {}x{} lattice, got {}",
                spec.node_count(),
                spec.k,
                spec.l,
                displacements.len()
            )));
        }
        Ok(ControlLattice {
            spec,
            displacements,
        })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn displacements(&self) -> &[Vec2] {
        &self.displacements
    }

    pub fn displacements_mut(&mut self) -> &mut [Vec2] {
        &mut self.displacements
    }

    pub fn node(&self, i: isize, j: isize) -> Vec2 {
        self.displacements[self.spec.node_index(i, j)]
    }

    pub fn set_node(&mut self, i: isize, j: isize, d: Vec2) {
        let idx = self.spec.node_index(i, j);
        self.displacements[idx] = d;
    }

    /// Node-wise sum; both lattices must share a spec.
    pub fn add(&self, other: &[Vec2]) -> Result<ControlLattice> {
        if other.len() != self.displacements.len() {
            return Err(Error::Dimension(format!(
                "cannot add {} vectors to a lattice of {} nodes",
                other.len(),
                self.displacements.len()
            )));
        }
        let displacements = self
            .displacements
            .iter()
            .zip(other)
            .map(|(a, b)| [a[0] + b[0], a[1] + b[1]])
            .collect();
        Ok(ControlLattice {
            spec: self.spec,
            displacements,
        })
    }

    pub fn max_norm(&self) -> f64 {
        self.displacements
            .iter()
            .map(|d| d[0].hypot(d[1]))
            .fold(0.0, f64::max)
    }

    /// Displacement at `p` with the point clamped into `[0, W] x [0, H]`.
    /// The last cell is evaluated up to `u = 1` so the right and bottom edges
    /// are reached continuously.
    pub fn displacement_clamped(&self, p: Vec2) -> Vec2 {
        let (cx, wx) = axis_weights(p[0].clamp(0.0, self.spec.w as f64), self.spec.spacing().0, self.spec.k);
        let (cy, wy) = axis_weights(p[1].clamp(0.0, self.spec.h as f64), self.spec.spacing().1, self.spec.l);
        self.blend(cx, &wx, cy, &wy)
    }

    fn blend(&self, cx: usize, wx: &[f64; 4], cy: usize, wy: &[f64; 4]) -> Vec2 {
        // cx, cy are storage offsets of the top-left node of the 4x4 support.
        let cols = self.spec.cols();
        let mut acc = [0.0; 2];
        for (m, &bm) in wy.iter().enumerate() {
            let row = &self.displacements[(cy + m) * cols + cx..(cy + m) * cols + cx + 4];
            for (d, &bl) in row.iter().zip(wx) {
                let w = bl * bm;
                acc[0] += w * d[0];
                acc[1] += w * d[1];
            }
        }
        acc
    }
}

/// Uniform cubic B-spline basis function `index` at `t`.
pub fn basis(index: usize, t: f64) -> Result<f64> {
    match index {
        0..=3 => Ok(basis_weights(t)[index]),
        _ => Err(Error::BasisIndex(index)),
    }
}

/// All four basis weights at `t`.
#[inline]
pub fn basis_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    let s = 1.0 - t;
    [
        s * s * s / 6.0,
        (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
        (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
        t3 / 6.0,
    ]
}

/// Cell offset (storage index of node `floor(x/spacing) - 1`) and basis
/// weights for coordinate `x` along an axis with `n` lattice nodes.
#[inline]
fn axis_weights(x: f64, spacing: f64, n: usize) -> (usize, [f64; 4]) {
    let s = x / spacing;
    let cell = s.floor().clamp(0.0, (n - 2) as f64);
    // Storage index of node `cell - 1` is `cell`.
    (cell as usize, basis_weights(s - cell))
}

/// Maps a source point through the deformation: `p + sum B_l(u) B_m(v) d`.
pub fn map_point(p: Vec2, lat: &ControlLattice) -> Result<Vec2> {
    let spec = lat.spec();
    let (x, y) = (p[0], p[1]);
    if !(x >= 0.0 && x < spec.w as f64 && y >= 0.0 && y < spec.h as f64) {
        return Err(Error::OutOfDomain { x, y, w: spec.w, h: spec.h });
    }
    let (dx, dy) = spec.spacing();
    let (cx, wx) = axis_weights(x, dx, spec.k);
    let (cy, wy) = axis_weights(y, dy, spec.l);
    let d = lat.blend(cx, &wx, cy, &wy);
    Ok([x + d[0], y + d[1]])
}

/// Precomputed per-column and per-row basis weights for evaluating a
/// lattice's displacement on every integer pixel of a `w x h` grid.
///
/// The tensor product is evaluated separably: each row first collapses the
/// four relevant lattice rows into one, then each pixel blends four entries.
#[derive(Clone, Debug)]
pub struct FieldEvaluator {
    spec: LatticeSpec,
    w: usize,
    h: usize,
    cols: Vec<(usize, [f64; 4])>,
    rows: Vec<(usize, [f64; 4])>,
}

impl FieldEvaluator {
    pub fn new(spec: LatticeSpec, w: usize, h: usize) -> Self {
        let (dx, dy) = spec.spacing();
        let cols = (0..w)
            .map(|x| axis_weights((x as f64).min(spec.w as f64), dx, spec.k))
            .collect();
        let rows = (0..h)
            .map(|y| axis_weights((y as f64).min(spec.h as f64), dy, spec.l))
            .collect();
        FieldEvaluator { spec, w, h, cols, rows }
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn height(&self) -> usize {
        self.h
    }

    /// Calls `f(x, y, displacement)` for every pixel in row-major order.
    pub fn for_each<F: FnMut(usize, usize, Vec2)>(&self, displacements: &[Vec2], mut f: F) {
        let cols = self.spec.cols();
        let mut collapsed = vec![[0.0f64; 2]; cols];
        for (y, &(cy, wy)) in self.rows.iter().enumerate() {
            for (i, c) in collapsed.iter_mut().enumerate() {
                let mut acc = [0.0; 2];
                for (m, &bm) in wy.iter().enumerate() {
                    let d = displacements[(cy + m) * cols + i];
                    acc[0] += bm * d[0];
                    acc[1] += bm * d[1];
                }
                *c = acc;
            }
            for (x, &(cx, wx)) in self.cols.iter().enumerate() {
                let mut acc = [0.0; 2];
                for (l, &bl) in wx.iter().enumerate() {
                    let c = collapsed[cx + l];
                    acc[0] += bl * c[0];
                    acc[1] += bl * c[1];
                }
                f(x, y, acc);
            }
        }
    }

    pub fn field(&self, lat: &ControlLattice) -> Vec<Vec2> {
        let mut out = Vec::with_capacity(self.w * self.h);
        self.for_each(lat.displacements(), |_, _, d| out.push(d));
        out
    }
}

/// Dense displacement field, row-major `w x h`. Pixels beyond the lattice's
/// image size use the clamped edge evaluation.
pub fn displacement_field(lat: &ControlLattice, w: usize, h: usize) -> Vec<Vec2> {
    FieldEvaluator::new(*lat.spec(), w, h).field(lat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Cox-de Boor recursion on the uniform integer knot vector.
    fn cox_de_boor(i: usize, p: usize, x: f64) -> f64 {
        if p == 0 {
            return if (i as f64) <= x && x < (i + 1) as f64 { 1.0 } else { 0.0 };
        }
        let a = (x - i as f64) / p as f64;
        let b = ((i + p + 1) as f64 - x) / p as f64;
        a * cox_de_boor(i, p - 1, x) + b * cox_de_boor(i + 1, p - 1, x)
    }

    fn oracle_basis(l: usize, t: f64) -> f64 {
        // On knot span [3, 4) the nonzero cubics are N_0..N_3, N_l matching B_l.
        cox_de_boor(l, 3, 3.0 + t)
    }

    fn random_lattice(spec: LatticeSpec, seed: u64, scale: f64) -> ControlLattice {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = (0..spec.node_count())
            .map(|_| [rng.random_range(-scale..scale), rng.random_range(-scale..scale)])
            .collect();
        ControlLattice::from_displacements(spec, d).unwrap()
    }

    #[test]
    fn basis_matches_cox_de_boor() {
        for &t in &[0.0, 0.1, 0.25, 0.5, 0.77, 0.999] {
            for l in 0..4 {
                let a = basis(l, t).unwrap();
                let b = oracle_basis(l, t);
                assert!((a - b).abs() < 1e-12, "l={l} t={t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn basis_examples() {
        let w = basis_weights(0.0);
        let expected = [1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0, 0.0];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let w = basis_weights(0.5);
        assert!((w[0] - 0.125 / 6.0).abs() < 1e-15);
        assert!((w[3] - 0.125 / 6.0).abs() < 1e-15);
        assert!(matches!(basis(4, 0.2), Err(Error::BasisIndex(4))));
    }

    #[test]
    fn single_node_weight_is_four_ninths() {
        let spec = LatticeSpec::new(40, 40, 5, 5).unwrap();
        let mut lat = ControlLattice::zeros(spec);
        // p = (10, 20) has cell (1, 2), u = v = 0; the node at l = m = 1 is (1, 2).
        lat.set_node(1, 2, [3.0, -1.5]);
        let q = map_point([10.0, 20.0], &lat).unwrap();
        assert!((q[0] - (10.0 + 4.0 / 9.0 * 3.0)).abs() < 1e-12);
        assert!((q[1] - (20.0 - 4.0 / 9.0 * 1.5)).abs() < 1e-12);
    }

    #[test]
    fn map_point_rejects_outside() {
        let lat = ControlLattice::zeros(LatticeSpec::new(10, 10, 3, 3).unwrap());
        assert!(map_point([10.0, 2.0], &lat).is_err());
        assert!(map_point([-0.1, 2.0], &lat).is_err());
        assert!(map_point([f64::NAN, 2.0], &lat).is_err());
        assert!(map_point([9.999, 9.999], &lat).is_ok());
    }

    #[test]
    fn field_matches_map_point() {
        let spec = LatticeSpec::new(37, 29, 4, 6).unwrap();
        let lat = random_lattice(spec, 3, 5.0);
        let field = displacement_field(&lat, 37, 29);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let (x, y) = (rng.random_range(0..37usize), rng.random_range(0..29usize));
            let q = map_point([x as f64, y as f64], &lat).unwrap();
            let d = field[y * 37 + x];
            assert!((q[0] - x as f64 - d[0]).abs() < 1e-12);
            assert!((q[1] - y as f64 - d[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn field_of_zero_and_constant_lattices() {
        let spec = LatticeSpec::new(16, 12, 3, 4).unwrap();
        assert!(displacement_field(&ControlLattice::zeros(spec), 16, 12)
            .iter()
            .all(|d| *d == [0.0, 0.0]));
        for d in displacement_field(&ControlLattice::constant(spec, [1.5, -2.0]), 16, 12) {
            assert!((d[0] - 1.5).abs() < 1e-12 && (d[1] + 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn field_is_continuous() {
        let spec = LatticeSpec::new(64, 48, 5, 4).unwrap();
        let lat = random_lattice(spec, 17, 6.0);
        let bound = lat.max_norm();
        let field = displacement_field(&lat, 64, 48);
        for y in 0..48 {
            for x in 0..64 {
                let d = field[y * 64 + x];
                if x + 1 < 64 {
                    let e = field[y * 64 + x + 1];
                    assert!((d[0] - e[0]).hypot(d[1] - e[1]) <= bound);
                }
                if y + 1 < 48 {
                    let e = field[(y + 1) * 64 + x];
                    assert!((d[0] - e[0]).hypot(d[1] - e[1]) <= bound);
                }
            }
        }
    }

    #[test]
    fn clamped_evaluation_is_continuous_at_far_edge() {
        let spec = LatticeSpec::new(32, 32, 3, 3).unwrap();
        let lat = random_lattice(spec, 5, 3.0);
        let edge = lat.displacement_clamped([32.0, 16.0]);
        let inside = map_point([32.0 - 1e-9, 16.0], &lat).unwrap();
        assert!((edge[0] - (inside[0] - (32.0 - 1e-9))).abs() < 1e-6);
        assert_eq!(lat.displacement_clamped([100.0, 16.0]), edge);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn partition_of_unity(t in 0.0f64..1.0) {
            let s: f64 = basis_weights(t).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn identity_and_translation(w in 2usize..200, h in 2usize..200, k in 2usize..9, l in 2usize..9,
                                    cx in -10.0f64..10.0, cy in -10.0f64..10.0,
                                    fx in 0.0f64..1.0, fy in 0.0f64..1.0) {
            let spec = LatticeSpec::new(w, h, k, l).unwrap();
            let p = [fx * (w as f64 - 1e-6), fy * (h as f64 - 1e-6)];
            let id = map_point(p, &ControlLattice::zeros(spec)).unwrap();
            prop_assert_eq!(id, p);
            let q = map_point(p, &ControlLattice::constant(spec, [cx, cy])).unwrap();
            prop_assert!((q[0] - p[0] - cx).abs() < 1e-9);
            prop_assert!((q[1] - p[1] - cy).abs() < 1e-9);
        }

        #[test]
        fn perturbation_is_local(seed in any::<u64>(), ni in -1isize..=5, nj in -1isize..=4,
                                 fx in 0.0f64..1.0, fy in 0.0f64..1.0) {
            let spec = LatticeSpec::new(60, 45, 5, 4).unwrap();
            let lat = random_lattice(spec, seed, 4.0);
            let mut bumped = lat.clone();
            let d = lat.node(ni, nj);
            bumped.set_node(ni, nj, [d[0] + 3.0, d[1] - 2.0]);
            let p = [fx * 59.999, fy * 44.999];
            let (dx, dy) = spec.spacing();
            let (ci, cj) = ((p[0] / dx).floor() as isize, (p[1] / dy).floor() as isize);
            let in_support = (ci - 1..=ci + 2).contains(&ni) && (cj - 1..=cj + 2).contains(&nj);
            if !in_support {
                prop_assert_eq!(map_point(p, &lat).unwrap(), map_point(p, &bumped).unwrap());
            }
        }
    }
}
