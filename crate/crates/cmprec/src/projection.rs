//! Euclidean projection onto the convex hull of the phase alphabet.
//!
//! For `P = 8` the hull is the regular octagon with vertices
//! `exp(j pi k / 4)`; for `P = 4` it is the square with vertices
//! `(+-1 +- j) / sqrt(2)`, so the projection is an independent clamp of the
//! real and imaginary parts. The octagon projection folds the input into
//! the first quadrant, classifies it against three boundary lines, applies
//! a per-region closed form, and restores the signs.
//!
//! In the first quadrant the octagon boundary consists of the edges on the
//! lines
//!
//! ```text
//! l1: Im = (1 - sqrt(2)) Re + 1        (upper edge)
//! l2: Re = (1 - sqrt(2)) Im + 1        (right edge, mirror of l1)
//! ```
//!
//! and the classification lines `l3` and `l4` are the perpendiculars to
//! `l1` through the vertices `j` and `(1 + j)/sqrt(2)`:
//!
//! ```text
//! l3: Im = (sqrt(2) + 1) Re + 1
//! l4: Im = (sqrt(2) + 1) Re - 1
//! ```
//!
//! (`l5`, `l6` are `l4`, `l3` with real and imaginary parts exchanged.)
//! The regions are: A inside the octagon (point unchanged), B above `l3`
//! (projects to the vertex `j`), C between `l4` and `l5` (projects to the
//! vertex `(1 + j)/sqrt(2)`), D below `l6` (projects to the vertex `1`),
//! E between `l3` and `l4` (orthogonal projection onto `l1`), and F
//! between `l5` and `l6` (orthogonal projection onto `l2`). Points on a
//! region boundary resolve to the first region in the order A, B, C, D,
//! E, F; the projected point is the same on either side, so the choice
//! only matters for exact continuity of the classifier.

use crate::C64;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// First-quadrant region of the octagon classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    A,
    B,
    C,
    D,
    E,
    F,
}

/// Convex hull of the `P`-phase alphabet with its projection operator.
#[derive(Debug, Clone)]
pub struct PolytopeP {
    phases: u32,
    // Line parameters for the octagon classifier (unused for P = 4).
    l1_slope: f64,
    l1_intercept: f64,
    l3_slope: f64,
    l3_intercept: f64,
    l4_slope: f64,
    l4_intercept: f64,
}

impl PolytopeP {
    /// Builds the polytope for `P` phases. Panics unless `p` is 4 or 8.
    pub fn new(p: u32) -> Self {
        assert!(p == 4 || p == 8, "phase count must be 4 or 8");
        Self {
            phases: p,
            l1_slope: 1.0 - SQRT2,
            l1_intercept: 1.0,
            l3_slope: SQRT2 + 1.0,
            l3_intercept: 1.0,
            l4_slope: SQRT2 + 1.0,
            l4_intercept: -1.0,
        }
    }

    pub fn octagon() -> Self {
        Self::new(8)
    }

    pub fn square() -> Self {
        Self::new(4)
    }

    pub fn phases(&self) -> u32 {
        self.phases
    }

    /// Replaces the slope of `l3` (and of its mirror `l6`). This
    /// deliberately corrupts the classifier; it exists so validation
    /// harnesses can prove they would catch such a defect.
    #[doc(hidden)]
    pub fn with_l3_slope(mut self, slope: f64) -> Self {
        self.l3_slope = slope;
        self
    }

    /// Classifies a first-quadrant point against the octagon regions.
    /// Panics if either coordinate is negative; `P` must be 8.
    pub fn classify_region_q1(&self, z: C64) -> Region {
        assert_eq!(self.phases, 8, "region classifier is octagon-specific");
        assert!(
            z.re >= 0.0 && z.im >= 0.0,
            "classifier input must lie in the first quadrant"
        );
        let (a, b) = (z.re, z.im);
        let l1 = |x: f64| self.l1_slope * x + self.l1_intercept;
        let l3 = |x: f64| self.l3_slope * x + self.l3_intercept;
        let l4 = |x: f64| self.l4_slope * x + self.l4_intercept;

        if b <= l1(a) && a <= l1(b) {
            Region::A
        } else if b >= l3(a) {
            Region::B
        } else if b <= l4(a) && a <= l4(b) {
            Region::C
        } else if a >= l3(b) {
            Region::D
        } else if b > l4(a) {
            Region::E
        } else {
            Region::F
        }
    }

    /// Orthogonal projection of `(a, b)` onto the line `y = m x + c`.
    fn foot_on_l1(&self, a: f64, b: f64) -> (f64, f64) {
        let (m, c) = (self.l1_slope, self.l1_intercept);
        let re = (a + m * (b - c)) / (1.0 + m * m);
        (re, m * re + c)
    }

    /// Exact Euclidean projection onto the octagon.
    pub fn project_octagon(&self, z: C64) -> C64 {
        let a = z.re.abs();
        let b = z.im.abs();
        let q1 = C64::new(a, b);
        let (pa, pb) = match self.classify_region_q1(q1) {
            Region::A => (a, b),
            Region::B => (0.0, 1.0),
            Region::C => (1.0 / SQRT2, 1.0 / SQRT2),
            Region::D => (1.0, 0.0),
            Region::E => self.foot_on_l1(a, b),
            Region::F => {
                let (fb, fa) = self.foot_on_l1(b, a);
                (fa, fb)
            }
        };
        // Restore the original signs (entries on an axis fold with +1).
        let sa = if z.re < 0.0 { -1.0 } else { 1.0 };
        let sb = if z.im < 0.0 { -1.0 } else { 1.0 };
        C64::new(sa * pa, sb * pb)
    }

    /// Exact Euclidean projection onto the square: an independent clamp of
    /// both parts to `[-1/sqrt(2), 1/sqrt(2)]`.
    pub fn project_square(z: C64) -> C64 {
        let lim = 1.0 / SQRT2;
        C64::new(z.re.clamp(-lim, lim), z.im.clamp(-lim, lim))
    }

    /// Projection onto this polytope.
    pub fn project(&self, z: C64) -> C64 {
        match self.phases {
            8 => self.project_octagon(z),
            _ => Self::project_square(z),
        }
    }

    /// Proximal operator of the iteration's regularizer: scale by
    /// `1 / (1 - tau * delta)` and project, entry by entry. Requires
    /// `0 <= tau * delta < 1` (with `delta = 0` this is a plain
    /// projection).
    pub fn prox(&self, z: &[C64], tau: f64, delta: f64) -> Vec<C64> {
        let td = tau * delta;
        assert!(
            (0.0..1.0).contains(&td),
            "tau * delta must lie in [0, 1), got {td}"
        );
        let scale = 1.0 / (1.0 - td);
        z.iter().map(|&zi| self.project(zi * scale)).collect()
    }
}

/// Minimum slack of `z` against the octagon's eight supporting
/// half-planes. Nonnegative (up to rounding) exactly for feasible points.
pub fn octagon_halfplane_slack(z: C64) -> f64 {
    let r = (std::f64::consts::PI / 8.0).cos();
    let mut slack = f64::INFINITY;
    for k in 0..8 {
        let th = std::f64::consts::PI / 8.0 + std::f64::consts::FRAC_PI_4 * k as f64;
        let proj = z.re * th.cos() + z.im * th.sin();
        slack = slack.min(r - proj);
    }
    slack
}
