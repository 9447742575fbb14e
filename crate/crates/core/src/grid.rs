//! Quadrature grids for momentum integrals and uniform time grids.
//!
//! Momentum integrals here carry phases like exp(i(px - E_p t)/hbar), so the
//! grid is built from composite Gauss-Legendre panels: each panel only has to
//! resolve the local oscillation, and the panel count can grow with the phase
//! budget of a scenario. A panel boundary is always placed at p = 0 when the
//! domain spans both signs, keeping the sharp Theta(+-p) factors of the
//! crossing-state overlaps exact.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::Error;

/// Nodes per oscillation below which a panel is considered under-resolved.
/// Gauss rules stay accurate well past this point; the margin absorbs the
/// slowly varying amplitude factors multiplying the phase.
pub const NODES_PER_OSCILLATION: f64 = 8.0;

const MIN_NODE_COUNT: usize = 16;

/// Gauss-Legendre rule on [-1, 1] via Newton iteration on the recurrence.
/// Nodes are computed for one half and mirrored, so the returned set is
/// symmetric to the last bit.
fn gauss_legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre grid over a contiguous momentum interval.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    panel_edges: Vec<f64>,
    panel_counts: Vec<usize>,
    mirror_symmetric: bool,
}

/// Direct constructor: `count` nodes spanning `center +- halfwidth`. When the
/// interval straddles p = 0 it is split there, with nodes shared between the
/// two panels in proportion to their lengths.
pub fn build_momentum_grid(
    center: f64,
    halfwidth: f64,
    count: usize,
) -> Result<MomentumGrid, Error> {
    MomentumGrid::gauss_legendre(center, halfwidth, count)
}

/// Quadrature of complex samples against the grid weights.
pub fn integrate(samples: &[Complex64], grid: &MomentumGrid) -> Result<Complex64, Error> {
    grid.integrate(samples)
}

impl MomentumGrid {
    pub fn gauss_legendre(center: f64, halfwidth: f64, count: usize) -> Result<Self, Error> {
        if !(halfwidth.is_finite() && halfwidth > 0.0 && center.is_finite()) {
            return Err(Error::BadHalfwidth(halfwidth));
        }
        if count < MIN_NODE_COUNT {
            return Err(Error::NodeCount {
                got: count,
                min: MIN_NODE_COUNT,
            });
        }
        let lo = center - halfwidth;
        let hi = center + halfwidth;
        if lo < 0.0 && hi > 0.0 {
            // Proportional split keeps the node density uniform across p = 0.
            let frac = -lo / (hi - lo);
            let n_lo = ((count as f64 * frac).round() as usize).clamp(8, count - 8);
            Self::from_panels(&[(lo, 0.0, n_lo), (0.0, hi, count - n_lo)])
        } else {
            Self::from_panels(&[(lo, hi, count)])
        }
    }

    /// Mirror-symmetric grid on [-p_max, p_max] split at zero, sized for a
    /// total phase budget of `phase_rad` radians across the full span. Panels
    /// hold 32 nodes each; the total is rounded up to fit whole panels.
    pub fn symmetric(p_max: f64, phase_rad: f64) -> Result<Self, Error> {
        if !(p_max.is_finite() && p_max > 0.0) {
            return Err(Error::BadHalfwidth(p_max));
        }
        let per_panel = 32usize;
        let needed = (phase_rad.max(2.0 * PI) / (2.0 * PI) * NODES_PER_OSCILLATION).ceil();
        let panels_per_side = ((needed / 2.0) / per_panel as f64).ceil().max(1.0) as usize;
        let mut panels = Vec::with_capacity(2 * panels_per_side);
        // Negative side first so nodes come out ascending; edges are mirrored
        // exactly from the positive side.
        for j in (0..panels_per_side).rev() {
            let a = p_max * (j + 1) as f64 / panels_per_side as f64;
            let b = p_max * j as f64 / panels_per_side as f64;
            panels.push((-a, -b, per_panel));
        }
        for j in 0..panels_per_side {
            let a = p_max * j as f64 / panels_per_side as f64;
            let b = p_max * (j + 1) as f64 / panels_per_side as f64;
            panels.push((a, b, per_panel));
        }
        Self::from_panels(&panels)
    }

    /// One-signed composite grid over [lo, hi] with the given panel count.
    pub fn composite(lo: f64, hi: f64, panels: usize, nodes_per_panel: usize) -> Result<Self, Error> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) || panels == 0 {
            return Err(Error::BadHalfwidth(hi - lo));
        }
        let mut spec = Vec::with_capacity(panels);
        for j in 0..panels {
            let a = lo + (hi - lo) * j as f64 / panels as f64;
            let b = lo + (hi - lo) * (j + 1) as f64 / panels as f64;
            spec.push((a, b, nodes_per_panel));
        }
        Self::from_panels(&spec)
    }

    fn from_panels(panels: &[(f64, f64, usize)]) -> Result<Self, Error> {
        let total: usize = panels.iter().map(|p| p.2).sum();
        if total < MIN_NODE_COUNT {
            return Err(Error::NodeCount {
                got: total,
                min: MIN_NODE_COUNT,
            });
        }
        let mut nodes = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut panel_edges = Vec::with_capacity(panels.len() + 1);
        let mut panel_counts = Vec::with_capacity(panels.len());
        let mut rule_cache: Vec<(usize, (Vec<f64>, Vec<f64>))> = Vec::new();
        for &(a, b, n) in panels {
            if !(a < b) {
                return Err(Error::BadHalfwidth(b - a));
            }
            let rule = match rule_cache.iter().find(|(m, _)| *m == n) {
                Some((_, r)) => r.clone(),
                None => {
                    let r = gauss_legendre_rule(n);
                    rule_cache.push((n, r.clone()));
                    r
                }
            };
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            for (&xi, &wi) in rule.0.iter().zip(&rule.1) {
                nodes.push(mid + half * xi);
                weights.push(half * wi);
            }
            if panel_edges.is_empty() {
                panel_edges.push(a);
            }
            panel_edges.push(b);
            panel_counts.push(n);
        }
        let mut grid = Self {
            nodes,
            weights,
            panel_edges,
            panel_counts,
            mirror_symmetric: false,
        };
        grid.mirror_symmetric = grid.check_mirror();
        Ok(grid)
    }

    fn check_mirror(&self) -> bool {
        let n = self.nodes.len();
        self.nodes.iter().enumerate().all(|(i, &p)| {
            let q = self.nodes[n - 1 - i];
            (p + q).abs() <= 1e-12 * (1.0 + p.abs())
                && (self.weights[i] - self.weights[n - 1 - i]).abs()
                    <= 1e-12 * self.weights[i].abs()
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn min(&self) -> f64 {
        *self.panel_edges.first().unwrap()
    }

    pub fn max(&self) -> f64 {
        *self.panel_edges.last().unwrap()
    }

    pub fn panel_edges(&self) -> &[f64] {
        &self.panel_edges
    }

    /// True when no panel straddles p = 0, so Theta(+-p) restrictions can be
    /// applied node-wise without quadrature error.
    pub fn is_split_at_zero(&self) -> bool {
        if self.min() >= 0.0 || self.max() <= 0.0 {
            return true;
        }
        self.panel_edges.iter().any(|&e| e == 0.0)
    }

    pub fn is_mirror_symmetric(&self) -> bool {
        self.mirror_symmetric
    }

    /// Index of the node at -p for mirror-symmetric grids.
    pub fn mirror_index(&self, i: usize) -> Result<usize, Error> {
        if !self.mirror_symmetric {
            return Err(Error::GridNotMirrorSymmetric);
        }
        Ok(self.nodes.len() - 1 - i)
    }

    /// Largest phase gradient d(phase)/dp, in radians per momentum unit, that
    /// every panel still resolves with NODES_PER_OSCILLATION nodes per cycle.
    pub fn resolvable_phase_rate(&self) -> f64 {
        let mut rate = f64::INFINITY;
        for (j, &n) in self.panel_counts.iter().enumerate() {
            let width = self.panel_edges[j + 1] - self.panel_edges[j];
            rate = rate.min(n as f64 * 2.0 * PI / (NODES_PER_OSCILLATION * width));
        }
        rate
    }

    pub fn integrate(&self, samples: &[Complex64]) -> Result<Complex64, Error> {
        if samples.len() != self.nodes.len() {
            return Err(Error::LengthMismatch {
                got: samples.len(),
                expected: self.nodes.len(),
            });
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (s, w) in samples.iter().zip(&self.weights) {
            acc += s * w;
        }
        Ok(acc)
    }

    pub fn integrate_real(&self, samples: &[f64]) -> Result<f64, Error> {
        if samples.len() != self.nodes.len() {
            return Err(Error::LengthMismatch {
                got: samples.len(),
                expected: self.nodes.len(),
            });
        }
        Ok(samples
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| s * w)
            .sum())
    }
}

/// Uniform, inclusive time grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub count: usize,
}

impl TimeGrid {
    pub fn new(t_min: f64, t_max: f64, count: usize) -> Result<Self, Error> {
        if !(t_min.is_finite() && t_max.is_finite() && t_min < t_max) || count < 2 {
            return Err(Error::BadTimeGrid);
        }
        Ok(Self {
            t_min,
            t_max,
            count,
        })
    }

    pub fn dt(&self) -> f64 {
        (self.t_max - self.t_min) / (self.count - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.t_min + (self.t_max - self.t_min) * i as f64 / (self.count - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.node(i)).collect()
    }

    /// Trapezoid integral of samples aligned with the grid nodes.
    pub fn integrate(&self, samples: &[f64]) -> Result<f64, Error> {
        if samples.len() != self.count {
            return Err(Error::LengthMismatch {
                got: samples.len(),
                expected: self.count,
            });
        }
        let interior: f64 = samples[1..self.count - 1].iter().sum();
        Ok(self.dt() * (interior + 0.5 * (samples[0] + samples[self.count - 1])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Adaptive Simpson reference used to pin expected integral values.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
        }
        fn recurse(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let left = simpson(f, a, m);
            let right = simpson(f, m, b);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                recurse(f, a, m, left, 0.5 * tol, depth - 1)
                    + recurse(f, m, b, right, 0.5 * tol, depth - 1)
            }
        }
        recurse(f, a, b, simpson(f, a, b), tol, 48)
    }

    #[test]
    fn five_point_rule_matches_reference_values() {
        let (nodes, weights) = gauss_legendre_rule(5);
        let expect_nodes = [
            -0.906179845938663993,
            -0.538469310105683091,
            0.0,
            0.538469310105683091,
            0.906179845938663993,
        ];
        let expect_weights = [
            0.236926885056189088,
            0.478628670499366468,
            0.568888888888888889,
            0.478628670499366468,
            0.236926885056189088,
        ];
        for i in 0..5 {
            assert_abs_diff_eq!(nodes[i], expect_nodes[i], epsilon = 1e-15);
            assert_abs_diff_eq!(weights[i], expect_weights[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn one_signed_interval_stays_in_one_panel() {
        let grid = build_momentum_grid(6.0, 5.0, 256).unwrap();
        assert_eq!(grid.len(), 256);
        assert!(grid.nodes().iter().all(|&p| p > 1.0 && p < 11.0));
        assert_eq!(grid.panel_edges(), &[1.0, 11.0]);
        let total: f64 = grid.weights().iter().sum();
        assert_abs_diff_eq!(total, 10.0, epsilon = 1e-12);
    }

    #[test]
    fn straddling_interval_splits_at_zero() {
        let grid = build_momentum_grid(0.0, 1.0, 64).unwrap();
        assert_eq!(grid.panel_edges(), &[-1.0, 0.0, 1.0]);
        assert_eq!(grid.panel_counts, vec![32, 32]);
        assert!(grid.is_split_at_zero());
        assert!(grid.is_mirror_symmetric());
        for i in 0..grid.len() {
            let j = grid.mirror_index(i).unwrap();
            assert_eq!(grid.nodes()[i], -grid.nodes()[j]);
        }
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(matches!(
            build_momentum_grid(0.0, 1.0, 8),
            Err(Error::NodeCount { .. })
        ));
        assert!(matches!(
            build_momentum_grid(0.0, -1.0, 64),
            Err(Error::BadHalfwidth(_))
        ));
        assert!(matches!(
            build_momentum_grid(0.0, 0.0, 64),
            Err(Error::BadHalfwidth(_))
        ));
    }

    #[test]
    fn gaussian_integral_matches_adaptive_reference() {
        // Frozen from the adaptive reference below; equals sqrt(pi)*erf(5)
        // analytically.
        let expect = 1.7724538509027909;
        let reference = adaptive_simpson(&|p: f64| (-(p - 6.0) * (p - 6.0)).exp(), 1.0, 11.0, 1e-15);
        assert_abs_diff_eq!(reference, expect, epsilon = 1e-13);

        let grid = build_momentum_grid(6.0, 5.0, 256).unwrap();
        let samples: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&p| (-(p - 6.0) * (p - 6.0)).exp())
            .collect();
        let got = grid.integrate_real(&samples).unwrap();
        assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
    }

    #[test]
    fn complex_integration_checks_lengths() {
        let grid = build_momentum_grid(0.0, 1.0, 64).unwrap();
        let odd: Vec<Complex64> = grid
            .nodes()
            .iter()
            .map(|&p| Complex64::new(p * p * p, p))
            .collect();
        let val = integrate(&odd, &grid).unwrap();
        assert_abs_diff_eq!(val.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(val.im, 0.0, epsilon = 1e-15);
        assert!(matches!(
            integrate(&odd[1..], &grid),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn symmetric_grid_covers_phase_budget() {
        let grid = MomentumGrid::symmetric(10.0, 2800.0).unwrap();
        assert!(grid.is_mirror_symmetric());
        assert!(grid.is_split_at_zero());
        // 2800 rad needs ceil(2800/2pi*8) = 3566 nodes; panels round up.
        assert!(grid.len() >= 3566);
        assert!(grid.resolvable_phase_rate() >= 2800.0 / 20.0);
        let total: f64 = grid.weights().iter().sum();
        assert_abs_diff_eq!(total, 20.0, epsilon = 1e-10);
    }

    #[test]
    fn time_grid_nodes_and_integral() {
        let tg = TimeGrid::new(0.0, 10.0, 401).unwrap();
        assert_abs_diff_eq!(tg.dt(), 0.025, epsilon = 1e-15);
        assert_eq!(tg.nodes().len(), 401);
        assert_abs_diff_eq!(tg.node(400), 10.0, epsilon = 1e-15);
        let ones = vec![1.0; 401];
        assert_abs_diff_eq!(tg.integrate(&ones).unwrap(), 10.0, epsilon = 1e-12);
        assert!(TimeGrid::new(1.0, 1.0, 10).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 1).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // A single n-node panel integrates polynomials up to degree
            // 2n - 1 exactly.
            #[test]
            fn panel_is_exact_on_polynomials(
                coeffs in proptest::collection::vec(-3.0f64..3.0, 16),
                a in -4.0f64..-1.0,
                width in 0.5f64..4.0,
            ) {
                let b = a + width;
                let grid = MomentumGrid::composite(a, b, 1, 16).unwrap();
                let samples: Vec<f64> = grid
                    .nodes()
                    .iter()
                    .map(|&x| coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c))
                    .collect();
                let got = grid.integrate_real(&samples).unwrap();
                let exact: f64 = coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| c * (b.powi(k as i32 + 1) - a.powi(k as i32 + 1)) / (k as f64 + 1.0))
                    .sum();
                prop_assert!((got - exact).abs() <= 1e-9 * (1.0 + exact.abs()));
            }
        }
    }
}
