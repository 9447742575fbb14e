//! Wave-packet asymptotes and their dynamics: Gaussian momentum amplitudes,
//! free and full time evolution by eigenfunction synthesis, the momentum
//! representation of a sampled field, and the probability flux.
//!
//! Evolution is spectral: each momentum node contributes its stationary mode
//! times e^{-i E_p (t - t_ref)/hbar}, summed with the grid weights. This is
//! exact per mode, so the only error sources are the momentum quadrature and
//! the finite spatial window, both guarded here.

use num_complex::Complex64;
use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

use crate::error::Error;
use crate::grid::MomentumGrid;
use crate::scattering::{PiecewisePotential, StationaryState};
use crate::units::PhysicalUnits;

/// Relative amplitude below which a momentum node is skipped in synthesis
/// sums; the skipped tail carries less than 1e-28 of the probability.
pub(crate) const SUPPORT_CUTOFF: f64 = 1e-14;

/// Largest relative field amplitude tolerated at the spatial boundary by the
/// checked momentum transform.
pub const TRUNCATION_TOLERANCE: f64 = 1e-8;

/// On-grid norm must match unity this closely for a fresh Gaussian asymptote.
pub const NORM_TOLERANCE: f64 = 1e-8;

/// Momentum half-support of a Gaussian packet, in units of its width. The
/// tail beyond 8 sigma carries less than 1e-14 of the probability.
const COVERAGE_SIGMAS: f64 = 8.0;

/// Steps between exact re-anchorings of marching phase factors; keeps the
/// recurrence drift below ~1e-13 rad.
pub(crate) const PHASE_REFRESH: usize = 512;

/// Minimum-uncertainty Gaussian packet parameters: mean position, mean
/// momentum, and position standard deviation. The momentum width is then
/// fixed at hbar/(2 dx).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    pub x0: f64,
    pub p0: f64,
    pub dx: f64,
}

impl GaussianSpec {
    pub fn new(x0: f64, p0: f64, dx: f64) -> Result<Self, Error> {
        if !(x0.is_finite() && p0.is_finite() && dx.is_finite()) {
            return Err(Error::BadPacket("parameters must be finite".into()));
        }
        if dx <= 0.0 {
            return Err(Error::BadPacket(format!(
                "position width must be positive, got {dx}"
            )));
        }
        Ok(Self { x0, p0, dx })
    }

    /// dp = hbar/(2 dx), the minimum-uncertainty momentum width.
    pub fn momentum_width(&self, units: &PhysicalUnits) -> f64 {
        units.hbar / (2.0 * self.dx)
    }

    /// Half-width of the momentum band a grid must cover for this packet.
    pub fn support_halfwidth(&self, units: &PhysicalUnits) -> f64 {
        COVERAGE_SIGMAS * self.momentum_width(units)
    }

    /// phi(p) = (2 pi dp^2)^{-1/4} exp(-(p-p0)^2/(4 dp^2)) exp(-i p x0/hbar).
    pub fn momentum_amplitude(&self, p: f64, units: &PhysicalUnits) -> Complex64 {
        let dp = self.momentum_width(units);
        let q = (p - self.p0) / dp;
        let mag = (2.0 * PI * dp * dp).powf(-0.25) * (-q * q / 4.0).exp();
        mag * Complex64::from_polar(1.0, -p * self.x0 / units.hbar)
    }

    /// Position amplitude at t = 0, the Fourier pair of `momentum_amplitude`.
    pub fn position_amplitude(&self, x: f64, units: &PhysicalUnits) -> Complex64 {
        let u = (x - self.x0) / self.dx;
        let mag = (2.0 * PI * self.dx * self.dx).powf(-0.25) * (-u * u / 4.0).exp();
        mag * Complex64::from_polar(1.0, self.p0 * (x - self.x0) / units.hbar)
    }

    /// Closed-form free evolution: (value, spatial derivative) at (x, t).
    pub fn free_evolution(&self, x: f64, t: f64, units: &PhysicalUnits) -> (Complex64, Complex64) {
        let hbar = units.hbar;
        let m = units.mass;
        let dp = self.momentum_width(units);
        let a = Complex64::new(1.0 / (4.0 * dp * dp), t / (2.0 * m * hbar));
        let b = (x - self.x0 - self.p0 * t / m) / hbar;
        let norm = (2.0 * PI * dp * dp).powf(-0.25) / (2.0 * PI * hbar).sqrt();
        let phase = self.p0 * (x - self.x0) / hbar - self.p0 * self.p0 * t / (2.0 * m * hbar);
        let value = norm
            * (PI / a).sqrt()
            * (Complex64::new(0.0, phase) - b * b * (4.0 * a).inv()).exp();
        let derivative = value * (Complex64::new(0.0, self.p0 / hbar) - b / hbar * (2.0 * a).inv());
        (value, derivative)
    }

    /// Exact negative-momentum probability weight, erfc(p0/(sqrt2 dp))/2.
    pub fn negative_weight(&self, units: &PhysicalUnits) -> f64 {
        erfc(self.p0 / (SQRT_2 * self.momentum_width(units))) / 2.0
    }
}

/// Momentum-space amplitude of a freely evolving packet, pinned at a
/// reference time: at any other t the amplitude is phi(p) e^{-i E_p (t -
/// t_ref)/hbar}.
#[derive(Debug, Clone)]
pub struct AsymptoteAmplitude {
    grid: MomentumGrid,
    values: Vec<Complex64>,
    reference_time: f64,
}

impl AsymptoteAmplitude {
    pub fn new(
        grid: MomentumGrid,
        values: Vec<Complex64>,
        reference_time: f64,
    ) -> Result<Self, Error> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                got: values.len(),
                expected: grid.len(),
            });
        }
        if !reference_time.is_finite() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadField("non-finite amplitude data".into()));
        }
        Ok(Self {
            grid,
            values,
            reference_time,
        })
    }

    pub(crate) fn from_parts(
        grid: MomentumGrid,
        values: Vec<Complex64>,
        reference_time: f64,
    ) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid,
            values,
            reference_time,
        }
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn reference_time(&self) -> f64 {
        self.reference_time
    }

    /// Integral of |phi|^2 dp over the grid.
    pub fn norm_sqr(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v.norm_sqr())
            .sum()
    }

    pub fn mean_momentum(&self) -> f64 {
        let weighted: f64 = self
            .grid
            .weights()
            .iter()
            .zip(self.grid.nodes())
            .zip(&self.values)
            .map(|((w, p), v)| w * p * v.norm_sqr())
            .sum();
        weighted / self.norm_sqr()
    }

    /// The same packet arriving `tau` later: phi(p) e^{+i E_p tau/hbar}.
    /// Every arrival distribution built from the result is the original
    /// shifted rigidly by tau.
    pub fn delayed(&self, tau: f64, units: &PhysicalUnits) -> Self {
        let values = self
            .grid
            .nodes()
            .iter()
            .zip(&self.values)
            .map(|(&p, v)| v * Complex64::from_polar(1.0, units.kinetic_energy(p) * tau / units.hbar))
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
            reference_time: self.reference_time,
        }
    }
}

/// Indices of nodes that carry non-negligible amplitude; sums over momentum
/// may skip the rest.
pub(crate) fn support_indices(values: &[Complex64]) -> Vec<usize> {
    let max_sq = values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    let cut = SUPPORT_CUTOFF * SUPPORT_CUTOFF * max_sq;
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm_sqr() >= cut)
        .map(|(i, _)| i)
        .collect()
}

/// Fraction of the norm carried by negative momenta, from the on-grid
/// quadrature. Zero when the grid holds no negative nodes.
pub fn negative_fraction(phi: &AsymptoteAmplitude) -> f64 {
    let total = phi.norm_sqr();
    if total == 0.0 {
        return 0.0;
    }
    let neg: f64 = phi
        .grid()
        .weights()
        .iter()
        .zip(phi.grid().nodes())
        .zip(phi.values())
        .filter(|((_, p), _)| **p < 0.0)
        .map(|((w, _), v)| w * v.norm_sqr())
        .sum();
    neg / total
}

/// Sample a Gaussian packet on a momentum grid as the incoming asymptote at
/// reference time 0. The grid must cover the 8-sigma support and reproduce
/// the unit norm to `NORM_TOLERANCE`.
pub fn gaussian_asymptote(
    spec: &GaussianSpec,
    grid: &MomentumGrid,
    units: &PhysicalUnits,
) -> Result<AsymptoteAmplitude, Error> {
    let half = spec.support_halfwidth(units);
    let (need_lo, need_hi) = (spec.p0 - half, spec.p0 + half);
    if grid.min() > need_lo || grid.max() < need_hi {
        return Err(Error::InsufficientCoverage {
            lo: grid.min(),
            hi: grid.max(),
            need_lo,
            need_hi,
        });
    }
    let values = grid
        .nodes()
        .iter()
        .map(|&p| spec.momentum_amplitude(p, units))
        .collect();
    let phi = AsymptoteAmplitude::from_parts(grid.clone(), values, 0.0);
    let deficit = (1.0 - phi.norm_sqr()).abs();
    if deficit > NORM_TOLERANCE {
        return Err(Error::NormDeficit {
            deficit,
            tol: NORM_TOLERANCE,
        });
    }
    Ok(phi)
}

/// Uniform spatial grid on [x_min, x_max].
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    x_min: f64,
    x_max: f64,
    count: usize,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, count: usize) -> Result<Self, Error> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) || count < 2 {
            return Err(Error::BadSpatialGrid);
        }
        Ok(Self {
            x_min,
            x_max,
            count,
        })
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.count - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.node(i)).collect()
    }
}

/// Complex wave function and its spatial derivative sampled on a uniform
/// grid at one instant.
#[derive(Debug, Clone)]
pub struct WaveField {
    grid: SpatialGrid,
    values: Vec<Complex64>,
    derivatives: Vec<Complex64>,
    time: f64,
}

impl WaveField {
    pub fn new(
        grid: SpatialGrid,
        values: Vec<Complex64>,
        derivatives: Vec<Complex64>,
        time: f64,
    ) -> Result<Self, Error> {
        if values.len() != grid.len() || derivatives.len() != grid.len() {
            return Err(Error::LengthMismatch {
                got: values.len().min(derivatives.len()),
                expected: grid.len(),
            });
        }
        if !time.is_finite()
            || values.iter().any(|v| !v.is_finite())
            || derivatives.iter().any(|v| !v.is_finite())
        {
            return Err(Error::BadField("non-finite field data".into()));
        }
        Ok(Self {
            grid,
            values,
            derivatives,
            time,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn positions(&self) -> Vec<f64> {
        self.grid.nodes()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn derivatives(&self) -> &[Complex64] {
        &self.derivatives
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Trapezoid integral of |psi|^2 over the grid.
    pub fn norm_sqr(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        let ends = 0.5 * (self.values[0].norm_sqr() + self.values[self.values.len() - 1].norm_sqr());
        (sum - ends) * self.grid.dx()
    }

    /// Largest boundary amplitude relative to the field maximum; the window
    /// truncation error indicator.
    pub fn edge_ratio(&self) -> f64 {
        let max = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if max == 0.0 {
            return 0.0;
        }
        self.values[0]
            .norm()
            .max(self.values[self.values.len() - 1].norm())
            / max
    }

    fn locate(&self, x: f64) -> Result<(usize, f64), Error> {
        if !x.is_finite() {
            return Err(Error::NonFinitePosition(x));
        }
        if x < self.grid.x_min() || x > self.grid.x_max() {
            return Err(Error::OutsideGrid {
                x,
                min: self.grid.x_min(),
                max: self.grid.x_max(),
            });
        }
        let s = (x - self.grid.x_min()) / self.grid.dx();
        let i = (s.floor() as usize).min(self.grid.len() - 2);
        Ok((i, s - i as f64))
    }

    pub fn value_at(&self, x: f64) -> Result<Complex64, Error> {
        let (i, f) = self.locate(x)?;
        Ok(self.values[i] * (1.0 - f) + self.values[i + 1] * f)
    }

    pub fn derivative_at(&self, x: f64) -> Result<Complex64, Error> {
        let (i, f) = self.locate(x)?;
        Ok(self.derivatives[i] * (1.0 - f) + self.derivatives[i + 1] * f)
    }
}

fn elapsed(phi: &AsymptoteAmplitude, t: f64) -> Result<f64, Error> {
    if !t.is_finite() {
        return Err(Error::BadField(format!("non-finite evolution time {t}")));
    }
    Ok(t - phi.reference_time())
}

/// The synthesis integrand oscillates in p at rate |x - p dt/m|/hbar; refuse
/// the evolution when the momentum grid cannot resolve it.
pub(crate) fn check_synthesis_resolution(
    phi: &AsymptoteAmplitude,
    spatial: &SpatialGrid,
    dt: f64,
    units: &PhysicalUnits,
) -> Result<(), Error> {
    let nodes = phi.grid().nodes();
    let p_max = support_indices(phi.values())
        .iter()
        .map(|&i| nodes[i].abs())
        .fold(0.0, f64::max);
    let x_extent = spatial.x_min().abs().max(spatial.x_max().abs());
    let needed = (x_extent + p_max * dt.abs() / units.mass) / units.hbar;
    let allowed = phi.grid().resolvable_phase_rate();
    if needed > allowed {
        return Err(Error::UnderResolved { needed, allowed });
    }
    Ok(())
}

/// Free evolution of an asymptote: psi(x, t) by plane-wave synthesis over
/// the momentum grid.
pub fn evolve_free(
    phi: &AsymptoteAmplitude,
    t: f64,
    spatial: &SpatialGrid,
    units: &PhysicalUnits,
) -> Result<WaveField, Error> {
    let dt = elapsed(phi, t)?;
    check_synthesis_resolution(phi, spatial, dt, units)?;
    let hbar = units.hbar;
    let n = spatial.len();
    let dx = spatial.dx();
    let x0 = spatial.x_min();
    let amp = 1.0 / (2.0 * PI * hbar).sqrt();
    let nodes = phi.grid().nodes();
    let weights = phi.grid().weights();
    let values = phi.values();
    let mut psi = vec![Complex64::ZERO; n];
    let mut dpsi = vec![Complex64::ZERO; n];
    for i in support_indices(values) {
        let p = nodes[i];
        let c = amp
            * weights[i]
            * values[i]
            * Complex64::from_polar(1.0, -units.kinetic_energy(p) * dt / hbar);
        let ik = Complex64::new(0.0, p / hbar);
        let step = Complex64::from_polar(1.0, p * dx / hbar);
        let mut phase = Complex64::ZERO;
        for j in 0..n {
            if j % PHASE_REFRESH == 0 {
                phase = Complex64::from_polar(1.0, p * (x0 + j as f64 * dx) / hbar);
            }
            let term = c * phase;
            psi[j] += term;
            dpsi[j] += ik * term;
            phase *= step;
        }
    }
    WaveField::new(spatial.clone(), psi, dpsi, t)
}

/// Full evolution under the potential: psi(x, t) = integral dp phi_in(p)
/// e^{-i E_p dt/hbar} psi_p^+(x), the eigenfunction expansion of the exact
/// propagator applied to the incoming asymptote.
pub fn evolve_full(
    phi_in: &AsymptoteAmplitude,
    pot: &PiecewisePotential,
    t: f64,
    spatial: &SpatialGrid,
    units: &PhysicalUnits,
) -> Result<WaveField, Error> {
    let dt = elapsed(phi_in, t)?;
    check_synthesis_resolution(phi_in, spatial, dt, units)?;
    let hbar = units.hbar;
    let n = spatial.len();
    let nodes = phi_in.grid().nodes();
    let weights = phi_in.grid().weights();
    let values = phi_in.values();
    let mut psi = vec![Complex64::ZERO; n];
    let mut dpsi = vec![Complex64::ZERO; n];
    for i in support_indices(values) {
        let p = nodes[i];
        let state = StationaryState::outgoing(p, pot, units)?;
        let c = weights[i]
            * values[i]
            * Complex64::from_polar(1.0, -units.kinetic_energy(p) * dt / hbar);
        let boundaries = state.boundaries();
        let mut region = 0usize;
        for j in 0..n {
            let x = spatial.node(j);
            while region < boundaries.len() && boundaries[region] <= x {
                region += 1;
            }
            let (v, d) = state.eval_in_region(region, x);
            psi[j] += c * v;
            dpsi[j] += c * d;
        }
    }
    WaveField::new(spatial.clone(), psi, dpsi, t)
}

/// Plane-wave decomposition of a sampled field by trapezoid quadrature,
/// without the boundary-truncation guard. Returns the amplitude pinned at
/// the field's own instant.
pub(crate) fn transform_field(
    field: &WaveField,
    grid: &MomentumGrid,
    units: &PhysicalUnits,
) -> Result<AsymptoteAmplitude, Error> {
    let hbar = units.hbar;
    let sg = field.grid();
    let n = sg.len();
    let dx = sg.dx();
    let x0 = sg.x_min();
    // Nyquist guard: the fastest requested plane wave must be sampled more
    // than twice per period.
    let needed = grid.min().abs().max(grid.max().abs()) / hbar;
    let allowed = PI / dx;
    if needed >= allowed {
        return Err(Error::UnderResolved { needed, allowed });
    }
    let values = field.values();
    let norm = 1.0 / (2.0 * PI * hbar).sqrt();
    let mut out = Vec::with_capacity(grid.len());
    for &p in grid.nodes() {
        let k = p / hbar;
        let step = Complex64::from_polar(1.0, -k * dx);
        let mut phase = Complex64::ZERO;
        let mut acc = Complex64::ZERO;
        for (j, &v) in values.iter().enumerate() {
            if j % PHASE_REFRESH == 0 {
                phase = Complex64::from_polar(1.0, -k * (x0 + j as f64 * dx));
            }
            acc += phase * v;
            phase *= step;
        }
        acc -= 0.5
            * (Complex64::from_polar(1.0, -k * x0) * values[0]
                + Complex64::from_polar(1.0, -k * sg.node(n - 1)) * values[n - 1]);
        out.push(acc * dx * norm);
    }
    Ok(AsymptoteAmplitude::from_parts(
        grid.clone(),
        out,
        field.time(),
    ))
}

/// <p|psi(t)> on the momentum grid. The field must be negligible at the
/// window boundary, else the transform is contaminated by truncation.
pub fn momentum_representation(
    field: &WaveField,
    grid: &MomentumGrid,
    units: &PhysicalUnits,
) -> Result<AsymptoteAmplitude, Error> {
    let amplitude = field.edge_ratio();
    if amplitude > TRUNCATION_TOLERANCE {
        return Err(Error::Truncation {
            amplitude,
            tol: TRUNCATION_TOLERANCE,
        });
    }
    transform_field(field, grid, units)
}

/// Probability flux J(x) = (hbar/m) Im(conj(psi) dpsi/dx), interpolated
/// linearly between grid nodes.
pub fn flux(field: &WaveField, x: f64, units: &PhysicalUnits) -> Result<f64, Error> {
    let v = field.value_at(x)?;
    let d = field.derivative_at(x)?;
    Ok(units.hbar / units.mass * (v.conj() * d).im)
}
