//! Stationary scattering states and S-matrix data for piecewise-constant
//! potentials on the line.
//!
//! States are built by propagating the fundamental pair of the local
//! Schroedinger equation across each region: C(y) = cos(k y) or cosh(kappa y)
//! and S(y) = sin(k y)/k or sinh(kappa y)/kappa. Both are analytic in the
//! local k^2, so an energy exactly at a segment height needs no special case
//! (the pair degenerates to 1 and y). Propagation starts on the transmitted
//! side and marches toward the incident side; in classically forbidden
//! regions the growing solution then dominates along the direction of travel,
//! which keeps relative errors bounded. Exponential growth is folded into a
//! per-region log scale, so opaque barriers with kappa*L in the hundreds
//! neither overflow nor corrupt the reflection amplitudes.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::dynamics::AsymptoteAmplitude;
use crate::error::Error;
use crate::units::PhysicalUnits;

/// One constant-height stretch of the potential. `left < right`; the
/// potential vanishes outside every segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSegment {
    pub left: f64,
    pub right: f64,
    pub height: f64,
}

/// Piecewise-constant potential: ordered, non-overlapping segments with
/// implicit V = 0 elsewhere. Zero segments model the free line.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePotential {
    segments: Vec<PotentialSegment>,
}

impl PiecewisePotential {
    pub fn new(segments: Vec<PotentialSegment>) -> Result<Self, Error> {
        for (i, s) in segments.iter().enumerate() {
            if !(s.left.is_finite() && s.right.is_finite() && s.height.is_finite()) {
                return Err(Error::BadPotential(format!(
                    "segment {} has a non-finite parameter",
                    i + 1
                )));
            }
            if !(s.left < s.right) {
                return Err(Error::BadPotential(format!(
                    "segment {} needs left < right",
                    i + 1
                )));
            }
            if i > 0 && s.left < segments[i - 1].right {
                return Err(Error::BadPotential(format!(
                    "segment {} overlaps segment {}",
                    i + 1,
                    i
                )));
            }
        }
        Ok(Self { segments })
    }

    pub fn free() -> Self {
        Self {
            segments: Vec::new(),
        }
    }

    pub fn square_barrier(height: f64, left: f64, right: f64) -> Result<Self, Error> {
        Self::new(vec![PotentialSegment {
            left,
            right,
            height,
        }])
    }

    pub fn is_free(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segments(&self) -> &[PotentialSegment] {
        &self.segments
    }

    pub fn value_at(&self, x: f64) -> f64 {
        for s in &self.segments {
            if x >= s.left && x < s.right {
                return s.height;
            }
        }
        0.0
    }

    /// Region decomposition: sorted boundary coordinates plus one height per
    /// region (one more region than boundaries, free at both ends).
    pub(crate) fn partition(&self) -> (Vec<f64>, Vec<f64>) {
        let mut boundaries = Vec::with_capacity(2 * self.segments.len());
        for s in &self.segments {
            if boundaries.last() != Some(&s.left) {
                boundaries.push(s.left);
            }
            boundaries.push(s.right);
        }
        let mut heights = Vec::with_capacity(boundaries.len() + 1);
        heights.push(0.0);
        for w in boundaries.windows(2) {
            heights.push(self.value_at(0.5 * (w[0] + w[1])));
        }
        if !boundaries.is_empty() {
            heights.push(0.0);
        }
        (boundaries, heights)
    }
}

/// Scaled fundamental pair at displacement `y` for local k^2: returns
/// (c, s, ls) with C(y) = c * exp(ls) and S(y) = s * exp(ls). The log scale is
/// nonzero only in the exponentially growing regime, keeping every returned
/// mantissa of order one.
fn fundamental_pair(k2: f64, y: f64) -> (f64, f64, f64) {
    let w = k2 * y * y;
    if w.abs() < 1e-4 {
        // Analytic continuation through k^2 = 0; relative truncation below
        // 1e-15 at the branch cut-over.
        let c = 1.0 - w / 2.0 + w * w / 24.0 - w * w * w / 720.0;
        let s = y * (1.0 - w / 6.0 + w * w / 120.0 - w * w * w / 5040.0);
        (c, s, 0.0)
    } else if k2 > 0.0 {
        let k = k2.sqrt();
        ((k * y).cos(), (k * y).sin() / k, 0.0)
    } else {
        let kappa = (-k2).sqrt();
        let m = kappa * y.abs();
        let damp = (-2.0 * m).exp();
        let c = 0.5 * (1.0 + damp);
        let s = y.signum() * (1.0 - damp) / (2.0 * kappa);
        (c, s, m)
    }
}

#[derive(Debug, Clone, Copy)]
enum RegionForm {
    /// Exterior region: psi = a exp(ikx) + b exp(-ikx) with real k > 0.
    PlaneWaves { k: f64, a: Complex64, b: Complex64 },
    /// Interior region: psi = (v C(x - x_ref) + d S(x - x_ref)) exp(log_scale)
    /// with the fundamental pair for the local k^2.
    Local {
        k2: f64,
        x_ref: f64,
        v: Complex64,
        d: Complex64,
        log_scale: f64,
    },
}

/// Value and spatial derivative of a stationary state at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryStateEval {
    pub momentum: f64,
    pub x: f64,
    pub value: Complex64,
    pub derivative: Complex64,
}

/// A stationary scattering state at incident momentum `p`, normalized so the
/// incident plane wave is exp(ipx/hbar) / sqrt(2 pi hbar). Outgoing states
/// carry the scattered waves away from the potential; incoming states are the
/// complex conjugates of the reversed-momentum outgoing ones.
#[derive(Debug, Clone)]
pub struct StationaryState {
    momentum: f64,
    conjugate: bool,
    boundaries: Vec<f64>,
    regions: Vec<RegionForm>,
    transmission: Complex64,
    reflection: Complex64,
}

impl StationaryState {
    /// psi_p^+ : plane wave incident from the left for p > 0, from the right
    /// for p < 0, with transmitted and reflected waves moving outward.
    pub fn outgoing(
        p: f64,
        pot: &PiecewisePotential,
        units: &PhysicalUnits,
    ) -> Result<Self, Error> {
        solve(p, pot, units)
    }

    /// psi_p^- : the state whose far future is the single plane wave p;
    /// definitionally conj(psi_{-p}^+) pointwise.
    pub fn incoming(
        p: f64,
        pot: &PiecewisePotential,
        units: &PhysicalUnits,
    ) -> Result<Self, Error> {
        let mut state = solve(-p, pot, units)?;
        state.momentum = p;
        state.conjugate = true;
        Ok(state)
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    /// Transmission amplitude of the underlying directional solve.
    pub fn transmission(&self) -> Complex64 {
        self.transmission
    }

    /// Same-side reflection amplitude of the underlying directional solve.
    pub fn reflection(&self) -> Complex64 {
        self.reflection
    }

    pub fn eval(&self, x: f64) -> Result<StationaryStateEval, Error> {
        if !x.is_finite() {
            return Err(Error::NonFinitePosition(x));
        }
        let region = self.boundaries.partition_point(|&b| b <= x);
        let (value, derivative) = self.eval_in_region(region, x);
        Ok(StationaryStateEval {
            momentum: self.momentum,
            x,
            value,
            derivative,
        })
    }

    /// Evaluate with the analytic form of one specific region; used to check
    /// matching residuals exactly at segment edges.
    pub(crate) fn eval_in_region(&self, region: usize, x: f64) -> (Complex64, Complex64) {
        let (value, derivative) = match self.regions[region] {
            RegionForm::PlaneWaves { k, a, b } => {
                let right = Complex64::from_polar(1.0, k * x);
                let ik = Complex64::new(0.0, k);
                let va = a * right;
                let vb = b * right.conj();
                (va + vb, ik * (va - vb))
            }
            RegionForm::Local {
                k2,
                x_ref,
                v,
                d,
                log_scale,
            } => {
                let (c, s, ls) = fundamental_pair(k2, x - x_ref);
                let scale = (log_scale + ls).exp();
                ((v * c + d * s) * scale, (d * c - v * (k2 * s)) * scale)
            }
        };
        if self.conjugate {
            (value.conj(), derivative.conj())
        } else {
            (value, derivative)
        }
    }

    pub(crate) fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }
}

fn solve(p: f64, pot: &PiecewisePotential, units: &PhysicalUnits) -> Result<StationaryState, Error> {
    if !p.is_finite() || p == 0.0 {
        return Err(Error::BadMomentum(p));
    }
    let hbar = units.hbar;
    let energy = units.kinetic_energy(p);
    let k = p.abs() / hbar;
    let amp = 1.0 / (2.0 * PI * hbar).sqrt();
    let (boundaries, heights) = pot.partition();

    if boundaries.is_empty() {
        let (a, b) = if p > 0.0 {
            (Complex64::new(amp, 0.0), Complex64::ZERO)
        } else {
            (Complex64::ZERO, Complex64::new(amp, 0.0))
        };
        return Ok(StationaryState {
            momentum: p,
            conjugate: false,
            boundaries,
            regions: vec![RegionForm::PlaneWaves { k, a, b }],
            transmission: Complex64::ONE,
            reflection: Complex64::ZERO,
        });
    }

    let k2: Vec<f64> = heights
        .iter()
        .map(|&v| 2.0 * units.mass * (energy - v) / (hbar * hbar))
        .collect();
    let n_regions = heights.len();
    let last = n_regions - 1;
    let ik = Complex64::new(0.0, k);

    // Raw interior data accumulated during the march: (v, d, log_scale)
    // anchored at the entry edge of each region.
    let mut raw = vec![(Complex64::ZERO, Complex64::ZERO, 0.0); n_regions];
    let mut anchors = vec![0.0; n_regions];

    // Transmitted-side start values at the first crossed edge; the raw
    // transmitted wave is exp(+-ik(x - edge)) with unit coefficient.
    let (mut v, mut d) = (Complex64::ONE, if p > 0.0 { ik } else { -ik });
    let mut ls = 0.0;

    let interior: Vec<usize> = if p > 0.0 {
        (1..last).rev().collect()
    } else {
        (1..last).collect()
    };
    for &r in &interior {
        let (entry, exit) = if p > 0.0 {
            (boundaries[r], boundaries[r - 1])
        } else {
            (boundaries[r - 1], boundaries[r])
        };
        raw[r] = (v, d, ls);
        anchors[r] = entry;
        let (c, s, dls) = fundamental_pair(k2[r], exit - entry);
        let (nv, nd) = (v * c + d * s, d * c - v * (k2[r] * s));
        v = nv;
        d = nd;
        ls += dls;
        let m = v.norm().max(d.norm());
        if m > 1e30 {
            v /= m;
            d /= m;
            ls += m.ln();
        }
    }

    // Decompose at the incident-side edge into absolute plane waves
    // a exp(ikx) + b exp(-ikx).
    let incident_edge = if p > 0.0 {
        boundaries[0]
    } else {
        boundaries[last - 1]
    };
    let transmitted_edge = if p > 0.0 {
        boundaries[last - 1]
    } else {
        boundaries[0]
    };
    let phase = Complex64::from_polar(1.0, k * incident_edge);
    let a_raw = 0.5 * (v + d / ik) * phase.conj();
    let b_raw = 0.5 * (v - d / ik) * phase;
    // The incident coefficient never vanishes: its squared modulus exceeds the
    // reflected one by the (positive) transmitted flux.
    let (incident, reflected) = if p > 0.0 {
        (a_raw, b_raw)
    } else {
        (b_raw, a_raw)
    };
    let reflection = reflected / incident;
    let trans_sign = if p > 0.0 { -1.0 } else { 1.0 };
    let transmission =
        Complex64::from_polar((-ls).exp(), trans_sign * k * transmitted_edge) / incident;

    let mut regions = vec![
        RegionForm::PlaneWaves {
            k,
            a: Complex64::ZERO,
            b: Complex64::ZERO,
        };
        n_regions
    ];
    if p > 0.0 {
        regions[0] = RegionForm::PlaneWaves {
            k,
            a: Complex64::new(amp, 0.0),
            b: amp * reflection,
        };
        regions[last] = RegionForm::PlaneWaves {
            k,
            a: amp * transmission,
            b: Complex64::ZERO,
        };
    } else {
        regions[last] = RegionForm::PlaneWaves {
            k,
            a: amp * reflection,
            b: Complex64::new(amp, 0.0),
        };
        regions[0] = RegionForm::PlaneWaves {
            k,
            a: Complex64::ZERO,
            b: amp * transmission,
        };
    }
    let factor = amp / incident;
    for r in 1..last {
        let (rv, rd, rls) = raw[r];
        regions[r] = RegionForm::Local {
            k2: k2[r],
            x_ref: anchors[r],
            v: rv * factor,
            d: rd * factor,
            log_scale: rls - ls,
        };
    }

    Ok(StationaryState {
        momentum: p,
        conjugate: false,
        boundaries,
        regions,
        transmission,
        reflection,
    })
}

/// Pointwise convenience accessors; each call solves the state afresh.
pub fn stationary_state_plus(
    p: f64,
    pot: &PiecewisePotential,
    units: &PhysicalUnits,
    x: f64,
) -> Result<StationaryStateEval, Error> {
    StationaryState::outgoing(p, pot, units)?.eval(x)
}

pub fn stationary_state_minus(
    p: f64,
    pot: &PiecewisePotential,
    units: &PhysicalUnits,
    x: f64,
) -> Result<StationaryStateEval, Error> {
    StationaryState::incoming(p, pot, units)?.eval(x)
}

/// Scattering amplitudes at one positive momentum: the shared transmission
/// amplitude and the two side-dependent reflection amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SMatrixEntry {
    pub p: f64,
    pub transmission: Complex64,
    pub reflection_left: Complex64,
    pub reflection_right: Complex64,
}

pub fn s_matrix(
    p: f64,
    pot: &PiecewisePotential,
    units: &PhysicalUnits,
) -> Result<SMatrixEntry, Error> {
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::BadMomentum(p));
    }
    let from_left = solve(p, pot, units)?;
    let from_right = solve(-p, pot, units)?;
    debug_assert!(
        (from_left.transmission - from_right.transmission).norm()
            <= 1e-10 * (1.0 + from_left.transmission.norm()),
        "transmission amplitude must not depend on the incidence side"
    );
    Ok(SMatrixEntry {
        p,
        transmission: from_left.transmission,
        reflection_left: from_left.reflection,
        reflection_right: from_right.reflection,
    })
}

/// Image of an incoming asymptote under the scattering map: the free packet
/// that the full evolution approaches in the far future. Mixes each momentum
/// with its mirror through the transmission and reflection amplitudes, so the
/// grid must pair every node with its negative.
pub fn outgoing_asymptote(
    phi_in: &AsymptoteAmplitude,
    pot: &PiecewisePotential,
    units: &PhysicalUnits,
) -> Result<AsymptoteAmplitude, Error> {
    if pot.is_free() {
        return Ok(phi_in.clone());
    }
    let grid = phi_in.grid();
    if !grid.is_split_at_zero() {
        return Err(Error::GridNotSplitAtZero);
    }
    if !grid.is_mirror_symmetric() {
        return Err(Error::GridNotMirrorSymmetric);
    }
    let n = grid.len();
    let values = phi_in.values();
    let mut out = vec![Complex64::ZERO; n];
    for i in 0..n / 2 {
        let j = grid.mirror_index(i)?;
        let p = grid.nodes()[j];
        debug_assert!(p > 0.0);
        let entry = s_matrix(p, pot, units)?;
        out[j] = entry.transmission * values[j] + entry.reflection_right * values[i];
        out[i] = entry.transmission * values[i] + entry.reflection_left * values[j];
    }
    Ok(AsymptoteAmplitude::from_parts(
        grid.clone(),
        out,
        phi_in.reference_time(),
    ))
}
