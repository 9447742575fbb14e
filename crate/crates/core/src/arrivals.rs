//! Time-of-arrival distributions as crossing-state overlaps.
//!
//! Every distribution here has the form Pi(T) = sum over sides of
//! |<crossing state at X | state at T>|^2, with the side selecting the sign
//! of the momentum. The free-motion case is Kijowski's distribution; the
//! three generalizations differ in which state is evolved (the full state
//! or an asymptote) and in which basis the crossing state is built (plane
//! waves or scattering eigenfunctions).

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::dynamics::{
    check_synthesis_resolution, gaussian_asymptote, negative_fraction, support_indices,
    AsymptoteAmplitude, GaussianSpec, SpatialGrid, PHASE_REFRESH,
};
use crate::error::Error;
use crate::grid::{MomentumGrid, TimeGrid};
use crate::scattering::{outgoing_asymptote, PiecewisePotential, StationaryState};
use crate::units::PhysicalUnits;

/// Crossing direction at the arrival point. Left means arriving from the
/// left, i.e. moving with positive momentum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    /// The Heaviside sign alpha paired with this side: +1 for Left, -1 for
    /// Right.
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }

    /// Theta(alpha p): whether a momentum belongs to this side's overlap.
    pub fn admits(self, p: f64) -> bool {
        self.sign() * p > 0.0
    }
}

/// Which crossing-state family a distribution series belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CrossingKind {
    /// Free-motion Kijowski distribution of the packet itself.
    KijowskiFree,
    /// Full-state overlap with the free crossing states.
    Proposal1,
    /// Kijowski distribution of the incoming asymptote.
    Proposal2Plus,
    /// Kijowski distribution of the outgoing asymptote.
    Proposal2Minus,
    /// Scattering-basis crossing states built from the incoming branch.
    Proposal3Plus,
    /// Scattering-basis crossing states built from the outgoing branch.
    Proposal3Minus,
}

/// Asymptote branch selector for the second and third proposals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Plus,
    Minus,
}

/// What a series of values over the time grid represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeriesKind {
    Crossing(CrossingKind),
    /// Probability flux J(X, T); signed, with the positive part in `left`.
    Flux,
    /// Kernel-density estimate of classical arrival events.
    Classical,
}

/// Arrival distribution sampled on a time grid, split by crossing side.
/// `total` is always `left + right` pointwise; for crossing and classical
/// kinds both components are nonnegative densities, for flux series `left`
/// holds the positive part and `right` the negative part of J.
#[derive(Debug, Clone)]
pub struct DistributionSeries {
    kind: SeriesKind,
    x: f64,
    times: TimeGrid,
    left: Vec<f64>,
    right: Vec<f64>,
    total: Vec<f64>,
}

impl DistributionSeries {
    pub fn new(
        kind: SeriesKind,
        x: f64,
        times: TimeGrid,
        left: Vec<f64>,
        right: Vec<f64>,
    ) -> Result<Self, Error> {
        if !x.is_finite() {
            return Err(Error::NonFinitePosition(x));
        }
        if left.len() != times.count || right.len() != times.count {
            return Err(Error::LengthMismatch {
                got: left.len().min(right.len()),
                expected: times.count,
            });
        }
        if left.iter().chain(&right).any(|v| !v.is_finite()) {
            return Err(Error::BadField("non-finite series data".into()));
        }
        let signs_ok = match kind {
            SeriesKind::Crossing(_) | SeriesKind::Classical => {
                left.iter().chain(&right).all(|&v| v >= 0.0)
            }
            SeriesKind::Flux => {
                left.iter().all(|&v| v >= 0.0) && right.iter().all(|&v| v <= 0.0)
            }
        };
        if !signs_ok {
            return Err(Error::BadField(
                "series components violate the sign convention of their kind".into(),
            ));
        }
        let total = left.iter().zip(&right).map(|(l, r)| l + r).collect();
        Ok(Self {
            kind,
            x,
            times,
            left,
            right,
            total,
        })
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    /// Arrival point the series was evaluated at.
    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn left(&self) -> &[f64] {
        &self.left
    }

    pub fn right(&self) -> &[f64] {
        &self.right
    }

    pub fn total(&self) -> &[f64] {
        &self.total
    }

    /// Trapezoid integral of the total over the time grid.
    pub fn integral(&self) -> f64 {
        self.times
            .integrate(&self.total)
            .expect("total length matches the grid by construction")
    }

    /// Location and height of the global maximum of the total.
    pub fn peak(&self) -> (f64, f64) {
        refined_peak(&self.times.nodes(), &self.total)
    }
}

/// Global maximum of sampled values, refined by the parabola through the
/// peak node and its two neighbors. Falls back to the raw node value at the
/// grid ends or when the three points are not strictly concave.
pub fn refined_peak(times: &[f64], values: &[f64]) -> (f64, f64) {
    assert_eq!(times.len(), values.len());
    if values.is_empty() {
        return (f64::NAN, 0.0);
    }
    let mut im = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[im] {
            im = i;
        }
    }
    if im == 0 || im + 1 == values.len() {
        return (times[im], values[im]);
    }
    let (t0, t1, t2) = (times[im - 1], times[im], times[im + 1]);
    let (y0, y1, y2) = (values[im - 1], values[im], values[im + 1]);
    let d1 = (y1 - y0) / (t1 - t0);
    let curvature = ((y2 - y1) / (t2 - t1) - d1) / (t2 - t0);
    if !(curvature < 0.0) {
        return (t1, y1);
    }
    let t_star = (0.5 * (t0 + t1) - d1 / (2.0 * curvature)).clamp(t0, t2);
    let height = y0 + d1 * (t_star - t0) + curvature * (t_star - t0) * (t_star - t1);
    (t_star, height)
}

fn check_arrival_point(x: f64) -> Result<(), Error> {
    if !x.is_finite() {
        return Err(Error::NonFinitePosition(x));
    }
    Ok(())
}

fn check_instant(t: f64) -> Result<(), Error> {
    if !t.is_finite() {
        return Err(Error::BadField(format!("non-finite arrival instant {t}")));
    }
    Ok(())
}

/// The |p|^{1/2} kink at p = 0 must sit on a panel boundary whenever the
/// grid carries both momentum signs.
fn check_sided_grid(grid: &MomentumGrid) -> Result<(), Error> {
    let nodes = grid.nodes();
    if nodes[0] < 0.0 && nodes[nodes.len() - 1] > 0.0 && !grid.is_split_at_zero() {
        return Err(Error::GridNotSplitAtZero);
    }
    Ok(())
}

fn kijowski_scale(units: &PhysicalUnits) -> f64 {
    1.0 / (2.0 * PI * units.hbar).sqrt()
}

/// Arrival amplitude of a freely moving packet at (x, t):
/// sum over Theta(alpha p) of w (|p|/m)^{1/2} (2 pi hbar)^{-1/2}
/// e^{i p x / hbar} phi(p) e^{-i E_p (t - t_ref) / hbar}.
pub fn kijowski_overlap(
    phi: &AsymptoteAmplitude,
    side: Side,
    x: f64,
    t: f64,
    units: &PhysicalUnits,
) -> Result<Complex64, Error> {
    check_sided_grid(phi.grid())?;
    check_arrival_point(x)?;
    check_instant(t)?;
    let dt = t - phi.reference_time();
    let hbar = units.hbar;
    let mut acc = Complex64::ZERO;
    for ((w, &p), v) in phi
        .grid()
        .weights()
        .iter()
        .zip(phi.grid().nodes())
        .zip(phi.values())
    {
        if !side.admits(p) {
            continue;
        }
        let mag = w * (p.abs() / units.mass).sqrt();
        let angle = (p * x - units.kinetic_energy(p) * dt) / hbar;
        acc += mag * Complex64::from_polar(1.0, angle) * v;
    }
    Ok(acc * kijowski_scale(units))
}

/// Everything about one side's overlap that does not depend on the instant:
/// the phase advances at `rates` and the amplitudes sit in `prefactors`, so
/// the overlap at elapsed time dt is sum of pref e^{-i rate dt}.
struct SidedPhasors {
    rates: Vec<f64>,
    prefactors: Vec<Complex64>,
}

impl SidedPhasors {
    fn overlap_sqr(&self, dt: f64) -> f64 {
        let mut acc = Complex64::ZERO;
        for (rate, pref) in self.rates.iter().zip(&self.prefactors) {
            acc += pref * Complex64::from_polar(1.0, -rate * dt);
        }
        acc.norm_sqr()
    }
}

fn kijowski_phasors(
    phi: &AsymptoteAmplitude,
    side: Side,
    x: f64,
    units: &PhysicalUnits,
) -> SidedPhasors {
    let scale = kijowski_scale(units);
    let hbar = units.hbar;
    let mut rates = Vec::new();
    let mut prefactors = Vec::new();
    for ((w, &p), v) in phi
        .grid()
        .weights()
        .iter()
        .zip(phi.grid().nodes())
        .zip(phi.values())
    {
        if !side.admits(p) || v.norm_sqr() == 0.0 {
            continue;
        }
        rates.push(units.kinetic_energy(p) / hbar);
        prefactors.push(
            scale
                * w
                * (p.abs() / units.mass).sqrt()
                * Complex64::from_polar(1.0, p * x / hbar)
                * v,
        );
    }
    SidedPhasors { rates, prefactors }
}

fn kijowski_components(
    phi: &AsymptoteAmplitude,
    x: f64,
    times: &TimeGrid,
    units: &PhysicalUnits,
) -> Result<(Vec<f64>, Vec<f64>), Error> {
    check_sided_grid(phi.grid())?;
    check_arrival_point(x)?;
    let lp = kijowski_phasors(phi, Side::Left, x, units);
    let rp = kijowski_phasors(phi, Side::Right, x, units);
    let t_ref = phi.reference_time();
    let mut left = Vec::with_capacity(times.count);
    let mut right = Vec::with_capacity(times.count);
    for i in 0..times.count {
        let dt = times.node(i) - t_ref;
        left.push(lp.overlap_sqr(dt));
        right.push(rp.overlap_sqr(dt));
    }
    Ok((left, right))
}

/// Kijowski's free-motion arrival distribution of the packet at x.
pub fn kijowski(
    phi: &AsymptoteAmplitude,
    x: f64,
    times: &TimeGrid,
    units: &PhysicalUnits,
) -> Result<DistributionSeries, Error> {
    let (left, right) = kijowski_components(phi, x, times, units)?;
    DistributionSeries::new(
        SeriesKind::Crossing(CrossingKind::KijowskiFree),
        x,
        *times,
        left,
        right,
    )
}

/// Second proposal: Kijowski's distribution of the free asymptote selected
/// by the branch; Plus takes the incoming packet unchanged, Minus maps it
/// through the scattering matrix first.
pub fn pi2(
    phi_in: &AsymptoteAmplitude,
    pot: &PiecewisePotential,
    branch: Branch,
    x: f64,
    times: &TimeGrid,
    units: &PhysicalUnits,
) -> Result<DistributionSeries, Error> {
    let (kind, comps) = match branch {
        Branch::Plus => (
            CrossingKind::Proposal2Plus,
            kijowski_components(phi_in, x, times, units)?,
        ),
        Branch::Minus => {
            let phi_out = outgoing_asymptote(phi_in, pot, units)?;
            (
                CrossingKind::Proposal2Minus,
                kijowski_components(&phi_out, x, times, units)?,
            )
        }
    };
    DistributionSeries::new(SeriesKind::Crossing(kind), x, *times, comps.0, comps.1)
}

fn pi3_components(
    phi: &AsymptoteAmplitude,
    pot: &PiecewisePotential,
    branch: Branch,
    x: f64,
    times: &TimeGrid,
    units: &PhysicalUnits,
) -> Result<(Vec<f64>, Vec<f64>), Error> {
    check_sided_grid(phi.grid())?;
    check_arrival_point(x)?;
    let nodes = phi.grid().nodes();
    let weights = phi.grid().weights();
    let values = phi.values();
    let hbar = units.hbar;
    let mut lp = SidedPhasors {
        rates: Vec::new(),
        prefactors: Vec::new(),
    };
    let mut rp = SidedPhasors {
        rates: Vec::new(),
        prefactors: Vec::new(),
    };
    for i in support_indices(values) {
        let p = nodes[i];
        if values[i].norm_sqr() == 0.0 {
            continue;
        }
        let state = match branch {
            Branch::Plus => StationaryState::outgoing(p, pot, units)?,
            Branch::Minus => StationaryState::incoming(p, pot, units)?,
        };
        let at_x = state.eval(x)?;
        // The scattering eigenfunction replaces the plane-wave factor and
        // already carries the (2 pi hbar)^{-1/2} normalization.
        let pref = weights[i]
            * (p.abs() / units.mass).sqrt()
            * at_x.value.conj()
            * values[i].conj();
        let bucket = if p > 0.0 { &mut lp } else { &mut rp };
        bucket.rates.push(-units.kinetic_energy(p) / hbar);
        bucket.prefactors.push(pref);
    }
    let t_ref = phi.reference_time();
    let mut left = Vec::with_capacity(times.count);
    let mut right = Vec::with_capacity(times.count);
    for i in 0..times.count {
        let dt = times.node(i) - t_ref;
        left.push(lp.overlap_sqr(dt));
        right.push(rp.overlap_sqr(dt));
    }
    Ok((left, right))
}

/// Third proposal: overlap with crossing states built in the scattering
/// basis, a single momentum quadrature per instant and side. The Plus
/// branch pairs outgoing-type eigenfunctions with the incoming asymptote,
/// the Minus branch incoming-type eigenfunctions with the outgoing one.
pub fn pi3(
    phi_in: &AsymptoteAmplitude,
    pot: &PiecewisePotential,
    branch: Branch,
    x: f64,
    times: &TimeGrid,
    units: &PhysicalUnits,
) -> Result<DistributionSeries, Error> {
    let (kind, comps) = match branch {
        Branch::Plus => (
            CrossingKind::Proposal3Plus,
            pi3_components(phi_in, pot, branch, x, times, units)?,
        ),
        Branch::Minus => {
            let phi_out = outgoing_asymptote(phi_in, pot, units)?;
            (
                CrossingKind::Proposal3Minus,
                pi3_components(&phi_out, pot, branch, x, times, units)?,
            )
        }
    };
    DistributionSeries::new(SeriesKind::Crossing(kind), x, *times, comps.0, comps.1)
}

/// First proposal: the state evolved under the full Hamiltonian is sampled
/// on the spatial window, decomposed over plane waves, and contracted with
/// the free crossing state at x, instant by instant. The window transform
/// and the overlap are fused into one time-independent kernel per side;
/// the result is the same finite quadrature as running the three steps
/// separately.
pub fn pi1(
    phi_in: &AsymptoteAmplitude,
    pot: &PiecewisePotential,
    spatial: &SpatialGrid,
    x: f64,
    times: &TimeGrid,
    units: &PhysicalUnits,
) -> Result<DistributionSeries, Error> {
    let sweep = CrossingSweep::run(phi_in, pot, spatial, &[x], times, true, false, units)?;
    let (left, right) = sweep.pi1.into_iter().next().expect("one arrival point");
    DistributionSeries::new(
        SeriesKind::Crossing(CrossingKind::Proposal1),
        x,
        *times,
        left,
        right,
    )
}

/// Shared stationary-state sweep behind the first-proposal series and the
/// flux: one pass over the packet's momentum support serves every
/// requested arrival point.
struct CrossingSweep {
    /// Per arrival point: (left, right) first-proposal components.
    pi1: Vec<(Vec<f64>, Vec<f64>)>,
    /// Per arrival point: signed flux J over the time grid.
    flux: Vec<Vec<f64>>,
    /// Largest field amplitude seen at the window edges, relative to the
    /// initial packet peak.
    edge_ratio: f64,
}

impl CrossingSweep {
    /// Time-independent kernel fusing the window plane-wave decomposition
    /// with the free crossing-state overlap at x for one side:
    /// W_j = dx tau_j (2 pi hbar)^{-1} sum over admitted q of
    /// w_q (|p_q|/m)^{1/2} e^{i p_q (x - x_j) / hbar},
    /// where tau halves the trapezoid endpoints.
    fn overlap_kernel(
        grid: &MomentumGrid,
        spatial: &SpatialGrid,
        side: Side,
        x: f64,
        units: &PhysicalUnits,
    ) -> Vec<Complex64> {
        let hbar = units.hbar;
        let n = spatial.len();
        let dx = spatial.dx();
        let x0 = spatial.x_min();
        let mut kernel = vec![Complex64::ZERO; n];
        for (w, &p) in grid.weights().iter().zip(grid.nodes()) {
            if !side.admits(p) {
                continue;
            }
            let mag = w * (p.abs() / units.mass).sqrt();
            let step = Complex64::from_polar(1.0, -p * dx / hbar);
            let mut phase = Complex64::ZERO;
            for (j, slot) in kernel.iter_mut().enumerate() {
                if j % PHASE_REFRESH == 0 {
                    phase = Complex64::from_polar(1.0, p * (x - (x0 + j as f64 * dx)) / hbar);
                }
                *slot += mag * phase;
                phase *= step;
            }
        }
        let scale = dx / (2.0 * PI * hbar);
        for slot in kernel.iter_mut() {
            *slot *= scale;
        }
        kernel[0] *= 0.5;
        kernel[n - 1] *= 0.5;
        kernel
    }

    #[allow(clippy::too_many_arguments)]
    fn run(
        phi: &AsymptoteAmplitude,
        pot: &PiecewisePotential,
        spatial: &SpatialGrid,
        xs: &[f64],
        times: &TimeGrid,
        want_pi1: bool,
        want_flux: bool,
        units: &PhysicalUnits,
    ) -> Result<Self, Error> {
        check_sided_grid(phi.grid())?;
        for &x in xs {
            check_arrival_point(x)?;
        }
        let t_ref = phi.reference_time();
        let dt_extreme = (times.t_min - t_ref).abs().max((times.t_max - t_ref).abs());
        check_synthesis_resolution(phi, spatial, dt_extreme, units)?;
        let hbar = units.hbar;
        let grid = phi.grid();
        if want_pi1 {
            // The fused kernel pairs every grid momentum against every
            // field momentum, so the window must resolve twice the band.
            let p_abs = grid.min().abs().max(grid.max().abs());
            let needed = 2.0 * p_abs / hbar;
            let allowed = PI / spatial.dx();
            if needed >= allowed {
                return Err(Error::UnderResolved { needed, allowed });
            }
        }

        let support = support_indices(phi.values());
        let nodes = grid.nodes();
        let weights = grid.weights();
        let values = phi.values();
        let ns = support.len();
        let nx = xs.len();

        let kernels: Vec<Vec<Complex64>> = if want_pi1 {
            xs.iter()
                .flat_map(|&x| {
                    [
                        Self::overlap_kernel(grid, spatial, Side::Left, x, units),
                        Self::overlap_kernel(grid, spatial, Side::Right, x, units),
                    ]
                })
                .collect()
        } else {
            Vec::new()
        };

        // Per support node: contraction of its eigenfunction with each
        // kernel, point values for the flux, and the window-edge values.
        let mut contracted = vec![Complex64::ZERO; 2 * nx * ns];
        let mut flux_value = vec![Complex64::ZERO; nx * ns];
        let mut flux_deriv = vec![Complex64::ZERO; nx * ns];
        let mut edge_lo = vec![Complex64::ZERO; ns];
        let mut edge_hi = vec![Complex64::ZERO; ns];
        let mut base = Vec::with_capacity(ns);
        let mut rates = Vec::with_capacity(ns);
        let n = spatial.len();
        for (si, &i) in support.iter().enumerate() {
            let p = nodes[i];
            let state = StationaryState::outgoing(p, pot, units)?;
            base.push(weights[i] * values[i]);
            rates.push(units.kinetic_energy(p) / hbar);
            if want_pi1 {
                let boundaries = state.boundaries();
                let mut region = 0usize;
                let mut row = Vec::with_capacity(n);
                for j in 0..n {
                    let xj = spatial.node(j);
                    while region < boundaries.len() && boundaries[region] <= xj {
                        region += 1;
                    }
                    row.push(state.eval_in_region(region, xj).0);
                }
                edge_lo[si] = row[0];
                edge_hi[si] = row[n - 1];
                for (ki, kernel) in kernels.iter().enumerate() {
                    let mut acc = Complex64::ZERO;
                    for (kj, vj) in kernel.iter().zip(&row) {
                        acc += kj * vj;
                    }
                    contracted[ki * ns + si] = acc;
                }
            }
            if want_flux {
                for (xi, &x) in xs.iter().enumerate() {
                    let at_x = state.eval(x)?;
                    flux_value[xi * ns + si] = at_x.value;
                    flux_deriv[xi * ns + si] = at_x.derivative;
                }
            }
        }

        let mut pi1 = vec![(Vec::new(), Vec::new()); if want_pi1 { nx } else { 0 }];
        for (l, r) in pi1.iter_mut() {
            l.reserve(times.count);
            r.reserve(times.count);
        }
        let mut flux = vec![Vec::with_capacity(times.count); if want_flux { nx } else { 0 }];
        let mut coeff = vec![Complex64::ZERO; ns];
        let mut max_edge = 0.0f64;
        for ti in 0..times.count {
            let dt = times.node(ti) - t_ref;
            for si in 0..ns {
                coeff[si] = base[si] * Complex64::from_polar(1.0, -rates[si] * dt);
            }
            if want_pi1 {
                for (xi, (l, r)) in pi1.iter_mut().enumerate() {
                    let mut acc_l = Complex64::ZERO;
                    let mut acc_r = Complex64::ZERO;
                    let gl = &contracted[2 * xi * ns..(2 * xi + 1) * ns];
                    let gr = &contracted[(2 * xi + 1) * ns..(2 * xi + 2) * ns];
                    for si in 0..ns {
                        acc_l += coeff[si] * gl[si];
                        acc_r += coeff[si] * gr[si];
                    }
                    l.push(acc_l.norm_sqr());
                    r.push(acc_r.norm_sqr());
                }
                let mut lo = Complex64::ZERO;
                let mut hi = Complex64::ZERO;
                for si in 0..ns {
                    lo += coeff[si] * edge_lo[si];
                    hi += coeff[si] * edge_hi[si];
                }
                max_edge = max_edge.max(lo.norm()).max(hi.norm());
            }
            if want_flux {
                for (xi, series) in flux.iter_mut().enumerate() {
                    let fv = &flux_value[xi * ns..(xi + 1) * ns];
                    let fd = &flux_deriv[xi * ns..(xi + 1) * ns];
                    let mut v = Complex64::ZERO;
                    let mut d = Complex64::ZERO;
                    for si in 0..ns {
                        v += coeff[si] * fv[si];
                        d += coeff[si] * fd[si];
                    }
                    series.push(hbar / units.mass * (v.conj() * d).im);
                }
            }
        }

        Ok(Self {
            pi1,
            flux,
            edge_ratio: max_edge,
        })
    }
}

/// Per-run diagnostics of the packet-as-asymptote identification: both
/// numbers must be small for the scenario to be meaningful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallnessReport {
    /// Norm fraction the incoming packet carries at negative momenta.
    pub negative_momentum_fraction: f64,
    /// Leftmost potential edge, when the potential has one.
    pub barrier_edge: Option<f64>,
    /// Initial packet amplitude |psi(edge, 0)| there, 0 for a free run.
    pub edge_amplitude: f64,
}

/// Momentum grid sized for a scenario: it covers the packet's 8-sigma
/// band and its phase budget counts the window extent, the ballistic sweep
/// p_max t_max / m, and the extra winding accumulated across each potential
/// segment.
pub fn scenario_momentum_grid(
    packet: &GaussianSpec,
    pot: &PiecewisePotential,
    spatial: &SpatialGrid,
    t_max: f64,
    units: &PhysicalUnits,
) -> Result<MomentumGrid, Error> {
    if !t_max.is_finite() {
        return Err(Error::BadTimeGrid);
    }
    let p_max = packet.p0.abs() + packet.support_halfwidth(units);
    let x_extent = spatial.x_min().abs().max(spatial.x_max().abs());
    let rate = (x_extent + p_max * t_max.abs() / units.mass) / units.hbar;
    let mut phase = rate * 2.0 * p_max;
    let e_max = units.kinetic_energy(p_max);
    for seg in pot.segments() {
        phase +=
            2.0 * (seg.right - seg.left) * (2.0 * units.mass * (e_max + seg.height.abs())).sqrt()
                / units.hbar;
    }
    MomentumGrid::symmetric(p_max, phase)
}

/// Scenario state shared by every series of a run: the sized momentum grid,
/// the incoming asymptote sampled on it, and the spatial window used by the
/// explicit-field route.
#[derive(Debug, Clone)]
pub struct ScenarioContext {
    units: PhysicalUnits,
    packet: GaussianSpec,
    pot: PiecewisePotential,
    spatial: SpatialGrid,
    phi_in: AsymptoteAmplitude,
}

/// Output of a bundle run: the requested series plus the window-truncation
/// diagnostic of the explicit-field sweep (0 when no such sweep ran).
#[derive(Debug, Clone)]
pub struct SeriesBundle {
    pub series: Vec<DistributionSeries>,
    pub window_edge_ratio: f64,
}

impl ScenarioContext {
    /// Build a context with an automatically sized momentum grid.
    pub fn new(
        packet: GaussianSpec,
        pot: PiecewisePotential,
        spatial: SpatialGrid,
        t_max: f64,
        units: PhysicalUnits,
    ) -> Result<Self, Error> {
        let grid = scenario_momentum_grid(&packet, &pot, &spatial, t_max, &units)?;
        Self::with_momentum_grid(packet, pot, spatial, grid, units)
    }

    /// Build a context on a caller-chosen momentum grid.
    pub fn with_momentum_grid(
        packet: GaussianSpec,
        pot: PiecewisePotential,
        spatial: SpatialGrid,
        grid: MomentumGrid,
        units: PhysicalUnits,
    ) -> Result<Self, Error> {
        let phi_in = gaussian_asymptote(&packet, &grid, &units)?;
        Ok(Self {
            units,
            packet,
            pot,
            spatial,
            phi_in,
        })
    }

    pub fn units(&self) -> &PhysicalUnits {
        &self.units
    }

    pub fn packet(&self) -> &GaussianSpec {
        &self.packet
    }

    pub fn potential(&self) -> &PiecewisePotential {
        &self.pot
    }

    pub fn spatial(&self) -> &SpatialGrid {
        &self.spatial
    }

    pub fn momentum_grid(&self) -> &MomentumGrid {
        self.phi_in.grid()
    }

    pub fn phi_in(&self) -> &AsymptoteAmplitude {
        &self.phi_in
    }

    /// Scattering-matrix image of the incoming packet.
    pub fn outgoing(&self) -> Result<AsymptoteAmplitude, Error> {
        outgoing_asymptote(&self.phi_in, &self.pot, &self.units)
    }

    pub fn smallness(&self) -> SmallnessReport {
        let edge = self.pot.segments().first().map(|s| s.left);
        SmallnessReport {
            negative_momentum_fraction: negative_fraction(&self.phi_in),
            barrier_edge: edge,
            edge_amplitude: edge
                .map_or(0.0, |e| self.packet.position_amplitude(e, &self.units).norm()),
        }
    }

    /// Compute every requested series at every arrival point, sharing the
    /// outgoing asymptote and one stationary-state sweep across all of
    /// them. Series are returned in request order, arrival points outer.
    pub fn series_bundle(
        &self,
        xs: &[f64],
        times: &TimeGrid,
        kinds: &[SeriesKind],
    ) -> Result<SeriesBundle, Error> {
        if kinds.contains(&SeriesKind::Classical) {
            return Err(Error::UnsupportedKind(
                "classical series need a sampled ensemble; build them with the classical module"
                    .into(),
            ));
        }
        let has = |k: CrossingKind| kinds.contains(&SeriesKind::Crossing(k));
        let want_pi1 = has(CrossingKind::Proposal1);
        let want_flux = kinds.contains(&SeriesKind::Flux);
        let phi_out = if has(CrossingKind::Proposal2Minus) || has(CrossingKind::Proposal3Minus) {
            Some(self.outgoing()?)
        } else {
            None
        };
        let sweep = if want_pi1 || want_flux {
            Some(CrossingSweep::run(
                &self.phi_in,
                &self.pot,
                &self.spatial,
                xs,
                times,
                want_pi1,
                want_flux,
                &self.units,
            )?)
        } else {
            None
        };
        let mut series = Vec::with_capacity(xs.len() * kinds.len());
        for (xi, &x) in xs.iter().enumerate() {
            for kind in kinds {
                let one = match *kind {
                    SeriesKind::Crossing(CrossingKind::KijowskiFree) => {
                        kijowski(&self.phi_in, x, times, &self.units)?
                    }
                    SeriesKind::Crossing(CrossingKind::Proposal1) => {
                        let (left, right) =
                            sweep.as_ref().expect("sweep ran").pi1[xi].clone();
                        DistributionSeries::new(
                            SeriesKind::Crossing(CrossingKind::Proposal1),
                            x,
                            *times,
                            left,
                            right,
                        )?
                    }
                    SeriesKind::Crossing(CrossingKind::Proposal2Plus) => {
                        pi2(&self.phi_in, &self.pot, Branch::Plus, x, times, &self.units)?
                    }
                    SeriesKind::Crossing(CrossingKind::Proposal2Minus) => {
                        let phi = phi_out.as_ref().expect("outgoing asymptote ready");
                        let (left, right) = kijowski_components(phi, x, times, &self.units)?;
                        DistributionSeries::new(
                            SeriesKind::Crossing(CrossingKind::Proposal2Minus),
                            x,
                            *times,
                            left,
                            right,
                        )?
                    }
                    SeriesKind::Crossing(CrossingKind::Proposal3Plus) => pi3(
                        &self.phi_in,
                        &self.pot,
                        Branch::Plus,
                        x,
                        times,
                        &self.units,
                    )?,
                    SeriesKind::Crossing(CrossingKind::Proposal3Minus) => {
                        let phi = phi_out.as_ref().expect("outgoing asymptote ready");
                        let (left, right) =
                            pi3_components(phi, &self.pot, Branch::Minus, x, times, &self.units)?;
                        DistributionSeries::new(
                            SeriesKind::Crossing(CrossingKind::Proposal3Minus),
                            x,
                            *times,
                            left,
                            right,
                        )?
                    }
                    SeriesKind::Flux => {
                        let j = &sweep.as_ref().expect("sweep ran").flux[xi];
                        let left: Vec<f64> = j.iter().map(|v| v.max(0.0)).collect();
                        let right: Vec<f64> = j.iter().map(|v| v.min(0.0)).collect();
                        DistributionSeries::new(SeriesKind::Flux, x, *times, left, right)?
                    }
                    SeriesKind::Classical => unreachable!("rejected above"),
                };
                series.push(one);
            }
        }
        let packet_peak = (2.0 * PI * self.packet.dx * self.packet.dx).powf(-0.25);
        let window_edge_ratio = sweep.map_or(0.0, |s| s.edge_ratio / packet_peak);
        Ok(SeriesBundle {
            series,
            window_edge_ratio,
        })
    }
}
