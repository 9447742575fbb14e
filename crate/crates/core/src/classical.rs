//! Classical arrival-time reference: ballistic point particles traced
//! through the piecewise-constant potential, and kernel-density estimates
//! of their crossing times.
//!
//! A particle moves at constant velocity inside each region. At a region
//! boundary it either transmits with the momentum that conserves energy or,
//! when the step is too high, reflects elastically; the threshold case
//! reflects so the dynamics stay deterministic.

use std::f64::consts::PI;

use crate::arrivals::{DistributionSeries, SeriesKind, Side};
use crate::dynamics::GaussianSpec;
use crate::error::Error;
use crate::grid::TimeGrid;
use crate::scattering::PiecewisePotential;
use crate::units::PhysicalUnits;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

/// Beyond this many bandwidths a kernel contributes below 1e-16 of its
/// mass and is skipped.
const KERNEL_REACH: f64 = 8.7;

/// Neumaier-compensated sum; keeps the weight-normalization check honest
/// for ensembles of millions of samples.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + comp
}

/// Weighted phase-space samples (position, momentum, weight) with weights
/// normalized to unit total mass.
#[derive(Debug, Clone)]
pub struct ClassicalEnsemble {
    samples: Vec<(f64, f64, f64)>,
}

impl ClassicalEnsemble {
    pub fn new(samples: Vec<(f64, f64, f64)>) -> Result<Self, Error> {
        if samples.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        for &(x, p, w) in &samples {
            if !(x.is_finite() && p.is_finite() && w.is_finite()) {
                return Err(Error::BadEnsemble("non-finite sample".into()));
            }
            if w <= 0.0 {
                return Err(Error::BadEnsemble(format!("non-positive weight {w}")));
            }
        }
        let total = compensated_sum(samples.iter().map(|s| s.2));
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::BadEnsemble(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[(f64, f64, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Draw an equal-weight ensemble from the packet's Wigner-matched phase
/// space: x ~ N(x0, dx), p ~ N(p0, hbar/(2 dx)), independently.
pub fn sample_gaussian_ensemble(
    spec: &GaussianSpec,
    count: usize,
    seed: u64,
    units: &PhysicalUnits,
) -> Result<ClassicalEnsemble, Error> {
    if count == 0 {
        return Err(Error::EmptySampleCount);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let xs = Normal::new(spec.x0, spec.dx)
        .map_err(|e| Error::BadPacket(format!("position law: {e}")))?;
    let ps = Normal::new(spec.p0, spec.momentum_width(units))
        .map_err(|e| Error::BadPacket(format!("momentum law: {e}")))?;
    let w = 1.0 / count as f64;
    let samples = (0..count)
        .map(|_| (xs.sample(&mut rng), ps.sample(&mut rng), w))
        .collect();
    ClassicalEnsemble::new(samples)
}

/// One detector crossing of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalEvent {
    pub time: f64,
    pub side: Side,
    pub weight: f64,
}

/// Piecewise-ballistic trajectory from (x, p): returns the detector
/// crossings before `t_max` and the phase-space point reached at `t_max`
/// (or wherever the particle stops moving).
fn trace_one(
    mut x: f64,
    mut p: f64,
    boundaries: &[f64],
    heights: &[f64],
    x_target: f64,
    t_max: f64,
    mass: f64,
) -> (f64, f64, Vec<(f64, Side)>) {
    let mut events = Vec::new();
    let mut t = 0.0;
    // Region = number of boundaries at or left of x; a particle exactly on
    // a boundary is handled by a zero-length first leg.
    let mut region = boundaries.partition_point(|b| *b <= x);
    while t < t_max {
        let v = p / mass;
        if v == 0.0 {
            return (x, p, events);
        }
        let side = if v > 0.0 { Side::Left } else { Side::Right };
        let stop = if v > 0.0 {
            boundaries.get(region).copied()
        } else {
            region.checked_sub(1).map(|r| boundaries[r])
        };
        let leg_end = stop.unwrap_or(if v > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY });
        let strictly_inside = if v > 0.0 {
            x < x_target && x_target < leg_end
        } else {
            leg_end < x_target && x_target < x
        };
        if strictly_inside {
            let t_cross = t + (x_target - x) / v;
            if t_cross <= t_max {
                events.push((t_cross, side));
            }
        }
        let Some(b) = stop else {
            // Unbounded leg: coast to t_max.
            return (x + v * (t_max - t), p, events);
        };
        let t_stop = t + (b - x) / v;
        if t_stop > t_max {
            return (x + v * (t_max - t), p, events);
        }
        let next_region = if v > 0.0 { region + 1 } else { region - 1 };
        let step = heights[next_region] - heights[region];
        let residual = p * p - 2.0 * mass * step;
        if residual > 0.0 {
            if x_target == b && t_stop <= t_max {
                events.push((t_stop, side));
            }
            p = v.signum() * residual.sqrt();
            region = next_region;
        } else {
            p = -p;
        }
        x = b;
        t = t_stop;
    }
    (x, p, events)
}

/// Trace every ensemble member to `t_max` and collect its crossings of
/// `x_target`, weighted by the sample weight.
pub fn trace_arrivals(
    ensemble: &ClassicalEnsemble,
    pot: &PiecewisePotential,
    x_target: f64,
    t_max: f64,
    units: &PhysicalUnits,
) -> Result<Vec<ArrivalEvent>, Error> {
    if !x_target.is_finite() {
        return Err(Error::NonFinitePosition(x_target));
    }
    if !t_max.is_finite() || t_max <= 0.0 {
        return Err(Error::BadTimeGrid);
    }
    let (boundaries, heights) = pot.partition();
    let mut events = Vec::new();
    for &(x, p, w) in ensemble.samples() {
        let (_, _, crossings) =
            trace_one(x, p, &boundaries, &heights, x_target, t_max, units.mass);
        events.extend(crossings.into_iter().map(|(time, side)| ArrivalEvent {
            time,
            side,
            weight: w,
        }));
    }
    Ok(events)
}

/// Gaussian kernel-density estimate of the arrival events on the time
/// grid, split by crossing side. An empty event list yields the legal
/// all-zero series.
pub fn classical_distribution(
    events: &[ArrivalEvent],
    x: f64,
    times: &TimeGrid,
    bandwidth: f64,
) -> Result<DistributionSeries, Error> {
    if !bandwidth.is_finite() || bandwidth <= 0.0 {
        return Err(Error::BadBandwidth(bandwidth));
    }
    let nodes = times.nodes();
    let mut left = vec![0.0; times.count];
    let mut right = vec![0.0; times.count];
    let norm = 1.0 / ((2.0 * PI).sqrt() * bandwidth);
    let reach = KERNEL_REACH * bandwidth;
    let dt = times.dt();
    for event in events {
        if !event.time.is_finite() || !(event.weight > 0.0) {
            return Err(Error::BadEnsemble("malformed arrival event".into()));
        }
        let bucket = match event.side {
            Side::Left => &mut left,
            Side::Right => &mut right,
        };
        let lo = ((event.time - reach - times.t_min) / dt).floor().max(0.0) as usize;
        let hi = (((event.time + reach - times.t_min) / dt).ceil() as isize)
            .clamp(0, times.count as isize - 1) as usize;
        for i in lo..=hi.min(times.count - 1) {
            let z = (nodes[i] - event.time) / bandwidth;
            bucket[i] += event.weight * norm * (-0.5 * z * z).exp();
        }
    }
    DistributionSeries::new(SeriesKind::Classical, x, *times, left, right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn natural() -> PhysicalUnits {
        PhysicalUnits::natural()
    }

    fn barrier() -> PiecewisePotential {
        PiecewisePotential::square_barrier(10.0, 0.0, 10.0).unwrap()
    }

    fn single(x: f64, p: f64) -> ClassicalEnsemble {
        ClassicalEnsemble::new(vec![(x, p, 1.0)]).unwrap()
    }

    #[test]
    fn ensemble_validation_rules() {
        assert!(matches!(
            ClassicalEnsemble::new(Vec::new()),
            Err(Error::EmptyEnsemble)
        ));
        assert!(matches!(
            ClassicalEnsemble::new(vec![(0.0, 1.0, 0.0)]),
            Err(Error::BadEnsemble(_))
        ));
        assert!(matches!(
            ClassicalEnsemble::new(vec![(0.0, 1.0, 0.6), (0.0, 1.0, 0.6)]),
            Err(Error::BadEnsemble(_))
        ));
        assert!(matches!(
            ClassicalEnsemble::new(vec![(f64::NAN, 1.0, 1.0)]),
            Err(Error::BadEnsemble(_))
        ));
        let ok = ClassicalEnsemble::new(vec![(0.0, 1.0, 0.25); 4]).unwrap();
        assert_eq!(ok.len(), 4);
        assert!(!ok.is_empty());
    }

    #[test]
    fn gaussian_sampling_reproduces_the_packet_moments() {
        let units = natural();
        let spec = GaussianSpec::new(-6.0, 6.0, 1.0).unwrap();
        let n = 100_000usize;
        let ensemble = sample_gaussian_ensemble(&spec, n, 7, &units).unwrap();
        assert_eq!(ensemble.len(), n);
        let inv = 1.0 / n as f64;
        let mean_x: f64 = ensemble.samples().iter().map(|s| s.0).sum::<f64>() * inv;
        let mean_p: f64 = ensemble.samples().iter().map(|s| s.1).sum::<f64>() * inv;
        let var_x: f64 = ensemble
            .samples()
            .iter()
            .map(|s| (s.0 - mean_x) * (s.0 - mean_x))
            .sum::<f64>()
            * inv;
        let var_p: f64 = ensemble
            .samples()
            .iter()
            .map(|s| (s.1 - mean_p) * (s.1 - mean_p))
            .sum::<f64>()
            * inv;
        // Four standard errors of the respective estimators.
        let root_n = (n as f64).sqrt();
        assert_abs_diff_eq!(mean_x, -6.0, epsilon = 4.0 / root_n);
        assert_abs_diff_eq!(mean_p, 6.0, epsilon = 4.0 * 0.5 / root_n);
        assert_abs_diff_eq!(var_x, 1.0, epsilon = 4.0 * 2f64.sqrt() / root_n);
        assert_abs_diff_eq!(var_p, 0.25, epsilon = 4.0 * 2f64.sqrt() * 0.25 / root_n);
        // Determinism under the same seed: the draw stream is identical,
        // only the per-sample weight depends on the count.
        let again = sample_gaussian_ensemble(&spec, 100, 7, &units).unwrap();
        for (a, b) in ensemble.samples()[..100].iter().zip(again.samples()) {
            assert_eq!((a.0, a.1), (b.0, b.1));
        }
        assert!(matches!(
            sample_gaussian_ensemble(&spec, 0, 7, &units),
            Err(Error::EmptySampleCount)
        ));
    }

    #[test]
    fn free_crossing_time_is_exact() {
        let units = natural();
        let events = trace_arrivals(
            &single(-6.0, 6.0),
            &PiecewisePotential::free(),
            -2.0,
            10.0,
            &units,
        )
        .unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].side, Side::Left);
        assert_abs_diff_eq!(events[0].time, 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(events[0].weight, 1.0);
    }

    #[test]
    fn barrier_crossings_follow_the_slowed_interior() {
        let units = natural();
        // Over the step the momentum drops from 6 to 4, so the detector
        // behind the barrier fires at 1 + 10/4 + 2/6.
        let events = trace_arrivals(&single(-6.0, 6.0), &barrier(), 12.0, 10.0, &units).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].side, Side::Left);
        assert_abs_diff_eq!(events[0].time, 23.0 / 6.0, epsilon = 1e-12);

        let inside = trace_arrivals(&single(-6.0, 6.0), &barrier(), 5.0, 10.0, &units).unwrap();
        assert_eq!(inside.len(), 1);
        assert_abs_diff_eq!(inside[0].time, 1.0 + 5.0 / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn low_energy_trajectory_reflects_and_recrosses() {
        let units = natural();
        let events = trace_arrivals(&single(-9.0, 3.0), &barrier(), -5.0, 14.0, &units).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].side, Side::Left);
        assert_abs_diff_eq!(events[0].time, 4.0 / 3.0, epsilon = 1e-12);
        assert_eq!(events[1].side, Side::Right);
        assert_abs_diff_eq!(events[1].time, 14.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn threshold_energy_reflects_deterministically() {
        let units = natural();
        // p^2 = 20.25 exactly matches 2 m V for V = 10.125, and the
        // threshold branch must reflect.
        let pot = PiecewisePotential::square_barrier(10.125, 0.0, 10.0).unwrap();
        let events = trace_arrivals(&single(-9.0, 4.5), &pot, -2.0, 14.0, &units).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].side, Side::Left);
        assert_abs_diff_eq!(events[0].time, 7.0 / 4.5, epsilon = 1e-12);
        assert_eq!(events[1].side, Side::Right);
        assert_abs_diff_eq!(events[1].time, 2.0 + 2.0 / 4.5, epsilon = 1e-12);
    }

    #[test]
    fn detector_on_a_boundary_counts_transmissions_only() {
        let units = natural();
        // Fast particle crosses the barrier face at x = 0; slow one only
        // touches it and turns back.
        let crossing = trace_arrivals(&single(-6.0, 6.0), &barrier(), 0.0, 10.0, &units).unwrap();
        assert_eq!(crossing.len(), 1);
        assert_abs_diff_eq!(crossing[0].time, 1.0, epsilon = 1e-12);
        let touching = trace_arrivals(&single(-9.0, 3.0), &barrier(), 0.0, 14.0, &units).unwrap();
        assert!(touching.is_empty());
    }

    #[test]
    fn multi_step_potential_conserves_energy_leg_by_leg() {
        let units = natural();
        let pot = PiecewisePotential::new(vec![
            crate::scattering::PotentialSegment {
                left: 0.0,
                right: 5.0,
                height: 10.0,
            },
            crate::scattering::PotentialSegment {
                left: 5.0,
                right: 9.0,
                height: -3.0,
            },
        ])
        .unwrap();
        let events = trace_arrivals(&single(-4.0, 6.0), &pot, 9.0, 20.0, &units).unwrap();
        assert_eq!(events.len(), 1);
        let expected = 4.0 / 6.0 + 5.0 / 4.0 + 4.0 / 42f64.sqrt();
        assert_abs_diff_eq!(events[0].time, expected, epsilon = 1e-12);
    }

    #[test]
    fn kde_carries_the_event_mass() {
        let times = TimeGrid::new(0.0, 10.0, 401).unwrap();
        let events = [ArrivalEvent {
            time: 5.0,
            side: Side::Left,
            weight: 1.0,
        }];
        let series = classical_distribution(&events, -2.0, &times, 0.05).unwrap();
        assert_eq!(series.kind(), SeriesKind::Classical);
        assert_abs_diff_eq!(series.integral(), 1.0, epsilon = 1e-6);
        let (t_peak, height) = series.peak();
        assert_abs_diff_eq!(t_peak, 5.0, epsilon = 1e-6);
        assert_relative_eq!(
            height,
            1.0 / ((2.0 * PI).sqrt() * 0.05),
            max_relative = 1e-6
        );
        assert!(series.right().iter().all(|&v| v == 0.0));

        let empty = classical_distribution(&[], -2.0, &times, 0.05).unwrap();
        assert!(empty.total().iter().all(|&v| v == 0.0));
        assert!(matches!(
            classical_distribution(&events, -2.0, &times, 0.0),
            Err(Error::BadBandwidth(_))
        ));
    }

    #[test]
    fn ensemble_arrivals_inside_the_barrier_peak_at_the_slowed_time() {
        let units = natural();
        let spec = GaussianSpec::new(-6.0, 6.0, 1.0).unwrap();
        let ensemble = sample_gaussian_ensemble(&spec, 100_000, 11, &units).unwrap();
        let events = trace_arrivals(&ensemble, &barrier(), 5.0, 10.0, &units).unwrap();
        let times = TimeGrid::new(0.0, 10.0, 401).unwrap();
        let series = classical_distribution(&events, 5.0, &times, 0.05).unwrap();
        let (t_peak, _) = series.peak();
        // The mean trajectory reaches x = 5 at t = 2.25; the ensemble mode
        // sits ~0.1 earlier because the velocity-to-arrival map compresses
        // the fast tail harder than the slow one.
        assert_abs_diff_eq!(t_peak, 2.25, epsilon = 0.15);
        // Nearly the whole ensemble transmits at these energies.
        assert!(series.integral() > 0.95 && series.integral() < 1.05);
    }

    #[test]
    fn free_ensemble_peaks_at_the_ballistic_crossing() {
        let units = natural();
        let spec = GaussianSpec::new(-6.0, 6.0, 1.0).unwrap();
        let ensemble = sample_gaussian_ensemble(&spec, 100_000, 13, &units).unwrap();
        let events = trace_arrivals(
            &ensemble,
            &PiecewisePotential::free(),
            -2.0,
            10.0,
            &units,
        )
        .unwrap();
        let times = TimeGrid::new(0.0, 10.0, 401).unwrap();
        let series = classical_distribution(&events, -2.0, &times, 0.05).unwrap();
        let (t_peak, _) = series.peak();
        assert_abs_diff_eq!(t_peak, 2.0 / 3.0, epsilon = 0.05);
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    fn mirrored(pot_height: f64, width: f64) -> (PiecewisePotential, PiecewisePotential) {
        let right = PiecewisePotential::square_barrier(pot_height, 0.0, width).unwrap();
        let left = PiecewisePotential::square_barrier(pot_height, -width, 0.0).unwrap();
        (right, left)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn traces_respect_parity_and_conserve_energy(
            x0 in -12.0f64..-1.0,
            p0 in 0.5f64..8.0,
            v0 in -5.0f64..12.0,
            width in 0.5f64..6.0,
            x_target in -11.0f64..11.0,
        ) {
            let units = PhysicalUnits::natural();
            let (pot, flipped) = mirrored(v0, width);
            let (b, h) = pot.partition();
            let (bf, hf) = flipped.partition();
            let t_max = 6.0;

            let (x_end, p_end, events) =
                trace_one(x0, p0, &b, &h, x_target, t_max, units.mass);
            let (xm_end, pm_end, mirrored_events) =
                trace_one(-x0, -p0, &bf, &hf, -x_target, t_max, units.mass);

            // Parity: the mirrored trajectory is the pointwise reflection.
            prop_assert_eq!(x_end, -xm_end);
            prop_assert_eq!(p_end, -pm_end);
            prop_assert_eq!(events.len(), mirrored_events.len());
            for ((t, side), (tm, side_m)) in events.iter().zip(&mirrored_events) {
                prop_assert_eq!(t, tm);
                prop_assert!(side != side_m);
            }

            // Energy at t_max matches the launch energy.
            let energy =
                |x: f64, p: f64, pot: &PiecewisePotential| p * p / 2.0 + pot.value_at(x);
            let launched = energy(x0, p0, &pot);
            let finished = energy(x_end, p_end, &pot);
            prop_assert!((launched - finished).abs() <= 1e-12 * (1.0 + launched.abs()));
        }
    }
}
