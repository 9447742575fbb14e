//! Time-of-arrival distributions for one-dimensional wave packets.
//!
//! The library evaluates Kijowski's free-motion arrival distribution and its
//! generalizations to scattering off piecewise-constant potentials. All of
//! them are crossing-state overlaps: the probability density for arriving at
//! a point X at time T, split into left-moving and right-moving components.
//! A classical ensemble tracer provides the corresponding stochastic oracle.

pub mod arrivals;
pub mod classical;
pub mod dynamics;
mod error;
pub mod grid;
pub mod scattering;
pub mod units;

pub use arrivals::{
    refined_peak, scenario_momentum_grid, Branch, CrossingKind, DistributionSeries,
    ScenarioContext, SeriesBundle, SeriesKind, Side, SmallnessReport,
};
pub use classical::{
    classical_distribution, sample_gaussian_ensemble, trace_arrivals, ArrivalEvent,
    ClassicalEnsemble,
};
pub use dynamics::{
    evolve_free, evolve_full, gaussian_asymptote, AsymptoteAmplitude, GaussianSpec, SpatialGrid,
    WaveField,
};
pub use error::Error;
pub use grid::{build_momentum_grid, integrate, MomentumGrid, TimeGrid};
pub use scattering::{
    outgoing_asymptote, PiecewisePotential, PotentialSegment, StationaryState, StationaryStateEval,
};
pub use units::PhysicalUnits;

pub use num_complex::Complex64;
