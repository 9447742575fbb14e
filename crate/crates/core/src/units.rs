use crate::error::Error;

/// Reduced Planck constant and particle mass. Both stay explicit so unit
/// scaling can be exercised in tests; the bundled scenarios use 1 for both.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalUnits {
    pub hbar: f64,
    pub mass: f64,
}

impl PhysicalUnits {
    pub fn new(hbar: f64, mass: f64) -> Result<Self, Error> {
        if !(hbar.is_finite() && hbar > 0.0 && mass.is_finite() && mass > 0.0) {
            return Err(Error::BadUnits);
        }
        Ok(Self { hbar, mass })
    }

    /// hbar = mass = 1.
    pub fn natural() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
        }
    }

    /// Kinetic energy of a plane wave with momentum `p`.
    pub fn kinetic_energy(&self, p: f64) -> f64 {
        p * p / (2.0 * self.mass)
    }
}

impl Default for PhysicalUnits {
    fn default() -> Self {
        Self::natural()
    }
}
