use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Isotropic moduli in MPa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams<T> {
    pub bulk: T,
    pub shear: T,
}

impl<T: Real> MaterialParams<T> {
    pub fn new(bulk: T, shear: T) -> Result<Self> {
        if !(bulk > T::zero() && shear > T::zero()) {
            return Err(Error::Parameter(format!(
                "moduli must be positive (K = {bulk}, G = {shear})"
            )));
        }
        Ok(Self { bulk, shear })
    }

    /// `G = 3K(1 - 2ν) / (2(1 + ν))`
    pub fn from_bulk_poisson(bulk: T, nu: T) -> Result<Self> {
        if !(nu > -T::one() && nu < T::lit(0.5)) {
            return Err(Error::Parameter(format!("Poisson ratio {nu} outside (-1, 0.5)")));
        }
        let three = T::lit(3.0);
        let two = T::lit(2.0);
        Self::new(bulk, three * bulk * (T::one() - two * nu) / (two * (T::one() + nu)))
    }

    pub fn from_lame(lambda: T, mu: T) -> Result<Self> {
        Self::new(lambda + T::lit(2.0 / 3.0) * mu, mu)
    }

    pub fn lambda(&self) -> T {
        self.bulk - T::lit(2.0 / 3.0) * self.shear
    }

    pub fn mu(&self) -> T {
        self.shear
    }

    pub fn poisson(&self) -> T {
        let (k, g) = (self.bulk, self.shear);
        (T::lit(3.0) * k - T::lit(2.0) * g) / (T::lit(2.0) * (T::lit(3.0) * k + g))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfluenceKind {
    #[default]
    Constant,
    InverseDistance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfluenceFunction<T> {
    pub kind: InfluenceKind,
    pub horizon: T,
}

impl<T: Real> InfluenceFunction<T> {
    pub fn new(kind: InfluenceKind, horizon: T) -> Result<Self> {
        if !(horizon > T::zero()) {
            return Err(Error::Parameter(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { kind, horizon })
    }

    pub fn constant(horizon: T) -> Self {
        Self { kind: InfluenceKind::Constant, horizon }
    }

    /// κ(r), zero outside the horizon.
    pub fn value(&self, r: T) -> T {
        if r > self.horizon * (T::one() + T::lit(1e-12)) {
            return T::zero();
        }
        self.profile(r)
    }

    /// Weight used on a stored bond. Bonds whose centre lies just past δ
    /// carry the part of their cell inside the ball, evaluated at the horizon.
    #[inline]
    pub fn bond(&self, r: T) -> T {
        self.profile(r.min(self.horizon))
    }

    #[inline]
    fn profile(&self, r: T) -> T {
        match self.kind {
            InfluenceKind::Constant => T::one(),
            InfluenceKind::InverseDistance => T::one() / r,
        }
    }
}
