use std::fmt;

/// A real number extended by the two collision markers.
///
/// Reduced energies and the cylinder height are finite away from the
/// collision states and take one of the infinite markers on them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    PlusInfinity,
    MinusInfinity,
}

impl Extended {
    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    /// The finite value, if any.
    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Extended::Finite(v) => v,
            Extended::PlusInfinity => f64::INFINITY,
            Extended::MinusInfinity => f64::NEG_INFINITY,
        }
    }

    /// Clamps into `[lo, hi]`, mapping the markers onto the bounds.
    pub fn clamp(self, lo: f64, hi: f64) -> f64 {
        match self {
            Extended::Finite(v) => v.clamp(lo, hi),
            Extended::PlusInfinity => hi,
            Extended::MinusInfinity => lo,
        }
    }

    /// Panics on an infinite marker. Intended for tests and for callers that
    /// have already excluded the collision states.
    pub fn unwrap(self) -> f64 {
        self.finite()
            .unwrap_or_else(|| panic!("called unwrap on {self}"))
    }
}

impl From<f64> for Extended {
    fn from(v: f64) -> Self {
        if v == f64::INFINITY {
            Extended::PlusInfinity
        } else if v == f64::NEG_INFINITY {
            Extended::MinusInfinity
        } else {
            Extended::Finite(v)
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{}", crate::io::fmt17(*v)),
            Extended::PlusInfinity => f.write_str("+inf"),
            Extended::MinusInfinity => f.write_str("-inf"),
        }
    }
}
