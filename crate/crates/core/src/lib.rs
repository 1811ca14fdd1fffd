//! Exact-arithmetic toolkit for zipper maps of the unit interval.
//!
//! A zipper map `Z_p` is the fixed point of a three-piece rescaling operator
//! determined by two points `(x1, y1)` and `(x2, y2)` of the unit square. The
//! crate builds its tiles exactly, encloses point values and interval images,
//! certifies Hölder and hypersensitivity exponents, finds horseshoes of any
//! order, realises orders and finite maps by orbits, bounds the metric mean
//! dimension from below, and constructs the coordinate change under which the
//! mean dimension collapses.
//!
//! Everything that is claimed is checked with rationals (or sparse dyadics for
//! the huge exponents of [`vanishing`]); floats only appear in plots.

pub mod arith;
pub mod dyadic;
pub mod error;
pub mod horseshoe;
pub mod ifs;
pub mod mdim;
pub mod pl;
pub mod regularity;
pub mod symbolic;
pub mod vanishing;
pub mod zipper;

pub use arith::{log_enclosure, parse_rational, Rational, RealEnclosure};
pub use dyadic::Dyadic;
pub use error::{Error, Result};
pub use ifs::{AffineMap1D, DerivedQuantities, Interval, Parameter, Rect, Word};
pub use pl::PiecewiseLinear;
pub use horseshoe::{HorseshoeCertificate, Verification};
pub use zipper::ImageBound;

/// Serde adapter writing rationals as `"num/den"` strings.
pub mod serde_rational {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::arith::{format_rational, parse_rational, Rational};

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }

    pub mod vec {
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        use crate::arith::{format_rational, parse_rational, Rational};

        pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
            v.iter().map(format_rational).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
            let v = Vec::<String>::deserialize(d)?;
            v.iter().map(|s| parse_rational(s).map_err(serde::de::Error::custom)).collect()
        }
    }
}
