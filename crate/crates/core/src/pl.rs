//! Exact piecewise-linear functions on `[0,1]`.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::Rational;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    #[serde(with = "points_serde")]
    points: Vec<(Rational, Rational)>,
}

impl PiecewiseLinear {
    pub fn new(points: Vec<(Rational, Rational)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::DomainViolation("need at least two breakpoints".into()));
        }
        if !points[0].0.is_zero() || !points[points.len() - 1].0.is_one() {
            return Err(Error::DomainViolation("breakpoints must start at x=0 and end at x=1".into()));
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::DomainViolation("breakpoint abscissae must increase strictly".into()));
        }
        Ok(Self { points })
    }

    pub fn identity() -> Self {
        Self {
            points: vec![(Rational::zero(), Rational::zero()), (Rational::one(), Rational::one())],
        }
    }

    pub fn points(&self) -> &[(Rational, Rational)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `f(0)=0`, `f(1)=1` and values in `[0,1]`.
    pub fn check_fixed_space(&self) -> Result<()> {
        let first = &self.points[0].1;
        let last = &self.points[self.points.len() - 1].1;
        if !first.is_zero() || !last.is_one() {
            return Err(Error::DomainViolation(format!(
                "expected f(0)=0 and f(1)=1, got f(0)={first}, f(1)={last}"
            )));
        }
        let zero = Rational::zero();
        let one = Rational::one();
        if self.points.iter().any(|(_, y)| *y < zero || *y > one) {
            return Err(Error::DomainViolation("values leave [0,1]".into()));
        }
        Ok(())
    }

    pub fn eval(&self, x: &Rational) -> Result<Rational> {
        if *x < self.points[0].0 || *x > self.points[self.points.len() - 1].0 {
            return Err(Error::DomainViolation(format!("{x} is outside [0,1]")));
        }
        let k = self.points.partition_point(|(px, _)| px <= x);
        if k == self.points.len() {
            return Ok(self.points[k - 1].1.clone());
        }
        let (x0, y0) = &self.points[k - 1];
        let (x1, y1) = &self.points[k];
        Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.points.windows(2).all(|w| w[0].1 < w[1].1)
    }

    /// Collects points in order, merging the shared endpoint of adjacent pieces.
    pub(crate) fn from_pieces(pieces: impl IntoIterator<Item = Vec<(Rational, Rational)>>) -> Result<Self> {
        let mut points: Vec<(Rational, Rational)> = Vec::new();
        for piece in pieces {
            for pt in piece {
                match points.last() {
                    Some(last) if last.0 == pt.0 => {
                        if last.1 != pt.1 {
                            return Err(Error::DomainViolation("pieces disagree at a junction".into()));
                        }
                    }
                    _ => points.push(pt),
                }
            }
        }
        Self::new(points)
    }
}

mod points_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::arith::{format_rational, parse_rational, Rational};

    pub fn serialize<S: Serializer>(v: &[(Rational, Rational)], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|(x, y)| [format_rational(x), format_rational(y)])
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(Rational, Rational)>, D::Error> {
        let raw: Vec<[String; 2]> = Deserialize::deserialize(d)?;
        raw.into_iter()
            .map(|[x, y]| {
                let x = parse_rational(&x).map_err(serde::de::Error::custom)?;
                let y = parse_rational(&y).map_err(serde::de::Error::custom)?;
                Ok((x, y))
            })
            .collect()
    }
}
