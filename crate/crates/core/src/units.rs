//! Unit newtypes. Every data volume in the toolkit is megabytes and every
//! duration milliseconds; the types below keep the two from being mixed.
//!
//! Only same-unit addition is defined. Crossing units requires an explicit
//! rate ([`MillisPerMb`]) or a dimensionless ratio.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Sub};

use serde::{Deserialize, Serialize};

macro_rules! scalar_unit {
    ($name:ident, $suffix:literal) => {
        #[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub f64);

        impl $name {
            pub const ZERO: $name = $name(0.0);

            pub fn get(self) -> f64 {
                self.0
            }

            pub fn max(self, other: $name) -> $name {
                $name(self.0.max(other.0))
            }
        }

        impl Add for $name {
            type Output = $name;
            fn add(self, rhs: $name) -> $name {
                $name(self.0 + rhs.0)
            }
        }

        impl AddAssign for $name {
            fn add_assign(&mut self, rhs: $name) {
                self.0 += rhs.0;
            }
        }

        impl Sub for $name {
            type Output = $name;
            fn sub(self, rhs: $name) -> $name {
                $name(self.0 - rhs.0)
            }
        }

        impl Mul<f64> for $name {
            type Output = $name;
            fn mul(self, rhs: f64) -> $name {
                $name(self.0 * rhs)
            }
        }

        impl Div<f64> for $name {
            type Output = $name;
            fn div(self, rhs: f64) -> $name {
                $name(self.0 / rhs)
            }
        }

        /// Ratio of two quantities of the same unit.
        impl Div for $name {
            type Output = f64;
            fn div(self, rhs: $name) -> f64 {
                self.0 / rhs.0
            }
        }

        impl Sum for $name {
            fn sum<I: Iterator<Item = $name>>(iter: I) -> $name {
                iter.fold($name::ZERO, |acc, x| acc + x)
            }
        }

        impl<'a> Sum<&'a $name> for $name {
            fn sum<I: Iterator<Item = &'a $name>>(iter: I) -> $name {
                iter.fold($name::ZERO, |acc, x| acc + *x)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                if let Some(p) = f.precision() {
                    write!(f, "{:.*} {}", p, self.0, $suffix)
                } else {
                    write!(f, "{} {}", self.0, $suffix)
                }
            }
        }
    };
}

scalar_unit!(Megabytes, "MB");
scalar_unit!(Millis, "ms");

/// A cost rate in milliseconds per megabyte.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MillisPerMb(pub f64);

impl Mul<Megabytes> for MillisPerMb {
    type Output = Millis;
    fn mul(self, rhs: Megabytes) -> Millis {
        Millis(self.0 * rhs.0)
    }
}

impl Millis {
    pub fn as_secs(self) -> f64 {
        self.0 / 1000.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn rate_times_volume_is_duration(rate in 0.0f64..100.0, mb in 0.0f64..1e5) {
            let d: Millis = MillisPerMb(rate) * Megabytes(mb);
            prop_assert_eq!(d.get(), rate * mb);
        }

        #[test]
        fn same_unit_ratio_is_dimensionless(a in 1.0f64..1e5, b in 1.0f64..1e5) {
            let r: f64 = Megabytes(a) / Megabytes(b);
            prop_assert_eq!(r, a / b);
            let s: Millis = [Millis(a), Millis(b)].iter().sum();
            prop_assert_eq!(s.get(), a + b);
        }
    }

    #[test]
    fn display_carries_suffix() {
        assert_eq!(format!("{:.2}", Millis(2.614)), "2.61 ms");
        assert_eq!(format!("{}", Megabytes(128.0)), "128 MB");
    }
}
