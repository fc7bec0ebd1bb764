use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Calendar month, the time resolution of the whole pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Month {
    pub year: i32,
    /// 1..=12
    pub month: u8,
}

impl Month {
    pub fn new(year: i32, month: u8) -> Option<Self> {
        if (1..=12).contains(&month) {
            Some(Month { year, month })
        } else {
            None
        }
    }

    /// Months elapsed since year 0, for index arithmetic.
    fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn add_months(self, n: i64) -> Month {
        let ord = self.ordinal() + n;
        Month {
            year: ord.div_euclid(12) as i32,
            month: (ord.rem_euclid(12) + 1) as u8,
        }
    }

    /// Signed distance in months from `other` to `self`.
    pub fn months_since(self, other: Month) -> i64 {
        self.ordinal() - other.ordinal()
    }
}

impl FromStr for Month {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::InvalidMonth(s.to_string());
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u8 = m.parse().map_err(|_| bad())?;
        Month::new(year, month).ok_or_else(bad)
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_roundtrip() {
        let m: Month = "2010-01".parse().unwrap();
        assert_eq!(m, Month::new(2010, 1).unwrap());
        assert_eq!(m.to_string(), "2010-01");
    }

    #[test]
    fn rejects_garbage() {
        assert!("2010-13".parse::<Month>().is_err());
        assert!("2010".parse::<Month>().is_err());
        assert!("10-01".parse::<Month>().is_err());
        assert!("2010-1".parse::<Month>().is_err());
    }

    #[test]
    fn month_arithmetic_crosses_years() {
        let m = Month::new(2010, 11).unwrap();
        assert_eq!(m.add_months(3), Month::new(2011, 2).unwrap());
        assert_eq!(m.add_months(3).months_since(m), 3);
        assert_eq!(m.add_months(-11), Month::new(2010, 12).unwrap().add_months(-12));
    }
}
