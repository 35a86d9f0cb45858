//! Senior unsecured debt ratings on a shared S&P / Moody's comparison scale.
//!
//! The scale has 17 notches, AAA/Aaa down to B-/B3 plus a final notch
//! collecting everything at CCC+/Caa1 and below. Ordinal codes run the other
//! way: the worst notch has code 0 and AAA has code 16.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const NOTCHES: usize = 17;

const SP: [&str; NOTCHES] = [
    "AAA", "AA+", "AA", "AA-", "A+", "A", "A-", "BBB+", "BBB", "BBB-", "BB+", "BB", "BB-", "B+",
    "B", "B-", "CCC",
];

const MOODYS: [&str; NOTCHES] = [
    "Aaa", "Aa1", "Aa2", "Aa3", "A1", "A2", "A3", "Baa1", "Baa2", "Baa3", "Ba1", "Ba2", "Ba3", "B1",
    "B2", "B3", "Caa",
];

/// One notch on the comparison scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rating {
    // 0 = AAA, 16 = CCC and below
    notch: u8,
}

/// Coarse buckets used by the comparison tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RatingBucket {
    AAndAbove,
    Bbb,
    Bb,
    B,
    BelowB,
}

impl RatingBucket {
    pub const ALL: [RatingBucket; 5] = [
        RatingBucket::AAndAbove,
        RatingBucket::Bbb,
        RatingBucket::Bb,
        RatingBucket::B,
        RatingBucket::BelowB,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RatingBucket::AAndAbove => "A",
            RatingBucket::Bbb => "BBB",
            RatingBucket::Bb => "BB",
            RatingBucket::B => "B",
            RatingBucket::BelowB => "below B",
        }
    }
}

impl Rating {
    pub fn from_notch(notch: usize) -> Option<Rating> {
        (notch < NOTCHES).then_some(Rating { notch: notch as u8 })
    }

    /// Inverse of [`Rating::code`].
    pub fn from_code(code: u8) -> Option<Rating> {
        (usize::from(code) < NOTCHES).then(|| Rating {
            notch: (NOTCHES - 1) as u8 - code,
        })
    }

    /// Position on the scale, 0 for AAA.
    pub fn notch(self) -> usize {
        usize::from(self.notch)
    }

    /// Ordinal label code: higher is better, 0 is the worst notch.
    pub fn code(self) -> u8 {
        (NOTCHES - 1) as u8 - self.notch
    }

    pub fn worse(self, other: Rating) -> Rating {
        if self.notch >= other.notch {
            self
        } else {
            other
        }
    }

    pub fn bucket(self) -> RatingBucket {
        match self.notch {
            0..=6 => RatingBucket::AAndAbove,
            7..=9 => RatingBucket::Bbb,
            10..=12 => RatingBucket::Bb,
            13..=15 => RatingBucket::B,
            _ => RatingBucket::BelowB,
        }
    }

    /// Parses an S&P grade. `CCC+` and below map to the last notch.
    pub fn parse_sp(s: &str) -> Result<Rating> {
        let s = s.trim();
        if let Some(i) = SP.iter().position(|g| *g == s) {
            return Ok(Rating { notch: i as u8 });
        }
        match s {
            "CCC+" | "CCC-" | "CC" | "C" | "D" | "SD" => Ok(Rating {
                notch: (NOTCHES - 1) as u8,
            }),
            _ => Err(Error::domain(format!("unknown S&P rating `{s}`"))),
        }
    }

    /// Parses a Moody's grade. `Caa1` and below map to the last notch.
    pub fn parse_moodys(s: &str) -> Result<Rating> {
        let s = s.trim();
        if let Some(i) = MOODYS.iter().position(|g| *g == s) {
            return Ok(Rating { notch: i as u8 });
        }
        match s {
            "Caa1" | "Caa2" | "Caa3" | "Ca" | "C" => Ok(Rating {
                notch: (NOTCHES - 1) as u8,
            }),
            _ => Err(Error::domain(format!("unknown Moody's rating `{s}`"))),
        }
    }

    pub fn sp_label(self) -> &'static str {
        SP[self.notch()]
    }

    pub fn moodys_label(self) -> &'static str {
        MOODYS[self.notch()]
    }
}

impl PartialOrd for Rating {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Better ratings compare greater.
impl Ord for Rating {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.notch.cmp(&self.notch)
    }
}

impl fmt::Display for Rating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.sp_label())
    }
}

/// Accepts either agency's notation.
impl FromStr for Rating {
    type Err = Error;

    fn from_str(s: &str) -> Result<Rating> {
        Rating::parse_sp(s).or_else(|_| Rating::parse_moodys(s))
    }
}

/// Combines the two agencies' grades: agreement or a single grade is kept as
/// is, disagreement keeps the worse one.
pub fn merge_ratings(sp: Option<Rating>, moodys: Option<Rating>) -> Option<Rating> {
    match (sp, moodys) {
        (Some(a), Some(b)) => Some(a.worse(b)),
        (Some(a), None) | (None, Some(a)) => Some(a),
        (None, None) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(s: &str) -> Rating {
        Rating::parse_sp(s).unwrap()
    }

    #[test]
    fn merge_examples() {
        assert_eq!(merge_ratings(Some(sp("BBB")), Some(sp("BBB"))), Some(sp("BBB")));
        assert_eq!(merge_ratings(Some(sp("A")), None), Some(sp("A")));
        assert_eq!(merge_ratings(None, Some(sp("A"))), Some(sp("A")));
        assert_eq!(merge_ratings(Some(sp("BBB")), Some(sp("BB"))), Some(sp("BB")));
        assert_eq!(merge_ratings(None, None), None);
    }

    #[test]
    fn agencies_share_the_scale() {
        assert_eq!(Rating::parse_moodys("Baa2").unwrap(), sp("BBB"));
        assert_eq!(Rating::parse_moodys("Caa3").unwrap(), sp("CCC-"));
        assert_eq!("Ba1".parse::<Rating>().unwrap(), sp("BB+"));
        assert!("XYZ".parse::<Rating>().is_err());
        let mixed = merge_ratings(Some(sp("A-")), Some(Rating::parse_moodys("Baa1").unwrap()));
        assert_eq!(mixed, Some(sp("BBB+")));
    }

    #[test]
    fn codes_preserve_order() {
        let grades = ["A", "BBB", "BB", "B"].map(sp);
        let codes = grades.map(Rating::code);
        assert_eq!(codes, [11, 8, 5, 2]);
        for w in grades.windows(2) {
            assert!(w[0] > w[1]);
        }
        for w in codes.windows(2) {
            assert!(w[0] > w[1]);
        }
        for notch in 0..NOTCHES {
            let r = Rating::from_notch(notch).unwrap();
            assert_eq!(Rating::from_code(r.code()), Some(r));
        }
        assert_eq!(sp("AAA").code(), 16);
        assert_eq!(sp("CCC").code(), 0);
    }

    #[test]
    fn buckets() {
        assert_eq!(sp("AA").bucket(), RatingBucket::AAndAbove);
        assert_eq!(sp("A-").bucket(), RatingBucket::AAndAbove);
        assert_eq!(sp("BBB-").bucket(), RatingBucket::Bbb);
        assert_eq!(sp("BB+").bucket(), RatingBucket::Bb);
        assert_eq!(sp("B-").bucket(), RatingBucket::B);
        assert_eq!(sp("CC").bucket(), RatingBucket::BelowB);
    }
}
