//! Four-part document versions: `MAJOR.MINOR.PATCH.YYYYMMDD`.
//!
//! The first three parts follow semantic-versioning precedence. The fourth
//! part records the date the document was last reviewed and verified; it is a
//! freshness marker and never takes part in precedence.

use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use alloc::string::{String, ToString};
use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A playbook document version.
///
/// `Version` deliberately does not implement `Ord`: structural equality
/// includes the review date while precedence does not, so use
/// [`compare_versions`] or [`Version::precedence`] to order versions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Version {
    pub major: u64,
    pub minor: u64,
    pub patch: u64,
    pub reviewed: NaiveDate,
}

/// Which component [`Version::bump`] increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VersionPart {
    Major,
    Minor,
    Patch,
}

impl FromStr for VersionPart {
    type Err = VersionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "major" => Ok(VersionPart::Major),
            "minor" => Ok(VersionPart::Minor),
            "patch" => Ok(VersionPart::Patch),
            other => Err(VersionError::Syntax(alloc::format!(
                "unknown version part `{other}` (expected major, minor or patch)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VersionError {
    #[error("invalid version: {0}")]
    Syntax(String),
    #[error("review date {today} precedes the recorded review date {recorded}")]
    ReviewDateRegression {
        recorded: NaiveDate,
        today: NaiveDate,
    },
}

impl Version {
    pub fn new(major: u64, minor: u64, patch: u64, reviewed: NaiveDate) -> Self {
        Version {
            major,
            minor,
            patch,
            reviewed,
        }
    }

    /// The `(major, minor, patch)` triple used for ordering and optimistic
    /// concurrency checks.
    pub fn precedence(&self) -> (u64, u64, u64) {
        (self.major, self.minor, self.patch)
    }

    /// Increments `part`, resets every lower part to zero and records `today`
    /// as the review date.
    pub fn bump(&self, part: VersionPart, today: NaiveDate) -> Version {
        let (major, minor, patch) = match part {
            VersionPart::Major => (self.major + 1, 0, 0),
            VersionPart::Minor => (self.major, self.minor + 1, 0),
            VersionPart::Patch => (self.major, self.minor, self.patch + 1),
        };
        Version::new(major, minor, patch, today)
    }

    /// Records a review on `today` without changing content precedence.
    pub fn stamp_reviewed(&self, today: NaiveDate) -> Result<Version, VersionError> {
        if today < self.reviewed {
            return Err(VersionError::ReviewDateRegression {
                recorded: self.reviewed,
                today,
            });
        }
        Ok(Version {
            reviewed: today,
            ..*self
        })
    }

    /// Whole days elapsed between the review date and `today` (negative when
    /// the review date lies in the future).
    pub fn days_since_review(&self, today: NaiveDate) -> i64 {
        today.signed_duration_since(self.reviewed).num_days()
    }
}

/// Orders versions by `(major, minor, patch)`; the review date is ignored.
pub fn compare_versions(a: &Version, b: &Version) -> Ordering {
    a.precedence().cmp(&b.precedence())
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{}.{}.{:04}{:02}{:02}",
            self.major,
            self.minor,
            self.patch,
            self.reviewed.year(),
            self.reviewed.month(),
            self.reviewed.day()
        )
    }
}

fn parse_numeric(part: &str, name: &str) -> Result<u64, VersionError> {
    if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(VersionError::Syntax(alloc::format!(
            "{name} component `{part}` is not a non-negative integer"
        )));
    }
    if part.len() > 1 && part.starts_with('0') {
        return Err(VersionError::Syntax(alloc::format!(
            "{name} component `{part}` has a leading zero"
        )));
    }
    part.parse().map_err(|_| {
        VersionError::Syntax(alloc::format!("{name} component `{part}` is out of range"))
    })
}

/// Parses a `YYYYMMDD` review stamp.
pub fn parse_review_date(stamp: &str) -> Result<NaiveDate, VersionError> {
    if stamp.len() != 8 || !stamp.bytes().all(|b| b.is_ascii_digit()) {
        return Err(VersionError::Syntax(alloc::format!(
            "review stamp `{stamp}` must be eight digits YYYYMMDD"
        )));
    }
    // all ASCII digits, so the slices below are on char boundaries
    let year: i32 = stamp[0..4].parse().unwrap_or_default();
    let month: u32 = stamp[4..6].parse().unwrap_or_default();
    let day: u32 = stamp[6..8].parse().unwrap_or_default();
    NaiveDate::from_ymd_opt(year, month, day).ok_or_else(|| {
        VersionError::Syntax(alloc::format!(
            "review stamp `{stamp}` is not a valid calendar date"
        ))
    })
}

impl FromStr for Version {
    type Err = VersionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split('.');
        let (Some(major), Some(minor), Some(patch), Some(reviewed), None) = (
            parts.next(),
            parts.next(),
            parts.next(),
            parts.next(),
            parts.next(),
        ) else {
            return Err(VersionError::Syntax(alloc::format!(
                "`{s}` must have exactly four parts MAJOR.MINOR.PATCH.YYYYMMDD"
            )));
        };
        Ok(Version {
            major: parse_numeric(major, "major")?,
            minor: parse_numeric(minor, "minor")?,
            patch: parse_numeric(patch, "patch")?,
            reviewed: parse_review_date(reviewed)?,
        })
    }
}

impl Serialize for Version {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Version {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn v(s: &str) -> Version {
        s.parse().unwrap()
    }

    #[test]
    fn parses_four_part_version() {
        let version = v("1.2.14.20240107");
        assert_eq!(version, Version::new(1, 2, 14, date(2024, 1, 7)));
        assert_eq!(version.to_string(), "1.2.14.20240107");
    }

    #[test]
    fn rejects_malformed_versions() {
        for bad in [
            "1.2.14",
            "1.2.14.20240107.1",
            "1.2.x.20240107",
            "01.2.3.20240101",
            "1.2.3.2024011",
            "1.2.3.20240230",
            "1.2.3.20241301",
            "",
            "1..3.20240101",
            "-1.2.3.20240101",
        ] {
            assert!(bad.parse::<Version>().is_err(), "{bad} should not parse");
        }
    }

    #[test]
    fn review_date_does_not_affect_precedence() {
        assert_eq!(
            compare_versions(&v("1.2.14.20240107"), &v("1.2.14.20200101")),
            Ordering::Equal
        );
        assert_eq!(
            compare_versions(&v("1.0.0.20240101"), &v("1.0.0.20240101")),
            Ordering::Equal
        );
        assert_eq!(
            compare_versions(&v("2.0.0.20200101"), &v("1.9.9.20250101")),
            Ordering::Greater
        );
    }

    #[test]
    fn bump_resets_lower_parts() {
        let today = date(2024, 2, 1);
        assert_eq!(
            v("1.2.14.20240107").bump(VersionPart::Patch, today),
            v("1.2.15.20240201")
        );
        assert_eq!(
            v("1.2.14.20240107").bump(VersionPart::Major, today),
            v("2.0.0.20240201")
        );
        assert_eq!(
            v("0.0.0.20240101").bump(VersionPart::Minor, date(2024, 1, 2)),
            v("0.1.0.20240102")
        );
    }

    #[test]
    fn stamp_reviewed_moves_date_forward_only() {
        assert_eq!(
            v("1.2.14.20240107").stamp_reviewed(date(2024, 6, 1)),
            Ok(v("1.2.14.20240601"))
        );
        assert_eq!(
            v("1.0.0.20240101").stamp_reviewed(date(2024, 1, 1)),
            Ok(v("1.0.0.20240101"))
        );
        assert_eq!(
            v("1.0.0.20240601").stamp_reviewed(date(2024, 1, 1)),
            Err(VersionError::ReviewDateRegression {
                recorded: date(2024, 6, 1),
                today: date(2024, 1, 1)
            })
        );
    }

    #[test]
    fn days_since_review_counts_leap_day() {
        assert_eq!(v("1.0.0.20240107").days_since_review(date(2025, 1, 7)), 366);
    }

    fn arb_version() -> impl Strategy<Value = Version> {
        (
            0u64..1_000_000,
            0u64..1_000_000,
            0u64..1_000_000,
            1i32..=9999,
            0u32..366,
        )
            .prop_map(|(major, minor, patch, year, ordinal)| {
                let reviewed = NaiveDate::from_yo_opt(year, ordinal + 1)
                    .unwrap_or_else(|| NaiveDate::from_yo_opt(year, 1).unwrap());
                Version::new(major, minor, patch, reviewed)
            })
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(version in arb_version()) {
            let text = version.to_string();
            prop_assert_eq!(text.parse::<Version>(), Ok(version));
        }

        #[test]
        fn precedence_is_antisymmetric(a in arb_version(), b in arb_version()) {
            prop_assert_eq!(compare_versions(&a, &b), compare_versions(&b, &a).reverse());
        }

        #[test]
        fn precedence_is_transitive(a in arb_version(), b in arb_version(), c in arb_version()) {
            if compare_versions(&a, &b) != Ordering::Greater
                && compare_versions(&b, &c) != Ordering::Greater
            {
                prop_assert_ne!(compare_versions(&a, &c), Ordering::Greater);
            }
        }

        #[test]
        fn bump_always_increases(version in arb_version(), part in 0u8..3) {
            let part = [VersionPart::Major, VersionPart::Minor, VersionPart::Patch][part as usize];
            let bumped = version.bump(part, version.reviewed);
            prop_assert_eq!(compare_versions(&bumped, &version), Ordering::Greater);
        }
    }
}
