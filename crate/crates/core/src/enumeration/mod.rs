//! Balanced problems for the five settings and the Jacobian minimality test.

mod minimality;

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use rayon::prelude::*;
use serde::Serialize;

use crate::{Error, Result};

pub use minimality::{minimality_check, minimality_check_with, MinimalityOptions};

/// Prior knowledge about cameras and lines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Setting {
    /// Generic cameras, generic lines.
    A,
    /// Generic cameras, parallel lines.
    B,
    /// Known gravity, generic lines.
    C,
    /// Known gravity, parallel lines of unknown direction.
    D,
    /// Known gravity, vertical lines.
    E,
}

impl Setting {
    pub const ALL: [Setting; 5] = [Setting::A, Setting::B, Setting::C, Setting::D, Setting::E];

    /// `n(m) = limit + excess / (m - pole)`, as `(limit, excess, pole)`.
    fn balance_parts(self) -> (i64, i64, i64) {
        match self {
            // 6m + 4n - 7 = mn
            Setting::A => (6, 17, 4),
            // 5m + 2n - 8 = mn
            Setting::B => (5, 2, 2),
            // 4m + 4n - 5 = mn
            Setting::C => (4, 11, 4),
            // 3m + 2 + 2n - 4 = mn
            Setting::D => (3, 4, 2),
            // 3m + 2n - 4 = mn
            Setting::E => (3, 2, 2),
        }
    }

    /// Smallest number of cameras for which the setting is meaningful.
    pub fn min_cameras(self) -> usize {
        self.balance_parts().2 as usize + 1
    }

    /// Free parameters of `m` cameras and `n` lines after removing the gauge.
    pub fn unknowns(self, m: usize, n: usize) -> i64 {
        let (m, n) = (m as i64, n as i64);
        match self {
            Setting::A => 6 * m + 4 * n - 7,
            Setting::B => 5 * m + 2 * n - 8,
            Setting::C => 4 * m + 4 * n - 5,
            Setting::D => 3 * m + 2 + 2 * n - 4,
            Setting::E => 3 * m + 2 * n - 4,
        }
    }

    /// The balance function tends to this value from above.
    pub fn line_limit(self) -> i64 {
        self.balance_parts().0
    }

    /// Beyond this camera count the balance function lies strictly between
    /// its limit and the limit plus one, so no further integer values exist.
    pub fn completeness_bound(self) -> usize {
        let (_, excess, pole) = self.balance_parts();
        (pole + excess) as usize
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Setting::ALL
            .into_iter()
            .find(|x| x.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnsupportedSetting(format!("unknown setting '{s}' (expected A-E)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ProblemSpec {
    pub setting: Setting,
    pub cameras: usize,
    pub lines: usize,
}

impl ProblemSpec {
    pub fn new(setting: Setting, cameras: usize, lines: usize) -> Self {
        Self { setting, cameras, lines }
    }

    /// Unknowns equal the number of incidence equations.
    pub fn is_balanced(&self) -> bool {
        self.setting.unknowns(self.cameras, self.lines) == (self.cameras * self.lines) as i64
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.setting, self.cameras, self.lines)
    }
}

/// Number of solutions of a minimal problem as listed in the literature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Degree {
    Exact(u64),
    /// Solutions counted as 2x3 camera matrices (projective ambiguity).
    Matrices(u64),
    /// Computation did not terminate; at least this many.
    AtLeast(u64),
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Degree::Exact(d) => write!(f, "{d}"),
            Degree::Matrices(d) => write!(f, "{d}*"),
            Degree::AtLeast(d) if d >= 1_000_000 => write!(f, "{}M+", d as f64 / 1e6),
            Degree::AtLeast(d) => write!(f, "{}k+", d / 1000),
        }
    }
}

/// The eleven balanced problems with their known degrees.
pub const TABLE: [(Setting, usize, usize, Degree); 11] = [
    (Setting::A, 5, 23, Degree::AtLeast(389_000)),
    (Setting::A, 21, 7, Degree::AtLeast(40_000)),
    (Setting::B, 3, 7, Degree::Matrices(2)),
    (Setting::B, 4, 6, Degree::Matrices(2)),
    (Setting::C, 5, 15, Degree::AtLeast(1_800_000)),
    (Setting::C, 15, 5, Degree::AtLeast(532_000)),
    (Setting::D, 3, 7, Degree::Exact(48)),
    (Setting::D, 4, 5, Degree::Exact(232)),
    (Setting::D, 6, 4, Degree::Exact(1224)),
    (Setting::E, 3, 5, Degree::Exact(16)),
    (Setting::E, 4, 4, Degree::Exact(32)),
];

pub fn table_degree(spec: &ProblemSpec) -> Option<Degree> {
    TABLE
        .iter()
        .find(|(s, m, n, _)| *s == spec.setting && *m == spec.cameras && *n == spec.lines)
        .map(|t| t.3)
}

/// Lines per camera count that balances unknowns and equations.
pub fn balance_function(setting: Setting, m: i64) -> Result<Rational64> {
    let (limit, excess, pole) = setting.balance_parts();
    if m == pole {
        return Err(Error::PoleDivision { m });
    }
    Ok(Rational64::from_integer(limit) + Rational64::new(excess, m - pole))
}

/// All balanced problems with `min_cameras <= m <= m_max`. Camera counts
/// past the completeness bound are skipped since none can balance.
pub fn enumerate_balanced(setting: Setting, m_max: usize) -> Vec<ProblemSpec> {
    let hi = m_max.min(setting.completeness_bound());
    (setting.min_cameras()..=hi)
        .filter_map(|m| {
            let n = balance_function(setting, m as i64).ok()?;
            (n.is_integer() && *n.numer() > 0).then(|| ProblemSpec::new(setting, m, *n.numer() as usize))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinimalityVerdict {
    pub spec: ProblemSpec,
    pub balanced: bool,
    pub minimal: bool,
    /// `sigma_min / sigma_max` of the gauge-fixed Jacobian (best attempt).
    pub jacobian_condition: f64,
    pub table_degree: Option<Degree>,
}

/// Enumerate every setting up to `m_max` cameras and test each problem.
pub fn enumerate_and_check(settings: &[Setting], m_max: usize, seed: u64) -> Result<Vec<MinimalityVerdict>> {
    let specs: Vec<ProblemSpec> = settings.iter().flat_map(|&s| enumerate_balanced(s, m_max)).collect();
    specs.par_iter().map(|s| minimality_check(s, seed)).collect()
}

/// Text table in the layout `S. m n Min. Deg cond`.
pub fn format_report(verdicts: &[MinimalityVerdict]) -> String {
    let mut out = String::from("S.   m    n  Min.  Deg      cond\n");
    for v in verdicts {
        let deg = v.table_degree.map(|d| d.to_string()).unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<2} {:>3} {:>4}  {:<4}  {:<7}  {:.2e}\n",
            v.spec.setting.to_string(),
            v.spec.cameras,
            v.spec.lines,
            if v.minimal { "Y" } else { "N" },
            deg,
            v.jacobian_condition
        ));
    }
    out
}
