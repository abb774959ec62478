use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::PipelineError;

/// Countries covered by the two-level model, in canonical block order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Country {
    DE,
    ES,
    FR,
    IT,
}

impl Country {
    pub const ALL: [Country; 4] = [Country::DE, Country::ES, Country::FR, Country::IT];

    pub fn code(self) -> &'static str {
        match self {
            Country::DE => "DE",
            Country::ES => "ES",
            Country::FR => "FR",
            Country::IT => "IT",
        }
    }
}

impl fmt::Display for Country {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Country {
    type Err = PipelineError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "DE" => Ok(Country::DE),
            "ES" => Ok(Country::ES),
            "FR" => Ok(Country::FR),
            "IT" => Ok(Country::IT),
            other => Err(PipelineError::Parse(format!("unknown country `{other}`"))),
        }
    }
}

/// Economic sector of a series. Financial comes first in the factor ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sector {
    F,
    M,
}

impl Sector {
    pub const ALL: [Sector; 2] = [Sector::F, Sector::M];

    pub fn code(self) -> &'static str {
        match self {
            Sector::F => "F",
            Sector::M => "M",
        }
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Sector {
    type Err = PipelineError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "F" | "FIN" | "FINANCIAL" => Ok(Sector::F),
            "M" | "MACRO" | "MACROECONOMIC" => Ok(Sector::M),
            other => Err(PipelineError::Parse(format!("unknown sector `{other}`"))),
        }
    }
}

/// A country x sector block of the panel.
/// Serialized as its display form, e.g. `DE-F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct BlockKey {
    pub country: Country,
    pub sector: Sector,
}

impl BlockKey {
    pub fn new(country: Country, sector: Sector) -> Self {
        Self { country, sector }
    }
}

impl fmt::Display for BlockKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.country, self.sector)
    }
}

impl FromStr for BlockKey {
    type Err = PipelineError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (c, sec) = s.split_once('-').ok_or_else(|| PipelineError::Parse(format!("invalid block `{s}`")))?;
        Ok(Self::new(c.parse()?, sec.parse()?))
    }
}

impl From<BlockKey> for String {
    fn from(k: BlockKey) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for BlockKey {
    type Error = PipelineError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frequency {
    Monthly,
    Quarterly,
}

impl FromStr for Frequency {
    type Err = PipelineError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "m" | "monthly" => Ok(Frequency::Monthly),
            "q" | "quarterly" => Ok(Frequency::Quarterly),
            other => Err(PipelineError::Parse(format!("unknown frequency `{other}`"))),
        }
    }
}

/// Stationarity transformation codes.
///
/// | code | transform        |
/// |------|------------------|
/// | 0    | none             |
/// | 1    | `100 log x`      |
/// | 2    | `100 Δ log x`    |
/// | 3    | `Δ² log x`       |
/// | 4    | `Δ x`            |
/// | 5    | `Δ² x`           |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct TransformCode(u8);

impl TransformCode {
    pub fn new(code: u8) -> Result<Self, PipelineError> {
        if code <= 5 {
            Ok(Self(code))
        } else {
            Err(PipelineError::Parse(format!("transform code {code} is not in 0..=5")))
        }
    }

    pub fn code(self) -> u8 {
        self.0
    }

    /// Number of leading observations consumed by differencing.
    pub fn differencing_order(self) -> usize {
        match self.0 {
            0 | 1 => 0,
            2 | 4 => 1,
            _ => 2,
        }
    }

    pub fn uses_log(self) -> bool {
        (1..=3).contains(&self.0)
    }
}

impl TryFrom<u8> for TransformCode {
    type Error = PipelineError;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        TransformCode::new(v)
    }
}

impl From<TransformCode> for u8 {
    fn from(c: TransformCode) -> u8 {
        c.0
    }
}

/// Calendar quarter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quarter {
    pub year: i32,
    /// 1..=4
    pub q: u8,
}

impl Quarter {
    pub fn new(year: i32, q: u8) -> Self {
        assert!((1..=4).contains(&q), "quarter must be in 1..=4");
        Self { year, q }
    }

    pub fn from_date(d: NaiveDate) -> Self {
        Self::new(d.year(), ((d.month0() / 3) + 1) as u8)
    }

    /// Monotone integer index (consecutive quarters differ by one).
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 4 + (self.q as i64 - 1)
    }

    pub fn from_ordinal(ord: i64) -> Self {
        Self::new(ord.div_euclid(4) as i32, (ord.rem_euclid(4) + 1) as u8)
    }

    pub fn succ(self) -> Self {
        Self::from_ordinal(self.ordinal() + 1)
    }

    /// Every quarter from `first` to `last` inclusive.
    pub fn range(first: Quarter, last: Quarter) -> Vec<Quarter> {
        (first.ordinal()..=last.ordinal()).map(Quarter::from_ordinal).collect()
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year, self.q)
    }
}

impl FromStr for Quarter {
    type Err = PipelineError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || PipelineError::Parse(format!("invalid quarter `{s}`"));
        let (y, q) = s.split_once(['Q', 'q']).ok_or_else(bad)?;
        let year: i32 = y.parse().map_err(|_| bad())?;
        let q: u8 = q.parse().map_err(|_| bad())?;
        if !(1..=4).contains(&q) {
            return Err(bad());
        }
        Ok(Quarter::new(year, q))
    }
}

impl Serialize for Quarter {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Quarter {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One dated observation; `None` marks a missing value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub date: NaiveDate,
    pub value: Option<f64>,
}

/// A raw input series with its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub id: String,
    pub country: Country,
    pub sector: Sector,
    pub frequency: Frequency,
    pub transform: TransformCode,
    pub observations: Vec<Observation>,
}

impl RawSeries {
    pub fn block(&self) -> BlockKey {
        BlockKey::new(self.country, self.sector)
    }

    /// Dates must be strictly increasing and regular at the declared frequency.
    pub fn validate(&self) -> Result<(), PipelineError> {
        for (i, w) in self.observations.windows(2).enumerate() {
            let (a, b) = (w[0].date, w[1].date);
            let step_ok = match self.frequency {
                Frequency::Monthly => month_ordinal(b) - month_ordinal(a) == 1,
                Frequency::Quarterly => {
                    Quarter::from_date(b).ordinal() - Quarter::from_date(a).ordinal() == 1
                }
            };
            if b <= a || !step_ok {
                return Err(PipelineError::IrregularDates {
                    series: self.id.clone(),
                    index: i + 1,
                    date: b,
                });
            }
        }
        Ok(())
    }
}

pub(crate) fn month_ordinal(d: NaiveDate) -> i64 {
    d.year() as i64 * 12 + d.month0() as i64
}
