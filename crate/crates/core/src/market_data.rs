//! Input loading, validation and calendar alignment.
//!
//! Every file is a small CSV. Dates are ISO-8601 strings on disk and ordinal
//! day counts in memory. Missing observations are absent rows; nothing in
//! this module ever produces a NaN placeholder.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const UNIX_EPOCH_CE_DAYS: i32 = 719_163;

/// Calendar date stored as days since 1970-01-01.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Date(i32);

impl Date {
    pub fn from_ymd(year: i32, month: u32, day: u32) -> Result<Self> {
        NaiveDate::from_ymd_opt(year, month, day)
            .map(Self::from_naive)
            .ok_or_else(|| Error::BadDate(format!("{year:04}-{month:02}-{day:02}")))
    }

    pub fn from_ordinal(days: i32) -> Self {
        Date(days)
    }

    pub fn ordinal(self) -> i32 {
        self.0
    }

    fn from_naive(d: NaiveDate) -> Self {
        Date(d.num_days_from_ce() - UNIX_EPOCH_CE_DAYS)
    }

    fn naive(self) -> NaiveDate {
        NaiveDate::from_num_days_from_ce_opt(self.0 + UNIX_EPOCH_CE_DAYS)
            .expect("date within chrono range")
    }

    pub fn year(self) -> i32 {
        self.naive().year()
    }

    /// 0 = Monday .. 6 = Sunday.
    pub fn weekday(self) -> u32 {
        self.naive().weekday().num_days_from_monday()
    }

    pub fn add_days(self, days: i32) -> Self {
        Date(self.0 + days)
    }

    pub fn days_until(self, later: Date) -> i32 {
        later.0 - self.0
    }
}

impl FromStr for Date {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
            .map(Self::from_naive)
            .map_err(|_| Error::BadDate(s.to_string()))
    }
}

impl TryFrom<String> for Date {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Date> for String {
    fn from(d: Date) -> String {
        d.to_string()
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.naive().format("%Y-%m-%d"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Market {
    #[serde(rename = "SPX")]
    Spx,
    #[serde(rename = "RUT")]
    Rut,
}

impl Market {
    pub const ALL: [Market; 2] = [Market::Spx, Market::Rut];

    pub fn as_str(self) -> &'static str {
        match self {
            Market::Spx => "SPX",
            Market::Rut => "RUT",
        }
    }

    /// Name of the volatility index paired with this market.
    pub fn vol_index(self) -> &'static str {
        match self {
            Market::Spx => "VIX",
            Market::Rut => "RVX",
        }
    }
}

impl fmt::Display for Market {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Market {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SPX" => Ok(Market::Spx),
            "RUT" => Ok(Market::Rut),
            other => Err(Error::InvalidInput(format!("unknown market `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Right {
    Call,
    Put,
}

impl Right {
    fn code(self) -> &'static str {
        match self {
            Right::Call => "C",
            Right::Put => "P",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptionQuote {
    pub market: Market,
    pub quote_date: Date,
    pub expiry: Date,
    pub strike: f64,
    pub right: Right,
    pub bid: f64,
    pub ask: f64,
}

impl OptionQuote {
    pub fn mid(&self) -> f64 {
        0.5 * (self.bid + self.ask)
    }

    pub fn spread(&self) -> f64 {
        self.ask - self.bid
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        if !(self.bid.is_finite() && self.ask.is_finite() && self.strike.is_finite()) {
            return Err("non-finite price".into());
        }
        if self.bid < 0.0 {
            return Err(format!("negative bid {}", self.bid));
        }
        if self.ask < self.bid {
            return Err(format!("ask {} below bid {}", self.ask, self.bid));
        }
        if self.expiry <= self.quote_date {
            return Err(format!("expiry {} not after quote date {}", self.expiry, self.quote_date));
        }
        if self.strike <= 0.0 {
            return Err(format!("non-positive strike {}", self.strike));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesUnit {
    PriceLevel,
    PercentRate,
    IndexPoints,
    IndexLevel,
}

/// One value per date, dates strictly increasing, all values finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    name: String,
    dates: Vec<Date>,
    values: Vec<f64>,
    unit: SeriesUnit,
}

impl DailySeries {
    pub fn new(
        name: impl Into<String>,
        dates: Vec<Date>,
        values: Vec<f64>,
        unit: SeriesUnit,
    ) -> Result<Self> {
        let name = name.into();
        if dates.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "series `{name}`: {} dates but {} values",
                dates.len(),
                values.len()
            )));
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::DuplicateDate {
                    series: name,
                    date: w[1],
                });
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                series: name,
                date: dates[i],
            });
        }
        Ok(Self {
            name,
            dates,
            values,
            unit,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dates(&self) -> &[Date] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit(&self) -> SeriesUnit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn get(&self, date: Date) -> Option<f64> {
        self.dates
            .binary_search(&date)
            .ok()
            .map(|i| self.values[i])
    }

    /// Most recent value at or before `date`.
    pub fn as_of(&self, date: Date) -> Option<f64> {
        let n = self.dates.partition_point(|d| *d <= date);
        n.checked_sub(1).map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Date, f64)> + '_ {
        self.dates.iter().copied().zip(self.values.iter().copied())
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// Ordered set of trading dates for one market.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TradingCalendar {
    dates: Vec<Date>,
}

impl TradingCalendar {
    pub fn new(dates: impl IntoIterator<Item = Date>) -> Self {
        let set: BTreeSet<Date> = dates.into_iter().collect();
        Self {
            dates: set.into_iter().collect(),
        }
    }

    /// The dates on which at least one quote exists.
    pub fn from_quotes<'a>(quotes: impl IntoIterator<Item = &'a OptionQuote>) -> Self {
        Self::new(quotes.into_iter().map(|q| q.quote_date))
    }

    pub fn dates(&self) -> &[Date] {
        &self.dates
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// Quotes loaded from one file plus the number of rows rejected on the way.
#[derive(Debug, Clone, Default)]
pub struct QuoteLoad {
    pub quotes: Vec<OptionQuote>,
    pub rejected: usize,
}

pub const QUOTE_HEADER: [&str; 7] = ["market", "quote_date", "expiry", "strike", "right", "bid", "ask"];
pub const SERIES_HEADER: [&str; 2] = ["date", "value"];

pub(crate) fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file))
}

pub(crate) fn check_header(
    path: &Path,
    rdr: &mut csv::Reader<std::fs::File>,
    expected: &[&str],
) -> Result<()> {
    let found = rdr.headers().map_err(|e| Error::csv(path, e))?;
    if found.iter().ne(expected.iter().copied()) {
        return Err(Error::Header {
            path: path.to_path_buf(),
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(())
}

fn parse_quote(rec: &csv::StringRecord) -> std::result::Result<OptionQuote, String> {
    if rec.len() != QUOTE_HEADER.len() {
        return Err(format!("expected {} fields, found {}", QUOTE_HEADER.len(), rec.len()));
    }
    let num = |i: usize| -> std::result::Result<f64, String> {
        rec[i]
            .parse::<f64>()
            .map_err(|_| format!("bad number `{}` in column {}", &rec[i], QUOTE_HEADER[i]))
    };
    let right = match &rec[4] {
        "C" | "c" => Right::Call,
        "P" | "p" => Right::Put,
        other => return Err(format!("bad right `{other}`")),
    };
    let q = OptionQuote {
        market: rec[0].parse().map_err(|e: Error| e.to_string())?,
        quote_date: rec[1].parse().map_err(|e: Error| e.to_string())?,
        expiry: rec[2].parse().map_err(|e: Error| e.to_string())?,
        strike: num(3)?,
        right,
        bid: num(5)?,
        ask: num(6)?,
    };
    q.check()?;
    Ok(q)
}

/// Load every valid quote of `market` from an option-quote CSV.
///
/// Rows that fail to parse or violate a quote invariant are counted in
/// [`QuoteLoad::rejected`] and skipped. Rows belonging to another market are
/// ignored without being counted.
pub fn load_option_quotes(path: impl AsRef<Path>, market: Market) -> Result<QuoteLoad> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &QUOTE_HEADER)?;
    let mut out = QuoteLoad::default();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        match parse_quote(&rec) {
            Ok(q) if q.market == market => out.quotes.push(q),
            Ok(_) => {}
            Err(msg) => {
                let line = rec.position().map(|p| p.line()).unwrap_or(0);
                log::debug!("{}:{line}: rejected quote: {msg}", path.display());
                out.rejected += 1;
            }
        }
    }
    Ok(out)
}

pub fn write_option_quotes(path: impl AsRef<Path>, quotes: &[OptionQuote]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let err = |e| Error::csv(path, e);
    w.write_record(QUOTE_HEADER).map_err(err)?;
    for q in quotes {
        w.write_record([
            q.market.as_str().to_string(),
            q.quote_date.to_string(),
            q.expiry.to_string(),
            q.strike.to_string(),
            q.right.code().to_string(),
            q.bid.to_string(),
            q.ask.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Load a two-column `date,value` file. The series name is the file stem.
pub fn load_series(path: impl AsRef<Path>, unit: SeriesUnit) -> Result<DailySeries> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &SERIES_HEADER)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let row_err = |message: String| Error::Row {
            path: path.to_path_buf(),
            line,
            message,
        };
        if rec.len() != 2 {
            return Err(row_err(format!("expected 2 fields, found {}", rec.len())));
        }
        let date: Date = rec[0].parse().map_err(|e: Error| row_err(e.to_string()))?;
        let value: f64 = rec[1]
            .parse()
            .map_err(|_| row_err(format!("bad number `{}`", &rec[1])))?;
        dates.push(date);
        values.push(value);
    }
    if dates.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    DailySeries::new(name, dates, values, unit)
}

pub fn write_series(path: impl AsRef<Path>, series: &DailySeries) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let err = |e| Error::csv(path, e);
    w.write_record(SERIES_HEADER).map_err(err)?;
    for (d, v) in series.iter() {
        w.write_record([d.to_string(), v.to_string()]).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Carry the most recent observation onto every calendar date.
pub fn align_forward_fill(series: &DailySeries, calendar: &TradingCalendar) -> Result<DailySeries> {
    let mut values = Vec::with_capacity(calendar.len());
    for &d in calendar.dates() {
        let v = series.as_of(d).ok_or_else(|| Error::NoObservationBefore {
            series: series.name().to_string(),
            date: d,
        })?;
        values.push(v);
    }
    DailySeries::new(series.name(), calendar.dates().to_vec(), values, series.unit())
}
