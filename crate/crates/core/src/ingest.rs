//! Price ingestion: CSV loading, optional HTTP fetch, and missing-value cleaning.
//!
//! Input CSV layout: a `date` column (`YYYY-MM-DD`) followed by one column per
//! ticker holding decimal close prices. Empty, unparseable, or non-positive
//! cells are recorded as missing.

use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Environment variable overriding the directory used to cache fetched CSV bodies.
pub const CACHE_DIR_ENV: &str = "FRONTIER_LAB_CACHE";

/// Columns with strictly more than this fraction of missing cells are dropped.
pub const MAX_MISSING_FRACTION: f64 = 0.25;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// Exchange ticker symbol. Non-empty, no whitespace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TickerId(String);

impl TickerId {
    pub fn new(symbol: impl Into<String>) -> Result<Self> {
        let symbol = symbol.into();
        if symbol.is_empty() || symbol.chars().any(char::is_whitespace) {
            return Err(Error::InvalidTicker(symbol));
        }
        Ok(TickerId(symbol))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for TickerId {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        TickerId::new(value)
    }
}

impl From<TickerId> for String {
    fn from(t: TickerId) -> String {
        t.0
    }
}

impl fmt::Display for TickerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Build a ticker list from string literals, failing on the first invalid symbol.
pub fn tickers<S: AsRef<str>>(symbols: &[S]) -> Result<Vec<TickerId>> {
    symbols.iter().map(|s| TickerId::new(s.as_ref())).collect()
}

/// A sector's ticker universe together with its training and test windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawUniverseConfig")]
pub struct UniverseConfig {
    pub sector_name: String,
    pub tickers: Vec<TickerId>,
    pub train_start: NaiveDate,
    pub train_end: NaiveDate,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
}

#[derive(Deserialize)]
struct RawUniverseConfig {
    sector_name: String,
    tickers: Vec<TickerId>,
    train_start: NaiveDate,
    train_end: NaiveDate,
    test_start: NaiveDate,
    test_end: NaiveDate,
}

impl TryFrom<RawUniverseConfig> for UniverseConfig {
    type Error = Error;

    fn try_from(raw: RawUniverseConfig) -> Result<Self> {
        UniverseConfig::new(
            raw.sector_name,
            raw.tickers,
            raw.train_start,
            raw.train_end,
            raw.test_start,
            raw.test_end,
        )
    }
}

impl UniverseConfig {
    pub fn new(
        sector_name: impl Into<String>,
        tickers: Vec<TickerId>,
        train_start: NaiveDate,
        train_end: NaiveDate,
        test_start: NaiveDate,
        test_end: NaiveDate,
    ) -> Result<Self> {
        let config = UniverseConfig {
            sector_name: sector_name.into(),
            tickers,
            train_start,
            train_end,
            test_start,
            test_end,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if self.tickers.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "at least two tickers required, got {}",
                self.tickers.len()
            )));
        }
        for (i, t) in self.tickers.iter().enumerate() {
            if self.tickers[..i].contains(t) {
                return Err(Error::InvalidConfig(format!("duplicate ticker {t}")));
            }
        }
        if !(self.train_start < self.train_end
            && self.train_end <= self.test_start
            && self.test_start < self.test_end)
        {
            return Err(Error::InvalidConfig(format!(
                "windows must satisfy train_start < train_end <= test_start < test_end \
                 (got {} / {} / {} / {})",
                self.train_start, self.train_end, self.test_start, self.test_end
            )));
        }
        Ok(())
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Date-indexed close prices. `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    dates: Vec<NaiveDate>,
    tickers: Vec<TickerId>,
    closes: DMatrix<Option<f64>>,
}

impl PricePanel {
    /// Builds a panel, checking shape, date order and price positivity.
    pub fn new(
        dates: Vec<NaiveDate>,
        tickers: Vec<TickerId>,
        closes: DMatrix<Option<f64>>,
    ) -> Result<Self> {
        if closes.nrows() != dates.len() || closes.ncols() != tickers.len() {
            return Err(Error::DimensionMismatch(format!(
                "closes are {}x{} but there are {} dates and {} tickers",
                closes.nrows(),
                closes.ncols(),
                dates.len(),
                tickers.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(format!(
                "dates must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        for (c, ticker) in tickers.iter().enumerate() {
            if let Some(bad) = closes
                .column(c)
                .iter()
                .flatten()
                .find(|p| !(p.is_finite() && **p > 0.0))
            {
                return Err(Error::InvalidPrice {
                    ticker: ticker.to_string(),
                    price: *bad,
                });
            }
        }
        Ok(PricePanel {
            dates,
            tickers,
            closes,
        })
    }

    /// Builds a panel from row-major data.
    pub fn from_rows(
        dates: Vec<NaiveDate>,
        tickers: Vec<TickerId>,
        rows: &[Vec<Option<f64>>],
    ) -> Result<Self> {
        let ncols = tickers.len();
        if let Some(r) = rows.iter().position(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch(format!(
                "row {r} has {} cells, expected {ncols}",
                rows[r].len()
            )));
        }
        let closes = DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]);
        Self::new(dates, tickers, closes)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[TickerId] {
        &self.tickers
    }

    pub fn closes(&self) -> &DMatrix<Option<f64>> {
        &self.closes
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_tickers(&self) -> usize {
        self.tickers.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.closes[(row, col)]
    }

    pub fn ticker_index(&self, ticker: &TickerId) -> Option<usize> {
        self.tickers.iter().position(|t| t == ticker)
    }

    pub fn missing_count(&self) -> usize {
        self.closes.iter().filter(|c| c.is_none()).count()
    }

    pub fn column_missing(&self, col: usize) -> usize {
        self.closes
            .column(col)
            .iter()
            .filter(|c| c.is_none())
            .count()
    }

    pub fn is_complete(&self) -> bool {
        self.missing_count() == 0
    }

    /// Dense copy of the closes. Fails if any cell is missing.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let missing = self.missing_count();
        if missing > 0 {
            return Err(Error::MissingValues(missing));
        }
        Ok(self.closes.map(|c| c.unwrap_or(f64::NAN)))
    }

    /// Rows whose date lies in `[start, end]`.
    pub fn window(&self, start: NaiveDate, end: NaiveDate) -> PricePanel {
        let rows: Vec<usize> = self
            .dates
            .iter()
            .enumerate()
            .filter(|(_, d)| **d >= start && **d <= end)
            .map(|(i, _)| i)
            .collect();
        self.select_rows(&rows)
    }

    fn select_rows(&self, rows: &[usize]) -> PricePanel {
        PricePanel {
            dates: rows.iter().map(|&r| self.dates[r]).collect(),
            tickers: self.tickers.clone(),
            closes: DMatrix::from_fn(rows.len(), self.n_tickers(), |r, c| {
                self.closes[(rows[r], c)]
            }),
        }
    }

    fn select_columns(&self, cols: &[usize]) -> PricePanel {
        PricePanel {
            dates: self.dates.clone(),
            tickers: cols.iter().map(|&c| self.tickers[c].clone()).collect(),
            closes: self.closes.select_columns(cols),
        }
    }

    /// Index of the first date on or after `date`.
    pub fn first_row_on_or_after(&self, date: NaiveDate) -> Option<usize> {
        let idx = self.dates.partition_point(|d| *d < date);
        (idx < self.dates.len()).then_some(idx)
    }

    /// Index of the last date on or before `date`.
    pub fn last_row_on_or_before(&self, date: NaiveDate) -> Option<usize> {
        self.dates.partition_point(|d| *d <= date).checked_sub(1)
    }

    /// Serializes in the input CSV schema. Missing cells are written empty.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("date");
        for t in &self.tickers {
            out.push(',');
            out.push_str(t.as_str());
        }
        out.push('\n');
        for (r, date) in self.dates.iter().enumerate() {
            out.push_str(&date.format("%Y-%m-%d").to_string());
            for c in 0..self.n_tickers() {
                out.push(',');
                if let Some(p) = self.closes[(r, c)] {
                    out.push_str(&p.to_string());
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

/// Loads a price CSV from disk, restricted to `[train_start, test_end]`.
pub fn load_csv(path: impl AsRef<Path>, config: &UniverseConfig) -> Result<PricePanel> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file, config)
}

/// Loads only `tickers` over the inclusive range `[start, end]`.
pub fn load_csv_range(
    path: impl AsRef<Path>,
    tickers: &[TickerId],
    start: NaiveDate,
    end: NaiveDate,
) -> Result<PricePanel> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv_range(file, tickers, start, end)
}

/// Parses CSV text in the input schema; see [`load_csv`].
pub fn parse_csv<R: Read>(reader: R, config: &UniverseConfig) -> Result<PricePanel> {
    parse_csv_range(reader, &config.tickers, config.train_start, config.test_end)
}

pub fn parse_csv_range<R: Read>(
    reader: R,
    tickers: &[TickerId],
    start: NaiveDate,
    end: NaiveDate,
) -> Result<PricePanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut records = rdr.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| malformed(1, e.to_string()))?,
        None => return Err(malformed(1, "empty file".into())),
    };
    if !header.get(0).is_some_and(|h| {
        h.trim_start_matches('\u{feff}')
            .eq_ignore_ascii_case("date")
    }) {
        return Err(malformed(1, "first header must be `date`".into()));
    }
    let width = header.len();
    let column_of: Vec<usize> = tickers
        .iter()
        .map(|t| {
            header
                .iter()
                .skip(1)
                .position(|h| h == t.as_str())
                .map(|p| p + 1)
                .ok_or_else(|| Error::MissingColumn(t.to_string()))
        })
        .collect::<Result<_>>()?;

    let mut rows: Vec<(NaiveDate, u64, Vec<Option<f64>>)> = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != width {
            return Err(malformed(
                line,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
            .map_err(|e| malformed(line, format!("bad date {:?}: {e}", &rec[0])))?;
        if date < start || date > end {
            continue;
        }
        let cells = column_of.iter().map(|&c| parse_price(&rec[c])).collect();
        rows.push((date, line, cells));
    }

    if rows.is_empty() {
        return Err(Error::EmptyWindow);
    }
    rows.sort_by_key(|(d, _, _)| *d);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        let line = w[0].1.max(w[1].1);
        return Err(malformed(line, format!("duplicate date {}", w[0].0)));
    }

    let dates = rows.iter().map(|(d, _, _)| *d).collect();
    let cells: Vec<Vec<Option<f64>>> = rows.into_iter().map(|(_, _, c)| c).collect();
    PricePanel::from_rows(dates, tickers.to_vec(), &cells)
}

fn parse_price(cell: &str) -> Option<f64> {
    cell.parse::<f64>()
        .ok()
        .filter(|p| p.is_finite() && *p > 0.0)
}

fn malformed(line: u64, reason: String) -> Error {
    Error::MalformedRow { line, reason }
}

/// Result of [`fetch_remote`]: the parsed panel and where the body was cached.
#[derive(Debug, Clone)]
pub struct FetchOutcome {
    pub panel: PricePanel,
    pub cache_path: PathBuf,
}

/// Directory used to cache fetched CSV bodies.
pub fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("frontier-lab-cache"))
}

/// HTTP GET `url`, cache the body, and parse it exactly as [`load_csv`] would.
pub fn fetch_remote(url: &str, config: &UniverseConfig) -> Result<FetchOutcome> {
    fetch_remote_into(url, config, &cache_dir())
}

/// Like [`fetch_remote`] with an explicit cache directory.
pub fn fetch_remote_into(url: &str, config: &UniverseConfig, cache: &Path) -> Result<FetchOutcome> {
    let response = match ureq::get(url).call() {
        Ok(resp) => resp,
        Err(ureq::Error::Status(code, _)) => return Err(Error::HttpStatus(code)),
        Err(ureq::Error::Transport(t)) => return Err(Error::NetworkUnavailable(t.to_string())),
    };
    let body = response
        .into_string()
        .map_err(|e| Error::NetworkUnavailable(e.to_string()))?;

    fs::create_dir_all(cache).map_err(|e| Error::io(cache, e))?;
    let cache_path = cache.join(format!("{}.csv", cache_key(url)));
    fs::write(&cache_path, &body).map_err(|e| Error::io(&cache_path, e))?;
    log::debug!("cached {url} at {}", cache_path.display());

    let panel = parse_csv(body.as_bytes(), config)?;
    Ok(FetchOutcome { panel, cache_path })
}

fn cache_key(url: &str) -> String {
    let digest = Sha256::digest(url.as_bytes());
    format!("{digest:x}")[..16].to_string()
}

// ---------------------------------------------------------------------------
// Cleaning
// ---------------------------------------------------------------------------

/// A column removed by [`clean_panel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub ticker: TickerId,
    pub missing: usize,
    pub rows: usize,
}

/// Output of [`clean_panel`].
#[derive(Debug, Clone, PartialEq)]
pub struct CleanedPanel {
    pub panel: PricePanel,
    pub dropped: Vec<DroppedColumn>,
    /// Number of imputed cells per surviving ticker (only tickers with imputations).
    pub imputed: Vec<(TickerId, usize)>,
}

/// Drops columns with more than 25% missing cells and mean-imputes the rest.
///
/// The imputation mean is taken over every non-missing cell in the column as
/// loaded. Non-missing cells are never altered.
pub fn clean_panel(raw: &PricePanel) -> Result<CleanedPanel> {
    let rows = raw.n_dates();
    if rows < 2 {
        return Err(Error::InsufficientData(format!(
            "cleaning needs at least 2 rows, got {rows}"
        )));
    }

    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    for c in 0..raw.n_tickers() {
        let missing = raw.column_missing(c);
        // strict: exactly 25% missing is kept
        if missing * 4 > rows {
            dropped.push(DroppedColumn {
                ticker: raw.tickers[c].clone(),
                missing,
                rows,
            });
        } else {
            keep.push(c);
        }
    }
    for d in &dropped {
        log::info!(
            "dropping {}: {}/{} cells missing",
            d.ticker,
            d.missing,
            d.rows
        );
    }
    if keep.len() < 2 {
        return Err(Error::UniverseTooSmall {
            survivors: keep.len(),
        });
    }

    let mut panel = raw.select_columns(&keep);
    let mut imputed = Vec::new();
    for c in 0..panel.n_tickers() {
        let present: Vec<f64> = panel.closes.column(c).iter().flatten().copied().collect();
        let gaps = rows - present.len();
        if gaps == 0 {
            continue;
        }
        let mean = present.iter().sum::<f64>() / present.len() as f64;
        for cell in panel.closes.column_mut(c).iter_mut() {
            if cell.is_none() {
                *cell = Some(mean);
            }
        }
        imputed.push((panel.tickers[c].clone(), gaps));
    }

    Ok(CleanedPanel {
        panel,
        dropped,
        imputed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn config(tickers_: &[&str]) -> UniverseConfig {
        UniverseConfig::new(
            "test",
            tickers(tickers_).unwrap(),
            d("2021-01-01"),
            d("2021-01-03"),
            d("2021-01-03"),
            d("2021-01-10"),
        )
        .unwrap()
    }

    #[test]
    fn ticker_validation() {
        assert!(TickerId::new("MARUTI").is_ok());
        assert!(TickerId::new("").is_err());
        assert!(TickerId::new("TATA MOTORS").is_err());
    }

    #[test]
    fn config_rejects_bad_windows_and_duplicates() {
        let t = tickers(&["A", "B"]).unwrap();
        let ok = UniverseConfig::new(
            "s",
            t.clone(),
            d("2016-01-01"),
            d("2020-12-31"),
            d("2021-01-01"),
            d("2021-07-01"),
        );
        assert!(ok.is_ok());
        let overlap = UniverseConfig::new(
            "s",
            t.clone(),
            d("2016-01-01"),
            d("2021-02-01"),
            d("2021-01-01"),
            d("2021-07-01"),
        );
        assert!(matches!(overlap, Err(Error::InvalidConfig(_))));
        let dup = UniverseConfig::new(
            "s",
            tickers(&["A", "A"]).unwrap(),
            d("2016-01-01"),
            d("2020-12-31"),
            d("2021-01-01"),
            d("2021-07-01"),
        );
        assert!(matches!(dup, Err(Error::InvalidConfig(_))));
        let single = UniverseConfig::new(
            "s",
            tickers(&["A"]).unwrap(),
            d("2016-01-01"),
            d("2020-12-31"),
            d("2021-01-01"),
            d("2021-07-01"),
        );
        assert!(matches!(single, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn config_json_round_trip() {
        let json = r#"{"sector_name":"auto","tickers":["A","B"],
            "train_start":"2016-01-01","train_end":"2020-12-31",
            "test_start":"2021-01-01","test_end":"2021-07-01"}"#;
        let cfg = UniverseConfig::from_json_str(json).unwrap();
        assert_eq!(cfg.tickers.len(), 2);
        let again = UniverseConfig::from_json_str(&cfg.to_json_string().unwrap()).unwrap();
        assert_eq!(cfg, again);
        let bad = json.replace("\"B\"", "\"A\"");
        assert!(UniverseConfig::from_json_str(&bad).is_err());
    }

    #[test]
    fn loads_fully_populated_csv() {
        let csv = "date,A,B\n2021-01-01,10,20\n2021-01-02,11,21\n2021-01-03,12,22\n";
        let p = parse_csv(csv.as_bytes(), &config(&["A", "B"])).unwrap();
        assert_eq!(p.n_dates(), 3);
        assert_eq!(p.missing_count(), 0);
        assert_eq!(p.get(2, 1), Some(22.0));
    }

    #[test]
    fn empty_and_bad_cells_are_missing() {
        let csv = "date,A,B\n2021-01-01,,20\n2021-01-02,-3,21\n2021-01-03,abc,0\n";
        let p = parse_csv(csv.as_bytes(), &config(&["A", "B"])).unwrap();
        assert_eq!(p.get(0, 0), None);
        assert_eq!(p.get(1, 0), None);
        assert_eq!(p.get(2, 0), None);
        assert_eq!(p.get(2, 1), None);
        assert_eq!(p.missing_count(), 4);
    }

    #[test]
    fn unordered_rows_are_sorted_and_duplicates_rejected() {
        let csv = "date,A,B\n2021-01-03,12,22\n2021-01-01,10,20\n2021-01-02,11,21\n";
        let p = parse_csv(csv.as_bytes(), &config(&["A", "B"])).unwrap();
        assert_eq!(
            p.dates(),
            &[d("2021-01-01"), d("2021-01-02"), d("2021-01-03")]
        );
        assert_eq!(p.get(0, 0), Some(10.0));

        let dup = "date,A,B\n2021-01-02,12,22\n2021-01-01,10,20\n2021-01-02,11,21\n";
        let err = parse_csv(dup.as_bytes(), &config(&["A", "B"])).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 4, .. }), "{err}");
    }

    #[test]
    fn structural_errors() {
        let cfg = config(&["A", "B"]);
        let missing_col = "date,A,C\n2021-01-01,1,2\n";
        assert!(matches!(
            parse_csv(missing_col.as_bytes(), &cfg),
            Err(Error::MissingColumn(t)) if t == "B"
        ));
        let short = "date,A,B\n2021-01-01,1\n";
        assert!(matches!(
            parse_csv(short.as_bytes(), &cfg),
            Err(Error::MalformedRow { line: 2, .. })
        ));
        let bad_date = "date,A,B\n01/01/2021,1,2\n";
        assert!(matches!(
            parse_csv(bad_date.as_bytes(), &cfg),
            Err(Error::MalformedRow { line: 2, .. })
        ));
        let outside = "date,A,B\n2019-01-01,1,2\n";
        assert!(matches!(
            parse_csv(outside.as_bytes(), &cfg),
            Err(Error::EmptyWindow)
        ));
        assert!(matches!(
            parse_csv("".as_bytes(), &cfg),
            Err(Error::MalformedRow { line: 1, .. })
        ));
    }

    #[test]
    fn rows_outside_window_are_dropped_and_extra_columns_ignored() {
        let csv = "date,X,B,A\n2020-12-31,1,1,1\n2021-01-01,5,2,3\n2021-01-11,1,1,1\n";
        let p = parse_csv(csv.as_bytes(), &config(&["A", "B"])).unwrap();
        assert_eq!(p.n_dates(), 1);
        assert_eq!(p.tickers()[0].as_str(), "A");
        assert_eq!(p.get(0, 0), Some(3.0));
        assert_eq!(p.get(0, 1), Some(2.0));
    }

    fn panel(cols: &[&[Option<f64>]]) -> PricePanel {
        let n = cols[0].len();
        let dates = (0..n)
            .map(|i| d("2020-01-01") + chrono::Days::new(i as u64))
            .collect();
        let names: Vec<String> = (0..cols.len()).map(|i| format!("T{i}")).collect();
        let rows: Vec<Vec<Option<f64>>> = (0..n)
            .map(|r| cols.iter().map(|c| c[r]).collect())
            .collect();
        PricePanel::from_rows(dates, tickers(&names).unwrap(), &rows).unwrap()
    }

    #[test]
    fn mean_imputation() {
        let p = panel(&[
            &[Some(10.0), None, Some(20.0)],
            &[Some(1.0), Some(2.0), Some(3.0)],
            &[Some(1.0), Some(2.0), Some(3.0)],
        ]);
        let cleaned = clean_panel(&p).unwrap();
        // one of three cells missing is above the 25% threshold
        assert_eq!(cleaned.dropped.len(), 1);
        assert!(matches!(
            clean_panel(&panel(&[
                &[Some(10.0), None, Some(20.0)],
                &[Some(1.0), None, Some(3.0)]
            ])),
            Err(Error::UniverseTooSmall { survivors: 0 })
        ));

        let p = panel(&[
            &[Some(10.0), None, Some(20.0), Some(15.0)],
            &[Some(1.0), Some(2.0), Some(3.0), Some(4.0)],
            &[Some(1.0), Some(2.0), Some(3.0), Some(4.0)],
        ]);
        let cleaned = clean_panel(&p).unwrap();
        assert!(cleaned.dropped.is_empty());
        assert_eq!(cleaned.panel.get(1, 0), Some(15.0));
        assert_eq!(cleaned.imputed, vec![(TickerId::new("T0").unwrap(), 1)]);
    }

    #[test]
    fn missing_threshold_is_strict() {
        // 10 rows: 3 missing (30%) drops, 2 missing (20%) keeps
        let mut a: Vec<Option<f64>> = (1..=10).map(|v| Some(v as f64)).collect();
        let b = a.clone();
        let mut c = a.clone();
        for i in [0, 4, 7] {
            a[i] = None;
        }
        c[2] = None;
        c[3] = None;
        let cleaned = clean_panel(&panel(&[&a, &b, &c])).unwrap();
        assert_eq!(cleaned.dropped.len(), 1);
        assert_eq!(cleaned.dropped[0].ticker.as_str(), "T0");
        assert_eq!(cleaned.dropped[0].missing, 3);
        assert_eq!(cleaned.panel.n_tickers(), 2);
        assert_eq!(cleaned.panel.missing_count(), 0);

        // exactly 25%: 1 of 4 kept
        let p = panel(&[
            &[Some(1.0), None, Some(3.0), Some(5.0)],
            &[Some(1.0), Some(2.0), Some(3.0), Some(4.0)],
        ]);
        assert!(clean_panel(&p).unwrap().dropped.is_empty());
    }

    #[test]
    fn complete_panel_is_untouched() {
        let p = panel(&[&[Some(1.25), Some(2.5)], &[Some(3.0), Some(4.0)]]);
        let cleaned = clean_panel(&p).unwrap();
        assert_eq!(cleaned.panel, p);
        assert!(cleaned.dropped.is_empty() && cleaned.imputed.is_empty());
    }

    #[test]
    fn row_snapping() {
        let p = panel(&[
            &[Some(1.0), Some(2.0), Some(3.0)],
            &[Some(1.0), Some(2.0), Some(3.0)],
        ]);
        assert_eq!(p.first_row_on_or_after(d("2019-12-01")), Some(0));
        assert_eq!(p.first_row_on_or_after(d("2020-01-02")), Some(1));
        assert_eq!(p.first_row_on_or_after(d("2020-01-04")), None);
        assert_eq!(p.last_row_on_or_before(d("2020-01-02")), Some(1));
        assert_eq!(p.last_row_on_or_before(d("2019-12-31")), None);
        assert_eq!(p.last_row_on_or_before(d("2021-01-01")), Some(2));
    }
}
