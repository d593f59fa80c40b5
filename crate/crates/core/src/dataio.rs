//! Paired power series: CSV ingestion, validation, elementary error measures.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, TimeDelta};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Timestamp format used for every CSV this crate writes.
pub const DATETIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S%.f";

const PARSE_FORMATS: &[&str] = &[
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
];

pub fn parse_datetime(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    PARSE_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .or_else(|| {
            NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .ok()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
        })
}

pub fn format_datetime(t: &NaiveDateTime) -> String {
    t.format(DATETIME_FORMAT).to_string()
}

/// Which historical column plays the role of the simulation input `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    /// x = forecasts, y = actuals: simulate alternative actuals.
    #[default]
    ForecastsToActuals,
    /// x = actuals, y = forecasts: simulate forecasts.
    ActualsToForecasts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub datetime_column: String,
    pub forecast_column: String,
    pub actual_column: String,
    pub role: Role,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            datetime_column: "datetime".into(),
            forecast_column: "forecasts".into(),
            actual_column: "actuals".into(),
            role: Role::default(),
        }
    }
}

/// Timestamped `(x, y)` pairs with a production capacity.
///
/// Timestamps are strictly increasing with a uniform step and every value
/// lies in `[0, cap]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSeries {
    timestamps: Vec<NaiveDateTime>,
    x: Vec<f64>,
    y: Vec<f64>,
    cap: f64,
}

impl PairedSeries {
    pub fn new(timestamps: Vec<NaiveDateTime>, x: Vec<f64>, y: Vec<f64>, cap: f64) -> Result<Self> {
        if x.len() != timestamps.len() || y.len() != timestamps.len() {
            return Err(Error::InvalidInput(format!(
                "length mismatch: {} timestamps, {} x values, {} y values",
                timestamps.len(),
                x.len(),
                y.len()
            )));
        }
        if timestamps.is_empty() {
            return Err(Error::InvalidInput("empty series".into()));
        }
        if !(cap.is_finite() && cap > 0.0) {
            return Err(Error::InvalidInput(format!("cap must be positive, got {cap}")));
        }
        check_timestamps(&timestamps)?;
        for (i, (&xi, &yi)) in x.iter().zip(&y).enumerate() {
            for v in [xi, yi] {
                if !(0.0..=cap).contains(&v) {
                    return Err(Error::Row {
                        row: i + 1,
                        msg: format!("value {v} out of [0,cap] with cap = {cap}"),
                    });
                }
            }
        }
        Ok(Self { timestamps, x, y, cap })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    /// Observed errors `y_i - x_i`.
    pub fn errors(&self) -> Vec<f64> {
        self.x.iter().zip(&self.y).map(|(x, y)| y - x).collect()
    }

    /// The same data with the roles of `x` and `y` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            timestamps: self.timestamps.clone(),
            x: self.y.clone(),
            y: self.x.clone(),
            cap: self.cap,
        }
    }

    /// Time step between consecutive observations, `None` for a single point.
    pub fn step(&self) -> Option<TimeDelta> {
        (self.len() > 1).then(|| self.timestamps[1] - self.timestamps[0])
    }
}

fn check_timestamps(ts: &[NaiveDateTime]) -> Result<()> {
    if ts.len() < 2 {
        return Ok(());
    }
    let step = ts[1] - ts[0];
    if step <= TimeDelta::zero() {
        return Err(Error::Row {
            row: 2,
            msg: "timestamps must be strictly increasing".into(),
        });
    }
    for (i, w) in ts.windows(2).enumerate() {
        let d = w[1] - w[0];
        if d != step {
            return Err(Error::Row {
                row: i + 2,
                msg: format!(
                    "non-uniform timestep: expected {}s, found {}s",
                    step.num_seconds(),
                    d.num_seconds()
                ),
            });
        }
    }
    Ok(())
}

pub(crate) fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::InvalidInput(format!("missing column '{name}'")))
}

pub(crate) fn parse_value(rec: &csv::StringRecord, idx: usize, row: usize, name: &str) -> Result<f64> {
    let raw = rec.get(idx).map(str::trim).unwrap_or("");
    if raw.is_empty() {
        return Err(Error::Row {
            row,
            msg: format!("missing value in column '{name}'"),
        });
    }
    let v: f64 = raw.parse().map_err(|_| Error::Row {
        row,
        msg: format!("non-numeric value '{raw}' in column '{name}'"),
    })?;
    if !v.is_finite() {
        return Err(Error::Row {
            row,
            msg: format!("non-finite value '{raw}' in column '{name}'"),
        });
    }
    if v < 0.0 {
        return Err(Error::Row {
            row,
            msg: format!("value {v} out of [0,cap]"),
        });
    }
    Ok(v)
}

pub(crate) fn parse_timestamp(rec: &csv::StringRecord, idx: usize, row: usize) -> Result<NaiveDateTime> {
    let raw = rec.get(idx).unwrap_or("");
    parse_datetime(raw).ok_or_else(|| Error::Row {
        row,
        msg: format!("malformed datetime '{raw}'"),
    })
}

/// Capacity inferred from data: the largest value rounded up to an integer.
pub fn infer_cap(values: impl IntoIterator<Item = f64>) -> f64 {
    let max = values.into_iter().fold(0.0_f64, f64::max);
    max.ceil().max(1.0)
}

pub fn read_csv<R: Read>(reader: R, cap: Option<f64>, opts: &CsvOptions) -> Result<PairedSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let it = column_index(&headers, &opts.datetime_column)?;
    let ifc = column_index(&headers, &opts.forecast_column)?;
    let iac = column_index(&headers, &opts.actual_column)?;

    let (mut ts, mut fc, mut ac) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        ts.push(parse_timestamp(&rec, it, row)?);
        fc.push(parse_value(&rec, ifc, row, &opts.forecast_column)?);
        ac.push(parse_value(&rec, iac, row, &opts.actual_column)?);
    }
    let cap = match cap {
        Some(c) => c,
        None => infer_cap(fc.iter().chain(&ac).copied()),
    };
    let (x, y) = match opts.role {
        Role::ForecastsToActuals => (fc, ac),
        Role::ActualsToForecasts => (ac, fc),
    };
    PairedSeries::new(ts, x, y, cap)
}

pub fn load_csv(path: impl AsRef<Path>, cap: Option<f64>, opts: &CsvOptions) -> Result<PairedSeries> {
    let f = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(f), cap, opts)
}

pub fn write_csv<W: Write>(series: &PairedSeries, writer: W, opts: &CsvOptions) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([&opts.datetime_column, &opts.forecast_column, &opts.actual_column])?;
    let (fc, ac) = match opts.role {
        Role::ForecastsToActuals => (&series.x, &series.y),
        Role::ActualsToForecasts => (&series.y, &series.x),
    };
    for i in 0..series.len() {
        w.write_record([
            format_datetime(&series.timestamps[i]),
            fc[i].to_string(),
            ac[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(series: &PairedSeries, path: impl AsRef<Path>, opts: &CsvOptions) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_csv(series, std::io::BufWriter::new(f), opts)
}

/// Relative error `(y - x) / x`.
pub fn relative_error(x: f64, y: f64) -> Result<f64> {
    if x == 0.0 {
        return Err(Error::Domain("relative error undefined for x = 0".into()));
    }
    Ok((y - x) / x)
}

/// Mean absolute relative error. Indices with `x_i = 0` are left out of both
/// the sum and the count.
pub fn mare(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let (sum, count) = x
        .iter()
        .zip(y)
        .filter(|(&xi, _)| xi != 0.0)
        .fold((0.0, 0usize), |(s, c), (&xi, &yi)| (s + ((yi - xi) / xi).abs(), c + 1));
    if count == 0 {
        return Err(Error::Domain("MARE undefined: every x is zero".into()));
    }
    Ok(sum / count as f64)
}

pub fn mape(x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(100.0 * mare(x, y)?)
}

/// Stable permutation sorting `x` ascending.
pub fn sorted_view(x: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    idx
}

/// The input values over which scenarios are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidSelection {
    pub timestamps: Vec<NaiveDateTime>,
    pub x: Vec<f64>,
    pub subset_of_input: bool,
}

impl SidSelection {
    pub fn new(timestamps: Vec<NaiveDateTime>, x: Vec<f64>, cap: f64, subset_of_input: bool) -> Result<Self> {
        if x.is_empty() || x.len() != timestamps.len() {
            return Err(Error::InvalidInput(format!(
                "SID needs matching non-empty timestamps and values ({} vs {})",
                timestamps.len(),
                x.len()
            )));
        }
        check_timestamps(&timestamps)?;
        if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| !(0.0..=cap).contains(*v)) {
            return Err(Error::Row {
                row: i + 1,
                msg: format!("SID value {v} out of [0,cap] with cap = {cap}"),
            });
        }
        Ok(Self {
            timestamps,
            x,
            subset_of_input,
        })
    }

    /// The whole input series as SID.
    pub fn whole(series: &PairedSeries) -> Self {
        Self {
            timestamps: series.timestamps.clone(),
            x: series.x.clone(),
            subset_of_input: true,
        }
    }

    /// Inclusive datetime range of the input series.
    pub fn from_range(
        series: &PairedSeries,
        start: Option<NaiveDateTime>,
        end: Option<NaiveDateTime>,
    ) -> Result<Self> {
        if let (Some(s), Some(e)) = (start, end) {
            if s > e {
                return Err(Error::InvalidInput(format!("SID start {s} is after end {e}")));
            }
        }
        let keep: Vec<usize> = (0..series.len())
            .filter(|&i| {
                let t = series.timestamps[i];
                start.is_none_or(|s| t >= s) && end.is_none_or(|e| t <= e)
            })
            .collect();
        if keep.is_empty() {
            return Err(Error::InvalidInput("SID range selects no data".into()));
        }
        Ok(Self {
            timestamps: keep.iter().map(|&i| series.timestamps[i]).collect(),
            x: keep.iter().map(|&i| series.x[i]).collect(),
            subset_of_input: true,
        })
    }

    /// External SID from a CSV with a datetime column and one value column.
    pub fn read_csv<R: Read>(reader: R, datetime_column: &str, value_column: &str, cap: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let it = column_index(&headers, datetime_column)?;
        let iv = column_index(&headers, value_column)?;
        let (mut ts, mut xs) = (Vec::new(), Vec::new());
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            ts.push(parse_timestamp(&rec, it, i + 1)?);
            xs.push(parse_value(&rec, iv, i + 1, value_column)?);
        }
        Self::new(ts, xs, cap, false)
    }

    pub fn load_csv(path: impl AsRef<Path>, datetime_column: &str, value_column: &str, cap: f64) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f), datetime_column, value_column, cap)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "datetime,forecasts,actuals\n\
        2013-07-01 00:00:00,10,12\n\
        2013-07-01 01:00:00,20,18.5\n\
        2013-07-01 02:00:00,30,33\n";

    #[test]
    fn parses_well_formed_csv() {
        let s = read_csv(GOOD.as_bytes(), Some(100.0), &CsvOptions::default()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.x(), &[10.0, 20.0, 30.0]);
        assert_eq!(s.y(), &[12.0, 18.5, 33.0]);
        assert_eq!(s.cap(), 100.0);
        assert_eq!(s.step().unwrap().num_seconds(), 3600);
    }

    #[test]
    fn role_inversion_swaps_columns() {
        let opts = CsvOptions {
            role: Role::ActualsToForecasts,
            ..Default::default()
        };
        let s = read_csv(GOOD.as_bytes(), Some(100.0), &opts).unwrap();
        assert_eq!(s.x(), &[12.0, 18.5, 33.0]);
        let t = read_csv(GOOD.as_bytes(), Some(100.0), &CsvOptions::default()).unwrap();
        assert_eq!(s, t.swapped());
    }

    #[test]
    fn negative_value_rejected() {
        let bad = "datetime,forecasts,actuals\n2013-07-01 00:00:00,10,-5\n";
        let err = read_csv(bad.as_bytes(), Some(100.0), &CsvOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Row { row: 1, .. }));
        assert!(err.to_string().contains("out of [0,cap]"));
    }

    #[test]
    fn value_above_cap_rejected() {
        let err = read_csv(GOOD.as_bytes(), Some(25.0), &CsvOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Row { row: 3, .. }), "{err}");
    }

    #[test]
    fn malformed_rows_rejected_with_index() {
        let bad_dt = "datetime,forecasts,actuals\n2013-07-01 00:00:00,1,2\nnot-a-date,1,2\n";
        let e = read_csv(bad_dt.as_bytes(), Some(10.0), &CsvOptions::default()).unwrap_err();
        assert!(matches!(e, Error::Row { row: 2, .. }) && e.to_string().contains("datetime"));

        let bad_num = "datetime,forecasts,actuals\n2013-07-01 00:00:00,abc,2\n";
        let e = read_csv(bad_num.as_bytes(), Some(10.0), &CsvOptions::default()).unwrap_err();
        assert!(e.to_string().contains("non-numeric"));

        let missing = "datetime,forecasts,actuals\n2013-07-01 00:00:00,,2\n";
        let e = read_csv(missing.as_bytes(), Some(10.0), &CsvOptions::default()).unwrap_err();
        assert!(e.to_string().contains("missing value"));
    }

    #[test]
    fn non_uniform_step_rejected() {
        let gap = "datetime,forecasts,actuals\n\
            2013-07-01 00:00:00,1,2\n2013-07-01 01:00:00,1,2\n2013-07-01 03:00:00,1,2\n";
        let e = read_csv(gap.as_bytes(), Some(10.0), &CsvOptions::default()).unwrap_err();
        assert!(matches!(e, Error::Row { row: 3, .. }) && e.to_string().contains("non-uniform"));
    }

    #[test]
    fn cap_inferred_from_max() {
        let s = "datetime,forecasts,actuals\n2013-07-01 00:00:00,4902.2,100\n";
        let p = read_csv(s.as_bytes(), None, &CsvOptions::default()).unwrap();
        assert_eq!(p.cap(), 4903.0);
    }

    #[test]
    fn custom_column_names() {
        let s = "time,fc,act\n2013-07-01T00:00:00,1,2\n";
        let opts = CsvOptions {
            datetime_column: "time".into(),
            forecast_column: "fc".into(),
            actual_column: "act".into(),
            role: Role::ForecastsToActuals,
        };
        assert_eq!(read_csv(s.as_bytes(), Some(5.0), &opts).unwrap().len(), 1);
        assert!(read_csv(s.as_bytes(), Some(5.0), &CsvOptions::default()).is_err());
    }

    #[test]
    fn relative_error_examples() {
        assert!((relative_error(100.0, 90.0).unwrap() + 0.1).abs() < 1e-15);
        assert_eq!(relative_error(50.0, 50.0).unwrap(), 0.0);
        assert!((relative_error(200.0, 260.0).unwrap() - 0.3).abs() < 1e-15);
        assert!(matches!(relative_error(0.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn mare_examples() {
        assert!((mare(&[100.0, 200.0], &[110.0, 180.0]).unwrap() - 0.1).abs() < 1e-15);
        assert!((mare(&[0.0, 100.0], &[5.0, 90.0]).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(mare(&[3.0, 7.0], &[3.0, 7.0]).unwrap(), 0.0);
        assert!(matches!(mare(&[0.0, 0.0], &[1.0, 2.0]), Err(Error::Domain(_))));
        assert!((mape(&[100.0, 200.0], &[110.0, 180.0]).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn sorted_view_examples() {
        assert_eq!(sorted_view(&[3.0, 1.0, 2.0]), vec![1, 2, 0]);
        assert_eq!(sorted_view(&[1.0, 2.0, 3.0]), vec![0, 1, 2]);
        assert_eq!(sorted_view(&[5.0, 5.0, 5.0, 5.0]), vec![0, 1, 2, 3]);
    }

    #[test]
    fn sid_range_is_inclusive() {
        let s = read_csv(GOOD.as_bytes(), Some(100.0), &CsvOptions::default()).unwrap();
        let t1 = parse_datetime("2013-07-01 01:00:00");
        let sid = SidSelection::from_range(&s, t1, t1).unwrap();
        assert_eq!(sid.x, vec![20.0]);
        assert!(sid.subset_of_input);
        assert!(SidSelection::from_range(&s, parse_datetime("2013-07-01 02:00"), t1).is_err());
    }

    #[test]
    fn external_sid_csv() {
        let txt = "datetime,forecasts\n2014-01-01 00:00,5\n2014-01-01 01:00,7\n";
        let sid = SidSelection::read_csv(txt.as_bytes(), "datetime", "forecasts", 10.0).unwrap();
        assert_eq!(sid.x, vec![5.0, 7.0]);
        assert!(!sid.subset_of_input);
        assert!(SidSelection::read_csv(txt.as_bytes(), "datetime", "forecasts", 6.0).is_err());
    }
}
