use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::types::{Country, Frequency, Observation, RawSeries, Sector, TransformCode};
use super::PipelineError;

#[derive(Debug, Deserialize, Serialize)]
struct Row {
    series_id: String,
    country: String,
    sector: String,
    frequency: String,
    transform_code: u8,
    date: String,
    value: Option<f64>,
}

/// Load series from a long-format CSV file, or from every `*.csv` file in a
/// directory (visited in file-name order).
pub fn load_series(path: &Path) -> Result<Vec<RawSeries>, PipelineError> {
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
            .collect();
        files.sort();
        let mut out = Vec::new();
        for f in files {
            out.extend(load_series_csv(std::fs::File::open(f)?)?);
        }
        check_unique(&out)?;
        Ok(out)
    } else {
        load_series_csv(std::fs::File::open(path)?)
    }
}

/// Parse long-format rows `(series_id, country, sector, frequency,
/// transform_code, date, value)`. Series keep their first-appearance order.
pub fn load_series_csv<R: Read>(reader: R) -> Result<Vec<RawSeries>, PipelineError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out: Vec<RawSeries> = Vec::new();
    for row in rdr.deserialize() {
        let row: Row = row?;
        let date = NaiveDate::parse_from_str(&row.date, "%Y-%m-%d")
            .map_err(|e| PipelineError::Parse(format!("series `{}` date `{}`: {e}", row.series_id, row.date)))?;
        let obs = Observation { date, value: row.value.filter(|v| v.is_finite()) };
        match out.iter_mut().find(|s| s.id == row.series_id) {
            Some(s) => s.observations.push(obs),
            None => out.push(RawSeries {
                country: row.country.parse::<Country>()?,
                sector: row.sector.parse::<Sector>()?,
                frequency: row.frequency.parse::<Frequency>()?,
                transform: TransformCode::new(row.transform_code)?,
                id: row.series_id,
                observations: vec![obs],
            }),
        }
    }
    for s in &out {
        s.validate()?;
    }
    Ok(out)
}

fn check_unique(series: &[RawSeries]) -> Result<(), PipelineError> {
    let mut ids: Vec<&str> = series.iter().map(|s| s.id.as_str()).collect();
    ids.sort_unstable();
    match ids.windows(2).find(|w| w[0] == w[1]) {
        Some(w) => Err(PipelineError::Parse(format!("series `{}` appears in more than one file", w[0]))),
        None => Ok(()),
    }
}

pub fn write_series_csv<W: Write>(writer: W, series: &[RawSeries]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_writer(writer);
    for s in series {
        let frequency = match s.frequency {
            Frequency::Monthly => "monthly",
            Frequency::Quarterly => "quarterly",
        };
        for o in &s.observations {
            w.serialize(Row {
                series_id: s.id.clone(),
                country: s.country.code().into(),
                sector: s.sector.code().into(),
                frequency: frequency.into(),
                transform_code: s.transform.code(),
                date: o.date.format("%Y-%m-%d").to_string(),
                value: o.value,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
series_id,country,sector,frequency,transform_code,date,value
ip_de,DE,M,monthly,2,2000-01-01,100
ip_de,DE,M,monthly,2,2000-02-01,
spread_it,IT,F,quarterly,0,2000-01-01,1.5
ip_de,DE,M,monthly,2,2000-03-01,102.5
";

    #[test]
    fn parses_long_format() {
        let s = load_series_csv(SAMPLE.as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].id, "ip_de");
        assert_eq!(s[0].observations.len(), 3);
        assert_eq!(s[0].observations[1].value, None);
        assert_eq!(s[1].sector, Sector::F);
        assert_eq!(s[1].frequency, Frequency::Quarterly);
    }

    #[test]
    fn write_then_read_roundtrip() {
        let s = load_series_csv(SAMPLE.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_series_csv(&mut buf, &s).unwrap();
        assert_eq!(load_series_csv(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn bad_transform_code_rejected() {
        let bad = "series_id,country,sector,frequency,transform_code,date,value\nx,DE,M,q,9,2000-01-01,1\n";
        assert!(matches!(load_series_csv(bad.as_bytes()), Err(PipelineError::Parse(_))));
    }

    #[test]
    fn directory_of_files() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<&str> = SAMPLE.lines().collect();
        std::fs::write(dir.path().join("a.csv"), format!("{}\n{}\n", rows[0], rows[3])).unwrap();
        std::fs::write(dir.path().join("b.csv"), format!("{}\n{}\n", rows[0], rows[1])).unwrap();
        let s = load_series(dir.path()).unwrap();
        assert_eq!(s.iter().map(|x| x.id.as_str()).collect::<Vec<_>>(), vec!["spread_it", "ip_de"]);
    }
}
