use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use super::{Column, IndicatorKey, IngestError, PanelDataset, Result, YearRange};

const FIXED_HEADER: [&str; 4] = ["Country Name", "Country Code", "Indicator Name", "Indicator Code"];

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> IngestError + '_ {
    move |source| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Accepts `2010` as well as the `2010 [YR2010]` style used by some exports.
fn parse_year_header(h: &str) -> Option<i32> {
    let head = h.split_whitespace().next()?;
    head.parse().ok()
}

fn parse_cell(raw: &str, line: u64, column: &str) -> Result<Option<f64>> {
    let s = raw.trim();
    if s.is_empty() {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(IngestError::NonNumeric {
            line,
            column: column.to_string(),
            value: raw.to_string(),
        }),
    }
}

/// Loads one country from a wide indicator CSV
/// (`Country Name,Country Code,Indicator Name,Indicator Code,<years...>`).
///
/// The returned dataset spans every year of `range`; requested years absent
/// from the file become all-missing. Every year cell in the file is
/// validated, not only the selected country's.
pub fn load_panel_csv(path: &Path, country: &str, range: YearRange) -> Result<PanelDataset> {
    let to_err = csv_err(path);
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(open(path)?);
    let header = rdr.headers().map_err(&to_err)?.clone();
    if header.len() < 4 {
        return Err(IngestError::MalformedHeader(format!(
            "expected at least 4 columns, found {}",
            header.len()
        )));
    }
    for (i, expected) in FIXED_HEADER.iter().enumerate() {
        let got = header[i].trim().trim_start_matches('\u{feff}');
        if got != *expected {
            return Err(IngestError::MalformedHeader(format!(
                "column {} should be {expected:?}, found {got:?}",
                i + 1
            )));
        }
    }
    // (csv column index, year)
    let mut year_cols = Vec::new();
    for (i, h) in header.iter().enumerate().skip(4) {
        if h.trim().is_empty() {
            continue;
        }
        let year = parse_year_header(h)
            .ok_or_else(|| IngestError::MalformedHeader(format!("not a year column: {h:?}")))?;
        if year_cols.iter().any(|&(_, y)| y == year) {
            return Err(IngestError::MalformedHeader(format!("duplicate year {year}")));
        }
        year_cols.push((i, year));
    }

    let years = range.years();
    let mut columns = Vec::new();
    let mut found = false;
    for record in rdr.records() {
        let record = record.map_err(&to_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let mut values = vec![None; years.len()];
        for &(ci, year) in &year_cols {
            let cell = parse_cell(record.get(ci).unwrap_or(""), line, &header[ci])?;
            if range.contains(year) {
                values[(year - range.start) as usize] = cell;
            }
        }
        if record[1].trim() != country {
            continue;
        }
        found = true;
        let key = IndicatorKey::new(record[3].trim(), record[2].trim());
        columns.push(Column::new(key, values));
    }
    if !found {
        return Err(IngestError::CountryNotFound(country.to_string()));
    }
    PanelDataset::new(country, years, columns)
}

/// Writes the dataset in the same wide format `load_panel_csv` reads.
/// Values are written at full round-trip precision.
pub fn write_panel_csv(ds: &PanelDataset, path: &Path) -> Result<()> {
    let to_err = csv_err(path);
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header: Vec<String> = FIXED_HEADER.iter().map(|s| s.to_string()).collect();
    header.extend(ds.years().iter().map(i32::to_string));
    w.write_record(&header).map_err(&to_err)?;
    for col in ds.columns() {
        let mut row = vec![
            ds.country().to_string(),
            ds.country().to_string(),
            col.key.name.clone(),
            col.key.code.clone(),
        ];
        row.extend(col.values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        w.write_record(&row).map_err(&to_err)?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a `year,value` sidecar. Rows with an empty value are skipped.
pub fn load_target_csv(path: &Path) -> Result<BTreeMap<i32, f64>> {
    let to_err = csv_err(path);
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let header = rdr.headers().map_err(&to_err)?.clone();
    if header.len() != 2 || header[0].trim() != "year" || header[1].trim() != "value" {
        return Err(IngestError::MalformedHeader(format!(
            "target file must have header year,value; found {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut out = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(&to_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let year: i32 = record[0].trim().parse().map_err(|_| IngestError::NonNumeric {
            line,
            column: "year".into(),
            value: record[0].to_string(),
        })?;
        if let Some(v) = parse_cell(&record[1], line, "value")? {
            if out.insert(year, v).is_some() {
                return Err(IngestError::InvalidYears(format!("duplicate target year {year}")));
            }
        }
    }
    Ok(out)
}

/// Writes the dataset's target as a `year,value` sidecar; missing years are
/// written with an empty value.
pub fn write_target_csv(ds: &PanelDataset, path: &Path) -> Result<()> {
    let to_err = csv_err(path);
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["year", "value"]).map_err(&to_err)?;
    let empty = vec![None; ds.n_years()];
    let target = ds.target().unwrap_or(&empty);
    for (year, v) in ds.years().iter().zip(target) {
        w.write_record([year.to_string(), v.map(|x| x.to_string()).unwrap_or_default()])
            .map_err(&to_err)?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    fn two_indicator_file() -> String {
        let years: Vec<String> = (2010..=2023).map(|y| y.to_string()).collect();
        let mut s = format!("Country Name,Country Code,Indicator Name,Indicator Code,{}\n", years.join(","));
        for (name, code) in [("GDP growth", "NY.GDP"), ("Life exp", "SP.LE")] {
            let vals: Vec<String> = (0..14).map(|i| format!("{}.5", i)).collect();
            s.push_str(&format!("Bahrain,BHR,{name},{code},{}\n", vals.join(",")));
        }
        let vals: Vec<String> = (0..14).map(|_| String::new()).collect();
        s.push_str(&format!("Oman,OMN,GDP growth,NY.GDP,{}\n", vals.join(",")));
        s
    }

    #[test]
    fn loads_full_and_single_year() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "wdi.csv", &two_indicator_file());
        let ds = load_panel_csv(&p, "BHR", YearRange::new(2010, 2023).unwrap()).unwrap();
        assert_eq!(ds.n_years(), 14);
        assert_eq!(ds.columns().len(), 2);
        assert_eq!(ds.columns()[1].values[13], Some(13.5));

        let one = load_panel_csv(&p, "BHR", YearRange::new(2015, 2015).unwrap()).unwrap();
        assert_eq!(one.years(), &[2015]);
        assert_eq!(one.columns().len(), 2);
        assert_eq!(one.columns()[0].values, vec![Some(5.5)]);
    }

    #[test]
    fn years_absent_from_file_are_missing() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "wdi.csv", &two_indicator_file());
        let ds = load_panel_csv(&p, "BHR", YearRange::new(2022, 2025).unwrap()).unwrap();
        assert_eq!(ds.years(), &[2022, 2023, 2024, 2025]);
        assert_eq!(ds.columns()[0].values, vec![Some(12.5), Some(13.5), None, None]);
    }

    #[test]
    fn rejects_non_numeric_with_location() {
        let dir = tempfile::tempdir().unwrap();
        let body = "Country Name,Country Code,Indicator Name,Indicator Code,2010,2011\n\
                    Bahrain,BHR,A,A.1,1.0,2.0\n\
                    Bahrain,BHR,B,B.1,n/a,2.0\n";
        let p = write(&dir, "bad.csv", body);
        let err = load_panel_csv(&p, "BHR", YearRange::new(2010, 2011).unwrap()).unwrap_err();
        match err {
            IngestError::NonNumeric { line, column, value } => {
                assert_eq!(line, 3);
                assert_eq!(column, "2010");
                assert_eq!(value, "n/a");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn header_and_country_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "h.csv", "Country,Code,Name,Ind,2010\nX,BHR,a,b,1\n");
        assert!(matches!(
            load_panel_csv(&p, "BHR", YearRange::new(2010, 2010).unwrap()),
            Err(IngestError::MalformedHeader(_))
        ));
        let p = write(&dir, "c.csv", &two_indicator_file());
        assert!(matches!(
            load_panel_csv(&p, "QAT", YearRange::new(2010, 2010).unwrap()),
            Err(IngestError::CountryNotFound(_))
        ));
        assert!(matches!(
            load_panel_csv(&dir.path().join("nope.csv"), "BHR", YearRange::new(2010, 2010).unwrap()),
            Err(IngestError::Io { .. })
        ));
    }

    #[test]
    fn tolerates_trailing_empty_header_and_bracket_years() {
        let dir = tempfile::tempdir().unwrap();
        let body = "Country Name,Country Code,Indicator Name,Indicator Code,2010 [YR2010],2011 [YR2011],\n\
                    Bahrain,BHR,A,A.1,1.0,,\n";
        let p = write(&dir, "t.csv", body);
        let ds = load_panel_csv(&p, "BHR", YearRange::new(2010, 2011).unwrap()).unwrap();
        assert_eq!(ds.columns()[0].values, vec![Some(1.0), None]);
    }

    #[test]
    fn target_sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "wdi.csv", &two_indicator_file());
        let ds = load_panel_csv(&p, "BHR", YearRange::new(2010, 2013).unwrap()).unwrap();
        let ds = ds.with_target(Some(vec![Some(61.25), None, Some(0.1 + 0.2), Some(-3.0)])).unwrap();
        let tp = dir.path().join("target.csv");
        write_target_csv(&ds, &tp).unwrap();
        let t = load_target_csv(&tp).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t[&2012], 0.1 + 0.2);
        assert!(!t.contains_key(&2011));
    }

    fn arb_dataset() -> impl Strategy<Value = PanelDataset> {
        (1usize..6, 1usize..5).prop_flat_map(|(n_years, n_cols)| {
            proptest::collection::vec(
                proptest::collection::vec(proptest::option::of(-1e12f64..1e12), n_years),
                n_cols,
            )
            .prop_map(move |cols| {
                let columns = cols
                    .into_iter()
                    .enumerate()
                    .map(|(i, v)| Column::new(IndicatorKey::new(format!("IND.{i}"), format!("name, \"{i}\"")), v))
                    .collect();
                PanelDataset::new("BHR", (2000..2000 + n_years as i32).collect(), columns).unwrap()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn panel_csv_round_trip(ds in arb_dataset()) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("rt.csv");
            write_panel_csv(&ds, &p).unwrap();
            let range = YearRange::new(ds.years()[0], *ds.years().last().unwrap()).unwrap();
            let back = load_panel_csv(&p, "BHR", range).unwrap();
            prop_assert_eq!(back, ds);
        }
    }
}
