//! Numeric CSV tables with optional `# key: value` metadata lines on top.

use std::fs;
use std::path::Path;

use crate::beat::fmt_f64;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Table {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Fails unless the header starts with `expected`.
    pub fn expect_header(&self, path: &Path, expected: &[&str]) -> Result<()> {
        let ok = self.header.len() >= expected.len()
            && self.header.iter().zip(expected).all(|(h, e)| h == e);
        if ok {
            Ok(())
        } else {
            Err(Error::format(
                path,
                format!("expected header {:?}, found {:?}", expected.join(","), self.header.join(",")),
            ))
        }
    }
}

pub(crate) fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text).map_err(|m| Error::format(path, m))
}

pub(crate) fn parse_table(text: &str) -> std::result::Result<Table, String> {
    let mut meta = Vec::new();
    let mut body_start = 0;
    for line in text.split_inclusive('\n') {
        let Some(rest) = line.trim_start().strip_prefix('#') else {
            break;
        };
        if let Some((k, v)) = rest.split_once(':') {
            meta.push((k.trim().to_string(), v.trim().to_string()));
        }
        body_start += line.len();
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text[body_start..].as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err("missing header row".into());
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let line = rec.position().map_or(i + 2, |p| p.line() as usize);
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, s)| {
                s.parse::<f64>().map_err(|_| {
                    format!("line {line}, column {:?}: {s:?} is not a number", header[j])
                })
            })
            .collect::<std::result::Result<Vec<f64>, String>>()?;
        rows.push(row);
    }
    Ok(Table { meta, header, rows })
}

pub(crate) fn write_table(
    path: &Path,
    meta: &[(&str, String)],
    header: &[String],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<()> {
    let mut out = String::new();
    for (k, v) in meta {
        out.push_str(&format!("# {k}: {v}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |e: csv::Error| Error::format(path, e.to_string());
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(row.iter().map(|&x| fmt_f64(x))).map_err(wrap)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::format(path, e.to_string()))?;
    out.push_str(&String::from_utf8_lossy(&bytes));
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metadata_header_and_rows() {
        let t = parse_table("# normalized: true\n# block_sec: 0.5\na,b\n1,2.5\n-3e-1, 4\n").unwrap();
        assert_eq!(t.meta("normalized"), Some("true"));
        assert_eq!(t.meta("block_sec"), Some("0.5"));
        assert_eq!(t.header, vec!["a", "b"]);
        assert_eq!(t.rows, vec![vec![1.0, 2.5], vec![-0.3, 4.0]]);
    }

    #[test]
    fn bad_cells_and_ragged_rows_fail() {
        assert!(parse_table("a,b\n1,x\n").unwrap_err().contains("\"b\""));
        assert!(parse_table("a,b\n1\n").is_err());
        assert!(parse_table("").is_err());
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let header = vec!["x".to_string(), "y,z".to_string()];
        write_table(&path, &[("k", "v".into())], &header, vec![vec![0.1, 1e-300]]).unwrap();
        let t = read_table(&path).unwrap();
        assert_eq!(t.header, header);
        assert_eq!(t.rows, vec![vec![0.1, 1e-300]]);
        assert_eq!(t.meta("k"), Some("v"));
    }
}
