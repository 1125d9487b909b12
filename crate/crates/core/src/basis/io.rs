//! CSV export of a basis matrix plus a side-car file with the fusion
//! operators and the column vocabulary.
//!
//! Side-car format, one record per line, tab separated:
//!
//! ```text
//! # expressdyn basis vocabulary v1
//! fusion  <feature>  <average|sum>
//! column  <class.feature>
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::beat::{beat_from_f64, to_f64};
use crate::error::{Error, Result};
use crate::table::{read_table, write_table};

use super::id::{BasisId, FusionOp, FusionSpec};
use super::matrix::BasisMatrix;

const SIDECAR_MAGIC: &str = "# expressdyn basis vocabulary v1";

/// `piece.csv` → `piece.vocab`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("vocab")
}

pub fn write_basis_csv(matrix: &BasisMatrix, path: &Path) -> Result<()> {
    let mut header = vec!["beat".to_string()];
    header.extend(matrix.columns().iter().map(|c| c.to_string()));
    let rows = matrix
        .times()
        .iter()
        .zip(matrix.data().rows())
        .map(|(&t, row)| {
            let mut r = Vec::with_capacity(row.len() + 1);
            r.push(to_f64(t));
            r.extend(row.iter().copied());
            r
        });
    write_table(path, &[], &header, rows)?;

    let side = sidecar_path(path);
    fs::write(&side, sidecar_text(matrix)).map_err(|e| Error::io(&side, e))
}

fn sidecar_text(matrix: &BasisMatrix) -> String {
    let mut out = format!("{SIDECAR_MAGIC}\n");
    for (feature, op) in matrix.fusion().overrides() {
        out.push_str(&format!("fusion\t{feature}\t{}\n", op.name()));
    }
    for c in matrix.columns() {
        out.push_str(&format!("column\t{c}\n"));
    }
    out
}

/// Reads a matrix written by [`write_basis_csv`]. Without a side-car the
/// default fusion operators are assumed.
pub fn read_basis_csv(path: &Path) -> Result<BasisMatrix> {
    let table = read_table(path)?;
    table.expect_header(path, &["beat"])?;
    let columns = table.header[1..]
        .iter()
        .map(|h| h.parse::<BasisId>())
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::format(path, e.to_string()))?;

    let mut times = Vec::with_capacity(table.rows.len());
    let mut data = Array2::zeros((table.rows.len(), columns.len()));
    for (i, row) in table.rows.iter().enumerate() {
        times.push(
            beat_from_f64(row[0])
                .ok_or_else(|| Error::format(path, format!("row {}: bad beat {}", i + 1, row[0])))?,
        );
        for (j, &v) in row[1..].iter().enumerate() {
            data[[i, j]] = v;
        }
    }

    let side = sidecar_path(path);
    let fusion = if side.exists() {
        let (fusion, vocab) = read_sidecar(&side)?;
        if vocab != columns {
            return Err(Error::format(
                path,
                format!("columns disagree with {}", side.display()),
            ));
        }
        fusion
    } else {
        log::warn!("{}: no side-car, assuming default fusion", path.display());
        FusionSpec::default()
    };
    BasisMatrix::new(times, columns, data, fusion).map_err(|e| Error::format(path, e.to_string()))
}

fn read_sidecar(path: &Path) -> Result<(FusionSpec, Vec<BasisId>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(SIDECAR_MAGIC) {
        return Err(Error::format(path, "not a basis vocabulary file"));
    }
    let mut fusion = FusionSpec::default();
    let mut columns = Vec::new();
    for (i, line) in lines.enumerate() {
        let bad = |m: String| Error::format(path, format!("line {}: {m}", i + 2));
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            [] | [""] => {}
            ["fusion", feature, op] => {
                let op: FusionOp = op.parse().map_err(|e: Error| bad(e.to_string()))?;
                fusion.set(feature, op).map_err(|e| bad(e.to_string()))?;
            }
            ["column", name] => columns.push(name.parse().map_err(|e: Error| bad(e.to_string()))?),
            _ => return Err(bad(format!("unrecognised record {line:?}"))),
        }
    }
    Ok((fusion, columns))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis_matrix;
    use crate::beat::{beat, whole};
    use crate::score::fixtures::{note, part};
    use crate::score::{Score, Step};

    #[test]
    fn round_trip_is_exact() {
        let notes = vec![
            note(whole(0), beat(1, 3), Step::C, 4),
            note(beat(1, 3), beat(2, 3), Step::D, 5),
            note(beat(7, 5), whole(3), Step::B, 3),
        ];
        let score = Score::new("t", vec![part("Oboe 1", notes.clone(), whole(8)), part("Cello", notes, whole(8))]);
        let spec = FusionSpec::default().with("pitch", FusionOp::Sum).unwrap();
        let m = build_basis_matrix(&score, &spec).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("piece.csv");
        write_basis_csv(&m, &path).unwrap();
        assert!(sidecar_path(&path).exists());
        let back = read_basis_csv(&path).unwrap();
        assert_eq!(back, m);

        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("beat,cello.accent,"));
    }

    #[test]
    fn sidecar_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        fs::write(&path, "beat,x.pitch\n0,0.5\n").unwrap();
        assert_eq!(read_basis_csv(&path).unwrap().rows(), 1);
        fs::write(sidecar_path(&path), format!("{SIDECAR_MAGIC}\ncolumn\ty.pitch\n")).unwrap();
        assert!(read_basis_csv(&path).is_err());
    }
}
