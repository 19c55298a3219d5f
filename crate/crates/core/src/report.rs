//! Deterministic run artifacts: CSV tables, gnuplot scripts and binary
//! field dumps. All formatting is fixed (shortest round-trip decimals,
//! `\n` line ends, no timestamps) so identical runs write identical bytes.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Shortest decimal that parses back to the same f64; `-0` collapses to
/// `0` so sign noise from rounding cannot break byte comparisons.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v == 0.0 {
        "0".into()
    } else {
        format!("{v}")
    }
}

/// Quote a field if it contains separators or quotes.
pub fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One escaped CSV line, without the terminating newline.
pub fn csv_line(cells: &[String]) -> String {
    let escaped: Vec<String> = cells.iter().map(|c| csv_field(c)).collect();
    escaped.join(",")
}

/// In-memory CSV with a fixed column set; rows are escaped and rendered
/// as they are pushed, so cached lines can be replayed verbatim.
#[derive(Debug, Clone)]
pub struct CsvTable {
    columns: Vec<String>,
    lines: Vec<String>,
}

impl CsvTable {
    pub fn new<I, S>(columns: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        CsvTable { columns: columns.into_iter().map(Into::into).collect(), lines: Vec::new() }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.lines.push(csv_line(&row));
    }

    /// Replay an already escaped line (e.g. a cached sweep row).
    pub fn push_rendered_line(&mut self, line: String) {
        self.lines.push(line);
    }

    pub fn num_rows(&self) -> usize {
        self.lines.len()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&csv_line(&self.columns));
        out.push('\n');
        for line in &self.lines {
            out.push_str(line);
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.render())
    }
}

pub fn write_text(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body.as_bytes()).map_err(Error::from)
}

/// Common gnuplot preamble for the emitted scripts.
pub fn gnuplot_preamble() -> String {
    "set datafile separator ','\nset grid\nset key left top\n".to_string()
}

const DUMP_MAGIC: &[u8; 4] = b"CWLF";
const DUMP_VERSION: u32 = 1;

/// Binary dump of named nodal fields: magic, version, dims, cells, then
/// per field a length-prefixed name and little-endian f64 values.
pub fn write_field_dump(
    path: &Path,
    dims: u32,
    cells: [u32; 2],
    fields: &[(&str, &[f64])],
) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(DUMP_MAGIC);
    buf.extend_from_slice(&DUMP_VERSION.to_le_bytes());
    buf.extend_from_slice(&dims.to_le_bytes());
    buf.extend_from_slice(&cells[0].to_le_bytes());
    buf.extend_from_slice(&cells[1].to_le_bytes());
    buf.extend_from_slice(&(fields.len() as u32).to_le_bytes());
    for (name, data) in fields {
        let name_bytes = name.as_bytes();
        buf.extend_from_slice(&(name_bytes.len() as u32).to_le_bytes());
        buf.extend_from_slice(name_bytes);
        buf.extend_from_slice(&(data.len() as u64).to_le_bytes());
        for v in *data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Read a dump written by `write_field_dump`; used by tests and external
/// tooling to recover the fields.
pub fn read_field_dump(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let bytes = fs::read(path)?;
    let bad = |msg: &str| Error::Config(format!("field dump {}: {msg}", path.display()));
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let end = pos.checked_add(n).ok_or_else(|| bad("length overflow"))?;
        let slice = bytes.get(pos..end).ok_or_else(|| bad("truncated"))?;
        pos = end;
        Ok(slice)
    };
    if take(4)? != DUMP_MAGIC {
        return Err(bad("bad magic"));
    }
    let read_u32 = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap());
    if read_u32(take(4)?) != DUMP_VERSION {
        return Err(bad("unsupported version"));
    }
    take(4)?; // dims
    take(8)?; // cells
    let nfields = read_u32(take(4)?) as usize;
    let mut out = Vec::with_capacity(nfields);
    for _ in 0..nfields {
        let name_len = read_u32(take(4)?) as usize;
        let name = String::from_utf8(take(name_len)?.to_vec())
            .map_err(|_| bad("field name is not utf-8"))?;
        let count = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            data.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
        }
        out.push((name, data));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_their_shortest_form() {
        for v in [0.1, 1.0 / 3.0, 2.0f64.powi(-52), 1e300, -7.25, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_f64(-0.0), "0");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }

    #[test]
    fn tables_render_with_fixed_width_rows() {
        let mut t = CsvTable::new(["a", "b, with comma"]);
        t.push_row(vec!["1".into(), "x\"y".into()]);
        let body = t.render();
        assert_eq!(body, "a,\"b, with comma\"\n1,\"x\"\"y\"\n");
        assert_eq!(t.num_rows(), 1);
    }

    #[test]
    #[should_panic(expected = "row width mismatch")]
    fn short_rows_are_rejected() {
        let mut t = CsvTable::new(["a", "b"]);
        t.push_row(vec!["1".into()]);
    }

    #[test]
    fn field_dumps_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fields.bin");
        let y = [1.0, -2.5, 3.25];
        let v = [0.0, 0.5];
        write_field_dump(&path, 1, [2, 0], &[("y", &y), ("v", &v)]).unwrap();
        let back = read_field_dump(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].0, "y");
        assert_eq!(back[0].1, y.to_vec());
        assert_eq!(back[1].0, "v");
        assert_eq!(back[1].1, v.to_vec());
    }

    #[test]
    fn corrupt_dumps_are_reported_not_panicked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(read_field_dump(&path).is_err());
        std::fs::write(&path, b"CW").unwrap();
        assert!(read_field_dump(&path).is_err());
    }
}
