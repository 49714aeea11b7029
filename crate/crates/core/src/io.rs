//! Delimited-file plumbing shared by every loader and exporter.
//!
//! Files with a `.tsv` extension are tab-separated, everything else is
//! comma-separated. Leading lines of the form `# key=value` are parsed as
//! directives (the distance tables use one for their symmetry flag, exports
//! use one for the config hash); any other `#` line is a comment.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Marker written for a missing value.
pub const MISSING: &str = "NA";

#[derive(Clone, Debug)]
pub struct DelimitedTable {
    pub path: PathBuf,
    pub header: Vec<String>,
    /// `(1-based line number, fields)`.
    pub rows: Vec<(usize, Vec<String>)>,
    pub directives: BTreeMap<String, String>,
}

impl DelimitedTable {
    /// Column index by name, or a format error naming the file.
    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::format(&self.path, format!("missing column `{name}`")))
    }

    pub fn optional_column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

pub fn delimiter_for(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") | Some("tab") => b'\t',
        _ => b',',
    }
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_delimited(path: &Path) -> Result<DelimitedTable> {
    let text = read_to_string(path)?;
    parse_delimited(path, &text, delimiter_for(path))
}

pub fn parse_delimited(path: &Path, text: &str, delimiter: u8) -> Result<DelimitedTable> {
    let mut directives = BTreeMap::new();
    for line in text.lines() {
        let Some(rest) = line.trim_start().strip_prefix('#') else {
            if line.trim().is_empty() {
                continue;
            }
            break;
        };
        if let Some((k, v)) = rest.split_once('=') {
            directives.insert(k.trim().to_string(), v.trim().to_string());
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .comment(Some(b'#'))
        .flexible(true)
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect::<Vec<_>>();
    if header.iter().all(|h| h.is_empty()) {
        return Err(Error::format(path, "missing header row"));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| line_at(text, p.byte())).unwrap_or(0);
            Error::record(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| line_at(text, p.byte())).unwrap_or(0);
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        rows.push((line, rec.iter().map(|f| f.trim().to_string()).collect()));
    }
    Ok(DelimitedTable {
        path: path.to_path_buf(),
        header,
        rows,
        directives,
    })
}

/// 1-based line number of the record starting at a byte offset. Blank
/// lines the reader skipped before the record are stepped over.
pub fn line_at(text: &str, byte: u64) -> usize {
    let bytes = text.as_bytes();
    let mut end = (byte as usize).min(text.len());
    while end < bytes.len() && (bytes[end] == b'\n' || bytes[end] == b'\r') {
        end += 1;
    }
    bytes[..end].iter().filter(|&&b| b == b'\n').count() + 1
}

/// Parses a real field; `NA`, empty and `-1`-style sentinels are the
/// caller's business.
pub fn parse_f64(table: &DelimitedTable, line: usize, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::record(&table.path, line, format!("not a number: `{field}`")))?;
    if !v.is_finite() {
        return Err(Error::record(
            &table.path,
            line,
            format!("non-finite value `{field}`"),
        ));
    }
    Ok(v)
}

pub fn format_value(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => MISSING.to_string(),
    }
}

/// Serialises rows as delimited text, preceded by `# key=value` directives.
pub fn to_delimited(
    directives: &[(&str, &str)],
    header: &[String],
    rows: &[Vec<String>],
    delimiter: u8,
) -> String {
    let mut out = String::new();
    for (k, v) in directives {
        out.push_str(&format!("# {k}={v}\n"));
    }
    let mut writer = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(Vec::new());
    writer.write_record(header).expect("in-memory write");
    for row in rows {
        writer.write_record(row).expect("in-memory write");
    }
    let bytes = writer.into_inner().expect("in-memory flush");
    out.push_str(&String::from_utf8(bytes).expect("utf-8 in, utf-8 out"));
    out
}

/// Fixed-width plain-text rendering. Numeric-looking cells are right-aligned.
pub fn render_table(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate().take(cols) {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let fmt_row = |cells: &[String]| {
        let mut line = String::new();
        for (i, cell) in cells.iter().enumerate().take(cols) {
            if i > 0 {
                line.push_str("  ");
            }
            let pad = widths[i] - cell.chars().count();
            let numeric = cell.parse::<f64>().is_ok() || cell == MISSING;
            if numeric && i > 0 {
                line.push_str(&" ".repeat(pad));
                line.push_str(cell);
            } else {
                line.push_str(cell);
                line.push_str(&" ".repeat(pad));
            }
        }
        line.trim_end().to_string()
    };
    let mut out = fmt_row(header);
    out.push('\n');
    let rule: usize = widths.iter().sum::<usize>() + 2 * cols.saturating_sub(1);
    out.push_str(&"-".repeat(rule));
    out.push('\n');
    for row in rows {
        out.push_str(&fmt_row(row));
        out.push('\n');
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directives_and_rows() {
        let text = "# symmetric=true\n# a note\nlang_a,lang_b,kind,value\neng,deu,genetic,0.5\n\nfra,spa,genetic,0.25\n";
        let t = parse_delimited(Path::new("x.csv"), text, b',').unwrap();
        assert_eq!(
            t.directives.get("symmetric").map(String::as_str),
            Some("true")
        );
        assert_eq!(t.header, ["lang_a", "lang_b", "kind", "value"]);
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[0].0, 4);
        assert_eq!(t.rows[1].0, 6);
    }

    #[test]
    fn missing_column_is_named() {
        let t = parse_delimited(Path::new("x.csv"), "a,b\n1,2\n", b',').unwrap();
        let err = t.column("c").unwrap_err().to_string();
        assert!(err.contains("`c`"), "{err}");
    }

    #[test]
    fn render_aligns() {
        let s = render_table(
            &["name".into(), "v".into()],
            &[
                vec!["a".into(), "1.5".into()],
                vec!["bbb".into(), "10".into()],
            ],
        );
        assert!(s.contains("a     1.5"));
        assert!(s.contains("bbb    10"));
    }
}
