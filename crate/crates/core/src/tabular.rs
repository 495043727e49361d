//! Comma-separated record files with a `#`-prefixed schema header.
//!
//! Every file the toolkit reads or writes starts with one header line:
//!
//! ```text
//! #gpucost-blocks;version=1;columns=source,kernel,block,...
//! ```
//!
//! The first `;`-separated field names the format, `version` and `columns`
//! are mandatory, and any other `key=value` pairs carry file metadata.

use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("missing schema header line")]
    MissingHeader,
    #[error("malformed schema header: {0}")]
    BadHeader(String),
    #[error("expected a `{expected}` file, found `{found}`")]
    WrongFormat { expected: String, found: String },
    #[error("unsupported {format} version {found} (this build reads up to {supported})")]
    VersionMismatch { format: String, found: u32, supported: u32 },
    #[error("column mismatch: expected [{expected}], found [{found}]")]
    ColumnMismatch { expected: String, found: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount { line: u64, expected: usize, found: usize },
    #[error("line {line}: bad value `{value}` in column `{column}`")]
    BadValue { line: u64, column: String, value: String },
    #[error("missing metadata key `{0}` in header")]
    MissingMeta(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
}

impl Header {
    pub fn new(format: &str, version: u32, columns: &[&str]) -> Self {
        Header {
            format: format.to_string(),
            version,
            meta: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.meta.push((key.to_string(), value.into()));
        self
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require_meta(&self, key: &str) -> Result<&str, FormatError> {
        self.meta(key).ok_or_else(|| FormatError::MissingMeta(key.to_string()))
    }

    pub fn render(&self) -> String {
        let mut out = format!("#{};version={}", self.format, self.version);
        for (k, v) in &self.meta {
            out.push_str(&format!(";{k}={v}"));
        }
        out.push_str(";columns=");
        out.push_str(&self.columns.join(","));
        out
    }

    pub fn parse(line: &str) -> Result<Self, FormatError> {
        let body = line.trim_end().strip_prefix('#').ok_or(FormatError::MissingHeader)?;
        let mut parts = body.split(';');
        let format = parts.next().unwrap_or_default().trim().to_string();
        if format.is_empty() {
            return Err(FormatError::BadHeader(line.to_string()));
        }
        let mut version = None;
        let mut columns = None;
        let mut meta = Vec::new();
        for part in parts {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| FormatError::BadHeader(line.to_string()))?;
            match k {
                "version" => {
                    version = Some(v.parse().map_err(|_| FormatError::BadHeader(line.to_string()))?)
                }
                "columns" => columns = Some(v.split(',').map(str::to_string).collect()),
                _ => meta.push((k.to_string(), v.to_string())),
            }
        }
        match (version, columns) {
            (Some(version), Some(columns)) => Ok(Header { format, version, meta, columns }),
            _ => Err(FormatError::BadHeader(line.to_string())),
        }
    }
}

/// A parsed record file.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Header,
    rows: Vec<(u64, Vec<String>)>,
}

/// One data row, with its 1-based source line for error messages.
pub struct Record<'a> {
    table: &'a Table,
    line: u64,
    fields: &'a [String],
}

impl<'a> Record<'a> {
    pub fn line(&self) -> u64 {
        self.line
    }

    pub fn get(&self, column: &str) -> &'a str {
        let idx = self
            .table
            .header
            .columns
            .iter()
            .position(|c| c == column)
            .unwrap_or_else(|| panic!("column `{column}` not in schema"));
        &self.fields[idx]
    }

    pub fn parse<T: FromStr>(&self, column: &str) -> Result<T, FormatError> {
        let raw = self.get(column);
        raw.trim().parse().map_err(|_| FormatError::BadValue {
            line: self.line,
            column: column.to_string(),
            value: raw.to_string(),
        })
    }

    pub fn bad(&self, column: &str) -> FormatError {
        FormatError::BadValue {
            line: self.line,
            column: column.to_string(),
            value: self.get(column).to_string(),
        }
    }
}

impl Table {
    /// Parses `text`, checking the format name, the version ceiling and the
    /// exact column list.
    pub fn read(
        text: &str,
        format: &str,
        supported_version: u32,
        columns: &[&str],
    ) -> Result<Table, FormatError> {
        let first = text.lines().next().ok_or(FormatError::MissingHeader)?;
        let header = Header::parse(first)?;
        if header.format != format {
            return Err(FormatError::WrongFormat {
                expected: format.to_string(),
                found: header.format,
            });
        }
        if header.version > supported_version || header.version == 0 {
            return Err(FormatError::VersionMismatch {
                format: header.format,
                found: header.version,
                supported: supported_version,
            });
        }
        if header.columns.iter().map(String::as_str).ne(columns.iter().copied()) {
            return Err(FormatError::ColumnMismatch {
                expected: columns.join(","),
                found: header.columns.join(","),
            });
        }
        let body = text.split_once('\n').map(|(_, b)| b).unwrap_or_default();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(body.as_bytes());
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line() + 1).unwrap_or(0);
            if rec.len() != columns.len() {
                return Err(FormatError::FieldCount { line, expected: columns.len(), found: rec.len() });
            }
            rows.push((line, rec.iter().map(str::to_string).collect()));
        }
        Ok(Table { header, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = Record<'_>> {
        self.rows.iter().map(move |(line, fields)| Record { table: self, line: *line, fields })
    }
}

/// Serializes a header plus rows. Output is byte-stable for equal input.
pub fn write_table<I, R, S>(header: &Header, rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in rows {
        let fields: Vec<S> = row.into_iter().collect();
        debug_assert_eq!(fields.len(), header.columns.len());
        writer
            .write_record(fields.iter().map(|f| f.as_ref()))
            .expect("writing to a Vec cannot fail");
    }
    let body = writer.into_inner().expect("writing to a Vec cannot fail");
    let mut out = header.render();
    out.push('\n');
    out.push_str(std::str::from_utf8(&body).expect("fields are UTF-8"));
    out
}
