//! Artifact writing: CSV or JSON primary files plus a `.meta.json` sidecar.
//!
//! Primary files depend only on the configuration; wall-clock data goes to
//! the sidecar so re-runs are byte-identical.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::Format;
use crate::error::{CliError, CliResult};

/// Bumped whenever a column layout changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
    Bool(bool),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(x) => write!(f, "{x}"),
            Cell::Text(s) => f.write_str(s),
            Cell::Bool(b) => write!(f, "{b}"),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[(&str, &str)]) -> Self {
        Table {
            columns: columns.iter().map(|(n, u)| Column { name: n.to_string(), unit: u.to_string() }).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&mut self, name: impl Into<String>, unit: &str) {
        self.columns.push(Column { name: name.into(), unit: unit.into() });
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.columns.iter().map(|c| format!("{} [{}]", c.name, c.unit)))?;
        for row in &self.rows {
            out.write_record(row.iter().map(|c| c.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// What a command produces: a main table, optional named side tables and a summary.
#[derive(Debug, Default)]
pub struct Artifact {
    pub command: &'static str,
    pub table: Table,
    pub extra: Vec<(&'static str, Table)>,
    pub summary: Map<String, Value>,
    /// Replaces the generated JSON document.
    pub json: Option<Value>,
    /// Timing data kept out of the primary files.
    pub meta: Map<String, Value>,
}

impl Artifact {
    pub fn new(command: &'static str, table: Table) -> Self {
        Artifact { command, table, ..Default::default() }
    }

    pub fn note(&mut self, key: &str, v: impl Serialize) {
        self.summary.insert(key.into(), serde_json::to_value(v).expect("serializable summary"));
    }

    fn to_json(&self) -> Value {
        if let Some(v) = &self.json {
            return v.clone();
        }
        let mut doc = Map::new();
        doc.insert("schema_version".into(), json!(SCHEMA_VERSION));
        doc.insert("command".into(), json!(self.command));
        doc.insert("columns".into(), json!(self.table.columns));
        doc.insert("rows".into(), json!(self.table.rows));
        for (name, t) in &self.extra {
            doc.insert(name.to_string(), json!({ "columns": t.columns, "rows": t.rows }));
        }
        doc.insert("summary".into(), Value::Object(self.summary.clone()));
        Value::Object(doc)
    }
}

/// Where the primary file goes: `--out`, else `$LMSZ_OUT_DIR/<command>.<ext>`, else the
/// working directory. An existing directory given to `--out` receives `<command>.<ext>`.
pub fn resolve_path(out: Option<&Path>, env_dir: Option<&Path>, command: &str, format: Format) -> Option<PathBuf> {
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let file = format!("{command}.{ext}");
    match out {
        Some(p) if p.as_os_str() == "-" => None,
        Some(p) if p.is_dir() => Some(p.join(file)),
        Some(p) => Some(p.to_path_buf()),
        None => Some(env_dir.unwrap_or(Path::new(".")).join(file)),
    }
}

fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

fn io_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes the artifact and returns every file created, sidecar last.
pub fn write(artifact: &Artifact, path: Option<&Path>, format: Format, mut meta: Map<String, Value>) -> CliResult<Vec<PathBuf>> {
    let Some(path) = path else {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        match format {
            Format::Csv => {
                artifact.table.write_csv(&mut lock).map_err(|e| CliError::Io(e.to_string()))?;
                for (name, t) in &artifact.extra {
                    writeln!(lock, "# {name}").map_err(|e| CliError::Io(e.to_string()))?;
                    t.write_csv(&mut lock).map_err(|e| CliError::Io(e.to_string()))?;
                }
            }
            Format::Json => {
                serde_json::to_writer_pretty(&mut lock, &artifact.to_json()).map_err(|e| CliError::Io(e.to_string()))?;
                writeln!(lock).map_err(|e| CliError::Io(e.to_string()))?;
            }
        }
        return Ok(Vec::new());
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut files = vec![path.to_path_buf()];
    match format {
        Format::Csv => {
            let f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
            artifact.table.write_csv(f).map_err(|e| io_err(path, e))?;
            for (name, t) in &artifact.extra {
                let p = sibling(path, &format!("_{name}"), "csv");
                let f = std::fs::File::create(&p).map_err(|e| io_err(&p, e))?;
                t.write_csv(f).map_err(|e| io_err(&p, e))?;
                files.push(p);
            }
            if !artifact.summary.is_empty() {
                let p = sibling(path, "_summary", "json");
                write_json(&p, &Value::Object(artifact.summary.clone()))?;
                files.push(p);
            }
        }
        Format::Json => write_json(path, &artifact.to_json())?,
    }
    let sidecar = sibling(path, ".meta", "json");
    meta.insert("files".into(), json!(files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>()));
    meta.extend(artifact.meta.clone());
    write_json(&sidecar, &Value::Object(meta))?;
    files.push(sidecar);
    Ok(files)
}

fn write_json(path: &Path, v: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| io_err(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}
