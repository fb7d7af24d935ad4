//! Output directory handling: atomic writes, checksums, reports, manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::system::sha256_hex;
use crate::RunConfig;

pub const MANIFEST: &str = "manifest.json";
pub const RUN_INFO: &str = "run.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub seed: u64,
    pub versions: Value,
    pub outputs: Vec<OutputRecord>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
    }
}

pub fn config_hash(cfg: &RunConfig) -> String {
    sha256_hex(serde_json::to_string(cfg).expect("config serializes").as_bytes())
}

pub fn versions() -> Value {
    json!({"lclt": env!("CARGO_PKG_VERSION"), "lclt-core": lclt_core::VERSION})
}

/// Write `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path)?;
    Ok(())
}

/// The artifact directory of one run. Every file written through
/// [`OutDir::write`] is checksummed into the manifest.
pub struct OutDir {
    root: PathBuf,
    records: Vec<OutputRecord>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)?;
        Ok(OutDir { root: root.to_path_buf(), records: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        write_atomic(&self.root.join(name), contents.as_bytes())?;
        self.records.retain(|r| r.path != name);
        self.records.push(OutputRecord { path: name.to_string(), sha256: sha256_hex(contents.as_bytes()) });
        Ok(())
    }

    /// Write a file that varies between identical runs (timings), so it is
    /// kept out of the checksum list.
    pub fn write_unrecorded(&self, name: &str, contents: &str) -> Result<(), CliError> {
        write_atomic(&self.root.join(name), contents.as_bytes())
    }

    pub fn finish(self, cfg: &RunConfig) -> Result<Manifest, CliError> {
        let manifest = Manifest {
            command: cfg.command.name().to_string(),
            config: cfg.clone(),
            config_hash: config_hash(cfg),
            seed: cfg.global.seed,
            versions: versions(),
            outputs: self.records,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        write_atomic(&self.root.join(MANIFEST), text.as_bytes())?;
        Ok(manifest)
    }
}

/// A CSV table of preformatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",") + "\n";
        for r in &self.rows {
            out += &r.join(",");
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| self.rows.iter().map(|r| r[c].chars().count()).chain([self.header[c].chars().count()]).max().unwrap_or(0))
            .collect();
        let line = |cells: &[String]| {
            cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}", w = *w)).collect::<Vec<_>>().join("  ")
        };
        let mut out = line(&self.header) + "\n";
        for r in &self.rows {
            out += &line(r);
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| Value::Object(self.header.iter().cloned().zip(r.iter().map(|c| json!(c))).collect()))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Json,
    Csv,
}

/// What a command reports on stdout (and in `report.*`).
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub lines: Vec<String>,
    pub table: Option<Table>,
    pub data: Value,
}

impl Report {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => {
                let mut out = self.lines.join("\n");
                if !out.is_empty() {
                    out.push('\n');
                }
                if let Some(t) = &self.table {
                    out += &t.to_text();
                }
                out
            }
            Format::Csv => match &self.table {
                Some(t) => t.to_csv(),
                None => self.lines.join("\n") + "\n",
            },
            Format::Json => {
                let mut v = self.data.clone();
                if let (Some(t), Value::Object(m)) = (&self.table, &mut v) {
                    m.insert("table".into(), t.to_json());
                }
                serde_json::to_string_pretty(&v).expect("report serializes") + "\n"
            }
        }
    }

    pub fn file_name(format: Format) -> &'static str {
        match format {
            Format::Text => "report.txt",
            Format::Json => "report.json",
            Format::Csv => "report.csv",
        }
    }
}

/// A gnuplot script that plots columns of a CSV file in the same directory.
pub fn gnuplot_script(csv: &str, xlabel: &str, ylabel: &str, plots: &[&str]) -> String {
    let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\n");
    s += &format!("set xlabel '{xlabel}'\nset ylabel '{ylabel}'\n");
    let parts: Vec<String> = plots.iter().map(|p| format!("'{csv}' {p}")).collect();
    s += &format!("plot {}\n", parts.join(", \\\n     "));
    s
}

/// Shortest decimal that reads back to the same f64, in exponent form for
/// very small or very large magnitudes.
pub fn num(x: f64) -> String {
    if x != 0.0 && (x.abs() < 1e-4 || x.abs() >= 1e15) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn num_round_trips() {
        for x in [0.0, 1.5, -0.25, 1e-20, 3.0e17, 0.1 + 0.2] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(1e-20), "1e-20");
    }

    #[test]
    fn table_renders_csv_and_text() {
        let mut t = Table::new(&["a", "bb"]);
        t.push(vec!["1".into(), "22".into()]);
        assert_eq!(t.to_csv(), "a,bb\n1,22\n");
        assert_eq!(t.to_text(), "a  bb\n1  22\n");
        assert_eq!(t.to_json(), json!([{"a": "1", "bb": "22"}]));
    }

    #[test]
    fn atomic_write_leaves_only_the_target() {
        let dir = std::env::temp_dir().join(format!("lclt-atomic-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let target = dir.join("x.csv");
        write_atomic(&target, b"one").unwrap();
        write_atomic(&target, b"two").unwrap();
        assert_eq!(fs::read(&target).unwrap(), b"two");
        let names: Vec<_> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from("x.csv")]);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn gnuplot_script_references_the_csv() {
        let s = gnuplot_script("d.csv", "t", "y", &["using 1:2 with lines"]);
        assert!(s.contains("plot 'd.csv' using 1:2 with lines"));
        assert!(s.starts_with("set datafile separator ','"));
    }
}
