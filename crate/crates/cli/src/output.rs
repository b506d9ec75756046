//! Result rendering. One rectangular table per run, self-describing through
//! a metadata echo of the resolved configuration.

use std::io::Write;
use std::path::Path;

use crate::config::OutputFormat;

pub struct ResultTable {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

/// 17 significant digits: enough to round-trip any f64 exactly.
fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

impl ResultTable {
    pub fn render(&self, format: OutputFormat) -> String {
        for row in &self.rows {
            assert_eq!(row.len(), self.columns.len(), "ragged result table");
        }
        match format {
            OutputFormat::Csv => self.render_csv(),
            OutputFormat::Json => self.render_json(),
        }
    }

    fn render_csv(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.metadata {
            out.push_str(&format!("# {key} = {value}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| sig17(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    fn render_json(&self) -> String {
        let metadata: serde_json::Map<String, serde_json::Value> = self
            .metadata
            .iter()
            .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
            .collect();
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                serde_json::Value::Array(
                    row.iter()
                        .map(|v| {
                            serde_json::Number::from_f64(*v)
                                .map(serde_json::Value::Number)
                                // non-finite cells (absent asymptotics) render as null
                                .unwrap_or(serde_json::Value::Null)
                        })
                        .collect(),
                )
            })
            .collect();
        let doc = serde_json::json!({
            "metadata": metadata,
            "columns": self.columns,
            "rows": rows,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("table serializes");
        text.push('\n');
        text
    }
}

/// Write through a temporary file in the destination directory, then rename:
/// readers never observe a half-written table.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(dir) => tempfile::NamedTempFile::new_in(dir)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
