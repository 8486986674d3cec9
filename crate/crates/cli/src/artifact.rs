//! Output artifacts.
//!
//! Every artifact embeds the resolved configuration next to the results so a
//! run can be replayed from the file alone. JSON output is a pretty-printed
//! envelope `{schema_version, command, config, results}`; CSV output starts
//! with one `#`-prefixed compact JSON line carrying the same envelope minus
//! the results, then a header row, then data rows. Files are written to a
//! temporary sibling and renamed, so interrupted runs never leave truncated
//! artifacts behind.

use serde::Serialize;
use std::path::Path;

#[derive(Clone, Copy, PartialEq, Eq, Debug, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Explicit `--format` wins; otherwise a `.csv` output path selects CSV and
/// everything else is JSON.
pub fn resolve_format(explicit: Option<Format>, out: Option<&Path>) -> Format {
    if let Some(f) = explicit {
        return f;
    }
    match out.and_then(|p| p.extension()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
        _ => Format::Json,
    }
}

#[derive(Serialize)]
pub struct Envelope<C: Serialize, R: Serialize> {
    pub schema_version: u32,
    pub command: &'static str,
    pub config: C,
    pub results: R,
}

impl<C: Serialize, R: Serialize> Envelope<C, R> {
    pub fn new(command: &'static str, config: C, results: R) -> Self {
        Envelope {
            schema_version: multinorm::SCHEMA_VERSION,
            command,
            config,
            results,
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("artifacts serialize");
        text.push('\n');
        text
    }

    /// The CSV rendering: metadata comment, header, rows.
    pub fn to_csv(&self, header: &[&str], rows: &[Vec<String>]) -> String {
        let meta = serde_json::json!({
            "schema_version": self.schema_version,
            "command": self.command,
            "config": self.config,
        });
        let mut out = format!("# {meta}\n");
        out.push_str(&header.join(","));
        out.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Print to stdout or write atomically to `path`.
pub fn emit(path: Option<&Path>, content: &str) -> Result<(), String> {
    match path {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(p) => write_atomic(p, content),
    }
}

pub fn write_atomic(path: &Path, content: &str) -> Result<(), String> {
    let mut tmp_name = path.as_os_str().to_owned();
    tmp_name.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp_name);
    std::fs::write(&tmp, content)
        .map_err(|e| format!("cannot write {}: {e}", tmp.display()))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| format!("cannot move {} into place: {e}", tmp.display()))
}

/// Shortest round-trip decimal rendering; stable across platforms.
pub fn num(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_meta_comment_then_header() {
        let env = Envelope::new("demo", serde_json::json!({"seed": 1}), ());
        let text = env.to_csv(&["a", "b"], &[vec!["1".into(), "2".into()]]);
        let mut lines = text.lines();
        let meta = lines.next().unwrap();
        assert!(meta.starts_with("# {"));
        assert!(meta.contains("\"demo\""));
        assert_eq!(lines.next().unwrap(), "a,b");
        assert_eq!(lines.next().unwrap(), "1,2");
    }

    #[test]
    fn format_resolution_prefers_explicit_choice() {
        let csv_path = Path::new("out.CSV");
        assert_eq!(resolve_format(None, Some(csv_path)), Format::Csv);
        assert_eq!(resolve_format(None, Some(Path::new("out.json"))), Format::Json);
        assert_eq!(resolve_format(None, None), Format::Json);
        assert_eq!(resolve_format(Some(Format::Json), Some(csv_path)), Format::Json);
    }

    #[test]
    fn atomic_write_replaces_content() {
        let path = std::env::temp_dir().join("artifact_atomic_test.txt");
        write_atomic(&path, "first").unwrap();
        write_atomic(&path, "second").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second");
    }
}
