use std::io::Write;
use std::path::Path;

use ifsdim_core::{Error, Result, RunConfig};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance written at the top of every output.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure_sha256: Option<String>,
    pub config: RunConfig,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Meta {
    pub fn new(command: &str, config: &RunConfig) -> Result<Self> {
        let json = serde_json::to_string(config).map_err(|e| Error::Config(e.to_string()))?;
        Ok(Meta {
            version: VERSION.to_string(),
            command: command.to_string(),
            config_sha256: sha256_hex(json.as_bytes()),
            seed: config.run.seed,
            measure_sha256: None,
            config: config.clone(),
        })
    }

    /// Comment lines, without the `# ` prefix.
    pub fn header_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("ifsdim {}", self.version),
            format!("command: {}", self.command),
            format!("config_sha256: {}", self.config_sha256),
            format!("seed: {}", self.seed),
        ];
        if let Some(h) = &self.measure_sha256 {
            lines.push(format!("measure_sha256: {h}"));
        }
        lines.push(format!(
            "config: {}",
            serde_json::to_string(&self.config).expect("config serializes")
        ));
        lines
    }

    pub fn header(&self) -> String {
        self.header_lines().iter().map(|l| format!("# {l}\n")).collect()
    }
}

/// `{"meta": ..., <fields of body>}` pretty-printed.
pub fn json_document<T: Serialize>(meta: &Meta, body: &T) -> Result<String> {
    let mut doc = serde_json::Map::new();
    doc.insert("meta".into(), to_value(meta)?);
    match to_value(body)? {
        serde_json::Value::Object(fields) => doc.extend(fields),
        other => {
            doc.insert("result".into(), other);
        }
    }
    let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(doc)).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| Error::Io(e.to_string()))
}

/// Comment header, `extra` comment lines, then CSV rows (the first row
/// names the columns).
pub fn csv_document(meta: &Meta, extra: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut out = meta.header().into_bytes();
    for line in extra {
        out.extend_from_slice(format!("# {line}\n").as_bytes());
    }
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut out);
        for row in rows {
            w.write_record(row).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
    }
    String::from_utf8(out).map_err(|e| Error::Io(e.to_string()))
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(std::fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder
        .tempfile_in(dir)
        .map_err(|e| Error::Io(format!("cannot create a temporary file in {}: {e}", dir.display())))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| Error::Io(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}

/// To `path` atomically, or to stdout.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, bytes),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Shortest round-trip decimal, empty for `None` and `NaN`.
pub fn num(v: impl Into<Option<f64>>) -> String {
    match v.into() {
        Some(x) if !x.is_nan() => format!("{x}"),
        _ => String::new(),
    }
}

pub fn point_field(x: &[f64]) -> String {
    x.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(";")
}
