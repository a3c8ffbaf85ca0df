//! Machine-readable report emission. Every file carries a schema version and
//! the provenance hashes of the inputs that produced it; rows are written in
//! grid order so identical runs produce identical bytes.

use std::path::Path;

use serde_json::{json, Map, Value};

use bfcb_core::error::{Error, Result};
use bfcb_core::linkmodel::LinkReport;
use bfcb_core::metrics::KpiReport;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown format '{other}' (use csv | json)"))),
        }
    }
}

/// Input hashes recorded in every report, in insertion order.
#[derive(Debug, Clone, Default)]
pub struct Provenance {
    entries: Vec<(String, String)>,
}

impl Provenance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, digest: [u8; 32]) {
        self.entries.push((key.to_string(), hex(&digest)));
    }

    fn csv_comments(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(&format!("# {k}={v}\n"));
        }
        out
    }

    fn json_object(&self) -> Value {
        let mut map = Map::new();
        for (k, v) in &self.entries {
            map.insert(k.clone(), Value::String(v.clone()));
        }
        Value::Object(map)
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Plain decimal for ordinary magnitudes, scientific for the extremes, and
/// identical output for identical inputs.
fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if (1e-4..1e15).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn write_kpi_reports(
    path: &Path,
    rows: &[KpiReport],
    provenance: &Provenance,
    format: OutputFormat,
) -> Result<()> {
    let payload = match format {
        OutputFormat::Csv => {
            let mut out = provenance.csv_comments();
            out.push_str("schema_version,profile,scheme,metric,rho,nmse_db,n_points\n");
            for r in rows {
                out.push_str(&format!(
                    "{SCHEMA_VERSION},{},{},{},{},{},{}\n",
                    r.profile,
                    r.scheme,
                    r.metric,
                    fmt_f64(r.rho),
                    fmt_f64(r.nmse_db),
                    r.n_points
                ));
            }
            out
        }
        OutputFormat::Json => {
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "provenance": provenance.json_object(),
                "rows": rows,
            });
            let mut text = serde_json::to_string_pretty(&doc)
                .map_err(|e| Error::Format(format!("json encode: {e}")))?;
            text.push('\n');
            text
        }
    };
    std::fs::write(path, payload).map_err(|e| Error::io(path, e))
}

pub fn write_link_reports(
    path: &Path,
    rows: &[LinkReport],
    provenance: &Provenance,
    format: OutputFormat,
) -> Result<()> {
    let payload = match format {
        OutputFormat::Csv => {
            let mut out = provenance.csv_comments();
            out.push_str("schema_version,scheme,metric,snr_db,per,mcs,t_sounding_us,goodput_mbps\n");
            for r in rows {
                let mcs = r.mcs.map_or(String::new(), |m| m.to_string());
                out.push_str(&format!(
                    "{SCHEMA_VERSION},{},{},{},{},{},{},{}\n",
                    r.scheme,
                    r.metric,
                    fmt_f64(r.snr_db),
                    fmt_f64(r.per),
                    mcs,
                    fmt_f64(r.t_sounding_us),
                    fmt_f64(r.goodput_mbps)
                ));
            }
            out
        }
        OutputFormat::Json => {
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "provenance": provenance.json_object(),
                "rows": rows,
            });
            let mut text = serde_json::to_string_pretty(&doc)
                .map_err(|e| Error::Format(format!("json encode: {e}")))?;
            text.push('\n');
            text
        }
    };
    std::fs::write(path, payload).map_err(|e| Error::io(path, e))
}
