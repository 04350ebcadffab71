//! Run manifest and the diagnostics CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use swflow_core::flow::DiagnosticsRecord;
use swflow_core::snapshot::{read_state, StateFiles};
use swflow_core::{FlowConfig, FlowState};

use crate::config::CheckSpec;

pub const ARTIFACT: &str = "swflow";
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";

pub const CSV_VERSION: u32 = 1;
pub const CSV_COLUMNS: [&str; 12] = [
    "t",
    "E_k_total",
    "E_k_curv",
    "E_k_dirichlet",
    "E_k_scalar",
    "E_k_quartic",
    "E_sw_total",
    "sup_phi",
    "l2_phi",
    "sup_F",
    "lp_F_(k+2)",
    "energy_identity_residual",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub step: usize,
    #[serde(flatten)]
    pub files: StateFiles,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact: String,
    pub version: String,
    pub config: FlowConfig,
    pub check: CheckSpec,
    pub termination: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    /// Paths are relative to the manifest's directory.
    pub snapshots: Vec<SnapshotEntry>,
    pub diagnostics_csv: String,
    pub csv_version: u32,
    pub csv_columns: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    /// Read a manifest and check that the files it lists exist.
    pub fn read(path: &Path) -> Result<(Self, PathBuf)> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read manifest {}", path.display()))?;
        let m: RunManifest = serde_json::from_str(&text).with_context(|| format!("malformed manifest {}", path.display()))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for f in m.listed_paths() {
            if !dir.join(&f).exists() {
                bail!("manifest {} lists missing file {f}", path.display());
            }
        }
        Ok((m, dir))
    }

    pub fn listed_paths(&self) -> Vec<String> {
        let mut out = vec![self.diagnostics_csv.clone()];
        for s in &self.snapshots {
            out.push(s.files.phi.clone());
            out.push(s.files.a.clone());
            out.extend(s.files.theta.clone());
        }
        out
    }

    pub fn load_snapshot(&self, dir: &Path, index: usize) -> Result<FlowState> {
        let entry = self.snapshots.get(index).context("snapshot index out of range")?;
        Ok(read_state(dir, &entry.files)?)
    }
}

/// Diagnostics CSV with the fixed column set, every value in `{:.16e}`.
pub fn diagnostics_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for r in records {
        let e = &r.energy;
        let row = [
            r.t,
            e.total,
            e.curvature_term,
            e.dirichlet_term,
            e.scalar_term,
            e.quartic_term,
            r.sw_total,
            r.sup_phi,
            r.l2_phi,
            r.sup_f,
            r.lp_f,
            r.energy_identity_residual,
        ];
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v:.16e}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use swflow_core::functional::EnergyBreakdown;

    #[test]
    fn csv_layout_is_fixed() {
        let rec = DiagnosticsRecord {
            step: 0,
            t: 0.5,
            energy: EnergyBreakdown { curvature_term: 1.0, dirichlet_term: 2.0, scalar_term: -0.25, quartic_term: 0.0, total: 2.75 },
            sw_total: 3.0,
            sup_phi: 0.1,
            l2_phi: 0.2,
            sup_f: 0.3,
            lp_f: 0.4,
            dissipation: 9.0,
            energy_identity_residual: 0.125,
        };
        let csv = diagnostics_csv(&[rec]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].split(',').count(), 12);
        assert!(lines[1].starts_with("5.0000000000000000e-1,2.7500000000000000e0,1.0000000000000000e0,"));
        assert!(lines[1].ends_with(",1.2500000000000000e-1"));
    }
}
