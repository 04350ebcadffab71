//! Bit-exact field snapshots: raw little-endian `(re, im)` pairs plus a JSON sidecar.
//!
//! Values are written site-major (sites row-major, last axis fastest), with
//! the tensor multi-index and then the spinor index varying fastest within a site.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ConnectionForm, Field, GaugePhase, C64, ZERO};
use crate::flow::FlowState;
use crate::grid::TorusGrid;

pub const SNAPSHOT_FORMAT: &str = "swflow-field-1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub format: String,
    pub n: usize,
    pub sizes: Vec<usize>,
    pub lengths: Vec<f64>,
    pub rank: usize,
    pub spinor_rank: usize,
    pub form_degree: usize,
    pub time: f64,
    pub k: usize,
    pub s0: f64,
}

/// Sidecar path for a binary snapshot: `<path>.json`.
pub fn sidecar_path(bin: &Path) -> PathBuf {
    let mut s = bin.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn field_bytes(f: &Field) -> Vec<u8> {
    let ns = f.grid().n_sites();
    let nc = f.n_comps();
    let mut out = Vec::with_capacity(ns * nc * 16);
    for site in 0..ns {
        for c in 0..nc {
            let v = f.plane(c)[site];
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    out
}

pub fn write_field(bin: &Path, f: &Field, time: f64, k: usize, s0: f64) -> Result<()> {
    let g = f.grid();
    let header = SnapshotHeader {
        format: SNAPSHOT_FORMAT.into(),
        n: g.dim(),
        sizes: g.sizes().to_vec(),
        lengths: g.lengths().to_vec(),
        rank: f.rank(),
        spinor_rank: f.spinor_rank(),
        form_degree: f.form_degree(),
        time,
        k,
        s0,
    };
    let mut w = BufWriter::new(fs::File::create(bin)?);
    w.write_all(&field_bytes(f))?;
    w.flush()?;
    fs::write(sidecar_path(bin), serde_json::to_string_pretty(&header)?)?;
    Ok(())
}

/// Read a snapshot; `grid` is reused when it matches the sidecar.
pub fn read_field(bin: &Path, grid: Option<&TorusGrid>) -> Result<(Field, SnapshotHeader)> {
    let header: SnapshotHeader = serde_json::from_str(&fs::read_to_string(sidecar_path(bin))?)?;
    if header.format != SNAPSHOT_FORMAT {
        return Err(Error::Format(format!("unknown snapshot format {:?}", header.format)));
    }
    let g = match grid {
        Some(g) if g.sizes() == header.sizes.as_slice() && g.lengths() == header.lengths.as_slice() => g.clone(),
        _ => crate::grid::make_grid(header.n, &header.sizes, &header.lengths)?,
    };
    let bytes = fs::read(bin)?;
    let ns = g.n_sites();
    let nc = g.dim().pow(header.rank as u32) * header.spinor_rank;
    if bytes.len() != ns * nc * 16 {
        return Err(Error::Format(format!(
            "{} holds {} bytes, expected {}",
            bin.display(),
            bytes.len(),
            ns * nc * 16
        )));
    }
    let mut data = vec![ZERO; ns * nc];
    for (i, chunk) in bytes.chunks_exact(16).enumerate() {
        let re = f64::from_le_bytes(chunk[..8].try_into().unwrap());
        let im = f64::from_le_bytes(chunk[8..].try_into().unwrap());
        let (site, c) = (i / nc, i % nc);
        data[c * ns + site] = C64::new(re, im);
    }
    let f = Field::from_data(&g, header.rank, header.spinor_rank, data)?.with_form_degree(header.form_degree);
    Ok((f, header))
}

/// Paths of one stored state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateFiles {
    pub t: f64,
    pub phi: String,
    pub a: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<String>,
}

/// Write `phi`, `a` and (if present) `theta` as `<stem>_phi.bin` etc. in `dir`.
/// Returned paths are relative to `dir`.
pub fn write_state(dir: &Path, stem: &str, state: &FlowState, k: usize, s0: f64) -> Result<StateFiles> {
    let name = |what: &str| format!("{stem}_{what}.bin");
    write_field(&dir.join(name("phi")), &state.phi, state.t, k, s0)?;
    write_field(&dir.join(name("a")), state.a.field(), state.t, k, s0)?;
    let theta = match &state.theta {
        Some(th) => {
            write_field(&dir.join(name("theta")), th.theta(), state.t, k, s0)?;
            Some(name("theta"))
        }
        None => None,
    };
    Ok(StateFiles { t: state.t, phi: name("phi"), a: name("a"), theta })
}

pub fn read_state(dir: &Path, files: &StateFiles) -> Result<FlowState> {
    let (phi, header) = read_field(&dir.join(&files.phi), None)?;
    let (a, _) = read_field(&dir.join(&files.a), Some(phi.grid()))?;
    let theta = match &files.theta {
        Some(p) => Some(GaugePhase::new(read_field(&dir.join(p), Some(phi.grid()))?.0)?),
        None => None,
    };
    Ok(FlowState { phi, a: ConnectionForm::project(a)?, t: header.time, theta })
}
