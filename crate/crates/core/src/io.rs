//! CSV, JSON and binary exports. Every text artifact starts with the config
//! hash and grid parameters.

use crate::blowup::IterationSequence;
use crate::error::{Error, Result};
use crate::evolution::{FieldMeta, LifespanEstimate, SpaceTimeField};
use crate::radial::Grid;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub grid: Option<Grid>,
}

impl Provenance {
    fn header<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# config_hash={}", self.config_hash)?;
        if let Some(g) = &self.grid {
            writeln!(w, "# grid dr={} r_max={} t_max={} n_r={} n_t={}", g.dr, g.r_max(), g.t_max(), g.n_r, g.n_t)?;
        }
        Ok(())
    }
}

pub fn write_lifespan_csv<W: Write>(mut w: W, prov: &Provenance, rows: &[LifespanEstimate]) -> Result<()> {
    prov.header(&mut w)?;
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["eps", "T_low", "T_high", "reason"])?;
    for e in rows {
        c.write_record([e.eps.to_string(), e.t_low.to_string(), e.t_high.to_string(), e.reason.to_string()])?;
    }
    c.flush()?;
    Ok(())
}

pub fn write_ladder_csv<W: Write>(mut w: W, prov: &Provenance, seq: &[IterationSequence]) -> Result<()> {
    prov.header(&mut w)?;
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["j", "log_C_j", "a_j", "l_j", "S_j"])?;
    for s in seq {
        c.write_record([s.j.to_string(), s.log_c.to_string(), s.a.to_string(), s.l().to_string(), s.s.to_string()])?;
    }
    c.flush()?;
    Ok(())
}

/// Columns `t, x_norm` (running sup up to `t`).
pub fn write_norm_history_csv<W: Write>(mut w: W, prov: &Provenance, history: &[(f64, f64)]) -> Result<()> {
    prov.header(&mut w)?;
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["t", "x_norm"])?;
    for (t, n) in history {
        c.write_record([t.to_string(), n.to_string()])?;
    }
    c.flush()?;
    Ok(())
}

/// Columns `r, t, u` over stored nodes.
pub fn write_field_csv<W: Write>(mut w: W, prov: &Provenance, field: &SpaceTimeField) -> Result<()> {
    prov.header(&mut w)?;
    let g = field.grid();
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["r", "t", "u"])?;
    for (i, j, u) in field.nodes() {
        c.write_record([g.r(i).to_string(), g.t(j).to_string(), u.to_string()])?;
    }
    c.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Wrapped<'a, T> {
    provenance: &'a Provenance,
    report: &'a T,
}

pub fn write_json<W: Write, T: Serialize>(mut w: W, prov: &Provenance, report: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, &Wrapped { provenance: prov, report })?;
    writeln!(w)?;
    Ok(())
}

const MAGIC: &[u8; 8] = b"WAVELAB1";

/// Little-endian checkpoint: magic, JSON header length and header, then each
/// slab as a length followed by its values. Dropped slabs have length zero.
pub fn write_field_binary<W: Write>(mut w: W, field: &SpaceTimeField) -> Result<()> {
    #[derive(Serialize)]
    struct Header<'a> {
        grid: &'a Grid,
        meta: Option<&'a FieldMeta>,
        finalized: usize,
    }
    let head = serde_json::to_vec(&Header { grid: field.grid(), meta: field.meta(), finalized: field.finalized() })?;
    w.write_all(MAGIC)?;
    w.write_all(&(head.len() as u64).to_le_bytes())?;
    w.write_all(&head)?;
    for j in 0..field.finalized() {
        let row = field.row(j).unwrap_or(&[]);
        w.write_all(&(row.len() as u64).to_le_bytes())?;
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_field_binary<R: Read>(mut r: R) -> Result<SpaceTimeField> {
    #[derive(Deserialize)]
    struct Header {
        grid: Grid,
        meta: Option<FieldMeta>,
        finalized: usize,
    }
    let bad = |m: &str| Error::Config(format!("bad checkpoint: {m}"));
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("magic"));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let mut head = vec![0u8; u64::from_le_bytes(len) as usize];
    r.read_exact(&mut head)?;
    let h: Header = serde_json::from_slice(&head)?;
    let mut rows = Vec::with_capacity(h.finalized);
    for _ in 0..h.finalized {
        r.read_exact(&mut len)?;
        let n = u64::from_le_bytes(len) as usize;
        let mut buf = vec![0u8; 8 * n];
        r.read_exact(&mut buf)?;
        rows.push(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect::<Vec<f64>>());
    }
    SpaceTimeField::from_rows(h.grid, rows, h.meta)
}
