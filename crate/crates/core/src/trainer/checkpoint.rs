//! Full training state on disk: parameters, optimizer, walkers with their RNG
//! streams, progress counters and trace.

use std::path::Path;

use super::{Optimizer, Session, TrainRecord, TrainTrace};
use crate::ansatz::{read_params, write_params, ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::sampler::WalkerBatch;

const MAGIC: &[u8; 8] = b"VMCTRAIN";
const VERSION: u32 = 1;

fn opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

fn unopt(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}

pub(crate) fn encode(s: &Session) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.u64(s.pretrain_done as u64);
    w.u64(s.train_done as u64);
    w.u32(s.burned_in as u32);
    w.u64(s.n_winsorized);
    w.u64(s.n_clipped);
    write_params(&mut w, &s.ansatz, &s.params);
    s.optimizer.write(&mut w);
    s.batch.write(&mut w);
    w.u64(s.trace.records.len() as u64);
    for r in &s.trace.records {
        w.u64(r.iteration as u64);
        for v in [
            opt(r.energy_mean),
            opt(r.energy_stderr),
            r.accept_rate,
            opt(r.pretrain_loss),
            opt(r.wall_ms),
        ] {
            w.f64(v);
        }
    }
    w.into_inner()
}

/// Restore `session` in place from bytes written by [`save_checkpoint`]. The
/// session supplies the molecule, ansatz shape and configs; they must match
/// the run that wrote the file.
pub(crate) fn decode(bytes: &[u8], s: &mut Session) -> Result<()> {
    let mut r = ByteReader::new(bytes);
    if r.bytes(8)? != MAGIC {
        return Err(Error::Checkpoint("not a training checkpoint".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "format version {version}, expected {VERSION}"
        )));
    }
    let pretrain_done = r.u64()? as usize;
    let train_done = r.u64()? as usize;
    let burned_in = r.u32()? != 0;
    let n_winsorized = r.u64()?;
    let n_clipped = r.u64()?;
    let params = read_params(&mut r, &s.ansatz)?;
    let optimizer = Optimizer::read(&mut r, s.ansatz.n_params())?;
    let batch = WalkerBatch::read(&mut r)?;
    if batch.n_electrons() != s.ansatz.n_electrons() {
        return Err(Error::Checkpoint(
            "walker electron count does not match the ansatz".into(),
        ));
    }
    let n = r.u64()? as usize;
    let mut trace = TrainTrace::default();
    for _ in 0..n {
        let iteration = r.u64()? as usize;
        let mut v = [0.0; 5];
        for x in &mut v {
            *x = r.f64()?;
        }
        trace.records.push(TrainRecord {
            iteration,
            energy_mean: unopt(v[0]),
            energy_stderr: unopt(v[1]),
            accept_rate: v[2],
            pretrain_loss: unopt(v[3]),
            wall_ms: unopt(v[4]),
        });
    }
    if !r.is_at_end() {
        return Err(Error::Checkpoint("trailing bytes after the trace".into()));
    }
    s.pretrain_done = pretrain_done;
    s.train_done = train_done;
    s.burned_in = burned_in;
    s.n_winsorized = n_winsorized;
    s.n_clipped = n_clipped;
    s.params = params;
    s.optimizer = optimizer;
    s.batch = batch;
    s.trace = trace;
    Ok(())
}

/// Write atomically via a sibling temporary file.
pub fn save_checkpoint(session: &Session, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, encode(session))?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(session: &mut Session, path: &Path) -> Result<()> {
    let bytes = std::fs::read(path)?;
    decode(&bytes, session)
}
