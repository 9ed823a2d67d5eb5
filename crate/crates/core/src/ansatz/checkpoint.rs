//! Little-endian binary container for parameter vectors.

use super::{Ansatz, AnsatzConfig, AnsatzParams};
use crate::error::{Error, Result};

const PARAMS_MAGIC: &[u8; 8] = b"VMCPARAM";
const PARAMS_VERSION: u32 = 1;

#[derive(Debug, Default)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u128(&mut self, v: u128) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for x in v {
            self.f64(*x);
        }
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.buf
    }
}

pub struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint(format!(
                "truncated: needed {n} bytes at offset {}, file has {}",
                self.pos,
                self.buf.len()
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    pub fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.bytes(16)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        if n > (self.buf.len() - self.pos) / 8 {
            return Err(Error::Checkpoint(format!(
                "truncated: vector of {n} values"
            )));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn is_at_end(&self) -> bool {
        self.pos == self.buf.len()
    }
}

/// Append the parameter section: magic, version, shape header, payload.
pub fn write_params(w: &mut ByteWriter, ansatz: &Ansatz, params: &AnsatzParams) {
    let c = ansatz.config();
    w.bytes(PARAMS_MAGIC);
    w.u32(PARAMS_VERSION);
    for v in [
        c.n_determinants,
        c.hidden_one,
        c.hidden_two,
        c.n_layers,
        c.n_up,
        c.n_down,
        ansatz.n_atoms(),
    ] {
        w.u64(v as u64);
    }
    w.f64s(&params.0);
}

/// Read a parameter section and check it against `ansatz`.
pub fn read_params(r: &mut ByteReader<'_>, ansatz: &Ansatz) -> Result<AnsatzParams> {
    if r.bytes(8)? != PARAMS_MAGIC {
        return Err(Error::Checkpoint("not a parameter section".into()));
    }
    let version = r.u32()?;
    if version != PARAMS_VERSION {
        return Err(Error::Checkpoint(format!(
            "parameter format version {version}, expected {PARAMS_VERSION}"
        )));
    }
    let mut dims = [0usize; 7];
    for d in &mut dims {
        *d = r.u64()? as usize;
    }
    let stored = AnsatzConfig {
        n_determinants: dims[0],
        hidden_one: dims[1],
        hidden_two: dims[2],
        n_layers: dims[3],
        n_up: dims[4],
        n_down: dims[5],
    };
    if &stored != ansatz.config() || dims[6] != ansatz.n_atoms() {
        return Err(Error::Checkpoint(format!(
            "checkpoint shapes {stored:?} with {} atoms do not match the current ansatz",
            dims[6]
        )));
    }
    let values = r.f64s()?;
    if values.len() != ansatz.n_params() {
        return Err(Error::Checkpoint(format!(
            "{} parameters stored, {} expected",
            values.len(),
            ansatz.n_params()
        )));
    }
    Ok(AnsatzParams(values))
}
