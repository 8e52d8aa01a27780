//! `MDKIT1` binary field dumps: one JSON header line, then little-endian f64s.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpinorField;
use crate::grid::GridSpec;

pub const MAGIC: &str = "MDKIT1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Complex,
    Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub name: String,
    pub kind: ValueKind,
    pub components: usize,
    pub n: [usize; 3],
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    pub time: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub endianness: String,
}

impl DumpHeader {
    pub fn new(name: &str, kind: ValueKind, components: usize, grid: &GridSpec, time: f64, epsilon: f64, delta: f64) -> Self {
        Self {
            name: name.to_string(),
            kind,
            components,
            n: grid.n(),
            lower: grid.lower(),
            upper: grid.upper(),
            time,
            epsilon,
            delta,
            endianness: "little".into(),
        }
    }

    /// Number of f64 values in the payload.
    pub fn value_count(&self) -> usize {
        let per = match self.kind {
            ValueKind::Complex => 2,
            ValueKind::Real => 1,
        };
        self.components * self.n.iter().product::<usize>() * per
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DumpRecord {
    pub header: DumpHeader,
    /// Point-major, components fastest, (re, im) interleaved for complex data.
    pub values: Vec<f64>,
}

impl DumpRecord {
    pub fn from_spinor(name: &str, psi: &SpinorField, epsilon: f64, delta: f64) -> Self {
        let header = DumpHeader::new(name, ValueKind::Complex, 4, psi.grid(), psi.time, epsilon, delta);
        let mut values = Vec::with_capacity(header.value_count());
        for i in 0..psi.grid().len() {
            for z in psi.at(i) {
                values.push(z.re);
                values.push(z.im);
            }
        }
        Self { header, values }
    }

    /// Real fields given as separate component planes.
    pub fn from_real(name: &str, grid: &GridSpec, comps: &[&[f64]], time: f64, epsilon: f64, delta: f64) -> Result<Self> {
        for c in comps {
            grid.check_len(c.len())?;
        }
        let header = DumpHeader::new(name, ValueKind::Real, comps.len(), grid, time, epsilon, delta);
        let mut values = Vec::with_capacity(header.value_count());
        for i in 0..grid.len() {
            for c in comps {
                values.push(c[i]);
            }
        }
        Ok(Self { header, values })
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let json = serde_json::to_string(&self.header).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(out, "{MAGIC} {json}")?;
        let mut bytes = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&bytes)?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut line = Vec::new();
        reader.read_until(b'\n', &mut line)?;
        let text = std::str::from_utf8(&line).map_err(|_| Error::Format("header is not UTF-8".into()))?;
        let rest = text
            .strip_prefix(MAGIC)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| Error::Format(format!("missing `{MAGIC}` magic")))?;
        let header: DumpHeader = serde_json::from_str(rest.trim_end()).map_err(|e| Error::Format(format!("bad header: {e}")))?;
        if header.endianness != "little" {
            return Err(Error::Format(format!("unsupported endianness `{}`", header.endianness)));
        }
        let count = header.value_count();
        let mut bytes = Vec::with_capacity(count * 8);
        reader.read_to_end(&mut bytes)?;
        if bytes.len() != count * 8 {
            return Err(Error::Format(format!("payload has {} bytes, expected {}", bytes.len(), count * 8)));
        }
        let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        Ok(Self { header, values })
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::read(std::fs::File::open(path)?)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let h = &self.header;
        GridSpec::new(std::array::from_fn(|j| (h.lower[j], h.upper[j])), h.n)
    }
}
