//! Bit-exact wire encoding of feedback reports.
//!
//! Layout: scheme tag (1 byte), n_g (1 byte), group count (u32 LE), then
//! scheme parameters and the packed payload. Index payloads use exactly
//! `ceil(log2 n_k)` bits per index; angle payloads pack 6/4-bit fields in
//! standard order (per column: phi block, then psi block). Bits are MSB-first
//! within each byte and the tail is zero-padded to a byte boundary.

use super::givens::angle_count;
use super::{FeedbackReport, FeedbackScheme, QuantizedAngles, ReportPayload};
use crate::codebook::index_bits_for;
use crate::error::{Error, Result};
use crate::feedback::givens::compressed_bits_per_group;

struct BitWriter {
    buf: Vec<u8>,
    acc: u64,
    n_bits: u32,
}

impl BitWriter {
    fn new() -> Self {
        Self { buf: Vec::new(), acc: 0, n_bits: 0 }
    }

    fn push(&mut self, value: u32, bits: u32) {
        debug_assert!(bits <= 32);
        debug_assert!(bits == 32 || u64::from(value) < (1u64 << bits));
        self.acc = (self.acc << bits) | u64::from(value);
        self.n_bits += bits;
        while self.n_bits >= 8 {
            self.n_bits -= 8;
            self.buf.push(((self.acc >> self.n_bits) & 0xff) as u8);
        }
    }

    fn finish(mut self) -> Vec<u8> {
        if self.n_bits > 0 {
            let pad = 8 - self.n_bits;
            self.acc <<= pad;
            self.buf.push((self.acc & 0xff) as u8);
        }
        self.buf
    }
}

struct BitReader<'a> {
    buf: &'a [u8],
    byte: usize,
    acc: u64,
    n_bits: u32,
}

impl<'a> BitReader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, byte: 0, acc: 0, n_bits: 0 }
    }

    fn read(&mut self, bits: u32) -> Result<u32> {
        debug_assert!(bits <= 32);
        if bits == 0 {
            return Ok(0);
        }
        while self.n_bits < bits {
            let b = *self
                .buf
                .get(self.byte)
                .ok_or_else(|| Error::CorruptReport("report payload truncated".into()))?;
            self.byte += 1;
            self.acc = (self.acc << 8) | u64::from(b);
            self.n_bits += 8;
        }
        self.n_bits -= bits;
        let mask = (1u64 << bits) - 1;
        Ok(((self.acc >> self.n_bits) & mask) as u32)
    }

    fn bytes_consumed(&self) -> usize {
        self.byte
    }
}

/// Encodes a report to bytes; `decode_report` restores it exactly.
pub fn encode_report(report: &FeedbackReport) -> Result<Vec<u8>> {
    if report.n_g == 0 || report.n_g > 255 {
        return Err(Error::InvalidArgument(format!(
            "n_g = {} does not fit the wire header",
            report.n_g
        )));
    }
    let mut head = Vec::new();
    head.push(report.scheme.tag());
    head.push(report.n_g as u8);
    head.extend_from_slice(&(report.group_count() as u32).to_le_bytes());

    match &report.payload {
        ReportPayload::Indices { indices, n_k } => {
            head.extend_from_slice(&n_k.to_le_bytes());
            let bits = index_bits_for(*n_k as usize);
            let mut w = BitWriter::new();
            for &idx in indices {
                if idx >= *n_k {
                    return Err(Error::InvalidArgument(format!(
                        "index {idx} exceeds n_k = {n_k}"
                    )));
                }
                w.push(idx, bits);
            }
            head.extend_from_slice(&w.finish());
        }
        ReportPayload::Angles { groups, n_r, n_c, bits_phi, bits_psi } => {
            head.push(*n_r);
            head.push(*n_c);
            head.push(*bits_phi);
            head.push(*bits_psi);
            let mut w = BitWriter::new();
            for g in groups {
                pack_group(&mut w, g, *n_r as usize, *n_c as usize, *bits_phi, *bits_psi)?;
            }
            head.extend_from_slice(&w.finish());
        }
    }
    Ok(head)
}

/// Packs one group's angles in standard order: for each processed column,
/// its phi indices then its psi indices.
fn pack_group(
    w: &mut BitWriter,
    g: &QuantizedAngles,
    n_r: usize,
    n_c: usize,
    bits_phi: u8,
    bits_psi: u8,
) -> Result<()> {
    let per = angle_count(n_r, n_c);
    if g.phi_idx.len() != per || g.psi_idx.len() != per {
        return Err(Error::InvalidArgument(format!(
            "group carries {}+{} angles, expected {per}+{per}",
            g.phi_idx.len(),
            g.psi_idx.len()
        )));
    }
    let m = n_c.min(n_r - 1);
    let mut offset = 0usize;
    for i in 0..m {
        let block = n_r - 1 - i;
        for &idx in &g.phi_idx[offset..offset + block] {
            w.push(u32::from(idx), u32::from(bits_phi));
        }
        for &idx in &g.psi_idx[offset..offset + block] {
            w.push(u32::from(idx), u32::from(bits_psi));
        }
        offset += block;
    }
    Ok(())
}

pub fn decode_report(bytes: &[u8]) -> Result<FeedbackReport> {
    if bytes.len() < 6 {
        return Err(Error::CorruptReport("report shorter than its header".into()));
    }
    let scheme = FeedbackScheme::from_tag(bytes[0])?;
    let n_g = bytes[1] as usize;
    if n_g == 0 {
        return Err(Error::CorruptReport("n_g must be positive".into()));
    }
    let groups = u32::from_le_bytes(bytes[2..6].try_into().unwrap()) as usize;
    let rest = &bytes[6..];

    match scheme {
        FeedbackScheme::IndexSerializedV | FeedbackScheme::IndexIfor => {
            if rest.len() < 4 {
                return Err(Error::CorruptReport("missing candidate count".into()));
            }
            let n_k = u32::from_le_bytes(rest[..4].try_into().unwrap());
            if n_k == 0 {
                return Err(Error::CorruptReport("candidate count must be positive".into()));
            }
            let bits = index_bits_for(n_k as usize);
            let mut r = BitReader::new(&rest[4..]);
            let mut indices = Vec::with_capacity(groups);
            for _ in 0..groups {
                let idx = r.read(bits)?;
                if idx >= n_k {
                    return Err(Error::CorruptReport(format!(
                        "candidate index {idx} out of range [0, {n_k})"
                    )));
                }
                indices.push(idx);
            }
            expect_consumed(&rest[4..], r.bytes_consumed())?;
            Ok(FeedbackReport {
                scheme,
                n_g,
                bits_per_group: bits as usize,
                payload: ReportPayload::Indices { indices, n_k },
            })
        }
        FeedbackScheme::CompressedBf => {
            if rest.len() < 4 {
                return Err(Error::CorruptReport("missing angle parameters".into()));
            }
            let (n_r, n_c, bits_phi, bits_psi) = (rest[0], rest[1], rest[2], rest[3]);
            if n_r == 0 || n_c == 0 || n_c > n_r || bits_phi == 0 || bits_psi == 0 {
                return Err(Error::CorruptReport("invalid angle parameters".into()));
            }
            let per = angle_count(n_r as usize, n_c as usize);
            let m = (n_c as usize).min(n_r as usize - 1);
            let mut r = BitReader::new(&rest[4..]);
            let mut out = Vec::with_capacity(groups);
            for _ in 0..groups {
                let mut phi_idx = vec![0u16; per];
                let mut psi_idx = vec![0u16; per];
                let mut offset = 0usize;
                for i in 0..m {
                    let block = n_r as usize - 1 - i;
                    for slot in &mut phi_idx[offset..offset + block] {
                        *slot = r.read(u32::from(bits_phi))? as u16;
                    }
                    for slot in &mut psi_idx[offset..offset + block] {
                        *slot = r.read(u32::from(bits_psi))? as u16;
                    }
                    offset += block;
                }
                out.push(QuantizedAngles { phi_idx, psi_idx });
            }
            expect_consumed(&rest[4..], r.bytes_consumed())?;
            Ok(FeedbackReport {
                scheme,
                n_g,
                bits_per_group: compressed_bits_per_group(
                    n_r as usize,
                    n_c as usize,
                    bits_phi,
                    bits_psi,
                ),
                payload: ReportPayload::Angles { groups: out, n_r, n_c, bits_phi, bits_psi },
            })
        }
    }
}

fn expect_consumed(payload: &[u8], consumed: usize) -> Result<()> {
    if payload.len() != consumed {
        return Err(Error::CorruptReport(format!(
            "{} unexpected trailing bytes in report payload",
            payload.len() - consumed
        )));
    }
    Ok(())
}
