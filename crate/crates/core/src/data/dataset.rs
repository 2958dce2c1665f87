//! `KSDS01` dataset files.
//!
//! ```text
//! "KSDS01" | u32 count | u32 H | u32 W
//! index: count × (u64 offset, u32 length, u32 record CRC-32)
//! records: u32 patient | u32 slice | u64 brain_pixels
//!          | k_in re, im | k_target re, im   (f64 LE planes)
//!          | brain mask, bit-packed
//! u32 CRC-32 of everything above
//! ```
//!
//! Offsets are relative to the start of the file.

use std::fs::{self, File};
use std::io::{Read, Seek, SeekFrom};
use std::path::Path;

use super::phantom::SliceSample;
use crate::ctensor::ComplexTensor;
use crate::error::{dim_err, Error, Result};
use crate::mask::BinaryMask;

pub const DATASET_MAGIC: &[u8; 6] = b"KSDS01";
const HEADER_LEN: usize = 6 + 12;
const INDEX_ENTRY: usize = 16;

fn record_len(h: usize, w: usize) -> usize {
    16 + 4 * 8 * h * w + (h * w).div_ceil(8)
}

fn check_sample(s: &SliceSample, h: usize, w: usize) -> Result<()> {
    if s.k_in.shape() != [1, h, w] || s.k_target.shape() != [1, h, w] || s.brain_mask.shape() != (h, w) {
        return dim_err(format!(
            "sample ({}, {}) does not match dataset size {h}x{w}",
            s.patient_id, s.slice_idx
        ));
    }
    if s.brain_pixels != s.brain_mask.count() {
        return Err(Error::Contract(format!(
            "sample ({}, {}): brain_pixels {} but mask has {}",
            s.patient_id,
            s.slice_idx,
            s.brain_pixels,
            s.brain_mask.count()
        )));
    }
    if !s.k_in.is_finite() || !s.k_target.is_finite() {
        return Err(Error::Numeric(format!("sample ({}, {}) is not finite", s.patient_id, s.slice_idx)));
    }
    Ok(())
}

fn encode_record(s: &SliceSample, out: &mut Vec<u8>) {
    out.extend_from_slice(&s.patient_id.to_le_bytes());
    out.extend_from_slice(&s.slice_idx.to_le_bytes());
    out.extend_from_slice(&(s.brain_pixels as u64).to_le_bytes());
    for t in [&s.k_in, &s.k_target] {
        for v in t.re().iter().chain(t.im()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&s.brain_mask.pack());
}

fn decode_record(bytes: &[u8], h: usize, w: usize) -> Result<SliceSample> {
    if bytes.len() != record_len(h, w) {
        return Err(Error::Format(format!("record has {} bytes, expected {}", bytes.len(), record_len(h, w))));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let n = h * w;
    let plane = |o: usize| -> Vec<f64> {
        bytes[o..o + 8 * n].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
    };
    let base = 16;
    let k_in = ComplexTensor::from_parts(&[1, h, w], plane(base), plane(base + 8 * n))?;
    let k_target = ComplexTensor::from_parts(&[1, h, w], plane(base + 16 * n), plane(base + 24 * n))?;
    let brain_mask = BinaryMask::unpack(h, w, &bytes[base + 32 * n..])?;
    Ok(SliceSample {
        k_in,
        k_target,
        brain_mask,
        patient_id: u32_at(0),
        slice_idx: u32_at(4),
        brain_pixels: u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize,
    })
}

pub fn encode_dataset(samples: &[SliceSample]) -> Result<Vec<u8>> {
    let (h, w) = match samples.first() {
        Some(s) => s.brain_mask.shape(),
        None => (0, 0),
    };
    for s in samples {
        check_sample(s, h, w)?;
    }
    let rlen = record_len(h, w);
    let data_start = HEADER_LEN + INDEX_ENTRY * samples.len();
    let mut out = Vec::with_capacity(data_start + rlen * samples.len() + 4);
    out.extend_from_slice(DATASET_MAGIC);
    for v in [samples.len(), h, w] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    let mut records = Vec::with_capacity(rlen * samples.len());
    for (i, s) in samples.iter().enumerate() {
        let start = records.len();
        encode_record(s, &mut records);
        let crc = crc32fast::hash(&records[start..]);
        out.extend_from_slice(&((data_start + i * rlen) as u64).to_le_bytes());
        out.extend_from_slice(&(rlen as u32).to_le_bytes());
        out.extend_from_slice(&crc.to_le_bytes());
    }
    out.extend_from_slice(&records);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Vec<SliceSample>> {
    let header = Header::parse(bytes)?;
    if bytes.len() < 4 {
        return Err(Error::Integrity("dataset truncated".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(Error::Integrity("dataset CRC mismatch (truncated or corrupted file)".into()));
    }
    header
        .index
        .iter()
        .map(|e| {
            let rec = bytes
                .get(e.offset as usize..e.offset as usize + e.len as usize)
                .ok_or_else(|| Error::Integrity("record beyond end of file".into()))?;
            decode_record(rec, header.h, header.w)
        })
        .collect()
}

pub fn write_dataset(samples: &[SliceSample], path: &Path) -> Result<()> {
    let bytes = encode_dataset(samples)?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Vec<SliceSample>> {
    decode_dataset(&fs::read(path)?)
}

#[derive(Debug, Clone, Copy)]
struct IndexEntry {
    offset: u64,
    len: u32,
    crc: u32,
}

#[derive(Debug)]
struct Header {
    h: usize,
    w: usize,
    index: Vec<IndexEntry>,
}

impl Header {
    fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 6 || &bytes[..6] != DATASET_MAGIC {
            return Err(Error::Format("not a KSDS01 dataset".into()));
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::Integrity("dataset header truncated".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let (count, h, w) = (u32_at(6), u32_at(10), u32_at(14));
        let end = HEADER_LEN + INDEX_ENTRY * count;
        if bytes.len() < end {
            return Err(Error::Integrity("dataset index truncated".into()));
        }
        let index = (0..count)
            .map(|i| {
                let o = HEADER_LEN + INDEX_ENTRY * i;
                IndexEntry {
                    offset: u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap()),
                    len: u32_at(o + 8) as u32,
                    crc: u32_at(o + 12) as u32,
                }
            })
            .collect();
        Ok(Self { h, w, index })
    }
}

/// Random access to samples without loading the whole file.
#[derive(Debug)]
pub struct DatasetReader {
    file: File,
    header: Header,
}

impl DatasetReader {
    pub fn open(path: &Path) -> Result<Self> {
        let mut file = File::open(path)?;
        let mut head = vec![0u8; HEADER_LEN];
        file.read_exact(&mut head).map_err(|_| Error::Integrity("dataset header truncated".into()))?;
        if &head[..6] != DATASET_MAGIC {
            return Err(Error::Format("not a KSDS01 dataset".into()));
        }
        let count = u32::from_le_bytes(head[6..10].try_into().unwrap()) as usize;
        let mut index = vec![0u8; INDEX_ENTRY * count];
        file.read_exact(&mut index).map_err(|_| Error::Integrity("dataset index truncated".into()))?;
        head.extend_from_slice(&index);
        let header = Header::parse(&head)?;
        Ok(Self { file, header })
    }

    pub fn len(&self) -> usize {
        self.header.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.header.index.is_empty()
    }

    pub fn size(&self) -> (usize, usize) {
        (self.header.h, self.header.w)
    }

    pub fn get(&mut self, i: usize) -> Result<SliceSample> {
        let e = *self
            .header
            .index
            .get(i)
            .ok_or_else(|| Error::Config(format!("sample index {i} out of range 0..{}", self.len())))?;
        let mut buf = vec![0u8; e.len as usize];
        self.file.seek(SeekFrom::Start(e.offset))?;
        self.file.read_exact(&mut buf).map_err(|_| Error::Integrity(format!("record {i} truncated")))?;
        if crc32fast::hash(&buf) != e.crc {
            return Err(Error::Integrity(format!("record {i} CRC mismatch")));
        }
        decode_record(&buf, self.header.h, self.header.w)
    }
}
