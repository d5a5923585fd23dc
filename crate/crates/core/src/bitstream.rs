//! Framed container for quantizer indices (`.spc` files).
//!
//! Layout: an 18-byte little-endian header followed by the index payload.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "SPC1"
//! 4       4     sample_rate (u32, 16000)
//! 8       1     num_stages (u8)
//! 9       1     codebook_bits (u8, always 10)
//! 10      4     frame_count (u32)
//! 14      4     original_length in samples (u32)
//! ```
//!
//! Payload: indices written frame-major, stage-minor, 10 bits each, MSB
//! first, zero-padded to a byte boundary. Exactly
//! `ceil(frame_count * num_stages * 10 / 8)` bytes.

use crate::audio::SAMPLES_PER_FRAME;
use crate::error::{CodecError, Result};
use crate::rvq::CodeSequence;
use ndarray::Array2;
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"SPC1";
pub const HEADER_BYTES: usize = 18;
pub const CODEBOOK_BITS: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitstreamHeader {
    pub sample_rate: u32,
    pub num_stages: u8,
    pub codebook_bits: u8,
    pub frame_count: u32,
    pub original_length: u32,
}

impl BitstreamHeader {
    pub fn new(num_stages: u8, frame_count: u32, original_length: u32) -> Self {
        Self {
            sample_rate: 16_000,
            num_stages,
            codebook_bits: CODEBOOK_BITS,
            frame_count,
            original_length,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.codebook_bits != CODEBOOK_BITS {
            return Err(CodecError::Format(format!(
                "codebook_bits must be {CODEBOOK_BITS}, got {}",
                self.codebook_bits
            )));
        }
        if self.original_length as usize > self.frame_count as usize * SAMPLES_PER_FRAME {
            return Err(CodecError::Corruption(format!(
                "original_length {} exceeds {} frames worth of samples",
                self.original_length, self.frame_count
            )));
        }
        Ok(())
    }

    /// Exact payload size in bytes.
    pub fn payload_bytes(&self) -> usize {
        (self.frame_count as usize * self.num_stages as usize * self.codebook_bits as usize)
            .div_ceil(8)
    }

    fn to_bytes(self) -> [u8; HEADER_BYTES] {
        let mut out = [0u8; HEADER_BYTES];
        out[0..4].copy_from_slice(&MAGIC);
        out[4..8].copy_from_slice(&self.sample_rate.to_le_bytes());
        out[8] = self.num_stages;
        out[9] = self.codebook_bits;
        out[10..14].copy_from_slice(&self.frame_count.to_le_bytes());
        out[14..18].copy_from_slice(&self.original_length.to_le_bytes());
        out
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_BYTES {
            return Err(CodecError::Corruption("bitstream shorter than header".into()));
        }
        if bytes[0..4] != MAGIC {
            return Err(CodecError::Format("bad magic; not an SPC1 bitstream".into()));
        }
        let header = Self {
            sample_rate: u32::from_le_bytes(bytes[4..8].try_into().unwrap()),
            num_stages: bytes[8],
            codebook_bits: bytes[9],
            frame_count: u32::from_le_bytes(bytes[10..14].try_into().unwrap()),
            original_length: u32::from_le_bytes(bytes[14..18].try_into().unwrap()),
        };
        header.validate()?;
        Ok(header)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitstreamBlob {
    pub header: BitstreamHeader,
    pub payload: Vec<u8>,
}

/// Pack quantizer indices into a blob. Deterministic byte-for-byte.
pub fn pack(codes: &CodeSequence, header: &BitstreamHeader) -> Result<BitstreamBlob> {
    header.validate()?;
    if codes.frames() != header.frame_count as usize
        || codes.stages() != header.num_stages as usize
    {
        return Err(CodecError::Contract(format!(
            "header says {}x{}, codes are {}x{}",
            header.frame_count,
            header.num_stages,
            codes.frames(),
            codes.stages()
        )));
    }
    let bits = header.codebook_bits as u32;
    let limit = 1u32 << bits;
    let mut payload = Vec::with_capacity(header.payload_bytes());
    let mut acc: u64 = 0;
    let mut nbits: u32 = 0;
    for t in 0..codes.frames() {
        for s in 0..codes.stages() {
            let v = codes.indices[[t, s]] as u32;
            if v >= limit {
                return Err(CodecError::Contract(format!(
                    "index {v} does not fit in {bits} bits"
                )));
            }
            acc = (acc << bits) | v as u64;
            nbits += bits;
            while nbits >= 8 {
                payload.push((acc >> (nbits - 8)) as u8);
                nbits -= 8;
                acc &= (1 << nbits) - 1;
            }
        }
    }
    if nbits > 0 {
        payload.push((acc << (8 - nbits)) as u8);
    }
    debug_assert_eq!(payload.len(), header.payload_bytes());
    Ok(BitstreamBlob {
        header: *header,
        payload,
    })
}

/// Inverse of [`pack`]: `unpack(pack(c, h)) == (h, c)` exactly. Fails closed
/// on any size inconsistency.
pub fn unpack(blob: &BitstreamBlob) -> Result<(BitstreamHeader, CodeSequence)> {
    let header = blob.header;
    header.validate()?;
    if blob.payload.len() != header.payload_bytes() {
        return Err(CodecError::Corruption(format!(
            "payload is {} bytes, header implies {}",
            blob.payload.len(),
            header.payload_bytes()
        )));
    }
    let frames = header.frame_count as usize;
    let stages = header.num_stages as usize;
    let bits = header.codebook_bits as u32;
    let mut indices = Array2::<u16>::zeros((frames, stages));
    let mut acc: u64 = 0;
    let mut nbits: u32 = 0;
    let mut bytes = blob.payload.iter();
    for t in 0..frames {
        for s in 0..stages {
            while nbits < bits {
                let b = *bytes.next().ok_or_else(|| {
                    CodecError::Corruption("payload ended mid-index".into())
                })?;
                acc = (acc << 8) | b as u64;
                nbits += 8;
            }
            indices[[t, s]] = ((acc >> (nbits - bits)) & ((1 << bits) - 1)) as u16;
            nbits -= bits;
            acc &= (1 << nbits) - 1;
        }
    }
    // trailing padding must be zero
    if acc != 0 || bytes.any(|&b| b != 0) {
        return Err(CodecError::Corruption("nonzero padding bits".into()));
    }
    Ok((
        header,
        CodeSequence {
            indices,
            codebook_size: 1usize << bits,
        },
    ))
}

/// Payload bitrate in bits per second over the original audio duration.
/// Header overhead is excluded; see [`header_overhead_bits`].
pub fn file_bitrate(blob: &BitstreamBlob) -> Result<f64> {
    if blob.header.original_length == 0 {
        return Err(CodecError::UndefinedMetric(
            "bitrate undefined for zero-length audio".into(),
        ));
    }
    let payload_bits = blob.header.frame_count as f64
        * blob.header.num_stages as f64
        * blob.header.codebook_bits as f64;
    let duration = blob.header.original_length as f64 / blob.header.sample_rate as f64;
    Ok(payload_bits / duration)
}

pub fn header_overhead_bits() -> usize {
    HEADER_BYTES * 8
}

impl BitstreamBlob {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_BYTES + self.payload.len());
        out.extend_from_slice(&self.header.to_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header = BitstreamHeader::from_bytes(bytes)?;
        let payload = bytes[HEADER_BYTES..].to_vec();
        if payload.len() != header.payload_bytes() {
            return Err(CodecError::Corruption(format!(
                "file payload is {} bytes, header implies {}",
                payload.len(),
                header.payload_bytes()
            )));
        }
        Ok(Self { header, payload })
    }

    /// Atomic write: temp file in the target directory, then rename.
    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
        let tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or_else(|| Path::new(".")))?;
        std::fs::write(tmp.path(), self.to_bytes())?;
        tmp.persist(path).map_err(|e| CodecError::Io(e.error))?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn seq(indices: Array2<u16>) -> CodeSequence {
        CodeSequence {
            indices,
            codebook_size: 1024,
        }
    }

    #[test]
    fn worked_payload_example() {
        // three frames, one stage: [1023, 0, 512] -> FF C0 08 00
        let codes = seq(array![[1023u16], [0], [512]]);
        let header = BitstreamHeader::new(1, 3, 960);
        let blob = pack(&codes, &header).unwrap();
        assert_eq!(blob.payload, vec![0xFF, 0xC0, 0x08, 0x00]);
        let (h, back) = unpack(&blob).unwrap();
        assert_eq!(h, header);
        assert_eq!(back.indices, codes.indices);
    }

    #[test]
    fn zero_frames_empty_payload() {
        let codes = seq(Array2::zeros((0, 4)));
        let header = BitstreamHeader::new(4, 0, 0);
        let blob = pack(&codes, &header).unwrap();
        assert!(blob.payload.is_empty());
        let (_, back) = unpack(&blob).unwrap();
        assert_eq!(back.indices.dim(), (0, 4));
    }

    #[test]
    fn eighty_zero_bits() {
        let codes = seq(Array2::zeros((8, 1)));
        let header = BitstreamHeader::new(1, 8, 2560);
        let blob = pack(&codes, &header).unwrap();
        assert_eq!(blob.payload, vec![0u8; 10]);
    }

    #[test]
    fn truncated_payload_fails_closed() {
        let codes = seq(array![[1u16, 2], [3, 4]]);
        let header = BitstreamHeader::new(2, 2, 640);
        let mut blob = pack(&codes, &header).unwrap();
        blob.payload.pop();
        assert!(matches!(unpack(&blob), Err(CodecError::Corruption(_))));
    }

    #[test]
    fn stage_count_mismatch_fails_closed() {
        let codes = seq(Array2::zeros((5, 2)));
        let header = BitstreamHeader::new(2, 5, 1600);
        let blob = pack(&codes, &header).unwrap();
        let mut lying = blob.clone();
        lying.header.num_stages = 12;
        assert!(matches!(unpack(&lying), Err(CodecError::Corruption(_))));
    }

    #[test]
    fn bad_magic_is_format_error() {
        let codes = seq(Array2::zeros((1, 2)));
        let header = BitstreamHeader::new(2, 1, 320);
        let mut bytes = pack(&codes, &header).unwrap().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(
            BitstreamBlob::from_bytes(&bytes),
            Err(CodecError::Format(_))
        ));
    }

    #[test]
    fn bitrate_ladder_on_one_second() {
        for (nq, want) in [(2u8, 1000.0), (4, 2000.0), (6, 3000.0), (12, 6000.0)] {
            let codes = seq(Array2::zeros((50, nq as usize)));
            let header = BitstreamHeader::new(nq, 50, 16000);
            let blob = pack(&codes, &header).unwrap();
            assert_eq!(file_bitrate(&blob).unwrap(), want);
        }
        // half a second at 4 stages
        let codes = seq(Array2::zeros((25, 4)));
        let header = BitstreamHeader::new(4, 25, 8000);
        let blob = pack(&codes, &header).unwrap();
        assert_eq!(file_bitrate(&blob).unwrap(), 2000.0);
    }

    #[test]
    fn zero_length_audio_bitrate_undefined() {
        let codes = seq(Array2::zeros((0, 2)));
        let header = BitstreamHeader::new(2, 0, 0);
        let blob = pack(&codes, &header).unwrap();
        assert!(matches!(
            file_bitrate(&blob),
            Err(CodecError::UndefinedMetric(_))
        ));
    }

    #[test]
    fn header_size_is_documented_18_bytes() {
        let header = BitstreamHeader::new(2, 1, 320);
        assert_eq!(header.to_bytes().len(), 18);
        assert_eq!(header_overhead_bits(), 144);
    }
}
