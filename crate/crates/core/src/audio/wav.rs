//! Strict RIFF/WAVE PCM16 mono reader/writer. Anything else is rejected
//! rather than silently converted.

use super::AudioBuffer;
use crate::error::{CodecError, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const PCM16_SCALE: f32 = 32768.0;

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

/// Load a PCM16 mono WAV file; samples are scaled by 1/32768 into `[-1, 1]`.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let file = File::open(path.as_ref())?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != b"RIFF" {
        return Err(CodecError::Format("not a RIFF file".into()));
    }
    let _riff_size = read_u32(&mut r)?;
    r.read_exact(&mut magic)?;
    if &magic != b"WAVE" {
        return Err(CodecError::Format("RIFF file is not WAVE".into()));
    }

    let mut sample_rate = None;
    loop {
        let mut chunk_id = [0u8; 4];
        if let Err(e) = r.read_exact(&mut chunk_id) {
            if e.kind() == std::io::ErrorKind::UnexpectedEof && sample_rate.is_some() {
                return Err(CodecError::Format("WAVE file has no data chunk".into()));
            }
            return Err(e.into());
        }
        let chunk_size = read_u32(&mut r)? as usize;
        match &chunk_id {
            b"fmt " => {
                if chunk_size < 16 {
                    return Err(CodecError::Format("fmt chunk too small".into()));
                }
                let audio_format = read_u16(&mut r)?;
                let channels = read_u16(&mut r)?;
                let rate = read_u32(&mut r)?;
                let _byte_rate = read_u32(&mut r)?;
                let _block_align = read_u16(&mut r)?;
                let bits = read_u16(&mut r)?;
                if audio_format != 1 {
                    return Err(CodecError::Format(format!(
                        "unsupported WAVE encoding {audio_format}; only PCM is accepted"
                    )));
                }
                if channels != 1 {
                    return Err(CodecError::Format(format!(
                        "unsupported channel count {channels}; only mono is accepted"
                    )));
                }
                if bits != 16 {
                    return Err(CodecError::Format(format!(
                        "unsupported bit depth {bits}; only 16-bit PCM is accepted"
                    )));
                }
                sample_rate = Some(rate);
                // skip any fmt extension bytes (+ pad byte for odd sizes)
                skip(&mut r, chunk_size - 16 + (chunk_size & 1))?;
            }
            b"data" => {
                let rate = sample_rate.ok_or_else(|| {
                    CodecError::Format("data chunk precedes fmt chunk".into())
                })?;
                let mut raw = vec![0u8; chunk_size];
                r.read_exact(&mut raw)?;
                let samples = raw
                    .chunks_exact(2)
                    .map(|b| i16::from_le_bytes([b[0], b[1]]) as f32 / PCM16_SCALE)
                    .collect();
                return Ok(AudioBuffer::new(samples, rate));
            }
            _ => skip(&mut r, chunk_size + (chunk_size & 1))?,
        }
    }
}

fn skip<R: Read>(r: &mut R, n: usize) -> Result<()> {
    let mut remaining = n as u64;
    let copied = std::io::copy(&mut r.by_ref().take(remaining), &mut std::io::sink())?;
    remaining -= copied;
    if remaining > 0 {
        return Err(std::io::Error::new(
            std::io::ErrorKind::UnexpectedEof,
            "truncated chunk",
        )
        .into());
    }
    Ok(())
}

/// Write a PCM16 mono WAV file. The write is atomic: a temp file in the same
/// directory is renamed into place, so failures leave no partial output.
pub fn save_wav(buffer: &AudioBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or_else(|| Path::new(".")))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        let data_len = (buffer.len() * 2) as u32;
        w.write_all(b"RIFF")?;
        w.write_all(&(36 + data_len).to_le_bytes())?;
        w.write_all(b"WAVE")?;
        w.write_all(b"fmt ")?;
        w.write_all(&16u32.to_le_bytes())?;
        w.write_all(&1u16.to_le_bytes())?; // PCM
        w.write_all(&1u16.to_le_bytes())?; // mono
        w.write_all(&buffer.sample_rate.to_le_bytes())?;
        w.write_all(&(buffer.sample_rate * 2).to_le_bytes())?;
        w.write_all(&2u16.to_le_bytes())?;
        w.write_all(&16u16.to_le_bytes())?;
        w.write_all(b"data")?;
        w.write_all(&data_len.to_le_bytes())?;
        for &s in &buffer.samples {
            let q = (s * PCM16_SCALE).round().clamp(-32768.0, 32767.0) as i16;
            w.write_all(&q.to_le_bytes())?;
        }
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| CodecError::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn silence_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("sil.wav");
        let buf = AudioBuffer::silence(16000, 16000);
        save_wav(&buf, &path).unwrap();
        let back = load_wav(&path).unwrap();
        assert_eq!(back.sample_rate, 16000);
        assert_eq!(back.len(), 16000);
        assert!(back.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn pcm16_scaling_endpoints() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("ends.wav");
        let buf = AudioBuffer::new(vec![-1.0, 32767.0 / 32768.0], 16000);
        save_wav(&buf, &path).unwrap();
        let back = load_wav(&path).unwrap();
        assert_eq!(back.samples[0], -1.0);
        assert_eq!(back.samples[1], 32767.0 / 32768.0);
    }

    #[test]
    fn ramp_roundtrip_within_quantization_step() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("ramp.wav");
        let samples: Vec<f32> = (0..100).map(|i| -1.0 + 2.0 * i as f32 / 99.0).collect();
        let buf = AudioBuffer::new(samples.clone(), 16000);
        save_wav(&buf, &path).unwrap();
        let back = load_wav(&path).unwrap();
        for (a, b) in samples.iter().zip(&back.samples) {
            assert!((a - b).abs() <= 1.0 / 32768.0, "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_stereo() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        // hand-build a stereo header
        let mut bytes = Vec::new();
        bytes.extend(b"RIFF");
        bytes.extend(&(36u32).to_le_bytes());
        bytes.extend(b"WAVE");
        bytes.extend(b"fmt ");
        bytes.extend(&16u32.to_le_bytes());
        bytes.extend(&1u16.to_le_bytes());
        bytes.extend(&2u16.to_le_bytes()); // stereo
        bytes.extend(&16000u32.to_le_bytes());
        bytes.extend(&64000u32.to_le_bytes());
        bytes.extend(&4u16.to_le_bytes());
        bytes.extend(&16u16.to_le_bytes());
        bytes.extend(b"data");
        bytes.extend(&0u32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        match load_wav(&path) {
            Err(CodecError::Format(msg)) => assert!(msg.contains("channel")),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_file_is_io_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("trunc.wav");
        let buf = AudioBuffer::silence(100, 16000);
        save_wav(&buf, &path).unwrap();
        let full = std::fs::read(&path).unwrap();
        std::fs::write(&path, &full[..60]).unwrap();
        match load_wav(&path) {
            Err(CodecError::Io(_)) => {}
            other => panic!("expected io error, got {other:?}"),
        }
    }
}
