//! Minimal RIFF/WAVE reader and writer: PCM 16-bit and IEEE float 32-bit.

use std::path::Path;

use crate::dsp::Waveform;
use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Pcm16,
    Float32,
}

/// Quantize to 16-bit: clamp to `[-1, 1 − 2⁻¹⁵]`, scale, round half away from zero.
pub fn quantize_i16(sample: f64) -> i16 {
    let clamped = sample.clamp(-1.0, 1.0 - 1.0 / 32768.0);
    (clamped * 32768.0).round() as i16
}

pub fn encode_wav(wave: &Waveform, depth: BitDepth) -> Vec<u8> {
    let (format, bits) = match depth {
        BitDepth::Pcm16 => (FORMAT_PCM, 16u16),
        BitDepth::Float32 => (FORMAT_IEEE_FLOAT, 32u16),
    };
    let block_align = bits / 8;
    let data_len = wave.len() as u32 * block_align as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&wave.sample_rate.to_le_bytes());
    out.extend_from_slice(&(wave.sample_rate * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &wave.samples {
        match depth {
            BitDepth::Pcm16 => out.extend_from_slice(&quantize_i16(s).to_le_bytes()),
            BitDepth::Float32 => out.extend_from_slice(&(s as f32).to_le_bytes()),
        }
    }
    out
}

pub fn write_wav(wave: &Waveform, path: &Path, depth: BitDepth) -> Result<()> {
    if let Some(i) = wave.samples.iter().position(|s| !s.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite sample at index {i}")));
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
    }
    std::fs::write(path, encode_wav(wave, depth))
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

struct Format {
    code: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

/// Decode a WAV byte stream, averaging channels down to mono.
pub fn decode_wav(bytes: &[u8]) -> Result<Waveform> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::format("RIFF header", "not a RIFF/WAVE stream"));
    }
    let mut pos = 12;
    let mut format: Option<Format> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + 16 > bytes.len() {
                    return Err(Error::format("fmt chunk", "truncated"));
                }
                let mut code = u16_at(bytes, body);
                if code == FORMAT_EXTENSIBLE && size >= 40 && body + 26 <= bytes.len() {
                    code = u16_at(bytes, body + 24);
                }
                format = Some(Format {
                    code,
                    channels: u16_at(bytes, body + 2),
                    sample_rate: u32_at(bytes, body + 4),
                    bits: u16_at(bytes, body + 14),
                });
            }
            b"data" => {
                let fmt = format
                    .as_ref()
                    .ok_or_else(|| Error::format("data chunk", "data precedes fmt chunk"))?;
                if body + size > bytes.len() {
                    return Err(Error::format(
                        "data chunk",
                        format!(
                            "declares {size} bytes but only {} remain (truncated)",
                            bytes.len() - body
                        ),
                    ));
                }
                return decode_samples(fmt, &bytes[body..body + size]);
            }
            _ => {}
        }
        pos = body + size + (size & 1);
    }
    Err(Error::format("data chunk", "missing"))
}

fn decode_samples(fmt: &Format, data: &[u8]) -> Result<Waveform> {
    if fmt.channels == 0 || fmt.sample_rate == 0 {
        return Err(Error::format("fmt chunk", "zero channels or sample rate"));
    }
    let width = match (fmt.code, fmt.bits) {
        (FORMAT_PCM, 16) => 2,
        (FORMAT_IEEE_FLOAT, 32) => 4,
        (code, bits) => {
            return Err(Error::format(
                "fmt chunk",
                format!("unsupported encoding (format {code}, {bits} bits)"),
            ))
        }
    };
    let channels = fmt.channels as usize;
    let frame = width * channels;
    if !data.len().is_multiple_of(frame) {
        return Err(Error::format("data chunk", "length is not a whole number of frames"));
    }
    let decode = |chunk: &[u8]| -> f64 {
        if width == 2 {
            i16::from_le_bytes([chunk[0], chunk[1]]) as f64 / 32768.0
        } else {
            f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64
        }
    };
    let samples: Vec<f64> = data
        .chunks_exact(frame)
        .map(|f| f.chunks_exact(width).map(decode).sum::<f64>() / channels as f64)
        .collect();
    Waveform::new(samples, fmt.sample_rate).map_err(|e| Error::format("data chunk", e.to_string()))
}

pub fn read_wav(path: &Path) -> Result<Waveform> {
    let bytes =
        std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_wav(&bytes).map_err(|e| match e {
        Error::Format { field, message } => Error::Format {
            field: format!("{}: {field}", path.display()),
            message,
        },
        other => other,
    })
}
