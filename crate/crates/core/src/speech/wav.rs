//! Canonical 44-byte-header PCM WAV: RIFF, a 16-byte `fmt ` chunk (format 1,
//! mono, 16-bit) and one `data` chunk.

use std::fs;
use std::io;
use std::path::Path;

use crate::speech::{AudioClip, SpeechError};

pub const HEADER_LEN: usize = 44;

pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = (clip.samples.len() * 2) as u32;
    let byte_rate = clip.sample_rate * 2;
    let mut out = Vec::with_capacity(HEADER_LEN + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits per sample
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in &clip.samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

/// Write `clip` to `path`, replacing any existing file.
pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> io::Result<()> {
    fs::write(path, encode_wav(clip))
}

/// Read a mono 16-bit PCM WAV, such as one produced by an external engine.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip, SpeechError> {
    let path = path.as_ref();
    let bad = |reason: String| SpeechError::BadWav { path: path.to_path_buf(), reason };
    let mut reader = hound::WavReader::open(path).map_err(|e| bad(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(bad(format!(
            "expected mono 16-bit PCM, got {} channel(s) at {} bits",
            spec.channels, spec.bits_per_sample
        )));
    }
    let samples = reader.samples::<i16>().collect::<Result<Vec<_>, _>>().map_err(|e| bad(e.to_string()))?;
    AudioClip::new(samples, spec.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_second_file_size() {
        let clip = AudioClip::new(vec![0; 22050], 22050).unwrap();
        let bytes = encode_wav(&clip);
        assert_eq!(bytes.len(), 44_144);
        assert_eq!(&bytes[0..4], b"RIFF");
        assert_eq!(&bytes[8..12], b"WAVE");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 44_136);
        assert_eq!(u32::from_le_bytes(bytes[40..44].try_into().unwrap()), 44_100);
    }

    #[test]
    fn empty_clip_is_header_only() {
        let clip = AudioClip::new(Vec::new(), 16000).unwrap();
        assert_eq!(encode_wav(&clip).len(), HEADER_LEN);
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let clip = AudioClip::new(vec![i16::MIN, -1, 0, 1, i16::MAX], 8000).unwrap();
        write_wav(&clip, &path).unwrap();
        assert_eq!(read_wav(&path).unwrap(), clip);
    }

    #[test]
    fn rejects_stereo() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.wav");
        let spec = hound::WavSpec { channels: 2, sample_rate: 8000, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        w.write_sample(0i16).unwrap();
        w.write_sample(0i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&path), Err(SpeechError::BadWav { .. })));
    }
}
