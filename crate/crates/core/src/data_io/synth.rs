//! Seeded synthetic vocal/accompaniment corpus.
//!
//! The "vocal" is a harmonic melody with vibrato and note envelopes; the
//! "accompaniment" is a sustained low triad plus filtered noise bursts on a
//! beat grid, mixed louder than the vocal.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::manifest::{save_manifest, CorpusManifest, ManifestEntry};
use super::wav::{write_wav, BitDepth};
use crate::dsp::Waveform;
use crate::error::{Error, Result};
use crate::pipeline::{Corpus, Song, Split};

/// Peak level of the loudest of (mixture, vocal, accompaniment).
const PEAK: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Songs in train_a, train_b and test.
    pub songs_per_split: [usize; 3],
    pub duration_s: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            songs_per_split: [8, 8, 6],
            duration_s: 6.0,
            sample_rate: 16_000,
            seed: 1,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if self.songs_per_split.contains(&0) {
            v.push(format!(
                "every split needs at least one song, got {:?}",
                self.songs_per_split
            ));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            v.push(format!("duration must be positive, got {}", self.duration_s));
        }
        if self.sample_rate < 4000 {
            v.push(format!("sample rate {} is below 4 kHz", self.sample_rate));
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    pub fn song_count(&self) -> usize {
        self.songs_per_split.iter().sum()
    }

    fn split_of(&self, index: usize) -> Split {
        let [a, b, _] = self.songs_per_split;
        if index < a {
            Split::TrainA
        } else if index < a + b {
            Split::TrainB
        } else {
            Split::Test
        }
    }
}

fn raised_cosine(t: f64, len: f64) -> f64 {
    if len <= 0.0 {
        1.0
    } else {
        0.5 - 0.5 * (PI * (t / len).min(1.0)).cos()
    }
}

/// Minimum distance in Hz between a vocal fundamental and any chord tone
/// sounding at the same time, before vibrato is added.
const CLEARANCE_HZ: f64 = 40.0;

/// One bar of the sustained accompaniment chord.
struct Chord {
    start: usize,
    end: usize,
    freqs: [f64; 3],
    amps: [f64; 3],
}

fn chord_plan(rng: &mut ChaCha8Rng, len: usize, bar: usize) -> Vec<Chord> {
    let mut chords = Vec::new();
    let mut start = 0usize;
    while start < len {
        let root = rng.random_range(80.0..160.0);
        let third = if rng.random_bool(0.5) { 5.0 / 4.0 } else { 6.0 / 5.0 };
        let amps = [1.0, rng.random_range(0.5..0.9), rng.random_range(0.5..0.9)];
        let end = (start + bar).min(len);
        chords.push(Chord {
            start,
            end,
            freqs: [root, root * third, root * 1.5],
            amps,
        });
        start = end;
    }
    chords
}

/// Whether `f0` (with vibrato depth `depth`) keeps clear of every chord
/// tone overlapping samples `[start, end)`.
fn clear_of_chords(chords: &[Chord], start: usize, end: usize, f0: f64, depth: f64) -> bool {
    chords
        .iter()
        .filter(|c| c.start < end && start < c.end)
        .flat_map(|c| c.freqs)
        .all(|tone| (f0 - tone).abs() > CLEARANCE_HZ + f0 * depth)
}

fn vocal_line(rng: &mut ChaCha8Rng, chords: &[Chord], len: usize, sr: f64) -> Vec<f64> {
    let harmonics = rng.random_range(3..=5usize);
    let weights: Vec<f64> = (1..=harmonics)
        .map(|h| rng.random_range(0.6..1.0) / h as f64)
        .collect();
    let vib_rate = rng.random_range(4.5..6.5);
    let vib_depth = rng.random_range(0.01..0.03);
    let attack = 0.03 * sr;
    let release = 0.05 * sr;

    let mut out = vec![0.0; len];
    let mut start = 0usize;
    let mut phase = 0.0f64;
    let mut f0 = rng.random_range(150.0..400.0);
    while start < len {
        if rng.random_bool(0.2) {
            start += (rng.random_range(0.1..0.4) * sr) as usize;
            continue;
        }
        let note_len = ((rng.random_range(0.25..0.7) * sr) as usize).max(1);
        let end = (start + note_len).min(len);
        // melodic step within the vocal range, avoiding unisons with the chord
        let mut next = f0;
        for _ in 0..8 {
            next = (f0 * 2f64.powf(rng.random_range(-5.0..5.0) / 12.0)).clamp(150.0, 400.0);
            if clear_of_chords(chords, start, end, next, vib_depth) {
                break;
            }
        }
        while !clear_of_chords(chords, start, end, next, vib_depth) && next < 400.0 {
            next = (next * 2f64.powf(2.0 / 12.0)).min(400.0);
        }
        f0 = next;
        let level = rng.random_range(0.6..1.0);
        for (k, o) in out[start..end].iter_mut().enumerate() {
            let t = k as f64;
            let env = raised_cosine(t, attack) * raised_cosine((note_len - k) as f64, release);
            let freq = f0 * (1.0 + vib_depth * (2.0 * PI * vib_rate * t / sr).sin());
            phase += 2.0 * PI * freq / sr;
            let mut v = 0.0;
            for (h, w) in weights.iter().enumerate() {
                if (h + 1) as f64 * freq < sr / 2.0 {
                    v += w * ((h + 1) as f64 * phase).sin();
                }
            }
            *o = level * env * v;
        }
        start = end;
    }
    out
}

fn accompaniment_line(rng: &mut ChaCha8Rng, chords: &[Chord], beat: usize, len: usize, sr: f64) -> Vec<f64> {
    let mut out = vec![0.0; len];

    // sustained triads, one per bar
    let mut phases = [0.0f64; 3];
    let fade = 0.02 * sr;
    for c in chords {
        let bar = c.end - c.start;
        for (k, o) in out[c.start..c.end].iter_mut().enumerate() {
            let env = raised_cosine(k as f64, fade) * raised_cosine((bar - k) as f64, fade);
            let mut v = 0.0;
            for ((p, f), a) in phases.iter_mut().zip(c.freqs).zip(c.amps) {
                *p += 2.0 * PI * f / sr;
                v += a * p.sin();
            }
            *o += 0.4 * env * v;
        }
    }

    // noise bursts: low "kick" on even beats, bright "snare" on odd beats
    let mut onset = 0usize;
    let mut beat_index = 0usize;
    while onset < len {
        let kick = beat_index.is_multiple_of(2);
        let tau = rng.random_range(0.03..0.08) * sr;
        let burst_len = (5.0 * tau) as usize;
        let level = rng.random_range(0.6..1.0) * if kick { 1.2 } else { 0.5 };
        // one-pole lowpass (kick) or first-difference highpass (snare)
        let alpha = if kick { 0.08 } else { 0.0 };
        let mut state = 0.0;
        let mut prev = 0.0;
        for k in 0..burst_len.min(len - onset) {
            let white: f64 = rng.random_range(-1.0..1.0);
            let filtered = if kick {
                state += alpha * (white - state);
                state * 4.0
            } else {
                let y = white - prev;
                prev = white;
                0.5 * y
            };
            out[onset + k] += level * (-(k as f64) / tau).exp() * filtered;
        }
        onset += beat;
        beat_index += 1;
    }
    out
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt()
}

/// Generate song `index` of the corpus described by `spec`.
pub fn synthesize_song(spec: &SynthSpec, index: usize) -> Result<Song> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let sr = spec.sample_rate as f64;
    let len = ((spec.duration_s * sr).round() as usize).max(1);

    let beat = ((rng.random_range(0.35..0.6) * sr) as usize).max(1);
    let chords = chord_plan(&mut rng, len, 4 * beat);
    let mut vocal = vocal_line(&mut rng, &chords, len, sr);
    let mut acc = accompaniment_line(&mut rng, &chords, beat, len, sr);
    let target_ratio = rng.random_range(1.3..2.0);
    let (rv, ra) = (rms(&vocal), rms(&acc));
    if ra > 0.0 && rv > 0.0 {
        let g = target_ratio * rv / ra;
        acc.iter_mut().for_each(|v| *v *= g);
    }
    let peak = vocal
        .iter()
        .zip(&acc)
        .map(|(v, a)| (v + a).abs().max(v.abs()).max(a.abs()))
        .fold(0.0, f64::max);
    if peak > 0.0 {
        let g = PEAK / peak;
        vocal.iter_mut().for_each(|v| *v *= g);
        acc.iter_mut().for_each(|v| *v *= g);
    }
    Ok(Song {
        id: format!("song_{index:03}"),
        split: spec.split_of(index),
        vocal: Waveform::new(vocal, spec.sample_rate)?,
        accompaniment: Waveform::new(acc, spec.sample_rate)?,
    })
}

/// Generate the whole corpus in memory.
pub fn synthesize_corpus(spec: &SynthSpec) -> Result<Corpus> {
    spec.validate()?;
    let songs = (0..spec.song_count())
        .map(|i| synthesize_song(spec, i))
        .collect::<Result<Vec<_>>>()?;
    Corpus::new(songs)
}

/// Generate the corpus, write every source as 16-bit WAV under `root`, and
/// write `root/manifest.toml`.
pub fn generate_synthetic_corpus(spec: &SynthSpec, root: &Path) -> Result<(Corpus, CorpusManifest)> {
    let corpus = synthesize_corpus(spec)?;
    let mut entries = Vec::with_capacity(corpus.songs.len());
    for song in &corpus.songs {
        let dir = format!("{}/{}", song.split.as_str(), song.id);
        let vocal = format!("{dir}/vocal.wav");
        let accompaniment = format!("{dir}/accompaniment.wav");
        write_wav(&song.vocal, &root.join(&vocal), BitDepth::Pcm16)?;
        write_wav(&song.accompaniment, &root.join(&accompaniment), BitDepth::Pcm16)?;
        entries.push(ManifestEntry {
            song_id: song.id.clone(),
            split: song.split,
            vocal,
            accompaniment,
        });
    }
    let manifest = CorpusManifest { songs: entries };
    save_manifest(&manifest, &root.join(super::MANIFEST_FILE))?;
    Ok((corpus, manifest))
}
