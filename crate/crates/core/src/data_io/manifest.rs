//! Corpus manifest (`manifest.toml`) and pipeline config files.
//!
//! ```toml
//! [[songs]]
//! song_id = "song_000"
//! split = "train_a"          # train_a | train_b | test
//! vocal = "train_a/song_000/vocal.wav"
//! accompaniment = "train_a/song_000/accompaniment.wav"
//! ```
//!
//! Paths are relative to the directory holding the manifest.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::wav::read_wav;
use crate::dsp::align_lengths;
use crate::error::{Error, Result};
use crate::pipeline::{Corpus, PipelineConfig, Song, Split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub song_id: String,
    pub split: Split,
    pub vocal: String,
    pub accompaniment: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    #[serde(default)]
    pub songs: Vec<ManifestEntry>,
}

fn toml_error(path: &Path, e: toml::de::Error) -> Error {
    let field = match e.span() {
        Some(span) => {
            let text = std::fs::read_to_string(path).unwrap_or_default();
            let line = text[..span.start.min(text.len())].lines().count().max(1);
            format!("{} line {line}", path.display())
        }
        None => path.display().to_string(),
    };
    Error::format(field, e.message().to_string())
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    toml::from_str(&text).map_err(|e| toml_error(path, e))
}

fn write_toml<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

impl CorpusManifest {
    /// Every invariant violation; file existence is checked against `root`
    /// when given.
    pub fn violations(&self, root: Option<&Path>) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for e in &self.songs {
            if e.song_id.is_empty() {
                out.push("empty song_id".to_string());
            } else if !seen.insert(e.song_id.as_str()) {
                out.push(format!("duplicate song_id `{}`", e.song_id));
            }
            if let Some(root) = root {
                for p in [&e.vocal, &e.accompaniment] {
                    if !root.join(p).is_file() {
                        out.push(format!("song `{}`: missing file {p}", e.song_id));
                    }
                }
            }
        }
        out
    }

    pub fn entries(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.songs.iter().filter(move |e| e.split == split)
    }
}

pub fn load_manifest(path: &Path) -> Result<CorpusManifest> {
    let manifest: CorpusManifest = read_toml(path)?;
    let v = manifest.violations(path.parent());
    if v.is_empty() {
        Ok(manifest)
    } else {
        Err(Error::Config(v))
    }
}

pub fn save_manifest(manifest: &CorpusManifest, path: &Path) -> Result<()> {
    write_toml(manifest, path)
}

/// Read every song listed in `root/manifest.toml`.
pub fn load_corpus(root: &Path) -> Result<Corpus> {
    let manifest = load_manifest(&root.join(super::MANIFEST_FILE))?;
    let songs = manifest
        .songs
        .iter()
        .map(|e| load_song(root, e))
        .collect::<Result<Vec<_>>>()?;
    Corpus::new(songs)
}

pub fn load_song(root: &Path, entry: &ManifestEntry) -> Result<Song> {
    let vocal = read_wav(&root.join(&entry.vocal))?;
    let accompaniment = read_wav(&root.join(&entry.accompaniment))?;
    if vocal.sample_rate != accompaniment.sample_rate {
        return Err(Error::InvalidInput(format!(
            "song `{}`: sources at {} Hz and {} Hz",
            entry.song_id, vocal.sample_rate, accompaniment.sample_rate
        )));
    }
    let mut aligned = align_lengths(&[&vocal, &accompaniment]).into_iter();
    Ok(Song {
        id: entry.song_id.clone(),
        split: entry.split,
        vocal: aligned.next().unwrap(),
        accompaniment: aligned.next().unwrap(),
    })
}

pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let cfg: PipelineConfig = read_toml(path)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn save_config(cfg: &PipelineConfig, path: &Path) -> Result<()> {
    write_toml(cfg, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, split: Split) -> ManifestEntry {
        ManifestEntry {
            song_id: id.into(),
            split,
            vocal: format!("{id}/v.wav"),
            accompaniment: format!("{id}/a.wav"),
        }
    }

    #[test]
    fn duplicate_ids_are_named() {
        let m = CorpusManifest {
            songs: vec![entry("x", Split::TrainA), entry("x", Split::Test)],
        };
        let v = m.violations(None);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("`x`"));
    }

    #[test]
    fn manifest_round_trips_and_reports_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let m = CorpusManifest {
            songs: vec![entry("a", Split::TrainA), entry("b", Split::Test)],
        };
        let path = dir.path().join("manifest.toml");
        save_manifest(&m, &path).unwrap();
        match load_manifest(&path) {
            Err(Error::Config(v)) => assert_eq!(v.len(), 4),
            other => panic!("{other:?}"),
        }
        let parsed: CorpusManifest = read_toml(&path).unwrap();
        assert_eq!(parsed, m);
    }

    #[test]
    fn parse_errors_carry_a_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.toml");
        std::fs::write(
            &path,
            "[[songs]]\nsong_id = \"a\"\nsplit = \"validation\"\nvocal = \"v\"\naccompaniment = \"a\"\n",
        )
        .unwrap();
        match load_manifest(&path) {
            Err(Error::Format { field, .. }) => assert!(field.contains("line 3"), "{field}"),
            other => panic!("{other:?}"),
        }
    }
}
