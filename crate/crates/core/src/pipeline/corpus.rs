use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dsp::Waveform;
use crate::error::{Error, Result};

/// Which stage a song feeds: separator training, enhancer training, or test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    TrainA,
    TrainB,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::TrainA => "train_a",
            Split::TrainB => "train_b",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Song {
    pub id: String,
    pub split: Split,
    pub vocal: Waveform,
    pub accompaniment: Waveform,
}

impl Song {
    /// Time-domain mixture `vocal + accompaniment`.
    pub fn mixture(&self) -> Waveform {
        Waveform {
            samples: self
                .vocal
                .samples
                .iter()
                .zip(&self.accompaniment.samples)
                .map(|(v, a)| v + a)
                .collect(),
            sample_rate: self.vocal.sample_rate,
        }
    }

    pub fn references(&self) -> [Waveform; 2] {
        [self.vocal.clone(), self.accompaniment.clone()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub songs: Vec<Song>,
}

impl Corpus {
    pub fn new(songs: Vec<Song>) -> Result<Self> {
        let mut problems = Vec::new();
        let mut ids = HashSet::new();
        for s in &songs {
            if !ids.insert(s.id.as_str()) {
                problems.push(format!("duplicate song_id `{}`", s.id));
            }
            if s.vocal.len() != s.accompaniment.len() {
                problems.push(format!("song `{}`: source lengths differ", s.id));
            }
            if s.vocal.sample_rate != s.accompaniment.sample_rate {
                problems.push(format!("song `{}`: source sample rates differ", s.id));
            }
            if s.vocal.is_empty() {
                problems.push(format!("song `{}` is empty", s.id));
            }
        }
        if problems.is_empty() {
            Ok(Self { songs })
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn split(&self, split: Split) -> Vec<&Song> {
        self.songs.iter().filter(|s| s.split == split).collect()
    }
}
