//! Signal containers, deterministic seeding, and bit-exact trial file I/O.
//!
//! On-disk layout (little-endian throughout):
//!
//! ```text
//! offset  size  field
//! 0       8     magic  "TDNSIG01"
//! 8       1     version (u8, currently 1)
//! 9       4     n_trials (u32)
//! 13      4     channels C (u32)
//! 17      4     samples  T (u32)
//! 21      4     num_classes K (u32)
//! 25      4     sampling rate fs (f32)
//! 29      ...   per trial: label (u32) then C*T samples (f32, channel-major)
//! ```
//!
//! Samples are stored as `f32` on disk and widened to the in-memory scalar on
//! load. The header is 29 bytes; each trial occupies `4 + 4*C*T` bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::num::Real;

const MAGIC: &[u8; 8] = b"TDNSIG01";
const VERSION: u8 = 1;
/// Fixed header size of the binary trial format.
pub const HEADER_LEN: usize = 29;

/// One multichannel trial: a `C x T` sample matrix plus its sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial<F> {
    data: Mat<F>,
    fs: f64,
}

impl<F: Real> Trial<F> {
    /// Validates shape (`C >= 1`, `T >= 2`), finiteness, and `fs > 0`.
    pub fn new(data: Mat<F>, fs: f64) -> Result<Self> {
        if data.rows() < 1 {
            return Err(Error::validation("trial needs at least one channel"));
        }
        if data.cols() < 2 {
            return Err(Error::validation("trial needs at least two samples"));
        }
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::validation(format!(
                "sampling rate must be a positive real, got {fs}"
            )));
        }
        if !data.is_finite() {
            return Err(Error::validation("trial contains non-finite samples"));
        }
        Ok(Trial { data, fs })
    }

    pub fn data(&self) -> &Mat<F> {
        &self.data
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn channels(&self) -> usize {
        self.data.rows()
    }

    pub fn samples(&self) -> usize {
        self.data.cols()
    }
}

/// A labeled, shape-homogeneous collection of trials.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet<F> {
    channels: usize,
    samples: usize,
    fs: f64,
    num_classes: usize,
    trials: Vec<Trial<F>>,
    labels: Vec<usize>,
    subject_id: String,
}

impl<F: Real> TrialSet<F> {
    /// Builds a set from trials and labels; shape is taken from the first
    /// trial and every other trial must match it.
    pub fn new(
        trials: Vec<Trial<F>>,
        labels: Vec<usize>,
        num_classes: usize,
        subject_id: impl Into<String>,
    ) -> Result<Self> {
        let first = trials
            .first()
            .ok_or_else(|| Error::validation("use TrialSet::empty for a trial-less set"))?;
        let (channels, samples, fs) = (first.channels(), first.samples(), first.fs());
        let mut set = TrialSet::empty(channels, samples, fs, num_classes, subject_id)?;
        for (trial, label) in trials.into_iter().zip(labels.iter().copied()) {
            set.push(trial, label)?;
        }
        if set.trials.len() != labels.len() {
            return Err(Error::validation(format!(
                "{} trials but {} labels",
                set.trials.len(),
                labels.len()
            )));
        }
        Ok(set)
    }

    /// An empty set with a declared trial shape, ready for `push`.
    pub fn empty(
        channels: usize,
        samples: usize,
        fs: f64,
        num_classes: usize,
        subject_id: impl Into<String>,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::validation(format!(
                "need at least two classes, got {num_classes}"
            )));
        }
        Ok(TrialSet {
            channels,
            samples,
            fs,
            num_classes,
            trials: Vec::new(),
            labels: Vec::new(),
            subject_id: subject_id.into(),
        })
    }

    pub fn push(&mut self, trial: Trial<F>, label: usize) -> Result<()> {
        if trial.channels() != self.channels
            || trial.samples() != self.samples
            || trial.fs() != self.fs
        {
            return Err(Error::validation(format!(
                "trial shape ({}x{} @ {} Hz) does not match set shape ({}x{} @ {} Hz)",
                trial.channels(),
                trial.samples(),
                trial.fs(),
                self.channels,
                self.samples,
                self.fs
            )));
        }
        if label >= self.num_classes {
            return Err(Error::validation(format!(
                "label {label} out of range for {} classes",
                self.num_classes
            )));
        }
        self.trials.push(trial);
        self.labels.push(label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn trials(&self) -> &[Trial<F>] {
        &self.trials
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn trial(&self, idx: usize) -> &Trial<F> {
        &self.trials[idx]
    }

    pub fn label(&self, idx: usize) -> usize {
        self.labels[idx]
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn set_subject_id(&mut self, id: impl Into<String>) {
        self.subject_id = id.into();
    }

    /// New set containing the given trial indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut out = TrialSet::empty(
            self.channels,
            self.samples,
            self.fs,
            self.num_classes,
            self.subject_id.clone(),
        )?;
        for &i in indices {
            if i >= self.len() {
                return Err(Error::validation(format!(
                    "trial index {i} out of range ({} trials)",
                    self.len()
                )));
            }
            out.push(self.trials[i].clone(), self.labels[i])?;
        }
        Ok(out)
    }
}

/// Seed for all deterministic randomness in the crate.
///
/// Identical seed plus identical configuration reproduces generated data and
/// training trajectories bit-for-bit within one build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
}

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        RngSeed { seed }
    }

    /// Derives an independent child seed, splitmix64-style, so per-trial and
    /// per-stage generators never share a stream.
    pub fn derive(&self, tag: u64) -> RngSeed {
        let mut z = self
            .seed
            .wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(tag.wrapping_add(1)));
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        RngSeed {
            seed: z ^ (z >> 31),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format(format!("file truncated while reading {what}"))
        } else {
            Error::Io(e)
        }
    })
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf, what)?;
    Ok(u32::from_le_bytes(buf))
}

/// Saves a trial set in the binary format described in the module docs.
///
/// Note the format does not carry `subject_id`; loaders get an empty one.
pub fn save_trialset<F: Real>(ts: &TrialSet<F>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    write_u32(&mut w, ts.len() as u32)?;
    write_u32(&mut w, ts.channels() as u32)?;
    write_u32(&mut w, ts.samples() as u32)?;
    write_u32(&mut w, ts.num_classes() as u32)?;
    w.write_all(&(ts.fs() as f32).to_le_bytes())?;
    for (trial, &label) in ts.trials().iter().zip(ts.labels()) {
        write_u32(&mut w, label as u32)?;
        for &v in trial.data().as_slice() {
            w.write_all(&(v.to_f64_lossy() as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Loads a trial set, validating magic, version, byte counts, and finiteness.
pub fn load_trialset<F: Real>(path: impl AsRef<Path>) -> Result<TrialSet<F>> {
    let path = path.as_ref();
    let file_len = std::fs::metadata(path)?.len();
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&magic),
            String::from_utf8_lossy(MAGIC)
        )));
    }
    let mut version = [0u8; 1];
    read_exact(&mut r, &mut version, "version")?;
    if version[0] != VERSION {
        return Err(Error::format(format!(
            "unsupported version {}, expected {VERSION}",
            version[0]
        )));
    }
    let n_trials = read_u32(&mut r, "n_trials")? as usize;
    let channels = read_u32(&mut r, "channels")? as usize;
    let samples = read_u32(&mut r, "samples")? as usize;
    let num_classes = read_u32(&mut r, "num_classes")? as usize;
    let mut fs_buf = [0u8; 4];
    read_exact(&mut r, &mut fs_buf, "fs")?;
    let fs = f32::from_le_bytes(fs_buf) as f64;

    let expected_len = HEADER_LEN as u64 + n_trials as u64 * (4 + 4 * channels as u64 * samples as u64);
    if file_len != expected_len {
        return Err(Error::format(format!(
            "file length {file_len} disagrees with header (expected {expected_len} bytes for {n_trials} trials of {channels}x{samples})"
        )));
    }

    let mut set = TrialSet::empty(channels, samples, fs, num_classes, "")?;
    let mut sample_buf = vec![0u8; 4 * channels * samples];
    for t in 0..n_trials {
        let label = read_u32(&mut r, "trial label")? as usize;
        read_exact(&mut r, &mut sample_buf, "trial samples")?;
        let mut data = Vec::with_capacity(channels * samples);
        for chunk in sample_buf.chunks_exact(4) {
            let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            if !v.is_finite() {
                return Err(Error::validation(format!(
                    "non-finite sample in trial {t}"
                )));
            }
            data.push(F::of(v as f64));
        }
        set.push(Trial::new(Mat::from_vec(channels, samples, data), fs)?, label)?;
    }
    Ok(set)
}

/// Formats with at most nine significant digits, round-tripping `f32`-level
/// payloads exactly; zero renders as `0`.
pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let s = format!("{v:.8e}");
    // Trim trailing zeros of the mantissa: 1.50000000e2 -> 1.5e2.
    let (mantissa, exp) = s.split_once('e').expect("exponential format");
    let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
    format!("{mantissa}e{exp}")
}

/// Writes one CSV per trial (rows = channels, comma separator, 9 significant
/// digits) plus a `labels.csv` manifest with `index,label` rows.
pub fn export_csv<F: Real>(ts: &TrialSet<F>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for (i, trial) in ts.trials().iter().enumerate() {
        let mut w = BufWriter::new(File::create(dir.join(format!("trial_{i:05}.csv")))?);
        for c in 0..trial.channels() {
            let line: Vec<String> = trial
                .data()
                .row(c)
                .iter()
                .map(|v| fmt_sig9(v.to_f64_lossy()))
                .collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;
    }
    let mut w = BufWriter::new(File::create(dir.join("labels.csv"))?);
    writeln!(w, "index,label")?;
    for (i, &label) in ts.labels().iter().enumerate() {
        writeln!(w, "{i},{label}")?;
    }
    w.flush()?;
    Ok(())
}
