//! Labeled epoch collections, preprocessing, synthetic generators and the
//! on-disk container format.

mod container;
mod filter;
mod synth;

use thiserror::Error;

use crate::covariance::{CovarianceError, Epoch};

pub use container::{read_epochset, read_epochset_from, write_epoch_csv, write_epochset, write_epochset_to, FORMAT_NAME, FORMAT_VERSION};
pub use filter::{bandpass, butterworth_bandpass, Sos, BANDPASS_ORDER};
pub use synth::{generate_ar_dataset, sine_dataset, ArClass, ArSpec};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid epoch set: {0}")]
    Invalid(String),
    #[error("format error in {section} at byte {offset}: {message}")]
    Format {
        offset: usize,
        section: &'static str,
        message: String,
    },
    #[error("unsupported container version {0}")]
    VersionUnsupported(u64),
    #[error("invalid band [{low}, {high}] Hz for sample rate {sample_rate} Hz")]
    InvalidBand { low: f64, high: f64, sample_rate: f64 },
    #[error("unstable AR model for class {class}: companion spectral radius {radius:.4} >= 1")]
    UnstableSpec { class: String, radius: f64 },
    #[error("invalid AR model: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Epoch(#[from] CovarianceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// One recording session: epochs with their class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub id: String,
    pub epochs: Vec<Epoch>,
    pub labels: Vec<usize>,
}

/// All epochs of one subject, grouped by session.
///
/// Every epoch shares channel count, length and sample rate, and every label
/// indexes into `class_names`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    subject: String,
    class_names: Vec<String>,
    sample_rate: f64,
    sessions: Vec<Session>,
}

impl EpochSet {
    pub fn new(
        subject: impl Into<String>,
        class_names: Vec<String>,
        sample_rate: f64,
        sessions: Vec<Session>,
    ) -> Result<Self> {
        let set = EpochSet {
            subject: subject.into(),
            class_names,
            sample_rate,
            sessions,
        };
        set.validate()?;
        Ok(set)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DataError::Invalid(m));
        if self.class_names.is_empty() {
            return bad("no class names".into());
        }
        if self.sessions.is_empty() {
            return bad("no sessions".into());
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return bad(format!("invalid sample rate {}", self.sample_rate));
        }
        let mut shape = None;
        for s in &self.sessions {
            if s.epochs.is_empty() {
                return bad(format!("session {} has no epochs", s.id));
            }
            if s.epochs.len() != s.labels.len() {
                return bad(format!(
                    "session {}: {} epochs but {} labels",
                    s.id,
                    s.epochs.len(),
                    s.labels.len()
                ));
            }
            if let Some(&l) = s.labels.iter().find(|&&l| l >= self.class_names.len()) {
                return bad(format!("session {}: label {l} out of range", s.id));
            }
            for e in &s.epochs {
                let this = (e.channels(), e.samples());
                if *shape.get_or_insert(this) != this {
                    return bad(format!(
                        "session {}: epoch shape {:?} differs from {:?}",
                        s.id,
                        this,
                        shape.unwrap()
                    ));
                }
                if e.sample_rate() != self.sample_rate {
                    return bad(format!(
                        "session {}: epoch sample rate {} differs from {}",
                        s.id,
                        e.sample_rate(),
                        self.sample_rate
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn subject(&self) -> &str {
        &self.subject
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn sessions(&self) -> &[Session] {
        &self.sessions
    }

    pub fn channels(&self) -> usize {
        self.sessions[0].epochs[0].channels()
    }

    pub fn samples(&self) -> usize {
        self.sessions[0].epochs[0].samples()
    }

    pub fn n_epochs(&self) -> usize {
        self.sessions.iter().map(|s| s.epochs.len()).sum()
    }

    /// All epochs in session order.
    pub fn epochs(&self) -> impl Iterator<Item = &Epoch> {
        self.sessions.iter().flat_map(|s| s.epochs.iter())
    }

    /// All labels in session order.
    pub fn labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.sessions.iter().flat_map(|s| s.labels.iter().copied())
    }

    /// Applies `f` to every epoch, keeping labels and metadata.
    pub fn map_epochs<F>(&self, f: F) -> Result<EpochSet>
    where
        F: Fn(&Epoch) -> Result<Epoch>,
    {
        let sessions = self
            .sessions
            .iter()
            .map(|s| {
                Ok(Session {
                    id: s.id.clone(),
                    epochs: s.epochs.iter().map(&f).collect::<Result<_>>()?,
                    labels: s.labels.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        EpochSet::new(self.subject.clone(), self.class_names.clone(), self.sample_rate, sessions)
    }

    /// The epochs at `indices` (positions in [`epochs`](Self::epochs) order),
    /// as one session named `selection`.
    pub fn select(&self, indices: &[usize]) -> Result<EpochSet> {
        let all: Vec<(&Epoch, usize)> = self.epochs().zip(self.labels()).collect();
        let mut epochs = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let (e, l) = all
                .get(i)
                .ok_or_else(|| DataError::Invalid(format!("epoch index {i} out of range")))?;
            epochs.push((*e).clone());
            labels.push(*l);
        }
        EpochSet::new(
            self.subject.clone(),
            self.class_names.clone(),
            self.sample_rate,
            vec![Session {
                id: "selection".into(),
                epochs,
                labels,
            }],
        )
    }

    /// Band-pass filters every epoch.
    pub fn bandpass(&self, low: f64, high: f64) -> Result<EpochSet> {
        let sos = butterworth_bandpass(BANDPASS_ORDER, low, high, self.sample_rate)?;
        self.map_epochs(|e| Ok(sos.filter_epoch(e)?))
    }
}
