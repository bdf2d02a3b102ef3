//! Pitch-content, interval and chord-tone metrics over reduced lines.
//!
//! Rests never count as notes. Interval computation skips over them, so a
//! rest between two notes leaves a single interval spanning it.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::score::{chord_tones, ChordSymbol, NoteEvent, Phrase, Pitch, Voice};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("line has no sounded notes")]
    EmptyLine,
    #[error("line needs at least two sounded notes")]
    TooShort,
    #[error("no sonority has both voices sounding")]
    NoPairedSonorities,
    #[error("line has {notes} events but {chords} chords")]
    MisalignedChords { notes: usize, chords: usize },
}

fn sounded(line: &[NoteEvent]) -> impl Iterator<Item = Pitch> + '_ {
    line.iter().filter_map(|e| e.pitch)
}

/// Distinct pitch classes divided by sounded notes.
pub fn pcs_used(line: &[NoteEvent]) -> Result<f64, MetricError> {
    let n = sounded(line).count();
    if n == 0 {
        return Err(MetricError::EmptyLine);
    }
    let classes: BTreeSet<u8> = sounded(line).map(|p| p.pitch_class().value()).collect();
    Ok(classes.len() as f64 / n as f64)
}

/// 12-bin pitch-class histogram, normalized.
pub fn pc_histogram(line: &[NoteEvent]) -> Result<[f64; 12], MetricError> {
    let mut counts = [0usize; 12];
    for p in sounded(line) {
        counts[p.pitch_class().value() as usize] += 1;
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(MetricError::EmptyLine);
    }
    Ok(counts.map(|c| c as f64 / total as f64))
}

/// Histogram entropy in nats.
pub fn pc_entropy(line: &[NoteEvent]) -> Result<f64, MetricError> {
    pc_entropy_base(line, std::f64::consts::E)
}

pub fn pc_entropy_base(line: &[NoteEvent], base: f64) -> Result<f64, MetricError> {
    let hist = pc_histogram(line)?;
    let h: f64 = hist
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    Ok(h / base.ln())
}

/// Distinct MIDI numbers; octaves count separately.
pub fn unique_pitches(line: &[NoteEvent]) -> usize {
    sounded(line).collect::<BTreeSet<_>>().len()
}

pub fn pitch_range(line: &[NoteEvent]) -> Result<u8, MetricError> {
    let lo = sounded(line).min().ok_or(MetricError::EmptyLine)?;
    let hi = sounded(line).max().ok_or(MetricError::EmptyLine)?;
    Ok(hi.midi() - lo.midi())
}

pub fn avg_pitch_interval(line: &[NoteEvent]) -> Result<f64, MetricError> {
    let notes: Vec<Pitch> = sounded(line).collect();
    if notes.len() < 2 {
        return Err(MetricError::TooShort);
    }
    let total: u32 = notes
        .windows(2)
        .map(|w| crate::score::interval_semitones(w[0], w[1]) as u32)
        .sum();
    Ok(total as f64 / (notes.len() - 1) as f64)
}

fn paired(bass: &[NoteEvent], melody: &[NoteEvent]) -> Vec<(Pitch, Pitch)> {
    bass.iter()
        .zip(melody)
        .filter_map(|(b, m)| Some((b.pitch?, m.pitch?)))
        .collect()
}

/// Mean over paired sonorities of |{pc(melody), pc(bass)}| / 2.
pub fn unique_pc_ratio(bass: &[NoteEvent], melody: &[NoteEvent]) -> Result<f64, MetricError> {
    let pairs = paired(bass, melody);
    if pairs.is_empty() {
        return Err(MetricError::NoPairedSonorities);
    }
    let total: f64 = pairs
        .iter()
        .map(|(b, m)| if b.pitch_class() == m.pitch_class() { 0.5 } else { 1.0 })
        .sum();
    Ok(total / pairs.len() as f64)
}

/// Consonance of the melody-over-bass interval class:
/// +1 for unison, thirds, fifth and sixths; 0 for the fourth; -1 otherwise.
pub fn interval_consonance(semitones_mod_12: u8) -> i32 {
    match semitones_mod_12 {
        0 | 3 | 4 | 7 | 8 | 9 => 1,
        5 => 0,
        _ => -1,
    }
}

pub fn pitch_consonance_score(bass: &[NoteEvent], melody: &[NoteEvent]) -> Result<f64, MetricError> {
    let pairs = paired(bass, melody);
    if pairs.is_empty() {
        return Err(MetricError::NoPairedSonorities);
    }
    let total: i32 = pairs
        .iter()
        .map(|(b, m)| {
            let i = (m.midi() as i32 - b.midi() as i32).rem_euclid(12) as u8;
            interval_consonance(i)
        })
        .sum();
    Ok(total as f64 / pairs.len() as f64)
}

/// Fraction of sounded notes belonging to the aligned chord's triad.
/// `Ok(None)` when no chords are supplied.
pub fn ct_ratio(
    line: &[NoteEvent],
    chords: Option<&[ChordSymbol]>,
) -> Result<Option<f64>, MetricError> {
    let Some(chords) = chords else {
        return Ok(None);
    };
    if chords.len() != line.len() {
        return Err(MetricError::MisalignedChords {
            notes: line.len(),
            chords: chords.len(),
        });
    }
    let mut total = 0usize;
    let mut tones = 0usize;
    for (e, &c) in line.iter().zip(chords) {
        if let Some(p) = e.pitch {
            total += 1;
            if chord_tones(c).contains(&p.pitch_class()) {
                tones += 1;
            }
        }
    }
    if total == 0 {
        return Err(MetricError::EmptyLine);
    }
    Ok(Some(tones as f64 / total as f64))
}

/// Per-line metrics; a field is `None` where the metric is undefined for the line.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LineMetrics {
    pub pcs_used: Option<f64>,
    pub pc_entropy: Option<f64>,
    pub unique_pitches: Option<f64>,
    pub pitch_range: Option<f64>,
    pub avg_pitch_interval: Option<f64>,
    pub ct_ratio: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub unique_pc_ratio: Option<f64>,
    pub pcs: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhraseMetrics {
    pub id: String,
    pub melody: LineMetrics,
    pub bass: LineMetrics,
    pub pair: PairMetrics,
}

pub fn line_metrics(
    line: &[NoteEvent],
    chords: Option<&[ChordSymbol]>,
    entropy_base: f64,
) -> LineMetrics {
    LineMetrics {
        pcs_used: pcs_used(line).ok(),
        pc_entropy: pc_entropy_base(line, entropy_base).ok(),
        unique_pitches: Some(unique_pitches(line) as f64),
        pitch_range: pitch_range(line).ok().map(f64::from),
        avg_pitch_interval: avg_pitch_interval(line).ok(),
        ct_ratio: ct_ratio(line, chords).ok().flatten(),
    }
}

/// All metrics for one phrase. `use_chords = false` leaves CT Ratio absent.
pub fn phrase_metrics(p: &Phrase, use_chords: bool, entropy_base: f64) -> PhraseMetrics {
    let chords = p.chords();
    let chords = use_chords.then_some(chords.as_slice());
    let bass = p.line(Voice::Bass);
    let melody = p.line(Voice::Melody);
    PhraseMetrics {
        id: p.id.clone(),
        melody: line_metrics(&melody, chords, entropy_base),
        bass: line_metrics(&bass, chords, entropy_base),
        pair: PairMetrics {
            unique_pc_ratio: unique_pc_ratio(&bass, &melody).ok(),
            pcs: pitch_consonance_score(&bass, &melody).ok(),
        },
    }
}

/// A Table-1 metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    PcEntropy,
    PcsUsed,
    UniquePitches,
    PitchRange,
    UniquePcRatio,
    Pcs,
    PitchInterval,
    CtRatio,
}

impl Metric {
    pub fn label(self) -> &'static str {
        match self {
            Metric::PcEntropy => "PC Entropy",
            Metric::PcsUsed => "PCs Used",
            Metric::UniquePitches => "Unique Pitches",
            Metric::PitchRange => "Pitch Range",
            Metric::UniquePcRatio => "Unique PC Ratio",
            Metric::Pcs => "PCS",
            Metric::PitchInterval => "Pitch Interval",
            Metric::CtRatio => "CT Ratio",
        }
    }
}

/// One table row: a metric, for one voice or for the melody–bass pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: Metric,
    pub voice: Option<Voice>,
}

impl MetricRow {
    pub fn label(&self) -> String {
        match self.voice {
            Some(Voice::Melody) => format!("{} (Mel.)", self.metric.label()),
            Some(Voice::Bass) => format!("{} (Bass)", self.metric.label()),
            None => self.metric.label().to_string(),
        }
    }

    pub fn value(&self, m: &PhraseMetrics) -> Option<f64> {
        let line = match self.voice {
            Some(Voice::Melody) => &m.melody,
            Some(Voice::Bass) => &m.bass,
            None => {
                return match self.metric {
                    Metric::UniquePcRatio => m.pair.unique_pc_ratio,
                    Metric::Pcs => m.pair.pcs,
                    _ => None,
                }
            }
        };
        match self.metric {
            Metric::PcEntropy => line.pc_entropy,
            Metric::PcsUsed => line.pcs_used,
            Metric::UniquePitches => line.unique_pitches,
            Metric::PitchRange => line.pitch_range,
            Metric::PitchInterval => line.avg_pitch_interval,
            Metric::CtRatio => line.ct_ratio,
            Metric::UniquePcRatio | Metric::Pcs => None,
        }
    }
}

/// Rows in table order.
pub fn table_rows() -> Vec<MetricRow> {
    use Metric::*;
    let mut rows = Vec::new();
    for metric in [PcEntropy, PcsUsed, UniquePitches, PitchRange] {
        rows.push(MetricRow { metric, voice: Some(Voice::Melody) });
        rows.push(MetricRow { metric, voice: Some(Voice::Bass) });
    }
    rows.push(MetricRow { metric: UniquePcRatio, voice: None });
    rows.push(MetricRow { metric: Pcs, voice: None });
    for metric in [PitchInterval, CtRatio] {
        rows.push(MetricRow { metric, voice: Some(Voice::Melody) });
        rows.push(MetricRow { metric, voice: Some(Voice::Bass) });
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(ms: &[Option<i32>]) -> Vec<NoteEvent> {
        ms.iter()
            .map(|m| m.map_or_else(NoteEvent::rest, |m| NoteEvent::note(Pitch::new(m).unwrap())))
            .collect()
    }

    fn notes(ms: &[i32]) -> Vec<NoteEvent> {
        line(&ms.iter().map(|&m| Some(m)).collect::<Vec<_>>())
    }

    #[test]
    fn pcs_used_examples() {
        assert_eq!(pcs_used(&notes(&[60, 64, 67, 72])).unwrap(), 0.75);
        assert!((pcs_used(&notes(&[60, 60, 60])).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(pcs_used(&line(&[None])), Err(MetricError::EmptyLine));
        assert_eq!(pcs_used(&line(&[Some(60), None])).unwrap(), 1.0);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(pc_entropy(&notes(&[62, 62, 74])).unwrap(), 0.0);
        let uniform: Vec<i32> = (60..72).collect();
        assert!((pc_entropy(&notes(&uniform)).unwrap() - 12f64.ln()).abs() < 1e-12);
        assert!((pc_entropy(&notes(&[60, 62])).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!((pc_entropy_base(&notes(&[60, 62]), 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(pc_entropy(&[]).is_err());
    }

    #[test]
    fn pitch_count_examples() {
        assert_eq!(unique_pitches(&notes(&[60, 72, 60])), 2);
        assert_eq!(unique_pitches(&[]), 0);
        assert_eq!(pitch_range(&notes(&[65])).unwrap(), 0);
        assert_eq!(pitch_range(&notes(&[60, 64, 72])).unwrap(), 12);
        assert!(pitch_range(&line(&[None])).is_err());
    }

    #[test]
    fn interval_examples() {
        assert_eq!(avg_pitch_interval(&notes(&[60, 62, 64])).unwrap(), 2.0);
        assert_eq!(avg_pitch_interval(&line(&[Some(60), None, Some(67)])).unwrap(), 7.0);
        assert_eq!(avg_pitch_interval(&notes(&[60])), Err(MetricError::TooShort));
    }

    #[test]
    fn pair_examples() {
        let bass = notes(&[48, 43, 41]);
        assert_eq!(unique_pc_ratio(&bass, &notes(&[72, 67, 65])).unwrap(), 0.5);
        assert_eq!(unique_pc_ratio(&bass, &notes(&[76, 71, 69])).unwrap(), 1.0);
        assert_eq!(pitch_consonance_score(&bass, &notes(&[64, 59, 57])).unwrap(), 1.0);
        assert_eq!(pitch_consonance_score(&bass, &notes(&[54, 49, 47])).unwrap(), -1.0);
        assert_eq!(pitch_consonance_score(&bass, &notes(&[53, 48, 46])).unwrap(), 0.0);
        assert_eq!(
            unique_pc_ratio(&line(&[Some(48), None]), &line(&[None, Some(60)])),
            Err(MetricError::NoPairedSonorities)
        );
    }

    #[test]
    fn ct_ratio_examples() {
        let c = ChordSymbol::maj(0);
        assert_eq!(ct_ratio(&notes(&[60, 64, 67]), Some(&[c, c, c])).unwrap(), Some(1.0));
        assert_eq!(ct_ratio(&notes(&[62]), Some(&[c])).unwrap(), Some(0.0));
        assert_eq!(ct_ratio(&notes(&[62]), None).unwrap(), None);
        assert!(matches!(
            ct_ratio(&notes(&[62, 64]), Some(&[c])),
            Err(MetricError::MisalignedChords { .. })
        ));
        assert_eq!(ct_ratio(&line(&[None]), Some(&[c])), Err(MetricError::EmptyLine));
    }

    #[test]
    fn table_layout() {
        let rows = table_rows();
        assert_eq!(rows.len(), 14);
        assert_eq!(rows[0].label(), "PC Entropy (Mel.)");
        assert_eq!(rows[8].label(), "Unique PC Ratio");
        assert_eq!(rows[13].label(), "CT Ratio (Bass)");
    }
}
