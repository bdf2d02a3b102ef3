//! Humdrum `**kern` phrase files with four aligned spines: function,
//! harmonic (`**harm` Roman numerals), bass and melody.
//!
//! Only flat documents are accepted. Spine splits, merges, exchanges and
//! additions are reported as [`KernError::UnsupportedFeature`].

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::score::{ChordSymbol, Key, Mode, Phrase, Pitch, PitchClass, Quality};

#[derive(Debug, Error)]
pub enum KernError {
    #[error("malformed kern (line {line}): {reason}")]
    MalformedKern { line: usize, reason: String },
    #[error("unsupported kern feature {feature:?} (line {line})")]
    UnsupportedFeature { line: usize, feature: String },
    #[error("unparseable Roman numeral {0:?}")]
    UnparseableRomanNumeral(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn malformed(line: usize, reason: impl Into<String>) -> KernError {
    KernError::MalformedKern {
        line,
        reason: reason.into(),
    }
}

/// One kern data row. Null tokens (`.`) are kept verbatim.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub function: String,
    pub harmonic: String,
    pub bass_tokens: Vec<String>,
    pub melody_tokens: Vec<String>,
    /// Key in force when the row was read.
    pub key: Key,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPhrase {
    pub id: String,
    pub key_root: PitchClass,
    pub mode: Mode,
    pub records: Vec<RawRecord>,
}

/// Parsed kern note token: a sounded pitch or a rest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernNote {
    Pitch(Pitch),
    Rest,
}

impl KernNote {
    pub fn pitch(self) -> Option<Pitch> {
        match self {
            KernNote::Pitch(p) => Some(p),
            KernNote::Rest => None,
        }
    }
}

#[derive(Clone, Copy)]
enum SpineRole {
    Function,
    Harmonic,
    Bass,
    Melody,
}

/// Parses a key designation tandem interpretation such as `*G:`, `*c:`, `*B-:`.
fn parse_key_token(tok: &str) -> Option<Key> {
    let body = tok.strip_prefix('*')?.strip_suffix(':')?;
    let mut chars = body.chars();
    let letter = chars.next()?;
    let base = match letter.to_ascii_lowercase() {
        'c' => 0,
        'd' => 2,
        'e' => 4,
        'f' => 5,
        'g' => 7,
        'a' => 9,
        'b' => 11,
        _ => return None,
    };
    let mut shift = 0;
    for c in chars {
        match c {
            '#' => shift += 1,
            '-' => shift -= 1,
            _ => return None,
        }
    }
    let mode = if letter.is_ascii_uppercase() {
        Mode::Major
    } else {
        Mode::Minor
    };
    Some(Key::new(PitchClass::new(base + shift), mode))
}

/// Parses a TAVERN-style phrase document.
pub fn parse_kern(text: &str) -> Result<RawPhrase, KernError> {
    let mut roles: Option<Vec<SpineRole>> = None;
    let mut key: Option<Key> = None;
    let mut first_key: Option<Key> = None;
    let mut records = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with("!!") {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();

        let Some(roles) = roles.as_ref() else {
            if !fields.iter().all(|f| f.starts_with("**")) {
                return Err(malformed(lineno, "missing exclusive interpretations"));
            }
            roles = Some(assign_roles(&fields, lineno)?);
            continue;
        };

        if fields.len() != roles.len() {
            return Err(malformed(
                lineno,
                format!("expected {} spines, found {}", roles.len(), fields.len()),
            ));
        }

        if fields.iter().all(|f| f.starts_with('!')) || fields.iter().all(|f| f.starts_with('=')) {
            continue;
        }

        if fields.iter().all(|f| f.starts_with('*')) {
            if let Some(feature) = fields
                .iter()
                .find(|f| matches!(**f, "*^" | "*v" | "*x" | "*+"))
            {
                return Err(KernError::UnsupportedFeature {
                    line: lineno,
                    feature: feature.to_string(),
                });
            }
            if fields.iter().all(|f| *f == "*-") {
                break;
            }
            if let Some(k) = fields.iter().find_map(|f| parse_key_token(f)) {
                key = Some(k);
                first_key.get_or_insert(k);
            }
            continue;
        }

        if fields
            .iter()
            .any(|f| f.starts_with('*') || f.starts_with('!') || f.starts_with('='))
        {
            return Err(malformed(lineno, "row mixes data and non-data tokens"));
        }

        let key = key.ok_or_else(|| malformed(lineno, "data row before any key designation"))?;
        let mut rec = RawRecord {
            function: String::new(),
            harmonic: String::new(),
            bass_tokens: Vec::new(),
            melody_tokens: Vec::new(),
            key,
        };
        for (field, role) in fields.iter().zip(roles) {
            match role {
                SpineRole::Function => rec.function = field.to_string(),
                SpineRole::Harmonic => rec.harmonic = field.to_string(),
                SpineRole::Bass => rec.bass_tokens = split_kern_field(field, lineno)?,
                SpineRole::Melody => rec.melody_tokens = split_kern_field(field, lineno)?,
            }
        }
        records.push(rec);
    }

    if roles.is_none() {
        return Err(malformed(0, "missing exclusive interpretations"));
    }
    let key = first_key.ok_or_else(|| malformed(0, "no key designation"))?;
    if records.is_empty() {
        return Err(malformed(0, "no data records"));
    }
    Ok(RawPhrase {
        id: String::new(),
        key_root: key.root,
        mode: key.mode,
        records,
    })
}

fn assign_roles(fields: &[&str], line: usize) -> Result<Vec<SpineRole>, KernError> {
    if fields.len() != 4 {
        return Err(malformed(
            line,
            format!("expected 4 spines, found {}", fields.len()),
        ));
    }
    let kern_count = fields.iter().filter(|f| **f == "**kern").count();
    let harm_count = fields.iter().filter(|f| **f == "**harm").count();
    if kern_count != 2 || harm_count != 1 {
        return Err(malformed(
            line,
            "expected two **kern spines, one **harm spine and one function spine",
        ));
    }
    let mut seen_kern = false;
    Ok(fields
        .iter()
        .map(|f| match *f {
            "**harm" => SpineRole::Harmonic,
            "**kern" if !seen_kern => {
                seen_kern = true;
                SpineRole::Bass
            }
            "**kern" => SpineRole::Melody,
            _ => SpineRole::Function,
        })
        .collect())
}

fn split_kern_field(field: &str, line: usize) -> Result<Vec<String>, KernError> {
    if field == "." {
        return Ok(vec![".".to_string()]);
    }
    let toks: Vec<String> = field.split(' ').filter(|t| !t.is_empty()).map(String::from).collect();
    if toks.is_empty() {
        return Err(malformed(line, "empty kern field"));
    }
    for t in &toks {
        kern_pitch_to_midi(t).map_err(|e| match e {
            KernError::MalformedKern { reason, .. } => malformed(line, reason),
            other => other,
        })?;
    }
    Ok(toks)
}

/// Maps a kern note token to a MIDI pitch, or to a rest for tokens carrying `r`.
///
/// `c` is middle C (60); each repeated lowercase letter raises an octave and
/// each uppercase letter descends from `C` = 48. `#` and `-` alter by a
/// semitone per occurrence. Durations, beams, ties and articulations are
/// ignored.
pub fn kern_pitch_to_midi(token: &str) -> Result<KernNote, KernError> {
    let bad = |why: &str| malformed(0, format!("{why} in kern token {token:?}"));
    if token.contains('r') {
        return Ok(KernNote::Rest);
    }
    let mut letter: Option<char> = None;
    let mut count = 0i32;
    let mut shift = 0i32;
    for c in token.chars() {
        match c {
            'a'..='g' | 'A'..='G' => {
                match letter {
                    None => letter = Some(c),
                    Some(l) if l == c => {}
                    Some(_) => return Err(bad("mixed pitch letters")),
                }
                count += 1;
            }
            '#' => shift += 1,
            '-' => shift -= 1,
            _ => {}
        }
    }
    let letter = letter.ok_or_else(|| bad("no pitch letter"))?;
    let pc = match letter.to_ascii_lowercase() {
        'c' => 0,
        'd' => 2,
        'e' => 4,
        'f' => 5,
        'g' => 7,
        'a' => 9,
        'b' => 11,
        _ => unreachable!(),
    };
    let octave_base = if letter.is_ascii_lowercase() {
        60 + 12 * (count - 1)
    } else {
        48 - 12 * (count - 1)
    };
    Pitch::new(octave_base + pc + shift)
        .map(KernNote::Pitch)
        .map_err(|_| bad("pitch out of MIDI range"))
}

/// Kern spelling of a MIDI pitch with a quarter-note duration prefix.
pub fn midi_to_kern(p: Pitch) -> String {
    const SPELL: [(char, &str); 12] = [
        ('c', ""),
        ('c', "#"),
        ('d', ""),
        ('e', "-"),
        ('e', ""),
        ('f', ""),
        ('f', "#"),
        ('g', ""),
        ('a', "-"),
        ('a', ""),
        ('b', "-"),
        ('b', ""),
    ];
    let midi = p.midi() as i32;
    let octave = midi.div_euclid(12) - 1;
    let (letter, acc) = SPELL[midi.rem_euclid(12) as usize];
    let letters: String = if octave >= 4 {
        std::iter::repeat(letter).take((octave - 3) as usize).collect()
    } else {
        std::iter::repeat(letter.to_ascii_uppercase())
            .take((4 - octave) as usize)
            .collect()
    };
    format!("4{letters}{acc}")
}

const MAJOR_SCALE: [i32; 7] = [0, 2, 4, 5, 7, 9, 11];
const NATURAL_MINOR_SCALE: [i32; 7] = [0, 2, 3, 5, 7, 8, 10];
const NUMERALS: [&str; 7] = ["I", "II", "III", "IV", "V", "VI", "VII"];

/// Resolves a `**harm` token against a key.
///
/// Sevenths and inversion figures are dropped, diminished collapses to minor
/// and augmented to major. Applied chords (`V/V`) resolve right to left, each
/// target chord establishing the key for the numeral before it.
pub fn roman_numeral_to_chord(
    rn: &str,
    key_root: PitchClass,
    mode: Mode,
) -> Result<ChordSymbol, KernError> {
    let bad = || KernError::UnparseableRomanNumeral(rn.to_string());
    let parts: Vec<&str> = rn.split('/').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(bad());
    }
    let mut key = Key::new(key_root, mode);
    for part in parts[1..].iter().rev() {
        let target = resolve_simple(part, key).ok_or_else(bad)?;
        let target_mode = match target.quality {
            Quality::Maj => Mode::Major,
            Quality::Min => Mode::Minor,
        };
        key = Key::new(target.root, target_mode);
    }
    resolve_simple(parts[0], key).ok_or_else(bad)
}

fn resolve_simple(tok: &str, key: Key) -> Option<ChordSymbol> {
    let tonic_quality = match key.mode {
        Mode::Major => Quality::Maj,
        Mode::Minor => Quality::Min,
    };
    // Neapolitan, augmented sixths and the cadential six-four.
    if tok == "N" || tok == "N6" {
        return Some(ChordSymbol::new(key.root.transpose(1), Quality::Maj));
    }
    for aug6 in ["It", "Fr", "Ger"] {
        if let Some(rest) = tok.strip_prefix(aug6) {
            if rest.chars().all(|c| c.is_ascii_digit()) {
                return Some(ChordSymbol::new(key.root.transpose(8), Quality::Maj));
            }
        }
    }
    if tok == "Cad64" || tok == "Cad" {
        return Some(ChordSymbol::new(key.root, tonic_quality));
    }

    let mut rest = tok;
    let mut accidental = 0;
    loop {
        if let Some(r) = rest.strip_prefix('-').or_else(|| rest.strip_prefix('b')) {
            accidental -= 1;
            rest = r;
        } else if let Some(r) = rest.strip_prefix('#') {
            accidental += 1;
            rest = r;
        } else {
            break;
        }
    }

    let numeral_len = rest
        .chars()
        .take_while(|c| matches!(c, 'I' | 'V' | 'i' | 'v'))
        .count();
    let numeral = &rest[..numeral_len];
    if numeral.is_empty() {
        return None;
    }
    let upper = numeral.chars().all(|c| c.is_ascii_uppercase());
    let lower = numeral.chars().all(|c| c.is_ascii_lowercase());
    if !upper && !lower {
        return None;
    }
    let degree = NUMERALS
        .iter()
        .position(|n| *n == numeral.to_ascii_uppercase())?;

    let mut quality = if upper { Quality::Maj } else { Quality::Min };
    let mut figures = rest[numeral_len..].chars().peekable();
    while let Some(&c) = figures.peek() {
        match c {
            'o' | '%' | 'ø' => quality = Quality::Min,
            '+' => quality = Quality::Maj,
            _ => break,
        }
        figures.next();
    }
    if !figures.all(|c| c.is_ascii_digit() || matches!(c, 'a' | 'b' | 'c' | 'd' | '#' | '-')) {
        return None;
    }

    let offset = match key.mode {
        Mode::Major => MAJOR_SCALE[degree],
        // Leading-tone chords take the raised seventh; V is built on the
        // fifth in either minor scale.
        Mode::Minor if degree == 6 && lower => 11,
        Mode::Minor => NATURAL_MINOR_SCALE[degree],
    };
    Some(ChordSymbol::new(key.root.transpose(offset + accidental), quality))
}

/// Finds a Roman numeral that [`roman_numeral_to_chord`] resolves back to `chord`.
pub fn chord_to_roman(chord: ChordSymbol, key: Key) -> String {
    for acc in ["", "-", "#"] {
        for numeral in NUMERALS {
            let numeral = match chord.quality {
                Quality::Maj => numeral.to_string(),
                Quality::Min => numeral.to_ascii_lowercase(),
            };
            let candidate = format!("{acc}{numeral}");
            if roman_numeral_to_chord(&candidate, key.root, key.mode).ok() == Some(chord) {
                return candidate;
            }
        }
    }
    unreachable!("every chord is reachable from some altered scale degree")
}

fn kern_key_token(key: Key) -> String {
    const SPELL: [&str; 12] = ["c", "c#", "d", "e-", "e", "f", "f#", "g", "a-", "a", "b-", "b"];
    let name = SPELL[key.root.value() as usize];
    let name = match key.mode {
        Mode::Major => {
            let mut c = name.chars();
            let first = c.next().unwrap().to_ascii_uppercase();
            std::iter::once(first).chain(c).collect()
        }
        Mode::Minor => name.to_string(),
    };
    format!("*{name}:")
}

/// Renders a reduced phrase as a four-spine kern document, one row per sonority.
pub fn write_kern(phrase: &Phrase) -> String {
    let key = phrase.key();
    let key_tok = kern_key_token(key);
    let mut out = String::new();
    out.push_str(&format!("!!!OTL: {}\n", phrase.id));
    out.push_str("**function\t**harm\t**kern\t**kern\n");
    out.push_str(&format!("{key_tok}\t{key_tok}\t{key_tok}\t{key_tok}\n"));
    for s in &phrase.sonorities {
        let note = |e: crate::score::NoteEvent| match e.pitch {
            Some(p) => midi_to_kern(p),
            None => "4r".to_string(),
        };
        out.push_str(&format!(
            ".\t{}\t{}\t{}\n",
            chord_to_roman(s.chord, key),
            note(s.bass),
            note(s.melody)
        ));
    }
    out.push_str("*-\t*-\t*-\t*-\n");
    out
}

pub fn read_kern_file(path: &Path, id: &str) -> Result<RawPhrase, KernError> {
    let text = fs::read_to_string(path).map_err(|source| KernError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut raw = parse_kern(&text)?;
    raw.id = id.to_string();
    Ok(raw)
}

/// One kern file found under a corpus directory.
#[derive(Debug)]
pub struct KernEntry {
    pub set: String,
    pub path: PathBuf,
    pub id: String,
    pub phrase: Result<RawPhrase, KernError>,
}

fn is_kern_file(p: &Path) -> bool {
    p.is_file()
        && matches!(
            p.extension().and_then(|e| e.to_str()),
            Some("krn") | Some("kern")
        )
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, KernError> {
    let rd = fs::read_dir(dir).map_err(|source| KernError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|source| KernError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        paths.push(entry.path());
    }
    paths.sort();
    Ok(paths)
}

/// Walks `root/<set>/<phrase>.krn`, parsing every file. Ids are `{set}/{file stem}`.
pub fn read_kern_dir(root: &Path) -> Result<Vec<KernEntry>, KernError> {
    let mut out = Vec::new();
    for set_dir in sorted_entries(root)? {
        if !set_dir.is_dir() {
            continue;
        }
        let set = set_dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        for path in sorted_entries(&set_dir)? {
            if !is_kern_file(&path) {
                continue;
            }
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let id = format!("{set}/{stem}");
            let phrase = read_kern_file(&path, &id);
            out.push(KernEntry {
                set: set.clone(),
                path,
                id,
                phrase,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FIXTURE: &str = "!!!COM: test\n\
**function\t**harm\t**kern\t**kern\n\
*\t*\t*clefF4\t*clefG2\n\
*c:\t*c:\t*c:\t*c:\n\
*M4/4\t*M4/4\t*M4/4\t*M4/4\n\
=1\t=1\t=1\t=1\n\
T\ti\t4C 4G\t4cc\n\
D\tV7\t4GG\t8b 8dd\n\
!\t!\t!\t! inner comment\n\
T\t.\t.\t4r\n\
*-\t*-\t*-\t*-\n";

    fn midi(tok: &str) -> Option<u8> {
        kern_pitch_to_midi(tok).unwrap().pitch().map(Pitch::midi)
    }

    #[test]
    fn parses_rows_and_key() {
        let raw = parse_kern(FIXTURE).unwrap();
        assert_eq!(raw.records.len(), 3);
        assert_eq!(raw.mode, Mode::Minor);
        assert_eq!(raw.key_root, PitchClass::new(0));
        assert_eq!(raw.records[0].bass_tokens, vec!["4C", "4G"]);
        assert_eq!(raw.records[1].melody_tokens, vec!["8b", "8dd"]);
        assert_eq!(raw.records[2].harmonic, ".");
        assert_eq!(raw.records[2].bass_tokens, vec!["."]);
    }

    #[test]
    fn three_spines_is_malformed() {
        let text = "**harm\t**kern\t**kern\n*C:\t*C:\t*C:\nI\t4c\t4e\n";
        assert!(matches!(
            parse_kern(text),
            Err(KernError::MalformedKern { .. })
        ));
    }

    #[test]
    fn missing_exclusive_interpretations() {
        let text = "I\tT\t4c\t4e\n";
        assert!(matches!(
            parse_kern(text),
            Err(KernError::MalformedKern { .. })
        ));
    }

    #[test]
    fn ragged_row_is_malformed() {
        let text = "**function\t**harm\t**kern\t**kern\n*C:\t*C:\t*C:\t*C:\nT\tI\t4c\n";
        assert!(matches!(
            parse_kern(text),
            Err(KernError::MalformedKern { line: 3, .. })
        ));
    }

    #[test]
    fn spine_split_is_unsupported() {
        let text = "**function\t**harm\t**kern\t**kern\n*C:\t*C:\t*C:\t*C:\n*\t*\t*^\t*\n";
        assert!(matches!(
            parse_kern(text),
            Err(KernError::UnsupportedFeature { .. })
        ));
    }

    #[test]
    fn bad_note_token_is_malformed() {
        let text = "**function\t**harm\t**kern\t**kern\n*C:\t*C:\t*C:\t*C:\nT\tI\t4cd\t4e\n";
        assert!(matches!(
            parse_kern(text),
            Err(KernError::MalformedKern { line: 3, .. })
        ));
    }

    #[test]
    fn kern_pitches() {
        assert_eq!(midi("4c"), Some(60));
        assert_eq!(midi("8f#"), Some(66));
        assert_eq!(midi("4cc"), Some(72));
        assert_eq!(midi("4C"), Some(48));
        assert_eq!(midi("4CC"), Some(36));
        assert_eq!(midi("2.B--"), Some(57));
        assert_eq!(midi("16ee-L"), Some(75));
        assert_eq!(midi("[4a"), Some(69));
        assert_eq!(midi("4r"), None);
        assert!(kern_pitch_to_midi("4x").is_err());
    }

    #[test]
    fn roman_numerals() {
        let c = PitchClass::new(0);
        let rn = |s, m| roman_numeral_to_chord(s, c, m).unwrap();
        assert_eq!(rn("I", Mode::Major), ChordSymbol::maj(0));
        assert_eq!(rn("V", Mode::Minor), ChordSymbol::maj(7));
        assert_eq!(rn("iv", Mode::Minor), ChordSymbol::min(5));
        assert_eq!(rn("V7", Mode::Major), ChordSymbol::maj(7));
        assert_eq!(rn("ii65", Mode::Major), ChordSymbol::min(2));
        assert_eq!(rn("viio6", Mode::Major), ChordSymbol::min(11));
        assert_eq!(rn("viio7", Mode::Minor), ChordSymbol::min(11));
        assert_eq!(rn("VII", Mode::Minor), ChordSymbol::maj(10));
        assert_eq!(rn("VI", Mode::Minor), ChordSymbol::maj(8));
        assert_eq!(rn("III+", Mode::Minor), ChordSymbol::maj(3));
        assert_eq!(rn("V/V", Mode::Major), ChordSymbol::maj(2));
        assert_eq!(rn("viio7/V", Mode::Major), ChordSymbol::min(6));
        assert_eq!(rn("V43/ii", Mode::Major), ChordSymbol::maj(9));
        assert_eq!(rn("-VI", Mode::Major), ChordSymbol::maj(8));
        assert_eq!(rn("N6", Mode::Minor), ChordSymbol::maj(1));
        assert_eq!(rn("Ger65", Mode::Minor), ChordSymbol::maj(8));
        assert_eq!(rn("Cad64", Mode::Minor), ChordSymbol::min(0));
        let g = roman_numeral_to_chord("I", PitchClass::new(7), Mode::Major).unwrap();
        assert_eq!(g, ChordSymbol::maj(7));
    }

    #[test]
    fn bad_roman_numerals() {
        let c = PitchClass::new(0);
        for s in ["", "X", "Iv", "V/", "IIII", "V7q", "."] {
            assert!(
                roman_numeral_to_chord(s, c, Mode::Major).is_err(),
                "{s:?} should not parse"
            );
        }
    }

    #[test]
    fn key_tokens() {
        assert_eq!(
            parse_key_token("*B-:"),
            Some(Key::new(PitchClass::new(10), Mode::Major))
        );
        assert_eq!(
            parse_key_token("*f#:"),
            Some(Key::new(PitchClass::new(6), Mode::Minor))
        );
        assert_eq!(parse_key_token("*k[f#]"), None);
    }

    proptest! {
        #[test]
        fn octave_shift_is_twelve(letter in "[a-g]", reps in 1usize..4, acc in "[#-]{0,1}") {
            let lower: String = letter.repeat(reps);
            let higher: String = letter.repeat(reps + 1);
            let a = midi(&format!("4{lower}{acc}")).unwrap() as i32;
            let b = midi(&format!("4{higher}{acc}")).unwrap() as i32;
            prop_assert_eq!(b - a, 12);
            let up = letter.to_ascii_uppercase();
            let c = midi(&format!("4{}{acc}", up.repeat(reps))).unwrap() as i32;
            let d = midi(&format!("4{}{acc}", up.repeat(reps + 1))).unwrap() as i32;
            prop_assert_eq!(c - d, 12);
        }

        #[test]
        fn kern_spelling_round_trips(m in 12i32..120) {
            let p = Pitch::new(m).unwrap();
            prop_assert_eq!(midi(&midi_to_kern(p)), Some(m as u8));
        }

        #[test]
        fn roman_inverse_round_trips(root in 0i32..12, minor in any::<bool>(), key in 0i32..12, kmin in any::<bool>()) {
            let chord = if minor { ChordSymbol::min(root) } else { ChordSymbol::maj(root) };
            let key = Key::new(PitchClass::new(key), if kmin { Mode::Minor } else { Mode::Major });
            let rn = chord_to_roman(chord, key);
            prop_assert_eq!(roman_numeral_to_chord(&rn, key.root, key.mode).unwrap(), chord);
        }

        #[test]
        fn unaltered_numerals_land_on_scale_degrees(deg in 0usize..7, lower in any::<bool>(), fig in "(|6|7|64|65|43|42)", minor in any::<bool>(), key in 0i32..12) {
            let mode = if minor { Mode::Minor } else { Mode::Major };
            let numeral = if lower { NUMERALS[deg].to_ascii_lowercase() } else { NUMERALS[deg].to_string() };
            let chord = roman_numeral_to_chord(&format!("{numeral}{fig}"), PitchClass::new(key), mode).unwrap();
            let interval = (chord.root.value() as i32 - key).rem_euclid(12);
            let diatonic: Vec<i32> = match mode {
                Mode::Major => MAJOR_SCALE.to_vec(),
                Mode::Minor => NATURAL_MINOR_SCALE.iter().copied().chain([11]).collect(),
            };
            prop_assert!(diatonic.contains(&interval));
        }
    }
}
