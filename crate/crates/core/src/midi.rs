//! Standard MIDI File (format 1) rendering of scores.

use std::collections::{BTreeSet, HashSet};

use thiserror::Error;

use crate::abc::{align_lyrics, BarPitchState, performance_order, EventRef, Mode, Rational, Score};

/// Ticks per quarter note.
pub const DIVISION: u16 = 480;
pub const VELOCITY: u8 = 96;
pub const MAX_CHANNELS: usize = 16;
const MAX_DELTA: u64 = 0x0FFF_FFFF;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MidiError {
    #[error("{0} voices exceed the 16 MIDI channels")]
    TooManyVoices(usize),
    #[error("delta time {0} does not fit a variable-length quantity")]
    DeltaOverflow(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MidiEventKind {
    NoteOn { channel: u8, key: u8, velocity: u8 },
    NoteOff { channel: u8, key: u8 },
    ProgramChange { channel: u8, program: u8 },
    /// Microseconds per quarter note.
    Tempo(u32),
    TimeSignature { numerator: u8, denominator_pow: u8 },
    KeySignature { fifths: i8, minor: bool },
    TrackName(String),
    Lyric(String),
    EndOfTrack,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MidiEvent {
    pub tick: u64,
    pub kind: MidiEventKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MidiTrack {
    /// Ordered by tick; ends with `EndOfTrack`.
    pub events: Vec<MidiEvent>,
}

impl MidiTrack {
    /// Tick of the end-of-track event.
    pub fn length(&self) -> u64 {
        self.events.last().map_or(0, |e| e.tick)
    }

    pub fn note_ons(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, MidiEventKind::NoteOn { .. }))
            .count()
    }

    pub fn lyrics(&self) -> impl Iterator<Item = &str> {
        self.events.iter().filter_map(|e| match &e.kind {
            MidiEventKind::Lyric(s) => Some(s.as_str()),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MidiDocument {
    pub division: u16,
    /// Track 0 is the tempo/meta track, then one track per voice that has
    /// bars, in score order.
    pub tracks: Vec<MidiTrack>,
}

/// Whole notes to ticks, rounded to nearest.
fn ticks(whole: Rational) -> u64 {
    let t = whole * Rational::from_integer(4 * i64::from(DIVISION));
    t.round().to_integer().max(0) as u64
}

/// Events sorted by tick, note-offs before other events at the same tick,
/// then end-of-track appended at `end`.
fn finish(mut events: Vec<MidiEvent>, end: u64) -> MidiTrack {
    let rank = |k: &MidiEventKind| match k {
        MidiEventKind::TrackName(_) => 0,
        MidiEventKind::NoteOff { .. } => 1,
        _ => 2,
    };
    events.sort_by_key(|e| (e.tick, rank(&e.kind)));
    let end = events.last().map_or(end, |e| e.tick.max(end));
    events.push(MidiEvent {
        tick: end,
        kind: MidiEventKind::EndOfTrack,
    });
    MidiTrack { events }
}

fn meta_track(score: &Score) -> MidiTrack {
    let mut ev = Vec::new();
    let mut push = |kind| ev.push(MidiEvent { tick: 0, kind });
    if let Some(t) = score.headers.titles.first() {
        push(MidiEventKind::TrackName(t.clone()));
    }
    push(MidiEventKind::Tempo(score.tempo().micros_per_quarter()));
    let m = score.meter();
    if m.denominator.is_power_of_two() && m.numerator <= 255 {
        push(MidiEventKind::TimeSignature {
            numerator: m.numerator as u8,
            denominator_pow: m.denominator.trailing_zeros() as u8,
        });
    }
    let key = score.key();
    push(MidiEventKind::KeySignature {
        fifths: key.fifths,
        minor: key.mode == Mode::Minor,
    });
    finish(ev, 0)
}

/// Channel per voice: the vocal voice on 0, the others in score order.
fn channels(score: &Score) -> Vec<u8> {
    let vocal = score.vocal_voice_index();
    let mut next = 1;
    (0..score.voices.len())
        .map(|i| {
            if i == vocal {
                0
            } else {
                next += 1;
                next - 1
            }
        })
        .collect()
}

fn voice_track(score: &Score, index: usize, channel: u8) -> MidiTrack {
    let voice = &score.voices[index];
    let unit = score.unit_length();
    let lyrics: Vec<(EventRef, String)> = if index == score.vocal_voice_index() {
        align_lyrics(voice)
            .pairs
            .into_iter()
            .map(|p| (p.event, p.syllable.text))
            .collect()
    } else {
        Vec::new()
    };
    let mut ev = vec![
        MidiEvent { tick: 0, kind: MidiEventKind::TrackName(voice.id.clone()) },
        MidiEvent { tick: 0, kind: MidiEventKind::ProgramChange { channel, program: 0 } },
    ];
    let mut state = BarPitchState::new(score.key());
    let mut pos = Rational::from_integer(0);
    // Sounding keys and their note-on tick.
    let mut active: Vec<(u8, u64)> = Vec::new();
    let mut held: BTreeSet<u8> = BTreeSet::new();
    let mut lyric_done: HashSet<EventRef> = HashSet::new();

    let release = |active: &mut Vec<(u8, u64)>, ev: &mut Vec<MidiEvent>, key: u8, at: u64| {
        if let Some(i) = active.iter().position(|&(k, _)| k == key) {
            let (_, on) = active.remove(i);
            if at > on {
                ev.push(MidiEvent { tick: on, kind: MidiEventKind::NoteOn { channel, key, velocity: VELOCITY } });
                ev.push(MidiEvent { tick: at, kind: MidiEventKind::NoteOff { channel, key } });
            }
        }
    };

    for b in performance_order(voice) {
        state.reset();
        for (e, event) in voice.bars[b].events().enumerate() {
            let start = ticks(pos);
            pos += event.duration * unit;
            let end = ticks(pos);
            let keys: BTreeSet<u8> = event
                .pitches
                .iter()
                .map(|p| state.resolve(p).clamp(0, 127) as u8)
                .collect();
            for &k in held.difference(&keys) {
                release(&mut active, &mut ev, k, start);
            }
            for &k in &keys {
                if !held.contains(&k) {
                    release(&mut active, &mut ev, k, start);
                    active.push((k, start));
                }
            }
            let r = EventRef { bar: b, event: e };
            if lyric_done.insert(r) {
                for (_, text) in lyrics.iter().filter(|(l, _)| *l == r) {
                    ev.push(MidiEvent { tick: start, kind: MidiEventKind::Lyric(text.clone()) });
                }
            }
            if event.tie && event.is_sounding() {
                held = keys;
            } else {
                for &k in &keys {
                    release(&mut active, &mut ev, k, end);
                }
                held.clear();
            }
        }
    }
    let end = ticks(pos);
    for k in held {
        release(&mut active, &mut ev, k, end);
    }
    finish(ev, end)
}

/// Compiles every voice of `score` into one format-1 document.
pub fn score_to_midi(score: &Score) -> Result<MidiDocument, MidiError> {
    if score.voices.len() > MAX_CHANNELS {
        return Err(MidiError::TooManyVoices(score.voices.len()));
    }
    let ch = channels(score);
    let mut tracks = vec![meta_track(score)];
    for i in rendered_voices(score) {
        tracks.push(voice_track(score, i, ch[i]));
    }
    Ok(MidiDocument { division: DIVISION, tracks })
}

/// Voices that get a track: those with at least one bar.
pub fn rendered_voices(score: &Score) -> Vec<usize> {
    (0..score.voices.len())
        .filter(|&i| !score.voices[i].bars.is_empty())
        .collect()
}

/// One document per voice (meta track plus that voice), keyed by voice id.
pub fn score_to_stems(score: &Score) -> Result<Vec<(String, MidiDocument)>, MidiError> {
    let full = score_to_midi(score)?;
    let meta = full.tracks[0].clone();
    Ok(rendered_voices(score)
        .into_iter()
        .zip(full.tracks.into_iter().skip(1))
        .map(|(i, t)| {
            (
                score.voices[i].id.clone(),
                MidiDocument { division: DIVISION, tracks: vec![meta.clone(), t] },
            )
        })
        .collect())
}

/// Variable-length quantity: 7 bits per byte, high bit set on all but the last.
pub fn write_vlq(out: &mut Vec<u8>, value: u64) -> Result<(), MidiError> {
    if value > MAX_DELTA {
        return Err(MidiError::DeltaOverflow(value));
    }
    let mut buf = [0u8; 4];
    let mut n = 0;
    let mut v = value;
    loop {
        buf[n] = (v & 0x7F) as u8;
        n += 1;
        v >>= 7;
        if v == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(buf[i] | if i > 0 { 0x80 } else { 0 });
    }
    Ok(())
}

fn meta(out: &mut Vec<u8>, kind: u8, data: &[u8]) -> Result<(), MidiError> {
    out.extend_from_slice(&[0xFF, kind]);
    write_vlq(out, data.len() as u64)?;
    out.extend_from_slice(data);
    Ok(())
}

fn write_track(track: &MidiTrack) -> Result<Vec<u8>, MidiError> {
    let mut body = Vec::new();
    let mut last = 0;
    for e in &track.events {
        write_vlq(&mut body, e.tick - last)?;
        last = e.tick;
        match &e.kind {
            MidiEventKind::NoteOn { channel, key, velocity } => {
                body.extend_from_slice(&[0x90 | channel, *key, *velocity])
            }
            MidiEventKind::NoteOff { channel, key } => body.extend_from_slice(&[0x80 | channel, *key, 0]),
            MidiEventKind::ProgramChange { channel, program } => {
                body.extend_from_slice(&[0xC0 | channel, *program])
            }
            MidiEventKind::Tempo(us) => meta(&mut body, 0x51, &us.to_be_bytes()[1..])?,
            MidiEventKind::TimeSignature { numerator, denominator_pow } => {
                meta(&mut body, 0x58, &[*numerator, *denominator_pow, 24, 8])?
            }
            MidiEventKind::KeySignature { fifths, minor } => {
                meta(&mut body, 0x59, &[*fifths as u8, u8::from(*minor)])?
            }
            MidiEventKind::TrackName(s) => meta(&mut body, 0x03, s.as_bytes())?,
            MidiEventKind::Lyric(s) => meta(&mut body, 0x05, s.as_bytes())?,
            MidiEventKind::EndOfTrack => meta(&mut body, 0x2F, &[])?,
        }
    }
    let mut out = b"MTrk".to_vec();
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend(body);
    Ok(out)
}

/// Serializes a document as SMF bytes.
pub fn write_smf(doc: &MidiDocument) -> Result<Vec<u8>, MidiError> {
    let mut out = b"MThd".to_vec();
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&(doc.tracks.len() as u16).to_be_bytes());
    out.extend_from_slice(&doc.division.to_be_bytes());
    for t in &doc.tracks {
        out.extend(write_track(t)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abc::parse_score;

    fn midi(text: &str) -> MidiDocument {
        score_to_midi(&parse_score(text).unwrap().score).unwrap()
    }

    fn notes(t: &MidiTrack) -> Vec<(u64, u64, u8)> {
        let mut open = Vec::new();
        let mut out = Vec::new();
        for e in &t.events {
            match e.kind {
                MidiEventKind::NoteOn { key, .. } => open.push((key, e.tick)),
                MidiEventKind::NoteOff { key, .. } => {
                    let i = open.iter().position(|&(k, _)| k == key).unwrap();
                    let (_, on) = open.remove(i);
                    out.push((on, e.tick, key));
                }
                _ => {}
            }
        }
        assert!(open.is_empty());
        out.sort();
        out
    }

    #[test]
    fn vlq() {
        let enc = |v| {
            let mut o = Vec::new();
            write_vlq(&mut o, v).unwrap();
            o
        };
        assert_eq!(enc(0), [0x00]);
        assert_eq!(enc(0x7F), [0x7F]);
        assert_eq!(enc(128), [0x81, 0x00]);
        assert_eq!(enc(0x2000), [0xC0, 0x00]);
        assert_eq!(enc(0x0FFF_FFFF), [0xFF, 0xFF, 0xFF, 0x7F]);
        assert!(write_vlq(&mut Vec::new(), 0x1000_0000).is_err());
    }

    #[test]
    fn tempo_and_header() {
        let d = midi("X:1\nQ:1/4=120\nK:C\nC2|\n");
        assert!(d.tracks[0].events.iter().any(|e| e.kind == MidiEventKind::Tempo(500_000)));
        let bytes = write_smf(&d).unwrap();
        assert_eq!(&bytes[..10], [0x4D, 0x54, 0x68, 0x64, 0, 0, 0, 6, 0, 1]);
        assert_eq!(&bytes[10..14], [0, 2, 0x01, 0xE0]);
        let at = bytes.windows(3).position(|w| w == [0xFF, 0x51, 0x03]).unwrap();
        assert_eq!(&bytes[at + 3..at + 6], [0x07, 0xA1, 0x20]);
        assert_eq!(write_smf(&d).unwrap(), bytes);
    }

    #[test]
    fn quarter_note_is_480_ticks() {
        let d = midi("X:1\nM:4/4\nL:1/8\nK:C\nC2|\n");
        assert_eq!(notes(&d.tracks[1]), [(0, 480, 60)]);
    }

    #[test]
    fn empty_score() {
        let d = score_to_midi(&parse_score("X:1\nK:C\n").unwrap().score).unwrap();
        assert_eq!(d.tracks.len(), 1);
        assert_eq!(d.tracks.iter().map(MidiTrack::note_ons).sum::<usize>(), 0);
    }

    #[test]
    fn ties_chords_and_accidentals() {
        let d = midi("X:1\nL:1/4\nK:D\nF- F [CEG] ^c | c c =c2 |\n");
        assert_eq!(
            notes(&d.tracks[1]),
            [
                (0, 960, 66),
                (960, 1440, 61),
                (960, 1440, 64),
                (960, 1440, 67),
                (1440, 1920, 73),
                (1920, 2400, 73),
                (2400, 2880, 73),
                (2880, 3840, 72),
            ]
        );
    }

    #[test]
    fn repeats_unrolled_and_length() {
        let d = midi("X:1\nL:1/4\nK:C\n|: C D E F :| G4 |]\n");
        assert_eq!(notes(&d.tracks[1]).len(), 9);
        assert_eq!(d.tracks[1].length(), 3 * 1920);
    }

    #[test]
    fn lyrics_and_channels() {
        let d = midi("X:1\nL:1/4\nK:C\nV:1\nC,4|\nV:2\nC D E F|\nw: one two- three\n");
        let lyr: Vec<&str> = d.tracks[2].lyrics().collect();
        assert_eq!(lyr, ["one", "two", "three"]);
        assert_eq!(d.tracks[1].lyrics().count(), 0);
        let ch = |t: &MidiTrack| {
            t.events.iter().find_map(|e| match e.kind {
                MidiEventKind::NoteOn { channel, .. } => Some(channel),
                _ => None,
            })
        };
        assert_eq!(ch(&d.tracks[2]), Some(0));
        assert_eq!(ch(&d.tracks[1]), Some(1));
    }

    #[test]
    fn too_many_voices() {
        let body: String = (1..=17).map(|i| format!("V:{i}\nC|\n")).collect();
        let s = parse_score(&format!("X:1\nK:C\n{body}")).unwrap().score;
        assert_eq!(score_to_midi(&s), Err(MidiError::TooManyVoices(17)));
    }

    #[test]
    fn stems_hold_one_voice() {
        let s = parse_score("X:1\nK:C\nV:1\nC|\nV:2\nE|\n").unwrap().score;
        let stems = score_to_stems(&s).unwrap();
        assert_eq!(stems.len(), 2);
        assert_eq!(stems[1].0, "2");
        assert_eq!(stems[1].1.tracks.len(), 2);
    }
}
