use super::{LineEntry, Score};

/// Serializes a score back to ABC text.
///
/// Header fields come out in source order, then each voice as one block.
/// Bars are printed from their source text, so every bar survives
/// byte-for-byte. Voices that were interleaved in the source are grouped.
pub fn print_score(score: &Score) -> String {
    let mut out = String::new();
    for f in &score.headers.fields {
        out.push(f.tag);
        out.push(':');
        out.push_str(&f.value);
        out.push('\n');
    }
    for voice in &score.voices {
        if voice.explicit {
            out.push_str("V:");
            out.push_str(&voice.id);
            out.push_str(&voice.properties);
            out.push('\n');
        }
        let mut next_bar = 0;
        for entry in &voice.layout {
            match entry {
                LineEntry::Music { bars } => {
                    for bar in &voice.bars[next_bar..next_bar + bars] {
                        out.push_str(&bar.source_text);
                    }
                    next_bar += bars;
                }
                LineEntry::Lyrics(i) => {
                    out.push_str("w:");
                    out.push_str(&voice.lyric_lines[*i].source);
                }
                LineEntry::Passthrough(line) => out.push_str(line),
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abc::parse_score;

    #[test]
    fn prints_the_canonical_form() {
        let text = "X:1\nT:Song\nM:4/4\nL:1/8\nK:C\nV:1\nC2 E2 G2 c2 | d8 |]\nw: a b c d e\n";
        let s = parse_score(text).unwrap().score;
        assert_eq!(print_score(&s), text);
    }

    #[test]
    fn groups_interleaved_voices() {
        let text = "X:1\nK:C\nV:1\nC8|\nV:2\nE8|\nV:1\nG8|\n";
        let s = parse_score(text).unwrap().score;
        let printed = print_score(&s);
        assert_eq!(printed, "X:1\nK:C\nV:1\nC8|\nG8|\nV:2\nE8|\n");
        assert_eq!(parse_score(&printed).unwrap().score, s);
    }

    #[test]
    fn header_voices_move_to_the_body() {
        let text = "X:1\nV:1 name=\"S\"\nK:C\nV:1\nC8|\n";
        let s = parse_score(text).unwrap().score;
        let printed = print_score(&s);
        assert_eq!(printed, "X:1\nK:C\nV:1 name=\"S\"\nC8|\n");
        assert_eq!(parse_score(&printed).unwrap().score, s);
    }

    #[test]
    fn passthrough_lines_survive() {
        let text = "X:1\nK:C\n%%score 1\nC8|\nP:B\nD8|\n";
        let s = parse_score(text).unwrap().score;
        let printed = print_score(&s);
        assert_eq!(printed, text);
    }
}
