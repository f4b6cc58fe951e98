//! A 5x7 bitmap font covering upper-case letters, digits and the punctuation
//! found on payslips.

const GLYPHS: &[(char, [&str; 7])] = &[
    ('A', [".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"]),
    ('B', ["####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."]),
    ('C', [".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."]),
    ('D', ["####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."]),
    ('E', ["#####", "#....", "#....", "####.", "#....", "#....", "#####"]),
    ('F', ["#####", "#....", "#....", "####.", "#....", "#....", "#...."]),
    ('G', [".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"]),
    ('H', ["#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"]),
    ('I', [".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."]),
    ('J', ["..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."]),
    ('K', ["#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"]),
    ('L', ["#....", "#....", "#....", "#....", "#....", "#....", "#####"]),
    ('M', ["#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"]),
    ('N', ["#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#"]),
    ('O', [".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."]),
    ('P', ["####.", "#...#", "#...#", "####.", "#....", "#....", "#...."]),
    ('Q', [".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"]),
    ('R', ["####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"]),
    ('S', [".####", "#....", "#....", ".###.", "....#", "....#", "####."]),
    ('T', ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."]),
    ('U', ["#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."]),
    ('V', ["#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."]),
    ('W', ["#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."]),
    ('X', ["#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"]),
    ('Y', ["#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."]),
    ('Z', ["#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"]),
    ('0', [".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."]),
    ('1', ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."]),
    ('2', [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"]),
    ('3', ["#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."]),
    ('4', ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."]),
    ('5', ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."]),
    ('6', ["..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."]),
    ('7', ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."]),
    ('8', [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."]),
    ('9', [".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."]),
    ('/', ["....#", "....#", "...#.", "..#..", ".#...", "#....", "#...."]),
    ('.', [".....", ".....", ".....", ".....", ".....", ".##..", ".##.."]),
    (',', [".....", ".....", ".....", ".....", ".##..", "..#..", ".#..."]),
    ('-', [".....", ".....", ".....", "#####", ".....", ".....", "....."]),
    (':', [".....", ".##..", ".##..", ".....", ".##..", ".##..", "....."]),
    ('\'', ["..#..", "..#..", ".#...", ".....", ".....", ".....", "....."]),
];

pub const GLYPH_HEIGHT: u32 = 7;
/// Blank font columns between letters of a word.
pub const LETTER_GAP: u32 = 1;
/// Blank font columns between words.
pub const WORD_GAP: u32 = 5;

/// Rows of the glyph with empty side columns trimmed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Glyph {
    pub width: u32,
    /// Row-major, `width * GLYPH_HEIGHT`.
    pub bits: Vec<bool>,
}

pub fn glyph(c: char) -> Option<Glyph> {
    let rows = GLYPHS.iter().find(|g| g.0 == c)?.1;
    let col_used = |x: usize| rows.iter().any(|r| r.as_bytes()[x] == b'#');
    let first = (0..5).find(|&x| col_used(x))?;
    let last = (0..5).rev().find(|&x| col_used(x))?;
    let mut bits = Vec::with_capacity((last - first + 1) * 7);
    for r in rows {
        bits.extend(r.as_bytes()[first..=last].iter().map(|&b| b == b'#'));
    }
    Some(Glyph {
        width: (last - first + 1) as u32,
        bits,
    })
}

/// The untrimmed 5x7 bitmap, for comparing glyph shapes.
pub fn cell(c: char) -> Option<[[bool; 5]; 7]> {
    let rows = GLYPHS.iter().find(|g| g.0 == c)?.1;
    let mut out = [[false; 5]; 7];
    for (y, r) in rows.iter().enumerate() {
        for (x, b) in r.bytes().enumerate() {
            out[y][x] = b == b'#';
        }
    }
    Some(out)
}

pub fn supported(c: char) -> bool {
    GLYPHS.iter().any(|g| g.0 == c)
}

/// Width of a word in font units, `None` if a character has no glyph.
pub fn word_width(word: &str) -> Option<u32> {
    let mut w = 0;
    for (i, c) in word.chars().enumerate() {
        if i > 0 {
            w += LETTER_GAP;
        }
        w += glyph(c)?.width;
    }
    Some(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_glyph_is_well_formed() {
        for (c, rows) in GLYPHS {
            assert!(rows.iter().all(|r| r.len() == 5), "{c}");
            assert!(glyph(*c).is_some(), "{c} is empty");
        }
    }

    #[test]
    fn glyphs_are_distinct() {
        for (i, a) in GLYPHS.iter().enumerate() {
            for b in &GLYPHS[i + 1..] {
                assert_ne!(a.1, b.1, "{} and {}", a.0, b.0);
            }
        }
    }

    #[test]
    fn trimming() {
        assert_eq!(glyph('A').unwrap().width, 5);
        assert_eq!(glyph('.').unwrap().width, 2);
        assert_eq!(glyph('1').unwrap().width, 3);
        assert!(glyph('a').is_none());
        assert_eq!(word_width("A.A"), Some(5 + 1 + 2 + 1 + 5));
    }
}
