//! Text feature points: OCR engine invocation, hOCR parsing and kernel
//! normalization.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment::{BBox, LayoutLine, PageLayout};

/// A recognized word: normalized kernel plus its bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct TextPoint {
    pub kernel: String,
    pub raw: String,
    pub bbox: BBox,
    pub confidence: f64,
}

impl TextPoint {
    pub fn new(raw: &str, bbox: BBox, confidence: f64) -> Self {
        TextPoint {
            kernel: normalize_kernel(raw),
            raw: raw.to_string(),
            bbox,
            confidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextLine {
    pub bbox: BBox,
    pub words: Vec<TextPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocumentText {
    pub lines: Vec<TextLine>,
    pub page_size: (u32, u32),
}

impl DocumentText {
    pub fn word_count(&self) -> usize {
        self.lines.iter().map(|l| l.words.len()).sum()
    }

    pub fn to_layout(&self) -> PageLayout {
        PageLayout {
            lines: self
                .lines
                .iter()
                .map(|l| LayoutLine {
                    line_box: l.bbox,
                    words: l.words.iter().map(|w| w.bbox).collect(),
                })
                .collect(),
        }
    }

    /// Maps every box through `f`, recomputing line boxes from their words.
    pub fn map_boxes(&self, mut f: impl FnMut(BBox) -> BBox) -> DocumentText {
        let lines = self
            .lines
            .iter()
            .map(|l| {
                let words: Vec<TextPoint> = l
                    .words
                    .iter()
                    .map(|w| TextPoint {
                        bbox: f(w.bbox),
                        ..w.clone()
                    })
                    .collect();
                let bbox = words
                    .iter()
                    .map(|w| w.bbox)
                    .reduce(|a, b| a.union(&b))
                    .unwrap_or_else(|| f(l.bbox));
                TextLine { bbox, words }
            })
            .collect();
        DocumentText {
            lines,
            page_size: self.page_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OcrEngineConfig {
    pub executable: PathBuf,
    pub language: String,
    pub extra_args: Vec<String>,
    /// Seconds.
    pub timeout: f64,
}

impl Default for OcrEngineConfig {
    fn default() -> Self {
        OcrEngineConfig {
            executable: PathBuf::from("tesseract"),
            language: "fra".to_string(),
            extra_args: Vec::new(),
            timeout: 120.0,
        }
    }
}

pub fn is_dash(c: char) -> bool {
    matches!(c, '-' | '\u{00AD}' | '\u{2010}'..='\u{2015}' | '\u{2212}' | '\u{FE58}' | '\u{FE63}' | '\u{FF0D}')
}

pub fn is_quote(c: char) -> bool {
    matches!(
        c,
        '\'' | '"' | '`' | '\u{00B4}' | '\u{00AB}' | '\u{00BB}' | '\u{2018}'..='\u{201F}' | '\u{2039}' | '\u{203A}' | '\u{FF02}' | '\u{FF07}'
    )
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || is_dash(c)
        || is_quote(c)
        || matches!(c, '\u{00A1}' | '\u{00B7}' | '\u{00BF}' | '\u{2016}'..='\u{2027}' | '\u{2030}'..='\u{205E}')
}

/// Canonical representative of a character's confusable class. Characters of
/// the same class substitute for free in [`crate::textmatch::edit_distance`].
pub fn confusable_class(c: char) -> char {
    match c {
        c if is_dash(c) => '-',
        c if is_quote(c) => '\'',
        'o' | 'O' | '0' => '0',
        'i' | 'I' | 'l' | '1' | '|' => '1',
        c => c,
    }
}

const SEPARATORS: [char; 4] = ['-', '/', '.', ','];

/// Normalizes a recognized word into its comparison kernel.
///
/// Case is folded, dash and quote variants are unified, punctuation is
/// dropped except `- / . ,` between two digits, and O/0 and I/l/1/| are
/// resolved towards digits or letters depending on which dominates the token.
pub fn normalize_kernel(raw: &str) -> String {
    let chars: Vec<char> = raw
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| {
            if is_dash(c) {
                '-'
            } else if is_quote(c) {
                '\''
            } else {
                c
            }
        })
        .collect();

    let ambiguous = |c: char| matches!(c, 'o' | '0' | 'i' | 'l' | '1');
    let sure_digits = chars.iter().filter(|c| c.is_numeric() && !ambiguous(**c)).count();
    let sure_letters = chars.iter().filter(|c| c.is_alphabetic() && !ambiguous(**c)).count();
    let digit_mode = if sure_digits != sure_letters {
        sure_digits > sure_letters
    } else {
        let digits = chars.iter().filter(|c| c.is_numeric()).count();
        let letters = chars.iter().filter(|c| c.is_alphabetic()).count();
        digits >= letters
    };

    let mapped: Vec<char> = chars
        .into_iter()
        .map(|c| match (digit_mode, c) {
            (true, 'o') => '0',
            (true, 'i' | 'l' | '|') => '1',
            (false, '0') => 'o',
            (false, '1' | '|') => 'l',
            _ => c,
        })
        .collect();

    let mut out = String::with_capacity(mapped.len());
    for (i, &c) in mapped.iter().enumerate() {
        if c.is_whitespace() {
            continue;
        }
        if !is_punctuation(c) {
            out.push(c);
            continue;
        }
        let between_digits = SEPARATORS.contains(&c)
            && i > 0
            && i + 1 < mapped.len()
            && mapped[i - 1].is_ascii_digit()
            && mapped[i + 1].is_ascii_digit();
        if between_digits {
            out.push(c);
        }
    }
    out
}

#[derive(Default)]
struct TitleProps {
    bbox: Option<BBox>,
    wconf: Option<f64>,
}

fn parse_title(title: &str) -> Result<TitleProps> {
    let mut props = TitleProps::default();
    for part in title.split(';') {
        let mut tokens = part.split_whitespace();
        match tokens.next() {
            Some("bbox") => {
                let nums: Vec<u32> = tokens
                    .map(|t| t.parse::<u32>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::MalformedHocr(format!("bad bbox in title {title:?}")))?;
                if nums.len() != 4 {
                    return Err(Error::MalformedHocr(format!("bbox needs 4 numbers in {title:?}")));
                }
                props.bbox = Some(BBox::from_corners(nums[0], nums[1], nums[2], nums[3]));
            }
            Some("x_wconf") => {
                props.wconf = tokens.next().and_then(|t| t.parse::<f64>().ok());
            }
            _ => {}
        }
    }
    Ok(props)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Page,
    Line,
    Word,
    Other,
}

const LINE_CLASSES: [&str; 5] = ["ocr_line", "ocr_caption", "ocr_header", "ocr_textfloat", "ocrx_line"];

struct Element {
    role: Role,
    class: String,
    title: Option<String>,
    id: Option<String>,
}

fn element(e: &BytesStart<'_>) -> Result<Element> {
    let mut class = String::new();
    let mut title = None;
    let mut id = None;
    for attr in e.attributes() {
        let attr = attr.map_err(|err| Error::MalformedHocr(err.to_string()))?;
        let value = attr
            .unescape_value()
            .map_err(|err| Error::MalformedHocr(err.to_string()))?
            .into_owned();
        match attr.key.as_ref() {
            b"class" => class = value,
            b"title" => title = Some(value),
            b"id" => id = Some(value),
            _ => {}
        }
    }
    let has = |name: &str| class.split_whitespace().any(|c| c == name);
    let role = if has("ocrx_word") {
        Role::Word
    } else if LINE_CLASSES.iter().any(|c| has(c)) {
        Role::Line
    } else if has("ocr_page") {
        Role::Page
    } else {
        Role::Other
    };
    Ok(Element { role, class, title, id })
}

struct WordBuilder {
    bbox: BBox,
    confidence: f64,
    text: String,
    depth: usize,
}

struct LineBuilder {
    bbox: Option<BBox>,
    words: Vec<TextPoint>,
    depth: usize,
}

/// Parses hOCR markup into ordered lines of text points.
pub fn parse_hocr(hocr: &str) -> Result<DocumentText> {
    let mut reader = Reader::from_str(hocr);
    reader.config_mut().check_end_names = true;

    let mut depth = 0usize;
    let mut page: Option<(u32, u32)> = None;
    let mut lines: Vec<TextLine> = Vec::new();
    let mut line: Option<LineBuilder> = None;
    let mut word: Option<WordBuilder> = None;
    // words found outside any line element
    let mut loose: Vec<TextPoint> = Vec::new();

    let finish_word = |w: WordBuilder, line: &mut Option<LineBuilder>, loose: &mut Vec<TextPoint>| {
        let text = w.text.trim();
        if text.is_empty() {
            return;
        }
        let tp = TextPoint::new(text, w.bbox, w.confidence);
        match line {
            Some(l) => l.words.push(tp),
            None => loose.push(tp),
        }
    };
    let finish_line = |l: LineBuilder, lines: &mut Vec<TextLine>| {
        if l.words.is_empty() {
            return;
        }
        let union = l.words.iter().map(|w| w.bbox).reduce(|a, b| a.union(&b)).unwrap();
        let bbox = l.bbox.map(|b| b.union(&union)).unwrap_or(union);
        lines.push(TextLine { bbox, words: l.words });
    };

    loop {
        let event = reader
            .read_event()
            .map_err(|e| Error::MalformedHocr(format!("at byte {}: {e}", reader.error_position())))?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_empty = matches!(event, Event::Empty(_));
                let el = element(e)?;
                let props = el.title.as_deref().map(parse_title).transpose()?.unwrap_or_default();
                if !is_empty {
                    depth += 1;
                }
                match el.role {
                    Role::Page => {
                        if let Some(b) = props.bbox {
                            page = Some((b.right(), b.bottom()));
                        }
                    }
                    Role::Line if word.is_none() => {
                        if let Some(l) = line.take() {
                            finish_line(l, &mut lines);
                        }
                        if !is_empty {
                            line = Some(LineBuilder {
                                bbox: props.bbox,
                                words: Vec::new(),
                                depth,
                            });
                        }
                    }
                    Role::Word => {
                        let bbox = props.bbox.ok_or_else(|| Error::MissingBbox(el.id.clone()))?;
                        if word.is_some() {
                            return Err(Error::MalformedHocr(format!("nested word element {:?}", el.class)));
                        }
                        if !is_empty {
                            word = Some(WordBuilder {
                                bbox,
                                confidence: props.wconf.map(|c| (c / 100.0).clamp(0.0, 1.0)).unwrap_or(0.0),
                                text: String::new(),
                                depth,
                            });
                        }
                    }
                    _ => {}
                }
            }
            Event::Text(t) => {
                if let Some(w) = word.as_mut() {
                    let text = match t.unescape() {
                        Ok(s) => s.into_owned(),
                        Err(_) => String::from_utf8_lossy(t.as_ref()).into_owned(),
                    };
                    w.text.push_str(&text);
                }
            }
            Event::CData(t) => {
                if let Some(w) = word.as_mut() {
                    w.text.push_str(&String::from_utf8_lossy(t.as_ref()));
                }
            }
            Event::End(_) => {
                if word.as_ref().is_some_and(|w| w.depth == depth) {
                    finish_word(word.take().unwrap(), &mut line, &mut loose);
                } else if word.is_none() && line.as_ref().is_some_and(|l| l.depth == depth) {
                    finish_line(line.take().unwrap(), &mut lines);
                }
                depth = depth
                    .checked_sub(1)
                    .ok_or_else(|| Error::MalformedHocr("unbalanced end tag".into()))?;
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if depth != 0 || word.is_some() {
        return Err(Error::MalformedHocr("unclosed elements at end of input".into()));
    }
    if let Some(l) = line.take() {
        finish_line(l, &mut lines);
    }
    if !loose.is_empty() {
        finish_line(
            LineBuilder {
                bbox: None,
                words: loose,
                depth: 0,
            },
            &mut lines,
        );
    }

    for l in &mut lines {
        l.words.sort_by_key(|w| (w.bbox.x, w.bbox.y));
    }
    lines.sort_by_key(|l| (l.bbox.y, l.bbox.x));

    let extent = lines.iter().fold((1u32, 1u32), |acc, l| {
        (acc.0.max(l.bbox.right()), acc.1.max(l.bbox.bottom()))
    });
    let page_size = match page {
        Some((w, h)) => (w.max(extent.0), h.max(extent.1)),
        None => extent,
    };
    Ok(DocumentText { lines, page_size })
}

fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn corners(b: &BBox) -> String {
    format!("bbox {} {} {} {}", b.x, b.y, b.right(), b.bottom())
}

/// Serializes recognized text in the hOCR dialect the parser reads, using the
/// raw word strings and their confidences.
pub fn write_hocr(doc: &DocumentText, image_name: &str) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<!DOCTYPE html PUBLIC \"-//W3C//DTD XHTML 1.0 Transitional//EN\" \"http://www.w3.org/TR/xhtml1/DTD/xhtml1-transitional.dtd\">\n");
    s.push_str("<html xmlns=\"http://www.w3.org/1999/xhtml\" xml:lang=\"en\" lang=\"en\">\n <head>\n  <title></title>\n");
    s.push_str("  <meta http-equiv=\"Content-Type\" content=\"text/html;charset=utf-8\"/>\n");
    s.push_str("  <meta name=\"ocr-system\" content=\"docdiff-synth\"/>\n");
    s.push_str("  <meta name=\"ocr-capabilities\" content=\"ocr_page ocr_carea ocr_par ocr_line ocrx_word\"/>\n </head>\n <body>\n");
    let (w, h) = doc.page_size;
    s.push_str(&format!(
        "  <div class='ocr_page' id='page_1' title='image \"{}\"; bbox 0 0 {w} {h}; ppageno 0'>\n",
        escape_text(image_name)
    ));
    let mut word_id = 0;
    for (li, line) in doc.lines.iter().enumerate() {
        s.push_str(&format!(
            "   <span class='ocr_line' id='line_1_{}' title=\"{}; baseline 0 0\">\n",
            li + 1,
            corners(&line.bbox)
        ));
        for word in &line.words {
            word_id += 1;
            s.push_str(&format!(
                "    <span class='ocrx_word' id='word_1_{word_id}' title='{}; x_wconf {}'>{}</span>\n",
                corners(&word.bbox),
                (word.confidence * 100.0).round() as u32,
                escape_text(&word.raw)
            ));
        }
        s.push_str("   </span>\n");
    }
    s.push_str("  </div>\n </body>\n</html>\n");
    s
}

/// Runs `<executable> <image> <outbase> -l <language> [extra..] hocr` and
/// returns the hOCR it wrote.
pub fn run_ocr(image_path: &Path, cfg: &OcrEngineConfig) -> Result<String> {
    if cfg.timeout <= 0.0 {
        return Err(Error::InvalidConfig("OCR timeout must be positive".into()));
    }
    let workdir = tempfile::tempdir()?;
    let outbase = workdir.path().join("page");
    let mut child = Command::new(&cfg.executable)
        .arg(image_path)
        .arg(&outbase)
        .arg("-l")
        .arg(&cfg.language)
        .args(&cfg.extra_args)
        .arg("hocr")
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => {
                Error::EngineNotFound(cfg.executable.clone())
            }
            _ => Error::Io(e),
        })?;

    let mut stderr_pipe = child.stderr.take().expect("stderr is piped");
    let stderr_reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr_pipe.read_to_end(&mut buf);
        buf
    });

    let deadline = Instant::now() + Duration::from_secs_f64(cfg.timeout);
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            let _ = child.wait();
            return Err(Error::Timeout(cfg.timeout));
        }
        std::thread::sleep(Duration::from_millis(2));
    };
    let stderr = String::from_utf8_lossy(&stderr_reader.join().unwrap_or_default()).into_owned();
    if !status.success() {
        return Err(Error::EngineFailed {
            status: status.code().unwrap_or(-1),
            stderr,
        });
    }
    let hocr_path = outbase.with_extension("hocr");
    std::fs::read_to_string(&hocr_path).map_err(|_| Error::EngineFailed {
        status: 0,
        stderr: format!("engine produced no {}; stderr: {stderr}", hocr_path.display()),
    })
}

/// Parses `hocr_override` when given, otherwise runs the engine on the image.
pub fn load_document_text(image_path: &Path, cfg: &OcrEngineConfig, hocr_override: Option<&Path>) -> Result<DocumentText> {
    let hocr = match hocr_override {
        Some(path) => {
            if !path.is_file() {
                return Err(Error::FileNotFound(path.to_path_buf()));
            }
            std::fs::read_to_string(path)?
        }
        None => run_ocr(image_path, cfg)?,
    };
    parse_hocr(&hocr)
}
