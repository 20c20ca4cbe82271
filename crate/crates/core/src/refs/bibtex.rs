use std::collections::{BTreeMap, HashMap};
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Diagnostics, Mode};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BibEntry {
    pub key: String,
    /// Lower-cased entry type, e.g. `article`.
    pub entry_type: String,
    /// Field values with outer braces or quotes removed; keys lower-cased.
    pub fields: BTreeMap<String, String>,
}

/// Bibliography entries in file order, indexed by key.
#[derive(Debug, Clone, Default)]
pub struct Bibliography {
    entries: Vec<BibEntry>,
    by_key: HashMap<String, usize>,
}

impl Bibliography {
    /// Builds a bibliography; later entries with a repeated key are dropped.
    pub fn from_entries(entries: impl IntoIterator<Item = BibEntry>) -> Self {
        let mut bib = Bibliography::default();
        for entry in entries {
            bib.insert(entry);
        }
        bib
    }

    fn insert(&mut self, entry: BibEntry) -> bool {
        if self.by_key.contains_key(&entry.key) {
            return false;
        }
        self.by_key.insert(entry.key.clone(), self.entries.len());
        self.entries.push(entry);
        true
    }

    pub fn entries(&self) -> &[BibEntry] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&BibEntry> {
        self.by_key.get(key).map(|&i| &self.entries[i])
    }

    pub fn contains(&self, key: &str) -> bool {
        self.by_key.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// A copy without the entry for `key`.
    pub fn without(&self, key: &str) -> Bibliography {
        Bibliography::from_entries(self.entries.iter().filter(|e| e.key != key).cloned())
    }
}

/// Whether `key` is a well-formed citation key.
pub fn is_valid_key(key: &str) -> bool {
    let mut chars = key.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphanumeric())
        && chars.all(|c| c.is_ascii_alphanumeric() || "_:.+-".contains(c))
}

/// Reads a `.bib` file, falling back to Latin-1 when it is not UTF-8.
pub fn read_bibtex_file(path: &Path, mode: Mode) -> io::Result<(Bibliography, Diagnostics)> {
    let bytes = std::fs::read(path)?;
    let (text, latin1) = match String::from_utf8(bytes) {
        Ok(text) => (text, false),
        Err(err) => (err.into_bytes().iter().map(|&b| b as char).collect(), true),
    };
    let (bib, mut diags) = parse_bibtex(&text, mode);
    if latin1 {
        diags.warning("NonUtf8Bibliography", "bibliography is not UTF-8; decoded as Latin-1");
    }
    diags.stamp_file(path);
    Ok((bib, diags))
}

/// Parses BibTeX source. Never fails: malformed blocks are skipped and reported.
///
/// ```
/// use rxiv_core::refs::parse_bibtex;
/// use rxiv_core::Mode;
///
/// let (bib, diags) = parse_bibtex("@article{beck2020, title={X}}", Mode::Lenient);
/// assert!(diags.is_empty());
/// assert_eq!(bib.entries()[0].key, "beck2020");
/// assert_eq!(bib.entries()[0].fields["title"], "X");
/// ```
pub fn parse_bibtex(source: &str, mode: Mode) -> (Bibliography, Diagnostics) {
    let mut parser = Parser {
        src: source,
        bytes: source.as_bytes(),
        pos: 0,
    };
    let mut bib = Bibliography::default();
    let mut diags = Diagnostics::new();
    while let Some(at) = parser.next_at() {
        parser.pos = at + 1;
        let line = line_of(source, at);
        match parser.block() {
            Ok(Block::Entry(entry)) => {
                let key = entry.key.clone();
                if !bib.insert(entry) {
                    diags
                        .defect(
                            mode,
                            "DuplicateKey",
                            format!("bibliography key `{key}` is defined more than once"),
                        )
                        .line = Some(line);
                }
            }
            Ok(Block::Skipped) => {}
            Ok(Block::StringMacro) => {
                diags
                    .defect(mode, "UnsupportedStringMacro", "@string macros are not expanded")
                    .line = Some(line);
            }
            Err(reason) => {
                diags
                    .defect(mode, "MalformedEntry", format!("skipped malformed entry: {reason}"))
                    .line = Some(line);
                parser.recover(at);
            }
        }
    }
    (bib, diags)
}

fn line_of(src: &str, pos: usize) -> usize {
    1 + src[..pos].matches('\n').count()
}

enum Block {
    Entry(BibEntry),
    Skipped,
    StringMacro,
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn next_at(&self) -> Option<usize> {
        self.src[self.pos.min(self.src.len())..].find('@').map(|r| self.pos + r)
    }

    /// Resumes scanning at the next `@` that starts a line after `from`.
    fn recover(&mut self, from: usize) {
        let mut i = from + 1;
        while let Some(r) = self.src[i..].find('@') {
            let at = i + r;
            let line_start = self.src[..at].rfind('\n').map_or(0, |n| n + 1);
            if self.src[line_start..at].trim().is_empty() {
                self.pos = at;
                return;
            }
            i = at + 1;
        }
        self.pos = self.src.len();
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|b| b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn ident(&mut self) -> &str {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|b| b.is_ascii_alphanumeric() || b"_-:.+/".contains(&b))
        {
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn block(&mut self) -> Result<Block, String> {
        let kind = self.ident().to_ascii_lowercase();
        if kind.is_empty() {
            return Err("expected an entry type after `@`".into());
        }
        self.skip_ws();
        let close = match self.peek() {
            Some(b'{') => b'}',
            Some(b'(') => b')',
            _ if kind == "comment" => return Ok(Block::Skipped),
            _ => return Err(format!("expected `{{` after @{kind}")),
        };
        let open = self.pos;
        self.pos += 1;
        match kind.as_str() {
            "comment" | "preamble" | "string" => {
                self.skip_balanced(open, close)?;
                Ok(if kind == "string" {
                    Block::StringMacro
                } else {
                    Block::Skipped
                })
            }
            _ => self.entry(kind, close).map(Block::Entry),
        }
    }

    fn skip_balanced(&mut self, open: usize, close: u8) -> Result<(), String> {
        let opener = self.bytes[open];
        let mut depth = 1;
        while let Some(b) = self.peek() {
            self.pos += 1;
            if b == opener {
                depth += 1;
            } else if b == close {
                depth -= 1;
                if depth == 0 {
                    return Ok(());
                }
            }
        }
        Err("unbalanced delimiters".into())
    }

    fn entry(&mut self, entry_type: String, close: u8) -> Result<BibEntry, String> {
        self.skip_ws();
        let key = self.ident().to_string();
        if !is_valid_key(&key) {
            return Err(format!("invalid key `{key}`"));
        }
        self.skip_ws();
        let mut fields = BTreeMap::new();
        loop {
            match self.peek() {
                Some(b',') => {
                    self.pos += 1;
                    self.skip_ws();
                }
                Some(b) if b == close => {
                    self.pos += 1;
                    return Ok(BibEntry {
                        key,
                        entry_type,
                        fields,
                    });
                }
                None => return Err(format!("entry `{key}` is not closed")),
                _ => {
                    let name = self.ident().to_ascii_lowercase();
                    if name.is_empty() {
                        return Err(format!("unexpected character in entry `{key}`"));
                    }
                    self.skip_ws();
                    if self.peek() != Some(b'=') {
                        return Err(format!("field `{name}` in `{key}` has no value"));
                    }
                    self.pos += 1;
                    let value = self.value()?;
                    fields.insert(name, value);
                    self.skip_ws();
                }
            }
        }
    }

    /// A field value: braced, quoted or bare pieces joined with `#`.
    fn value(&mut self) -> Result<String, String> {
        let mut out = String::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'{') => {
                    let start = self.pos + 1;
                    self.pos += 1;
                    self.skip_balanced(start - 1, b'}')?;
                    out.push_str(&self.src[start..self.pos - 1]);
                }
                Some(b'"') => {
                    self.pos += 1;
                    let start = self.pos;
                    let mut depth = 0;
                    loop {
                        match self.peek() {
                            None => return Err("unterminated quoted value".into()),
                            Some(b'{') => depth += 1,
                            Some(b'}') => depth -= 1,
                            Some(b'"') if depth == 0 => break,
                            _ => {}
                        }
                        self.pos += 1;
                    }
                    out.push_str(&self.src[start..self.pos]);
                    self.pos += 1;
                }
                _ => {
                    let bare = self.ident();
                    if bare.is_empty() {
                        return Err("missing field value".into());
                    }
                    out.push_str(bare);
                }
            }
            self.skip_ws();
            if self.peek() == Some(b'#') {
                self.pos += 1;
            } else {
                return Ok(out);
            }
        }
    }
}
