//! Acceptance checks. Each criterion prints one PASS, FAIL or SKIP line;
//! the process fails if any criterion fails.

mod common;

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rxiv_core::convert::{convert_document, ConvertOptions};
use rxiv_core::pipeline::{self, Manuscript};
use rxiv_core::protect::protect;
use rxiv_core::refs::{
    build_label_index, read_bibtex_file, scan_references, validate_references, BibEntry, Bibliography, LabelIndex,
    SnoteStyle,
};
use rxiv_core::{Diagnostics, Mode};

use common::*;

type Outcome = Result<String, String>;

// ---- 1. syntax table ----

/// Markdown column, LaTeX column. `...` in the LaTeX column stands for
/// the converted content of the construct.
const SYNTAX_ROWS: [(&str, &str); 24] = [
    ("**bold text**", r"\textbf{bold text}"),
    ("*italic text*", r"\textit{italic text}"),
    ("~subscript~", r"\textsubscript{subscript}"),
    ("^superscript^", r"\textsuperscript{superscript}"),
    ("# Header 1", r"\section{Header 1}"),
    ("## Header 2", r"\subsection{Header 2}"),
    ("### Header 3", r"\subsubsection{Header 3}"),
    ("- list item", r"\begin{itemize}\item...\end{itemize}"),
    ("1. list item", r"\begin{enumerate}\item...\end{enumerate}"),
    ("[link text](url)", r"\href{url}{link text}"),
    ("https://example.com", r"\url{https://example.com}"),
    ("@citation", r"\cite{citation}"),
    ("[@cite1;@cite2]", r"\cite{cite1,cite2}"),
    ("@fig:label", r"\ref{fig:label}"),
    ("@sfig:label", r"\ref{sfig:label}"),
    ("@table:label", r"\ref{table:label}"),
    ("@stable:label", r"\ref{stable:label}"),
    ("@eq:label", r"\eqref{eq:label}"),
    ("@snote:label", r"\sidenote{label}"),
    (
        "| A | B |\n|---|---|\n| 1 | 2 |\n\nTable: Caption. {#table:label}",
        r"\begin{table}...\end{table}",
    ),
    (
        "![Caption.](FIGURES/label.png){#fig:label}",
        r"\begin{figure}...\end{figure}",
    ),
    ("<!-- comment -->", "% comment"),
    ("<newpage>", r"\newpage"),
    ("<clearpage>", r"\clearpage"),
];

fn syntax_bib() -> Bibliography {
    Bibliography::from_entries(["citation", "cite1", "cite2"].map(|k| BibEntry {
        key: k.into(),
        entry_type: "misc".into(),
        fields: Default::default(),
    }))
}

/// Drops line breaks and the indentation around them, so that a
/// multi-line environment compares equal to its one-line table form.
fn join_lines(s: &str) -> String {
    s.lines().map(str::trim).collect()
}

fn row_matches(actual: &str, expected: &str, item: &str) -> bool {
    match expected.split_once("...") {
        None => actual == expected,
        Some((head, tail)) if expected.contains("\\item") => join_lines(actual) == format!("{head} {item}{tail}"),
        Some((head, tail)) => {
            let joined = join_lines(actual);
            joined.starts_with(head) && joined.ends_with(tail) && joined.len() > head.len() + tail.len()
        }
    }
}

fn criterion_syntax_table() -> Outcome {
    let index = LabelIndex::from_labels([
        "fig:label",
        "sfig:label",
        "table:label",
        "stable:label",
        "eq:label",
        "snote:label",
    ]);
    let bib = syntax_bib();
    let options = ConvertOptions {
        snote_style: SnoteStyle::Sidenote,
        ..ConvertOptions::strict()
    };
    let start = Instant::now();
    let mut failures = Vec::new();
    for (markdown, expected) in SYNTAX_ROWS {
        let actual = match convert_document(markdown, &index, &bib, &options) {
            Ok(out) => out.fragment.content.trim().to_string(),
            Err(e) => format!("<error: {e}>"),
        };
        if !row_matches(&actual, expected, "list item") {
            failures.push(format!("{markdown:?} -> {actual:?}, expected {expected:?}"));
        }
    }
    let elapsed = start.elapsed();
    if !failures.is_empty() {
        return Err(failures.join("; "));
    }
    if elapsed >= Duration::from_secs(1) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("{} rows exact in {elapsed:.2?}", SYNTAX_ROWS.len()))
}

// ---- 2. protection round trip ----

enum Piece {
    Prose(String),
    Math(String),
    Code(String),
    Fence(String),
    Comment,
}

fn word(rng: &mut ChaCha8Rng) -> String {
    const WORDS: [&str; 12] = [
        "cell", "R&D", "50%", "x_1", "**bold**", "*it*", "H~2~O", "E^2^", "#tag", "data", "v2.0", "a/b",
    ];
    WORDS[rng.random_range(0..WORDS.len())].to_string()
}

fn from(rng: &mut ChaCha8Rng, alphabet: &str, min: usize, max: usize) -> String {
    let chars: Vec<char> = alphabet.chars().collect();
    let n = rng.random_range(min..=max);
    (0..n).map(|_| chars[rng.random_range(0..chars.len())]).collect()
}

/// Math bodies are built from whole tokens so that a backslash never
/// escapes the closing delimiter.
fn math_body(rng: &mut ChaCha8Rng, min: usize, max: usize) -> String {
    const TOKENS: [&str; 13] = [
        "a", "b", "^", "_", "{x}", "+", "=", " ", r"\alpha", r"\%", r"\&", "#", "}",
    ];
    let n = rng.random_range(min..=max);
    (0..n).map(|_| TOKENS[rng.random_range(0..TOKENS.len())]).collect()
}

fn piece(rng: &mut ChaCha8Rng, comments: bool) -> Piece {
    let letters = "abcxyz";
    match rng.random_range(0..if comments { 10 } else { 9 }) {
        0..=3 => Piece::Prose(
            (0..rng.random_range(1..5))
                .map(|_| word(rng))
                .collect::<Vec<_>>()
                .join(" "),
        ),
        4 => {
            let body = format!(
                "{}{}{}",
                from(rng, letters, 1, 1),
                math_body(rng, 0, 6),
                from(rng, letters, 1, 1)
            );
            Piece::Math(format!("${body}$"))
        }
        5 => Piece::Math(format!("$${}$$", math_body(rng, 1, 8))),
        6 => Piece::Code(format!(
            "{}{}",
            from(rng, letters, 1, 1),
            from(rng, r"ab$_%#{}\ ^~*", 0, 8)
        )),
        7 | 8 => Piece::Fence(
            (0..rng.random_range(0..4))
                .map(|_| from(rng, r"ab $*_%#{}\`", 0, 12))
                .collect::<Vec<_>>()
                .join("\n"),
        ),
        _ => Piece::Comment,
    }
}

/// A generated document and the verbatim text each span must keep.
fn document(rng: &mut ChaCha8Rng, comments: bool) -> (String, Vec<String>) {
    let mut doc = String::new();
    let mut spans = Vec::new();
    for _ in 0..rng.random_range(1..12) {
        match piece(rng, comments) {
            Piece::Prose(p) => doc.push_str(&p),
            Piece::Math(m) => {
                doc.push_str(&m);
                spans.push(m);
            }
            Piece::Code(c) => {
                doc.push_str(&format!("`{c}`"));
                spans.push(c);
            }
            Piece::Fence(body) => {
                if !doc.is_empty() && !doc.ends_with('\n') {
                    doc.push('\n');
                }
                doc.push_str(&format!("```\n{body}\n```\n"));
                if !body.is_empty() {
                    spans.push(body);
                }
            }
            Piece::Comment => doc.push_str("<!-- note -->"),
        }
        doc.push_str([" ", "\n", "\n\n"][rng.random_range(0..3)]);
    }
    (doc, spans)
}

/// Every span appears in `output`, in document order.
fn spans_in_order(output: &str, spans: &[String]) -> Result<(), String> {
    let mut at = 0;
    for span in spans {
        match output[at..].find(span.as_str()) {
            Some(i) => at += i + span.len(),
            None => return Err(format!("span {span:?} missing")),
        }
    }
    Ok(())
}

fn criterion_protection() -> Outcome {
    const DOCS: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let index = LabelIndex::default();
    let bib = Bibliography::default();
    let options = ConvertOptions::default();
    let mut round_trips = 0;
    for n in 0..DOCS {
        let comments = n % 2 == 1;
        let (doc, spans) = document(&mut rng, comments);
        if !comments {
            let (p, _) = protect(&doc, Mode::Lenient).map_err(|e| format!("{doc:?}: {e}"))?;
            let restored = p.restore().map_err(|e| format!("{doc:?}: {e}"))?;
            if restored != doc {
                return Err(format!("round trip changed {doc:?} into {restored:?}"));
            }
            round_trips += 1;
        }
        let out = convert_document(&doc, &index, &bib, &options).map_err(|e| format!("{doc:?}: {e}"))?;
        spans_in_order(&out.fragment.content, &spans)
            .map_err(|e| format!("{e} in {doc:?} -> {:?}", out.fragment.content))?;
    }
    Ok(format!("{DOCS} documents converted, {round_trips} round trips exact"))
}

// ---- 3. equations ----

const EQUATIONS: [(&str, &str); 4] = [
    ("eq:einstein", r"E = mc^2"),
    (
        "eq:std_dev",
        r"\sigma = \sqrt{\frac{1}{N-1} \sum_{i=1}^{N} (x_i - \bar{x})^2}",
    ),
    (
        "eq:equilibrium",
        r"K_{eq} = \frac{[\text{Products}]}{[\text{Reactants}]} = \frac{[\text{Ca}^{\text{2+}}][\text{SO}_4^{\text{2-}}]}{[\text{CaSO}_4]}",
    ),
    (
        "eq:navier_stokes",
        r"\frac{\partial}{\partial t} \mathbf{u} + (\mathbf{u} \cdot \nabla) \mathbf{u} = -\frac{1}{\rho} \nabla p + \nu \nabla^2 \mathbf{u}",
    ),
];

fn environments(tex: &str) -> Vec<&str> {
    let (open, close) = ("\\begin{equation}\n", "\n\\end{equation}");
    let mut found = Vec::new();
    let mut rest = tex;
    while let Some(i) = rest.find(open) {
        let inner = &rest[i + open.len()..];
        let Some(j) = inner.find(close) else { break };
        found.push(&inner[..j]);
        rest = &inner[j + close.len()..];
    }
    found
}

fn criterion_equations() -> Outcome {
    let source = fs::read_to_string(fixture().join("01_MAIN.md")).map_err(|e| e.to_string())?;
    for (label, body) in EQUATIONS {
        if !source.contains(&format!("$${body}$$ {{#{label}}}")) {
            return Err(format!("fixture lacks {label} with the reference body"));
        }
    }
    let index = LabelIndex::from_labels(EQUATIONS.map(|(l, _)| l));
    let options = ConvertOptions {
        validate_references: false,
        ..ConvertOptions::strict()
    };
    let out = convert_document(&source, &index, &Bibliography::default(), &options).map_err(|e| e.to_string())?;
    let found = environments(&out.fragment.content);
    let expected: Vec<String> = EQUATIONS.iter().map(|(l, b)| format!("{b}\n\\label{{{l}}}")).collect();
    if found != expected {
        return Err(format!("environments {found:?}"));
    }
    Ok("4 environments, labels and bodies exact".into())
}

// ---- 4. references ----

struct RefFixture {
    index: LabelIndex,
    bib: Bibliography,
    citations: Vec<rxiv_core::refs::CitationOccurrence>,
    crossrefs: Vec<rxiv_core::refs::CrossrefOccurrence>,
}

impl RefFixture {
    fn load(root: &Path) -> Result<RefFixture, String> {
        let m = Manuscript::open(root, None, true).map_err(|e| e.to_string())?;
        let docs = m.documents();
        let (index, diags) = build_label_index(&docs);
        if diags.has_errors() {
            return Err(format!("label index: {:?}", diags.into_vec()));
        }
        let (bib, diags) = read_bibtex_file(&m.layout.bibliography_bib, Mode::Strict).map_err(|e| e.to_string())?;
        if diags.has_errors() {
            return Err(format!("bibliography: {:?}", diags.into_vec()));
        }
        let mut citations = Vec::new();
        let mut crossrefs = Vec::new();
        for (_, text) in &docs {
            let (c, x) = scan_references(text);
            citations.extend(c);
            crossrefs.extend(x);
        }
        Ok(RefFixture {
            index,
            bib,
            citations,
            crossrefs,
        })
    }

    fn errors(&self, index: &LabelIndex, bib: &Bibliography) -> Vec<String> {
        let d: Diagnostics = validate_references(&self.citations, &self.crossrefs, index, bib, Mode::Strict);
        d.iter().filter(|d| d.is_error()).map(|d| d.message.clone()).collect()
    }
}

fn criterion_references() -> Outcome {
    let tmp = fixture_copy();
    let f = RefFixture::load(tmp.path())?;
    let cited: std::collections::BTreeSet<&str> = f.citations.iter().map(|c| c.key.as_str()).collect();
    if f.index.len() != 10 || f.bib.len() != 8 || cited.len() != 8 {
        return Err(format!(
            "{} labels, {} entries, {} cited keys",
            f.index.len(),
            f.bib.len(),
            cited.len()
        ));
    }
    let base = f.errors(&f.index, &f.bib);
    if !base.is_empty() {
        return Err(format!("unexpected errors {base:?}"));
    }
    let whole = pipeline::validate(tmp.path()).map_err(|e| e.to_string())?;
    if whole.has_errors() {
        return Err(format!("validate reported {:?}", whole.into_vec()));
    }
    let mut removals = 0;
    for label in f.index.labels() {
        let errs = f.errors(&f.index.without(label), &f.bib);
        if errs.len() != 1 || !errs[0].contains(&format!("`{label}`")) {
            return Err(format!("without {label}: {errs:?}"));
        }
        removals += 1;
    }
    for entry in f.bib.entries() {
        let errs = f.errors(&f.index, &f.bib.without(&entry.key));
        if errs.len() != 1 || !errs[0].contains(&format!("`{}`", entry.key)) {
            return Err(format!("without {}: {errs:?}", entry.key));
        }
        removals += 1;
    }
    Ok(format!(
        "0 errors; {removals} single removals each give exactly one error naming it"
    ))
}

// ---- 5. figure cache ----

fn criterion_cache() -> Outcome {
    let tools = tempfile::tempdir().map_err(|e| e.to_string())?;
    let counter = tools.path().join("calls");
    let generator = fake_generator(tools.path(), &counter);
    let manuscript = generator_manuscript(&generator);
    let dir = manuscript.path().to_str().unwrap();

    let (code, out, err) = rxiv(&["--manuscript-dir", dir, "figures"]);
    if code != 0 || !out.contains("3 regenerated, 0 cached, 0 failed") {
        return Err(format!("first run: exit {code}, {out:?} {err:?}"));
    }
    let first = invocations(&counter);

    let (code, out, _) = rxiv(&["--manuscript-dir", dir, "figures"]);
    let repeat = invocations(&counter) - first;
    if code != 0 || repeat != 0 || !out.contains("0 regenerated, 3 cached") {
        return Err(format!("repeat run: exit {code}, {repeat} invocations, {out:?}"));
    }

    let script = manuscript.path().join("FIGURES/plot.py");
    let mut bytes = fs::read(&script).map_err(|e| e.to_string())?;
    bytes[0] = b'#';
    fs::write(&script, bytes).map_err(|e| e.to_string())?;
    let (code, out, _) = rxiv(&["--manuscript-dir", dir, "figures"]);
    let after_edit = invocations(&counter) - first;
    if code != 0 || after_edit != 1 || !out.contains("1 regenerated, 2 cached") {
        return Err(format!("after edit: exit {code}, {after_edit} invocations, {out:?}"));
    }
    Ok(format!(
        "first run {first} invocations, repeat 0, one-byte edit 1 regeneration"
    ))
}

// ---- 6. idempotence ----

fn criterion_idempotence() -> Outcome {
    let tmp = fixture_copy();
    let dir = tmp.path().to_str().unwrap();
    let start = Instant::now();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let (code, _, err) = rxiv(&["--manuscript-dir", dir, "build", "--skip", "latex_compilation"]);
        if code != 0 {
            return Err(format!("run {run} exited {code}: {err}"));
        }
        let main = fs::read(tmp.path().join("output/01_MAIN.tex")).map_err(|e| e.to_string())?;
        let supp = fs::read(tmp.path().join("output/02_SUPPLEMENTARY.tex")).map_err(|e| e.to_string())?;
        outputs.push((main, supp));
    }
    let elapsed = start.elapsed();
    if outputs[0] != outputs[1] {
        return Err("outputs differ between runs".into());
    }
    if elapsed >= Duration::from_secs(5) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("byte-identical .tex in {elapsed:.2?}"))
}

// ---- 7. full build ----

fn criterion_full_build() -> Option<Outcome> {
    rxiv_core::exec::locate("pdflatex")?;
    let run = || -> Outcome {
        let tmp = fixture_copy();
        let dir = tmp.path().to_str().unwrap();
        let start = Instant::now();
        let (code, _, err) = rxiv(&["--manuscript-dir", dir, "build"]);
        let elapsed = start.elapsed();
        if code != 0 {
            return Err(format!("exit {code}: {err}"));
        }
        let pdf = tmp.path().join("output/01_MAIN.pdf");
        if !pdf.is_file() {
            return Err("no PDF".into());
        }
        let log = fs::read_to_string(tmp.path().join("output/01_MAIN.log")).map_err(|e| e.to_string())?;
        if log.contains("undefined") {
            return Err("engine log mentions undefined references".into());
        }
        if elapsed >= Duration::from_secs(60) {
            return Err(format!("took {elapsed:?}"));
        }
        Ok(format!("PDF written in {elapsed:.2?}"))
    };
    Some(run())
}

type Check = fn() -> Option<Outcome>;

fn main() {
    let criteria: [(&str, Check); 7] = [
        ("syntax table corpus", || Some(criterion_syntax_table())),
        ("protection round trip", || Some(criterion_protection())),
        ("numbered equations", || Some(criterion_equations())),
        ("reference resolution", || Some(criterion_references())),
        ("figure cache", || Some(criterion_cache())),
        ("build idempotence", || Some(criterion_idempotence())),
        ("full LaTeX build", criterion_full_build),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Some(Ok(detail)) => println!("PASS {} {name}: {detail}", n + 1),
            Some(Err(detail)) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", n + 1);
            }
            None => println!("SKIP {} {name}: no LaTeX engine on PATH", n + 1),
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
