//! CSV batch runs over text rows and image lists.
//!
//! Every input row produces exactly one output row, in input order. A row that
//! fails to analyze gets empty score cells, its message in the `error` column
//! and an entry in [`BatchResult::failure_rows`]; the run itself continues.

use std::io::Read;
use std::path::{Path, PathBuf};

use fairsense_core::image::{ImageInput, MediaType};
use fairsense_core::{BiasFinding, BiasReport, Engine, Error, Result};
use rayon::prelude::*;
use serde::Serialize;

pub const TEXT_COLUMNS: [&str; 7] = [
    "id",
    "text_score",
    "bias_score",
    "band",
    "finding_count",
    "findings",
    "error",
];

pub const IMAGE_COLUMNS: [&str; 9] = [
    "id",
    "image_score",
    "context_score",
    "bias_score",
    "band",
    "caption",
    "finding_count",
    "findings",
    "error",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FailureRow {
    /// 1-based data row (the header is not counted).
    pub row: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BatchResult {
    pub input_count: usize,
    pub success_count: usize,
    pub failure_rows: Vec<FailureRow>,
    pub output_path: PathBuf,
}

/// Counts plus the rendered output table.
#[derive(Debug, Clone)]
pub struct BatchOutput {
    pub input_count: usize,
    pub success_count: usize,
    pub failure_rows: Vec<FailureRow>,
    pub csv: Vec<u8>,
}

impl BatchOutput {
    fn write_to(self, path: &Path) -> Result<BatchResult> {
        std::fs::write(path, &self.csv).map_err(|e| Error::io(path, e))?;
        Ok(BatchResult {
            input_count: self.input_count,
            success_count: self.success_count,
            failure_rows: self.failure_rows,
            output_path: path.to_path_buf(),
        })
    }
}

#[derive(Serialize)]
struct CompactFinding<'a> {
    id: &'a str,
    modality: &'a str,
    category: &'a str,
    severity: f64,
    start: usize,
    end: usize,
}

/// JSON array of `{id, modality, category, severity, start, end}`.
pub fn compact_findings(findings: &[BiasFinding]) -> String {
    let compact: Vec<CompactFinding> = findings
        .iter()
        .map(|f| CompactFinding {
            id: &f.id,
            modality: f.modality.as_str(),
            category: &f.category,
            severity: f.severity,
            start: f.span.start,
            end: f.span.end,
        })
        .collect();
    serde_json::to_string(&compact).expect("findings serialize")
}

fn score(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Configuration(format!("cannot start batch workers: {e}")))
}

struct TextRow {
    id: String,
    text: std::result::Result<String, String>,
}

fn read_text_rows(input: impl Read) -> Result<Vec<TextRow>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = reader
        .byte_headers()
        .map_err(|e| Error::Schema(format!("cannot read CSV header: {e}")))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name.as_bytes()));
    let text_col = find("text").ok_or_else(|| Error::Schema("input CSV has no `text` column".into()))?;
    let id_col = find("id");

    let mut rows = Vec::new();
    for (n, record) in reader.byte_records().enumerate() {
        let row = n + 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                rows.push(TextRow {
                    id: format!("row-{row}"),
                    text: Err(format!("malformed CSV record: {e}")),
                });
                continue;
            }
        };
        let id = id_col
            .and_then(|c| record.get(c))
            .map(|b| String::from_utf8_lossy(b).into_owned())
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| format!("row-{row}"));
        let text = match record.get(text_col) {
            None => Err("row has no text cell".to_string()),
            Some(bytes) => String::from_utf8(bytes.to_vec())
                .map_err(|e| format!("text is not valid UTF-8 (byte {})", e.utf8_error().valid_up_to())),
        };
        rows.push(TextRow { id, text });
    }
    Ok(rows)
}

fn finish(
    header: &[&str],
    rows: Vec<std::result::Result<Vec<String>, (Vec<String>, String)>>,
) -> BatchOutput {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    let input_count = rows.len();
    let mut failure_rows = Vec::new();
    for (n, row) in rows.into_iter().enumerate() {
        let cells = match row {
            Ok(cells) => cells,
            Err((cells, error)) => {
                failure_rows.push(FailureRow { row: n + 1, error });
                cells
            }
        };
        w.write_record(&cells).expect("in-memory write");
    }
    BatchOutput {
        input_count,
        success_count: input_count - failure_rows.len(),
        failure_rows,
        csv: w.into_inner().expect("in-memory flush"),
    }
}

fn text_cells(id: &str, report: &BiasReport) -> Vec<String> {
    vec![
        id.to_string(),
        score(report.components.text_score),
        score(Some(report.score.value)),
        report.score.band.to_string(),
        report.findings.len().to_string(),
        compact_findings(&report.findings),
        String::new(),
    ]
}

fn failed_cells(id: &str, width: usize, error: &str) -> Vec<String> {
    let mut cells = vec![String::new(); width];
    cells[0] = id.to_string();
    cells[width - 1] = error.to_string();
    cells
}

/// Analyze every row of a CSV with a `text` column (and optional `id`).
pub fn analyze_text_csv(input: impl Read, engine: &Engine, workers: usize) -> Result<BatchOutput> {
    let rows = read_text_rows(input)?;
    let results = pool(workers)?.install(|| {
        rows.par_iter()
            .map(|row| {
                let outcome = row.text.clone().and_then(|text| {
                    engine
                        .analyze_text(Some(&row.id), &text)
                        .map_err(|e| e.to_string())
                });
                match outcome {
                    Ok(report) => Ok(text_cells(&row.id, &report)),
                    Err(e) => Err((failed_cells(&row.id, TEXT_COLUMNS.len(), &e), e)),
                }
            })
            .collect::<Vec<_>>()
    });
    Ok(finish(&TEXT_COLUMNS, results))
}

pub fn batch_analyze_text(
    input_csv: &Path,
    output_csv: &Path,
    engine: &Engine,
    workers: usize,
) -> Result<BatchResult> {
    let file = std::fs::File::open(input_csv).map_err(|e| Error::io(input_csv, e))?;
    analyze_text_csv(std::io::BufReader::new(file), engine, workers)?.write_to(output_csv)
}

fn image_cells(id: &str, report: &BiasReport) -> Vec<String> {
    let caption = report
        .surrogates
        .as_ref()
        .map(|s| s.caption.clone())
        .unwrap_or_default();
    vec![
        id.to_string(),
        score(report.components.image_score),
        score(report.components.context_score),
        score(Some(report.score.value)),
        report.score.band.to_string(),
        caption,
        report.findings.len().to_string(),
        compact_findings(&report.findings),
        String::new(),
    ]
}

fn load_image(path: &Path, id: &str) -> Result<ImageInput> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let media_type = MediaType::from_path(path).or_else(|_| MediaType::sniff(&bytes))?;
    Ok(ImageInput::new(id, bytes, media_type))
}

/// Analyze each image named in `list_file` (one path per line; blank lines
/// and `#` comments are skipped; relative paths are taken from the list
/// file's directory). The `id` column holds the path as written.
pub fn batch_analyze_images(
    list_file: &Path,
    output_csv: &Path,
    engine: &Engine,
    workers: usize,
) -> Result<BatchResult> {
    let listing = std::fs::read_to_string(list_file).map_err(|e| Error::io(list_file, e))?;
    let base = list_file.parent().unwrap_or(Path::new("."));
    let entries: Vec<&str> = listing
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    let results = pool(workers)?.install(|| {
        entries
            .par_iter()
            .map(|&entry| {
                let path = base.join(entry);
                let outcome = load_image(&path, entry).and_then(|img| engine.analyze_image(&img));
                match outcome {
                    Ok(report) => Ok(image_cells(entry, &report)),
                    Err(e) => {
                        let msg = e.to_string();
                        Err((failed_cells(entry, IMAGE_COLUMNS.len(), &msg), msg))
                    }
                }
            })
            .collect::<Vec<_>>()
    });
    finish(&IMAGE_COLUMNS, results).write_to(output_csv)
}
