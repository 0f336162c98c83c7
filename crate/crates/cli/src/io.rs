//! File formats: dataset CSV, draws CSV, key-value summaries and atomic writes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use bayes_cox::sampler::ChainDraws;
use bayes_cox::{Dataset, PosteriorDraws, SurvivalRecord};

use crate::error::{input, io_error, CliError, CliResult};

/// Writes `bytes` to a temporary sibling of `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| input(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| io_error(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_error(path, e)
    })
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn parse_f64(field: &str, what: &str, line: usize) -> CliResult<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| input(format!("line {line}: {what} '{field}' is not a number")))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    if e.is_io_error() {
        io_error(path, e)
    } else {
        input(format!("{}: {e}", path.display()))
    }
}

/// Serialises a dataset as `time,status,<covariates...>`.
pub fn dataset_to_csv(data: &Dataset) -> String {
    let mut out = String::from("time,status");
    for name in data.covariate_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for r in data.records() {
        out.push_str(&format!("{},{}", r.time, u8::from(r.event)));
        for x in &r.covariates {
            out.push_str(&format!(",{x}"));
        }
        out.push('\n');
    }
    out
}

pub fn parse_dataset(text: &str, origin: &Path) -> CliResult<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| csv_error(origin, e))?.clone();
    if header.len() < 2 || &header[0] != "time" || &header[1] != "status" {
        return Err(input(format!(
            "{}: header must start with time,status",
            origin.display()
        )));
    }
    let names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_error(origin, e))?;
        let line = i + 2;
        if row.iter().any(|f| f.is_empty()) {
            return Err(input(format!("{}: line {line}: missing value", origin.display())));
        }
        let time = parse_f64(&row[0], "time", line)?;
        let event = match &row[1] {
            "1" => true,
            "0" => false,
            s => return Err(input(format!("line {line}: status must be 0 or 1, got '{s}'"))),
        };
        let covariates = row
            .iter()
            .skip(2)
            .map(|f| parse_f64(f, "covariate", line))
            .collect::<CliResult<Vec<_>>>()?;
        records.push(SurvivalRecord::new(time, event, covariates));
    }
    Dataset::new(records, names).map_err(|e| input(format!("{}: {e}", origin.display())))
}

pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    parse_dataset(&read_text(path)?, path)
}

/// `chain,iteration,<parameters...>,loglik` with 1-based chain numbers.
pub fn draws_to_csv(draws: &PosteriorDraws) -> String {
    let mut out = String::from("chain,iteration");
    for name in draws.names() {
        out.push(',');
        out.push_str(name);
    }
    out.push_str(",loglik\n");
    for (c, chain) in draws.chains().iter().enumerate() {
        for r in 0..chain.loglik.len() {
            out.push_str(&format!("{},{}", c + 1, chain.iteration[r]));
            for v in draws.row(c, r) {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{}\n", chain.loglik[r]));
        }
    }
    out
}

/// Rows of a draws file grouped by chain, as `ChainDraws` without
/// pointwise contributions or acceptance rates.
pub fn parse_draws(text: &str, expected_names: &[String], origin: &Path) -> CliResult<Vec<ChainDraws>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| csv_error(origin, e))?.clone();
    let mut expected = vec!["chain".to_string(), "iteration".to_string()];
    expected.extend(expected_names.iter().cloned());
    expected.push("loglik".into());
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(input(format!(
            "{}: header does not match the summary's parameters ({})",
            origin.display(),
            expected.join(",")
        )));
    }
    let p = expected_names.len();
    let mut chains: Vec<ChainDraws> = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_error(origin, e))?;
        let line = i + 2;
        let chain: usize = row[0]
            .parse()
            .ok()
            .filter(|&c| c >= 1)
            .ok_or_else(|| input(format!("line {line}: bad chain number '{}'", &row[0])))?;
        let iteration: usize = row[1]
            .parse()
            .map_err(|_| input(format!("line {line}: bad iteration '{}'", &row[1])))?;
        if chain > chains.len() + 1 {
            return Err(input(format!("line {line}: chains must appear in order")));
        }
        if chain == chains.len() + 1 {
            chains.push(ChainDraws {
                values: Vec::new(),
                iteration: Vec::new(),
                loglik: Vec::new(),
                pointwise: Vec::new(),
                acceptance: vec![f64::NAN; p],
            });
        }
        let target = &mut chains[chain - 1];
        for j in 0..p {
            target.values.push(parse_f64(&row[2 + j], "draw", line)?);
        }
        target.iteration.push(iteration);
        target.loglik.push(parse_f64(&row[2 + p], "loglik", line)?);
    }
    if chains.is_empty() {
        return Err(input(format!("{}: no draws", origin.display())));
    }
    Ok(chains)
}

/// Flat `key = value` file. Lines starting with `#` and blank lines are skipped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    pub path: PathBuf,
    pub entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str, path: &Path) -> CliResult<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| input(format!("{}: line {}: expected key = value", path.display(), i + 1)))?;
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        Self::parse(&read_text(path)?, path)
    }

    pub fn get(&self, key: &str) -> CliResult<&str> {
        self.entries
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| input(format!("{}: missing key '{key}'", self.path.display())))
    }

    pub fn number(&self, key: &str) -> CliResult<f64> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| input(format!("{}: '{key}' is not a number: {v}", self.path.display())))
    }
}

/// Accumulates `key = value` lines in insertion order.
#[derive(Debug, Default)]
pub struct KeyValueWriter {
    out: String,
}

impl KeyValueWriter {
    pub fn put(&mut self, key: &str, value: impl std::fmt::Display) {
        self.out.push_str(&format!("{key} = {value}\n"));
    }

    pub fn finish(self) -> String {
        self.out
    }
}

/// Comma-joined Display of floats.
pub fn join_floats(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub fn parse_floats(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| input(format!("'{s}' is not a number")))
        })
        .collect()
}

/// Writes NaN and infinities as `NA`.
pub fn finite_or_na(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        "NA".into()
    }
}
