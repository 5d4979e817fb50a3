//! Config files, input tables and output artifacts.

use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use geosink::{Distribution, PointCloud};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Reads a JSON config, or the defaults when no file is given. Unknown keys
/// are rejected by the config types themselves.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path.display(), e))
}

pub fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> CliResult<&'a Path> {
    path.as_deref().ok_or_else(|| CliError::Validation(format!("{what} is required")))
}

pub fn read_points(path: &Path) -> CliResult<PointCloud> {
    Ok(PointCloud::read_csv(open(path)?)?)
}

fn records(path: &Path) -> CliResult<Vec<csv::StringRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(open(path)?);
    let mut out = Vec::new();
    for (line, r) in rdr.records().enumerate() {
        let r = r.map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        if r.iter().all(str::is_empty) {
            continue;
        }
        // A non-numeric first line is a header.
        if line == 0 && r.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        out.push(r);
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(path: &Path, field: Option<&str>, line: usize) -> CliResult<T> {
    let f = field.unwrap_or("");
    f.parse().map_err(|_| CliError::Validation(format!("{}: row {}: bad value {f:?}", path.display(), line + 1)))
}

/// One integer label per row (first column).
pub fn read_labels(path: &Path) -> CliResult<Vec<usize>> {
    records(path)?.iter().enumerate().map(|(i, r)| parse(path, r.get(0), i)).collect()
}

/// `vertex_index,weight` rows; vertices not listed get zero weight.
pub fn read_weights(path: &Path, n: usize) -> CliResult<Distribution> {
    let mut w = vec![0.0; n];
    for (i, r) in records(path)?.iter().enumerate() {
        let v: usize = parse(path, r.get(0), i)?;
        let x: f64 = parse(path, r.get(1), i)?;
        if v >= n {
            return Err(CliError::Validation(format!("{}: vertex {v} out of range for {n} points", path.display())));
        }
        w[v] += x;
    }
    Ok(Distribution::normalize(w)?)
}

/// How a distribution over the graph vertices is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    /// Weight file in `vertex_index,weight` form.
    Weights(PathBuf),
    /// Normalized indicator of the points carrying this label.
    Label(usize),
}

impl DistSpec {
    pub fn resolve(&self, n: usize, labels: Option<&[usize]>) -> CliResult<Distribution> {
        match self {
            DistSpec::Weights(p) => read_weights(p, n),
            DistSpec::Label(c) => {
                let labels = labels.ok_or_else(|| CliError::Validation("a labels file is required for label distributions".into()))?;
                if labels.len() != n {
                    return Err(CliError::Validation(format!("{} labels for {n} points", labels.len())));
                }
                let support: Vec<usize> = (0..n).filter(|&i| labels[i] == *c).collect();
                if support.is_empty() {
                    return Err(CliError::Validation(format!("no point carries label {c}")));
                }
                Ok(Distribution::indicator(n, &support)?)
            }
        }
    }
}

/// Writes artifacts into one output directory.
pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> CliResult<Self> {
        fs::create_dir_all(path).map_err(|e| CliError::io(path.display(), e))?;
        Ok(Self(path.to_path_buf()))
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.0.join(name);
        let mut f = File::create(&path).map_err(|e| CliError::io(path.display(), e))?;
        f.write_all(bytes).map_err(|e| CliError::io(path.display(), e))?;
        Ok(path)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}

/// A JSON artifact: the effective config followed by the results.
#[derive(Serialize)]
pub struct Artifact<'a, C: Serialize, R: Serialize> {
    pub config: &'a C,
    #[serde(flatten)]
    pub result: R,
}

/// Square matrix as CSV with a header row of labels.
pub fn matrix_csv(labels: &[String], rows: &[Vec<f64>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(labels).expect("in-memory write");
    for r in rows {
        w.write_record(r.iter().map(|x| format!("{x:?}"))).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}
