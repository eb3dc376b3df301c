//! On-disk dataset layout.
//!
//! A dataset directory holds two text files:
//!
//! * `manifest.txt`: one `key = value` pair per line. Keys are `format`
//!   (always `islanding-dataset`), `version`, `seed`, `window_len`,
//!   `sample_rate_hz`, `channels` (comma separated, in column order),
//!   `total`, `islanding`, `non_islanding`, `grid`, and the split index lists
//!   `train`, `validation`, `test` (comma separated row numbers).
//! * `windows.csv`: a header row, then one row per window with `T * 6`
//!   values in time-major order (`t0_V1_mag, t0_V2_mag, ..., t9_dV2_mag`)
//!   followed by `label` (1 = islanding). Values are written in shortest
//!   round-trip exponent form, so reading back is lossless.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::dataset::{Dataset, DatasetMetadata, Split};
use super::features::{FeatureWindow, CHANNEL_NAMES};
use super::scenario::Label;
use super::N_FEATURES;
use crate::error::{Error, Result};

pub const FORMAT_NAME: &str = "islanding-dataset";
pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const WINDOWS_FILE: &str = "windows.csv";

fn join_indices(indices: &[usize]) -> String {
    indices.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

fn csv_header(window_len: usize) -> String {
    let mut cols = Vec::with_capacity(window_len * N_FEATURES + 1);
    for t in 0..window_len {
        for name in CHANNEL_NAMES {
            cols.push(format!("t{t}_{name}"));
        }
    }
    cols.push("label".into());
    cols.join(",")
}

pub fn manifest_text(dataset: &Dataset) -> String {
    let m = &dataset.metadata;
    let lines = [
        ("format", FORMAT_NAME.to_string()),
        ("version", FORMAT_VERSION.to_string()),
        ("seed", m.seed.to_string()),
        ("window_len", m.window_len.to_string()),
        ("sample_rate_hz", m.sample_rate.to_string()),
        ("channels", CHANNEL_NAMES.join(",")),
        ("total", dataset.len().to_string()),
        ("islanding", m.islanding.to_string()),
        ("non_islanding", m.non_islanding.to_string()),
        ("grid", m.grid.clone()),
        ("train", join_indices(&dataset.split.train)),
        ("validation", join_indices(&dataset.split.validation)),
        ("test", join_indices(&dataset.split.test)),
    ];
    lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

pub fn windows_csv(dataset: &Dataset) -> String {
    let mut out = csv_header(dataset.window_len());
    out.push('\n');
    for w in &dataset.windows {
        for v in w.values() {
            out.push_str(&format!("{v:e},"));
        }
        out.push_str(&w.label.as_u8().to_string());
        out.push('\n');
    }
    out
}

/// Writes `manifest.txt` and `windows.csv` into `dir`, creating it if needed.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(MANIFEST_FILE), manifest_text(dataset))?;
    fs::write(dir.join(WINDOWS_FILE), windows_csv(dataset))?;
    Ok(())
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    Ok(fs::read_to_string(path)?)
}

fn parse_manifest(path: &Path, text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format_err(path, format!("line {}: expected `key = value`", n + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn field<'a>(path: &Path, map: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    map.get(key)
        .map(String::as_str)
        .ok_or_else(|| format_err(path, format!("missing key `{key}`")))
}

fn parse_field<T: std::str::FromStr>(path: &Path, map: &BTreeMap<String, String>, key: &str) -> Result<T> {
    field(path, map, key)?
        .parse()
        .map_err(|_| format_err(path, format!("bad value for `{key}`")))
}

fn parse_indices(path: &Path, map: &BTreeMap<String, String>, key: &str) -> Result<Vec<usize>> {
    let raw = field(path, map, key)?;
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| format_err(path, format!("bad index `{s}` in `{key}`")))
        })
        .collect()
}

/// Reads a dataset written by [`write_dataset`].
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let csv_path = dir.join(WINDOWS_FILE);
    let map = parse_manifest(&manifest_path, &read_text(&manifest_path)?)?;
    if field(&manifest_path, &map, "format")? != FORMAT_NAME {
        return Err(format_err(&manifest_path, "not an islanding dataset manifest"));
    }
    let version: u32 = parse_field(&manifest_path, &map, "version")?;
    if version != FORMAT_VERSION {
        return Err(format_err(&manifest_path, format!("unsupported version {version}")));
    }
    if field(&manifest_path, &map, "channels")? != CHANNEL_NAMES.join(",") {
        return Err(format_err(&manifest_path, "unexpected channel order"));
    }
    let window_len: usize = parse_field(&manifest_path, &map, "window_len")?;
    let metadata = DatasetMetadata {
        seed: parse_field(&manifest_path, &map, "seed")?,
        grid: field(&manifest_path, &map, "grid")?.to_string(),
        islanding: parse_field(&manifest_path, &map, "islanding")?,
        non_islanding: parse_field(&manifest_path, &map, "non_islanding")?,
        window_len,
        sample_rate: parse_field(&manifest_path, &map, "sample_rate_hz")?,
    };
    let total: usize = parse_field(&manifest_path, &map, "total")?;
    let split = Split {
        train: parse_indices(&manifest_path, &map, "train")?,
        validation: parse_indices(&manifest_path, &map, "validation")?,
        test: parse_indices(&manifest_path, &map, "test")?,
    };

    let text = read_text(&csv_path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| format_err(&csv_path, "empty file"))?;
    if header != csv_header(window_len) {
        return Err(format_err(
            &csv_path,
            "header does not match the manifest window length",
        ));
    }
    let width = window_len * N_FEATURES;
    let mut windows = Vec::with_capacity(total);
    for (n, line) in lines.enumerate() {
        let row = n + 2;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != width + 1 {
            return Err(format_err(
                &csv_path,
                format!("row {row}: expected {} columns, got {}", width + 1, cells.len()),
            ));
        }
        let values = cells[..width]
            .iter()
            .map(|c| c.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| format_err(&csv_path, format!("row {row}: {e}")))?;
        let label = cells[width]
            .parse::<u8>()
            .map_err(|e| format_err(&csv_path, format!("row {row}: {e}")))
            .and_then(Label::from_u8)?;
        windows.push(FeatureWindow::new(values, window_len, label)?);
    }
    if windows.len() != total {
        return Err(format_err(
            &csv_path,
            format!("manifest lists {total} windows, file holds {}", windows.len()),
        ));
    }
    Dataset::from_parts(windows, split, metadata)
}
