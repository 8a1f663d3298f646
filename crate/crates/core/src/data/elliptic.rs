//! Loader for the Elliptic Bitcoin transaction graph.
//!
//! Expects the standard CSV triple: `elliptic_txs_features.csv` (no header;
//! tx id, time step, 165 features), `elliptic_txs_classes.csv` (header
//! `txId,class`; class `1` illicit, `2` licit, `unknown`) and
//! `elliptic_txs_edgelist.csv` (header `txId1,txId2`).

use std::collections::HashMap;
use std::path::Path;

use crate::data::{GraphDataset, LabelEncoding};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

pub const LICIT: usize = 0;
pub const ILLICIT: usize = 1;

fn reader(path: &Path, has_headers: bool) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .from_path(path)
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })
}

fn records(
    path: &Path,
    has_headers: bool,
) -> Result<impl Iterator<Item = (usize, Result<csv::StringRecord>)>> {
    let owned = path.to_path_buf();
    // data lines are numbered from 1, after the header if present
    let first = if has_headers { 2 } else { 1 };
    Ok(reader(path, has_headers)?
        .into_records()
        .enumerate()
        .map(move |(i, r)| {
            (
                i + first,
                r.map_err(|source| Error::Csv {
                    path: owned.clone(),
                    source,
                }),
            )
        }))
}

/// Loads the Elliptic dataset. The time step is kept both as
/// [`GraphDataset::time_step`] and as the first feature column, giving 166
/// features per node.
pub fn load_elliptic(features_csv: &Path, classes_csv: &Path, edgelist_csv: &Path) -> Result<GraphDataset> {
    let parse_err = |path: &Path, line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut node_ids = Vec::new();
    let mut index = HashMap::new();
    let mut time_step = Vec::new();
    let mut features = Vec::new();
    let mut d = None;
    for (line, rec) in records(features_csv, false)? {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(parse_err(features_csv, line, "expected tx id and time step".into()));
        }
        let width = rec.len() - 1;
        if *d.get_or_insert(width) != width {
            return Err(parse_err(features_csv, line, format!("{width} features, expected {}", d.unwrap())));
        }
        let id = rec[0].trim().to_string();
        let t: u32 = rec[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(features_csv, line, format!("bad time step `{}`", &rec[1])))?;
        for field in rec.iter().skip(1) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(features_csv, line, format!("bad feature `{field}`")))?;
            features.push(v);
        }
        if index.insert(id.clone(), node_ids.len()).is_some() {
            return Err(Error::DuplicateNode {
                path: features_csv.to_path_buf(),
                id,
            });
        }
        node_ids.push(id);
        time_step.push(t);
    }
    let n = node_ids.len();

    let mut labels = vec![None; n];
    let mut seen = vec![false; n];
    let mut class_rows = 0;
    for (line, rec) in records(classes_csv, true)? {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(parse_err(classes_csv, line, "expected `txId,class`".into()));
        }
        let id = rec[0].trim();
        let &i = index
            .get(id)
            .ok_or_else(|| parse_err(classes_csv, line, format!("unknown tx id `{id}`")))?;
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::DuplicateNode {
                path: classes_csv.to_path_buf(),
                id: id.to_string(),
            });
        }
        labels[i] = match rec[1].trim() {
            "1" => Some(ILLICIT),
            "2" => Some(LICIT),
            "unknown" => None,
            other => return Err(parse_err(classes_csv, line, format!("unknown class `{other}`"))),
        };
        class_rows += 1;
    }
    if class_rows != n {
        return Err(parse_err(
            classes_csv,
            class_rows + 1,
            format!("{class_rows} class rows for {n} feature rows"),
        ));
    }

    let mut edges = Vec::new();
    for (line, rec) in records(edgelist_csv, true)? {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(parse_err(edgelist_csv, line, "expected `txId1,txId2`".into()));
        }
        let lookup = |id: &str| {
            index
                .get(id.trim())
                .copied()
                .ok_or_else(|| parse_err(edgelist_csv, line, format!("unknown tx id `{id}`")))
        };
        edges.push((lookup(&rec[0])?, lookup(&rec[1])?));
    }

    GraphDataset {
        name: "elliptic".into(),
        node_ids,
        features: DenseMatrix::from_vec(n, d.unwrap_or(0), features)?,
        labels,
        class_names: vec!["licit".into(), "illicit".into()],
        edges,
        time_step: Some(time_step),
        label_encoding: LabelEncoding::ScalarMap(vec![-1.0, 1.0]),
        positive_class: Some(ILLICIT),
    }
    .validated()
}
