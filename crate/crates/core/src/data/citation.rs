//! Loader for the `.content` / `.cites` layout used by CORA, CiteSeer and
//! (after conversion) PubMed.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::data::{GraphDataset, LabelEncoding};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CitationLoad {
    pub dataset: GraphDataset,
    /// Citation lines naming a node absent from the content file.
    pub dropped_edges: usize,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Reads a citation graph.
///
/// Content lines are `node_id <tab> f_1 .. f_d <tab> class_name`; cites
/// lines are `cited <tab> citing`. Nodes keep file order, classes are
/// numbered in lexicographic order of their names.
pub fn load_citation(content_path: &Path, cites_path: &Path) -> Result<CitationLoad> {
    let content = read(content_path)?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: content_path.to_path_buf(),
        line,
        message,
    };

    let mut node_ids = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut raw_classes = Vec::new();
    let mut features = Vec::new();
    let mut d: Option<usize> = None;
    for (lineno, line) in content.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 2 {
            return Err(parse_err(lineno, "expected `id features... class`".into()));
        }
        let width = fields.len() - 2;
        match d {
            None => d = Some(width),
            Some(d) if d != width => {
                return Err(parse_err(lineno, format!("{width} features, expected {d}")));
            }
            _ => {}
        }
        for f in &fields[1..fields.len() - 1] {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad feature value `{f}`")))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, format!("non-finite feature `{f}`")));
            }
            features.push(v);
        }
        let id = fields[0].to_string();
        if index.insert(id.clone(), node_ids.len()).is_some() {
            return Err(Error::DuplicateNode {
                path: content_path.to_path_buf(),
                id,
            });
        }
        node_ids.push(id);
        raw_classes.push(fields[fields.len() - 1].to_string());
    }

    let class_names: Vec<String> = raw_classes
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let labels = raw_classes
        .iter()
        .map(|c| Some(class_names.binary_search(c).expect("class collected above")))
        .collect();

    let cites = read(cites_path)?;
    let mut edges = Vec::new();
    let mut dropped_edges = 0;
    for (lineno, line) in cites.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                path: cites_path.to_path_buf(),
                line: lineno,
                message: "expected `cited citing`".into(),
            });
        }
        match (index.get(fields[0]), index.get(fields[1])) {
            (Some(&a), Some(&b)) => edges.push((a, b)),
            _ => dropped_edges += 1,
        }
    }

    let n = node_ids.len();
    let name = content_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let dataset = GraphDataset {
        name,
        node_ids,
        features: DenseMatrix::from_vec(n, d.unwrap_or(0), features)?,
        labels,
        class_names,
        edges,
        time_step: None,
        label_encoding: LabelEncoding::OneHot,
        positive_class: None,
    }
    .validated()?;
    Ok(CitationLoad {
        dataset,
        dropped_edges,
    })
}
