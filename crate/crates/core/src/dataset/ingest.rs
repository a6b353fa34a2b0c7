//! CSV / JSONL ingestion with a rejects report.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{create_writer, InteractionRecord};
use crate::error::{Error, Result};
use crate::simplex::ClusterSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    Csv,
    Jsonl,
}

/// Maps column/field names onto record fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemaConfig {
    pub user: String,
    pub item: String,
    pub timestamp: String,
    pub clusters: String,
    /// Missing means every record weighs 1.0.
    pub weight: Option<String>,
    pub title: Option<String>,
    /// Column names for header-less CSV; `None` reads the header row.
    pub columns: Option<Vec<String>>,
    pub cluster_separator: char,
    pub delimiter: char,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        Self {
            user: "user_id".into(),
            item: "item_id".into(),
            timestamp: "timestamp".into(),
            clusters: "clusters".into(),
            weight: Some("weight".into()),
            title: Some("title".into()),
            columns: None,
            cluster_separator: '|',
            delimiter: ',',
        }
    }
}

/// A row that failed validation. Rows are numbered from 1, header excluded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    /// Sorted by (user_id, timestamp).
    pub records: Vec<InteractionRecord>,
    pub rejects: Vec<Reject>,
}

pub fn ingest(
    path: impl AsRef<Path>,
    format: InputFormat,
    schema: &SchemaConfig,
    space: &ClusterSpace,
) -> Result<Ingested> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::UnreadableFile {
        path: path.to_path_buf(),
        source,
    })?;
    let (mut records, rejects) = match format {
        InputFormat::Csv => read_csv(file, schema, space)?,
        InputFormat::Jsonl => read_jsonl(file, schema, space)?,
    };
    if records.is_empty() {
        return Err(Error::EmptyAfterFiltering);
    }
    records.sort_by(|a, b| {
        a.user_id
            .cmp(&b.user_id)
            .then(a.timestamp.cmp(&b.timestamp))
    });
    Ok(Ingested { records, rejects })
}

fn resolve_clusters<'a>(
    names: impl Iterator<Item = &'a str>,
    space: &ClusterSpace,
) -> std::result::Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for name in names.map(str::trim).filter(|n| !n.is_empty()) {
        let i = space
            .index_of(name)
            .ok_or_else(|| format!("unknown cluster {name:?}"))?;
        if !out.contains(&i) {
            out.push(i);
        }
    }
    if out.is_empty() {
        return Err("no clusters".into());
    }
    Ok(out)
}

fn parse_timestamp(s: &str) -> std::result::Result<i64, String> {
    let t: i64 = s
        .trim()
        .parse()
        .map_err(|_| format!("bad timestamp {s:?}"))?;
    if t < 0 {
        return Err(format!("negative timestamp {t}"));
    }
    Ok(t)
}

fn parse_weight(s: &str) -> std::result::Result<f64, String> {
    let w: f64 = s.trim().parse().map_err(|_| format!("bad weight {s:?}"))?;
    if !(w.is_finite() && w >= 0.0) {
        return Err(format!("weight {w} must be finite and >= 0"));
    }
    Ok(w)
}

type Parsed = (Vec<InteractionRecord>, Vec<Reject>);

fn read_csv(file: std::fs::File, schema: &SchemaConfig, space: &ClusterSpace) -> Result<Parsed> {
    if !schema.delimiter.is_ascii() {
        return Err(Error::SchemaMismatch("CSV delimiter must be ASCII".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.columns.is_none())
        .delimiter(schema.delimiter as u8)
        .flexible(true)
        .from_reader(file);
    let header: Vec<String> = match &schema.columns {
        Some(cols) => cols.clone(),
        None => reader
            .headers()?
            .iter()
            .map(|h| h.trim().to_string())
            .collect(),
    };
    if header.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let col = |name: &str| header.iter().position(|h| h == name);
    let require = |name: &str| {
        col(name).ok_or_else(|| Error::SchemaMismatch(format!("missing column {name:?}")))
    };
    let user_c = require(&schema.user)?;
    let item_c = require(&schema.item)?;
    let ts_c = require(&schema.timestamp)?;
    let cl_c = require(&schema.clusters)?;
    let weight_c = schema.weight.as_deref().and_then(col);
    let title_c = schema.title.as_deref().and_then(col);

    let mut records = Vec::new();
    let mut rejects = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                rejects.push(Reject {
                    row: row_no,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if row.len() != header.len() {
            rejects.push(Reject {
                row: row_no,
                reason: format!("expected {} fields, got {}", header.len(), row.len()),
            });
            continue;
        }
        let parsed = (|| {
            Ok::<_, String>(InteractionRecord {
                user_id: row[user_c].trim().to_string(),
                item_id: row[item_c].trim().to_string(),
                timestamp: parse_timestamp(&row[ts_c])?,
                clusters: resolve_clusters(row[cl_c].split(schema.cluster_separator), space)?,
                weight: match weight_c {
                    Some(c) => parse_weight(&row[c])?,
                    None => 1.0,
                },
                title: title_c
                    .map(|c| row[c].trim().to_string())
                    .filter(|t| !t.is_empty()),
            })
        })();
        match parsed {
            Ok(r) if r.user_id.is_empty() => rejects.push(Reject {
                row: row_no,
                reason: "empty user id".into(),
            }),
            Ok(r) => records.push(r),
            Err(reason) => rejects.push(Reject {
                row: row_no,
                reason,
            }),
        }
    }
    Ok((records, rejects))
}

fn value_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn json_record(
    obj: &serde_json::Map<String, Value>,
    schema: &SchemaConfig,
    space: &ClusterSpace,
) -> std::result::Result<InteractionRecord, String> {
    let field = |name: &str| {
        obj.get(name)
            .ok_or_else(|| format!("missing field {name:?}"))
    };
    let user_id = value_string(field(&schema.user)?).ok_or("user id must be a string")?;
    let item_id = value_string(field(&schema.item)?).ok_or("item id must be a string")?;
    let timestamp = match field(&schema.timestamp)? {
        Value::Number(n) => n
            .as_i64()
            .filter(|t| *t >= 0)
            .ok_or_else(|| format!("bad timestamp {n}"))?,
        Value::String(s) => parse_timestamp(s)?,
        other => return Err(format!("bad timestamp {other}")),
    };
    let clusters = match field(&schema.clusters)? {
        Value::String(s) => resolve_clusters(s.split(schema.cluster_separator), space)?,
        Value::Array(items) => {
            let mut idx = Vec::new();
            for item in items {
                let i = match item {
                    Value::String(s) => space
                        .index_of(s)
                        .ok_or_else(|| format!("unknown cluster {s:?}"))?,
                    Value::Number(n) => {
                        let i =
                            n.as_u64().ok_or_else(|| format!("bad cluster index {n}"))? as usize;
                        space.check_index(i).map_err(|e| e.to_string())?;
                        i
                    }
                    other => return Err(format!("bad cluster {other}")),
                };
                if !idx.contains(&i) {
                    idx.push(i);
                }
            }
            if idx.is_empty() {
                return Err("no clusters".into());
            }
            idx
        }
        other => return Err(format!("bad clusters {other}")),
    };
    let weight = match schema.weight.as_deref().and_then(|w| obj.get(w)) {
        None | Some(Value::Null) => 1.0,
        Some(Value::Number(n)) => parse_weight(&n.to_string())?,
        Some(Value::String(s)) => parse_weight(s)?,
        Some(other) => return Err(format!("bad weight {other}")),
    };
    let title = schema
        .title
        .as_deref()
        .and_then(|t| obj.get(t))
        .and_then(value_string);
    if user_id.is_empty() {
        return Err("empty user id".into());
    }
    Ok(InteractionRecord {
        user_id,
        item_id,
        timestamp,
        clusters,
        weight,
        title,
    })
}

fn read_jsonl(file: std::fs::File, schema: &SchemaConfig, space: &ClusterSpace) -> Result<Parsed> {
    let mut records = Vec::new();
    let mut rejects = Vec::new();
    let mut row_no = 0;
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        row_no += 1;
        let parsed = serde_json::from_str::<Value>(&line)
            .map_err(|e| e.to_string())
            .and_then(|v| match v {
                Value::Object(obj) => json_record(&obj, schema, space),
                _ => Err("line is not a JSON object".into()),
            });
        match parsed {
            Ok(r) => records.push(r),
            Err(reason) => rejects.push(Reject {
                row: row_no,
                reason,
            }),
        }
    }
    Ok((records, rejects))
}

/// Writes records as JSONL with cluster names, readable by [`ingest`] with
/// the default schema.
pub fn write_corpus_jsonl(
    path: impl AsRef<Path>,
    records: &[InteractionRecord],
    space: &ClusterSpace,
) -> Result<()> {
    let mut w = create_writer(path.as_ref())?;
    for r in records {
        let mut obj = serde_json::Map::new();
        obj.insert("user_id".into(), Value::from(r.user_id.as_str()));
        obj.insert("item_id".into(), Value::from(r.item_id.as_str()));
        obj.insert("timestamp".into(), Value::from(r.timestamp));
        obj.insert(
            "clusters".into(),
            Value::from(
                r.clusters
                    .iter()
                    .map(|&c| space.labels()[c].clone())
                    .collect::<Vec<_>>(),
            ),
        );
        obj.insert("weight".into(), Value::from(r.weight));
        if let Some(t) = &r.title {
            obj.insert("title".into(), Value::from(t.as_str()));
        }
        serde_json::to_writer(&mut w, &obj)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn genres() -> ClusterSpace {
        ClusterSpace::new([
            "Action",
            "Adventure",
            "Animation",
            "Children",
            "Comedy",
            "Crime",
            "Documentary",
            "Drama",
            "Fantasy",
            "Film-Noir",
            "Horror",
            "IMAX",
            "Musical",
            "Mystery",
            "Romance",
            "Sci-Fi",
            "Thriller",
            "War",
            "Western",
        ])
        .unwrap()
    }

    fn file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn headerless_movielens_row() {
        let f = file("u1,Inception,5,1699999999,Action|Sci-Fi\n");
        let schema = SchemaConfig {
            columns: Some(
                ["user_id", "title", "weight", "timestamp", "clusters"]
                    .map(String::from)
                    .to_vec(),
            ),
            item: "title".into(),
            ..SchemaConfig::default()
        };
        let got = ingest(f.path(), InputFormat::Csv, &schema, &genres()).unwrap();
        let r = &got.records[0];
        assert_eq!(r.clusters, vec![0, 15]);
        assert_eq!(r.weight, 5.0);
        assert_eq!(r.timestamp, 1_699_999_999);
        assert_eq!(r.item_id, "Inception");
    }

    #[test]
    fn bad_row_is_rejected() {
        let f = file(
            "user_id,item_id,timestamp,clusters\nu1,a,10,Drama\nu1,b,soon,Drama\nu2,c,5,Comedy|Drama\n",
        );
        let got = ingest(
            f.path(),
            InputFormat::Csv,
            &SchemaConfig::default(),
            &genres(),
        )
        .unwrap();
        assert_eq!(got.records.len(), 2);
        assert_eq!(got.rejects.len(), 1);
        assert_eq!(got.rejects[0].row, 2);
        assert_eq!(got.records[0].user_id, "u1");
        assert_eq!(got.records[0].weight, 1.0);
    }

    #[test]
    fn empty_file() {
        let f = file("");
        for fmt in [InputFormat::Csv, InputFormat::Jsonl] {
            assert!(matches!(
                ingest(f.path(), fmt, &SchemaConfig::default(), &genres()),
                Err(Error::EmptyAfterFiltering)
            ));
        }
    }

    #[test]
    fn missing_file() {
        let r = ingest(
            "/nonexistent/x.csv",
            InputFormat::Csv,
            &SchemaConfig::default(),
            &genres(),
        );
        assert!(matches!(r, Err(Error::UnreadableFile { .. })));
    }

    #[test]
    fn jsonl_round_trip() {
        let space = genres();
        let records = vec![InteractionRecord {
            user_id: "7".into(),
            item_id: "m1".into(),
            timestamp: 3,
            clusters: vec![4, 7],
            weight: 4.5,
            title: Some("A \"quoted\" title".into()),
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        write_corpus_jsonl(&path, &records, &space).unwrap();
        let got = ingest(&path, InputFormat::Jsonl, &SchemaConfig::default(), &space).unwrap();
        assert_eq!(got.records, records);
    }
}
