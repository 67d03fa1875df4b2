//! Clustered right-censored survival data and its CSV representation.
//!
//! CSV schema: `cluster_id,time,status,<covariate columns...>` with a
//! header row. `status` is 1 for an observed event, 0 for censoring.
//! Missing values are hard errors.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

/// One observed subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub time: f64,
    pub event: bool,
    pub covariates: Vec<f64>,
}

/// A cluster of subjects sharing one frailty value.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub id: String,
    pub subjects: Vec<Subject>,
}

impl Cluster {
    pub fn event_count(&self) -> usize {
        self.subjects.iter().filter(|s| s.event).count()
    }
}

/// Clustered survival dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    clusters: Vec<Cluster>,
    n_covariates: usize,
    covariate_names: Vec<String>,
}

impl Dataset {
    pub fn new(clusters: Vec<Cluster>, covariate_names: Vec<String>) -> Result<Self> {
        let n_covariates = covariate_names.len();
        let mut any_event = false;
        for c in &clusters {
            if c.subjects.is_empty() {
                return Err(Error::InvalidData(format!("cluster {} is empty", c.id)));
            }
            for s in &c.subjects {
                if !(s.time > 0.0) || !s.time.is_finite() {
                    return Err(Error::InvalidData(format!(
                        "cluster {}: time {} must be positive",
                        c.id, s.time
                    )));
                }
                if s.covariates.len() != n_covariates {
                    return Err(Error::DimensionMismatch {
                        expected: n_covariates,
                        actual: s.covariates.len(),
                    });
                }
                any_event |= s.event;
            }
        }
        if !any_event {
            return Err(Error::InvalidData("dataset contains no events".into()));
        }
        Ok(Self { clusters, n_covariates, covariate_names })
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn n_covariates(&self) -> usize {
        self.n_covariates
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn n_subjects(&self) -> usize {
        self.clusters.iter().map(|c| c.subjects.len()).sum()
    }

    pub fn n_events(&self) -> usize {
        self.clusters.iter().map(Cluster::event_count).sum()
    }

    pub fn subjects(&self) -> impl Iterator<Item = &Subject> {
        self.clusters.iter().flat_map(|c| c.subjects.iter())
    }

    /// All observed times and event flags, cluster order.
    pub fn times_events(&self) -> (Vec<f64>, Vec<bool>) {
        let mut times = Vec::with_capacity(self.n_subjects());
        let mut events = Vec::with_capacity(self.n_subjects());
        for s in self.subjects() {
            times.push(s.time);
            events.push(s.event);
        }
        (times, events)
    }

    /// New dataset built by resampling whole clusters (by index) with
    /// replacement; resampled clusters get fresh sequential ids so the
    /// result is a valid dataset even when a cluster is drawn twice.
    pub fn resample_clusters(&self, indices: &[usize]) -> Result<Dataset> {
        let clusters = indices
            .iter()
            .enumerate()
            .map(|(new_id, &i)| Cluster {
                id: format!("b{new_id}"),
                subjects: self.clusters[i].subjects.clone(),
            })
            .collect();
        Dataset::new(clusters, self.covariate_names.clone())
    }

    pub fn read_csv_path(path: &Path) -> Result<Dataset> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Csv { row: 0, detail: e.to_string() })?
            .clone();
        if headers.len() < 3 || headers.get(0) != Some("cluster_id") {
            return Err(Error::Csv {
                row: 0,
                detail: "expected header starting with cluster_id,time,status".into(),
            });
        }
        let covariate_names: Vec<String> = headers.iter().skip(3).map(String::from).collect();
        // preserve first-appearance order of cluster ids
        let mut order: Vec<String> = Vec::new();
        let mut groups: BTreeMap<String, Vec<Subject>> = BTreeMap::new();
        for (i, record) in rdr.records().enumerate() {
            let row = i + 2; // header is row 1
            let record = record.map_err(|e| Error::Csv { row, detail: e.to_string() })?;
            if record.len() != headers.len() {
                return Err(Error::Csv {
                    row,
                    detail: format!("expected {} fields, got {}", headers.len(), record.len()),
                });
            }
            let parse = |idx: usize, name: &str| -> Result<f64> {
                let raw = record.get(idx).unwrap_or("").trim();
                if raw.is_empty() {
                    return Err(Error::Csv { row, detail: format!("missing value for {name}") });
                }
                raw.parse::<f64>()
                    .map_err(|_| Error::Csv { row, detail: format!("cannot parse {name}: {raw:?}") })
            };
            let cluster_id = record.get(0).unwrap().trim().to_string();
            if cluster_id.is_empty() {
                return Err(Error::Csv { row, detail: "missing cluster_id".into() });
            }
            let time = parse(1, "time")?;
            let status = parse(2, "status")?;
            let event = match status {
                s if s == 0.0 => false,
                s if s == 1.0 => true,
                _ => {
                    return Err(Error::Csv { row, detail: format!("status must be 0 or 1, got {status}") })
                }
            };
            let covariates = (3..headers.len())
                .map(|idx| parse(idx, headers.get(idx).unwrap()))
                .collect::<Result<Vec<f64>>>()?;
            if !groups.contains_key(&cluster_id) {
                order.push(cluster_id.clone());
            }
            groups.entry(cluster_id).or_default().push(Subject { time, event, covariates });
        }
        let clusters = order
            .into_iter()
            .map(|id| {
                let subjects = groups.remove(&id).unwrap();
                Cluster { id, subjects }
            })
            .collect();
        Dataset::new(clusters, covariate_names)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["cluster_id".to_string(), "time".into(), "status".into()];
        header.extend(self.covariate_names.iter().cloned());
        wtr.write_record(&header)
            .map_err(|e| Error::Csv { row: 0, detail: e.to_string() })?;
        for c in &self.clusters {
            for s in &c.subjects {
                let mut rec = vec![
                    c.id.clone(),
                    format_float(s.time),
                    if s.event { "1".into() } else { "0".into() },
                ];
                rec.extend(s.covariates.iter().map(|&v| format_float(v)));
                wtr.write_record(&rec)
                    .map_err(|e| Error::Csv { row: 0, detail: e.to_string() })?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Shortest representation that round-trips the f64 exactly.
fn format_float(v: f64) -> String {
    let mut s = format!("{v}");
    if s.parse::<f64>() != Ok(v) {
        s = format!("{v:.17}");
    }
    s
}
