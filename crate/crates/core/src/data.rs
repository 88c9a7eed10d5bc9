//! Dataset ingestion, vertical partitioning, instance alignment and
//! synthetic data generation.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::types::{InstanceId, PartyId, ACTIVE_PARTY};

/// One named feature column.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureColumn {
    pub name: String,
    pub values: Vec<f64>,
}

/// A party's view of the dataset: aligned ids, its feature columns, and the
/// label column when the party is the label owner.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetSlice {
    pub user_ids: Vec<InstanceId>,
    pub features: Vec<FeatureColumn>,
    pub label: Option<Vec<f64>>,
}

impl DatasetSlice {
    pub fn len(&self) -> usize {
        self.user_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.user_ids.is_empty()
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureColumn> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    fn check_consistent(&self) -> Result<()> {
        let n = self.user_ids.len();
        let mut seen = BTreeSet::new();
        for &id in &self.user_ids {
            if !seen.insert(id) {
                return Err(Error::Data(format!("duplicate instance id {id}")));
            }
        }
        for f in &self.features {
            if f.values.len() != n {
                return Err(Error::Data(format!(
                    "column '{}' has {} values for {} ids",
                    f.name,
                    f.values.len(),
                    n
                )));
            }
        }
        if let Some(label) = &self.label {
            if label.len() != n {
                return Err(Error::Data(format!(
                    "label column has {} values for {} ids",
                    label.len(),
                    n
                )));
            }
        }
        Ok(())
    }

    /// Restricts the slice to `ids` in the given order.
    fn select(&self, ids: &[InstanceId]) -> Result<DatasetSlice> {
        let pos: BTreeMap<InstanceId, usize> = self
            .user_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();
        let mut rows = Vec::with_capacity(ids.len());
        for id in ids {
            rows.push(*pos.get(id).ok_or_else(|| {
                Error::Data(format!("instance id {id} not present in slice"))
            })?);
        }
        Ok(DatasetSlice {
            user_ids: ids.to_vec(),
            features: self
                .features
                .iter()
                .map(|f| FeatureColumn {
                    name: f.name.clone(),
                    values: rows.iter().map(|&i| f.values[i]).collect(),
                })
                .collect(),
            label: self
                .label
                .as_ref()
                .map(|l| rows.iter().map(|&i| l[i]).collect()),
        })
    }

    /// SHA-256 over ids, column names and raw value bits; stable across runs.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for id in &self.user_ids {
            h.update(id.to_le_bytes());
        }
        for f in &self.features {
            h.update(f.name.as_bytes());
            for v in &f.values {
                h.update(v.to_le_bytes());
            }
        }
        if let Some(label) = &self.label {
            h.update(b"label");
            for v in label {
                h.update(v.to_le_bytes());
            }
        }
        let out = h.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Assignment of features to parties plus label ownership.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerticalPartitionSpec {
    /// feature name → owning passive party.
    pub assignments: BTreeMap<String, PartyId>,
    /// Must be the active party.
    pub label_owner: PartyId,
    /// Name of the id column in CSV sources.
    pub id_column: String,
}

impl VerticalPartitionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.label_owner != ACTIVE_PARTY {
            return Err(Error::Config(format!(
                "label_owner: labels must belong to the active party ({ACTIVE_PARTY}), got {}",
                self.label_owner
            )));
        }
        for (feature, &party) in &self.assignments {
            if party == ACTIVE_PARTY {
                return Err(Error::Config(format!(
                    "features_per_party: feature '{feature}' assigned to the active party; \
                     features belong to passive parties"
                )));
            }
        }
        Ok(())
    }

    /// Passive party ids in ascending order.
    pub fn passive_parties(&self) -> Vec<PartyId> {
        let set: BTreeSet<PartyId> = self.assignments.values().copied().collect();
        set.into_iter().collect()
    }

    /// Features of one party, in assignment-map order.
    pub fn features_of(&self, party: PartyId) -> Vec<String> {
        self.assignments
            .iter()
            .filter(|(_, &p)| p == party)
            .map(|(f, _)| f.clone())
            .collect()
    }
}

/// How unparseable or missing numeric cells are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    DropRow,
    #[default]
    ImputeMedian,
}

/// CSV ingestion schema.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub id_column: String,
    pub label_column: Option<String>,
    pub missing_policy: MissingPolicy,
}

fn median(values: &mut Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Loads an RFC-4180 CSV file with a header row into a typed slice.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<DatasetSlice> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;
    let headers: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
    let id_idx = headers
        .iter()
        .position(|h| *h == schema.id_column)
        .ok_or_else(|| Error::Data(format!("missing id column '{}'", schema.id_column)))?;
    let label_idx = match &schema.label_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Data(format!("missing label column '{name}'")))?,
        ),
        None => None,
    };

    let mut ids: Vec<InstanceId> = Vec::new();
    let mut cells: Vec<Vec<Option<f64>>> = vec![Vec::new(); headers.len()];
    for record in reader.records() {
        let record = record?;
        let id_text = record.get(id_idx).unwrap_or("");
        let id: InstanceId = id_text
            .trim()
            .parse()
            .map_err(|_| Error::Data(format!("unparseable id '{id_text}'")))?;
        ids.push(id);
        for (col, cell) in record.iter().enumerate() {
            if col == id_idx {
                continue;
            }
            cells[col].push(cell.trim().parse::<f64>().ok().filter(|v| v.is_finite()));
        }
    }

    // Missing-value policy.
    let n = ids.len();
    let keep: Vec<bool> = match schema.missing_policy {
        MissingPolicy::DropRow => (0..n)
            .map(|row| {
                cells
                    .iter()
                    .enumerate()
                    .all(|(col, c)| col == id_idx || c[row].is_some())
            })
            .collect(),
        MissingPolicy::ImputeMedian => vec![true; n],
    };
    let mut features = Vec::new();
    let mut label = None;
    for (col, header) in headers.iter().enumerate() {
        if col == id_idx {
            continue;
        }
        let fill = if schema.missing_policy == MissingPolicy::ImputeMedian {
            let mut present: Vec<f64> = cells[col].iter().flatten().copied().collect();
            median(&mut present)
        } else {
            None
        };
        let values: Vec<f64> = cells[col]
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(c, _)| {
                c.or(fill)
                    .ok_or_else(|| Error::Data(format!("column '{header}' has no numeric values")))
            })
            .collect::<Result<_>>()?;
        if Some(col) == label_idx {
            label = Some(values);
        } else {
            features.push(FeatureColumn {
                name: header.clone(),
                values,
            });
        }
    }
    let slice = DatasetSlice {
        user_ids: ids
            .into_iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(id, _)| id)
            .collect(),
        features,
        label,
    };
    slice.check_consistent()?;
    Ok(slice)
}

/// Writes a slice back to CSV (id column first, then features, then label).
pub fn write_csv(slice: &DatasetSlice, id_column: &str, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    let mut header = vec![id_column.to_string()];
    header.extend(slice.features.iter().map(|f| f.name.clone()));
    if slice.label.is_some() {
        header.push("label".into());
    }
    writeln!(out, "{}", header.join(","))?;
    for row in 0..slice.len() {
        let mut cells = vec![slice.user_ids[row].to_string()];
        for f in &slice.features {
            cells.push(format!("{:?}", f.values[row]));
        }
        if let Some(label) = &slice.label {
            cells.push(format!("{:?}", label[row]));
        }
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Restricts all party slices to the intersection of their ids, sorted
/// ascending so every party indexes rows identically.
pub fn align_and_partition(slices: &[DatasetSlice]) -> Result<Vec<DatasetSlice>> {
    if slices.is_empty() {
        return Err(Error::Data("no slices to align".into()));
    }
    for s in slices {
        s.check_consistent()?;
    }
    let mut common: BTreeSet<InstanceId> = slices[0].user_ids.iter().copied().collect();
    for s in &slices[1..] {
        let ids: BTreeSet<InstanceId> = s.user_ids.iter().copied().collect();
        common = common.intersection(&ids).copied().collect();
    }
    if common.is_empty() {
        return Err(Error::Data("empty id intersection across parties".into()));
    }
    let ordered: Vec<InstanceId> = common.into_iter().collect();
    slices.iter().map(|s| s.select(&ordered)).collect()
}

/// Splits a joined slice into per-party slices according to the partition
/// spec. The active party receives ids and the label; each passive party
/// receives its assigned feature columns.
pub fn partition_slice(
    joined: &DatasetSlice,
    spec: &VerticalPartitionSpec,
) -> Result<Vec<(PartyId, DatasetSlice)>> {
    spec.validate()?;
    let label = joined
        .label
        .clone()
        .ok_or_else(|| Error::Data("joined slice has no label column".into()))?;
    let mut out = vec![(
        ACTIVE_PARTY,
        DatasetSlice {
            user_ids: joined.user_ids.clone(),
            features: Vec::new(),
            label: Some(label),
        },
    )];
    for party in spec.passive_parties() {
        let mut features = Vec::new();
        for name in spec.features_of(party) {
            let col = joined
                .feature(&name)
                .ok_or_else(|| Error::Data(format!("feature '{name}' missing from dataset")))?;
            features.push(col.clone());
        }
        out.push((
            party,
            DatasetSlice {
                user_ids: joined.user_ids.clone(),
                features,
                label: None,
            },
        ));
    }
    Ok(out)
}

/// Task selector for synthetic data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticTask {
    Regression,
    Binary,
}

/// Deterministic synthetic dataset: standard-normal features and a label
/// driven by a linear score (plus noise for regression, through a logistic
/// draw for binary labels).
pub fn generate_synthetic(
    n: usize,
    d: usize,
    task: SyntheticTask,
    seed: u64,
) -> Result<DatasetSlice> {
    if n < 2 || d < 1 {
        return Err(Error::Parameter(format!(
            "synthetic data needs n >= 2 and d >= 1, got n={n} d={d}"
        )));
    }
    use rand::SeedableRng;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let weights: Vec<f64> = (0..d)
        .map(|j| if j % 2 == 0 { 1.0 } else { -0.5 } * (1.0 + j as f64 / d as f64))
        .collect();
    let mut features: Vec<FeatureColumn> = (0..d)
        .map(|j| FeatureColumn {
            name: format!("f{j}"),
            values: Vec::with_capacity(n),
        })
        .collect();
    let mut label = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| normal.sample(&mut rng)).collect();
        let score: f64 = row.iter().zip(&weights).map(|(x, w)| x * w).sum();
        let y = match task {
            SyntheticTask::Regression => score + 0.5 * normal.sample(&mut rng),
            SyntheticTask::Binary => {
                let p = 1.0 / (1.0 + (-score).exp());
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
        };
        for (j, x) in row.into_iter().enumerate() {
            features[j].values.push(x);
        }
        label.push(y);
    }
    Ok(DatasetSlice {
        user_ids: (0..n as InstanceId).collect(),
        features,
        label: Some(label),
    })
}
