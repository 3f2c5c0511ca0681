//! k-anonymity, linkage attacks, and a randomized-response contrast on small tables.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infocore::Dist;
use crate::mechanisms::{check_mi_bound, randomized_response, BoundCertificate, Channel};

/// Most distinct values a column may have and still count as categorical.
pub const MAX_CATEGORIES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Identifier,
    QuasiIdentifier,
    Sensitive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub role: Role,
}

/// JSON sidecar declaring the role of every CSV column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleSidecar {
    pub columns: BTreeMap<String, Role>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    columns: Vec<Column>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: Vec<Column>, rows: Vec<Vec<String>>) -> Result<Self> {
        let names: BTreeSet<&str> = columns.iter().map(|c| c.name.as_str()).collect();
        if names.len() != columns.len() {
            return Err(Error::domain("duplicate column name"));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != columns.len()) {
            return Err(Error::domain(format!(
                "row {i} does not match the header width"
            )));
        }
        Ok(Table { columns, rows })
    }

    /// Convenience constructor from `(name, role)` pairs and string rows.
    pub fn from_rows(columns: &[(&str, Role)], rows: &[&[&str]]) -> Result<Self> {
        Table::new(
            columns
                .iter()
                .map(|(n, r)| Column {
                    name: n.to_string(),
                    role: *r,
                })
                .collect(),
            rows.iter()
                .map(|r| r.iter().map(|v| v.to_string()).collect())
                .collect(),
        )
    }

    /// Reads a headed CSV whose columns must match the sidecar exactly.
    pub fn from_csv<R: Read>(reader: R, roles: &RoleSidecar) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| Error::domain(format!("csv header: {e}")))?
            .clone();
        let header_set: BTreeSet<&str> = header.iter().collect();
        let role_set: BTreeSet<&str> = roles.columns.keys().map(String::as_str).collect();
        if header_set != role_set || header_set.len() != header.len() {
            return Err(Error::domain(format!(
                "role sidecar {role_set:?} does not match csv columns {header_set:?}"
            )));
        }
        let columns = header
            .iter()
            .map(|n| Column {
                name: n.to_string(),
                role: roles.columns[n],
            })
            .collect();
        let rows = rdr
            .records()
            .map(|r| {
                r.map(|rec| rec.iter().map(str::to_string).collect())
                    .map_err(|e| Error::domain(format!("csv record: {e}")))
            })
            .collect::<Result<Vec<Vec<String>>>>()?;
        Table::new(columns, rows)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::domain(format!("csv write: {e}"));
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))
            .map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::domain(format!("csv write: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::domain(e.to_string()))
    }

    pub fn roles(&self) -> RoleSidecar {
        RoleSidecar {
            columns: self
                .columns
                .iter()
                .map(|c| (c.name.clone(), c.role))
                .collect(),
        }
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    fn with_role(&self, role: Role) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&i| self.columns[i].role == role)
            .collect()
    }

    /// Copy of the table with identifier columns removed.
    pub fn drop_identifiers(&self) -> Table {
        let keep: Vec<usize> = (0..self.columns.len())
            .filter(|&i| self.columns[i].role != Role::Identifier)
            .collect();
        Table {
            columns: keep.iter().map(|&i| self.columns[i].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| keep.iter().map(|&i| r[i].clone()).collect())
                .collect(),
        }
    }
}

fn project(row: &[String], cols: &[usize]) -> Vec<String> {
    cols.iter().map(|&i| row[i].clone()).collect()
}

/// Equivalence classes over `cols`: projected key → row indices.
fn classes(t: &Table, cols: &[usize]) -> BTreeMap<Vec<String>, Vec<usize>> {
    let mut out: BTreeMap<Vec<String>, Vec<usize>> = BTreeMap::new();
    for (i, r) in t.rows.iter().enumerate() {
        out.entry(project(r, cols)).or_default().push(i);
    }
    out
}

/// Size of the smallest equivalence class over the quasi-identifiers.
pub fn k_anonymity_level(t: &Table) -> Result<usize> {
    if t.rows.is_empty() {
        return Err(Error::domain("empty table"));
    }
    let qi = t.with_role(Role::QuasiIdentifier);
    if qi.is_empty() {
        return Err(Error::domain("table has no quasi-identifier columns"));
    }
    Ok(classes(t, &qi).values().map(Vec::len).min().unwrap_or(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub quasi_identifiers: Vec<String>,
    pub size: usize,
    pub sensitive_values: Vec<String>,
    pub homogeneous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub aux_row: usize,
    /// Identifier values of the auxiliary record, joined with `|`.
    pub identity: String,
    pub matches: usize,
    pub reidentified: bool,
    /// Sensitive value learned when every matching record shares it.
    pub disclosed: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnonReport {
    pub k_achieved: usize,
    pub shared_columns: Vec<String>,
    /// Fraction of release classes with a single sensitive value.
    pub homogeneity_rate: f64,
    /// Fraction of auxiliary records linked to exactly one release record.
    pub reid_rate: f64,
    /// Fraction of auxiliary records whose linked class is homogeneous.
    pub linked_homogeneity_rate: f64,
    pub classes: Vec<ClassSummary>,
    pub links: Vec<Link>,
}

/// Joins auxiliary records to the release on their shared quasi-identifiers.
pub fn linkage_attack(release: &Table, auxiliary: &Table) -> Result<AnonReport> {
    let k_achieved = k_anonymity_level(release)?;
    let qi = release.with_role(Role::QuasiIdentifier);
    let shared: Vec<(usize, usize)> = qi
        .iter()
        .filter_map(|&i| {
            auxiliary
                .column_index(&release.columns[i].name)
                .map(|j| (i, j))
        })
        .collect();
    if shared.is_empty() {
        return Err(Error::domain(
            "release and auxiliary share no quasi-identifier",
        ));
    }
    let sensitive = release.with_role(Role::Sensitive);
    let sensitive_of = |rows: &[usize]| -> BTreeSet<String> {
        rows.iter()
            .map(|&r| project(&release.rows[r], &sensitive).join("|"))
            .collect()
    };

    let summaries: Vec<ClassSummary> = classes(release, &qi)
        .into_iter()
        .map(|(key, rows)| {
            let values = sensitive_of(&rows);
            ClassSummary {
                quasi_identifiers: key,
                size: rows.len(),
                homogeneous: !sensitive.is_empty() && values.len() == 1,
                sensitive_values: values.into_iter().collect(),
            }
        })
        .collect();
    let homogeneous = summaries.iter().filter(|c| c.homogeneous).count();

    let release_cols: Vec<usize> = shared.iter().map(|&(i, _)| i).collect();
    let aux_cols: Vec<usize> = shared.iter().map(|&(_, j)| j).collect();
    let joined = classes(release, &release_cols);
    let ids = auxiliary.with_role(Role::Identifier);
    let links: Vec<Link> = auxiliary
        .rows
        .iter()
        .enumerate()
        .map(|(a, row)| {
            let hits = joined
                .get(&project(row, &aux_cols))
                .cloned()
                .unwrap_or_default();
            let values = sensitive_of(&hits);
            Link {
                aux_row: a,
                identity: project(row, &ids).join("|"),
                matches: hits.len(),
                reidentified: hits.len() == 1,
                disclosed: (!hits.is_empty() && !sensitive.is_empty() && values.len() == 1)
                    .then(|| values.into_iter().next().expect("one value")),
            }
        })
        .collect();
    let rate = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    Ok(AnonReport {
        k_achieved,
        shared_columns: release_cols
            .iter()
            .map(|&i| release.columns[i].name.clone())
            .collect(),
        homogeneity_rate: rate(homogeneous, summaries.len()),
        reid_rate: rate(links.iter().filter(|l| l.reidentified).count(), links.len()),
        linked_homogeneity_rate: rate(
            links.iter().filter(|l| l.disclosed.is_some()).count(),
            links.len(),
        ),
        classes: summaries,
        links,
    })
}

/// Randomized-response channel over a column's observed values, and the
/// column's empirical distribution.
pub fn column_channel(t: &Table, column: &str, eps: f64) -> Result<(Channel, Dist)> {
    let (states, prior) = column_prior(t, column)?;
    let rr = randomized_response(states.len(), eps)?;
    let channel = Channel::new(states.clone(), states, rr.rows().to_vec())?;
    Ok((channel, prior))
}

fn column_prior(t: &Table, column: &str) -> Result<(Vec<String>, Dist)> {
    let idx = t
        .column_index(column)
        .ok_or_else(|| Error::domain(format!("no column {column:?}")))?;
    if t.rows.is_empty() {
        return Err(Error::domain("empty table"));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &t.rows {
        *counts.entry(r[idx].as_str()).or_insert(0) += 1;
    }
    if counts.len() < 2 || counts.len() > MAX_CATEGORIES {
        return Err(Error::domain(format!(
            "column {column:?} is not categorical ({} distinct values)",
            counts.len()
        )));
    }
    let n = t.rows.len() as f64;
    let states: Vec<String> = counts.keys().map(|s| s.to_string()).collect();
    let probs = counts.values().map(|&c| c as f64 / n).collect();
    Ok((states.clone(), Dist::new(states, probs)?))
}

/// Replaces `column` through k-ary randomized response at `eps` and
/// certifies the per-record information bound under the empirical prior.
pub fn dp_release(
    t: &Table,
    column: &str,
    eps: f64,
    seed: u64,
) -> Result<(Table, BoundCertificate)> {
    let (channel, prior) = column_channel(t, column, eps)?;
    let cert = check_mi_bound(&channel, &prior)?;
    let idx = t.column_index(column).expect("checked by column_channel");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = t
        .rows
        .iter()
        .map(|r| {
            let x = channel
                .inputs()
                .iter()
                .position(|s| *s == r[idx])
                .expect("states come from this column");
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let row = &channel.rows()[x];
            let y = row
                .iter()
                .position(|p| {
                    acc += p;
                    u < acc
                })
                .unwrap_or(row.len() - 1);
            let mut out = r.clone();
            out[idx] = channel.outputs()[y].clone();
            out
        })
        .collect();
    Ok((
        Table {
            columns: t.columns.clone(),
            rows,
        },
        cert,
    ))
}

/// Certificate for publishing the column verbatim: ε is unbounded.
pub fn identity_release(t: &Table, column: &str) -> Result<BoundCertificate> {
    let (states, prior) = column_prior(t, column)?;
    check_mi_bound(&Channel::identity(states)?, &prior)
}
