//! Fixed-length feature vectors built from per-path decompositions.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sacmpm::{sacmpm_decompose, SacmpmConfig, SacmpmDecomposition};
use crate::sampm::{sampm_decompose, PursuitConfig, SampmDecomposition};
use crate::signal::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sampm,
    Sacmpm,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Sampm => "sampm",
            Method::Sacmpm => "sacmpm",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sampm" => Ok(Method::Sampm),
            "sacmpm" => Ok(Method::Sacmpm),
            other => Err(invalid("method", format!("unknown method `{other}`"))),
        }
    }
}

/// A decomposition of one actuator to sensor path.
#[derive(Debug, Clone)]
pub enum Decomposition {
    Sampm(SampmDecomposition),
    Sacmpm(SacmpmDecomposition),
}

impl Decomposition {
    pub fn method(&self) -> Method {
        match self {
            Decomposition::Sampm(_) => Method::Sampm,
            Decomposition::Sacmpm(_) => Method::Sacmpm,
        }
    }

    fn n_terms(&self) -> usize {
        match self {
            Decomposition::Sampm(d) => d.terms.len(),
            Decomposition::Sacmpm(d) => d.terms.len(),
        }
    }

    fn n_funcs(&self) -> Option<usize> {
        match self {
            Decomposition::Sampm(_) => None,
            Decomposition::Sacmpm(d) => Some(d.basis.n_funcs),
        }
    }

    /// `[τ, coefficients…]` of the first `m` greedy terms.
    fn term_rows(&self, m: usize) -> Vec<Vec<f64>> {
        match self {
            Decomposition::Sampm(d) => d.terms[..m]
                .iter()
                .map(|t| vec![t.tau_s, t.alpha])
                .collect(),
            Decomposition::Sacmpm(d) => d.terms[..m]
                .iter()
                .map(|t| {
                    std::iter::once(t.tau_s)
                        .chain(t.beta.iter().copied())
                        .collect()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub method: Method,
    pub m: usize,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none", default)]
    pub n_funcs: Option<usize>,
    pub paths: usize,
    pub ordering: String,
}

impl FeatureSchema {
    pub fn new(method: Method, m: usize, n_funcs: Option<usize>, paths: usize) -> Self {
        Self {
            method,
            m,
            n_funcs,
            paths,
            ordering: "tau_ascending".into(),
        }
    }

    pub fn per_term(&self) -> usize {
        match self.method {
            Method::Sampm => 2,
            Method::Sacmpm => self.n_funcs.unwrap_or(0) + 1,
        }
    }

    pub fn len(&self) -> usize {
        self.paths * self.m * self.per_term()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.len());
        for p in 0..self.paths {
            for t in 1..=self.m {
                names.push(format!("p{p}_t{t}_tau"));
                match self.method {
                    Method::Sampm => names.push(format!("p{p}_t{t}_alpha")),
                    Method::Sacmpm => {
                        for i in 1..self.per_term() {
                            names.push(format!("p{p}_t{t}_beta{i}"));
                        }
                    }
                }
            }
        }
        names
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub schema: FeatureSchema,
}

/// Concatenates per-path blocks of the first `m` terms, each block sorted by delay.
pub fn extract(decompositions: &[Decomposition], m: usize) -> Result<FeatureVector> {
    let first = decompositions
        .first()
        .ok_or_else(|| invalid("decompositions", "no paths given"))?;
    if m == 0 {
        return Err(invalid("m", "must be >= 1"));
    }
    let method = first.method();
    let n_funcs = first.n_funcs();
    let schema = FeatureSchema::new(method, m, n_funcs, decompositions.len());
    let mut values = Vec::with_capacity(schema.len());
    for d in decompositions {
        if d.method() != method || d.n_funcs() != n_funcs {
            return Err(invalid(
                "decompositions",
                "paths mix methods or basis sizes",
            ));
        }
        if d.n_terms() < m {
            return Err(Error::NotEnoughTerms {
                available: d.n_terms(),
                requested: m,
            });
        }
        let mut rows = d.term_rows(m);
        rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
        values.extend(rows.into_iter().flatten());
    }
    Ok(FeatureVector { values, schema })
}

/// Decomposition settings for feature extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub method: Method,
    pub m: usize,
    pub n_funcs: usize,
    pub ridge_lambda: f64,
}

impl FeatureConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            m: 6,
            n_funcs: 40,
            ridge_lambda: SacmpmConfig::default().ridge_lambda,
        }
    }
}

/// Runs the pursuit for `m` terms with the tolerance stop disabled.
pub fn decompose(signal: &Signal, atom: &Signal, config: &FeatureConfig) -> Result<Decomposition> {
    let pursuit = PursuitConfig {
        max_terms: config.m,
        tol_pct: 0.0,
        grid: None,
    };
    Ok(match config.method {
        Method::Sampm => Decomposition::Sampm(sampm_decompose(signal, atom, &pursuit)?),
        Method::Sacmpm => Decomposition::Sacmpm(sacmpm_decompose(
            signal,
            atom,
            &SacmpmConfig {
                pursuit,
                n_funcs: config.n_funcs,
                ridge_lambda: config.ridge_lambda,
            },
        )?),
    })
}

/// One feature row per case from its per-path residual signals.
pub fn case_features(
    cases: &[Vec<Signal>],
    atom: &Signal,
    config: &FeatureConfig,
) -> Result<(FeatureSchema, Vec<Vec<f64>>)> {
    let vectors = cases
        .par_iter()
        .map(|paths| {
            let decs = paths
                .iter()
                .map(|s| decompose(s, atom, config))
                .collect::<Result<Vec<_>>>()?;
            extract(&decs, config.m)
        })
        .collect::<Result<Vec<_>>>()?;
    let schema = vectors
        .first()
        .map(|v| v.schema.clone())
        .ok_or_else(|| invalid("cases", "no cases given"))?;
    if vectors.iter().any(|v| v.schema != schema) {
        return Err(invalid("cases", "cases have different path counts"));
    }
    Ok((schema, vectors.into_iter().map(|v| v.values).collect()))
}

/// Per-column affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; 0 marks a constant column.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(invalid("rows", "need at least two rows to standardize"));
        }
        let dim = rows[0].len();
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: r.len(),
            });
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / n).sqrt();
                // spread at rounding level of the mean counts as constant
                if sd <= 1e-12 * m.abs() || sd == 0.0 {
                    0.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| if *s == 0.0 { 0.0 } else { (v - m) / s })
            .collect())
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }

    /// Inverse map; constant columns come back as their mean.
    pub fn invert(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| v * s + m)
            .collect())
    }
}

/// Fits on `train` and maps both sets.
pub fn standardize(train: &[Vec<f64>]) -> Result<(Standardizer, Vec<Vec<f64>>)> {
    let st = Standardizer::fit(train)?;
    let applied = st.apply_all(train)?;
    Ok((st, applied))
}

/// One row per case, `label` first, then the schema columns.
pub fn write_feature_csv(
    path: impl AsRef<Path>,
    schema: &FeatureSchema,
    labels: &[String],
    rows: &[Vec<f64>],
) -> Result<()> {
    let path = path.as_ref();
    let fmt = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    if labels.len() != rows.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: rows.len(),
        });
    }
    let mut w = csv::Writer::from_path(path).map_err(fmt)?;
    let mut header = vec!["label".to_string()];
    header.extend(schema.column_names());
    w.write_record(&header).map_err(fmt)?;
    for (label, row) in labels.iter().zip(rows) {
        if row.len() != schema.len() {
            return Err(Error::DimensionMismatch {
                expected: schema.len(),
                got: row.len(),
            });
        }
        let mut rec = vec![label.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(fmt)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a feature CSV back as `(labels, rows)`.
pub fn read_feature_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let path = path.as_ref();
    let fmt = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| fmt(e.to_string()))?;
    let width = r.headers().map_err(|e| fmt(e.to_string()))?.len();
    if width < 2 {
        return Err(fmt(
            "expected a label column and at least one feature".into()
        ));
    }
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| fmt(e.to_string()))?;
        labels.push(rec[0].to_string());
        let row = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|e| fmt(format!("`{v}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((labels, rows))
}
