//! File formats: the fitted-model JSON schema, numeric CSV interchange and
//! atomic writes. All floats are serialized in shortest round-trip decimal
//! form, so write -> read -> write is byte-identical.

use plso::{Lambda, LogVarianceField, ModelParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{CliError, Result};

pub const SCHEMA_MAJOR: u32 = 1;
pub const SCHEMA_MINOR: u32 = 0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaVersion {
    pub major: u32,
    pub minor: u32,
}

/// Serialized smoothness weight: a number or the string "stationary".
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaRepr {
    Value(f64),
    Flag(String),
}

impl LambdaRepr {
    pub fn from_lambda(lambda: Lambda) -> Self {
        match lambda {
            Lambda::Value(v) => LambdaRepr::Value(v),
            Lambda::Stationary => LambdaRepr::Flag("stationary".into()),
        }
    }

    pub fn to_lambda(&self) -> Result<Lambda> {
        match self {
            LambdaRepr::Value(v) => Ok(Lambda::Value(*v)),
            LambdaRepr::Flag(s) if s == "stationary" => Ok(Lambda::Stationary),
            LambdaRepr::Flag(s) => Err(CliError::Data(format!(
                "unknown smoothness flag '{s}' (expected a number or \"stationary\")"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsRepr {
    pub delta: f64,
    pub lambda: LambdaRepr,
    pub obs_noise_var: f64,
    pub lengthscales: Vec<f64>,
    pub center_freqs: Vec<f64>,
    pub max_lengthscale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldRepr {
    pub window_len: usize,
    /// Row j holds the log powers of component j across windows.
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    pub objective_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub input_sha256: String,
    pub seed: u64,
    pub config: serde_json::Value,
}

/// Persistent fitted model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedModelFile {
    pub schema_version: SchemaVersion,
    pub params: ParamsRepr,
    pub log_variance_field: FieldRepr,
    pub diagnostics: Diagnostics,
    pub provenance: Provenance,
}

impl FittedModelFile {
    pub fn build(
        params: &ModelParams,
        psi: &LogVarianceField,
        trace: &[f64],
        warnings: &[String],
        input_sha256: String,
        seed: u64,
        config: serde_json::Value,
    ) -> Self {
        let values = (0..psi.n_components())
            .map(|j| {
                (0..psi.n_windows())
                    .map(|m| psi.values()[[j, m]])
                    .collect()
            })
            .collect();
        FittedModelFile {
            schema_version: SchemaVersion {
                major: SCHEMA_MAJOR,
                minor: SCHEMA_MINOR,
            },
            params: ParamsRepr {
                delta: params.delta,
                lambda: LambdaRepr::from_lambda(params.lambda),
                obs_noise_var: params.obs_noise_var,
                lengthscales: params.lengthscales.clone(),
                center_freqs: params.center_freqs.clone(),
                max_lengthscale: params.max_lengthscale,
            },
            log_variance_field: FieldRepr {
                window_len: psi.window_len(),
                values,
            },
            diagnostics: Diagnostics {
                objective_trace: trace.to_vec(),
                warnings: warnings.to_vec(),
            },
            provenance: Provenance {
                input_sha256,
                seed,
                config,
            },
        }
    }

    pub fn to_params(&self) -> Result<ModelParams> {
        Ok(ModelParams::new(
            self.params.delta,
            self.params.lambda.to_lambda()?,
            self.params.obs_noise_var,
            self.params.lengthscales.clone(),
            self.params.center_freqs.clone(),
            self.params.max_lengthscale,
        )?)
    }

    pub fn to_field(&self) -> Result<LogVarianceField> {
        Ok(LogVarianceField::from_rows(
            &self.log_variance_field.values,
            self.log_variance_field.window_len,
        )?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Data(format!("serializing model: {e}")))?;
        write_atomic(path, format!("{body}\n").as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path)
            .map_err(|e| CliError::io(&format!("reading {}", path.display()), e))?;
        let file: FittedModelFile = serde_json::from_str(&body)
            .map_err(|e| CliError::Data(format!("parsing {}: {e}", path.display())))?;
        if file.schema_version.major != SCHEMA_MAJOR {
            return Err(CliError::Data(format!(
                "model file {} has schema version {}.{}, this build reads {}.x",
                path.display(),
                file.schema_version.major,
                file.schema_version.minor,
                SCHEMA_MAJOR
            )));
        }
        Ok(file)
    }
}

/// Writes via a temporary sibling and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::io(&format!("creating {}", parent.display()), e))?;
        }
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&format!("writing {}", tmp.display()), e))?;
    fs::rename(&tmp, path)
        .map_err(|e| CliError::io(&format!("renaming into {}", path.display()), e))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Reads the single-column observation CSV: header `value`, one decimal per
/// row. Parse failures report the file line number.
pub fn read_value_csv(path: &Path) -> Result<Vec<f64>> {
    let body = fs::read_to_string(path)
        .map_err(|e| CliError::io(&format!("reading {}", path.display()), e))?;
    let mut lines = body.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "value" => {}
        Some((_, header)) => {
            return Err(CliError::Data(format!(
                "{}: line 1: expected header 'value', found '{}'",
                path.display(),
                header.trim()
            )))
        }
        None => {
            return Err(CliError::Data(format!(
                "{}: file is empty (expected a 'value' header)",
                path.display()
            )))
        }
    }
    let mut values = Vec::new();
    for (idx, line) in lines {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let v: f64 = trimmed.parse().map_err(|_| {
            CliError::Data(format!(
                "{}: line {}: cannot parse '{}' as a number",
                path.display(),
                idx + 1,
                trimmed
            ))
        })?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no observations after the header",
            path.display()
        )));
    }
    Ok(values)
}

pub fn write_value_csv(path: &Path, values: &[f64]) -> Result<()> {
    let mut body = String::with_capacity(values.len() * 12 + 8);
    body.push_str("value\n");
    for v in values {
        let _ = writeln!(body, "{v}");
    }
    write_atomic(path, body.as_bytes())
}

/// Writes a CSV with the given header and rows of shortest round-trip
/// decimals.
pub fn write_table_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut body = String::new();
    body.push_str(&header.join(","));
    body.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                body.push(',');
            }
            let _ = write!(body, "{v}");
            first = false;
        }
        body.push('\n');
    }
    write_atomic(path, body.as_bytes())
}
