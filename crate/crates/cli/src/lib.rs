//! Experiment driver: JSON configs in, JSON reports and CSV tables out.
//!
//! A config names one experiment kind, its parameters and a seed. Running it
//! writes `<name>.json` (parameters echoed, computed values, verdicts) and one
//! CSV file per detail table. Exit status is 0 when every verdict passes, 1
//! when some verdict fails, 2 for schema violations and 3 for numerical errors.

mod kinds;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use kinds::execute;

/// Environment variable overriding the output directory of configs and manifests.
pub const OUT_ENV: &str = "TCILAB_OUT";

pub const DEFAULT_OUT: &str = "reports";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    TransportCheck,
    TpVerify,
    T1Estimate,
    TensorizeCheck,
    DynamicsTail,
    CouplingDecay,
    Spectrum,
    PathspaceCheck,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::TransportCheck,
        Kind::TpVerify,
        Kind::T1Estimate,
        Kind::TensorizeCheck,
        Kind::DynamicsTail,
        Kind::CouplingDecay,
        Kind::Spectrum,
        Kind::PathspaceCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::TransportCheck => "transport_check",
            Kind::TpVerify => "tp_verify",
            Kind::T1Estimate => "t1_estimate",
            Kind::TensorizeCheck => "tensorize_check",
            Kind::DynamicsTail => "dynamics_tail",
            Kind::CouplingDecay => "coupling_decay",
            Kind::Spectrum => "spectrum",
            Kind::PathspaceCheck => "pathspace_check",
        }
    }

    /// The statement an experiment of this kind checks, embedded in every report.
    pub fn claim(self) -> &'static str {
        match self {
            Kind::TransportCheck => {
                "Kantorovich duality: the optimal transport cost equals the best dual potential value"
            }
            Kind::TpVerify => "transportation inequality W_p(mu, nu) <= sqrt(2 C H(nu | mu)) for every candidate nu",
            Kind::T1Estimate => {
                "T_1 constant from Gaussian integrability: C = (2/delta) sup_k [((k!)^2/(2k)!) E exp(delta d(X,Y)^2)]^(1/k)"
            }
            Kind::TensorizeCheck => {
                "dependent tensorization: W_p of sequences <= sqrt(2 C n^(2/p-1)) / (1 - r) * sqrt(H(Q | P)) via a stepwise optimal coupling"
            }
            Kind::DynamicsTail => {
                "concentration of Lipschitz functionals of contracting sequences and diffusion time averages"
            }
            Kind::CouplingDecay => {
                "synchronous coupling of a dissipative diffusion: E|X_t(x) - X_t(y)|^2 <= |x - y|^2 exp(-2 delta t)"
            }
            Kind::Spectrum => {
                "the top eigenvalue of a Gaussian path covariance operator is the sharp T_2 constant under the L2 path metric"
            }
            Kind::PathspaceCheck => {
                "path-space T_2 constants |sigma|^2/delta^2 and |sigma|^2/(2 delta) with their Poincare, Tsirelson and Girsanov consequences"
            }
        }
    }
}

/// One experiment. `params` is validated against the schema of `kind`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    /// Report file stem; defaults to the kind name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub params: Value,
    pub seed: u64,
    /// Output directory, overridden by `--out` and [`OUT_ENV`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| RunError::Schema(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path)
            .map_err(|e| RunError::Schema(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn stem(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.name().to_string())
    }

    fn validate(&self) -> Result<(), RunError> {
        if let Some(name) = &self.name {
            let ok = !name.is_empty()
                && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
                && !name.starts_with('.');
            if !ok {
                return Err(RunError::Schema(format!(
                    "name {name:?} must be nonempty and use only letters, digits, '_', '-' and '.'"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("numerical error: {0}")]
    Numerical(tcilab::Error),
    #[error("cannot write report: {0}")]
    Output(#[from] std::io::Error),
}

impl From<tcilab::Error> for RunError {
    /// Documents that fail to parse are schema violations; everything else the
    /// library reports is numerical.
    fn from(e: tcilab::Error) -> Self {
        match e {
            tcilab::Error::Parse(msg) => RunError::Schema(msg),
            other => RunError::Numerical(other),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Schema(_) => 2,
            RunError::Numerical(_) | RunError::Output(_) => 3,
        }
    }
}

/// A CSV detail table written next to the report.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub csv: String,
}

/// JSON summary of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub kind: Kind,
    pub claim: String,
    pub seed: u64,
    pub params: Value,
    pub values: Value,
    pub verdicts: BTreeMap<String, bool>,
    pub pass: bool,
}

/// What an experiment computed, before it is written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub values: Value,
    pub verdicts: BTreeMap<String, bool>,
    pub tables: Vec<Table>,
}

/// Paths written by [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct Written {
    pub report: Report,
    pub files: Vec<PathBuf>,
}

impl Written {
    pub fn exit_code(&self) -> i32 {
        if self.report.pass {
            0
        } else {
            1
        }
    }
}

/// Output directory: the command-line flag, then [`OUT_ENV`], then the
/// config's own `output`, then [`DEFAULT_OUT`].
pub fn resolve_out(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    config.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let file_name = path.file_name().and_then(|s| s.to_str()).unwrap_or("report");
    let tmp = dir.join(format!(".{file_name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

/// Runs one experiment and writes its report and tables under `out`.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<Written, RunError> {
    config.validate()?;
    let outcome = execute(config.kind, &config.params, config.seed)?;
    let stem = config.stem();
    let pass = outcome.verdicts.values().all(|v| *v);
    let report = Report {
        name: stem.clone(),
        kind: config.kind,
        claim: config.kind.claim().to_string(),
        seed: config.seed,
        params: config.params.clone(),
        values: outcome.values,
        verdicts: outcome.verdicts,
        pass,
    };
    let mut files = Vec::with_capacity(1 + outcome.tables.len());
    for t in &outcome.tables {
        let path = out.join(format!("{stem}.{}.csv", t.name));
        write_atomic(&path, t.csv.as_bytes())?;
        files.push(path);
    }
    let mut json = serde_json::to_string_pretty(&report).map_err(|e| RunError::Schema(e.to_string()))?;
    json.push('\n');
    let path = out.join(format!("{stem}.json"));
    write_atomic(&path, json.as_bytes())?;
    files.push(path);
    Ok(Written { report, files })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ManifestEntry {
    Path(PathBuf),
    Inline(Box<Value>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestDocument {
    experiments: Vec<ManifestEntry>,
}

/// A list of configs, inline or as paths relative to the manifest file.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub experiments: Vec<ExperimentConfig>,
}

impl Manifest {
    /// Parses `{"experiments": [...]}`; string entries are config paths resolved against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self, RunError> {
        let doc: ManifestDocument =
            serde_json::from_str(text).map_err(|e| RunError::Schema(format!("manifest: {e}")))?;
        if doc.experiments.is_empty() {
            return Err(RunError::Schema("manifest lists no experiments".into()));
        }
        let experiments = doc
            .experiments
            .into_iter()
            .enumerate()
            .map(|(i, e)| match e {
                ManifestEntry::Path(p) => ExperimentConfig::load(&base.join(p)),
                ManifestEntry::Inline(v) => {
                    let cfg: ExperimentConfig = serde_json::from_value(*v)
                        .map_err(|e| RunError::Schema(format!("manifest entry {i}: {e}")))?;
                    cfg.validate()?;
                    Ok(cfg)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut seen = BTreeMap::new();
        for (i, c) in experiments.iter().enumerate() {
            if let Some(j) = seen.insert(c.stem(), i) {
                return Err(RunError::Schema(format!(
                    "entries {j} and {i} both write reports named {:?}",
                    c.stem()
                )));
            }
        }
        Ok(Self { experiments })
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path)
            .map_err(|e| RunError::Schema(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    SchemaError,
    NumericalError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub name: String,
    pub kind: Kind,
    pub claim: String,
    pub status: Status,
    pub exit_code: i32,
    /// Failing verdicts or the error message.
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub rows: Vec<SuiteRow>,
    pub pass: bool,
    /// Names of the experiments that did not pass.
    pub culprits: Vec<String>,
    pub exit_code: i32,
}

impl SuiteReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,kind,status,exit_code,claim,detail\n");
        for r in &self.rows {
            let status = serde_json::to_value(r.status).ok();
            let status = status.as_ref().and_then(Value::as_str).unwrap_or("");
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                csv_field(&r.name),
                r.kind.name(),
                status,
                r.exit_code,
                csv_field(&r.claim),
                csv_field(&r.detail)
            ));
        }
        s
    }
}

pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Runs every experiment (in parallel), writes each report plus `suite.json`
/// and `suite.csv` under `out`.
///
/// The suite exit code is the largest child code: numerical errors outrank
/// schema errors, which outrank failed verdicts.
pub fn suite(manifest: &Manifest, out: &Path) -> Result<SuiteReport, RunError> {
    if manifest.experiments.is_empty() {
        return Err(RunError::Schema("manifest lists no experiments".into()));
    }
    let rows: Vec<SuiteRow> = manifest
        .experiments
        .par_iter()
        .map(|cfg| {
            let (status, code, detail) = match run(cfg, out) {
                Ok(w) if w.report.pass => (Status::Pass, 0, String::new()),
                Ok(w) => {
                    let failed: Vec<&str> = w
                        .report
                        .verdicts
                        .iter()
                        .filter(|(_, v)| !**v)
                        .map(|(k, _)| k.as_str())
                        .collect();
                    (Status::Fail, 1, format!("failed: {}", failed.join(" ")))
                }
                Err(e @ RunError::Schema(_)) => (Status::SchemaError, 2, e.to_string()),
                Err(e) => (Status::NumericalError, e.exit_code(), e.to_string()),
            };
            SuiteRow {
                name: cfg.stem(),
                kind: cfg.kind,
                claim: cfg.kind.claim().to_string(),
                status,
                exit_code: code,
                detail,
            }
        })
        .collect();
    let exit_code = rows.iter().map(|r| r.exit_code).max().unwrap_or(0);
    let culprits = rows.iter().filter(|r| r.status != Status::Pass).map(|r| r.name.clone()).collect();
    let report = SuiteReport {
        pass: exit_code == 0,
        rows,
        culprits,
        exit_code,
    };
    let mut json = serde_json::to_string_pretty(&report).map_err(|e| RunError::Schema(e.to_string()))?;
    json.push('\n');
    write_atomic(&out.join("suite.json"), json.as_bytes())?;
    write_atomic(&out.join("suite.csv"), report.to_csv().as_bytes())?;
    Ok(report)
}
