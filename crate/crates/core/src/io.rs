//! Model files, content hashes and the CSV/JSON tables emitted by the CLI.
//!
//! Every table carries a metadata block (tool, code version, config and
//! model hashes) and nothing time-dependent, so identical inputs give
//! byte-identical files.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::SensitivityReport;
use crate::ed::{CriticalEntropy, CutoffReport};
use crate::error::{Error, Result};
use crate::fluctuations::{depletion_warning, FluctuationInput, FluctuationSpectrum};
use crate::meanfield::{Crossing, ScanResult, TransitionOrder};
use crate::model::{infer_parity, validate, AtomModel, ModelParams, Parity, TClassModel, ValidationReport, Violation};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const TOOL: &str = "mcdicke";

/// A dipole entry: a real number or `[re, im]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    fn value(self) -> Complex64 {
        match self {
            Entry::Real(x) => Complex64::new(x, 0.0),
            Entry::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

fn one() -> f64 {
    1.0
}

/// On-disk model description (JSON or TOML).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub levels: usize,
    pub h_diag: Vec<f64>,
    /// Dense, row-major.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_matrix: Option<Vec<Vec<Entry>>>,
    /// `|d_{k,k-1}|`, `k = 2..=l`; excludes `d_matrix`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_class_couplings: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub omega: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    /// `+1`/`-1` per level; inferred from the coupling graph when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parity_signs: Option<Vec<i32>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Toml,
}

impl ModelFile {
    pub fn parse(text: &str, format: Format) -> Result<Self> {
        match format {
            Format::Json => serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string())),
            Format::Toml => toml::from_str(text).map_err(|e| Error::Parse(e.to_string())),
        }
    }

    /// Builds and validates the model; every violation is reported at once.
    pub fn build(&self) -> Result<(AtomModel, ModelParams)> {
        let l = self.levels;
        let mut violations = Vec::new();
        if self.h_diag.len() != l {
            violations.push(Violation::ShapeMismatch {
                what: "h_diag",
                expected: l,
                found: self.h_diag.len(),
            });
        }
        let d = match (&self.d_matrix, &self.t_class_couplings) {
            (Some(_), Some(_)) => {
                return Err(Error::Parse(
                    "d_matrix and t_class_couplings are mutually exclusive".into(),
                ))
            }
            (None, None) => return Err(Error::Parse("one of d_matrix or t_class_couplings is required".into())),
            (Some(rows), None) => {
                if rows.len() != l || rows.iter().any(|r| r.len() != l) {
                    violations.push(Violation::ShapeMismatch {
                        what: "d_matrix",
                        expected: l,
                        found: rows.iter().map(Vec::len).chain([rows.len()]).find(|&n| n != l).unwrap_or(l),
                    });
                    None
                } else {
                    Some(DMatrix::from_fn(l, l, |i, j| rows[i][j].value()))
                }
            }
            (None, Some(c)) => {
                if c.len() + 1 != l {
                    violations.push(Violation::ShapeMismatch {
                        what: "t_class_couplings",
                        expected: l.saturating_sub(1),
                        found: c.len(),
                    });
                    None
                } else {
                    let mut d = DMatrix::zeros(l, l);
                    for (k, &x) in c.iter().enumerate() {
                        d[(k + 1, k)] = Complex64::new(x, 0.0);
                        d[(k, k + 1)] = Complex64::new(x, 0.0);
                    }
                    Some(d)
                }
            }
        };
        if !violations.is_empty() {
            return Err(Error::InvalidModel(ValidationReport { violations }));
        }
        let d = d.expect("shape checked");
        let parity = match &self.parity_signs {
            Some(signs) => signs
                .iter()
                .map(|&s| Parity::from_sign(s).ok_or_else(|| Error::Parse(format!("parity sign {s} is not +1 or -1"))))
                .collect::<Result<Vec<_>>>()?,
            None if self.t_class_couplings.is_some() => (0..l)
                .map(|k| if k % 2 == 0 { Parity::Even } else { Parity::Odd })
                .collect(),
            // a non-bipartite graph has no parity; validation then reports the offending couplings
            None => infer_parity(&d).unwrap_or_else(|| vec![Parity::Even; l]),
        };
        let model = AtomModel::new(self.h_diag.clone(), d, parity);
        let report = validate(&model);
        if !report.is_valid() {
            return Err(Error::InvalidModel(report));
        }
        let params = ModelParams::new(self.omega, self.kappa)?;
        Ok((model, params))
    }

    /// Dense-matrix description of a model.
    pub fn from_model(model: &AtomModel, params: &ModelParams) -> Self {
        let l = model.levels();
        let rows = (0..l)
            .map(|i| {
                (0..l)
                    .map(|j| {
                        let z = model.d(i, j);
                        if z.im == 0.0 {
                            Entry::Real(z.re)
                        } else {
                            Entry::Complex([z.re, z.im])
                        }
                    })
                    .collect()
            })
            .collect();
        ModelFile {
            levels: l,
            h_diag: model.h_diag().to_vec(),
            d_matrix: Some(rows),
            t_class_couplings: None,
            omega: params.omega(),
            kappa: params.kappa(),
            parity_signs: Some(model.parity().iter().map(|p| p.sign()).collect()),
        }
    }

    pub fn from_tclass(model: &TClassModel, params: &ModelParams) -> Self {
        ModelFile {
            levels: model.levels(),
            h_diag: model.h_diag.clone(),
            d_matrix: None,
            t_class_couplings: Some(model.couplings.clone()),
            omega: params.omega(),
            kappa: params.kappa(),
            parity_signs: None,
        }
    }
}

/// Reads a model file; `.toml` files are TOML, everything else JSON.
pub fn load_model(path: &Path) -> Result<(AtomModel, ModelParams, ModelFile)> {
    let text = std::fs::read_to_string(path)?;
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => Format::Toml,
        _ => Format::Json,
    };
    let file = ModelFile::parse(&text, format)?;
    let (model, params) = file.build()?;
    Ok((model, params, file))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the model's canonical dense description; independent of how the
/// file spelled it.
pub fn model_hash(model: &AtomModel, params: &ModelParams) -> String {
    let canonical = serde_json::to_string(&ModelFile::from_model(model, params)).expect("serializable");
    sha256_hex(canonical.as_bytes())
}

/// Hash of a configuration value; object keys are serialized sorted.
pub fn config_hash(config: &serde_json::Value) -> String {
    sha256_hex(serde_json::to_string(config).expect("serializable").as_bytes())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub code_version: String,
    pub subcommand: String,
    pub config_hash: String,
    pub model_hash: Option<String>,
    pub seed: u64,
    /// The resolved configuration the hash was taken of.
    pub config: serde_json::Value,
}

impl Metadata {
    pub fn new(subcommand: &str, config: &serde_json::Value, model_hash: Option<String>, seed: u64) -> Self {
        Metadata {
            tool: TOOL.into(),
            code_version: CODE_VERSION.into(),
            subcommand: subcommand.into(),
            config_hash: config_hash(config),
            model_hash,
            seed,
            config: config.clone(),
        }
    }

    fn lines(&self) -> Vec<(String, String)> {
        vec![
            ("tool".into(), self.tool.clone()),
            ("code_version".into(), self.code_version.clone()),
            ("subcommand".into(), self.subcommand.clone()),
            ("config_hash".into(), self.config_hash.clone()),
            ("model_hash".into(), self.model_hash.clone().unwrap_or_default()),
            ("seed".into(), self.seed.to_string()),
            ("config".into(), self.config.to_string()),
        ]
    }
}

/// Shortest round-trip formatting, exponent form for very small or large
/// magnitudes; infinities as `inf`/`-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:?}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// A rectangular table of pre-formatted cells.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// CSV with `# key: value` metadata lines in front.
    pub fn to_csv(&self, meta: &Metadata) -> Result<String> {
        let mut out = String::new();
        for (k, v) in meta.lines() {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(|e| Error::Parse(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| Error::Parse(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        out.push_str(&String::from_utf8(bytes).expect("utf-8 cells"));
        Ok(out)
    }

    /// JSON `{ "metadata": ..., "records": [ {column: cell, ...}, ... ] }`;
    /// numeric cells become JSON numbers, infinities stay strings.
    pub fn to_json(&self, meta: &Metadata) -> String {
        let records: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| {
                let obj: serde_json::Map<String, serde_json::Value> = self
                    .header
                    .iter()
                    .zip(r)
                    .map(|(h, c)| (h.clone(), json_cell(c)))
                    .collect();
                serde_json::Value::Object(obj)
            })
            .collect();
        let doc = serde_json::json!({ "metadata": meta, "records": records });
        serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
    }
}

fn json_cell(c: &str) -> serde_json::Value {
    if c.is_empty() {
        return serde_json::Value::Null;
    }
    match c {
        "true" => return serde_json::Value::Bool(true),
        "false" => return serde_json::Value::Bool(false),
        _ => {}
    }
    if let Ok(i) = c.parse::<i64>() {
        return i.into();
    }
    match c.parse::<f64>() {
        Ok(x) if x.is_finite() => serde_json::Number::from_f64(x).map_or_else(|| c.into(), Into::into),
        _ => c.into(),
    }
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn write_table(dir: &Path, stem: &str, table: &Table, meta: &Metadata) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{stem}.csv")), table.to_csv(meta)?)?;
    std::fs::write(dir.join(format!("{stem}.json")), table.to_json(meta))?;
    Ok(())
}

/// Reads a CSV written by [`Table::to_csv`], skipping metadata lines.
pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path)?;
    read_table_str(&text)
}

pub fn read_table_str(text: &str) -> Result<Table> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok(Table { header, rows })
}

impl Table {
    /// Column values by header name.
    pub fn column(&self, name: &str) -> Result<Vec<&str>> {
        let k = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[k].as_str()).collect())
    }

    /// Rows as maps from column name to cell.
    pub fn records(&self) -> Vec<BTreeMap<&str, &str>> {
        self.rows
            .iter()
            .map(|r| self.header.iter().map(String::as_str).zip(r.iter().map(String::as_str)).collect())
            .collect()
    }
}

pub fn parse_f64(cell: &str) -> Result<f64> {
    match cell {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => cell.parse().map_err(|_| Error::Parse(format!("not a number: `{cell}`"))),
    }
}

/// Grid of a mean-field scan: one row per point, last axis fastest.
pub fn scan_table(scan: &ScanResult) -> Table {
    let mut header: Vec<String> = scan.axes.iter().map(|a| a.param.to_string()).collect();
    header.extend(["phi_star", "energy", "phase", "multicritical_order"].map(String::from));
    let mut t = Table::new(header);
    for p in &scan.points {
        let mut row: Vec<String> = p.coords.iter().map(|&x| fmt_f64(x)).collect();
        row.push(fmt_f64(p.phi_star));
        row.push(fmt_f64(p.energy));
        row.push(p.phase.as_str().into());
        row.push(p.multicritical_order.map(|o| o.to_string()).unwrap_or_default());
        t.push(row);
    }
    t
}

fn order_label(o: TransitionOrder) -> &'static str {
    match o {
        TransitionOrder::FirstOrder => "first",
        TransitionOrder::SecondOrder => "second",
    }
}

/// Refined boundary crossings and the segments joining them.
pub fn boundary_tables(scan: &ScanResult) -> Option<(Table, Table)> {
    let trace = scan.boundary.as_ref()?;
    let a0 = scan.axes[0].param.to_string();
    let a1 = scan.axes[1].param.to_string();
    let mut crossings = Table::new(["id".to_string(), a0, a1, "param".into(), "jump".into(), "order".into(), "criticality".into()]);
    for (k, c) in trace.crossings.iter().enumerate() {
        crossings.push(vec![
            k.to_string(),
            fmt_f64(c.point[0]),
            fmt_f64(c.point[1]),
            c.crossing.param.to_string(),
            fmt_f64(c.crossing.jump),
            order_label(c.crossing.order).into(),
            c.crossing.criticality.map(|n| n.to_string()).unwrap_or_default(),
        ]);
    }
    let mut segments = Table::new(["from", "to", "order"]);
    for s in &trace.segments {
        segments.push(vec![s.from.to_string(), s.to.to_string(), order_label(s.order).into()]);
    }
    Some((crossings, segments))
}

/// Crossings of a 1-D scan, in the layout of [`boundary_tables`].
pub fn line_crossing_table(scan: &ScanResult, crossings: &[Crossing]) -> Table {
    let mut t = Table::new([
        "id".to_string(),
        scan.axes[0].param.to_string(),
        "param".into(),
        "jump".into(),
        "order".into(),
        "criticality".into(),
    ]);
    for (k, c) in crossings.iter().enumerate() {
        t.push(vec![
            k.to_string(),
            fmt_f64(c.value),
            c.param.to_string(),
            fmt_f64(c.jump),
            order_label(c.order).into(),
            c.criticality.map(|n| n.to_string()).unwrap_or_default(),
        ]);
    }
    t
}

/// Header of [`fluct_row`] for the given coordinate names.
pub fn fluct_header(coords: &[String]) -> Vec<String> {
    let mut h = coords.to_vec();
    h.extend(
        [
            "phi_star", "valid", "lambdas", "gap", "gamma", "entropy", "photon_fluct", "depletion", "depletion_warning",
            "dark_modes",
        ]
        .map(String::from),
    );
    h
}

/// One fluctuation record; `lambdas` is `;`-separated, the warning uses `atoms`.
pub fn fluct_row(coords: &[f64], input: &FluctuationInput, spec: &FluctuationSpectrum, atoms: Option<f64>) -> Vec<String> {
    let mut row: Vec<String> = coords.iter().map(|&x| fmt_f64(x)).collect();
    row.push(fmt_f64(input.phi_star));
    row.push(spec.valid.to_string());
    let lambdas = if spec.valid {
        spec.lambdas.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>()
    } else {
        spec.lambda_sq.iter().map(|&x| format!("{}i", fmt_f64((-x).max(0.0).sqrt()))).take(1)
            .chain(spec.lambda_sq.iter().skip(1).map(|&x| fmt_f64(x.max(0.0).sqrt())))
            .collect()
    };
    row.push(lambdas.join(";"));
    row.push(fmt_opt(spec.gap));
    row.push(fmt_opt(spec.gamma));
    row.push(fmt_opt(spec.entropy));
    row.push(fmt_opt(spec.photon_fluct));
    row.push(fmt_opt(spec.depletion));
    row.push(atoms.map(|n| depletion_warning(spec, n).to_string()).unwrap_or_default());
    row.push(input.dark_modes.len().to_string());
    row
}

pub fn ed_header(coords: &[String]) -> Vec<String> {
    let mut h = coords.to_vec();
    h.extend(
        [
            "N", "n_max", "certified", "e0", "e1", "gap", "ground_parity", "entropy", "photon_number", "cutoff_weight",
            "max_residual", "cutoffs_tried",
        ]
        .map(String::from),
    );
    h
}

pub fn ed_row(coords: &[f64], report: &CutoffReport) -> Vec<String> {
    let r = &report.result;
    let mut row: Vec<String> = coords.iter().map(|&x| fmt_f64(x)).collect();
    row.push(r.atoms.to_string());
    row.push(r.n_max.to_string());
    row.push(report.converged.to_string());
    row.push(fmt_f64(r.e0));
    row.push(fmt_opt(r.e1));
    row.push(fmt_opt(r.gap));
    row.push(r.ground_parity.map(|p| p.sign().to_string()).unwrap_or_default());
    row.push(fmt_f64(r.entropy));
    row.push(fmt_f64(r.photon_number));
    row.push(fmt_f64(r.cutoff_weight));
    row.push(fmt_f64(r.residuals.iter().cloned().fold(0.0, f64::max)));
    row.push(report.steps.iter().map(|s| s.n_max.to_string()).collect::<Vec<_>>().join(";"));
    row
}

pub const CRIT_ENTROPY_COLUMNS: [&str; 8] =
    ["order", "N", "param", "h22_star", "S_cri", "n_max_used", "certified", "unimodal"];

/// Critical-entropy rows; `order` labels the model for the scaling fit.
pub fn crit_entropy_table(order: usize, rows: &[CriticalEntropy], param: &str) -> Table {
    let mut t = Table::new(CRIT_ENTROPY_COLUMNS);
    for r in rows {
        t.push(vec![
            order.to_string(),
            r.atoms.to_string(),
            param.into(),
            fmt_f64(r.h_star),
            fmt_f64(r.s_cri),
            r.n_max.to_string(),
            r.certified.to_string(),
            r.unimodal.to_string(),
        ]);
    }
    t
}

/// `(order, N, S_cri)` of every certified row of a critical-entropy table.
pub fn certified_points(t: &Table) -> Result<Vec<(usize, f64, f64)>> {
    let orders = t.column("order")?;
    let ns = t.column("N")?;
    let s = t.column("S_cri")?;
    let cert = t.column("certified")?;
    let mut out = Vec::new();
    for i in 0..t.rows.len() {
        if cert[i] != "true" {
            continue;
        }
        let order = orders[i].parse().map_err(|_| Error::Parse(format!("bad order `{}`", orders[i])))?;
        out.push((order, parse_f64(ns[i])?, parse_f64(s[i])?));
    }
    Ok(out)
}

/// The scaling-fit table: one row per order, with the upper-window refit.
pub fn table1(rows: &[(usize, SensitivityReport)]) -> Table {
    let mut t = Table::new([
        "order", "s0", "s1", "se_s0", "se_s1", "N_min", "N_max", "points", "R2", "s1_upper", "s1_shift",
    ]);
    for (order, rep) in rows {
        let f = &rep.full;
        t.push(vec![
            order.to_string(),
            fmt_f64(f.s0),
            fmt_f64(f.s1),
            fmt_f64(f.se_s0),
            fmt_f64(f.se_s1),
            fmt_f64(f.n_window.0),
            fmt_f64(f.n_window.1),
            f.residuals.len().to_string(),
            fmt_f64(f.r_squared),
            fmt_opt(rep.upper.as_ref().map(|u| u.s1)),
            fmt_opt(rep.s1_shift()),
        ]);
    }
    t
}
