//! Grid scans of the mean-field phase diagram over level energies.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{order_parameter, CrossingOptions, Phase};
use crate::analysis::{trace_boundary, BoundaryTrace};
use crate::error::{Error, Result};
use crate::meanfield::tclass_criticality_order;
use crate::model::AtomModel;

/// A tunable level energy `h_kk`, stored as the 0-based level index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HParam(usize);

impl HParam {
    pub fn new(index: usize) -> Self {
        HParam(index)
    }

    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for HParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = self.0 + 1;
        if k < 10 {
            write!(f, "h{k}{k}")
        } else {
            write!(f, "h_{k}")
        }
    }
}

impl FromStr for HParam {
    type Err = Error;

    /// Accepts `h22`, `h_2` and `h2` (1-based level labels, level 1 is fixed).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unknown parameter '{s}', expected e.g. h22"));
        let digits = s.strip_prefix('h').ok_or_else(bad)?;
        let digits = digits.strip_prefix('_').unwrap_or(digits);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let half = digits.len() / 2;
        let k: usize = if digits.len() % 2 == 0 && digits[..half] == digits[half..] {
            digits[..half].parse().map_err(|_| bad())?
        } else {
            digits.parse().map_err(|_| bad())?
        };
        if k < 2 {
            return Err(Error::Parse(format!(
                "'{s}': h11 is pinned to zero and cannot be scanned"
            )));
        }
        Ok(HParam(k - 1))
    }
}

impl Serialize for HParam {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for HParam {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanAxis {
    pub param: HParam,
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl ScanAxis {
    pub fn value(&self, i: usize) -> f64 {
        if self.points <= 1 {
            self.start
        } else {
            self.start + (self.end - self.start) * i as f64 / (self.points - 1) as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub axes: Vec<ScanAxis>,
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
    pub mem_cap_mb: usize,
    pub crossing: CrossingOptions,
}

impl ScanSpec {
    pub fn new(axes: Vec<ScanAxis>) -> Self {
        ScanSpec {
            axes,
            workers: None,
            mem_cap_mb: 1024,
            crossing: CrossingOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub coords: Vec<f64>,
    pub phi_star: f64,
    pub energy: f64,
    pub phase: Phase,
    /// Multicritical order from the closed-form T-class conditions
    /// (`None` for non-T-class models, 1 when not critical).
    pub multicritical_order: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanResult {
    pub model: AtomModel,
    pub kappa: f64,
    pub axes: Vec<ScanAxis>,
    /// Row-major: the last axis varies fastest.
    pub points: Vec<ScanPoint>,
    pub boundary: Option<BoundaryTrace>,
    pub crossing: CrossingOptions,
}

impl ScanResult {
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.points).collect()
    }

    pub fn point(&self, idx: &[usize]) -> &ScanPoint {
        let mut flat = 0;
        for (a, &i) in self.axes.iter().zip(idx) {
            flat = flat * a.points + i;
        }
        &self.points[flat]
    }

    pub fn model_at(&self, coords: &[f64]) -> AtomModel {
        let mut m = self.model.clone();
        for (a, &x) in self.axes.iter().zip(coords) {
            m = m.with_h(a.param.index(), x);
        }
        m
    }
}

pub(crate) fn tclass_tolerance() -> f64 {
    1e-9
}

/// Solves the mean-field problem on every grid point; 2-D scans also get a
/// traced and classified phase boundary.
pub fn scan_phase_diagram(model: &AtomModel, kappa: f64, spec: &ScanSpec) -> Result<ScanResult> {
    if spec.axes.is_empty() || spec.axes.len() > 3 {
        return Err(Error::InvalidArgument(format!(
            "scans take 1 to 3 axes, got {}",
            spec.axes.len()
        )));
    }
    for a in &spec.axes {
        if a.param.index() == 0 || a.param.index() >= model.levels() {
            return Err(Error::InvalidArgument(format!(
                "parameter {} does not exist in a {}-level model",
                a.param,
                model.levels()
            )));
        }
        if a.points == 0 {
            return Err(Error::InvalidArgument(format!("axis {} has no points", a.param)));
        }
    }
    let total: usize = spec.axes.iter().map(|a| a.points).product();
    let bytes = total as f64
        * (std::mem::size_of::<ScanPoint>() + 8 * spec.axes.len()) as f64;
    let requested_mb = bytes / (1024.0 * 1024.0);
    if requested_mb > spec.mem_cap_mb as f64 {
        return Err(Error::MemoryCap {
            requested_mb,
            cap_mb: spec.mem_cap_mb,
        });
    }

    let tclass = model.as_tclass();
    let shape: Vec<usize> = spec.axes.iter().map(|a| a.points).collect();
    let eval = |flat: usize| -> Result<ScanPoint> {
        let mut rem = flat;
        let mut coords = vec![0.0; shape.len()];
        for (ax, n) in shape.iter().enumerate().rev() {
            coords[ax] = spec.axes[ax].value(rem % n);
            rem /= n;
        }
        let mut m = model.clone();
        for (a, &x) in spec.axes.iter().zip(&coords) {
            m = m.with_h(a.param.index(), x);
        }
        let sol = order_parameter(&m, kappa)?;
        let multicritical_order = tclass.as_ref().map(|t| {
            let mut t = t.clone();
            for (a, &x) in spec.axes.iter().zip(&coords) {
                t = t.with_h(a.param.index(), x);
            }
            tclass_criticality_order(&t, kappa, tclass_tolerance())
        });
        Ok(ScanPoint {
            coords,
            phi_star: sol.phi_star,
            energy: sol.energy,
            phase: sol.phase,
            multicritical_order,
        })
    };
    let run = || -> Result<Vec<ScanPoint>> { (0..total).into_par_iter().map(eval).collect() };
    let points = match spec.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    let mut result = ScanResult {
        model: model.clone(),
        kappa,
        axes: spec.axes.clone(),
        points,
        boundary: None,
        crossing: spec.crossing,
    };
    if spec.axes.len() == 2 {
        let trace = match spec.workers {
            Some(w) => rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?
                .install(|| trace_boundary(&result))?,
            None => trace_boundary(&result)?,
        };
        result.boundary = Some(trace);
    }
    Ok(result)
}
