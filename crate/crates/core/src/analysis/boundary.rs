//! Marching-squares extraction of the normal/superradiant boundary from a
//! 2-D scan, with every edge crossing refined by bisection.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::{order_parameter, refine_crossing, Crossing, Phase, ScanResult, TransitionOrder};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracedCrossing {
    /// Location in scan coordinates `(axis0, axis1)`.
    pub point: [f64; 2],
    pub crossing: Crossing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySegment {
    /// Indices into [`BoundaryTrace::crossings`].
    pub from: usize,
    pub to: usize,
    pub order: TransitionOrder,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTrace {
    pub crossings: Vec<TracedCrossing>,
    pub segments: Vec<BoundarySegment>,
}

impl BoundaryTrace {
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

/// Grid edge: `(axis, i, j)` joins node `(i, j)` with its neighbour along `axis`.
type Edge = (usize, usize, usize);

pub fn trace_boundary(scan: &ScanResult) -> Result<BoundaryTrace> {
    if scan.axes.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "boundary tracing needs a 2-D scan, got {} axes",
            scan.axes.len()
        )));
    }
    let (n0, n1) = (scan.axes[0].points, scan.axes[1].points);
    let sr = |i: usize, j: usize| scan.point(&[i, j]).phase == Phase::Superradiant;

    let mut edges: Vec<Edge> = Vec::new();
    for i in 0..n0 {
        for j in 0..n1 {
            if i + 1 < n0 && sr(i, j) != sr(i + 1, j) {
                edges.push((0, i, j));
            }
            if j + 1 < n1 && sr(i, j) != sr(i, j + 1) {
                edges.push((1, i, j));
            }
        }
    }

    let refine = |&(axis, i, j): &Edge| -> Result<TracedCrossing> {
        let (k, l) = if axis == 0 { (i + 1, j) } else { (i, j + 1) };
        let (start, end) = if sr(i, j) { ((k, l), (i, j)) } else { ((i, j), (k, l)) };
        let p_normal = scan.point(&[start.0, start.1]);
        let p_sr = scan.point(&[end.0, end.1]);
        let model = scan.model_at(&p_normal.coords);
        let crossing = refine_crossing(
            &model,
            scan.kappa,
            scan.axes[axis].param,
            p_normal.coords[axis],
            p_sr.coords[axis],
            &scan.crossing,
        )?;
        let mut point = [p_normal.coords[0], p_normal.coords[1]];
        point[axis] = crossing.value;
        Ok(TracedCrossing { point, crossing })
    };
    let crossings: Vec<TracedCrossing> = edges.par_iter().map(refine).collect::<Result<_>>()?;
    let index: BTreeMap<Edge, usize> = edges.iter().enumerate().map(|(k, e)| (*e, k)).collect();

    let mut segments = Vec::new();
    let mut link = |a: Edge, b: Edge| {
        let (from, to) = (index[&a], index[&b]);
        let (ca, cb) = (&crossings[from].crossing, &crossings[to].crossing);
        let order = if ca.order == cb.order || ca.jump >= cb.jump {
            ca.order
        } else {
            cb.order
        };
        segments.push(BoundarySegment { from, to, order });
    };
    for i in 0..n0.saturating_sub(1) {
        for j in 0..n1.saturating_sub(1) {
            let bottom = (0, i, j);
            let top = (0, i, j + 1);
            let left = (1, i, j);
            let right = (1, i + 1, j);
            let cut: Vec<Edge> = [bottom, right, top, left]
                .into_iter()
                .filter(|e| index.contains_key(e))
                .collect();
            match cut.len() {
                0 => {}
                2 => link(cut[0], cut[1]),
                4 => {
                    // saddle: resolve with the phase at the cell centre
                    let c0 = [scan.axes[0].value(i), scan.axes[1].value(j)];
                    let c1 = [scan.axes[0].value(i + 1), scan.axes[1].value(j + 1)];
                    let centre = [(c0[0] + c1[0]) / 2.0, (c0[1] + c1[1]) / 2.0];
                    let centre_sr =
                        order_parameter(&scan.model_at(&centre), scan.kappa)?.phase == Phase::Superradiant;
                    if centre_sr == sr(i, j) {
                        link(bottom, right);
                        link(left, top);
                    } else {
                        link(bottom, left);
                        link(right, top);
                    }
                }
                _ => unreachable!("a grid cell has an even number of sign changes"),
            }
        }
    }
    Ok(BoundaryTrace {
        crossings,
        segments,
    })
}

/// Refined phase changes between neighbouring points of a 1-D scan.
pub fn line_crossings(scan: &ScanResult) -> Result<Vec<Crossing>> {
    if scan.axes.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "line crossings need a 1-D scan, got {} axes",
            scan.axes.len()
        )));
    }
    let sr = |p: &crate::meanfield::ScanPoint| p.phase == Phase::Superradiant;
    let pairs: Vec<usize> = (0..scan.points.len().saturating_sub(1))
        .filter(|&i| sr(&scan.points[i]) != sr(&scan.points[i + 1]))
        .collect();
    pairs
        .par_iter()
        .map(|&i| {
            let (a, b) = (&scan.points[i], &scan.points[i + 1]);
            let (normal, super_) = if sr(a) { (b, a) } else { (a, b) };
            refine_crossing(
                &scan.model_at(&normal.coords),
                scan.kappa,
                scan.axes[0].param,
                normal.coords[0],
                super_.coords[0],
                &scan.crossing,
            )
        })
        .collect()
}
