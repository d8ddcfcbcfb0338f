//! Locating and classifying a single normal/superradiant crossing.

use serde::{Deserialize, Serialize};

use super::{order_parameter, HParam, Phase, TransitionOrder};
use crate::error::{Error, Result};
use crate::model::AtomModel;

/// Order-parameter jump above which a crossing counts as first order.
pub const JUMP_THRESHOLD: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingOptions {
    /// Distance from the boundary at which the jump is read off.
    pub width: f64,
    pub jump_threshold: f64,
    /// Second, closer probe used to tell a steep continuous onset from a jump.
    pub near_width: f64,
}

impl Default for CrossingOptions {
    fn default() -> Self {
        CrossingOptions {
            width: 1e-8,
            jump_threshold: JUMP_THRESHOLD,
            near_width: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub param: HParam,
    /// Boundary location in the bisected parameter.
    pub value: f64,
    /// `phi*` at `width` inside the superradiant side.
    pub jump: f64,
    pub order: TransitionOrder,
    /// For continuous crossings, the multicritical order implied by the
    /// onset exponent `phi ~ t^(1/(2(n-1)))` (2 = ordinary, 3 = tricritical).
    pub criticality: Option<usize>,
}

fn phase_at(model: &AtomModel, kappa: f64, param: HParam, x: f64) -> Result<(Phase, f64)> {
    let s = order_parameter(&model.with_h(param.index(), x), kappa)?;
    Ok((s.phase, s.phi_star))
}

/// Bisects between a normal-phase value and a superradiant value of `param`
/// and classifies the crossing.
///
/// The boundary is located to about `1e-13` relative; the jump is `phi*` at
/// `width` into the superradiant side. A jump above threshold that does not
/// shrink when probed at `near_width` is first order; a continuous onset
/// shrinks as a power of the distance.
pub fn refine_crossing(
    model: &AtomModel,
    kappa: f64,
    param: HParam,
    normal_at: f64,
    superradiant_at: f64,
    opts: &CrossingOptions,
) -> Result<Crossing> {
    let (pa, _) = phase_at(model, kappa, param, normal_at)?;
    let (pb, _) = phase_at(model, kappa, param, superradiant_at)?;
    if pa != Phase::Normal || pb != Phase::Superradiant {
        return Err(Error::NoBoundary);
    }
    let (mut a, mut b) = (normal_at, superradiant_at);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b || (b - a).abs() <= 1e-13 * a.abs().max(1.0) {
            break;
        }
        if phase_at(model, kappa, param, mid)?.0 == Phase::Normal {
            a = mid;
        } else {
            b = mid;
        }
    }
    let value = 0.5 * (a + b);
    let dir = (superradiant_at - normal_at).signum();
    let (_, far) = phase_at(model, kappa, param, b + dir * opts.width)?;
    let (_, near) = phase_at(model, kappa, param, b + dir * opts.near_width)?;
    let shrink = if far > 0.0 { near / far } else { 0.0 };
    let order = if far > opts.jump_threshold && shrink > 0.8 {
        TransitionOrder::FirstOrder
    } else {
        TransitionOrder::SecondOrder
    };
    let criticality = match order {
        TransitionOrder::SecondOrder if near > 0.0 && far > near => {
            let beta = (far / near).ln() / (opts.width / opts.near_width).ln();
            Some((1.0 + 1.0 / (2.0 * beta)).round() as usize)
        }
        _ => None,
    };
    Ok(Crossing {
        param,
        value,
        jump: far,
        order,
        criticality,
    })
}
