//! Exact sampler of the independent-increment chain `(Y_i, S_i)` that the
//! transformed paths follow in law.
//!
//! In the strip the waiting time has tail
//! `P(T > v) = exp{−(c_n/A²) v² / (A + v/n)²}` on `v < L_n(s)`, with
//! `A = 1 + s/n`. Writing `q = √(E/c_n)` for a unit exponential `E`, the
//! exponent equals `E` exactly when `v = q A² / (1 − q A / n)`. Beyond `τn`
//! the extended law has tail `exp{−a_n v²}` capped at `L_n(τn)`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ModelParams, PlanarPoint};
use crate::path::PathPolyline;

/// Which increment law governs times at or beyond `τn`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainLaw {
    /// The strip formula everywhere, checked only against its own
    /// definedness guard. Used when a chain must overshoot `τn` slightly.
    Strip,
    /// Strip formula below `τn`, the homogeneous extended law from there on.
    Extended,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncrementSample {
    pub t: f64,
    pub x: f64,
    /// `T` sits on the truncation atom, in which case `x = 0`.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub y: f64,
    pub s: f64,
    pub params: ModelParams,
    pub step_index: u64,
}

impl ChainState {
    pub fn new(y: f64, s: f64, params: ModelParams) -> Self {
        Self { y, s, params, step_index: 0 }
    }

    pub fn point(&self) -> PlanarPoint {
        PlanarPoint::new(self.y, self.s)
    }
}

/// Truncation depth in force at time `s` under `law`.
pub fn truncation_depth(s: f64, params: &ModelParams, law: ChainLaw) -> f64 {
    match law {
        ChainLaw::Extended if s >= params.tau() * params.n => params.l_n(params.tau() * params.n),
        _ => params.l_n(s),
    }
}

/// Half-opening of the increment cone at time `s`: `|X| ≤ slope · T`.
pub fn cone_slope(s: f64, params: &ModelParams, law: ChainLaw) -> f64 {
    let s = match law {
        ChainLaw::Extended => s.min(params.tau() * params.n),
        ChainLaw::Strip => s,
    };
    params.c_n(s) / (1.0 + s / params.n)
}

/// Strip waiting time for the exponential variate `e`, returning the value
/// and the truncation flag.
pub fn strip_time_from_exp(e: f64, s: f64, params: &ModelParams) -> (f64, bool) {
    let a = 1.0 + s / params.n;
    let cap = params.l_n(s);
    let q = (e / params.c_n(s)).sqrt();
    let den = 1.0 - q * a / params.n;
    if den <= 0.0 {
        return (cap, true);
    }
    let v = q * a * a / den;
    if v >= cap {
        (cap, true)
    } else {
        (v, false)
    }
}

/// Tail exponent `g(v) = (c_n/A²) v² / (A + v/n)²` of the strip law.
pub fn strip_tail_exponent(v: f64, s: f64, params: &ModelParams) -> f64 {
    let a = 1.0 + s / params.n;
    params.c_n(s) / (a * a) * v * v / (1.0 + (s + v) / params.n).powi(2)
}

/// Extended waiting time `min(√(e/a_n), L_n(τn))`.
pub fn extended_time_from_exp(e: f64, params: &ModelParams) -> (f64, bool) {
    let cap = params.l_n(params.tau() * params.n);
    let v = (e / params.a_n()).sqrt();
    if v >= cap {
        (cap, true)
    } else {
        (v, false)
    }
}

/// Exact draw of the strip waiting time at `s < τn`.
pub fn sample_t<R: Rng + ?Sized>(s: f64, params: &ModelParams, rng: &mut R) -> Result<(f64, bool)> {
    if !(s >= 0.0 && s < params.tau() * params.n) || !params.strip_guard_ok(s) {
        return Err(Error::DomainViolation(format!("time {s} outside the strip regime")));
    }
    Ok(strip_time_from_exp(Exp1.sample(rng), s, params))
}

/// Exact draw of the extended waiting time at `s ≥ τn`.
pub fn sample_t_extended<R: Rng + ?Sized>(s: f64, params: &ModelParams, rng: &mut R) -> Result<(f64, bool)> {
    if !(s >= params.tau() * params.n) {
        return Err(Error::DomainViolation(format!("time {s} is below the extended regime")));
    }
    Ok(extended_time_from_exp(Exp1.sample(rng), params))
}

/// One increment `(X, T)` drawn at time `s`.
pub fn sample_increment<R: Rng + ?Sized>(s: f64, params: &ModelParams, law: ChainLaw, rng: &mut R) -> Result<IncrementSample> {
    let e: f64 = Exp1.sample(rng);
    let u = 2.0 * rng.random::<f64>() - 1.0;
    let extended = law == ChainLaw::Extended && s >= params.tau() * params.n;
    let (t, truncated) = if extended {
        extended_time_from_exp(e, params)
    } else {
        if !params.strip_guard_ok(s) {
            return Err(Error::DomainViolation(format!("strip law undefined at time {s}")));
        }
        strip_time_from_exp(e, s, params)
    };
    let x = if truncated { 0.0 } else { cone_slope(s, params, law) * t * u };
    Ok(IncrementSample { t, x, truncated })
}

/// `(Y, S) ← (Y + X, S + T)`.
pub fn step<R: Rng + ?Sized>(state: &ChainState, law: ChainLaw, rng: &mut R) -> Result<(ChainState, IncrementSample)> {
    let inc = sample_increment(state.s, &state.params, law, rng)?;
    let next = ChainState {
        y: state.y + inc.x,
        s: state.s + inc.t,
        params: state.params,
        step_index: state.step_index + 1,
    };
    Ok((next, inc))
}

/// Chain path from `start` until the first state beyond `horizon`; the last
/// segment is cut where it crosses the horizon.
pub fn run_chain<R: Rng + ?Sized>(
    start: PlanarPoint,
    horizon: f64,
    params: &ModelParams,
    law: ChainLaw,
    rng: &mut R,
) -> Result<PathPolyline> {
    let mut st = ChainState::new(start.x1, start.x2, *params);
    let mut v = vec![start];
    while st.s < horizon {
        let (next, _) = step(&st, law, rng)?;
        if next.s > horizon {
            let w = (horizon - st.s) / (next.s - st.s);
            v.push(PlanarPoint::new(st.y + w * (next.y - st.y), horizon));
        } else {
            v.push(next.point());
        }
        st = next;
    }
    Ok(PathPolyline::new(v))
}

/// Times `S_0, …, S_k` of a chain started at `(0, 0)`.
pub fn chain_times<R: Rng + ?Sized>(steps: usize, params: &ModelParams, law: ChainLaw, rng: &mut R) -> Result<Vec<f64>> {
    let mut st = ChainState::new(0.0, 0.0, *params);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(0.0);
    for _ in 0..steps {
        st = step(&st, law, rng)?.0;
        out.push(st.s);
    }
    Ok(out)
}

/// Values `Y(t_k)` at increasing times `t_k`, reading the chain as a jump
/// process: the position changes at the end of each waiting time.
pub fn chain_values_at<R: Rng + ?Sized>(
    start: PlanarPoint,
    times: &[f64],
    params: &ModelParams,
    law: ChainLaw,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut cur = ChainState::new(start.x1, start.x2, *params);
    let mut next = step(&cur, law, rng)?.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        while next.s <= t {
            cur = next;
            next = step(&cur, law, rng)?.0;
        }
        out.push(cur.y);
    }
    Ok(out)
}
