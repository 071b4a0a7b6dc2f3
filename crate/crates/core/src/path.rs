//! Polyline paths and path ensembles.

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::Result;
use crate::geometry::{ModelParams, PlanarPoint};

/// A polyline path. After the planar transform the second coordinate is
/// time and is nondecreasing; repeated times encode jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPolyline {
    pub vertices: Vec<PlanarPoint>,
}

impl PathPolyline {
    pub fn new(vertices: Vec<PlanarPoint>) -> Self {
        Self { vertices }
    }

    pub fn start(&self) -> PlanarPoint {
        self.vertices[0]
    }

    pub fn end(&self) -> PlanarPoint {
        *self.vertices.last().expect("path has at least one vertex")
    }

    pub fn t_start(&self) -> f64 {
        self.start().x2
    }

    pub fn t_end(&self) -> f64 {
        self.end().x2
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Applies `f` to every vertex.
    pub fn map(&self, f: impl Fn(PlanarPoint) -> PlanarPoint) -> PathPolyline {
        PathPolyline::new(self.vertices.iter().map(|&v| f(v)).collect())
    }

    pub fn try_map(&self, f: impl Fn(PlanarPoint) -> Result<PlanarPoint>) -> Result<PathPolyline> {
        let v = self.vertices.iter().map(|&v| f(v)).collect::<Result<Vec<_>>>()?;
        Ok(PathPolyline::new(v))
    }

    /// True when times never decrease (strictly increase if `strict`).
    pub fn is_time_monotone(&self, strict: bool) -> bool {
        self.vertices.windows(2).all(|w| if strict { w[1].x2 > w[0].x2 } else { w[1].x2 >= w[0].x2 })
    }

    /// Position at time `t` by linear interpolation, right-continuous at
    /// jumps. `None` outside `[t_start, t_end]`.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let v = &self.vertices;
        if v.is_empty() || t < v[0].x2 || t > self.t_end() {
            return None;
        }
        // index of the last vertex with time ≤ t
        let k = v.partition_point(|p| p.x2 <= t) - 1;
        if k + 1 >= v.len() {
            return Some(v[k].x1);
        }
        let (a, b) = (v[k], v[k + 1]);
        let dt = b.x2 - a.x2;
        if dt <= 0.0 {
            return Some(a.x1);
        }
        Some(a.x1 + (b.x1 - a.x1) * (t - a.x2) / dt)
    }

    /// Position at `t` with constant continuation outside the domain.
    pub fn value_at_extended(&self, t: f64) -> f64 {
        if t <= self.t_start() {
            self.start().x1
        } else if t >= self.t_end() {
            self.end().x1
        } else {
            self.value_at(t).unwrap_or(self.end().x1)
        }
    }

    /// Piecewise-constant version: the position holds until the next vertex
    /// time and then jumps. Jumps are encoded by a repeated time.
    pub fn jump_version(&self) -> PathPolyline {
        let mut out = Vec::with_capacity(self.vertices.len() * 2);
        for (k, &v) in self.vertices.iter().enumerate() {
            if k > 0 {
                let prev = out.last().copied().unwrap_or(v);
                if prev.x1 != v.x1 {
                    out.push(PlanarPoint::new(prev.x1, v.x2));
                }
            }
            out.push(v);
        }
        PathPolyline::new(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Gamma,
    GammaPrime,
    GammaDoublePrime,
    HatGamma,
    Transformed,
    Rescaled,
    Bridge,
    Chain,
    Reference,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WebEnsemble {
    pub params: ModelParams,
    pub paths: Vec<PathPolyline>,
    pub provenance: Provenance,
    pub seed: u64,
}

#[derive(Serialize)]
struct JsonlRecord<'a> {
    start: [f64; 2],
    vertices: Vec<[f64; 2]>,
    provenance: &'a Provenance,
}

impl WebEnsemble {
    pub fn new(params: ModelParams, provenance: Provenance, seed: u64) -> Self {
        Self { params, paths: Vec::new(), provenance, seed }
    }

    /// One JSON object per path and per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for p in &self.paths {
            let rec = JsonlRecord {
                start: [p.start().x1, p.start().x2],
                vertices: p.vertices.iter().map(|v| [v.x1, v.x2]).collect(),
                provenance: &self.provenance,
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}
