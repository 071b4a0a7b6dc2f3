//! Lazily materialized Poisson point fields.
//!
//! The plane is cut into square cells. The points of cell `(i, j)` are drawn
//! from a ChaCha8 stream whose key depends on the field seed and law and
//! whose stream number is the cell index, so a cell's content never depends
//! on which cells were visited first. Cells are stored in 8×8 blocks to
//! keep the hash map small.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{quadrangle_bbox, quadrangle_contains_theta, triangle_bbox, ModelParams, PlanarPoint};
use crate::seeds::splitmix64;
use crate::stats::{chi_square, StatsReport};

/// Intensity of the field as a function of the second coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntensityLaw {
    /// Rate one on the whole plane.
    Unit,
    /// `(1 + s/n)^{-3}` on the strip `s ∈ [0, τn]`.
    Transformed { n: f64, tau: f64 },
    /// As `Transformed` up to `τn`, then constant `(1 + τ)^{-3}`.
    Extended { n: f64, tau: f64 },
}

impl IntensityLaw {
    pub fn transformed(p: &ModelParams) -> Self {
        IntensityLaw::Transformed { n: p.n, tau: p.tau() }
    }

    pub fn extended(p: &ModelParams) -> Self {
        IntensityLaw::Extended { n: p.n, tau: p.tau() }
    }

    /// Range of the second coordinate on which the law lives.
    pub fn s_domain(&self) -> (f64, f64) {
        match *self {
            IntensityLaw::Unit => (f64::NEG_INFINITY, f64::INFINITY),
            IntensityLaw::Transformed { n, tau } => (0.0, tau * n),
            IntensityLaw::Extended { .. } => (0.0, f64::INFINITY),
        }
    }

    pub fn intensity(&self, s: f64) -> f64 {
        let (lo, hi) = self.s_domain();
        if s < lo || s > hi {
            return 0.0;
        }
        match *self {
            IntensityLaw::Unit => 1.0,
            IntensityLaw::Transformed { n, .. } => (1.0 + s / n).powi(-3),
            IntensityLaw::Extended { n, tau } => {
                if s <= tau * n {
                    (1.0 + s / n).powi(-3)
                } else {
                    (1.0 + tau).powi(-3)
                }
            }
        }
    }

    /// `∫ intensity ds` over `[s_lo, s_hi]` per unit of width.
    pub fn mass(&self, s_lo: f64, s_hi: f64) -> f64 {
        self.pieces(s_lo, s_hi).iter().flatten().map(|pc| pc.mass()).sum()
    }

    /// Splits `[s_lo, s_hi] ∩ domain` into pieces on which the law has a
    /// single closed form.
    fn pieces(&self, s_lo: f64, s_hi: f64) -> [Option<Piece>; 2] {
        let (dlo, dhi) = self.s_domain();
        let lo = s_lo.max(dlo);
        let hi = s_hi.min(dhi);
        if !(hi > lo) {
            return [None, None];
        }
        match *self {
            IntensityLaw::Unit => [Some(Piece::Flat { lo, hi, rate: 1.0 }), None],
            IntensityLaw::Transformed { n, .. } => [Some(Piece::Decay { lo, hi, n }), None],
            IntensityLaw::Extended { n, tau } => {
                let cut = tau * n;
                let flat = (1.0 + tau).powi(-3);
                if hi <= cut {
                    [Some(Piece::Decay { lo, hi, n }), None]
                } else if lo >= cut {
                    [Some(Piece::Flat { lo, hi, rate: flat }), None]
                } else {
                    [Some(Piece::Decay { lo, hi: cut, n }), Some(Piece::Flat { lo: cut, hi, rate: flat })]
                }
            }
        }
    }

    fn key_words(&self) -> [u64; 3] {
        match *self {
            IntensityLaw::Unit => [1, 0, 0],
            IntensityLaw::Transformed { n, tau } => [2, n.to_bits(), tau.to_bits()],
            IntensityLaw::Extended { n, tau } => [3, n.to_bits(), tau.to_bits()],
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Piece {
    Flat { lo: f64, hi: f64, rate: f64 },
    Decay { lo: f64, hi: f64, n: f64 },
}

impl Piece {
    fn mass(&self) -> f64 {
        match *self {
            Piece::Flat { lo, hi, rate } => rate * (hi - lo),
            Piece::Decay { lo, hi, n } => {
                // (n/2)(A⁻² − B⁻²) written without cancellation
                let a = 1.0 + lo / n;
                let b = 1.0 + hi / n;
                (hi - lo) * (a + b) / (2.0 * a * a * b * b)
            }
        }
    }

    /// Inverse CDF of the normalized intensity on the piece.
    fn sample(&self, u: f64) -> f64 {
        match *self {
            Piece::Flat { lo, hi, .. } => lo + u * (hi - lo),
            Piece::Decay { lo, hi, n } => {
                let a = (1.0 + lo / n).powi(-2);
                let b = (1.0 + hi / n).powi(-2);
                let s = n * ((a - u * (a - b)).powf(-0.5) - 1.0);
                s.clamp(lo, hi)
            }
        }
    }
}

/// Region shapes accepted by [`LazyPointField::points_in`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionQuery {
    /// Closed rectangle `[x_lo, x_hi] × [s_lo, s_hi]`.
    Rectangle { x_lo: f64, x_hi: f64, s_lo: f64, s_hi: f64 },
    /// Closed quadrangle `Q_apex`.
    Quadrangle { apex: PlanarPoint, theta: f64 },
    /// Closed radial triangle `T_{apex, depth}`.
    TriangleRadial { apex: PlanarPoint, depth: f64, theta: f64 },
    /// Closed planar triangle `{(y', s + u) : 0 ≤ u ≤ height, |y' − y| ≤ slope·u}`.
    TrianglePlanar { apex: PlanarPoint, height: f64, slope: f64 },
}

impl RegionQuery {
    /// `[x1_lo, x1_hi, x2_lo, x2_hi]`.
    pub fn bbox(&self) -> [f64; 4] {
        match *self {
            RegionQuery::Rectangle { x_lo, x_hi, s_lo, s_hi } => [x_lo, x_hi, s_lo, s_hi],
            RegionQuery::Quadrangle { apex, theta } => quadrangle_bbox(apex, theta),
            RegionQuery::TriangleRadial { apex, depth, theta } => triangle_bbox(apex, depth, theta),
            RegionQuery::TrianglePlanar { apex, height, slope } => [
                apex.x1 - slope * height,
                apex.x1 + slope * height,
                apex.x2,
                apex.x2 + height,
            ],
        }
    }

    pub fn contains(&self, p: PlanarPoint) -> bool {
        match *self {
            RegionQuery::Rectangle { x_lo, x_hi, s_lo, s_hi } => {
                p.x1 >= x_lo && p.x1 <= x_hi && p.x2 >= s_lo && p.x2 <= s_hi
            }
            RegionQuery::Quadrangle { apex, theta } => quadrangle_contains_theta(apex, theta, p),
            RegionQuery::TriangleRadial { apex, depth, theta } => {
                p.norm() >= apex.norm() - depth && quadrangle_contains_theta(apex, theta, p)
            }
            RegionQuery::TrianglePlanar { apex, height, slope } => {
                let u = p.x2 - apex.x2;
                u >= 0.0 && u <= height && (p.x1 - apex.x1).abs() <= slope * u
            }
        }
    }
}

/// Bookkeeping about what the field has materialized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldLedger {
    pub cells_materialized: u64,
    pub points_materialized: u64,
    /// Queries whose apex lay outside the declared region of interest.
    pub excursions: u64,
}

const BLOCK: i64 = 8;
const BLOCK_CELLS: usize = (BLOCK * BLOCK) as usize;
const CELL_LIMIT: i64 = i32::MAX as i64;

struct Block {
    ready: u64,
    ranges: [(u32, u32); BLOCK_CELLS],
    pts: Vec<PlanarPoint>,
}

impl Block {
    fn new() -> Self {
        Self { ready: 0, ranges: [(0, 0); BLOCK_CELLS], pts: Vec::new() }
    }
}

/// Deterministic lazily materialized Poisson field.
pub struct LazyPointField {
    seed: u64,
    law: IntensityLaw,
    cell_size: f64,
    base: ChaCha8Rng,
    blocks: FxHashMap<(i64, i64), Box<Block>>,
    ledger: FieldLedger,
}

impl std::fmt::Debug for LazyPointField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LazyPointField")
            .field("seed", &self.seed)
            .field("law", &self.law)
            .field("cell_size", &self.cell_size)
            .field("ledger", &self.ledger)
            .finish()
    }
}

fn cell_stream(i: i64, j: i64) -> u64 {
    ((i as i32 as u32 as u64) << 32) | (j as i32 as u32 as u64)
}

impl LazyPointField {
    pub fn new(seed: u64, law: IntensityLaw) -> Self {
        Self::with_cell_size(seed, law, 1.0)
    }

    pub fn with_cell_size(seed: u64, law: IntensityLaw, cell_size: f64) -> Self {
        assert!(cell_size > 0.0 && cell_size.is_finite());
        let w = law.key_words();
        let mut key = [0u8; 32];
        let mut z = splitmix64(seed ^ splitmix64(w[0]) ^ splitmix64(w[1]).rotate_left(17) ^ splitmix64(w[2]).rotate_left(41));
        for chunk in key.chunks_mut(8) {
            z = splitmix64(z);
            chunk.copy_from_slice(&z.to_le_bytes());
        }
        Self {
            seed,
            law,
            cell_size,
            base: ChaCha8Rng::from_seed(key),
            blocks: FxHashMap::default(),
            ledger: FieldLedger::default(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn law(&self) -> IntensityLaw {
        self.law
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn ledger(&self) -> FieldLedger {
        self.ledger
    }

    pub fn note_excursion(&mut self) {
        self.ledger.excursions += 1;
    }

    /// Drops all materialized cells; contents regenerate identically.
    pub fn clear_cache(&mut self) {
        self.blocks.clear();
    }

    fn generate(base: &ChaCha8Rng, law: &IntensityLaw, cs: f64, i: i64, j: i64, out: &mut Vec<PlanarPoint>) {
        let pieces = law.pieces(j as f64 * cs, (j + 1) as f64 * cs);
        if pieces[0].is_none() {
            return;
        }
        let mut rng = base.clone();
        rng.set_stream(cell_stream(i, j));
        let x0 = i as f64 * cs;
        for pc in pieces.iter().flatten() {
            let mean = pc.mass() * cs;
            if mean <= 0.0 {
                continue;
            }
            let k = Poisson::new(mean).map(|d| d.sample(&mut rng) as u64).unwrap_or(0);
            for _ in 0..k {
                let x1 = x0 + rng.random::<f64>() * cs;
                let x2 = pc.sample(rng.random::<f64>());
                out.push(PlanarPoint::new(x1, x2));
            }
        }
    }

    /// The points of cell `(i, j)`.
    pub fn cell(&mut self, i: i64, j: i64) -> &[PlanarPoint] {
        let key = (i.div_euclid(BLOCK), j.div_euclid(BLOCK));
        let li = (i.rem_euclid(BLOCK) * BLOCK + j.rem_euclid(BLOCK)) as usize;
        let Self { base, law, cell_size, blocks, ledger, .. } = self;
        let block = blocks.entry(key).or_insert_with(|| Box::new(Block::new()));
        if block.ready & (1u64 << li) == 0 {
            let a = block.pts.len();
            Self::generate(base, law, *cell_size, i, j, &mut block.pts);
            let b = block.pts.len();
            block.ranges[li] = (a as u32, b as u32);
            block.ready |= 1u64 << li;
            ledger.cells_materialized += 1;
            ledger.points_materialized += (b - a) as u64;
        }
        let (a, b) = block.ranges[li];
        &block.pts[a as usize..b as usize]
    }

    /// Cell index range covering `[lo, hi]` along one axis.
    fn index_range(&self, lo: f64, hi: f64) -> Result<(i64, i64)> {
        let a = (lo / self.cell_size).floor();
        let b = (hi / self.cell_size).floor();
        if !(a.is_finite() && b.is_finite()) || a < -(CELL_LIMIT as f64) || b > CELL_LIMIT as f64 {
            return Err(Error::DomainViolation(format!("query range [{lo}, {hi}] outside the addressable grid")));
        }
        Ok((a as i64, b as i64))
    }

    /// Calls `f` on every point of every cell meeting the box.
    pub fn visit_box(&mut self, bbox: [f64; 4], mut f: impl FnMut(PlanarPoint)) -> Result<()> {
        let (dlo, dhi) = self.law.s_domain();
        let s_lo = bbox[2].max(dlo.max(-1e300));
        let s_hi = bbox[3].min(dhi.min(1e300));
        if bbox[1] < bbox[0] || s_hi < s_lo {
            return Ok(());
        }
        let (i0, i1) = self.index_range(bbox[0], bbox[1])?;
        let (j0, j1) = self.index_range(s_lo, s_hi)?;
        for i in i0..=i1 {
            for j in j0..=j1 {
                for &p in self.cell(i, j) {
                    f(p);
                }
            }
        }
        Ok(())
    }

    fn check_domain(&self, bbox: [f64; 4]) -> Result<()> {
        if bbox.iter().any(|v| !v.is_finite()) {
            return Err(Error::DomainViolation("query bounding box is not finite".into()));
        }
        let (dlo, dhi) = self.law.s_domain();
        if bbox[3] < dlo || bbox[2] > dhi {
            return Err(Error::DomainViolation(format!(
                "query rows [{}, {}] miss the field domain [{dlo}, {dhi}]",
                bbox[2], bbox[3]
            )));
        }
        Ok(())
    }

    /// Field points inside `q`, sorted by `(x2, x1)`.
    pub fn points_in(&mut self, q: &RegionQuery) -> Result<Vec<PlanarPoint>> {
        let bbox = q.bbox();
        self.check_domain(bbox)?;
        let mut out = Vec::new();
        self.visit_box(bbox, |p| {
            if q.contains(p) {
                out.push(p);
            }
        })?;
        out.sort_by(|a, b| a.x2.total_cmp(&b.x2).then(a.x1.total_cmp(&b.x1)));
        Ok(out)
    }

    /// Number of points in `q` without sorting.
    pub fn count_in(&mut self, q: &RegionQuery) -> Result<usize> {
        let bbox = q.bbox();
        self.check_domain(bbox)?;
        let mut k = 0;
        self.visit_box(bbox, |p| {
            if q.contains(p) {
                k += 1;
            }
        })?;
        Ok(k)
    }

    /// Lowest point (minimal second coordinate) strictly above the apex in
    /// the growing triangle `{(y', s + u) : 0 < u ≤ v_max, |y' − y| ≤ slope·u}`.
    /// Returns the point and its depth `u`.
    pub fn first_hit_in_growing_triangle(
        &mut self,
        apex: PlanarPoint,
        slope: f64,
        v_max: f64,
    ) -> Result<Option<(PlanarPoint, f64)>> {
        let cs = self.cell_size;
        let (dlo, dhi) = self.law.s_domain();
        let s = apex.x2;
        let top = (s + v_max).min(dhi);
        if top < dlo || !(v_max > 0.0) {
            return Ok(None);
        }
        let (j0, j1) = self.index_range(s.max(dlo), top)?;
        let mut best: Option<(PlanarPoint, f64)> = None;
        for j in j0..=j1 {
            let row_lo = j as f64 * cs;
            if let Some((_, bu)) = best {
                if row_lo - s > bu {
                    break;
                }
            }
            let reach = slope * ((row_lo + cs - s).min(v_max)).max(0.0);
            let (i0, i1) = self.index_range(apex.x1 - reach, apex.x1 + reach)?;
            for i in i0..=i1 {
                for &p in self.cell(i, j) {
                    let u = p.x2 - s;
                    if u > 0.0 && u <= v_max && (p.x1 - apex.x1).abs() <= slope * u {
                        let better = match best {
                            None => true,
                            Some((bp, bu)) => u < bu || (u == bu && p.x1 > bp.x1),
                        };
                        if better {
                            best = Some((p, u));
                        }
                    }
                }
            }
        }
        Ok(best)
    }

    /// Field point of largest norm in `shape`, other than `exclude`.
    /// Ties go to the larger `x1`, then the larger `x2`.
    pub fn farthest_from_origin_in(&mut self, shape: &RegionQuery, exclude: PlanarPoint) -> Result<Option<PlanarPoint>> {
        let bbox = shape.bbox();
        let mut best: Option<(PlanarPoint, f64)> = None;
        self.visit_box(bbox, |p| {
            if p == exclude || !shape.contains(p) {
                return;
            }
            let r = p.norm_sq();
            let better = match best {
                None => true,
                Some((bp, br)) => r > br || (r == br && (p.x1, p.x2) > (bp.x1, bp.x2)),
            };
            if better {
                best = Some((p, r));
            }
        })?;
        Ok(best.map(|b| b.0))
    }
}

/// Anything that can enumerate points in a box.
pub trait PointSource {
    fn visit<F: FnMut(PlanarPoint)>(&mut self, bbox: [f64; 4], f: F) -> Result<()>;

    /// Records that a search left the region of interest.
    fn excursion(&mut self) {}
}

impl PointSource for LazyPointField {
    fn visit<F: FnMut(PlanarPoint)>(&mut self, bbox: [f64; 4], f: F) -> Result<()> {
        self.visit_box(bbox, f)
    }

    fn excursion(&mut self) {
        self.note_excursion();
    }
}

/// A fixed, explicitly listed point configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixedPoints(pub Vec<PlanarPoint>);

impl PointSource for FixedPoints {
    fn visit<F: FnMut(PlanarPoint)>(&mut self, bbox: [f64; 4], mut f: F) -> Result<()> {
        for &p in &self.0 {
            if p.x1 >= bbox[0] && p.x1 <= bbox[1] && p.x2 >= bbox[2] && p.x2 <= bbox[3] {
                f(p);
            }
        }
        Ok(())
    }
}

/// Binning used by [`chi_square_intensity_test`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntensityBins {
    pub y_bins: usize,
    pub s_bins: usize,
}

/// Chi-square of binned counts of `points` over the rectangle against the
/// integrated intensity of `law`. Needs at least 20 expected points per bin.
pub fn chi_square_points(
    points: &[PlanarPoint],
    law: &IntensityLaw,
    rect: [f64; 4],
    bins: IntensityBins,
) -> Result<StatsReport> {
    let [x_lo, x_hi, s_lo, s_hi] = rect;
    if bins.y_bins == 0 || bins.s_bins == 0 || !(x_hi > x_lo && s_hi > s_lo) {
        return Err(Error::InvalidInput("empty binning".into()));
    }
    let wy = (x_hi - x_lo) / bins.y_bins as f64;
    let ws = (s_hi - s_lo) / bins.s_bins as f64;
    let mut expected = Vec::with_capacity(bins.y_bins * bins.s_bins);
    for _ in 0..bins.y_bins {
        for k in 0..bins.s_bins {
            let lo = s_lo + k as f64 * ws;
            expected.push(wy * law.mass(lo, lo + ws));
        }
    }
    if let Some(m) = expected.iter().copied().reduce(f64::min) {
        if m < 20.0 {
            return Err(Error::InsufficientData(format!("smallest expected bin count {m:.2} is below 20")));
        }
    }
    let mut counts = vec![0u64; expected.len()];
    for p in points {
        if p.x1 < x_lo || p.x1 > x_hi || p.x2 < s_lo || p.x2 > s_hi {
            continue;
        }
        let a = (((p.x1 - x_lo) / wy) as usize).min(bins.y_bins - 1);
        let b = (((p.x2 - s_lo) / ws) as usize).min(bins.s_bins - 1);
        counts[a * bins.s_bins + b] += 1;
    }
    let total: u64 = counts.iter().sum();
    let mut r = chi_square(&counts, &expected)?;
    r.name = "intensity_chi_square".into();
    r.set_meta("points", total);
    r.set_meta("expected_points", expected.iter().sum::<f64>());
    Ok(r)
}

/// Chi-square test of the field's own points over `strip` against its law.
pub fn chi_square_intensity_test(field: &mut LazyPointField, strip: [f64; 4], bins: IntensityBins) -> Result<StatsReport> {
    let q = RegionQuery::Rectangle { x_lo: strip[0], x_hi: strip[1], s_lo: strip[2], s_hi: strip[3] };
    let pts = field.points_in(&q)?;
    let law = field.law();
    chi_square_points(&pts, &law, strip, bins).map(|r| r.meta("seed", field.seed()))
}
