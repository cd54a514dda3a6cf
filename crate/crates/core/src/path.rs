//! Piecewise-analytic families of cocycles indexed by t ∈ [0, 1].
//!
//! A segment acts on a k-dimensional core cocycle Φ_{n+1}ᵀ·base_n·Φ_n seen
//! through per-fiber orthonormal frames Φ (or on the whole cocycle when there
//! is no embedding). Evaluation adds the change of the core back through the
//! frames, so everything outside the embedded block is held fixed exactly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::{row_major, PeriodicCocycle};
use crate::error::{Error, Result};
use crate::linalg::{inverse, op_norm, rotation, Mat};
use crate::planar::planar_splitting;

/// Default number of samples per segment for radius measurement.
pub const DEFAULT_RADIUS_SAMPLES: usize = 257;
/// Entrywise tolerance for matching endpoints when joining paths.
pub const ENDPOINT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum SegmentKind {
    Constant,
    /// (1 − s)·core + s·target
    LinearBlend { target: Vec<Mat> },
    /// R(s·angle_n)·core_n, core of dimension 2
    RotationRamp { angles: Vec<f64> },
    /// e^{s·log_rate}·core_n
    BlockScaleRamp { log_rate: f64 },
    /// R(s·angle_n)·core_n followed by a diagonal correction in the current
    /// eigenbasis that restores both eigenvalues of the core
    RotateToward { angles: Vec<f64> },
}

impl SegmentKind {
    pub fn name(&self) -> &'static str {
        match self {
            SegmentKind::Constant => "Constant",
            SegmentKind::LinearBlend { .. } => "LinearBlend",
            SegmentKind::RotationRamp { .. } => "RotationRamp",
            SegmentKind::BlockScaleRamp { .. } => "BlockScaleRamp",
            SegmentKind::RotateToward { .. } => "RotateToward",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub t0: f64,
    pub t1: f64,
    /// cocycle at the forward start of the segment
    pub base: PeriodicCocycle,
    pub embedding: Option<Vec<Mat>>,
    /// traversed from s = 1 back to s = 0
    pub reversed: bool,
    core: PeriodicCocycle,
}

fn core_of(base: &PeriodicCocycle, embedding: &Option<Vec<Mat>>) -> PeriodicCocycle {
    match embedding {
        None => base.clone(),
        Some(phi) => crate::domination::induced(base, phi),
    }
}

impl Segment {
    pub fn new(kind: SegmentKind, base: PeriodicCocycle, embedding: Option<Vec<Mat>>) -> Result<Self> {
        let p = base.period();
        if let Some(phi) = &embedding {
            if phi.len() != p {
                return Err(Error::ShapeMismatch(format!("{} embedding frames for period {p}", phi.len())));
            }
            let k = phi[0].ncols();
            if k == 0 || phi.iter().any(|f| f.nrows() != base.dim() || f.ncols() != k) {
                return Err(Error::ShapeMismatch("embedding frames have inconsistent shapes".into()));
            }
        }
        let core = core_of(&base, &embedding);
        let k = core.dim();
        match &kind {
            SegmentKind::RotationRamp { angles } | SegmentKind::RotateToward { angles } => {
                if k != 2 {
                    return Err(Error::InvalidDim(k));
                }
                if angles.len() != p || angles.iter().any(|a| !a.is_finite()) {
                    return Err(Error::InvalidArgument("one finite angle per step required".into()));
                }
            }
            SegmentKind::LinearBlend { target } => {
                if target.len() != p || target.iter().any(|m| m.nrows() != k || m.ncols() != k) {
                    return Err(Error::ShapeMismatch("blend target does not match the core".into()));
                }
            }
            SegmentKind::BlockScaleRamp { log_rate } => {
                if !log_rate.is_finite() {
                    return Err(Error::InvalidArgument("non-finite scale rate".into()));
                }
            }
            SegmentKind::Constant => {}
        }
        Ok(Segment { kind, t0: 0.0, t1: 1.0, base, embedding, reversed: false, core })
    }

    pub fn core(&self) -> &PeriodicCocycle {
        &self.core
    }

    fn core_at(&self, s: f64) -> Result<Vec<Mat>> {
        let core = self.core.maps();
        if s == 0.0 {
            return Ok(core.to_vec());
        }
        Ok(match &self.kind {
            SegmentKind::Constant => core.to_vec(),
            SegmentKind::LinearBlend { target } => {
                core.iter().zip(target).map(|(a, b)| a * (1.0 - s) + b * s).collect()
            }
            SegmentKind::RotationRamp { angles } => {
                core.iter().zip(angles).map(|(a, th)| rotation(s * th) * a).collect()
            }
            SegmentKind::BlockScaleRamp { log_rate } => {
                let f = (s * log_rate).exp();
                core.iter().map(|a| a * f).collect()
            }
            SegmentKind::RotateToward { angles } => rotate_toward(&self.core, angles, s)?,
        })
    }

    /// Cocycle at local parameter s ∈ [0, 1] in forward orientation.
    pub fn eval_forward(&self, s: f64) -> Result<PeriodicCocycle> {
        let cs = self.core_at(s)?;
        let maps = match &self.embedding {
            None => cs,
            Some(phi) => {
                let p = self.base.period();
                (0..p)
                    .map(|n| {
                        let delta = &cs[n] - &self.core.maps()[n];
                        if delta.iter().all(|x| *x == 0.0) {
                            self.base.maps()[n].clone()
                        } else {
                            &self.base.maps()[n] + &phi[(n + 1) % p] * delta * phi[n].transpose()
                        }
                    })
                    .collect()
            }
        };
        Ok(PeriodicCocycle::from_maps_unchecked(maps))
    }

    pub fn eval(&self, s: f64) -> Result<PeriodicCocycle> {
        self.eval_forward(if self.reversed { 1.0 - s } else { s })
    }

    pub fn start(&self) -> Result<PeriodicCocycle> {
        if self.reversed {
            self.eval_forward(1.0)
        } else {
            Ok(self.base.clone())
        }
    }

    pub fn end(&self) -> Result<PeriodicCocycle> {
        self.eval(1.0)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, SegmentKind::Constant)
    }

    /// The same segment seen inside a larger cocycle: `outer_start` is the
    /// ambient cocycle whose core through `frames` is `inner_start`.
    pub fn lifted(&self, inner_start: &PeriodicCocycle, outer_start: &PeriodicCocycle, frames: &[Mat]) -> Result<Self> {
        let p = outer_start.period();
        let base_maps: Vec<Mat> = (0..p)
            .map(|n| {
                let delta = &self.base.maps()[n] - &inner_start.maps()[n];
                &outer_start.maps()[n] + &frames[(n + 1) % p] * delta * frames[n].transpose()
            })
            .collect();
        let base = PeriodicCocycle::from_maps_unchecked(base_maps);
        let embedding = match &self.embedding {
            None => frames.to_vec(),
            Some(inner) => frames.iter().zip(inner).map(|(a, b)| a * b).collect(),
        };
        let mut seg = Segment::new(self.kind.clone(), base, Some(embedding))?;
        seg.t0 = self.t0;
        seg.t1 = self.t1;
        seg.reversed = self.reversed;
        Ok(seg)
    }
}

/// Rotated core followed by the eigenvalue-restoring correction.
fn rotate_toward(core: &PeriodicCocycle, angles: &[f64], s: f64) -> Result<Vec<Mat>> {
    let p = core.period();
    let rotated: Vec<Mat> = core.maps().iter().zip(angles).map(|(a, th)| rotation(s * th) * a).collect();
    let target = planar_splitting(core.maps())?;
    let now = planar_splitting(&rotated)?;
    if target.signs != now.signs {
        return Err(Error::NumericalFailure("eigenvalue changed sign along the rotation".into()));
    }
    let ls = target.log_moduli[0] - now.log_moduli[0];
    let lu = target.log_moduli[1] - now.log_moduli[1];
    let sines: Vec<f64> = now.angles().iter().map(|a| a.sin()).collect();
    let total: f64 = sines.iter().sum();
    let corr: Vec<Mat> = (0..p)
        .map(|n| {
            let w = sines[n] / total;
            let basis = Mat::from_column_slice(2, 2, &[now.stable[n].x, now.stable[n].y, now.unstable[n].x, now.unstable[n].y]);
            let scale = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![(w * ls).exp(), (w * lu).exp()]));
            &basis * scale * inverse(&basis).expect("splitting is transverse")
        })
        .collect();
    Ok((0..p).map(|n| &corr[(n + 1) % p] * &rotated[n]).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CocyclePath {
    start: PeriodicCocycle,
    segments: Vec<Segment>,
}

impl CocyclePath {
    pub fn constant(c: &PeriodicCocycle) -> Self {
        let seg = Segment::new(SegmentKind::Constant, c.clone(), None).expect("constant segment");
        CocyclePath { start: c.clone(), segments: vec![seg] }
    }

    /// Join segments in order, giving each an equal share of [0, 1].
    pub fn from_segments(start: &PeriodicCocycle, segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Ok(Self::constant(start));
        }
        let mut prev = start.clone();
        for seg in &segments {
            let s = seg.start()?;
            let gap = prev.max_entry_diff(&s)?;
            if gap > ENDPOINT_TOL {
                return Err(Error::EndpointMismatch(gap));
            }
            prev = seg.end()?;
        }
        let mut path = CocyclePath { start: start.clone(), segments };
        path.retime();
        Ok(path)
    }

    fn retime(&mut self) {
        let m = self.segments.len() as f64;
        let count = self.segments.len();
        for (i, seg) in self.segments.iter_mut().enumerate() {
            seg.t0 = i as f64 / m;
            seg.t1 = if i + 1 == count { 1.0 } else { (i + 1) as f64 / m };
        }
    }

    pub fn start(&self) -> &PeriodicCocycle {
        &self.start
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn end(&self) -> Result<PeriodicCocycle> {
        self.segments.last().expect("nonempty").end()
    }

    /// True when every segment is constant.
    pub fn is_trivial(&self) -> bool {
        self.segments.iter().all(Segment::is_constant)
    }

    /// Segment boundaries, including 0 and 1.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        out.extend(self.segments.iter().map(|s| s.t1));
        out
    }

    pub fn reversed(&self) -> Result<Self> {
        let start = self.end()?;
        let segments = self
            .segments
            .iter()
            .rev()
            .map(|s| {
                let mut r = s.clone();
                r.reversed = !r.reversed;
                r
            })
            .collect();
        let mut path = CocyclePath { start, segments };
        path.retime();
        Ok(path)
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let idx = self.segments.iter().position(|s| t <= s.t1).unwrap_or(self.segments.len() - 1);
        let seg = &self.segments[idx];
        let s = if seg.t1 > seg.t0 { ((t - seg.t0) / (seg.t1 - seg.t0)).clamp(0.0, 1.0) } else { 1.0 };
        (idx, s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("path serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn sample_path(path: &CocyclePath, t: f64) -> Result<PeriodicCocycle> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange(format!("t = {t} outside [0, 1]")));
    }
    if t == 0.0 {
        return Ok(path.start.clone());
    }
    let (i, s) = path.locate(t);
    path.segments[i].eval(s)
}

/// Concatenate in time; `a` must end where `b` starts.
pub fn concat_paths(a: &CocyclePath, b: &CocyclePath) -> Result<CocyclePath> {
    let end = a.end()?;
    let gap = end.max_entry_diff(&b.start)?;
    if gap > ENDPOINT_TOL {
        return Err(Error::EndpointMismatch(gap));
    }
    if b.is_trivial() {
        return Ok(a.clone());
    }
    if a.is_trivial() {
        let mut out = b.clone();
        out.start = a.start.clone();
        return Ok(out);
    }
    let mut segments = a.segments.clone();
    segments.extend(b.segments.iter().cloned());
    let mut path = CocyclePath { start: a.start.clone(), segments };
    path.retime();
    Ok(path)
}

/// Forward and inverse deviation of every map, max over the fibers, as
/// (deviation, fiber).
pub fn deviation(c: &PeriodicCocycle, reference: &PeriodicCocycle, reference_inv: &[Mat]) -> (f64, usize) {
    // Frobenius norms bound the operator norms from above, so exact norms
    // are only needed until the bound drops below the best one found
    let mut candidates: Vec<(f64, usize, Mat)> = Vec::new();
    for n in 0..c.period() {
        let a = &c.maps()[n];
        let b = &reference.maps()[n];
        if a == b {
            continue;
        }
        let fwd = a - b;
        candidates.push((fwd.norm(), n, fwd));
        match inverse(a) {
            Ok(ai) => {
                let bwd = ai - &reference_inv[n];
                candidates.push((bwd.norm(), n, bwd));
            }
            Err(_) => return (f64::INFINITY, n),
        }
    }
    if let Some(&(_, n, _)) = candidates.iter().find(|c| c.0.is_nan()) {
        return (f64::NAN, n);
    }
    candidates.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let mut worst = (0.0f64, 0usize);
    for (bound, n, m) in &candidates {
        if *bound < worst.0 {
            break;
        }
        let v = op_norm(m);
        if v > worst.0 || (v == worst.0 && *n < worst.1) {
            worst = (v, *n);
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRadiusReport {
    pub radius: f64,
    pub argmax_t: f64,
    /// 1-based index of the worst map
    pub argmax_n: usize,
    pub sample_count: usize,
}

/// Local grid used for `samples` points per segment: the smallest dyadic
/// grid with at least that many points, so finer requests always contain
/// coarser ones.
pub fn dyadic_grid(samples: usize) -> Vec<f64> {
    let mut intervals = 1usize;
    while intervals + 1 < samples {
        intervals *= 2;
    }
    (0..=intervals).map(|k| k as f64 / intervals as f64).collect()
}

pub fn path_radius(path: &CocyclePath, samples: usize) -> Result<PathRadiusReport> {
    if samples < 2 {
        return Err(Error::InvalidArgument("at least two samples required".into()));
    }
    let start_inv = path.start.inverse_maps()?;
    let grid = dyadic_grid(samples);
    let mut points: Vec<(usize, f64, f64)> = Vec::new();
    for (i, seg) in path.segments.iter().enumerate() {
        if seg.is_constant() && seg.base == path.start {
            points.push((i, 0.0, seg.t0));
            continue;
        }
        for &s in &grid {
            points.push((i, s, seg.t0 + s * (seg.t1 - seg.t0)));
        }
    }
    let devs: Vec<Result<(f64, usize)>> = points
        .par_iter()
        .map(|&(i, s, _)| {
            let c = path.segments[i].eval(s)?;
            Ok(deviation(&c, &path.start, &start_inv))
        })
        .collect();
    let mut report = PathRadiusReport { radius: 0.0, argmax_t: 0.0, argmax_n: 1, sample_count: points.len() };
    for (pt, d) in points.iter().zip(devs) {
        let (v, n) = d?;
        if v > report.radius {
            report.radius = v;
            report.argmax_t = pt.2;
            report.argmax_n = n + 1;
        }
    }
    Ok(report)
}

#[derive(Serialize, Deserialize)]
struct FrameDoc {
    base: usize,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ParamsDoc {
    base: PeriodicCocycle,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frames: Option<Vec<FrameDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    angles: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    log_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    reversed: bool,
}

#[derive(Serialize, Deserialize)]
struct SegmentDoc {
    kind: String,
    params: ParamsDoc,
    t0: f64,
    t1: f64,
}

#[derive(Serialize, Deserialize)]
struct PathDoc {
    v: u32,
    start: PeriodicCocycle,
    segments: Vec<SegmentDoc>,
}

impl Serialize for CocyclePath {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let segments = self
            .segments
            .iter()
            .map(|seg| {
                let mut params = ParamsDoc {
                    base: seg.base.clone(),
                    frames: seg.embedding.as_ref().map(|phi| {
                        phi.iter()
                            .enumerate()
                            .map(|(n, f)| FrameDoc { base: n + 1, rows: f.nrows(), cols: f.ncols(), data: f.as_slice().to_vec() })
                            .collect()
                    }),
                    angles: None,
                    log_rate: None,
                    target: None,
                    reversed: seg.reversed,
                };
                match &seg.kind {
                    SegmentKind::Constant => {}
                    SegmentKind::LinearBlend { target } => params.target = Some(target.iter().map(row_major).collect()),
                    SegmentKind::RotationRamp { angles } | SegmentKind::RotateToward { angles } => {
                        params.angles = Some(angles.clone())
                    }
                    SegmentKind::BlockScaleRamp { log_rate } => params.log_rate = Some(*log_rate),
                }
                SegmentDoc { kind: seg.kind.name().to_string(), params, t0: seg.t0, t1: seg.t1 }
            })
            .collect();
        PathDoc { v: 1, start: self.start.clone(), segments }.serialize(s)
    }
}

fn segment_from_doc(doc: SegmentDoc) -> Result<Segment> {
    let ParamsDoc { base, frames, angles, log_rate, target, reversed } = doc.params;
    let embedding = frames.map(|fs| {
        fs.into_iter().map(|f| Mat::from_column_slice(f.rows, f.cols, &f.data)).collect::<Vec<_>>()
    });
    let missing = |what: &str| Error::Parse(format!("{} segment needs `{what}`", doc.kind));
    let kind = match doc.kind.as_str() {
        "Constant" => SegmentKind::Constant,
        "LinearBlend" => {
            let rows = target.ok_or_else(|| missing("target"))?;
            let k = (rows.first().map_or(0, |r| r.len()) as f64).sqrt() as usize;
            SegmentKind::LinearBlend { target: rows.iter().map(|r| Mat::from_row_slice(k, k, r)).collect() }
        }
        "RotationRamp" => SegmentKind::RotationRamp { angles: angles.ok_or_else(|| missing("angles"))? },
        "RotateToward" => SegmentKind::RotateToward { angles: angles.ok_or_else(|| missing("angles"))? },
        "BlockScaleRamp" => SegmentKind::BlockScaleRamp { log_rate: log_rate.ok_or_else(|| missing("log_rate"))? },
        other => return Err(Error::Parse(format!("unknown segment kind `{other}`"))),
    };
    let mut seg = Segment::new(kind, base, embedding)?;
    seg.t0 = doc.t0;
    seg.t1 = doc.t1;
    seg.reversed = reversed;
    Ok(seg)
}

impl<'de> Deserialize<'de> for CocyclePath {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = PathDoc::deserialize(d)?;
        if doc.v != 1 {
            return Err(D::Error::custom(format!("unsupported document version {}", doc.v)));
        }
        let segments = doc.segments.into_iter().map(segment_from_doc).collect::<Result<Vec<_>>>().map_err(D::Error::custom)?;
        if segments.is_empty() {
            return Err(D::Error::custom("path needs at least one segment"));
        }
        let mut expected = 0.0;
        for s in &segments {
            if s.t0 != expected || !(s.t1 > s.t0) {
                return Err(D::Error::custom("segment intervals must tile [0, 1]"));
            }
            expected = s.t1;
        }
        if expected != 1.0 {
            return Err(D::Error::custom("segment intervals must end at 1"));
        }
        Ok(CocyclePath { start: doc.start, segments })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::dist_cocycle;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cocycle(d: usize, p: usize, seed: u64) -> PeriodicCocycle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let maps = (0..p)
            .map(|_| Mat::from_fn(d, d, |i, j| rng.gen_range(-0.4..0.4) + if i == j { 1.2 } else { 0.0 }))
            .collect();
        PeriodicCocycle::new(maps).unwrap()
    }

    fn blend(a: &PeriodicCocycle, b: &PeriodicCocycle) -> CocyclePath {
        let seg = Segment::new(SegmentKind::LinearBlend { target: b.maps().to_vec() }, a.clone(), None).unwrap();
        CocyclePath::from_segments(a, vec![seg]).unwrap()
    }

    #[test]
    fn constant_path_is_constant() {
        let c = random_cocycle(2, 3, 1);
        let p = CocyclePath::constant(&c);
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(sample_path(&p, t).unwrap(), c);
        }
        assert_eq!(path_radius(&p, 10).unwrap().radius, 0.0);
        assert!(matches!(sample_path(&p, 1.5), Err(Error::OutOfRange(_))));
        assert!(matches!(path_radius(&p, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn rotation_ramp_half_angle() {
        let c = random_cocycle(2, 3, 2);
        let angles = vec![0.2, -0.1, 0.05];
        let seg = Segment::new(SegmentKind::RotationRamp { angles: angles.clone() }, c.clone(), None).unwrap();
        let path = CocyclePath::from_segments(&c, vec![seg]).unwrap();
        let mid = sample_path(&path, 0.5).unwrap();
        for n in 0..3 {
            let by_hand = rotation(angles[n] / 2.0) * &c.maps()[n];
            assert!((&mid.maps()[n] - by_hand).amax() < 1e-15);
        }
    }

    #[test]
    fn scalar_ramp_radius_is_one() {
        let one = PeriodicCocycle::new(vec![Mat::identity(1, 1)]).unwrap();
        let seg = Segment::new(SegmentKind::BlockScaleRamp { log_rate: 2f64.ln() }, one.clone(), None).unwrap();
        let path = CocyclePath::from_segments(&one, vec![seg]).unwrap();
        let r = path_radius(&path, 257).unwrap();
        assert!((r.radius - 1.0).abs() < 1e-14);
        assert_eq!(r.argmax_t, 1.0);
    }

    #[test]
    fn embedded_segment_only_moves_its_block() {
        let c = random_cocycle(3, 4, 3);
        let e12 = Mat::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let seg = Segment::new(SegmentKind::BlockScaleRamp { log_rate: 0.1 }, c.clone(), Some(vec![e12; 4])).unwrap();
        let end = seg.eval(1.0).unwrap();
        for n in 0..4 {
            let diff = &end.maps()[n] - &c.maps()[n];
            assert_eq!(diff.row(2).amax(), 0.0);
            assert_eq!(diff.column(2).amax(), 0.0);
        }
    }

    #[test]
    fn reverse_returns_to_start() {
        let a = random_cocycle(2, 3, 4);
        let b = random_cocycle(2, 3, 5);
        let p = blend(&a, &b);
        let loop_path = concat_paths(&p, &p.reversed().unwrap()).unwrap();
        assert!(loop_path.end().unwrap().max_entry_diff(&a).unwrap() < 1e-15);
        assert_eq!(loop_path.segments().len(), 2);
    }

    #[test]
    fn concat_with_trivial_and_mismatch() {
        let a = random_cocycle(2, 3, 6);
        let b = random_cocycle(2, 3, 7);
        let p = blend(&a, &b);
        let joined = concat_paths(&CocyclePath::constant(&a), &p).unwrap();
        assert_eq!(joined, p);
        let q = blend(&b, &a);
        assert!(matches!(concat_paths(&q, &q), Err(Error::EndpointMismatch(_))));
    }

    #[test]
    fn json_round_trip_exact() {
        let a = random_cocycle(3, 4, 8);
        let b = random_cocycle(3, 4, 9);
        let e = crate::linalg::orthonormalize(&Mat::from_fn(3, 2, |i, j| (i + 2 * j) as f64 + 0.5));
        let s1 = Segment::new(SegmentKind::BlockScaleRamp { log_rate: -0.013 }, a.clone(), Some(vec![e.clone(); 4])).unwrap();
        let mid = s1.end().unwrap();
        let s2 = Segment::new(SegmentKind::RotationRamp { angles: vec![0.01, 0.02, -0.03, 0.1] }, mid.clone(), Some(vec![e; 4])).unwrap();
        let mid2 = s2.end().unwrap();
        let s3 = Segment::new(SegmentKind::LinearBlend { target: b.maps().to_vec() }, mid2, None).unwrap();
        let path = CocyclePath::from_segments(&a, vec![s1, s2, s3]).unwrap();
        let back = CocyclePath::from_json(&path.to_json()).unwrap();
        assert_eq!(back, path);
        assert_eq!(sample_path(&back, 0.77).unwrap(), sample_path(&path, 0.77).unwrap());
    }

    #[test]
    fn grid_is_nested() {
        let g = dyadic_grid(100);
        assert_eq!(g.len(), 129);
        assert!(dyadic_grid(257).len() == 257);
        let fine = dyadic_grid(200);
        assert!(g.iter().all(|x| fine.contains(x)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn concatenated_radius_subadditive(s1 in 0u64..1000, s2 in 0u64..1000, s3 in 0u64..1000) {
            let a = random_cocycle(2, 2, s1);
            let b = random_cocycle(2, 2, s2);
            let c = random_cocycle(2, 2, s3);
            let p = blend(&a, &b);
            let q = blend(&b, &c);
            let pq = concat_paths(&p, &q).unwrap();
            let r = path_radius(&pq, 33).unwrap().radius;
            let bound = path_radius(&p, 33).unwrap().radius + path_radius(&q, 33).unwrap().radius + dist_cocycle(&a, &b).unwrap();
            prop_assert!(r <= bound + 1e-12);
        }

        #[test]
        fn radius_monotone_in_samples(seed in 0u64..1000, n in 2usize..60, extra in 0usize..60) {
            let a = random_cocycle(2, 2, seed);
            let b = random_cocycle(2, 2, seed + 1);
            let p = blend(&a, &b);
            prop_assert!(path_radius(&p, n).unwrap().radius <= path_radius(&p, n + extra).unwrap().radius);
        }

        #[test]
        fn segment_boundaries_continuous(seed in 0u64..1000) {
            let a = random_cocycle(2, 3, seed);
            let b = random_cocycle(2, 3, seed + 7);
            let c = random_cocycle(2, 3, seed + 9);
            let pq = concat_paths(&blend(&a, &b), &blend(&b, &c)).unwrap();
            let left = pq.segments()[0].eval(1.0).unwrap();
            let right = pq.segments()[1].eval(0.0).unwrap();
            prop_assert!(left.max_entry_diff(&right).unwrap() < 1e-12);
        }
    }
}
