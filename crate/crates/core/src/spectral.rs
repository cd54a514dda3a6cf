//! Spectrum of the first return, strong stable/unstable structure, saddle
//! splittings and subspace angles.
//!
//! Everything is computed from a periodic ordered Schur form obtained by
//! deflation: the dominant eigen-cluster of the (rescaled) first return is
//! isolated with an ordered real Schur form, its frame is carried around the
//! orbit, and the construction recurses on the orthogonal complement. Moduli
//! are kept as logarithms, so products spanning hundreds of orders of
//! magnitude stay representable.

use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cocycle::PeriodicCocycle;
use crate::error::{Error, Result};
use crate::linalg::{
    complete_basis, orthonormalize, product_2x2_dd, smallest_principal_angle, subspace_sine, Mat, RealSchur,
};

/// Relative modulus window grouping eigenvalues into one Schur cluster.
pub const CLUSTER_TOL: f64 = 1e-6;
/// Relative strict-gap margin for strong-dimension membership.
pub const GAP_TOL: f64 = 1e-9;
/// Residual below which a subbundle counts as invariant.
pub const INVARIANCE_TOL: f64 = 1e-7;
/// |Im λ| above this times max(1, |λ|) marks a complex pair.
pub const COMPLEX_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    pub moduli: Vec<f64>,
    pub log_moduli: Vec<f64>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.moduli.len()
    }

    pub fn is_real(&self) -> bool {
        self.eigenvalues.iter().all(|z| z.im == 0.0)
    }

    /// Smallest relative gap between consecutive moduli.
    pub fn min_relative_gap(&self) -> f64 {
        self.log_moduli.windows(2).map(|w| 1.0 - (w[0] - w[1]).exp()).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Serialize, Deserialize)]
struct ComplexDoc {
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct SpectrumDoc {
    v: u32,
    eigenvalues: Vec<ComplexDoc>,
    moduli: Vec<f64>,
    log_moduli: Vec<f64>,
}

impl Serialize for Spectrum {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SpectrumDoc {
            v: 1,
            eigenvalues: self.eigenvalues.iter().map(|z| ComplexDoc { re: z.re, im: z.im }).collect(),
            moduli: self.moduli.clone(),
            log_moduli: self.log_moduli.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Spectrum {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = SpectrumDoc::deserialize(d)?;
        Ok(Spectrum {
            eigenvalues: doc.eigenvalues.into_iter().map(|z| Complex64::new(z.re, z.im)).collect(),
            moduli: doc.moduli,
            log_moduli: doc.log_moduli,
        })
    }
}

/// One diagonal block of the periodic Schur form.
#[derive(Debug, Clone)]
pub struct SchurBlock {
    pub start: usize,
    pub size: usize,
    /// unit-modulus phases of the eigenvalues
    pub phases: Vec<Complex64>,
    pub log_moduli: Vec<f64>,
}

impl SchurBlock {
    pub fn is_complex_pair(&self) -> bool {
        self.size == 2 && self.phases[0].im != 0.0
    }
}

/// Orthogonal frames `q[n]` such that `q[n+1]ᵀ A_n q[n]` is block upper
/// triangular, with blocks ordered by decreasing modulus.
#[derive(Debug, Clone)]
pub struct PeriodicSchur {
    pub q: Vec<Mat>,
    pub blocks: Vec<SchurBlock>,
}

impl PeriodicSchur {
    pub fn new(c: &PeriodicCocycle) -> Result<Self> {
        let (q, blocks) = deflate(c.maps())?;
        Ok(PeriodicSchur { q, blocks })
    }

    /// Triangular factor T_n = q[n+1]ᵀ A_n q[n].
    pub fn factor(&self, c: &PeriodicCocycle, n: usize) -> Mat {
        let p = self.q.len();
        self.q[(n + 1) % p].transpose() * c.map(n) * &self.q[n % p]
    }

    /// Dimensions at which the flag can be cut without splitting a block.
    pub fn cut_points(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.start + b.size).collect()
    }

    pub fn leading_frames(&self, k: usize) -> Vec<Mat> {
        self.q.iter().map(|q| q.columns(0, k).into_owned()).collect()
    }
}

fn scaled_product(maps: &[Mat]) -> Mat {
    let d = maps[0].nrows();
    let mut b = Mat::identity(d, d);
    for a in maps {
        b = a * b;
        let n = b.amax();
        if n > 0.0 && n.is_finite() {
            b /= n;
        }
    }
    b
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Eigenvalues of a sub-cocycle whose eigenvalues all have (nearly) equal modulus.
fn cluster_eigenvalues(maps: &[Mat]) -> Result<(Vec<Complex64>, Vec<f64>)> {
    let k = maps[0].nrows();
    let mut log_det = 0.0;
    let mut det_sign = 1.0;
    for m in maps {
        let det = if k == 1 { m[(0, 0)] } else { m.clone().lu().determinant() };
        if det == 0.0 || !det.is_finite() {
            return Err(Error::NumericalFailure("degenerate diagonal block".into()));
        }
        log_det += det.abs().ln();
        det_sign *= sign(det);
    }
    match k {
        1 => Ok((vec![Complex64::new(det_sign, 0.0)], vec![log_det])),
        2 => {
            let (m, e) = product_2x2_dd(maps);
            let tr = m[0][0].add(m[1][1]);
            let diff = m[0][0].add(m[1][1].neg());
            let disc = diff.mul(diff).add(m[0][1].mul(m[1][0]).mul_f(4.0)).value();
            let ln2 = std::f64::consts::LN_2;
            let half_log = 0.5 * log_det;
            let tr = tr.value();
            if disc < 0.0 {
                let im = 0.5 * (-disc).sqrt();
                let re = 0.5 * tr;
                let abs = re.hypot(im);
                let modulus = half_log.exp();
                if im / abs > COMPLEX_TOL * (1.0f64).max(1.0 / modulus) && det_sign > 0.0 {
                    let ph = Complex64::new(re / abs, im / abs);
                    return Ok((vec![ph, ph.conj()], vec![half_log, half_log]));
                }
                // numerically a real double root
                let s = Complex64::new(sign(tr), 0.0);
                return Ok((vec![s, s], vec![half_log, half_log]));
            }
            let root = disc.sqrt();
            let mu1 = 0.5 * (tr + sign(tr) * root);
            if mu1 == 0.0 {
                return Err(Error::NumericalFailure("vanishing block product".into()));
            }
            let lm1 = mu1.abs().ln() + e as f64 * ln2;
            let lm2 = log_det - lm1;
            let s1 = sign(mu1);
            let s2 = det_sign * s1;
            Ok((vec![Complex64::new(s1, 0.0), Complex64::new(s2, 0.0)], vec![lm1, lm2]))
        }
        _ => {
            let mut b = Mat::identity(k, k);
            let mut log_scale = 0.0;
            for a in maps {
                b = a * b;
                let n = b.amax();
                b /= n;
                log_scale += n.ln();
            }
            let eig = b.complex_eigenvalues();
            let mut phases = Vec::with_capacity(k);
            let mut lms = Vec::with_capacity(k);
            for z in eig.iter() {
                let a = z.norm();
                if a == 0.0 {
                    return Err(Error::NumericalFailure("vanishing eigenvalue in cluster".into()));
                }
                let mut ph = z / a;
                if ph.im.abs() <= COMPLEX_TOL {
                    ph = Complex64::new(sign(ph.re), 0.0);
                }
                phases.push(ph);
                lms.push(a.ln() + log_scale);
            }
            // keep the product of moduli exact
            let shift = (log_det - lms.iter().sum::<f64>()) / k as f64;
            for l in lms.iter_mut() {
                *l += shift;
            }
            Ok((phases, lms))
        }
    }
}

fn block_from_cluster(start: usize, maps: &[Mat]) -> Result<SchurBlock> {
    let (phases, log_moduli) = cluster_eigenvalues(maps)?;
    Ok(SchurBlock { start, size: maps[0].nrows(), phases, log_moduli })
}

const MAX_CYCLES: usize = 60;

fn deflate(maps: &[Mat]) -> Result<(Vec<Mat>, Vec<SchurBlock>)> {
    let d = maps[0].nrows();
    let p = maps.len();
    if d == 0 {
        return Ok((vec![Mat::zeros(0, 0); p], Vec::new()));
    }
    let whole = |maps: &[Mat]| -> Result<(Vec<Mat>, Vec<SchurBlock>)> {
        Ok((vec![Mat::identity(d, d); p], vec![block_from_cluster(0, maps)?]))
    };
    if d == 1 {
        return whole(maps);
    }
    let b = scaled_product(maps);
    let mut schur = RealSchur::new(&b)?;
    let top = schur.blocks().iter().map(|&bl| schur.block_modulus(bl)).fold(0.0, f64::max);
    if !(top > 0.0) {
        return Err(Error::NumericalFailure("first return collapsed to zero".into()));
    }
    let in_cluster = move |s: &RealSchur, bl| s.block_modulus(bl) >= top * (1.0 - CLUSTER_TOL);
    if schur.blocks().iter().all(|&bl| in_cluster(&schur, bl)) {
        return whole(maps);
    }
    let k = schur.reorder_front(in_cluster)?;
    let mut f0 = schur.q.columns(0, k).into_owned();

    let mut frames: Vec<Mat> = Vec::new();
    let mut last = f64::INFINITY;
    for cycle in 0..MAX_CYCLES {
        frames.clear();
        frames.push(f0.clone());
        let mut f = f0.clone();
        for a in &maps[..p - 1] {
            f = orthonormalize(&(a * &f));
            frames.push(f.clone());
        }
        let fp = orthonormalize(&(&maps[p - 1] * &f));
        let r = subspace_sine(&f0, &fp);
        if r < 1e-14 || (cycle >= 3 && r > 0.5 * last) {
            break;
        }
        last = r;
        f0 = fp;
    }

    let full: Vec<Mat> = frames.iter().map(complete_basis).collect();
    let mut top_maps = Vec::with_capacity(p);
    let mut rest_maps = Vec::with_capacity(p);
    for n in 0..p {
        let t = full[(n + 1) % p].transpose() * &maps[n] * &full[n];
        top_maps.push(t.view((0, 0), (k, k)).into_owned());
        rest_maps.push(t.view((k, k), (d - k, d - k)).into_owned());
    }
    let head = block_from_cluster(0, &top_maps)?;
    let (sub_q, sub_blocks) = deflate(&rest_maps)?;
    let mut q = Vec::with_capacity(p);
    for n in 0..p {
        let mut m = full[n].clone();
        let g = full[n].columns(k, d - k) * &sub_q[n];
        m.view_mut((0, k), (d, d - k)).copy_from(&g);
        q.push(m);
    }
    let mut blocks = vec![head];
    blocks.extend(sub_blocks.into_iter().map(|mut b| {
        b.start += k;
        b
    }));
    Ok((q, blocks))
}

fn spectrum_from_blocks(blocks: &[SchurBlock]) -> Spectrum {
    let mut items: Vec<(f64, Complex64)> = Vec::new();
    for b in blocks {
        for (ph, lm) in b.phases.iter().zip(&b.log_moduli) {
            items.push((*lm, *ph));
        }
    }
    items.sort_by(|a, b| {
        a.0.total_cmp(&b.0).then(a.1.re.total_cmp(&b.1.re)).then(a.1.im.total_cmp(&b.1.im))
    });
    let log_moduli: Vec<f64> = items.iter().map(|x| x.0).collect();
    let moduli: Vec<f64> = log_moduli.iter().map(|l| l.exp()).collect();
    let eigenvalues = items.iter().zip(&moduli).map(|((_, ph), m)| ph * *m).collect();
    Spectrum { eigenvalues, moduli, log_moduli }
}

pub fn spectrum_of(c: &PeriodicCocycle) -> Result<Spectrum> {
    Ok(spectrum_from_blocks(&PeriodicSchur::new(c)?.blocks))
}

/// Spectrum of the first return at another base point.
pub fn spectrum_at(c: &PeriodicCocycle, base: usize) -> Result<Spectrum> {
    c.check_base(base)?;
    spectrum_of(&c.rotated(base))
}

/// Membership margins: entry i−1 is 1 − |λ_i| / min(|λ_{i+1}|, 1) (positive
/// means a strict gap).
pub fn strong_gaps(log_moduli: &[f64]) -> Vec<f64> {
    let d = log_moduli.len();
    (0..d)
        .map(|i| {
            let next = if i + 1 < d { log_moduli[i + 1].min(0.0) } else { 0.0 };
            -(log_moduli[i] - next).exp_m1()
        })
        .collect()
}

pub fn strong_dims_from_log_moduli(log_moduli: &[f64]) -> BTreeSet<usize> {
    strong_gaps(log_moduli)
        .iter()
        .enumerate()
        .filter(|(_, g)| **g > GAP_TOL)
        .map(|(i, _)| i + 1)
        .collect()
}

fn inverse_log_moduli(log_moduli: &[f64]) -> Vec<f64> {
    log_moduli.iter().rev().map(|l| -l).collect()
}

pub fn strong_stable_dims(c: &PeriodicCocycle) -> Result<BTreeSet<usize>> {
    Ok(strong_dims_from_log_moduli(&spectrum_of(c)?.log_moduli))
}

pub fn strong_unstable_dims(c: &PeriodicCocycle) -> Result<BTreeSet<usize>> {
    Ok(strong_dims_from_log_moduli(&inverse_log_moduli(&spectrum_of(c)?.log_moduli)))
}

fn leading_bundle(schur: &PeriodicSchur, k: usize, log_moduli: &[f64]) -> Result<Vec<Mat>> {
    let dims = strong_dims_from_log_moduli(log_moduli);
    if !dims.contains(&k) {
        return Err(Error::NoStrongDirection(k));
    }
    if !schur.cut_points().contains(&k) {
        return Err(Error::IllConditionedGap(format!(
            "the {k} leading eigenvalues are not separated from the next cluster"
        )));
    }
    Ok(schur.leading_frames(k))
}

/// Per-fiber frames of the i-strong stable direction.
pub fn strong_stable_bundle(c: &PeriodicCocycle, i: usize) -> Result<Subbundle> {
    let inv = c.inverse()?;
    let schur = PeriodicSchur::new(&inv)?;
    let spec = spectrum_from_blocks(&schur.blocks);
    let inv_frames = leading_bundle(&schur, i, &inverse_log_moduli(&spec.log_moduli))?;
    let p = c.period();
    let frames = (0..p).map(|n| inv_frames[(p - n) % p].clone()).collect();
    Subbundle::new(c, frames)
}

/// Per-fiber frames of the j-strong unstable direction.
pub fn strong_unstable_bundle(c: &PeriodicCocycle, j: usize) -> Result<Subbundle> {
    let schur = PeriodicSchur::new(c)?;
    let spec = spectrum_from_blocks(&schur.blocks);
    let frames = leading_bundle(&schur, j, &inverse_log_moduli(&spec.log_moduli))?;
    Subbundle::new(c, frames)
}

pub fn strong_stable_space(c: &PeriodicCocycle, i: usize, base: usize) -> Result<Mat> {
    c.check_base(base)?;
    Ok(strong_stable_bundle(c, i)?.frames[base].clone())
}

pub fn strong_unstable_space(c: &PeriodicCocycle, j: usize, base: usize) -> Result<Mat> {
    c.check_base(base)?;
    Ok(strong_unstable_bundle(c, j)?.frames[base].clone())
}

pub fn is_saddle(c: &PeriodicCocycle, tol: f64) -> bool {
    match spectrum_of(c) {
        Ok(s) => saddle_from_moduli(&s.moduli, tol),
        Err(_) => false,
    }
}

fn saddle_from_moduli(moduli: &[f64], tol: f64) -> bool {
    moduli.iter().all(|m| (m - 1.0).abs() > tol) && moduli.iter().any(|&m| m < 1.0) && moduli.iter().any(|&m| m > 1.0)
}

/// One k-dimensional subspace per fiber, stored as orthonormal frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Subbundle {
    pub dim_fiber: usize,
    pub frames: Vec<Mat>,
    pub invariance_residual: f64,
}

impl Subbundle {
    /// Orthonormalizes the frames and measures invariance under `c`.
    pub fn new(c: &PeriodicCocycle, frames: Vec<Mat>) -> Result<Self> {
        if frames.len() != c.period() {
            return Err(Error::ShapeMismatch(format!("{} frames for period {}", frames.len(), c.period())));
        }
        let k = frames[0].ncols();
        for f in &frames {
            if f.nrows() != c.dim() || f.ncols() != k {
                return Err(Error::ShapeMismatch("frame shape differs from fiber".into()));
            }
        }
        let frames: Vec<Mat> = frames.iter().map(orthonormalize).collect();
        let residual = invariance_residual(c, &frames);
        Ok(Subbundle { dim_fiber: k, frames, invariance_residual: residual })
    }

    pub fn require_invariant(&self) -> Result<()> {
        if self.invariance_residual < INVARIANCE_TOL {
            Ok(())
        } else {
            Err(Error::NotInvariant { residual: self.invariance_residual })
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.frames[0].nrows()
    }
}

pub fn invariance_residual(c: &PeriodicCocycle, frames: &[Mat]) -> f64 {
    let p = c.period();
    (0..p)
        .map(|n| {
            let img = orthonormalize(&(c.map(n) * &frames[n]));
            subspace_sine(&frames[(n + 1) % p], &img)
        })
        .fold(0.0, f64::max)
}

#[derive(Serialize, Deserialize)]
struct FrameDoc {
    base: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SubbundleDoc {
    v: u32,
    dim_fiber: usize,
    ambient_dim: usize,
    invariance_residual: f64,
    frames: Vec<FrameDoc>,
}

impl Serialize for Subbundle {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SubbundleDoc {
            v: 1,
            dim_fiber: self.dim_fiber,
            ambient_dim: self.frames.first().map_or(0, |f| f.nrows()),
            invariance_residual: self.invariance_residual,
            frames: self
                .frames
                .iter()
                .enumerate()
                .map(|(n, f)| FrameDoc { base: n + 1, data: f.as_slice().to_vec() })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Subbundle {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = SubbundleDoc::deserialize(d)?;
        let mut frames = Vec::with_capacity(doc.frames.len());
        for (n, f) in doc.frames.into_iter().enumerate() {
            if f.base != n + 1 || f.data.len() != doc.ambient_dim * doc.dim_fiber {
                return Err(D::Error::custom(format!("malformed frame at base {}", f.base)));
            }
            frames.push(Mat::from_column_slice(doc.ambient_dim, doc.dim_fiber, &f.data));
        }
        Ok(Subbundle { dim_fiber: doc.dim_fiber, frames, invariance_residual: doc.invariance_residual })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleSplitting {
    pub stable: Subbundle,
    pub unstable: Subbundle,
    pub index: usize,
}

impl SaddleSplitting {
    /// Smallest stable/unstable angle over all fibers.
    pub fn min_angle(&self) -> f64 {
        self.stable
            .frames
            .iter()
            .zip(&self.unstable.frames)
            .map(|(e, f)| smallest_principal_angle(e, f))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn angles(&self) -> Vec<f64> {
        self.stable.frames.iter().zip(&self.unstable.frames).map(|(e, f)| smallest_principal_angle(e, f)).collect()
    }
}

pub fn stable_unstable_splitting(c: &PeriodicCocycle) -> Result<SaddleSplitting> {
    let spec = spectrum_of(c)?;
    if !saddle_from_moduli(&spec.moduli, GAP_TOL) {
        return Err(Error::NotSaddle(format!("moduli {:?}", spec.moduli)));
    }
    let index = spec.moduli.iter().filter(|&&m| m < 1.0).count();
    let stable = strong_stable_bundle(c, index)?;
    let unstable = strong_unstable_bundle(c, c.dim() - index)?;
    Ok(SaddleSplitting { stable, unstable, index })
}

pub fn min_angle(e: &Mat, f: &Mat) -> Result<f64> {
    if e.ncols() == 0 || f.ncols() == 0 {
        return Err(Error::InvalidArgument("zero-dimensional subspace".into()));
    }
    if e.nrows() != f.nrows() {
        return Err(Error::ShapeMismatch(format!("ambient dims {} and {}", e.nrows(), f.nrows())));
    }
    Ok(smallest_principal_angle(&orthonormalize(e), &orthonormalize(f)))
}

pub fn lyapunov_exponents(c: &PeriodicCocycle) -> Result<Vec<f64>> {
    let p = c.period() as f64;
    Ok(spectrum_of(c)?.log_moduli.iter().map(|l| l / p).collect())
}
