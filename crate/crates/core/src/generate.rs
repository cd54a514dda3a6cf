//! Seeded random cocycles with a bound on every map and its inverse.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cocycle::{bound_of, PeriodicCocycle};
use crate::error::{Error, Result};
use crate::linalg::{det2, inverse, rotation, Mat};
use crate::spectral::is_saddle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Generic,
    Saddle,
    #[serde(rename = "det_one_2d")]
    DetOne2d,
    PrescribedModuli,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub dim: usize,
    pub period: usize,
    pub bound: f64,
    pub kind: GeneratorKind,
    pub seed: u64,
    /// first-return moduli for `prescribed_moduli`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moduli: Option<Vec<f64>>,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, dim: usize, period: usize, bound: f64, seed: u64) -> Self {
        GeneratorSpec { dim, period, bound, kind, seed, moduli: None }
    }

    pub fn with_moduli(mut self, moduli: Vec<f64>) -> Self {
        self.moduli = Some(moduli);
        self
    }
}

const BOUND_SLACK: f64 = 1e-9;

fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> Mat {
    let g = Mat::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn generic(spec: &GeneratorSpec, rng: &mut ChaCha8Rng) -> Result<PeriodicCocycle> {
    let d = spec.dim;
    let log_c = spec.bound.ln();
    let maps = (0..spec.period)
        .map(|_| {
            let o1 = random_orthogonal(d, rng);
            if log_c == 0.0 {
                return o1;
            }
            let o2 = random_orthogonal(d, rng);
            let s = DVector::from_fn(d, |_, _| rng.gen_range(-log_c..=log_c).exp());
            o1 * Mat::from_diagonal(&s) * o2
        })
        .collect();
    PeriodicCocycle::new(maps)
}

/// A_n = P_{n+1} R_θn P_n⁻¹ with P_n ∈ SL(2) of norm at most √C, so the
/// first return is conjugate to a rotation.
fn det_one(spec: &GeneratorSpec, rng: &mut ChaCha8Rng) -> Result<PeriodicCocycle> {
    if spec.dim != 2 {
        return Err(Error::InfeasibleSpec(format!("det_one_2d needs dimension 2, got {}", spec.dim)));
    }
    let top = spec.bound.sqrt();
    let p = spec.period;
    let frames: Vec<Mat> = (0..p)
        .map(|_| {
            let s = rng.gen_range(1.0..=top);
            let a = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let b = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            rotation(a) * Mat::from_row_slice(2, 2, &[s, 0.0, 0.0, 1.0 / s]) * rotation(b)
        })
        .collect();
    let maps = (0..p)
        .map(|n| {
            let th = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let m = &frames[(n + 1) % p] * rotation(th) * inverse(&frames[n]).expect("SL(2) frame");
            // remove the rounding drift of the determinant
            let det = det2(&m);
            m / det.sqrt()
        })
        .collect();
    PeriodicCocycle::new(maps)
}

/// A_n = P_{n+1} (diag(μ^{1/p}) + strictly upper noise) P_n⁻¹; noise and
/// conjugation shrink until the bound holds.
fn triangular(spec: &GeneratorSpec, moduli: &[f64], rng: &mut ChaCha8Rng) -> Result<PeriodicCocycle> {
    let d = spec.dim;
    let p = spec.period;
    if moduli.len() != d || moduli.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
        return Err(Error::InfeasibleSpec(format!("need {d} positive moduli, got {moduli:?}")));
    }
    let rates: Vec<f64> = moduli.iter().map(|m| m.ln() / p as f64).collect();
    let worst = rates.iter().fold(0.0f64, |a, r| a.max(r.abs())).exp();
    if worst > spec.bound + BOUND_SLACK {
        return Err(Error::InfeasibleSpec(format!("moduli need per-step factor {worst:.6} above the bound {}", spec.bound)));
    }
    let diag = DVector::from_iterator(d, rates.iter().map(|r| r.exp()));
    let mut noise = 0.5;
    let mut tilt = 0.3;
    for _ in 0..40 {
        let frames: Vec<Mat> = (0..p)
            .map(|_| Mat::identity(d, d) + Mat::from_fn(d, d, |_, _| tilt * rng.gen_range(-1.0..1.0)))
            .collect();
        let maps: Option<Vec<Mat>> = (0..p)
            .map(|n| {
                let mut t = Mat::from_diagonal(&diag);
                for i in 0..d {
                    for j in i + 1..d {
                        t[(i, j)] = noise * rng.gen_range(-1.0..1.0);
                    }
                }
                inverse(&frames[n]).ok().map(|pi| &frames[(n + 1) % p] * t * pi)
            })
            .collect();
        if let Some(maps) = maps {
            if let Ok(c) = PeriodicCocycle::new(maps) {
                if bound_of(&c) <= spec.bound + BOUND_SLACK {
                    return Ok(c);
                }
            }
        }
        noise *= 0.5;
        tilt *= 0.5;
    }
    // diagonal fallback: conjugation-free, meets the bound exactly
    PeriodicCocycle::new(vec![Mat::from_diagonal(&diag); p])
}

fn saddle_moduli(spec: &GeneratorSpec, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let d = spec.dim;
    if d < 2 {
        return Err(Error::InfeasibleSpec("a saddle needs dimension at least 2".into()));
    }
    if spec.bound <= 1.0 {
        return Err(Error::InfeasibleSpec("a saddle needs a bound above 1".into()));
    }
    let stable = rng.gen_range(1..d);
    let top = spec.bound.ln();
    Ok((0..d)
        .map(|i| {
            let r = rng.gen_range(0.05 * top..=top);
            let r = if i < stable { -r } else { r };
            (r * spec.period as f64).exp()
        })
        .collect())
}

pub fn generate(spec: &GeneratorSpec) -> Result<PeriodicCocycle> {
    if spec.dim == 0 || spec.period == 0 {
        return Err(Error::InfeasibleSpec("dimension and period must be positive".into()));
    }
    if !(spec.bound >= 1.0 && spec.bound.is_finite()) {
        return Err(Error::InfeasibleSpec(format!("bound must be at least 1, got {}", spec.bound)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let c = match spec.kind {
        GeneratorKind::Generic => generic(spec, &mut rng)?,
        GeneratorKind::DetOne2d => det_one(spec, &mut rng)?,
        GeneratorKind::Saddle => {
            let moduli = match &spec.moduli {
                Some(m) => m.clone(),
                None => saddle_moduli(spec, &mut rng)?,
            };
            triangular(spec, &moduli, &mut rng)?
        }
        GeneratorKind::PrescribedModuli => {
            let moduli = spec.moduli.clone().ok_or_else(|| Error::InfeasibleSpec("prescribed_moduli needs `moduli`".into()))?;
            triangular(spec, &moduli, &mut rng)?
        }
    };
    if bound_of(&c) > spec.bound + BOUND_SLACK {
        return Err(Error::InfeasibleSpec(format!("generated bound {} exceeds {}", bound_of(&c), spec.bound)));
    }
    if spec.kind == GeneratorKind::Saddle && !is_saddle(&c, 1e-9) {
        return Err(Error::InfeasibleSpec("generated cocycle is not a saddle".into()));
    }
    Ok(c)
}
