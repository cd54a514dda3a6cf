//! Numerical certificates evaluated along a path.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::PeriodicCocycle;
use crate::error::{Error, Result};
use crate::path::{path_radius, sample_path, CocyclePath, PathRadiusReport};
use crate::spectral::{spectrum_of, stable_unstable_splitting, strong_gaps, Spectrum, GAP_TOL};

pub const DEFAULT_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub name: String,
    pub passed: bool,
    /// signed distance to the threshold; positive iff passed
    pub margin: f64,
    pub details: String,
    pub samples: usize,
}

impl Certificate {
    pub fn new(name: &str, margin: f64, details: String, samples: usize) -> Self {
        let margin = if margin.is_nan() { -f64::MAX } else { margin.clamp(-f64::MAX, f64::MAX) };
        Certificate { name: name.to_string(), passed: margin > 0.0, margin, details, samples }
    }

    fn failed(name: &str, details: String, samples: usize) -> Self {
        Certificate::new(name, -f64::MAX, details, samples)
    }
}

/// Uniform grid with `n` points together with the grid for ⌈n/2⌉, recursively,
/// so the times used for 2n samples always include those for n.
fn nested_grid(n: usize, out: &mut Vec<f64>) {
    let n = n.max(2);
    out.extend((0..n).map(|k| k as f64 / (n - 1) as f64));
    if n > 2 {
        nested_grid(n.div_ceil(2), out);
    }
}

/// Sample times for a certificate: the nested grid plus all segment boundaries.
pub fn sample_times(path: &CocyclePath, samples: usize) -> Vec<f64> {
    let mut t = Vec::new();
    nested_grid(samples, &mut t);
    t.extend(path.boundaries());
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

fn spectra_along(path: &CocyclePath, times: &[f64]) -> Vec<Result<Spectrum>> {
    times.par_iter().map(|&t| spectrum_of(&sample_path(path, t)?)).collect()
}

fn inverse_log_moduli(lm: &[f64]) -> Vec<f64> {
    lm.iter().rev().map(|l| -l).collect()
}

pub fn check_flag_persistence(path: &CocyclePath, i_set: &BTreeSet<usize>, j_set: &BTreeSet<usize>, samples: usize) -> Certificate {
    const NAME: &str = "flag_persistence";
    let times = sample_times(path, samples);
    let n = times.len();
    let d = path.start().dim();
    if i_set.iter().chain(j_set).any(|&k| k == 0 || k > d) {
        return Certificate::failed(NAME, format!("index sets {i_set:?}, {j_set:?} outside 1..={d}"), n);
    }
    let mut margin = f64::INFINITY;
    let mut at = 0.0;
    for (t, spec) in times.iter().zip(spectra_along(path, &times)) {
        let spec = match spec {
            Ok(s) => s,
            Err(e) => return Certificate::failed(NAME, format!("spectrum failed at t={t}: {e}"), n),
        };
        let gs = strong_gaps(&spec.log_moduli);
        let gu = strong_gaps(&inverse_log_moduli(&spec.log_moduli));
        let local = i_set
            .iter()
            .map(|&i| gs[i - 1])
            .chain(j_set.iter().map(|&j| gu[j - 1]))
            .fold(f64::INFINITY, f64::min)
            - GAP_TOL;
        if local < margin {
            margin = local;
            at = *t;
        }
    }
    if margin == f64::INFINITY {
        return Certificate::new(NAME, 1.0, "no indices to check".into(), n);
    }
    Certificate::new(NAME, margin, format!("I={i_set:?} J={j_set:?}, smallest gap at t={at}"), n)
}

/// Largest relative deviation of sorted moduli from those at t = 0.
pub fn check_moduli_invariance(path: &CocyclePath, tol: f64, samples: usize) -> Certificate {
    const NAME: &str = "moduli_invariance";
    let times = sample_times(path, samples);
    let n = times.len();
    let reference = match spectrum_of(path.start()) {
        Ok(s) => s,
        Err(e) => return Certificate::failed(NAME, format!("spectrum at t=0: {e}"), n),
    };
    let mut worst = (0.0f64, 0.0);
    for (t, spec) in times.iter().zip(spectra_along(path, &times)) {
        let spec = match spec {
            Ok(s) => s,
            Err(e) => return Certificate::failed(NAME, format!("spectrum failed at t={t}: {e}"), n),
        };
        let dev = spec
            .log_moduli
            .iter()
            .zip(&reference.log_moduli)
            .map(|(a, b)| (a - b).exp_m1().abs())
            .fold(0.0, f64::max);
        if dev > worst.0 {
            worst = (dev, *t);
        }
    }
    Certificate::new(NAME, tol - worst.0, format!("max relative modulus change {:.3e} at t={}", worst.0, worst.1), n)
}

/// Largest relative deviation of matched eigenvalues from those at t = 0.
pub fn check_eigen_invariance(path: &CocyclePath, tol: f64, samples: usize) -> Certificate {
    const NAME: &str = "eigen_invariance";
    let times = sample_times(path, samples);
    let n = times.len();
    let reference = match spectrum_of(path.start()) {
        Ok(s) => s,
        Err(e) => return Certificate::failed(NAME, format!("spectrum at t=0: {e}"), n),
    };
    let mut worst = (0.0f64, 0.0);
    for (t, spec) in times.iter().zip(spectra_along(path, &times)) {
        let spec = match spec {
            Ok(s) => s,
            Err(e) => return Certificate::failed(NAME, format!("spectrum failed at t={t}: {e}"), n),
        };
        let dev = eigen_deviation(&spec, &reference);
        if dev > worst.0 {
            worst = (dev, *t);
        }
    }
    Certificate::new(NAME, tol - worst.0, format!("max relative eigenvalue change {:.3e} at t={}", worst.0, worst.1), n)
}

/// Relative distance between sorted eigenvalue lists, computed on unit
/// phases and log moduli so that huge or tiny eigenvalues compare fairly.
pub fn eigen_deviation(a: &Spectrum, b: &Spectrum) -> f64 {
    a.eigenvalues
        .iter()
        .zip(&b.eigenvalues)
        .zip(a.log_moduli.iter().zip(&b.log_moduli))
        .map(|((za, zb), (la, lb))| {
            let pa = za / za.norm();
            let pb = zb / zb.norm();
            let ratio = pa * (la - lb).exp();
            (ratio - pb).norm()
        })
        .fold(0.0, f64::max)
}

pub fn check_radius_bound(path: &CocyclePath, delta: f64, samples: usize) -> Certificate {
    match path_radius(path, samples.max(2)) {
        Ok(r) => radius_certificate(&r, delta),
        Err(e) => Certificate::failed("radius_bound", format!("radius failed: {e}"), 0),
    }
}

/// Radius certificate from an already measured radius.
pub fn radius_certificate(r: &PathRadiusReport, delta: f64) -> Certificate {
    Certificate::new(
        "radius_bound",
        delta - r.radius,
        format!("radius {:.6e} (t={}, map {}) against {delta}", r.radius, r.argmax_t, r.argmax_n),
        r.sample_count,
    )
}

/// Moduli pairwise distinct and away from 1 at every sampled time.
pub fn check_moduli_separated(path: &CocyclePath, samples: usize) -> Certificate {
    const NAME: &str = "moduli_separated";
    let times = sample_times(path, samples);
    let n = times.len();
    let mut worst = (f64::INFINITY, 0.0);
    for (t, spec) in times.iter().zip(spectra_along(path, &times)) {
        let spec = match spec {
            Ok(s) => s,
            Err(e) => return Certificate::failed(NAME, format!("spectrum failed at t={t}: {e}"), n),
        };
        let from_one = spec.log_moduli.iter().map(|l| -(-l.abs()).exp_m1()).fold(f64::INFINITY, f64::min);
        let local = spec.min_relative_gap().min(from_one);
        if local < worst.0 {
            worst = (local, *t);
        }
    }
    Certificate::new(NAME, worst.0 - GAP_TOL, format!("smallest relative separation {:.3e} at t={}", worst.0, worst.1), n)
}

pub fn check_terminal_angle(end: &PeriodicCocycle, bound: f64) -> Certificate {
    const NAME: &str = "terminal_angle";
    match stable_unstable_splitting(end) {
        Ok(s) => {
            let a = s.min_angle();
            Certificate::new(NAME, bound - a, format!("min stable/unstable angle {a:.6e} against {bound}"), 1)
        }
        Err(e) => Certificate::failed(NAME, format!("splitting failed: {e}"), 1),
    }
}

pub fn check_terminal_real(end: &PeriodicCocycle) -> Certificate {
    const NAME: &str = "terminal_real";
    match spectrum_of(end) {
        Ok(s) => {
            let worst = s.eigenvalues.iter().map(|z| z.im.abs() / (1.0 + z.norm())).fold(0.0, f64::max);
            Certificate::new(NAME, 1e-8 - worst, format!("largest relative imaginary part {worst:.3e}"), 1)
        }
        Err(e) => Certificate::failed(NAME, format!("spectrum failed: {e}"), 1),
    }
}

/// Every terminal modulus below ε or above 1/ε.
pub fn check_terminal_extreme(end: &PeriodicCocycle, epsilon: f64) -> Certificate {
    const NAME: &str = "terminal_extreme";
    match spectrum_of(end) {
        Ok(s) => {
            let target = -epsilon.ln();
            let margin = s.log_moduli.iter().map(|l| l.abs() - target).fold(f64::INFINITY, f64::min);
            Certificate::new(NAME, margin, format!("moduli {:?} against {epsilon}", s.moduli), 1)
        }
        Err(e) => Certificate::failed(NAME, format!("spectrum failed: {e}"), 1),
    }
}

/// Named thresholds a path is expected to meet. Absent entries are skipped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Goals {
    pub dim: usize,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub strong_stable: Option<BTreeSet<usize>>,
    #[serde(default)]
    pub strong_unstable: Option<BTreeSet<usize>>,
    #[serde(default)]
    pub moduli_tol: Option<f64>,
    #[serde(default)]
    pub eigen_tol: Option<f64>,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub moduli_separated: bool,
    #[serde(default)]
    pub terminal_angle: Option<f64>,
    #[serde(default)]
    pub terminal_real: bool,
    #[serde(default)]
    pub terminal_extreme: Option<f64>,
}

impl Goals {
    pub fn new(dim: usize) -> Self {
        Goals { dim, ..Default::default() }
    }
}

/// Run every certificate the goals ask for, in a fixed order.
pub fn verify_path(path: &CocyclePath, goals: &Goals) -> Result<Vec<Certificate>> {
    verify_path_measured(path, goals, None)
}

/// As `verify_path`, reusing a radius measured at the default sample count.
pub fn verify_path_measured(path: &CocyclePath, goals: &Goals, radius: Option<&PathRadiusReport>) -> Result<Vec<Certificate>> {
    if goals.dim != path.start().dim() {
        return Err(Error::InvalidArgument(format!("goals for dimension {} on a path of dimension {}", goals.dim, path.start().dim())));
    }
    let samples = goals.samples.unwrap_or(DEFAULT_SAMPLES);
    let mut out = Vec::new();
    if goals.strong_stable.is_some() || goals.strong_unstable.is_some() {
        let empty = BTreeSet::new();
        out.push(check_flag_persistence(
            path,
            goals.strong_stable.as_ref().unwrap_or(&empty),
            goals.strong_unstable.as_ref().unwrap_or(&empty),
            samples,
        ));
    }
    if let Some(tol) = goals.moduli_tol {
        out.push(check_moduli_invariance(path, tol, samples));
    }
    if let Some(tol) = goals.eigen_tol {
        out.push(check_eigen_invariance(path, tol, samples));
    }
    if let Some(delta) = goals.radius {
        out.push(match radius {
            Some(r) => radius_certificate(r, delta),
            None => check_radius_bound(path, delta, crate::path::DEFAULT_RADIUS_SAMPLES),
        });
    }
    if goals.moduli_separated {
        out.push(check_moduli_separated(path, samples));
    }
    let needs_end = goals.terminal_angle.is_some() || goals.terminal_real || goals.terminal_extreme.is_some();
    if needs_end {
        let end = path.end()?;
        if let Some(b) = goals.terminal_angle {
            out.push(check_terminal_angle(&end, b));
        }
        if goals.terminal_real {
            out.push(check_terminal_real(&end));
        }
        if let Some(e) = goals.terminal_extreme {
            out.push(check_terminal_extreme(&end, e));
        }
    }
    Ok(out)
}

pub fn all_passed(certs: &[Certificate]) -> bool {
    certs.iter().all(|c| c.passed)
}

/// Plain-text table of certificates.
pub fn render_table(certs: &[Certificate]) -> String {
    let mut s = format!("{:<32} {:<6} {:>14} {:>8}  details\n", "certificate", "status", "margin", "samples");
    for c in certs {
        s.push_str(&format!(
            "{:<32} {:<6} {:>14.6e} {:>8}  {}\n",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.margin,
            c.samples,
            c.details
        ));
    }
    s
}
