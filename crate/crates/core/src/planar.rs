//! Fast stable/unstable splitting for two-dimensional cocycles.
//!
//! Eigenvectors of the first return are read off at fiber 0 and then carried
//! along the orbit in the numerically stable direction: unstable lines
//! forward, stable lines backward.

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::linalg::{det2, inverse, product_2x2_dd, Dd, Mat};

#[derive(Debug, Clone)]
pub struct PlanarSplitting {
    /// unit vectors spanning the stable line at each fiber
    pub stable: Vec<Vector2<f64>>,
    pub unstable: Vec<Vector2<f64>>,
    /// log moduli of the first return, stable first
    pub log_moduli: [f64; 2],
    /// signs of the two eigenvalues, stable first
    pub signs: [f64; 2],
}

impl PlanarSplitting {
    pub fn angles(&self) -> Vec<f64> {
        self.stable.iter().zip(&self.unstable).map(|(s, u)| line_angle(s, u)).collect()
    }

    pub fn min_angle(&self) -> f64 {
        self.angles().into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Angle in [0, π/2] between the lines spanned by two unit vectors.
pub fn line_angle(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let cross = (a.x * b.y - a.y * b.x).abs();
    let dot = (a.x * b.x + a.y * b.y).abs();
    cross.atan2(dot)
}

/// Dominant real eigenvalue and eigenvector of a scaled 2×2 product, with
/// the discriminant evaluated in double-double.
fn dominant(m: &[[Dd; 2]; 2]) -> Option<(f64, Vector2<f64>)> {
    let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    let diff = a.add(d.neg());
    let disc = diff.mul(diff).add(b.mul(c).mul_f(4.0)).value();
    if disc < 0.0 {
        return None;
    }
    let tr = a.add(d).value();
    let root = disc.sqrt();
    let mu = if tr >= 0.0 { 0.5 * (tr + root) } else { 0.5 * (tr - root) };
    let (av, bv, cv, dv) = (a.value(), b.value(), c.value(), d.value());
    let v1 = Vector2::new(bv, mu - av);
    let v2 = Vector2::new(mu - dv, cv);
    let v = if v1.norm() >= v2.norm() { v1 } else { v2 };
    let n = v.norm();
    if n == 0.0 || !n.is_finite() {
        // scalar-like product: every line is invariant
        return Some((mu, Vector2::new(1.0, 0.0)));
    }
    Some((mu, v / n))
}

pub fn planar_splitting(maps: &[Mat]) -> Result<PlanarSplitting> {
    let p = maps.len();
    if maps.iter().any(|m| m.nrows() != 2 || m.ncols() != 2) {
        return Err(Error::InvalidDim(maps[0].nrows()));
    }
    let (fwd, e) = product_2x2_dd(maps);
    let (mu, u0) = dominant(&fwd).ok_or(Error::EigenvaluesNotReal)?;
    let log_det: f64 = maps.iter().map(|m| det2(m).abs().ln()).sum();
    let det_sign: f64 = maps.iter().map(|m| det2(m).signum()).product();
    let lm_u = mu.abs().ln() + e as f64 * std::f64::consts::LN_2;
    let lm_s = log_det - lm_u;
    if !(lm_s < 0.0 && lm_u > 0.0) {
        return Err(Error::NotSaddle(format!("log moduli {lm_s:.3e}, {lm_u:.3e}")));
    }
    let inv: Vec<Mat> = maps.iter().map(inverse).collect::<Result<_>>()?;
    let rev: Vec<Mat> = inv.iter().rev().cloned().collect();
    let (bwd, _) = product_2x2_dd(&rev);
    let (_, s0) = dominant(&bwd).ok_or(Error::EigenvaluesNotReal)?;

    let as_vec = |m: &Mat, v: &Vector2<f64>| {
        let w = Vector2::new(m[(0, 0)] * v.x + m[(0, 1)] * v.y, m[(1, 0)] * v.x + m[(1, 1)] * v.y);
        w / w.norm()
    };
    let mut unstable = Vec::with_capacity(p);
    let mut u = u0;
    for m in maps {
        unstable.push(u);
        u = as_vec(m, &u);
    }
    let mut stable = vec![Vector2::zeros(); p];
    let mut s = s0;
    for n in (0..p).rev() {
        s = as_vec(&inv[n], &s);
        stable[n] = s;
    }
    let sign_u = mu.signum();
    Ok(PlanarSplitting { stable, unstable, log_moduli: [lm_s, lm_u], signs: [det_sign * sign_u, sign_u] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::PeriodicCocycle;
    use crate::spectral::{spectrum_of, stable_unstable_splitting};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_lines() {
        let a = Mat::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 2.0]);
        let s = planar_splitting(&vec![a; 3]).unwrap();
        assert!((s.min_angle() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((s.log_moduli[0] - 3.0 * 0.5f64.ln()).abs() < 1e-14);
        assert_eq!(s.signs, [1.0, 1.0]);
    }

    #[test]
    fn rejects_elliptic() {
        let r = crate::linalg::rotation(0.3);
        assert_eq!(planar_splitting(&[r]).unwrap_err(), Error::EigenvaluesNotReal);
    }

    #[test]
    fn matches_general_splitting() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        for _ in 0..40 {
            let maps: Vec<Mat> = (0..7).map(|_| Mat::from_fn(2, 2, |_, _| rng.gen_range(-1.5..1.5))).collect();
            let c = match PeriodicCocycle::new(maps.clone()) {
                Ok(c) => c,
                Err(_) => continue,
            };
            let (Ok(fast), Ok(slow)) = (planar_splitting(&maps), stable_unstable_splitting(&c)) else { continue };
            let spec = spectrum_of(&c).unwrap();
            assert!((fast.log_moduli[0] - spec.log_moduli[0]).abs() < 1e-9);
            for (x, y) in fast.angles().iter().zip(slow.angles()) {
                assert!((x - y).abs() < 1e-8, "{x} vs {y}");
            }
            assert_eq!(fast.signs[1], spec.eigenvalues[1].re.signum());
            checked += 1;
        }
        assert!(checked > 10);
    }
}
