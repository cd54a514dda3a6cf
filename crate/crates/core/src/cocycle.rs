//! Periodic linear cocycles and the metric on tuples of matrices.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, cond, inverse, op_norm, Mat};

/// Matrices with a larger condition number are rejected.
pub const COND_CEILING: f64 = 1e12;

/// Tuple of invertible d×d maps; `maps[k]` carries fiber k to fiber k+1 (mod p).
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicCocycle {
    dim: usize,
    maps: Vec<Mat>,
}

impl PeriodicCocycle {
    pub fn new(maps: Vec<Mat>) -> Result<Self> {
        Self::with_ceiling(maps, COND_CEILING)
    }

    pub fn with_ceiling(maps: Vec<Mat>, ceiling: f64) -> Result<Self> {
        let first = maps.first().ok_or_else(|| Error::InvalidArgument("period must be at least 1".into()))?;
        let dim = first.nrows();
        if dim == 0 {
            return Err(Error::InvalidMatrix("dimension must be positive".into()));
        }
        for (n, m) in maps.iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::ShapeMismatch(format!("map {} is {}x{}, expected {dim}x{dim}", n + 1, m.nrows(), m.ncols())));
            }
            if !all_finite(m) {
                return Err(Error::InvalidMatrix(format!("map {} has non-finite entries", n + 1)));
            }
            let k = cond(m);
            if !(k < ceiling) {
                return Err(Error::InvalidMatrix(format!("map {} has condition number {k:e}", n + 1)));
            }
        }
        Ok(PeriodicCocycle { dim, maps })
    }

    /// Build from row-major entries, one slice per map.
    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut maps = Vec::with_capacity(rows.len());
        for (n, r) in rows.iter().enumerate() {
            if r.len() != dim * dim {
                return Err(Error::ShapeMismatch(format!("map {} has {} entries, expected {}", n + 1, r.len(), dim * dim)));
            }
            maps.push(Mat::from_row_slice(dim, dim, r));
        }
        Self::new(maps)
    }

    pub fn constant(m: Mat, period: usize) -> Result<Self> {
        Self::new(vec![m; period])
    }

    /// Skip validation; used for internal intermediate cocycles whose maps
    /// are known to be invertible.
    pub(crate) fn from_maps_unchecked(maps: Vec<Mat>) -> Self {
        let dim = maps[0].nrows();
        PeriodicCocycle { dim, maps }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> usize {
        self.maps.len()
    }

    pub fn maps(&self) -> &[Mat] {
        &self.maps
    }

    /// Map leaving fiber `n` (indices mod p).
    pub fn map(&self, n: usize) -> &Mat {
        &self.maps[n % self.maps.len()]
    }

    pub fn check_base(&self, base: usize) -> Result<()> {
        if base >= self.period() {
            return Err(Error::InvalidBase { base, period: self.period() });
        }
        Ok(())
    }

    /// Product of the p maps starting at fiber `base`.
    pub fn first_return(&self, base: usize) -> Result<Mat> {
        self.check_base(base)?;
        let p = self.period();
        let mut b = Mat::identity(self.dim, self.dim);
        for k in 0..p {
            b = self.map(base + k) * b;
        }
        Ok(b)
    }

    /// Inverse cocycle: fiber m of the inverse corresponds to fiber −m mod p.
    pub fn inverse(&self) -> Result<Self> {
        let p = self.period();
        let maps = (0..p).map(|m| inverse(&self.maps[p - 1 - m])).collect::<Result<Vec<_>>>()?;
        Ok(PeriodicCocycle { dim: self.dim, maps })
    }

    /// Same cocycle with fiber `shift` relabeled as fiber 0.
    pub fn rotated(&self, shift: usize) -> Self {
        let p = self.period();
        let maps = (0..p).map(|k| self.maps[(k + shift) % p].clone()).collect();
        PeriodicCocycle { dim: self.dim, maps }
    }

    /// The cocycle traversed `times` times (period times·p).
    pub fn repeated(&self, times: usize) -> Self {
        let mut maps = Vec::with_capacity(self.period() * times);
        for _ in 0..times {
            maps.extend(self.maps.iter().cloned());
        }
        PeriodicCocycle { dim: self.dim, maps }
    }

    pub fn inverse_maps(&self) -> Result<Vec<Mat>> {
        self.maps.iter().map(inverse).collect()
    }

    /// Largest entrywise difference to another cocycle of the same shape.
    pub fn max_entry_diff(&self, other: &Self) -> Result<f64> {
        same_shape(self, other)?;
        Ok(self
            .maps
            .iter()
            .zip(&other.maps)
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cocycle serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn same_shape(a: &PeriodicCocycle, b: &PeriodicCocycle) -> Result<()> {
    if a.dim != b.dim || a.period() != b.period() {
        return Err(Error::ShapeMismatch(format!(
            "({}, {}) vs ({}, {})",
            a.dim,
            a.period(),
            b.dim,
            b.period()
        )));
    }
    Ok(())
}

pub fn operator_norm(m: &Mat) -> Result<f64> {
    crate::linalg::checked_op_norm(m)
}

/// max_n max(‖A_n − B_n‖, ‖A_n⁻¹ − B_n⁻¹‖)
pub fn dist_cocycle(a: &PeriodicCocycle, b: &PeriodicCocycle) -> Result<f64> {
    same_shape(a, b)?;
    let mut worst = 0.0f64;
    for (x, y) in a.maps.iter().zip(&b.maps) {
        if x == y {
            continue;
        }
        let fwd = op_norm(&(x - y));
        let bwd = op_norm(&(inverse(x)? - inverse(y)?));
        worst = worst.max(fwd).max(bwd);
    }
    Ok(worst)
}

/// C = max_n max(‖A_n‖, ‖A_n⁻¹‖)
pub fn bound_of(c: &PeriodicCocycle) -> f64 {
    c.maps
        .iter()
        .map(|m| {
            let s = crate::linalg::singular_values(m);
            let hi = s[0];
            let lo = *s.last().unwrap();
            hi.max(1.0 / lo)
        })
        .fold(0.0, f64::max)
}

#[derive(Serialize, Deserialize)]
struct CocycleDoc {
    v: u32,
    dim: usize,
    period: usize,
    matrices: Vec<Vec<f64>>,
}

pub(crate) fn row_major(m: &Mat) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

impl Serialize for PeriodicCocycle {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CocycleDoc { v: 1, dim: self.dim, period: self.period(), matrices: self.maps.iter().map(row_major).collect() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PeriodicCocycle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = CocycleDoc::deserialize(d)?;
        if doc.v != 1 {
            return Err(D::Error::custom(format!("unsupported document version {}", doc.v)));
        }
        if doc.matrices.len() != doc.period {
            return Err(D::Error::custom(format!("period {} but {} matrices", doc.period, doc.matrices.len())));
        }
        PeriodicCocycle::from_rows(doc.dim, &doc.matrices).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cocycle(d: usize, p: usize, seed: u64) -> PeriodicCocycle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let maps = (0..p)
            .map(|_| Mat::from_fn(d, d, |i, j| rng.gen_range(-0.5..0.5) + if i == j { 1.5 } else { 0.0 }))
            .collect();
        PeriodicCocycle::new(maps).unwrap()
    }

    fn diag(v: &[f64]) -> Mat {
        Mat::from_diagonal(&nalgebra::DVector::from_column_slice(v))
    }

    #[test]
    fn norm_examples() {
        assert!((operator_norm(&Mat::identity(3, 3)).unwrap() - 1.0).abs() < 1e-15);
        assert!((operator_norm(&diag(&[2.0, 0.5])).unwrap() - 2.0).abs() < 1e-15);
        let mut bad = Mat::identity(2, 2);
        bad[(0, 1)] = f64::NAN;
        assert!(matches!(operator_norm(&bad), Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn first_return_examples() {
        let c = PeriodicCocycle::new(vec![diag(&[2.0, 0.5]), diag(&[0.5, 2.0])]).unwrap();
        assert_eq!(c.first_return(0).unwrap(), Mat::identity(2, 2));
        assert!(matches!(c.first_return(2), Err(Error::InvalidBase { base: 2, period: 2 })));
        let c = random_cocycle(3, 5, 42);
        let fold = c.maps().iter().fold(Mat::identity(3, 3), |acc, a| a * acc);
        assert!((c.first_return(0).unwrap() - fold).abs().max() < 1e-12);
    }

    #[test]
    fn return_maps_are_conjugate() {
        let c = random_cocycle(3, 6, 5);
        for b in 0..5 {
            let a = c.map(b);
            let lhs = c.first_return(b + 1).unwrap();
            let rhs = a * c.first_return(b).unwrap() * inverse(a).unwrap();
            assert!((lhs - rhs).abs().max() < 1e-10);
        }
    }

    #[test]
    fn dist_examples() {
        let c1 = PeriodicCocycle::new(vec![Mat::identity(2, 2)]).unwrap();
        let c2 = PeriodicCocycle::new(vec![diag(&[2.0, 1.0])]).unwrap();
        assert_eq!(dist_cocycle(&c1, &c1).unwrap(), 0.0);
        assert!((dist_cocycle(&c1, &c2).unwrap() - 1.0).abs() < 1e-15);
        let c3 = PeriodicCocycle::new(vec![Mat::identity(3, 3)]).unwrap();
        assert!(matches!(dist_cocycle(&c1, &c3), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn bound_examples() {
        assert_eq!(bound_of(&PeriodicCocycle::new(vec![Mat::identity(2, 2); 3]).unwrap()), 1.0);
        let c = PeriodicCocycle::new(vec![diag(&[3.0, 0.5])]).unwrap();
        assert!((bound_of(&c) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_singular_and_ragged() {
        assert!(PeriodicCocycle::new(vec![diag(&[1.0, 0.0])]).is_err());
        assert!(matches!(
            PeriodicCocycle::new(vec![Mat::identity(2, 2), Mat::identity(3, 3)]),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(PeriodicCocycle::new(vec![]).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let c = random_cocycle(3, 4, 77);
        let back = PeriodicCocycle::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert!(PeriodicCocycle::from_json("{\"v\":1,\"dim\":2}").is_err());
    }

    #[test]
    fn inverse_cocycle_returns_inverse_products() {
        let c = random_cocycle(3, 4, 8);
        let inv = c.inverse().unwrap();
        // fiber 0 of the inverse is fiber 0 of the original
        let prod = inv.first_return(0).unwrap() * c.first_return(0).unwrap();
        assert!((prod - Mat::identity(3, 3)).abs().max() < 1e-10);
    }

    proptest! {
        #[test]
        fn metric_axioms(s1 in 0u64..1000, s2 in 0u64..1000, s3 in 0u64..1000) {
            let a = random_cocycle(2, 3, s1);
            let b = random_cocycle(2, 3, s2);
            let c = random_cocycle(2, 3, s3);
            let ab = dist_cocycle(&a, &b).unwrap();
            let ba = dist_cocycle(&b, &a).unwrap();
            let bc = dist_cocycle(&b, &c).unwrap();
            let ac = dist_cocycle(&a, &c).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!(ac <= ab + bc + 1e-12);
            if s1 != s2 { prop_assert!(ab > 0.0); }
        }

        #[test]
        fn product_is_lipschitz(s1 in 0u64..1000, s2 in 0u64..1000) {
            let a = random_cocycle(2, 3, s1);
            let b = random_cocycle(2, 3, s2);
            let p = 3.0;
            let c = bound_of(&a).max(bound_of(&b));
            let lhs = dist_cocycle(&a, &b).unwrap();
            let diff = op_norm(&(a.first_return(0).unwrap() - b.first_return(0).unwrap()));
            prop_assert!(lhs >= diff / (p * c.powi(2)) - 1e-12);
        }

        #[test]
        fn bound_dominates_unit_images(seed in 0u64..500) {
            let c = random_cocycle(3, 2, seed);
            let cb = bound_of(&c);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
            for a in c.maps() {
                for _ in 0..50 {
                    let v = nalgebra::DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0)).normalize();
                    let n = (a * v).norm();
                    prop_assert!(n <= cb * (1.0 + 1e-12) && n >= 1.0 / cb * (1.0 - 1e-12));
                }
            }
        }
    }
}
