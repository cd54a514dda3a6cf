//! Dense linear algebra helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Singular values, largest first.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Largest singular value.
pub fn op_norm(m: &Mat) -> f64 {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return 0.0;
    }
    if r == 1 || c == 1 {
        return m.norm();
    }
    let scale = m.amax();
    if scale == 0.0 || !scale.is_finite() {
        return if scale.is_nan() { f64::NAN } else { scale };
    }
    let m = m / scale;
    let gram = if r >= c { m.transpose() * &m } else { &m * m.transpose() };
    if gram.nrows() == 2 {
        let (a, b, d) = (gram[(0, 0)], gram[(0, 1)], gram[(1, 1)]);
        let top = 0.5 * (a + d) + (0.25 * (a - d) * (a - d) + b * b).sqrt();
        return scale * top.sqrt();
    }
    if gram.nrows() == 3 {
        return scale * largest_sym3(&gram).max(0.0).sqrt();
    }
    // the largest eigenvalue of the Gram matrix keeps full relative accuracy
    let top = gram.symmetric_eigenvalues().max();
    scale * top.max(0.0).sqrt()
}

/// Largest eigenvalue of a symmetric 3×3 matrix, trigonometric form.
fn largest_sym3(g: &Mat) -> f64 {
    let off = g[(0, 1)].powi(2) + g[(0, 2)].powi(2) + g[(1, 2)].powi(2);
    let q = (g[(0, 0)] + g[(1, 1)] + g[(2, 2)]) / 3.0;
    let dev = (g[(0, 0)] - q).powi(2) + (g[(1, 1)] - q).powi(2) + (g[(2, 2)] - q).powi(2) + 2.0 * off;
    if dev == 0.0 {
        return q;
    }
    let p = (dev / 6.0).sqrt();
    let b = (g - Mat::identity(3, 3) * q) / p;
    let r = (0.5 * b.determinant()).clamp(-1.0, 1.0);
    q + 2.0 * p * (r.acos() / 3.0).cos()
}

/// Smallest singular value of a k-column map (conorm on its domain).
pub fn conorm(m: &Mat) -> f64 {
    let s = singular_values(m);
    if m.ncols() > m.nrows() {
        return 0.0;
    }
    s.last().copied().unwrap_or(0.0)
}

pub fn checked_op_norm(m: &Mat) -> Result<f64> {
    if !all_finite(m) {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    Ok(op_norm(m))
}

pub fn inverse(m: &Mat) -> Result<Mat> {
    m.clone()
        .try_inverse()
        .filter(all_finite)
        .ok_or_else(|| Error::InvalidMatrix("singular matrix".into()))
}

pub fn cond(m: &Mat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Orthonormal basis of the column span (thin QR), signs fixed so that
/// the triangular factor has a nonnegative diagonal.
pub fn orthonormalize(m: &Mat) -> Mat {
    let k = m.ncols();
    if k == 0 {
        return Mat::zeros(m.nrows(), 0);
    }
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols().min(k) {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Orthogonal d×d matrix whose leading columns are exactly `f`
/// (assumed orthonormal).
pub fn complete_basis(f: &Mat) -> Mat {
    let d = f.nrows();
    let k = f.ncols();
    let mut aug = Mat::zeros(d, k + d);
    aug.view_mut((0, 0), (d, k)).copy_from(f);
    aug.view_mut((0, k), (d, d)).copy_from(&Mat::identity(d, d));
    let mut q = aug.qr().q();
    q.view_mut((0, 0), (d, k)).copy_from(f);
    q
}

/// Orthonormal basis of the orthogonal complement of span(f).
pub fn complement(f: &Mat) -> Mat {
    let d = f.nrows();
    let k = f.ncols();
    complete_basis(f).columns(k, d - k).into_owned()
}

/// Orthonormal basis for the leading r-dimensional range of `m`.
pub fn range_basis(m: &Mat, r: usize) -> Mat {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut out = Mat::zeros(m.nrows(), r);
    for (j, &i) in idx.iter().take(r).enumerate() {
        out.set_column(j, &u.column(i));
    }
    out
}

/// Sine of the largest principal angle between spans of two orthonormal
/// frames of equal dimension (0 when identical).
pub fn subspace_sine(u: &Mat, v: &Mat) -> f64 {
    if u.ncols() == 0 {
        return 0.0;
    }
    let proj = v - u * (u.transpose() * v);
    op_norm(&proj).min(1.0)
}

/// Smallest principal angle between two subspaces given by orthonormal frames.
pub fn smallest_principal_angle(e: &Mat, f: &Mat) -> f64 {
    let cos_max = op_norm(&(e.transpose() * f)).min(1.0);
    // the smaller subspace, projected off the larger, yields the sines
    let (big, small) = if e.ncols() >= f.ncols() { (e, f) } else { (f, e) };
    let resid = small - big * (big.transpose() * small);
    let sin_min = conorm(&resid);
    if cos_max * cos_max >= 0.5 {
        sin_min.min(1.0).asin()
    } else {
        cos_max.acos()
    }
}

pub fn rotation(theta: f64) -> Mat {
    let (s, c) = theta.sin_cos();
    Mat::from_row_slice(2, 2, &[c, -s, s, c])
}

pub fn det2(m: &Mat) -> f64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

/// Real Schur form `m = q t qᵀ` with 1×1 and 2×2 diagonal blocks; every 2×2
/// block carries a genuinely complex pair.
#[derive(Debug, Clone)]
pub struct RealSchur {
    pub q: Mat,
    pub t: Mat,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub start: usize,
    pub size: usize,
}

impl RealSchur {
    pub fn new(m: &Mat) -> Result<RealSchur> {
        let n = m.nrows();
        if n == 0 {
            return Ok(RealSchur { q: Mat::zeros(0, 0), t: Mat::zeros(0, 0) });
        }
        if !all_finite(m) {
            return Err(Error::NumericalFailure("non-finite matrix in Schur".into()));
        }
        let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 10_000)
            .ok_or_else(|| Error::NumericalFailure("Schur iteration did not converge".into()))?;
        let (q, t) = schur.unpack();
        let mut s = RealSchur { q, t };
        s.standardize();
        Ok(s)
    }

    fn standardize(&mut self) {
        let n = self.t.nrows();
        let mut k = 0;
        while k + 1 < n {
            let sub = self.t[(k + 1, k)];
            let scale = self.t[(k, k)].abs() + self.t[(k + 1, k + 1)].abs();
            if sub == 0.0 || sub.abs() <= f64::EPSILON * scale {
                self.t[(k + 1, k)] = 0.0;
                k += 1;
                continue;
            }
            let a = self.t[(k, k)];
            let b = self.t[(k, k + 1)];
            let c = sub;
            let d = self.t[(k + 1, k + 1)];
            let disc = (a - d) * (a - d) + 4.0 * b * c;
            if disc >= 0.0 {
                // real pair hiding in a 2×2 block: rotate an eigenvector to the front
                let half = 0.5 * (a + d);
                let root = 0.5 * disc.sqrt();
                let lambda = if half >= 0.0 { half + root } else { half - root };
                let (x, y) = if (lambda - d).abs() + c.abs() >= (lambda - a).abs() + b.abs() {
                    (lambda - d, c)
                } else {
                    (b, lambda - a)
                };
                let r = x.hypot(y);
                let g = Mat::from_row_slice(2, 2, &[x / r, -y / r, y / r, x / r]);
                self.apply_rotation(k, &g);
                self.t[(k + 1, k)] = 0.0;
                k += 1;
            } else {
                k += 2;
            }
        }
    }

    fn apply_rotation(&mut self, k: usize, g: &Mat) {
        let m = g.nrows();
        let n = self.t.nrows();
        let rows = g.transpose() * self.t.view((k, 0), (m, n));
        self.t.view_mut((k, 0), (m, n)).copy_from(&rows);
        let cols = self.t.view((0, k), (n, m)) * g;
        self.t.view_mut((0, k), (n, m)).copy_from(&cols);
        let qc = self.q.view((0, k), (n, m)) * g;
        self.q.view_mut((0, k), (n, m)).copy_from(&qc);
    }

    pub fn blocks(&self) -> Vec<Block> {
        let n = self.t.nrows();
        let mut out = Vec::new();
        let mut k = 0;
        while k < n {
            if k + 1 < n && self.t[(k + 1, k)] != 0.0 {
                out.push(Block { start: k, size: 2 });
                k += 2;
            } else {
                out.push(Block { start: k, size: 1 });
                k += 1;
            }
        }
        out
    }

    pub fn block_eigenvalues(&self, b: Block) -> Vec<Complex64> {
        let k = b.start;
        if b.size == 1 {
            return vec![Complex64::new(self.t[(k, k)], 0.0)];
        }
        let a = self.t[(k, k)];
        let bb = self.t[(k, k + 1)];
        let c = self.t[(k + 1, k)];
        let d = self.t[(k + 1, k + 1)];
        let disc = (a - d) * (a - d) + 4.0 * bb * c;
        let re = 0.5 * (a + d);
        let im = 0.5 * (-disc).max(0.0).sqrt();
        vec![Complex64::new(re, im), Complex64::new(re, -im)]
    }

    pub fn block_modulus(&self, b: Block) -> f64 {
        if b.size == 1 {
            self.t[(b.start, b.start)].abs()
        } else {
            det2(&self.t.view((b.start, b.start), (2, 2)).into_owned()).abs().sqrt()
        }
    }

    /// Swap the adjacent blocks `upper` and `lower` (lower starts right after upper).
    fn swap(&mut self, upper: Block, lower: Block) -> Result<()> {
        let p = upper.size;
        let q = lower.size;
        let k = upper.start;
        let t11 = self.t.view((k, k), (p, p)).into_owned();
        let t12 = self.t.view((k, k + p), (p, q)).into_owned();
        let t22 = self.t.view((k + p, k + p), (q, q)).into_owned();
        // T11 X − X T22 = T12 via Kronecker form
        let n = p * q;
        let mut sys = Mat::zeros(n, n);
        for j in 0..q {
            for i in 0..p {
                let row = j * p + i;
                for l in 0..p {
                    sys[(row, j * p + l)] += t11[(i, l)];
                }
                for l in 0..q {
                    sys[(row, l * p + i)] -= t22[(l, j)];
                }
            }
        }
        let rhs = nalgebra::DVector::from_iterator(n, t12.iter().copied());
        let x = sys
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::IllConditionedGap("Schur blocks share eigenvalues".into()))?;
        let mut y = Mat::zeros(p + q, q);
        for j in 0..q {
            for i in 0..p {
                y[(i, j)] = -x[j * p + i];
            }
            y[(p + j, j)] = 1.0;
        }
        let basis = orthonormalize(&y);
        let g = complete_basis(&basis);
        self.apply_rotation(k, &g);
        for i in (k + q)..(k + p + q) {
            for j in k..(k + q) {
                self.t[(i, j)] = 0.0;
            }
        }
        Ok(())
    }

    /// Reorder so that the blocks selected by `pick` come first, preserving
    /// relative order within each group.
    pub fn reorder_front(&mut self, pick: impl Fn(&RealSchur, Block) -> bool) -> Result<usize> {
        let blocks = self.blocks();
        let flags: Vec<bool> = blocks.iter().map(|&b| pick(self, b)).collect();
        let mut sizes: Vec<usize> = blocks.iter().map(|b| b.size).collect();
        let mut chosen = flags.clone();
        let mut front = 0;
        for idx in 0..chosen.len() {
            if !chosen[idx] {
                continue;
            }
            let mut j = idx;
            while j > front {
                let start_upper: usize = sizes[..j - 1].iter().sum();
                let upper = Block { start: start_upper, size: sizes[j - 1] };
                let lower = Block { start: start_upper + sizes[j - 1], size: sizes[j] };
                self.swap(upper, lower)?;
                sizes.swap(j - 1, j);
                chosen.swap(j - 1, j);
                j -= 1;
            }
            front += 1;
        }
        Ok(sizes[..front].iter().sum())
    }
}

/// Double-double arithmetic for compensated 2×2 products.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = Self::two_sum(self.hi, o.hi);
        let e = e + self.lo + o.lo;
        let (hi, lo) = Self::two_sum(s, e);
        Dd { hi, lo }
    }

    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn mul_f(self, b: f64) -> Dd {
        let p = self.hi * b;
        let e = self.hi.mul_add(b, -p);
        let (hi, lo) = Self::two_sum(p, e + self.lo * b);
        Dd { hi, lo }
    }

    pub fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        let (hi, lo) = Self::two_sum(p, e + self.hi * o.lo + self.lo * o.hi);
        Dd { hi, lo }
    }

    pub fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// Compensated product of 2×2 factors (applied right to left, `factors[0]` first),
/// rescaled by powers of two after every step. Returns the scaled product and
/// the accumulated log2 scale.
pub fn product_2x2_dd(factors: &[Mat]) -> ([[Dd; 2]; 2], i64) {
    let mut m = [[Dd::from(1.0), Dd::ZERO], [Dd::ZERO, Dd::from(1.0)]];
    let mut scale: i64 = 0;
    for a in factors {
        let mut next = [[Dd::ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                next[i][j] = m[0][j].mul_f(a[(i, 0)]).add(m[1][j].mul_f(a[(i, 1)]));
            }
        }
        let mx = next.iter().flatten().map(|x| x.hi.abs()).fold(0.0, f64::max);
        if mx > 0.0 && mx.is_finite() {
            let e = mx.log2().floor() as i64;
            if e != 0 {
                let f = (2.0f64).powi(-e as i32);
                for row in next.iter_mut() {
                    for x in row.iter_mut() {
                        *x = Dd { hi: x.hi * f, lo: x.lo * f };
                    }
                }
                scale += e;
            }
        }
        m = next;
    }
    (m, scale)
}
