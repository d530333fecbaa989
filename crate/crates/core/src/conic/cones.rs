//! Cone algebra for the interior-point method: identity elements, Jordan
//! products, Nesterov-Todd scalings and maximal step lengths.
//!
//! Vectors passed to these routines cover the conic (non-free) part of the
//! variable vector: first the nonnegative orthant, then each second-order
//! cone, then each PSD cone in `svec` form.

use nalgebra::{DMatrix, DVector};

use super::svec::{smat, svec_index, svec_into, svec_len};
use super::ConeSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Block {
    NonNeg { start: usize, len: usize },
    Soc { start: usize, len: usize },
    Psd { start: usize, order: usize },
}

impl Block {
    pub fn range(&self) -> std::ops::Range<usize> {
        match *self {
            Block::NonNeg { start, len } | Block::Soc { start, len } => start..start + len,
            Block::Psd { start, order } => start..start + svec_len(order),
        }
    }
}

/// Blocks of the conic part, with offsets relative to the start of that part.
pub(crate) fn blocks(spec: &ConeSpec) -> Vec<Block> {
    let mut out = Vec::new();
    let mut at = 0;
    if spec.nonneg > 0 {
        out.push(Block::NonNeg {
            start: 0,
            len: spec.nonneg,
        });
        at = spec.nonneg;
    }
    for &len in &spec.soc {
        out.push(Block::Soc { start: at, len });
        at += len;
    }
    for &order in &spec.psd {
        out.push(Block::Psd { start: at, order });
        at += svec_len(order);
    }
    out
}

pub(crate) fn identity(blocks: &[Block], dim: usize) -> DVector<f64> {
    let mut e = DVector::zeros(dim);
    for b in blocks {
        match *b {
            Block::NonNeg { start, len } => e.rows_mut(start, len).fill(1.0),
            Block::Soc { start, .. } => e[start] = 1.0,
            Block::Psd { start, order } => {
                for i in 0..order {
                    e[start + svec_index(order, i, i)] = 1.0;
                }
            }
        }
    }
    e
}

/// Jordan product `u o v`.
pub(crate) fn jordan_product(blocks: &[Block], u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(u.len());
    for b in blocks {
        let r = b.range();
        match *b {
            Block::NonNeg { .. } => {
                for i in r {
                    out[i] = u[i] * v[i];
                }
            }
            Block::Soc { start, len } => {
                let (u0, v0) = (u[start], v[start]);
                let u1 = u.rows(start + 1, len - 1);
                let v1 = v.rows(start + 1, len - 1);
                out[start] = u.rows(start, len).dot(&v.rows(start, len));
                for k in 0..len - 1 {
                    out[start + 1 + k] = u0 * v1[k] + v0 * u1[k];
                }
            }
            Block::Psd { order, .. } => {
                let um = smat(&u.as_slice()[r.clone()], order);
                let vm = smat(&v.as_slice()[r.clone()], order);
                let p = (&um * &vm + &vm * &um) * 0.5;
                svec_into(&p, &mut out.as_mut_slice()[r]);
            }
        }
    }
    out
}

/// Nesterov-Todd scaling at a strictly feasible pair `(x, s)`, satisfying
/// `x = W lambda` and `s = W^{-T} lambda`.
pub(crate) struct Scaling {
    blocks: Vec<Block>,
    lp_w: DVector<f64>,
    soc: Vec<SocScaling>,
    psd: Vec<PsdScaling>,
    /// The scaled point `lambda`.
    pub lambda: DVector<f64>,
}

struct SocScaling {
    w: DMatrix<f64>,
    w_inv: DMatrix<f64>,
}

struct PsdScaling {
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    g: DMatrix<f64>,
    lambda: Vec<f64>,
}

fn soc_jnorm(v: &[f64]) -> f64 {
    let tail: f64 = v[1..].iter().map(|t| t * t).sum();
    (v[0] * v[0] - tail).max(0.0).sqrt()
}

impl Scaling {
    /// Returns `None` when a block is not strictly interior.
    pub fn new(blocks: &[Block], x: &DVector<f64>, s: &DVector<f64>) -> Option<Self> {
        let dim = x.len();
        let mut lambda = DVector::zeros(dim);
        let mut lp_w = DVector::zeros(0);
        let mut soc = Vec::new();
        let mut psd = Vec::new();
        for b in blocks {
            match *b {
                Block::NonNeg { start, len } => {
                    lp_w = DVector::zeros(len);
                    for i in 0..len {
                        let (xi, si) = (x[start + i], s[start + i]);
                        if !(xi > 0.0 && si > 0.0) {
                            return None;
                        }
                        lp_w[i] = (xi / si).sqrt();
                        lambda[start + i] = (xi * si).sqrt();
                    }
                }
                Block::Soc { start, len } => {
                    let xs = &x.as_slice()[start..start + len];
                    let ss = &s.as_slice()[start..start + len];
                    let (xn, sn) = (soc_jnorm(xs), soc_jnorm(ss));
                    if !(xn > 0.0 && sn > 0.0 && xs[0] > 0.0 && ss[0] > 0.0) {
                        return None;
                    }
                    let xb = DVector::from_iterator(len, xs.iter().map(|v| v / xn));
                    let sb = DVector::from_iterator(len, ss.iter().map(|v| v / sn));
                    let gamma = ((1.0 + xb.dot(&sb)) / 2.0).sqrt();
                    let mut wb = DVector::zeros(len);
                    wb[0] = (xb[0] + sb[0]) / (2.0 * gamma);
                    for k in 1..len {
                        wb[k] = (xb[k] - sb[k]) / (2.0 * gamma);
                    }
                    let eta = (xn / sn).sqrt();
                    let a = wb[0];
                    let q = wb.rows(1, len - 1).into_owned();
                    let mut w = DMatrix::zeros(len, len);
                    let mut w_inv = DMatrix::zeros(len, len);
                    w[(0, 0)] = a;
                    w_inv[(0, 0)] = a;
                    for i in 0..len - 1 {
                        w[(0, i + 1)] = q[i];
                        w[(i + 1, 0)] = q[i];
                        w_inv[(0, i + 1)] = -q[i];
                        w_inv[(i + 1, 0)] = -q[i];
                        for j in 0..len - 1 {
                            let v = q[i] * q[j] / (1.0 + a) + if i == j { 1.0 } else { 0.0 };
                            w[(i + 1, j + 1)] = v;
                            w_inv[(i + 1, j + 1)] = v;
                        }
                    }
                    w *= eta;
                    w_inv /= eta;
                    let sv = DVector::from_column_slice(ss);
                    let xv = DVector::from_column_slice(xs);
                    // Average the two equivalent expressions for accuracy.
                    let l = (&w * sv + &w_inv * xv) * 0.5;
                    lambda.rows_mut(start, len).copy_from(&l);
                    soc.push(SocScaling { w, w_inv });
                }
                Block::Psd { start, order } => {
                    let r = b.range();
                    let xm = smat(&x.as_slice()[r.clone()], order);
                    let sm = smat(&s.as_slice()[r], order);
                    let lx = xm.cholesky()?.l();
                    let ls = sm.cholesky()?.l();
                    let prod = ls.transpose() * &lx;
                    let svd = prod.svd(true, true);
                    let v = svd.v_t.as_ref()?.transpose();
                    let sing = &svd.singular_values;
                    if sing.iter().any(|&t| t.is_nan() || t <= 0.0) {
                        return None;
                    }
                    let mut rmat = &lx * &v;
                    let mut r_inv_t = lx.clone().try_inverse()?.transpose() * &v;
                    for j in 0..order {
                        let f = sing[j].sqrt();
                        rmat.column_mut(j).scale_mut(1.0 / f);
                        r_inv_t.column_mut(j).scale_mut(f);
                    }
                    let r_inv = r_inv_t.transpose();
                    let g = &rmat * rmat.transpose();
                    for i in 0..order {
                        lambda[start + svec_index(order, i, i)] = sing[i];
                    }
                    psd.push(PsdScaling {
                        r: rmat,
                        r_inv,
                        g,
                        lambda: sing.iter().copied().collect(),
                    });
                }
            }
        }
        Some(Self {
            blocks: blocks.to_vec(),
            lp_w,
            soc,
            psd,
            lambda,
        })
    }

    fn map(&self, v: &DVector<f64>, which: Op) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        let (mut si, mut pi) = (0, 0);
        for b in &self.blocks {
            let r = b.range();
            match *b {
                Block::NonNeg { start, len } => {
                    for i in 0..len {
                        let w = self.lp_w[i];
                        let f = match which {
                            Op::W | Op::Wt => w,
                            Op::WInv | Op::WInvT => 1.0 / w,
                            Op::H => w * w,
                        };
                        out[start + i] = f * v[start + i];
                    }
                }
                Block::Soc { start, len } => {
                    let sc = &self.soc[si];
                    si += 1;
                    let seg = v.rows(start, len);
                    let res = match which {
                        Op::W | Op::Wt => &sc.w * seg,
                        Op::WInv | Op::WInvT => &sc.w_inv * seg,
                        Op::H => &sc.w * (&sc.w * seg),
                    };
                    out.rows_mut(start, len).copy_from(&res);
                }
                Block::Psd { order, .. } => {
                    let sc = &self.psd[pi];
                    pi += 1;
                    let m = smat(&v.as_slice()[r.clone()], order);
                    let res = match which {
                        Op::W => &sc.r * m * sc.r.transpose(),
                        Op::Wt => sc.r.transpose() * m * &sc.r,
                        Op::WInv => &sc.r_inv * m * sc.r_inv.transpose(),
                        Op::WInvT => sc.r_inv.transpose() * m * &sc.r_inv,
                        Op::H => &sc.g * m * &sc.g,
                    };
                    svec_into(&res, &mut out.as_mut_slice()[r]);
                }
            }
        }
        out
    }

    pub fn w(&self, v: &DVector<f64>) -> DVector<f64> {
        self.map(v, Op::W)
    }

    pub fn wt(&self, v: &DVector<f64>) -> DVector<f64> {
        self.map(v, Op::Wt)
    }

    pub fn w_inv(&self, v: &DVector<f64>) -> DVector<f64> {
        self.map(v, Op::WInv)
    }

    #[allow(dead_code)]
    pub fn w_inv_t(&self, v: &DVector<f64>) -> DVector<f64> {
        self.map(v, Op::WInvT)
    }

    /// `W W^T v`.
    pub fn h(&self, v: &DVector<f64>) -> DVector<f64> {
        self.map(v, Op::H)
    }

    /// Dense `W W^T` restricted to the nonnegative block, as a diagonal.
    pub fn lp_h_diag(&self) -> DVector<f64> {
        self.lp_w.map(|w| w * w)
    }

    /// Dense `W W^T` for second-order cone `idx`.
    pub fn soc_h(&self, idx: usize) -> DMatrix<f64> {
        let w = &self.soc[idx].w;
        w * w
    }

    /// Congruence matrix `G` with `W W^T (V) = G V G` for PSD cone `idx`.
    pub fn psd_g(&self, idx: usize) -> &DMatrix<f64> {
        &self.psd[idx].g
    }

    /// Solves `lambda o z = v` for `z`.
    pub fn lambda_div(&self, v: &DVector<f64>) -> DVector<f64> {
        let lam = &self.lambda;
        let mut out = DVector::zeros(v.len());
        let mut pi = 0;
        for b in &self.blocks {
            let r = b.range();
            match *b {
                Block::NonNeg { .. } => {
                    for i in r {
                        out[i] = v[i] / lam[i];
                    }
                }
                Block::Soc { start, len } => {
                    let l0 = lam[start];
                    let l1 = lam.rows(start + 1, len - 1);
                    let v0 = v[start];
                    let v1 = v.rows(start + 1, len - 1);
                    let rho = l0 * l0 - l1.norm_squared();
                    let z0 = (l0 * v0 - l1.dot(&v1)) / rho;
                    out[start] = z0;
                    for k in 0..len - 1 {
                        out[start + 1 + k] = (v1[k] - z0 * l1[k]) / l0;
                    }
                }
                Block::Psd { order, .. } => {
                    let lv = &self.psd[pi].lambda;
                    pi += 1;
                    let mut m = smat(&v.as_slice()[r.clone()], order);
                    for j in 0..order {
                        for i in 0..order {
                            m[(i, j)] *= 2.0 / (lv[i] + lv[j]);
                        }
                    }
                    svec_into(&m, &mut out.as_mut_slice()[r]);
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy)]
enum Op {
    W,
    Wt,
    WInv,
    WInvT,
    H,
}

/// Largest `alpha` (possibly infinite) with `x + alpha d` in the cone.
pub(crate) fn max_step(blocks: &[Block], x: &DVector<f64>, d: &DVector<f64>) -> f64 {
    let mut alpha = f64::INFINITY;
    for b in blocks {
        let r = b.range();
        match *b {
            Block::NonNeg { .. } => {
                for i in r {
                    if d[i] < 0.0 {
                        alpha = alpha.min(-x[i] / d[i]);
                    }
                }
            }
            Block::Soc { start, len } => {
                let xs = &x.as_slice()[start..start + len];
                let ds = &d.as_slice()[start..start + len];
                let xn = soc_jnorm(xs);
                if xn <= 0.0 {
                    return 0.0;
                }
                let xb: Vec<f64> = xs.iter().map(|v| v / xn).collect();
                let rho0 = (xb[0] * ds[0] - (1..len).map(|k| xb[k] * ds[k]).sum::<f64>()) / xn;
                let f = (rho0 + ds[0] / xn) / (xb[0] + 1.0);
                let rho1: f64 = (1..len)
                    .map(|k| {
                        let t = ds[k] / xn - f * xb[k];
                        t * t
                    })
                    .sum::<f64>()
                    .sqrt();
                let sigma = rho1 - rho0;
                if sigma > 0.0 {
                    alpha = alpha.min(1.0 / sigma);
                }
            }
            Block::Psd { order, .. } => {
                let xm = smat(&x.as_slice()[r.clone()], order);
                let dm = smat(&d.as_slice()[r], order);
                let Some(ch) = xm.cholesky() else {
                    return 0.0;
                };
                let l = ch.l();
                let Some(li) = l.try_inverse() else {
                    return 0.0;
                };
                let e = &li * dm * li.transpose();
                let e = (&e + e.transpose()) * 0.5;
                let min_eig = e.symmetric_eigenvalues().min();
                if min_eig < 0.0 {
                    alpha = alpha.min(-1.0 / min_eig);
                }
            }
        }
    }
    alpha
}

/// Smallest "eigenvalue" of `x` relative to the cone (negative outside it).
#[cfg(test)]
pub(crate) fn min_cone_eig(blocks: &[Block], x: &DVector<f64>) -> f64 {
    let mut m = f64::INFINITY;
    for b in blocks {
        let r = b.range();
        match *b {
            Block::NonNeg { .. } => {
                for i in r {
                    m = m.min(x[i]);
                }
            }
            Block::Soc { start, len } => {
                let tail = x.rows(start + 1, len - 1).norm();
                m = m.min(x[start] - tail);
            }
            Block::Psd { order, .. } => {
                let xm = smat(&x.as_slice()[r], order);
                m = m.min(xm.symmetric_eigenvalues().min());
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> ConeSpec {
        ConeSpec {
            free: 0,
            nonneg: 2,
            soc: vec![3],
            psd: vec![2],
        }
    }

    fn point_pair() -> (DVector<f64>, DVector<f64>) {
        let x = DVector::from_vec(vec![1.5, 0.3, 2.0, 0.5, -1.2, 2.0, 0.4, 1.0]);
        let s = DVector::from_vec(vec![0.7, 2.2, 1.7, -0.9, 0.2, 1.0, -0.3, 0.8]);
        (x, s)
    }

    #[test]
    fn scaling_identities() {
        let spec = spec();
        let bl = blocks(&spec);
        let (x, s) = point_pair();
        let sc = Scaling::new(&bl, &x, &s).expect("interior pair");
        let lam = &sc.lambda;
        assert!((sc.w(lam) - &x).norm() < 1e-10, "x = W lambda");
        assert!((sc.w_inv_t(lam) - &s).norm() < 1e-10, "s = W^-T lambda");
        assert!((sc.wt(&s) - lam).norm() < 1e-10);
        assert!((sc.w_inv(&x) - lam).norm() < 1e-10);
        let v = DVector::from_fn(8, |i, _| (i as f64 * 0.37).sin());
        assert!((sc.h(&v) - sc.w(&sc.wt(&v))).norm() < 1e-10);
        let z = sc.lambda_div(&v);
        assert!((jordan_product(&bl, lam, &z) - v).norm() < 1e-10);
    }

    #[test]
    fn step_length_matches_bisection() {
        let spec = spec();
        let bl = blocks(&spec);
        let (x, _) = point_pair();
        let d = DVector::from_vec(vec![0.3, -0.5, -1.0, 1.2, 0.4, -0.8, 1.1, 0.5]);
        let a = max_step(&bl, &x, &d);
        assert!(a.is_finite());
        assert!(min_cone_eig(&bl, &(&x + &d * (a * 0.999))) > 0.0);
        assert!(min_cone_eig(&bl, &(&x + &d * (a * 1.001))) < 0.0);
    }

    #[test]
    fn identity_is_interior() {
        let spec = spec();
        let bl = blocks(&spec);
        let e = identity(&bl, 8);
        assert!((min_cone_eig(&bl, &e) - 1.0).abs() < 1e-12);
        let sc = Scaling::new(&bl, &e, &e).unwrap();
        assert!((&sc.lambda - &e).norm() < 1e-12);
    }
}
