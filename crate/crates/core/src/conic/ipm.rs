use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::cones::{blocks, identity, jordan_product, max_step, Block, Scaling};
use super::svec::{svec, SQRT2};
use super::{ConicError, ConicProblem, ConicSolution, SolveStatus, SolverSettings};

/// Row-equilibrated data used by the iteration.
/// Rows touching a block: `(row, [(local index, value)])`.
type BlockRow = (usize, Vec<(usize, f64)>);
/// Normalized point `(merit, x, y, s)`.
type Candidate = (f64, DVector<f64>, DVector<f64>, DVector<f64>);

struct Data {
    m: usize,
    n: usize,
    nf: usize,
    rows: Vec<Vec<(usize, f64)>>,
    b: DVector<f64>,
    c: DVector<f64>,
    blocks: Vec<Block>,
    /// For each block, the rows touching it with block-local entries.
    block_rows: Vec<Vec<BlockRow>>,
    /// For PSD blocks, `svec` position -> matrix entry.
    psd_pos: Vec<Vec<(usize, usize)>>,
    a_free: DMatrix<f64>,
    degree: usize,
}

impl Data {
    fn a_mul(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.m,
            self.rows.iter().map(|r| r.iter().map(|&(j, v)| v * x[j]).sum::<f64>()),
        )
    }

    fn at_mul(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (i, r) in self.rows.iter().enumerate() {
            let yi = y[i];
            if yi != 0.0 {
                for &(j, v) in r {
                    out[j] += v * yi;
                }
            }
        }
        out
    }

    /// `A_K v` for a conic-part vector.
    fn ak_mul(&self, v: &DVector<f64>) -> DVector<f64> {
        let nf = self.nf;
        DVector::from_iterator(
            self.m,
            self.rows.iter().map(|r| {
                r.iter()
                    .filter(|&&(j, _)| j >= nf)
                    .map(|&(j, a)| a * v[j - nf])
                    .sum::<f64>()
            }),
        )
    }
}

fn merge_row(row: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut r = row.to_vec();
    r.sort_by_key(|&(j, _)| j);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(r.len());
    for (j, v) in r {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += v,
            _ => out.push((j, v)),
        }
    }
    out.retain(|&(_, v)| v != 0.0);
    out
}

/// Solves the conic program; see the module documentation for the form.
pub fn solve(problem: &ConicProblem, settings: &SolverSettings) -> Result<ConicSolution, ConicError> {
    problem.validate()?;
    let n = problem.num_vars();
    let nf = problem.cones.free;
    let b_norm = problem.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    let mut rows = Vec::new();
    let mut b = Vec::new();
    let mut kept: Vec<(usize, f64)> = Vec::new();
    for (i, row) in problem.rows.iter().enumerate() {
        let row = merge_row(row);
        let mx = row.iter().fold(0.0f64, |a, &(_, v)| a.max(v.abs()));
        if mx == 0.0 {
            if problem.b[i].abs() > 1e-12 * (1.0 + b_norm) {
                let mut y = vec![0.0; problem.rows.len()];
                y[i] = problem.b[i].signum();
                return Ok(ConicSolution {
                    status: SolveStatus::Infeasible,
                    x: vec![0.0; n],
                    y,
                    s: vec![0.0; n],
                    primal_obj: f64::INFINITY,
                    dual_obj: f64::INFINITY,
                    iterations: 0,
                    primal_residual: f64::NAN,
                    dual_residual: f64::NAN,
                });
            }
            continue;
        }
        let scale = 1.0 / mx;
        rows.push(row.into_iter().map(|(j, v)| (j, v * scale)).collect::<Vec<_>>());
        b.push(problem.b[i] * scale);
        kept.push((i, scale));
    }

    let cone_blocks = blocks(&problem.cones);
    let mut owner = vec![(usize::MAX, 0usize); n - nf];
    for (bi, bl) in cone_blocks.iter().enumerate() {
        for (local, k) in bl.range().enumerate() {
            owner[k] = (bi, local);
        }
    }
    let m = rows.len();
    let mut block_rows: Vec<Vec<BlockRow>> = vec![Vec::new(); cone_blocks.len()];
    let mut a_free = DMatrix::zeros(m, nf);
    for (i, row) in rows.iter().enumerate() {
        let mut per_block: Vec<BlockRow> = Vec::new();
        for &(j, v) in row {
            if j < nf {
                a_free[(i, j)] = v;
                continue;
            }
            let (bi, local) = owner[j - nf];
            match per_block.last_mut() {
                Some((last, entries)) if *last == bi => entries.push((local, v)),
                _ => per_block.push((bi, vec![(local, v)])),
            }
        }
        for (bi, entries) in per_block {
            block_rows[bi].push((i, entries));
        }
    }
    let psd_pos = cone_blocks
        .iter()
        .filter_map(|bl| match *bl {
            Block::Psd { order, .. } => {
                let mut pos = Vec::with_capacity(order * (order + 1) / 2);
                for j in 0..order {
                    for i in j..order {
                        pos.push((i, j));
                    }
                }
                Some(pos)
            }
            _ => None,
        })
        .collect();

    let data = Data {
        m,
        n,
        nf,
        rows,
        b: DVector::from_vec(b),
        c: DVector::from_column_slice(&problem.c),
        blocks: cone_blocks,
        block_rows,
        psd_pos,
        a_free,
        degree: problem.cones.degree(),
    };

    let raw = run(&data, settings);

    // Undo the row scaling.
    let mut y = vec![0.0; problem.rows.len()];
    for (k, &(i, scale)) in kept.iter().enumerate() {
        y[i] = raw.y[k] * scale;
    }
    let mut s_full = vec![0.0; n];
    s_full[nf..].copy_from_slice(raw.s.as_slice());
    let x = raw.x.as_slice().to_vec();
    let (pres, dres) = original_residuals(problem, &x, &y, &s_full);
    let primal_obj = problem.c.iter().zip(&x).map(|(c, x)| c * x).sum();
    let dual_obj = problem.b.iter().zip(&y).map(|(b, y)| b * y).sum();
    Ok(ConicSolution {
        status: raw.status,
        x,
        y,
        s: s_full,
        primal_obj,
        dual_obj,
        iterations: raw.iterations,
        primal_residual: pres,
        dual_residual: dres,
    })
}

fn original_residuals(p: &ConicProblem, x: &[f64], y: &[f64], s: &[f64]) -> (f64, f64) {
    let b_inf = p.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let c_inf = p.c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut pres = 0.0f64;
    let mut aty = vec![0.0; x.len()];
    for (i, row) in p.rows.iter().enumerate() {
        let ax: f64 = row.iter().map(|&(j, v)| v * x[j]).sum();
        pres = pres.max((ax - p.b[i]).abs());
        for &(j, v) in row {
            aty[j] += v * y[i];
        }
    }
    let dres = (0..x.len())
        .map(|j| (aty[j] + s[j] - p.c[j]).abs())
        .fold(0.0f64, f64::max);
    (pres / (1.0 + b_inf), dres / (1.0 + c_inf))
}

struct RawResult {
    status: SolveStatus,
    x: DVector<f64>,
    y: DVector<f64>,
    s: DVector<f64>,
    iterations: usize,
}

struct Iterate {
    x: DVector<f64>,
    s: DVector<f64>,
    y: DVector<f64>,
    tau: f64,
    kappa: f64,
}

struct Direction {
    dx: DVector<f64>,
    ds: DVector<f64>,
    dy: DVector<f64>,
    dtau: f64,
    dkappa: f64,
}

/// Factorization of the regularized reduced KKT matrix
/// `[[M + d I, A_f], [A_f^T, -d I]]`.
struct Factor {
    m_mat: DMatrix<f64>,
    chol_p: Cholesky<f64, Dyn>,
    p_inv_af: DMatrix<f64>,
    chol_s: Option<Cholesky<f64, Dyn>>,
}

impl Factor {
    fn new(m_mat: DMatrix<f64>, a_free: &DMatrix<f64>) -> Option<Self> {
        let dim = m_mat.nrows();
        // Diagonal-relative regularization, so that huge scaling entries in a
        // few rows do not perturb the others.
        let mut eps = 1e-13;
        for _ in 0..8 {
            let mut p = m_mat.clone();
            for i in 0..dim {
                p[(i, i)] += eps * (m_mat[(i, i)].abs() + 1.0);
            }
            if let Some(chol_p) = Cholesky::new(p) {
                if a_free.ncols() == 0 {
                    return Some(Self {
                        m_mat,
                        chol_p,
                        p_inv_af: DMatrix::zeros(dim, 0),
                        chol_s: None,
                    });
                }
                let p_inv_af = chol_p.solve(a_free);
                let mut s = a_free.transpose() * &p_inv_af;
                for i in 0..s.nrows() {
                    s[(i, i)] += eps * (s[(i, i)].abs() + 1.0);
                }
                if let Some(chol_s) = Cholesky::new(s) {
                    return Some(Self {
                        m_mat,
                        chol_p,
                        p_inv_af,
                        chol_s: Some(chol_s),
                    });
                }
            }
            eps *= 100.0;
        }
        None
    }

    fn solve_reg(&self, ry: &DVector<f64>, rf: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let t = self.chol_p.solve(ry);
        match &self.chol_s {
            None => (t, DVector::zeros(0)),
            Some(cs) => {
                let rhs = self.p_inv_af.transpose() * ry - rf;
                let dxf = cs.solve(&rhs);
                let dy = &t - &self.p_inv_af * &dxf;
                (dy, dxf)
            }
        }
    }

    fn solve(&self, a_free: &DMatrix<f64>, ry: &DVector<f64>, rf: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let (mut dy, mut dxf) = self.solve_reg(ry, rf);
        let norm0 = ry.amax().max(rf.amax()).max(1e-300);
        for _ in 0..4 {
            let ey = ry - (&self.m_mat * &dy + a_free * &dxf);
            let ef = rf - a_free.transpose() * &dy;
            if ey.amax().max(ef.amax()) <= 1e-14 * norm0 {
                break;
            }
            let (cy, cf) = self.solve_reg(&ey, &ef);
            dy += cy;
            dxf += cf;
        }
        (dy, dxf)
    }
}

/// Schur complement `A_K W W^T A_K^T`.
fn form_m(data: &Data, sc: &Scaling, threads: usize) -> DMatrix<f64> {
    let m = data.m;
    let mut mat = DMatrix::zeros(m, m);
    let (mut soc_i, mut psd_i) = (0, 0);
    for (bi, bl) in data.blocks.iter().enumerate() {
        let touching = &data.block_rows[bi];
        match *bl {
            Block::NonNeg { len, .. } => {
                let h = sc.lp_h_diag();
                let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); len];
                for (i, entries) in touching {
                    for &(l, v) in entries {
                        cols[l].push((*i, v));
                    }
                }
                for (l, col) in cols.iter().enumerate() {
                    for (a, &(i, vi)) in col.iter().enumerate() {
                        for &(j, vj) in &col[a..] {
                            mat[(i, j)] += h[l] * vi * vj;
                        }
                    }
                }
                continue;
            }
            Block::Soc { .. } => {
                let h = sc.soc_h(soc_i);
                soc_i += 1;
                accumulate(&mut mat, touching, threads, |entries| {
                    let mut u = DVector::zeros(h.nrows());
                    for &(l, v) in entries {
                        u.axpy(v, &h.column(l), 1.0);
                    }
                    u
                });
            }
            Block::Psd { order, .. } => {
                let g = sc.psd_g(psd_i);
                let pos = &data.psd_pos[psd_i];
                psd_i += 1;
                accumulate(&mut mat, touching, threads, |entries| {
                    let mut t = DMatrix::zeros(order, order);
                    if entries.len() <= order {
                        for &(l, v) in entries {
                            let (p, q) = pos[l];
                            if p == q {
                                t.ger(v, &g.column(p), &g.column(p), 1.0);
                            } else {
                                let f = v / SQRT2;
                                t.ger(f, &g.column(p), &g.column(q), 1.0);
                                t.ger(f, &g.column(q), &g.column(p), 1.0);
                            }
                        }
                    } else {
                        let mut a = DMatrix::zeros(order, order);
                        for &(l, v) in entries {
                            let (p, q) = pos[l];
                            if p == q {
                                a[(p, p)] = v;
                            } else {
                                a[(p, q)] = v / SQRT2;
                                a[(q, p)] = v / SQRT2;
                            }
                        }
                        t = g * a * g;
                    }
                    svec(&t)
                });
            }
        }
    }
    // Only the upper triangle (i <= j in touching order) was filled; symmetrize.
    for i in 0..m {
        for j in i + 1..m {
            let v = mat[(i, j)] + mat[(j, i)];
            mat[(i, j)] = v;
            mat[(j, i)] = v;
        }
    }
    mat
}

fn accumulate<F>(mat: &mut DMatrix<f64>, touching: &[(usize, Vec<(usize, f64)>)], threads: usize, apply_h: F)
where
    F: Fn(&[(usize, f64)]) -> DVector<f64> + Sync,
{
    let t = touching.len();
    if t == 0 {
        return;
    }
    let work = |range: std::ops::Range<usize>| -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for a in range {
            let (i, ref ei) = touching[a];
            let u = apply_h(ei);
            for (j, ej) in &touching[a..] {
                let v: f64 = ej.iter().map(|&(l, x)| x * u[l]).sum();
                if v != 0.0 {
                    out.push((i, *j, v));
                }
            }
        }
        out
    };
    let threads = threads.max(1).min(t);
    let parts: Vec<Vec<(usize, usize, f64)>> = if threads == 1 || t < 16 {
        vec![work(0..t)]
    } else {
        // Interleave rows so early (longer) tails are spread across threads.
        let chunk = t.div_ceil(threads * 4);
        let ranges: Vec<_> = (0..t).step_by(chunk).map(|s| s..(s + chunk).min(t)).collect();
        let next = std::sync::atomic::AtomicUsize::new(0);
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|_| {
                    scope.spawn(|| {
                        let mut acc = Vec::new();
                        loop {
                            let k = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                            if k >= ranges.len() {
                                break;
                            }
                            acc.extend(work(ranges[k].clone()));
                        }
                        acc
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker panicked"))
                .collect()
        })
    };
    for part in parts {
        for (i, j, v) in part {
            if i == j {
                mat[(i, i)] += v;
            } else {
                // Stored once; `form_m` adds the transpose.
                mat[(i.min(j), i.max(j))] += v;
            }
        }
    }
}

fn run(data: &Data, settings: &SolverSettings) -> RawResult {
    let nk = data.n - data.nf;
    let nf = data.nf;
    let e = identity(&data.blocks, nk);
    let mut it = Iterate {
        x: {
            let mut x = DVector::zeros(data.n);
            x.rows_mut(nf, nk).copy_from(&e);
            x
        },
        s: e.clone(),
        y: DVector::zeros(data.m),
        tau: 1.0,
        kappa: 1.0,
    };
    let b_norm = data.b.amax();
    let c_norm = data.c.amax();
    let c_k = data.c.rows(nf, nk).into_owned();
    let c_f = data.c.rows(0, nf).into_owned();
    let nu = data.degree as f64;

    let mut best: Option<Candidate> = None;
    let mut iterations = 0;
    let finish = |status, x: DVector<f64>, y: DVector<f64>, s: DVector<f64>, iterations| RawResult {
        status,
        x,
        y,
        s,
        iterations,
    };

    loop {
        let ax = data.a_mul(&it.x);
        let aty = data.at_mul(&it.y);
        let r_p = &ax - &data.b * it.tau;
        let mut r_d = &aty - &data.c * it.tau;
        for k in 0..nk {
            r_d[nf + k] += it.s[k];
        }
        let cx = data.c.dot(&it.x);
        let by = data.b.dot(&it.y);
        let r_g = cx - by + it.kappa;
        let mu = (it.x.rows(nf, nk).dot(&it.s) + it.tau * it.kappa) / (nu + 1.0);

        let pres = r_p.amax() / it.tau / (1.0 + b_norm);
        let dres = r_d.amax() / it.tau / (1.0 + c_norm);
        let pobj = cx / it.tau;
        let dobj = by / it.tau;
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs().min(dobj.abs()));
        let merit = pres.max(dres).max(gap);
        if best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((merit, &it.x / it.tau, &it.y / it.tau, &it.s / it.tau));
        }
        if pres <= settings.tol_feas && dres <= settings.tol_feas && gap <= settings.tol_gap {
            return finish(
                SolveStatus::Optimal,
                &it.x / it.tau,
                &it.y / it.tau,
                &it.s / it.tau,
                iterations,
            );
        }
        if by > 0.0 && it.tau < it.kappa {
            let mut cert = aty.clone();
            for k in 0..nk {
                cert[nf + k] += it.s[k];
            }
            if cert.amax() / by <= settings.tol_infeas {
                return finish(
                    SolveStatus::Infeasible,
                    DVector::zeros(data.n),
                    &it.y / by,
                    &it.s / by,
                    iterations,
                );
            }
        }
        if cx < 0.0 && it.tau < it.kappa && ax.amax() / (-cx) <= settings.tol_infeas {
            return finish(
                SolveStatus::Unbounded,
                &it.x / (-cx),
                DVector::zeros(data.m),
                DVector::zeros(nk),
                iterations,
            );
        }
        if iterations >= settings.max_iter {
            break;
        }
        iterations += 1;

        let xk = it.x.rows(nf, nk).into_owned();
        let Some(sc) = Scaling::new(&data.blocks, &xk, &it.s) else {
            break;
        };
        let m_mat = form_m(data, &sc, settings.threads);
        let Some(factor) = Factor::new(m_mat, &data.a_free) else {
            break;
        };
        let lam = &sc.lambda;
        let lam_sq = jordan_product(&data.blocks, lam, lam);

        // Right-hand side independent of the predictor/corrector choice.
        let rhs2_y = &data.b + data.ak_mul(&sc.h(&c_k));
        let (q, qf) = factor.solve(&data.a_free, &rhs2_y, &c_f);
        let atq = data.at_mul(&q);
        let dx1 = sc.h(&(atq.rows(nf, nk) - &c_k));
        let den = c_k.dot(&dx1) + c_f.dot(&qf) - data.b.dot(&q) - it.kappa / it.tau;

        let newton = |eta: f64, r_c: &DVector<f64>, r_tau: f64| -> Direction {
            let d = sc.w(&sc.lambda_div(r_c));
            let r_dk = r_d.rows(nf, nk).into_owned();
            let r_df = r_d.rows(0, nf).into_owned();
            let ry = -(&r_p * eta) - data.ak_mul(&(&d + sc.h(&(&r_dk * eta))));
            let rf = -(&r_df * eta);
            let (p, pf) = factor.solve(&data.a_free, &ry, &rf);
            let atp = data.at_mul(&p);
            let dx0 = &d + sc.h(&(&r_dk * eta + atp.rows(nf, nk)));
            let num = -eta * r_g - c_k.dot(&dx0) - c_f.dot(&pf) + data.b.dot(&p) - r_tau / it.tau;
            let dtau = num / den;
            let dy = &p + &q * dtau;
            let mut dx = DVector::zeros(data.n);
            dx.rows_mut(0, nf).copy_from(&(&pf + &qf * dtau));
            dx.rows_mut(nf, nk).copy_from(&(&dx0 + &dx1 * dtau));
            let atdy = &atp + &atq * dtau;
            let ds = -(&r_dk * eta) - atdy.rows(nf, nk) + &c_k * dtau;
            let dkappa = (r_tau - it.kappa * dtau) / it.tau;
            Direction {
                dx,
                ds,
                dy,
                dtau,
                dkappa,
            }
        };
        let step_to_boundary = |d: &Direction| -> f64 {
            let mut a = max_step(&data.blocks, &xk, &d.dx.rows(nf, nk).into_owned());
            a = a.min(max_step(&data.blocks, &it.s, &d.ds));
            if d.dtau < 0.0 {
                a = a.min(-it.tau / d.dtau);
            }
            if d.dkappa < 0.0 {
                a = a.min(-it.kappa / d.dkappa);
            }
            a
        };

        let aff = newton(1.0, &(-&lam_sq), -it.tau * it.kappa);
        let alpha_aff = step_to_boundary(&aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

        let dxs = sc.w_inv(&aff.dx.rows(nf, nk).into_owned());
        let dss = sc.wt(&aff.ds);
        let corr = jordan_product(&data.blocks, &dxs, &dss);
        let r_c = &e * (sigma * mu) - &lam_sq - corr;
        let r_tau = sigma * mu - it.tau * it.kappa - aff.dtau * aff.dkappa;
        let dir = newton(1.0 - sigma, &r_c, r_tau);
        let alpha = (0.99 * step_to_boundary(&dir)).min(1.0);
        if !alpha.is_finite() || alpha <= 1e-12 {
            break;
        }
        it.x += &dir.dx * alpha;
        it.s += &dir.ds * alpha;
        it.y += &dir.dy * alpha;
        it.tau += alpha * dir.dtau;
        it.kappa += alpha * dir.dkappa;
        if !(it.tau > 0.0 && it.kappa > 0.0) || it.x.iter().any(|v| !v.is_finite()) {
            break;
        }
    }

    match best {
        Some((merit, x, y, s)) if merit <= settings.tol_reduced => {
            finish(SolveStatus::NearOptimal, x, y, s, iterations)
        }
        _ => finish(
            SolveStatus::NumericalFailure,
            &it.x / it.tau,
            &it.y / it.tau,
            &it.s / it.tau,
            iterations,
        ),
    }
}


#[cfg(test)]
mod property_tests {
    use super::*;
    use crate::conic::ConeSpec;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        // LPs built around a known interior point and a known dual-feasible
        // point are always solvable; weak duality must hold.
        #[test]
        fn random_feasible_lps(
            m in 1usize..5,
            n in 2usize..8,
            seed in proptest::collection::vec(-1.0f64..1.0, 64),
            x0 in proptest::collection::vec(0.1f64..2.0, 8),
            s0 in proptest::collection::vec(0.1f64..2.0, 8),
        ) {
            let n = n.max(m + 1);
            let n = n.min(8);
            let a: Vec<Vec<f64>> = (0..m).map(|i| (0..n).map(|j| seed[(i * 8 + j) % 64]).collect()).collect();
            let b: Vec<f64> = a.iter().map(|r| r.iter().zip(&x0).map(|(a, x)| a * x).sum()).collect();
            let y0: Vec<f64> = (0..m).map(|i| seed[(40 + i) % 64]).collect();
            let c: Vec<f64> = (0..n).map(|j| (0..m).map(|i| a[i][j] * y0[i]).sum::<f64>() + s0[j]).collect();
            let p = ConicProblem {
                rows: a.iter().map(|r| r.iter().copied().enumerate().collect()).collect(),
                b,
                c,
                cones: ConeSpec { nonneg: n, ..Default::default() },
            };
            let sol = solve(&p, &SolverSettings::default()).unwrap();
            prop_assert_eq!(sol.status, SolveStatus::Optimal);
            let gap = (sol.primal_obj - sol.dual_obj).abs() / (1.0 + sol.primal_obj.abs());
            prop_assert!(gap <= 1e-7, "gap {}", gap);
            prop_assert!(sol.primal_obj >= sol.dual_obj - 1e-7);
            prop_assert!(sol.primal_residual <= 1e-7);
        }
    }
}
