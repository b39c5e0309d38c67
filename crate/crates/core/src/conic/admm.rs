use super::{Cone, ConicOptions, ConicProblem, ConicResult, ConicStatus};

const SCALE_MIN: f64 = 1e-4;
const SCALE_MAX: f64 = 1e4;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;

struct Csr {
    ptr: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl Csr {
    fn from_rows(rows: &[Vec<(usize, f64)>]) -> Self {
        let mut ptr = vec![0];
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for r in rows {
            for &(j, v) in r {
                idx.push(j);
                val.push(v);
            }
            ptr.push(idx.len());
        }
        Csr { ptr, idx, val }
    }

    fn rows(&self) -> usize {
        self.ptr.len() - 1
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.ptr[i]..self.ptr[i + 1];
        self.idx[r.clone()].iter().copied().zip(self.val[r].iter().copied())
    }

    fn mul(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `out += Aᵀ y`.
    fn tmul_add(&self, y: &[f64], out: &mut [f64]) {
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                for (j, v) in self.row(i) {
                    out[j] += v * yi;
                }
            }
        }
    }
}

/// Dense lower-triangular Cholesky factor.
struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    fn new(n: usize, mut a: Vec<f64>) -> Self {
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= a[j * n + k] * a[j * n + k];
            }
            // σI keeps the matrix positive definite; guard round-off anyway.
            let d = d.max(1e-14).sqrt();
            a[j * n + j] = d;
            for i in j + 1..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= a[i * n + k] * a[j * n + k];
                }
                a[i * n + j] = s / d;
            }
        }
        Cholesky { n, l: a }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lagrangian bound `−hᵀy + Σ min(r_j lo_j, r_j hi_j)`, `r = c + Aᵀy`,
/// valid for any `y` in the dual cone.
fn lagrangian_bound(p: &ConicProblem, a: &Csr, y: &[f64]) -> f64 {
    let mut r = p.c.clone();
    a.tmul_add(y, &mut r);
    let mut bound = -dot(&p.h, y);
    for (j, &rj) in r.iter().enumerate() {
        if rj == 0.0 {
            continue;
        }
        let term = (rj * p.col_lower[j]).min(rj * p.col_upper[j]);
        if term.is_nan() {
            return f64::NEG_INFINITY;
        }
        bound += term;
    }
    if bound.is_nan() {
        f64::NEG_INFINITY
    } else {
        bound
    }
}

struct Residuals {
    primal: f64,
    dual: f64,
    gap: f64,
}

impl Residuals {
    fn worst(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

/// ADMM on the (equilibrated) problem
/// `min ĉᵀẑ  s.t.  Âẑ + ŝ = ĥ,  ŝ ∈ K`, with column bounds appended as
/// nonnegative rows.
pub fn solve_conic_with(p: &ConicProblem, opts: &ConicOptions) -> ConicResult {
    let n = p.num_cols();
    assert_eq!(p.cones.iter().map(Cone::dim).sum::<usize>(), p.num_rows());

    // Full row set: the problem rows followed by finite column bounds.
    let mut rows = p.rows.clone();
    let mut h = p.h.clone();
    let mut cones = p.cones.clone();
    let mut bound_rows = 0;
    for j in 0..n {
        if p.col_upper[j].is_finite() {
            rows.push(vec![(j, 1.0)]);
            h.push(p.col_upper[j]);
            bound_rows += 1;
        }
        if p.col_lower[j].is_finite() {
            rows.push(vec![(j, -1.0)]);
            h.push(-p.col_lower[j]);
            bound_rows += 1;
        }
    }
    if bound_rows > 0 {
        cones.push(Cone::NonNeg(bound_rows));
    }
    let m = rows.len();
    let orig = Csr::from_rows(&p.rows);

    // Ruiz equilibration: Â = D A E, with one shared scale per coupled block.
    let mut d = vec![1.0; m];
    let mut e = vec![1.0; n];
    let mut scaled = rows.clone();
    for _ in 0..opts.scaling_passes {
        let mut col_norm = vec![0.0f64; n];
        let mut row_norm = vec![0.0f64; m];
        for (i, r) in scaled.iter().enumerate() {
            for &(j, v) in r {
                col_norm[j] = col_norm[j].max(v.abs());
                row_norm[i] = row_norm[i].max(v.abs());
            }
        }
        let mut at = 0;
        for cone in &cones {
            let dim = cone.dim();
            if cone.is_coupled() {
                let mx = row_norm[at..at + dim].iter().fold(0.0f64, |a, &b| a.max(b));
                row_norm[at..at + dim].iter_mut().for_each(|x| *x = mx);
            }
            at += dim;
        }
        let dr: Vec<f64> = row_norm
            .iter()
            .map(|&x| if x > 0.0 { 1.0 / x.clamp(SCALE_MIN, SCALE_MAX).sqrt() } else { 1.0 })
            .collect();
        let er: Vec<f64> = col_norm
            .iter()
            .map(|&x| if x > 0.0 { 1.0 / x.clamp(SCALE_MIN, SCALE_MAX).sqrt() } else { 1.0 })
            .collect();
        for (i, r) in scaled.iter_mut().enumerate() {
            for (j, v) in r.iter_mut() {
                *v *= dr[i] * er[*j];
            }
        }
        d.iter_mut().zip(&dr).for_each(|(a, b)| *a *= b);
        e.iter_mut().zip(&er).for_each(|(a, b)| *a *= b);
    }
    let a_hat = Csr::from_rows(&scaled);
    let a_full = Csr::from_rows(&rows);
    let h_hat: Vec<f64> = h.iter().zip(&d).map(|(h, d)| h * d).collect();
    let ec: Vec<f64> = p.c.iter().zip(&e).map(|(c, e)| c * e).collect();
    let cost_scale = 1.0 / norm_inf(&ec).max(1.0);
    let c_hat: Vec<f64> = ec.iter().map(|c| c * cost_scale).collect();

    // ÂᵀÂ is formed once; ρ changes only rescale it.
    let mut ata = vec![0.0; n * n];
    for i in 0..a_hat.rows() {
        let r: Vec<(usize, f64)> = a_hat.row(i).collect();
        for &(j, vj) in &r {
            for &(k, vk) in &r {
                ata[j * n + k] += vj * vk;
            }
        }
    }
    let factor = |rho: f64| {
        let mut mtx: Vec<f64> = ata.iter().map(|x| rho * x).collect();
        for j in 0..n {
            mtx[j * n + j] += opts.sigma;
        }
        Cholesky::new(n, mtx)
    };

    let mut rho = opts.rho;
    let mut chol = factor(rho);
    let mut z = vec![0.0; n];
    let mut s = vec![0.0; m];
    let mut u = vec![0.0; m];
    let mut az = vec![0.0; m];
    let mut rhs = vec![0.0; n];
    let mut tmp = vec![0.0; m];

    let norm_h = norm_inf(&h);
    let norm_c = norm_inf(&p.c);

    let mut best: Option<(Residuals, Vec<f64>)> = None;
    let mut lower_bound = f64::NEG_INFINITY;
    let mut status = ConicStatus::MaxIter;
    let mut iterations = 0;
    let mut last_res = Residuals { primal: f64::INFINITY, dual: f64::INFINITY, gap: f64::INFINITY };
    let mut window_start: Option<(f64, f64)> = None;
    let mut strikes = 0;

    for it in 1..=opts.max_iter {
        iterations = it;
        // z-update: (ρÂᵀÂ + σI) ẑ = σẑ − ĉ + ρÂᵀ(ĥ − ŝ − û)
        for i in 0..m {
            tmp[i] = rho * (h_hat[i] - s[i] - u[i]);
        }
        for j in 0..n {
            rhs[j] = opts.sigma * z[j] - c_hat[j];
        }
        a_hat.tmul_add(&tmp, &mut rhs);
        chol.solve(&mut rhs);
        z.copy_from_slice(&rhs);
        a_hat.mul(&z, &mut az);
        // relaxed Âẑ, then s- and u-updates
        for i in 0..m {
            az[i] = opts.alpha * az[i] + (1.0 - opts.alpha) * (h_hat[i] - s[i]);
            tmp[i] = h_hat[i] - az[i] - u[i];
        }
        let mut at = 0;
        for cone in &cones {
            let dim = cone.dim();
            cone.project(&mut tmp[at..at + dim]);
            at += dim;
        }
        for i in 0..m {
            s[i] = tmp[i];
            u[i] += az[i] + s[i] - h_hat[i];
        }

        if it % opts.check_every != 0 && it != opts.max_iter {
            continue;
        }

        // Unscaled iterate: z = Eẑ, s = D⁻¹ŝ, y = ρDû / cost_scale.
        let zu: Vec<f64> = z.iter().zip(&e).map(|(z, e)| z * e).collect();
        let su: Vec<f64> = s.iter().zip(&d).map(|(s, d)| s / d).collect();
        let y: Vec<f64> = u.iter().zip(&d).map(|(u, d)| rho * u * d / cost_scale).collect();
        let mut azu = vec![0.0; m];
        a_full.mul(&zu, &mut azu);
        let rp = (0..m).map(|i| (azu[i] + su[i] - h[i]).abs()).fold(0.0, f64::max);
        let mut dual = p.c.clone();
        a_full.tmul_add(&y, &mut dual);
        let rd = norm_inf(&dual);
        let mut aty = vec![0.0; n];
        a_full.tmul_add(&y, &mut aty);
        let pobj = dot(&p.c, &zu);
        let dobj = -dot(&h, &y);
        let res = Residuals {
            primal: rp / (1.0 + norm_h.max(norm_inf(&azu)).max(norm_inf(&su))),
            dual: rd / (1.0 + norm_c.max(norm_inf(&aty))),
            gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
        };

        // Problem rows only: their multipliers already lie in the dual cone.
        let mut yp = y[..p.num_rows()].to_vec();
        let mut at = 0;
        for cone in &p.cones {
            let dim = cone.dim();
            cone.project_dual(&mut yp[at..at + dim]);
            at += dim;
        }
        lower_bound = lower_bound.max(lagrangian_bound(p, &orig, &yp));

        if best.as_ref().map_or(true, |(b, _)| res.worst() < b.worst()) {
            best = Some((Residuals { ..res }, zu));
        }
        let converged = res.worst() <= opts.tol;
        let (rp_rel, rd_rel) = (res.primal, res.dual);
        last_res = res;
        if converged {
            status = ConicStatus::Optimal;
            break;
        }

        if it % opts.divergence_window == 0 {
            let ynorm = norm_inf(&y);
            if let Some((rp0, y0)) = window_start {
                // Stalled primal residual with a steadily growing multiplier.
                if rp_rel > 1e-4 && rp_rel > 0.9 * rp0 && ynorm > 2.0 * y0.max(1e-12) {
                    strikes += 1;
                } else {
                    strikes = 0;
                }
                if strikes >= 2 {
                    status = ConicStatus::Infeasible;
                    break;
                }
            }
            window_start = Some((rp_rel, ynorm));
        }

        if it % opts.adapt_every == 0 {
            // Balance in the scaled space the iteration actually runs in.
            let mut ah = vec![0.0; m];
            a_hat.mul(&z, &mut ah);
            let rps = (0..m).map(|i| (ah[i] + s[i] - h_hat[i]).abs()).fold(0.0, f64::max)
                / (1e-12 + norm_inf(&ah).max(norm_inf(&s)).max(norm_inf(&h_hat)));
            let yh: Vec<f64> = u.iter().map(|x| rho * x).collect();
            let mut aty = vec![0.0; n];
            a_hat.tmul_add(&yh, &mut aty);
            let rds = c_hat.iter().zip(&aty).map(|(c, a)| (c + a).abs()).fold(0.0, f64::max)
                / (1e-12 + norm_inf(&c_hat).max(norm_inf(&aty)));
            let ratio = if opts.adapt_scaled { rps / rds.max(1e-300) } else { rp_rel / rd_rel.max(1e-300) };
            let new_rho = if ratio > 10.0 {
                (rho * 2.0).min(RHO_MAX)
            } else if ratio < 0.1 {
                (rho / 2.0).max(RHO_MIN)
            } else {
                rho
            };
            if new_rho != rho {
                let k = rho / new_rho;
                u.iter_mut().for_each(|x| *x *= k);
                rho = new_rho;
                chol = factor(rho);
            }
        }
    }

    let (res, z) = match status {
        ConicStatus::Optimal => {
            let zu = z.iter().zip(&e).map(|(z, e)| z * e).collect();
            (last_res, zu)
        }
        _ => best.unwrap_or((last_res, vec![0.0; n])),
    };
    ConicResult {
        status,
        objective: dot(&p.c, &z),
        z,
        primal_residual: res.primal,
        dual_residual: res.dual,
        gap: res.gap,
        iterations,
        lower_bound,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{solve_conic, Cone, ConicProblem, ConicStatus};

    #[test]
    fn second_order_cone_minimum() {
        // min t  s.t.  t ≥ ‖(1, 1)‖
        let mut p = ConicProblem::new(1);
        p.c[0] = 1.0;
        p.add_cone_affine(
            Cone::SecondOrder(3),
            vec![(vec![(0, 1.0)], 0.0), (vec![], 1.0), (vec![], 1.0)],
        );
        let r = solve_conic(&p);
        assert_eq!(r.status, ConicStatus::Optimal);
        assert!((r.z[0] - 2.0_f64.sqrt()).abs() < 1e-5, "{}", r.z[0]);
    }

    #[test]
    fn small_lp() {
        // min −x − y  s.t.  x + 2y ≤ 2, 0 ≤ x, y ≤ 1  →  −1.5
        let mut p = ConicProblem::new(2);
        p.c = vec![-1.0, -1.0];
        p.col_lower = vec![0.0, 0.0];
        p.col_upper = vec![1.0, 1.0];
        p.add_le(vec![(0, 1.0), (1, 2.0)], 2.0);
        let r = solve_conic(&p);
        assert_eq!(r.status, ConicStatus::Optimal);
        assert!((r.objective + 1.5).abs() < 1e-5);
        assert!(r.lower_bound <= -1.5 + 1e-9 && r.lower_bound > -1.5 - 1e-4);
    }

    #[test]
    fn infeasible_is_flagged() {
        let mut p = ConicProblem::new(1);
        p.c[0] = 1.0;
        p.add_ge(vec![(0, 1.0)], 2.0);
        p.add_le(vec![(0, 1.0)], 1.0);
        let r = solve_conic(&p);
        assert_eq!(r.status, ConicStatus::Infeasible);
    }
}
