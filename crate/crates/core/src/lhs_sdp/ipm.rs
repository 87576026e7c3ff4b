//! Primal-dual interior-point method for small block-diagonal Hermitian SDPs
//!
//! ```text
//! primal:  min Σ_b tr(C_b X_b)   s.t. Σ_b tr(A_{j,b} X_b) = b_j,  X ⪰ 0
//! dual:    max b·y               s.t. S = C − Σ_j y_j A_j ⪰ 0
//! ```
//!
//! Search direction is HKM; the centering parameter comes from an affine
//! predictor step.

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, CMatrix, Cholesky, Hermitian};

/// One constraint matrix A_j, nonzero on a few blocks only.
#[derive(Clone, Debug, Default)]
pub struct Constraint {
    pub blocks: Vec<(usize, Hermitian)>,
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub c: Vec<Hermitian>,
    pub constraints: Vec<Constraint>,
    pub b: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct Settings {
    pub max_iterations: usize,
    /// Relative tolerance on the duality gap and both infeasibilities.
    pub tolerance: f64,
    pub step_fraction: f64,
    /// Accepted instead of `tolerance` when the iteration breaks down
    /// numerically close to the optimum.
    pub acceptable_tolerance: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            tolerance: 1e-11,
            step_fraction: 0.95,
            acceptable_tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Vec<Hermitian>,
    pub y: Vec<f64>,
    pub s: Vec<Hermitian>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    /// False when the iteration stopped on a numerical breakdown or the
    /// iteration cap before reaching `tolerance`.
    pub converged: bool,
}

impl Problem {
    fn block_users(&self) -> Vec<Vec<(usize, &Hermitian)>> {
        let mut users = vec![Vec::new(); self.c.len()];
        for (j, con) in self.constraints.iter().enumerate() {
            for (blk, a) in &con.blocks {
                users[*blk].push((j, a));
            }
        }
        users
    }

    /// A(X)_j = Σ_b Re tr(A_{j,b} X_b) for a possibly non-Hermitian X.
    fn apply(&self, x: &[CMatrix]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|con| {
                con.blocks
                    .iter()
                    .map(|(blk, a)| a.matrix().trace_product(&x[*blk]).re)
                    .sum()
            })
            .collect()
    }

    /// Σ_j y_j A_j, per block.
    fn combine(&self, y: &[f64]) -> Vec<Hermitian> {
        let mut out: Vec<Hermitian> = self.c.iter().map(|c| Hermitian::zeros(c.dim())).collect();
        for (con, &yj) in self.constraints.iter().zip(y) {
            if yj == 0.0 {
                continue;
            }
            for (blk, a) in &con.blocks {
                out[*blk] = out[*blk].add_scaled(a, yj);
            }
        }
        out
    }
}

fn total_dim(blocks: &[Hermitian]) -> usize {
    blocks.iter().map(Hermitian::dim).sum()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn blocks_norm(blocks: &[Hermitian]) -> f64 {
    blocks
        .iter()
        .map(|b| b.frobenius_norm().powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Largest α with X + α dX ⪰ 0 (∞ if unbounded).
fn max_step(x: &[Hermitian], dx: &[Hermitian]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (xb, dxb) in x.iter().zip(dx) {
        let inv_sqrt = eig_hermitian(xb).apply(|l| 1.0 / l.max(1e-300).sqrt());
        let w = Hermitian::from_hermitian_part(&(&(inv_sqrt.matrix() * dxb.matrix()) * inv_sqrt.matrix()));
        let lmin = eig_hermitian(&w).min();
        if lmin < 0.0 {
            alpha = alpha.min(-1.0 / lmin);
        }
    }
    alpha
}

struct Direction {
    dx: Vec<Hermitian>,
    dy: Vec<f64>,
    ds: Vec<Hermitian>,
}

/// Runs the iteration and returns the last iterate, converged or not.
pub fn solve_unchecked(p: &Problem, settings: &Settings) -> Result<Solution> {
    let nblocks = p.c.len();
    let m = p.constraints.len();
    if p.b.len() != m {
        return Err(Error::validation("SDP: b and constraint counts differ"));
    }
    let n_total = total_dim(&p.c) as f64;
    let users = p.block_users();
    let c_norm = blocks_norm(&p.c);
    let b_norm = norm(&p.b);

    let mut x: Vec<Hermitian> = p
        .c
        .iter()
        .map(|c| Hermitian::identity(c.dim()).scale(1.0 / n_total))
        .collect();
    let s_scale = 1.0 + c_norm;
    let mut s: Vec<Hermitian> = p.c.iter().map(|c| Hermitian::identity(c.dim()).scale(s_scale)).collect();
    let mut y = vec![0.0; m];
    let mut last_iter = 0;

    for iter in 0..settings.max_iterations {
        let ax = p.apply(&x.iter().map(|h| h.matrix().clone()).collect::<Vec<_>>());
        let rp: Vec<f64> = p.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let ay = p.combine(&y);
        let rd: Vec<Hermitian> = (0..nblocks).map(|k| p.c[k].sub(&s[k]).sub(&ay[k])).collect();

        let pobj: f64 = p.c.iter().zip(&x).map(|(c, x)| c.inner(x)).sum();
        let dobj: f64 = p.b.iter().zip(&y).map(|(b, y)| b * y).sum();
        let gap: f64 = x.iter().zip(&s).map(|(x, s)| x.inner(s)).sum();
        let mu = gap / n_total;

        let pres = norm(&rp) / (1.0 + b_norm);
        let dres = blocks_norm(&rd) / (1.0 + c_norm);
        let rel_gap = (pobj - dobj).abs().max(gap.abs()) / (1.0 + pobj.abs() + dobj.abs());
        let within = |t: f64| pres < t && dres < t && rel_gap < t;
        let converged = within(settings.tolerance);
        let acceptable = within(settings.acceptable_tolerance);
        let breakdown = |iter: usize, x: Vec<Hermitian>, y: Vec<f64>, s: Vec<Hermitian>| -> Result<Solution> {
            Ok(Solution {
                x,
                y,
                s,
                primal_objective: pobj,
                dual_objective: dobj,
                primal_residual: pres,
                dual_residual: dres,
                iterations: iter,
                converged: acceptable,
            })
        };
        if converged {
            return Ok(Solution {
                x,
                y,
                s,
                primal_objective: pobj,
                dual_objective: dobj,
                primal_residual: pres,
                dual_residual: dres,
                iterations: iter,
                converged: true,
            });
        }

        let s_inv: Vec<Hermitian> = s.iter().map(|sb| eig_hermitian(sb).apply(|l| 1.0 / l)).collect();

        // Schur complement M_ij = Σ_b Re tr(A_i X A_j S^{-1})
        let mut schur = vec![0.0; m * m];
        for blk in 0..nblocks {
            let list = &users[blk];
            let xb = x[blk].matrix();
            let sib = s_inv[blk].matrix();
            let products: Vec<CMatrix> = list.iter().map(|(_, a)| &(xb * a.matrix()) * sib).collect();
            for (jj, (j, _)) in list.iter().enumerate() {
                for (i, ai) in list.iter() {
                    if i < j {
                        continue;
                    }
                    schur[i * m + j] += ai.matrix().trace_product(&products[jj]).re;
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                schur[j * m + i] = schur[i * m + j];
            }
        }
        let chol = match Cholesky::factor(&schur, m) {
            Ok(ch) => ch,
            Err(_) => {
                let reg = 1e-14 * (0..m).map(|i| schur[i * m + i]).fold(1.0, f64::max);
                for i in 0..m {
                    schur[i * m + i] += reg;
                }
                match Cholesky::factor(&schur, m) {
                    Ok(ch) => ch,
                    Err(_) => return breakdown(iter, x, y, s),
                }
            }
        };

        let x_rd_sinv: Vec<CMatrix> = (0..nblocks)
            .map(|k| &(x[k].matrix() * rd[k].matrix()) * s_inv[k].matrix())
            .collect();
        let a_x_rd = p.apply(&x_rd_sinv);

        let direction = |sigma_mu: f64, correction: Option<&Direction>| -> Direction {
            // target: X S = σμ I (minus the second-order term for the corrector)
            let target: Vec<CMatrix> = (0..nblocks)
                .map(|k| {
                    let mut t = &s_inv[k].scale(sigma_mu).into_matrix() - x[k].matrix();
                    if let Some(d) = correction {
                        t = &t - &(&(d.dx[k].matrix() * d.ds[k].matrix()) * s_inv[k].matrix());
                    }
                    t
                })
                .collect();
            let a_target = p.apply(&target);
            let rhs: Vec<f64> = (0..m).map(|i| rp[i] - a_target[i] + a_x_rd[i]).collect();
            let mut dy = chol.solve(&rhs);
            for _ in 0..2 {
                let resid: Vec<f64> = (0..m)
                    .map(|i| rhs[i] - (0..m).map(|j| schur[i * m + j] * dy[j]).sum::<f64>())
                    .collect();
                for (d, c) in dy.iter_mut().zip(chol.solve(&resid)) {
                    *d += c;
                }
            }
            let ady = p.combine(&dy);
            let ds: Vec<Hermitian> = (0..nblocks).map(|k| rd[k].sub(&ady[k])).collect();
            let dx: Vec<Hermitian> = (0..nblocks)
                .map(|k| {
                    let full = &target[k] - &(&(x[k].matrix() * ds[k].matrix()) * s_inv[k].matrix());
                    Hermitian::from_hermitian_part(&full)
                })
                .collect();
            Direction { dx, dy, ds }
        };

        let predictor = direction(0.0, None);
        let ap = max_step(&x, &predictor.dx).min(1.0);
        let ad = max_step(&s, &predictor.ds).min(1.0);
        let gap_aff: f64 = (0..nblocks)
            .map(|k| x[k].add_scaled(&predictor.dx[k], ap).inner(&s[k].add_scaled(&predictor.ds[k], ad)))
            .sum();
        let sigma = (gap_aff / gap).clamp(0.0, 1.0).powi(3);
        let step = direction(sigma * mu, Some(&predictor));

        let ap = (settings.step_fraction * max_step(&x, &step.dx)).min(1.0);
        let ad = (settings.step_fraction * max_step(&s, &step.ds)).min(1.0);
        let finite = |v: &[Hermitian]| v.iter().all(|h| h.max_abs().is_finite());
        if !(ap.is_finite() && ad.is_finite() && finite(&step.dx) && finite(&step.ds)) {
            return breakdown(iter, x, y, s);
        }
        for k in 0..nblocks {
            x[k] = x[k].add_scaled(&step.dx[k], ap);
            s[k] = s[k].add_scaled(&step.ds[k], ad);
        }
        for (yi, dyi) in y.iter_mut().zip(&step.dy) {
            *yi += ad * dyi;
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::Undecided {
                iterations: iter,
                primal_residual: pres,
                dual_residual: dres,
                gap: rel_gap,
            });
        }
        last_iter = iter + 1;
    }
    let ax = p.apply(&x.iter().map(|h| h.matrix().clone()).collect::<Vec<_>>());
    let rp: Vec<f64> = p.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let ay = p.combine(&y);
    let rd: Vec<Hermitian> = (0..nblocks).map(|k| p.c[k].sub(&s[k]).sub(&ay[k])).collect();
    let primal_objective = p.c.iter().zip(&x).map(|(c, x)| c.inner(x)).sum();
    let dual_objective = p.b.iter().zip(&y).map(|(b, y)| b * y).sum();
    Ok(Solution {
        primal_residual: norm(&rp) / (1.0 + b_norm),
        dual_residual: blocks_norm(&rd) / (1.0 + c_norm),
        x,
        y,
        s,
        primal_objective,
        dual_objective,
        iterations: last_iter,
        converged: false,
    })
}

/// Like [`solve_unchecked`], but an unconverged run is an error.
pub fn solve(p: &Problem, settings: &Settings) -> Result<Solution> {
    let sol = solve_unchecked(p, settings)?;
    if sol.converged {
        return Ok(sol);
    }
    let gap = (sol.primal_objective - sol.dual_objective).abs()
        / (1.0 + sol.primal_objective.abs() + sol.dual_objective.abs());
    Err(Error::Undecided {
        iterations: sol.iterations,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, CMatrix};

    /// min tr(C X) s.t. tr X = 1, X ⪰ 0 has value λ_min(C).
    #[test]
    fn minimum_eigenvalue_sdp() {
        let cm = Hermitian::new(
            CMatrix::from_rows(&[
                vec![c(2.0, 0.0), c(0.5, -0.3), c(0.0, 0.0)],
                vec![c(0.5, 0.3), c(1.0, 0.0), c(0.2, 0.0)],
                vec![c(0.0, 0.0), c(0.2, 0.0), c(-0.5, 0.0)],
            ])
            .unwrap(),
        )
        .unwrap();
        let want = eig_hermitian(&cm).min();
        let p = Problem {
            c: vec![cm],
            constraints: vec![Constraint {
                blocks: vec![(0, Hermitian::identity(3))],
            }],
            b: vec![1.0],
        };
        let sol = solve(&p, &Settings::default()).unwrap();
        assert!((sol.primal_objective - want).abs() < 1e-9, "{} vs {want}", sol.primal_objective);
        assert!((sol.dual_objective - want).abs() < 1e-9);
    }

    /// Two blocks coupled by one trace constraint: min over the smaller block minimum.
    #[test]
    fn two_block_sdp() {
        let p = Problem {
            c: vec![Hermitian::diag(&[3.0, 1.5]), Hermitian::diag(&[0.7, 2.0])],
            constraints: vec![Constraint {
                blocks: vec![(0, Hermitian::identity(2)), (1, Hermitian::identity(2))],
            }],
            b: vec![1.0],
        };
        let sol = solve(&p, &Settings::default()).unwrap();
        assert!((sol.dual_objective - 0.7).abs() < 1e-9);
        assert!(sol.iterations < 100);
    }

    #[test]
    fn iteration_cap_reports_undecided() {
        let p = Problem {
            c: vec![Hermitian::diag(&[1.0, -1.0])],
            constraints: vec![Constraint {
                blocks: vec![(0, Hermitian::identity(2))],
            }],
            b: vec![1.0],
        };
        let settings = Settings {
            max_iterations: 2,
            ..Settings::default()
        };
        assert!(matches!(solve(&p, &settings), Err(Error::Undecided { .. })));
    }
}
