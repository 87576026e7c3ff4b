//! Exact steerability test.
//!
//! The ensemble is non-steerable iff some solution ω = ω^spec + Σ_k v^(k) X_k
//! of the hidden-state equations is PSD. We solve the robust version
//!
//! ```text
//! t* = max t   s.t.  ω^spec_i + Σ_k v^(k)_i X_k ⪰ t·1  for all i
//! ```
//!
//! whose dual is
//!
//! ```text
//! min Σ_i tr(Z_i ω^spec_i)  s.t.  Z_i ⪰ 0,  Σ_i tr Z_i = 1,  Σ_i v^(k)_i Z_i = 0.
//! ```
//!
//! The dual variables are a steering map; when t* < 0 they form a witness
//! with a negative swap value.

pub mod ipm;

use serde::Serialize;

use crate::ensemble::{homogeneous_basis, special_solution, Ensemble, HiddenStateModel, HomogeneousBasis};
use crate::error::{Error, Result};
use crate::linalg::{solve_real, Hermitian, Tolerances};
use crate::separability::{swap_value, LocalBasis};
use crate::steering_map::{validate_zset_with, ZSet};

#[derive(Clone, Copy, Debug)]
pub struct LhsConfig {
    /// Steerable iff t* < −tol.
    pub tol: f64,
    pub max_iterations: usize,
    /// Relative accuracy requested from the interior-point solver.
    pub solver_tolerance: f64,
    /// Residual accepted when verifying extracted witnesses.
    pub witness_relation_tol: f64,
}

impl Default for LhsConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iterations: 10_000,
            solver_tolerance: 1e-11,
            witness_relation_tol: 1e-7,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LhsVerdict {
    pub steerable: bool,
    /// Largest achievable minimum eigenvalue over all hidden-state blocks.
    pub margin: f64,
    /// Dual objective of the solver (swap value of the unit-mass dual Z-set).
    pub dual_bound: f64,
    pub witness: Option<ZSet>,
    /// Swap value of the normalised witness on the input ensemble.
    pub witness_swap_value: Option<f64>,
    /// Why no witness is attached although the ensemble is steerable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_note: Option<String>,
    pub iterations: usize,
    pub residual: f64,
    #[serde(skip)]
    pub model: HiddenStateModel,
}

/// Raw dual solution of the robust feasibility problem.
#[derive(Clone, Debug)]
pub struct DualState {
    pub zs: Vec<Hermitian>,
    pub objective: f64,
}

struct Formulation {
    basis: HomogeneousBasis,
    spec: HiddenStateModel,
    ops: LocalBasis,
    problem: ipm::Problem,
}

fn formulate(e: &Ensemble) -> Formulation {
    let params = e.params();
    let space = params.index_space();
    let basis = homogeneous_basis(space);
    let spec = special_solution(e);
    let ops = LocalBasis::gell_mann(params.d);
    let nblocks = space.len();

    let mut constraints = Vec::with_capacity(1 + basis.len() * ops.len());
    constraints.push(ipm::Constraint {
        blocks: (0..nblocks).map(|b| (b, Hermitian::identity(params.d))).collect(),
    });
    for v in basis.vectors() {
        for g in ops.ops() {
            let blocks = v
                .iter()
                .enumerate()
                .filter(|(_, &coef)| coef != 0)
                .map(|(b, &coef)| (b, g.scale(-(coef as f64))))
                .collect();
            constraints.push(ipm::Constraint { blocks });
        }
    }
    let mut b = vec![0.0; constraints.len()];
    b[0] = 1.0;
    let problem = ipm::Problem {
        c: spec.omegas().to_vec(),
        constraints,
        b,
    };
    Formulation {
        basis,
        spec,
        ops,
        problem,
    }
}

pub fn decide(e: &Ensemble, config: &LhsConfig) -> Result<LhsVerdict> {
    decide_with(e, config, &Tolerances::default())
}

pub fn decide_with(e: &Ensemble, config: &LhsConfig, tol: &Tolerances) -> Result<LhsVerdict> {
    if config.tol.is_nan() || config.tol < 1e-8 {
        return Err(Error::validation(format!("LHS tolerance must be >= 1e-8, got {}", config.tol)));
    }
    e.ensure_valid(tol)?;
    let f = formulate(e);
    let settings = ipm::Settings {
        max_iterations: config.max_iterations,
        tolerance: config.solver_tolerance,
        ..ipm::Settings::default()
    };
    let sol = ipm::solve_unchecked(&f.problem, &settings)?;

    // Recover X_k from y; ω = ω^spec + Σ_k v^(k) X_k satisfies the equations exactly.
    let d = e.params().d;
    let nops = f.ops.len();
    let xs: Vec<Hermitian> = (0..f.basis.len())
        .map(|k| {
            f.ops
                .ops()
                .iter()
                .enumerate()
                .fold(Hermitian::zeros(d), |acc, (r, g)| acc.add_scaled(g, sol.y[1 + k * nops + r]))
        })
        .collect();
    let model = f.spec.shifted(&f.basis, &xs)?;
    let margin = model.min_eigenvalue();
    let steerable = margin < -config.tol;
    let residual = sol.primal_residual.max(sol.dual_residual);

    // Any dual iterate gives an explicit model, so margin ≤ t* and a margin
    // above −tol settles non-steerability even without convergence. The
    // opposite verdict then needs a verified witness.
    let undecided = || Error::Undecided {
        iterations: sol.iterations,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        gap: (sol.primal_objective - sol.dual_objective).abs(),
    };
    if !margin.is_finite() {
        return Err(undecided());
    }
    let converged = sol.converged;
    let mut verdict = LhsVerdict {
        steerable,
        margin,
        dual_bound: sol.primal_objective,
        witness: None,
        witness_swap_value: None,
        witness_note: None,
        iterations: sol.iterations,
        residual,
        model,
    };
    if steerable {
        let dual = DualState {
            zs: sol.x.clone(),
            objective: sol.primal_objective,
        };
        match extract_witness(&dual, e, config, tol) {
            Ok((z, value)) => {
                verdict.witness = Some(z);
                verdict.witness_swap_value = Some(value);
            }
            Err(_) if !converged => return Err(undecided()),
            Err(err) => verdict.witness_note = Some(format!("witness unavailable: {err}")),
        }
    }
    Ok(verdict)
}

/// Turns raw dual variables into a verified steering-map witness normalised
/// to tr Σ_AB = 1. Returns the witness and its swap value on `e`.
pub fn extract_witness(dual: &DualState, e: &Ensemble, config: &LhsConfig, tol: &Tolerances) -> Result<(ZSet, f64)> {
    let params = e.params();
    let space = params.index_space();
    let basis = homogeneous_basis(space);
    let spec = special_solution(e);
    if dual.zs.len() != space.len() {
        return Err(Error::DimensionMismatch {
            expected: space.len(),
            found: dual.zs.len(),
            context: "dual blocks",
        });
    }

    let projected = project_onto_relations(&dual.zs, &basis)?;
    let mut z = ZSet::new(space, projected)?;

    let lmin = z.min_eigenvalue();
    if lmin < 0.0 {
        z = z.shifted_by_identity(-lmin);
    }

    let swap = |z: &ZSet| -> f64 { z.members().iter().zip(spec.omegas()).map(|(zi, wi)| zi.inner(wi)).sum() };
    let sigma_trace = |z: &ZSet| -> f64 {
        z.members()
            .iter()
            .zip(spec.omegas())
            .map(|(zi, wi)| zi.trace_re() * wi.trace_re())
            .sum()
    };

    let value = swap(&z);
    if value >= 0.0 {
        return Err(Error::validation(format!("dual variables do not certify steering (swap value {value:.3e})")));
    }

    let mut trace = sigma_trace(&z);
    if trace <= 1e-12 {
        z = epsilon_repair(&z, &spec, value)?;
        trace = sigma_trace(&z);
        if trace <= 1e-12 {
            return Err(Error::validation("could not make tr Σ positive"));
        }
    }
    let z = z.scaled(1.0 / trace);

    let check_tol = Tolerances {
        zset_relation: config.witness_relation_tol,
        ..*tol
    };
    validate_zset_with(&z, &check_tol).into_result("witness")?;
    let value = swap_value(&z, e)?;
    if value >= -tol.detection {
        return Err(Error::validation(format!("normalised witness swap value {value:.3e} is not negative")));
    }
    Ok((z, value))
}

/// Orthogonal projection of the blocks onto {Z : Σ_i v^(k)_i Z_i = 0 ∀k}.
fn project_onto_relations(zs: &[Hermitian], basis: &HomogeneousBasis) -> Result<Vec<Hermitian>> {
    let k = basis.len();
    let mut out = zs.to_vec();
    if k == 0 {
        return Ok(out);
    }
    let vs = basis.vectors();
    let gram: Vec<Vec<f64>> = (0..k)
        .map(|a| (0..k).map(|b| vs[a].iter().zip(&vs[b]).map(|(x, y)| (x * y) as f64).sum()).collect())
        .collect();
    let dim = zs[0].dim();
    let residuals: Vec<Hermitian> = vs
        .iter()
        .map(|v| {
            v.iter()
                .zip(zs)
                .filter(|(&c, _)| c != 0)
                .fold(Hermitian::zeros(dim), |acc, (&c, z)| acc.add_scaled(z, c as f64))
        })
        .collect();
    // Solve G λ = e_l for each column of G^{-1}.
    for l in 0..k {
        let mut unit = vec![0.0; k];
        unit[l] = 1.0;
        let col = solve_real(gram.clone(), unit)?;
        for (a, &g_inv) in col.iter().enumerate() {
            if g_inv == 0.0 {
                continue;
            }
            for (i, &c) in vs[a].iter().enumerate() {
                if c != 0 {
                    out[i] = out[i].add_scaled(&residuals[l], -(c as f64) * g_inv);
                }
            }
        }
    }
    Ok(out)
}

/// Adds ε·1 to every member with outcome a at slot x, for an anchor-adjacent
/// ω^spec of positive trace, keeping the swap value negative.
fn epsilon_repair(z: &ZSet, spec: &HiddenStateModel, value: f64) -> Result<ZSet> {
    let space = z.space();
    for x in 0..space.n {
        for a in 0..space.anchor_outcome() {
            let w = spec.omegas()[space.anchor_with(x, a)].trace_re();
            if w > 0.0 {
                let eps = -value / (2.0 * w * z.dim_a() as f64);
                let id = Hermitian::identity(z.dim_a());
                return Ok(z.map_members(|i, m| {
                    if space.digit(i, x) == a {
                        m.add_scaled(&id, eps)
                    } else {
                        m.clone()
                    }
                }));
            }
        }
    }
    Err(Error::validation("no hidden state with positive trace to repair the witness"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{assemble, Povm};
    use crate::linalg::pauli::projectors;
    use crate::linalg::{c, ZERO};

    fn werner_ensemble(p: f64, axes: &[usize]) -> Ensemble {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let singlet = Hermitian::projector(&[ZERO, c(s, 0.0), c(-s, 0.0), ZERO]);
        let rho = singlet.scale(p).add(&Hermitian::identity(4).scale((1.0 - p) / 4.0));
        let povms: Vec<Povm> = axes.iter().map(|&k| Povm::new(projectors(k).to_vec()).unwrap()).collect();
        assemble(&rho, 2, &povms).unwrap()
    }

    #[test]
    fn werner_below_threshold_is_not_steerable() {
        let v = decide(&werner_ensemble(0.5, &[1, 2, 3]), &LhsConfig::default()).unwrap();
        assert!(!v.steerable);
        assert!(v.margin >= 0.0);
        assert!(v.witness.is_none());
        let e = werner_ensemble(0.5, &[1, 2, 3]);
        assert!(v.model.max_deviation(&e) < 1e-8);
        assert!(v.model.min_eigenvalue() >= -1e-8);
    }

    #[test]
    fn werner_above_threshold_has_witness() {
        let e = werner_ensemble(0.7, &[1, 2, 3]);
        let v = decide(&e, &LhsConfig::default()).unwrap();
        assert!(v.steerable);
        let z = v.witness.as_ref().expect("witness");
        assert!(v.witness_swap_value.unwrap() < 0.0);
        assert!(z.relation_residual() <= 1e-7);
        assert!(z.min_eigenvalue() >= -1e-10);
    }

    #[test]
    fn margin_and_dual_bound_agree() {
        for p in [0.2, 0.6, 0.9] {
            let v = decide(&werner_ensemble(p, &[1, 3]), &LhsConfig::default()).unwrap();
            assert!((v.margin - v.dual_bound).abs() < 1e-8, "p={p}: {} vs {}", v.margin, v.dual_bound);
        }
    }

    #[test]
    fn rejects_tiny_tolerance_and_invalid_ensembles() {
        let e = werner_ensemble(0.5, &[1, 3]);
        let cfg = LhsConfig {
            tol: 1e-12,
            ..LhsConfig::default()
        };
        assert!(decide(&e, &cfg).is_err());
        let bad = e.map_states(|s| s.scale(1.1)).unwrap();
        assert!(decide(&bad, &LhsConfig::default()).is_err());
    }

    #[test]
    fn epsilon_repair_keeps_relations_and_raises_trace() {
        let e = werner_ensemble(1.0, &[1, 3]);
        let spec = special_solution(&e);
        let z = crate::steering_map::pauli_sign_zset(&[1, 3]).unwrap();
        let value = -0.1;
        let repaired = epsilon_repair(&z, &spec, value).unwrap();
        assert!(repaired.relation_residual() < 1e-14);
        assert!(repaired.min_eigenvalue() >= z.min_eigenvalue() - 1e-15);
        let swap = |z: &ZSet| -> f64 { z.members().iter().zip(spec.omegas()).map(|(a, w)| a.inner(w)).sum() };
        let trace = |z: &ZSet| -> f64 { z.members().iter().zip(spec.omegas()).map(|(a, w)| a.trace_re() * w.trace_re()).sum() };
        assert!((trace(&repaired) - trace(&z) + value / 2.0).abs() < 1e-14);
        assert!((swap(&repaired) - swap(&z) + value / 4.0).abs() < 1e-14);
    }
}
