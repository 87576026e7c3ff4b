//! Separability tests applied to Σ_AB: partial transpose, realignment (CCNR)
//! and the swap witness.

use serde::{Deserialize, Serialize};

use crate::ensemble::{special_solution, Ensemble};
use crate::error::{Error, Result};
use crate::linalg::{
    c, min_eigenvalue, partial_transpose, trace_norm, CMatrix, Hermitian, Side, Tolerances,
};
use crate::steering_map::{check_compatible, sigma_from_model, SigmaOperator, ZSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Ppt,
    Ccnr,
    Swap,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::Ppt => "ppt",
            Criterion::Ccnr => "ccnr",
            Criterion::Swap => "swap",
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ppt" => Ok(Self::Ppt),
            "ccnr" => Ok(Self::Ccnr),
            "swap" => Ok(Self::Swap),
            other => Err(Error::validation(format!("unknown criterion `{other}`"))),
        }
    }
}

/// Outcome classification attached to every verdict.
pub mod detail {
    pub const NOT_A_STATE: &str = "not-a-quantum-state";
    pub const ENTANGLED: &str = "entangled";
    pub const NOT_DETECTED: &str = "not-detected";
    pub const NEAR_BOUNDARY: &str = "inconclusive-near-boundary";
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionVerdict {
    pub criterion: String,
    pub value: f64,
    pub threshold: f64,
    pub detected: bool,
    pub detail: String,
}

#[derive(Clone, Copy)]
enum Direction {
    Below,
    Above,
}

fn verdict(criterion: Criterion, value: f64, threshold: f64, dir: Direction, tol: &Tolerances, base_detail: &str) -> CriterionVerdict {
    let excess = match dir {
        Direction::Below => threshold - value,
        Direction::Above => value - threshold,
    };
    let detected = excess > tol.detection;
    let detail = if (value - threshold).abs() < tol.near_boundary {
        detail::NEAR_BOUNDARY.to_string()
    } else if detected {
        base_detail.to_string()
    } else {
        detail::NOT_DETECTED.to_string()
    };
    CriterionVerdict {
        criterion: criterion.name().into(),
        value,
        threshold,
        detected,
        detail,
    }
}

/// Minimum eigenvalue of Σ^{T_B}; if Σ itself is not PSD its minimum
/// eigenvalue is reported instead, flagged as not a state.
pub fn ppt(s: &SigmaOperator) -> CriterionVerdict {
    ppt_with(s, &Tolerances::default())
}

pub fn ppt_with(s: &SigmaOperator, tol: &Tolerances) -> CriterionVerdict {
    let own = min_eigenvalue(&s.matrix);
    if own < -tol.detection {
        return verdict(Criterion::Ppt, own, 0.0, Direction::Below, tol, detail::NOT_A_STATE);
    }
    let pt = partial_transpose(&s.matrix, (s.dim_a, s.dim_b), Side::B).expect("Σ dims are consistent");
    verdict(Criterion::Ppt, min_eigenvalue(&pt), 0.0, Direction::Below, tol, detail::ENTANGLED)
}

/// Orthonormal (Hilbert–Schmidt) Hermitian operators on one subsystem.
#[derive(Clone, Debug)]
pub struct LocalBasis {
    dim: usize,
    ops: Vec<Hermitian>,
}

impl LocalBasis {
    pub fn new(ops: Vec<Hermitian>) -> Result<Self> {
        let dim = ops
            .first()
            .ok_or_else(|| Error::validation("operator basis must be non-empty"))?
            .dim();
        for (i, a) in ops.iter().enumerate() {
            if a.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: a.dim(),
                    context: "local basis operator",
                });
            }
            for (j, b) in ops.iter().enumerate().skip(i) {
                let want = if i == j { 1.0 } else { 0.0 };
                let g = a.inner(b);
                if (g - want).abs() > 1e-10 {
                    return Err(Error::validation(format!(
                        "local operators {i} and {j} are not orthonormal (tr = {g:.3e})"
                    )));
                }
            }
        }
        Ok(Self { dim, ops })
    }

    /// 1/√d followed by the traceless generalized Gell-Mann matrices, all of
    /// unit Hilbert–Schmidt norm.
    pub fn gell_mann(d: usize) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut ops = vec![Hermitian::identity(d).scale(1.0 / (d as f64).sqrt())];
        for j in 0..d {
            for k in j + 1..d {
                let mut sym = CMatrix::zeros(d, d);
                sym[(j, k)] = c(s, 0.0);
                sym[(k, j)] = c(s, 0.0);
                ops.push(Hermitian::from_hermitian_part(&sym));
                let mut anti = CMatrix::zeros(d, d);
                anti[(j, k)] = c(0.0, -s);
                anti[(k, j)] = c(0.0, s);
                ops.push(Hermitian::from_hermitian_part(&anti));
            }
        }
        for l in 1..d {
            let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
            let diag: Vec<f64> = (0..d)
                .map(|i| match i.cmp(&l) {
                    std::cmp::Ordering::Less => norm,
                    std::cmp::Ordering::Equal => -(l as f64) * norm,
                    std::cmp::Ordering::Greater => 0.0,
                })
                .collect();
            ops.push(Hermitian::diag(&diag));
        }
        Self { dim: d, ops }
    }

    /// Mixes the operators with a real orthogonal matrix given row-wise.
    pub fn rotated(&self, orth: &[Vec<f64>]) -> Result<Self> {
        if orth.len() != self.ops.len() || orth.iter().any(|r| r.len() != self.ops.len()) {
            return Err(Error::validation("rotation must be square with the basis size"));
        }
        let ops = orth
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&self.ops)
                    .fold(Hermitian::zeros(self.dim), |acc, (&w, g)| acc.add_scaled(g, w))
            })
            .collect();
        Self::new(ops)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ops(&self) -> &[Hermitian] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

/// [C]_{kl} = tr(G_k^A ⊗ G_l^B Σ)
pub fn correlation_matrix(s: &SigmaOperator, basis_a: &LocalBasis, basis_b: &LocalBasis) -> Result<CMatrix> {
    if basis_a.dim() != s.dim_a || basis_b.dim() != s.dim_b {
        return Err(Error::DimensionMismatch {
            expected: s.dim_a * s.dim_b,
            found: basis_a.dim() * basis_b.dim(),
            context: "CCNR local bases",
        });
    }
    let (da, db) = (s.dim_a, s.dim_b);
    let sigma = s.matrix.matrix();
    // tr(G⊗H Σ) = Σ_{ijkl} G_{ji} H_{lk} Σ_{(i,k),(j,l)}
    Ok(CMatrix::from_fn(basis_a.len(), basis_b.len(), |p, q| {
        let g = basis_a.ops()[p].matrix();
        let h = basis_b.ops()[q].matrix();
        let mut acc = c(0.0, 0.0);
        for i in 0..da {
            for j in 0..da {
                let gji = g[(j, i)];
                if gji.norm() == 0.0 {
                    continue;
                }
                for k in 0..db {
                    for l in 0..db {
                        acc += gji * h[(l, k)] * sigma[(i * db + k, j * db + l)];
                    }
                }
            }
        }
        c(acc.re, 0.0)
    }))
}

pub fn ccnr(s: &SigmaOperator) -> CriterionVerdict {
    ccnr_with(
        s,
        &LocalBasis::gell_mann(s.dim_a),
        &LocalBasis::gell_mann(s.dim_b),
        &Tolerances::default(),
    )
    .expect("default bases match Σ")
}

pub fn ccnr_with(s: &SigmaOperator, basis_a: &LocalBasis, basis_b: &LocalBasis, tol: &Tolerances) -> Result<CriterionVerdict> {
    let cm = correlation_matrix(s, basis_a, basis_b)?;
    Ok(verdict(Criterion::Ccnr, trace_norm(&cm), 1.0, Direction::Above, tol, detail::ENTANGLED))
}

/// C = Σ_i tr(Z_i ω^spec_i), the flip-operator expectation on Σ_AB.
pub fn swap_value(z: &ZSet, e: &Ensemble) -> Result<f64> {
    check_compatible(z, e)?;
    if z.dim_a() != e.params().d {
        return Err(Error::ParamMismatch(format!(
            "swap witness needs dA = d, got dA={} and d={}",
            z.dim_a(),
            e.params().d
        )));
    }
    let model = special_solution(e);
    Ok(z
        .members()
        .iter()
        .zip(model.omegas())
        .map(|(zi, wi)| zi.inner(wi))
        .sum())
}

/// tr(V Σ) with V the flip operator; needs dA = dB.
pub fn flip_expectation(s: &SigmaOperator) -> Result<f64> {
    if s.dim_a != s.dim_b {
        return Err(Error::ParamMismatch("flip operator needs equal local dimensions".into()));
    }
    let d = s.dim_a;
    let m = s.matrix.matrix();
    // V|ij⟩ = |ji⟩, so tr(VΣ) = Σ_{ij} ⟨ij|Σ|ji⟩
    Ok((0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| m[(i * d + j, j * d + i)].re)
        .sum())
}

pub fn swap_witness(z: &ZSet, e: &Ensemble) -> Result<CriterionVerdict> {
    swap_witness_with(z, e, &Tolerances::default())
}

pub fn swap_witness_with(z: &ZSet, e: &Ensemble, tol: &Tolerances) -> Result<CriterionVerdict> {
    let value = swap_value(z, e)?;
    let mut v = verdict(Criterion::Swap, value, 0.0, Direction::Below, tol, detail::ENTANGLED);
    let sigma = sigma_from_model(z, &special_solution(e));
    if let Ok(alt) = flip_expectation(&sigma) {
        if (alt - value).abs() > 1e-9 {
            v.detail = format!("{} (flip expectation {alt:.12} disagrees)", v.detail);
        }
    }
    Ok(v)
}
