//! Dimension-bounded steering test on a two-outcome correlator table.
//!
//! The (n_B+1)×(n_B+1) data matrix D_{ky} = Σ_i tr(G_k Z_i) tr(B_y ω^spec_i)
//! (B_0 = 1) obeys a determinant bound for non-steerable data whenever
//! Alice's dimension is d_A; exceeding it certifies steering.

use serde::{Deserialize, Serialize};

use crate::ensemble::IndexSpace;
use crate::error::{Error, Result};
use crate::linalg::pauli::sigma;
use crate::linalg::{determinant_real, Hermitian, Tolerances};
use crate::separability::LocalBasis;
use crate::steering_map::{cube_zset, ZSet};

pub mod detail {
    pub const DETECTED: &str = "steering-certified";
    pub const NOT_DETECTED: &str = "not-detected";
    pub const NEAR_BOUNDARY: &str = "inconclusive-near-boundary";
    pub const NOT_INDEPENDENT: &str = "B_y linear independence not certified";
}

/// Relative size of |det D| against the product of row norms below which a
/// conditioning warning is attached.
pub const CONDITIONING_WARNING: f64 = 1e-8;

/// Two-outcome correlators ⟨A_x B_y⟩ with marginals ⟨A_x⟩, ⟨B_y⟩.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable")]
pub struct CorrelatorTable {
    #[serde(rename = "nA")]
    n_a: usize,
    #[serde(rename = "nB")]
    n_b: usize,
    corr: Vec<Vec<f64>>,
    #[serde(rename = "margA")]
    marg_a: Vec<f64>,
    #[serde(rename = "margB")]
    marg_b: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTable {
    #[serde(rename = "nA")]
    n_a: usize,
    #[serde(rename = "nB")]
    n_b: usize,
    corr: Vec<Vec<f64>>,
    #[serde(rename = "margA")]
    marg_a: Vec<f64>,
    #[serde(rename = "margB")]
    marg_b: Vec<f64>,
}

impl TryFrom<RawTable> for CorrelatorTable {
    type Error = Error;

    fn try_from(r: RawTable) -> Result<Self> {
        Self::new(r.n_a, r.n_b, r.corr, r.marg_a, r.marg_b)
    }
}

impl CorrelatorTable {
    pub fn new(n_a: usize, n_b: usize, corr: Vec<Vec<f64>>, marg_a: Vec<f64>, marg_b: Vec<f64>) -> Result<Self> {
        if n_a == 0 || n_b == 0 {
            return Err(Error::validation("correlator table needs at least one setting per side"));
        }
        if corr.len() != n_a || corr.iter().any(|r| r.len() != n_b) {
            return Err(Error::validation(format!("correlation table must be {n_a}×{n_b}")));
        }
        if marg_a.len() != n_a || marg_b.len() != n_b {
            return Err(Error::validation("marginal lists must match the setting counts"));
        }
        let in_range = |v: &f64| v.is_finite() && v.abs() <= 1.0 + 1e-12;
        if !corr.iter().flatten().all(in_range) || !marg_a.iter().all(in_range) || !marg_b.iter().all(in_range) {
            return Err(Error::validation("correlators and marginals must lie in [-1, 1]"));
        }
        Ok(Self {
            n_a,
            n_b,
            corr,
            marg_a,
            marg_b,
        })
    }

    /// From joint probabilities `p[x][y][a][b]`; Bob's measurements must be
    /// dichotomic and outcome 0 is read as +1.
    pub fn from_probabilities(p: &[Vec<Vec<Vec<f64>>>]) -> Result<Self> {
        let n_a = p.len();
        let n_b = p.first().map_or(0, Vec::len);
        if n_a == 0 || n_b == 0 || p.iter().any(|r| r.len() != n_b) {
            return Err(Error::validation("probability table must be complete"));
        }
        let mut corr = vec![vec![0.0; n_b]; n_a];
        let mut marg_a = vec![0.0; n_a];
        let mut marg_b = vec![0.0; n_b];
        for (x, row) in p.iter().enumerate() {
            for (y, block) in row.iter().enumerate() {
                if block.len() != 2 {
                    return Err(Error::validation(format!("Alice setting {x} has {} outcomes; need 2", block.len())));
                }
                if let Some(b) = block.iter().find(|b| b.len() != 2) {
                    return Err(Error::validation(format!(
                        "Bob setting {y} has {} outcomes; the determinant bound needs dichotomic measurements",
                        b.len()
                    )));
                }
                let total: f64 = block.iter().flatten().sum();
                if (total - 1.0).abs() > 1e-9 || block.iter().flatten().any(|&v| v < -1e-12) {
                    return Err(Error::validation(format!("P(·,·|{x},{y}) is not a distribution (sum {total})")));
                }
                let s = |a: usize| if a == 0 { 1.0 } else { -1.0 };
                for a in 0..2 {
                    for b in 0..2 {
                        corr[x][y] += s(a) * s(b) * block[a][b];
                    }
                }
                // Marginals from the first partner setting; no-signalling makes the choice irrelevant.
                if y == 0 {
                    marg_a[x] = block[0][0] + block[0][1] - block[1][0] - block[1][1];
                }
                if x == 0 {
                    marg_b[y] = block[0][0] + block[1][0] - block[0][1] - block[1][1];
                }
            }
        }
        Self::new(n_a, n_b, corr, marg_a, marg_b)
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn corr(&self, x: usize, y: usize) -> f64 {
        self.corr[x][y]
    }

    pub fn marg_a(&self, x: usize) -> f64 {
        self.marg_a[x]
    }

    pub fn marg_b(&self, y: usize) -> f64 {
        self.marg_b[y]
    }

    /// tr(B_y ρ_{a|x}) with B_0 = 1.
    fn bob_weight(&self, a: usize, x: usize, y: usize) -> f64 {
        let s = if a == 0 { 1.0 } else { -1.0 };
        if y == 0 {
            (1.0 + s * self.marg_a[x]) / 2.0
        } else {
            (self.marg_b[y - 1] + s * self.corr[x][y - 1]) / 2.0
        }
    }

    /// tr(B_y ρ_B) with B_0 = 1.
    fn bob_marginal(&self, y: usize) -> f64 {
        if y == 0 {
            1.0
        } else {
            self.marg_b[y - 1]
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DataMatrix {
    pub entries: Vec<Vec<f64>>,
    pub provenance: String,
}

impl DataMatrix {
    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn determinant(&self) -> Result<f64> {
        if self.entries.iter().any(|r| r.len() != self.entries.len()) {
            return Err(Error::NotSquare {
                rows: self.entries.len(),
                cols: self.entries.first().map_or(0, Vec::len),
            });
        }
        determinant_real(&self.entries)
    }
}

/// How the data matrix is built from a table.
#[derive(Clone, Debug)]
pub enum DataScenario {
    /// Three Pauli settings on each side, the cube Z-set and {1, σ}/√2.
    Cube3x2,
    Custom { zset: ZSet, basis: LocalBasis },
}

/// {1, σ_axes…}/√2.
pub fn pauli_basis(axes: &[usize]) -> Result<LocalBasis> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut ops = vec![Hermitian::identity(2).scale(s)];
    for &a in axes {
        if !(1..=3).contains(&a) {
            return Err(Error::validation(format!("Pauli axis {a} out of range 1..=3")));
        }
        ops.push(sigma(a).scale(s));
    }
    LocalBasis::new(ops)
}

pub fn data_matrix(t: &CorrelatorTable, scenario: &DataScenario) -> Result<DataMatrix> {
    match scenario {
        DataScenario::Cube3x2 => {
            if t.n_a != 3 || t.n_b != 3 {
                return Err(Error::validation(format!(
                    "cube3x2 needs 3 settings per side, table has nA={}, nB={}",
                    t.n_a, t.n_b
                )));
            }
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let r = 1.0 / 3f64.sqrt();
            let mut entries = vec![vec![0.0; 4]; 4];
            entries[0][0] = s;
            for y in 0..3 {
                entries[0][y + 1] = s * t.marg_b[y];
            }
            for x in 0..3 {
                entries[x + 1][0] = s * r * t.marg_a[x];
                for y in 0..3 {
                    entries[x + 1][y + 1] = s * r * t.corr[x][y];
                }
            }
            Ok(DataMatrix {
                entries,
                provenance: "cube Z-set; {1, σ1, σ2, σ3}/√2".into(),
            })
        }
        DataScenario::Custom { zset, basis } => custom_data_matrix(t, zset, basis),
    }
}

fn custom_data_matrix(t: &CorrelatorTable, zset: &ZSet, basis: &LocalBasis) -> Result<DataMatrix> {
    let space = zset.space();
    if space.m != 2 {
        return Err(Error::validation("correlator tables describe two-outcome settings; Z-set must have m = 2"));
    }
    if space.n != t.n_a {
        return Err(Error::DimensionMismatch {
            expected: t.n_a,
            found: space.n,
            context: "Z-set settings vs Alice settings",
        });
    }
    if basis.len() != t.n_b + 1 {
        return Err(Error::DimensionMismatch {
            expected: t.n_b + 1,
            found: basis.len(),
            context: "operator basis size vs nB+1",
        });
    }
    if basis.dim() != zset.dim_a() {
        return Err(Error::DimensionMismatch {
            expected: zset.dim_a(),
            found: basis.dim(),
            context: "operator basis dimension",
        });
    }
    let weights = spec_bob_weights(t, space);
    let size = t.n_b + 1;
    let entries = (0..size)
        .map(|k| {
            (0..size)
                .map(|y| {
                    zset.members()
                        .iter()
                        .zip(&weights)
                        .map(|(z, w)| basis.ops()[k].inner(z) * w[y])
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok(DataMatrix {
        entries,
        provenance: format!("custom Z-set (n={}, dA={}); {} basis operators", space.n, zset.dim_a(), basis.len()),
    })
}

/// tr(B_y ω^spec_i) for every index i, from the table alone.
fn spec_bob_weights(t: &CorrelatorTable, space: IndexSpace) -> Vec<Vec<f64>> {
    let size = t.n_b + 1;
    let mut w = vec![vec![0.0; size]; space.len()];
    for x in 0..space.n {
        let i = space.anchor_with(x, 0);
        if i != space.anchor() {
            for y in 0..size {
                w[i][y] += t.bob_weight(0, x, y);
            }
        }
    }
    let anchor = space.anchor();
    for y in 0..size {
        let sum: f64 = (0..space.n).map(|x| t.bob_weight(1, x, y)).sum();
        w[anchor][y] = sum - (space.n as f64 - 1.0) * t.bob_marginal(y);
    }
    w
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BoundRule {
    Eq13,
    Eq14,
}

impl BoundRule {
    pub fn name(self) -> &'static str {
        match self {
            Self::Eq13 => "Eq13",
            Self::Eq14 => "Eq14",
        }
    }
}

/// Largest |det D| compatible with non-steerable data.
pub fn det_bound(d_a: usize, d_b: usize, n_b: usize, identity_in_span: bool) -> (f64, BoundRule) {
    let (da, db, nb) = (d_a as f64, d_b as f64, n_b as f64);
    let root = (da * db).sqrt();
    // Numerator and denominator kept separate so rational cases round once.
    if identity_in_span && nb > root - 1.0 {
        let num = (root - 1.0).powi(n_b as i32);
        let den = nb.powi(n_b as i32) * da.powf((nb + 1.0) / 2.0);
        (num / den, BoundRule::Eq13)
    } else {
        (db.powf((nb + 1.0) / 2.0) / (nb + 1.0).powi(n_b as i32 + 1), BoundRule::Eq14)
    }
}

/// Lower bound on the trace norm of the correlation matrix implied by |det D|;
/// values above 1 certify steering.
pub fn ccnr_lower_bound(det_d: f64, d_a: usize, d_b: usize, n_b: usize, identity_in_span: bool) -> f64 {
    let (da, db, nb) = (d_a as f64, d_b as f64, n_b as f64);
    let abs = det_d.abs();
    let root = abs.powf(1.0 / (nb + 1.0));
    let plain = (nb + 1.0) / db.sqrt() * root;
    if !identity_in_span || root >= 1.0 / da.sqrt() {
        return plain;
    }
    let q = 1.0 / (da * db).sqrt();
    let refined = (q + nb * (da.sqrt() * db.powf(-nb / 2.0) * abs).powf(1.0 / nb)).min((nb + 1.0) * q);
    plain.max(refined)
}

#[derive(Clone, Debug, Serialize)]
pub struct DetBoundVerdict {
    #[serde(rename = "detD")]
    pub det_d: f64,
    pub bound: f64,
    pub bound_rule: &'static str,
    pub detected: bool,
    pub ccnr_lower: f64,
    pub detail: &'static str,
    #[serde(rename = "dA")]
    pub d_a: usize,
    #[serde(rename = "dB")]
    pub d_b: usize,
    #[serde(rename = "nB")]
    pub n_b: usize,
    pub identity_in_span: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

pub fn verdict(d: &DataMatrix, d_a: usize, d_b: usize, identity_in_span: bool) -> Result<DetBoundVerdict> {
    verdict_with(d, d_a, d_b, identity_in_span, &Tolerances::default())
}

pub fn verdict_with(
    d: &DataMatrix,
    d_a: usize,
    d_b: usize,
    identity_in_span: bool,
    tol: &Tolerances,
) -> Result<DetBoundVerdict> {
    if d_a < 2 || d_b < 2 {
        return Err(Error::validation("dA and dB must be at least 2"));
    }
    if d.size() < 2 {
        return Err(Error::validation("data matrix needs at least one Bob setting"));
    }
    let det_d = d.determinant()?;
    let n_b = d.size() - 1;
    let (bound, rule) = det_bound(d_a, d_b, n_b, identity_in_span);
    let abs = det_d.abs();
    let detected = abs > bound + 1e-12;
    let detail = if abs == 0.0 {
        detail::NOT_INDEPENDENT
    } else if (abs - bound).abs() < tol.near_boundary {
        detail::NEAR_BOUNDARY
    } else if detected {
        detail::DETECTED
    } else {
        detail::NOT_DETECTED
    };
    let row_norms: f64 = d
        .entries
        .iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .product();
    let warning = (abs != 0.0 && abs < CONDITIONING_WARNING * row_norms).then(|| {
        format!("data matrix is nearly singular (|det D| / Π‖row‖ = {:.2e}); independence of B_y is weakly supported", abs / row_norms)
    });
    Ok(DetBoundVerdict {
        det_d,
        bound,
        bound_rule: rule.name(),
        detected,
        ccnr_lower: ccnr_lower_bound(det_d, d_a, d_b, n_b, identity_in_span),
        detail,
        d_a,
        d_b,
        n_b,
        identity_in_span,
        warning,
    })
}

/// Data matrix of the cube scenario from the table, with the default basis.
pub fn cube_verdict(t: &CorrelatorTable) -> Result<DetBoundVerdict> {
    verdict(&data_matrix(t, &DataScenario::Cube3x2)?, 2, 2, true)
}

/// Cube scenario expressed through the general construction.
pub fn cube_custom() -> DataScenario {
    DataScenario::Custom {
        zset: cube_zset(),
        basis: pauli_basis(&[1, 2, 3]).expect("static basis"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diagonal(p: f64) -> CorrelatorTable {
        let corr = (0..3).map(|x| (0..3).map(|y| if x == y { -p } else { 0.0 }).collect()).collect();
        CorrelatorTable::new(3, 3, corr, vec![0.0; 3], vec![0.0; 3]).unwrap()
    }

    #[test]
    fn vienna_diagonal_matrix() {
        let d = data_matrix(&diagonal(1.0), &DataScenario::Cube3x2).unwrap();
        let s6 = 1.0 / 6f64.sqrt();
        for k in 0..4 {
            for y in 0..4 {
                let want = match (k, y) {
                    (0, 0) => std::f64::consts::FRAC_1_SQRT_2,
                    (a, b) if a == b => -s6,
                    _ => 0.0,
                };
                assert!((d.entries[k][y] - want).abs() < 1e-15);
            }
        }
        let zero = data_matrix(&diagonal(0.0), &DataScenario::Cube3x2).unwrap();
        assert_eq!(zero.determinant().unwrap(), 0.0);
        let det = data_matrix(&diagonal(0.9), &DataScenario::Cube3x2).unwrap().determinant().unwrap();
        assert!((det.abs() - 0.9f64.powi(3) / (12.0 * 3f64.sqrt())).abs() < 1e-15);
        assert!((det.abs() - 0.035074).abs() < 1e-6);
    }

    #[test]
    fn bounds() {
        let (b, r) = det_bound(2, 2, 3, true);
        assert_eq!(r, BoundRule::Eq13);
        assert_eq!(b, 1.0 / 108.0);
        assert_eq!(b * 108.0, 1.0);
        let (b, r) = det_bound(2, 2, 3, false);
        assert_eq!(r, BoundRule::Eq14);
        assert_eq!(b, 1.0 / 64.0);
        let (b, r) = det_bound(2, 2, 2, true);
        assert_eq!(r, BoundRule::Eq13);
        assert!((b - 1.0 / (8.0 * 2f64.sqrt())).abs() < 1e-16);
    }

    #[test]
    fn ccnr_lower_examples() {
        assert!(ccnr_lower_bound(0.0, 2, 2, 3, true) <= 1.0);
        assert!((ccnr_lower_bound(1.0 / 108.0, 2, 2, 3, true) - 1.0).abs() < 1e-12);
        assert!(ccnr_lower_bound(1.0 / (12.0 * 3f64.sqrt()), 2, 2, 3, true) > 1.0);
    }

    #[test]
    fn verdict_examples() {
        let v = cube_verdict(&diagonal(1.0)).unwrap();
        assert!(v.detected);
        assert_eq!(v.bound_rule, "Eq13");
        let v = cube_verdict(&diagonal(0.5)).unwrap();
        assert!(!v.detected);
        assert!((v.det_d.abs() - 0.006014).abs() < 1e-6);
        let v = cube_verdict(&diagonal(0.0)).unwrap();
        assert!(!v.detected);
        assert_eq!(v.detail, detail::NOT_INDEPENDENT);
    }

    #[test]
    fn custom_route_reproduces_cube_matrix() {
        let corr = vec![vec![-0.6, 0.1, 0.05], vec![0.02, -0.55, 0.0], vec![0.1, 0.0, -0.5]];
        let t = CorrelatorTable::new(3, 3, corr, vec![0.1, -0.2, 0.05], vec![0.0, 0.1, -0.1]).unwrap();
        let a = data_matrix(&t, &DataScenario::Cube3x2).unwrap();
        let b = data_matrix(&t, &cube_custom()).unwrap();
        for (ra, rb) in a.entries.iter().zip(&b.entries) {
            for (x, y) in ra.iter().zip(rb) {
                assert!((x - y).abs() < 1e-14, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn table_validation() {
        assert!(CorrelatorTable::new(3, 3, vec![vec![0.0; 3]; 2], vec![0.0; 3], vec![0.0; 3]).is_err());
        assert!(CorrelatorTable::new(1, 1, vec![vec![1.5]], vec![0.0], vec![0.0]).is_err());
        let json = r#"{"nA":1,"nB":1,"corr":[[0.5]],"margA":[0.0],"margB":[2.0]}"#;
        assert!(serde_json::from_str::<CorrelatorTable>(json).is_err());
        let three = vec![vec![vec![vec![1.0 / 6.0; 3]; 2]]];
        assert!(CorrelatorTable::from_probabilities(&three).is_err());
        let p = vec![vec![vec![vec![0.1, 0.4], vec![0.4, 0.1]]]];
        let t = CorrelatorTable::from_probabilities(&p).unwrap();
        assert!((t.corr(0, 0) + 0.6).abs() < 1e-15);
        assert!(t.marg_a(0).abs() < 1e-15);
    }
}
