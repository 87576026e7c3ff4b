//! Steering maps: sets of PSD operators Z_{i_1…i_n} that turn an ensemble
//! into the bipartite operator Σ_AB = Σ_i Z_i ⊗ ω^spec_i.
//!
//! Σ_AB is independent of the chosen hidden-state solution exactly when
//!
//! ```text
//! Z_i = Σ_x Z_{(j…i_x…j)} − (n−1) Z_{(j…j)}
//! ```
//!
//! holds. Checking it against the anchor j = (m−1,…,m−1) is sufficient.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ensemble::{special_solution, Check, Diagnostics, Ensemble, HiddenStateModel, IndexSpace};
use crate::error::{Error, Result};
use crate::linalg::pauli::sigma;
use crate::linalg::{min_eigenvalue, CMatrix, Hermitian, Tolerances, ONE, ZERO};

#[derive(Clone, Debug, PartialEq)]
pub struct ZSet {
    space: IndexSpace,
    dim_a: usize,
    zs: Vec<Hermitian>,
}

impl ZSet {
    /// `zs` is indexed by the flattened outcome tuple of `space`.
    pub fn new(space: IndexSpace, zs: Vec<Hermitian>) -> Result<Self> {
        if zs.len() != space.len() {
            return Err(Error::MissingIndex(format!(
                "Z-set has {} members, expected m^n = {}",
                zs.len(),
                space.len()
            )));
        }
        let dim_a = zs[0].dim();
        if let Some(bad) = zs.iter().find(|z| z.dim() != dim_a) {
            return Err(Error::DimensionMismatch {
                expected: dim_a,
                found: bad.dim(),
                context: "Z-set member",
            });
        }
        Ok(Self { space, dim_a, zs })
    }

    pub fn space(&self) -> IndexSpace {
        self.space
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn members(&self) -> &[Hermitian] {
        &self.zs
    }

    pub fn get(&self, tuple: &[usize]) -> &Hermitian {
        &self.zs[self.space.flatten(tuple)]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            space: self.space,
            dim_a: self.dim_a,
            zs: self.zs.iter().map(|z| z.scale(s)).collect(),
        }
    }

    /// Adds `s·1` to every member (preserves the linear relations).
    pub fn shifted_by_identity(&self, s: f64) -> Self {
        let id = Hermitian::identity(self.dim_a);
        Self {
            space: self.space,
            dim_a: self.dim_a,
            zs: self.zs.iter().map(|z| z.add_scaled(&id, s)).collect(),
        }
    }

    pub fn map_members(&self, f: impl Fn(usize, &Hermitian) -> Hermitian) -> Self {
        Self {
            space: self.space,
            dim_a: self.dim_a,
            zs: self.zs.iter().enumerate().map(|(i, z)| f(i, z)).collect(),
        }
    }

    /// Σ_x Z_{anchor with i_x at slot x} − (n−1) Z_anchor, i.e. the value the
    /// relation predicts for member `index`.
    pub fn predicted(&self, index: usize) -> Hermitian {
        let s = self.space;
        let mut out = self.zs[s.anchor()].scale(-((s.n - 1) as f64));
        for x in 0..s.n {
            out = out.add(&self.zs[s.anchor_with(x, s.digit(index, x))]);
        }
        out
    }

    /// Worst max-norm residual of the linear relations.
    pub fn relation_residual(&self) -> f64 {
        (0..self.space.len())
            .map(|i| self.zs[i].max_abs_diff(&self.predicted(i)))
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.zs.iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    /// Recomputes every member from the anchor-adjacent ones, making the
    /// relations hold exactly.
    pub fn completed_from_anchor(&self) -> Self {
        self.map_members(|i, _| self.predicted(i))
    }
}

pub fn validate_zset(z: &ZSet) -> Diagnostics {
    validate_zset_with(z, &Tolerances::default())
}

pub fn validate_zset_with(z: &ZSet, tol: &Tolerances) -> Diagnostics {
    let mut diag = Diagnostics::default();
    let (mut worst, mut at) = (f64::INFINITY, 0);
    for (i, m) in z.members().iter().enumerate() {
        let l = min_eigenvalue(m);
        if l < worst {
            worst = l;
            at = i;
        }
    }
    diag.push(Check {
        name: "positivity".into(),
        passed: worst >= -tol.psd,
        value: worst,
        detail: format!("minimum eigenvalue {worst:.6e} at Z_{{{}}}", z.space().label(at)),
    });
    let (mut res, mut res_at) = (0.0, 0);
    for i in 0..z.space().len() {
        let r = z.members()[i].max_abs_diff(&z.predicted(i));
        if r > res {
            res = r;
            res_at = i;
        }
    }
    diag.push(Check {
        name: "linear_relations".into(),
        passed: res <= tol.zset_relation,
        value: res,
        detail: format!("worst relation residual {res:.6e} at Z_{{{}}}", z.space().label(res_at)),
    });
    diag
}

#[derive(Clone, Debug, Serialize)]
pub struct SigmaOperator {
    pub dim_a: usize,
    pub dim_b: usize,
    pub matrix: Hermitian,
    pub trace: f64,
}

impl SigmaOperator {
    fn from_matrix(dim_a: usize, dim_b: usize, matrix: Hermitian) -> Self {
        let trace = matrix.trace_re();
        Self {
            dim_a,
            dim_b,
            matrix,
            trace,
        }
    }
}

/// Σ_AB = Σ_i Z_i ⊗ ω^spec_i, after checking the Z-set.
pub fn build_sigma(z: &ZSet, e: &Ensemble) -> Result<SigmaOperator> {
    build_sigma_with(z, e, &Tolerances::default())
}

pub fn build_sigma_with(z: &ZSet, e: &Ensemble, tol: &Tolerances) -> Result<SigmaOperator> {
    check_compatible(z, e)?;
    validate_zset_with(z, tol).into_result("Z-set")?;
    Ok(sigma_from_model(z, &special_solution(e)))
}

/// Σ_i Z_i ⊗ ω_i for an arbitrary hidden-state solution; no validation.
pub fn sigma_from_model(z: &ZSet, model: &HiddenStateModel) -> SigmaOperator {
    let d = model.params().d;
    let mut acc = Hermitian::zeros(z.dim_a() * d);
    for (zi, wi) in z.members().iter().zip(model.omegas()) {
        if wi.max_abs() == 0.0 {
            continue;
        }
        acc = acc.add(&zi.kron(wi));
    }
    SigmaOperator::from_matrix(z.dim_a(), d, acc)
}

pub fn sigma_trace(s: &SigmaOperator) -> f64 {
    s.trace
}

pub(crate) fn check_compatible(z: &ZSet, e: &Ensemble) -> Result<()> {
    let p = e.params();
    if z.space() != p.index_space() {
        return Err(Error::ParamMismatch(format!(
            "Z-set is for n={}, m={} but the ensemble has n={}, m={}",
            z.space().n,
            z.space().m,
            p.n,
            p.m
        )));
    }
    Ok(())
}

/// Eight qubit projectors with Bloch vectors (±1,±1,±1)/√3; outcome 0 ↔ +1.
pub fn cube_zset() -> ZSet {
    pauli_sign_zset(&[1, 2, 3]).expect("static construction")
}

/// Qubit projectors ½[1 + Σ_x s_x σ_{axes[x]}/√n] over all sign patterns,
/// one dichotomic setting per axis; outcome 0 ↔ s_x = +1.
pub fn pauli_sign_zset(axes: &[usize]) -> Result<ZSet> {
    if axes.is_empty() || axes.iter().any(|&a| !(1..=3).contains(&a)) {
        return Err(Error::validation("Pauli axes must be a non-empty list from 1..=3"));
    }
    let mut sorted = axes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != axes.len() {
        return Err(Error::validation("Pauli axes must be distinct"));
    }
    let space = IndexSpace::new(axes.len(), 2)?;
    let r = 1.0 / (axes.len() as f64).sqrt();
    let zs = (0..space.len())
        .map(|idx| {
            let mut z = sigma(0);
            for (x, &o) in space.unflatten(idx).iter().enumerate() {
                let sign = if o == 0 { 1.0 } else { -1.0 };
                z = z.add_scaled(&sigma(axes[x]), sign * r);
            }
            z.scale(0.5)
        })
        .collect();
    ZSet::new(space, zs)
}

/// Fourier-connected mutually unbiased bases in dimension d and the
/// associated Z-set for two settings with d outcomes each.
#[derive(Clone, Debug)]
pub struct MubConstruction {
    pub d: usize,
    /// Column k is |ψ_k⟩ = F|φ_k⟩.
    pub fourier: CMatrix,
    pub chi_plus: Vec<Complex64>,
    pub chi_minus: Vec<Complex64>,
    pub mu1: f64,
    pub mu2: f64,
}

impl MubConstruction {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::validation(format!("MUB construction needs d >= 2, got {d}")));
        }
        let fourier = CMatrix::from_fn(d, d, |l, k| root_of_unity(d, k * l) / (d as f64).sqrt());
        let phi0 = basis_vector(d, 0);
        let psi0 = fourier.column(0);
        let normalize = |v: Vec<Complex64>| {
            let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.into_iter().map(|z| z / n).collect::<Vec<_>>()
        };
        let chi_plus = normalize(phi0.iter().zip(&psi0).map(|(a, b)| a + b).collect());
        let chi_minus = normalize(phi0.iter().zip(&psi0).map(|(a, b)| a - b).collect());
        let (mu1, mu2) = mub_weights(d);
        Ok(Self {
            d,
            fourier,
            chi_plus,
            chi_minus,
            mu1,
            mu2,
        })
    }

    /// q = e^{2πi/d}
    pub fn q(&self) -> Complex64 {
        root_of_unity(self.d, 1)
    }

    /// U_x|φ_k⟩ = |φ_{k+x}⟩
    pub fn shift(&self, x: usize) -> CMatrix {
        let d = self.d;
        CMatrix::from_fn(d, d, |i, k| if i == (k + x) % d { ONE } else { ZERO })
    }

    /// V_y|φ_k⟩ = q^{yk}|φ_k⟩
    pub fn phase(&self, y: usize) -> CMatrix {
        let d = self.d;
        CMatrix::from_fn(d, d, |i, k| if i == k { root_of_unity(d, y * k) } else { ZERO })
    }

    pub fn phi(&self, k: usize) -> Vec<Complex64> {
        basis_vector(self.d, k % self.d)
    }

    pub fn psi(&self, k: usize) -> Vec<Complex64> {
        self.fourier.column(k % self.d)
    }

    /// μ1|χ−⟩⟨χ−| + μ2(1 − |χ+⟩⟨χ+| − |χ−⟩⟨χ−|)
    pub fn z00(&self) -> Hermitian {
        let pm = Hermitian::projector(&self.chi_minus);
        let pp = Hermitian::projector(&self.chi_plus);
        let complement = Hermitian::identity(self.d).sub(&pp).sub(&pm);
        pm.scale(self.mu1).add_scaled(&complement, self.mu2)
    }

    /// Z_{kl} = U_k V_l Z_00 V_l† U_k†
    pub fn z(&self, k: usize, l: usize) -> Hermitian {
        let u = &self.shift(k) * &self.phase(l);
        self.z00().conjugate_by(&u)
    }

    /// Coefficients (c1, c2) with Z_00 = c1(|φ_0⟩⟨φ_0| + |ψ_0⟩⟨ψ_0|) + c2·1.
    pub fn projector_coefficients(&self) -> (f64, f64) {
        let sd = (self.d as f64).sqrt();
        let np = 2.0 + 2.0 / sd;
        let nm = 2.0 - 2.0 / sd;
        let c1 = (self.mu1 - self.mu2) / nm - self.mu2 / np;
        (c1, self.mu2)
    }

    pub fn zset(&self) -> ZSet {
        let space = IndexSpace { n: 2, m: self.d };
        let zs = (0..space.len())
            .map(|idx| self.z(idx / self.d, idx % self.d))
            .collect();
        ZSet::new(space, zs).expect("static construction")
    }
}

/// (μ1, μ2) = (2, 1+√d) / [√d(√d−1)(√d+2)]
pub fn mub_weights(d: usize) -> (f64, f64) {
    let s = (d as f64).sqrt();
    let den = s * (s - 1.0) * (s + 2.0);
    (2.0 / den, (1.0 + s) / den)
}

pub fn mub_zset(d: usize) -> Result<ZSet> {
    Ok(MubConstruction::new(d)?.zset())
}

/// Built-in sets by name: `cube`, `square` (σ_1, σ_3) or `mub:<d>`.
pub fn named_zset(name: &str) -> Result<ZSet> {
    let name = name.trim();
    match name {
        "cube" => return Ok(cube_zset()),
        "square" => return pauli_sign_zset(&[1, 3]),
        _ => {}
    }
    if let Some(d) = name.strip_prefix("mub:") {
        let d: usize = d
            .parse()
            .map_err(|_| Error::validation(format!("bad MUB dimension in `{name}`")))?;
        return mub_zset(d);
    }
    Err(Error::validation(format!("unknown Z-set `{name}` (expected `cube`, `square` or `mub:<d>`)")))
}

fn root_of_unity(d: usize, power: usize) -> Complex64 {
    let angle = 2.0 * PI * ((power % d) as f64) / d as f64;
    Complex64::from_polar(1.0, angle)
}

fn basis_vector(d: usize, k: usize) -> Vec<Complex64> {
    let mut v = vec![ZERO; d];
    v[k] = ONE;
    v
}

#[derive(Serialize, Deserialize)]
struct RawZSet {
    n: usize,
    m: usize,
    #[serde(rename = "dA")]
    dim_a: usize,
    zs: BTreeMap<String, Hermitian>,
}

impl Serialize for ZSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let zs = (0..self.space.len())
            .map(|i| (self.space.label(i), self.zs[i].clone()))
            .collect();
        RawZSet {
            n: self.space.n,
            m: self.space.m,
            dim_a: self.dim_a,
            zs,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ZSet {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawZSet::deserialize(de)?;
        let space = IndexSpace::new(raw.n, raw.m).map_err(D::Error::custom)?;
        let mut slots: Vec<Option<Hermitian>> = vec![None; space.len()];
        for (label, z) in raw.zs {
            let idx = space.parse_label(&label).map_err(D::Error::custom)?;
            if z.dim() != raw.dim_a {
                return Err(D::Error::custom(format!("Z_{{{label}}} has dimension {}, expected dA={}", z.dim(), raw.dim_a)));
            }
            slots[idx] = Some(z);
        }
        let zs = slots
            .into_iter()
            .enumerate()
            .map(|(i, z)| z.ok_or_else(|| D::Error::custom(format!("missing Z_{{{}}}", space.label(i)))))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        ZSet::new(space, zs).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigenvalues;

    #[test]
    fn cube_members() {
        let z = cube_zset();
        let r = 1.0 / 3f64.sqrt();
        let want = sigma(0)
            .add_scaled(&sigma(1), r)
            .add_scaled(&sigma(2), r)
            .add_scaled(&sigma(3), r)
            .scale(0.5);
        assert!(z.get(&[0, 0, 0]).max_abs_diff(&want) < 1e-15);
        let ev = eigenvalues(z.get(&[0, 0, 0]));
        assert!((ev[0] - 1.0).abs() < 1e-14 && ev[1].abs() < 1e-14);
        let mut total = Hermitian::zeros(2);
        for m in z.members() {
            assert!((m.trace_re() - 1.0).abs() < 1e-15);
            total = total.add(m);
        }
        assert!(total.max_abs_diff(&Hermitian::identity(2).scale(4.0)) < 1e-14);
        assert!(validate_zset(&z).is_valid());
    }

    #[test]
    fn perturbed_cube_reports_residual() {
        let z = cube_zset();
        let bumped = z.map_members(|i, m| {
            if i == 0 {
                m.add_scaled(&Hermitian::identity(2), 0.1)
            } else {
                m.clone()
            }
        });
        let diag = validate_zset(&bumped);
        let rel = diag.get("linear_relations").unwrap();
        assert!(!rel.passed);
        assert!((rel.value - 0.1).abs() < 1e-14);
    }

    #[test]
    fn mub_weights_at_small_d() {
        let (m1, m2) = mub_weights(4);
        assert_eq!((m1, m2), (0.25, 0.375));
        let (m1, m2) = mub_weights(2);
        assert!((m1 - 1.0).abs() < 1e-15);
        assert!((m2 - (1.0 + 2f64.sqrt()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn mub_d2_anchor_member_is_chi_minus_projector() {
        let mc = MubConstruction::new(2).unwrap();
        let want = Hermitian::projector(&mc.chi_minus);
        assert!(mc.z00().max_abs_diff(&want) < 1e-14);
    }

    #[test]
    fn mub_shift_and_phase_rules() {
        for d in 2..=5 {
            let mc = MubConstruction::new(d).unwrap();
            let q = mc.q();
            for x in 0..d {
                let u = mc.shift(x);
                let v = mc.phase(x);
                for k in 0..d {
                    let diff = |a: Vec<Complex64>, b: Vec<Complex64>| {
                        a.iter().zip(&b).map(|(p, r)| (p - r).norm()).fold(0.0, f64::max)
                    };
                    assert!(diff(u.mat_vec(&mc.phi(k)), mc.phi(k + x)) < 1e-12);
                    let qxk = q.powu(((d - (x * k) % d) % d) as u32);
                    assert!(diff(u.mat_vec(&mc.psi(k)), mc.psi(k).iter().map(|z| z * qxk).collect()) < 1e-12);
                    let qyk = q.powu(((x * k) % d) as u32);
                    assert!(diff(v.mat_vec(&mc.phi(k)), mc.phi(k).iter().map(|z| z * qyk).collect()) < 1e-12);
                    assert!(diff(v.mat_vec(&mc.psi(k)), mc.psi(k + x)) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mub_members_have_projector_form() {
        for d in 2..=5 {
            let mc = MubConstruction::new(d).unwrap();
            let (c1, c2) = mc.projector_coefficients();
            for k in 0..d {
                for l in 0..d {
                    let want = Hermitian::projector(&mc.phi(k))
                        .add(&Hermitian::projector(&mc.psi(l)))
                        .scale(c1)
                        .add_scaled(&Hermitian::identity(d), c2);
                    assert!(mc.z(k, l).max_abs_diff(&want) < 1e-12, "d={d} k={k} l={l}");
                }
            }
        }
    }

    #[test]
    fn named_sets() {
        assert_eq!(named_zset("cube").unwrap().space(), IndexSpace { n: 3, m: 2 });
        assert_eq!(named_zset("mub:3").unwrap().space(), IndexSpace { n: 2, m: 3 });
        assert!(named_zset("mub:1").is_err());
        assert!(named_zset("tetra").is_err());
    }

    #[test]
    fn zset_json_round_trip_and_missing_member() {
        let z = cube_zset();
        let v = serde_json::to_value(&z).unwrap();
        assert_eq!(v["dA"], 2);
        assert!(v["zs"].get("2,2,2").is_some());
        let back: ZSet = serde_json::from_value(v.clone()).unwrap();
        assert!(back.members().iter().zip(z.members()).all(|(a, b)| a.max_abs_diff(b) < 1e-15));
        let mut v = v;
        v["zs"].as_object_mut().unwrap().remove("1,1,1");
        let err = serde_json::from_value::<ZSet>(v).unwrap_err().to_string();
        assert!(err.contains("missing Z_{1,1,1}"), "{err}");
    }
}
