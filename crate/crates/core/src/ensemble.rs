//! Steering ensembles {ρ_{a|x}}, their assembly from a bipartite state and
//! Alice's POVMs, and the affine solution set of the hidden-state equations
//!
//! ```text
//! ρ_{a|x} = Σ_{i_1…i_n} δ_{i_x,a} ω_{i_1…i_n}.
//! ```
//!
//! Settings `x` and outcomes `a` are 0-based in the API; the last outcome
//! `m-1` is the anchor used by the special solution. JSON files use 1-based
//! labels (`"a|x"`).

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, min_eigenvalue, partial_trace_a, CMatrix, Hermitian, Tolerances};

/// Alice's settings count `n` and outcomes per setting `m`, with the
/// base-`m` flattening of outcome tuples (i_1…i_n), first slot most significant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSpace {
    pub n: usize,
    pub m: usize,
}

impl IndexSpace {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n < 1 || m < 2 {
            return Err(Error::validation(format!(
                "need n >= 1 settings and m >= 2 outcomes, got n={n}, m={m}"
            )));
        }
        if (m as f64).powi(n as i32) > 1e6 {
            return Err(Error::validation(format!("m^n = {m}^{n} is too large")));
        }
        Ok(Self { n, m })
    }

    /// m^n
    pub fn len(&self) -> usize {
        self.m.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn anchor_outcome(&self) -> usize {
        self.m - 1
    }

    pub fn flatten(&self, tuple: &[usize]) -> usize {
        debug_assert_eq!(tuple.len(), self.n);
        tuple.iter().fold(0, |acc, &i| {
            debug_assert!(i < self.m);
            acc * self.m + i
        })
    }

    pub fn unflatten(&self, mut index: usize) -> Vec<usize> {
        let mut tuple = vec![0; self.n];
        for slot in (0..self.n).rev() {
            tuple[slot] = index % self.m;
            index /= self.m;
        }
        tuple
    }

    /// Outcome of setting `x` in the flattened tuple `index`.
    pub fn digit(&self, index: usize, x: usize) -> usize {
        (index / self.m.pow((self.n - 1 - x) as u32)) % self.m
    }

    /// Flattened index of (m-1, …, m-1).
    pub fn anchor(&self) -> usize {
        self.len() - 1
    }

    /// Anchor tuple with outcome `a` at slot `x`.
    pub fn anchor_with(&self, x: usize, a: usize) -> usize {
        let mut t = vec![self.anchor_outcome(); self.n];
        t[x] = a;
        self.flatten(&t)
    }

    /// Human-readable 1-based label, e.g. "1,2,2".
    pub fn label(&self, index: usize) -> String {
        self.unflatten(index)
            .iter()
            .map(|i| (i + 1).to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn parse_label(&self, label: &str) -> Result<usize> {
        let parts: Vec<&str> = label.split(',').map(str::trim).collect();
        if parts.len() != self.n {
            return Err(Error::validation(format!(
                "index label `{label}` must have {} comma-separated entries",
                self.n
            )));
        }
        let mut tuple = Vec::with_capacity(self.n);
        for p in parts {
            let v: usize = p
                .parse()
                .map_err(|_| Error::validation(format!("bad index label `{label}`")))?;
            if v < 1 || v > self.m {
                return Err(Error::validation(format!("index label `{label}` out of range 1..={}", self.m)));
            }
            tuple.push(v - 1);
        }
        Ok(self.flatten(&tuple))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub n: usize,
    pub m: usize,
    pub d: usize,
}

impl ScenarioParams {
    pub fn new(n: usize, m: usize, d: usize) -> Result<Self> {
        IndexSpace::new(n, m)?;
        if d < 2 {
            return Err(Error::validation(format!("Bob's dimension must be >= 2, got {d}")));
        }
        Ok(Self { n, m, d })
    }

    pub fn index_space(&self) -> IndexSpace {
        IndexSpace { n: self.n, m: self.m }
    }
}

#[derive(Clone, Debug)]
pub struct Povm {
    elements: Vec<Hermitian>,
}

impl Povm {
    pub fn new(elements: Vec<Hermitian>) -> Result<Self> {
        Self::with_tolerance(elements, 1e-10)
    }

    pub fn with_tolerance(elements: Vec<Hermitian>, tol: f64) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::validation("POVM needs at least one element"))?;
        let dim = first.dim();
        let mut sum = Hermitian::zeros(dim);
        for (k, e) in elements.iter().enumerate() {
            if e.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: e.dim(),
                    context: "POVM element",
                });
            }
            let lmin = min_eigenvalue(e);
            if lmin < -tol {
                return Err(Error::validation(format!(
                    "POVM element {k} is not PSD (min eigenvalue {lmin:.3e})"
                )));
            }
            sum = sum.add(e);
        }
        let dev = sum.max_abs_diff(&CMatrix::identity(dim));
        if dev > tol {
            return Err(Error::validation(format!(
                "POVM elements do not sum to identity (deviation {dev:.3e})"
            )));
        }
        Ok(Self { elements })
    }

    /// Projective measurement onto the columns of a unitary.
    pub fn from_basis(u: &CMatrix) -> Result<Self> {
        let elements = (0..u.cols()).map(|j| Hermitian::projector(&u.column(j))).collect();
        Self::new(elements)
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn outcomes(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[Hermitian] {
        &self.elements
    }
}

impl Serialize for Povm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Raw<'a> {
            dim: usize,
            elements: &'a [Hermitian],
        }
        Raw {
            dim: self.dim(),
            elements: &self.elements,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Povm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            dim: usize,
            elements: Vec<Hermitian>,
        }
        let raw = Raw::deserialize(d)?;
        let povm = Povm::new(raw.elements).map_err(serde::de::Error::custom)?;
        if povm.dim() != raw.dim {
            return Err(serde::de::Error::custom("POVM dim does not match its elements"));
        }
        Ok(povm)
    }
}

/// Conditional states ρ_{a|x}, stored setting-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    params: ScenarioParams,
    states: Vec<Hermitian>,
}

impl Ensemble {
    /// `states[x][a]` is ρ_{a|x}. Only shapes are checked here; see [`Ensemble::validate`].
    pub fn new(states: Vec<Vec<Hermitian>>) -> Result<Self> {
        let n = states.len();
        let m = states.first().map_or(0, Vec::len);
        let d = states.first().and_then(|s| s.first()).map_or(0, Hermitian::dim);
        let params = ScenarioParams::new(n, m, d)?;
        for (x, row) in states.iter().enumerate() {
            if row.len() != m {
                return Err(Error::validation(format!(
                    "setting {} has {} outcomes, expected {m}",
                    x + 1,
                    row.len()
                )));
            }
            if let Some(bad) = row.iter().find(|s| s.dim() != d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: bad.dim(),
                    context: "conditional state",
                });
            }
        }
        Ok(Self {
            params,
            states: states.into_iter().flatten().collect(),
        })
    }

    pub fn params(&self) -> ScenarioParams {
        self.params
    }

    pub fn state(&self, a: usize, x: usize) -> &Hermitian {
        &self.states[x * self.params.m + a]
    }

    pub fn setting(&self, x: usize) -> &[Hermitian] {
        let m = self.params.m;
        &self.states[x * m..(x + 1) * m]
    }

    pub fn probability(&self, a: usize, x: usize) -> f64 {
        self.state(a, x).trace_re()
    }

    /// Σ_a ρ_{a|x}
    pub fn marginal(&self, x: usize) -> Hermitian {
        self.setting(x)
            .iter()
            .fold(Hermitian::zeros(self.params.d), |acc, s| acc.add(s))
    }

    /// Bob's reduced state, averaged over settings.
    pub fn reduced_state(&self) -> Hermitian {
        let n = self.params.n;
        (0..n)
            .fold(Hermitian::zeros(self.params.d), |acc, x| acc.add(&self.marginal(x)))
            .scale(1.0 / n as f64)
    }

    /// ρ_{a|x} ↦ f(ρ_{a|x}) for every state.
    pub fn map_states(&self, f: impl Fn(&Hermitian) -> Hermitian) -> Result<Self> {
        let (n, m) = (self.params.n, self.params.m);
        Self::new(
            (0..n)
                .map(|x| (0..m).map(|a| f(self.state(a, x))).collect())
                .collect(),
        )
    }

    /// Replaces ρ_{a|x} with tr(ρ_{a|x})·1/d.
    pub fn depolarized(&self) -> Self {
        let d = self.params.d;
        self.map_states(|s| Hermitian::identity(d).scale(s.trace_re() / d as f64))
            .expect("same shape")
    }

    pub fn validate(&self) -> Diagnostics {
        self.validate_with(&Tolerances::default())
    }

    pub fn validate_with(&self, tol: &Tolerances) -> Diagnostics {
        let (n, m) = (self.params.n, self.params.m);
        let mut diag = Diagnostics::default();

        let mut worst = f64::INFINITY;
        let mut worst_at = String::new();
        for x in 0..n {
            for a in 0..m {
                let lmin = min_eigenvalue(self.state(a, x));
                if lmin < worst {
                    worst = lmin;
                    worst_at = format!("rho_{{{}|{}}}", a + 1, x + 1);
                }
            }
        }
        diag.push(Check {
            name: "positivity".into(),
            passed: worst >= -tol.psd,
            value: worst,
            detail: format!("minimum eigenvalue {worst:.6e} at {worst_at}"),
        });

        let rho = self.reduced_state();
        let mut dev: f64 = 0.0;
        let mut dev_at = 0;
        for x in 0..n {
            let e = self.marginal(x).max_abs_diff(&rho);
            if e > dev {
                dev = e;
                dev_at = x;
            }
        }
        diag.push(Check {
            name: "no_signalling".into(),
            passed: dev <= tol.no_signalling,
            value: dev,
            detail: format!("max deviation of sum_a rho_{{a|x}} from rho: {dev:.6e} (setting {})", dev_at + 1),
        });

        let tr = rho.trace_re();
        diag.push(Check {
            name: "normalization".into(),
            passed: (tr - 1.0).abs() <= tol.trace,
            value: tr,
            detail: format!("tr rho = {tr:.12}"),
        });
        diag
    }

    /// Errors with the first failed check.
    pub fn ensure_valid(&self, tol: &Tolerances) -> Result<()> {
        self.validate_with(tol).into_result("ensemble")
    }
}

/// ρ_{a|x} = tr_A[(M_{a|x} ⊗ 1) ρ_AB] for each of Alice's POVMs.
pub fn assemble(state: &Hermitian, dim_a: usize, alice_povms: &[Povm]) -> Result<Ensemble> {
    if alice_povms.is_empty() {
        return Err(Error::validation("at least one POVM is required"));
    }
    if dim_a == 0 || !state.dim().is_multiple_of(dim_a) {
        return Err(Error::DimensionMismatch {
            expected: dim_a,
            found: state.dim(),
            context: "state dimension is not a multiple of Alice's dimension",
        });
    }
    let dim_b = state.dim() / dim_a;
    let lmin = min_eigenvalue(state);
    if lmin < -1e-10 {
        return Err(Error::validation(format!("state is not PSD (min eigenvalue {lmin:.3e})")));
    }
    if (state.trace_re() - 1.0).abs() > 1e-9 {
        return Err(Error::validation(format!("state trace {} != 1", state.trace_re())));
    }
    let mut states = Vec::with_capacity(alice_povms.len());
    for povm in alice_povms {
        if povm.dim() != dim_a {
            return Err(Error::DimensionMismatch {
                expected: dim_a,
                found: povm.dim(),
                context: "Alice POVM",
            });
        }
        let idb = CMatrix::identity(dim_b);
        let row = povm
            .elements()
            .iter()
            .map(|e| {
                let lifted = e.matrix().kron(&idb);
                let prod = &lifted * state.matrix();
                partial_trace_a(&prod, (dim_a, dim_b)).map(|m| Hermitian::from_hermitian_part(&m))
            })
            .collect::<Result<Vec<_>>>()?;
        states.push(row);
    }
    Ensemble::new(states)
}

/// Hidden states ω_{i_1…i_n}, indexed by the flattened tuple.
#[derive(Clone, Debug)]
pub struct HiddenStateModel {
    params: ScenarioParams,
    omegas: Vec<Hermitian>,
}

impl HiddenStateModel {
    pub fn new(params: ScenarioParams, omegas: Vec<Hermitian>) -> Result<Self> {
        let space = params.index_space();
        if omegas.len() != space.len() {
            return Err(Error::DimensionMismatch {
                expected: space.len(),
                found: omegas.len(),
                context: "hidden-state count",
            });
        }
        if let Some(bad) = omegas.iter().find(|w| w.dim() != params.d) {
            return Err(Error::DimensionMismatch {
                expected: params.d,
                found: bad.dim(),
                context: "hidden-state dimension",
            });
        }
        Ok(Self { params, omegas })
    }

    pub fn params(&self) -> ScenarioParams {
        self.params
    }

    pub fn omegas(&self) -> &[Hermitian] {
        &self.omegas
    }

    pub fn omega(&self, tuple: &[usize]) -> &Hermitian {
        &self.omegas[self.params.index_space().flatten(tuple)]
    }

    /// Σ_i δ_{i_x,a} ω_i for every (a, x).
    pub fn reproduce(&self) -> Ensemble {
        let space = self.params.index_space();
        let (n, m, d) = (self.params.n, self.params.m, self.params.d);
        let mut states = vec![vec![Hermitian::zeros(d); m]; n];
        for (idx, w) in self.omegas.iter().enumerate() {
            for (x, row) in states.iter_mut().enumerate() {
                let a = space.digit(idx, x);
                row[a] = row[a].add(w);
            }
        }
        Ensemble::new(states).expect("shape preserved")
    }

    /// Largest max-norm deviation between the reproduced and the given ensemble.
    pub fn max_deviation(&self, e: &Ensemble) -> f64 {
        let r = self.reproduce();
        r.states
            .iter()
            .zip(&e.states)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    /// ω + Σ_k v^(k) X_k
    pub fn shifted(&self, basis: &HomogeneousBasis, xs: &[Hermitian]) -> Result<Self> {
        if xs.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: xs.len(),
                context: "homogeneous coefficients",
            });
        }
        let mut omegas = self.omegas.clone();
        for (v, xk) in basis.vectors().iter().zip(xs) {
            for (w, &coef) in omegas.iter_mut().zip(v) {
                if coef != 0 {
                    *w = w.add_scaled(xk, coef as f64);
                }
            }
        }
        Self::new(self.params, omegas)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.omegas
            .iter()
            .map(|w| eig_hermitian(w).min())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Particular solution: ω_{(m..a..m)} = ρ_{a|x} for a < m-1 (a at slot x),
/// ω_{(m..m)} = Σ_x ρ_{m-1|x} − (n−1)ρ, all other entries zero.
pub fn special_solution(e: &Ensemble) -> HiddenStateModel {
    let params = e.params();
    let space = params.index_space();
    let top = space.anchor_outcome();
    let mut omegas = vec![Hermitian::zeros(params.d); space.len()];
    for x in 0..params.n {
        for a in 0..top {
            omegas[space.anchor_with(x, a)] = e.state(a, x).clone();
        }
    }
    let rho = e.reduced_state();
    let mut anchor = rho.scale(-((params.n - 1) as f64));
    for x in 0..params.n {
        anchor = anchor.add(e.state(top, x));
    }
    omegas[space.anchor()] = anchor;
    HiddenStateModel { params, omegas }
}

/// Integer basis {v^(k)} of the homogeneous system Σ_i δ_{i_x,a} ω_i = 0.
#[derive(Clone, Debug)]
pub struct HomogeneousBasis {
    space: IndexSpace,
    ks: Vec<usize>,
    vectors: Vec<Vec<i64>>,
}

impl HomogeneousBasis {
    pub fn space(&self) -> IndexSpace {
        self.space
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Flattened k-indices, aligned with [`HomogeneousBasis::vectors`].
    pub fn k_indices(&self) -> &[usize] {
        &self.ks
    }

    pub fn vectors(&self) -> &[Vec<i64>] {
        &self.vectors
    }

    /// Number of admissible k-indices: m^n − [n(m−1)+1].
    pub fn expected_len(space: IndexSpace) -> usize {
        space.len() - (space.n * (space.m - 1) + 1)
    }
}

pub fn homogeneous_basis(space: IndexSpace) -> HomogeneousBasis {
    let top = space.anchor_outcome();
    let mut ks = Vec::new();
    let mut vectors = Vec::new();
    for k in 0..space.len() {
        let tuple = space.unflatten(k);
        if tuple.iter().filter(|&&i| i < top).count() < 2 {
            continue;
        }
        let mut v = vec![0i64; space.len()];
        v[k] += 1;
        for (x, &kx) in tuple.iter().enumerate() {
            v[space.anchor_with(x, kx)] -= 1;
        }
        v[space.anchor()] += space.n as i64 - 1;
        ks.push(k);
        vectors.push(v);
    }
    HomogeneousBasis { space, ks, vectors }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst observed value for this check.
    pub value: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Diagnostics {
    pub checks: Vec<Check>,
}

impl Diagnostics {
    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn is_valid(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn into_result(self, what: &str) -> Result<()> {
        match self.checks.into_iter().find(|c| !c.passed) {
            None => Ok(()),
            Some(c) => Err(Error::validation(format!("{what} failed {} check: {}", c.name, c.detail))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawEnsemble {
    n: usize,
    m: usize,
    d: usize,
    states: BTreeMap<String, Hermitian>,
}

impl Serialize for Ensemble {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let ScenarioParams { n, m, d } = self.params;
        let mut states = BTreeMap::new();
        for x in 0..n {
            for a in 0..m {
                states.insert(format!("{}|{}", a + 1, x + 1), self.state(a, x).clone());
            }
        }
        RawEnsemble { n, m, d, states }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Ensemble {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawEnsemble::deserialize(de)?;
        let params = ScenarioParams::new(raw.n, raw.m, raw.d).map_err(D::Error::custom)?;
        let mut slots: Vec<Vec<Option<Hermitian>>> = vec![vec![None; params.m]; params.n];
        for (key, mat) in raw.states {
            let (a, x) = key
                .split_once('|')
                .and_then(|(a, x)| Some((a.trim().parse::<usize>().ok()?, x.trim().parse::<usize>().ok()?)))
                .ok_or_else(|| D::Error::custom(format!("bad state key `{key}`, expected \"a|x\"")))?;
            if a < 1 || a > params.m || x < 1 || x > params.n {
                return Err(D::Error::custom(format!("state key `{key}` out of range")));
            }
            if mat.dim() != params.d {
                return Err(D::Error::custom(format!("state `{key}` has dimension {}, expected {}", mat.dim(), params.d)));
            }
            slots[x - 1][a - 1] = Some(mat);
        }
        let states = slots
            .into_iter()
            .enumerate()
            .map(|(x, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(a, s)| s.ok_or_else(|| D::Error::custom(format!("missing state \"{}|{}\"", a + 1, x + 1))))
                    .collect::<std::result::Result<Vec<_>, _>>()
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ensemble::new(states).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pauli::{projectors, sigma};
    use crate::linalg::{c, ZERO};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn singlet() -> Hermitian {
        let s = FRAC_1_SQRT_2;
        Hermitian::projector(&[ZERO, c(s, 0.0), c(-s, 0.0), ZERO])
    }

    fn pauli_povms(axes: &[usize]) -> Vec<Povm> {
        axes.iter()
            .map(|&k| Povm::new(projectors(k).to_vec()).unwrap())
            .collect()
    }

    fn werner(p: f64) -> Hermitian {
        singlet().scale(p).add(&Hermitian::identity(4).scale((1.0 - p) / 4.0))
    }

    #[test]
    fn maximally_mixed_gives_proportional_states() {
        let povm = Povm::new(vec![Hermitian::diag(&[0.3, 0.6]), Hermitian::diag(&[0.7, 0.4])]).unwrap();
        let e = assemble(&Hermitian::identity(4).scale(0.25), 2, &[povm]).unwrap();
        let p0 = 0.9 / 2.0;
        assert!(e.state(0, 0).max_abs_diff(&Hermitian::identity(2).scale(p0 / 2.0)) < 1e-15);
        assert!((e.probability(1, 0) - 1.1 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn singlet_conditional_states() {
        let e = assemble(&singlet(), 2, &pauli_povms(&[1, 2, 3])).unwrap();
        for s in 0..3 {
            let plus = Hermitian::identity(2).sub(&sigma(s + 1)).scale(0.25);
            let minus = Hermitian::identity(2).add(&sigma(s + 1)).scale(0.25);
            assert!(e.state(0, s).max_abs_diff(&plus) < 1e-15);
            assert!(e.state(1, s).max_abs_diff(&minus) < 1e-15);
        }
        assert!(e.validate().is_valid());
    }

    #[test]
    fn werner_difference_is_linear_in_p() {
        let p = 0.37;
        let e = assemble(&werner(p), 2, &pauli_povms(&[1, 2, 3])).unwrap();
        for s in 0..3 {
            let diff = e.state(0, s).sub(e.state(1, s));
            assert!(diff.max_abs_diff(&sigma(s + 1).scale(-p / 2.0)) < 1e-15);
        }
    }

    #[test]
    fn assemble_rejects_bad_inputs() {
        let povms = pauli_povms(&[3]);
        assert!(assemble(&Hermitian::identity(4), 2, &povms).is_err());
        assert!(assemble(&Hermitian::identity(6).scale(1.0 / 6.0), 3, &povms).is_err());
        assert!(Povm::new(vec![Hermitian::diag(&[1.0, 0.5])]).is_err());
        assert!(Povm::new(vec![Hermitian::diag(&[1.5, 1.0]), Hermitian::diag(&[-0.5, 0.0])]).is_err());
    }

    #[test]
    fn special_solution_two_by_two() {
        let e = assemble(&werner(0.8), 2, &pauli_povms(&[1, 3])).unwrap();
        let w = special_solution(&e);
        let rho = e.reduced_state();
        assert_eq!(w.omega(&[0, 0]), &Hermitian::zeros(2));
        assert_eq!(w.omega(&[0, 1]), e.state(0, 0));
        assert_eq!(w.omega(&[1, 0]), e.state(0, 1));
        let delta = rho.sub(e.state(0, 0)).sub(e.state(0, 1));
        assert!(w.omega(&[1, 1]).max_abs_diff(&delta) < 1e-15);
        assert!(w.max_deviation(&e) < 1e-15);
    }

    #[test]
    fn special_solution_maximally_mixed_is_proportional_to_identity() {
        let e = assemble(&Hermitian::identity(4).scale(0.25), 2, &pauli_povms(&[1, 2, 3])).unwrap();
        for w in special_solution(&e).omegas() {
            let t = w.trace_re() / 2.0;
            assert!(w.max_abs_diff(&Hermitian::identity(2).scale(t)) < 1e-15);
        }
    }

    #[test]
    fn special_solution_support_for_three_settings() {
        let e = assemble(&werner(0.9), 2, &pauli_povms(&[1, 2, 3])).unwrap();
        let w = special_solution(&e);
        let space = e.params().index_space();
        let support: Vec<Vec<usize>> = (0..space.len())
            .filter(|&i| w.omegas()[i].max_abs() > 0.0)
            .map(|i| space.unflatten(i))
            .collect();
        assert_eq!(support, vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0], vec![1, 1, 1]]);
        assert!(w.max_deviation(&e) < 1e-15);
    }

    #[test]
    fn homogeneous_basis_counts_and_entries() {
        let b = homogeneous_basis(IndexSpace::new(2, 2).unwrap());
        assert_eq!(b.len(), 1);
        assert_eq!(b.k_indices(), &[0]);
        assert_eq!(b.vectors()[0], vec![1, -1, -1, 1]);
        assert_eq!(homogeneous_basis(IndexSpace::new(3, 2).unwrap()).len(), 4);
        assert_eq!(homogeneous_basis(IndexSpace::new(2, 3).unwrap()).len(), 4);
        assert_eq!(homogeneous_basis(IndexSpace::new(1, 4).unwrap()).len(), 0);
    }

    #[test]
    fn validate_reports_failures() {
        let e = assemble(&werner(0.6), 2, &pauli_povms(&[1, 2, 3])).unwrap();
        assert!(e.validate().is_valid());

        let mut states: Vec<Vec<Hermitian>> = (0..3).map(|x| e.setting(x).to_vec()).collect();
        states[0][0] = states[0][0].scale(1.1);
        let bad = Ensemble::new(states).unwrap();
        let diag = bad.validate();
        assert!(!diag.get("no_signalling").unwrap().passed);

        let mut states: Vec<Vec<Hermitian>> = (0..3).map(|x| e.setting(x).to_vec()).collect();
        states[1][0] = Hermitian::diag(&[0.6, -0.1]);
        states[1][1] = Hermitian::diag(&[-0.1, 0.6]);
        let diag = Ensemble::new(states).unwrap().validate();
        let pos = diag.get("positivity").unwrap();
        assert!(!pos.passed);
        assert!((pos.value + 0.1).abs() < 1e-12);
        assert!(pos.detail.contains("-1.0"));
    }

    #[test]
    fn ensemble_json_uses_one_based_keys() {
        let e = assemble(&werner(0.5), 2, &pauli_povms(&[1, 3])).unwrap();
        let v = serde_json::to_value(&e).unwrap();
        assert_eq!(v["n"], 2);
        assert!(v["states"].get("2|2").is_some());
        assert!(v["states"].get("0|1").is_none());
        let back: Ensemble = serde_json::from_value(v).unwrap();
        assert_eq!(back, e);
        let missing = serde_json::json!({"n": 1, "m": 2, "d": 2, "states": {"1|1": [[[1.0,0.0],[0.0,0.0]],[[0.0,0.0],[0.0,0.0]]]}});
        assert!(serde_json::from_value::<Ensemble>(missing).is_err());
    }

    #[test]
    fn labels_round_trip() {
        let s = IndexSpace::new(3, 2).unwrap();
        assert_eq!(s.label(s.anchor()), "2,2,2");
        assert_eq!(s.parse_label("1,2,1").unwrap(), s.flatten(&[0, 1, 0]));
        assert!(s.parse_label("1,3,1").is_err());
        assert!(s.parse_label("1,2").is_err());
    }
}
