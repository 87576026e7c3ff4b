//! Built-in physical scenarios, parameter sweeps and reports.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dimbound::{
    self, data_matrix, det_bound, pauli_basis, CorrelatorTable, DataScenario, DetBoundVerdict,
};
use crate::ensemble::{assemble, Ensemble, Povm};
use crate::error::{Error, Result};
use crate::lhs_sdp::{self, LhsConfig, LhsVerdict};
use crate::linalg::pauli::{projectors, sigma};
use crate::linalg::{c, CMatrix, Hermitian, Tolerances, ZERO};
use crate::separability::{ccnr_with, ppt_with, swap_witness_with, CriterionVerdict, LocalBasis};
use crate::steering_map::{build_sigma_with, pauli_sign_zset, ZSet};

/// Lossy noisy singlet: with probability p the photon arrives in the Werner
/// state of visibility λ, otherwise Alice holds the vacuum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoisySingletModel {
    pub p: f64,
    pub lambda: f64,
}

impl NoisySingletModel {
    pub fn new(p: f64, lambda: f64) -> Result<Self> {
        for (name, v) in [("p", p), ("lambda", lambda)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(Self { p, lambda })
    }

    /// P(a, b | x, y) before reassignment, a ∈ {+, −, inc}, b ∈ {+, −}.
    pub fn raw_probabilities(&self, x: usize, y: usize) -> [[f64; 2]; 3] {
        let delta = if x == y { 1.0 } else { 0.0 };
        let anti = self.p * (1.0 + self.lambda * delta) / 4.0;
        let same = self.p * (1.0 - self.lambda * delta) / 4.0;
        let inc = (1.0 - self.p) / 2.0;
        [[same, anti], [anti, same], [inc, inc]]
    }

    /// P(a, b | x, y) after assigning each inconclusive event to ± with
    /// probability ½.
    pub fn reassigned_probabilities(&self, x: usize, y: usize) -> [[f64; 2]; 2] {
        let raw = self.raw_probabilities(x, y);
        let mut out = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                out[a][b] = raw[a][b] + raw[2][b] / 2.0;
            }
        }
        out
    }

    /// Alice (qubit ⊕ vacuum) ⊗ Bob qubit state.
    pub fn state(&self) -> Hermitian {
        let werner = werner_state(self.lambda);
        let mut m = CMatrix::zeros(6, 6);
        for i in 0..4 {
            for j in 0..4 {
                m[(i, j)] = werner.matrix()[(i, j)] * self.p;
            }
        }
        let vac = (1.0 - self.p) / 2.0;
        m[(4, 4)] = c(vac, 0.0);
        m[(5, 5)] = c(vac, 0.0);
        Hermitian::from_hermitian_part(&m)
    }

    /// Bob's conditional states when Alice measures σ_1, σ_2, σ_3 on the
    /// qubit and reassigns the vacuum outcome at random.
    pub fn ensemble(&self) -> Result<Ensemble> {
        let povms = (1..=3)
            .map(|axis| {
                let [plus, minus] = projectors(axis);
                let elements = [plus, minus]
                    .iter()
                    .map(|p| {
                        let mut m = CMatrix::zeros(3, 3);
                        for i in 0..2 {
                            for j in 0..2 {
                                m[(i, j)] = p.matrix()[(i, j)];
                            }
                        }
                        m[(2, 2)] = c(0.5, 0.0);
                        Hermitian::from_hermitian_part(&m)
                    })
                    .collect();
                Povm::new(elements)
            })
            .collect::<Result<Vec<_>>>()?;
        assemble(&self.state(), 3, &povms)
    }
}

/// ⟨A_x B_y⟩ = −δ_{xy} pλ with vanishing marginals, from the reassigned
/// probabilities.
pub fn vienna_correlators(model: &NoisySingletModel) -> CorrelatorTable {
    let probs: Vec<Vec<Vec<Vec<f64>>>> = (0..3)
        .map(|x| {
            (0..3)
                .map(|y| model.reassigned_probabilities(x, y).iter().map(|r| r.to_vec()).collect())
                .collect()
        })
        .collect();
    CorrelatorTable::from_probabilities(&probs).expect("analytic probabilities are normalized")
}

/// Empirical table from `shots` draws per setting pair, with inconclusive
/// events assigned by a fair coin. Demonstration only.
pub fn sample_vienna_correlators(model: &NoisySingletModel, shots: usize, seed: u64) -> Result<CorrelatorTable> {
    if shots == 0 {
        return Err(Error::validation("shots must be positive"));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut probs = vec![vec![vec![vec![0.0; 2]; 2]; 3]; 3];
    for (x, row) in probs.iter_mut().enumerate() {
        for (y, block) in row.iter_mut().enumerate() {
            let raw = model.raw_probabilities(x, y);
            let mut counts = [[0usize; 2]; 2];
            for _ in 0..shots {
                let mut u: f64 = rng.gen();
                let mut outcome = (2, 1);
                'draw: for (a, r) in raw.iter().enumerate() {
                    for (b, &pr) in r.iter().enumerate() {
                        if u < pr {
                            outcome = (a, b);
                            break 'draw;
                        }
                        u -= pr;
                    }
                }
                let (mut a, b) = outcome;
                if a == 2 {
                    a = usize::from(rng.gen::<bool>());
                }
                counts[a][b] += 1;
            }
            for a in 0..2 {
                for b in 0..2 {
                    block[a][b] = counts[a][b] as f64 / shots as f64;
                }
            }
        }
    }
    CorrelatorTable::from_probabilities(&probs)
}

/// p|ψ⁻⟩⟨ψ⁻| + (1−p)1/4.
pub fn werner_state(p: f64) -> Hermitian {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let singlet = Hermitian::projector(&[ZERO, c(s, 0.0), c(-s, 0.0), ZERO]);
    singlet.scale(p).add(&Hermitian::identity(4).scale((1.0 - p) / 4.0))
}

/// Bob's states when Alice measures the listed Pauli axes projectively.
pub fn werner_ensemble(p: f64, axes: &[usize]) -> Result<Ensemble> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::validation(format!("p must lie in [0, 1], got {p}")));
    }
    check_axes(axes)?;
    let povms = axes
        .iter()
        .map(|&k| Povm::new(projectors(k).to_vec()))
        .collect::<Result<Vec<_>>>()?;
    assemble(&werner_state(p), 2, &povms)
}

/// Correlators of a two-qubit state for Pauli settings on both sides.
pub fn pauli_correlators(state: &Hermitian, axes: &[usize]) -> Result<CorrelatorTable> {
    check_axes(axes)?;
    let expect = |a: usize, b: usize| state.inner(&sigma(a).kron(&sigma(b)));
    let n = axes.len();
    let corr = axes.iter().map(|&a| axes.iter().map(|&b| expect(a, b)).collect()).collect();
    let marg_a = axes.iter().map(|&a| expect(a, 0)).collect();
    let marg_b = axes.iter().map(|&b| expect(0, b)).collect();
    CorrelatorTable::new(n, n, corr, marg_a, marg_b)
}

fn check_axes(axes: &[usize]) -> Result<()> {
    if axes.is_empty() || axes.iter().any(|&a| !(1..=3).contains(&a)) {
        return Err(Error::validation("settings must be Pauli axes from 1..=3"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Scenario {
    /// Werner state swept in p, Alice and Bob measuring the listed axes.
    Werner { axes: Vec<usize> },
    /// Lossy noisy singlet swept in p at fixed λ.
    Vienna { lambda: f64 },
}

impl Scenario {
    pub fn werner(settings: usize) -> Result<Self> {
        match settings {
            2 => Ok(Self::Werner { axes: vec![1, 3] }),
            3 => Ok(Self::Werner { axes: vec![1, 2, 3] }),
            _ => Err(Error::validation(format!("Werner sweeps support 2 or 3 settings, got {settings}"))),
        }
    }

    fn axes(&self) -> Vec<usize> {
        match self {
            Self::Werner { axes } => axes.clone(),
            Self::Vienna { .. } => vec![1, 2, 3],
        }
    }

    pub fn ensemble(&self, param: f64) -> Result<Ensemble> {
        match self {
            Self::Werner { axes } => werner_ensemble(param, axes),
            Self::Vienna { lambda } => NoisySingletModel::new(param, *lambda)?.ensemble(),
        }
    }

    pub fn correlators(&self, param: f64) -> Result<CorrelatorTable> {
        match self {
            Self::Werner { axes } => pauli_correlators(&werner_state(param), axes),
            Self::Vienna { lambda } => Ok(vienna_correlators(&NoisySingletModel::new(param, *lambda)?)),
        }
    }

    /// Z-set used for the map criteria.
    pub fn zset(&self) -> Result<ZSet> {
        pauli_sign_zset(&self.axes())
    }

    pub fn data_scenario(&self) -> Result<DataScenario> {
        let axes = self.axes();
        if axes == [1, 2, 3] {
            return Ok(DataScenario::Cube3x2);
        }
        Ok(DataScenario::Custom {
            zset: pauli_sign_zset(&axes)?,
            basis: pauli_basis(&axes)?,
        })
    }

    /// |det D| bound applied by the dimbound criterion.
    pub fn det_bound(&self) -> f64 {
        det_bound(2, 2, self.axes().len(), true).0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepCriterion {
    Ppt,
    Ccnr,
    Swap,
    Lhs,
    Dimbound,
}

impl SweepCriterion {
    pub const ALL: [Self; 5] = [Self::Ppt, Self::Ccnr, Self::Swap, Self::Lhs, Self::Dimbound];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ppt => "ppt",
            Self::Ccnr => "ccnr",
            Self::Swap => "swap",
            Self::Lhs => "lhs",
            Self::Dimbound => "dimbound",
        }
    }
}

impl std::str::FromStr for SweepCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::validation(format!("unknown criterion `{s}` (ppt, ccnr, swap, lhs, dimbound)")))
    }
}

/// Verdict of one criterion at one parameter value.
#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum Verdict {
    Map(CriterionVerdict),
    Lhs(Box<LhsVerdict>),
    Dimbound(DetBoundVerdict),
    Error { error: String, undecided: bool },
}

impl Verdict {
    pub fn detected(&self) -> Option<bool> {
        match self {
            Self::Map(v) => Some(v.detected),
            Self::Lhs(v) => Some(v.steerable),
            Self::Dimbound(v) => Some(v.detected),
            Self::Error { .. } => None,
        }
    }

    pub fn is_undecided(&self) -> bool {
        matches!(self, Self::Error { undecided: true, .. })
    }

    fn from_result<T>(r: Result<T>, wrap: impl FnOnce(T) -> Self) -> Self {
        match r {
            Ok(v) => wrap(v),
            Err(e) => Self::Error {
                undecided: matches!(e, Error::Undecided { .. }),
                error: e.to_string(),
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub points: usize,
    /// Width of the final bisection bracket.
    pub tolerance: f64,
    pub max_bisection_depth: usize,
    pub lhs: LhsConfig,
    pub tol: Tolerances,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            points: 51,
            tolerance: 1e-6,
            max_bisection_depth: 60,
            lhs: LhsConfig::default(),
            tol: Tolerances::default(),
        }
    }
}

pub fn evaluate(scenario: &Scenario, param: f64, criterion: SweepCriterion, cfg: &SweepConfig) -> Verdict {
    let tol = &cfg.tol;
    match criterion {
        SweepCriterion::Ppt | SweepCriterion::Ccnr | SweepCriterion::Swap => {
            let r = (|| {
                let e = scenario.ensemble(param)?;
                let z = scenario.zset()?;
                match criterion {
                    SweepCriterion::Swap => swap_witness_with(&z, &e, tol),
                    SweepCriterion::Ppt => Ok(ppt_with(&build_sigma_with(&z, &e, tol)?, tol)),
                    _ => {
                        let s = build_sigma_with(&z, &e, tol)?;
                        ccnr_with(&s, &LocalBasis::gell_mann(s.dim_a), &LocalBasis::gell_mann(s.dim_b), tol)
                    }
                }
            })();
            Verdict::from_result(r, Verdict::Map)
        }
        SweepCriterion::Lhs => {
            let r = scenario
                .ensemble(param)
                .and_then(|e| lhs_sdp::decide_with(&e, &cfg.lhs, tol));
            Verdict::from_result(r, |v| Verdict::Lhs(Box::new(v)))
        }
        SweepCriterion::Dimbound => {
            let r = (|| {
                let t = scenario.correlators(param)?;
                let d = data_matrix(&t, &scenario.data_scenario()?)?;
                dimbound::verdict_with(&d, 2, 2, true, tol)
            })();
            Verdict::from_result(r, Verdict::Dimbound)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Flip {
    /// Midpoint of the final bracket.
    pub parameter: f64,
    pub bracket: [f64; 2],
    pub detected_below: bool,
    pub detected_above: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ThresholdEntry {
    /// Set when detection flips exactly once along the grid.
    pub threshold: Option<f64>,
    pub flips: Vec<Flip>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
    /// Every grid point detected or none detected.
    pub constant: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridPoint {
    pub parameter: f64,
    pub detected: BTreeMap<&'static str, Option<bool>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub total_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub scenario: Scenario,
    /// SHA-256 of the canonical JSON of all inputs.
    pub input_hash: String,
    pub inputs: serde_json::Value,
    /// Exact bound constants used by the criteria.
    pub constants: BTreeMap<&'static str, f64>,
    /// Primary detection flag (dimension-bounded verdict) for single-point reports.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detected: Option<bool>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub verdicts: BTreeMap<&'static str, Verdict>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<GridPoint>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub thresholds: BTreeMap<&'static str, ThresholdEntry>,
    pub timing: Timing,
}

impl Report {
    pub fn any_undecided(&self) -> bool {
        self.verdicts.values().any(Verdict::is_undecided)
            || self
                .thresholds
                .values()
                .any(|t| t.errors.iter().any(|e| e.contains("undecided")))
    }
}

fn hash_inputs(inputs: &serde_json::Value) -> String {
    let digest = Sha256::digest(inputs.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn constants(scenario: &Scenario) -> BTreeMap<&'static str, f64> {
    let n = scenario.axes().len();
    let mut out = BTreeMap::new();
    out.insert("dimbound_det_bound", scenario.det_bound());
    out.insert("dimbound_det_bound_no_identity", det_bound(2, 2, n, false).0);
    out.insert("map_ppt_threshold", 0.0);
    out.insert("map_ccnr_threshold", 1.0);
    out.insert("map_swap_threshold", 0.0);
    out
}

/// Every criterion at a single noisy-singlet configuration.
pub fn vienna_report(model: &NoisySingletModel, cfg: &SweepConfig) -> Result<Report> {
    let start = Instant::now();
    let model = NoisySingletModel::new(model.p, model.lambda)?;
    let scenario = Scenario::Vienna { lambda: model.lambda };
    let inputs = serde_json::json!({ "command": "vienna", "p": model.p, "lambda": model.lambda, "tolerances": cfg.tol });
    let verdicts: BTreeMap<&'static str, Verdict> = SweepCriterion::ALL
        .par_iter()
        .map(|&c| (c.name(), evaluate(&scenario, model.p, c, cfg)))
        .collect();
    let detected = verdicts["dimbound"].detected();
    Ok(Report {
        constants: constants(&scenario),
        scenario,
        input_hash: hash_inputs(&inputs),
        inputs,
        detected,
        verdicts,
        grid: Vec::new(),
        thresholds: BTreeMap::new(),
        timing: Timing {
            total_ms: start.elapsed().as_secs_f64() * 1e3,
        },
    })
}

/// Evaluates the criteria on an even grid over [from, to] and bisects every
/// change of detection between neighbouring points.
pub fn sweep(scenario: &Scenario, from: f64, to: f64, criteria: &[SweepCriterion], cfg: &SweepConfig) -> Result<Report> {
    let start = Instant::now();
    if !(from.is_finite() && to.is_finite() && from < to) {
        return Err(Error::validation(format!("sweep range must satisfy from < to, got [{from}, {to}]")));
    }
    if !(0.0..=1.0).contains(&from) || !(0.0..=1.0).contains(&to) {
        return Err(Error::validation("sweep parameter must lie in [0, 1]"));
    }
    if cfg.points < 2 {
        return Err(Error::validation("sweep needs at least 2 grid points"));
    }
    if criteria.is_empty() {
        return Err(Error::validation("no criteria requested"));
    }
    let mut criteria = criteria.to_vec();
    criteria.sort();
    criteria.dedup();

    let inputs = serde_json::json!({
        "command": "sweep",
        "scenario": scenario,
        "from": from,
        "to": to,
        "points": cfg.points,
        "criteria": criteria,
        "bisection_tolerance": cfg.tolerance,
        "tolerances": cfg.tol,
    });
    let params: Vec<f64> = (0..cfg.points)
        .map(|k| from + (to - from) * k as f64 / (cfg.points - 1) as f64)
        .collect();

    let evaluations: Vec<Vec<Verdict>> = params
        .par_iter()
        .map(|&p| criteria.iter().map(|&c| evaluate(scenario, p, c, cfg)).collect())
        .collect();

    let thresholds: BTreeMap<&'static str, ThresholdEntry> = criteria
        .par_iter()
        .enumerate()
        .map(|(ci, &c)| {
            let column: Vec<&Verdict> = evaluations.iter().map(|row| &row[ci]).collect();
            (c.name(), thresholds_for(scenario, c, &params, &column, cfg))
        })
        .collect();

    let grid = params
        .iter()
        .zip(&evaluations)
        .map(|(&p, row)| GridPoint {
            parameter: p,
            detected: criteria.iter().zip(row).map(|(c, v)| (c.name(), v.detected())).collect(),
        })
        .collect();

    Ok(Report {
        constants: constants(scenario),
        scenario: scenario.clone(),
        input_hash: hash_inputs(&inputs),
        inputs,
        detected: None,
        verdicts: BTreeMap::new(),
        grid,
        thresholds,
        timing: Timing {
            total_ms: start.elapsed().as_secs_f64() * 1e3,
        },
    })
}

fn thresholds_for(
    scenario: &Scenario,
    criterion: SweepCriterion,
    params: &[f64],
    column: &[&Verdict],
    cfg: &SweepConfig,
) -> ThresholdEntry {
    let mut entry = ThresholdEntry::default();
    let mut known: Vec<(f64, bool)> = Vec::new();
    for (&p, v) in params.iter().zip(column) {
        match v {
            Verdict::Error { error, .. } => entry.errors.push(format!("p={p}: {error}")),
            _ => known.push((p, v.detected().expect("non-error verdict"))),
        }
    }
    for pair in known.windows(2) {
        let ((lo, dlo), (hi, dhi)) = (pair[0], pair[1]);
        if dlo == dhi {
            continue;
        }
        match bisect(scenario, criterion, lo, hi, dlo, cfg) {
            Ok(bracket) => entry.flips.push(Flip {
                parameter: 0.5 * (bracket[0] + bracket[1]),
                bracket,
                detected_below: dlo,
                detected_above: dhi,
            }),
            Err(e) => entry.errors.push(format!("bisection in [{lo}, {hi}]: {e}")),
        }
    }
    if entry.flips.len() == 1 {
        entry.threshold = Some(entry.flips[0].parameter);
    }
    if entry.flips.is_empty() && entry.errors.is_empty() {
        entry.constant = known.first().map(|k| k.1);
    }
    entry
}

fn bisect(
    scenario: &Scenario,
    criterion: SweepCriterion,
    mut lo: f64,
    mut hi: f64,
    detected_lo: bool,
    cfg: &SweepConfig,
) -> Result<[f64; 2]> {
    let mut depth = 0;
    while hi - lo > cfg.tolerance && depth < cfg.max_bisection_depth {
        let mid = 0.5 * (lo + hi);
        let v = evaluate(scenario, mid, criterion, cfg);
        match v.detected() {
            Some(d) if d == detected_lo => lo = mid,
            Some(_) => hi = mid,
            None => {
                let Verdict::Error { error, .. } = v else { unreachable!() };
                return Err(Error::validation(error));
            }
        }
        depth += 1;
    }
    Ok([lo, hi])
}
