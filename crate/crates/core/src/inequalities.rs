//! Numerical certification of the velocity inequalities, their scaling
//! invariances, and the exact exponent systems behind them.
//!
//! Every right-hand side is a sum of products `Π norm^exponent`; a report
//! stores the factors tagged by term so that
//! `lhs = constant · Σ_t Π_{k ∈ t} value_k^{exponent_k}`.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biot_savart::{default_z_window, BiotSavart, SourceSet};
use crate::error::{Error, Result};
use crate::field::{cell_size, make_single_ring, HalfPlanePoint, RingParams, VorticityField, BLOB_OVERLAP};
use crate::kernels::Dimension;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityName {
    #[serde(rename = "key_R14")]
    KeyR14,
    KeyHighd,
    GlobalEnergy,
    FengSverak,
    MajdaBertozzi,
}

impl InequalityName {
    pub const ALL: [InequalityName; 5] = [
        InequalityName::KeyR14,
        InequalityName::KeyHighd,
        InequalityName::GlobalEnergy,
        InequalityName::FengSverak,
        InequalityName::MajdaBertozzi,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InequalityName::KeyR14 => "key_R14",
            InequalityName::KeyHighd => "key_highd",
            InequalityName::GlobalEnergy => "global_energy",
            InequalityName::FengSverak => "feng_sverak",
            InequalityName::MajdaBertozzi => "majda_bertozzi",
        }
    }
}

impl fmt::Display for InequalityName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Norms and geometric quantities that appear as factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    /// `‖ω / r^{d-2}‖_{L^∞}`
    RelvortLinf,
    /// `‖ω / r^{d-2}‖_{L¹(ℝ^d)}`
    RelvortL1,
    /// `‖r ω‖_{L¹(ℝ^d)}`
    ROmegaL1,
    /// `‖u‖_{L²(ℝ^d)}`
    Energy,
    /// support radius `R`
    SupportRadius,
    /// `‖ω‖_{L^∞}`
    OmegaLinf,
    /// `|supp ω|` in `ℝ^d`
    SupportVolume,
}

impl Norm {
    pub fn as_str(self) -> &'static str {
        match self {
            Norm::RelvortLinf => "relvort_Linf",
            Norm::RelvortL1 => "relvort_L1",
            Norm::ROmegaL1 => "r_omega_L1",
            Norm::Energy => "energy",
            Norm::SupportRadius => "R",
            Norm::OmegaLinf => "omega_Linf",
            Norm::SupportVolume => "support_volume",
        }
    }

    /// Power of `λ` picked up under `ω ↦ λ ω(λ ·)` in dimension `d`.
    pub fn scaling(self, d: u32) -> Ratio<i64> {
        let d = d as i64;
        match self {
            Norm::RelvortLinf => Ratio::from_integer(d - 1),
            Norm::RelvortL1 => Ratio::from_integer(-1),
            Norm::ROmegaL1 => Ratio::from_integer(-d),
            Norm::Energy => Ratio::new(-d, 2),
            Norm::SupportRadius => Ratio::from_integer(-1),
            Norm::OmegaLinf => Ratio::from_integer(1),
            Norm::SupportVolume => Ratio::from_integer(-d),
        }
    }

    /// Degree of homogeneity in `ω`.
    pub fn homogeneity(self) -> Ratio<i64> {
        match self {
            Norm::SupportRadius | Norm::SupportVolume => Ratio::from_integer(0),
            _ => Ratio::from_integer(1),
        }
    }
}

/// All factor values of one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldNorms {
    pub relvort_linf: f64,
    pub relvort_l1: f64,
    pub r_omega_l1: f64,
    pub energy: f64,
    pub support_radius: f64,
    pub omega_linf: f64,
    pub support_volume: f64,
}

impl FieldNorms {
    pub fn compute(solver: &BiotSavart, field: &VorticityField) -> Result<Self> {
        Ok(Self {
            relvort_linf: field.lp_norm_rel_vort(f64::INFINITY)?,
            relvort_l1: field.lp_norm_rel_vort(1.0)?,
            r_omega_l1: field.weighted_l1(1)?,
            energy: solver.kinetic_energy(field)?.value,
            support_radius: field.support_radius(),
            omega_linf: field.omega_max(),
            support_volume: field.support_volume(),
        })
    }

    pub fn get(&self, norm: Norm) -> f64 {
        match norm {
            Norm::RelvortLinf => self.relvort_linf,
            Norm::RelvortL1 => self.relvort_l1,
            Norm::ROmegaL1 => self.r_omega_l1,
            Norm::Energy => self.energy,
            Norm::SupportRadius => self.support_radius,
            Norm::OmegaLinf => self.omega_linf,
            Norm::SupportVolume => self.support_volume,
        }
    }
}

/// Right-hand side of an inequality as a sum of monomials.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsForm {
    pub terms: Vec<Vec<(Norm, f64)>>,
}

impl RhsForm {
    pub fn of(name: InequalityName, d: Dimension) -> Self {
        let df = d.as_f64();
        let terms = match name {
            InequalityName::KeyR14 | InequalityName::KeyHighd => vec![
                vec![(Norm::RelvortLinf, 1.0 / df), (Norm::RelvortL1, 1.0 - 1.0 / df)],
                vec![(Norm::SupportRadius, df / 4.0 - 0.5), (Norm::Energy, 0.5), (Norm::RelvortLinf, 0.5)],
            ],
            InequalityName::GlobalEnergy => {
                vec![vec![(Norm::Energy, 1.0 / 3.0), (Norm::RelvortLinf, 0.5), (Norm::ROmegaL1, 1.0 / 6.0)]]
            }
            InequalityName::FengSverak => {
                vec![vec![(Norm::RelvortLinf, 0.5), (Norm::RelvortL1, 0.25), (Norm::ROmegaL1, 0.25)]]
            }
            InequalityName::MajdaBertozzi => vec![vec![(Norm::OmegaLinf, 1.0), (Norm::SupportVolume, 0.0)]],
        };
        Self { terms }
    }

    /// Shift the exponent of `norm` by `delta`, in one term or in all of them.
    pub fn perturbed(&self, p: &Perturbation) -> Self {
        let mut out = self.clone();
        for (t, term) in out.terms.iter_mut().enumerate() {
            if p.term.is_some_and(|k| k != t) {
                continue;
            }
            for (n, e) in term.iter_mut() {
                if *n == p.norm {
                    *e += p.delta;
                }
            }
        }
        out
    }

    pub fn factors(&self, norms: &FieldNorms) -> Vec<Factor> {
        self.terms
            .iter()
            .enumerate()
            .flat_map(|(t, term)| {
                term.iter().map(move |&(n, e)| Factor { norm: n.as_str().to_owned(), value: norms.get(n), exponent: e, term: t })
            })
            .collect()
    }
}

/// Exponent shift used to check that the scaling suite detects wrong
/// exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub norm: Norm,
    pub delta: f64,
    /// Restrict to one term; `None` shifts every occurrence.
    pub term: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub norm: String,
    pub value: f64,
    pub exponent: f64,
    pub term: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: InequalityName,
    pub lhs: f64,
    pub rhs: f64,
    pub factors: Vec<Factor>,
    pub constant: f64,
    pub field_id: String,
}

impl InequalityReport {
    /// `Σ_t Π value^exponent` from the stored factors.
    pub fn rhs_from_factors(&self) -> f64 {
        rhs_value(&self.factors)
    }
}

fn power(value: f64, exponent: f64) -> f64 {
    if exponent == 0.0 {
        1.0
    } else {
        value.powf(exponent)
    }
}

fn rhs_value(factors: &[Factor]) -> f64 {
    let n_terms = factors.iter().map(|f| f.term + 1).max().unwrap_or(0);
    (0..n_terms)
        .map(|t| factors.iter().filter(|f| f.term == t).map(|f| power(f.value, f.exponent)).product::<f64>())
        .sum()
}

/// Left-hand side evaluation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSettings {
    /// Chebyshev nodes on the line `r = R`.
    pub radial_nz: usize,
    /// Lattice points per side of the dilated support box.
    pub lattice: usize,
    /// Dilation of the support box about its centre.
    pub dilation: f64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self { radial_nz: 64, lattice: 24, dilation: 1.5 }
    }
}

/// Inequality checker bound to one velocity solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct Harness {
    pub solver: BiotSavart,
    pub probe: ProbeSettings,
}

/// Elements plus a `n × n` lattice over the support box dilated about its
/// centre (clipped at the axis).
pub fn probe_points(field: &VorticityField, lattice: usize, dilation: f64) -> Vec<HalfPlanePoint> {
    let mut pts: Vec<HalfPlanePoint> = field.elements().iter().map(|e| e.pos).collect();
    if let Some((r0, r1, z0, z1)) = field.support_box() {
        let (rc, zc) = (0.5 * (r0 + r1), 0.5 * (z0 + z1));
        let (hr, hz) = (0.5 * dilation * (r1 - r0), 0.5 * dilation * (z1 - z0));
        let n = lattice.max(2);
        for i in 0..n {
            let r = (rc - hr + 2.0 * hr * i as f64 / (n - 1) as f64).max(0.0);
            for j in 0..n {
                pts.push(HalfPlanePoint::new(r, zc - hz + 2.0 * hz * j as f64 / (n - 1) as f64));
            }
        }
    }
    pts
}

impl Harness {
    pub fn new(solver: BiotSavart) -> Self {
        Self { solver, probe: ProbeSettings::default() }
    }

    fn lhs(&self, name: InequalityName, field: &VorticityField) -> Result<f64> {
        match name {
            InequalityName::KeyR14 | InequalityName::KeyHighd => {
                let src = SourceSet::from_field(field);
                Ok(self.solver.radial_probe_from(field, &src, self.probe.radial_nz, default_z_window(field))?.max_ur)
            }
            _ => {
                let pts = probe_points(field, self.probe.lattice, self.probe.dilation);
                let vel = self.solver.velocities(field, &pts)?;
                Ok(if name == InequalityName::GlobalEnergy {
                    vel.iter().fold(0.0, |m, v| m.max(v.ur.abs()))
                } else {
                    vel.iter().fold(0.0, |m, v| m.max(v.norm()))
                })
            }
        }
    }

    fn require(name: InequalityName, field: &VorticityField) -> Result<()> {
        let three_d_only = !matches!(name, InequalityName::KeyHighd);
        if three_d_only && field.d() != Dimension::D3 {
            return Err(Error::RequiresThreeDimensions { op: name.as_str(), d: field.d().get() });
        }
        Ok(())
    }

    /// Evaluate `name` on `field` with the stated exponents, optionally
    /// perturbed.
    pub fn check(
        &self,
        name: InequalityName,
        field: &VorticityField,
        field_id: &str,
        perturbation: Option<&Perturbation>,
    ) -> Result<InequalityReport> {
        Self::require(name, field)?;
        let mut form = RhsForm::of(name, field.d());
        if let Some(p) = perturbation {
            form = form.perturbed(p);
        }
        let lhs = if field.is_empty() { 0.0 } else { self.lhs(name, field)? };
        let norms = if field.is_empty() {
            FieldNorms {
                relvort_linf: 0.0,
                relvort_l1: 0.0,
                r_omega_l1: 0.0,
                energy: 0.0,
                support_radius: 0.0,
                omega_linf: 0.0,
                support_volume: 0.0,
            }
        } else {
            FieldNorms::compute(&self.solver, field)?
        };
        let factors = form.factors(&norms);
        let rhs = rhs_value(&factors);
        let constant = if lhs == 0.0 { 0.0 } else { lhs / rhs };
        Ok(InequalityReport { name, lhs, rhs, factors, constant, field_id: field_id.to_owned() })
    }

    pub fn check_key_estimate(&self, field: &VorticityField, field_id: &str) -> Result<InequalityReport> {
        self.check(InequalityName::KeyR14, field, field_id, None)
    }

    pub fn check_key_estimate_high_d(&self, field: &VorticityField, field_id: &str) -> Result<InequalityReport> {
        self.check(InequalityName::KeyHighd, field, field_id, None)
    }

    pub fn check_global_estimate(&self, field: &VorticityField, field_id: &str) -> Result<InequalityReport> {
        self.check(InequalityName::GlobalEnergy, field, field_id, None)
    }

    pub fn check_feng_sverak(&self, field: &VorticityField, field_id: &str) -> Result<InequalityReport> {
        self.check(InequalityName::FengSverak, field, field_id, None)
    }

    /// Raw ratio `‖u‖_∞ / ‖ω‖_∞`; the support volume is recorded with
    /// exponent zero.
    pub fn check_majda_bertozzi(&self, field: &VorticityField, field_id: &str) -> Result<InequalityReport> {
        self.check(InequalityName::MajdaBertozzi, field, field_id, None)
    }

    /// Empirical constants of `name` on `field.rescale(λ)` for every `λ`,
    /// compared against the unscaled field.
    pub fn scaling_invariance_suite(
        &self,
        name: InequalityName,
        field: &VorticityField,
        lambdas: &[f64],
        perturbation: Option<&Perturbation>,
    ) -> Result<ScalingReport> {
        if let Some(&bad) = lambdas.iter().find(|&&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::Domain(format!("rescale factor must be positive, got {bad}")));
        }
        let base = self.check(name, field, "base", perturbation)?.constant;
        let mut constants = Vec::with_capacity(lambdas.len());
        let mut deviations = Vec::with_capacity(lambdas.len());
        for &l in lambdas {
            let c = self.check(name, &field.rescale(l, 0.0)?, "rescaled", perturbation)?.constant;
            constants.push(c);
            deviations.push(if base == 0.0 { c.abs() } else { (c / base - 1.0).abs() });
        }
        let max_deviation = deviations.iter().copied().fold(0.0, f64::max);
        Ok(ScalingReport {
            name,
            base_constant: base,
            lambdas: lambdas.to_vec(),
            constants,
            deviations,
            max_deviation,
            pass: max_deviation < SCALING_TOL,
        })
    }

    /// Reports for every field of a corpus under every listed inequality,
    /// ordered by field then inequality.
    pub fn run_corpus(&self, corpus: &[CorpusField], names: &[InequalityName]) -> Result<Vec<InequalityReport>> {
        let per_field: Vec<Result<Vec<InequalityReport>>> = corpus
            .par_iter()
            .map(|cf| names.iter().map(|&n| self.check(n, &cf.field, &cf.id, None)).collect())
            .collect();
        let mut out = Vec::new();
        for r in per_field {
            out.extend(r?);
        }
        Ok(out)
    }
}

pub const SCALING_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub name: InequalityName,
    pub base_constant: f64,
    pub lambdas: Vec<f64>,
    pub constants: Vec<f64>,
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Per-inequality maxima over a set of reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub n_fields: usize,
    pub max_constants: BTreeMap<String, f64>,
    pub argmax_field: BTreeMap<String, String>,
}

pub fn summarize(reports: &[InequalityReport]) -> CorpusSummary {
    let mut max_constants = BTreeMap::new();
    let mut argmax_field = BTreeMap::new();
    let mut ids = std::collections::BTreeSet::new();
    for r in reports {
        ids.insert(r.field_id.as_str());
        let key = r.name.as_str().to_owned();
        let cur = max_constants.entry(key.clone()).or_insert(f64::NEG_INFINITY);
        if r.constant > *cur {
            *cur = r.constant;
            argmax_field.insert(key, r.field_id.clone());
        }
    }
    CorpusSummary { n_fields: ids.len(), max_constants, argmax_field }
}

// ---------------------------------------------------------------------------
// Random corpus

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusParams {
    pub d: Dimension,
    pub seed: u64,
    /// Cells per ring diameter.
    pub resolution: u32,
    pub max_rings: u32,
}

impl CorpusParams {
    pub fn new(d: Dimension, seed: u64) -> Self {
        Self { d, seed, resolution: 10, max_rings: 5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusField {
    pub id: String,
    pub field: VorticityField,
}

/// Field number `index` of the corpus. Each field draws from its own
/// ChaCha8 stream, so a corpus of `2n` fields extends the one of `n`.
pub fn corpus_field(params: &CorpusParams, index: u64) -> Result<CorpusField> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(index);
    let n_rings = rng.gen_range(1..=params.max_rings);
    let mut rings = Vec::with_capacity(n_rings as usize);
    for _ in 0..n_rings {
        let center_r = (rng.gen_range(0.2f64.ln()..5.0f64.ln())).exp();
        let center_z = rng.gen_range(-2.0..2.0);
        let radius = center_r * rng.gen_range(0.1..0.5);
        let magnitude = rng.gen_range(0.5..2.0);
        let amplitude = if rng.gen_bool(0.5) { magnitude } else { -magnitude };
        rings.push(RingParams { center: HalfPlanePoint::new(center_r, center_z), radius, amplitude, resolution: params.resolution });
    }
    let delta = rings.iter().map(|p| BLOB_OVERLAP * cell_size(p.radius, p.resolution)).fold(f64::INFINITY, f64::min);
    let mut field = make_single_ring(params.d, &rings[0], Some(delta))?;
    for p in &rings[1..] {
        field = field.concat(&make_single_ring(params.d, p, Some(delta))?)?;
    }
    Ok(CorpusField { id: format!("d{}-s{}-{:04}", params.d, params.seed, index), field })
}

pub fn random_corpus(params: &CorpusParams, n_fields: usize) -> Result<Vec<CorpusField>> {
    (0..n_fields as u64).map(|i| corpus_field(params, i)).collect()
}

// ---------------------------------------------------------------------------
// Exponent systems

pub type Rational = Ratio<i64>;

/// One linear condition on the exponents of a list of factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Constraint {
    /// `Σ homogeneity_k e_k = 1`: the inequality is linear in `ω`.
    Homogeneity,
    /// `Σ scaling_k e_k = 0`: invariance under `ω ↦ λ ω(λ ·)` in dimension `d`.
    Scaling { d: u32 },
    /// `e_index = value`.
    Fixed { index: usize, value: (i64, i64) },
    /// `Σ coeffs_k e_k = rhs`.
    Linear { coeffs: Vec<(i64, i64)>, rhs: (i64, i64) },
}

fn rat((n, d): (i64, i64)) -> Result<Rational> {
    if d == 0 {
        return Err(Error::Domain("zero denominator in constraint".into()));
    }
    Ok(Ratio::new(n, d))
}

impl Constraint {
    pub fn fixed(index: usize, num: i64, den: i64) -> Self {
        Constraint::Fixed { index, value: (num, den) }
    }

    fn row(&self, factors: &[Norm]) -> Result<(Vec<Rational>, Rational)> {
        let zero = Rational::from_integer(0);
        Ok(match self {
            Constraint::Homogeneity => (factors.iter().map(|n| n.homogeneity()).collect(), Rational::from_integer(1)),
            Constraint::Scaling { d } => (factors.iter().map(|n| n.scaling(*d)).collect(), zero),
            Constraint::Fixed { index, value } => {
                if *index >= factors.len() {
                    return Err(Error::Domain(format!("constraint on factor {index} of {}", factors.len())));
                }
                let mut row = vec![zero; factors.len()];
                row[*index] = Rational::from_integer(1);
                (row, rat(*value)?)
            }
            Constraint::Linear { coeffs, rhs } => {
                if coeffs.len() != factors.len() {
                    return Err(Error::Domain(format!("{} coefficients for {} factors", coeffs.len(), factors.len())));
                }
                (coeffs.iter().map(|&c| rat(c)).collect::<Result<_>>()?, rat(*rhs)?)
            }
        })
    }
}

/// Exact solution of the constraint system for the exponents of `factors`.
pub fn solve_exponents(factors: &[Norm], constraints: &[Constraint]) -> Result<Vec<Rational>> {
    let n = factors.len();
    let mut rows: Vec<(Vec<Rational>, Rational)> = constraints.iter().map(|c| c.row(factors)).collect::<Result<_>>()?;
    let zero = Rational::from_integer(0);
    let mut pivot_cols = Vec::new();
    let mut rank = 0;
    for col in 0..n {
        let Some(p) = (rank..rows.len()).find(|&i| rows[i].0[col] != zero) else {
            continue;
        };
        rows.swap(rank, p);
        let inv = Rational::from_integer(1) / rows[rank].0[col];
        let (pr, pb) = {
            let (r, b) = &mut rows[rank];
            r.iter_mut().for_each(|x| *x *= inv);
            *b *= inv;
            (r.clone(), *b)
        };
        for (i, (r, b)) in rows.iter_mut().enumerate() {
            if i != rank && r[col] != zero {
                let f = r[col];
                r.iter_mut().zip(&pr).for_each(|(x, y)| *x -= f * y);
                *b -= f * pb;
            }
        }
        pivot_cols.push(col);
        rank += 1;
    }
    if let Some((_, b)) = rows[rank..].iter().find(|(_, b)| *b != zero) {
        return Err(Error::Inconsistent(format!(
            "constraints reduce to 0 = {b}; {rank} of {} are independent",
            constraints.len()
        )));
    }
    if rank < n {
        let free: Vec<&str> = (0..n).filter(|c| !pivot_cols.contains(c)).map(|c| factors[c].as_str()).collect();
        return Err(Error::RankDeficient(format!(
            "{rank} independent constraints for {n} exponents; undetermined: {}",
            free.join(", ")
        )));
    }
    let mut sol = vec![zero; n];
    for (i, &c) in pivot_cols.iter().enumerate() {
        sol[c] = rows[i].1;
    }
    Ok(sol)
}

/// Exponents `(α, β, γ)` of `‖ω/r‖_∞, ‖ω/r‖₁, ‖rω‖₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExponentTriple {
    pub alpha: Rational,
    pub beta: Rational,
    pub gamma: Rational,
}

pub const TRIPLE_FACTORS: [Norm; 3] = [Norm::RelvortLinf, Norm::RelvortL1, Norm::ROmegaL1];

pub fn solve_exponent_triple(constraints: &[Constraint]) -> Result<ExponentTriple> {
    let s = solve_exponents(&TRIPLE_FACTORS, constraints)?;
    Ok(ExponentTriple { alpha: s[0], beta: s[1], gamma: s[2] })
}

/// Check that `exponents` satisfy every constraint exactly.
pub fn satisfies(factors: &[Norm], constraints: &[Constraint], exponents: &[Rational]) -> Result<bool> {
    for c in constraints {
        let (row, b) = c.row(factors)?;
        let lhs: Rational = row.iter().zip(exponents).map(|(a, e)| a * e).sum();
        if lhs != b {
            return Ok(false);
        }
    }
    Ok(true)
}
