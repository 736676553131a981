//! Lagrangian transport of `q = ω / r^{d-2}` and per-step diagnostics.
//!
//! Elements move with the induced velocity; `q` is never modified. The flow
//! preserves the measure `r^{d-2} dr dz`, so each element keeps its weight
//! `r^{d-2} · area` and hence its circulation `ω · area`; the half-plane area
//! is updated from the new radius.

use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::biot_savart::{default_z_window, BiotSavart, SourceSet, Velocity};
use crate::error::{Error, Result};
use crate::field::{HalfPlanePoint, VortexElement, VorticityField};
use crate::kernels::{Dimension, KernelMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
    Rk2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default = "default_diag_every")]
    pub diag_every: usize,
    /// Blob length; `None` keeps the initial field's value.
    #[serde(default)]
    pub delta: Option<f64>,
    pub d: Dimension,
    #[serde(default)]
    pub kernel: KernelMode,
    /// Chebyshev nodes of the `u^r(R, ·)` probe.
    #[serde(default = "default_probe_nz")]
    pub probe_nz: usize,
}

fn default_diag_every() -> usize {
    1
}

fn default_probe_nz() -> usize {
    64
}

impl SimConfig {
    pub fn new(d: Dimension, dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            integrator: Integrator::Rk4,
            diag_every: 1,
            delta: None,
            d,
            kernel: KernelMode::Quadrature,
            probe_nz: default_probe_nz(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidConfig(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if self.diag_every == 0 {
            return Err(Error::InvalidConfig("diag_every must be >= 1".into()));
        }
        if let Some(delta) = self.delta {
            if !(delta >= 0.0) {
                return Err(Error::InvalidConfig(format!("delta must be >= 0, got {delta}")));
            }
        }
        if self.probe_nz < 16 {
            return Err(Error::InvalidConfig("probe_nz must be >= 16".into()));
        }
        Ok(())
    }
}

/// Time step obeying `max|u| · dt < 0.2 × spacing`.
pub fn cfl_time_step(max_speed: f64, spacing: f64) -> f64 {
    if max_speed > 0.0 {
        0.2 * spacing / max_speed
    } else {
        f64::INFINITY
    }
}

/// One row of the diagnostics stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub R: f64,
    pub omega_max: f64,
    pub relvort_L1: f64,
    pub relvort_Linf: f64,
    pub r_omega_L1: f64,
    pub energy: f64,
    pub I_r2: f64,
    pub I_z: f64,
    pub L: f64,
    pub max_ur: f64,
}

pub const DIAGNOSTICS_HEADER: &str = "t,R,omega_max,relvort_L1,relvort_Linf,r_omega_L1,energy,I_r2,I_z,L,max_ur";

impl DiagnosticsRecord {
    pub fn values(&self) -> [f64; 11] {
        [
            self.t,
            self.R,
            self.omega_max,
            self.relvort_L1,
            self.relvort_Linf,
            self.r_omega_L1,
            self.energy,
            self.I_r2,
            self.I_z,
            self.L,
            self.max_ur,
        ]
    }

    pub fn from_values(v: [f64; 11]) -> Self {
        Self {
            t: v[0],
            R: v[1],
            omega_max: v[2],
            relvort_L1: v[3],
            relvort_Linf: v[4],
            r_omega_L1: v[5],
            energy: v[6],
            I_r2: v[7],
            I_z: v[8],
            L: v[9],
            max_ur: v[10],
        }
    }
}

pub fn write_diagnostics_csv<W: Write>(mut w: W, records: &[DiagnosticsRecord]) -> Result<()> {
    writeln!(w, "{DIAGNOSTICS_HEADER}")?;
    for rec in records {
        let row: Vec<String> = rec.values().iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_diagnostics_csv<R: std::io::Read>(r: R) -> Result<Vec<DiagnosticsRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != DIAGNOSTICS_HEADER {
        return Err(Error::InvalidConfig(format!("unexpected diagnostics header {header:?}")));
    }
    rd.deserialize::<[f64; 11]>()
        .map(|row| Ok(DiagnosticsRecord::from_values(row?)))
        .collect()
}

/// Explicit Runge–Kutta stepper over the element positions.
#[derive(Debug, Clone, Copy)]
pub struct Stepper {
    pub solver: BiotSavart,
    pub integrator: Integrator,
}

fn positions(field: &VorticityField) -> Vec<HalfPlanePoint> {
    field.elements().iter().map(|e| e.pos).collect()
}

fn displaced(base: &[HalfPlanePoint], k: &[Velocity], h: f64) -> Vec<HalfPlanePoint> {
    base.iter().zip(k).map(|(p, v)| HalfPlanePoint::new(p.r + h * v.ur, p.z + h * v.uz)).collect()
}

impl Stepper {
    pub fn new(solver: BiotSavart, integrator: Integrator) -> Self {
        Self { solver, integrator }
    }

    fn velocities(&self, d: Dimension, pos: &[HalfPlanePoint], gamma: &[f64], delta: f64) -> Result<Vec<Velocity>> {
        let src = SourceSet::from_positions(d, pos, gamma);
        self.solver.velocities_from(d, &src, delta, pos)
    }

    /// Element velocities of `field` at its own positions.
    pub fn element_velocities(&self, field: &VorticityField) -> Result<Vec<Velocity>> {
        let d = field.d();
        let gamma: Vec<f64> = field.elements().iter().map(|e| e.circulation(d)).collect();
        self.velocities(d, &positions(field), &gamma, field.delta())
    }

    /// Advance by `dt > 0`.
    pub fn step(&self, field: &VorticityField, dt: f64) -> Result<VorticityField> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        self.advance(field, dt, None)
    }

    /// Advance by a signed `dt`; negative values integrate the time-reversed
    /// flow. `k1` may carry the velocities at the current positions.
    pub fn advance(&self, field: &VorticityField, dt: f64, k1: Option<&[Velocity]>) -> Result<VorticityField> {
        let d = field.d();
        let delta = field.delta();
        let x0 = positions(field);
        let gamma: Vec<f64> = field.elements().iter().map(|e| e.circulation(d)).collect();
        let k1 = match k1 {
            Some(k) => k.to_vec(),
            None => self.velocities(d, &x0, &gamma, delta)?,
        };
        let x1: Vec<HalfPlanePoint> = match self.integrator {
            Integrator::Rk2 => {
                let k2 = self.velocities(d, &displaced(&x0, &k1, 0.5 * dt), &gamma, delta)?;
                displaced(&x0, &k2, dt)
            }
            Integrator::Rk4 => {
                let k2 = self.velocities(d, &displaced(&x0, &k1, 0.5 * dt), &gamma, delta)?;
                let k3 = self.velocities(d, &displaced(&x0, &k2, 0.5 * dt), &gamma, delta)?;
                let k4 = self.velocities(d, &displaced(&x0, &k3, dt), &gamma, delta)?;
                (0..x0.len())
                    .map(|i| {
                        let ur = k1[i].ur + 2.0 * k2[i].ur + 2.0 * k3[i].ur + k4[i].ur;
                        let uz = k1[i].uz + 2.0 * k2[i].uz + 2.0 * k3[i].uz + k4[i].uz;
                        HalfPlanePoint::new(x0[i].r + dt / 6.0 * ur, x0[i].z + dt / 6.0 * uz)
                    })
                    .collect()
            }
        };
        let dm2 = d.get() as i32 - 2;
        let elements = field
            .elements()
            .iter()
            .zip(x1)
            .map(|(e, mut p)| {
                if p.r < 0.0 {
                    warn!("element crossed the axis (r = {:e}); clamped to r = 0", p.r);
                    p.r = 0.0;
                }
                let area = if p.r > 0.0 && e.pos.r > 0.0 { e.area * (e.pos.r / p.r).powi(dm2) } else { e.area };
                VortexElement { pos: p, q: e.q, area }
            })
            .collect();
        Ok(field.with_elements(elements))
    }
}

/// Record of one snapshot given the running length function and sup `|u^r|`.
pub fn diagnostics(
    solver: &BiotSavart,
    field: &VorticityField,
    t: f64,
    length: f64,
    max_ur: f64,
) -> Result<DiagnosticsRecord> {
    let (i_r2, i_z) = field.half_plane_moments();
    Ok(DiagnosticsRecord {
        t,
        R: field.support_radius(),
        omega_max: field.omega_max(),
        relvort_L1: field.lp_norm_rel_vort(1.0)?,
        relvort_Linf: field.lp_norm_rel_vort(f64::INFINITY)?,
        r_omega_L1: field.weighted_l1(1)?,
        energy: solver.kinetic_energy(field)?.value,
        I_r2: i_r2,
        I_z: i_z,
        L: length,
        max_ur,
    })
}

/// `max(sup over elements of |u^r|, sup_z |u^r(R, z)|)`.
fn sup_radial(solver: &BiotSavart, field: &VorticityField, k: &[Velocity], probe_nz: usize) -> Result<f64> {
    let elem = k.iter().fold(0.0f64, |m, v| m.max(v.ur.abs()));
    let src = SourceSet::from_field(field);
    let probe = solver.radial_probe_from(field, &src, probe_nz, default_z_window(field))?;
    Ok(elem.max(probe.max_ur))
}

/// Integrate to `t_end`, emitting a record at `t = 0`, every `diag_every`
/// steps, and at the final time. `L(t) = 1 + ∫ sup|u^r|` is accumulated with
/// the trapezoid rule at every step.
pub fn run_simulation(initial: &VorticityField, cfg: &SimConfig) -> Result<Vec<DiagnosticsRecord>> {
    cfg.validate()?;
    if initial.d() != cfg.d {
        return Err(Error::InvalidConfig(format!("config d = {} but field d = {}", cfg.d, initial.d())));
    }
    if initial.is_empty() {
        return Err(Error::EmptyField);
    }
    let mut field = match cfg.delta {
        Some(delta) => initial.with_delta(delta)?,
        None => initial.clone(),
    };
    let solver = BiotSavart::new(cfg.kernel);
    let stepper = Stepper::new(solver, cfg.integrator);
    let n_steps = (cfg.t_end / cfg.dt - 1e-9).ceil().max(0.0) as usize;

    let mut t = 0.0;
    let mut length = 1.0;
    let mut k = stepper.element_velocities(&field).map_err(|_| Error::NonFinite { t, last_valid: None })?;
    let mut sup = sup_radial(&solver, &field, &k, cfg.probe_nz)?;
    let mut records = vec![diagnostics(&solver, &field, t, length, sup)?];

    for step in 1..=n_steps {
        let dt = if step == n_steps { cfg.t_end - t } else { cfg.dt };
        let last_valid = || Some(Box::new(*records.last().expect("t = 0 record")));
        let next = stepper.advance(&field, dt, Some(&k)).map_err(|_| Error::NonFinite { t, last_valid: last_valid() })?;
        let t_next = if step == n_steps { cfg.t_end } else { t + dt };
        k = stepper
            .element_velocities(&next)
            .map_err(|_| Error::NonFinite { t: t_next, last_valid: last_valid() })?;
        let sup_next = sup_radial(&solver, &next, &k, cfg.probe_nz)?;
        length += 0.5 * dt * (sup + sup_next);
        field = next;
        t = t_next;
        sup = sup_next;
        if step % cfg.diag_every == 0 || step == n_steps {
            records.push(diagnostics(&solver, &field, t, length, sup)?);
        }
    }
    Ok(records)
}

/// Final field of a run, without diagnostics (used by convergence studies).
pub fn evolve(initial: &VorticityField, stepper: &Stepper, dt: f64, n_steps: usize) -> Result<VorticityField> {
    let mut field = initial.clone();
    for _ in 0..n_steps {
        field = stepper.advance(&field, dt, None)?;
    }
    Ok(field)
}

/// Worst ratios of the two pathwise claim bounds
/// `‖rω‖₁ ≤ (‖ω₀/r‖₁ + ‖rω₀‖₁) L²` and `‖ω‖_∞ ≤ (‖ω₀/r‖_∞ + ‖ω₀‖_∞) L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaimReport {
    pub max_ratio_r_omega_l1: f64,
    pub max_ratio_omega_linf: f64,
    pub tol: f64,
    pub pass: bool,
}

pub const CLAIM_TOL: f64 = 1e-6;

pub fn check_claim_bounds(series: &[DiagnosticsRecord], initial: &VorticityField) -> Result<ClaimReport> {
    if initial.d() != Dimension::D3 {
        return Err(Error::RequiresThreeDimensions { op: "check_claim_bounds", d: initial.d().get() });
    }
    let c1 = initial.lp_norm_rel_vort(1.0)? + initial.weighted_l1(1)?;
    let c2 = initial.lp_norm_rel_vort(f64::INFINITY)? + initial.omega_max();
    let ratio = |lhs: f64, rhs: f64| if lhs == 0.0 { 0.0 } else { lhs / rhs };
    let mut r1: f64 = 0.0;
    let mut r2: f64 = 0.0;
    for rec in series {
        r1 = r1.max(ratio(rec.r_omega_L1, c1 * rec.L * rec.L));
        r2 = r2.max(ratio(rec.omega_max, c2 * rec.L));
    }
    Ok(ClaimReport {
        max_ratio_r_omega_l1: r1,
        max_ratio_omega_linf: r2,
        tol: CLAIM_TOL,
        pass: r1 <= 1.0 + CLAIM_TOL && r2 <= 1.0 + CLAIM_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_single_ring, RingParams};

    fn small_ring() -> VorticityField {
        make_single_ring(
            Dimension::D3,
            &RingParams { center: HalfPlanePoint::new(1.0, 0.0), radius: 0.2, amplitude: 5.0, resolution: 6 },
            None,
        )
        .unwrap()
    }

    #[test]
    fn q_is_never_modified() {
        let f = small_ring();
        let st = Stepper::new(BiotSavart::tabulated(), Integrator::Rk4);
        let g = evolve(&f, &st, 0.05, 3).unwrap();
        for (a, b) in f.elements().iter().zip(g.elements()) {
            assert_eq!(a.q.to_bits(), b.q.to_bits());
        }
        // circulation and r^{d-2}·area are carried along
        let d = f.d();
        for (a, b) in f.elements().iter().zip(g.elements()) {
            assert!((a.circulation(d) - b.circulation(d)).abs() <= 1e-14 * a.circulation(d).abs());
        }
    }

    #[test]
    fn step_rejects_nonpositive_dt() {
        let st = Stepper::new(BiotSavart::tabulated(), Integrator::Rk2);
        assert!(st.step(&small_ring(), 0.0).is_err());
        assert!(st.step(&small_ring(), -0.1).is_err());
    }

    #[test]
    fn zero_field_run_is_static() {
        let f = small_ring();
        let zero = f.with_elements(f.elements().iter().map(|e| VortexElement { q: 0.0, ..*e }).collect());
        let mut cfg = SimConfig::new(Dimension::D3, 0.1, 0.5);
        cfg.kernel = KernelMode::Tabulated;
        let recs = run_simulation(&zero, &cfg).unwrap();
        assert_eq!(recs.len(), 6);
        for r in &recs {
            assert_eq!(r.L, 1.0);
            assert_eq!(r.R, 0.0);
            assert_eq!(r.energy, 0.0);
            assert_eq!(r.max_ur, 0.0);
        }
        assert!(check_claim_bounds(&recs, &zero).unwrap().pass);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimConfig::new(Dimension::D3, 0.1, 1.0);
        assert!(cfg.validate().is_ok());
        cfg.diag_every = 0;
        assert!(cfg.validate().is_err());
        let cfg = SimConfig::new(Dimension::D3, -0.1, 1.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn diagnostics_csv_round_trip() {
        let rec = DiagnosticsRecord::from_values([0.1, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 1.5, 0.3]);
        let mut buf = Vec::new();
        write_diagnostics_csv(&mut buf, &[rec, rec]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(DIAGNOSTICS_HEADER));
        let back = read_diagnostics_csv(buf.as_slice()).unwrap();
        assert_eq!(back, vec![rec, rec]);
    }

    #[test]
    fn first_record_satisfies_claims() {
        let f = small_ring();
        let solver = BiotSavart::tabulated();
        let rec = diagnostics(&solver, &f, 0.0, 1.0, 0.0).unwrap();
        let rep = check_claim_bounds(&[rec], &f).unwrap();
        assert!(rep.max_ratio_r_omega_l1 <= 1.0 && rep.max_ratio_omega_linf <= 1.0);
    }

    fn max_displacement(a: &VorticityField, b: &VorticityField) -> f64 {
        a.elements()
            .iter()
            .zip(b.elements())
            .map(|(x, y)| (x.pos.r - y.pos.r).hypot(x.pos.z - y.pos.z))
            .fold(0.0, f64::max)
    }

    #[test]
    fn rk4_time_reversal_is_fourth_order() {
        let f = small_ring();
        let st = Stepper::new(BiotSavart::tabulated(), Integrator::Rk4);
        let mut errs = Vec::new();
        for &n in &[2usize, 4] {
            let dt = 2.0 / n as f64;
            let fwd = evolve(&f, &st, dt, n).unwrap();
            let back = evolve(&fwd, &st, -dt, n).unwrap();
            errs.push(max_displacement(&f, &back));
        }
        let slope = (errs[0] / errs[1]).log2();
        assert!(slope > 3.5, "errors {errs:?}, slope {slope}");
    }

    fn ring_radius(f: &VorticityField) -> f64 {
        let d = f.d();
        let w: f64 = f.elements().iter().map(|e| e.circulation(d).abs()).sum();
        f.elements().iter().map(|e| e.circulation(d).abs() * e.pos.r).sum::<f64>() / w
    }

    #[test]
    fn single_ring_keeps_its_radius() {
        let f = small_ring();
        let st = Stepper::new(BiotSavart::tabulated(), Integrator::Rk4);
        let r0 = ring_radius(&f);
        let mut g = f.clone();
        for _ in 0..8 {
            g = st.step(&g, 0.25).unwrap();
            assert!((ring_radius(&g) - r0).abs() / r0 < 0.01, "ring radius {}", ring_radius(&g));
        }
        // the ring translates along the axis
        assert!((g.centroid_z() - f.centroid_z()).abs() > 1e-3);
    }
}
