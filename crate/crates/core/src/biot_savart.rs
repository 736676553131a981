//! Velocity, radial-velocity probes and kinetic energy by direct summation
//! over the vortex elements, plus the full-space ring oracles.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{HalfPlanePoint, VorticityField};
use crate::kernels::{axis_fz, sphere_area, Dimension, EllipticKernel, KernelConstants, KernelMode, KernelSpec, KernelTable};
use crate::quadrature::{integrate, QuadSettings};
use crate::sum::{exact_sum, pairwise_reduce, ExactSum};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Velocity {
    pub ur: f64,
    pub uz: f64,
}

impl Velocity {
    pub fn norm(&self) -> f64 {
        self.ur.hypot(self.uz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMethod {
    StreamDoubleSum,
    GridQuadrature,
}

/// `‖u‖_{L²(ℝ^d)}` with the method that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyResult {
    pub value: f64,
    pub method: EnergyMethod,
    pub est_error: f64,
}

/// Per-source quantities hoisted out of the pair loop.
#[derive(Debug, Clone)]
pub(crate) struct SourceSet {
    r: Vec<f64>,
    z: Vec<f64>,
    inv_r: Vec<f64>,
    /// `Γ r̄^{d/2-2}`
    a: Vec<f64>,
    /// `Γ r̄^{d/2-1}`
    b: Vec<f64>,
    gamma: Vec<f64>,
}

impl SourceSet {
    pub(crate) fn from_positions(d: Dimension, pos: &[HalfPlanePoint], gamma: &[f64]) -> Self {
        let c = KernelConstants::new(d);
        let mut s = SourceSet { r: vec![], z: vec![], inv_r: vec![], a: vec![], b: vec![], gamma: vec![] };
        for (p, &g) in pos.iter().zip(gamma) {
            if p.r > 0.0 && g != 0.0 {
                let (_, p2, p1) = c.powers(p.r);
                s.r.push(p.r);
                s.z.push(p.z);
                s.inv_r.push(1.0 / p.r);
                s.a.push(g * p2);
                s.b.push(g * p1);
                s.gamma.push(g);
            }
        }
        s
    }

    pub(crate) fn from_field(field: &VorticityField) -> Self {
        let d = field.d();
        let pos: Vec<_> = field.elements().iter().map(|e| e.pos).collect();
        let gamma: Vec<_> = field.elements().iter().map(|e| e.circulation(d)).collect();
        Self::from_positions(d, &pos, &gamma)
    }

    fn len(&self) -> usize {
        self.r.len()
    }
}

/// Direct-summation Biot–Savart evaluator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiotSavart {
    pub mode: KernelMode,
}

impl BiotSavart {
    pub fn new(mode: KernelMode) -> Self {
        Self { mode }
    }

    pub fn tabulated() -> Self {
        Self::new(KernelMode::Tabulated)
    }

    pub fn kernel(&self, d: Dimension) -> EllipticKernel {
        EllipticKernel::new(d, self.mode)
    }

    /// Relative accuracy of one kernel evaluation in this mode.
    pub fn kernel_rel_error(&self) -> f64 {
        match self.mode {
            KernelMode::Quadrature => KernelSpec::DEFAULT_REL_TOL,
            KernelMode::Tabulated => 1e-8,
        }
    }

    pub(crate) fn velocity_from_sources(
        kernel: &EllipticKernel,
        c: &KernelConstants,
        src: &SourceSet,
        delta: f64,
        p: HalfPlanePoint,
    ) -> Velocity {
        let delta2 = delta * delta;
        if p.r == 0.0 {
            let [uz] = pairwise_reduce(src.len(), &|i| {
                let s = HalfPlanePoint::new(src.r[i], src.z[i]);
                [src.gamma[i] * axis_fz(c, p, s, delta)]
            });
            return Velocity { ur: 0.0, uz };
        }
        let inv = 1.0 / p.r;
        let m = c.m;
        let [sr, sza, szb] = pairwise_reduce(src.len(), &|i| {
            let dr = p.r - src.r[i];
            let dz = p.z - src.z[i];
            let num = dr * dr + dz * dz + delta2;
            if num == 0.0 {
                // coincident point vortex: excluded from the sum
                return [0.0; 3];
            }
            let s = num * (inv * src.inv_r[i]);
            let v = kernel.values(s);
            let afp = src.a[i] * v.fp;
            [afp * dz, afp * dr, src.b[i] * (m * v.f - s * v.fp)]
        });
        let (rt, _, _) = c.powers(p.r);
        Velocity { ur: -2.0 * c.k * rt * sr, uz: rt * c.k * (2.0 * sza + szb) }
    }

    /// Velocity induced by `field` at `p`.
    pub fn velocity_at(&self, field: &VorticityField, p: HalfPlanePoint) -> Result<Velocity> {
        Ok(self.velocities(field, &[p])?[0])
    }

    /// Velocities at many targets, evaluated in parallel over targets with a
    /// fixed per-target summation order.
    pub fn velocities(&self, field: &VorticityField, targets: &[HalfPlanePoint]) -> Result<Vec<Velocity>> {
        let src = SourceSet::from_field(field);
        self.velocities_from(field.d(), &src, field.delta(), targets)
    }

    pub(crate) fn velocities_from(
        &self,
        d: Dimension,
        src: &SourceSet,
        delta: f64,
        targets: &[HalfPlanePoint],
    ) -> Result<Vec<Velocity>> {
        let kernel = self.kernel(d);
        let c = KernelConstants::new(d);
        let out: Vec<Velocity> = targets
            .par_iter()
            .map(|&p| Self::velocity_from_sources(&kernel, &c, src, delta, p))
            .collect();
        if let Some(bad) = out.iter().position(|v| !(v.ur.is_finite() && v.uz.is_finite())) {
            return Err(Error::Singularity(format!("non-finite velocity at target {:?}", targets[bad])));
        }
        Ok(out)
    }

    /// `ψ(p) = ∬ G_d(p, ·) ω`.
    pub fn stream_function_at(&self, field: &VorticityField, p: HalfPlanePoint) -> Result<f64> {
        if p.r == 0.0 {
            return Ok(0.0);
        }
        let kernel = self.kernel(field.d());
        let d = field.d();
        let terms = field.elements().iter().filter(|e| e.pos.r > 0.0).map(|e| {
            let dr = p.r - e.pos.r;
            let dz = p.z - e.pos.z;
            let rr = p.r * e.pos.r;
            let s = (dr * dr + dz * dz + field.delta() * field.delta()) / rr;
            d.stream_constant() * rr.powf(d.bracket_power()) * kernel.values(s).f * e.circulation(d)
        });
        Ok(exact_sum(terms))
    }

    /// `sup_z |u^r(R, z)|` on a Chebyshev window around the vorticity
    /// centroid, refined once around the discrete maximum.
    pub fn max_radial_velocity_on_r(&self, field: &VorticityField, n_z: usize, z_window: f64) -> Result<f64> {
        Ok(self.radial_probe(field, n_z, z_window)?.max_ur)
    }

    pub fn radial_probe(&self, field: &VorticityField, n_z: usize, z_window: f64) -> Result<RadialProbe> {
        let src = SourceSet::from_field(field);
        self.radial_probe_from(field, &src, n_z, z_window)
    }

    pub(crate) fn radial_probe_from(
        &self,
        field: &VorticityField,
        src: &SourceSet,
        n_z: usize,
        z_window: f64,
    ) -> Result<RadialProbe> {
        if n_z < 16 {
            return Err(Error::Domain(format!("radial probe needs n_z >= 16, got {n_z}")));
        }
        if !(z_window > 0.0) {
            return Err(Error::Domain(format!("z window must be positive, got {z_window}")));
        }
        let radius = field.support_radius();
        if radius == 0.0 || src.len() == 0 {
            return Ok(RadialProbe { radius, z_at: field.centroid_z(), max_ur: 0.0 });
        }
        let zc = field.centroid_z();
        let mut nodes: Vec<f64> = (0..n_z)
            .map(|j| zc - z_window * (PI * (j as f64 + 0.5) / n_z as f64).cos())
            .collect();
        nodes.sort_by(f64::total_cmp);
        let eval = |zs: &[f64]| -> Result<Vec<f64>> {
            let pts: Vec<_> = zs.iter().map(|&z| HalfPlanePoint::new(radius, z)).collect();
            Ok(self.velocities_from(field.d(), src, field.delta(), &pts)?.iter().map(|v| v.ur.abs()).collect())
        };
        let coarse = eval(&nodes)?;
        let (jmax, &vmax) = coarse
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("n_z >= 16 nodes");
        let lo = nodes[jmax.saturating_sub(1)];
        let hi = nodes[(jmax + 1).min(n_z - 1)];
        let n_fine = n_z / 2;
        let fine_z: Vec<f64> = (1..=n_fine).map(|k| lo + (hi - lo) * k as f64 / (n_fine + 1) as f64).collect();
        let fine = eval(&fine_z)?;
        let mut best = RadialProbe { radius, z_at: nodes[jmax], max_ur: vmax };
        for (z, v) in fine_z.into_iter().zip(fine) {
            if v > best.max_ur {
                best = RadialProbe { radius, z_at: z, max_ur: v };
            }
        }
        Ok(best)
    }

    /// `‖u‖_{L²(ℝ^d)}` from `σ Σ_i Σ_j G_d(x_i, x_j; δ) Γ_i Γ_j`.
    pub fn kinetic_energy(&self, field: &VorticityField) -> Result<EnergyResult> {
        let d = field.d();
        let pos: Vec<_> = field.elements().iter().map(|e| e.pos).collect();
        let gamma: Vec<_> = field.elements().iter().map(|e| e.circulation(d)).collect();
        self.energy_from(d, &pos, &gamma, field.delta())
    }

    pub(crate) fn energy_from(&self, d: Dimension, pos: &[HalfPlanePoint], gamma: &[f64], delta: f64) -> Result<EnergyResult> {
        let kernel = self.kernel(d);
        let k = d.stream_constant();
        let delta2 = delta * delta;
        let pow = |rr: f64| match d.get() {
            3 => rr.sqrt(),
            4 => rr,
            5 => rr * rr.sqrt(),
            _ => rr * rr,
        };
        let n = pos.len();
        let rows: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let (pi, gi) = (pos[i], gamma[i]);
                let mut acc = ExactSum::new();
                if pi.r == 0.0 || gi == 0.0 {
                    return 0.0;
                }
                for j in i..n {
                    let (pj, gj) = (pos[j], gamma[j]);
                    if pj.r == 0.0 || gj == 0.0 {
                        continue;
                    }
                    let dr = pi.r - pj.r;
                    let dz = pi.z - pj.z;
                    let num = dr * dr + dz * dz + delta2;
                    if num == 0.0 {
                        continue;
                    }
                    let rr = pi.r * pj.r;
                    let g = pow(rr) * kernel.values(num / rr).f * (gi * gj);
                    acc.add(if j == i { g } else { 2.0 * g });
                }
                acc.total()
            })
            .collect();
        let sq = d.sigma() * k * exact_sum(rows);
        if !sq.is_finite() {
            return Err(Error::Singularity("non-finite energy double sum".into()));
        }
        if sq < 0.0 {
            return Err(Error::NegativeEnergy(sq));
        }
        Ok(EnergyResult { value: sq.sqrt(), method: EnergyMethod::StreamDoubleSum, est_error: self.kernel_rel_error() })
    }

    /// Midpoint-rule quadrature of `σ r^{d-2} |u|²` over
    /// `[0, box·R] × [z_c - box·R, z_c + box·R]` with `n_r × 2 n_r` cells.
    /// `est_error` is the relative far-field dipole tail outside the ball of
    /// radius `box·R`.
    pub fn kinetic_energy_grid(&self, field: &VorticityField, n_r: usize, box_factor: f64) -> Result<EnergyResult> {
        let radius = field.support_radius();
        if radius == 0.0 {
            return Ok(EnergyResult { value: 0.0, method: EnergyMethod::GridQuadrature, est_error: 0.0 });
        }
        let d = field.d();
        let half = box_factor * radius;
        let zc = field.centroid_z();
        let h = half / n_r as f64;
        let n_z = 2 * n_r;
        let pts: Vec<HalfPlanePoint> = (0..n_r)
            .flat_map(|i| (0..n_z).map(move |j| HalfPlanePoint::new((i as f64 + 0.5) * h, zc - half + (j as f64 + 0.5) * h)))
            .collect();
        let vel = self.velocities(field, &pts)?;
        let dm2 = d.get() as i32 - 2;
        let sq = d.sigma() * h * h * exact_sum(pts.iter().zip(&vel).map(|(p, v)| p.r.powi(dm2) * (v.ur * v.ur + v.uz * v.uz)));

        // Far field of compactly supported vorticity: ψ ≈ C r^{d-1}/ρ^d, whose
        // energy outside radius L is C² |S^{d-1}| (d-1) / (d L^d).
        let c = KernelConstants::new(d);
        let moment = exact_sum(field.elements().iter().map(|e| e.circulation(d) * e.pos.r.powi(d.get() as i32 - 1)));
        let c_far = c.axis / (d.as_f64() - 1.0) * moment;
        let tail = c_far * c_far * sphere_area(d.get() - 1) * (d.as_f64() - 1.0) / (d.as_f64() * half.powi(d.get() as i32));
        Ok(EnergyResult {
            value: sq.sqrt(),
            method: EnergyMethod::GridQuadrature,
            est_error: if sq > 0.0 { tail / sq } else { 0.0 },
        })
    }
}

/// Location and value of the largest `|u^r|` on the line `r = R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialProbe {
    pub radius: f64,
    pub z_at: f64,
    pub max_ur: f64,
}

/// Default half-width of the `z` window: `max(3R, 5 × vertical extent)`.
pub fn default_z_window(field: &VorticityField) -> f64 {
    let radius = field.support_radius();
    let extent = field.support_box().map(|(_, _, lo, hi)| hi - lo).unwrap_or(0.0);
    (3.0 * radius).max(5.0 * extent).max(f64::MIN_POSITIVE)
}

/// Velocity of a singular circular filament in ℝ³ by trapezoid quadrature
/// of `u = Γ/(4π) ∮ dl × (x - y) / |x - y|³`.
pub fn oracle_3d_ring_velocity(ring_r: f64, ring_z: f64, circulation: f64, p: HalfPlanePoint, n_phi: usize) -> Result<Velocity> {
    if n_phi < 64 {
        return Err(Error::Domain(format!("oracle needs n_phi >= 64, got {n_phi}")));
    }
    if p.r == ring_r && p.z == ring_z {
        return Err(Error::Singularity("target lies on the filament".into()));
    }
    let x = [p.r, 0.0, p.z];
    let dphi = 2.0 * PI / n_phi as f64;
    let mut ux = ExactSum::new();
    let mut uz = ExactSum::new();
    for k in 0..n_phi {
        let (sn, cs) = (k as f64 * dphi).sin_cos();
        let y = [ring_r * cs, ring_r * sn, ring_z];
        let dl = [-ring_r * sn * dphi, ring_r * cs * dphi, 0.0];
        let sep = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
        let dist2 = sep[0] * sep[0] + sep[1] * sep[1] + sep[2] * sep[2];
        let inv3 = 1.0 / (dist2 * dist2.sqrt());
        let cross = [dl[1] * sep[2] - dl[2] * sep[1], dl[2] * sep[0] - dl[0] * sep[2], dl[0] * sep[1] - dl[1] * sep[0]];
        ux.add(cross[0] * inv3);
        uz.add(cross[2] * inv3);
    }
    let scale = circulation / (4.0 * PI);
    let ur = if p.r == 0.0 { 0.0 } else { scale * ux.total() };
    Ok(Velocity { ur, uz: scale * uz.total() })
}

/// Velocity of a singular ring in ℝ^d from the full-space kernel
/// `u_j = ∫ (x - y)_i Ω_ij(y) / (|S^{d-1}| |x - y|^d) dy`, reduced to one
/// angle on the ring sphere `S^{d-2}`.
pub fn oracle_ring_velocity_nd(d: Dimension, ring_r: f64, ring_z: f64, circulation: f64, p: HalfPlanePoint) -> Result<Velocity> {
    if p.r == ring_r && p.z == ring_z {
        return Err(Error::Singularity("target lies on the ring".into()));
    }
    let dim = d.get();
    let dz = p.z - ring_z;
    let dist = |a: f64| (p.r * p.r + ring_r * ring_r - 2.0 * p.r * ring_r * a.cos() + dz * dz).powf(dim as f64 / 2.0);
    let jac = |a: f64| a.sin().powi(dim as i32 - 3);
    let settings = QuadSettings { rel_tol: 1e-12, abs_tol: 1e-300, max_panels: 20_000 };
    let pts = [0.0, PI / 4.0, PI / 2.0, PI];
    let iz = integrate(|a| (p.r * a.cos() - ring_r) * jac(a) / dist(a), &pts, settings)?.value;
    let scale = circulation * ring_r.powi(dim as i32 - 2) * sphere_area(dim - 3) / sphere_area(dim - 1);
    // on the axis the radial integrand is odd about π/2
    let ur = if p.r == 0.0 { 0.0 } else { scale * dz * integrate(|a| a.cos() * jac(a) / dist(a), &pts, settings)?.value };
    Ok(Velocity { ur, uz: -scale * iz })
}

/// Ensure the shared kernel table for `d` exists (used to keep table
/// construction out of timing-sensitive loops).
pub fn warm_kernel_table(d: Dimension) {
    let _ = KernelTable::shared(d);
}
