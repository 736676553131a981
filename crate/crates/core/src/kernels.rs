//! Elliptic integrals `F_(d)` and the axisymmetric Biot–Savart kernels.
//!
//! The `d`-dimensional elliptic integral is
//!
//! ```text
//! F_(d)(s) = ∫_0^π cos α sin^{d-3} α [2(1 - cos α) + s]^{-(d/2 - 1)} dα,   s > 0
//! ```
//!
//! and its `ℓ`-th derivative is obtained by differentiating under the
//! integral sign. Because `∫ cos α sin^{d-3} α dα = 0`, the constant
//! `(2 + s)^{-p}` can be subtracted from the bracket without changing the
//! value; the resulting integrand is non-negative on `[0, π]`, which removes
//! the catastrophic cancellation that otherwise appears for large `s`.
//!
//! Velocities follow from the stream kernel
//! `G_d = K_d (r r̄)^{d/2-1} F_(d)(s)`, `K_d = |S^{d-3}| / ((d-2)|S^{d-1}|)`,
//! through `u^r = -r^{2-d} ∂_z ψ` and `u^z = r^{2-d} ∂_r ψ`. At `d = 3` this
//! gives `K_3 = 1/(2π)` and reproduces the classical Feng–Šverák forms.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::HalfPlanePoint;
use crate::quadrature::{integrate, QuadSettings};

/// Spatial dimension of the axisymmetric flow, restricted to `3..=6`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Dimension(u32);

impl Dimension {
    pub const D3: Dimension = Dimension(3);

    pub fn new(d: u32) -> Result<Self> {
        if (3..=6).contains(&d) {
            Ok(Self(d))
        } else {
            Err(Error::UnsupportedDimension(d))
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    fn index(self) -> usize {
        (self.0 - 3) as usize
    }

    /// Exponent `d/2 - 1` of the bracket in `F_(d)`.
    pub fn bracket_power(self) -> f64 {
        self.as_f64() / 2.0 - 1.0
    }

    /// Area of the unit sphere `S^{d-2}` swept by one half-plane point.
    pub fn sigma(self) -> f64 {
        sphere_area(self.0 - 2)
    }

    /// Prefactor `K_d` of the stream kernel.
    pub fn stream_constant(self) -> f64 {
        let d = self.0;
        sphere_area(d - 3) / ((d as f64 - 2.0) * sphere_area(d - 1))
    }
}

impl TryFrom<u32> for Dimension {
    type Error = Error;
    fn try_from(d: u32) -> Result<Self> {
        Dimension::new(d)
    }
}

impl From<Dimension> for u32 {
    fn from(d: Dimension) -> u32 {
        d.0
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Surface area of the unit sphere `S^n ⊂ ℝ^{n+1}` (`|S^0| = 2`).
pub fn sphere_area(n: u32) -> f64 {
    match n {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 1.0) * sphere_area(n - 2),
    }
}

/// Which derivative of `F_(d)` to evaluate, and how accurately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub d: Dimension,
    pub ell: u32,
    pub quad_rel_tol: f64,
}

impl KernelSpec {
    pub const DEFAULT_REL_TOL: f64 = 1e-10;

    pub fn new(d: Dimension, ell: u32) -> Self {
        Self { d, ell, quad_rel_tol: Self::DEFAULT_REL_TOL }
    }

    pub fn with_tolerance(mut self, quad_rel_tol: f64) -> Result<Self> {
        if !(quad_rel_tol > 0.0 && quad_rel_tol < 1e-3) {
            return Err(Error::Domain(format!("quad_rel_tol must lie in (0, 1e-3), got {quad_rel_tol}")));
        }
        self.quad_rel_tol = quad_rel_tol;
        Ok(self)
    }

    /// `c_ℓ = (-1)^ℓ ∏_{j<ℓ} (d/2 - 1 + j)`.
    pub fn derivative_factor(&self) -> f64 {
        let m = self.d.bracket_power();
        let prod: f64 = (0..self.ell).map(|j| m + j as f64).product();
        if self.ell % 2 == 0 {
            prod
        } else {
            -prod
        }
    }
}

fn reduced_integrand(d: u32, p: f64, s: f64, alpha: f64) -> f64 {
    let (sin_a, cos_a) = alpha.sin_cos();
    let half = (0.5 * alpha).sin();
    let a = 4.0 * half * half + s;
    let b = 2.0 + s;
    // a^{-p} - b^{-p}, with a - b = -2 cos α
    let diff = -a.powf(-p) * (p * (-2.0 * cos_a / b).ln_1p()).exp_m1();
    cos_a * sin_a.powi(d as i32 - 3) * diff
}

fn breakpoints(s: f64) -> Vec<f64> {
    let mut pts = vec![0.0];
    let mut x = s.sqrt();
    while x < PI {
        pts.push(x);
        x *= 2.0;
    }
    pts.push(PI);
    pts
}

/// `F_(d)^{(ℓ)}(s)` by adaptive quadrature of the differentiated integrand.
pub fn elliptic_f(spec: &KernelSpec, s: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("elliptic integral needs finite s > 0, got {s}")));
    }
    let d = spec.d.get();
    let p = spec.d.bracket_power() + spec.ell as f64;
    let settings = QuadSettings { rel_tol: spec.quad_rel_tol, ..QuadSettings::default() };
    let r = integrate(|a| reduced_integrand(d, p, s, a), &breakpoints(s), settings)?;
    Ok(spec.derivative_factor() * r.value)
}

/// `F_(d)` and `F'_(d)` at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValues {
    pub f: f64,
    pub fp: f64,
}

/// Log-spaced table of `F`, `F'` and their derivatives, interpolated with
/// cubic Hermite polynomials in `x = ln s`.
#[derive(Debug)]
pub struct KernelTable {
    d: Dimension,
    x_min: f64,
    inv_h: f64,
    h: f64,
    // per node: [F, s F', F', s F'']
    nodes: Vec<[f64; 4]>,
}

impl KernelTable {
    pub const X_MIN: f64 = -32.0;
    pub const X_MAX: f64 = 32.0;
    pub const STEP: f64 = 1.0 / 128.0;
    const BUILD_TOL: f64 = 1e-12;

    pub fn build(d: Dimension) -> Result<Self> {
        let n = ((Self::X_MAX - Self::X_MIN) / Self::STEP).round() as usize + 1;
        let spec0 = KernelSpec { d, ell: 0, quad_rel_tol: Self::BUILD_TOL };
        let spec1 = KernelSpec { ell: 1, ..spec0 };
        let spec2 = KernelSpec { ell: 2, ..spec0 };
        let nodes = (0..n)
            .map(|i| {
                let s = (Self::X_MIN + i as f64 * Self::STEP).exp();
                let f = elliptic_f(&spec0, s)?;
                let fp = elliptic_f(&spec1, s)?;
                let fpp = elliptic_f(&spec2, s)?;
                Ok([f, s * fp, fp, s * fpp])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { d, x_min: Self::X_MIN, inv_h: 1.0 / Self::STEP, h: Self::STEP, nodes })
    }

    /// Shared immutable table for dimension `d`, built on first use.
    pub fn shared(d: Dimension) -> &'static KernelTable {
        static TABLES: [OnceLock<KernelTable>; 4] = [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
        TABLES[d.index()].get_or_init(|| KernelTable::build(d).expect("kernel table quadrature converges on its grid"))
    }

    pub fn dimension(&self) -> Dimension {
        self.d
    }

    /// Interpolated values, or `None` outside the tabulated range.
    #[inline]
    pub fn lookup(&self, s: f64) -> Option<KernelValues> {
        let t = (s.ln() - self.x_min) * self.inv_h;
        if !(t >= 0.0) {
            return None;
        }
        let i = t as usize;
        if i + 1 >= self.nodes.len() {
            return None;
        }
        let u = t - i as f64;
        let a = &self.nodes[i];
        let b = &self.nodes[i + 1];
        let u2 = u * u;
        let u3 = u2 * u;
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = (u3 - 2.0 * u2 + u) * self.h;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = (u3 - u2) * self.h;
        Some(KernelValues {
            f: h00 * a[0] + h10 * a[1] + h01 * b[0] + h11 * b[1],
            fp: h00 * a[2] + h10 * a[3] + h01 * b[2] + h11 * b[3],
        })
    }
}

/// How `F` and `F'` are evaluated inside kernel sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    /// Direct adaptive quadrature at every call.
    #[default]
    Quadrature,
    /// Hermite-interpolated table (validated against quadrature to 1e-8);
    /// arguments outside the table fall back to quadrature.
    Tabulated,
}

/// Evaluator for `(F_(d), F'_(d))` in a chosen mode.
#[derive(Debug, Clone, Copy)]
pub struct EllipticKernel {
    d: Dimension,
    rel_tol: f64,
    table: Option<&'static KernelTable>,
}

impl EllipticKernel {
    pub fn new(d: Dimension, mode: KernelMode) -> Self {
        let table = match mode {
            KernelMode::Quadrature => None,
            KernelMode::Tabulated => Some(KernelTable::shared(d)),
        };
        Self { d, rel_tol: KernelSpec::DEFAULT_REL_TOL, table }
    }

    pub fn quadrature(d: Dimension) -> Self {
        Self::new(d, KernelMode::Quadrature)
    }

    pub fn tabulated(d: Dimension) -> Self {
        Self::new(d, KernelMode::Tabulated)
    }

    pub fn dimension(&self) -> Dimension {
        self.d
    }

    pub fn mode(&self) -> KernelMode {
        if self.table.is_some() {
            KernelMode::Tabulated
        } else {
            KernelMode::Quadrature
        }
    }

    /// `(F, F')` at `s`; a non-convergent quadrature is reported as NaN so
    /// that it propagates to callers of the summation loops.
    #[inline]
    pub fn values(&self, s: f64) -> KernelValues {
        if let Some(v) = self.table.and_then(|t| t.lookup(s)) {
            return v;
        }
        self.direct(s).unwrap_or(KernelValues { f: f64::NAN, fp: f64::NAN })
    }

    pub fn try_values(&self, s: f64) -> Result<KernelValues> {
        if let Some(v) = self.table.and_then(|t| t.lookup(s)) {
            return Ok(v);
        }
        self.direct(s)
    }

    fn direct(&self, s: f64) -> Result<KernelValues> {
        let spec = KernelSpec { d: self.d, ell: 0, quad_rel_tol: self.rel_tol };
        let f = elliptic_f(&spec, s)?;
        let fp = elliptic_f(&KernelSpec { ell: 1, ..spec }, s)?;
        Ok(KernelValues { f, fp })
    }
}

/// Dimension-dependent constants of the velocity kernels.
#[derive(Debug, Clone, Copy)]
pub(crate) struct KernelConstants {
    pub d: u32,
    pub m: f64,
    pub k: f64,
    /// `2 m K_d ∫_0^π sin^{d-3} α dα`: on-axis prefactor of `u^z`.
    pub axis: f64,
}

impl KernelConstants {
    pub fn new(d: Dimension) -> Self {
        let m = d.bracket_power();
        let k = d.stream_constant();
        let wallis = sphere_area(d.get() - 2) / sphere_area(d.get() - 3);
        Self { d: d.get(), m, k, axis: 2.0 * m * k * wallis }
    }

    /// `r^{-d/2}`, `r^{d/2-2}`, `r^{d/2-1}` without `powf` for the common cases.
    #[inline]
    pub fn powers(&self, r: f64) -> (f64, f64, f64) {
        let sq = r.sqrt();
        match self.d {
            3 => (1.0 / (r * sq), 1.0 / sq, sq),
            4 => (1.0 / (r * r), 1.0, r),
            5 => (1.0 / (r * r * sq), sq, r * sq),
            _ => (1.0 / (r * r * r), r, r * r),
        }
    }
}

fn check_points(target: HalfPlanePoint, source: HalfPlanePoint, delta: f64) -> Result<()> {
    if !(target.r >= 0.0 && source.r >= 0.0) {
        return Err(Error::Domain("half-plane points need r >= 0".into()));
    }
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("blob length must be >= 0, got {delta}")));
    }
    if delta == 0.0 && target == source {
        return Err(Error::Singularity(format!("coincident points {target:?} with zero blob length")));
    }
    Ok(())
}

/// Regularized argument `s = (D² + δ²)/(r r̄)`.
#[inline]
pub fn regularized_argument(target: HalfPlanePoint, source: HalfPlanePoint, delta: f64) -> f64 {
    let dr = target.r - source.r;
    let dz = target.z - source.z;
    (dr * dr + dz * dz + delta * delta) / (target.r * source.r)
}

/// Radial kernel `F^r_(d)`: `u^r(x) = ∬ F^r(x, x̄) ω(x̄) dr̄ dz̄`.
pub fn kernel_fr(kernel: &EllipticKernel, target: HalfPlanePoint, source: HalfPlanePoint, delta: f64) -> Result<f64> {
    check_points(target, source, delta)?;
    if target.r == 0.0 || source.r == 0.0 {
        return Ok(0.0);
    }
    let s = regularized_argument(target, source, delta);
    let v = kernel.try_values(s)?;
    let dz = target.z - source.z;
    if kernel.dimension() == Dimension::D3 {
        return Ok(-dz / (PI * target.r.powf(1.5) * source.r.sqrt()) * v.fp);
    }
    let c = KernelConstants::new(kernel.dimension());
    let rt = c.powers(target.r).0;
    let rs = c.powers(source.r).1;
    Ok(-2.0 * c.k * dz * rs * rt * v.fp)
}

/// Axial kernel `F^z_(d)`.
///
/// At `d = 3` the classical closed form is used; for `d > 3` it is the
/// `r`-derivative of the regularized stream kernel divided by `r^{d-2}`.
/// On the axis the `r → 0` limit is returned.
pub fn kernel_fz(kernel: &EllipticKernel, target: HalfPlanePoint, source: HalfPlanePoint, delta: f64) -> Result<f64> {
    check_points(target, source, delta)?;
    if source.r == 0.0 {
        return Ok(0.0);
    }
    let c = KernelConstants::new(kernel.dimension());
    if target.r == 0.0 {
        return Ok(axis_fz(&c, target, source, delta));
    }
    let s = regularized_argument(target, source, delta);
    let v = kernel.try_values(s)?;
    if kernel.dimension() == Dimension::D3 {
        let (r, rb) = (target.r, source.r);
        return Ok((r - rb) / (PI * r.powf(1.5) * rb.sqrt()) * v.fp
            + rb.sqrt() / (4.0 * PI * r.powf(1.5)) * (v.f - 2.0 * s * v.fp));
    }
    Ok(general_fz(&c, target, source, s, v))
}

#[inline]
pub(crate) fn axis_fz(c: &KernelConstants, target: HalfPlanePoint, source: HalfPlanePoint, delta: f64) -> f64 {
    let dz = target.z - source.z;
    let rho2 = source.r * source.r + dz * dz + delta * delta;
    c.axis * source.r.powi(c.d as i32 - 1) / rho2.powf(c.d as f64 / 2.0)
}

#[inline]
pub(crate) fn general_fz(c: &KernelConstants, target: HalfPlanePoint, source: HalfPlanePoint, s: f64, v: KernelValues) -> f64 {
    let (rt, _, _) = c.powers(target.r);
    let (_, rs2, rs1) = c.powers(source.r);
    rt * (2.0 * c.k * (target.r - source.r) * rs2 * v.fp + c.k * rs1 * (c.m * v.f - s * v.fp))
}

/// Axial kernel through the dimension-general formula, including `d = 3`.
pub fn kernel_fz_general(kernel: &EllipticKernel, target: HalfPlanePoint, source: HalfPlanePoint, delta: f64) -> Result<f64> {
    check_points(target, source, delta)?;
    if source.r == 0.0 {
        return Ok(0.0);
    }
    let c = KernelConstants::new(kernel.dimension());
    if target.r == 0.0 {
        return Ok(axis_fz(&c, target, source, delta));
    }
    let s = regularized_argument(target, source, delta);
    Ok(general_fz(&c, target, source, s, kernel.try_values(s)?))
}

/// Stream kernel `G_d = K_d (r r̄)^{d/2-1} F_(d)(s)`; `ψ = ∬ G_d ω`.
pub fn stream_kernel(kernel: &EllipticKernel, target: HalfPlanePoint, source: HalfPlanePoint, delta: f64) -> Result<f64> {
    check_points(target, source, delta)?;
    if target.r == 0.0 || source.r == 0.0 {
        return Ok(0.0);
    }
    let s = regularized_argument(target, source, delta);
    let d = kernel.dimension();
    Ok(d.stream_constant() * (target.r * source.r).powf(d.bracket_power()) * kernel.try_values(s)?.f)
}

/// Empirical check of the decay bound `|F^{(ℓ)}(s)| ≤ C min{s^{-ℓ}, s^{-(ℓ+d/2)}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelBoundReport {
    pub spec: KernelSpec,
    pub s_grid: Vec<f64>,
    pub empirical_constant: f64,
    pub worst_s: f64,
}

/// Comparator of the decay bound (`min{|ln s| + 1, s^{-d/2}}` when `ℓ = 0`).
pub fn decay_comparator(spec: &KernelSpec, s: f64) -> f64 {
    let half_d = spec.d.as_f64() / 2.0;
    if spec.ell == 0 {
        (s.ln().abs() + 1.0).min(s.powf(-half_d))
    } else {
        let l = spec.ell as f64;
        s.powf(-l).min(s.powf(-(l + half_d)))
    }
}

pub fn log_grid(s_min: f64, s_max: f64, n: usize) -> Vec<f64> {
    let (a, b) = (s_min.ln(), s_max.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                s_max
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

pub fn verify_kernel_bounds(spec: &KernelSpec, s_min: f64, s_max: f64, n: usize) -> Result<KernelBoundReport> {
    if !(s_min > 0.0 && s_min < s_max) {
        return Err(Error::Domain(format!("need 0 < s_min < s_max, got [{s_min}, {s_max}]")));
    }
    if n < 2 {
        return Err(Error::Domain("grid needs at least two points".into()));
    }
    let s_grid = log_grid(s_min, s_max, n);
    let mut empirical_constant = 0.0;
    let mut worst_s = s_grid[0];
    for &s in &s_grid {
        let ratio = elliptic_f(spec, s)?.abs() / decay_comparator(spec, s);
        if ratio > empirical_constant {
            empirical_constant = ratio;
            worst_s = s;
        }
    }
    Ok(KernelBoundReport { spec: *spec, s_grid, empirical_constant, worst_s })
}
