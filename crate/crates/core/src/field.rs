//! Discrete axisymmetric vorticity on the half-plane `Π = {(r, z) : r ≥ 0}`.
//!
//! Each element carries the transported scalar `q = ω / r^{d-2}` and a
//! half-plane cell area `dr dz`. Integrals over `ℝ^d` use the measure
//! `σ r^{d-2} dr dz` with `σ = |S^{d-2}|`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Dimension;
use crate::sum::exact_sum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlanePoint {
    pub r: f64,
    pub z: f64,
}

impl HalfPlanePoint {
    pub const fn new(r: f64, z: f64) -> Self {
        Self { r, z }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VortexElement {
    pub pos: HalfPlanePoint,
    /// Relative vorticity `ω / r^{d-2}`.
    pub q: f64,
    /// Half-plane cell area `dr dz`.
    pub area: f64,
}

impl VortexElement {
    pub fn new(pos: HalfPlanePoint, q: f64, area: f64) -> Result<Self> {
        if !(area > 0.0) || !q.is_finite() || !(pos.r >= 0.0) || !pos.z.is_finite() {
            return Err(Error::Domain(format!("invalid vortex element at {pos:?} (q = {q}, area = {area})")));
        }
        Ok(Self { pos, q, area })
    }

    /// Vorticity `ω = q r^{d-2}` at the element.
    #[inline]
    pub fn omega(&self, d: Dimension) -> f64 {
        self.q * self.pos.r.powi(d.get() as i32 - 2)
    }

    /// Half-plane circulation `ω · dr dz`.
    #[inline]
    pub fn circulation(&self, d: Dimension) -> f64 {
        self.omega(d) * self.area
    }

    /// Measure of the swept cell in `ℝ^d`, without the `σ` factor.
    #[inline]
    pub fn weight(&self, d: Dimension) -> f64 {
        self.pos.r.powi(d.get() as i32 - 2) * self.area
    }
}

/// Immutable snapshot of the discrete vorticity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VorticityField {
    d: Dimension,
    elements: Vec<VortexElement>,
    delta: f64,
    sigma: f64,
}

/// Relative dead-band below which `|q|` counts as zero in support queries.
pub const SUPPORT_DEADBAND: f64 = 1e-14;

impl VorticityField {
    pub fn new(d: Dimension, elements: Vec<VortexElement>, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::Domain(format!("blob length must be finite and >= 0, got {delta}")));
        }
        Ok(Self { d, elements, delta, sigma: d.sigma() })
    }

    pub fn d(&self) -> Dimension {
        self.d
    }

    pub fn elements(&self) -> &[VortexElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.d, self.elements.clone(), delta)
    }

    /// Same `d` and `δ`, new element list (used by the time stepper).
    pub fn with_elements(&self, elements: Vec<VortexElement>) -> Self {
        Self { elements, ..self.clone() }
    }

    /// `f₁ ⊕ f₂`: element-list concatenation. Both fields must share `d` and `δ`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.d != other.d || self.delta != other.delta {
            return Err(Error::Domain("concatenated fields must share d and delta".into()));
        }
        let mut elements = self.elements.clone();
        elements.extend_from_slice(&other.elements);
        Ok(self.with_elements(elements))
    }

    fn require_nonempty(&self) -> Result<()> {
        if self.elements.is_empty() {
            Err(Error::EmptyField)
        } else {
            Ok(())
        }
    }

    /// `‖ω / r^{d-2}‖_{L^p(ℝ^d)}` for `p ∈ [1, ∞]`.
    pub fn lp_norm_rel_vort(&self, p: f64) -> Result<f64> {
        self.require_nonempty()?;
        if !(p >= 1.0) {
            return Err(Error::Domain(format!("L^p exponent must be >= 1, got {p}")));
        }
        if p.is_infinite() {
            return Ok(self.elements.iter().fold(0.0, |m, e| m.max(e.q.abs())));
        }
        let d = self.d;
        let sum = exact_sum(self.elements.iter().map(|e| e.q.abs().powf(p) * self.sigma * e.weight(d)));
        Ok(sum.powf(1.0 / p))
    }

    /// `‖r^k ω‖_{L¹(ℝ^d)}` for `k ∈ {-(d-2), 0, 1}`.
    pub fn weighted_l1(&self, k: i32) -> Result<f64> {
        self.require_nonempty()?;
        let dm2 = self.d.get() as i32 - 2;
        if !(k == -dm2 || k == 0 || k == 1) {
            return Err(Error::Domain(format!("weight power must be one of -{dm2}, 0, 1; got {k}")));
        }
        let sigma = self.sigma;
        let exponent = dm2 + k;
        Ok(exact_sum(
            self.elements.iter().map(|e| e.q.abs() * e.pos.r.powi(exponent) * sigma * e.weight(self.d)),
        ))
    }

    /// `‖ω‖_{L^∞}` over the elements.
    pub fn omega_max(&self) -> f64 {
        self.elements.iter().fold(0.0, |m, e| m.max(e.omega(self.d).abs()))
    }

    fn support_threshold(&self, deadband: f64) -> f64 {
        deadband * self.elements.iter().fold(0.0f64, |m, e| m.max(e.q.abs()))
    }

    fn support(&self) -> impl Iterator<Item = &VortexElement> {
        let eps = self.support_threshold(SUPPORT_DEADBAND);
        self.elements.iter().filter(move |e| e.q != 0.0 && e.q.abs() > eps)
    }

    /// Largest `r` among elements carrying vorticity.
    pub fn support_radius(&self) -> f64 {
        self.support_radius_with(SUPPORT_DEADBAND)
    }

    pub fn support_radius_with(&self, deadband: f64) -> f64 {
        let eps = self.support_threshold(deadband);
        self.elements
            .iter()
            .filter(|e| e.q != 0.0 && e.q.abs() > eps)
            .fold(0.0, |m, e| m.max(e.pos.r))
    }

    /// `(∬ r²|ω| dr dz, ∬ |z ω| dr dz)` for any `d`.
    pub fn half_plane_moments(&self) -> (f64, f64) {
        let d = self.d;
        let ir2 = exact_sum(self.elements.iter().map(|e| e.pos.r * e.pos.r * e.circulation(d).abs()));
        let iz = exact_sum(self.elements.iter().map(|e| (e.pos.z * e.circulation(d)).abs()));
        (ir2, iz)
    }

    /// The two monotone half-plane integrals of the three-dimensional dipole.
    pub fn monotone_quantities(&self) -> Result<(f64, f64)> {
        if self.d != Dimension::D3 {
            return Err(Error::RequiresThreeDimensions { op: "monotone_quantities", d: self.d.get() });
        }
        Ok(self.half_plane_moments())
    }

    /// `z`-centroid weighted by `|ω| dr dz`; zero for an empty support.
    pub fn centroid_z(&self) -> f64 {
        let d = self.d;
        let w = exact_sum(self.support().map(|e| e.circulation(d).abs()));
        if w == 0.0 {
            return 0.0;
        }
        exact_sum(self.support().map(|e| e.circulation(d).abs() * e.pos.z)) / w
    }

    /// `(r_min, r_max, z_min, z_max)` of the support, if any.
    pub fn support_box(&self) -> Option<(f64, f64, f64, f64)> {
        let mut it = self.support();
        let first = it.next()?;
        let init = (first.pos.r, first.pos.r, first.pos.z, first.pos.z);
        Some(it.fold(init, |(a, b, c, d), e| (a.min(e.pos.r), b.max(e.pos.r), c.min(e.pos.z), d.max(e.pos.z))))
    }

    /// Volume of the support in `ℝ^d`.
    pub fn support_volume(&self) -> f64 {
        exact_sum(self.support().map(|e| self.sigma * e.weight(self.d)))
    }

    /// `ω_λ(r, z) = λ ω(λ r, λ z + z₀)`. Positions map to
    /// `(r/λ, (z - z₀)/λ)`, areas and `δ` shrink accordingly, and
    /// `q ↦ λ^{d-1} q`.
    pub fn rescale(&self, lambda: f64, z0: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("rescale factor must be positive, got {lambda}")));
        }
        let q_scale = lambda.powi(self.d.get() as i32 - 1);
        let area_scale = 1.0 / (lambda * lambda);
        let elements = self
            .elements
            .iter()
            .map(|e| VortexElement {
                pos: HalfPlanePoint::new(e.pos.r / lambda, (e.pos.z - z0) / lambda),
                q: e.q * q_scale,
                area: e.area * area_scale,
            })
            .collect();
        Ok(Self { elements, delta: self.delta / lambda, ..self.clone() })
    }

    /// Write the `r,z,q,area` table with 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["r", "z", "q", "area"])?;
        for e in &self.elements {
            w.write_record([
                format!("{:.16e}", e.pos.r),
                format!("{:.16e}", e.pos.z),
                format!("{:.16e}", e.q),
                format!("{:.16e}", e.area),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn meta(&self) -> FieldMeta {
        FieldMeta { d: self.d, delta: self.delta, sigma: self.sigma }
    }

    pub fn read_csv<R: Read>(reader: R, meta: &FieldMeta) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(reader);
        let headers = rd.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["r", "z", "q", "area"] {
            return Err(Error::InvalidConfig(format!("unexpected field CSV header {headers:?}")));
        }
        let mut elements = Vec::new();
        for rec in rd.deserialize() {
            let (r, z, q, area): (f64, f64, f64, f64) = rec?;
            elements.push(VortexElement::new(HalfPlanePoint::new(r, z), q, area)?);
        }
        Self::new(meta.d, elements, meta.delta)
    }
}

/// JSON sidecar of a field snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub d: Dimension,
    pub delta: f64,
    pub sigma: f64,
}

/// Smooth compactly supported bump `A exp(1 - 1/(1 - (ρ/a)²))`.
pub fn bump(rho: f64, radius: f64, amplitude: f64) -> f64 {
    let x = rho / radius;
    if x >= 1.0 {
        0.0
    } else {
        amplitude * (1.0 - 1.0 / (1.0 - x * x)).exp()
    }
}

/// Initial data `ω₀ = -φ(r, z) + φ(r, -z)` of two anti-parallel rings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipoleParams {
    pub center: HalfPlanePoint,
    pub radius: f64,
    pub amplitude: f64,
    pub resolution: u32,
}

impl Default for DipoleParams {
    fn default() -> Self {
        Self { center: HalfPlanePoint::new(1.0, 1.0), radius: 0.25, amplitude: 1.0, resolution: 36 }
    }
}

/// A single smooth ring core.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingParams {
    pub center: HalfPlanePoint,
    pub radius: f64,
    pub amplitude: f64,
    pub resolution: u32,
}

fn validate_bump(center: HalfPlanePoint, radius: f64, resolution: u32) -> Result<()> {
    if resolution < 4 {
        return Err(Error::Domain(format!("resolution {resolution} < 4 elements per diameter is under-resolved")));
    }
    if !(radius > 0.0) || !(center.r > radius) {
        return Err(Error::Domain(format!("bump of radius {radius} at {center:?} must stay off the axis")));
    }
    Ok(())
}

/// Cell-centred samples `(r, z, φ, cell area)` of one bump; `h = 2a / resolution`.
fn sample_bump(center: HalfPlanePoint, radius: f64, amplitude: f64, resolution: u32) -> (Vec<(f64, f64, f64)>, f64) {
    let n = resolution as usize;
    let h = 2.0 * radius / n as f64;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let r = center.r - radius + (i as f64 + 0.5) * h;
        for j in 0..n {
            let z = center.z - radius + (j as f64 + 0.5) * h;
            let rho = ((r - center.r).powi(2) + (z - center.z).powi(2)).sqrt();
            let phi = bump(rho, radius, amplitude);
            if phi > 0.0 {
                out.push((r, z, phi));
            }
        }
    }
    (out, h)
}

/// Default blob length: 1.5 cell sizes.
pub const BLOB_OVERLAP: f64 = 1.5;

pub fn make_dipole(d: Dimension, params: &DipoleParams, delta: Option<f64>) -> Result<VorticityField> {
    validate_bump(params.center, params.radius, params.resolution)?;
    if !(params.center.z > params.radius) {
        return Err(Error::Domain("dipole bumps must not straddle z = 0".into()));
    }
    if !(params.amplitude > 0.0) {
        return Err(Error::Domain("dipole amplitude must be positive".into()));
    }
    let (cells, h) = sample_bump(params.center, params.radius, params.amplitude, params.resolution);
    let dm2 = d.get() as i32 - 2;
    let area = h * h;
    let mut elements = Vec::with_capacity(2 * cells.len());
    for &(r, z, phi) in &cells {
        let q = -phi / r.powi(dm2);
        elements.push(VortexElement::new(HalfPlanePoint::new(r, z), q, area)?);
    }
    for &(r, z, phi) in &cells {
        let q = phi / r.powi(dm2);
        elements.push(VortexElement::new(HalfPlanePoint::new(r, -z), q, area)?);
    }
    VorticityField::new(d, elements, delta.unwrap_or(BLOB_OVERLAP * h))
}

/// One signed bump; `amplitude` may be negative.
pub fn make_single_ring(d: Dimension, params: &RingParams, delta: Option<f64>) -> Result<VorticityField> {
    validate_bump(params.center, params.radius, params.resolution)?;
    if params.amplitude == 0.0 || !params.amplitude.is_finite() {
        return Err(Error::Domain("ring amplitude must be finite and nonzero".into()));
    }
    let (cells, h) = sample_bump(params.center, params.radius, params.amplitude.abs(), params.resolution);
    let sign = params.amplitude.signum();
    let dm2 = d.get() as i32 - 2;
    let elements = cells
        .iter()
        .map(|&(r, z, phi)| VortexElement::new(HalfPlanePoint::new(r, z), sign * phi / r.powi(dm2), h * h))
        .collect::<Result<Vec<_>>>()?;
    VorticityField::new(d, elements, delta.unwrap_or(BLOB_OVERLAP * h))
}

/// Grid cell size used by [`make_dipole`] / [`make_single_ring`].
pub fn cell_size(radius: f64, resolution: u32) -> f64 {
    2.0 * radius / resolution as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn one(r: f64, z: f64, q: f64, area: f64) -> VorticityField {
        VorticityField::new(Dimension::D3, vec![VortexElement::new(HalfPlanePoint::new(r, z), q, area).unwrap()], 0.0)
            .unwrap()
    }

    #[test]
    fn single_element_norms() {
        let f = one(2.0, 1.0, 3.0, 0.01);
        assert!((f.lp_norm_rel_vort(1.0).unwrap() - 0.12 * PI).abs() < 1e-15);
        assert_eq!(f.lp_norm_rel_vort(f64::INFINITY).unwrap(), 3.0);
        assert!((f.weighted_l1(1).unwrap() - 2.0 * 6.0 * 2.0 * PI * 2.0 * 0.01).abs() < 1e-14);
        assert!((f.weighted_l1(0).unwrap() - 6.0 * 2.0 * PI * 2.0 * 0.01).abs() < 1e-14);
        assert_eq!(f.weighted_l1(-1).unwrap(), f.lp_norm_rel_vort(1.0).unwrap());
        let (a, b) = f.monotone_quantities().unwrap();
        assert!((a - 0.24).abs() < 1e-15 && (b - 0.06).abs() < 1e-15);
    }

    #[test]
    fn norm_errors() {
        let f = one(2.0, 1.0, 3.0, 0.01);
        assert!(matches!(f.lp_norm_rel_vort(0.5), Err(Error::Domain(_))));
        assert!(f.weighted_l1(2).is_err());
        let empty = VorticityField::new(Dimension::D3, vec![], 0.0).unwrap();
        assert!(matches!(empty.lp_norm_rel_vort(1.0), Err(Error::EmptyField)));
        let f4 = VorticityField::new(Dimension::new(4).unwrap(), f.elements().to_vec(), 0.0).unwrap();
        assert!(matches!(f4.monotone_quantities(), Err(Error::RequiresThreeDimensions { .. })));
    }

    #[test]
    fn doubling_elements_doubles_l1() {
        let f = one(2.0, 1.0, 3.0, 0.01);
        let g = f.concat(&f).unwrap();
        assert_eq!(g.lp_norm_rel_vort(1.0).unwrap(), 2.0 * f.lp_norm_rel_vort(1.0).unwrap());
    }

    #[test]
    fn support_radius_cases() {
        let els = [1.0, 2.5, 0.3]
            .iter()
            .map(|&r| VortexElement::new(HalfPlanePoint::new(r, 0.0), 1.0, 0.1).unwrap())
            .collect();
        let f = VorticityField::new(Dimension::D3, els, 0.0).unwrap();
        assert_eq!(f.support_radius(), 2.5);
        assert_eq!(f.rescale(2.0, 0.0).unwrap().support_radius(), 1.25);
        let zero = f.with_elements(f.elements().iter().map(|e| VortexElement { q: 0.0, ..*e }).collect());
        assert_eq!(zero.support_radius(), 0.0);
        // floating-point dust does not count
        let mut els = f.elements().to_vec();
        els.push(VortexElement::new(HalfPlanePoint::new(9.0, 0.0), 1e-17, 0.1).unwrap());
        assert_eq!(f.with_elements(els).support_radius(), 2.5);
    }

    #[test]
    fn rescale_identity_and_linf_scaling() {
        let f = make_dipole(Dimension::D3, &DipoleParams { resolution: 8, ..Default::default() }, None).unwrap();
        assert_eq!(f.rescale(1.0, 0.0).unwrap(), f);
        for dim in 3..=6 {
            let d = Dimension::new(dim).unwrap();
            let g = make_dipole(d, &DipoleParams { resolution: 8, ..Default::default() }, None).unwrap();
            let lam: f64 = 3.0;
            let a = g.lp_norm_rel_vort(f64::INFINITY).unwrap();
            let b = g.rescale(lam, 0.0).unwrap().lp_norm_rel_vort(f64::INFINITY).unwrap();
            assert!((b / a - lam.powi(dim as i32 - 1)).abs() < 1e-12 * b / a);
        }
        assert!(f.rescale(0.0, 0.0).is_err());
        assert!(f.rescale(-1.0, 0.0).is_err());
    }

    #[test]
    fn dipole_sign_and_symmetry() {
        let f = make_dipole(Dimension::D3, &DipoleParams { resolution: 12, ..Default::default() }, None).unwrap();
        let n = f.len() / 2;
        let (up, down) = f.elements().split_at(n);
        for (a, b) in up.iter().zip(down) {
            assert_eq!(a.pos.r, b.pos.r);
            assert_eq!(a.pos.z, -b.pos.z);
            assert_eq!(a.q, -b.q);
        }
        assert!(f.elements().iter().filter(|e| e.pos.z >= 0.0).all(|e| e.q <= 0.0));
        let (_, iz) = f.half_plane_moments();
        let upper = f.with_elements(up.to_vec()).half_plane_moments().1;
        assert!((iz - 2.0 * upper).abs() < 1e-15 * iz);
    }

    #[test]
    fn dipole_refuses_bad_parameters() {
        let d = Dimension::D3;
        assert!(make_dipole(d, &DipoleParams { resolution: 3, ..Default::default() }, None).is_err());
        let straddle = DipoleParams { center: HalfPlanePoint::new(1.0, 0.1), ..Default::default() };
        assert!(make_dipole(d, &straddle, None).is_err());
        let axis = DipoleParams { center: HalfPlanePoint::new(0.2, 1.0), ..Default::default() };
        assert!(make_dipole(d, &axis, None).is_err());
    }

    #[test]
    fn dipole_l1_matches_refined_quadrature() {
        // ‖ω₀/r‖_{L¹(ℝ³)} = 2 ∬ φ 2π dr dz (two bumps); integrate φ in polar
        // coordinates around the centre with a fine midpoint rule.
        let p = DipoleParams { resolution: 24, ..Default::default() };
        let f = make_dipole(Dimension::D3, &p, None).unwrap();
        let n = 2000;
        let mut acc = 0.0;
        for i in 0..n {
            let rho = (i as f64 + 0.5) / n as f64 * p.radius;
            acc += bump(rho, p.radius, p.amplitude) * rho * (p.radius / n as f64);
        }
        let oracle = 2.0 * 2.0 * PI * (2.0 * PI * acc);
        let got = f.lp_norm_rel_vort(1.0).unwrap();
        assert!((got - oracle).abs() / oracle < 0.01, "{got} vs {oracle}");
    }

    #[test]
    fn single_ring_properties() {
        let p = RingParams { center: HalfPlanePoint::new(1.0, 0.0), radius: 0.2, amplitude: -2.0, resolution: 10 };
        let f = make_single_ring(Dimension::D3, &p, None).unwrap();
        let h = cell_size(p.radius, p.resolution);
        assert!((f.support_radius() - (p.center.r + p.radius)).abs() <= h);
        assert!(f.elements().iter().all(|e| e.q < 0.0));
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let f = make_dipole(Dimension::new(5).unwrap(), &DipoleParams { resolution: 6, ..Default::default() }, None)
            .unwrap()
            .rescale(1.0 / 3.0, 0.1)
            .unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let meta: FieldMeta = serde_json::from_str(&serde_json::to_string(&f.meta()).unwrap()).unwrap();
        let g = VorticityField::read_csv(buf.as_slice(), &meta).unwrap();
        for (a, b) in f.elements().iter().zip(g.elements()) {
            assert_eq!(a.pos.r.to_bits(), b.pos.r.to_bits());
            assert_eq!(a.pos.z.to_bits(), b.pos.z.to_bits());
            assert_eq!(a.q.to_bits(), b.q.to_bits());
            assert_eq!(a.area.to_bits(), b.area.to_bits());
        }
        assert_eq!(f.delta().to_bits(), g.delta().to_bits());
        assert!(String::from_utf8(buf).unwrap().starts_with("r,z,q,area\n"));
    }
}
