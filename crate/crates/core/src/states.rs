//! Normalized positive definite functions and their diagnostics.
//!
//! A [`StateModel`] evaluates `φ: Γ → ℂ` on normal-form elements of a fixed
//! [`GroupModel`]. States built here may carry a [`DecayCertificate`], a
//! pointwise bound `|φ(g)| ≤ (|g|+1)^d e^{−α|g|}` which the bound code uses to
//! close off infinite tails.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{domain, Result};
use crate::groups::{GroupElement, GroupKind, GroupModel};

/// Eigenvalue slack for positive semidefiniteness.
pub const PSD_TOL: f64 = 1e-9;
/// `|φ(g)| ≥ 1 − STRICT_TOL` counts as a unimodular value.
pub const STRICT_TOL: f64 = 1e-12;
/// Relative tolerance for the unit-norm condition on radial coefficients.
pub const RADIAL_NORM_TOL: f64 = 1e-9;

/// `|φ(g)| ≤ (|g|+1)^poly_degree · e^{−rate·|g|}` for every `g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayCertificate {
    pub poly_degree: u32,
    pub rate: f64,
}

impl DecayCertificate {
    pub fn new(poly_degree: u32, rate: f64) -> Self {
        DecayCertificate { poly_degree, rate }
    }

    pub fn bound(&self, length: usize) -> f64 {
        let n = length as f64;
        (n + 1.0).powi(self.poly_degree as i32) * (-self.rate * n).exp()
    }

    /// Certificate of the pointwise `k`-th power.
    pub fn powered(&self, k: u32) -> Self {
        DecayCertificate { poly_degree: self.poly_degree * k, rate: self.rate * k as f64 }
    }

    /// A pure exponential rate `α'` with `|φ(g)| ≤ e^{−α'|g|}`.
    ///
    /// Uses `(n+1) ≤ 2^n`, tight at `n = 1`; `None` when no positive rate remains.
    pub fn exponential_rate(&self) -> Option<f64> {
        let r = self.rate - self.poly_degree as f64 * std::f64::consts::LN_2;
        (r > 0.0).then_some(r)
    }
}

/// Coefficients `λ_0..λ_M` of a radial vector `ξ = Σ λ_i χ_i` in `ℓ²(F_N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialCoefficients {
    lambda: Vec<f64>,
    size_s: usize,
}

impl RadialCoefficients {
    /// `Σ λ_i² s_i` for the free group with `|S| = size_s`.
    pub fn norm_sq(lambda: &[f64], size_s: usize) -> f64 {
        let q = (size_s - 1) as f64;
        lambda
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let s = if i == 0 { 1.0 } else { size_s as f64 * q.powi(i as i32 - 1) };
                l * l * s
            })
            .sum()
    }

    /// Accepts `λ` only if `‖ξ‖ = 1` up to [`RADIAL_NORM_TOL`].
    pub fn new(lambda: Vec<f64>, size_s: usize) -> Result<Self> {
        if size_s < 3 {
            return domain("radial states need |S| >= 3 (a free group of rank >= 2)");
        }
        if lambda.is_empty() || lambda.iter().any(|l| !l.is_finite()) {
            return domain("radial coefficients must be a non-empty list of finite reals");
        }
        let n = Self::norm_sq(&lambda, size_s);
        if (n - 1.0).abs() > RADIAL_NORM_TOL {
            return domain(format!("radial coefficients are not normalized: sum λ_i² s_i = {n}"));
        }
        Ok(RadialCoefficients { lambda, size_s })
    }

    /// Rescales `raw` to a unit vector.
    pub fn normalized(raw: Vec<f64>, size_s: usize) -> Result<Self> {
        if size_s < 3 {
            return domain("radial states need |S| >= 3 (a free group of rank >= 2)");
        }
        let n = Self::norm_sq(&raw, size_s);
        if !(n > 0.0) || !n.is_finite() {
            return domain("radial coefficients must not all vanish");
        }
        let scale = n.sqrt().recip();
        Self::new(raw.into_iter().map(|l| l * scale).collect(), size_s)
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn size_s(&self) -> usize {
        self.size_s
    }

    /// Largest index with a coefficient slot.
    pub fn support_radius(&self) -> usize {
        self.lambda.len() - 1
    }

    /// `η_i = (|S|−1)^{i/2} λ_i`.
    pub fn eta(&self) -> Vec<f64> {
        let q = (self.size_s - 1) as f64;
        self.lambda.iter().enumerate().map(|(i, l)| q.powf(i as f64 / 2.0) * l).collect()
    }

    fn eta_at(eta: &[f64], i: usize) -> f64 {
        eta.get(i).copied().unwrap_or(0.0)
    }

    /// `φ_ξ(g)` for `|g| = n`.
    ///
    /// `φ_ξ(g) = q^{−n/2} Σ_i η_i Σ_{t=0}^{min(i,n)} κ(i,t) η_{i+n−2t}` with
    /// `q = |S|−1`. An `h ∈ S(i)` with `gh ∈ S(i+n−2t)` cancels exactly `t`
    /// letters. When `0 < t < min(i, n)` the remaining tail of `h` must avoid
    /// two first letters, giving `(q−1)q^{i−t−1}` such `h` and `κ = (q−1)/q`;
    /// in every other case there are `q^{i−t}` and `κ = 1`.
    pub fn value_at_length(&self, n: usize) -> f64 {
        if n == 0 {
            return Self::norm_sq(&self.lambda, self.size_s);
        }
        let q = (self.size_s - 1) as f64;
        let eta = self.eta();
        let partial = (q - 1.0) / q;
        let mut acc = 0.0;
        for (i, &ei) in eta.iter().enumerate() {
            if ei == 0.0 {
                continue;
            }
            let mut inner = 0.0;
            for t in 0..=i.min(n) {
                let j = i + n - 2 * t;
                let kappa = if t > 0 && t < i.min(n) { partial } else { 1.0 };
                inner += kappa * Self::eta_at(&eta, j);
            }
            acc += ei * inner;
        }
        acc * q.powf(-(n as f64) / 2.0)
    }

    /// The same sum with `κ = 1` throughout, i.e. counting `q^{i−t}` elements
    /// for every cancellation depth. This overcounts when `0 < t < min(i, n)`
    /// and is kept only to measure that discrepancy.
    pub fn uncorrected_value_at_length(&self, n: usize) -> f64 {
        if n == 0 {
            return Self::norm_sq(&self.lambda, self.size_s);
        }
        let q = (self.size_s - 1) as f64;
        let eta = self.eta();
        let mut acc = 0.0;
        for (i, &ei) in eta.iter().enumerate() {
            let inner: f64 = (0..=i.min(n)).map(|t| Self::eta_at(&eta, i + n - 2 * t)).sum();
            acc += ei * inner;
        }
        acc * q.powf(-(n as f64) / 2.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StateKind {
    /// `φ(g) = e^{−t|g|}`.
    Length { t: f64 },
    /// `φ ≡ 1`.
    Counit,
    /// Product of factor values over the alternating block decomposition.
    FreeProduct(Vec<StateModel>),
    /// `φ(g) = ⟨g·ξ, ξ⟩` for a radial unit vector `ξ`.
    Radial(RadialCoefficients),
    /// Pointwise power `φ^k`.
    Power { base: Box<StateModel>, k: u32 },
}

/// A normalized positive definite function on a fixed group model.
#[derive(Clone, Debug, PartialEq)]
pub struct StateModel {
    model: GroupModel,
    kind: StateKind,
    certificate: Option<DecayCertificate>,
}

pub fn length_state(model: &GroupModel, t: f64) -> Result<StateModel> {
    if !(t > 0.0) || !t.is_finite() {
        return domain(format!("length state needs t > 0, got {t}"));
    }
    Ok(StateModel {
        model: model.clone(),
        kind: StateKind::Length { t },
        certificate: Some(DecayCertificate::new(0, t)),
    })
}

pub fn counit_state(model: &GroupModel) -> StateModel {
    StateModel { model: model.clone(), kind: StateKind::Counit, certificate: None }
}

/// Free product `ψ_1 * ... * ψ_n` of factor states.
///
/// Certificate: with every factor at degree 0 the product decays at the
/// minimum factor rate. A factor certificate `(d, α)` is first weakened to
/// `(0, α − d ln 2)`, since polynomial factors do not multiply across blocks
/// into a single `(|g|+1)^d`.
pub fn free_product_state(model: &GroupModel, factors: Vec<StateModel>) -> Result<StateModel> {
    let Some(group_factors) = model.factors() else {
        return domain("free_product_state needs a free-product group model");
    };
    let mut flat = Vec::new();
    for f in factors {
        match f.kind {
            StateKind::FreeProduct(inner) => flat.extend(inner),
            _ => flat.push(f),
        }
    }
    if flat.len() != group_factors.len() {
        return domain(format!(
            "free product has {} factors but {} factor states were given",
            group_factors.len(),
            flat.len()
        ));
    }
    for (i, (state, group)) in flat.iter().zip(group_factors).enumerate() {
        if &state.model != group {
            return domain(format!("factor state {i} is defined on {} but the factor is {group}", state.model));
        }
    }
    let mut rate = f64::INFINITY;
    for f in &flat {
        match f.certificate.and_then(|c| c.exponential_rate()) {
            Some(r) => rate = rate.min(r),
            None => {
                rate = f64::NAN;
                break;
            }
        }
    }
    let certificate = rate.is_finite().then(|| DecayCertificate::new(0, rate));
    Ok(StateModel { model: model.clone(), kind: StateKind::FreeProduct(flat), certificate })
}

/// Radial state `φ_ξ` on a free group of rank ≥ 2.
pub fn radial_state(model: &GroupModel, coeffs: RadialCoefficients) -> Result<StateModel> {
    match model.kind() {
        GroupKind::Free { rank } if *rank >= 2 => {}
        _ => return domain(format!("radial states are defined on free groups of rank >= 2, not {model}")),
    }
    if coeffs.size_s() != model.generating_set_size() {
        return domain(format!(
            "radial coefficients were normalized for |S| = {} but {model} has |S| = {}",
            coeffs.size_s(),
            model.generating_set_size()
        ));
    }
    let q = (model.generating_set_size() - 1) as f64;
    Ok(StateModel {
        model: model.clone(),
        kind: StateKind::Radial(coeffs),
        certificate: Some(DecayCertificate::new(1, q.ln() / 2.0)),
    })
}

/// Pointwise power `φ^k`, `k ≥ 1`.
pub fn power_state(phi: &StateModel, k: u32) -> Result<StateModel> {
    if k == 0 {
        return domain("power_state needs k >= 1");
    }
    if k == 1 {
        return Ok(phi.clone());
    }
    let (base, total) = match &phi.kind {
        StateKind::Power { base, k: inner } => (base.as_ref().clone(), inner * k),
        _ => (phi.clone(), k),
    };
    let certificate = base.certificate.map(|c| c.powered(total));
    Ok(StateModel {
        model: phi.model.clone(),
        kind: StateKind::Power { base: Box::new(base), k: total },
        certificate,
    })
}

impl StateModel {
    pub fn model(&self) -> &GroupModel {
        &self.model
    }

    pub fn kind(&self) -> &StateKind {
        &self.kind
    }

    pub fn certificate(&self) -> Option<DecayCertificate> {
        self.certificate
    }

    pub fn evaluate(&self, g: &GroupElement) -> Complex64 {
        match &self.kind {
            StateKind::Length { t } => Complex64::new((-t * g.len() as f64).exp(), 0.0),
            StateKind::Counit => Complex64::new(1.0, 0.0),
            StateKind::Radial(c) => Complex64::new(c.value_at_length(g.len()), 0.0),
            StateKind::FreeProduct(factors) => self
                .model
                .blocks(g)
                .iter()
                .map(|(f, block)| factors[*f].evaluate(block))
                .product(),
            StateKind::Power { base, k } => base.evaluate(g).powu(*k),
        }
    }

    pub fn abs(&self, g: &GroupElement) -> f64 {
        self.evaluate(g).norm()
    }

    /// The common value on the sphere of radius `n`, for states that depend
    /// only on word length.
    pub fn radial_value(&self, n: usize) -> Option<Complex64> {
        match &self.kind {
            StateKind::Length { t } => Some(Complex64::new((-t * n as f64).exp(), 0.0)),
            StateKind::Counit => Some(Complex64::new(1.0, 0.0)),
            StateKind::Radial(c) => Some(Complex64::new(c.value_at_length(n), 0.0)),
            StateKind::FreeProduct(_) => None,
            StateKind::Power { base, k } => base.radial_value(n).map(|v| v.powu(*k)),
        }
    }

    /// Every value is a positive real.
    pub fn positive_valued(&self) -> bool {
        match &self.kind {
            StateKind::Length { .. } | StateKind::Counit => true,
            StateKind::FreeProduct(f) => f.iter().all(StateModel::positive_valued),
            StateKind::Radial(_) => false,
            StateKind::Power { base, .. } => base.positive_valued(),
        }
    }

    /// `φ(s)` is a nonnegative real for every generator `s`.
    pub fn nonnegative_on_generators(&self) -> bool {
        self.model.generating_set().into_iter().all(|l| {
            let g = self.model.letter_element(l).expect("generator is valid");
            let v = self.evaluate(&g);
            v.im.abs() <= STRICT_TOL && v.re >= 0.0
        })
    }
}

impl fmt::Display for StateModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            StateKind::Length { t } => write!(f, "length(t={t})"),
            StateKind::Counit => write!(f, "counit"),
            StateKind::Radial(c) => write!(f, "radial(lambda={:?})", c.lambda()),
            StateKind::FreeProduct(fs) => {
                write!(f, "free_product[")?;
                for (i, s) in fs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " * ")?;
                    }
                    write!(f, "{s}")?;
                }
                write!(f, "]")
            }
            StateKind::Power { base, k } => write!(f, "({base})^{k}"),
        }
    }
}

/// `|φ|` on the sphere `S(i)` as sorted `(value, multiplicity)` pairs.
///
/// Length-only states on models with closed-form sphere sizes are evaluated
/// once per sphere; everything else is enumerated.
pub fn sphere_abs_values(phi: &StateModel, i: usize, cap: usize) -> Result<Vec<(f64, f64)>> {
    let model = phi.model();
    if let (Some(v), Some(size)) = (phi.radial_value(i), model.closed_form_sphere_size(i)) {
        return Ok(vec![(v.norm(), size)]);
    }
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for g in model.enumerate_sphere(i, cap) {
        let a = phi.abs(&g?);
        *counts.entry(a.to_bits()).or_insert(0) += 1;
    }
    let mut out: Vec<(f64, f64)> = counts.into_iter().map(|(bits, c)| (f64::from_bits(bits), c as f64)).collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsdReport {
    pub min_eigenvalue: f64,
    pub psd: bool,
}

/// Minimum eigenvalue of the Hermitian matrix `[φ(g_i g_j⁻¹)]`.
pub fn gram_psd_check(phi: &StateModel, elements: &[GroupElement], tol: f64) -> Result<PsdReport> {
    let mut seen = HashSet::with_capacity(elements.len());
    for g in elements {
        if !seen.insert(g) {
            return domain(format!("duplicate element {g} in Gram set"));
        }
    }
    let model = phi.model();
    let inverses: Vec<GroupElement> = elements.iter().map(|g| model.inverse(g)).collect();
    let n = elements.len();
    if n == 0 {
        return Ok(PsdReport { min_eigenvalue: f64::INFINITY, psd: true });
    }
    let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| phi.evaluate(&model.multiply(&elements[i], &inverses[j])));
    let min_eigenvalue = m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PsdReport { min_eigenvalue, psd: min_eigenvalue >= -tol })
}

/// Non-identity elements of `B(radius)` where `|φ(g)| ≥ 1 − tol`.
pub fn strictness_scan(phi: &StateModel, radius: usize, tol: f64, cap: usize) -> Result<Vec<GroupElement>> {
    let ball = phi.model().ball(radius, cap)?;
    Ok(ball.into_iter().filter(|g| !g.is_identity() && phi.abs(g) >= 1.0 - tol).collect())
}

/// `φ⁺(i) = −ln inf_{S(i)} |φ|` and `φ⁻(i) = −ln sup_{S(i)} |φ|` for `1 ≤ i ≤ radius`.
///
/// Entries are `+∞` where `φ` vanishes.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayProfile {
    pub radius: usize,
    plus: Vec<f64>,
    minus: Vec<f64>,
}

impl DecayProfile {
    pub fn from_parts(plus: Vec<f64>, minus: Vec<f64>) -> Self {
        assert_eq!(plus.len(), minus.len());
        DecayProfile { radius: plus.len(), plus, minus }
    }

    /// `φ⁺(i)`, `1 ≤ i ≤ radius`.
    pub fn plus(&self, i: usize) -> f64 {
        self.plus[i - 1]
    }

    /// `φ⁻(i)`, `1 ≤ i ≤ radius`.
    pub fn minus(&self, i: usize) -> f64 {
        self.minus[i - 1]
    }
}

pub fn decay_profile(phi: &StateModel, radius: usize, cap: usize) -> Result<DecayProfile> {
    if radius == 0 {
        return domain("decay profile needs radius >= 1");
    }
    let mut plus = Vec::with_capacity(radius);
    let mut minus = Vec::with_capacity(radius);
    for i in 1..=radius {
        let values = sphere_abs_values(phi, i, cap)?;
        let lo = values.first().map_or(0.0, |v| v.0);
        let hi = values.last().map_or(0.0, |v| v.0);
        plus.push(-lo.ln());
        minus.push(-hi.ln());
    }
    Ok(DecayProfile { radius, plus, minus })
}

/// Checks the state's certificate on every sphere of `B(radius)`, with
/// relative slack `1e-12`. States without a certificate fail.
pub fn certificate_holds(phi: &StateModel, radius: usize, cap: usize) -> Result<bool> {
    let Some(cert) = phi.certificate() else {
        return Ok(false);
    };
    for i in 0..=radius {
        let values = sphere_abs_values(phi, i, cap)?;
        let max = values.last().map_or(0.0, |v| v.0);
        if max > cert.bound(i) * (1.0 + 1e-12) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::Letter;
    use proptest::prelude::*;

    const CAP: usize = 1_000_000;

    fn f2() -> GroupModel {
        GroupModel::free(2).unwrap()
    }

    fn zz() -> GroupModel {
        let z = GroupModel::free(1).unwrap();
        GroupModel::free_product(vec![z.clone(), z]).unwrap()
    }

    #[test]
    fn length_state_values() {
        let m = f2();
        let phi = length_state(&m, 1.0).unwrap();
        let ab = m.normal_form(&[Letter::new(0), Letter::new(1)]).unwrap();
        assert!((phi.evaluate(&ab).re - 0.1353352832366127).abs() < 1e-15);
        assert_eq!(phi.evaluate(&GroupElement::identity()), Complex64::new(1.0, 0.0));
        assert_eq!(phi.certificate(), Some(DecayCertificate::new(0, 1.0)));
        assert!(length_state(&m, 0.0).is_err());
    }

    #[test]
    fn gram_three_point_example() {
        let m = f2();
        let phi = length_state(&m, 1.0).unwrap();
        let els = vec![
            GroupElement::identity(),
            m.letter_element(Letter::new(0)).unwrap(),
            m.letter_element(Letter::new(1)).unwrap(),
        ];
        let report = gram_psd_check(&phi, &els, PSD_TOL).unwrap();
        // [[1,x,x],[x,1,y],[x,y,1]]: eigenvalues 1−y and (2+y ± sqrt(y²+8x²))/2
        let (x, y) = ((-1.0f64).exp(), (-2.0f64).exp());
        let expected = (1.0 - y).min((2.0 + y - (y * y + 8.0 * x * x).sqrt()) / 2.0);
        assert!((report.min_eigenvalue - expected).abs() < 1e-12);
        assert!(report.min_eigenvalue > 0.0 && report.psd);
    }

    #[test]
    fn gram_rejects_duplicates() {
        let m = f2();
        let phi = length_state(&m, 1.0).unwrap();
        let e = GroupElement::identity();
        assert!(gram_psd_check(&phi, &[e.clone(), e], PSD_TOL).is_err());
    }

    #[test]
    fn counit_gram_is_rank_one() {
        let m = GroupModel::universal_coxeter(3).unwrap();
        let eps = counit_state(&m);
        let ball = m.ball(2, CAP).unwrap();
        let r = gram_psd_check(&eps, &ball, PSD_TOL).unwrap();
        assert!(r.psd);
        assert!(r.min_eigenvalue.abs() < 1e-9);
        assert!(eps.certificate().is_none());
        assert!(ball.iter().all(|g| eps.evaluate(g) == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn coxeter_length_state_is_psd() {
        let m = GroupModel::universal_coxeter(3).unwrap();
        let phi = length_state(&m, 1.0).unwrap();
        assert!(gram_psd_check(&phi, &m.ball(3, CAP).unwrap(), PSD_TOL).unwrap().psd);
    }

    #[test]
    fn schur_powers_stay_psd() {
        let m = f2();
        let phi = length_state(&m, 0.5).unwrap();
        let ball = m.ball(2, CAP).unwrap();
        for k in [2, 3] {
            let pk = power_state(&phi, k).unwrap();
            assert!(gram_psd_check(&pk, &ball, PSD_TOL).unwrap().psd);
        }
    }

    #[test]
    fn power_state_laws() {
        let m = f2();
        let phi = length_state(&m, 0.7).unwrap();
        assert_eq!(power_state(&phi, 1).unwrap(), phi);
        let p3 = power_state(&phi, 3).unwrap();
        let direct = length_state(&m, 2.1).unwrap();
        for g in m.ball(4, CAP).unwrap() {
            assert!((p3.evaluate(&g) - direct.evaluate(&g)).norm() < 1e-15);
        }
        assert_eq!(p3.certificate(), Some(DecayCertificate::new(0, 0.7 * 3.0)));
        let p6 = power_state(&p3, 2).unwrap();
        assert!(matches!(p6.kind(), StateKind::Power { k: 6, .. }));
        assert!(power_state(&phi, 0).is_err());
    }

    #[test]
    fn free_product_examples() {
        let m = zz();
        let z = GroupModel::free(1).unwrap();
        let psi = length_state(&z, 1.0).unwrap();
        let phi = free_product_state(&m, vec![psi.clone(), psi.clone()]).unwrap();
        let g = m.normal_form(&[Letter::new(0), Letter::new(1), Letter::inv(0)]).unwrap();
        assert!((phi.evaluate(&g).re - (-3.0f64).exp()).abs() < 1e-15);
        assert_eq!(phi.evaluate(&GroupElement::identity()).re, 1.0);
        let mixed = free_product_state(&m, vec![counit_state(&z), psi.clone()]).unwrap();
        let ab = m.normal_form(&[Letter::new(0), Letter::new(1)]).unwrap();
        assert!((mixed.evaluate(&ab).re - (-1.0f64).exp()).abs() < 1e-15);
        assert!(mixed.certificate().is_none());
        assert!(free_product_state(&m, vec![psi]).is_err());
        assert!(free_product_state(&f2(), vec![]).is_err());
    }

    #[test]
    fn free_product_matches_length_state() {
        let m = zz();
        let z = GroupModel::free(1).unwrap();
        let psi = length_state(&z, 1.0).unwrap();
        let phi = free_product_state(&m, vec![psi.clone(), psi]).unwrap();
        let len = length_state(&m, 1.0).unwrap();
        for g in m.ball(8, CAP).unwrap() {
            assert!((phi.evaluate(&g) - len.evaluate(&g)).norm() < 1e-15);
        }
    }

    #[test]
    fn radial_delta_and_single_sphere() {
        let m = f2();
        let delta = radial_state(&m, RadialCoefficients::new(vec![1.0], 4).unwrap()).unwrap();
        for g in m.ball(4, CAP).unwrap() {
            let expect = if g.is_identity() { 1.0 } else { 0.0 };
            assert!((delta.evaluate(&g).re - expect).abs() < 1e-15);
        }
        for n in 2..=4usize {
            let size = 2 * n;
            let lam = 1.0 / (size as f64).sqrt();
            let c = RadialCoefficients::new(vec![0.0, lam], size).unwrap();
            assert!(c.value_at_length(1).abs() < 1e-15);
            assert!((c.value_at_length(2) - 1.0 / size as f64).abs() < 1e-15);
            assert!((c.value_at_length(0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn radial_rejections() {
        assert!(RadialCoefficients::new(vec![1.0, 1.0], 4).is_err());
        assert!(RadialCoefficients::normalized(vec![0.0, 0.0], 4).is_err());
        let c = RadialCoefficients::normalized(vec![1.0, 0.5], 6).unwrap();
        assert!(radial_state(&f2(), c.clone()).is_err());
        assert!(radial_state(&GroupModel::universal_coxeter(6).unwrap(), c.clone()).is_err());
        assert!(radial_state(&GroupModel::free(3).unwrap(), c).is_ok());
    }

    #[test]
    fn strictness_examples() {
        let m = f2();
        assert!(strictness_scan(&length_state(&m, 0.3).unwrap(), 4, STRICT_TOL, CAP).unwrap().is_empty());
        let hits = strictness_scan(&counit_state(&m), 4, STRICT_TOL, CAP).unwrap();
        assert_eq!(hits.len(), m.ball(4, CAP).unwrap().len() - 1);
    }

    #[test]
    fn bimodularity_on_character_subgroup() {
        // counit on the first factor, e^{-|n|} on the second: hits are powers of a.
        let m = zz();
        let z = GroupModel::free(1).unwrap();
        let phi = free_product_state(&m, vec![counit_state(&z), length_state(&z, 1.0).unwrap()]).unwrap();
        let radius = 5;
        let hits = strictness_scan(&phi, radius, STRICT_TOL, CAP).unwrap();
        assert!(!hits.is_empty());
        assert!(hits.iter().all(|h| h.letters().iter().all(|l| l.generator == 0)));
        let ball = m.ball(radius, CAP).unwrap();
        for h in &hits {
            for g in &ball {
                let gh = m.multiply(g, h);
                let hg = m.multiply(h, g);
                if gh.len() <= radius {
                    assert!((phi.abs(&gh) - phi.abs(g)).abs() < 1e-12);
                }
                if hg.len() <= radius {
                    assert!((phi.abs(&hg) - phi.abs(g)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn decay_profile_examples() {
        let m = f2();
        let p = decay_profile(&length_state(&m, 0.4).unwrap(), 5, CAP).unwrap();
        for i in 1..=5 {
            assert!((p.plus(i) - 0.4 * i as f64).abs() < 1e-12);
            assert!((p.minus(i) - 0.4 * i as f64).abs() < 1e-12);
        }
        let c = RadialCoefficients::new(vec![0.0, 0.5], 4).unwrap();
        let rp = decay_profile(&radial_state(&m, c).unwrap(), 4, CAP).unwrap();
        assert_eq!(rp.plus(1), f64::INFINITY);
        assert_eq!(rp.plus(3), f64::INFINITY);
        assert!((rp.plus(2) - 4.0f64.ln()).abs() < 1e-12);

        let zm = zz();
        let z = GroupModel::free(1).unwrap();
        let (t1, t2) = (0.5, 1.5);
        let phi =
            free_product_state(&zm, vec![length_state(&z, t1).unwrap(), length_state(&z, t2).unwrap()]).unwrap();
        let fp = decay_profile(&phi, 3, CAP).unwrap();
        assert!((fp.minus(1) - t1).abs() < 1e-12);
        assert!((fp.plus(1) - t2).abs() < 1e-12);
        for i in 1..=3 {
            assert!(fp.minus(i) <= fp.plus(i));
        }
    }

    #[test]
    fn certificate_conversion_is_sound() {
        let c = DecayCertificate::new(1, 1.2);
        let r = c.exponential_rate().unwrap();
        for n in 0..50usize {
            assert!(c.bound(n) <= (-(r * n as f64)).exp() * (1.0 + 1e-12));
        }
        assert!(DecayCertificate::new(2, 1.0).exponential_rate().is_none());
    }

    fn constructed_states() -> Vec<StateModel> {
        let z = GroupModel::free(1).unwrap();
        let f3 = GroupModel::free(3).unwrap();
        let w3 = GroupModel::universal_coxeter(3).unwrap();
        let racg = GroupModel::right_angled_coxeter(3, &[(0, 2)]).unwrap();
        let zf3 = GroupModel::free_product(vec![z.clone(), f3.clone()]).unwrap();
        let radial = radial_state(&f3, RadialCoefficients::normalized(vec![1.0, -0.3, 0.2], 6).unwrap()).unwrap();
        vec![
            length_state(&f2(), 0.8).unwrap(),
            length_state(&w3, 1.0).unwrap(),
            length_state(&racg, 0.5).unwrap(),
            radial.clone(),
            power_state(&radial, 2).unwrap(),
            free_product_state(&zf3, vec![length_state(&z, 1.3).unwrap(), radial]).unwrap(),
            free_product_state(&zz(), vec![length_state(&z, 1.0).unwrap(), length_state(&z, 2.0).unwrap()]).unwrap(),
            counit_state(&f2()),
        ]
    }

    #[test]
    fn hermitian_symmetry_and_normalization() {
        for phi in constructed_states() {
            let m = phi.model().clone();
            assert!((phi.evaluate(&GroupElement::identity()) - Complex64::new(1.0, 0.0)).norm() < 1e-12, "{phi}");
            let r = if m.generating_set_size() > 4 { 3 } else { 4 };
            for g in m.ball(r, CAP).unwrap() {
                let a = phi.evaluate(&m.inverse(&g));
                let b = phi.evaluate(&g).conj();
                assert!((a - b).norm() < 1e-14, "{phi} at {g}");
            }
        }
    }

    #[test]
    fn certificates_are_sound() {
        for phi in constructed_states().into_iter().filter(|p| p.certificate().is_some()) {
            let r = if phi.model().generating_set_size() > 4 { 6 } else { 8 };
            assert!(certificate_holds(&phi, r, CAP).unwrap(), "{phi}");
        }
    }

    proptest! {
        #[test]
        fn radial_states_are_radial(raw in prop::collection::vec(-1.0f64..1.0, 1..=4)) {
            prop_assume!(raw.iter().any(|x| x.abs() > 1e-3));
            let m = f2();
            let phi = radial_state(&m, RadialCoefficients::normalized(raw, 4).unwrap()).unwrap();
            for i in 0..=5usize {
                let sphere = m.sphere_elements(i, CAP).unwrap();
                let v0 = phi.evaluate(&sphere[0]);
                for g in &sphere {
                    prop_assert!((phi.evaluate(g) - v0).norm() < 1e-15);
                }
            }
        }
    }
}
