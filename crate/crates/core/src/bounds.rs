//! Certified bounds on `‖φ^k − δ_e‖`, density verdicts and cut-off scans.
//!
//! Upper bounds come from `‖φ^k − δ_e‖² ≤ ¼ Σ_{g≠e} |φ(g)|^{2k}`: the sum is
//! taken exactly over `B(R)` and the rest is majorized using the state's
//! decay certificate together with `s_i ≤ |S|(|S|−1)^{i−1}`. Lower bounds are
//! Chebyshev estimates on the spectral projections of `χ₁`, the sum of the
//! generators.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::groups::{GroupKind, GroupModel};
use crate::states::{sphere_abs_values, DecayCertificate, DecayProfile, StateKind, StateModel};

pub const DEFAULT_EPSILON: f64 = 0.01;
pub const DEFAULT_K_MAX: u32 = 64;
/// `ln(|S|−1) − 2kα` must be below `−DIVERGENCE_MARGIN` for the tail to be summed.
pub const DIVERGENCE_MARGIN: f64 = 1e-12;
/// Smallest decay-profile radius accepted by [`density_verdict`].
pub const MIN_DENSITY_RADIUS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rigor {
    /// The value is the exact series (truncated part plus exact geometric tail).
    Exact,
    UpperCertified,
    /// The certificate cannot guarantee convergence of the series.
    Divergent,
    /// No usable certificate.
    Unknown,
}

impl fmt::Display for Rigor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rigor::Exact => "Exact",
            Rigor::UpperCertified => "UpperCertified",
            Rigor::Divergent => "Divergent",
            Rigor::Unknown => "Unknown",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundResult {
    /// `½√(truncated_sum + tail_bound)`; `+∞` unless finite and certified.
    pub value: f64,
    pub rigor: Rigor,
    pub truncation_radius: usize,
    /// `Σ_{1≤|g|≤R} |φ(g)|^{2k}`.
    pub truncated_sum: f64,
    pub tail_bound: f64,
}

impl BoundResult {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// `|φ|` on `S(1)..S(R)`, collected once and reused for every power.
#[derive(Clone, Debug)]
pub struct SphereValues {
    radius: usize,
    spheres: Vec<Vec<(f64, f64)>>,
    certificate_ok: bool,
}

impl SphereValues {
    pub fn collect(phi: &StateModel, radius: usize, cap: usize) -> Result<Self> {
        if radius == 0 {
            return domain("truncation radius must be >= 1");
        }
        let spheres = (1..=radius)
            .into_par_iter()
            .map(|i| sphere_abs_values(phi, i, cap))
            .collect::<Result<Vec<_>>>()?;
        let certificate_ok = phi.certificate().is_some_and(|c| {
            spheres.iter().enumerate().all(|(i, s)| s.last().is_none_or(|v| v.0 <= c.bound(i + 1) * (1.0 + 1e-12)))
        });
        Ok(SphereValues { radius, spheres, certificate_ok })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// The state's certificate holds on every collected sphere.
    pub fn certificate_ok(&self) -> bool {
        self.certificate_ok
    }

    /// `Σ_{1≤|g|≤R} |φ(g)|^{2k}`.
    pub fn power_sum(&self, k: f64) -> f64 {
        self.spheres.iter().flatten().map(|(v, m)| m * v.powf(2.0 * k)).sum()
    }

    pub fn decay_profile(&self) -> DecayProfile {
        let plus = self.spheres.iter().map(|s| -s.first().map_or(0.0, |v| v.0).ln()).collect();
        let minus = self.spheres.iter().map(|s| -s.last().map_or(0.0, |v| v.0).ln()).collect();
        DecayProfile::from_parts(plus, minus)
    }
}

/// Bound on `Σ_{i>R} |S|(|S|−1)^{i−1}(i+1)^D e^{−A i}`, or `None` if the
/// certificate cannot make it converge.
///
/// For `D = 0` this is the exact geometric tail. Otherwise `(i+1)^D ≤ C_ρ ρ^i`
/// for `i > R` with `ρ = r₀^{−1/2}`, `r₀ = (|S|−1)e^{−A}`, and
/// `C_ρ = max_{i>R} (i+1)^D ρ^{−i}`; the maximand is log-concave so the scan
/// stops just past its critical point.
pub fn certified_tail(size_s: usize, degree: f64, rate: f64, radius: usize) -> Option<f64> {
    let q = size_s as f64 - 1.0;
    let ln_r0 = q.ln() - rate;
    if !(ln_r0 < -DIVERGENCE_MARGIN) {
        return None;
    }
    let ln_prefactor = (size_s as f64 / q).ln();
    let first = (radius + 1) as f64;
    let ln_tail = if degree == 0.0 {
        ln_prefactor + first * ln_r0 - (-ln_r0.exp()).ln_1p()
    } else {
        let ln_rho = -ln_r0 / 2.0;
        let peak = (degree / ln_rho - 1.0).ceil().max(0.0) as usize;
        let last = peak.max(radius + 1) + 1;
        let ln_c = (radius + 1..=last)
            .map(|i| degree * ((i + 1) as f64).ln() - i as f64 * ln_rho)
            .fold(f64::NEG_INFINITY, f64::max);
        let ln_sqrt_r0 = ln_r0 / 2.0;
        ln_prefactor + ln_c + first * ln_sqrt_r0 - (-ln_sqrt_r0.exp()).ln_1p()
    };
    Some(ln_tail.exp())
}

/// `|φ| = e^{−t|g|}` exactly, so the certificate is attained on every sphere.
fn attains_certificate(phi: &StateModel) -> bool {
    match phi.kind() {
        StateKind::Length { .. } => true,
        StateKind::Power { base, .. } => attains_certificate(base),
        _ => false,
    }
}

/// Upper bound at a real power `k > 0` from precollected sphere values.
///
/// For non-integer `k`, `φ^k` need not be positive definite; the number is
/// then an interpolation of the series, used to locate thresholds.
pub fn l2_upper_bound_from(phi: &StateModel, values: &SphereValues, k: f64) -> BoundResult {
    let radius = values.radius();
    let unknown = BoundResult {
        value: f64::INFINITY,
        rigor: Rigor::Unknown,
        truncation_radius: radius,
        truncated_sum: f64::NAN,
        tail_bound: f64::INFINITY,
    };
    let Some(cert) = phi.certificate() else {
        return unknown;
    };
    if !values.certificate_ok() || !(k > 0.0) {
        return unknown;
    }
    let truncated_sum = values.power_sum(k);
    let degree = 2.0 * k * cert.poly_degree as f64;
    let rate = 2.0 * k * cert.rate;
    match certified_tail(phi.model().generating_set_size(), degree, rate, radius) {
        None => BoundResult { value: f64::INFINITY, rigor: Rigor::Divergent, truncated_sum, ..unknown },
        Some(tail_bound) => {
            let exact = degree == 0.0 && phi.model().has_closed_form_spheres() && attains_certificate(phi);
            BoundResult {
                value: 0.5 * (truncated_sum + tail_bound).sqrt(),
                rigor: if exact { Rigor::Exact } else { Rigor::UpperCertified },
                truncation_radius: radius,
                truncated_sum,
                tail_bound,
            }
        }
    }
}

pub fn l2_upper_bound(phi: &StateModel, k: u32, radius: usize, cap: usize) -> Result<BoundResult> {
    l2_upper_bound_real(phi, k as f64, radius, cap)
}

pub fn l2_upper_bound_real(phi: &StateModel, k: f64, radius: usize, cap: usize) -> Result<BoundResult> {
    if phi.certificate().is_none() {
        return Ok(BoundResult {
            value: f64::INFINITY,
            rigor: Rigor::Unknown,
            truncation_radius: radius,
            truncated_sum: f64::NAN,
            tail_bound: f64::INFINITY,
        });
    }
    let values = SphereValues::collect(phi, radius, cap)?;
    Ok(l2_upper_bound_from(phi, &values, k))
}

/// The two closed-form upper bounds at `k = ln(|S|−1)/(2α) + c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosedFormUpper {
    /// `e^{−αc}/√(2 − 2e^{−αc})`, the constant as usually displayed.
    pub simplified: f64,
    /// `½√(|S|/(|S|−1) · x/(1−x))`, `x = e^{−2αc}`: the geometric sum at that `k`.
    pub exact: f64,
}

pub fn closed_form_upper(size_s: usize, alpha: f64, c: f64) -> Result<ClosedFormUpper> {
    if size_s < 3 {
        return domain("closed-form upper bound needs |S| >= 3");
    }
    if !(alpha > 0.0) || !(c > 0.0) {
        return domain(format!("closed-form upper bound needs alpha > 0 and c > 0 (alpha = {alpha}, c = {c})"));
    }
    let y = (-alpha * c).exp();
    let simplified = y / (2.0 - 2.0 * y).sqrt();
    let x = (-2.0 * alpha * c).exp();
    let ratio = size_s as f64 / (size_s as f64 - 1.0);
    let exact = 0.5 * (ratio * x / -(-2.0 * alpha * c).exp_m1()).sqrt();
    Ok(ClosedFormUpper { simplified, exact })
}

/// `max(0, 1 − 4·var_haar/m² − 4·var_state/m²)`; `0` when `m ≤ 0`.
pub fn chebyshev_lower(mean_m: f64, var_state: f64, var_haar: f64) -> f64 {
    if !(mean_m > 0.0) {
        return 0.0;
    }
    let m2 = mean_m * mean_m;
    (1.0 - 4.0 * var_haar / m2 - 4.0 * var_state / m2).max(0.0)
}

/// `max(0, 1 − 4(2 + 3γ²/|S|)e^{−2φ⁺(1)c})` at `k = ln(|S|−1)/(2φ⁺(1)) − c`.
pub fn cogrowth_lower_bound(size_s: usize, gamma: f64, phi_plus_1: f64, c: f64) -> Result<f64> {
    if size_s < 2 {
        return domain("cogrowth lower bound needs |S| >= 2");
    }
    let floor = (size_s as f64 - 1.0).sqrt();
    if !(gamma >= floor * (1.0 - 1e-12)) {
        return domain(format!("gamma = {gamma} is below sqrt(|S|-1) = {floor}"));
    }
    if !(phi_plus_1 > 0.0) || !phi_plus_1.is_finite() || !(c > 0.0) {
        return domain("cogrowth lower bound needs 0 < phi+(1) < inf and c > 0");
    }
    let coeff = 4.0 * (2.0 + 3.0 * gamma * gamma / size_s as f64);
    Ok((1.0 - coeff * (-2.0 * phi_plus_1 * c).exp()).max(0.0))
}

/// `max(0, 1 − 8e^{−2φ⁺(1)c})` at `k = ln(|S|−1)/(2φ⁺(1)) − c`.
///
/// Valid for a minimal generating set when `φ⁻(2) ≥ 2φ⁺(1)`; see
/// [`minimal_gen_precondition`].
pub fn minimal_gen_lower_bound(size_s: usize, phi_plus_1: f64, c: f64) -> Result<f64> {
    if size_s < 2 {
        return domain("minimal-generator lower bound needs |S| >= 2");
    }
    if !(phi_plus_1 > 0.0) || !phi_plus_1.is_finite() || !(c > 0.0) {
        return domain("minimal-generator lower bound needs 0 < phi+(1) < inf and c > 0");
    }
    Ok((1.0 - 8.0 * (-2.0 * phi_plus_1 * c).exp()).max(0.0))
}

/// Why the minimal-generator bound does not apply, if it does not.
pub fn minimal_gen_precondition(phi: &StateModel, profile: &DecayProfile) -> std::result::Result<(), String> {
    if !phi.model().is_minimal() {
        return Err("generating set is not flagged minimal".into());
    }
    if !phi.nonnegative_on_generators() {
        return Err("state is not a nonnegative real on the generators".into());
    }
    if profile.radius < 2 {
        return Err("decay profile does not reach radius 2".into());
    }
    let (p1, m2) = (profile.plus(1), profile.minus(2));
    if !(p1 > 0.0 && p1.is_finite()) {
        return Err(format!("phi+(1) = {p1} is not a positive finite rate"));
    }
    if !(m2 >= 2.0 * p1 * (1.0 - 1e-12)) {
        return Err(format!("phi-(2) = {m2} < 2 phi+(1) = {}", 2.0 * p1));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum LowerKind {
    MinimalGenerating,
    Cogrowth,
    Chebyshev,
}

impl fmt::Display for LowerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LowerKind::MinimalGenerating => "minimal_gen",
            LowerKind::Cogrowth => "cogrowth",
            LowerKind::Chebyshev => "chebyshev",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerBound {
    pub value: f64,
    pub kind: LowerKind,
}

/// Everything the lower bounds need, computed once per state.
#[derive(Clone, Debug)]
pub struct LowerBoundInputs {
    size_s: usize,
    phi_plus_1: f64,
    minimal_gen: std::result::Result<(), String>,
    gamma: Option<f64>,
    nonnegative_on_s: bool,
    /// `φ(s)` for `s ∈ S`.
    generator_values: Vec<Complex64>,
    /// `φ(gh)` for ordered pairs `g, h ∈ S`, i.e. the terms of `φ(χ₁²)`.
    pair_values: Vec<Complex64>,
    haar_second_moment: f64,
}

impl LowerBoundInputs {
    /// `gamma`: a known cogrowth rate; free markings use `√(|S|−1)` when absent.
    pub fn new(phi: &StateModel, profile: &DecayProfile, gamma: Option<f64>) -> Self {
        let model = phi.model();
        let size_s = model.generating_set_size();
        let gens: Vec<_> =
            model.generating_set().into_iter().map(|l| model.letter_element(l).expect("generator")).collect();
        let generator_values = gens.iter().map(|g| phi.evaluate(g)).collect();
        let mut pair_values = Vec::with_capacity(size_s * size_s);
        let mut haar = 0usize;
        for g in &gens {
            for h in &gens {
                let gh = model.multiply(g, h);
                haar += gh.is_identity() as usize;
                pair_values.push(phi.evaluate(&gh));
            }
        }
        let gamma = gamma.or_else(|| model.is_free_on_generators().then(|| (size_s as f64 - 1.0).sqrt()));
        LowerBoundInputs {
            size_s,
            phi_plus_1: profile.plus(1),
            minimal_gen: minimal_gen_precondition(phi, profile),
            gamma,
            nonnegative_on_s: phi.nonnegative_on_generators(),
            generator_values,
            pair_values,
            haar_second_moment: haar as f64,
        }
    }

    pub fn phi_plus_1(&self) -> f64 {
        self.phi_plus_1
    }

    pub fn minimal_gen_refusal(&self) -> Option<&str> {
        self.minimal_gen.as_ref().err().map(String::as_str)
    }

    /// `ln(|S|−1)/(2φ⁺(1))`.
    pub fn predicted(&self) -> f64 {
        (self.size_s as f64 - 1.0).ln() / (2.0 * self.phi_plus_1)
    }

    fn rate_ok(&self) -> bool {
        self.phi_plus_1 > 0.0 && self.phi_plus_1.is_finite()
    }

    pub fn minimal_gen_at(&self, k: f64) -> Option<f64> {
        let c = self.predicted() - k;
        (self.minimal_gen.is_ok() && self.rate_ok() && c > 0.0)
            .then(|| minimal_gen_lower_bound(self.size_s, self.phi_plus_1, c).ok())
            .flatten()
    }

    pub fn cogrowth_at(&self, k: f64) -> Option<f64> {
        let gamma = self.gamma?;
        let c = self.predicted() - k;
        (self.nonnegative_on_s && self.rate_ok() && c > 0.0)
            .then(|| cogrowth_lower_bound(self.size_s, gamma, self.phi_plus_1, c).ok())
            .flatten()
    }

    /// `φ^k(χ₁)` and `φ^k(χ₁²)` from the exact values on `S` and `S·S`.
    ///
    /// Real `k` requires nonnegative real values throughout.
    pub fn moments(&self, k: f64) -> Option<(f64, f64)> {
        let integral = k.fract() == 0.0 && k >= 1.0;
        let pow = |z: &Complex64| -> Option<f64> {
            if integral {
                Some(z.powu(k as u32).re)
            } else if z.im.abs() <= 1e-15 && z.re >= 0.0 {
                Some(z.re.powf(k))
            } else {
                None
            }
        };
        let mean = self.generator_values.iter().map(pow).sum::<Option<f64>>()?;
        let second = self.pair_values.iter().map(pow).sum::<Option<f64>>()?;
        Some((mean, second))
    }

    pub fn chebyshev_at(&self, k: f64) -> Option<f64> {
        if !(k >= 0.0) {
            return None;
        }
        let (mean, second) = self.moments(k)?;
        Some(chebyshev_lower(mean, (second - mean * mean).max(0.0), self.haar_second_moment))
    }

    /// The largest applicable lower bound at power `k`.
    pub fn best_at(&self, k: f64) -> Option<LowerBound> {
        let candidates = [
            (LowerKind::MinimalGenerating, self.minimal_gen_at(k)),
            (LowerKind::Cogrowth, self.cogrowth_at(k)),
            (LowerKind::Chebyshev, self.chebyshev_at(k)),
        ];
        let mut best: Option<LowerBound> = None;
        for (kind, v) in candidates {
            if let Some(value) = v {
                if best.is_none_or(|b| value > b.value) {
                    best = Some(LowerBound { value, kind });
                }
            }
        }
        best
    }

    /// Greatest real `k` at which some lower bound is `≥ 1 − ε`.
    ///
    /// The two closed forms are inverted analytically (the answer may be
    /// negative); the Chebyshev bound is searched on `[0, k_max]`.
    pub fn threshold_real(&self, epsilon: f64, k_max: u32) -> Option<f64> {
        let mut best: Option<f64> = None;
        let mut offer = |k: f64| best = Some(best.map_or(k, |b: f64| b.max(k)));
        if self.minimal_gen.is_ok() && self.rate_ok() {
            offer(self.predicted() - (8.0 / epsilon).ln() / (2.0 * self.phi_plus_1));
        }
        if let (Some(gamma), true) = (self.gamma, self.nonnegative_on_s && self.rate_ok()) {
            let coeff = 4.0 * (2.0 + 3.0 * gamma * gamma / self.size_s as f64);
            offer(self.predicted() - (coeff / epsilon).ln() / (2.0 * self.phi_plus_1));
        }
        let holds = |k: f64| self.chebyshev_at(k).is_some_and(|v| v >= 1.0 - epsilon);
        if let Some(k0) = (0..=k_max).rev().find(|&k| holds(k as f64)) {
            let (mut lo, mut hi) = (k0 as f64, k0 as f64 + 1.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if holds(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-13 {
                    break;
                }
            }
            offer(lo);
        }
        best
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    HasL2,
    NoL2,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::HasL2 => "HasL2",
            Verdict::NoL2 => "NoL2",
            Verdict::Inconclusive => "Inconclusive",
        })
    }
}

/// Whether `φ^k` has an `L²` density, judged on a finite window of the decay profile.
///
/// The asymptotic `liminf φ^±(i)/i` is replaced by the extremum over
/// `i ∈ [⌈R/2⌉, R]`; the verdict is only as good as that proxy.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityVerdict {
    pub verdict: Verdict,
    /// Slack of the deciding inequality (negative for `Inconclusive`).
    pub margin: f64,
    /// `ln(ω)/(2k)`.
    pub threshold: f64,
    pub window: (usize, usize),
    /// `φ^k` cannot extend to a bounded normal functional: positive values,
    /// exponential growth, rapid decay, and `φ⁺(i)/i` below the threshold.
    pub not_bounded_on_l_gamma: bool,
}

impl DensityVerdict {
    pub fn label(&self) -> String {
        if self.not_bounded_on_l_gamma {
            format!("{};NotBoundedOnLGamma", self.verdict)
        } else {
            self.verdict.to_string()
        }
    }
}

pub fn density_verdict(profile: &DecayProfile, omega: f64, k: u32) -> Result<DensityVerdict> {
    if profile.radius < MIN_DENSITY_RADIUS {
        return domain(format!("density verdict needs a profile of radius >= {MIN_DENSITY_RADIUS}"));
    }
    if k == 0 {
        return domain("density verdict needs k >= 1");
    }
    let r = profile.radius;
    let window = (r.div_ceil(2), r);
    let threshold = omega.max(1.0).ln() / (2.0 * k as f64);
    let indices = window.0..=window.1;
    let min_minus = indices.clone().map(|i| profile.minus(i) / i as f64).fold(f64::INFINITY, f64::min);
    let max_plus = indices.map(|i| profile.plus(i) / i as f64).fold(f64::NEG_INFINITY, f64::max);
    let (verdict, margin) = if min_minus > threshold {
        (Verdict::HasL2, min_minus - threshold)
    } else if max_plus < threshold {
        (Verdict::NoL2, threshold - max_plus)
    } else {
        (Verdict::Inconclusive, min_minus - threshold)
    };
    Ok(DensityVerdict { verdict, margin, threshold, window, not_bounded_on_l_gamma: false })
}

/// Groups in this crate known to have the rapid decay property.
pub fn known_rapid_decay(model: &GroupModel) -> bool {
    match model.kind() {
        GroupKind::Free { .. } | GroupKind::UniversalCoxeter { .. } => true,
        GroupKind::FreeProduct { factors } => factors.iter().all(known_rapid_decay),
        GroupKind::RightAngledCoxeter { .. } => false,
    }
}

/// [`density_verdict`] plus the boundedness flag, which needs the state and group.
pub fn density_verdict_for(phi: &StateModel, profile: &DecayProfile, omega: f64, k: u32) -> Result<DensityVerdict> {
    let mut v = density_verdict(profile, omega, k)?;
    v.not_bounded_on_l_gamma =
        v.verdict == Verdict::NoL2 && phi.positive_valued() && omega > 1.0 && known_rapid_decay(phi.model());
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanOptions {
    pub epsilon: f64,
    pub k_max: u32,
    pub radius: usize,
    pub cap: usize,
    /// Known cogrowth rate for the cogrowth lower bound (free markings need none).
    pub gamma: Option<f64>,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            epsilon: DEFAULT_EPSILON,
            k_max: DEFAULT_K_MAX,
            radius: 8,
            cap: crate::error::DEFAULT_CAP,
            gamma: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutoffWindow {
    pub family_param: u64,
    pub size_s: usize,
    /// Least integer `k ≤ k_max` with certified upper bound `≤ ε`.
    pub k_upper: Option<u32>,
    /// Greatest integer `1 ≤ k ≤ k_max` with a lower bound `≥ 1 − ε`.
    pub k_lower: Option<u32>,
    pub lower_kind: Option<LowerKind>,
    /// Real crossing of the upper bound through `ε`.
    pub k_upper_real: Option<f64>,
    /// Real crossing of the best lower-bound formula through `1 − ε`.
    pub k_lower_real: Option<f64>,
    /// `ln(|S|−1)/(2φ⁺(1))`.
    pub predicted: f64,
    /// `[ln√|S|/β, ln√|S|/α]` for free-product states.
    pub pre_cutoff: Option<(f64, f64)>,
    pub upper_rigor_at_1: Rigor,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutoffSummary {
    /// `sup_N (k_upper − predicted)`.
    pub upper_offset: Option<f64>,
    /// `sup_N (predicted − k_lower)`.
    pub lower_offset: Option<f64>,
    pub upper_offset_real: Option<f64>,
    pub lower_offset_real: Option<f64>,
    /// `k_upper` is defined for every member and nonincreasing in the parameter.
    pub no_cutoff: bool,
    /// `k_lower ≤ k_upper` wherever both are defined.
    pub ordered: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutoffScan {
    pub windows: Vec<CutoffWindow>,
    pub summary: CutoffSummary,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return domain(format!("epsilon must lie in (0, 1/2), got {epsilon}"));
    }
    Ok(())
}

/// Least real `k` in `(lo, hi]` with `f(k)`, given `f(hi)` and `!f(lo)`.
fn bisect_real(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * hi.abs().max(1.0) {
            break;
        }
    }
    hi
}

pub fn cutoff_window(family_param: u64, phi: &StateModel, opts: &ScanOptions) -> Result<CutoffWindow> {
    check_epsilon(opts.epsilon)?;
    let Some(cert) = phi.certificate() else {
        return domain(format!("cut-off scan needs a decay certificate; {phi} has none"));
    };
    let model = phi.model();
    let size_s = model.generating_set_size();
    let values = SphereValues::collect(phi, opts.radius.max(2), opts.cap)?;
    let profile = values.decay_profile();
    let lower = LowerBoundInputs::new(phi, &profile, opts.gamma);
    let eps = opts.epsilon;
    let mut flags = Vec::new();

    let upper = |k: f64| l2_upper_bound_from(phi, &values, k);
    let passes = |k: f64| upper(k).value <= eps;
    let k_upper = if passes(opts.k_max as f64) {
        let (mut lo, mut hi) = (0u32, opts.k_max);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if passes(mid as f64) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    } else {
        flags.push(format!("upper bound exceeds epsilon up to k_max = {}", opts.k_max));
        None
    };
    let k_upper_real = k_upper.map(|k| bisect_real(k as f64 - 1.0, k as f64, passes));

    let mut k_lower = None;
    let mut lower_kind = None;
    for k in (1..=opts.k_max).rev() {
        if let Some(b) = lower.best_at(k as f64).filter(|b| b.value >= 1.0 - eps) {
            k_lower = Some(k);
            lower_kind = Some(b.kind);
            break;
        }
    }
    if k_lower.is_none() {
        flags.push("k_lower undefined: no lower bound reaches 1 - epsilon at an integer k >= 1".into());
    }
    if let Some(why) = lower.minimal_gen_refusal() {
        flags.push(format!("minimal-generator bound refused: {why}"));
    }
    let k_lower_real = lower.threshold_real(eps, opts.k_max);

    if let (Some(lo), Some(hi)) = (k_lower, k_upper) {
        if lo > hi {
            flags.push(format!("window ordering violated: k_lower = {lo} > k_upper = {hi}"));
        }
    }

    let pre_cutoff = match phi.kind() {
        StateKind::FreeProduct(_) => {
            let alpha = cert.exponential_rate().unwrap_or(cert.rate);
            let beta = profile.plus(1);
            let half_log = (size_s as f64).sqrt().ln();
            Some((half_log / beta, half_log / alpha))
        }
        _ => None,
    };

    Ok(CutoffWindow {
        family_param,
        size_s,
        k_upper,
        k_lower,
        lower_kind,
        k_upper_real,
        k_lower_real,
        predicted: lower.predicted(),
        pre_cutoff,
        upper_rigor_at_1: upper(1.0).rigor,
        flags,
    })
}

fn sup(values: impl Iterator<Item = f64>) -> Option<f64> {
    values.fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
}

pub fn summarize(windows: &[CutoffWindow]) -> CutoffSummary {
    let upper_offset = sup(windows.iter().filter_map(|w| w.k_upper.map(|k| k as f64 - w.predicted)));
    let lower_offset = sup(windows.iter().filter_map(|w| w.k_lower.map(|k| w.predicted - k as f64)));
    let upper_offset_real = sup(windows.iter().filter_map(|w| w.k_upper_real.map(|k| k - w.predicted)));
    let lower_offset_real = sup(windows.iter().filter_map(|w| w.k_lower_real.map(|k| w.predicted - k)));
    let uppers: Option<Vec<u32>> = windows.iter().map(|w| w.k_upper).collect();
    let no_cutoff = !windows.is_empty() && uppers.is_some_and(|u| u.windows(2).all(|p| p[1] <= p[0]));
    let ordered = windows.iter().all(|w| match (w.k_lower, w.k_upper) {
        (Some(lo), Some(hi)) => lo <= hi,
        _ => true,
    });
    CutoffSummary { upper_offset, lower_offset, upper_offset_real, lower_offset_real, no_cutoff, ordered }
}

/// One window per family member, in ascending parameter order.
pub fn cutoff_scan(family: &[(u64, StateModel)], opts: &ScanOptions) -> Result<CutoffScan> {
    check_epsilon(opts.epsilon)?;
    let mut members: Vec<&(u64, StateModel)> = family.iter().collect();
    members.sort_by_key(|(n, _)| *n);
    let windows = members
        .par_iter()
        .map(|(n, phi)| cutoff_window(*n, phi, opts))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&windows);
    Ok(CutoffScan { windows, summary })
}

/// `DecayCertificate` rate used for the closed-form upper bound: the pure
/// exponential rate, when there is one.
pub fn closed_form_rate(cert: Option<DecayCertificate>) -> Option<f64> {
    cert.and_then(|c| c.exponential_rate())
}
