//! Brute-force recomputation of the closed forms in `states`, `spectra` and `bounds`.
//!
//! Nothing here reuses the sphere enumerator or the closed-form evaluators:
//! free-group words are handled as signed integers with their own reduction,
//! other models are explored breadth-first through `normal_form` alone.

use std::collections::{BTreeMap, HashSet};

use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::groups::{GroupElement, GroupKind, GroupModel, Letter};
use crate::states::{RadialCoefficients, StateKind, StateModel};

/// A free-group word: letter `x_g^{±1}` is `±(g + 1)`.
pub type Word = Vec<i32>;

fn signed(l: Letter) -> i32 {
    let v = l.generator as i32 + 1;
    if l.inverted {
        -v
    } else {
        v
    }
}

pub fn word_of(g: &GroupElement) -> Word {
    g.letters().iter().map(|&l| signed(l)).collect()
}

/// Reduced product of two reduced words.
pub fn free_product_word(a: &[i32], b: &[i32]) -> Word {
    let mut out = a.to_vec();
    for &x in b {
        if out.last() == Some(&-x) {
            out.pop();
        } else {
            out.push(x);
        }
    }
    out
}

/// `|ab|` for reduced `a`, `b`, without building the product.
fn reduced_len(a: &[i32], b: &[i32]) -> usize {
    let mut t = 0;
    while t < a.len() && t < b.len() && a[a.len() - 1 - t] == -b[t] {
        t += 1;
    }
    a.len() + b.len() - 2 * t
}

fn free_rank(model: &GroupModel) -> Result<usize> {
    match model.kind() {
        GroupKind::Free { rank } => Ok(*rank),
        _ => domain(format!("this oracle needs a free group, not {model}")),
    }
}

/// All reduced words of length `≤ max_len`, grouped by length.
fn reduced_words(rank: usize, max_len: usize, cap: usize) -> Result<Vec<Vec<Word>>> {
    let letters: Vec<i32> = (1..=rank as i32).flat_map(|g| [g, -g]).collect();
    let mut layers: Vec<Vec<Word>> = vec![vec![Vec::new()]];
    let mut total = 1usize;
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in layers.last().unwrap() {
            for &x in &letters {
                if w.last() != Some(&-x) {
                    let mut v = w.clone();
                    v.push(x);
                    next.push(v);
                }
            }
        }
        total += next.len();
        if total > cap {
            return Err(Error::Capacity { cap });
        }
        layers.push(next);
    }
    Ok(layers)
}

/// A finitely supported vector in `ℓ²(F_N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedL2Vector {
    pub radius: usize,
    amps: BTreeMap<Word, Complex64>,
}

impl TruncatedL2Vector {
    /// `ξ = Σ λ_i χ_i`, supported on `B(M)` for `M` the last coefficient index.
    pub fn radial(model: &GroupModel, coeffs: &RadialCoefficients, cap: usize) -> Result<Self> {
        let rank = free_rank(model)?;
        let radius = coeffs.support_radius();
        let mut amps = BTreeMap::new();
        for (i, layer) in reduced_words(rank, radius, cap)?.into_iter().enumerate() {
            let l = coeffs.lambda()[i];
            if l != 0.0 {
                amps.extend(layer.into_iter().map(|w| (w, Complex64::new(l, 0.0))));
            }
        }
        Ok(TruncatedL2Vector { radius, amps })
    }

    pub fn support_len(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    /// `(π(g)ξ)(x) = ξ(g⁻¹x)`.
    pub fn translate(&self, g: &[i32]) -> Self {
        let amps = self.amps.iter().map(|(w, a)| (free_product_word(g, w), *a)).collect();
        TruncatedL2Vector { radius: self.radius + g.len(), amps }
    }

    /// `⟨self, other⟩ = Σ_x self(x)·conj(other(x))`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amps.iter().filter_map(|(w, a)| other.amps.get(w).map(|b| a * b.conj())).sum()
    }
}

/// `⟨π(g)ξ, ξ⟩` by translating the truncated vector.
///
/// `radius` must cover the translated support, `M + |g|`; anything smaller
/// would silently drop mass and is refused.
pub fn radial_direct_inner_product(
    model: &GroupModel,
    coeffs: &RadialCoefficients,
    g: &GroupElement,
    radius: usize,
    cap: usize,
) -> Result<Complex64> {
    free_rank(model)?;
    let need = coeffs.support_radius() + g.len();
    if radius < need {
        return domain(format!("radius {radius} would truncate: need at least {need}"));
    }
    let xi = TruncatedL2Vector::radial(model, coeffs, cap)?;
    Ok(xi.translate(&word_of(g)).inner(&xi))
}

/// `|gS(i) ∩ S(j)|` by enumerating `S(i)`.
pub fn intersection_count(model: &GroupModel, g: &GroupElement, i: usize, j: usize, cap: usize) -> Result<u64> {
    let rank = free_rank(model)?;
    let gw = word_of(g);
    let layers = reduced_words(rank, i, cap)?;
    Ok(layers[i].iter().filter(|h| reduced_len(&gw, h) == j).count() as u64)
}

/// `table[i][j] = |gS(i) ∩ S(j)|` for `i ≤ max_i`, all `j`.
pub fn intersection_table(model: &GroupModel, g: &GroupElement, max_i: usize, cap: usize) -> Result<Vec<Vec<u64>>> {
    let rank = free_rank(model)?;
    let gw = word_of(g);
    let layers = reduced_words(rank, max_i, cap)?;
    Ok(table_for(&gw, &layers, max_i))
}

fn table_for(gw: &[i32], layers: &[Vec<Word>], max_i: usize) -> Vec<Vec<u64>> {
    (0..=max_i)
        .map(|i| {
            let mut row = vec![0u64; i + gw.len() + 1];
            for h in &layers[i] {
                row[reduced_len(gw, h)] += 1;
            }
            row
        })
        .collect()
}

/// Evaluates `⟨π(g)ξ, ξ⟩ = Σ_{i,j} λ_i λ_j |gS(i) ∩ S(j)|` for many `g` and `ξ`.
///
/// The counts depend only on `g`, so they are enumerated once per element and
/// reused across coefficient vectors.
pub struct RadialOracle {
    tables: Vec<(GroupElement, Vec<Vec<u64>>)>,
}

impl RadialOracle {
    pub fn new(model: &GroupModel, elements: &[GroupElement], support_radius: usize, cap: usize) -> Result<Self> {
        let rank = free_rank(model)?;
        let layers = reduced_words(rank, support_radius, cap)?;
        let tables = elements.iter().map(|g| (g.clone(), table_for(&word_of(g), &layers, support_radius))).collect();
        Ok(RadialOracle { tables })
    }

    pub fn elements(&self) -> impl Iterator<Item = &GroupElement> {
        self.tables.iter().map(|(g, _)| g)
    }

    /// Values at every element, in construction order.
    pub fn values(&self, coeffs: &RadialCoefficients) -> Vec<f64> {
        let lam = coeffs.lambda();
        let at = |j: usize| lam.get(j).copied().unwrap_or(0.0);
        self.tables
            .iter()
            .map(|(_, table)| {
                table
                    .iter()
                    .enumerate()
                    .take(lam.len())
                    .map(|(i, row)| lam[i] * row.iter().enumerate().map(|(j, &n)| n as f64 * at(j)).sum::<f64>())
                    .sum()
            })
            .collect()
    }
}

/// Ball `B(R)` explored breadth-first from the generators through `normal_form`.
pub fn bfs_ball(model: &GroupModel, radius: usize, cap: usize) -> Result<Vec<Vec<GroupElement>>> {
    let gens = model.generating_set();
    let mut seen: HashSet<GroupElement> = HashSet::new();
    seen.insert(GroupElement::identity());
    let mut layers = vec![vec![GroupElement::identity()]];
    for _ in 0..radius {
        let mut next = Vec::new();
        for g in layers.last().unwrap() {
            for &s in &gens {
                let mut raw = g.letters().to_vec();
                raw.push(s);
                let h = model.normal_form(&raw)?;
                if seen.insert(h.clone()) {
                    next.push(h);
                }
            }
        }
        if seen.len() > cap {
            return Err(Error::Capacity { cap });
        }
        next.sort();
        layers.push(next);
    }
    Ok(layers)
}

/// Compensated sum; balls hold enough terms for naive accumulation to drift past 1e-13.
fn neumaier_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + comp
}

/// `Σ_{g∈B(R)∖{e}} |φ(g)|^{2k}` over a breadth-first ball.
pub fn tv_l2_truncated_sum(phi: &StateModel, k: u32, radius: usize, cap: usize) -> Result<f64> {
    let layers = bfs_ball(phi.model(), radius, cap)?;
    Ok(neumaier_sum(layers.iter().skip(1).flatten().map(|g| phi.abs(g).powi(2 * k as i32))))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    /// `φ^k(χ₁)`.
    pub mean: f64,
    /// `φ^k(χ₁²) − φ^k(χ₁)²`.
    pub variance: f64,
}

fn pair_product(model: &GroupModel, g: Letter, h: Letter) -> Result<GroupElement> {
    match model.kind() {
        GroupKind::Free { .. } => {
            let w = free_product_word(&[signed(g)], &[signed(h)]);
            let letters: Vec<Letter> = w
                .iter()
                .map(|&x| Letter { generator: x.unsigned_abs() as usize - 1, inverted: x < 0 })
                .collect();
            model.normal_form(&letters)
        }
        _ => model.normal_form(&[g, h]),
    }
}

/// Mean and variance of `χ₁` under `φ^k`, expanding `χ₁²` over ordered pairs.
pub fn variance_exact(phi: &StateModel, k: u32) -> Result<Moments> {
    if k == 0 {
        return domain("variance needs k >= 1");
    }
    let model = phi.model();
    let gens = model.generating_set();
    let value = |g: &GroupElement| phi.evaluate(g).powu(k);
    let mut mean = Complex64::new(0.0, 0.0);
    let mut second = Complex64::new(0.0, 0.0);
    for &g in &gens {
        mean += value(&model.normal_form(&[g])?);
        for &h in &gens {
            second += value(&pair_product(model, g, h)?);
        }
    }
    Ok(Moments { mean: mean.re, variance: second.re - mean.re * mean.re })
}

/// Recomputes `φ(g)` for a free-product state from its own block split.
pub fn free_product_refactor_check(phi: &StateModel, g: &GroupElement) -> Result<bool> {
    let StateKind::FreeProduct(factors) = phi.kind() else {
        return domain("free_product_refactor_check needs a free-product state");
    };
    let model = phi.model();
    let group_factors = model.factors().expect("free-product state on a free-product model");
    let mut value = Complex64::new(1.0, 0.0);
    let letters = g.letters();
    let mut start = 0;
    while start < letters.len() {
        let f = model.factor_of(letters[start].generator).0;
        let mut end = start;
        while end < letters.len() && model.factor_of(letters[end].generator).0 == f {
            end += 1;
        }
        let offset = model.factor_offset(f);
        let local: Vec<Letter> = letters[start..end]
            .iter()
            .map(|l| Letter { generator: l.generator - offset, inverted: l.inverted })
            .collect();
        value *= factors[f].evaluate(&group_factors[f].normal_form(&local)?);
        start = end;
    }
    let direct = phi.evaluate(g);
    Ok((value - direct).norm() <= 1e-14 * direct.norm().max(1.0))
}

/// Kernel counts `r_1..r_L` from all words over the free alphabet, filtered for
/// reducedness and mapped through `normal_form`.
pub fn cogrowth_bruteforce(model: &GroupModel, max_length: usize, cap: usize) -> Result<Vec<u64>> {
    let n = model.generator_count();
    let alphabet: Vec<Letter> = (0..n).flat_map(|g| [Letter::new(g), Letter::inv(g)]).collect();
    let a = alphabet.len();
    let total: u128 = (1..=max_length as u32).map(|i| (a as u128).pow(i)).sum();
    if total > cap as u128 {
        return Err(Error::Capacity { cap });
    }
    let mut counts = vec![0u64; max_length];
    for len in 1..=max_length {
        for code in 0..(a as u64).pow(len as u32) {
            let mut rest = code;
            let word: Vec<Letter> = (0..len)
                .map(|_| {
                    let l = alphabet[(rest % a as u64) as usize];
                    rest /= a as u64;
                    l
                })
                .collect();
            if word.windows(2).any(|w| w[1] == w[0].flipped()) {
                continue;
            }
            let image: Vec<Letter> = word
                .iter()
                .map(|l| if model.is_involutive(l.generator) { Letter::new(l.generator) } else { *l })
                .collect();
            if model.normal_form(&image)?.is_identity() {
                counts[len - 1] += 1;
            }
        }
    }
    Ok(counts)
}
