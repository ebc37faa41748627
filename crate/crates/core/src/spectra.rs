//! Growth and cogrowth statistics of a marked group.

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::groups::{GroupModel, Letter};

/// Exact sphere sizes `s_0..s_R` and the growth diagnostics `s_i^{1/i}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereTable {
    pub radius: usize,
    pub sizes: Vec<u128>,
    /// `s_i^{1/i}` for `1 ≤ i ≤ R` (index `i − 1`).
    pub growth_estimates: Vec<f64>,
}

impl SphereTable {
    /// The last `s_R^{1/R}`, or `1` once spheres have run out (finite group).
    pub fn omega_estimate(&self) -> f64 {
        match self.sizes.last() {
            Some(0) | None => 1.0,
            _ => self.growth_estimates.last().copied().unwrap_or(1.0),
        }
    }
}

pub fn growth_table(model: &GroupModel, radius: usize, cap: usize) -> Result<SphereTable> {
    if radius == 0 {
        return domain("growth table needs R >= 1");
    }
    let sizes = (0..=radius).map(|i| model.sphere_size(i, cap)).collect::<Result<Vec<_>>>()?;
    let growth_estimates = (1..=radius).map(|i| (sizes[i] as f64).powf(1.0 / i as f64)).collect();
    Ok(SphereTable { radius, sizes, growth_estimates })
}

/// `ω(S)` in closed form where known, else the finite-radius estimate.
pub fn omega(model: &GroupModel, radius: usize, cap: usize) -> Result<f64> {
    match model.growth_rate_closed_form() {
        Some(w) => Ok(w),
        None => Ok(growth_table(model, radius, cap)?.omega_estimate()),
    }
}

/// Counts `r_1..r_L` of reduced words of the marking `F_n → Γ` lying in its kernel.
///
/// The marking sends free letter `x_j^{±1}` to generator `j`; an involutive
/// generator receives both `x_j` and `x_j^{-1}`, so `x_j²` and `x_j^{-2}`
/// are both counted.
#[derive(Clone, Debug, PartialEq)]
pub struct CogrowthEstimate {
    pub max_length: usize,
    /// `r_i` at index `i − 1`.
    pub counts: Vec<u128>,
    pub gamma_hat: f64,
    /// `gamma_hat` is the free convention `√(|S|−1)` rather than a count.
    pub gamma_convention: bool,
    pub warnings: Vec<String>,
}

impl CogrowthEstimate {
    /// `gamma_hat` recomputed from `r_1..r_L'` only.
    pub fn gamma_hat_at(&self, length: usize, size_s: usize) -> (f64, bool) {
        last_nonvanishing_root(&self.counts[..length.min(self.counts.len())])
            .map_or(((size_s as f64 - 1.0).sqrt(), true), |g| (g, false))
    }

    /// `gamma_hat_at(1..=L)`: the finite-L trend.
    pub fn gamma_trend(&self, size_s: usize) -> Vec<f64> {
        (1..=self.max_length).map(|l| self.gamma_hat_at(l, size_s).0).collect()
    }
}

fn last_nonvanishing_root(counts: &[u128]) -> Option<f64> {
    counts
        .iter()
        .enumerate()
        .rev()
        .find(|(_, &r)| r > 0)
        .map(|(i, &r)| (r as f64).powf(1.0 / (i + 1) as f64))
}

/// Number of reduced words of length `1..=L` over `n` free generators, or `None` on overflow.
fn reduced_word_total(n: usize, max_length: usize) -> Option<u128> {
    let (first, branch) = (2 * n as u128, 2 * n as u128 - 1);
    let mut total = 0u128;
    let mut level = first;
    for i in 1..=max_length {
        if i > 1 {
            level = level.checked_mul(branch)?;
        }
        total = total.checked_add(level)?;
    }
    Some(total)
}

pub fn cogrowth_count(model: &GroupModel, max_length: usize, cap: usize) -> Result<CogrowthEstimate> {
    if max_length == 0 {
        return domain("cogrowth needs L >= 1");
    }
    let n = model.generator_count();
    match reduced_word_total(n, max_length) {
        Some(t) if t <= cap as u128 => {}
        _ => return Err(Error::Capacity { cap }),
    }
    let alphabet: Vec<Letter> = (0..n).flat_map(|g| [Letter::new(g), Letter::inv(g)]).collect();
    let per_first: Vec<Vec<u128>> = alphabet
        .par_iter()
        .map(|&first| {
            let mut counts = vec![0u128; max_length];
            let mut image = Vec::new();
            model.append_letter(&mut image, image_letter(model, first));
            kernel_dfs(model, &alphabet, first, &image, 1, max_length, &mut counts);
            counts
        })
        .collect();
    let mut counts = vec![0u128; max_length];
    for c in per_first {
        for (acc, v) in counts.iter_mut().zip(c) {
            *acc += v;
        }
    }
    let size_s = model.generating_set_size();
    let mut warnings = Vec::new();
    let (gamma_hat, gamma_convention) = match last_nonvanishing_root(&counts) {
        Some(g) => (g, false),
        None => {
            if !model.is_free_on_generators() {
                warnings.push(format!(
                    "no relation of length <= {max_length} found for {model}; using the free convention"
                ));
            }
            ((size_s as f64 - 1.0).sqrt(), true)
        }
    };
    let mut est = CogrowthEstimate { max_length, counts, gamma_hat, gamma_convention, warnings };
    if let Some(start) = est.counts.iter().position(|&r| r > 0) {
        let trend = est.gamma_trend(size_s);
        if trend[start..].windows(2).any(|w| w[1] < w[0] - 1e-12) {
            est.warnings.push("gamma_hat is not nondecreasing in L on the tested range".into());
        }
    }
    Ok(est)
}

fn image_letter(model: &GroupModel, l: Letter) -> Letter {
    if model.is_involutive(l.generator) {
        Letter::new(l.generator)
    } else {
        l
    }
}

fn kernel_dfs(
    model: &GroupModel,
    alphabet: &[Letter],
    last: Letter,
    image: &[Letter],
    depth: usize,
    max_length: usize,
    counts: &mut [u128],
) {
    if image.is_empty() {
        counts[depth - 1] += 1;
    }
    if depth == max_length {
        return;
    }
    for &l in alphabet {
        if l == last.flipped() {
            continue;
        }
        let mut next = image.to_vec();
        model.append_letter(&mut next, image_letter(model, l));
        kernel_dfs(model, alphabet, l, &next, depth + 1, max_length, counts);
    }
}

/// `‖χ₁‖ = γ + (|S|−1)/γ`, with `γ ≥ √(|S|−1)`.
pub fn chi1_norm_cohen(size_s: usize, gamma: f64) -> Result<f64> {
    if size_s < 2 {
        return domain("chi1 norm needs |S| >= 2");
    }
    let q = size_s as f64 - 1.0;
    if !(gamma >= q.sqrt() * (1.0 - 1e-12)) {
        return domain(format!("gamma = {gamma} is below the floor sqrt(|S|-1) = {}", q.sqrt()));
    }
    Ok(gamma + q / gamma)
}
