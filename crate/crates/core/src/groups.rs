//! Word arithmetic for marked groups.
//!
//! Every supported group is given with a fixed generating set `S` and a normal
//! form that is a geodesic, shortlex-minimal word over `S`. Generators are
//! indexed from zero; free generators contribute two letters (`a`, `a⁻¹`),
//! Coxeter generators are involutions and contribute one.
//!
//! Supported models:
//! - `Free(N)`: free reduction.
//! - `UniversalCoxeter(N)`: `Z/2 * ... * Z/2`, adjacent equal letters cancel.
//! - `RightAngledCoxeter(graph)`: involutions, edges of the graph commute.
//! - `FreeProduct(factors)`: blocks of letters from one factor, normalized
//!   inside that factor.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{domain, Error, Result};

/// A generator or the inverse of a generator.
///
/// The derived ordering is `(generator, inverted)`, which is the shortlex
/// alphabet order used everywhere: `a < a⁻¹ < b < b⁻¹ < ...`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub generator: usize,
    pub inverted: bool,
}

impl Letter {
    pub const fn new(generator: usize) -> Self {
        Letter { generator, inverted: false }
    }

    pub const fn inv(generator: usize) -> Self {
        Letter { generator, inverted: true }
    }

    pub const fn flipped(self) -> Self {
        Letter { generator: self.generator, inverted: !self.inverted }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.generator < 26 {
            let base = b'a' + self.generator as u8;
            let c = if self.inverted { base.to_ascii_uppercase() } else { base };
            write!(f, "{}", c as char)
        } else if self.inverted {
            write!(f, "X{}", self.generator)
        } else {
            write!(f, "x{}", self.generator)
        }
    }
}

/// A group element stored as its normal-form word.
///
/// Ordering is shortlex (length first, then lexicographic on letters).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct GroupElement {
    letters: Vec<Letter>,
}

impl GroupElement {
    pub fn identity() -> Self {
        GroupElement { letters: Vec::new() }
    }

    #[cfg(test)]
    pub(crate) fn from_normal(letters: Vec<Letter>) -> Self {
        GroupElement { letters }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    /// Word length `|g|_S`.
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }
}

impl Ord for GroupElement {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| self.letters.cmp(&other.letters))
    }
}

impl PartialOrd for GroupElement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "e");
        }
        for l in &self.letters {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GroupKind {
    Free { rank: usize },
    UniversalCoxeter { rank: usize },
    /// `commutes[i][j]` is true when `s_i s_j = s_j s_i`.
    RightAngledCoxeter { commutes: Vec<Vec<bool>> },
    /// Factors are never themselves free products; nested products are flattened.
    FreeProduct { factors: Vec<GroupModel> },
}

/// A marked group together with its normal-form engine.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupModel {
    kind: GroupKind,
    generator_count: usize,
    /// First global generator index of each free-product factor.
    offsets: Vec<usize>,
}

impl GroupModel {
    pub fn free(rank: usize) -> Result<Self> {
        if rank == 0 {
            return domain("free group needs rank >= 1");
        }
        Ok(GroupModel { kind: GroupKind::Free { rank }, generator_count: rank, offsets: Vec::new() })
    }

    pub fn universal_coxeter(rank: usize) -> Result<Self> {
        if rank < 2 {
            return domain("universal Coxeter group needs rank >= 2");
        }
        Ok(GroupModel {
            kind: GroupKind::UniversalCoxeter { rank },
            generator_count: rank,
            offsets: Vec::new(),
        })
    }

    /// Right-angled Coxeter group on `vertices` involutions; each edge is a
    /// commuting pair.
    pub fn right_angled_coxeter(vertices: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if vertices < 2 {
            return domain("right-angled Coxeter group needs at least 2 vertices");
        }
        let mut commutes = vec![vec![false; vertices]; vertices];
        for &(u, v) in edges {
            if u >= vertices || v >= vertices {
                return domain(format!("edge ({u}, {v}) out of range for {vertices} vertices"));
            }
            if u == v {
                return domain(format!("commutation graph has a loop at {u}"));
            }
            commutes[u][v] = true;
            commutes[v][u] = true;
        }
        Ok(GroupModel {
            kind: GroupKind::RightAngledCoxeter { commutes },
            generator_count: vertices,
            offsets: Vec::new(),
        })
    }

    /// Coxeter group from its matrix, `None` standing for `∞`.
    ///
    /// Only entries in `{2, ∞}` are accepted off the diagonal.
    pub fn from_coxeter_matrix(matrix: &[Vec<Option<u32>>]) -> Result<Self> {
        let n = matrix.len();
        if matrix.iter().any(|row| row.len() != n) {
            return domain("Coxeter matrix must be square");
        }
        let mut edges = Vec::new();
        for i in 0..n {
            if matrix[i][i] != Some(1) {
                return domain(format!("Coxeter matrix diagonal entry ({i}, {i}) must be 1"));
            }
            for j in (i + 1)..n {
                if matrix[i][j] != matrix[j][i] {
                    return domain("Coxeter matrix must be symmetric");
                }
                match matrix[i][j] {
                    None => {}
                    Some(2) => edges.push((i, j)),
                    Some(m) => {
                        return Err(Error::Unsupported(format!(
                            "Coxeter entry m({i},{j}) = {m}; only 2 and infinity are supported"
                        )))
                    }
                }
            }
        }
        if edges.is_empty() {
            Self::universal_coxeter(n)
        } else {
            Self::right_angled_coxeter(n, &edges)
        }
    }

    pub fn free_product(factors: Vec<GroupModel>) -> Result<Self> {
        let mut flat = Vec::new();
        for f in factors {
            match f.kind {
                GroupKind::FreeProduct { factors: inner } => flat.extend(inner),
                _ => flat.push(f),
            }
        }
        if flat.is_empty() {
            return domain("free product needs at least one factor");
        }
        let mut offsets = Vec::with_capacity(flat.len());
        let mut total = 0;
        for f in &flat {
            offsets.push(total);
            total += f.generator_count;
        }
        Ok(GroupModel { kind: GroupKind::FreeProduct { factors: flat }, generator_count: total, offsets })
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    pub fn factors(&self) -> Option<&[GroupModel]> {
        match &self.kind {
            GroupKind::FreeProduct { factors } => Some(factors),
            _ => None,
        }
    }

    pub fn generator_count(&self) -> usize {
        self.generator_count
    }

    /// `|S|`.
    pub fn generating_set_size(&self) -> usize {
        match &self.kind {
            GroupKind::Free { rank } => 2 * rank,
            GroupKind::UniversalCoxeter { rank } => *rank,
            GroupKind::RightAngledCoxeter { commutes } => commutes.len(),
            GroupKind::FreeProduct { factors } => factors.iter().map(|f| f.generating_set_size()).sum(),
        }
    }

    pub fn is_involutive(&self, generator: usize) -> bool {
        match &self.kind {
            GroupKind::Free { .. } => false,
            GroupKind::UniversalCoxeter { .. } | GroupKind::RightAngledCoxeter { .. } => true,
            GroupKind::FreeProduct { factors } => {
                let (f, local) = self.factor_of(generator);
                factors[f].is_involutive(local)
            }
        }
    }

    /// The symmetric generating set in shortlex alphabet order.
    pub fn generating_set(&self) -> Vec<Letter> {
        let mut out = Vec::with_capacity(self.generating_set_size());
        for g in 0..self.generator_count {
            out.push(Letter::new(g));
            if !self.is_involutive(g) {
                out.push(Letter::inv(g));
            }
        }
        out
    }

    /// Whether the canonical generating set is recorded as minimal.
    ///
    /// True for every shipped kind; a free product inherits the flag from its
    /// factors. This is a recorded property, not a proof.
    pub fn is_minimal(&self) -> bool {
        match &self.kind {
            GroupKind::FreeProduct { factors } => factors.iter().all(|f| f.is_minimal()),
            _ => true,
        }
    }

    /// True when the group is free on the generators (so `s_i = |S|(|S|-1)^{i-1}`).
    pub fn is_free_on_generators(&self) -> bool {
        match &self.kind {
            GroupKind::Free { .. } => true,
            GroupKind::FreeProduct { factors } => factors.iter().all(|f| matches!(f.kind, GroupKind::Free { .. })),
            _ => false,
        }
    }

    /// Sphere sizes have a closed form for free groups and universal Coxeter groups.
    pub fn has_closed_form_spheres(&self) -> bool {
        matches!(self.kind, GroupKind::Free { .. } | GroupKind::UniversalCoxeter { .. })
    }

    /// Exact growth rate `ω(S)` where it is known in closed form.
    pub fn growth_rate_closed_form(&self) -> Option<f64> {
        match &self.kind {
            GroupKind::Free { rank } => Some((2 * rank - 1) as f64),
            GroupKind::UniversalCoxeter { rank } => Some((rank - 1) as f64),
            _ => None,
        }
    }

    /// Global generator index → (factor, local generator index).
    pub fn factor_of(&self, generator: usize) -> (usize, usize) {
        match self.offsets.binary_search(&generator) {
            Ok(f) => (f, 0),
            Err(f) => (f - 1, generator - self.offsets[f - 1]),
        }
    }

    pub fn factor_offset(&self, factor: usize) -> usize {
        self.offsets[factor]
    }

    fn check_letter(&self, l: Letter) -> Result<Letter> {
        if l.generator >= self.generator_count {
            return domain(format!(
                "generator index {} out of range for {} generators",
                l.generator, self.generator_count
            ));
        }
        if self.is_involutive(l.generator) {
            Ok(Letter::new(l.generator))
        } else {
            Ok(l)
        }
    }

    /// Appends one (valid, canonical) letter to a normal-form word, keeping it normal.
    pub(crate) fn append_letter(&self, word: &mut Vec<Letter>, l: Letter) {
        match &self.kind {
            GroupKind::Free { .. } => {
                if word.last() == Some(&l.flipped()) {
                    word.pop();
                } else {
                    word.push(l);
                }
            }
            GroupKind::UniversalCoxeter { .. } => {
                if word.last() == Some(&l) {
                    word.pop();
                } else {
                    word.push(l);
                }
            }
            GroupKind::RightAngledCoxeter { commutes } => racg_append(commutes, word, l),
            GroupKind::FreeProduct { factors } => {
                let (f, local) = self.factor_of(l.generator);
                let offset = self.offsets[f];
                let block_start = word
                    .iter()
                    .rposition(|x| self.factor_of(x.generator).0 != f)
                    .map_or(0, |p| p + 1);
                let mut block: Vec<Letter> = word[block_start..]
                    .iter()
                    .map(|x| Letter { generator: x.generator - offset, inverted: x.inverted })
                    .collect();
                factors[f].append_letter(&mut block, Letter { generator: local, inverted: l.inverted });
                word.truncate(block_start);
                word.extend(block.into_iter().map(|x| Letter { generator: x.generator + offset, inverted: x.inverted }));
            }
        }
    }

    fn is_normal_extension(&self, prefix: &[Letter], l: Letter) -> bool {
        match &self.kind {
            GroupKind::Free { .. } => prefix.last() != Some(&l.flipped()),
            GroupKind::UniversalCoxeter { .. } => prefix.last() != Some(&l),
            _ => {
                let mut w = prefix.to_vec();
                self.append_letter(&mut w, l);
                w.len() == prefix.len() + 1 && w[..prefix.len()] == *prefix && w[prefix.len()] == l
            }
        }
    }

    /// Canonical representative of the product of `raw`.
    pub fn normal_form(&self, raw: &[Letter]) -> Result<GroupElement> {
        let mut word = Vec::with_capacity(raw.len());
        for &l in raw {
            let l = self.check_letter(l)?;
            self.append_letter(&mut word, l);
        }
        Ok(GroupElement { letters: word })
    }

    pub fn letter_element(&self, l: Letter) -> Result<GroupElement> {
        self.normal_form(&[l])
    }

    /// Product `gh` of two normal forms of this model.
    ///
    /// Panics if either element carries a generator index outside this model.
    pub fn multiply(&self, g: &GroupElement, h: &GroupElement) -> GroupElement {
        let mut word = g.letters.clone();
        for &l in &h.letters {
            assert!(l.generator < self.generator_count, "element does not belong to this model");
            self.append_letter(&mut word, l);
        }
        GroupElement { letters: word }
    }

    pub fn inverse(&self, g: &GroupElement) -> GroupElement {
        let mut word = Vec::with_capacity(g.len());
        for &l in g.letters.iter().rev() {
            let li = if self.is_involutive(l.generator) { l } else { l.flipped() };
            self.append_letter(&mut word, li);
        }
        GroupElement { letters: word }
    }

    /// Alternating block decomposition of a free-product element:
    /// `(factor, element of that factor in local indices)`.
    pub fn blocks(&self, g: &GroupElement) -> Vec<(usize, GroupElement)> {
        let mut out: Vec<(usize, GroupElement)> = Vec::new();
        if self.factors().is_none() {
            if !g.is_identity() {
                out.push((0, g.clone()));
            }
            return out;
        }
        for &l in &g.letters {
            let (f, local) = self.factor_of(l.generator);
            let local = Letter { generator: local, inverted: l.inverted };
            match out.last_mut() {
                Some((lf, block)) if *lf == f => block.letters.push(local),
                _ => out.push((f, GroupElement { letters: vec![local] })),
            }
        }
        out
    }

    /// Elements of word length `radius`, in shortlex order.
    pub fn enumerate_sphere(&self, radius: usize, cap: usize) -> SphereStream<'_> {
        SphereStream {
            model: self,
            alphabet: self.generating_set(),
            radius,
            word: Vec::with_capacity(radius),
            cursor: vec![0; radius + 1],
            emitted: 0,
            cap,
            done: false,
        }
    }

    pub fn sphere_elements(&self, radius: usize, cap: usize) -> Result<Vec<GroupElement>> {
        self.enumerate_sphere(radius, cap).collect()
    }

    /// Spheres `S(0), ..., S(radius)`, with `cap` bounding the total element count.
    pub fn ball_spheres(&self, radius: usize, cap: usize) -> Result<Vec<Vec<GroupElement>>> {
        let mut out = Vec::with_capacity(radius + 1);
        let mut used = 0usize;
        for i in 0..=radius {
            let sphere = self.sphere_elements(i, cap - used.min(cap))?;
            used += sphere.len();
            out.push(sphere);
        }
        Ok(out)
    }

    /// Ball `B(radius)` in shortlex order.
    pub fn ball(&self, radius: usize, cap: usize) -> Result<Vec<GroupElement>> {
        Ok(self.ball_spheres(radius, cap)?.into_iter().flatten().collect())
    }

    /// Closed-form `s_i` as a float, for models where it is known.
    pub fn closed_form_sphere_size(&self, i: usize) -> Option<f64> {
        if i == 0 {
            return Some(1.0);
        }
        let (size, q) = match &self.kind {
            GroupKind::Free { rank } => (2 * rank, 2 * rank - 1),
            GroupKind::UniversalCoxeter { rank } => (*rank, rank - 1),
            _ => return None,
        };
        Some(size as f64 * (q as f64).powi(i as i32 - 1))
    }

    /// `s_i`: closed form where available, enumeration count otherwise.
    pub fn sphere_size(&self, i: usize, cap: usize) -> Result<u128> {
        if i == 0 {
            return Ok(1);
        }
        let closed = match &self.kind {
            GroupKind::Free { rank } => Some((2 * *rank as u128, 2 * *rank as u128 - 1)),
            GroupKind::UniversalCoxeter { rank } => Some((*rank as u128, *rank as u128 - 1)),
            _ => None,
        };
        if let Some((size, q)) = closed {
            let pow = q
                .checked_pow(i as u32 - 1)
                .and_then(|p| p.checked_mul(size))
                .ok_or_else(|| Error::Domain(format!("sphere size s_{i} overflows u128")))?;
            return Ok(pow);
        }
        let mut count = 0u128;
        for e in self.enumerate_sphere(i, cap) {
            e?;
            count += 1;
        }
        Ok(count)
    }
}

impl fmt::Display for GroupModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            GroupKind::Free { rank } => write!(f, "Free({rank})"),
            GroupKind::UniversalCoxeter { rank } => write!(f, "UniversalCoxeter({rank})"),
            GroupKind::RightAngledCoxeter { commutes } => {
                write!(f, "RightAngledCoxeter({}; ", commutes.len())?;
                let mut first = true;
                for (i, row) in commutes.iter().enumerate() {
                    for (j, &c) in row.iter().enumerate().skip(i + 1) {
                        if c {
                            if !first {
                                write!(f, ",")?;
                            }
                            write!(f, "{i}-{j}")?;
                            first = false;
                        }
                    }
                }
                write!(f, ")")
            }
            GroupKind::FreeProduct { factors } => {
                write!(f, "FreeProduct[")?;
                for (i, fac) in factors.iter().enumerate() {
                    if i > 0 {
                        write!(f, " * ")?;
                    }
                    write!(f, "{fac}")?;
                }
                write!(f, "]")
            }
        }
    }
}

fn racg_append(commutes: &[Vec<bool>], word: &mut Vec<Letter>, s: Letter) {
    // s cancels against its last occurrence if everything after it commutes with s.
    for idx in (0..word.len()).rev() {
        let x = word[idx].generator;
        if x == s.generator {
            word.remove(idx);
            return;
        }
        if !commutes[x][s.generator] {
            break;
        }
    }
    word.push(s);
    lexicographic_min(commutes, word);
}

/// Rearranges a reduced word into the lexicographically least word of its
/// commutation class: repeatedly take the smallest letter that can be moved
/// to the front.
fn lexicographic_min(commutes: &[Vec<bool>], word: &mut Vec<Letter>) {
    let mut rest: Vec<Letter> = std::mem::take(word);
    while !rest.is_empty() {
        let mut best: Option<usize> = None;
        for p in 0..rest.len() {
            let x = rest[p].generator;
            let free = rest[..p].iter().all(|y| commutes[y.generator][x]);
            if free && best.is_none_or(|b| x < rest[b].generator) {
                best = Some(p);
            }
        }
        let b = best.expect("first letter is always movable");
        word.push(rest.remove(b));
    }
}

/// Depth-first shortlex stream of one sphere.
pub struct SphereStream<'a> {
    model: &'a GroupModel,
    alphabet: Vec<Letter>,
    radius: usize,
    word: Vec<Letter>,
    cursor: Vec<usize>,
    emitted: usize,
    cap: usize,
    done: bool,
}

impl SphereStream<'_> {
    fn emit(&mut self, e: GroupElement) -> Option<Result<GroupElement>> {
        if self.emitted >= self.cap {
            self.done = true;
            return Some(Err(Error::Capacity { cap: self.cap }));
        }
        self.emitted += 1;
        Some(Ok(e))
    }
}

impl Iterator for SphereStream<'_> {
    type Item = Result<GroupElement>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        if self.radius == 0 {
            self.done = true;
            return self.emit(GroupElement::identity());
        }
        loop {
            let depth = self.word.len();
            if depth == self.radius {
                let e = GroupElement { letters: self.word.clone() };
                self.word.pop();
                return self.emit(e);
            }
            let idx = self.cursor[depth];
            if idx >= self.alphabet.len() {
                if depth == 0 {
                    self.done = true;
                    return None;
                }
                self.cursor[depth] = 0;
                self.word.pop();
                continue;
            }
            self.cursor[depth] += 1;
            let s = self.alphabet[idx];
            if self.model.is_normal_extension(&self.word, s) {
                self.word.push(s);
                self.cursor[depth + 1] = 0;
            }
        }
    }
}
