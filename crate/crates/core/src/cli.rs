//! Command-line driver: experiment configs in, deterministic CSV and reports out.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::Value;

use crate::bounds::{
    closed_form_upper, cutoff_scan, density_verdict_for, l2_upper_bound_from, LowerBoundInputs, Rigor, ScanOptions,
    SphereValues, DIVERGENCE_MARGIN,
};
use crate::error::{cap_from_env, Error, Result};
use crate::groups::{GroupElement, GroupModel};
use crate::oracle;
use crate::spectra::{cogrowth_count, omega};
use crate::states::{
    certificate_holds, counit_state, free_product_state, gram_psd_check, length_state, power_state, radial_state,
    RadialCoefficients, StateKind, StateModel, RADIAL_NORM_TOL,
};

pub const SCHEMA: &str = "cutofflab/v1";

#[derive(Parser, Debug)]
#[command(name = "cutofflab", version, about = "Certified total-variation bounds for powers of positive definite functions on groups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// One CSV row per k for a single group and state.
    Analyze(CommonArgs),
    /// Cut-off windows across a family.
    Scan(CommonArgs),
    /// Run the brute-force oracle comparisons.
    Verify(CommonArgs),
    /// Kernel counts of the free marking.
    Cogrowth(CommonArgs),
    /// Gram-matrix positivity on a ball.
    PsdCheck(CommonArgs),
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Enumeration cap (default: $CUTOFFLAB_CAP or 1000000).
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub radius: Option<usize>,
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub group: Value,
    pub state: Value,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub family: Option<FamilyConfig>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub k_min: u32,
    pub k_max: u32,
    pub radius: usize,
    /// Radius of the decay profile behind density verdicts (at least 5).
    pub profile_radius: Option<usize>,
    pub epsilon: f64,
    /// Known cogrowth rate for the cogrowth lower bound.
    pub gamma: Option<f64>,
    pub cogrowth_length: usize,
    /// Random radial coefficient vectors checked by `verify`.
    pub seeds: u64,
    pub seed: u64,
    pub tolerances: Tolerances,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            k_min: 1,
            k_max: 64,
            radius: 8,
            profile_radius: None,
            epsilon: 0.01,
            gamma: None,
            cogrowth_length: 6,
            seeds: 20,
            seed: 0,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Deserialize, Debug, Clone, Copy, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub psd: f64,
    pub strict: f64,
    /// Absolute tolerance for pointwise oracle comparisons.
    pub oracle: f64,
    /// Relative tolerance for summed quantities.
    pub relative: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { psd: 1e-9, strict: 1e-12, oracle: 1e-10, relative: 1e-12 }
    }
}

#[derive(Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    #[serde(default = "default_parameter")]
    pub parameter: String,
    #[serde(default)]
    pub values: Option<Vec<u64>>,
    /// Inclusive `[first, last]`.
    #[serde(default)]
    pub range: Option<[u64; 2]>,
}

fn default_parameter() -> String {
    "N".into()
}

impl FamilyConfig {
    pub fn members(&self) -> Result<Vec<u64>> {
        let mut v = match (&self.values, self.range) {
            (Some(v), None) => v.clone(),
            (None, Some([a, b])) if a <= b => (a..=b).collect(),
            (None, Some(_)) => return Err(Error::Config("family range must be [first, last] with first <= last".into())),
            _ => return Err(Error::Config("family needs exactly one of `values` or `range`".into())),
        };
        v.sort_unstable();
        v.dedup();
        if v.is_empty() {
            return Err(Error::Config("family has no members".into()));
        }
        Ok(v)
    }
}

#[derive(Deserialize, Debug, Clone, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupDescriptor {
    Free { rank: usize },
    UniversalCoxeter { rank: usize },
    RightAngledCoxeter {
        vertices: usize,
        /// Commuting pairs.
        #[serde(default)]
        edges: Vec<(usize, usize)>,
    },
    /// Entries `2` (commute) or `null` (free); diagonal ignored.
    CoxeterMatrix { matrix: Vec<Vec<Option<u32>>> },
    FreeProduct { factors: Vec<GroupDescriptor> },
    FreePower { factor: Box<GroupDescriptor>, copies: usize },
}

#[derive(Deserialize, Debug, Clone, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateDescriptor {
    Length {
        t: f64,
    },
    Counit,
    Radial {
        lambda: Vec<f64>,
        #[serde(default)]
        normalize: bool,
    },
    FreeProduct {
        factors: Vec<StateDescriptor>,
    },
    FreeProductPower {
        factor: Box<StateDescriptor>,
        copies: usize,
    },
    Power {
        base: Box<StateDescriptor>,
        k: u32,
    },
}

pub fn build_group(d: &GroupDescriptor) -> Result<GroupModel> {
    match d {
        GroupDescriptor::Free { rank } => GroupModel::free(*rank),
        GroupDescriptor::UniversalCoxeter { rank } => GroupModel::universal_coxeter(*rank),
        GroupDescriptor::RightAngledCoxeter { vertices, edges } => GroupModel::right_angled_coxeter(*vertices, edges),
        GroupDescriptor::CoxeterMatrix { matrix } => GroupModel::from_coxeter_matrix(matrix),
        GroupDescriptor::FreeProduct { factors } => {
            GroupModel::free_product(factors.iter().map(build_group).collect::<Result<_>>()?)
        }
        GroupDescriptor::FreePower { factor, copies } => {
            let f = build_group(factor)?;
            GroupModel::free_product(vec![f; *copies])
        }
    }
}

pub fn build_state(d: &StateDescriptor, model: &GroupModel) -> Result<StateModel> {
    match d {
        StateDescriptor::Length { t } => length_state(model, *t),
        StateDescriptor::Counit => Ok(counit_state(model)),
        StateDescriptor::Radial { lambda, normalize } => {
            let size_s = model.generating_set_size();
            let c = if *normalize {
                RadialCoefficients::normalized(lambda.clone(), size_s)?
            } else {
                RadialCoefficients::new(lambda.clone(), size_s)?
            };
            radial_state(model, c)
        }
        StateDescriptor::FreeProduct { factors } => free_product_from(model, factors.iter().collect()),
        StateDescriptor::FreeProductPower { factor, copies } => {
            free_product_from(model, std::iter::repeat_n(factor.as_ref(), *copies).collect())
        }
        StateDescriptor::Power { base, k } => power_state(&build_state(base, model)?, *k),
    }
}

fn free_product_from(model: &GroupModel, descriptors: Vec<&StateDescriptor>) -> Result<StateModel> {
    let Some(group_factors) = model.factors() else {
        return Err(Error::Domain(format!("free-product state on non-free-product group {model}")));
    };
    // A factor descriptor may itself describe several consecutive (flattened) factors.
    let mut states = Vec::new();
    let mut next = 0;
    for d in descriptors {
        let width = descriptor_width(d);
        let end = next + width;
        if end > group_factors.len() {
            return Err(Error::Domain(format!(
                "free-product state has more factors than {model} ({} factors)",
                group_factors.len()
            )));
        }
        let sub = if width == 1 {
            group_factors[next].clone()
        } else {
            GroupModel::free_product(group_factors[next..end].to_vec())?
        };
        states.push(build_state(d, &sub)?);
        next = end;
    }
    free_product_state(model, states)
}

fn descriptor_width(d: &StateDescriptor) -> usize {
    match d {
        StateDescriptor::FreeProduct { factors } => factors.iter().map(descriptor_width).sum(),
        StateDescriptor::FreeProductPower { factor, copies } => descriptor_width(factor) * copies,
        _ => 1,
    }
}

/// Replaces every string `"$<parameter>"` by the number `value`.
pub fn substitute(v: &Value, placeholder: &str, value: u64) -> Value {
    match v {
        Value::String(s) if s == placeholder => Value::from(value),
        Value::Array(a) => Value::Array(a.iter().map(|x| substitute(x, placeholder, value)).collect()),
        Value::Object(o) => {
            Value::Object(o.iter().map(|(k, x)| (k.clone(), substitute(x, placeholder, value))).collect())
        }
        other => other.clone(),
    }
}

fn parse_descriptor<T: for<'de> Deserialize<'de>>(v: &Value, what: &str) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("invalid {what} descriptor: {e}")))
}

/// A validated config with every member constructed.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub members: Vec<(Option<u64>, StateModel)>,
    pub cap: usize,
}

impl Experiment {
    pub fn analysis(&self) -> &AnalysisConfig {
        &self.config.analysis
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config does not match schema {SCHEMA}: {e}")))?;
    if config.schema != SCHEMA {
        return Err(Error::Config(format!("unsupported schema {:?}; expected {SCHEMA:?}", config.schema)));
    }
    let a = &config.analysis;
    if a.k_min == 0 || a.k_min > a.k_max {
        return Err(Error::Config(format!("need 1 <= k_min <= k_max, got [{}, {}]", a.k_min, a.k_max)));
    }
    if a.radius == 0 {
        return Err(Error::Config("radius must be >= 1".into()));
    }
    if !(a.epsilon > 0.0 && a.epsilon < 0.5) {
        return Err(Error::Config(format!("epsilon must lie in (0, 1/2), got {}", a.epsilon)));
    }
    Ok(config)
}

/// Builds every family member (or the single experiment) before any computation.
pub fn build_experiment(mut config: ExperimentConfig, args: &CommonArgs) -> Result<Experiment> {
    if let Some(e) = args.epsilon {
        config.analysis.epsilon = e;
    }
    if let Some(r) = args.radius {
        config.analysis.radius = r;
    }
    let config = parse_config(&serde_json::to_string(&reserialize(&config)).expect("config serializes"))?;
    let cap = args.cap.unwrap_or_else(cap_from_env);
    let members = match &config.family {
        None => {
            let g: GroupDescriptor = parse_descriptor(&config.group, "group")?;
            let s: StateDescriptor = parse_descriptor(&config.state, "state")?;
            let model = build_group(&g)?;
            vec![(None, build_state(&s, &model)?)]
        }
        Some(f) => {
            let placeholder = format!("${}", f.parameter);
            f.members()?
                .into_iter()
                .map(|n| {
                    let g: GroupDescriptor = parse_descriptor(&substitute(&config.group, &placeholder, n), "group")?;
                    let s: StateDescriptor = parse_descriptor(&substitute(&config.state, &placeholder, n), "state")?;
                    let model = build_group(&g)?;
                    Ok((Some(n), build_state(&s, &model)?))
                })
                .collect::<Result<_>>()?
        }
    };
    Ok(Experiment { config, members, cap })
}

fn reserialize(c: &ExperimentConfig) -> Value {
    let a = &c.analysis;
    let t = &a.tolerances;
    let mut v = serde_json::json!({
        "schema": c.schema,
        "group": c.group,
        "state": c.state,
        "analysis": {
            "k_min": a.k_min, "k_max": a.k_max, "radius": a.radius, "epsilon": a.epsilon,
            "cogrowth_length": a.cogrowth_length, "seeds": a.seeds, "seed": a.seed,
            "tolerances": {"psd": t.psd, "strict": t.strict, "oracle": t.oracle, "relative": t.relative},
        },
    });
    if let Some(p) = a.profile_radius {
        v["analysis"]["profile_radius"] = p.into();
    }
    if let Some(g) = a.gamma {
        v["analysis"]["gamma"] = g.into();
    }
    if let Some(f) = &c.family {
        v["family"] = serde_json::json!({"parameter": f.parameter});
        if let Some(vals) = &f.values {
            v["family"]["values"] = vals.clone().into();
        }
        if let Some(r) = f.range {
            v["family"]["range"] = serde_json::json!(r);
        }
    }
    v
}

/// `{:.16e}` (17 significant digits), `inf`, or empty for absent values.
pub fn fmt_num(x: Option<f64>) -> String {
    match x {
        None => String::new(),
        Some(v) if v.is_nan() => String::new(),
        Some(v) if v == f64::INFINITY => "inf".into(),
        Some(v) if v == f64::NEG_INFINITY => "-inf".into(),
        Some(v) => format!("{v:.16e}"),
    }
}

fn fmt_opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn header(out: &mut String, command: &str, exp: &Experiment) {
    let a = exp.analysis();
    let t = a.tolerances;
    let _ = writeln!(out, "# cutofflab {} {command}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# schema: {SCHEMA}");
    if let Some((_, first)) = exp.members.first() {
        if exp.config.family.is_none() {
            let _ = writeln!(out, "# group: {}", first.model());
            let _ = writeln!(out, "# state: {first}");
        } else {
            let _ = writeln!(out, "# group template: {}", exp.config.group);
            let _ = writeln!(out, "# state template: {}", exp.config.state);
        }
    }
    let _ = writeln!(
        out,
        "# epsilon={} radius={} k_min={} k_max={} cap={}",
        a.epsilon, a.radius, a.k_min, a.k_max, exp.cap
    );
    let _ = writeln!(
        out,
        "# tolerances: psd={:e} strict={:e} oracle={:e} relative={:e} divergence_margin={:e} radial_norm={:e}",
        t.psd, t.strict, t.oracle, t.relative, DIVERGENCE_MARGIN, RADIAL_NORM_TOL
    );
}

pub const ANALYZE_COLUMNS: &str = "family_param,k,upper_l2,upper_closed_paper,upper_closed_exact,lower_best,lower_kind,density_verdict,truncation_radius,tail_bound,upper_rigor";

fn profile_radius(a: &AnalysisConfig) -> usize {
    a.profile_radius.unwrap_or(a.radius).max(crate::bounds::MIN_DENSITY_RADIUS)
}

fn analyze_rows(out: &mut String, param: Option<u64>, phi: &StateModel, exp: &Experiment) -> Result<()> {
    let a = exp.analysis();
    let model = phi.model();
    let size_s = model.generating_set_size();
    let values = SphereValues::collect(phi, a.radius, exp.cap)?;
    let prof_values =
        if profile_radius(a) == a.radius { values.clone() } else { SphereValues::collect(phi, profile_radius(a), exp.cap)? };
    let profile = prof_values.decay_profile();
    let w = omega(model, profile_radius(a), exp.cap)?;
    let lower = LowerBoundInputs::new(phi, &profile, a.gamma);
    let rate = phi.certificate().and_then(|c| c.exponential_rate());
    for k in a.k_min..=a.k_max {
        let b = l2_upper_bound_from(phi, &values, k as f64);
        let closed = rate.and_then(|alpha| {
            let c = k as f64 - (size_s as f64 - 1.0).ln() / (2.0 * alpha);
            closed_form_upper(size_s, alpha, c).ok()
        });
        let best = lower.best_at(k as f64);
        let verdict = density_verdict_for(phi, &profile, w, k)?;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt_opt(param),
            k,
            fmt_num(Some(b.value)),
            fmt_num(closed.map(|c| c.simplified)),
            fmt_num(closed.map(|c| c.exact)),
            fmt_num(best.map(|l| l.value)),
            fmt_opt(best.map(|l| l.kind)),
            verdict.label(),
            b.truncation_radius,
            fmt_num(Some(b.tail_bound)),
            b.rigor,
        );
    }
    Ok(())
}

pub fn cmd_analyze(exp: &Experiment) -> Result<String> {
    if exp.config.family.is_some() {
        return Err(Error::Config("analyze takes a single group and state; use scan for families".into()));
    }
    let mut out = String::new();
    header(&mut out, "analyze", exp);
    let _ = writeln!(out, "{ANALYZE_COLUMNS}");
    for (param, phi) in &exp.members {
        analyze_rows(&mut out, *param, phi, exp)?;
    }
    Ok(out)
}

pub const SCAN_COLUMNS: &str = "family_param,size_s,predicted,k_upper,k_upper_real,k_lower,k_lower_real,lower_kind,upper_offset,lower_offset,pre_cutoff_low,pre_cutoff_high,upper_rigor_k1,flags";

pub struct ScanOutput {
    pub csv: String,
    pub summary: String,
}

pub fn cmd_scan(exp: &Experiment) -> Result<ScanOutput> {
    if exp.config.family.is_none() {
        return Err(Error::Config("scan needs a family block".into()));
    }
    let a = exp.analysis();
    let opts = ScanOptions { epsilon: a.epsilon, k_max: a.k_max, radius: a.radius, cap: exp.cap, gamma: a.gamma };
    let family: Vec<(u64, StateModel)> = exp.members.iter().map(|(n, s)| (n.expect("family member"), s.clone())).collect();
    let scan = cutoff_scan(&family, &opts)?;
    let mut csv = String::new();
    header(&mut csv, "scan", exp);
    let _ = writeln!(csv, "{SCAN_COLUMNS}");
    for w in &scan.windows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            w.family_param,
            w.size_s,
            fmt_num(Some(w.predicted)),
            fmt_opt(w.k_upper),
            fmt_num(w.k_upper_real),
            fmt_opt(w.k_lower),
            fmt_num(w.k_lower_real),
            fmt_opt(w.lower_kind),
            fmt_num(w.k_upper.map(|k| k as f64 - w.predicted)),
            fmt_num(w.k_lower.map(|k| w.predicted - k as f64)),
            fmt_num(w.pre_cutoff.map(|p| p.0)),
            fmt_num(w.pre_cutoff.map(|p| p.1)),
            w.upper_rigor_at_1,
            w.flags.join("; ").replace(',', ";"),
        );
    }
    let s = &scan.summary;
    let summary = format!(
        "summary: sup(k_upper - predicted)={} sup(predicted - k_lower)={} sup(k_upper_real - predicted)={} sup(predicted - k_lower_real)={} ordered={} NO-CUTOFF={}",
        fmt_num(s.upper_offset),
        fmt_num(s.lower_offset),
        fmt_num(s.upper_offset_real),
        fmt_num(s.lower_offset_real),
        s.ordered,
        s.no_cutoff
    );
    let _ = writeln!(csv, "# {summary}");
    Ok(ScanOutput { csv, summary })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, max_deviation: f64, tolerance: f64) -> Self {
        Check { name: name.into(), max_deviation, tolerance, passed: max_deviation <= tolerance }
    }
}

fn verify_member(phi: &StateModel, exp: &Experiment, checks: &mut Vec<Check>, tag: &str) -> Result<()> {
    let a = exp.analysis();
    let tol = a.tolerances;
    let model = phi.model();
    let r = a.radius;
    let ball_spheres = oracle::bfs_ball(model, r, exp.cap)?;
    let ball: Vec<GroupElement> = ball_spheres.iter().flatten().cloned().collect();

    let dfs = model.ball_spheres(r, exp.cap)?;
    let dev = if dfs == ball_spheres { 0.0 } else { 1.0 };
    checks.push(Check::new(format!("{tag}sphere enumeration = breadth-first ball (R={r})"), dev, 0.0));

    if model.has_closed_form_spheres() {
        let dev = ball_spheres
            .iter()
            .enumerate()
            .map(|(i, s)| (s.len() as f64 - model.closed_form_sphere_size(i).unwrap()).abs())
            .fold(0.0, f64::max);
        checks.push(Check::new(format!("{tag}closed-form sphere sizes (R={r})"), dev, 0.0));
    }

    let values = SphereValues::collect(phi, r, exp.cap)?;
    let mut dev: f64 = 0.0;
    for k in a.k_min..=a.k_max.min(a.k_min + 7) {
        let o = oracle::tv_l2_truncated_sum(phi, k, r, exp.cap)?;
        let c = values.power_sum(k as f64);
        dev = dev.max((o - c).abs() / o.abs().max(f64::MIN_POSITIVE));
    }
    checks.push(Check::new(format!("{tag}truncated L2 sum vs enumeration (relative, R={r})"), dev, tol.relative));

    let dev = ball
        .iter()
        .map(|g| (phi.evaluate(&model.inverse(g)) - phi.evaluate(g).conj()).norm())
        .fold((phi.evaluate(&GroupElement::identity()) - 1.0).norm(), f64::max);
    checks.push(Check::new(format!("{tag}hermitian symmetry and phi(e) = 1"), dev, tol.oracle));

    let gram_radius = r.min(3);
    let gram_ball: Vec<GroupElement> = ball_spheres.iter().take(gram_radius + 1).flatten().cloned().collect();
    let psd = gram_psd_check(phi, &gram_ball, tol.psd)?;
    checks.push(Check::new(format!("{tag}Gram matrix on B({gram_radius}) is PSD"), (-psd.min_eigenvalue).max(0.0), tol.psd));

    if phi.certificate().is_some() {
        let ok = certificate_holds(phi, r, exp.cap)?;
        checks.push(Check::new(format!("{tag}decay certificate on B({r})"), if ok { 0.0 } else { 1.0 }, 0.0));
    }

    if let (Some(c), Rigor::Exact) = (phi.certificate(), l2_upper_bound_from(phi, &values, 1.0).rigor) {
        let size_s = model.generating_set_size() as f64;
        let q = size_s - 1.0;
        let mut dev: f64 = 0.0;
        for k in a.k_min..=a.k_max {
            let x = q * (-2.0 * k as f64 * c.rate).exp();
            if x < 1.0 {
                let exact = 0.5 * (size_s / q * x / (1.0 - x)).sqrt();
                let b = l2_upper_bound_from(phi, &values, k as f64).value;
                dev = dev.max((b - exact).abs() / exact);
            }
        }
        checks.push(Check::new(format!("{tag}certified bound = geometric closed form (relative)"), dev, 1e-9));
    }

    match phi.kind() {
        StateKind::Radial(coeffs) => {
            let rad_ball: Vec<GroupElement> = ball.iter().filter(|g| g.len() <= 6).cloned().collect();
            let m = coeffs.support_radius();
            let oracle = oracle::RadialOracle::new(model, &rad_ball, m, exp.cap)?;
            let size_s = model.generating_set_size();
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let mut dev: f64 = 0.0;
            let mut checked = vec![coeffs.clone()];
            for _ in 0..a.seeds {
                let raw: Vec<f64> = (0..=m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                checked.push(RadialCoefficients::normalized(raw, size_s)?);
            }
            for c in &checked {
                let state = radial_state(model, c.clone())?;
                for (g, v) in rad_ball.iter().zip(oracle.values(c)) {
                    dev = dev.max((state.evaluate(g).re - v).abs());
                }
            }
            checks.push(Check::new(
                format!("{tag}radial closed form vs direct inner product ({} vectors)", checked.len()),
                dev,
                tol.oracle,
            ));
        }
        StateKind::FreeProduct(factors) => {
            let mut bad = 0usize;
            for g in &ball {
                if !oracle::free_product_refactor_check(phi, g)? {
                    bad += 1;
                }
            }
            checks.push(Check::new(format!("{tag}free-product block refactorization"), bad as f64, 0.0));
            let mut dev: f64 = 0.0;
            for k in a.k_min..=a.k_max.min(a.k_min + 7) {
                let total = oracle::variance_exact(phi, k)?.variance;
                let parts: f64 =
                    factors.iter().map(|f| oracle::variance_exact(f, k).map(|m| m.variance)).sum::<Result<f64>>()?;
                dev = dev.max((total - parts).abs());
            }
            checks.push(Check::new(format!("{tag}free variance additivity"), dev, 1e-12));
        }
        _ => {}
    }
    Ok(())
}

pub fn cmd_verify(exp: &Experiment) -> Result<(String, bool)> {
    let mut checks = Vec::new();
    for (param, phi) in &exp.members {
        let tag = param.map(|n| format!("[N={n}] ")).unwrap_or_default();
        verify_member(phi, exp, &mut checks, &tag)?;
    }
    let mut out = String::new();
    header(&mut out, "verify", exp);
    for c in &checks {
        let _ = writeln!(
            out,
            "{} {} max_deviation={:.3e} tolerance={:.1e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.max_deviation,
            c.tolerance
        );
    }
    let all = checks.iter().all(|c| c.passed);
    let _ = writeln!(out, "{} of {} checks passed", checks.iter().filter(|c| c.passed).count(), checks.len());
    Ok((out, all))
}

pub fn cmd_cogrowth(exp: &Experiment) -> Result<(String, Vec<String>)> {
    let a = exp.analysis();
    let mut out = String::new();
    header(&mut out, "cogrowth", exp);
    let _ = writeln!(out, "family_param,length,r,gamma_hat,gamma_convention");
    let mut warnings = Vec::new();
    for (param, phi) in &exp.members {
        let model = phi.model();
        let est = cogrowth_count(model, a.cogrowth_length, exp.cap)?;
        for l in 1..=est.max_length {
            let (g, conv) = est.gamma_hat_at(l, model.generating_set_size());
            let _ = writeln!(out, "{},{},{},{},{}", fmt_opt(*param), l, est.counts[l - 1], fmt_num(Some(g)), conv);
        }
        for w in est.warnings {
            let _ = writeln!(out, "# warning: {w}");
            warnings.push(w);
        }
    }
    Ok((out, warnings))
}

pub fn cmd_psd_check(exp: &Experiment) -> Result<(String, bool)> {
    let a = exp.analysis();
    let mut out = String::new();
    header(&mut out, "psd-check", exp);
    let mut all = true;
    for (param, phi) in &exp.members {
        let ball = phi.model().ball(a.radius, exp.cap)?;
        let r = gram_psd_check(phi, &ball, a.tolerances.psd)?;
        all &= r.psd;
        let tag = param.map(|n| format!("N={n} ")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{tag}B({}) size={} min_eigenvalue={} psd={}",
            a.radius,
            ball.len(),
            fmt_num(Some(r.min_eigenvalue)),
            r.psd
        );
    }
    Ok((out, all))
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Capacity { .. } => 3,
        Error::OracleMismatch(_) => 4,
        Error::Domain(_) | Error::Unsupported(_) | Error::Config(_) | Error::Io(_) => 2,
    }
}

fn load(args: &CommonArgs) -> Result<Experiment> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.config.display())))?;
    build_experiment(parse_config(&text)?, args)
}

fn emit(args: &CommonArgs, exp: &Experiment, text: &str) -> Result<Option<PathBuf>> {
    match args.output.clone().or_else(|| exp.config.output.clone()) {
        Some(path) => {
            std::fs::write(&path, text)?;
            Ok(Some(path))
        }
        None => {
            print!("{text}");
            Ok(None)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let args = match &cli.command {
        Command::Analyze(a) | Command::Scan(a) | Command::Verify(a) | Command::Cogrowth(a) | Command::PsdCheck(a) => {
            a.clone()
        }
    };
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("cannot configure thread pool: {e}")))?;
    }
    let exp = load(&args)?;
    match cli.command {
        Command::Analyze(_) => {
            emit(&args, &exp, &cmd_analyze(&exp)?)?;
        }
        Command::Scan(_) => {
            let s = cmd_scan(&exp)?;
            if emit(&args, &exp, &s.csv)?.is_some() {
                println!("{}", s.summary);
            }
        }
        Command::Verify(_) => {
            let (report, ok) = cmd_verify(&exp)?;
            emit(&args, &exp, &report)?;
            if !ok {
                return Err(Error::OracleMismatch("one or more oracle checks failed".into()));
            }
        }
        Command::Cogrowth(_) => {
            let (csv, warnings) = cmd_cogrowth(&exp)?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            emit(&args, &exp, &csv)?;
        }
        Command::PsdCheck(_) => {
            let (report, ok) = cmd_psd_check(&exp)?;
            emit(&args, &exp, &report)?;
            if !ok {
                return Err(Error::OracleMismatch("Gram matrix is not positive semidefinite".into()));
            }
        }
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args() -> CommonArgs {
        CommonArgs { config: PathBuf::new(), output: None, threads: None, cap: Some(1_000_000), epsilon: None, radius: None }
    }

    fn experiment(json: &str) -> Result<Experiment> {
        build_experiment(parse_config(json)?, &args())
    }

    #[test]
    fn rejects_unknown_keys_and_schema() {
        let bad_key = r#"{"schema":"cutofflab/v1","group":{"kind":"free","rank":2},"state":{"kind":"counit"},"colour":1}"#;
        assert!(matches!(parse_config(bad_key), Err(Error::Config(_))));
        let bad_schema = r#"{"schema":"cutofflab/v0","group":{"kind":"free","rank":2},"state":{"kind":"counit"}}"#;
        assert!(matches!(parse_config(bad_schema), Err(Error::Config(_))));
        let bad_nested = r#"{"schema":"cutofflab/v1","group":{"kind":"free","rank":2,"extra":0},"state":{"kind":"counit"}}"#;
        assert!(matches!(experiment(bad_nested), Err(Error::Config(_))));
        let bad_analysis = r#"{"schema":"cutofflab/v1","group":{"kind":"free","rank":2},"state":{"kind":"counit"},"analysis":{"k_mx":3}}"#;
        assert!(matches!(parse_config(bad_analysis), Err(Error::Config(_))));
    }

    #[test]
    fn family_substitution() {
        let json = r#"{"schema":"cutofflab/v1","group":{"kind":"free_power","factor":{"kind":"free","rank":1},"copies":"$N"},
            "state":{"kind":"free_product_power","factor":{"kind":"length","t":1.0},"copies":"$N"},
            "family":{"range":[2,4]}}"#;
        let exp = experiment(json).unwrap();
        assert_eq!(exp.members.len(), 3);
        for (n, phi) in &exp.members {
            assert_eq!(phi.model().generating_set_size() as u64, 2 * n.unwrap());
        }
    }

    #[test]
    fn nested_free_product_states_align() {
        let json = r#"{"schema":"cutofflab/v1",
            "group":{"kind":"free_product","factors":[{"kind":"free","rank":1},{"kind":"free_product","factors":[{"kind":"universal_coxeter","rank":2},{"kind":"free","rank":2}]}]},
            "state":{"kind":"free_product","factors":[{"kind":"length","t":1.0},{"kind":"free_product","factors":[{"kind":"counit"},{"kind":"length","t":0.5}]}]}}"#;
        let exp = experiment(json).unwrap();
        assert!(matches!(exp.members[0].1.kind(), StateKind::FreeProduct(f) if f.len() == 3));
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(Some(0.1)), "1.0000000000000001e-1");
        assert_eq!(fmt_num(Some(f64::INFINITY)), "inf");
        assert_eq!(fmt_num(None), "");
        assert_eq!(fmt_num(Some(f64::NAN)), "");
    }

    #[test]
    fn unnormalized_radial_is_a_domain_error() {
        let json = r#"{"schema":"cutofflab/v1","group":{"kind":"free","rank":3},"state":{"kind":"radial","lambda":[1.0,1.0]}}"#;
        let err = experiment(json).unwrap_err();
        assert_eq!(exit_code(&err), 2);
    }
}
