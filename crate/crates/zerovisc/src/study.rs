//! End-to-end study: expansion, Navier-Stokes sweep over eps, errors,
//! residuals, invariants, energies, rate fits and the report files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assemble::{assemble, residual_split_report, Expansion, ExpansionState, ResidualSplit};
use crate::error::{Error, Result};
use crate::euler::InitialDataSpec;
use crate::grid::{GridSpec, Stretching};
use crate::norms::{energy_report, EnergyReport, WeightConfig, SURROGATE_ORDERS};
use crate::ns::{run_error_experiment, ErrorRecord};
use crate::field::SpectralField;
use crate::prandtl::{solve_prandtl_shifted, wall_defect};
use crate::split::{evolve_vorticity_split, evolve_vorticity_split_with, SplitRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Toggles {
    /// Vorticity split audit and the vorticity part of the energies.
    #[serde(default = "yes")]
    pub split: bool,
    /// Closed-form against substituted Euler residual.
    #[serde(default = "yes")]
    pub residual_check: bool,
}

fn yes() -> bool {
    true
}

impl Default for Toggles {
    fn default() -> Self {
        Toggles { split: true, residual_check: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Fixed decay rate; when absent it is `lambda_factor` times the
    /// largest initial outer velocity.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default = "default_lambda_factor")]
    pub lambda_factor: f64,
    #[serde(default = "default_order")]
    pub order: usize,
}

fn default_delta() -> f64 {
    0.1
}
fn default_lambda_factor() -> f64 {
    4.0
}
fn default_order() -> usize {
    3
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig { delta: default_delta(), lambda: None, lambda_factor: default_lambda_factor(), order: default_order() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub outer: GridSpec,
    pub layer: GridSpec,
    pub initial: InitialDataSpec,
    pub eps: Vec<f64>,
    pub horizon: f64,
    pub dt: f64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Navier-Stokes steps per expansion step.
    #[serde(default = "one")]
    pub ns_substeps: usize,
    /// Expansion steps between recorded times.
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Time window of the split audit; the split restarts at its start.
    #[serde(default = "default_audit")]
    pub split_audit: [f64; 2],
    #[serde(default)]
    pub toggles: Toggles,
    #[serde(default)]
    pub energy: EnergyConfig,
    /// Seed for the randomised checks that accompany a study.
    #[serde(default)]
    pub seed: u64,
}

fn default_output() -> PathBuf {
    PathBuf::from("study-out")
}
fn one() -> usize {
    1
}
fn default_stride() -> usize {
    10
}
fn default_audit() -> [f64; 2] {
    [0.05, 0.15]
}

impl StudyConfig {
    /// The reference desk configuration.
    pub fn desk() -> StudyConfig {
        let g = |ny, ly| GridSpec {
            d: 1,
            nx: 64,
            box_len: 2.0 * std::f64::consts::PI,
            ny,
            ly,
            stretching: Stretching::Tanh { beta: 2.0 },
        };
        StudyConfig {
            outer: g(384, 8.0),
            layer: g(160, 12.0),
            initial: InitialDataSpec { amplitude: 1.0, k0: 1.0, support: [2.0, 4.0], bump_order: 3 },
            eps: vec![0.1, 0.05, 0.025],
            horizon: 0.25,
            dt: 0.0025,
            output: default_output(),
            ns_substeps: 1,
            stride: default_stride(),
            split_audit: default_audit(),
            toggles: Toggles::default(),
            energy: EnergyConfig::default(),
            seed: 0,
        }
    }

    pub fn from_toml(text: &str) -> Result<StudyConfig> {
        let c: StudyConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<StudyConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        StudyConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn nsteps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.eps.is_empty() {
            return bad("empty eps list".into());
        }
        if self.eps.iter().any(|&e| !(e > 0.0 && e <= 0.5)) {
            return bad(format!("eps values must lie in (0, 1/2], got {:?}", self.eps));
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return bad(format!("eps values must be distinct and descending, got {:?}", self.eps));
        }
        if !(self.dt > 0.0 && self.horizon > 0.0) {
            return bad("dt and horizon must be positive".into());
        }
        let n = self.horizon / self.dt;
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) || n.round() < 1.0 {
            return bad(format!("horizon {} is not a whole number of steps of {}", self.horizon, self.dt));
        }
        if self.ns_substeps == 0 || self.stride == 0 {
            return bad("ns_substeps and stride must be positive".into());
        }
        if self.outer.d != self.layer.d || self.outer.nx != self.layer.nx || self.outer.box_len != self.layer.box_len {
            return bad("outer and layer grids must share the tangential discretisation".into());
        }
        let [a, b] = self.split_audit;
        if self.toggles.split && !(a >= 0.0 && b > a && b <= self.horizon + 1e-12) {
            return bad(format!("split audit window [{a}, {b}] must lie inside [0, {}]", self.horizon));
        }
        if self.toggles.split && self.outer.d != 1 {
            return bad("the vorticity split runs for d = 1 only; disable toggles.split".into());
        }
        if !SURROGATE_ORDERS.contains(&self.energy.order) {
            return bad(format!("energy order must be one of {SURROGATE_ORDERS:?}"));
        }
        WeightConfig::new(self.energy.delta, self.energy.lambda.unwrap_or(0.0))?;
        Ok(())
    }
}

/// Log-log least-squares slope.
#[derive(Clone, Debug, PartialEq)]
pub struct RateFit {
    pub quantity: String,
    pub pairs: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the log residuals.
    pub residual: f64,
}

pub fn fit_rate(quantity: &str, pairs: &[(f64, f64)]) -> Result<RateFit> {
    if pairs.len() < 3 {
        return Err(Error::Config(format!("{quantity}: a rate needs at least 3 points, have {}", pairs.len())));
    }
    if pairs.iter().any(|&(e, v)| !(e > 0.0 && v > 0.0) || !e.is_finite() || !v.is_finite()) {
        return Err(Error::Config(format!("{quantity}: rate fits need positive finite values")));
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Config(format!("{quantity}: eps values coincide")));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    Ok(RateFit { quantity: quantity.to_string(), pairs: pairs.to_vec(), slope, intercept, residual })
}

/// Structural identities of the expansion at one time and eps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvariantRecord {
    pub t: f64,
    pub eps: f64,
    /// `max |div u_a|`
    pub divergence: f64,
    /// `max |u_a(0)|`
    pub wall_u: f64,
    /// `max |v_a(0) - eps^2 f|`
    pub wall_v: f64,
    /// `max |u_p0(0) + u_e0(0)|`
    pub prandtl_wall: f64,
    /// `‖dz v_p1 + div u_p0‖ / ‖div u_p0‖`
    pub vp_recovery: f64,
    /// `max |f - v_p2(0)|`
    pub displacement: f64,
}

fn invariants(s: &ExpansionState, eps: f64) -> Result<InvariantRecord> {
    let a = assemble(s, eps)?;
    let (wall_u, wall_v) = a.wall_defects();
    let lg = s.layer.u0[0].grid().clone();
    let ue: Vec<_> = s.ue0.h.iter().map(|c| c.wall().regrid(&lg)).collect::<Result<_>>()?;
    // differential form of the recovery: dz v_p1 = -div_x u_p0
    let mut div = SpectralField::zeros(&lg, "div");
    for (a, c) in s.layer.u0.iter().enumerate() {
        div += &c.tangential_derivative(a + 1)?;
    }
    let scale = div.l2_norm();
    let gap = (&s.layer.vp1.normal_derivative(1)? + &div).l2_norm();
    Ok(InvariantRecord {
        t: s.t,
        eps,
        divergence: a.divergence()?.linf_norm(),
        wall_u,
        wall_v,
        prandtl_wall: wall_defect(&s.layer.u0, &ue),
        vp_recovery: if scale > 0.0 { gap / scale } else { gap },
        displacement: (&s.layer.f - &s.layer.vp2.wall()).linf_norm(),
    })
}

/// Pass/fail line for one acceptance criterion computed from the study.
#[derive(Clone, Debug, PartialEq)]
pub struct Criterion {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct SplitAudit {
    pub eps: f64,
    pub records: Vec<SplitRecord>,
}

/// Everything a study produces.
#[derive(Clone, Debug)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub lambda: f64,
    pub errors: Vec<ErrorRecord>,
    pub residuals: Vec<ResidualSplit>,
    pub invariants: Vec<InvariantRecord>,
    /// Relative gap between the two layer formulations over the horizon.
    pub dual_layer_gap: f64,
    pub energies: Vec<EnergyReport>,
    pub split: Vec<SplitAudit>,
    pub rates: Vec<RateFit>,
    pub criteria: Vec<Criterion>,
}

/// Which parts of the pipeline to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stages {
    pub errors: bool,
    pub residuals: bool,
    pub energies: bool,
}

impl Stages {
    pub const ALL: Stages = Stages { errors: true, residuals: true, energies: true };
}

fn log(msg: &str) {
    eprintln!("[study] {msg}");
}

/// Build the expansion once and run the selected stages for every eps.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    run_stages(config, Stages::ALL)
}

pub fn run_stages(config: &StudyConfig, stages: Stages) -> Result<StudyReport> {
    config.validate()?;
    let outer = config.outer.build()?;
    let layer = config.layer.build()?;
    let n = config.nsteps();
    // centred time derivatives and split interpolation look four steps ahead
    let exp = Expansion::build(&outer, &layer, &config.initial, config.dt, n + 4)
        .map_err(|e| staged(e, "expansion", "check the grids and the initial data"))?;
    log(&format!("expansion built: {} steps", n + 4));

    let s0 = exp.state(0)?;
    let scale = s0.ue0.components().map(|c| c.linf_norm()).fold(0.0, f64::max);
    let lambda = config.energy.lambda.unwrap_or(config.energy.lambda_factor * scale);
    let coeff_scale = s0.ue0.components().map(|c| c.max_coeff()).fold(0.0, f64::max);
    let weights = WeightConfig::new(config.energy.delta, lambda)?.with_noise_scale(coeff_scale);

    let mut report = StudyReport {
        config: config.clone(),
        lambda,
        errors: Vec::new(),
        residuals: Vec::new(),
        invariants: Vec::new(),
        dual_layer_gap: 0.0,
        energies: Vec::new(),
        split: Vec::new(),
        rates: Vec::new(),
        criteria: Vec::new(),
    };

    if stages.errors {
        for &eps in &config.eps {
            let recs = run_error_experiment(&exp, eps, config.ns_substeps, config.stride)
                .map_err(|e| staged(e, "navier-stokes", "raise ny or drop the smallest eps"))?;
            recs.iter().filter(|r| r.t <= config.horizon + 1e-12).for_each(|r| report.errors.push(*r));
            log(&format!("errors done at eps = {eps}"));
        }
    }

    if stages.residuals {
        let times: Vec<usize> = record_steps(n, config.stride).into_iter().map(|k| k.max(2)).collect();
        for &k in &times {
            let window: Vec<ExpansionState> = (k - 2..=k + 2).map(|i| exp.state(i)).collect::<Result<_>>()?;
            for &eps in &config.eps {
                let mut r = residual_split_report(&window, eps, config.dt)
                    .map_err(|e| staged(e, "residuals", "check the expansion window"))?;
                if !config.toggles.residual_check {
                    r.euler_gap = f64::NAN;
                }
                report.residuals.push(r);
                report.invariants.push(invariants(&window[2], eps)?);
            }
        }
        let shifted = solve_prandtl_shifted(&exp.layer, &exp.euler)
            .map_err(|e| staged(e, "prandtl (shifted form)", "raise the layer height or shorten the horizon"))?;
        let mut gap: f64 = 0.0;
        let mut size: f64 = 0.0;
        for k in 0..=n {
            for (a, b) in exp.p0.states[k].iter().zip(&shifted[k]) {
                gap = gap.max((a - b).linf_norm());
                size = size.max(a.linf_norm());
            }
        }
        report.dual_layer_gap = if size > 0.0 { gap / size } else { gap };
        log("residuals and invariants done");
    }

    if stages.energies && config.toggles.split {
        let order = config.energy.order;
        for &eps in &config.eps {
            let mut k = 0;
            let mut out = Vec::new();
            evolve_vorticity_split_with(&exp, eps, 0, n, |s, u| {
                if k % config.stride == 0 || k == n {
                    out.push(energy_report(u, Some((&s.w_e, &s.w_p)), &weights, s.t, eps, order)?);
                }
                k += 1;
                Ok(())
            })
            .map_err(|e| staged(e, "energies", "disable toggles.split or shorten the horizon"))?;
            report.energies.extend(out);

            let start = (config.split_audit[0] / config.dt).round() as usize;
            let len = ((config.split_audit[1] - config.split_audit[0]) / config.dt).round() as usize;
            let records = evolve_vorticity_split(&exp, eps, start, len)
                .map_err(|e| staged(e, "vorticity split", "disable toggles.split or move the audit window"))?;
            report.split.push(SplitAudit { eps, records });
            log(&format!("energies and split audit done at eps = {eps}"));
        }
    }

    report.rates = rates(&report);
    report.criteria = criteria(&report);
    Ok(report)
}

/// Attach a stage name unless an inner stage already did.
fn staged(e: Error, stage: &str, hint: &str) -> Error {
    match e {
        Error::Stage { .. } | Error::Config(_) => e,
        e => e.in_stage(stage, hint),
    }
}

fn record_steps(n: usize, stride: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..=n).step_by(stride).collect();
    if *v.last().unwrap() != n {
        v.push(n);
    }
    v
}

fn sup_by<T>(recs: &[T], eps: f64, e: impl Fn(&T) -> f64, f: impl Fn(&T) -> f64) -> Option<f64> {
    let vals: Vec<f64> = recs.iter().filter(|r| e(r) == eps).map(f).collect();
    if vals.is_empty() {
        None
    } else {
        Some(vals.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }
}

fn sweep<T>(r: &StudyReport, recs: &[T], e: impl Fn(&T) -> f64 + Copy, f: impl Fn(&T) -> f64 + Copy) -> Vec<(f64, f64)> {
    r.config.eps.iter().filter_map(|&eps| sup_by(recs, eps, e, f).map(|v| (eps, v))).collect()
}

/// Rate fit names, in report order.
pub const RATE_QUANTITIES: [&str; 7] =
    ["err_l2_u", "err_linf_u", "err_l2_v", "err_l2_v_unit_weight", "residual_l2", "euler_residual_l2", "energy_over_eps2"];

fn rates(r: &StudyReport) -> Vec<RateFit> {
    let er = |x: &ErrorRecord| x.eps;
    let sweeps: Vec<(&str, Vec<(f64, f64)>)> = vec![
        (RATE_QUANTITIES[0], sweep(r, &r.errors, er, |x| x.weighted.l2_u)),
        (RATE_QUANTITIES[1], sweep(r, &r.errors, er, |x| x.weighted.linf_u)),
        (RATE_QUANTITIES[2], sweep(r, &r.errors, er, |x| x.weighted.l2_v)),
        (RATE_QUANTITIES[3], sweep(r, &r.errors, er, |x| x.unit_weight.l2_v)),
        (RATE_QUANTITIES[4], sweep(r, &r.residuals, |x| x.eps, |x| x.total)),
        (RATE_QUANTITIES[5], sweep(r, &r.residuals, |x| x.eps, |x| x.euler_closed)),
        (RATE_QUANTITIES[6], sweep(r, &r.energies, |x| x.eps, |x| x.e() / (x.eps * x.eps))),
    ];
    sweeps.into_iter().filter_map(|(q, p)| fit_rate(q, &p).ok()).collect()
}

fn rate<'a>(r: &'a StudyReport, q: &str) -> Option<&'a RateFit> {
    r.rates.iter().find(|f| f.quantity == q)
}

/// Relative tolerance of `dz v_p1 = -div u_p0` (stencil derivative against
/// tail quadrature); the layer is thinnest in `z` just after the start.
pub const VP_RECOVERY_TOL: f64 = 1e-4;

fn criteria(r: &StudyReport) -> Vec<Criterion> {
    let mut out = Vec::new();
    let mut push = |id, name: &str, pass, detail: String| out.push(Criterion { id, name: name.into(), pass, detail });
    let inside = |f: Option<&RateFit>, lo: f64, hi: f64| f.map(|f| f.slope >= lo && f.slope <= hi).unwrap_or(false);
    let show = |f: Option<&RateFit>| f.map(|f| format!("{:.3}", f.slope)).unwrap_or_else(|| "n/a".into());

    if !r.errors.is_empty() {
        let (l2, li) = (rate(r, "err_l2_u"), rate(r, "err_linf_u"));
        push(
            1,
            "error rate",
            inside(l2, 0.7, 1.3) && inside(li, 0.6, 1.4),
            format!("L2 slope {} in [0.7, 1.3], Linf slope {} in [0.6, 1.4]", show(l2), show(li)),
        );
    }
    if !r.residuals.is_empty() {
        let f = rate(r, "residual_l2");
        let gap = r.residuals.iter().map(|x| x.euler_gap).fold(0.0, f64::max);
        let gap_ok = !r.config.toggles.residual_check || gap <= 1e-6;
        push(
            2,
            "residual rate",
            inside(f, 1.6, 2.4) && gap_ok,
            format!("slope {} in [1.6, 2.4], closed-form gap {gap:.2e} <= 1e-6", show(f)),
        );
        let m = |g: fn(&InvariantRecord) -> f64| r.invariants.iter().map(g).fold(0.0, f64::max);
        let (div, wu, wv, pw, vp, fd) =
            (m(|x| x.divergence), m(|x| x.wall_u), m(|x| x.wall_v), m(|x| x.prandtl_wall), m(|x| x.vp_recovery), m(|x| x.displacement));
        push(
            4,
            "structural invariants",
            div <= 1e-7 && wu.max(wv) <= 1e-7 && pw <= 1e-8 && vp <= VP_RECOVERY_TOL && fd <= 1e-12 && r.dual_layer_gap <= 1e-6,
            format!(
                "div {div:.2e}, wall {:.2e}, layer wall {pw:.2e}, v_p recovery {vp:.2e}, displacement {fd:.2e}, dual layer {:.2e}",
                wu.max(wv),
                r.dual_layer_gap
            ),
        );
    }
    if let Some(a) = r.split.iter().find(|a| (a.eps - 0.1).abs() < 1e-12).or(r.split.first()) {
        let rel = a.records.iter().map(|x| x.relative_defect()).fold(0.0, f64::max);
        let tr = a.records.iter().map(|x| x.normal_component_trace).fold(0.0, f64::max);
        push(
            6,
            "vorticity split",
            rel <= 1e-4 && tr <= 1e-7,
            format!("eps {}: relative defect {rel:.2e} <= 1e-4, normal-component trace {tr:.1e} <= 1e-7", a.eps),
        );
    }
    if !r.energies.is_empty() {
        let s = sweep(r, &r.energies, |x| x.eps, |x| x.e() / (x.eps * x.eps));
        let finite = s.iter().all(|p| p.1.is_finite());
        let ratio = match (s.first(), s.last()) {
            (Some(a), Some(b)) if a.1 > 0.0 => b.1 / a.1,
            _ => f64::NAN,
        };
        let growing = s.windows(2).all(|w| w[1].1 > w[0].1);
        let blowup = growing && ratio > 10.0;
        push(
            7,
            "energy monitoring",
            finite && ratio <= 10.0 && !blowup,
            format!(
                "sup_t E/eps^2 = [{}], last/first {ratio:.3} <= 10",
                s.iter().map(|p| format!("{:.3e}", p.1)).collect::<Vec<_>>().join(", ")
            ),
        );
    }
    out
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.10e}")
    }
}

impl StudyReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }

    pub fn errors_csv(&self) -> String {
        let mut s = String::from("t,eps,errL2_u,errL2_v,errLinf_u,errLinf_v,unitL2_v,unitLinf_v\n");
        for r in &self.errors {
            let (w, u) = (r.weighted, r.unit_weight);
            let _ = writeln!(
                s,
                "{:.6},{},{},{},{},{},{},{}",
                r.t,
                r.eps,
                num(w.l2_u),
                num(w.l2_v),
                num(w.linf_u),
                num(w.linf_v),
                num(u.l2_v),
                num(u.linf_v)
            );
        }
        s
    }

    pub fn residuals_csv(&self) -> String {
        let mut s = String::from("t,eps,R_l2,euler_closed_l2,euler_gap,taylor_l2,layer_rest_l2\n");
        for r in &self.residuals {
            let _ = writeln!(
                s,
                "{:.6},{},{},{},{},{},{}",
                r.t,
                r.eps,
                num(r.total),
                num(r.euler_closed),
                num(r.euler_gap),
                num(r.taylor),
                num(r.layer_rest)
            );
        }
        s
    }

    pub fn invariants_csv(&self) -> String {
        let mut s = String::from("t,eps,div,wall_u,wall_v,layer_wall,vp_recovery,displacement\n");
        for r in &self.invariants {
            let _ = writeln!(
                s,
                "{:.6},{},{},{},{},{},{},{}",
                r.t,
                r.eps,
                num(r.divergence),
                num(r.wall_u),
                num(r.wall_v),
                num(r.prandtl_wall),
                num(r.vp_recovery),
                num(r.displacement)
            );
        }
        s
    }

    pub fn energies_csv(&self) -> String {
        let mut s = format!("{}\n", EnergyReport::CSV_HEADER);
        for r in &self.energies {
            s += &r.csv_row();
            s.push('\n');
        }
        s
    }

    pub fn split_csv(&self) -> String {
        let mut s = String::from("t,eps,defect,vorticity,relative,outer_wall_residual,normal_trace\n");
        for a in &self.split {
            for r in &a.records {
                let _ = writeln!(
                    s,
                    "{:.6},{},{},{},{},{},{}",
                    r.t,
                    a.eps,
                    num(r.defect),
                    num(r.vorticity),
                    num(r.relative_defect()),
                    num(r.outer_wall_residual),
                    num(r.normal_component_trace)
                );
            }
        }
        s
    }

    pub fn rates_csv(&self) -> String {
        rates_csv(&self.rates)
    }

    pub fn criteria_csv(&self) -> String {
        let mut s = String::from("id,name,status,detail\n");
        for c in &self.criteria {
            let _ = writeln!(s, "{},{},{},\"{}\"", c.id, c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
        }
        s
    }

    pub fn summary_json(&self) -> String {
        let v = serde_json::json!({
            "lambda": self.lambda,
            "delta": self.config.energy.delta,
            "guaranteed_window": self.config.energy.delta / (2.0 * self.lambda),
            "energy_order": self.config.energy.order,
            "dual_layer_gap": self.dual_layer_gap,
            "criteria": self.criteria.iter().map(|c| serde_json::json!({"id": c.id, "pass": c.pass})).collect::<Vec<_>>(),
        });
        serde_json::to_string_pretty(&v).expect("json") + "\n"
    }

    /// All report files as `(name, contents)`, in a fixed order.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut out = vec![("config.toml".to_string(), self.config.to_toml())];
        let mut add = |name: &str, body: String, keep: bool| {
            if keep {
                out.push((name.to_string(), body));
            }
        };
        add("errors.csv", self.errors_csv(), !self.errors.is_empty());
        add("residuals.csv", self.residuals_csv(), !self.residuals.is_empty());
        add("invariants.csv", self.invariants_csv(), !self.invariants.is_empty());
        add("energies.csv", self.energies_csv(), !self.energies.is_empty());
        add("split.csv", self.split_csv(), !self.split.is_empty());
        add("rates.csv", self.rates_csv(), true);
        add("criteria.csv", self.criteria_csv(), true);
        add("summary.json", self.summary_json(), true);
        add("plots.py", emit_plots(self), true);
        out
    }

    /// Write every file plus `manifest.json` (sha256 of each) into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        write_bundle(dir, &self.files())
    }
}

pub fn rates_csv(rates: &[RateFit]) -> String {
    let mut s = String::from("quantity,slope,intercept,fit_residual,points\n");
    for f in rates {
        let pts: Vec<String> = f.pairs.iter().map(|(e, v)| format!("{e}:{}", num(*v))).collect();
        let _ = writeln!(s, "{},{:.6},{:.6},{:.3e},{}", f.quantity, f.slope, f.intercept, f.residual, pts.join(";"));
    }
    s
}

/// Write files and a manifest listing each with its sha256 digest.
pub fn write_bundle(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    let mut manifest = Vec::new();
    for (name, body) in files {
        let p = dir.join(name);
        fs::write(&p, body)?;
        manifest.push(serde_json::json!({
            "file": name,
            "bytes": body.len(),
            "sha256": hex(&Sha256::digest(body.as_bytes())),
        }));
        paths.push(p);
    }
    let p = dir.join("manifest.json");
    fs::write(&p, serde_json::to_string_pretty(&manifest).expect("json") + "\n")?;
    paths.push(p);
    Ok(paths)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Matplotlib script reading the CSVs next to it: one figure per sweep present.
pub fn emit_plots(r: &StudyReport) -> String {
    let mut s = String::from(
        "# Regenerate the study figures: python3 plots.py\nimport csv\nimport os\n\nHERE = os.path.dirname(os.path.abspath(__file__))\n\n\ndef rows(name):\n    with open(os.path.join(HERE, name)) as f:\n        return list(csv.DictReader(f))\n\n\ndef main():\n    import matplotlib\n    matplotlib.use(\"Agg\")\n    import matplotlib.pyplot as plt\n",
    );
    let mut any = false;
    if !r.errors.is_empty() {
        any = true;
        s += r#"
    data = rows("errors.csv")
    eps = sorted({float(d["eps"]) for d in data})
    fig, ax = plt.subplots()
    for key in ("errL2_u", "errLinf_u", "errL2_v"):
        ax.loglog(eps, [max(float(d[key]) for d in data if float(d["eps"]) == e) for e in eps], "o-", label=key)
    ax.loglog(eps, [e / eps[-1] * 1e-2 for e in eps], "k--", label="slope 1")
    ax.set_xlabel("eps")
    ax.set_ylabel("sup_t error")
    ax.legend()
    fig.savefig(os.path.join(HERE, "errors.png"), dpi=150)
"#;
    }
    if !r.energies.is_empty() {
        any = true;
        s += r#"
    data = rows("energies.csv")
    fig, ax = plt.subplots()
    for e in sorted({d["eps"] for d in data}, key=float):
        pts = [(float(d["t"]), float(d["E"]) / float(e) ** 2) for d in data if d["eps"] == e]
        ax.semilogy([p[0] for p in pts], [max(p[1], 1e-300) for p in pts], label="eps=" + e)
    ax.set_xlabel("t")
    ax.set_ylabel("E(t) / eps^2")
    ax.legend()
    fig.savefig(os.path.join(HERE, "energies.png"), dpi=150)
"#;
    }
    if !any {
        s += "    pass\n";
    }
    s += "\n\nif __name__ == \"__main__\":\n    main()\n";
    s
}
