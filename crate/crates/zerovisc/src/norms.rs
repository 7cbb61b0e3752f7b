//! Conormal derivatives, analytic weights and the weighted norms used to
//! monitor the error, plus the velocity/vorticity energy functionals.
//!
//! All norms are sums of squares over derivative multi-indices, computed
//! mode by mode (Parseval), so weights that depend only on `y` never need a
//! transform. Exponential weights are accumulated in log space.

use crate::error::{Error, Result};
use crate::field::{SpectralField, VectorField};
use crate::grid::Grid;

/// Largest admissible `e^{Φ}` factor in [`analytic_lift`].
pub const OVERFLOW_LIMIT: f64 = 1e12;
/// Highest supported conormal order.
pub const MAX_CONORMAL_ORDER: usize = 4;
/// Coefficients below this fraction of the largest one are treated as zero
/// in the exponentially weighted norms; round-off times `e^{y^2/eps^2}` is not data.
pub const NOISE_FLOOR: f64 = 1e-13;

/// Parameters of the analytic and conormal weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightConfig {
    pub delta: f64,
    pub lambda: f64,
    /// Absolute coefficient magnitude treated as zero in the exponentially
    /// weighted norms (on top of the relative [`NOISE_FLOOR`]).
    pub noise: f64,
}

impl WeightConfig {
    pub fn new(delta: f64, lambda: f64) -> Result<WeightConfig> {
        if !(delta >= 0.0 && delta.is_finite()) || !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("need delta >= 0 and lambda >= 0, got {delta}, {lambda}")));
        }
        Ok(WeightConfig { delta, lambda, noise: 0.0 })
    }

    /// Set the absolute floor to [`NOISE_FLOOR`] times `scale`, typically the
    /// largest coefficient of the solution whose error is measured.
    pub fn with_noise_scale(mut self, scale: f64) -> WeightConfig {
        self.noise = NOISE_FLOOR * scale.abs();
        self
    }

    /// Cutoff profile: `delta s(2y)` with the cubic smoothstep `s`, constant for `y >= 1/2`.
    pub fn theta(&self, y: f64) -> f64 {
        let x = (2.0 * y).clamp(0.0, 1.0);
        self.delta * x * x * (3.0 - 2.0 * x)
    }

    pub fn theta_prime(&self, y: f64) -> f64 {
        if !(0.0..0.5).contains(&y) {
            return 0.0;
        }
        let x = 2.0 * y;
        self.delta * 12.0 * x * (1.0 - x)
    }

    pub fn theta_second(&self, y: f64) -> f64 {
        if !(0.0..0.5).contains(&y) {
            return 0.0;
        }
        self.delta * 24.0 * (1.0 - 4.0 * y)
    }

    /// Conormal weight: `delta y` up to 1, `delta y / (1 + y)` from 2, a quintic
    /// Hermite bridge (values and two derivatives matched) in between.
    pub fn conormal_weight(&self, y: f64) -> f64 {
        let d = self.delta;
        if y <= 1.0 {
            return d * y;
        }
        if y >= 2.0 {
            return d * y / (1.0 + y);
        }
        let (f0, f1, f2) = (d, d, 0.0);
        let (g0, g1, g2) = (2.0 * d / 3.0, d / 9.0, -2.0 * d / 27.0);
        let s = y - 1.0;
        let h = [
            1.0 - 10.0 * s.powi(3) + 15.0 * s.powi(4) - 6.0 * s.powi(5),
            s - 6.0 * s.powi(3) + 8.0 * s.powi(4) - 3.0 * s.powi(5),
            0.5 * s * s - 1.5 * s.powi(3) + 1.5 * s.powi(4) - 0.5 * s.powi(5),
            10.0 * s.powi(3) - 15.0 * s.powi(4) + 6.0 * s.powi(5),
            -4.0 * s.powi(3) + 7.0 * s.powi(4) - 3.0 * s.powi(5),
            0.5 * s.powi(3) - s.powi(4) + 0.5 * s.powi(5),
        ];
        f0 * h[0] + f1 * h[1] + f2 * h[2] + g0 * h[3] + g1 * h[4] + g2 * h[5]
    }

    /// `delta - theta(y) - lambda t`.
    pub fn analytic_radius(&self, t: f64, y: f64) -> f64 {
        self.delta - self.theta(y) - self.lambda * t
    }

    /// Height where the analytic radius vanishes; `None` once `lambda t > delta`.
    pub fn critical_height(&self, t: f64) -> Option<f64> {
        let target = self.delta - self.lambda * t;
        if target < 0.0 || self.delta == 0.0 {
            return None;
        }
        if target >= self.delta {
            return Some(0.5);
        }
        let (mut a, mut b) = (0.0, 0.5);
        for _ in 0..80 {
            let c = 0.5 * (a + b);
            if self.theta(c) < target {
                a = c;
            } else {
                b = c;
            }
        }
        Some(0.5 * (a + b))
    }

    /// `T_0 = delta / (2 lambda)`.
    pub fn guaranteed_window(&self) -> f64 {
        if self.lambda > 0.0 {
            self.delta / (2.0 * self.lambda)
        } else {
            f64::INFINITY
        }
    }

    /// Exponent of the outer weight: `(delta - theta - lambda t) / eps^2`.
    pub fn log_weight_outer(&self, t: f64, y: f64, eps: f64) -> f64 {
        self.analytic_radius(t, y) / (eps * eps)
    }

    /// Exponent of the layer weight: `y^2 (delta - lambda t) / eps^2`.
    pub fn log_weight_layer(&self, t: f64, y: f64, eps: f64) -> f64 {
        y * y * (self.delta - self.lambda * t) / (eps * eps)
    }
}

/// `d^j/dy^j` by composing the first- and second-order stencils.
fn dy_power(f: &SpectralField, j: usize) -> Result<SpectralField> {
    match j {
        0 => Ok(f.clone()),
        1 | 2 => f.normal_derivative(j),
        _ => dy_power(&f.normal_derivative(2)?, j - 2),
    }
}

/// `Z^j f = phi(y)^j d^j f / dy^j`.
pub fn conormal_z(f: &SpectralField, cfg: &WeightConfig, j: usize) -> Result<SpectralField> {
    if j > MAX_CONORMAL_ORDER {
        return Err(Error::Unsupported(format!("conormal order {j} above {MAX_CONORMAL_ORDER}")));
    }
    if j == 0 {
        return Ok(f.clone());
    }
    let prof: Vec<f64> = f.grid().y().iter().map(|&y| cfg.conormal_weight(y).powi(j as i32)).collect();
    Ok(dy_power(f, j)?.scale_by_profile(&prof).with_name(&format!("Z{j}({})", f.name())))
}

/// Multiply mode `k` at height `y` by `e^{(delta - theta(y) - lambda t) <k>}`.
pub fn analytic_lift(f: &SpectralField, cfg: &WeightConfig, t: f64) -> Result<SpectralField> {
    let g = f.grid().clone();
    let y = g.y().to_vec();
    let radius: Vec<f64> = y.iter().map(|&yy| cfg.analytic_radius(t, yy)).collect();
    let rmax = radius.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let kmax = (0..g.nmodes()).filter(|&m| g.keeps(m)).map(|m| g.kabs(m)).fold(0.0, f64::max);
    let factor = (rmax * (1.0 + kmax * kmax).sqrt()).exp();
    if factor > OVERFLOW_LIMIT {
        return Err(Error::Overflow { factor, limit: OVERFLOW_LIMIT });
    }
    Ok(f.map_modes(&format!("lift({})", f.name()), |m, a, b| {
        let jb = (1.0 + g.kabs(m).powi(2)).sqrt();
        for ((o, v), r) in b.iter_mut().zip(a).zip(&radius) {
            *o = v * (r * jb).exp();
        }
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    /// Tangential derivatives only.
    Tan,
    /// Tangential and conormal derivatives.
    Co,
    /// Conormal, weighted by `e^{(delta - theta - lambda t) / eps^2}`.
    Outer,
    /// Conormal, weighted by `e^{y^2 (delta - lambda t) / eps^2}`.
    Layer,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormRange {
    Full,
    /// `0 <= y <= y(t)`; empty once the critical height is gone.
    UpToCritical,
}

/// Which norm to take.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormSpec {
    pub kind: NormKind,
    pub m: usize,
    /// Apply `<D_x>^{1/2}` as well.
    pub half: bool,
    pub range: NormRange,
}

impl NormSpec {
    pub fn new(kind: NormKind, m: usize) -> NormSpec {
        NormSpec { kind, m, half: false, range: NormRange::Full }
    }

    pub fn half(mut self) -> NormSpec {
        self.half = true;
        self
    }

    pub fn below_critical(mut self) -> NormSpec {
        self.range = NormRange::UpToCritical;
        self
    }
}

/// Tangential multi-indices with `|i| <= m` as symbol exponents.
fn tangential_indices(d: usize, m: usize) -> Vec<[usize; 2]> {
    let mut out = Vec::new();
    for a in 0..=m {
        if d == 1 {
            out.push([a, 0]);
        } else {
            for b in 0..=m - a {
                out.push([a, b]);
            }
        }
    }
    out
}

fn tangential_symbol(g: &Grid, m: usize, i: [usize; 2]) -> f64 {
    let k = g.k(m);
    k[0].abs().powi(i[0] as i32) * k[1].abs().powi(i[1] as i32)
}

fn log_sum_exp(acc: &mut (f64, f64), x: f64) {
    // acc = (max, sum of exp(x - max))
    if x == f64::NEG_INFINITY {
        return;
    }
    if x > acc.0 {
        acc.1 = acc.1 * (acc.0 - x).exp() + 1.0;
        acc.0 = x;
    } else {
        acc.1 += (x - acc.0).exp();
    }
}

/// Natural log of the squared norm; `-inf` for a zero field.
pub fn log_norm_sq(f: &SpectralField, cfg: &WeightConfig, t: f64, eps: f64, spec: NormSpec) -> Result<f64> {
    if spec.m > MAX_CONORMAL_ORDER && spec.kind != NormKind::Tan {
        return Err(Error::Unsupported(format!("conormal norm of order {} above {MAX_CONORMAL_ORDER}", spec.m)));
    }
    if matches!(spec.kind, NormKind::Outer | NormKind::Layer) && !(eps > 0.0) {
        return Err(Error::Config("weighted norms need eps > 0".into()));
    }
    let g = f.grid().clone();
    let (ny, d) = (g.ny(), g.d());
    let y = g.y();
    let top = match spec.range {
        NormRange::Full => f64::INFINITY,
        NormRange::UpToCritical => match cfg.critical_height(t) {
            Some(h) => h,
            None => return Ok(f64::NEG_INFINITY),
        },
    };
    let logw: Vec<f64> = (0..ny)
        .map(|j| {
            let q = g.quad_weights()[j] * g.area();
            if y[j] > top || q <= 0.0 {
                return f64::NEG_INFINITY;
            }
            q.ln()
                + match spec.kind {
                    NormKind::Tan | NormKind::Co => 0.0,
                    NormKind::Outer => 2.0 * cfg.log_weight_outer(t, y[j], eps),
                    NormKind::Layer => 2.0 * cfg.log_weight_layer(t, y[j], eps),
                }
        })
        .collect();
    let weighted = matches!(spec.kind, NormKind::Outer | NormKind::Layer);
    let max_j = if spec.kind == NormKind::Tan { 0 } else { spec.m };
    let mut acc = (f64::NEG_INFINITY, 0.0);
    for j in 0..=max_j {
        let zf = conormal_z(f, cfg, j)?;
        let zf = if spec.half { zf.tangential_halfderivative() } else { zf };
        let floor = if weighted { (NOISE_FLOOR * zf.max_coeff()).max(cfg.noise) } else { 0.0 };
        for i in tangential_indices(d, spec.m - j) {
            for m in 0..g.nmodes() {
                let s = tangential_symbol(&g, m, i);
                if s == 0.0 {
                    continue;
                }
                let col = zf.column(m);
                for jj in 0..ny {
                    let a = col[jj].norm();
                    if a <= floor || a == 0.0 || logw[jj] == f64::NEG_INFINITY {
                        continue;
                    }
                    log_sum_exp(&mut acc, 2.0 * (a * s).ln() + logw[jj]);
                }
            }
        }
    }
    Ok(if acc.1 > 0.0 { acc.0 + acc.1.ln() } else { f64::NEG_INFINITY })
}

/// Squared norm, `inf` if it does not fit in an `f64`.
pub fn norm_sq(f: &SpectralField, cfg: &WeightConfig, t: f64, eps: f64, spec: NormSpec) -> Result<f64> {
    Ok(log_norm_sq(f, cfg, t, eps, spec)?.exp())
}

pub fn norm_suite(f: &SpectralField, cfg: &WeightConfig, t: f64, eps: f64, spec: NormSpec) -> Result<f64> {
    Ok(norm_sq(f, cfg, t, eps, spec)?.sqrt())
}

/// Quadratic energy functionals at surrogate derivative order `order`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyReport {
    pub t: f64,
    pub eps: f64,
    pub order: usize,
    pub e_v: f64,
    pub k_v: f64,
    pub e_w: f64,
    pub k_w: f64,
}

impl EnergyReport {
    pub fn e(&self) -> f64 {
        self.e_v + self.e_w
    }

    pub fn k(&self) -> f64 {
        self.k_v + self.k_w
    }

    pub const CSV_HEADER: &'static str = "t,eps,E_v,K_v,E_w,K_w,E,K,order";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.6},{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},m{}",
            self.t,
            self.eps,
            self.e_v,
            self.k_v,
            self.e_w,
            self.k_w,
            self.e(),
            self.k(),
            self.order
        )
    }
}

/// Surrogate orders: the functional's orders `(8, 9, 10)` become
/// `(order - 1, order, order + 1)`.
pub const SURROGATE_ORDERS: [usize; 3] = [2, 3, 4];

fn check_order(order: usize) -> Result<()> {
    if !SURROGATE_ORDERS.contains(&order) {
        return Err(Error::Config(format!("surrogate order {order} not in {SURROGATE_ORDERS:?}")));
    }
    Ok(())
}

fn conormal_weighted(f: &SpectralField, cfg: &WeightConfig) -> SpectralField {
    let prof: Vec<f64> = f.grid().y().iter().map(|&y| cfg.conormal_weight(y)).collect();
    f.scale_by_profile(&prof)
}

/// Velocity part `(E_v, K_v)` of the functional for the error velocity `u`.
pub fn velocity_energies(
    u: &VectorField,
    cfg: &WeightConfig,
    t: f64,
    eps: f64,
    order: usize,
) -> Result<(f64, f64)> {
    check_order(order)?;
    let e2 = eps * eps;
    let (mut e, mut k) = (0.0, 0.0);
    for c in u.components() {
        let lifted = analytic_lift(c, cfg, t)?;
        e += norm_sq(&lifted, cfg, t, eps, NormSpec::new(NormKind::Tan, order))?;
        e += norm_sq(c, cfg, t, eps, NormSpec::new(NormKind::Tan, order + 1))?;
        k += norm_sq(&lifted, cfg, t, eps, NormSpec::new(NormKind::Tan, order).half().below_critical())?;
    }
    Ok((e / e2, k / e2))
}

/// Full report; the vorticity part needs the outer/layer split `(w_e, w_p)`.
pub fn energy_report(
    u: &VectorField,
    split: Option<(&SpectralField, &SpectralField)>,
    cfg: &WeightConfig,
    t: f64,
    eps: f64,
    order: usize,
) -> Result<EnergyReport> {
    let (e_v, k_v) = velocity_energies(u, cfg, t, eps, order)?;
    let Some((w_e, w_p)) = split else {
        return Err(Error::Config("the vorticity energies need the vorticity split".into()));
    };
    if u.grid().d() != 1 {
        return Err(Error::Unsupported("vorticity energies are implemented for d = 1".into()));
    }
    let e2 = eps * eps;
    let lo = order - 1;
    let n = |f: &SpectralField, s: NormSpec| norm_sq(f, cfg, t, eps, s);
    let (pe, pp) = (conormal_weighted(w_e, cfg), conormal_weighted(w_p, cfg));
    let (le, lp) = (analytic_lift(w_e, cfg, t)?, analytic_lift(w_p, cfg, t)?);
    let (lpe, lpp) = (analytic_lift(&pe, cfg, t)?, analytic_lift(&pp, cfg, t)?);
    let scaled = n(&lpe, NormSpec::new(NormKind::Outer, lo))?
        + n(&lpp, NormSpec::new(NormKind::Layer, lo))?
        + n(&pe, NormSpec::new(NormKind::Co, order))?
        + n(&pp, NormSpec::new(NormKind::Layer, order))?;
    let plain = n(&le, NormSpec::new(NormKind::Outer, lo))?
        + n(&lp, NormSpec::new(NormKind::Layer, lo))?
        + n(w_e, NormSpec::new(NormKind::Co, order))?
        + n(w_p, NormSpec::new(NormKind::Layer, order))?;
    let k_scaled = n(&lpe, NormSpec::new(NormKind::Outer, lo).half().below_critical())?
        + n(&lpp, NormSpec::new(NormKind::Layer, lo).half().below_critical())?;
    let k_plain = n(&le, NormSpec::new(NormKind::Outer, lo).half().below_critical())?
        + n(&lp, NormSpec::new(NormKind::Layer, lo).half().below_critical())?;
    Ok(EnergyReport {
        t,
        eps,
        order,
        e_v,
        k_v,
        e_w: scaled / e2 + plain,
        k_w: k_scaled / e2 + k_plain,
    })
}

/// Zero report for a zero error at time `t`.
pub fn zero_report(t: f64, eps: f64, order: usize) -> EnergyReport {
    EnergyReport { t, eps, order, e_v: 0.0, k_v: 0.0, e_w: 0.0, k_w: 0.0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, GridSpec, Stretching};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn grid(nx: usize, ny: usize) -> Arc<Grid> {
        GridSpec { d: 1, nx, box_len: 2.0 * PI, ny, ly: 8.0, stretching: Stretching::Tanh { beta: 2.0 } }
            .build()
            .unwrap()
    }

    fn cfg() -> WeightConfig {
        WeightConfig::new(0.1, 0.4).unwrap()
    }

    fn random_field(g: &Arc<Grid>, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        SpectralField::from_fn(g, "r", |x, y| {
            let e = (-y).exp() * (1.0 + c[5] * y);
            e * (c[0] + c[1] * x[0].sin() + c[2] * x[0].cos() + c[3] * (2.0 * x[0]).sin() + c[4] * y * (3.0 * x[0]).cos())
        })
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn theta_meets_its_conditions() {
        let c = cfg();
        assert_eq!(c.theta(0.0), 0.0);
        assert!((c.theta(0.5) - c.delta).abs() < 1e-15);
        assert_eq!(c.theta_prime(0.0), 0.0);
        for i in 0..400 {
            let y = i as f64 * 0.005;
            assert!(c.theta_prime(y) >= 0.0);
            assert!(c.theta_prime(y).abs() + c.theta_second(y).abs() <= 24.0 * c.delta);
            if y >= 0.5 {
                assert_eq!(c.theta_prime(y), 0.0);
                assert_eq!(c.theta(y), c.delta);
            }
        }
    }

    #[test]
    fn conormal_weight_is_c2_at_the_joins() {
        let c = cfg();
        let h = 1e-4;
        for y0 in [1.0, 2.0] {
            let (l, m, r) = (c.conormal_weight(y0 - h), c.conormal_weight(y0), c.conormal_weight(y0 + h));
            let (ll, rr) = (c.conormal_weight(y0 - 2.0 * h), c.conormal_weight(y0 + 2.0 * h));
            assert!(((m - l) / h - (r - m) / h).abs() < 1e-4);
            let d2l = (m - 2.0 * l + ll) / (h * h);
            let d2r = (rr - 2.0 * r + m) / (h * h);
            assert!((d2l - d2r).abs() < 1e-3, "{y0}: {d2l} vs {d2r}");
        }
        for i in 0..200 {
            let y = i as f64 * 0.005;
            assert!(c.conormal_weight(y + 0.005) > c.conormal_weight(y));
        }
        assert!(c.conormal_weight(3.0) > c.conormal_weight(2.5));
    }

    #[test]
    fn critical_height_solves_for_the_zero_of_the_radius() {
        let c = cfg();
        for t in [0.0, 0.05, 0.1, 0.2] {
            let y = c.critical_height(t).unwrap();
            if t > 0.0 {
                assert!(c.analytic_radius(t, y).abs() < 1e-12);
            }
            assert!(y > 0.0);
        }
        assert!(c.critical_height(0.3).is_none());
        assert_eq!(c.guaranteed_window(), 0.125);
        assert!(c.critical_height(c.guaranteed_window()).unwrap() > 0.2);
    }

    #[test]
    fn conormal_derivatives_of_an_exponential() {
        let g = grid(8, 256);
        let c = cfg();
        let f = SpectralField::from_fn(&g, "e", |_, y| (-y).exp());
        assert_eq!(conormal_z(&f, &c, 0).unwrap().coeffs(), f.coeffs());
        for j in 1..=4 {
            let z = conormal_z(&f, &c, j).unwrap().to_physical();
            let mut worst: f64 = 0.0;
            for (jj, &y) in g.y().iter().enumerate() {
                let exact = c.conormal_weight(y).powi(j as i32) * (-1f64).powi(j as i32) * (-y).exp();
                worst = worst.max((z[jj] - exact).abs());
            }
            assert!(worst < 1e-6, "order {j}: {worst}");
        }
        assert!(conormal_z(&f, &c, 5).is_err());
    }

    #[test]
    fn conormal_of_simple_profiles() {
        let g = grid(8, 128);
        let c = cfg();
        let one = SpectralField::from_fn(&g, "1", |_, _| 1.0);
        assert!(conormal_z(&one, &c, 1).unwrap().max_coeff() < 1e-10);
        let lin = SpectralField::from_fn(&g, "y", |_, y| y);
        let z = conormal_z(&lin, &c, 1).unwrap().to_physical();
        for (j, &y) in g.y().iter().enumerate() {
            if y <= 1.0 {
                assert!((z[j] - c.delta * y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn lift_of_a_single_mode_at_the_wall() {
        let g = grid(16, 64);
        let c = cfg();
        let f = SpectralField::from_fn(&g, "s", |x, _| (3.0 * x[0]).cos());
        let lifted = analytic_lift(&f, &c, 0.0).unwrap();
        let ratio = lifted.to_physical()[0] / f.to_physical()[0];
        assert!((ratio - (c.delta * 10f64.sqrt()).exp()).abs() < 1e-13);
        let late = analytic_lift(&f, &c, c.delta / c.lambda).unwrap();
        let y = g.y();
        for m in 0..g.nmodes() {
            for j in 0..g.ny() {
                if y[j] >= 0.5 {
                    assert!(late.column(m)[j].norm() <= f.column(m)[j].norm() * (1.0 + 1e-15));
                }
            }
        }
        let off = WeightConfig::new(0.0, 1.0).unwrap();
        assert_eq!(analytic_lift(&f, &off, 0.0).unwrap().coeffs(), f.coeffs());
    }

    #[test]
    fn lift_guard_trips_on_large_radius() {
        let g = grid(64, 32);
        let big = WeightConfig::new(2.0, 0.0).unwrap();
        let f = SpectralField::from_fn(&g, "s", |x, _| x[0].sin());
        assert!(matches!(analytic_lift(&f, &big, 0.0), Err(Error::Overflow { .. })));
    }

    #[test]
    fn lift_norm_matches_direct_mode_sum() {
        let g = grid(16, 96);
        let c = cfg();
        let f = random_field(&g, 3);
        let lifted = analytic_lift(&f, &c, 0.05).unwrap();
        let w = g.quad_weights();
        let mut direct = 0.0;
        for m in 0..g.nmodes() {
            let jb = (1.0 + g.kabs(m).powi(2)).sqrt();
            for j in 0..g.ny() {
                direct += w[j] * (f.column(m)[j].norm() * (c.analytic_radius(0.05, g.y()[j]) * jb).exp()).powi(2);
            }
        }
        direct *= g.area();
        let n = norm_sq(&lifted, &c, 0.05, 0.1, NormSpec::new(NormKind::Tan, 0)).unwrap();
        assert!((n - direct).abs() < 1e-10 * direct);
    }

    #[test]
    fn definition_collapses() {
        let g = grid(16, 96);
        let c = cfg();
        let f = random_field(&g, 5);
        let l2 = norm_sq(&f, &c, 0.0, 0.1, NormSpec::new(NormKind::Tan, 0)).unwrap();
        assert!((l2 - f.l2_norm_sq()).abs() < 1e-12 * l2);
        let co0 = norm_sq(&f, &c, 0.0, 0.1, NormSpec::new(NormKind::Co, 0)).unwrap();
        assert!((co0 - l2).abs() < 1e-12 * l2);
        let z = SpectralField::zeros(&g, "0");
        for kind in [NormKind::Tan, NormKind::Co, NormKind::Outer, NormKind::Layer] {
            assert_eq!(norm_suite(&z, &c, 0.0, 0.1, NormSpec::new(kind, 2)).unwrap(), 0.0);
        }
        assert!(norm_sq(&f, &c, 0.0, 0.1, NormSpec::new(NormKind::Co, 5)).is_err());
    }

    #[test]
    fn first_conormal_norm_against_fine_quadrature() {
        let g = grid(8, 384);
        let c = cfg();
        let f = SpectralField::from_fn(&g, "e", |_, y| (-y).exp());
        let got = norm_sq(&f, &c, 0.0, 0.1, NormSpec::new(NormKind::Co, 1)).unwrap();
        let exact = g.area()
            * (simpson(|y| (-2.0 * y).exp(), 0.0, 8.0, 20000)
                + simpson(|y| (c.conormal_weight(y) * (-y).exp()).powi(2), 0.0, 1.0, 4000)
                + simpson(|y| (c.conormal_weight(y) * (-y).exp()).powi(2), 1.0, 2.0, 4000)
                + simpson(|y| (c.conormal_weight(y) * (-y).exp()).powi(2), 2.0, 8.0, 20000));
        assert!((got - exact).abs() < 1e-6 * exact, "{got} vs {exact}");
    }

    #[test]
    fn outer_weight_decreases_with_height() {
        let c = cfg();
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let w = c.log_weight_outer(0.01, i as f64 * 0.01, 0.1);
            assert!(w <= prev);
            prev = w;
        }
        let g = grid(8, 256);
        let high = SpectralField::from_fn(&g, "h", |_, y| (-(y - 3.0).powi(2) * 4.0).exp());
        let low = SpectralField::from_fn(&g, "l", |_, y| (-(y - 0.05).powi(2) * 400.0).exp());
        let ratio = |f: &SpectralField| {
            (log_norm_sq(f, &c, 0.0, 0.1, NormSpec::new(NormKind::Outer, 0)).unwrap()
                - log_norm_sq(f, &c, 0.0, 0.1, NormSpec::new(NormKind::Co, 0)).unwrap())
                / 2.0
        };
        assert!(ratio(&high).abs() < 1e-9);
        assert!(ratio(&low) > 9.0);
    }

    #[test]
    fn weighted_norms_survive_huge_exponents() {
        let g = grid(8, 128);
        let c = cfg();
        let f = SpectralField::from_fn(&g, "e", |_, y| (-y).exp());
        let l = log_norm_sq(&f, &c, 0.0, 0.01, NormSpec::new(NormKind::Outer, 1)).unwrap();
        assert!(l.is_finite() && l > 1000.0);
    }

    #[test]
    fn below_critical_is_smaller_and_vanishes_late() {
        let g = grid(8, 128);
        let c = cfg();
        let f = random_field(&g, 9);
        let s = NormSpec::new(NormKind::Co, 2);
        let full = norm_sq(&f, &c, 0.1, 0.1, s).unwrap();
        let part = norm_sq(&f, &c, 0.1, 0.1, s.below_critical()).unwrap();
        assert!(part < full && part > 0.0);
        assert_eq!(norm_sq(&f, &c, 1.0, 0.1, s.below_critical()).unwrap(), 0.0);
    }

    fn velocity(g: &Arc<Grid>, seed: u64, s: f64) -> VectorField {
        VectorField { h: vec![random_field(g, seed) * s], v: random_field(g, seed + 100) * s }
    }

    #[test]
    fn energy_report_is_quadratic_and_needs_the_split() {
        let g = grid(16, 128);
        let c = cfg();
        let (u1, u2) = (velocity(&g, 1, 1.0), velocity(&g, 1, 2.0));
        let gauss: Vec<f64> = g.y().iter().map(|y| (-50.0 * y * y).exp()).collect();
        let (we, wp) = (random_field(&g, 11), random_field(&g, 12).scale_by_profile(&gauss));
        let (we2, wp2) = (&we * 2.0, &wp * 2.0);
        let a = energy_report(&u1, Some((&we, &wp)), &c, 0.02, 0.1, 3).unwrap();
        let b = energy_report(&u2, Some((&we2, &wp2)), &c, 0.02, 0.1, 3).unwrap();
        for (x, y) in [(a.e_v, b.e_v), (a.k_v, b.k_v), (a.e_w, b.e_w), (a.k_w, b.k_w)] {
            assert!((y - 4.0 * x).abs() <= 1e-10 * y, "{x} {y}");
        }
        assert!(energy_report(&u1, None, &c, 0.0, 0.1, 3).is_err());
        assert!(energy_report(&u1, Some((&we, &wp)), &c, 0.0, 0.1, 7).is_err());
        let z = VectorField::zeros(&g, "0");
        let zs = SpectralField::zeros(&g, "0");
        let r = energy_report(&z, Some((&zs, &zs)), &c, 0.0, 0.1, 2).unwrap();
        assert_eq!(r, zero_report(0.0, 0.1, 2));
        assert_eq!(r.csv_row().split(',').count(), EnergyReport::CSV_HEADER.split(',').count());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn norms_are_homogeneous_and_subadditive(s1 in 0u64..1000, s2 in 0u64..1000, a in -3.0f64..3.0, kind in 0usize..4, m in 0usize..3) {
            let g = grid(8, 64);
            let c = cfg();
            let kind = [NormKind::Tan, NormKind::Co, NormKind::Outer, NormKind::Layer][kind];
            let spec = NormSpec::new(kind, m);
            let (f, h) = (random_field(&g, s1), random_field(&g, s2));
            let n = |x: &SpectralField| norm_suite(x, &c, 0.03, 0.5, spec).unwrap();
            let scaled = &f * a;
            prop_assert!((n(&scaled) - a.abs() * n(&f)).abs() <= 1e-10 * n(&f).max(1e-300) * a.abs().max(1.0));
            let sum = &f + &h;
            prop_assert!(n(&sum) <= (n(&f) + n(&h)) * (1.0 + 1e-10));
        }

        #[test]
        fn norms_grow_with_order(seed in 0u64..1000, kind in 0usize..4, m in 0usize..4) {
            let g = grid(8, 64);
            let c = cfg();
            let kind = [NormKind::Tan, NormKind::Co, NormKind::Outer, NormKind::Layer][kind];
            let f = random_field(&g, seed);
            let lo = norm_suite(&f, &c, 0.0, 0.5, NormSpec::new(kind, m)).unwrap();
            let hi = norm_suite(&f, &c, 0.0, 0.5, NormSpec::new(kind, m + 1)).unwrap();
            prop_assert!(lo <= hi * (1.0 + 1e-12));
        }
    }
}
