//! Navier-Stokes reference solver at viscosity `eps^2` with no-slip walls.
//!
//! Velocity-vorticity form: for every tangential mode with `k != 0` we evolve
//! `phi = Δv` and, when `d = 2`, the wall-normal vorticity
//! `eta = ∂1 u2 - ∂2 u1`; the `k = 0` columns of the horizontal velocity carry
//! the mean flow. `v` follows from `phi` with `v(0) = 0`, and the missing wall
//! condition `v'(0) = 0` is enforced with a precomputed homogeneous solution
//! (influence matrix). Horizontal velocity is rebuilt from `v'` and `eta`, so
//! the discrete divergence vanishes identically and both wall conditions hold
//! to round-off. Transport is explicit, viscosity implicit (IMEX RK3).

use std::fmt;
use std::sync::Arc;

use crate::assemble::{error_norms, leading_order, ErrorNorms, Expansion};
use crate::elliptic::{Bc, ModalOperator};
use crate::error::{Error, Result};
use crate::euler::{cfl_number, convective_terms, DEFAULT_CFL};
use crate::field::{SpectralField, VectorField, C};
use crate::grid::Grid;
use crate::rk::{stage_start, ALPHA, BETA, GAMMA, STAGES, ZETA};

/// Minimum number of grid points in `y <= 3 eps`.
pub const LAYER_POINTS: usize = 12;

/// Body force `F(t)` as `d + 1` spectral components.
pub type Forcing = Arc<dyn Fn(f64) -> Vec<SpectralField> + Send + Sync>;

#[derive(Clone, Debug)]
pub struct NSState {
    pub t: f64,
    pub eps: f64,
    pub velocity: VectorField,
    /// Filled by [`NsSolver::with_pressure`]; the time stepper does not need it.
    pub pressure: Option<SpectralField>,
    phi: SpectralField,
    eta: Option<SpectralField>,
}

impl NSState {
    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.velocity.components().map(|c| c.l2_norm_sq()).sum::<f64>()
    }

    /// `max |u(0)|` over all components.
    pub fn wall_slip(&self) -> f64 {
        self.velocity.components().map(|c| c.wall().linf_norm()).fold(0.0, f64::max)
    }
}

#[derive(Clone)]
struct Homogeneous {
    phi: Vec<C>,
    slope: C,
}

#[derive(Clone)]
struct Tendency {
    phi: SpectralField,
    eta: Option<SpectralField>,
    mean: Vec<Vec<C>>,
}

pub struct NsSolver {
    grid: Arc<Grid>,
    eps: f64,
    nu: f64,
    dt: f64,
    implicit: Vec<ModalOperator>,
    velocity_op: ModalOperator,
    pressure_op: ModalOperator,
    influence: Vec<Vec<Option<Homogeneous>>>,
    mean_mode: usize,
    forcing: Option<Forcing>,
    pub cfl_limit: f64,
}

impl fmt::Debug for NsSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NsSolver")
            .field("eps", &self.eps)
            .field("dt", &self.dt)
            .field("forced", &self.forcing.is_some())
            .finish()
    }
}

/// Per-step energy bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBudget {
    pub t: f64,
    pub energy: f64,
    /// `nu ‖grad U‖^2`
    pub dissipation: f64,
    /// Flux of kinetic energy and work through the top of the box.
    pub top_flux: f64,
    /// `∫ F . U`
    pub forcing_power: f64,
}

impl EnergyBudget {
    pub fn rate(&self) -> f64 {
        -self.dissipation + self.top_flux + self.forcing_power
    }
}

impl NsSolver {
    pub fn new(grid: &Arc<Grid>, eps: f64, dt: f64) -> Result<NsSolver> {
        if !(eps > 0.0) || !(dt > 0.0) {
            return Err(Error::Config(format!("need eps > 0 and dt > 0, got eps = {eps}, dt = {dt}")));
        }
        let have = grid.points_below(3.0 * eps);
        if have < LAYER_POINTS {
            return Err(Error::Resolution {
                eps,
                have,
                need: LAYER_POINTS,
                required_ny: grid.spec().required_ny(3.0 * eps, LAYER_POINTS)?,
            });
        }
        let nu = eps * eps;
        let mean_mode = (0..grid.nmodes())
            .find(|&m| grid.kabs(m) == 0.0)
            .ok_or_else(|| Error::InvalidGrid("no k = 0 mode".into()))?;
        let velocity_op = ModalOperator::new(grid, 0.0, 1.0, 1.0, |_| Bc::Value, |_| Bc::Transparent)?;
        let pressure_op = ModalOperator::new(
            grid,
            0.0,
            1.0,
            1.0,
            |_| Bc::Slope,
            |k| if k == 0.0 { Bc::Value } else { Bc::Transparent },
        )?;
        let ny = grid.ny();
        let mut implicit = Vec::with_capacity(STAGES);
        let mut influence = Vec::with_capacity(STAGES);
        for i in 0..STAGES {
            let b = BETA[i] * dt * nu;
            let op = ModalOperator::new(grid, 1.0, b, b, |_| Bc::Value, |k| if k == 0.0 { Bc::Slope } else { Bc::Value })?;
            let mut hom = Vec::with_capacity(grid.nmodes());
            for m in 0..grid.nmodes() {
                if m == mean_mode || !grid.keeps(m) {
                    hom.push(None);
                    continue;
                }
                let mut phi = vec![C::new(0.0, 0.0); ny];
                op.solve(m, &mut phi, C::new(1.0, 0.0), C::new(0.0, 0.0));
                let mut v: Vec<C> = phi.iter().map(|x| -x).collect();
                velocity_op.solve(m, &mut v, C::new(0.0, 0.0), C::new(0.0, 0.0));
                let slope = grid.d1().row(0, &v);
                if slope.norm() < 1e-300 {
                    return Err(Error::Compatibility(format!("degenerate influence solution at mode {m}")));
                }
                hom.push(Some(Homogeneous { phi, slope }));
            }
            implicit.push(op);
            influence.push(hom);
        }
        Ok(NsSolver {
            grid: grid.clone(),
            eps,
            nu,
            dt,
            implicit,
            velocity_op,
            pressure_op,
            influence,
            mean_mode,
            forcing: None,
            cfl_limit: DEFAULT_CFL,
        })
    }

    pub fn with_forcing(mut self, f: Forcing) -> NsSolver {
        self.forcing = Some(f);
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Project a velocity field onto the solver's state space.
    ///
    /// The wall-normal component and `eta` are kept; horizontal velocity is
    /// rebuilt from them, which discards any part violating the constraints.
    pub fn state(&self, t: f64, u: &VectorField) -> Result<NSState> {
        if u.grid() != &self.grid {
            return Err(Error::ShapeMismatch("initial velocity grid differs from solver grid".into()));
        }
        let g = &self.grid;
        let d = g.d();
        let phi = u.v.map_modes("phi", |m, c, out| {
            let k2 = g.kabs(m).powi(2);
            g.d2().apply(c, out);
            for (o, x) in out.iter_mut().zip(c) {
                *o -= x * k2;
            }
        });
        let eta = if d == 2 { Some(eta_of(&u.h[0], &u.h[1])?) } else { None };
        let mean: Vec<Vec<C>> = u.h.iter().map(|c| c.column(self.mean_mode).to_vec()).collect();
        self.rebuild(t, phi, eta, &mean)
    }

    fn rebuild(&self, t: f64, mut phi: SpectralField, mut eta: Option<SpectralField>, mean: &[Vec<C>]) -> Result<NSState> {
        let g = &self.grid;
        let (d, ny) = (g.d(), g.ny());
        let zero = C::new(0.0, 0.0);
        let mut v = SpectralField::zeros(g, "v");
        let mut h: Vec<SpectralField> = (0..d).map(|a| SpectralField::zeros(g, &format!("u{}", a + 1))).collect();
        let mut dv = vec![zero; ny];
        for m in 0..g.nmodes() {
            if m == self.mean_mode {
                for (c, col) in h.iter_mut().zip(mean) {
                    c.column_mut(m).copy_from_slice(col);
                }
                phi.column_mut(m).fill(zero);
                if let Some(e) = eta.as_mut() {
                    e.column_mut(m).fill(zero);
                }
                continue;
            }
            if !g.keeps(m) {
                phi.column_mut(m).fill(zero);
                if let Some(e) = eta.as_mut() {
                    e.column_mut(m).fill(zero);
                }
                continue;
            }
            let vc = v.column_mut(m);
            for (x, p) in vc.iter_mut().zip(phi.column(m)) {
                *x = -p;
            }
            self.velocity_op.solve(m, vc, zero, zero);
            g.d1().apply(vc, &mut dv);
            let k = g.k(m);
            let k2 = g.kabs(m).powi(2);
            let i = C::new(0.0, 1.0);
            if d == 1 {
                for (o, s) in h[0].column_mut(m).iter_mut().zip(&dv) {
                    *o = i * k[0] * s / k2;
                }
            } else {
                let ec = eta.as_ref().unwrap().column(m);
                for j in 0..ny {
                    h[0].column_mut(m)[j] = i * (k[0] * dv[j] + k[1] * ec[j]) / k2;
                    h[1].column_mut(m)[j] = i * (k[1] * dv[j] - k[0] * ec[j]) / k2;
                }
            }
        }
        Ok(NSState {
            t,
            eps: self.eps,
            velocity: VectorField { h, v },
            pressure: None,
            phi,
            eta,
        })
    }

    /// `H = -(U . grad) U + F` per component.
    fn forcing_terms(&self, s: &NSState) -> Result<Vec<SpectralField>> {
        let mut h = convective_terms(&[(&s.velocity, &s.velocity)])?;
        for c in h.iter_mut() {
            *c = -std::mem::replace(c, SpectralField::zeros(&self.grid, ""));
        }
        if let Some(f) = &self.forcing {
            for (c, fc) in h.iter_mut().zip(f(s.t)) {
                *c += &fc;
            }
        }
        Ok(h)
    }

    fn tendency(&self, s: &NSState) -> Result<Tendency> {
        let g = &self.grid;
        let d = g.d();
        let h = self.forcing_terms(s)?;
        let div_h = tangential_divergence(&h[..d]);
        let dy_div = div_h.normal_derivative(1)?;
        let mut phi = SpectralField::zeros(g, "N_phi");
        for m in 0..g.nmodes() {
            let k2 = g.kabs(m).powi(2);
            let (hv, dd) = (h[d].column(m), dy_div.column(m));
            for (j, o) in phi.column_mut(m).iter_mut().enumerate() {
                *o = -hv[j] * k2 - dd[j];
            }
        }
        let eta = if d == 2 { Some(eta_of(&h[0], &h[1])?) } else { None };
        let mean = h[..d].iter().map(|c| c.column(self.mean_mode).to_vec()).collect();
        Ok(Tendency { phi, eta, mean })
    }

    fn check_cfl(&self, s: &NSState) -> Result<()> {
        let c = cfl_number(&self.grid, &s.velocity, self.dt);
        if c > self.cfl_limit {
            return Err(Error::Cfl { cfl: c, limit: self.cfl_limit, dt: self.dt });
        }
        Ok(())
    }

    /// `u + alpha dt nu Δ_k u + dt (gamma N + zeta N_prev)`, then the implicit solve.
    fn advance_column(
        &self,
        i: usize,
        m: usize,
        col: &mut [C],
        n: &[C],
        prev: Option<&[C]>,
        bottom: C,
    ) {
        let g = &self.grid;
        let k2 = g.kabs(m).powi(2);
        let mut lap = vec![C::new(0.0, 0.0); col.len()];
        g.d2().apply(col, &mut lap);
        let a = ALPHA[i] * self.dt * self.nu;
        for j in 0..col.len() {
            let mut r = col[j] + (lap[j] - col[j] * k2) * a + n[j] * (GAMMA[i] * self.dt);
            if let Some(p) = prev {
                r += p[j] * (ZETA[i] * self.dt);
            }
            col[j] = r;
        }
        self.implicit[i].solve(m, col, bottom, C::new(0.0, 0.0));
    }

    /// One IMEX step; also returns the stage-start states.
    pub fn step_stages(&self, s: &NSState) -> Result<(NSState, Vec<NSState>)> {
        let g = &self.grid;
        let d = g.d();
        let zero = C::new(0.0, 0.0);
        let mut phi = s.phi.clone();
        let mut eta = s.eta.clone();
        let mut mean: Vec<Vec<C>> = s.velocity.h.iter().map(|c| c.column(self.mean_mode).to_vec()).collect();
        let mut prev: Option<Tendency> = None;
        let mut stages = Vec::with_capacity(STAGES);
        let mut cur = s.clone();
        for i in 0..STAGES {
            if i > 0 {
                cur = self.rebuild(s.t + stage_start(i) * self.dt, phi.clone(), eta.clone(), &mean)?;
            }
            self.check_cfl(&cur)?;
            let n = self.tendency(&cur)?;
            for m in 0..g.nmodes() {
                if m == self.mean_mode {
                    for a in 0..d {
                        let p = prev.as_ref().map(|p| p.mean[a].as_slice());
                        self.advance_column(i, m, &mut mean[a], &n.mean[a], p, zero);
                    }
                    continue;
                }
                let Some(hom) = &self.influence[i][m] else { continue };
                let col = phi.column_mut(m);
                self.advance_column(i, m, col, n.phi.column(m), prev.as_ref().map(|p| p.phi.column(m)), zero);
                let mut v: Vec<C> = col.iter().map(|x| -x).collect();
                self.velocity_op.solve(m, &mut v, zero, zero);
                let c = -g.d1().row(0, &v) / hom.slope;
                for (x, h) in col.iter_mut().zip(&hom.phi) {
                    *x += c * h;
                }
                if let (Some(e), Some(ne)) = (eta.as_mut(), n.eta.as_ref()) {
                    let pe = prev.as_ref().and_then(|p| p.eta.as_ref()).map(|p| p.column(m));
                    self.advance_column(i, m, e.column_mut(m), ne.column(m), pe, zero);
                }
            }
            prev = Some(n);
            stages.push(cur.clone());
        }
        let next = self.rebuild(s.t + self.dt, phi, eta, &mean)?;
        let size = next.velocity.linf_norm();
        if !size.is_finite() {
            return Err(Error::BlowUp { value: size, cap: f64::MAX, t: next.t });
        }
        Ok((next, stages))
    }

    pub fn step_ns(&self, s: &NSState) -> Result<NSState> {
        Ok(self.step_stages(s)?.0)
    }

    /// Run `nsteps` steps, calling `observe` on the initial state and after every step.
    pub fn run(
        &self,
        init: NSState,
        nsteps: usize,
        mut observe: impl FnMut(usize, &NSState) -> Result<()>,
    ) -> Result<NSState> {
        observe(0, &init)?;
        let mut s = init;
        for n in 1..=nsteps {
            s = self.step_ns(&s)?;
            observe(n, &s)?;
        }
        Ok(s)
    }

    /// Pressure from `-Δp = -div H`, `p' = H_v + nu v''` at the wall.
    pub fn pressure(&self, s: &NSState) -> Result<SpectralField> {
        let g = &self.grid;
        let d = g.d();
        let h = self.forcing_terms(s)?;
        let mut rhs = tangential_divergence(&h[..d]);
        rhs += &h[d].normal_derivative(1)?;
        let rhs = -rhs;
        let wall = &h[d].wall() + &s.velocity.v.wall_dyy().scaled(self.nu);
        let top = vec![C::new(0.0, 0.0); g.nmodes()];
        Ok(self.pressure_op.solve_field(&rhs, wall.coeffs(), &top, "p"))
    }

    pub fn with_pressure(&self, mut s: NSState) -> Result<NSState> {
        s.pressure = Some(self.pressure(&s)?);
        Ok(s)
    }

    pub fn energy_budget(&self, s: &NSState) -> Result<EnergyBudget> {
        let g = &self.grid;
        let (d, ny) = (g.d(), g.ny());
        let u = &s.velocity;
        let mut dissipation = 0.0;
        for c in u.components() {
            for a in 1..=d {
                dissipation += c.tangential_derivative(a)?.l2_norm_sq();
            }
            dissipation += c.normal_derivative(1)?.l2_norm_sq();
        }
        let p = self.pressure(s)?.to_physical();
        let phys: Vec<Vec<f64>> = u.components().map(|c| c.to_physical()).collect();
        let dy: Vec<Vec<f64>> =
            u.components().map(|c| c.normal_derivative(1).map(|f| f.to_physical())).collect::<Result<_>>()?;
        let top = ny - 1;
        let npts = g.nmodes();
        let mut flux = 0.0;
        for q in 0..npts {
            let idx = q * ny + top;
            let v = phys[d][idx];
            let mut ke = 0.0;
            for (c, dc) in phys.iter().zip(&dy) {
                flux += self.nu * c[idx] * dc[idx];
                ke += 0.5 * c[idx] * c[idx];
            }
            flux -= (p[idx] + ke) * v;
        }
        flux *= g.area() / npts as f64;
        let forcing_power = match &self.forcing {
            Some(f) => {
                let fc = f(s.t);
                let mut w = 0.0;
                for (a, b) in fc.iter().zip(u.components()) {
                    let (pa, pb) = (a.to_physical(), b.to_physical());
                    let prod: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
                    w += column_integral_physical(g, &prod);
                }
                w
            }
            None => 0.0,
        };
        Ok(EnergyBudget {
            t: s.t,
            energy: s.kinetic_energy(),
            dissipation: self.nu * dissipation,
            top_flux: flux,
            forcing_power,
        })
    }
}

fn column_integral_physical(g: &Grid, f: &[f64]) -> f64 {
    let ny = g.ny();
    let w = g.quad_weights();
    let npts = g.nmodes();
    let mut s = 0.0;
    for q in 0..npts {
        for j in 0..ny {
            s += w[j] * f[q * ny + j];
        }
    }
    s * g.area() / npts as f64
}

fn tangential_divergence(h: &[SpectralField]) -> SpectralField {
    let g = h[0].grid().clone();
    let mut out = SpectralField::zeros(&g, "div_h");
    for (a, c) in h.iter().enumerate() {
        out += &c.symbol("", |m| C::new(0.0, g.k(m)[a]));
    }
    out
}

fn eta_of(u1: &SpectralField, u2: &SpectralField) -> Result<SpectralField> {
    let mut e = u2.tangential_derivative(1)?;
    e -= &u1.tangential_derivative(2)?;
    Ok(e.with_name("eta"))
}

/// Energy drift: `|E(T) - E(0) - ∫ rate dt| / max(E(0), tiny)` from per-step budgets (composite Simpson, trapezoid on a trailing odd step).
pub fn energy_drift(budgets: &[EnergyBudget]) -> f64 {
    if budgets.len() < 2 {
        return 0.0;
    }
    let n = budgets.len() - 1;
    let h = budgets[1].t - budgets[0].t;
    let r: Vec<f64> = budgets.iter().map(|b| b.rate()).collect();
    let even = n - n % 2;
    let mut integral = 0.0;
    for k in (0..even).step_by(2) {
        integral += h / 3.0 * (r[k] + 4.0 * r[k + 1] + r[k + 2]);
    }
    if even < n {
        integral += 0.5 * h * (r[n - 1] + r[n]);
    }
    let scale = budgets[0].energy.max(f64::MIN_POSITIVE);
    (budgets[n].energy - budgets[0].energy - integral).abs() / scale
}

/// Errors of the NS run against the leading-order composite at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorRecord {
    pub t: f64,
    pub eps: f64,
    /// `v` layer weighted by `eps`.
    pub weighted: ErrorNorms,
    /// Same with weight 1 on the `v` layer.
    pub unit_weight: ErrorNorms,
}

/// Run NS from the expansion's initial composite and compare every `stride` outer steps.
///
/// `substeps` NS steps are taken per outer step.
pub fn run_error_experiment(exp: &Expansion, eps: f64, substeps: usize, stride: usize) -> Result<Vec<ErrorRecord>> {
    if substeps == 0 || stride == 0 {
        return Err(Error::Config("substeps and stride must be positive".into()));
    }
    let grid = exp.outer.grid().clone();
    let ns = NsSolver::new(&grid, eps, exp.dt() / substeps as f64)?;
    let s0 = exp.state(0)?;
    let init = ns.state(0.0, &leading_order(&s0, eps, eps)?)?;
    let mut out = Vec::new();
    let mut record = |n: usize, s: &NSState| -> Result<()> {
        let e = exp.state(n)?;
        out.push(ErrorRecord {
            t: e.t,
            eps,
            weighted: error_norms(&s.velocity, &leading_order(&e, eps, eps)?),
            unit_weight: error_norms(&s.velocity, &leading_order(&e, eps, 1.0)?),
        });
        Ok(())
    };
    record(0, &init)?;
    let mut s = init;
    for n in 1..=exp.nsteps() {
        for _ in 0..substeps {
            s = ns.step_ns(&s).map_err(|e| e.in_stage("navier-stokes", "reduce dt or raise ny"))?;
        }
        if n % stride == 0 || n == exp.nsteps() {
            record(n, &s)?;
        }
    }
    Ok(out)
}
