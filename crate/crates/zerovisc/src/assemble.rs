//! Two-term matched expansion on the outer grid and its residual in the
//! Navier-Stokes operator.

use std::sync::Arc;

use crate::elliptic::Vorticity;
use crate::error::{Error, Result};
use crate::euler::{
    solve_euler, solve_linearized_euler, EulerSolver, EulerTrajectory, InitialDataSpec, LinEulerTrajectory,
    WallForcing,
};
use crate::field::{SpectralField, Trace, VectorField, TAIL_TOLERANCE};
use crate::grid::Grid;
use crate::prandtl::{
    solve_linearized_prandtl, solve_prandtl, LayerSnapshot, LinPrandtlTrajectory, PrandtlSolver, PrandtlTrajectory,
};

/// Evaluate a layer field at `z = y / eps` on the outer grid.
///
/// Heights beyond the layer column are zero; the field must have decayed there.
pub fn resample(layer: &SpectralField, outer: &Arc<Grid>, eps: f64) -> Result<SpectralField> {
    let lg = layer.grid();
    if lg.nmodes() != outer.nmodes() || lg.box_len() != outer.box_len() || lg.d() != outer.d() {
        return Err(Error::ShapeMismatch("layer and outer grids differ tangentially".into()));
    }
    let (lz, nz, ny) = (lg.ly(), lg.ny(), outer.ny());
    let mut out = SpectralField::zeros(outer, layer.name());
    let mut weights = Vec::with_capacity(ny);
    for &y in outer.y() {
        let z = y / eps;
        if z > lz {
            weights.push(None);
        } else {
            weights.push(Some(lg.interp_weights(z.min(lz))?));
        }
    }
    if weights.iter().any(|w| w.is_none()) {
        let top = (0..lg.nmodes()).map(|m| layer.column(m)[nz - 1].norm()).fold(0.0, f64::max);
        let scale = layer.max_coeff();
        if top > TAIL_TOLERANCE * scale {
            return Err(Error::Interpolation(format!(
                "`{}` is {top:.3e} at the top of the layer column (max {scale:.3e}); y / eps exceeds {lz}",
                layer.name()
            )));
        }
    }
    for m in 0..outer.nmodes() {
        let src = layer.column(m).to_vec();
        let dst = out.column_mut(m);
        for (j, w) in weights.iter().enumerate() {
            if let Some((s, w)) = w {
                dst[j] = w.iter().enumerate().map(|(k, c)| src[s + k] * *c).sum();
            }
        }
    }
    Ok(out)
}

/// A scalar with its first two wall-normal derivatives.
#[derive(Clone, Debug)]
pub struct Profile {
    pub val: SpectralField,
    pub dy: SpectralField,
    pub dyy: SpectralField,
}

impl Profile {
    pub fn zeros(grid: &Arc<Grid>, name: &str) -> Profile {
        let z = SpectralField::zeros(grid, name);
        Profile { val: z.clone(), dy: z.clone(), dyy: z }
    }

    /// From an outer field, with stencil derivatives.
    pub fn outer(f: &SpectralField) -> Result<Profile> {
        Ok(Profile { val: f.clone(), dy: f.normal_derivative(1)?, dyy: f.normal_derivative(2)? })
    }

    /// From a layer field evaluated at `z = y / eps`; derivatives taken on the layer grid.
    pub fn layer(f: &SpectralField, outer: &Arc<Grid>, eps: f64) -> Result<Profile> {
        Ok(Profile {
            val: resample(f, outer, eps)?,
            dy: resample(&f.normal_derivative(1)?, outer, eps)? * (1.0 / eps),
            dyy: resample(&f.normal_derivative(2)?, outer, eps)? * (1.0 / (eps * eps)),
        })
    }

    pub fn axpy(&mut self, s: f64, o: &Profile) {
        self.val.axpy(s, &o.val);
        self.dy.axpy(s, &o.dy);
        self.dyy.axpy(s, &o.dyy);
    }
}

/// The expansion fields at one instant: outer flow to first order, layer to
/// first order plus the second-order normal velocity and pressure.
#[derive(Clone, Debug)]
pub struct ExpansionState {
    pub t: f64,
    pub ue0: VectorField,
    pub pe0: SpectralField,
    pub ue1: VectorField,
    pub pe1: SpectralField,
    pub layer: LayerSnapshot,
}

impl ExpansionState {
    pub fn zeros(outer: &Arc<Grid>, layer: &Arc<Grid>, t: f64) -> ExpansionState {
        let lz = |n: &str| SpectralField::zeros(layer, n);
        let d = outer.d();
        ExpansionState {
            t,
            ue0: VectorField::zeros(outer, "u_e0"),
            pe0: SpectralField::zeros(outer, "p_e0"),
            ue1: VectorField::zeros(outer, "u_e1"),
            pe1: SpectralField::zeros(outer, "p_e1"),
            layer: LayerSnapshot {
                u0: (0..d).map(|_| lz("u_p0")).collect(),
                vp1: lz("v_p1"),
                u1: (0..d).map(|_| lz("u_p1")).collect(),
                vp2: lz("v_p2"),
                pp2: lz("p_p2"),
                f: Trace::zeros(layer),
            },
        }
    }

    /// Scale every velocity-like field (pressures untouched).
    pub fn scale_velocity(&mut self, s: f64) {
        self.ue0 = self.ue0.scaled(s);
        self.ue1 = self.ue1.scaled(s);
        let l = &mut self.layer;
        for c in l.u0.iter_mut().chain(l.u1.iter_mut()) {
            *c = &*c * s;
        }
        l.vp1 = &l.vp1 * s;
        l.vp2 = &l.vp2 * s;
        l.f = l.f.scaled(s);
    }
}

/// The four trajectories of the expansion over one window.
#[derive(Debug)]
pub struct Expansion {
    pub outer: EulerSolver,
    pub layer: PrandtlSolver,
    pub euler: EulerTrajectory,
    pub p0: PrandtlTrajectory,
    pub forcing: WallForcing,
    pub lin: LinEulerTrajectory,
    pub p1: LinPrandtlTrajectory,
}

impl Expansion {
    /// Run outer flow, layer, first-order outer flow and first-order layer in order.
    pub fn build(
        outer: &Arc<Grid>,
        layer: &Arc<Grid>,
        init: &InitialDataSpec,
        dt: f64,
        nsteps: usize,
    ) -> Result<Expansion> {
        let es = EulerSolver::new(outer)?;
        let s0 = es.make_initial_data(init).map_err(|e| e.in_stage("euler", "check the initial data"))?;
        let scale = s0.u.linf_norm();
        let horizon = dt * nsteps as f64;
        let euler = solve_euler(&es, s0, dt, nsteps)
            .map_err(|e| e.in_stage("euler", "reduce dt or the horizon"))?;
        let ps = PrandtlSolver::new(layer, dt, scale, horizon)?;
        let p0 = solve_prandtl(&ps, &euler)
            .map_err(|e| e.in_stage("prandtl", "raise the layer height or shorten the horizon"))?;
        let pair = |t: &crate::prandtl::PrandtlTraces| (t.vp1_wall.scaled(-1.0), t.dt_vp1_wall.scaled(-1.0));
        let forcing = WallForcing {
            stages: p0.stages.iter().map(|st| st.iter().map(pair).collect()).collect(),
            last: pair(&p0.last),
        };
        let lin = solve_linearized_euler(&es, &euler, &forcing)
            .map_err(|e| e.in_stage("linearized euler", "reduce dt"))?;
        let p1 = solve_linearized_prandtl(&ps, &euler, &p0, &lin)
            .map_err(|e| e.in_stage("linearized prandtl", "raise the layer height or shorten the horizon"))?;
        Ok(Expansion { outer: es, layer: ps, euler, p0, forcing, lin, p1 })
    }

    pub fn nsteps(&self) -> usize {
        self.euler.nsteps()
    }

    pub fn dt(&self) -> f64 {
        self.euler.dt
    }

    pub fn time(&self, n: usize) -> f64 {
        self.euler.time(n)
    }

    /// All expansion fields at step `n`.
    pub fn state(&self, n: usize) -> Result<ExpansionState> {
        let bg = self.euler.state(&self.outer, n)?;
        let pe0 = self.outer.recover_pressure(&bg)?;
        let w1: &Vorticity = &self.lin.states[n];
        let (g, dt_g) = self.forcing.at(n, 0);
        let ue1 = self.outer.linear_velocity(w1, g)?;
        let pe1 = self.outer.linear_pressure(&bg, w1, g, dt_g)?;
        let layer = self.layer.snapshot(&self.euler, &self.p0, &self.p1, n)?;
        Ok(ExpansionState { t: bg.t, ue0: bg.u, pe0, ue1, pe1, layer })
    }
}

/// Assembled approximate solution: `d + 1` velocity profiles, pressure, displacement `f`.
#[derive(Clone, Debug)]
pub struct ApproximateSolution {
    pub eps: f64,
    pub t: f64,
    pub u: Vec<Profile>,
    pub p: Profile,
    pub f: Trace,
}

impl ApproximateSolution {
    pub fn grid(&self) -> &Arc<Grid> {
        self.p.val.grid()
    }

    pub fn velocity(&self) -> VectorField {
        let d = self.u.len() - 1;
        VectorField { h: self.u[..d].iter().map(|p| p.val.clone()).collect(), v: self.u[d].val.clone() }
    }

    /// `div u_a` computed from the assembled profiles.
    pub fn divergence(&self) -> Result<SpectralField> {
        let d = self.u.len() - 1;
        let mut div = self.u[d].dy.clone();
        for a in 0..d {
            div += &self.u[a].val.tangential_derivative(a + 1)?;
        }
        Ok(div)
    }

    /// `max |u_a(0)|` and `max |v_a(0) - eps^2 f|` over the wall.
    pub fn wall_defects(&self) -> (f64, f64) {
        let d = self.u.len() - 1;
        let hu = self.u[..d].iter().map(|p| p.val.wall().linf_norm()).fold(0.0, f64::max);
        let e2 = self.eps * self.eps;
        let f = self.f.regrid(self.grid()).unwrap_or_else(|_| self.f.clone());
        let hv = (&self.u[d].val.wall() - &f.scaled(e2)).linf_norm();
        (hu, hv)
    }
}

/// Which parts of the expansion enter an assembly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parts {
    /// Outer and layer fields, both orders.
    Full,
    /// Outer fields only, `f` kept in the wall data.
    OuterOnly,
}

/// Combine the expansion fields at one time into the approximate solution.
pub fn assemble(s: &ExpansionState, eps: f64) -> Result<ApproximateSolution> {
    assemble_parts(s, eps, Parts::Full)
}

pub fn assemble_parts(s: &ExpansionState, eps: f64, parts: Parts) -> Result<ApproximateSolution> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::Config(format!("eps = {eps} outside (0, 1/2]")));
    }
    let mut a = assemble_outer(s, eps)?;
    if parts == Parts::OuterOnly {
        return Ok(a);
    }
    let g = a.grid().clone();
    let d = g.d();
    let l = &s.layer;
    for c in 0..d {
        a.u[c].axpy(1.0, &Profile::layer(&l.u0[c], &g, eps)?);
        a.u[c].axpy(eps, &Profile::layer(&l.u1[c], &g, eps)?);
    }
    a.u[d].axpy(eps, &Profile::layer(&l.vp1, &g, eps)?);
    a.u[d].axpy(eps * eps, &Profile::layer(&l.vp2, &g, eps)?);
    a.p.axpy(eps * eps, &Profile::layer(&l.pp2, &g, eps)?);
    Ok(a)
}

/// 4th-order centred difference weights over offsets `-2..=2`.
pub const CENTRED_DT: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];

/// Time derivative of the velocity profiles from five equally spaced assemblies.
pub fn centred_dt(window: &[ApproximateSolution], dt: f64) -> Result<Vec<SpectralField>> {
    if window.len() != 5 {
        return Err(Error::WindowMismatch(format!("time derivative needs 5 snapshots, got {}", window.len())));
    }
    let ncomp = window[2].u.len();
    Ok((0..ncomp)
        .map(|c| {
            let mut acc = SpectralField::zeros(window[2].grid(), "dt u_a");
            for (k, a) in window.iter().enumerate() {
                if CENTRED_DT[k] != 0.0 {
                    acc.axpy(CENTRED_DT[k] / dt, &a.u[c].val);
                }
            }
            acc
        })
        .collect())
}

/// `e^{-y}` on the grid.
pub(crate) fn exp_profile(g: &Grid) -> Vec<f64> {
    g.y().iter().map(|y| (-y).exp()).collect()
}

/// Physical values of `f(x) e^{-y}`.
pub(crate) fn f_exp(f: &Trace, g: &Grid) -> Vec<f64> {
    let fp = f.to_physical();
    let e = exp_profile(g);
    let ny = g.ny();
    let mut out = Vec::with_capacity(fp.len() * ny);
    for v in fp {
        out.extend(e.iter().map(|x| v * x));
    }
    out
}

/// Residual of the approximate solution in the Navier-Stokes operator, per component.
#[derive(Clone, Debug)]
pub struct ResidualSet {
    pub t: f64,
    pub eps: f64,
    /// `d` horizontal components then the vertical one.
    pub r: Vec<SpectralField>,
}

impl ResidualSet {
    pub fn l2_h(&self) -> f64 {
        let d = self.r.len() - 1;
        self.r[..d].iter().map(|c| c.l2_norm_sq()).sum::<f64>().sqrt()
    }

    pub fn l2_v(&self) -> f64 {
        self.r[self.r.len() - 1].l2_norm()
    }

    pub fn l2(&self) -> f64 {
        self.r.iter().map(|c| c.l2_norm_sq()).sum::<f64>().sqrt()
    }

    pub fn linf(&self) -> f64 {
        self.r.iter().map(|c| c.linf_norm()).fold(0.0, f64::max)
    }
}

/// Left-hand side of the approximate system at one time, per component, with
/// the time derivative supplied.
pub fn apply_operator(a: &ApproximateSolution, dt_u: &[SpectralField]) -> Result<Vec<SpectralField>> {
    let g = a.grid().clone();
    let d = g.d();
    let e2 = a.eps * a.eps;
    let np = g.nmodes() * g.ny();
    let up: Vec<Vec<f64>> = a.u.iter().map(|p| p.val.to_physical()).collect();
    let fe = f_exp(&a.f, &g);
    let adv_v: Vec<f64> = (0..np).map(|q| up[d][q] - e2 * fe[q]).collect();
    let mut out = Vec::with_capacity(d + 1);
    for c in 0..=d {
        let prof = &a.u[c];
        let mut lin = dt_u[c].clone();
        lin.axpy(-e2, &prof.dyy);
        for ax in 1..=d {
            lin.axpy(-e2, &prof.val.tangential_derivative(ax)?.tangential_derivative(ax)?);
        }
        if c < d {
            lin += &a.p.val.tangential_derivative(c + 1)?;
        } else {
            lin += &a.p.dy;
        }
        let dy = prof.dy.to_physical();
        let grads: Vec<Vec<f64>> =
            (1..=d).map(|ax| prof.val.tangential_derivative(ax).map(|f| f.to_physical())).collect::<Result<_>>()?;
        let nl: Vec<f64> = (0..np)
            .map(|q| (0..d).map(|ax| up[ax][q] * grads[ax][q]).sum::<f64>() + adv_v[q] * dy[q])
            .collect();
        lin += &SpectralField::from_physical_dealiased(&g, &nl, "nl")?;
        out.push(lin);
    }
    Ok(out)
}

/// `R = -(operator applied to u_a)` at the centre of a five-snapshot window.
pub fn residual_by_substitution(window: &[ApproximateSolution], dt: f64) -> Result<ResidualSet> {
    let dtu = centred_dt(window, dt)?;
    let a = &window[2];
    let r = apply_operator(a, &dtu)?.into_iter().map(|f| -f).collect();
    Ok(ResidualSet { t: a.t, eps: a.eps, r })
}

/// Euler part of the residual in closed form:
/// `eps^2 (u1 . grad U1 - f e^{-y} dy(U0 + eps U1)) - eps^2 Δ(U0 + eps U1)`, returned as `R_e`.
pub fn euler_residual_closed_form(s: &ExpansionState, eps: f64) -> Result<Vec<SpectralField>> {
    let g = s.ue0.grid().clone();
    let d = g.d();
    let e2 = eps * eps;
    let np = g.nmodes() * g.ny();
    let f = s.layer.f.regrid(&g)?;
    let fe = f_exp(&f, &g);
    let u1: Vec<Vec<f64>> = s.ue1.components().map(|c| c.to_physical()).collect();
    let mut out = Vec::with_capacity(d + 1);
    for c in 0..=d {
        let (a0, a1) = if c < d { (&s.ue0.h[c], &s.ue1.h[c]) } else { (&s.ue0.v, &s.ue1.v) };
        let dy0 = a0.normal_derivative(1)?.to_physical();
        let dy1 = a1.normal_derivative(1)?.to_physical();
        let gr1: Vec<Vec<f64>> =
            (1..=d).map(|ax| a1.tangential_derivative(ax).map(|f| f.to_physical())).collect::<Result<_>>()?;
        let nl: Vec<f64> = (0..np)
            .map(|q| {
                let adv = (0..d).map(|ax| u1[ax][q] * gr1[ax][q]).sum::<f64>() + u1[d][q] * dy1[q];
                e2 * (adv - fe[q] * (dy0[q] + eps * dy1[q]))
            })
            .collect();
        let mut neg = SpectralField::from_physical_dealiased(&g, &nl, "-R_e")?;
        let mut lap = a0.clone();
        lap.axpy(eps, a1);
        let mut l = lap.normal_derivative(2)?;
        for ax in 1..=d {
            l += &lap.tangential_derivative(ax)?.tangential_derivative(ax)?;
        }
        neg.axpy(-e2, &l);
        out.push(-neg);
    }
    Ok(out)
}

/// Euler-only substitution with the zeroth- and first-order parts in `eps`
/// removed. The substituted operator is a cubic in `eps` whose two leading
/// coefficients are the discrete residuals of the outer equations; they are
/// eliminated by evaluating at `0, eps, -eps, 2 eps`.
pub fn euler_residual_by_substitution(
    window: &[ExpansionState],
    eps: f64,
    dt: f64,
) -> Result<Vec<SpectralField>> {
    let eval = |e: f64| -> Result<Vec<SpectralField>> {
        let w: Vec<ApproximateSolution> =
            window.iter().map(|s| assemble_outer(s, e)).collect::<Result<_>>()?;
        let dtu = centred_dt(&w, dt)?;
        apply_operator(&w[2], &dtu)
    };
    let s0 = eval(0.0)?;
    let sp = eval(eps)?;
    let sm = eval(-eps)?;
    let s2 = eval(2.0 * eps)?;
    Ok((0..s0.len())
        .map(|c| {
            // a2 h^2 = (S(h) + S(-h) - 2 S0) / 2; 6 a3 h^3 = S(2h) - S0 - 4 a2 h^2 - (S(h) - S(-h))
            let mut a2 = &sp[c] + &sm[c];
            a2.axpy(-2.0, &s0[c]);
            let a2 = a2 * 0.5;
            let mut a3 = &s2[c] - &s0[c];
            a3.axpy(-4.0, &a2);
            a3.axpy(-1.0, &sp[c]);
            a3.axpy(1.0, &sm[c]);
            let a3 = a3 * (1.0 / 6.0);
            -(&a2 + &a3)
        })
        .collect())
}

/// Outer fields only: a polynomial in `eps`, so any real `eps` is accepted.
pub fn assemble_outer(s: &ExpansionState, eps: f64) -> Result<ApproximateSolution> {
    let g = s.ue0.grid().clone();
    let d = g.d();
    let mut u = Vec::with_capacity(d + 1);
    for c in 0..=d {
        let (o0, o1) = if c < d { (&s.ue0.h[c], &s.ue1.h[c]) } else { (&s.ue0.v, &s.ue1.v) };
        let mut p = Profile::outer(o0)?;
        p.axpy(eps, &Profile::outer(o1)?);
        u.push(p);
    }
    let mut p = Profile::outer(&s.pe0)?;
    p.axpy(eps, &Profile::outer(&s.pe1)?);
    Ok(ApproximateSolution { eps, t: s.t, u, p, f: s.layer.f.regrid(&g)? })
}

/// The Taylor-remainder group `(v_e0 - y dy v_e0(0) - y^2/2 dyy v_e0(0)) dz u_p0 / eps`, per horizontal component.
pub fn taylor_group(s: &ExpansionState, eps: f64) -> Result<Vec<SpectralField>> {
    let g = s.ue0.grid().clone();
    let ny = g.ny();
    let v = s.ue0.v.to_physical();
    let dv = s.ue0.v.wall_dy().to_physical();
    let dvv = s.ue0.v.wall_dyy().to_physical();
    let y = g.y();
    let rem: Vec<f64> = (0..v.len())
        .map(|q| {
            let (p, j) = (q / ny, q % ny);
            v[q] - y[j] * dv[p] - 0.5 * y[j] * y[j] * dvv[p]
        })
        .collect();
    s.layer
        .u0
        .iter()
        .map(|c| {
            let dz = resample(&c.normal_derivative(1)?, &g, eps)?.to_physical();
            let prod: Vec<f64> = rem.iter().zip(&dz).map(|(a, b)| a * b / eps).collect();
            SpectralField::from_physical_dealiased(&g, &prod, "taylor")
        })
        .collect()
}

/// Labelled magnitudes of the residual pieces at the centre of a window.
#[derive(Clone, Debug)]
pub struct ResidualSplit {
    pub t: f64,
    pub eps: f64,
    pub total: f64,
    pub euler_closed: f64,
    /// `|closed form - substitution| / |closed form|` for the Euler part.
    pub euler_gap: f64,
    pub taylor: f64,
    /// Everything not attributed to the Euler part.
    pub layer_rest: f64,
}

fn l2(v: &[SpectralField]) -> f64 {
    v.iter().map(|c| c.l2_norm_sq()).sum::<f64>().sqrt()
}

pub fn residual_split_report(window: &[ExpansionState], eps: f64, dt: f64) -> Result<ResidualSplit> {
    let full: Vec<ApproximateSolution> = window.iter().map(|s| assemble(s, eps)).collect::<Result<_>>()?;
    let r = residual_by_substitution(&full, dt)?;
    let closed = euler_residual_closed_form(&window[2], eps)?;
    let subst = euler_residual_by_substitution(window, eps, dt)?;
    let gap: Vec<SpectralField> = closed.iter().zip(&subst).map(|(a, b)| a - b).collect();
    let cn = l2(&closed);
    let rest: Vec<SpectralField> = r.r.iter().zip(&closed).map(|(a, b)| a - b).collect();
    Ok(ResidualSplit {
        t: r.t,
        eps,
        total: r.l2(),
        euler_closed: cn,
        euler_gap: if cn > 0.0 { l2(&gap) / cn } else { l2(&gap) },
        taylor: l2(&taylor_group(&window[2], eps)?),
        layer_rest: l2(&rest),
    })
}

/// `‖u_eps - u_e - u_p(y/eps)‖` and `‖v_eps - v_e - w eps v_p(y/eps)‖` in L2 and Linf, `w` the layer weight on `v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorms {
    pub l2_u: f64,
    pub l2_v: f64,
    pub linf_u: f64,
    pub linf_v: f64,
}

/// Leading-order composite `(u_e0 + u_p0(y/eps), v_e0 + weight * v_p1(y/eps))`.
pub fn leading_order(s: &ExpansionState, eps: f64, v_weight: f64) -> Result<VectorField> {
    let g = s.ue0.grid().clone();
    let mut u = s.ue0.clone();
    for (c, l) in u.h.iter_mut().zip(&s.layer.u0) {
        c.axpy(1.0, &resample(l, &g, eps)?);
    }
    u.v.axpy(v_weight, &resample(&s.layer.vp1, &g, eps)?);
    Ok(u)
}

pub fn error_norms(ns: &VectorField, approx: &VectorField) -> ErrorNorms {
    let mut l2u = 0.0;
    let mut linfu = 0.0f64;
    for (a, b) in ns.h.iter().zip(&approx.h) {
        let e = a - b;
        l2u += e.l2_norm_sq();
        linfu = linfu.max(e.linf_norm());
    }
    let ev = &ns.v - &approx.v;
    ErrorNorms { l2_u: l2u.sqrt(), l2_v: ev.l2_norm(), linf_u: linfu, linf_v: ev.linf_norm() }
}
