//! Splitting of the error vorticity into an outer part and a wall-layer part.
//!
//! With `U = u_eps - u_a` and `w = curl U` (planar, d = 1) the error obeys
//!
//! `dt w - eps^2 Δw + u_eps . grad w + Ũ . grad w_a + M = curl R`,
//!
//! `Ũ = U + (0, eps^2 f e^{-y})`, `M = eps^2 (dx f e^{-y} dy v_a + f e^{-y} dy u_a)`.
//! The outer part takes the outer pieces of `w_a`, `M`, `R` and the
//! homogeneous wall condition `w' + |k| w = 0`. The layer part takes the rest
//! and the wall data `w' + |k| w = G / eps^2 - (|k| / ik) dt f`, where
//! `G = dy (-Δ_D)^{-1} J` at the wall and `J = dt w - eps^2 Δw`. The extra
//! `dt f` term comes from the nonzero stream function on the wall
//! (`v = -eps^2 f` there).
//!
//! Sources and wall data are formed at step times from the stored runs and
//! interpolated to stage times with cubic Lagrange weights; advection uses
//! the Navier-Stokes stage velocities.

use std::sync::Arc;

use crate::assemble::{
    apply_operator, assemble, assemble_outer, euler_residual_closed_form, f_exp, ApproximateSolution, Expansion,
    Profile,
};
use crate::elliptic::{Bc, HalfSpace, ModalOperator, Vorticity};
use crate::error::{Error, Result};
use crate::euler::transport;
use crate::field::{SpectralField, Trace, VectorField, C};
use crate::grid::{fornberg, Grid};
use crate::ns::{NSState, NsSolver};
use crate::rk::{stage_start, ALPHA, BETA, GAMMA, STAGES, ZETA};

/// Split state at one time.
#[derive(Clone, Debug)]
pub struct VorticitySplit {
    pub t: f64,
    pub w_e: SpectralField,
    pub w_p: SpectralField,
    /// Wall data `w_p' + |k| w_p` in force at `t`.
    pub wall_data: Trace,
}

/// Per-step audit of the split.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitRecord {
    pub t: f64,
    /// `‖w_e + w_p - curl U‖`
    pub defect: f64,
    /// `‖curl U‖`
    pub vorticity: f64,
    /// `max |w_e' + |k| w_e|` at the wall.
    pub outer_wall_residual: f64,
    /// Wall trace of the wall-normal vorticity components; none exist for d = 1.
    pub normal_component_trace: f64,
}

impl SplitRecord {
    pub fn relative_defect(&self) -> f64 {
        if self.vorticity > 0.0 {
            self.defect / self.vorticity
        } else {
            self.defect
        }
    }
}

/// Step-time data feeding the split equations.
struct Frame {
    t: f64,
    ns: NSState,
    err: VectorField,
    w: SpectralField,
    s_e: SpectralField,
    s_p: SpectralField,
    g_p: Trace,
}

fn planar(w: Vorticity) -> SpectralField {
    match w {
        Vorticity::Planar(f) => f,
        Vorticity::Spatial(_) => unreachable!("planar split only"),
    }
}

/// `dx v - dy u` from assembled profiles.
fn profile_curl(a: &ApproximateSolution) -> Result<SpectralField> {
    let mut w = a.u[1].val.tangential_derivative(1)?;
    w -= &a.u[0].dy;
    Ok(w)
}

fn difference(a: &ApproximateSolution, b: &ApproximateSolution) -> Vec<Profile> {
    a.u.iter()
        .zip(&b.u)
        .map(|(x, y)| {
            let mut p = x.clone();
            p.axpy(-1.0, y);
            p
        })
        .collect()
}

/// `eps^2 (dx f e^{-y} dy v + f e^{-y} dy u)` for the given velocity profiles.
fn m_term(g: &Arc<Grid>, f: &Trace, eps: f64, u: &[Profile]) -> Result<SpectralField> {
    let e2 = eps * eps;
    let fe = f_exp(f, g);
    let dfe = f_exp(&f.tangential_derivative(1)?, g);
    let (du, dv) = (u[0].dy.to_physical(), u[1].dy.to_physical());
    let prod: Vec<f64> = (0..fe.len()).map(|q| e2 * (dfe[q] * dv[q] + fe[q] * du[q])).collect();
    SpectralField::from_physical_dealiased(g, &prod, "M")
}

fn curl_of(r: &[SpectralField]) -> Result<SpectralField> {
    let mut c = r[1].tangential_derivative(1)?;
    c -= &r[0].normal_derivative(1)?;
    Ok(c)
}

/// First-derivative weights at node `n` from five nodes inside `0..=last`.
fn dt_weights(n: usize, last: usize, dt: f64) -> Result<(usize, Vec<f64>)> {
    if last < 4 {
        return Err(Error::WindowMismatch(format!("time derivative needs 5 snapshots, have {}", last + 1)));
    }
    let start = n.saturating_sub(2).min(last - 4);
    let nodes: Vec<f64> = (0..5).map(|k| (start + k) as f64 * dt).collect();
    let w = fornberg(n as f64 * dt, &nodes, 1);
    Ok((start, w[1].clone()))
}

/// Cubic Lagrange weights at local time `t` from four step nodes inside `0..=last`.
fn interp_weights(t: f64, dt: f64, last: usize) -> (usize, Vec<f64>) {
    let n = (t / dt).floor().max(0.0) as usize;
    let start = n.saturating_sub(1).min(last.saturating_sub(3));
    let nodes: Vec<f64> = (0..4).map(|k| (start + k) as f64 * dt).collect();
    (start, fornberg(t, &nodes, 0).swap_remove(0))
}

fn blend(fields: &[&SpectralField], w: &[f64]) -> SpectralField {
    let mut out = fields[0] * w[0];
    for (f, c) in fields.iter().zip(w).skip(1) {
        out.axpy(*c, f);
    }
    out
}

fn blend_trace(traces: &[&Trace], w: &[f64]) -> Trace {
    let mut out = traces[0].scaled(w[0]);
    for (f, c) in traces.iter().zip(w).skip(1) {
        out.axpy(*c, f);
    }
    out
}

/// Evolve the split over outer steps `start..start + nsteps` of `exp`
/// alongside a Navier-Stokes run (started at `t = 0` from the approximate
/// solution, same step), auditing `w_e + w_p = curl U` after each step.
///
/// The split starts from `w_e = curl U`, `w_p = 0`.
pub fn evolve_vorticity_split(exp: &Expansion, eps: f64, start: usize, nsteps: usize) -> Result<Vec<SplitRecord>> {
    evolve_vorticity_split_with(exp, eps, start, nsteps, |_, _| Ok(()))
}

/// As [`evolve_vorticity_split`], handing each step's split and error
/// velocity `u - u_a` to `observe`.
pub fn evolve_vorticity_split_with(
    exp: &Expansion,
    eps: f64,
    start: usize,
    nsteps: usize,
    mut observe: impl FnMut(&VorticitySplit, &VectorField) -> Result<()>,
) -> Result<Vec<SplitRecord>> {
    let grid = exp.outer.grid().clone();
    if grid.d() != 1 {
        return Err(Error::Unsupported("the vorticity split is implemented for d = 1".into()));
    }
    let dt = exp.dt();
    // cubic interpolation over the last step reaches two steps ahead, the
    // time derivatives two more
    let last = nsteps + 2;
    let data_last = last + 2;
    if start + data_last > exp.nsteps() {
        return Err(Error::WindowMismatch(format!(
            "split over steps {start}..{} needs {} expansion steps, have {}",
            start + nsteps,
            start + data_last,
            exp.nsteps()
        )));
    }
    let ns = NsSolver::new(&grid, eps, dt)?;
    let hs = exp.outer.halfspace();
    let states: Vec<_> = (start..=start + data_last).map(|n| exp.state(n)).collect::<Result<_>>()?;
    let full: Vec<ApproximateSolution> = states.iter().map(|s| assemble(s, eps)).collect::<Result<_>>()?;
    let outer: Vec<ApproximateSolution> = states.iter().map(|s| assemble_outer(s, eps)).collect::<Result<_>>()?;

    let mut ns_states = Vec::with_capacity(last + 1);
    let mut s = ns.state(0.0, &assemble(&exp.state(0)?, eps)?.velocity())?;
    for _ in 0..start {
        s = ns.step_ns(&s)?;
    }
    ns_states.push(s.clone());
    for _ in 0..last {
        s = ns.step_ns(&s)?;
        ns_states.push(s.clone());
    }

    let mut frames = Vec::with_capacity(last + 1);
    for (n, nss) in ns_states.into_iter().enumerate() {
        let (start, w) = dt_weights(n, data_last, dt)?;
        let a = &full[n];
        let o = &outer[n];
        let dt_u: Vec<SpectralField> = (0..2)
            .map(|c| blend(&(0..5).map(|k| &full[start + k].u[c].val).collect::<Vec<_>>(), &w))
            .collect();
        let dt_f = blend_trace(&(0..5).map(|k| &full[start + k].f).collect::<Vec<_>>(), &w);
        let r: Vec<SpectralField> = apply_operator(a, &dt_u)?.into_iter().map(|f| -f).collect();
        let r_e = euler_residual_closed_form(&states[n], eps)?;
        let r_p: Vec<SpectralField> = r.iter().zip(&r_e).map(|(x, y)| x - y).collect();

        let mut err = nss.velocity.clone();
        err.axpy(-1.0, &a.velocity());
        let mut tilde = err.clone();
        let s_wall = f_exp(&a.f, &grid);
        tilde.v += &SpectralField::from_physical(&grid, &s_wall.iter().map(|x| eps * eps * x).collect::<Vec<_>>(), "s")?;

        let w_a = profile_curl(a)?;
        let w_ae = profile_curl(o)?;
        let w_ap = &w_a - &w_ae;
        let layer_parts = difference(a, o);
        let m_e = m_term(&grid, &a.f, eps, &o.u)?;
        let m_p = m_term(&grid, &a.f, eps, &layer_parts)?;

        let mut s_e = planar(transport(&tilde, &Vorticity::Planar(w_ae))?);
        s_e -= &m_e;
        s_e += &curl_of(&r_e)?;
        let mut s_p = planar(transport(&tilde, &Vorticity::Planar(w_ap))?);
        s_p -= &m_p;
        s_p += &curl_of(&r_p)?;

        let w = &planar(Vorticity::curl(&nss.velocity)?) - &w_a;
        let mut j = planar(transport(&nss.velocity, &Vorticity::Planar(w.clone()))?);
        j += &s_e;
        j += &s_p;
        let g_p = wall_data(hs, &j, &dt_f, eps)?;
        frames.push(Frame { t: nss.t, ns: nss, err, w, s_e, s_p, g_p });
    }

    let nu = eps * eps;
    let zero = C::new(0.0, 0.0);
    let ops: Vec<ModalOperator> = (0..STAGES)
        .map(|i| {
            let b = BETA[i] * dt * nu;
            ModalOperator::new(&grid, 1.0, b, b, |_| Bc::Transparent, |_| Bc::Value)
        })
        .collect::<Result<_>>()?;

    let mut split = VorticitySplit {
        t: frames[0].t,
        w_e: frames[0].w.clone(),
        w_p: SpectralField::zeros(&grid, "w_p"),
        wall_data: frames[0].g_p.clone(),
    };
    observe(&split, &frames[0].err)?;
    let mut out = vec![audit(&split, &frames[0])?];
    for n in 0..nsteps {
        let (_, stages) = ns.step_stages(&frames[n].ns)?;
        let mut prev: Option<(SpectralField, SpectralField)> = None;
        for (i, st) in stages.iter().enumerate() {
            let (k0, wts) = interp_weights((n as f64 + stage_start(i)) * dt, dt, last);
            let fr: Vec<&Frame> = (0..4).map(|k| &frames[k0 + k]).collect();
            let se = blend(&fr.iter().map(|f| &f.s_e).collect::<Vec<_>>(), &wts);
            let sp = blend(&fr.iter().map(|f| &f.s_p).collect::<Vec<_>>(), &wts);
            let mut ne = planar(transport(&st.velocity, &Vorticity::Planar(split.w_e.clone()))?);
            ne += &se;
            let mut np = planar(transport(&st.velocity, &Vorticity::Planar(split.w_p.clone()))?);
            np += &sp;

            let (k1, wb) = interp_weights((n as f64 + stage_start(i + 1)) * dt, dt, last);
            let gp = blend_trace(&(0..4).map(|k| &frames[k1 + k].g_p).collect::<Vec<_>>(), &wb);
            let pe = prev.as_ref().map(|p| &p.0);
            let pp = prev.as_ref().map(|p| &p.1);
            split.w_e = imex_stage(&grid, &ops[i], i, dt, nu, &split.w_e, &ne, pe, &vec![zero; grid.nmodes()]);
            split.w_p = imex_stage(&grid, &ops[i], i, dt, nu, &split.w_p, &np, pp, gp.coeffs());
            split.wall_data = gp;
            prev = Some((ne, np));
        }
        split.t = frames[n + 1].t;
        observe(&split, &frames[n + 1].err)?;
        out.push(audit(&split, &frames[n + 1])?);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn imex_stage(
    g: &Arc<Grid>,
    op: &ModalOperator,
    i: usize,
    dt: f64,
    nu: f64,
    w: &SpectralField,
    n: &SpectralField,
    prev: Option<&SpectralField>,
    bottom: &[C],
) -> SpectralField {
    let mut lap = w.normal_derivative(2).expect("planar field");
    lap.axpy(-1.0, &w.symbol("", |m| C::new(g.kabs(m).powi(2), 0.0)));
    let mut rhs = w.clone();
    rhs.axpy(ALPHA[i] * dt * nu, &lap);
    rhs.axpy(GAMMA[i] * dt, n);
    if let Some(p) = prev {
        rhs.axpy(ZETA[i] * dt, p);
    }
    let top = vec![C::new(0.0, 0.0); g.nmodes()];
    op.solve_field(&rhs, bottom, &top, w.name())
}

/// `G / eps^2 - (|k| / ik) dt f` with `G = dy (-Δ_D)^{-1} J` at the wall.
fn wall_data(hs: &HalfSpace, j: &SpectralField, dt_f: &Trace, eps: f64) -> Result<Trace> {
    let g = j.grid().clone();
    let psi = hs.solve_dirichlet(j, &Trace::zeros(&g))?;
    let mut out = psi.wall_dy().scaled(1.0 / (eps * eps));
    let hil = dt_f.symbol(|m| {
        let k = g.k(m)[0];
        if k == 0.0 {
            C::new(0.0, 0.0)
        } else {
            C::new(g.kabs(m), 0.0) / C::new(0.0, k)
        }
    });
    out.axpy(-1.0, &hil);
    Ok(out)
}

fn audit(s: &VorticitySplit, f: &Frame) -> Result<SplitRecord> {
    let mut sum = &s.w_e + &s.w_p;
    sum -= &f.w;
    let g = s.w_e.grid().clone();
    let robin = &s.w_e.wall_dy() + &s.w_e.wall().symbol(|m| C::new(g.kabs(m), 0.0));
    Ok(SplitRecord {
        t: s.t,
        defect: sum.l2_norm(),
        vorticity: f.w.l2_norm(),
        outer_wall_residual: robin.linf_norm(),
        normal_component_trace: 0.0,
    })
}

