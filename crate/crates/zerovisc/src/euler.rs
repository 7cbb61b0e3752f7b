//! Outer inviscid flow: vorticity transport with Biot-Savart velocity, the
//! linearised flow driven by a wall transpiration, and pressure recovery.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::elliptic::{Bc, HalfSpace, ModalOperator, Vorticity};
use crate::error::{Error, Result};
use crate::field::{SpectralField, Trace, VectorField, C};
use crate::grid::Grid;
use crate::rk::{stage_start, GAMMA, STAGES, ZETA};

/// Stream-function initial data `ψ = A sin(k0 x) χ(y)` with a bump `χ` on `[a, b]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialDataSpec {
    pub amplitude: f64,
    pub k0: f64,
    pub support: [f64; 2],
    /// `χ = (4 s (1 - s))^(2 n)` on the support, `s` the normalised height.
    #[serde(default = "default_bump_order")]
    pub bump_order: u32,
}

fn default_bump_order() -> u32 {
    3
}

/// Smallest allowed lower edge of the initial vorticity support.
pub const MIN_SUPPORT: f64 = 2.0;
pub const DEFAULT_GUARD: f64 = 1.0;
pub const DEFAULT_CFL: f64 = 0.5;

impl InitialDataSpec {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let [a, b] = self.support;
        if !(a >= MIN_SUPPORT) {
            return Err(Error::Config(format!("vorticity support starts at {a}; it must stay at or above y = {MIN_SUPPORT}")));
        }
        if !(b > a) || b >= grid.ly() {
            return Err(Error::Config(format!("support [{a}, {b}] must be an interval inside (0, {})", grid.ly())));
        }
        let n = self.k0 * grid.box_len() / (2.0 * std::f64::consts::PI);
        if (n - n.round()).abs() > 1e-9 || n.round() == 0.0 && self.amplitude != 0.0 {
            return Err(Error::Config(format!("k0 = {} is not a nonzero multiple of the box wavenumber", self.k0)));
        }
        if n.round().abs() > (grid.nx() / 3) as f64 {
            return Err(Error::Config(format!("k0 = {} lies outside the dealiased band", self.k0)));
        }
        Ok(())
    }

    /// `(χ, χ', χ'')` at height `y`.
    pub fn bump(&self, y: f64) -> [f64; 3] {
        let [a, b] = self.support;
        if y <= a || y >= b {
            return [0.0; 3];
        }
        let l = b - a;
        let s = (y - a) / l;
        let g = 4.0 * s * (1.0 - s);
        let g1 = 4.0 * (1.0 - 2.0 * s) / l;
        let g2 = -8.0 / (l * l);
        let p = 2 * self.bump_order as i32;
        let pf = p as f64;
        [
            g.powi(p),
            pf * g.powi(p - 1) * g1,
            pf * (pf - 1.0) * g.powi(p - 2) * g1 * g1 + pf * g.powi(p - 1) * g2,
        ]
    }
}

/// Outer state: vorticity and its Biot-Savart velocity.
#[derive(Clone, Debug)]
pub struct EulerState {
    pub t: f64,
    pub w: Vorticity,
    pub u: VectorField,
}

impl EulerState {
    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.u.l2_norm().powi(2)
    }
}

/// Wall quantities of the outer flow that drive the layer equations.
#[derive(Clone, Debug)]
pub struct EulerTraces {
    pub t: f64,
    pub u: Vec<Trace>,
    pub dt_u: Vec<Trace>,
    pub dy_u: Vec<Trace>,
    pub dy_v: Trace,
    pub dyy_v: Trace,
    pub grad_p: Vec<Trace>,
}

/// Physical values of `(d_1 f, .., d_d f, dy f)`.
fn grad_phys(f: &SpectralField) -> Result<Vec<Vec<f64>>> {
    let d = f.grid().d();
    let mut out = Vec::with_capacity(d + 1);
    for a in 1..=d {
        out.push(f.tangential_derivative(a)?.to_physical());
    }
    out.push(f.normal_derivative(1)?.to_physical());
    Ok(out)
}

fn phys_components(u: &VectorField) -> Vec<Vec<f64>> {
    u.components().map(|c| c.to_physical()).collect()
}

/// Accumulates `sign * (U . grad) f` into `acc`.
fn add_advection(acc: &mut [f64], sign: f64, u: &[Vec<f64>], grad: &[Vec<f64>]) {
    for (uc, gc) in u.iter().zip(grad) {
        for ((a, x), y) in acc.iter_mut().zip(uc).zip(gc) {
            *a += sign * x * y;
        }
    }
}

/// `-(U . grad) w + (w . grad) U` for a vorticity `w` (stretching only for d = 2).
pub fn transport(u: &VectorField, w: &Vorticity) -> Result<Vorticity> {
    transport_pair(&[(u, w)])
}

/// Sum of `-(U . grad) w + (w . grad) U` over pairs, with one transform per component.
pub fn transport_pair(pairs: &[(&VectorField, &Vorticity)]) -> Result<Vorticity> {
    let grid = pairs[0].0.grid().clone();
    let npts = grid.nmodes() * grid.ny();
    match &pairs[0].1 {
        Vorticity::Planar(_) => {
            let mut acc = vec![0.0; npts];
            for (u, w) in pairs {
                let Vorticity::Planar(om) = w else {
                    return Err(Error::ShapeMismatch("mixed vorticity kinds".into()));
                };
                add_advection(&mut acc, -1.0, &phys_components(u), &grad_phys(om)?);
            }
            Ok(Vorticity::Planar(SpectralField::from_physical_dealiased(&grid, &acc, "dw")?))
        }
        Vorticity::Spatial(_) => {
            let mut acc = vec![vec![0.0; npts]; 3];
            for (u, w) in pairs {
                let up = phys_components(u);
                let wc = w.components();
                let wp: Vec<Vec<f64>> = wc.iter().map(|c| c.to_physical()).collect();
                for (i, comp) in wc.iter().enumerate() {
                    add_advection(&mut acc[i], -1.0, &up, &grad_phys(comp)?);
                }
                // stretching: (w . grad) U_i
                let uc: Vec<&SpectralField> = u.components().collect();
                for (i, ui) in uc.iter().enumerate() {
                    add_advection(&mut acc[i], 1.0, &wp, &grad_phys(ui)?);
                }
            }
            let mut out = Vec::with_capacity(3);
            for (i, a) in acc.iter().enumerate() {
                out.push(SpectralField::from_physical_dealiased(&grid, a, &format!("dw{}", i + 1))?);
            }
            let [a, b, c]: [SpectralField; 3] = out.try_into().unwrap();
            Ok(Vorticity::Spatial([a, b, c]))
        }
    }
}

/// `(U . grad) V` for each component of `V`, summed over pairs `(U, V)`.
pub fn convective_terms(pairs: &[(&VectorField, &VectorField)]) -> Result<Vec<SpectralField>> {
    let grid = pairs[0].0.grid().clone();
    let npts = grid.nmodes() * grid.ny();
    let ncomp = grid.d() + 1;
    let mut acc = vec![vec![0.0; npts]; ncomp];
    for (u, v) in pairs {
        let up = phys_components(u);
        for (i, c) in v.components().enumerate() {
            add_advection(&mut acc[i], 1.0, &up, &grad_phys(c)?);
        }
    }
    acc.iter()
        .enumerate()
        .map(|(i, a)| SpectralField::from_physical_dealiased(&grid, a, &format!("conv{i}")))
        .collect()
}

/// Solver context for the outer flow on one grid.
#[derive(Debug)]
pub struct EulerSolver {
    grid: Arc<Grid>,
    hs: HalfSpace,
    pressure_op: ModalOperator,
    pub cfl_limit: f64,
    pub guard: f64,
    /// Relative level below which vorticity counts as zero for the support monitor.
    pub support_tol: f64,
}

impl EulerSolver {
    pub fn new(grid: &Arc<Grid>) -> Result<EulerSolver> {
        let pressure_op =
            ModalOperator::new(grid, 0.0, 1.0, 1.0, |_| Bc::Slope, |k| if k == 0.0 { Bc::Value } else { Bc::Slope })?;
        Ok(EulerSolver {
            grid: grid.clone(),
            hs: HalfSpace::new(grid)?,
            pressure_op,
            cfl_limit: DEFAULT_CFL,
            guard: DEFAULT_GUARD,
            support_tol: 1e-8,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn halfspace(&self) -> &HalfSpace {
        &self.hs
    }

    pub fn state(&self, t: f64, w: Vorticity) -> Result<EulerState> {
        let u = self.hs.biot_savart(&w)?;
        Ok(EulerState { t, w, u })
    }

    pub fn make_initial_data(&self, spec: &InitialDataSpec) -> Result<EulerState> {
        spec.validate(&self.grid)?;
        let (a, k) = (spec.amplitude, spec.k0);
        let g = &self.grid;
        if g.d() == 1 {
            // w = -Δψ = A sin(k x) (k^2 χ - χ'')
            let w = SpectralField::from_fn(g, "w", |x, y| {
                let c = spec.bump(y);
                a * (k * x[0]).sin() * (k * k * c[0] - c[2])
            });
            self.state(0.0, Vorticity::Planar(w))
        } else {
            // vector potential (ψ_b, -ψ_a, 0) with ψ_a = A sin(k x1) cos(k x2) χ,
            // ψ_b = A/2 cos(k x1) sin(k x2) χ; the vorticity is the discrete curl
            let u1 = SpectralField::from_fn(g, "u1", |x, y| a * (k * x[0]).sin() * (k * x[1]).cos() * spec.bump(y)[1]);
            let u2 = SpectralField::from_fn(g, "u2", |x, y| {
                0.5 * a * (k * x[0]).cos() * (k * x[1]).sin() * spec.bump(y)[1]
            });
            let v = SpectralField::from_fn(g, "v", |x, y| {
                let c = spec.bump(y)[0];
                -a * k * (k * x[0]).cos() * (k * x[1]).cos() * c - 0.5 * a * k * (k * x[0]).cos() * (k * x[1]).cos() * c
            });
            let w = Vorticity::curl(&VectorField { h: vec![u1, u2], v })?;
            self.state(0.0, w)
        }
    }

    /// `dt * max(|u_a| / dx + |v| / dy)` over the grid.
    pub fn cfl_number(&self, u: &VectorField, dt: f64) -> f64 {
        cfl_number(&self.grid, u, dt)
    }

    fn check_cfl(&self, u: &VectorField, dt: f64) -> Result<()> {
        let c = self.cfl_number(u, dt);
        if c > self.cfl_limit {
            return Err(Error::Cfl { cfl: c, limit: self.cfl_limit, dt });
        }
        Ok(())
    }

    /// Lowest height at which `|w|` exceeds `support_tol * max|w|`.
    pub fn support_floor(&self, w: &Vorticity) -> Option<f64> {
        let ny = self.grid.ny();
        let phys: Vec<Vec<f64>> = w.components().iter().map(|c| c.to_physical()).collect();
        let max = phys.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        if max == 0.0 {
            return None;
        }
        let thr = self.support_tol * max;
        (0..ny).find(|&j| phys.iter().any(|p| (0..self.grid.nmodes()).any(|q| p[q * ny + j].abs() > thr)))
            .map(|j| self.grid.y()[j])
    }

    fn check_support(&self, s: &EulerState) -> Result<()> {
        if let Some(y) = self.support_floor(&s.w) {
            if y < self.guard {
                return Err(Error::SupportErosion { y, guard: self.guard, t: s.t });
            }
        }
        Ok(())
    }

    pub fn rhs(&self, s: &EulerState) -> Result<Vorticity> {
        transport(&s.u, &s.w)
    }

    /// One explicit RK3 step; also returns the three stage-start states and their right-hand sides.
    pub fn step_stages(&self, s: &EulerState, dt: f64) -> Result<(EulerState, Vec<(EulerState, Vorticity)>)> {
        let mut stages = Vec::with_capacity(STAGES);
        let mut w = s.w.clone();
        let mut prev: Option<Vorticity> = None;
        let mut cur = s.clone();
        for i in 0..STAGES {
            if i > 0 {
                cur = self.state(s.t + stage_start(i) * dt, w.clone())?;
            }
            self.check_cfl(&cur.u, dt)?;
            let n = self.rhs(&cur)?;
            w.axpy(dt * GAMMA[i], &n);
            if let Some(p) = &prev {
                w.axpy(dt * ZETA[i], p);
            }
            prev = Some(n.clone());
            stages.push((cur.clone(), n));
        }
        let next = self.state(s.t + dt, w)?;
        self.check_support(&next)?;
        Ok((next, stages))
    }

    pub fn step_euler(&self, s: &EulerState, dt: f64) -> Result<EulerState> {
        Ok(self.step_stages(s, dt)?.0)
    }

    /// Pressure from `-Δp = div((U . grad) U)` with Neumann data read off the
    /// normal momentum equation at the wall and at the top.
    pub fn recover_pressure(&self, s: &EulerState) -> Result<SpectralField> {
        let dw = self.rhs(s)?;
        let dt_u = self.hs.biot_savart(&dw)?;
        self.pressure_from(&convective_terms(&[(&s.u, &s.u)])?, &dt_u.v)
    }

    /// Solve for the pressure given the convective terms per component and `dt v`.
    pub fn pressure_from(&self, conv: &[SpectralField], dt_v: &SpectralField) -> Result<SpectralField> {
        let d = self.grid.d();
        let mut rhs = conv[d].normal_derivative(1)?;
        for a in 0..d {
            rhs += &conv[a].tangential_derivative(a + 1)?;
        }
        let n = self.grid.ny();
        let mut bottom = Vec::with_capacity(self.grid.nmodes());
        let mut top = Vec::with_capacity(self.grid.nmodes());
        for m in 0..self.grid.nmodes() {
            bottom.push(-(dt_v.column(m)[0] + conv[d].column(m)[0]));
            top.push(if self.grid.kabs(m) == 0.0 { C::new(0.0, 0.0) } else { -(dt_v.column(m)[n - 1] + conv[d].column(m)[n - 1]) });
        }
        Ok(self.pressure_op.solve_field(&rhs, &bottom, &top, "p"))
    }

    /// Wall traces of the state, with `rhs` its vorticity tendency.
    pub fn wall_traces(&self, s: &EulerState, rhs: &Vorticity) -> Result<EulerTraces> {
        let dt_u = self.hs.biot_savart(rhs)?;
        let p = self.pressure_from(&convective_terms(&[(&s.u, &s.u)])?, &dt_u.v)?;
        let pw = p.wall();
        Ok(EulerTraces {
            t: s.t,
            u: s.u.h.iter().map(|c| c.wall()).collect(),
            dt_u: dt_u.h.iter().map(|c| c.wall()).collect(),
            dy_u: s.u.h.iter().map(|c| c.wall_dy()).collect(),
            dy_v: s.u.v.wall_dy(),
            dyy_v: s.u.v.wall_dyy(),
            grad_p: (1..=self.grid.d()).map(|a| pw.tangential_derivative(a)).collect::<Result<_>>()?,
        })
    }
}

pub fn cfl_number(grid: &Grid, u: &VectorField, dt: f64) -> f64 {
    let ny = grid.ny();
    let phys: Vec<Vec<f64>> = u.components().map(|c| c.to_physical()).collect();
    let d = grid.d();
    let dx = grid.dx();
    let mut worst = 0.0f64;
    for j in 0..ny {
        let dy = grid.dy_local(j);
        for p in 0..grid.nmodes() {
            let mut c = phys[d][p * ny + j].abs() / dy;
            for a in 0..d {
                c += phys[a][p * ny + j].abs() / dx;
            }
            worst = worst.max(c);
        }
    }
    worst * dt
}

/// Stored outer trajectory: the vorticity after every step and wall traces at every stage start.
#[derive(Clone, Debug)]
pub struct EulerTrajectory {
    pub dt: f64,
    pub states: Vec<Vorticity>,
    pub stages: Vec<Vec<EulerTraces>>,
    pub last: EulerTraces,
    pub energy: Vec<f64>,
}

impl EulerTrajectory {
    pub fn nsteps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// Traces at the start of stage `i` of step `n`; `(nsteps, 0)` is the final time.
    pub fn traces(&self, n: usize, i: usize) -> &EulerTraces {
        if n == self.nsteps() {
            &self.last
        } else {
            &self.stages[n][i]
        }
    }

    pub fn state(&self, solver: &EulerSolver, n: usize) -> Result<EulerState> {
        solver.state(self.time(n), self.states[n].clone())
    }

    /// Replays step `n` to recover the stage-start states and tendencies.
    pub fn stage_states(&self, solver: &EulerSolver, n: usize) -> Result<Vec<(EulerState, Vorticity)>> {
        let s = self.state(solver, n)?;
        Ok(solver.step_stages(&s, self.dt)?.1)
    }
}

/// Integrate the outer flow for `nsteps` steps, recording stage traces.
pub fn solve_euler(solver: &EulerSolver, init: EulerState, dt: f64, nsteps: usize) -> Result<EulerTrajectory> {
    let mut states = vec![init.w.clone()];
    let mut energy = vec![init.kinetic_energy()];
    let mut stages = Vec::with_capacity(nsteps);
    let mut s = init;
    for _ in 0..nsteps {
        let (next, st) = solver.step_stages(&s, dt)?;
        let mut tr = Vec::with_capacity(STAGES);
        for (state, n) in &st {
            tr.push(solver.wall_traces(state, n)?);
        }
        stages.push(tr);
        energy.push(next.kinetic_energy());
        states.push(next.w.clone());
        s = next;
    }
    let n = solver.rhs(&s)?;
    let last = solver.wall_traces(&s, &n)?;
    Ok(EulerTrajectory { dt, states, stages, last, energy })
}

// ---------------------------------------------------------------------------
// linearised outer flow

/// Velocity of the potential flow whose normal velocity at the wall is `g`:
/// `Φ = -(g / |k|) e^{-|k| y}` per mode.
pub fn transpiration_velocity(grid: &Arc<Grid>, g: &Trace) -> Result<VectorField> {
    let mut phi = SpectralField::zeros(grid, "phi");
    let mut v = SpectralField::zeros(grid, "v_phi");
    if g.coeffs()[0].norm() > 1e-12 * g.max_coeff().max(1e-300) && g.coeffs()[0].norm() > 1e-15 {
        return Err(Error::Compatibility(format!("wall transpiration has nonzero mean {:.3e}", g.coeffs()[0].norm())));
    }
    for m in 1..grid.nmodes() {
        let k = grid.kabs(m);
        let c = g.coeffs()[m];
        for (j, &y) in grid.y().iter().enumerate() {
            let e = (-k * y).exp();
            phi.column_mut(m)[j] = -c * (e / k);
            v.column_mut(m)[j] = c * e;
        }
    }
    let h = (1..=grid.d()).map(|a| phi.tangential_derivative(a).map(|f| f.with_name(&format!("u_phi{a}")))).collect::<Result<_>>()?;
    Ok(VectorField { h, v })
}

/// Wall traces of the first-order outer flow.
#[derive(Clone, Debug)]
pub struct LinEulerTraces {
    pub t: f64,
    pub u: Vec<Trace>,
    pub dy_v: Trace,
    /// Normal velocity at the wall (the imposed transpiration).
    pub g: Trace,
}

/// Boundary data for the linearised flow at every stage start.
#[derive(Clone, Debug)]
pub struct WallForcing {
    /// `g` and `dt g` at `[step][stage]`.
    pub stages: Vec<Vec<(Trace, Trace)>>,
    pub last: (Trace, Trace),
}

impl WallForcing {
    pub fn at(&self, n: usize, i: usize) -> &(Trace, Trace) {
        if n == self.stages.len() {
            &self.last
        } else {
            &self.stages[n][i]
        }
    }

    pub fn zero(grid: &Arc<Grid>, nsteps: usize) -> WallForcing {
        let z = (Trace::zeros(grid), Trace::zeros(grid));
        WallForcing { stages: vec![vec![z.clone(); STAGES]; nsteps], last: z }
    }
}

#[derive(Clone, Debug)]
pub struct LinEulerTrajectory {
    pub dt: f64,
    pub states: Vec<Vorticity>,
    pub stages: Vec<Vec<LinEulerTraces>>,
    pub last: LinEulerTraces,
}

impl LinEulerTrajectory {
    pub fn nsteps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn traces(&self, n: usize, i: usize) -> &LinEulerTraces {
        if n == self.nsteps() {
            &self.last
        } else {
            &self.stages[n][i]
        }
    }
}

impl EulerSolver {
    /// Velocity of the first-order flow: Biot-Savart part plus transpiration potential.
    pub fn linear_velocity(&self, w1: &Vorticity, g: &Trace) -> Result<VectorField> {
        let mut u = self.hs.biot_savart(w1)?;
        let pot = transpiration_velocity(&self.grid, &g.regrid(&self.grid)?)?;
        u.axpy(1.0, &pot);
        Ok(u)
    }

    /// Tendency of the first-order vorticity around the background `(u0, w0)`.
    pub fn linear_rhs(&self, u0: &VectorField, w0: &Vorticity, u1: &VectorField, w1: &Vorticity) -> Result<Vorticity> {
        transport_pair(&[(u0, w1), (u1, w0)])
    }

    fn lin_traces(&self, t: f64, u1: &VectorField, g: &Trace) -> LinEulerTraces {
        LinEulerTraces {
            t,
            u: u1.h.iter().map(|c| c.wall()).collect(),
            dy_v: u1.v.wall_dy(),
            g: g.regrid(&self.grid).unwrap_or_else(|_| g.clone()),
        }
    }

    /// First-order pressure from the linearised momentum equation.
    pub fn linear_pressure(
        &self,
        bg: &EulerState,
        w1: &Vorticity,
        g: &Trace,
        dt_g: &Trace,
    ) -> Result<SpectralField> {
        let u1 = self.linear_velocity(w1, g)?;
        let dw1 = self.linear_rhs(&bg.u, &bg.w, &u1, w1)?;
        let dt_u1 = self.linear_velocity(&dw1, dt_g)?;
        let conv = convective_terms(&[(&bg.u, &u1), (&u1, &bg.u)])?;
        self.pressure_from(&conv, &dt_u1.v)
    }
}

/// Solve the linearised outer flow from zero data with wall transpiration `g`.
pub fn solve_linearized_euler(
    solver: &EulerSolver,
    background: &EulerTrajectory,
    forcing: &WallForcing,
) -> Result<LinEulerTrajectory> {
    let nsteps = background.nsteps();
    if forcing.stages.len() != nsteps {
        return Err(Error::WindowMismatch(format!(
            "background has {nsteps} steps, wall data {}",
            forcing.stages.len()
        )));
    }
    let dt = background.dt;
    let grid = solver.grid().clone();
    let mut w1 = Vorticity::zeros(&grid);
    let mut states = vec![w1.clone()];
    let mut stages = Vec::with_capacity(nsteps);
    for n in 0..nsteps {
        let bg = background.stage_states(solver, n)?;
        let mut prev: Option<Vorticity> = None;
        let mut tr = Vec::with_capacity(STAGES);
        for i in 0..STAGES {
            let (bs, _) = &bg[i];
            let g = &forcing.at(n, i).0;
            let u1 = solver.linear_velocity(&w1, g)?;
            tr.push(solver.lin_traces(bs.t, &u1, g));
            let r = solver.linear_rhs(&bs.u, &bs.w, &u1, &w1)?;
            let mut next = w1.clone();
            next.axpy(dt * GAMMA[i], &r);
            if let Some(p) = &prev {
                next.axpy(dt * ZETA[i], p);
            }
            prev = Some(r);
            w1 = next;
        }
        stages.push(tr);
        states.push(w1.clone());
    }
    let g = &forcing.last.0;
    let u1 = solver.linear_velocity(&w1, g)?;
    let last = solver.lin_traces(background.time(nsteps), &u1, g);
    Ok(LinEulerTrajectory { dt, states, stages, last })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, Stretching};
    use std::f64::consts::PI;

    fn grid(ny: usize) -> Arc<Grid> {
        GridSpec { d: 1, nx: 16, box_len: 2.0 * PI, ny, ly: 8.0, stretching: Stretching::Uniform }.build().unwrap()
    }

    fn spec(a: f64) -> InitialDataSpec {
        InitialDataSpec { amplitude: a, k0: 1.0, support: [2.0, 4.0], bump_order: 3 }
    }

    #[test]
    fn zero_amplitude_gives_zero_state() {
        let s = EulerSolver::new(&grid(64)).unwrap();
        let st = s.make_initial_data(&spec(0.0)).unwrap();
        assert_eq!(st.u.linf_norm(), 0.0);
        let next = s.step_euler(&st, 0.01).unwrap();
        assert_eq!(next.w.linf_norm(), 0.0);
    }

    #[test]
    fn rejects_support_near_wall() {
        let s = EulerSolver::new(&grid(64)).unwrap();
        let mut sp = spec(1.0);
        sp.support = [1.5, 4.0];
        assert!(matches!(s.make_initial_data(&sp), Err(Error::Config(_))));
    }

    #[test]
    fn initial_state_is_wall_compatible() {
        let s = EulerSolver::new(&grid(400)).unwrap();
        let st = s.make_initial_data(&spec(1.0)).unwrap();
        assert!(st.u.scaled_divergence().unwrap() < 1e-12);
        assert!(st.u.v.wall().linf_norm() < 1e-12);
        // no vorticity below the support
        let floor = s.support_floor(&st.w).unwrap();
        assert!(floor >= 2.0);
        // velocity matches the analytic stream-function derivatives
        let ex = SpectralField::from_fn(s.grid(), "u", |x, y| x[0].sin() * spec(1.0).bump(y)[1]);
        let err = (&st.u.h[0] - &ex).linf_norm() / ex.linf_norm();
        assert!(err < 1e-6, "{err}");
    }
}
