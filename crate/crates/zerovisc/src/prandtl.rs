//! Boundary-layer equations in the stretched variable `z = y / eps`.
//!
//! Layer fields live on their own grid `T^d x [0, lz]` that shares the
//! tangential discretisation of the outer grid, so wall traces of the outer
//! flow can be used directly. Diffusion in `z` is implicit, everything else
//! explicit, with the same IMEX scheme as the other solvers.

use std::sync::Arc;

use crate::elliptic::{Bc, ModalOperator};
use crate::error::{Error, Result};
use crate::euler::{EulerTrajectory, EulerTraces, LinEulerTrajectory, LinEulerTraces};
use crate::field::{SpectralField, Trace};
use crate::grid::Grid;
use crate::rk::{stage_start, ALPHA, BETA, GAMMA, STAGES, ZETA};

/// Blow-up cap on `max |dz u|` relative to the outer velocity scale.
pub const BLOWUP_FACTOR: f64 = 1e3;

/// Tangential fields of one layer quantity (`d` components).
pub type LayerVector = Vec<SpectralField>;

/// Physical values of a wall trace repeated along every `z` column.
pub(crate) fn spread(tr: &Trace, ny: usize) -> Vec<f64> {
    let v = tr.to_physical();
    let mut out = Vec::with_capacity(v.len() * ny);
    for x in v {
        out.extend(std::iter::repeat(x).take(ny));
    }
    out
}

/// The wall-normal coordinate at every physical point.
pub(crate) fn heights(grid: &Grid) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.nmodes() * grid.ny());
    for _ in 0..grid.nmodes() {
        out.extend_from_slice(grid.y());
    }
    out
}

fn divergence(u: &[SpectralField]) -> Result<SpectralField> {
    let mut div = u[0].tangential_derivative(1)?;
    for (a, c) in u.iter().enumerate().skip(1) {
        div += &c.tangential_derivative(a + 1)?;
    }
    Ok(div)
}

fn phys(u: &[SpectralField]) -> Vec<Vec<f64>> {
    u.iter().map(|c| c.to_physical()).collect()
}

fn tangential_grads(f: &SpectralField) -> Result<Vec<Vec<f64>>> {
    (1..=f.grid().d()).map(|a| f.tangential_derivative(a).map(|g| g.to_physical())).collect()
}

fn trace_grads(t: &Trace, ny: usize, d: usize) -> Result<Vec<Vec<f64>>> {
    (1..=d).map(|a| t.tangential_derivative(a).map(|g| spread(&g, ny))).collect()
}

/// Wall-normal velocity `∫_z^∞ div_x u` of a layer velocity.
pub fn recover_vp1(u: &[SpectralField]) -> Result<SpectralField> {
    let div = divergence(u)?.with_name("div_x u_p");
    Ok(div.vertical_tail_integral()?.with_name("v_p"))
}

/// Second-order normal layer velocity `∫_z^∞ div_x u_p1`.
pub fn compute_vp2(u1: &[SpectralField]) -> Result<SpectralField> {
    Ok(recover_vp1(u1)?.with_name("v_p2"))
}

/// Displacement `∫_0^∞ div_x u_p1 dz`, the wall value of [`compute_vp2`].
pub fn compute_f(u1: &[SpectralField]) -> Result<Trace> {
    divergence(u1)?.with_name("div_x u_p1").vertical_tail_integral_at(0.0)
}

/// Layer solver for one grid and time step.
#[derive(Debug)]
pub struct PrandtlSolver {
    grid: Arc<Grid>,
    dt: f64,
    implicit: Vec<ModalOperator>,
    /// `max |dz u|` above this ends the window.
    pub cap: f64,
    /// Gaussian weight rate: `rho(t) = 1 - lambda_p t`.
    pub lambda_p: f64,
}

/// Stage-start wall data of the leading-order layer.
#[derive(Clone, Debug)]
pub struct PrandtlTraces {
    pub t: f64,
    pub vp1_wall: Trace,
    pub dt_vp1_wall: Trace,
}

#[derive(Clone, Debug)]
pub struct PrandtlTrajectory {
    pub dt: f64,
    pub states: Vec<LayerVector>,
    pub stages: Vec<Vec<PrandtlTraces>>,
    pub last: PrandtlTraces,
    pub max_dz: Vec<f64>,
    pub gaussian: Vec<f64>,
}

impl PrandtlTrajectory {
    pub fn nsteps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn traces(&self, n: usize, i: usize) -> &PrandtlTraces {
        if n == self.nsteps() {
            &self.last
        } else {
            &self.stages[n][i]
        }
    }
}

#[derive(Clone, Debug)]
pub struct LinPrandtlTrajectory {
    pub dt: f64,
    pub states: Vec<LayerVector>,
}

/// Background of the first-order layer equation at one instant.
pub struct LayerBackground<'a> {
    pub u0: &'a [SpectralField],
    pub vp1: &'a SpectralField,
    pub e: &'a EulerTraces,
    pub l: &'a LinEulerTraces,
}

/// Outer wall data at every stage start of a fixed-step window.
pub trait OuterSchedule {
    fn dt(&self) -> f64;
    fn nsteps(&self) -> usize;
    /// Traces at the start of stage `i` of step `n`; `(nsteps, 0)` is the final time.
    fn traces(&self, n: usize, i: usize) -> &EulerTraces;
}

impl OuterSchedule for EulerTrajectory {
    fn dt(&self) -> f64 {
        self.dt
    }
    fn nsteps(&self) -> usize {
        EulerTrajectory::nsteps(self)
    }
    fn traces(&self, n: usize, i: usize) -> &EulerTraces {
        EulerTrajectory::traces(self, n, i)
    }
}

/// Prescribed wall data, for driving the layer without an outer solve.
#[derive(Clone, Debug)]
pub struct TraceSchedule {
    pub dt: f64,
    pub stages: Vec<Vec<EulerTraces>>,
    pub last: EulerTraces,
}

impl TraceSchedule {
    /// Samples `f(t)` at every stage start of `nsteps` steps.
    pub fn sample(dt: f64, nsteps: usize, f: impl Fn(f64) -> EulerTraces) -> TraceSchedule {
        let stages = (0..nsteps)
            .map(|n| (0..STAGES).map(|i| f((n as f64 + stage_start(i)) * dt)).collect())
            .collect();
        TraceSchedule { dt, stages, last: f(nsteps as f64 * dt) }
    }
}

impl OuterSchedule for TraceSchedule {
    fn dt(&self) -> f64 {
        self.dt
    }
    fn nsteps(&self) -> usize {
        self.stages.len()
    }
    fn traces(&self, n: usize, i: usize) -> &EulerTraces {
        if n == self.stages.len() {
            &self.last
        } else {
            &self.stages[n][i]
        }
    }
}

/// Traces at the start of stage `i` (`i = 3` means the end of the step).
fn at<'a, T>(n: usize, i: usize, get: impl Fn(usize, usize) -> &'a T) -> &'a T {
    if i == STAGES {
        get(n + 1, 0)
    } else {
        get(n, i)
    }
}

impl PrandtlSolver {
    pub fn new(grid: &Arc<Grid>, dt: f64, velocity_scale: f64, horizon: f64) -> Result<PrandtlSolver> {
        let implicit = (0..STAGES)
            .map(|i| ModalOperator::new(grid, 1.0, BETA[i] * dt, 0.0, |_| Bc::Value, |_| Bc::Value))
            .collect::<Result<_>>()?;
        Ok(PrandtlSolver {
            grid: grid.clone(),
            dt,
            implicit,
            cap: BLOWUP_FACTOR * velocity_scale.max(1e-300),
            lambda_p: if horizon > 0.0 { 0.5 / horizon } else { 0.0 },
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn zeros(&self) -> LayerVector {
        (1..=self.grid.d()).map(|a| SpectralField::zeros(&self.grid, &format!("u_p{a}"))).collect()
    }

    /// Explicit part of the leading-order layer equation and the normal velocity `v_p1`.
    pub fn rhs(&self, u: &[SpectralField], e: &EulerTraces) -> Result<(LayerVector, SpectralField)> {
        let g = &self.grid;
        let (d, ny) = (g.d(), g.ny());
        let vp1 = recover_vp1(u)?;
        let z = heights(g);
        let vw = spread(&vp1.wall(), ny);
        let dyv = spread(&e.dy_v, ny);
        let vp = vp1.to_physical();
        let big_v: Vec<f64> = (0..z.len()).map(|q| vp[q] - vw[q] + z[q] * dyv[q]).collect();
        let up = phys(u);
        let ue: Vec<Vec<f64>> = e.u.iter().map(|t| spread(t, ny)).collect();
        let mut out = Vec::with_capacity(d);
        for c in 0..d {
            let gu = tangential_grads(&u[c])?;
            let gue = trace_grads(&e.u[c], ny, d)?;
            let dz = u[c].normal_derivative(1)?.to_physical();
            let mut acc = vec![0.0; z.len()];
            for q in 0..z.len() {
                let mut s = big_v[q] * dz[q];
                for a in 0..d {
                    s += up[a][q] * gue[a][q] + (up[a][q] + ue[a][q]) * gu[a][q];
                }
                acc[q] = -s;
            }
            out.push(SpectralField::from_physical_dealiased(g, &acc, &format!("N_p{c}"))?);
        }
        Ok((out, vp1))
    }

    /// `dt v_p1` from the full tendency `dzz u + N`.
    pub fn dt_vp1(&self, u: &[SpectralField], n: &[SpectralField]) -> Result<SpectralField> {
        let mut du = Vec::with_capacity(u.len());
        for (c, r) in u.iter().zip(n) {
            du.push(&c.normal_derivative(2)? + r);
        }
        Ok(recover_vp1(&du)?.with_name("dt v_p1"))
    }

    /// One IMEX stage sequence. `rhs(i, u)` gives the explicit part at stage
    /// start `i`; `bc(i)` the bottom and top values at the end of stage `i`.
    fn imex_step(
        &self,
        u: &[SpectralField],
        mut rhs: impl FnMut(usize, &[SpectralField]) -> Result<LayerVector>,
        bc: impl Fn(usize) -> (Vec<Trace>, Vec<Trace>),
    ) -> Result<LayerVector> {
        let dt = self.dt;
        let mut cur: LayerVector = u.to_vec();
        let mut prev: Option<LayerVector> = None;
        for i in 0..STAGES {
            let n = rhs(i, &cur)?;
            let (bottom, top) = bc(i);
            let mut next = Vec::with_capacity(cur.len());
            for c in 0..cur.len() {
                let mut r = cur[c].clone();
                r.axpy(ALPHA[i] * dt, &cur[c].normal_derivative(2)?);
                r.axpy(GAMMA[i] * dt, &n[c]);
                if let Some(p) = &prev {
                    r.axpy(ZETA[i] * dt, &p[c]);
                }
                next.push(self.implicit[i].solve_field(&r, bottom[c].coeffs(), top[c].coeffs(), cur[c].name()));
            }
            prev = Some(n);
            cur = next;
        }
        Ok(cur)
    }

    fn monitors(&self, u: &[SpectralField], t: f64) -> Result<(f64, f64)> {
        let mut max_dz = 0.0f64;
        let mut gauss = 0.0f64;
        let rho = 1.0 - self.lambda_p * t;
        let z = heights(&self.grid);
        for c in u {
            max_dz = max_dz.max(c.normal_derivative(1)?.linf_norm());
            for (v, zz) in c.to_physical().iter().zip(&z) {
                gauss = gauss.max((rho * zz * zz / 4.0).exp() * v.abs());
            }
        }
        if max_dz > self.cap {
            return Err(Error::BlowUp { value: max_dz, cap: self.cap, t });
        }
        Ok((max_dz, gauss))
    }

    /// Replays step `n` of the leading-order layer, returning stage-start
    /// states with their right-hand sides and `v_p1`, and the new state.
    pub fn step_stages(
        &self,
        u: &[SpectralField],
        euler: &dyn OuterSchedule,
        n: usize,
    ) -> Result<(LayerVector, Vec<(LayerVector, LayerVector, SpectralField)>)> {
        let mut stages = Vec::with_capacity(STAGES);
        let zero = vec![Trace::zeros(&self.grid); self.grid.d()];
        let next = self.imex_step(
            u,
            |i, cur| {
                let (r, vp1) = self.rhs(cur, euler.traces(n, i))?;
                stages.push((cur.to_vec(), r.clone(), vp1));
                Ok(r)
            },
            |i| {
                let e = at(n, i + 1, |a, b| euler.traces(a, b));
                (e.u.iter().map(|t| t.scaled(-1.0)).collect(), zero.clone())
            },
        )?;
        Ok((next, stages))
    }

    // -----------------------------------------------------------------------
    // first order

    /// The eight forcing groups of the first-order layer equation, in
    /// physical space, per component. Their sum is moved to the right-hand side.
    ///
    /// 1. `(u0 + ue0(0)) . grad_x u1`
    /// 2. `(vp1 + ve1(0) + z dy ve0(0)) dz u1`
    /// 3. `u1 . grad_x (u0 + ue0(0))`
    /// 4. `(ue1(0) + z dy ue0(0)) . grad_x u0`
    /// 5. `(vp2 - vp2(0) + z dy ve1(0) + z^2/2 dyy ve0(0)) dz u0`
    /// 6. `z (u0 . grad_x) dy ue0(0)`
    /// 7. `(u0 . grad_x) ue1(0)`
    /// 8. `vp1 dy ue0(0)`
    pub fn forcing_groups(&self, bg: &LayerBackground, u1: &[SpectralField]) -> Result<Vec<Vec<Vec<f64>>>> {
        let g = &self.grid;
        let (d, ny) = (g.d(), g.ny());
        let z = heights(g);
        let np = z.len();
        let e = bg.e;
        let l = bg.l;
        let vp2 = compute_vp2(u1)?;
        let vp2p = vp2.to_physical();
        let vp2w = spread(&vp2.wall(), ny);
        let vp1p = bg.vp1.to_physical();
        let ve1 = spread(&l.g, ny);
        let dyve0 = spread(&e.dy_v, ny);
        let dyyve0 = spread(&e.dyy_v, ny);
        let dyve1 = spread(&l.dy_v, ny);
        let u0p = phys(bg.u0);
        let u1p = phys(u1);
        let ue0: Vec<Vec<f64>> = e.u.iter().map(|t| spread(t, ny)).collect();
        let ue1: Vec<Vec<f64>> = l.u.iter().map(|t| spread(t, ny)).collect();
        let dyue0: Vec<Vec<f64>> = e.dy_u.iter().map(|t| spread(t, ny)).collect();

        let v2: Vec<f64> = (0..np).map(|q| vp1p[q] + ve1[q] + z[q] * dyve0[q]).collect();
        let v5: Vec<f64> =
            (0..np).map(|q| vp2p[q] - vp2w[q] + z[q] * dyve1[q] + 0.5 * z[q] * z[q] * dyyve0[q]).collect();

        let mut groups = vec![vec![vec![0.0; np]; d]; 8];
        for c in 0..d {
            let gu1 = tangential_grads(&u1[c])?;
            let gu0 = tangential_grads(&bg.u0[c])?;
            let gue0 = trace_grads(&e.u[c], ny, d)?;
            let gdyue0 = trace_grads(&e.dy_u[c], ny, d)?;
            let gue1 = trace_grads(&l.u[c], ny, d)?;
            let dzu1 = u1[c].normal_derivative(1)?.to_physical();
            let dzu0 = bg.u0[c].normal_derivative(1)?.to_physical();
            for q in 0..np {
                let mut s = [0.0; 8];
                for a in 0..d {
                    s[0] += (u0p[a][q] + ue0[a][q]) * gu1[a][q];
                    s[2] += u1p[a][q] * (gu0[a][q] + gue0[a][q]);
                    s[3] += (ue1[a][q] + z[q] * dyue0[a][q]) * gu0[a][q];
                    s[5] += z[q] * u0p[a][q] * gdyue0[a][q];
                    s[6] += u0p[a][q] * gue1[a][q];
                }
                s[1] = v2[q] * dzu1[q];
                s[4] = v5[q] * dzu0[q];
                s[7] = vp1p[q] * dyue0[c][q];
                for k in 0..8 {
                    groups[k][c][q] = s[k];
                }
            }
        }
        Ok(groups)
    }

    /// Explicit part of the first-order layer equation.
    pub fn linear_rhs(&self, bg: &LayerBackground, u1: &[SpectralField]) -> Result<LayerVector> {
        let groups = self.forcing_groups(bg, u1)?;
        let d = self.grid.d();
        let np = self.grid.nmodes() * self.grid.ny();
        (0..d)
            .map(|c| {
                let acc: Vec<f64> = (0..np).map(|q| -groups.iter().map(|gr| gr[c][q]).sum::<f64>()).collect();
                SpectralField::from_physical_dealiased(&self.grid, &acc, &format!("N_p1{c}"))
            })
            .collect()
    }

    /// The eight terms of the second-order layer pressure source, physical space:
    ///
    /// 1. `dzz vp1`
    /// 2. `-dt vp1`
    /// 3. `-ue0(0) . grad_x vp1`
    /// 4. `-u0 . (grad_x ve1(0) + grad_x vp1)`
    /// 5. `-vp1 dy ve0(0)`
    /// 6. `-(ve1(0) + vp1) dz vp1`
    /// 7. `-z (grad_x dy ve0(0)) . u0`
    /// 8. `-z dy ve0(0) dz vp1`
    pub fn pressure_source_terms(
        &self,
        u0: &[SpectralField],
        vp1: &SpectralField,
        dt_vp1: &SpectralField,
        e: &EulerTraces,
        ve1_wall: &Trace,
    ) -> Result<Vec<Vec<f64>>> {
        let g = &self.grid;
        let (d, ny) = (g.d(), g.ny());
        let z = heights(g);
        let np = z.len();
        let dzz = vp1.normal_derivative(2)?.to_physical();
        let dz = vp1.normal_derivative(1)?.to_physical();
        let v = vp1.to_physical();
        let vt = dt_vp1.to_physical();
        let gv = tangential_grads(vp1)?;
        let gve1 = trace_grads(ve1_wall, ny, d)?;
        let ve1 = spread(ve1_wall, ny);
        let dyve0 = spread(&e.dy_v, ny);
        let gdyve0 = trace_grads(&e.dy_v, ny, d)?;
        let ue0: Vec<Vec<f64>> = e.u.iter().map(|t| spread(t, ny)).collect();
        let u0p = phys(u0);
        let mut terms = vec![vec![0.0; np]; 8];
        for q in 0..np {
            terms[0][q] = dzz[q];
            terms[1][q] = -vt[q];
            let (mut t3, mut t4, mut t7) = (0.0, 0.0, 0.0);
            for a in 0..d {
                t3 += ue0[a][q] * gv[a][q];
                t4 += u0p[a][q] * (gve1[a][q] + gv[a][q]);
                t7 += gdyve0[a][q] * u0p[a][q];
            }
            terms[2][q] = -t3;
            terms[3][q] = -t4;
            terms[4][q] = -v[q] * dyve0[q];
            terms[5][q] = -(ve1[q] + v[q]) * dz[q];
            terms[6][q] = -z[q] * t7;
            terms[7][q] = -z[q] * dyve0[q] * dz[q];
        }
        Ok(terms)
    }

    /// `p_p2 = -∫_z^∞ P2` with the selected terms of the source (all when `mask` is `None`).
    pub fn compute_pp2(
        &self,
        u0: &[SpectralField],
        vp1: &SpectralField,
        dt_vp1: &SpectralField,
        e: &EulerTraces,
        ve1_wall: &Trace,
        mask: Option<[bool; 8]>,
    ) -> Result<SpectralField> {
        let terms = self.pressure_source_terms(u0, vp1, dt_vp1, e, ve1_wall)?;
        let mask = mask.unwrap_or([true; 8]);
        let np = terms[0].len();
        let src: Vec<f64> =
            (0..np).map(|q| terms.iter().zip(mask).filter(|(_, m)| *m).map(|(t, _)| t[q]).sum()).collect();
        let src = SpectralField::from_physical(&self.grid, &src, "P2")?;
        Ok((-src.vertical_tail_integral()?).with_name("p_p2"))
    }
}

/// Integrate the leading-order layer along the outer trajectory.
pub fn solve_prandtl(solver: &PrandtlSolver, euler: &dyn OuterSchedule) -> Result<PrandtlTrajectory> {
    if (solver.dt - euler.dt()).abs() > 1e-15 * euler.dt() {
        return Err(Error::WindowMismatch(format!("layer dt {} vs outer dt {}", solver.dt, euler.dt())));
    }
    let nsteps = euler.nsteps();
    let mut u = solver.zeros();
    let mut states = vec![u.clone()];
    let mut stages = Vec::with_capacity(nsteps);
    let mut max_dz = vec![0.0];
    let mut gaussian = vec![0.0];
    for n in 0..nsteps {
        let (next, st) = solver.step_stages(&u, euler, n)?;
        let mut tr = Vec::with_capacity(STAGES);
        for (i, (cur, r, vp1)) in st.iter().enumerate() {
            tr.push(PrandtlTraces {
                t: euler.traces(n, i).t,
                vp1_wall: vp1.wall(),
                dt_vp1_wall: solver.dt_vp1(cur, r)?.wall(),
            });
        }
        stages.push(tr);
        let t = euler.traces(n + 1, 0).t;
        let (mz, ga) = solver.monitors(&next, t)?;
        max_dz.push(mz);
        gaussian.push(ga);
        states.push(next.clone());
        u = next;
    }
    let (r, vp1) = solver.rhs(&u, euler.traces(nsteps, 0))?;
    let last = PrandtlTraces { t: euler.traces(nsteps, 0).t, vp1_wall: vp1.wall(), dt_vp1_wall: solver.dt_vp1(&u, &r)?.wall() };
    Ok(PrandtlTrajectory { dt: euler.dt(), states, stages, last, max_dz, gaussian })
}

/// The same layer in the shifted unknown `u + ue0(0)` with the outer pressure
/// gradient as forcing. Returns the states shifted back for comparison.
pub fn solve_prandtl_shifted(solver: &PrandtlSolver, euler: &dyn OuterSchedule) -> Result<Vec<LayerVector>> {
    let g = solver.grid().clone();
    let (d, ny) = (g.d(), g.ny());
    let nsteps = euler.nsteps();
    let shift = |u: &[SpectralField], e: &EulerTraces, s: f64| -> LayerVector {
        u.iter().zip(&e.u).map(|(c, t)| {
            let mut out = c.clone();
            out.axpy(s, &SpectralField::from_trace(&t.regrid(&g).expect("same tangential grid"), c.name()));
            out
        }).collect()
    };
    let mut ut = shift(&solver.zeros(), euler.traces(0, 0), 1.0);
    let mut out = vec![solver.zeros()];
    let zero = Trace::zeros(&g);
    for n in 0..nsteps {
        ut = solver.imex_step(
            &ut,
            |i, cur| {
                let e = euler.traces(n, i);
                let div = divergence(cur)?;
                let head = {
                    let tail = div.tail_integral_unchecked();
                    let total = SpectralField::from_trace(&div.column_integral(), "total");
                    total - tail
                };
                let vt = head.to_physical();
                let up = phys(cur);
                let mut r = Vec::with_capacity(d);
                for c in 0..d {
                    let gu = tangential_grads(&cur[c])?;
                    let dz = cur[c].normal_derivative(1)?.to_physical();
                    let gp = spread(&e.grad_p[c], ny);
                    let acc: Vec<f64> = (0..vt.len())
                        .map(|q| {
                            let mut s = -vt[q] * dz[q] + gp[q];
                            for a in 0..d {
                                s += up[a][q] * gu[a][q];
                            }
                            -s
                        })
                        .collect();
                    r.push(SpectralField::from_physical_dealiased(&g, &acc, "N_t")?);
                }
                Ok(r)
            },
            |i| {
                let e = at(n, i + 1, |a, b| euler.traces(a, b));
                (vec![zero.clone(); d], e.u.clone())
            },
        )?;
        out.push(shift(&ut, euler.traces(n + 1, 0), -1.0));
    }
    Ok(out)
}

/// Integrate the first-order layer from zero data.
pub fn solve_linearized_prandtl(
    solver: &PrandtlSolver,
    euler: &dyn OuterSchedule,
    layer0: &PrandtlTrajectory,
    lin: &LinEulerTrajectory,
) -> Result<LinPrandtlTrajectory> {
    let nsteps = euler.nsteps();
    if layer0.nsteps() != nsteps || lin.nsteps() != nsteps {
        return Err(Error::WindowMismatch(format!(
            "outer {nsteps} steps, layer {} steps, first-order outer {} steps",
            layer0.nsteps(),
            lin.nsteps()
        )));
    }
    let mut u1 = solver.zeros();
    let mut states = vec![u1.clone()];
    for n in 0..nsteps {
        let (_, bg) = solver.step_stages(&layer0.states[n], euler, n)?;
        u1 = solver.imex_step(
            &u1,
            |i, cur| {
                let (u0, _, vp1) = &bg[i];
                let b = LayerBackground { u0, vp1, e: euler.traces(n, i), l: lin.traces(n, i) };
                solver.linear_rhs(&b, cur)
            },
            |i| {
                let l = at(n, i + 1, |a, b| lin.traces(a, b));
                (l.u.iter().map(|t| t.scaled(-1.0)).collect(), vec![Trace::zeros(solver.grid()); solver.grid().d()])
            },
        )?;
        states.push(u1.clone());
    }
    Ok(LinPrandtlTrajectory { dt: euler.dt(), states })
}

/// Derived layer fields at one stored step.
#[derive(Clone, Debug)]
pub struct LayerSnapshot {
    pub u0: LayerVector,
    pub vp1: SpectralField,
    pub u1: LayerVector,
    pub vp2: SpectralField,
    pub pp2: SpectralField,
    pub f: Trace,
}

impl PrandtlSolver {
    pub fn snapshot(
        &self,
        euler: &dyn OuterSchedule,
        layer0: &PrandtlTrajectory,
        lin: &LinPrandtlTrajectory,
        n: usize,
    ) -> Result<LayerSnapshot> {
        let e = euler.traces(n, 0);
        let u0 = layer0.states[n].clone();
        let (r, vp1) = self.rhs(&u0, e)?;
        let dt_vp1 = self.dt_vp1(&u0, &r)?;
        let ve1 = vp1.wall().scaled(-1.0);
        let pp2 = self.compute_pp2(&u0, &vp1, &dt_vp1, e, &ve1, None)?;
        let u1 = lin.states[n].clone();
        let vp2 = compute_vp2(&u1)?;
        let f = compute_f(&u1)?;
        Ok(LayerSnapshot { u0, vp1, u1, vp2, pp2, f })
    }
}

/// `sup |u + ue(0)|` style wall compatibility defect `max |u(0) + ue(0)|`.
pub fn wall_defect(u: &[SpectralField], ue: &[Trace]) -> f64 {
    u.iter().zip(ue).map(|(c, t)| {
        let w = c.wall();
        w.coeffs().iter().zip(t.coeffs()).map(|(a, b)| (a + b).norm()).fold(0.0, f64::max)
    }).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, Stretching};
    use std::f64::consts::PI;

    fn layer(d: usize, nx: usize, nz: usize) -> Arc<Grid> {
        GridSpec { d, nx, box_len: 2.0 * PI, ny: nz, ly: 12.0, stretching: Stretching::Tanh { beta: 2.0 } }
            .build()
            .unwrap()
    }

    // exponential profiles need a taller column to decay
    fn tall(nx: usize) -> Arc<Grid> {
        GridSpec { d: 1, nx, box_len: 2.0 * PI, ny: 256, ly: 32.0, stretching: Stretching::Tanh { beta: 2.0 } }
            .build()
            .unwrap()
    }

    // erfc by series below 3 and a continued fraction above
    fn erfc(x: f64) -> f64 {
        if x < 3.0 {
            let (mut term, mut sum) = (x, x);
            for n in 1..200 {
                term *= -x * x / n as f64;
                sum += term / (2 * n + 1) as f64;
                if term.abs() < 1e-18 {
                    break;
                }
            }
            1.0 - 2.0 / PI.sqrt() * sum
        } else {
            let mut f = x;
            for n in (1..80).rev() {
                f = x + (n as f64 / 2.0) / f;
            }
            (-x * x).exp() / PI.sqrt() / f
        }
    }

    // repeated integrals i^n erfc
    fn ierfc(n: usize, x: f64) -> f64 {
        let mut a = 2.0 / PI.sqrt() * (-x * x).exp();
        let mut b = erfc(x);
        for k in 1..=n {
            let c = (a - 2.0 * x * b) / (2.0 * k as f64);
            a = b;
            b = c;
        }
        b
    }

    fn traces(g: &Arc<Grid>, t: f64, u: impl Fn([f64; 2]) -> f64, dt_u: impl Fn([f64; 2]) -> f64) -> EulerTraces {
        // d = 1 wall data from a tangential velocity and the matching pressure gradient
        let ut = Trace::from_fn(g, &u);
        let dx = ut.tangential_derivative(1).unwrap();
        let up = ut.to_physical();
        let adv: Vec<f64> = up.iter().zip(dx.to_physical()).map(|(a, b)| a * b).collect();
        let dtu = Trace::from_fn(g, &dt_u);
        let adv = Trace::from_physical(g, &adv).unwrap();
        let gp = (&dtu + &adv).scaled(-1.0);
        EulerTraces {
            t,
            u: vec![ut],
            dt_u: vec![dtu],
            dy_u: vec![Trace::zeros(g)],
            dy_v: dx.scaled(-1.0),
            dyy_v: Trace::zeros(g),
            grad_p: vec![gp],
        }
    }

    #[test]
    fn zero_wall_data_keeps_zero_layer() {
        let g = layer(1, 8, 32);
        let sched = TraceSchedule::sample(0.01, 5, |t| traces(&g, t, |_| 0.0, |_| 0.0));
        let s = PrandtlSolver::new(&g, 0.01, 1.0, 1.0).unwrap();
        let tr = solve_prandtl(&s, &sched).unwrap();
        assert!(tr.states.iter().flatten().all(|c| c.max_coeff() == 0.0));
    }

    #[test]
    fn uniform_wall_velocity_matches_heat_solution() {
        // U(t) = t^2: u = -32 t^2 i^4erfc(z / 2 sqrt t)
        let g = layer(1, 8, 160);
        let (dt, n) = (0.005, 100);
        let sched = TraceSchedule::sample(dt, n, |t| traces(&g, t, |_| t * t, |_| 2.0 * t));
        let s = PrandtlSolver::new(&g, dt, 1.0, 1.0).unwrap();
        let tr = solve_prandtl(&s, &sched).unwrap();
        let t: f64 = dt * n as f64;
        let exact = SpectralField::from_fn(&g, "u", |_, z| -32.0 * t * t * ierfc(4, z / (2.0 * t.sqrt())));
        let err = (&tr.states[n][0] - &exact).l2_norm() / exact.l2_norm();
        assert!(err < 1e-5, "rel err {err:.3e}");
    }

    #[test]
    fn normal_velocity_of_exponential_profile() {
        let g = tall(8);
        let u = SpectralField::from_fn(&g, "u", |x, z| x[0].sin() * (-z).exp());
        let v = recover_vp1(&[u.clone()]).unwrap();
        let exact = SpectralField::from_fn(&g, "v", |x, z| x[0].cos() * (-z).exp());
        assert!((&v - &exact).linf_norm() < 1e-8);
        let res = &v.normal_derivative(1).unwrap() + &u.tangential_derivative(1).unwrap();
        assert!(res.linf_norm() < 1e-8, "{}", res.linf_norm());
    }

    #[test]
    fn second_normal_velocity_of_gaussian_profile() {
        let g = layer(2, 8, 160);
        let u1 = vec![
            SpectralField::from_fn(&g, "a", |x, z| x[0].sin() * (-z * z).exp()),
            SpectralField::from_fn(&g, "b", |x, z| (2.0 * x[1]).cos() * (-z * z).exp()),
        ];
        let v = compute_vp2(&u1).unwrap();
        let exact =
            SpectralField::from_fn(&g, "v", |x, z| (x[0].cos() - 2.0 * (2.0 * x[1]).sin()) * PI.sqrt() / 2.0 * erfc(z));
        assert!((&v - &exact).linf_norm() < 1e-6 * exact.linf_norm());
        let f = compute_f(&u1).unwrap();
        let w = v.wall();
        assert!((&f - &w).max_coeff() < 1e-8);
        assert!(f.mean().abs() < 1e-14);
    }

    #[test]
    fn shifted_form_agrees() {
        let g = layer(1, 16, 128);
        let (dt, n) = (0.004, 100);
        let sched = TraceSchedule::sample(dt, n, |t| {
            traces(&g, t, |x| t * x[0].sin() + 0.5 * t * t * (2.0 * x[0]).cos(), |x| x[0].sin() + t * (2.0 * x[0]).cos())
        });
        let s = PrandtlSolver::new(&g, dt, 1.0, 1.0).unwrap();
        let a = solve_prandtl(&s, &sched).unwrap();
        let b = solve_prandtl_shifted(&s, &sched).unwrap();
        let scale = a.states[n][0].linf_norm();
        assert!(scale > 0.1);
        for k in [n / 2, n] {
            let e = (&a.states[k][0] - &b[k][0]).linf_norm();
            assert!(e < 1e-6 * scale, "step {k}: {e:.3e}");
        }
        let w = wall_defect(&a.states[n], &sched.last.u);
        assert!(w < 1e-8, "{w}");
    }

    fn manufactured(g: &Arc<Grid>) -> (LayerVector, SpectralField, EulerTraces, LinEulerTraces, LayerVector) {
        let u0 = vec![SpectralField::from_fn(g, "u0", |x, z| x[0].sin() * (-z).exp())];
        let vp1 = recover_vp1(&u0).unwrap();
        let tr = |f: fn(f64) -> f64| Trace::from_fn(g, move |x| f(x[0]));
        let e = EulerTraces {
            t: 0.0,
            u: vec![tr(|x| x.cos())],
            dt_u: vec![Trace::zeros(g)],
            dy_u: vec![tr(|x| 0.5 * (2.0 * x).sin())],
            dy_v: tr(|x| x.sin()),
            dyy_v: tr(|x| 0.3 * x.cos()),
            grad_p: vec![Trace::zeros(g)],
        };
        let l = LinEulerTraces { t: 0.0, u: vec![tr(|x| 0.2 * x.sin())], dy_v: tr(|x| -0.2 * x.cos()), g: tr(|x| -x.cos()) };
        let u1 = vec![SpectralField::from_fn(g, "u1", |x, z| x[0].cos() * z * (-z * z).exp())];
        (u0, vp1, e, l, u1)
    }

    #[test]
    fn forcing_groups_match_hand_derivation() {
        let g = tall(16);
        let s = PrandtlSolver::new(&g, 0.01, 1.0, 1.0).unwrap();
        let (u0, vp1, e, l, u1) = manufactured(&g);
        let groups = s.forcing_groups(&LayerBackground { u0: &u0, vp1: &vp1, e: &e, l: &l }, &u1).unwrap();
        // u0 = sin x e^-z, vp1 = cos x e^-z, u1 = cos x z e^-z^2, vp2 = -sin x e^-z^2 / 2
        let refs: [&dyn Fn(f64, f64) -> f64; 8] = [
            &|x, z| (x.sin() * (-z).exp() + x.cos()) * (-x.sin() * z * (-z * z).exp()),
            &|x, z| (x.cos() * (-z).exp() - x.cos() + z * x.sin()) * x.cos() * (1.0 - 2.0 * z * z) * (-z * z).exp(),
            &|x, z| x.cos() * z * (-z * z).exp() * (x.cos() * (-z).exp() - x.sin()),
            &|x, z| (0.2 * x.sin() + z * 0.5 * (2.0 * x).sin()) * x.cos() * (-z).exp(),
            &|x, z| {
                let vp2 = -0.5 * x.sin() * (-z * z).exp();
                (vp2 + 0.5 * x.sin() - 0.2 * z * x.cos() + 0.15 * z * z * x.cos()) * (-x.sin() * (-z).exp())
            },
            &|x, z| z * x.sin() * (-z).exp() * (2.0 * x).cos(),
            &|x, z| x.sin() * (-z).exp() * 0.2 * x.cos(),
            &|x, z| x.cos() * (-z).exp() * 0.5 * (2.0 * x).sin(),
        ];
        for (k, r) in refs.iter().enumerate() {
            let exact = SpectralField::from_fn(&g, "r", |x, z| r(x[0], z)).to_physical();
            let err = exact.iter().zip(&groups[k][0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let scale = exact.iter().map(|a| a.abs()).fold(0.0, f64::max);
            assert!(err < 1e-6 * scale, "group {}: {err:.3e} / {scale:.3e}", k + 1);
        }
    }

    #[test]
    fn every_pressure_term_matters() {
        let g = tall(16);
        let s = PrandtlSolver::new(&g, 0.01, 1.0, 1.0).unwrap();
        let (u0, vp1, e, l, _) = manufactured(&g);
        let dt_vp1 = SpectralField::from_fn(&g, "dtv", |x, z| 0.7 * (2.0 * x[0]).cos() * z * (-z).exp());
        let full = s.compute_pp2(&u0, &vp1, &dt_vp1, &e, &l.g, None).unwrap();
        for k in 0..8 {
            let mut mask = [true; 8];
            mask[k] = false;
            let part = s.compute_pp2(&u0, &vp1, &dt_vp1, &e, &l.g, Some(mask)).unwrap();
            assert!((&full - &part).linf_norm() > 1e-6 * full.linf_norm(), "term {}", k + 1);
        }
        let t = s.pressure_source_terms(&u0, &vp1, &dt_vp1, &e, &l.g).unwrap();
        let src: Vec<f64> = (0..t[0].len()).map(|q| t.iter().map(|v| v[q]).sum()).collect();
        let dz = full.normal_derivative(1).unwrap().to_physical();
        let err = dz.iter().zip(&src).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = src.iter().map(|a| a.abs()).fold(0.0, f64::max);
        assert!(err < 1e-8 * scale.max(1.0), "{err:.3e}");
    }

    #[test]
    fn first_order_layer_zero_without_data() {
        let g = layer(1, 8, 48);
        let sched = TraceSchedule::sample(0.01, 4, |t| traces(&g, t, |_| 0.0, |_| 0.0));
        let s = PrandtlSolver::new(&g, 0.01, 1.0, 1.0).unwrap();
        let p0 = solve_prandtl(&s, &sched).unwrap();
        let z = LinEulerTraces { t: 0.0, u: vec![Trace::zeros(&g)], dy_v: Trace::zeros(&g), g: Trace::zeros(&g) };
        let lin = LinEulerTrajectory {
            dt: 0.01,
            states: vec![crate::elliptic::Vorticity::zeros(&g); 5],
            stages: vec![vec![z.clone(); STAGES]; 4],
            last: z,
        };
        let p1 = solve_linearized_prandtl(&s, &sched, &p0, &lin).unwrap();
        assert!(p1.states.iter().flatten().all(|c| c.max_coeff() == 0.0));
    }
}
