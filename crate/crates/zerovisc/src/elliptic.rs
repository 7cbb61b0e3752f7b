//! Half-space potential theory on the truncated grid.
//!
//! Each tangential mode gives a two-point problem in `y`. The top of the box
//! carries the transparent condition `u' + |k| u = 0`, which is exact for
//! data supported below it, so the truncation behaves like the half-space.

use std::collections::HashMap;
use std::sync::Arc;

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::field::{SpectralField, Trace, VectorField, C};
use crate::grid::{gauss_legendre_8, fornberg, Grid, QUAD_POINTS, STENCIL};

/// Boundary row of a two-point problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bc {
    /// `u = g`
    Value,
    /// `u' = g`
    Slope,
    /// `a u + b u' = g`
    Robin(f64, f64),
    /// `u' + |k| u = g`
    Transparent,
}

/// Per-mode factorisations of `a u + c |k|^2 u - b u''` with boundary rows.
///
/// Modes sharing `|k|` share one factorisation.
#[derive(Debug)]
pub struct ModalOperator {
    grid: Arc<Grid>,
    slot: Vec<usize>,
    mats: Vec<BandMatrix>,
}

impl ModalOperator {
    pub fn new(
        grid: &Arc<Grid>,
        a: f64,
        b: f64,
        c: f64,
        bottom: impl Fn(f64) -> Bc,
        top: impl Fn(f64) -> Bc,
    ) -> Result<ModalOperator> {
        let n = grid.ny();
        let bw = STENCIL - 1;
        let mut index: HashMap<u64, usize> = HashMap::new();
        let mut slot = Vec::with_capacity(grid.nmodes());
        let mut mats = Vec::new();
        for m in 0..grid.nmodes() {
            let k = grid.kabs(m);
            if let Some(&s) = index.get(&k.to_bits()) {
                slot.push(s);
                continue;
            }
            let mut mat = BandMatrix::zeros(n, bw, bw);
            let (d1, d2) = (grid.d1(), grid.d2());
            for i in 1..n - 1 {
                let s = d2.start[i];
                for q in 0..STENCIL {
                    mat.add(i, s + q, -b * d2.weights[i][q]);
                }
                mat.add(i, i, a + c * k * k);
            }
            let mut boundary = |row: usize, bc: Bc| {
                let (cu, cd) = match bc {
                    Bc::Value => (1.0, 0.0),
                    Bc::Slope => (0.0, 1.0),
                    Bc::Robin(p, q) => (p, q),
                    Bc::Transparent => (k, 1.0),
                };
                let s = d1.start[row];
                for q in 0..STENCIL {
                    mat.add(row, s + q, cd * d1.weights[row][q]);
                }
                mat.add(row, row, cu);
            };
            boundary(0, bottom(k));
            boundary(n - 1, top(k));
            if !mat.factor() {
                return Err(Error::Compatibility(format!("singular two-point problem at |k| = {k}")));
            }
            index.insert(k.to_bits(), mats.len());
            slot.push(mats.len());
            mats.push(mat);
        }
        Ok(ModalOperator { grid: grid.clone(), slot, mats })
    }

    /// Solve mode `m` in place; `col` holds interior right-hand sides, its
    /// first and last entries are overwritten by the boundary data.
    pub fn solve(&self, m: usize, col: &mut [C], bottom: C, top: C) {
        let n = col.len();
        col[0] = bottom;
        col[n - 1] = top;
        self.mats[self.slot[m]].solve(col);
    }

    /// Solve every mode of `rhs` with per-mode boundary data.
    pub fn solve_field(&self, rhs: &SpectralField, bottom: &[C], top: &[C], name: &str) -> SpectralField {
        let mut out = rhs.clone().with_name(name);
        for m in 0..self.grid.nmodes() {
            self.solve(m, out.column_mut(m), bottom[m], top[m]);
        }
        out
    }
}

/// Prebuilt Dirichlet and Neumann Laplacian inverses for one grid.
#[derive(Debug)]
pub struct HalfSpace {
    grid: Arc<Grid>,
    dirichlet: ModalOperator,
    neumann: ModalOperator,
}

/// Vorticity: the scalar `dx v - dy u` for d = 1, `curl U` for d = 2.
#[derive(Clone, Debug)]
pub enum Vorticity {
    Planar(SpectralField),
    Spatial([SpectralField; 3]),
}

/// Relative tolerance for the zero-mean and compatibility checks.
const COMPAT_TOL: f64 = 1e-8;
/// Scaled divergence tolerance for vorticity fed to Biot-Savart.
pub const DIV_TOL: f64 = 1e-8;

impl HalfSpace {
    pub fn new(grid: &Arc<Grid>) -> Result<HalfSpace> {
        let dirichlet = ModalOperator::new(grid, 0.0, 1.0, 1.0, |_| Bc::Value, |_| Bc::Transparent)?;
        // the k = 0 Neumann problem is pinned at the top
        let neumann = ModalOperator::new(
            grid,
            0.0,
            1.0,
            1.0,
            |_| Bc::Slope,
            |k| if k == 0.0 { Bc::Value } else { Bc::Transparent },
        )?;
        Ok(HalfSpace { grid: grid.clone(), dirichlet, neumann })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// `-Δu = rhs`, `u(0) = trace`, decaying at the top.
    pub fn solve_dirichlet(&self, rhs: &SpectralField, trace: &Trace) -> Result<SpectralField> {
        self.check(rhs)?;
        let zero = vec![C::new(0.0, 0.0); self.grid.nmodes()];
        Ok(self.dirichlet.solve_field(rhs, trace.coeffs(), &zero, "dirichlet"))
    }

    /// `-Δu = rhs`, `-dy u(0) = flux`; the mean mode is pinned to zero at the top.
    pub fn solve_neumann(&self, rhs: &SpectralField, flux: &Trace) -> Result<SpectralField> {
        self.check(rhs)?;
        let mean_rhs = self.grid.integrate(rhs.column(0));
        let scale = self.grid.integrate(&rhs.column(0).iter().map(|c| c.norm()).collect::<Vec<_>>())
            + flux.coeffs()[0].norm();
        let defect = (mean_rhs + flux.coeffs()[0]).norm();
        if defect > COMPAT_TOL * scale.max(f64::MIN_POSITIVE) && defect > 1e-14 {
            return Err(Error::Compatibility(format!(
                "mean Neumann data: |int rhs + flux| = {defect:.3e} (scale {scale:.3e})"
            )));
        }
        let bottom: Vec<C> = flux.coeffs().iter().map(|g| -g).collect();
        let zero = vec![C::new(0.0, 0.0); self.grid.nmodes()];
        Ok(self.neumann.solve_field(rhs, &bottom, &zero, "neumann"))
    }

    fn check(&self, f: &SpectralField) -> Result<()> {
        if **f.grid() != *self.grid {
            return Err(Error::ShapeMismatch(format!("`{}` is on another grid", f.name())));
        }
        Ok(())
    }

    /// Velocity from vorticity: `u = curl Ψ` with `Ψ_h` Dirichlet and `Ψ_3` Neumann.
    pub fn biot_savart(&self, w: &Vorticity) -> Result<VectorField> {
        let zero = Trace::zeros(&self.grid);
        match w {
            Vorticity::Planar(om) => {
                if self.grid.d() != 1 {
                    return Err(Error::ShapeMismatch("planar vorticity on a d = 2 grid".into()));
                }
                self.check(om)?;
                let psi = self.solve_dirichlet(om, &zero)?;
                let u = psi.normal_derivative(1)?.with_name("u");
                let v = (-psi.tangential_derivative(1)?).with_name("v");
                Ok(VectorField { h: vec![u], v })
            }
            Vorticity::Spatial(c) => {
                if self.grid.d() != 2 {
                    return Err(Error::ShapeMismatch("spatial vorticity on a d = 1 grid".into()));
                }
                let div = w.scaled_divergence()?;
                if div > DIV_TOL {
                    return Err(Error::DivergenceViolation(div));
                }
                let p1 = self.solve_dirichlet(&c[0], &zero)?;
                let p2 = self.solve_dirichlet(&c[1], &zero)?;
                let p3 = self.solve_neumann(&c[2], &zero)?;
                let u1 = p3.tangential_derivative(2)? - p2.normal_derivative(1)?;
                let u2 = p1.normal_derivative(1)? - p3.tangential_derivative(1)?;
                let v = p2.tangential_derivative(1)? - p1.tangential_derivative(2)?;
                Ok(VectorField { h: vec![u1.with_name("u1"), u2.with_name("u2")], v: v.with_name("v") })
            }
        }
    }

    /// Causal solution of `dy w + |D_x| w = f` with `w(0) = 0` for `k != 0`,
    /// and `w = -int_y^L f` for the mean. Both decay when `f` does.
    pub fn solve_decay_ode(&self, f: &SpectralField) -> Result<SpectralField> {
        self.check(f)?;
        f.check_decay()?;
        let g = &self.grid;
        let n = g.ny();
        let y = g.y();
        // interpolation weights of each interval's quintic at the Gauss nodes
        let mut local: Vec<(usize, [(f64, f64); 8], Vec<Vec<f64>>)> = Vec::with_capacity(n - 1);
        for j in 0..n - 1 {
            let s = g.interval_start(j);
            let nodes = gauss_legendre_8(y[j], y[j + 1]);
            let lag = nodes.iter().map(|(t, _)| fornberg(*t, &y[s..s + QUAD_POINTS], 0).remove(0)).collect();
            local.push((s, nodes, lag));
        }
        let mut out = SpectralField::zeros(g, &format!("decay({})", f.name()));
        for m in 0..g.nmodes() {
            let k = g.kabs(m);
            let col = f.column(m);
            if k == 0.0 {
                let mut tail = vec![C::new(0.0, 0.0); n];
                g.tail_integral(col, &mut tail);
                for (o, t) in out.column_mut(m).iter_mut().zip(tail) {
                    *o = -t;
                }
                continue;
            }
            let w = out.column_mut(m);
            w[0] = C::new(0.0, 0.0);
            for j in 0..n - 1 {
                let (s, nodes, lag) = &local[j];
                let mut acc = w[j] * (-k * (y[j + 1] - y[j])).exp();
                for (q, (t, gw)) in nodes.iter().enumerate() {
                    let mut p = C::new(0.0, 0.0);
                    for r in 0..QUAD_POINTS {
                        p += col[s + r] * lag[q][r];
                    }
                    acc += p * (gw * (-k * (y[j + 1] - t)).exp());
                }
                w[j + 1] = acc;
            }
        }
        Ok(out)
    }
}

/// `|D_x|` on wall traces.
pub fn dn_map(trace: &Trace) -> Trace {
    let g = trace.grid().clone();
    trace.symbol(|m| C::new(g.kabs(m), 0.0))
}

/// Inverse of [`dn_map`] on mean-zero traces.
pub fn nd_map(trace: &Trace) -> Result<Trace> {
    let mean = trace.coeffs()[0].norm();
    if mean > COMPAT_TOL * trace.max_coeff() && mean > 1e-14 {
        return Err(Error::Compatibility(format!("trace has mean {mean:.3e}; the ND map needs zero mean")));
    }
    let g = trace.grid().clone();
    Ok(trace.symbol(|m| if m == 0 { C::new(0.0, 0.0) } else { C::new(1.0 / g.kabs(m), 0.0) }))
}

/// Free-standing forms for one-off solves.
pub fn solve_dirichlet(rhs: &SpectralField, trace: &Trace) -> Result<SpectralField> {
    HalfSpace::new(rhs.grid())?.solve_dirichlet(rhs, trace)
}

pub fn solve_neumann(rhs: &SpectralField, flux: &Trace) -> Result<SpectralField> {
    HalfSpace::new(rhs.grid())?.solve_neumann(rhs, flux)
}

pub fn biot_savart(w: &Vorticity) -> Result<VectorField> {
    HalfSpace::new(w.grid())?.biot_savart(w)
}

pub fn solve_decay_ode(f: &SpectralField) -> Result<SpectralField> {
    HalfSpace::new(f.grid())?.solve_decay_ode(f)
}

/// `-Δf` with spectral tangential and stencil normal derivatives.
pub fn neg_laplacian(f: &SpectralField) -> Result<SpectralField> {
    let g = f.grid().clone();
    let dyy = f.normal_derivative(2)?;
    let kk = f.symbol("kk", |m| C::new(g.kabs(m).powi(2), 0.0));
    Ok((kk - dyy).with_name(&format!("-lap({})", f.name())))
}

/// Harmonic extension `E g` with `dy(E g)(0) = -|D_x| g`, evaluated in closed form.
pub fn harmonic_extension(g: &Trace, grid: &Arc<Grid>) -> SpectralField {
    let mut out = SpectralField::zeros(grid, "harmonic");
    for m in 0..grid.nmodes() {
        let k = grid.kabs(m);
        let c = g.coeffs()[m];
        for (o, &y) in out.column_mut(m).iter_mut().zip(grid.y()) {
            *o = c * (-k * y).exp();
        }
    }
    out
}

impl Vorticity {
    pub fn grid(&self) -> &Arc<Grid> {
        match self {
            Vorticity::Planar(w) => w.grid(),
            Vorticity::Spatial(c) => c[0].grid(),
        }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Vorticity {
        if grid.d() == 1 {
            Vorticity::Planar(SpectralField::zeros(grid, "w"))
        } else {
            Vorticity::Spatial(std::array::from_fn(|i| SpectralField::zeros(grid, &format!("w{}", i + 1))))
        }
    }

    /// Curl of a velocity field.
    pub fn curl(u: &VectorField) -> Result<Vorticity> {
        if u.grid().d() == 1 {
            let w = u.v.tangential_derivative(1)? - u.h[0].normal_derivative(1)?;
            Ok(Vorticity::Planar(w.with_name("w")))
        } else {
            let w1 = u.v.tangential_derivative(2)? - u.h[1].normal_derivative(1)?;
            let w2 = u.h[0].normal_derivative(1)? - u.v.tangential_derivative(1)?;
            let w3 = u.h[1].tangential_derivative(1)? - u.h[0].tangential_derivative(2)?;
            Ok(Vorticity::Spatial([w1.with_name("w1"), w2.with_name("w2"), w3.with_name("w3")]))
        }
    }

    pub fn components(&self) -> &[SpectralField] {
        match self {
            Vorticity::Planar(w) => std::slice::from_ref(w),
            Vorticity::Spatial(c) => c,
        }
    }

    pub fn components_mut(&mut self) -> &mut [SpectralField] {
        match self {
            Vorticity::Planar(w) => std::slice::from_mut(w),
            Vorticity::Spatial(c) => c,
        }
    }

    /// `|div w| / max |gradient entries|`; zero for planar vorticity.
    pub fn scaled_divergence(&self) -> Result<f64> {
        match self {
            Vorticity::Planar(_) => Ok(0.0),
            Vorticity::Spatial(c) => {
                let a = c[0].tangential_derivative(1)?;
                let b = c[1].tangential_derivative(2)?;
                let d = c[2].normal_derivative(1)?;
                let div = (&(&a + &b) + &d).linf_norm();
                let scale = a.linf_norm().max(b.linf_norm()).max(d.linf_norm());
                Ok(if scale > 0.0 { div / scale } else { div })
            }
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.components().iter().map(|c| c.l2_norm_sq()).sum::<f64>().sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.components().iter().map(|c| c.linf_norm()).fold(0.0, f64::max)
    }

    pub fn axpy(&mut self, s: f64, other: &Vorticity) {
        for (a, b) in self.components_mut().iter_mut().zip(other.components()) {
            a.axpy(s, b);
        }
    }

    pub fn scaled(&self, s: f64) -> Vorticity {
        match self {
            Vorticity::Planar(w) => Vorticity::Planar(w * s),
            Vorticity::Spatial(c) => Vorticity::Spatial(std::array::from_fn(|i| &c[i] * s)),
        }
    }

    pub fn sub(&self, other: &Vorticity) -> Vorticity {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, Stretching};
    use std::f64::consts::PI;

    fn grid(d: usize, nx: usize, ny: usize, ly: f64) -> Arc<Grid> {
        GridSpec { d, nx, box_len: 2.0 * PI, ny, ly, stretching: Stretching::Tanh { beta: 1.5 } }
            .build()
            .unwrap()
    }

    #[test]
    fn harmonic_extension_of_single_mode() {
        let g = grid(1, 16, 256, 8.0);
        let tr = Trace::from_fn(&g, |x| (2.0 * x[0]).cos());
        let u = solve_dirichlet(&SpectralField::zeros(&g, "0"), &tr).unwrap();
        let ex = SpectralField::from_fn(&g, "ex", |x, y| (2.0 * x[0]).cos() * (-2.0 * y).exp());
        assert!((&u - &ex).linf_norm() < 1e-8);
    }

    #[test]
    fn neumann_single_mode() {
        let g = grid(1, 16, 256, 8.0);
        let tr = Trace::from_fn(&g, |x| (3.0 * x[0]).sin());
        let u = solve_neumann(&SpectralField::zeros(&g, "0"), &tr).unwrap();
        let ex = SpectralField::from_fn(&g, "ex", |x, y| (3.0 * x[0]).sin() * (-3.0 * y).exp() / 3.0);
        assert!((&u - &ex).linf_norm() < 1e-8);
    }

    #[test]
    fn neumann_rejects_incompatible_mean() {
        let g = grid(1, 8, 64, 8.0);
        let rhs = SpectralField::from_fn(&g, "r", |_, y| (-(y - 3.0).powi(2)).exp());
        assert!(matches!(solve_neumann(&rhs, &Trace::zeros(&g)), Err(Error::Compatibility(_))));
        // flux balancing the source is fine
        let total = g.integrate(rhs.column(0)).re;
        let flux = Trace::from_fn(&g, |_| -total);
        assert!(solve_neumann(&rhs, &flux).is_ok());
    }

    #[test]
    fn nd_map_requires_zero_mean() {
        let g = grid(1, 8, 16, 4.0);
        assert!(nd_map(&Trace::from_fn(&g, |x| 1.0 + x[0].sin())).is_err());
        let t = Trace::from_fn(&g, |x| (3.0 * x[0]).cos());
        let back = nd_map(&dn_map(&t)).unwrap();
        assert!((&back - &t).max_coeff() < 1e-14);
    }

    #[test]
    fn decay_ode_residual_is_small() {
        let g = grid(1, 8, 400, 30.0);
        let f = SpectralField::from_fn(&g, "f", |x, y| x[0].cos() * (-y).exp() + (-(y - 2.0).powi(2)).exp());
        let w = solve_decay_ode(&f).unwrap();
        // mode k = 1 with f = e^{-y}: w = y e^{-y}
        let c = w.column(1);
        for (j, &y) in g.y().iter().enumerate() {
            assert!((c[j].re - 0.5 * y * (-y).exp()).abs() < 1e-10, "{y}");
        }
        let res = &(&w.normal_derivative(1).unwrap() + &w.abs_derivative()) - &f;
        assert!(res.linf_norm() < 1e-8 * f.linf_norm(), "{}", res.linf_norm());
    }
}
