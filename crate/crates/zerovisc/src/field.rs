//! Spectral fields: Fourier modes in the tangential variables, collocation
//! values in the wall-normal variable.
//!
//! Coefficients are stored mode-major (`data[m * ny + j]`) so each tangential
//! mode is a contiguous wall-normal column, which is what the per-mode solvers
//! want. Physical arrays use the same layout with the tangential point index in
//! place of the mode index. The transform is normalised so that
//! `f(x) = sum_k c_k exp(i k.x)`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;

pub type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);

/// Relative size of the top-row values below which a column counts as decayed.
pub const TAIL_TOLERANCE: f64 = 1e-8;

/// A real scalar field on `T^d x [0, ly]`.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Arc<Grid>,
    data: Vec<C>,
    name: String,
}

/// A real function on the wall `T^d` (one coefficient per tangential mode).
#[derive(Clone, Debug)]
pub struct Trace {
    grid: Arc<Grid>,
    data: Vec<C>,
}

/// Velocity-shaped field: `d` horizontal components plus the vertical one.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub h: Vec<SpectralField>,
    pub v: SpectralField,
}

// ---------------------------------------------------------------------------
// transforms

/// Forward transform of a physical array laid out `[p * ny + j]`.
fn forward(grid: &Grid, phys: &[f64], ncol: usize) -> Vec<C> {
    let nx = grid.nx();
    let np = grid.nmodes();
    let mut out = vec![ZERO; np * ncol];
    let norm = 1.0 / np as f64;
    if grid.d() == 1 {
        let mut buf = vec![ZERO; np * ncol];
        for p in 0..np {
            for j in 0..ncol {
                buf[j * np + p] = C::new(phys[p * ncol + j], 0.0);
            }
        }
        grid.fft().process(&mut buf);
        for j in 0..ncol {
            for m in 0..np {
                out[m * ncol + j] = buf[j * np + m] * norm;
            }
        }
    } else {
        let mut plane = vec![ZERO; np];
        let mut col = vec![ZERO; nx];
        for j in 0..ncol {
            for p in 0..np {
                plane[p] = C::new(phys[p * ncol + j], 0.0);
            }
            // rows: second index contiguous
            grid.fft().process(&mut plane);
            for b in 0..nx {
                for a in 0..nx {
                    col[a] = plane[a * nx + b];
                }
                grid.fft().process(&mut col);
                for a in 0..nx {
                    plane[a * nx + b] = col[a];
                }
            }
            for m in 0..np {
                out[m * ncol + j] = plane[m] * norm;
            }
        }
    }
    out
}

/// Inverse transform to a physical array `[p * ny + j]`.
fn inverse(grid: &Grid, coeffs: &[C], ncol: usize) -> Vec<f64> {
    let nx = grid.nx();
    let np = grid.nmodes();
    let mut out = vec![0.0; np * ncol];
    if grid.d() == 1 {
        let mut buf = vec![ZERO; np * ncol];
        for m in 0..np {
            for j in 0..ncol {
                buf[j * np + m] = coeffs[m * ncol + j];
            }
        }
        grid.ifft().process(&mut buf);
        for j in 0..ncol {
            for p in 0..np {
                out[p * ncol + j] = buf[j * np + p].re;
            }
        }
    } else {
        let mut plane = vec![ZERO; np];
        let mut col = vec![ZERO; nx];
        for j in 0..ncol {
            for m in 0..np {
                plane[m] = coeffs[m * ncol + j];
            }
            grid.ifft().process(&mut plane);
            for b in 0..nx {
                for a in 0..nx {
                    col[a] = plane[a * nx + b];
                }
                grid.ifft().process(&mut col);
                for a in 0..nx {
                    plane[a * nx + b] = col[a];
                }
            }
            for p in 0..np {
                out[p * ncol + j] = plane[p].re;
            }
        }
    }
    out
}

fn check_axis(grid: &Grid, axis: usize) -> Result<()> {
    if axis == 0 || axis > grid.d() {
        return Err(Error::AxisOutOfRange { axis, d: grid.d() });
    }
    Ok(())
}

/// `i k_axis`, with the Nyquist mode mapped to zero so derivatives stay real.
fn ik(grid: &Grid, m: usize, axis: usize) -> C {
    if grid.is_nyquist(m) {
        ZERO
    } else {
        C::new(0.0, grid.k(m)[axis - 1])
    }
}

// ---------------------------------------------------------------------------
// SpectralField

impl SpectralField {
    pub fn zeros(grid: &Arc<Grid>, name: &str) -> SpectralField {
        SpectralField {
            grid: grid.clone(),
            data: vec![ZERO; grid.nmodes() * grid.ny()],
            name: name.to_string(),
        }
    }

    pub fn from_coeffs(grid: &Arc<Grid>, data: Vec<C>, name: &str) -> Result<SpectralField> {
        if data.len() != grid.nmodes() * grid.ny() {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for a {}x{} grid",
                data.len(),
                grid.nmodes(),
                grid.ny()
            )));
        }
        Ok(SpectralField { grid: grid.clone(), data, name: name.to_string() })
    }

    /// From physical values laid out `[p * ny + j]`.
    pub fn from_physical(grid: &Arc<Grid>, phys: &[f64], name: &str) -> Result<SpectralField> {
        if phys.len() != grid.nmodes() * grid.ny() {
            return Err(Error::ShapeMismatch(format!("{} physical values", phys.len())));
        }
        Ok(SpectralField { grid: grid.clone(), data: forward(grid, phys, grid.ny()), name: name.to_string() })
    }

    /// From physical values, truncated with the 2/3 rule (the result of a product).
    pub fn from_physical_dealiased(grid: &Arc<Grid>, phys: &[f64], name: &str) -> Result<SpectralField> {
        let mut f = SpectralField::from_physical(grid, phys, name)?;
        f.dealias();
        Ok(f)
    }

    /// Sample `f(x, y)` at the collocation points.
    pub fn from_fn(grid: &Arc<Grid>, name: &str, f: impl Fn([f64; 2], f64) -> f64) -> SpectralField {
        let ny = grid.ny();
        let mut phys = vec![0.0; grid.nmodes() * ny];
        for p in 0..grid.nmodes() {
            let x = grid.x_of(p);
            for (j, &y) in grid.y().iter().enumerate() {
                phys[p * ny + j] = f(x, y);
            }
        }
        SpectralField { grid: grid.clone(), data: forward(grid, &phys, ny), name: name.to_string() }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }
    pub fn set_name(&mut self, name: &str) {
        self.name = name.to_string();
    }
    pub fn coeffs(&self) -> &[C] {
        &self.data
    }
    pub fn coeffs_mut(&mut self) -> &mut [C] {
        &mut self.data
    }
    pub fn column(&self, m: usize) -> &[C] {
        let ny = self.grid.ny();
        &self.data[m * ny..(m + 1) * ny]
    }
    pub fn column_mut(&mut self, m: usize) -> &mut [C] {
        let ny = self.grid.ny();
        &mut self.data[m * ny..(m + 1) * ny]
    }

    pub fn to_physical(&self) -> Vec<f64> {
        inverse(&self.grid, &self.data, self.grid.ny())
    }

    pub fn same_grid(&self, other: &SpectralField) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!("`{}` and `{}`", self.name, other.name)))
        }
    }

    /// Apply `f(m, column) -> column` mode by mode.
    pub fn map_modes(&self, name: &str, mut f: impl FnMut(usize, &[C], &mut [C])) -> SpectralField {
        let mut out = SpectralField::zeros(&self.grid, name);
        for m in 0..self.grid.nmodes() {
            let ny = self.grid.ny();
            let src = &self.data[m * ny..(m + 1) * ny];
            let dst = &mut out.data[m * ny..(m + 1) * ny];
            f(m, src, dst);
        }
        out
    }

    /// Multiply each mode by a tangential symbol `s(m)`.
    pub fn symbol(&self, name: &str, s: impl Fn(usize) -> C) -> SpectralField {
        self.map_modes(name, |m, a, b| {
            let c = s(m);
            for (o, v) in b.iter_mut().zip(a) {
                *o = *v * c;
            }
        })
    }

    /// `d/dx_axis` (axis is 1-based).
    pub fn tangential_derivative(&self, axis: usize) -> Result<SpectralField> {
        check_axis(&self.grid, axis)?;
        let g = self.grid.clone();
        Ok(self.symbol(&format!("d{}({})", axis, self.name), |m| ik(&g, m, axis)))
    }

    /// `d^order/dy^order` with seven-point stencils (order 1 or 2).
    pub fn normal_derivative(&self, order: usize) -> Result<SpectralField> {
        let ny = self.grid.ny();
        if order == 0 || order > 2 {
            return Err(Error::Unsupported(format!("normal derivative of order {order}")));
        }
        if ny < 2 * order + 1 {
            return Err(Error::GridTooSmall { needed: 2 * order + 1, have: ny });
        }
        let g = self.grid.clone();
        let st = if order == 1 { g.d1() } else { g.d2() };
        Ok(self.map_modes(&format!("dy{}({})", order, self.name), |_, a, b| st.apply(a, b)))
    }

    /// `<D_x>^{1/2}`: multiplies mode `k` by `(1 + |k|^2)^{1/4}`.
    pub fn tangential_halfderivative(&self) -> SpectralField {
        let g = self.grid.clone();
        self.symbol(&format!("half({})", self.name), |m| {
            C::new((1.0 + g.kabs(m).powi(2)).powf(0.25), 0.0)
        })
    }

    /// `<D_x>` multiplier.
    pub fn japanese_bracket(&self) -> SpectralField {
        let g = self.grid.clone();
        self.symbol(&format!("jb({})", self.name), |m| C::new((1.0 + g.kabs(m).powi(2)).sqrt(), 0.0))
    }

    /// `|D_x|` multiplier.
    pub fn abs_derivative(&self) -> SpectralField {
        let g = self.grid.clone();
        self.symbol(&format!("absD({})", self.name), |m| C::new(g.kabs(m), 0.0))
    }

    /// Fail unless the top row is below the tail tolerance relative to the field maximum.
    pub fn check_decay(&self) -> Result<()> {
        self.check_decay_tol(TAIL_TOLERANCE)
    }

    pub fn check_decay_tol(&self, tol: f64) -> Result<()> {
        let phys = self.to_physical();
        let ny = self.grid.ny();
        let max = phys.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let top = (0..self.grid.nmodes()).fold(0.0f64, |a, p| a.max(phys[p * ny + ny - 1].abs()));
        if top > tol * max {
            return Err(Error::DecayViolation { field: self.name.clone(), top, limit: tol * max, tol });
        }
        Ok(())
    }

    /// `g(x, y) = int_y^{ly} f(x, s) ds` at every grid height.
    pub fn vertical_tail_integral(&self) -> Result<SpectralField> {
        self.check_decay()?;
        Ok(self.tail_integral_unchecked())
    }

    pub(crate) fn tail_integral_unchecked(&self) -> SpectralField {
        let g = self.grid.clone();
        self.map_modes(&format!("tail({})", self.name), |_, a, b| g.tail_integral(a, b))
    }

    /// `int_{y0}^{ly} f(x, s) ds` as a wall function of `x`.
    pub fn vertical_tail_integral_at(&self, y0: f64) -> Result<Trace> {
        self.check_decay()?;
        let mut t = Trace::zeros(&self.grid);
        for m in 0..self.grid.nmodes() {
            t.data[m] = self.grid.tail_integral_from(self.column(m), y0)?;
        }
        Ok(t)
    }

    /// `int_0^{ly} f dy` per mode.
    pub fn column_integral(&self) -> Trace {
        let mut t = Trace::zeros(&self.grid);
        for m in 0..self.grid.nmodes() {
            t.data[m] = self.grid.integrate(self.column(m));
        }
        t
    }

    /// Values on the row `y_j`.
    pub fn row(&self, j: usize) -> Trace {
        let ny = self.grid.ny();
        let mut t = Trace::zeros(&self.grid);
        for m in 0..self.grid.nmodes() {
            t.data[m] = self.data[m * ny + j];
        }
        t
    }

    pub fn wall(&self) -> Trace {
        self.row(0)
    }

    /// Wall value of `d/dy`.
    pub fn wall_dy(&self) -> Trace {
        let mut t = Trace::zeros(&self.grid);
        for m in 0..self.grid.nmodes() {
            t.data[m] = self.grid.d1().row(0, self.column(m));
        }
        t
    }

    /// Wall value of `d^2/dy^2`.
    pub fn wall_dyy(&self) -> Trace {
        let mut t = Trace::zeros(&self.grid);
        for m in 0..self.grid.nmodes() {
            t.data[m] = self.grid.d2().row(0, self.column(m));
        }
        t
    }

    /// A field constant in `y` equal to the trace.
    pub fn from_trace(trace: &Trace, name: &str) -> SpectralField {
        let g = trace.grid.clone();
        let mut f = SpectralField::zeros(&g, name);
        for m in 0..g.nmodes() {
            let c = trace.data[m];
            f.column_mut(m).iter_mut().for_each(|v| *v = c);
        }
        f
    }

    /// Multiply by a function of `y` only.
    pub fn scale_by_profile(&self, prof: &[f64]) -> SpectralField {
        let mut out = self.clone();
        let ny = self.grid.ny();
        for m in 0..self.grid.nmodes() {
            for j in 0..ny {
                out.data[m * ny + j] *= prof[j];
            }
        }
        out
    }

    /// Zero all modes outside the 2/3 band.
    pub fn dealias(&mut self) {
        let ny = self.grid.ny();
        for m in 0..self.grid.nmodes() {
            if !self.grid.keeps(m) {
                self.data[m * ny..(m + 1) * ny].iter_mut().for_each(|v| *v = ZERO);
            }
        }
    }

    /// Pointwise product, truncated with the 2/3 rule.
    pub fn product(&self, other: &SpectralField) -> Result<SpectralField> {
        self.same_grid(other)?;
        let a = self.to_physical();
        let b = other.to_physical();
        let p: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        let mut f = SpectralField::from_physical(&self.grid, &p, &format!("{}*{}", self.name, other.name))?;
        f.dealias();
        Ok(f)
    }

    /// `sqrt(int |f|^2 dx dy)` by Parseval.
    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        let ny = self.grid.ny();
        let w = self.grid.quad_weights();
        let mut s = 0.0;
        for m in 0..self.grid.nmodes() {
            for j in 0..ny {
                s += w[j] * self.data[m * ny + j].norm_sqr();
            }
        }
        s * self.grid.area()
    }

    /// L2 norm restricted to `y <= a` (quadrature weights clipped at the first node above `a`).
    pub fn l2_norm_sq_below(&self, a: f64) -> f64 {
        let ny = self.grid.ny();
        let w = self.grid.quad_weights();
        let y = self.grid.y();
        let mut s = 0.0;
        for m in 0..self.grid.nmodes() {
            for j in 0..ny {
                if y[j] <= a {
                    s += w[j] * self.data[m * ny + j].norm_sqr();
                }
            }
        }
        s * self.grid.area()
    }

    pub fn linf_norm(&self) -> f64 {
        self.to_physical().iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// Largest coefficient magnitude.
    pub fn max_coeff(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, v| a.max(v.norm()))
    }
}

macro_rules! binop {
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr<&SpectralField> for &SpectralField {
            type Output = SpectralField;
            fn $f(self, rhs: &SpectralField) -> SpectralField {
                debug_assert_eq!(self.data.len(), rhs.data.len());
                SpectralField {
                    grid: self.grid.clone(),
                    data: self.data.iter().zip(&rhs.data).map(|(a, b)| a $op b).collect(),
                    name: self.name.clone(),
                }
            }
        }
        impl $tr<SpectralField> for SpectralField {
            type Output = SpectralField;
            fn $f(self, rhs: SpectralField) -> SpectralField {
                (&self).$f(&rhs)
            }
        }
        impl $tr<&SpectralField> for SpectralField {
            type Output = SpectralField;
            fn $f(self, rhs: &SpectralField) -> SpectralField {
                (&self).$f(rhs)
            }
        }
    };
}
binop!(Add, add, +);
binop!(Sub, sub, -);

impl AddAssign<&SpectralField> for SpectralField {
    fn add_assign(&mut self, rhs: &SpectralField) {
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&SpectralField> for SpectralField {
    fn sub_assign(&mut self, rhs: &SpectralField) {
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, s: f64) -> SpectralField {
        SpectralField { grid: self.grid.clone(), data: self.data.iter().map(|a| a * s).collect(), name: self.name.clone() }
    }
}

impl Mul<f64> for SpectralField {
    type Output = SpectralField;
    fn mul(mut self, s: f64) -> SpectralField {
        self.data.iter_mut().for_each(|a| *a *= s);
        self
    }
}

impl Neg for SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self * -1.0
    }
}

impl SpectralField {
    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &SpectralField) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }
}

// ---------------------------------------------------------------------------
// Trace

impl Trace {
    pub fn zeros(grid: &Arc<Grid>) -> Trace {
        Trace { grid: grid.clone(), data: vec![ZERO; grid.nmodes()] }
    }

    pub fn from_coeffs(grid: &Arc<Grid>, data: Vec<C>) -> Result<Trace> {
        if data.len() != grid.nmodes() {
            return Err(Error::ShapeMismatch(format!("{} trace coefficients", data.len())));
        }
        Ok(Trace { grid: grid.clone(), data })
    }

    pub fn from_physical(grid: &Arc<Grid>, phys: &[f64]) -> Result<Trace> {
        if phys.len() != grid.nmodes() {
            return Err(Error::ShapeMismatch(format!("{} trace values", phys.len())));
        }
        Ok(Trace { grid: grid.clone(), data: forward(grid, phys, 1) })
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn([f64; 2]) -> f64) -> Trace {
        let phys: Vec<f64> = (0..grid.nmodes()).map(|p| f(grid.x_of(p))).collect();
        Trace { grid: grid.clone(), data: forward(grid, &phys, 1) }
    }

    /// The same tangential function on a grid with a different wall-normal extent.
    pub fn regrid(&self, grid: &Arc<Grid>) -> Result<Trace> {
        if grid.nmodes() != self.grid.nmodes() || grid.box_len() != self.grid.box_len() || grid.d() != self.grid.d() {
            return Err(Error::ShapeMismatch("tangential discretisations differ".into()));
        }
        Ok(Trace { grid: grid.clone(), data: self.data.clone() })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn coeffs(&self) -> &[C] {
        &self.data
    }
    pub fn coeffs_mut(&mut self) -> &mut [C] {
        &mut self.data
    }
    pub fn to_physical(&self) -> Vec<f64> {
        inverse(&self.grid, &self.data, 1)
    }

    pub fn symbol(&self, s: impl Fn(usize) -> C) -> Trace {
        Trace { grid: self.grid.clone(), data: self.data.iter().enumerate().map(|(m, v)| v * s(m)).collect() }
    }

    pub fn tangential_derivative(&self, axis: usize) -> Result<Trace> {
        check_axis(&self.grid, axis)?;
        let g = self.grid.clone();
        Ok(self.symbol(|m| ik(&g, m, axis)))
    }

    pub fn product(&self, other: &Trace) -> Trace {
        let a = self.to_physical();
        let b = other.to_physical();
        let p: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        let mut t = Trace { grid: self.grid.clone(), data: forward(&self.grid, &p, 1) };
        for m in 0..self.grid.nmodes() {
            if !self.grid.keeps(m) {
                t.data[m] = ZERO;
            }
        }
        t
    }

    pub fn mean(&self) -> f64 {
        self.data[0].re
    }

    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.area()).sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.to_physical().iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn max_coeff(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, v| a.max(v.norm()))
    }

    /// `<a, b>` over the torus.
    pub fn inner(&self, other: &Trace) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a * b.conj()).re).sum::<f64>() * self.grid.area()
    }

    pub fn axpy(&mut self, s: f64, other: &Trace) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn scaled(&self, s: f64) -> Trace {
        Trace { grid: self.grid.clone(), data: self.data.iter().map(|v| v * s).collect() }
    }
}

impl Add<&Trace> for &Trace {
    type Output = Trace;
    fn add(self, rhs: &Trace) -> Trace {
        Trace { grid: self.grid.clone(), data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub<&Trace> for &Trace {
    type Output = Trace;
    fn sub(self, rhs: &Trace) -> Trace {
        Trace { grid: self.grid.clone(), data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

// ---------------------------------------------------------------------------
// VectorField

impl VectorField {
    pub fn zeros(grid: &Arc<Grid>, name: &str) -> VectorField {
        VectorField {
            h: (1..=grid.d()).map(|a| SpectralField::zeros(grid, &format!("{name}_{a}"))).collect(),
            v: SpectralField::zeros(grid, &format!("{name}_v")),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.v.grid()
    }

    /// `div_x u + dy v`.
    pub fn divergence(&self) -> Result<SpectralField> {
        let mut div = self.v.normal_derivative(1)?;
        for (a, u) in self.h.iter().enumerate() {
            div += &u.tangential_derivative(a + 1)?;
        }
        Ok(div.with_name("div"))
    }

    /// Largest pointwise divergence divided by the largest velocity gradient scale.
    pub fn scaled_divergence(&self) -> Result<f64> {
        let div = self.divergence()?.linf_norm();
        let mut scale = self.v.normal_derivative(1)?.linf_norm();
        for (a, u) in self.h.iter().enumerate() {
            scale = scale.max(u.tangential_derivative(a + 1)?.linf_norm());
        }
        Ok(if scale > 0.0 { div / scale } else { div })
    }

    pub fn components(&self) -> impl Iterator<Item = &SpectralField> {
        self.h.iter().chain(std::iter::once(&self.v))
    }

    pub fn l2_norm(&self) -> f64 {
        self.components().map(|c| c.l2_norm_sq()).sum::<f64>().sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.components().map(|c| c.linf_norm()).fold(0.0, f64::max)
    }

    pub fn axpy(&mut self, s: f64, other: &VectorField) {
        for (a, b) in self.h.iter_mut().zip(&other.h) {
            a.axpy(s, b);
        }
        self.v.axpy(s, &other.v);
    }

    pub fn scaled(&self, s: f64) -> VectorField {
        VectorField { h: self.h.iter().map(|c| c * s).collect(), v: &self.v * s }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, Stretching};
    use std::f64::consts::PI;

    fn grid(d: usize, nx: usize, ny: usize) -> Arc<Grid> {
        GridSpec { d, nx, box_len: 2.0 * PI, ny, ly: 8.0, stretching: Stretching::Tanh { beta: 2.0 } }
            .build()
            .unwrap()
    }

    #[test]
    fn sine_differentiates_to_cosine() {
        let g = grid(1, 16, 16);
        let f = SpectralField::from_fn(&g, "s", |x, _| x[0].sin());
        let df = f.tangential_derivative(1).unwrap().to_physical();
        for p in 0..16 {
            for j in 0..16 {
                assert!((df[p * 16 + j] - g.x_of(p)[0].cos()).abs() < 1e-13);
            }
        }
        assert!(f.tangential_derivative(2).is_err());
        assert!(f.tangential_derivative(0).is_err());
    }

    #[test]
    fn two_d_transform_round_trips_and_differentiates() {
        let g = grid(2, 8, 8);
        let f = SpectralField::from_fn(&g, "s", |x, y| (x[0] + 2.0 * x[1]).sin() * (1.0 + y));
        let back = f.to_physical();
        let again = SpectralField::from_physical(&g, &back, "b").unwrap();
        for (a, b) in f.coeffs().iter().zip(again.coeffs()) {
            assert!((a - b).norm() < 1e-14);
        }
        let d2 = f.tangential_derivative(2).unwrap().to_physical();
        for p in 0..64 {
            let x = g.x_of(p);
            for j in 0..8 {
                let y = g.y()[j];
                assert!((d2[p * 8 + j] - 2.0 * (x[0] + 2.0 * x[1]).cos() * (1.0 + y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn halfderivative_of_mode_three() {
        let g = grid(1, 16, 8);
        let f = SpectralField::from_fn(&g, "s", |x, _| (3.0 * x[0]).cos());
        let h = f.tangential_halfderivative();
        let ratio = h.coeffs()[3 * 8].re / f.coeffs()[3 * 8].re;
        assert!((ratio - 10f64.powf(0.25)).abs() < 1e-14);
    }

    #[test]
    fn tail_integral_of_exponential() {
        let g = GridSpec { d: 1, nx: 4, box_len: 2.0 * PI, ny: 256, ly: 40.0, stretching: Stretching::Tanh { beta: 2.0 } }
            .build()
            .unwrap();
        let f = SpectralField::from_fn(&g, "e", |_, y| (-y).exp());
        let t = f.vertical_tail_integral_at(0.0).unwrap();
        let exact = 1.0 - (-40.0f64).exp();
        assert!((t.coeffs()[0].re - exact).abs() < 1e-8 * exact);
        let slow = SpectralField::from_fn(&g, "slow", |_, y| (-0.1 * y).exp());
        assert!(matches!(slow.vertical_tail_integral(), Err(Error::DecayViolation { .. })));
    }
}
