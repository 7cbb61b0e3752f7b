//! Tangentially periodic, wall-normal mapped grids.
//!
//! The tangential directions are resolved by Fourier modes on a periodic box.
//! The wall-normal direction is a set of collocation points `y_0 = 0 < ... <
//! y_{ny-1} = ly`, either uniform or clustered at the wall by a tanh map.
//! Derivatives in `y` use seven-point Fornberg stencils computed on the
//! physical (mapped) points, so they are exact for polynomials of degree six
//! in `y` regardless of the map.

use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points per finite-difference stencil in `y`.
pub const STENCIL: usize = 7;
/// Points per local interpolant used for quadrature (degree five).
pub(crate) const QUAD_POINTS: usize = 6;
/// Points per local interpolant used for point evaluation (degree seven).
pub const INTERP_POINTS: usize = 8;

/// Wall-normal coordinate map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Stretching {
    Uniform,
    /// `y(s) = ly * (1 - tanh(beta (1 - s)) / tanh(beta))`, clustered at `y = 0`.
    Tanh { beta: f64 },
}

/// Plain description of a grid; this is what configs and snapshot headers carry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub nx: usize,
    #[serde(rename = "box")]
    pub box_len: f64,
    pub ny: usize,
    pub ly: f64,
    pub stretching: Stretching,
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<Grid>> {
        Grid::new(self.clone()).map(Arc::new)
    }
}

/// One banded row operator: `out[i] = sum_k w[i][k] * f[start[i] + k]`.
#[derive(Clone, Debug)]
pub struct Stencil {
    pub start: Vec<usize>,
    pub weights: Vec<[f64; STENCIL]>,
}

impl Stencil {
    pub fn apply<T>(&self, f: &[T], out: &mut [T])
    where
        T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        for (i, o) in out.iter_mut().enumerate() {
            let s = self.start[i];
            let w = &self.weights[i];
            let mut acc = T::default();
            for k in 0..STENCIL {
                acc = acc + f[s + k] * w[k];
            }
            *o = acc;
        }
    }

    /// Value of row `i` applied to `f`.
    pub fn row<T>(&self, i: usize, f: &[T]) -> T
    where
        T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        let s = self.start[i];
        let mut acc = T::default();
        for k in 0..STENCIL {
            acc = acc + f[s + k] * self.weights[i][k];
        }
        acc
    }
}

/// A fully built grid with stencils, quadrature and FFT plans.
pub struct Grid {
    spec: GridSpec,
    y: Vec<f64>,
    d1: Stencil,
    d2: Stencil,
    /// Per-interval quadrature: integral over `[y_j, y_{j+1}]` of the local quintic.
    interval_start: Vec<usize>,
    interval_weights: Vec<[f64; QUAD_POINTS]>,
    /// Weights of the full integral over `[0, ly]`.
    weights: Vec<f64>,
    kvec: Vec<[f64; 2]>,
    kabs: Vec<f64>,
    keep: Vec<bool>,
    nyquist: Vec<bool>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("spec", &self.spec).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Grid> {
        if spec.d != 1 && spec.d != 2 {
            return Err(Error::InvalidGrid(format!("d must be 1 or 2, got {}", spec.d)));
        }
        if spec.nx < 4 || spec.nx % 2 != 0 {
            return Err(Error::InvalidGrid(format!("nx must be even and >= 4, got {}", spec.nx)));
        }
        if spec.ny < 8 {
            return Err(Error::InvalidGrid(format!("ny must be >= 8, got {}", spec.ny)));
        }
        if !(spec.ly > 0.0) || !(spec.box_len > 0.0) {
            return Err(Error::InvalidGrid("ly and box must be positive".into()));
        }
        let y = map_points(&spec)?;
        let (d1, d2) = build_stencils(&y);
        let (interval_start, interval_weights) = build_interval_quadrature(&y);
        let mut weights = vec![0.0; y.len()];
        for (j, w) in interval_weights.iter().enumerate() {
            for k in 0..QUAD_POINTS {
                weights[interval_start[j] + k] += w[k];
            }
        }

        let nx = spec.nx;
        let nmodes = nx.pow(spec.d as u32);
        let scale = 2.0 * std::f64::consts::PI / spec.box_len;
        let mut kvec = Vec::with_capacity(nmodes);
        let mut kabs = Vec::with_capacity(nmodes);
        let mut keep = Vec::with_capacity(nmodes);
        let mut nyquist = Vec::with_capacity(nmodes);
        let cut = (nx / 3) as i64;
        for m in 0..nmodes {
            let n = mode_numbers(nx, spec.d, m);
            let k = [n[0] as f64 * scale, n[1] as f64 * scale];
            kabs.push((k[0] * k[0] + k[1] * k[1]).sqrt());
            kvec.push(k);
            keep.push(n[0].abs() <= cut && n[1].abs() <= cut);
            nyquist.push(n[0].unsigned_abs() as usize == nx / 2 || n[1].unsigned_abs() as usize == nx / 2);
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(nx);
        let ifft = planner.plan_fft_inverse(nx);
        Ok(Grid {
            spec,
            y,
            d1,
            d2,
            interval_start,
            interval_weights,
            weights,
            kvec,
            kabs,
            keep,
            nyquist,
            fft,
            ifft,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn d(&self) -> usize {
        self.spec.d
    }
    pub fn nx(&self) -> usize {
        self.spec.nx
    }
    pub fn ny(&self) -> usize {
        self.spec.ny
    }
    pub fn ly(&self) -> f64 {
        self.spec.ly
    }
    pub fn box_len(&self) -> f64 {
        self.spec.box_len
    }
    /// Number of tangential modes (`nx^d`), equal to the number of tangential points.
    pub fn nmodes(&self) -> usize {
        self.kabs.len()
    }
    pub fn y(&self) -> &[f64] {
        &self.y
    }
    pub fn d1(&self) -> &Stencil {
        &self.d1
    }
    pub fn d2(&self) -> &Stencil {
        &self.d2
    }
    /// Wave vector of mode `m` (second entry is zero for d = 1).
    pub fn k(&self, m: usize) -> [f64; 2] {
        self.kvec[m]
    }
    pub fn kabs(&self, m: usize) -> f64 {
        self.kabs[m]
    }
    /// True for modes retained by the 2/3 rule.
    pub fn keeps(&self, m: usize) -> bool {
        self.keep[m]
    }
    pub fn is_nyquist(&self, m: usize) -> bool {
        self.nyquist[m]
    }
    /// Tangential area of the periodic box.
    pub fn area(&self) -> f64 {
        self.spec.box_len.powi(self.spec.d as i32)
    }
    /// Tangential point coordinates of physical index `p`.
    pub fn x_of(&self, p: usize) -> [f64; 2] {
        let h = self.spec.box_len / self.spec.nx as f64;
        if self.spec.d == 1 {
            [p as f64 * h, 0.0]
        } else {
            [(p / self.spec.nx) as f64 * h, (p % self.spec.nx) as f64 * h]
        }
    }
    pub fn dx(&self) -> f64 {
        self.spec.box_len / self.spec.nx as f64
    }
    /// Local wall-normal spacing at point `j` (mean of neighbouring gaps).
    pub fn dy_local(&self, j: usize) -> f64 {
        let n = self.y.len();
        if j == 0 {
            self.y[1] - self.y[0]
        } else if j == n - 1 {
            self.y[n - 1] - self.y[n - 2]
        } else {
            0.5 * (self.y[j + 1] - self.y[j - 1])
        }
    }
    pub(crate) fn fft(&self) -> &Arc<dyn Fft<f64>> {
        &self.fft
    }
    pub(crate) fn ifft(&self) -> &Arc<dyn Fft<f64>> {
        &self.ifft
    }

    /// Quadrature weights for the integral over `[0, ly]`.
    pub fn quad_weights(&self) -> &[f64] {
        &self.weights
    }

    /// `int_0^ly f dy` with the composite quintic rule.
    pub fn integrate<T>(&self, f: &[T]) -> T
    where
        T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        let mut acc = T::default();
        for (v, w) in f.iter().zip(&self.weights) {
            acc = acc + *v * *w;
        }
        acc
    }

    /// `g_j = int_{y_j}^{ly} f dy` at every grid point.
    pub fn tail_integral<T>(&self, f: &[T], out: &mut [T])
    where
        T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        let n = self.y.len();
        out[n - 1] = T::default();
        for j in (0..n - 1).rev() {
            let s = self.interval_start[j];
            let w = &self.interval_weights[j];
            let mut acc = out[j + 1];
            for k in 0..QUAD_POINTS {
                acc = acc + f[s + k] * w[k];
            }
            out[j] = acc;
        }
    }

    /// `int_{y0}^{ly} f dy` for an arbitrary `y0` in `[0, ly]`.
    pub fn tail_integral_from<T>(&self, f: &[T], y0: f64) -> Result<T>
    where
        T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        if !(0.0..=self.ly()).contains(&y0) {
            return Err(Error::Interpolation(format!("y0 = {y0} outside [0, {}]", self.ly())));
        }
        let n = self.y.len();
        let j = self.locate(y0).min(n - 2);
        let mut tail = vec![T::default(); n];
        self.tail_integral(f, &mut tail);
        // partial interval [y0, y_{j+1}] with the same local quintic
        let s = self.interval_start[j];
        let pts = &self.y[s..s + QUAD_POINTS];
        let (a, b) = (y0, self.y[j + 1]);
        let mut acc = tail[j + 1];
        for (t, gw) in gauss_legendre_3(a, b) {
            let c = fornberg(t, pts, 0);
            for k in 0..QUAD_POINTS {
                acc = acc + f[s + k] * (gw * c[0][k]);
            }
        }
        Ok(acc)
    }

    /// Index `j` with `y_j <= y0 < y_{j+1}` (clamped).
    pub fn locate(&self, y0: f64) -> usize {
        match self.y.binary_search_by(|p| p.partial_cmp(&y0).unwrap()) {
            Ok(j) => j,
            Err(j) => j.saturating_sub(1),
        }
    }

    /// Lagrange weights evaluating a column at `y0` from eight nearby points.
    pub fn interp_weights(&self, y0: f64) -> Result<(usize, [f64; INTERP_POINTS])> {
        let n = self.y.len();
        if !(y0 >= 0.0 && y0 <= self.ly() * (1.0 + 1e-14)) {
            return Err(Error::Interpolation(format!("y = {y0} outside [0, {}]", self.ly())));
        }
        let j = self.locate(y0);
        let s = j.saturating_sub(INTERP_POINTS / 2 - 1).min(n - INTERP_POINTS);
        let c = fornberg(y0, &self.y[s..s + INTERP_POINTS], 0);
        let mut w = [0.0; INTERP_POINTS];
        w.copy_from_slice(&c[0]);
        Ok((s, w))
    }

    /// First point of the local quintic used on interval `[y_j, y_{j+1}]`.
    pub(crate) fn interval_start(&self, j: usize) -> usize {
        self.interval_start[j]
    }

    /// Number of collocation points with `y <= h`.
    pub fn points_below(&self, h: f64) -> usize {
        self.y.iter().filter(|&&y| y <= h).count()
    }
}

impl GridSpec {
    /// Smallest `ny` (same map otherwise) with at least `need` points in `y <= h`.
    pub fn required_ny(&self, h: f64, need: usize) -> Result<usize> {
        let mut spec = self.clone();
        while spec.ny < 1 << 20 {
            if map_points(&spec)?.iter().filter(|&&y| y <= h).count() >= need {
                return Ok(spec.ny);
            }
            spec.ny += 16;
        }
        Err(Error::InvalidGrid(format!("no ny below 2^20 puts {need} points under y = {h}")))
    }
}

fn mode_numbers(nx: usize, d: usize, m: usize) -> [i64; 2] {
    let wrap = |i: usize| -> i64 {
        if i < nx / 2 {
            i as i64
        } else {
            i as i64 - nx as i64
        }
    };
    if d == 1 {
        [wrap(m), 0]
    } else {
        [wrap(m / nx), wrap(m % nx)]
    }
}

fn map_points(spec: &GridSpec) -> Result<Vec<f64>> {
    let n = spec.ny;
    let mut y = Vec::with_capacity(n);
    for j in 0..n {
        let s = j as f64 / (n - 1) as f64;
        let v = match spec.stretching {
            Stretching::Uniform => spec.ly * s,
            Stretching::Tanh { beta } => {
                if !(beta > 0.0) {
                    return Err(Error::InvalidGrid(format!("tanh beta must be positive, got {beta}")));
                }
                spec.ly * (1.0 - (beta * (1.0 - s)).tanh() / beta.tanh())
            }
        };
        y.push(v);
    }
    y[0] = 0.0;
    y[n - 1] = spec.ly;
    if y.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid("coordinate map is not strictly increasing".into()));
    }
    Ok(y)
}

fn build_stencils(y: &[f64]) -> (Stencil, Stencil) {
    let n = y.len();
    let half = STENCIL / 2;
    let mut d1 = Stencil { start: Vec::with_capacity(n), weights: Vec::with_capacity(n) };
    let mut d2 = Stencil { start: Vec::with_capacity(n), weights: Vec::with_capacity(n) };
    for i in 0..n {
        let s = i.saturating_sub(half).min(n - STENCIL);
        let c = fornberg(y[i], &y[s..s + STENCIL], 2);
        let mut w1 = [0.0; STENCIL];
        let mut w2 = [0.0; STENCIL];
        w1.copy_from_slice(&c[1]);
        w2.copy_from_slice(&c[2]);
        d1.start.push(s);
        d1.weights.push(w1);
        d2.start.push(s);
        d2.weights.push(w2);
    }
    (d1, d2)
}

fn build_interval_quadrature(y: &[f64]) -> (Vec<usize>, Vec<[f64; QUAD_POINTS]>) {
    let n = y.len();
    let mut starts = Vec::with_capacity(n - 1);
    let mut weights = Vec::with_capacity(n - 1);
    for j in 0..n - 1 {
        let s = j.saturating_sub(QUAD_POINTS / 2 - 1).min(n - QUAD_POINTS);
        let pts = &y[s..s + QUAD_POINTS];
        let mut w = [0.0; QUAD_POINTS];
        for (t, gw) in gauss_legendre_3(y[j], y[j + 1]) {
            let c = fornberg(t, pts, 0);
            for k in 0..QUAD_POINTS {
                w[k] += gw * c[0][k];
            }
        }
        starts.push(s);
        weights.push(w);
    }
    (starts, weights)
}

/// Three-point Gauss-Legendre nodes and weights on `[a, b]`.
pub(crate) fn gauss_legendre_3(a: f64, b: f64) -> [(f64, f64); 3] {
    let m = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let r = (0.6f64).sqrt();
    [(m - h * r, h * 5.0 / 9.0), (m, h * 8.0 / 9.0), (m + h * r, h * 5.0 / 9.0)]
}

const GL8_X: [f64; 8] = [
    -0.9602898564975362, -0.7966664774136267, -0.525532409916329, -0.18343464249564978,
    0.18343464249564978, 0.525532409916329, 0.7966664774136267, 0.9602898564975362,
];
const GL8_W: [f64; 8] = [
    0.10122853629037669, 0.22238103445337434, 0.31370664587788705, 0.36268378337836177,
    0.36268378337836177, 0.31370664587788705, 0.22238103445337434, 0.10122853629037669,
];

/// Eight-point Gauss-Legendre nodes and weights on `[a, b]`.
pub(crate) fn gauss_legendre_8(a: f64, b: f64) -> [(f64, f64); 8] {
    let m = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    std::array::from_fn(|i| (m + h * GL8_X[i], h * GL8_W[i]))
}

/// Finite-difference weights (Fornberg 1988) for derivatives `0..=m` at `x0`
/// from arbitrary distinct nodes. `c[k][j]` multiplies `f(x[j])` for `d^k f/dx^k`.
pub fn fornberg(x0: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - x0;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(ny: usize, st: Stretching) -> GridSpec {
        GridSpec { d: 1, nx: 8, box_len: 2.0 * std::f64::consts::PI, ny, ly: 8.0, stretching: st }
    }

    #[test]
    fn rejects_bad_shapes() {
        let mut s = spec(32, Stretching::Uniform);
        s.nx = 6 + 1;
        assert!(Grid::new(s.clone()).is_err());
        s.nx = 2;
        assert!(Grid::new(s.clone()).is_err());
        let mut s = spec(7, Stretching::Uniform);
        assert!(Grid::new(s.clone()).is_err());
        s.ny = 16;
        s.d = 3;
        assert!(Grid::new(s).is_err());
    }

    #[test]
    fn tanh_map_is_monotone_and_clustered() {
        let g = Grid::new(spec(64, Stretching::Tanh { beta: 3.0 })).unwrap();
        let y = g.y();
        assert_eq!(y[0], 0.0);
        assert_eq!(*y.last().unwrap(), 8.0);
        assert!(y[1] - y[0] < y[63] - y[62]);
    }

    #[test]
    fn fornberg_matches_centered_formula() {
        let x = [-1.0, 0.0, 1.0];
        let c = fornberg(0.0, &x, 2);
        assert!((c[1][0] + 0.5).abs() < 1e-15 && (c[1][2] - 0.5).abs() < 1e-15);
        assert!((c[2][0] - 1.0).abs() < 1e-15 && (c[2][1] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn quadrature_integrates_quintics_exactly() {
        let g = Grid::new(spec(40, Stretching::Tanh { beta: 2.0 })).unwrap();
        let f: Vec<f64> = g.y().iter().map(|y| y.powi(5) - 3.0 * y * y).collect();
        let exact = 8f64.powi(6) / 6.0 - 8f64.powi(3);
        assert!((g.integrate(&f) - exact).abs() < 1e-9 * exact.abs());
        let v = g.tail_integral_from(&f, 2.5).unwrap();
        let ex = exact - (2.5f64.powi(6) / 6.0 - 2.5f64.powi(3));
        assert!((v - ex).abs() < 1e-9 * ex.abs());
    }

    #[test]
    fn interpolation_reproduces_septics() {
        let g = Grid::new(spec(40, Stretching::Tanh { beta: 2.0 })).unwrap();
        let f: Vec<f64> = g.y().iter().map(|y| y.powi(7) - y).collect();
        for &y0 in &[0.0, 0.013, 1.7, 7.99, 8.0] {
            let (s, w) = g.interp_weights(y0).unwrap();
            let v: f64 = (0..INTERP_POINTS).map(|k| w[k] * f[s + k]).sum();
            let ex = y0.powi(7) - y0;
            assert!((v - ex).abs() <= 1e-8 * (1.0 + ex.abs()), "{y0}: {v} vs {ex}");
        }
        assert!(g.interp_weights(8.5).is_err());
    }
}
