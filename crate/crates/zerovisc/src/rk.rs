//! Three-stage low-storage IMEX Runge-Kutta scheme (implicit diffusion,
//! explicit transport), third order for the explicit part.
//!
//! Stage `i` solves
//! `(I - b_i dt L) u_i = (I + a_i dt L) u_{i-1} + dt (g_i N(u_{i-1}) + z_i N(u_{i-2}))`.

pub const STAGES: usize = 3;
pub const GAMMA: [f64; STAGES] = [8.0 / 15.0, 5.0 / 12.0, 3.0 / 4.0];
pub const ZETA: [f64; STAGES] = [0.0, -17.0 / 60.0, -5.0 / 12.0];
pub const ALPHA: [f64; STAGES] = [29.0 / 96.0, -3.0 / 40.0, 1.0 / 6.0];
pub const BETA: [f64; STAGES] = [37.0 / 160.0, 5.0 / 24.0, 1.0 / 6.0];

/// Fraction of the step at which stage `i` starts (`i = 0, 1, 2`), and `1` for `i = 3`.
pub fn stage_start(i: usize) -> f64 {
    [0.0, 8.0 / 15.0, 2.0 / 3.0, 1.0][i]
}
