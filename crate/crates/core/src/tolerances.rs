//! Tolerances shared by the solvers.

/// Mass mismatch `|∫f − meas Ω|` accepted by the solvers, relative to `meas Ω`.
pub const MASS_REL: f64 = 1e-3;

/// Largest |f − 1| treated as "f = 1" on a collar band.
pub const BAND_ONE: f64 = 1e-12;

/// Hölder exponent of the smallness gate and of reported norms.
pub const GATE_ALPHA: f64 = 0.5;

/// Default smallness gate on `‖f − 1‖_{C^{0,1/2}}` for the fixed-point solver.
pub const GATE_EPSILON: f64 = 0.05;

/// Newton inversion: residual target relative to the domain diameter.
pub const INVERSION_REL: f64 = 1e-10;

/// Newton inversion: iteration cap per seed.
pub const INVERSION_MAX_ITER: usize = 50;

/// Newton inversion: step halvings tried before giving up on a seed.
pub const INVERSION_HALVINGS: usize = 30;

/// Constant `C` of the expected determinant residual
/// `C h² (max |D²f| + ‖f − 1‖∞)`, with `D²f` the axis second differences;
/// the Moser solve fails with a flow-accuracy error beyond ten times that.
pub const DET_EXPECT: f64 = 1.0;

/// Support tolerance `10⁻⁶ + 5 h²` for band and identity-region displacements.
pub fn support(h: f64) -> f64 {
    1e-6 + 5.0 * h * h
}
