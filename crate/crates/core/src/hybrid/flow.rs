//! Fixed-step fourth-order Runge-Kutta integration of the per-mode flows.

use crate::error::{Result, SimError};
use crate::hybrid::{ModeId, PdmpSpec, VectorFieldSpec};

/// Scratch space reused across RK4 steps to keep the hot path allocation-free.
#[derive(Debug, Clone)]
pub(crate) struct Rk4Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Scratch {
    pub(crate) fn new(dim: usize) -> Self {
        Rk4Scratch {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }
}

/// One classical RK4 step of size `h` for the autonomous field `b`.
pub fn rk4_step(field: &VectorFieldSpec, y: &mut [f64], h: f64) {
    let mut s = Rk4Scratch::new(y.len());
    rk4_step_with(field, y, h, &mut s);
}

pub(crate) fn rk4_step_with(field: &VectorFieldSpec, y: &mut [f64], h: f64, s: &mut Rk4Scratch) {
    let d = y.len();
    field.eval_into(y, &mut s.k1);
    for p in 0..d {
        s.tmp[p] = y[p] + 0.5 * h * s.k1[p];
    }
    field.eval_into(&s.tmp, &mut s.k2);
    for p in 0..d {
        s.tmp[p] = y[p] + 0.5 * h * s.k2[p];
    }
    field.eval_into(&s.tmp, &mut s.k3);
    for p in 0..d {
        s.tmp[p] = y[p] + h * s.k3[p];
    }
    field.eval_into(&s.tmp, &mut s.k4);
    for p in 0..d {
        y[p] += h / 6.0 * (s.k1[p] + 2.0 * s.k2[p] + 2.0 * s.k3[p] + s.k4[p]);
    }
}

/// Integrate `field` from `y0` over `[0, t]` with fixed step `dt`
/// (the final step is shortened to land exactly on `t`).
pub fn integrate_field(field: &VectorFieldSpec, y0: &[f64], t: f64, dt: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(SimError::InvalidSpec("integration time must be >= 0".into()));
    }
    if !(dt > 0.0) {
        return Err(SimError::InvalidSpec("step size must be > 0".into()));
    }
    field.validate(y0.len())?;
    let mut y = y0.to_vec();
    let mut s = Rk4Scratch::new(y0.len());
    let mut done = 0.0;
    while done < t {
        let h = dt.min(t - done);
        rk4_step_with(field, &mut y, h, &mut s);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite("flow integration"));
        }
        done += h;
    }
    Ok(y)
}

/// Flow of one mode of `spec` evaluated at time `t`.
pub fn flow(spec: &PdmpSpec, mode: ModeId, y0: &[f64], t: f64, dt: f64) -> Result<Vec<f64>> {
    let m = spec
        .modes
        .get(mode.0)
        .ok_or_else(|| SimError::InvalidSpec(format!("unknown mode {mode}")))?;
    if y0.len() != spec.dim {
        return Err(SimError::DimensionMismatch {
            what: "flow initial condition",
            expected: spec.dim,
            got: y0.len(),
        });
    }
    integrate_field(&m.field, y0, t, dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_is_identity() {
        let f = VectorFieldSpec::Constant {
            value: vec![0.0, 0.0],
        };
        let y = integrate_field(&f, &[1.5, -2.0], 3.0, 0.01).unwrap();
        assert_eq!(y, vec![1.5, -2.0]);
    }

    #[test]
    fn constant_field_is_exact_with_binary_steps() {
        // 2.0 * 0.5 integrates to exactly 1.0 when every substep is a power of two
        let f = VectorFieldSpec::Constant { value: vec![2.0] };
        let y = integrate_field(&f, &[0.0], 0.5, 0.125).unwrap();
        assert_eq!(y, vec![1.0]);
    }

    #[test]
    fn linear_decay_matches_exponential_to_1e8() {
        // y' = -y from 1: y(2) = e^{-2}
        let f = VectorFieldSpec::Linear {
            matrix: vec![vec![-1.0]],
            offset: vec![0.0],
        };
        let y = integrate_field(&f, &[1.0], 2.0, 1e-3).unwrap();
        assert!((y[0] - (-2.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn ou_field_relaxes_to_mean() {
        let f = VectorFieldSpec::OrnsteinUhlenbeck {
            rate: 2.0,
            mean: vec![3.0],
        };
        let y = integrate_field(&f, &[0.0], 1.0, 1e-3).unwrap();
        let exact = 3.0 * (1.0 - (-2.0f64).exp());
        assert!((y[0] - exact).abs() < 1e-8);
    }

    #[test]
    fn partial_final_step_lands_on_t() {
        let f = VectorFieldSpec::Constant { value: vec![1.0] };
        // t = 0.35 with dt = 0.1 ends with a 0.05 step
        let y = integrate_field(&f, &[0.0], 0.35, 0.1).unwrap();
        assert!((y[0] - 0.35).abs() < 1e-15);
    }

    #[test]
    fn diverging_field_reports_non_finite() {
        let f = VectorFieldSpec::Linear {
            matrix: vec![vec![1e300]],
            offset: vec![0.0],
        };
        match integrate_field(&f, &[1.0], 1.0, 0.1) {
            Err(SimError::NonFinite(_)) => {}
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let f = VectorFieldSpec::Constant { value: vec![1.0] };
        assert!(integrate_field(&f, &[0.0, 0.0], 1.0, 0.1).is_err());
    }
}
