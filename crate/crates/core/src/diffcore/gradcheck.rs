//! Central-finite-difference verification of tape gradients.

use super::{DiffError, Tape, Tensor, Var};

/// Per-coordinate comparison of the tape gradient against central finite
/// differences. Relative error is `|a - n| / max(1, |a|, |n|)`, so exact zeros
/// on both sides compare clean and tiny true gradients are judged on an
/// absolute scale.
pub struct GradCheckReport {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub max_rel_err: f64,
    pub worst_coord: usize,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn pass(&self) -> bool {
        self.max_rel_err < self.tol
    }
}

/// Checks `d f(x) / d x` for a scalar-valued tape function. `f` is evaluated
/// once on a gradient-carrying tape and `2 * numel(x)` more times for the
/// central differences with the given step.
pub fn grad_check<F>(f: F, x: &Tensor, step: f64, tol: f64) -> Result<GradCheckReport, DiffError>
where
    F: Fn(&mut Tape, Var) -> Result<Var, DiffError>,
{
    let mut tape = Tape::new();
    let xv = tape.param(x);
    let out = f(&mut tape, xv)?;
    let out_data = tape.data(out)?;
    if out_data.len() != 1 {
        return Err(DiffError::NonScalarLoss { shape: tape.shape(out)?.to_vec() });
    }
    tape.backward(out)?;
    let analytic = match tape.grad(xv) {
        Some(g) => g.to_vec(),
        None => vec![0.0; x.numel()],
    };

    let eval = |t: &Tensor| -> Result<f64, DiffError> {
        let mut tape = Tape::new();
        let xv = tape.input(t);
        let out = f(&mut tape, xv)?;
        Ok(tape.data(out)?[0])
    };

    let mut numeric = vec![0.0; x.numel()];
    let mut probe = x.clone();
    for i in 0..x.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + step;
        let hi = eval(&probe)?;
        probe.data_mut()[i] = orig - step;
        let lo = eval(&probe)?;
        probe.data_mut()[i] = orig;
        numeric[i] = (hi - lo) / (2.0 * step);
    }

    let mut max_rel_err = 0.0;
    let mut worst_coord = 0;
    for (i, (&a, &n)) in analytic.iter().zip(&numeric).enumerate() {
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(1.0);
        if rel > max_rel_err {
            max_rel_err = rel;
            worst_coord = i;
        }
    }
    Ok(GradCheckReport { analytic, numeric, max_rel_err, worst_coord, tol })
}
