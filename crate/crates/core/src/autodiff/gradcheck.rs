use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Outcome of comparing analytic gradients with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Elements compared.
    pub compared: usize,
    /// Elements whose perturbation crossed a relu kink.
    pub skipped: usize,
    /// `(input, element)` with the largest relative error.
    pub worst: Option<(usize, usize)>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Relative error with the `max(1e-8, |a| + |n|)` denominator.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

fn evaluate<F>(f: &F, inputs: &[Tensor]) -> Result<(f64, Vec<bool>)>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::with_activation_recording();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let root = f(&mut tape, &vars)?;
    let value = tape.value(root);
    if value.len() != 1 {
        return Err(Error::NonScalarRoot(value.shape().to_vec()));
    }
    Ok((value.item(), tape.activation_pattern().to_vec()))
}

/// Compare the tape's gradients of the scalar `f` against central finite
/// differences with step `h`. Perturbations that flip any relu input sign
/// (including inputs sitting exactly at zero) are excluded.
pub fn grad_check<F>(f: F, inputs: &[Tensor], h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    grad_check_with(f, inputs, h, tol, Stencil::Central)
}

/// Finite-difference formula.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// `(f(x+h) - f(x-h)) / 2h`, error `O(h^2)`.
    #[default]
    Central,
    /// `(-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h`, error `O(h^4)`.
    FivePoint,
}

impl Stencil {
    fn offsets(self) -> &'static [(f64, f64)] {
        match self {
            Stencil::Central => &[(1.0, 0.5), (-1.0, -0.5)],
            Stencil::FivePoint => &[
                (2.0, -1.0 / 12.0),
                (1.0, 8.0 / 12.0),
                (-1.0, -8.0 / 12.0),
                (-2.0, 1.0 / 12.0),
            ],
        }
    }
}

pub fn grad_check_with<F>(
    f: F,
    inputs: &[Tensor],
    h: f64,
    tol: f64,
    stencil: Stencil,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::with_activation_recording();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let root = f(&mut tape, &vars)?;
    let base_pattern = tape.activation_pattern().to_vec();
    let grads = tape.backward(root)?;

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        compared: 0,
        skipped: 0,
        worst: None,
        tolerance: tol,
        passed: true,
    };
    let mut work = inputs.to_vec();
    for (i, var) in vars.iter().enumerate() {
        let zeros = Tensor::zeros(inputs[i].shape());
        let analytic = grads.get(*var).unwrap_or(&zeros);
        for e in 0..inputs[i].len() {
            let orig = inputs[i].data()[e];
            let mut numeric = 0.0;
            let mut kink = false;
            for &(step, weight) in stencil.offsets() {
                work[i].data_mut()[e] = orig + step * h;
                let (value, pattern) = evaluate(&f, &work)?;
                kink |= pattern != base_pattern;
                numeric += weight * value;
            }
            work[i].data_mut()[e] = orig;
            if kink {
                report.skipped += 1;
                continue;
            }
            let numeric = numeric / h;
            let a = analytic.data()[e];
            let rel = relative_error(a, numeric);
            report.compared += 1;
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                report.worst = Some((i, e));
            }
        }
    }
    report.passed = report.max_rel_error <= tol;
    Ok(report)
}
