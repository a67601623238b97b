//! Central finite-difference validation of tape gradients.

use rand::seq::index::sample;
use rand::Rng;

use super::{Matrix, Tape, Var};
use crate::error::Result;

/// Denominator floor for relative errors. Central differences at step
/// `1e-5` carry roughly `1e-11` of rounding noise, so gradients below the
/// floor are compared on an absolute scale instead.
pub const REL_ERROR_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub param: usize,
    pub row: usize,
    pub col: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
    /// Entries whose relative error exceeded the tolerance.
    pub failures: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERROR_FLOOR)
}

/// Compares `backward` against central differences.
///
/// `forward` must build a scalar loss from leaves bound to `params` (in
/// order) on the given tape. Up to `per_param` entries of each parameter are
/// sampled; `None` checks every entry.
pub fn check_gradients<F, R>(
    forward: F,
    params: &[Matrix],
    step: f64,
    tolerance: f64,
    per_param: Option<usize>,
    rng: &mut R,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
    R: Rng + ?Sized,
{
    let evaluate = |values: &[Matrix]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars = values
            .iter()
            .map(|v| tape.leaf(v.clone()))
            .collect::<Result<Vec<_>>>()?;
        let loss = forward(&mut tape, &vars)?;
        Ok(tape.scalar_value(loss))
    };

    let mut tape = Tape::new();
    let vars = params
        .iter()
        .map(|v| tape.leaf(v.clone()))
        .collect::<Result<Vec<_>>>()?;
    let loss = forward(&mut tape, &vars)?;
    let analytic = tape.backward(loss)?.collect(&vars)?;

    let mut report = GradCheckReport {
        tolerance,
        ..Default::default()
    };
    let mut work: Vec<Matrix> = params.to_vec();
    for (p, param) in params.iter().enumerate() {
        let total = param.len();
        let entries: Vec<usize> = match per_param {
            Some(k) if k < total => {
                let mut picked = sample(rng, total, k).into_vec();
                picked.sort_unstable();
                picked
            }
            _ => (0..total).collect(),
        };
        let cols = param.ncols();
        for flat in entries {
            let (row, col) = (flat / cols, flat % cols);
            let orig = work[p][[row, col]];
            work[p][[row, col]] = orig + step;
            let plus = evaluate(&work)?;
            work[p][[row, col]] = orig - step;
            let minus = evaluate(&work)?;
            work[p][[row, col]] = orig;

            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic[p][[row, col]];
            let rel = relative_error(a, numeric);
            report.checked += 1;
            report.max_rel_error = report.max_rel_error.max(rel);
            if rel > tolerance {
                report.failures.push(GradCheckEntry {
                    param: p,
                    row,
                    col,
                    analytic: a,
                    numeric,
                    rel_error: rel,
                });
            }
        }
    }
    Ok(report)
}
