//! Cross-entropy objectives. Every `log` goes through the tape's clamp at
//! [`LOG_CLAMP`](crate::diff::LOG_CLAMP). Class ids are 1-based throughout.

use crate::diff::{Matrix, Tape, Var};
use crate::error::{Error, Result};

/// Target unknown probability the classifier is trained towards during
/// separation; `0 < μ < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnknownThreshold(f64);

impl UnknownThreshold {
    pub fn new(mu: f64) -> Result<Self> {
        if mu > 0.0 && mu < 1.0 {
            Ok(UnknownThreshold(mu))
        } else {
            Err(Error::Config(format!("unknown threshold must lie in (0,1), got {mu}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for UnknownThreshold {
    fn default() -> Self {
        UnknownThreshold(0.5)
    }
}

fn one_hot(rows: usize, cols: usize, labels: impl Iterator<Item = (usize, usize)>) -> Matrix {
    let mut m = Matrix::zeros((rows, cols));
    for (r, class) in labels {
        m[[r, class - 1]] = 1.0;
    }
    m
}

/// Mean negative log-likelihood of known source labels.
///
/// `probs` is `n × (K+1)`; every label must lie in `1..=K`.
pub fn loss_source(tape: &mut Tape, probs: Var, labels: &[usize]) -> Result<Var> {
    let (rows, cols) = tape.value(probs).dim();
    if labels.len() != rows || rows == 0 {
        return Err(Error::shape(
            "loss_source",
            format!("{} labels for {rows} rows", labels.len()),
        ));
    }
    let known = cols - 1;
    if let Some(&bad) = labels.iter().find(|&&l| l == 0 || l > known) {
        return Err(Error::InvalidLabel {
            label: bad,
            reason: format!("source labels must lie in 1..={known}"),
        });
    }
    let mask = tape.leaf(one_hot(rows, cols, labels.iter().copied().enumerate()))?;
    let log_p = tape.log(probs)?;
    let picked = tape.mul(log_p, mask)?;
    let total = tape.sum(picked)?;
    tape.scale(total, -1.0 / rows as f64)
}

/// Binary cross-entropy of the unknown column (the last one) against `μ`.
pub fn loss_unknown(tape: &mut Tape, probs: Var, mu: UnknownThreshold) -> Result<Var> {
    let (rows, cols) = tape.value(probs).dim();
    if rows == 0 {
        return Err(Error::shape("loss_unknown", "empty batch"));
    }
    let mu = mu.value();
    let p = tape.select_cols(probs, &[cols - 1])?;
    let log_p = tape.log(p)?;
    let q = tape.affine(p, -1.0, 1.0)?;
    let log_q = tape.log(q)?;
    let a = tape.sum(log_p)?;
    let a = tape.scale(a, -mu / rows as f64)?;
    let b = tape.sum(log_q)?;
    let b = tape.scale(b, -(1.0 - mu) / rows as f64)?;
    tape.add(a, b)
}

#[derive(Debug, Clone, Copy)]
pub struct TargetLoss {
    pub value: Var,
    /// Rows that carried a pseudo-label. Zero means `value` is a constant 0.
    pub labeled: usize,
}

/// Mean negative log-likelihood over pseudo-labeled rows; rows with `None`
/// are ignored. Pseudo-labels may be any class in `1..=K+1`.
pub fn loss_target(tape: &mut Tape, probs: Var, pseudo: &[Option<usize>]) -> Result<TargetLoss> {
    let (rows, cols) = tape.value(probs).dim();
    if pseudo.len() != rows {
        return Err(Error::shape(
            "loss_target",
            format!("{} pseudo-labels for {rows} rows", pseudo.len()),
        ));
    }
    if let Some(bad) = pseudo.iter().flatten().find(|&&l| l == 0 || l > cols) {
        return Err(Error::InvalidLabel {
            label: *bad,
            reason: format!("pseudo-labels must lie in 1..={cols}"),
        });
    }
    let labeled = pseudo.iter().flatten().count();
    if labeled == 0 {
        return Ok(TargetLoss {
            value: tape.scalar(0.0)?,
            labeled,
        });
    }
    let pairs = pseudo
        .iter()
        .enumerate()
        .filter_map(|(r, l)| l.map(|c| (r, c)));
    let mask = tape.leaf(one_hot(rows, cols, pairs))?;
    let log_p = tape.log(probs)?;
    let picked = tape.mul(log_p, mask)?;
    let total = tape.sum(picked)?;
    Ok(TargetLoss {
        value: tape.scale(total, -1.0 / labeled as f64)?,
        labeled,
    })
}

/// Binary cross-entropy of discriminator outputs (`m×1`) against domain
/// flags: `true` for target nodes, `false` for source nodes.
pub fn loss_domain(tape: &mut Tape, predicted: Var, is_target: &[bool]) -> Result<Var> {
    let (rows, cols) = tape.value(predicted).dim();
    if cols != 1 || rows != is_target.len() || rows == 0 {
        return Err(Error::shape(
            "loss_domain",
            format!("{rows}x{cols} predictions for {} flags", is_target.len()),
        ));
    }
    let flags = Matrix::from_shape_fn((rows, 1), |(r, _)| f64::from(u8::from(is_target[r])));
    let complement = flags.mapv(|d| 1.0 - d);
    let flags = tape.leaf(flags)?;
    let complement = tape.leaf(complement)?;
    let log_d = tape.log(predicted)?;
    let not_d = tape.affine(predicted, -1.0, 1.0)?;
    let log_not_d = tape.log(not_d)?;
    let a = tape.mul(log_d, flags)?;
    let b = tape.mul(log_not_d, complement)?;
    let total = tape.add(a, b)?;
    let total = tape.sum(total)?;
    tape.scale(total, -1.0 / rows as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::LOG_CLAMP;
    use ndarray::array;

    const LN2: f64 = std::f64::consts::LN_2;

    fn eval<F: FnOnce(&mut Tape, Var) -> Result<Var>>(probs: Matrix, f: F) -> f64 {
        let mut tape = Tape::new();
        let p = tape.leaf(probs).unwrap();
        let loss = f(&mut tape, p).unwrap();
        tape.scalar_value(loss)
    }

    #[test]
    fn source_loss_values() {
        assert_eq!(
            eval(array![[0.0, 1.0, 0.0]], |t, p| loss_source(t, p, &[2])),
            0.0
        );
        let half = eval(array![[0.5, 0.3, 0.2]], |t, p| loss_source(t, p, &[1]));
        assert!((half - LN2).abs() < 1e-15);
        let pair = eval(array![[0.5, 0.3, 0.2], [0.1, 0.8, 0.1]], |t, p| {
            loss_source(t, p, &[1, 2])
        });
        assert!((pair - (LN2 - 0.8f64.ln()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn source_loss_rejects_unknown_label() {
        let mut tape = Tape::new();
        let p = tape.leaf(array![[0.2, 0.3, 0.5]]).unwrap();
        assert!(matches!(
            loss_source(&mut tape, p, &[3]),
            Err(Error::InvalidLabel { label: 3, .. })
        ));
    }

    #[test]
    fn unknown_loss_values() {
        let mu = UnknownThreshold::new(0.5).unwrap();
        let sym = eval(array![[0.25, 0.25, 0.5]], |t, p| loss_unknown(t, p, mu));
        assert!((sym - LN2).abs() < 1e-15);
        let skewed = eval(array![[0.05, 0.05, 0.9]], |t, p| loss_unknown(t, p, mu));
        let expected = -0.5 * 0.9f64.ln() - 0.5 * 0.1f64.ln();
        assert!((skewed - expected).abs() < 1e-12);
        assert!((skewed - 1.2040).abs() < 1e-4);
        assert!(UnknownThreshold::new(1.0).is_err());
        assert!(UnknownThreshold::new(0.0).is_err());
    }

    #[test]
    fn target_loss_values() {
        let mut tape = Tape::new();
        let p = tape.leaf(array![[0.2, 0.8], [0.5, 0.5]]).unwrap();
        let empty = loss_target(&mut tape, p, &[None, None]).unwrap();
        assert_eq!(empty.labeled, 0);
        assert_eq!(tape.scalar_value(empty.value), 0.0);

        let perfect = eval(array![[0.0, 0.0, 1.0]], |t, p| {
            loss_target(t, p, &[Some(3)]).map(|l| l.value)
        });
        assert_eq!(perfect, 0.0);

        let quarter = eval(array![[0.25, 0.5, 0.25], [0.3, 0.3, 0.4]], |t, p| {
            loss_target(t, p, &[Some(1), None]).map(|l| l.value)
        });
        assert!((quarter - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn domain_loss_values() {
        let uniform = eval(array![[0.5], [0.5], [0.5]], |t, d| {
            loss_domain(t, d, &[false, true, true])
        });
        assert!((uniform - LN2).abs() < 1e-15);

        let src = eval(array![[0.2]], |t, d| loss_domain(t, d, &[false]));
        assert!((src + 0.8f64.ln()).abs() < 1e-15);
        assert!((src - 0.2231).abs() < 1e-4);

        // Confidently wrong on every node: the clamp bounds the per-node loss.
        let wrong = eval(array![[0.0], [1.0]], |t, d| loss_domain(t, d, &[true, false]));
        assert!((wrong + LOG_CLAMP.ln()).abs() < 1e-12);
        assert!((wrong - 27.631).abs() < 1e-3);
        let right = eval(array![[1.0], [0.0]], |t, d| loss_domain(t, d, &[true, false]));
        assert_eq!(right, 0.0);
    }
}
