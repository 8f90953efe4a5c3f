use crate::{Error, Result};

fn check_shapes<P: AsRef<[f64]>, T: AsRef<[f64]>>(predictions: &[P], targets: &[T]) -> Result<()> {
    if predictions.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if predictions.len() != targets.len() {
        return Err(Error::Length {
            expected: targets.len(),
            found: predictions.len(),
        });
    }
    for (p, t) in predictions.iter().zip(targets) {
        if p.as_ref().len() != t.as_ref().len() {
            return Err(Error::Length {
                expected: t.as_ref().len(),
                found: p.as_ref().len(),
            });
        }
    }
    Ok(())
}

/// Mean over samples of the squared Euclidean distance between prediction
/// and target vectors.
pub fn mse_loss<P: AsRef<[f64]>, T: AsRef<[f64]>>(predictions: &[P], targets: &[T]) -> Result<f64> {
    check_shapes(predictions, targets)?;
    let total: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            p.as_ref()
                .iter()
                .zip(t.as_ref())
                .map(|(y, l)| (l - y) * (l - y))
                .sum::<f64>()
        })
        .sum();
    Ok(total / predictions.len() as f64)
}

/// Fraction of (sample, position) pairs whose prediction sign matches the
/// target sign. Zero counts as positive.
pub fn accuracy<P: AsRef<[f64]>, T: AsRef<[f64]>>(predictions: &[P], targets: &[T]) -> Result<f64> {
    check_shapes(predictions, targets)?;
    let sign = |v: f64| v >= 0.0;
    let (mut hits, mut count) = (0usize, 0usize);
    for (p, t) in predictions.iter().zip(targets) {
        for (y, l) in p.as_ref().iter().zip(t.as_ref()) {
            hits += usize::from(sign(*y) == sign(*l));
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyBatch);
    }
    Ok(hits as f64 / count as f64)
}
