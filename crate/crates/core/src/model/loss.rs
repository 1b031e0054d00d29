use super::tensor::{Matrix, Scalar};
use super::ModelError;
use crate::codec::BitWidthSpec;

/// Probabilities are clipped to `[BCE_EPS, 1 - BCE_EPS]` before the log.
pub const BCE_EPS: f64 = 1e-7;

fn check<T: Scalar>(pred: &Matrix<T>, target: &Matrix<T>, layout: &BitWidthSpec) -> Result<(), ModelError> {
    let expected = (pred.rows(), layout.diff_total());
    for (what, actual) in [("predictions", pred.shape()), ("targets", target.shape())] {
        if actual != expected {
            return Err(ModelError::ShapeMismatch {
                what,
                expected,
                actual,
            });
        }
    }
    Ok(())
}

/// Binary cross entropy over predicted points (rows): per point, the sum
/// over attributes of the mean BCE over that attribute's bits; averaged
/// over all rows. Stack the rows of a batch to get the batch loss.
pub fn bce_loss<T: Scalar>(pred: &Matrix<T>, target: &Matrix<T>, layout: &BitWidthSpec) -> Result<f64, ModelError> {
    check(pred, target, layout)?;
    if pred.rows() == 0 {
        return Err(ModelError::EmptyBatch);
    }
    let offsets = layout.diff_offsets();
    let mut total = 0.0;
    for r in 0..pred.rows() {
        let (p, y) = (pred.row(r), target.row(r));
        for (&off, &w) in offsets.iter().zip(&layout.diff) {
            let mut acc = 0.0;
            for b in off..off + w {
                let pb = p[b].as_f64().clamp(BCE_EPS, 1.0 - BCE_EPS);
                let yb = y[b].as_f64();
                acc -= yb * pb.ln() + (1.0 - yb) * (1.0 - pb).ln();
            }
            total += acc / w as f64;
        }
    }
    Ok(total / pred.rows() as f64)
}

/// Gradient with respect to the pre-sigmoid logits, `(p - y) / (rows * M_j)`,
/// where `rows` is the number of points the loss is averaged over.
pub fn bce_grad<T: Scalar>(
    pred: &Matrix<T>,
    target: &Matrix<T>,
    layout: &BitWidthSpec,
    rows: usize,
) -> Result<Matrix<T>, ModelError> {
    check(pred, target, layout)?;
    let offsets = layout.diff_offsets();
    let mut g = Matrix::zeros(pred.rows(), pred.cols());
    for r in 0..pred.rows() {
        let (p, y) = (pred.row(r), target.row(r));
        let gr = g.row_mut(r);
        for (&off, &w) in offsets.iter().zip(&layout.diff) {
            let scale = T::one() / T::lit((rows * w) as f64);
            for b in off..off + w {
                gr[b] = (p[b] - y[b]) * scale;
            }
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> BitWidthSpec {
        BitWidthSpec::default()
    }

    #[test]
    fn perfect_prediction_is_near_zero() {
        let mut t = Matrix::<f64>::zeros(2, 48);
        for (i, v) in t.data_mut().iter_mut().enumerate() {
            *v = (i % 3 == 0) as u8 as f64;
        }
        let loss = bce_loss(&t, &t, &layout()).unwrap();
        assert!(loss <= 6.0 * -(1.0 - BCE_EPS).ln() + 1e-15, "{loss}");
    }

    #[test]
    fn half_probability_costs_ln2_per_bit() {
        let p = Matrix::from_vec(1, 48, vec![0.5; 48]);
        let y = Matrix::from_vec(1, 48, vec![1.0; 48]);
        let loss = bce_loss(&p, &y, &layout()).unwrap();
        // six attributes, each a mean of ln 2
        assert!((loss - 6.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((std::f64::consts::LN_2 - 0.693147).abs() < 1e-6);
    }

    #[test]
    fn batch_order_does_not_matter() {
        let a: Vec<f64> = (0..96).map(|i| ((i * 37) % 97) as f64 / 97.0).collect();
        let y: Vec<f64> = (0..96).map(|i| ((i * 11) % 2) as f64).collect();
        let p = Matrix::from_vec(2, 48, a.clone());
        let t = Matrix::from_vec(2, 48, y.clone());
        let swapped_p = p.slice_rows(1, 1).vstack(&p.slice_rows(0, 1));
        let swapped_t = t.slice_rows(1, 1).vstack(&t.slice_rows(0, 1));
        let l1 = bce_loss(&p, &t, &layout()).unwrap();
        let l2 = bce_loss(&swapped_p, &swapped_t, &layout()).unwrap();
        assert!((l1 - l2).abs() < 1e-15);
    }

    #[test]
    fn grad_matches_difference_quotient_in_logits() {
        let logits: Vec<f64> = (0..48).map(|i| (i as f64 * 0.37).sin() * 2.0).collect();
        let y: Vec<f64> = (0..48).map(|i| (i % 2) as f64).collect();
        let t = Matrix::from_vec(1, 48, y);
        let probs = |z: &[f64]| Matrix::from_vec(1, 48, z.iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect());
        let g = bce_grad(&probs(&logits), &t, &layout(), 1).unwrap();
        let h = 1e-6;
        for b in [0, 7, 8, 30, 47] {
            let mut zp = logits.clone();
            zp[b] += h;
            let mut zm = logits.clone();
            zm[b] -= h;
            let fd = (bce_loss(&probs(&zp), &t, &layout()).unwrap() - bce_loss(&probs(&zm), &t, &layout()).unwrap()) / (2.0 * h);
            assert!((fd - g.get(0, b)).abs() < 1e-7, "bit {b}: {fd} vs {}", g.get(0, b));
        }
    }

    #[test]
    fn shape_mismatch() {
        let p = Matrix::<f64>::zeros(1, 47);
        assert!(matches!(bce_loss(&p, &p, &layout()), Err(ModelError::ShapeMismatch { .. })));
    }
}
