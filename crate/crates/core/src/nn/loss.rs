use super::{NnError, Tensor};

/// Row-wise softmax with max subtraction.
pub fn softmax(logits: &Tensor) -> Tensor {
    let mut p = logits.clone();
    for r in 0..p.rows() {
        let row = p.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    p
}

/// Mean cross-entropy of `softmax(logits)` against integer labels, and its
/// gradient `(softmax − onehot) / batch` with respect to the logits.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor), NnError> {
    let (batch, classes) = (logits.rows(), logits.cols());
    if logits.shape().len() != 2 || labels.len() != batch {
        return Err(NnError::ShapeMismatch {
            expected: vec![labels.len(), classes],
            found: logits.shape().to_vec(),
        });
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(NnError::LabelOutOfRange { label, classes });
    }

    let mut grad = Tensor::zeros(&[batch, classes]);
    let mut loss = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum_exp.ln();
        loss += log_z - row[label];
        let g = grad.row_mut(r);
        for (c, gc) in g.iter_mut().enumerate() {
            *gc = (row[c] - log_z).exp() / batch as f64;
        }
        g[label] -= 1.0 / batch as f64;
    }
    Ok((loss / batch as f64, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::fd;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_logits() {
        let (loss, _) = softmax_cross_entropy(&Tensor::filled(&[3, 11], 0.7), &[0, 5, 10]).unwrap();
        assert!((loss - 11f64.ln()).abs() < 1e-12);
        assert!((loss - 2.3979).abs() < 1e-4);
    }

    #[test]
    fn near_certain() {
        let logits = Tensor::from_rows(&[vec![10.0, -10.0]]).unwrap();
        let (loss, _) = softmax_cross_entropy(&logits, &[0]).unwrap();
        assert!(loss < 1e-8);
    }

    #[test]
    fn label_out_of_range() {
        assert_eq!(
            softmax_cross_entropy(&Tensor::zeros(&[1, 3]), &[3]),
            Err(NnError::LabelOutOfRange { label: 3, classes: 3 })
        );
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let logits = Tensor::from_vec(&[4, 5], (0..20).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
        let labels = [1, 0, 4, 4];
        let (_, grad) = softmax_cross_entropy(&logits, &labels).unwrap();
        let num = fd::gradient(&logits, 1e-5, |l| softmax_cross_entropy(l, &labels).unwrap().0);
        assert!(fd::rel_error(&grad, &num) < 1e-6);
    }

    #[test]
    fn rows_sum_to_one_for_large_logits() {
        let logits = Tensor::from_rows(&[vec![1e4, -1e4, 0.0], vec![-1e4, -1e4, -1e4]]).unwrap();
        let p = softmax(&logits);
        assert!(p.all_finite());
        for r in 0..2 {
            assert!((p.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let (loss, grad) = softmax_cross_entropy(&logits, &[1, 2]).unwrap();
        assert!(loss.is_finite() && grad.all_finite());
    }
}
