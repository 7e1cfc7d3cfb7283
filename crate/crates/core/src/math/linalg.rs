use super::Tensor;
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const JITTER_SCALE: f64 = 1e-10;

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A`.
///
/// On a non-positive pivot the factorization is retried once with
/// `1e-10 * trace(A) / n` added to the diagonal.
pub fn cholesky(a: &Tensor) -> Result<Tensor> {
    let shape = a.shape();
    if shape.len() != 2 || shape[0] != shape[1] || shape[0] == 0 {
        return Err(Error::ShapeMismatch {
            expected: vec![shape.first().copied().unwrap_or(1); 2],
            got: shape.to_vec(),
        });
    }
    let n = shape[0];
    let scale = a.data().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..i {
            let diff = (a.at(i, j) - a.at(j, i)).abs();
            if diff > SYMMETRY_TOL * scale {
                return Err(Error::NotSymmetric { i, j, diff });
            }
        }
    }
    match factor(a, 0.0) {
        Ok(l) => Ok(l),
        Err(_) => {
            let trace: f64 = (0..n).map(|i| a.at(i, i)).sum();
            factor(a, JITTER_SCALE * trace / n as f64)
        }
    }
}

fn factor(a: &Tensor, jitter: f64) -> Result<Tensor> {
    let n = a.shape()[0];
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let row_j = j * n;
        let mut d = a.at(j, j) + jitter;
        for k in 0..j {
            d -= l[row_j + k] * l[row_j + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { row: j, pivot: d });
        }
        let djj = d.sqrt();
        l[row_j + j] = djj;
        for i in (j + 1)..n {
            let row_i = i * n;
            let mut s = a.at(i, j);
            for k in 0..j {
                s -= l[row_i + k] * l[row_j + k];
            }
            l[row_i + j] = s / djj;
        }
    }
    Tensor::new(vec![n, n], l)
}

/// `L z` for lower-triangular `L`, written into `out`.
pub fn lower_mul(l: &Tensor, z: &[f64], out: &mut [f64]) {
    let n = l.shape()[0];
    let data = l.data();
    for (i, o) in out.iter_mut().enumerate().take(n) {
        let row = &data[i * n..i * n + i + 1];
        *o = row.iter().zip(z).map(|(a, b)| a * b).sum();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::RngStream;

    fn reconstruct(l: &Tensor) -> Tensor {
        l.matmul(&l.transpose()).unwrap()
    }

    #[test]
    fn identity_factor() {
        let l = cholesky(&Tensor::identity(3)).unwrap();
        assert_eq!(l, Tensor::identity(3));
    }

    #[test]
    fn two_by_two() {
        let a = Tensor::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let l = cholesky(&a).unwrap();
        let expected = [2.0, 0.0, 1.0, 2f64.sqrt()];
        for (got, want) in l.data().iter().zip(expected) {
            assert!((got - want).abs() < 1e-15);
        }
        let back = reconstruct(&l);
        for (x, y) in back.data().iter().zip(a.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_rejected() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(cholesky(&a), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn asymmetric_rejected() {
        let a = Tensor::from_rows(&[vec![2.0, 1.0], vec![0.0, 2.0]]).unwrap();
        assert!(matches!(cholesky(&a), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn jitter_rescues_rank_deficient() {
        // Rank one; the jittered retry succeeds.
        let a = Tensor::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let l = cholesky(&a).unwrap();
        assert!(l.is_finite());
    }

    #[test]
    fn random_spd_round_trip() {
        let mut rng = RngStream::new(9, 0);
        for n in [1usize, 2, 5, 17, 40] {
            let m = Tensor::new(vec![n, n], rng.draw_normal(n * n).into_data()).unwrap();
            let mut a = m.transpose().matmul(&m).unwrap();
            for i in 0..n {
                let v = a.at(i, i) + n as f64;
                a.set(i, i, v);
            }
            let l = cholesky(&a).unwrap();
            let back = reconstruct(&l);
            let diff: f64 = back
                .data()
                .iter()
                .zip(a.data())
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(diff / a.frobenius_norm() < 1e-8, "n={n}");
            for i in 0..n {
                for j in (i + 1)..n {
                    assert_eq!(l.at(i, j), 0.0);
                }
            }
        }
    }
}
