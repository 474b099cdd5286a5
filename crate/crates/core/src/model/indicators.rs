//! Fixed genre type indicators: unit eigenvectors of a seeded random
//! symmetric matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numerics::Tensor;

/// Dimension of each type indicator.
pub const INDICATOR_DIM: usize = 200;

/// Two unit-norm indicators, one per genre, from a `200 × 200` matrix with
/// entries in `U[-1, 1]` symmetrized as `(M + Mᵀ) / 2`.
pub fn make_type_indicators(seed: u64) -> [Tensor; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = INDICATOR_DIM;
    let raw: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let m = DMatrix::from_row_slice(n, n, &raw);
    indicators_from_matrix(&((&m + m.transpose()) * 0.5))
}

/// Unit eigenvectors of the two largest eigenvalues of a symmetric matrix.
///
/// Equal eigenvalues keep the solver's column order; each vector's first
/// nonzero component is made positive.
pub fn indicators_from_matrix(m: &DMatrix<f64>) -> [Tensor; 2] {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let pick = |k: usize| {
        let col = eig.eigenvectors.column(order[k]);
        let mut v: Vec<f64> = col.iter().copied().collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        if let Some(&first) = v.iter().find(|x| x.abs() > 1e-12) {
            if first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        Tensor::vector(v)
    };
    [pick(0), pick(1)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ops::dot;

    #[test]
    fn identity_gives_first_two_basis_vectors() {
        let [a, b] = indicators_from_matrix(&DMatrix::identity(INDICATOR_DIM, INDICATOR_DIM));
        let mut e1 = vec![0.0; INDICATOR_DIM];
        e1[0] = 1.0;
        let mut e2 = vec![0.0; INDICATOR_DIM];
        e2[1] = 1.0;
        assert_eq!(a.data(), e1.as_slice());
        assert_eq!(b.data(), e2.as_slice());
    }

    #[test]
    fn indicators_are_orthonormal() {
        let [a, b] = make_type_indicators(42);
        assert_eq!(a.len(), INDICATOR_DIM);
        assert!((a.norm() - 1.0).abs() < 1e-10);
        assert!((b.norm() - 1.0).abs() < 1e-10);
        assert!(dot(a.data(), b.data()).abs() < 1e-8);
        assert!(a.data().iter().find(|x| x.abs() > 1e-12).unwrap() > &0.0);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let x = make_type_indicators(42);
        let y = make_type_indicators(42);
        for (p, q) in x.iter().zip(&y) {
            let pb: Vec<u64> = p.data().iter().map(|v| v.to_bits()).collect();
            let qb: Vec<u64> = q.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(pb, qb);
        }
        assert_ne!(make_type_indicators(43)[0], x[0]);
    }
}
