//! Feature standardization and principal component analysis.

use super::linalg::{covariance, symmetric_eigen};
use super::{AnalysisError, FEATURE_COUNT};

/// Columns whose sample standard deviation falls below this are flagged
/// degenerate and left out of the PCA.
pub const DEGENERATE_STD: f64 = 1e-12;
/// Eigenvalues at or below this fraction of the largest count as zero
/// when determining rank.
const RANK_TOLERANCE: f64 = 1e-10;

pub const SIGN_CONVENTION: &str = "max-abs-positive";

#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationParams {
    pub mean: [f64; FEATURE_COUNT],
    pub std: [f64; FEATURE_COUNT],
    pub degenerate: [bool; FEATURE_COUNT],
}

impl StandardizationParams {
    /// z-scores one feature vector; degenerate columns map to 0.
    pub fn apply(&self, x: &[f64; FEATURE_COUNT]) -> [f64; FEATURE_COUNT] {
        std::array::from_fn(|j| {
            if self.degenerate[j] {
                0.0
            } else {
                (x[j] - self.mean[j]) / self.std[j]
            }
        })
    }
}

pub fn standardize(
    x: &[[f64; FEATURE_COUNT]],
) -> Result<(Vec<[f64; FEATURE_COUNT]>, StandardizationParams), AnalysisError> {
    let n = x.len();
    if n < 2 {
        return Err(AnalysisError::InsufficientData(format!(
            "standardizing needs at least 2 rows, got {n}"
        )));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(AnalysisError::InvalidInput("non-finite feature value".into()));
    }
    let mean: [f64; FEATURE_COUNT] =
        std::array::from_fn(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64);
    let std: [f64; FEATURE_COUNT] = std::array::from_fn(|j| {
        let ss: f64 = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    });
    let params = StandardizationParams {
        mean,
        std,
        degenerate: std.map(|s| s < DEGENERATE_STD),
    };
    let z = x.iter().map(|r| params.apply(r)).collect();
    Ok((z, params))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    /// `loadings[k]` is the k-th principal axis, a unit vector in feature
    /// space.
    pub loadings: Vec<[f64; FEATURE_COUNT]>,
    /// Eigenvalue of each axis, non-increasing.
    pub explained_variance: Vec<f64>,
    /// Whether the sign convention was applied (largest-magnitude entry of
    /// every axis positive).
    pub sign_normalized: bool,
}

impl PcaModel {
    pub fn components(&self) -> usize {
        self.loadings.len()
    }

    /// Scores of one standardized vector: loadingsᵀ·z.
    pub fn project(&self, z: &[f64; FEATURE_COUNT]) -> Vec<f64> {
        self.loadings
            .iter()
            .map(|l| l.iter().zip(z).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Maps scores back to standardized feature space.
    pub fn reconstruct(&self, scores: &[f64]) -> [f64; FEATURE_COUNT] {
        std::array::from_fn(|j| {
            self.loadings
                .iter()
                .zip(scores)
                .map(|(l, s)| l[j] * s)
                .sum()
        })
    }
}

/// Three-component PCA of standardized features.
pub fn pca_fit(z: &[[f64; FEATURE_COUNT]]) -> Result<PcaModel, AnalysisError> {
    pca_fit_components(z, 3)
}

pub fn pca_fit_components(
    z: &[[f64; FEATURE_COUNT]],
    components: usize,
) -> Result<PcaModel, AnalysisError> {
    if z.len() < 4 {
        return Err(AnalysisError::InsufficientData(format!(
            "PCA needs at least 4 rows, got {}",
            z.len()
        )));
    }
    if components == 0 || components > FEATURE_COUNT {
        return Err(AnalysisError::InvalidInput(format!(
            "component count {components} outside 1..={FEATURE_COUNT}"
        )));
    }
    let rows: Vec<Vec<f64>> = z.iter().map(|r| r.to_vec()).collect();
    let eig = symmetric_eigen(&covariance(&rows))?;
    let top = eig.values[0].max(0.0);
    let rank = eig
        .values
        .iter()
        .filter(|&&v| top > 0.0 && v > RANK_TOLERANCE * top)
        .count();
    if rank < components {
        return Err(AnalysisError::DegenerateRank {
            rank,
            needed: components,
        });
    }
    let loadings = eig.vectors[..components]
        .iter()
        .map(|v| {
            let mut l: [f64; FEATURE_COUNT] = std::array::from_fn(|j| v[j]);
            normalize_sign(&mut l);
            l
        })
        .collect();
    Ok(PcaModel {
        loadings,
        explained_variance: eig.values[..components].to_vec(),
        sign_normalized: true,
    })
}

/// Flips `v` so its largest-magnitude entry (first one on ties) is positive.
pub fn normalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for (j, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = j;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardize_small_column() {
        let x = [
            [1.0, 5.0, 0.0, 0.0, 0.0],
            [2.0, 5.0, 1.0, 0.0, 0.0],
            [3.0, 5.0, 2.0, 0.0, 0.0],
        ];
        let (z, p) = standardize(&x).unwrap();
        assert_eq!([z[0][0], z[1][0], z[2][0]], [-1.0, 0.0, 1.0]);
        assert_eq!(p.std[0], 1.0);
        assert!(p.degenerate[1]);
        assert!(!p.degenerate[2]);
        assert_eq!(z[0][1], 0.0);
        assert!(standardize(&x[..1]).is_err());
    }

    #[test]
    fn axis_aligned_variances() {
        // columns with variances 3, 2, 1, 0.5, 0.1 built from +-1 patterns
        let scales = [3f64.sqrt(), 2f64.sqrt(), 1.0, 0.5f64.sqrt(), 0.1f64.sqrt()];
        let mut z = Vec::new();
        for i in 0..32u32 {
            // orthogonal sign patterns from the bits of i
            z.push(std::array::from_fn(|j| {
                let s = if (i >> j) & 1 == 1 { 1.0 } else { -1.0 };
                s * scales[j]
            }));
        }
        // sample variance of a balanced +-a column is a^2 * n/(n-1)
        let f = 32.0 / 31.0;
        let m = pca_fit(&z).unwrap();
        for (k, want) in [3.0, 2.0, 1.0].iter().enumerate() {
            assert!((m.explained_variance[k] - want * f).abs() < 1e-12);
            assert!((m.loadings[k][k] - 1.0).abs() < 1e-12);
        }
        assert_eq!(m.project(&[0.0; 5]), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn identical_rows_are_rank_zero() {
        let z = vec![[0.0; 5]; 10];
        match pca_fit(&z) {
            Err(AnalysisError::DegenerateRank { rank: 0, needed: 3 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rank_two_data() {
        let z: Vec<[f64; 5]> = (0..10)
            .map(|i| {
                let a = i as f64;
                let b = ((i * 7) % 5) as f64;
                [a, b, a + b, 2.0 * a, b - a]
            })
            .collect();
        assert!(matches!(
            pca_fit(&z),
            Err(AnalysisError::DegenerateRank { rank: 2, .. })
        ));
    }

    #[test]
    fn sign_rule() {
        let mut v = [0.1, -0.9, 0.3];
        normalize_sign(&mut v);
        assert_eq!(v, [-0.1, 0.9, -0.3]);
        let mut tie = [-0.5, 0.5];
        normalize_sign(&mut tie);
        assert_eq!(tie, [0.5, -0.5]);
    }
}
