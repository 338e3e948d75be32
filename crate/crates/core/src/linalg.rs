use nalgebra::{DMatrix, DVector};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Least-squares solution of `X·b ≈ y` by thin SVD `X = U Σ Vᵀ`.
///
/// Keeps the factors needed for leave-one-out downdates:
/// `(XᵀX)⁻¹ = V Σ⁻² Vᵀ` and the hat matrix `H = U Uᵀ`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coef: DVector<f64>,
    pub fitted: DVector<f64>,
    pub residuals: DVector<f64>,
    pub gram_inverse: DMatrix<f64>,
    /// Thin left singular vectors, `n × p`.
    basis: DMatrix<f64>,
}

/// Columns of `X` take part in a linear dependency.
#[derive(Debug, Clone, PartialEq)]
pub struct RankDeficiency {
    pub rank: usize,
    pub columns: usize,
    /// Columns carrying weight in some null-space direction.
    pub dependent: Vec<usize>,
}

impl LeastSquares {
    pub fn solve(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self, RankDeficiency> {
        let (n, p) = x.shape();
        assert_eq!(n, y.len(), "design and response row counts differ");
        if p == 0 {
            return Ok(LeastSquares {
                coef: DVector::zeros(0),
                fitted: DVector::zeros(n),
                residuals: y.clone(),
                gram_inverse: DMatrix::zeros(0, 0),
                basis: DMatrix::zeros(n, 0),
            });
        }

        // Zero rows leave the column space and null space unchanged, and give
        // the SVD a full set of right singular vectors when n < p.
        let padded;
        let a = if n < p {
            padded = x.clone().resize_vertically(p, 0.0);
            &padded
        } else {
            x
        };
        let svd = a.clone().svd(true, true);
        let u = svd.u.as_ref().expect("requested U");
        let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
        let sigma = &svd.singular_values;
        let largest = sigma.max();
        let cutoff = RANK_TOLERANCE * largest;

        let rank = sigma.iter().filter(|&&s| s > cutoff && s > 0.0).count();
        if rank < p {
            let mut weight = vec![0.0f64; p];
            for (k, &s) in sigma.iter().enumerate() {
                if s <= cutoff || s == 0.0 {
                    for (w, v) in weight.iter_mut().zip(v_t.row(k).iter()) {
                        *w = w.max(v.abs());
                    }
                }
            }
            let dependent = weight
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > 1e-8)
                .map(|(j, _)| j)
                .collect();
            return Err(RankDeficiency {
                rank,
                columns: p,
                dependent,
            });
        }

        let basis = u.rows(0, n).into_owned();
        let v = v_t.transpose();
        let inv_sigma = sigma.map(|s| 1.0 / s);
        let uty = basis.tr_mul(y);
        let coef = &v * uty.component_mul(&inv_sigma);
        let scaled = &v * DMatrix::from_diagonal(&inv_sigma.map(|s| s * s));
        let gram_inverse = scaled * v.transpose();
        let fitted = x * &coef;
        let residuals = y - &fitted;
        Ok(LeastSquares {
            coef,
            fitted,
            residuals,
            gram_inverse,
            basis,
        })
    }

    pub fn rank(&self) -> usize {
        self.coef.len()
    }

    /// Hat-matrix entry `H_ij`.
    pub fn hat(&self, i: usize, j: usize) -> f64 {
        self.basis.row(i).dot(&self.basis.row(j))
    }

    pub fn residual_sum_of_squares(&self) -> f64 {
        self.residuals.norm_squared()
    }
}
