use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::game::WeightMatrix;
use crate::linalg::sym_min_eig;

/// Partition statistics `𝒲ₖ`, `𝒲̃ₖ` of one class `I_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionStat {
    pub class: Vec<usize>,
    /// `min{1, Σ_{i∈I_k} |w_i·|₂², Σ_{j∉I_k} |w_·j|₂²}`.
    pub w_k: f64,
    /// `min{1, Σ_{i∉I_k} |w_i·|₂², Σ_{j∈I_k} |w_·j|₂²}`.
    pub w_tilde_k: f64,
}

/// Regularity statistics of an interaction matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub n: usize,
    /// `|w|_Fr`.
    pub frobenius: f64,
    /// `max_i |w_i·|₂`.
    pub max_row_l2: f64,
    /// `max_j |w_·j|₁`.
    pub max_col_l1: f64,
    /// `λ_min(Sym(w))`.
    pub sym_min_eig: f64,
    /// `|w|²_Fr · max_i |w_i·|₂²`.
    pub dd_product: f64,
    pub partition: Option<Vec<PartitionStat>>,
}

pub fn graph_stats(w: &WeightMatrix, partition: Option<&[Vec<usize>]>) -> Result<GraphStats> {
    let n = w.n();
    let m = w.matrix();
    let row_sq: Vec<f64> = (0..n).map(|i| m.row(i).iter().map(|v| v * v).sum()).collect();
    let col_sq: Vec<f64> = (0..n).map(|j| m.column(j).iter().map(|v| v * v).sum()).collect();
    let fro_sq: f64 = row_sq.iter().sum();
    let max_row_sq = row_sq.iter().copied().fold(0.0, f64::max);
    let max_col_l1 = (0..n).map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);

    let partition = match partition {
        None => None,
        Some(classes) => {
            let mut owner = vec![usize::MAX; n];
            for (k, class) in classes.iter().enumerate() {
                for &i in class {
                    if i >= n {
                        return Err(GameError::config(format!("partition index {i} out of range for n = {n}")));
                    }
                    if owner[i] != usize::MAX {
                        return Err(GameError::config(format!(
                            "partition classes {} and {k} both contain {i}",
                            owner[i]
                        )));
                    }
                    owner[i] = k;
                }
            }
            if let Some(i) = owner.iter().position(|&o| o == usize::MAX) {
                return Err(GameError::config(format!("partition does not cover index {i}")));
            }
            Some(
                classes
                    .iter()
                    .enumerate()
                    .map(|(k, class)| {
                        let (mut rows_in, mut rows_out, mut cols_in, mut cols_out) = (0.0, 0.0, 0.0, 0.0);
                        for i in 0..n {
                            if owner[i] == k {
                                rows_in += row_sq[i];
                                cols_in += col_sq[i];
                            } else {
                                rows_out += row_sq[i];
                                cols_out += col_sq[i];
                            }
                        }
                        PartitionStat {
                            class: class.clone(),
                            w_k: 1.0_f64.min(rows_in).min(cols_out),
                            w_tilde_k: 1.0_f64.min(rows_out).min(cols_in),
                        }
                    })
                    .collect(),
            )
        }
    };

    let frobenius = fro_sq.sqrt();
    let max_row_l2 = max_row_sq.sqrt();
    Ok(GraphStats {
        n,
        frobenius,
        max_row_l2,
        max_col_l1,
        sym_min_eig: sym_min_eig(m),
        // Built from the reported norms so the identity holds bit-for-bit.
        dd_product: frobenius.powi(2) * max_row_l2.powi(2),
        partition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_weight_matrix, WeightKind};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn complete_four() {
        let w = build_weight_matrix(&WeightKind::Complete, 4, 0).unwrap();
        let s = graph_stats(&w, None).unwrap();
        assert_abs_diff_eq!(s.max_row_l2.powi(2), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.frobenius.powi(2), 4.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.dd_product, 4.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.max_col_l1, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.sym_min_eig, -1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn full_partition_collapses() {
        let w = build_weight_matrix(&WeightKind::Complete, 6, 0).unwrap();
        let all: Vec<usize> = (0..6).collect();
        let s = graph_stats(&w, Some(&[all])).unwrap();
        let p = &s.partition.unwrap()[0];
        assert_eq!(p.w_k, 0.0);
        assert_eq!(p.w_tilde_k, 0.0);
    }

    #[test]
    fn zero_weights() {
        let s = graph_stats(&WeightMatrix::zero(5), Some(&[vec![0, 1], vec![2, 3, 4]])).unwrap();
        assert_eq!((s.frobenius, s.max_row_l2, s.max_col_l1, s.sym_min_eig, s.dd_product), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert!(s.partition.unwrap().iter().all(|p| p.w_k == 0.0 && p.w_tilde_k == 0.0));
    }

    #[test]
    fn bad_partitions() {
        let w = WeightMatrix::zero(4);
        assert!(graph_stats(&w, Some(&[vec![0, 1], vec![1, 2, 3]])).is_err());
        assert!(graph_stats(&w, Some(&[vec![0, 1], vec![2]])).is_err());
        assert!(graph_stats(&w, Some(&[vec![0, 1, 2, 3, 4]])).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn matches_brute_force(n in 2usize..16, p in 0.2f64..1.0, seed in 0u64..500, cut in 1usize..15) {
            let w = build_weight_matrix(&WeightKind::ErdosRenyiNormalized { p }, n, seed).unwrap();
            let cut = cut.min(n - 1);
            let classes = vec![(0..cut).collect::<Vec<_>>(), (cut..n).collect::<Vec<_>>()];
            let s = graph_stats(&w, Some(&classes)).unwrap();
            let mut fro = 0.0;
            let mut max_row: f64 = 0.0;
            for i in 0..n {
                let mut r = 0.0;
                for j in 0..n {
                    r += w.get(i, j) * w.get(i, j);
                }
                fro += r;
                max_row = max_row.max(r);
            }
            prop_assert!((s.dd_product - fro * max_row).abs() <= 1e-13);
            prop_assert_eq!(s.dd_product, s.frobenius.powi(2) * s.max_row_l2.powi(2));
            for (k, stat) in s.partition.unwrap().iter().enumerate() {
                let inside = |i: usize| classes[k].contains(&i);
                let mut a = 0.0;
                let mut b = 0.0;
                let mut c = 0.0;
                let mut e = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let v = w.get(i, j) * w.get(i, j);
                        if inside(i) { a += v } else { c += v }
                        if inside(j) { e += v } else { b += v }
                    }
                }
                prop_assert!((stat.w_k - a.min(b).min(1.0)).abs() <= 1e-14);
                prop_assert!((stat.w_tilde_k - c.min(e).min(1.0)).abs() <= 1e-14);
            }
        }
    }
}
