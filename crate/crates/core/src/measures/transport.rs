use std::collections::VecDeque;

use super::discrete::{check_pair, DiscreteMeasure};
use crate::error::{GameError, Result};

/// Default cap on the combined number of atoms.
pub const MAX_ATOMS: usize = 512;
/// Costs are rounded to integers after scaling the largest one to this value.
pub const COST_SCALE: f64 = 1e9;

/// Exact `W_r` between discrete measures in any dimension, by the
/// transportation simplex on integer-scaled costs `|x − y|^r`.
pub fn wasserstein_discrete(mu: &DiscreteMeasure, nu: &DiscreteMeasure, r: f64) -> Result<f64> {
    wasserstein_discrete_with(mu, nu, r, MAX_ATOMS)
}

pub fn wasserstein_discrete_with(mu: &DiscreteMeasure, nu: &DiscreteMeasure, r: f64, max_atoms: usize) -> Result<f64> {
    check_pair(mu, nu, r)?;
    let a: Vec<(&[f64], f64)> = mu.support().collect();
    let b: Vec<(&[f64], f64)> = nu.support().collect();
    if a.len() + b.len() > max_atoms {
        return Err(GameError::config(format!(
            "combined support {} exceeds the limit of {max_atoms} atoms",
            a.len() + b.len()
        )));
    }
    let cost: Vec<f64> = a
        .iter()
        .flat_map(|(x, _)| b.iter().map(move |(y, _)| dist(x, y).powf(r)))
        .collect();
    let supply: Vec<f64> = a.iter().map(|p| p.1).collect();
    // Absorb the sub-tolerance mass difference into the demands.
    let scale = mu.mass() / nu.mass();
    let demand: Vec<f64> = b.iter().map(|p| p.1 * scale).collect();
    let plan = transport_plan(&supply, &demand, &cost)?;
    let total: f64 = plan.iter().map(|&(i, j, f)| f * cost[i * b.len() + j]).sum();
    Ok(total.max(0.0).powf(1.0 / r))
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Optimal basic plan `(row, col, flow)` of the balanced transportation
/// problem with row-major costs.
pub(crate) fn transport_plan(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<Vec<(usize, usize, f64)>> {
    let m = supply.len();
    let n = demand.len();
    let cmax = cost.iter().copied().fold(0.0_f64, f64::max);
    let icost: Vec<i64> = if cmax > 0.0 {
        cost.iter().map(|c| (c / cmax * COST_SCALE).round() as i64).collect()
    } else {
        vec![0; cost.len()]
    };

    // Northwest-corner start: exactly m + n − 1 basic cells.
    let mut basis: Vec<(usize, usize, f64)> = Vec::with_capacity(m + n - 1);
    {
        let (mut ra, mut rb) = (supply.to_vec(), demand.to_vec());
        let (mut i, mut j) = (0, 0);
        loop {
            let x = ra[i].min(rb[j]);
            basis.push((i, j, x));
            ra[i] -= x;
            rb[j] -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || ra[i] <= rb[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let nodes = m + n;
    let max_iters = 50 * m * n + 1000;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut pot = vec![0i64; nodes];
    let mut parent = vec![usize::MAX; nodes];
    for _ in 0..max_iters {
        for l in adj.iter_mut() {
            l.clear();
        }
        for (k, &(i, j, _)) in basis.iter().enumerate() {
            adj[i].push(k);
            adj[m + j].push(k);
        }
        // Potentials u_i + v_j = c_ij on the spanning tree rooted at row 0.
        parent.fill(usize::MAX);
        let mut seen = vec![false; nodes];
        seen[0] = true;
        pot[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            for &k in &adj[u] {
                let (i, j, _) = basis[k];
                let v = if u < m { m + j } else { i };
                if !seen[v] {
                    seen[v] = true;
                    pot[v] = icost[i * n + j] - pot[u];
                    parent[v] = k;
                    queue.push_back(v);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(GameError::Singular("transport basis is not a spanning tree".into()));
        }

        // Dantzig pricing.
        let mut best = (0i64, 0usize, 0usize);
        for i in 0..m {
            let row = &icost[i * n..(i + 1) * n];
            for j in 0..n {
                let rc = row[j] - pot[i] - pot[m + j];
                if rc < best.0 {
                    best = (rc, i, j);
                }
            }
        }
        if best.0 >= 0 {
            return Ok(basis);
        }
        let (_, ei, ej) = best;

        // Tree paths from row ei and column ej up to their meeting point.
        let path_to_root = |mut v: usize| {
            let mut p = vec![v];
            while v != 0 {
                let (i, j, _) = basis[parent[v]];
                v = if v < m { m + j } else { i };
                p.push(v);
            }
            p
        };
        let pa = path_to_root(ei);
        let pb = path_to_root(m + ej);
        let mut ka = pa.len();
        let mut kb = pb.len();
        while ka > 0 && kb > 0 && pa[ka - 1] == pb[kb - 1] {
            ka -= 1;
            kb -= 1;
        }
        // Cycle: entering (+), then from column ej up to the apex (−, +, …),
        // then down to row ei.
        let mut cycle: Vec<usize> = Vec::new();
        for &v in &pb[..kb] {
            cycle.push(parent[v]);
        }
        for &v in pa[..ka].iter().rev() {
            cycle.push(parent[v]);
        }
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (pos, &k) in cycle.iter().enumerate() {
            if pos % 2 == 0 && basis[k].2 < theta {
                theta = basis[k].2;
                leave = k;
            }
        }
        for (pos, &k) in cycle.iter().enumerate() {
            let f = &mut basis[k].2;
            if pos % 2 == 0 {
                *f = (*f - theta).max(0.0);
            } else {
                *f += theta;
            }
        }
        basis[leave] = (ei, ej, theta);
    }
    Err(GameError::NotConverged { solver: "transport simplex", iterations: max_iters, delta: f64::NAN })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::wasserstein_1d;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_measure(rng: &mut ChaCha8Rng, k: usize, d: usize) -> DiscreteMeasure {
        let atoms = (0..k).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = raw.iter().sum();
        DiscreteMeasure::new(atoms, raw.iter().map(|w| w / s).collect()).unwrap()
    }

    /// Minimum over all vertices of the transport polytope: every spanning
    /// tree of the bipartite graph, with flows forced by leaf peeling.
    fn brute_force(supply: &[f64], demand: &[f64], cost: &[f64]) -> f64 {
        let (m, n) = (supply.len(), demand.len());
        let cells = m * n;
        let need = m + n - 1;
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << cells) {
            if mask.count_ones() as usize != need {
                continue;
            }
            let mut edges: Vec<(usize, usize)> = (0..cells).filter(|c| mask >> c & 1 == 1).map(|c| (c / n, c % n)).collect();
            let mut ra = supply.to_vec();
            let mut rb = demand.to_vec();
            let mut total = 0.0;
            let mut feasible = true;
            while !edges.is_empty() {
                let deg = |v: usize, e: &[(usize, usize)]| {
                    e.iter().filter(|&&(i, j)| if v < m { i == v } else { j == v - m }).count()
                };
                let Some(leaf) = (0..m + n).find(|&v| deg(v, &edges) == 1) else {
                    feasible = false;
                    break;
                };
                let pos = edges.iter().position(|&(i, j)| if leaf < m { i == leaf } else { j == leaf - m }).unwrap();
                let (i, j) = edges.swap_remove(pos);
                let f = if leaf < m { ra[i] } else { rb[j] };
                if f < -1e-12 {
                    feasible = false;
                    break;
                }
                ra[i] -= f;
                rb[j] -= f;
                total += f * cost[i * n + j];
            }
            if feasible && ra.iter().chain(&rb).all(|r| r.abs() < 1e-12) {
                best = best.min(total);
            }
        }
        best
    }

    #[test]
    fn identical_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mu = random_measure(&mut rng, 10, 2);
        assert_abs_diff_eq!(wasserstein_discrete(&mu, &mu, 2.0).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn square_corners() {
        let mu = DiscreteMeasure::uniform(vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let nu = DiscreteMeasure::uniform(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_abs_diff_eq!(wasserstein_discrete(&mu, &nu, 2.0).unwrap().powi(2), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn agrees_with_quantile_coupling() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mu = random_measure(&mut rng, 20, 1);
            let nu = random_measure(&mut rng, 20, 1);
            for r in [1.0, 2.0, 3.0] {
                let exact = wasserstein_1d(&mu, &nu, r).unwrap();
                let flow = wasserstein_discrete(&mu, &nu, r).unwrap();
                assert_abs_diff_eq!(exact, flow, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn matches_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (m, n) in [(2, 2), (3, 3), (4, 4), (2, 4), (4, 3)] {
            for _ in 0..5 {
                let mu = random_measure(&mut rng, m, 2);
                let nu = random_measure(&mut rng, n, 2);
                let cost: Vec<f64> = mu
                    .atoms()
                    .iter()
                    .flat_map(|x| nu.atoms().iter().map(move |y| dist(x, y).powi(2)))
                    .collect();
                let oracle = brute_force(mu.weights(), nu.weights(), &cost);
                let value = wasserstein_discrete(&mu, &nu, 2.0).unwrap().powi(2);
                assert_abs_diff_eq!(value, oracle, epsilon = 1e-9);
                // Any feasible coupling (here: independent) costs at least as much.
                let independent: f64 = (0..m)
                    .flat_map(|i| (0..n).map(move |j| (i, j)))
                    .map(|(i, j)| mu.weights()[i] * nu.weights()[j] * cost[i * n + j])
                    .sum();
                assert!(value <= independent + 1e-12);
            }
        }
    }

    #[test]
    fn support_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mu = random_measure(&mut rng, 6, 1);
        assert!(wasserstein_discrete_with(&mu, &mu, 1.0, 10).is_err());
    }

    #[test]
    fn degenerate_masses() {
        // Equal partial sums force degenerate pivots.
        let mu = DiscreteMeasure::uniform((0..8).map(|k| vec![k as f64]).collect()).unwrap();
        let nu = DiscreteMeasure::uniform((0..8).map(|k| vec![7.0 - k as f64 + 0.5]).collect()).unwrap();
        assert_abs_diff_eq!(wasserstein_discrete(&mu, &nu, 1.0).unwrap(), wasserstein_1d(&mu, &nu, 1.0).unwrap(), epsilon = 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn metric_axioms(seed in 0u64..10_000, d in 1usize..4, k in 1usize..7, r in 1.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_measure(&mut rng, k, d);
            let b = random_measure(&mut rng, k + 1, d);
            let c = random_measure(&mut rng, 3, d);
            let ab = wasserstein_discrete(&a, &b, r).unwrap();
            let ba = wasserstein_discrete(&b, &a, r).unwrap();
            let bc = wasserstein_discrete(&b, &c, r).unwrap();
            let ac = wasserstein_discrete(&a, &c, r).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-8);
            prop_assert!(ac <= ab + bc + 1e-8);
        }
    }
}
