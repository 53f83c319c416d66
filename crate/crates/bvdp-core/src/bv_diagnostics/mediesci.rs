//! Partitions on which a positive function stays above the average of its
//! node values up to `η`.
//!
//! Starting from the sublevel set `{ψ ≤ min ψ + η}`, the outermost points of
//! that set become nodes; the flanks left and right of them are treated the
//! same way until both ends of the interval are nodes. On a sampled profile
//! the flank minimum excludes the previous node itself and uses the samples
//! strictly beyond it, which is the one-sided limit of the piecewise-linear
//! interpolant seen from the flank.

use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Node indices into the sampled profile and the number of sweeps used.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Partition {
    pub nodes: Vec<usize>,
    pub iterations: usize,
}

/// Leftmost (or rightmost) sample of `lo..hi` whose value is within `eta`
/// of the minimum over `lo..hi`.
fn sublevel_extreme(psi: &[f64], lo: usize, hi: usize, eta: f64, leftmost: bool) -> usize {
    let m = psi[lo..hi].iter().copied().fold(f64::INFINITY, f64::min);
    let inside = |i: &usize| psi[*i] - eta <= m;
    if leftmost {
        (lo..hi).find(inside).unwrap_or(lo)
    } else {
        (lo..hi).rev().find(inside).unwrap_or(hi - 1)
    }
}

/// Builds the partition for the samples `psi` (equispaced or not; only the
/// order matters) and tolerance `eta > 0`.
pub fn mediesci_partition(psi: &[f64], eta: f64) -> Result<Partition> {
    if psi.is_empty() {
        return Err(Error::Parameter("empty profile".into()));
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::Parameter(format!("eta must be positive and finite, got {eta}")));
    }
    if let Some(i) = psi.iter().position(|v| v.is_nan() || *v <= 0.0) {
        return Err(Error::Domain(format!("profile value {} at sample {i} is not positive", psi[i])));
    }
    let n = psi.len();
    if !psi[0].is_finite() || !psi[n - 1].is_finite() {
        return Err(Error::Domain("profile must be finite at both ends".into()));
    }
    let mut left = sublevel_extreme(psi, 0, n, eta, true);
    let mut right = sublevel_extreme(psi, 0, n, eta, false);
    let mut nodes = Vec::new();
    nodes.push(left);
    if right != left {
        nodes.push(right);
    }
    let mut iterations = 1;
    while left > 0 || right < n - 1 {
        iterations += 1;
        if left > 0 {
            left = sublevel_extreme(psi, 0, left, eta, true);
            nodes.push(left);
        }
        if right < n - 1 {
            right = sublevel_extreme(psi, right + 1, n, eta, false);
            nodes.push(right);
        }
    }
    nodes.sort_unstable();
    nodes.dedup();
    Ok(Partition { nodes, iterations })
}

/// `max{ψ(a), ψ(b)}/η + 1`.
pub fn iteration_bound(psi: &[f64], eta: f64) -> f64 {
    psi[0].max(psi[psi.len() - 1]) / eta + 1.0
}

/// First sample `s` strictly inside some node interval with
/// `ψ(s) < ½(ψ(r^{j−1}) + ψ(r^j)) − η`, if any.
pub fn first_violation(psi: &[f64], nodes: &[usize], eta: f64) -> Option<usize> {
    nodes.windows(2).find_map(|w| {
        let floor = 0.5 * (psi[w[0]] + psi[w[1]]) - eta;
        (w[0] + 1..w[1]).find(|&i| psi[i] < floor)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check(psi: &[f64], eta: f64) -> Partition {
        let part = mediesci_partition(psi, eta).unwrap();
        assert_eq!(part.nodes[0], 0);
        assert_eq!(*part.nodes.last().unwrap(), psi.len() - 1);
        assert!(part.nodes.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(first_violation(psi, &part.nodes, eta), None);
        assert!(part.iterations as f64 <= iteration_bound(psi, eta));
        part
    }

    #[test]
    fn constant_profile_needs_only_the_ends() {
        let part = check(&[2.0; 17], 0.1);
        assert_eq!(part.nodes, vec![0, 16]);
        assert_eq!(part.iterations, 1);
    }

    #[test]
    fn identity_on_one_to_two() {
        let psi: Vec<f64> = (0..101).map(|i| 1.0 + i as f64 / 100.0).collect();
        let eta = 0.25;
        let part = check(&psi, eta);
        // brute force over every sample and every node pair
        for w in part.nodes.windows(2) {
            for i in w[0] + 1..w[1] {
                assert!(psi[i] >= 0.5 * (psi[w[0]] + psi[w[1]]) - eta);
            }
        }
        // nodes at the largest sample with ψ ≤ ψ(previous node) + η
        assert_eq!(part.nodes, vec![0, 25, 51, 77, 100]);
    }

    #[test]
    fn valley_is_split_on_both_flanks() {
        let psi: Vec<f64> = (0..201).map(|i| 0.1 + ((i as f64 - 120.0) / 40.0).powi(2)).collect();
        let part = check(&psi, 0.05);
        assert!(part.nodes.len() > 4);
    }

    #[test]
    fn infinite_interior_values_are_allowed() {
        let mut psi = vec![1.0; 9];
        psi[4] = f64::INFINITY;
        check(&psi, 0.5);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(mediesci_partition(&[1.0, 0.0, 1.0], 0.1), Err(Error::Domain(_))));
        assert!(matches!(mediesci_partition(&[1.0, -2.0], 0.1), Err(Error::Domain(_))));
        assert!(matches!(mediesci_partition(&[f64::INFINITY, 1.0], 0.1), Err(Error::Domain(_))));
        assert!(matches!(mediesci_partition(&[1.0, 2.0], 0.0), Err(Error::Parameter(_))));
        assert!(matches!(mediesci_partition(&[], 0.1), Err(Error::Parameter(_))));
        assert_eq!(mediesci_partition(&[3.0], 0.1).unwrap().nodes, vec![0]);
    }

    #[test]
    fn random_piecewise_linear_profiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let knots = rng.gen_range(2..12);
            let vals: Vec<f64> = (0..knots).map(|_| rng.gen_range(0.05..3.0)).collect();
            let n = rng.gen_range(20..400);
            let psi: Vec<f64> = (0..n)
                .map(|i| {
                    let x = i as f64 / (n - 1) as f64 * (knots - 1) as f64;
                    let k = (x.floor() as usize).min(knots - 2);
                    let th = x - k as f64;
                    (1.0 - th) * vals[k] + th * vals[k + 1]
                })
                .collect();
            let eta = rng.gen_range(0.01..0.5);
            check(&psi, eta);
        }
    }

    proptest::proptest! {
        #[test]
        fn partition_property_holds_exactly(
            psi in proptest::collection::vec(1e-3f64..10.0, 1..200),
            eta in 1e-3f64..2.0,
        ) {
            let part = mediesci_partition(&psi, eta).unwrap();
            proptest::prop_assert_eq!(first_violation(&psi, &part.nodes, eta), None);
            proptest::prop_assert!(part.iterations as f64 <= iteration_bound(&psi, eta));
            proptest::prop_assert_eq!(part.nodes[0], 0);
            proptest::prop_assert_eq!(*part.nodes.last().unwrap(), psi.len() - 1);
        }
    }
}
