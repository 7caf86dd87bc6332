//! The isotropic ground set: edge `e` is replaced by `t_e` exchangeable
//! copies. Copies are never materialized; every operation works on counts.

use num_traits::{One, Zero};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Hypergeometric};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::EdgeId;
use crate::rational::{ceil_u64, int, Rational};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsotropicGroundSet {
    /// Copies per edge.
    pub copies: Vec<u64>,
    pub total: u64,
    #[serde(serialize_with = "crate::rational::serialize")]
    pub gamma: Rational,
    /// `K = sum_e q_e`.
    #[serde(serialize_with = "crate::rational::serialize")]
    pub mass: Rational,
    pub m: usize,
}

impl IsotropicGroundSet {
    /// Upper bound `q_e / t_e` on the marginal of any single copy of `e`.
    pub fn per_copy_bound(&self, q: &[Rational], e: EdgeId) -> Rational {
        &q[e] / int(self.copies[e] as i64)
    }
}

/// `t_e = ceil(gamma * m * q_e / K)`.
pub fn isotropic_transform(q: &[Rational], gamma: &Rational) -> Result<IsotropicGroundSet> {
    if q.is_empty() {
        return Err(Error::InvalidSpec("no edges to transform".into()));
    }
    if q.iter().any(|x| *x <= Rational::zero()) {
        return Err(Error::InvalidSpec("overestimates must be positive".into()));
    }
    if *gamma < Rational::one() {
        return Err(Error::InvalidSpec(format!("gamma must be at least 1, got {gamma}")));
    }
    let mass: Rational = q.iter().sum();
    let scale = gamma * int(q.len() as i64) / &mass;
    let copies: Vec<u64> = q.iter().map(|x| ceil_u64(&(&scale * x))).collect();
    Ok(IsotropicGroundSet {
        total: copies.iter().sum(),
        copies,
        gamma: gamma.clone(),
        mass,
        m: q.len(),
    })
}

/// A multiset of copies stored as `(edge, count)` pairs sorted by edge with
/// no zero counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CopyMultiset {
    entries: Vec<(EdgeId, u64)>,
}

impl CopyMultiset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts(counts: impl IntoIterator<Item = (EdgeId, u64)>) -> Self {
        let mut entries: Vec<_> = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        entries.sort_unstable();
        let mut merged: Vec<(EdgeId, u64)> = Vec::with_capacity(entries.len());
        for (e, c) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == e => last.1 += c,
                _ => merged.push((e, c)),
            }
        }
        CopyMultiset { entries: merged }
    }

    pub fn entries(&self) -> &[(EdgeId, u64)] {
        &self.entries
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn count(&self, e: EdgeId) -> u64 {
        self.entries
            .binary_search_by_key(&e, |x| x.0)
            .map_or(0, |i| self.entries[i].1)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn union(&self, other: &CopyMultiset) -> CopyMultiset {
        Self::from_counts(self.entries.iter().chain(&other.entries).copied())
    }
}

/// Thinning plan for one machine: its owned edges with their copy counts
/// and the running prefix sums over them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ThinningPlan {
    edges: Vec<EdgeId>,
    prefix: Vec<u64>,
}

impl ThinningPlan {
    pub fn new(owned: &[EdgeId], copies: &[u64]) -> Self {
        let mut acc = 0;
        let prefix = owned
            .iter()
            .map(|&e| {
                acc += copies[e];
                acc
            })
            .collect();
        ThinningPlan {
            edges: owned.to_vec(),
            prefix,
        }
    }

    pub fn total(&self) -> u64 {
        self.prefix.last().copied().unwrap_or(0)
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }
}

/// Keeps each owned copy independently with probability `p`.
///
/// The number of kept copies is drawn first, then a uniform set of that
/// many copy positions; this is the same law as one coin per copy.
pub fn bernoulli_thin<R: Rng + ?Sized>(plan: &ThinningPlan, p: f64, rng: &mut R) -> CopyMultiset {
    let total = plan.total();
    if total == 0 {
        return CopyMultiset::new();
    }
    if p >= 1.0 {
        let mut prev = 0;
        return CopyMultiset::from_counts(plan.edges.iter().zip(&plan.prefix).map(|(&e, &s)| {
            let c = s - prev;
            prev = s;
            (e, c)
        }));
    }
    let kept = Binomial::new(total, p).expect("p in [0, 1)").sample(rng);
    if kept == 0 {
        return CopyMultiset::new();
    }
    let mut positions: Vec<u64> = index::sample(rng, total as usize, kept as usize)
        .into_iter()
        .map(|x| x as u64)
        .collect();
    positions.sort_unstable();
    let mut counts = Vec::new();
    let mut slot = 0;
    for pos in positions {
        while plan.prefix[slot] <= pos {
            slot += 1;
        }
        match counts.last_mut() {
            Some((e, c)) if *e == plan.edges[slot] => *c += 1,
            _ => counts.push((plan.edges[slot], 1)),
        }
    }
    CopyMultiset::from_counts(counts)
}

/// Draws `draws` items without replacement from groups of sizes `counts`.
pub fn hypergeometric_split<R: Rng + ?Sized>(counts: &[u64], draws: u64, rng: &mut R) -> Vec<u64> {
    let mut population: u64 = counts.iter().sum();
    assert!(draws <= population, "cannot draw {draws} of {population}");
    let mut left = draws;
    let mut out = Vec::with_capacity(counts.len());
    for &c in counts {
        let x = if left == 0 || c == 0 {
            0
        } else if c == population {
            left
        } else {
            Hypergeometric::new(population, c, left)
                .expect("valid hypergeometric parameters")
                .sample(rng)
        };
        out.push(x);
        population -= c;
        left -= x;
    }
    out
}

/// Uniform size-`t` sub-multiset of `r`, treating copies as distinct.
pub fn down_step<R: Rng + ?Sized>(r: &CopyMultiset, t: u64, rng: &mut R) -> Result<CopyMultiset> {
    let have = r.total();
    if have < t {
        return Err(Error::InsufficientSample { have, need: t });
    }
    if have == t {
        return Ok(r.clone());
    }
    let counts: Vec<u64> = r.entries.iter().map(|e| e.1).collect();
    let split = hypergeometric_split(&counts, t, rng);
    Ok(CopyMultiset::from_counts(
        r.entries.iter().map(|e| e.0).zip(split),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn transform_examples() {
        let iso = isotropic_transform(&vec![int(1); 7], &int(1)).unwrap();
        assert_eq!(iso.copies, vec![1; 7]);
        assert_eq!(iso.total, 7);

        let iso = isotropic_transform(&vec![ratio(2, 3); 3], &int(3)).unwrap();
        assert_eq!(iso.copies, vec![3, 3, 3]);
        assert_eq!(iso.total, 9);
        assert_eq!(iso.mass, int(2));
        assert!(iso.total <= 2 * 3 * 3);
    }

    #[test]
    fn transform_rejects_bad_input() {
        assert!(isotropic_transform(&[int(0), int(1)], &int(1)).is_err());
        assert!(isotropic_transform(&[int(1)], &ratio(1, 2)).is_err());
    }

    #[test]
    fn near_isotropy_at_large_gamma() {
        let q = vec![ratio(1, 2), ratio(1, 3), int(1), ratio(9, 10), ratio(1, 7)];
        let gamma = int(5 * 5 * 5);
        let iso = isotropic_transform(&q, &gamma).unwrap();
        let cap = &iso.mass / (&gamma * int(5));
        for e in 0..q.len() {
            assert!(iso.per_copy_bound(&q, e) <= cap);
        }
        assert!(iso.total <= 2 * 125 * 5);
    }

    #[test]
    fn thinning_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let plan = ThinningPlan::new(&[2, 5], &[0, 0, 4, 0, 0, 7]);
        let all = bernoulli_thin(&plan, 1.0, &mut rng);
        assert_eq!(all.entries(), &[(2, 4), (5, 7)]);
        let empty = ThinningPlan::new(&[], &[]);
        assert!(bernoulli_thin(&empty, 0.5, &mut rng).is_empty());
        assert!(bernoulli_thin(&plan, 0.0, &mut rng).is_empty());
    }

    #[test]
    fn thinning_huge_copy_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let plan = ThinningPlan::new(&[0], &[1_000_000]);
        let trials = 10_000;
        let sum: u64 = (0..trials)
            .map(|_| bernoulli_thin(&plan, 1e-6, &mut rng).total())
            .sum();
        let mean = sum as f64 / trials as f64;
        // mean 1, std of the mean 0.01
        assert!((mean - 1.0).abs() < 0.03, "mean {mean}");
    }

    #[test]
    fn thinning_per_edge_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let plan = ThinningPlan::new(&[0, 1, 2], &[10, 30, 60]);
        let trials = 20_000;
        let mut sums = [0u64; 3];
        for _ in 0..trials {
            let z = bernoulli_thin(&plan, 0.1, &mut rng);
            for (e, c) in z.entries() {
                assert!(*c <= [10, 30, 60][*e]);
                sums[*e] += c;
            }
        }
        for (e, expect) in [1.0, 3.0, 6.0].iter().enumerate() {
            let got = sums[e] as f64 / trials as f64;
            assert!((got - expect).abs() < 0.08, "edge {e}: {got}");
        }
    }

    #[test]
    fn down_step_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = CopyMultiset::from_counts([(0, 2), (1, 3)]);
        assert_eq!(down_step(&r, 5, &mut rng).unwrap(), r);
        assert!(down_step(&r, 0, &mut rng).unwrap().is_empty());
        assert!(matches!(
            down_step(&r, 6, &mut rng),
            Err(Error::InsufficientSample { have: 5, need: 6 })
        ));
    }

    #[test]
    fn down_step_hypergeometric_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = CopyMultiset::from_counts([(0, 2), (1, 2)]);
        let trials = 100_000;
        let mut hist = [0u32; 3];
        for _ in 0..trials {
            let z = down_step(&r, 2, &mut rng).unwrap();
            assert_eq!(z.total(), 2);
            hist[z.count(0) as usize] += 1;
        }
        let expect = [1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0];
        for k in 0..3 {
            let f = f64::from(hist[k]) / trials as f64;
            assert!((f - expect[k]).abs() < 0.01, "{k}: {f}");
        }
    }

    #[test]
    fn multiset_ops() {
        let a = CopyMultiset::from_counts([(3, 1), (1, 2), (3, 2), (4, 0)]);
        assert_eq!(a.entries(), &[(1, 2), (3, 3)]);
        assert_eq!(a.total(), 5);
        assert_eq!(a.count(4), 0);
        let b = a.union(&CopyMultiset::from_counts([(1, 1), (2, 1)]));
        assert_eq!(b.entries(), &[(1, 3), (2, 1), (3, 3)]);
        assert_eq!(b.support().collect::<Vec<_>>(), vec![1, 2, 3]);
    }
}
