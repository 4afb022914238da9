//! Distance and coverage primitives.

use crate::error::{EngineError, Result};
use crate::scalar::Real;
use crate::types::{HeuristicFunction, Prototype};

/// Euclidean distance between two feature vectors of equal dimension.
pub fn distance<F: Real>(a: &[F], b: &[F]) -> Result<F> {
    if a.len() != b.len() {
        return Err(EngineError::DimensionMismatch { left: a.len(), right: b.len() });
    }
    let mut acc = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        acc = acc + d * d;
    }
    Ok(acc.sqrt())
}

/// Index of the prototype whose centroid is closest to `x`, plus that
/// distance. Ties break toward the lowest index.
pub fn nearest_prototype<F: Real>(h: &HeuristicFunction<F>, x: &[F]) -> Result<(usize, F)> {
    let mut best: Option<(usize, F)> = None;
    for (i, p) in h.prototypes.iter().enumerate() {
        let d = distance(&p.centroid, x)?;
        match best {
            Some((_, bd)) if d >= bd => {}
            _ => best = Some((i, d)),
        }
    }
    best.ok_or(EngineError::EmptyHeuristic)
}

/// Whether `x` falls inside the prototype's slack-inflated hypersphere:
/// `distance(x, centroid) <= radius * (1 + slack)`.
///
/// A zero-radius prototype covers only its own centroid, whatever the slack.
pub fn covers<F: Real>(p: &Prototype<F>, x: &[F], slack: F) -> Result<bool> {
    let d = distance(&p.centroid, x)?;
    Ok(d <= p.radius * (F::one() + slack))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::LabelId;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn proto(centroid: Vec<f64>, radius: f64) -> Prototype {
        Prototype {
            centroid,
            radius,
            mean_distance: radius / 2.0,
            support: 1,
            frequencies: BTreeMap::from([(LabelId(0), 1)]),
        }
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_relative_eq!(
            distance(&[1.0, 1.0], &[2.0, 3.0]).unwrap(),
            5.0f64.sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn distance_dimension_mismatch() {
        assert_eq!(
            distance(&[0.0], &[0.0, 1.0]).unwrap_err(),
            EngineError::DimensionMismatch { left: 1, right: 2 }
        );
    }

    #[test]
    fn nearest_prototype_examples() {
        let h = HeuristicFunction {
            id: 0,
            prototypes: vec![proto(vec![-1.0, 0.0], 1.0), proto(vec![1.0, 0.0], 1.0)],
            rng_seed: 0,
        };
        // Equidistant: the tie goes to index 0.
        let (idx, d) = nearest_prototype(&h, &[0.0, 0.0]).unwrap();
        assert_eq!(idx, 0);
        assert_eq!(d, 1.0);

        let single = HeuristicFunction { id: 0, prototypes: vec![proto(vec![2.0, 2.0], 1.0)], rng_seed: 0 };
        let (idx, d) = nearest_prototype(&single, &[2.0, 2.0]).unwrap();
        assert_eq!((idx, d), (0, 0.0));
    }

    #[test]
    fn nearest_prototype_empty_is_an_error() {
        let empty: HeuristicFunction = HeuristicFunction { id: 0, prototypes: vec![], rng_seed: 0 };
        assert_eq!(nearest_prototype(&empty, &[0.0]).unwrap_err(), EngineError::EmptyHeuristic);
    }

    #[test]
    fn covers_respects_slack() {
        let p = proto(vec![0.0, 0.0], 2.0);
        assert!(covers(&p, &[1.0, 0.0], 0.0).unwrap());
        assert!(!covers(&p, &[2.1, 0.0], 0.0).unwrap());
        // Slack inflates the boundary to 2.2.
        assert!(covers(&p, &[2.1, 0.0], 0.1).unwrap());
    }

    #[test]
    fn zero_radius_covers_only_centroid() {
        let p = proto(vec![1.0, 1.0], 0.0);
        assert!(covers(&p, &[1.0, 1.0], 0.5).unwrap());
        assert!(!covers(&p, &[1.0, 1.0 + 1e-9], 0.5).unwrap());
    }

    proptest! {
        #[test]
        fn triangle_inequality(
            a in prop::collection::vec(-100.0f64..100.0, 3),
            b in prop::collection::vec(-100.0f64..100.0, 3),
            c in prop::collection::vec(-100.0f64..100.0, 3),
        ) {
            let ab = distance(&a, &b).unwrap();
            let bc = distance(&b, &c).unwrap();
            let ac = distance(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9);
            // Symmetry and identity come along for free.
            prop_assert!((ab - distance(&b, &a).unwrap()).abs() <= 1e-12);
            prop_assert!(distance(&a, &a).unwrap() == 0.0);
        }

        #[test]
        fn nearest_matches_brute_force(
            centroids in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 2), 1..8),
            x in prop::collection::vec(-50.0f64..50.0, 2),
        ) {
            let h = HeuristicFunction {
                id: 0,
                prototypes: centroids.iter().cloned().map(|c| proto(c, 1.0)).collect(),
                rng_seed: 0,
            };
            let (idx, d) = nearest_prototype(&h, &x).unwrap();
            let mut best = 0usize;
            for (i, c) in centroids.iter().enumerate() {
                if distance(c, &x).unwrap() < distance(&centroids[best], &x).unwrap() {
                    best = i;
                }
            }
            prop_assert_eq!(idx, best);
            prop_assert!((d - distance(&centroids[best], &x).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn covers_is_monotone_in_slack(
            r in 0.0f64..10.0,
            d in 0.0f64..15.0,
            s1 in 0.0f64..1.0,
            s2 in 0.0f64..1.0,
        ) {
            let p = proto(vec![0.0], r);
            let x = vec![d];
            let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            if covers(&p, &x, lo).unwrap() {
                prop_assert!(covers(&p, &x, hi).unwrap());
            }
        }
    }
}
