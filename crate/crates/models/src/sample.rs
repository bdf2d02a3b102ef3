use rand::Rng;

use crate::ModelError;

/// Nucleus sampling: keeps the smallest highest-probability prefix whose mass
/// reaches `p`, renormalizes it and draws one index. Ties keep index order.
pub fn top_p_sample(probs: &[f64], p: f64, rng: &mut impl Rng) -> Result<usize, ModelError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(ModelError::InvalidConfig(format!("top_p {p} outside (0, 1]")));
    }
    if probs.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(ModelError::DegenerateDistribution("non-finite or negative mass".into()));
    }
    let total: f64 = probs.iter().sum();
    if total <= 0.0 {
        return Err(ModelError::DegenerateDistribution("all mass is zero".into()));
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|a, b| probs[*b].total_cmp(&probs[*a]));
    let mut mass = 0.0;
    let mut keep = 0;
    for &i in &order {
        mass += probs[i] / total;
        keep += 1;
        if mass >= p {
            break;
        }
    }
    let nucleus = &order[..keep];
    let nucleus_mass: f64 = nucleus.iter().map(|&i| probs[i]).sum();
    let mut u = rng.random::<f64>() * nucleus_mass;
    for &i in nucleus {
        u -= probs[i];
        if u < 0.0 {
            return Ok(i);
        }
    }
    // Rounding can leave `u` at zero after the last subtraction.
    Ok(*nucleus.iter().rev().find(|&&i| probs[i] > 0.0).expect("positive mass"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_hot_always_wins() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(top_p_sample(&[0.0, 0.0, 1.0, 0.0], 0.9, &mut rng).unwrap(), 2);
        }
    }

    #[test]
    fn full_mass_reaches_the_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let probs = [0.5, 0.3, 0.15, 0.05];
        let mut seen = [false; 4];
        for _ in 0..5000 {
            seen[top_p_sample(&probs, 1.0, &mut rng).unwrap()] = true;
        }
        assert_eq!(seen, [true; 4]);
    }

    #[test]
    fn tiny_p_is_greedy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            assert_eq!(top_p_sample(&[0.2, 0.5, 0.3], 1e-9, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(
            top_p_sample(&[0.0, 0.0], 0.9, &mut rng),
            Err(ModelError::DegenerateDistribution(_))
        ));
        assert!(top_p_sample(&[f64::NAN, 1.0], 0.9, &mut rng).is_err());
        assert!(top_p_sample(&[0.5, 0.5], 0.0, &mut rng).is_err());
    }

    proptest! {
        #[test]
        fn never_leaves_the_nucleus(
            raw in proptest::collection::vec(0.0f64..1.0, 2..12),
            p in 0.05f64..1.0,
            seed in any::<u64>(),
        ) {
            prop_assume!(raw.iter().sum::<f64>() > 1e-6);
            let total: f64 = raw.iter().sum();
            let mut sorted: Vec<f64> = raw.iter().map(|x| x / total).collect();
            sorted.sort_by(|a, b| b.total_cmp(a));
            // Smallest probability that can belong to the nucleus.
            let mut mass = 0.0;
            let mut floor = 0.0;
            for x in &sorted {
                mass += x;
                floor = *x;
                if mass >= p { break; }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..20 {
                let i = top_p_sample(&raw, p, &mut rng).unwrap();
                prop_assert!(raw[i] / total >= floor - 1e-12);
            }
        }
    }
}
