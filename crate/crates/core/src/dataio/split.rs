use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::SplitSpec;
use crate::error::{Error, Result};

/// Samples `per_class_train` and then `per_class_valid` nodes of each class
/// without replacement; the rest go to the test set. Each set is sorted.
pub fn make_split(
    labels: &[usize],
    num_classes: usize,
    per_class_train: usize,
    per_class_valid: usize,
    seed: u64,
) -> Result<SplitSpec> {
    let mut members = vec![Vec::new(); num_classes];
    for (u, &c) in labels.iter().enumerate() {
        members
            .get_mut(c)
            .ok_or(Error::LabelOutOfRange { class: c, num_classes })?
            .push(u);
    }
    let required = per_class_train + per_class_valid;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = SplitSpec {
        train: Vec::new(),
        valid: Vec::new(),
        test: Vec::new(),
    };
    for (class, nodes) in members.iter_mut().enumerate() {
        if nodes.len() < required {
            return Err(Error::ClassTooSmall {
                class,
                available: nodes.len(),
                required,
            });
        }
        nodes.shuffle(&mut rng);
        split.train.extend_from_slice(&nodes[..per_class_train]);
        split.valid.extend_from_slice(&nodes[per_class_train..required]);
        split.test.extend_from_slice(&nodes[required..]);
    }
    split.train.sort_unstable();
    split.valid.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_classes() -> Vec<usize> {
        (0..60).map(|u| u % 2).collect()
    }

    #[test]
    fn sizes_per_class() {
        let labels = two_classes();
        let s = make_split(&labels, 2, 20, 5, 1).unwrap();
        assert_eq!((s.train.len(), s.valid.len(), s.test.len()), (40, 10, 10));
        for c in 0..2 {
            assert_eq!(s.test.iter().filter(|&&u| labels[u] == c).count(), 5);
        }
        s.validate(60).unwrap();
    }

    #[test]
    fn deterministic_per_seed() {
        let labels = two_classes();
        assert_eq!(make_split(&labels, 2, 3, 3, 9).unwrap(), make_split(&labels, 2, 3, 3, 9).unwrap());
        assert_ne!(make_split(&labels, 2, 3, 3, 9).unwrap(), make_split(&labels, 2, 3, 3, 10).unwrap());
    }

    #[test]
    fn small_class_is_an_error() {
        let labels = vec![0, 0, 1];
        assert!(matches!(
            make_split(&labels, 2, 1, 1, 0),
            Err(Error::ClassTooSmall { class: 1, available: 1, required: 2 })
        ));
    }
}
