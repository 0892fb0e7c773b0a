use crate::data::dataset::{Dataset, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::rng::{SeededRng, Stream};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitResult {
    /// Ascending sample indices.
    pub train: Vec<usize>,
    /// Ascending sample indices.
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Per-class shuffled split of `indices`.
///
/// Each class first gets `floor(fraction * n_c)` training samples; the
/// shortfall against `floor(fraction * n)` is handed out one sample at a
/// time to the classes with the largest fractional remainders (ties to the
/// lower class index).
pub fn stratified_split(
    indices: &[usize],
    labels: &[u8],
    fraction: f64,
    rng: &mut SeededRng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!(
            "split fraction must be strictly between 0 and 1, got {fraction}"
        )));
    }
    let n = indices.len();
    let target = (fraction * n as f64).floor() as usize;
    if target == 0 || target == n {
        return Err(Error::invalid(format!(
            "fraction {fraction} of {n} samples leaves one side of the split empty"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for &i in indices {
        let label = *labels
            .get(i)
            .ok_or_else(|| Error::invalid(format!("sample {i} out of range")))?
            as usize;
        by_class[label].push(i);
    }
    for (c, members) in by_class.iter().enumerate() {
        if members.len() < 2 {
            return Err(Error::Data(format!(
                "class {c} has {} samples; stratified splitting needs at least 2",
                members.len()
            )));
        }
    }

    let mut take: Vec<usize> = by_class
        .iter()
        .map(|m| (fraction * m.len() as f64).floor() as usize)
        .collect();
    let mut order: Vec<usize> = (0..NUM_CLASSES).collect();
    let remainder = |c: usize| fraction * by_class[c].len() as f64 - take[c] as f64;
    order.sort_by(|&a, &b| remainder(b).total_cmp(&remainder(a)).then(a.cmp(&b)));
    let mut short = target.saturating_sub(take.iter().sum());
    for &c in order.iter().cycle().take(NUM_CLASSES * 2) {
        if short == 0 {
            break;
        }
        if take[c] < by_class[c].len() {
            take[c] += 1;
            short -= 1;
        }
    }

    let mut train = Vec::with_capacity(target);
    let mut test = Vec::with_capacity(n - target);
    for (members, &k) in by_class.iter_mut().zip(&take) {
        rng.shuffle(members);
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified, seeded train/test partition with `|train| = floor(fraction * N)`.
pub fn split_train_test(ds: &Dataset, fraction: f64, seed: u64) -> Result<SplitResult> {
    if ds.len() < 5 {
        return Err(Error::Data(format!(
            "need at least 5 samples to split, got {}",
            ds.len()
        )));
    }
    let indices: Vec<usize> = (0..ds.len()).collect();
    let mut rng = SeededRng::stream(seed, Stream::Split);
    let (train, test) = stratified_split(&indices, ds.labels(), fraction, &mut rng)?;
    Ok(SplitResult { train, test, seed })
}

/// Split arithmetic only: the train/test sizes a dataset of `n` samples yields.
pub fn split_sizes(n: usize, fraction: f64) -> (usize, usize) {
    let train = (fraction * n as f64).floor() as usize;
    (train, n - train)
}

/// One shuffled pass over `indices` in batches of `batch_size`; the last
/// batch may be shorter.
pub fn make_batches(
    indices: &[usize],
    batch_size: usize,
    rng: &mut SeededRng,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    let mut order = indices.to_vec();
    rng.shuffle(&mut order);
    Ok(order.chunks(batch_size).map(|c| c.to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::PATCH_BYTES;

    fn with_counts(counts: [usize; 4]) -> Dataset {
        let labels: Vec<u8> = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat_n(c as u8, n))
            .collect();
        Dataset::new(vec![0; labels.len() * PATCH_BYTES], labels).unwrap()
    }

    #[test]
    fn full_dataset_arithmetic() {
        assert_eq!(split_sizes(22_444, 0.8), (17_955, 4_489));
    }

    #[test]
    fn stratified_and_exact_size() {
        let ds = with_counts([77, 57, 69, 20]);
        let s = split_train_test(&ds, 0.8, 1).unwrap();
        assert_eq!(s.train.len(), (0.8f64 * 223.0).floor() as usize);
        assert_eq!(s.train.len() + s.test.len(), 223);
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..223).collect::<Vec<_>>());
        for c in 0..4 {
            let n_c = ds.class_counts()[c] as f64;
            let in_train = s.train.iter().filter(|&&i| ds.label(i) == c).count() as f64;
            assert!((in_train - 0.8 * n_c).abs() <= 1.0);
        }
    }

    #[test]
    fn guards() {
        let ds = with_counts([3, 3, 3, 3]);
        assert!(split_train_test(&ds, 1.0, 0).is_err());
        assert!(split_train_test(&ds, 0.0, 0).is_err());
        assert!(split_train_test(&with_counts([1, 3, 3, 3]), 0.8, 0).is_err());
        assert!(split_train_test(&with_counts([2, 1, 0, 1]), 0.8, 0).is_err());
    }

    #[test]
    fn deterministic() {
        let ds = with_counts([30, 30, 30, 30]);
        assert_eq!(
            split_train_test(&ds, 0.8, 5).unwrap(),
            split_train_test(&ds, 0.8, 5).unwrap()
        );
        assert_ne!(
            split_train_test(&ds, 0.8, 5).unwrap(),
            split_train_test(&ds, 0.8, 6).unwrap()
        );
    }

    #[test]
    fn batches_keep_short_tail() {
        let idx: Vec<usize> = (0..10).collect();
        let b = make_batches(&idx, 4, &mut SeededRng::new(0)).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        let mut seen: Vec<usize> = b.concat();
        seen.sort_unstable();
        assert_eq!(seen, idx);
    }

    #[test]
    fn epochs_differ_runs_repeat() {
        let idx: Vec<usize> = (0..100).collect();
        let mut rng = SeededRng::new(4);
        let e1 = make_batches(&idx, 8, &mut rng).unwrap();
        let e2 = make_batches(&idx, 8, &mut rng).unwrap();
        assert_ne!(e1, e2);
        let mut again = SeededRng::new(4);
        assert_eq!(make_batches(&idx, 8, &mut again).unwrap(), e1);
    }
}
