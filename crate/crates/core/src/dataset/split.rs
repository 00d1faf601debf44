use std::collections::{BTreeMap, BTreeSet};

use super::{DatasetError, Label, Manifest, Result, Split};
use crate::rng::SplitMix64;

/// Sample-level validation quotas per class: `round(total * fraction)` samples
/// overall, shared out by largest remainder, each class keeping at least one
/// sample in either fold.
fn quotas(class_sizes: &[usize; 2], fraction: f64) -> [usize; 2] {
    let total: usize = class_sizes.iter().sum();
    let target = (total as f64 * fraction + 0.5).floor() as usize;
    let exact: Vec<f64> = class_sizes.iter().map(|&n| n as f64 * fraction).collect();
    let mut q = [exact[0].floor() as usize, exact[1].floor() as usize];
    let mut order = [0usize, 1];
    // Larger remainder first; on a tie the larger class, then class order.
    order.sort_by(|&a, &b| {
        let ra = exact[a] - q[a] as f64;
        let rb = exact[b] - q[b] as f64;
        rb.partial_cmp(&ra)
            .unwrap()
            .then(class_sizes[b].cmp(&class_sizes[a]))
            .then(a.cmp(&b))
    });
    let mut left = target.saturating_sub(q[0] + q[1]);
    for &c in order.iter().cycle().take(2 * left.max(1)) {
        if left == 0 {
            break;
        }
        if q[c] < class_sizes[c] {
            q[c] += 1;
            left -= 1;
        }
    }
    for c in 0..2 {
        q[c] = q[c].clamp(1, class_sizes[c] - 1);
    }
    q
}

/// Assigns every record to train or val, grouping by `sample_id` so all frames
/// of one physical sample land in the same fold.
pub fn split_manifest(manifest: &Manifest, val_fraction: f64, seed: u64) -> Result<Manifest> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(DatasetError::InvalidArgument(format!(
            "val_fraction must lie in (0, 1), got {val_fraction}"
        )));
    }
    let mut class_of: BTreeMap<&str, Label> = BTreeMap::new();
    for r in &manifest.records {
        if let Some(prev) = class_of.insert(&r.sample_id, r.label()) {
            if prev != r.label() {
                return Err(DatasetError::MixedSample {
                    sample_id: r.sample_id.clone(),
                });
            }
        }
    }
    let groups: [Vec<&str>; 2] = [Label::Unadulterated, Label::Adulterated]
        .map(|label| class_of.iter().filter(|(_, &l)| l == label).map(|(&id, _)| id).collect());
    for (label, ids) in [Label::Unadulterated, Label::Adulterated].iter().zip(&groups) {
        if ids.len() < 2 {
            return Err(DatasetError::TooFewSamples {
                class: *label,
                found: ids.len(),
            });
        }
    }
    let q = quotas(&[groups[0].len(), groups[1].len()], val_fraction);
    let mut rng = SplitMix64::new(seed);
    let mut val: BTreeSet<&str> = BTreeSet::new();
    for (mut ids, quota) in groups.into_iter().zip(q) {
        rng.shuffle(&mut ids);
        val.extend(&ids[..quota]);
    }
    let mut out = manifest.clone();
    for r in &mut out.records {
        r.split = if val.contains(r.sample_id.as_str()) { Split::Val } else { Split::Train };
    }
    out.provenance.push(format!("split val_fraction={val_fraction} seed={seed}"));
    Ok(out)
}
