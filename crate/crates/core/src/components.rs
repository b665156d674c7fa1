//! Connected-component labeling and the size analyses built on it.

use crate::error::{Error, Result};
use crate::mask::ClassMask;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

/// One labeled component of a class mask.
#[derive(Clone, Debug)]
pub struct Component {
    /// Pixels as (y, x), in discovery order.
    pub pixels: Vec<(usize, usize)>,
    pub size: usize,
    pub centroid: (f64, f64),
}

/// Flood-fill labeling of all pixels equal to `class_id`. Components are
/// ordered by their top-left-most pixel in row-major scan order, so the
/// output is deterministic.
pub fn connected_components(
    mask: &ClassMask,
    class_id: u8,
    connectivity: Connectivity,
) -> Result<Vec<Component>> {
    if class_id > mask.max_class().max(2) {
        return Err(Error::Data(format!("invalid class id {class_id}")));
    }
    let (h, w) = mask.dims();
    let mut visited = vec![false; h * w];
    let mut out = Vec::new();
    let neighbours: &[(isize, isize)] = match connectivity {
        Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
        Connectivity::Eight => &[
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ],
    };
    let mut stack = Vec::new();
    for start in 0..h * w {
        if visited[start] || mask.data()[start] != class_id {
            continue;
        }
        let mut pixels = Vec::new();
        let (mut sum_y, mut sum_x) = (0.0f64, 0.0f64);
        visited[start] = true;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let (y, x) = (idx / w, idx % w);
            pixels.push((y, x));
            sum_y += y as f64;
            sum_x += x as f64;
            for &(dy, dx) in neighbours {
                let ny = y as isize + dy;
                let nx = x as isize + dx;
                if ny < 0 || nx < 0 || ny as usize >= h || nx as usize >= w {
                    continue;
                }
                let nidx = ny as usize * w + nx as usize;
                if !visited[nidx] && mask.data()[nidx] == class_id {
                    visited[nidx] = true;
                    stack.push(nidx);
                }
            }
        }
        let size = pixels.len();
        out.push(Component {
            centroid: (sum_y / size as f64, sum_x / size as f64),
            size,
            pixels,
        });
    }
    Ok(out)
}

/// Component-size distribution across a set of masks.
#[derive(Clone, Debug, serde::Serialize)]
pub struct SizeHistogram {
    /// Strictly increasing bin edges in pixels; bin i covers [edges[i], edges[i+1]).
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub sizes: Vec<usize>,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    /// Center of a secondary local maximum of the histogram, if any.
    pub secondary_mode: Option<f64>,
}

/// Uniform bin edges [0, max) with the given width, plus a final edge.
pub fn uniform_bins(width: f64, max: f64) -> Vec<f64> {
    let mut edges = Vec::new();
    let mut e = 0.0;
    while e < max {
        edges.push(e);
        e += width;
    }
    edges.push(max);
    edges
}

pub fn size_histogram(
    masks: &[&ClassMask],
    class_id: u8,
    connectivity: Connectivity,
    edges: &[f64],
) -> Result<SizeHistogram> {
    if edges.len() < 2 || edges.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::Config(
            "histogram needs at least two strictly increasing edges".into(),
        ));
    }
    let mut sizes = Vec::new();
    for mask in masks {
        for comp in connected_components(mask, class_id, connectivity)? {
            sizes.push(comp.size);
        }
    }
    let mut counts = vec![0u64; edges.len() - 1];
    for &s in &sizes {
        let v = s as f64;
        for i in 0..counts.len() {
            if v >= edges[i] && v < edges[i + 1] {
                counts[i] += 1;
                break;
            }
        }
    }
    let (mean, median) = if sizes.is_empty() {
        (None, None)
    } else {
        let mean = sizes.iter().sum::<usize>() as f64 / sizes.len() as f64;
        let mut sorted = sizes.clone();
        sorted.sort_unstable();
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 0 {
            (sorted[mid - 1] + sorted[mid]) as f64 / 2.0
        } else {
            sorted[mid] as f64
        };
        (Some(mean), Some(median))
    };

    // Local maxima of the binned counts, ranked by height; the second one is
    // the secondary mode.
    let mut peaks: Vec<(u64, usize)> = Vec::new();
    for i in 0..counts.len() {
        let left = if i == 0 { 0 } else { counts[i - 1] };
        let right = if i + 1 == counts.len() { 0 } else { counts[i + 1] };
        if counts[i] > 0 && counts[i] >= left && counts[i] > right {
            peaks.push((counts[i], i));
        }
    }
    peaks.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let secondary_mode = peaks
        .get(1)
        .map(|&(_, i)| (edges[i] + edges[i + 1]) / 2.0);

    Ok(SizeHistogram {
        edges: edges.to_vec(),
        counts,
        sizes,
        mean,
        median,
        secondary_mode,
    })
}

/// Number of components not larger than `max_size` — the "tiny speckles"
/// count of noisy predictions.
pub fn speckle_count(
    mask: &ClassMask,
    class_id: u8,
    connectivity: Connectivity,
    max_size: usize,
) -> Result<usize> {
    Ok(connected_components(mask, class_id, connectivity)?
        .iter()
        .filter(|c| c.size <= max_size)
        .count())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(h: usize, w: usize, ones: &[(usize, usize)]) -> ClassMask {
        let mut m = ClassMask::zeros(h, w).unwrap();
        for &(y, x) in ones {
            m.set(y, x, 1);
        }
        m
    }

    #[test]
    fn empty_mask_has_no_components() {
        let m = ClassMask::zeros(4, 4).unwrap();
        assert!(connected_components(&m, 1, Connectivity::Eight)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn solid_block() {
        let m = mask(
            5,
            5,
            &[(1, 1), (1, 2), (1, 3), (2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (3, 3)],
        );
        let comps = connected_components(&m, 1, Connectivity::Eight).unwrap();
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].size, 9);
        assert_eq!(comps[0].centroid, (2.0, 2.0));
    }

    #[test]
    fn diagonal_touch_depends_on_connectivity() {
        let m = mask(3, 3, &[(0, 0), (1, 1)]);
        assert_eq!(
            connected_components(&m, 1, Connectivity::Eight).unwrap().len(),
            1
        );
        assert_eq!(
            connected_components(&m, 1, Connectivity::Four).unwrap().len(),
            2
        );
    }

    #[test]
    fn components_partition_class_pixels() {
        use rand::Rng;
        let mut rng = crate::seeds::rng(31);
        let m = ClassMask::from_vec(
            20,
            20,
            (0..400).map(|_| rng.random_range(0..2u8)).collect(),
        )
        .unwrap();
        let comps = connected_components(&m, 1, Connectivity::Eight).unwrap();
        let total: usize = comps.iter().map(|c| c.size).sum();
        let expected = m.data().iter().filter(|&&v| v == 1).count();
        assert_eq!(total, expected);
        let mut seen = std::collections::HashSet::new();
        for c in &comps {
            for p in &c.pixels {
                assert!(seen.insert(*p), "pixel in two components");
            }
        }
    }

    #[test]
    fn histogram_binning() {
        let masks: Vec<ClassMask> = vec![
            mask(4, 4, &[(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (2, 2)]),
            mask(4, 4, &[(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (2, 2)]),
            mask(6, 6, &[
                (0, 0), (0, 1), (0, 2), (0, 3), (0, 4),
                (1, 0), (1, 1), (1, 2), (1, 3), (1, 4),
                (2, 0), (2, 1), (2, 2), (2, 3), (2, 4),
                (3, 0), (3, 1), (3, 2), (3, 3), (3, 4),
                (4, 0), (4, 1), (4, 2), (4, 3), (4, 4),
            ]),
        ];
        let refs: Vec<&ClassMask> = masks.iter().collect();
        // Sizes {9, 9, 25}, bins [0,10) and [10,30).
        let h = size_histogram(&refs, 1, Connectivity::Eight, &[0.0, 10.0, 30.0]).unwrap();
        assert_eq!(h.counts, vec![2, 1]);
        assert_eq!(h.mean, Some((9.0 + 9.0 + 25.0) / 3.0));
    }

    #[test]
    fn empty_histogram_flags_undefined_mean() {
        let m = ClassMask::zeros(4, 4).unwrap();
        let h = size_histogram(&[&m], 1, Connectivity::Eight, &[0.0, 10.0]).unwrap();
        assert_eq!(h.counts, vec![0]);
        assert!(h.mean.is_none());
        assert!(h.median.is_none());
    }

    #[test]
    fn speckles_counted_below_threshold() {
        let clean = mask(
            12,
            12,
            &(0..10)
                .flat_map(|y| (0..10).map(move |x| (y + 1, x + 1)))
                .collect::<Vec<_>>(),
        );
        assert_eq!(speckle_count(&clean, 1, Connectivity::Eight, 10).unwrap(), 0);

        let salted = mask(9, 9, &[(0, 0), (4, 4), (8, 8)]);
        assert_eq!(speckle_count(&salted, 1, Connectivity::Eight, 10).unwrap(), 3);
    }

    #[test]
    fn speckle_count_matches_filter_oracle() {
        use rand::Rng;
        let mut rng = crate::seeds::rng(32);
        let m = ClassMask::from_vec(
            24,
            24,
            (0..576).map(|_| u8::from(rng.random_range(0.0..1.0) < 0.2)).collect(),
        )
        .unwrap();
        let comps = connected_components(&m, 1, Connectivity::Eight).unwrap();
        let oracle = comps.iter().filter(|c| c.size <= 10).count();
        assert_eq!(
            speckle_count(&m, 1, Connectivity::Eight, 10).unwrap(),
            oracle
        );
        assert!(oracle <= comps.len());
    }
}
