//! Multi-level spatial hash for balls with widely varying radii.
//!
//! A ball of radius `R` lives on level `ceil(log2 max(R, 1))`, whose cells have
//! side `2^level >= R`. Pairs are found by letting each ball scan its own level
//! and every coarser one, so each unordered pair is visited exactly once.

use rustc_hash::FxHashMap;
use smallvec::SmallVec;

type Key = SmallVec<[i64; 3]>;

pub fn level_of(radius: f64) -> u32 {
    let r = radius.max(1.0);
    let l = r.log2().ceil();
    // guard against log2 rounding just below an exact power of two
    let mut l = l.max(0.0) as u32;
    while ((1u64 << l) as f64) < r {
        l += 1;
    }
    l
}

struct Level {
    level: u32,
    side: f64,
    cells: FxHashMap<Key, SmallVec<[u32; 4]>>,
}

pub struct HierGrid {
    d: usize,
    levels: Vec<Level>,
}

fn cell_key(p: &[f64], side: f64) -> Key {
    p.iter().map(|&v| (v / side).floor() as i64).collect()
}

impl HierGrid {
    pub fn build(d: usize, centers: &[&[f64]], radii: &[f64]) -> Self {
        let mut by_level: Vec<Level> = Vec::new();
        for (i, (c, &r)) in centers.iter().zip(radii).enumerate() {
            let level = level_of(r);
            let pos = match by_level.binary_search_by_key(&level, |l| l.level) {
                Ok(p) => p,
                Err(p) => {
                    by_level.insert(
                        p,
                        Level { level, side: (1u64 << level) as f64, cells: FxHashMap::default() },
                    );
                    p
                }
            };
            let lv = &mut by_level[pos];
            lv.cells.entry(cell_key(c, lv.side)).or_default().push(i as u32);
        }
        Self { d, levels: by_level }
    }

    /// Calls `f(i, j)` once for every unordered pair whose hash cells are close
    /// enough that the balls could intersect. Callers apply the exact test.
    pub fn for_each_candidate(&self, centers: &[&[f64]], radii: &[f64], mut f: impl FnMut(usize, usize)) {
        let d = self.d;
        let mut lo: Key = SmallVec::from_elem(0, d);
        let mut hi: Key = SmallVec::from_elem(0, d);
        let mut cur: Key = SmallVec::from_elem(0, d);
        for (li, own) in self.levels.iter().enumerate() {
            for members in own.cells.values() {
                for &iu in members {
                    let i = iu as usize;
                    let (c, r) = (centers[i], radii[i]);
                    for other in &self.levels[li..] {
                        let same = other.level == own.level;
                        let reach = r + other.side;
                        for k in 0..d {
                            lo[k] = ((c[k] - reach) / other.side).floor() as i64;
                            hi[k] = ((c[k] + reach) / other.side).floor() as i64;
                        }
                        cur.copy_from_slice(&lo);
                        'odometer: loop {
                            if let Some(bucket) = other.cells.get(&cur) {
                                for &ju in bucket {
                                    if !same || ju > iu {
                                        f(i, ju as usize);
                                    }
                                }
                            }
                            for k in 0..d {
                                if cur[k] < hi[k] {
                                    cur[k] += 1;
                                    continue 'odometer;
                                }
                                cur[k] = lo[k];
                            }
                            break;
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels() {
        assert_eq!(level_of(0.3), 0);
        assert_eq!(level_of(1.0), 0);
        assert_eq!(level_of(1.01), 1);
        assert_eq!(level_of(2.0), 1);
        assert_eq!(level_of(4.0), 2);
        assert_eq!(level_of(1000.0), 10);
    }

    #[test]
    fn finds_every_intersecting_pair_once() {
        let pts: Vec<[f64; 2]> = vec![[0.0, 0.0], [1.9, 0.0], [10.0, 0.0], [-20.0, 3.0], [0.5, 40.0]];
        let radii = [1.0, 1.0, 7.0, 0.2, 35.0];
        let centers: Vec<&[f64]> = pts.iter().map(|p| &p[..]).collect();
        let g = HierGrid::build(2, &centers, &radii);
        let mut seen = Vec::new();
        g.for_each_candidate(&centers, &radii, |i, j| seen.push((i.min(j), i.max(j))));
        let mut uniq = seen.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), seen.len());
        for i in 0..5 {
            for j in i + 1..5 {
                let dx = pts[i][0] - pts[j][0];
                let dy = pts[i][1] - pts[j][1];
                if dx * dx + dy * dy <= (radii[i] + radii[j]).powi(2) {
                    assert!(uniq.contains(&(i, j)), "missing pair {i},{j}");
                }
            }
        }
    }
}
