mod common;

use std::collections::BTreeMap;

use boolperc::osss_lab::{estimate_influences, estimate_revealments, run_algorithm};
use boolperc::rng::{derive, tag};
use boolperc::sampler::{resample_cell, sample_cells};
use boolperc::{CellCoord, ModelSpec, RadiusLaw};

fn dirac(lambda: f64) -> ModelSpec {
    ModelSpec::new(2, lambda, RadiusLaw::dirac(1.0).unwrap()).unwrap()
}

#[test]
fn unrevealed_coordinates_do_not_matter() {
    let law = RadiusLaw::truncated(RadiusLaw::power_law_c1(1.0, 2).unwrap(), 3.5).unwrap();
    let models = [dirac(0.28), dirac(0.4), ModelSpec::new(2, 0.12, law).unwrap()];
    let mut resampled = 0;
    for seed in 0..60u64 {
        let model = &models[seed as usize % 3];
        let s = [1.0, 2.0, 3.0][seed as usize % 3];
        resampled += common::determination_check(model, s, 8.0, 4.0, seed).unwrap();
    }
    assert!(resampled > 0);
}

/// Influences recomputed without the skip rule: every coordinate is
/// resampled and `f` is evaluated by pairwise search.
#[test]
fn influences_match_exhaustive_resampling() {
    let model = dirac(0.3);
    let (l, r, n, seed) = (4.0, 2.0, 60u64, 17u64);
    let got: BTreeMap<CellCoord, f64> = estimate_influences(&model, l, r, n, seed).unwrap().into_iter().collect();
    let base = derive(seed, &[tag::INFLUENCE]);
    let mut counts: BTreeMap<CellCoord, u64> = BTreeMap::new();
    for j in 0..n {
        let cells = sample_cells(&model, l, r, derive(base, &[j])).unwrap();
        let f = common::origin_to_sphere(&cells.balls, r);
        let layout = cells.layout.clone().unwrap();
        let coords = std::iter::once(CellCoord::Ghost).chain(layout.coordinates());
        for coord in coords {
            let fresh = resample_cell(&cells, &coord, derive(seed, &[tag::RESAMPLE, j])).unwrap();
            *counts.entry(coord.clone()).or_default() += u64::from(common::origin_to_sphere(&fresh.balls, r) != f);
        }
    }
    assert_eq!(got.len(), counts.len());
    let mut nonzero = 0;
    for (coord, k) in counts {
        assert_eq!(got[&coord], k as f64 / n as f64, "{coord}");
        nonzero += usize::from(k > 0);
    }
    assert!(nonzero > 3);
}

#[test]
fn revealment_is_one_for_ghost_and_bounded_by_shells() {
    let map = estimate_revealments(&dirac(0.28), 2.0, 8.0, 4.0, 300, 5).unwrap();
    let ghost = map.entries.iter().find(|e| e.coord == CellCoord::Ghost).unwrap();
    assert_eq!(ghost.delta, 1.0);
    assert!(map.entries.iter().all(|e| (0.0..=1.0).contains(&e.delta)));
    assert_eq!(map.bound_violations, 0);
    for e in &map.entries {
        if let Some(b) = e.shell_bound {
            assert!(e.delta <= b + 4.0 * (b * (1.0 - b) / 300.0).sqrt() + 1e-12, "{}", e.coord);
        }
    }
}

#[test]
fn trace_reveals_only_layout_coordinates() {
    let cells = sample_cells(&dirac(0.3), 8.0, 4.0, 3).unwrap();
    let trace = run_algorithm(&cells, 2.0, 8.0, 4.0).unwrap();
    let layout = cells.layout.as_ref().unwrap();
    assert!(trace.revealed[1..].iter().all(|c| layout.contains(c) && *c != CellCoord::Ghost));
}
