//! Points, norms and box distances in `R^d`.

use smallvec::SmallVec;

/// A point of `R^d`; inline storage covers `d <= 3`.
pub type Point = SmallVec<[f64; 3]>;

/// Integer lattice point of `Z^d`.
pub type LatticePoint = SmallVec<[i64; 3]>;

#[inline]
pub fn norm_sq(p: &[f64]) -> f64 {
    p.iter().map(|v| v * v).sum()
}

#[inline]
pub fn norm(p: &[f64]) -> f64 {
    norm_sq(p).sqrt()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Closed balls `B_ra^a` and `B_rb^b` intersect.
#[inline]
pub fn balls_intersect(a: &[f64], ra: f64, b: &[f64], rb: f64) -> bool {
    let s = ra + rb;
    dist_sq(a, b) <= s * s
}

/// Lattice cell `x` whose unit box `x + [-1/2, 1/2)^d` contains `p`.
pub fn cell_of(p: &[f64]) -> LatticePoint {
    p.iter().map(|v| (v + 0.5).floor() as i64).collect()
}

/// Euclidean distance from `p` to the closed unit box centered at `x`.
pub fn dist_point_to_box(p: &[f64], x: &[i64]) -> f64 {
    p.iter()
        .zip(x)
        .map(|(v, &c)| {
            let g = ((v - c as f64).abs() - 0.5).max(0.0);
            g * g
        })
        .sum::<f64>()
        .sqrt()
}

/// Smallest and largest distance from the origin to the closed unit box at `x`.
pub fn box_origin_range(x: &[i64]) -> (f64, f64) {
    let mut lo = 0.0;
    let mut hi = 0.0;
    for &c in x {
        let c = (c as f64).abs();
        let near = (c - 0.5).max(0.0);
        let far = c + 0.5;
        lo += near * near;
        hi += far * far;
    }
    (lo.sqrt(), hi.sqrt())
}

/// Smallest and largest distance between points of the closed unit boxes at `x` and `y`.
pub fn box_box_range(x: &[i64], y: &[i64]) -> (f64, f64) {
    let mut lo = 0.0;
    let mut hi = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let t = (a - b).abs() as f64;
        let near = (t - 1.0).max(0.0);
        let far = t + 1.0;
        lo += near * near;
        hi += far * far;
    }
    (lo.sqrt(), hi.sqrt())
}

/// Distance from the closed unit box at `x` to the sphere of radius `s` about the origin.
pub fn box_sphere_dist(x: &[i64], s: f64) -> f64 {
    let (lo, hi) = box_origin_range(x);
    (lo - s).max(s - hi).max(0.0)
}

/// Every lattice point of the cube `[-m, m]^d`, in lexicographic order.
pub fn lattice_cube(d: usize, m: i64) -> impl Iterator<Item = LatticePoint> {
    let side = (2 * m + 1) as usize;
    let total = side.pow(d as u32);
    (0..total).map(move |mut k| {
        let mut x: LatticePoint = smallvec::smallvec![0; d];
        for slot in x.iter_mut().rev() {
            *slot = (k % side) as i64 - m;
            k /= side;
        }
        x
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_ranges() {
        let (lo, hi) = box_origin_range(&[0, 0]);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.5f64.hypot(0.5)).abs() < 1e-15);
        let (lo, _) = box_origin_range(&[3, 0]);
        assert_eq!(lo, 2.5);
        assert_eq!(box_sphere_dist(&[3, 0], 1.0), 1.5);
        assert_eq!(box_sphere_dist(&[0, 0], 5.0), 5.0 - 0.5f64.hypot(0.5));
        assert_eq!(box_box_range(&[0, 0], &[2, 0]).0, 1.0);
    }

    #[test]
    fn cells_are_half_open() {
        assert_eq!(cell_of(&[0.5, -0.5]).as_slice(), &[1, 0]);
        assert_eq!(cell_of(&[0.49, -0.51]).as_slice(), &[0, -1]);
    }

    #[test]
    fn cube_is_lexicographic() {
        let pts: Vec<_> = lattice_cube(2, 1).collect();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0].as_slice(), &[-1, -1]);
        assert_eq!(pts[1].as_slice(), &[-1, 0]);
        assert_eq!(pts[8].as_slice(), &[1, 1]);
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
    }
}
