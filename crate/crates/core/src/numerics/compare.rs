//! Comparison of eigenvalue sets: multiset distance, Hausdorff distance and
//! convex-hull containment, plus degeneracy binning.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Above this size multisets are compared by sorted-key matching.
pub const BOTTLENECK_LIMIT: usize = 2000;

/// Radius used to group numerically degenerate eigenvalues.
pub const DEGENERACY_RADIUS: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchMethod {
    Bottleneck,
    SortedKey,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MultisetDistance {
    pub distance: f64,
    pub method: MatchMethod,
}

/// Smallest `max_i |a_i - b_π(i)|` over bijections `π`, found by binary
/// search over candidate thresholds with a Hopcroft-Karp feasibility test.
/// Larger inputs fall back to matching both lists in canonical order, which
/// gives an upper bound that is tight for well-separated spectra.
pub fn multiset_distance(a: &[C64], b: &[C64]) -> Result<MultisetDistance> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("multisets of size {} and {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Ok(MultisetDistance { distance: 0.0, method: MatchMethod::Bottleneck });
    }
    if a.len() > BOTTLENECK_LIMIT {
        let mut x = a.to_vec();
        let mut y = b.to_vec();
        let key = |z: &C64, w: &C64| z.re.total_cmp(&w.re).then(z.im.total_cmp(&w.im));
        x.sort_by(key);
        y.sort_by(key);
        let distance = x.iter().zip(&y).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        return Ok(MultisetDistance { distance, method: MatchMethod::SortedKey });
    }
    let n = a.len();
    let dist: Vec<f64> = a.iter().flat_map(|p| b.iter().map(move |q| (p - q).norm())).collect();
    let mut candidates = dist.clone();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    // the optimum is at least the largest nearest-neighbour distance
    let lower = (0..n).map(|i| dist[i * n..(i + 1) * n].iter().copied().fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
    let mut lo = candidates.partition_point(|&c| c < lower);
    let mut hi = candidates.len() - 1;
    while lo < hi {
        let mid = (lo + hi) / 2;
        if perfect_matching(n, &dist, candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(MultisetDistance { distance: candidates[lo], method: MatchMethod::Bottleneck })
}

/// Hopcroft-Karp on the bipartite graph `{(i, j) : dist[i n + j] <= t}`.
fn perfect_matching(n: usize, dist: &[f64], t: f64) -> bool {
    const NIL: usize = usize::MAX;
    let adj: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| dist[i * n + j] <= t).collect()).collect();
    if adj.iter().any(Vec::is_empty) {
        return false;
    }
    let mut match_l = vec![NIL; n];
    let mut match_r = vec![NIL; n];
    let mut layer = vec![0usize; n];
    let mut matched = 0;
    loop {
        // BFS from free left vertices
        let mut queue: Vec<usize> = Vec::new();
        for i in 0..n {
            if match_l[i] == NIL {
                layer[i] = 0;
                queue.push(i);
            } else {
                layer[i] = usize::MAX;
            }
        }
        let mut found = false;
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            for &v in &adj[u] {
                let w = match_r[v];
                if w == NIL {
                    found = true;
                } else if layer[w] == usize::MAX {
                    layer[w] = layer[u] + 1;
                    queue.push(w);
                }
            }
        }
        if !found {
            return matched == n;
        }
        let mut iter = vec![0usize; n];
        for i in 0..n {
            if match_l[i] == NIL && augment(i, &adj, &mut match_l, &mut match_r, &mut layer, &mut iter) {
                matched += 1;
            }
        }
        if matched == n {
            return true;
        }
    }
}

/// Iterative layered DFS for one augmenting path from `root`.
fn augment(root: usize, adj: &[Vec<usize>], match_l: &mut [usize], match_r: &mut [usize], layer: &mut [usize], iter: &mut [usize]) -> bool {
    const NIL: usize = usize::MAX;
    let mut stack = vec![root];
    while let Some(&u) = stack.last() {
        if iter[u] == adj[u].len() {
            layer[u] = usize::MAX;
            stack.pop();
            continue;
        }
        let v = adj[u][iter[u]];
        iter[u] += 1;
        let w = match_r[v];
        if w == NIL {
            // flip the path recorded on the stack
            let mut v = v;
            while let Some(u) = stack.pop() {
                let prev = match_l[u];
                match_l[u] = v;
                match_r[v] = u;
                v = prev;
            }
            return true;
        }
        if layer[w] == layer[u].wrapping_add(1) {
            stack.push(w);
        }
    }
    false
}

/// Symmetric Hausdorff distance between two finite point sets.
pub fn hausdorff(a: &[C64], b: &[C64]) -> f64 {
    let directed = |x: &[C64], y: &[C64]| x.iter().map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    directed(a, b).max(directed(b, a))
}

fn cross(o: C64, a: C64, b: C64) -> f64 {
    (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
}

/// Counter-clockwise convex hull (Andrew's monotone chain), collinear points
/// dropped.
pub fn convex_hull(points: &[C64]) -> Vec<C64> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut hull: Vec<C64> = Vec::with_capacity(2 * p.len());
    for &q in &p {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
            hull.pop();
        }
        hull.push(q);
    }
    let lower_len = hull.len() + 1;
    for &q in p.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
            hull.pop();
        }
        hull.push(q);
    }
    hull.pop();
    hull
}

fn segment_distance(p: C64, a: C64, b: C64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Distance from `p` to the hull polygon, zero when `p` is inside.
pub fn hull_distance(p: C64, hull: &[C64]) -> f64 {
    match hull.len() {
        0 => f64::INFINITY,
        1 => (p - hull[0]).norm(),
        2 => segment_distance(p, hull[0], hull[1]),
        n => {
            let inside = (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], p) >= 0.0);
            if inside {
                0.0
            } else {
                (0..n).map(|i| segment_distance(p, hull[i], hull[(i + 1) % n])).fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// Largest distance of any point of `inner` outside the hull of `outer`.
pub fn hull_excess(inner: &[C64], outer: &[C64]) -> f64 {
    let hull = convex_hull(outer);
    inner.iter().map(|&p| hull_distance(p, &hull)).fold(0.0, f64::max)
}

/// Distance between a multiset and its complex conjugate.
pub fn conjugation_asymmetry(z: &[C64]) -> Result<f64> {
    let conj: Vec<C64> = z.iter().map(|c| c.conj()).collect();
    Ok(multiset_distance(z, &conj)?.distance)
}

/// A cluster of eigenvalues whose single-linkage distance is below the radius.
#[derive(Clone, Debug, Serialize)]
pub struct DegeneracyBin {
    pub re: f64,
    pub im: f64,
    pub multiplicity: usize,
}

/// Groups eigenvalues into single-linkage clusters of radius `radius`;
/// each bin reports its mean.
pub fn degeneracy_bins(z: &[C64], radius: f64) -> Vec<DegeneracyBin> {
    let n = z.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| z[i].re.total_cmp(&z[j].re));
    for a in 0..n {
        for b in a + 1..n {
            let (i, j) = (order[a], order[b]);
            if z[j].re - z[i].re >= radius {
                break;
            }
            if (z[i] - z[j]).norm() < radius {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut bins: Vec<DegeneracyBin> = groups
        .values()
        .map(|g| {
            let mean = g.iter().map(|&i| z[i]).sum::<C64>() / g.len() as f64;
            DegeneracyBin { re: mean.re, im: mean.im, multiplicity: g.len() }
        })
        .collect();
    bins.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    bins
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn bottleneck_beats_greedy() {
        // greedy nearest matching would pair 0 with 0.9 and leave 2.0 for 1.0
        let a = [c(0.0, 0.0), c(1.0, 0.0)];
        let b = [c(0.9, 0.0), c(-0.5, 0.0)];
        let d = multiset_distance(&a, &b).unwrap();
        assert!((d.distance - 0.5).abs() < 1e-15);
        assert_eq!(d.method, MatchMethod::Bottleneck);
    }

    #[test]
    fn permutations_have_zero_distance() {
        let a: Vec<C64> = (0..50).map(|k| c(k as f64 * 0.1, (k * k % 7) as f64)).collect();
        let mut b = a.clone();
        b.reverse();
        assert_eq!(multiset_distance(&a, &b).unwrap().distance, 0.0);
        assert!(multiset_distance(&a, &b[1..]).is_err());
    }

    #[test]
    fn hull_of_square_with_interior_points() {
        let pts = [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1.0), c(0.0, 1.0), c(0.5, 0.5), c(0.5, 0.0)];
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert_eq!(hull_distance(c(0.2, 0.7), &h), 0.0);
        assert!((hull_distance(c(2.0, 0.5), &h) - 1.0).abs() < 1e-15);
        assert!((hull_excess(&[c(0.5, -0.25)], &pts) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn hausdorff_and_bins() {
        assert!((hausdorff(&[c(0.0, 0.0)], &[c(0.0, 0.0), c(3.0, 4.0)]) - 5.0).abs() < 1e-15);
        let z = [c(0.0, 0.0), c(1e-9, 0.0), c(-8.0, 0.0), c(-8.0, 5e-8), c(-8.0, 1.0)];
        let bins = degeneracy_bins(&z, DEGENERACY_RADIUS);
        let mult: Vec<usize> = bins.iter().map(|b| b.multiplicity).collect();
        assert_eq!(mult, vec![2, 2, 1]);
    }
}
