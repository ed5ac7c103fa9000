//! Frontier geometry over (score ↑, latency ↓, peak memory ↓).

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{NasError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePoint<P> {
    pub score: f64,
    pub latency_ms: f64,
    pub peak_memory_bytes: f64,
    pub payload: P,
}

impl<P> ObjectivePoint<P> {
    pub fn new(score: f64, latency_ms: f64, peak_memory_bytes: f64, payload: P) -> Self {
        ObjectivePoint {
            score,
            latency_ms,
            peak_memory_bytes,
            payload,
        }
    }

    /// Objectives as a minimization vector `(latency, memory, -score)`.
    pub fn minimized(&self) -> [f64; 3] {
        [self.latency_ms, self.peak_memory_bytes, -self.score]
    }

    pub fn is_finite(&self) -> bool {
        self.score.is_finite() && self.latency_ms.is_finite() && self.peak_memory_bytes.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum FrontierMode {
    #[default]
    NonDominated,
    LowerConvexHull,
}

impl FrontierMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "nd" | "non-dominated" | "NonDominated" => Some(FrontierMode::NonDominated),
            "hull" | "lower-convex-hull" | "LowerConvexHull" => Some(FrontierMode::LowerConvexHull),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier<P> {
    pub points: Vec<ObjectivePoint<P>>,
    pub mode: FrontierMode,
}

impl<P> Frontier<P> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Exact dominance: no worse everywhere, strictly better somewhere.
pub fn dominates<P, Q>(a: &ObjectivePoint<P>, b: &ObjectivePoint<Q>) -> bool {
    a.score >= b.score
        && a.latency_ms <= b.latency_ms
        && a.peak_memory_bytes <= b.peak_memory_bytes
        && (a.score > b.score
            || a.latency_ms < b.latency_ms
            || a.peak_memory_bytes < b.peak_memory_bytes)
}

/// Epsilon dominance for noisy costs: within `eps` everywhere and better by
/// more than `eps` somewhere.
pub fn eps_dominates<P, Q>(a: &ObjectivePoint<P>, b: &ObjectivePoint<Q>, eps: f64) -> bool {
    a.score >= b.score - eps
        && a.latency_ms <= b.latency_ms + eps
        && a.peak_memory_bytes <= b.peak_memory_bytes + eps
        && (a.score > b.score + eps
            || a.latency_ms < b.latency_ms - eps
            || a.peak_memory_bytes < b.peak_memory_bytes - eps)
}

fn lex_order<P>(a: &ObjectivePoint<P>, b: &ObjectivePoint<P>) -> Ordering {
    let (x, y) = (a.minimized(), b.minimized());
    x[2].total_cmp(&y[2])
        .then(x[0].total_cmp(&y[0]))
        .then(x[1].total_cmp(&y[1]))
}

/// Indices of the non-dominated points, in input order.
pub fn non_dominated_indices<P>(points: &[ObjectivePoint<P>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| lex_order(&points[i], &points[j]).then(i.cmp(&j)));
    // A dominator always sorts strictly before what it dominates, and
    // dominance is transitive, so checking the kept set suffices.
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if !kept.iter().any(|&k| dominates(&points[k], &points[i])) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

/// The maximal set under dominance. Exact duplicates are all kept.
pub fn non_dominated<P: Clone>(points: &[ObjectivePoint<P>]) -> Frontier<P> {
    Frontier {
        points: non_dominated_indices(points)
            .into_iter()
            .map(|i| points[i].clone())
            .collect(),
        mode: FrontierMode::NonDominated,
    }
}

pub fn non_dominated_eps<P: Clone>(points: &[ObjectivePoint<P>], eps: f64) -> Frontier<P> {
    let kept = points
        .iter()
        .filter(|p| !points.iter().any(|q| eps_dominates(q, p, eps)))
        .cloned()
        .collect();
    Frontier {
        points: kept,
        mode: FrontierMode::NonDominated,
    }
}

const CLIP_TOL: f64 = 1e-12;

type Weight = [f64; 2];

/// Clips a convex polygon in weight space by `c0*w1 + c1*w2 + c2 <= 0`.
fn clip(poly: &[Weight], c: [f64; 3]) -> Vec<Weight> {
    let g = |w: &Weight| c[0] * w[0] + c[1] * w[1] + c[2];
    let mut out = Vec::with_capacity(poly.len() + 1);
    for (i, cur) in poly.iter().enumerate() {
        let next = &poly[(i + 1) % poly.len()];
        let (gc, gn) = (g(cur), g(next));
        let (cur_in, next_in) = (gc <= CLIP_TOL, gn <= CLIP_TOL);
        if cur_in {
            out.push(*cur);
        }
        if cur_in != next_in {
            let t = gc / (gc - gn);
            if t.is_finite() {
                out.push([
                    cur[0] + t * (next[0] - cur[0]),
                    cur[1] + t * (next[1] - cur[1]),
                ]);
            }
        }
    }
    out
}

/// Whether `p` minimizes `w·x` over `others` for some strictly positive `w`.
fn is_supported(p: &[f64; 3], others: impl Iterator<Item = [f64; 3]>) -> bool {
    // Weights w = (w1, w2, 1 - w1 - w2) on the 2-simplex.
    let mut poly: Vec<Weight> = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    for q in others {
        let a = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
        poly = clip(&poly, [a[0] - a[2], a[1] - a[2], a[2]]);
        if poly.is_empty() {
            return false;
        }
    }
    // The vertex centroid lies in the relative interior of the feasible
    // polygon, which meets the open simplex iff the centroid does.
    let n = poly.len() as f64;
    let w1 = poly.iter().map(|w| w[0]).sum::<f64>() / n;
    let w2 = poly.iter().map(|w| w[1]).sum::<f64>() / n;
    w1 > CLIP_TOL && w2 > CLIP_TOL && 1.0 - w1 - w2 > CLIP_TOL
}

/// Supported non-dominated points: those minimizing a strictly positive
/// weighting of `(latency, memory, -score)`, i.e. the convex-hull vertices
/// facing the minimization octant. Collinear/coplanar points on such a face
/// are kept.
pub fn lower_convex_hull<P: Clone>(points: &[ObjectivePoint<P>]) -> Frontier<P> {
    let nd = non_dominated_indices(points);
    let raw: Vec<[f64; 3]> = nd.iter().map(|&i| points[i].minimized()).collect();
    // Supportedness is invariant under positive per-axis scaling; normalize
    // so the clipping tolerance is meaningful.
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for v in &raw {
        for k in 0..3 {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    let scaled: Vec<[f64; 3]> = raw
        .iter()
        .map(|v| {
            let mut s = [0.0; 3];
            for k in 0..3 {
                let span = hi[k] - lo[k];
                s[k] = if span > 0.0 {
                    (v[k] - lo[k]) / span
                } else {
                    0.0
                };
            }
            s
        })
        .collect();
    let kept = (0..nd.len())
        .filter(|&a| {
            is_supported(
                &scaled[a],
                scaled
                    .iter()
                    .enumerate()
                    .filter(|&(b, v)| b != a && *v != scaled[a])
                    .map(|(_, v)| *v),
            )
        })
        .map(|a| points[nd[a]].clone())
        .collect();
    Frontier {
        points: kept,
        mode: FrontierMode::LowerConvexHull,
    }
}

pub fn extract<P: Clone>(points: &[ObjectivePoint<P>], mode: FrontierMode) -> Frontier<P> {
    match mode {
        FrontierMode::NonDominated => non_dominated(points),
        FrontierMode::LowerConvexHull => lower_convex_hull(points),
    }
}

/// Reference for [`hypervolume`]: worst acceptable score, latency and memory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub score: f64,
    pub latency_ms: f64,
    pub peak_memory_bytes: f64,
}

impl Reference {
    pub fn admits<P>(&self, p: &ObjectivePoint<P>) -> bool {
        p.score >= self.score
            && p.latency_ms <= self.latency_ms
            && p.peak_memory_bytes <= self.peak_memory_bytes
    }
}

/// Volume of the region dominated by `points` and bounded by `reference`.
pub fn hypervolume<P>(points: &[ObjectivePoint<P>], reference: &Reference) -> Result<f64> {
    if let Some(p) = points
        .iter()
        .find(|p| !reference.admits(p) || !p.is_finite())
    {
        return Err(NasError::BadReference(format!(
            "point (score {}, latency {}, memory {}) vs reference {:?}",
            p.score, p.latency_ms, p.peak_memory_bytes, reference
        )));
    }
    let r = [
        -reference.score,
        reference.latency_ms,
        reference.peak_memory_bytes,
    ];
    let mut pts: Vec<[f64; 3]> = points
        .iter()
        .map(|p| [-p.score, p.latency_ms, p.peak_memory_bytes])
        .collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut total = 0.0;
    for i in 0..pts.len() {
        let next_x = if i + 1 < pts.len() {
            pts[i + 1][0]
        } else {
            r[0]
        };
        let width = next_x - pts[i][0];
        if width <= 0.0 {
            continue;
        }
        total += width * area_2d(&pts[..=i], r[1], r[2]);
    }
    Ok(total)
}

fn area_2d(pts: &[[f64; 3]], ry: f64, rz: f64) -> f64 {
    let mut yz: Vec<(f64, f64)> = pts.iter().map(|p| (p[1], p[2])).collect();
    yz.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut area = 0.0;
    let mut best_z = rz;
    for (k, &(y, z)) in yz.iter().enumerate() {
        best_z = best_z.min(z);
        let next_y = if k + 1 < yz.len() { yz[k + 1].0 } else { ry };
        area += (next_y - y) * (rz - best_z);
    }
    area
}

/// A frontier point reduced to the two figures `d_avg` needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityPoint {
    pub latency_ms: f64,
    /// Positive figure where lower is better (e.g. perplexity).
    pub quality: f64,
}

/// Mean relative quality gap between a proxy-selected frontier and the
/// ground-truth frontier, each proxy point matched to the truth point nearest
/// in latency. Latency ties go to the lower (better) truth quality.
pub fn d_avg(proxy_frontier: &[QualityPoint], truth_frontier: &[QualityPoint]) -> Result<f64> {
    if proxy_frontier.is_empty() || truth_frontier.is_empty() {
        return Err(NasError::EmptyFrontier);
    }
    if truth_frontier
        .iter()
        .chain(proxy_frontier)
        .any(|p| p.quality.is_nan() || p.quality <= 0.0)
    {
        return Err(NasError::InvalidConfig(
            "quality values must be positive".into(),
        ));
    }
    let total: f64 = proxy_frontier
        .iter()
        .map(|p| {
            let gt = truth_frontier
                .iter()
                .min_by(|a, b| {
                    (a.latency_ms - p.latency_ms)
                        .abs()
                        .total_cmp(&(b.latency_ms - p.latency_ms).abs())
                        .then(a.quality.total_cmp(&b.quality))
                })
                .expect("nonempty");
            (p.quality - gt.quality).abs() / gt.quality
        })
        .sum();
    Ok(total / proxy_frontier.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(score: f64, lat: f64, mem: f64) -> ObjectivePoint<usize> {
        ObjectivePoint::new(score, lat, mem, 0)
    }

    #[test]
    fn single_point_frontier() {
        let f = non_dominated(&[pt(1.0, 1.0, 1.0)]);
        assert_eq!(f.len(), 1);
    }

    #[test]
    fn strict_dominance_removes_second() {
        let pts = vec![
            ObjectivePoint::new(2.0, 1.0, 1.0, 0),
            ObjectivePoint::new(1.0, 2.0, 2.0, 1),
        ];
        let f = non_dominated(&pts);
        assert_eq!(
            f.points.iter().map(|p| p.payload).collect::<Vec<_>>(),
            vec![0]
        );
    }

    #[test]
    fn duplicates_are_retained() {
        let pts = vec![
            ObjectivePoint::new(1.0, 1.0, 1.0, 0),
            ObjectivePoint::new(1.0, 1.0, 1.0, 1),
        ];
        assert_eq!(non_dominated(&pts).len(), 2);
        assert_eq!(lower_convex_hull(&pts).len(), 2);
    }

    #[test]
    fn hull_excludes_point_above_segment() {
        // (latency, y) with y = -score; memory constant.
        let pts: Vec<_> = [(1.0, 10.0), (2.0, 6.0), (3.0, 5.0), (4.0, 1.0)]
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| ObjectivePoint::new(-y, x, 0.0, i))
            .collect();
        assert_eq!(non_dominated(&pts).len(), 4);
        let hull: Vec<usize> = lower_convex_hull(&pts)
            .points
            .iter()
            .map(|p| p.payload)
            .collect();
        assert_eq!(hull, vec![0, 1, 3]);
    }

    #[test]
    fn hull_keeps_collinear_points() {
        let pts: Vec<_> = [(1.0, 3.0), (2.0, 2.0), (3.0, 1.0)]
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| ObjectivePoint::new(-y, x, 0.0, i))
            .collect();
        assert_eq!(lower_convex_hull(&pts).len(), 3);
    }

    #[test]
    fn hull_keeps_small_simplices() {
        let two = vec![pt(5.0, 1.0, 9.0), pt(1.0, 3.0, 2.0)];
        assert_eq!(lower_convex_hull(&two).len(), 2);
        // Three mutually non-dominated points on a plane with positive normal.
        let three = vec![pt(0.0, 1.0, 0.0), pt(0.0, 0.0, 1.0), pt(-1.0, 0.0, 0.0)];
        assert_eq!(non_dominated(&three).len(), 3);
        assert_eq!(lower_convex_hull(&three).len(), 3);
    }

    #[test]
    fn hull_drops_unsupported_middle_of_three() {
        // p is non-dominated but the midpoint of q and r dominates it.
        let pts = vec![
            ObjectivePoint::new(-10.0, 0.0, 0.0, 0),
            ObjectivePoint::new(-5.0, 1.0, -5.0, 1),
            ObjectivePoint::new(-5.0, -5.0, 1.0, 2),
        ];
        assert_eq!(non_dominated(&pts).len(), 3);
        let hull: Vec<usize> = lower_convex_hull(&pts)
            .points
            .iter()
            .map(|p| p.payload)
            .collect();
        assert_eq!(hull, vec![1, 2]);
    }

    #[test]
    fn unit_box_hypervolume() {
        let r = Reference {
            score: 0.0,
            latency_ms: 1.0,
            peak_memory_bytes: 1.0,
        };
        assert_eq!(hypervolume(&[pt(1.0, 0.0, 0.0)], &r).unwrap(), 1.0);
        let with_dominated = [pt(1.0, 0.0, 0.0), pt(0.5, 0.5, 0.5)];
        assert_eq!(hypervolume(&with_dominated, &r).unwrap(), 1.0);
        assert!(matches!(
            hypervolume(&[pt(1.0, 2.0, 0.0)], &r),
            Err(NasError::BadReference(_))
        ));
    }

    #[test]
    fn two_box_union() {
        let r = Reference {
            score: 0.0,
            latency_ms: 2.0,
            peak_memory_bytes: 2.0,
        };
        // Boxes 1x2x2 and 2x1x1 overlapping in 1x1x1.
        let hv = hypervolume(&[pt(1.0, 0.0, 0.0), pt(2.0, 1.0, 1.0)], &r).unwrap();
        assert!((hv - (4.0 + 2.0 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn d_avg_examples() {
        let a = [QualityPoint {
            latency_ms: 1.0,
            quality: 11.0,
        }];
        let b = [QualityPoint {
            latency_ms: 1.0,
            quality: 10.0,
        }];
        assert!((d_avg(&a, &b).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(d_avg(&b, &b).unwrap(), 0.0);
        assert!(matches!(d_avg(&[], &b), Err(NasError::EmptyFrontier)));
    }

    #[test]
    fn d_avg_latency_tie_prefers_lower_quality() {
        let p = [QualityPoint {
            latency_ms: 2.0,
            quality: 12.0,
        }];
        let t = [
            QualityPoint {
                latency_ms: 1.0,
                quality: 15.0,
            },
            QualityPoint {
                latency_ms: 3.0,
                quality: 10.0,
            },
        ];
        assert!((d_avg(&p, &t).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn eps_dominance_absorbs_marginal_gains() {
        // b beats a on score by less than eps but is much slower.
        let pts = vec![pt(1.0, 1.0, 1.0), pt(1.003, 1.5, 1.0)];
        assert_eq!(non_dominated(&pts).len(), 2);
        assert_eq!(non_dominated_eps(&pts, 0.01).len(), 1);
        assert_eq!(non_dominated_eps(&pts, 0.0).len(), 2);
    }
}
