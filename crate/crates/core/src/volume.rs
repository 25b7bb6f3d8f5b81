//! Volume growth: doubling, anti-doubling, growth exponent and the
//! exponential bound forced by `(p₀)`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{VertexId, WeightedGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingRow {
    pub radius: usize,
    /// `max_x V(x, 2R) / V(x, R)` over the centres.
    pub doubling: f64,
    /// `max_{x, y ∈ B(x,R)} V(x, 2R) / V(y, R)`.
    pub pd2v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeReport {
    pub centers: Vec<VertexId>,
    pub radii: Vec<usize>,
    pub rows: Vec<DoublingRow>,
    /// Largest doubling ratio over all scales.
    pub doubling_constant: f64,
    /// Doubling ratio at the largest tested scale.
    pub doubling_large_scale: f64,
    pub pd2v_constant: f64,
    /// Smallest integer `M ≥ 2` with `V(x, MR) ≥ 2 V(x, R)` at every tested
    /// `(x, R)` for which `V(x, MR)` is exact; `None` if no such `M` fits.
    pub anti_doubling: Option<usize>,
    /// Least-squares slope of `log V(x, R)` against `log R` (all centres).
    pub alpha: f64,
    /// `max (V(x, R) / μ(x))^{1/R}`.
    pub vbound_fitted: f64,
    /// `2 / p₀²`, a constant for which `V(x, R) ≤ C^R μ(x)` follows from `(p₀)`.
    pub vbound_p0: f64,
    pub vbound_violations: usize,
    /// Doubling ratios increase monotonically and the last exceeds the first by
    /// half again: no finite doubling constant is in sight.
    pub doubling_unbounded_trend: bool,
}

/// Volume statistics at the given centres and radii. Every `V(·, R)` used is
/// guarded against the truncation horizon.
pub fn volume_regularity_report(
    g: &WeightedGraph,
    centers: &[VertexId],
    radii: &[usize],
) -> Result<VolumeReport> {
    let r_max = radii.iter().copied().max().unwrap_or(0);
    for &x in centers {
        g.check_vertex(x)?;
        g.guard(x, 2 * r_max)?;
    }
    let p0 = g.check_p0().p0;
    let vbound_p0 = 2.0 / (p0 * p0);

    let profiles: Vec<Vec<f64>> = centers.iter().map(|&x| g.volume_profile(x, 2 * r_max)).collect();

    let mut rows = Vec::new();
    for &r in radii {
        let mut doubling: f64 = 0.0;
        let mut pd2v: f64 = 0.0;
        for (i, &x) in centers.iter().enumerate() {
            let vp = &profiles[i];
            doubling = doubling.max(vp[2 * r] / vp[r]);
            for y in g.ball(x, r).iter() {
                pd2v = pd2v.max(vp[2 * r] / g.volume(y, r));
            }
        }
        rows.push(DoublingRow {
            radius: r,
            doubling,
            pd2v,
        });
    }

    let mut anti = None;
    for m in 2..=(2 * r_max).max(2) {
        let mut tested = 0;
        let mut ok = true;
        for vp in &profiles {
            for &r in radii.iter().filter(|&&r| m * r <= 2 * r_max) {
                tested += 1;
                ok &= vp[m * r] >= 2.0 * vp[r];
            }
        }
        if tested == 0 {
            break;
        }
        if ok {
            anti = Some(m);
            break;
        }
    }

    let mut pts = Vec::new();
    let mut vbound_fitted: f64 = 0.0;
    let mut vbound_violations = 0;
    for (i, &x) in centers.iter().enumerate() {
        let mu = g.measure(x);
        for &r in radii {
            let v = profiles[i][r];
            pts.push(((r as f64).ln(), v.ln()));
            let c = (v / mu).powf(1.0 / r as f64);
            vbound_fitted = vbound_fitted.max(c);
            if c > vbound_p0 * (1.0 + 1e-12) {
                vbound_violations += 1;
            }
        }
    }
    let alpha = least_squares_slope(&pts);

    let doubling_constant = rows.iter().map(|r| r.doubling).fold(0.0, f64::max);
    let doubling_large_scale = rows.last().map_or(f64::NAN, |r| r.doubling);
    let pd2v_constant = rows.iter().map(|r| r.pd2v).fold(0.0, f64::max);
    let doubling_unbounded_trend = rows.len() >= 2
        && rows.windows(2).all(|w| w[1].doubling >= w[0].doubling)
        && doubling_large_scale > 1.5 * rows[0].doubling;

    Ok(VolumeReport {
        centers: centers.to_vec(),
        radii: radii.to_vec(),
        rows,
        doubling_constant,
        doubling_large_scale,
        pd2v_constant,
        anti_doubling: anti,
        alpha,
        vbound_fitted,
        vbound_p0,
        vbound_violations,
        doubling_unbounded_trend,
    })
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Powers of two up to `max`.
pub fn dyadic_radii(min: usize, max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut r = min.max(1).next_power_of_two();
    while r <= max {
        out.push(r);
        r *= 2;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{binary_tree, lattice_box, vicsek_tree};

    #[test]
    fn line_doubles_by_two() {
        let g = lattice_box(1, 301).unwrap();
        let rep = volume_regularity_report(&g, &[g.root().unwrap()], &dyadic_radii(4, 32)).unwrap();
        // V(0, R) = 4R − 2
        assert!((rep.doubling_large_scale - 254.0 / 126.0).abs() < 1e-12);
        assert!((rep.doubling_large_scale - 2.0).abs() < 0.2);
        assert!(!rep.doubling_unbounded_trend);
        assert_eq!(rep.vbound_violations, 0);
        assert_eq!(rep.anti_doubling, Some(2));
        assert!((rep.alpha - 1.0).abs() < 0.1);
    }

    #[test]
    fn binary_tree_is_not_doubling() {
        let g = binary_tree(10).unwrap();
        let rep = volume_regularity_report(&g, &[0], &[1, 2, 3, 4, 5]).unwrap();
        assert!(rep.doubling_unbounded_trend, "{:?}", rep.rows);
        assert_eq!(rep.vbound_violations, 0);
    }

    #[test]
    fn vicsek_growth_exponent() {
        let g = vicsek_tree(4).unwrap();
        let rep = volume_regularity_report(&g, &[g.root().unwrap()], &dyadic_radii(2, 64)).unwrap();
        let alpha = 5f64.ln() / 3f64.ln();
        assert!((rep.alpha - alpha).abs() < 0.15 * alpha, "alpha {}", rep.alpha);
        assert!(rep.doubling_constant < 6.0);
    }

    #[test]
    fn guarded_radii() {
        let g = lattice_box(1, 21).unwrap();
        assert!(volume_regularity_report(&g, &[10], &[8]).is_err());
    }

    #[test]
    fn dyadic_helper() {
        assert_eq!(dyadic_radii(1, 20), vec![1, 2, 4, 8, 16]);
        assert_eq!(dyadic_radii(3, 20), vec![4, 8, 16]);
    }
}
