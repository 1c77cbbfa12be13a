use crate::error::Result;
use crate::manifold::{Manifold, Point};

/// Summary of a distance-to-solution sequence `d_s`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractionReport {
    /// `d_{s+1} / d_s` for every `s` with `d_s` above the floor.
    pub ratios: Vec<f64>,
    /// First index from which the sequence never increases again, ignoring
    /// values at or below the floor.
    pub monotone_from: Option<usize>,
}

pub fn contraction_report(distances: &[f64], floor: f64) -> ContractionReport {
    let ratios = distances
        .windows(2)
        .take_while(|w| w[0] > floor)
        .map(|w| w[1] / w[0])
        .collect();
    let above: Vec<f64> = distances.iter().copied().take_while(|&d| d > floor).collect();
    let monotone_from = if above.is_empty() {
        None
    } else {
        let mut k = above.len() - 1;
        while k > 0 && above[k - 1] >= above[k] {
            k -= 1;
        }
        Some(k)
    };
    ContractionReport {
        ratios,
        monotone_from,
    }
}

/// How far the curve `t -> R_p(t lift(p, q))` strays from the curve
/// `s -> R_q(s lift(q, p))`: the largest distance from a sample of the first
/// curve to the nearest sample of the second. Zero when the two coincide as
/// sets, as for geodesics.
pub fn curve_coincidence_gap(
    manifold: &dyn Manifold,
    p: &Point,
    q: &Point,
    samples: usize,
) -> Result<f64> {
    let samples = samples.max(2);
    let fwd = manifold.lift(p, q)?;
    let bwd = manifold.lift(q, p)?;
    let ts: Vec<f64> = (0..samples).map(|i| i as f64 / (samples - 1) as f64).collect();
    let a = ts
        .iter()
        .map(|&t| manifold.retract(p, &fwd.scaled(t)))
        .collect::<Result<Vec<_>>>()?;
    let b = ts
        .iter()
        .map(|&t| manifold.retract(q, &bwd.scaled(t)))
        .collect::<Result<Vec<_>>>()?;
    let mut gap: f64 = 0.0;
    for x in &a {
        let mut nearest = f64::INFINITY;
        for y in &b {
            nearest = nearest.min(manifold.geodesic_distance(x, y)?);
        }
        gap = gap.max(nearest);
    }
    Ok(gap)
}
