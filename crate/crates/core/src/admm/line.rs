//! Exact one-dimensional minimization along an offset coordinate (the
//! intercept or one covariate coefficient) with everything else held fixed.

use crate::loss::{hinge, psi, LossKind};

/// One sample's contribution along the coordinate t: its margin is
/// `offset + slope·t` and it carries a hinge weight plus a linear term.
#[derive(Clone, Copy, Debug)]
pub(crate) struct MarginTerm {
    pub offset: f64,
    pub slope: f64,
    pub hinge_weight: f64,
    pub linear: f64,
}

/// Minimizes the convex piecewise-linear Σ [a·(1 - m(t))₊ + g·m(t)] over t.
/// When the function is unbounded below the returned point is still no worse
/// than `current`.
pub(crate) fn argmin_convex(terms: &[MarginTerm], current: f64) -> f64 {
    let mut slope = 0.0;
    let mut kinks: Vec<(f64, f64)> = Vec::new();
    for t in terms {
        slope += t.linear * t.slope;
        if t.slope == 0.0 || t.hinge_weight == 0.0 {
            continue;
        }
        let kink = (1.0 - t.offset) / t.slope;
        if t.slope > 0.0 {
            slope -= t.hinge_weight * t.slope;
        }
        kinks.push((kink, t.hinge_weight * t.slope.abs()));
    }
    if kinks.is_empty() {
        return current;
    }
    kinks.sort_by(|a, b| a.0.total_cmp(&b.0));
    if slope >= 0.0 {
        // nondecreasing everywhere
        return current.min(kinks[0].0);
    }
    for (idx, &(k, jump)) in kinks.iter().enumerate() {
        slope += jump;
        if slope >= 0.0 {
            if slope == 0.0 {
                let next = kinks.get(idx + 1).map_or(f64::INFINITY, |n| n.0);
                return current.clamp(k, next);
            }
            return k;
        }
    }
    current.max(kinks[kinks.len() - 1].0)
}

/// Weighted margin loss Σ wᵢ F(mᵢ(t)) evaluated at t.
fn risk_at(terms: &[MarginTerm], kind: LossKind, t: f64) -> f64 {
    terms
        .iter()
        .map(|m| {
            let z = m.offset + m.slope * t;
            let f = match kind {
                LossKind::Psi => psi(z),
                _ => hinge(z),
            };
            m.hinge_weight * f
        })
        .sum()
}

/// Minimizes Σ wᵢ F(offsetᵢ + slopeᵢ·t) for hinge or psi by scanning every
/// breakpoint; returns `current` unless a breakpoint is strictly better.
pub(crate) fn argmin_margin_loss(terms: &[MarginTerm], kind: LossKind, current: f64) -> f64 {
    let mut best_t = current;
    let mut best = risk_at(terms, kind, current);
    for m in terms {
        if m.slope == 0.0 || m.hinge_weight == 0.0 {
            continue;
        }
        let mut candidates = [(1.0 - m.offset) / m.slope, f64::NAN];
        if kind == LossKind::Psi {
            candidates[1] = -m.offset / m.slope;
        }
        for &t in candidates.iter().filter(|t| t.is_finite()) {
            let r = risk_at(terms, kind, t);
            if r < best || (r == best && (t - current).abs() < (best_t - current).abs()) {
                best = r;
                best_t = t;
            }
        }
    }
    best_t
}
