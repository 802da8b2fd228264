use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{AssistError, Result};
use crate::matrix::DenseMatrix;
use crate::rng::{derive_seed, rng_from};
use crate::types::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pattern {
    Cross,
    Block,
    Star,
    Circle,
}

impl FromStr for Pattern {
    type Err = AssistError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross" => Ok(Pattern::Cross),
            "block" => Ok(Pattern::Block),
            "star" => Ok(Pattern::Star),
            "circle" => Ok(Pattern::Circle),
            _ => Err(AssistError::InvalidInput(format!(
                "unknown pattern '{s}' (expected cross, block, star or circle)"
            ))),
        }
    }
}

/// Edge-strength library: π, π², √π, log(1 + π), sin(ππ/2).
pub const G_LIBRARY: [fn(f64) -> f64; 5] = [
    |p| p,
    |p| p * p,
    |p| p.sqrt(),
    |p| p.ln_1p(),
    |p| (std::f64::consts::FRAC_PI_2 * p).sin(),
];

/// Subregion index of every entry (None when inactive). The active block is
/// the central d/2 × d/2 square. Star and circle are rasterized shapes.
pub fn pattern_regions(d: usize, pattern: Pattern) -> Result<Vec<Vec<Option<usize>>>> {
    if d < 8 {
        return Err(AssistError::InvalidInput(format!(
            "network patterns need d >= 8, got {d}"
        )));
    }
    let m = d / 2;
    let q = d / 4;
    let inside = |i: usize| i >= q && i < q + m;
    let mid = q as f64 + (m as f64 - 1.0) / 2.0;
    let band = q + m / 2 - 2;
    let in_band = |i: usize| i >= band && i < band + 4;
    let region = |i: usize, j: usize| -> Option<usize> {
        if !inside(i) || !inside(j) {
            return None;
        }
        let (di, dj) = (i as f64 - mid, j as f64 - mid);
        match pattern {
            Pattern::Cross => match (in_band(i), in_band(j)) {
                (true, true) => Some(4),
                (true, false) => Some(if j < band { 0 } else { 1 }),
                (false, true) => Some(if i < band { 2 } else { 3 }),
                (false, false) => None,
            },
            Pattern::Block => Some(2 * usize::from(i >= q + m / 2) + usize::from(j >= q + m / 2)),
            Pattern::Star => {
                if di.abs() <= 0.5 {
                    Some(0)
                } else if dj.abs() <= 0.5 {
                    Some(1)
                } else if (di - dj).abs() <= 0.5 {
                    Some(2)
                } else if (di + dj).abs() <= 0.5 {
                    Some(3)
                } else {
                    None
                }
            }
            Pattern::Circle => {
                let radius = m as f64 / 2.0 - 1.0;
                if ((di * di + dj * dj).sqrt() - radius).abs() <= 1.0 {
                    Some(2 * usize::from(di >= 0.0) + usize::from(dj >= 0.0))
                } else {
                    None
                }
            }
        }
    };
    Ok((0..d).map(|i| (0..d).map(|j| region(i, j)).collect()).collect())
}

/// Latent-variable network model: π ~ Uniform[0, 1], Y ~ Bernoulli(π) and
/// X_ij ~ Normal(g_ij(π)·1(active), σ²) where each subregion draws its g
/// from [`G_LIBRARY`] using `g_library_seed`.
pub fn gen_network_latent(
    d: usize,
    pattern: Pattern,
    sigma: f64,
    n: usize,
    seed: u64,
    g_library_seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(AssistError::InvalidInput("sample size must be positive".into()));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(AssistError::InvalidInput(format!("sigma must be >= 0, got {sigma}")));
    }
    let regions = pattern_regions(d, pattern)?;
    let mut lib_rng = rng_from(g_library_seed);
    let choice: Vec<usize> = (0..5).map(|_| lib_rng.random_range(0..G_LIBRARY.len())).collect();

    let mut rng = rng_from(derive_seed(seed, &[0x006e_6574]));
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let pi: f64 = rng.random();
        let y = if rng.random::<f64>() < pi { 1.0 } else { 0.0 };
        let x = DenseMatrix::from_fn(d, d, |i, j| {
            let mean = regions[i][j].map_or(0.0, |k| G_LIBRARY[choice[k]](pi));
            if sigma > 0.0 {
                let e: f64 = StandardNormal.sample(&mut rng);
                mean + sigma * e
            } else {
                mean
            }
        });
        xs.push(x);
        ys.push(y);
    }
    Dataset::from_raw(xs, vec![], &ys)
}
