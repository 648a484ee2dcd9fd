//! Gauss–Legendre rules on a cell.

/// Nodes and weights of a Gauss–Legendre rule on the reference interval [0, 1].
#[derive(Debug, Clone, Copy)]
pub struct GaussRule {
    pub points: &'static [f64],
    pub weights: &'static [f64],
}

const G3_POINTS: [f64; 3] = [
    0.112_701_665_379_258_31,
    0.5,
    0.887_298_334_620_741_7,
];
const G3_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

const G5_POINTS: [f64; 5] = [
    0.046_910_077_030_668_004,
    0.230_765_344_947_158_45,
    0.5,
    0.769_234_655_052_841_6,
    0.953_089_922_969_332,
];
const G5_WEIGHTS: [f64; 5] = [
    0.118_463_442_528_094_54,
    0.239_314_335_249_683_23,
    0.284_444_444_444_444_45,
    0.239_314_335_249_683_23,
    0.118_463_442_528_094_54,
];

pub const GAUSS3: GaussRule = GaussRule { points: &G3_POINTS, weights: &G3_WEIGHTS };
pub const GAUSS5: GaussRule = GaussRule { points: &G5_POINTS, weights: &G5_WEIGHTS };

impl GaussRule {
    /// Physical quadrature points and weights on `[left, right]`.
    pub fn on(&self, left: f64, right: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = right - left;
        self.points
            .iter()
            .zip(self.weights)
            .map(move |(&t, &w)| (left + t * h, w * h))
    }

    pub fn integrate(&self, left: f64, right: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.on(left, right).map(|(x, w)| w * f(x)).sum()
    }
}
