//! Globally adaptive Gauss-Kronrod (7/15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Subinterval budget before giving up.
pub const MAX_INTERVALS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quadrature {
    pub value: f64,
    /// Sum of the per-interval |Kronrod - Gauss| estimates.
    pub error_estimate: f64,
    pub intervals: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[a, b]`, first splitting at `breakpoints` (which
/// must lie inside the interval, in increasing order), then bisecting the
/// panel with the largest error estimate until the total estimate is below
/// `abs_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, breakpoints: &[f64], a: f64, b: f64, abs_tol: f64) -> Result<Quadrature> {
    if !(abs_tol > 0.0) {
        return Err(Error::invalid("quadrature tolerance must be positive"));
    }
    if !(a <= b) {
        return Err(Error::invalid(format!("empty integration range [{a}, {b}]")));
    }
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error_estimate: 0.0,
            intervals: 0,
        });
    }
    let mut edges = vec![a];
    edges.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
    edges.push(b);

    let mut heap: BinaryHeap<Panel> = edges.windows(2).map(|w| gauss_kronrod(&f, w[0], w[1])).collect();
    let mut error: f64 = heap.iter().map(|p| p.error).sum();
    while error > abs_tol {
        if heap.len() >= MAX_INTERVALS {
            let value = heap.iter().map(|p| p.value).sum();
            return Err(Error::ResourceLimit {
                what: format!("quadrature did not reach {abs_tol:e} within {MAX_INTERVALS} panels"),
                partial: value,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in floating point.
            heap.push(Panel { error: 0.0, ..worst });
            error = heap.iter().map(|p| p.error).sum();
            continue;
        }
        let left = gauss_kronrod(&f, worst.a, mid);
        let right = gauss_kronrod(&f, mid, worst.b);
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if error <= abs_tol {
            // Recompute to shed accumulated cancellation in the running sum.
            error = heap.iter().map(|p| p.error).sum();
        }
    }
    let mut panels = heap.into_vec();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    Ok(Quadrature {
        value: panels.iter().map(|p| p.value).sum(),
        error_estimate: error,
        intervals: panels.len(),
    })
}
