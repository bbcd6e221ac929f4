//! Small numerical kernels: adaptive Gauss–Kronrod quadrature, expectations
//! against a quantile function with singular tails, and output formatting.

use std::collections::BinaryHeap;
use std::cmp::Ordering;

// Gauss–Kronrod 15-point abscissae and weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss 7-point weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of a quadrature call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Quadrature {
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
    Quadrature {
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

struct Segment {
    a: f64,
    b: f64,
    q: Quadrature,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.q.error == other.q.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.q.error.total_cmp(&other.q.error)
    }
}

/// Globally adaptive Gauss–Kronrod (15 point) integration of `f` over `[a, b]`.
///
/// Splits the segment with the largest error estimate until the summed error
/// is below `max(abs_tol, rel_tol * |value|)` or `max_segments` is reached.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> Quadrature {
    let first = gk15(&mut f, a, b);
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, q: first });
    while error > abs_tol.max(rel_tol * value.abs()) && heap.len() < max_segments {
        if !value.is_finite() {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let left = gk15(&mut f, worst.a, mid);
        let right = gk15(&mut f, mid, worst.b);
        value += left.value + right.value - worst.q.value;
        error += left.error + right.error - worst.q.error;
        heap.push(Segment { a: worst.a, b: mid, q: left });
        heap.push(Segment { a: mid, b: worst.b, q: right });
    }
    // Re-sum to shed the drift of the running updates.
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.q.value, e + s.q.error));
    Quadrature { value, error }
}

/// Outcome of [`integrate_unit_tail`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailIntegral {
    Finite(f64),
    /// The partial integral exceeded the cap, or the pieces stopped decaying.
    Diverged,
}

impl TailIntegral {
    pub fn value(self) -> f64 {
        match self {
            TailIntegral::Finite(v) => v,
            TailIntegral::Diverged => f64::INFINITY,
        }
    }
}

/// Partial integrals above this are declared divergent.
pub const DIVERGENCE_CAP: f64 = 1e6;
const TAIL_ABS_TOL: f64 = 1e-12;
const SMALLEST_PIECE: f64 = 1e-300;

/// Integrates `h` over `(0, 1/2]` where `h` may be singular at `0`.
///
/// The range is cut into dyadic pieces `[2^-(k+1), 2^-k]`, each integrated
/// adaptively, walking towards zero until the geometric remainder estimate
/// drops below the tolerance.
pub fn integrate_unit_tail<F: FnMut(f64) -> f64>(h: F) -> TailIntegral {
    integrate_unit_tail_capped(h, DIVERGENCE_CAP)
}

/// As [`integrate_unit_tail`] with a caller-chosen divergence cap; pass
/// `f64::INFINITY` to rely on the decay test alone.
pub fn integrate_unit_tail_capped<F: FnMut(f64) -> f64>(mut h: F, cap: f64) -> TailIntegral {
    let mut total = 0.0;
    let mut previous: Option<f64> = None;
    let mut upper = 0.5_f64;
    let mut ratio = 1.0;
    loop {
        let lower = upper * 0.5;
        let piece = integrate(&mut h, lower, upper, 1e-15, 1e-13, 64);
        if !piece.value.is_finite() || piece.value < 0.0 && piece.value.abs() > 1e-12 {
            return TailIntegral::Diverged;
        }
        let piece = piece.value.max(0.0);
        total += piece;
        if total > cap {
            return TailIntegral::Diverged;
        }
        if let Some(prev) = previous {
            if prev == 0.0 && piece == 0.0 {
                return TailIntegral::Finite(total);
            }
            if prev > 0.0 {
                let last_ratio = ratio;
                ratio = piece / prev;
                // extrapolate only once the ratios stop growing; a rising
                // ratio is the signature of a super-geometric tail
                if ratio < 0.95 && ratio <= last_ratio * (1.0 + 1e-3) {
                    let remainder = piece * ratio / (1.0 - ratio);
                    if remainder <= TAIL_ABS_TOL.max(1e-13 * total) {
                        return TailIntegral::Finite(total + remainder);
                    }
                }
            }
        }
        previous = Some(piece);
        upper = lower;
        if upper < SMALLEST_PIECE {
            return if ratio < 1.0 {
                let remainder = piece * ratio / (1.0 - ratio);
                TailIntegral::Finite(total + remainder)
            } else {
                TailIntegral::Diverged
            };
        }
    }
}

/// `m!` as a float (exact up to `m = 22`, correctly rounded growth after).
pub fn factorial(m: u32) -> f64 {
    (1..=m).fold(1.0, |acc, k| acc * k as f64)
}

/// Formats `x` with 9 significant digits, switching to scientific notation
/// outside `[1e-5, 1e15)`.
pub fn fmt_sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&magnitude) {
        return format!("{x:.8e}");
    }
    let decimals = (8 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // A carry (9.9999999995 -> 10.00000000) adds a digit; re-round once.
    let digits = s.chars().filter(|c| c.is_ascii_digit()).count();
    let leading_zeros = if magnitude < 0 { (-magnitude) as usize } else { 0 };
    if digits > 9 + leading_zeros && decimals > 0 {
        let decimals = decimals - 1;
        return format!("{x:.decimals$}");
    }
    s
}
