//! Globally adaptive 15-point Gauss–Kronrod quadrature, with a mapping of
//! the half line `[0, ∞)` onto `[0, 1)` via `ω = tan(πu/2)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

/// Intervals are never bisected more than this many times.
pub const MAX_LEVEL: u32 = 60;
const MAX_INTERVALS: usize = 200_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("tolerance {0} outside [1e-12, 1e-3]")]
    InvalidTolerance(f64),
    #[error(
        "refinement exceeded {MAX_LEVEL} levels; worst subinterval [{a:.6e}, {b:.6e}] has error {error:.3e}"
    )]
    MaxLevel { a: f64, b: f64, error: f64 },
    #[error("interval budget of {MAX_INTERVALS} exhausted; worst subinterval [{a:.6e}, {b:.6e}] has error {error:.3e}")]
    Budget { a: f64, b: f64, error: f64 },
    #[error("integrand is not finite at {x}")]
    NonFinite { x: f64 },
}

/// Stopping rule: total error `≤ max(abs, rel·|I|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerance {
    /// Relative tolerance `tol` in `[1e-12, 1e-3]` with an absolute floor of
    /// `tol·1e-3`, which only matters for integrals that are (nearly) zero.
    pub fn relative(tol: f64) -> Result<Self, QuadratureError> {
        if !(1e-12..=1e-3).contains(&tol) {
            return Err(QuadratureError::InvalidTolerance(tol));
        }
        Ok(Self {
            rel: tol,
            abs: tol * 1e-3,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
    pub evaluations: usize,
}

// Kronrod abscissae (positive half) and weights, G7/K15 pair.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
#[allow(clippy::excessive_precision)]
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
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    level: u32,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    // max-heap on error; ties broken by position so the order is total
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Returns `(segment, settled)`; a segment is settled when its error
/// estimate is already at the roundoff floor.
fn kronrod<F, E>(f: &mut F, a: f64, b: f64, level: u32) -> Result<(Segment, bool), E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<QuadratureError>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    if !fc.is_finite() {
        return Err(QuadratureError::NonFinite { x: center }.into());
    }
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = fc.abs() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let (x1, x2) = (center - dx, center + dx);
        let f1 = f(x1)?;
        let f2 = f(x2)?;
        if !f1.is_finite() {
            return Err(QuadratureError::NonFinite { x: x1 }.into());
        }
        if !f2.is_finite() {
            return Err(QuadratureError::NonFinite { x: x2 }.into());
        }
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    let estimate = ((kronrod - gauss) * half).abs();
    let floor = 50.0 * f64::EPSILON * abs_sum * half.abs();
    Ok((
        Segment {
            a,
            b,
            value,
            error: estimate.max(floor),
            level,
        },
        estimate <= floor,
    ))
}

/// Adaptive integration of `f` over `[points[0], points[last]]`, with the
/// interior points used as initial breakpoints (the integrand is never
/// evaluated at any of them).
///
/// The interval with the largest error estimate is bisected until the sum of
/// the estimates meets `tol`. The result is summed in interval order, so it
/// is a pure function of the inputs.
pub fn integrate<F, E>(mut f: F, points: &[f64], tol: Tolerance) -> Result<QuadratureResult, E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<QuadratureError>,
{
    assert!(points.len() >= 2, "need at least one interval");
    let mut active = BinaryHeap::new();
    let mut settled = Vec::new();
    let mut evaluations = 0;
    let mut active_error = 0.0;
    let mut total = 0.0;
    for pair in points.windows(2) {
        if pair[1] <= pair[0] {
            continue;
        }
        let (seg, done) = kronrod(&mut f, pair[0], pair[1], 0)?;
        evaluations += 15;
        total += seg.value;
        if done {
            settled.push(seg);
        } else {
            active_error += seg.error;
            active.push(seg);
        }
    }

    loop {
        let target = tol.abs.max(tol.rel * total.abs());
        if active_error <= target {
            // running sums drift; confirm with an exact recount
            active_error = active.iter().map(|s| s.error).sum();
            total = active.iter().chain(settled.iter()).map(|s| s.value).sum();
            if active_error <= tol.abs.max(tol.rel * total.abs()) {
                break;
            }
        }
        let Some(worst) = active.pop() else { break };
        if worst.level >= MAX_LEVEL {
            return Err(QuadratureError::MaxLevel {
                a: worst.a,
                b: worst.b,
                error: worst.error,
            }
            .into());
        }
        if active.len() + settled.len() >= MAX_INTERVALS {
            return Err(QuadratureError::Budget {
                a: worst.a,
                b: worst.b,
                error: worst.error,
            }
            .into());
        }
        active_error -= worst.error;
        total -= worst.value;
        let mid = 0.5 * (worst.a + worst.b);
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (seg, done) = kronrod(&mut f, a, b, worst.level + 1)?;
            evaluations += 15;
            total += seg.value;
            if done {
                settled.push(seg);
            } else {
                active_error += seg.error;
                active.push(seg);
            }
        }
    }

    let mut all: Vec<Segment> = active.into_vec();
    all.extend(settled);
    all.sort_by(|x, y| x.a.total_cmp(&y.a));
    Ok(QuadratureResult {
        value: all.iter().map(|s| s.value).sum(),
        error: all.iter().map(|s| s.error).sum(),
        intervals: all.len(),
        evaluations,
    })
}

/// `∫_0^∞ g(ω) dω` through `ω = tan(πu/2)`.
///
/// `singular_points` (frequencies where `g` has integrable singularities or
/// sharp peaks) become breakpoints in `u`; zero and non-finite entries are
/// ignored since `0` is already an endpoint.
pub fn integrate_half_line<G, E>(
    mut g: G,
    singular_points: &[f64],
    tol: Tolerance,
) -> Result<QuadratureResult, E>
where
    G: FnMut(f64) -> Result<f64, E>,
    E: From<QuadratureError>,
{
    let mut breaks: Vec<f64> = singular_points
        .iter()
        .filter(|w| w.is_finite() && **w > 0.0)
        .map(|w| w.atan() / FRAC_PI_2)
        .filter(|u| *u > 0.0 && *u < 1.0)
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|x, y| (*x - *y).abs() <= 1e-14);
    let mut points = Vec::with_capacity(breaks.len() + 2);
    points.push(0.0);
    points.extend(breaks);
    points.push(1.0);
    integrate(
        |u| {
            let omega = (FRAC_PI_2 * u).tan();
            let jacobian = FRAC_PI_2 * (1.0 + omega * omega);
            Ok(g(omega)? * jacobian)
        },
        &points,
        tol,
    )
}
