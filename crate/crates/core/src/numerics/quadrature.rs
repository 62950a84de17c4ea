//! Globally adaptive 21-point Gauss–Kronrod quadrature.
//!
//! Semi-infinite ranges `[a, ∞)` are mapped onto `[0, 1)` through
//! `t = a + L u / (1 - u)` with `L = max(|a|, 1)`; the Kronrod nodes are interior so the singular
//! endpoint `u = 1` is never evaluated.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::NumericsError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl QuadratureSpec {
    pub fn new(rel_tol: f64, abs_tol: f64, max_subdivisions: usize) -> Result<Self, NumericsError> {
        if !(rel_tol > 0.0) {
            return Err(NumericsError::Domain("rel_tol must be positive"));
        }
        if !(abs_tol >= 0.0) {
            return Err(NumericsError::Domain("abs_tol must be non-negative"));
        }
        if max_subdivisions < 1 {
            return Err(NumericsError::Domain("max_subdivisions must be at least 1"));
        }
        Ok(Self {
            rel_tol,
            abs_tol,
            max_subdivisions,
        })
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 0.0,
            max_subdivisions: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bounds {
    Finite(f64, f64),
    /// `[start, ∞)`
    UpperInfinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

struct Panel {
    lo: f64,
    hi: f64,
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

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<Panel, NumericsError> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let eval = |x: f64| -> Result<f64, NumericsError> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(NumericsError::NonFiniteIntegrand { at: x })
        }
    };
    let fc = eval(center)?;
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    let mut abs_sum = fc.abs() * WGK[10];
    let mut values = [(0.0, 0.0); 10];
    for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).take(10).enumerate() {
        let dx = half * x;
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        values[j] = (f1, f2);
        kronrod += wk * (f1 + f2);
        abs_sum += wk * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (fc - mean).abs();
    for (j, &(f1, f2)) in values.iter().enumerate() {
        asc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
    }
    let value = kronrod * half;
    let abs_sum = abs_sum * half.abs();
    let asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    if abs_sum > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * abs_sum);
    }
    Ok(Panel { lo, hi, value, error })
}

/// Integrate `f` over `bounds` until the error estimate is within
/// `max(rel_tol·|I|, abs_tol)`.
pub fn integrate_adaptive<F>(f: F, bounds: Bounds, spec: &QuadratureSpec) -> Result<Integral, NumericsError>
where
    F: Fn(f64) -> f64,
{
    match bounds {
        Bounds::Finite(a, b) => {
            if !(a.is_finite() && b.is_finite()) {
                return Err(NumericsError::Domain("finite bounds must be finite"));
            }
            if a == b {
                return Ok(Integral {
                    value: 0.0,
                    error: 0.0,
                    subdivisions: 0,
                });
            }
            if a > b {
                let r = adapt(&f, b, a, spec)?;
                return Ok(Integral { value: -r.value, ..r });
            }
            adapt(&f, a, b, spec)
        }
        Bounds::UpperInfinite(start) => {
            if !start.is_finite() {
                return Err(NumericsError::Domain("semi-infinite lower bound must be finite"));
            }
            let scale = start.abs().max(1.0);
            let mapped = |u: f64| {
                let w = 1.0 - u;
                let t = start + scale * u / w;
                if !t.is_finite() {
                    // nodes that round onto u = 1 sit at the vanishing tail
                    return 0.0;
                }
                scale * f(t) / (w * w)
            };
            adapt(&mapped, 0.0, 1.0, spec)
        }
    }
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Integral, NumericsError> {
    let first = gauss_kronrod(f, a, b)?;
    let mut total = first.value;
    let mut total_err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut subdivisions = 1;
    loop {
        let target = (spec.rel_tol * total.abs()).max(spec.abs_tol);
        if total_err <= target {
            // Re-sum so the reported value carries no drift from incremental updates.
            let value = heap.iter().map(|p| p.value).sum();
            let error = heap.iter().map(|p| p.error).sum();
            return Ok(Integral {
                value,
                error,
                subdivisions,
            });
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(NumericsError::QuadratureFailed {
                estimate: total,
                error: total_err,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(mid > worst.lo && mid < worst.hi) {
            // Interval exhausted at machine resolution; nothing more to gain.
            return Err(NumericsError::QuadratureFailed {
                estimate: total,
                error: total_err,
                subdivisions,
            });
        }
        let left = gauss_kronrod(f, worst.lo, mid)?;
        let right = gauss_kronrod(f, mid, worst.hi)?;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;
    }
}
