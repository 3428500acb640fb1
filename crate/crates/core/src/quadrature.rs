//! Globally adaptive 10/21-point Gauss-Kronrod integration of small
//! vector-valued integrands.

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_352,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_5,
    0.149_445_554_002_916_9,
];
// Gauss weights for the odd-indexed Kronrod nodes (XGK[1], XGK[3], ...).
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_36,
    0.295_524_224_714_752_87,
];

const MAX_SEGMENTS: usize = 400;

#[derive(Debug, Clone, Copy)]
struct Segment<const N: usize> {
    lo: f64,
    hi: f64,
    value: [f64; N],
    error: [f64; N],
}

impl<const N: usize> Segment<N> {
    fn worst_error(&self) -> f64 {
        self.error.iter().copied().fold(0.0, f64::max)
    }
}

fn kronrod21<const N: usize, F: Fn(f64) -> [f64; N]>(f: &F, lo: f64, hi: f64) -> Segment<N> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc.map(|v| WGK[10] * v);
    let mut gauss = [0.0; N];
    for j in 0..10 {
        let dx = half * XGK[j];
        let left = f(center - dx);
        let right = f(center + dx);
        for k in 0..N {
            let pair = left[k] + right[k];
            kronrod[k] += WGK[j] * pair;
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * pair;
            }
        }
    }
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for k in 0..N {
        value[k] = kronrod[k] * half;
        error[k] = ((kronrod[k] - gauss[k]) * half).abs();
    }
    Segment {
        lo,
        hi,
        value,
        error,
    }
}

/// Integrate the vector-valued `f` over `[lo, hi]`, first splitting at any
/// `breaks` that fall strictly inside the interval.
///
/// Component `k` has converged once its error estimate is below
/// `max(rel_tol * |I_k|, mass_floor * sum_j |I_j|)`. Refinement bisects the
/// segment with the largest error estimate until every component has
/// converged or the segment budget is spent.
pub(crate) fn integrate_vec<const N: usize, F: Fn(f64) -> [f64; N]>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    rel_tol: f64,
    mass_floor: f64,
) -> [f64; N] {
    if !(hi > lo) {
        return [0.0; N];
    }
    let mut points: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| b.is_finite() && *b > lo && *b < hi)
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();

    let mut segments = Vec::with_capacity(16);
    let mut left = lo;
    for &p in points.iter().chain(std::iter::once(&hi)) {
        segments.push(kronrod21(&f, left, p));
        left = p;
    }

    loop {
        let mut total = [0.0; N];
        let mut error = [0.0; N];
        for s in &segments {
            for k in 0..N {
                total[k] += s.value[k];
                error[k] += s.error[k];
            }
        }
        let mass: f64 = total.iter().map(|v| v.abs()).sum();
        let converged =
            (0..N).all(|k| error[k] <= (rel_tol * total[k].abs()).max(mass_floor * mass));
        if converged || segments.len() >= MAX_SEGMENTS {
            return total;
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.worst_error().total_cmp(&b.1.worst_error()))
            .expect("at least one segment");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.lo + seg.hi);
        if !(mid > seg.lo && mid < seg.hi) {
            // cannot split further in double precision
            segments.push(Segment {
                error: [0.0; N],
                ..seg
            });
            continue;
        }
        segments.push(kronrod21(&f, seg.lo, mid));
        segments.push(kronrod21(&f, mid, seg.hi));
    }
}

#[cfg(test)]
fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, breaks: &[f64], rel_tol: f64) -> f64 {
    integrate_vec(|x| [f(x)], lo, hi, breaks, rel_tol, 0.0)[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let v = integrate(|x| x.powi(5) - 3.0 * x * x + 1.0, -1.0, 2.0, &[], 1e-12);
        // 64/6 - 1/6 - (8 + 1) + 3
        assert!((v - (63.0 / 6.0 - 9.0 + 3.0)).abs() < 1e-13);
    }

    #[test]
    fn gaussian_mass() {
        let v = integrate(crate::gaussian::pdf, -12.0, 12.0, &[], 1e-12);
        assert!((v - 1.0).abs() < 1e-13);
    }

    #[test]
    fn step_with_breakpoint() {
        let step = |x: f64| if x < 0.3 { 1.0 } else { 0.0 };
        let v = integrate(step, 0.0, 1.0, &[0.3], 1e-12);
        assert!((v - 0.3).abs() < 1e-14);
        // without the breakpoint adaptivity still localizes the jump
        let v = integrate(step, 0.0, 1.0, &[], 1e-10);
        assert!((v - 0.3).abs() < 1e-9);
    }

    #[test]
    fn sharp_sigmoid() {
        let eta = 1e-4;
        let f = |x: f64| crate::gaussian::cdf((0.5 - x) / eta);
        let v = integrate(f, 0.0, 1.0, &[0.5], 1e-12);
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_interval() {
        assert_eq!(integrate(|x| x, 1.0, 1.0, &[], 1e-10), 0.0);
        assert_eq!(integrate(|x| x, 2.0, 1.0, &[], 1e-10), 0.0);
    }

    #[test]
    fn components_converge_together() {
        let [a, b] = integrate_vec(
            |x| [crate::gaussian::cdf(x), crate::gaussian::tail(x)],
            -3.0,
            3.0,
            &[],
            1e-12,
            1e-16,
        );
        assert!((a - 3.0).abs() < 1e-12);
        assert!((b - 3.0).abs() < 1e-12);
    }
}
