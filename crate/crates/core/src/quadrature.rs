//! Globally adaptive Gauss–Kronrod (7/15) quadrature for vector-valued integrands.

use crate::error::{Error, Result};

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
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SEGMENTS: usize = 4000;

#[derive(Debug, Clone, Copy)]
struct Segment<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
}

fn kronrod<const N: usize, F>(f: &F, a: f64, b: f64) -> Segment<N>
where
    F: Fn(f64) -> [f64; N],
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let center = f(c);
    let mut gk = [0.0; N];
    let mut g = [0.0; N];
    for i in 0..N {
        gk[i] = WGK[7] * center[i];
        g[i] = WG[3] * center[i];
    }
    for j in 0..7 {
        let dx = h * XGK[j];
        let lo = f(c - dx);
        let hi = f(c + dx);
        for i in 0..N {
            let s = lo[i] + hi[i];
            gk[i] += WGK[j] * s;
            if j % 2 == 1 {
                g[i] += WG[j / 2] * s;
            }
        }
    }
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for i in 0..N {
        value[i] = gk[i] * h;
        error[i] = ((gk[i] - g[i]) * h).abs();
    }
    Segment { a, b, value, error }
}

/// Integrates every component of `f` over `[a, b]`, split initially at
/// `breakpoints`, until each component satisfies
/// `error <= max(abs_tol, rel_tol |value|)`.
pub fn integrate<const N: usize, F>(
    f: F,
    breakpoints: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<[f64; N]>
where
    F: Fn(f64) -> [f64; N],
{
    let mut segments: Vec<Segment<N>> = breakpoints
        .windows(2)
        .map(|w| kronrod(&f, w[0], w[1]))
        .collect();

    loop {
        let mut total = [0.0; N];
        let mut err = [0.0; N];
        for s in &segments {
            for i in 0..N {
                total[i] += s.value[i];
                err[i] += s.error[i];
            }
        }
        let tol: [f64; N] = std::array::from_fn(|i| (rel_tol * total[i].abs()).max(abs_tol));
        if (0..N).all(|i| err[i] <= tol[i]) {
            return Ok(total);
        }
        if segments.len() >= MAX_SEGMENTS {
            let worst = (0..N)
                .max_by(|&i, &j| (err[i] / tol[i]).total_cmp(&(err[j] / tol[j])))
                .unwrap_or(0);
            return Err(Error::Quadrature {
                estimated_error: err[worst],
                tolerance: tol[worst],
            });
        }
        let (idx, _) = segments
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let score = (0..N)
                    .map(|i| s.error[i] / tol[i])
                    .fold(0.0_f64, f64::max);
                (k, score)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one segment");
        let seg = segments.swap_remove(idx);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            let worst = (0..N)
                .max_by(|&i, &j| (err[i] / tol[i]).total_cmp(&(err[j] / tol[j])))
                .unwrap_or(0);
            return Err(Error::Quadrature {
                estimated_error: err[worst],
                tolerance: tol[worst],
            });
        }
        segments.push(kronrod(&f, seg.a, mid));
        segments.push(kronrod(&f, mid, seg.b));
    }
}
