//! Adaptive Gauss-Legendre panel quadrature.
//!
//! Each panel is integrated with the 15-point Kronrod extension of the
//! 7-point Gauss-Legendre rule; the difference between the two estimates is
//! the panel error. Panels are bisected until the summed error meets the
//! tolerance. The vector form integrates many integrands that share one
//! expensive kernel evaluation (for example a characteristic function) at
//! every node.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("quadrature did not converge: achieved error {achieved:.3e} > tolerance {tolerance:.3e}")]
pub struct QuadratureError {
    pub achieved: f64,
    pub tolerance: f64,
}

pub(crate) const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
pub(crate) const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
pub(crate) const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-10, max_panels: 4000 }
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

fn gk15_vec<F>(f: &mut F, a: f64, b: f64, dim: usize, buf: &mut [f64]) -> Panel
where
    F: FnMut(f64, &mut [f64]),
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    for (i, (&x, &wk)) in XGK.iter().zip(&WGK).enumerate() {
        let nodes: &[f64] = if x == 0.0 { &[0.0] } else { &[-1.0, 1.0] };
        for &s in nodes {
            f(c + s * h * x, buf);
            for d in 0..dim {
                kron[d] += wk * buf[d];
                if i % 2 == 1 {
                    gauss[d] += WG[i / 2] * buf[d];
                }
            }
        }
    }
    let mut error: f64 = 0.0;
    for d in 0..dim {
        kron[d] *= h;
        gauss[d] *= h;
        error = error.max((kron[d] - gauss[d]).abs());
    }
    Panel { a, b, value: kron, error }
}

/// Integrate a vector-valued function over the given initial panel breaks.
///
/// `breaks` must be increasing; each consecutive pair forms an initial panel.
/// Returns the integral of every component and the achieved error bound
/// (maximum over components of the summed panel errors).
pub fn integrate_vec<F>(
    mut f: F,
    breaks: &[f64],
    dim: usize,
    opts: &QuadOptions,
) -> Result<(Vec<f64>, f64), QuadratureError>
where
    F: FnMut(f64, &mut [f64]),
{
    let mut buf = vec![0.0; dim];
    let mut panels: Vec<Panel> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| gk15_vec(&mut f, w[0], w[1], dim, &mut buf))
        .collect();
    loop {
        let total_err: f64 = panels.iter().map(|p| p.error).sum();
        if total_err <= opts.abs_tol || panels.len() >= opts.max_panels {
            let mut value = vec![0.0; dim];
            for p in &panels {
                for (v, pv) in value.iter_mut().zip(&p.value) {
                    *v += pv;
                }
            }
            if total_err > opts.abs_tol {
                return Err(QuadratureError { achieved: total_err, tolerance: opts.abs_tol });
            }
            return Ok((value, total_err));
        }
        // bisect every panel whose error is above its share of the budget
        let share = opts.abs_tol / panels.len() as f64;
        let mut next = Vec::with_capacity(panels.len() * 2);
        let mut split_any = false;
        for p in panels {
            if p.error > share && next.len() + 2 <= opts.max_panels * 2 {
                let m = 0.5 * (p.a + p.b);
                next.push(gk15_vec(&mut f, p.a, m, dim, &mut buf));
                next.push(gk15_vec(&mut f, m, p.b, dim, &mut buf));
                split_any = true;
            } else {
                next.push(p);
            }
        }
        panels = next;
        if !split_any {
            // error is spread thinly over many panels; split the worst one
            let (worst, _) = panels
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
                .unwrap();
            let p = panels.swap_remove(worst);
            let m = 0.5 * (p.a + p.b);
            panels.push(gk15_vec(&mut f, p.a, m, dim, &mut buf));
            panels.push(gk15_vec(&mut f, m, p.b, dim, &mut buf));
        }
    }
}

/// Scalar adaptive integration over `[a, b]` split into `initial` panels.
pub fn integrate<F>(mut f: F, a: f64, b: f64, initial: usize, opts: &QuadOptions) -> Result<f64, QuadratureError>
where
    F: FnMut(f64) -> f64,
{
    let n = initial.max(1);
    let breaks: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    integrate_vec(|x, out| out[0] = f(x), &breaks, 1, opts).map(|(v, _)| v[0])
}
