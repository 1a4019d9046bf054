/// Rows of the `N x N` orthonormal 2D Haar analysis matrix for a `side x side`
/// image with `levels` scales, in the level-major / subband-major / row-major
/// order used by `turbo_amp::wavelet`. Row `k` is the basis image of coefficient
/// `k` flattened row-major, so `theta_k = <row_k, x>`.
pub fn dense_haar_basis(side: usize, levels: usize) -> Vec<Vec<f64>> {
    let approx = side >> levels;
    let mut rows = Vec::with_capacity(side * side);

    // scaling function on a block of width `w`
    let phi = |t: usize, w: usize| 1.0 / (w as f64).sqrt() * if t < w { 1.0 } else { 0.0 };
    let psi = |t: usize, w: usize| {
        let s = 1.0 / (w as f64).sqrt();
        if t < w / 2 {
            s
        } else if t < w {
            -s
        } else {
            0.0
        }
    };

    let block = side / approx;
    for r in 0..approx {
        for c in 0..approx {
            rows.push(basis_image(side, r * block, c * block, block, |y, x| {
                phi(y, block) * phi(x, block)
            }));
        }
    }
    for j in 0..levels {
        let s = approx << j;
        let w = side / s;
        // (vertical fn, horizontal fn): HighLow, LowHigh, HighHigh
        for band in 0..3 {
            for r in 0..s {
                for c in 0..s {
                    rows.push(basis_image(side, r * w, c * w, w, |y, x| match band {
                        0 => phi(y, w) * psi(x, w),
                        1 => psi(y, w) * phi(x, w),
                        _ => psi(y, w) * psi(x, w),
                    }));
                }
            }
        }
    }
    rows
}

fn basis_image(
    side: usize,
    top: usize,
    left: usize,
    w: usize,
    f: impl Fn(usize, usize) -> f64,
) -> Vec<f64> {
    let mut img = vec![0.0; side * side];
    for y in 0..w {
        for x in 0..w {
            img[(top + y) * side + left + x] = f(y, x);
        }
    }
    img
}
