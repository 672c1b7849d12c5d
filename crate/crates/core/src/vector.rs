//! Small dense-vector helpers and the canonical worker reduction.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Pairwise (tree) sum of `n` rows, written to `out`.
///
/// The split is always `mid = n / 2`, left half first. This fixed tree is the
/// canonical reduction order used for every cross-worker average, so results
/// do not depend on how workers were scheduled.
pub fn pairwise_sum<'a, F>(n: usize, row: &F, out: &mut [f64])
where
    F: Fn(usize) -> &'a [f64],
{
    sum_range(0, n, row, out);
}

fn sum_range<'a, F>(lo: usize, hi: usize, row: &F, out: &mut [f64])
where
    F: Fn(usize) -> &'a [f64],
{
    match hi - lo {
        0 => out.iter_mut().for_each(|x| *x = 0.0),
        1 => out.copy_from_slice(row(lo)),
        2 => {
            let (a, b) = (row(lo), row(lo + 1));
            for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                *o = x + y;
            }
        }
        len => {
            let mid = lo + len / 2;
            sum_range(lo, mid, row, out);
            let mut right = vec![0.0; out.len()];
            sum_range(mid, hi, row, &mut right);
            for (o, r) in out.iter_mut().zip(&right) {
                *o += r;
            }
        }
    }
}

/// Pairwise mean of `n >= 1` rows.
pub fn pairwise_mean<'a, F>(n: usize, row: &F, out: &mut [f64])
where
    F: Fn(usize) -> &'a [f64],
{
    pairwise_sum(n, row, out);
    let m = n as f64;
    out.iter_mut().for_each(|x| *x /= m);
}
