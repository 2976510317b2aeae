//! Strided matrix multiply over `f32`/`f64` plus the small numeric kernels
//! the network needs.

use num_traits::Float;

pub trait Scalar: Float + Default + Send + Sync + std::fmt::Debug + std::iter::Sum + 'static {
    /// `c = alpha * a * b + beta * c` on strided row/column layouts.
    ///
    /// # Safety
    /// The strides must address memory inside the given pointers' allocations.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn of(v: f64) -> Self {
        Self::from(v).expect("representable")
    }
}

impl Scalar for f32 {
    unsafe fn gemm_raw(
        m: usize, k: usize, n: usize, alpha: f32, a: *const f32, rsa: isize, csa: isize,
        b: *const f32, rsb: isize, csb: isize, beta: f32, c: *mut f32, rsc: isize, csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Scalar for f64 {
    unsafe fn gemm_raw(
        m: usize, k: usize, n: usize, alpha: f64, a: *const f64, rsa: isize, csa: isize,
        b: *const f64, rsb: isize, csb: isize, beta: f64, c: *mut f64, rsc: isize, csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// Strided view of a matrix inside a slice: element `(i, j)` lives at
/// `off + i * rs + j * cs`.
#[derive(Debug, Clone, Copy)]
pub struct View {
    pub off: usize,
    pub rs: usize,
    pub cs: usize,
}

impl View {
    pub fn rows(off: usize, rs: usize) -> Self {
        View { off, rs, cs: 1 }
    }

    /// The transpose of a row-major block.
    pub fn t(off: usize, rs: usize) -> Self {
        View { off, rs: 1, cs: rs }
    }

    fn last(&self, rows: usize, cols: usize) -> usize {
        if rows == 0 || cols == 0 {
            self.off
        } else {
            self.off + (rows - 1) * self.rs + (cols - 1) * self.cs
        }
    }
}

/// `c[m x n] = a[m x k] * b[k x n] + beta * c`, bounds-checked.
#[allow(clippy::too_many_arguments)]
pub fn gemm<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    av: View,
    b: &[T],
    bv: View,
    beta: T,
    c: &mut [T],
    cv: View,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || av.last(m, k) < a.len(), "gemm: a out of bounds");
    assert!(k == 0 || bv.last(k, n) < b.len(), "gemm: b out of bounds");
    assert!(cv.last(m, n) < c.len(), "gemm: c out of bounds");
    // SAFETY: every addressed element was bounds-checked above.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            T::one(),
            a.as_ptr().add(av.off),
            av.rs as isize,
            av.cs as isize,
            b.as_ptr().add(bv.off),
            bv.rs as isize,
            bv.cs as isize,
            beta,
            c.as_mut_ptr().add(cv.off),
            cv.rs as isize,
            cv.cs as isize,
        )
    }
}

/// In-place softmax over `row`, returning nothing; max-subtracted.
pub fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().fold(T::neg_infinity(), |m, v| m.max(*v));
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum = sum + *v;
    }
    let inv = T::one() / sum;
    for v in row.iter_mut() {
        *v = *v * inv;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_transposed_views() {
        // a = [[1,2,3],[4,5,6]], b = a^T via a transposed view.
        let a = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut c = [0.0f64; 4];
        gemm(2, 3, 2, &a, View::rows(0, 3), &a, View::t(0, 3), 0.0, &mut c, View::rows(0, 2));
        assert_eq!(c, [14.0, 32.0, 32.0, 77.0]);
        gemm(2, 3, 2, &a, View::rows(0, 3), &a, View::t(0, 3), 1.0, &mut c, View::rows(0, 2));
        assert_eq!(c, [28.0, 64.0, 64.0, 154.0]);
    }

    #[test]
    fn softmax_normalizes() {
        let mut r = [1000.0f32, 1001.0, 999.0];
        softmax_in_place(&mut r);
        assert!((r.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        assert!(r[1] > r[0] && r[0] > r[2]);
    }
}
