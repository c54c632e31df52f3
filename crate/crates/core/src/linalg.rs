//! Small dense symmetric matrices, enough for the quadratic (`p = 2`) fast
//! path and diagonal preconditioning. Meshes here are desk-scale, so a flat
//! row-major store is fine.

use crate::real::Real;

#[derive(Clone, Debug)]
pub struct SymMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> SymMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] += v;
        if i != j {
            self.data[j * self.n + i] += v;
        }
    }

    /// Adds to entry (i, j) only; use when the caller enumerates both orders.
    #[inline]
    pub fn add_raw(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] += v;
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        let mut out = vec![T::zero(); self.n];
        for i in 0..self.n {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            let mut acc = T::zero();
            for (a, b) in row.iter().zip(x.iter()) {
                acc += *a * *b;
            }
            out[i] = acc;
        }
        out
    }

    /// xᵀ A x
    pub fn quad_form(&self, x: &[T]) -> T {
        let ax = self.matvec(x);
        x.iter().zip(ax.iter()).map(|(a, b)| *a * *b).sum()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b.iter()).map(|(x, y)| *x * *y).sum()
}

pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += alpha * *xi;
    }
}

pub fn norm2<T: Real>(x: &[T]) -> T {
    dot(x, x).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_fill_and_matvec() {
        let mut m = SymMatrix::<f64>::zeros(2);
        m.add(0, 0, 2.0);
        m.add(0, 1, 1.0);
        m.add(1, 1, 3.0);
        assert_eq!(m.get(1, 0), 1.0);
        let y = m.matvec(&[1.0, 2.0]);
        assert_eq!(y, vec![4.0, 7.0]);
        assert_eq!(m.quad_form(&[1.0, 2.0]), 18.0);
    }
}
