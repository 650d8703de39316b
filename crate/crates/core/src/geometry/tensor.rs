use std::ops::{Index, IndexMut};

use serde_json::Value;

use crate::real::Real;

/// Dense coordinate-component tensor: every index runs over `0..dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub dim: usize,
    pub rank: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Tensor<T> {
    pub fn filled(dim: usize, rank: usize, v: T) -> Self {
        Tensor { dim, rank, data: vec![v; dim.pow(rank as u32)] }
    }

    pub fn from_fn<const N: usize>(dim: usize, mut f: impl FnMut([usize; N]) -> T) -> Self {
        let len = dim.pow(N as u32);
        let mut data = Vec::with_capacity(len);
        let mut ix = [0usize; N];
        for _ in 0..len {
            data.push(f(ix));
            for slot in (0..N).rev() {
                ix[slot] += 1;
                if ix[slot] < dim {
                    break;
                }
                ix[slot] = 0;
            }
        }
        Tensor { dim, rank: N, data }
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Tensor<U> {
        Tensor { dim: self.dim, rank: self.rank, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    #[inline]
    fn offset<const N: usize>(&self, ix: [usize; N]) -> usize {
        debug_assert_eq!(N, self.rank);
        ix.iter().fold(0, |acc, &i| acc * self.dim + i)
    }
}

impl<T: Real> Tensor<T> {
    pub fn zeros(dim: usize, rank: usize) -> Self {
        Self::filled(dim, rank, T::zero())
    }

    pub fn values(&self) -> Tensor<f64> {
        self.map(|v| v.value())
    }
}

impl Tensor<f64> {
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Tensor<f64>) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Nested JSON arrays, outermost index first.
    pub fn to_json(&self) -> Value {
        fn build(data: &[f64], dim: usize, rank: usize) -> Value {
            if rank == 0 {
                return Value::from(data[0]);
            }
            let stride = dim.pow(rank as u32 - 1);
            Value::Array((0..dim).map(|i| build(&data[i * stride..], dim, rank - 1)).collect())
        }
        build(&self.data, self.dim, self.rank)
    }
}

impl<T: Copy, const N: usize> Index<[usize; N]> for Tensor<T> {
    type Output = T;
    #[inline]
    fn index(&self, ix: [usize; N]) -> &T {
        &self.data[self.offset(ix)]
    }
}

impl<T: Copy, const N: usize> IndexMut<[usize; N]> for Tensor<T> {
    #[inline]
    fn index_mut(&mut self, ix: [usize; N]) -> &mut T {
        let o = self.offset(ix);
        &mut self.data[o]
    }
}

/// Inverse of a small dense matrix by Gauss-Jordan elimination with partial pivoting.
pub fn invert<T: Real>(m: &Tensor<T>) -> Option<Tensor<T>> {
    let n = m.dim;
    let mut a = m.clone();
    let mut inv = Tensor::from_fn(n, |[i, j]| if i == j { T::one() } else { T::zero() });
    for col in 0..n {
        let pivot = (col..n).max_by(|&r, &s| {
            a[[r, col]].value().abs().total_cmp(&a[[s, col]].value().abs())
        })?;
        if a[[pivot, col]].value() == 0.0 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.data.swap(pivot * n + k, col * n + k);
                inv.data.swap(pivot * n + k, col * n + k);
            }
        }
        let p = a[[col, col]];
        for k in 0..n {
            a[[col, k]] = a[[col, k]] / p;
            inv[[col, k]] = inv[[col, k]] / p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            // a zero value may still carry derivative components
            let f = a[[r, col]];
            for k in 0..n {
                let ak = a[[col, k]];
                let ik = inv[[col, k]];
                a[[r, k]] -= f * ak;
                inv[[r, k]] -= f * ik;
            }
        }
    }
    Some(inv)
}
