use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::round::{add_up, mul_up, sqrt_up};
use super::{IVector, Interval};

/// A dense row-major matrix of intervals.
#[derive(Clone, PartialEq, Debug)]
pub struct IMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Interval>,
}

impl IMatrix {
    pub fn zeros(rows: usize, cols: usize) -> IMatrix {
        IMatrix {
            rows,
            cols,
            data: vec![Interval::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> IMatrix {
        let mut m = IMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Interval::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Interval) -> IMatrix {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        IMatrix { rows, cols, data }
    }

    /// Builds from rows of intervals; all rows must have equal length.
    pub fn from_rows(rows: Vec<Vec<Interval>>) -> IMatrix {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c), "ragged rows");
        IMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn from_point_rows(rows: &[&[f64]]) -> IMatrix {
        IMatrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| Interval::point(x)).collect())
                .collect(),
        )
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> IMatrix {
        IMatrix::from_fn(m.nrows(), m.ncols(), |i, j| Interval::point(m[(i, j)]))
    }

    pub fn diagonal(d: &[Interval]) -> IMatrix {
        let mut m = IMatrix::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[Interval] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> IVector {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interval> {
        self.data.iter()
    }

    pub fn transpose(&self) -> IMatrix {
        IMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn midpoint(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)].mid())
    }

    /// Entrywise upper bounds on `|a_ij|`.
    pub fn mag(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)].mag())
    }

    pub fn max_width(&self) -> f64 {
        self.data.iter().map(|x| x.width()).fold(0.0, f64::max)
    }

    /// Block of `nr × nc` entries starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> IMatrix {
        assert!(r0 + nr <= self.rows && c0 + nc <= self.cols);
        IMatrix::from_fn(nr, nc, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn hull(&self, other: &IMatrix) -> IMatrix {
        self.zip_with(other, |a, b| a.hull(b))
    }

    pub fn subset(&self, other: &IMatrix) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.data.iter().zip(&other.data).all(|(a, b)| a.subset(*b))
    }

    pub fn contains_point(&self, m: &DMatrix<f64>) -> bool {
        m.nrows() == self.rows
            && m.ncols() == self.cols
            && (0..self.rows).all(|i| (0..self.cols).all(|j| self[(i, j)].contains(m[(i, j)])))
    }

    pub fn scale(&self, s: Interval) -> IMatrix {
        self.map(|x| x * s)
    }

    pub fn map(&self, f: impl Fn(Interval) -> Interval) -> IMatrix {
        IMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    fn zip_with(&self, other: &IMatrix, f: impl Fn(Interval, Interval) -> Interval) -> IMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        IMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `½(M + Mᵀ)`.
    pub fn symmetrize(&self) -> IMatrix {
        assert!(self.is_square());
        let half = Interval::point(0.5);
        IMatrix::from_fn(self.rows, self.cols, |i, j| {
            if i == j {
                self[(i, i)]
            } else {
                (self[(i, j)] + self[(j, i)]) * half
            }
        })
    }

    pub fn mul_vec(&self, v: &IVector) -> IVector {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| *a * *b).sum())
            .collect()
    }

    pub fn mul_mat(&self, other: &IMatrix) -> IMatrix {
        assert_eq!(self.cols, other.rows);
        IMatrix::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).map(|k| self[(i, k)] * other[(k, j)]).sum()
        })
    }

    /// Upper bound on the spectral norm of every point matrix inside.
    pub fn opnorm_upper(&self) -> f64 {
        mat_opnorm_upper(self)
    }

    pub fn trace(&self) -> Interval {
        assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }
}

/// Upper bound on `‖M‖₂` over an interval matrix: the smaller of the
/// Frobenius norm and `√(‖M‖₁‖M‖∞)`, both taken on the magnitude majorant.
pub fn mat_opnorm_upper(m: &IMatrix) -> f64 {
    let a = m.mag();
    let mut frob = 0.0;
    for x in a.iter() {
        frob = add_up(frob, mul_up(*x, *x));
    }
    let frob = sqrt_up(frob);
    let one = (0..a.ncols())
        .map(|j| a.column(j).iter().fold(0.0, |s, x| add_up(s, *x)))
        .fold(0.0, f64::max);
    let inf = (0..a.nrows())
        .map(|i| a.row(i).iter().fold(0.0, |s, x| add_up(s, *x)))
        .fold(0.0, f64::max);
    frob.min(sqrt_up(mul_up(one, inf)))
}

impl Index<(usize, usize)> for IMatrix {
    type Output = Interval;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Interval {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for IMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Interval {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &IMatrix {
    type Output = IMatrix;
    fn add(self, rhs: &IMatrix) -> IMatrix {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &IMatrix {
    type Output = IMatrix;
    fn sub(self, rhs: &IMatrix) -> IMatrix {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &IMatrix {
    type Output = IMatrix;
    fn mul(self, rhs: &IMatrix) -> IMatrix {
        self.mul_mat(rhs)
    }
}

impl Mul<&IVector> for &IMatrix {
    type Output = IVector;
    fn mul(self, rhs: &IVector) -> IVector {
        self.mul_vec(rhs)
    }
}

impl Serialize for IMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<&[Interval]> = (0..self.rows).map(|i| self.row(i)).collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for IMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<Interval>>::deserialize(d)?;
        let c = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != c) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(IMatrix::from_rows(rows))
    }
}
