use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::round::{add_up, mul_up, sqrt_up};
use super::Interval;

/// A vector of intervals.
#[derive(Clone, PartialEq, Debug, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IVector(Vec<Interval>);

/// An interval vector read as the product set `Π [aᵢ, bᵢ]`.
pub type IBox = IVector;

impl IVector {
    pub fn new(v: Vec<Interval>) -> IVector {
        IVector(v)
    }

    pub fn zeros(n: usize) -> IVector {
        IVector(vec![Interval::ZERO; n])
    }

    /// Degenerate box at a point.
    pub fn from_point(p: &[f64]) -> IVector {
        IVector(p.iter().map(|&x| Interval::point(x)).collect())
    }

    /// Box from `(lo, hi)` pairs.
    pub fn from_bounds(b: &[(f64, f64)]) -> IVector {
        IVector(b.iter().map(|&(l, h)| Interval::new(l, h)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interval> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Interval] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<Interval> {
        self.0
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.0.iter().map(|x| x.mid()).collect()
    }

    /// Largest component width.
    pub fn max_width(&self) -> f64 {
        self.0.iter().map(|x| x.width()).fold(0.0, f64::max)
    }

    /// Per-component radii.
    pub fn radii(&self) -> Vec<f64> {
        self.0.iter().map(|x| x.rad()).collect()
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        p.len() == self.len() && self.0.iter().zip(p).all(|(x, &v)| x.contains(v))
    }

    pub fn contains_zero(&self) -> bool {
        self.0.iter().all(|x| x.contains_zero())
    }

    pub fn subset(&self, other: &IVector) -> bool {
        self.len() == other.len() && self.0.iter().zip(&other.0).all(|(a, b)| a.subset(*b))
    }

    pub fn interior_subset(&self, other: &IVector) -> bool {
        self.len() == other.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| a.interior_subset(*b))
    }

    pub fn hull(&self, other: &IVector) -> IVector {
        assert_eq!(self.len(), other.len());
        IVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.hull(*b))
                .collect(),
        )
    }

    /// Componentwise intersection; `None` if any component is disjoint.
    pub fn intersect(&self, other: &IVector) -> Option<IVector> {
        assert_eq!(self.len(), other.len());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.intersect(*b))
            .collect::<Option<Vec<_>>>()
            .map(IVector)
    }

    pub fn dot(&self, other: &IVector) -> Interval {
        assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).map(|(a, b)| *a * *b).sum()
    }

    pub fn scale(&self, s: Interval) -> IVector {
        IVector(self.0.iter().map(|x| *x * s).collect())
    }

    /// Enclosure of `{‖x‖₂ : x ∈ self}`.
    pub fn norm(&self) -> Interval {
        let s: Interval = self.0.iter().map(|x| x.sqr()).sum();
        s.sqrt().expect("sum of squares is nonnegative")
    }

    /// Upper bound on the Euclidean norm over the box.
    pub fn norm_upper(&self) -> f64 {
        let s = self
            .0
            .iter()
            .map(|x| mul_up(x.mag(), x.mag()))
            .fold(0.0, add_up);
        sqrt_up(s)
    }

    /// Splits along `axis` into `k` boxes whose union is `self`.
    pub fn subdivide(&self, axis: usize, k: usize) -> Vec<IVector> {
        self.0[axis]
            .subdivide(k)
            .into_iter()
            .map(|piece| {
                let mut b = self.clone();
                b.0[axis] = piece;
                b
            })
            .collect()
    }

    /// Grid of `counts[i]` pieces along each axis, in lexicographic order.
    pub fn grid(&self, counts: &[usize]) -> Vec<IVector> {
        assert_eq!(counts.len(), self.len());
        let mut out = vec![self.clone()];
        for (axis, &k) in counts.iter().enumerate() {
            out = out.iter().flat_map(|b| b.subdivide(axis, k)).collect();
        }
        out
    }

    pub fn map(&self, f: impl Fn(Interval) -> Interval) -> IVector {
        IVector(self.0.iter().map(|&x| f(x)).collect())
    }
}

/// Enclosure of the Euclidean norm over a box.
pub fn vec_norm_sup(v: &IVector) -> Interval {
    v.norm()
}

impl From<Vec<Interval>> for IVector {
    fn from(v: Vec<Interval>) -> Self {
        IVector(v)
    }
}

impl FromIterator<Interval> for IVector {
    fn from_iter<I: IntoIterator<Item = Interval>>(iter: I) -> Self {
        IVector(iter.into_iter().collect())
    }
}

impl Index<usize> for IVector {
    type Output = Interval;
    fn index(&self, i: usize) -> &Interval {
        &self.0[i]
    }
}

impl IndexMut<usize> for IVector {
    fn index_mut(&mut self, i: usize) -> &mut Interval {
        &mut self.0[i]
    }
}

impl<'a> IntoIterator for &'a IVector {
    type Item = &'a Interval;
    type IntoIter = std::slice::Iter<'a, Interval>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl Add for &IVector {
    type Output = IVector;
    fn add(self, rhs: &IVector) -> IVector {
        assert_eq!(self.len(), rhs.len());
        IVector(self.0.iter().zip(&rhs.0).map(|(a, b)| *a + *b).collect())
    }
}

impl Sub for &IVector {
    type Output = IVector;
    fn sub(self, rhs: &IVector) -> IVector {
        assert_eq!(self.len(), rhs.len());
        IVector(self.0.iter().zip(&rhs.0).map(|(a, b)| *a - *b).collect())
    }
}

impl Neg for &IVector {
    type Output = IVector;
    fn neg(self) -> IVector {
        IVector(self.0.iter().map(|a| -*a).collect())
    }
}

impl Mul<Interval> for &IVector {
    type Output = IVector;
    fn mul(self, s: Interval) -> IVector {
        self.scale(s)
    }
}

impl Add for IVector {
    type Output = IVector;
    fn add(self, rhs: IVector) -> IVector {
        &self + &rhs
    }
}

impl Sub for IVector {
    type Output = IVector;
    fn sub(self, rhs: IVector) -> IVector {
        &self - &rhs
    }
}
