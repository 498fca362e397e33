//! Verified linear algebra: linear solves, positive definiteness and the
//! interval Newton operator.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{IBox, IMatrix, IVector, Interval};

/// A midpoint inverse `R` together with an enclosure of `I - R·A`.
struct Preconditioner {
    r: IMatrix,
    r_point: DMatrix<f64>,
    g: IMatrix,
    g_norm: f64,
}

impl Preconditioner {
    fn new(a: &IMatrix) -> Result<Preconditioner> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                actual: a.ncols(),
            });
        }
        let r_point = a.midpoint().try_inverse().ok_or(Error::SingularEnclosure)?;
        if r_point.iter().any(|x| !x.is_finite()) {
            return Err(Error::SingularEnclosure);
        }
        let r = IMatrix::from_dmatrix(&r_point);
        let g = &IMatrix::identity(a.nrows()) - &(&r * a);
        let g_norm = inf_norm_upper(&g);
        if !(g_norm < 1.0) {
            return Err(Error::SingularEnclosure);
        }
        Ok(Preconditioner {
            r,
            r_point,
            g,
            g_norm,
        })
    }

    /// Encloses `{A⁻¹b}` for a single right-hand side.
    fn solve(&self, a: &IMatrix, b: &IVector) -> Result<IVector> {
        let n = a.nrows();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: b.len(),
            });
        }
        let x0 = &self.r_point * DVector::from_vec(b.midpoint());
        let x0i = IVector::from_point(x0.as_slice());
        let res = self.r.mul_vec(&(b - &a.mul_vec(&x0i)));
        let res_norm = res.iter().map(|x| x.mag()).fold(0.0, f64::max);
        // ‖x − x0‖∞ ≤ ‖res‖∞ / (1 − ‖G‖∞)
        let denom = crate::interval::round::sub_down(1.0, self.g_norm);
        let delta = crate::interval::round::div_up(res_norm, denom);
        if !delta.is_finite() {
            return Err(Error::SingularEnclosure);
        }
        let mut e = IVector::new(vec![Interval::symmetric(delta); n]);
        for _ in 0..3 {
            let next = &res + &self.g.mul_vec(&e);
            match next.intersect(&e) {
                Some(t) => e = t,
                None => return Err(Error::SingularEnclosure),
            }
        }
        Ok(&x0i + &e)
    }
}

fn inf_norm_upper(m: &IMatrix) -> f64 {
    use crate::interval::round::add_up;
    (0..m.nrows())
        .map(|i| m.row(i).iter().fold(0.0, |s, x| add_up(s, x.mag())))
        .fold(0.0, f64::max)
}

/// Encloses the solution set `{A⁻¹b : A ∈ a, b ∈ b}` by a midpoint-
/// preconditioned Krawczyk iteration.
pub fn solve_interval_linear(a: &IMatrix, b: &IVector) -> Result<IVector> {
    Preconditioner::new(a)?.solve(a, b)
}

/// Column-by-column version of [`solve_interval_linear`] for `A·X = B`.
pub fn solve_interval_linear_multi(a: &IMatrix, b: &IMatrix) -> Result<IMatrix> {
    let p = Preconditioner::new(a)?;
    let cols = (0..b.ncols())
        .map(|j| p.solve(a, &b.column(j)))
        .collect::<Result<Vec<_>>>()?;
    Ok(IMatrix::from_fn(a.nrows(), b.ncols(), |i, j| cols[j][i]))
}

/// An enclosure of `{A⁻¹ : A ∈ a}`.
pub fn inverse_enclosure(a: &IMatrix) -> Result<IMatrix> {
    solve_interval_linear_multi(a, &IMatrix::identity(a.nrows()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PdMethod {
    IntervalCholesky,
    Gershgorin,
}

/// Outcome of a positive-definiteness test.
///
/// `verified == false` means only that the test was inconclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PDVerdict {
    pub verified: bool,
    pub method: PdMethod,
    /// Smallest certified pivot or Gershgorin disc lower bound.
    pub margin: f64,
}

/// Certifies that every symmetric point matrix in `½(M + Mᵀ)` is positive
/// definite.
pub fn is_positive_definite(m: &IMatrix) -> PDVerdict {
    assert!(m.is_square(), "positive definiteness needs a square matrix");
    let s = m.symmetrize();
    let chol = interval_cholesky(&s);
    if chol.verified {
        return chol;
    }
    let gersh = preconditioned_gershgorin(&s);
    if gersh.verified {
        gersh
    } else {
        chol
    }
}

fn interval_cholesky(s: &IMatrix) -> PDVerdict {
    let n = s.nrows();
    let mut l = IMatrix::zeros(n, n);
    let mut margin = f64::INFINITY;
    for j in 0..n {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= l[(j, k)].sqr();
        }
        margin = margin.min(d.lo());
        if !(d.lo() > 0.0) {
            return PDVerdict {
                verified: false,
                method: PdMethod::IntervalCholesky,
                margin,
            };
        }
        let ljj = d.sqrt().expect("positive pivot");
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut t = s[(i, j)];
            for k in 0..j {
                t -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = t.checked_div(ljj).expect("positive pivot");
        }
    }
    PDVerdict {
        verified: true,
        method: PdMethod::IntervalCholesky,
        margin: if n == 0 { 0.0 } else { margin },
    }
}

/// Gershgorin discs of `XᵀSX` with `X` the eigenvectors of `mid(S)`.
fn preconditioned_gershgorin(s: &IMatrix) -> PDVerdict {
    let n = s.nrows();
    let fail = PDVerdict {
        verified: false,
        method: PdMethod::Gershgorin,
        margin: f64::NEG_INFINITY,
    };
    let mid = s.midpoint();
    let mid = (&mid + mid.transpose()) * 0.5;
    let eig = SymmetricEigen::new(mid);
    let x = IMatrix::from_dmatrix(&eig.eigenvectors);
    let xt = x.transpose();
    // X must be invertible for the congruence to preserve definiteness.
    let defect = &(&xt * &x) - &IMatrix::identity(n);
    if !(inf_norm_upper(&defect) < 1.0) {
        return fail;
    }
    let c = &(&xt * s) * &x;
    let mut margin = f64::INFINITY;
    for i in 0..n {
        let mut lo = Interval::point(c[(i, i)].lo());
        for j in 0..n {
            if j != i {
                lo -= Interval::point(c[(i, j)].mag());
            }
        }
        margin = margin.min(lo.lo());
    }
    PDVerdict {
        verified: margin > 0.0,
        method: PdMethod::Gershgorin,
        margin,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NewtonVerdict {
    UniqueRoot,
    NoRoot,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonResult {
    pub verdict: NewtonVerdict,
    /// Present iff the verdict is [`NewtonVerdict::UniqueRoot`].
    pub root_box: Option<IBox>,
    pub iterations: usize,
}

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_MIN_GAIN: f64 = 0.01;

/// Interval Newton operator `N(x₀, X) = x₀ − [Df(X)]⁻¹ f(x₀)` with
/// refinement on `N ∩ X` until the width stops improving.
///
/// `f` must accept arbitrary boxes: it is evaluated at the expansion point
/// and, as an exclusion test, over the whole current box.
pub fn interval_newton<F, DF>(f: F, df: DF, x: &IBox, x0: &[f64]) -> NewtonResult
where
    F: Fn(&IVector) -> Result<IVector>,
    DF: Fn(&IBox) -> Result<IMatrix>,
{
    let inconclusive = |k| NewtonResult {
        verdict: NewtonVerdict::Inconclusive,
        root_box: None,
        iterations: k,
    };
    if !x.contains_point(x0) {
        return inconclusive(0);
    }
    let mut xk = x.clone();
    let mut center = x0.to_vec();
    let mut unique = false;
    for k in 1..=NEWTON_MAX_ITER {
        if let Ok(range) = f(&xk) {
            if range.iter().any(|r| !r.contains_zero()) {
                return NewtonResult {
                    verdict: NewtonVerdict::NoRoot,
                    root_box: None,
                    iterations: k,
                };
            }
        }
        let c = IVector::from_point(&center);
        let step = match (f(&c), df(&xk)) {
            (Ok(fc), Ok(j)) => solve_interval_linear(&j, &fc),
            (Err(e), _) | (_, Err(e)) => Err(e),
        };
        let Ok(step) = step else {
            return if unique {
                found(xk, k)
            } else {
                inconclusive(k)
            };
        };
        let n = &c - &step;
        if n.interior_subset(&xk) {
            unique = true;
        }
        let Some(next) = n.intersect(&xk) else {
            return NewtonResult {
                verdict: NewtonVerdict::NoRoot,
                root_box: None,
                iterations: k,
            };
        };
        let old_w = xk.max_width();
        let new_w = next.max_width();
        xk = next;
        center = xk.midpoint();
        if unique && new_w > (1.0 - NEWTON_MIN_GAIN) * old_w {
            return found(xk, k);
        }
        if !unique && new_w >= old_w {
            return inconclusive(k);
        }
    }
    if unique {
        found(xk, NEWTON_MAX_ITER)
    } else {
        inconclusive(NEWTON_MAX_ITER)
    }
}

fn found(b: IBox, k: usize) -> NewtonResult {
    NewtonResult {
        verdict: NewtonVerdict::UniqueRoot,
        root_box: Some(b),
        iterations: k,
    }
}
