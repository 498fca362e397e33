//! Validated integration of autonomous ODEs.
//!
//! Sets are carried in Lohner form `x̂ + B·r, r ∈ R` and advanced by a
//! Taylor method whose Lagrange remainder is bounded over a Picard rough
//! enclosure. Fields only need to produce Taylor coefficients of their
//! solutions through a generic coefficient type, which lets the same
//! recurrence serve plain floats, intervals and first-order jets.

use std::io::Write;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{IBox, IMatrix, IVector, Interval};
use crate::linalg::inverse_enclosure;

/// Arithmetic needed by Taylor-coefficient recurrences.
pub trait Coeff:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    /// A constant with the same shape as `like`.
    fn constant(c: Interval, like: &Self) -> Self;
    fn scale(&self, s: Interval) -> Self;
    /// The value part, as an interval.
    fn value(&self) -> Interval;
    fn recip(&self) -> Result<Self>;
    fn sqrt(&self) -> Result<Self>;
    /// Narrows the value part to `iv` when the two overlap.
    fn restrict(&self, iv: Interval) -> Self;
}

impl Coeff for Interval {
    fn restrict(&self, iv: Interval) -> Self {
        self.intersect(iv).unwrap_or(*self)
    }
    fn constant(c: Interval, _: &Self) -> Self {
        c
    }
    fn scale(&self, s: Interval) -> Self {
        *self * s
    }
    fn value(&self) -> Interval {
        *self
    }
    fn recip(&self) -> Result<Self> {
        Interval::recip(*self)
    }
    fn sqrt(&self) -> Result<Self> {
        Interval::sqrt(*self)
    }
}

impl Coeff for f64 {
    fn restrict(&self, _: Interval) -> Self {
        *self
    }
    fn constant(c: Interval, _: &Self) -> Self {
        c.mid()
    }
    fn scale(&self, s: Interval) -> Self {
        self * s.mid()
    }
    fn value(&self) -> Interval {
        if self.is_finite() {
            Interval::point(*self)
        } else {
            Interval::ENTIRE
        }
    }
    fn recip(&self) -> Result<Self> {
        if *self == 0.0 {
            return Err(Error::DivisionByZeroInterval(Interval::ZERO));
        }
        Ok(1.0 / self)
    }
    fn sqrt(&self) -> Result<Self> {
        if *self < 0.0 {
            return Err(Error::DomainError {
                function: "sqrt",
                arg: Interval::point(*self),
            });
        }
        Ok(f64::sqrt(*self))
    }
}

/// Largest state dimension a [`Jet`] can differentiate in.
pub const JET_DIM: usize = 6;

/// An interval value with its gradient in up to [`JET_DIM`] variables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: Interval,
    pub d: [Interval; JET_DIM],
    n: usize,
}

impl Jet {
    pub fn constant_n(v: Interval, n: usize) -> Jet {
        assert!(n <= JET_DIM, "jet dimension {n} exceeds {JET_DIM}");
        Jet {
            v,
            d: [Interval::ZERO; JET_DIM],
            n,
        }
    }

    /// The `i`-th of `n` independent variables, valued `v`.
    pub fn variable(v: Interval, i: usize, n: usize) -> Jet {
        let mut j = Jet::constant_n(v, n);
        j.d[i] = Interval::ONE;
        j
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn grad(&self) -> &[Interval] {
        &self.d[..self.n]
    }

    fn chain(&self, v: Interval, dv: Interval) -> Jet {
        let mut out = Jet::constant_n(v, self.n);
        for i in 0..self.n {
            out.d[i] = self.d[i] * dv;
        }
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let n = self.n.max(rhs.n);
        let mut out = Jet::constant_n(self.v + rhs.v, n);
        for i in 0..n {
            out.d[i] = self.d[i] + rhs.d[i];
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        let n = self.n.max(rhs.n);
        let mut out = Jet::constant_n(self.v - rhs.v, n);
        for i in 0..n {
            out.d[i] = self.d[i] - rhs.d[i];
        }
        out
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let n = self.n.max(rhs.n);
        let mut out = Jet::constant_n(self.v * rhs.v, n);
        for i in 0..n {
            out.d[i] = self.v * rhs.d[i] + rhs.v * self.d[i];
        }
        out
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.chain(-self.v, -Interval::ONE)
    }
}

impl Coeff for Jet {
    fn restrict(&self, iv: Interval) -> Self {
        let mut j = *self;
        j.v = self.v.intersect(iv).unwrap_or(self.v);
        j
    }
    fn constant(c: Interval, like: &Self) -> Self {
        Jet::constant_n(c, like.n)
    }
    fn scale(&self, s: Interval) -> Self {
        self.chain(self.v * s, s)
    }
    fn value(&self) -> Interval {
        self.v
    }
    fn recip(&self) -> Result<Self> {
        let r = self.v.recip()?;
        Ok(self.chain(r, -r.sqr()))
    }
    fn sqrt(&self) -> Result<Self> {
        let s = self.v.sqrt()?;
        let ds = (s * 2.0).recip()?;
        Ok(self.chain(s, ds))
    }
}

/// `Σ_{j≤k} a_j b_{k−j}`.
pub fn cauchy<S: Coeff>(a: &[S], b: &[S], k: usize) -> S {
    let mut acc = a[0].clone() * b[k].clone();
    for j in 1..=k {
        acc = acc + a[j].clone() * b[k - j].clone();
    }
    acc
}

/// Coefficient `k ≥ 1` of `u = v^a`, given `v_0..v_k`, `u_0..u_{k−1}` and
/// an enclosure of `1/v_0`.
pub fn power_coeff<S: Coeff>(a: f64, v: &[S], u: &[S], k: usize, inv_v0: &S) -> S {
    let kf = k as f64;
    let w = |j: usize| Interval::point(a * (kf - j as f64) - j as f64);
    let mut acc = (v[k].clone() * u[0].clone()).scale(w(0));
    for j in 1..k {
        acc = acc + (v[k - j].clone() * u[j].clone()).scale(w(j));
    }
    (acc * inv_v0.clone()).scale(Interval::ONE / Interval::point(kf))
}

/// An autonomous vector field described through the Taylor coefficients
/// of its solutions.
pub trait OdeField: Sync {
    fn dim(&self) -> usize;

    /// Normalised Taylor coefficients `x_[0] = x0, …, x_[order]` of the
    /// solution through `x0`, indexed `[k][i]`.
    fn series<S: Coeff>(&self, x0: &[S], order: usize) -> Result<Vec<Vec<S>>>;

    /// The field over a box.
    fn eval(&self, x: &IVector) -> Result<IVector> {
        let s = self.series(x.as_slice(), 1)?;
        Ok(IVector::new(s[1].clone()))
    }

    /// The field at a point, in plain floating point.
    fn eval_f64(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.series(x, 1)?.swap_remove(1))
    }

    /// `DF` over a box, by forward differentiation of the recurrence.
    fn jacobian(&self, x: &IVector) -> Result<IMatrix> {
        let n = self.dim();
        let jets: Vec<Jet> = (0..n).map(|i| Jet::variable(x[i], i, n)).collect();
        let s = self.series(&jets, 1)?;
        Ok(IMatrix::from_fn(n, n, |i, j| s[1][i].d[j]))
    }
}

/// `x′ = A x + b`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AffineField {
    pub a: IMatrix,
    pub b: IVector,
}

impl AffineField {
    pub fn linear(a: IMatrix) -> AffineField {
        let n = a.nrows();
        AffineField {
            a,
            b: IVector::zeros(n),
        }
    }

    /// `x′ = y, y′ = −x`.
    pub fn harmonic() -> AffineField {
        AffineField::linear(IMatrix::from_point_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]))
    }

    pub fn diagonal(d: &[f64]) -> AffineField {
        let d: Vec<Interval> = d.iter().map(|&x| Interval::point(x)).collect();
        AffineField::linear(IMatrix::diagonal(&d))
    }
}

impl OdeField for AffineField {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn series<S: Coeff>(&self, x0: &[S], order: usize) -> Result<Vec<Vec<S>>> {
        let n = self.dim();
        if x0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: x0.len(),
            });
        }
        let mut out = vec![x0.to_vec()];
        for k in 0..order {
            let inv = Interval::ONE / Interval::point((k + 1) as f64);
            let prev = &out[k];
            let next: Vec<S> = (0..n)
                .map(|i| {
                    let mut acc = prev[0].scale(self.a[(i, 0)]);
                    for (j, pj) in prev.iter().enumerate().skip(1) {
                        acc = acc + pj.scale(self.a[(i, j)]);
                    }
                    if k == 0 {
                        acc = acc + S::constant(self.b[i], &x0[0]);
                    }
                    acc.scale(inv)
                })
                .collect();
            out.push(next);
        }
        Ok(out)
    }
}

/// The time-reversed field `x′ = −F(x)`.
#[derive(Clone, Debug)]
pub struct Reversed<F>(pub F);

impl<F: OdeField> OdeField for Reversed<F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn series<S: Coeff>(&self, x0: &[S], order: usize) -> Result<Vec<Vec<S>>> {
        let mut s = self.0.series(x0, order)?;
        for (k, c) in s.iter_mut().enumerate() {
            if k % 2 == 1 {
                for x in c.iter_mut() {
                    *x = -x.clone();
                }
            }
        }
        Ok(s)
    }
}

/// Global bounds on a field over a region: `‖F‖ ≤ mu_bound`, `‖DF‖ ≤ L`
/// and `DF` Lipschitz with constant `M`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorFieldBounds {
    pub mu_bound: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "M")]
    pub m: f64,
}

impl VectorFieldBounds {
    pub fn new(mu_bound: f64, l: f64, m: f64) -> Result<VectorFieldBounds> {
        if !(mu_bound >= 0.0 && l >= 0.0 && m >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "field bounds must be non-negative, got ({mu_bound}, {l}, {m})"
            )));
        }
        Ok(VectorFieldBounds { mu_bound, l, m })
    }

    /// Certified `‖F‖` and `‖DF‖` over `region`; `m` is taken on trust.
    pub fn over_box<F: OdeField>(f: &F, region: &IBox, m: f64) -> Result<VectorFieldBounds> {
        let mu_bound = f.eval(region)?.norm_upper();
        let l = f.jacobian(region)?.opnorm_upper();
        VectorFieldBounds::new(mu_bound, l, m)
    }
}

/// Upper bounds on `‖φ_t(p₁) − φ_t(p₂) − (p₁ − p₂)‖` and on the analogous
/// difference of field values, for `‖p₁ − p₂‖ = dist`.
pub fn gronwall_bounds(b: &VectorFieldBounds, t: f64, dist: f64) -> (f64, f64) {
    if t == 0.0 || dist == 0.0 {
        return (0.0, 0.0);
    }
    let t = Interval::point(t.abs());
    let l = Interval::point(b.l);
    let e = (t * l).exp();
    let d = Interval::point(dist);
    let g1 = (e - 1.0) * d;
    let g2 = (l * (e - 1.0) + t * e * Interval::point(b.mu_bound) * Interval::point(b.m)) * d;
    (g1.hi().max(0.0), g2.hi().max(0.0))
}

const ROUGH_ATTEMPTS: usize = 20;

fn widen(z: &IBox) -> IBox {
    z.map(|x| x.inflate(0.1 * x.width() + 1e-12 * x.mag() + f64::MIN_POSITIVE))
}

/// A box `Z` with `X₀ + [0,h]·F(Z) ⊆ Z`; every trajectory from `X₀`
/// stays inside it for times in `[0, h]`.
pub fn a_priori_enclosure<F: OdeField>(f: &F, x0: &IBox, h: f64) -> Result<IBox> {
    if !(h > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "step must be positive, got {h}"
        )));
    }
    let dt = Interval::new(0.0, h);
    let picard = |z: &IBox| -> Result<IBox> { Ok(x0 + &f.eval(z)?.scale(dt)) };
    let mut z = picard(x0)?;
    if z.subset(x0) {
        return Ok(x0.clone());
    }
    z = widen(&z);
    for _ in 0..ROUGH_ATTEMPTS {
        let next = picard(&z)?;
        if next.subset(&z) {
            return Ok(next);
        }
        z = widen(&z.hull(&next));
    }
    Err(Error::EnclosureFailure(format!(
        "rough enclosure did not stabilise for h = {h}"
    )))
}

/// The set `{midpoint + basis·r : r ∈ remainder}` at the given time.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowEnclosure {
    pub midpoint: Vec<f64>,
    pub basis: DMatrix<f64>,
    pub remainder: IBox,
    pub time: Interval,
}

impl FlowEnclosure {
    pub fn from_box(b: &IBox) -> FlowEnclosure {
        let mid = b.midpoint();
        let rem = b - &IVector::from_point(&mid);
        FlowEnclosure {
            basis: DMatrix::identity(b.len(), b.len()),
            midpoint: mid,
            remainder: rem,
            time: Interval::ZERO,
        }
    }

    pub fn from_point(p: &[f64]) -> FlowEnclosure {
        FlowEnclosure::from_box(&IVector::from_point(p))
    }

    /// Encloses `{c + A r : c ∈ center, A ∈ a, r ∈ r}` in Lohner form, with
    /// the basis taken from the QR factor of `mid(a)`.
    pub fn from_affine(center: &IVector, a: &IMatrix, r: &IBox) -> FlowEnclosure {
        let (midpoint, basis, remainder) = lohner_form(center, a, r);
        FlowEnclosure {
            midpoint,
            basis,
            remainder,
            time: Interval::ZERO,
        }
    }

    pub fn dim(&self) -> usize {
        self.midpoint.len()
    }

    /// Interval hull of the represented set.
    pub fn hull(&self) -> IBox {
        let b = IMatrix::from_dmatrix(&self.basis);
        &IVector::from_point(&self.midpoint) + &b.mul_vec(&self.remainder)
    }

    pub fn with_time(mut self, t: Interval) -> FlowEnclosure {
        self.time = t;
        self
    }
}

fn qr_basis(a: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let n = a.nrows();
    let mut order: Vec<usize> = (0..a.ncols()).collect();
    let score = |j: usize| a.column(j).norm() * weights[j];
    order.sort_by(|&i, &j| score(j).total_cmp(&score(i)));
    let p = DMatrix::from_fn(n, a.ncols(), |i, k| a[(i, order[k])]);
    if p.iter().any(|x| !x.is_finite()) || a.ncols() != n {
        return DMatrix::identity(n, n);
    }
    let q = p.qr().q();
    if q.iter().all(|x| x.is_finite()) {
        q
    } else {
        DMatrix::identity(n, n)
    }
}

/// Re-expresses `center + a·r` as `x̂ + Q·r′`.
fn lohner_form(center: &IVector, a: &IMatrix, r: &IBox) -> (Vec<f64>, DMatrix<f64>, IBox) {
    let n = center.len();
    let xhat = center.midpoint();
    let shift = center - &IVector::from_point(&xhat);
    let q = qr_basis(&a.midpoint(), &r.radii());
    let qi = IMatrix::from_dmatrix(&q);
    match inverse_enclosure(&qi) {
        Ok(qinv) => {
            let rem = &(&qinv * a).mul_vec(r) + &qinv.mul_vec(&shift);
            (xhat, q, rem)
        }
        Err(_) => {
            let rem = &a.mul_vec(r) + &shift;
            (xhat, DMatrix::identity(n, n), rem)
        }
    }
}

fn horner_vec(coeffs: &[IVector], s: Interval) -> IVector {
    let mut acc = coeffs[coeffs.len() - 1].clone();
    for c in coeffs[..coeffs.len() - 1].iter().rev() {
        acc = &acc.scale(s) + c;
    }
    acc
}

fn horner_mat(coeffs: &[IMatrix], s: Interval) -> IMatrix {
    let mut acc = coeffs[coeffs.len() - 1].clone();
    for c in coeffs[..coeffs.len() - 1].iter().rev() {
        acc = &acc.scale(s) + c;
    }
    acc
}

/// Everything computed for one Taylor step of length `h`; the set can be
/// evaluated at any time in `[0, h]`.
#[derive(Clone, Debug)]
pub struct StepData {
    pub h: f64,
    /// Rough enclosure valid on `[0, h]`.
    pub rough: IBox,
    start: FlowEnclosure,
    point: Vec<IVector>,
    over_box: Vec<IVector>,
    jac: Vec<IMatrix>,
    rem: IVector,
}

impl StepData {
    pub fn new<F: OdeField>(f: &F, e: &FlowEnclosure, h: f64, order: usize) -> Result<StepData> {
        let n = e.dim();
        let x = e.hull();
        let rough = a_priori_enclosure(f, &x, h)?;
        let xp: Vec<Interval> = e.midpoint.iter().map(|&v| Interval::point(v)).collect();
        let point: Vec<IVector> = f
            .series(&xp, order)?
            .into_iter()
            .map(IVector::new)
            .collect();
        let jets: Vec<Jet> = (0..n).map(|i| Jet::variable(x[i], i, n)).collect();
        let js = f.series(&jets, order)?;
        let over_box = js.iter().map(|c| c.iter().map(|j| j.v).collect()).collect();
        let jac = js
            .iter()
            .map(|c| IMatrix::from_fn(n, n, |i, j| c[i].d[j]))
            .collect();
        let rem = IVector::new(
            f.series(rough.as_slice(), order + 1)?
                .swap_remove(order + 1),
        );
        Ok(StepData {
            h,
            rough,
            start: e.clone(),
            point,
            over_box,
            jac,
            rem,
        })
    }

    pub fn order(&self) -> usize {
        self.point.len() - 1
    }

    /// Magnitude of the Lagrange remainder at the full step.
    pub fn remainder_size(&self) -> f64 {
        let p = self.order() as i32 + 1;
        self.rem.norm_upper() * self.h.abs().powi(p)
    }

    /// The propagated set at time `s ∈ [0, h]` after the step start.
    pub fn at(&self, s: f64) -> FlowEnclosure {
        debug_assert!(s >= 0.0 && s <= self.h);
        let si = Interval::point(s);
        let p = self.order() as i32 + 1;
        let sp = si.powi(p).unwrap_or(Interval::ENTIRE);
        let y = &horner_vec(&self.point, si) + &self.rem.scale(sp);
        let j = horner_mat(&self.jac, si);
        let jb = &j * &IMatrix::from_dmatrix(&self.start.basis);
        let (midpoint, basis, remainder) = lohner_form(&y, &jb, &self.start.remainder);
        FlowEnclosure {
            midpoint,
            basis,
            remainder,
            time: self.start.time + si,
        }
    }

    /// A box containing every state reached at times in `s ⊆ [0, h]`.
    pub fn over_times(&self, s: Interval) -> IBox {
        let p = self.order() as i32 + 1;
        let sp = s.powi(p).unwrap_or(Interval::ENTIRE);
        let b = &horner_vec(&self.over_box, s) + &self.rem.scale(sp);
        b.intersect(&self.rough).unwrap_or(self.rough.clone())
    }

    /// Float Taylor polynomial of the centre trajectory, component `i`.
    fn center_poly(&self, i: usize, s: f64) -> (f64, f64) {
        let mut v = 0.0;
        let mut d = 0.0;
        for c in self.point.iter().rev() {
            d = d * s + v;
            v = v * s + c[i].mid();
        }
        (v, d)
    }
}

/// Propagates `e` by exactly `h` with a Taylor method of the given order.
pub fn taylor_step<F: OdeField>(
    f: &F,
    e: &FlowEnclosure,
    h: f64,
    order: usize,
) -> Result<FlowEnclosure> {
    Ok(StepData::new(f, e, h, order)?.at(h))
}

/// Integrator settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaylorConfig {
    pub order: usize,
    /// Target size of the local remainder.
    pub tol: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for TaylorConfig {
    fn default() -> Self {
        TaylorConfig {
            order: 20,
            tol: 1e-14,
            h_min: 1e-9,
            h_max: 1.0,
            max_steps: 200_000,
        }
    }
}

impl TaylorConfig {
    /// Step suggested by the decay of the centre's Taylor coefficients.
    fn suggest<F: OdeField>(&self, f: &F, x: &[f64]) -> f64 {
        let Ok(c) = f.series(x, self.order) else {
            return self.h_min;
        };
        let mut h = self.h_max;
        for k in [self.order - 1, self.order] {
            let m = c[k].iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            if m > 0.0 && m.is_finite() {
                h = h.min((self.tol / m).powf(1.0 / k as f64));
            }
        }
        h.max(self.h_min)
    }

    /// One adaptive step of length at most `h_cap`.
    pub fn step<F: OdeField>(&self, f: &F, e: &FlowEnclosure, h_cap: f64) -> Result<StepData> {
        if self.order < 2 {
            return Err(Error::InvalidConfig(
                "Taylor order must be at least 2".into(),
            ));
        }
        let mut h = self.suggest(f, &e.midpoint).min(h_cap);
        let mut last = None;
        while h >= self.h_min.min(h_cap) {
            match StepData::new(f, e, h, self.order) {
                Ok(s) if s.remainder_size() <= 1e3 * self.tol || h <= self.h_min => return Ok(s),
                Ok(_) => {}
                Err(err) => last = Some(err),
            }
            h *= 0.5;
        }
        Err(last.unwrap_or_else(|| {
            Error::EnclosureFailure(format!("no admissible step at t = {}", e.time))
        }))
    }
}

/// One recorded step: the time span and a box containing the whole arc.
#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub time: Interval,
    pub enclosure: IBox,
}

impl StepRecord {
    fn of(data: &StepData) -> StepRecord {
        StepRecord {
            time: data.start.time + Interval::new(0.0, data.h),
            enclosure: data.rough.clone(),
        }
    }
}

/// Integrates `e` forward by `t`, reporting each step to `observe`.
pub fn integrate<F: OdeField>(
    f: &F,
    e: &FlowEnclosure,
    t: f64,
    cfg: &TaylorConfig,
    mut observe: impl FnMut(&StepRecord),
) -> Result<FlowEnclosure> {
    let mut cur = e.clone();
    let mut done = 0.0;
    for _ in 0..cfg.max_steps {
        let left = t - done;
        if left <= 0.0 {
            return Ok(cur.with_time(e.time + Interval::point(t)));
        }
        let data = cfg.step(f, &cur, left)?;
        observe(&StepRecord::of(&data));
        done += data.h;
        cur = data.at(data.h);
    }
    Err(Error::EnclosureFailure(format!(
        "step budget exhausted at t = {done}"
    )))
}

/// The hyperplane `{x_index = value}` crossed in the direction of
/// `sign(x_index′) = direction`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub index: usize,
    pub value: f64,
    pub direction: i8,
}

impl Section {
    pub fn new(index: usize, value: f64, direction: i8) -> Result<Section> {
        if direction != 1 && direction != -1 {
            return Err(Error::InvalidConfig("section direction must be ±1".into()));
        }
        Ok(Section {
            index,
            value,
            direction,
        })
    }

    /// `+1` past the section, `-1` before it, `0` if undecided.
    fn side(&self, x: Interval) -> i8 {
        let g = (x - self.value) * f64::from(self.direction);
        if g.is_pos() {
            1
        } else if g.is_neg() {
            -1
        } else {
            0
        }
    }
}

/// A certified first crossing.
#[derive(Clone, Debug, Serialize)]
pub struct Crossing {
    /// Image on the section; the section coordinate is exactly its value.
    pub image: FlowEnclosure,
    pub image_box: IBox,
    /// Enclosure of the crossing time of every point of the initial set.
    pub time: Interval,
    pub steps: usize,
}

/// The first crossing of `section` by every point of `e`, within `t_max`.
pub fn poincare_crossing<F: OdeField>(
    f: &F,
    e: &FlowEnclosure,
    section: &Section,
    t_max: f64,
    cfg: &TaylorConfig,
    mut observe: impl FnMut(&StepRecord),
) -> Result<Crossing> {
    let idx = section.index;
    let d = f64::from(section.direction);
    if idx >= e.dim() {
        return Err(Error::InvalidConfig(format!(
            "section index {idx} out of range"
        )));
    }
    if section.side(e.hull()[idx]) != -1 {
        return Err(Error::LostCrossing(
            "initial set is not strictly before the section".into(),
        ));
    }
    let mut cur = e.clone();
    let mut h_cap = cfg.h_max;
    for steps in 0..cfg.max_steps {
        if cur.time.lo() - e.time.lo() > t_max {
            break;
        }
        let data = cfg.step(f, &cur, h_cap)?;
        h_cap = cfg.h_max;
        if section.side(data.rough[idx]) == -1 {
            observe(&StepRecord::of(&data));
            cur = data.at(data.h);
            continue;
        }
        let fz = f.eval(&data.rough)?[idx] * d;
        if !fz.is_pos() {
            if data.h * 0.5 < cfg.h_min {
                return Err(Error::TransversalityFailure(format!(
                    "section velocity {fz} near t = {}",
                    cur.time
                )));
            }
            h_cap = data.h * 0.5;
            continue;
        }
        match bracket(&data, section) {
            Bracket::Found { lo, hi, mid } => {
                observe(&StepRecord::of(&data));
                let w = data.over_times(Interval::new(lo, hi));
                let fw = f.eval(&w)?;
                if !(fw[idx] * d).is_pos() {
                    return Err(Error::TransversalityFailure(format!(
                        "section velocity {} on the crossing arc",
                        fw[idx]
                    )));
                }
                let image = project(&data.at(mid), &fw, section)?;
                let image_box = image.hull();
                return Ok(Crossing {
                    time: data.start.time + Interval::new(lo, hi),
                    image: image.with_time(data.start.time + Interval::new(lo, hi)),
                    image_box,
                    steps: steps + 1,
                });
            }
            Bracket::Advance(s) => {
                let mut short = data.clone();
                short.h = s;
                observe(&StepRecord::of(&short));
                cur = data.at(s);
            }
            Bracket::Failed => {
                return Err(Error::TransversalityFailure(format!(
                    "could not separate the set from the section near t = {}",
                    cur.time
                )));
            }
        }
    }
    Err(Error::LostCrossing(format!(
        "no crossing certified within t = {t_max}"
    )))
}

enum Bracket {
    Found { lo: f64, hi: f64, mid: f64 },
    Advance(f64),
    Failed,
}

/// Brackets the crossing time inside one step whose rough enclosure is
/// transversal to the section.
fn bracket(data: &StepData, section: &Section) -> Bracket {
    let idx = section.index;
    let h = data.h;
    let side_at = |s: f64| section.side(data.at(s).hull()[idx]);
    let g = |s: f64| data.center_poly(idx, s).0 - section.value;
    let sign = f64::from(section.direction);
    // Centre trajectory crossing by safeguarded Newton on [0, h].
    let estimate = if g(h) * sign <= 0.0 {
        None
    } else {
        let (mut a, mut b) = (0.0, h);
        let mut s = 0.5 * h;
        for _ in 0..200 {
            let (v, dv) = data.center_poly(idx, s);
            let gv = v - section.value;
            if gv * sign > 0.0 {
                b = s;
            } else {
                a = s;
            }
            let n = s - gv / dv;
            s = if n > a && n < b && dv != 0.0 {
                n
            } else {
                0.5 * (a + b)
            };
            if b - a <= 4.0 * f64::EPSILON * b.max(1.0) || gv == 0.0 {
                break;
            }
        }
        Some(s)
    };
    let Some(mid) = estimate else {
        return if side_at(h) == -1 {
            Bracket::Advance(h)
        } else {
            Bracket::Failed
        };
    };
    let mut delta = (h * 1e-12).max(1e-15);
    while delta < h {
        let lo = (mid - delta).max(0.0);
        let hi = (mid + delta).min(h);
        let lo_ok = lo == 0.0 || side_at(lo) == -1;
        let hi_ok = side_at(hi) == 1;
        if lo_ok && hi_ok {
            return Bracket::Found { lo, hi, mid };
        }
        if hi == h && !hi_ok && lo > 0.0 && lo_ok {
            return Bracket::Advance(lo);
        }
        delta *= 2.0;
    }
    if mid > 0.0 && side_at(0.5 * mid) == -1 {
        Bracket::Advance(0.5 * mid)
    } else {
        Bracket::Failed
    }
}

/// Slides every point of `e` along the flow onto the section, using field
/// ratios `κ_i = F_i/F_idx` over the arc box `fw`.
fn project(e: &FlowEnclosure, fw: &IVector, section: &Section) -> Result<FlowEnclosure> {
    let n = e.dim();
    let idx = section.index;
    let v = Interval::point(section.value);
    let offset = Interval::point(e.midpoint[idx]) - v;
    let mut center = IVector::zeros(n);
    let mut a = IMatrix::zeros(n, n);
    for i in 0..n {
        if i == idx {
            center[i] = v;
            continue;
        }
        let kappa = fw[i].checked_div(fw[idx])?;
        center[i] = Interval::point(e.midpoint[i]) - kappa * offset;
        for j in 0..n {
            a[(i, j)] = Interval::point(e.basis[(i, j)]) - kappa * e.basis[(idx, j)];
        }
    }
    let mut out = FlowEnclosure::from_affine(&center, &a, &e.remainder);
    out.time = e.time;
    Ok(out)
}

/// Writes step records as CSV: `t_lo,t_hi,x0_lo,x0_hi,…`.
pub struct EnclosureCsv<W: Write> {
    out: W,
    header_written: bool,
}

impl<W: Write> EnclosureCsv<W> {
    pub fn new(out: W) -> EnclosureCsv<W> {
        EnclosureCsv {
            out,
            header_written: false,
        }
    }

    pub fn record(&mut self, r: &StepRecord) -> std::io::Result<()> {
        if !self.header_written {
            write!(self.out, "t_lo,t_hi")?;
            for i in 0..r.enclosure.len() {
                write!(self.out, ",x{i}_lo,x{i}_hi")?;
            }
            writeln!(self.out)?;
            self.header_written = true;
        }
        write!(self.out, "{},{}", r.time.lo(), r.time.hi())?;
        for x in &r.enclosure {
            write!(self.out, ",{},{}", x.lo(), x.hi())?;
        }
        writeln!(self.out)
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Non-rigorous Taylor integration in plain floating point.
#[derive(Clone, Debug)]
pub struct FloatFlow {
    pub order: usize,
    pub tol: f64,
    pub h_max: f64,
}

impl Default for FloatFlow {
    fn default() -> Self {
        FloatFlow {
            order: 20,
            tol: 1e-17,
            h_max: 0.5,
        }
    }
}

impl FloatFlow {
    fn coeffs<F: OdeField>(&self, f: &F, x: &[f64]) -> Result<(Vec<Vec<f64>>, f64)> {
        let c = f.series(x, self.order)?;
        let mut h = self.h_max;
        for k in [self.order - 1, self.order] {
            let m = c[k].iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            if m > 0.0 {
                h = h.min((self.tol / m).powf(1.0 / k as f64));
            }
        }
        Ok((c, h))
    }

    fn eval(c: &[Vec<f64>], s: f64) -> Vec<f64> {
        let n = c[0].len();
        (0..n)
            .map(|i| c.iter().rev().fold(0.0, |acc, ck| acc * s + ck[i]))
            .collect()
    }

    /// `φ_t(x)` for `t ≥ 0`.
    pub fn flow<F: OdeField>(&self, f: &F, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut x = x.to_vec();
        let mut done = 0.0;
        while done < t {
            let (c, h) = self.coeffs(f, &x)?;
            let h = h.min(t - done);
            x = FloatFlow::eval(&c, h);
            done += h;
        }
        Ok(x)
    }

    /// Samples `(t, φ_t(x))` at every internal step up to `t`.
    pub fn trajectory<F: OdeField>(
        &self,
        f: &F,
        x: &[f64],
        t: f64,
    ) -> Result<Vec<(f64, Vec<f64>)>> {
        let mut out = vec![(0.0, x.to_vec())];
        let mut x = x.to_vec();
        let mut done = 0.0;
        while done < t {
            let (c, h) = self.coeffs(f, &x)?;
            let h = h.min(t - done);
            for k in 1..=4 {
                let s = h * k as f64 / 4.0;
                out.push((done + s, FloatFlow::eval(&c, s)));
            }
            x = out.last().unwrap().1.clone();
            done += h;
        }
        Ok(out)
    }

    /// First crossing of `section`, if one occurs before `t_max`.
    pub fn crossing<F: OdeField>(
        &self,
        f: &F,
        x: &[f64],
        section: &Section,
        t_max: f64,
    ) -> Result<Option<(f64, Vec<f64>)>> {
        let idx = section.index;
        let sgn = f64::from(section.direction);
        let g = |y: &[f64]| y[idx] - section.value;
        let mut x = x.to_vec();
        let mut done = 0.0;
        while done < t_max {
            let (c, h) = self.coeffs(f, &x)?;
            let y = FloatFlow::eval(&c, h);
            if g(&x) * g(&y) <= 0.0 && g(&y) != g(&x) && (g(&y) - g(&x)) * sgn > 0.0 {
                let (mut a, mut b) = (0.0, h);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if g(&FloatFlow::eval(&c, m)) * g(&x) > 0.0 {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                return Ok(Some((done + b, FloatFlow::eval(&c, b))));
            }
            x = y;
            done += h;
        }
        Ok(None)
    }
}
