//! The planar circular restricted three-body problem in rotating
//! coordinates, its collinear point L1 and the local chart around it.
//!
//! The heavy primary of mass `1 − μ` sits at `(μ, 0)`, the light one of
//! mass `μ` at `(μ − 1, 0)`, and momenta are `P_X = Ẋ − Y`, `P_Y = Ẏ + X`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{cauchy, power_coeff, Coeff, OdeField};
use crate::interval::{IBox, IMatrix, IVector, Interval};
use crate::linalg::{
    interval_newton, inverse_enclosure, solve_interval_linear, solve_interval_linear_multi,
    NewtonVerdict,
};

/// Quadratic and cubic coefficients of `K₁, K₂, K₃`; `K₀(x) = x`.
pub const K_COEFFS: [[f64; 2]; 3] = [
    [-0.4426997319120566, 0.2117307906593041],
    [0.7204702544171099, -0.2077414984788253],
    [0.6096754412253178, -1.6248371332133488],
];

/// The mass parameter, possibly as a whole interval of values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Interval", into = "Interval")]
pub struct RtbpParams {
    mu: Interval,
}

impl TryFrom<Interval> for RtbpParams {
    type Error = Error;
    fn try_from(mu: Interval) -> Result<Self> {
        RtbpParams::new(mu)
    }
}

impl From<RtbpParams> for Interval {
    fn from(p: RtbpParams) -> Interval {
        p.mu
    }
}

impl RtbpParams {
    pub fn new(mu: Interval) -> Result<RtbpParams> {
        if !(mu.lo() > 0.0 && mu.hi() < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "mass parameter {mu} outside (0, 1)"
            )));
        }
        Ok(RtbpParams { mu })
    }

    pub fn point(mu: f64) -> Result<RtbpParams> {
        if !mu.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "mass parameter {mu} is not finite"
            )));
        }
        RtbpParams::new(Interval::point(mu))
    }

    /// The enclosure of a decimal literal.
    pub fn from_decimal(s: &str) -> Result<RtbpParams> {
        RtbpParams::new(Interval::from_decimal(s)?)
    }

    pub fn mu(&self) -> Interval {
        self.mu
    }

    fn masses(&self) -> (Interval, Interval) {
        (Interval::ONE - self.mu, self.mu)
    }
}

/// A phase-space point `(X, Y, P_X, P_Y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: Interval,
    pub y: Interval,
    pub px: Interval,
    pub py: Interval,
}

impl State {
    pub fn new(x: Interval, y: Interval, px: Interval, py: Interval) -> State {
        State { x, y, px, py }
    }

    pub fn from_point(p: [f64; 4]) -> State {
        State::from_vector(&IVector::from_point(&p))
    }

    pub fn from_vector(v: &IVector) -> State {
        assert_eq!(v.len(), 4, "a PCR3BP state has four coordinates");
        State::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_vector(&self) -> IVector {
        IVector::new(vec![self.x, self.y, self.px, self.py])
    }

    /// Velocities `(Ẋ, Ẏ)`.
    pub fn velocity(&self) -> (Interval, Interval) {
        (self.px + self.y, self.py - self.x)
    }
}

/// `S(X, Y, P_X, P_Y) = (X, −Y, −P_X, P_Y)`.
pub fn symmetry_s(s: &State) -> State {
    State::new(s.x, -s.y, -s.px, s.py)
}

struct Distances {
    dx1: Interval,
    dx2: Interval,
    /// `1/r₁` and `1/r₂`.
    inv1: Interval,
    inv2: Interval,
    /// `1/r³`.
    inv1_3: Interval,
    inv2_3: Interval,
}

fn distances(x: Interval, y: Interval, p: &RtbpParams) -> Result<Distances> {
    let dx1 = x - p.mu;
    let dx2 = x - p.mu + 1.0;
    let y2 = y.sqr();
    let r1sq = dx1.sqr() + y2;
    let r2sq = dx2.sqr() + y2;
    for r in [r1sq, r2sq] {
        if r.contains_zero() {
            return Err(Error::CollisionSingularity(r));
        }
    }
    let r1 = r1sq.sqrt()?;
    let r2 = r2sq.sqrt()?;
    let inv1 = r1.recip()?;
    let inv2 = r2.recip()?;
    Ok(Distances {
        dx1,
        dx2,
        inv1,
        inv2,
        inv1_3: inv1 * inv1.sqr(),
        inv2_3: inv2 * inv2.sqr(),
    })
}

/// `H = ½(P_X² + P_Y²) + Y P_X − X P_Y − (1−μ)/r₁ − μ/r₂`.
pub fn hamiltonian(s: &State, p: &RtbpParams) -> Result<Interval> {
    let d = distances(s.x, s.y, p)?;
    let (k1, k2) = p.masses();
    Ok((s.px.sqr() + s.py.sqr()) * 0.5 + s.y * s.px - s.x * s.py - k1 * d.inv1 - k2 * d.inv2)
}

/// The Jacobi integral `C = 2Ω − (Ẋ² + Ẏ²)`.
pub fn jacobi(s: &State, p: &RtbpParams) -> Result<Interval> {
    let d = distances(s.x, s.y, p)?;
    let (k1, k2) = p.masses();
    let omega = (s.x.sqr() + s.y.sqr()) * 0.5 + k1 * d.inv1 + k2 * d.inv2;
    let (vx, vy) = s.velocity();
    Ok(omega * 2.0 - vx.sqr() - vy.sqr())
}

/// The Hamiltonian vector field `J∇H`.
pub fn vector_field(s: &State, p: &RtbpParams) -> Result<IVector> {
    let d = distances(s.x, s.y, p)?;
    let (k1, k2) = p.masses();
    Ok(IVector::new(vec![
        s.px + s.y,
        s.py - s.x,
        s.py - k1 * d.dx1 * d.inv1_3 - k2 * d.dx2 * d.inv2_3,
        -s.px - (k1 * d.inv1_3 + k2 * d.inv2_3) * s.y,
    ]))
}

/// Closed-form `DF`.
pub fn jacobian(s: &State, p: &RtbpParams) -> Result<IMatrix> {
    let d = distances(s.x, s.y, p)?;
    let (k1, k2) = p.masses();
    let inv1_5 = d.inv1_3 * d.inv1.sqr();
    let inv2_5 = d.inv2_3 * d.inv2.sqr();
    let y2 = s.y.sqr();
    let uxx = -(k1 * (d.inv1_3 - d.dx1.sqr() * inv1_5 * 3.0)
        + k2 * (d.inv2_3 - d.dx2.sqr() * inv2_5 * 3.0));
    let uxy = (k1 * d.dx1 * inv1_5 + k2 * d.dx2 * inv2_5) * s.y * 3.0;
    let uyy = -(k1 * (d.inv1_3 - y2 * inv1_5 * 3.0) + k2 * (d.inv2_3 - y2 * inv2_5 * 3.0));
    let o = Interval::ZERO;
    let i = Interval::ONE;
    Ok(IMatrix::from_rows(vec![
        vec![o, i, i, o],
        vec![-i, o, o, i],
        vec![uxx, uxy, o, i],
        vec![uxy, uyy, -i, o],
    ]))
}

/// Taylor coefficients of the PCR3BP solution through `x0` with mass `mu`
/// held constant in time.
fn rtbp_series<S: Coeff>(x0: &[S], mu: &S, order: usize) -> Result<Vec<Vec<S>>> {
    let like = &x0[0];
    let one = S::constant(Interval::ONE, like);
    let k1 = one.clone() - mu.clone();
    let k2 = mu.clone();
    let mut x: Vec<Vec<S>> = (0..4).map(|i| vec![x0[i].clone()]).collect();
    let mut dx1 = vec![x0[0].clone() - mu.clone()];
    let mut dx2 = vec![x0[0].clone() - mu.clone() + one];
    let (mut s1, mut s2) = (Vec::new(), Vec::new());
    let (mut u1, mut u2) = (Vec::new(), Vec::new());
    let mut inv = None;
    for k in 0..order {
        if k > 0 {
            dx1.push(x[0][k].clone());
            dx2.push(x[0][k].clone());
        }
        let yy = cauchy(&x[1], &x[1], k);
        s1.push(cauchy(&dx1, &dx1, k) + yy.clone());
        s2.push(cauchy(&dx2, &dx2, k) + yy);
        if k == 0 {
            for s in [&s1[0], &s2[0]] {
                if s.value().contains_zero() {
                    return Err(Error::CollisionSingularity(s.value()));
                }
            }
            let i1 = s1[0].recip()?;
            let i2 = s2[0].recip()?;
            u1.push((s1[0].clone() * s1[0].sqrt()?).recip()?);
            u2.push((s2[0].clone() * s2[0].sqrt()?).recip()?);
            inv = Some((i1, i2));
        } else {
            let (i1, i2) = inv.as_ref().expect("set at k = 0");
            let c1 = power_coeff(-1.5, &s1, &u1, k, i1);
            let c2 = power_coeff(-1.5, &s2, &u2, k, i2);
            u1.push(c1);
            u2.push(c2);
        }
        let g1 = cauchy(&dx1, &u1, k);
        let g2 = cauchy(&dx2, &u2, k);
        let h = k1.clone() * cauchy(&x[1], &u1, k) + k2.clone() * cauchy(&x[1], &u2, k);
        let f = [
            x[2][k].clone() + x[1][k].clone(),
            x[3][k].clone() - x[0][k].clone(),
            x[3][k].clone() - k1.clone() * g1 - k2.clone() * g2,
            -x[2][k].clone() - h,
        ];
        let step = Interval::ONE / Interval::point((k + 1) as f64);
        for (xi, fi) in x.iter_mut().zip(f) {
            xi.push(fi.scale(step));
        }
    }
    Ok((0..=order)
        .map(|k| (0..4).map(|i| x[i][k].clone()).collect())
        .collect())
}

fn check_dim<S>(x0: &[S], n: usize) -> Result<()> {
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: x0.len(),
        });
    }
    Ok(())
}

impl OdeField for RtbpParams {
    fn dim(&self) -> usize {
        4
    }

    fn series<S: Coeff>(&self, x0: &[S], order: usize) -> Result<Vec<Vec<S>>> {
        check_dim(x0, 4)?;
        rtbp_series(x0, &S::constant(self.mu, &x0[0]), order)
    }

    fn eval(&self, x: &IVector) -> Result<IVector> {
        vector_field(&State::from_vector(x), self)
    }

    fn jacobian(&self, x: &IVector) -> Result<IMatrix> {
        jacobian(&State::from_vector(x), self)
    }
}

/// The PCR3BP with the mass parameter appended as a fifth, constant state
/// variable, so that sets can carry their correlation with `μ`. Since `μ` is
/// a first integral, its component is kept inside `mu`.
#[derive(Clone, Copy, Debug)]
pub struct ExtendedRtbp {
    pub mu: Interval,
}

impl ExtendedRtbp {
    pub fn new(mu: Interval) -> Result<Self> {
        RtbpParams::new(mu)?;
        Ok(ExtendedRtbp { mu })
    }
}

impl OdeField for ExtendedRtbp {
    fn dim(&self) -> usize {
        5
    }

    fn series<S: Coeff>(&self, x0: &[S], order: usize) -> Result<Vec<Vec<S>>> {
        check_dim(x0, 5)?;
        let mu = x0[4].restrict(self.mu);
        if !mu.value().subset(self.mu) {
            return Err(Error::InvalidConfig(format!(
                "mass parameter {} outside {}",
                mu.value(),
                self.mu
            )));
        }
        let mut s = rtbp_series(&x0[..4], &mu, order)?;
        let zero = S::constant(Interval::ZERO, &mu);
        for (k, c) in s.iter_mut().enumerate() {
            c.push(if k == 0 { mu.clone() } else { zero.clone() });
        }
        Ok(s)
    }
}

/// `Ω_X` on the line between the primaries and its derivative.
fn collinear(x: Interval, p: &RtbpParams) -> (Interval, Interval) {
    let (k1, k2) = p.masses();
    let a = x - p.mu;
    let b = x - p.mu + 1.0;
    let g = x + k1 / a.sqr() - k2 / b.sqr();
    let dg = Interval::ONE - k1 * 2.0 / (a * a.sqr()) + k2 * 2.0 / (b * b.sqr());
    (g, dg)
}

fn collinear_f64(x: f64, mu: f64) -> f64 {
    let a = x - mu;
    let b = x - mu + 1.0;
    x + (1.0 - mu) / (a * a) - mu / (b * b)
}

/// Floating-point root of the collinear equation on `(μ − 1, μ)`.
pub fn l1_float(mu: f64) -> f64 {
    let (mut lo, mut hi) = (mu - 1.0, mu);
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if m <= lo || m >= hi {
            break;
        }
        if collinear_f64(m, mu) < 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

/// Certified `(x_L1, 0, 0, x_L1)`, valid for every `μ` in the parameter.
pub fn libration_l1(p: &RtbpParams) -> Result<IVector> {
    let x0 = l1_float(p.mu.mid());
    let f = |b: &IVector| -> Result<IVector> { Ok(IVector::new(vec![collinear(b[0], p).0])) };
    let df =
        |b: &IBox| -> Result<IMatrix> { Ok(IMatrix::from_rows(vec![vec![collinear(b[0], p).1]])) };
    let mut delta = 1e-13_f64.max(1e3 * p.mu.width());
    for _ in 0..8 {
        let b = IVector::new(vec![Interval::centered(x0, delta)]);
        let r = interval_newton(f, df, &b, &[x0]);
        if r.verdict == NewtonVerdict::UniqueRoot {
            let x = r.root_box.expect("unique root has a box")[0];
            return Ok(IVector::new(vec![x, Interval::ZERO, Interval::ZERO, x]));
        }
        delta *= 100.0;
    }
    Err(Error::Inconclusive(format!(
        "L1 enclosure for μ = {}",
        p.mu
    )))
}

/// Enclosure of `dx_L1/dμ` for `μ ∈ p`, given an enclosure of `x_L1`
/// valid over the same range.
pub fn l1_mu_derivative(p: &RtbpParams, x: Interval) -> Result<Interval> {
    let mu = p.mu;
    let a = x - mu;
    let b = x - mu + 1.0;
    let (ga, gb) = (a.sqr(), b.sqr());
    let g_mu =
        -(ga.recip()?) + (Interval::ONE - mu) * 2.0 / (a * ga) - gb.recip()? - mu * 2.0 / (b * gb);
    let g_x = collinear(x, p).1;
    Ok(-g_mu.checked_div(g_x)?)
}

/// `η² + (2 − c₂)η + 1 + c₂ − 2c₂²`, whose roots are `λ²` and `−v²`.
fn eta_root(c2: Interval, guess: f64) -> Result<Interval> {
    let f = |b: &IVector| -> Result<IVector> {
        let e = b[0];
        Ok(IVector::new(vec![
            e.sqr() + (Interval::point(2.0) - c2) * e + Interval::ONE + c2 - c2.sqr() * 2.0,
        ]))
    };
    let df = |b: &IBox| -> Result<IMatrix> {
        Ok(IMatrix::from_rows(vec![vec![
            b[0] * 2.0 + Interval::point(2.0) - c2,
        ]]))
    };
    let mut delta = 1e-12 * guess.abs().max(1.0) + 100.0 * c2.width();
    for _ in 0..8 {
        let b = IVector::new(vec![Interval::centered(guess, delta)]);
        let r = interval_newton(f, df, &b, &[guess]);
        if r.verdict == NewtonVerdict::UniqueRoot {
            return Ok(r.root_box.expect("unique root has a box")[0]);
        }
        delta *= 100.0;
    }
    Err(Error::Inconclusive(format!(
        "eigenvalue enclosure for c2 = {c2}"
    )))
}

/// The linear change of coordinates at L1 together with the nonlinear
/// straightening `ψ`; `x = L1 + C ψ(q)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalChart {
    pub params: RtbpParams,
    pub l1: IVector,
    pub gamma: Interval,
    pub c2: Interval,
    pub lambda: Interval,
    pub v: Interval,
    pub s1: Interval,
    pub s2: Interval,
    pub c: IMatrix,
    pub c_inv: IMatrix,
    pub k_coeffs: [[f64; 2]; 3],
    /// `C⁻¹ DF(L1) C`.
    pub residual: IMatrix,
}

/// Builds the chart at L1 for the given parameter.
pub fn jordan_basis(p: &RtbpParams) -> Result<LocalChart> {
    let l1 = libration_l1(p)?;
    let mu = p.mu;
    let gamma = l1[0] + 1.0 - mu;
    let one = Interval::ONE;
    let c2 = mu / (gamma * gamma.sqr()) + (one - mu) / ((one - gamma) * (one - gamma).sqr());
    let cm = c2.mid();
    let disc = (9.0 * cm * cm - 8.0 * cm).sqrt();
    let eta_u = eta_root(c2, 0.5 * (cm - 2.0 + disc))?;
    let eta_c = eta_root(c2, 0.5 * (cm - 2.0 - disc))?;
    if !eta_u.is_pos() || !eta_c.is_neg() {
        return Err(Error::Inconclusive(format!(
            "L1 is not a saddle-centre: roots {eta_u}, {eta_c}"
        )));
    }
    let lambda = eta_u.sqrt()?;
    let v = (-eta_c).sqrt()?;
    let k = c2 * 2.0 + 1.0;
    let q = c2 * 3.0 + 4.0;
    let r = c2 * 5.0 + 4.0 - c2.sqr() * 6.0;
    let s1 = (lambda * 2.0 * (q * lambda.sqr() + r)).sqrt()?;
    let s2 = (v * (q * v.sqr() - r)).sqrt()?;
    let (l2, v2) = (lambda.sqr(), v.sqr());
    let a = (lambda * 2.0) / s1;
    let b = (l2 - k) / s1;
    let cc = (l2 + k) / s1;
    let d = (lambda * l2 + (one - c2 * 2.0) * lambda) / s1;
    let e = (v * 2.0) / s2;
    let f = (-v2 - k) / s2;
    let g = (-v2 + k) / s2;
    let h = (-(v * v2) + (one - c2 * 2.0) * v) / s2;
    let o = Interval::ZERO;
    let c = IMatrix::from_rows(vec![
        vec![a, -a, o, e],
        vec![b, b, f, o],
        vec![cc, cc, g, o],
        vec![d, -d, o, h],
    ]);
    let c_inv = inverse_enclosure(&c)?;
    let dfl = jacobian(&State::from_vector(&l1), p)?;
    let residual = &(&c_inv * &dfl) * &c;
    Ok(LocalChart {
        params: *p,
        l1,
        gamma,
        c2,
        lambda,
        v,
        s1,
        s2,
        c,
        c_inv,
        k_coeffs: K_COEFFS,
        residual,
    })
}

impl LocalChart {
    /// The chart with this basis `C`, recentred at L1 of every mass in `p`.
    /// Its fixed point is `q = 0` for each such mass.
    pub fn with_params(&self, p: &RtbpParams) -> Result<LocalChart> {
        let mut chart = jordan_basis(p)?;
        chart.c = self.c.clone();
        chart.c_inv = self.c_inv.clone();
        let dfl = jacobian(&State::from_vector(&chart.l1), p)?;
        chart.residual = &(&chart.c_inv * &dfl) * &chart.c;
        Ok(chart)
    }

    /// Entries of the residual that should vanish, with their pattern
    /// positions; the diagonal block pattern is `diag(λ, −λ, [0 v; −v 0])`.
    pub fn residual_pattern(&self) -> Vec<((usize, usize), Interval, Interval)> {
        let o = Interval::ZERO;
        let expect = |i: usize, j: usize| match (i, j) {
            (0, 0) => self.lambda,
            (1, 1) => -self.lambda,
            (2, 3) => self.v,
            (3, 2) => -self.v,
            _ => o,
        };
        (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .map(|(i, j)| ((i, j), self.residual[(i, j)], expect(i, j)))
            .collect()
    }

    /// True when every residual entry overlaps its pattern value.
    pub fn residual_consistent(&self) -> bool {
        self.residual_pattern()
            .iter()
            .all(|(_, r, e)| r.overlaps(*e))
    }

    fn k(&self, i: usize, x: Interval) -> [Interval; 4] {
        let [a, b] = self.k_coeffs[i];
        let (a, b) = (Interval::point(a), Interval::point(b));
        let x2 = x.sqr();
        [
            x2 * (a + b * x),
            x * (a * 2.0 + b * x * 3.0),
            a * 2.0 + b * x * 6.0,
            b * 6.0,
        ]
    }

    /// `ψ(x, y) = (x − Σ yᵢ Kᵢ′(x), K₁(x) + y₁, K₂(x) + y₂, K₃(x) + y₃)`.
    pub fn psi(&self, q: &IVector) -> IVector {
        let x = q[0];
        let mut out = IVector::zeros(4);
        out[0] = x;
        for i in 0..3 {
            let [k, dk, _, _] = self.k(i, x);
            out[0] -= q[i + 1] * dk;
            out[i + 1] = k + q[i + 1];
        }
        out
    }

    pub fn dpsi(&self, q: &IVector) -> IMatrix {
        let x = q[0];
        let mut m = IMatrix::identity(4);
        for i in 0..3 {
            let [_, dk, ddk, _] = self.k(i, x);
            m[(0, 0)] -= q[i + 1] * ddk;
            m[(0, i + 1)] = -dk;
            m[(i + 1, 0)] = dk;
        }
        m
    }

    /// The second derivative of `ψ` contracted with `w`:
    /// `(D²ψ[w])_{mj} = Σ_k ∂²ψ_m/∂q_j∂q_k w_k`.
    pub fn d2psi(&self, q: &IVector, w: &IVector) -> IMatrix {
        let x = q[0];
        let mut m = IMatrix::zeros(4, 4);
        for i in 0..3 {
            let [_, _, ddk, dddk] = self.k(i, x);
            m[(0, 0)] -= q[i + 1] * dddk * w[0] + ddk * w[i + 1];
            m[(0, i + 1)] = -ddk * w[0];
            m[(i + 1, 0)] = ddk * w[0];
        }
        m
    }

    /// `Φ(q) = L1 + C ψ(q)`.
    pub fn phi(&self, q: &IVector) -> IVector {
        &self.l1 + &self.c.mul_vec(&self.psi(q))
    }

    pub fn dphi(&self, q: &IVector) -> IMatrix {
        &self.c * &self.dpsi(q)
    }

    pub fn d2phi(&self, q: &IVector, w: &IVector) -> IMatrix {
        &self.c * &self.d2psi(q, w)
    }

    /// `F̂(q) = DΦ(q)⁻¹ F(Φ(q))`.
    pub fn local_field(&self, q: &IVector) -> Result<IVector> {
        let f = vector_field(&State::from_vector(&self.phi(q)), &self.params)?;
        solve_interval_linear(&self.dphi(q), &f)
    }

    /// `DF̂(q) = DΦ⁻¹ (DF(Φ) DΦ − D²Φ[F̂])`.
    pub fn local_jacobian(&self, q: &IVector) -> Result<IMatrix> {
        let x = State::from_vector(&self.phi(q));
        let dphi = self.dphi(q);
        let fhat = solve_interval_linear(&dphi, &vector_field(&x, &self.params)?)?;
        let rhs = &(&jacobian(&x, &self.params)? * &dphi) - &self.d2phi(q, &fhat);
        solve_interval_linear_multi(&dphi, &rhs)
    }

    /// Floating-point `Φ`.
    pub fn phi_f64(&self, q: &[f64]) -> Vec<f64> {
        self.phi(&IVector::from_point(q)).midpoint()
    }

    /// Floating-point `Φ⁻¹`, by fixed-point iteration on the first
    /// coordinate of `ψ⁻¹`.
    pub fn phi_inverse_f64(&self, x: &[f64]) -> Vec<f64> {
        let ci = self.c_inv.midpoint();
        let d: Vec<f64> = (0..4).map(|i| x[i] - self.l1[i].mid()).collect();
        let z: Vec<f64> = (0..4)
            .map(|i| (0..4).map(|j| ci[(i, j)] * d[j]).sum())
            .collect();
        let k = |i: usize, t: f64| {
            let [a, b] = self.k_coeffs[i];
            (t * t * (a + b * t), t * (2.0 * a + 3.0 * b * t))
        };
        let mut t = z[0];
        for _ in 0..100 {
            let next = z[0]
                + (0..3)
                    .map(|i| {
                        let (ki, dki) = k(i, t);
                        (z[i + 1] - ki) * dki
                    })
                    .sum::<f64>();
            if next == t {
                break;
            }
            t = next;
        }
        std::iter::once(t)
            .chain((0..3).map(|i| z[i + 1] - k(i, t).0))
            .collect()
    }

    /// Floating-point `F̂`, through a float linear solve.
    pub fn local_field_f64(&self, q: &[f64]) -> Result<Vec<f64>> {
        let qi = IVector::from_point(q);
        let x = self.phi(&qi).midpoint();
        let f = RtbpParams::point(self.params.mu.mid())?.eval_f64(&x)?;
        let a = self.dphi(&qi).midpoint();
        a.lu()
            .solve(&nalgebra::DVector::from_vec(f))
            .map(|v| v.iter().copied().collect())
            .ok_or(Error::SingularEnclosure)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chart serialises")
    }
}

/// The local field `F̂` as an ODE in chart coordinates; only first-order
/// coefficients are provided.
impl OdeField for LocalChart {
    fn dim(&self) -> usize {
        4
    }

    fn series<S: Coeff>(&self, _: &[S], _: usize) -> Result<Vec<Vec<S>>> {
        Err(Error::InvalidConfig(
            "the local chart field has no Taylor recurrence; integrate in original coordinates"
                .into(),
        ))
    }

    fn eval(&self, q: &IVector) -> Result<IVector> {
        self.local_field(q)
    }

    fn eval_f64(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.local_field_f64(q)
    }

    fn jacobian(&self, q: &IVector) -> Result<IMatrix> {
        self.local_jacobian(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MU: &str = "0.004253863522";

    fn params() -> RtbpParams {
        RtbpParams::from_decimal(MU).unwrap()
    }

    #[test]
    fn rejects_bad_mass() {
        assert!(RtbpParams::point(1.5).is_err());
        assert!(RtbpParams::point(0.0).is_err());
    }

    #[test]
    fn hamiltonian_small_mass_limit() {
        let p = RtbpParams::point(1e-15).unwrap();
        let h = hamiltonian(&State::from_point([1.0, 0.0, 0.0, 1.0]), &p).unwrap();
        assert!((h.mid() + 1.5).abs() < 1e-12);
    }

    #[test]
    fn collision_is_reported() {
        let p = params();
        let s = State::from_point([p.mu().mid(), 0.0, 0.0, 0.0]);
        assert!(matches!(
            vector_field(&s, &p),
            Err(Error::CollisionSingularity(_))
        ));
    }

    #[test]
    fn symmetric_masses_put_l1_at_origin() {
        let l1 = libration_l1(&RtbpParams::point(0.5).unwrap()).unwrap();
        assert!(l1[0].contains(0.0));
    }

    #[test]
    fn l1_is_an_equilibrium() {
        let p = params();
        let l1 = libration_l1(&p).unwrap();
        assert!(l1[0].width() < 1e-12);
        let f = vector_field(&State::from_vector(&l1), &p).unwrap();
        assert!(f.contains_zero());
        assert!(f.max_width() < 1e-12);
    }

    #[test]
    fn series_agrees_with_closed_form() {
        let p = params();
        let x = IVector::from_point(&[0.3, -0.2, 0.1, 0.7]);
        let f = vector_field(&State::from_vector(&x), &p).unwrap();
        let s = p.series(x.as_slice(), 3).unwrap();
        for i in 0..4 {
            assert!(f[i].overlaps(s[1][i]));
        }
        let j = jacobian(&State::from_vector(&x), &p).unwrap();
        let jets = <RtbpParams as OdeField>::jacobian(&p, &x).unwrap();
        for i in 0..4 {
            for k in 0..4 {
                assert!(j[(i, k)].overlaps(jets[(i, k)]));
            }
        }
        let generic: IMatrix = {
            let n = 4;
            let jets: Vec<crate::flow::Jet> = (0..n)
                .map(|i| crate::flow::Jet::variable(x[i], i, n))
                .collect();
            let s = p.series(&jets, 1).unwrap();
            IMatrix::from_fn(n, n, |i, k| s[1][i].d[k])
        };
        for i in 0..4 {
            for k in 0..4 {
                assert!(j[(i, k)].overlaps(generic[(i, k)]));
            }
        }
    }

    #[test]
    fn chart_eigenvalues_and_residual() {
        let ch = jordan_basis(&params()).unwrap();
        assert!(ch.lambda.subset(Interval::new(2.80038, 2.80039)));
        assert!(ch.v.subset(Interval::new(2.25179, 2.25180)));
        for ((i, j), r, e) in ch.residual_pattern() {
            assert!(r.overlaps(e), "entry ({i},{j}) = {r}");
            if e == Interval::ZERO {
                assert!(r.width() < 1e-9);
            }
        }
    }

    #[test]
    fn psi_identities() {
        let ch = jordan_basis(&params()).unwrap();
        let z = ch.psi(&IVector::from_point(&[0.0, 0.1, -0.2, 0.3]));
        assert_eq!(z.midpoint(), vec![0.0, 0.1, -0.2, 0.3]);
        let x = 0.01;
        let k = ch.psi(&IVector::from_point(&[x, 0.0, 0.0, 0.0]));
        assert!(k[0].contains(x));
        for i in 0..3 {
            let [a, b] = K_COEFFS[i];
            assert!((k[i + 1].mid() - (a * x * x + b * x * x * x)).abs() < 1e-18);
        }
    }

    #[test]
    fn local_field_vanishes_at_origin() {
        let ch = jordan_basis(&params()).unwrap();
        let f = ch.local_field(&IVector::zeros(4)).unwrap();
        assert!(f.contains_zero());
        let d = ch.local_jacobian(&IVector::zeros(4)).unwrap();
        assert!(d[(0, 0)].overlaps(ch.lambda));
        assert!(d[(2, 3)].overlaps(ch.v));
    }

    fn states() -> Vec<[f64; 4]> {
        vec![
            [0.3, -0.2, 0.1, 0.7],
            [-0.5, 0.4, -0.3, -0.2],
            [0.82, 0.01, 0.0, 0.93],
            [-1.3, -0.6, 0.25, -1.1],
        ]
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let p = params();
        for x in states() {
            let j = jacobian(&State::from_point(x), &p).unwrap();
            let mut tr = Interval::ZERO;
            for k in 0..4 {
                tr += j[(k, k)];
                let h = 1e-6;
                let (mut a, mut b) = (x, x);
                a[k] += h;
                b[k] -= h;
                let fa = p.eval_f64(&a).unwrap();
                let fb = p.eval_f64(&b).unwrap();
                for i in 0..4 {
                    let fd = (fa[i] - fb[i]) / (2.0 * h);
                    assert!((j[(i, k)].mid() - fd).abs() < 1e-7, "({i},{k})");
                }
            }
            assert!(tr.contains(0.0), "Hamiltonian flow is volume preserving");
        }
    }

    #[test]
    fn hamiltonian_is_minus_half_jacobi() {
        let p = params();
        for x in states() {
            let s = State::from_point(x);
            let h = hamiltonian(&s, &p).unwrap();
            let c = jacobi(&s, &p).unwrap();
            assert!(h.overlaps(c * -0.5));
        }
    }

    #[test]
    fn psi_offset_is_normal_to_the_curve() {
        let ch = jordan_basis(&params()).unwrap();
        let q = [0.03, 0.2, -0.1, 0.05];
        let z = ch.psi(&IVector::from_point(&q)).midpoint();
        let base = ch
            .psi(&IVector::from_point(&[q[0], 0.0, 0.0, 0.0]))
            .midpoint();
        let mut tangent = [1.0, 0.0, 0.0, 0.0];
        for i in 0..3 {
            let [a, b] = K_COEFFS[i];
            tangent[i + 1] = 2.0 * a * q[0] + 3.0 * b * q[0] * q[0];
        }
        let dot: f64 = (0..4).map(|i| (z[i] - base[i]) * tangent[i]).sum();
        assert!(dot.abs() < 1e-15);
    }

    #[test]
    fn hill_radius_for_small_mass() {
        let mu = 1e-6;
        let l1 = libration_l1(&RtbpParams::point(mu).unwrap()).unwrap();
        let gamma = (l1[0] + 1.0 - mu).mid();
        let hill = (mu / 3.0_f64).cbrt();
        assert!((gamma / hill - 1.0).abs() < 0.05);
    }

    #[test]
    fn l1_derivative_matches_differences() {
        let mu = 0.004253863522;
        let h = 1e-7;
        let fd = (l1_float(mu + h) - l1_float(mu - h)) / (2.0 * h);
        let p = RtbpParams::point(mu).unwrap();
        let d = l1_mu_derivative(&p, libration_l1(&p).unwrap()[0]).unwrap();
        assert!((d.mid() - fd).abs() < 1e-5 * fd.abs());
    }

    #[test]
    fn recentred_chart_keeps_fixed_point_at_origin() {
        let mu = Interval::new(0.004253863422, 0.004253863432);
        let base = jordan_basis(&RtbpParams::point(mu.mid()).unwrap()).unwrap();
        let ch = base.with_params(&RtbpParams::new(mu).unwrap()).unwrap();
        assert_eq!(ch.c, base.c);
        assert!(ch.local_field(&IVector::zeros(4)).unwrap().contains_zero());
    }

    #[test]
    fn extended_series_restricts_to_planar_one() {
        let p = params();
        let e = ExtendedRtbp::new(p.mu()).unwrap();
        let x = [0.3, -0.2, 0.1, 0.7];
        let a = p.series(&IVector::from_point(&x).into_vec(), 6).unwrap();
        let mut y: Vec<Interval> = IVector::from_point(&x).into_vec();
        y.push(p.mu());
        let b = e.series(&y, 6).unwrap();
        for k in 0..=6 {
            for i in 0..4 {
                assert!(a[k][i].overlaps(b[k][i]));
            }
            assert!(b[k][4].subset(if k == 0 { p.mu() } else { Interval::ZERO }));
        }
    }

    #[test]
    fn phi_inverse_round_trip() {
        let ch = jordan_basis(&params()).unwrap();
        let q = [3e-3, -2e-3, 1e-3, 4e-3];
        let back = ch.phi_inverse_f64(&ch.phi_f64(&q));
        for i in 0..4 {
            assert!(
                (back[i] - q[i]).abs() < 1e-13,
                "{i}: {} vs {}",
                back[i],
                q[i]
            );
        }
    }
}
