//! Manifold certificates built on verified cone conditions, and a
//! floating-point graph transform for one-dimensional discs.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cones::{contraction_constant, ConeCertificate, ConeKind, QuadForm};
use crate::error::{Error, Result};
use crate::interval::round::sqrt_up;
use crate::interval::{IBox, Interval};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ManifoldKind {
    MapUnstable,
    MapStable,
    FlowUnstable,
    FlowStable,
}

impl ManifoldKind {
    fn is_unstable(self) -> bool {
        matches!(self, ManifoldKind::MapUnstable | ManifoldKind::FlowUnstable)
    }

    fn cone_kind(self) -> ConeKind {
        match self {
            ManifoldKind::MapUnstable | ManifoldKind::MapStable => ConeKind::Map,
            _ => ConeKind::Flow,
        }
    }
}

/// Existence of a Lipschitz graph `w^u` (or `w^s`) over the window `U`.
///
/// All balls are recorded as closed. For the stable kinds the underlying
/// statement maps into the open unstable ball; the certificate keeps the
/// closed ball, which is the weaker claim.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldCertificate {
    pub kind: ManifoldKind,
    /// `N′ = N + B` on which the cone conditions were verified.
    pub domain: IBox,
    pub fixed_point: IBox,
    pub alpha_h: f64,
    pub alpha_v: f64,
    /// `(m_h, m_v)` for maps, `(c_h, c_v)` for flows.
    pub rates: (f64, f64),
    /// `r^u = √(1 − α_v)` or `r^s = √(1 − α_h)`, rounded up.
    pub r: f64,
    /// `√α_h` for unstable kinds, `√α_v` for stable ones, rounded up.
    pub lipschitz: f64,
    /// Upper bound on `√(2 / (1 − α_v α_h))`.
    pub contraction_c: f64,
    /// Bounding box of `B + B̄_u(0, r) × B̄_s` (unstable) or
    /// `B + B̄_u × B̄_s(0, r)` (stable).
    pub graph_window: IBox,
    pub u_dim: usize,
    pub cones: Vec<ConeCertificate>,
}

/// Combines verified `Q_h` and `Q_v` cone certificates into a manifold
/// statement.
pub fn certify(
    kind: ManifoldKind,
    horizontal: &ConeCertificate,
    vertical: &ConeCertificate,
    alpha_h: f64,
    alpha_v: f64,
    fixed_point: &IBox,
) -> Result<ManifoldCertificate> {
    for (c, name) in [(horizontal, "Q_h"), (vertical, "Q_v")] {
        if c.kind != kind.cone_kind() {
            return Err(Error::UnverifiedCones(format!(
                "{name} certificate is for a {:?}, manifold kind needs {:?}",
                c.kind,
                kind.cone_kind()
            )));
        }
        if !c.verified() {
            return Err(Error::UnverifiedCones(format!(
                "{name} cone condition not verified (margin {:e})",
                c.verdict.margin
            )));
        }
    }
    if horizontal.form.alpha != alpha_h || horizontal.form.beta != 1.0 {
        return Err(Error::UnverifiedCones(
            "first certificate is not Q_h".into(),
        ));
    }
    if vertical.form.alpha != 1.0 || vertical.form.beta != alpha_v {
        return Err(Error::UnverifiedCones(
            "second certificate is not Q_v".into(),
        ));
    }
    let (h, v) = (horizontal.m, vertical.m);
    let rate_err = |msg: &str| Err(Error::RateOrderViolation(format!("{msg} (got {h}, {v})")));
    match kind {
        ManifoldKind::MapUnstable if !(v > h && h > 0.0 && v > 1.0) => {
            return rate_err("needs m_v > m_h > 0 and m_v > 1");
        }
        ManifoldKind::MapStable if !(v > h && h > 0.0 && h < 1.0) => {
            return rate_err("needs m_v > m_h > 0 and m_h < 1");
        }
        ManifoldKind::FlowUnstable if !(v > h && v > 0.0) => {
            return rate_err("needs c_v > c_h and c_v > 0");
        }
        ManifoldKind::FlowStable if !(h < v && h < 0.0) => {
            return rate_err("needs c_h < c_v and c_h < 0");
        }
        _ => {}
    }
    let u_dim = horizontal.form.u_dim;
    let n = u_dim + horizontal.form.s_dim;
    if fixed_point.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: fixed_point.len(),
        });
    }
    let (r, lipschitz) = if kind.is_unstable() {
        (
            (1.0 - Interval::point(alpha_v)).sqrt()?.hi(),
            sqrt_up(alpha_h),
        )
    } else {
        (
            (1.0 - Interval::point(alpha_h)).sqrt()?.hi(),
            sqrt_up(alpha_v),
        )
    };
    let unit = Interval::new(-1.0, 1.0);
    let window: IBox = (0..n)
        .map(|i| {
            let reduced = if kind.is_unstable() {
                i < u_dim
            } else {
                i >= u_dim
            };
            fixed_point[i]
                + if reduced {
                    Interval::symmetric(r)
                } else {
                    unit
                }
        })
        .collect();
    let domain: IBox = (0..n).map(|i| fixed_point[i] + unit).collect();
    Ok(ManifoldCertificate {
        kind,
        domain,
        fixed_point: fixed_point.clone(),
        alpha_h,
        alpha_v,
        rates: (h, v),
        r,
        lipschitz,
        contraction_c: contraction_constant(alpha_h, alpha_v),
        graph_window: window,
        u_dim,
        cones: vec![horizontal.clone(), vertical.clone()],
    })
}

impl ManifoldCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `ρ(s) = √((c* + β‖s‖²) / α)`.
fn rho(q: &QuadForm, s: &[f64], c_star: f64) -> f64 {
    ((c_star + q.beta * s.iter().map(|x| x * x).sum::<f64>()) / q.alpha).sqrt()
}

/// The change of coordinates that maps `{‖u‖ ≤ 1}` onto `{Q ≤ c*}`.
pub fn phi_coords(u: &[f64], s: &[f64], q: &QuadForm, c_star: f64) -> Vec<f64> {
    assert!(c_star > 0.0, "c* must be positive");
    let r = rho(q, s, c_star);
    let nu = norm(u);
    let factor = if nu <= 1.0 { r } else { (r - 1.0) / nu + 1.0 };
    u.iter()
        .map(|x| x * factor)
        .chain(s.iter().copied())
        .collect()
}

/// Inverse of [`phi_coords`]; returns `(u, s)` concatenated.
pub fn phi_inverse(p: &[f64], q: &QuadForm, c_star: f64) -> Vec<f64> {
    assert!(c_star > 0.0, "c* must be positive");
    let (x, s) = p.split_at(q.u_dim);
    let r = rho(q, s, c_star);
    let nx = norm(x);
    let factor = if nx <= r {
        1.0 / r
    } else {
        (nx - r + 1.0) / nx
    };
    x.iter()
        .map(|v| v * factor)
        .chain(s.iter().copied())
        .collect()
}

/// A disc `h : [−1, 1] → ℝ^{1+s}` sampled at ordered abscissae and
/// interpolated linearly in between.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizontalDisc1D {
    pub samples: Vec<(f64, Vec<f64>)>,
    pub q_v: QuadForm,
    pub q_h: Option<QuadForm>,
}

/// `n` Chebyshev–Lobatto abscissae on `[−1, 1]`, increasing, with exact
/// endpoints and an exact zero when `n` is odd.
pub fn chebyshev_abscissae(n: usize) -> Vec<f64> {
    assert!(n >= 2, "need at least two abscissae");
    let mut xs: Vec<f64> = (0..n)
        .map(|k| -(std::f64::consts::PI * k as f64 / (n - 1) as f64).cos())
        .collect();
    xs[0] = -1.0;
    xs[n - 1] = 1.0;
    if n % 2 == 1 {
        xs[n / 2] = 0.0;
    }
    xs
}

pub const DEFAULT_SAMPLES: usize = 257;
pub const BISECTION_TOL: f64 = 1e-13;

impl HorizontalDisc1D {
    /// The flat disc `h₀(x) = (x·√(c/α), 0)` of `Q_v`-radius `c`.
    pub fn flat(q_v: QuadForm, c: f64, samples: usize) -> HorizontalDisc1D {
        assert_eq!(
            q_v.u_dim, 1,
            "graph transform supports one unstable direction"
        );
        let scale = (c / q_v.alpha).sqrt();
        let samples = chebyshev_abscissae(samples)
            .into_iter()
            .map(|x| {
                let mut p = vec![0.0; 1 + q_v.s_dim];
                p[0] = x * scale;
                (x, p)
            })
            .collect();
        HorizontalDisc1D {
            samples,
            q_v,
            q_h: None,
        }
    }

    pub fn with_horizontal(mut self, q_h: QuadForm) -> HorizontalDisc1D {
        self.q_h = Some(q_h);
        self
    }

    pub fn dim(&self) -> usize {
        1 + self.q_v.s_dim
    }

    /// `h(x)` by piecewise-linear interpolation.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        let s = &self.samples;
        let x = x.clamp(s[0].0, s[s.len() - 1].0);
        let k = s.partition_point(|(t, _)| *t <= x).clamp(1, s.len() - 1);
        let (x0, p0) = &s[k - 1];
        let (x1, p1) = &s[k];
        let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
        p0.iter().zip(p1).map(|(a, b)| a + t * (b - a)).collect()
    }

    /// Checks `Q(h(x₁) − h(x₂)) > 0` over all sample pairs.
    pub fn is_horizontal(&self, q: &QuadForm) -> bool {
        let s = &self.samples;
        (0..s.len()).all(|i| {
            (i + 1..s.len()).all(|j| {
                let d: Vec<f64> = s[i].1.iter().zip(&s[j].1).map(|(a, b)| a - b).collect();
                q.eval_f64(&d) > 0.0
            })
        })
    }

    /// Graph samples `(ξ, w(ξ))` with `ξ` the unstable coordinate.
    pub fn graph(&self) -> Vec<(f64, Vec<f64>)> {
        self.samples
            .iter()
            .map(|(_, p)| (p[0], p[1..].to_vec()))
            .collect()
    }

    /// Largest `‖w(ξ₁) − w(ξ₂)‖ − L·|ξ₁ − ξ₂|` over consecutive graph samples.
    pub fn lipschitz_excess(&self, l: f64) -> f64 {
        let g = self.graph();
        g.windows(2)
            .map(|w| {
                let dw: Vec<f64> = w[0].1.iter().zip(&w[1].1).map(|(a, b)| a - b).collect();
                norm(&dw) - l * (w[0].0 - w[1].0).abs()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV with header `x,p0,p1,…`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x");
        for i in 0..self.dim() {
            let _ = write!(out, ",p{i}");
        }
        out.push('\n');
        for (x, p) in &self.samples {
            let _ = write!(out, "{x:?}");
            for v in p {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
        out
    }
}

/// Iterates the graph transform `h ↦ h*` with
/// `h*(B̄_u) = f∘h(B̄_u) ∩ {Q_v ≤ c}` re-parameterised so that
/// `π_u φ⁻¹(h*(u)) = u`.
///
/// Floating point only: useful for cross-checks and plots, not proofs.
pub fn graph_transform_1d<F>(
    f: F,
    disc: &HorizontalDisc1D,
    q_v: &QuadForm,
    c: f64,
    iterations: usize,
) -> Result<HorizontalDisc1D>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    if q_v.u_dim != 1 {
        return Err(Error::InvalidConfig(
            "graph transform supports one unstable direction".into(),
        ));
    }
    let mut h = disc.clone();
    h.q_v = *q_v;
    for _ in 0..iterations {
        h = graph_transform_step(&f, &h, q_v, c)?;
    }
    Ok(h)
}

fn graph_transform_step<F>(
    f: &F,
    h: &HorizontalDisc1D,
    q: &QuadForm,
    c: f64,
) -> Result<HorizontalDisc1D>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let u_of = |x: f64| phi_inverse(&f(&h.eval(x)), q, c)[0];
    let (lo, hi) = (h.samples[0].0, h.samples[h.samples.len() - 1].0);
    let (g_lo, g_hi) = (u_of(lo), u_of(hi));
    let increasing = g_hi > g_lo;
    if !(g_lo.min(g_hi) <= -1.0 && g_lo.max(g_hi) >= 1.0) {
        return Err(Error::ResolutionError(format!(
            "image of the disc does not span the unit ball: u range [{g_lo}, {g_hi}]"
        )));
    }
    let samples = h
        .samples
        .par_iter()
        .map(|(target, _)| {
            let (mut a, mut b) = (lo, hi);
            while b - a > BISECTION_TOL {
                let m = 0.5 * (a + b);
                let below = u_of(m) < *target;
                if below == increasing {
                    a = m;
                } else {
                    b = m;
                }
            }
            let x = 0.5 * (a + b);
            (*target, f(&h.eval(x)))
        })
        .collect();
    Ok(HorizontalDisc1D {
        samples,
        q_v: *q,
        q_h: h.q_h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::map_cone_check;
    use crate::interval::{IMatrix, IVector};

    fn diag(a: f64, b: f64) -> IMatrix {
        IMatrix::diagonal(&[Interval::point(a), Interval::point(b)])
    }

    #[test]
    fn toy_map_certificate() {
        let qh = QuadForm::horizontal(0.5, 1, 1).unwrap();
        let qv = QuadForm::vertical(0.5, 1, 1).unwrap();
        let ch = map_cone_check(&diag(2.0, 0.5), &qh, 0.3);
        let cv = map_cone_check(&diag(2.0, 0.5), &qv, 3.0);
        let cert = certify(
            ManifoldKind::MapUnstable,
            &ch,
            &cv,
            0.5,
            0.5,
            &IVector::zeros(2),
        )
        .unwrap();
        assert!(cert.r >= 0.5f64.sqrt());
        assert!(cert.lipschitz >= 0.5f64.sqrt());
        let cv_bad = map_cone_check(&diag(2.0, 0.5), &qv, 0.9);
        assert!(matches!(
            certify(
                ManifoldKind::MapUnstable,
                &ch,
                &cv_bad,
                0.5,
                0.5,
                &IVector::zeros(2)
            ),
            Err(Error::RateOrderViolation(_))
        ));
    }

    #[test]
    fn unverified_cones_are_rejected() {
        let qh = QuadForm::horizontal(0.5, 1, 1).unwrap();
        let qv = QuadForm::vertical(0.5, 1, 1).unwrap();
        let ch = map_cone_check(&diag(2.0, 0.5), &qh, 0.3);
        let cv = map_cone_check(&diag(2.0, 0.5), &qv, 5.0);
        assert!(matches!(
            certify(
                ManifoldKind::MapUnstable,
                &ch,
                &cv,
                0.5,
                0.5,
                &IVector::zeros(2)
            ),
            Err(Error::UnverifiedCones(_))
        ));
    }

    #[test]
    fn phi_examples() {
        let q = QuadForm::vertical(0.25, 1, 2).unwrap();
        let p = phi_coords(&[0.5], &[0.0, 0.0], &q, 0.81);
        assert!((p[0] - 0.45).abs() < 1e-15);
        let edge = phi_coords(&[1.0], &[0.3, -0.2], &q, 0.81);
        assert!((q.eval_f64(&edge) - 0.81).abs() < 1e-14);
        let back = phi_inverse(&phi_coords(&[1.7], &[0.3, 0.1], &q, 0.5), &q, 0.5);
        assert!((back[0] - 1.7).abs() < 1e-14 && back[1] == 0.3);
    }

    #[test]
    fn diagonal_map_keeps_flat_disc() {
        let q = QuadForm::vertical(1e-2, 1, 1).unwrap();
        let c = 1.0 - 1e-2;
        let h0 = HorizontalDisc1D::flat(q, c, 33);
        let f = |p: &[f64]| vec![2.0 * p[0], 0.5 * p[1]];
        let h = graph_transform_1d(f, &h0, &q, c, 5).unwrap();
        assert!(h.samples.iter().all(|(_, p)| p[1] == 0.0));
        assert!((h.samples[32].1[0] - c.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn contracting_map_loses_resolution() {
        let q = QuadForm::vertical(1e-2, 1, 1).unwrap();
        let h0 = HorizontalDisc1D::flat(q, 0.5, 9);
        let f = |p: &[f64]| vec![0.5 * p[0], 2.0 * p[1]];
        assert!(matches!(
            graph_transform_1d(f, &h0, &q, 0.5, 1),
            Err(Error::ResolutionError(_))
        ));
    }

    #[test]
    fn csv_layout() {
        let q = QuadForm::vertical(0.5, 1, 1).unwrap();
        let csv = HorizontalDisc1D::flat(q, 0.5, 3).to_csv();
        assert_eq!(csv.lines().next(), Some("x,p0,p1"));
        assert_eq!(csv.lines().count(), 4);
    }
}
