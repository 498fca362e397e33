//! Quadratic cones `Q(x, y) = α‖x‖² − β‖y‖²` and verified cone conditions
//! for maps and flows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::round::{div_up, mul_up, sqrt_up, sub_down};
use crate::interval::{mat_opnorm_upper, IBox, IMatrix, IVector, Interval};
use crate::linalg::{is_positive_definite, PDVerdict};

/// A diagonal quadratic form on `ℝ^u × ℝ^s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadForm {
    pub alpha: f64,
    pub beta: f64,
    pub u_dim: usize,
    pub s_dim: usize,
}

impl QuadForm {
    pub fn new(alpha: f64, beta: f64, u_dim: usize, s_dim: usize) -> Result<QuadForm> {
        if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "quadratic form needs alpha, beta > 0 (got {alpha}, {beta})"
            )));
        }
        Ok(QuadForm {
            alpha,
            beta,
            u_dim,
            s_dim,
        })
    }

    /// `Q_h = α_h‖x‖² − ‖y‖²`.
    pub fn horizontal(alpha_h: f64, u_dim: usize, s_dim: usize) -> Result<QuadForm> {
        check_unit(alpha_h, "alpha_h")?;
        QuadForm::new(alpha_h, 1.0, u_dim, s_dim)
    }

    /// `Q_v = ‖x‖² − α_v‖y‖²`.
    pub fn vertical(alpha_v: f64, u_dim: usize, s_dim: usize) -> Result<QuadForm> {
        check_unit(alpha_v, "alpha_v")?;
        QuadForm::new(1.0, alpha_v, u_dim, s_dim)
    }

    pub fn dim(&self) -> usize {
        self.u_dim + self.s_dim
    }

    /// Diagonal entries of the symmetric matrix of the form.
    pub fn weights(&self) -> Vec<Interval> {
        let mut w = vec![Interval::point(self.alpha); self.u_dim];
        w.extend(std::iter::repeat_n(Interval::point(-self.beta), self.s_dim));
        w
    }

    /// Encloses the range of `Q` over a box.
    pub fn eval(&self, p: &IVector) -> Interval {
        eval_q(self, p)
    }

    /// `Q` at a point in plain floating point.
    pub fn eval_f64(&self, p: &[f64]) -> f64 {
        let (x, y) = p.split_at(self.u_dim);
        self.alpha * x.iter().map(|v| v * v).sum::<f64>()
            - self.beta * y.iter().map(|v| v * v).sum::<f64>()
    }
}

fn check_unit(a: f64, name: &str) -> Result<()> {
    if a > 0.0 && a < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "{name} must lie in (0, 1), got {a}"
        )))
    }
}

/// Encloses `Q(p)` over the box `p`.
pub fn eval_q(q: &QuadForm, p: &IVector) -> Interval {
    assert_eq!(p.len(), q.dim(), "point dimension does not match the form");
    let x: Interval = p.iter().take(q.u_dim).map(|c| c.sqr()).sum();
    let y: Interval = p.iter().skip(q.u_dim).map(|c| c.sqr()).sum();
    x * q.alpha - y * q.beta
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeKind {
    Map,
    Flow,
}

/// Witness that `Q(f(p₁) − f(p₂)) > m·Q(p₁ − p₂)` on a domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeCertificate {
    pub form: QuadForm,
    /// Rate `m` for maps; the constant `c` of `m = 1 + 2tc` for flows.
    pub m: f64,
    pub domain: Option<IBox>,
    pub verdict: PDVerdict,
    pub kind: ConeKind,
}

impl ConeCertificate {
    pub fn verified(&self) -> bool {
        self.verdict.verified
    }

    pub fn with_domain(mut self, domain: IBox) -> ConeCertificate {
        self.domain = Some(domain);
        self
    }
}

/// The interval matrix of `V(q) = Q(Bq) − m·Q(q)` over `B ∈ dfn`.
pub fn cone_matrix(dfn: &IMatrix, q: &QuadForm, m: f64) -> IMatrix {
    let n = q.dim();
    assert!(dfn.is_square() && dfn.nrows() == n, "derivative block size");
    let w = q.weights();
    let mut v = IMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s: Interval = if i == j {
                (0..n).map(|k| w[k] * dfn[(k, i)].sqr()).sum()
            } else {
                (0..n).map(|k| w[k] * (dfn[(k, i)] * dfn[(k, j)])).sum()
            };
            v[(i, j)] = s;
            v[(j, i)] = s;
        }
        v[(i, i)] -= w[i] * m;
    }
    v
}

/// Certifies cone conditions for `(Q, m)` from an enclosure of `[Df(N)]`.
pub fn map_cone_check(dfn: &IMatrix, q: &QuadForm, m: f64) -> ConeCertificate {
    let verdict = if m > 0.0 {
        is_positive_definite(&cone_matrix(dfn, q, m))
    } else {
        PDVerdict {
            verified: false,
            method: crate::linalg::PdMethod::IntervalCholesky,
            margin: f64::NEG_INFINITY,
        }
    };
    ConeCertificate {
        form: *q,
        m,
        domain: None,
        verdict,
        kind: ConeKind::Map,
    }
}

/// Blocks of `[DF(N)] ⊂ [[A, ε₁], [ε₂, B]]` split after `u_dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowBlocks {
    pub a: IMatrix,
    pub b: IMatrix,
    pub eps1: IMatrix,
    pub eps2: IMatrix,
}

impl FlowBlocks {
    pub fn split(df: &IMatrix, u_dim: usize) -> FlowBlocks {
        let n = df.nrows();
        let s = n - u_dim;
        FlowBlocks {
            a: df.block(0, 0, u_dim, u_dim),
            eps1: df.block(0, u_dim, u_dim, s),
            eps2: df.block(u_dim, 0, s, u_dim),
            b: df.block(u_dim, u_dim, s, s),
        }
    }
}

/// Both halves of the flow cone condition for one form and one rate `c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowConeCheck {
    pub form: QuadForm,
    pub c: f64,
    /// `A − ½(‖ε₁‖ + (β/α)‖ε₂‖ + 2c)·Id`.
    pub expanding: PDVerdict,
    /// `−B − ½(‖ε₂‖ + (α/β)‖ε₁‖ − 2c)·Id`.
    pub contracting: PDVerdict,
}

impl FlowConeCheck {
    pub fn verified(&self) -> bool {
        self.expanding.verified && self.contracting.verified
    }

    pub fn certificate(&self) -> ConeCertificate {
        let verdict = match (self.expanding.verified, self.contracting.verified) {
            (true, true) if self.contracting.margin < self.expanding.margin => self.contracting,
            (true, false) => self.contracting,
            _ => self.expanding,
        };
        ConeCertificate {
            form: self.form,
            m: self.c,
            domain: None,
            verdict,
            kind: ConeKind::Flow,
        }
    }
}

fn shifted(m: &IMatrix, sign: f64, shift: Interval) -> IMatrix {
    let mut out = m.scale(Interval::point(sign));
    for i in 0..out.nrows() {
        out[(i, i)] -= shift;
    }
    out
}

/// Checks the flow cone condition for a general form `Q = α‖x‖² − β‖y‖²`.
pub fn flow_cone_pair(blocks: &FlowBlocks, q: &QuadForm, c: f64) -> FlowConeCheck {
    let e1 = Interval::point(mat_opnorm_upper(&blocks.eps1));
    let e2 = Interval::point(mat_opnorm_upper(&blocks.eps2));
    let ratio = Interval::point(q.beta) / Interval::point(q.alpha);
    let inv_ratio = Interval::point(q.alpha) / Interval::point(q.beta);
    let half = Interval::point(0.5);
    let two_c = Interval::point(2.0 * c);
    let s_a = (e1 + ratio * e2 + two_c) * half;
    let s_b = (e2 + inv_ratio * e1 - two_c) * half;
    FlowConeCheck {
        form: *q,
        c,
        expanding: is_positive_definite(&shifted(&blocks.a, 1.0, s_a)),
        contracting: is_positive_definite(&shifted(&blocks.b, -1.0, s_b)),
    }
}

/// Certificate for the four flow conditions on `Q_h` (with `c_h`) and
/// `Q_v` (with `c_v`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowConeConstants {
    pub c_h: f64,
    pub c_v: f64,
    pub alpha_h: f64,
    pub alpha_v: f64,
    pub eps1_norm: f64,
    pub eps2_norm: f64,
    /// `Q_h` pair: expansion in `A` (first) and contraction in `B` (third).
    pub horizontal: FlowConeCheck,
    /// `Q_v` pair: expansion in `A` (second) and contraction in `B` (fourth).
    pub vertical: FlowConeCheck,
    pub verified: bool,
}

impl FlowConeConstants {
    /// The four verdicts in the conventional order.
    pub fn conditions(&self) -> [PDVerdict; 4] {
        [
            self.horizontal.expanding,
            self.vertical.expanding,
            self.horizontal.contracting,
            self.vertical.contracting,
        ]
    }
}

/// Verifies the four flow cone conditions on the blocks of `[DF(N)]`.
#[allow(clippy::too_many_arguments)]
pub fn flow_cone_check(
    a: &IMatrix,
    b: &IMatrix,
    eps1: &IMatrix,
    eps2: &IMatrix,
    alpha_h: f64,
    alpha_v: f64,
    c_h: f64,
    c_v: f64,
) -> Result<FlowConeConstants> {
    let (u, s) = (a.nrows(), b.nrows());
    if !a.is_square()
        || !b.is_square()
        || eps1.nrows() != u
        || eps1.ncols() != s
        || eps2.nrows() != s
        || eps2.ncols() != u
    {
        return Err(Error::DimensionMismatch {
            expected: u + s,
            actual: eps1.ncols() + eps2.ncols(),
        });
    }
    let blocks = FlowBlocks {
        a: a.clone(),
        b: b.clone(),
        eps1: eps1.clone(),
        eps2: eps2.clone(),
    };
    let qh = QuadForm::horizontal(alpha_h, u, s)?;
    let qv = QuadForm::vertical(alpha_v, u, s)?;
    let horizontal = flow_cone_pair(&blocks, &qh, c_h);
    let vertical = flow_cone_pair(&blocks, &qv, c_v);
    let verified = horizontal.verified() && vertical.verified();
    Ok(FlowConeConstants {
        c_h,
        c_v,
        alpha_h,
        alpha_v,
        eps1_norm: mat_opnorm_upper(eps1),
        eps2_norm: mat_opnorm_upper(eps2),
        horizontal,
        vertical,
        verified,
    })
}

/// Certified `Q_h(p) ≥ α_h − 1` and `Q_v(p) ≤ 1 − α_v`; `true` implies
/// `p ∈ B̄_u × B̄_s`.
pub fn cone_membership(p: &IVector, u_dim: usize, alpha_h: f64, alpha_v: f64) -> bool {
    let s_dim = p.len() - u_dim;
    let (Ok(qh), Ok(qv)) = (
        QuadForm::horizontal(alpha_h, u_dim, s_dim),
        QuadForm::vertical(alpha_v, u_dim, s_dim),
    ) else {
        return false;
    };
    let lower = Interval::point(alpha_h) - 1.0;
    let upper = 1.0 - Interval::point(alpha_v);
    eval_q(&qh, p).lo() >= lower.hi() && eval_q(&qv, p).hi() <= upper.lo()
}

/// Upper bound on `C = √(2 / (1 − α_v·α_h))`.
pub fn contraction_constant(alpha_h: f64, alpha_v: f64) -> f64 {
    let denom = sub_down(1.0, mul_up(alpha_h, alpha_v));
    sqrt_up(div_up(2.0, denom))
}
