//! The homoclinic proof pipeline near L1.
//!
//! For each end of the parameter interval: build the local chart, enclose
//! the fixed point, bound `DF̂` over the box `N`, certify the flow cone
//! conditions, transport the set `U` to original coordinates and integrate
//! it to the symmetry section `{Y = 0}`. Opposite signs of `P_X` at the two
//! ends, together with certified crossings for every parameter fragment in
//! between, give a symmetric homoclinic orbit by continuity.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cones::{flow_cone_check, FlowBlocks, FlowConeConstants};
use crate::error::{Error, Result};
use crate::flow::{poincare_crossing, FloatFlow, FlowEnclosure, Section, StepRecord, TaylorConfig};
use crate::interval::{IBox, IMatrix, IVector, Interval};
use crate::linalg::{interval_newton, NewtonVerdict};
use crate::manifold::{certify, ManifoldCertificate, ManifoldKind};
use crate::rtbp::{
    jordan_basis, l1_mu_derivative, libration_l1, ExtendedRtbp, LocalChart, RtbpParams,
};

/// Everything the proof depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProofConfig {
    /// Decimal literal for the left end of the parameter interval.
    pub mu_left: String,
    pub mu_right: String,
    pub alpha_h: f64,
    pub alpha_v: f64,
    pub r_u: f64,
    pub c_h: f64,
    pub c_v: f64,
    /// Pieces per local axis when bounding `DF̂` over `N`.
    pub subdivision: [usize; 4],
    /// Parameter fragments checked for well-defined crossings.
    pub fragments: usize,
    /// Parameter pieces per fragment when rechecking the cones.
    pub fragment_cone_pieces: usize,
    /// Half-width of the initial fixed-point box.
    pub fixed_point_radius: f64,
    /// Time budget for reaching the section.
    pub section_time_max: f64,
    pub integrator: TaylorConfig,
}

impl Default for ProofConfig {
    fn default() -> Self {
        ProofConfig {
            mu_left: "0.004253863422".into(),
            mu_right: "0.004253863622".into(),
            alpha_h: 1e-8,
            alpha_v: 1e-4,
            r_u: 1e-7,
            c_h: 1.0,
            c_v: 2.8,
            subdivision: [256, 1, 1, 1],
            fragments: 20,
            fragment_cone_pieces: 4,
            fixed_point_radius: 1e-12,
            section_time_max: 20.0,
            integrator: TaylorConfig::default(),
        }
    }
}

impl ProofConfig {
    pub fn from_json(s: &str) -> Result<ProofConfig> {
        let cfg: ProofConfig =
            serde_json::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the invariants and returns the enclosures of both ends.
    pub fn validate(&self) -> Result<(Interval, Interval)> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let left = Interval::from_decimal(&self.mu_left)?;
        let right = Interval::from_decimal(&self.mu_right)?;
        RtbpParams::new(left)?;
        RtbpParams::new(right)?;
        if !(left.hi() < right.lo()) {
            return bad(format!("mu_left {left} must lie below mu_right {right}"));
        }
        for (name, a) in [("alpha_h", self.alpha_h), ("alpha_v", self.alpha_v)] {
            if !(a > 0.0 && a < 1.0) {
                return bad(format!("{name} = {a} outside (0, 1)"));
            }
        }
        if !(self.r_u > 0.0 && self.r_u.is_finite()) {
            return bad(format!("r_u = {} must be positive", self.r_u));
        }
        if !(self.c_v > self.c_h) {
            return bad(format!("c_v = {} must exceed c_h = {}", self.c_v, self.c_h));
        }
        if self.subdivision.contains(&0) || self.fragments == 0 || self.fragment_cone_pieces == 0 {
            return bad("subdivision counts must be positive".into());
        }
        if !(self.fixed_point_radius > 0.0 && self.section_time_max > 0.0) {
            return bad("fixed_point_radius and section_time_max must be positive".into());
        }
        Ok((left, right))
    }
}

/// Floating-point Newton iterate for `F̂ = 0` from the origin.
pub fn float_fixed_point(chart: &LocalChart) -> Result<Vec<f64>> {
    let mut q = vec![0.0; 4];
    for _ in 0..8 {
        let f = chart.local_field_f64(&q)?;
        let j = chart.local_jacobian(&IVector::from_point(&q))?.midpoint();
        let step = j
            .lu()
            .solve(&nalgebra::DVector::from_vec(f))
            .ok_or(Error::SingularEnclosure)?;
        for i in 0..4 {
            q[i] -= step[i];
        }
    }
    Ok(q)
}

/// Certified box `B` containing the unique zero of `F̂` near the origin.
pub fn enclose_fixed_point(chart: &LocalChart, radius: f64) -> Result<IBox> {
    let q0 = float_fixed_point(chart)?;
    let mut r = radius;
    for _ in 0..6 {
        let b: IBox = q0.iter().map(|&c| Interval::centered(c, r)).collect();
        let res = interval_newton(
            |q| chart.local_field(q),
            |q| chart.local_jacobian(q),
            &b,
            &q0,
        );
        if res.verdict == NewtonVerdict::UniqueRoot {
            return Ok(res.root_box.expect("unique root has a box"));
        }
        r *= 100.0;
    }
    Err(Error::Inconclusive("fixed point of the local field".into()))
}

fn sqrt_hi(x: f64) -> f64 {
    Interval::point(x)
        .sqrt()
        .map(|s| s.hi())
        .unwrap_or(f64::NAN)
}

/// `N = B + [0, r_u] × [−r_u√α_h, r_u√α_h]³`.
pub fn build_n(b: &IBox, r_u: f64, alpha_h: f64) -> IBox {
    let s =
        (Interval::point(r_u) * Interval::point(alpha_h).sqrt().unwrap_or(Interval::ENTIRE)).hi();
    (0..b.len())
        .map(|i| {
            b[i] + if i == 0 {
                Interval::new(0.0, r_u)
            } else {
                Interval::symmetric(s)
            }
        })
        .collect()
}

/// Hull of `DF̂` over a grid subdivision of `N`.
pub fn enclose_df_over_n(chart: &LocalChart, n: &IBox, counts: &[usize]) -> Result<IMatrix> {
    let parts = n.grid(counts);
    let mats: Vec<Result<IMatrix>> = parts.par_iter().map(|q| chart.local_jacobian(q)).collect();
    let mut out: Option<IMatrix> = None;
    for m in mats {
        let m = m?;
        out = Some(match out {
            None => m,
            Some(h) => h.hull(&m),
        });
    }
    out.ok_or_else(|| Error::InvalidConfig("empty subdivision".into()))
}

/// Flow cone conditions on the `(1 | 3)` split of `[DF̂(N)]`.
pub fn cone_constants(dfn: &IMatrix, cfg: &ProofConfig) -> Result<FlowConeConstants> {
    let bl = FlowBlocks::split(dfn, 1);
    flow_cone_check(
        &bl.a,
        &bl.b,
        &bl.eps1,
        &bl.eps2,
        cfg.alpha_h,
        cfg.alpha_v,
        cfg.c_h,
        cfg.c_v,
    )
}

/// `U = B + r_u·({√(1−α_v)} × [−√α_h, √α_h]³)` in local coordinates.
pub fn u_local(b: &IBox, cfg: &ProofConfig) -> Result<IBox> {
    let ru = Interval::point(cfg.r_u);
    let a = (Interval::ONE - Interval::point(cfg.alpha_v)).sqrt()? * ru;
    let s = Interval::symmetric(sqrt_hi(cfg.alpha_h)) * ru;
    Ok((0..4).map(|i| b[i] + if i == 0 { a } else { s }).collect())
}

/// `Φ(U)` as a Lohner set, by the mean-value form around the centre.
pub fn u_original(chart: &LocalChart, u: &IBox) -> FlowEnclosure {
    let c = IVector::from_point(&u.midpoint());
    FlowEnclosure::from_affine(&chart.phi(&c), &chart.dphi(u), &(u - &c))
}

/// `U` certified for the flow unstable manifold.
pub fn certify_unstable(
    b: &IBox,
    dfn: &IMatrix,
    cfg: &ProofConfig,
) -> Result<(FlowConeConstants, ManifoldCertificate)> {
    let cones = cone_constants(dfn, cfg)?;
    if !cones.verified {
        return Err(Error::UnverifiedCones(format!(
            "c_h = {}, c_v = {}",
            cfg.c_h, cfg.c_v
        )));
    }
    let cert = certify(
        ManifoldKind::FlowUnstable,
        &cones.horizontal.certificate(),
        &cones.vertical.certificate(),
        cfg.alpha_h,
        cfg.alpha_v,
        b,
    )?;
    Ok((cones, cert))
}

/// The floating-point time-`tau` map in local coordinates divided by `r_u`,
/// so that `N` becomes a unit-sized box.
pub fn scaled_time_map(
    chart: &LocalChart,
    r_u: f64,
    tau: f64,
) -> Result<impl Fn(&[f64]) -> Vec<f64> + Sync + '_> {
    let p = RtbpParams::point(chart.params.mu().mid())?;
    let flow = FloatFlow::default();
    Ok(move |q: &[f64]| {
        let q: Vec<f64> = q.iter().map(|v| v * r_u).collect();
        let x = chart.phi_f64(&q);
        match flow.flow(&p, &x, tau) {
            Ok(y) => chart.phi_inverse_f64(&y).iter().map(|v| v / r_u).collect(),
            Err(_) => vec![f64::NAN; 4],
        }
    })
}

/// `{Y = 0}` crossed with `Ẏ > 0`.
pub fn symmetry_section() -> Section {
    Section {
        index: 1,
        value: 0.0,
        direction: 1,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Proved,
    NotProved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageVerdict {
    pub name: String,
    pub verified: bool,
    pub note: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoincareReport {
    pub image: IBox,
    pub time: Interval,
    pub steps: usize,
    /// Required sign of `P_X` on the image.
    pub required_sign: i8,
    pub verified: bool,
}

/// Results for one end of the parameter interval.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EndpointReport {
    pub label: String,
    pub mu: Interval,
    pub l1: IVector,
    pub lambda: Interval,
    pub v: Interval,
    #[serde(rename = "B")]
    pub b: IBox,
    #[serde(rename = "N")]
    pub n: IBox,
    #[serde(rename = "DFN")]
    pub dfn: IMatrix,
    pub cones: FlowConeConstants,
    pub certificate: Option<ManifoldCertificate>,
    pub u_local: IBox,
    pub u_original: IBox,
    pub poincare: Option<PoincareReport>,
    pub errors: Vec<String>,
}

impl EndpointReport {
    pub fn cones_verified(&self) -> bool {
        self.certificate.is_some()
    }

    pub fn poincare_verified(&self) -> bool {
        self.poincare.as_ref().is_some_and(|p| p.verified)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FragmentReport {
    pub index: usize,
    pub mu: Interval,
    pub verified: bool,
    /// Pieces the fragment was finally split into.
    pub pieces: usize,
    pub time: Option<Interval>,
    pub image: Option<IBox>,
    pub error: Option<String>,
}

/// The outcome of the whole pipeline.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProofReport {
    pub verdict: Verdict,
    /// The parameter interval containing a homoclinic parameter.
    pub mu_interval: Interval,
    pub config: ProofConfig,
    pub scaling: String,
    pub left: EndpointReport,
    pub right: EndpointReport,
    pub fragments: Vec<FragmentReport>,
    pub stages: Vec<StageVerdict>,
    /// Wall-clock seconds per stage; excluded from the JSON so reports are
    /// reproducible.
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

const SCALING_NOTE: &str = "local coordinates are scaled uniformly by r_u, so N maps to \
[0,1]x[-sqrt(alpha_h),sqrt(alpha_h)]^3; DF-hat is unchanged by a uniform scaling. \
B is kept in full inside U.";

/// Chart, fixed point, `[DF̂(N)]`, cones and `U` for one parameter value;
/// the report has no Poincaré data yet. Also returns `U` as a Lohner set.
pub fn manifold_stage(
    label: &str,
    mu: Interval,
    cfg: &ProofConfig,
    timings: &mut Vec<(String, f64)>,
) -> Result<(EndpointReport, FlowEnclosure)> {
    let p = RtbpParams::new(mu)?;
    let t = Instant::now();
    let chart = jordan_basis(&p)?;
    timings.push((format!("{label}: chart"), t.elapsed().as_secs_f64()));
    let t = Instant::now();
    let b = enclose_fixed_point(&chart, cfg.fixed_point_radius)?;
    timings.push((format!("{label}: fixed point"), t.elapsed().as_secs_f64()));
    let n = build_n(&b, cfg.r_u, cfg.alpha_h);
    let t = Instant::now();
    let dfn = enclose_df_over_n(&chart, &n, &cfg.subdivision)?;
    timings.push((format!("{label}: DF over N"), t.elapsed().as_secs_f64()));
    let t = Instant::now();
    let cones = cone_constants(&dfn, cfg)?;
    let mut errors = Vec::new();
    let certificate = match certify_unstable(&b, &dfn, cfg) {
        Ok((_, c)) => Some(c),
        Err(e) => {
            errors.push(e.to_string());
            None
        }
    };
    timings.push((format!("{label}: cones"), t.elapsed().as_secs_f64()));
    let ul = u_local(&b, cfg)?;
    let uo = u_original(&chart, &ul);
    let report = EndpointReport {
        label: label.into(),
        mu,
        l1: chart.l1.clone(),
        lambda: chart.lambda,
        v: chart.v,
        b,
        n,
        dfn,
        cones,
        certificate,
        u_local: ul,
        u_original: uo.hull(),
        poincare: None,
        errors,
    };
    Ok((report, uo))
}

fn endpoint_stage(
    label: &str,
    mu: Interval,
    cfg: &ProofConfig,
    timings: &mut Vec<(String, f64)>,
) -> Result<EndpointReport> {
    let (mut report, uo) = manifold_stage(label, mu, cfg, timings)?;
    let p = RtbpParams::new(mu)?;
    let errors = &mut report.errors;
    let required_sign = if label == "left" { -1 } else { 1 };
    let t = Instant::now();
    let poincare = match poincare_crossing(
        &p,
        &uo,
        &symmetry_section(),
        cfg.section_time_max,
        &cfg.integrator,
        |_| {},
    ) {
        Ok(c) => {
            let px = c.image_box[2];
            let verified = if required_sign < 0 {
                px.is_neg()
            } else {
                px.is_pos()
            };
            if !verified {
                errors.push(format!("P_X image {px} does not have sign {required_sign}"));
            }
            Some(PoincareReport {
                image: c.image_box,
                time: c.time,
                steps: c.steps,
                required_sign,
                verified,
            })
        }
        Err(e) => {
            errors.push(e.to_string());
            None
        }
    };
    timings.push((format!("{label}: Poincaré map"), t.elapsed().as_secs_f64()));
    report.poincare = poincare;
    Ok(report)
}

/// The set `{(x, μ) : x ∈ U_μ, μ ∈ mu}` in the extended phase space. The
/// chart basis is frozen at the midpoint mass and recentred at each L1, so
/// the cones are rechecked over the whole fragment and `B = {0}`.
pub fn extended_u(mu: Interval, cfg: &ProofConfig) -> Result<FlowEnclosure> {
    let p = RtbpParams::new(mu)?;
    let mc = mu.mid();
    let pc = RtbpParams::point(mc)?;
    let base = jordan_basis(&pc)?;
    let chart = base.with_params(&p)?;
    let b = IBox::zeros(4);
    let n = build_n(&b, cfg.r_u, cfg.alpha_h);
    let mut dfn: Option<IMatrix> = None;
    for piece in mu.subdivide(cfg.fragment_cone_pieces) {
        let d = enclose_df_over_n(
            &base.with_params(&RtbpParams::new(piece)?)?,
            &n,
            &cfg.subdivision,
        )?;
        dfn = Some(dfn.map_or(d.clone(), |h| h.hull(&d)));
    }
    certify_unstable(&b, &dfn.expect("at least one piece"), cfg)?;
    let u = u_local(&b, cfg)?;
    let qc = IVector::from_point(&u.midpoint());
    let l1c = libration_l1(&pc)?;
    let dl1 = l1_mu_derivative(&p, chart.l1[0])?;
    let xc = &l1c + &chart.c.mul_vec(&chart.psi(&qc));
    let aq = chart.dphi(&u);
    let mut a = IMatrix::zeros(5, 5);
    for i in 0..4 {
        for j in 0..4 {
            a[(i, j)] = aq[(i, j)];
        }
    }
    a[(0, 4)] = dl1;
    a[(3, 4)] = dl1;
    a[(4, 4)] = Interval::ONE;
    let mut center: Vec<Interval> = xc.into_vec();
    center.push(Interval::point(mc));
    let mut r: Vec<Interval> = (&u - &qc).into_vec();
    r.push(mu - mc);
    Ok(FlowEnclosure::from_affine(
        &IVector::new(center),
        &a,
        &IVector::new(r),
    ))
}

/// Certified first crossing of the section from `U_μ` for all `μ` in `mu`.
pub fn fragment_crossing(mu: Interval, cfg: &ProofConfig) -> Result<crate::flow::Crossing> {
    let e = extended_u(mu, cfg)?;
    let mut c = poincare_crossing(
        &ExtendedRtbp::new(mu)?,
        &e,
        &symmetry_section(),
        cfg.section_time_max,
        &cfg.integrator,
        |_: &StepRecord| {},
    )?;
    c.image_box = c.image_box.iter().take(4).copied().collect();
    Ok(c)
}

fn check_fragment(index: usize, mu: Interval, cfg: &ProofConfig) -> FragmentReport {
    let mut pieces = 1;
    let mut last_err = None;
    for _ in 0..2 {
        let parts = mu.subdivide(pieces);
        let results: Vec<Result<crate::flow::Crossing>> =
            parts.iter().map(|m| fragment_crossing(*m, cfg)).collect();
        if results.iter().all(|r| r.is_ok()) {
            let mut time: Option<Interval> = None;
            let mut image: Option<IBox> = None;
            for c in results.into_iter().flatten() {
                time = Some(time.map_or(c.time, |t| t.hull(c.time)));
                image = Some(image.map_or(c.image_box.clone(), |b| b.hull(&c.image_box)));
            }
            return FragmentReport {
                index,
                mu,
                verified: true,
                pieces,
                time,
                image,
                error: None,
            };
        }
        last_err = results.into_iter().find_map(|r| r.err());
        pieces *= 2;
    }
    FragmentReport {
        index,
        mu,
        verified: false,
        pieces: pieces / 2,
        time: None,
        image: None,
        error: last_err.map(|e| e.to_string()),
    }
}

fn stage(name: &str, verified: bool, note: impl Into<String>) -> StageVerdict {
    StageVerdict {
        name: name.into(),
        verified,
        note: note.into(),
    }
}

/// Runs the full proof. Numerical failures lower the verdict to
/// `NOT_PROVED`; only configuration errors are returned as `Err`.
pub fn check_homoclinic(cfg: &ProofConfig) -> Result<ProofReport> {
    let (left_mu, right_mu) = cfg.validate()?;
    let mu_interval = left_mu.hull(right_mu);
    let (mut tl, mut tr) = (Vec::new(), Vec::new());
    let (left, right) = rayon::join(
        || endpoint_stage("left", left_mu, cfg, &mut tl),
        || endpoint_stage("right", right_mu, cfg, &mut tr),
    );
    let (left, right) = (left?, right?);
    let t = Instant::now();
    let fragments: Vec<FragmentReport> = mu_interval
        .subdivide(cfg.fragments)
        .into_par_iter()
        .enumerate()
        .map(|(i, m)| check_fragment(i, m, cfg))
        .collect();
    let mut timings = tl;
    timings.extend(tr);
    timings.push(("fragments".into(), t.elapsed().as_secs_f64()));

    let covered = fragments
        .first()
        .is_some_and(|f| f.mu.lo() <= mu_interval.lo())
        && fragments
            .last()
            .is_some_and(|f| f.mu.hi() >= mu_interval.hi())
        && fragments.windows(2).all(|w| w[0].mu.hi() >= w[1].mu.lo());
    let frag_ok = covered && fragments.iter().all(|f| f.verified);
    let b_ok = |e: &EndpointReport| e.b.max_width() <= 2e-14;
    let px = |e: &EndpointReport| {
        e.poincare.as_ref().map_or("no crossing".to_string(), |p| {
            format!("P_X in {}", p.image[2])
        })
    };
    let stages = vec![
        stage(
            "fixed_point",
            true,
            format!(
                "max width of B: left {:e}, right {:e}{}",
                left.b.max_width(),
                right.b.max_width(),
                if b_ok(&left) && b_ok(&right) {
                    ""
                } else {
                    " (wider than 2e-14)"
                }
            ),
        ),
        stage(
            "cones",
            left.cones_verified() && right.cones_verified(),
            format!("c_h = {}, c_v = {}", cfg.c_h, cfg.c_v),
        ),
        stage("poincare_left", left.poincare_verified(), px(&left)),
        stage("poincare_right", right.poincare_verified(), px(&right)),
        stage(
            "fragments",
            frag_ok,
            format!(
                "{} of {} fragments with certified crossings",
                fragments.iter().filter(|f| f.verified).count(),
                fragments.len()
            ),
        ),
    ];
    let verdict = if stages.iter().all(|s| s.verified) {
        Verdict::Proved
    } else {
        Verdict::NotProved
    };
    Ok(ProofReport {
        verdict,
        mu_interval,
        config: cfg.clone(),
        scaling: SCALING_NOTE.into(),
        left,
        right,
        fragments,
        stages,
        timings,
    })
}

/// Independent re-verification of the serialised claims in a report.
pub fn recheck(report: &ProofReport) -> Vec<(String, bool)> {
    let cfg = &report.config;
    let mut out = Vec::new();
    for e in [&report.left, &report.right] {
        let cones = cone_constants(&e.dfn, cfg)
            .map(|c| c.verified)
            .unwrap_or(false);
        out.push((
            format!("{}: cone conditions", e.label),
            cones == e.cones_verified(),
        ));
        out.push((format!("{}: B inside N", e.label), e.b.subset(&e.n)));
        out.push((format!("{}: U inside N", e.label), e.u_local.subset(&e.n)));
        let chart_ok = RtbpParams::new(e.mu)
            .and_then(|p| jordan_basis(&p))
            .map(|ch| {
                ch.l1 == e.l1
                    && ch
                        .local_field(&e.b)
                        .map(|f| f.contains_zero())
                        .unwrap_or(false)
            })
            .unwrap_or(false);
        out.push((format!("{}: chart and fixed point", e.label), chart_ok));
        if let Some(p) = &e.poincare {
            let sign = if p.required_sign < 0 {
                p.image[2].is_neg()
            } else {
                p.image[2].is_pos()
            };
            out.push((format!("{}: P_X sign", e.label), sign == p.verified));
            out.push((
                format!("{}: image on section", e.label),
                p.image[1] == Interval::ZERO,
            ));
        }
    }
    let frag_cover = report
        .fragments
        .windows(2)
        .all(|w| w[0].mu.hi() >= w[1].mu.lo());
    out.push(("fragments cover the parameter interval".into(), frag_cover));
    out
}

fn fmt_box(b: &IBox) -> String {
    b.iter()
        .map(|x| format!("{x:.12}"))
        .collect::<Vec<_>>()
        .join("\n    ")
}

impl ProofReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Plain-text summary laid out like the usual tables of such a proof.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "parameter interval {}", self.mu_interval);
        for e in [&self.left, &self.right] {
            let _ = writeln!(s, "\n[{}] mu = {}", e.label, e.mu);
            let _ = writeln!(s, "  L1 X = {:.16}", e.l1[0]);
            let _ = writeln!(s, "  lambda = {:.12}, v = {:.12}", e.lambda, e.v);
            let _ = writeln!(s, "  B =\n    {}", fmt_box(&e.b));
            let _ = writeln!(s, "  [DF(N)] =");
            for i in 0..e.dfn.nrows() {
                let row: Vec<String> = e.dfn.row(i).iter().map(|x| format!("{x:.5}")).collect();
                let _ = writeln!(s, "    {}", row.join("  "));
            }
            let _ = writeln!(
                s,
                "  cones (c_h = {}, c_v = {}): {}",
                e.cones.c_h,
                e.cones.c_v,
                if e.cones.verified {
                    "verified"
                } else {
                    "NOT verified"
                }
            );
            let _ = writeln!(s, "  U - L1 =");
            let rel = &e.u_original - &e.l1;
            let _ = writeln!(s, "    {}", fmt_box(&rel));
            match &e.poincare {
                Some(p) => {
                    let _ = writeln!(
                        s,
                        "  P(U) at t in {:.6}:\n    {}",
                        p.time,
                        fmt_box(&p.image)
                    );
                }
                None => {
                    let _ = writeln!(s, "  P(U): no certified crossing");
                }
            }
            for err in &e.errors {
                let _ = writeln!(s, "  ! {err}");
            }
        }
        let _ = writeln!(s);
        for st in &self.stages {
            let _ = writeln!(
                s,
                "{:<16} {}  {}",
                st.name,
                if st.verified { "ok  " } else { "FAIL" },
                st.note
            );
        }
        let _ = writeln!(
            s,
            "\nverdict: {}",
            match self.verdict {
                Verdict::Proved => "PROVED",
                Verdict::NotProved => "NOT_PROVED",
            }
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n_from_point_fixed_point() {
        let n = build_n(&IVector::zeros(4), 1.0, 0.25);
        assert_eq!(n[0], Interval::new(0.0, 1.0));
        for i in 1..4 {
            assert_eq!(n[i], Interval::new(-0.5, 0.5));
        }
    }

    #[test]
    fn config_validation() {
        let mut c = ProofConfig::default();
        assert!(c.validate().is_ok());
        std::mem::swap(&mut c.mu_left, &mut c.mu_right);
        assert!(c.validate().is_err());
        let c = ProofConfig {
            c_v: 0.5,
            ..ProofConfig::default()
        };
        assert!(c.validate().is_err());
        assert!(ProofConfig::from_json("{\"alpha_h\": 2.0}").is_err());
        assert!(ProofConfig::from_json("{\"unknown\": 1}").is_err());
    }

    #[test]
    fn single_piece_equals_direct_evaluation() {
        let ch = jordan_basis(&RtbpParams::from_decimal("0.004253863422").unwrap()).unwrap();
        let n = build_n(&IVector::zeros(4), 1e-7, 1e-8);
        let d = enclose_df_over_n(&ch, &n, &[1, 1, 1, 1]).unwrap();
        assert_eq!(d, ch.local_jacobian(&n).unwrap());
        let fine = enclose_df_over_n(&ch, &n, &[8, 1, 1, 1]).unwrap();
        assert!(fine.subset(&d));
    }
}
