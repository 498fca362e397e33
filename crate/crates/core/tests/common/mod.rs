//! Independent oracles and property checks shared by the integration tests.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::sync::OnceLock;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Integer, One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use conecert::cones::{cone_membership, contraction_constant, map_cone_check, QuadForm};
use conecert::flow::{
    gronwall_bounds, integrate, AffineField, FloatFlow, FlowEnclosure, StepRecord, TaylorConfig,
    VectorFieldBounds,
};
use conecert::manifold::{graph_transform_1d, HorizontalDisc1D};
use conecert::prover::{scaled_time_map, ProofConfig};
use conecert::rtbp::{jacobi, jordan_basis, symmetry_s, RtbpParams, State};
use conecert::{IMatrix, IVector, Interval};

pub const HOMOCLINIC_MU: &str = "0.004253863522";

pub fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

/// `x` lies in `[lo, hi]`, with infinite endpoints treated as unbounded.
pub fn rat_in(x: &BigRational, iv: Interval) -> bool {
    (iv.lo() == f64::NEG_INFINITY || rat(iv.lo()) <= *x)
        && (iv.hi() == f64::INFINITY || *x <= rat(iv.hi()))
}

/// `[lo, hi]` certainly misses the exact value known to lie in `[a, b]`.
fn misses(iv: Interval, a: &BigRational, b: &BigRational) -> bool {
    (iv.hi() != f64::INFINITY && rat(iv.hi()) < *a)
        || (iv.lo() != f64::NEG_INFINITY && rat(iv.lo()) > *b)
}

const BITS: usize = 256;

fn scale() -> &'static BigInt {
    static S: OnceLock<BigInt> = OnceLock::new();
    S.get_or_init(|| BigInt::one() << BITS)
}

fn ceil_div(a: &BigInt, b: &BigInt) -> BigInt {
    -((-a).div_floor(b))
}

/// Fixed-point interval with `BITS` fractional bits and directed rounding.
#[derive(Clone, Debug)]
struct Fx {
    lo: BigInt,
    hi: BigInt,
}

impl Fx {
    fn from_rat(r: &BigRational) -> Fx {
        let v = r * BigRational::from_integer(scale().clone());
        Fx {
            lo: v.floor().to_integer(),
            hi: v.ceil().to_integer(),
        }
    }

    fn one() -> Fx {
        Fx {
            lo: scale().clone(),
            hi: scale().clone(),
        }
    }

    fn add(&self, o: &Fx) -> Fx {
        Fx {
            lo: &self.lo + &o.lo,
            hi: &self.hi + &o.hi,
        }
    }

    fn neg(&self) -> Fx {
        Fx {
            lo: -&self.hi,
            hi: -&self.lo,
        }
    }

    fn mul(&self, o: &Fx) -> Fx {
        let c = [
            &self.lo * &o.lo,
            &self.lo * &o.hi,
            &self.hi * &o.lo,
            &self.hi * &o.hi,
        ];
        let mn = c.iter().min().expect("four products");
        let mx = c.iter().max().expect("four products");
        Fx {
            lo: mn >> BITS,
            hi: -((-mx) >> BITS),
        }
    }

    fn div_int(&self, n: u64) -> Fx {
        let d = BigInt::from(n);
        Fx {
            lo: self.lo.div_floor(&d),
            hi: ceil_div(&self.hi, &d),
        }
    }

    fn mag(&self) -> BigInt {
        self.lo.abs().max(self.hi.abs())
    }

    fn widen(&self, r: &BigInt) -> Fx {
        Fx {
            lo: &self.lo - r,
            hi: &self.hi + r,
        }
    }

    fn bounds(&self) -> (BigRational, BigRational) {
        (
            BigRational::new(self.lo.clone(), scale().clone()),
            BigRational::new(self.hi.clone(), scale().clone()),
        )
    }
}

/// Rigorous bounds on `e^x` by argument halving and a Taylor polynomial.
pub fn exp_bounds(x: &BigRational) -> (BigRational, BigRational) {
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let two = BigRational::from_integer(BigInt::from(2));
    let mut y = x.clone();
    let mut k = 0;
    while y.abs() > half {
        y /= &two;
        k += 1;
    }
    let y = Fx::from_rat(&y);
    let mut term = Fx::one();
    let mut sum = Fx::one();
    for n in 1..=30u64 {
        term = term.mul(&y).div_int(n);
        sum = sum.add(&term);
    }
    let mut s = sum.widen(&(term.mag() + BigInt::one()));
    for _ in 0..k {
        s = s.mul(&s);
        if s.lo.is_negative() {
            s.lo = BigInt::zero();
        }
    }
    s.bounds()
}

/// Rigorous bounds on `sin x` (`odd`) or `cos x` for `|x| ≤ 8`.
pub fn trig_bounds(x: &BigRational, odd: bool) -> (BigRational, BigRational) {
    let xf = Fx::from_rat(x);
    let x2 = xf.mul(&xf);
    let mut term = if odd { xf } else { Fx::one() };
    let mut sum = term.clone();
    for n in 1..=46u64 {
        let d = if odd {
            (2 * n) * (2 * n + 1)
        } else {
            (2 * n - 1) * (2 * n)
        };
        term = term.mul(&x2).div_int(d).neg();
        sum = sum.add(&term);
    }
    sum.widen(&(term.mag() + BigInt::one())).bounds()
}

#[derive(Debug)]
pub struct FuzzReport {
    pub op: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub example: Option<String>,
    pub secs: f64,
}

fn gen_f64(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..10) {
        0 => rng.random_range(-2..=2) as f64,
        _ => {
            let sign = if rng.random_bool(0.5) { -1.0 } else { 1.0 };
            sign * rng.random_range(1.0..10.0) * 10f64.powi(rng.random_range(-8..=8))
        }
    }
}

fn gen_interval(rng: &mut ChaCha8Rng) -> Interval {
    let a = gen_f64(rng);
    let b = if rng.random_bool(0.3) {
        a
    } else {
        gen_f64(rng)
    };
    Interval::new(a.min(b), a.max(b))
}

fn gen_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64, max_width: f64) -> Interval {
    let a = rng.random_range(lo..hi);
    let w = if rng.random_bool(0.3) {
        0.0
    } else {
        rng.random_range(0.0..max_width)
    };
    Interval::new(a, (a + w).min(hi))
}

fn samples(rng: &mut ChaCha8Rng, iv: Interval) -> [f64; 3] {
    let t: f64 = rng.random_range(0.0..1.0);
    let m = (iv.lo() + t * (iv.hi() - iv.lo())).clamp(iv.lo(), iv.hi());
    [iv.lo(), iv.hi(), m]
}

struct Tally {
    start: std::time::Instant,
    op: &'static str,
    cases: usize,
    failures: usize,
    example: Option<String>,
}

impl Tally {
    fn new(op: &'static str) -> Tally {
        Tally {
            start: std::time::Instant::now(),
            op,
            cases: 0,
            failures: 0,
            example: None,
        }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures += 1;
            if self.example.is_none() {
                self.example = Some(what());
            }
        }
    }

    fn done(self) -> FuzzReport {
        FuzzReport {
            op: self.op,
            cases: self.cases,
            failures: self.failures,
            example: self.example,
            secs: self.start.elapsed().as_secs_f64(),
        }
    }
}

type Binary = (
    &'static str,
    fn(Interval, Interval) -> Interval,
    fn(&BigRational, &BigRational) -> Option<BigRational>,
);

/// Checks that every interval operation contains the exact result at
/// sampled arguments, `cases` times per operation.
pub fn fuzz_containment(cases: usize, seed: u64) -> Vec<FuzzReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let binary: [Binary; 4] = [
        ("add", |a, b| a + b, |x, y| Some(x + y)),
        ("sub", |a, b| a - b, |x, y| Some(x - y)),
        ("mul", |a, b| a * b, |x, y| Some(x * y)),
        (
            "div",
            |a, b| a / b,
            |x, y| if y.is_zero() { None } else { Some(x / y) },
        ),
    ];
    for (name, op, exact) in binary {
        let mut t = Tally::new(name);
        for _ in 0..cases {
            let (a, b) = (gen_interval(&mut rng), gen_interval(&mut rng));
            let r = op(a, b);
            t.cases += 1;
            for x in samples(&mut rng, a) {
                for y in samples(&mut rng, b) {
                    if let Some(v) = exact(&rat(x), &rat(y)) {
                        t.record(rat_in(&v, r), || {
                            format!("{a} {name} {b} = {r} misses {x}, {y}")
                        });
                    }
                }
            }
        }
        out.push(t.done());
    }
    type Unary = (
        &'static str,
        fn(Interval) -> Option<Interval>,
        fn(&BigRational) -> Option<BigRational>,
    );
    let unary: [Unary; 4] = [
        ("sqr", |a| Some(a.sqr()), |x| Some(x * x)),
        ("abs", |a| Some(a.abs()), |x| Some(x.abs())),
        (
            "recip",
            |a| a.recip().ok(),
            |x| if x.is_zero() { None } else { Some(x.recip()) },
        ),
        ("powi3", |a| a.powi(3).ok(), |x| Some(x * x * x)),
    ];
    for (name, op, exact) in unary {
        let mut t = Tally::new(name);
        for _ in 0..cases {
            let a = gen_interval(&mut rng);
            t.cases += 1;
            let Some(r) = op(a) else {
                t.record(name == "recip" && a.contains_zero(), || {
                    format!("{name}({a}) failed")
                });
                continue;
            };
            for x in samples(&mut rng, a) {
                if let Some(v) = exact(&rat(x)) {
                    t.record(rat_in(&v, r), || format!("{name}({a}) = {r} misses {x}"));
                }
            }
        }
        out.push(t.done());
    }
    let mut t = Tally::new("sqrt");
    for _ in 0..cases {
        let g = gen_interval(&mut rng);
        let a = Interval::new(
            g.lo().abs().min(g.hi().abs()),
            g.lo().abs().max(g.hi().abs()),
        );
        t.cases += 1;
        match a.sqrt() {
            Ok(r) => {
                for x in samples(&mut rng, a) {
                    let v = rat(x);
                    let ok = r.lo() >= 0.0 && rat(r.lo()).pow(2) <= v && v <= rat(r.hi()).pow(2);
                    t.record(ok, || format!("sqrt({a}) = {r} misses {x}"));
                }
            }
            Err(e) => t.record(false, || format!("sqrt({a}) failed: {e}")),
        }
    }
    out.push(t.done());
    type Transcendental = (
        &'static str,
        fn(Interval) -> Interval,
        fn(&BigRational) -> (BigRational, BigRational),
        f64,
    );
    let trans: [Transcendental; 3] = [
        ("exp", |a| a.exp(), exp_bounds, 40.0),
        ("sin", |a| a.sin(), |x| trig_bounds(x, true), 8.0),
        ("cos", |a| a.cos(), |x| trig_bounds(x, false), 8.0),
    ];
    for (name, op, bounds, range) in trans {
        let mut t = Tally::new(name);
        for _ in 0..cases {
            let a = gen_in(&mut rng, -range, range, 2.0);
            let r = op(a);
            t.cases += 1;
            let [lo, hi, m] = samples(&mut rng, a);
            let end = if rng.random_bool(0.5) { lo } else { hi };
            for x in [end, m] {
                let (lo, hi) = bounds(&rat(x));
                t.record(!misses(r, &lo, &hi), || {
                    format!("{name}({a}) = {r} misses {name}({x})")
                });
            }
        }
        out.push(t.done());
    }
    out
}

/// Outcome of one property: a human-readable detail either way.
pub type Check = Result<String, String>;

/// `(2x·a, y·b)`-type maps verify exactly for `m ∈ (b², a²)`.
pub fn diagonal_cone_range() -> Check {
    let forms = [
        QuadForm::horizontal(0.5, 1, 1).unwrap(),
        QuadForm::vertical(0.25, 1, 1).unwrap(),
        QuadForm::new(0.7, 1.3, 1, 1).unwrap(),
    ];
    let mut checked = 0;
    for (a, b) in [(2.0, 0.5), (3.0, 0.25), (1.5, 0.9)] {
        let f = IMatrix::diagonal(&[Interval::point(a), Interval::point(b)]);
        let (lo, hi) = (b * b, a * a);
        for q in &forms {
            for m in [lo + 1e-6, 0.5 * (lo + hi), hi - 1e-6] {
                checked += 1;
                if !map_cone_check(&f, q, m).verified() {
                    return Err(format!("a = {a}, b = {b}, m = {m} should verify"));
                }
            }
            for m in [lo - 1e-6, hi + 1e-6] {
                checked += 1;
                if map_cone_check(&f, q, m).verified() {
                    return Err(format!("a = {a}, b = {b}, m = {m} should fail"));
                }
            }
        }
    }
    Ok(format!(
        "{checked} (map, form, m) combinations match (b², a²) within 1e-6"
    ))
}

/// `x′ = x` attains the first Gronwall bound: `(e − 1)·dist` at `t = 1`.
pub fn gronwall_equality() -> Check {
    let b = VectorFieldBounds::new(10.0, 1.0, 0.0).map_err(|e| e.to_string())?;
    let mut worst = 0.0_f64;
    for dist in [1e-3, 0.5, 1.0, 7.0] {
        let g1 = gronwall_bounds(&b, 1.0, dist).0;
        let (lo, hi) = exp_bounds(&BigRational::one());
        let one = BigRational::one();
        let (elo, ehi) = ((lo - &one) * rat(dist), (hi - &one) * rat(dist));
        if rat(g1) < ehi {
            return Err(format!("g1 = {g1} is below (e − 1)·{dist}"));
        }
        let excess = (rat(g1) - elo) / rat(dist);
        let excess = num::ToPrimitive::to_f64(&excess).unwrap_or(f64::INFINITY);
        worst = worst.max(excess);
        if excess > 1e-12 {
            return Err(format!("g1 exceeds (e − 1)·dist by {excess:e} relative"));
        }
    }
    let line = AffineField::diagonal(&[1.0]);
    let f = FloatFlow::default();
    let (p1, p2) = (0.9, 0.15);
    let d = ((f.flow(&line, &[p1], 1.0).unwrap()[0] - p1)
        - (f.flow(&line, &[p2], 1.0).unwrap()[0] - p2))
        .abs();
    let g1 = gronwall_bounds(&b, 1.0, p1 - p2).0;
    if (g1 - d).abs() > 1e-12 {
        return Err(format!("flow difference {d} vs bound {g1}"));
    }
    Ok(format!(
        "relative excess ≤ {worst:e}; flow difference matches to 1e-12"
    ))
}

fn shear(p: &[f64]) -> Vec<f64> {
    vec![2.0 * p[0], 0.5 * p[1] + 0.1 * p[0]]
}

/// Graph transform of the shear map converges to its eigendirection.
pub fn shear_recovery() -> Check {
    let qv = QuadForm::vertical(0.5, 1, 1).unwrap();
    let h = graph_transform_1d(shear, &HorizontalDisc1D::flat(qv, 0.5, 65), &qv, 0.5, 40)
        .map_err(|e| e.to_string())?;
    let err = h
        .samples
        .iter()
        .map(|(_, p)| (p[1] - p[0] / 15.0).abs())
        .fold(0.0, f64::max);
    if err <= 1e-10 {
        Ok(format!("sup error {err:e}"))
    } else {
        Err(format!("sup error {err:e} exceeds 1e-10"))
    }
}

fn pairwise_lipschitz(
    samples: &[(f64, Vec<f64>)],
    l: f64,
    slack: f64,
) -> std::result::Result<f64, String> {
    let mut worst = 0.0_f64;
    for (i, (_, a)) in samples.iter().enumerate() {
        for (_, b) in &samples[i + 1..] {
            let du = (a[0] - b[0]).abs();
            let ds = a[1..]
                .iter()
                .zip(&b[1..])
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            if ds > l * du + slack {
                return Err(format!("|Δs| = {ds:e} > {l}·{du:e}"));
            }
            if du > 0.0 {
                worst = worst.max(ds / du);
            }
        }
    }
    Ok(worst)
}

/// Computed `w^u` samples are `√α_h`-Lipschitz, for the shear map and for
/// the PCR3BP time-½ map near L1.
pub fn lipschitz_wu() -> Check {
    let qv = QuadForm::vertical(0.5, 1, 1).unwrap();
    let h = graph_transform_1d(shear, &HorizontalDisc1D::flat(qv, 0.5, 33), &qv, 0.5, 30)
        .map_err(|e| e.to_string())?;
    let l_shear = pairwise_lipschitz(&h.samples, 0.5f64.sqrt(), 1e-12)?;
    let cfg = ProofConfig::default();
    let chart = jordan_basis(&RtbpParams::from_decimal(HOMOCLINIC_MU).unwrap()).unwrap();
    let f = scaled_time_map(&chart, cfg.r_u, 0.5).map_err(|e| e.to_string())?;
    let qv = QuadForm::vertical(cfg.alpha_v, 1, 3).unwrap();
    let c = 1.0 - cfg.alpha_v;
    let h = graph_transform_1d(&f, &HorizontalDisc1D::flat(qv, c, 33), &qv, c, 10)
        .map_err(|e| e.to_string())?;
    let l_rtbp = pairwise_lipschitz(&h.samples, cfg.alpha_h.sqrt(), 1e-8)?;
    Ok(format!(
        "observed slopes: shear {l_shear:.4} ≤ √0.5, PCR3BP {l_rtbp:e} ≤ 1e-4"
    ))
}

fn rtbp_point() -> (RtbpParams, [f64; 4]) {
    (
        RtbpParams::from_decimal(HOMOCLINIC_MU).unwrap(),
        [0.8270258829, 0.0, 0.0, 0.9251225636],
    )
}

/// `φ_T(S φ_T(x)) = S x` along a validated arc.
pub fn s_reversal() -> Check {
    let (p, x0) = rtbp_point();
    let cfg = TaylorConfig::default();
    let t = 1.5;
    let fwd = integrate(&p, &FlowEnclosure::from_point(&x0), t, &cfg, |_| {})
        .map_err(|e| e.to_string())?;
    let s = symmetry_s(&State::from_vector(&fwd.hull())).to_vector();
    let back =
        integrate(&p, &FlowEnclosure::from_box(&s), t, &cfg, |_| {}).map_err(|e| e.to_string())?;
    let target = symmetry_s(&State::from_point(x0)).to_vector();
    let hull = back.hull();
    if !target.subset(&hull) {
        return Err(format!("S x0 = {target:?} not in {hull:?}"));
    }
    Ok(format!(
        "S x0 recovered, widths {:e} after the arc and {:e} after reversal",
        fwd.hull().max_width(),
        hull.max_width()
    ))
}

/// The Jacobi integral of every step enclosure contains its initial value.
pub fn jacobi_conservation() -> Check {
    let (p, x0) = rtbp_point();
    let c0 = jacobi(&State::from_point(x0), &p).map_err(|e| e.to_string())?;
    let mut steps = Vec::new();
    let end = integrate(
        &p,
        &FlowEnclosure::from_point(&x0),
        3.0,
        &TaylorConfig::default(),
        |r: &StepRecord| {
            steps.push(r.enclosure.clone());
        },
    )
    .map_err(|e| e.to_string())?;
    for (k, b) in steps.iter().enumerate() {
        let c = jacobi(&State::from_vector(b), &p).map_err(|e| e.to_string())?;
        if !c.overlaps(c0) {
            return Err(format!("step {k}: C = {c} misses {c0}"));
        }
    }
    let c_end = jacobi(&State::from_vector(&end.hull()), &p).map_err(|e| e.to_string())?;
    if !c_end.overlaps(c0) {
        return Err(format!("final C = {c_end} misses {c0}"));
    }
    Ok(format!(
        "{} steps, final C width {:e}",
        steps.len(),
        c_end.width()
    ))
}

/// Backward orbits in `{Q_h ≥ 0}` and forward orbits in `{Q_v ≤ 0}` of
/// certified toy maps obey `C(√m_v)^k` and `C(√m_h)^k`.
pub fn contraction_inequalities() -> Check {
    let (ah, av, mh, mv) = (0.5, 0.5, 0.3, 3.0);
    let c = contraction_constant(ah, av);
    let qh = QuadForm::horizontal(ah, 1, 1).unwrap();
    let qv = QuadForm::vertical(av, 1, 1).unwrap();
    type Map = fn(&[f64; 2]) -> [f64; 2];
    let maps: [(&str, IMatrix, Map, Map); 2] = [
        (
            "diagonal",
            IMatrix::diagonal(&[Interval::point(2.0), Interval::point(0.5)]),
            |p| [2.0 * p[0], 0.5 * p[1]],
            |p| [0.5 * p[0], 2.0 * p[1]],
        ),
        (
            "shear",
            IMatrix::from_rows(vec![
                vec![Interval::point(2.0), Interval::ZERO],
                vec![Interval::point(0.1), Interval::point(0.5)],
            ]),
            |p| [2.0 * p[0], 0.5 * p[1] + 0.1 * p[0]],
            |p| [0.5 * p[0], 2.0 * p[1] - 0.1 * p[0]],
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0usize;
    for (name, df, f, finv) in maps {
        if !map_cone_check(&df, &qv, mv).verified() || !map_cone_check(&df, &qh, mh).verified() {
            return Err(format!("{name}: cone conditions not certified"));
        }
        let inside = |p: &[f64; 2], q: &QuadForm, want_pos: bool| {
            let v = q.eval_f64(p);
            p[0].abs() <= 1.0 && p[1].abs() <= 1.0 && if want_pos { v >= 0.0 } else { v <= 0.0 }
        };
        for _ in 0..10_000 {
            let x: f64 = rng.random_range(-1.0..1.0);
            let y =
                x * ah.sqrt() * rng.random_range(-1.0..1.0) * 10f64.powi(-rng.random_range(0..12));
            let mut q = [x, y];
            for k in 0..40 {
                if !inside(&q, &qh, true) {
                    break;
                }
                checked += 1;
                let bound = c * mv.sqrt().powi(-k);
                if (q[0].hypot(q[1])) > bound {
                    return Err(format!("{name}: backward step {k} norm exceeds {bound}"));
                }
                q = finv(&q);
            }
            let s: f64 = rng.random_range(-1.0..1.0);
            let u =
                s * av.sqrt() * rng.random_range(-1.0..1.0) * 10f64.powi(-rng.random_range(0..12));
            let mut q = [u, s];
            for k in 0..40 {
                if !inside(&q, &qv, false) {
                    break;
                }
                checked += 1;
                let bound = c * mh.sqrt().powi(k);
                if q[0].hypot(q[1]) > bound {
                    return Err(format!("{name}: forward step {k} norm exceeds {bound}"));
                }
                q = f(&q);
            }
        }
    }
    debug_assert!(cone_membership(&IVector::zeros(2), 1, ah, av));
    Ok(format!("{checked} orbit points within C = {c}"))
}

pub fn cmp_f64(a: f64, b: &BigRational) -> Ordering {
    rat(a).cmp(b)
}
