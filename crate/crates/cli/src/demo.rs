//! Small worked examples, each printed as a pass/fail line.

use conecert::cones::{map_cone_check, QuadForm};
use conecert::flow::{gronwall_bounds, AffineField, FloatFlow, VectorFieldBounds};
use conecert::manifold::{certify, graph_transform_1d, HorizontalDisc1D, ManifoldKind};
use conecert::prover::{scaled_time_map, ProofConfig};
use conecert::rtbp::{jordan_basis, RtbpParams};
use conecert::{IMatrix, IVector, Interval};

use crate::{DemoName, Status};

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name,
        passed,
        detail: detail.into(),
    }
}

pub fn run(name: DemoName) -> Status {
    let checks = match name {
        DemoName::Toymap => toymap(),
        DemoName::Graphtransform => graphtransform(),
        DemoName::Gronwall => gronwall(),
    };
    for c in &checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("{tag} {}: {}", c.name, c.detail);
    }
    if checks.iter().all(|c| c.passed) {
        Status::Verified
    } else {
        Status::Failed
    }
}

fn diag(a: f64, b: f64) -> IMatrix {
    IMatrix::diagonal(&[Interval::point(a), Interval::point(b)])
}

fn toymap() -> Vec<Check> {
    let qh = QuadForm::horizontal(0.5, 1, 1).expect("valid form");
    let qv = QuadForm::vertical(0.5, 1, 1).expect("valid form");
    let f = diag(2.0, 0.5);
    let m1 = map_cone_check(&f, &qh, 1.0);
    let m5 = map_cone_check(&f, &qh, 5.0);
    let perturbed = IMatrix::from_rows(vec![
        vec![Interval::new(1.9, 2.1), Interval::new(-0.01, 0.01)],
        vec![Interval::new(-0.01, 0.01), Interval::new(0.45, 0.55)],
    ]);
    let mp = map_cone_check(&perturbed, &qv, 1.0);
    let cert = certify(
        ManifoldKind::MapUnstable,
        &map_cone_check(&f, &qh, 0.3),
        &map_cone_check(&f, &qv, 3.0),
        0.5,
        0.5,
        &IVector::zeros(2),
    );
    vec![
        check(
            "(2x, y/2) with m = 1",
            m1.verified(),
            format!("margin {:e}", m1.verdict.margin),
        ),
        check(
            "(2x, y/2) with m = 5 is rejected",
            !m5.verified(),
            "m exceeds a² = 4",
        ),
        check(
            "perturbed map with m = 1",
            mp.verified(),
            format!("margin {:e}", mp.verdict.margin),
        ),
        check(
            "unstable manifold certificate (m_h = 0.3, m_v = 3)",
            cert.is_ok(),
            match &cert {
                Ok(c) => format!("Lipschitz bound {}", c.lipschitz),
                Err(e) => e.to_string(),
            },
        ),
    ]
}

fn graphtransform() -> Vec<Check> {
    let qv = QuadForm::vertical(0.5, 1, 1).expect("valid form");
    let c = 0.5;
    let flat = HorizontalDisc1D::flat(qv, c, 17);
    let diag_map = |p: &[f64]| vec![2.0 * p[0], 0.5 * p[1]];
    let axis = graph_transform_1d(diag_map, &flat, &qv, c, 5).map(|h| {
        h.samples
            .iter()
            .map(|(_, p)| p[1].abs())
            .fold(0.0, f64::max)
    });
    let shear = |p: &[f64]| vec![2.0 * p[0], 0.5 * p[1] + 0.1 * p[0]];
    let line = graph_transform_1d(shear, &flat, &qv, c, 40).map(|h| {
        h.samples
            .iter()
            .map(|(_, p)| (p[1] - p[0] / 15.0).abs())
            .fold(0.0, f64::max)
    });
    let mut out = vec![
        match axis {
            Ok(e) => check(
                "(2x, y/2) keeps the flat disc",
                e == 0.0,
                format!("sup |y| = {e:e}"),
            ),
            Err(e) => check("(2x, y/2) keeps the flat disc", false, e.to_string()),
        },
        match line {
            Ok(e) => check(
                "shear map converges to y = x/15",
                e <= 1e-10,
                format!("sup error {e:e}"),
            ),
            Err(e) => check("shear map converges to y = x/15", false, e.to_string()),
        },
    ];
    out.push(pcr3bp_disc());
    out
}

fn pcr3bp_disc() -> Check {
    const NAME: &str = "PCR3BP time-1/2 map, 10 iterates inside the window";
    let cfg = ProofConfig::default();
    let run = || -> conecert::Result<(f64, f64)> {
        let chart = jordan_basis(&RtbpParams::from_decimal("0.004253863522")?)?;
        let f = scaled_time_map(&chart, cfg.r_u, 0.5)?;
        let qv = QuadForm::vertical(cfg.alpha_v, 1, 3)?;
        let c = 1.0 - cfg.alpha_v;
        let h = graph_transform_1d(&f, &HorizontalDisc1D::flat(qv, c, 33), &qv, c, 10)?;
        let u = h
            .samples
            .iter()
            .map(|(_, p)| p[0].abs())
            .fold(0.0, f64::max);
        let s = h
            .samples
            .iter()
            .map(|(_, p)| p[1..].iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        Ok((u, s))
    };
    match run() {
        Ok((u, s)) => {
            let r = (1.0 - cfg.alpha_v).sqrt();
            check(
                NAME,
                u <= r * (1.0 + 1e-9) && s <= cfg.alpha_h.sqrt() * u,
                format!("sup |u| = {u}, sup |s| = {s:e}"),
            )
        }
        Err(e) => check(NAME, false, e.to_string()),
    }
}

fn gronwall() -> Vec<Check> {
    let b = VectorFieldBounds::new(5.0, 1.0, 0.0).expect("valid bounds");
    let zero = gronwall_bounds(&b, 0.0, 1.0);
    let (p1, p2) = (0.7, 0.2);
    let flow = FloatFlow::default();
    let line = AffineField::diagonal(&[1.0]);
    let g1 = gronwall_bounds(&b, 1.0, p1 - p2).0;
    let actual = match (flow.flow(&line, &[p1], 1.0), flow.flow(&line, &[p2], 1.0)) {
        (Ok(a), Ok(c)) => ((a[0] - p1) - (c[0] - p2)).abs(),
        _ => f64::NAN,
    };
    let l = 2.0;
    let b2 = VectorFieldBounds::new(0.0, l, 0.0).expect("valid bounds");
    let g2 = gronwall_bounds(&b2, 0.5, 3.0).1;
    let expect = l * ((l * 0.5).exp() - 1.0) * 3.0;
    vec![
        check(
            "t = 0 gives (0, 0)",
            zero == (0.0, 0.0),
            format!("{zero:?}"),
        ),
        check(
            "x' = x attains g1 at t = 1",
            g1 >= actual && g1 - actual <= 1e-12,
            format!("g1 = {g1}, flow difference = {actual}"),
        ),
        check(
            "mu = M = 0 reduces g2 to L(e^(Lt) - 1) dist",
            (g2 - expect).abs() <= 1e-12 * expect,
            format!("g2 = {g2}, formula = {expect}"),
        ),
    ]
}
