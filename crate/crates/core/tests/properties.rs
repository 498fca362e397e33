//! Invariants checked with proptest and small fixed suites.

mod common;

use proptest::prelude::*;

use common::{exp_bounds, rat, rat_in, trig_bounds, HOMOCLINIC_MU};
use conecert::cones::QuadForm;
use conecert::flow::{integrate, AffineField, FloatFlow, FlowEnclosure, TaylorConfig};
use conecert::manifold::{phi_coords, phi_inverse};
use conecert::prover::{fragment_crossing, symmetry_section, ProofConfig};
use conecert::rtbp::{jordan_basis, RtbpParams};
use conecert::{IBox, IVector, Interval};

fn iv() -> impl Strategy<Value = Interval> {
    (-1e6f64..1e6, 0f64..1e3).prop_map(|(a, w)| Interval::new(a, a + w))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn arithmetic_contains_exact_results(a in iv(), b in iv(), s in 0f64..1.0, t in 0f64..1.0) {
        let x = (a.lo() + s * a.width()).clamp(a.lo(), a.hi());
        let y = (b.lo() + t * b.width()).clamp(b.lo(), b.hi());
        let (rx, ry) = (rat(x), rat(y));
        prop_assert!(rat_in(&(&rx + &ry), a + b));
        prop_assert!(rat_in(&(&rx - &ry), a - b));
        prop_assert!(rat_in(&(&rx * &ry), a * b));
        if y != 0.0 {
            prop_assert!(rat_in(&(&rx / &ry), a / b));
        }
    }

    #[test]
    fn hull_and_intersection_are_consistent(a in iv(), b in iv()) {
        let h = a.hull(b);
        prop_assert!(a.subset(h) && b.subset(h));
        match a.intersect(b) {
            Some(i) => prop_assert!(i.subset(a) && i.subset(b) && a.overlaps(b)),
            None => prop_assert!(!a.overlaps(b)),
        }
    }

    #[test]
    fn quadratic_form_interval_contains_float(
        alpha in 0.01f64..10.0,
        beta in 0.01f64..10.0,
        p in prop::collection::vec(-5f64..5.0, 4),
    ) {
        let q = QuadForm::new(alpha, beta, 1, 3).unwrap();
        prop_assert!(q.eval(&IVector::from_point(&p)).contains(q.eval_f64(&p)));
    }

    #[test]
    fn graph_coordinates_round_trip(
        u in -3f64..3.0,
        s in prop::collection::vec(-1f64..1.0, 2),
        c in 0.1f64..2.0,
    ) {
        let q = QuadForm::vertical(0.3, 1, 2).unwrap();
        let back = phi_inverse(&phi_coords(&[u], &s, &q, c), &q, c);
        prop_assert!((back[0] - u).abs() <= 1e-12 * (1.0 + u.abs()));
        prop_assert_eq!(&back[1..], &s[..]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn validated_flow_contains_float_orbits(
        dx in prop::collection::vec(-1f64..1.0, 4),
        t in 0.1f64..2.0,
    ) {
        let p = RtbpParams::from_decimal(HOMOCLINIC_MU).unwrap();
        let centre = [0.8270258829, 0.0, 0.0, 0.9251225636];
        let r = 1e-9;
        let b: IBox = centre.iter().map(|&c| Interval::centered(c, r)).collect();
        let e = integrate(&p, &FlowEnclosure::from_box(&b), t, &TaylorConfig::default(), |_| {}).unwrap();
        let x0: Vec<f64> = centre.iter().zip(&dx).map(|(c, d)| c + 0.99 * r * d).collect();
        let y = FloatFlow::default().flow(&RtbpParams::point(p.mu().mid()).unwrap(), &x0, t).unwrap();
        let hull = e.hull().map(|v| v.inflate(1e-13));
        prop_assert!(hull.contains_point(&y), "{y:?} outside {hull:?}");
    }
}

#[test]
fn oracles_reject_wrong_values() {
    let (lo, hi) = exp_bounds(&rat(1.0));
    assert!(
        !rat_in(&lo, Interval::point(std::f64::consts::E))
            || !rat_in(&hi, Interval::point(std::f64::consts::E))
    );
    assert!(rat(std::f64::consts::E) < hi && rat(2.7182818284590455) > lo);
    let (lo, hi) = trig_bounds(&rat(std::f64::consts::PI), true);
    assert!(lo > rat(1.2246467991473e-16) && hi < rat(1.2246467991474e-16));
    let (lo, hi) = trig_bounds(&rat(0.0), false);
    assert!(lo <= rat(1.0) && rat(1.0) <= hi && hi - lo < rat(1e-70));
}

#[test]
fn harmonic_enclosure_matches_rotation() {
    let e = integrate(
        &AffineField::harmonic(),
        &FlowEnclosure::from_point(&[1.0, 0.0]),
        10.0,
        &TaylorConfig::default(),
        |_| {},
    )
    .unwrap();
    let y = FloatFlow::default()
        .flow(&AffineField::harmonic(), &[1.0, 0.0], 10.0)
        .unwrap();
    let hull = e.hull();
    assert!(hull.map(|v| v.inflate(1e-13)).contains_point(&y));
    assert!(hull.max_width() < 1e-12, "width {}", hull.max_width());
    assert!(((y[0] * y[0] + y[1] * y[1]) - 1.0).abs() < 1e-13);
}

#[test]
fn fragment_image_contains_float_crossings() {
    let cfg = ProofConfig::default();
    let (left, right) = cfg.validate().unwrap();
    let frag = left.hull(right).subdivide(cfg.fragments)[0];
    let crossing = fragment_crossing(frag, &cfg).unwrap();
    let a = (1.0 - cfg.alpha_v).sqrt() * cfg.r_u;
    let s = 0.5 * cfg.alpha_h.sqrt() * cfg.r_u;
    for mu in [frag.lo(), frag.mid(), frag.hi()] {
        let p = RtbpParams::point(mu).unwrap();
        let chart = jordan_basis(&p).unwrap();
        for q in [[a, 0.0, 0.0, 0.0], [a, s, -s, s], [a, -s, s, -s]] {
            let x = chart.phi_f64(&q);
            let (t, y) = FloatFlow::default()
                .crossing(&p, &x, &symmetry_section(), cfg.section_time_max)
                .unwrap()
                .expect("float orbit reaches the section");
            assert!(
                crossing.time.inflate(1e-9).contains(t),
                "t = {t} outside {}",
                crossing.time
            );
            let img = crossing.image_box.map(|v| v.inflate(1e-12));
            assert!(img.contains_point(&y[..4]), "{y:?} outside {img:?}");
        }
    }
}
