//! CSV and SVG outputs.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use anyhow::Context;

use conecert::flow::{poincare_crossing, EnclosureCsv, FloatFlow, StepRecord};
use conecert::prover::{manifold_stage, symmetry_section, EndpointReport, ProofConfig};
use conecert::rtbp::{jordan_basis, symmetry_s, RtbpParams, State};
use conecert::IBox;

/// One `(t, X, Y, P_X, P_Y)` sample of the floating-point orbit.
pub type OrbitPoint = (f64, [f64; 4]);

fn box_rows(out: &mut String, label: &str, coords: &str, b: &IBox) {
    for (i, x) in b.iter().enumerate() {
        let _ = writeln!(out, "{label},{coords},{i},{},{}", x.lo(), x.hi());
    }
}

/// `U` in local and original coordinates for each endpoint.
pub fn u_boxes_csv(reports: &[&EndpointReport]) -> String {
    let mut out = String::from("label,coordinates,index,lo,hi\n");
    for e in reports {
        box_rows(&mut out, &e.label, "local", &e.u_local);
        box_rows(&mut out, &e.label, "original", &e.u_original);
    }
    out
}

pub fn window_csv(label: &str, b: &IBox) -> String {
    let mut out = String::from("label,coordinates,index,lo,hi\n");
    box_rows(&mut out, label, "local", b);
    out
}

/// Streams the validated step enclosures from `U_{μ_left}` to the section.
pub fn write_enclosures(path: &Path, cfg: &ProofConfig) -> anyhow::Result<()> {
    let (left, _) = cfg.validate()?;
    let (_, u) = manifold_stage("left", left, cfg, &mut Vec::new())?;
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut csv = EnclosureCsv::new(BufWriter::new(file));
    let mut io_err = None;
    poincare_crossing(
        &RtbpParams::new(left)?,
        &u,
        &symmetry_section(),
        cfg.section_time_max,
        &cfg.integrator,
        |r: &StepRecord| {
            if io_err.is_none() {
                io_err = csv.record(r).err();
            }
        },
    )?;
    if let Some(e) = io_err {
        return Err(e).context("writing enclosures");
    }
    csv.into_inner().flush()?;
    Ok(())
}

/// The homoclinic orbit at the middle of the parameter interval: the
/// unstable branch up to `{Y = 0}`, completed by the reversing symmetry.
pub fn float_orbit(cfg: &ProofConfig) -> anyhow::Result<Vec<OrbitPoint>> {
    let (left, right) = cfg.validate()?;
    let mu = 0.5 * (left.mid() + right.mid());
    let p = RtbpParams::point(mu)?;
    let chart = jordan_basis(&p)?;
    let start = chart.phi_f64(&[cfg.r_u, 0.0, 0.0, 0.0]);
    let flow = FloatFlow::default();
    let Some((t_cross, _)) =
        flow.crossing(&p, &start, &symmetry_section(), cfg.section_time_max)?
    else {
        anyhow::bail!("the floating-point orbit does not reach the section");
    };
    let half = flow.trajectory(&p, &start, t_cross)?;
    let mut orbit: Vec<OrbitPoint> = half
        .iter()
        .map(|(t, x)| (*t, [x[0], x[1], x[2], x[3]]))
        .collect();
    for (t, x) in half.iter().rev().skip(1) {
        let s = symmetry_s(&State::from_point([x[0], x[1], x[2], x[3]])).to_vector();
        orbit.push((
            2.0 * t_cross - t,
            [s[0].mid(), s[1].mid(), s[2].mid(), s[3].mid()],
        ));
    }
    Ok(orbit)
}

/// Columns `t,X,Y,Xdot,Ydot`, with `Ẋ = P_X + Y` and `Ẏ = P_Y − X`.
pub fn orbit_csv(orbit: &[OrbitPoint]) -> String {
    let mut out = String::from("t,X,Y,Xdot,Ydot\n");
    for (t, [x, y, px, py]) in orbit {
        let _ = writeln!(out, "{t},{x},{y},{},{}", px + y, py - x);
    }
    out
}

/// A plot of the orbit in the `(X, Y)` plane with L1 and the planet marked.
pub fn orbit_svg(orbit: &[OrbitPoint], cfg: &ProofConfig) -> anyhow::Result<String> {
    let (left, right) = cfg.validate()?;
    let mu = 0.5 * (left.mid() + right.mid());
    let l1 = jordan_basis(&RtbpParams::point(mu)?)?.l1[0].mid();
    let planet = mu - 1.0;
    let (mut x0, mut x1, mut y0, mut y1) = (l1.min(planet), l1.max(planet), 0.0_f64, 0.0_f64);
    for (_, [x, y, _, _]) in orbit {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    let pad = 0.05 * (x1 - x0).max(y1 - y0);
    let (x0, x1, y0, y1) = (x0 - pad, x1 + pad, y0 - pad, y1 + pad);
    let (w, h) = (800.0, 800.0 * (y1 - y0) / (x1 - x0));
    let sx = |x: f64| (x - x0) / (x1 - x0) * w;
    let sy = |y: f64| (y1 - y) / (y1 - y0) * h;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{:.0}" viewBox="0 0 {w:.0} {:.0}">"#,
        h + 30.0,
        h + 30.0
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="10" y="{:.0}" font-family="sans-serif" font-size="14">non-rigorous floating-point trajectory, mu = {mu}</text>"#,
        h + 20.0
    );
    let mut pts = String::new();
    for (_, [x, y, _, _]) in orbit {
        let _ = write!(pts, "{:.2},{:.2} ", sx(*x), sy(*y));
    }
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="green" stroke-width="1.5"/>"#,
        pts.trim_end()
    );
    for (x, label, colour) in [(l1, "L1", "black"), (planet, "planet", "blue")] {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{colour}"/><text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{label}</text>"#,
            sx(x),
            sy(0.0),
            sx(x) + 6.0,
            sy(0.0) - 6.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
