//! Log-log SVG of a rate study.

use std::fmt::Write;

use emstable::harness::RateReport;

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 55.0;

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn px(&self, eta: f64) -> f64 {
        LEFT + (eta.log10() - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, d: f64) -> f64 {
        H - BOTTOM - (d.log10() - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

/// Points with CI bars, the fitted line, and a guide line of the
/// theoretical slope through the largest-η point.
pub fn rate_plot_svg(report: &RateReport) -> String {
    let pts: Vec<_> = report.results.iter().filter(|r| r.distance.value > 0.0).collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if pts.is_empty() {
        let _ = writeln!(svg, r#"<text x="{}" y="{}">no positive distances</text></svg>"#, W / 2.0, H / 2.0);
        return svg;
    }
    let lx: Vec<f64> = pts.iter().map(|r| r.eta.log10()).collect();
    let mut ly: Vec<f64> = pts
        .iter()
        .flat_map(|r| [r.distance.value, r.distance.lo, r.distance.hi])
        .filter(|v| *v > 0.0)
        .map(f64::log10)
        .collect();
    let fit_at = |eta: f64| (report.fit.intercept + report.fit.slope * eta.ln()).exp();
    let (eta_hi, eta_lo) = (pts[0].eta, pts[pts.len() - 1].eta);
    let guide_at = |eta: f64| pts[0].distance.value * (eta / eta_hi).powf(report.theoretical_rate);
    for e in [eta_hi, eta_lo] {
        ly.push(fit_at(e).log10());
        ly.push(guide_at(e).log10());
    }
    let span = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let pad = 0.08 * (hi - lo).max(0.2);
        (lo - pad, hi + pad)
    };
    let ax = Axes { x: span(&lx), y: span(&ly) };

    // frame and decade ticks
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    for k in (ax.x.0.ceil() as i32)..=(ax.x.1.floor() as i32) {
        let x = ax.px(10f64.powi(k));
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{}" stroke="black"/><text x="{x:.1}" y="{}" text-anchor="middle">1e{k}</text>"#,
            H - BOTTOM,
            H - BOTTOM + 5.0,
            H - BOTTOM + 18.0
        );
    }
    for k in (ax.y.0.ceil() as i32)..=(ax.y.1.floor() as i32) {
        let y = ax.py(10f64.powi(k));
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y:.1}" x2="{LEFT}" y2="{y:.1}" stroke="black"/><text x="{}" y="{:.1}" text-anchor="end">1e{k}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">step size η</text>"#, (LEFT + W - RIGHT) / 2.0, H - 12.0);
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">distance</text>"#,
        (TOP + H - BOTTOM) / 2.0
    );

    let line = |svg: &mut String, f: &dyn Fn(f64) -> f64, style: &str| {
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" {style}/>"#,
            ax.px(eta_hi),
            ax.py(f(eta_hi)),
            ax.px(eta_lo),
            ax.py(f(eta_lo))
        );
    };
    line(&mut svg, &fit_at, r#"stroke="steelblue" stroke-width="2""#);
    line(&mut svg, &guide_at, r#"stroke="gray" stroke-dasharray="6 4""#);

    for r in &pts {
        let x = ax.px(r.eta);
        if r.distance.lo > 0.0 && r.distance.hi > r.distance.lo {
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#,
                ax.py(r.distance.lo),
                ax.py(r.distance.hi)
            );
        }
        let _ = writeln!(svg, r#"<circle cx="{x:.1}" cy="{:.1}" r="3.5" fill="crimson"/>"#, ax.py(r.distance.value));
    }

    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}">{} (α = {}), {}: slope {:.3} ± {:.3}, guide slope {:.3}, {:?}</text>"#,
        LEFT,
        TOP - 10.0,
        report.model,
        report.alpha,
        report.cost.label(),
        report.fit.slope,
        report.fit.se,
        report.theoretical_rate,
        report.verdict
    );
    svg.push_str("</svg>\n");
    svg
}
