use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::signal::{PoseSequence, ANGLE_NAMES};

const WIDTH: f64 = 900.0;
const PANEL_HEIGHT: f64 = 200.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const GAP: f64 = 50.0;

fn nice_ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-9);
    let raw = span / count as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

/// Three stacked panels (roll, pitch, yaw) with ground truth and prediction
/// over their common time span. Both sequences are taken to start at 0 s.
pub fn render_svg(pred: &PoseSequence, truth: &PoseSequence) -> Result<String> {
    let span = (pred.len() as f64 / pred.rate()).min(truth.len() as f64 / truth.rate());
    let visible = |p: &PoseSequence| (0..p.len()).filter(|&i| (i as f64) / p.rate() <= span).count();
    if visible(pred) < 2 || visible(truth) < 2 {
        return Err(Error::Input(
            "prediction and ground truth do not overlap in time".into(),
        ));
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let height = MARGIN_TOP + 3.0 * (PANEL_HEIGHT + GAP);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r##"<g class="legend"><line x1="{x0}" y1="14" x2="{x1}" y2="14" stroke="#222" stroke-width="2"/><text x="{t0}" y="18">ground truth</text><line x1="{x2}" y1="14" x2="{x3}" y2="14" stroke="#d62728" stroke-width="2"/><text x="{t1}" y="18">prediction</text></g>"##,
        x0 = MARGIN_LEFT,
        x1 = MARGIN_LEFT + 30.0,
        t0 = MARGIN_LEFT + 36.0,
        x2 = MARGIN_LEFT + 140.0,
        x3 = MARGIN_LEFT + 170.0,
        t1 = MARGIN_LEFT + 176.0
    );

    for (ch, name) in ANGLE_NAMES.iter().enumerate() {
        let top = MARGIN_TOP + ch as f64 * (PANEL_HEIGHT + GAP);
        let values = |p: &PoseSequence| -> Vec<(f64, f64)> {
            (0..visible(p))
                .map(|i| (i as f64 / p.rate(), f64::from(p.angles().get(i, ch))))
                .collect()
        };
        let (tv, pv) = (values(truth), values(pred));
        let (mut lo, mut hi) = tv
            .iter()
            .chain(&pv)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(_, v)| {
                (a.min(v), b.max(v))
            });
        if hi - lo < 1e-6 {
            lo -= 1.0;
            hi += 1.0;
        }
        let pad = 0.05 * (hi - lo);
        let (lo, hi) = (lo - pad, hi + pad);
        let x = |t: f64| MARGIN_LEFT + plot_w * t / span;
        let y = |v: f64| top + PANEL_HEIGHT * (hi - v) / (hi - lo);

        let _ = writeln!(svg, r#"<g class="panel" id="{name}">"#);
        let _ = writeln!(
            svg,
            r##"<rect x="{MARGIN_LEFT}" y="{top}" width="{plot_w}" height="{PANEL_HEIGHT}" fill="none" stroke="#888"/>"##
        );
        for v in nice_ticks(lo, hi, 4) {
            let _ = writeln!(
                svg,
                r##"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
                MARGIN_LEFT - 6.0,
                y(v) + 4.0,
                v
            );
        }
        for t in nice_ticks(0.0, span, 8) {
            let _ = writeln!(
                svg,
                r##"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
                x(t),
                top + PANEL_HEIGHT + 16.0,
                t
            );
        }
        let _ = writeln!(
            svg,
            r##"<text class="ylabel" transform="translate(18,{:.1}) rotate(-90)" text-anchor="middle">{name} (degrees)</text>"##,
            top + PANEL_HEIGHT / 2.0
        );
        let _ = writeln!(
            svg,
            r##"<text class="xlabel" x="{:.1}" y="{:.1}" text-anchor="middle">time (seconds)</text>"##,
            MARGIN_LEFT + plot_w / 2.0,
            top + PANEL_HEIGHT + 34.0
        );
        for (class, colour, pts) in [("truth", "#222", &tv), ("prediction", "#d62728", &pv)] {
            let coords: Vec<String> = pts.iter().map(|&(t, v)| format!("{:.2},{:.2}", x(t), y(v))).collect();
            let _ = writeln!(
                svg,
                r##"<polyline class="{class}" fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"##,
                coords.join(" ")
            );
        }
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
