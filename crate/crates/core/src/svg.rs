//! Self-contained SVG line chart for mode curves: fixed 800x500 viewport,
//! linear axes auto-scaled to the data hull with a 5% margin, ticks at round
//! numbers. Simulated curves draw in red, oracle curves in blue; in two
//! dimensions the second coordinate uses a dashed stroke.

use crate::mppp::MpppCurve;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 500.0;

const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 32.0;
const MARGIN_BOTTOM: f64 = 48.0;

const SIMULATED_COLOR: &str = "#d62728";
const ORACLE_COLOR: &str = "#1f77b4";

/// Round tick positions covering `[lo, hi]`: multiples of a step chosen from
/// {1, 2, 5} x 10^k, aiming at `target` intervals.
pub fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = hi - lo;
    // A degenerate or NaN span gets a single tick at the low end.
    let usable = span > 0.0 && target > 0;
    if !usable {
        return vec![lo];
    }
    let step = nice_step(span / target as f64);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn nice_step(raw: f64) -> f64 {
    let base = 10f64.powf(raw.log10().floor());
    for mult in [1.0, 2.0, 5.0] {
        if mult * base >= raw {
            return mult * base;
        }
    }
    10.0 * base
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let v = if v == 0.0 { 0.0 } else { v }; // avoid "-0"
    format!("{v:.decimals$}")
}

fn esc(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn from_hull(x: (f64, f64), y: (f64, f64)) -> Frame {
        let pad = |(lo, hi): (f64, f64)| {
            let span = hi - lo;
            if span > 0.0 {
                (lo - 0.05 * span, hi + 0.05 * span)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        let (x_lo, x_hi) = pad(x);
        let (y_lo, y_hi) = pad(y);
        Frame {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
        }
    }

    fn px(&self, t: f64) -> f64 {
        MARGIN_LEFT
            + (t - self.x_lo) / (self.x_hi - self.x_lo) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT
            - MARGIN_BOTTOM
            - (v - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn polyline(
    out: &mut String,
    frame: &Frame,
    times: &[f64],
    series: impl Iterator<Item = f64>,
    color: &str,
    dashed: bool,
) {
    out.push_str("<polyline fill=\"none\" stroke=\"");
    out.push_str(color);
    out.push_str("\" stroke-width=\"1.8\"");
    if dashed {
        out.push_str(" stroke-dasharray=\"6 3\"");
    }
    out.push_str(" points=\"");
    for (&t, v) in times.iter().zip(series) {
        out.push_str(&format!("{:.2},{:.2} ", frame.px(t), frame.py(v)));
    }
    if out.ends_with(' ') {
        out.pop();
    }
    out.push_str("\"/>\n");
}

/// Renders the chart. `oracle_curve` uses the curve's slice-major layout.
pub fn render_mppp_svg(curve: &MpppCurve, oracle_curve: Option<&[f64]>, title: &str) -> String {
    let d = curve.dim();
    let times = curve.times();
    let x_hull = (times[0], times[times.len() - 1]);
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    let mut scan = |vals: &[f64]| {
        for &v in vals {
            if v.is_finite() {
                y_min = y_min.min(v);
                y_max = y_max.max(v);
            }
        }
    };
    scan(curve.modes_flat());
    if let Some(o) = oracle_curve {
        scan(o);
    }
    if !y_min.is_finite() {
        y_min = 0.0;
        y_max = 1.0;
    }
    let frame = Frame::from_hull(x_hull, (y_min, y_max));

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // Gridlines and tick labels.
    let x_step = nice_step((frame.x_hi - frame.x_lo) / 6.0);
    let y_step = nice_step((frame.y_hi - frame.y_lo) / 6.0);
    for tick in nice_ticks(frame.x_lo, frame.x_hi, 6) {
        let px = frame.px(tick);
        s.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{}\" x2=\"{px:.2}\" y2=\"{}\" stroke=\"#dddddd\"/>\n",
            MARGIN_TOP,
            HEIGHT - MARGIN_BOTTOM
        ));
        s.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" \
             fill=\"#333333\">{}</text>\n",
            HEIGHT - MARGIN_BOTTOM + 18.0,
            tick_label(tick, x_step)
        ));
    }
    for tick in nice_ticks(frame.y_lo, frame.y_hi, 6) {
        let py = frame.py(tick);
        s.push_str(&format!(
            "<line x1=\"{}\" y1=\"{py:.2}\" x2=\"{}\" y2=\"{py:.2}\" stroke=\"#dddddd\"/>\n",
            MARGIN_LEFT,
            WIDTH - MARGIN_RIGHT
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\" \
             fill=\"#333333\">{}</text>\n",
            MARGIN_LEFT - 8.0,
            py + 4.0,
            tick_label(tick, y_step)
        ));
    }

    // Axes box.
    s.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333333\"/>\n",
        MARGIN_LEFT,
        MARGIN_TOP,
        WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    ));

    // Series: oracle underneath, simulated on top.
    if let Some(o) = oracle_curve {
        for c in 0..d {
            polyline(
                &mut s,
                &frame,
                times,
                (0..times.len()).map(|j| o[j * d + c]),
                ORACLE_COLOR,
                c == 1,
            );
        }
    }
    for c in 0..d {
        polyline(
            &mut s,
            &frame,
            times,
            (0..times.len()).map(|j| curve.mode_at(j)[c]),
            SIMULATED_COLOR,
            c == 1,
        );
    }

    // Title and legend.
    s.push_str(&format!(
        "<text x=\"{}\" y=\"20\" font-size=\"14\" fill=\"#111111\">{}</text>\n",
        MARGIN_LEFT,
        esc(title)
    ));
    let coord = |c: usize| if c == 0 { "x" } else { "y" };
    let mut legend_x = WIDTH - MARGIN_RIGHT - 150.0;
    let mut item = |label: String, color: &str, dashed: bool| {
        s.push_str(&format!(
            "<line x1=\"{legend_x:.2}\" y1=\"16\" x2=\"{:.2}\" y2=\"16\" stroke=\"{color}\" \
             stroke-width=\"1.8\"{}/>\n",
            legend_x + 22.0,
            if dashed {
                " stroke-dasharray=\"6 3\""
            } else {
                ""
            }
        ));
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"20\" font-size=\"12\" fill=\"#333333\">{}</text>\n",
            legend_x + 28.0,
            esc(&label)
        ));
        legend_x += 75.0;
    };
    for c in 0..d {
        item(format!("mode {}", coord(c)), SIMULATED_COLOR, c == 1);
    }
    if oracle_curve.is_some() {
        legend_x = WIDTH - MARGIN_RIGHT - 150.0;
        let mut oracle_y_items = String::new();
        for c in 0..d {
            oracle_y_items.push_str(&format!(
                "<line x1=\"{legend_x:.2}\" y1=\"34\" x2=\"{:.2}\" y2=\"34\" \
                 stroke=\"{ORACLE_COLOR}\" stroke-width=\"1.8\"{}/>\n\
                 <text x=\"{:.2}\" y=\"38\" font-size=\"12\" fill=\"#333333\">oracle {}</text>\n",
                legend_x + 22.0,
                if c == 1 {
                    " stroke-dasharray=\"6 3\""
                } else {
                    ""
                },
                legend_x + 28.0,
                coord(c)
            ));
            legend_x += 75.0;
        }
        s.push_str(&oracle_y_items);
    }

    // Axis names.
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" \
         fill=\"#111111\">t</text>\n",
        MARGIN_LEFT + (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / 2.0,
        HEIGHT - 10.0
    ));
    s.push_str("</svg>\n");
    s
}
