//! A minimal deterministic SVG scatter/line plotter.
//!
//! No external renderer: the output is a self-contained `<svg>` element with
//! axes, ticks, optional per-series polylines and circle markers, and a
//! legend for small series counts. Identical inputs produce identical bytes.

/// One plotted series.
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Connect the points with a polyline.
    pub line: bool,
    /// Draw a circle at each point.
    pub markers: bool,
}

/// A titled scatter/line plot.
#[derive(Debug, Clone)]
pub struct SvgPlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 44.0;
const MARGIN_BOTTOM: f64 = 56.0;
const N_TICKS: usize = 5;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
];
const MAX_LEGEND_SERIES: usize = 8;

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Tick label: plain fixed-point in a friendly range, scientific outside it.
fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(0.001..10_000.0).contains(&a) {
        return format!("{v:.2e}");
    }
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Data range padded by 5%, widened to unit width when degenerate.
fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Render the plot to a standalone SVG string.
pub fn render_plot(plot: &SvgPlot) -> String {
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &plot.series {
        for &(x, y) in &s.points {
            if x.is_finite() && y.is_finite() {
                x_lo = x_lo.min(x);
                x_hi = x_hi.max(x);
                y_lo = y_lo.min(y);
                y_hi = y_hi.max(y);
            }
        }
    }
    let (x_lo, x_hi) = padded_range(x_lo, x_hi);
    let (y_lo, y_hi) = padded_range(y_lo, y_hi);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = move |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = move |y: f64| MARGIN_TOP + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h;

    let mut out = String::with_capacity(4096);
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    out.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        escape_xml(&plot.title)
    ));

    // Axes.
    let (x0, y0) = (MARGIN_LEFT, MARGIN_TOP + plot_h);
    out.push_str(&format!(
        "<line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{:.1}\" y2=\"{y0:.1}\" stroke=\"black\"/>\n",
        MARGIN_LEFT + plot_w
    ));
    out.push_str(&format!(
        "<line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{x0:.1}\" y2=\"{MARGIN_TOP:.1}\" stroke=\"black\"/>\n"
    ));

    // Ticks and grid.
    for k in 0..N_TICKS {
        let t = k as f64 / (N_TICKS - 1) as f64;
        let xv = x_lo + t * (x_hi - x_lo);
        let yv = y_lo + t * (y_hi - y_lo);
        let (px, py) = (sx(xv), sy(yv));
        out.push_str(&format!(
            "<line x1=\"{px:.1}\" y1=\"{y0:.1}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
            y0 + 5.0
        ));
        out.push_str(&format!(
            "<text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            y0 + 20.0,
            tick_label(xv)
        ));
        out.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{py:.1}\" x2=\"{x0:.1}\" y2=\"{py:.1}\" stroke=\"black\"/>\n",
            x0 - 5.0
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            x0 - 8.0,
            py + 4.0,
            tick_label(yv)
        ));
    }

    // Axis labels.
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape_xml(&plot.x_label)
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape_xml(&plot.y_label)
    ));

    // Series.
    for (i, s) in plot.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if s.line && s.points.len() > 1 {
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                pts.join(" ")
            ));
        }
        if s.markers {
            for &(x, y) in &s.points {
                if x.is_finite() && y.is_finite() {
                    out.push_str(&format!(
                        "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                        sx(x),
                        sy(y)
                    ));
                }
            }
        }
    }

    // Legend for small series counts.
    if plot.series.len() > 1 && plot.series.len() <= MAX_LEGEND_SERIES {
        for (i, s) in plot.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let ly = MARGIN_TOP + 14.0 + 16.0 * i as f64;
            let lx = MARGIN_LEFT + plot_w - 150.0;
            out.push_str(&format!(
                "<line x1=\"{lx:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
                lx + 18.0
            ));
            out.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\">{}</text>\n",
                lx + 24.0,
                ly + 4.0,
                escape_xml(&s.name)
            ));
        }
    }

    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_plot() -> SvgPlot {
        SvgPlot {
            title: "demo <plot> & friends".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![
                Series {
                    name: "points".into(),
                    points: vec![(0.0, 1.0), (1.0, 3.0), (2.0, 2.0)],
                    line: false,
                    markers: true,
                },
                Series {
                    name: "line".into(),
                    points: vec![(0.0, 0.5), (2.0, 2.5)],
                    line: true,
                    markers: false,
                },
            ],
        }
    }

    #[test]
    fn render_is_deterministic_and_well_formed() {
        let a = render_plot(&demo_plot());
        let b = render_plot(&demo_plot());
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.ends_with("</svg>\n"));
        assert_eq!(a.matches("<circle").count(), 3);
        assert_eq!(a.matches("<polyline").count(), 1);
        assert!(a.contains("&lt;plot&gt; &amp; friends"), "labels escape XML");
        assert!(!a.contains("NaN"));
    }

    #[test]
    fn markers_stay_inside_the_plot_frame() {
        let svg = render_plot(&demo_plot());
        for chunk in svg.split("<circle cx=\"").skip(1) {
            let cx: f64 = chunk.split('"').next().unwrap().parse().unwrap();
            assert!((MARGIN_LEFT..=WIDTH - MARGIN_RIGHT).contains(&cx), "cx {cx}");
        }
    }

    #[test]
    fn degenerate_single_point_still_renders() {
        let svg = render_plot(&SvgPlot {
            title: "one point".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![Series {
                name: "p".into(),
                points: vec![(5.0, 5.0)],
                line: true,
                markers: true,
            }],
        });
        assert!(svg.contains("<circle"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn tick_labels_pick_a_readable_format() {
        assert_eq!(tick_label(0.0), "0");
        assert_eq!(tick_label(2.5), "2.5");
        assert_eq!(tick_label(3.0), "3");
        assert_eq!(tick_label(123456.0), "1.23e5");
        assert_eq!(tick_label(0.0002), "2.00e-4");
    }
}
