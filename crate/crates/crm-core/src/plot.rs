//! Minimal native SVG time-series plots.
//!
//! CSV remains the canonical artifact; these plots exist so a run leaves
//! a human-inspectable picture without external tooling.

/// One named series sharing the common time grid.
pub type Series<'a> = (&'a str, &'a [f64]);

const WIDTH: f64 = 840.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 48.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];
/// Cap on rendered points per series; longer series are strided.
const MAX_POINTS: usize = 2000;

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    } * mag;
    let start = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut t = start;
    while t <= hi + step * 1e-9 {
        ticks.push(t);
        t += step;
    }
    ticks
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        if s.is_empty() {
            "0".into()
        } else {
            s
        }
    } else {
        format!("{v:.2e}")
    }
}

/// Renders a line plot of the given series over the shared time grid.
pub fn line_plot(title: &str, times: &[f64], series: &[Series]) -> String {
    let mut lo_y = f64::INFINITY;
    let mut hi_y = f64::NEG_INFINITY;
    for (_, vals) in series {
        for &v in *vals {
            lo_y = lo_y.min(v);
            hi_y = hi_y.max(v);
        }
    }
    if !lo_y.is_finite() || !hi_y.is_finite() {
        lo_y = 0.0;
        hi_y = 1.0;
    }
    if hi_y - lo_y < 1e-12 {
        hi_y = lo_y + 1.0;
    }
    let pad = 0.05 * (hi_y - lo_y);
    lo_y -= pad;
    hi_y += pad;
    let (lo_t, hi_t) = (
        times.first().copied().unwrap_or(0.0),
        times.last().copied().unwrap_or(1.0),
    );
    let span_t = (hi_t - lo_t).max(1e-12);

    let x_of = |t: f64| MARGIN_L + (t - lo_t) / span_t * (WIDTH - MARGIN_L - MARGIN_R);
    let y_of = |v: f64| HEIGHT - MARGIN_B - (v - lo_y) / (hi_y - lo_y) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut svg = String::with_capacity(32 * 1024);
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        xml_escape(title)
    ));

    // axes frame
    svg.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{}\" height=\"{}\" \
         fill=\"none\" stroke=\"#333\"/>\n",
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    ));
    for t in nice_ticks(lo_t, hi_t, 8) {
        let x = x_of(t);
        svg.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"#ccc\"/>\n\
             <text x=\"{x:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            MARGIN_T,
            HEIGHT - MARGIN_B,
            HEIGHT - MARGIN_B + 18.0,
            fmt_tick(t)
        ));
    }
    for v in nice_ticks(lo_y, hi_y, 6) {
        let y = y_of(v);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y:.2}\" x2=\"{}\" y2=\"{y:.2}\" stroke=\"#ccc\"/>\n\
             <text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
            MARGIN_L,
            WIDTH - MARGIN_R,
            MARGIN_L - 6.0,
            y + 4.0,
            fmt_tick(v)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">t [s]</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 10.0
    ));

    let stride = (times.len() / MAX_POINTS).max(1);
    for (k, (name, vals)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut points = String::new();
        for i in (0..times.len()).step_by(stride) {
            points.push_str(&format!("{:.2},{:.2} ", x_of(times[i]), y_of(vals[i])));
        }
        if stride > 1 && !(times.len() - 1).is_multiple_of(stride) {
            let i = times.len() - 1;
            points.push_str(&format!("{:.2},{:.2} ", x_of(times[i]), y_of(vals[i])));
        }
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.trim_end()
        ));
        let ly = MARGIN_T + 16.0 + 18.0 * k as f64;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{ly:.2}\" x2=\"{}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{}\" y=\"{:.2}\">{}</text>\n",
            WIDTH - MARGIN_R + 10.0,
            WIDTH - MARGIN_R + 34.0,
            WIDTH - MARGIN_R + 40.0,
            ly + 4.0,
            xml_escape(name)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_wellformed_svg() {
        let times: Vec<f64> = (0..500).map(|i| i as f64 * 0.01).collect();
        let a: Vec<f64> = times.iter().map(|t| t.sin()).collect();
        let b: Vec<f64> = times.iter().map(|t| (2.0 * t).cos()).collect();
        let svg = line_plot("demo <plot>", &times, &[("sin", &a), ("cos&", &b)]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("&lt;plot&gt;"));
        assert!(svg.contains("cos&amp;"));
        // deterministic rendering
        assert_eq!(svg, line_plot("demo <plot>", &times, &[("sin", &a), ("cos&", &b)]));
    }

    #[test]
    fn long_series_are_strided() {
        let times: Vec<f64> = (0..100_000).map(|i| i as f64 * 1e-4).collect();
        let a: Vec<f64> = times.iter().map(|t| t.cos()).collect();
        let svg = line_plot("big", &times, &[("a", &a)]);
        let points = svg.split("points=\"").nth(1).unwrap();
        let count = points.split('"').next().unwrap().split_whitespace().count();
        assert!(count <= MAX_POINTS + 2, "rendered {count} points");
    }

    #[test]
    fn constant_series_does_not_degenerate() {
        let times: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let a = vec![2.0; 10];
        let svg = line_plot("flat", &times, &[("a", &a)]);
        assert!(svg.contains("<polyline"));
    }
}
