//! Deterministic 2-D SVG scatter plots: one color per cluster, filled black
//! discs for bad points, a legend, and byte-identical output for identical
//! input.

use pmcgd::classify::ObservationLabel;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 54.0;

const PALETTE: [&str; 10] = [
    "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

/// Renders the scatter plot as an SVG string. `points` and `labels` must
/// have matching lengths; an empty input produces a valid plot frame with
/// axes only.
pub fn render_scatter(points: &[(f64, f64)], labels: &[ObservationLabel]) -> String {
    assert_eq!(points.len(), labels.len(), "one label per point");
    let (x_lo, x_hi) = padded_range(points.iter().map(|p| p.0));
    let (y_lo, y_hi) = padded_range(points.iter().map(|p| p.1));
    let to_px = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN);
    let to_py = |y: f64| HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::with_capacity(4096 + 96 * points.len());
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = fmt(MARGIN),
        b = fmt(HEIGHT - MARGIN),
        r = fmt(WIDTH - MARGIN)
    ));
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = fmt(MARGIN),
        t = fmt(MARGIN),
        b = fmt(HEIGHT - MARGIN)
    ));
    // Extreme tick labels.
    for (value, px, py, anchor) in [
        (x_lo, MARGIN, HEIGHT - MARGIN + 16.0, "middle"),
        (x_hi, WIDTH - MARGIN, HEIGHT - MARGIN + 16.0, "middle"),
        (y_lo, MARGIN - 6.0, HEIGHT - MARGIN, "end"),
        (y_hi, MARGIN - 6.0, MARGIN + 4.0, "end"),
    ] {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"{anchor}\">{}</text>\n",
            fmt(px),
            fmt(py),
            fmt(value)
        ));
    }
    // One marker element per observation: colored circles for good points,
    // filled black discs for bad ones.
    for (point, label) in points.iter().zip(labels) {
        let px = fmt(to_px(point.0));
        let py = fmt(to_py(point.1));
        if label.is_bad {
            svg.push_str(&format!(
                "<circle cx=\"{px}\" cy=\"{py}\" r=\"4\" fill=\"black\"/>\n"
            ));
        } else {
            let color = PALETTE[(label.cluster - 1) % PALETTE.len()];
            svg.push_str(&format!(
                "<circle cx=\"{px}\" cy=\"{py}\" r=\"3.5\" fill=\"{color}\" \
                 fill-opacity=\"0.55\" stroke=\"{color}\"/>\n"
            ));
        }
    }
    // Legend: swatches are rectangles so the marker count stays exactly n.
    let clusters = labels.iter().map(|l| l.cluster).max().unwrap_or(0);
    for c in 1..=clusters {
        let y = MARGIN + 18.0 * (c - 1) as f64;
        let color = PALETTE[(c - 1) % PALETTE.len()];
        svg.push_str(&format!(
            "<rect x=\"{x}\" y=\"{y}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n\
             <text x=\"{tx}\" y=\"{ty}\" font-size=\"12\">cluster {c}</text>\n",
            x = fmt(WIDTH - MARGIN + 8.0),
            y = fmt(y),
            tx = fmt(WIDTH - MARGIN + 24.0),
            ty = fmt(y + 10.0)
        ));
    }
    let y = MARGIN + 18.0 * clusters as f64;
    svg.push_str(&format!(
        "<rect x=\"{x}\" y=\"{y}\" width=\"12\" height=\"12\" fill=\"black\"/>\n\
         <text x=\"{tx}\" y=\"{ty}\" font-size=\"12\">bad point</text>\n",
        x = fmt(WIDTH - MARGIN + 8.0),
        y = fmt(y),
        tx = fmt(WIDTH - MARGIN + 24.0),
        ty = fmt(y + 10.0)
    ));
    svg.push_str("</svg>\n");
    svg
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    let span = (hi - lo).max(1e-9);
    (lo - 0.05 * span, hi + 0.05 * span)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(cluster: usize, is_bad: bool) -> ObservationLabel {
        ObservationLabel {
            row_id: 0,
            cluster,
            is_bad,
            z_max: 1.0,
            v_at_map: if is_bad { 0.2 } else { 0.9 },
        }
    }

    #[test]
    fn marker_count_equals_observation_count() {
        let points: Vec<(f64, f64)> = (0..25).map(|i| (i as f64, (i * i) as f64)).collect();
        let labels: Vec<_> = (0..25).map(|i| label(1 + i % 2, i % 5 == 0)).collect();
        let svg = render_scatter(&points, &labels);
        assert_eq!(svg.matches("<circle").count(), 25);
        assert!(svg.contains("bad point"));
    }

    #[test]
    fn empty_input_is_still_valid_svg() {
        let svg = render_scatter(&[], &[]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<circle").count(), 0);
        assert_eq!(svg.matches("<line").count(), 2);
    }

    #[test]
    fn output_is_byte_deterministic() {
        let points = vec![(0.1, 0.2), (3.4, -1.2), (2.2, 2.2)];
        let labels = vec![label(1, false), label(2, true), label(1, false)];
        assert_eq!(render_scatter(&points, &labels), render_scatter(&points, &labels));
    }
}
