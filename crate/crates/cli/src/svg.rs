//! Minimal self-contained vector-graphic rendering: a numeric grid becomes
//! an SVG heatmap with a diverging blue-white-red palette, no plotting
//! dependency involved. Output is a pure function of the inputs, so files
//! rendered from identical data are byte-identical.

/// Side length of one heatmap cell in user units.
const CELL: usize = 12;
/// Vertical space reserved for the title and the value-range caption.
const STRIP: usize = 22;

fn lerp(a: u8, b: u8, t: f64) -> u8 {
    (f64::from(a) + (f64::from(b) - f64::from(a)) * t).round() as u8
}

/// Diverging palette: blue for negative, white at zero, red for positive.
/// `t` is the value divided by the grid's largest magnitude, in [-1, 1].
fn color(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (lerp(255, 178, t), lerp(255, 24, t), lerp(255, 43, t))
    } else {
        (lerp(255, 33, -t), lerp(255, 102, -t), lerp(255, 172, -t))
    };
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Renders `values[row][col]` as a heatmap. Row 0 is drawn at the BOTTOM,
/// matching a surface indexed by a coordinate that grows upward. All rows
/// must have equal, nonzero length.
pub fn heatmap_svg(title: &str, values: &[Vec<f64>]) -> String {
    let rows = values.len();
    let cols = values.first().map_or(0, Vec::len);
    assert!(rows > 0 && cols > 0, "heatmap needs a nonempty grid");
    assert!(
        values.iter().all(|r| r.len() == cols),
        "heatmap rows must have equal length"
    );
    let vmax = values
        .iter()
        .flatten()
        .fold(0.0f64, |a, &v| a.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let vmin_actual = values.iter().flatten().fold(f64::INFINITY, |a, &v| a.min(v));
    let vmax_actual = values
        .iter()
        .flatten()
        .fold(f64::NEG_INFINITY, |a, &v| a.max(v));

    let width = cols * CELL;
    let height = rows * CELL + 2 * STRIP;
    let mut out = String::with_capacity(rows * cols * 64 + 512);
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    ));
    out.push_str(&format!(
        "  <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    ));
    out.push_str(&format!(
        "  <text x=\"4\" y=\"15\" font-family=\"monospace\" font-size=\"12\">{title}</text>\n"
    ));
    for (r, row) in values.iter().enumerate() {
        let y = STRIP + (rows - 1 - r) * CELL;
        for (c, &v) in row.iter().enumerate() {
            let x = c * CELL;
            out.push_str(&format!(
                "  <rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{}\"/>\n",
                color(v / vmax)
            ));
        }
    }
    out.push_str(&format!(
        "  <text x=\"4\" y=\"{}\" font-family=\"monospace\" font-size=\"11\">min {vmin_actual:.3}  max {vmax_actual:.3}</text>\n",
        rows * CELL + 2 * STRIP - 7
    ));
    out.push_str("</svg>\n");
    out
}
