//! Grouped bar charts as standalone SVG.

use mtlforge_core::ResultsTable;

const PALETTE: [&str; 6] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#b07aa1"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One group of bars per row, one bar per `(dataset, scheme)` column, and a
/// dashed line per dataset at its baseline.
pub fn bar_chart(t: &ResultsTable) -> String {
    let ncols = t.column_count().max(1);
    let bar = 12.0;
    let gap = 18.0;
    let group = ncols as f64 * bar + gap;
    let (left, top, plot_h, bottom) = (50.0, 30.0, 240.0, 90.0);
    let width = left + group * t.rows.len().max(1) as f64 + 20.0;
    let legend_h = 16.0 * ncols as f64;
    let height = top + plot_h + bottom + legend_h;
    let max = t
        .cells
        .iter()
        .flatten()
        .chain(&t.baseline)
        .flatten()
        .fold(0.0f64, |m, v| m.max(*v))
        .max(1e-9);
    let y = |v: f64| top + plot_h - (v.max(0.0) / max) * plot_h;

    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    s += &format!("<text x=\"{left}\" y=\"18\" font-size=\"14\">{}</text>\n", escape(t.metric.title()));
    s += &format!(
        "<line x1=\"{left}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        top + plot_h,
        width - 20.0,
        top + plot_h
    );
    for k in 0..=4 {
        let v = max * k as f64 / 4.0;
        s += &format!("<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{v:.3}</text>\n", left - 4.0, y(v) + 4.0);
    }
    for (r, label) in t.rows.iter().enumerate() {
        let x0 = left + gap / 2.0 + r as f64 * group;
        for c in 0..t.column_count() {
            let Some(v) = t.cells[r][c] else { continue };
            let x = x0 + c as f64 * bar;
            let stroke = if t.is_underlined(r, c) { " stroke=\"black\" stroke-width=\"1.5\"" } else { "" };
            s += &format!(
                "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{}\"{stroke}><title>{} {v:.3}</title></rect>\n",
                y(v),
                bar - 1.0,
                top + plot_h - y(v),
                PALETTE[c % PALETTE.len()],
                escape(label)
            );
        }
        let cx = x0 + ncols as f64 * bar / 2.0;
        s += &format!(
            "<text x=\"{cx:.1}\" y=\"{:.1}\" text-anchor=\"end\" transform=\"rotate(-45 {cx:.1} {:.1})\">{}</text>\n",
            top + plot_h + 14.0,
            top + plot_h + 14.0,
            escape(label)
        );
    }
    let ns = t.schemes.len().max(1);
    for (d, dataset) in t.datasets.iter().enumerate() {
        if let Some(b) = t.baseline.get(d * ns).copied().flatten() {
            s += &format!(
                "<line x1=\"{left}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"{}\" stroke-dasharray=\"4 3\"><title>{} baseline {b:.3}</title></line>\n",
                y(b),
                width - 20.0,
                y(b),
                PALETTE[(d * ns) % PALETTE.len()],
                escape(dataset)
            );
        }
    }
    for c in 0..t.column_count() {
        let ly = top + plot_h + bottom + 16.0 * c as f64;
        let name = format!("{} {}", t.datasets[c / ns], t.schemes[c % ns].short());
        s += &format!(
            "<rect x=\"{left}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{}\"/><text x=\"{:.1}\" y=\"{:.1}\">{}</text>\n",
            ly - 9.0,
            PALETTE[c % PALETTE.len()],
            left + 14.0,
            ly,
            escape(&name)
        );
    }
    s += "</svg>\n";
    s
}
