//! Static SVG figures: schedule Gantt charts, bar charts and scatter plots.

use std::fmt::Write as _;

use rulegate_core::{Dispatch, Instance};

const FONT: &str = "font-family=\"sans-serif\" font-size=\"12\"";

/// Distinct fill for job `j`; hues walk the golden angle.
pub fn job_color(j: usize) -> String {
    let hue = (j as f64 * 137.508) % 360.0;
    format!("hsl({hue:.1},65%,55%)")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Roughly ten round tick values covering `[0, max]`.
fn ticks(max: f64) -> Vec<f64> {
    if !(max > 0.0) {
        return vec![0.0];
    }
    let raw = max / 8.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].into_iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut out = Vec::new();
    let mut t = 0.0;
    while t <= max * 1.0001 {
        out.push(t);
        t += step;
    }
    out
}

fn header(out: &mut String, width: f64, height: f64, title: &str) {
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">"
    )
    .unwrap();
    writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>").unwrap();
    writeln!(
        out,
        "<text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" {FONT} font-weight=\"bold\">{}</text>",
        width / 2.0,
        escape(title)
    )
    .unwrap();
}

/// One row per machine and one bar per operation at `[start, end]`, filled
/// by job, with a job legend and the makespan marked.
pub fn gantt(instance: &Instance, log: &[Dispatch], title: &str) -> String {
    let m = instance.num_machines();
    let jobs = instance.num_jobs();
    let makespan = log.iter().map(|d| d.end).max().unwrap_or(0) as f64;
    let (left, right, top, row_h) = (60.0, 120.0, 40.0, 28.0);
    let plot_w = 720.0;
    let width = left + plot_w + right;
    let height = top + row_h * m as f64 + 50.0;
    let sx = |t: f64| left + if makespan > 0.0 { t / makespan * plot_w } else { 0.0 };

    let mut out = String::new();
    header(&mut out, width, height, title);
    for machine in 0..m {
        let y = top + row_h * machine as f64;
        writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" {FONT}>M{machine}</text>",
            left - 8.0,
            y + row_h * 0.65
        )
        .unwrap();
    }
    for d in log {
        let y = top + row_h * d.machine as f64 + 3.0;
        let x0 = sx(d.start as f64);
        let x1 = sx(d.end as f64);
        writeln!(
            out,
            "<rect class=\"op\" x=\"{x0:.2}\" y=\"{y:.1}\" width=\"{:.2}\" height=\"{:.1}\" fill=\"{}\" stroke=\"black\" stroke-width=\"0.5\"><title>J{} op {} [{}, {}]</title></rect>",
            x1 - x0,
            row_h - 6.0,
            job_color(d.job),
            d.job,
            d.op,
            d.start,
            d.end
        )
        .unwrap();
    }
    let axis_y = top + row_h * m as f64;
    writeln!(out, "<line x1=\"{left}\" y1=\"{axis_y}\" x2=\"{:.1}\" y2=\"{axis_y}\" stroke=\"black\"/>", left + plot_w)
        .unwrap();
    for t in ticks(makespan) {
        writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" {FONT}>{t}</text>", sx(t), axis_y + 16.0)
            .unwrap();
    }
    let mx = sx(makespan);
    writeln!(
        out,
        "<line x1=\"{mx:.1}\" y1=\"{:.1}\" x2=\"{mx:.1}\" y2=\"{axis_y}\" stroke=\"red\" stroke-dasharray=\"4 3\"/>",
        top - 6.0
    )
    .unwrap();
    writeln!(
        out,
        "<text class=\"makespan\" x=\"{mx:.1}\" y=\"{:.1}\" text-anchor=\"end\" {FONT} fill=\"red\">makespan {}</text>",
        axis_y + 34.0,
        makespan
    )
    .unwrap();
    let lx = left + plot_w + 20.0;
    for j in 0..jobs {
        let y = top + 16.0 * j as f64;
        writeln!(
            out,
            "<rect class=\"legend\" x=\"{lx}\" y=\"{y:.1}\" width=\"12\" height=\"12\" fill=\"{}\"/><text x=\"{:.1}\" y=\"{:.1}\" {FONT}>J{j}</text>",
            job_color(j),
            lx + 18.0,
            y + 10.0
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Vertical bars, one per `(label, value)`, in the given order.
pub fn bar_chart(bars: &[(String, f64)], title: &str, y_label: &str) -> String {
    let (left, top, bottom, plot_h) = (70.0, 40.0, 140.0, 300.0);
    let bar_w = 36.0;
    let gap = 14.0;
    let plot_w = (bar_w + gap) * bars.len().max(1) as f64 + gap;
    let width = left + plot_w + 20.0;
    let height = top + plot_h + bottom;
    let max = bars.iter().map(|b| b.1).fold(0.0_f64, f64::max);
    let min = bars.iter().map(|b| b.1).fold(0.0_f64, f64::min);
    let span = if max - min > 0.0 { max - min } else { 1.0 };
    let sy = |v: f64| top + (max - v) / span * plot_h;

    let mut out = String::new();
    header(&mut out, width, height, title);
    let zero = sy(0.0);
    for t in ticks(max) {
        writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" {FONT}>{t}</text><line x1=\"{left}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#ddd\"/>",
            left - 6.0,
            sy(t) + 4.0,
            sy(t),
            left + plot_w,
            sy(t)
        )
        .unwrap();
    }
    for (i, (label, v)) in bars.iter().enumerate() {
        let x = left + gap + (bar_w + gap) * i as f64;
        let (y0, y1) = if *v >= 0.0 { (sy(*v), zero) } else { (zero, sy(*v)) };
        writeln!(
            out,
            "<rect class=\"bar\" x=\"{x:.1}\" y=\"{y0:.2}\" width=\"{bar_w}\" height=\"{:.2}\" fill=\"{}\"><title>{}: {v:.2}</title></rect>",
            y1 - y0,
            job_color(i),
            escape(label)
        )
        .unwrap();
        writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" {FONT} transform=\"rotate(45 {:.1} {:.1})\">{}</text>",
            x + bar_w / 2.0,
            zero + 14.0,
            x + bar_w / 2.0,
            zero + 14.0,
            escape(label)
        )
        .unwrap();
    }
    writeln!(
        out,
        "<line x1=\"{left}\" y1=\"{zero:.2}\" x2=\"{:.1}\" y2=\"{zero:.2}\" stroke=\"black\"/>",
        left + plot_w
    )
    .unwrap();
    writeln!(
        out,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" {FONT} transform=\"rotate(-90 16 {:.1})\">{}</text>",
        top + plot_h / 2.0,
        top + plot_h / 2.0,
        escape(y_label)
    )
    .unwrap();
    out.push_str("</svg>\n");
    out
}

/// Labeled points on linear axes starting at zero.
pub fn scatter(points: &[(f64, f64, String)], title: &str, x_label: &str, y_label: &str) -> String {
    let (left, top, plot_w, plot_h) = (80.0, 40.0, 560.0, 360.0);
    let width = left + plot_w + 40.0;
    let height = top + plot_h + 60.0;
    let max_x = points.iter().map(|p| p.0).fold(0.0_f64, f64::max);
    let max_y = points.iter().map(|p| p.1).fold(0.0_f64, f64::max);
    let sx = |v: f64| left + if max_x > 0.0 { v / max_x * plot_w } else { 0.0 };
    let sy = |v: f64| top + plot_h - if max_y > 0.0 { v / max_y * plot_h } else { 0.0 };

    let mut out = String::new();
    header(&mut out, width, height, title);
    let base = top + plot_h;
    writeln!(out, "<line x1=\"{left}\" y1=\"{base}\" x2=\"{:.1}\" y2=\"{base}\" stroke=\"black\"/>", left + plot_w)
        .unwrap();
    writeln!(out, "<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{base}\" stroke=\"black\"/>").unwrap();
    for t in ticks(max_x) {
        writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" {FONT}>{t}</text>", sx(t), base + 16.0)
            .unwrap();
    }
    for t in ticks(max_y) {
        writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" {FONT}>{t}</text>", left - 6.0, sy(t) + 4.0)
            .unwrap();
    }
    for (x, y, label) in points {
        writeln!(
            out,
            "<circle class=\"point\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"steelblue\"><title>{}</title></circle><text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"9\">{}</text>",
            sx(*x),
            sy(*y),
            escape(label),
            sx(*x) + 6.0,
            sy(*y) - 4.0,
            escape(label)
        )
        .unwrap();
    }
    writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" {FONT}>{}</text>",
        left + plot_w / 2.0,
        base + 40.0,
        escape(x_label)
    )
    .unwrap();
    writeln!(
        out,
        "<text x=\"20\" y=\"{:.1}\" text-anchor=\"middle\" {FONT} transform=\"rotate(-90 20 {:.1})\">{}</text>",
        top + plot_h / 2.0,
        top + plot_h / 2.0,
        escape(y_label)
    )
    .unwrap();
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks(10.0), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(ticks(0.0), vec![0.0]);
    }

    #[test]
    fn labels_are_escaped() {
        let svg = bar_chart(&[("a<b".into(), 1.0)], "t&t", "y");
        assert!(svg.contains("a&lt;b"));
        assert!(svg.contains("t&amp;t"));
    }
}
