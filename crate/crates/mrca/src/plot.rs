//! Text-mode chart of validation F1 per epoch.

use std::fmt::Write;

/// Renders `(epoch, f1)` points on a 0–1 grid `height` rows tall, one column
/// per point, followed by the raw values.
pub fn render_f1_curve(points: &[(usize, f64)], height: usize) -> String {
    let height = height.max(2);
    let level = |f1: f64| (f1.clamp(0.0, 1.0) * (height - 1) as f64).round() as usize;
    let mut out = String::new();
    writeln!(out, "validation F1 per epoch").unwrap();
    for row in (0..height).rev() {
        let label = row as f64 / (height - 1) as f64;
        let line: String = points.iter().map(|&(_, f1)| if level(f1) == row { '*' } else { ' ' }).collect();
        writeln!(out, "{label:>5.2} |{}", line.trim_end()).unwrap();
    }
    writeln!(out, "      +{}", "-".repeat(points.len())).unwrap();
    if let (Some(first), Some(last)) = (points.first(), points.last()) {
        let span = points.len().saturating_sub(1);
        let gap = span.saturating_sub(first.0.to_string().len());
        writeln!(out, "       {}{}{}", first.0, " ".repeat(gap), if span > 0 { last.0.to_string() } else { String::new() })
            .unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "epoch  val_f1").unwrap();
    for (epoch, f1) in points {
        writeln!(out, "{epoch:>5}  {f1:.4}").unwrap();
    }
    out
}
