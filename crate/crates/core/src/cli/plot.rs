//! CSV parsing and static SVG line charts.
//!
//! Plots are deterministic byte-for-byte for identical inputs: no
//! timestamps, no randomness, shortest-roundtrip float formatting.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Strict CSV subset: comma-separated, no quoting, consistent column count.
/// Errors carry 1-based line numbers.
pub fn parse_csv(text: &str, name: &str) -> Result<CsvTable> {
    let mut lines = text.lines().enumerate();
    let header: Vec<String> = match lines.next() {
        None => {
            return Err(Error::Corrupt {
                path: name.into(),
                detail: "empty input: no header line".into(),
            })
        }
        Some((_, h)) => h.split(',').map(|s| s.trim().to_string()).collect(),
    };
    if header.iter().any(|h| h.is_empty()) {
        return Err(Error::Corrupt {
            path: name.into(),
            detail: "line 1: empty column name".into(),
        });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if cells.len() != header.len() {
            return Err(Error::Corrupt {
                path: name.into(),
                detail: format!(
                    "line {}: expected {} columns, found {}",
                    idx + 1,
                    header.len(),
                    cells.len()
                ),
            });
        }
        rows.push(cells);
    }
    if rows.is_empty() {
        return Err(Error::Corrupt {
            path: name.into(),
            detail: "empty input: no data rows".into(),
        });
    }
    Ok(CsvTable { header, rows })
}

impl CsvTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric column; unparsable cells become NaN (and are skipped when
    /// plotting).
    pub fn column_f64(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.column_index(name)?;
        Some(
            self.rows
                .iter()
                .map(|r| r[idx].parse::<f64>().unwrap_or(f64::NAN))
                .collect(),
        )
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const W: f64 = 800.0;
const H: f64 = 500.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

/// Line chart over a shared x axis. Non-finite y values break the line.
pub fn render_line_chart(title: &str, x_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let finite: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().copied())
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let (x_min, x_max) = bounds(finite.iter().map(|p| p.0));
    let (mut y_min, mut y_max) = bounds(finite.iter().map(|p| p.1));
    if y_min == y_max {
        y_min -= 1.0;
        y_max += 1.0;
    }

    let sx = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min).max(1e-300) * (W - MARGIN_L - MARGIN_R);
    let sy = |y: f64| H - MARGIN_B - (y - y_min) / (y_max - y_min) * (H - MARGIN_T - MARGIN_B);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" font-family=\"monospace\" font-size=\"13\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        W / 2.0,
        xml_escape(title)
    ));
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MARGIN_B,
        W - MARGIN_R,
        H - MARGIN_B
    ));
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MARGIN_B
    ));
    for (v, anchor, x, y) in [
        (x_min, "start", MARGIN_L, H - MARGIN_B + 18.0),
        (x_max, "end", W - MARGIN_R, H - MARGIN_B + 18.0),
    ] {
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" text-anchor=\"{anchor}\">{}</text>\n",
            fmt_num(v)
        ));
    }
    for (v, y) in [(y_min, H - MARGIN_B), (y_max, MARGIN_T + 4.0)] {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{y}\" text-anchor=\"end\">{}</text>\n",
            MARGIN_L - 6.0,
            fmt_num(v)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        (MARGIN_L + W - MARGIN_R) / 2.0,
        H - 12.0,
        xml_escape(x_label)
    ));

    for (i, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        // Break the polyline at non-finite points.
        let mut run: Vec<String> = Vec::new();
        let flush = |run: &mut Vec<String>, svg: &mut String| {
            if run.len() >= 2 {
                svg.push_str(&format!(
                    "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                    run.join(" ")
                ));
            } else if run.len() == 1 {
                let xy: Vec<&str> = run[0].split(',').collect();
                svg.push_str(&format!(
                    "<circle cx=\"{}\" cy=\"{}\" r=\"2\" fill=\"{color}\"/>\n",
                    xy[0], xy[1]
                ));
            }
            run.clear();
        };
        for &(x, y) in pts {
            if x.is_finite() && y.is_finite() {
                run.push(format!("{},{}", fmt_num(sx(x)), fmt_num(sy(y))));
            } else {
                flush(&mut run, &mut svg);
            }
        }
        flush(&mut run, &mut svg);
        // Legend.
        let ly = MARGIN_T + 16.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"3\"/>\n",
            W - MARGIN_R - 150.0,
            W - MARGIN_R - 130.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            W - MARGIN_R - 124.0,
            ly + 4.0,
            xml_escape(label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

fn fmt_num(v: f64) -> String {
    // Fixed precision keeps coordinates compact and deterministic.
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Render the plot set for a CSV file; returns the files written.
///
/// Training reports produce `losses.svg`, `lambda_cost.svg` and
/// `reward.svg`; evaluation metrics produce `reward.svg`, `safety.svg` and
/// `interaction.svg`.
pub fn plot_file(input: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(input)
        .map_err(|e| Error::io(input.display().to_string(), e))?;
    let table = parse_csv(&text, &input.display().to_string())?;

    let is_report = table.column_index("loss_bc").is_some();
    let is_metrics = table.column_index("total_reward").is_some();
    if !is_report && !is_metrics {
        return Err(Error::Corrupt {
            path: input.display().to_string(),
            detail: "unrecognized CSV header (expected a training report or metrics file)".into(),
        });
    }

    let mut written = Vec::new();
    let mut write = |name: &str, svg: String| -> Result<()> {
        let path = out_dir.join(name);
        std::fs::write(&path, svg).map_err(|e| Error::io(path.display().to_string(), e))?;
        written.push(path);
        Ok(())
    };

    if is_report {
        let x = table
            .column_f64("epoch")
            .ok_or_else(|| missing_col(input, "epoch"))?;
        let series = |cols: &[&str]| -> Result<Vec<(String, Vec<(f64, f64)>)>> {
            cols.iter()
                .map(|c| {
                    let y = table.column_f64(c).ok_or_else(|| missing_col(input, c))?;
                    Ok((c.to_string(), x.iter().copied().zip(y).collect()))
                })
                .collect()
        };
        write(
            "losses.svg",
            render_line_chart(
                "training losses",
                "epoch",
                &series(&[
                    "loss_bc",
                    "loss_q",
                    "loss_cost_weighted",
                    "critic_reward_loss",
                    "critic_cost_loss",
                ])?,
            ),
        )?;
        write(
            "lambda_cost.svg",
            render_line_chart(
                "multiplier and evaluation cost",
                "epoch",
                &series(&["lambda", "delta", "integral", "eval_mean_cost"])?,
            ),
        )?;
        write(
            "reward.svg",
            render_line_chart("evaluation reward", "epoch", &series(&["eval_mean_reward"])?),
        )?;
    } else {
        // Skip the trailing aggregate row (episode column is not numeric).
        let episode_idx = table
            .column_index("episode")
            .ok_or_else(|| missing_col(input, "episode"))?;
        let data_rows: Vec<&Vec<String>> = table
            .rows
            .iter()
            .filter(|r| r[episode_idx].parse::<f64>().is_ok())
            .collect();
        let col = |name: &str| -> Result<Vec<f64>> {
            let idx = table
                .column_index(name)
                .ok_or_else(|| missing_col(input, name))?;
            Ok(data_rows
                .iter()
                .map(|r| r[idx].parse::<f64>().unwrap_or(f64::NAN))
                .collect())
        };
        let x: Vec<f64> = col("episode")?;
        let pair = |name: &str| -> Result<(String, Vec<(f64, f64)>)> {
            Ok((name.to_string(), x.iter().copied().zip(col(name)?).collect()))
        };
        write(
            "reward.svg",
            render_line_chart("episode reward", "episode", &[pair("total_reward")?]),
        )?;
        write(
            "safety.svg",
            render_line_chart(
                "episode safety",
                "episode",
                &[pair("total_cost")?, pair("safe_length")?],
            ),
        )?;
        write(
            "interaction.svg",
            render_line_chart(
                "interaction metrics",
                "episode",
                &[pair("min_ttc")?, pair("mean_speed")?],
            ),
        )?;
    }
    Ok(written)
}

fn missing_col(input: &Path, name: &str) -> Error {
    Error::Corrupt {
        path: input.display().to_string(),
        detail: format!("missing column `{name}`"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_rejects_empty_and_ragged_input() {
        match parse_csv("", "t") {
            Err(Error::Corrupt { detail, .. }) => assert!(detail.contains("empty input")),
            other => panic!("{other:?}"),
        }
        match parse_csv("a,b\n", "t") {
            Err(Error::Corrupt { detail, .. }) => assert!(detail.contains("no data rows")),
            other => panic!("{other:?}"),
        }
        match parse_csv("a,b\n1,2\n3\n", "t") {
            Err(Error::Corrupt { detail, .. }) => {
                assert!(detail.contains("line 3"), "{detail}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn charts_are_deterministic() {
        let series = vec![("x".to_string(), vec![(0.0, 1.0), (1.0, 2.0), (2.0, 0.5)])];
        let a = render_line_chart("t", "x", &series);
        let b = render_line_chart("t", "x", &series);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.contains("polyline"));
    }

    #[test]
    fn non_finite_points_break_the_line() {
        let series = vec![(
            "x".to_string(),
            vec![(0.0, 1.0), (1.0, f64::INFINITY), (2.0, 0.5), (3.0, 0.7)],
        )];
        let svg = render_line_chart("t", "x", &series);
        // One isolated point before the break, one two-point line after.
        assert!(svg.contains("circle"));
        assert!(svg.contains("polyline"));
    }
}
