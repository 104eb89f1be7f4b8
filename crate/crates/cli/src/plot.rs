//! Post-processing plots. Reads a run's trajectory.csv and renders a
//! four-panel SVG (lengths/areas, bending energy, gap energies, curvature
//! extremes). Pure string output, no display or toolkit dependency.

use curveflow_core::{Error, Result};
use std::fs;
use std::path::{Path, PathBuf};

const PALETTE: [&str; 3] = ["#1f6feb", "#d29922", "#3fb950"];
const PANEL_W: f64 = 470.0;
const PANEL_H: f64 = 350.0;
/// Plot rectangle inside a panel: left margin carries y labels, bottom the
/// t axis.
const MARGIN: (f64, f64, f64, f64) = (62.0, 30.0, 14.0, 40.0);

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn parse(text: &str) -> Result<Table> {
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Format("empty trajectory file".into()))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("trajectory row {}: {e}", k + 2)))?;
            if row.len() != header.len() {
                return Err(Error::Format(format!(
                    "trajectory row {} has {} fields, header has {}",
                    k + 2,
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Format("trajectory file has no samples".into()));
        }
        Ok(Table { header, rows })
    }

    fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("trajectory file lacks column {name}")))?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

struct Panel {
    title: &'static str,
    log_y: bool,
    series: Vec<Series>,
}

pub fn plot_run(dir: &Path) -> Result<PathBuf> {
    let text = fs::read_to_string(dir.join("trajectory.csv"))?;
    let table = Table::parse(&text)?;
    let t = table.column("t")?;
    let length = table.column("L")?;
    let area = table.column("A")?;
    let bending = table.column("W")?;
    let i_m1 = table.column("I_m1")?;
    let i0 = table.column("I0")?;
    let kappa_max = table.column("kappa_max")?;
    let kappa_min = table.column("kappa_min")?;

    let zip = |ys: Vec<f64>| -> Vec<(f64, f64)> { t.iter().copied().zip(ys).collect() };
    let gap: Vec<f64> =
        length.iter().zip(&i_m1).map(|(l, im)| (l * l * im).abs()).collect();

    let panels = [
        Panel {
            title: "length and area",
            log_y: false,
            series: vec![
                Series { label: "L".into(), points: zip(length.clone()) },
                Series { label: "A".into(), points: zip(area) },
            ],
        },
        Panel {
            title: "bending energy",
            log_y: true,
            series: vec![Series { label: "W".into(), points: zip(bending) }],
        },
        Panel {
            title: "gap energies",
            log_y: true,
            series: vec![
                Series { label: "|L^2 I_-1|".into(), points: zip(gap) },
                Series { label: "I_0".into(), points: zip(i0) },
            ],
        },
        Panel {
            title: "curvature extremes",
            log_y: true,
            series: vec![
                Series { label: "kappa_max".into(), points: zip(kappa_max) },
                Series {
                    label: "|kappa_min|".into(),
                    points: zip(kappa_min.iter().map(|k| k.abs()).collect()),
                },
            ],
        },
    ];

    let path = dir.join("plot.svg");
    fs::write(&path, render(&panels))?;
    Ok(path)
}

fn render(panels: &[Panel]) -> String {
    let width = 2.0 * PANEL_W;
    let height = (panels.len() as f64 / 2.0).ceil() * PANEL_H;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width} {height}\" \
         font-family=\"monospace\" font-size=\"12\">\n\
         <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    );
    for (i, panel) in panels.iter().enumerate() {
        let x0 = (i % 2) as f64 * PANEL_W;
        let y0 = (i / 2) as f64 * PANEL_H;
        render_panel(&mut svg, panel, x0, y0);
    }
    svg.push_str("</svg>\n");
    svg
}

/// A point enters the panel if both coordinates are finite and, on a log
/// axis, the value is positive.
fn admissible(panel: &Panel, p: (f64, f64)) -> bool {
    p.0.is_finite() && p.1.is_finite() && (!panel.log_y || p.1 > 0.0)
}

fn render_panel(svg: &mut String, panel: &Panel, x0: f64, y0: f64) {
    let (left, top, right, bottom) = MARGIN;
    let rect = (x0 + left, y0 + top, PANEL_W - left - right, PANEL_H - top - bottom);

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in &panel.series {
        for &p in s.points.iter().filter(|&&p| admissible(panel, p)) {
            xs.push(p.0);
            ys.push(if panel.log_y { p.1.log10() } else { p.1 });
        }
    }
    let (x_min, x_max) = padded_range(&xs);
    let (y_min, y_max) = padded_range(&ys);
    let to_px = |x: f64, y: f64| {
        (
            rect.0 + (x - x_min) / (x_max - x_min) * rect.2,
            rect.1 + rect.3 - (y - y_min) / (y_max - y_min) * rect.3,
        )
    };

    svg.push_str(&format!(
        "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" \
         fill=\"none\" stroke=\"#444\"/>\n",
        rect.0, rect.1, rect.2, rect.3
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"14\">{}{}</text>\n",
        rect.0 + rect.2 / 2.0,
        y0 + 18.0,
        panel.title,
        if panel.log_y { " (log scale)" } else { "" }
    ));

    for k in 0..=3 {
        let f = k as f64 / 3.0;
        let x = x_min + f * (x_max - x_min);
        let y = y_min + f * (y_max - y_min);
        let (px, _) = to_px(x, y_min);
        let (_, py) = to_px(x_min, y);
        svg.push_str(&format!(
            "<line x1=\"{px:.1}\" y1=\"{:.1}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"#444\"/>\n\
             <text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            rect.1 + rect.3,
            rect.1 + rect.3 + 5.0,
            rect.1 + rect.3 + 18.0,
            tick_label(x)
        ));
        let y_value = if panel.log_y { 10f64.powf(y) } else { y };
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{py:.1}\" x2=\"{:.1}\" y2=\"{py:.1}\" stroke=\"#444\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            rect.0 - 5.0,
            rect.0,
            rect.0 - 8.0,
            py + 4.0,
            tick_label(y_value)
        ));
    }

    for (si, s) in panel.series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        // Inadmissible samples split the trace into separate segments.
        let mut segment: Vec<String> = Vec::new();
        let flush = |seg: &mut Vec<String>, svg: &mut String| {
            if seg.len() >= 2 {
                svg.push_str(&format!(
                    "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" \
                     points=\"{}\"/>\n",
                    seg.join(" ")
                ));
            }
            seg.clear();
        };
        for &p in &s.points {
            if admissible(panel, p) {
                let (px, py) = to_px(p.0, if panel.log_y { p.1.log10() } else { p.1 });
                segment.push(format!("{px:.1},{py:.1}"));
            } else {
                flush(&mut segment, svg);
            }
        }
        flush(&mut segment, svg);

        let lx = rect.0 + rect.2 - 120.0;
        let ly = rect.1 + 16.0 + 16.0 * si as f64;
        svg.push_str(&format!(
            "<line x1=\"{lx:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\">{}</text>\n",
            lx + 22.0,
            lx + 28.0,
            ly + 4.0,
            s.label
        ));
    }
}

fn padded_range(values: &[f64]) -> (f64, f64) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !min.is_finite() || !max.is_finite() {
        return (0.0, 1.0);
    }
    let span = (max - min).max(1e-12 * (1.0 + max.abs()));
    (min - 0.05 * span, max + 0.05 * span)
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && (a >= 1e4 || a < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_a_small_trajectory() {
        let dir = std::env::temp_dir().join(format!("plot-test-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let mut csv = String::from(
            "t,dt,L,A,n,R,W,I_m1,I0,I1,tildeI_m1,J3,J4,g,kappa_max,kappa_min,\
             c_x,c_y,r,sigma_over_L,rho_L2,rho_C0\n",
        );
        for k in 0..20 {
            let t = 0.01 * k as f64;
            csv.push_str(&format!(
                "{t},0.01,6.28,3.14,1,6.28,6.3,{},{},0,0,0,0,0,1.1,0.9,0,0,1,0,1e-3,1e-3\n",
                1e-3 * (-t).exp(),
                2e-3 * (-t).exp(),
            ));
        }
        fs::write(dir.join("trajectory.csv"), csv).unwrap();
        let path = plot_run(&dir).unwrap();
        let svg = fs::read_to_string(path).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("gap energies"));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn missing_column_is_a_format_error() {
        let err = Table::parse("t,L\n0,1\n").unwrap().column("W").unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }
}
