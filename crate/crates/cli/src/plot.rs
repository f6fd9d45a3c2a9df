//! Figure emission as standalone SVG: learning curves with benchmark
//! reference lines, final-reward bar charts, and per-agent sweep panels.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::metrics;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("no input files")]
    EmptyInput,
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Metrics { path: String, source: metrics::MetricsError },
    #[error("{path}: not a benchmark or metrics csv")]
    UnknownSchema { path: String },
}

/// Parsed plot inputs, exposed for value-level assertions in tests.
#[derive(Debug, Clone, Default)]
pub struct PlotData {
    /// (label, per-step smoothed rewards).
    pub curves: Vec<(String, Vec<f64>)>,
    /// (label, mean benchmark reward) horizontal references.
    pub references: Vec<(String, f64)>,
    /// (label, final smoothed reward) for bar charts.
    pub bars: Vec<(String, f64)>,
}

fn label_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "input".into())
}

fn parse_benchmark_csv(text: &str) -> Option<f64> {
    let mut lines = text.lines();
    let head = lines.next()?;
    if !head.starts_with("seed,config_id,stage1_reward,stage2_reward") {
        return None;
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let reward: f64 = line.split(',').nth(3)?.parse().ok()?;
        total += reward;
        count += 1;
    }
    (count > 0).then(|| total / count as f64)
}

/// Reads metrics and benchmark CSVs into plot-ready series.
pub fn load_inputs(paths: &[PathBuf]) -> Result<PlotData, PlotError> {
    if paths.is_empty() {
        return Err(PlotError::EmptyInput);
    }
    let mut data = PlotData::default();
    for path in paths {
        let text = std::fs::read_to_string(path)
            .map_err(|source| PlotError::Io { path: path.display().to_string(), source })?;
        if let Some(mean) = parse_benchmark_csv(&text) {
            data.references.push((label_of(path), mean));
            continue;
        }
        match metrics::from_csv(&text) {
            Ok(records) => {
                let label = label_of(path);
                let smoothed: Vec<f64> = records.iter().map(|r| r.reward_smoothed).collect();
                data.bars.push((label.clone(), *smoothed.last().unwrap()));
                data.curves.push((label, smoothed));
            }
            Err(metrics::MetricsError::SchemaMismatch { .. }) => {
                return Err(PlotError::UnknownSchema { path: path.display().to_string() });
            }
            Err(source) => {
                return Err(PlotError::Metrics { path: path.display().to_string(), source })
            }
        }
    }
    Ok(data)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_B: f64 = 48.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    min_x: f64,
    max_x: f64,
    min_y: f64,
    max_y: f64,
}

impl Frame {
    fn new(min_x: f64, max_x: f64, min_y: f64, max_y: f64, x_off: f64, width: f64) -> Self {
        let pad = 0.05 * (max_y - min_y).max(1e-9);
        Self {
            x0: x_off + MARGIN_L,
            x1: x_off + width - MARGIN_R,
            y0: HEIGHT - MARGIN_B,
            y1: MARGIN_T,
            min_x,
            max_x: max_x.max(min_x + 1e-9),
            min_y: min_y - pad,
            max_y: max_y + pad,
        }
    }

    fn x(&self, v: f64) -> f64 {
        self.x0 + (v - self.min_x) / (self.max_x - self.min_x) * (self.x1 - self.x0)
    }

    fn y(&self, v: f64) -> f64 {
        self.y0 + (v - self.min_y) / (self.max_y - self.min_y) * (self.y1 - self.y0)
    }
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let abs = v.abs();
    if abs >= 1000.0 {
        format!("{v:.0}")
    } else if abs >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

fn axes(svg: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    svg.push_str(&format!(
        "<line x1='{}' y1='{}' x2='{}' y2='{}' stroke='black'/>\n",
        frame.x0, frame.y0, frame.x1, frame.y0
    ));
    svg.push_str(&format!(
        "<line x1='{}' y1='{}' x2='{}' y2='{}' stroke='black'/>\n",
        frame.x0, frame.y0, frame.x0, frame.y1
    ));
    for i in 0..=4 {
        let fx = frame.min_x + (frame.max_x - frame.min_x) * i as f64 / 4.0;
        let px = frame.x(fx);
        svg.push_str(&format!(
            "<line x1='{px}' y1='{}' x2='{px}' y2='{}' stroke='black'/>\n",
            frame.y0,
            frame.y0 + 4.0
        ));
        svg.push_str(&format!(
            "<text x='{px}' y='{}' font-size='11' text-anchor='middle'>{}</text>\n",
            frame.y0 + 18.0,
            fmt_tick(fx)
        ));
        let fy = frame.min_y + (frame.max_y - frame.min_y) * i as f64 / 4.0;
        let py = frame.y(fy);
        svg.push_str(&format!(
            "<line x1='{}' y1='{py}' x2='{}' y2='{py}' stroke='black'/>\n",
            frame.x0 - 4.0,
            frame.x0
        ));
        svg.push_str(&format!(
            "<text x='{}' y='{}' font-size='11' text-anchor='end'>{}</text>\n",
            frame.x0 - 7.0,
            py + 4.0,
            fmt_tick(fy)
        ));
    }
    svg.push_str(&format!(
        "<text x='{}' y='{}' font-size='12' text-anchor='middle'>{x_label}</text>\n",
        (frame.x0 + frame.x1) / 2.0,
        HEIGHT - 10.0
    ));
    svg.push_str(&format!(
        "<text x='16' y='{}' font-size='12' text-anchor='middle' transform='rotate(-90 16 {})'>{y_label}</text>\n",
        (frame.y0 + frame.y1) / 2.0,
        (frame.y0 + frame.y1) / 2.0
    ));
}

fn polyline(svg: &mut String, frame: &Frame, values: &[f64], color: &str) {
    let mut points = String::new();
    // Down-sample long series; the figure has ~650 horizontal pixels.
    let stride = (values.len() / 1200).max(1);
    for (i, &v) in values.iter().enumerate() {
        if i % stride != 0 && i + 1 != values.len() {
            continue;
        }
        points.push_str(&format!("{:.2},{:.2} ", frame.x((i + 1) as f64), frame.y(v)));
    }
    svg.push_str(&format!(
        "<polyline points='{}' fill='none' stroke='{color}' stroke-width='1.6'/>\n",
        points.trim_end()
    ));
}

fn legend(svg: &mut String, entries: &[(String, &str)], x: f64) {
    for (i, (label, color)) in entries.iter().enumerate() {
        let y = MARGIN_T + 16.0 * i as f64;
        svg.push_str(&format!(
            "<rect x='{x}' y='{}' width='12' height='4' fill='{color}'/>\n",
            y + 2.0
        ));
        svg.push_str(&format!(
            "<text x='{}' y='{}' font-size='11'>{label}</text>\n",
            x + 16.0,
            y + 8.0
        ));
    }
}

fn svg_document(body: &str, width: f64) -> String {
    format!(
        "<svg xmlns='http://www.w3.org/2000/svg' width='{width}' height='{HEIGHT}' viewBox='0 0 {width} {HEIGHT}'>\n<rect width='{width}' height='{HEIGHT}' fill='white'/>\n{body}</svg>\n"
    )
}

/// Learning curves plus benchmark reference lines.
pub fn render_curves(data: &PlotData) -> Result<String, PlotError> {
    if data.curves.is_empty() {
        return Err(PlotError::EmptyInput);
    }
    let max_len = data.curves.iter().map(|(_, v)| v.len()).max().unwrap();
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for (_, values) in &data.curves {
        for &v in values {
            min_y = min_y.min(v);
            max_y = max_y.max(v);
        }
    }
    for &(_, v) in &data.references {
        min_y = min_y.min(v);
        max_y = max_y.max(v);
    }
    let frame = Frame::new(0.0, max_len as f64, min_y, max_y, 0.0, WIDTH);
    let mut body = String::new();
    axes(&mut body, &frame, "training step", "smoothed reward");
    let mut entries = Vec::new();
    for (i, (label, values)) in data.curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        polyline(&mut body, &frame, values, color);
        entries.push((label.clone(), color));
    }
    for (j, (label, value)) in data.references.iter().enumerate() {
        let color = PALETTE[(data.curves.len() + j) % PALETTE.len()];
        let py = frame.y(*value);
        body.push_str(&format!(
            "<line x1='{}' y1='{py}' x2='{}' y2='{py}' stroke='{color}' stroke-dasharray='6 4' stroke-width='1.4'/>\n",
            frame.x0, frame.x1
        ));
        entries.push((format!("{label} (benchmark)"), color));
    }
    legend(&mut body, &entries, frame.x0 + 10.0);
    Ok(svg_document(&body, WIDTH))
}

/// Final-reward bar chart.
pub fn render_bars(data: &PlotData) -> Result<String, PlotError> {
    if data.bars.is_empty() {
        return Err(PlotError::EmptyInput);
    }
    let min_y = data.bars.iter().map(|&(_, v)| v).fold(0.0f64, f64::min);
    let max_y = data.bars.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
    let frame = Frame::new(0.0, data.bars.len() as f64, min_y, max_y, 0.0, WIDTH);
    let mut body = String::new();
    axes(&mut body, &frame, "", "final smoothed reward");
    let zero = frame.y(0.0f64.clamp(frame.min_y, frame.max_y));
    for (i, (label, value)) in data.bars.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let x = frame.x(i as f64 + 0.2);
        let w = frame.x(i as f64 + 0.8) - x;
        let y = frame.y(*value);
        let (top, height) = if y < zero { (y, zero - y) } else { (zero, y - zero) };
        body.push_str(&format!(
            "<rect x='{x:.2}' y='{top:.2}' width='{w:.2}' height='{height:.2}' fill='{color}'/>\n"
        ));
        body.push_str(&format!(
            "<text x='{:.2}' y='{}' font-size='10' text-anchor='middle'>{label}</text>\n",
            x + w / 2.0,
            frame.y0 + 30.0
        ));
    }
    Ok(svg_document(&body, WIDTH))
}

/// Two side-by-side panels grouping curves by agent name substring.
pub fn render_panels(data: &PlotData) -> Result<String, PlotError> {
    if data.curves.is_empty() {
        return Err(PlotError::EmptyInput);
    }
    let groups: [(&str, Vec<&(String, Vec<f64>)>); 2] = [
        ("ddpg", data.curves.iter().filter(|(l, _)| l.contains("ddpg")).collect()),
        ("sac", data.curves.iter().filter(|(l, _)| l.contains("sac")).collect()),
    ];
    let panel_width = WIDTH;
    let mut body = String::new();
    for (pi, (name, curves)) in groups.iter().enumerate() {
        let x_off = pi as f64 * panel_width;
        let source: Vec<&(String, Vec<f64>)> = if curves.is_empty() {
            data.curves.iter().collect()
        } else {
            curves.clone()
        };
        let max_len = source.iter().map(|(_, v)| v.len()).max().unwrap_or(1);
        let mut min_y = f64::INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        for (_, values) in &source {
            for &v in values {
                min_y = min_y.min(v);
                max_y = max_y.max(v);
            }
        }
        let frame = Frame::new(0.0, max_len as f64, min_y, max_y, x_off, panel_width);
        axes(&mut body, &frame, "training step", "smoothed reward");
        body.push_str(&format!(
            "<text x='{}' y='16' font-size='13' text-anchor='middle'>{name}</text>\n",
            x_off + panel_width / 2.0
        ));
        let mut entries = Vec::new();
        for (i, (label, values)) in source.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            polyline(&mut body, &frame, values, color);
            entries.push((label.clone(), color));
        }
        legend(&mut body, &entries, frame.x0 + 10.0);
    }
    Ok(svg_document(&body, 2.0 * panel_width))
}

/// Renders the requested style into `out_dir` and returns the parsed data
/// together with the written file path.
pub fn cmd_plot(
    paths: &[PathBuf],
    style: &str,
    out_dir: &Path,
) -> Result<(PlotData, PathBuf), PlotError> {
    let data = load_inputs(paths)?;
    let (svg, name) = match style {
        "curves" => (render_curves(&data)?, "curves.svg"),
        "bars" => (render_bars(&data)?, "bars.svg"),
        "panels" => (render_panels(&data)?, "panels.svg"),
        other => {
            return Err(PlotError::UnknownSchema { path: format!("unknown style `{other}`") })
        }
    };
    std::fs::create_dir_all(out_dir)
        .map_err(|source| PlotError::Io { path: out_dir.display().to_string(), source })?;
    let out_path = out_dir.join(name);
    std::fs::write(&out_path, svg)
        .map_err(|source| PlotError::Io { path: out_path.display().to_string(), source })?;
    Ok((data, out_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{to_csv, MetricsRecord};

    fn write_metrics(dir: &Path, name: &str, rewards: &[f64]) -> PathBuf {
        let records: Vec<MetricsRecord> = rewards
            .iter()
            .enumerate()
            .map(|(i, &r)| MetricsRecord {
                step: i + 1,
                episode: 0,
                reward_raw: r,
                reward_smoothed: r,
                sum_utility: r,
                utility_per_vsp: vec![r],
                qos_penalty: 0.0,
                sum_rate: r.abs(),
                critic_loss: 0.0,
                actor_loss: 0.0,
                alpha: 0.0,
            })
            .collect();
        let path = dir.join(name);
        std::fs::write(&path, to_csv(&records)).unwrap();
        path
    }

    #[test]
    fn curves_with_two_runs_and_reference() {
        let dir = std::env::temp_dir().join("risshare_plot_test_curves");
        std::fs::create_dir_all(&dir).unwrap();
        let a = write_metrics(&dir, "train_sac_seed1.csv", &[1.0, 2.0, 3.0]);
        let b = write_metrics(&dir, "train_ddpg_seed1.csv", &[0.5, 1.0, 1.5]);
        let bench = dir.join("benchmark.csv");
        std::fs::write(
            &bench,
            "seed,config_id,stage1_reward,stage2_reward,sca_iterations,escalations,qos_infeasible\n1,0,3.0,4.0,2,0,false\n2,0,3.0,6.0,2,0,false\n",
        )
        .unwrap();
        let (data, path) = cmd_plot(&[a, b, bench], "curves", &dir).unwrap();
        assert_eq!(data.curves.len(), 2);
        assert_eq!(data.references.len(), 1);
        assert!((data.references[0].1 - 5.0).abs() < 1e-12);
        let svg = std::fs::read_to_string(path).unwrap();
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("stroke-dasharray"));
    }

    #[test]
    fn bars_values_equal_final_smoothed() {
        let dir = std::env::temp_dir().join("risshare_plot_test_bars");
        std::fs::create_dir_all(&dir).unwrap();
        let a = write_metrics(&dir, "a.csv", &[1.0, 2.0, 7.5]);
        let b = write_metrics(&dir, "b.csv", &[3.0, 2.0, -1.25]);
        let (data, _) = cmd_plot(&[a, b], "bars", &dir).unwrap();
        assert_eq!(data.bars[0].1, 7.5);
        assert_eq!(data.bars[1].1, -1.25);
    }

    #[test]
    fn empty_input_is_error_and_writes_nothing() {
        let dir = std::env::temp_dir().join("risshare_plot_test_empty");
        let _ = std::fs::remove_dir_all(&dir);
        assert!(matches!(cmd_plot(&[], "curves", &dir), Err(PlotError::EmptyInput)));
        assert!(!dir.exists());
    }

    #[test]
    fn unknown_schema_rejected() {
        let dir = std::env::temp_dir().join("risshare_plot_test_schema");
        std::fs::create_dir_all(&dir).unwrap();
        let bad = dir.join("bad.csv");
        std::fs::write(&bad, "x,y\n1,2\n").unwrap();
        assert!(matches!(
            cmd_plot(&[bad], "curves", &dir),
            Err(PlotError::UnknownSchema { .. })
        ));
    }
}
