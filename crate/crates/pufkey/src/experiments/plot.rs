//! Deterministic SVG renderings of the experiment CSVs.
//!
//! Output is a pure function of the CSV text: no timestamps, fixed canvas,
//! fixed palette, fixed float formatting. Error-rate plots use a log y axis
//! with zero values drawn at the axis floor.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("csv: {0}")]
    Csv(String),
    #[error("csv contains no data rows")]
    Empty,
    #[error("cannot infer plot kind from csv (missing '# pufkey-csv' header)")]
    UnknownKind,
}

/// Which figure to draw; `Auto` reads the schema comment in the CSV.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Auto,
    FailureRate,
    BerSweep,
    DecoderCompare,
    Timing,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
/// Floor for log-scale axes; zero or negative values are drawn here.
const LOG_FLOOR: f64 = 1e-7;

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

struct Layout {
    title: String,
    x_label: String,
    y_label: String,
    log_y: bool,
}

/// Render a CSV produced by the experiment runners into a standalone SVG.
pub fn emit_plot(csv_text: &str, kind: PlotKind) -> Result<String, PlotError> {
    let parsed = parse_csv(csv_text)?;
    let kind = match kind {
        PlotKind::Auto => match parsed.kind.as_deref() {
            Some(super::CSV_KIND_FAILURE) => PlotKind::FailureRate,
            Some(super::CSV_KIND_BER) => PlotKind::BerSweep,
            Some(super::CSV_KIND_COMPARE) => PlotKind::DecoderCompare,
            Some(super::CSV_KIND_TIMING) => PlotKind::Timing,
            _ => return Err(PlotError::UnknownKind),
        },
        k => k,
    };
    let (layout, series) = match kind {
        PlotKind::FailureRate => failure_series(&parsed)?,
        PlotKind::BerSweep => ber_series(&parsed)?,
        PlotKind::DecoderCompare => compare_series(&parsed)?,
        PlotKind::Timing => timing_series(&parsed)?,
        PlotKind::Auto => unreachable!(),
    };
    if series.iter().all(|s| s.points.is_empty()) {
        return Err(PlotError::Empty);
    }
    Ok(render(&layout, &series))
}

struct ParsedCsv {
    kind: Option<String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn parse_csv(text: &str) -> Result<ParsedCsv, PlotError> {
    let mut kind = None;
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(k) = rest.strip_prefix("pufkey-csv ") {
                kind = k.split_whitespace().next().map(str::to_string);
            }
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|f| f.trim().to_string()).collect();
        match &header {
            None => header = Some(fields),
            Some(h) => {
                if fields.len() != h.len() {
                    return Err(PlotError::Csv(format!(
                        "row has {} fields, header has {}",
                        fields.len(),
                        h.len()
                    )));
                }
                rows.push(fields);
            }
        }
    }
    let header = header.ok_or(PlotError::Empty)?;
    if rows.is_empty() {
        return Err(PlotError::Empty);
    }
    Ok(ParsedCsv { kind, header, rows })
}

fn column(parsed: &ParsedCsv, name: &str) -> Result<usize, PlotError> {
    parsed
        .header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| PlotError::Csv(format!("missing column {name}")))
}

fn number(field: &str) -> Result<f64, PlotError> {
    field.parse::<f64>().map_err(|_| PlotError::Csv(format!("bad number {field:?}")))
}

fn failure_series(parsed: &ParsedCsv) -> Result<(Layout, Vec<Series>), PlotError> {
    let xp = column(parsed, "p")?;
    let rate = column(parsed, "failure_rate")?;
    let wilson = column(parsed, "wilson95_upper")?;
    let mut observed = Vec::new();
    let mut bound = Vec::new();
    for row in &parsed.rows {
        observed.push((number(&row[xp])?, number(&row[rate])?));
        bound.push((number(&row[xp])?, number(&row[wilson])?));
    }
    Ok((
        Layout {
            title: "Key regeneration failure probability".into(),
            x_label: "bit flip probability".into(),
            y_label: "failure rate".into(),
            log_y: true,
        },
        vec![
            Series { label: "observed".into(), points: observed },
            Series { label: "wilson 95% upper".into(), points: bound },
        ],
    ))
}

fn ber_series(parsed: &ParsedCsv) -> Result<(Layout, Vec<Series>), PlotError> {
    let xp = column(parsed, "p")?;
    let legit = column(parsed, "percent_key_error_legit")?;
    let attacker = column(parsed, "percent_key_error_attacker")?;
    let mut l = Vec::new();
    let mut a = Vec::new();
    for row in &parsed.rows {
        l.push((number(&row[xp])?, number(&row[legit])?));
        a.push((number(&row[xp])?, number(&row[attacker])?));
    }
    Ok((
        Layout {
            title: "Pre-hash key error vs. response noise".into(),
            x_label: "bit flip probability".into(),
            y_label: "key error (%)".into(),
            log_y: true,
        },
        vec![
            Series { label: "legitimate".into(), points: l },
            Series { label: "attacker".into(), points: a },
        ],
    ))
}

fn compare_series(parsed: &ParsedCsv) -> Result<(Layout, Vec<Series>), PlotError> {
    let xp = column(parsed, "p")?;
    let dec = column(parsed, "decoder")?;
    let rate = column(parsed, "block_error_rate")?;
    let mut by_decoder: Vec<Series> = Vec::new();
    for row in &parsed.rows {
        let name = row[dec].clone();
        let point = (number(&row[xp])?, number(&row[rate])?);
        match by_decoder.iter_mut().find(|s| s.label == name) {
            Some(s) => s.points.push(point),
            None => by_decoder.push(Series { label: name, points: vec![point] }),
        }
    }
    Ok((
        Layout {
            title: "Block error rate by decoder".into(),
            x_label: "bit flip probability".into(),
            y_label: "block error rate".into(),
            log_y: true,
        },
        by_decoder,
    ))
}

fn timing_series(parsed: &ParsedCsv) -> Result<(Layout, Vec<Series>), PlotError> {
    let dec = column(parsed, "decoder")?;
    let med = column(parsed, "median_of_means_us")?;
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (i, row) in parsed.rows.iter().enumerate() {
        points.push((i as f64, number(&row[med])?));
        labels.push(row[dec].clone());
    }
    // one series; decoder names carried as the x tick labels via the label
    // field of phantom series
    let mut series = vec![Series { label: "regeneration latency".into(), points }];
    for (i, l) in labels.into_iter().enumerate() {
        series.push(Series { label: format!("{i}: {l}"), points: Vec::new() });
    }
    Ok((
        Layout {
            title: "Regeneration latency by decoder".into(),
            x_label: "decoder index".into(),
            y_label: "median-of-means latency (us)".into(),
            log_y: false,
        },
        series,
    ))
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn render(layout: &Layout, series: &[Series]) -> String {
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let all_points: Vec<(f64, f64)> =
        series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let (x_min, x_max) = {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &(x, _) in &all_points {
            min = min.min(x);
            max = max.max(x);
        }
        if min == max {
            (min - 0.5, max + 0.5)
        } else {
            (min, max)
        }
    };
    let y_val = |y: f64| if layout.log_y { y.max(LOG_FLOOR).log10() } else { y };
    let (y_min, y_max) = {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &(_, y) in &all_points {
            let v = y_val(y);
            min = min.min(v);
            max = max.max(v);
        }
        if (max - min).abs() < 1e-12 {
            (min - 1.0, max + 1.0)
        } else {
            (min, max)
        }
    };
    let sx = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| MARGIN_T + plot_h - (y_val(y) - y_min) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        layout.title
    ));
    // frame
    svg.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n",
        fmt(MARGIN_L),
        fmt(MARGIN_T),
        fmt(plot_w),
        fmt(plot_h)
    ));
    // x ticks: 5 evenly spaced
    for i in 0..=4 {
        let x = x_min + (x_max - x_min) * f64::from(i) / 4.0;
        let px = sx(x);
        svg.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#333\"/>\n",
            fmt(px),
            fmt(MARGIN_T + plot_h),
            fmt(MARGIN_T + plot_h + 5.0)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            fmt(px),
            fmt(MARGIN_T + plot_h + 20.0),
            format_args!("{x:.3}")
        ));
    }
    // y ticks
    if layout.log_y {
        let lo = y_min.floor() as i32;
        let hi = y_max.ceil() as i32;
        for d in lo..=hi {
            let v = 10f64.powi(d);
            let py = sy(v);
            if py < MARGIN_T - 1.0 || py > MARGIN_T + plot_h + 1.0 {
                continue;
            }
            svg.push_str(&format!(
                "<line x1=\"{0}\" y1=\"{2}\" x2=\"{1}\" y2=\"{2}\" stroke=\"#ddd\"/>\n",
                fmt(MARGIN_L),
                fmt(MARGIN_L + plot_w),
                fmt(py)
            ));
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">1e{}</text>\n",
                fmt(MARGIN_L - 8.0),
                fmt(py + 4.0),
                d
            ));
        }
    } else {
        for i in 0..=4 {
            let v = y_min + (y_max - y_min) * f64::from(i) / 4.0;
            let py = MARGIN_T + plot_h - (v - y_min) / (y_max - y_min) * plot_h;
            svg.push_str(&format!(
                "<line x1=\"{0}\" y1=\"{2}\" x2=\"{1}\" y2=\"{2}\" stroke=\"#ddd\"/>\n",
                fmt(MARGIN_L),
                fmt(MARGIN_L + plot_w),
                fmt(py)
            ));
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
                fmt(MARGIN_L - 8.0),
                fmt(py + 4.0),
                format_args!("{v:.1}")
            ));
        }
    }
    // axis labels
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        fmt(MARGIN_L + plot_w / 2.0),
        fmt(HEIGHT - 15.0),
        layout.x_label
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>\n",
        fmt(MARGIN_T + plot_h / 2.0),
        fmt(MARGIN_T + plot_h / 2.0),
        layout.y_label
    ));
    // series
    let mut legend_y = MARGIN_T + 10.0;
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        if !s.points.is_empty() {
            let path: Vec<String> =
                s.points.iter().map(|&(x, y)| format!("{},{}", fmt(sx(x)), fmt(sy(y)))).collect();
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
                path.join(" "),
                color
            ));
            for &(x, y) in &s.points {
                svg.push_str(&format!(
                    "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{}\"/>\n",
                    fmt(sx(x)),
                    fmt(sy(y)),
                    color
                ));
            }
        }
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n",
            fmt(WIDTH - MARGIN_R + 10.0),
            fmt(legend_y - 10.0),
            color
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            fmt(WIDTH - MARGIN_R + 28.0),
            fmt(legend_y),
            s.label
        ));
        legend_y += 18.0;
    }
    svg.push_str("</svg>\n");
    svg
}
