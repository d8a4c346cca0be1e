use std::path::Path;

use plotters::prelude::*;

use super::aggregate::CurveAggregate;
use crate::error::{Error, Result};
use crate::eval::ConfusionOutputs;

/// Confusion entries below this mass are drawn white.
pub const ZERO_MASS: f64 = 1e-3;

const LINE_COLORS: [RGBColor; 8] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
    RGBColor(227, 119, 194),
    RGBColor(127, 127, 127),
];

fn plot_err<E: std::fmt::Display>(path: &Path) -> impl Fn(E) -> Error + '_ {
    move |e| Error::Value(format!("plotting {}: {e}", path.display()))
}

/// One line per aggregate with a shaded band of one standard error.
pub fn plot_curves(curves: &[CurveAggregate], title: &str, path: &Path) -> Result<()> {
    if curves.is_empty() || curves.iter().all(|c| c.episodes.is_empty()) {
        return Err(Error::MissingInput(format!("no curves to draw for {}", path.display())));
    }
    let err = plot_err(path);
    let x_max = curves.iter().flat_map(|c| c.episodes.iter()).copied().max().unwrap_or(1).max(1) as f64;
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in curves {
        for (m, s) in c.mean.iter().zip(&c.se) {
            y_min = y_min.min(m - s);
            y_max = y_max.max(m + s);
        }
    }
    if !(y_max > y_min) {
        y_min -= 1.0;
        y_max += 1.0;
    }
    let root = SVGBackend::new(path, (900, 560)).into_drawing_area();
    root.fill(&WHITE).map_err(&err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(56)
        .build_cartesian_2d(0f64..x_max, y_min..y_max)
        .map_err(&err)?;
    chart
        .configure_mesh()
        .x_desc("training episodes")
        .y_desc("mean greedy return")
        .draw()
        .map_err(&err)?;
    for (i, c) in curves.iter().enumerate() {
        let color = LINE_COLORS[i % LINE_COLORS.len()];
        let upper: Vec<(f64, f64)> = c.episodes.iter().zip(c.mean.iter().zip(&c.se)).map(|(e, (m, s))| (*e as f64, m + s)).collect();
        let lower: Vec<(f64, f64)> = c.episodes.iter().zip(c.mean.iter().zip(&c.se)).map(|(e, (m, s))| (*e as f64, m - s)).collect();
        let band: Vec<(f64, f64)> = upper.iter().copied().chain(lower.iter().rev().copied()).collect();
        chart
            .draw_series(std::iter::once(Polygon::new(band, color.mix(0.2).filled())))
            .map_err(&err)?;
        let label = if c.single_seed { format!("{} (single seed)", c.label) } else { c.label.clone() };
        chart
            .draw_series(LineSeries::new(
                c.episodes.iter().zip(&c.mean).map(|(e, m)| (*e as f64, *m)),
                color.stroke_width(2),
            ))
            .map_err(&err)?
            .label(label)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .position(SeriesLabelPosition::LowerRight)
        .draw()
        .map_err(&err)?;
    root.present().map_err(&err)?;
    Ok(())
}

/// Black to yellow through red for mass in `[ZERO_MASS, 1]`.
fn heat(v: f64) -> RGBColor {
    let t = v.clamp(0.0, 1.0).sqrt();
    let r = (t * 2.0).min(1.0);
    let g = (t * 2.0 - 1.0).max(0.0);
    RGBColor((r * 255.0) as u8, (g * 255.0) as u8, 0)
}

/// True-versus-predicted mass, classes ordered by room. Near-zero mass is
/// white and room boundaries are drawn in cyan.
pub fn plot_confusion(conf: &ConfusionOutputs, title: &str, path: &Path) -> Result<()> {
    let err = plot_err(path);
    let k = conf.classes;
    let order = conf.room_order();
    let cell = 6i32;
    let pad_top = 40;
    let pad_left = 20;
    let side = cell * k as i32;
    let root = SVGBackend::new(path, ((side + 2 * pad_left) as u32, (side + pad_top + 20) as u32)).into_drawing_area();
    root.fill(&WHITE).map_err(&err)?;
    root.draw(&Text::new(title.to_string(), (pad_left, 10), ("sans-serif", 18)))
        .map_err(&err)?;
    for (ri, &t) in order.iter().enumerate() {
        for (ci, &p) in order.iter().enumerate() {
            let v = conf.matrix[t * k + p];
            let color = if v < ZERO_MASS { WHITE } else { heat(v) };
            let x0 = pad_left + ci as i32 * cell;
            let y0 = pad_top + ri as i32 * cell;
            root.draw(&Rectangle::new([(x0, y0), (x0 + cell, y0 + cell)], color.filled()))
                .map_err(&err)?;
        }
    }
    let cyan = RGBColor(0, 255, 255);
    let mut boundary = 0;
    for room in 0..conf.rooms.saturating_sub(1) {
        boundary += order.iter().filter(|&&i| conf.class_rooms[i] == room).count() as i32;
        let at = boundary * cell;
        root.draw(&PathElement::new(
            vec![(pad_left + at, pad_top), (pad_left + at, pad_top + side)],
            cyan.stroke_width(2),
        ))
        .map_err(&err)?;
        root.draw(&PathElement::new(
            vec![(pad_left, pad_top + at), (pad_left + side, pad_top + at)],
            cyan.stroke_width(2),
        ))
        .map_err(&err)?;
    }
    root.draw(&Rectangle::new([(pad_left, pad_top), (pad_left + side, pad_top + side)], BLACK.stroke_width(1)))
        .map_err(&err)?;
    root.present().map_err(&err)?;
    Ok(())
}

pub fn curves_file(tag: &str) -> String {
    format!("curves_{tag}.svg")
}

pub fn beta_file(pi: &str) -> String {
    format!("beta_{pi}.svg")
}

pub fn confusion_file(variant: &str, mode: &str) -> String {
    format!("confusion_{variant}_{mode}.svg")
}

/// Colour class of a confusion entry, as drawn by [`plot_confusion`].
pub fn confusion_color(v: f64) -> (u8, u8, u8) {
    let c = if v < ZERO_MASS { WHITE } else { heat(v) };
    (c.0, c.1, c.2)
}
