use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::activations::ActivationDataset;
use super::probe::ProbeModel;
use crate::env::{Cell, GridLayout};
use crate::error::{Error, Result};

/// Mean predicted probability mass per true position class.
///
/// Row `t` of `matrix` averages the probe's class distribution over every
/// dataset row whose true class is `t`, so present rows sum to one. Classes
/// absent from the dataset have all-zero rows and `present[t] == false`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionOutputs {
    pub classes: usize,
    /// `classes x classes`, row = true class, column = predicted class.
    pub matrix: Vec<f64>,
    pub present: Vec<bool>,
    /// Rows per true class.
    pub counts: Vec<usize>,
    /// Cell of every class.
    pub class_cells: Vec<Cell>,
    /// Room of every class (doors count towards the room on their right).
    pub class_rooms: Vec<usize>,
    pub rooms: usize,
    /// `rooms x rooms` count-weighted aggregation of `matrix`.
    pub room_matrix: Vec<f64>,
    pub grid_height: usize,
    pub grid_width: usize,
    /// Inclusive column span of every room, for drawing boundaries.
    pub room_column_spans: Vec<[usize; 2]>,
}

pub fn confusion_outputs(probe: &ProbeModel, data: &ActivationDataset, layout: &GridLayout) -> Result<ConfusionOutputs> {
    if probe.width != data.width {
        return Err(Error::Shape(format!(
            "probe expects width {}, activations have width {}",
            probe.width, data.width
        )));
    }
    let floor = layout.floor_cells();
    let k = probe.classes;
    if k != floor.len() {
        return Err(Error::Shape(format!(
            "probe has {k} classes, the layout has {} floor cells",
            floor.len()
        )));
    }
    let proba = probe.predict_proba(&data.features, data.rows())?;
    let mut matrix = vec![0.0; k * k];
    let mut counts = vec![0usize; k];
    for (i, &label) in data.labels.iter().enumerate() {
        let t = label as usize;
        if t >= k {
            return Err(Error::Value(format!("label {t} is outside {k} classes")));
        }
        counts[t] += 1;
        for (m, p) in matrix[t * k..(t + 1) * k].iter_mut().zip(&proba[i * k..(i + 1) * k]) {
            *m += p;
        }
    }
    for t in 0..k {
        if counts[t] > 0 {
            for m in &mut matrix[t * k..(t + 1) * k] {
                *m /= counts[t] as f64;
            }
        }
    }
    let class_rooms: Vec<usize> = floor
        .iter()
        .map(|c| layout.room_of(*c).expect("every floor cell has a room"))
        .collect();
    let rooms = layout.rooms();
    let mut room_matrix = vec![0.0; rooms * rooms];
    let mut room_rows = vec![0usize; rooms];
    for t in 0..k {
        let a = class_rooms[t];
        room_rows[a] += counts[t];
        for p in 0..k {
            room_matrix[a * rooms + class_rooms[p]] += counts[t] as f64 * matrix[t * k + p];
        }
    }
    for a in 0..rooms {
        if room_rows[a] > 0 {
            for v in &mut room_matrix[a * rooms..(a + 1) * rooms] {
                *v /= room_rows[a] as f64;
            }
        }
    }
    Ok(ConfusionOutputs {
        classes: k,
        matrix,
        present: counts.iter().map(|c| *c > 0).collect(),
        counts,
        class_cells: floor.to_vec(),
        class_rooms,
        rooms,
        room_matrix,
        grid_height: layout.height,
        grid_width: layout.width,
        room_column_spans: layout.room_column_spans.iter().map(|r| [*r.start(), *r.end()]).collect(),
    })
}

impl ConfusionOutputs {
    /// Predicted mass of true class `t` laid out on the maze grid
    /// (`grid_height x grid_width`, walls zero).
    pub fn grid_projection(&self, t: usize) -> Vec<f64> {
        let mut grid = vec![0.0; self.grid_height * self.grid_width];
        for (p, cell) in self.class_cells.iter().enumerate() {
            grid[cell.row * self.grid_width + cell.col] = self.matrix[t * self.classes + p];
        }
        grid
    }

    /// Count-weighted mean of the mass the probe puts in the true room.
    pub fn room_identification(&self) -> f64 {
        let total: usize = self.counts.iter().sum();
        if total == 0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for t in 0..self.classes {
            let room = self.class_rooms[t];
            let mass: f64 = (0..self.classes)
                .filter(|p| self.class_rooms[*p] == room)
                .map(|p| self.matrix[t * self.classes + p])
                .sum();
            acc += self.counts[t] as f64 * mass;
        }
        acc / total as f64
    }

    /// Class indices ordered by room, then row-major within the room.
    pub fn room_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.classes).collect();
        order.sort_by_key(|&i| (self.class_rooms[i], self.class_cells[i]));
        order
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
