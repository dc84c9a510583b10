use serde::Serialize;

use crate::error::{LabError, Result};

/// A finite set of control values. Points are scalars or small vectors;
/// every admissible control takes finitely many values, so exhaustive
/// enumeration over the set is always available.
#[derive(Debug, Clone, Serialize)]
pub struct ControlSet {
    points: Vec<Vec<f64>>,
    labels: Vec<String>,
}

impl ControlSet {
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        if points.is_empty() {
            return Err(LabError::InvalidControlSet("control set is empty".into()));
        }
        if points.len() != labels.len() {
            return Err(LabError::InvalidControlSet(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        let arity = points[0].len();
        if arity == 0 {
            return Err(LabError::InvalidControlSet("zero-arity control point".into()));
        }
        for p in &points {
            if p.len() != arity {
                return Err(LabError::InvalidControlSet(
                    "control points have mixed arity".into(),
                ));
            }
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if points[i] == points[j] {
                    return Err(LabError::InvalidControlSet(format!(
                        "duplicate control point {:?} (indices {i}, {j})",
                        points[i]
                    )));
                }
            }
        }
        Ok(ControlSet { points, labels })
    }

    /// Uniform scalar grid with `count` points on [min, max].
    pub fn scalar_grid(min: f64, max: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(LabError::InvalidControlSet("control set is empty".into()));
        }
        if count > 1 && (max.is_nan() || min.is_nan() || max <= min) {
            return Err(LabError::InvalidControlSet(format!(
                "scalar grid needs max > min, got [{min}, {max}]"
            )));
        }
        let points: Vec<Vec<f64>> = (0..count)
            .map(|i| {
                if count == 1 {
                    vec![0.5 * (min + max)]
                } else {
                    vec![min + (max - min) * i as f64 / (count - 1) as f64]
                }
            })
            .collect();
        let labels = points.iter().map(|p| format!("{:.6}", p[0])).collect();
        ControlSet::new(points, labels)
    }

    pub fn scalar_points(values: &[f64]) -> Result<Self> {
        let points: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
        let labels = values.iter().map(|v| format!("{v:.6}")).collect();
        ControlSet::new(points, labels)
    }

    pub fn singleton(value: f64) -> Self {
        ControlSet::scalar_points(&[value]).expect("singleton is always valid")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    /// Largest |component| over all points.
    pub fn max_abs(&self) -> f64 {
        self.points
            .iter()
            .flat_map(|p| p.iter())
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}
