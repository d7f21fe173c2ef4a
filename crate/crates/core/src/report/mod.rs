//! Static rendering of an analysis: SVG figures and one self-contained
//! HTML report. Every renderer is a pure function of its input, so equal
//! inputs give byte-equal output.
//!
//! Colours are fixed:
//!
//! | use                          | hex       |
//! |------------------------------|-----------|
//! | fingerprint exclusive        | `#2f6db5` |
//! | fingerprint shared           | `#e68fb4` |
//! | fingerprint unused           | `#d9d9d9` |
//! | universe class node          | `#444444` |
//! | universe specialist dark     | `#1b5e20` |
//! | universe specialist medium   | `#4caf50` |
//! | universe specialist light    | `#a5d6a7` |
//! | universe shared node         | `#e68fb4` |
//! | heatmap >0.90                | `#1a9850` |
//! | heatmap 0.80-0.90            | `#fdd835` |
//! | heatmap <0.80                | `#d73027` |
//! | frequency bars               | `#2f6db5` |

mod html;
mod svg;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use html::render_report;
pub use svg::{render_fingerprint, render_frequency_chart, render_heatmap, render_universe};

use crate::analysis::{AssociationMatrix, Role, TaxonomyAssignment, TippingPoint};
use crate::data::{DimensionId, LandCoverClass, N_CLASSES, N_DIMS};

pub const COLOR_EXCLUSIVE: &str = "#2f6db5";
pub const COLOR_SHARED: &str = "#e68fb4";
pub const COLOR_UNUSED: &str = "#d9d9d9";
pub const COLOR_CLASS_NODE: &str = "#444444";
pub const COLOR_DARK: &str = "#1b5e20";
pub const COLOR_MEDIUM: &str = "#4caf50";
pub const COLOR_LIGHT: &str = "#a5d6a7";
pub const COLOR_HIGH: &str = "#1a9850";
pub const COLOR_MID: &str = "#fdd835";
pub const COLOR_LOW: &str = "#d73027";
pub const COLOR_BAR: &str = "#2f6db5";

/// Radius of the class circle.
pub const UNIVERSE_RADIUS: f64 = 100.0;
/// Extra radius of specialist nodes beyond their class node.
pub const SPECIALIST_OFFSET: f64 = 18.0;
/// Angular step between fanned specialists of one class, in radians.
pub const FAN_STEP: f64 = 0.06;
/// The fan of one class spans at most this fraction of the angle between
/// neighbouring classes, which keeps every specialist nearest its class.
pub const FAN_SPAN: f64 = 0.4;

// ---------------------------------------------------------------------------
// Fingerprint grid

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellState {
    Exclusive,
    Shared,
    Unused,
}

impl CellState {
    pub fn color(self) -> &'static str {
        match self {
            CellState::Exclusive => COLOR_EXCLUSIVE,
            CellState::Shared => COLOR_SHARED,
            CellState::Unused => COLOR_UNUSED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintGrid {
    pub rows: Vec<LandCoverClass>,
    /// One 64-cell row per entry of `rows`.
    pub cells: Vec<Vec<CellState>>,
}

impl FingerprintGrid {
    pub fn all_unused() -> Self {
        FingerprintGrid {
            rows: LandCoverClass::ALL.to_vec(),
            cells: vec![vec![CellState::Unused; N_DIMS]; N_CLASSES],
        }
    }

    /// Rows for all eleven classes in canonical order. A cell is exclusive
    /// when the dimension is in the class's minimum subset and is a
    /// specialist, shared when it is in the subset with any other role.
    pub fn build(tipping_points: &[TippingPoint], taxonomy: &[TaxonomyAssignment]) -> Self {
        let mut grid = Self::all_unused();
        let role_of = |d: DimensionId| taxonomy.iter().find(|a| a.dimension == d).map(|a| a.role);
        for tp in tipping_points {
            let row = &mut grid.cells[tp.class.id()];
            for &d in &tp.minimum_subset {
                row[d.index()] = match role_of(d) {
                    Some(Role::Specialist) => CellState::Exclusive,
                    _ => CellState::Shared,
                };
            }
        }
        grid
    }

    pub fn used(&self, row: usize) -> usize {
        self.cells[row].iter().filter(|c| **c != CellState::Unused).count()
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().flatten().filter(|c| **c == state).count()
    }

    pub fn state(&self, class: LandCoverClass, dim: DimensionId) -> Option<CellState> {
        let row = self.rows.iter().position(|c| *c == class)?;
        Some(self.cells[row][dim.index()])
    }

    /// Reordered copy. Classes missing from a fixed list keep their
    /// relative order after the listed ones.
    pub fn ordered(&self, ordering: &RowOrdering) -> Self {
        let mut idx: Vec<usize> = (0..self.rows.len()).collect();
        match ordering {
            RowOrdering::SubsetSize => {
                // Rows without a subset go last.
                idx.sort_by_key(|&i| (self.used(i) == 0, self.used(i), self.rows[i]));
            }
            RowOrdering::Fixed(list) => {
                let pos = |c: LandCoverClass| list.iter().position(|l| *l == c).unwrap_or(list.len());
                idx.sort_by_key(|&i| (pos(self.rows[i]), self.rows[i]));
            }
        }
        FingerprintGrid {
            rows: idx.iter().map(|&i| self.rows[i]).collect(),
            cells: idx.iter().map(|&i| self.cells[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum RowOrdering {
    /// Ascending minimum-subset size.
    #[default]
    SubsetSize,
    Fixed(Vec<LandCoverClass>),
}

// ---------------------------------------------------------------------------
// Embedding universe

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shade {
    Dark,
    Medium,
    Light,
}

impl Shade {
    pub fn color(self) -> &'static str {
        match self {
            Shade::Dark => COLOR_DARK,
            Shade::Medium => COLOR_MEDIUM,
            Shade::Light => COLOR_LIGHT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassNode {
    pub class: LandCoverClass,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialistNode {
    pub dimension: DimensionId,
    pub class: LandCoverClass,
    pub x: f64,
    pub y: f64,
    pub shade: Shade,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedNode {
    pub dimension: DimensionId,
    pub classes: Vec<LandCoverClass>,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UniverseLayout {
    pub class_nodes: Vec<ClassNode>,
    pub specialist_nodes: Vec<SpecialistNode>,
    pub shared_nodes: Vec<SharedNode>,
}

pub fn class_position(class: LandCoverClass) -> (f64, f64) {
    let a = 2.0 * PI * class.id() as f64 / N_CLASSES as f64;
    (UNIVERSE_RADIUS * a.cos(), UNIVERSE_RADIUS * a.sin())
}

/// Tertile shades by descending score rank among `scores`, ties by
/// position.
fn tertiles(scores: &[f64]) -> Vec<Shade> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut shades = vec![Shade::Light; n];
    for (rank, &i) in order.iter().enumerate() {
        shades[i] = if 3 * rank < n {
            Shade::Dark
        } else if 3 * rank < 2 * n {
            Shade::Medium
        } else {
            Shade::Light
        };
    }
    shades
}

pub fn layout_universe(taxonomy: &[TaxonomyAssignment], matrix: &AssociationMatrix) -> UniverseLayout {
    let associated: Vec<_> = taxonomy.iter().filter(|a| !a.supporting_classes.is_empty()).collect();
    if associated.is_empty() {
        return UniverseLayout::default();
    }
    let class_nodes = LandCoverClass::ALL
        .iter()
        .map(|&class| {
            let (x, y) = class_position(class);
            ClassNode { class, x, y }
        })
        .collect();

    let score = |c: LandCoverClass, d: DimensionId| matrix.score(c, d).unwrap_or(0.0);
    let sep = 2.0 * PI / N_CLASSES as f64;
    let mut specialist_nodes = Vec::new();
    for &class in &LandCoverClass::ALL {
        // Shade thresholds come from every dimension associated with the class.
        let mine: Vec<_> = associated.iter().filter(|a| a.supporting_classes.contains(&class)).collect();
        let shades = tertiles(&mine.iter().map(|a| score(class, a.dimension)).collect::<Vec<_>>());
        let specialists: Vec<_> = mine
            .iter()
            .zip(shades)
            .filter(|(a, _)| a.role == Role::Specialist)
            .map(|(a, s)| (a.dimension, s))
            .collect();
        let m = specialists.len();
        let step = if m > 1 { FAN_STEP.min(FAN_SPAN * sep / (m - 1) as f64) } else { 0.0 };
        let base = sep * class.id() as f64;
        let r = UNIVERSE_RADIUS + SPECIALIST_OFFSET;
        for (j, (dimension, shade)) in specialists.into_iter().enumerate() {
            let a = base + (j as f64 - (m as f64 - 1.0) / 2.0) * step;
            specialist_nodes.push(SpecialistNode { dimension, class, x: r * a.cos(), y: r * a.sin(), shade });
        }
    }

    let shared_nodes = associated
        .iter()
        .filter(|a| a.supporting_classes.len() >= 2)
        .map(|a| {
            let n = a.supporting_classes.len() as f64;
            let (sx, sy) = a
                .supporting_classes
                .iter()
                .map(|&c| class_position(c))
                .fold((0.0, 0.0), |(x, y), (px, py)| (x + px, y + py));
            SharedNode { dimension: a.dimension, classes: a.supporting_classes.clone(), x: sx / n, y: sy / n }
        })
        .collect();

    UniverseLayout { class_nodes, specialist_nodes, shared_nodes }
}
