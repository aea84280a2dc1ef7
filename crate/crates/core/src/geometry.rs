//! Shell and spine geometry.
//!
//! The robot is a sphere with 14 radial spines: six on the coordinate axes
//! and eight through the octant centers. Spine ids are fixed:
//!
//! | id    | direction                                  | kind   |
//! |-------|--------------------------------------------|--------|
//! | 0..=5 | +x, -x, +y, -y, +z, -z                     | axis   |
//! | 6..=13| (±1,±1,±1)/√3, signs in lexicographic order (`-` before `+`) | octant |
//!
//! All lengths inside the simulator are meters; extensions cross the API in
//! millimeters, matching the actuator.

use std::sync::OnceLock;

use nalgebra::{UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::actuator::STROKE_MM;
use crate::error::{Error, Result};

pub const SPINE_COUNT: usize = 14;

/// Default shell diameter in millimeters.
pub const SHELL_DIAMETER_MM: f64 = 130.0;

/// Id of the spine pointing along body -z.
pub const DOWN_SPINE: usize = 5;

const ADJACENCY_TOL_RAD: f64 = 1e-9;
const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellGeometry {
    diameter_mm: f64,
}

impl ShellGeometry {
    pub fn new(diameter_mm: f64) -> Result<Self> {
        if !(diameter_mm > 0.0 && diameter_mm.is_finite()) {
            return Err(Error::Domain(format!("shell diameter must be positive, got {diameter_mm}")));
        }
        Ok(Self { diameter_mm })
    }

    pub fn diameter_mm(&self) -> f64 {
        self.diameter_mm
    }

    pub fn radius_mm(&self) -> f64 {
        self.diameter_mm / 2.0
    }

    pub fn radius_m(&self) -> f64 {
        self.radius_mm() * 1e-3
    }
}

impl Default for ShellGeometry {
    fn default() -> Self {
        Self { diameter_mm: SHELL_DIAMETER_MM }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SpineKind {
    Axis,
    Octant,
}

/// The 14 body-frame spine directions with their neighbor graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SpineLayout {
    directions: [Vector3<f64>; SPINE_COUNT],
    kinds: [SpineKind; SPINE_COUNT],
    adjacency: Vec<Vec<usize>>,
}

impl SpineLayout {
    fn build() -> Self {
        let mut directions = [Vector3::zeros(); SPINE_COUNT];
        let mut kinds = [SpineKind::Axis; SPINE_COUNT];
        let axes = [
            Vector3::x(),
            -Vector3::x(),
            Vector3::y(),
            -Vector3::y(),
            Vector3::z(),
            -Vector3::z(),
        ];
        directions[..6].copy_from_slice(&axes);

        let inv_sqrt3 = 1.0 / 3f64.sqrt();
        let mut id = 6;
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    directions[id] = Vector3::new(sx * inv_sqrt3, sy * inv_sqrt3, sz * inv_sqrt3);
                    kinds[id] = SpineKind::Octant;
                    id += 1;
                }
            }
        }

        let axis_octant = (1.0 / 3f64.sqrt()).acos();
        let octant_octant = (1.0f64 / 3.0).acos();
        let adjacency = (0..SPINE_COUNT)
            .map(|i| {
                (0..SPINE_COUNT)
                    .filter(|&j| {
                        if i == j {
                            return false;
                        }
                        let angle = angle_between(&directions[i], &directions[j]);
                        let expected = match (kinds[i], kinds[j]) {
                            (SpineKind::Axis, SpineKind::Axis) => return false,
                            (SpineKind::Octant, SpineKind::Octant) => octant_octant,
                            _ => axis_octant,
                        };
                        (angle - expected).abs() < ADJACENCY_TOL_RAD
                    })
                    .collect()
            })
            .collect();

        Self { directions, kinds, adjacency }
    }

    pub fn direction(&self, spine: usize) -> Vector3<f64> {
        self.directions[spine]
    }

    pub fn directions(&self) -> &[Vector3<f64>; SPINE_COUNT] {
        &self.directions
    }

    pub fn kind(&self, spine: usize) -> SpineKind {
        self.kinds[spine]
    }

    pub fn neighbors(&self, spine: usize) -> &[usize] {
        &self.adjacency[spine]
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].contains(&b)
    }

    /// Id of the spine whose body direction is `-d`.
    pub fn antipode(&self, spine: usize) -> usize {
        let d = self.directions[spine];
        (0..SPINE_COUNT)
            .find(|&j| (self.directions[j] + d).norm() < 1e-12)
            .expect("layout is closed under negation")
    }

    /// World-frame direction of a spine for the given pose.
    pub fn world_direction(&self, pose: &Pose, spine: usize) -> Vector3<f64> {
        pose.orientation * self.directions[spine]
    }
}

/// Canonical layout; built once and shared.
/// Human-readable listing of the spine directions and their neighbors.
pub fn layout_table() -> String {
    let layout = spine_layout();
    let mut out = String::from("id  kind    direction                     neighbors\n");
    for id in 0..SPINE_COUNT {
        let d = layout.direction(id);
        let kind = match layout.kind(id) {
            SpineKind::Axis => "AXIS",
            SpineKind::Octant => "OCTANT",
        };
        let neighbors: Vec<String> = layout.neighbors(id).iter().map(|n| n.to_string()).collect();
        out.push_str(&format!(
            "{id:>2}  {kind:<6}  ({:>7.4}, {:>7.4}, {:>7.4})  {}\n",
            d.x + 0.0,
            d.y + 0.0,
            d.z + 0.0,
            neighbors.join(" ")
        ));
    }
    out
}

pub fn spine_layout() -> &'static SpineLayout {
    static LAYOUT: OnceLock<SpineLayout> = OnceLock::new();
    LAYOUT.get_or_init(SpineLayout::build)
}

pub fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    // atan2 form stays accurate near 0 and π, unlike acos of the dot product.
    a.cross(b).norm().atan2(a.dot(b))
}

/// Rigid-body pose: geometric center position (world, m) and body→world rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self { position, orientation }
    }

    pub fn at(position: Vector3<f64>) -> Self {
        Self { position, orientation: UnitQuaternion::identity() }
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::at(Vector3::zeros())
    }
}

fn check_spine(spine: usize) -> Result<()> {
    if spine >= SPINE_COUNT {
        return Err(Error::Domain(format!("spine id {spine} out of range 0..{SPINE_COUNT}")));
    }
    Ok(())
}

/// World position (m) of a spine tip. A retracted spine sits flush with the shell.
pub fn tip_position(
    pose: &Pose,
    layout: &SpineLayout,
    shell: &ShellGeometry,
    spine: usize,
    extension_mm: f64,
) -> Result<Vector3<f64>> {
    check_spine(spine)?;
    if !(0.0..=STROKE_MM).contains(&extension_mm) {
        return Err(Error::Domain(format!(
            "extension {extension_mm} mm outside [0, {STROKE_MM}]"
        )));
    }
    let reach_m = shell.radius_m() + extension_mm * 1e-3;
    Ok(pose.position + layout.world_direction(pose, spine) * reach_m)
}

/// The spine pointing most nearly straight down; ties go to the lowest id.
pub fn ground_spine(pose: &Pose, layout: &SpineLayout) -> usize {
    let mut best = 0;
    let mut best_z = f64::INFINITY;
    for spine in 0..SPINE_COUNT {
        let z = layout.world_direction(pose, spine).z;
        if z < best_z - TIE_TOL {
            best = spine;
            best_z = z;
        }
    }
    best
}

/// The four neighbors of the ground spine that point most downward, sorted by azimuth.
pub fn support_candidates(pose: &Pose, layout: &SpineLayout) -> [usize; 4] {
    let ground = ground_spine(pose, layout);
    let mut neighbors: Vec<(usize, f64)> = layout
        .neighbors(ground)
        .iter()
        .map(|&id| (id, layout.world_direction(pose, id).z))
        .collect();
    neighbors.sort_by(|a, b| {
        if (a.1 - b.1).abs() < TIE_TOL {
            a.0.cmp(&b.0)
        } else {
            a.1.total_cmp(&b.1)
        }
    });
    let mut chosen: Vec<(usize, f64)> = neighbors
        .into_iter()
        .take(4)
        .map(|(id, _)| {
            let d = layout.world_direction(pose, id);
            (id, d.y.atan2(d.x))
        })
        .collect();
    chosen.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    [chosen[0].0, chosen[1].0, chosen[2].0, chosen[3].0]
}

/// Horizontal (world xy) part of a spine's world direction.
pub fn horizontal_direction(pose: &Pose, layout: &SpineLayout, spine: usize) -> Vector2<f64> {
    let d = layout.world_direction(pose, spine);
    Vector2::new(d.x, d.y)
}
