//! Built-in scenes. The JSON files under `scenes/` are exported from these
//! builders (`cagetool scene export`).

use std::f64::consts::PI;

use crate::geometry::{Polygon, Pose2, Shape, Vec2};
use crate::scene::{
    Bounds, BoxBounds, EnergyField, FieldKind, Joint, ObjectConfig, ObjectModel, Plane, Scene, SimSpec, StaticBody,
    TaskSpec, ToolCandidate,
};

/// Mass of every fixture object (kg).
pub const MASS: f64 = 0.1;
/// Disk radius used by the cup fixtures (m).
pub const DISK_RADIUS: f64 = 0.1;
/// Wall height of the U-cup above the resting contact (m).
pub const CUP_WALL_HEIGHT: f64 = 0.1;
/// Opening between the lip tips of the two-wall cup (m).
pub const TWO_WALL_OPENING: f64 = 0.26;

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
    Polygon::rect(Vec2::new(x0, y0), Vec2::new(x1, y1)).expect("fixture rectangle")
}

fn shape(parts: Vec<Polygon>) -> Shape {
    Shape::new(parts, None).expect("fixture shape")
}

fn poly(pts: &[[f64; 2]]) -> Polygon {
    Polygon::new(pts.iter().map(|p| Vec2::from(*p)).collect()).expect("fixture polygon")
}

/// Reflects parts across the y axis, keeping counter-clockwise winding.
fn mirror_x(parts: Vec<Polygon>) -> Vec<Polygon> {
    parts
        .into_iter()
        .map(|p| {
            let verts = p.vertices().iter().rev().map(|v| Vec2::new(-v.x, v.y)).collect();
            Polygon::new(verts).expect("mirrored polygon")
        })
        .collect()
}

pub fn disk(radius: f64) -> Shape {
    Shape::single(Polygon::circumscribed_disk(Vec2::ZERO, radius, 16).expect("disk"))
}

/// Annulus as `n` convex trapezoids.
pub fn ring(r_in: f64, r_out: f64, n: usize) -> Shape {
    let parts = (0..n)
        .map(|k| {
            let a0 = 2.0 * PI * k as f64 / n as f64;
            let a1 = 2.0 * PI * (k + 1) as f64 / n as f64;
            let p = |r: f64, a: f64| [r * a.cos(), r * a.sin()];
            poly(&[p(r_in, a0), p(r_out, a0), p(r_out, a1), p(r_in, a1)])
        })
        .collect();
    Shape::new(parts, Some(Vec2::ZERO)).expect("ring")
}

fn floor(x0: f64, x1: f64) -> StaticBody {
    StaticBody { name: "floor".into(), shape: shape(vec![rect(x0, -0.1, x1, 0.0)]), pose: Pose2::IDENTITY }
}

fn region(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
    rect(x0, y0, x1, y1)
}

fn tool(id: usize, name: &str, parts: Vec<Polygon>, grasp: Pose2, reach: Polygon) -> ToolCandidate {
    ToolCandidate { id, name: name.into(), shape: shape(parts), grasp_offset: grasp, reachable_region: reach }
}

fn full_turn(lo: [f64; 2], hi: [f64; 2]) -> BoxBounds {
    BoxBounds::new(vec![lo[0], lo[1], -PI], vec![hi[0], hi[1], PI])
}

/// Open cup: base slab plus two walls rising `CUP_WALL_HEIGHT` above the
/// interior floor. Tool frame origin sits at the middle of the interior floor.
pub fn u_cup_parts() -> Vec<Polygon> {
    let h = CUP_WALL_HEIGHT;
    vec![rect(-0.2, -0.02, 0.2, 0.0), rect(-0.2, 0.0, -0.18, h), rect(0.18, 0.0, 0.2, h)]
}

pub fn flat_stick_parts() -> Vec<Polygon> {
    vec![rect(-0.2, -0.01, 0.2, 0.01)]
}

fn disk_task() -> TaskSpec {
    TaskSpec { duration: 4.0, tool_start: Pose2::new(-0.5, 0.02, 0.0), keyframe_phase: 0.5 }
}

/// Disk resting inside a U-cup that sits on the floor; the flat stick is
/// the second candidate. Escaping the cup lifts the disk by exactly the
/// wall height.
pub fn u_cup() -> Scene {
    let h_floor = 0.02;
    let start = ObjectConfig::new(0.0, h_floor + DISK_RADIUS, 0.0);
    let reach = region(-1.0, -0.2, 1.0, 1.0);
    Scene::build(
        "u_cup",
        ObjectModel::rigid(disk(DISK_RADIUS)),
        vec![
            tool(0, "u_cup", u_cup_parts(), Pose2::new(0.0, -0.02, 0.0), reach.clone()),
            tool(1, "flat_stick", flat_stick_parts(), Pose2::new(-0.2, 0.0, 0.0), reach),
        ],
        vec![floor(-1.0, 1.0)],
        EnergyField::gravity(MASS),
        Bounds {
            object: full_turn([-0.8, 0.0], [0.8, 0.6]),
            tool: BoxBounds::new(vec![-0.3, 0.0, -0.3], vec![0.3, 0.3, 0.3]),
            keyframe_object: Some(full_turn([-0.3, 0.0], [0.3, 0.4])),
        },
        start,
        ObjectConfig::new(0.25, 0.3, 0.0),
        vec![0.05, 0.05, PI],
        // the task starts with the disk already held in the cup
        TaskSpec { tool_start: u_cup_tool_pose(), ..disk_task() },
        SimSpec { friction: 0.3 * MASS * 9.81 },
    )
    .expect("u_cup fixture")
}

/// U-cup transport that starts with the cup tilted: the disk rests where it
/// settled in the tilted cup and has to be carried to the goal.
pub fn u_cup_pull() -> Scene {
    let mut s = u_cup();
    s.name = "u_cup_pull".into();
    s.bounds.tool = BoxBounds::new(vec![-0.3, 0.0, -0.4], vec![0.3, 0.3, 0.4]);
    s.task.tool_start = Pose2::new(0.0, 0.09, 0.35);
    let drop = s.task.tool_start.compose(&Pose2::new(0.0, 0.12, 0.0));
    let rest = crate::sim::settle(&s, &ObjectConfig::new(drop.x, drop.y, 0.0), &s.task.tool_start, 0, 5000)
        .expect("disk settles in the tilted cup");
    s.start = rest.config;
    s.validate().expect("u_cup_pull fixture");
    s
}

/// Cup pose that holds the U-cup fixture's start configuration.
pub fn u_cup_tool_pose() -> Pose2 {
    Pose2::new(0.0, 0.02, 0.0)
}

/// Disk enclosed by a closed square frame floating in space.
pub fn closed_ring() -> Scene {
    let frame = vec![
        rect(-0.2, -0.2, 0.2, -0.18),
        rect(-0.2, 0.18, 0.2, 0.2),
        rect(-0.2, -0.18, -0.18, 0.18),
        rect(0.18, -0.18, 0.2, 0.18),
    ];
    let reach = region(-1.0, -1.0, 1.0, 1.0);
    Scene::build(
        "closed_ring",
        ObjectModel::rigid(disk(DISK_RADIUS)),
        vec![tool(0, "frame", frame, Pose2::IDENTITY, reach)],
        vec![],
        EnergyField::gravity(MASS),
        Bounds {
            object: full_turn([-0.7, -0.7], [0.7, 0.7]),
            tool: BoxBounds::new(vec![-0.1, -0.1, -0.3], vec![0.1, 0.1, 0.3]),
            keyframe_object: None,
        },
        ObjectConfig::new(0.0, 0.0, 0.0),
        ObjectConfig::new(0.5, 0.5, 0.0),
        vec![0.05, 0.05, PI],
        disk_task(),
        SimSpec::default(),
    )
    .expect("closed_ring fixture")
}

/// Disk on an open floor with a stick lying beside it.
pub fn open_floor() -> Scene {
    let reach = region(-1.0, -0.2, 1.0, 1.0);
    Scene::build(
        "open_floor",
        ObjectModel::rigid(disk(DISK_RADIUS)),
        vec![tool(0, "flat_stick", flat_stick_parts(), Pose2::new(-0.2, 0.0, 0.0), reach)],
        vec![floor(-1.0, 1.0)],
        EnergyField::gravity(MASS),
        Bounds {
            object: full_turn([-0.9, 0.0], [0.9, 0.6]),
            tool: BoxBounds::new(vec![-0.5, 0.0, -0.3], vec![0.5, 0.3, 0.3]),
            keyframe_object: None,
        },
        ObjectConfig::new(0.0, DISK_RADIUS, 0.0),
        ObjectConfig::new(0.6, DISK_RADIUS, 0.0),
        vec![0.05, 0.05, PI],
        disk_task(),
        SimSpec::default(),
    )
    .expect("open_floor fixture")
}

/// Stick pose beside the open-floor disk.
pub fn open_floor_tool_pose() -> Pose2 {
    Pose2::new(0.35, 0.01, 0.0)
}

/// Cup whose walls close in to two lips with a `TWO_WALL_OPENING` gap.
pub fn two_wall_cup_parts() -> Vec<Polygon> {
    let half = TWO_WALL_OPENING / 2.0;
    vec![
        rect(-0.25, 0.0, 0.25, 0.03),
        rect(-0.25, 0.03, -0.22, 0.4),
        rect(0.22, 0.03, 0.25, 0.4),
        rect(-0.22, 0.37, -half, 0.4),
        rect(half, 0.37, 0.22, 0.4),
    ]
}

/// Clearance fixture: floating disk inside the lipped cup (candidate 0) or
/// beside a flat stick (candidate 1). No static environment.
pub fn two_wall_cup() -> Scene {
    let reach = region(-1.0, -1.0, 1.0, 1.0);
    Scene::build(
        "two_wall_cup",
        ObjectModel::rigid(disk(DISK_RADIUS)),
        vec![
            tool(0, "two_wall_cup", two_wall_cup_parts(), Pose2::IDENTITY, reach.clone()),
            tool(1, "flat_stick", flat_stick_parts(), Pose2::IDENTITY, reach),
        ],
        vec![],
        EnergyField::gravity(MASS),
        Bounds {
            object: full_turn([-0.7, -0.45], [0.7, 0.85]),
            tool: BoxBounds::new(vec![-0.1, -0.1, -0.3], vec![0.1, 0.1, 0.3]),
            keyframe_object: None,
        },
        ObjectConfig::new(0.0, 0.2, 0.0),
        ObjectConfig::new(0.6, 0.7, 0.0),
        vec![0.05, 0.05, PI],
        disk_task(),
        SimSpec::default(),
    )
    .expect("two_wall_cup fixture")
}

/// Tape-roll outer and inner radii (m).
pub const TAPE_OUTER: f64 = 0.06;
pub const TAPE_INNER: f64 = 0.045;

/// Cloth-hanger analog: an L with a straight pulling bar.
pub fn hanger_parts() -> Vec<Polygon> {
    vec![rect(-0.02, -0.4, 0.0, 0.02), rect(0.0, 0.0, 0.24, 0.02)]
}

/// Umbrella analog: shaft, top bar and a down-turned lip forming a J.
pub fn umbrella_parts() -> Vec<Polygon> {
    vec![rect(-0.02, -0.4, 0.0, 0.04), rect(0.0, 0.02, 0.22, 0.04), rect(0.2, -0.07, 0.22, 0.02)]
}

/// Mug-tree analog seen from above: trunk with four short branches.
pub fn mugtree_parts() -> Vec<Polygon> {
    vec![
        rect(-0.01, -0.01, 0.01, 0.01),
        rect(0.01, -0.004, 0.025, 0.004),
        rect(-0.025, -0.004, -0.01, 0.004),
        rect(-0.004, 0.01, 0.004, 0.025),
        rect(-0.004, -0.025, 0.004, -0.01),
    ]
}

fn tape_pull_with(name: &str, workspace_top: f64) -> Scene {
    let reach = region(-0.6, -0.5, 0.6, workspace_top);
    let mut field = EnergyField::gravity(MASS);
    field.kind = FieldKind::GravityPush;
    field.f_p = 0.3;
    // energy grows toward the robot: pulling works against the field
    field.v_hat = Vec2::new(0.0, -1.0);
    field.plane = Some(Plane::Horizontal);
    Scene::build(
        name,
        ObjectModel::rigid(ring(TAPE_INNER, TAPE_OUTER, 16)),
        vec![
            tool(0, "cloth_hanger", hanger_parts(), Pose2::new(-0.01, -0.4, 0.0), reach.clone()),
            tool(1, "umbrella", umbrella_parts(), Pose2::new(-0.01, -0.4, 0.0), reach.clone()),
            tool(2, "mugtree", mugtree_parts(), Pose2::IDENTITY, reach),
        ],
        vec![],
        field,
        Bounds {
            object: full_turn([-0.6, 0.0], [0.6, 1.1]),
            tool: BoxBounds::new(vec![-0.15, 0.6, -0.2], vec![0.15, 0.9, 0.2]),
            keyframe_object: Some(full_turn([-0.02, 0.73], [0.02, 0.77])),
        },
        ObjectConfig::new(0.0, 0.75, 0.0),
        ObjectConfig::new(0.0, 0.3, 0.0),
        vec![0.05, 0.05, PI],
        TaskSpec { duration: 6.0, tool_start: Pose2::new(-0.25, 0.55, 0.0), keyframe_phase: 0.5 },
        SimSpec { friction: 0.4 },
    )
    .expect("tape_pull fixture")
}

/// Tape pulling analog on a table (top view): every tool can reach the tape.
pub fn tape_pull() -> Scene {
    tape_pull_with("tape_pull", 1.2)
}

/// Tape pulling with the real workspace limit: only long-handled tools reach
/// the tape.
pub fn tape_pull_constrained() -> Scene {
    tape_pull_with("tape_pull_constrained", 0.45)
}

// Scooping tools have the blade tip at the origin pointing +x and the
// handle running toward -x.

/// Fish-slice analog: thin wedge blade, no rim.
pub fn fish_slice_parts() -> Vec<Polygon> {
    mirror_x(vec![poly(&[[0.0, 0.0], [0.22, 0.0], [0.22, 0.012], [0.02, 0.012]]), rect(0.22, 0.0, 0.5, 0.012)])
}

/// Wide shovel analog: long blade with a low back rim.
pub fn wide_shovel_parts() -> Vec<Polygon> {
    mirror_x(vec![
        poly(&[[0.0, 0.0], [0.26, 0.0], [0.26, 0.012], [0.02, 0.012]]),
        rect(0.26, 0.0, 0.3, 0.04),
        rect(0.3, 0.0, 0.55, 0.012),
    ])
}

/// Shovel analog: wedge blade between a tall back wall and a raised front
/// lip.
pub fn shovel_parts() -> Vec<Polygon> {
    mirror_x(vec![
        poly(&[[0.0, 0.0], [0.03, 0.0], [0.03, 0.035], [0.022, 0.035]]),
        rect(0.03, 0.0, 0.22, 0.012),
        rect(0.22, 0.0, 0.24, 0.1),
        rect(0.24, 0.0, 0.5, 0.012),
    ])
}

/// Fish body (base link) and tail (second link hinged at the body's left end).
pub fn fish() -> ObjectModel {
    let body = shape(vec![rect(0.0, 0.0, 0.12, 0.03)]);
    let tail = shape(vec![rect(-0.07, 0.0, 0.0, 0.022)]);
    ObjectModel { links: vec![body, tail], joint: Some(Joint { anchor: Vec2::new(0.0, 0.0), limits: [-0.8, 0.8] }) }
}

/// Fish scooping analog (vertical plane): a two-link elastic fish lies on
/// the floor against a block; tools are held by their handle end.
pub fn scoop() -> Scene {
    let mut field = EnergyField::gravity(MASS);
    field.kind = FieldKind::GravityElastic;
    field.k = 0.2;
    let reach = region(-1.5, -0.1, 1.0, 0.8);
    let grasp = Pose2::new(-0.5, 0.006, 0.0);
    let block = StaticBody {
        name: "block".into(),
        shape: shape(vec![rect(0.0, 0.0, 0.1, 0.12)]),
        pose: Pose2::new(0.3, 0.0, 0.0),
    };
    Scene::build(
        "scoop",
        fish(),
        vec![
            tool(0, "fish_slice", fish_slice_parts(), grasp, reach.clone()),
            tool(1, "wide_shovel", wide_shovel_parts(), grasp, reach.clone()),
            tool(2, "shovel", shovel_parts(), grasp, reach),
        ],
        vec![floor(-1.3, 0.8), block],
        field,
        Bounds {
            object: BoxBounds::new(vec![-1.0, 0.0, -PI, -0.8], vec![0.3, 0.6, PI, 0.8]),
            tool: BoxBounds::new(vec![-0.45, 0.0, -0.4], vec![0.25, 0.35, 0.4]),
            keyframe_object: Some(BoxBounds::new(vec![-0.3, 0.0, -0.5, -0.8], vec![0.3, 0.4, 0.5, 0.8])),
        },
        ObjectConfig::with_alpha(0.17, 0.0, 0.0, 0.0),
        ObjectConfig::with_alpha(0.0, 0.3, 0.0, 0.0),
        vec![0.25, 0.08, 0.6, 0.8],
        TaskSpec { duration: 6.0, tool_start: Pose2::new(-0.35, 0.002, 0.0), keyframe_phase: 0.5 },
        SimSpec { friction: 0.3 * MASS * 9.81 },
    )
    .expect("scoop fixture")
}

/// Scooping after the blade is under the fish: the fish starts settled in
/// the shovel's pocket, which rests on the floor, and has to be lifted.
pub fn scoop_lift() -> Scene {
    let mut s = scoop();
    s.name = "scoop_lift".into();
    s.task.tool_start = Pose2::new(0.1, 0.002, 0.0);
    let drop = ObjectConfig::with_alpha(-0.05, 0.04, 0.0, 0.0);
    let rest = crate::sim::settle(&s, &drop, &s.task.tool_start, 2, 5000).expect("fish settles on the shovel");
    s.start = rest.config;
    s.validate().expect("scoop_lift fixture");
    s
}

/// Scissors analog: ring handle with a hinged blade.
pub fn scissors() -> ObjectModel {
    let handle = ring(0.025, 0.035, 12);
    let blade = shape(vec![poly(&[[0.0, -0.006], [0.14, -0.002], [0.14, 0.002], [0.0, 0.006]])]);
    ObjectModel {
        links: vec![handle, blade],
        joint: Some(Joint { anchor: Vec2::new(0.035, 0.0), limits: [-0.6, 0.6] }),
    }
}

/// Hanging analog (vertical plane): drop the scissors onto one of three
/// hooks mounted on a wall.
pub fn hang() -> Scene {
    let reach = region(-0.6, -0.2, 0.6, 0.9);
    let wall_mount = Pose2::new(-0.5, 0.0, 0.0);
    let coat = vec![rect(-0.1, -0.01, 0.0, 0.01), rect(0.0, -0.01, 0.012, 0.03)];
    let slatwall = vec![rect(-0.12, -0.01, 0.0, 0.01), poly(&[[0.0, -0.01], [0.02, 0.02], [0.01, 0.03], [0.0, 0.01]])];
    let treble = vec![rect(-0.1, -0.01, 0.0, 0.01), rect(0.0, -0.01, 0.012, 0.045), rect(-0.05, 0.01, -0.038, 0.04)];
    Scene::build(
        "hang",
        scissors(),
        vec![
            tool(0, "coat_hook", coat, wall_mount, reach.clone()),
            tool(1, "slatwall_hook", slatwall, wall_mount, reach.clone()),
            tool(2, "treble_hook", treble, wall_mount, reach),
        ],
        vec![floor(-0.8, 0.8)],
        EnergyField::gravity(MASS),
        Bounds {
            object: BoxBounds::new(vec![-0.6, 0.0, -PI, -0.6], vec![0.6, 0.9, PI, 0.6]),
            tool: BoxBounds::new(vec![-0.05, 0.45, -0.2], vec![0.05, 0.55, 0.2]),
            keyframe_object: Some(BoxBounds::new(vec![-0.15, 0.35, -PI, -0.6], vec![0.15, 0.65, PI, 0.6])),
        },
        ObjectConfig::with_alpha(0.3, 0.035, 0.0, 0.0),
        ObjectConfig::with_alpha(0.0, 0.5, -PI / 2.0, 0.0),
        vec![0.1, 0.1, PI, 0.6],
        TaskSpec { duration: 4.0, tool_start: Pose2::new(0.0, 0.5, 0.0), keyframe_phase: 1.0 },
        SimSpec { friction: 0.2 * MASS * 9.81 },
    )
    .expect("hang fixture")
}

/// Fixture scenes shipped as JSON files.
pub fn shipped() -> Vec<(&'static str, Scene)> {
    vec![
        ("tape_pull.json", tape_pull()),
        ("tape_pull_constrained.json", tape_pull_constrained()),
        ("scoop.json", scoop()),
        ("scoop_lift.json", scoop_lift()),
        ("hang.json", hang()),
        ("u_cup.json", u_cup()),
        ("u_cup_pull.json", u_cup_pull()),
        ("closed_ring.json", closed_ring()),
        ("open_floor.json", open_floor()),
        ("two_wall_cup.json", two_wall_cup()),
    ]
}

pub fn all() -> Vec<Scene> {
    shipped().into_iter().map(|(_, s)| s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_starts_are_free() {
        for s in all() {
            assert!(!s.object_collides_statics(&s.start), "{}", s.name);
        }
        let cup = u_cup();
        assert!(cup.free(&cup.start, &u_cup_tool_pose(), 0));
        let two = two_wall_cup();
        assert!(two.free(&two.start, &Pose2::IDENTITY, 0));
    }

    #[test]
    fn u_cup_disk_rests_on_interior_floor() {
        let s = u_cup();
        let obj = s.place_object(&s.start);
        let cup = s.place_tool(0, &u_cup_tool_pose());
        assert!(obj.distance(&cup) < 1e-12);
        assert!(!obj.collides(&cup));
    }

    #[test]
    fn tilted_cup_holds_the_disk_less_firmly() {
        use crate::escape::{oracle_mee, EscapeQuery};
        let s = u_cup_pull();
        let t = s.task.tool_start;
        assert!(s.free(&s.start, &t, 0) && !s.tool_hits_statics(&t, 0));
        let g = [0.01, 0.01, 0.1];
        let tilted = oracle_mee(&EscapeQuery::new(&s, 0, t, s.start), &g).unwrap().q_mee.unwrap();
        let up = u_cup();
        let upright = oracle_mee(&EscapeQuery::new(&up, 0, u_cup_tool_pose(), up.start), &g).unwrap().q_mee.unwrap();
        assert!(tilted < 0.8 * upright, "tilted {tilted} upright {upright}");
    }

    #[test]
    fn lifted_fish_lies_in_the_shovel() {
        let s = scoop_lift();
        let t = s.task.tool_start;
        assert!(s.free(&s.start, &t, 2) && !s.tool_hits_statics(&t, 2));
        assert!(s.start.pose.y > 0.01 && s.start.pose.y < 0.03, "{:?}", s.start);
    }

    #[test]
    fn tape_hole_fits_mugtree() {
        let s = tape_pull();
        let peg = Pose2::new(0.0, 0.75, 0.3);
        assert!(s.free(&s.start, &peg, 2));
    }
}
