use super::*;
use crate::abstraction::{build_abstraction, AbstractionKind};
use crate::filters::{apply_filter, ColorSel, FilterExpr, FilterLeaf};

fn g(rows: &[&[u8]]) -> Grid {
    Grid::from_rows(rows).unwrap()
}

fn c(v: u8) -> Color {
    Color::new(v).unwrap()
}

fn color_filter(v: u8) -> FilterExpr {
    FilterExpr::Leaf(FilterLeaf::ByColor {
        color: ColorSel::Exact(c(v)),
    })
}

fn run_with(
    kind: AbstractionKind,
    filter: &FilterExpr,
    call: PrimitiveCall,
    rows: &[&[u8]],
) -> Grid {
    let graph = build_abstraction(&g(rows), kind);
    let sel = apply_filter(filter, &graph);
    apply_primitive(&call, &graph, &sel).unwrap().to_grid()
}

fn run(call: PrimitiveCall, rows: &[&[u8]]) -> Grid {
    run_with(AbstractionKind::SameColor4, &FilterExpr::All, call, rows)
}

#[test]
fn update_color_recolors_selection_only() {
    let graph = build_abstraction(&g(&[&[2, 0, 3]]), AbstractionKind::SameColor4);
    let sel = apply_filter(&color_filter(2), &graph);
    let out = apply_primitive(&PrimitiveCall::UpdateColor { color: c(3) }, &graph, &sel).unwrap();
    assert_eq!(out.nodes[0].color, c(3));
    assert_eq!(out.nodes[0].pixels.len(), graph.nodes[0].pixels.len());
    assert_eq!(out.to_grid(), g(&[&[3, 0, 3]]));
    assert_eq!(
        run_with(
            AbstractionKind::SameColor4,
            &color_filter(2),
            PrimitiveCall::UpdateColor { color: c(3) },
            &[&[2, 0, 2]]
        ),
        g(&[&[3, 0, 3]])
    );
}

#[test]
fn move_node_one_step() {
    assert_eq!(
        run(
            PrimitiveCall::MoveNode {
                direction: Direction::Right
            },
            &[&[1, 0, 0]]
        ),
        g(&[&[0, 1, 0]])
    );
    assert_eq!(
        run(
            PrimitiveCall::MoveNode {
                direction: Direction::DownRight
            },
            &[&[1, 0], &[0, 0]]
        ),
        g(&[&[0, 0], &[0, 1]])
    );
}

#[test]
fn move_node_max_stops_at_contact() {
    assert_eq!(
        run_with(
            AbstractionKind::SameColor4,
            &color_filter(1),
            PrimitiveCall::MoveNodeMax {
                direction: Direction::Right
            },
            &[&[1, 0, 0, 2]]
        ),
        g(&[&[0, 0, 1, 2]])
    );
    assert_eq!(
        run(
            PrimitiveCall::MoveNodeMax {
                direction: Direction::Down
            },
            &[&[1], &[0], &[0]]
        ),
        g(&[&[0], &[0], &[1]])
    );
}

#[test]
fn extend_node_draws_ray_until_obstacle() {
    assert_eq!(
        run_with(
            AbstractionKind::SameColor4,
            &color_filter(1),
            PrimitiveCall::ExtendNode {
                direction: Direction::Down
            },
            &[&[1, 0], &[0, 0], &[2, 0], &[0, 0]]
        ),
        g(&[&[1, 0], &[1, 0], &[2, 0], &[0, 0]])
    );
}

#[test]
fn rotate_node_matches_patch_rotation() {
    let patch = g(&[&[1, 1], &[1, 0]]);
    let expect = rotate_grid(&patch, Angle::Deg90);
    assert_eq!(expect, g(&[&[1, 1], &[0, 1]]));
    assert_eq!(
        run(
            PrimitiveCall::RotateNode {
                angle: Angle::Deg90
            },
            &[&[1, 1], &[1, 0]]
        ),
        expect
    );
}

#[test]
fn add_border_frames_bbox() {
    assert_eq!(
        run(
            PrimitiveCall::AddBorder { color: c(2) },
            &[&[0, 0, 0], &[0, 1, 0], &[0, 0, 0]]
        ),
        g(&[&[2, 2, 2], &[2, 1, 2], &[2, 2, 2]])
    );
}

#[test]
fn fill_rectangle_paints_enclosed_background() {
    assert_eq!(
        run(
            PrimitiveCall::FillRectangle { color: c(4) },
            &[&[1, 1, 1], &[1, 0, 1], &[1, 1, 1]]
        ),
        g(&[&[1, 1, 1], &[1, 4, 1], &[1, 1, 1]])
    );
}

#[test]
fn hollow_rectangle_clears_interior() {
    assert_eq!(
        run(
            PrimitiveCall::HollowRectangle { color: c(0) },
            &[&[5, 5, 5, 0], &[5, 5, 5, 0], &[5, 5, 5, 0]]
        ),
        g(&[&[5, 5, 5, 0], &[5, 0, 5, 0], &[5, 5, 5, 0]])
    );
}

#[test]
fn mirror_node_adds_reflected_copy() {
    assert_eq!(
        run(
            PrimitiveCall::MirrorNode {
                direction: Direction::Right
            },
            &[&[1, 1, 0, 0], &[1, 0, 0, 0]]
        ),
        g(&[&[1, 1, 1, 1], &[1, 0, 0, 1]])
    );
}

#[test]
fn flip_node_reflects_in_place() {
    assert_eq!(
        run(
            PrimitiveCall::FlipNode {
                axis: Axis::Vertical
            },
            &[&[1, 1, 0], &[1, 0, 0]]
        ),
        g(&[&[1, 1, 0], &[0, 1, 0]])
    );
    assert_eq!(
        run(
            PrimitiveCall::FlipNode {
                axis: Axis::Horizontal
            },
            &[&[1, 1, 0], &[1, 0, 0]]
        ),
        g(&[&[1, 0, 0], &[1, 1, 0]])
    );
}

#[test]
fn insert_node_copies_to_corner() {
    let graph = build_abstraction(&g(&[&[3, 0, 0], &[0, 0, 0]]), AbstractionKind::SameColor4);
    let out = apply_primitive(
        &PrimitiveCall::InsertNode {
            anchor: Anchor::BottomRight,
        },
        &graph,
        &[0],
    )
    .unwrap();
    assert_eq!(out.nodes.len(), 2);
    assert_eq!(out.to_grid(), g(&[&[3, 0, 0], &[0, 0, 3]]));
}

#[test]
fn remove_node_drops_selection() {
    assert_eq!(
        run_with(
            AbstractionKind::SameColor4,
            &color_filter(1),
            PrimitiveCall::RemoveNode {},
            &[&[1, 0, 2]]
        ),
        g(&[&[0, 0, 2]])
    );
}

#[test]
fn extract_crops_to_selection() {
    assert_eq!(
        run_with(
            AbstractionKind::MultiColor4,
            &FilterExpr::All,
            PrimitiveCall::Extract {},
            &[&[0, 0, 0, 0], &[0, 1, 2, 0], &[0, 1, 1, 0]]
        ),
        g(&[&[1, 2], &[1, 1]])
    );
}

#[test]
fn duplicate_tiles_along_axis() {
    assert_eq!(
        run(
            PrimitiveCall::Duplicate {
                axis: Axis::Horizontal,
                count: 3
            },
            &[&[5]]
        ),
        g(&[&[5, 5, 5]])
    );
    assert_eq!(
        run(
            PrimitiveCall::Duplicate {
                axis: Axis::Vertical,
                count: 2
            },
            &[&[1, 2]]
        ),
        g(&[&[1, 2], &[1, 2]])
    );
}

#[test]
fn upscale_expands_pixels() {
    assert_eq!(
        run(
            PrimitiveCall::UpscaleGrid { factor: 2 },
            &[&[1, 2], &[3, 4]]
        ),
        g(&[&[1, 1, 2, 2], &[1, 1, 2, 2], &[3, 3, 4, 4], &[3, 3, 4, 4]])
    );
}

#[test]
fn fill_paints_whole_bbox() {
    assert_eq!(
        run_with(
            AbstractionKind::SameColor8,
            &FilterExpr::All,
            PrimitiveCall::Fill { color: c(6) },
            &[&[1, 0], &[0, 1]]
        ),
        g(&[&[6, 6], &[6, 6]])
    );
}

/// Moves one pixel a unit at a time until the next cell is blocked.
fn step_until_contact(grid: &Grid, from: (i32, i32), d: (i32, i32)) -> (i32, i32) {
    let mut at = from;
    while grid.at(at.0 + d.0, at.1 + d.1) == Some(Color::BLACK) {
        at = (at.0 + d.0, at.1 + d.1);
    }
    at
}

#[test]
fn magnet_pulls_pixels_to_border() {
    let start = g(&[&[1], &[0], &[0]]);
    let landing = step_until_contact(&start, (0, 0), (1, 0));
    assert_eq!(landing, (2, 0));
    assert_eq!(
        run(
            PrimitiveCall::Magnet {
                direction: Direction::Down
            },
            &[&[1], &[0], &[0]]
        ),
        g(&[&[0], &[0], &[1]])
    );
    // pixels move individually and stack
    assert_eq!(
        run(
            PrimitiveCall::Magnet {
                direction: Direction::Down
            },
            &[&[1, 1], &[0, 1], &[0, 0]]
        ),
        g(&[&[0, 0], &[0, 1], &[1, 1]])
    );
    // stops against an unselected node
    assert_eq!(
        run_with(
            AbstractionKind::SameColor4,
            &color_filter(1),
            PrimitiveCall::Magnet {
                direction: Direction::Down
            },
            &[&[1], &[0], &[0], &[2]]
        ),
        g(&[&[0], &[0], &[1], &[2]])
    );
}

#[test]
fn beam_shoots_from_bbox_edge() {
    assert_eq!(
        run(
            PrimitiveCall::Beam {
                direction: Direction::Right,
                color: c(3)
            },
            &[&[1, 0, 0], &[0, 0, 0]]
        ),
        g(&[&[1, 3, 3], &[0, 0, 0]])
    );
    assert_eq!(
        run_with(
            AbstractionKind::SameColor4,
            &color_filter(1),
            PrimitiveCall::Beam {
                direction: Direction::Right,
                color: c(3)
            },
            &[&[1, 0, 2, 0]]
        ),
        g(&[&[1, 3, 2, 0]])
    );
}

#[test]
fn shift_moves_canvas() {
    assert_eq!(
        run(
            PrimitiveCall::Shift {
                direction: Direction::Right
            },
            &[&[1, 2, 0]]
        ),
        g(&[&[0, 1, 2]])
    );
}

#[test]
fn mirror_duplicate_appends_mirror() {
    assert_eq!(
        run(
            PrimitiveCall::MirrorDuplicate {
                axis: Axis::Horizontal
            },
            &[&[1, 2]]
        ),
        g(&[&[1, 2, 2, 1]])
    );
    assert_eq!(
        run(
            PrimitiveCall::MirrorDuplicate {
                axis: Axis::Vertical
            },
            &[&[1], &[2]]
        ),
        g(&[&[1], &[2], &[2], &[1]])
    );
}

#[test]
fn rotate_duplicate_layouts() {
    assert_eq!(
        run(
            PrimitiveCall::RotateDuplicate {
                angles: Angle::ALL.to_vec()
            },
            &[&[1, 2], &[3, 4]]
        ),
        g(&[&[1, 2, 3, 1], &[3, 4, 4, 2], &[2, 4, 4, 3], &[1, 3, 2, 1]])
    );
    assert_eq!(
        run(
            PrimitiveCall::RotateDuplicate {
                angles: vec![Angle::Deg180]
            },
            &[&[1, 2]]
        ),
        g(&[&[1, 2, 2, 1]])
    );
    let graph = build_abstraction(&g(&[&[1, 2]]), AbstractionKind::SameColor4);
    assert!(apply_primitive(
        &PrimitiveCall::RotateDuplicate {
            angles: vec![Angle::Deg90]
        },
        &graph,
        &[]
    )
    .is_err());
}

#[test]
fn mirror_grid_reverses_columns() {
    assert_eq!(
        run(
            PrimitiveCall::MirrorGrid {
                axis: Axis::Vertical
            },
            &[&[1, 2]]
        ),
        g(&[&[2, 1]])
    );
    assert_eq!(
        run(
            PrimitiveCall::MirrorGrid {
                axis: Axis::Horizontal
            },
            &[&[1], &[2]]
        ),
        g(&[&[2], &[1]])
    );
}

#[test]
fn rotate_grid_clockwise() {
    assert_eq!(
        run(
            PrimitiveCall::RotateGrid {
                angle: Angle::Deg90
            },
            &[&[1, 2], &[3, 4]]
        ),
        g(&[&[3, 1], &[4, 2]])
    );
    assert_eq!(
        run(
            PrimitiveCall::RotateGrid {
                angle: Angle::Deg270
            },
            &[&[1, 2]]
        ),
        g(&[&[2], &[1]])
    );
}

#[test]
fn connect_draws_line_between_nodes() {
    assert_eq!(
        run(PrimitiveCall::Connect { color: c(5) }, &[&[1, 0, 0, 1]]),
        g(&[&[1, 5, 5, 1]])
    );
    assert_eq!(
        run(
            PrimitiveCall::Connect { color: c(5) },
            &[&[1, 0], &[0, 0], &[2, 0]]
        ),
        g(&[&[1, 0], &[5, 0], &[2, 0]])
    );
}

#[test]
fn recolor_swaps_one_color() {
    assert_eq!(
        run(
            PrimitiveCall::Recolor {
                from: c(1),
                to: c(4)
            },
            &[&[1, 2, 1]]
        ),
        g(&[&[4, 2, 4]])
    );
}

#[test]
fn truncate_clears_selection() {
    assert_eq!(
        run_with(
            AbstractionKind::SameColor4,
            &color_filter(1),
            PrimitiveCall::Truncate {},
            &[&[1, 1, 0, 2]]
        ),
        g(&[&[0, 0, 0, 2]])
    );
}

#[test]
fn every_executable_kind_has_a_golden_test() {
    // keep in sync with the tests above
    let covered = [
        "update_color",
        "move_node",
        "move_node_max",
        "extend_node",
        "rotate_node",
        "add_border",
        "fill_rectangle",
        "hollow_rectangle",
        "mirror_node",
        "flip_node",
        "insert_node",
        "remove_node",
        "extract",
        "duplicate",
        "upscale_grid",
        "fill",
        "magnet",
        "beam",
        "shift",
        "mirror_duplicate",
        "rotate_duplicate",
        "mirror_grid",
        "rotate_grid",
        "connect",
        "recolor",
        "truncate",
    ];
    let names: Vec<&str> = PrimitiveKind::EXECUTABLE.iter().map(|k| k.name()).collect();
    assert_eq!(names, covered);
}

#[test]
fn empty_selection_is_noop_for_node_kinds() {
    let graph = build_abstraction(&g(&[&[1, 0, 2]]), AbstractionKind::SameColor4);
    for kind in PrimitiveKind::EXECUTABLE
        .into_iter()
        .filter(|k| !k.is_grid_level())
    {
        for call in enumerate_primitive_params(kind, &[graph.clone()], &Grounding::default()) {
            assert_eq!(
                apply_primitive(&call, &graph, &[]).unwrap(),
                graph,
                "{call:?}"
            );
        }
    }
}

#[test]
fn involutions_and_identities() {
    let grid = g(&[&[1, 2, 0], &[0, 3, 4]]);
    let graph = build_abstraction(&grid, AbstractionKind::SameColor4);
    let twice = |call: PrimitiveCall, n: usize| {
        let mut cur = graph.clone();
        for _ in 0..n {
            cur = apply_primitive(&call, &cur, &[]).unwrap();
        }
        cur.to_grid()
    };
    for axis in [Axis::Horizontal, Axis::Vertical, Axis::Both] {
        assert_eq!(twice(PrimitiveCall::MirrorGrid { axis }, 2), grid);
    }
    assert_eq!(
        twice(
            PrimitiveCall::RotateGrid {
                angle: Angle::Deg90
            },
            4
        ),
        grid
    );

    let padded = g(&[&[0, 1, 2, 0], &[0, 3, 0, 0]]);
    let pg = build_abstraction(&padded, AbstractionKind::SameColor4);
    let left = apply_primitive(
        &PrimitiveCall::Shift {
            direction: Direction::Left,
        },
        &pg,
        &[],
    )
    .unwrap();
    let back = apply_primitive(
        &PrimitiveCall::Shift {
            direction: Direction::Right,
        },
        &left,
        &[],
    )
    .unwrap();
    assert_eq!(back.to_grid(), padded);

    for node in &graph.nodes {
        let same = apply_primitive(
            &PrimitiveCall::UpdateColor { color: node.color },
            &graph,
            &[node.id],
        )
        .unwrap();
        assert_eq!(same.to_grid(), grid);
    }
}

#[test]
fn size_cap_and_invalid_params() {
    let big = Grid::filled(30, 30, c(1));
    let graph = build_abstraction(&big, AbstractionKind::SameColor4);
    assert!(matches!(
        apply_primitive(&PrimitiveCall::UpscaleGrid { factor: 5 }, &graph, &[]),
        Err(PrimitiveError::SizeCapExceeded { .. })
    ));
    assert!(matches!(
        apply_primitive(
            &PrimitiveCall::Duplicate {
                axis: Axis::Both,
                count: 2
            },
            &graph,
            &[]
        ),
        Err(PrimitiveError::InvalidParams(_))
    ));
    assert!(enumerate_primitive_params(
        PrimitiveKind::UpscaleGrid,
        &[graph],
        &Grounding::default()
    )
    .iter()
    .all(|c| matches!(c, PrimitiveCall::UpscaleGrid { factor } if *factor <= 4)));
}

#[test]
fn enumeration_examples() {
    let graph = build_abstraction(&g(&[&[1, 0, 4]]), AbstractionKind::SameColor4);
    assert_eq!(
        enumerate_primitive_params(
            PrimitiveKind::RotateGrid,
            &[graph.clone()],
            &Grounding::default()
        ),
        vec![
            PrimitiveCall::RotateGrid {
                angle: Angle::Deg90
            },
            PrimitiveCall::RotateGrid {
                angle: Angle::Deg180
            },
            PrimitiveCall::RotateGrid {
                angle: Angle::Deg270
            },
        ]
    );
    let task = crate::grid::parse_task(
        br#"{"train":[{"input":[[1,0]],"output":[[1,0,1,0,1,0]]},{"input":[[4],[4]],"output":[[4,4,4],[4,4,4]]}],"test":[{"input":[[1]]}]}"#,
    )
    .unwrap();
    let grounding = Grounding::from_task(&task);
    assert_eq!(grounding.size_ratio, Some((1, 3)));
    let dup = enumerate_primitive_params(PrimitiveKind::Duplicate, &[graph.clone()], &grounding);
    assert_eq!(
        dup[0],
        PrimitiveCall::Duplicate {
            axis: Axis::Horizontal,
            count: 3
        }
    );
    let colors: BTreeSet<Color> =
        enumerate_primitive_params(PrimitiveKind::UpdateColor, &[graph.clone()], &grounding)
            .into_iter()
            .map(|c| match c {
                PrimitiveCall::UpdateColor { color } => color,
                _ => unreachable!(),
            })
            .collect();
    assert_eq!(colors, [c(0), c(1), c(4)].into_iter().collect());
    // every executable kind has at least one parameter record on a non-degenerate graph
    for kind in PrimitiveKind::EXECUTABLE {
        assert!(
            !enumerate_primitive_params(kind, &[graph.clone()], &grounding).is_empty(),
            "{kind}"
        );
    }
    assert!(enumerate_primitive_params(PrimitiveKind::NoTrans, &[graph], &grounding).is_empty());
}

#[test]
fn call_wire_format() {
    let call = PrimitiveCall::UpdateColor { color: c(3) };
    let s = serde_json::to_string(&call).unwrap();
    assert_eq!(s, r#"{"kind":"update_color","params":{"color":3}}"#);
    assert_eq!(serde_json::from_str::<PrimitiveCall>(&s).unwrap(), call);
    let rd = PrimitiveCall::RotateDuplicate {
        angles: vec![Angle::Deg90, Angle::Deg180, Angle::Deg270],
    };
    let s = serde_json::to_string(&rd).unwrap();
    assert_eq!(
        s,
        r#"{"kind":"rotate_duplicate","params":{"angles":[90,180,270]}}"#
    );
    assert_eq!(
        serde_json::to_string(&PrimitiveCall::Extract {}).unwrap(),
        r#"{"kind":"extract","params":{}}"#
    );
    assert!(serde_json::from_str::<PrimitiveCall>(
        r#"{"kind":"rotate_grid","params":{"angle":45}}"#
    )
    .is_err());
    for k in PrimitiveKind::vocabulary() {
        assert_eq!(k.name().parse::<PrimitiveKind>().unwrap(), k);
    }
}

#[test]
fn grid_application_matches_graph_application() {
    use crate::filters::enumerate_filters_with_selections;
    let inputs = [
        g(&[&[1, 1, 0, 2], &[0, 3, 0, 2], &[4, 0, 0, 0]]),
        g(&[&[5, 0, 5], &[0, 5, 0], &[6, 6, 0]]),
        g(&[&[0, 0, 0, 0], &[0, 7, 7, 0], &[0, 7, 0, 0], &[8, 0, 0, 9]]),
    ];
    let task = Task::new(
        "t",
        inputs
            .iter()
            .map(|i| crate::grid::Pair {
                input: i.clone(),
                output: i.clone(),
            })
            .collect(),
        vec![crate::grid::TestPair {
            input: inputs[0].clone(),
            output: None,
        }],
    )
    .unwrap();
    let grounding = Grounding::from_task(&task);
    let mut checked = 0;
    for kind in AbstractionKind::ALL {
        let graphs: Vec<_> = inputs.iter().map(|i| build_abstraction(i, kind)).collect();
        for (_, selections) in enumerate_filters_with_selections(&graphs) {
            for pk in PrimitiveKind::EXECUTABLE {
                for call in enumerate_primitive_params(pk, &graphs, &grounding) {
                    for (graph, sel) in graphs.iter().zip(&selections) {
                        let full = apply_primitive(&call, graph, sel).map(|o| o.to_grid());
                        assert_eq!(full, apply_primitive_grid(&call, graph, sel), "{call:?}");
                        checked += 1;
                    }
                }
            }
        }
    }
    assert!(checked > 1000);
}
