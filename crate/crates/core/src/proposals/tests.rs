use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::abstraction::AbstractionKind;
use crate::filters::FilterExpr;
use crate::grid::Color;
use crate::primitives::{Angle, PrimitiveCall};
use crate::program::Step;

use PrimitiveKind as K;

/// Proposal whose positions list `heads` first, then the rest of the
/// vocabulary in order.
fn with_heads(heads: [&[K]; 3]) -> ProposalSet {
    let positions = heads
        .iter()
        .map(|head| {
            let rest = K::vocabulary().filter(|k| !head.contains(k));
            head.iter()
                .copied()
                .chain(rest)
                .enumerate()
                .map(|(i, kind)| ScoredKind {
                    kind,
                    score: 1.0 - i as f64 / 100.0,
                })
                .collect()
        })
        .collect();
    ProposalSet {
        task_id: "p".into(),
        positions,
    }
}

fn recolor_program() -> Program {
    Program {
        abstraction: AbstractionKind::SameColor4,
        steps: vec![Step::grid(PrimitiveCall::Recolor {
            from: Color::new(1).unwrap(),
            to: Color::new(2).unwrap(),
        })],
    }
}

#[test]
fn length_one_takes_top_five() {
    let p = with_heads([
        &[K::Shift, K::NoTrans, K::Fill],
        &[K::NoTrans],
        &[K::NoTrans],
    ]);
    let r = expand_topk(&p).unwrap();
    assert_eq!(r.effective_length, 1);
    assert_eq!(r.allowed[0].len(), 5);
    // no_trans is skipped, not counted
    assert!(r.allowed[0].contains(&K::Fill));
    assert!(!r.allowed[0].contains(&K::NoTrans));
}

#[test]
fn length_two_takes_top_four() {
    let p = with_heads([&[K::Extract], &[K::Shift], &[K::NoTrans]]);
    let r = expand_topk(&p).unwrap();
    assert_eq!(r.effective_length, 2);
    assert_eq!(
        r.allowed.iter().map(|s| s.len()).collect::<Vec<_>>(),
        vec![4, 4]
    );
}

#[test]
fn length_three_takes_top_three() {
    let p = with_heads([&[K::Extract], &[K::Shift], &[K::Beam]]);
    let r = expand_topk(&p).unwrap();
    assert_eq!(r.effective_length, 3);
    assert_eq!(
        r.allowed.iter().map(|s| s.len()).collect::<Vec<_>>(),
        vec![3, 3, 3]
    );
    assert!(r.allowed[2].contains(&K::Beam));
}

#[test]
fn oracle_is_admissible_and_ranks_first() {
    let p = recolor_program();
    let props = oracle_proposals("t", &p);
    props.validate().unwrap();
    assert_eq!(props.positions[0][0].kind, K::Recolor);
    assert_eq!(props.positions[1][0].kind, K::NoTrans);
    let truth = [K::Recolor, K::NoTrans, K::NoTrans];
    let r = expand_topk(&props).unwrap();
    assert_eq!(r.effective_length, 1);
    assert!(r.admits(&truth));
    let s = score_predictions(&props, &truth).unwrap();
    assert!(s.inclusion);
    assert_eq!(s.ranks, [1, 1, 1]);
}

#[test]
fn oracle_for_three_steps() {
    let p = Program {
        abstraction: AbstractionKind::SameColor4,
        steps: vec![
            Step::grid(PrimitiveCall::RotateGrid {
                angle: Angle::Deg90,
            }),
            Step::new(FilterExpr::All, PrimitiveCall::RemoveNode {}),
            Step::grid(PrimitiveCall::RotateGrid {
                angle: Angle::Deg180,
            }),
        ],
    };
    let r = expand_topk(&oracle_proposals("t", &p)).unwrap();
    assert_eq!(r.effective_length, 3);
    assert!(r.admits(&[K::RotateGrid, K::RemoveNode, K::RotateGrid]));
}

#[test]
fn sixth_rank_is_excluded() {
    let heads: Vec<K> = vec![
        K::Fill,
        K::Shift,
        K::Beam,
        K::Magnet,
        K::Connect,
        K::Recolor,
    ];
    let p = with_heads([&heads, &[K::NoTrans], &[K::NoTrans]]);
    let s = score_predictions(&p, &[K::Recolor, K::NoTrans, K::NoTrans]).unwrap();
    assert!(!s.inclusion);
    assert_eq!(s.ranks[0], 6);
    let s = score_predictions(&p, &[K::Connect, K::NoTrans, K::NoTrans]).unwrap();
    assert!(s.inclusion);
}

#[test]
fn wrong_length_is_not_included() {
    let p = with_heads([&[K::Fill], &[K::Shift], &[K::NoTrans]]);
    let s = score_predictions(&p, &[K::Fill, K::NoTrans, K::NoTrans]).unwrap();
    assert!(!s.inclusion);
}

#[test]
fn malformed_sets_are_rejected() {
    let mut p = with_heads([&[K::Fill], &[K::Shift], &[K::NoTrans]]);
    let mut two = p.clone();
    two.positions.pop();
    assert!(expand_topk(&two).is_err());
    let mut dup = p.clone();
    dup.positions[0][1].kind = K::Fill;
    assert!(dup.validate().is_err());
    p.positions[1].swap(0, 3);
    assert!(p.validate().is_err());
    assert!(ProposalSet::parse(
        "{\"task_id\":\"x\",\"positions\":[[{\"kind\":\"teleport\",\"score\":1}]]}"
    )
    .is_err());
}

#[test]
fn wire_format_round_trips() {
    let p = oracle_proposals("abc", &recolor_program());
    let text = serde_json::to_string(&p).unwrap();
    assert!(text
        .starts_with("{\"task_id\":\"abc\",\"positions\":[[{\"kind\":\"recolor\",\"score\":0.5}"));
    assert_eq!(ProposalSet::parse(&text).unwrap(), p);
    let lines = format!("{text}\n\n{text}\n");
    assert_eq!(parse_proposals_jsonl(&lines).unwrap().len(), 2);
}

#[test]
fn random_proposals_match_combinatorial_baseline() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trials = 10_000;
    let mut raw_top5 = 0;
    let mut length_one = 0;
    let mut included_given_length = 0;
    let mut included = 0;
    for _ in 0..trials {
        let p = random_proposals(&mut rng, "r");
        let truth = [K::EXECUTABLE[rng.gen_range(0..26)], K::NoTrans, K::NoTrans];
        let s = score_predictions(&p, &truth).unwrap();
        raw_top5 += (s.ranks[0] <= 5) as usize;
        included += s.inclusion as usize;
        if expand_topk(&p).unwrap().effective_length == 1 {
            length_one += 1;
            included_given_length += s.inclusion as usize;
        }
    }
    let rate = |a: usize, b: usize| a as f64 / b as f64;
    // the true kind lands among the first five of 27 entries
    assert!((rate(raw_top5, trials) - 5.0 / 27.0).abs() < 0.02);
    // the length is right only when position 2 tops with no_trans
    assert!((rate(length_one, trials) - 1.0 / 27.0).abs() < 0.01);
    // given the right length, five of 26 executable kinds are admitted
    assert!((rate(included_given_length, length_one) - 5.0 / 26.0).abs() < 0.05);
    assert!((rate(included, trials) - 5.0 / (26.0 * 27.0)).abs() < 0.005);
}

#[test]
fn aggregate_means() {
    let preds = [
        Prediction {
            inclusion: true,
            ranks: [1, 1, 1],
        },
        Prediction {
            inclusion: false,
            ranks: [3, 1, 2],
        },
    ];
    let m = aggregate(&preds);
    assert_eq!(m.n, 2);
    assert_eq!(m.inclusion_rate, 0.5);
    assert_eq!(m.mean_rank, [2.0, 1.0, 1.5]);
    assert_eq!(aggregate(&[]).n, 0);
}
