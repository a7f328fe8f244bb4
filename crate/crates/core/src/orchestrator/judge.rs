//! Automatic pass/fail rules for each stage.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::adapters::normalize_text;
use crate::commands::{CommandQueue, Primitive};
use crate::executor::HAND_LABEL;
use crate::geometry::BBox;
use crate::grammar::ActionCall;
use crate::perception::ObjectPositionMap;
use crate::scene::{Relation, SceneState};

pub const IOU_THRESHOLD: f64 = 0.5;

fn default_hand() -> String {
    HAND_LABEL.to_string()
}

/// Condition the scene must satisfy once the robot is done.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FinalPredicate {
    /// The gripper holds `object`.
    Held {
        object: String,
    },
    /// `object` was released with its center over the hand.
    InHand {
        object: String,
        #[serde(default = "default_hand")]
        hand: String,
    },
    /// `object` is free and strictly on the `relation` side of `reference`.
    Relation {
        object: String,
        relation: Relation,
        reference: String,
    },
    /// `object` is free with its center within `tolerance` of `(x, y)`.
    Near {
        object: String,
        x: f64,
        y: f64,
        tolerance: f64,
    },
    All {
        of: Vec<FinalPredicate>,
    },
}

pub fn strictly(relation: Relation, a: &BBox, b: &BBox) -> bool {
    match relation {
        Relation::LeftOf => a.x_max < b.x_min,
        Relation::RightOf => a.x_min > b.x_max,
        Relation::Above => a.y_max < b.y_min,
        Relation::Below => a.y_min > b.y_max,
    }
}

impl FinalPredicate {
    pub fn holds(&self, s: &SceneState) -> bool {
        let free = |o: &str| s.held.as_deref() != Some(o);
        match self {
            FinalPredicate::Held { object } => s.held.as_deref() == Some(object.as_str()),
            FinalPredicate::InHand { object, hand } => {
                match (s.objects.get(object), s.objects.get(hand)) {
                    (Some(o), Some(h)) => free(object) && h.contains(o.center()),
                    _ => false,
                }
            }
            FinalPredicate::Relation {
                object,
                relation,
                reference,
            } => match (s.objects.get(object), s.objects.get(reference)) {
                (Some(a), Some(b)) => free(object) && strictly(*relation, a, b),
                _ => false,
            },
            FinalPredicate::Near {
                object,
                x,
                y,
                tolerance,
            } => s.objects.get(object).is_some_and(|o| {
                let c = o.center();
                free(object) && (c.x - x).hypot(c.y - y) <= *tolerance
            }),
            FinalPredicate::All { of } => of.iter().all(|p| p.holds(s)),
        }
    }
}

pub fn transcript_matches(got: &str, expected: &str) -> bool {
    normalize_text(got) == normalize_text(expected)
}

pub fn actions_match(got: &[ActionCall], expected: &[ActionCall]) -> bool {
    got == expected
}

/// Object labels a queue needs located, in first-use order.
pub fn referenced_labels(queue: &CommandQueue) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = vec![];
    for q in queue.iter() {
        let args = &q.call.args;
        let labels: Vec<&str> = match q.primitive {
            Primitive::PickUp | Primitive::PlaceAt => vec![&args[0]],
            Primitive::HandOver => vec![&args[0], HAND_LABEL],
            Primitive::MoveRelative(_) => vec![&args[0], &args[1]],
        };
        for l in labels {
            if seen.insert(l.to_string()) {
                out.push(l.to_string());
            }
        }
    }
    out
}

/// Every label was found, exists in the world and overlaps it enough.
pub fn detections_ok(labels: &[String], found: &ObjectPositionMap, world: &SceneState) -> bool {
    labels
        .iter()
        .all(|l| match (found.get(l), world.objects.get(l)) {
            (Some(d), Some(t)) => d.iou(t) >= IOU_THRESHOLD,
            _ => false,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commands::{validate, CommandRegistry};
    use crate::geometry::{FrameSize, Point};
    use crate::grammar::parse_actions;
    use std::collections::BTreeMap;

    fn b(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    fn world() -> SceneState {
        let mut objects = BTreeMap::new();
        objects.insert("apple".into(), b(100.0, 100.0, 140.0, 140.0));
        objects.insert("orange".into(), b(200.0, 100.0, 260.0, 160.0));
        objects.insert("hand".into(), b(90.0, 90.0, 150.0, 150.0));
        SceneState {
            frame: FrameSize::default(),
            objects,
            effector: Point::new(0.0, 0.0),
            held: None,
            rng_seed: 0,
        }
    }

    #[test]
    fn predicates() {
        let w = world();
        let left = FinalPredicate::Relation {
            object: "apple".into(),
            relation: Relation::LeftOf,
            reference: "orange".into(),
        };
        assert!(left.holds(&w));
        let right = FinalPredicate::Relation {
            object: "apple".into(),
            relation: Relation::RightOf,
            reference: "orange".into(),
        };
        assert!(!right.holds(&w));
        let in_hand = FinalPredicate::InHand {
            object: "apple".into(),
            hand: "hand".into(),
        };
        assert!(in_hand.holds(&w));
        let mut held = w.clone();
        held.held = Some("apple".into());
        assert!(!in_hand.holds(&held));
        assert!(FinalPredicate::Held {
            object: "apple".into()
        }
        .holds(&held));
        let near = FinalPredicate::Near {
            object: "apple".into(),
            x: 121.0,
            y: 120.0,
            tolerance: 2.0,
        };
        assert!(near.holds(&w));
        assert!(FinalPredicate::All {
            of: vec![left, near]
        }
        .holds(&w));
    }

    #[test]
    fn predicate_json_shape() {
        let p: FinalPredicate =
            serde_json::from_str(r#"{"kind":"in_hand","object":"lemon"}"#).unwrap();
        assert_eq!(
            p,
            FinalPredicate::InHand {
                object: "lemon".into(),
                hand: "hand".into()
            }
        );
        let r: FinalPredicate = serde_json::from_str(
            r#"{"kind":"relation","object":"a","relation":"left_of","reference":"b"}"#,
        )
        .unwrap();
        assert!(matches!(r, FinalPredicate::Relation { .. }));
    }

    #[test]
    fn labels_follow_first_use() {
        let calls =
            parse_actions("[pick_up(lemon), hand_over(lemon), place_at(apple, 1, 2)]").unwrap();
        let q = validate(&calls, &CommandRegistry::default()).unwrap();
        assert_eq!(referenced_labels(&q), ["lemon", "hand", "apple"]);
    }

    #[test]
    fn detection_judge_uses_iou() {
        let w = world();
        let mut found = ObjectPositionMap::new();
        found.insert("apple", b(102.0, 101.0, 141.0, 139.0));
        assert!(detections_ok(&["apple".into()], &found, &w));
        found.insert("apple", b(130.0, 130.0, 170.0, 170.0));
        assert!(!detections_ok(&["apple".into()], &found, &w));
        assert!(!detections_ok(&["orange".into()], &found, &w));
    }

    #[test]
    fn transcripts_compare_normalized() {
        assert!(transcript_matches("Grab the apple.", "grab the  apple"));
        assert!(!transcript_matches("grab the elppa", "grab the apple"));
    }
}
