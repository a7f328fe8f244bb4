//! Method registry, call validation and the FIFO command queue.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{is_identifier, ActionCall};
use crate::scene::Relation;

/// What a registered method does in the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Primitive {
    PickUp,
    HandOver,
    MoveRelative(Relation),
    PlaceAt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub arity: usize,
    pub primitive: Primitive,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("invalid method name {0:?}")]
    InvalidName(String),
    #[error("method `{0}` already registered")]
    Duplicate(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandRegistry {
    methods: BTreeMap<String, MethodSpec>,
}

impl CommandRegistry {
    pub fn empty() -> Self {
        CommandRegistry {
            methods: BTreeMap::new(),
        }
    }

    pub fn register(
        &mut self,
        name: &str,
        arity: usize,
        primitive: Primitive,
    ) -> Result<(), RegistryError> {
        if !is_identifier(name) {
            return Err(RegistryError::InvalidName(name.to_string()));
        }
        if self.methods.contains_key(name) {
            return Err(RegistryError::Duplicate(name.to_string()));
        }
        self.methods
            .insert(name.to_string(), MethodSpec { arity, primitive });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&MethodSpec> {
        self.methods.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.methods.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.methods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.methods.is_empty()
    }
}

impl Default for CommandRegistry {
    fn default() -> Self {
        let mut r = CommandRegistry::empty();
        let entries = [
            ("pick_up", 1, Primitive::PickUp),
            ("hand_over", 1, Primitive::HandOver),
            (
                "move_object_to_left_of",
                2,
                Primitive::MoveRelative(Relation::LeftOf),
            ),
            (
                "move_object_to_right_of",
                2,
                Primitive::MoveRelative(Relation::RightOf),
            ),
            (
                "move_object_above",
                2,
                Primitive::MoveRelative(Relation::Above),
            ),
            (
                "move_object_below",
                2,
                Primitive::MoveRelative(Relation::Below),
            ),
            ("place_at", 3, Primitive::PlaceAt),
        ];
        for (name, arity, p) in entries {
            r.register(name, arity, p).expect("static table");
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    UnknownMethod {
        index: usize,
        method: String,
    },
    Arity {
        index: usize,
        method: String,
        expected: usize,
        got: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownMethod { index, method } => {
                write!(f, "call {index}: unknown method `{method}`")
            }
            Violation::Arity {
                index,
                method,
                expected,
                got,
            } => write!(f, "call {index}: `{method}` expected {expected}, got {got}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// A call that resolved against the registry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueuedCall {
    pub call: ActionCall,
    pub primitive: Primitive,
}

/// FIFO of validated calls. Only [`validate`] builds one.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandQueue {
    items: VecDeque<QueuedCall>,
}

impl CommandQueue {
    pub fn pop(&mut self) -> Option<QueuedCall> {
        self.items.pop_front()
    }

    pub fn peek(&self) -> Option<&QueuedCall> {
        self.items.front()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &QueuedCall> {
        self.items.iter()
    }

    pub fn calls(&self) -> Vec<ActionCall> {
        self.items.iter().map(|q| q.call.clone()).collect()
    }

    /// Append another validated queue, keeping order.
    pub fn extend(&mut self, other: CommandQueue) {
        self.items.extend(other.items);
    }
}

impl Iterator for CommandQueue {
    type Item = QueuedCall;

    fn next(&mut self) -> Option<QueuedCall> {
        self.pop()
    }
}

/// All calls resolve or nothing is queued; every problem is reported.
pub fn validate(
    calls: &[ActionCall],
    registry: &CommandRegistry,
) -> Result<CommandQueue, ValidationReport> {
    let mut violations = vec![];
    let mut items = VecDeque::with_capacity(calls.len());
    for (index, call) in calls.iter().enumerate() {
        match registry.get(&call.method) {
            None => violations.push(Violation::UnknownMethod {
                index,
                method: call.method.clone(),
            }),
            Some(spec) if spec.arity != call.args.len() => violations.push(Violation::Arity {
                index,
                method: call.method.clone(),
                expected: spec.arity,
                got: call.args.len(),
            }),
            Some(spec) => items.push_back(QueuedCall {
                call: call.clone(),
                primitive: spec.primitive,
            }),
        }
    }
    if violations.is_empty() {
        Ok(CommandQueue { items })
    } else {
        Err(ValidationReport { violations })
    }
}
