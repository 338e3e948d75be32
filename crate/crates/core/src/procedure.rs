//! Named estimation procedures behind one trait, selectable at runtime.
//!
//! | name     | model | clusters                              |
//! |----------|-------|---------------------------------------|
//! | `opr`    | OPR   | none (`c = K`)                        |
//! | `wmpr`   | WMPR  | none (`c = K`)                        |
//! | `oprc1`  | OPR   | cuts of one hierarchy (Method 1)      |
//! | `oprc2`  | OPR   | merge-and-refit per level (Method 2)  |
//! | `wmprc1` | WMPR  | cuts of one hierarchy (Method 1)      |
//! | `wmprc2` | WMPR  | merge-and-refit per level (Method 2)  |

use std::sync::Arc;

use crate::design::{build_design, DesignSystem, MatchSelection};
use crate::domain::{DivisionSnapshot, ModelKind};
use crate::error::{Error, Result};
use crate::select::{method1, method2, unclustered, Criterion, Selection};

pub trait Procedure: Send + Sync {
    fn name(&self) -> &str;

    fn kind(&self) -> ModelKind;

    fn description(&self) -> &str;

    /// Chooses a cluster count and partition for `design` and returns the
    /// selected fit with its cross-validation report.
    fn select(&self, design: Arc<DesignSystem>, criterion: Criterion) -> Result<Selection>;
}

struct Unclustered {
    name: &'static str,
    kind: ModelKind,
}

impl Procedure for Unclustered {
    fn name(&self) -> &str {
        self.name
    }

    fn kind(&self) -> ModelKind {
        self.kind
    }

    fn description(&self) -> &str {
        match self.kind {
            ModelKind::Opr => "least-squares alliance-score contributions, one per robot",
            ModelKind::Wmpr => "least-squares winning-margin contributions, one per robot, summing to zero",
        }
    }

    fn select(&self, design: Arc<DesignSystem>, criterion: Criterion) -> Result<Selection> {
        unclustered(design, criterion)
    }
}

struct HierarchyCut {
    name: &'static str,
    kind: ModelKind,
}

impl Procedure for HierarchyCut {
    fn name(&self) -> &str {
        self.name
    }

    fn kind(&self) -> ModelKind {
        self.kind
    }

    fn description(&self) -> &str {
        "cluster the unclustered strengths once; cross-validate every cut"
    }

    fn select(&self, design: Arc<DesignSystem>, criterion: Criterion) -> Result<Selection> {
        method1(design, criterion)
    }
}

struct StepwiseMerge {
    name: &'static str,
    kind: ModelKind,
}

impl Procedure for StepwiseMerge {
    fn name(&self) -> &str {
        self.name
    }

    fn kind(&self) -> ModelKind {
        self.kind
    }

    fn description(&self) -> &str {
        "merge the closest refitted clusters one level at a time; cross-validate each level"
    }

    fn select(&self, design: Arc<DesignSystem>, criterion: Criterion) -> Result<Selection> {
        method2(design, criterion)
    }
}

#[derive(Default)]
pub struct ProcedureRegistry {
    procedures: Vec<Box<dyn Procedure>>,
}

impl ProcedureRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// The six built-in procedures.
    pub fn builtin() -> Self {
        let mut registry = Self::new();
        for kind in [ModelKind::Opr, ModelKind::Wmpr] {
            let (plain, one, two) = match kind {
                ModelKind::Opr => ("opr", "oprc1", "oprc2"),
                ModelKind::Wmpr => ("wmpr", "wmprc1", "wmprc2"),
            };
            registry
                .register(Box::new(Unclustered { name: plain, kind }))
                .and_then(|r| r.register(Box::new(HierarchyCut { name: one, kind })))
                .and_then(|r| r.register(Box::new(StepwiseMerge { name: two, kind })))
                .expect("built-in names are distinct");
        }
        registry
    }

    pub fn register(&mut self, procedure: Box<dyn Procedure>) -> Result<&mut Self> {
        if self.get(procedure.name()).is_some() {
            return Err(Error::InvalidArgument(format!(
                "procedure `{}` is already registered",
                procedure.name()
            )));
        }
        self.procedures.push(procedure);
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<&dyn Procedure> {
        self.procedures.iter().find(|p| p.name() == name).map(|p| p.as_ref())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.procedures.iter().map(|p| p.name())
    }

    pub fn lookup(&self, name: &str) -> Result<&dyn Procedure> {
        self.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.names().collect();
            Error::InvalidArgument(format!("unknown procedure `{name}` (known: {})", known.join(", ")))
        })
    }

    /// Runs procedure `name` on the qualification matches of `snapshot`.
    pub fn run(&self, name: &str, snapshot: &DivisionSnapshot, criterion: Criterion) -> Result<Selection> {
        let procedure = self.lookup(name)?;
        let design = build_design(snapshot, procedure.kind(), MatchSelection::Qualification)?;
        procedure.select(Arc::new(design), criterion)
    }
}
