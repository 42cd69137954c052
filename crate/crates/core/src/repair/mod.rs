//! Generate-and-validate repair: ingredient pools, navigation strategies,
//! variable resolution, repair operators and the trial loop.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

mod edit;
mod pool;
mod resolve;
mod trial;

pub use edit::{apply_operator, compiles, validate, KindMismatch};
pub use pool::{build_pool, Access, Ingredient, IngredientPool, IngredientStream};
pub use resolve::{resolve_default, resolve_embeddings};
pub use trial::{
    replay_patch, run_trial, run_trial_observed, Learned, ModificationInstance, Patch, PatchRecord,
    TrialConfig, TrialEvent, TrialReport, DEFAULT_BUDGET,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Local,
    Package,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Baseline,
    Ed,
    Td,
    Re,
    Ee,
    Te,
}

/// How a strategy orders the ingredients offered at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    Random,
    Executable,
    Type,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Baseline,
        Strategy::Ed,
        Strategy::Td,
        Strategy::Re,
        Strategy::Ee,
        Strategy::Te,
    ];

    pub fn ordering(self) -> Ordering {
        match self {
            Strategy::Baseline | Strategy::Re => Ordering::Random,
            Strategy::Ed | Strategy::Ee => Ordering::Executable,
            Strategy::Td | Strategy::Te => Ordering::Type,
        }
    }

    /// Whether out-of-scope accesses may be rewritten via embedding clusters.
    pub fn transforms(self) -> bool {
        matches!(self, Strategy::Re | Strategy::Ee | Strategy::Te)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Operator {
    InsertBefore,
    InsertAfter,
    Replace,
}

impl Operator {
    pub const ALL: [Operator; 3] = [Operator::InsertBefore, Operator::InsertAfter, Operator::Replace];
}

macro_rules! names {
    ($ty:ty, $what:literal, $($variant:path => $name:literal),+ $(,)?) => {
        impl $ty {
            pub fn name(self) -> &'static str {
                match self {
                    $($variant => $name),+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok($variant),)+
                    _ => Err(format!(concat!("unknown ", $what, " `{}`"), s)),
                }
            }
        }
    };
}

names!(Scope, "scope", Scope::Local => "local", Scope::Package => "package", Scope::Global => "global");
names!(
    Strategy, "strategy",
    Strategy::Baseline => "baseline",
    Strategy::Ed => "ed",
    Strategy::Td => "td",
    Strategy::Re => "re",
    Strategy::Ee => "ee",
    Strategy::Te => "te",
);
names!(
    Operator, "operator",
    Operator::InsertBefore => "insertbefore",
    Operator::InsertAfter => "insertafter",
    Operator::Replace => "replace",
);
