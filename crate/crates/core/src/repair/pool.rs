use std::collections::{BTreeSet, HashSet, VecDeque};

use petit::scope::{context_at_loc, free_variables};
use petit::{Program, StatementId, Stmt, Type};
use rand::Rng;

use super::{Ordering, Scope};
use crate::codesim::SimilarityTable;
use crate::faultloc::Suspicious;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Access {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingredient {
    pub source: StatementId,
    pub stmt: Stmt,
    /// Free variable references in first-use order, typed at the source.
    pub accesses: Vec<Access>,
    /// `(from, to)` renames applied by transformation, in access order.
    pub substitutions: Vec<(String, String)>,
}

impl Ingredient {
    /// `None` when some free name has no binding at the source statement.
    pub fn from_source(program: &Program, source: StatementId) -> Option<Ingredient> {
        let loc = program.locate(&source)?;
        let stmt = program.stmt(&loc).clone();
        let ctx = context_at_loc(program, &loc);
        let accesses = free_variables(&stmt)
            .into_iter()
            .map(|name| ctx.get(&name).map(|ty| Access { name, ty }))
            .collect::<Option<Vec<_>>>()?;
        Some(Ingredient {
            source,
            stmt,
            accesses,
            substitutions: Vec::new(),
        })
    }

    pub fn transformed(&self) -> bool {
        !self.substitutions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngredientPool {
    pub scope: Scope,
    /// Application statements of the in-scope types, in program order.
    pub ingredients: Vec<Ingredient>,
}

/// Types (as `path::Type` keys) contributing to the pool.
fn scope_types(program: &Program, suspicious: &[Suspicious], scope: Scope) -> BTreeSet<String> {
    let local: BTreeSet<String> = suspicious.iter().map(|s| s.statement.type_key()).collect();
    let packages: BTreeSet<&str> = suspicious
        .iter()
        .map(|s| petit::ast::package_of(&s.statement.file))
        .collect();
    let mut out = BTreeSet::new();
    for file in &program.files {
        for ty in &file.types {
            let key = crate::corpus::type_key(&file.path, &ty.name);
            let keep = match scope {
                Scope::Local => local.contains(&key),
                Scope::Package => packages.contains(file.package()),
                Scope::Global => true,
            };
            if keep {
                out.insert(key);
            }
        }
    }
    out
}

pub fn build_pool(program: &Program, suspicious: &[Suspicious], scope: Scope) -> IngredientPool {
    let types = scope_types(program, suspicious, scope);
    let ingredients = program
        .statements()
        .into_iter()
        .filter(|(sid, _)| types.contains(&sid.type_key()))
        .filter_map(|(sid, _)| Ingredient::from_source(program, sid))
        .collect();
    IngredientPool { scope, ingredients }
}

impl IngredientPool {
    pub fn len(&self) -> usize {
        self.ingredients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ingredients.is_empty()
    }

    /// Pool order for a similarity strategy: statements of the point's own
    /// fragment, then of each neighbor by ascending distance, each fragment
    /// in textual order, then anything the table does not cover.
    pub fn similarity_order(&self, table: &SimilarityTable, point: &StatementId, ordering: Ordering) -> Vec<usize> {
        let fragment = |sid: &StatementId| match ordering {
            Ordering::Type => sid.type_key(),
            _ => sid.exec_key(),
        };
        let own = fragment(point);
        let mut fragments = vec![own.clone()];
        if let Ok(near) = table.similar_fragments(&own) {
            fragments.extend(near.into_iter().map(String::from));
        }
        let mut order = Vec::with_capacity(self.len());
        let mut taken: HashSet<usize> = HashSet::new();
        for f in &fragments {
            for (i, ing) in self.ingredients.iter().enumerate() {
                if fragment(&ing.source) == *f && taken.insert(i) {
                    order.push(i);
                }
            }
        }
        order.extend((0..self.len()).filter(|i| !taken.contains(i)));
        order
    }
}

/// Per (point, operator) supply of pool indices.
#[derive(Debug, Clone, PartialEq)]
pub enum IngredientStream {
    /// Uniform draws without replacement.
    Random(Vec<usize>),
    Fifo(VecDeque<usize>),
}

impl IngredientStream {
    pub fn random(len: usize) -> IngredientStream {
        IngredientStream::Random((0..len).collect())
    }

    pub fn fifo(order: Vec<usize>) -> IngredientStream {
        IngredientStream::Fifo(order.into())
    }

    pub fn is_exhausted(&self) -> bool {
        match self {
            IngredientStream::Random(v) => v.is_empty(),
            IngredientStream::Fifo(q) => q.is_empty(),
        }
    }

    pub fn next<R: Rng>(&mut self, rng: &mut R) -> Option<usize> {
        match self {
            IngredientStream::Random(v) if v.is_empty() => None,
            IngredientStream::Random(v) => {
                let i = rng.gen_range(0..v.len());
                Some(v.swap_remove(i))
            }
            IngredientStream::Fifo(q) => q.pop_front(),
        }
    }
}
