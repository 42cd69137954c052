use std::collections::HashMap;

use petit::scope::{bound_names, rename_free};
use petit::VariableContext;

use super::pool::{Access, Ingredient};
use crate::embed::{euclidean, Dictionary};
use crate::lexclust::ClusterMap;

/// Accept iff every access matches a visible variable by name and type.
pub fn resolve_default(ingredient: &Ingredient, ctx: &VariableContext) -> bool {
    ingredient.accesses.iter().all(|a| ctx.contains(&a.name, a.ty))
}

/// Resolve unmatched accesses by rewriting each to the nearest (by
/// embedding distance) visible variable of the same type in its cluster.
///
/// Names bound inside the ingredient are never chosen, so a rename cannot be
/// captured by an inner `let`. Ingredients that already resolve are
/// returned unchanged.
pub fn resolve_embeddings(
    ingredient: &Ingredient,
    ctx: &VariableContext,
    clusters: &ClusterMap,
    dict: &Dictionary,
) -> Option<Ingredient> {
    if resolve_default(ingredient, ctx) {
        return Some(ingredient.clone());
    }
    let bound = bound_names(&ingredient.stmt);
    let mut map: HashMap<String, String> = HashMap::new();
    let mut substitutions = Vec::new();
    for a in &ingredient.accesses {
        if ctx.contains(&a.name, a.ty) {
            continue;
        }
        let cluster = clusters.cluster_of(&a.name)?;
        let origin = dict.vector(&a.name)?;
        let best = ctx
            .iter()
            .filter(|&(name, ty)| {
                ty == a.ty && !bound.contains(name) && clusters.cluster_of(name) == Some(cluster)
            })
            .filter_map(|(name, _)| dict.vector(name).map(|v| (euclidean(origin, v), name)))
            .min_by(|x, y| x.0.total_cmp(&y.0).then_with(|| x.1.cmp(y.1)))?;
        map.insert(a.name.clone(), best.1.to_string());
        substitutions.push((a.name.clone(), best.1.to_string()));
    }
    let stmt = rename_free(&ingredient.stmt, &map);
    let mut accesses: Vec<Access> = Vec::with_capacity(ingredient.accesses.len());
    for a in &ingredient.accesses {
        let name = map.get(&a.name).unwrap_or(&a.name).clone();
        if !accesses.iter().any(|b| b.name == name) {
            accesses.push(Access { name, ty: a.ty });
        }
    }
    Some(Ingredient {
        source: ingredient.source.clone(),
        stmt,
        accesses,
        substitutions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use petit::{parse_stmt, StatementId, Type};

    fn ing(src: &str, accesses: &[(&str, Type)]) -> Ingredient {
        Ingredient {
            source: StatementId {
                file: "m.pt".into(),
                type_name: "M".into(),
                fn_sig: "f()->void".into(),
                index: 0,
            },
            stmt: parse_stmt(src).unwrap(),
            accesses: accesses
                .iter()
                .map(|(n, t)| Access {
                    name: n.to_string(),
                    ty: *t,
                })
                .collect(),
            substitutions: Vec::new(),
        }
    }

    fn ctx(vars: &[(&str, Type)]) -> VariableContext {
        vars.iter().map(|(n, t)| (n.to_string(), *t)).collect()
    }

    fn clusters(groups: &[(&str, usize)]) -> ClusterMap {
        let text: String = groups.iter().map(|(t, c)| format!("{t}\t{c}\n")).collect();
        ClusterMap::from_text(&text).unwrap()
    }

    fn dict(points: &[(&str, f64)]) -> Dictionary {
        Dictionary::new(
            points.iter().map(|(t, _)| t.to_string()).collect(),
            points.iter().map(|(_, x)| vec![*x, 0.0]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn default_resolution() {
        let i = ing("return x;", &[("x", Type::Int)]);
        assert!(resolve_default(&i, &ctx(&[("x", Type::Int)])));
        assert!(!resolve_default(&i, &ctx(&[("x", Type::Str)])));
        let e = ing("return a <= eps;", &[("a", Type::Float), ("eps", Type::Float)]);
        assert!(!resolve_default(&e, &ctx(&[("a", Type::Float)])));
    }

    #[test]
    fn eps_becomes_safe_min() {
        let i = ing(
            "return equals(x, y, 1) || abs(y - x) <= eps;",
            &[("x", Type::Float), ("y", Type::Float), ("eps", Type::Float)],
        );
        let c = ctx(&[("x", Type::Float), ("y", Type::Float), ("SAFE_MIN", Type::Float)]);
        let cl = clusters(&[("x", 0), ("y", 0), ("eps", 1), ("SAFE_MIN", 1)]);
        let d = dict(&[("x", 0.0), ("y", 0.5), ("eps", 5.0), ("SAFE_MIN", 6.0)]);
        let out = resolve_embeddings(&i, &c, &cl, &d).unwrap();
        assert_eq!(
            out.stmt,
            parse_stmt("return equals(x, y, 1) || abs(y - x) <= SAFE_MIN;").unwrap()
        );
        assert_eq!(out.substitutions, vec![("eps".to_string(), "SAFE_MIN".to_string())]);
        assert!(resolve_default(&out, &c));
    }

    #[test]
    fn in_scope_ingredient_is_identity() {
        let i = ing("x = y;", &[("x", Type::Int), ("y", Type::Int)]);
        let c = ctx(&[("x", Type::Int), ("y", Type::Int)]);
        let out = resolve_embeddings(&i, &c, &clusters(&[]), &dict(&[])).unwrap();
        assert_eq!(out, i);
    }

    #[test]
    fn isolated_cluster_rejects() {
        let i = ing("return lonely;", &[("lonely", Type::Int)]);
        let c = ctx(&[("x", Type::Int)]);
        let cl = clusters(&[("lonely", 0), ("x", 1)]);
        let d = dict(&[("lonely", 0.0), ("x", 0.1)]);
        assert!(resolve_embeddings(&i, &c, &cl, &d).is_none());
        // same cluster but wrong type
        let cl = clusters(&[("lonely", 0), ("x", 0)]);
        let c = ctx(&[("x", Type::Float)]);
        assert!(resolve_embeddings(&i, &c, &cl, &d).is_none());
    }

    #[test]
    fn nearest_candidate_wins_and_bound_names_are_skipped() {
        let i = ing(
            "if (k > 0) { let near: int = k; r = near; }",
            &[("k", Type::Int), ("r", Type::Int)],
        );
        let c = ctx(&[("near", Type::Int), ("far", Type::Int), ("r", Type::Int)]);
        let cl = clusters(&[("k", 0), ("near", 0), ("far", 0), ("r", 1)]);
        let d = dict(&[("k", 0.0), ("near", 0.1), ("far", 3.0), ("r", 9.0)]);
        let out = resolve_embeddings(&i, &c, &cl, &d).unwrap();
        assert_eq!(
            out.stmt,
            parse_stmt("if (far > 0) { let near: int = far; r = near; }").unwrap()
        );
    }
}
