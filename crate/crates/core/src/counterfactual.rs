//! Counterfactual search over the discrete feature space.
//!
//! [`generate`] runs a genetic algorithm on the symbolic codes of the mutable
//! features only, so every candidate is a valid row and immutable features
//! are untouched by construction. Fitness is
//! `P(target) - λ · changes / |mutable|`. Every candidate that reaches the
//! target class is archived; archived candidates are then greedily sparsified
//! (reverting changed features while the prediction holds) and the top-k by
//! fitness with pairwise-distinct change sets are returned.
//!
//! [`exhaustive_counterfactual`] enumerates change sets by increasing size and
//! is the reference for minimality.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::domain::{FeatureId, FeatureSchema};
use crate::error::{Error, Result};
use crate::forest::argmax;
use crate::seed;

/// Largest mutable grid the exhaustive search accepts by default.
pub const DEFAULT_GRID_CAP: u128 = 1_000_000;

/// A fitted model that consumes feature codes in its schema's order.
pub trait Classifier: Sync {
    fn schema(&self) -> &FeatureSchema;

    /// Class labels, ascending; indexes the output of `predict_proba`.
    fn classes(&self) -> &[u32];

    fn predict_proba(&self, codes: &[u32]) -> Result<Vec<f64>>;

    /// Most probable class; ties go to the smaller label.
    fn predict(&self, codes: &[u32]) -> Result<u32> {
        let proba = self.predict_proba(codes)?;
        Ok(self.classes()[argmax(&proba)])
    }

    /// Probability of `class`; zero for classes the model never saw.
    fn proba_of(&self, codes: &[u32], class: u32) -> Result<f64> {
        let proba = self.predict_proba(codes)?;
        Ok(self
            .classes()
            .iter()
            .position(|&c| c == class)
            .map_or(0.0, |i| proba[i]))
    }
}

impl<C: Classifier + ?Sized> Classifier for &C {
    fn schema(&self) -> &FeatureSchema {
        (**self).schema()
    }

    fn classes(&self) -> &[u32] {
        (**self).classes()
    }

    fn predict_proba(&self, codes: &[u32]) -> Result<Vec<f64>> {
        (**self).predict_proba(codes)
    }
}

/// Which features may change, to which values, and towards which class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfConstraints {
    pub mutable: Vec<String>,
    /// Optional per-feature restriction of the declared domain.
    #[serde(default)]
    pub allowed: BTreeMap<String, Vec<u32>>,
    pub target_class: u32,
    pub k_diverse: usize,
}

impl CfConstraints {
    pub fn new<S: AsRef<str>>(mutable: &[S], target_class: u32) -> Self {
        CfConstraints {
            mutable: mutable.iter().map(|s| s.as_ref().to_string()).collect(),
            allowed: BTreeMap::new(),
            target_class,
            k_diverse: 4,
        }
    }

    /// Intervention properties only.
    pub fn bci(target_class: u32) -> Self {
        let names: Vec<&str> = FeatureId::BCI.iter().map(|f| f.name()).collect();
        Self::new(&names, target_class)
    }
}

struct Resolved {
    positions: Vec<usize>,
    domains: Vec<Vec<u32>>,
}

impl Resolved {
    fn grid_size(&self) -> u128 {
        self.domains.iter().map(|d| d.len() as u128).product()
    }
}

fn resolve(schema: &FeatureSchema, constraints: &CfConstraints) -> Result<Resolved> {
    if constraints.mutable.is_empty() {
        return Err(Error::Constraint("mutable feature set is empty".into()));
    }
    if constraints.k_diverse == 0 {
        return Err(Error::Constraint("k_diverse must be at least 1".into()));
    }
    for name in constraints.allowed.keys() {
        if !constraints.mutable.contains(name) {
            return Err(Error::Constraint(format!(
                "allowed values given for immutable feature `{name}`"
            )));
        }
    }
    let mut positions = BTreeSet::new();
    for name in &constraints.mutable {
        let pos = schema
            .position_of(name)
            .map_err(|_| Error::Constraint(format!("`{name}` is not a model feature")))?;
        if !positions.insert(pos) {
            return Err(Error::Constraint(format!("`{name}` listed twice")));
        }
    }
    let positions: Vec<usize> = positions.into_iter().collect();
    let domains = positions
        .iter()
        .map(|&pos| {
            let f = schema.features()[pos];
            let declared = f.domain.codes();
            match (constraints.allowed.get(f.name()), declared) {
                (Some(values), _) => {
                    if values.is_empty() {
                        return Err(Error::Constraint(format!("`{}` has no allowed values", f.name())));
                    }
                    if let Some(v) = values.iter().find(|&&v| !f.domain.contains(v)) {
                        return Err(Error::Constraint(format!(
                            "value {v} outside the domain of `{}`",
                            f.name()
                        )));
                    }
                    let mut values = values.clone();
                    values.sort_unstable();
                    values.dedup();
                    Ok(values)
                }
                (None, Some(all)) => Ok(all),
                (None, None) => Err(Error::Constraint(format!(
                    "`{}` needs an explicit allowed set",
                    f.name()
                ))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Resolved { positions, domains })
}

/// A modified instance that the model assigns to the target class.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterfactual {
    pub original: Vec<u32>,
    pub modified: Vec<u32>,
    /// Names of changed features, in schema order.
    pub changed_features: Vec<String>,
    pub change_count: usize,
    /// Model probability of the target class on `modified`.
    pub probability: f64,
}

impl Counterfactual {
    pub fn new(schema: &FeatureSchema, original: &[u32], modified: Vec<u32>, probability: f64) -> Self {
        let changed_features: Vec<String> = schema
            .features()
            .iter()
            .zip(original.iter().zip(&modified))
            .filter(|(_, (a, b))| a != b)
            .map(|(f, _)| f.name().to_string())
            .collect();
        Counterfactual {
            original: original.to_vec(),
            change_count: changed_features.len(),
            modified,
            changed_features,
            probability,
        }
    }

    /// Sum of absolute code differences.
    pub fn encoded_delta(&self) -> u64 {
        self.original
            .iter()
            .zip(&self.modified)
            .map(|(&a, &b)| u64::from(a.abs_diff(b)))
            .sum()
    }

    pub fn to_json(&self, schema: &FeatureSchema) -> Value {
        let render = |codes: &[u32]| -> Value {
            let map: Map<String, Value> = schema
                .features()
                .iter()
                .zip(codes)
                .map(|(f, &c)| (f.name().to_string(), Value::String(f.id.render(c))))
                .collect();
            Value::Object(map)
        };
        json!({
            "original": render(&self.original),
            "modified": render(&self.modified),
            "changed_features": self.changed_features,
            "probability": crate::forest::round9(self.probability),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaParams {
    pub population_size: usize,
    pub generations: usize,
    /// Per mutable feature, per offspring.
    pub mutation_rate: f64,
    /// Probability that a gene comes from the second parent.
    pub crossover_rate: f64,
    pub elitism: usize,
    pub sparsity_weight: f64,
    pub seed: u64,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            population_size: 50,
            generations: 100,
            mutation_rate: 0.3,
            crossover_rate: 0.5,
            elitism: 2,
            sparsity_weight: 0.1,
            seed: 0,
        }
    }
}

impl GaParams {
    pub fn validate(&self, k_diverse: usize) -> Result<()> {
        let rate = |name: &str, r: f64| {
            if (0.0..=1.0).contains(&r) {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("ga.{name} {r} outside [0, 1]")))
            }
        };
        rate("mutation_rate", self.mutation_rate)?;
        rate("crossover_rate", self.crossover_rate)?;
        if self.population_size < k_diverse.max(2) {
            return Err(Error::InvalidConfig(format!(
                "ga.population_size must be at least max(2, k_diverse = {k_diverse})"
            )));
        }
        if self.elitism > self.population_size {
            return Err(Error::InvalidConfig("ga.elitism exceeds population size".into()));
        }
        if self.sparsity_weight < 0.0 || !self.sparsity_weight.is_finite() {
            return Err(Error::InvalidConfig("ga.sparsity_weight must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
struct Score {
    probability: f64,
    valid: bool,
}

struct Search<'a, C: Classifier + ?Sized> {
    model: &'a C,
    instance: &'a [u32],
    resolved: &'a Resolved,
    target: u32,
    sparsity_weight: f64,
    origin: Vec<u32>,
    cache: BTreeMap<Vec<u32>, Score>,
}

impl<C: Classifier + ?Sized> Search<'_, C> {
    fn codes(&self, genes: &[u32]) -> Vec<u32> {
        let mut codes = self.instance.to_vec();
        for (&pos, &g) in self.resolved.positions.iter().zip(genes) {
            codes[pos] = g;
        }
        codes
    }

    fn changes(&self, genes: &[u32]) -> usize {
        genes.iter().zip(&self.origin).filter(|(a, b)| a != b).count()
    }

    fn score(&mut self, genes: &[u32]) -> Result<Score> {
        if let Some(s) = self.cache.get(genes) {
            return Ok(*s);
        }
        let codes = self.codes(genes);
        let proba = self.model.predict_proba(&codes)?;
        let classes = self.model.classes();
        let probability = classes
            .iter()
            .position(|&c| c == self.target)
            .map_or(0.0, |i| proba[i]);
        let score = Score {
            probability,
            valid: classes[argmax(&proba)] == self.target,
        };
        self.cache.insert(genes.to_vec(), score);
        Ok(score)
    }

    fn fitness(&mut self, genes: &[u32]) -> Result<f64> {
        let p = self.score(genes)?.probability;
        let m = self.origin.len() as f64;
        Ok(p - self.sparsity_weight * self.changes(genes) as f64 / m)
    }

    /// Reverts changed genes one at a time (schema order) while the
    /// prediction stays on target.
    fn sparsify(&mut self, genes: &[u32]) -> Result<Vec<u32>> {
        let mut current = genes.to_vec();
        loop {
            let mut improved = false;
            for i in 0..current.len() {
                if current[i] == self.origin[i] {
                    continue;
                }
                let mut trial = current.clone();
                trial[i] = self.origin[i];
                if self.score(&trial)?.valid {
                    current = trial;
                    improved = true;
                }
            }
            if !improved {
                return Ok(current);
            }
        }
    }
}

fn rank(a: &(f64, usize, Vec<u32>), b: &(f64, usize, Vec<u32>)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then(a.1.cmp(&b.1))
        .then_with(|| a.2.cmp(&b.2))
}

/// Diverse counterfactuals for `instance` (codes in `model.schema()` order),
/// best first. An instance already in the target class yields a single
/// zero-change counterfactual; an unsuccessful search yields an empty list.
pub fn generate<C: Classifier + ?Sized>(
    model: &C,
    instance: &[u32],
    constraints: &CfConstraints,
    params: &GaParams,
) -> Result<Vec<Counterfactual>> {
    let schema = model.schema();
    let resolved = resolve(schema, constraints)?;
    params.validate(constraints.k_diverse)?;
    schema.validate_codes(instance)?;
    let target = constraints.target_class;

    let origin: Vec<u32> = resolved.positions.iter().map(|&p| instance[p]).collect();
    let mut search = Search {
        model,
        instance,
        resolved: &resolved,
        target,
        sparsity_weight: params.sparsity_weight,
        origin: origin.clone(),
        cache: BTreeMap::new(),
    };
    let here = search.score(&origin)?;
    if here.valid {
        return Ok(vec![Counterfactual::new(
            schema,
            instance,
            instance.to_vec(),
            here.probability,
        )]);
    }

    let m = origin.len();
    let mut rng = seed::stream(params.seed, 0);
    let random_value = |rng: &mut rand_chacha::ChaCha8Rng, i: usize| {
        let domain = &resolved.domains[i];
        domain[rng.gen_range(0..domain.len())]
    };

    // Initial population: the instance itself plus random change sets of
    // uniformly drawn size.
    let mut population: Vec<Vec<u32>> = vec![origin.clone()];
    while population.len() < params.population_size {
        let mut genes = origin.clone();
        let n_changes = rng.gen_range(1..=m);
        for i in sample(&mut rng, m, n_changes) {
            genes[i] = random_value(&mut rng, i);
        }
        population.push(genes);
    }

    for _ in 0..params.generations {
        let mut scored = population
            .into_iter()
            .map(|g| Ok((search.fitness(&g)?, search.changes(&g), g)))
            .collect::<Result<Vec<_>>>()?;
        scored.sort_by(rank);

        let tournament = |rng: &mut rand_chacha::ChaCha8Rng| {
            let a = rng.gen_range(0..scored.len());
            let b = rng.gen_range(0..scored.len());
            // `scored` is sorted best first.
            &scored[a.min(b)].2
        };
        let mut next: Vec<Vec<u32>> = scored
            .iter()
            .take(params.elitism)
            .map(|s| s.2.clone())
            .collect();
        // Fresh random immigrants keep the search moving when every
        // candidate is invalid and the sparsity term pulls towards the origin.
        let immigrants = params.population_size / 5;
        let offspring = params.population_size.saturating_sub(immigrants).max(next.len());
        while next.len() < offspring {
            let first = tournament(&mut rng);
            let second = tournament(&mut rng);
            let mut child: Vec<u32> = first
                .iter()
                .zip(second)
                .map(|(&a, &b)| if rng.gen_bool(params.crossover_rate) { b } else { a })
                .collect();
            for i in 0..m {
                if rng.gen_bool(params.mutation_rate) {
                    child[i] = if rng.gen_bool(0.5) {
                        origin[i]
                    } else {
                        random_value(&mut rng, i)
                    };
                }
            }
            next.push(child);
        }
        while next.len() < params.population_size {
            next.push((0..m).map(|i| random_value(&mut rng, i)).collect());
        }
        population = next;
    }
    for g in &population {
        search.score(g)?;
    }

    let valid: Vec<Vec<u32>> = search
        .cache
        .iter()
        .filter(|(_, s)| s.valid)
        .map(|(g, _)| g.clone())
        .collect();
    let mut archive: BTreeSet<Vec<u32>> = valid.iter().cloned().collect();
    for genes in &valid {
        archive.insert(search.sparsify(genes)?);
    }

    let mut ranked = archive
        .into_iter()
        .map(|g| Ok((search.fitness(&g)?, search.changes(&g), g)))
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(rank);

    // One entry per distinct change set, best fitness first.
    let mut seen_change_sets: BTreeSet<Vec<usize>> = BTreeSet::new();
    let distinct: Vec<(usize, Vec<u32>)> = ranked
        .into_iter()
        .filter(|(_, _, genes)| seen_change_sets.insert((0..m).filter(|&i| genes[i] != origin[i]).collect()))
        .map(|(_, changes, genes)| (changes, genes))
        .collect();

    // The fittest candidate of each change count comes first, sparsest
    // levels before denser ones, so the sparsest solution found is always
    // returned; remaining slots go to the fittest of the rest.
    let mut chosen: Vec<usize> = Vec::new();
    let mut levels: Vec<usize> = distinct.iter().map(|(c, _)| *c).collect();
    levels.sort_unstable();
    levels.dedup();
    for level in levels {
        if chosen.len() == constraints.k_diverse {
            break;
        }
        if let Some(i) = distinct.iter().position(|(c, _)| *c == level) {
            chosen.push(i);
        }
    }
    for i in 0..distinct.len() {
        if chosen.len() == constraints.k_diverse {
            break;
        }
        if !chosen.contains(&i) {
            chosen.push(i);
        }
    }
    chosen.sort_unstable();

    chosen
        .into_iter()
        .map(|i| {
            let genes = &distinct[i].1;
            let probability = search.score(genes)?.probability;
            Ok(Counterfactual::new(schema, instance, search.codes(genes), probability))
        })
        .collect()
}

/// Fewest changes first, then highest target probability, then the
/// alphabetically smallest list of changed names, then smallest code delta.
pub fn select_minimal(candidates: &[Counterfactual]) -> Result<Counterfactual> {
    let sorted_names = |c: &Counterfactual| {
        let mut names = c.changed_features.clone();
        names.sort();
        names
    };
    candidates
        .iter()
        .min_by(|a, b| {
            a.change_count
                .cmp(&b.change_count)
                .then(b.probability.total_cmp(&a.probability))
                .then_with(|| sorted_names(a).cmp(&sorted_names(b)))
                .then_with(|| a.encoded_delta().cmp(&b.encoded_delta()))
        })
        .cloned()
        .ok_or(Error::NoCounterfactual)
}

/// Smallest counterfactual by exhaustive enumeration: change sets of size
/// 1, 2, ... in lexicographic position order, values in domain order.
pub fn exhaustive_counterfactual<C: Classifier + ?Sized>(
    model: &C,
    instance: &[u32],
    constraints: &CfConstraints,
    max_changes: usize,
) -> Result<Option<Counterfactual>> {
    exhaustive_counterfactual_capped(model, instance, constraints, max_changes, DEFAULT_GRID_CAP)
}

pub fn exhaustive_counterfactual_capped<C: Classifier + ?Sized>(
    model: &C,
    instance: &[u32],
    constraints: &CfConstraints,
    max_changes: usize,
    cap: u128,
) -> Result<Option<Counterfactual>> {
    let schema = model.schema();
    let resolved = resolve(schema, constraints)?;
    schema.validate_codes(instance)?;
    let size = resolved.grid_size();
    if size > cap {
        return Err(Error::GridTooLarge { size, cap });
    }
    let target = constraints.target_class;
    let check = |codes: &[u32]| -> Result<Option<Counterfactual>> {
        if model.predict(codes)? == target {
            let p = model.proba_of(codes, target)?;
            Ok(Some(Counterfactual::new(schema, instance, codes.to_vec(), p)))
        } else {
            Ok(None)
        }
    };
    if let Some(cf) = check(instance)? {
        return Ok(Some(cf));
    }

    let m = resolved.positions.len();
    // Alternative values for each mutable feature.
    let alternatives: Vec<Vec<u32>> = resolved
        .domains
        .iter()
        .zip(&resolved.positions)
        .map(|(d, &p)| d.iter().copied().filter(|&v| v != instance[p]).collect())
        .collect();

    for k in 1..=max_changes.min(m) {
        let mut subset: Vec<usize> = (0..k).collect();
        loop {
            if subset.iter().all(|&i| !alternatives[i].is_empty()) {
                let mut digits = vec![0usize; k];
                'values: loop {
                    let mut codes = instance.to_vec();
                    for (j, &i) in subset.iter().enumerate() {
                        codes[resolved.positions[i]] = alternatives[i][digits[j]];
                    }
                    if let Some(cf) = check(&codes)? {
                        return Ok(Some(cf));
                    }
                    // Odometer increment, last position fastest.
                    for j in (0..k).rev() {
                        digits[j] += 1;
                        if digits[j] < alternatives[subset[j]].len() {
                            continue 'values;
                        }
                        digits[j] = 0;
                    }
                    break;
                }
            }
            // Next k-combination of 0..m in lexicographic order.
            let Some(j) = (0..k).rev().find(|&j| subset[j] < m - k + j) else {
                break;
            };
            subset[j] += 1;
            for l in j + 1..k {
                subset[l] = subset[l - 1] + 1;
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::schema_default;
    use crate::simulator::oracle::BehaviourRule;

    /// Class 1 iff at least `need` of the first three features are 1.
    struct Count {
        schema: FeatureSchema,
        need: u32,
    }

    impl Count {
        fn new(need: u32) -> Self {
            Count {
                schema: FeatureSchema::from_names(&["affect", "dose", "cognitive_load", "age"]).unwrap(),
                need,
            }
        }
    }

    impl Classifier for Count {
        fn schema(&self) -> &FeatureSchema {
            &self.schema
        }
        fn classes(&self) -> &[u32] {
            &[0, 1]
        }
        fn predict_proba(&self, codes: &[u32]) -> Result<Vec<f64>> {
            let hits = codes[..3].iter().filter(|&&c| c == 1).count() as u32;
            let p = (f64::from(hits) / 3.0).min(1.0);
            Ok(if hits >= self.need { vec![0.0, 1.0] } else { vec![1.0 - p / 2.0, p / 2.0] })
        }
    }

    fn cf(changes: &[&str], probability: f64) -> Counterfactual {
        Counterfactual {
            original: vec![0; 3],
            modified: vec![0; 3],
            changed_features: changes.iter().map(|s| s.to_string()).collect(),
            change_count: changes.len(),
            probability,
        }
    }

    #[test]
    fn select_minimal_rules() {
        let picked = select_minimal(&[cf(&["a", "b", "c"], 1.0), cf(&["b"], 0.7), cf(&["a", "c"], 0.9)]).unwrap();
        assert_eq!(picked.changed_features, ["b"]);
        let picked = select_minimal(&[cf(&["x"], 0.6), cf(&["y"], 0.9)]).unwrap();
        assert_eq!(picked.changed_features, ["y"]);
        let picked = select_minimal(&[cf(&["y"], 0.8), cf(&["x"], 0.8)]).unwrap();
        assert_eq!(picked.changed_features, ["x"]);
        let only = cf(&["z"], 0.5);
        assert_eq!(select_minimal(std::slice::from_ref(&only)).unwrap(), only);
        assert!(matches!(select_minimal(&[]), Err(Error::NoCounterfactual)));
    }

    #[test]
    fn constraint_errors() {
        let model = Count::new(1);
        let instance = [0, 0, 0, 40];
        let empty = CfConstraints::new::<&str>(&[], 1);
        assert!(matches!(
            generate(&model, &instance, &empty, &GaParams::default()),
            Err(Error::Constraint(_))
        ));
        let unknown = CfConstraints::new(&["motion"], 1);
        assert!(generate(&model, &instance, &unknown, &GaParams::default()).is_err());
        let mut bad_domain = CfConstraints::new(&["dose"], 1);
        bad_domain.allowed.insert("dose".into(), vec![9]);
        assert!(generate(&model, &instance, &bad_domain, &GaParams::default()).is_err());
        let mut immutable = CfConstraints::new(&["dose"], 1);
        immutable.allowed.insert("age".into(), vec![30]);
        assert!(generate(&model, &instance, &immutable, &GaParams::default()).is_err());
    }

    #[test]
    fn identity_when_already_on_target() {
        let model = Count::new(1);
        let instance = [1, 0, 0, 40];
        let out = generate(&model, &instance, &CfConstraints::new(&["dose"], 1), &GaParams::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].change_count, 0);
        assert_eq!(out[0].modified, instance);
    }

    #[test]
    fn ga_finds_minimal_and_diverse_changes() {
        let model = Count::new(2);
        let instance = [0, 0, 0, 40];
        let constraints = CfConstraints::new(&["affect", "dose", "cognitive_load"], 1);
        let out = generate(&model, &instance, &constraints, &GaParams::default()).unwrap();
        assert!(!out.is_empty());
        let sets: BTreeSet<_> = out.iter().map(|c| c.changed_features.clone()).collect();
        assert_eq!(sets.len(), out.len());
        for c in &out {
            assert_eq!(model.predict(&c.modified).unwrap(), 1);
            assert_eq!(c.modified[3], 40);
        }
        assert_eq!(select_minimal(&out).unwrap().change_count, 2);
        let again = generate(&model, &instance, &constraints, &GaParams::default()).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn restricted_domain_is_respected() {
        let model = Count::new(1);
        let instance = [0, 0, 0, 40];
        let mut constraints = CfConstraints::new(&["affect", "dose"], 1);
        constraints.allowed.insert("affect".into(), vec![0, 2, 3]);
        let out = generate(&model, &instance, &constraints, &GaParams::default()).unwrap();
        assert!(out.iter().all(|c| c.modified[0] != 1));
        assert!(out.iter().all(|c| c.modified[1] == 1));
    }

    #[test]
    fn exhaustive_search_basics() {
        let model = Count::new(2);
        let constraints = CfConstraints::new(&["affect", "dose", "cognitive_load"], 1);
        let found = exhaustive_counterfactual(&model, &[0, 0, 0, 40], &constraints, 3)
            .unwrap()
            .unwrap();
        assert_eq!(found.change_count, 2);
        assert_eq!(found.changed_features, ["affect", "dose"]);
        assert!(exhaustive_counterfactual(&model, &[0, 0, 0, 40], &constraints, 1)
            .unwrap()
            .is_none());
        let single = exhaustive_counterfactual(&model, &[1, 0, 0, 40], &constraints, 3)
            .unwrap()
            .unwrap();
        assert_eq!(single.change_count, 1);
        assert!(matches!(
            exhaustive_counterfactual_capped(&model, &[0, 0, 0, 40], &constraints, 3, 10),
            Err(Error::GridTooLarge { size: 125, cap: 10 })
        ));
    }

    #[test]
    fn no_flip_under_threshold_64() {
        let model = BehaviourRule::default_schema(64);
        let schema = schema_default();
        let instance: Vec<u32> = schema
            .features()
            .iter()
            .map(|f| f.domain.codes().map_or(3, |c| c[0]))
            .collect();
        let constraints = CfConstraints::bci(1);
        assert!(exhaustive_counterfactual(&model, &instance, &constraints, 5)
            .unwrap()
            .is_none());
        assert!(generate(&model, &instance, &constraints, &GaParams::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn json_export() {
        let schema = FeatureSchema::from_names(&["motion", "dose"]).unwrap();
        let c = Counterfactual::new(&schema, &[0, 4], vec![0, 2], 0.75);
        let v = c.to_json(&schema);
        assert_eq!(v["original"]["motion"], "stationary");
        assert_eq!(v["modified"]["dose"], "2");
        assert_eq!(v["changed_features"], json!(["dose"]));
        assert_eq!(c.encoded_delta(), 2);
    }
}
