//! Aggregate statistics over retrieved situations: confusion matrices against
//! baselines and road-user type histograms.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::report::SituationRecord;
use crate::scenario::RoadUserType;

/// `(scenario_id, agent_id)`: one road user in one scenario.
pub type AgentKey = (String, String);

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("agent `{1}` of scenario `{0}` is not in the universe")]
    OutsideUniverse(String, String),
    #[error("situation references unknown agent `{1}` in scenario `{0}`")]
    UnknownAgent(String, String),
}

/// Rows: first filter (risk). Columns: second filter (baseline).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix2x2 {
    pub not_not: usize,
    pub not_val: usize,
    pub val_not: usize,
    pub val_val: usize,
}

impl ConfusionMatrix2x2 {
    pub fn total(&self) -> usize {
        self.not_not + self.not_val + self.val_not + self.val_val
    }

    /// Cell shares in percent, in field order; all zero for an empty universe.
    pub fn percentages(&self) -> [f64; 4] {
        let total = self.total();
        let pct = |c: usize| {
            if total == 0 {
                0.0
            } else {
                100.0 * c as f64 / total as f64
            }
        };
        [
            pct(self.not_not),
            pct(self.not_val),
            pct(self.val_not),
            pct(self.val_val),
        ]
    }
}

/// Partitions `universe` by membership in `a` and `b`.
pub fn confusion(
    a: &BTreeSet<AgentKey>,
    b: &BTreeSet<AgentKey>,
    universe: &BTreeSet<AgentKey>,
) -> Result<ConfusionMatrix2x2, AnalysisError> {
    if let Some((s, id)) = a.iter().chain(b.iter()).find(|k| !universe.contains(*k)) {
        return Err(AnalysisError::OutsideUniverse(s.clone(), id.clone()));
    }
    let mut m = ConfusionMatrix2x2::default();
    for key in universe {
        match (a.contains(key), b.contains(key)) {
            (false, false) => m.not_not += 1,
            (false, true) => m.not_val += 1,
            (true, false) => m.val_not += 1,
            (true, true) => m.val_val += 1,
        }
    }
    Ok(m)
}

/// Road-user types of a situation, normalized so that equivalent situations share a bucket.
///
/// Pairs are sorted. Triples keep the intermediary in the middle and sort the two ends.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TypeTuple(pub Vec<RoadUserType>);

impl TypeTuple {
    pub fn normalized(types: &[RoadUserType]) -> Self {
        let mut v = types.to_vec();
        match v.len() {
            2 => v.sort(),
            3 if v[0] > v[2] => v.swap(0, 2),
            _ => {}
        }
        Self(v)
    }
}

impl fmt::Display for TypeTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|t| t.as_str()).collect();
        f.write_str(&names.join("-"))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TypeHistogram {
    pub counts: BTreeMap<TypeTuple, usize>,
}

impl TypeHistogram {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn percentage(&self, key: &TypeTuple) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        100.0 * *self.counts.get(key).unwrap_or(&0) as f64 / total as f64
    }

    /// Bucket with the highest count; ties go to the smallest key.
    pub fn modal(&self) -> Option<&TypeTuple> {
        self.counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(k, _)| k)
    }
}

/// Counts situations by the normalized types of their participants.
pub fn histogram(
    situations: &[SituationRecord],
    types: &HashMap<AgentKey, RoadUserType>,
) -> Result<TypeHistogram, AnalysisError> {
    let mut hist = TypeHistogram::default();
    for s in situations {
        let kinds = s
            .participants()
            .map(|id| {
                types
                    .get(&(s.scenario_id.clone(), id.to_string()))
                    .copied()
                    .ok_or_else(|| {
                        AnalysisError::UnknownAgent(s.scenario_id.clone(), id.to_string())
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        *hist
            .counts
            .entry(TypeTuple::normalized(&kinds))
            .or_default() += 1;
    }
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use RoadUserType::*;

    fn key(id: &str) -> AgentKey {
        ("s".to_string(), id.to_string())
    }

    fn set(ids: &[&str]) -> BTreeSet<AgentKey> {
        ids.iter().map(|i| key(i)).collect()
    }

    #[test]
    fn disjoint_sets() {
        let m = confusion(&set(&["a", "b"]), &set(&["c"]), &set(&["a", "b", "c", "d"])).unwrap();
        assert_eq!(m.val_val, 0);
        assert_eq!((m.not_not, m.not_val, m.val_not), (1, 1, 2));
        assert_eq!(m.total(), 4);
        let pct: f64 = m.percentages().iter().sum();
        assert!((pct - 100.0).abs() < 0.01);
    }

    #[test]
    fn identical_sets() {
        let a = set(&["a", "c"]);
        let m = confusion(&a, &a, &set(&["a", "b", "c"])).unwrap();
        assert_eq!((m.not_val, m.val_not), (0, 0));
        assert_eq!((m.not_not, m.val_val), (1, 2));
    }

    #[test]
    fn outside_universe_errors() {
        assert!(matches!(
            confusion(&set(&["z"]), &set(&[]), &set(&["a"])),
            Err(AnalysisError::OutsideUniverse(..))
        ));
    }

    fn pair(ego: &str, first: &str) -> SituationRecord {
        SituationRecord::first_order("s", ego, first, 1.0)
    }

    fn types(entries: &[(&str, RoadUserType)]) -> HashMap<AgentKey, RoadUserType> {
        entries.iter().map(|(id, t)| (key(id), *t)).collect()
    }

    #[test]
    fn only_car_pairs() {
        let h = histogram(
            &[pair("a", "b"), pair("b", "a")],
            &types(&[("a", Car), ("b", Car)]),
        )
        .unwrap();
        assert_eq!(h.counts.len(), 1);
        assert_eq!(h.percentage(&TypeTuple(vec![Car, Car])), 100.0);
    }

    #[test]
    fn pair_order_is_normalized() {
        let t = types(&[("a", Car), ("b", Bicycle)]);
        let h = histogram(&[pair("a", "b"), pair("b", "a")], &t).unwrap();
        assert_eq!(h.counts[&TypeTuple(vec![Car, Bicycle])], 2);
    }

    #[test]
    fn triple_keeps_middle() {
        let outer_swapped = TypeTuple::normalized(&[Bicycle, Car, Pedestrian]);
        assert_eq!(
            outer_swapped,
            TypeTuple::normalized(&[Pedestrian, Car, Bicycle])
        );
        assert_ne!(
            outer_swapped,
            TypeTuple::normalized(&[Car, Bicycle, Pedestrian])
        );
        assert_eq!(outer_swapped.to_string(), "pedestrian-car-bicycle");
    }

    #[test]
    fn unknown_agent_errors() {
        assert!(matches!(
            histogram(&[pair("a", "x")], &types(&[("a", Car)])),
            Err(AnalysisError::UnknownAgent(..))
        ));
    }

    #[test]
    fn modal_bucket() {
        let t = types(&[("a", Car), ("b", Car), ("c", Pedestrian)]);
        let h = histogram(&[pair("a", "b"), pair("b", "a"), pair("a", "c")], &t).unwrap();
        assert_eq!(h.modal(), Some(&TypeTuple(vec![Car, Car])));
        let pct: f64 = h.counts.keys().map(|k| h.percentage(k)).sum();
        assert!((pct - 100.0).abs() < 0.01);
    }
}
