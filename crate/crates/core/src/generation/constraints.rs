use serde::{Deserialize, Serialize};

use super::genome::{Candidate, Genome};

/// A known feasibility predicate checked before a candidate enters a pool.
pub trait Constraint: Sync {
    fn admits(&self, genome: &Genome) -> bool;
}

impl<C: Constraint + ?Sized> Constraint for &C {
    fn admits(&self, genome: &Genome) -> bool {
        (**self).admits(genome)
    }
}

impl<C: Constraint + ?Sized + Send> Constraint for Box<C> {
    fn admits(&self, genome: &Genome) -> bool {
        (**self).admits(genome)
    }
}

/// Built-in predicates that can be named in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KnownConstraint {
    /// Position `position` (0-based) holds symbol `symbol` ('0'/'1' for bits).
    SymbolAt { position: usize, symbol: char },
    MinOnes { min: usize },
    MaxOnes { max: usize },
    MaxLength { max: usize },
    Forbid { pattern: String },
}

impl Constraint for KnownConstraint {
    fn admits(&self, genome: &Genome) -> bool {
        match self {
            KnownConstraint::SymbolAt { position, symbol } => match genome {
                Genome::Bits(b) => b.get(*position).is_some_and(|&x| (if x { '1' } else { '0' }) == *symbol),
                Genome::Tokens(t) => t.get(*position) == Some(symbol),
            },
            KnownConstraint::MinOnes { min } => genome.ones() >= *min,
            KnownConstraint::MaxOnes { max } => genome.ones() <= *max,
            KnownConstraint::MaxLength { max } => genome.len() <= *max,
            KnownConstraint::Forbid { pattern } => !genome.to_string().contains(pattern.as_str()),
        }
    }
}

pub(crate) fn admits_all<C: Constraint>(genome: &Genome, predicates: &[C]) -> bool {
    predicates.iter().all(|p| p.admits(genome))
}

/// Keeps the candidates that satisfy every predicate, in order.
pub fn filter_constraints<C: Constraint>(pool: Vec<Candidate>, predicates: &[C]) -> Vec<Candidate> {
    pool.into_iter().filter(|c| admits_all(&c.genome, predicates)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::{Encoding, Featurizer, GenomeSpace};

    fn pool(genomes: &[&str]) -> Vec<Candidate> {
        let e = Encoding::new(GenomeSpace::Bits { length: 3 }, Featurizer::Identity).unwrap();
        genomes
            .iter()
            .map(|g| e.parse_candidate(g.to_string(), g).unwrap())
            .collect()
    }

    #[test]
    fn empty_predicates_keep_everything() {
        let p = pool(&["000", "101"]);
        assert_eq!(filter_constraints::<KnownConstraint>(p.clone(), &[]), p);
    }

    #[test]
    fn contradiction_empties_pool() {
        let p = pool(&["000", "101", "111"]);
        let preds = [
            KnownConstraint::SymbolAt { position: 0, symbol: '1' },
            KnownConstraint::SymbolAt { position: 0, symbol: '0' },
        ];
        assert!(filter_constraints(p, &preds).is_empty());
    }

    #[test]
    fn dyn_predicates() {
        struct Even;
        impl Constraint for Even {
            fn admits(&self, g: &Genome) -> bool {
                g.ones().is_multiple_of(2)
            }
        }
        let preds: Vec<Box<dyn Constraint + Send>> = vec![Box::new(Even), Box::new(KnownConstraint::MaxOnes { max: 1 })];
        let kept = filter_constraints(pool(&["000", "011", "100", "111"]), &preds);
        assert_eq!(kept.iter().map(|c| c.id.as_str()).collect::<Vec<_>>(), vec!["000"]);
    }
}
