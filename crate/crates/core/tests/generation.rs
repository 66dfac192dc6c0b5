mod common;

use std::collections::HashSet;

use proptest::prelude::*;
use qpmhi::generation::{
    filter_constraints, id_for_key, propose_pool, read_pool, write_pool, Candidate, Constraint, Crossover, Encoding,
    Featurizer, GeneratorConfig, Genome, GenomeSpace, KnownConstraint, ParentSelection, ParentSet,
};
use qpmhi::pareto::{ObjectiveVector, ParetoFront};
use qpmhi::surrogate::{fit, Dataset, GpConfig};
use qpmhi::{par, Error};
use rand::Rng;

fn ov(v: &[f64]) -> ObjectiveVector {
    ObjectiveVector::new(v.to_vec()).unwrap()
}

fn bits(length: usize, groups: usize) -> Encoding {
    Encoding::new(GenomeSpace::Bits { length }, Featurizer::BinaryDecode { groups }).unwrap()
}

fn cfg(pool_size: usize) -> GeneratorConfig {
    GeneratorConfig {
        pool_size,
        mutation_rate: 0.1,
        crossover: Crossover::Uniform,
        elite_fraction: 0.1,
        parent_selection: ParentSelection::Uniform,
        random_fraction: 0.2,
        constraints: vec![],
    }
}

struct Labeled {
    enc: Encoding,
    cands: Vec<Candidate>,
    objs: Vec<ObjectiveVector>,
    front: ParetoFront,
}

fn labeled(n: usize, seed: u64) -> Labeled {
    let enc = bits(16, 2);
    let mut g = common::rng(seed);
    let mut seen = HashSet::new();
    let mut cands = Vec::new();
    while cands.len() < n {
        let s: String = (0..16).map(|_| if g.random::<bool>() { '1' } else { '0' }).collect();
        if seen.insert(s.clone()) {
            cands.push(enc.candidate(enc.space.parse(&s).unwrap()));
        }
    }
    let objs: Vec<ObjectiveVector> = cands.iter().map(|c| ov(&[c.features[0], 1.0 - c.features[0] * c.features[1]])).collect();
    let front = ParetoFront::from_points(ov(&[-1.0, -1.0]), cands.iter().zip(&objs).map(|(c, o)| (Some(c.id.clone()), o.clone()))).unwrap();
    Labeled { enc, cands, objs, front }
}

fn parents(l: &Labeled) -> ParentSet<'_> {
    ParentSet {
        candidates: &l.cands,
        objectives: &l.objs,
        front: &l.front,
        encoding: &l.enc,
    }
}

#[test]
fn pool_is_exact_distinct_and_feasible() {
    let l = labeled(12, 1);
    let mut c = cfg(300);
    c.constraints = vec![KnownConstraint::MinOnes { min: 6 }, KnownConstraint::Forbid { pattern: "0000".into() }];
    let p = propose_pool(&parents(&l), None, &c, 5).unwrap();
    assert_eq!(p.candidates.len(), 300);
    let keys: HashSet<&str> = p.candidates.iter().map(|c| c.key.as_str()).collect();
    assert_eq!(keys.len(), 300);
    for cand in &p.candidates {
        assert!(c.constraints.iter().all(|k| k.admits(&cand.genome)), "{}", cand.key);
        assert_eq!(cand.features, l.enc.features(&cand.genome));
        assert_eq!(cand.id, id_for_key(&cand.key));
    }
    // Elites are the labeled non-dominated designs that pass the constraints.
    let elite_ids: HashSet<&str> = l.front.ids().collect();
    for cand in &p.candidates[..p.stats.elites] {
        assert!(elite_ids.contains(cand.id.as_str()));
    }
}

#[test]
fn generation_is_seeded_and_path_independent() {
    let l = labeled(10, 2);
    let c = cfg(200);
    par::force_sequential(true);
    let a = propose_pool(&parents(&l), None, &c, 9).unwrap();
    par::force_sequential(false);
    let b = propose_pool(&parents(&l), None, &c, 9).unwrap();
    let other = propose_pool(&parents(&l), None, &c, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.candidates, other.candidates);
}

#[test]
fn constraint_acceptance_is_measured() {
    let l = labeled(10, 3);
    let mut c = cfg(400);
    c.elite_fraction = 0.0;
    c.random_fraction = 1.0;
    c.constraints = vec![KnownConstraint::SymbolAt { position: 0, symbol: '1' }];
    let p = propose_pool(&parents(&l), None, &c, 1).unwrap();
    let rate = p.stats.constraint_acceptance();
    assert!((rate - 0.5).abs() < 0.06, "acceptance {rate}");
    assert!(p.candidates.iter().all(|c| c.key.starts_with('1')));
}

#[test]
fn impossible_constraints_starve() {
    let l = labeled(6, 4);
    let mut c = cfg(20);
    c.constraints = vec![KnownConstraint::MinOnes { min: 17 }];
    match propose_pool(&parents(&l), None, &c, 1) {
        Err(Error::GenerationStarvation { requested, accepted, .. }) => {
            assert_eq!(requested, 20);
            assert_eq!(accepted, 0);
        }
        other => panic!("expected starvation, got {other:?}"),
    }
}

#[test]
fn uniform_parent_selection_ignores_the_model() {
    let l = labeled(10, 5);
    let mut data = Dataset::new(l.enc.feature_kind());
    for (c, y) in l.cands.iter().zip(&l.objs) {
        data.push(c.id.clone(), c.features.clone(), y.clone()).unwrap();
    }
    let model = fit(&data, &GpConfig::default()).unwrap();
    let c = cfg(150);
    let without = propose_pool(&parents(&l), None, &c, 3).unwrap();
    let with = propose_pool(&parents(&l), Some(&model), &c, 3).unwrap();
    assert_eq!(without, with);

    let mut weighted = c.clone();
    weighted.parent_selection = ParentSelection::SurrogateWeighted;
    let p = propose_pool(&parents(&l), Some(&model), &weighted, 3).unwrap();
    assert_eq!(p.candidates.len(), 150);
}

#[test]
fn config_validation_names_the_field() {
    let mut c = cfg(10);
    c.mutation_rate = 1.5;
    assert!(c.validate().unwrap_err().to_string().contains("mutation_rate"));
    let mut c = cfg(10);
    c.elite_fraction = 0.7;
    c.random_fraction = 0.7;
    assert!(c.validate().is_err());
    assert!(cfg(0).validate().is_err());
    let text = r#"{"pool_size": 5, "mutation_rate": 0.1, "crossover": "uniform", "parent_selection": "uniform", "extra": 1}"#;
    assert!(serde_json::from_str::<GeneratorConfig>(text).is_err());
}

#[test]
fn token_genomes_with_kgram_features() {
    let enc = Encoding::new(
        GenomeSpace::Tokens {
            alphabet: "ACGT".into(),
            max_len: 8,
        },
        Featurizer::Kgram { k: 2 },
    )
    .unwrap();
    let g = enc.space.parse("ACGA").unwrap();
    let f = enc.features(&g);
    assert_eq!(f.len(), 16);
    assert_eq!(f.iter().sum::<f64>(), 3.0);
    assert_eq!(f[1], 1.0); // AC
    assert_eq!(f[2 * 4], 1.0); // GA
    assert!(enc.space.parse("ACGX").is_err());
    assert!(enc.space.parse("").is_err());
    assert!(Encoding::new(enc.space.clone(), Featurizer::Identity).is_err());

    let seeds: Vec<Candidate> = ["ACGT", "TTGA", "CAGG"].iter().map(|s| enc.candidate(enc.space.parse(s).unwrap())).collect();
    let objs = vec![ov(&[1.0, 0.0]), ov(&[0.0, 1.0]), ov(&[0.5, 0.5])];
    let front = ParetoFront::from_points(ov(&[-1.0, -1.0]), seeds.iter().zip(&objs).map(|(c, o)| (Some(c.id.clone()), o.clone()))).unwrap();
    let set = ParentSet {
        candidates: &seeds,
        objectives: &objs,
        front: &front,
        encoding: &enc,
    };
    let mut c = cfg(60);
    c.constraints = vec![KnownConstraint::MaxLength { max: 6 }];
    let p = propose_pool(&set, None, &c, 2).unwrap();
    assert_eq!(p.candidates.len(), 60);
    assert!(p.candidates.iter().all(|c| (1..=6).contains(&c.genome.len())));
}

#[test]
fn binary_decode_reads_groups_msb_first() {
    let enc = bits(8, 2);
    let g = enc.space.parse("10000011").unwrap();
    assert_eq!(enc.features(&g), vec![8.0 / 15.0, 3.0 / 15.0]);
    assert!(Encoding::new(GenomeSpace::Bits { length: 9 }, Featurizer::BinaryDecode { groups: 2 }).is_err());
    let id = Encoding::new(GenomeSpace::Bits { length: 4 }, Featurizer::Identity).unwrap();
    assert_eq!(id.features(&id.space.parse("1010").unwrap()), vec![1.0, 0.0, 1.0, 0.0]);
}

#[test]
fn pool_csv_round_trip_and_errors() {
    let enc = bits(4, 1);
    let text = "id,genome,obj_1,obj_2\na,0101,1,2\nb,1100,0.5,3\nc,0101,9,9\n";
    let pool = read_pool(text.as_bytes(), "mem", &enc).unwrap();
    assert_eq!(pool.len(), 2);
    assert_eq!(pool.duplicates, 1);
    let mut buf = Vec::new();
    write_pool(&mut buf, &pool.candidates, pool.objectives.as_deref()).unwrap();
    let again = read_pool(buf.as_slice(), "mem", &enc).unwrap();
    assert_eq!(again.candidates, pool.candidates);
    assert_eq!(again.objectives, pool.objectives);

    let unlabeled = read_pool("id,genome\nx,1111\n".as_bytes(), "mem", &enc).unwrap();
    assert!(unlabeled.objectives.is_none());
    assert!(read_pool("".as_bytes(), "mem", &enc).unwrap().is_empty());

    for (bad, line) in [
        ("id,genome\na,0101\na,1111\n", 3),
        ("id,genome\na,01x1\n", 2),
        ("id,genome,obj_1\na,0101,nan\n", 2),
        ("id,genome,obj_2\na,0101,1\n", 1),
        ("id,genome\na,0101,7\n", 2),
    ] {
        match read_pool(bad.as_bytes(), "mem", &enc) {
            Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{bad:?}"),
            other => panic!("{bad:?}: expected a parse error, got {other:?}"),
        }
    }
}

proptest! {
    #[test]
    fn filter_keeps_exactly_the_admitted(keys in prop::collection::vec("[01]{6}", 0..30), min in 0usize..7, pos in 0usize..6) {
        let enc = bits(6, 1);
        let pool: Vec<Candidate> = keys.iter().map(|k| enc.candidate(enc.space.parse(k).unwrap())).collect();
        let preds = vec![KnownConstraint::MinOnes { min }, KnownConstraint::SymbolAt { position: pos, symbol: '0' }];
        let kept = filter_constraints(pool.clone(), &preds);
        let expected: Vec<Candidate> = pool
            .into_iter()
            .filter(|c| c.key.matches('1').count() >= min && c.key.as_bytes()[pos] == b'0')
            .collect();
        prop_assert_eq!(kept, expected);
    }

    #[test]
    fn genome_keys_round_trip(s in "[01]{1,40}") {
        let space = GenomeSpace::Bits { length: s.len() };
        let g = space.parse(&s).unwrap();
        prop_assert_eq!(g.key(), s.clone());
        prop_assert_eq!(g.ones(), s.matches('1').count());
        prop_assert!(matches!(g, Genome::Bits(_)));
        let id = id_for_key(&s);
        prop_assert_eq!(id.len(), 17);
        prop_assert!(id.starts_with('g'));
    }
}
