use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::pareto::ObjectiveVector;

use super::genome::{Candidate, Encoding};

/// Parsed pool file. `objectives` is present when the file carries
/// `obj_*` columns and is index-aligned with `candidates`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedPool {
    pub candidates: Vec<Candidate>,
    pub objectives: Option<Vec<ObjectiveVector>>,
    /// Rows dropped because an earlier row had the same genome key.
    pub duplicates: usize,
}

impl LoadedPool {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Reads a pool CSV (`id,genome[,obj_1..obj_M]`). Later rows whose genome key
/// repeats an earlier one are dropped; repeated ids are an error.
pub fn load_pool(path: impl AsRef<Path>, encoding: &Encoding) -> Result<LoadedPool> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    read_pool(file, &path.display().to_string(), encoding)
}

/// [`load_pool`] over any reader; `name` labels error messages.
pub fn read_pool<R: Read>(input: R, name: &str, encoding: &Encoding) -> Result<LoadedPool> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: name.to_string(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        None => {
            return Ok(LoadedPool {
                candidates: Vec::new(),
                objectives: None,
                duplicates: 0,
            })
        }
        Some(h) => h.map_err(|e| parse_err(1, e.to_string()))?,
    };
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names.len() < 2 || names[0] != "id" || names[1] != "genome" {
        return Err(parse_err(1, "header must start with id,genome".into()));
    }
    for (k, n) in names[2..].iter().enumerate() {
        if *n != format!("obj_{}", k + 1) {
            return Err(parse_err(1, format!("expected column obj_{}, found {n:?}", k + 1)));
        }
    }
    let m = names.len() - 2;

    let mut ids = HashSet::new();
    let mut keys = HashSet::new();
    let mut candidates = Vec::new();
    let mut objectives = Vec::new();
    let mut duplicates = 0;
    for rec in records {
        let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != names.len() {
            return Err(parse_err(line, format!("expected {} fields, found {}", names.len(), rec.len())));
        }
        let id = rec[0].trim().to_string();
        if id.is_empty() {
            return Err(parse_err(line, "empty id".into()));
        }
        if !ids.insert(id.clone()) {
            return Err(parse_err(line, format!("duplicate id {id:?}")));
        }
        let genome = encoding.space.parse(rec[1].trim()).map_err(|msg| parse_err(line, msg))?;
        let values = rec
            .iter()
            .skip(2)
            .map(|v| match v.trim().parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(parse_err(line, format!("objective {v:?} is not a finite number"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        let cand = encoding.candidate_with_id(id, genome);
        if !keys.insert(cand.key.clone()) {
            duplicates += 1;
            continue;
        }
        candidates.push(cand);
        if m > 0 {
            objectives.push(ObjectiveVector::new(values)?);
        }
    }
    Ok(LoadedPool {
        candidates,
        objectives: (m > 0).then_some(objectives),
        duplicates,
    })
}

/// Writes candidates (and optional labels) in the pool CSV layout.
pub fn write_pool<W: Write>(out: W, candidates: &[Candidate], objectives: Option<&[ObjectiveVector]>) -> Result<()> {
    let m = match objectives {
        Some(objs) => {
            crate::pareto::check_dims(candidates.len(), objs.len())?;
            objs.first().map_or(0, |o| o.dim())
        }
        None => 0,
    };
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string(), "genome".to_string()];
    header.extend((1..=m).map(|k| format!("obj_{k}")));
    w.write_record(&header)?;
    for (i, c) in candidates.iter().enumerate() {
        let mut row = vec![c.id.clone(), c.genome.to_string()];
        if let Some(objs) = objectives {
            crate::pareto::check_dims(m, objs[i].dim())?;
            row.extend(objs[i].iter().map(f64::to_string));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<pool>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::{Featurizer, GenomeSpace};

    fn enc() -> Encoding {
        Encoding::new(GenomeSpace::Bits { length: 4 }, Featurizer::Identity).unwrap()
    }

    #[test]
    fn dedups_by_key() {
        let csv = "id,genome\na,0101\nb,0101\nc,1111\n";
        let p = read_pool(csv.as_bytes(), "t", &enc()).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.duplicates, 1);
        assert_eq!(p.candidates[1].id, "c");
        assert!(p.objectives.is_none());
    }

    #[test]
    fn empty_input_is_empty_pool() {
        assert!(read_pool("".as_bytes(), "t", &enc()).unwrap().is_empty());
    }

    #[test]
    fn bad_character_names_the_row() {
        let csv = "id,genome\na,0101\nb,01x1\n";
        match read_pool(csv.as_bytes(), "t", &enc()).unwrap_err() {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("non-binary"));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let csv = "id,genome\na,0101\na,1111\n";
        assert!(matches!(read_pool(csv.as_bytes(), "t", &enc()), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn labels_round_trip() {
        let csv = "id,genome,obj_1,obj_2\na,0101,0.5,1\nb,1111,2,-3.25\n";
        let p = read_pool(csv.as_bytes(), "t", &enc()).unwrap();
        let objs = p.objectives.clone().unwrap();
        assert_eq!(objs[1].as_slice(), &[2.0, -3.25]);
        let mut buf = Vec::new();
        write_pool(&mut buf, &p.candidates, Some(&objs)).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), csv);
    }

    #[test]
    fn bad_header() {
        assert!(read_pool("name,genome\n".as_bytes(), "t", &enc()).is_err());
        assert!(read_pool("id,genome,obj_2\n".as_bytes(), "t", &enc()).is_err());
    }
}
