use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::surrogate::FeatureKind;

/// A design: fixed-length bitstring or a token sequence (one char per token).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Genome {
    Bits(Vec<bool>),
    Tokens(Vec<char>),
}

impl Genome {
    pub fn len(&self) -> usize {
        match self {
            Genome::Bits(b) => b.len(),
            Genome::Tokens(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Canonical string form; equal genomes have equal keys and vice versa.
    pub fn key(&self) -> String {
        self.to_string()
    }

    pub fn ones(&self) -> usize {
        match self {
            Genome::Bits(b) => b.iter().filter(|&&x| x).count(),
            Genome::Tokens(t) => t.iter().filter(|&&c| c == '1').count(),
        }
    }

    pub fn as_bits(&self) -> Option<&[bool]> {
        match self {
            Genome::Bits(b) => Some(b),
            Genome::Tokens(_) => None,
        }
    }
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Genome::Bits(b) => b.iter().try_for_each(|&x| f.write_str(if x { "1" } else { "0" })),
            Genome::Tokens(t) => t.iter().try_for_each(|c| write!(f, "{c}")),
        }
    }
}

/// Stable identifier derived from a genome key.
pub fn id_for_key(key: &str) -> String {
    let digest = Sha256::digest(key.as_bytes());
    let mut id = String::with_capacity(17);
    id.push('g');
    for byte in &digest[..8] {
        id.push_str(&format!("{byte:02x}"));
    }
    id
}

/// Genome space of a campaign.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenomeSpace {
    Bits { length: usize },
    Tokens { alphabet: String, max_len: usize },
}

impl GenomeSpace {
    pub fn validate(&self) -> Result<()> {
        match self {
            GenomeSpace::Bits { length } if *length == 0 => Err(Error::invalid("bitstring length must be at least 1")),
            GenomeSpace::Tokens { alphabet, max_len } => {
                if *max_len == 0 {
                    return Err(Error::invalid("max token length must be at least 1"));
                }
                let chars: Vec<char> = alphabet.chars().collect();
                if chars.is_empty() || chars.iter().any(|c| c.is_whitespace() || *c == ',') {
                    return Err(Error::invalid("token alphabet must be non-empty without whitespace or commas"));
                }
                let mut sorted = chars.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != chars.len() {
                    return Err(Error::invalid("token alphabet has repeated symbols"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn parse(&self, s: &str) -> std::result::Result<Genome, String> {
        match self {
            GenomeSpace::Bits { length } => {
                let bits = s
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        other => Err(format!("non-binary character {other:?} in bitstring genome")),
                    })
                    .collect::<std::result::Result<Vec<bool>, String>>()?;
                if bits.len() != *length {
                    return Err(format!("bitstring has length {}, expected {length}", bits.len()));
                }
                Ok(Genome::Bits(bits))
            }
            GenomeSpace::Tokens { alphabet, max_len } => {
                let tokens: Vec<char> = s.chars().collect();
                if tokens.is_empty() || tokens.len() > *max_len {
                    return Err(format!("token genome length {} outside 1..={max_len}", tokens.len()));
                }
                if let Some(c) = tokens.iter().find(|c| !alphabet.contains(**c)) {
                    return Err(format!("token {c:?} not in alphabet"));
                }
                Ok(Genome::Tokens(tokens))
            }
        }
    }

    pub(crate) fn alphabet(&self) -> Vec<char> {
        match self {
            GenomeSpace::Bits { .. } => vec!['0', '1'],
            GenomeSpace::Tokens { alphabet, .. } => alphabet.chars().collect(),
        }
    }
}

/// Maps a genome to the surrogate's input vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Featurizer {
    /// Bits as 0/1 features (Tanimoto-compatible).
    Identity,
    /// Bits split into `groups` equal chunks, each read as an unsigned
    /// integer (most significant bit first) and scaled to [0, 1].
    BinaryDecode { groups: usize },
    /// Counts of every length-`k` substring over the space's alphabet.
    Kgram { k: usize },
}

const MAX_KGRAM_DIM: usize = 1 << 16;

/// Genome space plus featurizer: everything needed to turn strings into
/// candidates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encoding {
    pub space: GenomeSpace,
    pub featurizer: Featurizer,
}

impl Encoding {
    pub fn new(space: GenomeSpace, featurizer: Featurizer) -> Result<Self> {
        let enc = Self { space, featurizer };
        enc.validate()?;
        Ok(enc)
    }

    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        match (&self.featurizer, &self.space) {
            (Featurizer::Identity, GenomeSpace::Bits { .. }) => Ok(()),
            (Featurizer::Identity, GenomeSpace::Tokens { .. }) => {
                Err(Error::invalid("identity featurizer needs bitstring genomes; use kgram"))
            }
            (Featurizer::BinaryDecode { groups }, GenomeSpace::Bits { length }) => {
                if *groups == 0 || length % groups != 0 || length / groups > 52 {
                    Err(Error::invalid(format!(
                        "binary_decode needs the bit length {length} split into equal groups of at most 52 bits, got {groups} groups"
                    )))
                } else {
                    Ok(())
                }
            }
            (Featurizer::BinaryDecode { .. }, GenomeSpace::Tokens { .. }) => {
                Err(Error::invalid("binary_decode featurizer needs bitstring genomes"))
            }
            (Featurizer::Kgram { k }, space) => {
                let a = space.alphabet().len();
                let dim = u32::try_from(*k).ok().and_then(|k| a.checked_pow(k));
                match dim {
                    Some(d) if *k >= 1 && d <= MAX_KGRAM_DIM => Ok(()),
                    _ => Err(Error::invalid(format!("kgram k={k} is zero or yields too many features"))),
                }
            }
        }
    }

    pub fn feature_kind(&self) -> FeatureKind {
        match self.featurizer {
            Featurizer::Identity => FeatureKind::Binary,
            _ => FeatureKind::DenseReal,
        }
    }

    pub fn features(&self, genome: &Genome) -> Vec<f64> {
        match (&self.featurizer, genome) {
            (Featurizer::Identity, g) => match g {
                Genome::Bits(b) => b.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect(),
                Genome::Tokens(t) => t.iter().map(|&c| if c == '1' { 1.0 } else { 0.0 }).collect(),
            },
            (Featurizer::BinaryDecode { groups }, Genome::Bits(b)) => {
                let width = b.len() / groups;
                let top = ((1u64 << width) - 1) as f64;
                b.chunks(width)
                    .map(|chunk| chunk.iter().fold(0u64, |acc, &x| (acc << 1) | u64::from(x)) as f64 / top)
                    .collect()
            }
            (Featurizer::Kgram { k }, g) => {
                let alphabet = self.space.alphabet();
                let symbols: Vec<usize> = g
                    .to_string()
                    .chars()
                    .map(|c| alphabet.iter().position(|&a| a == c).unwrap_or(0))
                    .collect();
                let mut counts = vec![0.0; alphabet.len().pow(*k as u32)];
                for w in symbols.windows(*k) {
                    let slot = w.iter().fold(0, |acc, &s| acc * alphabet.len() + s);
                    counts[slot] += 1.0;
                }
                counts
            }
            (Featurizer::BinaryDecode { .. }, Genome::Tokens(_)) => Vec::new(),
        }
    }

    /// Candidate with a generated id.
    pub fn candidate(&self, genome: Genome) -> Candidate {
        let key = genome.key();
        self.candidate_with_id(id_for_key(&key), genome)
    }

    pub fn candidate_with_id(&self, id: String, genome: Genome) -> Candidate {
        Candidate {
            id,
            features: self.features(&genome),
            key: genome.key(),
            genome,
        }
    }

    pub fn parse_candidate(&self, id: String, genome: &str) -> Result<Candidate> {
        let g = self.space.parse(genome).map_err(Error::InvalidInput)?;
        Ok(self.candidate_with_id(id, g))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub id: String,
    pub genome: Genome,
    pub features: Vec<f64>,
    pub key: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(n: usize, f: Featurizer) -> Encoding {
        Encoding::new(GenomeSpace::Bits { length: n }, f).unwrap()
    }

    #[test]
    fn parse_and_key() {
        let e = bits(4, Featurizer::Identity);
        let c = e.parse_candidate("a".into(), "0110").unwrap();
        assert_eq!(c.key, "0110");
        assert_eq!(c.features, vec![0.0, 1.0, 1.0, 0.0]);
        assert!(e.space.parse("01x0").unwrap_err().contains("non-binary"));
        assert!(e.space.parse("011").is_err());
    }

    #[test]
    fn decode_groups() {
        let e = bits(8, Featurizer::BinaryDecode { groups: 2 });
        let g = e.space.parse("11110001").unwrap();
        assert_eq!(e.features(&g), vec![1.0, 1.0 / 15.0]);
        assert!(Encoding::new(GenomeSpace::Bits { length: 7 }, Featurizer::BinaryDecode { groups: 2 }).is_err());
    }

    #[test]
    fn kgram_counts() {
        let e = Encoding::new(
            GenomeSpace::Tokens {
                alphabet: "ab".into(),
                max_len: 8,
            },
            Featurizer::Kgram { k: 2 },
        )
        .unwrap();
        let g = e.space.parse("aabab").unwrap();
        // aa, ab, ba, bb
        assert_eq!(e.features(&g), vec![1.0, 2.0, 1.0, 0.0]);
        assert!(e.space.parse("abc").is_err());
    }

    #[test]
    fn ids_are_stable_hashes() {
        let a = id_for_key("0101");
        assert_eq!(a, id_for_key("0101"));
        assert_ne!(a, id_for_key("0110"));
        assert_eq!(a.len(), 17);
    }

    #[test]
    fn identity_rejects_tokens() {
        let space = GenomeSpace::Tokens {
            alphabet: "xyz".into(),
            max_len: 3,
        };
        assert!(Encoding::new(space, Featurizer::Identity).is_err());
    }
}
