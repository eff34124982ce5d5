//! Session files: named automorphisms plus bounds and tolerances.
//!
//! Format (TOML):
//!
//! ```toml
//! rank = 4
//! compose-order = "right"   # optional: right | left
//! seed = 7                  # optional
//! format = "text"           # optional: text | json | tsv
//!
//! [bounds]                  # optional, all fields optional
//! L = 6
//! n = 25
//! P = 8
//! K-max = 10
//! R = 4
//! q-len = 2
//! m = 6
//!
//! [tolerances]              # optional
//! epsilon = 0.05
//! ratio-slack = 0.05
//! lambda = 1.05
//!
//! [aut.Phi]
//! a = "ad"
//! b = "a"
//! c = "b"
//! d = "c"
//! # invertible = true       # set false for endomorphism inputs
//! ```

use fgadyn::freegroup::{Automorphism, ComposeOrder, Letter, Word};
use fgadyn::growth::GrowthConfig;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("syntax error: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("rank {0} outside the I/O range [1, 26]")]
    BadRank(usize),
    #[error("automorphism {name}: unknown generator {letter:?} (rank {rank})")]
    UnknownGenerator { name: String, letter: char, rank: usize },
    #[error("automorphism {name}: image of {letter} is empty after reduction")]
    EmptyImage { name: String, letter: char },
    #[error("automorphism {name}: missing image for generator {letter}")]
    MissingImage { name: String, letter: char },
    #[error("automorphism {name} declared invertible but is not: {reason}")]
    NotInvertible { name: String, reason: String },
    #[error("automorphism {name}: bad image literal: {reason}")]
    BadImage { name: String, reason: String },
    #[error("no automorphism named {0} in the session")]
    NoSuchAutomorphism(String),
    #[error("bound {0} must be positive")]
    BadBound(&'static str),
    #[error("bad expression {expr:?}: {reason}")]
    BadExpression { expr: String, reason: String },
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Text,
    Json,
    Tsv,
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct Bounds {
    #[serde(rename = "L", default = "d_l")]
    pub l: usize,
    #[serde(default = "d_n")]
    pub n: usize,
    #[serde(rename = "P", default = "d_p")]
    pub p: usize,
    #[serde(rename = "K-max", default = "d_kmax")]
    pub k_max: usize,
    #[serde(rename = "R", default = "d_r")]
    pub r: usize,
    #[serde(rename = "q-len", default = "d_qlen")]
    pub q_len: usize,
    #[serde(default = "d_m")]
    pub m: usize,
}

fn d_l() -> usize {
    6
}
fn d_n() -> usize {
    30
}
fn d_p() -> usize {
    8
}
fn d_kmax() -> usize {
    10
}
fn d_r() -> usize {
    4
}
fn d_qlen() -> usize {
    2
}
fn d_m() -> usize {
    6
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            l: d_l(),
            n: d_n(),
            p: d_p(),
            k_max: d_kmax(),
            r: d_r(),
            q_len: d_qlen(),
            m: d_m(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct Tolerances {
    #[serde(default = "d_eps")]
    pub epsilon: f64,
    #[serde(rename = "ratio-slack", default = "d_slack")]
    pub ratio_slack: f64,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_window")]
    pub window: usize,
}

fn d_eps() -> f64 {
    0.05
}
fn d_slack() -> f64 {
    0.05
}
fn d_lambda() -> f64 {
    1.05
}
fn d_window() -> usize {
    8
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            epsilon: d_eps(),
            ratio_slack: d_slack(),
            lambda: d_lambda(),
            window: d_window(),
        }
    }
}

impl Tolerances {
    pub fn growth_config(&self) -> GrowthConfig {
        GrowthConfig {
            window: self.window,
            epsilon: self.epsilon,
            ratio_slack: self.ratio_slack,
        }
    }
}

/// A value inside an `[aut.NAME]` table: generator images are strings, the
/// reserved key `invertible` is a boolean.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutEntry {
    Image(String),
    Flag(bool),
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct SessionConfig {
    pub rank: usize,
    #[serde(rename = "compose-order", default)]
    pub compose_order: ComposeOrder,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub bounds: Bounds,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub aut: BTreeMap<String, BTreeMap<String, AutEntry>>,
}

pub struct Session {
    pub config: SessionConfig,
    pub automorphisms: BTreeMap<String, Automorphism>,
}

impl fmt::Debug for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Session(rank={}, auts={:?})", self.config.rank, self.automorphisms.keys())
    }
}

pub fn parse_session(path: &Path) -> Result<Session, SessionError> {
    let text = std::fs::read_to_string(path).map_err(|source| SessionError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_session_str(&text)
}

pub fn parse_session_str(text: &str) -> Result<Session, SessionError> {
    let config: SessionConfig = toml::from_str(text)?;
    if config.rank < 1 || config.rank > 26 {
        return Err(SessionError::BadRank(config.rank));
    }
    let b = &config.bounds;
    for (name, v) in [
        ("L", b.l),
        ("n", b.n),
        ("P", b.p),
        ("K-max", b.k_max),
        ("R", b.r),
        ("q-len", b.q_len),
        ("m", b.m),
    ] {
        if v == 0 {
            return Err(SessionError::BadBound(name));
        }
    }
    let mut automorphisms = BTreeMap::new();
    for (name, table) in &config.aut {
        let mut invertible = true;
        let mut images: Vec<Option<Word>> = vec![None; config.rank];
        for (key, entry) in table {
            if key == "invertible" {
                match entry {
                    AutEntry::Flag(b) => invertible = *b,
                    AutEntry::Image(_) => {
                        return Err(SessionError::BadImage {
                            name: name.clone(),
                            reason: "invertible must be a boolean".into(),
                        })
                    }
                }
                continue;
            }
            let mut chars = key.chars();
            let (Some(c), None) = (chars.next(), chars.next()) else {
                return Err(SessionError::BadImage {
                    name: name.clone(),
                    reason: format!("bad generator key {key:?}"),
                });
            };
            let letter = Letter::parse(c).map_err(|_| SessionError::UnknownGenerator {
                name: name.clone(),
                letter: c,
                rank: config.rank,
            })?;
            if !letter.is_positive() || letter.index() >= config.rank {
                return Err(SessionError::UnknownGenerator {
                    name: name.clone(),
                    letter: c,
                    rank: config.rank,
                });
            }
            let AutEntry::Image(s) = entry else {
                return Err(SessionError::BadImage {
                    name: name.clone(),
                    reason: format!("image of {c} must be a string"),
                });
            };
            let word = Word::parse(s).map_err(|e| SessionError::BadImage {
                name: name.clone(),
                reason: e.to_string(),
            })?;
            if word.is_empty() {
                return Err(SessionError::EmptyImage {
                    name: name.clone(),
                    letter: c,
                });
            }
            if !word.fits_rank(config.rank) {
                let bad = word
                    .letters()
                    .iter()
                    .find(|l| l.index() >= config.rank)
                    .unwrap();
                return Err(SessionError::UnknownGenerator {
                    name: name.clone(),
                    letter: bad.to_char(),
                    rank: config.rank,
                });
            }
            images[letter.index()] = Some(word);
        }
        let images: Vec<Word> = images
            .into_iter()
            .enumerate()
            .map(|(i, w)| {
                w.ok_or(SessionError::MissingImage {
                    name: name.clone(),
                    letter: Letter::positive(i).to_char(),
                })
            })
            .collect::<Result<_, _>>()?;
        let aut = Automorphism::new(config.rank, images).map_err(|e| SessionError::BadImage {
            name: name.clone(),
            reason: e.to_string(),
        })?;
        let aut = if invertible {
            aut.into_verified().map_err(|e| SessionError::NotInvertible {
                name: name.clone(),
                reason: e.to_string(),
            })?
        } else {
            aut
        };
        automorphisms.insert(name.clone(), aut);
    }
    Ok(Session {
        config,
        automorphisms,
    })
}

pub fn serialize_config(config: &SessionConfig) -> String {
    toml::to_string(config).expect("config serializes")
}

impl Session {
    pub fn get(&self, name: &str) -> Result<&Automorphism, SessionError> {
        self.automorphisms
            .get(name)
            .ok_or_else(|| SessionError::NoSuchAutomorphism(name.to_string()))
    }

    /// Evaluate a product expression like `Phi^-1*Psi` under the order
    /// convention: `right` applies the rightmost factor first, `left` the
    /// leftmost.
    pub fn expression(
        &self,
        expr: &str,
        order: ComposeOrder,
    ) -> Result<Automorphism, SessionError> {
        let mut factors = Vec::new();
        for raw in expr.split('*') {
            let raw = raw.trim();
            if raw.is_empty() {
                return Err(SessionError::BadExpression {
                    expr: expr.to_string(),
                    reason: "empty factor".into(),
                });
            }
            let (name, power) = match raw.split_once('^') {
                Some((n, p)) => {
                    let power: i64 = p.parse().map_err(|_| SessionError::BadExpression {
                        expr: expr.to_string(),
                        reason: format!("bad exponent {p:?}"),
                    })?;
                    (n.trim(), power)
                }
                None => (raw, 1),
            };
            let base = self.get(name)?;
            let f = base.power(power).map_err(|e| SessionError::BadExpression {
                expr: expr.to_string(),
                reason: e.to_string(),
            })?;
            factors.push(f);
        }
        Automorphism::compose_all(&factors, order).map_err(|e| SessionError::BadExpression {
            expr: expr.to_string(),
            reason: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RANK4: &str = r#"
rank = 4

[aut.Phi]
a = "ad"
b = "a"
c = "b"
d = "c"

[aut.Psi]
a = "ac"
b = "a"
c = "b"
d = "db"
"#;

    #[test]
    fn parses_rank4_pair() {
        let s = parse_session_str(RANK4).unwrap();
        let phi = s.get("Phi").unwrap();
        assert_eq!(phi.image(0).to_string(), "ad");
        assert!(matches!(
            phi.invertibility(),
            fgadyn::freegroup::Invertibility::VerifiedWithInverse
        ));
    }

    #[test]
    fn empty_image_rejected() {
        let text = "rank = 2\n[aut.F]\na = \"aA\"\nb = \"b\"\n";
        assert!(matches!(
            parse_session_str(text),
            Err(SessionError::EmptyImage { .. })
        ));
    }

    #[test]
    fn unknown_generator_rejected() {
        let text = "rank = 3\n[aut.F]\na = \"ad\"\nb = \"a\"\nc = \"b\"\n";
        assert!(matches!(
            parse_session_str(text),
            Err(SessionError::UnknownGenerator { letter: 'd', .. })
        ));
    }

    #[test]
    fn noninvertible_rejected_unless_flagged() {
        let text = "rank = 2\n[aut.F]\na = \"aa\"\nb = \"b\"\n";
        assert!(matches!(
            parse_session_str(text),
            Err(SessionError::NotInvertible { .. })
        ));
        let text = "rank = 2\n[aut.F]\na = \"aa\"\nb = \"b\"\ninvertible = false\n";
        let s = parse_session_str(text).unwrap();
        assert!(matches!(
            s.get("F").unwrap().invertibility(),
            fgadyn::freegroup::Invertibility::Unverified
        ));
    }

    #[test]
    fn round_trip() {
        let s = parse_session_str(RANK4).unwrap();
        let text = serialize_config(&s.config);
        let s2 = parse_session_str(&text).unwrap();
        assert_eq!(s.config, s2.config);
    }

    #[test]
    fn expressions() {
        let s = parse_session_str(RANK4).unwrap();
        let right = s
            .expression("Phi^-1*Psi", ComposeOrder::RightToLeft)
            .unwrap();
        // Φ⁻¹(Ψ(b)) = Φ⁻¹(a) = b
        assert_eq!(right.image(1).to_string(), "b");
        let left = s
            .expression("Phi^-1*Psi", ComposeOrder::LeftToRight)
            .unwrap();
        // Ψ(Φ⁻¹(a)) = Ψ(b) = a
        assert_eq!(left.image(0).to_string(), "a");
        assert!(s.expression("Nope", ComposeOrder::RightToLeft).is_err());
    }
}
