//! The bundled example automorphisms used by the reference-claim suite.

use fgadyn::freegroup::Automorphism;

/// Rank-4 pair: Phi is fully irreducible, Psi preserves the factor
/// generated by a, b, c.
pub fn rank4_pair() -> (Automorphism, Automorphism) {
    let phi = Automorphism::from_strs(4, &["ad", "a", "b", "c"])
        .unwrap()
        .into_verified()
        .unwrap();
    let psi = Automorphism::from_strs(4, &["ac", "a", "b", "db"])
        .unwrap()
        .into_verified()
        .unwrap();
    (phi, psi)
}

/// Rank-5 pair: Phi1 twists d and e over the growing c-direction, Phi2
/// fixes e.
pub fn rank5_pair() -> (Automorphism, Automorphism) {
    let phi1 = Automorphism::from_strs(5, &["ac", "a", "b", "dc", "ec"])
        .unwrap()
        .into_verified()
        .unwrap();
    let phi2 = Automorphism::from_strs(5, &["ad", "a", "b", "c", "e"])
        .unwrap()
        .into_verified()
        .unwrap();
    (phi1, phi2)
}

/// Session-file text equivalent to the bundled examples.
pub const RANK4_SESSION: &str = r#"rank = 4

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

pub const RANK5_SESSION: &str = r#"rank = 5

[aut.Phi1]
a = "ac"
b = "a"
c = "b"
d = "dc"
e = "ec"

[aut.Phi2]
a = "ad"
b = "a"
c = "b"
d = "c"
e = "e"
"#;
