use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Link types realised by the two- and four-band twister models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KnotClass {
    Unknot,
    Unlink,
    HopfLink,
    HopfChain,
    SolomonKnot,
    HopfLinkPlusUnlink,
    UnknotPlusUnlink,
    DoubleUnlinks,
}

impl KnotClass {
    pub const ALL: [KnotClass; 8] = [
        KnotClass::Unknot,
        KnotClass::Unlink,
        KnotClass::HopfLink,
        KnotClass::HopfChain,
        KnotClass::SolomonKnot,
        KnotClass::HopfLinkPlusUnlink,
        KnotClass::UnknotPlusUnlink,
        KnotClass::DoubleUnlinks,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KnotClass::Unknot => "Unknot",
            KnotClass::Unlink => "Unlink",
            KnotClass::HopfLink => "HopfLink",
            KnotClass::HopfChain => "HopfChain",
            KnotClass::SolomonKnot => "SolomonKnot",
            KnotClass::HopfLinkPlusUnlink => "HopfLinkPlusUnlink",
            KnotClass::UnknotPlusUnlink => "UnknotPlusUnlink",
            KnotClass::DoubleUnlinks => "DoubleUnlinks",
        }
    }
}

impl fmt::Display for KnotClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown knot class `{0}`")]
pub struct UnknownClass(pub String);

impl FromStr for KnotClass {
    type Err = UnknownClass;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KnotClass::ALL.into_iter().find(|c| c.name().eq_ignore_ascii_case(s)).ok_or_else(|| UnknownClass(s.to_string()))
    }
}
