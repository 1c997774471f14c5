use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub Uuid);

        impl $name {
            pub fn new_random() -> Self {
                $name(Uuid::new_v4())
            }

            pub const fn from_u128(v: u128) -> Self {
                $name(Uuid::from_u128(v))
            }

            pub fn as_u128(&self) -> u128 {
                self.0.as_u128()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }

        impl FromStr for $name {
            type Err = uuid::Error;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Uuid::parse_str(s).map($name)
            }
        }

        impl From<Uuid> for $name {
            fn from(u: Uuid) -> Self {
                $name(u)
            }
        }
    };
}

id_type!(
    /// Entity node identifier.
    NodeId
);
id_type!(
    /// Semantic or episodic edge identifier.
    EdgeId
);
id_type!(EpisodeId);
id_type!(CommunityId);
id_type!(
    /// Links edges lowered from one multi-entity fact.
    FactGroupId
);

/// Generator for fresh identifiers. Seeded generators produce the same id
/// sequence on every run.
pub struct IdGen {
    rng: Option<ChaCha8Rng>,
}

impl IdGen {
    pub fn random() -> Self {
        IdGen { rng: None }
    }

    pub fn seeded(seed: u64) -> Self {
        IdGen {
            rng: Some(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    pub fn next_uuid(&mut self) -> Uuid {
        match &mut self.rng {
            None => Uuid::new_v4(),
            Some(rng) => {
                let mut bytes = [0u8; 16];
                rng.fill_bytes(&mut bytes);
                uuid::Builder::from_random_bytes(bytes).into_uuid()
            }
        }
    }

    pub fn next<T: From<Uuid>>(&mut self) -> T {
        T::from(self.next_uuid())
    }
}

impl fmt::Debug for IdGen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IdGen").field("seeded", &self.rng.is_some()).finish()
    }
}
