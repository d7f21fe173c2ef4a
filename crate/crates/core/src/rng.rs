//! Seed derivation tree.
//!
//! Every random decision is a pure function of the global seed:
//!
//! ```text
//! global_seed
//! ├── WORLD                         world generation (mixtures, presets)
//! ├── PREVIEW                       sample preview of a generated world
//! └── EXPERIMENT / e                one experiment
//!     ├── ALGORITHM                 learner choice
//!     ├── ROI                       continent, location, extent
//!     ├── SAMPLES                   labels and features
//!     ├── SPLIT                     train/test partition
//!     ├── BASELINE                  64-dimension learner
//!     │   └── t                     tree t (bootstrap, feature draws)
//!     └── ABLATION / k              top-k learner
//!         └── t
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub const WORLD: u64 = 0x574f_524c_44;
pub const EXPERIMENT: u64 = 0x4558_5045;
pub const PREVIEW: u64 = 0x5052_4556;
pub const ALGORITHM: u64 = 1;
pub const ROI: u64 = 2;
pub const SAMPLES: u64 = 3;
pub const SPLIT: u64 = 4;
pub const BASELINE: u64 = 5;
pub const ABLATION: u64 = 6;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `tag` under `parent`.
pub fn derive(parent: u64, tag: u64) -> u64 {
    splitmix64(parent ^ splitmix64(tag.wrapping_add(0x632b_e59b_d9b4_e019)))
}

pub fn derive_path(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(parent, |seed, &tag| derive(seed, tag))
}

pub fn experiment_seed(global_seed: u64, experiment_index: u64) -> u64 {
    derive_path(global_seed, &[EXPERIMENT, experiment_index])
}

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}
