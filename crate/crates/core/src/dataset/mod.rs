//! Normalisation, keyed storage and split management of vectorized frames.

pub mod container;
pub mod generate;
pub mod key;
pub mod split;
pub mod vectorize;

pub use container::{ContainerReader, DatasetContainer, Header, Provenance, SeedRegistry};
pub use generate::{generate_dataset, generate_record, DatasetKind, DatasetSpec};
pub use key::{record_seed, WaveformKey};
pub use split::{make_splits, Split, SplitRatios, Splits};
pub use vectorize::{normalize_vectorize, VectorizedFrame, IMAGE_SIDE, VECTOR_LEN};
