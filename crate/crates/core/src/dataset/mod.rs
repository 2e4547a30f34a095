//! Corpus ingestion and task construction.

mod corpus;
mod fewshot;
mod manifest;
mod silence;
mod split;
mod task;
mod wordsets;

pub use corpus::{parse_entry_path, scan_corpus, BackgroundFile, CorpusEntry, CorpusScan, BACKGROUND_DIR, CORPUS_WORDS};
pub use fewshot::{sample_fewshot, FewShotSample};
pub use manifest::{read_manifest, write_manifest, ManifestRow, MANIFEST_COLUMNS};
pub use silence::{plan_silence, synthesize_silence, SilenceCrop};
pub use split::{assign_split, split_bucket, split_percentage, Split};
pub use task::{
    add_fewshot, build_task_dataset, oversample, Example, ExampleSource, Phase, TaskDataset, TaskOptions,
    SILENCE_CATEGORY, UNKNOWN_CATEGORY,
};
pub use wordsets::{Subset, WordSets};
