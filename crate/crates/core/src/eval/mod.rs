//! Downstream evaluation: metrics, labeled datasets, probes and synthetic
//! corpora.

pub mod dataset;
pub mod metrics;
pub mod probe;
pub mod synth;

pub use dataset::{read_dataset, write_dataset, LabeledDataset, LabeledItem, TaskKind};
pub use metrics::{average_precision, mean_average_precision, top1_accuracy};
pub use probe::{
    average_scores, clip_segments, evaluate, load_clips, probe_lr, run_probe, train_probe, train_probe_on, FeatureSource,
    InputSpec, LinearClassifier, Probe, ProbeConfig, ProbeEpoch, ProbeMetrics, ProbeMode, ProbeReport,
};
pub use synth::{make_synthetic_dataset, synth_clip, SynthConfig, SynthKind, SynthOutput};

/// Scores a clip with a trained probe (mean of per-segment scores).
pub fn predict_clip<S: crate::Scalar>(clip: &crate::audio_io::AudioBuffer<S>, probe: &mut Probe<S>) -> crate::Result<Vec<f64>> {
    probe.predict_clip(clip)
}
