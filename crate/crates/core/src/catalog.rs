//! Built-in synthetic pipelines at the scale of common serving workloads.

use crate::error::{PlanError, Result};
use crate::model::{OperatorSpec, PipelineSpec};

pub const BUILTIN_PIPELINES: [&str; 5] = ["SR", "VT", "LVC", "DVC", "ACG"];

fn op(id: usize, name: &str, knobs: &[&str], batching: bool, bytes: f64) -> OperatorSpec {
    OperatorSpec::new(id, name, knobs, batching, bytes)
}

/// Speech recognition: about 6K search plans.
pub fn speech_recognition() -> PipelineSpec {
    PipelineSpec::chain(
        "SR",
        vec![
            op(0, "sampler", &["10k", "12k", "14k", "16k"], false, 160_000.0),
            op(1, "denoiser", &["mask0", "mask50", "mask100", "mask200"], false, 160_000.0),
            op(2, "encoder", &["w2v-base", "w2v-large-10m", "w2v-base-960h", "hubert-large", "hubert-xlarge"], false, 40_000.0),
            op(3, "decoder", &["greedy", "beam2", "beam4", "beam8", "lm-beam8"], false, 200.0),
        ],
    )
    .expect("valid builtin")
}

/// Visual tracking: 6480 search plans.
pub fn visual_tracking() -> PipelineSpec {
    PipelineSpec::chain(
        "VT",
        vec![
            op(0, "sampler", &["416", "640", "1280"], false, 1_500_000.0),
            op(1, "augmenter", &["none", "flip", "jitter", "mosaic"], false, 1_500_000.0),
            op(2, "detector", &["yolo-n", "yolo-s", "yolo-m", "yolo-l", "yolo-x", "yolo-x6"], false, 20_000.0),
            op(3, "tracker", &["mobilenet", "resnet18", "resnet50", "resnet101", "resnet152", "vit-b"], false, 2_000.0),
        ],
    )
    .expect("valid builtin")
}

/// Live video chat: 7200 search plans.
pub fn live_video_chat() -> PipelineSpec {
    PipelineSpec::chain(
        "LVC",
        vec![
            op(0, "frames", &["2", "4", "6", "8", "10"], false, 600_000.0),
            op(1, "resize", &["256", "448", "896"], false, 800_000.0),
            op(2, "vision-lm", &["1b", "2b", "4b", "8b"], true, 4_000.0),
            op(3, "responder", &["t0.0", "t0.2", "t0.4", "t0.6", "t0.8", "t1.0", "topk", "nucleus"], true, 1_000.0),
        ],
    )
    .expect("valid builtin")
}

/// Dense video captioning, with an audio branch joining the captioner: 22680 search plans.
pub fn dense_video_captioning() -> PipelineSpec {
    PipelineSpec::new(
        "DVC",
        vec![
            op(0, "video-sampler", &["0.5", "1.0", "1.5", "2.0"], false, 2_000_000.0),
            op(1, "resize", &["224", "446"], false, 1_500_000.0),
            op(2, "vision-encoder", &["vit-l-fp32", "vit-l-mixed", "siglip-fp32", "siglip-fp16", "convnext-fp16"], false, 50_000.0),
            op(3, "transcriber", &["whisper-small", "whisper-medium", "whisper-large"], false, 8_000.0),
            op(
                4,
                "captioner",
                &["hv-b1", "hv-b2", "hv-b4", "hvy-b1", "hvy-b2", "hvy-b4", "hvv-b1", "hvv-b2", "hvv-b4"],
                false,
                2_000.0,
            ),
        ],
        vec![(0, 1), (1, 2), (2, 4), (3, 4)],
    )
    .expect("valid builtin")
}

/// Agentic code generation: 1008 search plans.
pub fn agentic_code_generation() -> PipelineSpec {
    let analyzers = ["qwen-0.5b", "qwen-1.5b", "qwen-7b", "llama-1b", "llama-3b", "llama-8b", "ds-1.3b", "ds-6.7b"];
    let generators: Vec<String> = ["qwen-coder", "llama-code", "ds-coder"]
        .iter()
        .flat_map(|m| ["1b", "3b", "7b", "13b", "33b", "34b", "70b"].iter().map(move |s| format!("{m}-{s}")))
        .collect();
    let generators: Vec<&str> = generators.iter().map(String::as_str).collect();
    PipelineSpec::chain(
        "ACG",
        vec![op(0, "analyzer", &analyzers, true, 4_000.0), op(1, "generator", &generators, true, 8_000.0)],
    )
    .expect("valid builtin")
}

pub fn builtin_pipeline(name: &str) -> Result<PipelineSpec> {
    match name.to_ascii_uppercase().as_str() {
        "SR" => Ok(speech_recognition()),
        "VT" => Ok(visual_tracking()),
        "LVC" => Ok(live_video_chat()),
        "DVC" => Ok(dense_video_captioning()),
        "ACG" => Ok(agentic_code_generation()),
        other => Err(PlanError::Config(format!(
            "unknown builtin pipeline `{other}` (expected one of {BUILTIN_PIPELINES:?})"
        ))),
    }
}
