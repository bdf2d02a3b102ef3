use std::path::PathBuf;

use chordgen_core::dataset::{load_kern_corpus, DatasetRecord};
use chordgen_core::tokenizer::{EOS, REMI_VOCAB_SIZE};
use chordgen_models::{
    build_model, generate, inspect, load_bundle, save_bundle, train, GenerationConfig, ModelDims, StrategyKind,
    TrainConfig,
};
use chordgen_nn::Graph;

fn fixtures() -> Vec<DatasetRecord> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/kern");
    let load = load_kern_corpus(&root).unwrap();
    assert!(load.failures.is_empty(), "{:?}", load.failures);
    load.records
}

fn small() -> ModelDims {
    ModelDims { decoder_layers: 2, ..ModelDims::desk() }
}

fn quick(steps: u64) -> TrainConfig {
    TrainConfig {
        epochs: 10_000,
        base_lr: 1e-3,
        warmup: 20,
        max_steps: Some(steps),
        seed: 3,
        ..Default::default()
    }
}

fn first_step_logits(b: &chordgen_models::ModelBundle, chords: &[u32]) -> Vec<f32> {
    let mut g = Graph::new(&b.store).no_grad();
    let mem = b.chord_memory(&mut g, chords).unwrap();
    let l = b.decoder_logits(&mut g, 0, &[chordgen_core::tokenizer::BOS], mem).unwrap();
    g.value(l).to_vec()
}

#[test]
fn chords_reach_the_logits_only_when_conditioned() {
    let data: Vec<_> = fixtures().into_iter().take(4).collect();
    let a = [1, 10, 15, 1];
    let b = [2, 9, 9, 20];
    let mut ind = build_model(StrategyKind::ChordIndependent, &small(), 1).unwrap();
    train(&mut ind, &data, &quick(10), None).unwrap();
    assert_ne!(first_step_logits(&ind, &a), first_step_logits(&ind, &b));

    let mut none = build_model(StrategyKind::NoChord, &small(), 1).unwrap();
    train(&mut none, &data, &quick(10), None).unwrap();
    assert_eq!(first_step_logits(&none, &a), first_step_logits(&none, &b));
}

#[test]
fn same_seed_same_history() {
    let data: Vec<_> = fixtures().into_iter().take(3).collect();
    let run = || {
        let mut b = build_model(StrategyKind::ChordMelodyFirst, &small(), 9).unwrap();
        let cfg = TrainConfig { batch_size: 2, ..quick(8) };
        train(&mut b, &data, &cfg, None).unwrap().history
    };
    let h = run();
    assert_eq!(h.len(), 8);
    assert_eq!(h, run());
}

#[test]
fn resuming_continues_the_same_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let data: Vec<_> = fixtures().into_iter().take(3).collect();
    let cfg = |steps| TrainConfig { batch_size: 2, ..quick(steps) };

    let mut straight = build_model(StrategyKind::ChordBassFirst, &small(), 4).unwrap();
    let full = train(&mut straight, &data, &cfg(10), None).unwrap();

    let mut part = build_model(StrategyKind::ChordBassFirst, &small(), 4).unwrap();
    let first = train(&mut part, &data, &cfg(5), None).unwrap();
    let path = dir.path().join("half.ckpt");
    save_bundle(&path, &part, Some(&first.adam), serde_json::Value::Null).unwrap();
    let mut loaded = load_bundle(&path).unwrap();
    assert_eq!(loaded.step, 5);
    let second = train(&mut loaded.bundle, &data, &cfg(10), loaded.adam.take()).unwrap();
    assert_eq!(second.history.first().unwrap().step, 5);

    let mut joined = first.history.clone();
    joined.extend(second.history);
    assert_eq!(joined, full.history);
    for ((_, a), (_, b)) in loaded.bundle.store.iter().zip(straight.store.iter()) {
        assert_eq!(a.data, b.data);
    }
}

#[test]
fn generation_is_bounded_and_in_vocabulary() {
    let cfg = GenerationConfig { top_p: 1.0, max_tokens: 24, seed: 11 };
    for kind in StrategyKind::ALL {
        let b = build_model(kind, &ModelDims { decoder_layers: 1, ..ModelDims::desk() }, 2).unwrap();
        let out = generate(&b, &[1, 14, 14, 1], &cfg).unwrap();
        for line in [&out.bass, &out.melody] {
            assert!(line.iter().all(|t| (*t as usize) < REMI_VOCAB_SIZE));
        }
        match &out.interleaved {
            Some(ids) => assert!(ids.len() <= 24),
            None => assert!(out.bass.len() <= 24 && out.melody.len() <= 24),
        }
        assert_eq!(out, generate(&b, &[1, 14, 14, 1], &cfg).unwrap());
    }
}

#[test]
fn memorized_phrase_is_regenerated_greedily() {
    let data: Vec<_> = fixtures().into_iter().take(1).collect();
    let greedy = GenerationConfig { top_p: 1e-9, max_tokens: 128, seed: 0 };
    for kind in [StrategyKind::ChordBassFirst, StrategyKind::ChordCoGen] {
        let mut b = build_model(kind, &small(), 5).unwrap();
        let cfg = TrainConfig { target_loss: Some(0.01), ..quick(600) };
        let out = train(&mut b, &data, &cfg, None).unwrap();
        assert!(out.reached_target, "{kind}: loss {:?}", out.history.last());
        let g = generate(&b, data[0].chords.content(), &greedy).unwrap();
        match g.interleaved {
            Some(ids) => assert_eq!(ids, data[0].interleaved.content(), "{kind}"),
            None => {
                assert_eq!(g.bass, data[0].bass.content(), "{kind}");
                assert_eq!(g.melody, data[0].melody.content(), "{kind}");
            }
        }
        assert_eq!(*g.bass.last().unwrap(), EOS);
    }
}

#[test]
fn checkpoint_names_describe_the_variant() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let b = build_model(StrategyKind::ChordBassFirst, &ModelDims::desk(), 0).unwrap();
    save_bundle(&path, &b, None, serde_json::Value::Null).unwrap();
    let a = inspect(&path).unwrap();
    assert_eq!((a.encoders, a.encoder_layers, a.encoder_heads), (1, 1, 2));
    let names: Vec<_> = a.decoders.iter().map(|d| d.name.as_str()).collect();
    assert_eq!(names, ["bass", "melody"]);
    assert!(a.decoders.iter().all(|d| d.layers == 6 && d.heads == 8));
    assert!(!a.decoders[0].conditioned && a.decoders[1].conditioned);
}
