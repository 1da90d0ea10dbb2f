//! Beam search: saturation optimality, validity, exhaustion and determinism.

mod common;

use std::sync::Arc;

use bipro::beam::{generate_constrained_sentence, BeamConfig, BeamError, Selection};
use bipro::model::{BlockContext, MockModel, Vocabulary};
use bipro::pingshui::{Poem, PoemFormat, RhymeDictionary, Verifier, VerifyOptions};
use bipro::scorer::{masked_mean_logprob, BiproScore, MaskSlot, PromptTemplates, ScoreError};
use common::beam::{best_fourth, fixed, TITLE, VOCAB};
use proptest::prelude::*;

fn verifier() -> Verifier {
    Verifier::new(Arc::new(RhymeDictionary::synthetic()), VerifyOptions::default())
}

fn fourth(model: &MockModel, v: &Verifier, config: &BeamConfig) -> Result<(String, Option<BiproScore>), BeamError> {
    let t = PromptTemplates::default();
    let poem = Poem::new(TITLE, Some(PoemFormat::FiveJueju), fixed());
    let ctx = t.generation_context(TITLE, &poem.sentences, 4).unwrap();
    let score = |c: &str| -> Result<BiproScore, ScoreError> {
        let mut rows = fixed();
        rows.push(c.to_string());
        masked_mean_logprob(model, TITLE, &rows, MaskSlot::Sentence(4), &t).map(BiproScore)
    };
    let r = generate_constrained_sentence(model, &ctx, 4, &poem, v, Selection::Scored(&score), config)?;
    Ok((r.sentence, r.score))
}

#[test]
fn saturated_beam_finds_the_exhaustive_argmax() {
    let v = verifier();
    for mock_seed in 0..6 {
        let model = MockModel::bigram(Vocabulary::from_chars(VOCAB.chars()).unwrap(), mock_seed);
        let (count, best, best_score, margin) = best_fourth(&model, v.dictionary());
        assert_eq!(count, 32);
        assert!(margin > 1e-9);
        let (sentence, score) = fourth(&model, &v, &BeamConfig::new(count, mock_seed + 100)).unwrap();
        assert_eq!(sentence, best);
        assert!((score.unwrap().value() - best_score).abs() < 1e-9);
    }
}

#[test]
fn ping_only_vocabulary_exhausts() {
    let v = Verifier::new(
        Arc::new(RhymeDictionary::parse("东\tP\t1\n风\tP\t1\n红\tP\t1\n").unwrap()),
        VerifyOptions::default(),
    );
    let model = MockModel::bigram(Vocabulary::from_chars("东风红".chars()).unwrap(), 1);
    let poem = Poem::new("东", Some(PoemFormat::FiveJueju), vec![]);
    let err = generate_constrained_sentence(
        &model,
        &BlockContext::empty(),
        1,
        &poem,
        &v,
        Selection::FirstComplete,
        &BeamConfig::new(6, 0),
    )
    .unwrap_err();
    assert!(matches!(err, BeamError::Exhausted { .. }), "{err:?}");
}

#[test]
fn single_beam_follows_the_forced_path() {
    // Only 风 can end the sentence and only 月 fits the tone slots.
    let model = MockModel::bigram(Vocabulary::from_chars(VOCAB.chars()).unwrap(), 4);
    let v = verifier();
    let poem = Poem::new(TITLE, Some(PoemFormat::FiveJueju), fixed());
    let ctx = PromptTemplates::default().generation_context(TITLE, &poem.sentences, 4).unwrap();
    let r = generate_constrained_sentence(&model, &ctx, 4, &poem, &v, Selection::FirstComplete, &BeamConfig::new(1, 9))
        .unwrap();
    let chars: Vec<char> = r.sentence.chars().collect();
    assert_eq!(chars[4], '风');
    assert!(matches!(chars[1], '月' | '雪') && matches!(chars[2], '月' | '雪'));
    assert!(matches!(chars[3], '东' | '风'));
    assert_eq!(r.candidates_considered, 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn results_are_valid_and_deterministic(
        mock_seed in 0u64..500,
        seed in any::<u64>(),
        k in 1usize..8,
        index in 1usize..=4,
    ) {
        let v = verifier();
        let dict = v.dictionary();
        let model = MockModel::bigram(Vocabulary::from_chars(dict.chars()).unwrap(), mock_seed);
        let valid = ["雨鸟山天月", "春风雨树东", "山人秋酒月", "水雨草花红"];
        let rows: Vec<String> = valid[..index - 1].iter().map(|s| s.to_string()).collect();
        let poem = Poem::new("春", Some(PoemFormat::FiveJueju), rows.clone());
        let ctx = PromptTemplates::default().generation_context("春", &rows, index).unwrap();
        let config = BeamConfig::new(k, seed);
        let run = || generate_constrained_sentence(&model, &ctx, index, &poem, &v, Selection::FirstComplete, &config);
        match (run(), run()) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(&a.sentence, &b.sentence);
                prop_assert!(a.candidates_considered >= 1 && a.candidates_considered <= k);
                let chars: Vec<char> = a.sentence.chars().collect();
                prop_assert_eq!(chars.len(), 5);
                prop_assert!(v.check_prefix(&poem, index, &chars).unwrap().is_feasible());
            }
            (Err(a), Err(b)) => prop_assert_eq!(format!("{a:?}"), format!("{b:?}")),
            (a, b) => prop_assert!(false, "runs disagree: {:?} vs {:?}", a.is_ok(), b.is_ok()),
        }
    }
}
