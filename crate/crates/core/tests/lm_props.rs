mod common;

use proptest::prelude::*;
use punster::lm::{Direction, NGramModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

const WORDS: [&str; 5] = ["a", "bear", "bare", "tree", "water"];

fn total_mass(model: &NGramModel, ctx: &[String]) -> f64 {
    model
        .next_token_distribution(ctx, None)
        .values()
        .map(|lp| lp.exp())
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distributions_sum_to_one(seed in any::<u64>(), order in 2usize..=5, reverse in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus = random_corpus(&mut rng, &WORDS, 20, 6);
        let dir = if reverse { Direction::Reverse } else { Direction::Forward };
        let model = NGramModel::train(&corpus, order, dir, 1).unwrap();
        for _ in 0..10 {
            let len = rng.gen_range(0..4);
            let mut ctx: Vec<String> = (0..len).map(|_| WORDS[rng.gen_range(0..WORDS.len())].to_string()).collect();
            if rng.gen_bool(0.2) {
                ctx.push("unseen".into());
            }
            let mass = total_mass(&model, &ctx);
            prop_assert!((mass - 1.0).abs() < 1e-9, "mass {mass} after {ctx:?}");
        }
    }

    #[test]
    fn save_load_is_bitwise(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus = random_corpus(&mut rng, &WORDS, 15, 5);
        let model = NGramModel::train(&corpus, 3, Direction::Forward, 1).unwrap();
        let mut buf = Vec::new();
        model.save(&mut buf).unwrap();
        let back = NGramModel::load(buf.as_slice()).unwrap();
        for s in random_corpus(&mut rng, &["a", "bear", "zebra"], 20, 6) {
            let (x, y) = (model.score(&s).unwrap(), back.score(&s).unwrap());
            prop_assert_eq!(x.log_prob.to_bits(), y.log_prob.to_bits());
        }
    }

    #[test]
    fn more_data_never_hurts_a_seen_sentence(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus = random_corpus(&mut rng, &WORDS, 10, 5);
        let target = corpus[0].clone();
        let mut bigger = corpus.clone();
        bigger.push(target.clone());
        let before = NGramModel::train(&corpus, 3, Direction::Forward, 1).unwrap();
        let after = NGramModel::train(&bigger, 3, Direction::Forward, 1).unwrap();
        let (x, y) = (before.score(&target).unwrap().log_prob, after.score(&target).unwrap().log_prob);
        prop_assert!(y >= x - 1e-12, "{x} -> {y}");
    }
}

#[test]
fn single_sentence_directions_agree() {
    let corpus = sentences("the bare tree stands");
    let fwd = NGramModel::train(&corpus, 3, Direction::Forward, 1).unwrap();
    let rev = NGramModel::train(&corpus, 3, Direction::Reverse, 1).unwrap();
    let s = fwd.score(&corpus[0]).unwrap().log_prob;
    let r = rev.score(&corpus[0]).unwrap().log_prob;
    assert!((s - r).abs() < 1e-9, "{s} vs {r}");
}

#[test]
fn demo_corpus_model_is_normalized() {
    let text = std::fs::read_to_string(demo_dir().join("corpus.txt")).unwrap();
    let corpus = sentences(&text);
    let model = NGramModel::train(&corpus, 3, Direction::Forward, 1).unwrap();
    for ctx in model.stored_contexts().iter().take(200) {
        let mass = total_mass(&model, ctx);
        assert!((mass - 1.0).abs() < 1e-6, "{ctx:?}: {mass}");
    }
}
