use fnc_stance::topics::{kl_divergence, lda_train, LdaModel, LdaParams};
use fnc_testkit::oracle::{argmax, purity, two_topic_corpus};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn recovers_two_disjoint_topics() {
    let (docs, truth) = two_topic_corpus(200, &mut ChaCha8Rng::seed_from_u64(1));
    let params = LdaParams {
        train_iters: 200,
        infer_iters: 50,
        seed: 3,
        ..LdaParams::with_topics(2)
    };
    let model = lda_train(&docs, &params).unwrap();
    let thetas: Vec<Vec<f64>> = docs
        .iter()
        .map(|d| model.infer(d, params.infer_iters, params.seed))
        .collect();
    for t in &thetas {
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    let assigned: Vec<usize> = thetas.iter().map(|t| argmax(t)).collect();
    assert!(purity(&assigned, &truth) >= 0.9);

    // every vocabulary word lands mostly in one topic
    for w in ["alpha3", "omega7"] {
        let i = model.word_index(w).unwrap();
        let (a, b) = (model.topic_word_count(0, i), model.topic_word_count(1, i));
        assert!(a.max(b) as f64 >= 0.9 * (a + b) as f64);
    }
    // documents of different topics are far apart, same-topic ones close
    let cross = kl_divergence(&thetas[0], &thetas[1], 1e-10).unwrap();
    let same = kl_divergence(&thetas[0], &thetas[2], 1e-10).unwrap();
    assert!(cross > same);
}

#[test]
fn training_and_inference_are_seeded() {
    let (docs, _) = two_topic_corpus(40, &mut ChaCha8Rng::seed_from_u64(2));
    let params = LdaParams {
        train_iters: 30,
        ..LdaParams::with_topics(3)
    };
    let a = lda_train(&docs, &params).unwrap();
    let b = lda_train(&docs, &params).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(a.infer(&docs[0], 20, 9), b.infer(&docs[0], 20, 9));
    let back = LdaModel::from_json(&a.to_json().unwrap()).unwrap();
    assert_eq!(back, a);
    let unseen = vec!["nothing".to_string()];
    assert_eq!(a.infer(&unseen, 10, 0), vec![1.0 / 3.0; 3]);
}
