use authcil_core::{
    build_cil_data, ce_loss_and_grads, featurize, performance_drop, AuthorCorpus, FeaturizerConfig,
    HeadSet, ModelState, SeededRng, SessionSpec, Split,
};
use authcil_core::model::add_head;
use proptest::prelude::*;
use std::collections::BTreeSet;

fn corpus(authors: usize, docs: usize) -> AuthorCorpus {
    AuthorCorpus::from_documents((0..authors).flat_map(|a| {
        (0..docs).map(move |d| (format!("author{a:02}"), format!("doc {d} by {a} lorem")))
    }))
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn splits_partition_documents(authors in 4usize..30, docs in 5usize..20, seed in any::<u64>()) {
        let c = corpus(authors, docs);
        let spec = SessionSpec::new(vec![0.5, 0.25, 0.25], seed);
        let Ok(cil) = build_cil_data(&c, &spec) else { return Ok(()) };
        cil.validate().unwrap();
        let mut seen = BTreeSet::new();
        for s in &cil.sessions {
            for a in &s.authors {
                prop_assert!(seen.insert(a.author_id.clone()));
                let mut all: Vec<String> = [Split::Train, Split::Val, Split::Test]
                    .iter()
                    .flat_map(|&sp| a.documents(sp).to_vec())
                    .collect();
                prop_assert_eq!(all.len(), docs);
                all.sort();
                all.dedup();
                prop_assert_eq!(all.len(), docs);
                prop_assert_eq!(a.train.len(), docs * 6 / 10);
                prop_assert_eq!(a.val.len(), docs * 2 / 10);
            }
        }
    }

    #[test]
    fn featurize_is_pure(text in "[a-z ]{0,80}") {
        let cfg = FeaturizerConfig { dim: 256, ..FeaturizerConfig::default() };
        let a = featurize(&text, &cfg).unwrap();
        let b = featurize(&text, &cfg).unwrap();
        prop_assert_eq!(a.values.len(), 256);
        prop_assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
        let norm: f64 = a.values.iter().map(|v| v * v).sum();
        prop_assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn batch_loss_ignores_order(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = SeededRng::new(seed);
        let mut m = ModelState::new(4, 3, &mut rng);
        add_head(&mut m, 3, &mut rng).unwrap();
        let xs: Vec<(Vec<f64>, usize)> = (0..n)
            .map(|_| ((0..4).map(|_| rng.symmetric(1.0)).collect(), rng.below(3) as usize))
            .collect();
        let fwd: Vec<(&[f64], usize)> = xs.iter().map(|(x, l)| (x.as_slice(), *l)).collect();
        let rev: Vec<(&[f64], usize)> = fwd.iter().rev().copied().collect();
        let (la, ga) = ce_loss_and_grads(&m, &fwd, HeadSet::All, 0.0).unwrap();
        let (lb, gb) = ce_loss_and_grads(&m, &rev, HeadSet::All, 0.0).unwrap();
        prop_assert!((la - lb).abs() < 1e-12);
        prop_assert!(ga.0.iter().zip(&gb.0).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn drop_identity(correct in proptest::collection::vec(0u32..=200, 2..10)) {
        let acc: Vec<f64> = correct.iter().map(|&c| 100.0 * c as f64 / 200.0).collect();
        let pd = performance_drop(&acc).unwrap();
        prop_assert!((pd + acc[acc.len() - 1] - acc[0]).abs() < 1e-9);
    }
}
