use std::collections::{BTreeMap, BTreeSet};

use code_rationales_core::analytics::{heatmap, jaccard_alignment, BOOTSTRAP_FLOOR};
use code_rationales_core::concept::{ConceptLabel, Modality};
use code_rationales_core::model::{
    ContextSubset, CountingModel, Distribution, LanguageModel, LookupModel, NgramConfig, NgramModel, VocabId,
};
use code_rationales_core::rationalize::{brute_force_rationale, expected_evaluations, rationalize_token, TieBreak};
use code_rationales_core::stats;
use code_rationales_core::tensor::{
    build_phi, map_phi, merge_trials, reduce, Aggregation, ConceptCell, ConceptMatrix, ConceptPair,
    InterpretabilityTensor, TensorMeta,
};
use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const VOCAB: usize = 5;

/// A sequence and a lookup model with a random (often tied) distribution
/// for every predecessor subset of every position.
fn lookup_instance(seed: u64, len: usize) -> (LookupModel, Vec<VocabId>) {
    build_instance(seed, len, false)
}

/// Like [`lookup_instance`], but every token is the model's unique argmax
/// given its full prefix, as in a greedily decoded sequence.
fn decoded_instance(seed: u64, len: usize) -> (LookupModel, Vec<VocabId>) {
    build_instance(seed, len, true)
}

fn build_instance(seed: u64, len: usize, decoded: bool) -> (LookupModel, Vec<VocabId>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seq: Vec<VocabId> = (0..len).map(|_| VocabId(rng.next_u32() % VOCAB as u32)).collect();
    let mut model = LookupModel::uniform(VOCAB).unwrap();
    for t in 1..len {
        for mask in 0u32..(1 << t) {
            let positions: Vec<usize> = (0..t).filter(|p| mask & (1 << p) != 0).collect();
            let subset = ContextSubset::from_positions(&seq, &positions, t).unwrap();
            let mut w: Vec<f64> = (0..VOCAB).map(|_| (rng.next_u32() % 4) as f64).collect();
            if w.iter().all(|&x| x == 0.0) {
                w[0] = 1.0;
            }
            let full = mask == (1 << t) - 1;
            if decoded && full {
                let top = (rng.next_u32() as usize) % VOCAB;
                w[top] = 5.0;
                seq[t] = VocabId(top as u32);
            }
            let total: f64 = w.iter().sum();
            model.insert(&subset, Distribution::new(w.iter().map(|x| x / total).collect()).unwrap()).unwrap();
        }
    }
    (model, seq)
}

fn small_corpus(seed: u64) -> Vec<Vec<String>> {
    let words = ["def", " f", "(", "x", ")", ":", "\n", "    ", "return", " x", " +", " 1", "if", " y"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..6).map(|_| (0..12).map(|_| words[(rng.next_u32() as usize) % words.len()].to_string()).collect()).collect()
}

fn tie_break(seed: u64) -> TieBreak {
    if seed.is_multiple_of(2) {
        TieBreak::LowestPosition
    } else {
        TieBreak::Seeded(seed)
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn ngram_distributions_are_normalized_and_pure(seed in any::<u64>(), mask in any::<u32>(), target in 1usize..12) {
        let corpus = small_corpus(seed);
        let model = NgramModel::train(&corpus, NgramConfig { seed, ..NgramConfig::default() }).unwrap();
        let seq = model.encode_tokens(&corpus[0]);
        let positions: Vec<usize> = (0..target).filter(|p| mask & (1 << p) != 0).collect();
        let subset = ContextSubset::from_positions(&seq, &positions, target).unwrap();
        let d = model.evaluate(&subset).unwrap();
        prop_assert!((d.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(d.probabilities().iter().all(|&p| (0.0..=1.0).contains(&p)));
        // tokens outside the subset must not matter
        let mut other = seq.clone();
        for (p, tok) in other.iter_mut().enumerate().take(target) {
            if !positions.contains(&p) {
                *tok = VocabId(((tok.0 as usize + 1) % model.vocab_size()) as u32);
            }
        }
        let same = ContextSubset::from_positions(&other, &positions, target).unwrap();
        prop_assert_eq!(model.evaluate(&same).unwrap(), d.clone());
        prop_assert_eq!(model.evaluate(&subset).unwrap(), d);
    }

    #[test]
    fn greedy_steps_are_nested_and_dominant(seed in any::<u64>(), len in 2usize..8) {
        let (model, seq) = lookup_instance(seed, len);
        let tb = tie_break(seed);
        for t in 1..len {
            let r = rationalize_token(&model, &seq, t, tb).unwrap();
            let target = seq[t];
            let mut chosen = Vec::new();
            for step in &r.steps {
                prop_assert!(step.position < t && !chosen.contains(&step.position));
                let best_other = (0..t)
                    .filter(|p| !chosen.contains(p))
                    .map(|p| {
                        let mut s = chosen.clone();
                        s.push(p);
                        model.evaluate(&ContextSubset::from_positions(&seq, &s, t).unwrap()).unwrap().prob(target)
                    })
                    .fold(0.0, f64::max);
                chosen.push(step.position);
                let d = model.evaluate(&ContextSubset::from_positions(&seq, &chosen, t).unwrap()).unwrap();
                prop_assert_eq!(d.prob(target), step.probability);
                prop_assert_eq!(d.rank(target), step.rank);
                prop_assert_eq!(step.probability, best_other);
            }
            // coverage is checked before each growth step
            for (k, step) in r.steps.iter().enumerate() {
                prop_assert!(k + 1 == r.steps.len() || step.rank != 1);
            }
            let full = model.evaluate(&ContextSubset::from_positions(&seq, &r.positions(), t).unwrap()).unwrap();
            prop_assert_eq!(r.covered, full.rank(target) == 1);
        }
    }

    #[test]
    fn evaluation_count_matches_closed_form(seed in any::<u64>(), len in 2usize..9) {
        let (model, seq) = lookup_instance(seed, len);
        let counting = CountingModel::new(model);
        for t in 1..len {
            let before = counting.evaluations();
            let r = rationalize_token(&counting, &seq, t, tie_break(seed)).unwrap();
            let used = counting.evaluations() - before;
            prop_assert_eq!(used, r.evaluations);
            prop_assert_eq!(used, expected_evaluations(t, r.steps.len()));
            let n = t as u64;
            prop_assert!(used <= (n + 1) + n * (n + 1) / 2);
        }
    }

    #[test]
    fn greedy_covers_what_the_full_context_covers(seed in any::<u64>(), len in 2usize..8) {
        let (model, seq) = lookup_instance(seed, len);
        for t in 1..len {
            let r = rationalize_token(&model, &seq, t, tie_break(seed)).unwrap();
            let full = model.evaluate(&ContextSubset::full_prefix(&seq, t).unwrap()).unwrap();
            if full.rank(seq[t]) == 1 {
                prop_assert!(r.covered);
            }
            if r.covered {
                let minimal = brute_force_rationale(&model, &seq, t, 8).unwrap();
                prop_assert!(minimal[0].len() <= r.steps.len());
            }
        }
    }

    #[test]
    fn greedy_is_never_smaller_than_the_oracle(seed in any::<u64>(), len in 2usize..9) {
        let (model, seq) = decoded_instance(seed, len);
        for t in 1..len {
            let r = rationalize_token(&model, &seq, t, tie_break(seed)).unwrap();
            let minimal = brute_force_rationale(&model, &seq, t, 8).unwrap();
            match minimal.first() {
                Some(m) => {
                    prop_assert!(r.covered);
                    prop_assert!(m.len() <= r.steps.len());
                }
                None => prop_assert!(!r.covered),
            }
        }
    }
}

fn label(name: &str) -> ConceptLabel {
    ConceptLabel { name: name.to_string(), modality: Modality::Code }
}

fn concept_matrix(seed: u64, id: &str) -> ConceptMatrix {
    let names = ["a", "b", "c"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = BTreeMap::new();
    for t in names {
        for s in names {
            let n = (rng.next_u32() % 4) as usize;
            if n == 0 {
                continue;
            }
            let raw: Vec<f64> = (0..n).map(|_| (rng.next_u32() % 1000) as f64 / 1000.0).collect();
            cells.insert(ConceptPair::new(t, s), ConceptCell { value: stats::mean(&raw).unwrap(), count: n, raw });
        }
    }
    ConceptMatrix { taxonomy_id: id.to_string(), cells }
}

fn tensor(seed: u64, trial: u32) -> InterpretabilityTensor {
    let mut t = reduce(&[concept_matrix(seed, "x")], Aggregation::Median, "tb", Some(trial)).unwrap();
    t.meta = TensorMeta { testbed: "tb".into(), trial: Some(trial), snippet_count: 1 };
    t
}

fn shuffled<T: Clone>(items: &[T], seed: u64) -> Vec<T> {
    let mut v = items.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..v.len()).rev() {
        v.swap(i, (rng.next_u32() as usize) % (i + 1));
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn reduce_ignores_snippet_order(seed in any::<u64>(), n in 1usize..6) {
        let ms: Vec<ConceptMatrix> = (0..n).map(|i| concept_matrix(seed.wrapping_add(i as u64), "x")).collect();
        for g in [Aggregation::Mean, Aggregation::Median, Aggregation::Max, Aggregation::Count, Aggregation::Sum] {
            let a = reduce(&ms, g, "tb", None).unwrap();
            let b = reduce(&shuffled(&ms, seed), g, "tb", None).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.total_count(), ms.iter().map(ConceptMatrix::total_count).sum::<usize>());
        }
    }

    #[test]
    fn reducing_one_matrix_keeps_its_cells(seed in any::<u64>()) {
        let m = concept_matrix(seed, "x");
        let mean = reduce(std::slice::from_ref(&m), Aggregation::Mean, "tb", None).unwrap();
        let count = reduce(std::slice::from_ref(&m), Aggregation::Count, "tb", None).unwrap();
        prop_assert_eq!(mean.cells.len(), m.cells.len());
        for (pair, cell) in &m.cells {
            prop_assert_eq!(mean.cells[pair].value, cell.value);
            prop_assert_eq!(count.cells[pair].value, cell.count as f64);
        }
    }

    #[test]
    fn trial_merging_and_heatmaps_ignore_trial_order(seed in any::<u64>(), n in 1usize..8) {
        let ts: Vec<InterpretabilityTensor> = (0..n).map(|k| tensor(seed.wrapping_add(k as u64), k as u32)).collect();
        let perm = shuffled(&ts, seed ^ 1);
        prop_assert_eq!(merge_trials(&ts, Aggregation::Median).unwrap(), merge_trials(&perm, Aggregation::Median).unwrap());
        let h = heatmap(&ts, seed).unwrap();
        prop_assert_eq!(&h, &heatmap(&perm, seed).unwrap());
        for c in &h.cells {
            prop_assert!(c.samples >= BOOTSTRAP_FLOOR);
            prop_assert!(c.ci_low <= c.ci_high);
        }
    }

    #[test]
    fn mapping_conserves_cells_and_invents_no_pairs(seed in any::<u64>(), len in 2usize..8) {
        let (model, seq) = lookup_instance(seed, len);
        let results: Vec<_> = (1..len).map(|t| rationalize_token(&model, &seq, t, TieBreak::Seeded(seed)).unwrap()).collect();
        let phi = build_phi(len, &results).unwrap();
        let names = ["a", "b", "c"];
        let labels: Vec<ConceptLabel> = (0..len).map(|i| label(names[(seed as usize + i) % 3])).collect();
        let m = map_phi(&phi, &labels, "x").unwrap();
        prop_assert_eq!(m.total_count(), phi.len());
        let possible: BTreeSet<ConceptPair> =
            phi.cells().map(|((s, t), _)| ConceptPair::new(labels[t].name.clone(), labels[s].name.clone())).collect();
        prop_assert_eq!(m.cells.keys().cloned().collect::<BTreeSet<_>>(), possible);
    }

    #[test]
    fn jaccard_is_a_bounded_symmetric_similarity(a in proptest::collection::btree_set(0usize..20, 0..10), b in proptest::collection::btree_set(0usize..20, 0..10)) {
        let ab = jaccard_alignment(&a, &b, 20).unwrap();
        prop_assert_eq!(ab, jaccard_alignment(&b, &a, 20).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(jaccard_alignment(&a, &a, 20).unwrap(), 1.0);
        prop_assert_eq!(ab == 1.0, a == b);
    }

    #[test]
    fn quantiles_are_monotone_and_bounded(values in proptest::collection::vec(-1e6f64..1e6, 1..40), q1 in 0.0f64..1.0, q2 in 0.0f64..1.0) {
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        let a = stats::quantile(&values, lo).unwrap();
        let b = stats::quantile(&values, hi).unwrap();
        prop_assert!(a <= b);
        let s = stats::sorted(&values);
        prop_assert!(s[0] <= a && b <= s[s.len() - 1]);
        prop_assert_eq!(stats::quantile(&values, 0.0).unwrap(), s[0]);
        prop_assert_eq!(stats::quantile(&values, 1.0).unwrap(), s[s.len() - 1]);
    }
}
