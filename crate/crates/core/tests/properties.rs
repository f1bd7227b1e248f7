use ndarray::{Array1, Array2};
use proptest::collection::vec;
use proptest::prelude::*;

use signtok_core::alignment::{mmd, KernelConfig};
use signtok_core::config::PipelineConfig;
use signtok_core::cra_vocab::{
    collect_candidates, segment, sinkhorn_solve, SignToken, TransportProblem, WordCodebook, WordToken,
};
use signtok_core::eval_metrics::{bleu_n, lcs_len, rouge_l, token_accuracy};
use signtok_core::vq_sign::CharCodebook;

fn distribution(weights: &[f64]) -> Array1<f64> {
    let s: f64 = weights.iter().sum();
    Array1::from_iter(weights.iter().map(|w| w / s))
}

fn transport_case() -> impl Strategy<Value = (Array2<f64>, Array1<f64>, Array1<f64>)> {
    (1usize..=5, 1usize..=5).prop_flat_map(|(n, m)| {
        (vec(0.0f64..4.0, n * m), vec(0.05f64..1.0, n), vec(0.05f64..1.0, m)).prop_map(move |(c, a, b)| {
            (Array2::from_shape_vec((n, m), c).unwrap(), distribution(&a), distribution(&b))
        })
    })
}

fn points(rows: usize) -> impl Strategy<Value = Array2<f64>> {
    vec(-3.0f64..3.0, rows * 2).prop_map(move |v| Array2::from_shape_vec((rows, 2), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sinkhorn_dual_never_decreases((cost, a, b) in transport_case()) {
        let problem = TransportProblem::new(cost, a, b, 1e-3).unwrap();
        let sol = sinkhorn_solve(&problem, 2000, 1e-12);
        for w in sol.dual_history.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0), "dual fell from {} to {}", w[0], w[1]);
        }
        prop_assert!(sol.plan.iter().all(|&p| p >= 0.0 && p.is_finite()));
        prop_assert!(sol.converged);
        prop_assert!(problem.violation(&sol.plan) <= 1e-3);
    }

    #[test]
    fn segmentation_round_trips(
        words in vec(vec(0u32..6, 2..4), 1..6),
        chars in vec(0u32..6, 0..30),
    ) {
        let tokens: Vec<WordToken> = words
            .iter()
            .enumerate()
            .map(|(i, w)| WordToken { id: i as u32, chars: w.clone(), prob: 0.1, embedding: vec![] })
            .collect();
        let book = WordCodebook { dim: 0, m: 1, chosen_r: 1, entropy: 0.0, tokens };
        let mut rebuilt = Vec::new();
        for t in segment(&chars, &book) {
            match t {
                SignToken::Char(c) => rebuilt.push(c),
                SignToken::Word(w) => rebuilt.extend(&book.tokens[w as usize].chars),
            }
        }
        prop_assert_eq!(rebuilt, chars);
    }

    #[test]
    fn median_bandwidth_ignores_row_order(x in points(7), rot in 0usize..7) {
        let mut rows: Vec<usize> = (0..7).collect();
        rows.rotate_left(rot);
        rows.swap(0, 6);
        let shuffled = x.select(ndarray::Axis(0), &rows);
        let a = KernelConfig::MedianHeuristic.resolve(&[x.view()]).unwrap();
        let b = KernelConfig::MedianHeuristic.resolve(&[shuffled.view()]).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a > 0.0);
    }

    #[test]
    fn mmd_is_a_symmetric_nonnegative_discrepancy(x in points(5), y in points(4), sigma in 0.2f64..3.0) {
        let xy = mmd(x.view(), y.view(), sigma).unwrap();
        prop_assert!(xy >= 0.0);
        prop_assert_eq!(xy, mmd(y.view(), x.view(), sigma).unwrap());
        prop_assert_eq!(mmd(x.view(), x.view(), sigma).unwrap(), 0.0);
    }

    #[test]
    fn metrics_stay_in_range(pairs in vec((vec(0u32..5, 0..8), vec(0u32..5, 1..8)), 1..6)) {
        let (hyps, refs): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        for n in 1..=4 {
            let b = bleu_n(&hyps, &refs, n).unwrap();
            prop_assert!((0.0..=1.0).contains(&b));
        }
        prop_assert!((bleu_n(&refs, &refs, 1).unwrap() - 1.0).abs() < 1e-12);
        for (h, r) in hyps.iter().zip(&refs) {
            let f = rouge_l(h, r);
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert_eq!(f, rouge_l(r, h));
            prop_assert!(lcs_len(h, r) <= h.len().min(r.len()));
        }
        let acc = token_accuracy(&hyps, &refs).unwrap();
        prop_assert!((0.0..=1.0).contains(&acc));
        prop_assert_eq!(token_accuracy(&refs, &refs).unwrap(), 1.0);
    }

    #[test]
    fn candidate_probabilities_form_a_distribution(corpus in vec(vec(1u32..6, 1..12), 1..10), pool in 1usize..20) {
        let cands = collect_candidates(&corpus, 4, pool).unwrap();
        let total: f64 = cands.iter().map(|c| c.prob).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(cands.iter().all(|c| c.prob > 0.0 && c.count > 0));
    }

    #[test]
    fn quantization_skips_the_slow_down_row(z in vec(-2.0f64..2.0, 3), rows in vec(-2.0f64..2.0, 12)) {
        let mut emb = Array2::from_shape_vec((4, 3), rows).unwrap();
        // put s0 exactly on the query; it must still never be chosen
        emb.row_mut(0).assign(&Array1::from(z.clone()));
        let book = CharCodebook::new(emb).unwrap();
        let (id, _) = book.nearest(Array1::from(z).view());
        prop_assert!(id >= 1);
    }

    #[test]
    fn config_survives_a_json_round_trip(seed in any::<u64>(), lr in 1e-5f64..1.0, steps in 1usize..10_000) {
        let mut cfg = PipelineConfig::default();
        cfg.seed = seed;
        cfg.finetune_lr = lr;
        cfg.decoder_steps = steps;
        let json = cfg.to_json().unwrap();
        let back = PipelineConfig::from_json(&json).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_json().unwrap(), json);
    }
}

#[test]
fn quantization_ties_go_to_the_lowest_id() {
    let emb = ndarray::array![[9.0, 9.0], [1.0, 0.0], [-1.0, 0.0], [1.0, 0.0]];
    let book = CharCodebook::new(emb).unwrap();
    let (id, d) = book.nearest(ndarray::array![0.0, 0.0].view());
    assert_eq!((id, d), (1, 1.0));
}
