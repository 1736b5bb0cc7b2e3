mod support;

use proptest::prelude::*;
use support::oracles;
use vrdie_core::corpus::{read_corpus, write_corpus};
use vrdie_core::metrics::assignment::optimal_assignment;
use vrdie_core::metrics::gestalt::gestalt_similarity;
use vrdie_core::metrics::{evaluate, evaluate_sections, evaluate_strict, EvalReport};
use vrdie_core::synth::{generate, CueMode, SynthConfig};
use vrdie_core::tagging::{decode_spans, TagSequence};
use vrdie_core::{build_toc, decode, encode, normalize_bbox, Heading, RawBBox, Span, TagScheme, Task};

fn task() -> impl Strategy<Value = Task> {
    prop::sample::select(Task::ALL.to_vec())
}

fn cue_mode() -> impl Strategy<Value = CueMode> {
    prop::sample::select(vec![CueMode::LayoutOnly, CueMode::TextOnly, CueMode::Both])
}

fn headings(levels: &[u8]) -> Vec<Heading> {
    levels
        .iter()
        .enumerate()
        .map(|(i, &level)| Heading {
            span: Span::single(i),
            level,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encode_decode_round_trips_synthetic_gold(seed in any::<u64>(), mode in cue_mode(), task in task()) {
        let docs = generate(&SynthConfig { doc_count: 3, cue_mode: mode, seed, ..Default::default() }).unwrap();
        let scheme = TagScheme::for_task(task, 4).unwrap();
        let mut reports = Vec::new();
        for doc in &docs {
            let gold = doc.annotations.clone().unwrap();
            let tags = encode(&scheme, doc.token_count(), &gold).unwrap();
            let back = decode(&scheme, &tags);
            prop_assert_eq!(scheme.spans_of(&back), scheme.spans_of(&gold));
            reports.push(evaluate(doc, &back, &gold, task));
        }
        let micro = EvalReport::micro(&reports);
        prop_assert!(micro.g_size == 0 || micro.f1 == 1.0);
    }

    #[test]
    fn decoded_spans_never_overlap(task in task(), raw in prop::collection::vec(any::<u32>(), 0..80)) {
        let scheme = TagScheme::for_task(task, 3).unwrap();
        let tags = TagSequence { tags: raw.iter().map(|t| t % scheme.size() as u32).collect() };
        let mut spans = decode_spans(&scheme, &tags);
        spans.sort_by_key(|s| (s.kind, s.span));
        for s in &spans {
            prop_assert!(s.span.start <= s.span.end && s.span.end < raw.len());
        }
        for w in spans.windows(2).filter(|w| w[0].kind == w[1].kind) {
            prop_assert!(!w[0].span.overlaps(&w[1].span));
        }
        prop_assert!(decode(&scheme, &tags).check(raw.len()).is_ok());
    }

    #[test]
    fn toc_children_extend_parent_number(levels in prop::collection::vec(0u8..4, 0..40)) {
        let toc = build_toc(&headings(&levels));
        prop_assert_eq!(toc.len(), levels.len());
        let numbers: Vec<String> = toc.iter().map(|e| e.number.clone()).collect();
        prop_assert_eq!(&numbers, &oracles::toc_numbers(&levels));
        for e in &toc {
            match e.parent {
                Some(p) => {
                    let prefix = toc[p].number.clone() + ".";
                    prop_assert!(e.number.starts_with(&prefix));
                }
                None => prop_assert!(!e.number.contains('.')),
            }
        }
        let unique: std::collections::HashSet<&String> = numbers.iter().collect();
        prop_assert_eq!(unique.len(), numbers.len());
    }

    #[test]
    fn gestalt_in_unit_range(a in "[abc]{0,12}", b in "[abc]{0,12}") {
        let s = gestalt_similarity(&a, &b);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(gestalt_similarity(&a, &a), 1.0);
        prop_assert_eq!(s, oracles::gestalt(&a, &b));
    }

    #[test]
    fn assignment_matches_exhaustive(rows in 1usize..6, cols in 1usize..6, seed in prop::collection::vec(0.0f64..1.0, 36)) {
        let sim: Vec<Vec<f64>> = (0..rows).map(|i| (0..cols).map(|j| seed[i * 6 + j]).collect()).collect();
        let got = optimal_assignment(&sim);
        prop_assert_eq!(got.total, oracles::best_assignment_total(&sim));
        prop_assert_eq!(got.pairs.len(), rows.min(cols));
    }

    #[test]
    fn strict_eval_ignores_order(
        preds in prop::collection::vec(0u8..6, 0..10),
        golds in prop::collection::vec(0u8..6, 0..10),
        rot in 0usize..10,
    ) {
        let a = evaluate_strict(&preds, &golds);
        let mut p2 = preds.clone();
        let mut g2 = golds.clone();
        p2.reverse();
        if !g2.is_empty() {
            let k = rot % g2.len();
            g2.rotate_left(k);
        }
        prop_assert_eq!(a, evaluate_strict(&p2, &g2));
    }

    #[test]
    fn section_eval_ignores_order(
        preds in prop::collection::vec(("[ab]{1,4}", "[abc]{1,6}"), 0..5),
        golds in prop::collection::vec(("[ab]{1,4}", "[abc]{1,6}"), 0..5),
    ) {
        let a = evaluate_sections(&preds, &golds);
        let mut p2 = preds.clone();
        let mut g2 = golds.clone();
        p2.reverse();
        g2.reverse();
        let b = evaluate_sections(&p2, &g2);
        prop_assert!((a.s_m - b.s_m).abs() < 1e-12);
        prop_assert!((a.f1 - b.f1).abs() < 1e-12);
    }

    #[test]
    fn correct_prediction_never_lowers_recall(
        preds in prop::collection::vec(("[ab]{1,3}", "[abc]{1,5}"), 0..5),
        golds in prop::collection::vec(("[ab]{1,3}", "[abc]{1,5}"), 1..5),
        pick in any::<prop::sample::Index>(),
    ) {
        let before = evaluate_sections(&preds, &golds).recall;
        let mut more = preds.clone();
        more.push(golds[pick.index(golds.len())].clone());
        prop_assert!(evaluate_sections(&more, &golds).recall >= before - 1e-12);

        let strict_preds: Vec<String> = preds.iter().map(|p| p.0.clone()).collect();
        let strict_golds: Vec<String> = golds.iter().map(|g| g.0.clone()).collect();
        let before = evaluate_strict(&strict_preds, &strict_golds).recall;
        let mut more = strict_preds.clone();
        more.push(strict_golds[pick.index(strict_golds.len())].clone());
        prop_assert!(evaluate_strict(&more, &strict_golds).recall >= before);
    }

    #[test]
    fn normalization_is_monotone(a in 0.0f64..700.0, b in 0.0f64..700.0, width in 100.0f64..700.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let g = normalize_bbox(&RawBBox::new(lo, lo, hi, hi), width, width).unwrap();
        prop_assert!(g.x0 <= g.x1 && g.y0 <= g.y1 && g.x1 <= 1000);
    }

    #[test]
    fn corpus_round_trips(seed in any::<u64>(), mode in cue_mode()) {
        let docs = generate(&SynthConfig { doc_count: 4, cue_mode: mode, seed, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        write_corpus(&mut buf, &docs).unwrap();
        let back = read_corpus(buf.as_slice()).unwrap();
        prop_assert_eq!(back, docs);
    }
}

#[test]
fn level_skip_collapses() {
    let numbers: Vec<String> = build_toc(&headings(&[1, 3, 2, 1])).into_iter().map(|e| e.number).collect();
    assert_eq!(numbers, ["1", "1.1", "1.2", "2"]);
}
