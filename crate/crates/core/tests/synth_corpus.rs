use vrdie_core::corpus::{read_corpus, write_corpus};
use vrdie_core::synth::{generate, CueMode, SynthConfig};

#[test]
fn ten_thousand_documents_pass_validation() {
    let docs = generate(&SynthConfig {
        doc_count: 10_000,
        seed: 2024,
        ..Default::default()
    })
    .unwrap();
    let mut buf = Vec::new();
    write_corpus(&mut buf, &docs).unwrap();
    let back = read_corpus(buf.as_slice()).unwrap();
    assert_eq!(back.len(), 10_000);
    assert!(back.iter().all(|d| d.annotations.is_some()));
}

#[test]
fn layout_only_heading_tokens_share_body_distribution() {
    // same vocabulary band and a near-uniform marginal in both roles
    let docs = generate(&SynthConfig {
        doc_count: 400,
        cue_mode: CueMode::LayoutOnly,
        vocab_size: 20,
        seed: 5,
        ..Default::default()
    })
    .unwrap();
    let mut heading = [0usize; 20];
    let mut body = [0usize; 20];
    for doc in &docs {
        let texts = doc.texts();
        let ann = doc.annotations.as_ref().unwrap();
        let in_heading = |i: usize| ann.headings.iter().any(|h| h.span.start <= i && i <= h.span.end);
        for (i, t) in texts.iter().enumerate() {
            let w: usize = t[1..].parse().unwrap();
            if in_heading(i) {
                heading[w] += 1;
            } else {
                body[w] += 1;
            }
        }
    }
    let share = |c: &[usize; 20]| {
        let n: usize = c.iter().sum();
        c.map(|v| v as f64 / n as f64)
    };
    for (h, b) in share(&heading).iter().zip(share(&body)) {
        assert!((h - 0.05).abs() < 0.01 && (b - 0.05).abs() < 0.01, "{h} {b}");
    }
}
