//! The zebra worked example on the bundled WordNet subgraph.

use std::path::PathBuf;
use std::time::Instant;

use xrank_core::ingest::{read_annotations, read_synset_graph};
use xrank_core::xmetrics::{
    aggregate, concept_agreement, concept_enumeration, explain_failure, non_common_similarity, size_disagreement,
};
use xrank_core::{AnnotationIndex, FailureRecord, SynsetId};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn sid(s: &str) -> SynsetId {
    SynsetId::new(s).unwrap()
}

#[test]
fn zebra_metrics() {
    let start = Instant::now();
    let graph = read_synset_graph(fixture("wordnet.tsv")).unwrap();
    let anns = AnnotationIndex::new(read_annotations(fixture("zebra.jsonl")).unwrap());
    let (gt, rt) = (anns.get("zebra_gt").unwrap(), anns.get("zebra_rt").unwrap());

    assert_eq!(gt.concept_set().len(), 11);
    assert!((concept_agreement(gt, rt).unwrap() - 3.0 / 11.0).abs() < 1e-12);

    let ncs = non_common_similarity(gt, rt, &graph).unwrap();
    let value = ncs.ncs.unwrap();
    assert!((value - 0.139).abs() < 5e-4, "{value}");
    assert_eq!(ncs.pairs.len(), 2);
    let (hill, tree) = (&ncs.pairs[0], &ncs.pairs[1]);
    assert_eq!((&hill.0, &hill.1), (&sid("hill.n.01"), &sid("grassland.n.01")));
    assert!((hill.2 - 1.0 / 9.0).abs() < 1e-12);
    assert_eq!((&tree.0, &tree.1), (&sid("tree.n.01"), &sid("grass.n.01")));
    assert!((tree.2 - 1.0 / 6.0).abs() < 1e-12);

    assert_eq!(concept_enumeration(gt, rt), 6);

    let sd = size_disagreement(gt, rt, 1.0).unwrap();
    assert_eq!((sd.binary_count, sd.match_count), (2, 6));
    assert!((sd.avg.unwrap() - 1.0 / 3.0).abs() < 1e-12);
    let mane = sd.categories.iter().find(|c| c.synset == sid("mane.n.01")).unwrap();
    assert!((mane.differences[0] - 2.3).abs() < 0.01, "{:?}", mane.differences);
    let field = sd.categories.iter().find(|c| c.synset == sid("field.n.01")).unwrap();
    assert!((field.differences[0] - 1.369).abs() < 0.001, "{:?}", field.differences);

    let f = FailureRecord::new("q01", "zebra_gt", "zebra_rt", 2).unwrap();
    let e = explain_failure(&f, &anns, &graph, 1.0).unwrap();
    assert_eq!(e.ce, 6);
    assert_eq!(e.ncs, ncs.ncs);
    let report = aggregate(&[e.clone()], &anns).unwrap();
    assert_eq!(report.avg_ca, e.ca);
    assert_eq!(report.avg_sd, e.sd_avg);
    assert_eq!(report.ce_mode, 6);
    assert_eq!((report.obj_hit, report.obj_miss), (6, 8));
    assert!((report.matched_synset_pct - 300.0 / 11.0).abs() < 1e-9);
    assert!((report.avg_enum_disagreement_pct - 200.0 / 11.0).abs() < 1e-9);
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn sd_binary_count_non_increasing_in_threshold() {
    let anns = AnnotationIndex::new(read_annotations(fixture("zebra.jsonl")).unwrap());
    let (gt, rt) = (anns.get("zebra_gt").unwrap(), anns.get("zebra_rt").unwrap());
    let mut last = usize::MAX;
    for t in [0.01, 0.1, 0.5, 1.0, 1.369, 2.0, 2.3, 5.0] {
        let c = size_disagreement(gt, rt, t).unwrap().binary_count;
        assert!(c <= last);
        last = c;
    }
}

#[test]
fn ncs_value_symmetric() {
    let graph = read_synset_graph(fixture("wordnet.tsv")).unwrap();
    let anns = AnnotationIndex::new(read_annotations(fixture("toy/annotations.jsonl")).unwrap());
    for a in anns.items() {
        for b in anns.items() {
            let x = non_common_similarity(a, b, &graph).unwrap().ncs;
            let y = non_common_similarity(b, a, &graph).unwrap().ncs;
            match (x, y) {
                (Some(x), Some(y)) => assert!((x - y).abs() < 1e-12),
                (x, y) => assert_eq!(x, y),
            }
            assert_eq!(concept_enumeration(a, b), concept_enumeration(b, a));
        }
    }
}
