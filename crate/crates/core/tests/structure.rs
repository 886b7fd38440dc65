mod support;

#[test]
fn graph_queries_and_candidates_match_dense_enumeration() {
    for seed in 0..200u64 {
        if let Err(what) = support::structural_check(seed) {
            panic!("seed {seed}: {what}");
        }
    }
}
