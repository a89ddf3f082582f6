#![no_main]

use decon_core::netgraph::{build_graph, incidence_operators};
use libfuzzer_sys::fuzz_target;

// n, p and the edges are decoded from raw bytes; vertex ids may fall out
// of range on purpose.
fuzz_target!(|input: (u8, u8, Vec<(u8, u8)>)| {
    let (n, p, raw) = input;
    let n = usize::from(n % 40);
    let p = usize::from(p % 4);
    let edges: Vec<(usize, usize)> = raw
        .iter()
        .take(200)
        .map(|&(a, b)| (usize::from(a) % (n + 2), usize::from(b) % (n + 2)))
        .collect();
    let Ok(g) = build_graph(n, &edges, p) else {
        return;
    };
    assert_eq!(g.m(), 2 * g.edges().len());
    let ops = incidence_operators(&g);
    let ones = nalgebra::DVector::from_element(n * p, 1.0);
    let lx = ops.oriented.apply(&ones).expect("dimensions agree");
    assert!(lx.amax() == 0.0);
});
