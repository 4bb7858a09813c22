#![allow(dead_code)]

use fusim::propagate::{component_sizes, initial_marginal_gains, propagate};
use fusim::{ComponentSizeTable, EdgeHashTable, Graph, LabelMatrix, SimulationRandoms, WeightScheme};

/// One representative of each weight scheme, with probabilities large enough
/// that small graphs produce non-trivial components.
pub const SCHEMES: [WeightScheme; 4] = [
    WeightScheme::Constant(0.3),
    WeightScheme::Uniform { lo: 0.0, hi: 0.6 },
    WeightScheme::Normal {
        mean: 0.3,
        std_dev: 0.15,
    },
    WeightScheme::WeightedCascade,
];

/// Random graph with `n` vertices, average degree at most `degree` (capped
/// by the complete graph) and weights from `SCHEMES[scheme]`.
pub fn random_graph(n: usize, degree: f64, scheme: usize, seed: u64) -> Graph {
    let n = n.max(2);
    let degree = degree.min((n - 1) as f64);
    let mut g = Graph::erdos_renyi(n, degree, seed).unwrap();
    g.apply_weights(&SCHEMES[scheme % SCHEMES.len()], seed ^ 0x5eed)
        .unwrap();
    g
}

/// Everything the fused pipeline computes before seed selection.
pub struct Fused {
    pub table: EdgeHashTable,
    pub randoms: SimulationRandoms,
    pub labels: LabelMatrix,
    pub sizes: ComponentSizeTable,
    pub gains: Vec<u64>,
}

pub fn fused(g: &Graph, simulations: usize, seed: u64) -> Fused {
    let table = EdgeHashTable::build(g);
    let randoms = SimulationRandoms::generate(seed, simulations);
    let labels = propagate(g, &table, &randoms);
    let sizes = component_sizes(&labels);
    let gains = initial_marginal_gains(&labels, &sizes);
    Fused {
        table,
        randoms,
        labels,
        sizes,
        gains,
    }
}

/// Labels of simulation `r` as a column.
pub fn lane(labels: &LabelMatrix, r: usize) -> Vec<u32> {
    (0..labels.num_vertices() as u32).map(|v| labels.label(v, r)).collect()
}
