use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wmed_cgp::cgp::{active_nodes, decode, genome_size, CgpParams, GateSet, Genome, ARITY};
use wmed_cgp::generators::gen_exact_multiplier;
use wmed_cgp::{mutate, Signedness};

fn params(n_i: usize, n_o: usize, r: usize, c: usize) -> Arc<CgpParams> {
    Arc::new(CgpParams::new(n_i, n_o, r, c, GateSet::standard()).unwrap())
}

fn grid() -> impl Strategy<Value = (Arc<CgpParams>, u64)> {
    (1usize..8, 1usize..5, 1usize..4, 1usize..12, any::<u64>()).prop_map(|(i, o, r, c, s)| (params(i, o, r, c), s))
}

#[test]
fn genome_sizes() {
    assert_eq!(genome_size(&params(5, 2, 3, 4)), 38);
    assert_eq!(genome_size(&params(16, 16, 1, 320)), 976);
    assert_eq!(genome_size(&params(1, 1, 1, 1)), 4);
}

#[test]
fn ten_thousand_mutants_stay_valid() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let seeds = [
        gen_exact_multiplier(4, Signedness::Unsigned).unwrap(),
        Genome::random(params(5, 2, 3, 4), &mut rng),
    ];
    for seed in seeds {
        let mut g = seed;
        for _ in 0..5_000 {
            g = mutate(&g, 5, &mut rng);
            assert!(g.validate().unwrap().is_empty());
        }
    }
}

#[test]
fn length_mismatch_is_an_error() {
    let g = Genome::new(params(2, 1, 1, 1), vec![0, 1, 2]);
    assert!(g.validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn decoded_gates_read_earlier_addresses((p, seed) in grid()) {
        let g = Genome::random(p, &mut ChaCha8Rng::seed_from_u64(seed));
        let net = decode(&g).unwrap();
        for gate in net.gates() {
            for &src in gate.fan_in() {
                prop_assert!(src < gate.addr);
            }
        }
        let addrs: Vec<u32> = net.gates().iter().map(|g| g.addr).collect();
        prop_assert!(addrs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn inactive_genes_do_not_matter((p, seed) in grid(), value in any::<u32>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Genome::random(p.clone(), &mut rng);
        let active = active_nodes(&g);
        let net = decode(&g).unwrap();
        for node in (0..p.nodes()).filter(|&n| !active[n]) {
            let mut h = g.clone();
            for k in 0..=ARITY {
                let idx = node * (ARITY + 1) + k;
                h.genes_mut()[idx] = value % p.gene_limit(idx) as u32;
            }
            prop_assert_eq!(decode(&h).unwrap(), net.clone());
        }
    }

    #[test]
    fn reencoding_round_trips((p, seed) in grid()) {
        let g = Genome::random(p.clone(), &mut ChaCha8Rng::seed_from_u64(seed));
        let net = decode(&g).unwrap();
        let again = net.to_genome(p).unwrap();
        prop_assert_eq!(decode(&again).unwrap(), net);
    }

    #[test]
    fn text_round_trip((p, seed) in grid()) {
        let g = Genome::random(p, &mut ChaCha8Rng::seed_from_u64(seed));
        let back = Genome::from_text(&g.to_text(), GateSet::standard()).unwrap();
        prop_assert_eq!(back.genes(), g.genes());
        prop_assert_eq!(back.params(), g.params());
    }

    #[test]
    fn out_of_range_genes_are_reported((p, seed) in grid(), pick in any::<prop::sample::Index>()) {
        let mut g = Genome::random(p.clone(), &mut ChaCha8Rng::seed_from_u64(seed));
        let idx = pick.index(g.genes().len());
        g.genes_mut()[idx] = p.gene_limit(idx) as u32;
        prop_assert_eq!(g.validate().unwrap(), vec![idx]);
    }

    #[test]
    fn area_counts_only_active_gates((p, seed) in grid()) {
        let g = Genome::random(p.clone(), &mut ChaCha8Rng::seed_from_u64(seed));
        let net = decode(&g).unwrap();
        let active = active_nodes(&g);
        let expect: f64 = (0..p.nodes())
            .filter(|&n| active[n])
            .map(|n| p.gates.get(g.node_genes(n)[ARITY]).unwrap().cost)
            .sum();
        prop_assert!((net.area() - expect).abs() < 1e-9);
        prop_assert_eq!(net.active_count(), active.iter().filter(|&&a| a).count());
    }
}

/// Re-routing an output from a gate to one of that gate's sources removes at
/// least that gate, so the area strictly drops.
#[test]
fn bypassing_an_active_gate_reduces_area() {
    let g = gen_exact_multiplier(3, Signedness::Unsigned).unwrap();
    let net = decode(&g).unwrap();
    let p = g.params();
    let mut checked = 0;
    for o in 0..p.outputs {
        let src = g.output_genes()[o] as usize;
        if src < p.inputs {
            continue;
        }
        let node = src - p.inputs;
        if p.gates.get(g.node_genes(node)[ARITY]).unwrap().arity() != 2 {
            continue;
        }
        let mut h = g.clone();
        let idx = p.output_gene(o);
        h.genes_mut()[idx] = g.node_genes(node)[0];
        let still_used = h.output_genes().contains(&(src as u32))
            || decode(&h).unwrap().gates().iter().any(|x| x.addr as usize == src);
        if !still_used {
            assert!(decode(&h).unwrap().area() < net.area());
            checked += 1;
        }
    }
    assert!(checked > 0);
}
