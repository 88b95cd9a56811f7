mod common;

use molga::molgraph::parse_smiles;
use molga::selfies::{decode_selfies, encode_selfies};
use proptest::prelude::*;

use common::{corpus, isomorphic};

#[test]
fn corpus_smiles_round_trips_to_isomorphic_graphs() {
    for smiles in corpus() {
        let mol = parse_smiles(&smiles).unwrap();
        let written = mol.to_smiles();
        let back = parse_smiles(&written).unwrap();
        assert!(isomorphic(&mol, &back), "{smiles} -> {written}");
        assert_eq!(back.to_smiles(), written, "{smiles}");
    }
}

#[test]
fn corpus_selfies_round_trips_to_isomorphic_graphs() {
    for smiles in corpus() {
        let mol = parse_smiles(&smiles).unwrap();
        let selfies = encode_selfies(&mol).unwrap();
        let back = decode_selfies(&selfies).unwrap();
        assert!(isomorphic(&mol, &back), "{smiles} -> {selfies}");
    }
}

fn corpus_index() -> impl Strategy<Value = usize> {
    0..1000usize
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn canonical_smiles_ignores_atom_order(i in corpus_index(), seed in any::<u64>()) {
        let mol = parse_smiles(&corpus()[i]).unwrap();
        let mut perm: Vec<usize> = (0..mol.num_atoms()).collect();
        let mut state = seed | 1;
        for k in (1..perm.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            perm.swap(k, (state % (k as u64 + 1)) as usize);
        }
        let shuffled = mol.permuted(&perm);
        prop_assert!(isomorphic(&mol, &shuffled));
        prop_assert_eq!(shuffled.to_smiles(), mol.to_smiles());
    }
}
