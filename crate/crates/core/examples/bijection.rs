//! Chord sequences and bilabelled trees.
//!
//! cargo run --example bijection -- "0,1;0,1;2,3"

use plancherel_trees::bijection::{
    all_sequences, bitree_to_sequence, enumerate_bitrees, sequence_to_bitree, BilabelledTree, ChordSequence,
};

fn main() -> plancherel_trees::Result<()> {
    let input = std::env::args().nth(1).unwrap_or_else(|| "0,1;0,1;2,3;1,4;2,5;3,6".into());
    let seq = ChordSequence::parse(&input)?;
    let tree = sequence_to_bitree(&seq)?;
    println!("sequence {seq}\n{tree}");
    println!("shape {}", tree.shape());
    let json = tree.to_json();
    println!("{json}");
    let back = bitree_to_sequence(&BilabelledTree::from_json(&json)?)?;
    println!("inverse gives {back}");
    assert_eq!(back, seq);

    for n in 1..=6 {
        let seqs = all_sequences(n);
        let ok = seqs.iter().all(|s| bitree_to_sequence(&sequence_to_bitree(s).unwrap()).unwrap() == *s);
        println!("n = {n}: {} sequences, {} bilabelled trees, roundtrip {ok}", seqs.len(), enumerate_bitrees(n).len());
    }
    Ok(())
}
