//! Indicator construction and biclique search for a single target entry,
//! comparing strict (SNN) and mixed (MSNN) anchors.
//!
//! ```text
//! cargo run --release --example anchor_search
//! ```

use msnn::anchors::{build_indicator, max_biclique, partition_subgroups};
use msnn::{AnchorMode, AnchorSet, BicliqueMode, EntryQuery, ObservedPanel, Treatment};

fn main() -> msnn::Result<()> {
    // Two levels; 0 marks a missing entry.
    #[rustfmt::skip]
    let labels: [u16; 48] = [
        0, 1, 2, 2, 1, 2, 2, 1,
        1, 1, 2, 2, 1, 2, 0, 2,
        1, 1, 2, 2, 1, 2, 2, 1,
        1, 2, 2, 2, 1, 2, 2, 1,
        1, 1, 1, 2, 1, 2, 2, 1,
        2, 1, 2, 2, 1, 1, 2, 1,
    ];
    let t = labels.iter().map(|&l| Treatment(l)).collect();
    let panel = ObservedPanel::new(6, 8, 2, t, vec![1.0; 48])?;
    let query = EntryQuery::new(0, 0, 1);

    for mode in [AnchorMode::Strict, AnchorMode::Mixed] {
        let b = build_indicator(&panel, &query, mode);
        println!("{mode:?}: {} ones among candidate rows {:?} and columns {:?}", b.ones(), b.candidate_rows(), b.candidate_cols());
        for search in [BicliqueMode::exact(), BicliqueMode::Greedy] {
            match max_biclique(&b, 2, 2, search)? {
                Some(bc) => {
                    let anchor = AnchorSet::from_biclique(&panel, query, mode, bc.clone());
                    println!(
                        "  {search:?}: rows {:?} cols {:?} area {} valid {} maximal {}",
                        bc.rows,
                        bc.cols,
                        bc.area(),
                        anchor.is_valid(&panel),
                        bc.is_maximal(&b)
                    );
                    if mode == AnchorMode::Mixed && anchor.rows.len() >= 4 {
                        let plan = partition_subgroups(&anchor, 2, 7)?;
                        for (k, s) in plan.subgroups.iter().enumerate() {
                            println!("    subgroup {k}: rows {:?}", s.rows);
                        }
                    }
                }
                None => println!("  {search:?}: no 2x2 anchor"),
            }
        }
    }
    Ok(())
}
