//! Embeds captions with the deterministic toy embedder and compares them.
//!
//! `cargo run --example text_embedding`

use semboost::text::{TextEmbedder, ToyEmbedder};

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn main() -> semboost::Result<()> {
    let e = ToyEmbedder::default();
    let captions = [
        "a person walks. the person faces east.",
        "a person walks. the person faces west.",
        "a person stands and raises a hand",
    ];
    let conds = captions.iter().map(|c| e.embed(c)).collect::<semboost::Result<Vec<_>>>()?;
    for (c, k) in captions.iter().zip(&conds) {
        println!("{:>2} rows of {} for {c:?}", k.token_count(), e.dim);
    }
    println!("sentence cosine east/west: {:.3}", cosine(&conds[0].sentence, &conds[1].sentence));
    println!("sentence cosine east/stand: {:.3}", cosine(&conds[0].sentence, &conds[2].sentence));
    let null = e.null();
    println!("null condition: is_null = {}, real rows = {}", null.is_null, null.token_count());
    assert_eq!(e.embed(captions[0])?, conds[0]);
    Ok(())
}
