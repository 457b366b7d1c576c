//! Regenerates the bundled synthetic demo series. Run manually after
//! changing the generator:
//! `cargo test -p kalman-trend --test regen_fixtures -- --ignored`

use kalman_trend::market_data::{synthesize, SynthKind};

#[test]
#[ignore = "writes into fixtures/; run manually"]
fn regenerate_synthetic_daily() {
    let series = synthesize(SynthKind::RandomWalk, 253, 42, 12.0).unwrap();
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../fixtures/synthetic_daily.csv"
    );
    std::fs::write(path, series.to_csv()).unwrap();
}
