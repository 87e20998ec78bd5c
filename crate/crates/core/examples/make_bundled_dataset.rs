//! Regenerates `data/smartphone_market.csv`.
//!
//! Inputs are smooth made-up curves shaped like the 2009–2017 smartphone
//! market (rising platform-1 investment, falling platform-1 price); shares
//! come from simulating the reference observed-market coefficients over
//! those inputs and rounding to four decimals.
//!
//!     cargo run --example make_bundled_dataset > crates/core/data/smartphone_market.csv

use replicator_influence::dataset::NormalizationRecord;
use replicator_influence::learn::split_len;
use replicator_influence::{reference, simulate, InputVector, ScenarioSpec, SharesState};

const LEN: usize = 33;
const INITIAL_SHARE: f64 = 0.15;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn round_to(v: f64, digits: i32) -> f64 {
    let s = 10f64.powi(digits);
    (v * s).round() / s
}

fn raw_inputs() -> Vec<[f64; 4]> {
    let mut rows: Vec<[f64; 4]> = (0..LEN)
        .map(|t| {
            let t = t as f64;
            let wobble = if t > 0.0 { 1.0 } else { 0.0 };
            let inv1 = 1.0 + (-t / 2.5).exp() + 2.6 * sigmoid((t - 15.0) / 3.5)
                - 2.6 * sigmoid(-15.0 / 3.5);
            let inv2 = 0.35 + 0.07 * t + 0.05 * (1.7 * t).sin();
            let price1 = 440.0 - 8.0 * t + 10.0 * (0.9 * t).cos() * wobble;
            let price2 = 700.0 - 90.0 * sigmoid((t - 3.0) / 2.0) + 60.0 * sigmoid((t - 18.0) / 3.0)
                - 40.0 * sigmoid((t - 27.0) / 2.0)
                + 6.0 * (1.1 * t).sin() * wobble;
            [
                round_to(inv1, 3),
                round_to(inv2, 3),
                round_to(price1, 2),
                round_to(price2, 2),
            ]
        })
        .collect();
    // Platform-2 launches at its peak price.
    let peak = rows[..26].iter().map(|r| r[3]).fold(f64::MIN, f64::max);
    rows[0][3] = peak.max(rows[0][3]) + 1.0;
    rows
}

fn main() -> replicator_influence::Result<()> {
    let raw = raw_inputs();
    let inputs: Vec<InputVector> = raw
        .iter()
        .map(|r| InputVector::new(r.to_vec()))
        .collect::<Result<_, _>>()?;
    let split = split_len(LEN, 0.2)?;
    let record = NormalizationRecord::fit(&inputs, split.train)?;
    let scaled = record.apply_all(&inputs)?;
    let spec = ScenarioSpec::observed(scaled, SharesState::pair(INITIAL_SHARE)?, 1.0)?;
    let traj = simulate::run(&spec, &reference::observed_market_alpha())?;

    println!("# Synthetic two-platform smartphone market, 2009Q1-2017Q1 (33 quarters).");
    println!("# NOT real data: inputs are made-up curves of realistic magnitude, shares are");
    println!("# simulated from the reference observed-market coefficients and rounded.");
    println!("# y_1 platform-1 investment (USD bn), y_2 platform-2 investment (USD bn),");
    println!("# y_3 platform-1 average price (USD), y_4 platform-2 average price (USD).");
    println!("label,share_1,share_2,y_1,y_2,y_3,y_4");
    for (t, (row, state)) in raw.iter().zip(&traj.states).enumerate() {
        let s1 = round_to(state[0], 4);
        let s2 = round_to(1.0 - s1, 4);
        println!(
            "{}Q{},{s1},{s2},{},{},{},{}",
            2009 + t / 4,
            t % 4 + 1,
            row[0],
            row[1],
            row[2],
            row[3]
        );
    }
    Ok(())
}
