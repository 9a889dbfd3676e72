use proptest::prelude::*;

use trapsim::codec::{
    classify_level, decode, encode, encode_pulses, estimate_frequency, EnergyLevel, NodeId, Polarity, PulseTrain,
    Slot, MAX_OOK_FREQ_HZ, MIN_OOK_FREQ_HZ,
};

fn level() -> impl Strategy<Value = EnergyLevel> {
    prop::sample::select(EnergyLevel::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn encoded_edges_alternate(count in 1u32..300, f in MIN_OOK_FREQ_HZ..=MAX_OOK_FREQ_HZ, start in 0u64..1 << 40) {
        let train = encode_pulses(count, f, start).unwrap();
        let edges: Vec<_> = train.edges().collect();
        prop_assert_eq!(edges.len(), 2 * count as usize);
        for (i, e) in edges.iter().enumerate() {
            let want = if i % 2 == 0 { Polarity::Rising } else { Polarity::Falling };
            prop_assert_eq!(e.polarity, want);
        }
        prop_assert!(edges.windows(2).all(|w| w[0].time < w[1].time));
        prop_assert!(train.origin() == start && edges.last().unwrap().time <= train.end());
        prop_assert_eq!(PulseTrain::from_edges(train.origin(), train.end(), &edges).unwrap(), train);
    }

    #[test]
    fn frequency_estimate_is_close(f in 1_000.0f64..=40_000.0, lvl in level(), start in 0u64..1 << 40) {
        let train = encode(lvl, f, start).unwrap();
        let est = estimate_frequency(&train).unwrap();
        // Edges are rounded to whole µs, so the fitted slope is off by at
        // most about one µs across the shortest burst (31 periods).
        let period = 1e6 / f;
        let bound = f / (31.0 * period);
        prop_assert!((est.freq_hz - f).abs() <= bound.max(1.0), "{} vs {}", est.freq_hz, f);
        prop_assert_eq!(est.incoherent_pulses, 0);
    }

    #[test]
    fn decode_inverts_encode(lvl in level(), slot in 0u16..15, start in 0u64..1 << 40) {
        let roster: Vec<Slot> = (0..15).map(|i| Slot { node: NodeId(i), freq_hz: 12_000.0 + 2_000.0 * i as f64 }).collect();
        let train = encode(lvl, roster[slot as usize].freq_hz, start).unwrap();
        prop_assert_eq!(decode(&train, &roster), trapsim::DecodeOutcome::Decoded { node: NodeId(slot), level: lvl });
    }

    #[test]
    fn classification_is_monotone(a in 1usize..400, b in 1usize..400) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(classify_level(lo).unwrap() <= classify_level(hi).unwrap());
    }
}

#[test]
fn classification_boundaries_match_nearest_nominal() {
    // Oracle: nearest nominal count on a log scale, ties going up.
    for n in 1usize..=400 {
        let nearest = EnergyLevel::ALL
            .iter()
            .copied()
            .min_by(|a, b| {
                let da = ((n as f64).ln() - (a.nominal_pulses() as f64).ln()).abs();
                let db = ((n as f64).ln() - (b.nominal_pulses() as f64).ln()).abs();
                da.partial_cmp(&db).unwrap().then(b.cmp(a))
            })
            .unwrap();
        let got = classify_level(n).unwrap();
        if n == 91 {
            // The documented Low range ends at 91, just above the midpoint 90.5.
            assert_eq!((got, nearest), (EnergyLevel::Low, EnergyLevel::High));
            continue;
        }
        assert_eq!(got, nearest, "n = {n}");
    }
}
