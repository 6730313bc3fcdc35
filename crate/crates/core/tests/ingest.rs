//! Round trips and index invariants of the ingest layer on arbitrary
//! records.

use cricrank::ingest::{load_csv, read_csv, write_csv};
use cricrank::{Dataset, DatasetOptions, InningsRecord, Outcome, Venue};
use proptest::prelude::*;

fn record() -> impl Strategy<Value = InningsRecord> {
    (
        "[A-Za-z][A-Za-z0-9 ,.'\"-]{0,10}[A-Za-z]",
        prop::option::of((1900i32..2020, 1u32..13, 1u32..29)),
        1900i32..2020,
        15.0f64..50.0,
        any::<bool>(),
        1u8..=4,
        prop::sample::select(vec!["Australia", "England", "India", "New Zealand", "West Indies"]),
        0u32..400,
        any::<bool>(),
    )
        .prop_map(|(player_id, date, calendar_year, age, home, match_innings, opp, runs, not_out)| InningsRecord {
            player_id,
            date: date.map(|(y, m, d)| format!("{y:04}-{m:02}-{d:02}")),
            calendar_year,
            age,
            home: if home { Venue::Home } else { Venue::Away },
            match_innings,
            opposition: opp.to_string(),
            runs,
            not_out,
        })
}

fn records() -> impl Strategy<Value = Vec<InningsRecord>> {
    prop::collection::vec(record(), 1..40)
}

proptest! {
    #[test]
    fn csv_round_trip(recs in records()) {
        let ds = Dataset::from_records(recs, &DatasetOptions::default()).unwrap();
        let mut out = Vec::new();
        write_csv(&ds, &mut out).unwrap();
        let back = read_csv(out.as_slice(), &DatasetOptions::default()).unwrap();
        prop_assert_eq!(back.records(), ds.records());
        prop_assert_eq!(back.fingerprint(), ds.fingerprint());
    }

    #[test]
    fn outcomes_and_indices_match_records(recs in records()) {
        let ds = Dataset::from_records(recs, &DatasetOptions::default()).unwrap();
        prop_assert_eq!(ds.len(), ds.records().len());
        prop_assert_eq!(ds.per_player_counts().iter().sum::<usize>(), ds.len());
        let mut seen = vec![false; ds.len()];
        for p in 0..ds.dims().players {
            for &r in ds.player_innings(p) {
                prop_assert!(!seen[r]);
                seen[r] = true;
                prop_assert_eq!(ds.innings()[r].player, p);
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
        for (rec, inn) in ds.records().iter().zip(ds.innings()) {
            prop_assert_eq!(&ds.player_ids()[inn.player], &rec.player_id);
            prop_assert_eq!(ds.calendar_year(inn.year), rec.calendar_year);
            prop_assert_eq!(&ds.opposition_labels()[inn.opposition], &rec.opposition);
            prop_assert_eq!(inn.is_duck(), rec.runs == 0 && !rec.not_out);
            let want = match (rec.runs, rec.not_out) {
                (x, true) => Outcome::Censored(x),
                (0, false) => Outcome::Duck,
                (x, false) => Outcome::Completed(x),
            };
            prop_assert_eq!(inn.outcome, want);
        }
        prop_assert!(ds.opposition_labels().windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn file_round_trip() {
    let recs = vec![
        InningsRecord {
            player_id: "Smith, J.".into(),
            date: Some("1999-12-31".into()),
            calendar_year: 1999,
            age: 27.125,
            home: Venue::Away,
            match_innings: 3,
            opposition: "India".into(),
            runs: 0,
            not_out: true,
        },
        InningsRecord {
            player_id: "O'Neil".into(),
            date: None,
            calendar_year: 2004,
            age: 33.0,
            home: Venue::Home,
            match_innings: 1,
            opposition: "England".into(),
            runs: 0,
            not_out: false,
        },
    ];
    let ds = Dataset::from_records(recs, &DatasetOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("innings.csv");
    write_csv(&ds, std::fs::File::create(&path).unwrap()).unwrap();
    let back = load_csv(&path).unwrap();
    assert_eq!(back.records(), ds.records());
    assert_eq!(back.dims().years, 6);
    assert_eq!(back.dims().decades, 2);
    assert!(!back.innings()[0].is_duck());
    assert!(back.innings()[1].is_duck());
}
