//! Scorecard ingestion.
//!
//! One CSV row is one batting innings. Loading resolves player,
//! year, decade and opposition labels into dense zero-based indices used by
//! the model; the raw rows are kept so the dataset can be written back out.
//!
//! Schema (header required, any column order, `date` optional):
//!
//! ```text
//! player,date,year,age,home,match_innings,opposition,runs,not_out
//! ```

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::IngestError;

/// First year of Test cricket; earlier years are rejected.
pub const FIRST_TEST_YEAR: i32 = 1877;

const COLUMNS: [&str; 9] = [
    "player",
    "date",
    "year",
    "age",
    "home",
    "match_innings",
    "opposition",
    "runs",
    "not_out",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Venue {
    Home,
    /// Neutral venues are recorded as away by the data producer.
    Away,
}

impl Venue {
    fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "H" | "h" | "1" => Some(Venue::Home),
            "A" | "a" | "2" => Some(Venue::Away),
            _ => None,
        }
    }

    fn code(self) -> &'static str {
        match self {
            Venue::Home => "H",
            Venue::Away => "A",
        }
    }
}

/// One batting innings as it appears in the source file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InningsRecord {
    pub player_id: String,
    pub date: Option<String>,
    pub calendar_year: i32,
    pub age: f64,
    pub home: Venue,
    /// Innings of the match, 1 to 4.
    pub match_innings: u8,
    pub opposition: String,
    pub runs: u32,
    pub not_out: bool,
}

impl InningsRecord {
    /// A completed (dismissed) innings of zero runs.
    pub fn is_duck(&self) -> bool {
        self.runs == 0 && !self.not_out
    }
}

/// How an innings enters the likelihood.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    /// Completed innings of zero.
    Duck,
    /// Completed innings with positive score.
    Completed(u32),
    /// Not out: the score is a lower bound (possibly zero).
    Censored(u32),
}

impl Outcome {
    pub fn runs(self) -> u32 {
        match self {
            Outcome::Duck => 0,
            Outcome::Completed(x) | Outcome::Censored(x) => x,
        }
    }

    pub fn is_censored(self) -> bool {
        matches!(self, Outcome::Censored(_))
    }
}

/// An innings with every label resolved to a zero-based index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Innings {
    pub player: usize,
    pub year: usize,
    pub decade: usize,
    /// 0 is the reference (alphabetically first) opposition.
    pub opposition: usize,
    pub home: Venue,
    pub match_innings: u8,
    pub age: f64,
    pub outcome: Outcome,
}

impl Innings {
    pub fn runs(&self) -> u32 {
        self.outcome.runs()
    }

    pub fn is_duck(&self) -> bool {
        self.outcome == Outcome::Duck
    }

    pub fn not_out(&self) -> bool {
        self.outcome.is_censored()
    }
}

/// Dimension counts: players, years, decades, oppositions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub players: usize,
    pub years: usize,
    pub decades: usize,
    pub oppositions: usize,
}

/// Optional constraints on how a dataset is indexed.
#[derive(Clone, Debug, Default)]
pub struct DatasetOptions {
    /// Fixed opposition vocabulary; labels outside it are rejected.
    pub oppositions: Option<Vec<String>>,
    /// Fixed calendar span (first, last) instead of the data's own range.
    pub year_span: Option<(i32, i32)>,
    /// Fixed player order; players without innings are kept.
    pub players: Option<Vec<String>>,
}

/// A validated, index-mapped collection of innings.
#[derive(Clone, Debug)]
pub struct Dataset {
    records: Vec<InningsRecord>,
    innings: Vec<Innings>,
    player_ids: Vec<String>,
    player_index: HashMap<String, usize>,
    first_year: i32,
    decade_of_year: Vec<usize>,
    n_decades: usize,
    opposition_labels: Vec<String>,
    per_player_counts: Vec<usize>,
    by_player: Vec<Vec<usize>>,
}

fn decade_of(year: i32) -> i32 {
    year.div_euclid(10)
}

impl Dataset {
    /// Index a set of raw records.
    pub fn from_records(
        records: Vec<InningsRecord>,
        opts: &DatasetOptions,
    ) -> Result<Self, IngestError> {
        Self::build(records, opts, |i| i as u64 + 2)
    }

    /// A dataset with players, years and oppositions but no innings. Chains
    /// run on it sample from the prior.
    pub fn prior_only(
        players: &[&str],
        year_span: (i32, i32),
        oppositions: &[&str],
    ) -> Result<Self, IngestError> {
        let opts = DatasetOptions {
            oppositions: Some(oppositions.iter().map(|s| s.to_string()).collect()),
            year_span: Some(year_span),
            players: Some(players.iter().map(|s| s.to_string()).collect()),
        };
        Self::build(Vec::new(), &opts, |i| i as u64 + 2)
    }

    fn build(
        records: Vec<InningsRecord>,
        opts: &DatasetOptions,
        line_of: impl Fn(usize) -> u64,
    ) -> Result<Self, IngestError> {
        for (i, r) in records.iter().enumerate() {
            check_record(r, line_of(i))?;
        }

        let (first_year, last_year) = match opts.year_span {
            Some((a, b)) => {
                if a > b || a < FIRST_TEST_YEAR {
                    return Err(IngestError::Layout(format!("bad year span {a}..{b}")));
                }
                (a, b)
            }
            None => {
                let lo = records.iter().map(|r| r.calendar_year).min();
                let hi = records.iter().map(|r| r.calendar_year).max();
                match (lo, hi) {
                    (Some(lo), Some(hi)) => (lo, hi),
                    _ => return Err(IngestError::Empty),
                }
            }
        };
        let decade_of_year: Vec<usize> = (first_year..=last_year)
            .map(|y| (decade_of(y) - decade_of(first_year)) as usize)
            .collect();
        let n_decades = (decade_of(last_year) - decade_of(first_year) + 1) as usize;

        let opposition_labels: Vec<String> = match &opts.oppositions {
            Some(list) => list
                .iter()
                .cloned()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
            None => records
                .iter()
                .map(|r| r.opposition.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        };
        if opposition_labels.is_empty() {
            return Err(IngestError::Layout("no opposition labels".into()));
        }
        let opp_index: HashMap<&str, usize> = opposition_labels
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();

        let mut player_ids: Vec<String> = Vec::new();
        let mut player_index: HashMap<String, usize> = HashMap::new();
        let fixed_players = opts.players.is_some();
        if let Some(list) = &opts.players {
            for p in list {
                if player_index.insert(p.clone(), player_ids.len()).is_some() {
                    return Err(IngestError::Layout(format!("duplicate player `{p}`")));
                }
                player_ids.push(p.clone());
            }
        }

        let mut innings = Vec::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            let line = line_of(i);
            let player = match player_index.get(&r.player_id) {
                Some(&p) => p,
                None if fixed_players => {
                    return Err(IngestError::Malformed {
                        line,
                        message: format!("player `{}` not in the fixed roster", r.player_id),
                    })
                }
                None => {
                    let p = player_ids.len();
                    player_index.insert(r.player_id.clone(), p);
                    player_ids.push(r.player_id.clone());
                    p
                }
            };
            if r.calendar_year < first_year || r.calendar_year > last_year {
                return Err(IngestError::Malformed {
                    line,
                    message: format!("year {} outside span", r.calendar_year),
                });
            }
            let year = (r.calendar_year - first_year) as usize;
            let opposition = *opp_index.get(r.opposition.as_str()).ok_or_else(|| {
                IngestError::UnknownOpposition {
                    line,
                    label: r.opposition.clone(),
                }
            })?;
            let outcome = if r.not_out {
                Outcome::Censored(r.runs)
            } else if r.runs == 0 {
                Outcome::Duck
            } else {
                Outcome::Completed(r.runs)
            };
            innings.push(Innings {
                player,
                year,
                decade: decade_of_year[year],
                opposition,
                home: r.home,
                match_innings: r.match_innings,
                age: r.age,
                outcome,
            });
        }

        let mut per_player_counts = vec![0usize; player_ids.len()];
        let mut by_player = vec![Vec::new(); player_ids.len()];
        for (idx, inn) in innings.iter().enumerate() {
            per_player_counts[inn.player] += 1;
            by_player[inn.player].push(idx);
        }

        Ok(Dataset {
            records,
            innings,
            player_ids,
            player_index,
            first_year,
            decade_of_year,
            n_decades,
            opposition_labels,
            per_player_counts,
            by_player,
        })
    }

    pub fn records(&self) -> &[InningsRecord] {
        &self.records
    }

    pub fn innings(&self) -> &[Innings] {
        &self.innings
    }

    pub fn len(&self) -> usize {
        self.innings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.innings.is_empty()
    }

    pub fn dims(&self) -> Dims {
        Dims {
            players: self.player_ids.len(),
            years: self.decade_of_year.len(),
            decades: self.n_decades,
            oppositions: self.opposition_labels.len(),
        }
    }

    pub fn player_ids(&self) -> &[String] {
        &self.player_ids
    }

    pub fn player_index(&self, id: &str) -> Option<usize> {
        self.player_index.get(id).copied()
    }

    /// Record indices for one player, in file order.
    pub fn player_innings(&self, player: usize) -> &[usize] {
        &self.by_player[player]
    }

    pub fn per_player_counts(&self) -> &[usize] {
        &self.per_player_counts
    }

    pub fn first_year(&self) -> i32 {
        self.first_year
    }

    pub fn last_year(&self) -> i32 {
        self.first_year + self.decade_of_year.len() as i32 - 1
    }

    /// Calendar year of a zero-based year index.
    pub fn calendar_year(&self, year: usize) -> i32 {
        self.first_year + year as i32
    }

    pub fn decade_of_year(&self) -> &[usize] {
        &self.decade_of_year
    }

    /// First calendar year of a decade index, e.g. 1870 for the 1877-1879 era.
    pub fn decade_start(&self, decade: usize) -> i32 {
        (decade_of(self.first_year) + decade as i32) * 10
    }

    pub fn opposition_labels(&self) -> &[String] {
        &self.opposition_labels
    }

    pub fn opposition_index(&self, label: &str) -> Option<usize> {
        self.opposition_labels.iter().position(|l| l == label)
    }

    /// Non-fatal data-quality findings.
    pub fn validate(&self) -> Vec<Warning> {
        let mut out = Vec::new();
        for (p, &n) in self.per_player_counts.iter().enumerate() {
            if n == 1 {
                out.push(Warning::SingleInnings {
                    player: self.player_ids[p].clone(),
                });
            }
        }
        for (i, r) in self.records.iter().enumerate() {
            if !(15.0..=55.0).contains(&r.age) {
                out.push(Warning::UnusualAge {
                    record: i,
                    age: r.age,
                });
            }
        }
        let mut seen = HashSet::new();
        for (i, r) in self.records.iter().enumerate() {
            let key = format!(
                "{}|{:?}|{}|{}|{:?}|{}|{}|{}|{}",
                r.player_id,
                r.date,
                r.calendar_year,
                r.age.to_bits(),
                r.home,
                r.match_innings,
                r.opposition,
                r.runs,
                r.not_out
            );
            if !seen.insert(key) {
                out.push(Warning::DuplicateRow { record: i });
            }
        }
        out
    }

    /// SHA-256 of the canonical CSV rendering.
    pub fn fingerprint(&self) -> String {
        let mut buf = Vec::new();
        write_csv(self, &mut buf).expect("writing to a Vec cannot fail");
        let mut hasher = Sha256::new();
        hasher.update(&buf);
        for label in &self.opposition_labels {
            hasher.update(label.as_bytes());
            hasher.update([0u8]);
        }
        hasher.update(self.first_year.to_le_bytes());
        hasher.update((self.decade_of_year.len() as u64).to_le_bytes());
        hasher.update((self.player_ids.len() as u64).to_le_bytes());
        format!("{:x}", hasher.finalize())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Warning {
    SingleInnings { player: String },
    UnusualAge { record: usize, age: f64 },
    DuplicateRow { record: usize },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::SingleInnings { player } => write!(f, "player `{player}` has a single innings"),
            Warning::UnusualAge { record, age } => {
                write!(f, "record {record}: age {age} outside [15, 55]")
            }
            Warning::DuplicateRow { record } => write!(f, "record {record} duplicates an earlier row"),
        }
    }
}

fn check_record(r: &InningsRecord, line: u64) -> Result<(), IngestError> {
    let bad = |message: String| IngestError::Malformed { line, message };
    if r.player_id.trim().is_empty() {
        return Err(bad("empty player".into()));
    }
    if !(1..=4).contains(&r.match_innings) {
        return Err(bad(format!("match innings {} not in 1..=4", r.match_innings)));
    }
    if !(r.age > 10.0 && r.age < 60.0) {
        return Err(bad(format!("age {} outside (10, 60)", r.age)));
    }
    if r.calendar_year < FIRST_TEST_YEAR {
        return Err(bad(format!("year {} precedes {FIRST_TEST_YEAR}", r.calendar_year)));
    }
    if r.opposition.trim().is_empty() {
        return Err(bad("empty opposition".into()));
    }
    Ok(())
}

fn is_iso_date(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && b.iter()
            .enumerate()
            .all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit())
}

/// Parse a scorecard CSV from any reader.
pub fn read_csv<R: Read>(reader: R, opts: &DatasetOptions) -> Result<Dataset, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &'static str| headers.iter().position(|h| h == name);
    let mut pos = HashMap::new();
    for name in COLUMNS {
        match col(name) {
            Some(i) => {
                pos.insert(name, i);
            }
            None if name == "date" => {}
            None => return Err(IngestError::MissingColumn(name)),
        }
    }

    let mut records = Vec::new();
    let mut lines = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |name: &str| pos.get(name).and_then(|&i| row.get(i)).unwrap_or("");
        let bad = |message: String| IngestError::Malformed { line, message };

        let date = match field("date") {
            "" => None,
            d if is_iso_date(d) => Some(d.to_string()),
            d => return Err(bad(format!("date `{d}` is not YYYY-MM-DD"))),
        };
        let calendar_year: i32 = field("year")
            .parse()
            .map_err(|_| bad(format!("year `{}`", field("year"))))?;
        let age: f64 = field("age")
            .parse()
            .map_err(|_| bad(format!("age `{}`", field("age"))))?;
        let home = Venue::parse(field("home"))
            .ok_or_else(|| bad(format!("home `{}` is not H or A", field("home"))))?;
        let match_innings: u8 = field("match_innings")
            .parse()
            .map_err(|_| bad(format!("match_innings `{}`", field("match_innings"))))?;
        let runs_raw: i64 = field("runs")
            .parse()
            .map_err(|_| bad(format!("runs `{}`", field("runs"))))?;
        if runs_raw < 0 {
            return Err(bad(format!("negative runs {runs_raw}")));
        }
        let runs = u32::try_from(runs_raw).map_err(|_| bad(format!("runs {runs_raw} too large")))?;
        let not_out = match field("not_out") {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("not_out `{other}` is not 0 or 1"))),
        };
        records.push(InningsRecord {
            player_id: field("player").to_string(),
            date,
            calendar_year,
            age,
            home,
            match_innings,
            opposition: field("opposition").to_string(),
            runs,
            not_out,
        });
        lines.push(line);
    }
    if records.is_empty() {
        return Err(IngestError::Empty);
    }
    Dataset::build(records, opts, |i| lines[i])
}

/// Load a scorecard CSV file.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset, IngestError> {
    load_csv_with(path, &DatasetOptions::default())
}

pub fn load_csv_with(path: impl AsRef<Path>, opts: &DatasetOptions) -> Result<Dataset, IngestError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(std::io::BufReader::new(file), opts)
}

/// Write the dataset's records in the ingest schema.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COLUMNS)?;
    for r in ds.records() {
        w.write_record([
            r.player_id.as_str(),
            r.date.as_deref().unwrap_or(""),
            &r.calendar_year.to_string(),
            &r.age.to_string(),
            r.home.code(),
            &r.match_innings.to_string(),
            r.opposition.as_str(),
            &r.runs.to_string(),
            if r.not_out { "1" } else { "0" },
        ])?;
    }
    w.flush().map_err(|e| IngestError::Csv(e.into()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "player,date,year,age,home,match_innings,opposition,runs,not_out\n";

    fn parse(body: &str) -> Result<Dataset, IngestError> {
        read_csv(format!("{HEADER}{body}").as_bytes(), &DatasetOptions::default())
    }

    #[test]
    fn maps_fields_directly() {
        let ds = parse("DG Bradman,1930-07-11,1930,21.7,A,1,England,8,0\n").unwrap();
        let r = &ds.records()[0];
        assert_eq!(r.player_id, "DG Bradman");
        assert_eq!(r.home, Venue::Away);
        assert_eq!(r.runs, 8);
        assert!(!r.is_duck());
        assert_eq!(ds.innings()[0].outcome, Outcome::Completed(8));
    }

    #[test]
    fn censored_zero_is_not_a_duck() {
        let ds = parse("A,,2000,25,H,2,India,0,1\nA,,2000,25,H,3,India,0,0\n").unwrap();
        assert!(!ds.records()[0].is_duck());
        assert!(ds.records()[0].not_out);
        assert_eq!(ds.innings()[0].outcome, Outcome::Censored(0));
        assert!(ds.innings()[1].is_duck());
    }

    #[test]
    fn year_index_is_contiguous() {
        let ds = parse("A,,1877,25,H,1,England,10,0\nB,,2017,30,A,2,Australia,3,0\n").unwrap();
        let d = ds.dims();
        assert_eq!(d.years, 141);
        assert_eq!(ds.innings()[1].year, 140);
        // 1877-1879 is its own era, then 1880s .. 2010s
        assert_eq!(d.decades, 15);
        assert_eq!(ds.decade_of_year()[0], 0);
        assert_eq!(ds.decade_of_year()[2], 0);
        assert_eq!(ds.decade_of_year()[3], 1);
        assert_eq!(ds.decade_start(1), 1880);
    }

    #[test]
    fn oppositions_are_alphabetical() {
        let ds = parse(
            "A,,2000,25,H,1,Zimbabwe,1,0\nA,,2000,25,H,1,Australia,1,0\nA,,2000,25,H,1,India,1,0\n",
        )
        .unwrap();
        assert_eq!(ds.opposition_labels(), ["Australia", "India", "Zimbabwe"]);
        assert_eq!(ds.innings()[0].opposition, 2);
        assert_eq!(ds.innings()[1].opposition, 0);
    }

    #[test]
    fn date_column_is_optional() {
        let ds = read_csv(
            "player,year,age,home,match_innings,opposition,runs,not_out\nA,2001,30,H,4,India,12,1\n"
                .as_bytes(),
            &DatasetOptions::default(),
        )
        .unwrap();
        assert_eq!(ds.records()[0].date, None);
    }

    #[test]
    fn errors_report_line_numbers() {
        let err = parse("A,,2000,25,H,1,India,5,0\nA,,2000,25,H,1,India,-3,0\n").unwrap_err();
        match err {
            IngestError::Malformed { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("negative"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse("A,,2000,25,H,5,India,5,0\n"),
            Err(IngestError::Malformed { .. })
        ));
        assert!(matches!(
            parse("A,,2000,8,H,1,India,5,0\n"),
            Err(IngestError::Malformed { .. })
        ));
        assert!(matches!(parse(""), Err(IngestError::Empty)));
        assert!(matches!(
            read_csv("player,year\n".as_bytes(), &DatasetOptions::default()),
            Err(IngestError::MissingColumn(_))
        ));
    }

    #[test]
    fn unknown_opposition_with_fixed_vocabulary() {
        let opts = DatasetOptions {
            oppositions: Some(vec!["Australia".into(), "England".into()]),
            ..Default::default()
        };
        let err = read_csv(format!("{HEADER}A,,2000,25,H,1,Narnia,5,0\n").as_bytes(), &opts)
            .unwrap_err();
        assert!(matches!(err, IngestError::UnknownOpposition { line: 2, .. }));
    }

    #[test]
    fn validate_warnings() {
        let ds = parse("A,,2000,25,H,1,India,5,0\nB,,2000,56,H,1,India,5,0\nB,,2000,56,H,1,India,5,0\n")
            .unwrap();
        let w = ds.validate();
        assert!(w.contains(&Warning::SingleInnings { player: "A".into() }));
        assert!(w.iter().any(|w| matches!(w, Warning::UnusualAge { record: 1, .. })));
        assert!(w.contains(&Warning::DuplicateRow { record: 2 }));
        // the single-innings player is retained
        assert_eq!(ds.dims().players, 2);

        let clean = parse("A,,2000,25,H,1,India,5,0\nA,,2001,26,A,2,India,0,0\n").unwrap();
        assert!(clean.validate().is_empty());
    }

    #[test]
    fn prior_only_layout() {
        let ds = Dataset::prior_only(&["a", "b"], (1995, 2004), &["X", "Y", "Z"]).unwrap();
        assert!(ds.is_empty());
        assert_eq!(
            ds.dims(),
            Dims {
                players: 2,
                years: 10,
                decades: 2,
                oppositions: 3
            }
        );
        assert!(ds.player_innings(1).is_empty());
    }

    #[test]
    fn csv_round_trip_is_identical() {
        let body = "A,2001-01-02,2001,30.25,H,4,India,12,1\nB,,2003,22,A,1,England,0,0\n";
        let ds = parse(body).unwrap();
        let mut out = Vec::new();
        write_csv(&ds, &mut out).unwrap();
        let back = read_csv(out.as_slice(), &DatasetOptions::default()).unwrap();
        assert_eq!(back.records(), ds.records());
        assert_eq!(back.fingerprint(), ds.fingerprint());
    }
}
