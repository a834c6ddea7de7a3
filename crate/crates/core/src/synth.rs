//! Templated news-style (source, summary) pairs for tests and benchmarks.
//!
//! Every summary entity is copied from its source, which also holds at least
//! one other entity of the same kind, so a corrupted entity always has a
//! plausible in-source substitute. Entities are never adjacent.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::entities::{Lexicon, RuleTagger};

pub const PERSONS: [&str; 16] = [
    "okafor", "muller", "garcia", "rossi", "tanaka", "novak", "silva", "kowalski", "dubois", "jensen", "haddad", "petrov",
    "moreau", "ahmed", "larsen", "costa",
];

pub const PLACES: [&str; 16] = [
    "china", "paris", "texas", "ohio", "kenya", "peru", "madrid", "berlin", "oslo", "cairo", "lagos", "dublin", "quebec",
    "manila", "lima", "kyoto",
];

pub const COMPANIES: [&str; 8] = ["acme", "zenith", "orbitel", "vertex", "nimbus", "apexon", "solaris", "kestrel"];

const MONTH_NAMES: [&str; 12] = [
    "January", "February", "March", "April", "May", "June", "July", "August", "September", "October", "November",
    "December",
];

/// Lexicon covering every proper noun the generator emits.
pub fn lexicon() -> Lexicon {
    Lexicon::new(PERSONS.iter().chain(&PLACES).chain(&COMPANIES).copied())
}

pub fn tagger() -> RuleTagger {
    RuleTagger::new(lexicon())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthPair {
    pub doc_id: String,
    pub source: String,
    pub summary: String,
    /// Summary entities deliberately left out of the source.
    pub absent: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    /// Probability that a summary entity is swapped for one the source lacks.
    pub absent_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            absent_rate: 0.0,
        }
    }
}

fn cap(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

struct Slots {
    persons: Vec<String>,
    places: Vec<String>,
    companies: Vec<String>,
    numbers: Vec<u32>,
    dates: Vec<String>,
}

impl Slots {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        let pick = |rng: &mut ChaCha8Rng, list: &[&str], n: usize| -> Vec<String> { list.choose_multiple(rng, n).map(|s| cap(s)).collect() };
        let persons = pick(rng, &PERSONS, 3);
        let places = pick(rng, &PLACES, 3);
        let companies = pick(rng, &COMPANIES, 3);
        // Counts and days never collide, so every numeric surface is unique.
        let mut pool: Vec<u32> = (30..100).collect();
        pool.shuffle(rng);
        let numbers = pool[..4].to_vec();
        let mut days: Vec<u32> = (1..29).collect();
        days.shuffle(rng);
        let mut months: Vec<&str> = MONTH_NAMES.to_vec();
        months.shuffle(rng);
        let dates = (0..2).map(|i| format!("{} {}", days[i], months[i])).collect();
        Slots {
            persons,
            places,
            companies,
            numbers,
            dates,
        }
    }
}

/// One templated pair; `absent` replaces summary entity surfaces with values
/// the source does not contain.
type Template = (String, Vec<String>, fn(&[String]) -> String);

fn render(rng: &mut ChaCha8Rng, absent_rate: f64) -> (String, String, usize) {
    let s = Slots::draw(rng);
    let (p, x, c, n, d) = (&s.places, &s.persons, &s.companies, &s.numbers, &s.dates);
    let family = rng.gen_range(0..4);
    let flip = rng.gen_bool(0.5);
    let (source, mut summary_slots, summary_fmt): Template = match family {
        0 => {
            let first = format!("Police in {} said {} people were killed and {} were injured when a gunman opened fire at a school on {}.", p[0], n[0], n[1], d[0]);
            let second = format!("The attacker, named as {}, was arrested in {} after a chase.", x[0], p[1]);
            let third = format!("Officials said {} victims remain in hospital.", n[2]);
            let source = if flip { format!("{first} {third} {second}") } else { format!("{first} {second} {third}") };
            (source, alloc::vec![n[0].to_string(), n[1].to_string(), p[0].clone()], |v| format!("{} killed, {} injured in {} school shooting.", v[0], v[1], v[2]))
        }
        1 => {
            let first = format!("A powerful storm struck {} on {}, with winds of {} km per hour.", p[0], d[0], n[3]);
            let second = format!("The storm destroyed {} homes and left {} families without power.", n[0], n[1]);
            let third = format!("Rescue teams from {} arrived on {}.", p[1], d[1]);
            let source = if flip { format!("{first} {second} {third}") } else { format!("{first} {third} {second}") };
            (source, alloc::vec![n[0].to_string(), p[0].clone(), d[0].clone()], |v| format!("Storm destroys {} homes in {} on {}.", v[0], v[1], v[2]))
        }
        2 => {
            let first = format!("{} scored {} points as {} beat {} on {}.", x[0], n[0], p[0], p[1], d[0]);
            let second = format!("{} added {} points for the visitors from {}.", x[1], n[1], p[1]);
            let third = "The coach praised the defence after the match.".to_string();
            let source = if flip { format!("{first} {second} {third}") } else { format!("{first} {third} {second}") };
            (source, alloc::vec![x[0].clone(), n[0].to_string(), p[0].clone(), p[1].clone()], |v| format!("{} scores {} as {} defeat {}.", v[0], v[1], v[2], v[3]))
        }
        _ => {
            let first = format!("Shares in {} rose {} percent on {} after strong sales in {}.", c[0], n[0], d[0], p[0]);
            let second = format!("Rival {} fell {} percent as demand slowed.", c[1], n[1]);
            let third = format!("Chief executive {} said the company would hire {} staff.", x[0], n[2]);
            let source = if flip { format!("{first} {second} {third}") } else { format!("{first} {third} {second}") };
            (
                source,
                alloc::vec![c[0].clone(), format!("{} percent", n[0]), x[0].clone()],
                |v| format!("{} shares jump {} after sales boost, says {}.", v[0], v[1], v[2]),
            )
        }
    };
    let mut absent = 0;
    if absent_rate > 0.0 {
        for slot in summary_slots.iter_mut() {
            if rng.gen::<f64>() < absent_rate {
                if let Some(fresh) = absent_replacement(rng, slot, &source) {
                    *slot = fresh;
                    absent += 1;
                }
            }
        }
    }
    (source, summary_fmt(&summary_slots), absent)
}

/// A same-shaped surface that does not occur in `source`.
fn absent_replacement(rng: &mut ChaCha8Rng, surface: &str, source: &str) -> Option<String> {
    let lower = source.to_lowercase();
    let occurs = |cand: &str| lower.split(|ch: char| !ch.is_alphanumeric()).any(|w| w == cand.to_lowercase());
    let first = surface.split(' ').next()?;
    let rest = &surface[first.len()..];
    for _ in 0..64 {
        let cand = if first.bytes().all(|b| b.is_ascii_digit()) {
            format!("{}{}", rng.gen_range(30..100u32), rest)
        } else {
            let all: Vec<&str> = PERSONS.iter().chain(&PLACES).chain(&COMPANIES).copied().collect();
            let same = if PERSONS.iter().any(|w| w.eq_ignore_ascii_case(first)) {
                &all[..16]
            } else if PLACES.iter().any(|w| w.eq_ignore_ascii_case(first)) {
                &all[16..32]
            } else {
                &all[32..]
            };
            cap(same.choose(rng)?)
        };
        let head = cand.split(' ').next().unwrap_or("");
        if !occurs(head) {
            return Some(cand);
        }
    }
    None
}

/// `n` pairs with ids `{prefix}-{i}`.
pub fn generate(n: usize, prefix: &str, cfg: &SynthConfig) -> Vec<SynthPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..n)
        .map(|i| {
            let (source, summary, absent) = render(&mut rng, cfg.absent_rate);
            SynthPair {
                doc_id: format!("{prefix}-{i}"),
                source,
                summary,
                absent,
            }
        })
        .collect()
}
